//! Physical unit tags for channels. Values are held in radians internally
//! and written to files in degrees.

use serde::{Deserialize, Serialize};

pub const RAD_TO_DEG: f64 = 180.0 / std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Angle,
    Rate,
    #[default]
    Other,
}

impl Unit {
    /// Factor from internal to file units.
    pub fn output_scale(self) -> f64 {
        match self {
            Unit::Angle | Unit::Rate => RAD_TO_DEG,
            Unit::Other => 1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Unit::Angle => "deg",
            Unit::Rate => "deg/s",
            Unit::Other => "",
        }
    }

    /// Unit of the time integral of a signal in this unit.
    pub fn integrated(self) -> Unit {
        match self {
            Unit::Rate => Unit::Angle,
            _ => self,
        }
    }

    pub fn integrated_label(self) -> &'static str {
        match self {
            Unit::Angle => "deg*s",
            Unit::Rate => "deg",
            Unit::Other => "",
        }
    }
}

/// Unit tags for every channel of a plant.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SignalUnits {
    pub state: Vec<Unit>,
    pub input: Vec<Unit>,
    pub regulated: Vec<Unit>,
    pub limited: Vec<Unit>,
}

impl SignalUnits {
    pub fn dimensionless(n_p: usize, m: usize) -> Self {
        SignalUnits {
            state: vec![Unit::Other; n_p],
            input: vec![Unit::Other; m],
            regulated: vec![Unit::Other; m],
            limited: vec![Unit::Other; m],
        }
    }
}

/// `%.9g`-style formatting.
pub fn format_sig9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (8 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
