//! Study configuration: JSON schema, validation and one-time unit
//! conversion into a ready-to-run [`Study`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::controller::{ControllerMode, ServoLoop};
use crate::design::{lqr_pi_design, PolynomialSpec};
use crate::error::{Error, Result};
use crate::margins::FrequencyGrid;
use crate::model::{ConstraintBox, Plant, ServoGains};
use crate::numerics::{CareSolution, RealMatrix, RealVector};
use crate::simulate::{CommandSchedule, SimConfig, DEFAULT_DT, DEFAULT_VIOLATION_TOLERANCE};
use crate::units::{SignalUnits, Unit};

/// The bundled aircraft lateral-directional scenario.
pub const AIRCRAFT_LATERAL_JSON: &str = include_str!("../assets/aircraft_lateral.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleUnit {
    #[default]
    Deg,
    Rad,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Channel {
    pub label: String,
    #[serde(default)]
    pub unit: Unit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    pub a_p: Vec<Vec<f64>>,
    pub b_p: Vec<Vec<f64>>,
    pub c_reg: Vec<Vec<f64>>,
    /// Zero when absent.
    #[serde(default)]
    pub d_reg: Option<Vec<Vec<f64>>>,
    pub c_lim: Vec<Vec<f64>>,
    pub states: Vec<Channel>,
    pub inputs: Vec<Channel>,
    pub regulated: Vec<Channel>,
    pub limited: Vec<Channel>,
}

/// Bounds in the declared angle unit; `null` means unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintConfig {
    pub u_min: Vec<Option<f64>>,
    pub u_max: Vec<Option<f64>>,
    pub z_min: Vec<Option<f64>>,
    pub z_max: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Weight {
    Diagonal(Vec<f64>),
    Full(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainConfig {
    pub k_i: Vec<Vec<f64>>,
    pub k_p: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    /// LQR weights; ignored when `gains` is given.
    #[serde(default)]
    pub q: Option<Weight>,
    #[serde(default)]
    pub r: Option<Weight>,
    /// Fixed PI gains instead of an LQR design.
    #[serde(default)]
    pub gains: Option<GainConfig>,
    /// One root `-α` per constraint channel (inputs, then limited outputs).
    #[serde(default)]
    pub alpha: Option<Vec<f64>>,
    /// Explicit polynomial roots per constraint channel.
    #[serde(default)]
    pub roots: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntry {
    pub t: f64,
    pub y_cmd: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub horizon: f64,
    /// `[e_yI; x_p]` in the declared units; zero when absent.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default = "default_tolerance")]
    pub violation_tolerance: f64,
    /// Zero command over the whole horizon when absent.
    #[serde(default)]
    pub schedule: Option<Vec<ScheduleEntry>>,
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn default_tolerance() -> f64 {
    DEFAULT_VIOLATION_TOLERANCE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginConfig {
    #[serde(default = "default_omega_min")]
    pub omega_min: f64,
    #[serde(default = "default_omega_max")]
    pub omega_max: f64,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_omega_min() -> f64 {
    FrequencyGrid::default().min
}

fn default_omega_max() -> f64 {
    FrequencyGrid::default().max
}

fn default_points() -> usize {
    FrequencyGrid::default().points
}

impl Default for MarginConfig {
    fn default() -> Self {
        MarginConfig {
            omega_min: default_omega_min(),
            omega_max: default_omega_max(),
            points: default_points(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    #[serde(default)]
    pub name: Option<String>,
    /// Unit of every angle and rate value in the file.
    #[serde(default)]
    pub angle_unit: AngleUnit,
    pub plant: PlantConfig,
    pub constraints: ConstraintConfig,
    pub design: DesignConfig,
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub margins: MarginConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl StudyConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    pub fn aircraft_lateral() -> Self {
        Self::from_json(AIRCRAFT_LATERAL_JSON).expect("bundled scenario is valid")
    }
}

/// Validated study with every value in internal units.
#[derive(Debug, Clone)]
pub struct Study {
    pub name: String,
    pub config: StudyConfig,
    pub sys: ServoLoop,
    pub poly: PolynomialSpec,
    /// `None` when gains were given explicitly.
    pub care: Option<CareSolution>,
    pub q: Option<RealMatrix>,
    pub r: Option<RealMatrix>,
    pub schedule: CommandSchedule,
    pub dt: f64,
    pub x0: Option<Vec<f64>>,
    pub violation_tolerance: f64,
    pub grid: FrequencyGrid,
    pub units: SignalUnits,
}

impl Study {
    pub fn sim_config(&self, mode: ControllerMode) -> SimConfig {
        SimConfig {
            dt: self.dt,
            x0: self.x0.clone(),
            mode,
            violation_tolerance: self.violation_tolerance,
        }
    }

    pub fn m(&self) -> usize {
        self.sys.m()
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<Study> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Study::try_from(StudyConfig::from_json(&text)?)
}

fn config_err(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

fn matrix(rows: &[Vec<f64>], expected: (usize, usize), path: &str) -> Result<RealMatrix> {
    if rows.len() != expected.0 {
        return Err(config_err(path, format!("expected {} rows, got {}", expected.0, rows.len())));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != expected.1 {
            return Err(config_err(
                format!("{path}[{i}]"),
                format!("expected {} columns, got {}", expected.1, row.len()),
            ));
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(config_err(format!("{path}[{i}][{j}]"), "value must be finite"));
        }
    }
    Ok(RealMatrix::from_fn(expected.0, expected.1, |i, j| rows[i][j]))
}

fn weight(w: &Weight, size: usize, path: &str) -> Result<RealMatrix> {
    match w {
        Weight::Diagonal(d) => {
            if d.len() != size {
                return Err(config_err(path, format!("expected {size} diagonal entries, got {}", d.len())));
            }
            Ok(RealMatrix::from_diagonal(&RealVector::from_column_slice(d)))
        }
        Weight::Full(rows) => matrix(rows, (size, size), path),
    }
}

fn angle_scale(unit: AngleUnit, channel: Unit) -> f64 {
    match (unit, channel) {
        (AngleUnit::Deg, Unit::Angle | Unit::Rate) => 1.0 / crate::units::RAD_TO_DEG,
        _ => 1.0,
    }
}

fn bounds_vector(values: &[Option<f64>], units: &[Unit], angle: AngleUnit, fill: f64, path: &str) -> Result<RealVector> {
    if values.len() != units.len() {
        return Err(config_err(path, format!("expected {} entries, got {}", units.len(), values.len())));
    }
    Ok(RealVector::from_iterator(
        values.len(),
        values
            .iter()
            .zip(units)
            .map(|(v, u)| v.map_or(fill, |v| v * angle_scale(angle, *u))),
    ))
}

impl TryFrom<StudyConfig> for Study {
    type Error = Error;

    fn try_from(config: StudyConfig) -> Result<Self> {
        let pc = &config.plant;
        let n_p = pc.a_p.len();
        let m = pc.inputs.len();
        if n_p == 0 || m == 0 {
            return Err(config_err("plant", "needs at least one state and one input"));
        }
        for (channels, expected, path) in [
            (&pc.states, n_p, "plant.states"),
            (&pc.regulated, m, "plant.regulated"),
            (&pc.limited, m, "plant.limited"),
        ] {
            if channels.len() != expected {
                return Err(config_err(path, format!("expected {expected} channels, got {}", channels.len())));
            }
        }
        let a_p = matrix(&pc.a_p, (n_p, n_p), "plant.a_p")?;
        let b_p = matrix(&pc.b_p, (n_p, m), "plant.b_p")?;
        let c_reg = matrix(&pc.c_reg, (m, n_p), "plant.c_reg")?;
        let d_reg = match &pc.d_reg {
            Some(d) => matrix(d, (m, m), "plant.d_reg")?,
            None => RealMatrix::zeros(m, m),
        };
        let c_lim = matrix(&pc.c_lim, (m, n_p), "plant.c_lim")?;
        let labels = |c: &[Channel]| c.iter().map(|c| c.label.clone()).collect::<Vec<_>>();
        let plant = Plant::new(a_p, b_p, c_reg, d_reg, c_lim)?.with_labels(
            labels(&pc.states),
            labels(&pc.inputs),
            labels(&pc.regulated),
            labels(&pc.limited),
        )?;
        let units = SignalUnits {
            state: pc.states.iter().map(|c| c.unit).collect(),
            input: pc.inputs.iter().map(|c| c.unit).collect(),
            regulated: pc.regulated.iter().map(|c| c.unit).collect(),
            limited: pc.limited.iter().map(|c| c.unit).collect(),
        };

        let angle = config.angle_unit;
        let cc = &config.constraints;
        let bounds = ConstraintBox::new(
            bounds_vector(&cc.u_min, &units.input, angle, f64::NEG_INFINITY, "constraints.u_min")?,
            bounds_vector(&cc.u_max, &units.input, angle, f64::INFINITY, "constraints.u_max")?,
            bounds_vector(&cc.z_min, &units.limited, angle, f64::NEG_INFINITY, "constraints.z_min")?,
            bounds_vector(&cc.z_max, &units.limited, angle, f64::INFINITY, "constraints.z_max")?,
        )
        .map_err(|e| config_err("constraints", e.to_string()))?;

        let dc = &config.design;
        let (gains, care, q, r) = match &dc.gains {
            Some(g) => (
                ServoGains::new(
                    matrix(&g.k_i, (m, m), "design.gains.k_i")?,
                    matrix(&g.k_p, (m, n_p), "design.gains.k_p")?,
                )?,
                None,
                None,
                None,
            ),
            None => {
                let q = weight(
                    dc.q.as_ref().ok_or_else(|| config_err("design.q", "required without explicit gains"))?,
                    n_p + m,
                    "design.q",
                )?;
                let r = weight(
                    dc.r.as_ref().ok_or_else(|| config_err("design.r", "required without explicit gains"))?,
                    m,
                    "design.r",
                )?;
                let lqr = lqr_pi_design(&plant, &q, &r)?;
                (lqr.gains, Some(lqr.care), Some(q), Some(r))
            }
        };
        let poly = match (&dc.alpha, &dc.roots) {
            (Some(a), None) => {
                if a.len() != 2 * m {
                    return Err(config_err("design.alpha", format!("expected {} entries", 2 * m)));
                }
                PolynomialSpec::from_alphas(a).map_err(|e| config_err("design.alpha", e.to_string()))?
            }
            (None, Some(r)) => {
                if r.len() != 2 * m {
                    return Err(config_err("design.roots", format!("expected {} channels", 2 * m)));
                }
                PolynomialSpec::new(r.clone()).map_err(|e| config_err("design.roots", e.to_string()))?
            }
            _ => return Err(config_err("design", "give exactly one of `alpha` or `roots`")),
        };
        let sys = ServoLoop::new(plant, bounds, gains, &poly)?;

        let sc = &config.simulation;
        if !(sc.dt > 0.0) || !sc.dt.is_finite() {
            return Err(config_err("simulation.dt", "must be positive"));
        }
        if !(sc.violation_tolerance >= 0.0) {
            return Err(config_err("simulation.violation_tolerance", "must be non-negative"));
        }
        let reg_scale: Vec<f64> = units.regulated.iter().map(|u| angle_scale(angle, *u)).collect();
        let entries = match &sc.schedule {
            Some(entries) => entries
                .iter()
                .enumerate()
                .map(|(k, e)| {
                    if e.y_cmd.len() != m {
                        return Err(config_err(
                            format!("simulation.schedule[{k}].y_cmd"),
                            format!("expected {m} entries"),
                        ));
                    }
                    let y = RealVector::from_iterator(m, e.y_cmd.iter().zip(&reg_scale).map(|(v, s)| v * s));
                    Ok((e.t, y))
                })
                .collect::<Result<Vec<_>>>()?,
            None => vec![(0.0, RealVector::zeros(m))],
        };
        let schedule =
            CommandSchedule::new(entries, sc.horizon).map_err(|e| config_err("simulation.schedule", e.to_string()))?;
        let x0 = match &sc.x0 {
            Some(x0) => {
                if x0.len() != n_p + m {
                    return Err(config_err("simulation.x0", format!("expected {} entries", n_p + m)));
                }
                let scales = units
                    .regulated
                    .iter()
                    .map(|u| angle_scale(angle, u.integrated()))
                    .chain(units.state.iter().map(|u| angle_scale(angle, *u)));
                Some(x0.iter().zip(scales).map(|(v, s)| v * s).collect())
            }
            None => None,
        };
        let mc = &config.margins;
        let grid = FrequencyGrid::new(mc.omega_min, mc.omega_max, mc.points)?;

        Ok(Study {
            name: config.name.clone().unwrap_or_else(|| "study".into()),
            dt: sc.dt,
            violation_tolerance: sc.violation_tolerance,
            config,
            sys,
            poly,
            care,
            q,
            r,
            schedule,
            x0,
            grid,
            units,
        })
    }
}

/// Gains and sensitivities of a design, serializable without loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRecord {
    pub name: String,
    pub k_i: Vec<Vec<f64>>,
    pub k_p: Vec<Vec<f64>>,
    pub k_x: Vec<Vec<f64>>,
    pub riccati_p: Option<Vec<Vec<f64>>>,
    pub riccati_residual: Option<f64>,
    pub kleinman_iterations: Option<usize>,
    /// `[re, im]` pairs of the baseline closed-loop spectrum.
    pub closed_loop_eigenvalues: Vec<[f64; 2]>,
    pub relative_degrees: Vec<usize>,
    pub alpha_pi: Vec<f64>,
    pub h_x: Vec<Vec<f64>>,
    pub h_u: Vec<Vec<f64>>,
    pub h_w: Vec<Vec<f64>>,
    pub h_u_condition: f64,
}

pub fn rows(m: &RealMatrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<RealMatrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    matrix(rows, (r, c), "matrix")
}

impl DesignRecord {
    pub fn from_study(study: &Study) -> Result<Self> {
        let sys = &study.sys;
        let k_x = sys.gains.k_x();
        let closed = &sys.ext.a - sys.ext.b_u() * &k_x;
        let eig = crate::numerics::spectrum(&closed)?;
        Ok(DesignRecord {
            name: study.name.clone(),
            k_i: rows(&sys.gains.k_i),
            k_p: rows(&sys.gains.k_p),
            k_x: rows(&k_x),
            riccati_p: study.care.as_ref().map(|c| rows(&c.p)),
            riccati_residual: study.care.as_ref().map(|c| c.residual),
            kleinman_iterations: study.care.as_ref().map(|c| c.iterations),
            closed_loop_eigenvalues: eig.eigenvalues().iter().map(|z| [z.re, z.im]).collect(),
            relative_degrees: sys.design.relative_degrees.clone(),
            alpha_pi: sys.design.alpha_pi.iter().copied().collect(),
            h_x: rows(&sys.design.h_x),
            h_u: rows(&sys.design.h_u),
            h_w: rows(&sys.design.h_w),
            h_u_condition: sys.design.h_u_condition,
        })
    }

    pub fn gains(&self) -> Result<ServoGains> {
        ServoGains::new(from_rows(&self.k_i)?, from_rows(&self.k_p)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("design record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }
}
