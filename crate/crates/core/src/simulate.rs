//! Fixed-step RK4 simulation of the closed loop, violation metrics and
//! CSV export.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::controller::{decide, ControlDecision, ControllerMode, ServoLoop};
use crate::error::{Error, Result};
use crate::model::{stack, ConstraintBox};
use crate::numerics::RealVector;
use crate::units::{format_sig9, SignalUnits};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_VIOLATION_TOLERANCE: f64 = 0.01;
/// States beyond this magnitude are treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e12;
const GRID_TOL: f64 = 1e-9;

/// Piecewise-constant command profile.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandSchedule {
    entries: Vec<(f64, RealVector)>,
    horizon: f64,
}

impl CommandSchedule {
    pub fn new(entries: Vec<(f64, RealVector)>, horizon: f64) -> Result<Self> {
        let first = entries
            .first()
            .ok_or_else(|| Error::Simulation("command schedule is empty".into()))?;
        if first.0 != 0.0 {
            return Err(Error::Simulation("command schedule must start at t = 0".into()));
        }
        let m = first.1.len();
        for pair in entries.windows(2) {
            if !(pair[1].0 > pair[0].0) {
                return Err(Error::Simulation("command times must be strictly increasing".into()));
            }
        }
        for (t, y) in &entries {
            if y.len() != m {
                return Err(Error::Dimension("all commands must have the same length".into()));
            }
            if !t.is_finite() || y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("command schedule"));
            }
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::Simulation("horizon must be positive".into()));
        }
        Ok(CommandSchedule { entries, horizon })
    }

    pub fn constant(y_cmd: RealVector, horizon: f64) -> Result<Self> {
        Self::new(vec![(0.0, y_cmd)], horizon)
    }

    /// Commands switching every `period` seconds through `levels`.
    pub fn cyclic(levels: &[RealVector], period: f64, horizon: f64) -> Result<Self> {
        if levels.is_empty() || !(period > 0.0) {
            return Err(Error::Simulation("cyclic schedule needs levels and a positive period".into()));
        }
        let count = (horizon / period).ceil().max(1.0) as usize;
        let entries = (0..count)
            .map(|k| (k as f64 * period, levels[k % levels.len()].clone()))
            .collect();
        Self::new(entries, horizon)
    }

    pub fn entries(&self) -> &[(f64, RealVector)] {
        &self.entries
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn m(&self) -> usize {
        self.entries[0].1.len()
    }

    /// Command in force at time `t`.
    pub fn command_at(&self, t: f64) -> &RealVector {
        let idx = self.entries.partition_point(|(start, _)| *start <= t + GRID_TOL);
        &self.entries[idx.saturating_sub(1)].1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    /// Initial extended state `[e_yI; x_p]`; zero when absent.
    pub x0: Option<Vec<f64>>,
    pub mode: ControllerMode,
    /// Allowed excursion as a fraction of each channel's range.
    pub violation_tolerance: f64,
}

impl SimConfig {
    pub fn new(mode: ControllerMode) -> Self {
        SimConfig {
            dt: DEFAULT_DT,
            x0: None,
            mode,
            violation_tolerance: DEFAULT_VIOLATION_TOLERANCE,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_x0(mut self, x0: Vec<f64>) -> Self {
        self.x0 = Some(x0);
        self
    }
}

/// Uniformly sampled closed-loop signals in internal units.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub mode: ControllerMode,
    pub dt: f64,
    pub t: Vec<f64>,
    pub x_p: Vec<RealVector>,
    pub e_yi: Vec<RealVector>,
    pub u_bl: Vec<RealVector>,
    pub v: Vec<RealVector>,
    pub w: Vec<RealVector>,
    pub u_total: Vec<RealVector>,
    pub y_reg: Vec<RealVector>,
    pub z_lim: Vec<RealVector>,
    pub delta: Vec<Vec<bool>>,
    pub y_cmd: Vec<RealVector>,
    pub state_labels: Vec<String>,
    pub input_labels: Vec<String>,
    pub reg_labels: Vec<String>,
    pub lim_labels: Vec<String>,
}

/// Signal families exposed by name.
pub const SIGNAL_NAMES: [&str; 11] = [
    "t", "x_p", "e_yi", "u_bl", "v", "w", "u_total", "y_reg", "z_lim", "delta", "y_cmd",
];

impl SimTrace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// One channel of a named signal family. `delta` yields 0/1.
    pub fn signal(&self, name: &str, channel: usize) -> Option<Vec<f64>> {
        let pick = |series: &[RealVector]| -> Option<Vec<f64>> {
            if series.first().is_some_and(|v| channel < v.len()) {
                Some(series.iter().map(|v| v[channel]).collect())
            } else {
                None
            }
        };
        match name {
            "t" => (channel == 0).then(|| self.t.clone()),
            "x_p" => pick(&self.x_p),
            "e_yi" => pick(&self.e_yi),
            "u_bl" => pick(&self.u_bl),
            "v" => pick(&self.v),
            "w" => pick(&self.w),
            "u_total" => pick(&self.u_total),
            "y_reg" => pick(&self.y_reg),
            "z_lim" => pick(&self.z_lim),
            "y_cmd" => pick(&self.y_cmd),
            "delta" => {
                if self.delta.first().is_some_and(|d| channel < d.len()) {
                    Some(self.delta.iter().map(|d| f64::from(u8::from(d[channel]))).collect())
                } else {
                    None
                }
            }
            _ => None,
        }
    }

    fn push(&mut self, t: f64, x: &RealVector, m: usize, sys: &ServoLoop, dec: ControlDecision, y_cmd: &RealVector) {
        let e_yi = x.rows(0, m).into_owned();
        let x_p = x.rows(m, x.len() - m).into_owned();
        let y_reg = &sys.plant.c_reg * &x_p + &sys.plant.d_reg * &dec.u_total;
        let z_lim = &sys.plant.c_lim * &x_p;
        self.t.push(t);
        self.x_p.push(x_p);
        self.e_yi.push(e_yi);
        self.u_bl.push(dec.u_bl);
        self.v.push(dec.v);
        self.w.push(dec.w);
        self.u_total.push(dec.u_total);
        self.y_reg.push(y_reg);
        self.z_lim.push(z_lim);
        self.delta.push(dec.delta);
        self.y_cmd.push(y_cmd.clone());
    }

    /// Writes the trace as CSV. Angle and rate channels are converted to
    /// degrees when `units` is given; the header names each column's unit.
    pub fn write_csv<W: Write>(&self, out: W, units: Option<&SignalUnits>) -> std::io::Result<()> {
        let mut out = std::io::BufWriter::new(out);
        let m = self.input_labels.len();
        let n_p = self.state_labels.len();
        let fallback = SignalUnits::dimensionless(n_p, m);
        let units = units.unwrap_or(&fallback);

        let named = |prefix: &str, label: &str, unit: &str| {
            if unit.is_empty() {
                format!("{prefix}{label}")
            } else {
                format!("{prefix}{label} [{unit}]")
            }
        };
        let mut header = vec!["t [s]".to_string()];
        let mut scales = vec![1.0];
        for (i, l) in self.state_labels.iter().enumerate() {
            header.push(named("", l, units.state[i].label()));
            scales.push(units.state[i].output_scale());
        }
        for (i, l) in self.reg_labels.iter().enumerate() {
            header.push(named("e_yI_", l, units.regulated[i].integrated_label()));
            scales.push(units.regulated[i].integrated().output_scale());
        }
        for prefix in ["u_bl_", "w_", "u_"] {
            for (i, l) in self.input_labels.iter().enumerate() {
                header.push(named(prefix, l, units.input[i].label()));
                scales.push(units.input[i].output_scale());
            }
        }
        for (i, l) in self.reg_labels.iter().enumerate() {
            header.push(named("v_", l, units.regulated[i].label()));
            scales.push(units.regulated[i].output_scale());
        }
        for (i, l) in self.reg_labels.iter().enumerate() {
            header.push(named("y_", l, units.regulated[i].label()));
            scales.push(units.regulated[i].output_scale());
        }
        for (i, l) in self.lim_labels.iter().enumerate() {
            header.push(named("z_", l, units.limited[i].label()));
            scales.push(units.limited[i].output_scale());
        }
        for (i, l) in self.reg_labels.iter().enumerate() {
            header.push(named("y_cmd_", l, units.regulated[i].label()));
            scales.push(units.regulated[i].output_scale());
        }
        for l in self.input_labels.iter().chain(&self.lim_labels) {
            header.push(format!("delta_{l}"));
            scales.push(1.0);
        }
        writeln!(out, "{}", header.join(","))?;

        let mut row = Vec::with_capacity(header.len());
        for k in 0..self.len() {
            row.clear();
            row.push(self.t[k]);
            row.extend(self.x_p[k].iter());
            row.extend(self.e_yi[k].iter());
            row.extend(self.u_bl[k].iter());
            row.extend(self.w[k].iter());
            row.extend(self.u_total[k].iter());
            row.extend(self.v[k].iter());
            row.extend(self.y_reg[k].iter());
            row.extend(self.z_lim[k].iter());
            row.extend(self.y_cmd[k].iter());
            row.extend(self.delta[k].iter().map(|d| f64::from(u8::from(*d))));
            let line: Vec<String> = row.iter().zip(&scales).map(|(v, s)| format_sig9(v * s)).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        out.flush()
    }
}

fn rhs(sys: &ServoLoop, mode: ControllerMode, x: &RealVector, y_cmd: &RealVector) -> Result<RealVector> {
    let dec = decide(mode, sys, x, y_cmd)?;
    let input = stack(&(&dec.v - y_cmd), &dec.u_total);
    Ok(&sys.ext.a * x + &sys.ext.b * input)
}

/// One RK4 step with the controller re-evaluated at every stage.
pub fn step(sys: &ServoLoop, mode: ControllerMode, x: &RealVector, y_cmd: &RealVector, dt: f64) -> Result<RealVector> {
    if !(dt > 0.0) {
        return Err(Error::Simulation("dt must be positive".into()));
    }
    let k1 = rhs(sys, mode, x, y_cmd)?;
    let k2 = rhs(sys, mode, &(x + &k1 * (dt / 2.0)), y_cmd)?;
    let k3 = rhs(sys, mode, &(x + &k2 * (dt / 2.0)), y_cmd)?;
    let k4 = rhs(sys, mode, &(x + &k3 * dt), y_cmd)?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

fn grid_index(t: f64, dt: f64) -> Option<usize> {
    let r = t / dt;
    let k = r.round();
    ((r - k).abs() <= GRID_TOL * r.abs().max(1.0)).then_some(k as usize)
}

/// Simulates the schedule from `cfg.x0`. The trace holds `floor(T/dt) + 1`
/// samples.
pub fn run(sys: &ServoLoop, schedule: &CommandSchedule, cfg: &SimConfig) -> Result<SimTrace> {
    let (m, n) = (sys.m(), sys.n());
    let dt = cfg.dt;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Simulation("dt must be positive".into()));
    }
    if schedule.horizon() < dt {
        return Err(Error::Simulation("horizon must be at least one step".into()));
    }
    if schedule.m() != m {
        return Err(Error::Dimension(format!("commands must have {m} entries")));
    }
    let mut switch_steps = Vec::with_capacity(schedule.entries().len());
    for (t, y) in schedule.entries() {
        let k = grid_index(*t, dt).ok_or_else(|| {
            Error::Simulation(format!("command time {t} s is not a multiple of dt = {dt} s"))
        })?;
        switch_steps.push((k, y));
    }
    let steps = (schedule.horizon() / dt + GRID_TOL).floor() as usize;
    let mut x = match &cfg.x0 {
        Some(v) if v.len() != n => {
            return Err(Error::Dimension(format!("x0 must have {n} entries")));
        }
        Some(v) => RealVector::from_column_slice(v),
        None => RealVector::zeros(n),
    };

    let mut trace = SimTrace {
        mode: cfg.mode,
        dt,
        t: Vec::with_capacity(steps + 1),
        x_p: Vec::with_capacity(steps + 1),
        e_yi: Vec::with_capacity(steps + 1),
        u_bl: Vec::with_capacity(steps + 1),
        v: Vec::with_capacity(steps + 1),
        w: Vec::with_capacity(steps + 1),
        u_total: Vec::with_capacity(steps + 1),
        y_reg: Vec::with_capacity(steps + 1),
        z_lim: Vec::with_capacity(steps + 1),
        delta: Vec::with_capacity(steps + 1),
        y_cmd: Vec::with_capacity(steps + 1),
        state_labels: sys.plant.state_labels.clone(),
        input_labels: sys.plant.input_labels.clone(),
        reg_labels: sys.plant.reg_labels.clone(),
        lim_labels: sys.plant.lim_labels.clone(),
    };

    let mut seg = 0;
    for k in 0..=steps {
        while seg + 1 < switch_steps.len() && switch_steps[seg + 1].0 <= k {
            seg += 1;
        }
        let y_cmd = switch_steps[seg].1;
        let t = k as f64 * dt;
        let dec = decide(cfg.mode, sys, &x, y_cmd)?;
        trace.push(t, &x, m, sys, dec, y_cmd);
        if k == steps {
            break;
        }
        x = step(sys, cfg.mode, &x, y_cmd, dt)?;
        if x.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT) {
            return Err(Error::Divergence { time: t + dt });
        }
    }
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelViolation {
    pub label: String,
    pub lower: f64,
    pub upper: f64,
    /// Largest distance outside `[lower, upper]`.
    pub max_excursion: f64,
    /// First sample whose excursion exceeds the tolerance.
    pub first_violation: Option<f64>,
}

impl ChannelViolation {
    pub fn range(&self) -> f64 {
        self.upper - self.lower
    }

    fn scan(label: &str, lower: f64, upper: f64, tolerance: f64, t: &[f64], values: impl Iterator<Item = f64>) -> Self {
        let allowed = tolerance * (upper - lower);
        let mut max_excursion = 0.0_f64;
        let mut first_violation = None;
        for (time, value) in t.iter().zip(values) {
            let excursion = (value - upper).max(lower - value).max(0.0);
            max_excursion = max_excursion.max(excursion);
            if first_violation.is_none() && excursion > allowed {
                first_violation = Some(*time);
            }
        }
        ChannelViolation {
            label: label.to_string(),
            lower,
            upper,
            max_excursion,
            first_violation,
        }
    }
}

/// Constraint excursions and integrator windup of one trace.
///
/// `constraints` covers the constrained channels `[u_bl; z_lim]`,
/// `applied_inputs` the command actually sent to the plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub tolerance: f64,
    pub constraints: Vec<ChannelViolation>,
    pub applied_inputs: Vec<ChannelViolation>,
    /// `max |e_yI|` per integrator.
    pub windup: Vec<f64>,
}

impl ViolationReport {
    /// True when every constrained channel stays within the tolerance.
    pub fn constraints_satisfied(&self) -> bool {
        self.constraints.iter().all(|c| c.first_violation.is_none())
    }

    pub fn applied_inputs_satisfied(&self) -> bool {
        self.applied_inputs.iter().all(|c| c.first_violation.is_none())
    }
}

pub fn analyze(trace: &SimTrace, bounds: &ConstraintBox, tolerance: f64) -> ViolationReport {
    let m = bounds.m();
    let mut constraints = Vec::with_capacity(2 * m);
    let mut applied_inputs = Vec::with_capacity(m);
    for i in 0..m {
        let label = trace.input_labels.get(i).map_or("u", String::as_str);
        constraints.push(ChannelViolation::scan(
            label,
            bounds.u_min[i],
            bounds.u_max[i],
            tolerance,
            &trace.t,
            trace.u_bl.iter().map(|u| u[i]),
        ));
        applied_inputs.push(ChannelViolation::scan(
            label,
            bounds.u_min[i],
            bounds.u_max[i],
            tolerance,
            &trace.t,
            trace.u_total.iter().map(|u| u[i]),
        ));
    }
    for i in 0..m {
        let label = trace.lim_labels.get(i).map_or("z", String::as_str);
        constraints.push(ChannelViolation::scan(
            label,
            bounds.z_min[i],
            bounds.z_max[i],
            tolerance,
            &trace.t,
            trace.z_lim.iter().map(|z| z[i]),
        ));
    }
    let windup = (0..m)
        .map(|i| trace.e_yi.iter().map(|e| e[i].abs()).fold(0.0, f64::max))
        .collect();
    ViolationReport {
        tolerance,
        constraints,
        applied_inputs,
        windup,
    }
}
