//! Loop gain at the plant-input breakpoint for a fixed constraint-activity
//! pattern, and singular-value / loop-at-a-time stability margins.

use std::fmt;
use std::str::FromStr;

use nalgebra::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::ServoLoop;
use crate::design::AugmentationDesign;
use crate::error::{Error, Result};
use crate::model::{ExtendedSystem, ServoGains};
use crate::numerics::{freq_response_solve, min_singular_value, spectrum, ComplexMatrix, RealMatrix};

/// Closed-loop eigenvalues within this distance of the imaginary axis are
/// classified as marginal.
pub const MARGINAL_TOL: f64 = 1e-9;
const SIMPLIFIED_FORM_TOL: f64 = 1e-10;
const INVERSE_CONDITION_MAX: f64 = 1e12;
const GOLDEN_ITER: usize = 80;
const BISECT_ITER: usize = 80;
/// Number of lowest local minima refined by golden-section search.
const REFINED_MINIMA: usize = 8;

/// Which constraint channels are active: inputs first, then limited outputs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DeltaPattern(Vec<bool>);

impl DeltaPattern {
    pub fn new(flags: Vec<bool>) -> Self {
        DeltaPattern(flags)
    }

    pub fn inactive(m: usize) -> Self {
        DeltaPattern(vec![false; 2 * m])
    }

    pub fn inputs(active: &[bool]) -> Self {
        let mut flags = active.to_vec();
        flags.extend(std::iter::repeat_n(false, active.len()));
        DeltaPattern(flags)
    }

    pub fn flags(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn any(&self) -> bool {
        self.0.iter().any(|f| *f)
    }

    pub fn matrix(&self) -> RealMatrix {
        RealMatrix::from_diagonal(&crate::numerics::RealVector::from_iterator(
            self.0.len(),
            self.0.iter().map(|f| if *f { 1.0 } else { 0.0 }),
        ))
    }

    /// All `2^len` patterns, counting in binary with the first flag as the
    /// least significant bit.
    pub fn enumerate(len: usize) -> Vec<DeltaPattern> {
        (0..1usize << len)
            .map(|bits| DeltaPattern((0..len).map(|i| bits >> i & 1 == 1).collect()))
            .collect()
    }
}

impl fmt::Display for DeltaPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for flag in &self.0 {
            f.write_str(if *flag { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for DeltaPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Config {
                    path: "delta".into(),
                    message: format!("pattern may contain only 0 and 1, found `{other}`"),
                }),
            })
            .collect::<Result<Vec<_>>>()
            .map(DeltaPattern)
    }
}

impl Serialize for DeltaPattern {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DeltaPattern {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Logarithmic frequency grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        FrequencyGrid {
            min: 1e-3,
            max: 1e4,
            points: 4000,
        }
    }
}

impl FrequencyGrid {
    pub fn new(min: f64, max: f64, points: usize) -> Result<Self> {
        if !(min > 0.0 && max > min && max.is_finite()) || points < 2 {
            return Err(Error::Config {
                path: "margins.grid".into(),
                message: "grid needs 0 < min < max and at least two points".into(),
            });
        }
        Ok(FrequencyGrid { min, max, points })
    }

    pub fn omegas(&self) -> Vec<f64> {
        let (lo, hi) = (self.min.ln(), self.max.ln());
        let step = (hi - lo) / (self.points - 1) as f64;
        (0..self.points)
            .map(|k| if k + 1 == self.points { self.max } else { (lo + step * k as f64).exp() })
            .collect()
    }
}

/// `L(s) = K_eff (sI - A_eff)⁻¹ B_u`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopGainModel {
    pub pattern: DeltaPattern,
    pub k_eff: RealMatrix,
    pub a_eff: RealMatrix,
    pub b_u: RealMatrix,
    pub delta_v: RealMatrix,
    pub delta_w: RealMatrix,
}

impl LoopGainModel {
    /// Plain state-feedback loop `K (sI - A)⁻¹ B` with no augmentation.
    pub fn from_state_space(a: RealMatrix, b: RealMatrix, k: RealMatrix) -> Result<Self> {
        let n = a.nrows();
        let m = b.ncols();
        if a.ncols() != n || b.nrows() != n || k.shape() != (m, n) {
            return Err(Error::Dimension("loop model needs A n×n, B n×m, K m×n".into()));
        }
        Ok(LoopGainModel {
            pattern: DeltaPattern::inactive(m),
            k_eff: k,
            a_eff: a,
            b_u: b,
            delta_v: RealMatrix::zeros(m, 2 * m),
            delta_w: RealMatrix::zeros(m, 2 * m),
        })
    }

    pub fn m(&self) -> usize {
        self.b_u.ncols()
    }

    pub fn closed_loop(&self) -> RealMatrix {
        &self.a_eff - &self.b_u * &self.k_eff
    }

    pub fn is_open_loop(&self) -> bool {
        self.k_eff.iter().all(|v| *v == 0.0)
    }
}

/// Linearization of the augmented loop inside the region where `pattern`
/// is the active set.
///
/// With `G = H_u [0; I] K_x - H_x`, `δ_v = [I 0] H_u⁻¹ δ` and
/// `δ_w = [0 I] H_u⁻¹ δ`, the loop has `A_eff = A + B [I; 0] δ_v G` and
/// `K_eff = K_x - δ_w G`.
pub fn build_loop_model(
    ext: &ExtendedSystem,
    gains: &ServoGains,
    design: &AugmentationDesign,
    pattern: &DeltaPattern,
) -> Result<LoopGainModel> {
    let (m, n) = (ext.m(), ext.n());
    if pattern.len() != 2 * m {
        return Err(Error::Dimension(format!(
            "pattern must have {} flags, got {}",
            2 * m,
            pattern.len()
        )));
    }
    let delta = pattern.matrix();
    let delta_v = design.h_u_inv.rows(0, m) * &delta;
    let delta_w = design.h_u_inv.rows(m, m) * &delta;

    let k_x = gains.k_x();
    let h_w_inv = design
        .h_w
        .clone()
        .lu()
        .try_inverse()
        .ok_or(Error::Singular("limited-output sensitivity H_w"))?;
    let k_i_inv = gains
        .k_i
        .clone()
        .lu()
        .try_inverse()
        .ok_or(Error::Singular("integral gain K_I"))?;
    let mut top = RealMatrix::zeros(m, 2 * m);
    top.view_mut((0, 0), (m, m)).fill_with_identity();
    top.view_mut((0, m), (m, m))
        .copy_from(&(&k_x * ext.b_u() * &h_w_inv));
    let simple_v = -(k_i_inv * top) * &delta;
    let mut bottom = RealMatrix::zeros(m, 2 * m);
    bottom.view_mut((0, m), (m, m)).copy_from(&h_w_inv);
    let simple_w = bottom * &delta;
    let scale = design.h_u_inv.norm().max(1.0);
    let mismatch = (&simple_v - &delta_v).norm().max((&simple_w - &delta_w).norm()) / scale;
    if mismatch > SIMPLIFIED_FORM_TOL {
        return Err(Error::Residual {
            context: "switching-gain block form",
            residual: mismatch,
            tolerance: SIMPLIFIED_FORM_TOL,
        });
    }

    let g = design.h_u.columns(m, m) * &k_x - &design.h_x;
    let a_eff = &ext.a + ext.b_v() * &delta_v * &g;
    let k_eff = &k_x - &delta_w * &g;
    debug_assert_eq!(a_eff.shape(), (n, n));
    Ok(LoopGainModel {
        pattern: pattern.clone(),
        k_eff,
        a_eff,
        b_u: ext.b_u(),
        delta_v,
        delta_w,
    })
}

pub fn loop_gain_at(model: &LoopGainModel, omega: f64) -> Result<ComplexMatrix> {
    let resolvent = freq_response_solve(&model.a_eff, &model.b_u, omega)?;
    Ok(crate::numerics::to_complex(&model.k_eff) * resolvent)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Marginal,
    Unstable,
}

pub fn classify_stability(closed_loop: &RealMatrix) -> Result<(Stability, f64)> {
    let max_real = spectrum(closed_loop)?.max_real();
    let class = if max_real < -MARGINAL_TOL {
        Stability::Stable
    } else if max_real <= MARGINAL_TOL {
        Stability::Marginal
    } else {
        Stability::Unstable
    };
    Ok((class, max_real))
}

/// Gain interval in dB and symmetric phase interval in degrees.
/// Unbounded ends are infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginInterval {
    pub gm_db: [f64; 2],
    pub pm_deg: [f64; 2],
}

fn db(x: f64) -> f64 {
    if x <= 0.0 {
        f64::NEG_INFINITY
    } else {
        20.0 * x.log10()
    }
}

fn phase_bound_deg(x: f64) -> f64 {
    (2.0 * (x.min(2.0) / 2.0).asin()).to_degrees()
}

impl MarginInterval {
    /// Guarantee from `min σ(I + L) = α`.
    pub fn from_alpha(alpha: f64) -> Self {
        let hi = if alpha < 1.0 { db(1.0 / (1.0 - alpha)) } else { f64::INFINITY };
        let pm = phase_bound_deg(alpha);
        MarginInterval {
            gm_db: [db(1.0 / (1.0 + alpha)), hi],
            pm_deg: [-pm, pm],
        }
    }

    /// Guarantee from `min σ(I + L⁻¹) = β`.
    pub fn from_beta(beta: f64) -> Self {
        let pm = phase_bound_deg(beta);
        MarginInterval {
            gm_db: [db(1.0 - beta), db(1.0 + beta)],
            pm_deg: [-pm, pm],
        }
    }

    pub fn envelope(a: &MarginInterval, b: &MarginInterval) -> Self {
        let pm = a.pm_deg[1].max(b.pm_deg[1]);
        MarginInterval {
            gm_db: [a.gm_db[0].min(b.gm_db[0]), a.gm_db[1].max(b.gm_db[1])],
            pm_deg: [-pm, pm],
        }
    }
}

/// Loop-at-a-time margins of one input channel with the other loops closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SisoMargins {
    pub channel: usize,
    pub gm_db: [f64; 2],
    pub pm_deg: [f64; 2],
    /// Frequency of the unity-gain crossing that sets the phase margin.
    pub gain_crossover: Option<f64>,
    /// The broken loop is identically zero on the grid.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Treatment {
    Baseline,
    Saturation,
    Augmented,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub treatment: Treatment,
    pub pattern: DeltaPattern,
    pub stability: Stability,
    pub stable: bool,
    pub max_real_eigenvalue: f64,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gm_db: Option<[f64; 2]>,
    pub pm_deg: Option<[f64; 2]>,
    pub alpha_bounds: Option<MarginInterval>,
    pub beta_bounds: Option<MarginInterval>,
    pub siso: Vec<SisoMargins>,
    pub open_loop: bool,
    pub grid: FrequencyGrid,
}

impl MarginReport {
    /// Closed loop not asymptotically stable, or no feedback at all.
    pub fn degenerate(&self) -> bool {
        self.open_loop || self.stability != Stability::Stable
    }
}

struct ScalarProfile<'a> {
    eval: Box<dyn Fn(f64) -> Option<f64> + Sync + 'a>,
}

impl ScalarProfile<'_> {
    fn at_log(&self, log_w: f64) -> f64 {
        (self.eval)(log_w.exp()).unwrap_or(f64::INFINITY)
    }

    /// Grid minimum refined around the lowest local minima.
    fn minimize(&self, omegas: &[f64], samples: &[Option<f64>]) -> Option<f64> {
        let vals: Vec<f64> = samples.iter().map(|s| s.unwrap_or(f64::INFINITY)).collect();
        let mut best = vals.iter().copied().fold(f64::INFINITY, f64::min);
        if !best.is_finite() {
            return None;
        }
        let mut minima: Vec<usize> = (0..vals.len())
            .filter(|&k| {
                vals[k].is_finite()
                    && (k == 0 || vals[k] <= vals[k - 1])
                    && (k + 1 == vals.len() || vals[k] <= vals[k + 1])
            })
            .collect();
        minima.sort_by(|a, b| vals[*a].total_cmp(&vals[*b]));
        for &k in minima.iter().take(REFINED_MINIMA) {
            let lo = omegas[k.saturating_sub(1)].ln();
            let hi = omegas[(k + 1).min(omegas.len() - 1)].ln();
            best = best.min(self.golden(lo, hi));
        }
        Some(best)
    }

    fn golden(&self, mut a: f64, mut b: f64) -> f64 {
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let (mut fc, mut fd) = (self.at_log(c), self.at_log(d));
        for _ in 0..GOLDEN_ITER {
            if (b - a).abs() < 1e-12 {
                break;
            }
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = self.at_log(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = self.at_log(d);
            }
        }
        fc.min(fd)
    }
}

fn identity_c(m: usize) -> ComplexMatrix {
    ComplexMatrix::identity(m, m)
}

fn return_difference(l: &ComplexMatrix) -> Option<f64> {
    min_singular_value(&(identity_c(l.nrows()) + l)).ok()
}

fn inverse_return_difference(l: &ComplexMatrix) -> Option<f64> {
    let sv = crate::numerics::singular_values(l).ok()?;
    let (hi, lo) = (sv.first().copied()?, sv.last().copied()?);
    if lo == 0.0 || hi / lo > INVERSE_CONDITION_MAX {
        return None;
    }
    let inv = l.clone().lu().try_inverse()?;
    min_singular_value(&(identity_c(l.nrows()) + inv)).ok()
}

/// Singular-value margins over `grid`, refined near each minimum.
/// Margins are omitted when the closed loop is unstable.
pub fn mimo_margins(model: &LoopGainModel, grid: &FrequencyGrid, treatment: Treatment) -> Result<MarginReport> {
    let (stability, max_real) = classify_stability(&model.closed_loop())?;
    let mut report = MarginReport {
        treatment,
        pattern: model.pattern.clone(),
        stability,
        stable: stability == Stability::Stable,
        max_real_eigenvalue: max_real,
        alpha: None,
        beta: None,
        gm_db: None,
        pm_deg: None,
        alpha_bounds: None,
        beta_bounds: None,
        siso: Vec::new(),
        open_loop: model.is_open_loop(),
        grid: *grid,
    };
    if stability == Stability::Unstable {
        return Ok(report);
    }
    let omegas = grid.omegas();
    let gains: Vec<Option<ComplexMatrix>> = omegas.par_iter().map(|w| loop_gain_at(model, *w).ok()).collect();
    let alpha_samples: Vec<Option<f64>> = gains.iter().map(|l| l.as_ref().and_then(return_difference)).collect();
    let beta_samples: Vec<Option<f64>> = gains
        .iter()
        .map(|l| l.as_ref().and_then(inverse_return_difference))
        .collect();

    let alpha_profile = ScalarProfile {
        eval: Box::new(|w| loop_gain_at(model, w).ok().as_ref().and_then(return_difference)),
    };
    let beta_profile = ScalarProfile {
        eval: Box::new(|w| loop_gain_at(model, w).ok().as_ref().and_then(inverse_return_difference)),
    };
    report.alpha = alpha_profile.minimize(&omegas, &alpha_samples);
    report.beta = beta_profile.minimize(&omegas, &beta_samples);
    report.alpha_bounds = report.alpha.map(MarginInterval::from_alpha);
    report.beta_bounds = report.beta.map(MarginInterval::from_beta);
    let combined = match (report.alpha_bounds, report.beta_bounds) {
        (Some(a), Some(b)) => Some(MarginInterval::envelope(&a, &b)),
        (a, b) => a.or(b),
    };
    report.gm_db = combined.map(|c| c.gm_db);
    report.pm_deg = combined.map(|c| c.pm_deg);
    report.siso = (0..model.m())
        .map(|i| siso_from_samples(model, i, &omegas, &gains))
        .collect();
    Ok(report)
}

/// Scalar loop seen at input `channel` with every other loop closed:
/// `l = L_ii - L_io (I + L_oo)⁻¹ L_oi`.
fn broken_loop(l: &ComplexMatrix, channel: usize) -> Option<Complex<f64>> {
    let m = l.nrows();
    if m == 1 {
        return Some(l[(0, 0)]);
    }
    let others: Vec<usize> = (0..m).filter(|&j| j != channel).collect();
    let k = others.len();
    let l_oo = ComplexMatrix::from_fn(k, k, |r, c| l[(others[r], others[c])]);
    let l_oi = ComplexMatrix::from_fn(k, 1, |r, _| l[(others[r], channel)]);
    let l_io = ComplexMatrix::from_fn(1, k, |_, c| l[(channel, others[c])]);
    let solved = (identity_c(k) + l_oo).lu().solve(&l_oi)?;
    Some(l[(channel, channel)] - (l_io * solved)[(0, 0)])
}

fn scalar_loop_at(model: &LoopGainModel, channel: usize, omega: f64) -> Option<Complex<f64>> {
    loop_gain_at(model, omega).ok().and_then(|l| broken_loop(&l, channel))
}

fn bisect_log(f: impl Fn(f64) -> Option<f64>, mut lo: f64, mut hi: f64) -> f64 {
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let sign_lo = f(lo).map(f64::signum).unwrap_or(0.0);
    for _ in 0..BISECT_ITER {
        let mid = 0.5 * (a + b);
        let w = mid.exp();
        match f(w) {
            Some(v) if v.signum() == sign_lo => {
                a = mid;
                lo = w;
            }
            Some(_) => {
                b = mid;
                hi = w;
            }
            None => break,
        }
        if b - a < 1e-14 {
            break;
        }
    }
    (lo * hi).sqrt()
}

fn siso_from_samples(
    model: &LoopGainModel,
    channel: usize,
    omegas: &[f64],
    gains: &[Option<ComplexMatrix>],
) -> SisoMargins {
    let samples: Vec<Option<Complex<f64>>> = gains
        .iter()
        .map(|l| l.as_ref().and_then(|l| broken_loop(l, channel)))
        .collect();
    let degenerate = samples.iter().flatten().all(|l| l.norm() == 0.0);
    let mut gm_lo = f64::NEG_INFINITY;
    let mut gm_hi = f64::INFINITY;
    let mut pm = f64::INFINITY;
    let mut gain_crossover = None;
    if !degenerate {
        for k in 0..omegas.len() - 1 {
            let (Some(l0), Some(l1)) = (samples[k], samples[k + 1]) else {
                continue;
            };
            if (l0.norm() - 1.0).signum() != (l1.norm() - 1.0).signum() {
                let w = bisect_log(
                    |w| scalar_loop_at(model, channel, w).map(|l| l.norm() - 1.0),
                    omegas[k],
                    omegas[k + 1],
                );
                if let Some(l) = scalar_loop_at(model, channel, w) {
                    let margin = (std::f64::consts::PI - l.arg().abs()).to_degrees();
                    if margin < pm {
                        pm = margin;
                        gain_crossover = Some(w);
                    }
                }
            }
            if l0.im.signum() != l1.im.signum() && (l0.re < 0.0 || l1.re < 0.0) {
                let w = bisect_log(
                    |w| scalar_loop_at(model, channel, w).map(|l| l.im),
                    omegas[k],
                    omegas[k + 1],
                );
                if let Some(l) = scalar_loop_at(model, channel, w) {
                    if l.re < 0.0 {
                        let factor = db(-1.0 / l.re);
                        if factor > 0.0 {
                            gm_hi = gm_hi.min(factor);
                        } else {
                            gm_lo = gm_lo.max(factor);
                        }
                    }
                }
            }
        }
    }
    SisoMargins {
        channel,
        gm_db: [gm_lo, gm_hi],
        pm_deg: [-pm, pm],
        gain_crossover,
        degenerate,
    }
}

/// Loop-at-a-time margins for one channel. Missing crossings leave the
/// corresponding margin unbounded.
pub fn siso_margins(model: &LoopGainModel, channel: usize, grid: &FrequencyGrid) -> Result<SisoMargins> {
    if channel >= model.m() {
        return Err(Error::Dimension(format!("channel {channel} out of range")));
    }
    let omegas = grid.omegas();
    let gains: Vec<Option<ComplexMatrix>> = omegas.par_iter().map(|w| loop_gain_at(model, *w).ok()).collect();
    Ok(siso_from_samples(model, channel, &omegas, &gains))
}

/// Hard-saturation model: each saturated channel's feedback row is zeroed.
pub fn saturation_margins(
    ext: &ExtendedSystem,
    gains: &ServoGains,
    saturated: &[bool],
    grid: &FrequencyGrid,
) -> Result<MarginReport> {
    let m = ext.m();
    if saturated.len() != m {
        return Err(Error::Dimension(format!("saturation set must have {m} flags")));
    }
    let mut k = gains.k_x();
    for (i, s) in saturated.iter().enumerate() {
        if *s {
            k.row_mut(i).fill(0.0);
        }
    }
    let mut model = LoopGainModel::from_state_space(ext.a.clone(), ext.b_u(), k)?;
    model.pattern = DeltaPattern::inputs(saturated);
    mimo_margins(&model, grid, Treatment::Saturation)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginTableRow {
    /// Input channels at their limits.
    pub active_inputs: Vec<String>,
    pub pattern: DeltaPattern,
    /// Only defined with no active constraint; otherwise the baseline
    /// violates the constraints.
    pub baseline: Option<MarginReport>,
    pub saturation: MarginReport,
    pub augmented: MarginReport,
}

/// Margin comparison over every subset of active input constraints.
pub fn margin_table(sys: &ServoLoop, grid: &FrequencyGrid) -> Result<Vec<MarginTableRow>> {
    let m = sys.m();
    DeltaPattern::enumerate(m)
        .into_par_iter()
        .map(|inputs| {
            let active = inputs.flags().to_vec();
            let pattern = DeltaPattern::inputs(&active);
            let augmented = mimo_margins(
                &build_loop_model(&sys.ext, &sys.gains, &sys.design, &pattern)?,
                grid,
                Treatment::Augmented,
            )?;
            let saturation = saturation_margins(&sys.ext, &sys.gains, &active, grid)?;
            let baseline = if pattern.any() {
                None
            } else {
                let mut base = augmented.clone();
                base.treatment = Treatment::Baseline;
                Some(base)
            };
            Ok(MarginTableRow {
                active_inputs: active
                    .iter()
                    .enumerate()
                    .filter(|(_, a)| **a)
                    .map(|(i, _)| sys.plant.input_labels[i].clone())
                    .collect(),
                pattern,
                baseline,
                saturation,
                augmented,
            })
        })
        .collect()
}
