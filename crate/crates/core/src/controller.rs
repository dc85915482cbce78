//! Runtime control laws: baseline PI, hard saturation, the min-norm
//! constraint augmentation and its anti-windup-only reduction.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::design::{build_sensitivities, AugmentationDesign, PolynomialSpec};
use crate::error::{Error, Result};
use crate::model::{build_extended, stack, ConstraintBox, ExtendedSystem, Plant, ServoGains};
use crate::numerics::{RealMatrix, RealVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerMode {
    Baseline,
    #[serde(rename = "saturation")]
    HardSaturation,
    Augmented,
    #[serde(rename = "awonly")]
    AwOnly,
}

impl ControllerMode {
    pub const ALL: [ControllerMode; 4] = [
        ControllerMode::Baseline,
        ControllerMode::HardSaturation,
        ControllerMode::Augmented,
        ControllerMode::AwOnly,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ControllerMode::Baseline => "baseline",
            ControllerMode::HardSaturation => "saturation",
            ControllerMode::Augmented => "augmented",
            ControllerMode::AwOnly => "awonly",
        }
    }
}

impl fmt::Display for ControllerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ControllerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ControllerMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config {
                path: "mode".into(),
                message: format!("unknown controller mode `{s}` (expected baseline, saturation, augmented or awonly)"),
            })
    }
}

/// Everything the runtime laws need, built once from plant, bounds, gains
/// and the chosen polynomials.
#[derive(Debug, Clone)]
pub struct ServoLoop {
    pub plant: Plant,
    pub bounds: ConstraintBox,
    pub gains: ServoGains,
    pub ext: ExtendedSystem,
    pub design: AugmentationDesign,
}

impl ServoLoop {
    pub fn new(plant: Plant, bounds: ConstraintBox, gains: ServoGains, poly: &PolynomialSpec) -> Result<Self> {
        let ext = build_extended(&plant, &gains, &bounds)?;
        let design = build_sensitivities(&ext, &gains, poly)?;
        Ok(ServoLoop {
            plant,
            bounds,
            gains,
            ext,
            design,
        })
    }

    pub fn m(&self) -> usize {
        self.ext.m()
    }

    pub fn n(&self) -> usize {
        self.ext.n()
    }
}

/// One evaluation of the controller.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlDecision {
    pub u_bl: RealVector,
    pub v: RealVector,
    pub w: RealVector,
    pub u_total: RealVector,
    pub delta: Vec<bool>,
    pub y_lim_minmax: RealVector,
    pub dh_min: RealVector,
    pub dh_max: RealVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Augmentation {
    pub v: RealVector,
    pub w: RealVector,
    pub delta: Vec<bool>,
}

pub fn baseline_control(gains: &ServoGains, e_yi: &RealVector, x_p: &RealVector) -> RealVector {
    -(&gains.k_i * e_yi) - &gains.k_p * x_p
}

/// `(ΔH_min, ΔH_max)` at state `x` for baseline command `u_bl`.
pub fn delta_h(
    design: &AugmentationDesign,
    ext: &ExtendedSystem,
    x: &RealVector,
    u_bl: &RealVector,
    y_cmd: &RealVector,
) -> (RealVector, RealVector) {
    let input = stack(&-y_cmd, u_bl);
    let base = &design.h_x * x + &design.h_u * input;
    let dh_min = -&base + design.alpha_pi.component_mul(&ext.y_min);
    let dh_max = base - design.alpha_pi.component_mul(&ext.y_max);
    (dh_min, dh_max)
}

/// Closed-form minimizer of `‖H_u [v; w]‖²` under the modified constraints.
pub fn augment(design: &AugmentationDesign, dh_min: &RealVector, dh_max: &RealVector) -> Result<Augmentation> {
    let channels = dh_min.len();
    let m = channels / 2;
    let mut active = RealVector::zeros(channels);
    let mut delta = vec![false; channels];
    for i in 0..channels {
        let (lo, hi) = (dh_min[i], dh_max[i]);
        if lo > 0.0 && hi > 0.0 {
            return Err(Error::Exclusivity { channel: i });
        }
        if lo > 0.0 {
            active[i] = lo;
            delta[i] = true;
        } else if hi > 0.0 {
            active[i] = -hi;
            delta[i] = true;
        }
    }
    if !delta.iter().any(|d| *d) {
        return Ok(Augmentation {
            v: RealVector::zeros(m),
            w: RealVector::zeros(m),
            delta,
        });
    }
    let vw = &design.h_u_inv * active;
    Ok(Augmentation {
        v: vw.rows(0, m).into_owned(),
        w: vw.rows(m, m).into_owned(),
        delta,
    })
}

/// Anti-windup signal enforcing input bounds alone (`w = 0`).
///
/// Uses the input-constraint rows of the augmentation written directly in
/// plant terms: with `M = -K_I D - K_P B_p` and
/// `G = [-α K_I, -K_I C_reg - K_P A_p - α K_P] - M K_x`,
/// `ΔG_max = G x + K_I y_cmd - α u_max`, `ΔG_min = -G x - K_I y_cmd + α u_min`
/// and `v = -K_I⁻¹ (max(0, ΔG_min) - max(0, ΔG_max))`.
pub fn aw_only(
    gains: &ServoGains,
    plant: &Plant,
    alpha_u: &RealVector,
    x: &RealVector,
    y_cmd: &RealVector,
    u_min: &RealVector,
    u_max: &RealVector,
) -> Result<RealVector> {
    let (m, n_p) = (plant.m(), plant.n_p());
    if alpha_u.len() != m || x.len() != m + n_p || y_cmd.len() != m {
        return Err(Error::Dimension("aw_only argument sizes do not match the plant".into()));
    }
    let alpha = RealMatrix::from_diagonal(alpha_u);
    let coupling = -(&gains.k_i * &plant.d_reg) - &gains.k_p * &plant.b_p;
    let mut g = RealMatrix::zeros(m, m + n_p);
    g.view_mut((0, 0), (m, m)).copy_from(&(-(&alpha * &gains.k_i)));
    g.view_mut((0, m), (m, n_p)).copy_from(
        &(-(&gains.k_i * &plant.c_reg) - &gains.k_p * &plant.a_p - &alpha * &gains.k_p),
    );
    g -= &coupling * gains.k_x();
    let base = &g * x + &gains.k_i * y_cmd;
    let dg_max = &base - alpha_u.component_mul(u_max);
    let dg_min = -base + alpha_u.component_mul(u_min);
    let mut active = RealVector::zeros(m);
    for i in 0..m {
        if dg_min[i] > 0.0 && dg_max[i] > 0.0 {
            return Err(Error::Exclusivity { channel: i });
        }
        active[i] = dg_min[i].max(0.0) - dg_max[i].max(0.0);
    }
    if active.iter().all(|a| *a == 0.0) {
        return Ok(RealVector::zeros(m));
    }
    let k_i_inv = gains
        .k_i
        .clone()
        .lu()
        .try_inverse()
        .ok_or(Error::Singular("integral gain K_I"))?;
    Ok(-(k_i_inv * active))
}

pub fn hard_saturate(u: &RealVector, bounds: &ConstraintBox) -> RealVector {
    RealVector::from_iterator(
        u.len(),
        u.iter()
            .enumerate()
            .map(|(i, v)| v.max(bounds.u_min[i]).min(bounds.u_max[i])),
    )
}

/// Controller output for `mode` at extended state `x`.
///
/// `AwOnly` enforces the input bounds only; limited-output bounds are
/// ignored in that mode.
pub fn decide(mode: ControllerMode, sys: &ServoLoop, x: &RealVector, y_cmd: &RealVector) -> Result<ControlDecision> {
    let (m, n) = (sys.m(), sys.n());
    if x.len() != n || y_cmd.len() != m {
        return Err(Error::Dimension(format!(
            "state must have {n} entries and command {m}"
        )));
    }
    let (e_yi, x_p) = sys.ext.split_state(x);
    let u_bl = baseline_control(&sys.gains, &e_yi, &x_p);
    let (dh_min, dh_max) = delta_h(&sys.design, &sys.ext, x, &u_bl, y_cmd);
    let y_lim_minmax = RealVector::from_iterator(
        2 * m,
        (0..2 * m).map(|i| {
            if dh_min[i] > 0.0 {
                sys.ext.y_min[i]
            } else if dh_max[i] > 0.0 {
                sys.ext.y_max[i]
            } else {
                0.0
            }
        }),
    );
    let zeros = RealVector::zeros(m);

    let (v, w, delta) = match mode {
        ControllerMode::Baseline => (zeros.clone(), zeros, vec![false; 2 * m]),
        ControllerMode::HardSaturation => {
            let w = hard_saturate(&u_bl, &sys.bounds) - &u_bl;
            (zeros, w, vec![false; 2 * m])
        }
        ControllerMode::Augmented => {
            let aug = augment(&sys.design, &dh_min, &dh_max)?;
            (aug.v, aug.w, aug.delta)
        }
        ControllerMode::AwOnly => {
            let alpha_u = sys.design.alpha_pi.rows(0, m).into_owned();
            let v = aw_only(
                &sys.gains,
                &sys.plant,
                &alpha_u,
                x,
                y_cmd,
                &sys.bounds.u_min,
                &sys.bounds.u_max,
            )?;
            let mut delta = vec![false; 2 * m];
            for (i, d) in delta.iter_mut().take(m).enumerate() {
                *d = dh_min[i] > 0.0 || dh_max[i] > 0.0;
            }
            (v, zeros, delta)
        }
    };
    let u_total = &u_bl + &w;
    Ok(ControlDecision {
        u_bl,
        v,
        w,
        u_total,
        delta,
        y_lim_minmax,
        dh_min,
        dh_max,
    })
}

/// Closed loop of a single-input PI servo while its minimum (or maximum)
/// input bound is enforced, in coordinates `[x_p; e_yI]`:
/// `d/dt [x_p; e_yI] = A_G [x_p; e_yI] + b_G u_bound`.
///
/// Obtained by substituting `u = -k_p x_p - k_I e_yI` into
/// `ẋ_p = A_p x_p + b_p u`, `u̇ = -α_u (u - u_bound)`:
///
/// `A_G = [[A_p - b_p k_p, -b_p k_I], [-k_I⁻¹ k_p (A_p - b_p k_p + α_u I), k_p b_p - α_u]]`,
/// `b_G = [0; -α_u / k_I]`.
pub fn siso_pi_constrained_matrices(
    a_p: &RealMatrix,
    b_p: &RealVector,
    k_p: &RealVector,
    k_i: f64,
    alpha_u: f64,
) -> Result<(RealMatrix, RealVector)> {
    let n_p = a_p.nrows();
    if a_p.ncols() != n_p || b_p.len() != n_p || k_p.len() != n_p {
        return Err(Error::Dimension("SISO PI matrices have inconsistent sizes".into()));
    }
    if k_i == 0.0 || !k_i.is_finite() {
        return Err(Error::Singular("integral gain k_I"));
    }
    if !(alpha_u > 0.0) {
        return Err(Error::Design("α_u must be positive".into()));
    }
    let kp_row = k_p.transpose();
    let closed = a_p - b_p * &kp_row;
    let kp_b = (&kp_row * b_p)[(0, 0)];
    let mut a_g = RealMatrix::zeros(n_p + 1, n_p + 1);
    a_g.view_mut((0, 0), (n_p, n_p)).copy_from(&closed);
    a_g.view_mut((0, n_p), (n_p, 1)).copy_from(&(-b_p * k_i));
    let lower = -(&kp_row * (&closed + RealMatrix::identity(n_p, n_p) * alpha_u)) / k_i;
    a_g.view_mut((n_p, 0), (1, n_p)).copy_from(&lower);
    a_g[(n_p, n_p)] = kp_b - alpha_u;
    let mut b_g = RealVector::zeros(n_p + 1);
    b_g[n_p] = -alpha_u / k_i;
    Ok((a_g, b_g))
}
