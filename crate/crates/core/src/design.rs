//! Offline synthesis: LQR PI gains, vector relative degree and the
//! sensitivity matrices of the constraint augmentation.

use crate::error::{Error, Result};
use crate::model::{extended_dynamics, ExtendedSystem, Plant, ServoGains};
use crate::numerics::{self, CareSolution, RealMatrix, RealVector};

/// Scale factor of the relative-degree zero test.
pub const RELATIVE_DEGREE_TOL: f64 = 1e-9;
pub const H_U_CONDITION_MAX: f64 = 1e12;
const BLOCK_FORM_TOL: f64 = 1e-10;

/// Stable real roots of one polynomial per constraint channel.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialSpec {
    roots: Vec<Vec<f64>>,
}

impl PolynomialSpec {
    pub fn new(roots: Vec<Vec<f64>>) -> Result<Self> {
        for (i, channel) in roots.iter().enumerate() {
            if channel.is_empty() {
                return Err(Error::Design(format!("channel {i}: no roots given")));
            }
            if let Some(bad) = channel.iter().find(|r| !(r.is_finite() && **r < 0.0)) {
                return Err(Error::Design(format!(
                    "channel {i}: root {bad} is not strictly negative"
                )));
            }
        }
        Ok(PolynomialSpec { roots })
    }

    /// First-order polynomials `s + α_i` for relative-degree-one channels.
    pub fn from_alphas(alphas: &[f64]) -> Result<Self> {
        Self::new(alphas.iter().map(|a| vec![-a]).collect())
    }

    pub fn channels(&self) -> usize {
        self.roots.len()
    }

    pub fn roots(&self, channel: usize) -> &[f64] {
        &self.roots[channel]
    }

    /// Coefficients `c_0, ..., c_r` of `Π (s - λ_j)`, constant term first.
    pub fn coefficients(&self, channel: usize) -> Vec<f64> {
        let mut coeffs = vec![1.0];
        for &root in &self.roots[channel] {
            let mut next = vec![0.0; coeffs.len() + 1];
            for (j, c) in coeffs.iter().enumerate() {
                next[j + 1] += c;
                next[j] -= root * c;
            }
            coeffs = next;
        }
        coeffs
    }

    /// `c_0 = Π (-λ_j)`.
    pub fn zero_order(&self, channel: usize) -> f64 {
        self.roots[channel].iter().map(|r| -r).product()
    }
}

/// Sensitivity matrices of the augmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationDesign {
    pub relative_degrees: Vec<usize>,
    pub h_x: RealMatrix,
    pub h_u: RealMatrix,
    pub h_u_inv: RealMatrix,
    pub h_w: RealMatrix,
    /// Diagonal of `α_π`.
    pub alpha_pi: RealVector,
    pub h_u_condition: f64,
}

impl AugmentationDesign {
    pub fn m(&self) -> usize {
        self.h_w.nrows()
    }
}

#[derive(Debug, Clone)]
pub struct LqrPiDesign {
    pub gains: ServoGains,
    pub care: CareSolution,
}

/// LQR state feedback on the extended system `[e_yI; x_p]` using only the
/// plant-input columns of `B`.
pub fn lqr_pi_design(plant: &Plant, q: &RealMatrix, r: &RealMatrix) -> Result<LqrPiDesign> {
    let (a, b) = extended_dynamics(plant);
    let m = plant.m();
    let b_u = b.columns(m, m).into_owned();
    let care = numerics::care_solve(&a, &b_u, q, r)?;
    let gains = ServoGains::from_full(&care.k, m)?;
    Ok(LqrPiDesign { gains, care })
}

/// Vector relative degree of `y_lim = C_lim x` with respect to the
/// extended input.
pub fn relative_degree(ext: &ExtendedSystem) -> Result<Vec<usize>> {
    let n = ext.n();
    let c_norm = ext.c_lim.norm();
    let a_norm = ext.a.norm();
    let b_norm = ext.b.norm();
    let mut degrees = Vec::with_capacity(ext.c_lim.nrows());
    for i in 0..ext.c_lim.nrows() {
        let mut row = ext.c_lim.row(i).into_owned();
        let mut found = None;
        for k in 1..=n {
            let sensitivity = &row * &ext.b;
            let threshold = RELATIVE_DEGREE_TOL * c_norm * a_norm.powi(k as i32 - 1) * b_norm;
            if sensitivity.norm() > threshold {
                found = Some(k);
                break;
            }
            row = &row * &ext.a;
        }
        let k = found.ok_or_else(|| {
            Error::Design(format!(
                "constraint channel {i} has no finite relative degree within {n} differentiations"
            ))
        })?;
        if i < ext.m() && k != 1 {
            return Err(Error::Design(format!(
                "input constraint channel {i} has relative degree {k}, expected 1"
            )));
        }
        degrees.push(k);
    }
    Ok(degrees)
}

pub fn build_sensitivities(
    ext: &ExtendedSystem,
    gains: &ServoGains,
    poly: &PolynomialSpec,
) -> Result<AugmentationDesign> {
    let (n, m) = (ext.n(), ext.m());
    let degrees = relative_degree(ext)?;
    if poly.channels() != 2 * m {
        return Err(Error::Design(format!(
            "expected polynomials for {} channels, got {}",
            2 * m,
            poly.channels()
        )));
    }
    for (i, &r) in degrees.iter().enumerate() {
        if poly.roots(i).len() != r {
            return Err(Error::Design(format!(
                "channel {i} has relative degree {r} but {} roots were given",
                poly.roots(i).len()
            )));
        }
    }

    let eye = RealMatrix::identity(n, n);
    let mut h_x = RealMatrix::zeros(2 * m, n);
    let mut h_u = RealMatrix::zeros(2 * m, 2 * m);
    for (i, &r) in degrees.iter().enumerate() {
        let c_i = ext.c_lim.row(i).into_owned();
        let mut hx_row = c_i.clone();
        for &root in poly.roots(i) {
            hx_row = &hx_row * (&ext.a - &eye * root);
        }
        h_x.row_mut(i).copy_from(&hx_row);
        let mut hu_row = c_i;
        for _ in 1..r {
            hu_row = &hu_row * &ext.a;
        }
        h_u.row_mut(i).copy_from(&(hu_row * &ext.b));
    }

    // closed-form block structure
    let a_p = ext.a_p();
    let b_p = ext.b_p();
    let c_p_lim = ext.c_p_lim();
    let mut h_w = RealMatrix::zeros(m, m);
    for j in 0..m {
        let mut row = c_p_lim.row(j).into_owned();
        for _ in 1..degrees[m + j] {
            row = &row * &a_p;
        }
        h_w.row_mut(j).copy_from(&(row * &b_p));
    }
    let mut block = RealMatrix::zeros(2 * m, 2 * m);
    block.view_mut((0, 0), (m, m)).copy_from(&(-&gains.k_i));
    block
        .view_mut((0, m), (m, m))
        .copy_from(&(-&gains.k_i * ext.d_reg() - &gains.k_p * &b_p));
    block.view_mut((m, m), (m, m)).copy_from(&h_w);
    let mismatch = (&h_u - &block).amax();
    if mismatch > BLOCK_FORM_TOL * h_u.amax().max(1.0) {
        return Err(Error::Design(format!(
            "H_u does not match its block form (max deviation {mismatch:.3e}); gains and extended system disagree"
        )));
    }

    let sv = h_u.singular_values();
    let h_u_condition = sv.max() / sv.min();
    if !h_u_condition.is_finite() || h_u_condition > H_U_CONDITION_MAX {
        return Err(Error::IllConditioned {
            context: "control sensitivity H_u",
            condition: h_u_condition,
        });
    }
    let h_u_inv = h_u
        .clone()
        .lu()
        .try_inverse()
        .ok_or(Error::Singular("control sensitivity H_u"))?;
    let alpha_pi = RealVector::from_iterator(2 * m, (0..2 * m).map(|i| poly.zero_order(i)));

    Ok(AugmentationDesign {
        relative_degrees: degrees,
        h_x,
        h_u,
        h_u_inv,
        h_w,
        alpha_pi,
        h_u_condition,
    })
}
