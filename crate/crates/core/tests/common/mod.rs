#![allow(dead_code)]

use fcs_core::config::{Study, StudyConfig};
use fcs_core::controller::ServoLoop;
use fcs_core::design::PolynomialSpec;
use fcs_core::model::{ConstraintBox, Plant, ServoGains};
use fcs_core::numerics::{spectrum, RealMatrix, RealVector};
use rand::rngs::StdRng;
use rand::Rng;

pub fn aircraft() -> Study {
    Study::try_from(StudyConfig::aircraft_lateral()).expect("bundled scenario")
}

pub fn random_matrix(rng: &mut StdRng, rows: usize, cols: usize, scale: f64) -> RealMatrix {
    RealMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-scale..scale))
}

pub fn random_vector(rng: &mut StdRng, len: usize, scale: f64) -> RealVector {
    RealVector::from_fn(len, |_, _| rng.gen_range(-scale..scale))
}

/// Random matrix shifted so every eigenvalue has real part below `-margin`.
pub fn random_hurwitz(rng: &mut StdRng, n: usize, margin: f64) -> RealMatrix {
    let m = random_matrix(rng, n, n, 2.0);
    let top = spectrum(&m).unwrap().max_real();
    let shift = top + margin + rng.gen_range(0.0..1.0);
    m - RealMatrix::identity(n, n) * shift
}

/// Random servo loop with relative-degree-one limited outputs and finite
/// bounds on every channel.
pub fn random_loop(rng: &mut StdRng, m: usize, n_p: usize) -> ServoLoop {
    loop {
        let plant = Plant::new(
            random_matrix(rng, n_p, n_p, 1.5),
            random_matrix(rng, n_p, m, 1.5),
            random_matrix(rng, m, n_p, 1.5),
            random_matrix(rng, m, m, 0.3),
            random_matrix(rng, m, n_p, 1.5),
        );
        let Ok(plant) = plant else { continue };
        let k_i = random_matrix(rng, m, m, 1.0) + RealMatrix::identity(m, m) * 2.0;
        let Ok(gains) = ServoGains::new(k_i, random_matrix(rng, m, n_p, 1.5)) else {
            continue;
        };
        let u_lim = RealVector::from_fn(m, |_, _| rng.gen_range(0.5..2.0));
        let z_lim = RealVector::from_fn(m, |_, _| rng.gen_range(0.5..2.0));
        let bounds = ConstraintBox::new(-&u_lim, u_lim.clone(), -&z_lim, z_lim.clone()).unwrap();
        let alphas: Vec<f64> = (0..2 * m).map(|_| rng.gen_range(0.5..20.0)).collect();
        let poly = PolynomialSpec::from_alphas(&alphas).unwrap();
        if let Ok(sys) = ServoLoop::new(plant, bounds, gains, &poly) {
            if sys.design.relative_degrees.iter().all(|r| *r == 1) && sys.design.h_u_condition < 1e4 {
                return sys;
            }
        }
    }
}

/// Exhaustive active-set solution of
/// `min ‖H_u z‖²  s.t.  ΔH_min ≤ H_u z ≤ -ΔH_max` (row-wise).
pub fn qp_oracle(h_u: &RealMatrix, dh_min: &RealVector, dh_max: &RealVector) -> RealVector {
    let k = h_u.nrows();
    let nz = h_u.ncols();
    // a_j · z ≤ b_j
    let mut a_rows = Vec::new();
    let mut b = Vec::new();
    for i in 0..k {
        a_rows.push(-h_u.row(i).into_owned());
        b.push(-dh_min[i]);
        a_rows.push(h_u.row(i).into_owned());
        b.push(-dh_max[i]);
    }
    let hess = h_u.transpose() * h_u * 2.0;
    let mut best: Option<(f64, RealVector)> = None;
    for subset in 0u32..(1 << a_rows.len()) {
        let active: Vec<usize> = (0..a_rows.len()).filter(|j| subset >> j & 1 == 1).collect();
        if active.len() > nz {
            continue;
        }
        let s = active.len();
        let mut kkt = RealMatrix::zeros(nz + s, nz + s);
        kkt.view_mut((0, 0), (nz, nz)).copy_from(&hess);
        let mut rhs = RealVector::zeros(nz + s);
        for (r, &j) in active.iter().enumerate() {
            kkt.view_mut((nz + r, 0), (1, nz)).copy_from(&a_rows[j]);
            kkt.view_mut((0, nz + r), (nz, 1)).copy_from(&a_rows[j].transpose());
            rhs[nz + r] = b[j];
        }
        let svd = kkt.clone().svd(false, false);
        let sv = &svd.singular_values;
        if sv.min() < 1e-12 * sv.max() {
            continue;
        }
        let lu = kkt.clone().lu();
        let Some(mut sol) = lu.solve(&rhs) else { continue };
        if let Some(corr) = lu.solve(&(&rhs - &kkt * &sol)) {
            sol += corr;
        }
        let z = sol.rows(0, nz).into_owned();
        let lambda = sol.rows(nz, s).into_owned();
        let scale = 1.0 + b.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let feasible = a_rows.iter().zip(&b).all(|(a, bj)| (a * &z)[(0, 0)] <= bj + 1e-10 * scale);
        if !feasible || lambda.iter().any(|l| *l < -1e-10 * scale) {
            continue;
        }
        let cost = (h_u * &z).norm_squared();
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, z));
        }
    }
    best.expect("box-constrained QP is always feasible").1
}
