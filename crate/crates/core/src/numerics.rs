//! Dense linear-algebra kernel: spectra, Lyapunov and Riccati solvers,
//! singular values and resolvent evaluation.
//!
//! Every routine is a pure function of its arguments. Matrix storage is
//! `nalgebra`'s column-major `DMatrix`; the solvers here are written for
//! the small systems this crate deals with (a handful of states), so the
//! Lyapunov equation is solved by Kronecker vectorization.

use nalgebra::{Cholesky, DMatrix, DVector, Schur, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type RealMatrix = DMatrix<f64>;
pub type RealVector = DVector<f64>;
pub type ComplexMatrix = DMatrix<Complex64>;

/// Relative residual bound for [`lyapunov_solve`].
pub const LYAPUNOV_RESIDUAL_TOL: f64 = 1e-10;
/// Relative residual bound for [`care_solve`].
pub const CARE_RESIDUAL_TOL: f64 = 1e-9;
/// Relative residual bound for [`freq_response_solve`].
pub const RESOLVENT_RESIDUAL_TOL: f64 = 1e-10;
/// Condition number above which `jωI - A` is treated as singular.
pub const RESOLVENT_CONDITION_MAX: f64 = 1e12;
pub const KLEINMAN_MAX_ITER: usize = 100;
pub const EIGEN_MAX_ITER: usize = 10_000;
const SYMMETRY_TOL: f64 = 1e-12;

/// Eigenvalues of a real square matrix, sorted by real part and then by
/// imaginary part.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<Complex64>,
}

impl Spectrum {
    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Largest real part, `-inf` for an empty spectrum.
    pub fn max_real(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|l| l.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_real(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|l| l.re)
            .fold(f64::INFINITY, f64::min)
    }
}

pub(crate) fn ensure_finite(m: &RealMatrix, what: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

fn ensure_square(m: &RealMatrix, what: &str) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.nrows())
}

pub fn is_symmetric(m: &RealMatrix, tol: f64) -> bool {
    m.nrows() == m.ncols() && (m - m.transpose()).amax() <= tol * m.amax().max(1.0)
}

pub fn symmetrize(m: &RealMatrix) -> RealMatrix {
    (m + m.transpose()) * 0.5
}

pub fn to_complex(m: &RealMatrix) -> ComplexMatrix {
    m.map(|v| Complex64::new(v, 0.0))
}

pub fn spectrum(m: &RealMatrix) -> Result<Spectrum> {
    ensure_square(m, "spectrum argument")?;
    ensure_finite(m, "spectrum argument")?;
    if m.is_empty() {
        return Ok(Spectrum {
            eigenvalues: Vec::new(),
        });
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, EIGEN_MAX_ITER).ok_or(
        Error::EigenNoConvergence {
            iterations: EIGEN_MAX_ITER,
        },
    )?;
    let mut eigenvalues: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    eigenvalues.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(Spectrum { eigenvalues })
}

/// True iff every eigenvalue has real part below `-margin`.
pub fn is_hurwitz(m: &RealMatrix, margin: f64) -> Result<bool> {
    Ok(spectrum(m)?.max_real() < -margin)
}

/// Solves `AᵀP + PA + Q = 0` by Kronecker vectorization with one step of
/// iterative refinement. No stability or residual checks.
fn lyapunov_kron(a: &RealMatrix, q: &RealMatrix) -> Result<RealMatrix> {
    let n = a.nrows();
    let eye = RealMatrix::identity(n, n);
    let at = a.transpose();
    // column-major vec: vec(AᵀP) = (I ⊗ Aᵀ) vec(P), vec(PA) = (Aᵀ ⊗ I) vec(P)
    let op = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = -RealVector::from_column_slice(q.as_slice());
    let lu = op.clone().lu();
    let mut p = lu.solve(&rhs).ok_or(Error::Singular("Lyapunov operator"))?;
    let correction = lu
        .solve(&(&rhs - &op * &p))
        .ok_or(Error::Singular("Lyapunov operator"))?;
    p += correction;
    Ok(symmetrize(&RealMatrix::from_column_slice(n, n, p.as_slice())))
}

fn lyapunov_residual(a: &RealMatrix, p: &RealMatrix, q: &RealMatrix) -> f64 {
    let r = a.transpose() * p + p * a + q;
    let scale = q.norm();
    if scale == 0.0 {
        r.norm()
    } else {
        r.norm() / scale
    }
}

/// Symmetric `P` with `AᵀP + PA + Q = 0` for Hurwitz `A`.
pub fn lyapunov_solve(a: &RealMatrix, q: &RealMatrix) -> Result<RealMatrix> {
    let n = ensure_square(a, "A")?;
    if q.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "Q must be {n}x{n}, got {}x{}",
            q.nrows(),
            q.ncols()
        )));
    }
    ensure_finite(a, "A")?;
    ensure_finite(q, "Q")?;
    if !is_symmetric(q, SYMMETRY_TOL) {
        return Err(Error::Dimension("Q must be symmetric".into()));
    }
    let spec = spectrum(a)?;
    if spec.max_real() >= 0.0 {
        return Err(Error::NotHurwitz {
            max_real: spec.max_real(),
        });
    }
    let p = lyapunov_kron(a, q)?;
    let residual = lyapunov_residual(a, &p, q);
    if residual > LYAPUNOV_RESIDUAL_TOL {
        return Err(Error::Residual {
            context: "Lyapunov equation",
            residual,
            tolerance: LYAPUNOV_RESIDUAL_TOL,
        });
    }
    Ok(p)
}

/// Stabilizing solution of the continuous algebraic Riccati equation.
#[derive(Debug, Clone)]
pub struct CareSolution {
    pub p: RealMatrix,
    /// `K = R⁻¹BᵀP`
    pub k: RealMatrix,
    pub residual: f64,
    pub iterations: usize,
}

/// Scaled residual of `AᵀP + PA - PSP + Q` with `S = BR⁻¹Bᵀ`, relative to
/// the sum of the norms of its four terms.
pub fn care_residual(a: &RealMatrix, s: &RealMatrix, q: &RealMatrix, p: &RealMatrix) -> f64 {
    let atp = a.transpose() * p;
    let psp = p * s * p;
    let r = &atp + atp.transpose() - &psp + q;
    let scale = q.norm() + 2.0 * atp.norm() + psp.norm();
    if scale == 0.0 {
        r.norm()
    } else {
        r.norm() / scale
    }
}

/// Bass construction: with `β` chosen so that `-(A + βI)` is Hurwitz, the
/// solution `Z` of `(A + βI)Z + Z(A + βI)ᵀ = 2BBᵀ` is positive definite for
/// a controllable pair and `K = BᵀZ⁻¹` makes `A - BK` Hurwitz.
fn bass_gain(a: &RealMatrix, b: &RealMatrix) -> Result<RealMatrix> {
    let n = a.nrows();
    let spec = spectrum(a)?;
    let beta = 1.0 + (-spec.min_real()).max(0.0);
    let shifted = -(a + RealMatrix::identity(n, n) * beta).transpose();
    let z = lyapunov_kron(&shifted, &(b * b.transpose() * 2.0))?;
    let chol = Cholesky::new(z.clone())
        .ok_or_else(|| Error::InitialGain("shifted Gramian is not positive definite; (A, B) is not controllable".into()))?;
    let sv = z.singular_values();
    let cond = sv.max() / sv.min();
    if !cond.is_finite() || cond > 1e14 {
        return Err(Error::InitialGain(format!(
            "shifted Gramian is nearly singular (condition {cond:.3e})"
        )));
    }
    Ok(b.transpose() * chol.inverse())
}

/// Kleinman–Newton iteration for `AᵀP + PA - PBR⁻¹BᵀP + Q = 0`.
pub fn care_solve(
    a: &RealMatrix,
    b: &RealMatrix,
    q: &RealMatrix,
    r: &RealMatrix,
) -> Result<CareSolution> {
    let n = ensure_square(a, "A")?;
    let m = b.ncols();
    if b.nrows() != n {
        return Err(Error::Dimension(format!("B must have {n} rows, got {}", b.nrows())));
    }
    if q.shape() != (n, n) {
        return Err(Error::Dimension(format!("Q must be {n}x{n}")));
    }
    if r.shape() != (m, m) {
        return Err(Error::Dimension(format!("R must be {m}x{m}")));
    }
    for (mat, name) in [(a, "A"), (b, "B"), (q, "Q"), (r, "R")] {
        ensure_finite(mat, name)?;
    }
    if !is_symmetric(q, SYMMETRY_TOL) || !is_symmetric(r, SYMMETRY_TOL) {
        return Err(Error::Dimension("Q and R must be symmetric".into()));
    }
    let r_inv = Cholesky::new(r.clone())
        .ok_or_else(|| Error::Dimension("R must be positive definite".into()))?
        .inverse();
    let s = b * &r_inv * b.transpose();

    let mut k = if spectrum(a)?.max_real() < 0.0 {
        RealMatrix::zeros(m, n)
    } else {
        bass_gain(a, b)?
    };

    let mut p = RealMatrix::zeros(n, n);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < KLEINMAN_MAX_ITER {
        iterations += 1;
        let closed = a - b * &k;
        let closed_spec = spectrum(&closed)?;
        if closed_spec.max_real() >= 0.0 {
            return Err(Error::InitialGain(format!(
                "iterate {iterations} lost stability (max real part {:.3e})",
                closed_spec.max_real()
            )));
        }
        let qk = q + k.transpose() * r * &k;
        p = lyapunov_kron(&closed, &qk)?;
        let k_next = &r_inv * b.transpose() * &p;
        let step = (&k_next - &k).norm();
        k = k_next;
        if step <= 1e-13 * k.norm().max(1.0) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::KleinmanNoConvergence { iterations });
    }

    let residual = care_residual(a, &s, q, &p);
    if residual > CARE_RESIDUAL_TOL {
        return Err(Error::Residual {
            context: "Riccati equation",
            residual,
            tolerance: CARE_RESIDUAL_TOL,
        });
    }
    let closed = spectrum(&(a - b * &k))?;
    if closed.max_real() >= 0.0 {
        return Err(Error::NotHurwitz {
            max_real: closed.max_real(),
        });
    }
    Ok(CareSolution {
        p,
        k,
        residual,
        iterations,
    })
}

pub fn singular_values(m: &ComplexMatrix) -> Result<Vec<f64>> {
    if !m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::NonFinite("singular value argument"));
    }
    if m.is_empty() {
        return Ok(Vec::new());
    }
    Ok(SVD::new(m.clone(), false, false)
        .singular_values
        .iter()
        .copied()
        .collect())
}

pub fn min_singular_value(m: &ComplexMatrix) -> Result<f64> {
    Ok(singular_values(m)?
        .into_iter()
        .fold(f64::INFINITY, f64::min))
}

/// `(jωI - A)⁻¹B` by a complex LU solve.
pub fn freq_response_solve(a: &RealMatrix, b: &RealMatrix, omega: f64) -> Result<ComplexMatrix> {
    let n = ensure_square(a, "A")?;
    if b.nrows() != n {
        return Err(Error::Dimension(format!("B must have {n} rows, got {}", b.nrows())));
    }
    if !omega.is_finite() {
        return Err(Error::NonFinite("frequency"));
    }
    let resolvent = ComplexMatrix::from_fn(n, n, |i, j| {
        Complex64::new(-a[(i, j)], if i == j { omega } else { 0.0 })
    });
    let sv = singular_values(&resolvent)?;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let condition = smax / smin;
    if !condition.is_finite() || condition > RESOLVENT_CONDITION_MAX {
        return Err(Error::IllConditioned {
            context: "resolvent jωI - A",
            condition,
        });
    }
    let rhs = to_complex(b);
    let x = resolvent
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or(Error::Singular("resolvent jωI - A"))?;
    let scale = rhs.norm();
    if scale > 0.0 {
        let residual = (&resolvent * &x - &rhs).norm() / scale;
        if residual > RESOLVENT_RESIDUAL_TOL {
            return Err(Error::Residual {
                context: "resolvent solve",
                residual,
                tolerance: RESOLVENT_RESIDUAL_TOL,
            });
        }
    }
    Ok(x)
}
