//! Plant, constraint box and the extended servo system.
//!
//! The extended state stacks the integrated tracking error on top of the
//! plant state, `x = [e_yI; x_p]`, and the extended input stacks the
//! integrator channel on top of the plant input, `[v - y_cmd; u_bl + w]`.
//! The constrained outputs are `y_lim = [u_bl; z_lim] = C_lim x`.

use nalgebra::Complex;

use crate::error::{Error, Result};
use crate::numerics::{self, ensure_finite, RealMatrix, RealVector};

const PBH_TOL: f64 = 1e-9;
const GAIN_CONDITION_MAX: f64 = 1e10;

/// Open-loop LTI plant with regulated and limited outputs.
///
/// The number of regulated outputs and the number of limited outputs both
/// equal the number of inputs; the sensitivity matrix of the augmentation is
/// only square (and invertible) in that case.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    pub a_p: RealMatrix,
    pub b_p: RealMatrix,
    pub c_reg: RealMatrix,
    pub d_reg: RealMatrix,
    pub c_lim: RealMatrix,
    pub state_labels: Vec<String>,
    pub input_labels: Vec<String>,
    pub reg_labels: Vec<String>,
    pub lim_labels: Vec<String>,
}

fn default_labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

impl Plant {
    /// Validates dimensions, finiteness and stabilizability. Labels default
    /// to `x0, x1, ...`, `u0, ...`, `y0, ...`, `z0, ...`.
    pub fn new(
        a_p: RealMatrix,
        b_p: RealMatrix,
        c_reg: RealMatrix,
        d_reg: RealMatrix,
        c_lim: RealMatrix,
    ) -> Result<Self> {
        let n_p = a_p.nrows();
        let m = b_p.ncols();
        let plant = Plant {
            state_labels: default_labels("x", n_p),
            input_labels: default_labels("u", m),
            reg_labels: default_labels("y", m),
            lim_labels: default_labels("z", m),
            a_p,
            b_p,
            c_reg,
            d_reg,
            c_lim,
        };
        plant.validate()?;
        Ok(plant)
    }

    pub fn with_labels(
        mut self,
        states: Vec<String>,
        inputs: Vec<String>,
        regulated: Vec<String>,
        limited: Vec<String>,
    ) -> Result<Self> {
        let (n_p, m) = (self.n_p(), self.m());
        for (labels, expected, what) in [
            (&states, n_p, "state"),
            (&inputs, m, "input"),
            (&regulated, m, "regulated output"),
            (&limited, m, "limited output"),
        ] {
            if labels.len() != expected {
                return Err(Error::Dimension(format!(
                    "expected {expected} {what} labels, got {}",
                    labels.len()
                )));
            }
        }
        self.state_labels = states;
        self.input_labels = inputs;
        self.reg_labels = regulated;
        self.lim_labels = limited;
        Ok(self)
    }

    pub fn n_p(&self) -> usize {
        self.a_p.nrows()
    }

    pub fn m(&self) -> usize {
        self.b_p.ncols()
    }

    fn validate(&self) -> Result<()> {
        let n_p = self.a_p.nrows();
        let m = self.b_p.ncols();
        let check = |mat: &RealMatrix, rows: usize, cols: usize, name: &str| -> Result<()> {
            if mat.shape() != (rows, cols) {
                return Err(Error::Dimension(format!(
                    "{name} must be {rows}x{cols}, got {}x{}",
                    mat.nrows(),
                    mat.ncols()
                )));
            }
            Ok(())
        };
        if n_p == 0 || m == 0 {
            return Err(Error::Dimension("plant needs at least one state and one input".into()));
        }
        check(&self.a_p, n_p, n_p, "A_p")?;
        check(&self.b_p, n_p, m, "B_p")?;
        if self.c_reg.nrows() != m || self.c_lim.nrows() != m {
            return Err(Error::Model(format!(
                "regulated ({}) and limited ({}) output counts must equal the input count ({m})",
                self.c_reg.nrows(),
                self.c_lim.nrows()
            )));
        }
        check(&self.c_reg, m, n_p, "C_p_reg")?;
        check(&self.d_reg, m, m, "D_p_reg")?;
        check(&self.c_lim, m, n_p, "C_p_lim")?;
        for (mat, name) in [
            (&self.a_p, "A_p"),
            (&self.b_p, "B_p"),
            (&self.c_reg, "C_p_reg"),
            (&self.d_reg, "D_p_reg"),
            (&self.c_lim, "C_p_lim"),
        ] {
            ensure_finite(mat, name)?;
        }
        if !is_stabilizable(&self.a_p, &self.b_p)? {
            return Err(Error::Model("(A_p, B_p) is not stabilizable".into()));
        }
        Ok(())
    }
}

/// PBH test: `[A - λI, B]` has full row rank at every eigenvalue with
/// `Re λ ≥ -1e-9`.
pub fn is_stabilizable(a: &RealMatrix, b: &RealMatrix) -> Result<bool> {
    let n = a.nrows();
    if b.nrows() != n {
        return Err(Error::Dimension("A and B row counts differ".into()));
    }
    let spec = numerics::spectrum(a)?;
    for lambda in spec.eigenvalues().iter().filter(|l| l.re >= -PBH_TOL) {
        let pencil = numerics::ComplexMatrix::from_fn(n, n + b.ncols(), |i, j| {
            if j < n {
                let diag = if i == j { *lambda } else { Complex::new(0.0, 0.0) };
                Complex::new(a[(i, j)], 0.0) - diag
            } else {
                Complex::new(b[(i, j - n)], 0.0)
            }
        });
        let tol = PBH_TOL * pencil.norm().max(f64::MIN_POSITIVE);
        let rank = numerics::singular_values(&pencil)?
            .into_iter()
            .filter(|s| *s > tol)
            .count();
        if rank < n {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Component-wise bounds on inputs and limited outputs. Infinite bounds are
/// allowed and mean "unconstrained".
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintBox {
    pub u_min: RealVector,
    pub u_max: RealVector,
    pub z_min: RealVector,
    pub z_max: RealVector,
}

impl ConstraintBox {
    pub fn new(u_min: RealVector, u_max: RealVector, z_min: RealVector, z_max: RealVector) -> Result<Self> {
        let m = u_min.len();
        if u_max.len() != m || z_min.len() != m || z_max.len() != m {
            return Err(Error::Dimension("all bound vectors must have the same length".into()));
        }
        for (lo, hi, what) in [(&u_min, &u_max, "input"), (&z_min, &z_max, "limited output")] {
            for i in 0..m {
                if lo[i].is_nan() || hi[i].is_nan() {
                    return Err(Error::NonFinite("constraint bounds"));
                }
                if lo[i] >= hi[i] {
                    return Err(Error::Model(format!(
                        "{what} bound {i}: min ({}) must be strictly below max ({})",
                        lo[i], hi[i]
                    )));
                }
            }
        }
        Ok(ConstraintBox { u_min, u_max, z_min, z_max })
    }

    pub fn m(&self) -> usize {
        self.u_min.len()
    }

    /// `y_lim` lower bounds, inputs first.
    pub fn y_min(&self) -> RealVector {
        stack(&self.u_min, &self.z_min)
    }

    pub fn y_max(&self) -> RealVector {
        stack(&self.u_max, &self.z_max)
    }
}

pub fn stack(top: &RealVector, bottom: &RealVector) -> RealVector {
    RealVector::from_iterator(top.len() + bottom.len(), top.iter().chain(bottom.iter()).copied())
}

/// PI servo gains, `u_bl = -K_I e_yI - K_P x_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ServoGains {
    pub k_i: RealMatrix,
    pub k_p: RealMatrix,
}

impl ServoGains {
    pub fn new(k_i: RealMatrix, k_p: RealMatrix) -> Result<Self> {
        let m = k_i.nrows();
        if k_i.ncols() != m || k_p.nrows() != m {
            return Err(Error::Dimension(format!(
                "K_I must be square and K_P must have {m} rows"
            )));
        }
        ensure_finite(&k_i, "K_I")?;
        ensure_finite(&k_p, "K_P")?;
        let sv = k_i.singular_values();
        let condition = sv.max() / sv.min();
        if !condition.is_finite() || condition > GAIN_CONDITION_MAX {
            return Err(Error::IllConditioned {
                context: "integral gain K_I",
                condition,
            });
        }
        Ok(ServoGains { k_i, k_p })
    }

    /// Splits a full-state gain `[K_I K_P]`.
    pub fn from_full(k_x: &RealMatrix, m: usize) -> Result<Self> {
        if k_x.ncols() < m {
            return Err(Error::Dimension("K_x has fewer columns than inputs".into()));
        }
        let n_p = k_x.ncols() - m;
        Self::new(
            k_x.view((0, 0), (k_x.nrows(), m)).into_owned(),
            k_x.view((0, m), (k_x.nrows(), n_p)).into_owned(),
        )
    }

    pub fn m(&self) -> usize {
        self.k_i.nrows()
    }

    pub fn k_x(&self) -> RealMatrix {
        let m = self.m();
        let n_p = self.k_p.ncols();
        let mut k = RealMatrix::zeros(m, m + n_p);
        k.view_mut((0, 0), (m, m)).copy_from(&self.k_i);
        k.view_mut((0, m), (m, n_p)).copy_from(&self.k_p);
        k
    }
}

/// Open-loop extended dynamics `(A, B)` built from the plant alone.
pub fn extended_dynamics(plant: &Plant) -> (RealMatrix, RealMatrix) {
    let (n_p, m) = (plant.n_p(), plant.m());
    let n = n_p + m;
    let mut a = RealMatrix::zeros(n, n);
    a.view_mut((0, m), (m, n_p)).copy_from(&plant.c_reg);
    a.view_mut((m, m), (n_p, n_p)).copy_from(&plant.a_p);
    let mut b = RealMatrix::zeros(n, 2 * m);
    b.view_mut((0, 0), (m, m)).fill_with_identity();
    b.view_mut((0, m), (m, m)).copy_from(&plant.d_reg);
    b.view_mut((m, m), (n_p, m)).copy_from(&plant.b_p);
    (a, b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedSystem {
    pub a: RealMatrix,
    pub b: RealMatrix,
    pub c_lim: RealMatrix,
    pub y_min: RealVector,
    pub y_max: RealVector,
    m: usize,
}

impl ExtendedSystem {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_p(&self) -> usize {
        self.n() - self.m
    }

    /// Plant-input columns `B [0; I]`.
    pub fn b_u(&self) -> RealMatrix {
        self.b.columns(self.m, self.m).into_owned()
    }

    /// Integrator-input columns `B [I; 0]`.
    pub fn b_v(&self) -> RealMatrix {
        self.b.columns(0, self.m).into_owned()
    }

    pub fn d_reg(&self) -> RealMatrix {
        self.b.view((0, self.m), (self.m, self.m)).into_owned()
    }

    pub fn b_p(&self) -> RealMatrix {
        self.b.view((self.m, self.m), (self.n_p(), self.m)).into_owned()
    }

    pub fn c_reg(&self) -> RealMatrix {
        self.a.view((0, self.m), (self.m, self.n_p())).into_owned()
    }

    pub fn a_p(&self) -> RealMatrix {
        self.a.view((self.m, self.m), (self.n_p(), self.n_p())).into_owned()
    }

    pub fn c_p_lim(&self) -> RealMatrix {
        self.c_lim.view((self.m, self.m), (self.m, self.n_p())).into_owned()
    }

    /// Splits `x` into `(e_yI, x_p)`.
    pub fn split_state(&self, x: &RealVector) -> (RealVector, RealVector) {
        (x.rows(0, self.m).into_owned(), x.rows(self.m, self.n_p()).into_owned())
    }
}

pub fn build_extended(plant: &Plant, gains: &ServoGains, bounds: &ConstraintBox) -> Result<ExtendedSystem> {
    let (n_p, m) = (plant.n_p(), plant.m());
    if gains.m() != m || gains.k_p.ncols() != n_p {
        return Err(Error::Dimension(format!(
            "gains must be K_I {m}x{m} and K_P {m}x{n_p}"
        )));
    }
    if bounds.m() != m {
        return Err(Error::Dimension(format!("constraint box must have {m} channels per block")));
    }
    let (a, b) = extended_dynamics(plant);
    let n = n_p + m;
    let mut c_lim = RealMatrix::zeros(2 * m, n);
    c_lim.view_mut((0, 0), (m, m)).copy_from(&(-&gains.k_i));
    c_lim.view_mut((0, m), (m, n_p)).copy_from(&(-&gains.k_p));
    c_lim.view_mut((m, m), (m, n_p)).copy_from(&plant.c_lim);
    Ok(ExtendedSystem {
        a,
        b,
        c_lim,
        y_min: bounds.y_min(),
        y_max: bounds.y_max(),
        m,
    })
}

/// `(y_reg, z_lim)` for plant state `x_p` and applied input `u`.
pub fn eval_outputs(plant: &Plant, x_p: &RealVector, u: &RealVector) -> (RealVector, RealVector) {
    (&plant.c_reg * x_p + &plant.d_reg * u, &plant.c_lim * x_p)
}

/// `(h_min, h_max)`; the constraints hold iff both are non-positive.
pub fn constraint_residuals(ext: &ExtendedSystem, x: &RealVector) -> (RealVector, RealVector) {
    let y = &ext.c_lim * x;
    (&ext.y_min - &y, y - &ext.y_max)
}
