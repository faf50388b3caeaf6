//! Dense complex-matrix kernels shared by every other module.
//!
//! All Hermitian matrix functions go through a full eigendecomposition. At the
//! sizes this crate targets (N up to a few dozen) this is exact enough that
//! square roots stay Hermitian and exponentials stay unitary to rounding.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Numerical thresholds used by checks throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceProfile {
    /// Absolute Frobenius bound on `M - M†`.
    pub hermiticity_tol: f64,
    /// Absolute Frobenius bound on `U†U - I`.
    pub unitarity_tol: f64,
    /// Eigenvalues in `[-positivity_floor, 0)` are clamped to zero.
    pub positivity_floor: f64,
    /// Smallest admissible singular value / eigenvalue for inversion.
    pub singularity_tol: f64,
}

impl Default for ToleranceProfile {
    fn default() -> Self {
        Self {
            hermiticity_tol: 1e-12,
            unitarity_tol: 1e-12,
            positivity_floor: 1e-14,
            singularity_tol: 1e-10,
        }
    }
}

impl ToleranceProfile {
    pub fn new(
        hermiticity_tol: f64,
        unitarity_tol: f64,
        positivity_floor: f64,
        singularity_tol: f64,
    ) -> Result<Self> {
        let prof = Self {
            hermiticity_tol,
            unitarity_tol,
            positivity_floor,
            singularity_tol,
        };
        prof.validate()?;
        Ok(prof)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            ("hermiticity_tol", self.hermiticity_tol),
            ("unitarity_tol", self.unitarity_tol),
            ("positivity_floor", self.positivity_floor),
            ("singularity_tol", self.singularity_tol),
        ];
        for (name, v) in all {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "tolerance {name} must be strictly positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Copy for matrices produced by `steps` propagation steps: rounding
    /// drift widens `unitarity_tol` by `sqrt(1 + steps)`.
    pub fn after_steps(&self, steps: usize) -> Self {
        Self {
            unitarity_tol: self.unitarity_tol * (1.0 + steps as f64).sqrt(),
            ..*self
        }
    }
}

/// Builds a matrix from row-major entries, rejecting empty shapes and
/// non-finite values.
pub fn cmat_from_row_major(rows: usize, cols: usize, entries: &[C64]) -> Result<CMat> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidInput(format!(
            "matrix shape must be positive, got {rows}x{cols}"
        )));
    }
    if entries.len() != rows * cols {
        return Err(dim_mismatch("matrix entries", rows * cols, entries.len()));
    }
    let m = CMat::from_row_slice(rows, cols, entries);
    ensure_finite(&m, "matrix")?;
    Ok(m)
}

pub fn ensure_finite(m: &CMat, context: &str) -> Result<()> {
    if m.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            context: context.to_string(),
        })
    }
}

pub(crate) fn ensure_square(m: &CMat, context: &str) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(dim_mismatch(
            context,
            "square matrix",
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(m.nrows())
}

/// Largest entry modulus.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, c| acc.max(c.norm()))
}

/// `‖M - M†‖_F`.
pub fn hermiticity_residual(m: &CMat) -> f64 {
    (m - m.adjoint()).norm()
}

/// `‖U†U - I‖_F`.
pub fn unitarity_residual(u: &CMat) -> f64 {
    let n = u.ncols();
    (u.adjoint() * u - CMat::identity(n, n)).norm()
}

/// Checks Hermiticity within tolerance and returns the symmetrized
/// `(M + M†)/2`.
pub fn hermitian_part(m: &CMat, prof: &ToleranceProfile) -> Result<CMat> {
    ensure_square(m, "Hermitian matrix")?;
    ensure_finite(m, "Hermitian matrix")?;
    let residual = hermiticity_residual(m);
    if residual > prof.hermiticity_tol {
        return Err(Error::NotHermitian { residual });
    }
    Ok((m + m.adjoint()).scale(0.5))
}

/// Eigendecomposition of an (already symmetrized) Hermitian matrix.
pub(crate) struct Eigh {
    pub values: DVector<f64>,
    pub vectors: CMat,
}

impl Eigh {
    pub fn new(h: CMat) -> Self {
        let eig = SymmetricEigen::new(h);
        Self {
            values: eig.eigenvalues,
            vectors: eig.eigenvectors,
        }
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `Q diag(f(λ)) Q†`.
    pub fn map<F: Fn(f64) -> C64>(&self, f: F) -> CMat {
        let q = &self.vectors;
        let mut scaled = q.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let fj = f(lam);
            scaled.column_mut(j).iter_mut().for_each(|c| *c *= fj);
        }
        scaled * q.adjoint()
    }
}

/// Positive semidefinite square root of a Hermitian matrix.
pub fn hermitian_sqrt(m: &CMat, prof: &ToleranceProfile) -> Result<CMat> {
    let h = hermitian_part(m, prof)?;
    let eig = Eigh::new(h);
    let min = eig.min_value();
    if min < -prof.positivity_floor {
        return Err(Error::NotPositive {
            min_eigenvalue: min,
        });
    }
    let s = eig.map(|lam| C64::from(lam.max(0.0).sqrt()));
    Ok((&s + s.adjoint()).scale(0.5))
}

/// `M^{-1/2}` for Hermitian positive-definite `M`.
pub fn hermitian_inv_sqrt(m: &CMat, prof: &ToleranceProfile) -> Result<CMat> {
    let h = hermitian_part(m, prof)?;
    let eig = Eigh::new(h);
    let min = eig.min_value();
    if min <= prof.singularity_tol {
        return Err(Error::NearSingular { sigma_min: min });
    }
    let t = eig.map(|lam| C64::from(1.0 / lam.sqrt()));
    Ok((&t + t.adjoint()).scale(0.5))
}

pub fn smallest_singular_value(m: &CMat) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Left polar decomposition `A = P W`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polar {
    /// `(A A†)^{1/2}`, Hermitian positive-definite.
    pub p: CMat,
    /// Unitary factor.
    pub w: CMat,
}

/// Polar decomposition `A = P W` with `P = (A A†)^{1/2}` and `W = P⁻¹ A`.
pub fn polar_decompose(a: &CMat, prof: &ToleranceProfile) -> Result<Polar> {
    ensure_square(a, "polar_decompose")?;
    ensure_finite(a, "polar_decompose")?;
    let sigma_min = smallest_singular_value(a);
    if sigma_min <= prof.singularity_tol {
        return Err(Error::NearSingular { sigma_min });
    }
    let aa = a * a.adjoint();
    let gram = (&aa + aa.adjoint()).scale(0.5);
    let eig = Eigh::new(gram);
    // Eigenvalues of AA† are σ², so the clamp can only bite on rounding noise.
    let p = eig.map(|lam| C64::from(lam.max(0.0).sqrt()));
    let p_inv = eig.map(|lam| C64::from(1.0 / lam.max(f64::MIN_POSITIVE).sqrt()));
    let p = (&p + p.adjoint()).scale(0.5);
    let w = p_inv * a;
    Ok(Polar { p, w })
}

/// Exact propagator `exp(-i H dt)` of a constant Hermitian generator,
/// finished with one Newton–Schulz step `E (3 − E†E) / 2` towards the
/// nearest unitary.
pub fn unitary_exp_step(h: &CMat, dt: f64, prof: &ToleranceProfile) -> Result<CMat> {
    let h = hermitian_part(h, prof)?;
    let e = Eigh::new(h).map(|lam| C64::from_polar(1.0, -lam * dt));
    let n = e.nrows();
    let gram = e.adjoint() * &e;
    Ok(&e * (CMat::identity(n, n).scale(3.0) - gram).scale(0.5))
}

/// Block-diagonal `diag(a, b)`.
pub fn block_diag(a: &CMat, b: &CMat) -> CMat {
    let n1 = a.nrows();
    let n2 = b.nrows();
    let mut out = CMat::zeros(n1 + n2, a.ncols() + b.ncols());
    out.view_mut((0, 0), (n1, a.ncols())).copy_from(a);
    out.view_mut((n1, a.ncols()), (n2, b.ncols())).copy_from(b);
    out
}
