//! Reduced dynamics on the coset space and on ray space.
//!
//! For `Z = B D⁻¹` the Schrödinger equation projects to the matrix Riccati
//! equation
//!
//! ```text
//! i Ż = V + H1 Z − Z H2 − Z V† Z
//! ```
//!
//! and for `n2 = 1` the chart coordinate `z = ξ/η` of a single state obeys the
//! same equation with `z` a column vector. The normalisation `γ = 1 + z†z` and
//! the overall phase `α` (with `ψ = e^{iα} (z, 1)/√γ`) are driven by `z`:
//!
//! ```text
//! γ̇ = i γ (V†z − z†V)
//! α̇ = −H2 − (V†z + z†V)/2
//! ```
//!
//! Neither right-hand side depends on `α`. All integrators here are fixed-step
//! classical RK4; leaving the chart (`‖Z‖_max` above a guard) stops the
//! integration and is reported as data.

use serde::{Deserialize, Serialize};

use crate::coset::{CosetPoint, Partition};
use crate::dynamics::{split_state, time_grid, BlockHamiltonian, HamiltonianSample};
use crate::error::{dim_mismatch, Error, Result};
use crate::matcore::{max_abs, CMat, CVec, ToleranceProfile, C64, I, ONE};

pub const DEFAULT_GUARD: f64 = 1e6;

/// Point of ray space in the chart where the last component is nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct RayPoint {
    z: CVec,
}

impl RayPoint {
    pub fn new(z: CVec) -> Result<Self> {
        if z.is_empty() {
            return Err(Error::InvalidInput("ray point needs N - 1 >= 1 coordinates".into()));
        }
        if z.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::NonFinite {
                context: "ray point".into(),
            });
        }
        Ok(Self { z })
    }

    pub fn origin(n_minus_1: usize) -> Self {
        Self {
            z: CVec::zeros(n_minus_1.max(1)),
        }
    }

    /// Builds `z_r = q_r + i p_r`.
    pub fn from_qp(q: &[f64], p: &[f64]) -> Result<Self> {
        if q.len() != p.len() {
            return Err(dim_mismatch("ray point (q, p)", q.len(), p.len()));
        }
        Self::new(CVec::from_iterator(
            q.len(),
            q.iter().zip(p).map(|(&a, &b)| C64::new(a, b)),
        ))
    }

    /// Chart coordinates and phase of a unit vector: `z = ξ/η`, `α = arg η`.
    pub fn from_state(psi: &CVec) -> Result<(Self, f64)> {
        let part = Partition::ray(psi.len())?;
        let (xi, eta) = split_state(psi, part)?;
        if eta.norm() == 0.0 {
            return Err(Error::ChartBreakdown { sigma_min: 0.0 });
        }
        let z = xi.map(|c| c / eta);
        Ok((Self::new(z)?, eta.arg()))
    }

    pub fn z(&self) -> &CVec {
        &self.z
    }

    /// Number of complex coordinates, `N − 1`.
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// `γ = 1 + z†z`.
    pub fn gamma(&self) -> f64 {
        1.0 + self.z.norm_squared()
    }

    pub fn q(&self) -> Vec<f64> {
        self.z.iter().map(|c| c.re).collect()
    }

    pub fn p(&self) -> Vec<f64> {
        self.z.iter().map(|c| c.im).collect()
    }

    /// `ψ0(z) = (z, 1)/√γ`.
    pub fn psi0(&self) -> CVec {
        let s = 1.0 / self.gamma().sqrt();
        CVec::from_iterator(
            self.len() + 1,
            self.z.iter().map(|c| c * s).chain([C64::from(s)]),
        )
    }

    /// `ψ = e^{iα} ψ0(z)`.
    pub fn state(&self, alpha: f64) -> CVec {
        self.psi0() * C64::from_polar(1.0, alpha)
    }

    /// Projector `ρ = ψ0 ψ0†`.
    pub fn projector(&self) -> CMat {
        let psi = self.psi0();
        &psi * psi.adjoint()
    }
}

/// Where an integration left the chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    /// Time of the last stored (valid) sample.
    pub last_valid_time: f64,
    /// `‖Z‖_max` of the rejected step (infinite if it was not finite).
    pub max_abs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixRiccatiTrajectory {
    pub times: Vec<f64>,
    pub points: Vec<CosetPoint>,
    pub breakdown: Option<Breakdown>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedTrajectory {
    pub times: Vec<f64>,
    pub points: Vec<RayPoint>,
    /// Unwrapped phase `α(t)`.
    pub alpha: Vec<f64>,
    /// `γ` integrated from its own equation, kept apart from `1 + z†z`.
    pub gamma_integrated: Vec<f64>,
    pub breakdown: Option<Breakdown>,
}

impl ReducedTrajectory {
    /// `max_t |γ_integrated − (1 + z†z)|`.
    pub fn gamma_consistency_max(&self) -> f64 {
        self.points
            .iter()
            .zip(&self.gamma_integrated)
            .map(|(pt, g)| (g - pt.gamma()).abs())
            .fold(0.0, f64::max)
    }

    pub fn state(&self, k: usize) -> CVec {
        self.points[k].state(self.alpha[k])
    }

    /// Index of the sample at time `t` (within `1e-12` relative to the span).
    pub fn index_of(&self, t: f64) -> Result<usize> {
        grid_index(&self.times, t)
    }
}

pub(crate) fn grid_index(times: &[f64], t: f64) -> Result<usize> {
    let span = match (times.first(), times.last()) {
        (Some(a), Some(b)) => (b - a).abs().max(1.0),
        _ => return Err(Error::OffGrid { t }),
    };
    let k = times.partition_point(|&s| s < t);
    [k.checked_sub(1), Some(k)]
        .into_iter()
        .flatten()
        .filter(|&i| i < times.len())
        .min_by(|&a, &b| (times[a] - t).abs().total_cmp(&(times[b] - t).abs()))
        .filter(|&i| (times[i] - t).abs() <= 1e-12 * span)
        .ok_or(Error::OffGrid { t })
}

/// `−i (V + H1 Z − Z H2 − Z V† Z)`.
fn riccati_kernel(h1: &CMat, v: &CMat, h2: &CMat, z: &CMat) -> CMat {
    let vz = v.adjoint() * z;
    let bracket = v + h1 * z - z * h2 - z * vz;
    bracket * (-I)
}

/// `dZ/dt` of the matrix Riccati equation at `Z` for the Hamiltonian sample
/// `h`.
pub fn matrix_riccati_rhs(zp: &CosetPoint, h: &HamiltonianSample) -> Result<CMat> {
    if zp.partition() != h.partition() {
        return Err(dim_mismatch(
            "matrix_riccati_rhs",
            format!("{:?}", h.partition()),
            format!("{:?}", zp.partition()),
        ));
    }
    Ok(riccati_kernel(&h.h1, &h.v, &h.h2, zp.z()))
}

fn ray_check(pt: &RayPoint, h: &HamiltonianSample) -> Result<()> {
    let part = h.partition();
    if part.n2() != 1 {
        return Err(dim_mismatch("ray-space equation", "n2 = 1", format!("n2 = {}", part.n2())));
    }
    if pt.len() != part.n1() {
        return Err(dim_mismatch("ray point", part.n1(), pt.len()));
    }
    Ok(())
}

/// `dz/dt` on ray space: the `n2 = 1` case of [`matrix_riccati_rhs`] with `z`
/// viewed as an `(N−1) × 1` matrix.
pub fn vector_riccati_rhs(pt: &RayPoint, h: &HamiltonianSample) -> Result<CVec> {
    ray_check(pt, h)?;
    let zcol = CMat::from_column_slice(pt.len(), 1, pt.z.as_slice());
    let dz = riccati_kernel(&h.h1, &h.v, &h.h2, &zcol);
    Ok(CVec::from_column_slice(dz.as_slice()))
}

/// Imaginary-part threshold for the real-valued scalar rates, relative to the
/// size of the terms involved.
const REAL_RESIDUE_TOL: f64 = 1e-12;

/// `γ̇/γ = i (V†z − z†V)`, checked to be real.
fn gamma_rate(z: &CVec, v: &CVec) -> Result<f64> {
    let vz = v.dotc(z);
    let zv = z.dotc(v);
    let rate = I * (vz - zv);
    let scale = 1.0 + v.norm() * z.norm();
    if rate.im.abs() > REAL_RESIDUE_TOL * scale {
        return Err(Error::NonRealResult { residue: rate.im });
    }
    Ok(rate.re)
}

/// `γ̇ = i γ (V†z − z†V)` with `γ = 1 + z†z`.
pub fn gamma_rhs(pt: &RayPoint, h: &HamiltonianSample) -> Result<f64> {
    ray_check(pt, h)?;
    let v = h.v.column(0).into_owned();
    Ok(pt.gamma() * gamma_rate(&pt.z, &v)?)
}

/// `α̇ = −H2 − (V†z + z†V)/2`.
pub fn alpha_rhs(pt: &RayPoint, h: &HamiltonianSample) -> Result<f64> {
    ray_check(pt, h)?;
    let v = h.v.column(0);
    let h2 = h.h2[(0, 0)].re;
    let coupling = v.dotc(&pt.z) + pt.z.dotc(&v);
    Ok(-h2 - 0.5 * coupling.re)
}

/// Classical RK4 on the matrix Riccati equation.
pub fn integrate_matrix_riccati(
    h: &BlockHamiltonian,
    z0: &CosetPoint,
    t0: f64,
    t1: f64,
    steps: usize,
    guard: f64,
    prof: &ToleranceProfile,
) -> Result<MatrixRiccatiTrajectory> {
    integrate_matrix_riccati_observed(h, z0, t0, t1, steps, guard, prof, |_, _| {})
}

/// [`integrate_matrix_riccati`] that also hands every accepted sample to
/// `observer` as soon as it is computed.
#[allow(clippy::too_many_arguments)]
pub fn integrate_matrix_riccati_observed<F>(
    h: &BlockHamiltonian,
    z0: &CosetPoint,
    t0: f64,
    t1: f64,
    steps: usize,
    guard: f64,
    prof: &ToleranceProfile,
    mut observer: F,
) -> Result<MatrixRiccatiTrajectory>
where
    F: FnMut(f64, &CosetPoint),
{
    let part = h.partition();
    if z0.partition() != part {
        return Err(dim_mismatch(
            "initial coset point",
            format!("{part:?}"),
            format!("{:?}", z0.partition()),
        ));
    }
    check_guard(guard)?;
    let grid = time_grid(t0, t1, steps)?;
    let mut times = vec![grid[0]];
    let mut points = vec![z0.clone()];
    observer(grid[0], z0);
    let mut breakdown = None;

    let mut z = z0.z().clone();
    let mut h_start = h.sample(grid[0], prof)?;
    for w in grid.windows(2) {
        let (t, dt) = (w[0], w[1] - w[0]);
        let h_mid = h.sample(t + 0.5 * dt, prof)?;
        let h_end = h.sample(w[1], prof)?;
        let f = |hs: &HamiltonianSample, zz: &CMat| riccati_kernel(&hs.h1, &hs.v, &hs.h2, zz);
        let k1 = f(&h_start, &z);
        let k2 = f(&h_mid, &(&z + &k1 * C64::from(0.5 * dt)));
        let k3 = f(&h_mid, &(&z + &k2 * C64::from(0.5 * dt)));
        let k4 = f(&h_end, &(&z + &k3 * C64::from(dt)));
        let next = &z + (k1 + (k2 + k3) * C64::from(2.0) + k4) * C64::from(dt / 6.0);

        let size = max_abs(&next);
        if !(size.is_finite() && size <= guard) {
            breakdown = Some(Breakdown {
                last_valid_time: t,
                max_abs: if size.is_finite() { size } else { f64::INFINITY },
            });
            break;
        }
        z = next;
        let zp = CosetPoint::new(part, z.clone())?;
        observer(w[1], &zp);
        times.push(w[1]);
        points.push(zp);
        h_start = h_end;
    }
    Ok(MatrixRiccatiTrajectory {
        times,
        points,
        breakdown,
    })
}

fn check_guard(guard: f64) -> Result<()> {
    if guard.is_nan() || guard <= 0.0 {
        return Err(Error::InvalidInput(format!("guard must be positive, got {guard}")));
    }
    Ok(())
}

/// One stored sample of a reduced integration, as seen by an observer.
#[derive(Debug, Clone, Copy)]
pub struct ReducedSample<'a> {
    pub t: f64,
    pub point: &'a RayPoint,
    pub gamma_integrated: f64,
    pub alpha: f64,
}

/// RK4 co-integration of `(z, γ, α)` on ray space.
#[allow(clippy::too_many_arguments)]
pub fn integrate_reduced(
    h: &BlockHamiltonian,
    z0: &RayPoint,
    alpha0: f64,
    t0: f64,
    t1: f64,
    steps: usize,
    guard: f64,
    prof: &ToleranceProfile,
) -> Result<ReducedTrajectory> {
    integrate_reduced_observed(h, z0, alpha0, t0, t1, steps, guard, prof, |_| {})
}

#[allow(clippy::too_many_arguments)]
pub fn integrate_reduced_observed<F>(
    h: &BlockHamiltonian,
    z0: &RayPoint,
    alpha0: f64,
    t0: f64,
    t1: f64,
    steps: usize,
    guard: f64,
    prof: &ToleranceProfile,
    mut observer: F,
) -> Result<ReducedTrajectory>
where
    F: FnMut(ReducedSample<'_>),
{
    let part = h.partition();
    if part.n2() != 1 {
        return Err(dim_mismatch("integrate_reduced", "n2 = 1", format!("n2 = {}", part.n2())));
    }
    if z0.len() != part.n1() {
        return Err(dim_mismatch("initial ray point", part.n1(), z0.len()));
    }
    if !alpha0.is_finite() {
        return Err(Error::InvalidInput("alpha0 must be finite".into()));
    }
    check_guard(guard)?;
    let grid = time_grid(t0, t1, steps)?;

    let mut z = z0.z.clone();
    let mut gamma = z0.gamma();
    let mut alpha = alpha0;
    let mut traj = ReducedTrajectory {
        times: vec![grid[0]],
        points: vec![z0.clone()],
        alpha: vec![alpha],
        gamma_integrated: vec![gamma],
        breakdown: None,
    };
    observer(ReducedSample {
        t: grid[0],
        point: z0,
        gamma_integrated: gamma,
        alpha,
    });

    // (dz, dγ, dα) at a stage.
    let rates = |hs: &HamiltonianSample, zz: &CVec, g: f64| -> Result<(CVec, f64, f64)> {
        let pt = RayPoint { z: zz.clone() };
        let v = hs.v.column(0).into_owned();
        Ok((
            vector_riccati_rhs(&pt, hs)?,
            g * gamma_rate(zz, &v)?,
            alpha_rhs(&pt, hs)?,
        ))
    };

    let mut h_start = h.sample(grid[0], prof)?;
    for w in grid.windows(2) {
        let (t, dt) = (w[0], w[1] - w[0]);
        let h_mid = h.sample(t + 0.5 * dt, prof)?;
        let h_end = h.sample(w[1], prof)?;
        let half = C64::from(0.5 * dt);
        let (kz1, kg1, ka1) = rates(&h_start, &z, gamma)?;
        let (kz2, kg2, ka2) = rates(&h_mid, &(&z + &kz1 * half), gamma + 0.5 * dt * kg1)?;
        let (kz3, kg3, ka3) = rates(&h_mid, &(&z + &kz2 * half), gamma + 0.5 * dt * kg2)?;
        let (kz4, kg4, ka4) = rates(&h_end, &(&z + &kz3 * C64::from(dt)), gamma + dt * kg3)?;
        let next = &z + (kz1 + (kz2 + kz3) * C64::from(2.0) + kz4) * C64::from(dt / 6.0);

        let size = next.iter().fold(0.0f64, |m, c| m.max(c.norm()));
        if !(size.is_finite() && size <= guard) {
            traj.breakdown = Some(Breakdown {
                last_valid_time: t,
                max_abs: if size.is_finite() { size } else { f64::INFINITY },
            });
            break;
        }
        z = next;
        gamma += dt / 6.0 * (kg1 + 2.0 * (kg2 + kg3) + kg4);
        alpha += dt / 6.0 * (ka1 + 2.0 * (ka2 + ka3) + ka4);

        let pt = RayPoint { z: z.clone() };
        observer(ReducedSample {
            t: w[1],
            point: &pt,
            gamma_integrated: gamma,
            alpha,
        });
        traj.times.push(w[1]);
        traj.points.push(pt);
        traj.alpha.push(alpha);
        traj.gamma_integrated.push(gamma);
        h_start = h_end;
    }
    Ok(traj)
}

/// Overlap `1 + z1† z2` of the unnormalized chart vectors `(z1, 1)`, `(z2, 1)`.
pub fn chart_overlap(z1: &RayPoint, z2: &RayPoint) -> C64 {
    ONE + z1.z.dotc(&z2.z)
}
