//! Total, dynamical and geometric phases.
//!
//! Two routes are provided. Along a reduced Schrödinger trajectory
//!
//! ```text
//! φ_tot  = α(t2) − α(t1) + arg(1 + z(t1)† z(t2))
//! φ_dyn  = ∫ H(z(t)) dt
//! φ_geom = φ_tot − φ_dyn
//! ```
//!
//! and for an arbitrary parametrized curve in ray space (the kinematic route)
//!
//! ```text
//! φ_geom = arg(1 + z(s1)† z(s2)) − ∫ θ0
//! ```
//!
//! which does not involve the lift phase at all. Phases are kept as unwrapped
//! reals; `arg` is the principal branch `(−π, π]`. Increasing curve parameter
//! is the positive orientation.

use serde::Serialize;
use std::f64::consts::PI;

use crate::dynamics::BlockHamiltonian;
use crate::error::{Error, Result};
use crate::matcore::{CVec, ToleranceProfile, C64};
use crate::riccati::{chart_overlap, RayPoint, ReducedTrajectory};
use crate::symplectic::{classical_hamiltonian, theta0};

/// Overlaps below this size make the total phase undefined.
pub const OVERLAP_FLOOR: f64 = 1e-12;
/// Endpoint gap below which a curve counts as closed.
pub const CLOSURE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseConvention {
    pub arg_branch: String,
    pub alpha: String,
    pub orientation: String,
}

impl Default for PhaseConvention {
    fn default() -> Self {
        Self {
            arg_branch: "(-pi, pi]".into(),
            alpha: "unwrapped".into(),
            orientation: "increasing parameter is positive".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseReport {
    pub phi_total: f64,
    pub phi_dynamical: f64,
    pub phi_geometric: f64,
    /// `α(end) − α(start)`, present when the endpoints coincide in ray space.
    pub cyclic_total: Option<f64>,
    pub convention: PhaseConvention,
}

impl PhaseReport {
    /// `φ_geom` reduced to `(−π, π]`.
    pub fn geometric_principal(&self) -> f64 {
        principal(self.phi_geometric)
    }

    /// `|φ_tot − φ_dyn − φ_geom|`.
    pub fn additivity_residual(&self) -> f64 {
        (self.phi_total - self.phi_dynamical - self.phi_geometric).abs()
    }
}

/// Representative of `x` modulo `2π` in `(−π, π]`.
pub fn principal(x: f64) -> f64 {
    let r = x - 2.0 * PI * (x / (2.0 * PI)).round();
    if r <= -PI {
        r + 2.0 * PI
    } else {
        r
    }
}

/// Distance between two angles modulo `2π`.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    principal(a - b).abs()
}

fn overlap_arg(a: &RayPoint, b: &RayPoint) -> Result<f64> {
    let w = chart_overlap(a, b);
    if w.norm() < OVERLAP_FLOOR {
        return Err(Error::UndefinedPhase { overlap: w.norm() });
    }
    Ok(w.arg())
}

fn ordered_indices(traj: &ReducedTrajectory, t1: f64, t2: f64) -> Result<(usize, usize)> {
    let (i1, i2) = (traj.index_of(t1)?, traj.index_of(t2)?);
    if i2 < i1 {
        return Err(Error::InvalidInput(format!("phase interval needs t1 <= t2, got [{t1}, {t2}]")));
    }
    Ok((i1, i2))
}

/// `α(t2) − α(t1) + arg(1 + z(t1)† z(t2))`.
pub fn total_phase_schrodinger(traj: &ReducedTrajectory, t1: f64, t2: f64) -> Result<f64> {
    let (i1, i2) = ordered_indices(traj, t1, t2)?;
    let arg = overlap_arg(&traj.points[i1], &traj.points[i2])?;
    Ok(traj.alpha[i2] - traj.alpha[i1] + arg)
}

/// Composite Simpson's rule on equally spaced samples, closing an odd number
/// of intervals with a 3/8 panel.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let m = values.len().saturating_sub(1);
    match m {
        0 => 0.0,
        1 => 0.5 * h * (values[0] + values[1]),
        _ => {
            let even_end = if m.is_multiple_of(2) { m } else { m - 3 };
            let mut s = 0.0;
            let mut k = 0;
            while k < even_end {
                s += h / 3.0 * (values[k] + 4.0 * values[k + 1] + values[k + 2]);
                k += 2;
            }
            if even_end < m {
                let v = &values[even_end..];
                s += 3.0 * h / 8.0 * (v[0] + 3.0 * v[1] + 3.0 * v[2] + v[3]);
            }
            s
        }
    }
}

/// `∫ H(z(t)) dt` over the stored samples between `t1` and `t2`.
pub fn dynamical_phase_schrodinger(
    traj: &ReducedTrajectory,
    h: &BlockHamiltonian,
    t1: f64,
    t2: f64,
    prof: &ToleranceProfile,
) -> Result<f64> {
    let (i1, i2) = ordered_indices(traj, t1, t2)?;
    if i1 == i2 {
        return Ok(0.0);
    }
    let values = (i1..=i2)
        .map(|k| classical_hamiltonian(&traj.points[k], &h.sample(traj.times[k], prof)?))
        .collect::<Result<Vec<_>>>()?;
    let step = (traj.times[i2] - traj.times[i1]) / (i2 - i1) as f64;
    Ok(simpson(&values, step))
}

pub fn geometric_phase_schrodinger(
    traj: &ReducedTrajectory,
    h: &BlockHamiltonian,
    t1: f64,
    t2: f64,
    prof: &ToleranceProfile,
) -> Result<PhaseReport> {
    let (i1, i2) = ordered_indices(traj, t1, t2)?;
    let phi_total = total_phase_schrodinger(traj, t1, t2)?;
    let phi_dynamical = dynamical_phase_schrodinger(traj, h, t1, t2, prof)?;
    let closed = (traj.points[i1].z() - traj.points[i2].z()).norm() < CLOSURE_TOL;
    Ok(PhaseReport {
        phi_total,
        phi_dynamical,
        phi_geometric: phi_total - phi_dynamical,
        cyclic_total: closed.then(|| traj.alpha[i2] - traj.alpha[i1]),
        convention: PhaseConvention::default(),
    })
}

/// Sampled curve in ray space with an optional lift phase.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicCurve {
    params: Vec<f64>,
    points: Vec<RayPoint>,
    alphas: Option<Vec<f64>>,
}

impl KinematicCurve {
    pub fn new(params: Vec<f64>, points: Vec<RayPoint>, alphas: Option<Vec<f64>>) -> Result<Self> {
        if params.len() < 2 {
            return Err(Error::InvalidInput("a curve needs at least 2 samples".into()));
        }
        if points.len() != params.len() {
            return Err(Error::InvalidInput(format!(
                "curve has {} parameters but {} points",
                params.len(),
                points.len()
            )));
        }
        if params.iter().any(|s| !s.is_finite()) || params.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("curve parameters must be finite and strictly increasing".into()));
        }
        if points.iter().any(|p| p.len() != points[0].len()) {
            return Err(Error::InvalidInput("curve points must share one dimension".into()));
        }
        if let Some(a) = &alphas {
            if a.len() != params.len() || a.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput("alphas must be finite, one per sample".into()));
            }
        }
        Ok(Self { params, points, alphas })
    }

    /// Ray-space image of a reduced trajectory, lifted by its `α`.
    pub fn from_trajectory(traj: &ReducedTrajectory) -> Result<Self> {
        Self::new(traj.times.clone(), traj.points.clone(), Some(traj.alpha.clone()))
    }

    /// `z(s) = r e^{is}`, `s ∈ [0, 2π]`, for `N = 2`, traversed counter-clockwise.
    pub fn circle(radius: f64, samples: usize) -> Result<Self> {
        let m = samples.max(2) - 1;
        let params: Vec<f64> = (0..=m).map(|k| 2.0 * PI * k as f64 / m as f64).collect();
        let points = params
            .iter()
            .map(|&s| RayPoint::new(CVec::from_element(1, C64::from_polar(radius, s))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(params, points, None)
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn points(&self) -> &[RayPoint] {
        &self.points
    }

    pub fn alphas(&self) -> Option<&[f64]> {
        self.alphas.as_deref()
    }

    pub fn with_alphas(self, alphas: Vec<f64>) -> Result<Self> {
        Self::new(self.params, self.points, Some(alphas))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    fn alpha(&self, k: usize) -> f64 {
        self.alphas.as_ref().map_or(0.0, |a| a[k])
    }

    /// `‖z(end) − z(start)‖`.
    pub fn endpoint_gap(&self) -> f64 {
        (self.points[self.len() - 1].z() - self.points[0].z()).norm()
    }
}

/// Nodes used for the tangent at each sample.
const STENCIL: usize = 5;

/// Derivative at node `k` of the Lagrange interpolant through `xs`.
fn lagrange_derivative_weights(xs: &[f64], k: usize) -> Vec<f64> {
    (0..xs.len())
        .map(|j| {
            if j == k {
                (0..xs.len()).filter(|&m| m != k).map(|m| 1.0 / (xs[k] - xs[m])).sum()
            } else {
                let num: f64 = (0..xs.len()).filter(|&m| m != j && m != k).map(|m| xs[k] - xs[m]).product();
                let den: f64 = (0..xs.len()).filter(|&m| m != j).map(|m| xs[j] - xs[m]).product();
                num / den
            }
        })
        .collect()
}

/// Finite-difference tangent at sample `k`: centered in the interior,
/// one-sided near the ends.
fn tangent(curve: &KinematicCurve, k: usize) -> CVec {
    let n = curve.len();
    let width = STENCIL.min(n);
    let base = k.saturating_sub(width / 2).min(n - width);
    let weights = lagrange_derivative_weights(&curve.params[base..base + width], k - base);
    // The weights sum to zero, so differences against node k keep constant
    // curves exactly stationary.
    let zk = curve.points[k].z();
    let mut d = CVec::zeros(zk.len());
    for (j, w) in weights.into_iter().enumerate() {
        if base + j != k {
            d += (curve.points[base + j].z() - zk) * C64::from(w);
        }
    }
    d
}

/// `∫_C θ0` by the trapezoid rule on `θ0(z(s), z'(s))`.
pub fn line_integral_theta0(curve: &KinematicCurve) -> f64 {
    let integrand: Vec<f64> = (0..curve.len())
        .map(|k| theta0(&curve.points[k], &tangent(curve, k)).expect("curve dimensions are uniform"))
        .collect();
    curve
        .params
        .windows(2)
        .zip(integrand.windows(2))
        .map(|(s, f)| 0.5 * (s[1] - s[0]) * (f[0] + f[1]))
        .sum()
}

/// Kinematic phases of a lifted curve. `φ_geom` depends on the ray-space
/// curve only.
pub fn kinematic_phases(curve: &KinematicCurve) -> Result<PhaseReport> {
    let last = curve.len() - 1;
    let line = line_integral_theta0(curve);
    let phi_geometric = overlap_arg(&curve.points[0], &curve.points[last])? - line;
    let lift = curve.alpha(last) - curve.alpha(0);
    let phi_dynamical = lift + line;
    Ok(PhaseReport {
        phi_total: phi_dynamical + phi_geometric,
        phi_dynamical,
        phi_geometric,
        cyclic_total: (curve.endpoint_gap() < CLOSURE_TOL).then_some(lift),
        convention: PhaseConvention::default(),
    })
}

/// Eight-point Gauss–Legendre rule mapped to `[0, 1]`, as `(node, weight)`.
pub fn gauss_legendre_unit() -> [(f64, f64); 8] {
    const HALF: [(f64, f64); 4] = [
        (0.183_434_642_495_649_8, 0.362_683_783_378_362),
        (0.525_532_409_916_329, 0.313_706_645_877_887_3),
        (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
        (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
    ];
    let mut out = [(0.0, 0.0); 8];
    for (k, &(x, w)) in HALF.iter().enumerate() {
        out[2 * k] = (0.5 * (1.0 - x), 0.5 * w);
        out[2 * k + 1] = (0.5 * (1.0 + x), 0.5 * w);
    }
    out
}

const RADIAL_PANELS: usize = 8;

/// `∬ ω0` over the fan of triangles `(0, z_k, z_{k+1})` in the `N = 2` chart,
/// with `ω0 = 2/γ² dq∧dp`.
pub fn fan_surface_integral(curve: &KinematicCurve) -> Result<f64> {
    if curve.points[0].len() != 1 {
        return Err(Error::InvalidInput("fan surface integral needs N = 2".into()));
    }
    let gl = gauss_legendre_unit();
    let pts: Vec<(f64, f64)> = curve.points.iter().map(|p| (p.z()[0].re, p.z()[0].im)).collect();
    let mut total = 0.0;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let cross = a.0 * b.1 - a.1 * b.0;
        if cross == 0.0 {
            continue;
        }
        let mut s = 0.0;
        let radial = (0..RADIAL_PANELS).flat_map(|k| {
            gl.iter()
                .map(move |&(u, w)| ((k as f64 + u) / RADIAL_PANELS as f64, w / RADIAL_PANELS as f64))
        });
        for (u, wu) in radial {
            for &(v, wv) in &gl {
                let q = u * (a.0 + v * (b.0 - a.0));
                let p = u * (a.1 + v * (b.1 - a.1));
                let g = 1.0 + q * q + p * p;
                s += wu * wv * u * 2.0 / (g * g);
            }
        }
        total += s * cross;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoopArea {
    /// `−∮ θ0`.
    pub area: f64,
    /// `−∬ ω0` over the fan surface (`N = 2` only).
    pub surface: Option<f64>,
}

impl LoopArea {
    pub fn stokes_residual(&self) -> Option<f64> {
        self.surface.map(|s| (s - self.area).abs())
    }
}

/// Symplectic area `−∮ θ0` of a closed loop, which is its geometric phase.
pub fn loop_symplectic_area(curve: &KinematicCurve) -> Result<LoopArea> {
    let gap = curve.endpoint_gap();
    if gap >= CLOSURE_TOL {
        return Err(Error::NotClosed { gap });
    }
    let surface = if curve.points[0].len() == 1 {
        Some(-fan_surface_integral(curve)?)
    } else {
        None
    };
    Ok(LoopArea {
        area: -line_integral_theta0(curve),
        surface,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coset::Partition;
    use crate::dynamics::{evolve_state, pauli};
    use crate::matcore::{CMat, ONE, ZERO};
    use crate::riccati::{integrate_reduced, DEFAULT_GUARD};
    use crate::rng::SeededRng;
    use proptest::prelude::*;

    fn prof() -> ToleranceProfile {
        ToleranceProfile::default()
    }

    fn cone(omega: f64, theta: f64, steps: usize) -> (BlockHamiltonian, ReducedTrajectory, f64) {
        let [_, _, sz] = pauli();
        let h = BlockHamiltonian::constant(Partition::new(1, 1).unwrap(), sz.scale(omega / 2.0), &prof()).unwrap();
        let z0 = RayPoint::new(CVec::from_element(1, C64::from((theta / 2.0).tan()))).unwrap();
        let period = 2.0 * PI / omega;
        let traj = integrate_reduced(&h, &z0, 0.0, 0.0, period, steps, DEFAULT_GUARD, &prof()).unwrap();
        (h, traj, period)
    }

    #[test]
    fn principal_branch() {
        assert_eq!(principal(PI), PI);
        assert!((principal(-PI) - PI).abs() < 1e-15);
        assert!((principal(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert!(angle_distance(0.1, 0.1 + 2.0 * PI) < 1e-15);
    }

    #[test]
    fn simpson_rules() {
        let h = 0.1;
        for m in [1usize, 2, 3, 4, 5, 7] {
            let xs: Vec<f64> = (0..=m).map(|k| k as f64 * h).collect();
            let cubic: Vec<f64> = xs.iter().map(|x| x * x * x - 2.0 * x).collect();
            let b = m as f64 * h;
            let exact = b.powi(4) / 4.0 - b * b;
            let tol = if m == 1 { 1e-3 } else { 1e-14 };
            assert!((simpson(&cubic, h) - exact).abs() < tol, "m={m}");
        }
    }

    #[test]
    fn trivial_schrodinger_phases() {
        let part = Partition::new(2, 1).unwrap();
        let mut rng = SeededRng::new(21);
        let z0 = RayPoint::new(rng.complex_vector(2, 1.0)).unwrap();
        let h = BlockHamiltonian::zero(part);
        let traj = integrate_reduced(&h, &z0, 0.0, 0.0, 1.0, 10, DEFAULT_GUARD, &prof()).unwrap();
        let rep = geometric_phase_schrodinger(&traj, &h, 0.0, 1.0, &prof()).unwrap();
        assert_eq!((rep.phi_total, rep.phi_dynamical, rep.phi_geometric), (0.0, 0.0, 0.0));
        assert_eq!(total_phase_schrodinger(&traj, 0.5, 0.5).unwrap(), 0.0);

        let id = BlockHamiltonian::constant(part, CMat::identity(3, 3), &prof()).unwrap();
        let traj = integrate_reduced(&id, &z0, 0.0, 0.0, 2.5, 50, DEFAULT_GUARD, &prof()).unwrap();
        assert!((dynamical_phase_schrodinger(&traj, &id, 0.0, 2.5, &prof()).unwrap() + 2.5).abs() < 1e-13);
        assert!(matches!(total_phase_schrodinger(&traj, 0.0, 0.33), Err(Error::OffGrid { .. })));
    }

    #[test]
    fn total_phase_matches_inner_product() {
        let part = Partition::new(2, 1).unwrap();
        let mut rng = SeededRng::new(22);
        let h = BlockHamiltonian::constant(part, rng.hermitian(3, 0.6), &prof()).unwrap();
        let psi0 = rng.unit_vector(3);
        let (z0, a0) = RayPoint::from_state(&psi0).unwrap();
        let traj = integrate_reduced(&h, &z0, a0, 0.0, 2.0, 2000, DEFAULT_GUARD, &prof()).unwrap();
        let full = evolve_state(&h, &psi0, 0.0, 2.0, 2000, &prof()).unwrap();
        for (i, j) in [(0usize, 700usize), (300, 2000), (1000, 1500)] {
            let direct = full.states[i].dotc(&full.states[j]).arg();
            let got = total_phase_schrodinger(&traj, traj.times[i], traj.times[j]).unwrap();
            assert!(angle_distance(got, direct) < 1e-8);
        }
    }

    #[test]
    fn orthogonal_endpoints_are_rejected() {
        let a = RayPoint::new(CVec::from_element(1, ONE)).unwrap();
        let b = RayPoint::new(CVec::from_element(1, -ONE)).unwrap();
        let curve = KinematicCurve::new(vec![0.0, 1.0], vec![a, b], None).unwrap();
        assert!(matches!(kinematic_phases(&curve), Err(Error::UndefinedPhase { .. })));
    }

    #[test]
    fn cone_phases() {
        for theta in [PI / 6.0, PI / 3.0, PI / 2.0, 2.0 * PI / 3.0] {
            let (h, traj, period) = cone(1.0, theta, 4000);
            let rep = geometric_phase_schrodinger(&traj, &h, 0.0, period, &prof()).unwrap();
            assert!((rep.phi_total - PI).abs() < 1e-8);
            assert!((rep.phi_dynamical - PI * theta.cos()).abs() < 1e-8);
            assert!(angle_distance(rep.phi_geometric, PI * (1.0 - theta.cos())) < 1e-8);
            let cyc = rep.cyclic_total.expect("closed orbit");
            assert!((cyc - rep.phi_total).abs() < 1e-8);

            let kin = kinematic_phases(&KinematicCurve::from_trajectory(&traj).unwrap()).unwrap();
            let d = angle_distance(kin.phi_geometric, rep.phi_geometric);
            assert!(d < 1e-7, "theta {theta}: {d:e}");
        }
    }

    #[test]
    fn line_integral_examples() {
        let p = RayPoint::new(CVec::from_vec(vec![C64::new(0.3, 0.1), ZERO])).unwrap();
        let constant = KinematicCurve::new(vec![0.0, 0.5, 1.0], vec![p.clone(), p.clone(), p], None).unwrap();
        assert_eq!(line_integral_theta0(&constant), 0.0);
        let rep = kinematic_phases(&constant).unwrap();
        assert_eq!((rep.phi_total, rep.phi_dynamical, rep.phi_geometric), (0.0, 0.0, 0.0));

        let params: Vec<f64> = (0..20).map(|k| k as f64 / 19.0).collect();
        let radial: Vec<RayPoint> = params
            .iter()
            .map(|&s| RayPoint::new(CVec::from_vec(vec![C64::from(2.0 * s), C64::from(-s)])).unwrap())
            .collect();
        let radial = KinematicCurve::new(params, radial, None).unwrap();
        assert_eq!(line_integral_theta0(&radial), 0.0);

        for r in [0.2, 1.0, 3.0] {
            let c = KinematicCurve::circle(r, 10_001).unwrap();
            let want = 2.0 * PI * r * r / (1.0 + r * r);
            assert!((line_integral_theta0(&c) - want).abs() < 1e-6);
            let area = loop_symplectic_area(&c).unwrap();
            assert!((area.area + want).abs() < 1e-6);
            assert!(area.stokes_residual().unwrap() < 1e-5, "{area:?}");
        }
    }

    #[test]
    fn refinement_is_second_order() {
        let build = |m: usize| {
            let params: Vec<f64> = (0..=m).map(|k| k as f64 / m as f64).collect();
            let pts = params
                .iter()
                .map(|&s| {
                    RayPoint::new(CVec::from_vec(vec![
                        C64::new(s.cos(), (2.0 * s).sin()),
                        C64::new(s * s, 0.5 - s),
                    ]))
                    .unwrap()
                })
                .collect();
            line_integral_theta0(&KinematicCurve::new(params, pts, None).unwrap())
        };
        let (a, b, c) = (build(50), build(100), build(200));
        let ratio = (a - b) / (b - c);
        assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn loop_area_examples() {
        let p = RayPoint::new(CVec::from_element(1, C64::new(0.4, 0.2))).unwrap();
        let point = KinematicCurve::new(vec![0.0, 1.0], vec![p.clone(), p], None).unwrap();
        let area = loop_symplectic_area(&point).unwrap();
        assert_eq!(area.area, 0.0);
        assert_eq!(area.surface, Some(0.0));

        let open = KinematicCurve::new(
            vec![0.0, 1.0],
            vec![RayPoint::origin(1), RayPoint::new(CVec::from_element(1, ONE)).unwrap()],
            None,
        )
        .unwrap();
        assert!(matches!(loop_symplectic_area(&open), Err(Error::NotClosed { .. })));

        // Clockwise circle of radius tan(θ/2) reproduces the precession phase.
        let theta = PI / 3.0;
        let r = (theta / 2.0).tan();
        let m = 10_000;
        let params: Vec<f64> = (0..=m).map(|k| 2.0 * PI * k as f64 / m as f64).collect();
        let pts = params
            .iter()
            .map(|&s| RayPoint::new(CVec::from_element(1, C64::from_polar(r, -s))).unwrap())
            .collect();
        let cw = KinematicCurve::new(params, pts, None).unwrap();
        let area = loop_symplectic_area(&cw).unwrap();
        assert!(angle_distance(area.area, PI * (1.0 - theta.cos())) < 1e-6);
    }

    #[test]
    fn curve_validation() {
        let p = RayPoint::origin(1);
        assert!(KinematicCurve::new(vec![0.0], vec![p.clone()], None).is_err());
        assert!(KinematicCurve::new(vec![0.0, 0.0], vec![p.clone(), p.clone()], None).is_err());
        assert!(KinematicCurve::new(vec![0.0, 1.0], vec![p.clone(), RayPoint::origin(2)], None).is_err());
        assert!(KinematicCurve::new(vec![0.0, 1.0], vec![p.clone(), p], Some(vec![0.0])).is_err());
    }

    fn wiggly_curve(seed: u64, m: usize) -> KinematicCurve {
        let mut rng = SeededRng::new(seed);
        let n = 1 + (rng.uniform() * 3.0) as usize;
        let c: Vec<CVec> = (0..3).map(|_| rng.complex_vector(n, 0.6)).collect();
        let params: Vec<f64> = (0..=m).map(|k| k as f64 / m as f64).collect();
        let pts = params
            .iter()
            .map(|&s| {
                let z = &c[0] + &c[1] * C64::from((3.0 * s).sin()) + &c[2] * C64::new(s * s, s);
                RayPoint::new(z).unwrap()
            })
            .collect();
        KinematicCurve::new(params, pts, None).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn geometric_phase_is_gauge_invariant(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let curve = wiggly_curve(seed, 400);
            let base = kinematic_phases(&curve).unwrap();
            let alphas: Vec<f64> = curve.params().iter().map(|&s| a * s + b * (5.0 * s).sin()).collect();
            let gauged = kinematic_phases(&curve.clone().with_alphas(alphas.clone()).unwrap()).unwrap();
            prop_assert_eq!(base.phi_geometric, gauged.phi_geometric);
            let shift = alphas[alphas.len() - 1] - alphas[0];
            prop_assert!((gauged.phi_dynamical - base.phi_dynamical - shift).abs() < 1e-12);
            prop_assert!(gauged.additivity_residual() < 1e-12);
        }

        #[test]
        fn geometric_phase_is_reparametrization_invariant(seed in any::<u64>()) {
            let m = 4000;
            let curve = wiggly_curve(seed, m);
            let phi = kinematic_phases(&curve).unwrap().phi_geometric;
            // Same points, new parameter σ = s + 0.3 s².
            let params: Vec<f64> = curve.params().iter().map(|&s| s + 0.3 * s * s).collect();
            let re = KinematicCurve::new(params, curve.points().to_vec(), None).unwrap();
            let phi_re = kinematic_phases(&re).unwrap().phi_geometric;
            prop_assert!((phi - phi_re).abs() < 1e-7, "{} vs {}", phi, phi_re);
        }
    }
}
