//! Block Hamiltonians and the full Schrödinger evolution of `U(t)` and `ψ(t)`.
//!
//! Both propagators use the exponential midpoint rule
//! `U ← exp(−i H(t + dt/2) dt) U`: exact for constant `H`, second order
//! otherwise, and unitary to rounding at every step. These trajectories are
//! the reference against which the reduced dynamics is checked.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coset::Partition;
use crate::error::{dim_mismatch, Error, Result};
use crate::matcore::{
    ensure_finite, hermiticity_residual, unitarity_residual, unitary_exp_step, CMat, CVec,
    ToleranceProfile, C64, ONE, ZERO,
};
use crate::rng::SeededRng;

/// Hamiltonian at one instant, split as `[[H1, V], [V†, H2]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSample {
    partition: Partition,
    pub h1: CMat,
    pub v: CMat,
    pub h2: CMat,
}

impl HamiltonianSample {
    /// Splits a full `N × N` matrix. The lower-left block is taken to be `V†`;
    /// callers are expected to have checked Hermiticity.
    pub fn from_full(h: &CMat, part: Partition) -> Result<Self> {
        let (n1, n2, n) = (part.n1(), part.n2(), part.dim());
        if h.shape() != (n, n) {
            return Err(dim_mismatch(
                "Hamiltonian sample",
                format!("{n}x{n}"),
                format!("{}x{}", h.nrows(), h.ncols()),
            ));
        }
        Ok(Self {
            partition: part,
            h1: h.view((0, 0), (n1, n1)).into_owned(),
            v: h.view((0, n1), (n1, n2)).into_owned(),
            h2: h.view((n1, n1), (n2, n2)).into_owned(),
        })
    }

    pub fn partition(&self) -> Partition {
        self.partition
    }

    pub fn assemble(&self) -> CMat {
        let (n1, n2) = (self.partition.n1(), self.partition.n2());
        let n = n1 + n2;
        let mut h = CMat::zeros(n, n);
        h.view_mut((0, 0), (n1, n1)).copy_from(&self.h1);
        h.view_mut((0, n1), (n1, n2)).copy_from(&self.v);
        h.view_mut((n1, 0), (n2, n1)).copy_from(&self.v.adjoint());
        h.view_mut((n1, n1), (n2, n2)).copy_from(&self.h2);
        h
    }

    /// Ray-space view for `n2 = 1`: `(H1, V as a vector, H2 as a real)`.
    pub fn ray_blocks(&self) -> Result<(&CMat, CVec, f64)> {
        if self.partition.n2() != 1 {
            return Err(dim_mismatch(
                "ray-space Hamiltonian",
                "n2 = 1",
                format!("n2 = {}", self.partition.n2()),
            ));
        }
        Ok((&self.h1, self.v.column(0).into_owned(), self.h2[(0, 0)].re))
    }
}

type Evaluator = dyn Fn(f64) -> CMat + Send + Sync;

/// Time-dependent Hermitian Hamiltonian over a fixed partition (`ħ = 1`,
/// entries in angular frequency).
#[derive(Clone)]
pub struct BlockHamiltonian {
    partition: Partition,
    eval: Arc<Evaluator>,
}

impl fmt::Debug for BlockHamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlockHamiltonian")
            .field("partition", &self.partition)
            .finish_non_exhaustive()
    }
}

impl BlockHamiltonian {
    /// Wraps an evaluator. It must be pure in `t` and return `N × N` matrices.
    pub fn new<F>(partition: Partition, eval: F) -> Self
    where
        F: Fn(f64) -> CMat + Send + Sync + 'static,
    {
        Self {
            partition,
            eval: Arc::new(eval),
        }
    }

    pub fn constant(partition: Partition, h: CMat, prof: &ToleranceProfile) -> Result<Self> {
        let n = partition.dim();
        if h.shape() != (n, n) {
            return Err(dim_mismatch(
                "constant Hamiltonian",
                format!("{n}x{n}"),
                format!("{}x{}", h.nrows(), h.ncols()),
            ));
        }
        let h = crate::matcore::hermitian_part(&h, prof)?;
        Ok(Self::new(partition, move |_| h.clone()))
    }

    pub fn zero(partition: Partition) -> Self {
        let n = partition.dim();
        Self::new(partition, move |_| CMat::zeros(n, n))
    }

    pub fn partition(&self) -> Partition {
        self.partition
    }

    pub fn dim(&self) -> usize {
        self.partition.dim()
    }

    /// Raw evaluator output.
    pub fn full(&self, t: f64) -> CMat {
        (self.eval)(t)
    }

    /// Evaluates `H(t)`, checks shape and Hermiticity, and returns the
    /// symmetrized matrix.
    pub fn checked(&self, t: f64, prof: &ToleranceProfile) -> Result<CMat> {
        let h = self.full(t);
        let n = self.dim();
        if h.shape() != (n, n) {
            return Err(dim_mismatch(
                format!("Hamiltonian at t = {t}"),
                format!("{n}x{n}"),
                format!("{}x{}", h.nrows(), h.ncols()),
            ));
        }
        ensure_finite(&h, "Hamiltonian sample")?;
        let residual = hermiticity_residual(&h);
        if residual > prof.hermiticity_tol {
            return Err(Error::NonHermitianSample { t, residual });
        }
        Ok((&h + h.adjoint()).scale(0.5))
    }

    pub fn sample(&self, t: f64, prof: &ToleranceProfile) -> Result<HamiltonianSample> {
        HamiltonianSample::from_full(&self.checked(t, prof)?, self.partition)
    }
}

/// `[re, im]` encoded matrix, row-major nested arrays.
pub type PairMatrix = Vec<Vec<[f64; 2]>>;
/// `[re, im]` encoded vector.
pub type PairVector = Vec<[f64; 2]>;

pub fn matrix_from_pairs(rows: &PairMatrix) -> Result<CMat> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(Error::InvalidInput("matrix must be nonempty".into()));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(dim_mismatch(format!("row {i}"), ncols, r.len()));
    }
    let entries: Vec<C64> = rows
        .iter()
        .flatten()
        .map(|&[re, im]| C64::new(re, im))
        .collect();
    crate::matcore::cmat_from_row_major(nrows, ncols, &entries)
}

pub fn matrix_to_pairs(m: &CMat) -> PairMatrix {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn vector_from_pairs(v: &PairVector) -> Result<CVec> {
    if v.is_empty() {
        return Err(Error::InvalidInput("vector must be nonempty".into()));
    }
    let out = CVec::from_iterator(v.len(), v.iter().map(|&[re, im]| C64::new(re, im)));
    if out.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return Err(Error::NonFinite {
            context: "vector".into(),
        });
    }
    Ok(out)
}

pub fn vector_to_pairs(v: &CVec) -> PairVector {
    v.iter().map(|c| [c.re, c.im]).collect()
}

/// Scalar time envelope multiplying one term of a [`HamiltonianSpec::SumOfTerms`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Envelope {
    Const {
        amplitude: f64,
    },
    Cos {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    Sin {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
}

impl Envelope {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Envelope::Const { amplitude } => amplitude,
            Envelope::Cos {
                amplitude,
                frequency,
                phase,
            } => amplitude * (frequency * t + phase).cos(),
            Envelope::Sin {
                amplitude,
                frequency,
                phase,
            } => amplitude * (frequency * t + phase).sin(),
        }
    }

    fn is_finite(&self) -> bool {
        match *self {
            Envelope::Const { amplitude } => amplitude.is_finite(),
            Envelope::Cos {
                amplitude,
                frequency,
                phase,
            }
            | Envelope::Sin {
                amplitude,
                frequency,
                phase,
            } => amplitude.is_finite() && frequency.is_finite() && phase.is_finite(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub matrix: PairMatrix,
    pub envelope: Envelope,
}

/// Periodic drive for [`HamiltonianSpec::Random`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Drive {
    pub frequency: f64,
    pub amplitude: f64,
}

/// Serializable Hamiltonian description.
///
/// `random` draws `H0` (and, with a drive, `Hc` then `Hs`) as
/// [`SeededRng::hermitian`]`(N, scale)` from `seed`, giving
/// `H(t) = H0 + amplitude · (cos(ωt) Hc + sin(ωt) Hs)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HamiltonianSpec {
    Constant {
        matrix: PairMatrix,
    },
    /// Two-level field of magnitude `omega0` tilted by `tilt` from the z axis
    /// and precessing about it at `omega`:
    /// `H(t) = (ω0/2)(cos θ σz + sin θ (cos ωt σx + sin ωt σy))`.
    RotatingField {
        omega0: f64,
        omega: f64,
        tilt: f64,
    },
    /// Piecewise-linear interpolation; held constant outside the grid.
    InterpolatedSamples {
        times: Vec<f64>,
        matrices: Vec<PairMatrix>,
    },
    SumOfTerms {
        terms: Vec<Term>,
    },
    Random {
        seed: u64,
        scale: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        drive: Option<Drive>,
    },
}

/// One validation finding, with a key path relative to the spec.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecIssue {
    pub path: String,
    pub message: String,
}

impl SpecIssue {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

fn check_hermitian_matrix(
    path: &str,
    raw: &PairMatrix,
    n: usize,
    prof: &ToleranceProfile,
    issues: &mut Vec<SpecIssue>,
) -> Option<CMat> {
    match matrix_from_pairs(raw) {
        Err(e) => {
            issues.push(SpecIssue::new(path, e.to_string()));
            None
        }
        Ok(m) if m.shape() != (n, n) => {
            issues.push(SpecIssue::new(
                path,
                format!("expected {n}x{n} matrix, found {}x{}", m.nrows(), m.ncols()),
            ));
            None
        }
        Ok(m) => {
            let residual = hermiticity_residual(&m);
            if residual > prof.hermiticity_tol {
                issues.push(SpecIssue::new(
                    path,
                    format!("matrix is not Hermitian (asymmetry {residual:e})"),
                ));
                None
            } else {
                Some((&m + m.adjoint()).scale(0.5))
            }
        }
    }
}

pub fn pauli() -> [CMat; 3] {
    let sx = CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
    let sy = CMat::from_row_slice(2, 2, &[ZERO, C64::new(0.0, -1.0), C64::new(0.0, 1.0), ZERO]);
    let sz = CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]);
    [sx, sy, sz]
}

impl HamiltonianSpec {
    /// Collects every problem with the spec for a system of dimension
    /// `partition.dim()`.
    pub fn validate(&self, partition: Partition, prof: &ToleranceProfile) -> Vec<SpecIssue> {
        let mut issues = Vec::new();
        self.realize_inner(partition, prof, &mut issues);
        issues
    }

    /// Builds the evaluator, failing on the first validation issue.
    pub fn realize(&self, partition: Partition, prof: &ToleranceProfile) -> Result<BlockHamiltonian> {
        let mut issues = Vec::new();
        let built = self.realize_inner(partition, prof, &mut issues);
        match (built, issues.first()) {
            (Some(h), None) => Ok(h),
            (_, Some(issue)) => Err(Error::InvalidInput(format!(
                "{}: {}",
                issue.path, issue.message
            ))),
            (None, None) => Err(Error::InvalidInput("invalid Hamiltonian spec".into())),
        }
    }

    fn realize_inner(
        &self,
        partition: Partition,
        prof: &ToleranceProfile,
        issues: &mut Vec<SpecIssue>,
    ) -> Option<BlockHamiltonian> {
        let n = partition.dim();
        match self {
            HamiltonianSpec::Constant { matrix } => {
                let h = check_hermitian_matrix("matrix", matrix, n, prof, issues)?;
                Some(BlockHamiltonian::new(partition, move |_| h.clone()))
            }
            HamiltonianSpec::RotatingField { omega0, omega, tilt } => {
                if n != 2 {
                    issues.push(SpecIssue::new("kind", format!("rotating_field needs N = 2, got N = {n}")));
                    return None;
                }
                for (key, v) in [("omega0", omega0), ("omega", omega), ("tilt", tilt)] {
                    if !v.is_finite() {
                        issues.push(SpecIssue::new(key, "must be finite"));
                    }
                }
                if !issues.is_empty() {
                    return None;
                }
                let (w0, w, th) = (*omega0, *omega, *tilt);
                let [sx, sy, sz] = pauli();
                Some(BlockHamiltonian::new(partition, move |t| {
                    let field = sz.scale(th.cos())
                        + (sx.scale((w * t).cos()) + sy.scale((w * t).sin())).scale(th.sin());
                    field.scale(w0 / 2.0)
                }))
            }
            HamiltonianSpec::InterpolatedSamples { times, matrices } => {
                if times.is_empty() {
                    issues.push(SpecIssue::new("times", "need at least one sample"));
                }
                if times.len() != matrices.len() {
                    issues.push(SpecIssue::new(
                        "matrices",
                        format!("{} matrices for {} times", matrices.len(), times.len()),
                    ));
                }
                if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
                    issues.push(SpecIssue::new("times", "time grid must be finite and strictly increasing"));
                }
                let mats: Vec<Option<CMat>> = matrices
                    .iter()
                    .enumerate()
                    .map(|(i, m)| check_hermitian_matrix(&format!("matrices[{i}]"), m, n, prof, issues))
                    .collect();
                if !issues.is_empty() {
                    return None;
                }
                let mats: Vec<CMat> = mats.into_iter().flatten().collect();
                let times = times.clone();
                Some(BlockHamiltonian::new(partition, move |t| interpolate(&times, &mats, t)))
            }
            HamiltonianSpec::SumOfTerms { terms } => {
                if terms.is_empty() {
                    issues.push(SpecIssue::new("terms", "need at least one term"));
                }
                let mut built = Vec::with_capacity(terms.len());
                for (i, term) in terms.iter().enumerate() {
                    if !term.envelope.is_finite() {
                        issues.push(SpecIssue::new(format!("terms[{i}].envelope"), "parameters must be finite"));
                    }
                    if let Some(m) = check_hermitian_matrix(&format!("terms[{i}].matrix"), &term.matrix, n, prof, issues) {
                        built.push((m, term.envelope.clone()));
                    }
                }
                if !issues.is_empty() {
                    return None;
                }
                Some(BlockHamiltonian::new(partition, move |t| {
                    built
                        .iter()
                        .fold(CMat::zeros(n, n), |acc, (m, env)| acc + m.scale(env.value(t)))
                }))
            }
            HamiltonianSpec::Random { seed, scale, drive } => {
                if !(scale.is_finite() && *scale >= 0.0) {
                    issues.push(SpecIssue::new("scale", "must be finite and nonnegative"));
                }
                if let Some(d) = drive {
                    if !(d.frequency.is_finite() && d.amplitude.is_finite()) {
                        issues.push(SpecIssue::new("drive", "parameters must be finite"));
                    }
                }
                if !issues.is_empty() {
                    return None;
                }
                let mut rng = SeededRng::new(*seed);
                let h0 = rng.hermitian(n, *scale);
                match drive {
                    None => Some(BlockHamiltonian::new(partition, move |_| h0.clone())),
                    Some(d) => {
                        let hc = rng.hermitian(n, *scale);
                        let hs = rng.hermitian(n, *scale);
                        let Drive { frequency, amplitude } = *d;
                        Some(BlockHamiltonian::new(partition, move |t| {
                            let (s, c) = (frequency * t).sin_cos();
                            &h0 + (hc.scale(c) + hs.scale(s)).scale(amplitude)
                        }))
                    }
                }
            }
        }
    }
}

fn interpolate(times: &[f64], mats: &[CMat], t: f64) -> CMat {
    let last = times.len() - 1;
    if t <= times[0] {
        return mats[0].clone();
    }
    if t >= times[last] {
        return mats[last].clone();
    }
    let k = times.partition_point(|&s| s <= t) - 1;
    let w = (t - times[k]) / (times[k + 1] - times[k]);
    mats[k].scale(1.0 - w) + mats[k + 1].scale(w)
}

/// Uniform grid `t0 + (t1 − t0)·k/steps`, `k = 0..=steps`.
pub fn time_grid(t0: f64, t1: f64, steps: usize) -> Result<Vec<f64>> {
    if !(t0.is_finite() && t1.is_finite()) || t1 <= t0 {
        return Err(Error::InvalidInput(format!(
            "time interval must satisfy t1 > t0, got [{t0}, {t1}]"
        )));
    }
    if steps == 0 {
        return Err(Error::InvalidInput("steps must be at least 1".into()));
    }
    let span = t1 - t0;
    Ok((0..=steps)
        .map(|k| {
            if k == steps {
                t1
            } else {
                t0 + span * (k as f64) / (steps as f64)
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryTrajectory {
    pub times: Vec<f64>,
    pub unitaries: Vec<CMat>,
}

impl UnitaryTrajectory {
    pub fn max_unitarity_residual(&self) -> f64 {
        self.unitaries
            .iter()
            .map(unitarity_residual)
            .fold(0.0, f64::max)
    }

    /// Keeps every `stride`-th sample (including the first).
    pub fn every(&self, stride: usize) -> Self {
        let stride = stride.max(1);
        Self {
            times: self.times.iter().copied().step_by(stride).collect(),
            unitaries: self.unitaries.iter().cloned().step_by(stride).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<CVec>,
}

impl StateTrajectory {
    pub fn max_norm_drift(&self) -> f64 {
        self.states
            .iter()
            .map(|s| (s.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn every(&self, stride: usize) -> Self {
        let stride = stride.max(1);
        Self {
            times: self.times.iter().copied().step_by(stride).collect(),
            states: self.states.iter().cloned().step_by(stride).collect(),
        }
    }
}

/// Full evolution `i U̇ = H U` with `U(t0) = I`.
pub fn evolve_unitary(
    h: &BlockHamiltonian,
    t0: f64,
    t1: f64,
    steps: usize,
    prof: &ToleranceProfile,
) -> Result<UnitaryTrajectory> {
    let n = h.dim();
    evolve_unitary_from(h, &CMat::identity(n, n), t0, t1, steps, prof)
}

/// Full evolution from an arbitrary initial matrix `U(t0) = initial`.
pub fn evolve_unitary_from(
    h: &BlockHamiltonian,
    initial: &CMat,
    t0: f64,
    t1: f64,
    steps: usize,
    prof: &ToleranceProfile,
) -> Result<UnitaryTrajectory> {
    evolve_unitary_observed(h, initial, t0, t1, steps, prof, |_, _| {})
}

/// [`evolve_unitary_from`] that hands each sample to `observer` as it is
/// produced.
pub fn evolve_unitary_observed<F>(
    h: &BlockHamiltonian,
    initial: &CMat,
    t0: f64,
    t1: f64,
    steps: usize,
    prof: &ToleranceProfile,
    mut observer: F,
) -> Result<UnitaryTrajectory>
where
    F: FnMut(f64, &CMat),
{
    let n = h.dim();
    if initial.shape() != (n, n) {
        return Err(dim_mismatch(
            "initial unitary",
            format!("{n}x{n}"),
            format!("{}x{}", initial.nrows(), initial.ncols()),
        ));
    }
    let times = time_grid(t0, t1, steps)?;
    let mut unitaries = Vec::with_capacity(times.len());
    let mut u = initial.clone();
    observer(times[0], &u);
    unitaries.push(u.clone());
    for w in times.windows(2) {
        let dt = w[1] - w[0];
        let hm = h.checked(w[0] + 0.5 * dt, prof)?;
        u = unitary_exp_step(&hm, dt, prof)? * u;
        observer(w[1], &u);
        unitaries.push(u.clone());
    }
    Ok(UnitaryTrajectory { times, unitaries })
}

/// Full Schrödinger evolution `i ψ̇ = H ψ` of a unit vector.
pub fn evolve_state(
    h: &BlockHamiltonian,
    psi0: &CVec,
    t0: f64,
    t1: f64,
    steps: usize,
    prof: &ToleranceProfile,
) -> Result<StateTrajectory> {
    evolve_state_observed(h, psi0, t0, t1, steps, prof, |_, _| {})
}

pub fn evolve_state_observed<F>(
    h: &BlockHamiltonian,
    psi0: &CVec,
    t0: f64,
    t1: f64,
    steps: usize,
    prof: &ToleranceProfile,
    mut observer: F,
) -> Result<StateTrajectory>
where
    F: FnMut(f64, &CVec),
{
    let n = h.dim();
    if psi0.len() != n {
        return Err(dim_mismatch("initial state", n, psi0.len()));
    }
    let norm = psi0.norm();
    if norm.is_nan() || (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized { norm });
    }
    let times = time_grid(t0, t1, steps)?;
    let mut states = Vec::with_capacity(times.len());
    let mut psi = psi0.clone();
    observer(times[0], &psi);
    states.push(psi.clone());
    for w in times.windows(2) {
        let dt = w[1] - w[0];
        let hm = h.checked(w[0] + 0.5 * dt, prof)?;
        psi = unitary_exp_step(&hm, dt, prof)? * psi;
        observer(w[1], &psi);
        states.push(psi.clone());
    }
    Ok(StateTrajectory { times, states })
}

/// Splits `ψ = (ξ, η)` into its upper `N − 1` components and the last one.
pub fn split_state(psi: &CVec, part: Partition) -> Result<(CVec, C64)> {
    if part.n2() != 1 {
        return Err(dim_mismatch("split_state", "n2 = 1", format!("n2 = {}", part.n2())));
    }
    if psi.len() != part.dim() {
        return Err(dim_mismatch("split_state", part.dim(), psi.len()));
    }
    let n1 = part.n1();
    Ok((psi.rows(0, n1).into_owned(), psi[n1]))
}

/// Closed-form propagator of [`HamiltonianSpec::RotatingField`] from `t = 0`:
/// `U(t) = exp(−i ω t σz/2) · exp(−i (H(0) − ω σz/2) t)`, evaluated with the
/// SU(2) formula `exp(−i a n·σ) = cos a − i sin a n·σ`.
pub fn rabi_propagator(omega0: f64, omega: f64, tilt: f64, t: f64) -> CMat {
    let su2 = |vec: [f64; 3], time: f64| -> CMat {
        let len = (vec[0] * vec[0] + vec[1] * vec[1] + vec[2] * vec[2]).sqrt();
        let a = len * time;
        if len == 0.0 {
            return CMat::identity(2, 2);
        }
        let [sx, sy, sz] = pauli();
        let n_sigma = (sx.scale(vec[0]) + sy.scale(vec[1]) + sz.scale(vec[2])).unscale(len);
        CMat::identity(2, 2).scale(a.cos()) - n_sigma * C64::new(0.0, a.sin())
    };
    // Rotating-frame generator (H(0) − ω σz/2) as a vector on the Pauli basis.
    let frame = [
        omega0 / 2.0 * tilt.sin(),
        0.0,
        omega0 / 2.0 * tilt.cos() - omega / 2.0,
    ];
    su2([0.0, 0.0, omega / 2.0], t) * su2(frame, t)
}
