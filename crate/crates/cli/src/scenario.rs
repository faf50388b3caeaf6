//! Scenario files: TOML documents describing one system, one initial
//! condition, a time grid and a list of tasks. The grammar is documented in
//! the repository README.

use serde::{Deserialize, Serialize};

use riccati_core::coset::{CosetPoint, Partition};
use riccati_core::dynamics::{
    matrix_from_pairs, vector_from_pairs, BlockHamiltonian, HamiltonianSpec, PairMatrix, PairVector,
};
use riccati_core::riccati::{RayPoint, DEFAULT_GUARD};
use riccati_core::{CVec, ToleranceProfile, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub partition: Partition,
    #[serde(default)]
    pub tolerances: ToleranceProfile,
    /// Integrations stop once `max |Z_ij|` exceeds this.
    #[serde(default = "default_guard")]
    pub guard: f64,
    pub hamiltonian: HamiltonianSpec,
    pub initial: Initial,
    pub time: TimeSpec,
    pub tasks: Vec<Task>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub thresholds: Thresholds,
}

fn default_guard() -> f64 {
    DEFAULT_GUARD
}

/// Exactly one of the three keys must be present.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Initial {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_vector: Option<PairVector>,
    #[serde(rename = "coset_Z", alias = "coset_z", default, skip_serializing_if = "Option::is_none")]
    pub coset_z: Option<PairMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ray_z: Option<PairVector>,
    /// Initial overall phase for `ray_z` / `coset_Z` starts (ray space only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    #[serde(default)]
    pub t0: f64,
    pub t1: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Task {
    EvolveFull {},
    EvolveReduced {},
    Compare {
        /// Oracle steps per reduced step.
        #[serde(default = "one")]
        refine: usize,
    },
    Phases {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        start: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        end: Option<f64>,
    },
    KinematicPhases {
        curve: CurveSource,
    },
    CheckInvariants {},
}

fn one() -> usize {
    1
}

impl Task {
    pub fn kind(&self) -> &'static str {
        match self {
            Task::EvolveFull {} => "evolve_full",
            Task::EvolveReduced {} => "evolve_reduced",
            Task::Compare { .. } => "compare",
            Task::Phases { .. } => "phases",
            Task::KinematicPhases { .. } => "kinematic_phases",
            Task::CheckInvariants {} => "check_invariants",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveSource {
    /// The ray-space image of this scenario's reduced trajectory.
    ReducedTrajectory {},
    /// `z(s) = radius · e^{is}` for `N = 2`.
    Circle { radius: f64, samples: usize },
    Points {
        params: Vec<f64>,
        points: Vec<PairVector>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alphas: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    TraceCsv,
    ReportJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_directory")]
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_directory() -> String {
    "out".into()
}

fn default_formats() -> Vec<Format> {
    vec![Format::TraceCsv, Format::ReportJson]
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            formats: default_formats(),
        }
    }
}

/// Pass/fail limits for `check_invariants` and `compare`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub unitarity_drift_per_time: f64,
    pub intertwining: f64,
    pub inverse_pairing: f64,
    pub pb_identities: f64,
    pub flow_equivalence: f64,
    pub gamma_consistency: f64,
    pub phase_additivity: f64,
    pub comparison: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            unitarity_drift_per_time: 5e-13,
            intertwining: 1e-13,
            inverse_pairing: 1e-10,
            pb_identities: 1e-10,
            flow_equivalence: 1e-10,
            gamma_consistency: 1e-7,
            phase_additivity: 1e-12,
            comparison: 1e-6,
        }
    }
}

impl Thresholds {
    fn entries(&self) -> [(&'static str, f64); 8] {
        [
            ("unitarity_drift_per_time", self.unitarity_drift_per_time),
            ("intertwining", self.intertwining),
            ("inverse_pairing", self.inverse_pairing),
            ("pb_identities", self.pb_identities),
            ("flow_equivalence", self.flow_equivalence),
            ("gamma_consistency", self.gamma_consistency),
            ("phase_additivity", self.phase_additivity),
            ("comparison", self.comparison),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationIssue {
    pub path: String,
    pub message: String,
}

impl ValidationIssue {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("malformed scenario: {0}")]
    Parse(String),
    #[error("invalid scenario ({} issue(s))", .0.len())]
    Validation(Vec<ValidationIssue>),
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let sc: Scenario = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    let issues = sc.validate();
    if issues.is_empty() {
        Ok(sc)
    } else {
        Err(ScenarioError::Validation(issues))
    }
}

pub fn to_toml(sc: &Scenario) -> String {
    toml::to_string(sc).expect("scenario serializes to TOML")
}

/// Initial data in every form the tasks need.
#[derive(Debug, Clone)]
pub struct InitialData {
    pub coset: CosetPoint,
    /// Ray-space start and phase (`n2 = 1` only).
    pub ray: Option<(RayPoint, f64)>,
    /// Unit state (`n2 = 1` only).
    pub psi: Option<CVec>,
}

impl Scenario {
    pub fn is_ray(&self) -> bool {
        self.partition.n2() == 1
    }

    pub fn wants(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }

    pub fn validate(&self) -> Vec<ValidationIssue> {
        let mut out = Vec::new();
        if self.name.trim().is_empty() {
            out.push(ValidationIssue::new("name", "must not be empty"));
        }
        if let Err(e) = self.tolerances.validate() {
            out.push(ValidationIssue::new("tolerances", e.to_string()));
        }
        if self.guard.is_nan() || self.guard <= 0.0 {
            out.push(ValidationIssue::new("guard", "must be positive"));
        }
        let prof = if self.tolerances.validate().is_ok() {
            self.tolerances
        } else {
            ToleranceProfile::default()
        };
        for issue in self.hamiltonian.validate(self.partition, &prof) {
            out.push(ValidationIssue::new(format!("hamiltonian.{}", issue.path), issue.message));
        }
        self.validate_time(&mut out);
        if let Err(issues) = self.initial_data() {
            out.extend(issues);
        }
        self.validate_tasks(&mut out);
        if self.output.formats.is_empty() {
            out.push(ValidationIssue::new("output.formats", "must name at least one format"));
        }
        for (key, v) in self.thresholds.entries() {
            if !(v.is_finite() && v > 0.0) {
                out.push(ValidationIssue::new(format!("thresholds.{key}"), "must be positive and finite"));
            }
        }
        out
    }

    fn validate_time(&self, out: &mut Vec<ValidationIssue>) {
        let t = &self.time;
        if !t.t0.is_finite() {
            out.push(ValidationIssue::new("time.t0", "must be finite"));
        }
        if !(t.t1.is_finite() && t.t1 > t.t0) {
            out.push(ValidationIssue::new("time.t1", "must be finite and greater than time.t0"));
        }
        if t.steps == 0 {
            out.push(ValidationIssue::new("time.steps", "must be at least 1"));
        }
    }

    fn validate_tasks(&self, out: &mut Vec<ValidationIssue>) {
        if self.tasks.is_empty() {
            out.push(ValidationIssue::new("tasks", "must list at least one task"));
        }
        for kind in ["compare", "check_invariants"] {
            if self.tasks.iter().filter(|t| t.kind() == kind).count() > 1 {
                out.push(ValidationIssue::new("tasks", format!("at most one {kind} task")));
            }
        }
        let n1 = self.partition.n1();
        for (i, task) in self.tasks.iter().enumerate() {
            let path = format!("tasks[{i}]");
            let needs_ray = matches!(task, Task::Phases { .. } | Task::KinematicPhases { .. });
            if needs_ray && !self.is_ray() {
                out.push(ValidationIssue::new(
                    format!("{path}.kind"),
                    format!("{} needs a ray-space partition (n2 = 1)", task.kind()),
                ));
                continue;
            }
            match task {
                Task::Compare { refine } if *refine == 0 => {
                    out.push(ValidationIssue::new(format!("{path}.refine"), "must be at least 1"));
                }
                Task::Phases { start, end } => {
                    let (a, b) = (start.unwrap_or(self.time.t0), end.unwrap_or(self.time.t1));
                    if !(a.is_finite() && b.is_finite() && self.time.t0 <= a && a <= b && b <= self.time.t1) {
                        out.push(ValidationIssue::new(path, "need time.t0 <= start <= end <= time.t1"));
                    } else {
                        for (key, t) in [("start", a), ("end", b)] {
                            if !self.on_grid(t) {
                                out.push(ValidationIssue::new(
                                    format!("{path}.{key}"),
                                    format!("{t} is not a sample time of the grid"),
                                ));
                            }
                        }
                    }
                }
                Task::KinematicPhases { curve } => validate_curve(curve, n1, &format!("{path}.curve"), out),
                _ => {}
            }
        }
    }

    fn on_grid(&self, t: f64) -> bool {
        let TimeSpec { t0, t1, steps } = self.time;
        if steps == 0 || t1 <= t0 {
            return true;
        }
        let k = (t - t0) / (t1 - t0) * steps as f64;
        (k - k.round()).abs() <= 1e-9 * steps as f64
    }

    /// Decodes and checks the initial condition.
    pub fn initial_data(&self) -> Result<InitialData, Vec<ValidationIssue>> {
        let part = self.partition;
        let ini = &self.initial;
        let given = [ini.state_vector.is_some(), ini.coset_z.is_some(), ini.ray_z.is_some()];
        let count = given.iter().filter(|&&b| b).count();
        if count != 1 {
            return Err(vec![ValidationIssue::new(
                "initial",
                "give exactly one of state_vector, coset_Z, ray_z",
            )]);
        }
        let alpha = ini.alpha.unwrap_or(0.0);
        if !alpha.is_finite() {
            return Err(vec![ValidationIssue::new("initial.alpha", "must be finite")]);
        }
        let ray_only = |key: &str| {
            ValidationIssue::new(
                format!("initial.{key}"),
                format!("needs a ray-space partition (n2 = 1), got n2 = {}", part.n2()),
            )
        };
        let err = |key: &str, msg: String| vec![ValidationIssue::new(format!("initial.{key}"), msg)];

        if let Some(raw) = &ini.state_vector {
            if !self.is_ray() {
                return Err(vec![ray_only("state_vector")]);
            }
            if ini.alpha.is_some() {
                return Err(err("alpha", "the phase of a state_vector start is fixed by the vector".into()));
            }
            let psi = vector_from_pairs(raw).map_err(|e| err("state_vector", e.to_string()))?;
            if psi.len() != part.dim() {
                return Err(err(
                    "state_vector",
                    format!("expected {} components, found {}", part.dim(), psi.len()),
                ));
            }
            let norm = psi.norm();
            if (norm - 1.0).abs() > 1e-10 {
                return Err(err("state_vector", format!("must be normalized, norm is {norm}")));
            }
            let (ray, alpha) = RayPoint::from_state(&psi).map_err(|_| {
                err("state_vector", "last component vanishes; the state is outside the chart".into())
            })?;
            let coset = ray_coset(part, &ray);
            return Ok(InitialData {
                coset,
                ray: Some((ray, alpha)),
                psi: Some(psi),
            });
        }
        if let Some(raw) = &ini.ray_z {
            if !self.is_ray() {
                return Err(vec![ray_only("ray_z")]);
            }
            let z = vector_from_pairs(raw).map_err(|e| err("ray_z", e.to_string()))?;
            if z.len() != part.n1() {
                return Err(err("ray_z", format!("expected {} components, found {}", part.n1(), z.len())));
            }
            let ray = RayPoint::new(z).map_err(|e| err("ray_z", e.to_string()))?;
            let psi = ray.state(alpha);
            return Ok(InitialData {
                coset: ray_coset(part, &ray),
                ray: Some((ray, alpha)),
                psi: Some(psi),
            });
        }
        let raw = ini.coset_z.as_ref().expect("one initial key is present");
        let z = matrix_from_pairs(raw).map_err(|e| err("coset_Z", e.to_string()))?;
        let coset = CosetPoint::new(part, z).map_err(|e| err("coset_Z", e.to_string()))?;
        if !self.is_ray() {
            if ini.alpha.is_some() {
                return Err(vec![ray_only("alpha")]);
            }
            return Ok(InitialData {
                coset,
                ray: None,
                psi: None,
            });
        }
        let ray = RayPoint::new(coset.z().column(0).into_owned()).map_err(|e| err("coset_Z", e.to_string()))?;
        let psi = ray.state(alpha);
        Ok(InitialData {
            coset,
            ray: Some((ray, alpha)),
            psi: Some(psi),
        })
    }

    pub fn hamiltonian(&self) -> riccati_core::Result<BlockHamiltonian> {
        self.hamiltonian.realize(self.partition, &self.tolerances)
    }
}

fn ray_coset(part: Partition, ray: &RayPoint) -> CosetPoint {
    let col = riccati_core::CMat::from_column_slice(ray.len(), 1, ray.z().as_slice());
    CosetPoint::new(part, col).expect("ray point is finite with matching length")
}

fn validate_curve(curve: &CurveSource, n1: usize, path: &str, out: &mut Vec<ValidationIssue>) {
    match curve {
        CurveSource::ReducedTrajectory {} => {}
        CurveSource::Circle { radius, samples } => {
            if n1 != 1 {
                out.push(ValidationIssue::new(format!("{path}.source"), "circle curves need N = 2"));
            }
            if !(radius.is_finite() && *radius >= 0.0) {
                out.push(ValidationIssue::new(format!("{path}.radius"), "must be finite and nonnegative"));
            }
            if *samples < 3 {
                out.push(ValidationIssue::new(format!("{path}.samples"), "must be at least 3"));
            }
        }
        CurveSource::Points { params, points, alphas } => {
            if params.len() < 2 {
                out.push(ValidationIssue::new(format!("{path}.params"), "need at least 2 samples"));
            }
            if params.iter().any(|s| !s.is_finite()) || params.windows(2).any(|w| w[1] <= w[0]) {
                out.push(ValidationIssue::new(format!("{path}.params"), "must be finite and strictly increasing"));
            }
            if points.len() != params.len() {
                out.push(ValidationIssue::new(
                    format!("{path}.points"),
                    format!("expected {} points, found {}", params.len(), points.len()),
                ));
            }
            for (k, p) in points.iter().enumerate() {
                match vector_from_pairs(p) {
                    Err(e) => out.push(ValidationIssue::new(format!("{path}.points[{k}]"), e.to_string())),
                    Ok(v) if v.len() != n1 => out.push(ValidationIssue::new(
                        format!("{path}.points[{k}]"),
                        format!("expected {n1} components, found {}", v.len()),
                    )),
                    Ok(_) => {}
                }
            }
            if let Some(a) = alphas {
                if a.len() != params.len() || a.iter().any(|x| !x.is_finite()) {
                    out.push(ValidationIssue::new(format!("{path}.alphas"), "need one finite value per sample"));
                }
            }
        }
    }
}

/// Decodes a validated `points` curve into ray points.
pub fn curve_points(points: &[PairVector]) -> Vec<RayPoint> {
    points
        .iter()
        .map(|p| RayPoint::new(vector_from_pairs(p).expect("validated")).expect("validated"))
        .collect()
}

pub fn complex_pairs(v: &CVec) -> Vec<[f64; 2]> {
    v.iter().map(|c: &C64| [c.re, c.im]).collect()
}
