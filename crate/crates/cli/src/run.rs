//! Scenario execution.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use riccati_core::coset::{extract_z, reconstruct_u0, split_blocks};
use riccati_core::dynamics::{
    evolve_state, evolve_state_observed, evolve_unitary_from, evolve_unitary_observed, split_state,
    BlockHamiltonian, StateTrajectory, UnitaryTrajectory,
};
use riccati_core::matcore::max_abs;
use riccati_core::phase::{
    geometric_phase_schrodinger, kinematic_phases, loop_symplectic_area, principal, KinematicCurve, LoopArea,
    PhaseReport, CLOSURE_TOL,
};
use riccati_core::riccati::{
    integrate_matrix_riccati, integrate_matrix_riccati_observed, integrate_reduced_observed, vector_riccati_rhs,
    Breakdown, MatrixRiccatiTrajectory, ReducedTrajectory,
};
use riccati_core::symplectic::hamiltonian_flow;
use riccati_core::{CMat, CVec, Error, ToleranceProfile};

use crate::invariants::{check_invariants, InvariantTable};
use crate::report::{matrix_header, ray_header, write_json, CsvTrace, MaybeTrace};
use crate::scenario::{curve_points, CurveSource, Format, InitialData, Scenario, Task};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_BREAKDOWN: u8 = 3;
pub const EXIT_INVARIANT: u8 = 4;

/// Oracle samples with `1/γ` below this are left out of comparisons.
pub const MIN_INV_GAMMA: f64 = 1e-6;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub steps_override: Option<usize>,
    pub quiet: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Conventions {
    pub complex_encoding: &'static str,
    pub matrix_layout: &'static str,
    pub float_format: &'static str,
    pub time_grid: &'static str,
    pub chart: &'static str,
    pub symplectic_form: &'static str,
    pub poisson_matrix: &'static str,
    pub arg_branch: &'static str,
    pub alpha: &'static str,
    pub orientation: &'static str,
    pub error_norm: &'static str,
}

impl Default for Conventions {
    fn default() -> Self {
        Self {
            complex_encoding: "[re, im]",
            matrix_layout: "row-major",
            float_format: "17 significant digits, scientific",
            time_grid: "t_k = t0 + (t1 - t0) k / steps",
            chart: "Z = B D^-1; ray space z = xi / eta, psi = e^{i alpha} (z, 1) / sqrt(gamma)",
            symplectic_form: "omega0(u, v) = u^T Omega v, Omega = 4 [[L, M], [-M, L]] on (dq, dp)",
            poisson_matrix: "{f, g} = grad f^T J grad g, J = [[X, Y], [-Y, X]] / 4",
            arg_branch: "(-pi, pi]",
            alpha: "unwrapped",
            orientation: "increasing parameter is positive",
            error_norm: "max |entry|",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub riccati_core: &'static str,
    pub riccati_cli: &'static str,
    pub report_format: u32,
}

impl Default for Versions {
    fn default() -> Self {
        Self {
            riccati_core: riccati_core::VERSION,
            riccati_cli: env!("CARGO_PKG_VERSION"),
            report_format: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SchrodingerPhases {
    pub task: usize,
    pub start: f64,
    pub end: f64,
    pub phi_geometric_mod_2pi: f64,
    pub report: PhaseReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct KinematicResult {
    pub task: usize,
    pub source: &'static str,
    pub samples: usize,
    pub phi_geometric_mod_2pi: f64,
    pub report: PhaseReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loop_area: Option<LoopArea>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct PhasesSection {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub schrodinger: Vec<SchrodingerPhases>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub kinematic: Vec<KinematicResult>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    #[serde(rename = "sup_error_Z")]
    pub sup_error_matrix: f64,
    #[serde(rename = "sup_error_z")]
    pub sup_error_ray: Option<f64>,
    pub alpha_consistency_max: Option<f64>,
    pub gamma_consistency_max: Option<f64>,
    pub flow_equivalence_max: Option<f64>,
    /// Last time at which reduced and oracle samples were compared.
    pub compared_until: f64,
    pub refine: usize,
    pub breakdown: Option<Breakdown>,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub kind: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub breakdown: Option<Breakdown>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub scenario: Scenario,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phases: Option<PhasesSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ComparisonReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invariants: Option<InvariantTable>,
    pub conventions: Conventions,
    pub versions: Versions,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorReport>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: u8,
    pub report: Report,
    pub report_path: Option<PathBuf>,
    pub traces: Vec<PathBuf>,
}

/// Failure inside a task; ends the run with exit code 3.
#[derive(Debug)]
pub(crate) struct TaskFailure {
    pub(crate) message: String,
    pub(crate) breakdown: Option<Breakdown>,
}

impl From<Error> for TaskFailure {
    fn from(e: Error) -> Self {
        Self {
            message: e.to_string(),
            breakdown: None,
        }
    }
}

impl From<std::io::Error> for TaskFailure {
    fn from(e: std::io::Error) -> Self {
        Self {
            message: format!("I/O error: {e}"),
            breakdown: None,
        }
    }
}

pub(crate) type TaskResult<T> = Result<T, TaskFailure>;

/// Trajectories shared between tasks.
pub(crate) struct Runner<'a> {
    pub sc: &'a Scenario,
    pub h: BlockHamiltonian,
    pub init: InitialData,
    pub prof: ToleranceProfile,
    out_dir: PathBuf,
    quiet: bool,
    traces: Vec<PathBuf>,
    reduced: Option<ReducedTrajectory>,
    matrix: Option<MatrixRiccatiTrajectory>,
    full_states: BTreeMap<usize, StateTrajectory>,
    full_unitaries: BTreeMap<usize, UnitaryTrajectory>,
    pub phase_reports: Vec<PhaseReport>,
}

/// `max_k |v_k|`.
pub(crate) fn max_modulus(v: &CVec) -> f64 {
    v.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn ray_row(t: f64, z: &CVec, gamma: f64, alpha: f64) -> Vec<f64> {
    let mut row = Vec::with_capacity(2 * z.len() + 3);
    row.push(t);
    for c in z.iter() {
        row.push(c.re);
        row.push(c.im);
    }
    row.push(gamma);
    row.push(alpha);
    row
}

fn matrix_row(t: f64, z: &CMat) -> Vec<f64> {
    let mut row = vec![t];
    for r in 0..z.nrows() {
        for s in 0..z.ncols() {
            row.push(z[(r, s)].re);
            row.push(z[(r, s)].im);
        }
    }
    row
}

impl<'a> Runner<'a> {
    pub(crate) fn new(sc: &'a Scenario, out_dir: PathBuf, quiet: bool) -> Result<Self, String> {
        let h = sc.hamiltonian().map_err(|e| e.to_string())?;
        let init = sc
            .initial_data()
            .map_err(|v| v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))?;
        Ok(Self {
            sc,
            h,
            init,
            prof: sc.tolerances,
            out_dir,
            quiet,
            traces: Vec::new(),
            reduced: None,
            matrix: None,
            full_states: BTreeMap::new(),
            full_unitaries: BTreeMap::new(),
            phase_reports: Vec::new(),
        })
    }

    fn log(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("[{}] {}", self.sc.name, msg.as_ref());
        }
    }

    fn trace(&self, kind: &str, header: Vec<String>) -> TaskResult<MaybeTrace> {
        let wanted = self.sc.wants(Format::TraceCsv) && self.sc.tasks.iter().any(|t| t.kind() == kind);
        if !wanted {
            return Ok(MaybeTrace(None));
        }
        let path = self.out_dir.join(format!("trace_{}.csv", kind.trim_start_matches("evolve_")));
        Ok(MaybeTrace(Some(CsvTrace::create(&path, &header)?)))
    }

    fn keep_trace(&mut self, path: Option<PathBuf>) {
        if let Some(p) = path {
            if !self.traces.contains(&p) {
                self.traces.push(p);
            }
        }
    }

    fn span(&self) -> (f64, f64, usize) {
        (self.sc.time.t0, self.sc.time.t1, self.sc.time.steps)
    }

    /// Ray-space reduced trajectory, streamed to `trace_reduced.csv` when an
    /// `evolve_reduced` task asks for it.
    pub(crate) fn reduced(&mut self) -> TaskResult<&ReducedTrajectory> {
        if self.reduced.is_none() {
            let (z0, alpha0) = self.init.ray.clone().expect("ray-space scenario");
            let (t0, t1, steps) = self.span();
            let mut trace = self.trace("evolve_reduced", ray_header(z0.len()))?;
            let traj = integrate_reduced_observed(
                &self.h,
                &z0,
                alpha0,
                t0,
                t1,
                steps,
                self.sc.guard,
                &self.prof,
                |s| trace.row(&ray_row(s.t, s.point.z(), s.gamma_integrated, s.alpha)),
            )?;
            let path = trace.finish()?;
            self.keep_trace(path);
            self.log(format!("reduced trajectory: {} samples", traj.times.len()));
            self.reduced = Some(traj);
        }
        Ok(self.reduced.as_ref().expect("just computed"))
    }

    /// Matrix Riccati trajectory, streamed to `trace_reduced.csv` for
    /// `n2 > 1`.
    pub(crate) fn matrix(&mut self) -> TaskResult<&MatrixRiccatiTrajectory> {
        if self.matrix.is_none() {
            let (t0, t1, steps) = self.span();
            let part = self.sc.partition;
            let traj = if self.sc.is_ray() {
                integrate_matrix_riccati(&self.h, &self.init.coset, t0, t1, steps, self.sc.guard, &self.prof)?
            } else {
                let mut trace = self.trace("evolve_reduced", matrix_header(part.n1(), part.n2()))?;
                let traj = integrate_matrix_riccati_observed(
                    &self.h,
                    &self.init.coset,
                    t0,
                    t1,
                    steps,
                    self.sc.guard,
                    &self.prof,
                    |t, zp| trace.row(&matrix_row(t, zp.z())),
                )?;
                let path = trace.finish()?;
                self.keep_trace(path);
                traj
            };
            self.log(format!("matrix Riccati trajectory: {} samples", traj.times.len()));
            self.matrix = Some(traj);
        }
        Ok(self.matrix.as_ref().expect("just computed"))
    }

    /// Full state evolution with `refine` oracle steps per grid step, kept on
    /// the scenario grid.
    pub(crate) fn full_states(&mut self, refine: usize) -> TaskResult<&StateTrajectory> {
        if !self.full_states.contains_key(&refine) {
            let psi0 = self.init.psi.clone().expect("ray-space scenario");
            let (t0, t1, steps) = self.span();
            let traj = if refine == 1 {
                let part = self.sc.partition;
                let mut trace = self.trace("evolve_full", ray_header(part.n1()))?;
                let mut prev_alpha: Option<f64> = None;
                let traj = evolve_state_observed(&self.h, &psi0, t0, t1, steps, &self.prof, |t, psi| {
                    let (xi, eta) = split_state(psi, part).expect("dimensions checked");
                    let raw = eta.arg();
                    let alpha = match prev_alpha {
                        Some(p) => p + principal(raw - p),
                        None => raw,
                    };
                    prev_alpha = Some(alpha);
                    let z = xi.map(|c| c / eta);
                    trace.row(&ray_row(t, &z, 1.0 / eta.norm_sqr(), alpha));
                })?;
                let path = trace.finish()?;
                self.keep_trace(path);
                traj
            } else {
                evolve_state(&self.h, &psi0, t0, t1, steps * refine, &self.prof)?.every(refine)
            };
            self.log(format!("full state evolution (refine {refine}): {} samples", traj.times.len()));
            self.full_states.insert(refine, traj);
        }
        Ok(&self.full_states[&refine])
    }

    /// Full unitary evolution from the coset representative of the initial
    /// `Z`.
    pub(crate) fn full_unitaries(&mut self, refine: usize) -> TaskResult<&UnitaryTrajectory> {
        if !self.full_unitaries.contains_key(&refine) {
            let u0 = reconstruct_u0(&self.init.coset, &self.prof)?.assemble();
            let (t0, t1, steps) = self.span();
            let traj = if refine == 1 {
                let part = self.sc.partition;
                let prof = self.prof;
                let chart_prof = prof.after_steps(steps);
                let mut trace = self.trace("evolve_full", matrix_header(part.n1(), part.n2()))?;
                let traj = evolve_unitary_observed(&self.h, &u0, t0, t1, steps, &prof, |t, u| {
                    let z = split_blocks(u, part, &chart_prof)
                        .and_then(|bu| extract_z(&bu, &chart_prof))
                        .map(|zp| zp.into_z())
                        .unwrap_or_else(|_| CMat::from_element(part.n1(), part.n2(), f64::NAN.into()));
                    trace.row(&matrix_row(t, &z));
                })?;
                let path = trace.finish()?;
                self.keep_trace(path);
                traj
            } else {
                evolve_unitary_from(&self.h, &u0, t0, t1, steps * refine, &self.prof)?.every(refine)
            };
            self.log(format!("full unitary evolution (refine {refine}): {} samples", traj.times.len()));
            self.full_unitaries.insert(refine, traj);
        }
        Ok(&self.full_unitaries[&refine])
    }

    fn breakdown_failure(b: Breakdown, what: &str) -> TaskFailure {
        TaskFailure {
            message: format!(
                "{what} left the chart after t = {} (max |Z| = {:e})",
                b.last_valid_time, b.max_abs
            ),
            breakdown: Some(b),
        }
    }

    fn evolve_full(&mut self) -> TaskResult<()> {
        if self.sc.is_ray() {
            self.full_states(1)?;
        } else {
            self.full_unitaries(1)?;
        }
        Ok(())
    }

    fn evolve_reduced(&mut self) -> TaskResult<()> {
        let breakdown = if self.sc.is_ray() {
            self.reduced()?.breakdown
        } else {
            self.matrix()?.breakdown
        };
        match breakdown {
            Some(b) => Err(Self::breakdown_failure(b, "reduced trajectory")),
            None => Ok(()),
        }
    }

    fn compare(&mut self, refine: usize) -> TaskResult<ComparisonReport> {
        let thr = self.sc.thresholds;
        if !self.sc.is_ray() {
            let part = self.sc.partition;
            let prof = self.prof.after_steps(self.sc.time.steps * refine);
            let matrix = self.matrix()?.clone();
            let oracle = self.full_unitaries(refine)?;
            let mut sup = 0.0f64;
            let mut until = matrix.times[0];
            for (k, zp) in matrix.points.iter().enumerate() {
                let Ok(exact) = split_blocks(&oracle.unitaries[k], part, &prof).and_then(|bu| extract_z(&bu, &prof))
                else {
                    break;
                };
                sup = sup.max(max_abs(&(zp.z() - exact.z())));
                until = matrix.times[k];
            }
            return Ok(ComparisonReport {
                sup_error_matrix: sup,
                sup_error_ray: None,
                alpha_consistency_max: None,
                gamma_consistency_max: None,
                flow_equivalence_max: None,
                compared_until: until,
                refine,
                breakdown: matrix.breakdown,
                threshold: thr.comparison,
                pass: sup <= thr.comparison,
            });
        }

        let part = self.sc.partition;
        let matrix = self.matrix()?.clone();
        let reduced = self.reduced()?.clone();
        let oracle = self.full_states(refine)?.clone();
        let (mut sup_z, mut sup_zz, mut sup_alpha, mut sup_gamma) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        let mut until = reduced.times[0];
        for k in 0..reduced.times.len() {
            let (xi, eta) = split_state(&oracle.states[k], part)?;
            if eta.norm_sqr() <= MIN_INV_GAMMA {
                break;
            }
            let exact = xi.map(|c| c / eta);
            let pt = &reduced.points[k];
            sup_z = sup_z.max(max_modulus(&(pt.z() - &exact)));
            if let Some(zp) = matrix.points.get(k) {
                sup_zz = sup_zz.max(max_modulus(&(zp.z().column(0) - &exact)));
            }
            let eta_red = riccati_core::C64::from_polar(1.0 / pt.gamma().sqrt(), reduced.alpha[k]);
            sup_alpha = sup_alpha.max((eta_red - eta).norm());
            sup_gamma = sup_gamma.max((reduced.gamma_integrated[k] - pt.gamma()).abs());
            until = reduced.times[k];
        }
        let stride = (reduced.times.len() / 200).max(1);
        let mut flow = 0.0f64;
        for k in (0..reduced.times.len()).step_by(stride) {
            let hs = self.h.sample(reduced.times[k], &self.prof)?;
            let pt = &reduced.points[k];
            let diff = hamiltonian_flow(pt, &hs)? - vector_riccati_rhs(pt, &hs)?;
            flow = flow.max(max_modulus(&diff));
        }
        let pass = sup_z <= thr.comparison
            && sup_zz <= thr.comparison
            && sup_alpha <= thr.comparison
            && sup_gamma <= thr.gamma_consistency
            && flow <= thr.flow_equivalence;
        Ok(ComparisonReport {
            sup_error_matrix: sup_zz,
            sup_error_ray: Some(sup_z),
            alpha_consistency_max: Some(sup_alpha),
            gamma_consistency_max: Some(sup_gamma),
            flow_equivalence_max: Some(flow),
            compared_until: until,
            refine,
            breakdown: reduced.breakdown.or(matrix.breakdown),
            threshold: thr.comparison,
            pass,
        })
    }

    fn phases(&mut self, task: usize, start: Option<f64>, end: Option<f64>) -> TaskResult<SchrodingerPhases> {
        let (a, b) = (start.unwrap_or(self.sc.time.t0), end.unwrap_or(self.sc.time.t1));
        let traj = self.reduced()?.clone();
        if let Some(bd) = traj.breakdown {
            if bd.last_valid_time < b {
                return Err(Self::breakdown_failure(bd, "reduced trajectory"));
            }
        }
        let t_a = traj.times[traj.index_of(a)?];
        let t_b = traj.times[traj.index_of(b)?];
        let report = geometric_phase_schrodinger(&traj, &self.h, t_a, t_b, &self.prof)?;
        self.phase_reports.push(report.clone());
        Ok(SchrodingerPhases {
            task,
            start: t_a,
            end: t_b,
            phi_geometric_mod_2pi: report.geometric_principal(),
            report,
        })
    }

    fn kinematic(&mut self, task: usize, source: &CurveSource) -> TaskResult<KinematicResult> {
        let (name, curve) = match source {
            CurveSource::ReducedTrajectory {} => {
                let traj = self.reduced()?;
                if let Some(bd) = traj.breakdown {
                    return Err(Self::breakdown_failure(bd, "reduced trajectory"));
                }
                ("reduced_trajectory", KinematicCurve::from_trajectory(traj)?)
            }
            CurveSource::Circle { radius, samples } => ("circle", KinematicCurve::circle(*radius, *samples)?),
            CurveSource::Points { params, points, alphas } => (
                "points",
                KinematicCurve::new(params.clone(), curve_points(points), alphas.clone())?,
            ),
        };
        let report = kinematic_phases(&curve)?;
        let loop_area = if curve.endpoint_gap() < CLOSURE_TOL {
            Some(loop_symplectic_area(&curve)?)
        } else {
            None
        };
        self.phase_reports.push(report.clone());
        Ok(KinematicResult {
            task,
            source: name,
            samples: curve.len(),
            phi_geometric_mod_2pi: report.geometric_principal(),
            report,
            loop_area,
        })
    }
}

/// Applies command-line overrides to a parsed scenario.
pub fn apply_overrides(sc: &mut Scenario, opts: &RunOptions) {
    if let Some(steps) = opts.steps_override {
        sc.time.steps = steps;
    }
}

/// Runs every task in order. A failing task stops the run; the report is
/// still written.
pub fn run_scenario(sc: &Scenario, opts: &RunOptions) -> RunOutcome {
    let out_dir = opts
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(&sc.output.directory));
    let mut report = Report {
        scenario: sc.clone(),
        phases: None,
        comparison: None,
        invariants: None,
        conventions: Conventions::default(),
        versions: Versions::default(),
        error: None,
    };
    let mut runner = match Runner::new(sc, out_dir.clone(), opts.quiet) {
        Ok(r) => r,
        Err(message) => {
            report.error = Some(ErrorReport {
                kind: "validation",
                message,
                task: None,
                breakdown: None,
            });
            return finish(report, &out_dir, sc, EXIT_VALIDATION, Vec::new());
        }
    };

    let mut exit = EXIT_OK;
    let mut phases = PhasesSection::default();
    for (i, task) in sc.tasks.iter().enumerate() {
        runner.log(format!("task {i}: {}", task.kind()));
        let outcome: TaskResult<()> = match task {
            Task::EvolveFull {} => runner.evolve_full(),
            Task::EvolveReduced {} => runner.evolve_reduced(),
            Task::Compare { refine } => runner.compare(*refine).map(|c| {
                if !c.pass {
                    exit = exit.max(EXIT_INVARIANT);
                }
                report.comparison = Some(c);
            }),
            Task::Phases { start, end } => runner.phases(i, *start, *end).map(|p| phases.schrodinger.push(p)),
            Task::KinematicPhases { curve } => runner.kinematic(i, curve).map(|k| phases.kinematic.push(k)),
            Task::CheckInvariants {} => check_invariants(&mut runner).map(|table| {
                if !table.pass {
                    exit = exit.max(EXIT_INVARIANT);
                }
                report.invariants = Some(table);
            }),
        };
        if let Err(f) = outcome {
            runner.log(format!("task {i} failed: {}", f.message));
            report.error = Some(ErrorReport {
                kind: if f.breakdown.is_some() { "breakdown" } else { "runtime" },
                message: f.message,
                task: Some(i),
                breakdown: f.breakdown,
            });
            exit = EXIT_BREAKDOWN;
            break;
        }
    }
    if !(phases.schrodinger.is_empty() && phases.kinematic.is_empty()) {
        report.phases = Some(phases);
    }
    let traces = std::mem::take(&mut runner.traces);
    finish(report, &out_dir, sc, exit, traces)
}

fn finish(mut report: Report, out_dir: &Path, sc: &Scenario, mut exit: u8, traces: Vec<PathBuf>) -> RunOutcome {
    let mut report_path = None;
    if sc.wants(Format::ReportJson) {
        let path = out_dir.join("report.json");
        match write_json(&path, &report) {
            Ok(()) => report_path = Some(path),
            Err(e) => {
                exit = EXIT_BREAKDOWN;
                report.error.get_or_insert(ErrorReport {
                    kind: "io",
                    message: format!("writing {}: {e}", path.display()),
                    task: None,
                    breakdown: None,
                });
            }
        }
    }
    RunOutcome {
        exit_code: exit,
        report,
        report_path,
        traces,
    }
}
