//! Acceptance suite run by `riccati selftest` and the `acceptance` test
//! target.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::time::{Duration, Instant};

use serde::Serialize;

use riccati_core::coset::{coset_factorize, extract_z, reconstruct_u0, split_blocks, CosetPoint, Partition};
use riccati_core::dynamics::{
    evolve_state, evolve_unitary, evolve_unitary_from, pauli, rabi_propagator, split_state, BlockHamiltonian,
    Drive, HamiltonianSample, HamiltonianSpec,
};
use riccati_core::matcore::{max_abs, unitarity_residual, unitary_exp_step};
use riccati_core::phase::{
    angle_distance, geometric_phase_schrodinger, kinematic_phases, loop_symplectic_area, KinematicCurve,
};
use riccati_core::riccati::{
    integrate_matrix_riccati, integrate_reduced, vector_riccati_rhs, RayPoint, DEFAULT_GUARD,
};
use riccati_core::rng::SeededRng;
use riccati_core::symplectic::{hamiltonian_flow, jacobi_residual, pb_gamma_identities, SymplecticMatrices};
use riccati_core::{CMat, CVec, Result, ToleranceProfile, C64};

use crate::report::write_json;
use crate::run::{run_scenario, Conventions, RunOptions, Versions};
use crate::scenario::parse_scenario;

/// One measured quantity against its bound. `upper` bounds are inclusive
/// maxima; ranges use both.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    pub pass: bool,
}

impl Check {
    fn below(value: f64, max: f64) -> Self {
        Self {
            value,
            min: None,
            max: Some(max),
            pass: value < max,
        }
    }

    fn within(value: f64, min: f64, max: f64) -> Self {
        Self {
            value,
            min: Some(min),
            max: Some(max),
            pass: (min..=max).contains(&value),
        }
    }

    /// Fraction of the upper bound used; 0 for flags and ranges.
    fn usage(&self) -> f64 {
        match (self.min, self.max) {
            (None, Some(max)) => self.value / max,
            _ => 0.0,
        }
    }

    fn flag(ok: bool) -> Self {
        Self {
            value: if ok { 1.0 } else { 0.0 },
            min: Some(1.0),
            max: None,
            pass: ok,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: &'static str,
    pub checks: BTreeMap<String, Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub pass: bool,
    /// Wall-clock time; printed but never serialized.
    #[serde(skip)]
    pub runtime: Duration,
    #[serde(skip)]
    pub budget: Option<Duration>,
}

impl CriterionResult {
    /// Runtime budgets only bind in optimized builds.
    pub fn within_budget(&self) -> bool {
        cfg!(debug_assertions) || self.budget.is_none_or(|b| self.runtime <= b)
    }

    pub fn line(&self) -> String {
        let ok = self.pass && self.within_budget();
        let worst = self
            .checks
            .iter()
            .find(|(_, c)| !c.pass)
            .or_else(|| self.checks.iter().max_by(|a, b| a.1.usage().total_cmp(&b.1.usage())))
            .map(|(k, c)| format!("{k} = {:.3e}", c.value))
            .unwrap_or_default();
        let budget = match self.budget {
            Some(b) => format!(" (budget {:.0} s)", b.as_secs_f64()),
            None => String::new(),
        };
        let err = self.error.as_deref().map(|e| format!("; error: {e}")).unwrap_or_default();
        format!(
            "[{}] {:>2}. {:<38} {:>8.3} s{budget}  {worst}{err}",
            if ok { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.runtime.as_secs_f64(),
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SelftestReport {
    pub criteria: Vec<CriterionResult>,
    pub pass: bool,
    pub conventions: Conventions,
    pub versions: Versions,
}

impl SelftestReport {
    pub fn all_pass(&self) -> bool {
        self.criteria.iter().all(|c| c.pass && c.within_budget())
    }
}

type Checks = BTreeMap<String, Check>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Option<f64>,
    body: fn(&mut Checks) -> Result<()>,
}

pub const CRITERIA: usize = 11;

fn criteria() -> [Criterion; CRITERIA] {
    [
        Criterion { id: 1, name: "coset roundtrip", budget: Some(5.0), body: coset_roundtrip },
        Criterion { id: 2, name: "matrix Riccati vs full evolution", budget: Some(10.0), body: matrix_vs_full },
        Criterion { id: 3, name: "vector Riccati vs Schrodinger", budget: None, body: vector_vs_schrodinger },
        Criterion { id: 4, name: "Hamiltonian flow equivalence", budget: None, body: flow_equivalence },
        Criterion { id: 5, name: "inverse pairing, PB identities, Jacobi", budget: None, body: symplectic_identities },
        Criterion { id: 6, name: "gamma redundancy", budget: None, body: gamma_redundancy },
        Criterion { id: 7, name: "cone geometric phase", budget: Some(2.0), body: cone_phase },
        Criterion { id: 8, name: "kinematic gauge invariance", budget: None, body: gauge_invariance },
        Criterion { id: 9, name: "Stokes symplectic area", budget: None, body: stokes_area },
        Criterion { id: 10, name: "integrator quality", budget: None, body: integrator_quality },
        Criterion { id: 11, name: "end-to-end determinism", budget: None, body: determinism },
    ]
}

fn prof() -> ToleranceProfile {
    ToleranceProfile::default()
}

fn upd(checks: &mut Checks, key: impl Into<String>, check: Check) {
    checks.insert(key.into(), check);
}

/// Runs every criterion, printing one line each unless `quiet`.
pub fn run_selftest(quiet: bool) -> SelftestReport {
    let mut results = Vec::with_capacity(CRITERIA);
    for c in criteria() {
        let start = Instant::now();
        let mut checks = Checks::new();
        let error = (c.body)(&mut checks).err().map(|e| e.to_string());
        let result = CriterionResult {
            id: c.id,
            name: c.name,
            pass: error.is_none() && !checks.is_empty() && checks.values().all(|k| k.pass),
            checks,
            error,
            runtime: start.elapsed(),
            budget: c.budget.map(Duration::from_secs_f64),
        };
        if !quiet {
            println!("{}", result.line());
        }
        results.push(result);
    }
    let pass = results.iter().all(|r| r.pass);
    SelftestReport {
        criteria: results,
        pass,
        conventions: Conventions::default(),
        versions: Versions::default(),
    }
}

pub fn write_selftest_report(dir: &Path, report: &SelftestReport) -> std::io::Result<()> {
    write_json(&dir.join("selftest_report.json"), report)
}

/// `exp(−iH)` with `H` at scale 0.3, which keeps `max|Z| ≲ 2` for every
/// partition up to `N = 8`.
fn random_unitary(rng: &mut SeededRng, n: usize) -> Result<CMat> {
    unitary_exp_step(&rng.hermitian(n, 0.3), 1.0, &prof())
}

fn coset_roundtrip(checks: &mut Checks) -> Result<()> {
    let p = prof();
    let mut rng = SeededRng::new(0xC05E7);
    let (mut reassemble, mut unitarity, mut intertwining) = (0.0f64, 0.0f64, 0.0f64);
    let mut cases = 0;
    for n in [2, 3, 4, 6, 8] {
        for part in Partition::all_of(n) {
            for _ in 0..100 {
                let u = random_unitary(&mut rng, n)?;
                let bu = split_blocks(&u, part, &p)?;
                reassemble = reassemble.max(max_abs(&(coset_factorize(&bu, &p)?.reassemble() - &u)));
                let zp = extract_z(&bu, &p)?;
                unitarity = unitarity.max(unitarity_residual(&reconstruct_u0(&zp, &p)?.assemble()));
                intertwining = intertwining.max(zp.intertwining_residual());
                cases += 1;
            }
        }
    }
    upd(checks, "reassemble_error", Check::below(reassemble, 1e-11));
    upd(checks, "u0_unitarity_residual", Check::below(unitarity, 1e-11));
    upd(checks, "intertwining_residual", Check::below(intertwining, 1e-13));
    upd(checks, "cases", Check::flag(cases == 1800));
    Ok(())
}

fn matrix_vs_full(checks: &mut Checks) -> Result<()> {
    let p = prof();
    for (n1, n2, seed) in [(2, 2, 21u64), (2, 4, 22)] {
        let part = Partition::new(n1, n2)?;
        let h = BlockHamiltonian::constant(part, SeededRng::new(seed).hermitian(n1 + n2, 0.5), &p)?;
        let steps = 2000;
        let riccati = integrate_matrix_riccati(&h, &CosetPoint::origin(part), 0.0, 2.0, steps, DEFAULT_GUARD, &p)?;
        let full = evolve_unitary(&h, 0.0, 2.0, steps, &p)?;
        let mut sup = 0.0f64;
        for (zp, u) in riccati.points.iter().zip(&full.unitaries) {
            let chart = p.after_steps(steps);
            let exact = extract_z(&split_blocks(u, part, &chart)?, &chart)?;
            sup = sup.max(max_abs(&(zp.z() - exact.z())));
        }
        upd(checks, format!("sup_error_Z_{n1}x{n2}"), Check::below(sup, 1e-6));
        upd(checks, format!("no_breakdown_{n1}x{n2}"), Check::flag(riccati.breakdown.is_none()));
    }
    Ok(())
}

/// Hamiltonians of criterion 3: a constant and a driven (rotating) one per
/// dimension.
fn criterion3_cases() -> Result<Vec<(String, BlockHamiltonian, usize)>> {
    let p = prof();
    let mut out = Vec::new();
    for (n, seed) in [(3usize, 31u64), (5, 51)] {
        let part = Partition::ray(n)?;
        let constant = HamiltonianSpec::Random { seed, scale: 0.5, drive: None };
        let driven = HamiltonianSpec::Random {
            seed: seed + 1,
            scale: 0.5,
            drive: Some(Drive { frequency: 1.7, amplitude: 0.4 }),
        };
        out.push((format!("N{n}_constant"), constant.realize(part, &p)?, 1));
        out.push((format!("N{n}_rotating"), driven.realize(part, &p)?, 20));
    }
    Ok(out)
}

struct RayComparison {
    sup_z: f64,
    sup_alpha: f64,
    gamma: f64,
}

fn ray_comparison(h: &BlockHamiltonian, refine: usize) -> Result<RayComparison> {
    let p = prof();
    let (t1, steps) = (2.0, 4000);
    let n = h.dim();
    let part = h.partition();
    let mut psi0 = CVec::zeros(n);
    psi0[n - 1] = C64::from(1.0);
    let (z0, a0) = RayPoint::from_state(&psi0)?;
    let red = integrate_reduced(h, &z0, a0, 0.0, t1, steps, DEFAULT_GUARD, &p)?;
    let full = evolve_state(h, &psi0, 0.0, t1, steps * refine, &p)?.every(refine);
    let (mut sup_z, mut sup_alpha) = (0.0f64, 0.0f64);
    for k in 0..red.times.len() {
        let (xi, eta) = split_state(&full.states[k], part)?;
        if eta.norm_sqr() <= 1e-6 {
            break;
        }
        let exact = xi.map(|c| c / eta);
        sup_z = sup_z.max((red.points[k].z() - exact).norm());
        let eta_red = C64::from_polar(1.0 / red.points[k].gamma().sqrt(), red.alpha[k]);
        sup_alpha = sup_alpha.max((eta_red - eta).norm());
    }
    Ok(RayComparison {
        sup_z,
        sup_alpha,
        gamma: red.gamma_consistency_max(),
    })
}

fn vector_vs_schrodinger(checks: &mut Checks) -> Result<()> {
    for (label, h, refine) in criterion3_cases()? {
        let c = ray_comparison(&h, refine)?;
        upd(checks, format!("sup_error_z_{label}"), Check::below(c.sup_z, 1e-8));
        upd(checks, format!("alpha_error_{label}"), Check::below(c.sup_alpha, 1e-8));
    }
    Ok(())
}

fn gamma_redundancy(checks: &mut Checks) -> Result<()> {
    for (label, h, refine) in criterion3_cases()? {
        let c = ray_comparison(&h, refine)?;
        upd(checks, format!("gamma_consistency_{label}"), Check::below(c.gamma, 1e-7));
    }
    Ok(())
}

fn random_ray_point(rng: &mut SeededRng, n1: usize) -> Result<RayPoint> {
    RayPoint::new(rng.complex_vector(n1, 0.7))
}

fn flow_equivalence(checks: &mut Checks) -> Result<()> {
    let mut rng = SeededRng::new(0xF10);
    for n in [2usize, 3, 5] {
        let part = Partition::ray(n)?;
        let mut sup = 0.0f64;
        for _ in 0..500 {
            let pt = random_ray_point(&mut rng, n - 1)?;
            let hs = HamiltonianSample::from_full(&rng.hermitian(n, 1.0), part)?;
            sup = sup.max((hamiltonian_flow(&pt, &hs)? - vector_riccati_rhs(&pt, &hs)?).norm());
        }
        upd(checks, format!("flow_vs_rhs_N{n}"), Check::below(sup, 1e-10));
    }
    Ok(())
}

fn symplectic_identities(checks: &mut Checks) -> Result<()> {
    let mut rng = SeededRng::new(0x5E7);
    for n in [2usize, 3, 5] {
        let (mut inv, mut pb, mut jac) = (0.0f64, 0.0f64, 0.0f64);
        for k in 0..200 {
            let pt = random_ray_point(&mut rng, n - 1)?;
            inv = inv.max(SymplecticMatrices::at(&pt).inverse_residual());
            pb = pb.max(pb_gamma_identities(&pt)?.max());
            if k % 4 == 0 {
                jac = jac.max(jacobi_residual(&pt, 1e-2)?);
            }
        }
        upd(checks, format!("inverse_pairing_N{n}"), Check::below(inv, 1e-10));
        upd(checks, format!("pb_identities_N{n}"), Check::below(pb, 1e-10));
        upd(checks, format!("jacobi_N{n}"), Check::below(jac, 1e-8));
    }
    Ok(())
}

fn cone_phase(checks: &mut Checks) -> Result<()> {
    let p = prof();
    let omega = 1.0;
    let [_, _, sz] = pauli();
    let h = BlockHamiltonian::constant(Partition::new(1, 1)?, sz.scale(omega / 2.0), &p)?;
    let period = 2.0 * PI / omega;
    for (label, theta) in [("pi/6", PI / 6.0), ("pi/3", PI / 3.0), ("pi/2", PI / 2.0), ("2pi/3", 2.0 * PI / 3.0)] {
        let z0 = RayPoint::new(CVec::from_element(1, C64::from((theta / 2.0).tan())))?;
        let traj = integrate_reduced(&h, &z0, 0.0, 0.0, period, 4000, DEFAULT_GUARD, &p)?;
        let schrodinger = geometric_phase_schrodinger(&traj, &h, 0.0, period, &p)?.phi_geometric;
        let kinematic = kinematic_phases(&KinematicCurve::from_trajectory(&traj)?)?.phi_geometric;
        let expected = PI * (1.0 - theta.cos());
        upd(checks, format!("schrodinger_vs_closed_form_{label}"), Check::below(angle_distance(schrodinger, expected), 1e-6));
        upd(checks, format!("kinematic_vs_schrodinger_{label}"), Check::below(angle_distance(kinematic, schrodinger), 1e-6));
    }
    Ok(())
}

fn gauge_invariance(checks: &mut Checks) -> Result<()> {
    let mut rng = SeededRng::new(0x6A06E);
    let m = 400;
    let params: Vec<f64> = (0..=m).map(|k| k as f64 / m as f64).collect();
    let (mut geom, mut tot, mut dyn_) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..50 {
        let n1 = 1 + (rng.uniform() * 3.0) as usize;
        let c: Vec<CVec> = (0..3).map(|_| rng.complex_vector(n1, 0.6)).collect();
        let (w, a0, a1) = (rng.uniform_in(1.0, 5.0), rng.uniform_in(-2.0, 2.0), rng.uniform_in(-2.0, 2.0));
        let (b0, b1, b2) = (rng.uniform_in(-3.0, 3.0), rng.uniform_in(-3.0, 3.0), rng.uniform_in(1.0, 7.0));
        let points = params
            .iter()
            .map(|&s| RayPoint::new(&c[0] + &c[1] * C64::from((w * s).sin()) + &c[2] * C64::new(s * s, s)))
            .collect::<Result<Vec<_>>>()?;
        let alphas: Vec<f64> = params.iter().map(|&s| a0 * s + a1 * (2.0 * s).cos()).collect();
        let beta: Vec<f64> = params.iter().map(|&s| b0 * s * s + b1 * (b2 * s).sin()).collect();
        let gauged: Vec<f64> = alphas.iter().zip(&beta).map(|(a, b)| a + b).collect();
        let base = kinematic_phases(&KinematicCurve::new(params.clone(), points.clone(), Some(alphas))?)?;
        let moved = kinematic_phases(&KinematicCurve::new(params.clone(), points, Some(gauged))?)?;
        let shift = beta[m] - beta[0];
        geom = geom.max((moved.phi_geometric - base.phi_geometric).abs());
        tot = tot.max((moved.phi_total - base.phi_total - shift).abs());
        dyn_ = dyn_.max((moved.phi_dynamical - base.phi_dynamical - shift).abs());
    }
    upd(checks, "geometric_change", Check::below(geom, 1e-9));
    upd(checks, "total_shift_error", Check::below(tot, 1e-9));
    upd(checks, "dynamical_shift_error", Check::below(dyn_, 1e-9));
    Ok(())
}

fn stokes_area(checks: &mut Checks) -> Result<()> {
    for (label, r) in [("0.2", 0.2), ("1.0", 1.0), ("3.0", 3.0)] {
        let area = loop_symplectic_area(&KinematicCurve::circle(r, 10_000)?)?;
        let expected = -2.0 * PI * r * r / (1.0 + r * r);
        upd(checks, format!("line_integral_r{label}"), Check::below((area.area - expected).abs(), 1e-6));
        upd(
            checks,
            format!("surface_vs_line_r{label}"),
            Check::below(area.stokes_residual().unwrap_or(f64::INFINITY), 1e-5),
        );
    }
    Ok(())
}

fn integrator_quality(checks: &mut Checks) -> Result<()> {
    let p = prof();
    let (duration, steps) = (10.0, 2000);
    let part = Partition::new(2, 2)?;
    let spec = HamiltonianSpec::Random {
        seed: 101,
        scale: 1.0,
        drive: Some(Drive { frequency: 2.0, amplitude: 0.5 }),
    };
    let h = spec.realize(part, &p)?;
    let unitary = evolve_unitary(&h, 0.0, duration, steps, &p)?;
    upd(
        checks,
        "unitarity_drift_per_time",
        Check::below(unitary.max_unitarity_residual() / duration, 5e-13),
    );
    let psi0 = SeededRng::new(102).unit_vector(4);
    let states = evolve_state(&h, &psi0, 0.0, duration, steps, &p)?;
    upd(checks, "norm_drift_per_time", Check::below(states.max_norm_drift() / duration, 5e-13));

    let (omega0, omega, tilt, t1) = (1.0, 2.0, 0.7, 2.0);
    let rabi = HamiltonianSpec::RotatingField { omega0, omega, tilt }.realize(Partition::new(1, 1)?, &p)?;
    let exact_u = rabi_propagator(omega0, omega, tilt, t1);

    let psi0 = CVec::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]);
    let exact_psi = &exact_u * &psi0;
    let exact_z = exact_psi[0] / exact_psi[1];
    let (z0, a0) = RayPoint::from_state(&psi0)?;
    let rk4_error = |steps: usize| -> Result<f64> {
        let traj = integrate_reduced(&rabi, &z0, a0, 0.0, t1, steps, DEFAULT_GUARD, &p)?;
        Ok((traj.points[steps].z()[0] - exact_z).norm())
    };
    let rk4_ratio = rk4_error(40)? / rk4_error(80)?;
    upd(checks, "rk4_order_ratio", Check::within(rk4_ratio, 12.0, 20.0));

    let midpoint_error = |steps: usize| -> Result<f64> {
        let traj = evolve_unitary_from(&rabi, &CMat::identity(2, 2), 0.0, t1, steps, &p)?;
        Ok(max_abs(&(&traj.unitaries[steps] - &exact_u)))
    };
    let midpoint_ratio = midpoint_error(100)? / midpoint_error(200)?;
    upd(checks, "midpoint_order_ratio", Check::within(midpoint_ratio, 3.5, 4.5));
    Ok(())
}

/// Scenario used by the determinism criterion.
pub const DETERMINISM_SCENARIO: &str = r#"
name = "determinism"
partition = { n1 = 2, n2 = 1 }

[hamiltonian]
kind = "random"
seed = 2024
scale = 0.6
drive = { frequency = 1.1, amplitude = 0.3 }

[initial]
ray_z = [[0.1, 0.2], [-0.3, 0.05]]
alpha = 0.25

[time]
t1 = 2.0
steps = 400

[[tasks]]
kind = "evolve_reduced"

[[tasks]]
kind = "compare"
refine = 4

[[tasks]]
kind = "phases"

[[tasks]]
kind = "kinematic_phases"
curve = { source = "reduced_trajectory" }

[[tasks]]
kind = "check_invariants"
"#;

fn determinism(checks: &mut Checks) -> Result<()> {
    let sc = parse_scenario(DETERMINISM_SCENARIO).map_err(|e| riccati_core::Error::InvalidInput(e.to_string()))?;
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| riccati_core::Error::InvalidInput(e.to_string()))?;
        let out = run_scenario(
            &sc,
            &RunOptions {
                out_dir: Some(dir.path().to_path_buf()),
                steps_override: None,
                quiet: true,
            },
        );
        let read = |name: &str| std::fs::read(dir.path().join(name)).unwrap_or_default();
        outputs.push((out.exit_code, read("report.json"), read("trace_reduced.csv")));
    }
    let (a, b) = (&outputs[0], &outputs[1]);
    upd(checks, "scenario_exit_ok", Check::flag(a.0 == 0 && b.0 == 0));
    upd(checks, "report_json_identical", Check::flag(!a.1.is_empty() && a.1 == b.1));
    upd(checks, "trace_csv_identical", Check::flag(!a.2.is_empty() && a.2 == b.2));
    Ok(())
}

