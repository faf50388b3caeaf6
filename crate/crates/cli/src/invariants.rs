//! Invariant table for `check_invariants`.

use serde::Serialize;

use riccati_core::coset::CosetPoint;
use riccati_core::riccati::{vector_riccati_rhs, RayPoint};
use riccati_core::symplectic::{hamiltonian_flow, pb_gamma_identities, SymplecticMatrices};

use crate::run::{max_modulus, Runner, TaskResult};

/// Largest number of trajectory samples evaluated per invariant.
pub const MAX_SAMPLES: usize = 200;

#[derive(Debug, Clone, Serialize)]
pub struct InvariantRow {
    pub name: &'static str,
    pub residual: f64,
    pub threshold: f64,
    pub pass: bool,
    pub normalization: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantTable {
    pub samples: usize,
    pub rows: Vec<InvariantRow>,
    pub pass: bool,
}

fn row(name: &'static str, residual: f64, threshold: f64, normalization: &'static str) -> InvariantRow {
    InvariantRow {
        name,
        residual,
        threshold,
        pass: residual <= threshold,
        normalization,
    }
}

fn stride(len: usize) -> usize {
    len.div_ceil(MAX_SAMPLES).max(1)
}

/// A `1 × n` coset coordinate read as a ray-space vector.
fn row_as_ray(zp: &CosetPoint) -> Option<RayPoint> {
    let z = zp.z();
    (z.nrows() == 1).then(|| RayPoint::new(z.row(0).transpose()).ok()).flatten()
}

/// Static symplectic checks at one point: `(inverse pairing, PB identities)`.
fn symplectic_residuals(pt: &RayPoint) -> TaskResult<(f64, f64)> {
    let g = pt.gamma();
    let inv = SymplecticMatrices::at(pt).inverse_residual() / g;
    let pb = pb_gamma_identities(pt)?.max() / g.powi(3);
    Ok((inv, pb))
}

pub(crate) fn check_invariants(runner: &mut Runner<'_>) -> TaskResult<InvariantTable> {
    let thr = runner.sc.thresholds;
    let duration = runner.sc.time.t1 - runner.sc.time.t0;
    let ray = runner.sc.is_ray();
    let mut rows = Vec::new();

    let drift = if ray {
        runner.full_states(1)?.max_norm_drift()
    } else {
        runner.full_unitaries(1)?.max_unitarity_residual()
    };
    rows.push(row(
        if ray { "norm_drift_per_time" } else { "unitarity_drift_per_time" },
        drift / duration,
        thr.unitarity_drift_per_time,
        "per unit time",
    ));

    let matrix = runner.matrix()?.clone();
    let step = stride(matrix.points.len());
    let mut intertwining = 0.0f64;
    let mut static_checks: Option<(f64, f64)> = None;
    let mut samples = 0;
    for zp in matrix.points.iter().step_by(step) {
        samples += 1;
        let scale = zp.z().iter().map(|c| c.norm()).fold(1.0, f64::max);
        intertwining = intertwining.max(zp.intertwining_residual() / scale.powi(3));
        if !ray {
            if let Some(pt) = row_as_ray(zp) {
                let (inv, pb) = symplectic_residuals(&pt)?;
                let acc = static_checks.get_or_insert((0.0, 0.0));
                acc.0 = acc.0.max(inv);
                acc.1 = acc.1.max(pb);
            }
        }
    }
    rows.push(row("intertwining", intertwining, thr.intertwining, "relative to max(1, max|Z|)^3"));

    if ray {
        let reduced = runner.reduced()?.clone();
        let step = stride(reduced.times.len());
        let (mut flow, mut gamma) = (0.0f64, 0.0f64);
        let mut acc = (0.0f64, 0.0f64);
        for k in (0..reduced.times.len()).step_by(step) {
            let pt = &reduced.points[k];
            let (inv, pb) = symplectic_residuals(pt)?;
            acc = (acc.0.max(inv), acc.1.max(pb));
            let hs = runner.h.sample(reduced.times[k], &runner.prof)?;
            let rhs = vector_riccati_rhs(pt, &hs)?;
            let diff = hamiltonian_flow(pt, &hs)? - &rhs;
            flow = flow.max(max_modulus(&diff) / (1.0 + max_modulus(&rhs)));
            gamma = gamma.max((reduced.gamma_integrated[k] - pt.gamma()).abs() / pt.gamma());
        }
        static_checks = Some(acc);
        rows.push(row("flow_equivalence", flow, thr.flow_equivalence, "relative to 1 + max|dz/dt|"));
        rows.push(row("gamma_consistency", gamma, thr.gamma_consistency, "relative to gamma"));
    }
    if let Some((inv, pb)) = static_checks {
        rows.push(row("inverse_pairing", inv, thr.inverse_pairing, "relative to gamma"));
        rows.push(row("pb_identities", pb, thr.pb_identities, "relative to gamma^3"));
    }
    if !runner.phase_reports.is_empty() {
        let add = runner
            .phase_reports
            .iter()
            .map(|r| r.additivity_residual())
            .fold(0.0, f64::max);
        rows.push(row("phase_additivity", add, thr.phase_additivity, "absolute, radians"));
    }

    let pass = rows.iter().all(|r| r.pass);
    Ok(InvariantTable { samples, rows, pass })
}
