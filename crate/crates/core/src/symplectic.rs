//! Classical phase-space structure on ray space.
//!
//! Real coordinates are ordered `x = (q_1, …, q_n, p_1, …, p_n)` with
//! `z_r = q_r + i p_r`. The pairing `ω0(u, v) = uᵀ Ω v` uses `Ω = 4 K`,
//! `K = [[L, M], [−M, L]]`, so that `∮ θ0 = ω0(u, v)` around a small
//! parallelogram spanned by `u`, `v`. Brackets are `{f, g} = ∇fᵀ J ∇g` with
//! `J = K⁻¹/4 = [[X, Y], [−Y, X]]/4`.

use nalgebra::DMatrix;

use crate::dynamics::HamiltonianSample;
use crate::error::{dim_mismatch, Error, Result};
use crate::matcore::{CVec, C64, I, ONE, ZERO};
use crate::riccati::RayPoint;

pub type RMat = DMatrix<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticMatrices {
    pub l: RMat,
    pub m: RMat,
    pub x: RMat,
    pub y: RMat,
}

fn blocks(a: &RMat, b: &RMat) -> RMat {
    let n = a.nrows();
    let mut out = RMat::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(a);
    out.view_mut((0, n), (n, n)).copy_from(b);
    out.view_mut((n, 0), (n, n)).copy_from(&(-b));
    out.view_mut((n, n), (n, n)).copy_from(a);
    out
}

impl SymplecticMatrices {
    pub fn at(pt: &RayPoint) -> Self {
        let (q, p) = (pt.q(), pt.p());
        let n = q.len();
        let g = pt.gamma();
        let g2 = g * g;
        let delta = |r: usize, s: usize| if r == s { 1.0 } else { 0.0 };
        let cross = |r: usize, s: usize| q[r] * p[s] - q[s] * p[r];
        let dot = |r: usize, s: usize| q[r] * q[s] + p[r] * p[s];
        Self {
            l: RMat::from_fn(n, n, |r, s| cross(r, s) / (2.0 * g2)),
            m: RMat::from_fn(n, n, |r, s| delta(r, s) / (2.0 * g) - dot(r, s) / (2.0 * g2)),
            x: RMat::from_fn(n, n, |r, s| 2.0 * g * cross(r, s)),
            y: RMat::from_fn(n, n, |r, s| -2.0 * g * (delta(r, s) + dot(r, s))),
        }
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// `[[L, M], [−M, L]]`.
    pub fn form_blocks(&self) -> RMat {
        blocks(&self.l, &self.m)
    }

    /// `[[X, Y], [−Y, X]]`.
    pub fn inverse_blocks(&self) -> RMat {
        blocks(&self.x, &self.y)
    }

    /// Pairing matrix of `ω0` on `(dq, dp)`.
    pub fn omega(&self) -> RMat {
        self.form_blocks() * 4.0
    }

    /// Bracket matrix `J`.
    pub fn poisson_matrix(&self) -> RMat {
        self.inverse_blocks() * 0.25
    }

    /// `max |[[L,M],[−M,L]]·[[X,Y],[−Y,X]] − I|`.
    pub fn inverse_residual(&self) -> f64 {
        let prod = self.form_blocks() * self.inverse_blocks();
        (prod - RMat::identity(2 * self.dim(), 2 * self.dim())).amax()
    }

    /// Largest violation of `L, X` antisymmetric and `M, Y` symmetric.
    pub fn symmetry_residual(&self) -> f64 {
        [
            (&self.l + self.l.transpose()).amax(),
            (&self.x + self.x.transpose()).amax(),
            (&self.m - self.m.transpose()).amax(),
            (&self.y - self.y.transpose()).amax(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// `ω0(u, v)` for real tangent vectors in `(q, p)` order.
    pub fn pairing(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        let n2 = 2 * self.dim();
        if u.len() != n2 || v.len() != n2 {
            return Err(dim_mismatch("tangent vector", n2, u.len().max(v.len())));
        }
        let om = self.omega();
        Ok((0..n2)
            .flat_map(|a| (0..n2).map(move |b| (a, b)))
            .map(|(a, b)| u[a] * om[(a, b)] * v[b])
            .sum())
    }
}

/// `θ0(dz) = Im(z†dz)/γ`.
pub fn theta0(pt: &RayPoint, dz: &CVec) -> Result<f64> {
    if dz.len() != pt.len() {
        return Err(dim_mismatch("theta0 tangent", pt.len(), dz.len()));
    }
    Ok(pt.z().dotc(dz).im / pt.gamma())
}

/// `θ0 = Σ (q_r dp_r − p_r dq_r)/γ`.
pub fn theta0_real(pt: &RayPoint, dq: &[f64], dp: &[f64]) -> Result<f64> {
    if dq.len() != pt.len() || dp.len() != pt.len() {
        return Err(dim_mismatch("theta0 tangent", pt.len(), dq.len().max(dp.len())));
    }
    let (q, p) = (pt.q(), pt.p());
    let s: f64 = (0..pt.len()).map(|r| q[r] * dp[r] - p[r] * dq[r]).sum();
    Ok(s / pt.gamma())
}

/// `{f, g} = ∇fᵀ J ∇g` for real gradients in `(q, p)` order.
pub fn poisson_bracket(pt: &RayPoint, grad_f: &[f64], grad_g: &[f64]) -> Result<f64> {
    let n2 = 2 * pt.len();
    if grad_f.len() != n2 || grad_g.len() != n2 {
        return Err(dim_mismatch("gradient", n2, grad_f.len().max(grad_g.len())));
    }
    let j = SymplecticMatrices::at(pt).poisson_matrix();
    let mut s = 0.0;
    for a in 0..n2 {
        for b in 0..n2 {
            s += grad_f[a] * j[(a, b)] * grad_g[b];
        }
    }
    Ok(s)
}

/// Bracket of complex-valued functions, assembled from the real bracket by
/// bilinearity.
pub fn poisson_bracket_complex(pt: &RayPoint, grad_f: &[C64], grad_g: &[C64]) -> Result<C64> {
    let re = |g: &[C64]| g.iter().map(|c| c.re).collect::<Vec<_>>();
    let im = |g: &[C64]| g.iter().map(|c| c.im).collect::<Vec<_>>();
    let (fr, fi, gr, gi) = (re(grad_f), im(grad_f), re(grad_g), im(grad_g));
    let rr = poisson_bracket(pt, &fr, &gr)?;
    let ii = poisson_bracket(pt, &fi, &gi)?;
    let ri = poisson_bracket(pt, &fr, &gi)?;
    let ir = poisson_bracket(pt, &fi, &gr)?;
    Ok(C64::new(rr - ii, ri + ir))
}

/// Gradient of `z_r`.
pub fn grad_z(n: usize, r: usize) -> Vec<C64> {
    let mut g = vec![ZERO; 2 * n];
    g[r] = ONE;
    g[n + r] = I;
    g
}

/// Gradient of `z̄_r`.
pub fn grad_zbar(n: usize, r: usize) -> Vec<C64> {
    grad_z(n, r).into_iter().map(|c| c.conj()).collect()
}

/// Gradient of `γ = 1 + Σ (q² + p²)`.
pub fn grad_gamma(pt: &RayPoint) -> Vec<f64> {
    pt.q().iter().chain(pt.p().iter()).map(|x| 2.0 * x).collect()
}

fn check_ray_sample(pt: &RayPoint, h: &HamiltonianSample) -> Result<()> {
    let part = h.partition();
    if part.n2() != 1 {
        return Err(dim_mismatch("classical Hamiltonian", "n2 = 1", format!("n2 = {}", part.n2())));
    }
    if part.n1() != pt.len() {
        return Err(dim_mismatch("ray point", part.n1(), pt.len()));
    }
    Ok(())
}

/// `H(z) = −(H2 + z†V + V†z + z†H1z)/γ = −ψ0† H ψ0`.
pub fn classical_hamiltonian(pt: &RayPoint, h: &HamiltonianSample) -> Result<f64> {
    check_ray_sample(pt, h)?;
    let z = pt.z();
    let v = h.v.column(0);
    let h2 = h.h2[(0, 0)];
    let numer = h2 + z.dotc(&v) + v.dotc(z) + z.dotc(&(&h.h1 * z));
    let scale = 1.0 + h2.norm() + 2.0 * v.norm() * z.norm() + h.h1.norm() * z.norm_squared();
    if numer.im.abs() > 1e-12 * scale {
        return Err(Error::NonRealResult { residue: numer.im });
    }
    Ok(-numer.re / pt.gamma())
}

/// Closed-form gradient of [`classical_hamiltonian`] in `(q, p)` order.
pub fn classical_hamiltonian_gradient(pt: &RayPoint, h: &HamiltonianSample) -> Result<Vec<f64>> {
    check_ray_sample(pt, h)?;
    let n = pt.len();
    let z = pt.z();
    let v = h.v.column(0);
    let w = &h.h1 * z;
    let g = pt.gamma();
    let f = h.h2[(0, 0)].re + 2.0 * z.dotc(&v).re + z.dotc(&w).re;
    let dgamma = grad_gamma(pt);
    let df = (0..n)
        .map(|r| 2.0 * (v[r].re + w[r].re))
        .chain((0..n).map(|r| 2.0 * (v[r].im + w[r].im)));
    Ok(df
        .zip(dgamma)
        .map(|(dfa, dga)| -dfa / g + f * dga / (g * g))
        .collect())
}

/// `ż_r = {z_r, H}`; coincides with the ray-space Riccati right-hand side.
pub fn hamiltonian_flow(pt: &RayPoint, h: &HamiltonianSample) -> Result<CVec> {
    let n = pt.len();
    let grad_h: Vec<C64> = classical_hamiltonian_gradient(pt, h)?
        .into_iter()
        .map(C64::from)
        .collect();
    let mut out = CVec::zeros(n);
    for r in 0..n {
        out[r] = poisson_bracket_complex(pt, &grad_z(n, r), &grad_h)?;
    }
    Ok(out)
}

/// Analytic monomial `Π z_r^{k_r}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Monomial(pub Vec<u32>);

impl Monomial {
    pub fn value(&self, z: &CVec) -> C64 {
        self.0.iter().zip(z.iter()).map(|(&k, c)| c.powu(k)).product()
    }

    pub fn dz(&self, z: &CVec, r: usize) -> C64 {
        let k = self.0[r];
        if k == 0 {
            return ZERO;
        }
        let mut d = C64::from(k as f64) * z[r].powu(k - 1);
        for (s, (&ks, c)) in self.0.iter().zip(z.iter()).enumerate() {
            if s != r {
                d *= c.powu(ks);
            }
        }
        d
    }

    /// Real-coordinate gradient, using `∂_q = ∂_z`, `∂_p = i ∂_z`.
    pub fn gradient(&self, z: &CVec) -> Vec<C64> {
        let n = z.len();
        let dz: Vec<C64> = (0..n).map(|r| self.dz(z, r)).collect();
        dz.iter().copied().chain(dz.iter().map(|d| I * d)).collect()
    }

    /// Small family used by [`pb_gamma_identities`].
    pub fn family(n: usize) -> Vec<Self> {
        let unit = |r: usize, k: u32| {
            let mut e = vec![0; n];
            e[r] = k;
            Monomial(e)
        };
        let mut fam = vec![Monomial(vec![0; n]), unit(0, 1), unit(0, 2), unit(n - 1, 3)];
        if n > 1 {
            let mut e = vec![0; n];
            e[0] = 1;
            e[1] = 1;
            fam.push(Monomial(e));
        }
        fam
    }
}

/// Max residuals of the bracket identities involving `γ`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PbIdentityReport {
    /// `{z_r, z̄_s} = iγ(δ_rs + z_r z̄_s)`.
    pub z_zbar: f64,
    /// `{z_r, γ} = iγ² z_r`.
    pub z_gamma: f64,
    /// `{z_r, 1/γ} = −i z_r`.
    pub z_inv_gamma: f64,
    /// `{z_r, z̄_s/γ} = i δ_rs`.
    pub z_zbar_over_gamma: f64,
    /// `{z_r, f/γ} = −i z_r f` for analytic `f`.
    pub z_f_over_gamma: f64,
}

impl PbIdentityReport {
    pub fn max(&self) -> f64 {
        [
            self.z_zbar,
            self.z_gamma,
            self.z_inv_gamma,
            self.z_zbar_over_gamma,
            self.z_f_over_gamma,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn pb_gamma_identities(pt: &RayPoint) -> Result<PbIdentityReport> {
    let n = pt.len();
    let z = pt.z();
    let g = pt.gamma();
    let dg: Vec<C64> = grad_gamma(pt).into_iter().map(C64::from).collect();
    let inv_g: Vec<C64> = dg.iter().map(|d| -d / (g * g)).collect();
    let mut rep = PbIdentityReport::default();
    let upd = |slot: &mut f64, got: C64, want: C64| *slot = slot.max((got - want).norm());

    for r in 0..n {
        let gz = grad_z(n, r);
        upd(&mut rep.z_gamma, poisson_bracket_complex(pt, &gz, &dg)?, I * g * g * z[r]);
        upd(&mut rep.z_inv_gamma, poisson_bracket_complex(pt, &gz, &inv_g)?, -I * z[r]);
        for s in 0..n {
            let delta = if r == s { ONE } else { ZERO };
            let gzb = grad_zbar(n, s);
            upd(
                &mut rep.z_zbar,
                poisson_bracket_complex(pt, &gz, &gzb)?,
                I * g * (delta + z[r] * z[s].conj()),
            );
            let quot: Vec<C64> = gzb
                .iter()
                .zip(&dg)
                .map(|(a, b)| a / g - z[s].conj() * b / (g * g))
                .collect();
            upd(&mut rep.z_zbar_over_gamma, poisson_bracket_complex(pt, &gz, &quot)?, I * delta);
        }
        for mono in Monomial::family(n) {
            let f = mono.value(z);
            let quot: Vec<C64> = mono
                .gradient(z)
                .iter()
                .zip(&dg)
                .map(|(a, b)| a / g - f * b / (g * g))
                .collect();
            upd(&mut rep.z_f_over_gamma, poisson_bracket_complex(pt, &gz, &quot)?, -I * z[r] * f);
        }
    }
    Ok(rep)
}

/// Max over coordinate triples of the Jacobi sum
/// `Σ_d (J_ad ∂_d J_bc + J_bd ∂_d J_ca + J_cd ∂_d J_ab)`, with `∂_d J` from
/// the five-point central stencil of step `h`. The entries of `J` are
/// quartic in `(q, p)`, so the stencil is exact up to rounding.
pub fn jacobi_residual(pt: &RayPoint, h: f64) -> Result<f64> {
    let n = pt.len();
    let n2 = 2 * n;
    let (q, p) = (pt.q(), pt.p());
    let x0: Vec<f64> = q.iter().chain(p.iter()).copied().collect();
    let j_at = |x: &[f64]| -> Result<RMat> {
        let pt = RayPoint::from_qp(&x[..n], &x[n..])?;
        Ok(SymplecticMatrices::at(&pt).poisson_matrix())
    };
    let j0 = j_at(&x0)?;
    let mut dj = Vec::with_capacity(n2);
    for d in 0..n2 {
        let shifted = |k: f64| -> Result<RMat> {
            let mut x = x0.clone();
            x[d] += k * h;
            j_at(&x)
        };
        let num = (shifted(-2.0)? - shifted(2.0)?) + (shifted(1.0)? - shifted(-1.0)?) * 8.0;
        dj.push(num / (12.0 * h));
    }
    let mut worst = 0.0f64;
    for a in 0..n2 {
        for b in 0..n2 {
            for c in 0..n2 {
                let s: f64 = (0..n2)
                    .map(|d| {
                        j0[(a, d)] * dj[d][(b, c)] + j0[(b, d)] * dj[d][(c, a)] + j0[(c, d)] * dj[d][(a, b)]
                    })
                    .sum();
                worst = worst.max(s.abs());
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coset::Partition;
    use crate::dynamics::pauli;
    use crate::matcore::CMat;
    use crate::riccati::vector_riccati_rhs;
    use crate::rng::SeededRng;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn pt(vals: &[(f64, f64)]) -> RayPoint {
        RayPoint::new(CVec::from_iterator(vals.len(), vals.iter().map(|&(a, b)| C64::new(a, b)))).unwrap()
    }

    fn random_point(rng: &mut SeededRng, n: usize, scale: f64) -> RayPoint {
        RayPoint::new(rng.complex_vector(n, scale)).unwrap()
    }

    #[test]
    fn theta0_examples() {
        let real = pt(&[(0.4, 0.0), (-1.0, 0.0)]);
        let dz = CVec::from_vec(vec![C64::from(0.3), C64::from(2.0)]);
        assert_eq!(theta0(&real, &dz).unwrap(), 0.0);

        let i = pt(&[(0.0, 1.0)]);
        assert!((theta0(&i, &CVec::from_vec(vec![ONE])).unwrap() + 0.5).abs() < 1e-16);

        let mut rng = SeededRng::new(11);
        let p = random_point(&mut rng, 3, 1.0);
        let dz = p.z() * I;
        let want = p.z().norm_squared() / p.gamma();
        assert!((theta0(&p, &dz).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn matrices_at_examples() {
        let s = SymplecticMatrices::at(&RayPoint::origin(3));
        assert_eq!(s.l, RMat::zeros(3, 3));
        assert_eq!(s.m, RMat::identity(3, 3) * 0.5);
        assert_eq!(s.x, RMat::zeros(3, 3));
        assert_eq!(s.y, RMat::identity(3, 3) * -2.0);

        let s = SymplecticMatrices::at(&pt(&[(1.0, 0.0)]));
        assert_eq!(s.l[(0, 0)], 0.0);
        assert!((s.m[(0, 0)] - 0.125).abs() < 1e-16);
        assert_eq!(s.x[(0, 0)], 0.0);
        assert_eq!(s.y[(0, 0)], -8.0);
        assert!(s.inverse_residual() < 1e-15);
    }

    #[test]
    fn bracket_examples() {
        let o = RayPoint::origin(2);
        let e = |k: usize| {
            let mut v = vec![0.0; 4];
            v[k] = 1.0;
            v
        };
        assert_eq!(poisson_bracket(&o, &e(0), &e(0)).unwrap(), 0.0);
        assert_eq!(poisson_bracket(&o, &e(0), &e(2)).unwrap(), -0.5);
        assert_eq!(poisson_bracket(&o, &e(0), &e(3)).unwrap(), 0.0);
        assert!(poisson_bracket(&o, &e(0), &[1.0]).is_err());

        let mut rng = SeededRng::new(12);
        let p = random_point(&mut rng, 3, 0.8);
        let z = p.z();
        for r in 0..3 {
            for s in 0..3 {
                let got = poisson_bracket_complex(&p, &grad_z(3, r), &grad_zbar(3, s)).unwrap();
                let delta = if r == s { 1.0 } else { 0.0 };
                let want = I * p.gamma() * (delta + z[r] * z[s].conj());
                assert!((got - want).norm() < 1e-13);
                let zz = poisson_bracket_complex(&p, &grad_z(3, r), &grad_z(3, s)).unwrap();
                assert!(zz.norm() < 1e-13);
            }
        }
    }

    #[test]
    fn classical_hamiltonian_examples() {
        let part = Partition::new(2, 1).unwrap();
        let mut rng = SeededRng::new(13);
        let h = rng.hermitian(3, 1.0);
        let hs = HamiltonianSample::from_full(&h, part).unwrap();
        assert!((classical_hamiltonian(&RayPoint::origin(2), &hs).unwrap() + h[(2, 2)].re).abs() < 1e-15);

        let id = HamiltonianSample::from_full(&CMat::identity(3, 3), part).unwrap();
        let p = random_point(&mut rng, 2, 2.0);
        assert!((classical_hamiltonian(&p, &id).unwrap() + 1.0).abs() < 1e-14);

        // Minus the expectation value in ψ0(z).
        let psi = p.psi0();
        let expect = psi.dotc(&(&h * &psi)).re;
        assert!((classical_hamiltonian(&p, &hs).unwrap() + expect).abs() < 1e-14);

        let omega = 1.7;
        let [_, _, sz] = pauli();
        let hs = HamiltonianSample::from_full(&sz.scale(omega / 2.0), Partition::new(1, 1).unwrap()).unwrap();
        for theta in [PI / 6.0, PI / 3.0, 2.0 * PI / 3.0] {
            let p = pt(&[((theta / 2.0).tan(), 0.0)]);
            let got = classical_hamiltonian(&p, &hs).unwrap();
            assert!((got - omega / 2.0 * theta.cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let part = Partition::new(3, 1).unwrap();
        let mut rng = SeededRng::new(14);
        let hs = HamiltonianSample::from_full(&rng.hermitian(4, 1.0), part).unwrap();
        let p = random_point(&mut rng, 3, 0.7);
        let grad = classical_hamiltonian_gradient(&p, &hs).unwrap();
        let x0: Vec<f64> = p.q().into_iter().chain(p.p()).collect();
        let h = 1e-6;
        for d in 0..6 {
            let eval = |shift: f64| {
                let mut x = x0.clone();
                x[d] += shift;
                classical_hamiltonian(&RayPoint::from_qp(&x[..3], &x[3..]).unwrap(), &hs).unwrap()
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            assert!((fd - grad[d]).abs() < 1e-8, "component {d}");
        }
    }

    #[test]
    fn flow_examples() {
        let part = Partition::new(2, 1).unwrap();
        let mut rng = SeededRng::new(15);
        let hs = HamiltonianSample::from_full(&rng.hermitian(3, 1.0), part).unwrap();
        let flow = hamiltonian_flow(&RayPoint::origin(2), &hs).unwrap();
        assert!((flow - hs.v.column(0) * (-I)).norm() < 1e-14);

        let p = random_point(&mut rng, 2, 0.9);
        let diff = hamiltonian_flow(&p, &hs).unwrap() - vector_riccati_rhs(&p, &hs).unwrap();
        assert!(diff.norm() < 1e-12);

        let d = [0.3, -0.4, 1.1];
        let diag = CMat::from_diagonal(&CVec::from_iterator(3, d.iter().map(|&x| C64::from(x))));
        let hs = HamiltonianSample::from_full(&diag, part).unwrap();
        let flow = hamiltonian_flow(&p, &hs).unwrap();
        for r in 0..2 {
            assert!((flow[r] + I * (d[r] - d[2]) * p.z()[r]).norm() < 1e-13);
        }
    }

    #[test]
    fn identities_at_origin_are_exact() {
        let rep = pb_gamma_identities(&RayPoint::origin(3)).unwrap();
        assert_eq!(rep.max(), 0.0);
    }

    #[test]
    fn jacobi_holds_numerically() {
        let mut rng = SeededRng::new(16);
        for n in [1, 2, 3] {
            let p = random_point(&mut rng, n, 0.6);
            assert!(jacobi_residual(&p, 1e-2).unwrap() < 1e-8);
        }
    }

    fn loop_integral(x0: &[f64], u: &[f64], v: &[f64]) -> f64 {
        let n = x0.len() / 2;
        let corners = [
            x0.to_vec(),
            x0.iter().zip(u).map(|(a, b)| a + b).collect::<Vec<_>>(),
            x0.iter().zip(u).zip(v).map(|((a, b), c)| a + b + c).collect(),
            x0.iter().zip(v).map(|(a, c)| a + c).collect(),
        ];
        let mut total = 0.0;
        for k in 0..4 {
            let (a, b) = (&corners[k], &corners[(k + 1) % 4]);
            let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
            for (s, w) in crate::phase::gauss_legendre_unit() {
                let x: Vec<f64> = a.iter().zip(&d).map(|(x, dx)| x + s * dx).collect();
                let p = RayPoint::from_qp(&x[..n], &x[n..]).unwrap();
                total += w * theta0_real(&p, &d[..n], &d[n..]).unwrap();
            }
        }
        total
    }

    #[test]
    fn small_parallelogram_stokes() {
        let mut rng = SeededRng::new(17);
        let eps = 1e-4;
        for n in [1, 2, 3] {
            for _ in 0..10 {
                let p = random_point(&mut rng, n, 0.8);
                let x0: Vec<f64> = p.q().into_iter().chain(p.p()).collect();
                let (i, mut j) = ((rng.uniform() * (2 * n) as f64) as usize, 0);
                while j == i {
                    j = (rng.uniform() * (2 * n) as f64) as usize;
                }
                let mut u = vec![0.0; 2 * n];
                let mut v = vec![0.0; 2 * n];
                u[i] = eps;
                v[j] = eps;
                let centre: Vec<f64> = x0.iter().zip(&u).zip(&v).map(|((a, b), c)| a + 0.5 * (b + c)).collect();
                let pc = RayPoint::from_qp(&centre[..n], &centre[n..]).unwrap();
                let want = SymplecticMatrices::at(&pc).pairing(&u, &v).unwrap();
                let got = loop_integral(&x0, &u, &v);
                assert!((got - want).abs() < 1e-10, "n={n} got {got} want {want}");
            }
        }
    }

    fn point_strategy() -> impl Strategy<Value = RayPoint> {
        (1usize..5)
            .prop_flat_map(|n| prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), n))
            .prop_map(|v| pt(&v))
    }

    proptest! {
        #[test]
        fn inverse_pairing_holds(p in point_strategy()) {
            let s = SymplecticMatrices::at(&p);
            prop_assert!(s.inverse_residual() < 1e-10 * p.gamma().powi(2));
            prop_assert_eq!(s.symmetry_residual(), 0.0);
        }

        #[test]
        fn theta0_forms_agree(p in point_strategy(), seed in any::<u64>()) {
            let mut rng = SeededRng::new(seed);
            let dz = rng.complex_vector(p.len(), 1.0);
            let dq: Vec<f64> = dz.iter().map(|c| c.re).collect();
            let dp: Vec<f64> = dz.iter().map(|c| c.im).collect();
            let a = theta0(&p, &dz).unwrap();
            let b = theta0_real(&p, &dq, &dp).unwrap();
            prop_assert!((a - b).abs() < 1e-14 * (1.0 + dz.norm()));
        }

        #[test]
        fn bracket_is_antisymmetric(p in point_strategy(), seed in any::<u64>()) {
            let mut rng = SeededRng::new(seed);
            let n2 = 2 * p.len();
            let f: Vec<f64> = (0..n2).map(|_| rng.gaussian()).collect();
            let g: Vec<f64> = (0..n2).map(|_| rng.gaussian()).collect();
            let fg = poisson_bracket(&p, &f, &g).unwrap();
            let gf = poisson_bracket(&p, &g, &f).unwrap();
            prop_assert!((fg + gf).abs() < 1e-12 * (1.0 + fg.abs()));
        }

        #[test]
        fn gamma_identities_hold(p in point_strategy()) {
            let rep = pb_gamma_identities(&p).unwrap();
            prop_assert!(rep.max() < 1e-10 * p.gamma().powi(4), "{:?}", rep);
        }
    }
}
