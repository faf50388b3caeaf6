//! Block structure of `U(N)` over a partition `N = n1 + n2` and the coset
//! space `U(N) / (U(n1) × U(n2))`.
//!
//! In the chart where the diagonal blocks `A` and `D` are nonsingular every
//! unitary factors as `U = U0 · diag(U1, U2)` with `U0` the unique coset
//! representative whose diagonal blocks are Hermitian positive-definite. The
//! coset is labelled by the `n1 × n2` matrix `Z = B D⁻¹`, and `U0` is rebuilt
//! from `Z` alone through `Γ1 = I + Z Z†` and `Γ2 = I + Z† Z`.

use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, Error, Result};
use crate::matcore::{
    block_diag, ensure_finite, hermitian_inv_sqrt, polar_decompose, smallest_singular_value,
    unitarity_residual, CMat, ToleranceProfile,
};

/// `N = n1 + n2` with both parts nonempty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawPartition", into = "RawPartition")]
pub struct Partition {
    n1: usize,
    n2: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPartition {
    n1: usize,
    n2: usize,
}

impl TryFrom<RawPartition> for Partition {
    type Error = Error;
    fn try_from(raw: RawPartition) -> Result<Self> {
        Partition::new(raw.n1, raw.n2)
    }
}

impl From<Partition> for RawPartition {
    fn from(p: Partition) -> Self {
        RawPartition { n1: p.n1, n2: p.n2 }
    }
}

impl Partition {
    pub fn new(n1: usize, n2: usize) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::InvalidInput(format!(
                "partition parts must be positive, got ({n1}, {n2})"
            )));
        }
        Ok(Self { n1, n2 })
    }

    /// The ray-space partition `(N - 1, 1)`.
    pub fn ray(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "ray space needs N >= 2, got {n}"
            )));
        }
        Self::new(n - 1, 1)
    }

    /// Every partition of `n` into two nonempty parts, ordered by `n1`.
    pub fn all_of(n: usize) -> Vec<Self> {
        (1..n).map(|n1| Self { n1, n2: n - n1 }).collect()
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn dim(&self) -> usize {
        self.n1 + self.n2
    }
}

/// A unitary split into `A (n1×n1)`, `B (n1×n2)`, `C (n2×n1)`, `D (n2×n2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockUnitary {
    partition: Partition,
    pub a: CMat,
    pub b: CMat,
    pub c: CMat,
    pub d: CMat,
}

impl BlockUnitary {
    fn from_parts(partition: Partition, a: CMat, b: CMat, c: CMat, d: CMat) -> Self {
        Self {
            partition,
            a,
            b,
            c,
            d,
        }
    }

    pub fn partition(&self) -> Partition {
        self.partition
    }

    pub fn assemble(&self) -> CMat {
        let (n1, n) = (self.partition.n1, self.partition.dim());
        let mut u = CMat::zeros(n, n);
        u.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        u.view_mut((0, n1), (n1, n - n1)).copy_from(&self.b);
        u.view_mut((n1, 0), (n - n1, n1)).copy_from(&self.c);
        u.view_mut((n1, n1), (n - n1, n - n1)).copy_from(&self.d);
        u
    }

    /// Largest Frobenius residual among the three block unitarity conditions
    /// `A†A + C†C = I`, `A†B + C†D = 0`, `D†D + B†B = I`.
    pub fn block_unitarity_residual(&self) -> f64 {
        let (n1, n2) = (self.partition.n1, self.partition.n2);
        let r1 = (self.a.adjoint() * &self.a + self.c.adjoint() * &self.c
            - CMat::identity(n1, n1))
        .norm();
        let r2 = (self.a.adjoint() * &self.b + self.c.adjoint() * &self.d).norm();
        let r3 = (self.d.adjoint() * &self.d + self.b.adjoint() * &self.b
            - CMat::identity(n2, n2))
        .norm();
        r1.max(r2).max(r3)
    }

    /// Right action by `diag(w1, w2)`: `A → A W1`, `B → B W2`, `C → C W1`,
    /// `D → D W2`.
    pub fn right_multiply(&self, w1: &CMat, w2: &CMat) -> Result<Self> {
        let (n1, n2) = (self.partition.n1, self.partition.n2);
        if w1.shape() != (n1, n1) || w2.shape() != (n2, n2) {
            return Err(dim_mismatch(
                "right_multiply",
                format!("{n1}x{n1} and {n2}x{n2}"),
                format!("{:?} and {:?}", w1.shape(), w2.shape()),
            ));
        }
        Ok(Self::from_parts(
            self.partition,
            &self.a * w1,
            &self.b * w2,
            &self.c * w1,
            &self.d * w2,
        ))
    }
}

/// Coset coordinate `Z` (an `n1 × n2` complex matrix).
#[derive(Debug, Clone, PartialEq)]
pub struct CosetPoint {
    partition: Partition,
    z: CMat,
}

impl CosetPoint {
    pub fn new(partition: Partition, z: CMat) -> Result<Self> {
        if z.shape() != (partition.n1, partition.n2) {
            return Err(dim_mismatch(
                "coset point",
                format!("{}x{}", partition.n1, partition.n2),
                format!("{}x{}", z.nrows(), z.ncols()),
            ));
        }
        ensure_finite(&z, "coset point")?;
        Ok(Self { partition, z })
    }

    pub fn origin(partition: Partition) -> Self {
        Self {
            partition,
            z: CMat::zeros(partition.n1, partition.n2),
        }
    }

    pub fn partition(&self) -> Partition {
        self.partition
    }

    pub fn z(&self) -> &CMat {
        &self.z
    }

    pub fn into_z(self) -> CMat {
        self.z
    }

    /// `Γ1 = I + Z Z†`.
    pub fn gamma1(&self) -> CMat {
        let n1 = self.partition.n1;
        CMat::identity(n1, n1) + &self.z * self.z.adjoint()
    }

    /// `Γ2 = I + Z† Z`.
    pub fn gamma2(&self) -> CMat {
        let n2 = self.partition.n2;
        CMat::identity(n2, n2) + self.z.adjoint() * &self.z
    }

    /// `‖Γ1 Z − Z Γ2‖_F`; zero in exact arithmetic.
    pub fn intertwining_residual(&self) -> f64 {
        (self.gamma1() * &self.z - &self.z * self.gamma2()).norm()
    }
}

/// `U = U0 · diag(U1, U2)` with `U0` the canonical coset representative.
#[derive(Debug, Clone, PartialEq)]
pub struct CosetFactorization {
    pub u0: BlockUnitary,
    pub u1: CMat,
    pub u2: CMat,
}

impl CosetFactorization {
    pub fn reassemble(&self) -> CMat {
        self.u0.assemble() * block_diag(&self.u1, &self.u2)
    }
}

/// Splits an `N × N` unitary into its blocks for `part`.
pub fn split_blocks(u: &CMat, part: Partition, prof: &ToleranceProfile) -> Result<BlockUnitary> {
    let n = part.dim();
    if u.shape() != (n, n) {
        return Err(dim_mismatch(
            "split_blocks",
            format!("{n}x{n}"),
            format!("{}x{}", u.nrows(), u.ncols()),
        ));
    }
    ensure_finite(u, "split_blocks")?;
    let residual = unitarity_residual(u);
    if residual > prof.unitarity_tol {
        return Err(Error::NotUnitary { residual });
    }
    Ok(split_unchecked(u, part))
}

pub(crate) fn split_unchecked(u: &CMat, part: Partition) -> BlockUnitary {
    let (n1, n2) = (part.n1, part.n2);
    BlockUnitary::from_parts(
        part,
        u.view((0, 0), (n1, n1)).into_owned(),
        u.view((0, n1), (n1, n2)).into_owned(),
        u.view((n1, 0), (n2, n1)).into_owned(),
        u.view((n1, n1), (n2, n2)).into_owned(),
    )
}

fn chart_check(block: &CMat, prof: &ToleranceProfile) -> Result<()> {
    let sigma_min = smallest_singular_value(block);
    if sigma_min <= prof.singularity_tol {
        return Err(Error::ChartBreakdown { sigma_min });
    }
    Ok(())
}

fn map_chart_error(e: Error) -> Error {
    match e {
        Error::NearSingular { sigma_min } => Error::ChartBreakdown { sigma_min },
        other => other,
    }
}

/// Factors `U = U0 · diag(U1, U2)` using the polar decompositions of `A` and
/// `D`.
pub fn coset_factorize(bu: &BlockUnitary, prof: &ToleranceProfile) -> Result<CosetFactorization> {
    chart_check(&bu.a, prof)?;
    chart_check(&bu.d, prof)?;
    let u1 = polar_decompose(&bu.a, prof).map_err(map_chart_error)?.w;
    let u2 = polar_decompose(&bu.d, prof).map_err(map_chart_error)?.w;
    let u1_inv = u1.adjoint();
    let u2_inv = u2.adjoint();
    let u0 = BlockUnitary::from_parts(
        bu.partition,
        &bu.a * &u1_inv,
        &bu.b * &u2_inv,
        &bu.c * &u1_inv,
        &bu.d * &u2_inv,
    );
    Ok(CosetFactorization { u0, u1, u2 })
}

/// `Z = B D⁻¹`, computed by solving `Z D = B`.
pub fn extract_z(bu: &BlockUnitary, prof: &ToleranceProfile) -> Result<CosetPoint> {
    chart_check(&bu.d, prof)?;
    let zt = bu
        .d
        .transpose()
        .lu()
        .solve(&bu.b.transpose())
        .ok_or(Error::ChartBreakdown { sigma_min: 0.0 })?;
    CosetPoint::new(bu.partition, zt.transpose())
}

/// Rebuilds the coset representative
/// `U0 = [[Γ1^{-1/2}, Z Γ2^{-1/2}], [−Z† Γ1^{-1/2}, Γ2^{-1/2}]]`.
///
/// Both inverse square roots are computed independently and the result is
/// checked against the block unitarity conditions, with the tolerance scaled
/// by `1 + ‖Z‖²` to absorb the conditioning of `Γ1`, `Γ2`.
pub fn reconstruct_u0(zp: &CosetPoint, prof: &ToleranceProfile) -> Result<BlockUnitary> {
    let z = &zp.z;
    let g1_inv_sqrt = hermitian_inv_sqrt(&zp.gamma1(), prof)?;
    let g2_inv_sqrt = hermitian_inv_sqrt(&zp.gamma2(), prof)?;
    let b0 = z * &g2_inv_sqrt;
    let c0 = -(z.adjoint() * &g1_inv_sqrt);
    let u0 = BlockUnitary::from_parts(zp.partition, g1_inv_sqrt, b0, c0, g2_inv_sqrt);
    let residual = u0.block_unitarity_residual();
    let z_norm = z.norm();
    if residual.is_nan() || residual > prof.unitarity_tol * (1.0 + z_norm * z_norm) {
        return Err(Error::NotUnitary { residual });
    }
    Ok(u0)
}

/// Row permutation of `u` that moves the `n2 × n2` minor of the last `n2`
/// columns with the largest `|det|` into the `D` position.
///
/// Returned as `perm` with `perm[new_row] = old_row`; rows outside the chosen
/// minor keep their relative order. Brute force over all row subsets, so
/// only meant for the small `N` this crate targets.
pub fn suggest_chart_permutation(u: &CMat, part: Partition) -> Result<Vec<usize>> {
    let (n1, n2, n) = (part.n1, part.n2, part.dim());
    if u.shape() != (n, n) {
        return Err(dim_mismatch(
            "suggest_chart_permutation",
            format!("{n}x{n}"),
            format!("{}x{}", u.nrows(), u.ncols()),
        ));
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut subset: Vec<usize> = (0..n2).collect();
    loop {
        let minor = CMat::from_fn(n2, n2, |i, j| u[(subset[i], n1 + j)]);
        let det = minor.determinant().norm();
        if best.as_ref().is_none_or(|(b, _)| det > *b) {
            best = Some((det, subset.clone()));
        }
        // Next combination in lexicographic order.
        let mut i = n2;
        while i > 0 && subset[i - 1] == n - n2 + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        subset[i - 1] += 1;
        for j in i..n2 {
            subset[j] = subset[j - 1] + 1;
        }
    }
    let chosen = best.map(|(_, s)| s).unwrap_or_default();
    let mut perm: Vec<usize> = (0..n).filter(|r| !chosen.contains(r)).collect();
    perm.extend(chosen);
    Ok(perm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{unitary_exp_step, C64};
    use crate::rng::SeededRng;

    fn prof() -> ToleranceProfile {
        ToleranceProfile::default()
    }

    fn random_unitary(rng: &mut SeededRng, n: usize, scale: f64) -> CMat {
        unitary_exp_step(&rng.hermitian(n, scale), 1.0, &prof()).unwrap()
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::new(0, 2).is_err());
        assert!(Partition::new(2, 0).is_err());
        assert_eq!(Partition::new(2, 3).unwrap().dim(), 5);
        assert_eq!(Partition::all_of(4).len(), 3);
        assert_eq!(Partition::ray(3).unwrap(), Partition::new(2, 1).unwrap());
        assert!(Partition::ray(1).is_err());
    }

    #[test]
    fn split_identity_and_block_diagonal() {
        let part = Partition::new(2, 2).unwrap();
        let bu = split_blocks(&CMat::identity(4, 4), part, &prof()).unwrap();
        assert_eq!(bu.a, CMat::identity(2, 2));
        assert_eq!(bu.b, CMat::zeros(2, 2));
        assert_eq!(bu.c, CMat::zeros(2, 2));
        assert_eq!(bu.d, CMat::identity(2, 2));

        let mut rng = SeededRng::new(1);
        let v1 = random_unitary(&mut rng, 2, 1.0);
        let v2 = random_unitary(&mut rng, 2, 1.0);
        let bu = split_blocks(&block_diag(&v1, &v2), part, &prof()).unwrap();
        assert_eq!(bu.a, v1);
        assert_eq!(bu.d, v2);
        assert_eq!(bu.b, CMat::zeros(2, 2));
    }

    #[test]
    fn split_random_satisfies_block_conditions() {
        let mut rng = SeededRng::new(2);
        let u = random_unitary(&mut rng, 4, 1.0);
        let bu = split_blocks(&u, Partition::new(1, 3).unwrap(), &prof()).unwrap();
        assert!(bu.block_unitarity_residual() < 1e-12);
        assert_eq!(bu.assemble(), u);
    }

    #[test]
    fn split_errors() {
        let part = Partition::new(1, 1).unwrap();
        assert!(matches!(
            split_blocks(&CMat::identity(3, 3), part, &prof()),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            split_blocks(&CMat::identity(2, 2).scale(1.1), part, &prof()),
            Err(Error::NotUnitary { .. })
        ));
    }

    #[test]
    fn factorize_identity_and_subgroup() {
        let part = Partition::new(2, 2).unwrap();
        let f = coset_factorize(&split_unchecked(&CMat::identity(4, 4), part), &prof()).unwrap();
        assert!((f.u0.assemble() - CMat::identity(4, 4)).norm() < 1e-15);
        assert!((&f.u1 - CMat::identity(2, 2)).norm() < 1e-15);

        let mut rng = SeededRng::new(3);
        let v1 = random_unitary(&mut rng, 2, 1.0);
        let v2 = random_unitary(&mut rng, 2, 1.0);
        let f = coset_factorize(&split_unchecked(&block_diag(&v1, &v2), part), &prof()).unwrap();
        assert!((f.u0.assemble() - CMat::identity(4, 4)).norm() < 1e-13);
        assert!((&f.u1 - &v1).norm() < 1e-13);
        assert!((&f.u2 - &v2).norm() < 1e-13);
    }

    #[test]
    fn factorize_random_near_identity() {
        let mut rng = SeededRng::new(4);
        let u = random_unitary(&mut rng, 4, 0.3);
        let bu = split_unchecked(&u, Partition::new(2, 2).unwrap());
        let f = coset_factorize(&bu, &prof()).unwrap();
        assert!((f.reassemble() - &u).norm() < 1e-11);
        // Diagonal blocks of U0 are Hermitian positive-definite.
        for blk in [&f.u0.a, &f.u0.d] {
            assert!((blk - blk.adjoint()).norm() < 1e-13);
            let eig = nalgebra::SymmetricEigen::new((blk + blk.adjoint()).scale(0.5));
            assert!(eig.eigenvalues.iter().all(|&l| l > 0.0));
        }
    }

    #[test]
    fn factorize_reports_chart_breakdown() {
        // Swap of two levels: A = D = 0 for partition (1, 1).
        let swap = CMat::from_row_slice(2, 2, &[C64::from(0.0), C64::from(1.0), C64::from(1.0), C64::from(0.0)]);
        let bu = split_unchecked(&swap, Partition::new(1, 1).unwrap());
        assert!(matches!(
            coset_factorize(&bu, &prof()),
            Err(Error::ChartBreakdown { sigma_min }) if sigma_min < 1e-10
        ));
        assert!(matches!(
            extract_z(&bu, &prof()),
            Err(Error::ChartBreakdown { .. })
        ));
    }

    #[test]
    fn extract_z_cases() {
        let part = Partition::new(2, 2).unwrap();
        let z = extract_z(&split_unchecked(&CMat::identity(4, 4), part), &prof()).unwrap();
        assert_eq!(z.z(), &CMat::zeros(2, 2));

        let mut rng = SeededRng::new(5);
        let v1 = random_unitary(&mut rng, 2, 1.0);
        let v2 = random_unitary(&mut rng, 2, 1.0);
        let z = extract_z(&split_unchecked(&block_diag(&v1, &v2), part), &prof()).unwrap();
        assert!(z.z().norm() < 1e-15);

        let u = random_unitary(&mut rng, 4, 0.5);
        let bu = split_unchecked(&u, part);
        let z_raw = extract_z(&bu, &prof()).unwrap();
        let f = coset_factorize(&bu, &prof()).unwrap();
        let z_fact = &f.u0.b * f.u0.d.clone().try_inverse().unwrap();
        assert!((z_raw.z() - z_fact).norm() < 1e-11);
    }

    #[test]
    fn reconstruct_cases() {
        let part = Partition::new(2, 2).unwrap();
        let u0 = reconstruct_u0(&CosetPoint::origin(part), &prof()).unwrap();
        assert!((u0.assemble() - CMat::identity(4, 4)).norm() < 1e-15);

        // Γ1 = Γ2 = 2 for the scalar Z = 1.
        let one = Partition::new(1, 1).unwrap();
        let zp = CosetPoint::new(one, CMat::from_element(1, 1, C64::from(1.0))).unwrap();
        let u0 = reconstruct_u0(&zp, &prof()).unwrap().assemble();
        let s = 1.0 / 2f64.sqrt();
        let expected = CMat::from_row_slice(2, 2, &[C64::from(s), C64::from(s), C64::from(-s), C64::from(s)]);
        assert!((u0 - expected).norm() < 1e-15);

        let mut rng = SeededRng::new(6);
        let part = Partition::new(3, 2).unwrap();
        let zp = CosetPoint::new(part, rng.complex_matrix(3, 2, 1.0)).unwrap();
        let u0 = reconstruct_u0(&zp, &prof()).unwrap();
        assert!(unitarity_residual(&u0.assemble()) < 1e-12);
        let back = extract_z(&u0, &prof()).unwrap();
        assert!((back.z() - zp.z()).norm() < 1e-11);
    }

    #[test]
    fn coset_point_dimensions_and_intertwining() {
        let part = Partition::new(3, 2).unwrap();
        assert!(CosetPoint::new(part, CMat::zeros(2, 3)).is_err());
        let mut rng = SeededRng::new(7);
        let zp = CosetPoint::new(part, rng.complex_matrix(3, 2, 1.0)).unwrap();
        assert!(zp.intertwining_residual() < 1e-13);
    }

    #[test]
    fn chart_permutation_moves_large_minor_into_d() {
        let swap = CMat::from_row_slice(2, 2, &[C64::from(0.0), C64::from(1.0), C64::from(1.0), C64::from(0.0)]);
        let perm = suggest_chart_permutation(&swap, Partition::new(1, 1).unwrap()).unwrap();
        assert_eq!(perm, vec![1, 0]);
        let permuted = CMat::from_fn(2, 2, |i, j| swap[(perm[i], j)]);
        let bu = split_unchecked(&permuted, Partition::new(1, 1).unwrap());
        assert!(extract_z(&bu, &prof()).is_ok());
    }
}
