//! Eigenvalue-multiplicity partitions and the eigen-composition map
//! `F(U, D) = U D Uᵀ`: decomposition, fiber component counting, and fiber
//! enumeration in the top stratum (all eigenvalues distinct).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix_core::Rotation;
use crate::signed_perms;

/// Default relative tolerance for eigenvalue clustering.
pub const DEFAULT_RTOL: f64 = 1e-9;

/// A set partition of {1, ..., p} (stored 0-based), blocks sorted by minimum
/// element and elements sorted within each block.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SetPartition {
    p: usize,
    blocks: Vec<Vec<usize>>,
}

impl Serialize for SetPartition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let one_based: Vec<Vec<usize>> = self
            .blocks
            .iter()
            .map(|b| b.iter().map(|&i| i + 1).collect())
            .collect();
        one_based.serialize(s)
    }
}

impl SetPartition {
    pub fn from_blocks(p: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; p];
        let mut canon: Vec<Vec<usize>> = Vec::with_capacity(blocks.len());
        for mut b in blocks {
            if b.is_empty() {
                return Err(Error::InvalidInput("empty partition block".into()));
            }
            b.sort_unstable();
            for &i in &b {
                if i >= p || seen[i] {
                    return Err(Error::InvalidInput("blocks must partition {1..p}".into()));
                }
                seen[i] = true;
            }
            canon.push(b);
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::InvalidInput("blocks do not cover {1..p}".into()));
        }
        canon.sort_by_key(|b| b[0]);
        Ok(Self { p, blocks: canon })
    }

    /// All singletons (top stratum: distinct eigenvalues).
    pub fn top(p: usize) -> Self {
        Self { p, blocks: (0..p).map(|i| vec![i]).collect() }
    }

    /// The single block {1, ..., p}.
    pub fn bot(p: usize) -> Self {
        Self { p, blocks: vec![(0..p).collect()] }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.len()).collect()
    }

    /// Index of the block containing i.
    pub fn block_of(&self, i: usize) -> usize {
        self.blocks.iter().position(|b| b.contains(&i)).unwrap()
    }

    /// True iff every block of `k` is contained in a block of `self`
    /// (self ≤ k in the refinement order; k refines self).
    pub fn refines(&self, k: &SetPartition) -> Result<bool> {
        if self.p != k.p {
            return Err(Error::DimensionMismatch("partition sizes differ".into()));
        }
        Ok(k.blocks.iter().all(|kb| {
            let host = self.block_of(kb[0]);
            kb.iter().all(|&i| self.blocks[host].contains(&i))
        }))
    }

    /// Coarsest partition refining both.
    pub fn common_refinement(&self, other: &SetPartition) -> Result<SetPartition> {
        if self.p != other.p {
            return Err(Error::DimensionMismatch("partition sizes differ".into()));
        }
        let mut blocks = Vec::new();
        for a in &self.blocks {
            for b in &other.blocks {
                let inter: Vec<usize> = a.iter().copied().filter(|i| b.contains(i)).collect();
                if !inter.is_empty() {
                    blocks.push(inter);
                }
            }
        }
        SetPartition::from_blocks(self.p, blocks)
    }

    /// The integer partition [J] of p (block sizes, descending).
    pub fn int_partition(&self) -> IntPartition {
        let mut parts = self.block_sizes();
        parts.sort_unstable_by(|a, b| b.cmp(a));
        IntPartition { parts }
    }
}

/// A partition of the integer p (block-size multiset), parts descending.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct IntPartition {
    pub parts: Vec<usize>,
}

/// A positive diagonal matrix (element of Diag⁺(p)), stored as its diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagPos {
    entries: Vec<f64>,
}

impl DiagPos {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidInput("empty diagonal".into()));
        }
        if entries.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
            return Err(Error::InvalidInput("diagonal entries must be positive".into()));
        }
        Ok(Self { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_vec(self.entries.clone()))
    }
}

/// A point (U, D) of M(p) = SO(p) x Diag⁺(p).
#[derive(Debug, Clone)]
pub struct EigenPair {
    rotation: Rotation,
    scale: DiagPos,
}

impl EigenPair {
    pub fn new(rotation: Rotation, scale: DiagPos) -> Self {
        assert_eq!(rotation.dim(), scale.dim(), "EigenPair dims must agree");
        Self { rotation, scale }
    }

    pub fn dim(&self) -> usize {
        self.scale.dim()
    }

    pub fn rotation(&self) -> &Rotation {
        &self.rotation
    }

    pub fn scale(&self) -> &DiagPos {
        &self.scale
    }

    /// `F(U, D) = U D Uᵀ`.
    pub fn compose(&self) -> DMatrix<f64> {
        let u = self.rotation.matrix();
        u * self.scale.matrix() * u.transpose()
    }
}

/// `F(U, D) = U D Uᵀ` (free function form).
pub fn eigen_compose(pt: &EigenPair) -> DMatrix<f64> {
    pt.compose()
}

/// Eigen-decomposition of an SPD matrix with a deterministic canonical
/// representative: eigenvalues ascending, each eigenvector's first nonzero
/// coordinate positive, determinant fixed to +1 by flipping the last column.
pub fn eigen_decompose(x: &DMatrix<f64>, tol: f64) -> Result<EigenPair> {
    if !x.is_square() {
        return Err(Error::InvalidInput("input must be square".into()));
    }
    let p = x.nrows();
    let asym = (x - x.transpose()).norm();
    if asym > tol * x.norm().max(1.0) {
        return Err(Error::InvalidInput(format!(
            "input is not symmetric (||X - X^T|| = {asym:.3e})"
        )));
    }
    let sym = (x + x.transpose()) * 0.5;
    let (vals, vecs) = crate::matrix_core::sym_eigen(&sym);
    let mut entries = Vec::with_capacity(p);
    let mut u = DMatrix::zeros(p, p);
    for (col, &lam) in vals.iter().enumerate() {
        if !(lam > 0.0) {
            return Err(Error::InvalidInput(format!(
                "matrix is not positive definite (eigenvalue {lam})"
            )));
        }
        entries.push(lam);
        let mut v = vecs.column(col).into_owned();
        if let Some(first) = v.iter().find(|c| c.abs() > 1e-12) {
            if *first < 0.0 {
                v = -v;
            }
        }
        u.set_column(col, &v);
    }
    if u.determinant() < 0.0 {
        let last = -u.column(p - 1).into_owned();
        u.set_column(p - 1, &last);
    }
    Ok(EigenPair::new(Rotation::new(u)?, DiagPos::new(entries)?))
}

/// Eigenvalue-multiplicity partition J_D: i ~ j iff |dᵢ - dⱼ| <= rtol·max,
/// closed transitively.
pub fn partition_of_diag(d: &DiagPos, rtol: f64) -> SetPartition {
    let p = d.dim();
    let mut parent: Vec<usize> = (0..p).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let r = find(parent, parent[i]);
            parent[i] = r;
        }
        parent[i]
    }
    for i in 0..p {
        for j in (i + 1)..p {
            let (di, dj) = (d.entries()[i], d.entries()[j]);
            if (di - dj).abs() <= rtol * di.max(dj) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..p {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    SetPartition::from_blocks(p, groups.into_values().collect()).unwrap()
}

/// Fiber structure of E_X for X with eigenvalue partition J_D.
#[derive(Debug, Clone, Serialize)]
pub struct FiberSummary {
    pub partition: SetPartition,
    /// Number of connected components: 2^{r-1} p! / (k₁! ... k_r!).
    pub component_count: u128,
    /// Each component is diffeomorphic to SO(k₁) x ... x SO(k_r).
    pub component_shape: Vec<usize>,
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

pub fn fiber_summary(d: &DiagPos, rtol: f64) -> FiberSummary {
    let j = partition_of_diag(d, rtol);
    let p = j.p();
    let r = j.num_blocks();
    let shape = j.block_sizes();
    let mut count = (1u128 << (r - 1)) * factorial(p);
    for &k in &shape {
        count /= factorial(k);
    }
    FiberSummary { partition: j, component_count: count, component_shape: shape }
}

/// The full (finite) fiber through `pt` when all eigenvalues are distinct:
/// the orbit of `pt` under S̃ₚ⁺, with 2^{p-1} p! points.
pub fn enumerate_fiber_top(pt: &EigenPair, rtol: f64, cap: usize) -> Result<Vec<EigenPair>> {
    let p = pt.dim();
    let j = partition_of_diag(pt.scale(), rtol);
    if j != SetPartition::top(p) {
        return Err(Error::InvalidInput(
            "fiber enumeration requires distinct eigenvalues (top stratum)".into(),
        ));
    }
    signed_perms::enumerate_tsp_plus(p, cap)?
        .iter()
        .map(|g| g.act(pt))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::random_rotation;
    use rand::SeedableRng;

    #[test]
    fn compose_examples() {
        let d = DiagPos::new(vec![1.0, 2.0]).unwrap();
        let pt = EigenPair::new(Rotation::identity(2), d.clone());
        assert_eq!(pt.compose(), d.matrix());
        let c = crate::matrix_core::so_exp(&crate::matrix_core::SkewMatrix::new(
            DMatrix::from_row_slice(2, 2, &[0.0, -std::f64::consts::FRAC_PI_2,
                                            std::f64::consts::FRAC_PI_2, 0.0]),
        )
        .unwrap());
        let pt2 = EigenPair::new(c, d);
        let expected = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        assert!((pt2.compose() - expected).norm() < 1e-12);
    }

    #[test]
    fn decompose_identity() {
        let pt = eigen_decompose(&DMatrix::identity(3, 3), 1e-10).unwrap();
        assert!((pt.rotation().matrix() - DMatrix::identity(3, 3)).norm() < 1e-12);
        assert_eq!(pt.scale().entries(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn decompose_diagonal() {
        let x = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        let pt = eigen_decompose(&x, 1e-10).unwrap();
        assert_eq!(pt.scale().entries(), &[1.0, 3.0]);
        assert!(pt.rotation().matrix().determinant() > 0.0);
        assert!((pt.compose() - x).norm() < 1e-12);
    }

    #[test]
    fn decompose_round_trip_random() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let q = random_rotation(3, &mut rng);
        let d = DiagPos::new(vec![1.0, 2.0, 3.0]).unwrap();
        let x = EigenPair::new(q, d).compose();
        let pt = eigen_decompose(&x, 1e-8).unwrap();
        assert!((pt.compose() - x).norm() < 1e-10);
    }

    #[test]
    fn decompose_rejects_bad_input() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.5, 1.0]);
        assert!(eigen_decompose(&asym, 1e-10).is_err());
        let neg = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -2.0]);
        assert!(eigen_decompose(&neg, 1e-10).is_err());
    }

    #[test]
    fn partition_clustering() {
        let j = partition_of_diag(&DiagPos::new(vec![1.0, 2.0, 3.0]).unwrap(), 1e-9);
        assert_eq!(j, SetPartition::top(3));
        let j = partition_of_diag(&DiagPos::new(vec![2.0, 2.0, 5.0]).unwrap(), 1e-9);
        assert_eq!(j, SetPartition::from_blocks(3, vec![vec![0, 1], vec![2]]).unwrap());
        let j = partition_of_diag(&DiagPos::new(vec![1.0, 1.0 + 1e-12, 7.0]).unwrap(), 1e-9);
        assert_eq!(j.num_blocks(), 2);
    }

    #[test]
    fn refinement_order() {
        let top = SetPartition::top(3);
        let bot = SetPartition::bot(3);
        let mid = SetPartition::from_blocks(3, vec![vec![0, 1], vec![2]]).unwrap();
        assert!(bot.refines(&top).unwrap());
        assert!(!top.refines(&bot).unwrap());
        assert!(mid.refines(&top).unwrap());
        assert!(bot.refines(&mid).unwrap());
        assert!(top.refines(&top).unwrap());
    }

    #[test]
    fn fiber_summaries() {
        let s = fiber_summary(&DiagPos::new(vec![1.0, 2.0, 3.0]).unwrap(), 1e-9);
        assert_eq!(s.component_count, 24);
        assert_eq!(s.component_shape, vec![1, 1, 1]);
        let s = fiber_summary(&DiagPos::new(vec![2.0, 2.0, 5.0]).unwrap(), 1e-9);
        assert_eq!(s.component_count, 6);
        assert_eq!(s.component_shape, vec![2, 1]);
        let s = fiber_summary(&DiagPos::new(vec![4.0, 4.0]).unwrap(), 1e-9);
        assert_eq!(s.component_count, 1);
        assert_eq!(s.component_shape, vec![2]);
    }

    /// All set partitions of {0, ..., p-1}.
    fn all_partitions(p: usize) -> Vec<SetPartition> {
        fn go(i: usize, p: usize, blocks: &mut Vec<Vec<usize>>, out: &mut Vec<SetPartition>) {
            if i == p {
                out.push(SetPartition::from_blocks(p, blocks.clone()).unwrap());
                return;
            }
            for b in 0..blocks.len() {
                blocks[b].push(i);
                go(i + 1, p, blocks, out);
                blocks[b].pop();
            }
            blocks.push(vec![i]);
            go(i + 1, p, blocks, out);
            blocks.pop();
        }
        let mut out = Vec::new();
        go(0, p, &mut Vec::new(), &mut out);
        out
    }

    #[test]
    fn component_count_matches_group_index() {
        // component_count = |S~_p^+| / |Gamma_J^0| for every partition, p <= 5
        for p in 2..=5usize {
            let order = crate::signed_perms::enumerate_tsp_plus(p, 8).unwrap().len() as u128;
            for j in all_partitions(p) {
                let mut d = vec![0.0; p];
                for (bi, block) in j.blocks().iter().enumerate() {
                    for &i in block {
                        d[i] = 2f64.powi(bi as i32);
                    }
                }
                let s = fiber_summary(&DiagPos::new(d).unwrap(), 1e-9);
                assert_eq!(s.partition, j);
                let sub = crate::signed_perms::gamma_j0(&j).unwrap();
                assert_eq!(s.component_count, order / sub.elements.len() as u128);
            }
        }
    }

    #[test]
    fn fiber_enumeration_matches_action_orbit() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let u = random_rotation(3, &mut rng);
        let d = DiagPos::new(vec![1.0, 2.0, 4.0]).unwrap();
        let pt = EigenPair::new(u, d);
        let x = pt.compose();
        let fiber = enumerate_fiber_top(&pt, 1e-9, 8).unwrap();
        assert_eq!(fiber.len(), 24);
        for q in &fiber {
            assert!((q.compose() - &x).norm() < 1e-9);
        }
        // pairwise distinct
        for (i, a) in fiber.iter().enumerate() {
            for b in fiber.iter().skip(i + 1) {
                let same = (a.rotation().matrix() - b.rotation().matrix()).norm() < 1e-9
                    && (a.scale().matrix() - b.scale().matrix()).norm() < 1e-9;
                assert!(!same);
            }
        }
    }

    #[test]
    fn fiber_enumeration_rejects_repeated_eigenvalues() {
        let pt = EigenPair::new(Rotation::identity(2), DiagPos::new(vec![2.0, 2.0]).unwrap());
        assert!(enumerate_fiber_top(&pt, 1e-9, 8).is_err());
    }
}
