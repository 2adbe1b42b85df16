//! The even signed-permutation group S̃ₚ⁺, its matrix representation, its
//! action on M(p) = SO(p) x Diag⁺(p), the stabilizer subgroups Γ_J⁰, and
//! double-coset representative enumeration.
//!
//! An element g = (σ, π) embeds into O(p) as `P_g = I_σ P_π`; membership in
//! S̃ₚ⁺ means tsgn(g) = sgn(σ)·sgn(π) = +1, equivalently det(P_g) = +1. All
//! group arithmetic is integer-exact.

use std::collections::HashSet;

use itertools::Itertools;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix_core::Rotation;
use crate::partitions::{DiagPos, EigenPair, SetPartition};

/// Default enumeration cap on p (2^7 * 8! ~ 5.2M elements).
pub const DEFAULT_CAP: usize = 8;

/// A signed permutation (σ, π); π stored 0-based with `perm[i] = π(i)`.
///
/// The derived ordering (signs first, then the permutation word) is the
/// lexicographic order used to pick canonical double-coset representatives.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SignedPerm {
    signs: Vec<i8>,
    perm: Vec<usize>,
}

/// Wire format: 1-based permutation images.
#[derive(Serialize, Deserialize)]
struct SignedPermRepr {
    signs: Vec<i8>,
    perm: Vec<usize>,
}

impl Serialize for SignedPerm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SignedPermRepr {
            signs: self.signs.clone(),
            perm: self.perm.iter().map(|&i| i + 1).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SignedPerm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = SignedPermRepr::deserialize(d)?;
        let perm: Vec<usize> = repr
            .perm
            .iter()
            .map(|&i| i.checked_sub(1).ok_or_else(|| serde::de::Error::custom("perm is 1-based")))
            .collect::<std::result::Result<_, _>>()?;
        SignedPerm::from_parts(repr.signs, perm).map_err(serde::de::Error::custom)
    }
}

impl SignedPerm {
    pub fn from_parts(signs: Vec<i8>, perm: Vec<usize>) -> Result<Self> {
        let p = signs.len();
        if perm.len() != p {
            return Err(Error::DimensionMismatch("signs/perm length mismatch".into()));
        }
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidInput("signs must be +-1".into()));
        }
        let mut hit = vec![false; p];
        for &i in &perm {
            if i >= p || hit[i] {
                return Err(Error::InvalidInput("perm is not a bijection".into()));
            }
            hit[i] = true;
        }
        Ok(Self { signs, perm })
    }

    pub fn identity(p: usize) -> Self {
        Self { signs: vec![1; p], perm: (0..p).collect() }
    }

    pub fn dim(&self) -> usize {
        self.signs.len()
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    /// 0-based permutation images.
    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn sgn_sigma(&self) -> i8 {
        self.signs.iter().product()
    }

    pub fn sgn_perm(&self) -> i8 {
        perm_sign(&self.perm)
    }

    /// tsgn(g) = sgn(σ)·sgn(π) = det(P_g).
    pub fn tsgn(&self) -> i8 {
        self.sgn_sigma() * self.sgn_perm()
    }

    /// Group law matching matrix multiplication:
    /// `matrix_of(g.compose(h)) = matrix_of(g) * matrix_of(h)`.
    pub fn compose(&self, h: &SignedPerm) -> Result<SignedPerm> {
        let p = self.dim();
        if h.dim() != p {
            return Err(Error::DimensionMismatch("group element dims differ".into()));
        }
        let mut inv = vec![0usize; p];
        for (i, &gi) in self.perm.iter().enumerate() {
            inv[gi] = i;
        }
        let perm = (0..p).map(|i| self.perm[h.perm[i]]).collect();
        let signs = (0..p).map(|i| self.signs[i] * h.signs[inv[i]]).collect();
        Ok(SignedPerm { signs, perm })
    }

    pub fn inverse(&self) -> SignedPerm {
        let p = self.dim();
        let mut perm = vec![0usize; p];
        for (i, &gi) in self.perm.iter().enumerate() {
            perm[gi] = i;
        }
        let signs = (0..p).map(|i| self.signs[self.perm[i]]).collect();
        SignedPerm { signs, perm }
    }

    /// The embedding matrix `P_g = I_σ P_π` with entries in {-1, 0, 1}.
    pub fn matrix(&self) -> DMatrix<f64> {
        let p = self.dim();
        let mut m = DMatrix::zeros(p, p);
        for (i, &gi) in self.perm.iter().enumerate() {
            m[(gi, i)] = self.signs[gi] as f64;
        }
        m
    }

    /// `π_g · d`, i.e. `(out)_i = d_{π^{-1}(i)}` so that
    /// `P_g D P_g^{-1} = diag(π_g · d)`.
    pub fn apply_diag(&self, d: &DiagPos) -> Result<DiagPos> {
        let p = self.dim();
        if d.dim() != p {
            return Err(Error::DimensionMismatch("diag dim differs".into()));
        }
        let mut out = vec![0.0; p];
        for (i, &gi) in self.perm.iter().enumerate() {
            out[gi] = d.entries()[i];
        }
        DiagPos::new(out)
    }

    /// The group action on M(p): `g · (U, D) = (U P_g^{-1}, π_g · D)`,
    /// which preserves `F(U, D) = U D U^T`.
    pub fn act(&self, pt: &EigenPair) -> Result<EigenPair> {
        if self.tsgn() != 1 {
            return Err(Error::InvalidInput("action requires tsgn = +1".into()));
        }
        let u = pt.rotation().matrix() * self.inverse().matrix();
        Ok(EigenPair::new(Rotation::new(u)?, self.apply_diag(pt.scale())?))
    }
}

fn perm_sign(perm: &[usize]) -> i8 {
    let mut inv = 0usize;
    for i in 0..perm.len() {
        for j in (i + 1)..perm.len() {
            if perm[i] > perm[j] {
                inv += 1;
            }
        }
    }
    if inv % 2 == 0 { 1 } else { -1 }
}

/// An even sign-change σ ∈ I_p⁺ (or a general one, with `is_even` exposed).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignChange {
    signs: Vec<i8>,
}

impl SignChange {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidInput("signs must be +-1".into()));
        }
        Ok(Self { signs })
    }

    pub fn identity(p: usize) -> Self {
        Self { signs: vec![1; p] }
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    /// Number of -1 entries.
    pub fn level(&self) -> usize {
        self.signs.iter().filter(|&&s| s == -1).count()
    }

    pub fn is_even(&self) -> bool {
        self.level() % 2 == 0
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.signs.len(),
            self.signs.iter().map(|&s| s as f64),
        ))
    }

    pub fn to_signed_perm(&self) -> SignedPerm {
        SignedPerm { signs: self.signs.clone(), perm: (0..self.signs.len()).collect() }
    }
}

/// An enumerated subgroup Γ_J⁰ ⊆ S̃ₚ⁺.
#[derive(Debug, Clone)]
pub struct SubgroupSpec {
    pub partition: SetPartition,
    pub elements: Vec<SignedPerm>,
}

/// All 2^{p-1} p! elements of S̃ₚ⁺ (tsgn = +1).
pub fn enumerate_tsp_plus(p: usize, cap: usize) -> Result<Vec<SignedPerm>> {
    if p == 0 || p > cap {
        return Err(Error::CapExceeded(format!(
            "enumeration of S~_p^+ requires 1 <= p <= {cap}, got {p}"
        )));
    }
    let mut out = Vec::new();
    for perm in (0..p).permutations(p) {
        let ps = perm_sign(&perm);
        for mask in 0..(1u32 << p) {
            let signs: Vec<i8> =
                (0..p).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect();
            let ss: i8 = signs.iter().product();
            if ss * ps == 1 {
                out.push(SignedPerm { signs, perm: perm.clone() });
            }
        }
    }
    Ok(out)
}

/// The subgroup Γ_J⁰ = S̃ₚ⁺ ∩ G_J⁰: π preserves every block of J and, per
/// block, the sign product equals the sign of the block's permutation (each
/// diagonal block of P_g has determinant +1). Cardinality 2^{p-r} Π kᵢ!.
pub fn gamma_j0(j: &SetPartition) -> Result<SubgroupSpec> {
    let p = j.p();
    // per-block choices: (local permutation images, local sign pattern)
    let block_choices: Vec<Vec<(Vec<usize>, Vec<i8>)>> = j
        .blocks()
        .iter()
        .map(|block| {
            let k = block.len();
            let mut choices = Vec::new();
            for local in (0..k).permutations(k) {
                let psign = perm_sign(&local);
                for mask in 0..(1u32 << k) {
                    let signs: Vec<i8> =
                        (0..k).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect();
                    let sprod: i8 = signs.iter().product();
                    if sprod == psign {
                        choices.push((local.clone(), signs));
                    }
                }
            }
            choices
        })
        .collect();

    let mut elements = Vec::new();
    for combo in block_choices.iter().multi_cartesian_product() {
        let mut perm = vec![0usize; p];
        let mut signs = vec![1i8; p];
        for (block, (local, local_signs)) in j.blocks().iter().zip(combo) {
            for (i, &src) in block.iter().enumerate() {
                perm[src] = block[local[i]];
                signs[block[i]] = local_signs[i];
            }
        }
        elements.push(SignedPerm { signs, perm });
    }
    elements.sort();
    Ok(SubgroupSpec { partition: j.clone(), elements })
}

/// Lexicographically smallest representatives of the double cosets
/// Γ_{J_D}⁰ \ S̃ₚ⁺ / Γ_{J_Λ}⁰, by orbit closure over the full enumeration.
pub fn double_coset_reps(
    j_d: &SetPartition,
    j_l: &SetPartition,
    p: usize,
    cap: usize,
) -> Result<Vec<SignedPerm>> {
    if j_d.p() != p || j_l.p() != p {
        return Err(Error::DimensionMismatch("partition dims differ from p".into()));
    }
    let mut all = enumerate_tsp_plus(p, cap)?;
    all.sort();
    let left = gamma_j0(j_d)?.elements;
    let right = gamma_j0(j_l)?.elements;
    let mut seen: HashSet<SignedPerm> = HashSet::with_capacity(all.len());
    let mut reps = Vec::new();
    for g in &all {
        if seen.contains(g) {
            continue;
        }
        // iterating in sorted order, the first unseen element of an orbit is
        // its lexicographic minimum
        reps.push(g.clone());
        for h1 in &left {
            let a = h1.compose(g)?;
            for h2 in &right {
                seen.insert(a.compose(h2)?);
            }
        }
    }
    Ok(reps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partitions::SetPartition;
    use nalgebra::DVector;

    fn sp(signs: &[i8], perm0: &[usize]) -> SignedPerm {
        SignedPerm::from_parts(signs.to_vec(), perm0.to_vec()).unwrap()
    }

    #[test]
    fn identity_laws() {
        let e = SignedPerm::identity(3);
        let g = sp(&[-1, -1, 1], &[1, 2, 0]);
        assert_eq!(e.compose(&g).unwrap(), g);
        assert_eq!(g.compose(&g.inverse()).unwrap(), e);
    }

    #[test]
    fn matrix_homomorphism_exhaustive_p3() {
        let all = enumerate_tsp_plus(3, 8).unwrap();
        for g in all.iter().take(12) {
            for h in all.iter().rev().take(12) {
                let lhs = g.compose(h).unwrap().matrix();
                let rhs = g.matrix() * h.matrix();
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn det_equals_tsgn() {
        for g in enumerate_tsp_plus(3, 8).unwrap() {
            assert!((g.matrix().determinant() - g.tsgn() as f64).abs() < 1e-12);
        }
        // a tsgn = -1 element, representable but outside S~_p^+
        let odd = sp(&[-1, 1], &[0, 1]);
        assert_eq!(odd.tsgn(), -1);
        assert!((odd.matrix().determinant() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn conjugation_identity() {
        let g = sp(&[1, -1, -1], &[2, 0, 1]);
        let d = DiagPos::new(vec![2.0, 3.0, 5.0]).unwrap();
        let lhs = g.matrix() * d.matrix() * g.inverse().matrix();
        let rhs = g.apply_diag(&d).unwrap().matrix();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_tsp_plus(1, 8).unwrap().len(), 1);
        assert_eq!(enumerate_tsp_plus(2, 8).unwrap().len(), 4);
        assert_eq!(enumerate_tsp_plus(3, 8).unwrap().len(), 24);
        assert_eq!(enumerate_tsp_plus(4, 8).unwrap().len(), 192);
        assert!(enumerate_tsp_plus(9, 8).is_err());
        for g in enumerate_tsp_plus(4, 8).unwrap() {
            assert_eq!(g.tsgn(), 1);
        }
    }

    #[test]
    fn gamma_j0_sizes() {
        let top = SetPartition::top(3);
        assert_eq!(gamma_j0(&top).unwrap().elements.len(), 1);
        let bot = SetPartition::bot(3);
        assert_eq!(gamma_j0(&bot).unwrap().elements.len(), 24);
        let mixed = SetPartition::from_blocks(3, vec![vec![0, 1], vec![2]]).unwrap();
        let sub = gamma_j0(&mixed).unwrap();
        assert_eq!(sub.elements.len(), 4);
        // all members lie in S~_p^+ and fix every D with J_D = J
        let d = DiagPos::new(vec![2.0, 2.0, 5.0]).unwrap();
        for g in &sub.elements {
            assert_eq!(g.tsgn(), 1);
            assert_eq!(g.apply_diag(&d).unwrap().entries(), d.entries());
        }
    }

    #[test]
    fn gamma_j0_closed_under_composition() {
        let j = SetPartition::from_blocks(4, vec![vec![0, 1, 2], vec![3]]).unwrap();
        let sub = gamma_j0(&j).unwrap();
        assert_eq!(sub.elements.len(), 2usize.pow(2) * 6);
        let set: std::collections::HashSet<_> = sub.elements.iter().cloned().collect();
        for g in &sub.elements {
            for h in &sub.elements {
                assert!(set.contains(&g.compose(h).unwrap()));
            }
        }
    }

    #[test]
    fn double_coset_counts() {
        let top2 = SetPartition::top(2);
        let bot2 = SetPartition::bot(2);
        assert_eq!(double_coset_reps(&top2, &top2, 2, 8).unwrap().len(), 4);
        assert_eq!(double_coset_reps(&bot2, &bot2, 2, 8).unwrap().len(), 1);
        let top3 = SetPartition::top(3);
        let mixed = SetPartition::from_blocks(3, vec![vec![0, 1], vec![2]]).unwrap();
        assert_eq!(double_coset_reps(&top3, &mixed, 3, 8).unwrap().len(), 6);
    }

    #[test]
    fn double_cosets_partition_the_group() {
        // coset sizes over returned reps must sum to |S~_p^+| with no overlap
        let p = 4;
        let all: HashSet<_> = enumerate_tsp_plus(p, 8).unwrap().into_iter().collect();
        for (jd, jl) in [
            (SetPartition::top(p), SetPartition::bot(p)),
            (
                SetPartition::from_blocks(p, vec![vec![0, 1], vec![2], vec![3]]).unwrap(),
                SetPartition::from_blocks(p, vec![vec![0], vec![1, 2, 3]]).unwrap(),
            ),
        ] {
            let reps = double_coset_reps(&jd, &jl, p, 8).unwrap();
            let left = gamma_j0(&jd).unwrap().elements;
            let right = gamma_j0(&jl).unwrap().elements;
            let mut covered: HashSet<SignedPerm> = HashSet::new();
            let mut total = 0usize;
            for z in &reps {
                let mut orbit = HashSet::new();
                for h1 in &left {
                    let a = h1.compose(z).unwrap();
                    for h2 in &right {
                        orbit.insert(a.compose(h2).unwrap());
                    }
                }
                total += orbit.len();
                assert!(covered.is_disjoint(&orbit));
                covered.extend(orbit);
            }
            assert_eq!(total, all.len());
            assert_eq!(covered, all);
        }
    }

    #[test]
    fn action_is_free_on_distinct_diagonals() {
        let d = DiagPos::new(vec![1.0, 2.0, 3.0]).unwrap();
        let pt = EigenPair::new(Rotation::identity(3), d);
        for g in enumerate_tsp_plus(3, 8).unwrap() {
            let moved = g.act(&pt).unwrap();
            let same = (moved.rotation().matrix() - pt.rotation().matrix()).norm() < 1e-12
                && moved.scale().entries() == pt.scale().entries();
            assert_eq!(same, g == SignedPerm::identity(3));
        }
    }

    #[test]
    fn action_preserves_fiber() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let u = crate::sampling::random_rotation(3, &mut rng);
        let d = DiagPos::new(vec![1.0, 2.5, 4.0]).unwrap();
        let pt = EigenPair::new(u, d);
        let x = pt.compose();
        for g in enumerate_tsp_plus(3, 8).unwrap() {
            let moved = g.act(&pt).unwrap();
            assert!((moved.compose() - &x).norm() < 1e-10);
        }
    }

    #[test]
    fn act_example_transposition() {
        let g = sp(&[-1, 1], &[1, 0]);
        let pt = EigenPair::new(
            Rotation::identity(2),
            DiagPos::new(vec![1.0, 2.0]).unwrap(),
        );
        let moved = g.act(&pt).unwrap();
        assert_eq!(moved.scale().entries(), &[2.0, 1.0]);
        assert!((moved.rotation().matrix() - g.inverse().matrix()).norm() < 1e-12);
    }

    #[test]
    fn act_composition_compatible() {
        let g = sp(&[-1, 1, -1], &[1, 2, 0]);
        let h = sp(&[1, -1, -1], &[2, 0, 1]);
        let pt = EigenPair::new(
            Rotation::identity(3),
            DiagPos::new(vec![1.0, 2.0, 3.0]).unwrap(),
        );
        let a = g.compose(&h).unwrap().act(&pt).unwrap();
        let b = g.act(&h.act(&pt).unwrap()).unwrap();
        assert!((a.rotation().matrix() - b.rotation().matrix()).norm() < 1e-12);
        assert_eq!(a.scale().entries(), b.scale().entries());
    }

    #[test]
    fn serde_round_trip() {
        let g = sp(&[-1, 1, -1, 1], &[2, 0, 3, 1]);
        let json = serde_json::to_string(&g).unwrap();
        assert_eq!(json, r#"{"signs":[-1,1,-1,1],"perm":[3,1,4,2]}"#);
        let back: SignedPerm = serde_json::from_str(&json).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn sign_change_level() {
        let s = SignChange::new(vec![-1, 1, -1, 1]).unwrap();
        assert_eq!(s.level(), 2);
        assert!(s.is_even());
        assert_eq!(
            s.matrix(),
            DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 1.0, -1.0, 1.0]))
        );
    }
}
