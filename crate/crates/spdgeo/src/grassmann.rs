//! Involutions in SO(p), sign-change reducibility, the block-analysis lemma,
//! the half-angle relation, the 2x isometry with Grassmannians, coordinate-
//! plane covering, and the two counterexample planes.
//!
//! Key facts implemented and verified numerically:
//!
//! * an involution of level m (m = dim E_{-1}(R), always even) satisfies
//!   `d_so(R, I)^2 = (m/2) pi^2`;
//! * `Phi(W) = I - 2 P_W` identifies the even Grassmannian with involutions,
//!   and `d_so(Phi(W), Phi(Z)) = 2 d_gr(W, Z)`;
//! * the principal angles between E_{-1}(R1) and E_{-1}(R2) are half the
//!   matching normal-form angles of R1 R2, with leftovers in {0, pi};
//! * `d_so(R I_sigma, I)^2 = (l+ + l-)/2 * pi^2 + sum_{J*} theta_j^2` from a
//!   two-block eigendecomposition, which makes the exhaustive sign-change
//!   search cheap.

use itertools::Itertools;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix_core::{
    d_so, orthonormalize, principal_angles, redundant_angles, Rotation,
};
use crate::signed_perms::SignChange;

use std::f64::consts::PI;

/// Hard cap on the sign-change bitmask search.
pub const SIGN_SEARCH_CAP: usize = 24;
/// A reduction must beat the current distance by this much.
pub const REDUCE_TIE_TOL: f64 = 1e-9;
/// Classification tolerance for +-1 eigenvalues in block analysis.
const EIG_ONE_TOL: f64 = 1e-8;

/// An m-plane in R^p, stored as an orthonormal p x m basis.
#[derive(Debug, Clone)]
pub struct Plane {
    basis: DMatrix<f64>,
}

impl Plane {
    /// Orthonormalizes the given full-column-rank basis.
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        Ok(Self { basis: orthonormalize(&basis)? })
    }

    pub fn p(&self) -> usize {
        self.basis.nrows()
    }

    pub fn m(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// The coordinate plane R^J.
    pub fn coordinate(p: usize, j: &[usize]) -> Result<Self> {
        let mut b = DMatrix::zeros(p, j.len());
        for (col, &i) in j.iter().enumerate() {
            if i >= p {
                return Err(Error::InvalidInput("coordinate index out of range".into()));
            }
            b[(i, col)] = 1.0;
        }
        Ok(Self { basis: b })
    }
}

/// An involution R in SO(p) (R^2 = I, R != I) with its level m = dim E_{-1}(R).
#[derive(Debug, Clone)]
pub struct Involution {
    rotation: Rotation,
    level: usize,
}

impl Involution {
    pub fn new(rotation: Rotation) -> Result<Self> {
        if !rotation.is_involution() {
            return Err(Error::InvalidInput("matrix is not a (non-identity) involution".into()));
        }
        // R is symmetric, eigenvalues cluster at +-1
        let sym = (rotation.matrix() + rotation.matrix().transpose()) * 0.5;
        let (vals, _) = crate::matrix_core::sym_eigen(&sym);
        let mut level = 0usize;
        for &lam in &vals {
            if (lam + 1.0).abs() <= 1e-6 {
                level += 1;
            } else if (lam - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidInput(format!(
                    "involution eigenvalue {lam} not near +-1"
                )));
            }
        }
        if level % 2 != 0 || level == 0 {
            return Err(Error::Numerical(format!(
                "involution level {level} must be even and positive"
            )));
        }
        Ok(Self { rotation, level })
    }

    pub fn p(&self) -> usize {
        self.rotation.dim()
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn rotation(&self) -> &Rotation {
        &self.rotation
    }

    pub fn into_rotation(self) -> Rotation {
        self.rotation
    }

    /// Orthonormal basis of E_{-1}(R).
    pub fn minus_one_eigenspace(&self) -> Result<Plane> {
        let sym = (self.rotation.matrix() + self.rotation.matrix().transpose()) * 0.5;
        let (vals, vecs) = crate::matrix_core::sym_eigen(&sym);
        let cols: Vec<_> = (0..self.p())
            .filter(|&i| vals[i] < 0.0)
            .map(|i| vecs.column(i).into_owned())
            .collect();
        if cols.len() != self.level {
            return Err(Error::Numerical("E_{-1} dimension mismatch".into()));
        }
        Plane::new(DMatrix::from_columns(&cols))
    }
}

/// `Phi(W) = I - 2 P_W`: reflection about W-perp, an involution of level m.
pub fn phi(w: &Plane) -> Result<Involution> {
    if w.m() % 2 != 0 {
        return Err(Error::InvalidInput("phi requires an even-dimensional plane".into()));
    }
    let p = w.p();
    let mat = DMatrix::identity(p, p) - w.basis() * w.basis().transpose() * 2.0;
    Involution::new(Rotation::new(mat)?)
}

/// Grassmannian distance: sqrt of the sum of squared principal angles.
pub fn d_gr(w: &Plane, z: &Plane) -> Result<f64> {
    if w.p() != z.p() || w.m() != z.m() {
        return Err(Error::DimensionMismatch("planes must share p and m".into()));
    }
    let angles = principal_angles(w.basis(), z.basis())?;
    Ok(angles.iter().map(|a| a * a).sum::<f64>().sqrt())
}

/// Result of the half-angle verification between two involutions.
#[derive(Debug, Clone)]
pub struct HalfAngleReport {
    /// Principal angles between E_{-1}(R1) and E_{-1}(R2), ascending.
    pub phis: Vec<f64>,
    /// Redundant normal-form angles of R1 R2, ascending.
    pub theta_tilde: Vec<f64>,
    /// matching[j] = index into `theta_tilde` with theta/2 matching phis[j].
    pub matching: Vec<usize>,
    /// Largest |phi - theta/2| over the matching.
    pub max_mismatch: f64,
}

/// Verifies that the principal angles between the -1 eigenspaces are half the
/// matching redundant normal-form angles of R1 R2, and that unmatched angles
/// are 0, pi, or second copies of matched interior angles.
pub fn half_angle_check(r1: &Involution, r2: &Involution) -> Result<HalfAngleReport> {
    if r1.p() != r2.p() {
        return Err(Error::DimensionMismatch("involutions differ in dimension".into()));
    }
    let w1 = r1.minus_one_eigenspace()?;
    let w2 = r2.minus_one_eigenspace()?;
    let phis = principal_angles(w1.basis(), w2.basis())?;
    let product = r1.rotation().compose(r2.rotation())?;
    let mut theta_tilde = redundant_angles(&product);
    theta_tilde.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut used = vec![false; theta_tilde.len()];
    let mut matching = Vec::with_capacity(phis.len());
    let mut max_mismatch: f64 = 0.0;
    for &phi in &phis {
        let best = (0..theta_tilde.len())
            .filter(|&i| !used[i])
            .min_by(|&a, &b| {
                let da = (theta_tilde[a] / 2.0 - phi).abs();
                let db = (theta_tilde[b] / 2.0 - phi).abs();
                da.partial_cmp(&db).unwrap()
            })
            .ok_or_else(|| Error::Numerical("no angle left to match".into()))?;
        let diff = (theta_tilde[best] / 2.0 - phi).abs();
        // the OR clause absorbs arccos conditioning when both angles are
        // numerically zero
        let degenerate_zero = phi <= 1e-7 && theta_tilde[best] / 2.0 <= 1e-7;
        if diff > 1e-8 && !degenerate_zero {
            return Err(Error::Numerical(format!(
                "half-angle mismatch {diff:.3e} at phi = {phi}"
            )));
        }
        used[best] = true;
        matching.push(best);
        max_mismatch = max_mismatch.max(diff);
    }
    // Each normal-form angle appears twice in the redundant list; a matched
    // interior angle therefore leaves its second copy unmatched. Leftovers
    // must be 0, pi, or such duplicates (one per matched interior angle).
    let mut duplicate_budget: Vec<f64> = matching.iter().map(|&i| theta_tilde[i]).collect();
    for (i, &th) in theta_tilde.iter().enumerate() {
        if !used[i] {
            let leftover_err = th.min((th - PI).abs());
            if leftover_err <= 1e-7 {
                continue;
            }
            let dup = duplicate_budget
                .iter()
                .position(|&m| (m - th).abs() <= 1e-7);
            match dup {
                Some(slot) => {
                    duplicate_budget.swap_remove(slot);
                }
                None => {
                    return Err(Error::Numerical(format!(
                        "unmatched angle {th} is not 0, pi, or a matched duplicate"
                    )));
                }
            }
        }
    }
    Ok(HalfAngleReport { phis, theta_tilde, matching, max_mismatch })
}

/// Block analysis of R I_sigma per the two-block eigendecomposition: with the
/// sigma-flipped coordinates J last, R = [[R1, R2], [R2^T, R4]] and the
/// symmetric part of R I_sigma is diag(R1, -R4).
#[derive(Debug, Clone)]
pub struct BlockAnalysis {
    pub sigma: SignChange,
    pub r1: DMatrix<f64>,
    pub r2: DMatrix<f64>,
    pub r4: DMatrix<f64>,
    /// dim E_{-1}(R1).
    pub l_plus: usize,
    /// dim E_{+1}(R4).
    pub l_minus: usize,
    /// Interior angles theta_j in (0, pi) attached to the flipped block J.
    pub j_star_angles: Vec<f64>,
    /// d_so(R I_sigma, I)^2 = (l+ + l-)/2 pi^2 + sum of squared J* angles.
    pub d_squared: f64,
}

/// Eigenvalue split of a symmetric block: (#<= -1, #>= +1, interior values).
fn split_eigs(block: &DMatrix<f64>) -> (usize, usize, Vec<f64>) {
    if block.is_empty() {
        return (0, 0, Vec::new());
    }
    let (vals, _) = crate::matrix_core::sym_eigen(block);
    let mut minus = 0;
    let mut plus = 0;
    let mut interior = Vec::new();
    for &lam in &vals {
        if (lam + 1.0).abs() <= EIG_ONE_TOL {
            minus += 1;
        } else if (lam - 1.0).abs() <= EIG_ONE_TOL {
            plus += 1;
        } else {
            interior.push(lam.clamp(-1.0, 1.0));
        }
    }
    (minus, plus, interior)
}

/// d_so(R I_sigma, I)^2 via the block formula; requires 0 < level(sigma) < p.
fn block_d_squared(r: &DMatrix<f64>, flipped: &[usize]) -> (usize, usize, Vec<f64>, f64) {
    let p = r.nrows();
    let keep: Vec<usize> = (0..p).filter(|i| !flipped.contains(i)).collect();
    let r1 = r.select_rows(&keep).select_columns(&keep);
    let r4 = r.select_rows(flipped).select_columns(flipped);
    let (l_plus, _, _) = split_eigs(&r1);
    let (_, l_minus, interior) = split_eigs(&r4);
    let j_star: Vec<f64> = interior.iter().map(|&lam| (-lam).acos()).collect();
    let d2 = 0.5 * (l_plus + l_minus) as f64 * PI * PI
        + j_star.iter().map(|t| t * t).sum::<f64>();
    (l_plus, l_minus, j_star, d2)
}

pub fn block_analysis(r: &Involution, sigma: &SignChange) -> Result<BlockAnalysis> {
    let p = r.p();
    if sigma.signs().len() != p {
        return Err(Error::DimensionMismatch("sigma dim differs".into()));
    }
    let ms = sigma.level();
    if ms == 0 || ms == p {
        return Err(Error::InvalidInput("block analysis needs 0 < level(sigma) < p".into()));
    }
    let rm = r.rotation().matrix();
    let flipped: Vec<usize> =
        (0..p).filter(|&i| sigma.signs()[i] == -1).collect();
    let keep: Vec<usize> = (0..p).filter(|i| !flipped.contains(i)).collect();
    let (l_plus, l_minus, j_star_angles, d_squared) = block_d_squared(rm, &flipped);

    // exactness checks: Eq. (lplm2) and agreement with the direct distance
    let level_diff = ms as i64 - r.level() as i64;
    if l_minus as i64 - l_plus as i64 != level_diff {
        return Err(Error::Numerical("l- - l+ != level(sigma) - level(R)".into()));
    }
    let direct =
        d_so(&Rotation::new(rm * sigma.matrix())?, &Rotation::identity(p))?;
    if (direct * direct - d_squared).abs() > 1e-8 {
        return Err(Error::Numerical(format!(
            "block formula {d_squared} disagrees with direct distance^2 {}",
            direct * direct
        )));
    }

    Ok(BlockAnalysis {
        sigma: sigma.clone(),
        r1: rm.select_rows(&keep).select_columns(&keep),
        r2: rm.select_rows(&keep).select_columns(&flipped),
        r4: rm.select_rows(&flipped).select_columns(&flipped),
        l_plus,
        l_minus,
        j_star_angles,
        d_squared,
    })
}

/// Result of a successful sign-change reduction.
#[derive(Debug, Clone)]
pub struct SignChangeReduction {
    pub sigma: SignChange,
    pub new_distance: f64,
}

/// Internal: best even sign change over an iterator of bitmasks.
fn best_sign_change<I: Iterator<Item = u32>>(
    r: &Involution,
    masks: I,
) -> Result<Option<(u32, f64)>> {
    let p = r.p();
    let m = r.level();
    let rm = r.rotation().matrix();
    let mut best: Option<(u32, f64)> = None;
    for mask in masks {
        let ms = mask.count_ones() as usize;
        if ms == 0 || ms % 2 != 0 {
            continue;
        }
        let d2 = if ms == p {
            // R I_sigma = -R, itself plus-minus identity or an involution of
            // level p - m (requires even p for membership in SO(p))
            0.5 * (p - m) as f64 * PI * PI
        } else {
            let flipped: Vec<usize> = (0..p).filter(|&i| mask >> i & 1 == 1).collect();
            block_d_squared(rm, &flipped).3
        };
        if best.map_or(true, |(_, b)| d2 < b) {
            best = Some((mask, d2));
        }
    }
    Ok(best)
}

/// Exhaustive search for an even sign change strictly reducing the distance
/// to the identity: Some((sigma, d_so(R I_sigma, I))) with the minimizing
/// sigma, or None when R is not sign-change reducible.
pub fn sign_change_reduce(r: &Involution) -> Result<Option<SignChangeReduction>> {
    let p = r.p();
    if p > SIGN_SEARCH_CAP {
        return Err(Error::CapExceeded(format!(
            "sign-change search capped at p <= {SIGN_SEARCH_CAP}"
        )));
    }
    let d_before = (0.5 * r.level() as f64).sqrt() * PI;
    let best = best_sign_change(r, 1..(1u32 << p))?;
    match best {
        Some((mask, d2)) if d2.sqrt() < d_before - REDUCE_TIE_TOL => {
            let signs: Vec<i8> =
                (0..p).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect();
            let sigma = SignChange::new(signs)?;
            if sigma.level() >= 2 * r.level() {
                return Err(Error::Numerical(
                    "reducing sign change violates level(sigma) < 2 level(R)".into(),
                ));
            }
            Ok(Some(SignChangeReduction { sigma, new_distance: d2.sqrt() }))
        }
        _ => Ok(None),
    }
}

/// Like `sign_change_reduce` but restricted to sign changes of one level.
pub fn sign_change_reduce_level(
    r: &Involution,
    level: usize,
) -> Result<Option<SignChangeReduction>> {
    let p = r.p();
    if p > SIGN_SEARCH_CAP {
        return Err(Error::CapExceeded(format!(
            "sign-change search capped at p <= {SIGN_SEARCH_CAP}"
        )));
    }
    let d_before = (0.5 * r.level() as f64).sqrt() * PI;
    let masks = (1..(1u32 << p)).filter(|m| m.count_ones() as usize == level);
    match best_sign_change(r, masks)? {
        Some((mask, d2)) if d2.sqrt() < d_before - REDUCE_TIE_TOL => {
            let signs: Vec<i8> =
                (0..p).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect();
            Ok(Some(SignChangeReduction {
                sigma: SignChange::new(signs)?,
                new_distance: d2.sqrt(),
            }))
        }
        _ => Ok(None),
    }
}

/// Whether some non-identity even sign change strictly shortens the rotation
/// distance of the pair: d_so(U I_sigma, V) < d_so(U, V). Works for arbitrary
/// rotations (not only involutions).
pub fn pair_sign_change_reducible(u: &Rotation, v: &Rotation) -> Result<bool> {
    let p = u.dim();
    if v.dim() != p {
        return Err(Error::DimensionMismatch("rotation dims differ".into()));
    }
    if p > SIGN_SEARCH_CAP {
        return Err(Error::CapExceeded(format!(
            "sign-change search capped at p <= {SIGN_SEARCH_CAP}"
        )));
    }
    let d0 = d_so(u, v)?;
    for mask in 1u32..(1 << p) {
        if mask.count_ones() % 2 != 0 {
            continue;
        }
        let signs: Vec<i8> = (0..p).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect();
        let ui = Rotation::new(u.matrix() * SignChange::new(signs)?.matrix())?;
        if d_so(&ui, v)? < d0 - REDUCE_TIE_TOL {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Sum over all m-subsets J of E_J E_J^T, an exact integer diagonal matrix
/// equal to C(p-1, m-1) I.
pub fn coordinate_frame_sum(m: usize, p: usize) -> Result<DMatrix<u64>> {
    if m == 0 || m > p || p > 20 {
        return Err(Error::InvalidInput("need 1 <= m <= p <= 20".into()));
    }
    let mut acc = DMatrix::<u64>::zeros(p, p);
    for j in (0..p).combinations(m) {
        for &i in &j {
            acc[(i, i)] += 1;
        }
    }
    Ok(acc)
}

/// Nearest coordinate m-plane to W.
#[derive(Debug, Clone)]
pub struct NearestPlaneReport {
    /// 0-based index set of the minimizing coordinate plane (lexicographically
    /// smallest among co-minimizers within 1e-9).
    pub j: Vec<usize>,
    /// min over J of d_gr(W, R^J).
    pub distance: f64,
    /// min over J of the sum of squared principal-angle sines.
    pub min_sin2: f64,
}

pub fn nearest_coordinate_plane(w: &Plane) -> Result<NearestPlaneReport> {
    let p = w.p();
    let m = w.m();
    let n_comb: u128 = {
        let mut c: u128 = 1;
        for i in 0..m {
            c = c * (p - i) as u128 / (i + 1) as u128;
        }
        c
    };
    if n_comb > 1_000_000 {
        return Err(Error::CapExceeded("more than 10^6 coordinate planes".into()));
    }
    let mut entries: Vec<(Vec<usize>, f64, f64)> = Vec::new();
    let mut min_d = f64::INFINITY;
    let mut min_sin2 = f64::INFINITY;
    for j in (0..p).combinations(m) {
        // cross-Gram of the orthonormal basis with E_J is just the J rows
        let cross = w.basis().select_rows(&j);
        let svd = cross.svd(false, false);
        let mut d2 = 0.0;
        let mut sin2 = 0.0;
        for &s in svd.singular_values.iter() {
            let s = if s >= 1.0 - 1e-12 { 1.0 } else { s.clamp(0.0, 1.0) };
            let a = s.acos();
            d2 += a * a;
            sin2 += 1.0 - s * s;
        }
        let d = d2.sqrt();
        min_d = min_d.min(d);
        min_sin2 = min_sin2.min(sin2);
        entries.push((j, d, sin2));
    }
    let bound = m as f64 * (1.0 - m as f64 / p as f64);
    if min_sin2 > bound + 1e-10 {
        return Err(Error::Numerical(format!(
            "covering bound violated: min sin^2 {min_sin2} > {bound}"
        )));
    }
    // lexicographically smallest J among co-minimizers (combinations iterate
    // in lex order)
    let (j, distance, _) = entries
        .into_iter()
        .find(|(_, d, _)| *d <= min_d + 1e-9)
        .expect("at least one coordinate plane");
    Ok(NearestPlaneReport { j, distance, min_sin2 })
}

/// The 2-plane W_p of the first counterexample family: spanned by the
/// normalized sums of the first k and next k coordinates, k = floor(p/2).
pub fn example_plane_wp(p: usize) -> Result<Plane> {
    if p < 4 {
        return Err(Error::InvalidInput("example plane W_p requires p >= 4".into()));
    }
    let k = p / 2;
    let mut b = DMatrix::zeros(p, 2);
    let c = 1.0 / (k as f64).sqrt();
    for i in 0..k {
        b[(i, 0)] = c;
        b[(k + i, 1)] = c;
    }
    Plane::new(b)
}

/// Closed-form min distance from W_p to the coordinate 2-planes:
/// sqrt(2) * arccos(c_p) with c_p^2 = 2/p (even p) or 2/(p-1) (odd p).
pub fn wp_distance_closed_form(p: usize) -> f64 {
    let denom = if p % 2 == 0 { p } else { p - 1 } as f64;
    2f64.sqrt() * (2.0 / denom).sqrt().acos()
}

/// The 2-plane W'_p (p odd) of the second counterexample family: the
/// normalized all-ones vector together with the first-half-minus-second-half
/// contrast.
pub fn example_plane_wp_prime(p: usize) -> Result<Plane> {
    if p < 5 || p % 2 == 0 {
        return Err(Error::InvalidInput("example plane W'_p requires odd p >= 5".into()));
    }
    let k = p / 2;
    let mut b = DMatrix::zeros(p, 2);
    let cv = 1.0 / (p as f64).sqrt();
    let cw = 1.0 / ((p - 1) as f64).sqrt();
    for i in 0..p {
        b[(i, 0)] = cv;
    }
    for i in 0..k {
        b[(i, 1)] = cw;
        b[(k + i, 1)] = -cw;
    }
    Plane::new(b)
}

/// Case III squared singular values for W'_p: lambda_{+-}(p) =
/// 1/p + 1/(2(p-1)) +- sqrt(1/p^2 + 1/(4(p-1)^2)).
pub fn wp_prime_case3_squared_singular_values(p: usize) -> (f64, f64) {
    let a = 1.0 / p as f64;
    let b = 1.0 / (2.0 * (p - 1) as f64);
    let root = (a * a + b * b).sqrt();
    (a + b + root, a + b - root)
}
