//! Geodesics in M(p), smooth scaling-rotation (SSR) curve evaluation
//! chi(t) = F(gamma(t)), the immersion dichotomy, geodesic antipodality,
//! curve-equality testing for minimal pairs, and Type I / Type II
//! non-uniqueness classification of MSSR curves.
//!
//! Curve equality follows the identity-component form of the equality
//! criterion (R ranging over G_{D,Lambda_1}^0 rather than the full
//! stabilizer); the two forms coincide after absorbing component
//! representatives into the signed-permutation factor.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix_core::{normal_form, so_exp, so_log, LogKind, SkewMatrix};
use crate::partitions::{eigen_decompose, partition_of_diag, DiagPos, EigenPair};
use crate::signed_perms::SignedPerm;
use crate::sr_metric::{d_sr, MetricConfig, MinimalPairRecord};

use itertools::Itertools;
use std::f64::consts::PI;

/// A geodesic t -> (e^{tA} U, e^{tL} D) of M(p).
#[derive(Debug, Clone)]
pub struct Geodesic {
    pub base: EigenPair,
    pub rot_vel: SkewMatrix,
    /// Diagonal of L.
    pub scale_vel: Vec<f64>,
    pub interval: (f64, f64),
}

impl Geodesic {
    pub fn new(
        base: EigenPair,
        rot_vel: SkewMatrix,
        scale_vel: Vec<f64>,
        interval: (f64, f64),
    ) -> Result<Self> {
        let p = base.dim();
        if rot_vel.dim() != p || scale_vel.len() != p {
            return Err(Error::DimensionMismatch("geodesic velocity dims differ".into()));
        }
        if !(interval.0 < interval.1) {
            return Err(Error::InvalidInput("geodesic interval is degenerate".into()));
        }
        Ok(Self { base, rot_vel, scale_vel, interval })
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.interval.0 - 1e-12 && t <= self.interval.1 + 1e-12
    }

    /// gamma(t) in M(p).
    pub fn eval(&self, t: f64) -> Result<EigenPair> {
        if !self.contains(t) {
            return Err(Error::InvalidInput(format!("t = {t} outside geodesic interval")));
        }
        let rot = so_exp(&SkewMatrix::new(self.rot_vel.matrix() * t)?)
            .compose(self.base.rotation())?;
        let scale = DiagPos::new(
            self.base
                .scale()
                .entries()
                .iter()
                .zip(&self.scale_vel)
                .map(|(&d, &l)| d * (t * l).exp())
                .collect(),
        )?;
        Ok(EigenPair::new(rot, scale))
    }
}

/// Samples of an SSR curve chi = F o gamma.
#[derive(Debug, Clone)]
pub struct CurveSample {
    pub times: Vec<f64>,
    pub values: Vec<DMatrix<f64>>,
    pub derivative_norms: Vec<f64>,
}

/// Report of `classify`.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct UniquenessReport {
    pub pair_count: usize,
    pub curve_count: usize,
    pub type1: bool,
    pub type2: bool,
    pub antipodal_pairs: usize,
}

/// All minimal geodesics of M(p) from `a` to `b` over [0, 1]: the scale
/// velocity is L = log(Lambda D^{-1}) and A ranges over the minimal-norm
/// logarithms of V U^{-1}. A single geodesic unless V U^{-1} is an
/// involution, in which case each pi-angle 2-plane contributes an
/// independent orientation choice (a finite representative subset of the
/// minimal logs when angle multiplicities make the full set a continuum).
pub fn connecting_geodesic(a: &EigenPair, b: &EigenPair) -> Result<Vec<Geodesic>> {
    let p = a.dim();
    if b.dim() != p {
        return Err(Error::DimensionMismatch("endpoint dims differ".into()));
    }
    let scale_vel: Vec<f64> = a
        .scale()
        .entries()
        .iter()
        .zip(b.scale().entries())
        .map(|(&d, &l)| (l / d).ln())
        .collect();
    let m = b.rotation().compose(&a.rotation().transpose())?;
    let log = so_log(&m)?;
    let logs: Vec<SkewMatrix> = if log.kind == LogKind::Unique {
        vec![log.skew]
    } else {
        // involution: flip each pi-plane orientation independently
        let nf = normal_form(&m)?;
        let pi_planes: Vec<usize> = nf
            .angles
            .iter()
            .take(p / 2)
            .enumerate()
            .filter(|(_, &th)| th > PI - 1e-6)
            .map(|(i, _)| i)
            .collect();
        if pi_planes.len() > 12 {
            return Err(Error::CapExceeded("too many pi-planes to enumerate".into()));
        }
        let mut out = Vec::new();
        for combo in 0u32..(1 << pi_planes.len()) {
            let mut block = DMatrix::zeros(p, p);
            for (i, &th) in nf.angles.iter().take(p / 2).enumerate() {
                let sign = match pi_planes.iter().position(|&q| q == i) {
                    Some(slot) if combo >> slot & 1 == 1 => -1.0,
                    _ => 1.0,
                };
                block[(2 * i, 2 * i + 1)] = -sign * th;
                block[(2 * i + 1, 2 * i)] = sign * th;
            }
            out.push(SkewMatrix::new(&nf.frame * block * nf.frame.transpose())?);
        }
        out
    };
    let mut geos = Vec::with_capacity(logs.len());
    for a_skew in logs {
        let end = so_exp(&a_skew).compose(a.rotation())?;
        if (end.matrix() - b.rotation().matrix()).norm() > 1e-8 * p as f64 {
            return Err(Error::Numerical("geodesic endpoint reconstruction failed".into()));
        }
        geos.push(Geodesic::new(
            a.clone(),
            a_skew,
            scale_vel.clone(),
            (0.0, 1.0),
        )?);
    }
    Ok(geos)
}

/// chi(t) = F(gamma(t)).
pub fn ssr_eval(gamma: &Geodesic, t: f64) -> Result<DMatrix<f64>> {
    Ok(gamma.eval(t)?.compose())
}

/// chi'(t) = e^{tA} ( [A, U Lambda(t) U^T] + U L Lambda(t) U^T ) e^{-tA}
/// with Lambda(t) = e^{tL} D.
pub fn curve_derivative(gamma: &Geodesic, t: f64) -> Result<DMatrix<f64>> {
    if !gamma.contains(t) {
        return Err(Error::InvalidInput(format!("t = {t} outside geodesic interval")));
    }
    let u = gamma.base.rotation().matrix();
    let a = gamma.rot_vel.matrix();
    let lam_t: Vec<f64> = gamma
        .base
        .scale()
        .entries()
        .iter()
        .zip(&gamma.scale_vel)
        .map(|(&d, &l)| d * (t * l).exp())
        .collect();
    let x = u * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(lam_t.clone())) * u.transpose();
    let llam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(
        lam_t.iter().zip(&gamma.scale_vel).map(|(&v, &l)| l * v).collect(),
    ));
    let inner = a * &x - &x * a + u * llam * u.transpose();
    let e = so_exp(&SkewMatrix::new(a * t)?);
    Ok(e.matrix() * inner * e.matrix().transpose())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImmersionClass {
    Constant,
    Immersion,
}

/// Checks the immersion dichotomy of SSR curves on a uniform grid: either
/// every sampled derivative vanishes (and the image is constant) or none
/// does. A mixed outcome is a numerical-breakdown diagnostic, not a valid
/// state.
pub fn is_immersion(gamma: &Geodesic, grid_size: usize) -> Result<ImmersionClass> {
    if grid_size < 2 {
        return Err(Error::InvalidInput("grid_size must be >= 2".into()));
    }
    let (t0, t1) = gamma.interval;
    let chi0 = ssr_eval(gamma, t0)?;
    let mut all_zero = true;
    let mut all_positive = true;
    let mut image_constant = true;
    for i in 0..grid_size {
        let t = t0 + (t1 - t0) * i as f64 / (grid_size - 1) as f64;
        let norm = curve_derivative(gamma, t)?.norm();
        if norm <= 1e-9 {
            all_positive = false;
        } else {
            all_zero = false;
        }
        if (ssr_eval(gamma, t)? - &chi0).norm() > 1e-8 * (1.0 + chi0.norm()) {
            image_constant = false;
        }
    }
    match (all_zero && image_constant, all_positive) {
        (true, _) => Ok(ImmersionClass::Constant),
        (false, true) => Ok(ImmersionClass::Immersion),
        _ => Err(Error::Numerical(
            "mixed immersion diagnostic: derivative vanishes on part of the grid".into(),
        )),
    }
}

/// True iff V^{-1} U is an involution (one endpoint lies in the rotation
/// cut-locus of the other).
pub fn geodesically_antipodal(a: &EigenPair, b: &EigenPair) -> bool {
    if a.dim() != b.dim() {
        return false;
    }
    b.rotation()
        .transpose()
        .compose(a.rotation())
        .map(|r| r.is_involution())
        .unwrap_or(false)
}

/// Enumerates the permutation parts of K_J (block-preserving permutations)
/// for a partition J, in the `SignedPerm::perm` convention (slot i maps to
/// slot perm[i]).
fn block_permutations(j: &crate::partitions::SetPartition) -> Vec<Vec<usize>> {
    let p = j.p();
    let per_block: Vec<Vec<Vec<usize>>> = j
        .blocks()
        .iter()
        .map(|block| block.iter().copied().permutations(block.len()).collect())
        .collect();
    per_block
        .iter()
        .multi_cartesian_product()
        .map(|choice| {
            let mut perm = vec![0usize; p];
            for (block, images) in j.blocks().iter().zip(choice) {
                for (&src, &dst) in block.iter().zip(images.iter()) {
                    perm[src] = dst;
                }
            }
            perm
        })
        .collect()
}

fn perms_equal_diag(out_of: &[f64], target: &[f64]) -> bool {
    out_of
        .iter()
        .zip(target)
        .all(|(&a, &b)| (a - b).abs() <= 1e-8 * a.abs().max(b.abs()).max(1.0))
}

/// Membership in G_{D,Lambda}^0: block-diagonal with respect to the common
/// refinement of J_D and J_Lambda, every diagonal block of determinant +1.
fn in_g0(r: &DMatrix<f64>, jd: &crate::partitions::SetPartition,
         jl: &crate::partitions::SetPartition) -> Result<bool> {
    let jc = jd.common_refinement(jl)?;
    let p = r.nrows();
    for i in 0..p {
        for k in 0..p {
            if jc.block_of(i) != jc.block_of(k) && r[(i, k)].abs() > 1e-8 {
                return Ok(false);
            }
        }
    }
    for block in jc.blocks() {
        let sub = r.select_rows(block.as_slice()).select_columns(block.as_slice());
        if sub.determinant() < 0.0 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Decides whether two minimal-pair records (with chosen connecting
/// geodesics) project to the same MSSR curve. Both records must connect the
/// same X, Y with first endpoints in the fiber of (U, D) = `base`.
///
/// Condition (i): equal conjugating rotations V_2 U_2^{-1} = V_1 U_1^{-1}
/// in the non-antipodal case, equal chosen initial velocities A_2 = A_1 in
/// the antipodal case. Condition (ii): some g in the signed-permutation
/// group with pi_g . D = D, pi_g . Lambda_1 = Lambda_2 and
/// R_{U,1}^{-1} R_{U,2} P_g in G_{D,Lambda_1}^0.
pub fn curves_equal(
    rec1: &MinimalPairRecord,
    geo1: &Geodesic,
    rec2: &MinimalPairRecord,
    geo2: &Geodesic,
    base: &EigenPair,
    cfg: &MetricConfig,
) -> Result<bool> {
    let p = base.dim();
    if (rec1.endpoints.0.compose() - rec2.endpoints.0.compose()).norm() > 1e-6
        || (rec1.endpoints.1.compose() - rec2.endpoints.1.compose()).norm() > 1e-6
    {
        return Err(Error::InvalidInput(
            "records reference different endpoint fibers".into(),
        ));
    }

    // condition (i)
    let antip1 = geodesically_antipodal(&rec1.endpoints.0, &rec1.endpoints.1);
    let antip2 = geodesically_antipodal(&rec2.endpoints.0, &rec2.endpoints.1);
    if antip1 != antip2 {
        return Ok(false);
    }
    let cond_i = if antip1 {
        (geo1.rot_vel.matrix() - geo2.rot_vel.matrix()).norm() <= 1e-8 * p as f64
    } else {
        let m1 = rec1.endpoints.1.rotation().matrix()
            * rec1.endpoints.0.rotation().matrix().transpose();
        let m2 = rec2.endpoints.1.rotation().matrix()
            * rec2.endpoints.0.rotation().matrix().transpose();
        (m1 - m2).norm() <= 1e-8 * p as f64
    };
    if !cond_i {
        return Ok(false);
    }

    // condition (ii), by enumeration over g with pi_g . D = D
    let d = base.scale();
    let jd = partition_of_diag(d, cfg.rtol);
    let l1 = rec1.endpoints.1.scale();
    let l2 = rec2.endpoints.1.scale();
    let jl1 = partition_of_diag(l1, cfg.rtol);
    let r12 = rec1.r_u.matrix().transpose() * rec2.r_u.matrix();
    for perm in block_permutations(&jd) {
        // pi_g . Lambda_1 = Lambda_2
        let mut permuted = vec![0.0; p];
        for (i, &pi) in perm.iter().enumerate() {
            permuted[pi] = l1.entries()[i];
        }
        if !perms_equal_diag(&permuted, l2.entries()) {
            continue;
        }
        let perm_sign = SignedPerm::from_parts(vec![1; p], perm.clone())
            .map(|g| g.sgn_perm())
            .unwrap_or(1);
        for mask in 0u32..(1 << p) {
            let signs: Vec<i8> =
                (0..p).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect();
            let sigma_prod: i8 = signs.iter().product();
            if sigma_prod != perm_sign {
                continue; // tsgn must be +1
            }
            let g = SignedPerm::from_parts(signs, perm.clone())?;
            let candidate = &r12 * g.matrix();
            if in_g0(&candidate, &jd, &jl1)? {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// Pointwise fallback comparison on a 64-point grid of [0, 1].
pub fn curves_grid_equal(geo1: &Geodesic, geo2: &Geodesic) -> Result<bool> {
    let mut max_diff: f64 = 0.0;
    for i in 0..64 {
        let t = i as f64 / 63.0;
        let diff = (ssr_eval(geo1, t)? - ssr_eval(geo2, t)?).norm();
        max_diff = max_diff.max(diff);
    }
    Ok(max_diff <= 1e-6)
}

/// The action of g on a geodesic: base g . (U, D), unchanged A, permuted L.
/// Satisfies F o gamma = F o (g . gamma) pointwise.
pub fn geodesic_act(g: &SignedPerm, gamma: &Geodesic) -> Result<Geodesic> {
    let base = g.act(&gamma.base)?;
    let mut scale_vel = vec![0.0; gamma.scale_vel.len()];
    for (i, &pi) in g.perm().iter().enumerate() {
        scale_vel[pi] = gamma.scale_vel[i];
    }
    Geodesic::new(base, gamma.rot_vel.clone(), scale_vel, gamma.interval)
}

/// Classifies the non-uniqueness of MSSR curves between X and Y: counts
/// distinct minimal pairs and distinct minimal curves, and flags Type I
/// (distinct minimal pairs giving distinct curves) and Type II (a single
/// geodesically antipodal minimal pair giving distinct curves).
pub fn classify(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    cfg: &MetricConfig,
) -> Result<UniquenessReport> {
    let p = x.nrows();
    if p > cfg.cap_p {
        return Err(Error::CapExceeded(format!("p = {p} exceeds cap {}", cfg.cap_p)));
    }
    let (_, records) = d_sr(x, y, cfg)?;
    let base = eigen_decompose(x, 1e-8)?;

    // candidate curves: every connecting geodesic of every co-minimal record
    let mut candidates: Vec<(usize, Geodesic)> = Vec::new();
    for (ri, rec) in records.iter().enumerate() {
        for geo in connecting_geodesic(&rec.endpoints.0, &rec.endpoints.1)? {
            candidates.push((ri, geo));
        }
    }

    let antipodal_pairs = records
        .iter()
        .filter(|r| geodesically_antipodal(&r.endpoints.0, &r.endpoints.1))
        .count();

    // distinct minimal pairs (dedupe endpoint data)
    let mut pair_reps: Vec<usize> = Vec::new();
    let mut pair_of_record: Vec<usize> = vec![0; records.len()];
    for (ri, rec) in records.iter().enumerate() {
        let found = pair_reps.iter().position(|&pj| {
            let other = &records[pj];
            (rec.endpoints.0.rotation().matrix() - other.endpoints.0.rotation().matrix()).norm()
                < 1e-8
                && (rec.endpoints.1.rotation().matrix()
                    - other.endpoints.1.rotation().matrix())
                .norm()
                    < 1e-8
                && perms_equal_diag(
                    rec.endpoints.1.scale().entries(),
                    other.endpoints.1.scale().entries(),
                )
        });
        match found {
            Some(slot) => pair_of_record[ri] = slot,
            None => {
                pair_of_record[ri] = pair_reps.len();
                pair_reps.push(ri);
            }
        }
    }

    // curve classes
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for (ci, (ri, geo)) in candidates.iter().enumerate() {
        let mut placed = false;
        for class in classes.iter_mut() {
            let (rj, geo_j) = &candidates[class[0]];
            let equal = match curves_equal(&records[*ri], geo, &records[*rj], geo_j, &base, cfg)
            {
                Ok(e) => e,
                Err(_) => curves_grid_equal(geo, geo_j)?,
            };
            if equal {
                class.push(ci);
                placed = true;
                break;
            }
        }
        if !placed {
            classes.push(vec![ci]);
        }
    }

    // Type I: two distinct minimal pairs whose curves land in different classes
    let mut type1 = false;
    'outer: for (ci, (ri, _)) in candidates.iter().enumerate() {
        for (cj, (rj, _)) in candidates.iter().enumerate().skip(ci + 1) {
            if pair_of_record[*ri] == pair_of_record[*rj] {
                continue;
            }
            let class_i = classes.iter().position(|c| c.contains(&ci));
            let class_j = classes.iter().position(|c| c.contains(&cj));
            if class_i != class_j {
                type1 = true;
                break 'outer;
            }
        }
    }
    // Type II: one antipodal pair whose own geodesics split across classes
    let mut type2 = false;
    for (ri, rec) in records.iter().enumerate() {
        if !geodesically_antipodal(&rec.endpoints.0, &rec.endpoints.1) {
            continue;
        }
        let own_classes: std::collections::BTreeSet<usize> = candidates
            .iter()
            .enumerate()
            .filter(|(_, (r, _))| *r == ri)
            .map(|(ci, _)| classes.iter().position(|c| c.contains(&ci)).unwrap())
            .collect();
        if own_classes.len() > 1 {
            type2 = true;
            break;
        }
    }

    Ok(UniquenessReport {
        pair_count: pair_reps.len(),
        curve_count: classes.len(),
        type1,
        type2,
        antipodal_pairs,
    })
}

/// Uniform samples of the SSR curve of a geodesic.
pub fn sample_curve(gamma: &Geodesic, n: usize) -> Result<CurveSample> {
    if n < 2 {
        return Err(Error::InvalidInput("need at least 2 samples".into()));
    }
    let (t0, t1) = gamma.interval;
    let mut times = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    let mut derivative_norms = Vec::with_capacity(n);
    for i in 0..n {
        let t = t0 + (t1 - t0) * i as f64 / (n - 1) as f64;
        times.push(t);
        values.push(ssr_eval(gamma, t)?);
        derivative_norms.push(curve_derivative(gamma, t)?.norm());
    }
    Ok(CurveSample { times, values, derivative_norms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix_core::Rotation;
    use crate::sampling::{random_eigenpair_top, random_skew, random_spd_top};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rot2(theta: f64) -> Rotation {
        Rotation::new(DMatrix::from_row_slice(
            2,
            2,
            &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()],
        ))
        .unwrap()
    }

    #[test]
    fn connecting_constant() {
        let a = EigenPair::new(Rotation::identity(3), DiagPos::new(vec![1.0, 2.0, 3.0]).unwrap());
        let geos = connecting_geodesic(&a, &a).unwrap();
        assert_eq!(geos.len(), 1);
        assert!(geos[0].rot_vel.norm() < 1e-12);
        assert!(geos[0].scale_vel.iter().all(|&l| l.abs() < 1e-12));
    }

    #[test]
    fn connecting_p2_closed_form() {
        let theta = 0.6;
        let a = EigenPair::new(Rotation::identity(2), DiagPos::new(vec![1.0, 1.0]).unwrap());
        let e = 1f64.exp();
        let b = EigenPair::new(rot2(theta), DiagPos::new(vec![e, e]).unwrap());
        let geos = connecting_geodesic(&a, &b).unwrap();
        assert_eq!(geos.len(), 1);
        let g = &geos[0];
        assert_abs_diff_eq!(g.rot_vel.matrix()[(1, 0)], theta, epsilon = 1e-10);
        assert!(g.scale_vel.iter().all(|&l| (l - 1.0).abs() < 1e-12));
    }

    #[test]
    fn connecting_involution_multiplicity() {
        let d = DiagPos::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let a = EigenPair::new(Rotation::identity(4), d.clone());
        let v = Rotation::new(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            -1.0, -1.0, 1.0, 1.0,
        ])))
        .unwrap();
        let b = EigenPair::new(v, d);
        let geos = connecting_geodesic(&a, &b).unwrap();
        assert!(geos.len() >= 2, "expected multiple minimal logs");
        for g in &geos {
            assert_abs_diff_eq!(g.rot_vel.norm(), 2f64.sqrt() * PI, epsilon = 1e-9);
            // endpoint reached
            let end = g.eval(1.0).unwrap();
            assert!((end.rotation().matrix() - b.rotation().matrix()).norm() < 1e-8);
        }
        // the logs are pairwise distinct
        for i in 0..geos.len() {
            for j in i + 1..geos.len() {
                assert!(
                    (geos[i].rot_vel.matrix() - geos[j].rot_vel.matrix()).norm() > 1e-6
                );
            }
        }
    }

    #[test]
    fn ssr_eval_basics() {
        let u = rot2(0.3);
        let d = DiagPos::new(vec![2.0, 5.0]).unwrap();
        let base = EigenPair::new(u.clone(), d.clone());
        let g = Geodesic::new(
            base.clone(),
            SkewMatrix::zeros(2),
            vec![0.3, -0.2],
            (0.0, 1.0),
        )
        .unwrap();
        assert!((ssr_eval(&g, 0.0).unwrap() - base.compose()).norm() < 1e-12);
        // A = 0: chi(t) = U e^{tL} D U^T
        let t: f64 = 0.7;
        let expect = u.matrix()
            * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
                2.0 * (0.3 * t).exp(),
                5.0 * (-0.2f64 * t).exp(),
            ]))
            * u.matrix().transpose();
        assert!((ssr_eval(&g, t).unwrap() - expect).norm() < 1e-12);
        assert!(ssr_eval(&g, 2.0).is_err());
    }

    #[test]
    fn worked_p2_curve_self_intersections() {
        // U(t) = exp(t (pi/2) J), D(t) = diag(e^{1-t}, e^t):
        // chi(t1) = chi(t2), t1 < t2, iff t1 = -n and t2 = n + 1
        let base = EigenPair::new(
            Rotation::identity(2),
            DiagPos::new(vec![1f64.exp(), 1.0]).unwrap(),
        );
        let j = SkewMatrix::new(DMatrix::from_row_slice(2, 2, &[0.0, -PI / 2.0, PI / 2.0, 0.0]))
            .unwrap();
        let g = Geodesic::new(base, j, vec![-1.0, 1.0], (-5.0, 5.0)).unwrap();
        for n in 0..3 {
            let t1 = -(n as f64);
            let t2 = n as f64 + 1.0;
            let diff = (ssr_eval(&g, t1).unwrap() - ssr_eval(&g, t2).unwrap()).norm();
            assert!(diff < 1e-9, "n = {n}: {diff}");
        }
        for (t1, t2) in [(0.0, 0.5), (-1.0, 1.5), (0.25, 1.25), (-0.5, 0.75)] {
            let diff = (ssr_eval(&g, t1).unwrap() - ssr_eval(&g, t2).unwrap()).norm();
            assert!(diff > 1e-3, "unexpected match at ({t1}, {t2})");
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let p = rng.gen_range(2..5);
            let base = random_eigenpair_top(p, &mut rng);
            let a = random_skew(p, &mut rng, 1.0);
            let l: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let g = Geodesic::new(base, a, l, (0.0, 1.0)).unwrap();
            let t = 0.3;
            let h = 1e-6;
            let fd = (ssr_eval(&g, t + h).unwrap() - ssr_eval(&g, t - h).unwrap()) / (2.0 * h);
            let an = curve_derivative(&g, t).unwrap();
            assert!((&fd - &an).norm() <= 1e-6 * (1.0 + an.norm()), "{}", (fd - &an).norm());
        }
    }

    #[test]
    fn derivative_pure_scaling_identity() {
        let g = Geodesic::new(
            EigenPair::new(Rotation::identity(3), DiagPos::new(vec![1.0; 3]).unwrap()),
            SkewMatrix::zeros(3),
            vec![1.0; 3],
            (0.0, 1.0),
        )
        .unwrap();
        let t = 0.4;
        let d = curve_derivative(&g, t).unwrap();
        let expect = DMatrix::from_diagonal_element(3, 3, t.exp());
        assert!((d - expect).norm() < 1e-12);
    }

    #[test]
    fn immersion_examples() {
        // constant geodesic
        let c = Geodesic::new(
            EigenPair::new(Rotation::identity(3), DiagPos::new(vec![1.0, 2.0, 3.0]).unwrap()),
            SkewMatrix::zeros(3),
            vec![0.0; 3],
            (0.0, 1.0),
        )
        .unwrap();
        assert_eq!(is_immersion(&c, 16).unwrap(), ImmersionClass::Constant);
        // [A, X] = 0 with X = I: rotation moves inside the fiber only
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let spin = Geodesic::new(
            EigenPair::new(Rotation::identity(3), DiagPos::new(vec![2.0; 3]).unwrap()),
            random_skew(3, &mut rng, 1.0),
            vec![0.0; 3],
            (0.0, 1.0),
        )
        .unwrap();
        assert_eq!(is_immersion(&spin, 16).unwrap(), ImmersionClass::Constant);
        // generic
        let g = Geodesic::new(
            random_eigenpair_top(3, &mut rng),
            random_skew(3, &mut rng, 1.0),
            vec![0.5, -0.3, 0.1],
            (0.0, 1.0),
        )
        .unwrap();
        assert_eq!(is_immersion(&g, 16).unwrap(), ImmersionClass::Immersion);
    }

    #[test]
    fn immersion_dichotomy_never_mixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for i in 0..500 {
            let p = 2 + i % 3;
            let base = random_eigenpair_top(p, &mut rng);
            let a = random_skew(p, &mut rng, 2.0);
            let l: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let g = Geodesic::new(base, a, l, (0.0, 1.0)).unwrap();
            is_immersion(&g, 12).expect("dichotomy violated");
        }
    }

    #[test]
    fn endpoint_consistency_500() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        for i in 0..500 {
            let p = 2 + i % 3;
            let a = random_eigenpair_top(p, &mut rng);
            let b = random_eigenpair_top(p, &mut rng);
            for g in connecting_geodesic(&a, &b).unwrap() {
                let end = g.eval(1.0).unwrap();
                assert!((end.compose() - b.compose()).norm() < 1e-8 * (1.0 + b.compose().norm()));
            }
        }
    }

    #[test]
    fn projection_invariant_under_group_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let p = 3;
        for g_elem in crate::signed_perms::enumerate_tsp_plus(p, 8).unwrap().iter().step_by(7) {
            let base = random_eigenpair_top(p, &mut rng);
            let a = random_skew(p, &mut rng, 1.0);
            let l: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let gamma = Geodesic::new(base, a, l, (0.0, 1.0)).unwrap();
            let moved = geodesic_act(g_elem, &gamma).unwrap();
            for i in 0..8 {
                let t = i as f64 / 7.0;
                let diff = (ssr_eval(&gamma, t).unwrap() - ssr_eval(&moved, t).unwrap()).norm();
                assert!(diff < 1e-9, "t = {t}: {diff}");
            }
        }
    }

    #[test]
    fn antipodality_examples() {
        let d4 = DiagPos::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let a = EigenPair::new(Rotation::identity(4), d4.clone());
        assert!(!geodesically_antipodal(&a, &a));
        let v = Rotation::new(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            -1.0, -1.0, 1.0, 1.0,
        ])))
        .unwrap();
        assert!(geodesically_antipodal(&EigenPair::new(v, d4.clone()), &a));
        let d2 = DiagPos::new(vec![1.0, 2.0]).unwrap();
        let b = EigenPair::new(rot2(PI / 3.0), d2.clone());
        let e = EigenPair::new(Rotation::identity(2), d2);
        assert!(!geodesically_antipodal(&b, &e));
    }

    #[test]
    fn curves_equal_reflexive_and_coset_distinction() {
        let cfg = MetricConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let x = random_spd_top(3, &mut rng);
        let y = random_spd_top(3, &mut rng);
        let base = eigen_decompose(&x, 1e-8).unwrap();
        let (_, records) = d_sr(&x, &y, &cfg).unwrap();
        let rec = &records[0];
        let geo = &connecting_geodesic(&rec.endpoints.0, &rec.endpoints.1).unwrap()[0];
        assert!(curves_equal(rec, geo, rec, geo, &base, &cfg).unwrap());
    }

    #[test]
    fn curves_equal_antipodal_distinct_logs() {
        let cfg = MetricConfig::default();
        let d = DiagPos::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let u = Rotation::identity(4);
        let v = Rotation::new(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            -1.0, -1.0, 1.0, 1.0,
        ])))
        .unwrap();
        let a = EigenPair::new(u.clone(), d.clone());
        let b = EigenPair::new(v, d.clone());
        let rec = MinimalPairRecord {
            rep: SignedPerm::identity(4),
            r_u: Rotation::identity(4),
            r_v: Rotation::identity(4),
            endpoints: (a.clone(), b.clone()),
            cost_squared: 0.0,
            converged: true,
        };
        let geos = connecting_geodesic(&a, &b).unwrap();
        assert!(geos.len() >= 2);
        let base = a.clone();
        assert!(curves_equal(&rec, &geos[0], &rec, &geos[0], &base, &cfg).unwrap());
        assert!(!curves_equal(&rec, &geos[0], &rec, &geos[1], &base, &cfg).unwrap());
    }

    #[test]
    fn classify_identical_inputs() {
        let cfg = MetricConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let x = random_spd_top(3, &mut rng);
        let report = classify(&x, &x, &cfg).unwrap();
        assert_eq!(report.curve_count, 1);
        assert!(!report.type1);
        assert!(!report.type2);
    }

    #[test]
    fn classify_p2_symmetric_swap_type1() {
        // with k = 1/4 the two opposite quarter-turn swaps are co-minimal and
        // trace distinct curves
        let cfg = MetricConfig::with_k(0.25);
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let y = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let report = classify(&x, &y, &cfg).unwrap();
        assert!(report.pair_count >= 2);
        assert!(report.curve_count >= 2);
        assert!(report.type1);
        assert!(!report.type2);
    }

    #[test]
    fn classify_no_type2_below_p5() {
        let cfg = MetricConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(38);
        for p in [2usize, 3, 4] {
            for _ in 0..3 {
                let x = random_spd_top(p, &mut rng);
                let y = random_spd_top(p, &mut rng);
                let report = classify(&x, &y, &cfg).unwrap();
                assert!(!report.type2, "p = {p}");
                if report.type2 {
                    assert!(report.antipodal_pairs >= 1);
                }
            }
        }
    }

    #[test]
    fn curves_equal_agrees_with_grid_p3() {
        // specialization with A2 = A1: the algebraic test and the pointwise
        // grid comparison agree on random top-stratum p=3 instances
        let cfg = MetricConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(39);
        let mut checked = 0;
        for _ in 0..100 {
            let x = random_spd_top(3, &mut rng);
            let y = random_spd_top(3, &mut rng);
            let base = eigen_decompose(&x, 1e-8).unwrap();
            let (_, records) = d_sr(&x, &y, &cfg).unwrap();
            let mut cands = Vec::new();
            for rec in &records {
                for geo in connecting_geodesic(&rec.endpoints.0, &rec.endpoints.1).unwrap() {
                    cands.push((rec.clone(), geo));
                }
            }
            for i in 0..cands.len() {
                for j in i..cands.len() {
                    let alg = curves_equal(
                        &cands[i].0,
                        &cands[i].1,
                        &cands[j].0,
                        &cands[j].1,
                        &base,
                        &cfg,
                    )
                    .unwrap();
                    // 100-point grid
                    let mut max_diff: f64 = 0.0;
                    for s in 0..100 {
                        let t = s as f64 / 99.0;
                        max_diff = max_diff.max(
                            (ssr_eval(&cands[i].1, t).unwrap()
                                - ssr_eval(&cands[j].1, t).unwrap())
                            .norm(),
                        );
                    }
                    let geom = max_diff <= 1e-7;
                    assert_eq!(alg, geom, "max_diff = {max_diff}");
                    checked += 1;
                }
            }
        }
        assert!(checked >= 100);
    }

    #[test]
    fn sample_curve_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let g = Geodesic::new(
            random_eigenpair_top(3, &mut rng),
            random_skew(3, &mut rng, 0.5),
            vec![0.1, 0.2, 0.3],
            (0.0, 1.0),
        )
        .unwrap();
        let s = sample_curve(&g, 16).unwrap();
        assert_eq!(s.times.len(), 16);
        assert_eq!(s.values.len(), 16);
        assert_eq!(s.derivative_norms.len(), 16);
        for v in &s.values {
            // symmetric positive-definite
            assert!((v - v.transpose()).norm() < 1e-9);
            assert!(v.clone().symmetric_eigen().eigenvalues.iter().all(|&e| e > 0.0));
        }
    }
}
