//! Dense small-matrix numerics for SO(p): exponential, minimal-norm logarithm,
//! normal form, geodesic distance, and principal angles between subspaces.
//!
//! The geodesic distance used throughout is the bi-invariant one induced by
//! the inner product g(A, B) = -tr(AB)/2 on skew-symmetric matrices, so that
//! `d_so(U, V)^2 = ||log(U^T V)||_F^2 / 2` equals the sum of squared
//! normal-form angles of `U^T V`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Orthogonality tolerance for rotation validation.
pub const EPS_ORTHO: f64 = 1e-10;
/// Skew-symmetry tolerance.
pub const EPS_SKEW: f64 = 1e-10;
/// Reconstruction tolerance for normal forms and logs.
pub const EPS_RECON: f64 = 1e-8;
/// Involution detection tolerance on ||R^2 - I||_F.
pub const EPS_INV: f64 = 1e-8;

/// Eigenvalues of the symmetric part within this distance of +-1 are snapped
/// exactly; keeps arccos well conditioned at the endpoints.
const SNAP_TOL: f64 = 1e-10;
/// Eigenvalues closer than this are treated as one angle cluster.
const CLUSTER_TOL: f64 = 1e-8;

/// A p x p rotation matrix (orthogonal with determinant +1).
#[derive(Debug, Clone, PartialEq)]
pub struct Rotation {
    mat: DMatrix<f64>,
}

impl Rotation {
    /// Validates orthogonality and determinant before wrapping.
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::InvalidInput("rotation must be square".into()));
        }
        let p = mat.nrows();
        let gram_err = (mat.transpose() * &mat - DMatrix::identity(p, p)).norm();
        if gram_err > EPS_ORTHO * (p as f64) {
            return Err(Error::InvalidInput(format!(
                "matrix is not orthogonal (||R^T R - I|| = {gram_err:.3e})"
            )));
        }
        let det = mat.determinant();
        if (det - 1.0).abs() > EPS_ORTHO * (p as f64) {
            return Err(Error::InvalidInput(format!(
                "matrix has determinant {det}, expected +1"
            )));
        }
        Ok(Self { mat })
    }

    pub fn identity(p: usize) -> Self {
        Self { mat: DMatrix::identity(p, p) }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }

    pub fn transpose(&self) -> Rotation {
        Rotation { mat: self.mat.transpose() }
    }

    /// Product of two rotations (stays in SO(p)).
    pub fn compose(&self, other: &Rotation) -> Result<Rotation> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(format!(
                "rotation dims {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(Rotation { mat: &self.mat * &other.mat })
    }

    /// ||R^2 - I||_F <= eps_inv and R != I.
    pub fn is_involution(&self) -> bool {
        let p = self.dim();
        let sq_err = (&self.mat * &self.mat - DMatrix::identity(p, p)).norm();
        let id_err = (&self.mat - DMatrix::identity(p, p)).norm();
        sq_err <= EPS_INV && id_err > EPS_INV
    }
}

/// A p x p skew-symmetric matrix (tangent vector at the identity of SO(p)).
#[derive(Debug, Clone, PartialEq)]
pub struct SkewMatrix {
    mat: DMatrix<f64>,
}

impl SkewMatrix {
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::InvalidInput("skew matrix must be square".into()));
        }
        let err = (&mat + mat.transpose()).norm();
        if err > EPS_SKEW * (mat.nrows().max(1) as f64) {
            return Err(Error::InvalidInput(format!(
                "matrix is not skew-symmetric (||A + A^T|| = {err:.3e})"
            )));
        }
        // store the exactly antisymmetric part
        let sym_fixed = (&mat - mat.transpose()) * 0.5;
        Ok(Self { mat: sym_fixed })
    }

    pub fn zeros(p: usize) -> Self {
        Self { mat: DMatrix::zeros(p, p) }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn norm(&self) -> f64 {
        self.mat.norm()
    }
}

/// Normal form of a rotation: `R = Q R(theta_1, ..., theta_ceil(p/2)) Q^T`
/// with 2x2 blocks `C(theta_i)` (and a trailing 1 for odd p), angles sorted
/// descending in [0, pi], and `Q` orthogonal with determinant +-1.
#[derive(Debug, Clone)]
pub struct NormalForm {
    pub angles: Vec<f64>,
    pub frame: DMatrix<f64>,
}

impl NormalForm {
    fn p(&self) -> usize {
        self.frame.nrows()
    }

    /// The block-diagonal rotation R(theta_1, ...).
    pub fn block_matrix(&self) -> DMatrix<f64> {
        let p = self.p();
        let mut b = DMatrix::zeros(p, p);
        let planes = p / 2;
        for (i, &th) in self.angles.iter().take(planes).enumerate() {
            let (s, c) = th.sin_cos();
            b[(2 * i, 2 * i)] = c;
            b[(2 * i, 2 * i + 1)] = -s;
            b[(2 * i + 1, 2 * i)] = s;
            b[(2 * i + 1, 2 * i + 1)] = c;
        }
        if p % 2 == 1 {
            b[(p - 1, p - 1)] = 1.0;
        }
        b
    }

    /// `Q R(theta...) Q^T`; should reproduce the source rotation.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.frame * self.block_matrix() * self.frame.transpose()
    }

    /// The canonical skew log `Q A(theta...) Q^T` with blocks `theta J`.
    pub fn log_matrix(&self) -> DMatrix<f64> {
        let p = self.p();
        let mut a = DMatrix::zeros(p, p);
        for (i, &th) in self.angles.iter().take(p / 2).enumerate() {
            a[(2 * i, 2 * i + 1)] = -th;
            a[(2 * i + 1, 2 * i)] = th;
        }
        &self.frame * a * self.frame.transpose()
    }
}

/// Minimal-norm logarithm of a rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogKind {
    /// The minimal-norm skew preimage is unique.
    Unique,
    /// The source is an involution; `skew` is a canonical representative of a
    /// non-unique minimal log.
    Involution,
}

#[derive(Debug, Clone)]
pub struct LogResult {
    pub kind: LogKind,
    pub skew: SkewMatrix,
    pub norm: f64,
}

/// Matrix exponential of a skew-symmetric matrix, by scaling and squaring.
pub fn so_exp(a: &SkewMatrix) -> Rotation {
    let p = a.dim();
    let norm = a.norm();
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let b = a.matrix() / 2f64.powi(s as i32);
    let mut term = DMatrix::identity(p, p);
    let mut acc = DMatrix::identity(p, p);
    for k in 1..40 {
        term = &term * &b / (k as f64);
        acc += &term;
        if term.norm() < 1e-20 {
            break;
        }
    }
    for _ in 0..s {
        acc = &acc * &acc;
    }
    // the series result is orthogonal to machine precision
    Rotation { mat: acc }
}

/// Eigendecomposition of a symmetric matrix by the cyclic Jacobi method:
/// ascending eigenvalues with matching orthonormal eigenvector columns.
/// QR-iteration solvers can return vectors that are not eigenvectors at all
/// when eigenvalues repeat to machine precision — the generic situation for
/// rotation symmetric parts and involutions — so everything in this crate
/// decomposes through here.
pub fn sym_eigen(sym: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let p = sym.nrows();
    let mut a = (sym + sym.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(p, p);
    let scale = a.norm() + 1.0;
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..p {
            for j in (i + 1)..p {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for i in 0..p {
            for j in (i + 1)..p {
                let apq = a[(i, j)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let tau = (a[(j, j)] - a[(i, i)]) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    1.0 / (tau - (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..p {
                    let aki = a[(k, i)];
                    let akj = a[(k, j)];
                    a[(k, i)] = c * aki - s * akj;
                    a[(k, j)] = s * aki + c * akj;
                }
                for k in 0..p {
                    let aik = a[(i, k)];
                    let ajk = a[(j, k)];
                    a[(i, k)] = c * aik - s * ajk;
                    a[(j, k)] = s * aik + c * ajk;
                }
                for k in 0..p {
                    let vki = v[(k, i)];
                    let vkj = v[(k, j)];
                    v[(k, i)] = c * vki - s * vkj;
                    v[(k, j)] = s * vki + c * vkj;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..p).collect();
    idx.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap());
    let vals = idx.iter().map(|&i| a[(i, i)]).collect();
    let vecs = DMatrix::from_fn(p, p, |r, c| v[(r, idx[c])]);
    (vals, vecs)
}

/// Sorted-ascending eigenvalues (with eigenvectors) of a symmetric matrix,
/// snapped to +-1 where they belong to a rotation's symmetric part.
fn sym_eigen_sorted(sym: &DMatrix<f64>) -> (Vec<f64>, Vec<DVector<f64>>) {
    let (raw_vals, raw_vecs) = sym_eigen(sym);
    let mut vals = Vec::with_capacity(raw_vals.len());
    let mut vecs = Vec::with_capacity(raw_vals.len());
    for (i, &rv) in raw_vals.iter().enumerate() {
        let mut v = rv;
        if (v - 1.0).abs() <= SNAP_TOL {
            v = 1.0;
        } else if (v + 1.0).abs() <= SNAP_TOL {
            v = -1.0;
        }
        vals.push(v.clamp(-1.0, 1.0));
        vecs.push(raw_vecs.column(i).into_owned());
    }
    (vals, vecs)
}

/// The p "redundant" rotation angles: arccos of the eigenvalues of
/// `(R + R^T)/2`, each normal-form angle appearing twice (plus a 0 for odd p).
pub fn redundant_angles(r: &Rotation) -> Vec<f64> {
    let sym = (r.matrix() + r.matrix().transpose()) * 0.5;
    let (vals, _) = sym_eigen_sorted(&sym);
    vals.into_iter().map(|v| v.acos()).collect()
}

/// Geodesic distance on SO(p): `sqrt(sum theta_i^2)` over normal-form angles
/// of `U^T V`; bi-invariant.
pub fn d_so(u: &Rotation, v: &Rotation) -> Result<f64> {
    let m = u.transpose().compose(v)?;
    let angles = redundant_angles(&m);
    Ok((0.5 * angles.iter().map(|t| t * t).sum::<f64>()).sqrt())
}

/// Normal form of a rotation via the symmetric part's eigendecomposition,
/// with invariant 2-planes rebuilt from the action of R on each eigenspace.
pub fn normal_form(r: &Rotation) -> Result<NormalForm> {
    let p = r.dim();
    let rm = r.matrix();
    let sym = (rm + rm.transpose()) * 0.5;
    let (vals, vecs) = sym_eigen_sorted(&sym);

    // cluster eigenvalues; each cluster is an invariant subspace with a single
    // rotation angle
    let mut clusters: Vec<(f64, Vec<usize>)> = Vec::new();
    for (i, &v) in vals.iter().enumerate() {
        match clusters.last_mut() {
            Some((last, members)) if (v - *last).abs() <= CLUSTER_TOL => {
                members.push(i);
            }
            _ => clusters.push((v, vec![i])),
        }
    }

    // planes collected as (theta, v, w); eigenvalues ascending = angles
    // descending, the order the output wants
    let mut planes: Vec<(f64, DVector<f64>, DVector<f64>)> = Vec::new();
    let mut leftover: Option<DVector<f64>> = None;

    for (lam, members) in clusters {
        let basis: Vec<DVector<f64>> = members.iter().map(|&i| vecs[i].clone()).collect();
        if lam >= 1.0 || lam <= -1.0 {
            let theta = if lam >= 1.0 { 0.0 } else { std::f64::consts::PI };
            let mut it = basis.into_iter();
            loop {
                match (it.next(), it.next()) {
                    (Some(v), Some(w)) => planes.push((theta, v, w)),
                    (Some(v), None) => {
                        if theta != 0.0 || leftover.is_some() {
                            return Err(Error::Numerical(
                                "odd-dimensional +-1 eigenspace structure".into(),
                            ));
                        }
                        leftover = Some(v);
                        break;
                    }
                    (None, _) => break,
                }
            }
        } else {
            // R rotates the eigenspace by theta in orthogonal 2-planes;
            // peel planes off one at a time
            let mut cols = basis;
            while !cols.is_empty() {
                let v = cols[0].normalize();
                let rv = rm * &v;
                let lam_v = v.dot(&rv);
                let mut w = &rv - &v * lam_v;
                let s = w.norm();
                if s < 1e-12 {
                    return Err(Error::Numerical(
                        "degenerate 2-plane in normal form extraction".into(),
                    ));
                }
                w /= s;
                let theta = s.atan2(lam_v);
                // deflate {v, w} and re-orthonormalize the remainder
                let mut next: Vec<DVector<f64>> = Vec::with_capacity(cols.len() - 2);
                for c in cols.iter().skip(1) {
                    let mut c = c.clone();
                    c -= &v * v.dot(&c);
                    c -= &w * w.dot(&c);
                    for b in &next {
                        let d = b.dot(&c);
                        c -= b * d;
                    }
                    let n = c.norm();
                    if n > 1e-6 {
                        next.push(c / n);
                    }
                }
                if next.len() + 2 != cols.len() {
                    return Err(Error::Numerical(
                        "eigenspace deflation lost dimensions".into(),
                    ));
                }
                planes.push((theta, v, w));
                cols = next;
            }
        }
    }

    if planes.len() != p / 2 || (p % 2 == 1) != leftover.is_some() {
        return Err(Error::Numerical("normal form plane count mismatch".into()));
    }

    planes.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut frame = DMatrix::zeros(p, p);
    let mut angles = Vec::with_capacity(p.div_ceil(2));
    for (i, (theta, v, w)) in planes.iter().enumerate() {
        frame.set_column(2 * i, v);
        frame.set_column(2 * i + 1, w);
        angles.push(*theta);
    }
    if let Some(v) = leftover {
        frame.set_column(p - 1, &v);
        angles.push(0.0);
    }

    let nf = NormalForm { angles, frame };
    let err = (nf.reconstruct() - rm).norm();
    if err > EPS_RECON {
        return Err(Error::Numerical(format!(
            "normal form reconstruction error {err:.3e}"
        )));
    }
    Ok(nf)
}

/// Minimal-norm logarithm. For involutions the minimal log is not unique; a
/// canonical representative (all pi-angle planes oriented as extracted, +pi
/// rotations) is returned with `kind = Involution`.
pub fn so_log(r: &Rotation) -> Result<LogResult> {
    let nf = normal_form(r)?;
    let skew_raw = nf.log_matrix();
    let skew = SkewMatrix::new(skew_raw)?;
    let norm = (2.0 * nf.angles.iter().map(|t| t * t).sum::<f64>()).sqrt();
    let kind = if r.is_involution() { LogKind::Involution } else { LogKind::Unique };
    Ok(LogResult { kind, skew, norm })
}

/// Orthonormalizes the columns of a full-column-rank matrix (thin QR).
pub fn orthonormalize(basis: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = basis.nrows();
    let m = basis.ncols();
    if m == 0 || m > p {
        return Err(Error::InvalidInput(format!(
            "basis must have 1..=p columns, got {m} for p = {p}"
        )));
    }
    let mut q: Vec<DVector<f64>> = Vec::with_capacity(m);
    let scale = basis.norm().max(1.0);
    for j in 0..m {
        let mut c = basis.column(j).into_owned();
        for b in &q {
            let d = b.dot(&c);
            c -= b * d;
        }
        // second Gram-Schmidt pass for orthogonality to working precision
        for b in &q {
            let d = b.dot(&c);
            c -= b * d;
        }
        let n = c.norm();
        if n <= 1e-10 * scale {
            return Err(Error::InvalidInput("rank-deficient subspace basis".into()));
        }
        q.push(c / n);
    }
    Ok(DMatrix::from_columns(&q))
}

/// Principal angles between the column spans of W and Z, ascending in
/// [0, pi/2]. Cosines come from the SVD of the cross-Gram matrix; angles
/// whose cosine is near 1 are recomputed from the sine-based SVD of
/// (I - W W^T) Z, which stays fully accurate near zero where arccos is
/// ill-conditioned.
pub fn principal_angles(w: &DMatrix<f64>, z: &DMatrix<f64>) -> Result<Vec<f64>> {
    if w.nrows() != z.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "ambient dims {} vs {}",
            w.nrows(),
            z.nrows()
        )));
    }
    let wq = orthonormalize(w)?;
    let zq = orthonormalize(z)?;
    let cross = wq.transpose() * &zq;
    let mut cosines: Vec<f64> = cross
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .map(|&s| s.clamp(0.0, 1.0))
        .collect();
    // descending cosines <-> ascending angles
    cosines.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let residual = &zq - &wq * cross;
    let mut sines: Vec<f64> = residual
        .svd(false, false)
        .singular_values
        .iter()
        .map(|&s| s.clamp(0.0, 1.0))
        .collect();
    sines.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let angles = cosines
        .iter()
        .zip(&sines)
        .map(|(&c, &s)| if c * c > 0.5 { s.asin() } else { c.acos() })
        .collect();
    Ok(angles)
}
