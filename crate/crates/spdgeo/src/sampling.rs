//! Seeded random generators for rotations, planes, involutions, and SPD
//! matrices; used by the verification suite and tests.

use nalgebra::DMatrix;
use rand::Rng;

use crate::grassmann::Plane;
use crate::matrix_core::{orthonormalize, Rotation, SkewMatrix};
use crate::partitions::{DiagPos, EigenPair};

/// A generic rotation from the QR factor of a random matrix (determinant
/// fixed to +1). Not exactly Haar, but fully generic for testing identities.
pub fn random_rotation(p: usize, rng: &mut impl Rng) -> Rotation {
    loop {
        let m = DMatrix::from_fn(p, p, |_, _| rng.gen_range(-1.0..1.0));
        let Ok(mut q) = orthonormalize(&m) else { continue };
        if q.determinant() < 0.0 {
            let last = -q.column(p - 1).into_owned();
            q.set_column(p - 1, &last);
        }
        if let Ok(r) = Rotation::new(q) {
            return r;
        }
    }
}

pub fn random_skew(p: usize, rng: &mut impl Rng, scale: f64) -> SkewMatrix {
    let m = DMatrix::from_fn(p, p, |_, _| rng.gen_range(-scale..scale));
    SkewMatrix::new((&m - m.transpose()) * 0.5).unwrap()
}

/// A random m-plane in R^p.
pub fn random_plane(p: usize, m: usize, rng: &mut impl Rng) -> Plane {
    loop {
        let b = DMatrix::from_fn(p, m, |_, _| rng.gen_range(-1.0..1.0));
        if let Ok(plane) = Plane::new(b) {
            return plane;
        }
    }
}

/// A random involution of the given even level m: Phi(W) = I - 2 P_W for a
/// random m-plane W.
pub fn random_involution_of_level(p: usize, m: usize, rng: &mut impl Rng) -> Rotation {
    assert!(m % 2 == 0 && m >= 2 && m <= p);
    let w = random_plane(p, m, rng);
    crate::grassmann::phi(&w).unwrap().into_rotation()
}

/// A random involution with a uniformly chosen even level in {2, ..., 2*floor(p/2)}.
pub fn random_involution(p: usize, rng: &mut impl Rng) -> Rotation {
    let levels: Vec<usize> = (1..=p / 2).map(|k| 2 * k).collect();
    let m = levels[rng.gen_range(0..levels.len())];
    random_involution_of_level(p, m, rng)
}

/// A random SPD matrix with log-eigenvalues in (-1, 1).
pub fn random_spd(p: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let q = random_rotation(p, rng);
    let d = DiagPos::new((0..p).map(|_| rng.gen_range(-1.0..1.0f64).exp()).collect()).unwrap();
    EigenPair::new(q, d).compose()
}

/// A random SPD matrix with well-separated eigenvalues (top stratum).
pub fn random_spd_top(p: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let q = random_rotation(p, rng);
    let entries: Vec<f64> = (0..p)
        .map(|i| ((i as f64) * 0.7 + rng.gen_range(0.05..0.65)).exp())
        .collect();
    EigenPair::new(q, DiagPos::new(entries).unwrap()).compose()
}

/// A random point of M(p) with well-separated scale entries.
pub fn random_eigenpair_top(p: usize, rng: &mut impl Rng) -> EigenPair {
    let u = random_rotation(p, rng);
    let entries: Vec<f64> = (0..p)
        .map(|i| ((i as f64) * 0.7 + rng.gen_range(0.05..0.65)).exp())
        .collect();
    EigenPair::new(u, DiagPos::new(entries).unwrap())
}
