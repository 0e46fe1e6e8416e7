#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use soco_core::{make_quadratic, CostFunction, SocoInstance};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, d: usize, radius: f64) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.random_range(-radius..=radius))
}

/// Random orthogonal basis scaled to eigenvalues drawn from `[lo, hi]`, with
/// `lo` always present.
pub fn spd(rng: &mut ChaCha8Rng, d: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let q = a.qr().q();
    let mut eig = DVector::from_fn(d, |_, _| rng.random_range(lo..=hi));
    eig[0] = lo;
    let p = &q * DMatrix::from_diagonal(&eig) * q.transpose();
    (&p + p.transpose()) * 0.5
}

pub fn quadratic(rng: &mut ChaCha8Rng, d: usize, m: f64, cond: f64, radius: f64) -> CostFunction {
    let p = spd(rng, d, m, m * cond);
    let v = uniform_vec(rng, d, radius);
    make_quadratic(p, v, 0.0).unwrap()
}

/// Quadratic costs whose minimizers walk from `x0` in steps of length `eps`.
pub fn walk_instance(rng: &mut ChaCha8Rng, d: usize, horizon: usize, m: f64, eps: f64) -> SocoInstance {
    let x0 = uniform_vec(rng, d, 1.0);
    let mut v = x0.clone();
    let costs = (0..horizon)
        .map(|_| {
            let mut dir = uniform_vec(rng, d, 1.0);
            while dir.norm() < 1e-3 {
                dir = uniform_vec(rng, d, 1.0);
            }
            v += dir.normalize() * eps;
            make_quadratic(spd(rng, d, m, 10.0 * m), v.clone(), 0.0).unwrap()
        })
        .collect();
    SocoInstance::new(x0, costs).unwrap()
}

/// Quadratic costs with independent random minimizers.
pub fn random_instance(rng: &mut ChaCha8Rng, d: usize, horizon: usize, m: f64) -> SocoInstance {
    let costs = (0..horizon).map(|_| quadratic(rng, d, m, 10.0, 2.0)).collect();
    SocoInstance::new(uniform_vec(rng, d, 2.0), costs).unwrap()
}
