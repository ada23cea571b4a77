#![allow(dead_code)]

use dblab_core::model::{validate_model, ModelParams, ProgressModel};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn base_set(t: f64) -> (ModelParams, ProgressModel) {
    (ModelParams::new(0.75, 0.75, 1.0, 0.5, 5.0, t).unwrap(), ProgressModel::safe(1.0, 5.0, 0.5))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draws SafeArm parameter sets until one passes validation.
pub fn random_valid_set(r: &mut ChaCha8Rng, t: f64) -> (ModelParams, ProgressModel) {
    loop {
        let p_bar = r.random_range(0.3..0.9);
        let lambda = r.random_range(0.4..2.0);
        let mu = r.random_range(0.4..2.0);
        let b = r.random_range(2.0..8.0);
        let c = r.random_range(0.05..0.8);
        let nu = r.random_range(p_bar * lambda..3.0);
        let c_nu = r.random_range(0.0..0.5);
        let b_nu = r.random_range(0.5..1.0) * (b + c / mu) + c_nu / nu;
        let Ok(params) = ModelParams::new(p_bar, lambda, mu, c, b, t) else { continue };
        let model = ProgressModel::safe(nu, b_nu, c_nu);
        if validate_model(&params, &model).overall {
            return (params, model);
        }
    }
}

/// Compares two switch lists after dropping switches within `tol` of either end.
pub fn switches_agree(a: &[f64], b: &[f64], horizon: f64, tol: f64) -> bool {
    let inner = |v: &[f64]| v.iter().copied().filter(|&x| x > tol && x < horizon - tol).collect::<Vec<_>>();
    let (a, b) = (inner(a), inner(b));
    a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= tol)
}
