//! Random instances shared by unit tests.

use alloc::string::ToString;
use alloc::vec::Vec;

use rand::Rng;

use crate::model::{compute_covariates, CovariateKind, EmissionParams, ModelParams, PageCategory, Session};

pub fn random_params<R: Rng>(k: usize, covariates: Vec<CovariateKind>, rng: &mut R) -> ModelParams {
    let mut pi: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= total);
    let mut emission = EmissionParams::zeros(k, covariates, 1);
    emission.intercepts.iter_mut().for_each(|v| *v = rng.random_range(-1.5..1.5));
    emission.coefficients.iter_mut().for_each(|v| *v = rng.random_range(-0.3..0.3));
    ModelParams {
        pi,
        theta: (0..k).map(|_| rng.random_range(0.05..0.95)).collect(),
        c: (0..k).map(|_| rng.random_range(0.3..3.0)).collect(),
        mu: (0..k * k).map(|_| rng.random_range(-1.5..1.5)).collect(),
        delta: (0..k * k).map(|_| rng.random_range(-0.3..0.3)).collect(),
        emission,
    }
}

/// Session of length `t`; the last page is Exit with probability one half.
pub fn random_session<R: Rng>(t: usize, rng: &mut R) -> Session {
    let mut pages: Vec<PageCategory> = (0..t)
        .map(|_| PageCategory::from_index(rng.random_range(0..8)).unwrap())
        .collect();
    if rng.random_bool(0.5) {
        pages[t - 1] = PageCategory::Exit;
    }
    let mut clock = 0i64;
    let arrivals: Vec<i64> = (0..t)
        .map(|_| {
            clock += rng.random_range(500..20_000);
            clock
        })
        .collect();
    let covs = compute_covariates(&pages, &arrivals, rng.random_bool(0.3), rng.random_bool(0.5)).unwrap();
    Session::new(t.to_string(), pages, covs, 0).unwrap()
}
