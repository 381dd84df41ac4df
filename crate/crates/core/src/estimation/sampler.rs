use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::fit::{fit_map, reorder_states, FitConfig};
use super::objective::{Objective, PriorMode};
use crate::error::{Error, Result};
use crate::math::ln;
use crate::model::{ModelParams, Session};

/// Random-walk Metropolis settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RwConfig {
    pub chain_length: usize,
    /// Standard deviation of the Gaussian proposal on the unconstrained scale.
    pub step_size: f64,
    pub seed: u64,
    pub prior: PriorMode,
    /// Coordinates allowed to move; all when `None`.
    pub free: Option<Vec<bool>>,
}

impl RwConfig {
    pub fn new(chain_length: usize, step_size: f64, seed: u64) -> Self {
        Self { chain_length, step_size, seed, prior: PriorMode::WeaklyInformative, free: None }
    }
}

#[derive(Debug, Clone)]
pub struct RwChain {
    /// One label-ordered draw per iteration.
    pub draws: Vec<ModelParams>,
    /// Negative log target of each draw.
    pub objective: Vec<f64>,
    pub acceptance_rate: f64,
}

/// Random-walk Metropolis over the unconstrained parameters. Starts at
/// `fit.initial`, or at the MAP estimate when that is absent.
pub fn sample_posterior_rw(sessions: &[Session], fit: &FitConfig, rw: &RwConfig) -> Result<RwChain> {
    if !(rw.step_size >= 0.0) {
        return Err(Error::Config("step size must be non-negative".into()));
    }
    let start = match &fit.initial {
        Some(p) => p.clone(),
        None => fit_map(sessions, fit)?.params,
    };
    let layout = fit.layout()?;
    let mut z = layout.pack(&start)?.0;
    if let Some(mask) = &rw.free {
        if mask.len() != z.len() {
            return Err(Error::DimensionMismatch { field: "free mask", expected: z.len(), found: mask.len() });
        }
    }
    let objective = Objective::new(layout.clone(), sessions, fit.convention, rw.prior);
    let mut current = objective.value(&z);
    if !current.is_finite() {
        return Err(Error::Numerical("the chain's starting point has a non-finite objective".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rw.seed);
    let mut proposal = z.clone();
    let mut accepted = 0usize;
    let mut draws = Vec::with_capacity(rw.chain_length);
    let mut values = Vec::with_capacity(rw.chain_length);
    for _ in 0..rw.chain_length {
        for (i, p) in proposal.iter_mut().enumerate() {
            let free = rw.free.as_ref().is_none_or(|m| m[i]);
            let noise: f64 = StandardNormal.sample(&mut rng);
            *p = if free { z[i] + rw.step_size * noise } else { z[i] };
        }
        let next = objective.value(&proposal);
        let u: f64 = rng.random();
        if next.is_finite() && ln(1.0 - u) < current - next {
            z.copy_from_slice(&proposal);
            current = next;
            accepted += 1;
        }
        draws.push(reorder_states(&layout.unpack(&z)?));
        values.push(current);
    }
    Ok(RwChain {
        draws,
        objective: values,
        acceptance_rate: if rw.chain_length == 0 { 0.0 } else { accepted as f64 / rw.chain_length as f64 },
    })
}
