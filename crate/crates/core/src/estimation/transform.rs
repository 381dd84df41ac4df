//! Bijection between valid parameters and an unconstrained real vector.
//!
//! Layout: `logit θ` (K), `ln c` (K), `ln π_s - ln π_1` for `s >= 2`
//! (K - 1), off-diagonal `μ` and `δ` row-major (K(K-1) each), then the
//! emission intercepts and coefficients in their storage order.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{exp, ln, log1p, logit, sigmoid, softmax_in_place};
use crate::model::{CovariateKind, EmissionParams, ModelParams};

/// Unconstrained coordinates of a parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct UnconstrainedParams(pub Vec<f64>);

/// Shape of a parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    pub k: usize,
    pub covariates: Vec<CovariateKind>,
    pub demographic_dim: usize,
}

/// Named slices of the unconstrained vector.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Offsets {
    pub theta: usize,
    pub c: usize,
    pub pi: usize,
    pub mu: usize,
    pub delta: usize,
    pub intercepts: usize,
    pub coefficients: usize,
    pub end: usize,
}

impl ParamLayout {
    pub fn new(k: usize, covariates: Vec<CovariateKind>, demographic_dim: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::ModelStructure(alloc::format!("K must be at least 2, got {k}")));
        }
        if demographic_dim == 0 {
            return Err(Error::Config("demographic dimension must be positive".into()));
        }
        Ok(Self { k, covariates, demographic_dim })
    }

    pub fn of(params: &ModelParams) -> Self {
        Self {
            k: params.k(),
            covariates: params.emission.covariates.clone(),
            demographic_dim: params.emission.demographic_dim,
        }
    }

    pub(crate) fn offsets(&self) -> Offsets {
        let k = self.k;
        let off = k * (k - 1);
        let n_int = k * crate::PAGE_COUNT * self.demographic_dim;
        let n_coef = n_int * self.covariates.len();
        let theta = 0;
        let c = k;
        let pi = 2 * k;
        let mu = pi + k - 1;
        let delta = mu + off;
        let intercepts = delta + off;
        let coefficients = intercepts + n_int;
        Offsets { theta, c, pi, mu, delta, intercepts, coefficients, end: coefficients + n_coef }
    }

    /// Number of unconstrained coordinates.
    pub fn len(&self) -> usize {
        self.offsets().end
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn check(&self, params: &ModelParams) -> Result<()> {
        params.validate()?;
        let other = Self::of(params);
        if other != *self {
            return Err(Error::DimensionMismatch {
                field: "parameter layout",
                expected: self.len(),
                found: other.len(),
            });
        }
        if params.pi.iter().any(|&p| p <= 0.0) {
            return Err(Error::Domain("pi must be strictly positive to be packed".into()));
        }
        Ok(())
    }

    pub fn pack(&self, params: &ModelParams) -> Result<UnconstrainedParams> {
        self.check(params)?;
        let k = self.k;
        let mut z = Vec::with_capacity(self.len());
        z.extend(params.theta.iter().map(|&t| logit(t)));
        z.extend(params.c.iter().map(|&c| ln(c)));
        let l0 = ln(params.pi[0]);
        z.extend(params.pi[1..].iter().map(|&p| ln(p) - l0));
        for m in [&params.mu, &params.delta] {
            for s in 0..k {
                for j in 0..k {
                    if s != j {
                        z.push(m[s * k + j]);
                    }
                }
            }
        }
        z.extend_from_slice(&params.emission.intercepts);
        z.extend_from_slice(&params.emission.coefficients);
        Ok(UnconstrainedParams(z))
    }

    /// Maps back to parameters. The result may still fail validation when
    /// coordinates are so large that `θ` or `π` round to the boundary.
    pub fn unpack(&self, z: &[f64]) -> Result<ModelParams> {
        if z.len() != self.len() {
            return Err(Error::DimensionMismatch { field: "unconstrained parameters", expected: self.len(), found: z.len() });
        }
        let k = self.k;
        let o = self.offsets();
        let mut pi = alloc::vec![0.0; k];
        pi[1..].copy_from_slice(&z[o.pi..o.mu]);
        softmax_in_place(&mut pi);
        let mut mu = alloc::vec![0.0; k * k];
        let mut delta = alloc::vec![0.0; k * k];
        let mut i = 0;
        for s in 0..k {
            for j in 0..k {
                if s != j {
                    mu[s * k + j] = z[o.mu + i];
                    delta[s * k + j] = z[o.delta + i];
                    i += 1;
                }
            }
        }
        Ok(ModelParams {
            pi,
            theta: z[o.theta..o.c].iter().map(|&v| sigmoid(v)).collect(),
            c: z[o.c..o.pi].iter().map(|&v| exp(v)).collect(),
            mu,
            delta,
            emission: EmissionParams {
                k,
                covariates: self.covariates.clone(),
                demographic_dim: self.demographic_dim,
                intercepts: z[o.intercepts..o.coefficients].to_vec(),
                coefficients: z[o.coefficients..o.end].to_vec(),
            },
        })
    }
}

/// `ln |det J|` of the map from unconstrained coordinates to `(θ, c, π)`.
pub fn log_jacobian(params: &ModelParams) -> f64 {
    let mut total = 0.0;
    for (&t, &c) in params.theta.iter().zip(&params.c) {
        total += ln(t) + log1p(-t) + ln(c);
    }
    total + params.pi.iter().map(|&p| ln(p)).sum::<f64>()
}
