use alloc::vec;
use alloc::vec::Vec;

use super::covariates::{CovariateKind, CovariateVector};
use super::page::PAGE_COUNT;
use crate::error::{Error, Result};
use crate::math::{log_softmax_in_place, softmax_in_place};

/// Hierarchical multinomial-logit emission parameters.
///
/// For state `s`, page `o` and demographics `R`:
/// `γ_s^o = Σ_r intercepts[s][o][r] R_r` and
/// `β_s^o[j] = Σ_r coefficients[s][o][j][r] R_r`; the emission is the softmax
/// over pages of `γ_s^o + β_s^o · x`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionParams {
    pub k: usize,
    /// Covariates entering the logit, in order.
    pub covariates: Vec<CovariateKind>,
    pub demographic_dim: usize,
    /// Layout `[state][page][demographic]`.
    pub intercepts: Vec<f64>,
    /// Layout `[state][page][covariate][demographic]`.
    pub coefficients: Vec<f64>,
}

impl EmissionParams {
    pub fn zeros(k: usize, covariates: Vec<CovariateKind>, demographic_dim: usize) -> Self {
        let p = covariates.len();
        Self {
            k,
            intercepts: vec![0.0; k * PAGE_COUNT * demographic_dim],
            coefficients: vec![0.0; k * PAGE_COUNT * p * demographic_dim],
            covariates,
            demographic_dim,
        }
    }

    #[inline]
    pub fn covariate_dim(&self) -> usize {
        self.covariates.len()
    }

    #[inline]
    pub fn intercept_index(&self, s: usize, o: usize, r: usize) -> usize {
        (s * PAGE_COUNT + o) * self.demographic_dim + r
    }

    #[inline]
    pub fn coefficient_index(&self, s: usize, o: usize, j: usize, r: usize) -> usize {
        ((s * PAGE_COUNT + o) * self.covariate_dim() + j) * self.demographic_dim + r
    }

    pub fn validate(&self) -> Result<()> {
        let expected = self.k * PAGE_COUNT * self.demographic_dim;
        if self.intercepts.len() != expected {
            return Err(Error::DimensionMismatch {
                field: "emission_intercepts",
                expected,
                found: self.intercepts.len(),
            });
        }
        let expected = expected * self.covariate_dim();
        if self.coefficients.len() != expected {
            return Err(Error::DimensionMismatch {
                field: "emission_coefficients",
                expected,
                found: self.coefficients.len(),
            });
        }
        if self.demographic_dim == 0 {
            return Err(Error::Domain("demographic_dim must be at least 1 (intercept)".into()));
        }
        if self.intercepts.iter().chain(&self.coefficients).any(|x| x.is_nan()) {
            return Err(Error::Domain("emission parameters contain NaN".into()));
        }
        Ok(())
    }

    /// Collapses the hierarchical maps for one user's demographics.
    pub fn specialize(&self, demographics: &[f64]) -> Result<UserEmission> {
        if demographics.len() != self.demographic_dim {
            return Err(Error::DimensionMismatch {
                field: "demographics",
                expected: self.demographic_dim,
                found: demographics.len(),
            });
        }
        let p = self.covariate_dim();
        let mut gamma = vec![0.0; self.k * PAGE_COUNT];
        let mut beta = vec![0.0; self.k * PAGE_COUNT * p];
        for s in 0..self.k {
            for o in 0..PAGE_COUNT {
                let g = &mut gamma[s * PAGE_COUNT + o];
                for (r, &x) in demographics.iter().enumerate() {
                    *g += self.intercepts[self.intercept_index(s, o, r)] * x;
                }
                for j in 0..p {
                    let b = &mut beta[(s * PAGE_COUNT + o) * p + j];
                    for (r, &x) in demographics.iter().enumerate() {
                        *b += self.coefficients[self.coefficient_index(s, o, j, r)] * x;
                    }
                }
            }
        }
        Ok(UserEmission { k: self.k, covariate_dim: p, gamma, beta })
    }

    /// Selected covariate features for a step.
    pub fn features(&self, covariates: &CovariateVector) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.covariate_dim());
        covariates.project_into(&self.covariates, &mut out);
        out
    }
}

/// Emission logits specialized to one user: `γ_is^o` and `β_is^o`.
#[derive(Debug, Clone, PartialEq)]
pub struct UserEmission {
    pub k: usize,
    pub covariate_dim: usize,
    /// Layout `[state][page]`.
    pub gamma: Vec<f64>,
    /// Layout `[state][page][covariate]`.
    pub beta: Vec<f64>,
}

impl UserEmission {
    /// Emission logits for state `s` and features `x`.
    pub fn logits(&self, s: usize, x: &[f64], out: &mut [f64; PAGE_COUNT]) {
        let p = self.covariate_dim;
        for (o, slot) in out.iter_mut().enumerate() {
            let base = (s * PAGE_COUNT + o) * p;
            let mut v = self.gamma[s * PAGE_COUNT + o];
            for (j, &xj) in x.iter().enumerate() {
                v += self.beta[base + j] * xj;
            }
            *slot = v;
        }
    }

    pub fn log_probs(&self, s: usize, x: &[f64], out: &mut [f64; PAGE_COUNT]) {
        self.logits(s, x, out);
        log_softmax_in_place(out);
    }

    pub fn probs(&self, s: usize, x: &[f64], out: &mut [f64; PAGE_COUNT]) {
        self.logits(s, x, out);
        softmax_in_place(out);
    }
}
