use alloc::vec;
use alloc::vec::Vec;

use super::covariates::{CovariateKind, CovariateVector};
use super::duration;
use super::emission::EmissionParams;
use super::page::PAGE_COUNT;
use crate::error::{Error, Result};
use crate::math::{exp, log_softmax_in_place};

/// All parameters of a K-state DDHMM.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Initial state distribution.
    pub pi: Vec<f64>,
    /// Discrete Weibull magnitude per state, in (0, 1).
    pub theta: Vec<f64>,
    /// Discrete Weibull shape per state, positive.
    pub c: Vec<f64>,
    /// Transition intercepts, `K x K` row-major; the diagonal is ignored.
    pub mu: Vec<f64>,
    /// Duration slopes of the transition logits, `K x K`; diagonal ignored.
    pub delta: Vec<f64>,
    pub emission: EmissionParams,
}

impl ModelParams {
    /// Uniform `π`, `θ = 0.5`, `c = 1` and all logits zero.
    pub fn neutral(k: usize, covariates: Vec<CovariateKind>) -> Self {
        Self {
            pi: vec![1.0 / k as f64; k],
            theta: vec![0.5; k],
            c: vec![1.0; k],
            mu: vec![0.0; k * k],
            delta: vec![0.0; k * k],
            emission: EmissionParams::zeros(k, covariates, 1),
        }
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.pi.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if k < 2 {
            return Err(Error::ModelStructure(alloc::format!(
                "a DDHMM needs at least 2 states (got {k}); self-transitions are excluded"
            )));
        }
        for (field, len, expected) in [
            ("theta", self.theta.len(), k),
            ("c", self.c.len(), k),
            ("mu", self.mu.len(), k * k),
            ("delta", self.delta.len(), k * k),
        ] {
            if len != expected {
                return Err(Error::DimensionMismatch { field, expected, found: len });
            }
        }
        if self.emission.k != k {
            return Err(Error::DimensionMismatch {
                field: "emission",
                expected: k,
                found: self.emission.k,
            });
        }
        if self.pi.iter().any(|&p| !(p >= 0.0)) || (self.pi.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::Domain("pi must be a probability simplex".into()));
        }
        for s in 0..k {
            duration::check(self.theta[s], self.c[s])?;
        }
        if self.mu.iter().chain(&self.delta).any(|x| !x.is_finite()) {
            return Err(Error::Domain("transition parameters must be finite".into()));
        }
        self.emission.validate()
    }

    /// Reorders states so that new state `i` is old state `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> ModelParams {
        let k = self.k();
        debug_assert_eq!(perm.len(), k);
        let pick = |v: &[f64]| perm.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let pick_matrix = |m: &[f64]| {
            let mut out = vec![0.0; k * k];
            for (i, &pi) in perm.iter().enumerate() {
                for (j, &pj) in perm.iter().enumerate() {
                    out[i * k + j] = m[pi * k + pj];
                }
            }
            out
        };
        let block = |v: &[f64]| {
            let width = v.len() / k;
            let mut out = Vec::with_capacity(v.len());
            for &i in perm {
                out.extend_from_slice(&v[i * width..(i + 1) * width]);
            }
            out
        };
        ModelParams {
            pi: pick(&self.pi),
            theta: pick(&self.theta),
            c: pick(&self.c),
            mu: pick_matrix(&self.mu),
            delta: pick_matrix(&self.delta),
            emission: EmissionParams {
                intercepts: block(&self.emission.intercepts),
                coefficients: block(&self.emission.coefficients),
                ..self.emission.clone()
            },
        }
    }

    /// Log transition probabilities out of `state` after a run of length `d`;
    /// the self entry is `-inf`.
    pub fn log_transition_row(&self, state: usize, d: usize, out: &mut [f64]) {
        let k = self.k();
        log_transition_row(&self.mu[state * k..(state + 1) * k], &self.delta[state * k..(state + 1) * k], state, d, out);
    }
}

pub(crate) fn log_transition_row(mu: &[f64], delta: &[f64], state: usize, d: usize, out: &mut [f64]) {
    let k = mu.len();
    // softmax over the off-diagonal entries only
    let mut buf = [0.0f64; 16];
    let mut heap;
    let logits: &mut [f64] = if k - 1 <= buf.len() {
        &mut buf[..k - 1]
    } else {
        heap = vec![0.0; k - 1];
        &mut heap
    };
    let mut i = 0;
    for j in 0..k {
        if j != state {
            logits[i] = mu[j] + delta[j] * d as f64;
            i += 1;
        }
    }
    log_softmax_in_place(logits);
    let mut i = 0;
    for (j, slot) in out.iter_mut().enumerate().take(k) {
        if j == state {
            *slot = f64::NEG_INFINITY;
        } else {
            *slot = logits[i];
            i += 1;
        }
    }
}

/// Emission simplex `p(o | state, x)` over the nine pages.
pub fn emission_probs(
    params: &ModelParams,
    state: usize,
    demographics: &[f64],
    covariates: &CovariateVector,
) -> Result<[f64; PAGE_COUNT]> {
    emission_probs_from(&params.emission, state, demographics, covariates)
}

pub(crate) fn emission_probs_from(
    emission: &EmissionParams,
    state: usize,
    demographics: &[f64],
    covariates: &CovariateVector,
) -> Result<[f64; PAGE_COUNT]> {
    if state >= emission.k {
        return Err(Error::Domain(alloc::format!(
            "state {state} out of range for K = {}",
            emission.k
        )));
    }
    let user = emission.specialize(demographics)?;
    let x = emission.features(covariates);
    let mut out = [0.0; PAGE_COUNT];
    user.probs(state, &x, &mut out);
    Ok(out)
}

/// Emission simplex from explicit feature values, checked against the
/// model's covariate dimension.
pub fn emission_probs_features(
    params: &ModelParams,
    state: usize,
    demographics: &[f64],
    features: &[f64],
) -> Result<[f64; PAGE_COUNT]> {
    if features.len() != params.emission.covariate_dim() {
        return Err(Error::DimensionMismatch {
            field: "covariates",
            expected: params.emission.covariate_dim(),
            found: features.len(),
        });
    }
    if state >= params.k() {
        return Err(Error::Domain(alloc::format!("state {state} out of range")));
    }
    let user = params.emission.specialize(demographics)?;
    let mut out = [0.0; PAGE_COUNT];
    user.probs(state, features, &mut out);
    Ok(out)
}

/// Transition probabilities `q_{s s'}^d` out of `state` after a completed run
/// of length `d`; the self entry is exactly 0.
pub fn transition_probs(params: &ModelParams, state: usize, d: usize) -> Result<Vec<f64>> {
    let k = params.k();
    if k < 2 {
        return Err(Error::ModelStructure(
            "transitions need at least 2 states: no destination state exists".into(),
        ));
    }
    if state >= k {
        return Err(Error::Domain(alloc::format!("state {state} out of range for K = {k}")));
    }
    if d == 0 {
        return Err(Error::Domain("duration must be at least 1".into()));
    }
    let mut out = vec![0.0; k];
    params.log_transition_row(state, d, &mut out);
    for v in out.iter_mut() {
        *v = exp(*v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PageCategory;
    use proptest::prelude::*;

    fn features_cov() -> CovariateVector {
        CovariateVector { visit_depth: 3.0, time_span: 12.5, cum_same_page: 1.0, weekend: 1.0, customer_type: 0.0 }
    }

    #[test]
    fn symmetric_logits_give_uniform_emissions() {
        let mut p = ModelParams::neutral(2, CovariateKind::ALL.to_vec());
        for v in p.emission.intercepts.iter_mut() {
            *v = 0.7;
        }
        let probs = emission_probs(&p, 1, &[1.0], &features_cov()).unwrap();
        for v in probs {
            assert!((v - 1.0 / 9.0).abs() < 1e-15);
        }
    }

    #[test]
    fn dominant_intercept() {
        let mut p = ModelParams::neutral(2, vec![]);
        let idx = p.emission.intercept_index(0, PageCategory::Product.index(), 0);
        p.emission.intercepts[idx] = 10.0;
        let probs = emission_probs(&p, 0, &[1.0], &features_cov()).unwrap();
        let e10 = 10f64.exp();
        let oracle = e10 / (e10 + 8.0);
        assert!((oracle - 0.999637).abs() < 1e-6);
        assert!((probs[PageCategory::Product.index()] - oracle).abs() < 1e-14);
    }

    #[test]
    fn emission_dimension_errors_name_the_field() {
        let p = ModelParams::neutral(2, vec![CovariateKind::VisitDepth]);
        let err = emission_probs_features(&p, 0, &[1.0], &[1.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { field: "covariates", expected: 1, found: 2 }));
        let err = emission_probs(&p, 0, &[1.0, 0.0], &features_cov()).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { field: "demographics", .. }));
    }

    #[test]
    fn transition_examples() {
        let p2 = ModelParams::neutral(2, vec![]);
        for d in 1..10 {
            assert_eq!(transition_probs(&p2, 0, d).unwrap(), vec![0.0, 1.0]);
        }
        let mut p3 = ModelParams::neutral(3, vec![]);
        assert_eq!(transition_probs(&p3, 2, 4).unwrap(), vec![0.5, 0.5, 0.0]);
        p3.mu[1] = 1.0;
        let e = core::f64::consts::E;
        for d in [1, 5, 30] {
            let q = transition_probs(&p3, 0, d).unwrap();
            assert!((q[1] - e / (e + 1.0)).abs() < 1e-15);
            assert!((q[1] - 0.731059).abs() < 1e-6);
            assert_eq!(q[0], 0.0);
        }
        let mut p1 = ModelParams::neutral(2, vec![]);
        p1.pi = vec![1.0];
        assert!(matches!(transition_probs(&p1, 0, 1), Err(Error::ModelStructure(_))));
        assert!(matches!(p1.validate(), Err(Error::ModelStructure(_))));
    }

    #[test]
    fn permutation_round_trip() {
        let mut p = ModelParams::neutral(3, vec![CovariateKind::TimeSpan]);
        p.pi = vec![0.2, 0.3, 0.5];
        p.theta = vec![0.1, 0.2, 0.3];
        for (i, v) in p.mu.iter_mut().enumerate() {
            *v = i as f64;
        }
        for (i, v) in p.emission.coefficients.iter_mut().enumerate() {
            *v = i as f64;
        }
        let perm = [2, 0, 1];
        let q = p.permuted(&perm);
        assert_eq!(q.theta, vec![0.3, 0.1, 0.2]);
        assert_eq!(q.mu[1], p.mu[2 * 3]);
        let mut inverse = [0; 3];
        for (i, &j) in perm.iter().enumerate() {
            inverse[j] = i;
        }
        assert_eq!(q.permuted(&inverse), p);
    }

    proptest! {
        #[test]
        fn emissions_are_simplices(logits in proptest::collection::vec(-700.0f64..700.0, 18), x in 0.0f64..50.0) {
            let mut p = ModelParams::neutral(2, vec![CovariateKind::VisitDepth]);
            p.emission.intercepts.copy_from_slice(&logits);
            for (i, v) in p.emission.coefficients.iter_mut().enumerate() {
                *v = logits[(i * 7) % 18] / 50.0;
            }
            let feats = [x];
            for s in 0..2 {
                let probs = emission_probs_features(&p, s, &[1.0], &feats).unwrap();
                prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(probs.iter().all(|v| v.is_finite() && *v >= 0.0));
            }
        }

        #[test]
        fn emission_shift_invariance(logits in proptest::collection::vec(-5.0f64..5.0, 9), shift in -100.0f64..100.0) {
            let mut p = ModelParams::neutral(2, vec![]);
            p.emission.intercepts[..9].copy_from_slice(&logits);
            let a = emission_probs_features(&p, 0, &[1.0], &[]).unwrap();
            for v in p.emission.intercepts[..9].iter_mut() { *v += shift; }
            let b = emission_probs_features(&p, 0, &[1.0], &[]).unwrap();
            for o in 0..PAGE_COUNT { prop_assert!((a[o] - b[o]).abs() < 1e-12); }
        }

        #[test]
        fn transitions_are_simplices(mu in proptest::collection::vec(-700.0f64..700.0, 16),
                                     delta in proptest::collection::vec(-5.0f64..5.0, 16),
                                     d in 1usize..60, s in 0usize..4, shift in -50.0f64..50.0) {
            let mut p = ModelParams::neutral(4, vec![]);
            p.mu.copy_from_slice(&mu);
            p.delta.copy_from_slice(&delta);
            let q = transition_probs(&p, s, d).unwrap();
            prop_assert_eq!(q[s], 0.0);
            prop_assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let argmax = |v: &[f64]| (0..v.len()).max_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap()).unwrap();
            let before = argmax(&q);
            for j in 0..4 { p.mu[s * 4 + j] += shift; }
            let q2 = transition_probs(&p, s, d).unwrap();
            prop_assert_eq!(argmax(&q2), before);
        }
    }
}
