use alloc::vec;
use alloc::vec::Vec;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::inference::{log_likelihood, log_likelihood_complete, Convention};
use crate::math::{exp, ln};
use crate::model::{compute_covariates, CovariateKind, ModelParams, PageCategory, Session, PAGE_COUNT};
use crate::simulation::{permutations, sample_sessions, GeneratorConfig};
use crate::testutil::{random_params, random_session};

fn all_covs() -> Vec<CovariateKind> {
    CovariateKind::ALL.to_vec()
}

fn zero_diagonals(p: &mut ModelParams) {
    let k = p.k();
    for s in 0..k {
        p.mu[s * k + s] = 0.0;
        p.delta[s * k + s] = 0.0;
    }
}

/// Two states with near-deterministic emissions: state 1 shows Product,
/// state 2 shows Home or Exit.
fn separable_truth() -> ModelParams {
    let mut p = ModelParams::neutral(2, vec![]);
    p.pi = vec![0.7, 0.3];
    p.theta = vec![0.3, 0.6];
    p.c = vec![1.0, 1.0];
    for o in 0..PAGE_COUNT {
        let page = PageCategory::ALL[o];
        let a = if page == PageCategory::Product { 0.0 } else { -40.0 };
        let b = match page {
            PageCategory::Home => ln(0.75),
            PageCategory::Exit => ln(0.25),
            _ => -40.0,
        };
        let i0 = p.emission.intercept_index(0, o, 0);
        let i1 = p.emission.intercept_index(1, o, 0);
        p.emission.intercepts[i0] = a;
        p.emission.intercepts[i1] = b;
    }
    p
}

fn simulate(p: &ModelParams, n: usize, seed: u64) -> Vec<Session> {
    sample_sessions(p, &GeneratorConfig::with_seed(seed), n).unwrap().into_iter().map(|s| s.session).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pack_unpack_round_trip(seed in any::<u64>(), k in 2usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = random_params(k, all_covs(), &mut rng);
        zero_diagonals(&mut p);
        let layout = ParamLayout::of(&p);
        let z = layout.pack(&p).unwrap();
        prop_assert_eq!(z.0.len(), layout.len());
        let q = layout.unpack(&z.0).unwrap();
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(1.0));
        prop_assert!(close(&p.pi, &q.pi) && close(&p.theta, &q.theta) && close(&p.c, &q.c));
        prop_assert!(close(&p.mu, &q.mu) && close(&p.delta, &q.delta));
        prop_assert_eq!(&p.emission, &q.emission);
        let z2 = layout.pack(&q).unwrap();
        prop_assert!(close(&z.0, &z2.0));
    }

    #[test]
    fn reorder_sorts_shapes_and_keeps_likelihood(seed in any::<u64>(), k in 2usize..=3, t in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_params(k, all_covs(), &mut rng);
        let s = random_session(t, &mut rng);
        let q = reorder_states(&p);
        prop_assert!(q.c.windows(2).all(|w| w[0] <= w[1]));
        for conv in [Convention::Complete, Convention::Censored] {
            let a = log_likelihood(&p, &s, conv).unwrap();
            let b = log_likelihood(&q, &s, conv).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }
}

#[test]
fn likelihood_invariant_under_every_permutation() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for k in 2..=3 {
        for _ in 0..20 {
            let p = random_params(k, all_covs(), &mut rng);
            let sessions: Vec<Session> = (0..3).map(|_| random_session(rng.random_range(1..=8), &mut rng)).collect();
            let canonical = reorder_states(&p);
            for perm in permutations(k) {
                let q = p.permuted(&perm);
                assert_eq!(reorder_states(&q), canonical);
                for s in &sessions {
                    let a = log_likelihood_complete(&p, s).unwrap();
                    let b = log_likelihood_complete(&q, s).unwrap();
                    assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
                }
            }
        }
    }
}

#[test]
fn reorder_identity_and_tie_break() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut p = random_params(3, vec![], &mut rng);
    p.c = vec![0.5, 1.0, 2.0];
    assert_eq!(reorder_states(&p), p);
    p.c = vec![1.0, 1.0, 0.5];
    p.theta = vec![0.8, 0.2, 0.5];
    let q = reorder_states(&p);
    assert_eq!(q.c, vec![0.5, 1.0, 1.0]);
    assert_eq!(q.theta, vec![0.5, 0.2, 0.8]);
    assert_eq!(q.pi, vec![p.pi[2], p.pi[1], p.pi[0]]);
}

#[test]
fn prior_examples() {
    let mut p = ModelParams::neutral(3, vec![CovariateKind::Weekend]);
    let base = log_prior(&p);
    p.c = vec![2.0, 2.0, 2.0];
    assert!((log_prior(&p) - base + 1.5).abs() < 1e-12);
    p.c = vec![1.0; 3];
    for i in [1usize, 2, 5] {
        let mut q = p.clone();
        q.mu[i] = 0.3;
        assert!(log_prior(&q) < base);
        let mut q = p.clone();
        q.delta[i] = -0.3;
        assert!(log_prior(&q) < base);
    }
    let mut q = p.clone();
    q.emission.coefficients[4] = 1.0;
    assert!(log_prior(&q) < base);
    // π and θ do not move the prior
    let mut q = p.clone();
    q.pi = vec![0.2, 0.3, 0.5];
    q.theta = vec![0.1, 0.9, 0.4];
    assert!((log_prior(&q) - base).abs() < 1e-12);
    let mut q = p.clone();
    q.theta[0] = 1.2;
    assert_eq!(log_prior(&q), f64::NEG_INFINITY);
}

#[test]
fn posterior_examples() {
    let p = random_params(2, vec![], &mut ChaCha8Rng::seed_from_u64(1));
    assert!((neg_log_posterior(&p, &[]).unwrap() + log_prior(&p)).abs() < 1e-12);

    // one-step model: emission of Product is 0.2 and 0.1, π = (0.6, 0.4)
    let mut q = ModelParams::neutral(2, vec![]);
    q.pi = vec![0.6, 0.4];
    for (s, prob) in [(0, 0.2), (1, 0.1)] {
        for o in 0..PAGE_COUNT {
            let v = if o == PageCategory::Product.index() { prob } else { (1.0 - prob) / 8.0 };
            let idx = q.emission.intercept_index(s, o, 0);
            q.emission.intercepts[idx] = ln(v);
        }
    }
    let covs = compute_covariates(&[PageCategory::Product], &[0], false, false).unwrap();
    let session = Session::new("s", vec![PageCategory::Product], covs, 0).unwrap();
    let expected = -ln(0.08) - log_prior(&q);
    assert!((neg_log_posterior(&q, &[session]).unwrap() - expected).abs() < 1e-10);
}

#[test]
fn impossible_data_gives_infinite_objective() {
    let p = separable_truth();
    let mut q = p.clone();
    for o in 0..PAGE_COUNT {
        for s in 0..2 {
            let i = q.emission.intercept_index(s, o, 0);
            q.emission.intercepts[i] = if o == 0 { 0.0 } else { -1e6 };
        }
    }
    let sessions = simulate(&p, 5, 1);
    let v = neg_log_posterior(&q, &sessions).unwrap();
    assert!(v > 1e5);
}

#[test]
fn gradient_matches_differences_on_small_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let k = 2 + i % 2;
        let p = random_params(k, vec![CovariateKind::VisitDepth, CovariateKind::Weekend], &mut rng);
        let sessions: Vec<Session> = (0..3).map(|_| random_session(rng.random_range(1..=6), &mut rng)).collect();
        let conv = if i % 4 < 2 { Convention::Complete } else { Convention::Censored };
        let err = check_gradient_with(&p, &sessions, 1e-5, conv).unwrap();
        worst = worst.max(err);
    }
    assert!(worst < 1e-4, "{worst}");
}

#[test]
fn objective_minimized_at_empirical_run_rate() {
    let truth = separable_truth();
    let sessions = simulate(&truth, 300, 3);
    let product = PageCategory::Product;
    let (mut runs, mut visits) = (0usize, 0usize);
    for s in &sessions {
        for (t, &page) in s.pages.iter().enumerate() {
            if page == product {
                visits += 1;
                if s.pages.get(t + 1) != Some(&product) {
                    runs += 1;
                }
            }
        }
    }
    let rate = runs as f64 / visits as f64;
    let grid: Vec<f64> = (1..100).map(|i| f64::from(i) / 100.0).collect();
    let values: Vec<f64> = grid
        .iter()
        .map(|&theta| {
            let mut p = truth.clone();
            p.theta[0] = theta;
            neg_log_posterior(&p, &sessions).unwrap()
        })
        .collect();
    for i in 1..grid.len() {
        if grid[i] <= rate {
            assert!(values[i] < values[i - 1], "not decreasing towards {rate} at {}", grid[i]);
        } else if grid[i - 1] >= rate {
            assert!(values[i] > values[i - 1], "not increasing past {rate} at {}", grid[i]);
        }
    }
}

#[test]
fn separable_fit_splits_emissions() {
    let truth = separable_truth();
    let sessions = simulate(&truth, 150, 5);
    // the simulator censors the last run, so fit with the matching convention
    let mut cfg = FitConfig::new(2, vec![]);
    cfg.convention = Convention::Censored;
    cfg.restarts = 3;
    cfg.seed = 2;
    let fit = fit_map(&sessions, &cfg).unwrap();
    let argmax = |s: usize| {
        (0..PAGE_COUNT)
            .max_by(|&a, &b| {
                let e = &fit.params.emission;
                e.intercepts[e.intercept_index(s, a, 0)].total_cmp(&e.intercepts[e.intercept_index(s, b, 0)])
            })
            .unwrap()
    };
    assert_ne!(argmax(0), argmax(1));
    let pages = [argmax(0), argmax(1)];
    assert!(pages.contains(&PageCategory::Product.index()));
    assert!(pages.contains(&PageCategory::Home.index()));
    assert!(fit.params.c.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn map_beats_generating_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut truth = random_params(2, vec![], &mut rng);
    truth.c = vec![1.0, 1.0];
    truth.delta = vec![0.0; 4];
    truth.mu = vec![0.0; 4];
    let sessions = simulate(&truth, 200, 8);
    let mut cfg = FitConfig::new(2, vec![]);
    cfg.convention = Convention::Censored;
    cfg.restarts = 3;
    let fit = fit_map(&sessions, &cfg).unwrap();
    let layout = cfg.layout().unwrap();
    let objective = Objective::new(layout.clone(), &sessions, Convention::Censored, PriorMode::WeaklyInformative);
    let at_truth = objective.value(&layout.pack(&truth).unwrap().0);
    let at_fit = objective.value(&layout.pack(&fit.params).unwrap().0);
    assert!((at_fit - fit.diagnostics.objective).abs() < 1e-8 * at_fit.abs());
    assert!(at_fit <= at_truth, "{at_fit} > {at_truth}");
    assert!((at_fit - at_truth).abs() <= 0.005 * at_truth.abs());
    assert!(fit.diagnostics.trace.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(fit.diagnostics.restarts.len(), 3);
}

#[test]
fn fit_rejects_single_state() {
    let sessions = simulate(&separable_truth(), 5, 1);
    let cfg = FitConfig::new(1, vec![]);
    assert!(matches!(fit_map(&sessions, &cfg), Err(crate::Error::ModelStructure(_))));
}

#[test]
fn unused_state_is_flagged() {
    let truth = separable_truth();
    let sessions = simulate(&truth, 40, 2);
    let mut cfg = FitConfig::new(3, vec![]);
    cfg.restarts = 2;
    let mut init = reorder_states(&ModelParams { pi: vec![0.7, 0.3 - 1e-9, 1e-9], ..random_params(3, vec![], &mut ChaCha8Rng::seed_from_u64(3)) });
    init.emission = crate::model::EmissionParams::zeros(3, vec![], 1);
    let occ = expected_occupancy(&truth, &sessions, Convention::Complete).unwrap();
    assert!((occ.iter().sum::<f64>() - sessions.iter().map(Session::len).sum::<usize>() as f64).abs() < 1e-6);
    let fit = fit_map(&sessions, &cfg).unwrap();
    let flagged = fit.diagnostics.expected_occupancy.iter().filter(|&&o| o < 1.0).count();
    let warned = fit.diagnostics.warnings.iter().filter(|w| w.contains("expected observations")).count();
    assert_eq!(flagged, warned);
}

#[test]
fn sampler_with_zero_step_never_moves() {
    let truth = separable_truth();
    let sessions = simulate(&truth, 10, 4);
    let mut cfg = FitConfig::new(2, vec![]);
    cfg.initial = Some(truth.clone());
    let chain = sample_posterior_rw(&sessions, &cfg, &RwConfig::new(50, 0.0, 1)).unwrap();
    assert_eq!(chain.draws.len(), 50);
    assert!(chain.draws.iter().all(|d| *d == chain.draws[0]));
}

#[test]
fn sampler_accepts_tiny_steps_on_flat_target() {
    let mut cfg = FitConfig::new(2, vec![]);
    cfg.initial = Some(random_params(2, vec![], &mut ChaCha8Rng::seed_from_u64(2)));
    let mut rw = RwConfig::new(2000, 1e-4, 3);
    rw.prior = PriorMode::Flat;
    let chain = sample_posterior_rw(&[], &cfg, &rw).unwrap();
    assert!(chain.acceptance_rate > 0.99, "{}", chain.acceptance_rate);
}

#[test]
fn sampler_rejects_infinite_start() {
    let sessions = simulate(&separable_truth(), 5, 6);
    let mut start = separable_truth();
    for o in 0..PAGE_COUNT {
        for s in 0..2 {
            let i = start.emission.intercept_index(s, o, 0);
            start.emission.intercepts[i] = if o == 0 { 0.0 } else { -1e300 };
        }
    }
    let mut cfg = FitConfig::new(2, vec![]);
    cfg.initial = Some(start);
    assert!(sample_posterior_rw(&sessions, &cfg, &RwConfig::new(10, 0.1, 1)).is_err());
}

#[test]
fn sampler_matches_quadrature_in_one_dimension() {
    let mut truth = separable_truth();
    truth.c = vec![0.8, 1.3];
    let sessions = simulate(&truth, 15, 12);
    let layout = ParamLayout::of(&truth);
    let mut free = vec![false; layout.len()];
    free[layout.offsets().theta] = true;

    // posterior of θ₁ on a fine grid, uniform prior on (0, 1)
    let n = 4000;
    let nodes: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    let logs: Vec<f64> = nodes
        .iter()
        .map(|&th| {
            let mut p = truth.clone();
            p.theta[0] = th;
            -neg_log_posterior(&p, &sessions).unwrap()
        })
        .collect();
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| exp(l - m)).collect();
    let mass: f64 = w.iter().sum();
    let mean: f64 = nodes.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() / mass;
    let var: f64 = nodes.iter().zip(&w).map(|(x, w)| (x - mean) * (x - mean) * w).sum::<f64>() / mass;

    let mut cfg = FitConfig::new(2, vec![]);
    cfg.initial = Some(truth.clone());
    let mut rw = RwConfig::new(40_000, 0.6, 5);
    rw.free = Some(free);
    let chain = sample_posterior_rw(&sessions, &cfg, &rw).unwrap();
    let kept = &chain.draws[2000..];
    let est = kept.iter().map(|d| d.theta[0]).sum::<f64>() / kept.len() as f64;
    // generous allowance for autocorrelation: effective size of one in twenty
    let se = (var / (kept.len() as f64 / 20.0)).sqrt();
    assert!((est - mean).abs() < 4.0 * se, "{est} vs {mean} (se {se})");
    assert!(chain.acceptance_rate > 0.1 && chain.acceptance_rate < 0.95);
    assert!(kept.iter().all(|d| d.theta[1] == truth.theta[1] && d.c == truth.c));
}
