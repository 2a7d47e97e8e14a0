//! Exact Shapley values by subset enumeration, and the multi-chain sampling
//! estimator.
//!
//! A sampling chain repeats `T` times: draw a size uniformly from
//! `[ceil(s/2), s]`, draw that many distinct instances, then strip them off
//! one at a time in random order. Each removed instance is credited with the
//! value drop its removal caused; unsampled instances get zero for that
//! iteration. A chain reports the per-instance mean over its `T` iterations and
//! the final estimate is the mean over chains.
//!
//! For an additive game `v(S) = Σ w_i` the estimate converges to
//! `w_i · E[|S_t|] / n`, not `w_i`: the estimator preserves ranking, not scale.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::data::{Method, Normalization, SamplingConfig, ValuationResult, ValueFunction};
use crate::error::{Error, Result};
use crate::rng::chain_rng;

/// Largest `n` accepted by [`exact_shapley`]; enumeration costs `2^n` value calls.
pub const EXACT_MAX_PLAYERS: usize = 20;

/// Shapley values by enumerating every subset once.
///
/// `φ_i = Σ_{S ∌ i} (v(S ∪ {i}) − v(S)) / (n · C(n−1, |S|))`.
pub fn exact_shapley<V>(value_fn: &V, n: usize) -> Result<ValuationResult>
where
    V: ValueFunction + ?Sized,
{
    if n > EXACT_MAX_PLAYERS {
        return Err(Error::TooManyPlayers {
            n,
            limit: EXACT_MAX_PLAYERS,
        });
    }
    let subsets = 1usize << n;
    let table: Vec<f64> = (0..subsets)
        .into_par_iter()
        .map(|mask| value_fn.evaluate(&members(mask, n)))
        .collect();

    let weights: Vec<f64> = (0..n)
        .map(|k| 1.0 / (n as f64 * binomial(n - 1, k)))
        .collect();
    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let bit = 1usize << i;
            (0..subsets)
                .filter(|mask| mask & bit == 0)
                .map(|mask| weights[mask.count_ones() as usize] * (table[mask | bit] - table[mask]))
                .sum()
        })
        .collect();

    ValuationResult::new(values, Method::Exact, json!({ "n": n }), 0)
}

fn members(mask: usize, n: usize) -> Vec<usize> {
    (0..n).filter(|i| mask & (1 << i) != 0).collect()
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Output of one sampling chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainResult {
    pub chain_index: usize,
    /// Per-instance contribution sum divided by `T` (or by the inclusion count
    /// under [`Normalization::Inclusions`]).
    pub mean_contributions: Vec<f64>,
    /// Iterations in which each instance was sampled.
    pub inclusion_counts: Vec<usize>,
}

/// Runs chain `chain_index` with the stream derived from the master seed. The
/// result does not depend on which other chains run or on thread scheduling.
pub fn run_chain<V>(
    value_fn: &V,
    n: usize,
    config: &SamplingConfig,
    chain_index: usize,
) -> Result<ChainResult>
where
    V: ValueFunction + ?Sized,
{
    config.validate(n)?;
    let mut rng = chain_rng(config.master_seed, chain_index);
    let min_size = config.subset_size.div_ceil(2);
    let max_size = config.subset_size;

    let mut pool: Vec<usize> = (0..n).collect();
    let mut sums = vec![0.0; n];
    let mut inclusion_counts = vec![0usize; n];
    for _ in 0..config.iterations {
        let size = rng.random_range(min_size..=max_size);
        // The first `size` entries become a uniform sample in uniform order,
        // which doubles as the removal order.
        let (removal_order, _) = pool.partial_shuffle(&mut rng, size);
        let removal_order: &[usize] = removal_order;

        // path[j] = v(removal_order[j..]), so path[size] = v(∅).
        let path: Vec<f64> = (0..=size)
            .into_par_iter()
            .map(|j| value_fn.evaluate(&removal_order[j..]))
            .collect();
        for (j, &i) in removal_order.iter().enumerate() {
            sums[i] += path[j] - path[j + 1];
            inclusion_counts[i] += 1;
        }
    }

    let mean_contributions = match config.normalization {
        Normalization::Iterations => {
            let t = config.iterations as f64;
            sums.iter().map(|s| s / t).collect()
        }
        Normalization::Inclusions => sums
            .iter()
            .zip(&inclusion_counts)
            .map(|(&s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
            .collect(),
    };

    Ok(ChainResult {
        chain_index,
        mean_contributions,
        inclusion_counts,
    })
}

/// Runs all chains (in parallel on the current rayon pool) and averages them
/// in ascending chain order.
pub fn estimate_values<V>(
    value_fn: &V,
    n: usize,
    config: &SamplingConfig,
) -> Result<ValuationResult>
where
    V: ValueFunction + ?Sized,
{
    config.validate(n)?;
    let chains = (0..config.chains)
        .into_par_iter()
        .map(|c| run_chain(value_fn, n, config, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate_chains(&chains, n, config))
}

/// Averages chain results in the order given. Callers pass them sorted by
/// `chain_index` for reproducible sums.
pub fn aggregate_chains(
    chains: &[ChainResult],
    n: usize,
    config: &SamplingConfig,
) -> ValuationResult {
    let mut totals = vec![0.0; n];
    for chain in chains {
        for (t, m) in totals.iter_mut().zip(&chain.mean_contributions) {
            *t += m;
        }
    }
    let j = chains.len() as f64;
    let values = totals.into_iter().map(|t| t / j).collect();
    let echo = json!({
        "n": n,
        "subset_size": config.subset_size,
        "iterations": config.iterations,
        "chains": config.chains,
        "normalization": config.normalization,
    });
    ValuationResult {
        values,
        method: Method::TsDshapley,
        config_echo: echo,
        seed: config.master_seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn additive(w: Vec<f64>) -> impl Fn(&[usize]) -> f64 + Send + Sync {
        move |s: &[usize]| s.iter().map(|&i| w[i]).sum()
    }

    #[test]
    fn exact_additive_game_returns_weights() {
        let phi = exact_shapley(&additive(vec![0.5, 0.3, 0.2]), 3).unwrap();
        for (p, w) in phi.values.iter().zip([0.5, 0.3, 0.2]) {
            assert!((p - w).abs() < 1e-12, "{p} vs {w}");
        }
    }

    #[test]
    fn exact_cardinality_game_is_uniform() {
        let v = |s: &[usize]| s.len() as f64;
        let phi = exact_shapley(&v, 3).unwrap();
        for p in &phi.values {
            assert!((p - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_guard() {
        let v = |_: &[usize]| 0.0;
        assert!(matches!(
            exact_shapley(&v, 21),
            Err(Error::TooManyPlayers { n: 21, .. })
        ));
        assert!(exact_shapley(&v, 0).unwrap().values.is_empty());
    }

    #[test]
    fn chain_on_additive_game_credits_weight_per_inclusion() {
        let w = vec![0.4, 0.1, 0.25, 0.7, 0.05];
        let config = SamplingConfig::new(4, 37, 1, 99);
        let chain = run_chain(&additive(w.clone()), 5, &config, 3).unwrap();
        for i in 0..5 {
            let expected = w[i] * chain.inclusion_counts[i] as f64 / 37.0;
            assert!((chain.mean_contributions[i] - expected).abs() < 1e-12);
            assert!(chain.inclusion_counts[i] <= 37);
        }
    }

    #[test]
    fn chain_sizes_stay_in_range() {
        // v(S) = |S| credits exactly 1 per removal, so per-iteration sizes can
        // be recovered from the inclusion total.
        let v = |s: &[usize]| s.len() as f64;
        let config = SamplingConfig::new(7, 200, 1, 5);
        let chain = run_chain(&v, 10, &config, 0).unwrap();
        let total: usize = chain.inclusion_counts.iter().sum();
        assert!((4 * 200..=7 * 200).contains(&total));
    }

    #[test]
    fn single_instance_chain() {
        let v = |s: &[usize]| if s.is_empty() { 0.2 } else { 0.9 };
        let config = SamplingConfig::new(1, 10, 1, 0);
        let chain = run_chain(&v, 1, &config, 0).unwrap();
        assert_eq!(chain.inclusion_counts, vec![10]);
        assert!((chain.mean_contributions[0] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn constant_game_gives_zero() {
        let v = |_: &[usize]| 0.7;
        let config = SamplingConfig::new(3, 20, 2, 1);
        let est = estimate_values(&v, 6, &config).unwrap();
        assert!(est.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_chain_estimate_equals_chain_mean() {
        let v = additive(vec![0.1, 0.2, 0.3, 0.4]);
        let config = SamplingConfig::new(3, 25, 1, 11);
        let est = estimate_values(&v, 4, &config).unwrap();
        let chain = run_chain(&v, 4, &config, 0).unwrap();
        assert_eq!(est.values, chain.mean_contributions);
    }

    #[test]
    fn subset_larger_than_n_is_rejected() {
        let v = |_: &[usize]| 0.0;
        assert!(run_chain(&v, 3, &SamplingConfig::new(4, 1, 1, 0), 0).is_err());
    }

    #[test]
    fn inclusion_normalization_recovers_weights_on_additive_game() {
        let w = vec![0.4, 0.1, 0.3];
        let mut config = SamplingConfig::new(2, 50, 3, 8);
        config.normalization = Normalization::Inclusions;
        let est = estimate_values(&additive(w.clone()), 3, &config).unwrap();
        for (e, w) in est.values.iter().zip(&w) {
            assert!((e - w).abs() < 1e-12);
        }
    }

    #[test]
    fn rerunning_one_chain_reproduces_it() {
        let v = |s: &[usize]| {
            s.iter()
                .map(|&i| ((i * 37) % 11) as f64)
                .sum::<f64>()
                .sqrt()
        };
        let config = SamplingConfig::new(6, 30, 4, 2024);
        let a = run_chain(&v, 9, &config, 2).unwrap();
        let b = run_chain(&v, 9, &config, 2).unwrap();
        let other = run_chain(&v, 9, &config, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.inclusion_counts, other.inclusion_counts);
    }
}
