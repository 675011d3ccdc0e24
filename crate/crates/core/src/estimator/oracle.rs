//! Reference computations for checking the estimator.

use std::collections::HashMap;

use statrs::distribution::{Continuous, MultivariateNormal};

use super::{active_subtree, delay_covariance, delay_vector, deterministic_delay, EstimatorResult, ObserverView};
use crate::diffusion::{DelayModel, Observation};
use crate::error::{Error, Result};
use crate::graph::Tree;
use crate::placement::ObserverSet;

/// Direct Gaussian likelihood over the active subtree: the log-density of
/// `d` under `N(μ_s, Λ)` for each candidate, with path lengths taken from
/// LCA queries rather than observer sweeps.
///
/// Since `Λ` does not depend on the candidate, the maximizers match
/// [`super::estimate_tree`] exactly.
pub fn gaussian_likelihood_oracle(tree: &Tree, obs: &Observation, model: &DelayModel) -> Result<EstimatorResult> {
    if model.sigma() <= 0.0 {
        return Err(Error::param("sigma", "the density needs sigma > 0"));
    }
    let candidates = active_subtree(tree, obs)?;
    let d = delay_vector(obs)?;
    let cov = delay_covariance(tree, d.observers(), model.sigma())?;
    let x: Vec<f64> = d.entries().iter().copied().collect();
    let cov_flat: Vec<f64> = cov.matrix.iter().copied().collect();

    let scores = candidates
        .nodes()
        .iter()
        .map(|&s| {
            let mean = deterministic_delay(tree, s, d.observers(), model.mu())?;
            let mvn = MultivariateNormal::new(mean.entries.iter().copied().collect(), cov_flat.clone())
                .map_err(|_| Error::NotPositiveDefinite)?;
            Ok((s, mvn.ln_pdf(&x.clone().into())))
        })
        .collect::<Result<Vec<_>>>()?;
    EstimatorResult::from_scores(scores, false)
}

/// Best achievable localization probability under deterministic delays.
///
/// For each non-observer source, the estimator sees exactly its mean delay
/// vector, and every candidate of its active subtree with the same vector
/// ties with it. Averaging `1 / class size` over sources gives the
/// probability of picking the right one when ties are broken arbitrarily.
/// All observers are assumed active (connected tree, no horizon).
pub fn pmax_oracle(tree: &Tree, observers: &ObserverSet, mu: f64) -> Result<f64> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::param("mu", format!("must be finite and > 0, got {mu}")));
    }
    let n = tree.graph().node_count();
    for &o in observers.nodes() {
        if !tree.contains(o) {
            return Err(Error::NodeNotInTree(o));
        }
    }
    let views: Vec<ObserverView> = observers.nodes().iter().map(|&o| ObserverView::new(tree, o)).collect();
    let is_observer = observers.mask(n);

    // Direction classes: removing observers splits the tree into pieces, and
    // each piece is one active subtree.
    let mut piece = vec![usize::MAX; n];
    let mut pieces = 0;
    for start in 0..n {
        if is_observer[start] || !tree.contains(start) || piece[start] != usize::MAX {
            continue;
        }
        piece[start] = pieces;
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for &v in tree.graph().neighbors(u) {
                if !is_observer[v] && piece[v] == usize::MAX {
                    piece[v] = pieces;
                    stack.push(v);
                }
            }
        }
        pieces += 1;
    }

    let mut class_size: HashMap<(usize, Vec<i64>), usize> = HashMap::new();
    let mut signatures = Vec::new();
    for u in (0..n).filter(|&u| piece[u] != usize::MAX) {
        let base = i64::from(views[0].dist[u]);
        let signature: Vec<i64> = views[1..].iter().map(|v| i64::from(v.dist[u]) - base).collect();
        let key = (piece[u], signature);
        *class_size.entry(key.clone()).or_default() += 1;
        signatures.push(key);
    }
    if signatures.is_empty() {
        return Err(Error::EmptyCandidateSet);
    }
    let total: f64 = signatures.iter().map(|k| 1.0 / class_size[k] as f64).sum();
    Ok(total / signatures.len() as f64)
}
