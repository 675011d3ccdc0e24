//! The delay vector, per-candidate mean, and covariance as standalone
//! values, computed from tree path lengths.

use nalgebra::{DMatrix, DVector};

use super::SpdSolver;
use crate::diffusion::Observation;
use crate::error::{Error, Result};
use crate::graph::{NodeId, Tree};

/// Arrival-time differences `t_k − t_ref` of the active observers.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayVector {
    /// Reference first, then the other active observers ascending.
    observers: Vec<NodeId>,
    entries: DVector<f64>,
}

impl DelayVector {
    pub fn reference(&self) -> NodeId {
        self.observers[0]
    }

    /// Observer order the entries refer to; entry `k` belongs to `observers()[k + 1]`.
    pub fn observers(&self) -> &[NodeId] {
        &self.observers
    }

    pub fn entries(&self) -> &DVector<f64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }
}

/// Delay vector referenced to the smallest-index active observer.
pub fn delay_vector(obs: &Observation) -> Result<DelayVector> {
    let active = obs.active_observers();
    if active.len() < 2 {
        return Err(Error::InsufficientObservers { required: 2, found: active.len() });
    }
    delay_vector_with_reference(obs, active[0])
}

/// Delay vector referenced to a chosen active observer.
pub fn delay_vector_with_reference(obs: &Observation, reference: NodeId) -> Result<DelayVector> {
    let active = obs.active_observers();
    if active.len() < 2 {
        return Err(Error::InsufficientObservers { required: 2, found: active.len() });
    }
    let t_ref = obs
        .record(reference)
        .ok_or_else(|| Error::InconsistentObservation(format!("{reference} is not an active observer")))?
        .time;
    let mut observers = vec![reference];
    observers.extend(active.into_iter().filter(|&o| o != reference));
    let entries = DVector::from_iterator(
        observers.len() - 1,
        observers[1..].iter().map(|&o| obs.record(o).unwrap().time - t_ref),
    );
    Ok(DelayVector { observers, entries })
}

/// Expected delay vector if `candidate` were the source.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicDelay {
    pub candidate: NodeId,
    pub entries: DVector<f64>,
}

/// `mu · (|P(s, o_k)| − |P(s, o_ref)|)` for each non-reference observer,
/// with `observers` ordered as in [`DelayVector::observers`].
pub fn deterministic_delay(tree: &Tree, s: NodeId, observers: &[NodeId], mu: f64) -> Result<DeterministicDelay> {
    let (&reference, rest) = observers.split_first().ok_or(Error::InsufficientObservers { required: 1, found: 0 })?;
    let base = tree.path_len(s, reference)? as f64;
    let entries = rest.iter().map(|&o| Ok(mu * (tree.path_len(s, o)? as f64 - base))).collect::<Result<Vec<f64>>>()?;
    Ok(DeterministicDelay { candidate: s, entries: DVector::from_vec(entries) })
}

/// Covariance of the delay vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayCovariance {
    pub matrix: DMatrix<f64>,
}

/// `sigma²` times the number of edges the paths from the reference to
/// observers `k` and `i` share (the full path length on the diagonal).
pub fn delay_covariance(tree: &Tree, observers: &[NodeId], sigma: f64) -> Result<DelayCovariance> {
    if observers.len() < 2 {
        return Err(Error::InsufficientObservers { required: 2, found: observers.len() });
    }
    let mut sorted = observers.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::NotPositiveDefinite);
    }
    let reference = observers[0];
    let rest = &observers[1..];
    let var = sigma * sigma;
    let mut matrix = DMatrix::zeros(rest.len(), rest.len());
    for (k, &ok) in rest.iter().enumerate() {
        for (i, &oi) in rest.iter().enumerate().take(k + 1) {
            let shared = tree.path_overlap(reference, ok, oi)? as f64;
            matrix[(k, i)] = var * shared;
            matrix[(i, k)] = var * shared;
        }
    }
    Ok(DelayCovariance { matrix })
}

/// `μ_sᵀ Λ⁻¹ (d − μ_s / 2)` via a Cholesky solve.
pub fn score(mu_s: &DeterministicDelay, cov: &DelayCovariance, d: &DelayVector) -> Result<f64> {
    let dim = d.dim();
    for found in [mu_s.entries.len(), cov.matrix.nrows(), cov.matrix.ncols()] {
        if found != dim {
            return Err(Error::DimensionMismatch { expected: dim, found });
        }
    }
    Ok(SpdSolver::new(cov.matrix.clone())?.score(&mu_s.entries, d.entries()))
}
