//! Maximum-likelihood source estimation from observer arrival times.
//!
//! With i.i.d. Gaussian edge delays on a tree, the arrival-time differences
//! `d` of the active observers relative to a reference observer are
//! Gaussian with a candidate-dependent mean `μ_s` (path-length differences
//! times `mu`) and a candidate-independent covariance `Λ` (shared path
//! lengths from the reference times `sigma²`). Maximizing the likelihood
//! over candidates reduces to maximizing
//!
//! ```text
//! S(s) = μ_sᵀ Λ⁻¹ (d − μ_s / 2)
//! ```
//!
//! On general graphs every candidate is scored on its own BFS tree.

mod oracle;
mod quantities;

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

pub use oracle::{gaussian_likelihood_oracle, pmax_oracle};
pub use quantities::{
    delay_covariance, delay_vector, delay_vector_with_reference, deterministic_delay, score, DelayCovariance,
    DelayVector, DeterministicDelay,
};

use crate::diffusion::{DelayModel, Observation};
use crate::error::{Error, Result};
use crate::graph::{bfs_tree, Graph, NodeId, Tree};

/// Relative score gap below which candidates count as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Candidate sources consistent with the observed arrival directions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSet(Vec<NodeId>);

impl CandidateSet {
    pub fn nodes(&self) -> &[NodeId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, u: NodeId) -> bool {
        self.0.binary_search(&u).is_ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateStatus {
    /// A unique best candidate.
    Confident,
    /// Several candidates share the best score.
    Tied,
    /// Fewer than two active observers: only directions were usable.
    DirectionOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorResult {
    /// Score per candidate, ascending by node.
    pub scores: Vec<(NodeId, f64)>,
    pub estimate: NodeId,
    /// Candidates within the tie tolerance of the best score, ascending.
    pub tied_top: Vec<NodeId>,
    pub status: EstimateStatus,
}

impl EstimatorResult {
    pub(crate) fn from_scores(scores: Vec<(NodeId, f64)>, direction_only: bool) -> Result<Self> {
        let best = scores.iter().map(|&(_, s)| s).max_by(f64::total_cmp).ok_or(Error::EmptyCandidateSet)?;
        let tol = TIE_TOLERANCE * best.abs().max(1.0);
        let tied_top: Vec<NodeId> = scores.iter().filter(|&&(_, s)| s >= best - tol).map(|&(u, _)| u).collect();
        let status = if direction_only {
            EstimateStatus::DirectionOnly
        } else if tied_top.len() > 1 {
            EstimateStatus::Tied
        } else {
            EstimateStatus::Confident
        };
        Ok(Self { scores, estimate: tied_top[0], tied_top, status })
    }

    /// The tied top candidates by ascending node, then the rest by
    /// descending score (ties by ascending node).
    pub fn ranked(&self) -> Vec<(NodeId, f64)> {
        let top = |u: NodeId| self.tied_top.binary_search(&u).is_ok();
        let mut ranked = self.scores.clone();
        ranked.sort_by(|a, b| {
            top(b.0)
                .cmp(&top(a.0))
                .then(if top(a.0) { std::cmp::Ordering::Equal } else { b.1.total_cmp(&a.1) })
                .then(a.0.cmp(&b.0))
        });
        ranked
    }

    pub fn score_of(&self, u: NodeId) -> Option<f64> {
        self.scores.binary_search_by_key(&u, |&(v, _)| v).ok().map(|i| self.scores[i].1)
    }
}

/// Network an estimate runs on.
#[derive(Debug, Clone, Copy)]
pub enum Network<'a> {
    Tree(&'a Tree),
    Graph(&'a Graph),
}

/// Hop distances from one observer, over a tree.
pub(crate) struct ObserverView {
    pub dist: Vec<u32>,
}

const UNREACHED: u32 = u32::MAX;

impl ObserverView {
    pub fn new(tree: &Tree, observer: NodeId) -> Self {
        let g = tree.graph();
        let mut dist = vec![UNREACHED; g.node_count()];
        let mut queue = VecDeque::with_capacity(tree.len());
        dist[observer] = 0;
        queue.push_back(observer);
        while let Some(u) = queue.pop_front() {
            for &v in g.neighbors(u) {
                if dist[v] == UNREACHED {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        Self { dist }
    }
}

/// Cholesky-factored SPD matrix used for repeated Gaussian scores.
pub(crate) struct SpdSolver(nalgebra::Cholesky<f64, nalgebra::Dyn>);

impl SpdSolver {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        matrix.cholesky().map(Self).ok_or(Error::NotPositiveDefinite)
    }

    /// `μᵀ Λ⁻¹ (d − μ/2)`.
    pub fn score(&self, mu: &DVector<f64>, d: &DVector<f64>) -> f64 {
        let residual = d - mu * 0.5;
        mu.dot(&self.0.solve(&residual))
    }
}

fn check_records_on(g: &Graph, obs: &Observation, in_scope: impl Fn(NodeId) -> bool) -> Result<()> {
    for r in obs.records() {
        if !in_scope(r.observer) || !g.has_edge(r.observer, r.from_node) {
            return Err(Error::InconsistentObservation(format!(
                "observer {} cannot have heard from {}",
                r.observer, r.from_node
            )));
        }
    }
    Ok(())
}

/// Observations of all cascades merged into one delay vector over the
/// observers active in every cascade.
struct Fused {
    /// Common active observers, ascending; the first is the reference.
    order: Vec<NodeId>,
    /// Cascade-averaged delays.
    delays: DVector<f64>,
    cascades: usize,
    deployed: Vec<NodeId>,
}

fn fuse(observations: &[Observation]) -> Result<Fused> {
    let first = observations.first().ok_or_else(|| Error::param("observations", "need at least one cascade"))?;
    let mut order = first.active_observers();
    for obs in &observations[1..] {
        order.retain(|&o| obs.record(o).is_some());
    }
    if order.is_empty() {
        return Err(Error::InsufficientObservers { required: 1, found: 0 });
    }
    let mut deployed: Vec<NodeId> = observations.iter().flat_map(|o| o.deployed().iter().copied()).collect();
    deployed.sort_unstable();
    deployed.dedup();

    let dim = order.len() - 1;
    let mut sum = DVector::zeros(dim);
    for obs in observations {
        let t1 = obs.record(order[0]).unwrap().time;
        for (k, &o) in order[1..].iter().enumerate() {
            sum[k] += obs.record(o).unwrap().time - t1;
        }
    }
    let delays = sum / observations.len() as f64;
    Ok(Fused { order, delays, cascades: observations.len(), deployed })
}

fn direction_only(candidates: &[NodeId]) -> Result<EstimatorResult> {
    EstimatorResult::from_scores(candidates.iter().map(|&u| (u, 0.0)).collect(), true)
}

/// Converts a normalized score (covariance divided by `sigma²`) into the
/// likelihood score for `cascades` fused cascades. With `sigma = 0` the
/// normalized score is kept: it has the same maximizers as the `sigma → 0`
/// limit.
fn rescale(normalized: f64, sigma: f64, cascades: usize) -> f64 {
    let scale = if sigma > 0.0 { cascades as f64 / (sigma * sigma) } else { 1.0 };
    normalized * scale
}

/// Nodes on the `from` side of every active observer, minus all observers.
pub fn active_subtree(tree: &Tree, obs: &Observation) -> Result<CandidateSet> {
    check_records_on(tree.graph(), obs, |u| tree.contains(u))?;
    let records: Vec<(NodeId, NodeId)> = obs.records().iter().map(|r| (r.observer, r.from_node)).collect();
    let mut nodes = Vec::new();
    walk_active_region(
        tree,
        &records,
        &[],
        |_| (),
        |u, _| {
            if obs.deployed().binary_search(&u).is_err() {
                nodes.push(u);
            }
        },
    )?;
    if nodes.is_empty() {
        return Err(Error::EmptyCandidateSet);
    }
    nodes.sort_unstable();
    Ok(CandidateSet(nodes))
}

/// Visits every node on the `from` side of all `records` (observer, from)
/// once, passing `visit` the label of its hop distances to `tracked`.
///
/// In preorder the region is one subtree interval with the subtrees of
/// the observers it faces cut out, so it is read in a single forward scan,
/// each node after its parent.
///
/// Labels depend only on distance differences: `label` runs once per
/// distinct difference pattern, and a step that moves every tracked
/// observer one hop nearer or farther reuses the parent's label.
fn walk_active_region<T>(
    tree: &Tree,
    records: &[(NodeId, NodeId)],
    tracked: &[NodeId],
    mut label: impl FnMut(&[u32]) -> T,
    mut visit: impl FnMut(NodeId, &T),
) -> Result<()> {
    let pre = tree.preorder();
    let (mut lo, mut hi) = (0u32, pre.len() as u32);
    let mut cuts = Vec::new();
    for &(observer, from) in records {
        if tree.parent(from) == Some(observer) {
            let (a, b) = tree.preorder_span(from);
            lo = lo.max(a);
            hi = hi.min(b);
        } else {
            cuts.push(tree.preorder_span(observer));
        }
    }
    cuts.sort_unstable();
    if lo >= hi || cuts.iter().any(|&(a, b)| a <= lo && lo < b) {
        return Err(Error::EmptyCandidateSet);
    }

    let k = tracked.len();
    let enters: Vec<u32> = tracked.iter().map(|&o| tree.preorder_span(o).0).collect();
    // `before[p - lo]`: tracked observers at preorder positions below `p`.
    let mut before = vec![0u32; (hi - lo + 1) as usize];
    for &t in &enters {
        if (lo..hi).contains(&t) {
            before[(t - lo + 1) as usize] += 1;
        }
    }
    for i in 1..before.len() {
        before[i] += before[i - 1];
    }
    let tracked_within = |a: u32, b: u32| (before[(b - lo) as usize] - before[(a - lo) as usize]) as usize;

    let top = pre[lo as usize].node as NodeId;
    // Distances at a signature `sig` are `dists[sig * k..]` plus the node's shift.
    let mut dists: Vec<u32> =
        tracked.iter().map(|&o| tree.path_len(top, o).map(|d| d as u32)).collect::<Result<_>>()?;
    let mut labels = vec![label(&dists)];
    let mut at = vec![(0u32, 0i32); (hi - lo) as usize];
    visit(top, &labels[0]);

    let mut next_cut = cuts.iter().peekable();
    let mut p = lo + 1;
    while p < hi {
        if let Some(&&(a, b)) = next_cut.peek() {
            if a <= p {
                next_cut.next();
                p = p.max(b);
                continue;
            }
        }
        let slot = pre[p as usize];
        let (sig, shift) = at[(slot.parent - lo) as usize];
        let inside = tracked_within(p, slot.end);
        let here = if inside == 0 {
            (sig, shift + 1)
        } else if inside == k {
            (sig, shift - 1)
        } else {
            let next = labels.len() as u32;
            for (i, &t) in enters.iter().enumerate() {
                let d = dists[sig as usize * k + i] as i32 + shift;
                let within = p <= t && t < slot.end;
                dists.push((if within { d - 1 } else { d + 1 }) as u32);
            }
            labels.push(label(&dists[next as usize * k..]));
            (next, 0)
        };
        at[(p - lo) as usize] = here;
        visit(slot.node as NodeId, &labels[here.0 as usize]);
        p += 1;
    }
    Ok(())
}

/// `μᵀ Λ⁻¹ (d − μ/2)` for many `μ` against one `Λ` and `d`: with
/// `Λ = L Lᵀ` and `w = Λ⁻¹ d` precomputed, each score is `μᵀw − ½‖L⁻¹μ‖²`.
struct BatchScorer {
    /// Rows of `L` below the diagonal, packed.
    lower: Vec<f64>,
    inv_diag: Vec<f64>,
    weights: Vec<f64>,
    scratch: Vec<f64>,
}

impl BatchScorer {
    fn new(cov: DMatrix<f64>, d: &DVector<f64>) -> Result<Self> {
        let chol = cov.cholesky().ok_or(Error::NotPositiveDefinite)?;
        let weights = chol.solve(d).as_slice().to_vec();
        let l = chol.unpack();
        let dim = d.len();
        let mut lower = Vec::with_capacity(dim * dim.saturating_sub(1) / 2);
        for i in 0..dim {
            lower.extend((0..i).map(|j| l[(i, j)]));
        }
        Ok(Self { lower, inv_diag: (0..dim).map(|i| 1.0 / l[(i, i)]).collect(), weights, scratch: vec![0.0; dim] })
    }

    fn score(&mut self, mu: &[f64]) -> f64 {
        let mut linear = 0.0;
        let mut quad = 0.0;
        let mut row = 0;
        for (i, (&m, &w)) in mu.iter().zip(&self.weights).enumerate() {
            let solved = &self.scratch[..i];
            let acc: f64 = self.lower[row..row + i].iter().zip(solved).map(|(a, b)| a * b).sum();
            row += i;
            let y = (m - acc) * self.inv_diag[i];
            self.scratch[i] = y;
            quad += y * y;
            linear += m * w;
        }
        linear - 0.5 * quad
    }
}

fn estimate_on_tree(tree: &Tree, observations: &[Observation], model: &DelayModel) -> Result<EstimatorResult> {
    for obs in observations {
        check_records_on(tree.graph(), obs, |u| tree.contains(u))?;
    }
    let fused = fuse(observations)?;
    // Direction constraints are noiseless, so every cascade's cut applies.
    let mut records: Vec<(NodeId, NodeId)> =
        observations.iter().flat_map(|o| o.records().iter().map(|r| (r.observer, r.from_node))).collect();
    records.sort_unstable();
    records.dedup();
    let n = tree.graph().node_count();
    let excluded = |u: NodeId| fused.deployed.binary_search(&u).is_ok();

    if fused.order.len() == 1 {
        let mut candidates = Vec::new();
        walk_active_region(
            tree,
            &records,
            &[],
            |_| (),
            |u, _| {
                if !excluded(u) {
                    candidates.push(u);
                }
            },
        )?;
        if candidates.is_empty() {
            return Err(Error::EmptyCandidateSet);
        }
        candidates.sort_unstable();
        return direction_only(&candidates);
    }

    let order = &fused.order;
    let dim = order.len() - 1;
    let anchor_len: Vec<f64> =
        order[1..].iter().map(|&o| tree.path_len(order[0], o).map(|l| l as f64)).collect::<Result<_>>()?;
    let mut cov = DMatrix::zeros(dim, dim);
    for k in 0..dim {
        cov[(k, k)] = anchor_len[k];
        for i in 0..k {
            let between = tree.path_len(order[k + 1], order[i + 1])? as f64;
            let shared = (anchor_len[k] + anchor_len[i] - between) / 2.0;
            cov[(k, i)] = shared;
            cov[(i, k)] = shared;
        }
    }
    let mut scorer = BatchScorer::new(cov, &fused.delays)?;

    let mu = model.mu();
    let mut mu_s = vec![0.0; dim];
    let mut slots = vec![f64::NAN; n];
    let label = |dist: &[u32]| {
        let base = f64::from(dist[0]);
        for (m, &d) in mu_s.iter_mut().zip(&dist[1..]) {
            *m = mu * (f64::from(d) - base);
        }
        rescale(scorer.score(&mu_s), model.sigma(), fused.cascades)
    };
    walk_active_region(tree, &records, order, label, |s, &score| slots[s] = score)?;
    // Silent observers can sit inside the region but are never candidates.
    for &u in &fused.deployed {
        if let Some(x) = slots.get_mut(u) {
            *x = f64::NAN;
        }
    }
    let scores: Vec<(NodeId, f64)> = slots.into_iter().enumerate().filter(|(_, x)| !x.is_nan()).collect();
    if scores.is_empty() {
        return Err(Error::EmptyCandidateSet);
    }
    EstimatorResult::from_scores(scores, false)
}

/// Optimal estimator on a tree: best Gaussian score over the active subtree.
pub fn estimate_tree(tree: &Tree, obs: &Observation, model: &DelayModel) -> Result<EstimatorResult> {
    estimate_on_tree(tree, std::slice::from_ref(obs), model)
}

/// Estimator for general graphs: every non-observer node of the observers'
/// component is scored on its own BFS tree.
///
/// On an acyclic component the BFS trees coincide with the component itself,
/// so the tree estimator (including its direction pruning) is used.
pub fn estimate_graph(g: &Graph, obs: &Observation, model: &DelayModel) -> Result<EstimatorResult> {
    estimate_on_graph(g, std::slice::from_ref(obs), model)
}

fn estimate_on_graph(g: &Graph, observations: &[Observation], model: &DelayModel) -> Result<EstimatorResult> {
    for obs in observations {
        check_records_on(g, obs, |u| u < g.node_count())?;
    }
    let fused = fuse(observations)?;
    let labels = g.component_labels();
    let component = labels[fused.order[0]];
    if observations.iter().flat_map(|o| o.records()).any(|r| labels[r.observer] != component) {
        return Err(Error::ObserversDisconnected);
    }

    let members: Vec<NodeId> = (0..g.node_count()).filter(|&u| labels[u] == component).collect();
    let internal_edges = g.edges().iter().filter(|&&(u, _)| labels[u] == component).count();
    if internal_edges + 1 == members.len() {
        let tree = bfs_tree(g, fused.order[0])?;
        return estimate_on_tree(&tree, observations, model);
    }

    let candidates: Vec<NodeId> = members.into_iter().filter(|u| fused.deployed.binary_search(u).is_err()).collect();
    if candidates.is_empty() {
        return Err(Error::EmptyCandidateSet);
    }
    if fused.order.len() == 1 {
        return direction_only(&candidates);
    }

    let scores = candidates
        .par_iter()
        .map(|&s| {
            let tree = bfs_tree(g, s)?;
            bfs_tree_score(&tree, &fused, model).map(|score| (s, score))
        })
        .collect::<Result<Vec<_>>>()?;
    EstimatorResult::from_scores(scores, false)
}

/// Score of the BFS tree's root as the source.
fn bfs_tree_score(tree: &Tree, fused: &Fused, model: &DelayModel) -> Result<f64> {
    let order = &fused.order;
    let dim = order.len() - 1;
    let depth = |u: NodeId| tree.depth(u).expect("observer in component") as f64;
    let anchor_len: Vec<f64> =
        order[1..].iter().map(|&o| tree.path_len(order[0], o).map(|l| l as f64)).collect::<Result<_>>()?;
    let mut cov = DMatrix::zeros(dim, dim);
    for k in 0..dim {
        cov[(k, k)] = anchor_len[k];
        for i in 0..k {
            let between = tree.path_len(order[k + 1], order[i + 1])? as f64;
            let shared = (anchor_len[k] + anchor_len[i] - between) / 2.0;
            cov[(k, i)] = shared;
            cov[(i, k)] = shared;
        }
    }
    let base = depth(order[0]);
    let mu_s = DVector::from_iterator(dim, order[1..].iter().map(|&o| model.mu() * (depth(o) - base)));
    let normalized = SpdSolver::new(cov)?.score(&mu_s, &fused.delays);
    Ok(rescale(normalized, model.sigma(), fused.cascades))
}

/// Fuses `C` cascades from the same source: delays of the observers active
/// in all cascades are averaged, direction cuts from every cascade apply,
/// and the covariance shrinks by `1/C`.
pub fn estimate_multi(
    network: Network<'_>,
    observations: &[Observation],
    model: &DelayModel,
) -> Result<EstimatorResult> {
    match network {
        Network::Tree(t) => estimate_on_tree(t, observations, model),
        Network::Graph(g) => estimate_on_graph(g, observations, model),
    }
}
