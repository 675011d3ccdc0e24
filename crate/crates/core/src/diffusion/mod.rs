//! Cascade simulation under the relay model and observer measurements.
//!
//! A node informed at time `t_u` forwards to every other neighbor `v`, which
//! hears it at `t_u + θ_uv`. Each node keeps only its first arrival, so the
//! arrival times are single-source shortest-path distances under the sampled
//! edge delays, and the arrival parents form a shortest-path tree.

mod io;

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::Rng;
use rand_distr::{Distribution, Normal};

pub use io::format_time;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::placement::ObserverSet;
use crate::rng::{derive_seed, seeded};

const START_TIME_STREAM: u64 = 0x5741_5254;

/// I.i.d. Gaussian per-edge delay `N(mu, sigma^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayModel {
    mu: f64,
    sigma: f64,
}

impl DelayModel {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::param("mu", format!("must be finite and > 0, got {mu}")));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::param("sigma", format!("must be finite and >= 0, got {sigma}")));
        }
        if sigma > 0.0 && mu / sigma < 3.0 {
            log::warn!(
                "mu/sigma = {:.3} < 3: negative delays are not rare, truncation skews the delay law",
                mu / sigma
            );
        }
        Ok(Self { mu, sigma })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Same model with both parameters multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.mu * factor, self.sigma * factor)
    }

    /// One strictly positive draw; negative or zero draws are redrawn.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.sigma == 0.0 {
            return self.mu;
        }
        let normal = Normal::new(self.mu, self.sigma).expect("validated parameters");
        loop {
            let x = normal.sample(rng);
            if x > 0.0 {
                return x;
            }
        }
    }
}

/// One delay per edge, indexed by edge id.
pub fn sample_delays(g: &Graph, model: &DelayModel, seed: u64) -> Vec<f64> {
    let mut rng = seeded(seed);
    (0..g.edge_count()).map(|_| model.sample(&mut rng)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionTrace {
    pub source: NodeId,
    pub start_time: f64,
    /// `None` for nodes the cascade never reaches.
    pub arrival_time: Vec<Option<f64>>,
    pub arrival_parent: Vec<Option<NodeId>>,
    /// Per edge id.
    pub sampled_delays: Vec<f64>,
}

impl DiffusionTrace {
    pub fn informed(&self, u: NodeId) -> bool {
        self.arrival_time[u].is_some()
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Arrival(f64, NodeId);

impl Eq for Arrival {}

impl PartialOrd for Arrival {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Arrival {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Runs one cascade from `source` started at `start_time`.
///
/// Equal arrival times are settled in node order, so under `sigma = 0`
/// the parent is the smallest-index node among equally fast predecessors.
pub fn simulate(g: &Graph, source: NodeId, start_time: f64, model: &DelayModel, seed: u64) -> Result<DiffusionTrace> {
    g.check_node(source)?;
    let delays = sample_delays(g, model, seed);
    let n = g.node_count();
    let mut arrival: Vec<Option<f64>> = vec![None; n];
    let mut parent = vec![None; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();
    arrival[source] = Some(start_time);
    heap.push(Reverse(Arrival(start_time, source)));

    while let Some(Reverse(Arrival(t, u))) = heap.pop() {
        if settled[u] {
            continue;
        }
        settled[u] = true;
        for (v, e) in g.incident(u) {
            if settled[v] {
                continue;
            }
            let candidate = t + delays[e];
            if arrival[v].is_none_or(|cur| candidate < cur) {
                arrival[v] = Some(candidate);
                parent[v] = Some(u);
                heap.push(Reverse(Arrival(candidate, v)));
            }
        }
    }

    Ok(DiffusionTrace { source, start_time, arrival_time: arrival, arrival_parent: parent, sampled_delays: delays })
}

/// What observer `observer` saw: the neighbor it first heard from, and when.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationRecord {
    pub observer: NodeId,
    pub from_node: NodeId,
    pub time: f64,
}

/// The estimator's entire view of one cascade.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// One per active observer, ascending by observer.
    records: Vec<ObservationRecord>,
    /// Every deployed observer, active or not, ascending.
    deployed: Vec<NodeId>,
}

impl Observation {
    /// Sorts records by observer and rejects repeats. `deployed` lists all
    /// monitored nodes including silent ones; when `None` only the active
    /// observers are known.
    pub fn new(mut records: Vec<ObservationRecord>, deployed: Option<&ObserverSet>) -> Result<Self> {
        records.sort_by_key(|r| r.observer);
        if let Some(w) = records.windows(2).find(|w| w[0].observer == w[1].observer) {
            return Err(Error::InconsistentObservation(format!("observer {} reported twice", w[0].observer)));
        }
        for r in &records {
            if !r.time.is_finite() {
                return Err(Error::InconsistentObservation(format!("observer {} has non-finite time", r.observer)));
            }
        }
        let mut deployed: Vec<NodeId> = match deployed {
            Some(set) => set.nodes().to_vec(),
            None => Vec::new(),
        };
        deployed.extend(records.iter().map(|r| r.observer));
        deployed.sort_unstable();
        deployed.dedup();
        Ok(Self { records, deployed })
    }

    pub fn records(&self) -> &[ObservationRecord] {
        &self.records
    }

    /// Active observers in ascending order; the first is the reference.
    pub fn active_observers(&self) -> Vec<NodeId> {
        self.records.iter().map(|r| r.observer).collect()
    }

    pub fn deployed(&self) -> &[NodeId] {
        &self.deployed
    }

    pub fn record(&self, observer: NodeId) -> Option<&ObservationRecord> {
        self.records.binary_search_by_key(&observer, |r| r.observer).ok().map(|i| &self.records[i])
    }

    /// Keeps only records of the given observers.
    pub fn restricted_to(&self, observers: &[NodeId]) -> Observation {
        Observation {
            records: self.records.iter().filter(|r| observers.contains(&r.observer)).copied().collect(),
            deployed: self.deployed.clone(),
        }
    }

    /// Adds `offset` to every time.
    pub fn shifted(&self, offset: f64) -> Observation {
        self.mapped_times(|t| t + offset)
    }

    pub(crate) fn mapped_times(&self, f: impl Fn(f64) -> f64) -> Observation {
        Observation {
            records: self.records.iter().map(|r| ObservationRecord { time: f(r.time), ..*r }).collect(),
            deployed: self.deployed.clone(),
        }
    }
}

/// Measurements of every informed observer other than the source.
pub fn observe(trace: &DiffusionTrace, observers: &ObserverSet) -> Observation {
    observe_until(trace, observers, f64::INFINITY)
}

/// As [`observe`], but observers informed more than `horizon` after the
/// start time stay silent.
pub fn observe_until(trace: &DiffusionTrace, observers: &ObserverSet, horizon: f64) -> Observation {
    let cutoff = trace.start_time + horizon;
    let records = observers
        .nodes()
        .iter()
        .filter(|&&o| o != trace.source)
        .filter_map(|&o| {
            let time = trace.arrival_time[o]?;
            (time <= cutoff).then(|| ObservationRecord {
                observer: o,
                from_node: trace.arrival_parent[o].expect("informed non-source has a parent"),
                time,
            })
        })
        .collect();
    Observation { records, deployed: observers.nodes().to_vec() }
}

/// Start time in `window` derived from a cascade seed.
pub fn cascade_start_time(seed: u64, window: (f64, f64)) -> f64 {
    let (lo, hi) = window;
    if hi <= lo {
        return lo;
    }
    seeded(derive_seed(seed, START_TIME_STREAM, 0)).random_range(lo..hi)
}

/// `seeds.len()` independent cascades from the same source, each with its
/// own delays and start time, observed by the same observers.
pub fn simulate_cascades(
    g: &Graph,
    source: NodeId,
    model: &DelayModel,
    observers: &ObserverSet,
    seeds: &[u64],
    start_window: (f64, f64),
    horizon: Option<f64>,
) -> Result<Vec<Observation>> {
    if seeds.is_empty() {
        return Err(Error::param("cascades", "need at least one cascade"));
    }
    seeds
        .iter()
        .map(|&seed| {
            let start = cascade_start_time(seed, start_window);
            let trace = simulate(g, source, start, model, seed)?;
            Ok(observe_until(&trace, observers, horizon.unwrap_or(f64::INFINITY)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{complete_graph, generate_er, generate_random_tree, path_graph};

    fn model(mu: f64, sigma: f64) -> DelayModel {
        DelayModel::new(mu, sigma).unwrap()
    }

    #[test]
    fn model_validation() {
        assert!(DelayModel::new(0.0, 1.0).is_err());
        assert!(DelayModel::new(1.0, -1.0).is_err());
        assert!(DelayModel::new(f64::NAN, 1.0).is_err());
        assert!(DelayModel::new(1.0, 0.0).is_ok());
    }

    #[test]
    fn zero_sigma_delays_are_mu() {
        let g = complete_graph(6);
        assert!(sample_delays(&g, &model(2.5, 0.0), 3).iter().all(|&d| d == 2.5));
    }

    #[test]
    fn truncated_mean_and_positivity() {
        // Star with 10^5 edges gives 10^5 draws in one call.
        let g = crate::graph::star_graph(100_000);
        let d = sample_delays(&g, &model(4.0, 1.0), 17);
        assert!(d.iter().all(|&x| x > 0.0));
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        assert!((3.99..=4.01).contains(&mean), "mean {mean}");
        assert_eq!(d, sample_delays(&g, &model(4.0, 1.0), 17));
    }

    #[test]
    fn deterministic_small_cases() {
        let m = model(4.0, 0.0);
        let t = simulate(&path_graph(2), 0, 0.0, &m, 1).unwrap();
        assert_eq!(t.arrival_time, vec![Some(0.0), Some(4.0)]);
        let t = simulate(&path_graph(3), 0, 0.0, &m, 1).unwrap();
        assert_eq!(t.arrival_time, vec![Some(0.0), Some(4.0), Some(8.0)]);
        let t = simulate(&complete_graph(3), 0, 0.0, &m, 1).unwrap();
        assert_eq!(t.arrival_time, vec![Some(0.0), Some(4.0), Some(4.0)]);
        assert_eq!(t.arrival_parent, vec![None, Some(0), Some(0)]);
        assert!(simulate(&path_graph(2), 5, 0.0, &m, 1).is_err());
    }

    /// Minimum delay sum over all simple paths, by exhaustive DFS.
    fn brute_force_arrivals(g: &Graph, delays: &[f64], source: NodeId) -> Vec<Option<f64>> {
        fn dfs(g: &Graph, delays: &[f64], u: NodeId, t: f64, visited: &mut Vec<bool>, best: &mut Vec<Option<f64>>) {
            if best[u].is_none_or(|b| t < b) {
                best[u] = Some(t);
            }
            for (v, e) in g.incident(u) {
                if !visited[v] {
                    visited[v] = true;
                    dfs(g, delays, v, t + delays[e], visited, best);
                    visited[v] = false;
                }
            }
        }
        let mut best = vec![None; g.node_count()];
        let mut visited = vec![false; g.node_count()];
        visited[source] = true;
        dfs(g, delays, source, 0.0, &mut visited, &mut best);
        best
    }

    #[test]
    fn arrivals_match_path_enumeration() {
        let m = model(1.0, 0.3);
        for seed in 0..50 {
            let g = generate_er(20, 0.12, seed).unwrap();
            let source = (seed as usize) % 20;
            let trace = simulate(&g, source, 0.0, &m, seed).unwrap();
            let brute = brute_force_arrivals(&g, &trace.sampled_delays, source);
            for v in 0..20 {
                match (trace.arrival_time[v], brute[v]) {
                    (None, None) => {}
                    (Some(a), Some(b)) => assert!((a - b).abs() < 1e-9, "seed {seed} node {v}"),
                    other => panic!("seed {seed} node {v}: {other:?}"),
                }
            }
        }
    }

    #[test]
    fn trace_invariants() {
        let m = model(2.0, 0.5);
        for seed in 0..30 {
            let g = generate_er(40, 0.06, seed).unwrap();
            let trace = simulate(&g, 0, 3.0, &m, seed).unwrap();
            let reach = g.hop_distances(0);
            for v in 0..40 {
                assert_eq!(trace.informed(v), reach[v].is_some());
                if v == 0 || !trace.informed(v) {
                    continue;
                }
                let p = trace.arrival_parent[v].unwrap();
                let e = g.edge_id(p, v).unwrap();
                let expected = trace.arrival_time[p].unwrap() + trace.sampled_delays[e];
                assert_eq!(trace.arrival_time[v].unwrap(), expected);
                assert!(trace.arrival_time[v] > trace.arrival_time[p]);
                // Walking parents reaches the source without repeats.
                let mut steps = 0;
                let mut w = v;
                while let Some(up) = trace.arrival_parent[w] {
                    w = up;
                    steps += 1;
                    assert!(steps <= 40);
                }
                assert_eq!(w, 0);
            }
            assert_eq!(trace, simulate(&g, 0, 3.0, &m, seed).unwrap());
        }
    }

    #[test]
    fn observe_examples() {
        let m = model(4.0, 0.0);
        let g = path_graph(3);
        let obs_set = ObserverSet::new(&g, vec![0, 2]).unwrap();
        let trace = simulate(&g, 1, 0.0, &m, 1).unwrap();
        let obs = observe(&trace, &obs_set);
        assert_eq!(
            obs.records(),
            &[
                ObservationRecord { observer: 0, from_node: 1, time: 4.0 },
                ObservationRecord { observer: 2, from_node: 1, time: 4.0 },
            ]
        );

        let trace = simulate(&g, 0, 0.0, &m, 1).unwrap();
        let obs = observe(&trace, &obs_set);
        assert_eq!(obs.active_observers(), vec![2]);
        assert_eq!(obs.deployed(), &[0, 2]);

        let g = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        let trace = simulate(&g, 0, 0.0, &m, 1).unwrap();
        let obs = observe(&trace, &ObserverSet::new(&g, vec![1, 3]).unwrap());
        assert_eq!(obs.active_observers(), vec![1]);
    }

    #[test]
    fn horizon_silences_late_observers() {
        let g = path_graph(6);
        let trace = simulate(&g, 0, 10.0, &model(1.0, 0.0), 1).unwrap();
        let set = ObserverSet::new(&g, vec![2, 5]).unwrap();
        assert_eq!(observe_until(&trace, &set, 3.0).active_observers(), vec![2]);
        assert_eq!(observe_until(&trace, &set, 5.0).active_observers(), vec![2, 5]);
    }

    #[test]
    fn cascades() {
        let g = generate_random_tree(15, 2).unwrap();
        let set = ObserverSet::new(&g, vec![1, 6, 9]).unwrap();
        let m = model(3.0, 0.0);
        let single = simulate_cascades(&g, 4, &m, &set, &[77], (0.0, 0.0), None).unwrap();
        assert_eq!(single, vec![observe(&simulate(&g, 4, 0.0, &m, 77).unwrap(), &set)]);

        let many = simulate_cascades(&g, 4, &m, &set, &[1, 2, 3, 4], (0.0, 100.0), None).unwrap();
        let diffs: Vec<Vec<f64>> =
            many.iter().map(|o| o.records().iter().map(|r| r.time - o.records()[0].time).collect()).collect();
        for d in &diffs[1..] {
            for (a, b) in d.iter().zip(&diffs[0]) {
                assert!((a - b).abs() < 1e-9);
            }
        }
        assert!(simulate_cascades(&g, 4, &m, &set, &[], (0.0, 0.0), None).is_err());
    }

    #[test]
    fn cascade_mean_differences_follow_clt() {
        let g = generate_random_tree(20, 5).unwrap();
        let set = ObserverSet::new(&g, vec![0, 7, 13]).unwrap();
        let (mu, sigma) = (4.0, 1.0);
        let source = (0..20).find(|u| !set.contains(*u)).unwrap();
        let c = 100;
        let seeds: Vec<u64> = (0..c).collect();
        let obs = simulate_cascades(&g, source, &model(mu, sigma), &set, &seeds, (0.0, 50.0), None).unwrap();
        let hops = g.hop_distances(source);
        for k in [7usize, 13] {
            let mean: f64 =
                obs.iter().map(|o| o.record(k).unwrap().time - o.record(0).unwrap().time).sum::<f64>() / c as f64;
            let expected = mu * (hops[k].unwrap() as f64 - hops[0].unwrap() as f64);
            let len = (hops[k].unwrap() + hops[0].unwrap()) as f64;
            let tol = 3.0 * sigma / (c as f64).sqrt() * len.sqrt();
            assert!((mean - expected).abs() <= tol, "k={k}: {mean} vs {expected}");
        }
    }
}
