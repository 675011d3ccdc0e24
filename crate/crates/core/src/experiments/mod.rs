//! Monte Carlo harness: localization probability, hop error, observer
//! density thresholds, and multi-cascade convergence.
//!
//! Trial `t` draws everything (network, observers, source, cascades) from
//! seeds derived from `(base seed, t)`, so results do not depend on how
//! trials are spread over threads. Sources are drawn uniformly from the
//! non-observer nodes.

mod config;

use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

pub use config::{ExperimentKind, ExperimentPlan};

use crate::diffusion::{format_time, simulate_cascades, DelayModel};
use crate::error::{Error, Result};
use crate::estimator::{estimate_multi, pmax_oracle, EstimateStatus, Network};
use crate::graph::{
    generate_apollonian, generate_ba, generate_er, generate_random_tree, path_graph, star_graph, Graph, NodeId, Tree,
};
use crate::placement::{ObserverSet, Placement};
use crate::rng::{derive_seed, seeded};

const GRAPH_STREAM: u64 = 1;
const PLACEMENT_STREAM: u64 = 2;
const SOURCE_STREAM: u64 = 3;
const CASCADE_STREAM: u64 = 4;

/// 95% two-sided normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq)]
pub enum NetworkSpec {
    ErdosRenyi {
        n: usize,
        p: f64,
    },
    BarabasiAlbert {
        n: usize,
        m: usize,
    },
    /// First `max_nodes` nodes (insertion order) of an Apollonian network.
    Apollonian {
        generations: u32,
        max_nodes: Option<usize>,
    },
    RandomTree {
        n: usize,
    },
    Path {
        n: usize,
    },
    Star {
        leaves: usize,
    },
    Fixed(Arc<Graph>),
}

impl NetworkSpec {
    fn is_random(&self) -> bool {
        matches!(
            self,
            NetworkSpec::ErdosRenyi { .. } | NetworkSpec::BarabasiAlbert { .. } | NetworkSpec::RandomTree { .. }
        )
    }

    pub fn build(&self, seed: u64) -> Result<Graph> {
        Ok(match self {
            NetworkSpec::ErdosRenyi { n, p } => generate_er(*n, *p, seed)?,
            NetworkSpec::BarabasiAlbert { n, m } => generate_ba(*n, *m, seed)?,
            NetworkSpec::Apollonian { generations, max_nodes } => {
                let g = generate_apollonian(*generations);
                match max_nodes {
                    Some(k) if *k < g.node_count() => {
                        let prefix: Vec<NodeId> = (0..*k).collect();
                        g.induced_subgraph(&prefix).0
                    }
                    _ => g,
                }
            }
            NetworkSpec::RandomTree { n } => generate_random_tree(*n, seed)?,
            NetworkSpec::Path { n } => path_graph(*n),
            NetworkSpec::Star { leaves } => star_graph(*leaves),
            NetworkSpec::Fixed(g) => Graph::clone(g),
        })
    }

    pub fn describe(&self) -> String {
        match self {
            NetworkSpec::ErdosRenyi { n, p } => format!("er(n={n}, p={p})"),
            NetworkSpec::BarabasiAlbert { n, m } => format!("ba(n={n}, m={m})"),
            NetworkSpec::Apollonian { generations, max_nodes } => match max_nodes {
                Some(k) => format!("apollonian(generations={generations}, max_nodes={k})"),
                None => format!("apollonian(generations={generations})"),
            },
            NetworkSpec::RandomTree { n } => format!("tree(n={n})"),
            NetworkSpec::Path { n } => format!("path(n={n})"),
            NetworkSpec::Star { leaves } => format!("star(leaves={leaves})"),
            NetworkSpec::Fixed(g) => format!("file(n={}, l={})", g.node_count(), g.edge_count()),
        }
    }
}

/// Where observers go.
#[derive(Debug, Clone, PartialEq)]
pub enum ObserverPlacement {
    Strategy(Placement),
    /// The first `K` nodes of a fixed priority list.
    Listed(Vec<NodeId>),
}

impl ObserverPlacement {
    fn place(&self, g: &Graph, k: usize, seed: u64) -> Result<ObserverSet> {
        match self {
            ObserverPlacement::Strategy(p) => p.place(g, k, seed),
            ObserverPlacement::Listed(list) => {
                if k > list.len() {
                    return Err(Error::param("observers", format!("list has {} nodes, {k} requested", list.len())));
                }
                ObserverSet::new(g, list[..k].to_vec())
            }
        }
    }
}

impl From<Placement> for ObserverPlacement {
    fn from(p: Placement) -> Self {
        ObserverPlacement::Strategy(p)
    }
}

/// How many observers each trial deploys.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObserverCount {
    Fixed(usize),
    /// `round(fraction · N)`, clamped to `[1, N − 1]`; useful when `N`
    /// varies between trials.
    Fraction(f64),
}

impl ObserverCount {
    fn resolve(self, n: usize) -> Result<usize> {
        let k = match self {
            ObserverCount::Fixed(k) => k,
            ObserverCount::Fraction(f) => ((f * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1)),
        };
        if k == 0 || k >= n {
            return Err(Error::param("k", format!("need 1 <= k < N = {n} so a non-observer source exists, got {k}")));
        }
        Ok(k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorMode {
    /// Tree estimator when the network is a tree, graph estimator otherwise.
    Auto,
    Tree,
    Graph,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub network: NetworkSpec,
    /// Draw a fresh network per trial (random families only).
    pub resample_network: bool,
    /// Run on the largest connected component of each drawn network.
    pub largest_component: bool,
    pub placement: ObserverPlacement,
    pub observers: ObserverCount,
    pub mu: f64,
    pub sigma: f64,
    pub cascades: usize,
    pub trials: usize,
    pub seed: u64,
    pub horizon: Option<f64>,
    pub mode: EstimatorMode,
    pub start_window: (f64, f64),
}

impl ExperimentConfig {
    pub fn new(network: NetworkSpec, placement: impl Into<ObserverPlacement>, observers: ObserverCount) -> Self {
        Self {
            network,
            resample_network: true,
            largest_component: false,
            placement: placement.into(),
            observers,
            mu: 4.0,
            sigma: 1.0,
            cascades: 1,
            trials: 1000,
            seed: 1,
            horizon: None,
            mode: EstimatorMode::Auto,
            start_window: (0.0, 100.0),
        }
    }

    pub fn validate(&self) -> Result<DelayModel> {
        if self.trials == 0 {
            return Err(Error::param("trials", "must be at least 1"));
        }
        if self.cascades == 0 {
            return Err(Error::param("cascades", "must be at least 1"));
        }
        if let ObserverCount::Fraction(f) = self.observers {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::param("density", format!("must lie in (0, 1), got {f}")));
            }
        }
        if let Some(h) = self.horizon {
            if !(h > 0.0) {
                return Err(Error::param("horizon", format!("must be > 0, got {h}")));
            }
        }
        if self.start_window.1 < self.start_window.0 {
            return Err(Error::param("start_window", "upper end below lower end"));
        }
        DelayModel::new(self.mu, self.sigma)
    }
}

/// One trial's outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub node_count: usize,
    pub observers: usize,
    pub source: NodeId,
    /// `None` when no observer heard any cascade.
    pub estimate: Option<NodeId>,
    pub status: Option<EstimateStatus>,
    pub hop_error: Option<usize>,
    /// Ceiling for this network and placement, on tree networks.
    pub p_max: Option<f64>,
}

impl TrialRecord {
    pub fn correct(&self) -> bool {
        self.estimate == Some(self.source)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub trials: usize,
    pub correct: usize,
    pub p_loc: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Mean hop distance between estimate and source over trials that
    /// produced an estimate.
    pub mean_hop_error: Option<f64>,
    pub hop_ci_half_width: Option<f64>,
    /// Trials in which no observer was informed; counted as failures.
    pub no_active: usize,
    /// Mean per-trial ceiling, when every trial ran on a tree.
    pub p_max: Option<f64>,
    /// Mean `K / N` over trials.
    pub mean_density: f64,
    pub per_trial: Vec<TrialRecord>,
}

impl MetricsReport {
    fn from_trials(per_trial: Vec<TrialRecord>) -> Self {
        let trials = per_trial.len();
        let n = trials as f64;
        let correct = per_trial.iter().filter(|t| t.correct()).count();
        let p_loc = correct as f64 / n;
        let half = Z95 * (p_loc * (1.0 - p_loc) / n).sqrt();

        let hops: Vec<f64> = per_trial.iter().filter_map(|t| t.hop_error.map(|h| h as f64)).collect();
        let (mean_hop_error, hop_ci_half_width) = if hops.is_empty() {
            (None, None)
        } else {
            let m = hops.len() as f64;
            let mean = hops.iter().sum::<f64>() / m;
            let var =
                if hops.len() > 1 { hops.iter().map(|h| (h - mean).powi(2)).sum::<f64>() / (m - 1.0) } else { 0.0 };
            (Some(mean), Some(Z95 * (var / m).sqrt()))
        };
        let p_max = per_trial.iter().map(|t| t.p_max).collect::<Option<Vec<f64>>>().map(|v| v.iter().sum::<f64>() / n);
        let densities: Vec<f64> = per_trial.iter().map(|t| t.observers as f64 / t.node_count as f64).collect();
        let mean_density =
            if densities.iter().all(|&d| d == densities[0]) { densities[0] } else { densities.iter().sum::<f64>() / n };

        Self {
            trials,
            correct,
            p_loc,
            ci_low: (p_loc - half).max(0.0),
            ci_high: (p_loc + half).min(1.0),
            mean_hop_error,
            hop_ci_half_width,
            no_active: per_trial.iter().filter(|t| t.estimate.is_none()).count(),
            p_max,
            mean_density,
            per_trial,
        }
    }

    pub fn ci_half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }
}

fn trial_network(cfg: &ExperimentConfig, trial: usize) -> Result<Graph> {
    let index = if cfg.resample_network && cfg.network.is_random() { trial as u64 } else { 0 };
    let g = cfg.network.build(derive_seed(cfg.seed, GRAPH_STREAM, index))?;
    Ok(if cfg.largest_component { g.largest_component().0 } else { g })
}

/// Seed of cascade `c` in trial `t`; independent of the cascade count so
/// runs with different `C` share their first cascades.
pub fn cascade_seed(base: u64, trial: usize, cascade: usize) -> u64 {
    derive_seed(derive_seed(base, CASCADE_STREAM, trial as u64), 0, cascade as u64)
}

fn run_trial(cfg: &ExperimentConfig, model: &DelayModel, trial: usize) -> Result<TrialRecord> {
    let g = trial_network(cfg, trial)?;
    let n = g.node_count();
    let k = cfg.observers.resolve(n)?;
    let observers = cfg.placement.place(&g, k, derive_seed(cfg.seed, PLACEMENT_STREAM, trial as u64))?;
    let free: Vec<NodeId> = (0..n).filter(|&u| !observers.contains(u)).collect();
    let source = free[seeded(derive_seed(cfg.seed, SOURCE_STREAM, trial as u64)).random_range(0..free.len())];

    let seeds: Vec<u64> = (0..cfg.cascades).map(|c| cascade_seed(cfg.seed, trial, c)).collect();
    let observations = simulate_cascades(&g, source, model, &observers, &seeds, cfg.start_window, cfg.horizon)?;

    let tree = match cfg.mode {
        EstimatorMode::Graph => None,
        EstimatorMode::Auto => g.is_tree().then(|| Tree::from_graph(g.clone())).transpose()?,
        EstimatorMode::Tree => Some(Tree::from_graph(g.clone())?),
    };
    let network = match &tree {
        Some(t) => Network::Tree(t),
        None => Network::Graph(&g),
    };
    let p_max = tree.as_ref().map(|t| pmax_oracle(t, &observers, model.mu())).transpose()?;

    let (estimate, status) = match estimate_multi(network, &observations, model) {
        Ok(r) => (Some(r.estimate), Some(r.status)),
        Err(Error::InsufficientObservers { found: 0, .. }) => (None, None),
        Err(e) => return Err(e),
    };
    let hop_error = estimate.and_then(|e| g.hop_distances(e)[source]);

    Ok(TrialRecord { trial, node_count: n, observers: k, source, estimate, status, hop_error, p_max })
}

/// Runs `cfg.trials` independent trials on the current rayon pool.
pub fn run_trials(cfg: &ExperimentConfig) -> Result<MetricsReport> {
    let model = cfg.validate()?;
    let per_trial = (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, &model, t)).collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport::from_trials(per_trial))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub observers: ObserverCount,
    pub report: MetricsReport,
}

/// One report per observer count, all with the same base seed.
pub fn sweep_density(cfg: &ExperimentConfig, grid: &[ObserverCount]) -> Result<Vec<SweepPoint>> {
    if grid.is_empty() {
        return Err(Error::param("k_grid", "grid is empty"));
    }
    grid.iter()
        .map(|&observers| {
            let cfg = ExperimentConfig { observers, ..cfg.clone() };
            Ok(SweepPoint { observers, report: run_trials(&cfg)? })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdOutcome {
    pub target: f64,
    /// `K / N` of the first passing grid point; `None` if none passed.
    pub density: Option<f64>,
    /// Evaluated points, in grid order, up to and including the first pass.
    pub points: Vec<SweepPoint>,
}

/// Slack between the target and the lower confidence bound that still
/// counts as reaching the target.
pub const THRESHOLD_SLACK: f64 = 0.05;

/// Smallest grid density whose P_loc lower confidence bound reaches
/// `target − 0.05`. The grid is walked in the given order and the walk
/// stops at the first pass.
pub fn find_threshold_density(cfg: &ExperimentConfig, grid: &[ObserverCount], target: f64) -> Result<ThresholdOutcome> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::param("target", format!("must lie in (0, 1], got {target}")));
    }
    if grid.is_empty() {
        return Err(Error::param("k_grid", "grid is empty"));
    }
    let mut points = Vec::new();
    for &observers in grid {
        let report = run_trials(&ExperimentConfig { observers, ..cfg.clone() })?;
        let pass = report.ci_low >= target - THRESHOLD_SLACK;
        let density = report.mean_density;
        points.push(SweepPoint { observers, report });
        if pass {
            return Ok(ThresholdOutcome { target, density: Some(density), points });
        }
    }
    log::warn!("P_loc target {target} not reached on the grid");
    Ok(ThresholdOutcome { target, density: None, points })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergencePoint {
    pub cascades: usize,
    pub report: MetricsReport,
    /// `p_max − p_loc`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceCurve {
    pub p_max: f64,
    pub points: Vec<ConvergencePoint>,
}

/// P_loc as a function of the number of fused cascades, against the
/// deterministic-propagation ceiling. Trees only.
pub fn cascade_convergence(cfg: &ExperimentConfig, cascade_grid: &[usize]) -> Result<ConvergenceCurve> {
    if cascade_grid.is_empty() {
        return Err(Error::param("c_grid", "grid is empty"));
    }
    let cfg = ExperimentConfig { mode: EstimatorMode::Tree, ..cfg.clone() };
    let mut points = Vec::new();
    let mut p_max = 0.0;
    for &cascades in cascade_grid {
        let report = run_trials(&ExperimentConfig { cascades, ..cfg.clone() })?;
        p_max = report.p_max.expect("tree mode computes the ceiling");
        let gap = p_max - report.p_loc;
        points.push(ConvergencePoint { cascades, report, gap });
    }
    Ok(ConvergenceCurve { p_max, points })
}

pub const RESULTS_HEADER: &str = "param,p_loc,ci_low,ci_high,hop_err,trials";

/// Results CSV rows (no metadata) for `(param, report)` pairs.
pub fn results_csv<'a>(rows: impl IntoIterator<Item = (f64, &'a MetricsReport)>) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for (param, r) in rows {
        let hop = r.mean_hop_error.map(format_time).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{}",
            format_time(param),
            format_time(r.p_loc),
            format_time(r.ci_low),
            format_time(r.ci_high),
            hop,
            r.trials
        )
        .unwrap();
    }
    out
}
