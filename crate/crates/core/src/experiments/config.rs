//! Flat `key = value` experiment files.
//!
//! ```text
//! # Apollonian, high-degree observers
//! experiment = threshold
//! network = apollonian
//! generations = 5
//! max_nodes = 100
//! placement = degree
//! k_grid = 1,2,3,4,5,6,8,10
//! target = 0.9
//! mu = 4
//! sigma = 1
//! trials = 1000
//! seed = 7
//! ```
//!
//! Keys: `experiment` (trials|sweep|threshold|convergence), `network`
//! (er|ba|apollonian|tree|path|star|file), `n`, `p`, `np` (ER mean degree,
//! alternative to `p`), `m`, `generations`, `max_nodes`, `leaves`,
//! `graph_file`, `largest_component`, `resample`, `placement`
//! (degree|random|list), `observer_list`, `k`, `density`, `k_grid`,
//! `density_grid`, `target`, `mu`, `sigma`, `cascades`, `c_grid`,
//! `trials`, `seed`, `horizon`, `mode` (auto|tree|graph), `start_window`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use super::{
    cascade_convergence, find_threshold_density, results_csv, run_trials, sweep_density, EstimatorMode,
    ExperimentConfig, MetricsReport, NetworkSpec, ObserverCount, ObserverPlacement,
};
use crate::diffusion::format_time;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::placement::Placement;

const KEYS: &[&str] = &[
    "experiment",
    "network",
    "n",
    "p",
    "np",
    "m",
    "generations",
    "max_nodes",
    "leaves",
    "graph_file",
    "largest_component",
    "resample",
    "placement",
    "observer_list",
    "k",
    "density",
    "k_grid",
    "density_grid",
    "target",
    "mu",
    "sigma",
    "cascades",
    "c_grid",
    "trials",
    "seed",
    "horizon",
    "mode",
    "start_window",
];

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentKind {
    Trials,
    Sweep(Vec<ObserverCount>),
    Threshold { grid: Vec<ObserverCount>, target: f64 },
    Convergence(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    /// Graph file the network was read from, if any.
    pub graph_file: Option<PathBuf>,
    /// `key = value` lines as given, for echoing into outputs.
    pub echo: Vec<String>,
}

struct Entry {
    line: usize,
    value: String,
}

struct Entries(BTreeMap<String, Entry>);

impl Entries {
    fn err(&self, key: &str, message: impl Into<String>) -> Error {
        Error::Config { line: self.0.get(key).map_or(0, |e| e.line), key: key.to_string(), message: message.into() }
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(|e| e.value.as_str())
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key).map(|v| v.parse::<T>().map_err(|e| self.err(key, format!("cannot parse `{v}`: {e}")))).transpose()
    }

    fn require<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?.ok_or_else(|| self.err(key, "missing required key"))
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        let Some(raw) = self.raw(key) else { return Ok(None) };
        let items = raw
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|v| v.parse::<T>().map_err(|e| self.err(key, format!("cannot parse `{v}`: {e}"))))
            .collect::<Result<Vec<T>>>()?;
        if items.is_empty() {
            return Err(self.err(key, "empty list"));
        }
        Ok(Some(items))
    }

    fn flag(&self, key: &str) -> Result<Option<bool>> {
        match self.raw(key) {
            None => Ok(None),
            Some("true" | "yes" | "1") => Ok(Some(true)),
            Some("false" | "no" | "0") => Ok(Some(false)),
            Some(v) => Err(self.err(key, format!("expected true or false, got `{v}`"))),
        }
    }
}

impl ExperimentPlan {
    /// Parses an experiment file. `graph_file` paths are resolved against
    /// `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut map = BTreeMap::new();
        let mut echo = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::Parse { line, message: format!("expected `key = value`, got `{content}`") });
            };
            let (key, value) = (key.trim().to_string(), value.trim().to_string());
            let config_err = |message: String| Error::Config { line, key: key.clone(), message };
            if !KEYS.contains(&key.as_str()) {
                return Err(config_err("unknown key".into()));
            }
            if map.contains_key(&key) {
                return Err(config_err("key given twice".into()));
            }
            echo.push(format!("{key} = {value}"));
            map.insert(key, Entry { line, value });
        }
        let e = Entries(map);
        let wrap = |key: &str, err: Error| match err {
            Error::InvalidParameter { reason, .. } => e.err(key, reason),
            other => other,
        };

        let mut graph_file = None;
        let family: String = e.require("network")?;
        let network = match family.as_str() {
            "er" => {
                let n: usize = e.require("n")?;
                let p = match (e.get::<f64>("p")?, e.get::<f64>("np")?) {
                    (Some(p), None) => p,
                    (None, Some(np)) => np / n as f64,
                    (Some(_), Some(_)) => return Err(e.err("np", "give either p or np, not both")),
                    (None, None) => return Err(e.err("p", "missing required key (or np)")),
                };
                if !(0.0..=1.0).contains(&p) {
                    return Err(e.err(
                        if e.raw("p").is_some() { "p" } else { "np" },
                        format!("edge probability {p} outside [0, 1]"),
                    ));
                }
                NetworkSpec::ErdosRenyi { n, p }
            }
            "ba" => NetworkSpec::BarabasiAlbert { n: e.require("n")?, m: e.get("m")?.unwrap_or(2) },
            "apollonian" => {
                NetworkSpec::Apollonian { generations: e.require("generations")?, max_nodes: e.get("max_nodes")? }
            }
            "tree" => NetworkSpec::RandomTree { n: e.require("n")? },
            "path" => NetworkSpec::Path { n: e.require("n")? },
            "star" => NetworkSpec::Star { leaves: e.require("leaves")? },
            "file" => {
                let rel: String = e.require("graph_file")?;
                let path = base_dir.join(rel);
                let text = std::fs::read_to_string(&path)
                    .map_err(|err| e.err("graph_file", format!("cannot read {}: {err}", path.display())))?;
                let g = Graph::parse_edge_list(&text)
                    .map_err(|err| e.err("graph_file", format!("{}: {err}", path.display())))?;
                graph_file = Some(path);
                NetworkSpec::Fixed(Arc::new(g))
            }
            other => return Err(e.err("network", format!("unknown family `{other}`"))),
        };
        // Surface generator parameter errors here, with the key.
        if !matches!(network, NetworkSpec::Fixed(_)) {
            network.build(0).map_err(|err| wrap("network", err))?;
        }

        let placement = match e.raw("placement").unwrap_or("random") {
            "list" => ObserverPlacement::Listed(
                e.list("observer_list")?
                    .ok_or_else(|| e.err("observer_list", "placement = list needs observer_list"))?,
            ),
            other => ObserverPlacement::Strategy(Placement::from_str(other).map_err(|err| wrap("placement", err))?),
        };

        let kind_name = e.raw("experiment").unwrap_or("trials");
        let observer_grid = || -> Result<Vec<ObserverCount>> {
            match (e.list::<usize>("k_grid")?, e.list::<f64>("density_grid")?) {
                (Some(k), None) => Ok(k.into_iter().map(ObserverCount::Fixed).collect()),
                (None, Some(f)) => Ok(f.into_iter().map(ObserverCount::Fraction).collect()),
                (Some(_), Some(_)) => Err(e.err("density_grid", "give either k_grid or density_grid, not both")),
                (None, None) => Err(e.err("k_grid", format!("experiment = {kind_name} needs k_grid or density_grid"))),
            }
        };
        let kind = match kind_name {
            "trials" => ExperimentKind::Trials,
            "sweep" => ExperimentKind::Sweep(observer_grid()?),
            "threshold" => {
                ExperimentKind::Threshold { grid: observer_grid()?, target: e.get("target")?.unwrap_or(0.9) }
            }
            "convergence" => ExperimentKind::Convergence(
                e.list("c_grid")?.ok_or_else(|| e.err("c_grid", "experiment = convergence needs c_grid"))?,
            ),
            other => return Err(e.err("experiment", format!("unknown experiment `{other}`"))),
        };
        let observers = match (e.get::<usize>("k")?, e.get::<f64>("density")?) {
            (Some(_), Some(_)) => return Err(e.err("density", "give either k or density, not both")),
            (Some(k), None) => ObserverCount::Fixed(k),
            (None, Some(f)) => ObserverCount::Fraction(f),
            (None, None) => match &kind {
                ExperimentKind::Sweep(grid) | ExperimentKind::Threshold { grid, .. } => grid[0],
                _ => return Err(e.err("k", "missing required key (or density)")),
            },
        };

        let mut config = ExperimentConfig::new(network, placement, observers);
        config.largest_component = e.flag("largest_component")?.unwrap_or(false);
        config.resample_network = e.flag("resample")?.unwrap_or(true);
        config.mu = e.get("mu")?.unwrap_or(config.mu);
        config.sigma = e.get("sigma")?.unwrap_or(config.sigma);
        config.cascades = e.get("cascades")?.unwrap_or(config.cascades);
        config.trials = e.get("trials")?.unwrap_or(config.trials);
        config.seed = e.get("seed")?.unwrap_or(config.seed);
        config.horizon = e.get("horizon")?;
        config.mode = match e.raw("mode").unwrap_or("auto") {
            "auto" => EstimatorMode::Auto,
            "tree" => EstimatorMode::Tree,
            "graph" => EstimatorMode::Graph,
            other => return Err(e.err("mode", format!("unknown mode `{other}` (expected auto|tree|graph)"))),
        };
        if let Some(w) = e.list::<f64>("start_window")? {
            match w[..] {
                [lo, hi] => config.start_window = (lo, hi),
                _ => return Err(e.err("start_window", "expected `lo,hi`")),
            }
        }

        if let Err(err) = config.validate() {
            return Err(match err {
                Error::InvalidParameter { name, reason } => e.err(name, reason),
                other => other,
            });
        }
        if let ExperimentKind::Threshold { target, .. } = kind {
            if !(target > 0.0 && target <= 1.0) {
                return Err(e.err("target", format!("must lie in (0, 1], got {target}")));
            }
        }
        Ok(Self { kind, config, graph_file, echo })
    }

    /// Runs the experiment on the current rayon pool.
    pub fn run(&self) -> Result<ExperimentOutput> {
        let cfg = &self.config;
        let mut notes = Vec::new();
        let rows: Vec<(f64, MetricsReport)> = match &self.kind {
            ExperimentKind::Trials => {
                let r = run_trials(cfg)?;
                if let Some(p) = r.p_max {
                    notes.push(format!("p_max: {}", format_time(p)));
                }
                notes.push(format!("no_active_trials: {}", r.no_active));
                vec![(r.mean_density, r)]
            }
            ExperimentKind::Sweep(grid) => {
                sweep_density(cfg, grid)?.into_iter().map(|p| (p.report.mean_density, p.report)).collect()
            }
            ExperimentKind::Threshold { grid, target } => {
                let out = find_threshold_density(cfg, grid, *target)?;
                notes.push(format!("target_p_loc: {}", format_time(*target)));
                notes.push(match out.density {
                    Some(d) => format!("threshold_density: {}", format_time(d)),
                    None => "threshold_density: unreached".to_string(),
                });
                out.points.into_iter().map(|p| (p.report.mean_density, p.report)).collect()
            }
            ExperimentKind::Convergence(grid) => {
                let curve = cascade_convergence(cfg, grid)?;
                notes.push(format!("p_max: {}", format_time(curve.p_max)));
                for p in &curve.points {
                    notes.push(format!("gap C={}: {}", p.cascades, format_time(p.gap)));
                }
                curve.points.into_iter().map(|p| (p.cascades as f64, p.report)).collect()
            }
        };
        Ok(ExperimentOutput {
            param: match self.kind {
                ExperimentKind::Convergence(_) => "cascades",
                _ => "density",
            },
            rows,
            notes,
        })
    }

    /// Comment block: seed, version, source prior, config echo.
    pub fn metadata(&self) -> Vec<String> {
        let mut lines = vec![
            format!("seed: {}", self.config.seed),
            format!("version: {}", env!("CARGO_PKG_VERSION")),
            "source_prior: uniform over non-observer nodes".to_string(),
        ];
        lines.extend(self.echo.iter().map(|l| format!("config: {l}")));
        lines
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    /// Meaning of the `param` column: `density` (mean K/N) or `cascades`.
    pub param: &'static str,
    pub rows: Vec<(f64, MetricsReport)>,
    /// Result lines that do not fit the table (threshold, p_max, gaps).
    pub notes: Vec<String>,
}

impl ExperimentOutput {
    /// Results CSV preceded by `# ` comment lines for `metadata` and notes.
    pub fn to_csv(&self, metadata: &[String]) -> String {
        let mut out = String::new();
        for line in metadata {
            writeln!(out, "# {line}").unwrap();
        }
        writeln!(out, "# param: {}", self.param).unwrap();
        for line in &self.notes {
            writeln!(out, "# {line}").unwrap();
        }
        out + &results_csv(self.rows.iter().map(|(p, r)| (*p, r)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentPlan> {
        ExperimentPlan::parse(text, Path::new("."))
    }

    fn config_error(text: &str) -> (usize, String) {
        match parse(text) {
            Err(Error::Config { line, key, .. }) => (line, key),
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn parses_threshold_plan() {
        let plan = parse(
            "# comment\nexperiment = threshold\nnetwork = apollonian\ngenerations = 5\nmax_nodes = 100\n\
             placement = degree\nk_grid = 2, 4, 6\nsigma = 1 # inline\ntrials = 50\nseed = 9\n",
        )
        .unwrap();
        assert_eq!(
            plan.kind,
            ExperimentKind::Threshold {
                grid: vec![ObserverCount::Fixed(2), ObserverCount::Fixed(4), ObserverCount::Fixed(6)],
                target: 0.9
            }
        );
        assert_eq!(plan.config.network, NetworkSpec::Apollonian { generations: 5, max_nodes: Some(100) });
        assert_eq!(plan.config.seed, 9);
        assert_eq!(plan.echo.len(), 9);
    }

    #[test]
    fn er_mean_degree() {
        let plan = parse("network = er\nn = 100\nnp = 2\nk = 5\n").unwrap();
        assert_eq!(plan.config.network, NetworkSpec::ErdosRenyi { n: 100, p: 0.02 });
    }

    #[test]
    fn errors_name_key_and_line() {
        assert_eq!(config_error("network = path\nn = 10\nk = 2\nbogus = 1\n"), (4, "bogus".into()));
        assert_eq!(config_error("network = path\nn = 10\nk = 2\ntrials = 0\n"), (4, "trials".into()));
        assert_eq!(config_error("network = path\nn = 10\nk = 2\nmu = -3\n"), (4, "mu".into()));
        assert_eq!(config_error("network = path\nn = ten\nk = 2\n"), (2, "n".into()));
        assert_eq!(config_error("network = path\nn = 10\n"), (0, "k".into()));
        assert_eq!(config_error("network = ba\nn = 10\nm = 20\nk = 2\n"), (1, "network".into()));
        assert_eq!(config_error("network = path\nn = 5\nk = 1\nk = 2\n"), (4, "k".into()));
        assert_eq!(config_error("network = path\nn = 5\nk = 1\nexperiment = sweep\n"), (0, "k_grid".into()));
        assert!(matches!(parse("network path\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn runs_and_writes_csv() {
        let plan = parse(
            "experiment = sweep\nnetwork = path\nn = 10\nplacement = list\nobserver_list = 0,9,5\n\
             k_grid = 1,2\nsigma = 0\ntrials = 20\n",
        )
        .unwrap();
        let out = plan.run().unwrap();
        let csv = out.to_csv(&plan.metadata());
        let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows[0], super::super::RESULTS_HEADER);
        assert_eq!(rows.len(), 3);
        assert!(rows[2].starts_with("0.2,1.0,1.0,1.0,0.0,20"), "{}", rows[2]);
        assert!(csv.contains("# config: k_grid = 1,2"));
    }
}
