use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::warn;

use srcloc::diffusion::{observe_until, simulate, DelayModel, Observation};
use srcloc::estimator::{estimate_multi, EstimateStatus, Network};
use srcloc::experiments::{cascade_seed, ExperimentPlan};
use srcloc::graph::{
    complete_graph, cycle_graph, generate_apollonian, generate_ba, generate_er, generate_random_tree, path_graph,
    star_graph, Graph, NodeId, Tree,
};
use srcloc::placement::{ObserverSet, Placement};
use srcloc::rng::derive_seed;

use crate::manifest::{echoed_args, RunManifest};
use crate::{Command, Family, InternalError, Mode};

const OBSERVERS_PREFIX: &str = "# observers:";
const PLACEMENT_STREAM: u64 = 2;

pub enum Outcome {
    Done,
    Degenerate,
}

pub fn run(command: Command) -> Result<Outcome> {
    match command {
        Command::Generate { family, n, p, np, m, generations, leaves, seed, out } => {
            let g = generate(family, n, p, np, m, generations, leaves, seed)?;
            let manifest = RunManifest::new("generate", echoed_args(), Some(seed));
            write_output(out.as_deref(), &(manifest.header() + &g.to_edge_list()))?;
            let summary = format!("N={} L={}", g.node_count(), g.edge_count());
            if out.is_some() {
                println!("{summary}");
            } else {
                eprintln!("{summary}");
            }
            Ok(Outcome::Done)
        }
        Command::Simulate { graph, source, observers, mu, sigma, seed, cascades, start_time, horizon, out, trace } => {
            let mut manifest = RunManifest::new("simulate", echoed_args(), Some(seed));
            let g = read_graph(&mut manifest, &graph)?;
            g.check_node(source).context("--source")?;
            let model = DelayModel::new(mu, sigma)?;
            let observers = resolve_observers(&mut manifest, &g, &observers, seed)?;
            if observers.contains(source) {
                warn!("source {source} is an observer; it does not report its own arrival");
            }
            if cascades == 0 {
                bail!("--cascades must be at least 1");
            }
            if cascades > 1 && trace.is_some() {
                bail!("--trace needs a single cascade");
            }
            let horizon = horizon.unwrap_or(f64::INFINITY);
            let mut outputs = Vec::with_capacity(cascades);
            for c in 0..cascades {
                let t = simulate(&g, source, start_time, &model, cascade_seed(seed, 0, c))?;
                if let Some(path) = &trace {
                    write_output(Some(path), &(manifest.header() + &t.to_csv()))?;
                }
                let obs = observe_until(&t, &observers, horizon);
                if obs.records().is_empty() {
                    warn!("cascade {c}: no observer was informed");
                }
                outputs.push(observation_file(&manifest, &observers, &obs));
            }
            if cascades == 1 {
                write_output(out.as_deref(), &outputs[0])?;
            } else {
                let dir = out.context("--out must name a directory when --cascades > 1")?;
                std::fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
                for (c, text) in outputs.iter().enumerate() {
                    write_output(Some(&dir.join(format!("cascade_{c:04}.csv"))), text)?;
                }
            }
            Ok(Outcome::Done)
        }
        Command::Estimate { graph, observations, cascades_dir, observers, seed, mu, sigma, mode, out } => {
            let seed_echo = observers.as_deref().is_some_and(|s| s.starts_with("random:")).then_some(seed);
            let mut manifest = RunManifest::new("estimate", echoed_args(), seed_echo);
            let g = read_graph(&mut manifest, &graph)?;
            let model = DelayModel::new(mu, sigma)?;
            let deployed = observers.map(|spec| resolve_observers(&mut manifest, &g, &spec, seed)).transpose()?;
            let files = match cascades_dir {
                Some(dir) => cascade_files(&dir)?,
                None => observations,
            };
            let obs = files
                .iter()
                .map(|path| read_observation(&mut manifest, &g, path, deployed.as_ref()))
                .collect::<Result<Vec<_>>>()?;

            let tree = match mode {
                Mode::Graph => None,
                Mode::Auto if !g.is_tree() => None,
                Mode::Auto | Mode::Tree => Some(Tree::from_graph(g.clone()).context("--mode tree")?),
            };
            let network = match &tree {
                Some(t) => Network::Tree(t),
                None => Network::Graph(&g),
            };
            let result = estimate_multi(network, &obs, &model)?;

            let status = match result.status {
                EstimateStatus::Confident => "confident",
                EstimateStatus::Tied => "tied",
                EstimateStatus::DirectionOnly => "direction-only",
            };
            let mut text = manifest.header();
            text += &format!("# status: {status}\n# estimate: {}\n", result.estimate);
            text += &format!("# tied_top: {}\n", join(&result.tied_top));
            text += "rank,node,score\n";
            for (rank, (node, score)) in result.ranked().into_iter().enumerate() {
                text += &format!("{},{node},{}\n", rank + 1, srcloc::diffusion::format_time(score));
            }
            write_output(out.as_deref(), &text)?;
            if result.status == EstimateStatus::Confident {
                Ok(Outcome::Done)
            } else {
                warn!("degenerate estimate ({status}): {} candidates share the top score", result.tied_top.len());
                Ok(Outcome::Degenerate)
            }
        }
        Command::Experiment { config, seed, threads, out } => {
            let mut manifest = RunManifest::new("experiment", echoed_args(), None);
            let text = manifest.read_input(&config)?;
            let base = config.parent().unwrap_or(Path::new("."));
            let mut plan = ExperimentPlan::parse(&text, base).with_context(|| format!("in {}", config.display()))?;
            if let Some(path) = plan.graph_file.clone() {
                manifest.read_input(&path)?;
            }
            if let Some(s) = seed {
                plan.config.seed = s;
            }
            manifest.seed = Some(plan.config.seed);
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.unwrap_or(0))
                .build()
                .map_err(|e| InternalError(format!("cannot start worker threads: {e}")))?;
            let output = pool.install(|| plan.run())?;
            let mut metadata = manifest.lines();
            // The manifest already carries the seed and version.
            metadata
                .extend(plan.metadata().into_iter().filter(|l| !l.starts_with("seed:") && !l.starts_with("version:")));
            write_output(out.as_deref(), &output.to_csv(&metadata))?;
            Ok(Outcome::Done)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn generate(
    family: Family,
    n: Option<usize>,
    p: Option<f64>,
    np: Option<f64>,
    m: usize,
    generations: Option<u32>,
    leaves: Option<usize>,
    seed: u64,
) -> Result<Graph> {
    let need_n = || n.context("this family needs --n");
    Ok(match family {
        Family::Er => {
            let n = need_n()?;
            let p = match (p, np) {
                (Some(p), _) => p,
                (None, Some(np)) => np / n as f64,
                (None, None) => bail!("er needs --p or --np"),
            };
            generate_er(n, p, seed)?
        }
        Family::Ba => generate_ba(need_n()?, m, seed)?,
        Family::Apollonian => generate_apollonian(generations.context("apollonian needs --generations")?),
        Family::Tree => generate_random_tree(need_n()?, seed)?,
        Family::Path => path_graph(need_n()?),
        Family::Star => star_graph(leaves.context("star needs --leaves")?),
        Family::Cycle => {
            let n = need_n()?;
            if n < 3 {
                bail!("a cycle needs --n >= 3");
            }
            cycle_graph(n)
        }
        Family::Complete => complete_graph(need_n()?),
    })
}

fn read_graph(manifest: &mut RunManifest, path: &Path) -> Result<Graph> {
    let text = manifest.read_input(path)?;
    Graph::parse_edge_list(&text).with_context(|| format!("in {}", path.display()))
}

fn resolve_observers(manifest: &mut RunManifest, g: &Graph, spec: &str, seed: u64) -> Result<ObserverSet> {
    let strategy = |prefix: &str, placement: Placement| -> Option<Result<ObserverSet>> {
        let k = spec.strip_prefix(prefix)?;
        Some(
            k.parse::<usize>()
                .with_context(|| format!("`{k}` is not an observer count"))
                .and_then(|k| Ok(placement.place(g, k, derive_seed(seed, PLACEMENT_STREAM, 0))?)),
        )
    };
    if let Some(set) = strategy("random:", Placement::Random) {
        return set;
    }
    if let Some(set) = strategy("degree:", Placement::HighDegree) {
        return set;
    }
    let path = PathBuf::from(spec);
    let text = manifest.read_input(&path)?;
    let nodes = parse_node_list(&text).with_context(|| format!("in {}", path.display()))?;
    ObserverSet::new(g, nodes).with_context(|| format!("in {}", path.display()))
}

/// One node id per line; `#` comments and blank lines are skipped.
fn parse_node_list(text: &str) -> Result<Vec<NodeId>> {
    let mut nodes = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        nodes.push(content.parse().with_context(|| format!("line {}: `{content}` is not a node id", i + 1))?);
    }
    Ok(nodes)
}

fn observation_file(manifest: &RunManifest, observers: &ObserverSet, obs: &Observation) -> String {
    format!("{}{OBSERVERS_PREFIX} {}\n{}", manifest.header(), join(observers.nodes()), obs.to_csv())
}

fn read_observation(
    manifest: &mut RunManifest,
    g: &Graph,
    path: &Path,
    deployed: Option<&ObserverSet>,
) -> Result<Observation> {
    let text = manifest.read_input(path)?;
    let from_file = match deployed {
        Some(_) => None,
        None => text
            .lines()
            .enumerate()
            .find_map(|(i, l)| l.strip_prefix(OBSERVERS_PREFIX).map(|rest| (i + 1, rest)))
            .map(|(line, rest)| {
                let nodes = rest
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<NodeId>())
                    .collect::<Result<Vec<_>, _>>()
                    .with_context(|| format!("{} line {line}: bad observer list", path.display()))?;
                ObserverSet::new(g, nodes).with_context(|| format!("{} line {line}", path.display()))
            })
            .transpose()?,
    };
    Observation::parse_csv(&text, g, deployed.or(from_file.as_ref())).with_context(|| format!("in {}", path.display()))
}

fn cascade_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = std::fs::read_dir(dir)
        .with_context(|| format!("cannot read directory {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e == "csv"));
    files.sort();
    if files.is_empty() {
        bail!("no .csv files in {}", dir.display());
    }
    Ok(files)
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn join(nodes: &[NodeId]) -> String {
    nodes.iter().map(|u| u.to_string()).collect::<Vec<_>>().join(",")
}
