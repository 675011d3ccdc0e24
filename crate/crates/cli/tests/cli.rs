use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn srcloc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srcloc")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn generate_apollonian_counts() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("g.txt");
    let res = srcloc(&["generate", "apollonian", "--generations", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(String::from_utf8_lossy(&res.stdout).trim(), "N=7 L=15");
    assert_eq!(data_lines(&read(&out)).iter().filter(|l| !l.trim().is_empty()).count(), 15);
}

#[test]
fn generate_empty_er() {
    let res = srcloc(&["generate", "er", "--n", "5", "--p", "0"]);
    assert_eq!(code(&res), 0);
    let text = String::from_utf8(res.stdout).unwrap();
    assert!(text.contains("# nodes: 5"));
    assert!(data_lines(&text).iter().all(|l| l.trim().is_empty()));
}

#[test]
fn generate_is_reproducible() {
    let args = ["generate", "ba", "--n", "200", "--m", "2", "--seed", "11"];
    let a = srcloc(&args);
    let b = srcloc(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let c = srcloc(&["generate", "ba", "--n", "200", "--m", "2", "--seed", "12"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn generate_rejects_bad_parameters() {
    assert_eq!(code(&srcloc(&["generate", "ba", "--n", "3", "--m", "5"])), 2);
    assert_eq!(code(&srcloc(&["generate", "er", "--n", "5", "--p", "1.5"])), 2);
    assert_eq!(code(&srcloc(&["generate", "er", "--n", "5"])), 2);
}

#[test]
fn simulate_two_nodes() {
    let dir = TempDir::new().unwrap();
    let g = write(&dir, "g.txt", "0 1\n");
    let obs = write(&dir, "obs.txt", "1\n");
    let res = srcloc(&["simulate", "--graph", &g, "--source", "0", "--observers", &obs, "--sigma", "0"]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let text = String::from_utf8(res.stdout).unwrap();
    assert_eq!(data_lines(&text), ["observer,from_node,time", "1,0,4.0"]);
}

#[test]
fn simulate_observer_at_source_warns() {
    let dir = TempDir::new().unwrap();
    let g = write(&dir, "g.txt", "0 1\n");
    let obs = write(&dir, "obs.txt", "0\n");
    let res = srcloc(&["simulate", "--graph", &g, "--source", "0", "--observers", &obs]);
    assert_eq!(code(&res), 0);
    assert_eq!(data_lines(&String::from_utf8(res.stdout).unwrap()), ["observer,from_node,time"]);
    assert!(String::from_utf8_lossy(&res.stderr).contains("WARN"));
}

#[test]
fn simulate_chain_hop_multiples() {
    let dir = TempDir::new().unwrap();
    let g = write(&dir, "g.txt", "0 1\n1 2\n2 3\n3 4\n");
    let obs = write(&dir, "obs.txt", "0\n4\n");
    let res = srcloc(&["simulate", "--graph", &g, "--source", "1", "--observers", &obs, "--sigma", "0", "--mu", "2.5"]);
    let text = String::from_utf8(res.stdout).unwrap();
    assert_eq!(data_lines(&text), ["observer,from_node,time", "0,1,2.5", "4,3,7.5"]);
}

#[test]
fn simulate_reports_bad_input_with_lines() {
    let dir = TempDir::new().unwrap();
    let g = write(&dir, "g.txt", "0 1\n1 1\n");
    let res = srcloc(&["simulate", "--graph", &g, "--source", "0", "--observers", "degree:1"]);
    assert_eq!(code(&res), 2);
    assert!(String::from_utf8_lossy(&res.stderr).contains("line 2"));

    let g = write(&dir, "g2.txt", "0 1\n");
    let res = srcloc(&["simulate", "--graph", &g, "--source", "7", "--observers", "degree:1"]);
    assert_eq!(code(&res), 2);
    let obs = write(&dir, "obs.txt", "1\nx\n");
    let res = srcloc(&["simulate", "--graph", &g, "--source", "0", "--observers", &obs]);
    assert_eq!(code(&res), 2);
    assert!(String::from_utf8_lossy(&res.stderr).contains("line 2"));
}

fn simulate_to(dir: &TempDir, g: &str, source: &str, observers: &str, extra: &[&str], name: &str) -> String {
    let out = dir.path().join(name);
    let mut args =
        vec!["simulate", "--graph", g, "--source", source, "--observers", observers, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let res = srcloc(&args);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    out.to_str().unwrap().to_string()
}

#[test]
fn estimate_path_recovers_source() {
    let dir = TempDir::new().unwrap();
    let edges: String = (0..9).map(|i| format!("{i} {}\n", i + 1)).collect();
    let g = write(&dir, "g.txt", &edges);
    let obs_list = write(&dir, "o.txt", "0\n9\n");
    let obs = simulate_to(&dir, &g, "6", &obs_list, &["--sigma", "0.000004"], "obs.csv");
    let res = srcloc(&["estimate", "--graph", &g, "--observations", &obs, "--sigma", "0.000004"]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let text = String::from_utf8(res.stdout).unwrap();
    let rows = data_lines(&text);
    assert_eq!(rows[0], "rank,node,score");
    assert!(rows[1].starts_with("1,6,"), "{}", rows[1]);
    assert!(text.contains("# status: confident"));
}

#[test]
fn estimate_tree_mode_rejects_cycles() {
    let dir = TempDir::new().unwrap();
    let g = write(&dir, "g.txt", "0 1\n1 2\n2 0\n");
    let obs = write(&dir, "obs.csv", "observer,from_node,time\n1,0,4\n");
    let res = srcloc(&["estimate", "--graph", &g, "--observations", &obs, "--mode", "tree"]);
    assert_eq!(code(&res), 2);
    assert!(String::from_utf8_lossy(&res.stderr).contains("tree"));
}

#[test]
fn estimate_flags_ties_and_fallback() {
    let dir = TempDir::new().unwrap();
    // Star: two leaf observers cannot tell the center from the other leaves.
    let g = write(&dir, "g.txt", "0 1\n0 2\n0 3\n0 4\n");
    let obs = write(&dir, "obs.csv", "# observers: 1,2\nobserver,from_node,time\n1,0,4.0\n2,0,4.0\n");
    let res = srcloc(&["estimate", "--graph", &g, "--observations", &obs, "--sigma", "0.000004"]);
    assert_eq!(code(&res), 3);
    let text = String::from_utf8(res.stdout).unwrap();
    assert!(text.contains("# status: tied"));
    assert!(text.contains("# tied_top: 0,3,4"));

    let obs = write(&dir, "one.csv", "observer,from_node,time\n1,0,4.0\n");
    let res = srcloc(&["estimate", "--graph", &g, "--observations", &obs]);
    assert_eq!(code(&res), 3);
    assert!(String::from_utf8(res.stdout).unwrap().contains("# status: direction-only"));
}

#[test]
fn estimate_rejects_inconsistent_observations() {
    let dir = TempDir::new().unwrap();
    let g = write(&dir, "g.txt", "0 1\n1 2\n");
    let obs = write(&dir, "obs.csv", "observer,from_node,time\n0,2,4.0\n");
    let res = srcloc(&["estimate", "--graph", &g, "--observations", &obs]);
    assert_eq!(code(&res), 2);
    assert!(String::from_utf8_lossy(&res.stderr).contains("line 2"));
}

#[test]
fn single_file_directory_matches_file() {
    let dir = TempDir::new().unwrap();
    let gen = srcloc(&["generate", "tree", "--n", "40", "--seed", "3"]);
    let g = write(&dir, "g.txt", &String::from_utf8(gen.stdout).unwrap());
    let obs = simulate_to(&dir, &g, "5", "random:6", &["--seed", "9"], "obs.csv");
    let cdir = dir.path().join("casc");
    std::fs::create_dir(&cdir).unwrap();
    std::fs::copy(&obs, cdir.join("c0.csv")).unwrap();

    let a = srcloc(&["estimate", "--graph", &g, "--observations", &obs]);
    let b = srcloc(&["estimate", "--graph", &g, "--cascades-dir", cdir.to_str().unwrap()]);
    assert!(matches!(code(&a), 0 | 3));
    assert_eq!(code(&a), code(&b));
    assert_eq!(data_lines(&String::from_utf8(a.stdout).unwrap()), data_lines(&String::from_utf8(b.stdout).unwrap()));
}

#[test]
fn multi_cascade_round_trip() {
    let dir = TempDir::new().unwrap();
    let gen = srcloc(&["generate", "tree", "--n", "30", "--seed", "4"]);
    let g = write(&dir, "g.txt", &String::from_utf8(gen.stdout).unwrap());
    let cdir = simulate_to(&dir, &g, "7", "random:5", &["--cascades", "20", "--seed", "2"], "casc");
    assert_eq!(std::fs::read_dir(&cdir).unwrap().count(), 20);
    let res = srcloc(&["estimate", "--graph", &g, "--cascades-dir", &cdir]);
    assert!(matches!(code(&res), 0 | 3), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn manifest_is_embedded() {
    let dir = TempDir::new().unwrap();
    let g = write(&dir, "g.txt", "0 1\n");
    let res = srcloc(&["simulate", "--graph", &g, "--source", "0", "--observers", "degree:1", "--seed", "42"]);
    let text = String::from_utf8(res.stdout).unwrap();
    assert!(text.contains("# command: simulate"));
    assert!(text.contains("# seed: 42"));
    assert!(text.contains(&format!("# version: srcloc {}", env!("CARGO_PKG_VERSION"))));
    // sha256 of "0 1\n"
    assert!(text.contains("sha256:"));
    let digest = text.lines().find(|l| l.starts_with("# input:")).unwrap();
    assert_eq!(digest.rsplit(':').next().unwrap().len(), 64);
}

const PATH_THRESHOLD: &str = "\
experiment = threshold
network = path
n = 20
placement = list
observer_list = 0, 19, 10
k_grid = 1, 2, 3
sigma = 0
trials = 200
seed = 5
";

#[test]
fn experiment_threads_do_not_change_output() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "exp.cfg",
        "experiment = sweep\nnetwork = ba\nn = 60\nplacement = random\nk_grid = 3, 6, 12\ntrials = 150\nseed = 3\n",
    );
    let one = srcloc(&["experiment", "--config", &cfg, "--threads", "1"]);
    let eight = srcloc(&["experiment", "--config", &cfg, "--threads", "8"]);
    assert_eq!(code(&one), 0, "{}", String::from_utf8_lossy(&one.stderr));
    assert_eq!(one.stdout, eight.stdout);
    let text = String::from_utf8(one.stdout).unwrap();
    assert_eq!(data_lines(&text)[0], "param,p_loc,ci_low,ci_high,hop_err,trials");
    assert_eq!(data_lines(&text).len(), 4);
}

#[test]
fn experiment_reports_threshold() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "exp.cfg", PATH_THRESHOLD);
    let out = dir.path().join("res.csv");
    let res = srcloc(&["experiment", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let text = read(&out);
    assert!(text.contains("# threshold_density: 0.1"), "{text}");
    assert!(text.contains("# config: observer_list = 0, 19, 10"));
}

#[test]
fn experiment_errors_name_key() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "bad.cfg", "network = path\nn = 10\nk = 2\nsigma = -1\n");
    let res = srcloc(&["experiment", "--config", &cfg]);
    assert_eq!(code(&res), 2);
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("sigma") && err.contains("line 4"), "{err}");
}

#[test]
fn experiment_convergence_curve() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "conv.cfg",
        "experiment = convergence\nnetwork = tree\nn = 30\nk = 3\nmu = 2\nsigma = 1\nc_grid = 1, 20\ntrials = 600\nseed = 8\n",
    );
    let res = srcloc(&["experiment", "--config", &cfg]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let text = String::from_utf8(res.stdout).unwrap();
    let gap = |c: &str| -> f64 {
        let prefix = format!("# gap C={c}: ");
        text.lines().find_map(|l| l.strip_prefix(&prefix)).unwrap().parse().unwrap()
    };
    assert!(gap("20") < gap("1"), "{text}");
}
