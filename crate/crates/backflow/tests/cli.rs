use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use backflow::manifest::Manifest;

const SMALL_SWEEP: &str = "seed = 3
[lattice]
lx = 6
ly = 16
[mc]
n_therm = 50
stride = 2
n_measurements = 20
[sweep]
p = [0.1, 0.3]
l_a = [0, 2, 4]
seeds = [0, 1]
heatmaps = [0.3]
";

fn backflow(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_backflow"))
        .args(args)
        .current_dir(dir)
        .env_remove("BACKFLOW_OUT")
        .env_remove("BACKFLOW_THREADS")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Relative paths of all files under `root`.
fn tree(root: &Path) -> BTreeSet<String> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeSet<String>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/"));
            }
        }
    }
    let mut out = BTreeSet::new();
    walk(root, root, &mut out);
    out
}

fn manifest(root: &Path) -> Manifest {
    serde_json::from_str(&fs::read_to_string(root.join("manifest.json")).unwrap()).unwrap()
}

fn assert_same_data(a: &Path, b: &Path) {
    let files = tree(a);
    assert_eq!(files, tree(b));
    for f in files.iter().filter(|f| *f != "manifest.json") {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn unknown_key_exits_one_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", "seed = 1\n\n[mc]\nn_therm = 10\nsweeps = 4\n");
    let o = backflow(&["mc-sweep", "--config", "c.toml", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 5"), "{}", stderr(&o));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn type_error_exits_one_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", "[lattice]\nlx = \"wide\"\n");
    let o = backflow(&["mc-sweep", "--config", "c.toml", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn empty_p_grid_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", "[sweep]\np = []\n");
    let o = backflow(&["mc-sweep", "--config", "c.toml", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("p grid is empty"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn missing_config_and_bad_flags_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(backflow(&["rate-report", "--config", "nope.toml"], dir.path()).status.code(), Some(1));
    assert_eq!(backflow(&["mc-sweep", "--threads", "0"], dir.path()).status.code(), Some(1));
    assert_eq!(backflow(&["mc-sweep", "--seed", "minus"], dir.path()).status.code(), Some(1));
    assert_eq!(backflow(&["sweep"], dir.path()).status.code(), Some(1));
    assert!(fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn runtime_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    // The table stops at t = 2 but 16 layers need t = 7.5.
    write(
        dir.path(),
        "c.toml",
        "[rate]\nkind = \"tabulated\"\npoints = [[0.0, 0.5], [2.0, 1.0]]\n[lattice]\nlx = 4\nly = 16\n",
    );
    let o = backflow(&["mc-sweep", "--config", "c.toml", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(!dir.path().join("out").exists());
    let o = backflow(&["analyze", "--out", "empty"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_reruns_are_byte_identical_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", SMALL_SWEEP);
    for (out, threads) in [("a", "1"), ("b", "3")] {
        let o = backflow(&["mc-sweep", "--config", "c.toml", "--out", out, "--threads", threads], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_same_data(&a, &b);

    let m = manifest(&a);
    let mut listed: BTreeSet<String> = m.files.iter().cloned().collect();
    listed.insert("manifest.json".into());
    assert_eq!(listed, tree(&a), "manifest and directory disagree");
    assert_eq!(m.chains.len(), 2 * 3 * 2);
    assert!(m.failures.is_empty());
    assert!(m.chains.iter().all(|c| c.file.as_ref().is_some_and(|f| m.files.contains(f))));
    let seeds: BTreeSet<u64> = m.chains.iter().map(|c| c.chain_seed).collect();
    assert_eq!(seeds.len(), m.chains.len(), "chain seeds collide");
    assert_eq!(m.version, env!("CARGO_PKG_VERSION"));
    assert!(listed.contains("heatmaps/local_p0.3_la04_s0.svg"));

    let header = fs::read_to_string(a.join("summary.csv")).unwrap();
    assert!(header.starts_with("p,slope,slope_err,normalized_slope,normalized_err\n"));
    let chain = fs::read_to_string(a.join("chains/chain_p0.1_la02_s1.csv")).unwrap();
    assert!(chain.starts_with("step,total_energy,boundary_energy\n"));
    assert_eq!(chain.lines().count(), 21);
}

#[test]
fn echoed_config_reruns_to_identical_data() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", SMALL_SWEEP);
    assert_eq!(backflow(&["mc-sweep", "--config", "c.toml", "--out", "a", "--seed", "11"], dir.path()).status.code(), Some(0));
    fs::copy(dir.path().join("a/config.toml"), dir.path().join("echo.toml")).unwrap();
    assert_eq!(backflow(&["mc-sweep", "--config", "echo.toml", "--out", "b"], dir.path()).status.code(), Some(0));
    assert_same_data(&dir.path().join("a"), &dir.path().join("b"));
    assert_eq!(manifest(&dir.path().join("a")).config, fs::read_to_string(dir.path().join("echo.toml")).unwrap());
}

#[test]
fn seed_flag_changes_the_samples() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", SMALL_SWEEP);
    backflow(&["mc-sweep", "--config", "c.toml", "--out", "a"], dir.path());
    backflow(&["mc-sweep", "--config", "c.toml", "--out", "b", "--seed", "4"], dir.path());
    let f = "chains/chain_p0.3_la04_s0.csv";
    assert_ne!(fs::read(dir.path().join("a").join(f)).unwrap(), fs::read(dir.path().join("b").join(f)).unwrap());
}

#[test]
fn analyze_reproduces_the_sweep_fits() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", SMALL_SWEEP);
    backflow(&["mc-sweep", "--config", "c.toml", "--out", "sweep"], dir.path());
    write(dir.path(), "a.toml", "[analyze]\ninput = \"sweep\"\n[lattice]\nlx = 6\nly = 16\n");
    let o = backflow(&["analyze", "--config", "a.toml", "--out", "fit"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["cells.csv", "summary.csv", "transition.json"] {
        assert_eq!(fs::read(dir.path().join("sweep").join(f)).unwrap(), fs::read(dir.path().join("fit").join(f)).unwrap());
    }
}

#[test]
fn environment_sets_output_and_caps_threads() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_backflow"))
        .args(["rate-report", "--threads", "8"])
        .current_dir(dir.path())
        .env("BACKFLOW_OUT", "from-env")
        .env("BACKFLOW_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(manifest(&dir.path().join("from-env")).threads, 2);
    let o = Command::new(env!("CARGO_BIN_EXE_backflow"))
        .args(["rate-report"])
        .current_dir(dir.path())
        .env("BACKFLOW_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn rate_report_finds_the_backflow_layers() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(backflow(&["rate-report", "--out", "r"], dir.path()).status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("r/rate_report.json")).unwrap()).unwrap();
    assert_eq!(report["negative_layers"], serde_json::json!([[8, 12]]));
    assert_eq!(report["first_minimum"]["negative"], true);
    let schedule = fs::read_to_string(dir.path().join("r/schedule.csv")).unwrap();
    assert_eq!(schedule.lines().next(), Some("layer_index,t,p_i,markovian"));
    assert_eq!(schedule.lines().filter(|l| l.ends_with(",false")).count(), 4);
    let bonds = fs::read_to_string(dir.path().join("r/bond_energies.csv")).unwrap();
    // Three cycle types of S_3 per layer.
    assert_eq!(bonds.lines().count(), 1 + 3 * 50);
}

#[test]
fn trajectory_validate_defaults_meet_the_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "t.toml", "[trajectory]\nsamples = 20000\n");
    let o = backflow(&["trajectory-validate", "--config", "t.toml", "--out", "t"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("t/validation.json")).unwrap()).unwrap();
    assert_eq!(v["within_tolerance"], true, "{v}");
    let classes = fs::read_to_string(dir.path().join("t/classes.csv")).unwrap();
    assert!(classes.starts_with("class_id,jump_record,weight,final_state_norm\n"));
    let rho: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("t/rho_master.json")).unwrap()).unwrap();
    assert_eq!(rho["dim"], 2);
    assert_eq!(rho["data"].as_array().unwrap().len(), 4);
    assert_eq!(fs::read_to_string(dir.path().join("t/trace_distance.csv")).unwrap().lines().count(), 202);
}

#[test]
fn heatmap_of_one_cell_and_of_a_flat_matrix() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "one.csv", "2.5\n");
    write(dir.path(), "flat.csv", "1,1,1\n1,1,1\n");
    write(dir.path(), "h1.toml", "[heatmap]\ninput = \"one.csv\"\n");
    write(dir.path(), "h2.toml", "[heatmap]\ninput = \"flat.csv\"\ntitle = \"flat <map>\"\n");
    assert_eq!(backflow(&["heatmap", "--config", "h1.toml", "--out", "h"], dir.path()).status.code(), Some(0));
    assert_eq!(backflow(&["heatmap", "--config", "h2.toml", "--out", "h"], dir.path()).status.code(), Some(0));

    let one = fs::read_to_string(dir.path().join("h/one.svg")).unwrap();
    assert_eq!(one.matches("<rect").count(), 1);
    assert!(one.contains("min = 2.500000e0  max = 2.500000e0"));

    let flat = fs::read_to_string(dir.path().join("h/flat.svg")).unwrap();
    let fills: BTreeSet<&str> = flat.lines().filter(|l| l.starts_with("<rect")).map(|l| &l[l.find("fill").unwrap()..]).collect();
    assert_eq!(fills.len(), 1);
    assert!(flat.contains("min = 1.000000e0  max = 1.000000e0"));
    assert!(flat.contains("flat &lt;map&gt;"));
}

#[test]
fn heatmap_rejects_empty_and_ragged_input() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "empty.csv", "");
    write(dir.path(), "ragged.csv", "1,2\n3\n");
    for input in ["empty.csv", "ragged.csv"] {
        write(dir.path(), "h.toml", &format!("[heatmap]\ninput = \"{input}\"\n"));
        let o = backflow(&["heatmap", "--config", "h.toml", "--out", "h"], dir.path());
        assert_eq!(o.status.code(), Some(1), "{input}: {}", stderr(&o));
        assert!(!dir.path().join("h").exists());
    }
}
