use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ncilab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncilab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

const SMALL_DATASET: &str = r#"
[dataset]
seed = 0
concept_dim = 3
num_classes = 3
num_supports = 400
shared_fraction = 0.8
unique_fraction = 0.1

[[dataset.domains]]
name = "source"
concept_noise = 1.0
label_leak = 0.0
block_dim = 3
block_noise = 0.3

[[dataset.domains]]
name = "target"
concept_noise = 0.0
label_leak = 2.0
block_dim = 3
block_noise = 0.3
"#;

const SMALL_TRAIN: &str = r#"
[train]
objective = "nci"
target_domain = "target"
lr = 0.01
epochs = 3
batch_size = 32
seed = 0
encoder_hidden = [8]
rep_dim = 4
disc_hidden = [8]
"#;

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("lab.toml");
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn out(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn bounds_prints_the_haussler_example() {
    let dir = tempfile::tempdir().unwrap();
    let o = out(dir.path(), "b");
    let r = ncilab(&["bounds", "--out", &o]);
    assert_eq!(r.status.code(), Some(0), "{}", text(&r.stderr));
    assert!(text(&r.stdout).contains("M=120"), "{}", text(&r.stdout));
    assert!(fs::read_to_string(dir.path().join("b/bounds.txt"))
        .unwrap()
        .contains("M=120"));
    assert!(dir.path().join("b/config_echo").exists());
}

#[test]
fn bounds_with_risk_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[bounds.risk]\nr_s = 0.1\nn = 1000.0\nd = 10.0\ndelta = 0.05\nbeta = 0.05\nd_hat = 0.2\n",
    );
    let r = ncilab(&["bounds", "--config", &cfg, "--out", &out(dir.path(), "b")]);
    assert_eq!(r.status.code(), Some(0));
    assert!(
        text(&r.stdout).contains("bound=1.82713747641938"),
        "{}",
        text(&r.stdout)
    );
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let r = ncilab(&["frobnicate"]);
    assert_eq!(r.status.code(), Some(2));
    assert!(text(&r.stderr).contains("Usage"));
    assert_eq!(ncilab(&[]).status.code(), Some(2));
    assert_eq!(
        ncilab(&["hdiv", "--mode", "sideways"]).status.code(),
        Some(2)
    );
}

#[test]
fn help_lists_every_subcommand() {
    let r = ncilab(&["--help"]);
    assert_eq!(r.status.code(), Some(0));
    let help = text(&r.stdout);
    for sub in [
        "gen",
        "train",
        "eval",
        "hdiv",
        "bounds",
        "sweep",
        "discover",
        "algebra-check",
        "selftest",
    ] {
        assert!(help.contains(sub), "missing {sub}");
    }
}

#[test]
fn invalid_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[algebra]\nrandom_triples = 10\ncolour = \"blue\"\n",
    );
    let r = ncilab(&[
        "algebra-check",
        "--config",
        &cfg,
        "--out",
        &out(dir.path(), "a"),
    ]);
    assert_eq!(r.status.code(), Some(1));
    assert!(
        text(&r.stderr).contains("algebra.colour"),
        "{}",
        text(&r.stderr)
    );
}

#[test]
fn gen_is_deterministic_and_seedable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_DATASET);
    for name in ["g1", "g2"] {
        assert_eq!(
            ncilab(&["gen", "--config", &cfg, "--out", &out(dir.path(), name)])
                .status
                .code(),
            Some(0)
        );
    }
    let read = |p: &str| fs::read(dir.path().join(p)).unwrap();
    assert_eq!(read("g1/dataset.csv"), read("g2/dataset.csv"));
    assert_eq!(
        read("g1/dataset.csv.meta.toml"),
        read("g2/dataset.csv.meta.toml")
    );
    assert_eq!(read("g1/config_echo"), read("g2/config_echo"));

    ncilab(&[
        "gen",
        "--config",
        &cfg,
        "--out",
        &out(dir.path(), "g3"),
        "--seed",
        "9",
    ]);
    assert_ne!(read("g1/dataset.csv"), read("g3/dataset.csv"));
    assert!(text(&read("g3/config_echo")).contains("seed = 9"));
    let header = text(&read("g1/dataset.csv"))
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert_eq!(header, "support_id,domain,label,f0,f1,f2,f3,f4,f5,f6,f7,f8");
}

#[test]
fn train_eval_and_divergence_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL_DATASET}{SMALL_TRAIN}"));
    let t = out(dir.path(), "t");
    let r = ncilab(&[
        "train",
        "--config",
        &cfg,
        "--out",
        &t,
        "--objective",
        "commutative",
    ]);
    assert_eq!(r.status.code(), Some(0), "{}", text(&r.stderr));
    let curves = fs::read_to_string(dir.path().join("t/curves.csv")).unwrap();
    assert_eq!(
        curves.lines().next().unwrap(),
        "epoch,task_loss,adv_loss,disc_loss,train_acc"
    );
    assert_eq!(curves.lines().count(), 4);
    assert!(fs::read_to_string(dir.path().join("t/config_echo"))
        .unwrap()
        .contains("objective = \"commutative\""));

    let ckpt = dir.path().join("t/model.ckpt");
    let cfg2 = write_config(
        dir.path(),
        &format!(
            "[inputs]\ncheckpoint = {:?}\n{SMALL_DATASET}",
            ckpt.to_str().unwrap()
        ),
    );
    let r = ncilab(&["eval", "--config", &cfg2, "--out", &out(dir.path(), "e")]);
    assert_eq!(r.status.code(), Some(0), "{}", text(&r.stderr));
    let metrics = fs::read_to_string(dir.path().join("e/metrics.txt")).unwrap();
    assert!(metrics.contains("[domain.\"target\"]") && metrics.contains("accuracy = "));

    for mode in ["min", "fixed", "trained"] {
        let o = out(dir.path(), &format!("h_{mode}"));
        let r = ncilab(&["hdiv", "--config", &cfg2, "--out", &o, "--mode", mode]);
        assert_eq!(r.status.code(), Some(0), "{mode}: {}", text(&r.stderr));
        let csv = fs::read_to_string(Path::new(&o).join("divergence.csv")).unwrap();
        assert!(csv.starts_with("encoder,source,target,mode,"));
        assert!(Path::new(&o).join("config_echo").exists());
    }
}

#[test]
fn eval_without_checkpoint_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let r = ncilab(&["eval", "--out", &out(dir.path(), "e")]);
    assert_eq!(r.status.code(), Some(1));
    assert!(text(&r.stderr).contains("inputs.checkpoint"));
    let r = ncilab(&["hdiv", "--mode", "trained", "--out", &out(dir.path(), "h")]);
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn raw_feature_divergence_without_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_DATASET);
    let o = out(dir.path(), "h");
    let r = ncilab(&["hdiv", "--config", &cfg, "--out", &o, "--target", "target"]);
    assert_eq!(r.status.code(), Some(0), "{}", text(&r.stderr));
    let report = fs::read_to_string(Path::new(&o).join("divergence.txt")).unwrap();
    assert!(report.contains("mode = \"min_over_family\""));
}

#[test]
fn algebra_check_passes_and_shows_witnesses() {
    let dir = tempfile::tempdir().unwrap();
    let o = out(dir.path(), "a");
    let r = ncilab(&["algebra-check", "--out", &o]);
    assert_eq!(r.status.code(), Some(0), "{}", text(&r.stderr));
    let report = fs::read_to_string(Path::new(&o).join("algebra.txt")).unwrap();
    assert!(report.contains("operator = \"commutative\""));
    assert!(report.contains("witness"));
    assert!(Path::new(&o).join("config_echo").exists());
}

#[test]
fn discover_ranks_the_leaky_domain_first() {
    let dir = tempfile::tempdir().unwrap();
    let train = SMALL_TRAIN.replace("epochs = 3", "epochs = 10");
    let cfg = write_config(dir.path(), &format!("{SMALL_DATASET}{train}"));
    let o = out(dir.path(), "d");
    let r = ncilab(&["discover", "--config", &cfg, "--out", &o]);
    assert_eq!(r.status.code(), Some(0), "{}", text(&r.stderr));
    assert!(text(&r.stdout).starts_with("recommended_target = \"target\""));
}

fn small_sweep() -> String {
    let base = SMALL_DATASET
        .replace("[dataset]", "[sweep.base]")
        .replace("[[dataset.domains]]", "[[sweep.base.domains]]")
        .replace(
            "shared_fraction = 0.8\nunique_fraction = 0.1",
            "shared_fraction = 0.5\nunique_fraction = 0.0",
        );
    let train = SMALL_TRAIN.replace("[train]", "[sweep.train]");
    format!(
        "[sweep]\ncomplementary_source = \"source\"\ntarget = \"target\"\ngrid = [0.1, 0.3]\nseeds = [0, 1]\nobjectives = [\"nci\"]\n{base}{train}"
    )
}

#[test]
fn sweep_writes_the_study_tree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_sweep());
    let o = out(dir.path(), "s");
    let r = ncilab(&["sweep", "--config", &cfg, "--out", &o, "--jobs", "2"]);
    assert_eq!(r.status.code(), Some(0), "{}", text(&r.stderr));
    let cells = fs::read_to_string(Path::new(&o).join("cells.csv")).unwrap();
    assert_eq!(
        cells.lines().next().unwrap(),
        "setting,arm,x,seed,accuracy,risk,zero_one,d_hat,train_samples"
    );
    assert_eq!(cells.lines().count(), 1 + 4);
    for f in ["summary.txt", "curve.svg", "config_echo"] {
        assert!(Path::new(&o).join(f).exists(), "{f}");
    }
    assert!(fs::read_to_string(Path::new(&o).join("config_echo"))
        .unwrap()
        .contains("[sweep]"));
}

#[test]
fn failing_selftest_exits_one_and_names_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let bench_data = SMALL_DATASET
        .replace("[dataset]", "[benchmark.dataset]")
        .replace("[[dataset.domains]]", "[[benchmark.dataset.domains]]");
    let risk_data = SMALL_DATASET
        .replace("[dataset]", "[risk.dataset]")
        .replace("[[dataset.domains]]", "[[risk.dataset.domains]]")
        .replace("unique_fraction = 0.1", "unique_fraction = 0.05");
    let body = format!(
        "[benchmark]\nseeds = [0]\nobjectives = [\"commutative\", \"nci\"]\n{bench_data}{}\
         [benchmark.divergence]\nhidden = [4]\nepochs = 1\nbatch_size = 32\nlr = 0.01\n\
         [risk]\ntarget = \"target\"\nk = 3\nseeds = [0]\n{risk_data}{}\
         [risk.probe]\nhidden = []\nepochs = 1\nbatch_size = 32\nlr = 0.01\n{}",
        SMALL_TRAIN
            .replace("[train]", "[benchmark.train]")
            .replace("epochs = 3", "epochs = 1"),
        SMALL_TRAIN
            .replace("[train]", "[risk.train]")
            .replace("epochs = 3", "epochs = 1"),
        small_sweep().replace("epochs = 3", "epochs = 1"),
    );
    let cfg = write_config(dir.path(), &body);
    let o = out(dir.path(), "st");
    let r = ncilab(&["selftest", "--config", &cfg, "--out", &o]);
    let report = fs::read_to_string(Path::new(&o).join("selftest.txt"))
        .unwrap_or_else(|e| panic!("{e}: {}", text(&r.stderr)));
    assert_eq!(report.lines().count(), 11, "{report}");
    assert!(report.contains("PASS 11 determinism"), "{report}");
    assert!(report.contains("PASS 05 haussler"), "{report}");
    if r.status.code() == Some(1) {
        assert!(text(&r.stderr).contains("failing criteria"));
    } else {
        assert_eq!(r.status.code(), Some(0));
    }
    assert!(Path::new(&o).join("config_echo").exists());
}
