//! `ncilab`: one binary, one subcommand per lab operation.
//!
//! Every subcommand resolves its configuration (file sections, defaults,
//! then flags), writes it to `<out>/config_echo` and puts its data files
//! under `<out>`. Diagnostics go to stderr; summaries go to stdout.

use std::fs;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nci_lab::algebra::algebra_suite;
use nci_lab::config::{AlgebraSection, BoundsSection, DivergenceSection, LabConfig};
use nci_lab::divergence::{
    evaluate_fixed_discriminator, exact_h_divergence, haussler_epsilon, haussler_sample_complexity,
    target_risk_bound, trained_h_divergence, DivergenceMode, DivergenceReport, HypothesisFamily,
};
use nci_lab::experiments::{
    benchmark_dataset, benchmark_train_config, complementarity_sweep, discover_asymmetry,
    render_report, BenchmarkSpec, RiskSpec, SweepSpec,
};
use nci_lab::selftest::{selftest, SelftestOptions};
use nci_lab::synth::{generate, Dataset, Split};
use nci_lab::training::{evaluate, train, Objective, TrainedModel};
use nci_lab::{Error, Result};

/// Exit code for usage errors, including unknown subcommands.
pub const EXIT_USAGE: i32 = 2;
/// Exit code for invalid configuration, failed runs and failed acceptance.
pub const EXIT_FAILURE: i32 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "ncilab",
    version,
    about = "Synthetic asymmetric-domain lab: data, training, divergence, bounds, studies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file; every section is optional.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory, created when missing.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Replaces every seed in the configuration.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Progress messages on stderr.
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Min,
    Fixed,
    Trained,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Erm,
    Commutative,
    Conditional,
    Nci,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Erm => Objective::Erm,
            ObjectiveArg::Commutative => Objective::Commutative,
            ObjectiveArg::Conditional => Objective::Conditional,
            ObjectiveArg::Nci => Objective::Nci,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a dataset: dataset.csv plus its metadata sidecar.
    Gen(Common),
    /// Train a model: model.ckpt and curves.csv.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        objective: Option<ObjectiveArg>,
        /// Target domain for non-ERM objectives.
        #[arg(long, value_name = "DOMAIN")]
        target: Option<String>,
    },
    /// Evaluate `inputs.checkpoint` on every domain's held-out split: metrics.txt.
    Eval(Common),
    /// H-divergence between the target and the other domains: divergence.txt and divergence.csv.
    Hdiv {
        #[command(flatten)]
        common: Common,
        /// min: exact minimum over axis thresholds; fixed: one given discriminator; trained: fresh classifier on a checkpoint's representations.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long, value_name = "DOMAIN")]
        target: Option<String>,
    },
    /// Haussler sample complexity and the target-risk bound: bounds.txt.
    Bounds(Common),
    /// Complementarity sweep: cells.csv, summary.txt, curve.svg.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Concurrent cells.
        #[arg(long, value_name = "N", default_value_t = 1)]
        jobs: usize,
        #[arg(long, value_name = "DOMAIN")]
        target: Option<String>,
    },
    /// Rank domains by standalone label predictability: ranking.txt.
    Discover(Common),
    /// Semigroup, distributivity and sample-fusion checks: algebra.txt.
    AlgebraCheck(Common),
    /// Run the acceptance suite; exit 0 iff every criterion passes.
    Selftest {
        #[command(flatten)]
        common: Common,
        /// Concurrent study cells.
        #[arg(long, value_name = "N", default_value_t = 1)]
        jobs: usize,
        /// Skip the second run that checks byte-identical artifacts.
        #[arg(long)]
        no_determinism: bool,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Gen(c)
            | Command::Eval(c)
            | Command::Bounds(c)
            | Command::Discover(c)
            | Command::AlgebraCheck(c) => c,
            Command::Train { common, .. }
            | Command::Hdiv { common, .. }
            | Command::Sweep { common, .. }
            | Command::Selftest { common, .. } => common,
        }
    }
}

struct Ctx {
    config: LabConfig,
    out: PathBuf,
    seed: Option<u64>,
    verbose: bool,
}

impl Ctx {
    fn note(&self, msg: &str) {
        if self.verbose {
            eprintln!("ncilab: {msg}");
        }
    }

    /// Applies the seed override and writes the echo.
    fn finish_config(&mut self) -> Result<()> {
        if let Some(seed) = self.seed {
            self.config.apply_seed(seed);
        }
        fs::write(self.out.join("config_echo"), self.config.to_toml()?)?;
        Ok(())
    }

    fn dataset(&mut self) -> Result<Dataset> {
        match &self.config.inputs.dataset {
            Some(path) => {
                self.note(&format!("reading {}", path.display()));
                Dataset::read_csv(path)
            }
            None => generate(
                self.config
                    .dataset
                    .get_or_insert_with(|| benchmark_dataset(0)),
            ),
        }
    }

    fn checkpoint(&self, needed_by: &str) -> Result<TrainedModel> {
        match &self.config.inputs.checkpoint {
            Some(path) => TrainedModel::load(path),
            None => Err(Error::Config {
                path: "inputs.checkpoint".into(),
                message: format!("required by {needed_by}"),
            }),
        }
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("ncilab: {e}");
            EXIT_FAILURE
        }
    }
}

fn run(command: Command) -> Result<i32> {
    let common = command.common();
    let config = match &common.config {
        Some(path) => LabConfig::load(path)?,
        None => LabConfig::default(),
    };
    fs::create_dir_all(&common.out)?;
    let mut ctx = Ctx {
        config,
        out: common.out.clone(),
        seed: common.seed,
        verbose: common.verbose > 0,
    };
    match command {
        Command::Gen(_) => gen(&mut ctx),
        Command::Train {
            objective, target, ..
        } => train_cmd(&mut ctx, objective.map(Objective::from), target),
        Command::Eval(_) => eval(&mut ctx),
        Command::Hdiv { mode, target, .. } => hdiv(&mut ctx, mode, target),
        Command::Bounds(_) => bounds(&mut ctx),
        Command::Sweep { jobs, target, .. } => sweep(&mut ctx, jobs, target),
        Command::Discover(_) => discover(&mut ctx),
        Command::AlgebraCheck(_) => algebra_check(&mut ctx),
        Command::Selftest {
            jobs,
            no_determinism,
            ..
        } => selftest_cmd(&mut ctx, jobs, !no_determinism),
    }
}

fn stdout_lines(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())?;
    Ok(())
}

fn gen(ctx: &mut Ctx) -> Result<i32> {
    ctx.config
        .dataset
        .get_or_insert_with(|| benchmark_dataset(0));
    ctx.config.inputs.dataset = None;
    ctx.finish_config()?;
    let ds = ctx.dataset()?;
    let path = ctx.out.join("dataset.csv");
    ds.write_csv(&path)?;
    stdout_lines(&format!(
        "wrote {} ({} rows)\n",
        path.display(),
        ds.samples.len()
    ))?;
    Ok(0)
}

fn train_cmd(ctx: &mut Ctx, objective: Option<Objective>, target: Option<String>) -> Result<i32> {
    let default_objective = objective.unwrap_or(Objective::Nci);
    let tc = ctx
        .config
        .train
        .get_or_insert_with(|| benchmark_train_config(default_objective, 0));
    if let Some(o) = objective {
        tc.objective = o;
    }
    if target.is_some() {
        tc.target_domain = target;
    }
    if ctx.config.inputs.dataset.is_none() {
        ctx.config
            .dataset
            .get_or_insert_with(|| benchmark_dataset(0));
    }
    ctx.finish_config()?;
    let tc = ctx.config.train.clone().expect("set above");
    tc.validate()?;
    let ds = ctx.dataset()?;
    ctx.note(&format!(
        "training {} for {} epochs",
        tc.objective, tc.epochs
    ));
    let model = train(&ds, &tc)?;
    model.save(&ctx.out.join("model.ckpt"))?;
    fs::write(ctx.out.join("curves.csv"), model.curve_csv())?;
    let last = model.curve.last().expect("at least one epoch");
    stdout_lines(&format!(
        "objective = {}\nepochs = {}\nfinal_task_loss = {:?}\nfinal_train_acc = {:?}\n",
        tc.objective,
        model.curve.len(),
        last.task_loss,
        last.train_acc
    ))?;
    Ok(0)
}

fn eval(ctx: &mut Ctx) -> Result<i32> {
    if ctx.config.inputs.dataset.is_none() {
        ctx.config
            .dataset
            .get_or_insert_with(|| benchmark_dataset(0));
    }
    ctx.finish_config()?;
    let model = ctx.checkpoint("eval")?;
    let ds = ctx.dataset()?;
    let mut text = String::new();
    for name in ds.domain_names() {
        if ds
            .samples_in(ds.domain_index(name)?, Split::Eval)
            .is_empty()
        {
            continue;
        }
        let ev = evaluate(&model, &ds, name)?;
        text.push_str(&format!(
            "[domain.{name:?}]\naccuracy = {:?}\ncross_entropy = {:?}\nzero_one = {:?}\nsamples = {}\n\n",
            ev.accuracy, ev.risk.cross_entropy, ev.risk.zero_one, ev.risk.samples
        ));
    }
    fs::write(ctx.out.join("metrics.txt"), &text)?;
    stdout_lines(&text)?;
    Ok(0)
}

fn hdiv(ctx: &mut Ctx, mode: Option<ModeArg>, target: Option<String>) -> Result<i32> {
    let section = ctx
        .config
        .divergence
        .get_or_insert_with(DivergenceSection::default);
    if let Some(m) = mode {
        section.mode = match m {
            ModeArg::Min => DivergenceMode::MinOverFamily,
            ModeArg::Fixed => DivergenceMode::FixedDiscriminator,
            ModeArg::Trained => DivergenceMode::Trained,
        };
    }
    if target.is_some() {
        section.target = target;
    }
    if section.target.is_none() {
        let from_train = ctx
            .config
            .train
            .as_ref()
            .and_then(|t| t.target_domain.clone());
        section.target = Some(from_train.unwrap_or_else(|| "target".into()));
    }
    if ctx.config.inputs.dataset.is_none() {
        ctx.config
            .dataset
            .get_or_insert_with(|| benchmark_dataset(0));
    }
    ctx.finish_config()?;
    let section = ctx.config.divergence.clone().expect("set above");
    let target = section.target.clone().expect("set above");
    let ds = ctx.dataset()?;
    let model = match (&ctx.config.inputs.checkpoint, section.mode) {
        (Some(_), _) | (None, DivergenceMode::Trained) => {
            Some(ctx.checkpoint("trained-mode hdiv")?)
        }
        (None, _) => None,
    };
    let t = ds.present_domain(&target)?;
    let report: DivergenceReport = if section.mode == DivergenceMode::Trained {
        let model = model.as_ref().expect("checked above");
        trained_h_divergence(&model.encoder, &ds, &target, &section.fit, section.seed)?
    } else {
        let rows = |want_target: bool| -> Result<Vec<Vec<f64>>> {
            let samples: Vec<_> = ds
                .samples
                .iter()
                .filter(|s| (s.domain == t) == want_target)
                .collect();
            let (x, _) = Dataset::matrix(&samples)?;
            let reps = match &model {
                Some(m) => m.represent(&x)?,
                None => x,
            };
            Ok((0..reps.rows())
                .map(|r| reps.row_slice(r).to_vec())
                .collect())
        };
        let (source, target_rows) = (rows(false)?, rows(true)?);
        match section.mode {
            DivergenceMode::MinOverFamily => {
                let family = HypothesisFamily::from_data(&[&source, &target_rows])?;
                exact_h_divergence(&source, &target_rows, &family)?
            }
            _ => {
                let h = section.discriminator;
                evaluate_fixed_discriminator(&source, &target_rows, |x| h.classify(x))?
            }
        }
    };
    let encoder = if model.is_some() {
        "checkpoint"
    } else {
        "raw_features"
    };
    fs::write(ctx.out.join("divergence.txt"), report.to_text())?;
    fs::write(
        ctx.out.join("divergence.csv"),
        format!(
            "{}\n{}\n",
            DivergenceReport::CSV_HEADER,
            report.csv_row(encoder, "rest", &target)
        ),
    )?;
    stdout_lines(&report.to_text())?;
    Ok(0)
}

fn bounds(ctx: &mut Ctx) -> Result<i32> {
    ctx.config.bounds.get_or_insert_with(BoundsSection::default);
    ctx.finish_config()?;
    let b = ctx.config.bounds.clone().expect("set above");
    let h = b.haussler;
    let m = haussler_sample_complexity(h.hypotheses, h.delta, h.epsilon)?;
    let achieved = haussler_epsilon(h.hypotheses, h.delta, m)?;
    let mut text = format!(
        "haussler: |T|={} delta={} epsilon={} M={m} epsilon_at_M={achieved:?}\n",
        h.hypotheses, h.delta, h.epsilon
    );
    if let Some(inputs) = &b.risk {
        text.push_str(&format!(
            "target_risk_bound: r_s={} n={} d={} delta={} beta={} d_hat={} bound={:?}\n",
            inputs.r_s,
            inputs.n,
            inputs.d,
            inputs.delta,
            inputs.beta,
            inputs.d_hat,
            target_risk_bound(inputs)?
        ));
    }
    fs::write(ctx.out.join("bounds.txt"), &text)?;
    stdout_lines(&text)?;
    Ok(0)
}

fn sweep(ctx: &mut Ctx, jobs: usize, target: Option<String>) -> Result<i32> {
    let spec = ctx.config.sweep.get_or_insert_with(SweepSpec::default);
    if let Some(t) = target {
        spec.train.target_domain = Some(t.clone());
        spec.target = t;
    }
    ctx.finish_config()?;
    let spec = ctx.config.sweep.clone().expect("set above");
    ctx.note(&format!(
        "{} grid points x {} seeds, {jobs} jobs",
        spec.grid.len(),
        spec.seeds.len()
    ));
    let mut report = complementarity_sweep(&spec, jobs)?;
    report.config_echo = ctx.config.to_toml()?;
    render_report(&report, &ctx.out)?;
    stdout_lines(&report.summary_text())?;
    Ok(0)
}

fn discover(ctx: &mut Ctx) -> Result<i32> {
    ctx.config
        .train
        .get_or_insert_with(|| benchmark_train_config(Objective::Erm, 0));
    if ctx.config.inputs.dataset.is_none() {
        ctx.config
            .dataset
            .get_or_insert_with(|| benchmark_dataset(0));
    }
    ctx.finish_config()?;
    let template = ctx.config.train.clone().expect("set above");
    let ds = ctx.dataset()?;
    let ranking = discover_asymmetry(&ds, &template, 1)?;
    fs::write(ctx.out.join("ranking.txt"), ranking.to_text())?;
    stdout_lines(&ranking.to_text())?;
    Ok(0)
}

fn algebra_check(ctx: &mut Ctx) -> Result<i32> {
    ctx.config
        .algebra
        .get_or_insert_with(AlgebraSection::default);
    ctx.finish_config()?;
    let a = ctx.config.algebra.clone().expect("set above");
    let report = algebra_suite(a.random_triples, a.seed)?;
    let text = report.to_text();
    fs::write(ctx.out.join("algebra.txt"), &text)?;
    stdout_lines(&text)?;
    if report.as_expected() {
        Ok(0)
    } else {
        eprintln!("ncilab: algebra checks did not match the expected pass/fail pattern");
        Ok(EXIT_FAILURE)
    }
}

fn selftest_cmd(ctx: &mut Ctx, jobs: usize, determinism: bool) -> Result<i32> {
    let c = &mut ctx.config;
    let opts_seed = ctx.seed.unwrap_or(0);
    c.benchmark.get_or_insert_with(BenchmarkSpec::default);
    c.risk.get_or_insert_with(RiskSpec::default);
    c.sweep.get_or_insert_with(SweepSpec::default);
    c.algebra.get_or_insert_with(AlgebraSection::default);
    if let Some(seed) = ctx.seed {
        c.apply_seed(seed);
    }
    let opts = SelftestOptions {
        jobs,
        benchmark: c.benchmark.clone().expect("set above"),
        risk: c.risk.clone().expect("set above"),
        sweep: c.sweep.clone().expect("set above"),
        algebra: c.algebra.clone().expect("set above"),
        seed: opts_seed,
        determinism,
    };
    let echo = c.to_toml()?;
    let report = selftest(&opts, &ctx.out)?;
    // written after the run so the determinism rerun compares like with like
    fs::write(ctx.out.join("config_echo"), echo)?;
    for c in &report.criteria {
        ctx.note(&format!("criterion {:02} took {:.1} s", c.id, c.seconds));
    }
    stdout_lines(&report.to_text())?;
    if report.all_passed() {
        Ok(0)
    } else {
        eprintln!("ncilab: failing criteria: {}", report.failing().join(", "));
        Ok(EXIT_FAILURE)
    }
}
