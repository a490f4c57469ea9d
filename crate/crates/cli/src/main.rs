//! `pns`: sample-size planning, PNS bounds with Wald margins, and SCM
//! validation runs from the command line.
//!
//! Exit codes: 0 success, 2 usage or domain error, 3 estimation
//! precondition failure (an empty experimental arm), 1 I/O failure.

use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pns_core::ci::{arm_margins, MarginReport};
use pns_core::experiment::Experiment;
use pns_core::planner::{plan_constraint, plan_equal, plan_k_term};
use pns_core::sampler::{
    draw_experimental, draw_observational, CellCounts, EstimatedDistributions, SampleKind,
};
use pns_core::scm::{Preset, ScmModel};
use pns_core::{
    informer, pns_bounds, ConfidenceSpec, Error, ExperimentalDist, ObservationalDist, PnsBounds,
};
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(
    name = "pns",
    version,
    about = "Bounds on the probability of necessity and sufficiency"
)]
struct Cli {
    /// Cap on worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample sizes for a target margin of error.
    Plan(PlanArgs),
    /// PNS bounds and per-arm Wald margins from summary data.
    Bounds(BoundsArgs),
    /// Exact distributions, true PNS and bounds of a model.
    Oracle(ModelArgs),
    /// Write a random model file.
    GenModel(GenModelArgs),
    /// Draw an experimental or observational sample as CSV.
    Sample(SampleArgs),
    /// Replication sweep over sample sizes, written as CSV reports.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct ConfidenceArgs {
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Use the table value z = 1.96 (requires --alpha 0.05).
    #[arg(long)]
    z_rounded: bool,
}

impl ConfidenceArgs {
    fn spec(&self) -> Result<ConfidenceSpec, Error> {
        if self.z_rounded {
            if self.alpha != 0.05 {
                return Err(Error::Domain(
                    "--z-rounded is only defined for --alpha 0.05".into(),
                ));
            }
            Ok(ConfidenceSpec::rounded_95())
        } else {
            ConfidenceSpec::new(self.alpha)
        }
    }
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    conf: ConfidenceArgs,
    /// Target margin of error, in (0, 1).
    #[arg(long)]
    epsilon: f64,
    /// Plan for an expression of K Bernoulli terms instead of the full bounds.
    #[arg(long, value_name = "K", conflicts_with = "fixed_m")]
    k_term: Option<u32>,
    /// Fix the experimental size and report the smallest adequate observational size.
    #[arg(long, value_name = "M")]
    fixed_m: Option<u64>,
}

#[derive(Args)]
struct BoundsArgs {
    /// JSON summary: probabilities (`exp`, `obs`, optional `m`, `n`) or counts
    /// (`experimental_counts`, `observational_counts`). `-` reads stdin.
    #[arg(long, default_value = "-")]
    input: String,
    #[command(flatten)]
    conf: ConfidenceArgs,
    /// Experimental sample size (probability input; overrides the file).
    #[arg(long)]
    m: Option<u64>,
    /// Observational sample size (probability input; overrides the file).
    #[arg(long)]
    n: Option<u64>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ModelSource {
    /// Model JSON file.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Shipped model: model1 or model2.
    #[arg(long)]
    preset: Option<Preset>,
}

impl ModelSource {
    fn load(&self) -> Result<ScmModel, Error> {
        match (&self.model, self.preset) {
            (Some(path), _) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    Error::Domain(format!("cannot read model file {}: {e}", path.display()))
                })?;
                ScmModel::from_json(&text)
                    .map_err(|e| Error::Domain(format!("{}: {e}", path.display())))
            }
            (None, Some(preset)) => Ok(preset.model()),
            (None, None) => unreachable!("clap requires one source"),
        }
    }
}

#[derive(Args)]
struct ModelArgs {
    #[command(flatten)]
    source: ModelSource,
}

#[derive(Args)]
struct GenModelArgs {
    #[arg(long)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    source: ModelSource,
    /// experimental or observational
    #[arg(long)]
    kind: SampleKind,
    #[arg(long)]
    size: u64,
    #[arg(long)]
    seed: u64,
    /// CSV output; metadata goes to the same path with a .json extension.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: ModelSource,
    /// Comma-separated sample sizes, used for both m and n.
    #[arg(long, value_delimiter = ',', required = true)]
    grid: Vec<u64>,
    #[arg(long, default_value_t = 1000)]
    reps: u64,
    #[arg(long)]
    seed: u64,
    /// Receives replications.csv and sweep.csv.
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::EmptyArm { .. } => 3,
        Error::Io(_) | Error::Csv(_) => 1,
        _ => 2,
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Plan(args) => cmd_plan(args),
        Command::Bounds(args) => cmd_bounds(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::GenModel(args) => cmd_gen_model(args),
        Command::Sample(args) => cmd_sample(args),
        Command::Simulate(args) => cmd_simulate(args),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    io::stdout().lock().write_all(text.as_bytes())?;
    Ok(())
}

fn cmd_plan(args: PlanArgs) -> Result<(), Error> {
    let conf = args.conf.spec()?;
    if let Some(m) = args.fixed_m {
        let c = plan_constraint(&conf, args.epsilon)?;
        let n = c.min_n_given_m(m).ok_or_else(|| {
            Error::Domain(format!(
                "m = {m} alone exceeds the margin budget; no observational size is adequate"
            ))
        })?;
        return print_json(&json!({
            "m": m,
            "n": n,
            "alpha": c.alpha,
            "z": c.z,
            "epsilon": c.epsilon,
            "threshold": c.threshold,
        }));
    }
    let plan = match args.k_term {
        Some(k) => plan_k_term(k, &conf, args.epsilon)?,
        None => plan_equal(&conf, args.epsilon)?,
    };
    print_json(&plan)
}

#[derive(Serialize)]
struct BoundsOutput {
    exp: ExperimentalDist,
    obs: ObservationalDist,
    m: u64,
    n: u64,
    alpha: f64,
    z: f64,
    bounds: PnsBounds,
    margins: MarginReport,
}

fn read_input(path: &str) -> Result<String, Error> {
    if path == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        fs::read_to_string(path).map_err(|e| Error::Domain(format!("cannot read {path}: {e}")))
    }
}

fn field<T: serde::de::DeserializeOwned>(doc: &Value, key: &str) -> Result<T, Error> {
    let v = doc
        .get(key)
        .ok_or_else(|| Error::Domain(format!("summary input is missing `{key}`")))?;
    serde_json::from_value(v.clone()).map_err(|e| Error::Domain(format!("`{key}`: {e}")))
}

fn cmd_bounds(args: BoundsArgs) -> Result<(), Error> {
    let conf = args.conf.spec()?;
    let doc: Value = serde_json::from_str(&read_input(&args.input)?)
        .map_err(|e| Error::Domain(format!("summary input is not valid JSON: {e}")))?;

    let (exp, obs, m, n) = if doc.get("experimental_counts").is_some() {
        let e: CellCounts = field(&doc, "experimental_counts")?;
        let o: CellCounts = field(&doc, "observational_counts")?;
        let est = EstimatedDistributions::from_counts(&e, &o)?;
        (est.exp_hat, est.obs_hat, est.m, est.n)
    } else {
        let exp: ExperimentalDist = field(&doc, "exp")?;
        let obs: ObservationalDist = field(&doc, "obs")?;
        let size = |flag: Option<u64>, key: &str| -> Result<u64, Error> {
            match flag {
                Some(v) => Ok(v),
                None if doc.get(key).is_some() => field(&doc, key),
                None => Err(Error::Domain(format!(
                    "probability input needs `{key}` (in the file or as --{key})"
                ))),
            }
        };
        (exp, obs, size(args.m, "m")?, size(args.n, "n")?)
    };

    let bounds = pns_bounds(&exp, &obs);
    let margins = arm_margins(&exp, &obs, m, n, &conf)?;
    print_json(&BoundsOutput {
        exp,
        obs,
        m,
        n,
        alpha: conf.alpha(),
        z: conf.z(),
        bounds,
        margins,
    })
}

fn cmd_oracle(args: ModelArgs) -> Result<(), Error> {
    let model = args.source.load()?;
    let truth = informer(&model);
    let bounds = truth.bounds();
    print_json(&json!({
        "model": model.name,
        "exp": truth.exp,
        "obs": truth.obs,
        "true_pns": truth.true_pns,
        "bounds": { "lower": bounds.lower, "upper": bounds.upper },
    }))
}

fn cmd_gen_model(args: GenModelArgs) -> Result<(), Error> {
    let text = ScmModel::generate(args.seed).to_json() + "\n";
    match args.out {
        Some(path) => fs::write(path, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    Ok(BufWriter::new(File::create(path)?))
}

fn cmd_sample(args: SampleArgs) -> Result<(), Error> {
    let model = args.source.load()?;
    let batch = match args.kind {
        SampleKind::Experimental => draw_experimental(&model, args.size, args.seed)?,
        SampleKind::Observational => draw_observational(&model, args.size, args.seed)?,
    };
    batch.write_csv(create(&args.out)?)?;
    let meta = serde_json::to_string_pretty(&batch.meta())? + "\n";
    fs::write(args.out.with_extension("json"), meta)?;
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Error> {
    let model = args.source.load()?;
    if args.grid.contains(&0) {
        return Err(Error::Domain("grid sizes must be positive".into()));
    }
    let experiment = Experiment::new(model);
    let report = experiment.error_sweep(&args.grid, args.reps, args.seed)?;
    fs::create_dir_all(&args.out_dir)?;
    report.write_replications_csv(create(&args.out_dir.join("replications.csv"))?)?;
    report.write_sweep_csv(create(&args.out_dir.join("sweep.csv"))?)?;
    for row in &report.rows {
        eprintln!(
            "size {:>7}: mean err lower {:.5}, upper {:.5}, contains {:.3}, failed {}",
            row.size, row.mean_err_lower, row.mean_err_upper, row.frac_contains, row.failed_reps
        );
    }
    Ok(())
}
