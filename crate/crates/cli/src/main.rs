//! `klgame`: command-line harness over the klgame library.
//!
//! Every subcommand resolves one [`ExperimentConfig`] (defaults, then the
//! `--config` file, then `--set` overrides, then the dedicated flags),
//! computes its results in full, and only then writes output files, each
//! through a temporary name.
//!
//! Exit codes: 0 success, 1 a verification check failed, 2 configuration,
//! usage or I/O error. Errors print a single line to stderr:
//! `error kind=<kind> message="<text>"`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use klgame::analysis::BoundReport;
use klgame::estimation::{least_squares_fit, population_sq_distance, FitResult, OfflineDataset};
use klgame::harness::{
    plotdata_csv, read_sweep_csv, report_files, sweep_n, sweep_t, Experiment, ExperimentConfig, Method,
    SweepRow,
};
use klgame::io::{to_json_pretty, write_atomic};
use klgame::solver::{fixed_point_residual, nash_oracle, selfplay_run, DEFAULT_MAX_ITERS, EMPIRICAL_TOL};
use klgame::suite::{iteration_reports, run_verify, sample_size_reports};
use klgame::{game::duality_gap, Error};

#[derive(Parser)]
#[command(name = "klgame", version, about = "Offline Nash learning in KL-regularized zero-sum contextual games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample an offline dataset from the true game (dataset.csv).
    Gen(Common),
    /// Least-squares fit over the function class (fit.json).
    Fit(Common),
    /// Exact equilibrium of the fitted game (nash.json).
    Solve(Common),
    /// Self-play mirror descent on the fitted game (trace.csv, policy.json).
    Selfplay(Common),
    /// Run every check (bounds.json); exits 1 if any check fails.
    Verify(Common),
    /// Sample-size sweep (sweep.csv, bounds.json, plot data).
    SweepN(Common),
    /// Iteration sweep at fixed n (sweep.csv, bounds.json, plot data).
    SweepT(Common),
    /// Regenerate plot data from an existing sweep.csv.
    Report(Common),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON config file; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override one config field, e.g. `--set verify.sweeps=false`. Values
    /// are parsed as JSON, falling back to a plain string.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    master_seed: Option<u64>,
    /// Dataset size for gen, fit, solve and selfplay (overrides `n`).
    #[arg(long)]
    n: Option<usize>,
    /// Input file: a dataset CSV for fit, solve and selfplay, or a sweep CSV
    /// for report (default `<out>/sweep.csv`).
    #[arg(long)]
    data: Option<PathBuf>,
}

struct Failure {
    kind: &'static str,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { kind: e.kind(), message: e.to_string() }
    }
}

fn failure(kind: &'static str, message: impl Into<String>) -> Failure {
    Failure { kind, message: message.into() }
}

type CliResult<T> = Result<T, Failure>;

fn set_path(root: &mut Value, key: &str, value: Value) -> CliResult<()> {
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| failure("config", format!("`{key}`: `{}` is not a section", parts[..i].join("."))))?;
        node = obj.get_mut(*part).ok_or_else(|| failure("config", format!("unknown config key `{key}`")))?;
    }
    if node.is_object() && !value.is_object() {
        return Err(failure("config", format!("`{key}` is a section and needs a JSON object")));
    }
    *node = value;
    Ok(())
}

fn parse_override(raw: &str) -> CliResult<(&str, Value)> {
    let (key, text) = raw
        .split_once('=')
        .ok_or_else(|| failure("config", format!("override `{raw}` is not of the form key=value")))?;
    let value = serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string()));
    Ok((key.trim(), value))
}

fn resolve_config(args: &Common) -> CliResult<ExperimentConfig> {
    let base = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| failure("io", format!("cannot read config {}: {e}", path.display())))?;
            let bad = |msg: String| failure("config", format!("{}: {msg}", path.display()));
            let value: Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
            if !value.is_object() {
                return Err(bad("config must be a JSON object".into()));
            }
            serde_json::from_value::<ExperimentConfig>(value).map_err(|e| bad(e.to_string()))?
        }
        None => ExperimentConfig::default(),
    };
    let mut value = serde_json::to_value(&base).map_err(Error::from)?;
    for raw in &args.overrides {
        let (key, v) = parse_override(raw)?;
        set_path(&mut value, key, v)?;
    }
    let mut cfg: ExperimentConfig =
        serde_json::from_value(value).map_err(|e| failure("config", format!("override rejected: {e}")))?;
    if let Some(w) = args.workers {
        cfg.workers = Some(w);
    }
    if let Some(seed) = args.master_seed {
        cfg.master_seed = seed;
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    cfg.validate().map_err(|e| failure("config", e.to_string()))?;
    Ok(cfg)
}

/// Files to write once every computation has succeeded.
struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
    passed: bool,
}

impl Outputs {
    fn ok(files: Vec<(PathBuf, Vec<u8>)>) -> Self {
        Outputs { files, passed: true }
    }
}

fn load_or_sample(exp: &Experiment, args: &Common) -> CliResult<OfflineDataset<f64>> {
    match &args.data {
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| failure("io", format!("cannot read {}: {e}", path.display())))?;
            Ok(OfflineDataset::read_csv(file, exp.config.num_contexts, exp.config.num_actions)?)
        }
        None => Ok(exp.dataset(exp.config.n, exp.config.seeds[0])?),
    }
}

fn fit(exp: &Experiment, args: &Common) -> CliResult<(OfflineDataset<f64>, FitResult<f64>)> {
    let data = load_or_sample(exp, args)?;
    let result = least_squares_fit(&exp.class, &data, Some(&exp.game.payoff))?;
    Ok((data, result))
}

fn print_reports(reports: &[BoundReport]) {
    for r in reports {
        let status = if r.passed { "pass" } else { "FAIL" };
        println!("{status} {:<32} instances={:<6} max_violation={:+.3e} tol={:.1e}", r.name, r.instances_checked, r.max_violation, r.tolerance);
    }
}

/// `config.json`: the resolved configuration behind a verify or sweep run.
fn config_file(cfg: &ExperimentConfig, out: &Path) -> CliResult<(PathBuf, Vec<u8>)> {
    // Worker count does not affect results, so it stays out of the record.
    let cfg = ExperimentConfig { workers: None, ..cfg.clone() };
    let doc = json!({
        "note": "instance parameters are repository defaults unless overridden; no published experiment fixes them",
        "config": cfg,
    });
    Ok((out.join("config.json"), to_json_pretty(&doc)?))
}

fn sweep_outputs(cfg: &ExperimentConfig, rows: &[SweepRow], reports: &[BoundReport], out: &Path) -> CliResult<Outputs> {
    print_reports(reports);
    let mut files: Vec<_> = report_files(rows, reports)?.into_iter().map(|(name, bytes)| (out.join(name), bytes)).collect();
    files.push(config_file(cfg, out)?);
    Ok(Outputs::ok(files))
}

fn run(command: &Command, args: &Common, cfg: &ExperimentConfig, out: &Path) -> CliResult<Outputs> {
    match command {
        Command::Gen(_) => {
            let exp = Experiment::new(cfg)?;
            let data = exp.dataset(cfg.n, cfg.seeds[0])?;
            let mut bytes = Vec::new();
            data.write_csv(&mut bytes)?;
            Ok(Outputs::ok(vec![(out.join("dataset.csv"), bytes)]))
        }
        Command::Fit(_) => {
            let exp = Experiment::new(cfg)?;
            let (data, result) = fit(&exp, args)?;
            let estimate = exp.class.get(result.chosen_index);
            let doc = json!({
                "n": data.len(),
                "chosen_index": result.chosen_index,
                "in_sample_sse": result.in_sample_sse,
                "residual_vs_truth_sse": result.residual_vs_truth_sse,
                "payoff_mse": population_sq_distance(estimate, &exp.game.payoff, &exp.behavior, &exp.game.rho),
                "estimate": estimate,
            });
            Ok(Outputs::ok(vec![(out.join("fit.json"), to_json_pretty(&doc)?)]))
        }
        Command::Solve(_) => {
            let exp = Experiment::new(cfg)?;
            let (data, result) = fit(&exp, args)?;
            let g_hat = exp.class.get(result.chosen_index);
            let pi = nash_oracle(g_hat, &exp.game_cfg, EMPIRICAL_TOL, DEFAULT_MAX_ITERS)?;
            let doc = json!({
                "n": data.len(),
                "chosen_index": result.chosen_index,
                "residual": fixed_point_residual(g_hat, &pi, &exp.game_cfg)?,
                "dual_gap": duality_gap(&exp.game.payoff, &pi, &exp.game_cfg, &exp.game.rho)?,
                "policy": pi,
            });
            Ok(Outputs::ok(vec![(out.join("nash.json"), to_json_pretty(&doc)?)]))
        }
        Command::Selfplay(_) => {
            let exp = Experiment::new(cfg)?;
            let (data, result) = fit(&exp, args)?;
            let g_hat = exp.class.get(result.chosen_index);
            let anchor = &exp.member_nash[result.chosen_index];
            let (pi, trace) = selfplay_run(g_hat, &exp.game_cfg, &exp.game.rho, cfg.iterations, Some(anchor))?;
            let mut csv = Vec::new();
            trace.write_csv(&mut csv)?;
            let doc = json!({
                "n": data.len(),
                "chosen_index": result.chosen_index,
                "iterations": cfg.iterations,
                "residual": fixed_point_residual(g_hat, &pi, &exp.game_cfg)?,
                "dual_gap": duality_gap(&exp.game.payoff, &pi, &exp.game_cfg, &exp.game.rho)?,
                "policy": pi,
            });
            Ok(Outputs::ok(vec![(out.join("trace.csv"), csv), (out.join("policy.json"), to_json_pretty(&doc)?)]))
        }
        Command::Verify(_) => {
            let outcome = run_verify(cfg)?;
            print_reports(&outcome.reports);
            let files = vec![(out.join("bounds.json"), to_json_pretty(&outcome.reports)?), config_file(cfg, out)?];
            Ok(Outputs { files, passed: outcome.passed() })
        }
        Command::SweepN(_) => {
            let exp = Experiment::new(cfg)?;
            let rows = sweep_n(&exp);
            sweep_outputs(cfg, &rows, &sample_size_reports(&exp, &rows), out)
        }
        Command::SweepT(_) => {
            let exp = Experiment::new(cfg)?;
            let rows = sweep_t(&exp);
            sweep_outputs(cfg, &rows, &iteration_reports(&exp, &rows), out)
        }
        Command::Report(_) => {
            let input = args.data.clone().unwrap_or_else(|| out.join("sweep.csv"));
            let text = fs::read_to_string(&input)
                .map_err(|e| failure("io", format!("cannot read {}: {e}", input.display())))?;
            let rows = read_sweep_csv(&text)?;
            let mut files = Vec::new();
            for method in [Method::Minimax, Method::Baseline, Method::SelfPlay] {
                if rows.iter().any(|r| r.method == method) {
                    files.push((out.join(format!("plotdata_{}.csv", method.as_str())), plotdata_csv(&rows, method).into_bytes()));
                }
            }
            Ok(Outputs::ok(files))
        }
    }
}

fn common(command: &Command) -> &Common {
    match command {
        Command::Gen(c)
        | Command::Fit(c)
        | Command::Solve(c)
        | Command::Selfplay(c)
        | Command::Verify(c)
        | Command::SweepN(c)
        | Command::SweepT(c)
        | Command::Report(c) => c,
    }
}

fn execute(cli: &Cli) -> CliResult<bool> {
    let args = common(&cli.command);
    let cfg = resolve_config(args)?;
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    let workers = cfg
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| failure("runtime", e.to_string()))?;
    let outputs = pool.install(|| run(&cli.command, args, &cfg, &out))?;
    for (path, bytes) in &outputs.files {
        write_atomic(path, bytes)?;
    }
    Ok(outputs.passed)
}

fn report_failure(f: &Failure) -> ExitCode {
    let message = f.message.replace(['\n', '\r'], " ");
    eprintln!("error kind={} message={:?}", f.kind, message.trim());
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return report_failure(&failure("usage", e.to_string())),
    };
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => report_failure(&f),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_reach_nested_fields_and_type_check() {
        let args = Common {
            overrides: vec!["verify.sweeps=false".into(), "eta=2".into(), "behavior=skewed".into()],
            ..Common::default()
        };
        let cfg = resolve_config(&args).ok().unwrap();
        assert!(!cfg.verify.sweeps);
        assert_eq!(cfg.eta, 2.0);
        assert_eq!(cfg.behavior, klgame::harness::BehaviorSpec::Skewed);

        for bad in ["nope=1", "verify.nope=1", "verify=[]", "eta=fast", "eta", "num_actions=-1", "eta.x=1"] {
            let args = Common { overrides: vec![bad.into()], ..Common::default() };
            let err = resolve_config(&args).err().unwrap_or_else(|| panic!("{bad} accepted"));
            assert_eq!(err.kind, "config", "{bad}");
        }
    }

    #[test]
    fn flags_take_precedence_over_overrides() {
        let args = Common {
            overrides: vec!["master_seed=5".into(), "n=3".into()],
            master_seed: Some(9),
            n: Some(7),
            workers: Some(2),
            ..Common::default()
        };
        let cfg = resolve_config(&args).ok().unwrap();
        assert_eq!((cfg.master_seed, cfg.n, cfg.workers), (9, 7, Some(2)));
    }

    #[test]
    fn clap_rejects_unknown_flags() {
        assert!(Cli::try_parse_from(["klgame", "gen", "--bogus"]).is_err());
        assert!(Cli::try_parse_from(["klgame", "gen", "--set", "n=1", "--set", "eta=1"]).is_ok());
    }
}
