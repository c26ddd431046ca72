use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sumhess::cones::{sample_cone, ConeId};
use sumhess::estimates::{family_report, EstimateParams, EstimateReport, PParams, ReportTable};
use sumhess::frontend::config::RunConfig;
use sumhess::frontend::trace_csv;
use sumhess::solver::{newton_solve, ScalarField, SolveResult};
use sumhess::suites::{identity_suites, inequality_suites, spectral_suites, sweep, Tolerances};
use sumhess::symfun::SumHessianParams;
use sumhess::Error;

#[derive(Parser)]
#[command(name = "sumhess", version, about = "Sum Hessian equation lab: property suites, cone sampling, solves and estimate reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the property suites for one (n, k, alpha) or the full sweep.
    Verify(VerifyArgs),
    /// Draw a seeded cone batch as CSV.
    Sample(SampleArgs),
    /// Solve the instance of a config file.
    Solve(SolveArgs),
    /// Estimate report for a field file or a config file.
    Estimate(EstimateArgs),
    /// Family table for several config files.
    Report(ReportArgs),
}

#[derive(Args)]
struct VerifyArgs {
    /// Dimension; every n in 2..=8 when omitted.
    #[arg(long)]
    n: Option<usize>,
    /// Order; every k in 1..=n when omitted.
    #[arg(long)]
    k: Option<usize>,
    /// Alpha; 0, 0.5 and 2 when omitted.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    count: usize,
    /// Samples for the matrix-derivative suites, which are much slower.
    #[arg(long, default_value_t = 100)]
    spectral_count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write one CSV row per suite.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    /// gamma_k, gamma_tilde_k, gamma_prime_k or gamma_tilde_prime_k.
    #[arg(long, default_value = "gamma_tilde_prime_k")]
    cone: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    config: PathBuf,
    /// Field output, overriding the config.
    #[arg(long)]
    field: Option<PathBuf>,
    /// Trace CSV output, overriding the config.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    /// A field file, or a config file (`.cfg`) to solve first.
    input: PathBuf,
    /// Comma-separated β sweep.
    #[arg(long, value_delimiter = ',')]
    beta: Option<Vec<f64>>,
    #[arg(long)]
    p_beta: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    a_const: Option<f64>,
    /// Radius for the interior ratio and the cutoff; the inscribed radius by default.
    #[arg(long)]
    radius: Option<f64>,
    /// Also solve on the refined grid to find the stable β (config input only).
    #[arg(long)]
    refine: bool,
    /// Report CSV; the config's report path, else standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(required = true)]
    configs: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failure with its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Argument(_)
            | Error::Config { .. }
            | Error::Syntax { .. }
            | Error::UnknownIdentifier { .. }
            | Error::FieldFormat(_)
            | Error::Io(_) => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult = std::result::Result<(), Failure>;

fn write_output(path: Option<&Path>, text: &str) -> CliResult {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
            }
            fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(Error::from)?;
        }
    }
    Ok(())
}

fn verify(args: VerifyArgs) -> CliResult {
    let configs: Vec<SumHessianParams> = match (args.n, args.k, args.alpha) {
        (Some(n), Some(k), Some(a)) => vec![SumHessianParams::new(n, k, a)?],
        (n, k, a) => {
            let all = sweep();
            let picked: Vec<_> = all
                .into_iter()
                .filter(|p| n.is_none_or(|n| p.n == n) && k.is_none_or(|k| p.k == k))
                .map(|p| SumHessianParams::new(p.n, p.k, a.unwrap_or(p.alpha)))
                .collect::<Result<_, _>>()?;
            let mut dedup: Vec<SumHessianParams> = Vec::new();
            for p in picked {
                if !dedup.contains(&p) {
                    dedup.push(p);
                }
            }
            if dedup.is_empty() {
                return Err(Error::Argument("no (n, k) in the sweep matches the flags".into()).into());
            }
            dedup
        }
    };
    if args.count == 0 {
        return Err(Error::Argument("--count must be at least 1".into()).into());
    }
    let tol = Tolerances::default();
    let mut csv = String::from("suite,n,k,alpha,checks,failures,worst,constant,passed\n");
    let mut failed = 0usize;
    let mut total = 0usize;
    for p in &configs {
        let mut outcomes = identity_suites(p, args.count, args.seed, &tol)?;
        outcomes.extend(inequality_suites(p, args.count, args.seed, &tol)?);
        if args.spectral_count > 0 {
            outcomes.extend(spectral_suites(p, args.spectral_count, args.seed, &tol)?);
        }
        for o in outcomes {
            total += 1;
            if !o.passed() {
                failed += 1;
            }
            println!("{}", o.line());
            csv.push_str(&format!(
                "{},{},{},{:?},{},{},{:?},{},{}\n",
                o.name,
                p.n,
                p.k,
                p.alpha,
                o.checked,
                o.failures,
                o.worst,
                o.constant.map_or_else(|| "NA".to_string(), |c| format!("{c:?}")),
                o.passed()
            ));
        }
    }
    if let Some(out) = &args.out {
        write_output(Some(out), &csv)?;
    }
    eprintln!("{} of {total} suites passed", total - failed);
    if failed > 0 {
        return Err(Failure {
            code: 1,
            message: format!("{failed} suite(s) failed"),
        });
    }
    Ok(())
}

fn sample(args: SampleArgs) -> CliResult {
    let cone: ConeId = args.cone.parse()?;
    let params = SumHessianParams::new(args.n, args.k, args.alpha)?;
    let batch = sample_cone(cone, &params, args.count, args.seed)?;
    write_output(args.out.as_deref(), &batch.to_csv())
}

fn run_solve(cfg: &RunConfig, refined: bool) -> Result<SolveResult, Failure> {
    let inst = if refined { cfg.refined_instance()? } else { cfg.instance()? };
    let label = if refined { " (refined)" } else { "" };
    match newton_solve(&inst, &cfg.solver) {
        Ok(r) => {
            eprintln!(
                "{}{label}: converged in {} iterations, residual {:.3e}",
                cfg.id, r.iterations, r.residual
            );
            Ok(r)
        }
        Err(e) => {
            if let Error::NonConvergence { trace, .. } = &e {
                for (res, step) in trace {
                    eprintln!("  residual {res:.3e} step {step}");
                }
            }
            eprintln!("{}{label}: {e}", cfg.id);
            Err(e.into())
        }
    }
}

fn solve(args: SolveArgs) -> CliResult {
    let cfg = RunConfig::load(&args.config)?;
    let r = run_solve(&cfg, false)?;
    let field_path = args.field.or(cfg.outputs.field.clone());
    let trace_path = args.trace.or(cfg.outputs.trace.clone());
    if field_path.is_none() && trace_path.is_none() {
        return write_output(None, &r.field.to_field_text()?);
    }
    if let Some(p) = field_path {
        write_output(Some(&p), &r.field.to_field_text()?)?;
    }
    if let Some(p) = trace_path {
        write_output(Some(&p), &trace_csv(&r))?;
    }
    Ok(())
}

fn is_config(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "cfg")
}

fn config_report(cfg: &RunConfig, params: &EstimateParams, refine: bool) -> Result<EstimateReport, Failure> {
    let coarse = run_solve(cfg, false)?;
    if refine {
        let fine = run_solve(cfg, true)?;
        Ok(EstimateReport::compute_refined(&cfg.id, &coarse.field, &fine.field, params)?)
    } else {
        Ok(EstimateReport::compute(&cfg.id, &coarse.field, params)?)
    }
}

fn estimate(args: EstimateArgs) -> CliResult {
    let overrides = |base: EstimateParams| EstimateParams {
        betas: args.beta.clone().unwrap_or(base.betas),
        p: PParams {
            beta: args.p_beta.unwrap_or(base.p.beta),
            a: args.a.unwrap_or(base.p.a),
            a_const: args.a_const.unwrap_or(base.p.a_const),
        },
        radius: args.radius.or(base.radius),
    };
    let (report, out) = if is_config(&args.input) {
        let cfg = RunConfig::load(&args.input)?;
        let params = overrides(cfg.estimates.clone());
        let r = config_report(&cfg, &params, args.refine || cfg.refine)?;
        (r, args.out.clone().or(cfg.outputs.report.clone()))
    } else {
        if args.refine {
            return Err(Error::Argument("--refine needs a config file input".into()).into());
        }
        let text = fs::read_to_string(&args.input).map_err(|e| Error::Io(format!("{}: {e}", args.input.display())))?;
        let field = ScalarField::from_field_text(&text)?;
        let id = args.input.file_stem().map_or("field".into(), |s| s.to_string_lossy().into_owned());
        let r = EstimateReport::compute(&id, &field, &overrides(EstimateParams::default()))?;
        (r, args.out.clone())
    };
    write_output(out.as_deref(), &ReportTable::single(report).to_csv())
}

fn report(args: ReportArgs) -> CliResult {
    let mut rows = Vec::new();
    for path in &args.configs {
        let cfg = RunConfig::load(path)?;
        rows.push(config_report(&cfg, &cfg.estimates, cfg.refine)?);
    }
    let table = if rows.len() >= 2 { family_report(rows)? } else { ReportTable { rows } };
    write_output(args.out.as_deref(), &table.to_csv())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify(a) => verify(a),
        Command::Sample(a) => sample(a),
        Command::Solve(a) => solve(a),
        Command::Estimate(a) => estimate(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
