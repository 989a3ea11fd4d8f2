use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;
use skewlab::construct::{self, BaseSet, SphereConstruction};
use skewlab::fourier::{self, AnalysisConfig, IncrementMode, TwoDFunction};
use skewlab::search::{self, SearchConfig, SearchMode};
use skewlab::verify::{self, CountMethod};
use skewlab::{setfile, Ambient, AmbientKind, Error, GridSet};

mod report;

use report::Format;

#[derive(Parser)]
#[command(name = "skewlab", version, about = "Skew-corner-free sets in grids and tori")]
struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "SKEWLAB_THREADS")]
    threads: Option<usize>,
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a skew-corner-free set.
    #[command(subcommand)]
    Construct(ConstructCmd),
    /// Check freeness of a set file.
    Verify {
        #[arg(long = "in")]
        input: PathBuf,
        /// Also check the transpose.
        #[arg(long)]
        bi: bool,
    },
    /// Count skew-corner tuples.
    Count {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Fft)]
        method: Method,
        /// Shorthand for `--format json`.
        #[arg(long)]
        json: bool,
    },
    /// Exact branch-and-bound search for a largest free set.
    Search {
        #[arg(long, value_enum)]
        ambient: AmbientArg,
        #[arg(long)]
        size: u32,
        #[arg(long)]
        bi: bool,
        #[arg(long, default_value_t = search::DEFAULT_BUDGET)]
        budget: u64,
        /// Where to write the witness.
        #[arg(long)]
        set_out: Option<PathBuf>,
    },
    /// Run one analytic check on a set file.
    Diagnose {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        check: CheckArg,
        #[command(flatten)]
        constants: Constants,
    },
    /// One density-increment step.
    Increment {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::BestEffort)]
        mode: ModeArg,
        #[command(flatten)]
        constants: Constants,
        /// Shorthand for `--format json`.
        #[arg(long)]
        json: bool,
        /// Where to write the extracted set.
        #[arg(long)]
        set_out: Option<PathBuf>,
    },
    /// Random experiments.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
    /// Sphere construction sizes for n = 2^e over a range of exponents.
    Growth {
        /// Inclusive range `a..b`.
        #[arg(long, value_parser = parse_range)]
        exps: (u32, u32),
        #[arg(long, default_value_t = 1)]
        step: u32,
    },
}

#[derive(Subcommand)]
enum ConstructCmd {
    Sphere {
        #[arg(long)]
        n: u32,
        /// Bi-skew-corner-free variant.
        #[arg(long)]
        bi: bool,
        #[arg(long)]
        set_out: Option<PathBuf>,
    },
    Product {
        #[arg(long)]
        n: u32,
        /// Base set on a torus, as a skewset file.
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        set_out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ExperimentCmd {
    ProductSet {
        #[arg(long)]
        beta: f64,
        #[arg(long = "N")]
        modulus: u32,
        #[arg(long, default_value_t = 100)]
        trials: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct Constants {
    #[arg(long = "C", default_value_t = 64.0)]
    c: f64,
    #[arg(long = "cprime", default_value_t = 0.05)]
    c_prime: f64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

impl Constants {
    fn config(&self) -> AnalysisConfig {
        AnalysisConfig {
            c: self.c,
            c_prime: self.c_prime,
            tolerance: self.tol,
            ..AnalysisConfig::default()
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Naive,
    Fft,
}

#[derive(Clone, Copy, ValueEnum)]
enum AmbientArg {
    Grid,
    Torus,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckArg {
    Gvn,
    Dichotomy,
    Parseval,
    Lambda,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Guaranteed,
    BestEffort,
}

fn parse_range(s: &str) -> Result<(u32, u32), String> {
    let (a, b) = s.split_once("..").ok_or("expected a..b")?;
    let a: u32 = a.trim().parse().map_err(|_| format!("bad start `{a}`"))?;
    let b: u32 = b.trim().parse().map_err(|_| format!("bad end `{b}`"))?;
    if a > b || b > 31 {
        return Err(format!("need a ≤ b ≤ 31, got {a}..{b}"));
    }
    Ok((a, b))
}

#[derive(Serialize)]
struct ConstructReport {
    kind: &'static str,
    n: u32,
    size: usize,
    density: f64,
    fitted_c: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    params: Option<construct::SphereParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    guaranteed: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    base_size: Option<usize>,
    file: String,
}

#[derive(Serialize)]
struct VerifyReport {
    free: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    bi_free: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<[(i64, i64); 3]>,
}

#[derive(Serialize)]
struct CountReport {
    method: &'static str,
    modulus: u32,
    trivial: u64,
    nontrivial: u64,
    total: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
}

#[derive(Serialize)]
struct SearchReport {
    ambient: &'static str,
    size: u32,
    mode: SearchMode,
    best_size: usize,
    optimal: bool,
    nodes_explored: u64,
    budget_exhausted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    file: Option<String>,
}

#[derive(Serialize)]
struct LambdaReport {
    modulus: u32,
    count: u64,
    lambda: f64,
    lambda_count: f64,
    lambda_direct: f64,
    lambda_fourier: f64,
}

fn default_path(path: &Option<PathBuf>, fallback: String) -> PathBuf {
    path.clone().unwrap_or_else(|| PathBuf::from(fallback))
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn sphere_report(c: &SphereConstruction, n: u32, kind: &'static str, file: &Path) -> ConstructReport {
    ConstructReport {
        kind,
        n,
        size: c.set.len(),
        density: c.set.density(),
        fitted_c: construct::fitted_c(n, c.set.len() as u64),
        params: Some(c.params),
        guaranteed: Some(c.guaranteed),
        base_size: None,
        file: display(file),
    }
}

fn run_construct(cmd: ConstructCmd) -> Result<Value, Error> {
    let report = match cmd {
        ConstructCmd::Sphere { n, bi, set_out } => {
            let (c, kind) = if bi {
                (construct::bi_sphere_construction(n)?, "bi-sphere")
            } else {
                (construct::sphere_construction(n)?, "sphere")
            };
            let path = default_path(&set_out, format!("{kind}-{n}.skewset"));
            setfile::write(&path, &c.set)?;
            sphere_report(&c, n, kind, &path)
        }
        ConstructCmd::Product { n, base, set_out } => {
            let base = BaseSet::new(setfile::read(&base)?)?;
            let set = construct::product_construction(&base, n)?;
            let path = default_path(&set_out, format!("product-{n}.skewset"));
            setfile::write(&path, &set)?;
            ConstructReport {
                kind: "product",
                n,
                size: set.len(),
                density: set.density(),
                fitted_c: construct::fitted_c(n, set.len() as u64),
                params: None,
                guaranteed: None,
                base_size: Some(base.len()),
                file: display(&path),
            }
        }
    };
    to_value(&report)
}

fn run_count(a: &GridSet, method: Method) -> Result<Value, Error> {
    let (m, name) = match method {
        Method::Naive => (CountMethod::Naive, "naive"),
        Method::Fft => (CountMethod::Fft, "fft"),
    };
    let c = verify::count_skew_corners(a, m)?;
    let lambda = (a.ambient().kind == AmbientKind::Torus).then(|| c.total() as f64 / f64::from(a.size()).powi(4));
    to_value(&CountReport {
        method: name,
        modulus: a.size(),
        trivial: c.trivial,
        nontrivial: c.nontrivial,
        total: c.total(),
        lambda,
    })
}

fn run_search(
    ambient: AmbientArg,
    size: u32,
    bi: bool,
    budget: u64,
    set_out: Option<PathBuf>,
    sequential: bool,
) -> Result<Value, Error> {
    let (amb, name) = match ambient {
        AmbientArg::Grid => (Ambient::grid(size)?, "grid"),
        AmbientArg::Torus => (Ambient::torus(size)?, "torus"),
    };
    let mode = if bi { SearchMode::BiSkew } else { SearchMode::Skew };
    let mut config = SearchConfig {
        budget,
        ..SearchConfig::default()
    }
    .mode(mode);
    if sequential {
        config = config.sequential();
    }
    let r = search::max_skew_corner_free(amb, &config)?;
    if let Some(path) = &set_out {
        setfile::write(path, &r.witness)?;
    }
    to_value(&SearchReport {
        ambient: name,
        size,
        mode,
        best_size: r.best_size,
        optimal: r.optimal,
        nodes_explored: r.nodes_explored,
        budget_exhausted: r.budget_exhausted,
        file: set_out.as_deref().map(display),
    })
}

fn run_diagnose(a: &GridSet, check: CheckArg, config: &AnalysisConfig) -> Result<Value, Error> {
    config.validate()?;
    match check {
        CheckArg::Gvn => to_value(&fourier::check_gvn(a, config)?),
        CheckArg::Dichotomy => to_value(&fourier::dichotomy_report(a, config)?),
        CheckArg::Parseval => to_value(&fourier::parseval_bound(a, config)?),
        CheckArg::Lambda => {
            let torus = a.to_torus();
            let f = TwoDFunction::indicator(&torus)?;
            let lambda = fourier::lambda_form_with(&f, &f, &f, config.tolerance)?;
            let count = verify::count_skew_corners(&torus, CountMethod::Fft)?.total();
            let n4 = f64::from(torus.size()).powi(4);
            let lambda_count = count as f64 / n4;
            if (lambda - lambda_count).abs() * n4 > 1e-6 * (count as f64).max(1.0) {
                return Err(Error::Inconsistent(format!(
                    "N^4 lambda = {} but the count is {count}",
                    lambda * n4
                )));
            }
            to_value(&LambdaReport {
                modulus: torus.size(),
                count,
                lambda,
                lambda_count,
                lambda_direct: fourier::lambda_direct(&f, &f, &f)?,
                lambda_fourier: fourier::lambda_fourier(&f, &f, &f)?,
            })
        }
    }
}

fn run_increment(a: &GridSet, mode: ModeArg, config: &AnalysisConfig, set_out: Option<PathBuf>) -> Result<Value, Error> {
    let mode = match mode {
        ModeArg::Guaranteed => IncrementMode::Guaranteed,
        ModeArg::BestEffort => IncrementMode::BestEffort,
    };
    let out = fourier::increment_step(a, config, mode)?;
    if let (Some(path), Some(set)) = (&set_out, &out.extracted) {
        setfile::write(path, set)?;
    }
    to_value(&out)
}

fn run_growth(exps: (u32, u32), step: u32) -> Result<Value, Error> {
    if step == 0 {
        return Err(Error::Parameter("step must be positive".into()));
    }
    let ns: Vec<u32> = (exps.0..=exps.1).step_by(step as usize).map(|e| 1u32 << e).collect();
    to_value(&construct::growth_table(&ns)?)
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, Error> {
    serde_json::to_value(v).map_err(|e| Error::Inconsistent(e.to_string()))
}

fn dispatch(cli: Cli) -> Result<(Value, Format), Error> {
    let mut format = cli.format;
    let sequential = rayon::current_num_threads() == 1;
    let value = match cli.command {
        Command::Construct(cmd) => run_construct(cmd)?,
        Command::Verify { input, bi } => {
            let a = setfile::read(input)?;
            let witness = verify::find_skew_corner(&a);
            to_value(&VerifyReport {
                free: witness.is_none(),
                bi_free: bi.then(|| verify::is_bi_skew_corner_free(&a)),
                witness: witness.map(|w| w.points(a.ambient())),
            })?
        }
        Command::Count { input, method, json } => {
            if json {
                format = Format::Json;
            }
            run_count(&setfile::read(input)?, method)?
        }
        Command::Search {
            ambient,
            size,
            bi,
            budget,
            set_out,
        } => run_search(ambient, size, bi, budget, set_out, sequential)?,
        Command::Diagnose {
            input,
            check,
            constants,
        } => run_diagnose(&setfile::read(input)?, check, &constants.config())?,
        Command::Increment {
            input,
            mode,
            constants,
            json,
            set_out,
        } => {
            if json {
                format = Format::Json;
            }
            run_increment(&setfile::read(input)?, mode, &constants.config(), set_out)?
        }
        Command::Experiment(ExperimentCmd::ProductSet {
            beta,
            modulus,
            trials,
            seed,
        }) => to_value(&fourier::product_set_experiment(beta, modulus, trials, seed)?)?,
        Command::Growth { exps, step } => run_growth(exps, step)?,
    };
    Ok((value, format))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Falsification { .. } => 3,
        Error::Coordinate { .. }
        | Error::Duplicate { .. }
        | Error::Parameter(_)
        | Error::AmbientMismatch { .. }
        | Error::Capability(_)
        | Error::Parse { .. }
        | Error::Io(_) => 2,
        Error::Precision { .. } | Error::Inconsistent(_) => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(k) = cli.threads {
        if k == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let out = cli.out.clone();
    let (value, format) = match dispatch(cli) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let text = match report::render(&value, format) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let written = match out {
        Some(path) => std::fs::write(&path, text),
        None => std::io::stdout().write_all(text.as_bytes()),
    };
    match written {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
