//! Configuration, dataset ingestion and subcommand execution for `bayesdp`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use bayesdp_core::adversary::{threshold_experiment, ExperimentConfig as AttackConfig, ExperimentResult};
use bayesdp_core::calculus::{
    certificate, distinguishability_threshold, dp_guarantee, lift_iid, robustness_bound,
    CertificateOutcome,
};
use bayesdp_core::families::{BayesNet, FamilyPrior, FiniteFamily, NormalPrior, Tables};
use bayesdp_core::mechanism::{open_session, Query};
use bayesdp_core::metrics::{Dataset, Observation};
use bayesdp_core::verify::{random_single_pairs, verify_suite, CheckReport};

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_VERIFICATION: i32 = 2;

/// Random pairs added to any user-supplied pair by `verify`.
const VERIFY_PAIRS: usize = 200;
const CURVE_POINTS: usize = 21;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error(transparent)]
    Core(#[from] bayesdp_core::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyName {
    Exponential,
    Laplace,
    BetaBinomial,
    Normal,
    BayesNet,
    Finite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DataFormat {
    Csv,
    Json,
}

impl DataFormat {
    /// `.json` files are JSON; everything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => DataFormat::Json,
            _ => DataFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Parser)]
#[command(name = "bayesdp", version, about = "Posterior sampling privacy and robustness toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub options: Options,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Certificate, privacy guarantee and robustness curve.
    Report,
    /// Answer queries from a JSON file by posterior sampling.
    Respond,
    /// Run the distinguishing attack on two datasets.
    Attack,
    /// Run every numerical check for the family.
    Verify,
}

#[derive(Debug, Clone, PartialEq, clap::Args)]
pub struct Options {
    #[arg(long, global = true, value_enum)]
    pub family: Option<FamilyName>,
    /// Prior parameters as key=value (lambda, mu, alpha, n, eps, file).
    #[arg(long = "prior-params", global = true, num_args = 1.., value_delimiter = ',')]
    pub prior_params: Vec<String>,
    /// Must name the family's own metric when given.
    #[arg(long, global = true)]
    pub metric: Option<String>,
    #[arg(long = "data", global = true)]
    pub data: Vec<PathBuf>,
    /// Overrides format detection by file extension.
    #[arg(long = "data-format", global = true, value_enum)]
    pub data_format: Option<DataFormat>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Number of sampled answers available to the adversary.
    #[arg(long, global = true)]
    pub n: Option<u64>,
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    #[arg(long = "partition-size", global = true)]
    pub partition_size: Option<usize>,
    /// Lift the certificate to this many i.i.d. observations.
    #[arg(long = "iid-n", global = true)]
    pub iid_n: Option<u64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Also write the `report` robustness curve here as CSV.
    #[arg(long = "curve-out", global = true)]
    pub curve_out: Option<PathBuf>,
    /// JSON array of queries for `respond`.
    #[arg(long, global = true)]
    pub queries: Option<PathBuf>,
    /// Include sampled parameters in the `respond` transcript.
    #[arg(long = "include-theta", global = true)]
    pub include_theta: bool,
    /// Prior draws for the concentration check in `verify`.
    #[arg(long = "prior-samples", global = true, default_value_t = 100_000)]
    pub prior_samples: u64,
    /// Put the normal family's exponential prior on the variance instead of
    /// the precision.
    #[arg(long = "paper-normal-variant", global = true)]
    pub paper_normal_variant: bool,
}

/// A validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub family: FamilyPrior,
    pub datasets: Vec<Dataset>,
    pub seed: u64,
    pub n: u64,
    pub delta: f64,
    pub trials: u64,
    pub partition_size: Option<usize>,
    pub iid_n: Option<u64>,
    pub queries: Vec<Query>,
    pub include_theta: bool,
    pub prior_samples: u64,
}

/// The artifact a run produced and the exit status it implies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutput {
    pub artifact: String,
    pub exit_code: i32,
}

/// Parse a dataset: CSV holds one scalar per line; JSON holds an array of
/// categorical observations (arrays of symbols).
pub fn parse_dataset(path: &Path, format: DataFormat) -> CliResult<Dataset> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })?;
    let parse_err = |line: u64, message: String| CliError::Parse {
        path: path.to_owned(),
        line,
        message,
    };
    match format {
        DataFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(false)
                .flexible(true)
                .from_reader(text.as_bytes());
            let mut values = Vec::new();
            for record in reader.records() {
                let record = record.map_err(|e| {
                    let line = e.position().map_or(0, |p| p.line());
                    parse_err(line, e.to_string())
                })?;
                let line = record.position().map_or(0, |p| p.line());
                let fields: Vec<&str> = record.iter().map(str::trim).collect();
                match fields.as_slice() {
                    [] | [""] => continue,
                    [field] => {
                        let v: f64 = field
                            .parse()
                            .map_err(|_| parse_err(line, format!("{field:?} is not a number")))?;
                        if !v.is_finite() {
                            return Err(parse_err(line, format!("{field:?} is not finite")));
                        }
                        values.push(v);
                    }
                    _ => {
                        return Err(parse_err(
                            line,
                            format!("expected one value per line, found {}", fields.len()),
                        ))
                    }
                }
            }
            Ok(Dataset::scalars(values)?)
        }
        DataFormat::Json => {
            let value: Value = serde_json::from_str(&text)
                .map_err(|e| parse_err(e.line() as u64, e.to_string()))?;
            let Value::Array(items) = value else {
                return Err(parse_err(1, "expected a JSON array of observations".into()));
            };
            let observations = items
                .into_iter()
                .enumerate()
                .map(|(i, item)| {
                    serde_json::from_value::<Vec<u32>>(item)
                        .map(Observation::Categorical)
                        .map_err(|_| {
                            CliError::Config(format!(
                                "{}: element {i} is not an array of symbols",
                                path.display()
                            ))
                        })
                })
                .collect::<CliResult<Vec<_>>>()?;
            Ok(Dataset::new(observations)?)
        }
    }
}

/// Structure of a Bayesian network file; either `pseudo_counts` or a
/// symmetric `concentration` gives the prior.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetFile {
    alphabets: Vec<usize>,
    parents: Vec<Vec<usize>>,
    #[serde(default)]
    pseudo_counts: Option<Tables>,
    #[serde(default)]
    concentration: Option<f64>,
    #[serde(default)]
    epsilon_min: Option<f64>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_owned(),
        line: e.line() as u64,
        message: e.to_string(),
    })
}

fn parse_prior_params(raw: &[String]) -> CliResult<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for item in raw {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("prior parameter {item:?} is not key=value")))?;
        if out.insert(k.trim().to_owned(), v.trim().to_owned()).is_some() {
            return Err(CliError::Config(format!("prior parameter {k:?} given twice")));
        }
    }
    Ok(out)
}

struct Params(BTreeMap<String, String>);

impl Params {
    fn number(&mut self, key: &str, default: Option<f64>) -> CliResult<f64> {
        match self.0.remove(key) {
            Some(v) => v
                .parse()
                .map_err(|_| CliError::Config(format!("prior parameter {key}={v} is not a number"))),
            None => default.ok_or_else(|| CliError::Config(format!("missing prior parameter {key}"))),
        }
    }

    fn optional_number(&mut self, key: &str) -> CliResult<Option<f64>> {
        self.0.contains_key(key).then(|| self.number(key, None)).transpose()
    }

    fn path(&mut self, key: &str) -> CliResult<PathBuf> {
        self.0
            .remove(key)
            .map(PathBuf::from)
            .ok_or_else(|| CliError::Config(format!("missing prior parameter {key}")))
    }

    fn finish(self) -> CliResult<()> {
        match self.0.keys().next() {
            Some(k) => Err(CliError::Config(format!("unknown prior parameter {k:?} for this family"))),
            None => Ok(()),
        }
    }
}

/// Build the family and prior described by the options.
pub fn build_family(options: &Options) -> CliResult<FamilyPrior> {
    let name = options
        .family
        .ok_or_else(|| CliError::Config("--family is required".into()))?;
    let mut p = Params(parse_prior_params(&options.prior_params)?);
    if options.paper_normal_variant && name != FamilyName::Normal {
        return Err(CliError::Config("--paper-normal-variant applies only to --family normal".into()));
    }
    let fp = match name {
        FamilyName::Exponential => FamilyPrior::exponential(p.number("lambda", Some(1.0))?)?,
        FamilyName::Laplace => {
            let mu = p.number("mu", Some(0.0))?;
            FamilyPrior::laplace(mu, p.number("lambda", Some(1.0))?)?
        }
        FamilyName::BetaBinomial => {
            let n = p.number("n", None)?;
            if n.fract() != 0.0 || !(1.0..=f64::from(u32::MAX)).contains(&n) {
                return Err(CliError::Config(format!("n = {n} is not a positive integer")));
            }
            FamilyPrior::beta_binomial(n as u32, p.number("alpha", None)?)?
        }
        FamilyName::Normal => {
            let mu = p.number("mu", Some(0.0))?;
            let prior_on = if options.paper_normal_variant {
                NormalPrior::Variance
            } else {
                NormalPrior::Precision
            };
            FamilyPrior::normal(mu, p.number("lambda", Some(1.0))?, prior_on)?
        }
        FamilyName::BayesNet => {
            let file: NetFile = read_json(&p.path("file")?)?;
            let eps = p
                .optional_number("eps")?
                .or(file.epsilon_min)
                .ok_or_else(|| CliError::Config("missing epsilon_min (file) or eps (prior parameter)".into()))?;
            let alpha = p.optional_number("alpha")?.or(file.concentration);
            let net = match (file.pseudo_counts, alpha) {
                (Some(_), Some(_)) => {
                    return Err(CliError::Config(
                        "give either pseudo_counts or a concentration, not both".into(),
                    ))
                }
                (Some(pseudo_counts), None) => {
                    let net = BayesNet {
                        alphabets: file.alphabets,
                        parents: file.parents,
                        pseudo_counts,
                        epsilon_min: eps,
                    };
                    net.validate()?;
                    net
                }
                (None, alpha) => {
                    BayesNet::with_uniform_prior(file.alphabets, file.parents, alpha.unwrap_or(1.0), eps)?
                }
            };
            FamilyPrior::DiscreteBayesNet(net)
        }
        FamilyName::Finite => {
            let f: FiniteFamily = read_json(&p.path("file")?)?;
            f.validate()?;
            FamilyPrior::FiniteTheta(f)
        }
    };
    p.finish()?;
    if let Some(metric) = &options.metric {
        let canonical = fp.canonical_metric();
        let normalized = metric.replace('-', "_");
        if normalized != canonical.name() {
            return Err(CliError::Config(format!(
                "metric {metric} is not supported for {}; its certificate holds under {}",
                fp.name(),
                canonical.name()
            )));
        }
    }
    Ok(fp)
}

impl ExperimentConfig {
    /// Validate everything the subcommand needs before any computation.
    pub fn from_cli(cli: &Cli) -> CliResult<Self> {
        let o = &cli.options;
        let family = build_family(o)?;
        let datasets = o
            .data
            .iter()
            .map(|path| {
                let format = o.data_format.unwrap_or_else(|| DataFormat::from_path(path));
                let x = parse_dataset(path, format)?;
                family.check_dataset(&x)?;
                Ok(x)
            })
            .collect::<CliResult<Vec<_>>>()?;
        let delta = o.delta.unwrap_or(0.05);
        if !(delta > 0.0 && delta < 1.0) {
            return Err(CliError::Config(format!("--delta must lie in (0, 1), got {delta}")));
        }
        let n = o.n.unwrap_or(500);
        let trials = o.trials.unwrap_or(200);
        if n == 0 || trials == 0 {
            return Err(CliError::Config("--n and --trials must be positive".into()));
        }
        if o.iid_n == Some(0) {
            return Err(CliError::Config("--iid-n must be positive".into()));
        }
        let queries = match cli.command {
            Command::Respond => {
                let path = o
                    .queries
                    .as_ref()
                    .ok_or_else(|| CliError::Config("respond needs --queries".into()))?;
                read_json(path)?
            }
            _ => Vec::new(),
        };
        match cli.command {
            Command::Respond if datasets.len() != 1 => {
                return Err(CliError::Config("respond needs exactly one --data".into()))
            }
            Command::Attack if datasets.is_empty() || datasets.len() > 2 => {
                return Err(CliError::Config("attack needs one or two --data".into()))
            }
            Command::Verify if datasets.len() > 2 => {
                return Err(CliError::Config("verify takes at most two --data".into()))
            }
            _ => {}
        }
        if datasets.len() == 2 && datasets[0].len() != datasets[1].len() {
            return Err(CliError::Config("the two datasets differ in size".into()));
        }
        Ok(Self {
            command: cli.command,
            family,
            datasets,
            seed: o.seed,
            n,
            delta,
            trials,
            partition_size: o.partition_size,
            iid_n: o.iid_n,
            queries,
            include_theta: o.include_theta,
            prior_samples: o.prior_samples,
        })
    }
}

/// Execute a validated configuration.
pub fn run(config: &ExperimentConfig) -> CliResult<RunOutput> {
    match config.command {
        Command::Report => report(config),
        Command::Respond => respond(config),
        Command::Attack => attack(config),
        Command::Verify => verify(config),
    }
}

fn to_json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifacts serialize");
    s.push('\n');
    s
}

fn report(config: &ExperimentConfig) -> CliResult<RunOutput> {
    let fp = &config.family;
    let outcome = certificate(fp)?;
    let mut doc = json!({
        "family": fp.name(),
        "certificate": outcome,
    });
    if let CertificateOutcome::Valid(base) = outcome {
        let cert = match config.iid_n {
            Some(n) => {
                let lifted = lift_iid(&base, n, None)?;
                doc["lifted_certificate"] = json!(lifted);
                lifted
            }
            None => base,
        };
        doc["dp_guarantee"] = json!(dp_guarantee(&cert));
        doc["distinguishability"] = json!(distinguishability_threshold(&cert, config.n, config.delta)?);
        let curve = (0..CURVE_POINTS)
            .map(|i| {
                let rho = i as f64 / (CURVE_POINTS - 1) as f64;
                Ok(json!({ "rho": rho, "kl_bound": robustness_bound(&cert, rho)? }))
            })
            .collect::<CliResult<Vec<_>>>()?;
        doc["robustness_curve"] = Value::Array(curve);
    }
    Ok(RunOutput {
        artifact: to_json(&doc),
        exit_code: EXIT_SUCCESS,
    })
}

/// The robustness curve of a `report` document as `rho,kl_bound` CSV.
pub fn curve_csv(report: &str) -> CliResult<String> {
    let doc: Value = serde_json::from_str(report).map_err(|e| CliError::Config(e.to_string()))?;
    let mut out = String::from("rho,kl_bound\n");
    for point in doc["robustness_curve"].as_array().into_iter().flatten() {
        let num = |key: &str| point[key].as_f64().unwrap_or(f64::NAN);
        out.push_str(&format!("{},{}\n", num("rho"), num("kl_bound")));
    }
    Ok(out)
}

fn respond(config: &ExperimentConfig) -> CliResult<RunOutput> {
    let mut session = open_session(&config.family, &config.datasets[0], config.seed)?;
    for q in &config.queries {
        session.answer(q)?;
    }
    Ok(RunOutput {
        artifact: session.transcript_jsonl(config.include_theta),
        exit_code: EXIT_SUCCESS,
    })
}

fn attack(config: &ExperimentConfig) -> CliResult<RunOutput> {
    let x = &config.datasets[0];
    let y = config.datasets.get(1).unwrap_or(x);
    let result: ExperimentResult = threshold_experiment(
        &config.family,
        x,
        y,
        &AttackConfig {
            n: config.n,
            delta: config.delta,
            trials: config.trials,
            partition_size: config.partition_size,
            seed: config.seed,
        },
    )?;
    Ok(RunOutput {
        artifact: format!("{}\n{}\n", ExperimentResult::CSV_HEADER, result.csv_row()),
        exit_code: EXIT_SUCCESS,
    })
}

fn verify(config: &ExperimentConfig) -> CliResult<RunOutput> {
    let fp = &config.family;
    let mut pairs = random_single_pairs(fp, VERIFY_PAIRS, config.seed)?;
    if let [x, y] = config.datasets.as_slice() {
        pairs.push((x.clone(), y.clone()));
    }
    // User datasets may hold several observations; the per-observation
    // certificate then no longer applies.
    let reports: Vec<CheckReport> = if pairs.iter().all(|(x, _)| x.len() == 1) {
        verify_suite(fp, &pairs, config.prior_samples, config.seed)?
    } else {
        let mut reports = verify_suite(fp, &pairs[..VERIFY_PAIRS], config.prior_samples, config.seed)?;
        let (x, y) = pairs.last().expect("user pair");
        reports.extend(verify_user_pair(fp, x, y)?);
        reports
    };
    let exit_code = if reports.iter().all(|r| r.passed) {
        EXIT_SUCCESS
    } else {
        EXIT_VERIFICATION
    };
    Ok(RunOutput {
        artifact: to_json(&reports),
        exit_code,
    })
}

fn verify_user_pair(fp: &FamilyPrior, x: &Dataset, y: &Dataset) -> CliResult<Vec<CheckReport>> {
    let CertificateOutcome::Valid(base) = certificate(fp)? else {
        return Ok(Vec::new());
    };
    let cert = lift_iid(&base, x.len() as u64, None)?;
    let mut report = bayesdp_core::verify::check_theorem1(fp, &cert, &[(x.clone(), y.clone())])?;
    report.name = "theorem1_data".into();
    Ok(vec![report])
}

/// Parse, validate, run, and write the artifact; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_SUCCESS };
        }
    };
    let result = ExperimentConfig::from_cli(&cli).and_then(|config| run(&config));
    match result {
        Ok(output) => match write_outputs(&cli, &output) {
            Ok(()) => output.exit_code,
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_CONFIG
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

fn write_outputs(cli: &Cli, output: &RunOutput) -> CliResult<()> {
    if let (Command::Report, Some(path)) = (cli.command, &cli.options.curve_out) {
        fs::write(path, curve_csv(&output.artifact)?).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
    }
    write_artifact(cli.options.out.as_deref(), &output.artifact)
}

fn write_artifact(out: Option<&Path>, artifact: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, artifact).map_err(|source| CliError::Io {
            path: path.to_owned(),
            source,
        }),
        None => {
            print!("{artifact}");
            Ok(())
        }
    }
}
