//! Command-line front end: file ingestion, query configuration, and
//! machine-readable reports. Exit codes: 0 success, 1 computation error,
//! 2 usage or input error.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mediation_kit::distribution::{Assignment, ContingencyTable, DiscreteJointDistribution};
use mediation_kit::effects::{self, EffectEstimate, EffectQuery, Weighting};
use mediation_kit::equivalence::{
    self, EquivalenceQuery, EquivalenceVerdict, IndependenceOracle, Theorem1Outcome,
    Theorem2Outcome, Theorem3Outcome,
};
use mediation_kit::gaussian::CorrelationMatrix;
use mediation_kit::graph::parse_graph;
use mediation_kit::io::{
    parse_correlation_csv, parse_counts_csv, parse_distribution_csv, parse_key_values,
};
use mediation_kit::simulation::{
    reproduce_table4, run_scenario, OutcomeSetting, ScenarioConfig, SimulationResult,
    TreatmentSetting,
};
use mediation_kit::variance::{var_nde, var_nie, VarianceInput};
use mediation_kit::MediationError;

#[derive(Parser, Serialize)]
#[command(name = "mediation-kit", version, about = "Mediation analysis for discrete data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
enum Command {
    /// Controlled/natural direct and indirect effect estimates
    Estimate(EstimateArgs),
    /// Decide whether two conditioning sets give the same standardized outcome distribution
    Equivalence(EquivalenceArgs),
    /// Monte Carlo study of the effect estimators under the built-in scenarios
    Simulate(SimulateArgs),
    /// Regression coefficient and asymptotic sd from a correlation matrix
    Gaussian(GaussianArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Args, Serialize)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct EstimateArgs {
    /// CSV with one column per variable plus a `prob` column
    #[arg(long)]
    dist: Option<PathBuf>,
    /// CSV with one column per variable plus a `count` column; first column is the treatment
    #[arg(long)]
    counts: Option<PathBuf>,
    #[arg(long, default_value = "X")]
    treatment: String,
    #[arg(long, default_value = "Y")]
    outcome: String,
    /// treated level
    #[arg(long)]
    x: String,
    /// baseline level
    #[arg(long)]
    xprime: String,
    /// outcome level whose probability is contrasted
    #[arg(long)]
    y: String,
    #[arg(long, value_delimiter = ',')]
    mediators: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    covariates: Vec<String>,
    /// mediator levels for the controlled direct effect, as var=level pairs;
    /// defaults to each mediator's first level
    #[arg(long, value_delimiter = ',')]
    pin: Vec<String>,
    /// weight strata by pr(z) instead of pr(s,z|x')
    #[arg(long)]
    covariate_weighted: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct EquivalenceArgs {
    #[arg(long)]
    dist: Option<PathBuf>,
    /// DAG file; enables the graphical variants of the three checks
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long, default_value = "X")]
    treatment: String,
    #[arg(long, default_value = "Y")]
    outcome: String,
    #[arg(long)]
    x: Option<String>,
    #[arg(long)]
    xprime: Option<String>,
    #[arg(long, value_delimiter = ',')]
    t1: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    t2: Vec<String>,
    /// tolerance for the direct standardized-sum comparison
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    /// tolerance for the conditional-independence measurements
    #[arg(long, default_value_t = 5e-3)]
    ci_tol: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    /// scenario as key=value lines (outcome_setting, treatment_setting, total_n,
    /// replications, seed); flags below override nothing when this is given
    #[arg(long, conflicts_with_all = ["setting", "all"])]
    config: Option<PathBuf>,
    /// outcome and treatment setting, e.g. A1B2
    #[arg(long)]
    setting: Option<String>,
    /// run every setting combination at n = 1000 and n = 2000
    #[arg(long)]
    all: bool,
    #[arg(long, default_value_t = 1000)]
    n: u64,
    #[arg(long, default_value_t = 10_000)]
    reps: u64,
    #[arg(long)]
    seed: Option<u64>,
    /// fix arm sizes at the expected split instead of drawing them
    #[arg(long)]
    deterministic_arms: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct GaussianArgs {
    /// correlation matrix CSV: header row of names, one labelled row per variable
    #[arg(long)]
    corr: PathBuf,
    /// sample size behind the correlations
    #[arg(long)]
    n: usize,
    #[arg(long, default_value = "X")]
    treatment: String,
    #[arg(long, default_value = "Y")]
    outcome: String,
    /// control variables; the report covers every subset of this list
    #[arg(long, value_delimiter = ',')]
    controls: Vec<String>,
    #[command(flatten)]
    output: OutputArgs,
}

enum CliError {
    Usage(String),
    Computation(MediationError),
}

impl From<MediationError> for CliError {
    fn from(e: MediationError) -> Self {
        match e {
            MediationError::Io(_) | MediationError::Parse { .. } => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Computation(other),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn read_file(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| usage(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct Report<T: Serialize> {
    version: &'static str,
    seed: Option<u64>,
    config: serde_json::Value,
    result: T,
}

fn emit<T: Serialize>(
    output: &OutputArgs,
    config: serde_json::Value,
    seed: Option<u64>,
    result: T,
    csv: Option<String>,
    table: Option<String>,
) -> CliResult<()> {
    let text = match output.format {
        Format::Json => {
            let report =
                Report { version: env!("CARGO_PKG_VERSION"), seed, config, result };
            serde_json::to_string_pretty(&report).expect("serializable report") + "\n"
        }
        Format::Csv => csv.ok_or_else(|| usage("csv output is not available for this command"))?,
        Format::Table => {
            table.ok_or_else(|| usage("table output is not available for this command"))?
        }
    };
    match &output.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| usage(format!("{}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn set(items: &[String]) -> BTreeSet<String> {
    items.iter().cloned().collect()
}

fn seed_from_env() -> Option<u64> {
    std::env::var("MEDIATION_KIT_SEED").ok().and_then(|s| s.parse().ok())
}

fn config_echo<T: Serialize>(args: &T) -> serde_json::Value {
    serde_json::to_value(args).expect("serializable args")
}

fn load_distribution(
    dist: &Option<PathBuf>,
    counts: &Option<PathBuf>,
) -> CliResult<(DiscreteJointDistribution, Option<ContingencyTable>)> {
    match (dist, counts) {
        (Some(_), Some(_)) => Err(usage("pass either --dist or --counts, not both")),
        (Some(p), None) => Ok((parse_distribution_csv(&read_file(p)?)?, None)),
        (None, Some(p)) => {
            let table = parse_counts_csv(&read_file(p)?)?;
            Ok((DiscreteJointDistribution::from_counts(&table)?, Some(table)))
        }
        (None, None) => Err(usage("a --dist or --counts file is required")),
    }
}

#[derive(Serialize)]
struct EstimateReport {
    cde: EffectEstimate,
    /// mediator levels the controlled direct effect was evaluated at
    cde_pinned: Assignment,
    nde: EffectEstimate,
    nie: EffectEstimate,
    te: EffectEstimate,
    /// |NDE + NIE - TE|, a numerical diagnostic
    decomposition_residual: f64,
    arm_sizes: Option<BTreeMap<String, u64>>,
}

fn cmd_estimate(args: &EstimateArgs) -> CliResult<()> {
    let (d, table) = load_distribution(&args.dist, &args.counts)?;
    let q = EffectQuery::new(
        &args.treatment,
        &args.outcome,
        &args.x,
        &args.xprime,
        &args.y,
        set(&args.mediators),
        set(&args.covariates),
    )?;
    let weighting = if args.covariate_weighted {
        Weighting::CovariateWeighted
    } else {
        Weighting::ArmConditional
    };
    let mut pinned = Assignment::new();
    for pair in &args.pin {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| usage(format!("--pin expects var=level, got `{pair}`")))?;
        pinned.insert(k.to_string(), v.to_string());
    }
    for m in &q.mediators {
        if !pinned.contains_key(m) {
            let level = d.levels(m)?[0].clone();
            pinned.insert(m.clone(), level);
        }
    }
    let cde = effects::cde(&d, &q, &pinned)?;
    let mut nde = effects::nde_with(&d, &q, weighting)?;
    let mut nie = effects::nie_with(&d, &q, weighting)?;
    let te = effects::te(&d, &args.treatment, &args.x, &args.xprime, &args.outcome, &args.y)?;

    let mut arm_sizes = None;
    let u: BTreeSet<String> = q.mediators.union(&q.covariates).cloned().collect();
    if let Some(t) = &table {
        let levels: Vec<String> = t
            .variables()
            .find(|(n, _)| *n == t.treatment())
            .map(|(_, l)| l.to_vec())
            .expect("treatment column exists");
        let totals: BTreeMap<String, u64> =
            levels.into_iter().zip(t.arm_totals()).collect();
        if !u.is_empty() && t.treatment() == args.treatment {
            let (n1, n2) = (totals.get(&args.x), totals.get(&args.xprime));
            if let (Some(&n1), Some(&n2)) = (n1, n2) {
                let input = VarianceInput {
                    d: &d,
                    treatment: args.treatment.clone(),
                    x1: args.x.clone(),
                    x2: args.xprime.clone(),
                    outcome: args.outcome.clone(),
                    y: args.y.clone(),
                    u,
                    n_x1: n1,
                    n_x2: n2,
                };
                nde.variance = Some(var_nde(&input)?);
                nie.variance = Some(var_nie(&input)?);
            }
        }
        arm_sizes = Some(totals);
    }

    let residual = (nde.value + nie.value - te.value).abs();
    let report = EstimateReport {
        cde,
        cde_pinned: pinned,
        nde,
        nie,
        te,
        decomposition_residual: residual,
        arm_sizes,
    };
    let csv = {
        let mut s = String::from("effect,value,variance\n");
        for (name, est) in
            [("cde", &report.cde), ("nde", &report.nde), ("nie", &report.nie), ("te", &report.te)]
        {
            let var = est.variance.map(|v| v.to_string()).unwrap_or_default();
            s += &format!("{name},{},{var}\n", est.value);
        }
        s
    };
    emit(&args.output, config_echo(args), None, report, Some(csv), None)
}

#[derive(Serialize)]
struct GraphicalChecks {
    theorem1: Theorem1Outcome,
    theorem2: Theorem2Outcome,
    theorem3: Theorem3Outcome,
}

#[derive(Serialize)]
struct EquivalenceReport {
    distributional: Option<EquivalenceVerdict>,
    graphical: Option<GraphicalChecks>,
}

fn cmd_equivalence(args: &EquivalenceArgs) -> CliResult<()> {
    if args.tol <= 0.0 || args.ci_tol <= 0.0 {
        return Err(usage("tolerances must be positive"));
    }
    if args.dist.is_none() && args.graph.is_none() {
        return Err(usage("a --dist or --graph file is required"));
    }
    let t1 = set(&args.t1);
    let t2 = set(&args.t2);

    let distributional = match &args.dist {
        Some(p) => {
            let d = parse_distribution_csv(&read_file(p)?)?;
            let (x, xprime) = match (&args.x, &args.xprime) {
                (Some(x), Some(xp)) => (x.clone(), xp.clone()),
                _ => return Err(usage("--x and --xprime are required with --dist")),
            };
            let q = EquivalenceQuery {
                treatment: args.treatment.clone(),
                outcome: args.outcome.clone(),
                x,
                x_prime: xprime,
                t1: t1.clone(),
                t2: t2.clone(),
            };
            Some(equivalence::decide(&d, &q, args.tol, args.ci_tol)?)
        }
        None => None,
    };
    let graphical = match &args.graph {
        Some(p) => {
            let g = parse_graph(&read_file(p)?)?;
            let oracle = IndependenceOracle::Graph(&g);
            Some(GraphicalChecks {
                theorem1: equivalence::check_theorem1(
                    oracle,
                    &args.treatment,
                    &args.outcome,
                    &t1,
                    &t2,
                )?,
                theorem2: equivalence::check_theorem2(oracle, &args.treatment, &t1, &t2)?,
                theorem3: equivalence::check_theorem3(
                    oracle,
                    &args.treatment,
                    &args.outcome,
                    &t1,
                    &t2,
                )?,
            })
        }
        None => None,
    };
    let report = EquivalenceReport { distributional, graphical };
    let csv = {
        let mut s = String::from("check,backend,value\n");
        if let Some(v) = &report.distributional {
            s += &format!("direct,distribution,{}\n", v.direct_equal);
            s += &format!("max_discrepancy,distribution,{}\n", v.max_discrepancy);
            s += &format!("theorem1,distribution,{}\n", v.theorem1.passes());
            s += &format!("theorem2,distribution,{}\n", v.theorem2.passes);
            s += &format!("theorem3,distribution,{}\n", v.theorem3.passes);
        }
        if let Some(g) = &report.graphical {
            s += &format!("theorem1,graph,{}\n", g.theorem1.passes());
            s += &format!("theorem2,graph,{}\n", g.theorem2.passes);
            s += &format!("theorem3,graph,{}\n", g.theorem3.passes);
        }
        s
    };
    emit(&args.output, config_echo(args), None, report, Some(csv), None)
}

fn parse_setting(s: &str) -> CliResult<(OutcomeSetting, TreatmentSetting)> {
    let bad = || usage(format!("unknown setting `{s}`; expected e.g. A1B2"));
    if s.len() != 4 {
        return Err(bad());
    }
    let outcome = match &s[..2] {
        "A1" => OutcomeSetting::A1,
        "A2" => OutcomeSetting::A2,
        _ => return Err(bad()),
    };
    let treatment = match &s[2..] {
        "B1" => TreatmentSetting::B1,
        "B2" => TreatmentSetting::B2,
        "B3" => TreatmentSetting::B3,
        _ => return Err(bad()),
    };
    Ok((outcome, treatment))
}

fn simulation_csv(results: &[SimulationResult]) -> String {
    let mut s = String::from(
        "outcome_setting,treatment_setting,n,replications,conditioning,effect,sqrt_avar,sqrt_var,ratio,skipped_strata\n",
    );
    for r in results {
        for c in &r.cells {
            s += &format!(
                "{},{},{},{},{},{:?},{:.6},{:.6},{:.4},{}\n",
                r.config.outcome_setting,
                r.config.treatment_setting,
                r.config.total_n,
                r.config.replications,
                c.conditioning,
                c.effect,
                c.sqrt_avar,
                c.sqrt_var,
                c.ratio,
                c.skipped_strata
            );
        }
    }
    s
}

fn simulation_table(results: &[SimulationResult]) -> String {
    let mut s = String::new();
    s += &format!(
        "{:<10} {:>6} {:>6} {:<4} {:>5} {:>9} {:>9} {:>7}\n",
        "setting", "n", "reps", "eff", "cond", "sqrt_avar", "sqrt_var", "ratio"
    );
    for r in results {
        for c in &r.cells {
            s += &format!(
                "{}+{:<7} {:>6} {:>6} {:<4} {:>5} {:>9.4} {:>9.4} {:>7.3}\n",
                r.config.outcome_setting,
                r.config.treatment_setting,
                r.config.total_n,
                r.config.replications,
                format!("{:?}", c.effect),
                c.conditioning.to_string(),
                c.sqrt_avar,
                c.sqrt_var,
                c.ratio
            );
        }
    }
    s
}

fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    let seed = args.seed.or_else(seed_from_env).unwrap_or(0);
    let results: Vec<SimulationResult> = if args.all {
        if args.reps == 0 {
            return Err(usage("--reps must be positive"));
        }
        reproduce_table4(seed, args.reps)?
    } else if let Some(path) = &args.config {
        let kv = parse_key_values(&read_file(path)?)?;
        let cfg = ScenarioConfig::from_key_values(&kv)?;
        if cfg.replications == 0 {
            return Err(usage("replications must be positive"));
        }
        vec![run_scenario(&cfg)?]
    } else if let Some(setting) = &args.setting {
        if args.reps == 0 {
            return Err(usage("--reps must be positive"));
        }
        let (outcome, treatment) = parse_setting(setting)?;
        let mut cfg = ScenarioConfig::new(outcome, treatment, args.n, args.reps, seed);
        cfg.deterministic_arms = args.deterministic_arms;
        vec![run_scenario(&cfg)?]
    } else {
        return Err(usage("pass --setting, --config, or --all"));
    };
    let csv = simulation_csv(&results);
    let table = simulation_table(&results);
    emit(&args.output, config_echo(args), Some(seed), results, Some(csv), Some(table))
}

#[derive(Serialize)]
struct GaussianRow {
    controls: Vec<String>,
    coefficient: f64,
    asymptotic_sd: f64,
}

fn cmd_gaussian(args: &GaussianArgs) -> CliResult<()> {
    let corr = read_file(&args.corr)?;
    let m: CorrelationMatrix = parse_correlation_csv(&corr, args.n)?;
    let controls: Vec<String> = args.controls.clone();
    let mut rows = Vec::new();
    for mask in 0u32..(1 << controls.len()) {
        let subset: BTreeSet<String> = controls
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, c)| c.clone())
            .collect();
        rows.push(GaussianRow {
            controls: subset.iter().cloned().collect(),
            coefficient: m.regression_coefficient(&args.outcome, &args.treatment, &subset)?,
            asymptotic_sd: m.asymptotic_sd(&args.outcome, &args.treatment, &subset)?,
        });
    }
    let csv = {
        let mut s = String::from("controls,coefficient,asymptotic_sd\n");
        for r in &rows {
            s += &format!("{},{},{}\n", r.controls.join("+"), r.coefficient, r.asymptotic_sd);
        }
        s
    };
    emit(&args.output, config_echo(args), None, rows, Some(csv), None)
}

fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Estimate(a) => cmd_estimate(a),
        Command::Equivalence(a) => cmd_equivalence(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Gaussian(a) => cmd_gaussian(a),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => {}
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(2);
        }
        Err(CliError::Computation(e)) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
