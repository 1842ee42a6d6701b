use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rank_effects::inference::PatternChoice;
use rank_effects::io::{
    analyze_file, parse_scenario_config, render_report_table, render_simulation_table,
    AnalyzeOptions, SimulationReport,
};
use rank_effects::simulation::{builtin_grid, run_grid, Distribution, GridOptions, BUILTIN_GRIDS};
use rank_effects::{Error, Method};

#[derive(Parser)]
#[command(
    name = "rank-effects",
    version,
    about = "Rank-based effects and tests for incomplete two-sample multivariate data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate effects and run the Wald- and ANOVA-type tests on a CSV file.
    Analyze(AnalyzeArgs),
    /// Run Monte Carlo rejection-rate experiments.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Wide CSV: g1_var1..g1_vard, g2_var1..g2_vard, one row per subject.
    input: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Comma-separated subset of all, complete, incomplete.
    #[arg(long, default_value = "all,complete,incomplete")]
    methods: String,
    /// auto, simple or general.
    #[arg(long, default_value = "auto")]
    pattern: String,
    /// Print the JSON report (the default).
    #[arg(long, conflicts_with = "table")]
    json: bool,
    /// Print an aligned text table instead of JSON.
    #[arg(long)]
    table: bool,
    #[arg(long, default_value = "NA")]
    na_token: String,
    /// Write the report here instead of standard output.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML scenario file.
    #[arg(long, conflicts_with = "builtin", required_unless_present = "builtin")]
    config: Option<PathBuf>,
    /// One of table3, table6, design1, design2, design3.
    #[arg(long)]
    builtin: Option<String>,
    /// Replications per scenario.
    #[arg(long)]
    reps: Option<usize>,
    /// Comma-separated dimensions (built-in grids only).
    #[arg(long)]
    dims: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// normal, discretized_normal, lognormal or cauchy (built-in grids only).
    #[arg(long)]
    distribution: Option<String>,
    /// JSON results file; standard output when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Aligned text table file; printed to standard error when omitted.
    #[arg(long)]
    table: Option<PathBuf>,
}

fn invalid(key: &str, reason: String) -> Error {
    Error::InvalidScenario {
        key: key.into(),
        reason,
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(Error::from),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn analyze(args: AnalyzeArgs) -> Result<(), Error> {
    let methods = args
        .methods
        .split(',')
        .map(|m| {
            Method::parse(m).ok_or_else(|| invalid("methods", format!("unknown method '{m}'")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let pattern = PatternChoice::parse(&args.pattern).ok_or_else(|| {
        invalid(
            "pattern",
            format!("expected auto, simple or general, got '{}'", args.pattern),
        )
    })?;
    let opts = AnalyzeOptions {
        alpha: args.alpha,
        methods,
        pattern,
        na_token: args.na_token.clone(),
        ..AnalyzeOptions::default()
    };
    let doc = analyze_file(&args.input, &opts)?;
    let text = if args.table {
        render_report_table(&doc)
    } else {
        serde_json::to_string_pretty(&doc).expect("report serializes") + "\n"
    };
    write_out(args.output.as_deref(), &text)
}

fn simulate(args: SimulateArgs) -> Result<(), Error> {
    let (source, scenarios, config) = if let Some(path) = &args.config {
        if args.dims.is_some() || args.distribution.is_some() {
            return Err(invalid(
                "dims",
                "--dims and --distribution apply to built-in grids only".into(),
            ));
        }
        let text = std::fs::read_to_string(path)?;
        let scenarios = parse_scenario_config(&text, args.reps)?;
        ("config".to_string(), scenarios, text.into_bytes())
    } else {
        let name = args.builtin.clone().unwrap_or_default();
        let dims = args
            .dims
            .as_deref()
            .map(|s| {
                s.split(',')
                    .map(|d| {
                        d.trim()
                            .parse::<usize>()
                            .map_err(|_| invalid("dims", format!("not a dimension: '{d}'")))
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .transpose()?;
        let distribution = args
            .distribution
            .as_deref()
            .map(|s| {
                Distribution::parse(s)
                    .ok_or_else(|| invalid("distribution", format!("unknown distribution '{s}'")))
            })
            .transpose()?;
        let mut opts = GridOptions {
            seed: args.seed,
            dims,
            distribution,
            ..GridOptions::default()
        };
        if let Some(r) = args.reps {
            opts.replications = r;
        }
        let scenarios = builtin_grid(&name, &opts)?;
        let config = format!(
            "builtin={name};reps={};seed={};dims={:?};distribution={:?}",
            opts.replications, opts.seed, opts.dims, opts.distribution
        );
        (name, scenarios, config.into_bytes())
    };
    let master = args.builtin.as_ref().map(|_| args.seed);
    let results = run_grid(&scenarios)?;
    let table = render_simulation_table(&results);
    let report = SimulationReport::new(&source, master, &config, results);
    let json = serde_json::to_string_pretty(&report).expect("results serialize") + "\n";
    write_out(args.output.as_deref(), &json)?;
    match &args.table {
        Some(p) => std::fs::write(p, table)?,
        None => eprint!("{table}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Simulate(s) => simulate(s),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut obj = serde_json::json!({
                "error": e.kind(),
                "message": e.to_string(),
            });
            if let Error::InvalidScenario { key, .. } = &e {
                obj["key"] = key.clone().into();
                if key == "builtin" {
                    obj["valid"] = BUILTIN_GRIDS.to_vec().into();
                }
            }
            eprintln!("{obj}");
            ExitCode::from(2)
        }
    }
}
