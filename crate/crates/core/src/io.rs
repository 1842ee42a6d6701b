//! Wide CSV data sets, scenario configuration files and report documents.
//!
//! A data set has one row per subject and `2d` columns
//! `g1_var1..g1_vard, g2_var1..g2_vard`; missing cells hold a configurable
//! token (`NA` by default).

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::covariance::{DegenerateTerm, Estimator};
use crate::effects::Method;
use crate::error::{Error, Result};
use crate::inference::{run_all_methods, PatternChoice, TestFlag, TestKind, TestOutcome};
use crate::model::{
    check_assumptions, derive_pattern_index, AssumptionWarning, Group, Hypothesis, MaskedSample,
    DEFAULT_SIZE_FLOOR,
};
use crate::simulation::{derive_seed, Distribution, Layout, Scenario, SimulationResult};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Whether the first CSV row names the columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeaderMode {
    /// A header is assumed when no field of the first row is a number or
    /// the missing-value token.
    #[default]
    Auto,
    Present,
    Absent,
}

#[derive(Debug, Clone)]
pub struct ParseOptions {
    pub na_token: String,
    pub header: HeaderMode,
    /// Expected number of components; inferred from the width when `None`.
    pub d: Option<usize>,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            na_token: "NA".into(),
            header: HeaderMode::Auto,
            d: None,
        }
    }
}

/// A parsed data set with its component labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub sample: MaskedSample,
    pub labels: Vec<String>,
}

fn component_labels(header: Option<&[String]>, d: usize) -> Vec<String> {
    (0..d)
        .map(|l| {
            header
                .and_then(|h| h.get(l))
                .map(|name| name.strip_prefix("g1_").unwrap_or(name).to_string())
                .unwrap_or_else(|| format!("var{}", l + 1))
        })
        .collect()
}

/// Parses a wide CSV data set from text.
pub fn parse_dataset_str(text: &str, opts: &ParseOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records: Vec<(usize, Vec<String>)> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::ParseError {
            line: e.position().map_or(0, |p| p.line() as usize),
            column: 0,
            reason: e.to_string(),
        })?;
        let line = rec
            .position()
            .map_or(records.len() + 1, |p| p.line() as usize);
        let fields: Vec<String> = rec.iter().map(str::to_string).collect();
        if fields.iter().all(String::is_empty) {
            continue;
        }
        records.push((line, fields));
    }
    if records.is_empty() {
        return Err(Error::ParseError {
            line: 1,
            column: 0,
            reason: "no rows".into(),
        });
    }
    let is_cell = |f: &str| f == opts.na_token || f.parse::<f64>().is_ok();
    let has_header = match opts.header {
        HeaderMode::Present => true,
        HeaderMode::Absent => false,
        HeaderMode::Auto => !records[0].1.iter().any(|f| is_cell(f)),
    };
    let header = if has_header {
        Some(records.remove(0).1)
    } else {
        None
    };
    let width = header
        .as_ref()
        .map(Vec::len)
        .or_else(|| records.first().map(|r| r.1.len()))
        .unwrap_or(0);
    if records.is_empty() {
        return Err(Error::ParseError {
            line: 2,
            column: 0,
            reason: "no rows".into(),
        });
    }
    if width == 0 || width % 2 != 0 {
        return Err(Error::ParseError {
            line: records[0].0,
            column: 0,
            reason: format!("expected an even number 2d of columns, found {width}"),
        });
    }
    let d = width / 2;
    if let Some(expected) = opts.d {
        if expected != d {
            return Err(Error::DimensionMismatch(format!(
                "expected d = {expected} (so {} columns), the file has {width}",
                2 * expected
            )));
        }
    }
    let mut subjects = Vec::with_capacity(records.len());
    for (line, fields) in &records {
        if fields.len() != width {
            return Err(Error::InconsistentWidth {
                line: *line,
                expected: width,
                found: fields.len(),
            });
        }
        let mut cells = Vec::with_capacity(width);
        for (c, f) in fields.iter().enumerate() {
            if *f == opts.na_token {
                cells.push(None);
                continue;
            }
            let v: f64 = f.parse().map_err(|_| Error::ParseError {
                line: *line,
                column: c + 1,
                reason: format!("cannot parse '{f}' as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::ParseError {
                    line: *line,
                    column: c + 1,
                    reason: format!("non-finite value '{f}'"),
                });
            }
            cells.push(Some(v));
        }
        subjects.push(cells);
    }
    let sample = MaskedSample::from_subjects(d, &subjects).map_err(|e| match e {
        Error::EmptySubject(k) => Error::ParseError {
            line: records[k].0,
            column: 0,
            reason: "subject has no observed cell".into(),
        },
        other => other,
    })?;
    Ok(Dataset {
        sample,
        labels: component_labels(header.as_deref(), d),
    })
}

/// Reads and parses a wide CSV data set.
pub fn parse_dataset(path: impl AsRef<Path>, opts: &ParseOptions) -> Result<Dataset> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_dataset_str(&text, opts)
}

/// Serializes a sample as wide CSV with a header row. Values use Rust's
/// shortest round-trip formatting, so parsing the output reproduces the
/// sample exactly.
pub fn write_dataset(sample: &MaskedSample, labels: &[String], na_token: &str) -> String {
    let d = sample.d();
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let header: Vec<String> = Group::BOTH
        .iter()
        .flat_map(|g| {
            (0..d).map(move |l| {
                let label = labels
                    .get(l)
                    .cloned()
                    .unwrap_or_else(|| format!("var{}", l + 1));
                format!("g{}_{label}", g.number())
            })
        })
        .collect();
    w.write_record(&header).expect("write to memory");
    for k in 0..sample.n() {
        let row: Vec<String> = sample
            .subject(k)
            .iter()
            .map(|c| c.map_or_else(|| na_token.to_string(), |v| format!("{v}")))
            .collect();
        w.write_record(&row).expect("write to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8 csv")
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Display companion of a full-precision number.
fn display3(x: f64) -> String {
    format!("{x:.3}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentCountsEntry {
    pub label: String,
    pub n_complete: usize,
    pub n_first_only: usize,
    pub n_second_only: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSummary {
    pub subjects: usize,
    pub d: usize,
    pub labels: Vec<String>,
    /// `simple` when missingness is at treatment level, `general` otherwise.
    pub pattern: String,
    pub components: Vec<ComponentCountsEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectEntry {
    pub label: String,
    pub p_hat: f64,
    pub p_hat_display: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodEffects {
    pub method: Method,
    pub subjects: usize,
    /// Empty when the method could not be applied.
    pub components: Vec<EffectEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodCovariance {
    pub method: Method,
    pub estimator: Estimator,
    pub v_hat: Vec<Vec<f64>>,
    pub trace: f64,
    pub nu_hat: Option<f64>,
    pub nu_hat_display: Option<String>,
    pub flags: Vec<DegenerateTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestEntry {
    pub method: Method,
    /// `Qn` or `Fn`.
    pub test: String,
    pub kind: TestKind,
    /// `computed` or `skipped`.
    pub status: String,
    pub statistic: Option<f64>,
    pub statistic_display: Option<String>,
    pub df: Option<f64>,
    pub p_value: Option<f64>,
    pub p_value_display: Option<String>,
    pub reject: Option<bool>,
    pub flags: Vec<TestFlag>,
    /// Why the test was skipped.
    pub error: Option<String>,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    /// Seed of the run; analyses are deterministic and carry none.
    pub seed: Option<u64>,
    /// SHA-256 of the canonical JSON of the options.
    pub config_hash: String,
    /// SHA-256 of the input bytes, when read from a file.
    pub input_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub alpha: f64,
    pub input: InputSummary,
    pub effects: Vec<MethodEffects>,
    pub covariance: Vec<MethodCovariance>,
    pub tests: Vec<TestEntry>,
    pub assumptions: Vec<AssumptionWarning>,
    pub provenance: Provenance,
}

/// Settings of an analysis run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeOptions {
    pub alpha: f64,
    pub methods: Vec<Method>,
    pub pattern: PatternChoice,
    pub na_token: String,
    pub size_floor: usize,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            methods: Method::ALL.to_vec(),
            pattern: PatternChoice::Auto,
            na_token: "NA".into(),
            size_floor: DEFAULT_SIZE_FLOOR,
        }
    }
}

fn test_entry(method: Method, kind: TestKind, outcome: &TestOutcome) -> TestEntry {
    let base = TestEntry {
        method,
        test: kind.name().to_string(),
        kind,
        status: "skipped".into(),
        statistic: None,
        statistic_display: None,
        df: None,
        p_value: None,
        p_value_display: None,
        reject: None,
        flags: Vec::new(),
        error: None,
        reason: None,
    };
    match outcome {
        TestOutcome::Computed(r) => TestEntry {
            status: "computed".into(),
            statistic: Some(r.statistic),
            statistic_display: Some(display3(r.statistic)),
            df: Some(r.df),
            p_value: Some(r.p_value),
            p_value_display: Some(display3(r.p_value)),
            reject: Some(r.reject),
            flags: r.flags.clone(),
            ..base
        },
        TestOutcome::Skipped { error, reason } => TestEntry {
            error: Some(error.clone()),
            reason: Some(reason.clone()),
            ..base
        },
    }
}

/// Runs the full analysis of a data set and assembles the report.
pub fn analyze_dataset(
    data: &Dataset,
    opts: &AnalyzeOptions,
    input_hash: Option<String>,
) -> Result<ReportDocument> {
    let hyp = Hypothesis::new(opts.alpha)?;
    let sample = &data.sample;
    let idx = derive_pattern_index(sample);
    let analyses = run_all_methods(sample, &idx, &opts.methods, opts.pattern, &hyp)?;

    let input = InputSummary {
        subjects: sample.n(),
        d: sample.d(),
        labels: data.labels.clone(),
        pattern: if idx.is_simple_pattern() {
            "simple"
        } else {
            "general"
        }
        .into(),
        components: idx
            .components()
            .iter()
            .zip(&data.labels)
            .map(|(c, label)| ComponentCountsEntry {
                label: label.clone(),
                n_complete: c.n_complete(),
                n_first_only: c.n_incomplete(Group::First),
                n_second_only: c.n_incomplete(Group::Second),
            })
            .collect(),
    };
    let mut effects = Vec::new();
    let mut covariance = Vec::new();
    let mut tests = Vec::new();
    for a in &analyses {
        effects.push(MethodEffects {
            method: a.method,
            subjects: a.subjects,
            components: a
                .effects
                .as_ref()
                .map(|e| {
                    e.p_hat
                        .iter()
                        .zip(&data.labels)
                        .map(|(&p, label)| EffectEntry {
                            label: label.clone(),
                            p_hat: p,
                            p_hat_display: display3(p),
                        })
                        .collect()
                })
                .unwrap_or_default(),
        });
        if let Some(c) = &a.covariance {
            covariance.push(MethodCovariance {
                method: a.method,
                estimator: c.estimator,
                v_hat: c.v_hat.clone(),
                trace: c.trace,
                nu_hat: c.nu_hat,
                nu_hat_display: c.nu_hat.map(display3),
                flags: c.flags.clone(),
            });
        }
        tests.push(test_entry(a.method, TestKind::Wald, &a.wald));
        tests.push(test_entry(a.method, TestKind::Anova, &a.anova));
    }
    let config = serde_json::to_vec(opts).expect("options serialize");
    Ok(ReportDocument {
        schema_version: REPORT_SCHEMA_VERSION,
        alpha: opts.alpha,
        input,
        effects,
        covariance,
        tests,
        assumptions: check_assumptions(&idx, opts.size_floor),
        provenance: Provenance {
            tool: "rank-effects".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: None,
            config_hash: sha256_hex(&config),
            input_hash,
        },
    })
}

/// Parses `path` and analyzes it; the report records the input's hash.
pub fn analyze_file(path: impl AsRef<Path>, opts: &AnalyzeOptions) -> Result<ReportDocument> {
    let bytes = std::fs::read(path.as_ref())?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| Error::ParseError {
        line: 0,
        column: 0,
        reason: format!("input is not UTF-8: {e}"),
    })?;
    let parse = ParseOptions {
        na_token: opts.na_token.clone(),
        ..ParseOptions::default()
    };
    let data = parse_dataset_str(&text, &parse)?;
    analyze_dataset(&data, opts, Some(sha256_hex(&bytes)))
}

fn fmt_opt(x: Option<f64>, width: usize) -> String {
    match x {
        Some(v) => format!("{v:>width$.3}"),
        None => format!("{:>width$}", "-"),
    }
}

/// Aligned text rendering: effects per component and method, then the
/// statistics and p-values per method.
pub fn render_report_table(doc: &ReportDocument) -> String {
    let mut out = String::new();
    let lw = doc
        .input
        .labels
        .iter()
        .map(String::len)
        .max()
        .unwrap_or(0)
        .max(10);
    let _ = writeln!(
        out,
        "n = {}, d = {}, pattern = {}, alpha = {}",
        doc.input.subjects, doc.input.d, doc.input.pattern, doc.alpha
    );
    let _ = writeln!(out);
    let _ = write!(out, "{:<lw$}", "p_hat");
    for m in &doc.effects {
        let _ = write!(out, " {:>11}", m.method.name());
    }
    let _ = writeln!(out);
    for (l, label) in doc.input.labels.iter().enumerate() {
        let _ = write!(out, "{label:<lw$}");
        for m in &doc.effects {
            let _ = write!(
                out,
                " {}",
                fmt_opt(m.components.get(l).map(|e| e.p_hat), 11)
            );
        }
        let _ = writeln!(out);
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<lw$} {:>4} {:>11} {:>8} {:>11} {:>7}  notes",
        "method", "test", "statistic", "df", "p-value", "reject"
    );
    for t in &doc.tests {
        let notes = match (&t.reason, t.flags.is_empty()) {
            (Some(r), _) => r.clone(),
            (None, false) => t
                .flags
                .iter()
                .map(|f| match f {
                    TestFlag::DegenerateNull => "degenerate null".to_string(),
                    TestFlag::PseudoInverse { rank } => format!("pseudo-inverse, rank {rank}"),
                    TestFlag::IndefiniteCovariance => "indefinite covariance".to_string(),
                    TestFlag::DegenerateTerm { term, .. } => format!("{term} term dropped"),
                })
                .collect::<Vec<_>>()
                .join("; "),
            _ => String::new(),
        };
        let _ = writeln!(
            out,
            "{:<lw$} {:>4} {} {} {} {:>7}  {}",
            t.method.name(),
            t.test,
            fmt_opt(t.statistic, 11),
            fmt_opt(t.df, 8),
            fmt_opt(t.p_value, 11),
            t.reject.map_or("-", |r| if r { "yes" } else { "no" }),
            notes
        );
    }
    if !doc.assumptions.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(out, "warnings:");
        for w in &doc.assumptions {
            let _ = writeln!(out, "  {w}");
        }
    }
    out
}

/// A scenario as written in a configuration file; omitted fields take the
/// file-level defaults.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioEntry {
    label: Option<String>,
    distribution: Distribution,
    d: usize,
    rho: [f64; 3],
    sigma2: [f64; 2],
    shift: Option<Vec<f64>>,
    layout: Layout,
    replications: Option<usize>,
    seed: Option<u64>,
    alpha: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    seed: Option<u64>,
    replications: Option<usize>,
    alpha: Option<f64>,
    #[serde(default)]
    scenario: Vec<ScenarioEntry>,
}

/// Key named on the line where a TOML error starts, for error messages.
fn key_at(text: &str, offset: usize) -> (usize, String) {
    let line_no = text[..offset.min(text.len())].matches('\n').count() + 1;
    let line = text.lines().nth(line_no - 1).unwrap_or("");
    let key = line.split('=').next().unwrap_or("").trim();
    (line_no, key.trim_matches(['[', ']']).to_string())
}

/// Parses a scenario configuration (TOML):
///
/// ```toml
/// seed = 7              # master seed, default 0
/// replications = 1000   # default for every scenario
///
/// [[scenario]]
/// distribution = "discretized_normal"   # normal | lognormal | cauchy
/// d = 2
/// rho = [0.1, 0.1, 0.1]                 # rho_1, rho_2, rho_12
/// sigma2 = [1.0, 1.0]
/// shift = [0.0, 0.0]                    # optional, default zeros
/// layout = { kind = "simple", complete = 30, first_only = 10, second_only = 10 }
/// ```
///
/// Scenarios without an explicit `seed` get one derived from the master
/// seed and their position. Every scenario is validated; errors name the
/// offending key.
pub fn parse_scenario_config(
    text: &str,
    replications_override: Option<usize>,
) -> Result<Vec<Scenario>> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| {
        let (line, key) = e
            .span()
            .map(|s| key_at(text, s.start))
            .unwrap_or((0, String::new()));
        Error::InvalidScenario {
            key: if key.is_empty() {
                format!("line {line}")
            } else {
                format!("{key} (line {line})")
            },
            reason: e.message().to_string(),
        }
    })?;
    if file.scenario.is_empty() {
        return Err(Error::InvalidScenario {
            key: "scenario".into(),
            reason: "the file defines no [[scenario]] table".into(),
        });
    }
    let master = file.seed.unwrap_or(0);
    let mut out = Vec::with_capacity(file.scenario.len());
    for (i, e) in file.scenario.into_iter().enumerate() {
        let s = Scenario {
            label: e.label.unwrap_or_else(|| format!("scenario {}", i + 1)),
            distribution: e.distribution,
            d: e.d,
            rho: e.rho,
            sigma2: e.sigma2,
            shift: e.shift.unwrap_or_else(|| vec![0.0; e.d]),
            layout: e.layout,
            replications: replications_override
                .or(e.replications)
                .or(file.replications)
                .unwrap_or(crate::simulation::DEFAULT_REPLICATIONS),
            seed: e.seed.unwrap_or_else(|| derive_seed(master, i as u64)),
            alpha: e.alpha.or(file.alpha).unwrap_or(0.05),
        };
        s.validate().map_err(|err| match err {
            Error::InvalidScenario { key, reason } => Error::InvalidScenario {
                key: format!("scenario[{i}].{key}"),
                reason,
            },
            other => other,
        })?;
        out.push(s);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub schema_version: u32,
    /// Built-in grid name, or `config` for a configuration file.
    pub source: String,
    pub master_seed: Option<u64>,
    pub provenance: Provenance,
    pub results: Vec<SimulationResult>,
}

impl SimulationReport {
    pub fn new(
        source: &str,
        master_seed: Option<u64>,
        config: &[u8],
        results: Vec<SimulationResult>,
    ) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            source: source.into(),
            master_seed,
            provenance: Provenance {
                tool: "rank-effects".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                seed: master_seed,
                config_hash: sha256_hex(config),
                input_hash: None,
            },
            results,
        }
    }
}

/// Aligned text table of rejection rates (in percent) with Monte Carlo
/// standard errors, one row per scenario.
pub fn render_simulation_table(results: &[SimulationResult]) -> String {
    let cols = [
        (Method::All, TestKind::Wald, "Qn"),
        (Method::All, TestKind::Anova, "Fn"),
        (Method::IncompleteOnly, TestKind::Wald, "Qn(inc)"),
        (Method::IncompleteOnly, TestKind::Anova, "Fn(inc)"),
        (Method::CompleteOnly, TestKind::Wald, "Qn(com)"),
        (Method::CompleteOnly, TestKind::Anova, "Fn(com)"),
    ];
    let lw = results
        .iter()
        .map(|r| r.scenario.label.len())
        .max()
        .unwrap_or(8)
        .max(8);
    let mut out = String::new();
    let _ = write!(out, "{:<lw$} {:>6}", "scenario", "reps");
    for (_, _, name) in cols {
        let _ = write!(out, " {name:>13}");
    }
    let _ = writeln!(out);
    for r in results {
        let _ = write!(
            out,
            "{:<lw$} {:>6}",
            r.scenario.label, r.scenario.replications
        );
        for (m, t, _) in cols {
            let cell = match r.tally(m, t) {
                Some(t) => format!("{:.1} ({:.1})", 100.0 * t.rate, 100.0 * t.mc_se),
                None => "-".into(),
            };
            let _ = write!(out, " {cell:>13}");
        }
        let _ = writeln!(out);
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "rejection rates x100 at each scenario's alpha; Monte Carlo standard errors in parentheses"
    );
    out
}
