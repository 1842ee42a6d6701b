//! Data generators and the Monte Carlo harness for size and power studies.

use std::time::{Duration, Instant};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::effects::Method;
use crate::error::{Error, Result};
use crate::inference::{run_all_methods, PatternChoice, TestKind, TestOutcome};
use crate::model::{derive_pattern_index, Group, Hypothesis, MaskedSample};
use crate::special::gamma_q;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "RANK_EFFECT_THREADS";

pub const DEFAULT_REPLICATIONS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    /// Multivariate normal, continuous.
    Normal,
    /// Multivariate normal rounded to the nearest integer.
    DiscretizedNormal,
    /// Componentwise exponential of a multivariate normal.
    #[serde(rename = "lognormal")]
    LogNormal,
    /// Elliptical Cauchy: a correlated normal vector over an independent `|N(0,1)|`.
    Cauchy,
}

impl Distribution {
    pub const ALL: [Distribution; 4] = [
        Distribution::Normal,
        Distribution::DiscretizedNormal,
        Distribution::LogNormal,
        Distribution::Cauchy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Distribution::Normal => "normal",
            Distribution::DiscretizedNormal => "discretized_normal",
            Distribution::LogNormal => "lognormal",
            Distribution::Cauchy => "cauchy",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.name() == s.trim())
    }
}

/// How subjects are allocated to observedness patterns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Layout {
    /// Missingness at treatment level: complete subjects, subjects observed
    /// in group 1 only and subjects observed in group 2 only.
    Simple {
        complete: usize,
        first_only: usize,
        second_only: usize,
    },
    /// `d = 2`, `n / 15` subjects in each of the 15 patterns.
    Design1 { n: usize },
    /// `d = 2`, `n a` complete subjects and `n (1 - a) / 14` in every other pattern.
    Design2 { n: usize, a: f64 },
    /// `d = 2`, `complete` complete subjects and `others` in every other pattern.
    Design3 {
        complete: usize,
        #[serde(default = "default_design3_others")]
        others: usize,
    },
}

fn default_design3_others() -> usize {
    100
}

/// The 15 nonempty observedness patterns of `(g1 var1, g1 var2, g2 var1,
/// g2 var2)` used by the designs, in a fixed order: the bitmask counts down
/// from `1111`, so the first pattern is the complete one.
pub fn design_patterns() -> Vec<[bool; 4]> {
    (1..16u8)
        .rev()
        .map(|m| [m & 8 != 0, m & 4 != 0, m & 2 != 0, m & 1 != 0])
        .collect()
}

impl Layout {
    /// Subject counts per pattern, each pattern a `2d` observedness vector.
    pub fn allocation(&self, d: usize) -> Result<Vec<(Vec<bool>, usize)>> {
        let bad = |key: &str, reason: String| Error::InvalidScenario {
            key: format!("layout.{key}"),
            reason,
        };
        match *self {
            Layout::Simple {
                complete,
                first_only,
                second_only,
            } => {
                let row = |a: bool, b: bool| {
                    let mut v = vec![a; d];
                    v.extend(std::iter::repeat_n(b, d));
                    v
                };
                Ok(vec![
                    (row(true, true), complete),
                    (row(true, false), first_only),
                    (row(false, true), second_only),
                ])
            }
            _ if d != 2 => Err(Error::InvalidScenario {
                key: "d".into(),
                reason: format!("the pattern designs are defined for d = 2, got {d}"),
            }),
            Layout::Design1 { n } => {
                if n == 0 || n % 15 != 0 {
                    return Err(bad(
                        "n",
                        format!("must be a positive multiple of 15, got {n}"),
                    ));
                }
                Ok(design_patterns()
                    .into_iter()
                    .map(|p| (p.to_vec(), n / 15))
                    .collect())
            }
            Layout::Design2 { n, a } => {
                if !(a > 0.0 && a < 1.0) {
                    return Err(bad("a", format!("must lie in (0, 1), got {a}")));
                }
                let complete = n as f64 * a;
                let each = n as f64 * (1.0 - a) / 14.0;
                let whole = |x: f64| (x - x.round()).abs() < 1e-9;
                if !whole(complete) || !whole(each) {
                    return Err(bad(
                        "n",
                        format!(
                            "n a = {complete} and n (1 - a) / 14 = {each} must be whole numbers"
                        ),
                    ));
                }
                let (complete, each) = (complete.round() as usize, each.round() as usize);
                Ok(design_patterns()
                    .into_iter()
                    .enumerate()
                    .map(|(i, p)| (p.to_vec(), if i == 0 { complete } else { each }))
                    .collect())
            }
            Layout::Design3 { complete, others } => Ok(design_patterns()
                .into_iter()
                .enumerate()
                .map(|(i, p)| (p.to_vec(), if i == 0 { complete } else { others }))
                .collect()),
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            Layout::Simple {
                complete,
                first_only,
                second_only,
            } => format!("({complete},{first_only},{second_only})"),
            Layout::Design1 { n } => format!("design1 n={n}"),
            Layout::Design2 { n, a } => format!("design2 n={n} a={a}"),
            Layout::Design3 { complete, others } => {
                format!("design3 n1={complete} others={others}")
            }
        }
    }
}

/// One simulation configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub label: String,
    pub distribution: Distribution,
    pub d: usize,
    /// `(rho_1, rho_2, rho_12)`.
    pub rho: [f64; 3],
    /// `(sigma_1^2, sigma_2^2)`.
    pub sigma2: [f64; 2],
    /// Location shift of the group-2 components.
    pub shift: Vec<f64>,
    pub layout: Layout,
    pub replications: usize,
    pub seed: u64,
    pub alpha: f64,
}

/// Block covariance (scale) matrix with its Cholesky factor.
#[derive(Debug, Clone)]
pub struct Sigma {
    pub matrix: DMatrix<f64>,
    pub factor: DMatrix<f64>,
}

/// `[[s1 (I + rho1 (J - I)), rho12 s1 s2 J], [rho12 s1 s2 J, s2 (I + rho2 (J - I))]]`
/// with `s_g` the variances; fails when the matrix is not positive definite.
pub fn build_sigma(d: usize, rho: [f64; 3], sigma2: [f64; 2]) -> Result<Sigma> {
    let [r1, r2, r12] = rho;
    let [v1, v2] = sigma2;
    let cross = r12 * v1.sqrt() * v2.sqrt();
    let matrix = DMatrix::from_fn(2 * d, 2 * d, |i, j| {
        let (gi, gj) = (i / d, j / d);
        match (gi, gj) {
            (0, 0) => {
                if i == j {
                    v1
                } else {
                    r1 * v1
                }
            }
            (1, 1) => {
                if i == j {
                    v2
                } else {
                    r2 * v2
                }
            }
            _ => cross,
        }
    });
    let chol = Cholesky::<f64, Dyn>::new(matrix.clone()).ok_or(Error::NotPositiveDefinite)?;
    Ok(Sigma {
        factor: chol.l(),
        matrix,
    })
}

fn standard_normal_cdf(x: f64) -> f64 {
    // Phi(x) = erfc(-x / sqrt 2) / 2 and erfc(z) = Q(1/2, z^2) for z >= 0
    let z = x / std::f64::consts::SQRT_2;
    let tail = 0.5 * gamma_q(0.5, z * z).unwrap_or(0.0);
    if x >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<Sigma> {
        let bad = |key: &str, reason: String| Error::InvalidScenario {
            key: key.into(),
            reason,
        };
        if self.d == 0 {
            return Err(bad("d", "must be at least 1".into()));
        }
        if self.replications == 0 {
            return Err(bad("replications", "must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(bad(
                "alpha",
                format!("must lie in (0, 1), got {}", self.alpha),
            ));
        }
        if self.rho.iter().any(|r| !r.is_finite() || r.abs() > 1.0) {
            return Err(bad("rho", "correlations must lie in [-1, 1]".into()));
        }
        if self.sigma2.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(bad("sigma2", "variances must be positive".into()));
        }
        if self.shift.len() != self.d {
            return Err(bad(
                "shift",
                format!("needs {} entries, got {}", self.d, self.shift.len()),
            ));
        }
        if self.shift.iter().any(|s| !s.is_finite()) {
            return Err(bad("shift", "entries must be finite".into()));
        }
        let alloc = self.layout.allocation(self.d)?;
        let n: usize = alloc.iter().map(|(_, c)| c).sum();
        if n < 2 {
            return Err(bad(
                "layout",
                format!("needs at least two subjects, got {n}"),
            ));
        }
        build_sigma(self.d, self.rho, self.sigma2).map_err(|_| {
            bad(
                "rho",
                "the covariance matrix is not positive definite for these correlations and variances"
                    .into(),
            )
        })
    }

    pub fn total_subjects(&self) -> usize {
        self.layout
            .allocation(self.d)
            .map(|a| a.iter().map(|(_, c)| c).sum())
            .unwrap_or(0)
    }

    /// Normalized marginal distribution function `(F(x-) + F(x)) / 2` of
    /// group `g` on component `l` under this generator.
    pub fn marginal_cdf(&self, g: Group, l: usize, x: f64) -> f64 {
        let (mu, var) = match g {
            Group::First => (0.0, self.sigma2[0]),
            Group::Second => (self.shift[l], self.sigma2[1]),
        };
        let sd = var.sqrt();
        match self.distribution {
            Distribution::Normal => standard_normal_cdf((x - mu) / sd),
            Distribution::DiscretizedNormal => {
                if x.fract() != 0.0 {
                    standard_normal_cdf((x.floor() + 0.5 - mu) / sd)
                } else {
                    0.5 * (standard_normal_cdf((x - 0.5 - mu) / sd)
                        + standard_normal_cdf((x + 0.5 - mu) / sd))
                }
            }
            Distribution::LogNormal => {
                if x <= 0.0 {
                    0.0
                } else {
                    standard_normal_cdf((x.ln() - mu) / sd)
                }
            }
            Distribution::Cauchy => 0.5 + ((x - mu) / sd).atan() / std::f64::consts::PI,
        }
    }
}

fn replicate_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    rng
}

/// Draws one data set: every subject gets a full `2d` vector, then the
/// cells its pattern does not observe are masked.
pub fn draw_sample(scenario: &Scenario, replicate: usize) -> Result<MaskedSample> {
    let sigma = scenario.validate()?;
    draw_with(scenario, &sigma, replicate)
}

fn draw_with(scenario: &Scenario, sigma: &Sigma, replicate: usize) -> Result<MaskedSample> {
    let d = scenario.d;
    let mut rng = replicate_rng(scenario.seed, replicate);
    let mut subjects = Vec::new();
    for (pattern, count) in scenario.layout.allocation(d)? {
        for _ in 0..count {
            let z = DVector::from_fn(2 * d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let w = &sigma.factor * z;
            let divisor = match scenario.distribution {
                Distribution::Cauchy => rng.sample::<f64, _>(StandardNormal).abs(),
                _ => 1.0,
            };
            let cells = (0..2 * d)
                .map(|i| {
                    let mu = if i >= d { scenario.shift[i - d] } else { 0.0 };
                    let x = match scenario.distribution {
                        Distribution::Normal => w[i] + mu,
                        Distribution::DiscretizedNormal => (w[i] + mu).round(),
                        Distribution::LogNormal => (w[i] + mu).exp(),
                        Distribution::Cauchy => w[i] / divisor + mu,
                    };
                    pattern[i].then_some(x)
                })
                .collect();
            subjects.push(cells);
        }
    }
    MaskedSample::from_subjects(d, &subjects)
}

/// Rejection tally for one (method, test) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub method: Method,
    pub test: TestKind,
    pub rejections: u64,
    /// Replicates where the test could not be computed; they count as
    /// non-rejections.
    pub failures: u64,
    /// Replicates where the test ran on a flagged (degenerate) covariance.
    pub flagged: u64,
    pub rate: f64,
    pub mc_se: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationResult {
    pub scenario: Scenario,
    pub tallies: Vec<Tally>,
    #[serde(skip)]
    pub wall_clock: Duration,
}

impl PartialEq for SimulationResult {
    /// Wall-clock time is not part of the result.
    fn eq(&self, other: &Self) -> bool {
        self.scenario == other.scenario && self.tallies == other.tallies
    }
}

impl SimulationResult {
    pub fn tally(&self, method: Method, test: TestKind) -> Option<&Tally> {
        self.tallies
            .iter()
            .find(|t| t.method == method && t.test == test)
    }

    pub fn rate(&self, method: Method, test: TestKind) -> f64 {
        self.tally(method, test).map_or(f64::NAN, |t| t.rate)
    }
}

const SLOTS: [(Method, TestKind); 6] = [
    (Method::All, TestKind::Wald),
    (Method::All, TestKind::Anova),
    (Method::IncompleteOnly, TestKind::Wald),
    (Method::IncompleteOnly, TestKind::Anova),
    (Method::CompleteOnly, TestKind::Wald),
    (Method::CompleteOnly, TestKind::Anova),
];

#[derive(Clone, Copy, Default)]
struct SlotOutcome {
    reject: bool,
    failed: bool,
    flagged: bool,
}

fn replicate(scenario: &Scenario, sigma: &Sigma, hyp: &Hypothesis, r: usize) -> [SlotOutcome; 6] {
    let mut out = [SlotOutcome {
        failed: true,
        ..Default::default()
    }; 6];
    let Ok(sample) = draw_with(scenario, sigma, r) else {
        return out;
    };
    let idx = derive_pattern_index(&sample);
    let methods = [Method::All, Method::IncompleteOnly, Method::CompleteOnly];
    let Ok(analyses) = run_all_methods(&sample, &idx, &methods, PatternChoice::Auto, hyp) else {
        return out;
    };
    for (i, a) in analyses.iter().enumerate() {
        for (j, t) in [&a.wald, &a.anova].into_iter().enumerate() {
            if let TestOutcome::Computed(rep) = t {
                out[2 * i + j] = SlotOutcome {
                    reject: rep.reject,
                    failed: false,
                    flagged: !rep.flags.is_empty(),
                };
            }
        }
    }
    out
}

fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

fn with_thread_cap<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    match thread_cap().and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

fn run_validated(scenario: &Scenario, sigma: &Sigma) -> SimulationResult {
    let start = Instant::now();
    let hyp = Hypothesis::new(scenario.alpha).unwrap_or_default();
    let outcomes: Vec<[SlotOutcome; 6]> = (0..scenario.replications)
        .into_par_iter()
        .map(|r| replicate(scenario, sigma, &hyp, r))
        .collect();
    let reps = scenario.replications as f64;
    let tallies = SLOTS
        .iter()
        .enumerate()
        .map(|(s, &(method, test))| {
            let count =
                |f: fn(&SlotOutcome) -> bool| outcomes.iter().filter(|o| f(&o[s])).count() as u64;
            let rejections = count(|o| o.reject);
            let rate = rejections as f64 / reps;
            Tally {
                method,
                test,
                rejections,
                failures: count(|o| o.failed),
                flagged: count(|o| o.flagged),
                rate,
                mc_se: (rate * (1.0 - rate) / reps).sqrt(),
            }
        })
        .collect();
    SimulationResult {
        scenario: scenario.clone(),
        tallies,
        wall_clock: start.elapsed(),
    }
}

/// Runs every replicate of `scenario` (in parallel, capped by
/// [`THREADS_ENV`]) and tallies rejections. Replicates that fail are
/// counted, never fatal. Deterministic given the scenario seed.
pub fn run_scenario(scenario: &Scenario) -> Result<SimulationResult> {
    let sigma = scenario.validate()?;
    Ok(with_thread_cap(|| run_validated(scenario, &sigma)))
}

/// Runs scenarios in input order after validating all of them.
pub fn run_grid(scenarios: &[Scenario]) -> Result<Vec<SimulationResult>> {
    let sigmas = scenarios
        .iter()
        .enumerate()
        .map(|(i, s)| {
            s.validate().map_err(|e| match e {
                Error::InvalidScenario { key, reason } => Error::InvalidScenario {
                    key: format!("scenario[{i}].{key}"),
                    reason,
                },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(with_thread_cap(|| {
        scenarios
            .iter()
            .zip(&sigmas)
            .map(|(s, sigma)| run_validated(s, sigma))
            .collect()
    }))
}

/// Seed for scenario `index` of a grid run with `master` (splitmix64 mixing).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        ^ index
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub const BUILTIN_GRIDS: [&str; 5] = ["table3", "table6", "design1", "design2", "design3"];

/// Overrides applied when expanding a built-in grid.
#[derive(Debug, Clone)]
pub struct GridOptions {
    pub replications: usize,
    pub seed: u64,
    /// Restrict the simple-pattern size grid to these dimensions.
    pub dims: Option<Vec<usize>>,
    /// Use a single distribution instead of the grid's default set.
    pub distribution: Option<Distribution>,
    pub alpha: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            replications: DEFAULT_REPLICATIONS,
            seed: 0,
            dims: None,
            distribution: None,
            alpha: 0.05,
        }
    }
}

/// `(n_c, n_1, n_2)` of the four size settings.
pub const SETTINGS: [(usize, usize, usize); 4] =
    [(10, 30, 30), (30, 10, 10), (30, 30, 10), (10, 10, 30)];

const SIGMA_SETS: [[f64; 2]; 2] = [[1.0, 1.0], [1.0, 5.0]];

fn null_rho_sets(dist: Distribution) -> [[f64; 3]; 2] {
    match dist {
        Distribution::DiscretizedNormal | Distribution::Normal => {
            [[0.1, 0.1, 0.1], [0.1, 0.9, 0.5]]
        }
        _ => [[0.1, 0.1, 0.1], [-0.1, -0.1, -0.1]],
    }
}

fn power_rho(dist: Distribution) -> [f64; 3] {
    match dist {
        Distribution::LogNormal => [-0.1, -0.1, -0.1],
        Distribution::Cauchy => [0.1, 0.9, 0.5],
        _ => [0.1, 0.1, 0.1],
    }
}

/// Location shifts of the power grid, `delta (1, k)` plus the `(0, 0.3)` row.
pub const POWER_SHIFTS: [[f64; 2]; 6] = [
    [0.0, 0.3],
    [0.3, 0.3],
    [0.6, 0.6],
    [0.9, 0.9],
    [0.3, 0.6],
    [0.3, 0.9],
];

const DESIGN_DISTRIBUTIONS: [Distribution; 3] = [
    Distribution::DiscretizedNormal,
    Distribution::LogNormal,
    Distribution::Cauchy,
];

const DESIGN_RHO: [[f64; 3]; 2] = [[-0.1, -0.1, -0.1], [0.1, 0.1, 0.1]];

fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    format!("({})", parts.join(","))
}

/// Expands a named built-in grid into scenarios, each with its own seed
/// derived from `opts.seed`.
pub fn builtin_grid(name: &str, opts: &GridOptions) -> Result<Vec<Scenario>> {
    let mut out: Vec<Scenario> = Vec::new();
    let mut push = |label_prefix: String,
                    dist: Distribution,
                    d: usize,
                    rho: [f64; 3],
                    sigma2: [f64; 2],
                    shift: Vec<f64>,
                    layout: Layout| {
        let label = format!(
            "{label_prefix} dist={} d={d} rho={} sigma2={} shift={}",
            dist.name(),
            fmt_list(&rho),
            fmt_list(&sigma2),
            fmt_list(&shift)
        );
        out.push(Scenario {
            label,
            distribution: dist,
            d,
            rho,
            sigma2,
            shift,
            layout,
            replications: opts.replications,
            seed: 0,
            alpha: opts.alpha,
        });
    };
    let simple = |(nc, n1, n2): (usize, usize, usize)| Layout::Simple {
        complete: nc,
        first_only: n1,
        second_only: n2,
    };
    let design_dists: Vec<Distribution> = match opts.distribution {
        Some(d) => vec![d],
        None => DESIGN_DISTRIBUTIONS.to_vec(),
    };
    let check_d2 = || -> Result<()> {
        match &opts.dims {
            Some(dims) if dims.iter().any(|&d| d != 2) => Err(Error::InvalidScenario {
                key: "dims".into(),
                reason: format!("grid '{name}' is defined for d = 2 only"),
            }),
            _ => Ok(()),
        }
    };
    match name {
        "table3" => {
            let dist = opts.distribution.unwrap_or(Distribution::DiscretizedNormal);
            let dims = opts.dims.clone().unwrap_or_else(|| vec![2, 3, 5]);
            if dims.is_empty() || dims.contains(&0) {
                return Err(Error::InvalidScenario {
                    key: "dims".into(),
                    reason: "dimensions must be positive".into(),
                });
            }
            for (s, &setting) in SETTINGS.iter().enumerate() {
                for rho in null_rho_sets(dist) {
                    for &d in &dims {
                        for sigma2 in SIGMA_SETS {
                            push(
                                format!("setting={}", s + 1),
                                dist,
                                d,
                                rho,
                                sigma2,
                                vec![0.0; d],
                                simple(setting),
                            );
                        }
                    }
                }
            }
        }
        "table6" => {
            check_d2()?;
            let dist = opts.distribution.unwrap_or(Distribution::DiscretizedNormal);
            for (s, &setting) in SETTINGS.iter().enumerate() {
                for shift in POWER_SHIFTS {
                    for sigma2 in SIGMA_SETS {
                        push(
                            format!("setting={}", s + 1),
                            dist,
                            2,
                            power_rho(dist),
                            sigma2,
                            shift.to_vec(),
                            simple(setting),
                        );
                    }
                }
            }
        }
        "design1" | "design2" | "design3" => {
            check_d2()?;
            let layouts: Vec<(String, Layout)> = match name {
                "design1" => [75, 150, 300]
                    .into_iter()
                    .map(|n| (format!("n={n}"), Layout::Design1 { n }))
                    .collect(),
                "design2" => [0.2, 0.4, 0.6, 0.8]
                    .into_iter()
                    .map(|a| (format!("n=210 a={a}"), Layout::Design2 { n: 210, a }))
                    .collect(),
                _ => [5, 10, 20]
                    .into_iter()
                    .map(|n1| {
                        (
                            format!("n1={n1}"),
                            Layout::Design3 {
                                complete: n1,
                                others: 100,
                            },
                        )
                    })
                    .collect(),
            };
            for (prefix, layout) in layouts {
                for rho in DESIGN_RHO {
                    for sigma2 in SIGMA_SETS {
                        for &dist in &design_dists {
                            push(
                                prefix.clone(),
                                dist,
                                2,
                                rho,
                                sigma2,
                                vec![0.0; 2],
                                layout.clone(),
                            );
                        }
                    }
                }
            }
        }
        _ => {
            return Err(Error::InvalidScenario {
                key: "builtin".into(),
                reason: format!(
                    "unknown grid '{name}'; valid names: {}",
                    BUILTIN_GRIDS.join(", ")
                ),
            })
        }
    }
    for (i, s) in out.iter_mut().enumerate() {
        s.seed = derive_seed(opts.seed, i as u64);
    }
    Ok(out)
}
