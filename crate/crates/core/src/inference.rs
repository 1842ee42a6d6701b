//! Wald-type and ANOVA-type tests of `H0: p = 1/2` and the per-method
//! analysis driver.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::covariance::{covariance_general, covariance_simple, CovarianceEstimate};
use crate::effects::{estimate_effects, restrict_method, EffectEstimate, Method};
use crate::error::{Error, Result};
use crate::linalg::pseudo_inverse_symmetric;
use crate::model::{Hypothesis, MaskedSample, PatternIndex};
use crate::ranking::{build_rank_table, placements};
use crate::special::chisq_upper_tail;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Wald,
    Anova,
}

impl TestKind {
    pub fn name(self) -> &'static str {
        match self {
            TestKind::Wald => "Qn",
            TestKind::Anova => "Fn",
        }
    }
}

/// Why a report deviates from the textbook computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "flag", rename_all = "snake_case")]
pub enum TestFlag {
    /// The covariance (or its trace) is zero and the effect is exactly 1/2;
    /// the statistic is set to 0 and the p-value to 1.
    DegenerateNull,
    /// Singular covariance; the pseudo-inverse was used and `df = rank`.
    PseudoInverse { rank: usize },
    /// The covariance estimate has a negative eigenvalue.
    IndefiniteCovariance,
    /// A covariance term with a single subject was dropped.
    DegenerateTerm {
        term: String,
        entry: Option<(usize, usize)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub kind: TestKind,
    pub method: Method,
    pub statistic: f64,
    /// `rank(V)` for the Wald test, `nu_hat` for the ANOVA test.
    pub df: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
    pub flags: Vec<TestFlag>,
}

fn inherited_flags(cov: &CovarianceEstimate) -> Vec<TestFlag> {
    cov.flags
        .iter()
        .map(|f| TestFlag::DegenerateTerm {
            term: f.term.clone(),
            entry: f.entry,
        })
        .collect()
}

fn check_shapes(effects: &EffectEstimate, cov: &CovarianceEstimate, n: usize) -> Result<()> {
    if effects.d() != cov.d() {
        return Err(Error::DimensionMismatch(format!(
            "effect has {} components, covariance is {}x{}",
            effects.d(),
            cov.d(),
            cov.d()
        )));
    }
    if n < 2 {
        return Err(Error::DimensionMismatch(format!(
            "at least two subjects are required, got {n}"
        )));
    }
    Ok(())
}

fn at_null(effects: &EffectEstimate) -> bool {
    effects.p_hat.iter().all(|&p| p == Hypothesis::NULL_EFFECT)
}

fn report(
    kind: TestKind,
    effects: &EffectEstimate,
    hyp: &Hypothesis,
    statistic: f64,
    df: f64,
    p_value: f64,
    flags: Vec<TestFlag>,
) -> TestReport {
    TestReport {
        kind,
        method: effects.method,
        statistic,
        df,
        p_value,
        alpha: hyp.alpha(),
        reject: p_value <= hyp.alpha(),
        flags,
    }
}

/// `Q_n = n (p_hat - 1/2)' V^+ (p_hat - 1/2)` against `chi^2_rank(V)`.
pub fn wald_test(
    effects: &EffectEstimate,
    cov: &CovarianceEstimate,
    n: usize,
    hyp: &Hypothesis,
) -> Result<TestReport> {
    check_shapes(effects, cov, n)?;
    let d = effects.d();
    let mut flags = inherited_flags(cov);
    let pinv = pseudo_inverse_symmetric(&cov.matrix());
    if pinv.rank == 0 {
        if at_null(effects) {
            flags.push(TestFlag::DegenerateNull);
            return Ok(report(
                TestKind::Wald,
                effects,
                hyp,
                0.0,
                d as f64,
                1.0,
                flags,
            ));
        }
        return Err(Error::ZeroCovariance);
    }
    if pinv.rank < d {
        flags.push(TestFlag::PseudoInverse { rank: pinv.rank });
    }
    if pinv.indefinite {
        flags.push(TestFlag::IndefiniteCovariance);
    }
    let dev = DVector::from_vec(effects.deviation());
    let q = n as f64 * (dev.transpose() * &pinv.matrix * &dev)[(0, 0)];
    let df = pinv.rank as f64;
    // an indefinite estimate can make the form negative
    let p = if q > 0.0 {
        chisq_upper_tail(q, df)?
    } else {
        1.0
    };
    Ok(report(TestKind::Wald, effects, hyp, q, df, p, flags))
}

/// `F_n = n / tr(V) |p_hat - 1/2|^2` against `F(nu_hat, inf)`, evaluated as
/// `P(chi^2_nu >= nu F_n)`.
pub fn anova_test(
    effects: &EffectEstimate,
    cov: &CovarianceEstimate,
    n: usize,
    hyp: &Hypothesis,
) -> Result<TestReport> {
    check_shapes(effects, cov, n)?;
    let d = effects.d();
    let mut flags = inherited_flags(cov);
    let nu = match cov.nu_hat {
        Some(nu) if cov.trace > 0.0 => nu,
        _ => {
            if at_null(effects) {
                flags.push(TestFlag::DegenerateNull);
                return Ok(report(
                    TestKind::Anova,
                    effects,
                    hyp,
                    0.0,
                    d as f64,
                    1.0,
                    flags,
                ));
            }
            return Err(Error::ZeroTrace);
        }
    };
    let ss: f64 = effects.deviation().iter().map(|x| x * x).sum();
    let f = n as f64 / cov.trace * ss;
    let p = chisq_upper_tail(nu * f, nu)?;
    Ok(report(TestKind::Anova, effects, hyp, f, nu, p, flags))
}

/// Covariance estimator choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PatternChoice {
    /// Three-part estimator when the pattern allows it, nine-term otherwise.
    #[default]
    Auto,
    Simple,
    General,
}

impl PatternChoice {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auto" => Some(Self::Auto),
            "simple" => Some(Self::Simple),
            "general" => Some(Self::General),
            _ => None,
        }
    }
}

/// Outcome of one test for one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TestOutcome {
    Computed(TestReport),
    Skipped { error: String, reason: String },
}

impl TestOutcome {
    fn skipped(e: &Error) -> Self {
        TestOutcome::Skipped {
            error: e.kind().to_string(),
            reason: e.to_string(),
        }
    }

    pub fn report(&self) -> Option<&TestReport> {
        match self {
            TestOutcome::Computed(r) => Some(r),
            TestOutcome::Skipped { .. } => None,
        }
    }
}

/// Everything computed for one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodAnalysis {
    pub method: Method,
    /// Subjects left after restriction; 0 when the restriction failed.
    pub subjects: usize,
    pub effects: Option<EffectEstimate>,
    pub covariance: Option<CovarianceEstimate>,
    pub wald: TestOutcome,
    pub anova: TestOutcome,
}

impl MethodAnalysis {
    fn failed(method: Method, subjects: usize, effects: Option<EffectEstimate>, e: &Error) -> Self {
        Self {
            method,
            subjects,
            effects,
            covariance: None,
            wald: TestOutcome::skipped(e),
            anova: TestOutcome::skipped(e),
        }
    }
}

/// Effects, covariance and both tests for a single method.
pub fn analyze_method(
    sample: &MaskedSample,
    idx: &PatternIndex,
    method: Method,
    pattern: PatternChoice,
    hyp: &Hypothesis,
) -> MethodAnalysis {
    let (s, i) = match restrict_method(sample, idx, method) {
        Ok(r) => r,
        Err(e) => return MethodAnalysis::failed(method, 0, None, &e),
    };
    let n = s.n();
    let ranks = match build_rank_table(&s, &i) {
        Ok(r) => r,
        Err(e) => return MethodAnalysis::failed(method, n, None, &e),
    };
    let effects = match estimate_effects(&s, &i, &ranks) {
        Ok(e) => e.tagged(method),
        Err(e) => return MethodAnalysis::failed(method, n, None, &e),
    };
    let use_simple = match pattern {
        PatternChoice::Auto => i.is_simple_pattern(),
        PatternChoice::Simple => true,
        PatternChoice::General => false,
    };
    let cov = if use_simple {
        covariance_simple(&s, &i, &ranks)
    } else {
        placements(&ranks, &i).and_then(|y| covariance_general(&s, &i, &y))
    };
    let cov = match cov {
        Ok(c) => c,
        Err(e) => return MethodAnalysis::failed(method, n, Some(effects), &e),
    };
    let outcome = |r: Result<TestReport>| match r {
        Ok(r) => TestOutcome::Computed(r),
        Err(e) => TestOutcome::skipped(&e),
    };
    let wald = outcome(wald_test(&effects, &cov, n, hyp));
    let anova = outcome(anova_test(&effects, &cov, n, hyp));
    MethodAnalysis {
        method,
        subjects: n,
        effects: Some(effects),
        covariance: Some(cov),
        wald,
        anova,
    }
}

/// Runs `Q_n` and `F_n` for each requested method. A method whose
/// restriction or covariance is not estimable yields skipped placeholders
/// instead of failing the whole analysis. Asking for the three-part
/// estimator on data that does not have treatment-level missingness is an
/// error.
pub fn run_all_methods(
    sample: &MaskedSample,
    idx: &PatternIndex,
    methods: &[Method],
    pattern: PatternChoice,
    hyp: &Hypothesis,
) -> Result<Vec<MethodAnalysis>> {
    if pattern == PatternChoice::Simple && !idx.is_simple_pattern() {
        return Err(Error::PatternMismatch(
            "the simple covariance estimator needs missingness at treatment level, \
             but the components have different observation patterns"
                .into(),
        ));
    }
    Ok(methods
        .iter()
        .map(|&m| analyze_method(sample, idx, m, pattern, hyp))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{Decomposition, Estimator};
    use crate::effects::ComponentCounts;
    use crate::model::derive_pattern_index;

    fn effects(p: &[f64]) -> EffectEstimate {
        EffectEstimate {
            p_hat: p.to_vec(),
            theta: vec![[1.0, 1.0]; p.len()],
            counts: vec![
                ComponentCounts {
                    n_complete: 10,
                    n_first_only: 0,
                    n_second_only: 0
                };
                p.len()
            ],
            method: Method::All,
        }
    }

    fn cov(rows: Vec<Vec<f64>>) -> CovarianceEstimate {
        let d = rows.len();
        let m = nalgebra::DMatrix::from_fn(d, d, |i, j| rows[i][j]);
        let trace = m.trace();
        let trace_sq = (&m * &m).trace();
        CovarianceEstimate {
            estimator: Estimator::Simple,
            v_hat: rows,
            trace,
            trace_sq,
            nu_hat: (trace_sq > 0.0).then(|| trace * trace / trace_sq),
            decomposition: Decomposition::Terms { entries: vec![] },
            flags: vec![],
        }
    }

    #[test]
    fn wald_identity_example() {
        let r = wald_test(
            &effects(&[0.6, 0.5]),
            &cov(vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
            100,
            &Hypothesis::default(),
        )
        .unwrap();
        assert!((r.statistic - 1.0).abs() < 1e-12);
        assert_eq!(r.df, 2.0);
        assert!((r.p_value - (-0.5f64).exp()).abs() < 1e-12);
        assert!(!r.reject);
    }

    #[test]
    fn null_point() {
        let e = effects(&[0.5, 0.5]);
        let v = cov(vec![vec![2.0, 0.3], vec![0.3, 1.0]]);
        let w = wald_test(&e, &v, 30, &Hypothesis::default()).unwrap();
        let a = anova_test(&e, &v, 30, &Hypothesis::default()).unwrap();
        assert_eq!((w.statistic, w.p_value), (0.0, 1.0));
        assert_eq!((a.statistic, a.p_value), (0.0, 1.0));
    }

    #[test]
    fn rank_one_covariance() {
        let v = cov(vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
        let e = effects(&[0.6, 0.6]);
        let w = wald_test(&e, &v, 50, &Hypothesis::default()).unwrap();
        assert_eq!(w.df, 1.0);
        assert!(w.flags.contains(&TestFlag::PseudoInverse { rank: 1 }));
        // pinv(J) = J/4 and dev' J dev = 0.04
        assert!((w.statistic - 0.5).abs() < 1e-12);
        let a = anova_test(&e, &v, 50, &Hypothesis::default()).unwrap();
        assert!((a.df - 1.0).abs() < 1e-15);
    }

    #[test]
    fn anova_nu_for_identity() {
        let v = cov(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ]);
        let a = anova_test(&effects(&[0.55, 0.5, 0.45]), &v, 40, &Hypothesis::default()).unwrap();
        assert_eq!(a.df, 3.0);
        assert!((a.statistic - 40.0 / 3.0 * 0.005).abs() < 1e-12);
    }

    #[test]
    fn zero_covariance() {
        let v = cov(vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
        let h = Hypothesis::default();
        assert_eq!(
            wald_test(&effects(&[0.6, 0.5]), &v, 10, &h).unwrap_err(),
            Error::ZeroCovariance
        );
        assert_eq!(
            anova_test(&effects(&[0.6, 0.5]), &v, 10, &h).unwrap_err(),
            Error::ZeroTrace
        );
        let w = wald_test(&effects(&[0.5, 0.5]), &v, 10, &h).unwrap();
        assert_eq!(w.p_value, 1.0);
        assert!(w.flags.contains(&TestFlag::DegenerateNull));
    }

    fn full(rows1: &[f64], rows2: &[f64]) -> MaskedSample {
        MaskedSample::from_rows(
            &[rows1.to_vec(), rows2.to_vec()],
            &[vec![true; rows1.len()], vec![true; rows2.len()]],
        )
        .unwrap()
    }

    #[test]
    fn fully_observed_methods() {
        let s = full(&[1.0, 4.0, 2.0, 8.0, 5.0], &[2.0, 6.0, 3.0, 7.0, 9.0]);
        let idx = derive_pattern_index(&s);
        let out = run_all_methods(
            &s,
            &idx,
            &Method::ALL,
            PatternChoice::Auto,
            &Hypothesis::default(),
        )
        .unwrap();
        assert_eq!(out.len(), 3);
        let (all, comp, inc) = (&out[0], &out[1], &out[2]);
        assert_eq!(
            all.wald.report().unwrap().statistic,
            comp.wald.report().unwrap().statistic
        );
        assert_eq!(
            all.anova.report().unwrap().p_value,
            comp.anova.report().unwrap().p_value
        );
        assert!(matches!(
            &inc.wald,
            TestOutcome::Skipped { error, .. } if error == "everything_filtered"
        ));
    }

    #[test]
    fn simple_on_general_pattern_is_rejected() {
        let s = MaskedSample::from_subjects(
            2,
            &[
                vec![Some(1.0), None, Some(3.0), Some(4.0)],
                vec![Some(2.0), Some(2.0), Some(1.0), Some(4.0)],
                vec![Some(0.0), Some(5.0), Some(2.0), Some(3.0)],
            ],
        )
        .unwrap();
        let idx = derive_pattern_index(&s);
        let e = run_all_methods(
            &s,
            &idx,
            &[Method::All],
            PatternChoice::Simple,
            &Hypothesis::default(),
        )
        .unwrap_err();
        assert!(e.to_string().contains("pattern mismatch"));
    }

    #[test]
    fn identical_groups_degenerate_null() {
        let s = full(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]);
        let idx = derive_pattern_index(&s);
        let out = analyze_method(
            &s,
            &idx,
            Method::All,
            PatternChoice::Auto,
            &Hypothesis::default(),
        );
        let w = out.wald.report().unwrap();
        assert_eq!(w.p_value, 1.0);
        assert!(w.flags.contains(&TestFlag::DegenerateNull));
        assert_eq!(out.anova.report().unwrap().p_value, 1.0);
    }
}
