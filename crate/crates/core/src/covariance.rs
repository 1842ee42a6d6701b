//! Covariance of `sqrt(n) (p_hat - p)`: the three-part rank estimator for
//! treatment-level missingness and the nine-term estimator for arbitrary
//! missingness.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Group, MaskedSample, PatternIndex};
use crate::ranking::{Placement, RankTable};

/// Which estimator produced a [`CovarianceEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Simple,
    General,
    /// Built from the true placements; only available to simulations.
    Oracle,
}

/// A variance or covariance term fed by a single subject. Its `e - 1`
/// denominator vanishes, so the term contributes zero.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegenerateTerm {
    /// `complete`, `incomplete_group1`, `incomplete_group2` for the simple
    /// estimator, `c1`..`c9` for the general one.
    pub term: String,
    /// Matrix entry for general terms; `None` when the whole part is affected.
    pub entry: Option<(usize, usize)>,
    pub subjects: usize,
}

/// Signed, scaled contributions of the nine terms to one entry `(row, col)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermEntry {
    pub row: usize,
    pub col: usize,
    pub contributions: [f64; 9],
    pub subjects: [usize; 9],
}

/// The additive pieces the estimate is assembled from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Decomposition {
    Parts {
        complete: Vec<Vec<f64>>,
        incomplete_group1: Vec<Vec<f64>>,
        incomplete_group2: Vec<Vec<f64>>,
    },
    /// Entries with `row <= col`.
    Terms { entries: Vec<TermEntry> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEstimate {
    pub estimator: Estimator,
    pub v_hat: Vec<Vec<f64>>,
    pub trace: f64,
    pub trace_sq: f64,
    /// `tr(V)^2 / tr(V^2)`; `None` when `V = 0`.
    pub nu_hat: Option<f64>,
    pub decomposition: Decomposition,
    pub flags: Vec<DegenerateTerm>,
}

impl CovarianceEstimate {
    fn assemble(
        estimator: Estimator,
        v: DMatrix<f64>,
        decomposition: Decomposition,
        flags: Vec<DegenerateTerm>,
    ) -> Self {
        let trace = v.trace();
        let trace_sq = v.component_mul(&v.transpose()).sum();
        let nu_hat = (trace_sq > 0.0).then(|| trace * trace / trace_sq);
        Self {
            estimator,
            v_hat: rows_of(&v),
            trace,
            trace_sq,
            nu_hat,
            decomposition,
            flags,
        }
    }

    /// Wraps a given symmetric matrix, e.g. one computed elsewhere, so it
    /// can be passed to the tests. Carries no decomposition.
    pub fn from_rows(estimator: Estimator, v_hat: Vec<Vec<f64>>) -> Result<Self> {
        let d = v_hat.len();
        if d == 0 || v_hat.iter().any(|r| r.len() != d) {
            return Err(Error::DimensionMismatch(format!(
                "covariance must be a non-empty square matrix, got {d} rows"
            )));
        }
        if v_hat.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::DomainError(
                "covariance entries must be finite".into(),
            ));
        }
        let v = DMatrix::from_fn(d, d, |i, j| v_hat[i][j]);
        if crate::linalg::asymmetry(&v) > crate::linalg::SYMMETRY_TOL * v.abs().max().max(1.0) {
            return Err(Error::DomainError("covariance must be symmetric".into()));
        }
        Ok(Self::assemble(
            estimator,
            v,
            Decomposition::Terms { entries: vec![] },
            vec![],
        ))
    }

    pub fn d(&self) -> usize {
        self.v_hat.len()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let d = self.d();
        DMatrix::from_fn(d, d, |i, j| self.v_hat[i][j])
    }

    pub fn is_zero(&self) -> bool {
        self.v_hat.iter().flatten().all(|&x| x == 0.0)
    }
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn mean_vector(vs: &[Vec<f64>], d: usize) -> Vec<f64> {
    let mut m = vec![0.0; d];
    if vs.is_empty() {
        return m;
    }
    for v in vs {
        for (a, x) in m.iter_mut().zip(v) {
            *a += x;
        }
    }
    for a in &mut m {
        *a /= vs.len() as f64;
    }
    m
}

/// Rank differences `B = R_overall - R_internal` of the simple pattern,
/// one `d`-vector per subject and set, with their arithmetic means.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredDifferences {
    pub complete_first: Vec<Vec<f64>>,
    pub complete_second: Vec<Vec<f64>>,
    pub first_only: Vec<Vec<f64>>,
    pub second_only: Vec<Vec<f64>>,
    pub mean_complete_first: Vec<f64>,
    pub mean_complete_second: Vec<f64>,
    pub mean_first_only: Vec<f64>,
    pub mean_second_only: Vec<f64>,
}

impl CenteredDifferences {
    pub fn new(ranks: &RankTable, idx: &PatternIndex) -> Result<Self> {
        if !idx.is_simple_pattern() {
            return Err(Error::PatternMismatch(
                "rank differences by subject require missingness at treatment level".into(),
            ));
        }
        let d = idx.d();
        let sets = idx.component(0);
        let collect = |g: Group, subjects: &[usize]| -> Vec<Vec<f64>> {
            subjects
                .iter()
                .map(|&k| {
                    (0..d)
                        .map(|l| ranks.difference(g, l, k).expect("observed cell"))
                        .collect()
                })
                .collect()
        };
        let complete_first = collect(Group::First, &sets.complete);
        let complete_second = collect(Group::Second, &sets.complete);
        let first_only = collect(Group::First, &sets.first_only);
        let second_only = collect(Group::Second, &sets.second_only);
        Ok(Self {
            mean_complete_first: mean_vector(&complete_first, d),
            mean_complete_second: mean_vector(&complete_second, d),
            mean_first_only: mean_vector(&first_only, d),
            mean_second_only: mean_vector(&second_only, d),
            complete_first,
            complete_second,
            first_only,
            second_only,
        })
    }

    /// `(B_2k - mean B_2) - (B_1k - mean B_1)` for every complete case.
    pub fn complete_differences(&self) -> Vec<Vec<f64>> {
        self.complete_first
            .iter()
            .zip(&self.complete_second)
            .map(|(b1, b2)| {
                (0..b1.len())
                    .map(|l| {
                        (b2[l] - self.mean_complete_second[l])
                            - (b1[l] - self.mean_complete_first[l])
                    })
                    .collect()
            })
            .collect()
    }
}

/// `sum_k x_k x_k^T` over already centred vectors.
fn scatter(centered: &[Vec<f64>], d: usize) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(d, d);
    for x in centered {
        for i in 0..d {
            for j in i..d {
                s[(i, j)] += x[i] * x[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            s[(i, j)] = s[(j, i)];
        }
    }
    s
}

fn centred(vs: &[Vec<f64>], mean: &[f64]) -> Vec<Vec<f64>> {
    vs.iter()
        .map(|v| v.iter().zip(mean).map(|(a, m)| a - m).collect())
        .collect()
}

/// Three-part estimator `V = V_c + V_1 + V_2` for missingness at treatment
/// level, computed from rank differences. A part fed by fewer than two
/// subjects is the zero matrix; a single-subject part is flagged.
pub fn covariance_simple(
    _sample: &MaskedSample,
    idx: &PatternIndex,
    ranks: &RankTable,
) -> Result<CovarianceEstimate> {
    let diffs = CenteredDifferences::new(ranks, idx)?;
    let d = idx.d();
    let sets = idx.component(0);
    for g in Group::BOTH {
        if sets.m(g) == 0 {
            return Err(Error::InestimableComponent {
                component: 0,
                group: g.number(),
            });
        }
    }
    let n = idx.n() as f64;
    let (m1, m2) = (sets.m(Group::First) as f64, sets.m(Group::Second) as f64);
    let scale = n / (m1 * m1 * m2 * m2);

    let parts = [
        ("complete", diffs.complete_differences()),
        (
            "incomplete_group1",
            centred(&diffs.first_only, &diffs.mean_first_only),
        ),
        (
            "incomplete_group2",
            centred(&diffs.second_only, &diffs.mean_second_only),
        ),
    ];
    let mut flags = Vec::new();
    let mut matrices = Vec::with_capacity(3);
    let mut estimable = false;
    for (term, vs) in &parts {
        let e = vs.len();
        let part = if e >= 2 {
            estimable = true;
            scatter(vs, d) * (scale * e as f64 / (e - 1) as f64)
        } else {
            if e == 1 {
                flags.push(DegenerateTerm {
                    term: term.to_string(),
                    entry: None,
                    subjects: 1,
                });
            }
            DMatrix::zeros(d, d)
        };
        matrices.push(part);
    }
    if !estimable {
        return Err(Error::NoEstimablePart);
    }
    let v = &matrices[0] + &matrices[1] + &matrices[2];
    let decomposition = Decomposition::Parts {
        complete: rows_of(&matrices[0]),
        incomplete_group1: rows_of(&matrices[1]),
        incomplete_group2: rows_of(&matrices[2]),
    };
    Ok(CovarianceEstimate::assemble(
        Estimator::Simple,
        v,
        decomposition,
        flags,
    ))
}

#[derive(Clone, Copy)]
enum SetKind {
    Complete,
    Second,
    First,
}

/// Order matches the numbering of the nine terms: the term for kinds
/// `(a, b)` is number `3a + b + 1`.
const KINDS: [SetKind; 3] = [SetKind::Complete, SetKind::Second, SetKind::First];

fn intersect(a: &[usize], b: &[usize]) -> Vec<usize> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

struct ComponentTerms<'a> {
    idx: &'a PatternIndex,
    l: usize,
}

impl ComponentTerms<'_> {
    fn set(&self, kind: SetKind) -> &[usize] {
        let c = self.idx.component(self.l);
        match kind {
            SetKind::Complete => &c.complete,
            SetKind::Second => &c.second_only,
            SetKind::First => &c.first_only,
        }
    }

    fn sign(kind: SetKind) -> f64 {
        match kind {
            SetKind::First => -1.0,
            _ => 1.0,
        }
    }

    fn denominator(&self, kind: SetKind) -> f64 {
        let c = self.idx.component(self.l);
        match kind {
            SetKind::Complete => c.n_complete() as f64,
            SetKind::Second => c.m(Group::Second) as f64,
            SetKind::First => c.m(Group::First) as f64,
        }
    }

    fn value(&self, kind: SetKind, k: usize, place: &dyn Fn(Group, usize, usize) -> f64) -> f64 {
        let c = self.idx.component(self.l);
        match kind {
            SetKind::Complete => {
                c.theta(Group::Second) * place(Group::Second, self.l, k)
                    - c.theta(Group::First) * place(Group::First, self.l, k)
            }
            SetKind::Second => place(Group::Second, self.l, k),
            SetKind::First => place(Group::First, self.l, k),
        }
    }
}

/// Nine-term assembly with placements supplied by `place(g, l, k)`.
fn assemble_terms(
    idx: &PatternIndex,
    place: &dyn Fn(Group, usize, usize) -> f64,
    estimator: Estimator,
) -> CovarianceEstimate {
    let d = idx.d();
    let n = idx.n() as f64;
    let mut v = DMatrix::zeros(d, d);
    let mut entries = Vec::with_capacity(d * (d + 1) / 2);
    let mut flags = Vec::new();
    for l in 0..d {
        let left = ComponentTerms { idx, l };
        for r in l..d {
            let right = ComponentTerms { idx, l: r };
            let mut contributions = [0.0; 9];
            let mut subjects = [0usize; 9];
            for (a, &ka) in KINDS.iter().enumerate() {
                for (b, &kb) in KINDS.iter().enumerate() {
                    let j = 3 * a + b;
                    let common = intersect(left.set(ka), right.set(kb));
                    let e = common.len();
                    subjects[j] = e;
                    if e == 1 {
                        flags.push(DegenerateTerm {
                            term: format!("c{}", j + 1),
                            entry: Some((l, r)),
                            subjects: 1,
                        });
                    }
                    if e < 2 {
                        continue;
                    }
                    let xs: Vec<f64> = common.iter().map(|&k| left.value(ka, k, place)).collect();
                    let ys: Vec<f64> = common.iter().map(|&k| right.value(kb, k, place)).collect();
                    let mx = xs.iter().sum::<f64>() / e as f64;
                    let my = ys.iter().sum::<f64>() / e as f64;
                    let s: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
                    let c_hat = e as f64 / (e - 1) as f64 * s;
                    contributions[j] = n * ComponentTerms::sign(ka) * ComponentTerms::sign(kb)
                        / (left.denominator(ka) * right.denominator(kb))
                        * c_hat;
                }
            }
            let total: f64 = contributions.iter().sum();
            v[(l, r)] = total;
            v[(r, l)] = total;
            entries.push(TermEntry {
                row: l,
                col: r,
                contributions,
                subjects,
            });
        }
    }
    CovarianceEstimate::assemble(estimator, v, Decomposition::Terms { entries }, flags)
}

/// Nine-term estimator for arbitrary missingness. Each term is the
/// empirical covariance over the subjects shared by the two index sets
/// involved, centred within that intersection and scaled by `e / (e - 1)`;
/// terms over fewer than two subjects vanish. Not forced to be PSD.
pub fn covariance_general(
    _sample: &MaskedSample,
    idx: &PatternIndex,
    placements: &Placement,
) -> Result<CovarianceEstimate> {
    for (l, c) in idx.components().iter().enumerate() {
        for g in Group::BOTH {
            if c.m(g) == 0 {
                return Err(Error::InestimableComponent {
                    component: l,
                    group: g.number(),
                });
            }
        }
    }
    let place = |g: Group, l: usize, k: usize| placements.value(g, l, k);
    Ok(assemble_terms(idx, &place, Estimator::General))
}

/// The same nine-term assembly evaluated at the true placements
/// `Y = F_s(X)`, where `cdf(s, l, x)` is the (normalized) distribution
/// function of group `s` on component `l`. Only a data generator knows it.
pub fn covariance_oracle_unobservable(
    sample: &MaskedSample,
    idx: &PatternIndex,
    cdf: impl Fn(Group, usize, f64) -> f64,
) -> Result<CovarianceEstimate> {
    let place = |g: Group, l: usize, k: usize| cdf(g.other(), l, sample.value(g, l, k));
    Ok(assemble_terms(idx, &place, Estimator::Oracle))
}
