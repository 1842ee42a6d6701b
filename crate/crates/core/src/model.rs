//! Observation matrix with missingness and the per-component index sets
//! derived from it.
//!
//! A sample is a `2d x n` matrix: rows `0..d` hold the components measured
//! under treatment 1, rows `d..2d` the same components under treatment 2,
//! and every column is one subject. Component and subject indices are
//! zero-based throughout the crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Value stored in masked cells. NaN propagates through any arithmetic, so
/// an accidental read of a missing cell cannot go unnoticed.
const MASKED: f64 = f64::NAN;

/// Treatment group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    First,
    Second,
}

impl Group {
    pub const BOTH: [Group; 2] = [Group::First, Group::Second];

    pub fn other(self) -> Group {
        match self {
            Group::First => Group::Second,
            Group::Second => Group::First,
        }
    }

    /// 1 or 2, for messages and reports.
    pub fn number(self) -> usize {
        match self {
            Group::First => 1,
            Group::Second => 2,
        }
    }
}

/// Validated `2d x n` observation matrix with an observedness mask.
#[derive(Debug, Clone)]
pub struct MaskedSample {
    d: usize,
    n: usize,
    values: Vec<f64>,
    observed: Vec<bool>,
}

impl MaskedSample {
    /// Builds a sample from row-major `values` and `observed`, both of length
    /// `2d * n`.
    pub fn new(d: usize, n: usize, mut values: Vec<f64>, observed: Vec<bool>) -> Result<Self> {
        if d == 0 {
            return Err(Error::DimensionMismatch("d must be at least 1".into()));
        }
        if n < 2 {
            return Err(Error::DimensionMismatch(format!(
                "at least two subjects are required, got {n}"
            )));
        }
        let cells = 2 * d * n;
        if values.len() != cells || observed.len() != cells {
            return Err(Error::DimensionMismatch(format!(
                "expected {cells} cells for d={d}, n={n}; got {} values and {} flags",
                values.len(),
                observed.len()
            )));
        }
        for col in 0..n {
            let mut any = false;
            for row in 0..2 * d {
                let i = row * n + col;
                if observed[i] {
                    any = true;
                    if !values[i].is_finite() {
                        return Err(Error::NonFiniteObservedValue { row, col });
                    }
                } else {
                    values[i] = MASKED;
                }
            }
            if !any {
                return Err(Error::EmptySubject(col));
            }
        }
        Ok(Self {
            d,
            n,
            values,
            observed,
        })
    }

    /// Builds a sample from `2d` rows of `n` values and a matching mask.
    pub fn from_rows(values: &[Vec<f64>], observed: &[Vec<bool>]) -> Result<Self> {
        if values.is_empty() || !values.len().is_multiple_of(2) {
            return Err(Error::DimensionMismatch(format!(
                "row count must be a positive even number 2d, got {}",
                values.len()
            )));
        }
        if observed.len() != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} value rows but {} mask rows",
                values.len(),
                observed.len()
            )));
        }
        let n = values[0].len();
        for (r, (v, o)) in values.iter().zip(observed).enumerate() {
            if v.len() != n || o.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "row {r} has {} values and {} flags, expected {n}",
                    v.len(),
                    o.len()
                )));
            }
        }
        let d = values.len() / 2;
        Self::new(
            d,
            n,
            values.iter().flatten().copied().collect(),
            observed.iter().flatten().copied().collect(),
        )
    }

    /// Builds a sample from `2d` rows where `None` marks a missing cell.
    pub fn from_option_rows(rows: &[Vec<Option<f64>>]) -> Result<Self> {
        let values: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().map(|v| v.unwrap_or(MASKED)).collect())
            .collect();
        let observed: Vec<Vec<bool>> = rows
            .iter()
            .map(|r| r.iter().map(Option::is_some).collect())
            .collect();
        Self::from_rows(&values, &observed)
    }

    /// Builds a sample from one record per subject, each holding the `2d`
    /// cells `g1_var1..g1_vard, g2_var1..g2_vard`.
    pub fn from_subjects(d: usize, subjects: &[Vec<Option<f64>>]) -> Result<Self> {
        let n = subjects.len();
        let mut values = vec![MASKED; 2 * d * n];
        let mut observed = vec![false; 2 * d * n];
        for (col, s) in subjects.iter().enumerate() {
            if s.len() != 2 * d {
                return Err(Error::DimensionMismatch(format!(
                    "subject {col} has {} cells, expected {}",
                    s.len(),
                    2 * d
                )));
            }
            for (row, cell) in s.iter().enumerate() {
                if let Some(v) = cell {
                    values[row * n + col] = *v;
                    observed[row * n + col] = true;
                }
            }
        }
        Self::new(d, n, values, observed)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, group: Group, component: usize) -> usize {
        debug_assert!(component < self.d);
        match group {
            Group::First => component,
            Group::Second => self.d + component,
        }
    }

    pub fn is_observed(&self, group: Group, component: usize, subject: usize) -> bool {
        self.observed[self.row(group, component) * self.n + subject]
    }

    /// The cell value, or `None` when the cell is masked.
    pub fn get(&self, group: Group, component: usize, subject: usize) -> Option<f64> {
        let i = self.row(group, component) * self.n + subject;
        self.observed[i].then(|| self.values[i])
    }

    /// Value of a cell the caller knows to be observed.
    pub(crate) fn value(&self, group: Group, component: usize, subject: usize) -> f64 {
        let i = self.row(group, component) * self.n + subject;
        debug_assert!(self.observed[i], "read of masked cell");
        self.values[i]
    }

    /// Observed values of one (group, component) row, in subject order.
    pub fn observed_values(&self, group: Group, component: usize) -> Vec<f64> {
        (0..self.n)
            .filter_map(|k| self.get(group, component, k))
            .collect()
    }

    /// Row-major mask, `2d x n`.
    pub fn mask(&self) -> &[bool] {
        &self.observed
    }

    /// Cells of one subject in `g1_var1..g1_vard, g2_var1..g2_vard` order.
    pub fn subject(&self, col: usize) -> Vec<Option<f64>> {
        (0..2 * self.d)
            .map(|row| {
                let i = row * self.n + col;
                self.observed[i].then(|| self.values[i])
            })
            .collect()
    }

    /// Sample with the two treatment groups exchanged.
    pub fn swap_groups(&self) -> Self {
        let rows = 2 * self.d;
        let mut values = Vec::with_capacity(self.values.len());
        let mut observed = Vec::with_capacity(self.observed.len());
        for r in 0..rows {
            let src = (r + self.d) % rows;
            values.extend_from_slice(&self.values[src * self.n..(src + 1) * self.n]);
            observed.extend_from_slice(&self.observed[src * self.n..(src + 1) * self.n]);
        }
        Self {
            d: self.d,
            n: self.n,
            values,
            observed,
        }
    }

    /// Sample with columns reordered so that new column `j` is old column
    /// `order[j]`.
    pub fn permute_subjects(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n {
            return Err(Error::DimensionMismatch("permutation length".into()));
        }
        let subjects: Vec<_> = order.iter().map(|&c| self.subject(c)).collect();
        Self::from_subjects(self.d, &subjects)
    }

    /// Applies `f` to every observed value of `component` in both groups.
    pub fn map_component(&self, component: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let mut values = self.values.clone();
        for g in Group::BOTH {
            let r = self.row(g, component);
            for k in 0..self.n {
                let i = r * self.n + k;
                if self.observed[i] {
                    values[i] = f(values[i]);
                }
            }
        }
        Self::new(self.d, self.n, values, self.observed.clone())
    }

    /// Masks the cells for which `keep` returns false and drops subjects left
    /// without any observation. Returns `None` when fewer than two subjects
    /// remain.
    pub(crate) fn filter_cells(&self, keep: impl Fn(Group, usize, usize) -> bool) -> Option<Self> {
        let mut subjects = Vec::new();
        for k in 0..self.n {
            let mut cells = self.subject(k);
            for g in Group::BOTH {
                for l in 0..self.d {
                    if !keep(g, l, k) {
                        cells[self.row(g, l)] = None;
                    }
                }
            }
            if cells.iter().any(Option::is_some) {
                subjects.push(cells);
            }
        }
        Self::from_subjects(self.d, &subjects).ok()
    }
}

impl PartialEq for MaskedSample {
    /// Equal shape, mask and observed values; masked cells are ignored.
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d
            && self.n == other.n
            && self.observed == other.observed
            && self
                .values
                .iter()
                .zip(&other.values)
                .zip(&self.observed)
                .all(|((a, b), &o)| !o || a == b)
    }
}

/// Index sets and counts for one component.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentPattern {
    /// Subjects observed on this component in both groups.
    pub complete: Vec<usize>,
    /// Subjects observed on this component in group 1 only.
    pub first_only: Vec<usize>,
    /// Subjects observed on this component in group 2 only.
    pub second_only: Vec<usize>,
}

impl ComponentPattern {
    pub fn n_complete(&self) -> usize {
        self.complete.len()
    }

    /// Incomplete count `n_g`.
    pub fn n_incomplete(&self, group: Group) -> usize {
        self.incomplete(group).len()
    }

    pub fn incomplete(&self, group: Group) -> &[usize] {
        match group {
            Group::First => &self.first_only,
            Group::Second => &self.second_only,
        }
    }

    /// Observations of `group` on this component, `m_g = n_c + n_g`.
    pub fn m(&self, group: Group) -> usize {
        self.n_complete() + self.n_incomplete(group)
    }

    /// Pooled observation count `N = 2 n_c + n_1 + n_2`.
    pub fn total(&self) -> usize {
        2 * self.n_complete() + self.first_only.len() + self.second_only.len()
    }

    /// Weight of the complete cases in the group-`g` distribution function.
    /// Defined as 1 when the group has no incomplete cases, so an empty
    /// incomplete part never contributes.
    pub fn theta(&self, group: Group) -> f64 {
        let m = self.m(group);
        if self.n_incomplete(group) == 0 || m == 0 {
            1.0
        } else {
            self.n_complete() as f64 / m as f64
        }
    }
}

/// Per-component complete / incomplete index sets derived from the mask.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternIndex {
    n: usize,
    components: Vec<ComponentPattern>,
    simple: bool,
}

impl PatternIndex {
    pub fn d(&self) -> usize {
        self.components.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn component(&self, l: usize) -> &ComponentPattern {
        &self.components[l]
    }

    pub fn components(&self) -> &[ComponentPattern] {
        &self.components
    }

    /// True when complete and incomplete sets coincide across components
    /// (missingness at treatment level only).
    pub fn is_simple_pattern(&self) -> bool {
        self.simple
    }
}

/// Derives the per-component index sets from the mask of `sample`.
pub fn derive_pattern_index(sample: &MaskedSample) -> PatternIndex {
    let components: Vec<ComponentPattern> = (0..sample.d())
        .map(|l| {
            let mut p = ComponentPattern {
                complete: Vec::new(),
                first_only: Vec::new(),
                second_only: Vec::new(),
            };
            for k in 0..sample.n() {
                match (
                    sample.is_observed(Group::First, l, k),
                    sample.is_observed(Group::Second, l, k),
                ) {
                    (true, true) => p.complete.push(k),
                    (true, false) => p.first_only.push(k),
                    (false, true) => p.second_only.push(k),
                    (false, false) => {}
                }
            }
            p
        })
        .collect();
    let simple = components.windows(2).all(|w| w[0] == w[1]);
    PatternIndex {
        n: sample.n(),
        components,
        simple,
    }
}

/// Null hypothesis of no treatment effect, `p = 1/2` on every component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    alpha: f64,
}

impl Hypothesis {
    pub const NULL_EFFECT: f64 = 0.5;

    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(Self { alpha })
        } else {
            Err(Error::DomainError(format!(
                "significance level must lie in (0, 1), got {alpha}"
            )))
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl Default for Hypothesis {
    fn default() -> Self {
        Self { alpha: 0.05 }
    }
}

/// Advisory note about sample sizes that are too small for the asymptotics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AssumptionWarning {
    /// `m_g = n_c + n_g` below the configured floor.
    SmallGroup {
        group: usize,
        component: usize,
        observations: usize,
        floor: usize,
    },
    /// Exactly one subject feeds a variance term, so its `n - 1` denominator
    /// vanishes and the term is dropped from the covariance.
    DegenerateVarianceTerm {
        /// "complete", "incomplete_group1" or "incomplete_group2".
        term: String,
        component: usize,
    },
}

impl std::fmt::Display for AssumptionWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AssumptionWarning::SmallGroup {
                group,
                component,
                observations,
                floor,
            } => write!(
                f,
                "group {group}, component {component}: only {observations} observations (floor {floor})"
            ),
            AssumptionWarning::DegenerateVarianceTerm { term, component } => write!(
                f,
                "component {component}: {term} variance term has a single subject and is dropped"
            ),
        }
    }
}

pub const DEFAULT_SIZE_FLOOR: usize = 5;

/// Lists sample-size conditions under which the large-sample theory is
/// doubtful. Never fails.
pub fn check_assumptions(idx: &PatternIndex, floor: usize) -> Vec<AssumptionWarning> {
    let mut out = Vec::new();
    for (l, c) in idx.components().iter().enumerate() {
        for g in Group::BOTH {
            let m = c.m(g);
            if m < floor {
                out.push(AssumptionWarning::SmallGroup {
                    group: g.number(),
                    component: l,
                    observations: m,
                    floor,
                });
            }
        }
        let terms = [
            ("complete", c.n_complete()),
            ("incomplete_group1", c.n_incomplete(Group::First)),
            ("incomplete_group2", c.n_incomplete(Group::Second)),
        ];
        for (term, count) in terms {
            if count == 1 {
                out.push(AssumptionWarning::DegenerateVarianceTerm {
                    term: term.to_string(),
                    component: l,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table1(nc: usize, n1: usize, n2: usize, d: usize) -> MaskedSample {
        let mut subjects = Vec::new();
        let mut v = 0.0;
        for (a, b, count) in [(true, true, nc), (true, false, n1), (false, true, n2)] {
            for _ in 0..count {
                let mut s = Vec::new();
                for obs in [a, b] {
                    for _ in 0..d {
                        v += 1.0;
                        s.push(obs.then_some(v));
                    }
                }
                subjects.push(s);
            }
        }
        MaskedSample::from_subjects(d, &subjects).unwrap()
    }

    #[test]
    fn fully_observed_two_by_two() {
        let s = MaskedSample::from_rows(
            &[vec![1.0, 3.0], vec![2.0, 4.0]],
            &[vec![true, true], vec![true, true]],
        )
        .unwrap();
        assert_eq!((s.d(), s.n()), (1, 2));
        let idx = derive_pattern_index(&s);
        assert!(idx.is_simple_pattern());
        assert_eq!(idx.component(0).complete, vec![0, 1]);
        assert_eq!(idx.component(0).n_incomplete(Group::First), 0);
        assert_eq!(idx.component(0).n_incomplete(Group::Second), 0);
    }

    #[test]
    fn empty_column_rejected() {
        let e = MaskedSample::from_rows(
            &[vec![1.0, 3.0, 0.0], vec![2.0, 4.0, 0.0]],
            &[vec![true, true, false], vec![true, true, false]],
        )
        .unwrap_err();
        assert_eq!(e, Error::EmptySubject(2));
    }

    #[test]
    fn non_finite_observed_rejected() {
        let e = MaskedSample::from_rows(
            &[vec![1.0, f64::INFINITY], vec![2.0, 4.0]],
            &[vec![true, true], vec![true, true]],
        )
        .unwrap_err();
        assert_eq!(e, Error::NonFiniteObservedValue { row: 0, col: 1 });
        // non-finite values in masked cells are fine
        MaskedSample::from_rows(
            &[vec![1.0, f64::NAN], vec![2.0, 4.0]],
            &[vec![true, false], vec![true, true]],
        )
        .unwrap();
    }

    #[test]
    fn dimension_checks() {
        assert!(matches!(
            MaskedSample::from_rows(&[vec![1.0, 2.0]], &[vec![true, true]]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            MaskedSample::from_rows(&[vec![1.0], vec![2.0]], &[vec![true], vec![true]]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            MaskedSample::new(1, 2, vec![1.0; 4], vec![true; 3]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn masked_cells_are_poisoned() {
        let s =
            MaskedSample::from_option_rows(&[vec![Some(1.0), None], vec![Some(2.0), Some(3.0)]])
                .unwrap();
        assert!(s.values[1].is_nan());
        assert_eq!(s.get(Group::First, 0, 1), None);
    }

    #[test]
    fn table1_layout() {
        // subject 0 complete, 1 group-1 only, 2 group-2 only
        let s = MaskedSample::from_subjects(
            2,
            &[
                vec![Some(1.0), Some(2.0), Some(3.0), Some(4.0)],
                vec![Some(1.0), Some(2.0), None, None],
                vec![None, None, Some(3.0), Some(4.0)],
            ],
        )
        .unwrap();
        let idx = derive_pattern_index(&s);
        for l in 0..2 {
            let c = idx.component(l);
            assert_eq!(c.complete, vec![0]);
            assert_eq!(c.first_only, vec![1]);
            assert_eq!(c.second_only, vec![2]);
        }
        assert!(idx.is_simple_pattern());
    }

    #[test]
    fn crossed_cells_land_in_single_sets() {
        // subject 0 observed on (g1, var1) and (g2, var2) only
        let s = MaskedSample::from_subjects(
            2,
            &[
                vec![Some(1.0), None, None, Some(4.0)],
                vec![Some(1.0), Some(2.0), Some(3.0), Some(4.0)],
            ],
        )
        .unwrap();
        let idx = derive_pattern_index(&s);
        assert_eq!(idx.component(0).first_only, vec![0]);
        assert_eq!(idx.component(0).second_only, Vec::<usize>::new());
        assert_eq!(idx.component(1).second_only, vec![0]);
        assert_eq!(idx.component(1).first_only, Vec::<usize>::new());
        assert!(!idx.component(0).complete.contains(&0));
        assert!(!idx.component(1).complete.contains(&0));
        assert!(!idx.is_simple_pattern());
    }

    #[test]
    fn neither_group_observed_is_in_no_set() {
        let s = MaskedSample::from_subjects(
            2,
            &[
                vec![None, Some(2.0), None, Some(4.0)],
                vec![Some(1.0), Some(2.0), Some(3.0), Some(4.0)],
            ],
        )
        .unwrap();
        let c = derive_pattern_index(&s).component(0).clone();
        assert_eq!(c.complete, vec![1]);
        assert!(c.first_only.is_empty() && c.second_only.is_empty());
    }

    #[test]
    fn assumption_warnings() {
        let idx = derive_pattern_index(&table1(33, 8, 1, 3));
        let w = check_assumptions(&idx, DEFAULT_SIZE_FLOOR);
        assert_eq!(w.len(), 3);
        assert!(w.iter().all(|w| matches!(
            w,
            AssumptionWarning::DegenerateVarianceTerm { term, .. } if term == "incomplete_group2"
        )));

        let idx = derive_pattern_index(&table1(10, 3, 3, 2));
        assert!(check_assumptions(&idx, DEFAULT_SIZE_FLOOR).is_empty());

        let idx = derive_pattern_index(&table1(2, 4, 1, 1));
        let w = check_assumptions(&idx, DEFAULT_SIZE_FLOOR);
        assert!(w.contains(&AssumptionWarning::SmallGroup {
            group: 2,
            component: 0,
            observations: 3,
            floor: 5
        }));
        assert_eq!(
            w.iter()
                .filter(|w| matches!(w, AssumptionWarning::SmallGroup { .. }))
                .count(),
            1
        );
    }

    #[test]
    fn hypothesis_alpha_range() {
        assert!(Hypothesis::new(0.0).is_err());
        assert!(Hypothesis::new(1.0).is_err());
        assert_eq!(Hypothesis::new(0.01).unwrap().alpha(), 0.01);
        assert_eq!(Hypothesis::default().alpha(), 0.05);
    }

    #[test]
    fn swap_groups_exchanges_rows() {
        let s = table1(2, 1, 0, 2);
        let t = s.swap_groups();
        assert_eq!(t.get(Group::Second, 1, 2), s.get(Group::First, 1, 2));
        assert_eq!(t.get(Group::First, 0, 2), None);
        assert_eq!(t.swap_groups(), s);
    }
}
