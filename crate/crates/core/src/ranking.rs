//! Midranks, overall / internal rank tables and empirical placements.

use crate::error::{Error, Result};
use crate::model::{Group, MaskedSample, PatternIndex};

/// Midranks of `values`: tied values share the average of the positions they
/// occupy. Equivalent to `r_i = 1/2 + sum_j c(x_i - x_j)` with the
/// normalized count function `c`, computed by sorting.
///
/// Ties are detected by exact floating-point equality.
pub fn midranks(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let v = values[order[start]];
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == v {
            end += 1;
        }
        // positions start+1 ..= end share their mean
        let r = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = r;
        }
        start = end;
    }
    Ok(ranks)
}

/// Overall and internal midranks for every observed cell.
#[derive(Debug, Clone)]
pub struct RankTable {
    d: usize,
    n: usize,
    overall: Vec<f64>,
    internal: Vec<f64>,
}

impl RankTable {
    fn slot(&self, group: Group, component: usize, subject: usize) -> usize {
        let row = match group {
            Group::First => component,
            Group::Second => self.d + component,
        };
        row * self.n + subject
    }

    /// Rank among all observed values of the component, both groups pooled.
    pub fn overall(&self, group: Group, component: usize, subject: usize) -> Option<f64> {
        let v = self.overall[self.slot(group, component, subject)];
        (!v.is_nan()).then_some(v)
    }

    /// Rank among the observed values of the component within `group`.
    pub fn internal(&self, group: Group, component: usize, subject: usize) -> Option<f64> {
        let v = self.internal[self.slot(group, component, subject)];
        (!v.is_nan()).then_some(v)
    }

    /// `B = R_overall - R_internal` for an observed cell.
    pub fn difference(&self, group: Group, component: usize, subject: usize) -> Option<f64> {
        let i = self.slot(group, component, subject);
        let v = self.overall[i] - self.internal[i];
        (!v.is_nan()).then_some(v)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// Ranks every observed cell of `sample`, component by component.
pub fn build_rank_table(sample: &MaskedSample, idx: &PatternIndex) -> Result<RankTable> {
    let (d, n) = (sample.d(), sample.n());
    let mut table = RankTable {
        d,
        n,
        overall: vec![f64::NAN; 2 * d * n],
        internal: vec![f64::NAN; 2 * d * n],
    };
    for l in 0..d {
        if idx.component(l).total() == 0 {
            return Err(Error::ComponentWithNoData(l));
        }
        let mut pooled = Vec::new();
        let mut cells = Vec::new();
        for g in Group::BOTH {
            let subjects: Vec<usize> = (0..n).filter(|&k| sample.is_observed(g, l, k)).collect();
            if subjects.is_empty() {
                continue;
            }
            let vals: Vec<f64> = subjects.iter().map(|&k| sample.value(g, l, k)).collect();
            for (&k, r) in subjects.iter().zip(midranks(&vals)?) {
                let s = table.slot(g, l, k);
                table.internal[s] = r;
            }
            for (&k, v) in subjects.iter().zip(vals) {
                pooled.push(v);
                cells.push(table.slot(g, l, k));
            }
        }
        for (s, r) in cells.into_iter().zip(midranks(&pooled)?) {
            table.overall[s] = r;
        }
    }
    Ok(table)
}

/// Empirical distribution function of the opposite group evaluated at each
/// observed cell.
#[derive(Debug, Clone)]
pub struct Placement {
    d: usize,
    n: usize,
    values: Vec<f64>,
}

impl Placement {
    pub fn get(&self, group: Group, component: usize, subject: usize) -> Option<f64> {
        let row = match group {
            Group::First => component,
            Group::Second => self.d + component,
        };
        let v = self.values[row * self.n + subject];
        (!v.is_nan()).then_some(v)
    }

    pub(crate) fn value(&self, group: Group, component: usize, subject: usize) -> f64 {
        let v = self.get(group, component, subject);
        debug_assert!(v.is_some(), "placement of a masked cell");
        v.unwrap_or(f64::NAN)
    }
}

/// Placements `Y = (R_overall - R_internal) / m_s`, `s` the other group.
pub fn placements(ranks: &RankTable, idx: &PatternIndex) -> Result<Placement> {
    let (d, n) = (ranks.d, ranks.n);
    let mut values = vec![f64::NAN; 2 * d * n];
    for l in 0..d {
        let c = idx.component(l);
        for g in Group::BOTH {
            let m_other = c.m(g.other());
            let row = match g {
                Group::First => l,
                Group::Second => d + l,
            };
            for k in 0..n {
                if let Some(b) = ranks.difference(g, l, k) {
                    if m_other == 0 {
                        return Err(Error::ComponentWithNoData(l));
                    }
                    values[row * n + k] = b / m_other as f64;
                }
            }
        }
    }
    Ok(Placement { d, n, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::derive_pattern_index;
    use proptest::prelude::*;

    fn count_fn(x: f64) -> f64 {
        if x > 0.0 {
            1.0
        } else if x == 0.0 {
            0.5
        } else {
            0.0
        }
    }

    /// `1/2 + sum_j c(x_i - x_j)`, the definition.
    fn brute_ranks(v: &[f64]) -> Vec<f64> {
        v.iter()
            .map(|&x| 0.5 + v.iter().map(|&y| count_fn(x - y)).sum::<f64>())
            .collect()
    }

    #[test]
    fn midrank_examples() {
        assert_eq!(midranks(&[2.0, 2.0, 5.0]).unwrap(), vec![1.5, 1.5, 3.0]);
        assert_eq!(midranks(&[7.0]).unwrap(), vec![1.0]);
        assert_eq!(midranks(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(midranks(&[]), Err(Error::EmptyInput));
    }

    #[test]
    fn rank_table_distinct_values() {
        let s = MaskedSample::from_rows(
            &[vec![1.0, 3.0], vec![2.0, 4.0]],
            &[vec![true; 2], vec![true; 2]],
        )
        .unwrap();
        let idx = derive_pattern_index(&s);
        let t = build_rank_table(&s, &idx).unwrap();
        assert_eq!(t.overall(Group::First, 0, 0), Some(1.0));
        assert_eq!(t.overall(Group::First, 0, 1), Some(3.0));
        assert_eq!(t.overall(Group::Second, 0, 0), Some(2.0));
        assert_eq!(t.overall(Group::Second, 0, 1), Some(4.0));
        for g in Group::BOTH {
            assert_eq!(t.internal(g, 0, 0), Some(1.0));
            assert_eq!(t.internal(g, 0, 1), Some(2.0));
        }

        let y = placements(&t, &idx).unwrap();
        assert_eq!(y.get(Group::Second, 0, 0), Some(0.5));
        assert_eq!(y.get(Group::Second, 0, 1), Some(1.0));
        assert_eq!(y.get(Group::First, 0, 0), Some(0.0));
        assert_eq!(y.get(Group::First, 0, 1), Some(0.5));
    }

    #[test]
    fn total_tie() {
        let s = MaskedSample::from_rows(
            &[vec![4.0; 3], vec![4.0; 3]],
            &[vec![true; 3], vec![true, false, true]],
        )
        .unwrap();
        let idx = derive_pattern_index(&s);
        let t = build_rank_table(&s, &idx).unwrap();
        for g in Group::BOTH {
            for k in 0..3 {
                if let Some(r) = t.overall(g, 0, k) {
                    assert_eq!(r, 3.0);
                }
            }
        }
        assert_eq!(t.overall(Group::Second, 0, 1), None);
        let y = placements(&t, &idx).unwrap();
        assert_eq!(y.get(Group::First, 0, 0), Some(0.5));
    }

    #[test]
    fn separated_groups() {
        let s = MaskedSample::from_option_rows(&[
            vec![Some(1.0), Some(2.0), Some(0.5), None],
            vec![Some(10.0), Some(11.0), None, Some(12.0)],
        ])
        .unwrap();
        let idx = derive_pattern_index(&s);
        let y = placements(&build_rank_table(&s, &idx).unwrap(), &idx).unwrap();
        for k in [0, 1, 3] {
            assert_eq!(y.get(Group::Second, 0, k), Some(1.0));
        }
        for k in [0, 1, 2] {
            assert_eq!(y.get(Group::First, 0, k), Some(0.0));
        }
    }

    #[test]
    fn one_sided_component_is_reported() {
        // group 2 never observed on component 0
        let s = MaskedSample::from_option_rows(&[
            vec![Some(1.0), Some(2.0)],
            vec![Some(1.0), Some(2.0)],
            vec![None, None],
            vec![Some(3.0), Some(1.0)],
        ])
        .unwrap();
        let idx = derive_pattern_index(&s);
        let t = build_rank_table(&s, &idx).unwrap();
        assert_eq!(
            placements(&t, &idx).unwrap_err(),
            Error::ComponentWithNoData(0)
        );
    }

    proptest! {
        #[test]
        fn midranks_match_definition(v in prop::collection::vec(0i32..6, 1..40)) {
            let x: Vec<f64> = v.iter().map(|&a| a as f64).collect();
            prop_assert_eq!(midranks(&x).unwrap(), brute_ranks(&x));
        }

        #[test]
        fn midranks_permutation_equivariant(
            v in prop::collection::vec(-5i32..5, 1..30),
            seed in any::<u64>(),
        ) {
            let x: Vec<f64> = v.iter().map(|&a| a as f64).collect();
            let mut perm: Vec<usize> = (0..x.len()).collect();
            // cheap deterministic shuffle
            let mut s = seed | 1;
            for i in (1..perm.len()).rev() {
                s ^= s << 13; s ^= s >> 7; s ^= s << 17;
                perm.swap(i, (s % (i as u64 + 1)) as usize);
            }
            let y: Vec<f64> = perm.iter().map(|&i| x[i]).collect();
            let rx = midranks(&x).unwrap();
            let ry = midranks(&y).unwrap();
            for (j, &i) in perm.iter().enumerate() {
                prop_assert_eq!(ry[j], rx[i]);
            }
        }
    }
}
