//! Nonparametric relative treatment effects `p = P(X1 < X2) + P(X1 = X2)/2`
//! per component, estimated from all available observations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{derive_pattern_index, Group, MaskedSample, PatternIndex};
use crate::ranking::RankTable;

/// Which observations an analysis uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Complete and incomplete cases.
    All,
    /// Complete cases only (`n_1 = n_2 = 0`).
    CompleteOnly,
    /// Incomplete cases only (`n_c = 0`), i.e. two independent samples.
    IncompleteOnly,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::All, Method::CompleteOnly, Method::IncompleteOnly];

    pub fn name(self) -> &'static str {
        match self {
            Method::All => "all",
            Method::CompleteOnly => "complete",
            Method::IncompleteOnly => "incomplete",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s.trim().to_ascii_lowercase().as_str() {
            "all" => Some(Method::All),
            "complete" | "complete_only" => Some(Method::CompleteOnly),
            "incomplete" | "incomplete_only" => Some(Method::IncompleteOnly),
            _ => None,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Counts used for one component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentCounts {
    pub n_complete: usize,
    pub n_first_only: usize,
    pub n_second_only: usize,
}

/// Estimated effect vector with its sample-size bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub p_hat: Vec<f64>,
    /// `[theta_1, theta_2]` per component.
    pub theta: Vec<[f64; 2]>,
    pub counts: Vec<ComponentCounts>,
    pub method: Method,
}

impl EffectEstimate {
    pub fn d(&self) -> usize {
        self.p_hat.len()
    }

    /// `p_hat - 1/2`.
    pub fn deviation(&self) -> Vec<f64> {
        self.p_hat.iter().map(|p| p - 0.5).collect()
    }

    pub fn tagged(mut self, method: Method) -> Self {
        self.method = method;
        self
    }
}

fn check_estimable(idx: &PatternIndex) -> Result<()> {
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
    Ok(())
}

fn bookkeeping(idx: &PatternIndex) -> (Vec<[f64; 2]>, Vec<ComponentCounts>) {
    idx.components()
        .iter()
        .map(|c| {
            (
                [c.theta(Group::First), c.theta(Group::Second)],
                ComponentCounts {
                    n_complete: c.n_complete(),
                    n_first_only: c.n_incomplete(Group::First),
                    n_second_only: c.n_incomplete(Group::Second),
                },
            )
        })
        .unzip()
}

fn mean_overall_rank(ranks: &RankTable, g: Group, l: usize, set: &[usize]) -> f64 {
    if set.is_empty() {
        return 0.0;
    }
    let s: f64 = set
        .iter()
        .map(|&k| ranks.overall(g, l, k).expect("ranked cell"))
        .sum();
    s / set.len() as f64
}

/// Rank form: `p = (theta_2 R2c - theta_1 R1c + (1-theta_2) R2i - (1-theta_1) R1i) / N + 1/2`
/// with per-component counts and rank means over the complete and
/// incomplete sets. An empty set contributes zero.
pub fn estimate_effects(
    _sample: &MaskedSample,
    idx: &PatternIndex,
    ranks: &RankTable,
) -> Result<EffectEstimate> {
    check_estimable(idx)?;
    let p_hat = idx
        .components()
        .iter()
        .enumerate()
        .map(|(l, c)| {
            let (t1, t2) = (c.theta(Group::First), c.theta(Group::Second));
            let r1c = mean_overall_rank(ranks, Group::First, l, &c.complete);
            let r2c = mean_overall_rank(ranks, Group::Second, l, &c.complete);
            let r1i = mean_overall_rank(ranks, Group::First, l, &c.first_only);
            let r2i = mean_overall_rank(ranks, Group::Second, l, &c.second_only);
            let big_n = c.total() as f64;
            let p = (t2 * r2c - t1 * r1c + (1.0 - t2) * r2i - (1.0 - t1) * r1i) / big_n + 0.5;
            p.clamp(0.0, 1.0)
        })
        .collect();
    let (theta, counts) = bookkeeping(idx);
    Ok(EffectEstimate {
        p_hat,
        theta,
        counts,
        method: Method::All,
    })
}

fn count_fn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        0.0
    } else {
        0.5
    }
}

/// `integral F1 dF2` for two empirical distributions: the mean of `c(b - a)`.
fn pair_integral(first: &[f64], second: &[f64]) -> f64 {
    let s: f64 = second
        .iter()
        .map(|&b| first.iter().map(|&a| count_fn(b - a)).sum::<f64>())
        .sum();
    s / (first.len() * second.len()) as f64
}

/// Integral form: plugs the weighted empirical distribution functions into
/// `p = integral F1 dF2` and evaluates the four complete / incomplete blocks
/// by direct pairwise counting. Quadratic in the sample size; intended as a
/// cross-check of [`estimate_effects`].
pub fn estimate_effects_integral(
    sample: &MaskedSample,
    idx: &PatternIndex,
) -> Result<EffectEstimate> {
    check_estimable(idx)?;
    let p_hat = idx
        .components()
        .iter()
        .enumerate()
        .map(|(l, c)| {
            let take = |g: Group, set: &[usize]| -> Vec<f64> {
                set.iter().map(|&k| sample.value(g, l, k)).collect()
            };
            let x1c = take(Group::First, &c.complete);
            let x2c = take(Group::Second, &c.complete);
            let x1i = take(Group::First, &c.first_only);
            let x2i = take(Group::Second, &c.second_only);
            let (nc, n1, n2) = (x1c.len() as f64, x1i.len() as f64, x2i.len() as f64);
            let blocks = [
                (nc * nc, &x1c, &x2c),
                (nc * n2, &x1c, &x2i),
                (nc * n1, &x1i, &x2c),
                (n1 * n2, &x1i, &x2i),
            ];
            let total: f64 = blocks
                .iter()
                .filter(|(w, _, _)| *w > 0.0)
                .map(|(w, a, b)| w * pair_integral(a, b))
                .sum();
            total / (c.m(Group::First) * c.m(Group::Second)) as f64
        })
        .collect();
    let (theta, counts) = bookkeeping(idx);
    Ok(EffectEstimate {
        p_hat,
        theta,
        counts,
        method: Method::All,
    })
}

/// Restricts a sample to the observations a method uses. `CompleteOnly`
/// masks every incomplete cell component by component, `IncompleteOnly`
/// masks every complete-case cell; subjects left without data are dropped.
pub fn restrict_method(
    sample: &MaskedSample,
    idx: &PatternIndex,
    method: Method,
) -> Result<(MaskedSample, PatternIndex)> {
    if method == Method::All {
        return Ok((sample.clone(), idx.clone()));
    }
    let filtered = |component: usize, group: Group| Error::EverythingFiltered {
        method: method.name().to_string(),
        component,
        group: group.number(),
    };
    for (l, c) in idx.components().iter().enumerate() {
        for g in Group::BOTH {
            let left = match method {
                Method::CompleteOnly => c.n_complete(),
                _ => c.n_incomplete(g),
            };
            if left == 0 {
                return Err(filtered(l, g));
            }
        }
    }
    let keep_complete = method == Method::CompleteOnly;
    let restricted = sample
        .filter_cells(|_, l, k| {
            let complete = idx.component(l).complete.binary_search(&k).is_ok();
            complete == keep_complete
        })
        .ok_or_else(|| filtered(0, Group::First))?;
    let new_idx = derive_pattern_index(&restricted);
    check_estimable(&new_idx).map_err(|e| match e {
        Error::InestimableComponent { component, group } => Error::EverythingFiltered {
            method: method.name().to_string(),
            component,
            group,
        },
        other => other,
    })?;
    Ok((restricted, new_idx))
}
