#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rank_effects::model::{derive_pattern_index, Group, MaskedSample, PatternIndex};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Integer values in `0..levels` when `levels > 0` (heavy ties), else
/// continuous.
fn value(rng: &mut ChaCha8Rng, levels: u32) -> f64 {
    if levels > 0 {
        rng.random_range(0..levels) as f64
    } else {
        rng.random::<f64>() * 10.0 - 5.0
    }
}

fn estimable(idx: &PatternIndex) -> bool {
    idx.components()
        .iter()
        .all(|c| c.m(Group::First) > 0 && c.m(Group::Second) > 0)
}

/// Arbitrary per-cell missingness; every component has data in both groups.
pub fn general_sample(
    rng: &mut ChaCha8Rng,
    d: usize,
    n: usize,
    levels: u32,
    p_obs: f64,
) -> MaskedSample {
    loop {
        let subjects: Vec<Vec<Option<f64>>> = (0..n)
            .map(|_| loop {
                let s: Vec<Option<f64>> = (0..2 * d)
                    .map(|_| rng.random_bool(p_obs).then(|| value(rng, levels)))
                    .collect();
                if s.iter().any(Option::is_some) {
                    break s;
                }
            })
            .collect();
        let s = MaskedSample::from_subjects(d, &subjects).unwrap();
        if estimable(&derive_pattern_index(&s)) {
            return s;
        }
    }
}

/// Missingness at treatment level: `nc` complete subjects, `n1` observed in
/// group 1 only, `n2` in group 2 only.
pub fn simple_sample(
    rng: &mut ChaCha8Rng,
    d: usize,
    nc: usize,
    n1: usize,
    n2: usize,
    levels: u32,
) -> MaskedSample {
    let mut subjects = Vec::new();
    for (count, first, second) in [(nc, true, true), (n1, true, false), (n2, false, true)] {
        for _ in 0..count {
            let mut s = Vec::with_capacity(2 * d);
            for obs in [first, second] {
                for _ in 0..d {
                    let v = value(rng, levels);
                    s.push(obs.then_some(v));
                }
            }
            subjects.push(s);
        }
    }
    MaskedSample::from_subjects(d, &subjects).unwrap()
}

/// `c(x) = 0, 1/2, 1` for `x <, =, > 0`.
pub fn count_fn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x == 0.0 {
        0.5
    } else {
        0.0
    }
}

/// `r_i = 1/2 + sum_j c(x_i - x_j)`.
pub fn brute_midranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&xi| 0.5 + x.iter().map(|&xj| count_fn(xi - xj)).sum::<f64>())
        .collect()
}

/// Mean of `c(X2 - X1)` over all pairs of observed group-1 and group-2
/// values on a component.
pub fn brute_effect(s: &MaskedSample, l: usize) -> f64 {
    let a = s.observed_values(Group::First, l);
    let b = s.observed_values(Group::Second, l);
    let total: f64 = a
        .iter()
        .flat_map(|x| b.iter().map(move |y| count_fn(y - x)))
        .sum();
    total / (a.len() * b.len()) as f64
}

/// Empirical placement of `x` against the observed values of `group` on
/// component `l`: `mean_j c(x - X_gj)`.
pub fn brute_placement(s: &MaskedSample, group: Group, l: usize, x: f64) -> f64 {
    let v = s.observed_values(group, l);
    v.iter().map(|&y| count_fn(x - y)).sum::<f64>() / v.len() as f64
}

/// Unbiased sample covariance of paired lists; 0 for fewer than two pairs.
pub fn sample_cov(a: &[f64], b: &[f64]) -> f64 {
    let e = a.len();
    if e < 2 {
        return 0.0;
    }
    let ma = a.iter().sum::<f64>() / e as f64;
    let mb = b.iter().sum::<f64>() / e as f64;
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - ma) * (y - mb))
        .sum::<f64>()
        / (e - 1) as f64
}

/// Covariance of the linearized effect estimator, assembled subject by
/// subject. Each subject contributes `a_l = Y2/m2 - Y1/m1` on component `l`
/// with only its observed terms; subjects are grouped by their observation
/// kinds on `(l, r)` and each group adds `count * cov(a_l, a_r)`.
pub fn brute_covariance(
    s: &MaskedSample,
    place: impl Fn(Group, usize, usize) -> f64,
) -> Vec<Vec<f64>> {
    let d = s.d();
    let n = s.n();
    let idx = derive_pattern_index(s);
    let kind = |l: usize, k: usize| {
        (s.is_observed(Group::First, l, k) as u8)
            | ((s.is_observed(Group::Second, l, k) as u8) << 1)
    };
    let a = |l: usize, k: usize| {
        let c = idx.component(l);
        let mut v = 0.0;
        if s.is_observed(Group::Second, l, k) {
            v += place(Group::Second, l, k) / c.m(Group::Second) as f64;
        }
        if s.is_observed(Group::First, l, k) {
            v -= place(Group::First, l, k) / c.m(Group::First) as f64;
        }
        v
    };
    let mut out = vec![vec![0.0; d]; d];
    for l in 0..d {
        for r in 0..d {
            for kl in 1..=3u8 {
                for kr in 1..=3u8 {
                    let members: Vec<usize> = (0..n)
                        .filter(|&k| kind(l, k) == kl && kind(r, k) == kr)
                        .collect();
                    let x: Vec<f64> = members.iter().map(|&k| a(l, k)).collect();
                    let y: Vec<f64> = members.iter().map(|&k| a(r, k)).collect();
                    out[l][r] += members.len() as f64 * sample_cov(&x, &y);
                }
            }
            out[l][r] *= n as f64;
        }
    }
    out
}

fn simpson(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(&f, a, b, fa, fm, fb, whole, tol, 60)
}

/// `P(chi^2_k >= x)` by quadrature of the gamma density. Below the mode
/// region the lower integral is computed after `t = X v^(1/a)`, which
/// removes the `t^(a-1)` endpoint behaviour; above it the upper tail is
/// integrated directly.
pub fn chisq_tail_quadrature(x: f64, k: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let a = k / 2.0;
    let big_x = x / 2.0;
    if big_x == 0.0 {
        return 1.0;
    }
    let lg = ln_gamma(a);
    if big_x < a + 1.0 {
        let i = integrate(|v: f64| (-big_x * v.powf(1.0 / a)).exp(), 0.0, 1.0, 1e-14);
        1.0 - (a * big_x.ln() - a.ln() - lg).exp() * i
    } else {
        let dens = |t: f64| ((a - 1.0) * t.ln() - t - lg).exp();
        integrate(dens, big_x, big_x + 80.0 + 4.0 * a, 1e-15)
    }
}
