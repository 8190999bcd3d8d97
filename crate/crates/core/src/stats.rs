//! Numerical routines used by the lifecycle analytics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("empty sample")]
    Empty,
    #[error("quantile level {0} outside [0, 1]")]
    QuantileLevel(f64),
    #[error("sample contains a non-finite value")]
    NonFinite,
    #[error("at least two groups are required, got {0}")]
    TooFewGroups(usize),
    #[error("group `{0}` is empty")]
    EmptyGroup(String),
    #[error("at least three observations are required, got {0}")]
    TooFewObservations(usize),
    #[error("all observations are identical; the tie correction is zero")]
    Degenerate,
}

/// Sample quantile by linear interpolation between order statistics:
/// with `h = (n - 1) q`, returns `x[floor(h)] + (h - floor(h)) (x[floor(h)+1] - x[floor(h)])`.
pub fn quantile(values: &[f64], q: f64) -> Result<f64, StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(StatsError::QuantileLevel(q));
    }
    let mut sorted = values.to_vec();
    if sorted.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    sorted.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&sorted, q))
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    match sorted.get(lo + 1) {
        Some(next) if frac > 0.0 => sorted[lo] + frac * (next - sorted[lo]),
        _ => sorted[lo],
    }
}

pub fn median(values: &[f64]) -> Result<f64, StatsError> {
    quantile(values, 0.5)
}

pub fn mean(values: &[f64]) -> Result<f64, StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Minimum, quartiles and maximum of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumberSummary {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl FiveNumberSummary {
    pub fn of(values: &[f64]) -> Result<Self, StatsError> {
        if values.is_empty() {
            return Err(StatsError::Empty);
        }
        let mut sorted = values.to_vec();
        if sorted.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite);
        }
        sorted.sort_by(f64::total_cmp);
        Ok(FiveNumberSummary {
            n: sorted.len(),
            min: sorted[0],
            q1: quantile_sorted(&sorted, 0.25),
            median: quantile_sorted(&sorted, 0.5),
            q3: quantile_sorted(&sorted, 0.75),
            max: sorted[sorted.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleGroup {
    pub label: String,
    pub values: Vec<f64>,
}

impl SampleGroup {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Self {
        SampleGroup {
            label: label.into(),
            values,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KruskalWallis {
    /// Tie-corrected H statistic.
    pub h: f64,
    /// Chi-square upper tail at `h` with `groups - 1` degrees of freedom.
    pub p: f64,
    pub degrees_of_freedom: u32,
    pub n: usize,
}

/// Kruskal-Wallis H test with midranks and the standard tie correction.
pub fn kruskal_wallis(groups: &[SampleGroup]) -> Result<KruskalWallis, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups(groups.len()));
    }
    if let Some(g) = groups.iter().find(|g| g.values.is_empty()) {
        return Err(StatsError::EmptyGroup(g.label.clone()));
    }
    let mut pooled: Vec<(f64, usize)> = groups
        .iter()
        .enumerate()
        .flat_map(|(i, g)| g.values.iter().map(move |&v| (v, i)))
        .collect();
    if pooled.iter().any(|(v, _)| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n = pooled.len();
    if n < 3 {
        return Err(StatsError::TooFewObservations(n));
    }
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut rank_sums = vec![0.0; groups.len()];
    let mut tie_sum = 0.0;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && pooled[end].0 == pooled[start].0 {
            end += 1;
        }
        // Ranks start..end (1-based start+1..=end) share their average.
        let midrank = (start + 1 + end) as f64 / 2.0;
        for &(_, group) in &pooled[start..end] {
            rank_sums[group] += midrank;
        }
        let t = (end - start) as f64;
        tie_sum += t * t * t - t;
        start = end;
    }

    let nf = n as f64;
    let correction = 1.0 - tie_sum / (nf * nf * nf - nf);
    if correction <= 0.0 {
        return Err(StatsError::Degenerate);
    }
    let weighted: f64 = rank_sums
        .iter()
        .zip(groups)
        .map(|(r, g)| r * r / g.values.len() as f64)
        .sum();
    let h_raw = 12.0 / (nf * (nf + 1.0)) * weighted - 3.0 * (nf + 1.0);
    // Symmetric rank sums give an exact zero up to rounding noise.
    let h = if h_raw.abs() < 1e-12 {
        0.0
    } else {
        h_raw / correction
    };
    let df = (groups.len() - 1) as u32;
    Ok(KruskalWallis {
        h,
        p: chi_square_upper_tail(h, df),
        degrees_of_freedom: df,
        n,
    })
}

/// Upper tail probability of the chi-square distribution, `Q(df/2, x/2)`.
///
/// Non-positive `x` yields 1.
pub fn chi_square_upper_tail(x: f64, df: u32) -> f64 {
    assert!(df > 0, "degrees of freedom must be positive");
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    regularized_gamma_q(f64::from(df) / 2.0, x / 2.0)
}

const GAMMA_MAX_ITER: usize = 500;
const GAMMA_EPS: f64 = 1e-15;
const TINY: f64 = 1e-300;

/// Regularized upper incomplete gamma `Q(a, x)` for `a > 0, x > 0`.
fn regularized_gamma_q(a: f64, x: f64) -> f64 {
    let log_prefactor = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        // Series for P(a, x).
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..GAMMA_MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * GAMMA_EPS {
                break;
            }
        }
        let p = (log_prefactor.exp() * sum).min(1.0);
        1.0 - p
    } else {
        // Modified Lentz continued fraction for Q(a, x).
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=GAMMA_MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < GAMMA_EPS {
                break;
            }
        }
        (log_prefactor.exp() * h).clamp(0.0, 1.0)
    }
}

/// Natural log of the gamma function (Lanczos, g = 7, n = 9).
fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection formula.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEFFS[0];
    for (i, &c) in COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn groups(gs: &[&[f64]]) -> Vec<SampleGroup> {
        gs.iter()
            .enumerate()
            .map(|(i, v)| SampleGroup::new(format!("g{i}"), v.to_vec()))
            .collect()
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(quantile(&[1.0, 2.0, 3.0], 0.5).unwrap(), 2.0);
        assert_eq!(quantile(&[10.0, 20.0, 30.0, 40.0], 0.25).unwrap(), 17.5);
        assert_eq!(quantile(&[40.0, 10.0, 30.0, 20.0], 0.25).unwrap(), 17.5);
        for q in [0.0, 0.3, 1.0] {
            assert_eq!(quantile(&[5.0], q).unwrap(), 5.0);
        }
        assert_eq!(quantile(&[], 0.5), Err(StatsError::Empty));
        assert_eq!(quantile(&[1.0], 1.5), Err(StatsError::QuantileLevel(1.5)));
    }

    #[test]
    fn five_numbers() {
        let s = FiveNumberSummary::of(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(
            (s.min, s.q1, s.median, s.q3, s.max),
            (1.0, 2.0, 3.0, 4.0, 5.0)
        );
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!((ln_gamma(1.0)).abs() < 1e-14);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn kruskal_wallis_separated_groups() {
        let kw = kruskal_wallis(&groups(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]])).unwrap();
        // R1 = 6, R2 = 15: H = 12/42 * (36/3 + 225/3) - 21 = 27/7.
        assert!((kw.h - 27.0 / 7.0).abs() < 1e-12);
        assert!((kw.h - 3.857).abs() < 1e-3);
        assert!((kw.p - 0.0495).abs() < 1e-3);
        assert_eq!(kw.degrees_of_freedom, 1);
    }

    #[test]
    fn kruskal_wallis_symmetric_rank_sums_are_zero() {
        let kw = kruskal_wallis(&groups(&[&[1.0, 4.0], &[2.0, 3.0]])).unwrap();
        assert_eq!(kw.h, 0.0);
        assert_eq!(kw.p, 1.0);
        let kw = kruskal_wallis(&groups(&[&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]])).unwrap();
        assert_eq!(kw.h, 0.0);
        assert_eq!(kw.p, 1.0);
    }

    #[test]
    fn kruskal_wallis_ties_match_reference() {
        // Reference values from scipy.stats.kruskal.
        let kw = kruskal_wallis(&groups(&[&[1.0, 1.0, 2.0], &[1.0, 2.0, 2.0]])).unwrap();
        assert!((kw.h - 0.555_555_555_555_553_6).abs() < 1e-9);
        assert!((kw.p - 0.456_056_540_250_256_9).abs() < 1e-9);
        let kw = kruskal_wallis(&groups(&[&[9.0, 9.0, 9.0], &[5.0, 5.0, 5.0]])).unwrap();
        assert!((kw.h - 5.0).abs() < 1e-9);
        assert!((kw.p - 0.025_347_318_677_468_363).abs() < 1e-9);
        let kw = kruskal_wallis(&groups(&[
            &[1.0, 5.0, 9.0, 2.0],
            &[3.0, 3.0, 7.0],
            &[8.0, 8.0, 1.0, 4.0, 6.0],
        ]))
        .unwrap();
        assert!((kw.h - 0.428_533_568_904_597_76).abs() < 1e-9);
        assert!((kw.p - 0.807_133_025_754_498_4).abs() < 1e-9);
    }

    #[test]
    fn kruskal_wallis_errors() {
        assert_eq!(
            kruskal_wallis(&groups(&[&[1.0, 2.0]])),
            Err(StatsError::TooFewGroups(1))
        );
        assert_eq!(
            kruskal_wallis(&groups(&[&[1.0, 2.0], &[]])),
            Err(StatsError::EmptyGroup("g1".into()))
        );
        assert_eq!(
            kruskal_wallis(&groups(&[&[1.0], &[2.0]])),
            Err(StatsError::TooFewObservations(2))
        );
        assert_eq!(
            kruskal_wallis(&groups(&[&[4.0, 4.0], &[4.0]])),
            Err(StatsError::Degenerate)
        );
    }

    #[test]
    fn chi_square_examples() {
        assert_eq!(chi_square_upper_tail(0.0, 1), 1.0);
        assert_eq!(chi_square_upper_tail(0.0, 5), 1.0);
        assert!((chi_square_upper_tail(3.841, 1) - 0.05).abs() < 5e-4);
    }

    #[test]
    fn chi_square_matches_reference_values() {
        // scipy.stats.chi2.sf
        let cases = [
            (0.5, 1, 0.479_500_122_186_953_37),
            (1.0, 2, 0.606_530_659_712_633_4),
            (2.5, 3, 0.475_291_083_343_020_5),
            (7.0, 4, 0.135_888_225_400_433_27),
            (10.0, 5, 0.075_235_246_146_512_17),
            (20.0, 10, 0.029_252_688_076_961_124),
            (0.01, 1, 0.920_344_325_445_942),
            (40.0, 3, 1.065_509_033_425_585e-8),
            (100.0, 20, 1.259_608_459_166_084_7e-12),
            (3.0, 7, 0.885_002_231_643_150_6),
            (3.841, 1, 0.050_013_683_763_956_804),
        ];
        for (x, df, expected) in cases {
            let got = chi_square_upper_tail(x, df);
            assert!(
                (got - expected).abs() < 1e-10,
                "x={x} df={df}: {got} vs {expected}"
            );
        }
    }

    fn finite_groups() -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(-50i32..50, 1..8), 2..5).prop_map(|gs| {
            gs.into_iter()
                .map(|g| g.into_iter().map(f64::from).collect())
                .collect()
        })
    }

    proptest! {
        #[test]
        fn quantile_is_monotone_and_bounded(
            values in prop::collection::vec(-1e6f64..1e6, 1..40),
            a in 0.0f64..=1.0,
            b in 0.0f64..=1.0,
        ) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let qa = quantile(&values, lo).unwrap();
            let qb = quantile(&values, hi).unwrap();
            prop_assert!(qa <= qb + 1e-9);
            let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(qa >= min - 1e-9 && qb <= max + 1e-9);
        }

        #[test]
        fn kruskal_wallis_is_rank_based(gs in finite_groups()) {
            let base: Vec<SampleGroup> = gs.iter().enumerate()
                .map(|(i, v)| SampleGroup::new(i.to_string(), v.clone())).collect();
            let transformed: Vec<SampleGroup> = gs.iter().enumerate()
                .map(|(i, v)| SampleGroup::new(i.to_string(), v.iter().map(|x| (x / 7.0).exp() * 3.0 + 1.0).collect()))
                .collect();
            match (kruskal_wallis(&base), kruskal_wallis(&transformed)) {
                (Ok(a), Ok(b)) => prop_assert!((a.h - b.h).abs() < 1e-9),
                (Err(a), Err(b)) => prop_assert_eq!(a, b),
                (a, b) => prop_assert!(false, "mismatch {:?} vs {:?}", a, b),
            }
        }

        #[test]
        fn kruskal_wallis_ignores_order(gs in finite_groups(), seed in any::<u64>()) {
            let base: Vec<SampleGroup> = gs.iter().enumerate()
                .map(|(i, v)| SampleGroup::new(i.to_string(), v.clone())).collect();
            let mut shuffled = base.clone();
            shuffled.reverse();
            let k = shuffled.len();
            shuffled.rotate_left((seed as usize) % k);
            for g in &mut shuffled {
                let len = g.values.len();
                g.values.rotate_right((seed as usize / 7) % len);
                g.values.reverse();
            }
            match (kruskal_wallis(&base), kruskal_wallis(&shuffled)) {
                (Ok(a), Ok(b)) => prop_assert!((a.h - b.h).abs() < 1e-9),
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "mismatch {:?} vs {:?}", a, b),
            }
        }

        #[test]
        fn chi_square_tail_is_monotone(x in 0.0f64..200.0, dx in 0.0f64..20.0, df in 1u32..40) {
            let a = chi_square_upper_tail(x, df);
            let b = chi_square_upper_tail(x + dx, df);
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(b <= a + 1e-12);
        }
    }
}
