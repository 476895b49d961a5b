//! Summary statistics: t-tests and a two-by-two factorial ANOVA.
//!
//! p-values come from the regularized incomplete beta function, evaluated
//! with a modified Lentz continued fraction.

use serde::{Deserialize, Serialize};

use crate::error::StatsError;

const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=1000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

/// Two-tailed p-value of a Student t statistic.
pub fn t_two_tailed_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    incomplete_beta(df / (df + t * t), 0.5 * df, 0.5)
}

/// `P(T <= t)` for Student's t.
pub fn t_cdf(t: f64, df: f64) -> f64 {
    let tail = 0.5 * t_two_tailed_p(t, df);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Quantile of Student's t, by bisection on the CDF.
pub fn t_quantile(p: f64, df: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile probability {p} outside (0, 1)");
    if p < 0.5 {
        return -t_quantile(1.0 - p, df);
    }
    let mut hi = 1.0;
    while t_cdf(hi, df) < p {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if t_cdf(mid, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Upper-tail probability of an F statistic.
pub fn f_survival(f: f64, df1: f64, df2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    incomplete_beta(df2 / (df2 + df1 * f), 0.5 * df2, 0.5 * df1)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance (n - 1 denominator).
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn std_dev(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub mean_difference: f64,
    pub ci95: (f64, f64),
}

fn t_result(diff: f64, se: f64, df: f64) -> TTest {
    let t = diff / se;
    let q = t_quantile(0.975, df);
    TTest {
        t,
        df,
        p: t_two_tailed_p(t, df),
        mean_difference: diff,
        ci95: (diff - q * se, diff + q * se),
    }
}

/// Paired-sample t-test on `a - b`.
pub fn paired_t(a: &[f64], b: &[f64]) -> Result<TTest, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(StatsError::InsufficientData("paired t needs at least 2 pairs".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if d.iter().all(|&x| x == d[0]) {
        return Err(StatsError::DegenerateVariance);
    }
    let n = d.len() as f64;
    Ok(t_result(mean(&d), std_dev(&d) / n.sqrt(), n - 1.0))
}

/// Welch's unequal-variance t-test on `mean(a) - mean(b)`.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<TTest, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::InsufficientData("Welch t needs 2 values per sample".into()));
    }
    let (va, vb) = (variance(a), variance(b));
    if va == 0.0 || vb == 0.0 {
        return Err(StatsError::DegenerateVariance);
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    let df = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(t_result(mean(a) - mean(b), (sa + sb).sqrt(), df))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnovaTerm {
    pub name: String,
    /// Effect-coded (±1) coefficient.
    pub estimate: f64,
    pub sum_squares: f64,
    pub df: f64,
    pub f: f64,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    pub intercept: f64,
    pub terms: Vec<AnovaTerm>,
    pub residual_sum_squares: f64,
    pub residual_df: f64,
}

impl AnovaTable {
    pub fn term(&self, name: &str) -> Option<&AnovaTerm> {
        self.terms.iter().find(|t| t.name == name)
    }
}

/// Solves a small dense system by Gaussian elimination with partial pivoting.
fn solve(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Result<Vec<f64>, StatsError> {
    let n = rhs.len();
    let scale = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1.0);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .expect("non-empty range");
        if m[pivot][col].abs() <= 1e-12 * scale {
            return Err(StatsError::RankDeficient);
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            let (upper, lower) = m.split_at_mut(row);
            for (target, source) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                *target -= factor * source;
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| m[row][k] * x[k]).sum();
        x[row] = (rhs[row] - tail) / m[row][row];
    }
    Ok(x)
}

/// Least-squares fit of `y` on the given columns; returns coefficients and RSS.
fn least_squares(columns: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, f64), StatsError> {
    let p = columns.len();
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for i in 0..p {
        for j in 0..p {
            xtx[i][j] = columns[i].iter().zip(&columns[j]).map(|(a, b)| a * b).sum();
        }
        xty[i] = columns[i].iter().zip(y).map(|(a, b)| a * b).sum();
    }
    let beta = solve(xtx, xty)?;
    let rss = y
        .iter()
        .enumerate()
        .map(|(r, yi)| {
            let fit: f64 = columns.iter().zip(&beta).map(|(c, b)| c[r] * b).sum();
            (yi - fit).powi(2)
        })
        .sum();
    Ok((beta, rss))
}

/// Two-by-two factorial ANOVA with Type-III sums of squares on an
/// effect-coded design (`true` → +1, `false` → -1).
pub fn anova_2x2(
    response: &[f64],
    frame: &[bool],
    anchor: &[bool],
    with_interaction: bool,
) -> Result<AnovaTable, StatsError> {
    let n = response.len();
    if frame.len() != n {
        return Err(StatsError::LengthMismatch(n, frame.len()));
    }
    if anchor.len() != n {
        return Err(StatsError::LengthMismatch(n, anchor.len()));
    }
    for f in [false, true] {
        for a in [false, true] {
            if !frame.iter().zip(anchor).any(|(&x, &y)| x == f && y == a) {
                return Err(StatsError::EmptyCell(f as usize, a as usize));
            }
        }
    }
    let code = |b: bool| if b { 1.0 } else { -1.0 };
    let mut columns = vec![
        vec![1.0; n],
        frame.iter().map(|&b| code(b)).collect::<Vec<_>>(),
        anchor.iter().map(|&b| code(b)).collect::<Vec<_>>(),
    ];
    let mut names = vec!["frame", "anchor"];
    if with_interaction {
        let inter = columns[1].iter().zip(&columns[2]).map(|(a, b)| a * b).collect();
        columns.push(inter);
        names.push("frame:anchor");
    }
    let p = columns.len();
    if n <= p {
        return Err(StatsError::RankDeficient);
    }
    let (beta, rss) = least_squares(&columns, response)?;
    let residual_df = (n - p) as f64;
    let m = mean(response);
    let total: f64 = response.iter().map(|y| (y - m).powi(2)).sum();
    let negligible = 1e-12 * total;

    let mut terms = Vec::with_capacity(names.len());
    for (k, name) in names.iter().enumerate() {
        let col = k + 1;
        let reduced: Vec<Vec<f64>> = columns
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != col)
            .map(|(_, c)| c.clone())
            .collect();
        let (_, rss_reduced) = least_squares(&reduced, response)?;
        let mut ss = (rss_reduced - rss).max(0.0);
        if ss <= negligible {
            ss = 0.0;
        }
        let f = if ss == 0.0 {
            0.0
        } else if rss <= negligible {
            f64::INFINITY
        } else {
            ss / (rss / residual_df)
        };
        terms.push(AnovaTerm {
            name: name.to_string(),
            estimate: beta[col],
            sum_squares: ss,
            df: 1.0,
            f,
            p: f_survival(f, 1.0, residual_df),
        });
    }
    Ok(AnovaTable {
        intercept: beta[0],
        terms,
        residual_sum_squares: rss,
        residual_df,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

    #[test]
    fn textbook_paired_example() {
        // d = [2,4,6,8,10]: mean 6, sample sd sqrt(10), se sqrt(2), t = 6/sqrt(2).
        let a = [2.0, 4.0, 6.0, 8.0, 10.0];
        let b = [0.0; 5];
        let r = paired_t(&a, &b).unwrap();
        assert!((r.t - 6.0 / 2f64.sqrt()).abs() < 1e-12);
        assert!((r.t - 4.2426).abs() < 1e-4);
        assert_eq!(r.df, 4.0);
        let reference = StudentsT::new(0.0, 1.0, 4.0).unwrap();
        let p = 2.0 * (1.0 - reference.cdf(r.t));
        assert!((r.p - p).abs() < 1e-10);
        let q = reference.inverse_cdf(0.975);
        assert!((r.ci95.0 - (6.0 - q * 2f64.sqrt())).abs() < 1e-9);
    }

    #[test]
    fn paired_degenerate_and_symmetric() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(paired_t(&a, &a), Err(StatsError::DegenerateVariance));
        let r = paired_t(&[1.0, -1.0, 1.0, -1.0], &[0.0; 4]).unwrap();
        assert_eq!(r.t, 0.0);
        assert!((r.p - 1.0).abs() < 1e-12);
        assert!(matches!(paired_t(&[1.0], &[2.0]), Err(StatsError::InsufficientData(_))));
        assert_eq!(paired_t(&[1.0, 2.0], &[1.0]), Err(StatsError::LengthMismatch(2, 1)));
    }

    #[test]
    fn welch_cases() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [2.0, 4.0, 6.0, 8.0];
        let r = welch_t(&a, &a).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.df, 6.0);
        // Direct formula: va = 5/3, vb = 20/3, se^2 = (5/3 + 20/3)/4 = 25/12.
        let r = welch_t(&a, &b).unwrap();
        let se2: f64 = 25.0 / 12.0;
        assert!((r.t - (-2.5 / se2.sqrt())).abs() < 1e-12);
        let (sa, sb) = (5.0 / 12.0, 20.0 / 12.0);
        let df = se2 * se2 / (sa * sa / 3.0 + sb * sb / 3.0);
        assert!((r.df - df).abs() < 1e-12);
        let reference = StudentsT::new(0.0, 1.0, df).unwrap();
        assert!((r.p - 2.0 * reference.cdf(r.t)).abs() < 1e-10);
        assert_eq!(welch_t(&a, &[3.0, 3.0]), Err(StatsError::DegenerateVariance));
    }

    #[test]
    fn incomplete_beta_matches_reference_distributions() {
        for &df in &[1.0, 2.5, 4.0, 30.0, 396.0] {
            let t_dist = StudentsT::new(0.0, 1.0, df).unwrap();
            for &t in &[-3.0, -0.4, 0.0, 1.1, 2.985, 7.0] {
                assert!((t_cdf(t, df) - t_dist.cdf(t)).abs() < 1e-10, "t {t} df {df}");
            }
            for &p in &[0.025, 0.5, 0.975, 0.999] {
                assert!((t_quantile(p, df) - t_dist.inverse_cdf(p)).abs() < 1e-7);
            }
        }
        for &(d1, d2) in &[(1.0, 5.0), (1.0, 96.0), (3.0, 10.0)] {
            let f_dist = FisherSnedecor::new(d1, d2).unwrap();
            for &f in &[0.1, 1.0, 4.2, 20.0] {
                assert!((f_survival(f, d1, d2) - (1.0 - f_dist.cdf(f))).abs() < 1e-10);
            }
        }
    }

    fn design() -> (Vec<bool>, Vec<bool>) {
        let mut frame = Vec::new();
        let mut anchor = Vec::new();
        for f in [false, true] {
            for a in [false, true] {
                for _ in 0..3 {
                    frame.push(f);
                    anchor.push(a);
                }
            }
        }
        (frame, anchor)
    }

    #[test]
    fn constant_response_has_zero_f() {
        let (frame, anchor) = design();
        let t = anova_2x2(&[5.0; 12], &frame, &anchor, true).unwrap();
        for term in &t.terms {
            assert_eq!(term.f, 0.0);
            assert_eq!(term.p, 1.0);
        }
    }

    #[test]
    fn pure_frame_effect() {
        let (frame, anchor) = design();
        // Same within-cell spread everywhere, shifted by 4 in the loss cells.
        let y: Vec<f64> = frame
            .iter()
            .enumerate()
            .map(|(i, &f)| (i % 3) as f64 - 1.0 + if f { 4.0 } else { 0.0 })
            .collect();
        let t = anova_2x2(&y, &frame, &anchor, true).unwrap();
        let f = t.term("frame").unwrap();
        // SS = 12 * 2^2 = 48, residual SS = 4 * 2 = 8 on 8 df.
        assert!((f.f - 48.0).abs() < 1e-9, "{f:?}");
        let reference = FisherSnedecor::new(1.0, 8.0).unwrap();
        assert!((f.p - (1.0 - reference.cdf(48.0))).abs() < 1e-12);
        assert!((f.estimate - 2.0).abs() < 1e-12);
        assert_eq!(t.term("anchor").unwrap().f, 0.0);
        assert_eq!(t.term("frame:anchor").unwrap().f, 0.0);
        assert_eq!(t.residual_df, 8.0);
    }

    #[test]
    fn anova_errors() {
        let frame = [true, true, false];
        let anchor = [true, false, true];
        assert_eq!(
            anova_2x2(&[1.0, 2.0, 3.0], &frame, &anchor, false),
            Err(StatsError::EmptyCell(0, 0))
        );
        let frame = [false, false, true, true];
        let anchor = [false, true, false, true];
        assert_eq!(
            anova_2x2(&[1.0, 2.0, 3.0, 4.0], &frame, &anchor, true),
            Err(StatsError::RankDeficient)
        );
    }
}
