//! Paired-sample statistics used to compare experiment conditions over seeds.

use serde::Serialize;
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, StudentsT};
use statrs::statistics::Statistics;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignTest {
    /// Pairs where the first sample is larger.
    pub wins: u64,
    /// Pairs where the second sample is larger.
    pub losses: u64,
    /// Exact one-sided p-value for "first > second"; ties are discarded.
    pub p_value: f64,
}

/// Exact one-sided sign test of `a[i] > b[i]`.
pub fn sign_test(a: &[f64], b: &[f64]) -> Result<SignTest> {
    check_pairs(a, b)?;
    let wins = a.iter().zip(b).filter(|(x, y)| x > y).count() as u64;
    let losses = a.iter().zip(b).filter(|(x, y)| x < y).count() as u64;
    let n = wins + losses;
    let p_value = if wins == 0 {
        1.0
    } else {
        let dist = Binomial::new(0.5, n).expect("valid binomial parameters");
        // P(X >= wins)
        dist.sf(wins - 1)
    };
    Ok(SignTest {
        wins,
        losses,
        p_value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedT {
    pub mean_difference: f64,
    pub t: f64,
    pub df: f64,
    /// One-sided p-value for "mean(a - b) > 0".
    pub p_value: f64,
}

pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedT> {
    check_pairs(a, b)?;
    if a.len() < 2 {
        return Err(Error::InvalidConfig(
            "paired t-test needs at least two pairs".into(),
        ));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = diffs.len() as f64;
    let mean = diffs.iter().mean();
    let sd = diffs.iter().std_dev();
    let df = n - 1.0;
    let (t, p_value) = if sd == 0.0 {
        let p = if mean > 0.0 { 0.0 } else { 1.0 };
        (f64::INFINITY.copysign(mean), p)
    } else {
        let t = mean / (sd / n.sqrt());
        let dist = StudentsT::new(0.0, 1.0, df).expect("valid t parameters");
        (t, dist.sf(t))
    };
    Ok(PairedT {
        mean_difference: mean,
        t,
        df,
        p_value,
    })
}

fn check_pairs(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().mean()
}

/// Sample standard deviation (`n - 1` denominator).
pub fn std_dev(xs: &[f64]) -> f64 {
    xs.iter().std_dev()
}

/// `sqrt((var(a) + var(b)) / 2)` with sample variances.
pub fn pooled_std_dev(a: &[f64], b: &[f64]) -> f64 {
    ((a.iter().variance() + b.iter().variance()) / 2.0).sqrt()
}
