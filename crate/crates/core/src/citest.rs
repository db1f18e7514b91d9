//! Conditional independence machinery: partial correlation through the
//! precision matrix and the Fisher-Z significance test, plus the per-feature
//! relevance score the three-way classifier consumes.

use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::LabelVector;
use crate::error::{Error, Result};

/// Outcome of one Fisher-Z conditional independence test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiTestResult {
    pub partial_corr: f64,
    pub p_value: f64,
    /// p_value > mu for the mu supplied to the test.
    pub independent: bool,
    pub n: usize,
    pub cond_size: usize,
}

/// Relevance of a feature toward the class attribute and its complement.
/// The two components always sum to exactly 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelevanceScore {
    pub dep_c: f64,
    pub dep_not_c: f64,
}

impl RelevanceScore {
    /// Two-way reference membership: relevant when the test rejects
    /// independence at level `mu`.
    pub fn is_relevant(&self, mu: f64) -> bool {
        self.dep_not_c <= mu
    }
}

const CORR_CLAMP: f64 = 1.0 - 1e-12;
const RIDGE_SCALE: f64 = 1e-8;

fn check_finite(name: &str, col: &[f64]) -> Result<()> {
    if col.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData(format!(
            "{name} contains a non-finite value; complete the data first"
        )));
    }
    Ok(())
}

fn mean_var(col: &[f64]) -> (f64, f64) {
    let n = col.len();
    let mean = col.iter().sum::<f64>() / n as f64;
    let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var)
}

fn effectively_constant(col: &[f64]) -> bool {
    let (mean, var) = mean_var(col);
    var <= 1e-24 * (1.0 + mean * mean)
}

fn standardized(col: &[f64]) -> Vec<f64> {
    let (mean, var) = mean_var(col);
    let sd = var.sqrt();
    col.iter().map(|v| (v - mean) / sd).collect()
}

/// Partial correlation of `x` and `y` given the conditioning columns `cond`,
/// read off the precision matrix Θ of {x, y} ∪ cond:
/// -Θ_xy / sqrt(Θ_xx · Θ_yy), clamped strictly inside (-1, 1).
///
/// The columns are standardized first, so the matrix being inverted is the
/// correlation matrix and the ridge (1e-8 · trace/dim on its diagonal) is
/// scale-free; the result is invariant under positive rescaling of any
/// column. An effectively constant `x` or `y` carries no information and
/// yields 0; constant conditioning columns are dropped.
pub fn partial_correlation(x: &[f64], y: &[f64], cond: &[&[f64]]) -> Result<f64> {
    let n = x.len();
    if y.len() != n || cond.iter().any(|c| c.len() != n) {
        return Err(Error::DimensionMismatch(
            "all columns must have the same length".into(),
        ));
    }
    let needed = cond.len() + 4;
    if n < needed {
        return Err(Error::InsufficientSamples { needed, got: n });
    }
    check_finite("x", x)?;
    check_finite("y", y)?;
    for (i, c) in cond.iter().enumerate() {
        check_finite(&format!("conditioning column {i}"), c)?;
    }

    if effectively_constant(x) || effectively_constant(y) {
        log::warn!("zero-variance column in partial correlation; treating as independent");
        return Ok(0.0);
    }

    // Canonical argument order makes r(x,y|S) and r(y,x|S) run the same
    // arithmetic, so the symmetry holds bit-for-bit.
    let (a, b) = if lex_less(y, x) { (y, x) } else { (x, y) };

    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(2 + cond.len());
    cols.push(standardized(a));
    cols.push(standardized(b));
    for c in cond {
        if effectively_constant(c) {
            log::warn!("dropping zero-variance conditioning column");
            continue;
        }
        cols.push(standardized(c));
    }

    let dim = cols.len();
    let mut corr = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let acc: f64 = cols[i].iter().zip(cols[j].iter()).map(|(u, v)| u * v).sum();
            let v = acc / (n - 1) as f64;
            corr[(i, j)] = v;
            corr[(j, i)] = v;
        }
    }
    let ridge = RIDGE_SCALE * corr.trace() / dim as f64;
    for i in 0..dim {
        corr[(i, i)] += ridge;
    }
    let precision = corr
        .try_inverse()
        .ok_or(Error::SingularCovariance { size: dim })?;
    let denom = precision[(0, 0)] * precision[(1, 1)];
    if !(denom > 0.0) || !precision[(0, 1)].is_finite() {
        return Err(Error::SingularCovariance { size: dim });
    }
    let r = -precision[(0, 1)] / denom.sqrt();
    Ok(r.clamp(-CORR_CLAMP, CORR_CLAMP))
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (u, v) in a.iter().zip(b.iter()) {
        match u.total_cmp(v) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => continue,
        }
    }
    false
}

/// Fisher's Z significance test for a (partial) correlation coefficient.
///
/// z = atanh(r), statistic = sqrt(n - |S| - 3)·|z|, two-sided p-value from
/// the standard normal; `independent` iff p > mu.
pub fn fisher_z_test(partial_corr: f64, n: usize, cond_size: usize, mu: f64) -> Result<CiTestResult> {
    if !(0.0..1.0).contains(&mu) || mu == 0.0 {
        return Err(Error::InvalidConfig(format!(
            "significance level mu must be in (0, 1), got {mu}"
        )));
    }
    if n < cond_size + 4 {
        return Err(Error::InsufficientSamples {
            needed: cond_size + 4,
            got: n,
        });
    }
    if !(partial_corr.abs() < 1.0) {
        return Err(Error::InvalidData(format!(
            "partial correlation must lie strictly inside (-1, 1), got {partial_corr}"
        )));
    }
    let z = partial_corr.atanh();
    let statistic = ((n - cond_size - 3) as f64).sqrt() * z.abs();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let p_value = (2.0 * normal.cdf(-statistic)).clamp(0.0, 1.0);
    Ok(CiTestResult {
        partial_corr,
        p_value,
        independent: p_value > mu,
        n,
        cond_size,
    })
}

/// Partial correlation and Fisher-Z test in one step.
pub fn ci_test(x: &[f64], y: &[f64], cond: &[&[f64]], mu: f64) -> Result<CiTestResult> {
    let r = partial_correlation(x, y, cond)?;
    fisher_z_test(r, x.len(), cond.len(), mu)
}

/// Relevance of feature `f` toward the class attribute: the unconditional
/// Fisher-Z test against the integer label codes, with dep = 1 - p.
pub fn dep_score(f: &[f64], labels: &LabelVector, mu: f64) -> Result<RelevanceScore> {
    if f.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "feature has {} rows, labels {}",
            f.len(),
            labels.len()
        )));
    }
    let y = labels.as_f64();
    let test = ci_test(f, &y, &[], mu)?;
    let dep_c = 1.0 - test.p_value;
    // The complement of a value in [0, 1] round-trips exactly, so the pair
    // sums to 1 without a stray ulp.
    let dep_not_c = 1.0 - dep_c;
    Ok(RelevanceScore { dep_c, dep_not_c })
}
