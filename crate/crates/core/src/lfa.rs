//! Rank-constrained latent factor completion of sparse feature buffers.
//!
//! A buffer U (N×L, partially known) is approximated by P·Qᵀ with P (N×h)
//! and Q (L×h), trained by SGD over the known entries only, with L2
//! regularization on both factor matrices. Missing entries are then filled
//! with the factor product while known entries are preserved verbatim.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::FeatureBuffer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LfaConfig {
    /// Latent dimension; the effective rank is min(h, N, L).
    pub h: usize,
    /// L2 regularization coefficient (>= 0).
    pub lambda: f64,
    /// SGD learning rate (> 0).
    pub eta: f64,
    pub max_epochs: usize,
    /// Stop once the epoch-over-epoch improvement of known-entry RMSE
    /// drops below this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for LfaConfig {
    fn default() -> Self {
        Self {
            h: 10,
            lambda: 0.01,
            eta: 0.01,
            max_epochs: 1000,
            tol: 1e-4,
            seed: 0,
        }
    }
}

impl LfaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.h < 1 {
            return Err(Error::InvalidConfig("latent dimension h must be >= 1".into()));
        }
        if self.lambda < 0.0 || !self.lambda.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if self.eta <= 0.0 || !self.eta.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "eta must be finite and > 0, got {}",
                self.eta
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidConfig("max_epochs must be >= 1".into()));
        }
        if self.tol <= 0.0 || !self.tol.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "tol must be finite and > 0, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

/// Trained factor matrices: P is N×h_eff, Q is L×h_eff.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentFactors {
    pub p: Array2<f64>,
    pub q: Array2<f64>,
}

impl LatentFactors {
    pub fn rank(&self) -> usize {
        self.p.ncols()
    }

    /// Predicted value for cell (row, col): the P-row · Q-row dot product.
    pub fn predict(&self, row: usize, col: usize) -> f64 {
        self.p.row(row).dot(&self.q.row(col))
    }

    fn all_finite(&self) -> bool {
        self.p.iter().all(|v| v.is_finite()) && self.q.iter().all(|v| v.is_finite())
    }
}

/// One SGD step on a single known entry.
///
/// Computes err = value - p·q once, then applies the coupled pair of
/// updates with both gradients taken at the pre-update point:
/// p_k += eta·(q_k·err - lambda·p_k), q_k += eta·(p_k·err - lambda·q_k).
pub(crate) fn sgd_update(p_row: &mut [f64], q_row: &mut [f64], old_p: &mut Vec<f64>, value: f64, eta: f64, lambda: f64) {
    let err = value - dot(p_row, q_row);
    old_p.clear();
    old_p.extend_from_slice(p_row);
    for (pk, &qk) in p_row.iter_mut().zip(q_row.iter()) {
        *pk += eta * (qk * err - lambda * *pk);
    }
    for (qk, &pk_before) in q_row.iter_mut().zip(old_p.iter()) {
        *qk += eta * (pk_before * err - lambda * *qk);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Train latent factors on the buffer's known entries.
///
/// Initialization is uniform in [0, 0.1), seeded; each epoch visits the
/// known entries in a freshly shuffled order drawn from the same RNG, so a
/// fixed seed reproduces the factors bit-for-bit. Training stops at
/// `max_epochs`, or earlier once the RMSE improvement falls below `tol`,
/// and aborts with a divergence error if the RMSE grows tenfold over its
/// initial value or any quantity turns non-finite.
pub fn train(buffer: &FeatureBuffer, cfg: &LfaConfig) -> Result<LatentFactors> {
    cfg.validate()?;
    let mut entries: Vec<(usize, usize, f64)> = buffer.known_entries().collect();
    if entries.is_empty() {
        return Err(Error::InvalidData(
            "cannot train latent factors on a buffer with no known entries".into(),
        ));
    }
    let n = buffer.n_rows();
    let l = buffer.n_cols();
    let h_eff = cfg.h.min(n).min(l);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut p = Array2::zeros((n, h_eff));
    for v in p.iter_mut() {
        *v = rng.gen_range(0.0..0.1);
    }
    let mut q = Array2::zeros((l, h_eff));
    for v in q.iter_mut() {
        *v = rng.gen_range(0.0..0.1);
    }

    let mut factors = LatentFactors { p, q };
    let initial_rmse = rmse_over(&entries, &factors);
    let mut prev_rmse = initial_rmse;
    let mut old_p = Vec::with_capacity(h_eff);

    for epoch in 1..=cfg.max_epochs {
        entries.shuffle(&mut rng);
        let LatentFactors { p, q } = &mut factors;
        for &(row, col, value) in &entries {
            let p_row = p.row_mut(row).into_slice().expect("row-major layout");
            let q_row = q.row_mut(col).into_slice().expect("row-major layout");
            sgd_update(p_row, q_row, &mut old_p, value, cfg.eta, cfg.lambda);
        }
        let rmse = rmse_over(&entries, &factors);
        if !rmse.is_finite() || rmse > 10.0 * initial_rmse + 1e-12 {
            return Err(Error::Divergence { epoch });
        }
        if prev_rmse - rmse < cfg.tol {
            break;
        }
        prev_rmse = rmse;
    }

    if !factors.all_finite() {
        return Err(Error::Divergence { epoch: cfg.max_epochs });
    }
    Ok(factors)
}

fn rmse_over(entries: &[(usize, usize, f64)], factors: &LatentFactors) -> f64 {
    let sum: f64 = entries
        .iter()
        .map(|&(row, col, value)| {
            let err = value - factors.predict(row, col);
            err * err
        })
        .sum();
    (sum / entries.len() as f64).sqrt()
}

fn check_dims(buffer: &FeatureBuffer, factors: &LatentFactors) -> Result<()> {
    if factors.p.nrows() != buffer.n_rows()
        || factors.q.nrows() != buffer.n_cols()
        || factors.p.ncols() != factors.q.ncols()
    {
        return Err(Error::DimensionMismatch(format!(
            "buffer is {}x{} but factors are {}x{} / {}x{}",
            buffer.n_rows(),
            buffer.n_cols(),
            factors.p.nrows(),
            factors.p.ncols(),
            factors.q.nrows(),
            factors.q.ncols(),
        )));
    }
    Ok(())
}

/// Fill the buffer's missing entries with factor predictions; known entries
/// pass through unchanged.
pub fn complete(buffer: &FeatureBuffer, factors: &LatentFactors) -> Result<Array2<f64>> {
    check_dims(buffer, factors)?;
    let (n, l) = (buffer.n_rows(), buffer.n_cols());
    let mut out = Array2::zeros((n, l));
    for col in 0..l {
        for row in 0..n {
            out[[row, col]] = match buffer.get(row, col) {
                Some(v) => v,
                None => factors.predict(row, col),
            };
        }
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData(
            "completion produced a non-finite value".into(),
        ));
    }
    Ok(out)
}

/// Root mean squared error of the factor model over the known entries.
pub fn rmse_known(buffer: &FeatureBuffer, factors: &LatentFactors) -> Result<f64> {
    check_dims(buffer, factors)?;
    let entries: Vec<(usize, usize, f64)> = buffer.known_entries().collect();
    if entries.is_empty() {
        return Err(Error::InvalidData("buffer has no known entries".into()));
    }
    Ok(rmse_over(&entries, &factors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{inject_missing, stream_columns, FeatureColumn, FeatureTable};
    use ndarray::array;

    fn buffer_from_dense(values: Array2<f64>) -> FeatureBuffer {
        let table = FeatureTable::dense(values);
        let buffer = stream_columns(&table, table.n_cols()).next().unwrap();
        buffer
    }

    fn buffer_from_options(cols: Vec<Vec<Option<f64>>>) -> FeatureBuffer {
        let columns = cols
            .into_iter()
            .enumerate()
            .map(|(index, values)| FeatureColumn { index, values })
            .collect();
        FeatureBuffer::new(columns).unwrap()
    }

    #[test]
    fn single_entry_single_step_matches_hand_computation() {
        let mut p = vec![1.0];
        let mut q = vec![1.0];
        let mut scratch = Vec::new();
        sgd_update(&mut p, &mut q, &mut scratch, 2.0, 0.1, 0.0);
        assert!((p[0] - 1.1).abs() < 1e-15, "p = {}", p[0]);
        assert!((q[0] - 1.1).abs() < 1e-15, "q = {}", q[0]);
    }

    #[test]
    fn defaults_are_valid() {
        let cfg = LfaConfig::default();
        assert_eq!((cfg.h, cfg.lambda, cfg.eta), (10, 0.01, 0.01));
        cfg.validate().unwrap();
    }

    #[test]
    fn rank_one_exact_fit() {
        let u = [1.0, 2.0, 3.0, 4.0];
        let v = [0.5, 1.0, 2.0];
        let dense = Array2::from_shape_fn((4, 3), |(r, c)| u[r] * v[c]);
        let buffer = buffer_from_dense(dense);
        let cfg = LfaConfig {
            h: 1,
            lambda: 0.0,
            eta: 0.05,
            max_epochs: 5000,
            tol: 1e-12,
            seed: 3,
        };
        let factors = train(&buffer, &cfg).unwrap();
        let rmse = rmse_known(&buffer, &factors).unwrap();
        assert!(rmse <= 1e-3, "rmse = {rmse}");
    }

    #[test]
    fn effective_rank_is_clamped() {
        let buffer = buffer_from_dense(array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]);
        let cfg = LfaConfig { h: 10, ..Default::default() };
        let factors = train(&buffer, &cfg).unwrap();
        assert_eq!(factors.rank(), 2);
    }

    #[test]
    fn empty_known_set_rejected() {
        let buffer = buffer_from_options(vec![vec![None, None], vec![None, None]]);
        assert!(matches!(
            train(&buffer, &LfaConfig::default()),
            Err(Error::InvalidData(_))
        ));
    }

    #[test]
    fn complete_preserves_known_entries() {
        let dense = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let buffer = buffer_from_dense(dense.clone());
        let factors = train(&buffer, &LfaConfig::default()).unwrap();
        let out = complete(&buffer, &factors).unwrap();
        assert_eq!(out, dense);
    }

    #[test]
    fn complete_fills_missing_with_dot_product() {
        let buffer = buffer_from_options(vec![
            vec![Some(1.0), Some(1.0)],
            vec![Some(1.0), Some(1.0)],
            vec![Some(1.0), None],
        ]);
        let factors = LatentFactors {
            p: array![[1.0, 0.0], [1.0, 2.0]],
            q: array![[1.0, 0.0], [1.0, 0.0], [3.0, 4.0]],
        };
        let out = complete(&buffer, &factors).unwrap();
        assert_eq!(out[[1, 2]], 11.0);
        assert_eq!(out[[0, 2]], 1.0);
    }

    #[test]
    fn complete_dimension_mismatch() {
        let buffer = buffer_from_dense(array![[1.0, 2.0], [3.0, 4.0]]);
        let factors = LatentFactors {
            p: Array2::zeros((3, 1)),
            q: Array2::zeros((2, 1)),
        };
        assert!(matches!(
            complete(&buffer, &factors),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn rmse_on_zero_factors_matches_value_norm() {
        let dense = array![[3.0, -1.0], [0.5, 2.0]];
        let buffer = buffer_from_dense(dense.clone());
        let factors = LatentFactors {
            p: Array2::zeros((2, 1)),
            q: Array2::zeros((2, 1)),
        };
        let expected = (dense.iter().map(|v| v * v).sum::<f64>() / 4.0).sqrt();
        let got = rmse_known(&buffer, &factors).unwrap();
        assert!((got - expected).abs() < 1e-14);
    }

    #[test]
    fn rmse_single_entry() {
        let buffer = buffer_from_options(vec![vec![Some(3.0)]]);
        let factors = LatentFactors {
            p: Array2::zeros((1, 1)),
            q: Array2::zeros((1, 1)),
        };
        assert!((rmse_known(&buffer, &factors).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn masked_rank_one_beats_mean_fill() {
        // Held-out completion error against a column-mean-fill baseline.
        let u: Vec<f64> = (0..50).map(|i| 1.0 + (i as f64) * 0.05).collect();
        let v = [0.8, 1.1, 0.6, 1.4, 0.9];
        let dense = Array2::from_shape_fn((50, 5), |(r, c)| u[r] * v[c]);
        let table = FeatureTable::dense(dense.clone());
        let masked = inject_missing(&table, 0.1, 9).unwrap();
        let buffer = stream_columns(&masked, 5).next().unwrap();

        let cfg = LfaConfig { h: 2, seed: 4, max_epochs: 3000, tol: 1e-9, ..Default::default() };
        let factors = train(&buffer, &cfg).unwrap();
        let completed = complete(&buffer, &factors).unwrap();

        let mut col_means = vec![0.0; 5];
        for c in 0..5 {
            let (mut sum, mut count) = (0.0, 0usize);
            for r in 0..50 {
                if let Some(val) = masked.get(r, c) {
                    sum += val;
                    count += 1;
                }
            }
            col_means[c] = sum / count as f64;
        }

        let (mut sq_lfa, mut sq_mean, mut held_out) = (0.0, 0.0, 0usize);
        for r in 0..50 {
            for c in 0..5 {
                if masked.get(r, c).is_none() {
                    let truth = dense[[r, c]];
                    sq_lfa += (completed[[r, c]] - truth).powi(2);
                    sq_mean += (col_means[c] - truth).powi(2);
                    held_out += 1;
                }
            }
        }
        assert!(held_out > 0);
        let rmse_lfa = (sq_lfa / held_out as f64).sqrt();
        let rmse_mean = (sq_mean / held_out as f64).sqrt();
        assert!(
            rmse_lfa <= 0.5 * rmse_mean,
            "lfa {rmse_lfa} vs mean-fill {rmse_mean}"
        );
    }

    #[test]
    fn single_update_rarely_increases_entry_error() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let h = 6;
        let mut worse = 0usize;
        let trials = 2000;
        let mut scratch = Vec::new();
        for _ in 0..trials {
            let mut p: Vec<f64> = (0..h).map(|_| StandardNormal.sample(&mut rng)).collect();
            let mut q: Vec<f64> = (0..h).map(|_| StandardNormal.sample(&mut rng)).collect();
            let value: f64 = StandardNormal.sample(&mut rng);
            let before = (value - dot(&p, &q)).powi(2);
            sgd_update(&mut p, &mut q, &mut scratch, value, 0.01, 0.0);
            let after = (value - dot(&p, &q)).powi(2);
            if after > before + 1e-15 {
                worse += 1;
            }
        }
        assert!(
            (worse as f64) < 0.01 * trials as f64,
            "{worse}/{trials} updates increased the entry error"
        );
    }

    #[test]
    fn regularization_shrinks_factor_norms_on_zero_data() {
        // With all known values zero and lambda > 0, the factor norms must
        // shrink every epoch. Training for k epochs with a fixed seed is a
        // prefix of training for k+1, so the per-epoch trajectory can be
        // read off a sweep over max_epochs.
        let dense = Array2::zeros((8, 4));
        let buffer = buffer_from_dense(dense);
        let mut last = f64::INFINITY;
        for epochs in 1..=6 {
            let cfg = LfaConfig {
                h: 3,
                lambda: 0.5,
                eta: 0.05,
                max_epochs: epochs,
                tol: 1e-300,
                seed: 12,
            };
            let factors = train(&buffer, &cfg).unwrap();
            let norm = factors.p.iter().map(|v| v * v).sum::<f64>().sqrt()
                + factors.q.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(norm <= last + 1e-12, "epoch {epochs}: {norm} > {last}");
            last = norm;
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let h = 4;
        let lambda = 0.3;
        // Per-entry loss: 0.5·(v - p·q)² + (lambda/2)·(Σp² + Σq²).
        let loss = |p: &[f64], q: &[f64], v: f64| {
            0.5 * (v - dot(p, q)).powi(2)
                + 0.5 * lambda * (p.iter().map(|x| x * x).sum::<f64>()
                    + q.iter().map(|x| x * x).sum::<f64>())
        };
        for _ in 0..100 {
            let p: Vec<f64> = (0..h).map(|_| StandardNormal.sample(&mut rng)).collect();
            let q: Vec<f64> = (0..h).map(|_| StandardNormal.sample(&mut rng)).collect();
            let v: f64 = StandardNormal.sample(&mut rng);
            let err = v - dot(&p, &q);
            let step = 1e-6;
            for k in 0..h {
                let analytic_p = -q[k] * err + lambda * p[k];
                let mut hi = p.clone();
                let mut lo = p.clone();
                hi[k] += step;
                lo[k] -= step;
                let numeric = (loss(&hi, &q, v) - loss(&lo, &q, v)) / (2.0 * step);
                let denom = analytic_p.abs().max(1e-8);
                assert!(
                    ((analytic_p - numeric) / denom).abs() < 1e-5,
                    "p[{k}]: analytic {analytic_p} vs numeric {numeric}"
                );

                let analytic_q = -p[k] * err + lambda * q[k];
                let mut hi = q.clone();
                let mut lo = q.clone();
                hi[k] += step;
                lo[k] -= step;
                let numeric = (loss(&p, &hi, v) - loss(&p, &lo, v)) / (2.0 * step);
                let denom = analytic_q.abs().max(1e-8);
                assert!(
                    ((analytic_q - numeric) / denom).abs() < 1e-5,
                    "q[{k}]: analytic {analytic_q} vs numeric {numeric}"
                );
            }
        }
    }

    #[test]
    fn training_is_deterministic() {
        let dense = Array2::from_shape_fn((12, 6), |(r, c)| ((r * 6 + c) % 7) as f64);
        let table = FeatureTable::dense(dense);
        let masked = inject_missing(&table, 0.2, 5).unwrap();
        let buffer = stream_columns(&masked, 6).next().unwrap();
        let cfg = LfaConfig { seed: 99, max_epochs: 50, ..Default::default() };
        let a = train(&buffer, &cfg).unwrap();
        let b = train(&buffer, &cfg).unwrap();
        let bits = |m: &Array2<f64>| m.iter().map(|v| v.to_bits()).collect::<Vec<u64>>();
        assert_eq!(bits(&a.p), bits(&b.p));
        assert_eq!(bits(&a.q), bits(&b.q));
    }

    #[test]
    fn runaway_learning_rate_diverges() {
        let dense = Array2::from_shape_fn((10, 5), |(r, c)| 10.0 * ((r + c) as f64));
        let buffer = buffer_from_dense(dense);
        let cfg = LfaConfig {
            eta: 5.0,
            max_epochs: 200,
            ..Default::default()
        };
        match train(&buffer, &cfg) {
            Err(Error::Divergence { epoch }) => assert!(epoch >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
