//! Evaluation harness: KNN classification on the selected features,
//! repeated stratified cross-validation with per-fold masking, the two-way
//! ablation comparison, and a ground-truth synthetic data generator.

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{inject_missing, FeatureTable, LabelVector};
use crate::error::{Error, Result};
use crate::seeds;
use crate::selector::{process_stream, SelectionMode, SelectorConfig};

/// Cross-validation knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalConfig {
    pub folds: usize,
    pub repeats: usize,
    pub knn_k: usize,
    /// Loss rate injected into each training fold before selection.
    pub zeta: f64,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { folds: 5, repeats: 10, knn_k: 3, zeta: 0.1, seed: 0 }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidConfig("folds must be >= 2".into()));
        }
        if self.repeats < 1 {
            return Err(Error::InvalidConfig("repeats must be >= 1".into()));
        }
        if self.knn_k < 1 {
            return Err(Error::InvalidConfig("knn_k must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.zeta) {
            return Err(Error::InvalidConfig(format!(
                "zeta must be in [0, 1), got {}",
                self.zeta
            )));
        }
        Ok(())
    }
}

/// Aggregated cross-validation outcome.
///
/// `runtime_seconds` is wall-clock and deliberately left out of the JSON
/// serialization so identical runs produce byte-identical reports; the CSV
/// row carries the timing instead.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_selected: f64,
    #[serde(skip_serializing)]
    pub runtime_seconds: f64,
    pub per_fold: Vec<f64>,
}

/// Paired reports from the same seeds: full three-way routing vs the
/// two-way ablation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationReport {
    pub three_way: EvalReport,
    pub two_way: EvalReport,
}

/// Euclidean k-nearest-neighbor majority vote.
///
/// Vote ties break toward the class with the smallest summed neighbor
/// distance, then toward the lowest class index. Refuses an empty feature
/// set so the caller can fall back to majority-class prediction explicitly.
pub fn knn_predict(
    train_x: ArrayView2<f64>,
    train_y: &[usize],
    test_x: ArrayView2<f64>,
    k: usize,
) -> Result<Vec<usize>> {
    if k < 1 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    if train_x.ncols() == 0 {
        return Err(Error::EmptyFeatureSet);
    }
    if train_x.ncols() != test_x.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "train has {} feature columns, test has {}",
            train_x.ncols(),
            test_x.ncols()
        )));
    }
    if train_y.len() != train_x.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{} training rows but {} labels",
            train_x.nrows(),
            train_y.len()
        )));
    }
    if train_x.nrows() < k {
        return Err(Error::InvalidData(format!(
            "need at least k = {k} training rows, got {}",
            train_x.nrows()
        )));
    }

    let n_classes = train_y.iter().copied().max().unwrap_or(0) + 1;
    let mut predictions = Vec::with_capacity(test_x.nrows());
    let mut dists: Vec<(f64, usize)> = Vec::with_capacity(train_x.nrows());
    for test_row in test_x.rows() {
        dists.clear();
        for (i, train_row) in train_x.rows().into_iter().enumerate() {
            let d2: f64 = test_row
                .iter()
                .zip(train_row.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            dists.push((d2.sqrt(), i));
        }
        dists.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut votes = vec![0usize; n_classes];
        let mut class_dist = vec![0.0f64; n_classes];
        for &(d, i) in dists.iter().take(k) {
            votes[train_y[i]] += 1;
            class_dist[train_y[i]] += d;
        }
        let top = *votes.iter().max().expect("at least one class");
        let winner = (0..n_classes)
            .filter(|&c| votes[c] == top)
            .min_by(|&a, &b| class_dist[a].total_cmp(&class_dist[b]).then(a.cmp(&b)))
            .expect("non-empty candidate set");
        predictions.push(winner);
    }
    Ok(predictions)
}

/// Most frequent training class; ties go to the lowest class index.
pub fn majority_class(labels: &[usize]) -> usize {
    let n_classes = labels.iter().copied().max().unwrap_or(0) + 1;
    let mut counts = vec![0usize; n_classes];
    for &c in labels {
        counts[c] += 1;
    }
    let top = *counts.iter().max().expect("non-empty labels");
    (0..n_classes).find(|&c| counts[c] == top).expect("winner exists")
}

/// Stratified fold assignment: per class, indices are shuffled and dealt
/// round-robin, so every fold's class proportions match the global ones
/// within one instance per class. Returns, per fold, the test-row indices.
pub fn stratified_folds(labels: &LabelVector, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = seeds::rng(seed, "folds", 0);
    let mut fold_rows: Vec<Vec<usize>> = vec![Vec::new(); folds];
    for class in 0..labels.class_count() {
        let mut members: Vec<usize> = (0..labels.len())
            .filter(|&i| labels.get(i) == class)
            .collect();
        members.shuffle(&mut rng);
        for (i, row) in members.into_iter().enumerate() {
            fold_rows[i % folds].push(row);
        }
    }
    for rows in &mut fold_rows {
        rows.sort_unstable();
    }
    fold_rows
}

/// Train-fold z-score standardization applied to both matrices; constant
/// columns keep unit scale.
fn standardize(train: &mut Array2<f64>, test: &mut Array2<f64>) {
    let n = train.nrows() as f64;
    for c in 0..train.ncols() {
        let col = train.column(c);
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        for v in train.column_mut(c) {
            *v = (*v - mean) / sd;
        }
        for v in test.column_mut(c) {
            *v = (*v - mean) / sd;
        }
    }
}

/// Per-fold selection outcome handed back to the harness: the chosen column
/// indices and the dense completed training columns they index into.
type Selection = (Vec<usize>, Vec<Vec<f64>>);

/// The cross-validation skeleton, parameterized over the selection step so
/// tests can swap in instrumented or pass-through selectors. For each
/// (repeat, fold) cell the training rows are masked at `zeta`, handed to
/// `select`, and the returned features feed a standardized KNN scored on the
/// untouched test rows. `select` receives the masked training table, the
/// training labels, a cell-derived seed, and the cell number.
pub(crate) fn cross_validate_with<F>(
    table: &FeatureTable,
    labels: &LabelVector,
    eval_cfg: &EvalConfig,
    select: F,
) -> Result<EvalReport>
where
    F: Fn(&FeatureTable, &LabelVector, u64, usize) -> Result<Selection> + Sync,
{
    eval_cfg.validate()?;
    if !table.is_complete() {
        return Err(Error::InvalidData(
            "cross-validation needs a fully-known table; masking is applied internally".into(),
        ));
    }
    if labels.len() != table.n_rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} rows",
            labels.len(),
            table.n_rows()
        )));
    }
    for class in 0..labels.class_count() {
        let count = labels.labels().iter().filter(|&&c| c == class).count();
        if count < eval_cfg.folds {
            return Err(Error::InvalidData(format!(
                "class {class} has only {count} instances, fewer than {} folds",
                eval_cfg.folds
            )));
        }
    }

    let started = std::time::Instant::now();
    let cells: Vec<(usize, usize)> = (0..eval_cfg.repeats)
        .flat_map(|r| (0..eval_cfg.folds).map(move |f| (r, f)))
        .collect();

    let outcomes: Result<Vec<(f64, usize)>> = cells
        .par_iter()
        .map(|&(repeat, fold)| {
            let cell = repeat * eval_cfg.folds + fold;
            let fold_rows = stratified_folds(labels, eval_cfg.folds, seeds::derive(eval_cfg.seed, "cv-split", repeat as u64));
            let test_rows = &fold_rows[fold];
            let train_rows: Vec<usize> = (0..table.n_rows())
                .filter(|r| !test_rows.contains(r))
                .collect();

            let train_table = subset_rows(table, &train_rows);
            let train_labels = labels.subset(&train_rows)?;
            let masked = if eval_cfg.zeta > 0.0 {
                inject_missing(&train_table, eval_cfg.zeta, seeds::derive(eval_cfg.seed, "cv-mask", cell as u64))?
            } else {
                train_table
            };

            let sel_seed = seeds::derive(eval_cfg.seed, "cv-select", cell as u64);
            let (chosen, completed) = select(&masked, &train_labels, sel_seed, cell)?;

            let accuracy = if chosen.is_empty() {
                let fallback = majority_class(train_labels.labels());
                let hits = test_rows.iter().filter(|&&r| labels.get(r) == fallback).count();
                hits as f64 / test_rows.len() as f64
            } else {
                let mut train_x = Array2::zeros((train_rows.len(), chosen.len()));
                for (j, &feature) in chosen.iter().enumerate() {
                    for (i, value) in completed[feature].iter().enumerate() {
                        train_x[[i, j]] = *value;
                    }
                }
                let mut test_x = Array2::zeros((test_rows.len(), chosen.len()));
                for (j, &feature) in chosen.iter().enumerate() {
                    for (i, &row) in test_rows.iter().enumerate() {
                        test_x[[i, j]] = table.get(row, feature).expect("complete table");
                    }
                }
                standardize(&mut train_x, &mut test_x);
                let predicted = knn_predict(
                    train_x.view(),
                    train_labels.labels(),
                    test_x.view(),
                    eval_cfg.knn_k,
                )?;
                let hits = predicted
                    .iter()
                    .zip(test_rows.iter())
                    .filter(|&(&p, &r)| p == labels.get(r))
                    .count();
                hits as f64 / test_rows.len() as f64
            };
            Ok((accuracy, chosen.len()))
        })
        .collect();
    let outcomes = outcomes?;

    let per_fold: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
    let mean_accuracy = per_fold.iter().sum::<f64>() / per_fold.len() as f64;
    let std_accuracy = if per_fold.len() > 1 {
        (per_fold
            .iter()
            .map(|a| (a - mean_accuracy) * (a - mean_accuracy))
            .sum::<f64>()
            / (per_fold.len() - 1) as f64)
            .sqrt()
    } else {
        0.0
    };
    let mean_selected =
        outcomes.iter().map(|o| o.1 as f64).sum::<f64>() / outcomes.len() as f64;

    Ok(EvalReport {
        mean_accuracy,
        std_accuracy,
        mean_selected,
        runtime_seconds: started.elapsed().as_secs_f64(),
        per_fold,
    })
}

fn subset_rows(table: &FeatureTable, rows: &[usize]) -> FeatureTable {
    let d = table.n_cols();
    let data = Array2::from_shape_fn((rows.len(), d), |(i, j)| {
        table.get(rows[i], j).expect("complete table")
    });
    FeatureTable::dense(data)
}

/// Repeated stratified cross-validation of the full selection pipeline.
///
/// Per fold: the training rows are masked at `eval_cfg.zeta`, the pipeline
/// selects features from the masked stream (with a seed derived from the
/// cell), and a KNN trained on the completed selected columns is scored on
/// the held-out rows. `sel_cfg.seed` is overridden per cell.
pub fn cross_validate(
    table: &FeatureTable,
    labels: &LabelVector,
    sel_cfg: &SelectorConfig,
    eval_cfg: &EvalConfig,
) -> Result<EvalReport> {
    sel_cfg.validate()?;
    cross_validate_with(table, labels, eval_cfg, |masked, train_labels, sel_seed, _cell| {
        let cfg = SelectorConfig { seed: sel_seed, ..sel_cfg.clone() };
        let result = process_stream(masked.columns(), train_labels, &cfg)?;
        Ok((result.selected, result.completed_columns))
    })
}

/// Run the pipeline twice with identical seeds — full three-way routing and
/// the two-way ablation — and report both.
pub fn run_ablation(
    table: &FeatureTable,
    labels: &LabelVector,
    sel_cfg: &SelectorConfig,
    eval_cfg: &EvalConfig,
) -> Result<AblationReport> {
    let three = SelectorConfig { mode: SelectionMode::ThreeWay, ..sel_cfg.clone() };
    let two = SelectorConfig { mode: SelectionMode::TwoWay, ..sel_cfg.clone() };
    Ok(AblationReport {
        three_way: cross_validate(table, labels, &three, eval_cfg)?,
        two_way: cross_validate(table, labels, &two, eval_cfg)?,
    })
}

/// Where the planted signal lives in a synthetic table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroundTruth {
    /// Columns that drive the labels.
    pub relevant: Vec<usize>,
    /// (duplicate column, source column) pairs.
    pub duplicates: Vec<(usize, usize)>,
    /// Columns carrying no signal.
    pub noise: Vec<usize>,
}

impl GroundTruth {
    /// One group per relevant column: the column itself plus its duplicates.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        self.relevant
            .iter()
            .map(|&r| {
                let mut group = vec![r];
                group.extend(
                    self.duplicates
                        .iter()
                        .filter(|&&(_, src)| src == r)
                        .map(|&(dup, _)| dup),
                );
                group
            })
            .collect()
    }
}

/// Generate a planted dataset: `n_relevant` standard-normal columns drive a
/// binary label through a random-weight linear score plus `noise_sigma`
/// Gaussian noise, `n_duplicates` columns copy relevant columns with tiny
/// jitter, and the rest is independent noise. Column order is shuffled;
/// the returned ground truth uses post-shuffle indices.
pub fn make_synthetic(
    n: usize,
    d: usize,
    n_relevant: usize,
    n_duplicates: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<(FeatureTable, LabelVector, GroundTruth)> {
    if n < 4 {
        return Err(Error::InvalidConfig("need at least 4 instances".into()));
    }
    if d < 1 {
        return Err(Error::InvalidConfig("need at least 1 feature".into()));
    }
    if n_relevant + n_duplicates > d {
        return Err(Error::InvalidConfig(format!(
            "n_relevant + n_duplicates = {} exceeds d = {d}",
            n_relevant + n_duplicates
        )));
    }
    if n_duplicates > 0 && n_relevant == 0 {
        return Err(Error::InvalidConfig(
            "cannot plant duplicates without relevant features".into(),
        ));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "noise_sigma must be finite and >= 0, got {noise_sigma}"
        )));
    }

    let mut rng = seeds::rng(seed, "synth", 0);
    let normals = |rng: &mut rand_chacha::ChaCha8Rng, len: usize| -> Vec<f64> {
        (0..len).map(|_| StandardNormal.sample(rng)).collect()
    };

    let relevant_cols: Vec<Vec<f64>> = (0..n_relevant).map(|_| normals(&mut rng, n)).collect();
    // Every relevant column gets a weight bounded away from zero.
    let weights: Vec<f64> = (0..n_relevant)
        .map(|_| {
            let magnitude = rng.gen_range(0.5..1.5);
            if rng.gen::<bool>() { magnitude } else { -magnitude }
        })
        .collect();

    let labels: Vec<usize> = (0..n)
        .map(|i| {
            let score = if n_relevant == 0 {
                StandardNormal.sample(&mut rng)
            } else {
                let signal: f64 = relevant_cols
                    .iter()
                    .zip(weights.iter())
                    .map(|(col, w)| w * col[i])
                    .sum();
                signal + noise_sigma *rng.sample::<f64, _>(StandardNormal)
            };
            (score > 0.0) as usize
        })
        .collect();

    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(d);
    columns.extend(relevant_cols.iter().cloned());
    let mut duplicate_sources = Vec::with_capacity(n_duplicates);
    for t in 0..n_duplicates {
        let src = t % n_relevant;
        duplicate_sources.push(src);
        columns.push(
            relevant_cols[src]
                .iter()
                .map(|&v| v + 1e-3 * rng.sample::<f64, _>(StandardNormal))
                .collect(),
        );
    }
    while columns.len() < d {
        columns.push(normals(&mut rng, n));
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.shuffle(&mut rng);
    // position[original] = shuffled column index
    let mut position = vec![0usize; d];
    for (new_idx, &orig) in order.iter().enumerate() {
        position[orig] = new_idx;
    }
    let data = Array2::from_shape_fn((n, d), |(r, c)| columns[order[c]][r]);

    let mut relevant: Vec<usize> = (0..n_relevant).map(|i| position[i]).collect();
    relevant.sort_unstable();
    let mut duplicates: Vec<(usize, usize)> = duplicate_sources
        .iter()
        .enumerate()
        .map(|(t, &src)| (position[n_relevant + t], position[src]))
        .collect();
    duplicates.sort_unstable();
    let mut noise: Vec<usize> = (n_relevant + n_duplicates..d).map(|i| position[i]).collect();
    noise.sort_unstable();

    let labels = LabelVector::new(labels)?;
    Ok((FeatureTable::dense(data), labels, GroundTruth { relevant, duplicates, noise }))
}
