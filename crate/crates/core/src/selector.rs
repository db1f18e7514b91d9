//! The streaming selection state machine.
//!
//! Columns arrive in order and are grouped into buffers. Each buffer is
//! completed by the latent factor model, then every column is scored against
//! the class attribute, the threshold pair is re-annealed over the cumulative
//! score history, and the column is routed: strong columns face a redundancy
//! check before admission, weak columns are deferred while nothing is
//! selected yet and otherwise admitted only when conditional dependence
//! persists, irrelevant columns are dropped. Every admission triggers a
//! backward pruning pass over the previously selected columns.

use itertools::Itertools;
use serde::Serialize;

use crate::citest::{ci_test, dep_score};
use crate::data::{buffer_stream, FeatureColumn, LabelVector};
use crate::error::{Error, Result};
use crate::lfa::{self, LfaConfig};
use crate::seeds;
use crate::threeway::{
    anneal_thresholds_from, classify, decision_cost, initial_thresholds, CostMatrix, Region,
    RelevanceRecord, SaParams, ThresholdPair, TwoWayLabel,
};

/// Whether the boundary region participates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// Full three-region routing with annealed thresholds.
    ThreeWay,
    /// Ablation: the plain two-way test routes every column, no deferral.
    TwoWay,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectorConfig {
    /// Significance level of the Fisher-Z tests.
    pub mu: f64,
    /// Completion hyperparameters. The per-buffer seed is derived from
    /// `seed`, so `lfa.seed` is ignored inside the pipeline.
    pub lfa: LfaConfig,
    pub buffer_len: usize,
    pub costs: CostMatrix,
    /// Annealer parameters. The per-step seed is derived from `seed`, so
    /// `sa.seed` is ignored inside the pipeline.
    pub sa: SaParams,
    /// Largest conditioning-set size explored in redundancy tests.
    pub max_cond_size: usize,
    pub seed: u64,
    /// Re-anneal once every this many arriving features.
    pub reanneal_every: usize,
    /// Start each annealing run from the previous thresholds instead of the
    /// cost-induced pair.
    pub warm_start: bool,
    /// Restrict the weak-admission test to singleton conditioning sets.
    pub weak_singletons_only: bool,
    pub mode: SelectionMode,
    /// Pin the thresholds and skip annealing entirely.
    pub fixed_thresholds: Option<ThresholdPair>,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        Self {
            mu: 0.05,
            lfa: LfaConfig::default(),
            buffer_len: 5,
            costs: CostMatrix::default(),
            sa: SaParams::default(),
            max_cond_size: 3,
            seed: 0,
            reanneal_every: 1,
            warm_start: false,
            weak_singletons_only: false,
            mode: SelectionMode::ThreeWay,
            fixed_thresholds: None,
        }
    }
}

impl SelectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "mu must be in (0, 1), got {}",
                self.mu
            )));
        }
        if self.buffer_len < 1 {
            return Err(Error::InvalidConfig("buffer_len must be >= 1".into()));
        }
        if self.max_cond_size < 1 {
            return Err(Error::InvalidConfig("max_cond_size must be >= 1".into()));
        }
        if self.reanneal_every < 1 {
            return Err(Error::InvalidConfig("reanneal_every must be >= 1".into()));
        }
        self.lfa.validate()?;
        self.sa.validate()?;
        self.costs.validate()?;
        Ok(())
    }
}

/// Evolving selection state: the admitted set in admission order, the
/// deferred set in arrival order, the cumulative score history, the dense
/// completed columns of everything that has arrived, and the active
/// thresholds.
#[derive(Debug, Clone)]
pub struct SelectionState {
    pub selected: Vec<usize>,
    pub deferred: Vec<usize>,
    pub history: Vec<RelevanceRecord>,
    pub completed_store: Vec<Vec<f64>>,
    pub thresholds: ThresholdPair,
}

impl SelectionState {
    pub fn new(thresholds: ThresholdPair) -> Self {
        Self {
            selected: Vec::new(),
            deferred: Vec::new(),
            history: Vec::new(),
            completed_store: Vec::new(),
            thresholds,
        }
    }
}

/// What happened to a column at one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepAction {
    /// Arriving column admitted to the selected set.
    Admit,
    /// Arriving weak column parked while nothing is selected.
    Defer,
    /// Arriving column dropped (irrelevant or redundant).
    Discard,
    /// Column failed the independence-test preconditions and was ignored.
    Skip,
    /// Previously selected column removed by backward pruning.
    Prune,
    /// Deferred column admitted during a re-evaluation sweep.
    Promote,
    /// Deferred column dropped during a re-evaluation sweep.
    DropDeferred,
}

/// One JSONL log line. Schema version 1.
#[derive(Debug, Clone, Serialize)]
pub struct StepLog {
    pub schema_version: u32,
    pub t: usize,
    pub feature: usize,
    pub dep_c: Option<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub region: Option<Region>,
    pub action: StepAction,
    pub cost_total: f64,
    pub selected: usize,
    pub deferred: usize,
    /// Missing entries imputed for this column during completion.
    pub completed_entries: usize,
}

#[derive(Debug, Clone)]
pub struct SelectionResult {
    pub selected: Vec<usize>,
    /// Columns still awaiting evidence when the stream ended.
    pub deferred: Vec<usize>,
    pub history: Vec<RelevanceRecord>,
    pub log: Vec<StepLog>,
    /// Dense completed columns of every arrived feature, in arrival order.
    pub completed_columns: Vec<Vec<f64>>,
}

/// Outcome of an admission attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdmitOutcome {
    Admitted,
    Redundant,
    Deferred,
}

/// Search the pool for a conditioning set that renders feature `f`
/// independent of the class. Subset sizes grow from 1 to the cap;
/// within a size, subsets are visited in lexicographic pool order.
/// Tests that fail numerically are skipped, never fatal.
fn independence_witness(
    f: usize,
    pool: &[usize],
    state: &SelectionState,
    y: &[f64],
    mu: f64,
    max_cond_size: usize,
    singletons_only: bool,
) -> bool {
    let cap = if singletons_only { 1 } else { max_cond_size.min(pool.len()) };
    let f_col = &state.completed_store[f];
    for size in 1..=cap {
        for subset in pool.iter().combinations(size) {
            let cond: Vec<&[f64]> = subset
                .iter()
                .map(|&&idx| state.completed_store[idx].as_slice())
                .collect();
            match ci_test(f_col, y, &cond, mu) {
                Ok(res) if res.independent => return true,
                Ok(_) => {}
                Err(err) => {
                    log::debug!("skipping conditioning set {subset:?} for feature {f}: {err}");
                }
            }
        }
    }
    false
}

/// Admission rule for a strong column: discarded when some subset of the
/// selected set (sizes 1..=max_cond_size) renders it independent of the
/// class, admitted otherwise. An empty selected set admits vacuously.
pub fn admit_strong(
    f: usize,
    state: &mut SelectionState,
    labels: &LabelVector,
    mu: f64,
    max_cond_size: usize,
) -> AdmitOutcome {
    let y = labels.as_f64();
    if independence_witness(f, &state.selected.clone(), state, &y, mu, max_cond_size, false) {
        AdmitOutcome::Redundant
    } else {
        state.selected.push(f);
        AdmitOutcome::Admitted
    }
}

/// Admission rule for a weak column: deferred while nothing is selected;
/// otherwise admitted only when dependence persists under every tested
/// conditioning set.
pub fn admit_weak(
    f: usize,
    state: &mut SelectionState,
    labels: &LabelVector,
    mu: f64,
    max_cond_size: usize,
) -> AdmitOutcome {
    admit_weak_with(f, state, labels, mu, max_cond_size, false)
}

pub(crate) fn admit_weak_with(
    f: usize,
    state: &mut SelectionState,
    labels: &LabelVector,
    mu: f64,
    max_cond_size: usize,
    singletons_only: bool,
) -> AdmitOutcome {
    if state.selected.is_empty() {
        state.deferred.push(f);
        return AdmitOutcome::Deferred;
    }
    let y = labels.as_f64();
    if independence_witness(
        f,
        &state.selected.clone(),
        state,
        &y,
        mu,
        max_cond_size,
        singletons_only,
    ) {
        AdmitOutcome::Redundant
    } else {
        state.selected.push(f);
        AdmitOutcome::Admitted
    }
}

/// Backward pruning after `f_new` joined the selected set: every other
/// selected column, in ascending admission order, is removed if some subset
/// of the current remaining set (which always includes `f_new`) renders it
/// independent of the class. Removals take effect immediately, so later
/// candidates are re-tested against the already-reduced set and a group of
/// mutually redundant columns can never be deleted wholesale.
pub fn prune_selected(
    f_new: usize,
    state: &mut SelectionState,
    labels: &LabelVector,
    mu: f64,
    max_cond_size: usize,
) -> Vec<usize> {
    let y = labels.as_f64();
    let candidates: Vec<usize> = state.selected.iter().copied().filter(|&x| x != f_new).collect();
    let mut removed = Vec::new();
    for candidate in candidates {
        let pool: Vec<usize> = state
            .selected
            .iter()
            .copied()
            .filter(|&x| x != candidate)
            .collect();
        if independence_witness(candidate, &pool, state, &y, mu, max_cond_size, false) {
            state.selected.retain(|&x| x != candidate);
            removed.push(candidate);
        }
    }
    removed
}

struct Pipeline<'a> {
    cfg: &'a SelectorConfig,
    labels: &'a LabelVector,
    state: SelectionState,
    log: Vec<StepLog>,
    /// Thresholds reported in the log; in two-way mode both sit at 1 - mu.
    log_alpha: f64,
    log_beta: f64,
}

impl<'a> Pipeline<'a> {
    fn new(cfg: &'a SelectorConfig, labels: &'a LabelVector) -> Result<Self> {
        let thresholds = match (cfg.mode, cfg.fixed_thresholds) {
            (SelectionMode::TwoWay, _) => {
                // Placeholder pair; two-way routing never consults it.
                let cut = 1.0 - cfg.mu;
                ThresholdPair::new(cut, cut - f64::EPSILON.max(cut * 1e-12))?
            }
            (SelectionMode::ThreeWay, Some(pinned)) => pinned,
            (SelectionMode::ThreeWay, None) => initial_thresholds(&cfg.costs)?,
        };
        let (log_alpha, log_beta) = match cfg.mode {
            SelectionMode::TwoWay => (1.0 - cfg.mu, 1.0 - cfg.mu),
            SelectionMode::ThreeWay => (thresholds.alpha(), thresholds.beta()),
        };
        Ok(Self {
            cfg,
            labels,
            state: SelectionState::new(thresholds),
            log: Vec::new(),
            log_alpha,
            log_beta,
        })
    }

    fn current_cost(&self) -> f64 {
        decision_cost(&self.state.history, &self.state.thresholds, &self.cfg.costs).total
    }

    fn push_log(
        &mut self,
        t: usize,
        feature: usize,
        dep_c: Option<f64>,
        region: Option<Region>,
        action: StepAction,
        cost_total: f64,
        completed_entries: usize,
    ) {
        self.log.push(StepLog {
            schema_version: 1,
            t,
            feature,
            dep_c,
            alpha: self.log_alpha,
            beta: self.log_beta,
            region,
            action,
            cost_total,
            selected: self.state.selected.len(),
            deferred: self.state.deferred.len(),
            completed_entries,
        });
    }

    /// Prune after an admission, logging one line per removed column.
    fn prune_and_log(&mut self, t: usize, f_new: usize, cost: f64) {
        let removed = prune_selected(
            f_new,
            &mut self.state,
            self.labels,
            self.cfg.mu,
            self.cfg.max_cond_size,
        );
        for gone in removed {
            let dep = self.history_dep(gone);
            self.push_log(t, gone, dep, self.history_region(gone), StepAction::Prune, cost, 0);
        }
    }

    fn history_dep(&self, feature: usize) -> Option<f64> {
        self.state
            .history
            .iter()
            .find(|r| r.feature_index == feature)
            .map(|r| r.dep_c)
    }

    fn history_region(&self, feature: usize) -> Option<Region> {
        self.state
            .history
            .iter()
            .find(|r| r.feature_index == feature)
            .map(|r| r.region)
    }

    /// Re-evaluate every deferred column by the weak rule. Runs when the
    /// selected set first turns non-empty and again at end of stream.
    fn sweep_deferred(&mut self, t: usize, cost: f64) {
        if self.state.selected.is_empty() {
            return;
        }
        let pending: Vec<usize> = std::mem::take(&mut self.state.deferred);
        for d in pending {
            let outcome = admit_weak_with(
                d,
                &mut self.state,
                self.labels,
                self.cfg.mu,
                self.cfg.max_cond_size,
                self.cfg.weak_singletons_only,
            );
            let dep = self.history_dep(d);
            let region = self.history_region(d);
            match outcome {
                AdmitOutcome::Admitted => {
                    self.push_log(t, d, dep, region, StepAction::Promote, cost, 0);
                    self.prune_and_log(t, d, cost);
                }
                AdmitOutcome::Redundant => {
                    self.push_log(t, d, dep, region, StepAction::DropDeferred, cost, 0);
                }
                AdmitOutcome::Deferred => unreachable!("selected set is non-empty"),
            }
        }
    }

    fn process_column(&mut self, t: usize, column: Vec<f64>, imputed: usize) -> Result<()> {
        debug_assert_eq!(t, self.state.completed_store.len());
        self.state.completed_store.push(column);

        let score = match dep_score(&self.state.completed_store[t], self.labels, self.cfg.mu) {
            Ok(score) => score,
            Err(err @ (Error::InsufficientSamples { .. } | Error::SingularCovariance { .. })) => {
                log::warn!("feature {t} failed the CI-test preconditions, discarding: {err}");
                let cost = self.current_cost();
                self.push_log(t, t, None, None, StepAction::Skip, cost, imputed);
                return Ok(());
            }
            Err(err) => return Err(err),
        };
        let two_way = if score.is_relevant(self.cfg.mu) {
            TwoWayLabel::Relevant
        } else {
            TwoWayLabel::Irrelevant
        };

        match self.cfg.mode {
            SelectionMode::TwoWay => self.route_two_way(t, score.dep_c, two_way, imputed),
            SelectionMode::ThreeWay => self.route_three_way(t, score.dep_c, two_way, imputed),
        }
        Ok(())
    }

    fn route_two_way(&mut self, t: usize, dep_c: f64, two_way: TwoWayLabel, imputed: usize) {
        let region = match two_way {
            TwoWayLabel::Relevant => Region::Strong,
            TwoWayLabel::Irrelevant => Region::Irrelevant,
        };
        self.state.history.push(RelevanceRecord {
            feature_index: t,
            dep_c,
            two_way,
            region,
            timestamp: t,
        });
        let cost = self.current_cost();
        if region == Region::Irrelevant {
            self.push_log(t, t, Some(dep_c), Some(region), StepAction::Discard, cost, imputed);
            return;
        }
        match admit_strong(t, &mut self.state, self.labels, self.cfg.mu, self.cfg.max_cond_size) {
            AdmitOutcome::Admitted => {
                self.push_log(t, t, Some(dep_c), Some(region), StepAction::Admit, cost, imputed);
                self.prune_and_log(t, t, cost);
            }
            _ => {
                self.push_log(t, t, Some(dep_c), Some(region), StepAction::Discard, cost, imputed);
            }
        }
    }

    fn route_three_way(&mut self, t: usize, dep_c: f64, two_way: TwoWayLabel, imputed: usize) {
        // The new record joins the history before the thresholds adapt.
        self.state.history.push(RelevanceRecord {
            feature_index: t,
            dep_c,
            two_way,
            region: Region::Weak,
            timestamp: t,
        });

        if self.cfg.fixed_thresholds.is_none() && t % self.cfg.reanneal_every == 0 {
            let sa = SaParams {
                seed: seeds::derive(self.cfg.seed, "sa", t as u64),
                ..self.cfg.sa
            };
            let start = if self.cfg.warm_start {
                self.state.thresholds
            } else {
                initial_thresholds(&self.cfg.costs).expect("validated costs")
            };
            let (best, _) = anneal_thresholds_from(start, &self.state.history, &self.cfg.costs, &sa)
                .expect("non-empty history and validated params");
            self.state.thresholds = best;
            self.log_alpha = best.alpha();
            self.log_beta = best.beta();
        }

        let region = classify(dep_c, &self.state.thresholds);
        self.state.history.last_mut().expect("just pushed").region = region;
        let cost = self.current_cost();

        match region {
            Region::Strong => {
                let was_empty = self.state.selected.is_empty();
                match admit_strong(t, &mut self.state, self.labels, self.cfg.mu, self.cfg.max_cond_size)
                {
                    AdmitOutcome::Admitted => {
                        self.push_log(t, t, Some(dep_c), Some(region), StepAction::Admit, cost, imputed);
                        self.prune_and_log(t, t, cost);
                        if was_empty {
                            self.sweep_deferred(t, cost);
                        }
                    }
                    _ => {
                        self.push_log(t, t, Some(dep_c), Some(region), StepAction::Discard, cost, imputed);
                    }
                }
            }
            Region::Weak => {
                let outcome = admit_weak_with(
                    t,
                    &mut self.state,
                    self.labels,
                    self.cfg.mu,
                    self.cfg.max_cond_size,
                    self.cfg.weak_singletons_only,
                );
                match outcome {
                    AdmitOutcome::Admitted => {
                        self.push_log(t, t, Some(dep_c), Some(region), StepAction::Admit, cost, imputed);
                        self.prune_and_log(t, t, cost);
                    }
                    AdmitOutcome::Deferred => {
                        self.push_log(t, t, Some(dep_c), Some(region), StepAction::Defer, cost, imputed);
                    }
                    AdmitOutcome::Redundant => {
                        self.push_log(t, t, Some(dep_c), Some(region), StepAction::Discard, cost, imputed);
                    }
                }
            }
            Region::Irrelevant => {
                self.push_log(t, t, Some(dep_c), Some(region), StepAction::Discard, cost, imputed);
            }
        }
    }
}

/// Run the full pipeline over a stream of columns.
///
/// Columns must arrive with sequential indices 0, 1, 2, ... and the same
/// row count as `labels`. Columns that fail the independence-test
/// preconditions are logged and discarded rather than aborting the stream.
pub fn process_stream<I>(
    source: I,
    labels: &LabelVector,
    cfg: &SelectorConfig,
) -> Result<SelectionResult>
where
    I: IntoIterator<Item = FeatureColumn>,
{
    cfg.validate()?;
    let mut pipeline = Pipeline::new(cfg, labels)?;
    let n = labels.len();

    let mut next_index = 0usize;
    for (buffer_idx, buffer) in buffer_stream(source, cfg.buffer_len).enumerate() {
        if buffer.n_rows() != n {
            return Err(Error::DimensionMismatch(format!(
                "columns have {} rows but there are {} labels",
                buffer.n_rows(),
                n
            )));
        }
        for col in buffer.columns() {
            if col.index != next_index {
                return Err(Error::InvalidData(format!(
                    "columns must arrive with sequential indices; expected {next_index}, got {}",
                    col.index
                )));
            }
            next_index += 1;
        }

        // Phase I: complete the buffer when anything is missing.
        let missing = buffer.missing_count();
        let completed: Vec<(Vec<f64>, usize)> = if missing == 0 {
            buffer
                .columns()
                .iter()
                .map(|c| (c.to_dense().expect("complete column"), 0))
                .collect()
        } else {
            let lfa_cfg = LfaConfig {
                seed: seeds::derive(cfg.seed, "lfa", buffer_idx as u64),
                ..cfg.lfa
            };
            let block = lfa::complete(&buffer, &lfa::train(&buffer, &lfa_cfg)?)?;
            buffer
                .columns()
                .iter()
                .enumerate()
                .map(|(j, c)| {
                    let column: Vec<f64> = block.column(j).to_vec();
                    (column, c.n_rows() - c.known_count())
                })
                .collect()
        };

        for (column, imputed) in completed {
            let t = pipeline.state.completed_store.len();
            pipeline.process_column(t, column, imputed)?;
        }
    }

    if next_index == 0 {
        return Err(Error::InvalidData("the column stream is empty".into()));
    }

    // Final sweep: deferred columns get one last look if anything is selected.
    let cost = pipeline.current_cost();
    pipeline.sweep_deferred(next_index, cost);

    let Pipeline { state, log, .. } = pipeline;
    Ok(SelectionResult {
        selected: state.selected,
        deferred: state.deferred,
        history: state.history,
        log,
        completed_columns: state.completed_store,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{inject_missing, FeatureTable};
    use ndarray::Array2;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| StandardNormal.sample(rng)).collect()
    }

    fn labels_from_scores(scores: &[f64]) -> LabelVector {
        LabelVector::new(scores.iter().map(|&s| (s > 0.0) as usize).collect()).unwrap()
    }

    fn table_from_columns(cols: Vec<Vec<f64>>) -> FeatureTable {
        let n = cols[0].len();
        let d = cols.len();
        FeatureTable::dense(Array2::from_shape_fn((n, d), |(r, c)| cols[c][r]))
    }

    fn state_with_columns(cols: Vec<Vec<f64>>, selected: Vec<usize>) -> SelectionState {
        let mut state = SelectionState::new(ThresholdPair::new(0.9, 0.1).unwrap());
        state.completed_store = cols;
        state.selected = selected;
        state
    }

    #[test]
    fn single_perfect_feature_selected() {
        let labels = LabelVector::new((0..40).map(|i| i % 2).collect::<Vec<_>>()).unwrap();
        let table = table_from_columns(vec![labels.as_f64()]);
        let result = process_stream(table.columns(), &labels, &SelectorConfig::default()).unwrap();
        assert_eq!(result.selected, vec![0]);
        assert!(result.deferred.is_empty());
    }

    #[test]
    fn pure_noise_keeps_selection_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let n = 1000;
        let d = 50;
        let labels = LabelVector::new((0..n).map(|i| i % 2).collect::<Vec<_>>()).unwrap();
        let cols: Vec<Vec<f64>> = (0..d).map(|_| normals(&mut rng, n)).collect();
        let table = table_from_columns(cols);
        let result = process_stream(table.columns(), &labels, &SelectorConfig::default()).unwrap();
        assert!(
            result.selected.len() <= 5,
            "selected {} noise features: {:?}",
            result.selected.len(),
            result.selected
        );
    }

    #[test]
    fn admit_strong_vacuous_on_empty_selected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cols = vec![normals(&mut rng, 50)];
        let labels = LabelVector::new((0..50).map(|i| i % 2).collect::<Vec<_>>()).unwrap();
        let mut state = state_with_columns(cols, vec![]);
        assert_eq!(
            admit_strong(0, &mut state, &labels, 0.05, 3),
            AdmitOutcome::Admitted
        );
        assert_eq!(state.selected, vec![0]);
    }

    #[test]
    fn admit_strong_discards_duplicate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200;
        let base = normals(&mut rng, n);
        let labels = labels_from_scores(&base);
        let dup: Vec<f64> = base
            .iter()
            .map(|&v| v + 1e-4 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut state = state_with_columns(vec![base, dup], vec![0]);
        assert_eq!(
            admit_strong(1, &mut state, &labels, 0.05, 3),
            AdmitOutcome::Redundant
        );
        assert_eq!(state.selected, vec![0]);
    }

    #[test]
    fn admit_strong_keeps_orthogonal_signal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 400;
        let f0 = normals(&mut rng, n);
        let f1 = normals(&mut rng, n);
        // Both features drive the labels, so neither screens off the other.
        let scores: Vec<f64> = (0..n).map(|i| f0[i] + f1[i]).collect();
        let labels = labels_from_scores(&scores);
        let mut state = state_with_columns(vec![f0, f1], vec![0]);
        assert_eq!(
            admit_strong(1, &mut state, &labels, 0.05, 3),
            AdmitOutcome::Admitted
        );
        assert_eq!(state.selected, vec![0, 1]);
    }

    #[test]
    fn admit_weak_defers_on_empty_selected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cols = vec![normals(&mut rng, 50)];
        let labels = LabelVector::new((0..50).map(|i| i % 2).collect::<Vec<_>>()).unwrap();
        let mut state = state_with_columns(cols, vec![]);
        assert_eq!(
            admit_weak(0, &mut state, &labels, 0.05, 3),
            AdmitOutcome::Deferred
        );
        assert_eq!(state.deferred, vec![0]);
    }

    #[test]
    fn admit_weak_discards_duplicate_and_keeps_signal() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 300;
        let f0 = normals(&mut rng, n);
        let f1 = normals(&mut rng, n);
        let scores: Vec<f64> = (0..n).map(|i| f0[i] + 0.8 * f1[i]).collect();
        let labels = labels_from_scores(&scores);
        let dup: Vec<f64> = f0
            .iter()
            .map(|&v| v + 1e-4 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut state = state_with_columns(vec![f0, dup, f1], vec![0]);
        assert_eq!(
            admit_weak(1, &mut state, &labels, 0.05, 3),
            AdmitOutcome::Redundant
        );
        assert_eq!(
            admit_weak(2, &mut state, &labels, 0.05, 3),
            AdmitOutcome::Admitted
        );
        assert_eq!(state.selected, vec![0, 2]);
    }

    #[test]
    fn prune_removes_duplicate_of_new_feature() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200;
        let base = normals(&mut rng, n);
        let labels = labels_from_scores(&base);
        let dup: Vec<f64> = base
            .iter()
            .map(|&v| v + 1e-4 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        // Feature 1 (the duplicate) was force-admitted after feature 0.
        let mut state = state_with_columns(vec![base, dup], vec![0, 1]);
        let removed = prune_selected(1, &mut state, &labels, 0.05, 3);
        assert_eq!(removed, vec![0]);
        assert_eq!(state.selected, vec![1]);
    }

    #[test]
    fn prune_leaves_orthogonal_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 400;
        let f0 = normals(&mut rng, n);
        let f1 = normals(&mut rng, n);
        let scores: Vec<f64> = (0..n).map(|i| f0[i] + f1[i]).collect();
        let labels = labels_from_scores(&scores);
        let mut state = state_with_columns(vec![f0, f1], vec![0, 1]);
        let removed = prune_selected(1, &mut state, &labels, 0.05, 3);
        assert!(removed.is_empty());
        assert_eq!(state.selected, vec![0, 1]);
    }

    #[test]
    fn prune_on_singleton_is_a_no_op() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cols = vec![normals(&mut rng, 50)];
        let labels = LabelVector::new((0..50).map(|i| i % 2).collect::<Vec<_>>()).unwrap();
        let mut state = state_with_columns(cols, vec![0]);
        assert!(prune_selected(0, &mut state, &labels, 0.05, 3).is_empty());
    }

    #[test]
    fn prune_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 300;
        let f0 = normals(&mut rng, n);
        let dup: Vec<f64> = f0
            .iter()
            .map(|&v| v + 1e-4 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let f2 = normals(&mut rng, n);
        let scores: Vec<f64> = (0..n).map(|i| f0[i] + f2[i]).collect();
        let labels = labels_from_scores(&scores);
        let mut state = state_with_columns(vec![f0, dup, f2], vec![0, 1, 2]);
        prune_selected(2, &mut state, &labels, 0.05, 3);
        let snapshot = state.selected.clone();
        let removed = prune_selected(2, &mut state, &labels, 0.05, 3);
        assert!(removed.is_empty(), "second pass removed {removed:?}");
        assert_eq!(state.selected, snapshot);
    }

    #[test]
    fn duplicate_stream_keeps_one_representative() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 300;
        let base = normals(&mut rng, n);
        let labels = labels_from_scores(&base);
        let mut cols = vec![base.clone()];
        for _ in 0..3 {
            cols.push(
                base.iter()
                    .map(|&v| v + 1e-4 * rng.sample::<f64, _>(StandardNormal))
                    .collect(),
            );
        }
        let table = table_from_columns(cols);
        let result = process_stream(table.columns(), &labels, &SelectorConfig::default()).unwrap();
        assert_eq!(result.selected.len(), 1, "selected = {:?}", result.selected);
    }

    #[test]
    fn masked_stream_runs_end_to_end() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 120;
        let f0 = normals(&mut rng, n);
        let labels = labels_from_scores(&f0);
        let mut cols = vec![f0];
        for _ in 0..9 {
            cols.push(normals(&mut rng, n));
        }
        let table = table_from_columns(cols);
        let masked = inject_missing(&table, 0.1, 3).unwrap();
        let result = process_stream(masked.columns(), &labels, &SelectorConfig::default()).unwrap();
        assert!(result.selected.contains(&0), "selected = {:?}", result.selected);
        let imputed: usize = result.log.iter().map(|l| l.completed_entries).sum();
        assert_eq!(imputed, 120);
    }

    #[test]
    fn unmasked_stream_reports_zero_completions() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 80;
        let cols: Vec<Vec<f64>> = (0..6).map(|_| normals(&mut rng, n)).collect();
        let labels = LabelVector::new((0..n).map(|i| i % 2).collect::<Vec<_>>()).unwrap();
        let table = table_from_columns(cols);
        let result = process_stream(table.columns(), &labels, &SelectorConfig::default()).unwrap();
        let imputed: usize = result.log.iter().map(|l| l.completed_entries).sum();
        assert_eq!(imputed, 0);
    }

    #[test]
    fn selected_and_deferred_stay_disjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let n = 150;
        let cols: Vec<Vec<f64>> = (0..30).map(|_| normals(&mut rng, n)).collect();
        let scores: Vec<f64> = (0..n).map(|i| cols[3][i] + cols[11][i]).collect();
        let labels = labels_from_scores(&scores);
        let table = table_from_columns(cols);
        let result = process_stream(table.columns(), &labels, &SelectorConfig::default()).unwrap();
        for f in &result.selected {
            assert!(!result.deferred.contains(f));
        }
        let mut all: Vec<usize> = result.selected.clone();
        all.extend(&result.deferred);
        let mut dedup = all.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(all.len(), dedup.len(), "an index appears twice");
        // Everything selected or deferred has a history record.
        for f in all {
            assert!(result.history.iter().any(|r| r.feature_index == f));
        }
    }

    #[test]
    fn pipeline_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let n = 100;
        let cols: Vec<Vec<f64>> = (0..12).map(|_| normals(&mut rng, n)).collect();
        let scores: Vec<f64> = (0..n).map(|i| cols[2][i]).collect();
        let labels = labels_from_scores(&scores);
        let table = table_from_columns(cols);
        let masked = inject_missing(&table, 0.1, 4).unwrap();
        let cfg = SelectorConfig { seed: 77, ..Default::default() };
        let a = process_stream(masked.columns(), &labels, &cfg).unwrap();
        let b = process_stream(masked.columns(), &labels, &cfg).unwrap();
        assert_eq!(a.selected, b.selected);
        assert_eq!(a.deferred, b.deferred);
        assert_eq!(a.history.len(), b.history.len());
        for (x, y) in a.history.iter().zip(b.history.iter()) {
            assert_eq!(x.dep_c.to_bits(), y.dep_c.to_bits());
            assert_eq!(x.region, y.region);
        }
    }

    #[test]
    fn two_way_mode_never_defers() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let n = 150;
        let cols: Vec<Vec<f64>> = (0..20).map(|_| normals(&mut rng, n)).collect();
        let scores: Vec<f64> = (0..n).map(|i| cols[5][i]).collect();
        let labels = labels_from_scores(&scores);
        let table = table_from_columns(cols);
        let cfg = SelectorConfig { mode: SelectionMode::TwoWay, ..Default::default() };
        let result = process_stream(table.columns(), &labels, &cfg).unwrap();
        assert!(result.deferred.is_empty());
        assert!(result.log.iter().all(|l| l.action != StepAction::Defer));
        assert!(result.selected.contains(&5));
    }

    #[test]
    fn empty_stream_rejected() {
        let labels = LabelVector::new(vec![0, 1]).unwrap();
        let err = process_stream(Vec::new(), &labels, &SelectorConfig::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidData(_)));
    }

    #[test]
    fn fixed_thresholds_skip_annealing() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 100;
        let cols: Vec<Vec<f64>> = (0..8).map(|_| normals(&mut rng, n)).collect();
        let labels = LabelVector::new((0..n).map(|i| i % 2).collect::<Vec<_>>()).unwrap();
        let table = table_from_columns(cols);
        let pinned = ThresholdPair::new(0.7, 0.2).unwrap();
        let cfg = SelectorConfig { fixed_thresholds: Some(pinned), ..Default::default() };
        let result = process_stream(table.columns(), &labels, &cfg).unwrap();
        for line in &result.log {
            assert_eq!(line.alpha, 0.7);
            assert_eq!(line.beta, 0.2);
        }
    }
}
