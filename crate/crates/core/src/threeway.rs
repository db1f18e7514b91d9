//! Cost-sensitive three-way partitioning of scored features into strong
//! (POS), weak (BND), and irrelevant (NEG) regions, with threshold
//! initialization from the cost matrix and a simulated-annealing refinement
//! that minimizes the decision cost over the accumulated score history.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The six decision costs: the first triple applies when a feature truly
/// belongs to the relevant set, the second when it does not. Correct
/// decisions never cost more than hesitation, which never costs more than
/// misclassification, and each step up is strict so a boundary region can
/// exist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostMatrix {
    pub r_pp: f64,
    pub r_bp: f64,
    pub r_ep: f64,
    pub r_pe: f64,
    pub r_be: f64,
    pub r_ee: f64,
}

impl CostMatrix {
    pub fn new(r_pp: f64, r_bp: f64, r_ep: f64, r_pe: f64, r_be: f64, r_ee: f64) -> Result<Self> {
        let m = Self { r_pp, r_bp, r_ep, r_pe, r_be, r_ee };
        m.validate()?;
        Ok(m)
    }

    /// Order: r_pp, r_bp, r_ep, r_pe, r_be, r_ee.
    pub fn from_array(values: [f64; 6]) -> Result<Self> {
        Self::new(values[0], values[1], values[2], values[3], values[4], values[5])
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.r_pp, self.r_bp, self.r_ep, self.r_pe, self.r_be, self.r_ee];
        if all.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidConfig(
                "all decision costs must be finite and non-negative".into(),
            ));
        }
        if !(self.r_pp <= self.r_bp && self.r_bp <= self.r_ep) {
            return Err(Error::InvalidConfig(
                "costs must satisfy r_pp <= r_bp <= r_ep".into(),
            ));
        }
        if !(self.r_ee <= self.r_be && self.r_be <= self.r_pe) {
            return Err(Error::InvalidConfig(
                "costs must satisfy r_ee <= r_be <= r_pe".into(),
            ));
        }
        if !(self.r_pe > self.r_be
            && self.r_bp > self.r_pp
            && self.r_be > self.r_ee
            && self.r_ep > self.r_bp)
        {
            return Err(Error::InvalidConfig(
                "cost gaps (r_pe - r_be), (r_bp - r_pp), (r_be - r_ee), (r_ep - r_bp) must all be positive".into(),
            ));
        }
        Ok(())
    }
}

impl Default for CostMatrix {
    /// 0, 1, 10, 10, 1, 0 — free correct decisions, unit hesitation,
    /// tenfold misclassification.
    fn default() -> Self {
        Self { r_pp: 0.0, r_bp: 1.0, r_ep: 10.0, r_pe: 10.0, r_be: 1.0, r_ee: 0.0 }
    }
}

/// A validated threshold pair with 0 <= beta < alpha <= 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdPair {
    alpha: f64,
    beta: f64,
}

impl ThresholdPair {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !alpha.is_finite() || !beta.is_finite() || beta < 0.0 || alpha > 1.0 || beta >= alpha {
            return Err(Error::InvalidConfig(format!(
                "thresholds must satisfy 0 <= beta < alpha <= 1, got alpha = {alpha}, beta = {beta}"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Region assignment of one feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    #[serde(rename = "POS")]
    Strong,
    #[serde(rename = "BND")]
    Weak,
    #[serde(rename = "NEG")]
    Irrelevant,
}

/// Two-way reference membership from the plain Fisher-Z test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwoWayLabel {
    Relevant,
    Irrelevant,
}

/// One scored feature: its relevance, the two-way reference label, and the
/// region it was assigned under the thresholds active at classification time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelevanceRecord {
    pub feature_index: usize,
    pub dep_c: f64,
    pub two_way: TwoWayLabel,
    pub region: Region,
    pub timestamp: usize,
}

/// How many history records each (true label, assigned region) cell holds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RegionCounts {
    pub m_pp: usize,
    pub m_bp: usize,
    pub m_ep: usize,
    pub m_pe: usize,
    pub m_be: usize,
    pub m_ee: usize,
}

impl RegionCounts {
    pub fn total(&self) -> usize {
        self.m_pp + self.m_bp + self.m_ep + self.m_pe + self.m_be + self.m_ee
    }
}

/// Simulated annealing parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaParams {
    pub init_t: f64,
    pub min_t: f64,
    /// Cooling factor in (0, 1).
    pub delta: f64,
    /// Boltzmann scale in the acceptance probability.
    pub k: f64,
    /// Spread of the Gaussian proposal noise.
    pub step_sigma: f64,
    pub seed: u64,
}

impl Default for SaParams {
    fn default() -> Self {
        Self { init_t: 1.0, min_t: 1e-3, delta: 0.95, k: 1.0, step_sigma: 0.05, seed: 0 }
    }
}

impl SaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.init_t > 0.0 && self.min_t > 0.0 && self.min_t < self.init_t) {
            return Err(Error::InvalidConfig(format!(
                "temperatures must satisfy 0 < min_t < init_t, got init_t = {}, min_t = {}",
                self.init_t, self.min_t
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "cooling factor delta must be in (0, 1), got {}",
                self.delta
            )));
        }
        if !(self.k > 0.0) {
            return Err(Error::InvalidConfig(format!("k must be > 0, got {}", self.k)));
        }
        if !(self.step_sigma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "step_sigma must be > 0, got {}",
                self.step_sigma
            )));
        }
        Ok(())
    }
}

/// Thresholds induced by the cost matrix:
/// alpha = (r_pe - r_be) / ((r_pe - r_be) + (r_bp - r_pp)),
/// beta  = (r_be - r_ee) / ((r_be - r_ee) + (r_ep - r_bp)).
///
/// Errors when the induced pair collapses (beta >= alpha), since such a
/// cost matrix admits no boundary region.
pub fn initial_thresholds(costs: &CostMatrix) -> Result<ThresholdPair> {
    costs.validate()?;
    let alpha = (costs.r_pe - costs.r_be) / ((costs.r_pe - costs.r_be) + (costs.r_bp - costs.r_pp));
    let beta = (costs.r_be - costs.r_ee) / ((costs.r_be - costs.r_ee) + (costs.r_ep - costs.r_bp));
    ThresholdPair::new(alpha, beta).map_err(|_| Error::DegenerateCosts { alpha, beta })
}

/// Region of a relevance score under the thresholds: POS when
/// dep_c >= alpha, NEG when dep_c <= beta, BND otherwise. Both boundary
/// values are assigned to the outer regions.
pub fn classify(dep_c: f64, thresholds: &ThresholdPair) -> Region {
    debug_assert!((0.0..=1.0).contains(&dep_c), "dep_c out of range: {dep_c}");
    if dep_c >= thresholds.alpha {
        Region::Strong
    } else if dep_c <= thresholds.beta {
        Region::Irrelevant
    } else {
        Region::Weak
    }
}

/// Re-classify every record's score under `thresholds` and bucket by the
/// two-way reference label.
pub fn region_counts(history: &[RelevanceRecord], thresholds: &ThresholdPair) -> RegionCounts {
    let mut counts = RegionCounts::default();
    for record in history {
        match (record.two_way, classify(record.dep_c, thresholds)) {
            (TwoWayLabel::Relevant, Region::Strong) => counts.m_pp += 1,
            (TwoWayLabel::Relevant, Region::Weak) => counts.m_bp += 1,
            (TwoWayLabel::Relevant, Region::Irrelevant) => counts.m_ep += 1,
            (TwoWayLabel::Irrelevant, Region::Strong) => counts.m_pe += 1,
            (TwoWayLabel::Irrelevant, Region::Weak) => counts.m_be += 1,
            (TwoWayLabel::Irrelevant, Region::Irrelevant) => counts.m_ee += 1,
        }
    }
    counts
}

/// Total, misclassification, and delayed-decision cost of a history under
/// a threshold pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecisionCost {
    pub total: f64,
    pub mis: f64,
    pub delayed: f64,
}

/// Decision cost of the history under `thresholds`: every record is
/// re-classified, and the six region counts are priced by the cost matrix.
/// The correct-classification terms are included, so non-zero r_pp / r_ee
/// are honored.
pub fn decision_cost(
    history: &[RelevanceRecord],
    thresholds: &ThresholdPair,
    costs: &CostMatrix,
) -> DecisionCost {
    let counts = region_counts(history, thresholds);
    let mis = costs.r_ep * counts.m_ep as f64 + costs.r_pe * counts.m_pe as f64;
    let delayed = costs.r_bp * counts.m_bp as f64 + costs.r_be * counts.m_be as f64;
    let correct = costs.r_pp * counts.m_pp as f64 + costs.r_ee * counts.m_ee as f64;
    DecisionCost { total: mis + delayed + correct, mis, delayed }
}

/// Anneal the thresholds starting from the cost-induced pair.
///
/// Returns the best-cost thresholds ever visited together with their cost;
/// the result never exceeds the cost at the starting point.
pub fn anneal_thresholds(
    history: &[RelevanceRecord],
    costs: &CostMatrix,
    sa: &SaParams,
) -> Result<(ThresholdPair, f64)> {
    let start = initial_thresholds(costs)?;
    anneal_thresholds_from(start, history, costs, sa)
}

/// Anneal from an explicit starting pair (used for warm restarts).
///
/// At each temperature a Gaussian perturbation of the current pair is
/// proposed (re-drawn until 0 <= beta < alpha <= 1), accepted outright when
/// the cost does not increase and otherwise with probability
/// exp(-(new - best) / (k · T)); the temperature then cools by `delta`
/// until it reaches `min_t`.
pub fn anneal_thresholds_from(
    start: ThresholdPair,
    history: &[RelevanceRecord],
    costs: &CostMatrix,
    sa: &SaParams,
) -> Result<(ThresholdPair, f64)> {
    sa.validate()?;
    if history.is_empty() {
        return Err(Error::InvalidData(
            "cannot anneal thresholds over an empty history".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sa.seed);
    let noise = Normal::new(0.0, sa.step_sigma).expect("validated step_sigma");

    let mut current = start;
    let mut current_cost = decision_cost(history, &current, costs).total;
    let mut best = current;
    let mut best_cost = current_cost;

    let mut now_t = sa.init_t;
    while now_t > sa.min_t {
        let proposal = loop {
            let alpha = current.alpha + noise.sample(&mut rng);
            let beta = current.beta + noise.sample(&mut rng);
            if let Ok(pair) = ThresholdPair::new(alpha, beta) {
                break pair;
            }
        };
        let new_cost = decision_cost(history, &proposal, costs).total;
        let accept = if new_cost <= current_cost {
            true
        } else {
            let res = new_cost - best_cost;
            rng.gen::<f64>() < (-res / (sa.k * now_t)).exp()
        };
        if accept {
            current = proposal;
            current_cost = new_cost;
            if new_cost < best_cost {
                best = proposal;
                best_cost = new_cost;
            }
        }
        // best tracks the minimum over everything visited.
        debug_assert!(best_cost <= current_cost);
        now_t *= sa.delta;
    }
    Ok((best, best_cost))
}
