use serde::{Deserialize, Serialize};

use crate::sim::NodeState;

/// Confusion counts for alarm classification. "Positive" means the
/// measurement is labelled anomalous.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassificationOutcome {
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
    pub error_rate: f64,
}

impl ClassificationOutcome {
    pub fn total(&self) -> usize {
        self.true_positive + self.false_positive + self.true_negative + self.false_negative
    }
}

/// Confusion counts over paired (decided, truth) labels.
pub fn tally<I: IntoIterator<Item = (bool, bool)>>(labels: I) -> ClassificationOutcome {
    let mut out = ClassificationOutcome::default();
    for pair in labels {
        match pair {
            (true, true) => out.true_positive += 1,
            (true, false) => out.false_positive += 1,
            (false, false) => out.true_negative += 1,
            (false, true) => out.false_negative += 1,
        }
    }
    let n = out.total();
    out.error_rate = if n == 0 {
        0.0
    } else {
        (out.false_positive + out.false_negative) as f64 / n as f64
    };
    out
}

/// Node decision `|x0 − x| > threshold` against the ground truth
/// `|x0 − alpha| > threshold`, over paired slices of measured values and
/// current estimates.
pub fn classify_values(x0: &[f64], x: &[f64], threshold: f64, alpha: f64) -> ClassificationOutcome {
    assert_eq!(x0.len(), x.len(), "measured and estimated slices differ in length");
    tally(
        x0.iter()
            .zip(x)
            .map(|(&m, &e)| ((m - e).abs() > threshold, (m - alpha).abs() > threshold)),
    )
}

/// Alarm classification of every node's measurement against its current
/// estimate of the average.
pub fn alarm_classify(states: &[NodeState], threshold: f64, truth_alpha: f64) -> ClassificationOutcome {
    assert!(threshold > 0.0, "alarm threshold must be positive");
    let x0: Vec<f64> = states.iter().map(|s| s.x0).collect();
    let x: Vec<f64> = states.iter().map(|s| s.x).collect();
    classify_values(&x0, &x, threshold, truth_alpha)
}

/// Spread of the estimates expected after time `t`: `σ0 · 10^(−γt)`.
pub fn predicted_sigma(sigma0: f64, gamma: f64, t: f64) -> f64 {
    sigma0 * 10f64.powf(-gamma * t)
}

/// Distance from `x0` to the interval `[x − 3σ(t), x + 3σ(t)]`; 0 inside.
pub fn outlier_distance(x0: f64, x: f64, sigma0: f64, gamma: f64, t: f64) -> f64 {
    let half = 3.0 * predicted_sigma(sigma0, gamma, t);
    ((x0 - x).abs() - half).max(0.0)
}

/// Flags a node whose measurement lies more than `m·σ0` away from the 3σ(t)
/// confidence interval around its current estimate.
pub fn outlier_detect(state: &NodeState, m: f64, sigma0: f64, gamma: f64, t: f64) -> bool {
    assert!(
        sigma0 > 0.0 && gamma > 0.0 && m > 0.0,
        "outlier parameters must be positive"
    );
    outlier_distance(state.x0, state.x, sigma0, gamma, t) > m * sigma0
}
