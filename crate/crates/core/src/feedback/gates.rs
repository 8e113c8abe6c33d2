/// Raw feedback scores, their gates, and the gated products.
#[derive(Debug, Clone, PartialEq)]
pub struct GatedScores {
    pub raw: Vec<f64>,
    pub gates: Vec<f64>,
    pub gated: Vec<f64>,
}

impl GatedScores {
    pub fn new(raw: Vec<f64>, gates: Vec<f64>) -> Self {
        let gated = raw.iter().zip(&gates).map(|(r, g)| r * g).collect();
        GatedScores { raw, gates, gated }
    }
}

/// Smoothed min-max normalization of first-stage scores into `[0.5, 1]`:
/// `0.5 + 0.5 * (s - min) / (max - min)`. When every score is equal all
/// gates are 1.
pub fn normalize_gates(rel_q_scores: &[f64]) -> Vec<f64> {
    let min = rel_q_scores.iter().copied().fold(f64::INFINITY, f64::min);
    let max = rel_q_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    rel_q_scores
        .iter()
        .map(|&s| {
            let norm = if range > 0.0 { (s - min) / range } else { 1.0 };
            (0.5 + 0.5 * norm).clamp(0.5, 1.0)
        })
        .collect()
}
