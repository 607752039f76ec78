//! Edge losses on raw scores.

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy with a logit input. Returns `(loss, dloss/dscore)`.
pub fn bce_edge_loss(score: f64, label: bool) -> (f64, f64) {
    // one exponential serves both softplus and sigmoid
    let e = (-score.abs()).exp();
    let softplus = score.max(0.0) + e.ln_1p();
    let sig = if score >= 0.0 {
        1.0 / (1.0 + e)
    } else {
        e / (1.0 + e)
    };
    if label {
        (softplus - score, sig - 1.0)
    } else {
        (softplus, sig)
    }
}

/// Pairwise logistic loss. Returns `(loss, dloss/dpos, dloss/dneg)`.
pub fn bpr_loss(pos_score: f64, neg_score: f64) -> (f64, f64, f64) {
    let margin = pos_score - neg_score;
    let g = -sigmoid(-margin);
    (softplus(-margin), g, -g)
}
