/// Pairwise hinge loss `max(0, 1 - rel_plus + rel_minus)`.
pub fn hinge_loss(rel_plus: f64, rel_minus: f64) -> f64 {
    (1.0 - rel_plus + rel_minus).max(0.0)
}

/// Subgradients `(d/d rel_plus, d/d rel_minus)`; zero at the kink.
pub fn hinge_grad(rel_plus: f64, rel_minus: f64) -> (f64, f64) {
    if 1.0 - rel_plus + rel_minus > 0.0 {
        (-1.0, 1.0)
    } else {
        (0.0, 0.0)
    }
}
