use serde::{Deserialize, Serialize};

/// Min-max scaling of `ln(label)`, fitted separately for cost and card.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetNormalizer {
    pub card_min: f64,
    pub card_max: f64,
    pub cost_min: f64,
    pub cost_max: f64,
}

fn widen(lo: f64, hi: f64) -> (f64, f64) {
    if hi - lo < 1e-6 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

impl TargetNormalizer {
    /// Fits on `(card, cost)` labels; all labels must be positive.
    pub fn fit<I: IntoIterator<Item = (f64, f64)>>(labels: I) -> Self {
        let (mut cl, mut ch, mut ol, mut oh) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for (card, cost) in labels {
            let (a, b) = (card.ln(), cost.ln());
            cl = cl.min(a);
            ch = ch.max(a);
            ol = ol.min(b);
            oh = oh.max(b);
        }
        if !cl.is_finite() {
            (cl, ch, ol, oh) = (0.0, 1.0, 0.0, 1.0);
        }
        let (card_min, card_max) = widen(cl, ch);
        let (cost_min, cost_max) = widen(ol, oh);
        TargetNormalizer {
            card_min,
            card_max,
            cost_min,
            cost_max,
        }
    }

    fn norm(v: f64, lo: f64, hi: f64) -> f64 {
        ((v.ln() - lo) / (hi - lo)).clamp(0.0, 1.0)
    }

    fn denorm(p: f64, lo: f64, hi: f64) -> f64 {
        (lo + p * (hi - lo)).exp()
    }

    pub fn normalize_card(&self, v: f64) -> f64 {
        Self::norm(v, self.card_min, self.card_max)
    }

    pub fn normalize_cost(&self, v: f64) -> f64 {
        Self::norm(v, self.cost_min, self.cost_max)
    }

    pub fn denormalize_card(&self, p: f64) -> f64 {
        Self::denorm(p, self.card_min, self.card_max)
    }

    pub fn denormalize_cost(&self, p: f64) -> f64 {
        Self::denorm(p, self.cost_min, self.cost_max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_on_fitted_range() {
        let n = TargetNormalizer::fit([(1.0, 0.5), (1e6, 3e7), (42.0, 17.0)]);
        for v in [1.0, 3.0, 42.0, 999.0, 1e6] {
            assert!((n.denormalize_card(n.normalize_card(v)) / v - 1.0).abs() < 1e-6);
        }
        for v in [0.5, 17.0, 3e7] {
            assert!((n.denormalize_cost(n.normalize_cost(v)) / v - 1.0).abs() < 1e-6);
        }
        assert_eq!(n.normalize_card(1e9), 1.0);
        // Midpoint maps to the geometric mean.
        assert!((n.denormalize_card(0.5) - 1000.0).abs() < 1e-6);
    }

    #[test]
    fn degenerate_range_is_widened() {
        let n = TargetNormalizer::fit([(5.0, 5.0), (5.0, 5.0)]);
        assert!(n.card_max > n.card_min);
        assert!((n.normalize_card(5.0) - 0.5).abs() < 1e-12);
    }
}
