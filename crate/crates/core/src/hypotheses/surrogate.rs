//! Smooth stand-ins for the indicator and zero-one losses, used only during
//! training. Bounds are always evaluated on the exact losses.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    /// Sharpness of the sigmoid replacing `1[z ≥ z0]`.
    pub c1: f64,
    /// Softmax inverse temperature.
    pub c2: f64,
    /// Weight of the uniform mixture that floors the class probabilities.
    pub p_min: f64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            c1: 5.0,
            c2: 5.0,
            p_min: 1e-5,
        }
    }
}

impl SurrogateConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0 && self.c2 > 0.0) {
            return Err(invalid("c1 and c2 must be positive"));
        }
        if !(self.p_min > 0.0 && self.p_min < 1.0) {
            return Err(invalid("p_min must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// `1 / (1 + exp(−c1·(z − z0)))`, increasing in `z` and equal to ½ at `z0`.
pub fn sigmoid_indicator(z: f64, z0: f64, c1: f64) -> f64 {
    let t = c1 * (z - z0);
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Cross-entropy of the floored softmax `σ̃ = (1 − p_min)·σ(c2·u) + p_min/k`,
/// rescaled by `ln(k/p_min)` into `(0, 1]`.
pub fn bounded_cross_entropy(logits: &[f64], y: usize, cfg: &SurrogateConfig) -> f64 {
    bce_with_grad(logits, y, cfg, None)
}

/// Same as [`bounded_cross_entropy`]; also writes `∂loss/∂logits` into `grad`.
pub fn bounded_cross_entropy_grad(
    logits: &[f64],
    y: usize,
    cfg: &SurrogateConfig,
    grad: &mut [f64],
) -> f64 {
    bce_with_grad(logits, y, cfg, Some(grad))
}

fn bce_with_grad(logits: &[f64], y: usize, cfg: &SurrogateConfig, grad: Option<&mut [f64]>) -> f64 {
    let k = logits.len();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut denom = 0.0;
    for &u in logits {
        denom += (cfg.c2 * (u - max)).exp();
    }
    let sigma_y = (cfg.c2 * (logits[y] - max)).exp() / denom;
    let floored = (1.0 - cfg.p_min) * sigma_y + cfg.p_min / k as f64;
    let scale = (k as f64 / cfg.p_min).ln();
    if let Some(g) = grad {
        // ∂σ_y/∂u_i = c2·σ_y·(1[i = y] − σ_i)
        let coef = -(1.0 - cfg.p_min) * cfg.c2 * sigma_y / (floored * scale);
        for (i, (gi, &u)) in g.iter_mut().zip(logits).enumerate() {
            let sigma_i = (cfg.c2 * (u - max)).exp() / denom;
            *gi = coef * (f64::from(u8::from(i == y)) - sigma_i);
        }
    }
    -floored.ln() / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn sigmoid_examples() {
        assert_eq!(sigmoid_indicator(0.3, 0.3, 5.0), 0.5);
        assert_eq!(sigmoid_indicator(1e6, 0.0, 5.0), 1.0);
        assert_eq!(sigmoid_indicator(-1e6, 0.0, 5.0), 0.0);
        assert_abs_diff_eq!(sigmoid_indicator(1.0, 0.0, 5.0), 0.993_307_149_075_715_1, epsilon = 1e-15);
    }

    #[test]
    fn sigmoid_approaches_indicator() {
        for k in 0..200 {
            let z0 = -1.0 + k as f64 * 0.01;
            for &dz in &[0.01, 0.013, 0.5, -0.01, -0.2] {
                let target = if dz >= 0.0 { 1.0 } else { 0.0 };
                assert!((sigmoid_indicator(z0 + dz, z0, 1e4) - target).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn bce_examples() {
        let cfg = SurrogateConfig::default();
        assert_abs_diff_eq!(bounded_cross_entropy(&[0.0; 10], 3, &cfg), 1.0 / 6.0, epsilon = 1e-14);
        let mut sure = [0.0; 10];
        sure[4] = 1e4;
        let limit = -(1.0 - 1e-5 + 1e-6f64).ln() / (1e6f64).ln();
        assert_abs_diff_eq!(bounded_cross_entropy(&sure, 4, &cfg), limit, epsilon = 1e-15);
        assert!(limit > 0.0);
        let mut wrong = [0.0; 10];
        wrong[0] = 1e4;
        let worst = bounded_cross_entropy(&wrong, 4, &cfg);
        assert!(worst <= 1.0 && worst > 0.99);
    }

    #[test]
    fn bce_gradient_matches_finite_differences() {
        let cfg = SurrogateConfig { c1: 5.0, c2: 3.0, p_min: 1e-3 };
        let u = [0.3, -0.7, 1.1, 0.05];
        let mut g = [0.0; 4];
        bounded_cross_entropy_grad(&u, 2, &cfg, &mut g);
        for i in 0..4 {
            let h = 1e-6;
            let (mut up, mut dn) = (u, u);
            up[i] += h;
            dn[i] -= h;
            let fd = (bounded_cross_entropy(&up, 2, &cfg) - bounded_cross_entropy(&dn, 2, &cfg)) / (2.0 * h);
            assert_abs_diff_eq!(g[i], fd, epsilon = 1e-8);
        }
    }

    proptest! {
        #[test]
        fn bce_is_in_unit_interval(
            logits in prop::collection::vec(-50.0f64..50.0, 2..12),
            y in 0usize..12,
        ) {
            let y = y % logits.len();
            let v = bounded_cross_entropy(&logits, y, &SurrogateConfig::default());
            prop_assert!(v > 0.0 && v <= 1.0);
        }
    }
}
