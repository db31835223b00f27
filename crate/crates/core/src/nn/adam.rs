use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub step_size: f64,
    pub decay1: f64,
    pub decay2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            step_size: 1e-3,
            decay1: 0.9,
            decay2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Bias-corrected adaptive-moment optimizer state over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step_count: u64,
}

impl AdamState {
    pub fn new(num_params: usize, config: AdamConfig) -> Result<Self> {
        if !(config.step_size > 0.0)
            || !(0.0..1.0).contains(&config.decay1)
            || !(0.0..1.0).contains(&config.decay2)
            || !(config.epsilon > 0.0)
        {
            return Err(Error::invalid(format!("invalid Adam configuration {config:?}")));
        }
        Ok(AdamState {
            config,
            first_moment: vec![0.0; num_params],
            second_moment: vec![0.0; num_params],
            step_count: 0,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One update of `params` against `grads`. Parameters and state are left
    /// untouched when any gradient entry is non-finite.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        let n = self.first_moment.len();
        for (context, len) in [("adam parameters", params.len()), ("adam gradients", grads.len())] {
            if len != n {
                return Err(Error::Dimension {
                    context,
                    expected: n,
                    actual: len,
                });
            }
        }
        if let Some(index) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                context: "gradient",
                index,
            });
        }
        self.step_count += 1;
        let AdamConfig {
            step_size,
            decay1,
            decay2,
            epsilon,
        } = self.config;
        let t = self.step_count as i32;
        let correction1 = 1.0 - decay1.powi(t);
        let correction2 = 1.0 - decay2.powi(t);
        for i in 0..n {
            let g = grads[i];
            let m = decay1 * self.first_moment[i] + (1.0 - decay1) * g;
            let v = decay2 * self.second_moment[i] + (1.0 - decay2) * g * g;
            self.first_moment[i] = m;
            self.second_moment[i] = v;
            let m_hat = m / correction1;
            let v_hat = v / correction2;
            params[i] -= step_size * m_hat / (v_hat.sqrt() + epsilon);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = AdamState::new(3, AdamConfig::default()).unwrap();
        let mut p = vec![1.0, -2.0, 0.5];
        s.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
        assert_eq!(s.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_step_size() {
        // m = 0.1, v = 0.001; bias-corrected both become 1, so Δ = -0.1 / (1 + 1e-8)
        let cfg = AdamConfig {
            step_size: 0.1,
            ..AdamConfig::default()
        };
        let mut s = AdamState::new(1, cfg).unwrap();
        let mut p = vec![0.0];
        s.step(&mut p, &[1.0]).unwrap();
        assert!((p[0] + 0.1 / (1.0 + 1e-8)).abs() < 1e-15);
        assert!((p[0] + 0.1).abs() < 1e-8);
    }

    #[test]
    fn identical_pairs_update_identically() {
        let mut s = AdamState::new(2, AdamConfig::default()).unwrap();
        let mut p = vec![0.3, 0.3];
        for g in [0.7, -0.2, 1.5] {
            s.step(&mut p, &[g, g]).unwrap();
        }
        assert_eq!(p[0].to_bits(), p[1].to_bits());
    }

    #[test]
    fn non_finite_gradient_names_the_parameter() {
        let mut s = AdamState::new(3, AdamConfig::default()).unwrap();
        let mut p = vec![0.0; 3];
        let err = s.step(&mut p, &[0.0, f64::INFINITY, 0.0]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 1, .. }));
        assert_eq!(s.step_count(), 0);
        assert!(s.step(&mut p, &[0.0; 2]).is_err());
    }
}
