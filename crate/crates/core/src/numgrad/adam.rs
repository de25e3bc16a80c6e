use crate::error::{Error, Result};

use super::params::ParameterSet;
use super::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment estimates for every parameter of a [`ParameterSet`].
#[derive(Clone, Debug)]
pub struct AdamState {
    config: AdamConfig,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
    step: u64,
}

impl AdamState {
    pub fn new(params: &ParameterSet, config: AdamConfig) -> Self {
        let zeros: Vec<Tensor> = params.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
        AdamState {
            config,
            first: zeros.clone(),
            second: zeros,
            step: 0,
        }
    }

    pub fn config(&self) -> AdamConfig {
        self.config
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Tensor] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Tensor] {
        &self.second
    }

    /// One bias-corrected Adam update; `grads` follows the parameter order.
    pub fn step(&mut self, params: &mut ParameterSet, grads: &[Tensor]) -> Result<()> {
        if grads.len() != params.len() || grads.len() != self.first.len() {
            return Err(Error::dim(format!(
                "{} gradients for {} parameters",
                grads.len(),
                params.len()
            )));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first) {
            if p.1.shape() != g.shape() || m.shape() != g.shape() {
                return Err(Error::dim(format!(
                    "gradient {:?} for parameter {} of shape {:?}",
                    g.shape(),
                    p.0,
                    p.1.shape()
                )));
            }
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in params
            .values_mut()
            .zip(grads)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            let (pd, gd) = (p.data_mut(), g.data());
            let (md, vd) = (m.data_mut(), v.data_mut());
            for i in 0..pd.len() {
                md[i] = beta1 * md[i] + (1.0 - beta1) * gd[i];
                vd[i] = beta2 * vd[i] + (1.0 - beta2) * gd[i] * gd[i];
                let m_hat = md[i] / c1;
                let v_hat = vd[i] / c2;
                pd[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(w: f64) -> ParameterSet {
        let mut p = ParameterSet::new();
        p.insert("w", Tensor::vector(vec![w])).unwrap();
        p
    }

    #[test]
    fn zero_gradient_keeps_parameters_and_decays_moments() {
        let mut p = single(0.5);
        let mut st = AdamState::new(&p, AdamConfig::default());
        st.step(&mut p, &[Tensor::vector(vec![2.0])]).unwrap();
        let before = p.clone();
        let (m0, v0) = (st.first_moments()[0].data()[0], st.second_moments()[0].data()[0]);
        st.step(&mut p, &[Tensor::vector(vec![0.0])]).unwrap();
        assert_eq!(st.first_moments()[0].data()[0], 0.9 * m0);
        assert_eq!(st.second_moments()[0].data()[0], 0.999 * v0);
        // Zero gradient from fresh state leaves the parameter untouched.
        let mut q = single(0.5);
        let mut fresh = AdamState::new(&q, AdamConfig::default());
        fresh.step(&mut q, &[Tensor::vector(vec![0.0])]).unwrap();
        assert_eq!(q, single(0.5));
        assert_eq!(fresh.step_count(), 1);
        assert_ne!(p, before);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
        for g in [0.3, -5.0, 1e3] {
            let mut p = single(1.0);
            let cfg = AdamConfig {
                learning_rate: 0.01,
                ..AdamConfig::default()
            };
            let mut st = AdamState::new(&p, cfg);
            st.step(&mut p, &[Tensor::vector(vec![g])]).unwrap();
            let moved = 1.0 - p.get("w").unwrap().data()[0];
            let expected = 0.01 * g / (g.abs() + 1e-8);
            assert!((moved - expected).abs() < 1e-12, "{moved} vs {expected}");
        }
    }

    #[test]
    fn converges_on_quadratic() {
        let mut p = single(1.0);
        let cfg = AdamConfig {
            learning_rate: 0.05,
            ..AdamConfig::default()
        };
        let mut st = AdamState::new(&p, cfg);
        for _ in 0..200 {
            let w = p.get("w").unwrap().data()[0];
            st.step(&mut p, &[Tensor::vector(vec![2.0 * w])]).unwrap();
        }
        assert!(p.get("w").unwrap().data()[0].abs() < 0.05);
        assert_eq!(st.step_count(), 200);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = single(1.0);
        let mut st = AdamState::new(&p, AdamConfig::default());
        let err = st.step(&mut p, &[Tensor::vector(vec![1.0, 2.0])]).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
        assert_eq!(st.step_count(), 0);
    }
}
