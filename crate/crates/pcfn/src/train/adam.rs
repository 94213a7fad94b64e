//! Bias-corrected Adam over the model's trainable registry entries.

use super::{TrainConfig, TrainError, TrainResult};
use crate::model::Model;
use crate::tensor::Scalar;

/// First/second moment accumulators aligned with the trainable entries.
#[derive(Clone, Debug)]
pub struct AdamState<T: Scalar> {
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    t: u64,
}

impl<T: Scalar> AdamState<T> {
    /// Zero-initialized moments; the step counter starts at 0.
    pub fn new(model: &Model<T>) -> Self {
        let sizes: Vec<usize> = model
            .trainable_indices()
            .into_iter()
            .map(|i| model.entries()[i].tensor.numel())
            .collect();
        Self {
            m: sizes.iter().map(|&s| vec![T::ZERO; s]).collect(),
            v: sizes.iter().map(|&s| vec![T::ZERO; s]).collect(),
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One update: m, v moving averages, bias correction, and the
    /// alpha * m_hat / (sqrt(v_hat) + eps_hat) parameter step. Gradients are
    /// slices aligned with the trainable entries; a non-finite gradient
    /// aborts naming the layer.
    pub fn step(
        &mut self,
        model: &mut Model<T>,
        grads: &[Vec<T>],
        cfg: &TrainConfig,
    ) -> TrainResult<()> {
        let trainable = model.trainable_indices();
        assert_eq!(grads.len(), trainable.len(), "gradient slots mismatch");
        for (slot, &entry) in trainable.iter().enumerate() {
            if grads[slot].iter().any(|g| !g.is_finite()) {
                return Err(TrainError::NanGradient {
                    layer: model.entries()[entry].path.clone(),
                });
            }
        }
        self.t += 1;
        let b1 = T::from_f64(cfg.beta1);
        let b2 = T::from_f64(cfg.beta2);
        let one_m_b1 = T::from_f64(1.0 - cfg.beta1);
        let one_m_b2 = T::from_f64(1.0 - cfg.beta2);
        let corr1 = T::from_f64(1.0 / (1.0 - cfg.beta1.powi(self.t as i32)));
        let corr2 = T::from_f64(1.0 / (1.0 - cfg.beta2.powi(self.t as i32)));
        let alpha = T::from_f64(cfg.learning_rate);
        let eps = T::from_f64(cfg.eps_hat);

        for (slot, &entry) in trainable.iter().enumerate() {
            let g = &grads[slot];
            let m = &mut self.m[slot];
            let v = &mut self.v[slot];
            let p = model.entries_mut()[entry].tensor.data_mut();
            for j in 0..g.len() {
                m[j] = b1 * m[j] + one_m_b1 * g[j];
                v[j] = b2 * v[j] + one_m_b2 * g[j] * g[j];
                let m_hat = m[j] * corr1;
                let v_hat = v[j] * corr2;
                p[j] = p[j] - alpha * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    fn small_model() -> Model<f64> {
        let mut c = ModelConfig::new(8, 2, 3, 64).unwrap();
        c.mlp1 = vec![4, 4];
        c.mlp2 = vec![4, 8, 64];
        c.tnet_conv = vec![4, 8, 64];
        c.tnet_fc = vec![8, 4];
        c.tail_mlp = vec![8, 4];
        Model::build(c, 1).unwrap()
    }

    fn zero_grads(model: &Model<f64>) -> Vec<Vec<f64>> {
        model
            .trainable_indices()
            .into_iter()
            .map(|i| vec![0.0; model.entries()[i].tensor.numel()])
            .collect()
    }

    #[test]
    fn zero_gradients_leave_parameters_unchanged_for_any_t() {
        let mut model = small_model();
        let before: Vec<Vec<f64>> = model.entries().iter().map(|e| e.tensor.data().to_vec()).collect();
        let mut state = AdamState::new(&model);
        let cfg = TrainConfig::default();
        for _ in 0..5 {
            let grads = zero_grads(&model);
            state.step(&mut model, &grads, &cfg).unwrap();
        }
        assert_eq!(state.step_count(), 5);
        for (e, b) in model.entries().iter().zip(&before) {
            assert_eq!(e.tensor.data(), &b[..]);
        }
    }

    #[test]
    fn first_step_magnitude_matches_hand_computation() {
        // Single scalar with g = 1 at t = 1: m_hat = 1, v_hat = 1, so the
        // update is alpha / (1 + eps_hat).
        let mut model = small_model();
        let cfg = TrainConfig::default();
        let mut state = AdamState::new(&model);
        let mut grads = zero_grads(&model);
        grads[0][0] = 1.0;
        let before = model.entries()[0].tensor.data()[0];
        state.step(&mut model, &grads, &cfg).unwrap();
        let after = model.entries()[0].tensor.data()[0];
        let expected = cfg.learning_rate / (1.0 + cfg.eps_hat);
        assert!(((before - after) - expected).abs() < 1e-15);
    }

    #[test]
    fn nan_gradient_aborts_and_names_the_layer() {
        let mut model = small_model();
        let mut grads = zero_grads(&model);
        grads[2][0] = f64::NAN;
        let mut state = AdamState::new(&model);
        match state.step(&mut model, &grads, &TrainConfig::default()) {
            Err(TrainError::NanGradient { layer }) => {
                assert_eq!(layer, model.entries()[model.trainable_indices()[2]].path);
            }
            other => panic!("expected NanGradient, got {other:?}"),
        }
        assert_eq!(state.step_count(), 0, "aborted step must not advance t");
    }

    #[test]
    fn ten_steps_are_bit_reproducible() {
        let cfg = TrainConfig::default();
        let run = || {
            let mut model = small_model();
            let mut state = AdamState::new(&model);
            for step in 0..10 {
                let mut grads = zero_grads(&model);
                for (s, g) in grads.iter_mut().enumerate() {
                    for (j, v) in g.iter_mut().enumerate() {
                        *v = ((step + 1) as f64 * 0.01).sin() * ((s * 31 + j) as f64 * 0.3).cos();
                    }
                }
                state.step(&mut model, &grads, &cfg).unwrap();
            }
            model
                .entries()
                .iter()
                .flat_map(|e| e.tensor.data().iter().map(|v| v.to_bits()))
                .collect::<Vec<u64>>()
        };
        assert_eq!(run(), run());
    }
}
