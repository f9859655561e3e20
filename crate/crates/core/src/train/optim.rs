use crate::error::{Error, Result};
use crate::tensor::{Gradients, ParamStore, Precision, Tensor};

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
            learning_rate: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam moments and step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub step: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &ParamStore) -> Self {
        let zeros = || {
            params
                .entries()
                .iter()
                .map(|e| Tensor::zeros(e.value.shape()))
                .collect::<Vec<_>>()
        };
        Adam {
            config,
            m: zeros(),
            v: zeros(),
            step: 0,
        }
    }

    /// Bias-corrected Adam update at learning rate `lr`. Parameters with
    /// `trainable[i] == false` keep their values and moments.
    pub fn step(
        &mut self,
        params: &mut ParamStore,
        grads: &Gradients,
        lr: f64,
        trainable: &[bool],
        precision: Precision,
    ) -> Result<()> {
        self.step += 1;
        let AdamConfig {
            beta1,
            beta2,
            epsilon,
            ..
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (i, id) in params.ids().collect::<Vec<_>>().into_iter().enumerate() {
            if !trainable.get(i).copied().unwrap_or(true) {
                continue;
            }
            let g = grads.get(id).data();
            if let Some(pos) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::Training(format!(
                    "non-finite gradient in {} at entry {pos}",
                    params.name(id)
                )));
            }
            let (m, v) = (self.m[i].data_mut(), self.v[i].data_mut());
            let p = params.get_mut(id).data_mut();
            for j in 0..p.len() {
                m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
                v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
                let m_hat = m[j] / c1;
                let v_hat = v[j] / c2;
                p[j] = precision.round(p[j] - lr * m_hat / (v_hat.sqrt() + epsilon));
            }
        }
        Ok(())
    }
}

/// Global L2 norm over the selected gradients.
pub fn global_norm(grads: &Gradients, trainable: &[bool]) -> f64 {
    grads
        .iter()
        .filter(|(id, _)| trainable.get(id.index()).copied().unwrap_or(true))
        .map(|(_, t)| t.sum_squares())
        .sum::<f64>()
        .sqrt()
}

/// Rescales all selected gradients jointly so their global norm is at most
/// `max_norm`. Returns the norm before clipping.
pub fn clip_gradients(grads: &mut Gradients, max_norm: f64, trainable: &[bool], names: &ParamStore) -> Result<f64> {
    if !(max_norm > 0.0) {
        return Err(Error::Training(format!("clip norm must be positive, got {max_norm}")));
    }
    for (id, t) in grads.iter() {
        if !t.is_finite() {
            return Err(Error::Training(format!("non-finite gradient in {}", names.name(id))));
        }
    }
    let norm = global_norm(grads, trainable);
    if norm > max_norm {
        let factor = max_norm / norm;
        for (i, active) in (0..grads.len()).map(|i| (i, trainable.get(i).copied().unwrap_or(true))) {
            if active {
                grads
                    .get_mut(crate::tensor::ParamId(i))
                    .data_mut()
                    .iter_mut()
                    .for_each(|v| *v *= factor);
            }
        }
    }
    Ok(norm)
}

/// Learning rate at fractional `progress` (in epochs): `alpha` through
/// `threshold`, then halved once per started half epoch beyond it.
pub fn lr_schedule(progress: f64, alpha: f64, threshold: f64) -> f64 {
    if progress <= threshold {
        return alpha;
    }
    let halvings = ((progress - threshold) / 0.5).ceil();
    alpha / 2f64.powf(halvings)
}
