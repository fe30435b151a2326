use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GradientSet, LayerGrad};
use crate::numerics::DenseLayer;

/// Minibatch SGD hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::OutOfRange {
                name: "learning_rate".into(),
                value: self.learning_rate.to_string(),
                expected: "positive",
            });
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::OutOfRange {
                name: "momentum".into(),
                value: self.momentum.to_string(),
                expected: "0 <= momentum < 1",
            });
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::OutOfRange {
                name: "weight_decay".into(),
                value: self.weight_decay.to_string(),
                expected: ">= 0",
            });
        }
        if self.batch_size == 0 {
            return Err(Error::OutOfRange {
                name: "batch_size".into(),
                value: "0".into(),
                expected: ">= 1",
            });
        }
        Ok(())
    }
}

/// SGD with momentum and L2 weight decay:
///
/// ```text
/// v ← μ·v − η·(∇ + λ·w)
/// w ← w + v
/// ```
#[derive(Clone, Debug)]
pub struct OptimizerState {
    pub config: SgdConfig,
    velocity: Vec<LayerGrad>,
}

impl OptimizerState {
    /// Zero velocity for each parameter layer.
    pub fn new(config: SgdConfig, params: &[&DenseLayer]) -> Result<Self> {
        config.validate()?;
        Ok(OptimizerState {
            config,
            velocity: params.iter().map(|l| LayerGrad::zeros_like(l)).collect(),
        })
    }

    pub fn velocity(&self, layer: usize) -> &LayerGrad {
        &self.velocity[layer]
    }
}

/// Updates every parameter layer that has an entry in `grads`; the rest are
/// left untouched, including their velocity.
pub fn sgd_step(
    params: &mut [&mut DenseLayer],
    grads: &GradientSet,
    opt: &mut OptimizerState,
) -> Result<()> {
    if params.len() != grads.layers.len() || params.len() != opt.velocity.len() {
        return Err(Error::shape(
            "sgd_step",
            format!("{} layers", params.len()),
            format!("{} gradients / {} velocities", grads.layers.len(), opt.velocity.len()),
        ));
    }
    for (i, grad) in grads.layers.iter().enumerate() {
        if let Some(g) = grad {
            if !g.matches(params[i]) || !opt.velocity[i].matches(params[i]) {
                return Err(Error::shape(
                    "sgd_step layer",
                    format!("{}x{}", params[i].fan_in(), params[i].fan_out()),
                    format!("{:?}", g.weights.shape()),
                ));
            }
        }
    }
    let SgdConfig {
        learning_rate: lr,
        momentum: mu,
        weight_decay: wd,
        ..
    } = opt.config;
    for (i, grad) in grads.layers.iter().enumerate() {
        let Some(g) = grad else { continue };
        let layer = &mut *params[i];
        let v = &mut opt.velocity[i];
        update(layer.weights.as_mut_slice(), g.weights.as_slice(), v.weights.as_mut_slice(), lr, mu, wd);
        update(&mut layer.biases, &g.biases, &mut v.biases, lr, mu, wd);
    }
    Ok(())
}

#[inline]
fn update(w: &mut [f64], g: &[f64], v: &mut [f64], lr: f64, mu: f64, wd: f64) {
    for ((w, g), v) in w.iter_mut().zip(g).zip(v.iter_mut()) {
        *v = mu * *v - lr * (g + wd * *w);
        *w += *v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;

    fn scalar_layer(w: f64) -> DenseLayer {
        DenseLayer {
            weights: Matrix::from_vec(1, 1, vec![w]).unwrap(),
            biases: vec![0.0],
        }
    }

    fn scalar_grad(g: f64) -> GradientSet {
        GradientSet {
            layers: vec![Some(LayerGrad {
                weights: Matrix::from_vec(1, 1, vec![g]).unwrap(),
                biases: vec![0.0],
            })],
        }
    }

    fn config(lr: f64, mu: f64, wd: f64) -> SgdConfig {
        SgdConfig {
            learning_rate: lr,
            momentum: mu,
            weight_decay: wd,
            batch_size: 1,
        }
    }

    fn run(w0: f64, g: f64, cfg: SgdConfig, steps: usize) -> Vec<(f64, f64)> {
        let mut layer = scalar_layer(w0);
        let mut opt = OptimizerState::new(cfg, &[&layer]).unwrap();
        let grads = scalar_grad(g);
        (0..steps)
            .map(|_| {
                sgd_step(&mut [&mut layer], &grads, &mut opt).unwrap();
                (opt.velocity(0).weights.get(0, 0), layer.weights.get(0, 0))
            })
            .collect()
    }

    #[test]
    fn plain_gradient_step() {
        let out = run(1.0, 2.0, config(0.1, 0.0, 0.0), 1);
        assert!((out[0].1 - 0.8).abs() < 1e-15);
    }

    #[test]
    fn momentum_two_steps() {
        let out = run(1.0, 2.0, config(0.1, 0.9, 0.0), 2);
        assert!((out[0].0 + 0.2).abs() < 1e-15);
        assert!((out[0].1 - 0.8).abs() < 1e-15);
        assert!((out[1].0 + 0.38).abs() < 1e-15);
        assert!((out[1].1 - 0.42).abs() < 1e-15);
    }

    #[test]
    fn pure_weight_decay() {
        let out = run(1.0, 0.0, config(0.1, 0.0, 0.01), 1);
        assert!((out[0].1 - 0.999).abs() < 1e-15);
    }

    #[test]
    fn plain_step_is_exact_without_momentum_or_decay() {
        let mut layer = scalar_layer(0.3);
        let mut opt = OptimizerState::new(config(0.05, 0.0, 0.0), &[&layer]).unwrap();
        sgd_step(&mut [&mut layer], &scalar_grad(1.7), &mut opt).unwrap();
        assert_eq!(layer.weights.get(0, 0), 0.3 + (0.0 - 0.05 * 1.7));
    }

    #[test]
    fn absent_gradients_leave_layers_untouched() {
        let mut a = scalar_layer(1.0);
        let mut b = scalar_layer(2.0);
        let mut opt = OptimizerState::new(config(0.1, 0.5, 0.1), &[&a, &b]).unwrap();
        let grads = GradientSet {
            layers: vec![None, scalar_grad(1.0).layers.pop().unwrap()],
        };
        sgd_step(&mut [&mut a, &mut b], &grads, &mut opt).unwrap();
        assert_eq!(a, scalar_layer(1.0));
        assert_ne!(b, scalar_layer(2.0));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut layer = DenseLayer::zeros(2, 2);
        let mut opt = OptimizerState::new(config(0.1, 0.0, 0.0), &[&layer]).unwrap();
        assert!(sgd_step(&mut [&mut layer], &scalar_grad(1.0), &mut opt).is_err());
    }

    #[test]
    fn invalid_hyperparameters() {
        assert!(config(0.0, 0.0, 0.0).validate().is_err());
        assert!(config(0.1, 1.0, 0.0).validate().is_err());
        assert!(config(0.1, 0.0, -1.0).validate().is_err());
        let mut c = config(0.1, 0.0, 0.0);
        c.batch_size = 0;
        assert!(c.validate().is_err());
    }
}
