use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// First-order update rule and its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase", deny_unknown_fields)]
pub enum OptimizerConfig {
    Sgd {
        lr: f64,
    },
    Rmsprop {
        lr: f64,
        #[serde(default = "default_rho")]
        rho: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
    Adam {
        lr: f64,
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
}

fn default_rho() -> f64 {
    0.9
}
fn default_eps() -> f64 {
    1e-7
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}

impl OptimizerConfig {
    pub fn sgd(lr: f64) -> Self {
        OptimizerConfig::Sgd { lr }
    }

    pub fn rmsprop(lr: f64) -> Self {
        OptimizerConfig::Rmsprop { lr, rho: default_rho(), eps: default_eps() }
    }

    pub fn adam(lr: f64) -> Self {
        OptimizerConfig::Adam { lr, beta1: default_beta1(), beta2: default_beta2(), eps: default_eps() }
    }

    pub fn learning_rate(&self) -> f64 {
        match *self {
            OptimizerConfig::Sgd { lr } | OptimizerConfig::Rmsprop { lr, .. } | OptimizerConfig::Adam { lr, .. } => lr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lr = self.learning_rate();
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
        }
        let unit = |name: &str, v: f64| {
            if (0.0..1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in [0, 1), got {v}")))
            }
        };
        match *self {
            OptimizerConfig::Sgd { .. } => Ok(()),
            OptimizerConfig::Rmsprop { rho, eps, .. } => {
                unit("rho", rho)?;
                positive_eps(eps)
            }
            OptimizerConfig::Adam { beta1, beta2, eps, .. } => {
                unit("beta1", beta1)?;
                unit("beta2", beta2)?;
                positive_eps(eps)
            }
        }
    }
}

fn positive_eps(eps: f64) -> Result<()> {
    if eps > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("eps must be positive, got {eps}")))
    }
}

/// Moment estimates carried between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    config: OptimizerConfig,
    first: Vec<f64>,
    second: Vec<f64>,
    step: u64,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig, n_params: usize) -> OptimizerState {
        OptimizerState { config, first: vec![0.0; n_params], second: vec![0.0; n_params], step: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update to `theta` in place.
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) -> Result<()> {
        if theta.len() != grad.len() || theta.len() != self.first.len() {
            return Err(Error::Dimension(format!(
                "optimizer state has {} entries, theta {}, gradient {}",
                self.first.len(),
                theta.len(),
                grad.len()
            )));
        }
        self.step += 1;
        match self.config {
            OptimizerConfig::Sgd { lr } => {
                for (t, g) in theta.iter_mut().zip(grad) {
                    *t -= lr * g;
                }
            }
            OptimizerConfig::Rmsprop { lr, rho, eps } => {
                for ((t, g), v) in theta.iter_mut().zip(grad).zip(self.second.iter_mut()) {
                    *v = rho * *v + (1.0 - rho) * g * g;
                    *t -= lr * g / (v.sqrt() + eps);
                }
            }
            OptimizerConfig::Adam { lr, beta1, beta2, eps } => {
                let c1 = 1.0 - beta1.powf(self.step as f64);
                let c2 = 1.0 - beta2.powf(self.step as f64);
                for (((t, g), m), v) in theta
                    .iter_mut()
                    .zip(grad)
                    .zip(self.first.iter_mut())
                    .zip(self.second.iter_mut())
                {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *t -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}

/// One optimizer update, returning the new parameters.
pub fn optimizer_step(state: &mut OptimizerState, theta: &[f64], grad: &[f64]) -> Result<Vec<f64>> {
    let mut out = theta.to_vec();
    state.step(&mut out, grad)?;
    Ok(out)
}
