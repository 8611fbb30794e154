use ndarray::{Array1, Array2, Zip};
use serde::{Deserialize, Serialize};

use super::{Gradients, Network, NnError};

/// Update rule of an [`Optimizer`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerKind {
    /// `w ← w − lr·g`
    Sgd,
    /// `v ← μ·v + g`, `w ← w − lr·v`
    SgdMomentum { momentum: f64 },
    /// Adam with bias-corrected first and second moments.
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
struct Moments {
    weights: Array2<f64>,
    biases: Array1<f64>,
}

#[derive(Debug, Clone)]
enum State {
    Empty,
    Velocity(Vec<Moments>),
    Adam {
        step: i32,
        first: Vec<Moments>,
        second: Vec<Moments>,
    },
}

/// Stochastic gradient optimizer with per-parameter state.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    state: State,
}

fn zero_moments(net: &Network) -> Vec<Moments> {
    net.layers()
        .iter()
        .map(|l| Moments {
            weights: Array2::zeros(l.weights.raw_dim()),
            biases: Array1::zeros(l.biases.len()),
        })
        .collect()
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Result<Self, NnError> {
        if !(learning_rate >= 0.0 && learning_rate.is_finite()) {
            return Err(NnError::Config(format!(
                "learning rate must be a finite non-negative number, got {learning_rate}"
            )));
        }
        Ok(Self {
            kind,
            learning_rate,
            state: State::Empty,
        })
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.learning_rate = lr;
    }

    fn check_shapes(net: &Network, grads: &Gradients) -> Result<(), NnError> {
        if grads.layers.len() != net.layers().len() {
            return Err(NnError::Usage(format!(
                "gradients cover {} layers, network has {}",
                grads.layers.len(),
                net.layers().len()
            )));
        }
        for (i, (g, l)) in grads.layers.iter().zip(net.layers()).enumerate() {
            if g.weights.dim() != l.weights.dim() || g.biases.len() != l.biases.len() {
                return Err(NnError::Usage(format!(
                    "gradient shape mismatch at layer {i}"
                )));
            }
        }
        Ok(())
    }

    /// Applies one update to `net` in place and advances the optimizer state.
    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<(), NnError> {
        Self::check_shapes(net, grads)?;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Sgd => {
                for (l, g) in net.layers_mut().iter_mut().zip(&grads.layers) {
                    l.weights.scaled_add(-lr, &g.weights);
                    l.biases.scaled_add(-lr, &g.biases);
                }
            }
            OptimizerKind::SgdMomentum { momentum } => {
                if !matches!(self.state, State::Velocity(_)) {
                    self.state = State::Velocity(zero_moments(net));
                }
                let State::Velocity(vel) = &mut self.state else {
                    unreachable!()
                };
                for ((l, g), v) in net.layers_mut().iter_mut().zip(&grads.layers).zip(vel) {
                    v.weights
                        .zip_mut_with(&g.weights, |v, &g| *v = momentum * *v + g);
                    v.biases
                        .zip_mut_with(&g.biases, |v, &g| *v = momentum * *v + g);
                    l.weights.scaled_add(-lr, &v.weights);
                    l.biases.scaled_add(-lr, &v.biases);
                }
            }
            OptimizerKind::Adam {
                beta1,
                beta2,
                epsilon,
            } => {
                if !matches!(self.state, State::Adam { .. }) {
                    self.state = State::Adam {
                        step: 0,
                        first: zero_moments(net),
                        second: zero_moments(net),
                    };
                }
                let State::Adam {
                    step,
                    first,
                    second,
                } = &mut self.state
                else {
                    unreachable!()
                };
                *step += 1;
                let c1 = 1.0 - beta1.powi(*step);
                let c2 = 1.0 - beta2.powi(*step);
                let update = |w: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *w -= lr * m_hat / (v_hat.sqrt() + epsilon);
                };
                for (((l, g), m), v) in net
                    .layers_mut()
                    .iter_mut()
                    .zip(&grads.layers)
                    .zip(first.iter_mut())
                    .zip(second.iter_mut())
                {
                    Zip::from(&mut l.weights)
                        .and(&mut m.weights)
                        .and(&mut v.weights)
                        .and(&g.weights)
                        .for_each(|w, m, v, &g| update(w, m, v, g));
                    Zip::from(&mut l.biases)
                        .and(&mut m.biases)
                        .and(&mut v.biases)
                        .and(&g.biases)
                        .for_each(|w, m, v, &g| update(w, m, v, g));
                }
            }
        }
        Ok(())
    }
}
