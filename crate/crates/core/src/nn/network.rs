use ndarray::{Array2, ArrayView2};
use rand::Rng;

use super::{Activation, DenseLayer, LayerGradients, NnError};

/// Feedforward network: an ordered chain of dense layers.
///
/// The output arity is the width of the last layer: 1 for point and variance
/// models, 2 for models that emit `(lower, upper)` directly.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<DenseLayer>,
}

/// Activations recorded by [`Network::forward_recorded`].
///
/// `activations[0]` is the input batch and `activations[i + 1]` the output of
/// layer `i`. An empty tape has no recorded pass.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    activations: Vec<Array2<f64>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_recorded(&self) -> bool {
        !self.activations.is_empty()
    }

    pub fn clear(&mut self) {
        self.activations.clear();
    }
}

/// Parameter gradients for a whole network, one entry per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradients>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradients {
                    weights: Array2::zeros(l.weights.raw_dim()),
                    biases: ndarray::Array1::zeros(l.biases.len()),
                })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights += &b.weights;
            a.biases += &b.biases;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.layers {
            g.weights *= factor;
            g.biases *= factor;
        }
    }

    /// All components flattened in layer order (weights row-major, then biases).
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in &self.layers {
            out.extend(g.weights.iter().copied());
            out.extend(g.biases.iter().copied());
        }
        out
    }
}

impl Network {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::Config("a network needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].output_width() != pair[1].input_width() {
                return Err(NnError::Dimension {
                    layer: i + 1,
                    expected: pair[0].output_width(),
                    found: pair[1].input_width(),
                });
            }
        }
        Ok(Self { layers })
    }

    /// Glorot-initialised multilayer perceptron.
    ///
    /// Hidden layers use `hidden_activation`; the output layer is linear.
    pub fn mlp<R: Rng + ?Sized>(
        input: usize,
        hidden: &[usize],
        hidden_activation: Activation,
        output_arity: usize,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut width = input;
        for &h in hidden {
            layers.push(DenseLayer::glorot(width, h, hidden_activation, rng)?);
            width = h;
        }
        layers.push(DenseLayer::glorot(
            width,
            output_arity,
            Activation::Identity,
            rng,
        )?);
        Self::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].input_width()
    }

    pub fn output_arity(&self) -> usize {
        self.layers[self.layers.len() - 1].output_width()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    fn check_input(&self, inputs: &ArrayView2<f64>) -> Result<(), NnError> {
        if inputs.ncols() != self.input_width() {
            return Err(NnError::Dimension {
                layer: 0,
                expected: self.input_width(),
                found: inputs.ncols(),
            });
        }
        Ok(())
    }

    /// Pure forward pass: `n × d` inputs to `n × output_arity` outputs.
    pub fn forward(&self, inputs: ArrayView2<f64>) -> Result<Array2<f64>, NnError> {
        self.check_input(&inputs)?;
        let mut current = self.layers[0].forward(inputs);
        for layer in &self.layers[1..] {
            current = layer.forward(current.view());
        }
        Ok(current)
    }

    /// Forward pass that records intermediates on `tape` for a later backward pass.
    pub fn forward_recorded(
        &self,
        inputs: ArrayView2<f64>,
        tape: &mut Tape,
    ) -> Result<Array2<f64>, NnError> {
        self.check_input(&inputs)?;
        tape.activations.clear();
        tape.activations.push(inputs.to_owned());
        for layer in &self.layers {
            let next = layer.forward(tape.activations.last().unwrap().view());
            tape.activations.push(next);
        }
        Ok(tape.activations.last().unwrap().clone())
    }

    /// Reverse-mode gradients of a scalar loss given `dL/d(outputs)`.
    ///
    /// Gradients are summed over the rows of the batch.
    pub fn backward(
        &self,
        tape: &Tape,
        output_gradient: ArrayView2<f64>,
    ) -> Result<Gradients, NnError> {
        if !tape.is_recorded() {
            return Err(NnError::Usage(
                "backward called without a recorded forward pass".into(),
            ));
        }
        if tape.activations.len() != self.layers.len() + 1 {
            return Err(NnError::Usage(
                "tape was recorded on a network with a different depth".into(),
            ));
        }
        let out = tape.activations.last().unwrap();
        if out.dim() != output_gradient.dim() {
            return Err(NnError::Usage(format!(
                "output gradient has shape {:?} but the recorded output is {:?}",
                output_gradient.dim(),
                out.dim()
            )));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut upstream = output_gradient.to_owned();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let (g, d_in) = layer.backward(
                tape.activations[i].view(),
                tape.activations[i + 1].view(),
                upstream.view(),
            );
            grads.push(g);
            upstream = d_in;
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }

    /// All parameters flattened in the same order as [`Gradients::to_flat`].
    pub fn parameters_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            out.extend(l.weights.iter().copied());
            out.extend(l.biases.iter().copied());
        }
        out
    }

    /// Mutable access to parameter `index` in flat order.
    pub fn parameter_mut(&mut self, mut index: usize) -> Option<&mut f64> {
        for l in &mut self.layers {
            if index < l.weights.len() {
                return l.weights.as_slice_mut().map(|s| &mut s[index]);
            }
            index -= l.weights.len();
            if index < l.biases.len() {
                return Some(&mut l.biases[index]);
            }
            index -= l.biases.len();
        }
        None
    }
}
