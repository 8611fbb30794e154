use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use super::{Activation, NnError};

/// A dense layer: `y = activation(x Wᵀ + b)` applied row-wise.
///
/// `weights` has shape `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    pub activation: Activation,
}

/// Gradients for one layer, shaped like its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

impl DenseLayer {
    pub fn new(
        weights: Array2<f64>,
        biases: Array1<f64>,
        activation: Activation,
    ) -> Result<Self, NnError> {
        if weights.nrows() != biases.len() {
            return Err(NnError::Config(format!(
                "weights have {} rows but biases have {} entries",
                weights.nrows(),
                biases.len()
            )));
        }
        if weights.is_empty() {
            return Err(NnError::Config("layer widths must be positive".into()));
        }
        Ok(Self {
            weights,
            biases,
            activation,
        })
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn glorot<R: Rng + ?Sized>(
        input: usize,
        output: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        if input == 0 || output == 0 {
            return Err(NnError::Config("layer widths must be positive".into()));
        }
        let limit = (6.0 / (input + output) as f64).sqrt();
        let weights =
            Array2::from_shape_simple_fn((output, input), || rng.random_range(-limit..limit));
        Ok(Self {
            weights,
            biases: Array1::zeros(output),
            activation,
        })
    }

    #[inline]
    pub fn input_width(&self) -> usize {
        self.weights.ncols()
    }

    #[inline]
    pub fn output_width(&self) -> usize {
        self.weights.nrows()
    }

    pub(crate) fn forward(&self, inputs: ArrayView2<f64>) -> Array2<f64> {
        let mut z = inputs.dot(&self.weights.t());
        z += &self.biases;
        let act = self.activation;
        if act != Activation::Identity {
            z.mapv_inplace(|v| act.apply(v));
        }
        z
    }

    /// Returns parameter gradients and the gradient w.r.t. the layer input.
    pub(crate) fn backward(
        &self,
        inputs: ArrayView2<f64>,
        outputs: ArrayView2<f64>,
        d_outputs: ArrayView2<f64>,
    ) -> (LayerGradients, Array2<f64>) {
        let act = self.activation;
        let d_z = if act == Activation::Identity {
            d_outputs.to_owned()
        } else {
            let mut d_z = d_outputs.to_owned();
            d_z.zip_mut_with(&outputs, |g, &y| *g *= act.derivative_from_output(y));
            d_z
        };
        let weights = d_z.t().dot(&inputs);
        let biases = d_z.sum_axis(Axis(0));
        let d_inputs = d_z.dot(&self.weights);
        (LayerGradients { weights, biases }, d_inputs)
    }
}
