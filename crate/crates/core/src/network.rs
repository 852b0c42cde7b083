//! Single-hidden-layer response function and its degenerate counterpart.
//!
//! The neural response is
//!
//! ```text
//! f(x) = g1( sum_h w1[h] * g0( sum_j w0[j,h] * x[j] ) )
//! ```
//!
//! with a logistic hidden activation `g0`, no hidden or output biases (the
//! constant enters as `x[0] = 1`) and a configurable output activation `g1`.
//! The degenerate response drops the hidden layer: `f(x) = g1(x . beta)`.
//!
//! Flat weight layout: `w0` column-major (`w0[j,h]` at `j + J*h`) followed
//! by `w1`. The degenerate layout is `beta` alone.

use serde::{Deserialize, Serialize};

use crate::activations::{logistic, Activation};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Response {
    Neural { hidden: usize, output: Activation },
    Degenerate { output: Activation },
}

impl Response {
    pub fn neural(hidden: usize, output: Activation) -> Self {
        Response::Neural { hidden, output }
    }

    pub fn degenerate(output: Activation) -> Self {
        Response::Degenerate { output }
    }

    pub fn output(&self) -> Activation {
        match *self {
            Response::Neural { output, .. } | Response::Degenerate { output } => output,
        }
    }

    pub fn hidden(&self) -> usize {
        match *self {
            Response::Neural { hidden, .. } => hidden,
            Response::Degenerate { .. } => 0,
        }
    }

    pub fn is_neural(&self) -> bool {
        matches!(self, Response::Neural { .. })
    }

    /// `J*H + H` for the neural response, `J` for the degenerate one.
    pub fn n_params(&self, input_dim: usize) -> usize {
        match *self {
            Response::Neural { hidden, .. } => input_dim * hidden + hidden,
            Response::Degenerate { .. } => input_dim,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Response::Neural { .. } => "neural".to_string(),
            Response::Degenerate { output } => output.name().to_string(),
        }
    }

    fn validate(&self) -> Result<()> {
        if let Response::Neural { hidden: 0, .. } = self {
            return Err(Error::usage("a neural response needs at least one hidden unit"));
        }
        Ok(())
    }
}

/// A response function bound to an input dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Network {
    response: Response,
    input_dim: usize,
}

/// Intermediate values from a forward pass, reused by [`Network::backward`].
#[derive(Debug, Clone, Default)]
pub struct ForwardState {
    pub output: f64,
    /// Argument of the output activation.
    pub output_pre: f64,
    pub hidden: Vec<f64>,
    pub preactivations: Vec<f64>,
    fingerprint: Option<u64>,
}

impl Network {
    pub fn new(response: Response, input_dim: usize) -> Result<Self> {
        response.validate()?;
        if input_dim == 0 {
            return Err(Error::usage("input dimension must be positive"));
        }
        Ok(Network {
            response,
            input_dim,
        })
    }

    pub fn response(&self) -> Response {
        self.response
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn n_params(&self) -> usize {
        self.response.n_params(self.input_dim)
    }

    fn check_shapes(&self, weights: &[f64], x: &[f64]) -> Result<()> {
        if weights.len() != self.n_params() {
            return Err(Error::Shape {
                what: "weights",
                expected: self.n_params(),
                got: weights.len(),
            });
        }
        if x.len() != self.input_dim {
            return Err(Error::Shape {
                what: "input",
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, weights: &[f64], x: &[f64]) -> Result<ForwardState> {
        self.check_shapes(weights, x)?;
        if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite network input {bad}")));
        }
        let mut state = ForwardState::default();
        self.forward_into(weights, x, &mut state);
        state.fingerprint = Some(fingerprint(weights, x));
        Ok(state)
    }

    /// Forward pass into a reusable state, without shape checks.
    pub(crate) fn forward_into(&self, weights: &[f64], x: &[f64], state: &mut ForwardState) {
        let j_dim = self.input_dim;
        match self.response {
            Response::Neural { hidden, output } => {
                state.hidden.resize(hidden, 0.0);
                state.preactivations.resize(hidden, 0.0);
                let (w0, w1) = weights.split_at(j_dim * hidden);
                let mut z = 0.0;
                for h in 0..hidden {
                    let col = &w0[j_dim * h..j_dim * (h + 1)];
                    let a: f64 = col.iter().zip(x).map(|(w, v)| w * v).sum();
                    let g = logistic(a);
                    state.preactivations[h] = a;
                    state.hidden[h] = g;
                    z += w1[h] * g;
                }
                state.output_pre = z;
                state.output = output.value(z);
            }
            Response::Degenerate { output } => {
                state.hidden.clear();
                state.preactivations.clear();
                let z: f64 = weights.iter().zip(x).map(|(b, v)| b * v).sum();
                state.output_pre = z;
                state.output = output.value(z);
            }
        }
    }

    /// `outer_error * df/dw` in the flat layout.
    pub fn backward(
        &self,
        weights: &[f64],
        x: &[f64],
        state: &ForwardState,
        outer_error: f64,
    ) -> Result<Vec<f64>> {
        self.check_shapes(weights, x)?;
        match state.fingerprint {
            Some(fp) if fp == fingerprint(weights, x) => {}
            Some(_) => {
                return Err(Error::usage(
                    "forward state was computed for different weights or input",
                ))
            }
            None => return Err(Error::usage("backward called without a forward state")),
        }
        let mut grad = vec![0.0; self.n_params()];
        self.backward_into(weights, x, state, outer_error, &mut grad);
        Ok(grad)
    }

    /// Accumulates `outer_error * df/dw` into `grad`.
    pub(crate) fn backward_into(
        &self,
        weights: &[f64],
        x: &[f64],
        state: &ForwardState,
        outer_error: f64,
        grad: &mut [f64],
    ) {
        let j_dim = self.input_dim;
        let delta = outer_error * self.response.output().slope(state.output_pre);
        match self.response {
            Response::Neural { hidden, .. } => {
                let (g0, g1) = grad.split_at_mut(j_dim * hidden);
                let w1 = &weights[j_dim * hidden..];
                for h in 0..hidden {
                    let g = state.hidden[h];
                    g1[h] += delta * g;
                    let delta_h = delta * w1[h] * g * (1.0 - g);
                    for (gw, v) in g0[j_dim * h..j_dim * (h + 1)].iter_mut().zip(x) {
                        *gw += delta_h * v;
                    }
                }
            }
            Response::Degenerate { .. } => {
                for (gw, v) in grad.iter_mut().zip(x) {
                    *gw += delta * v;
                }
            }
        }
    }

    /// `df/dw` at `x`.
    pub fn param_gradient(&self, weights: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        let state = self.forward(weights, x)?;
        self.backward(weights, x, &state, 1.0)
    }

    /// `df/dx[j]` for a single input slot, given a forward state.
    pub(crate) fn input_partial(&self, weights: &[f64], state: &ForwardState, j: usize) -> f64 {
        let j_dim = self.input_dim;
        let outer = self.response.output().slope(state.output_pre);
        match self.response {
            Response::Neural { hidden, .. } => {
                let w1 = &weights[j_dim * hidden..];
                let s: f64 = (0..hidden)
                    .map(|h| {
                        let g = state.hidden[h];
                        w1[h] * g * (1.0 - g) * weights[j + j_dim * h]
                    })
                    .sum();
                outer * s
            }
            Response::Degenerate { .. } => outer * weights[j],
        }
    }
}

fn fingerprint(weights: &[f64], x: &[f64]) -> u64 {
    weights
        .iter()
        .chain(x)
        .fold(0xcbf2_9ce4_8422_2325u64, |acc, v| {
            (acc ^ v.to_bits()).wrapping_mul(0x0100_0000_01b3)
        })
}
