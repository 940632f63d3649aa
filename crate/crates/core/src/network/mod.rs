//! Fully connected feed-forward networks.

mod checkpoint;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::autodiff::{BlockKind, Jet, Layout, ParamVector, Scalar, Tape, Var};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
    /// Identity; only useful as an analytic oracle.
    Linear,
}

impl Activation {
    pub fn apply<S: Scalar>(self, z: S) -> S {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.relu(),
            Activation::Linear => z,
        }
    }

    /// `σ'(z)`
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }

    fn max_order(self) -> usize {
        match self {
            Activation::Relu => 1,
            _ => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputScaling {
    #[default]
    None,
    InvSqrtM,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
    #[serde(default)]
    pub output_scaling: OutputScaling,
}

impl NetworkConfig {
    /// Scalar-output tanh network without output scaling.
    pub fn tanh(input_dim: usize, hidden_widths: &[usize]) -> Self {
        Self {
            input_dim,
            hidden_widths: hidden_widths.to_vec(),
            output_dim: 1,
            activation: Activation::Tanh,
            output_scaling: OutputScaling::None,
        }
    }

    /// `u(W, a, x) = (1/√m) Σ_r a_r σ(w_rᵀ x)`.
    pub fn two_layer(input_dim: usize, width: usize, activation: Activation) -> Self {
        Self {
            input_dim,
            hidden_widths: vec![width],
            output_dim: 1,
            activation,
            output_scaling: OutputScaling::InvSqrtM,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::InvalidConfig(
                "input and output dimensions must be positive".into(),
            ));
        }
        if self.hidden_widths.is_empty() {
            return Err(Error::InvalidConfig("at least one hidden layer required".into()));
        }
        if self.hidden_widths.contains(&0) {
            return Err(Error::InvalidConfig("hidden widths must be positive".into()));
        }
        if self.output_scaling == OutputScaling::InvSqrtM && self.hidden_widths.len() != 1 {
            return Err(Error::InvalidConfig(
                "inv_sqrt_m output scaling needs exactly one hidden layer".into(),
            ));
        }
        Ok(())
    }

    fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim];
        d.extend(&self.hidden_widths);
        d.push(self.output_dim);
        d
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    GlorotUniform,
    /// `w_r ~ N(0, I)`, `a_r ~ unif{−1, +1}` frozen, no biases.
    TheoremInit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitScheme {
    pub kind: InitKind,
    pub seed: u64,
}

impl InitScheme {
    pub fn glorot(seed: u64) -> Self {
        Self {
            kind: InitKind::GlorotUniform,
            seed,
        }
    }

    pub fn theorem(seed: u64) -> Self {
        Self {
            kind: InitKind::TheoremInit,
            seed,
        }
    }
}

/// Weights (`out × in`, row-major) and optional bias of one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub weight: Vec<f64>,
    pub bias: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    config: NetworkConfig,
    init: InitScheme,
    layout: Arc<Layout>,
    /// Output-layer weights held fixed in theorem mode, `output_dim × m`.
    frozen_output: Option<Vec<f64>>,
}

/// Builds a network and its initial parameters, deterministically in the seed.
pub fn build(config: NetworkConfig, init: InitScheme) -> Result<(Network, ParamVector)> {
    config.validate()?;
    let dims = config.dims();
    let layers = dims.len() - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(init.seed);
    let mut layout = Layout::new();
    let mut data = Vec::new();
    let mut frozen_output = None;

    match init.kind {
        InitKind::GlorotUniform => {
            for l in 0..layers {
                let (fan_in, fan_out) = (dims[l], dims[l + 1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                layout.push(l, BlockKind::Weight, (fan_out, fan_in));
                data.extend((0..fan_in * fan_out).map(|_| rng.random_range(-limit..limit)));
                layout.push(l, BlockKind::Bias, (fan_out, 1));
                data.extend(std::iter::repeat_n(0.0, fan_out));
            }
        }
        InitKind::TheoremInit => {
            if layers != 2 {
                return Err(Error::InvalidConfig(
                    "theorem initialization needs exactly one hidden layer".into(),
                ));
            }
            let (d, m, out) = (dims[0], dims[1], dims[2]);
            layout.push(0, BlockKind::Weight, (m, d));
            data.extend((0..m * d).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let a = (0..out * m)
                .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                .collect();
            frozen_output = Some(a);
        }
    }

    let layout = Arc::new(layout);
    let theta = ParamVector::new(data, layout.clone())?;
    let net = Network {
        config,
        init,
        layout,
        frozen_output,
    };
    Ok((net, theta))
}

impl Network {
    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn init(&self) -> InitScheme {
        self.init
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn param_count(&self) -> usize {
        self.layout.len()
    }

    pub fn frozen_output(&self) -> Option<&[f64]> {
        self.frozen_output.as_deref()
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    fn output_scale(&self) -> f64 {
        match self.config.output_scaling {
            OutputScaling::None => 1.0,
            OutputScaling::InvSqrtM => 1.0 / (self.config.hidden_widths[0] as f64).sqrt(),
        }
    }

    fn check_params(&self, theta: &ParamVector) -> Result<()> {
        if theta.len() != self.layout.len() || **theta.layout() != *self.layout {
            return Err(Error::LayoutMismatch(format!(
                "network has {} parameters, vector has {}",
                self.layout.len(),
                theta.len()
            )));
        }
        Ok(())
    }

    /// Structured view of the flat parameters; frozen layers are omitted.
    pub fn unflatten(&self, theta: &ParamVector) -> Result<Vec<LayerParams>> {
        self.check_params(theta)?;
        let trainable = self.trainable_layers();
        Ok((0..trainable)
            .map(|l| LayerParams {
                weight: theta.block(l, BlockKind::Weight).unwrap().to_vec(),
                bias: theta.block(l, BlockKind::Bias).map(<[f64]>::to_vec),
            })
            .collect())
    }

    pub fn flatten(&self, layers: &[LayerParams]) -> Result<ParamVector> {
        let mut data = Vec::with_capacity(self.layout.len());
        for block in self.layout.blocks() {
            let layer = layers.get(block.layer).ok_or(Error::Missing("layer"))?;
            let src = match block.kind {
                BlockKind::Bias => layer.bias.as_deref().ok_or(Error::Missing("bias"))?,
                _ => &layer.weight,
            };
            if src.len() != block.range.len() {
                return Err(Error::DimensionMismatch {
                    expected: block.range.len(),
                    got: src.len(),
                });
            }
            data.extend_from_slice(src);
        }
        ParamVector::new(data, self.layout.clone())
    }

    fn trainable_layers(&self) -> usize {
        self.layout.blocks().iter().map(|b| b.layer + 1).max().unwrap_or(0)
    }

    /// Records the network on `tape` for the points `x` (`rows × input_dim`)
    /// together with input derivatives along `axes` up to `order`.
    ///
    /// The returned jet has one column per output.
    pub fn record<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        theta: Var,
        x: &[f64],
        axes: &[usize],
        order: usize,
    ) -> Result<Jet> {
        let dim = self.config.input_dim;
        if x.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: x.len() % dim,
            });
        }
        if let Some(&a) = axes.iter().find(|&&a| a >= dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: a + 1 });
        }
        if order > self.config.activation.max_order() && !axes.is_empty() {
            return Err(Error::Unsupported(format!(
                "order-{order} input derivatives through {:?}",
                self.config.activation
            )));
        }
        let mut h = Jet::input(tape, x, dim, axes);
        let dims = self.config.dims();
        let trainable = self.trainable_layers();
        let slice_block = |tape: &mut Tape<T>, l: usize, kind: BlockKind| {
            self.layout
                .block(l, kind)
                .map(|b| tape.slice(theta, b.range.start, b.shape.0, b.shape.1.max(1)))
        };
        for l in 0..dims.len() - 1 {
            let w = if l < trainable {
                slice_block(tape, l, BlockKind::Weight).expect("weight block")
            } else {
                let a = self.frozen_output.as_ref().expect("frozen output layer");
                tape.constant(dims[l + 1], dims[l], a)
            };
            // biases are stored as columns but broadcast as rows
            let b = self
                .layout
                .block(l, BlockKind::Bias)
                .map(|b| tape.slice(theta, b.range.start, 1, b.shape.0));
            h = h.affine(tape, w, b);
            if l + 2 < dims.len() {
                h = match self.config.activation {
                    Activation::Tanh => h.tanh(tape, order),
                    Activation::Relu => h.relu(tape),
                    Activation::Linear => h,
                };
            }
        }
        let s = self.output_scale();
        if s != 1.0 {
            h = h.scale(tape, s);
        }
        Ok(h)
    }

    /// Plain evaluation at one point in any scalar type.
    pub fn eval<S: Scalar>(&self, theta: &[f64], x: &[S]) -> Result<Vec<S>> {
        if x.len() != self.config.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.config.input_dim,
                got: x.len(),
            });
        }
        if theta.len() != self.layout.len() {
            return Err(Error::DimensionMismatch {
                expected: self.layout.len(),
                got: theta.len(),
            });
        }
        let dims = self.config.dims();
        let trainable = self.trainable_layers();
        let mut h: Vec<S> = x.to_vec();
        for l in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let w: &[f64] = if l < trainable {
                &theta[self.layout.block(l, BlockKind::Weight).unwrap().range.clone()]
            } else {
                self.frozen_output.as_deref().unwrap()
            };
            let b = self
                .layout
                .block(l, BlockKind::Bias)
                .map(|b| &theta[b.range.clone()]);
            let mut z = Vec::with_capacity(fan_out);
            for r in 0..fan_out {
                let mut acc = S::from_f64(b.map_or(0.0, |b| b[r]));
                for (c, &hc) in h.iter().enumerate() {
                    acc += hc.scale(w[r * fan_in + c]);
                }
                z.push(if l + 2 < dims.len() {
                    self.config.activation.apply(acc)
                } else {
                    acc
                });
            }
            h = z;
        }
        let s = self.output_scale();
        Ok(h.into_iter().map(|v| v.scale(s)).collect())
    }

    /// `u_θ(x)`
    pub fn forward(&self, theta: &ParamVector, x: &[f64]) -> Result<Vec<f64>> {
        self.check_params(theta)?;
        self.eval(theta.as_slice(), x)
    }

    /// Batched scalar output at `points` (`rows × input_dim`).
    pub fn forward_batch(&self, theta: &ParamVector, points: &[f64]) -> Result<Vec<f64>> {
        self.check_params(theta)?;
        let mut tape = Tape::<f64>::new();
        let th = tape.constant(theta.len(), 1, theta.as_slice());
        let jet = self.record(&mut tape, th, points, &[], 0)?;
        Ok(tape.value(jet.value).to_vec())
    }

    /// `(u, ∂u/∂x_axis, ∂²u/∂x_axis²)` at a single point for a scalar-output
    /// network, computed on the tape (the second derivative is zero for
    /// `order = 1`).
    pub fn input_derivatives(
        &self,
        theta: &ParamVector,
        x: &[f64],
        order: usize,
        axis: usize,
    ) -> Result<(f64, f64, f64)> {
        self.check_params(theta)?;
        if !(1..=2).contains(&order) {
            return Err(Error::Unsupported(format!("derivative order {order}")));
        }
        if x.len() != self.config.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.config.input_dim,
                got: x.len(),
            });
        }
        let mut tape = Tape::<f64>::new();
        let th = tape.leaf(theta.as_slice().to_vec());
        let jet = self.record(&mut tape, th, x, &[axis], order)?;
        let u = tape.value(jet.value)[0];
        let du = tape.value(jet.d1[0])[0];
        let d2u = jet.d2[0].map_or(0.0, |v| tape.value(v)[0]);
        Ok((u, du, d2u))
    }
}
