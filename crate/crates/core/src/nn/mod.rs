//! Minimal dense-network arithmetic with exact reverse-mode gradients.
//!
//! Two architectures are used throughout the crate: a 4-layer ReLU network
//! mapping 10 measured engine channels to (NOx, Soot), and a small Tanh
//! recurrence whose state is the emissions pair and whose input is the
//! 4-channel control/exogenous vector. Both are instances of [`NnParams`].
//!
//! All network arithmetic runs on a normalized scale; the per-channel affine
//! normalization record is part of [`NnParams`] and is applied at the
//! physical-unit API boundary ([`fnn_forward`], [`rnn_step`]).

mod io;

pub use io::{load_params, save_params};

use rand::Rng;

use crate::error::{Error, Result};

/// Element-wise layer activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the post-activation value.
    ///
    /// For ReLU the subgradient at exactly 0 is taken as 0.
    #[inline]
    pub fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::parse(format!("unknown activation tag `{other}`"))),
        }
    }
}

/// Per-channel affine normalization: `norm(x) = (x - offset) / scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelNorm {
    pub offset: f64,
    pub scale: f64,
}

impl ChannelNorm {
    pub fn identity() -> Self {
        ChannelNorm {
            offset: 0.0,
            scale: 1.0,
        }
    }

    #[inline]
    pub fn normalize(&self, x: f64) -> f64 {
        (x - self.offset) / self.scale
    }

    #[inline]
    pub fn denormalize(&self, v: f64) -> f64 {
        self.offset + self.scale * v
    }
}

/// One dense layer: `y = act(W x + b)`, weights row-major `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    in_dim: usize,
    out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::structural("layer dims must be positive"));
        }
        if weights.len() != in_dim * out_dim {
            return Err(Error::structural(format!(
                "weight count {} does not match {out_dim}x{in_dim}",
                weights.len()
            )));
        }
        if bias.len() != out_dim {
            return Err(Error::structural(format!(
                "bias count {} does not match out_dim {out_dim}",
                bias.len()
            )));
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::numeric("layer construction", "non-finite parameter"));
        }
        Ok(Layer {
            in_dim,
            out_dim,
            weights,
            bias,
            activation,
        })
    }

    /// PyTorch-style uniform init: weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    pub fn seeded<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = 1.0 / (in_dim as f64).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| rng.gen_range(-limit..limit))
            .collect();
        let bias = (0..out_dim).map(|_| rng.gen_range(-limit..limit)).collect();
        Layer {
            in_dim,
            out_dim,
            weights,
            bias,
            activation,
        }
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    /// `out = act(W x + b)`; `out` must have length `out_dim`.
    fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.in_dim);
        debug_assert_eq!(out.len(), self.out_dim);
        for (o, slot) in out.iter_mut().enumerate() {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let mut z = self.bias[o];
            for (w, xi) in row.iter().zip(x) {
                z += w * xi;
            }
            *slot = self.activation.apply(z);
        }
    }
}

/// Dense network parameters plus the normalization record they were trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct NnParams {
    layers: Vec<Layer>,
    input_norm: Vec<ChannelNorm>,
    output_norm: Vec<ChannelNorm>,
}

/// Gradients of one layer, shape-congruent with [`Layer`].
#[derive(Debug, Clone)]
pub struct LayerGradient {
    pub d_weights: Vec<f64>,
    pub d_bias: Vec<f64>,
}

/// Reverse-mode partials of `<output, seed>` w.r.t. every parameter and input entry.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub layers: Vec<LayerGradient>,
    pub d_input: Vec<f64>,
}

impl Gradient {
    pub fn zeros_like(params: &NnParams) -> Self {
        Gradient {
            layers: params
                .layers
                .iter()
                .map(|l| LayerGradient {
                    d_weights: vec![0.0; l.weights.len()],
                    d_bias: vec![0.0; l.bias.len()],
                })
                .collect(),
            d_input: vec![0.0; params.input_dim()],
        }
    }

    /// `self += other * factor` over all parameter partials (input partials included).
    pub fn add_scaled(&mut self, other: &Gradient, factor: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.d_weights.iter_mut().zip(&b.d_weights) {
                *x += factor * y;
            }
            for (x, y) in a.d_bias.iter_mut().zip(&b.d_bias) {
                *x += factor * y;
            }
        }
        for (x, y) in self.d_input.iter_mut().zip(&other.d_input) {
            *x += factor * y;
        }
    }

    /// `self = self * rho + other` (momentum accumulation).
    pub fn decay_and_add(&mut self, rho: f64, other: &Gradient) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.d_weights.iter_mut().zip(&b.d_weights) {
                *x = *x * rho + y;
            }
            for (x, y) in a.d_bias.iter_mut().zip(&b.d_bias) {
                *x = *x * rho + y;
            }
        }
        for (x, y) in self.d_input.iter_mut().zip(&other.d_input) {
            *x = *x * rho + y;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            for x in &mut l.d_weights {
                *x *= factor;
            }
            for x in &mut l.d_bias {
                *x *= factor;
            }
        }
        for x in &mut self.d_input {
            *x *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.d_weights.iter().all(|v| v.is_finite()) && l.d_bias.iter().all(|v| v.is_finite())
        }) && self.d_input.iter().all(|v| v.is_finite())
    }

    /// Max absolute parameter partial (input partials excluded).
    pub fn max_abs(&self) -> f64 {
        let mut m: f64 = 0.0;
        for l in &self.layers {
            for v in l.d_weights.iter().chain(l.d_bias.iter()) {
                m = m.max(v.abs());
            }
        }
        m
    }
}

impl NnParams {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::structural("network needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::structural(format!(
                    "layer dims do not chain: out {} vs next in {}",
                    pair[0].out_dim, pair[1].in_dim
                )));
            }
        }
        let input_dim = layers[0].in_dim;
        let output_dim = layers.last().unwrap().out_dim;
        Ok(NnParams {
            layers,
            input_norm: vec![ChannelNorm::identity(); input_dim],
            output_norm: vec![ChannelNorm::identity(); output_dim],
        })
    }

    /// Fresh network with seeded uniform init, identity normalization.
    pub fn seeded<R: Rng + ?Sized>(
        dims: &[usize],
        activations: &[Activation],
        rng: &mut R,
    ) -> Result<Self> {
        if dims.len() < 2 || activations.len() != dims.len() - 1 {
            return Err(Error::structural(
                "need dims.len() >= 2 and one activation per layer",
            ));
        }
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(d, &act)| Layer::seeded(d[0], d[1], act, rng))
            .collect();
        NnParams::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    pub fn input_norm(&self) -> &[ChannelNorm] {
        &self.input_norm
    }

    pub fn output_norm(&self) -> &[ChannelNorm] {
        &self.output_norm
    }

    pub fn set_norms(
        &mut self,
        input_norm: Vec<ChannelNorm>,
        output_norm: Vec<ChannelNorm>,
    ) -> Result<()> {
        if input_norm.len() != self.input_dim() || output_norm.len() != self.output_dim() {
            return Err(Error::structural(
                "normalization record does not match network dims",
            ));
        }
        if input_norm
            .iter()
            .chain(output_norm.iter())
            .any(|n| !n.offset.is_finite() || !n.scale.is_finite() || n.scale <= 0.0)
        {
            return Err(Error::config("normalization scales must be finite and > 0"));
        }
        self.input_norm = input_norm;
        self.output_norm = output_norm;
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// `theta -= step * direction` over all parameters.
    pub fn apply_step(&mut self, direction: &Gradient, step: f64) {
        for (layer, grad) in self.layers.iter_mut().zip(&direction.layers) {
            for (w, d) in layer.weights.iter_mut().zip(&grad.d_weights) {
                *w -= step * d;
            }
            for (b, d) in layer.bias.iter_mut().zip(&grad.d_bias) {
                *b -= step * d;
            }
        }
    }

    /// Forward pass on the normalized scale.
    pub fn forward_raw(&self, input: &[f64]) -> Result<Vec<f64>> {
        let trace = self.forward_trace(input)?;
        Ok(trace.into_iter().last().unwrap())
    }

    /// Forward pass keeping every layer's post-activation output.
    ///
    /// `trace[0]` is the input, `trace[i]` the output of layer `i`.
    pub fn forward_trace(&self, input: &[f64]) -> Result<Vec<Vec<f64>>> {
        if input.len() != self.input_dim() {
            return Err(Error::structural(format!(
                "input length {} does not match network input dim {}",
                input.len(),
                self.input_dim()
            )));
        }
        let mut trace = Vec::with_capacity(self.layers.len() + 1);
        trace.push(input.to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = vec![0.0; layer.out_dim];
            layer.forward_into(trace.last().unwrap(), &mut out);
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::numeric(
                    format!("layer {i}"),
                    "non-finite activation",
                ));
            }
            trace.push(out);
        }
        Ok(trace)
    }

    /// Exact reverse-mode partials of `<output, output_grad>` on the normalized scale.
    pub fn backprop(&self, input: &[f64], output_grad: &[f64]) -> Result<Gradient> {
        if output_grad.len() != self.output_dim() {
            return Err(Error::structural(format!(
                "seed length {} does not match output dim {}",
                output_grad.len(),
                self.output_dim()
            )));
        }
        let trace = self.forward_trace(input)?;
        Ok(self.backprop_with_trace(&trace, output_grad))
    }

    /// Reverse pass reusing a stored forward trace.
    pub fn backprop_with_trace(&self, trace: &[Vec<f64>], output_grad: &[f64]) -> Gradient {
        debug_assert_eq!(trace.len(), self.layers.len() + 1);
        let mut layers_grad = Vec::with_capacity(self.layers.len());
        let mut delta = output_grad.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let x = &trace[i];
            let y = &trace[i + 1];
            // dL/dz = dL/dy * act'(z), act' from post-activation value
            let mut dz = vec![0.0; layer.out_dim];
            for (o, d) in dz.iter_mut().enumerate() {
                *d = delta[o] * layer.activation.grad_from_output(y[o]);
            }
            let mut d_weights = vec![0.0; layer.weights.len()];
            let mut d_bias = vec![0.0; layer.out_dim];
            let mut d_x = vec![0.0; layer.in_dim];
            for o in 0..layer.out_dim {
                let row = o * layer.in_dim;
                d_bias[o] = dz[o];
                for i_in in 0..layer.in_dim {
                    d_weights[row + i_in] = dz[o] * x[i_in];
                    d_x[i_in] += layer.weights[row + i_in] * dz[o];
                }
            }
            layers_grad.push(LayerGradient { d_weights, d_bias });
            delta = d_x;
        }
        layers_grad.reverse();
        Gradient {
            layers: layers_grad,
            d_input: delta,
        }
    }
}

// ---------------------------------------------------------------------------
// Domain-facing architectures
// ---------------------------------------------------------------------------

pub const FNN_INPUT_DIM: usize = 10;
pub const FNN_LAYERS: usize = 4;
/// Hidden widths of the plant-side emissions network.
pub const FNN_HIDDEN: [usize; 3] = [32, 16, 8];

pub const RNN_STATE_DIM: usize = 2;
pub const RNN_CONTROL_DIM: usize = 4;
pub const RNN_INPUT_DIM: usize = RNN_STATE_DIM + RNN_CONTROL_DIM;
/// Hidden widths of the control-oriented recurrence.
pub const RNN_HIDDEN: [usize; 2] = [15, 5];

/// Engine-out emissions pair. Plant-side values are clamped to physical
/// ranges; model outputs may transiently exit them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmissionsState {
    /// NOx concentration (ppm).
    pub nox: f64,
    /// Soot opacity (%).
    pub soot: f64,
}

impl EmissionsState {
    pub fn new(nox: f64, soot: f64) -> Self {
        EmissionsState { nox, soot }
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.nox, self.soot]
    }

    pub fn from_array(a: [f64; 2]) -> Self {
        EmissionsState {
            nox: a[0],
            soot: a[1],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.nox.is_finite() && self.soot.is_finite()
    }
}

/// The 10 measured channels feeding the plant-side emissions network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FnnInput {
    /// Rail injection pressure (bar).
    pub injection_pressure: f64,
    /// Main injection timing (deg crank angle).
    pub main_injection_timing: f64,
    /// Main injection fuel rate (mg/stroke).
    pub main_injection_fuel_rate: f64,
    /// Engine brake torque (N*m).
    pub engine_torque: f64,
    /// Engine speed (rpm).
    pub engine_speed: f64,
    /// Intake manifold pressure (kPa).
    pub intake_manifold_pressure: f64,
    /// Exhaust manifold pressure (kPa).
    pub exhaust_manifold_pressure: f64,
    /// Fresh mass air flow (kg/h).
    pub mass_air_flow: f64,
    /// EGR valve position (% open).
    pub egr_position: f64,
    /// VGT vane position (% closed).
    pub vgt_position: f64,
}

pub const FNN_CHANNEL_NAMES: [&str; FNN_INPUT_DIM] = [
    "injection_pressure_bar",
    "main_injection_timing_deg",
    "main_injection_fuel_rate_mg",
    "engine_torque_nm",
    "engine_speed_rpm",
    "intake_manifold_pressure_kpa",
    "exhaust_manifold_pressure_kpa",
    "mass_air_flow_kgh",
    "egr_position_pct",
    "vgt_position_pct",
];

impl FnnInput {
    pub fn to_array(self) -> [f64; FNN_INPUT_DIM] {
        [
            self.injection_pressure,
            self.main_injection_timing,
            self.main_injection_fuel_rate,
            self.engine_torque,
            self.engine_speed,
            self.intake_manifold_pressure,
            self.exhaust_manifold_pressure,
            self.mass_air_flow,
            self.egr_position,
            self.vgt_position,
        ]
    }

    pub fn from_array(a: [f64; FNN_INPUT_DIM]) -> Self {
        FnnInput {
            injection_pressure: a[0],
            main_injection_timing: a[1],
            main_injection_fuel_rate: a[2],
            engine_torque: a[3],
            engine_speed: a[4],
            intake_manifold_pressure: a[5],
            exhaust_manifold_pressure: a[6],
            mass_air_flow: a[7],
            egr_position: a[8],
            vgt_position: a[9],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Control/exogenous input of the recurrence, ordered
/// `[p_im, chi_egr, n_e, w_inj]` after the two state channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RnnInput {
    /// Intake manifold pressure (kPa).
    pub p_im: f64,
    /// EGR rate (fraction, 0-1).
    pub chi_egr: f64,
    /// Engine speed (rpm).
    pub n_e: f64,
    /// Fuel injection rate (mg/stroke).
    pub w_inj: f64,
}

impl RnnInput {
    pub fn to_array(self) -> [f64; RNN_CONTROL_DIM] {
        [self.p_im, self.chi_egr, self.n_e, self.w_inj]
    }

    pub fn from_array(a: [f64; RNN_CONTROL_DIM]) -> Self {
        RnnInput {
            p_im: a[0],
            chi_egr: a[1],
            n_e: a[2],
            w_inj: a[3],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Fresh 4-layer all-ReLU emissions network (identity normalization until trained).
pub fn seeded_fnn<R: Rng + ?Sized>(rng: &mut R) -> NnParams {
    let dims = [
        FNN_INPUT_DIM,
        FNN_HIDDEN[0],
        FNN_HIDDEN[1],
        FNN_HIDDEN[2],
        RNN_STATE_DIM,
    ];
    let acts = [Activation::Relu; 4];
    NnParams::seeded(&dims, &acts, rng).expect("fixed architecture is valid")
}

/// Fresh all-Tanh recurrence (identity normalization until trained).
pub fn seeded_rnn<R: Rng + ?Sized>(rng: &mut R) -> NnParams {
    let dims = [RNN_INPUT_DIM, RNN_HIDDEN[0], RNN_HIDDEN[1], RNN_STATE_DIM];
    let acts = [Activation::Tanh; 3];
    NnParams::seeded(&dims, &acts, rng).expect("fixed architecture is valid")
}

/// Checks the plant-side network shape: 10 in, 2 out, 4 layers, all ReLU.
pub fn check_fnn_shape(params: &NnParams) -> Result<()> {
    if params.input_dim() != FNN_INPUT_DIM
        || params.output_dim() != RNN_STATE_DIM
        || params.layers.len() != FNN_LAYERS
        || params
            .layers
            .iter()
            .any(|l| l.activation != Activation::Relu)
    {
        return Err(Error::structural(
            "expected the 10-in/2-out 4-layer all-ReLU emissions network",
        ));
    }
    Ok(())
}

/// Checks the control-oriented recurrence shape: 6 in, 2 out, hidden 15/5, all
/// Tanh, and state-channel normalization consistent between input and output.
pub fn check_rnn_shape(params: &NnParams) -> Result<()> {
    let dims_ok = params.input_dim() == RNN_INPUT_DIM
        && params.output_dim() == RNN_STATE_DIM
        && params.layers.len() == 3
        && params.layers[0].out_dim == RNN_HIDDEN[0]
        && params.layers[1].out_dim == RNN_HIDDEN[1];
    if !dims_ok
        || params
            .layers
            .iter()
            .any(|l| l.activation != Activation::Tanh)
    {
        return Err(Error::structural(
            "expected the 6-in/2-out Tanh recurrence with hidden sizes 15 and 5",
        ));
    }
    check_rnn_norm_consistency(params)
}

/// State channels feed back: their input-side and output-side normalization
/// must be the same record.
pub fn check_rnn_norm_consistency(params: &NnParams) -> Result<()> {
    for c in 0..RNN_STATE_DIM {
        if params.input_norm[c] != params.output_norm[c] {
            return Err(Error::structural(
                "state-channel normalization differs between input and output",
            ));
        }
    }
    Ok(())
}

/// Plant-side emissions prediction in physical units.
pub fn fnn_forward(params: &NnParams, input: &FnnInput) -> Result<EmissionsState> {
    check_fnn_shape(params)?;
    if !input.is_finite() {
        return Err(Error::domain("non-finite emissions-network input"));
    }
    let raw = input.to_array();
    let normalized: Vec<f64> = raw
        .iter()
        .zip(&params.input_norm)
        .map(|(x, n)| n.normalize(*x))
        .collect();
    let out = params.forward_raw(&normalized)?;
    Ok(EmissionsState {
        nox: params.output_norm[0].denormalize(out[0]),
        soot: params.output_norm[1].denormalize(out[1]),
    })
}

fn rnn_normalized_input(params: &NnParams, x: &EmissionsState, u: &RnnInput) -> [f64; 6] {
    let mut s = [0.0; RNN_INPUT_DIM];
    s[0] = params.input_norm[0].normalize(x.nox);
    s[1] = params.input_norm[1].normalize(x.soot);
    for (c, v) in u.to_array().into_iter().enumerate() {
        s[RNN_STATE_DIM + c] = params.input_norm[RNN_STATE_DIM + c].normalize(v);
    }
    s
}

/// One step of the emissions recurrence in physical units.
pub fn rnn_step(params: &NnParams, x: &EmissionsState, u: &RnnInput) -> Result<EmissionsState> {
    check_rnn_norm_consistency(params)?;
    if !x.is_finite() || !u.is_finite() {
        return Err(Error::domain("non-finite recurrence arguments"));
    }
    let s = rnn_normalized_input(params, x, u);
    let out = params.forward_raw(&s)?;
    Ok(EmissionsState {
        nox: params.output_norm[0].denormalize(out[0]),
        soot: params.output_norm[1].denormalize(out[1]),
    })
}

/// 2x2 state Jacobian and 2x4 input Jacobian of one recurrence step, in
/// physical units.
#[derive(Debug, Clone, Copy)]
pub struct StepJacobians {
    /// d x_next / d x, row-major [out][in].
    pub d_state: [[f64; RNN_STATE_DIM]; RNN_STATE_DIM],
    /// d x_next / d u, row-major [out][in].
    pub d_input: [[f64; RNN_CONTROL_DIM]; RNN_STATE_DIM],
}

/// Jacobians of a single step via one reverse pass per output channel.
pub fn rnn_step_jacobians(
    params: &NnParams,
    x: &EmissionsState,
    u: &RnnInput,
) -> Result<StepJacobians> {
    check_rnn_norm_consistency(params)?;
    let s = rnn_normalized_input(params, x, u);
    let trace = params.forward_trace(&s)?;
    let mut jac = StepJacobians {
        d_state: [[0.0; RNN_STATE_DIM]; RNN_STATE_DIM],
        d_input: [[0.0; RNN_CONTROL_DIM]; RNN_STATE_DIM],
    };
    for row in 0..RNN_STATE_DIM {
        let mut seed = vec![0.0; RNN_STATE_DIM];
        seed[row] = 1.0;
        let g = params.backprop_with_trace(&trace, &seed);
        let out_scale = params.output_norm[row].scale;
        for col in 0..RNN_STATE_DIM {
            jac.d_state[row][col] = g.d_input[col] * out_scale / params.input_norm[col].scale;
        }
        for col in 0..RNN_CONTROL_DIM {
            let in_scale = params.input_norm[RNN_STATE_DIM + col].scale;
            jac.d_input[row][col] = g.d_input[RNN_STATE_DIM + col] * out_scale / in_scale;
        }
    }
    Ok(jac)
}

/// Sensitivities of an N-step rollout: `block(j, i)` is the 2x4 Jacobian of
/// the state after step `j+1` w.r.t. the input applied at step `i`, `i <= j`.
#[derive(Debug, Clone)]
pub struct HorizonSensitivities {
    horizon: usize,
    blocks: Vec<[[f64; RNN_CONTROL_DIM]; RNN_STATE_DIM]>,
}

impl HorizonSensitivities {
    fn index(&self, j: usize, i: usize) -> usize {
        debug_assert!(j < self.horizon && i <= j);
        j * (j + 1) / 2 + i
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// `d x_{j+1} / d u_i` for `i <= j` (zero-based step indices).
    pub fn block(&self, j: usize, i: usize) -> &[[f64; RNN_CONTROL_DIM]; RNN_STATE_DIM] {
        &self.blocks[self.index(j, i)]
    }
}

/// Rolls the recurrence `N` steps and returns the state trajectory together
/// with the full lower-triangular input-sensitivity blocks, accumulated from
/// per-step reverse-mode Jacobians.
pub fn rnn_horizon_jacobians(
    params: &NnParams,
    x0: &EmissionsState,
    u_seq: &[RnnInput],
) -> Result<(Vec<EmissionsState>, HorizonSensitivities)> {
    if u_seq.is_empty() {
        return Err(Error::domain("horizon must be at least 1"));
    }
    let n = u_seq.len();
    let mut states = Vec::with_capacity(n);
    let mut blocks = Vec::with_capacity(n * (n + 1) / 2);
    let mut x = *x0;
    for (step, u) in u_seq.iter().enumerate() {
        let jac = rnn_step_jacobians(params, &x, u)
            .map_err(|e| Error::numeric(format!("rollout step {step}"), e.to_string()))?;
        let next = rnn_step(params, &x, u)
            .map_err(|e| Error::numeric(format!("rollout step {step}"), e.to_string()))?;
        if !next.is_finite() {
            return Err(Error::numeric(
                format!("rollout step {step}"),
                "non-finite state",
            ));
        }
        // chain earlier blocks through this step's state Jacobian
        let base = step * (step + 1) / 2;
        for i in 0..step {
            let prev: [[f64; RNN_CONTROL_DIM]; RNN_STATE_DIM] = blocks[base - step + i];
            let mut out = [[0.0; RNN_CONTROL_DIM]; RNN_STATE_DIM];
            for (r, out_row) in out.iter_mut().enumerate() {
                for (c, slot) in out_row.iter_mut().enumerate() {
                    *slot = jac.d_state[r][0] * prev[0][c] + jac.d_state[r][1] * prev[1][c];
                }
            }
            blocks.push(out);
        }
        blocks.push(jac.d_input);
        states.push(next);
        x = next;
    }
    Ok((states, HorizonSensitivities { horizon: n, blocks }))
}
