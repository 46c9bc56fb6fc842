//! Model assembly: the fixed conv stack with a flat parameter vector.
//!
//! All weights and biases live in one `Vec<f64>` so the optimizer and the
//! checkpoint format can treat parameters uniformly. The layout is, in
//! order: for each conv block its kernel then bias, then the hidden dense
//! kernel and bias, then the output dense kernel and bias. `shape_ledger`
//! computes every layer's output shape and parameter count from the config
//! alone, without allocating anything, so shape audits of arbitrarily large
//! configurations stay cheap.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use super::layers::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, leaky_relu_backward,
    leaky_relu_forward, maxpool2x2_backward, maxpool2x2_forward, softmax,
};
use crate::{Error, Result};

/// Architecture hyperparameters. `conv_channels` gives the output channels
/// of each Conv -> LeakyReLU -> MaxPool block in order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub input_h: usize,
    pub input_w: usize,
    pub input_c: usize,
    pub conv_channels: Vec<usize>,
    pub kernel_size: usize,
    pub leaky_slope: f64,
    pub dense_units: usize,
    pub num_classes: usize,
}

impl ModelConfig {
    /// The production classifier shape: three conv blocks of 64, 128, 64
    /// channels, a 256-unit hidden dense layer, slope-0.1 leaky ReLUs.
    pub fn standard(input_h: usize, input_w: usize, num_classes: usize) -> Self {
        ModelConfig {
            input_h,
            input_w,
            input_c: 1,
            conv_channels: vec![64, 128, 64],
            kernel_size: 3,
            leaky_slope: 0.1,
            dense_units: 256,
            num_classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_h == 0 || self.input_w == 0 || self.input_c == 0 {
            return Err(Error::invalid("input dimensions must be positive"));
        }
        if self.conv_channels.is_empty() || self.conv_channels.contains(&0) {
            return Err(Error::invalid("conv_channels must be nonempty and positive"));
        }
        if self.kernel_size % 2 == 0 || self.kernel_size == 0 {
            return Err(Error::invalid(format!(
                "kernel_size must be odd, got {}",
                self.kernel_size
            )));
        }
        if self.dense_units == 0 {
            return Err(Error::invalid("dense_units must be positive"));
        }
        if self.num_classes < 2 {
            return Err(Error::invalid(format!(
                "num_classes must be >= 2, got {}",
                self.num_classes
            )));
        }
        if !(self.leaky_slope >= 0.0 && self.leaky_slope < 1.0) {
            return Err(Error::invalid(format!(
                "leaky_slope must lie in [0, 1), got {}",
                self.leaky_slope
            )));
        }
        Ok(())
    }

    /// Per-layer output shapes and parameter counts, straight from shape
    /// arithmetic.
    pub fn shape_ledger(&self) -> Result<Vec<LayerInfo>> {
        self.validate()?;
        let k = self.kernel_size;
        let mut ledger = Vec::new();
        let (mut h, mut w, mut c) = (self.input_h, self.input_w, self.input_c);
        for (i, &cout) in self.conv_channels.iter().enumerate() {
            ledger.push(LayerInfo {
                name: format!("conv{}", i + 1),
                out_h: h,
                out_w: w,
                out_c: cout,
                params: k * k * c * cout + cout,
            });
            ledger.push(LayerInfo {
                name: format!("leaky_relu{}", i + 1),
                out_h: h,
                out_w: w,
                out_c: cout,
                params: 0,
            });
            h = h.div_ceil(2);
            w = w.div_ceil(2);
            c = cout;
            ledger.push(LayerInfo {
                name: format!("maxpool{}", i + 1),
                out_h: h,
                out_w: w,
                out_c: c,
                params: 0,
            });
        }
        let flat = h * w * c;
        ledger.push(LayerInfo {
            name: String::from("flatten"),
            out_h: 1,
            out_w: 1,
            out_c: flat,
            params: 0,
        });
        ledger.push(LayerInfo {
            name: String::from("dense1"),
            out_h: 1,
            out_w: 1,
            out_c: self.dense_units,
            params: flat * self.dense_units + self.dense_units,
        });
        ledger.push(LayerInfo {
            name: String::from("leaky_relu_dense"),
            out_h: 1,
            out_w: 1,
            out_c: self.dense_units,
            params: 0,
        });
        ledger.push(LayerInfo {
            name: String::from("dense2"),
            out_h: 1,
            out_w: 1,
            out_c: self.num_classes,
            params: self.dense_units * self.num_classes + self.num_classes,
        });
        Ok(ledger)
    }

    /// Total trainable parameters, without allocating them.
    pub fn param_count(&self) -> Result<usize> {
        Ok(self.shape_ledger()?.iter().map(|l| l.params).sum())
    }

    /// Flattened size after the conv blocks.
    fn flat_len(&self) -> usize {
        let mut h = self.input_h;
        let mut w = self.input_w;
        for _ in &self.conv_channels {
            h = h.div_ceil(2);
            w = w.div_ceil(2);
        }
        h * w * *self.conv_channels.last().unwrap()
    }

    /// Expected flat input length.
    pub fn input_len(&self) -> usize {
        self.input_h * self.input_w * self.input_c
    }
}

/// One row of the shape audit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerInfo {
    pub name: String,
    pub out_h: usize,
    pub out_w: usize,
    pub out_c: usize,
    pub params: usize,
}

/// Slices of the flat parameter vector belonging to one parametered layer.
#[derive(Debug, Clone, Copy)]
struct ParamSlot {
    weights: (usize, usize),
    bias: (usize, usize),
}

/// The network: config, parameter vector, and the slot table into it.
#[derive(Debug, Clone)]
pub struct Cnn {
    pub cfg: ModelConfig,
    pub params: Vec<f64>,
    conv_slots: Vec<ParamSlot>,
    dense1_slot: ParamSlot,
    dense2_slot: ParamSlot,
}

/// Everything forward saves for backward.
pub struct ForwardCache {
    /// Input of each conv block; the entry after the last block is the
    /// flattened dense input.
    block_inputs: Vec<Vec<f64>>,
    block_dims: Vec<(usize, usize, usize)>,
    conv_pre: Vec<Vec<f64>>,
    pool_argmax: Vec<Vec<u32>>,
    dense1_pre: Vec<f64>,
    dense1_act: Vec<f64>,
    pub logits: Vec<f64>,
}

impl Cnn {
    /// Builds the network with all parameters at zero.
    pub fn new(cfg: ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let k = cfg.kernel_size;
        let mut offset = 0usize;
        let mut conv_slots = Vec::new();
        let mut cin = cfg.input_c;
        for &cout in &cfg.conv_channels {
            let wlen = k * k * cin * cout;
            conv_slots.push(ParamSlot {
                weights: (offset, wlen),
                bias: (offset + wlen, cout),
            });
            offset += wlen + cout;
            cin = cout;
        }
        let flat = cfg.flat_len();
        let w1 = flat * cfg.dense_units;
        let dense1_slot = ParamSlot {
            weights: (offset, w1),
            bias: (offset + w1, cfg.dense_units),
        };
        offset += w1 + cfg.dense_units;
        let w2 = cfg.dense_units * cfg.num_classes;
        let dense2_slot = ParamSlot {
            weights: (offset, w2),
            bias: (offset + w2, cfg.num_classes),
        };
        offset += w2 + cfg.num_classes;
        Ok(Cnn {
            cfg,
            params: vec![0.0; offset],
            conv_slots,
            dense1_slot,
            dense2_slot,
        })
    }

    /// He-style uniform init, `U(-sqrt(6/fan_in), +sqrt(6/fan_in))` per
    /// kernel, biases zero. Deterministic for a seed.
    pub fn init_he_uniform(&mut self, seed: u64) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let k = self.cfg.kernel_size;
        let mut cin = self.cfg.input_c;
        let slots = self.conv_slots.clone();
        let channels = self.cfg.conv_channels.clone();
        for (slot, cout) in slots.iter().zip(channels) {
            let fan_in = (k * k * cin) as f64;
            self.fill_uniform(&mut rng, slot.weights, (6.0 / fan_in).sqrt());
            self.zero(slot.bias);
            cin = cout;
        }
        let flat = self.cfg.flat_len() as f64;
        let d1 = self.dense1_slot;
        let d2 = self.dense2_slot;
        self.fill_uniform(&mut rng, d1.weights, (6.0 / flat).sqrt());
        self.zero(d1.bias);
        self.fill_uniform(&mut rng, d2.weights, (6.0 / self.cfg.dense_units as f64).sqrt());
        self.zero(d2.bias);
    }

    fn fill_uniform(&mut self, rng: &mut ChaCha12Rng, span: (usize, usize), limit: f64) {
        for p in &mut self.params[span.0..span.0 + span.1] {
            *p = rng.gen_range(-limit..limit);
        }
    }

    fn zero(&mut self, span: (usize, usize)) {
        for p in &mut self.params[span.0..span.0 + span.1] {
            *p = 0.0;
        }
    }

    fn slice(&self, span: (usize, usize)) -> &[f64] {
        &self.params[span.0..span.0 + span.1]
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Forward pass keeping everything backward needs.
    pub fn forward(&self, input: &[f64]) -> Result<ForwardCache> {
        if input.len() != self.cfg.input_len() {
            return Err(Error::Shape {
                expected: format!("{}", self.cfg.input_len()),
                got: format!("{}", input.len()),
                context: "model input",
            });
        }
        let k = self.cfg.kernel_size;
        let slope = self.cfg.leaky_slope;
        let mut block_inputs = vec![input.to_vec()];
        let mut block_dims = vec![(self.cfg.input_h, self.cfg.input_w, self.cfg.input_c)];
        let mut conv_pre = Vec::new();
        let mut pool_argmax = Vec::new();
        for (slot, &cout) in self.conv_slots.iter().zip(&self.cfg.conv_channels) {
            let (h, w, cin) = *block_dims.last().unwrap();
            let x = block_inputs.last().unwrap();
            let pre = conv2d_forward(
                x,
                h,
                w,
                cin,
                self.slice(slot.weights),
                self.slice(slot.bias),
                cout,
                k,
            );
            let act = leaky_relu_forward(&pre, slope);
            let (pooled, argmax, ho, wo) = maxpool2x2_forward(&act, h, w, cout);
            conv_pre.push(pre);
            pool_argmax.push(argmax);
            block_inputs.push(pooled);
            block_dims.push((ho, wo, cout));
        }
        let flat = block_inputs.last().unwrap();
        let dense1_pre = dense_forward(
            flat,
            self.slice(self.dense1_slot.weights),
            self.slice(self.dense1_slot.bias),
            self.cfg.dense_units,
        );
        let dense1_act = leaky_relu_forward(&dense1_pre, slope);
        let logits = dense_forward(
            &dense1_act,
            self.slice(self.dense2_slot.weights),
            self.slice(self.dense2_slot.bias),
            self.cfg.num_classes,
        );
        Ok(ForwardCache {
            block_inputs,
            block_dims,
            conv_pre,
            pool_argmax,
            dense1_pre,
            dense1_act,
            logits,
        })
    }

    /// Backpropagates a logit gradient; returns parameter gradients aligned
    /// with `self.params`.
    pub fn backward(&self, cache: &ForwardCache, dlogits: &[f64]) -> Vec<f64> {
        let slope = self.cfg.leaky_slope;
        let k = self.cfg.kernel_size;
        let mut grads = vec![0.0f64; self.params.len()];

        let (d_act1, dw2, db2) = dense_backward(
            &cache.dense1_act,
            self.slice(self.dense2_slot.weights),
            self.cfg.num_classes,
            dlogits,
        );
        write(&mut grads, self.dense2_slot.weights, &dw2);
        write(&mut grads, self.dense2_slot.bias, &db2);

        let d_pre1 = leaky_relu_backward(&cache.dense1_pre, &d_act1, slope);
        let flat = cache.block_inputs.last().unwrap();
        let (mut d_down, dw1, db1) = dense_backward(
            flat,
            self.slice(self.dense1_slot.weights),
            self.cfg.dense_units,
            &d_pre1,
        );
        write(&mut grads, self.dense1_slot.weights, &dw1);
        write(&mut grads, self.dense1_slot.bias, &db1);

        for bi in (0..self.conv_slots.len()).rev() {
            let (h, w, cin) = cache.block_dims[bi];
            let cout = self.cfg.conv_channels[bi];
            let act_len = h * w * cout;
            let d_act = maxpool2x2_backward(&cache.pool_argmax[bi], &d_down, act_len);
            let d_pre = leaky_relu_backward(&cache.conv_pre[bi], &d_act, slope);
            let slot = self.conv_slots[bi];
            let (d_in, dw, db) = conv2d_backward(
                &cache.block_inputs[bi],
                h,
                w,
                cin,
                self.slice(slot.weights),
                cout,
                k,
                &d_pre,
            );
            write(&mut grads, slot.weights, &dw);
            write(&mut grads, slot.bias, &db);
            d_down = d_in;
        }
        grads
    }

    /// Class probabilities and the argmax label (first index on ties).
    pub fn predict(&self, input: &[f64]) -> Result<(usize, Vec<f64>)> {
        let cache = self.forward(input)?;
        let probs = softmax(&cache.logits);
        let mut best = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > probs[best] {
                best = i;
            }
        }
        Ok((best, probs))
    }
}

fn write(grads: &mut [f64], span: (usize, usize), values: &[f64]) {
    debug_assert_eq!(span.1, values.len());
    grads[span.0..span.0 + span.1].copy_from_slice(values);
}
