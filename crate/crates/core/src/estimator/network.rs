use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{NetworkConfig, Variant};
use super::estimate::Estimate;
use crate::autodiff::{Checkpoint, Conv2dLayer, ConvGru, FcGru, LifLayer, LinearLayer, ParamSet, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::eventcam::EventFrame;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Memory {
    Gru(ConvGru),
    FeedForward([Conv2dLayer; 3]),
    Spiking(LifLayer),
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct AuxPath {
    embed: LinearLayer,
    gru: FcGru,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Layers {
    encoder: [Conv2dLayer; 3],
    memory: Memory,
    aux: Option<AuxPath>,
    decoder: [Conv2dLayer; 2],
    predictor: LinearLayer,
}

/// Recurrent state carried between steps, as plain values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NetworkState<T> {
    /// GRU hidden map, or LIF membrane potential.
    pub memory: Option<Tensor<T>>,
    /// LIF spikes of the previous step.
    pub spikes: Option<Tensor<T>>,
    /// Hidden vector of the auxiliary GRU.
    pub aux: Option<Tensor<T>>,
}

impl<T: Scalar> NetworkState<T> {
    pub fn is_empty(&self) -> bool {
        self.memory.is_none() && self.spikes.is_none() && self.aux.is_none()
    }
}

/// Recurrent state living on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateVars {
    pub memory: Option<Var>,
    pub spikes: Option<Var>,
    pub aux: Option<Var>,
}

/// Result of one differentiable step.
#[derive(Debug, Clone, Copy)]
pub struct StepVars {
    /// `[φ, θ, p, q]` in degrees and degrees per second.
    pub output: Var,
    /// Decoder feature map before pooling.
    pub features: Var,
    pub state: StateVars,
}

/// Encoder → memory → decoder → predictor stack with step-wise state.
///
/// The raw outputs are in degrees and degrees per second, which puts the
/// training targets near unit scale; [`EstimatorNetwork::step`] converts to
/// radians.
#[derive(Debug, Clone)]
pub struct EstimatorNetwork<T> {
    config: NetworkConfig,
    pub params: ParamSet<T>,
    layers: Layers,
    state: NetworkState<T>,
}

impl<T: Scalar> EstimatorNetwork<T> {
    pub fn build(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut p = ParamSet::new();
        let [e1, e2, e3] = config.encoder_channels;
        let encoder = [
            Conv2dLayer::new(&mut p, "encoder.0", (2, e1, 3, 2), true, &mut rng),
            Conv2dLayer::new(&mut p, "encoder.1", (e1, e2, 3, 2), true, &mut rng),
            Conv2dLayer::new(&mut p, "encoder.2", (e2, e3, 3, 2), true, &mut rng),
        ];
        let m = config.memory_channels;
        let memory = match config.variant {
            Variant::VisionFF => Memory::FeedForward([
                Conv2dLayer::new(&mut p, "memory.0", (e3, m, 3, 1), true, &mut rng),
                Conv2dLayer::new(&mut p, "memory.1", (m, m, 3, 1), true, &mut rng),
                Conv2dLayer::new(&mut p, "memory.2", (m, m, 3, 1), true, &mut rng),
            ]),
            Variant::VisionSNN => Memory::Spiking(LifLayer::new(
                &mut p,
                "memory",
                e3,
                m,
                config.lif_leak,
                config.lif_threshold,
                &mut rng,
            )?),
            _ => Memory::Gru(ConvGru::new(&mut p, "memory", e3, m, &mut rng)),
        };
        let aux = (config.aux_width > 0).then(|| AuxPath {
            embed: LinearLayer::new(&mut p, "aux.embed", config.aux_width, config.aux_embed, &mut rng),
            gru: FcGru::new(&mut p, "aux.memory", config.aux_embed, config.aux_hidden, &mut rng),
        });
        let d = config.decoder_channels;
        let dec_in = m + if aux.is_some() { config.aux_hidden } else { 0 };
        let decoder = [
            Conv2dLayer::new(&mut p, "decoder.0", (dec_in, d, 3, 1), true, &mut rng),
            Conv2dLayer::new(&mut p, "decoder.1", (d, d, 3, 1), true, &mut rng),
        ];
        let predictor = LinearLayer::new(&mut p, "predictor", d, 4, &mut rng);
        let layers = Layers { encoder, memory, aux, decoder, predictor };
        Ok(Self { config, params: p, layers, state: NetworkState::default() })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    pub fn param_count(&self) -> usize {
        self.params.scalar_count()
    }

    pub fn state(&self) -> &NetworkState<T> {
        &self.state
    }

    pub fn set_state(&mut self, state: NetworkState<T>) {
        self.state = state;
    }

    pub fn reset_memory(&mut self) {
        self.state = NetworkState::default();
    }

    pub fn is_stateless(&self) -> bool {
        matches!(self.layers.memory, Memory::FeedForward(_)) && self.layers.aux.is_none()
    }

    /// Converts a frame into the `[2, H, W]` network input.
    pub fn frame_tensor(&self, frame: &EventFrame) -> Result<Tensor<T>> {
        if (frame.width, frame.height) != (self.config.width, self.config.height) {
            return Err(Error::Shape(format!(
                "frame {}x{} does not match network input {}x{}",
                frame.width, frame.height, self.config.width, self.config.height
            )));
        }
        let s = self.config.input_scale;
        Tensor::new(&[2, frame.height, frame.width], frame.counts.iter().map(|&c| T::lit(c as f64 * s)).collect())
    }

    pub fn aux_tensor(&self, aux: Option<&[f64]>) -> Result<Option<Tensor<T>>> {
        match (aux, self.config.aux_width) {
            (None, 0) => Ok(None),
            (Some(a), w) if w > 0 && a.len() == w => {
                Ok(Some(Tensor::new(&[w], a.iter().map(|&v| T::lit(v * self.config.aux_scale)).collect())?))
            }
            (a, w) => Err(Error::Shape(format!(
                "variant {} expects {w} auxiliary values, got {}",
                self.config.variant,
                a.map_or(0, <[f64]>::len)
            ))),
        }
    }

    /// Places a stored state on a tape, zero-filling anything missing.
    pub fn state_vars(&self, tape: &mut Tape<'_, T>, state: &NetworkState<T>) -> StateVars {
        let (fw, fh) = self.config.feature_size();
        let m = self.config.memory_channels;
        let map = || Tensor::zeros(&[m, fh, fw]);
        let mut sv = StateVars::default();
        match self.layers.memory {
            Memory::Gru(_) => sv.memory = Some(tape.input(state.memory.clone().unwrap_or_else(map))),
            Memory::Spiking(_) => {
                sv.memory = Some(tape.input(state.memory.clone().unwrap_or_else(map)));
                sv.spikes = Some(tape.input(state.spikes.clone().unwrap_or_else(map)));
            }
            Memory::FeedForward(_) => {}
        }
        if self.layers.aux.is_some() {
            let h = self.config.aux_hidden;
            sv.aux = Some(tape.input(state.aux.clone().unwrap_or_else(|| Tensor::zeros(&[h]))));
        }
        sv
    }

    /// Reads the values of tape state back into plain tensors.
    pub fn read_state(tape: &Tape<'_, T>, sv: &StateVars) -> NetworkState<T> {
        NetworkState {
            memory: sv.memory.map(|v| tape.value(v).clone()),
            spikes: sv.spikes.map(|v| tape.value(v).clone()),
            aux: sv.aux.map(|v| tape.value(v).clone()),
        }
    }

    /// One differentiable step on `tape`.
    pub fn forward(&self, tape: &mut Tape<'_, T>, input: Var, aux: Option<Var>, state: &StateVars) -> Result<StepVars> {
        let spiking = matches!(self.layers.memory, Memory::Spiking(_));
        let mut x = input;
        for layer in &self.layers.encoder {
            let y = layer.forward(tape, x)?;
            x = if spiking { tape.heaviside(y, T::zero()) } else { tape.elu(y) };
        }
        let mut next = StateVars::default();
        let mem_out = match &self.layers.memory {
            Memory::Gru(gru) => {
                let h = state.memory.ok_or_else(|| Error::Shape("missing GRU state".into()))?;
                let h2 = gru.forward(tape, x, h)?;
                next.memory = Some(h2);
                h2
            }
            Memory::FeedForward(convs) => {
                for c in convs {
                    let y = c.forward(tape, x)?;
                    x = tape.elu(y);
                }
                x
            }
            Memory::Spiking(lif) => {
                let (v, s) = match (state.memory, state.spikes) {
                    (Some(v), Some(s)) => (v, s),
                    _ => return Err(Error::Shape("missing LIF state".into())),
                };
                let (s2, v2) = lif.forward(tape, x, v, s)?;
                next.memory = Some(v2);
                next.spikes = Some(s2);
                s2
            }
        };
        let mut dec_in = mem_out;
        match (&self.layers.aux, aux) {
            (Some(path), Some(a)) => {
                let h = state.aux.ok_or_else(|| Error::Shape("missing aux state".into()))?;
                let e = path.embed.forward(tape, a)?;
                let e = tape.elu(e);
                let h2 = path.gru.forward(tape, e, h)?;
                next.aux = Some(h2);
                let shape = tape.value(mem_out).shape().to_vec();
                let b = tape.broadcast_spatial(h2, shape[1], shape[2])?;
                dec_in = tape.concat(mem_out, b)?;
            }
            (None, None) => {}
            _ => return Err(Error::Shape(format!("auxiliary input mismatch for variant {}", self.config.variant))),
        }
        let mut y = dec_in;
        for c in &self.layers.decoder {
            let z = c.forward(tape, y)?;
            y = tape.elu(z);
        }
        let pooled = tape.global_avg_pool(y)?;
        let output = self.layers.predictor.forward(tape, pooled)?;
        Ok(StepVars { output, features: y, state: next })
    }

    /// Advances the hidden state by one 5 ms tick.
    pub fn step(&mut self, frame: &EventFrame, aux: Option<&[f64]>) -> Result<Estimate> {
        let raw = self.step_raw(&self.frame_tensor(frame)?, aux)?;
        let est = Estimate::from_degrees(frame.t0_us + crate::eventcam::BIN_US, raw);
        if !est.is_finite() {
            return Err(Error::Numeric(format!("non-finite estimate at t = {} us", est.t_us)));
        }
        Ok(est)
    }

    /// Step on a prepared input tensor; returns raw outputs in degrees.
    pub fn step_raw(&mut self, input: &Tensor<T>, aux: Option<&[f64]>) -> Result<[f64; 4]> {
        let aux_t = self.aux_tensor(aux)?;
        let mut tape = Tape::inference(&self.params);
        let x = tape.input(input.clone());
        let a = aux_t.map(|t| tape.input(t));
        let sv = self.state_vars(&mut tape, &self.state);
        let out = self.forward(&mut tape, x, a, &sv)?;
        let o = tape.value(out.output).data();
        let raw = [o[0].as_f64(), o[1].as_f64(), o[2].as_f64(), o[3].as_f64()];
        let next = Self::read_state(&tape, &out.state);
        drop(tape);
        self.state = next;
        Ok(raw)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::from_params(self.config.to_kv(), &self.params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.checkpoint().save(path)
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let config = NetworkConfig::from_kv(&ckpt.config)?;
        let mut net = Self::build(config)?;
        ckpt.restore_into(&mut net.params)?;
        Ok(net)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }

    /// Loads parameters into a network built from `config`, rejecting files
    /// whose layer shapes differ.
    pub fn load_as(path: &Path, config: NetworkConfig) -> Result<Self> {
        let ckpt = Checkpoint::load(path)?;
        let mut net = Self::build(config)?;
        ckpt.restore_into(&mut net.params)?;
        Ok(net)
    }
}
