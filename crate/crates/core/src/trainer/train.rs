use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::augment::{augment, AugmentFlags};
use super::dataset::{DatasetSequence, LabelRow};
use super::loss::tape_loss;
use super::slices::{sample_slices, Slice, SliceRef};
use crate::autodiff::{adam_step, AdamState, Gradients, Tape};
use crate::error::{Error, Result};
use crate::estimator::{EstimatorNetwork, NetworkState, Variant};
use crate::kv::KeyValues;
use crate::metrics::EvaluationReport;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub slice_len: usize,
    /// Truncation length of backpropagation through time.
    pub window: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Slices drawn per epoch; by default enough to cover the data once.
    pub slices_per_epoch: Option<usize>,
    pub augment: AugmentFlags,
    /// Carry the detached hidden state between windows of a slice.
    pub carry_state: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            slice_len: 100,
            window: 10,
            learning_rate: 1e-4,
            batch_size: 8,
            epochs: 30,
            slices_per_epoch: None,
            augment: AugmentFlags::default(),
            carry_state: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.slice_len == 0 || self.slice_len % self.window != 0 {
            return Err(Error::Config(format!(
                "slice length {} must be a positive multiple of the window {}",
                self.slice_len, self.window
            )));
        }
        if self.batch_size == 0 || !(self.learning_rate > 0.0) || self.slices_per_epoch == Some(0) {
            return Err(Error::Config("batch size, learning rate and slices per epoch must be positive".into()));
        }
        Ok(())
    }

    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let d = Self::default();
        let c = Self {
            slice_len: kv.parse_or("slice_len", d.slice_len)?,
            window: kv.parse_or("window", d.window)?,
            learning_rate: kv.parse_or("learning_rate", d.learning_rate)?,
            batch_size: kv.parse_or("batch_size", d.batch_size)?,
            epochs: kv.parse_or("epochs", d.epochs)?,
            slices_per_epoch: kv.parse_opt("slices_per_epoch")?,
            augment: AugmentFlags {
                polarity: kv.parse_or("flip_polarity", d.augment.polarity)?,
                left_right: kv.parse_or("flip_left_right", d.augment.left_right)?,
                up_down: kv.parse_or("flip_up_down", d.augment.up_down)?,
            },
            carry_state: kv.parse_or("carry_state", d.carry_state)?,
            seed: kv.parse_or("seed", d.seed)?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn write_kv(&self, kv: &mut KeyValues) {
        kv.set("slice_len", self.slice_len);
        kv.set("window", self.window);
        kv.set("learning_rate", self.learning_rate);
        kv.set("batch_size", self.batch_size);
        kv.set("epochs", self.epochs);
        if let Some(n) = self.slices_per_epoch {
            kv.set("slices_per_epoch", n);
        }
        kv.set("flip_polarity", self.augment.polarity);
        kv.set("flip_left_right", self.augment.left_right);
        kv.set("flip_up_down", self.augment.up_down);
        kv.set("carry_state", self.carry_state);
        kv.set("seed", self.seed);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub mean_loss: f64,
    pub optimizer_steps: usize,
}

pub const LOSS_CURVE_HEADER: &str = "epoch,mean_loss,optimizer_steps";

impl EpochMetrics {
    pub fn csv_row(&self) -> String {
        format!("{},{},{}", self.epoch, self.mean_loss, self.optimizer_steps)
    }
}

fn aux_for(variant: Variant, l: &LabelRow) -> Result<Option<Vec<f64>>> {
    let missing = |what: &str| Error::Config(format!("variant {variant} needs {what} columns in the labels"));
    match variant {
        Variant::VisionMotor => Ok(Some(l.motors.ok_or_else(|| missing("motor speed"))?.to_vec())),
        Variant::VisionGyro => Ok(Some(l.gyro.ok_or_else(|| missing("gyro"))?.to_vec())),
        _ => Ok(None),
    }
}

/// Rejects datasets whose frame size or auxiliary columns do not suit `net`.
pub fn check_compatible<T: Scalar>(net: &EstimatorNetwork<T>, sequences: &[DatasetSequence]) -> Result<()> {
    if sequences.is_empty() {
        return Err(Error::Config("no dataset sequences given".into()));
    }
    let cfg = net.config();
    for (i, s) in sequences.iter().enumerate() {
        if s.is_empty() {
            return Err(Error::Config(format!("sequence {i} is empty")));
        }
        if s.frame_size() != (cfg.width, cfg.height) {
            let (w, h) = s.frame_size();
            return Err(Error::Config(format!(
                "sequence {i} yields {w}x{h} frames, network expects {}x{}",
                cfg.width, cfg.height
            )));
        }
        if let Some(l) = s.labels.first() {
            aux_for(cfg.variant, l)?;
        }
    }
    Ok(())
}

/// Forward over one window from `state` and the loss's gradients.
/// Returns the gradients, the loss and the state after the window.
pub fn window_gradients<T: Scalar>(
    net: &EstimatorNetwork<T>,
    slice: &Slice,
    range: std::ops::Range<usize>,
    state: &NetworkState<T>,
) -> Result<(Gradients<T>, f64, NetworkState<T>)> {
    let mut tape = Tape::new(&net.params);
    let mut sv = net.state_vars(&mut tape, state);
    let mut outputs = Vec::with_capacity(range.len());
    let variant = net.variant();
    for k in range.clone() {
        let x = tape.input(net.frame_tensor(&slice.frames[k])?);
        let aux = aux_for(variant, &slice.labels[k])?;
        let a = net.aux_tensor(aux.as_deref())?.map(|t| tape.input(t));
        let step = net.forward(&mut tape, x, a, &sv)?;
        outputs.push(step.output);
        sv = step.state;
    }
    let targets: Vec<[f64; 4]> = slice.labels[range].iter().map(|l| l.target).collect();
    let loss = tape_loss(&mut tape, &outputs, &targets)?;
    let mut grads = Gradients::zeros_like(&net.params);
    tape.backward(loss, &mut grads)?;
    let value = tape.value(loss).item().as_f64();
    Ok((grads, value, EstimatorNetwork::read_state(&tape, &sv)))
}

fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    // SplitMix-style scrambling keeps derived streams apart.
    let mut z = seed ^ a.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ b.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Trains on `refs`: batches of slices, each cut into windows; one Adam
/// step per window on the batch-averaged gradient.
pub fn train_on_slices<T: Scalar>(
    net: &mut EstimatorNetwork<T>,
    adam: &mut AdamState<T>,
    sequences: &[DatasetSequence],
    refs: &[SliceRef],
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<EpochMetrics> {
    cfg.validate()?;
    check_compatible(net, sequences)?;
    let mut loss_sum = 0.0;
    let mut steps = 0;
    for (b, batch) in refs.chunks(cfg.batch_size).enumerate() {
        let slices: Vec<Slice> = batch
            .par_iter()
            .enumerate()
            .map(|(i, r)| {
                let slice = Slice::load(sequences, *r, cfg.slice_len)?;
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, epoch as u64, (b * cfg.batch_size + i) as u64));
                Ok(augment(&slice, cfg.augment.draw(&mut rng)))
            })
            .collect::<Result<_>>()?;
        let mut states = vec![NetworkState::default(); slices.len()];
        for w in 0..cfg.slice_len / cfg.window {
            let range = w * cfg.window..(w + 1) * cfg.window;
            let net_ref = &*net;
            let parts: Vec<(Gradients<T>, f64, NetworkState<T>)> = slices
                .par_iter()
                .zip(states.par_iter())
                .map(|(s, st)| window_gradients(net_ref, s, range.clone(), st))
                .collect::<Result<_>>()?;
            let mut grads = Vec::with_capacity(parts.len());
            let mut batch_loss = 0.0;
            for (i, (g, l, st)) in parts.into_iter().enumerate() {
                batch_loss += l;
                grads.push(g);
                states[i] = if cfg.carry_state { st } else { NetworkState::default() };
            }
            batch_loss /= slices.len() as f64;
            if !batch_loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss in epoch {epoch}, batch {b}, window {w} (slices {batch:?})"
                )));
            }
            let mut g = Gradients::ordered_sum(&grads).expect("non-empty batch");
            g.scale(T::lit(1.0 / slices.len() as f64));
            if !g.is_finite() {
                return Err(Error::Numeric(format!("non-finite gradient in epoch {epoch}, batch {b}, window {w}")));
            }
            adam_step(&mut net.params, &g, adam, cfg.learning_rate)?;
            loss_sum += batch_loss;
            steps += 1;
        }
    }
    net.reset_memory();
    Ok(EpochMetrics { epoch, mean_loss: loss_sum / steps.max(1) as f64, optimizer_steps: steps })
}

/// One epoch: draws fresh slices from the epoch's seed and trains on them.
pub fn train_epoch<T: Scalar>(
    net: &mut EstimatorNetwork<T>,
    adam: &mut AdamState<T>,
    sequences: &[DatasetSequence],
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<EpochMetrics> {
    let lengths: Vec<usize> = sequences.iter().map(DatasetSequence::len).collect();
    let n = cfg.slices_per_epoch.unwrap_or_else(|| (lengths.iter().sum::<usize>() / cfg.slice_len).max(1));
    let refs = sample_slices(&lengths, n, cfg.slice_len, mix_seed(cfg.seed, epoch as u64, u64::MAX))?;
    train_on_slices(net, adam, sequences, &refs, cfg, epoch)
}

/// Predictions and truth of a whole sequence, in degrees and deg/s.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: EvaluationReport,
    pub predictions: Vec<[f64; 4]>,
    pub truth: Vec<[f64; 4]>,
}

/// Runs the network over a full sequence without resetting its memory.
pub fn evaluate<T: Scalar>(net: &mut EstimatorNetwork<T>, sequence: &DatasetSequence, label: &str) -> Result<Evaluation> {
    check_compatible(net, std::slice::from_ref(sequence))?;
    net.reset_memory();
    let variant = net.variant();
    let mut predictions = Vec::with_capacity(sequence.len());
    let mut truth = Vec::with_capacity(sequence.len());
    for (k, l) in sequence.labels.iter().enumerate() {
        let aux = aux_for(variant, l)?;
        let est = net.step(&sequence.frame(k)?, aux.as_deref())?;
        predictions.push(est.to_degrees());
        truth.push(l.target.map(f64::to_degrees));
    }
    net.reset_memory();
    let report = EvaluationReport::compute(label, &predictions, &truth)?;
    Ok(Evaluation { report, predictions, truth })
}
