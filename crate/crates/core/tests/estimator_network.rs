use noimu::autodiff::{grad_check, GradCheckOptions, Tape, Tensor};
use noimu::estimator::{EstimatorNetwork, NetworkConfig, NetworkState, Variant};
use noimu::eventcam::EventFrame;
use noimu::trainer::tape_loss;
use noimu::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_input(w: usize, h: usize, seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::new(&[2, h, w], (0..2 * w * h).map(|_| if rng.random_bool(0.2) { rng.random_range(0.5..2.0) } else { 0.0 }).collect())
        .unwrap()
}

fn sparse_frame(w: usize, h: usize, seed: u64) -> EventFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = EventFrame::zeros(w, h, 0);
    for c in f.counts.iter_mut() {
        if rng.random_bool(0.1) {
            *c = rng.random_range(1..4);
        }
    }
    f
}

/// End-to-end check over a three-step unroll scored with the training loss.
fn end_to_end(variant: Variant) {
    const STEPS: usize = 3;
    let net = EstimatorNetwork::<f64>::build(NetworkConfig::tiny(variant, 40, 32, 11)).unwrap();
    let aux_w = variant.aux_width();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut inputs: Vec<Tensor<f64>> = (0..STEPS).map(|k| random_input(40, 32, k as u64)).collect();
    if aux_w > 0 {
        for _ in 0..STEPS {
            inputs.push(Tensor::new(&[aux_w], (0..aux_w).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap());
        }
    }
    let targets: Vec<[f64; 4]> = (0..STEPS).map(|k| [0.05 * k as f64, -0.03, 0.2, -0.1 * k as f64]).collect();
    // Spiking activations are piecewise constant, so their surrogate
    // gradients have no finite-difference counterpart; only the layers
    // downstream of the last spike are compared for that variant.
    let spiking = variant == Variant::VisionSNN;
    let filter = |name: &str| !spiking || name.starts_with("decoder") || name.starts_with("predictor");
    let report = grad_check(
        &net.params,
        &inputs,
        false,
        filter,
        |tape: &mut Tape<'_, f64>, xs| {
            let mut sv = net.state_vars(tape, &NetworkState::default());
            let mut outs = Vec::new();
            for k in 0..STEPS {
                let aux = (aux_w > 0).then(|| xs[STEPS + k]);
                let step = net.forward(tape, xs[k], aux, &sv)?;
                outs.push(step.output);
                sv = step.state;
            }
            tape_loss(tape, &outs, &targets)
        },
        &GradCheckOptions { step: 1e-5, floor: 1e-6, max_per_tensor: Some(8), seed: 3 },
    )
    .unwrap();
    assert!(report.checked > 20, "{variant}: {report:?}");
    assert!(report.max_rel_error < 1e-3, "{variant}: {report:?}");
}

#[test]
fn gradients_vision() {
    end_to_end(Variant::Vision);
}

#[test]
fn gradients_vision_motor() {
    end_to_end(Variant::VisionMotor);
}

#[test]
fn gradients_vision_gyro() {
    end_to_end(Variant::VisionGyro);
}

#[test]
fn gradients_vision_ff() {
    end_to_end(Variant::VisionFF);
}

#[test]
fn gradients_vision_snn_readout() {
    end_to_end(Variant::VisionSNN);
}

#[test]
fn parameter_counts_at_default_resolution() {
    let count = |v| EstimatorNetwork::<f32>::build(NetworkConfig::new(v, 320, 240, 0)).unwrap().param_count();
    let vision = count(Variant::Vision);
    assert!((340_000..=510_000).contains(&vision), "vision {vision}");
    for v in [Variant::VisionMotor, Variant::VisionGyro] {
        let n = count(v);
        assert!(n > vision && (362_400..=543_600).contains(&n), "{v} {n}");
    }
    let ff = count(Variant::VisionFF);
    assert!(ff < vision, "ff {ff} vs vision {vision}");
    // Convolutional weights do not depend on the input size.
    let small = EstimatorNetwork::<f32>::build(NetworkConfig::new(Variant::Vision, 160, 120, 0)).unwrap();
    assert_eq!(small.param_count(), vision);
}

#[test]
fn same_seed_same_parameters() {
    for v in Variant::ALL {
        let a = EstimatorNetwork::<f32>::build(NetworkConfig::tiny(v, 40, 32, 9)).unwrap();
        let b = EstimatorNetwork::<f32>::build(NetworkConfig::tiny(v, 40, 32, 9)).unwrap();
        let c = EstimatorNetwork::<f32>::build(NetworkConfig::tiny(v, 40, 32, 10)).unwrap();
        assert!(a.params == b.params, "{v}");
        assert!(a.params != c.params, "{v}");
    }
}

#[test]
fn memory_persists_through_silent_frames() {
    let cfg = NetworkConfig::tiny(Variant::Vision, 40, 32, 2);
    let silent = EventFrame::zeros(40, 32, 0);
    let fresh = EstimatorNetwork::<f64>::build(cfg.clone()).unwrap().step(&silent, None).unwrap().to_array();
    let mut net = EstimatorNetwork::<f64>::build(cfg).unwrap();
    for s in 0..6 {
        net.step(&sparse_frame(40, 32, s), None).unwrap();
    }
    assert!(net.state().memory.as_ref().unwrap().data().iter().any(|&v| v != 0.0));
    let after = net.step(&silent, None).unwrap().to_array();
    let norm = after.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(norm > 0.0);
    let diff = after.iter().zip(fresh).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff > 1e-9, "history left no trace: {after:?} vs {fresh:?}");
}

#[test]
fn save_load_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.ckpt");
    let mut net = EstimatorNetwork::<f32>::build(NetworkConfig::tiny(Variant::VisionGyro, 40, 32, 4)).unwrap();
    net.step(&sparse_frame(40, 32, 1), Some(&[0.1, 0.0, -0.2])).unwrap();
    net.save(&path).unwrap();
    let back = EstimatorNetwork::<f32>::load(&path).unwrap();
    assert!(back.params == net.params);
    assert_eq!(back.config(), net.config());
    assert!(back.state().is_empty(), "hidden state must not be persisted");

    let mut bytes = std::fs::read(&path).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x20;
    let bad = dir.path().join("bad.ckpt");
    std::fs::write(&bad, &bytes).unwrap();
    assert!(matches!(EstimatorNetwork::<f32>::load(&bad), Err(Error::Checksum(_))));

    assert!(EstimatorNetwork::<f32>::load_as(&path, NetworkConfig::tiny(Variant::Vision, 40, 32, 4)).is_err());
    assert!(EstimatorNetwork::<f32>::load_as(&path, NetworkConfig::tiny(Variant::VisionFF, 40, 32, 4)).is_err());
    let mut wider = NetworkConfig::tiny(Variant::VisionGyro, 40, 32, 4);
    wider.memory_channels += 1;
    assert!(EstimatorNetwork::<f32>::load_as(&path, wider).is_err());
}

#[test]
fn shifted_input_shifts_features() {
    let (w, h) = (160, 128);
    for variant in [Variant::Vision, Variant::VisionFF] {
        let net = EstimatorNetwork::<f64>::build(NetworkConfig::tiny(variant, w, h, 6)).unwrap();
        let base = random_input(w, h, 42);
        let shifted = Tensor::new(&[2, h, w], {
            let mut d = vec![0.0; 2 * w * h];
            for c in 0..2 {
                for y in 0..h {
                    for x in 8..w {
                        d[(c * h + y) * w + x] = base.data()[(c * h + y) * w + x - 8];
                    }
                }
            }
            d
        })
        .unwrap();
        let features = |input: &Tensor<f64>| {
            let mut tape = Tape::inference(&net.params);
            let x = tape.input(input.clone());
            let sv = net.state_vars(&mut tape, &NetworkState::default());
            let out = net.forward(&mut tape, x, None, &sv).unwrap();
            tape.value(out.features).clone()
        };
        let (a, b) = (features(&base), features(&shifted));
        let shape = a.shape().to_vec();
        let (ch, fh, fw) = (shape[0], shape[1], shape[2]);
        assert_eq!((fw, fh), (w / 8, h / 8));
        let margin = 7;
        let mut compared = 0;
        for c in 0..ch {
            for y in margin..fh - margin {
                for x in margin..fw - margin {
                    let va = a.data()[(c * fh + y) * fw + x];
                    let vb = b.data()[(c * fh + y) * fw + x + 1];
                    assert!((va - vb).abs() < 1e-12, "{variant} c{c} ({x},{y}): {va} vs {vb}");
                    compared += 1;
                }
            }
        }
        assert!(compared >= ch * 10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn feed_forward_ignores_input_order(order in proptest::collection::vec(0usize..4, 1..12)) {
        let pool: Vec<EventFrame> = (0..4).map(|s| sparse_frame(24, 16, s)).collect();
        let cfg = NetworkConfig::tiny(Variant::VisionFF, 24, 16, 8);
        let reference: Vec<[f64; 4]> = pool
            .iter()
            .map(|f| EstimatorNetwork::<f32>::build(cfg.clone()).unwrap().step(f, None).unwrap().to_array())
            .collect();
        let mut net = EstimatorNetwork::<f32>::build(cfg).unwrap();
        for &i in &order {
            prop_assert_eq!(net.step(&pool[i], None).unwrap().to_array(), reference[i]);
        }
        prop_assert!(net.state().is_empty());
    }
}
