use std::path::PathBuf;

use clap::Args;
use noimu::autodiff::{AdamState, Checkpoint};
use noimu::estimator::{EstimatorNetwork, NetworkConfig, Variant};
use noimu::kv::KeyValues;
use noimu::trainer::{check_compatible, train_epoch, DatasetSequence, EpochMetrics, TrainConfig, LOSS_CURVE_HEADER};
use noimu::{Error, Result};

use super::load_sequences;
use crate::run_dir::RunDir;
use crate::settings::Settings;

pub const CHECKPOINT: &str = "checkpoint.ckpt";

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Dataset sequences or `gen-data` run directories.
    #[arg(required = true)]
    pub datasets: Vec<PathBuf>,
    /// Continue from a checkpoint written by an earlier `train`.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Number of epochs (config key `epochs`).
    #[arg(long)]
    pub epochs: Option<usize>,
}

/// Loss history kept inside the checkpoint so a resumed run continues it.
fn history_from(state: &KeyValues) -> Result<Vec<EpochMetrics>> {
    let losses = state.list::<f64>("losses")?.unwrap_or_default();
    let steps = state.list::<usize>("steps")?.unwrap_or_default();
    if losses.len() != steps.len() {
        return Err(Error::format("checkpoint", "loss history columns differ in length"));
    }
    Ok(losses
        .into_iter()
        .zip(steps)
        .enumerate()
        .map(|(i, (mean_loss, optimizer_steps))| EpochMetrics { epoch: i + 1, mean_loss, optimizer_steps })
        .collect())
}

fn history_kv(history: &[EpochMetrics]) -> KeyValues {
    let mut kv = KeyValues::new();
    kv.set("epochs_done", history.len());
    let join = |f: &dyn Fn(&EpochMetrics) -> String| history.iter().map(f).collect::<Vec<_>>().join(",");
    kv.set("losses", join(&|m| m.mean_loss.to_string()));
    kv.set("steps", join(&|m| m.optimizer_steps.to_string()));
    kv
}

fn network_config(settings: &Settings, seqs: &[DatasetSequence]) -> Result<NetworkConfig> {
    let (w, h) = seqs[0].frame_size();
    if let Some(s) = seqs.iter().find(|s| s.frame_size() != (w, h)) {
        let (w2, h2) = s.frame_size();
        return Err(Error::Config(format!("datasets mix frame sizes {w}x{h} and {w2}x{h2}")));
    }
    let mut kv = settings.kv.clone();
    if !kv.contains("variant") {
        kv.set("variant", Variant::Vision);
    }
    kv.set("width", w);
    kv.set("height", h);
    NetworkConfig::from_kv(&kv)
}

pub fn run(settings: &Settings, args: &TrainArgs) -> Result<()> {
    let mut settings = settings.clone();
    if let Some(e) = args.epochs {
        settings.kv.set("epochs", e);
    }
    let named = load_sequences(&args.datasets, &settings)?;
    let seqs: Vec<DatasetSequence> = named.into_iter().map(|n| n.sequence).collect();
    let cfg = TrainConfig::from_kv(&settings.kv)?;

    let (mut net, mut adam, mut history) = match &args.resume {
        Some(path) => {
            let ckpt = Checkpoint::load(path)?;
            let net = EstimatorNetwork::<f32>::from_checkpoint(&ckpt)?;
            if let Some(v) = settings.kv.parse_opt::<Variant>("variant")? {
                if v != net.variant() {
                    return Err(Error::Config(format!("checkpoint holds {}, not {v}", net.variant())));
                }
            }
            let (adam, state) = ckpt
                .restore_optimizer(&net.params)?
                .ok_or_else(|| Error::Config(format!("{} has no optimizer state to resume", path.display())))?;
            (net, adam, history_from(&state)?)
        }
        None => {
            let net = EstimatorNetwork::<f32>::build(network_config(&settings, &seqs)?)?;
            let adam = AdamState::new(&net.params);
            (net, adam, Vec::new())
        }
    };
    check_compatible(&net, &seqs)?;
    for (k, v) in net.config().to_kv().iter() {
        if k != "seed" {
            settings.kv.set(k, v);
        }
    }

    let inputs: Vec<&std::path::Path> = args.datasets.iter().map(PathBuf::as_path).chain(args.resume.as_deref()).collect();
    let mut run = RunDir::create(&settings, "train", &inputs)?;
    run.note("parameters", net.param_count());
    let first = history.len() + 1;
    for epoch in first..first + cfg.epochs {
        match train_epoch(&mut net, &mut adam, &seqs, &cfg, epoch) {
            Ok(m) => {
                eprintln!("epoch {epoch}: loss {:.5} ({} steps)", m.mean_loss, m.optimizer_steps);
                history.push(m);
            }
            Err(e) => {
                let diag = format!("failed_epoch = {epoch}\nerror = {e}\n{}", history_kv(&history));
                run.write("diagnostics.txt", diag)?;
                run.finish()?;
                return Err(e);
            }
        }
    }
    let mut curve = format!("{LOSS_CURVE_HEADER}\n");
    for m in &history {
        curve.push_str(&m.csv_row());
        curve.push('\n');
    }
    run.write("loss_curve.csv", curve)?;
    let ckpt = net.checkpoint().with_optimizer(&adam, history_kv(&history));
    ckpt.save(&run.output(CHECKPOINT))?;
    run.note("epochs_done", history.len());
    run.finish()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn history_round_trip() {
        let h = vec![
            EpochMetrics { epoch: 1, mean_loss: 2.5, optimizer_steps: 10 },
            EpochMetrics { epoch: 2, mean_loss: 0.125, optimizer_steps: 10 },
        ];
        assert_eq!(history_from(&history_kv(&h)).unwrap(), h);
        assert!(history_from(&KeyValues::new()).unwrap().is_empty());
    }
}
