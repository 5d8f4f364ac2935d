use std::fmt::Write as _;

use clap::Args;
use noimu::eventcam::SensorSetup;
use noimu::simcore::PhysicalParams;
use noimu::trainer::{DatasetSequence, SequenceSpec};
use noimu::Result;

use crate::run_dir::RunDir;
use crate::settings::Settings;

#[derive(Debug, Clone, Args)]
pub struct GenDataArgs {
    /// Trajectory seeds, one sequence each; defaults to `sequence_seeds` in
    /// the config, then to `--seed`.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Sequence length in seconds (config key `duration_s`, default 10).
    #[arg(long)]
    pub duration: Option<f64>,
}

pub fn run(settings: &Settings, args: &GenDataArgs) -> Result<()> {
    let mut settings = settings.clone();
    if let Some(d) = args.duration {
        settings.kv.set("duration_s", d);
    }
    if !args.seeds.is_empty() {
        let list: Vec<String> = args.seeds.iter().map(u64::to_string).collect();
        settings.kv.set("sequence_seeds", list.join(","));
    }
    let kv = &settings.kv;
    let seeds = kv.list::<u64>("sequence_seeds")?.unwrap_or(vec![settings.seed()?]);
    let duration_s = kv.parse_or("duration_s", 10.0)?;
    let difficulty = kv.parse_or("difficulty", 1.0)?;
    let params = PhysicalParams::from_kv(kv)?;
    let sensor = SensorSetup::from_kv(kv)?;

    let mut run = RunDir::create(&settings, "gen-data", &[])?;
    let result = (|| -> Result<String> {
        let mut stats = String::from("sequence,frames,raw_crossings,refractory_suppressed,overflow_dropped,noise_events,emitted\n");
        for &seed in &seeds {
            let spec = SequenceSpec { seed, duration_s, difficulty, params: params.clone(), sensor: sensor.clone() };
            let (seq, st) = DatasetSequence::generate(&spec)?;
            let name = format!("seq_{seed:04}");
            seq.save(&run.output(&name))?;
            eprintln!("{name}: {} frames, {} events", seq.len(), st.emitted);
            writeln!(
                stats,
                "{name},{},{},{},{},{},{}",
                seq.len(),
                st.raw_crossings,
                st.refractory_suppressed,
                st.overflow_dropped,
                st.noise_events,
                st.emitted
            )
            .unwrap();
        }
        Ok(stats)
    })();
    match result {
        Ok(stats) => {
            run.write("event_stats.csv", stats)?;
            run.note("sequences", seeds.len());
            run.finish()?;
            Ok(())
        }
        Err(e) => {
            run.discard();
            Err(e)
        }
    }
}
