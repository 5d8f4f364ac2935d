use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::eventcam::{
    accumulate_frames, apply_mask_or_crop, generate_events, read_event_file, Event, EventFileHeader, EventFileWriter,
    EventFrame, EventStats, MaskMode, PixelMask, Pose, SensorSetup, BIN_US,
};
use crate::kv::KeyValues;
use crate::simcore::{generate_excitation_trajectory, PhysicalParams, Trajectory};

pub const EVENTS_FILE: &str = "events.evf";
pub const LABELS_FILE: &str = "labels.csv";
pub const MANIFEST_FILE: &str = "manifest.txt";

const LABEL_HEADER: &str = "t_us,phi,theta,p,q,m1,m2,m3,m4,gx,gy,gz";
const LABEL_HEADER_NO_AUX: &str = "t_us,phi,theta,p,q";

/// Ground truth at the end of one 5 ms bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelRow {
    pub t_us: u64,
    /// `[φ, θ, p, q]` in rad and rad/s.
    pub target: [f64; 4],
    /// Rotor speeds, rad/s.
    pub motors: Option<[f64; 4]>,
    /// Body rates `[p, q, r]`, rad/s.
    pub gyro: Option<[f64; 3]>,
}

/// One recorded flight: events on the (masked) sensor grid, per-bin labels,
/// and the manifest it was generated from. Frames are built on demand.
#[derive(Debug, Clone)]
pub struct DatasetSequence {
    pub manifest: KeyValues,
    pub sensor: SensorSetup,
    /// Stored grid, before any crop.
    pub grid: (usize, usize),
    events: Vec<Event>,
    /// `events[bins[k]..bins[k + 1]]` fall into bin `k`.
    bins: Vec<usize>,
    pub labels: Vec<LabelRow>,
    /// Crop applied by [`DatasetSequence::frame`].
    pub crop: Option<(usize, usize)>,
}

/// Parameters of a synthetic sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSpec {
    pub seed: u64,
    pub duration_s: f64,
    pub difficulty: f64,
    pub params: PhysicalParams,
    pub sensor: SensorSetup,
}

impl SequenceSpec {
    pub fn write_kv(&self, kv: &mut KeyValues) {
        kv.set("seed", self.seed);
        kv.set("duration_s", self.duration_s);
        kv.set("difficulty", self.difficulty);
        self.params.write_kv(kv);
        self.sensor.write_kv(kv);
    }
}

fn bin_index(events: &[Event], n_bins: usize) -> Vec<usize> {
    let mut bins = Vec::with_capacity(n_bins + 1);
    let mut i = 0;
    for k in 0..=n_bins as u64 {
        while i < events.len() && events[i].t_us < k * BIN_US {
            i += 1;
        }
        bins.push(i);
    }
    bins
}

fn labels_from(traj: &Trajectory, n_bins: usize) -> Vec<LabelRow> {
    let per_bin = (BIN_US as f64 * 1e-6 / traj.dt).round() as usize;
    (0..n_bins)
        .map(|k| {
            let j = (k + 1) * per_bin;
            let s = traj.state_at(j);
            let motors = traj.samples[j - 1].motors.0;
            LabelRow { t_us: (k as u64 + 1) * BIN_US, target: [s.roll, s.pitch, s.p, s.q], motors: Some(motors), gyro: Some([s.p, s.q, s.r]) }
        })
        .collect()
}

impl DatasetSequence {
    /// Flies the seeded excitation script and records it with the sensor.
    pub fn generate(spec: &SequenceSpec) -> Result<(Self, EventStats)> {
        spec.sensor.validate()?;
        let traj = generate_excitation_trajectory(spec.seed, spec.duration_s, spec.difficulty, &spec.params)?;
        let dt_us = (traj.dt * 1e6).round() as u64;
        let poses: Vec<Pose> = (0..=traj.samples.len()).map(|j| Pose::from_state(traj.state_at(j))).collect();
        let cam = &spec.sensor.camera;
        let mask = PixelMask::new(spec.sensor.mask, cam.width, cam.height)?;
        let stream = generate_events(&poses, dt_us, cam, &spec.sensor.scene(), &spec.sensor.events, mask)?;
        let n_bins = traj.samples.len() * dt_us as usize / BIN_US as usize;
        let mut manifest = KeyValues::new();
        spec.write_kv(&mut manifest);
        manifest.set("frames", n_bins);
        let seq = Self {
            manifest,
            sensor: spec.sensor.clone(),
            grid: (stream.width, stream.height),
            bins: bin_index(&stream.events, n_bins),
            events: stream.events,
            labels: labels_from(&traj, n_bins),
            crop: spec.sensor.crop,
        };
        Ok((seq, stream.stats))
    }

    /// Assembles a sequence from a time-sorted stream on a `grid` and one
    /// label per 5 ms bin.
    pub fn from_parts(sensor: SensorSetup, grid: (usize, usize), events: Vec<Event>, labels: Vec<LabelRow>) -> Result<Self> {
        if events.windows(2).any(|w| w[1].t_us < w[0].t_us) {
            return Err(Error::Domain("events not time-sorted".into()));
        }
        let mut manifest = KeyValues::new();
        sensor.write_kv(&mut manifest);
        manifest.set("frames", labels.len());
        Ok(Self { bins: bin_index(&events, labels.len()), manifest, sensor, grid, events, labels, crop: None })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn with_crop(mut self, crop: Option<(usize, usize)>) -> Result<Self> {
        if let Some((w, h)) = crop {
            if w > self.grid.0 || h > self.grid.1 || w == 0 || h == 0 {
                return Err(Error::Config(format!("crop {w}x{h} does not fit the {}x{} grid", self.grid.0, self.grid.1)));
            }
        }
        self.crop = crop;
        Ok(self)
    }

    /// Size of the frames this sequence yields.
    pub fn frame_size(&self) -> (usize, usize) {
        self.crop.unwrap_or(self.grid)
    }

    /// Count frame of bin `k`, cropped if a crop is set.
    pub fn frame(&self, k: usize) -> Result<EventFrame> {
        if k >= self.len() {
            return Err(Error::Domain(format!("frame {k} beyond sequence of {}", self.len())));
        }
        let ev = &self.events[self.bins[k]..self.bins[k + 1]];
        let (w, h) = self.grid;
        let batch = accumulate_frames(ev, k as u64 * BIN_US, 1, w, h, self.sensor.frame_cap)?;
        let mut frames = apply_mask_or_crop(&batch.frames, MaskMode::Full, self.crop)?;
        Ok(frames.pop().expect("one bin"))
    }

    pub fn has_motors(&self) -> bool {
        self.labels.iter().all(|l| l.motors.is_some())
    }

    pub fn has_gyro(&self) -> bool {
        self.labels.iter().all(|l| l.gyro.is_some())
    }

    pub fn labels_csv(&self) -> String {
        let full = self.has_motors() && self.has_gyro();
        let mut s = String::from(if full { LABEL_HEADER } else { LABEL_HEADER_NO_AUX });
        s.push('\n');
        for l in &self.labels {
            write!(s, "{}", l.t_us).unwrap();
            for v in l.target {
                write!(s, ",{v}").unwrap();
            }
            if full {
                for v in l.motors.unwrap().iter().chain(&l.gyro.unwrap()) {
                    write!(s, ",{v}").unwrap();
                }
            }
            s.push('\n');
        }
        s
    }

    /// Writes the container into `dir`, which must not exist yet.
    pub fn save(&self, dir: &Path) -> Result<()> {
        if dir.exists() {
            return Err(Error::Config(format!("{} already exists; refusing to overwrite", dir.display())));
        }
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let header = EventFileHeader { width: self.grid.0 as u16, height: self.grid.1 as u16, mask: self.sensor.mask };
        let mut w = EventFileWriter::create(&dir.join(EVENTS_FILE), header)?;
        w.write(&self.events)?;
        w.finish()?;
        let labels = dir.join(LABELS_FILE);
        std::fs::write(&labels, self.labels_csv()).map_err(|e| Error::io(labels, e))?;
        self.manifest.save(&dir.join(MANIFEST_FILE))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest = KeyValues::load(&dir.join(MANIFEST_FILE))?;
        let sensor = SensorSetup::from_kv(&manifest)?;
        let (header, events) = read_event_file(&dir.join(EVENTS_FILE))?;
        if header.mask != sensor.mask {
            return Err(Error::format("dataset", "event file mask differs from manifest"));
        }
        let path = dir.join(LABELS_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let labels = parse_labels(&text)?;
        if labels.is_empty() {
            return Err(Error::format("dataset", format!("{} has no label rows", path.display())));
        }
        for (k, l) in labels.iter().enumerate() {
            if l.t_us != (k as u64 + 1) * BIN_US {
                return Err(Error::format("dataset", format!("label {k} at {} us breaks the 5 ms grid", l.t_us)));
            }
        }
        let grid = (header.width as usize, header.height as usize);
        let crop = sensor.crop;
        Ok(Self { bins: bin_index(&events, labels.len()), manifest, sensor, grid, events, labels, crop })
    }
}

fn parse_labels(text: &str) -> Result<Vec<LabelRow>> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default().trim();
    let full = match header {
        LABEL_HEADER => true,
        LABEL_HEADER_NO_AUX => false,
        _ => return Err(Error::format("labels", format!("unexpected header {header:?}"))),
    };
    let mut out = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = || Error::format("labels", format!("line {}", i + 2));
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != if full { 12 } else { 5 } {
            return Err(bad());
        }
        let t_us = cells[0].trim().parse().map_err(|_| bad())?;
        let v: Vec<f64> = cells[1..].iter().map(|c| c.trim().parse()).collect::<Result<_, _>>().map_err(|_| bad())?;
        out.push(LabelRow {
            t_us,
            target: [v[0], v[1], v[2], v[3]],
            motors: full.then(|| [v[4], v[5], v[6], v[7]]),
            gyro: full.then(|| [v[8], v[9], v[10]]),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eventcam::{CameraModel, Projection};

    pub(crate) fn small_spec(seed: u64, secs: f64) -> SequenceSpec {
        SequenceSpec {
            seed,
            duration_s: secs,
            difficulty: 1.0,
            params: PhysicalParams::default(),
            sensor: SensorSetup {
                camera: CameraModel::new(Projection::Equidistant, 48, 40, 140.0).unwrap(),
                mask: MaskMode::Full,
                ..Default::default()
            },
        }
    }

    #[test]
    fn two_hundred_labels_per_second_and_round_trip() {
        let (seq, stats) = DatasetSequence::generate(&small_spec(1, 1.0)).unwrap();
        assert_eq!(seq.len(), 200);
        assert_eq!(seq.labels[0].t_us, 5000);
        assert!(stats.emitted > 0);
        let total: u64 = (0..seq.len()).map(|k| seq.frame(k).unwrap().total()).sum();
        assert_eq!(total, seq.events().len() as u64);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seq");
        seq.save(&path).unwrap();
        assert!(seq.save(&path).is_err());
        let back = DatasetSequence::load(&path).unwrap();
        assert_eq!(back.labels, seq.labels);
        assert_eq!(back.events(), seq.events());
        assert_eq!(back.frame(37).unwrap(), seq.frame(37).unwrap());
    }

    #[test]
    fn labels_without_aux_columns_parse() {
        let rows = parse_labels("t_us,phi,theta,p,q\n5000,0.1,0,0,0\n").unwrap();
        assert_eq!(rows[0].target[0], 0.1);
        assert!(rows[0].gyro.is_none());
        assert!(parse_labels("t,phi\n").is_err());
    }
}
