pub mod delay;
pub mod ekf;
pub mod eval;
pub mod fly;
pub mod gen_data;
pub mod train;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use noimu::trainer::{DatasetSequence, EVENTS_FILE};
use noimu::{Error, Result};

use crate::settings::Settings;

/// A loaded sequence and the name it is reported under.
pub struct NamedSequence {
    pub label: String,
    pub sequence: DatasetSequence,
}

/// Directories holding a sequence: `dir` itself, or its sequence
/// subdirectories in name order when `dir` is a `gen-data` run.
fn sequence_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    if dir.join(EVENTS_FILE).is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut subdirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(EVENTS_FILE).is_file())
        .collect();
    subdirs.sort();
    if subdirs.is_empty() {
        return Err(Error::Config(format!("{} contains no dataset sequence", dir.display())));
    }
    Ok(subdirs)
}

fn label_of(path: &Path) -> String {
    let name = |p: &Path| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    match path.parent().filter(|p| !p.as_os_str().is_empty()) {
        Some(parent) if !parent.join(EVENTS_FILE).exists() && !name(parent).is_empty() => {
            format!("{}/{}", name(parent), name(path))
        }
        _ => name(path),
    }
    .replace(',', "_")
}

/// Loads every sequence under `dirs`, applying a crop from the settings.
pub fn load_sequences(dirs: &[PathBuf], settings: &Settings) -> Result<Vec<NamedSequence>> {
    if dirs.is_empty() {
        return Err(Error::Config("no dataset directories given".into()));
    }
    let crop = settings.crop()?;
    let mut out = Vec::new();
    for dir in dirs {
        for d in sequence_dirs(dir)? {
            let mut sequence = DatasetSequence::load(&d)?;
            if sequence.is_empty() {
                return Err(Error::Config(format!("{} has no frames", d.display())));
            }
            if let Some(c) = crop {
                sequence = sequence.with_crop(c)?;
            }
            out.push(NamedSequence { label: label_of(&d), sequence });
        }
    }
    Ok(out)
}

/// Value at quantile `q` of `values` (nearest rank); NaN when empty.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

/// CSV of per-tick predictions and truth, in degrees and deg/s.
pub fn predictions_csv(pred: &[[f64; 4]], truth: &[[f64; 4]]) -> String {
    let mut s = String::from("t_us,phi,theta,p,q,phi_true,theta_true,p_true,q_true\n");
    for (k, (p, t)) in pred.iter().zip(truth).enumerate() {
        write!(s, "{}", (k as u64 + 1) * noimu::eventcam::BIN_US).unwrap();
        for v in p.iter().chain(t) {
            write!(s, ",{v}").unwrap();
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_percentiles() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.5), 5.0);
        assert_eq!(percentile(&v, 0.9), 9.0);
        assert_eq!(percentile(&v, 1.0), 10.0);
        assert!(percentile(&[], 0.5).is_nan());
    }

    #[test]
    fn labels_include_the_run_name() {
        assert_eq!(label_of(Path::new("/tmp/data/seq_0003")), "data/seq_0003");
        assert_eq!(label_of(Path::new("seq")), "seq");
    }
}
