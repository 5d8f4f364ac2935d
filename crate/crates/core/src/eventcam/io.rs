use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::events::{Event, Polarity};
use super::mask::MaskMode;
use crate::error::{Error, Result};

pub const EVENT_FILE_MAGIC: &[u8; 4] = b"EVF1";
const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 2 + 2 + 1;
const RECORD_LEN: usize = 8 + 2 + 2 + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventFileHeader {
    pub width: u16,
    pub height: u16,
    pub mask: MaskMode,
}

/// Buffered writer of the packed little-endian event format.
pub struct EventFileWriter {
    path: PathBuf,
    out: BufWriter<File>,
    written: u64,
}

impl EventFileWriter {
    pub fn create(path: &Path, header: EventFileHeader) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let mut h = Vec::with_capacity(HEADER_LEN);
        h.extend_from_slice(EVENT_FILE_MAGIC);
        h.extend_from_slice(&VERSION.to_le_bytes());
        h.extend_from_slice(&header.width.to_le_bytes());
        h.extend_from_slice(&header.height.to_le_bytes());
        h.push(header.mask.code());
        out.write_all(&h).map_err(|e| Error::io(path, e))?;
        Ok(Self { path: path.to_path_buf(), out, written: 0 })
    }

    pub fn write(&mut self, events: &[Event]) -> Result<()> {
        let mut rec = [0u8; RECORD_LEN];
        for e in events {
            rec[..8].copy_from_slice(&e.t_us.to_le_bytes());
            rec[8..10].copy_from_slice(&e.x.to_le_bytes());
            rec[10..12].copy_from_slice(&e.y.to_le_bytes());
            rec[12] = match e.polarity {
                Polarity::On => 1,
                Polarity::Off => 0,
            };
            self.out.write_all(&rec).map_err(|err| Error::io(&self.path, err))?;
        }
        self.written += events.len() as u64;
        Ok(())
    }

    pub fn written(&self) -> u64 {
        self.written
    }

    pub fn finish(mut self) -> Result<u64> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok(self.written)
    }
}

pub fn read_event_file(path: &Path) -> Result<(EventFileHeader, Vec<Event>)> {
    let mut buf = Vec::new();
    BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?)
        .read_to_end(&mut buf)
        .map_err(|e| Error::io(path, e))?;
    if buf.len() < HEADER_LEN || &buf[..4] != EVENT_FILE_MAGIC {
        return Err(Error::format("event file", format!("{} lacks the EVF1 header", path.display())));
    }
    let version = u16::from_le_bytes([buf[4], buf[5]]);
    if version != VERSION {
        return Err(Error::format("event file", format!("unsupported version {version}")));
    }
    let header = EventFileHeader {
        width: u16::from_le_bytes([buf[6], buf[7]]),
        height: u16::from_le_bytes([buf[8], buf[9]]),
        mask: MaskMode::from_code(buf[10])?,
    };
    let body = &buf[HEADER_LEN..];
    if body.len() % RECORD_LEN != 0 {
        return Err(Error::format("event file", format!("truncated record in {}", path.display())));
    }
    let mut events = Vec::with_capacity(body.len() / RECORD_LEN);
    for r in body.chunks_exact(RECORD_LEN) {
        let e = Event {
            t_us: u64::from_le_bytes(r[..8].try_into().expect("8 bytes")),
            x: u16::from_le_bytes([r[8], r[9]]),
            y: u16::from_le_bytes([r[10], r[11]]),
            polarity: match r[12] {
                1 => Polarity::On,
                0 => Polarity::Off,
                p => return Err(Error::format("event file", format!("bad polarity byte {p}"))),
            },
        };
        if e.x >= header.width || e.y >= header.height {
            return Err(Error::format("event file", format!("event at ({}, {}) outside grid", e.x, e.y)));
        }
        events.push(e);
    }
    Ok((header, events))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.evf");
        let header = EventFileHeader { width: 320, height: 240, mask: MaskMode::Half };
        let events = vec![
            Event { t_us: 5, x: 1, y: 2, polarity: Polarity::On },
            Event { t_us: 1 << 40, x: 319, y: 239, polarity: Polarity::Off },
        ];
        let mut w = EventFileWriter::create(&p, header).unwrap();
        w.write(&events).unwrap();
        assert_eq!(w.finish().unwrap(), 2);
        assert_eq!(std::fs::metadata(&p).unwrap().len(), 11 + 2 * 13);
        let (h, e) = read_event_file(&p).unwrap();
        assert_eq!((h, e), (header, events));

        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(read_event_file(&p), Err(Error::Format { .. })));
        std::fs::write(&p, b"EVF2").unwrap();
        assert!(read_event_file(&p).is_err());
    }
}
