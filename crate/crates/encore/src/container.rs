//! Binary container for frame-aligned float data.
//!
//! Both motion files (magic `ENCM1`) and music feature files (magic `ENCF1`)
//! use the same layout:
//!
//! ```text
//! magic   5 bytes  b"ENCM1" | b"ENCF1"
//! fps     f64 LE
//! t       u32 LE   number of frames
//! width   u32 LE   values per frame
//! genre   u8       genre index, 255 = none
//! data    t*width f32 LE, row-major
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC_MOTION: [u8; 5] = *b"ENCM1";
pub const MAGIC_FEATURES: [u8; 5] = *b"ENCF1";
pub const GENRE_NONE: u8 = 255;

/// Raw decoded container: header fields plus the flat row-major payload.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub fps: f64,
    pub t: usize,
    pub width: usize,
    pub genre: u8,
    pub data: Vec<f32>,
}

impl Container {
    pub fn new(fps: f64, t: usize, width: usize, genre: u8, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), t * width, "payload must be t*width values");
        Container {
            fps,
            t,
            width,
            genre,
            data,
        }
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.width..(i + 1) * self.width]
    }
}

pub fn write(path: &Path, magic: &[u8; 5], c: &Container) -> Result<()> {
    let mut buf = Vec::with_capacity(5 + 8 + 4 + 4 + 1 + c.data.len() * 4);
    buf.extend_from_slice(magic);
    buf.extend_from_slice(&c.fps.to_le_bytes());
    buf.extend_from_slice(&(c.t as u32).to_le_bytes());
    buf.extend_from_slice(&(c.width as u32).to_le_bytes());
    buf.push(c.genre);
    for v in &c.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn read(path: &Path, magic: &[u8; 5]) -> Result<Container> {
    let mut f = std::fs::File::open(path)?;
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes)?;
    parse(&bytes, magic).map_err(|e| match e {
        Error::FormatInvalid(msg) => Error::FormatInvalid(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse(bytes: &[u8], magic: &[u8; 5]) -> Result<Container> {
    const HEADER: usize = 5 + 8 + 4 + 4 + 1;
    if bytes.len() < HEADER {
        return Err(Error::FormatInvalid("truncated header".into()));
    }
    if &bytes[0..5] != magic {
        return Err(Error::FormatInvalid(format!(
            "bad magic {:?}, expected {:?}",
            &bytes[0..5],
            magic
        )));
    }
    let fps = f64::from_le_bytes(bytes[5..13].try_into().unwrap());
    let t = u32::from_le_bytes(bytes[13..17].try_into().unwrap()) as usize;
    let width = u32::from_le_bytes(bytes[17..21].try_into().unwrap()) as usize;
    let genre = bytes[21];
    if !fps.is_finite() || fps <= 0.0 {
        return Err(Error::FormatInvalid(format!("bad fps {fps}")));
    }
    let need = t
        .checked_mul(width)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::FormatInvalid("size overflow".into()))?;
    let payload = &bytes[HEADER..];
    if payload.len() != need {
        return Err(Error::FormatInvalid(format!(
            "payload {} bytes, expected {need}",
            payload.len()
        )));
    }
    let mut data = Vec::with_capacity(t * width);
    for chunk in payload.chunks_exact(4) {
        data.push(f32::from_le_bytes(chunk.try_into().unwrap()));
    }
    Ok(Container {
        fps,
        t,
        width,
        genre,
        data,
    })
}

/// Lossless text form: one frame per line, values space-separated. Rust's
/// shortest round-trip float formatting keeps this exact for diffing.
pub fn to_text(c: &Container) -> String {
    let mut out = String::new();
    for i in 0..c.t {
        let row = c.row(i);
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                out.push(' ');
            }
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Container {
        Container::new(20.0, 3, 4, 2, (0..12).map(|i| i as f32 * 0.5 - 1.7).collect())
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.encm");
        let c = sample();
        write(&p, &MAGIC_MOTION, &c).unwrap();
        let back = read(&p, &MAGIC_MOTION).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn truncated_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.encf");
        let c = sample();
        write(&p, &MAGIC_FEATURES, &c).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes.truncate(bytes.len() - 3);
        std::fs::write(&p, &bytes).unwrap();
        match read(&p, &MAGIC_FEATURES) {
            Err(Error::FormatInvalid(_)) => {}
            other => panic!("expected FORMAT_INVALID, got {other:?}"),
        }
    }

    #[test]
    fn wrong_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.encm");
        write(&p, &MAGIC_MOTION, &sample()).unwrap();
        assert!(matches!(
            read(&p, &MAGIC_FEATURES),
            Err(Error::FormatInvalid(_))
        ));
    }

    #[test]
    fn text_export_round_trips_through_parse() {
        let c = sample();
        let text = to_text(&c);
        let parsed: Vec<f32> = text
            .lines()
            .flat_map(|l| l.split(' ').map(|v| v.parse::<f32>().unwrap()))
            .collect();
        assert_eq!(parsed, c.data);
    }
}
