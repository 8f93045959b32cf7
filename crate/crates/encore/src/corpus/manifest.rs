use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::label::GenreLabel;

/// One corpus pair: `stem.encm` (motion) and `stem.encf` (music features),
/// with stems stored relative to the manifest file.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub stem: String,
    pub genre: GenreLabel,
    pub tempo_bpm: f64,
    pub seed: u64,
}

impl ManifestEntry {
    pub fn motion_path(&self, manifest_dir: &Path) -> PathBuf {
        manifest_dir.join(format!("{}.encm", self.stem))
    }

    pub fn features_path(&self, manifest_dir: &Path) -> PathBuf {
        manifest_dir.join(format!("{}.encf", self.stem))
    }
}

/// Line-oriented records: `stem<TAB>genre<TAB>tempo_bpm<TAB>seed`.
pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut out = String::new();
    for e in entries {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            e.stem, e.genre, e.tempo_bpm, e.seed
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path)?;
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 4 {
            return Err(Error::FormatInvalid(format!(
                "{}:{}: expected 4 tab-separated fields, got {}",
                path.display(),
                lineno + 1,
                parts.len()
            )));
        }
        let bad = |what: &str| {
            Error::FormatInvalid(format!("{}:{}: bad {what}", path.display(), lineno + 1))
        };
        entries.push(ManifestEntry {
            stem: parts[0].to_string(),
            genre: GenreLabel::parse(parts[1]).map_err(|_| bad("genre"))?,
            tempo_bpm: parts[2].parse().map_err(|_| bad("tempo"))?,
            seed: parts[3].parse().map_err(|_| bad("seed"))?,
        });
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("manifest.tsv");
        let entries = vec![
            ManifestEntry {
                stem: "pair_00000".into(),
                genre: GenreLabel::Pop,
                tempo_bpm: 120.0,
                seed: 42,
            },
            ManifestEntry {
                stem: "pair_00001".into(),
                genre: GenreLabel::House,
                tempo_bpm: 93.5,
                seed: 707,
            },
        ];
        write_manifest(&p, &entries).unwrap();
        assert_eq!(read_manifest(&p).unwrap(), entries);
    }

    #[test]
    fn malformed_line_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("manifest.tsv");
        std::fs::write(&p, "a\tpop\t120\n").unwrap();
        assert!(matches!(read_manifest(&p), Err(Error::FormatInvalid(_))));
        std::fs::write(&p, "a\twaltz\t120\t9\n").unwrap();
        assert!(matches!(read_manifest(&p), Err(Error::FormatInvalid(_))));
    }

    #[test]
    fn paths_resolve_relative_to_manifest_dir() {
        let e = ManifestEntry {
            stem: "x/pair".into(),
            genre: GenreLabel::Latin,
            tempo_bpm: 100.0,
            seed: 1,
        };
        assert_eq!(
            e.motion_path(Path::new("/data")),
            PathBuf::from("/data/x/pair.encm")
        );
        assert_eq!(
            e.features_path(Path::new("/data")),
            PathBuf::from("/data/x/pair.encf")
        );
    }
}
