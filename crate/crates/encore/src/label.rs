//! Genre labels shared by the corpus, the motion container, and the
//! classifier head.

use crate::error::{Error, Result};

pub const N_GENRES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GenreLabel {
    Pop,
    Ballet,
    Latin,
    House,
}

pub const ALL_GENRES: [GenreLabel; N_GENRES] = [
    GenreLabel::Pop,
    GenreLabel::Ballet,
    GenreLabel::Latin,
    GenreLabel::House,
];

impl GenreLabel {
    pub fn index(self) -> usize {
        match self {
            GenreLabel::Pop => 0,
            GenreLabel::Ballet => 1,
            GenreLabel::Latin => 2,
            GenreLabel::House => 3,
        }
    }

    pub fn from_index(i: usize) -> Result<Self> {
        ALL_GENRES
            .get(i)
            .copied()
            .ok_or_else(|| Error::ParseError(format!("genre index {i} out of range")))
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GenreLabel::Pop => "pop",
            GenreLabel::Ballet => "ballet",
            GenreLabel::Latin => "latin",
            GenreLabel::House => "house",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "pop" => Ok(GenreLabel::Pop),
            "ballet" => Ok(GenreLabel::Ballet),
            "latin" => Ok(GenreLabel::Latin),
            "house" => Ok(GenreLabel::House),
            other => Err(Error::ParseError(format!("unknown genre {other:?}"))),
        }
    }

    pub fn one_hot(self) -> [f32; N_GENRES] {
        let mut v = [0.0; N_GENRES];
        v[self.index()] = 1.0;
        v
    }

    /// Container byte: genre index, 255 meaning absent.
    pub fn to_byte(label: Option<Self>) -> u8 {
        match label {
            Some(g) => g.index() as u8,
            None => crate::container::GENRE_NONE,
        }
    }

    pub fn from_byte(b: u8) -> Result<Option<Self>> {
        if b == crate::container::GENRE_NONE {
            Ok(None)
        } else {
            Self::from_index(b as usize).map(Some)
        }
    }
}

impl std::fmt::Display for GenreLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
