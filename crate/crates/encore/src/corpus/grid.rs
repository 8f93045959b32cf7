use crate::error::{Error, Result};

/// Beat times in seconds, strictly increasing, starting at or after zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BeatGrid {
    times: Vec<f64>,
}

impl BeatGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if let Some(&first) = times.first() {
            if first < 0.0 {
                return Err(Error::SpecInvalid(format!("beat time {first} < 0")));
            }
        }
        for w in times.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::SpecInvalid(format!(
                    "beat times not strictly increasing: {} then {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(BeatGrid { times })
    }

    pub fn empty() -> Self {
        BeatGrid { times: Vec::new() }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}
