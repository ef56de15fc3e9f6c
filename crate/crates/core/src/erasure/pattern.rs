use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Periodic puncturing pattern over the parity stream. A `0` at position `g`
/// means the parity bit of every trellis step `n` with `n mod period == g` is
/// not transmitted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct PuncturePattern(Vec<u8>);

impl PuncturePattern {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::InvalidPattern("pattern must have period >= 1".into()));
        }
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::InvalidPattern(format!("pattern entries must be 0 or 1, got {b}")));
        }
        Ok(Self(bits))
    }

    pub fn unpunctured(period: usize) -> Self {
        Self(vec![1; period.max(1)])
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn period(&self) -> usize {
        self.0.len()
    }

    /// Number of transmitted positions per period.
    pub fn weight(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    pub fn puncture_fraction(&self) -> f64 {
        1.0 - self.weight() as f64 / self.period() as f64
    }

    pub fn is_unpunctured(&self) -> bool {
        self.0.iter().all(|&b| b == 1)
    }

    #[inline]
    pub fn transmits(&self, step: usize) -> bool {
        self.0[step % self.0.len()] == 1
    }

    /// Number of transmitted parity bits over `steps` trellis steps.
    pub fn transmitted_count(&self, steps: usize) -> usize {
        let full = steps / self.period() * self.weight();
        full + self.0[..steps % self.period()].iter().filter(|&&b| b == 1).count()
    }

    /// Cyclic rotation left by `k` positions.
    pub fn rotated(&self, k: usize) -> Self {
        let mut v = self.0.clone();
        let k = k % v.len();
        v.rotate_left(k);
        Self(v)
    }
}

impl TryFrom<Vec<u8>> for PuncturePattern {
    type Error = Error;

    fn try_from(v: Vec<u8>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<PuncturePattern> for Vec<u8> {
    fn from(p: PuncturePattern) -> Vec<u8> {
        p.0
    }
}

impl fmt::Display for PuncturePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.0.iter().map(|b| b.to_string()).collect();
        write!(f, "{}", s.join(","))
    }
}

impl FromStr for PuncturePattern {
    type Err = Error;

    /// Accepts `1,0,0`, `[1,0,0]` or `100`.
    fn from_str(s: &str) -> Result<Self> {
        let body = s.trim().trim_start_matches('[').trim_end_matches(']');
        let bits = if body.contains(',') {
            body.split(',')
                .map(|t| t.trim().parse::<u8>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::InvalidPattern(format!("cannot parse '{s}'")))?
        } else {
            body.chars()
                .map(|c| c.to_digit(2).map(|d| d as u8))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::InvalidPattern(format!("cannot parse '{s}'")))?
        };
        Self::new(bits)
    }
}
