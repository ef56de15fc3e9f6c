//! Binary recursive systematic convolutional (RSC) codes and their trellises.
//!
//! A generator is written in the usual octal form `(1, g_ff/g_fb)_8`. Bit `i`
//! of each polynomial mask is the tap on register cell `i`, tap 0 being the
//! current (fed-back) input. The register contents are packed into a state
//! index with the most recent cell as the most significant bit, so that for
//! `(1,5/7)_8` the input 1 moves state 0 to state 2.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported memory. State sets are stored as `u64` bit masks.
pub const MAX_MEMORY: u32 = 6;

/// Generator specification of a rate-1/2 RSC code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RscSpec {
    pub feedback_poly: u32,
    pub feedforward_poly: u32,
    pub memory: u32,
    pub k: u32,
    pub n: u32,
}

impl RscSpec {
    /// Builds a spec from the two tap masks; the memory is the highest tap used.
    pub fn new(feedforward_poly: u32, feedback_poly: u32) -> Result<Self> {
        if feedback_poly & 1 == 0 {
            return Err(Error::InvalidGenerator(format!(
                "feedback polynomial {feedback_poly:o} must have tap 0 set"
            )));
        }
        if feedforward_poly == 0 {
            return Err(Error::InvalidGenerator("feedforward polynomial is zero".into()));
        }
        let highest = |m: u32| 31 - m.leading_zeros();
        let memory = highest(feedback_poly).max(highest(feedforward_poly));
        let spec = Self { feedback_poly, feedforward_poly, memory, k: 1, n: 2 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k != 1 || self.n != 2 {
            return Err(Error::InvalidGenerator(format!(
                "only rate 1/2 constituents are supported (got k={}, n={})",
                self.k, self.n
            )));
        }
        if self.memory == 0 || self.memory > MAX_MEMORY {
            return Err(Error::InvalidGenerator(format!(
                "memory {} outside 1..={MAX_MEMORY}",
                self.memory
            )));
        }
        let limit = 1u32 << (self.memory + 1);
        if self.feedback_poly >= limit || self.feedforward_poly >= limit {
            return Err(Error::InvalidGenerator(format!(
                "tap above memory {} in ({:o}/{:o})",
                self.memory, self.feedforward_poly, self.feedback_poly
            )));
        }
        if self.feedback_poly & 1 == 0 {
            return Err(Error::InvalidGenerator(format!(
                "feedback polynomial {:o} must have tap 0 set",
                self.feedback_poly
            )));
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        1 << self.memory
    }

    pub fn constraint_length(&self) -> u32 {
        self.memory + 1
    }

    /// Mother-code rate before puncturing.
    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }
}

impl fmt::Display for RscSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "1,{:o}/{:o}", self.feedforward_poly, self.feedback_poly)
    }
}

impl FromStr for RscSpec {
    type Err = Error;

    /// Accepts `1,5/7`, `(1,5/7)` and `(1,5/7)_8`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidGenerator(format!("cannot parse '{s}', expected e.g. 1,5/7"));
        let body = s.trim();
        let body = body.strip_suffix("_8").unwrap_or(body);
        let body = body.trim_start_matches('(').trim_end_matches(')');
        let (sys, rest) = body.split_once(',').ok_or_else(bad)?;
        if sys.trim() != "1" {
            return Err(bad());
        }
        let (ff, fb) = rest.split_once('/').ok_or_else(bad)?;
        let ff = u32::from_str_radix(ff.trim(), 8).map_err(|_| bad())?;
        let fb = u32::from_str_radix(fb.trim(), 8).map_err(|_| bad())?;
        RscSpec::new(ff, fb)
    }
}

/// One trellis branch: from `from` with information bit `input` to `to`,
/// emitting `parity`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub input: u8,
    pub parity: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trellis {
    spec: RscSpec,
    num_states: usize,
    /// Indexed by `2 * state + input`.
    edges: Vec<Edge>,
    /// For each state, the indices (into `edges`) of its two incoming edges.
    incoming: Vec<[usize; 2]>,
}

impl Trellis {
    pub fn new(spec: RscSpec) -> Result<Self> {
        spec.validate()?;
        let nu = spec.memory;
        let num_states = spec.num_states();
        // Register cell i (1..=nu) of state s.
        let cell = |s: usize, i: u32| ((s >> (nu - i)) & 1) as u32;
        let tap = |poly: u32, i: u32| (poly >> i) & 1;

        let mut edges = Vec::with_capacity(2 * num_states);
        for from in 0..num_states {
            for input in 0..2u32 {
                let mut fed = input;
                for i in 1..=nu {
                    fed ^= tap(spec.feedback_poly, i) & cell(from, i);
                }
                let mut parity = tap(spec.feedforward_poly, 0) & fed;
                for i in 1..=nu {
                    parity ^= tap(spec.feedforward_poly, i) & cell(from, i);
                }
                let to = ((fed as usize) << (nu - 1)) | (from >> 1);
                edges.push(Edge { from, to, input: input as u8, parity: parity as u8 });
            }
        }

        let mut incoming = vec![Vec::with_capacity(2); num_states];
        for (idx, e) in edges.iter().enumerate() {
            incoming[e.to].push(idx);
        }
        let incoming = incoming
            .into_iter()
            .enumerate()
            .map(|(s, v)| {
                <[usize; 2]>::try_from(v).map_err(|v| {
                    Error::Internal(format!("state {s} has {} incoming edges", v.len()))
                })
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(Self { spec, num_states, edges, incoming })
    }

    pub fn spec(&self) -> &RscSpec {
        &self.spec
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn memory(&self) -> u32 {
        self.spec.memory
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    #[inline]
    pub fn edge(&self, state: usize, input: u8) -> &Edge {
        &self.edges[2 * state + (input & 1) as usize]
    }

    pub fn incoming(&self, state: usize) -> [&Edge; 2] {
        let [a, b] = self.incoming[state];
        [&self.edges[a], &self.edges[b]]
    }

    /// Encodes `info` starting from `start_state` and returns the parity bits.
    /// The trellis is left unterminated.
    pub fn encode(&self, info: &[u8], start_state: usize) -> Result<Vec<u8>> {
        if start_state >= self.num_states {
            return Err(Error::InvalidParameter(format!(
                "start state {start_state} out of range for {} states",
                self.num_states
            )));
        }
        let mut state = start_state;
        Ok(info
            .iter()
            .map(|&b| {
                let e = self.edge(state, b);
                state = e.to;
                e.parity
            })
            .collect())
    }
}
