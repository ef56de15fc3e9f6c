//! Finite-length encoder and erasure decoders.
//!
//! Encoding repeats each information bit according to its degree (bits in
//! index order), permutes the copies with the interleaver, runs the RSC
//! encoder from state 0 over the permuted stream and drops the parity bits
//! of punctured steps. The systematic part carries each bit once.

use serde::Serialize;

use crate::density::TurboEnsemble;
use crate::erasure::PuncturePattern;
use crate::error::{Error, Result};
use crate::peg::Interleaver;
use crate::trellis::{RscSpec, Trellis};

/// Largest information length accepted by the exhaustive decoder.
pub const EXHAUSTIVE_MAX_BITS: usize = 20;

/// Default iteration cap of the peeling decoder.
pub const DEFAULT_MAX_ITERATIONS: usize = 200;

/// A turbo code of fixed length: constituent trellis, bit degrees,
/// interleaver and puncturing.
#[derive(Debug, Clone)]
pub struct TurboCode {
    trellis: Trellis,
    degrees: Vec<usize>,
    interleaver: Interleaver,
    pattern: PuncturePattern,
    /// Information bit feeding each trellis step.
    step_bit: Vec<usize>,
    /// Trellis steps whose parity is transmitted, in order.
    parity_steps: Vec<usize>,
}

impl TurboCode {
    pub fn new(spec: RscSpec, degrees: Vec<usize>, interleaver: Interleaver, pattern: PuncturePattern) -> Result<Self> {
        let trellis = Trellis::new(spec)?;
        let copies: usize = degrees.iter().sum();
        if copies != interleaver.len() {
            return Err(Error::SizeMismatch(format!(
                "{copies} bit copies but the interleaver has size {}",
                interleaver.len()
            )));
        }
        if degrees.is_empty() || degrees.contains(&0) {
            return Err(Error::InvalidParameter("every information bit needs degree >= 1".into()));
        }
        let mut step_bit = vec![0; copies];
        let mut m = 0;
        for (b, &d) in degrees.iter().enumerate() {
            for _ in 0..d {
                step_bit[interleaver.as_slice()[m]] = b;
                m += 1;
            }
        }
        let parity_steps = (0..copies).filter(|&j| pattern.transmits(j)).collect();
        Ok(Self { trellis, degrees, interleaver, pattern, step_bit, parity_steps })
    }

    pub fn from_ensemble(ensemble: &TurboEnsemble, interleaver: Interleaver) -> Result<Self> {
        if ensemble.interleaver_len != interleaver.len() {
            return Err(Error::SizeMismatch(format!(
                "ensemble needs an interleaver of size {}, got {}",
                ensemble.interleaver_len,
                interleaver.len()
            )));
        }
        Self::new(ensemble.constituent, ensemble.bit_degrees(), interleaver, ensemble.pattern.clone())
    }

    pub fn trellis(&self) -> &Trellis {
        &self.trellis
    }

    pub fn info_len(&self) -> usize {
        self.degrees.len()
    }

    /// Number of trellis steps `N`.
    pub fn steps(&self) -> usize {
        self.step_bit.len()
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn interleaver(&self) -> &Interleaver {
        &self.interleaver
    }

    pub fn pattern(&self) -> &PuncturePattern {
        &self.pattern
    }

    pub fn step_bit(&self, step: usize) -> usize {
        self.step_bit[step]
    }

    pub fn parity_steps(&self) -> &[usize] {
        &self.parity_steps
    }

    /// Transmitted symbols per codeword.
    pub fn codeword_len(&self) -> usize {
        self.info_len() + self.parity_steps.len()
    }

    pub fn rate(&self) -> f64 {
        self.info_len() as f64 / self.codeword_len() as f64
    }

    /// Trellis input at every step.
    pub fn trellis_input(&self, info: &[u8]) -> Vec<u8> {
        self.step_bit.iter().map(|&b| info[b]).collect()
    }

    pub fn encode(&self, info: &[u8]) -> Result<Codeword> {
        if info.len() != self.info_len() {
            return Err(Error::SizeMismatch(format!("{} information bits, expected {}", info.len(), self.info_len())));
        }
        if let Some(&b) = info.iter().find(|&&b| b > 1) {
            return Err(Error::InvalidParameter(format!("information symbol {b} is not a bit")));
        }
        let parity = self.trellis.encode(&self.trellis_input(info), 0)?;
        Ok(Codeword {
            systematic: info.to_vec(),
            parity: self.parity_steps.iter().map(|&j| parity[j]).collect(),
        })
    }

    /// Parity observation at every trellis step; punctured steps are erased.
    fn parity_by_step(&self, rx: &ReceivedWord) -> Vec<Option<u8>> {
        let mut out = vec![None; self.steps()];
        for (&j, &c) in self.parity_steps.iter().zip(&rx.parity) {
            out[j] = c;
        }
        out
    }

    fn check_received(&self, rx: &ReceivedWord) -> Result<()> {
        if rx.systematic.len() != self.info_len() || rx.parity.len() != self.parity_steps.len() {
            return Err(Error::SizeMismatch(format!(
                "received {}+{} symbols, expected {}+{}",
                rx.systematic.len(),
                rx.parity.len(),
                self.info_len(),
                self.parity_steps.len()
            )));
        }
        Ok(())
    }
}

/// Transmitted symbols: systematic bits then the unpunctured parity bits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Codeword {
    pub systematic: Vec<u8>,
    pub parity: Vec<u8>,
}

/// Channel output; `None` is an erasure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReceivedWord {
    pub systematic: Vec<Option<u8>>,
    pub parity: Vec<Option<u8>>,
}

impl ReceivedWord {
    /// Noise-free reception.
    pub fn clean(cw: &Codeword) -> Self {
        Self {
            systematic: cw.systematic.iter().map(|&b| Some(b)).collect(),
            parity: cw.parity.iter().map(|&b| Some(b)).collect(),
        }
    }

    pub fn erasures(&self) -> usize {
        self.systematic.iter().chain(&self.parity).filter(|s| s.is_none()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecodeResult {
    pub decoded: Vec<Option<u8>>,
    pub resolved_all: bool,
    pub iterations: usize,
    /// Trellis steps whose information bit is still unknown.
    pub unresolved_steps: Vec<usize>,
}

impl DecodeResult {
    pub fn erased_bits(&self) -> Vec<usize> {
        self.decoded.iter().enumerate().filter(|(_, v)| v.is_none()).map(|(i, _)| i).collect()
    }
}

/// Residual erasures after a failed decode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StoppingSet {
    pub bits: Vec<usize>,
    pub degrees: Vec<usize>,
    pub steps: Vec<usize>,
}

/// Structure left behind by an unsuccessful decode.
pub fn detect_stopping_set(code: &TurboCode, result: &DecodeResult) -> Result<StoppingSet> {
    if result.resolved_all {
        return Err(Error::InvalidParameter("decode succeeded, there is no stopping set".into()));
    }
    let bits = result.erased_bits();
    let degrees = bits.iter().map(|&b| code.degrees[b]).collect();
    Ok(StoppingSet { bits, degrees, steps: result.unresolved_steps.clone() })
}

/// A frame decoder selectable by name.
pub trait FrameDecoder: Send + Sync {
    fn name(&self) -> &'static str;
    fn decode(&self, code: &TurboCode, rx: &ReceivedWord) -> Result<DecodeResult>;
}

/// Hard-input hard-output peeling over the trellis.
#[derive(Debug, Clone, Copy)]
pub struct PeelingDecoder {
    pub max_iterations: usize,
}

impl Default for PeelingDecoder {
    fn default() -> Self {
        Self { max_iterations: DEFAULT_MAX_ITERATIONS }
    }
}

/// Bitwise maximum-likelihood decoding by enumerating all information words.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExhaustiveDecoder;

impl FrameDecoder for PeelingDecoder {
    fn name(&self) -> &'static str {
        "peeling"
    }

    fn decode(&self, code: &TurboCode, rx: &ReceivedWord) -> Result<DecodeResult> {
        peel_decode(code, rx, self.max_iterations)
    }
}

impl FrameDecoder for ExhaustiveDecoder {
    fn name(&self) -> &'static str {
        "exhaustive"
    }

    fn decode(&self, code: &TurboCode, rx: &ReceivedWord) -> Result<DecodeResult> {
        exhaustive_decode(code, rx)
    }
}

type DecoderFactory = fn(usize) -> Box<dyn FrameDecoder>;

const REGISTRY: &[(&str, DecoderFactory)] = &[
    ("peeling", |max_iterations| Box::new(PeelingDecoder { max_iterations })),
    ("exhaustive", |_| Box::new(ExhaustiveDecoder)),
];

pub fn decoder_names() -> Vec<&'static str> {
    REGISTRY.iter().map(|(n, _)| *n).collect()
}

/// Looks up a decoder; `max_iterations` applies to iterative decoders.
pub fn decoder_by_name(name: &str, max_iterations: usize) -> Result<Box<dyn FrameDecoder>> {
    REGISTRY
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, make)| make(max_iterations))
        .ok_or_else(|| Error::UnknownDecoder(name.to_string()))
}

/// Peeling decoder.
///
/// Keeps one set of feasible states per trellis state node (state 0 at the
/// start, everything at the unterminated end). An iteration is a forward
/// sweep and a backward sweep, each pruning states with no consistent edge,
/// followed by resolution of every step whose surviving edges agree on the
/// input bit; a resolved bit fixes all of its copies. Stops when everything
/// is resolved, nothing changes, or after `max_iterations`.
pub fn peel_decode(code: &TurboCode, rx: &ReceivedWord, max_iterations: usize) -> Result<DecodeResult> {
    code.check_received(rx)?;
    let n = code.steps();
    let t = &code.trellis;
    let all: u64 = if t.num_states() == 64 { u64::MAX } else { (1u64 << t.num_states()) - 1 };
    let parity = code.parity_by_step(rx);
    let mut value = rx.systematic.clone();
    let mut unknown = value.iter().filter(|v| v.is_none()).count();
    let mut iterations = 0;

    if unknown > 0 {
        let mut feasible = vec![all; n + 1];
        feasible[0] = 1;
        let inputs = |v: Option<u8>| -> &'static [u8] {
            match v {
                Some(0) => &[0],
                Some(_) => &[1],
                None => &[0, 1],
            }
        };
        let ok = |c: u8, obs: Option<u8>| obs.is_none_or(|o| o == c);

        while unknown > 0 && iterations < max_iterations {
            iterations += 1;
            let mut changed = false;
            for j in 0..n {
                let mut next = 0u64;
                let mut m = feasible[j];
                while m != 0 {
                    let s = m.trailing_zeros() as usize;
                    m &= m - 1;
                    for &b in inputs(value[code.step_bit[j]]) {
                        let e = t.edge(s, b);
                        if ok(e.parity, parity[j]) {
                            next |= 1 << e.to;
                        }
                    }
                }
                let narrowed = feasible[j + 1] & next;
                changed |= narrowed != feasible[j + 1];
                feasible[j + 1] = narrowed;
                if narrowed == 0 {
                    return Err(Error::InconsistentInput(format!("no feasible state after step {j}")));
                }
            }
            for j in (0..n).rev() {
                let mut prev = 0u64;
                let mut m = feasible[j];
                while m != 0 {
                    let s = m.trailing_zeros() as usize;
                    m &= m - 1;
                    for &b in inputs(value[code.step_bit[j]]) {
                        let e = t.edge(s, b);
                        if ok(e.parity, parity[j]) && feasible[j + 1] >> e.to & 1 == 1 {
                            prev |= 1 << s;
                        }
                    }
                }
                let narrowed = feasible[j] & prev;
                changed |= narrowed != feasible[j];
                feasible[j] = narrowed;
                if narrowed == 0 {
                    return Err(Error::InconsistentInput(format!("no feasible state before step {j}")));
                }
            }
            for j in 0..n {
                let bit = code.step_bit[j];
                if value[bit].is_some() {
                    continue;
                }
                let mut support = [false; 2];
                let mut m = feasible[j];
                while m != 0 {
                    let s = m.trailing_zeros() as usize;
                    m &= m - 1;
                    for b in 0..2u8 {
                        let e = t.edge(s, b);
                        if ok(e.parity, parity[j]) && feasible[j + 1] >> e.to & 1 == 1 {
                            support[b as usize] = true;
                        }
                    }
                }
                match support {
                    [true, false] => value[bit] = Some(0),
                    [false, true] => value[bit] = Some(1),
                    [true, true] => continue,
                    [false, false] => return Err(Error::InconsistentInput(format!("no surviving edge at step {j}"))),
                }
                unknown -= 1;
                changed = true;
            }
            if !changed {
                break;
            }
        }
    }

    let unresolved_steps = (0..n).filter(|&j| value[code.step_bit[j]].is_none()).collect();
    Ok(DecodeResult { resolved_all: unknown == 0, decoded: value, iterations, unresolved_steps })
}

/// Bitwise ML erasure decoding: a bit is decoded when every information word
/// consistent with the received symbols agrees on it.
pub fn exhaustive_decode(code: &TurboCode, rx: &ReceivedWord) -> Result<DecodeResult> {
    code.check_received(rx)?;
    let k = code.info_len();
    if k > EXHAUSTIVE_MAX_BITS {
        return Err(Error::InvalidParameter(format!(
            "exhaustive decoding is limited to {EXHAUSTIVE_MAX_BITS} information bits, got {k}"
        )));
    }
    let parity_obs = code.parity_by_step(rx);
    // Bits set in `agree_mask` still agree across consistent words.
    let mut first: Option<u32> = None;
    let mut agree_mask: u32 = if k == 32 { u32::MAX } else { (1u32 << k) - 1 };
    let mut info = vec![0u8; k];
    for w in 0..(1u32 << k) {
        if (0..k).any(|i| rx.systematic[i].is_some_and(|v| v as u32 != (w >> i & 1))) {
            continue;
        }
        for (i, x) in info.iter_mut().enumerate() {
            *x = (w >> i & 1) as u8;
        }
        let parity = code.trellis.encode(&code.trellis_input(&info), 0)?;
        if parity.iter().zip(&parity_obs).any(|(&c, o)| o.is_some_and(|o| o != c)) {
            continue;
        }
        match first {
            None => first = Some(w),
            Some(f) => agree_mask &= !(f ^ w),
        }
    }
    let first = first.ok_or_else(|| Error::InconsistentInput("no codeword matches the received symbols".into()))?;
    let decoded: Vec<Option<u8>> =
        (0..k).map(|i| (agree_mask >> i & 1 == 1).then_some((first >> i & 1) as u8)).collect();
    let resolved_all = decoded.iter().all(Option::is_some);
    let unresolved_steps = (0..code.steps()).filter(|&j| decoded[code.step_bit[j]].is_none()).collect();
    Ok(DecodeResult { decoded, resolved_all, iterations: 0, unresolved_steps })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn code(degrees: Vec<usize>, perm: Vec<usize>, pattern: &str) -> TurboCode {
        TurboCode::new("1,5/7".parse().unwrap(), degrees, Interleaver::new(perm).unwrap(), pattern.parse().unwrap()).unwrap()
    }

    fn erase(cw: &Codeword, sys: &[usize], par: &[usize]) -> ReceivedWord {
        let mut rx = ReceivedWord::clean(cw);
        sys.iter().for_each(|&i| rx.systematic[i] = None);
        par.iter().for_each(|&i| rx.parity[i] = None);
        rx
    }

    #[test]
    fn encoder_composes_repetition_interleaver_and_rsc() {
        let c = code(vec![2; 4], vec![0, 4, 1, 5, 2, 6, 3, 7], "1");
        let info = [1, 0, 1, 1];
        // Steps 0..3 carry bits 0..3, steps 4..7 repeat them.
        let stream = [1, 0, 1, 1, 1, 0, 1, 1];
        let expected = c.trellis().encode(&stream, 0).unwrap();
        let cw = c.encode(&info).unwrap();
        assert_eq!(cw.parity, expected);
        assert_eq!(cw.systematic, info);
        assert_eq!(c.encode(&[0; 4]).unwrap().parity, vec![0; 8]);
        assert!(c.encode(&[0; 3]).is_err());
    }

    #[test]
    fn punctured_length() {
        let c = code(vec![2; 5], (0..10).collect(), "1,0");
        assert_eq!(c.encode(&[1, 0, 0, 1, 1]).unwrap().parity.len(), 5);
        assert_eq!(c.codeword_len(), 10);
        let c = code(vec![2; 5], (0..10).collect(), "1,0,0");
        assert_eq!(c.parity_steps(), &[0, 3, 6, 9]);
    }

    #[test]
    fn trivial_decodes() {
        let c = code(vec![2; 4], vec![0, 4, 1, 5, 2, 6, 3, 7], "1");
        let cw = c.encode(&[1, 1, 0, 1]).unwrap();
        let r = peel_decode(&c, &ReceivedWord::clean(&cw), 200).unwrap();
        assert!(r.resolved_all);
        assert_eq!(r.iterations, 0);
        let r = peel_decode(&c, &erase(&cw, &[], &[0, 1, 2, 3, 4, 5, 6, 7]), 200).unwrap();
        assert!(r.resolved_all && r.iterations == 0);
        assert_eq!(r.decoded, vec![Some(1), Some(1), Some(0), Some(1)]);
        // Everything erased: nothing can be learned.
        let r = peel_decode(&c, &erase(&cw, &[0, 1, 2, 3], &[0, 1, 2, 3, 4, 5, 6, 7]), 200).unwrap();
        assert!(!r.resolved_all);
        let s = detect_stopping_set(&c, &r).unwrap();
        assert_eq!(s.bits, vec![0, 1, 2, 3]);
        assert_eq!(s.steps.len(), 8);
    }

    #[test]
    fn single_erasure_is_recovered_from_parity() {
        let c = code(vec![2; 4], vec![0, 4, 1, 5, 2, 6, 3, 7], "1");
        let cw = c.encode(&[0, 1, 1, 0]).unwrap();
        let r = peel_decode(&c, &erase(&cw, &[2], &[]), 200).unwrap();
        assert!(r.resolved_all);
        assert_eq!(r.decoded[2], Some(1));
        assert!(detect_stopping_set(&c, &r).is_err());
    }

    #[test]
    fn corrupted_input_is_reported() {
        let c = code(vec![2; 2], vec![0, 2, 1, 3], "1");
        let cw = c.encode(&[0, 0]).unwrap();
        let mut rx = erase(&cw, &[0], &[]);
        // Step 0 forces state 0, whose zero-input edge has parity 0.
        rx.parity[1] = Some(1);
        assert!(matches!(peel_decode(&c, &rx, 200), Err(Error::InconsistentInput(_))));
    }

    #[test]
    fn registry() {
        assert_eq!(decoder_names(), vec!["peeling", "exhaustive"]);
        assert_eq!(decoder_by_name("peeling", 10).unwrap().name(), "peeling");
        assert!(matches!(decoder_by_name("viterbi", 10), Err(Error::UnknownDecoder(_))));
    }

    #[test]
    fn peeling_agrees_with_ml_on_random_small_codes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ml = ExhaustiveDecoder;
        for trial in 0..300 {
            let k = rng.gen_range(2..=8);
            let degrees: Vec<usize> = (0..k).map(|_| rng.gen_range(2..=3)).collect();
            let n: usize = degrees.iter().sum();
            let mut perm: Vec<usize> = (0..n).collect();
            rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
            let pattern = ["1", "1,0", "1,1,0"][trial % 3];
            let c = code(degrees, perm, pattern);
            let info: Vec<u8> = (0..k).map(|_| rng.gen_range(0..2)).collect();
            let cw = c.encode(&info).unwrap();
            let mut rx = ReceivedWord::clean(&cw);
            let p = rng.gen_range(0.1..0.9);
            rx.systematic.iter_mut().chain(rx.parity.iter_mut()).for_each(|s| {
                if rng.gen::<f64>() < p {
                    *s = None;
                }
            });
            let peel = peel_decode(&c, &rx, 200).unwrap();
            let best = ml.decode(&c, &rx).unwrap();
            for i in 0..k {
                if let Some(v) = peel.decoded[i] {
                    assert_eq!(v, info[i]);
                    assert_eq!(best.decoded[i], Some(v));
                }
            }
            if peel.resolved_all {
                assert!(best.resolved_all);
            }
        }
    }
}
