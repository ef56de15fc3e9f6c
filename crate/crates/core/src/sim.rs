//! Erasure channel, frame-error-rate campaigns and a Monte-Carlo check of
//! the extrinsic erasure probability.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::codec::{Codeword, FrameDecoder, ReceivedWord, TurboCode};
use crate::erasure::PuncturePattern;
use crate::error::{Error, Result};
use crate::trellis::Trellis;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Trials simulated between two checks of the stop rule.
const BATCH: usize = 64;

/// Random stream of one trial, independent of scheduling.
pub fn trial_rng(master_seed: u64, cell: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(cell << 40 | trial);
    rng
}

/// Erases every symbol independently with probability `p0`.
pub fn bec_transmit<R: Rng + ?Sized>(cw: &Codeword, p0: f64, rng: &mut R) -> Result<ReceivedWord> {
    if !(0.0..=1.0).contains(&p0) {
        return Err(Error::InvalidParameter(format!("erasure probability {p0} outside [0, 1]")));
    }
    let mut pass = |&b: &u8| if rng.gen::<f64>() < p0 { None } else { Some(b) };
    let systematic = cw.systematic.iter().map(&mut pass).collect();
    let parity = cw.parity.iter().map(&mut pass).collect();
    Ok(ReceivedWord { systematic, parity })
}

/// Stop after `target_frame_errors` frame errors or `max_trials` trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StopRule {
    pub max_trials: usize,
    pub target_frame_errors: usize,
}

impl Default for StopRule {
    fn default() -> Self {
        Self { max_trials: 100_000, target_frame_errors: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub p0: f64,
    pub trials: usize,
    pub frame_errors: usize,
    /// Erased information bits over all trials.
    pub bit_errors: usize,
    /// Decoded bits that differ from the transmitted ones (must stay 0).
    pub wrong_bits: usize,
    pub fer: f64,
    pub fer_lo: f64,
    pub fer_hi: f64,
    pub ber: f64,
    pub mean_iterations: f64,
    pub wall_time: f64,
    /// `(1 - R_c) - p0`.
    pub gap_to_capacity: f64,
}

/// Wilson score interval at 95% confidence.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

struct Trial {
    frame_error: bool,
    erased: usize,
    wrong: usize,
    iterations: usize,
}

fn run_trial(code: &TurboCode, decoder: &dyn FrameDecoder, p0: f64, rng: &mut ChaCha8Rng) -> Result<Trial> {
    let info: Vec<u8> = (0..code.info_len()).map(|_| rng.gen_range(0..2u8)).collect();
    let cw = code.encode(&info)?;
    let rx = bec_transmit(&cw, p0, rng)?;
    let r = decoder.decode(code, &rx)?;
    let erased = r.decoded.iter().filter(|v| v.is_none()).count();
    let wrong = r.decoded.iter().zip(&info).filter(|(v, &b)| v.is_some_and(|v| v != b)).count();
    Ok(Trial { frame_error: !r.resolved_all || erased > 0 || wrong > 0, erased, wrong, iterations: r.iterations })
}

/// Frame error rate at every `p0`.
///
/// Trials run in parallel in batches, but counts are accumulated in trial
/// order and stop at exactly the trial that meets the stop rule, so results
/// depend only on `master_seed`.
pub fn run_fer(
    code: &TurboCode,
    decoder: &dyn FrameDecoder,
    p0_list: &[f64],
    stop: StopRule,
    master_seed: u64,
) -> Result<Vec<SimResult>> {
    if stop.max_trials == 0 {
        return Err(Error::InvalidParameter("max_trials must be positive".into()));
    }
    let capacity_gap = 1.0 - code.rate();
    p0_list
        .iter()
        .enumerate()
        .map(|(cell, &p0)| {
            if !(0.0..=1.0).contains(&p0) {
                return Err(Error::InvalidParameter(format!("erasure probability {p0} outside [0, 1]")));
            }
            let start = Instant::now();
            let (mut trials, mut fe, mut erased, mut wrong, mut iters) = (0usize, 0usize, 0usize, 0usize, 0usize);
            'outer: while trials < stop.max_trials {
                let end = (trials + BATCH).min(stop.max_trials);
                let batch: Vec<Trial> = (trials..end)
                    .into_par_iter()
                    .map(|t| run_trial(code, decoder, p0, &mut trial_rng(master_seed, cell as u64, t as u64)))
                    .collect::<Result<_>>()?;
                for t in batch {
                    trials += 1;
                    fe += t.frame_error as usize;
                    erased += t.erased;
                    wrong += t.wrong;
                    iters += t.iterations;
                    if fe >= stop.target_frame_errors {
                        break 'outer;
                    }
                }
            }
            let (fer_lo, fer_hi) = wilson_interval(fe, trials);
            Ok(SimResult {
                p0,
                trials,
                frame_errors: fe,
                bit_errors: erased,
                wrong_bits: wrong,
                fer: fe as f64 / trials as f64,
                fer_lo,
                fer_hi,
                ber: erased as f64 / (trials * code.info_len()) as f64,
                mean_iterations: iters as f64 / trials as f64,
                wall_time: start.elapsed().as_secs_f64(),
                gap_to_capacity: capacity_gap - p0,
            })
        })
        .collect()
}

pub const CSV_HEADER: &str = "p0,trials,frame_errors,fer,fer_lo,fer_hi,ber,mean_iters";

pub fn results_to_csv(results: &[SimResult]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in results {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.p0, r.trials, r.frame_errors, r.fer, r.fer_lo, r.fer_hi, r.ber, r.mean_iterations
        );
    }
    s
}

/// Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub positions: usize,
}

impl OracleEstimate {
    /// Whether `value` lies within `k` standard errors; an estimate with zero
    /// spread must match exactly.
    pub fn brackets(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.stderr + 1e-12
    }
}

/// Number of batches for the batch-means standard error.
const ORACLE_BATCHES: usize = 100;

/// Steps excluded at each end so that both recursions have forgotten their
/// uniform initialization.
const ORACLE_MARGIN: usize = 2_000;

/// Fraction of trellis positions whose extrinsic output is erased, from a
/// real-valued forward-backward pass over the all-zero codeword with
/// information bits erased with probability `p`, parity bits with
/// probability `q` and parity punctured by `pattern`.
pub fn validate_pext_oracle(
    trellis: &Trellis,
    p: f64,
    q: f64,
    pattern: &PuncturePattern,
    steps: usize,
    seed: u64,
) -> Result<OracleEstimate> {
    if steps < 10_000 {
        return Err(Error::InvalidParameter(format!("oracle needs at least 10000 steps, got {steps}")));
    }
    for (name, v) in [("p", p), ("q", q)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidParameter(format!("{name} = {v} outside [0, 1]")));
        }
    }
    let total = steps + 2 * ORACLE_MARGIN;
    let s = trellis.num_states();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let info_erased: Vec<bool> = (0..total).map(|_| rng.gen::<f64>() < p).collect();
    let parity_erased: Vec<bool> = (0..total).map(|n| rng.gen::<f64>() < q || !pattern.transmits(n)).collect();

    // Branch weight of an edge under the all-zero codeword.
    let gamma = |n: usize, input: u8, parity: u8, use_info: bool| -> f64 {
        let info_ok = !use_info || info_erased[n] || input == 0;
        let parity_ok = parity_erased[n] || parity == 0;
        (info_ok && parity_ok) as u8 as f64
    };
    let normalize = |v: &mut [f64]| {
        let t: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= t);
    };

    // Forward laws, one row of `s` entries per state node.
    let mut alpha = vec![0.0; (total + 1) * s];
    alpha[..s].fill(1.0 / s as f64);
    for n in 0..total {
        let (done, rest) = alpha.split_at_mut((n + 1) * s);
        let (cur, next) = (&done[n * s..], &mut rest[..s]);
        for e in trellis.edges() {
            next[e.to] += cur[e.from] * gamma(n, e.input, e.parity, true);
        }
        normalize(next);
    }
    let mut beta = vec![1.0 / s as f64; s];
    let mut erased = vec![false; total];
    for n in (0..total).rev() {
        let mut mass = [0.0f64; 2];
        for e in trellis.edges() {
            mass[e.input as usize] += alpha[n * s + e.from] * gamma(n, e.input, e.parity, false) * beta[e.to];
        }
        erased[n] = mass[1] > 1e-12 * (mass[0] + mass[1]);
        let mut prev = vec![0.0; s];
        for e in trellis.edges() {
            prev[e.from] += gamma(n, e.input, e.parity, true) * beta[e.to];
        }
        normalize(&mut prev);
        beta = prev;
    }

    let window = &erased[ORACLE_MARGIN..ORACLE_MARGIN + steps];
    let per = steps / ORACLE_BATCHES;
    let means: Vec<f64> = window
        .chunks_exact(per)
        .map(|c| c.iter().filter(|&&e| e).count() as f64 / per as f64)
        .collect();
    let b = means.len() as f64;
    let mean = means.iter().sum::<f64>() / b;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (b - 1.0);
    Ok(OracleEstimate { mean, stderr: (var / b).sqrt(), positions: per * means.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{PeelingDecoder, TurboCode};
    use crate::peg::Interleaver;

    #[test]
    fn channel_extremes_and_rate() {
        let cw = Codeword { systematic: vec![1, 0, 1], parity: vec![0, 1] };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(bec_transmit(&cw, 0.0, &mut rng).unwrap(), ReceivedWord::clean(&cw));
        assert_eq!(bec_transmit(&cw, 1.0, &mut rng).unwrap().erasures(), 5);
        assert!(bec_transmit(&cw, 1.5, &mut rng).is_err());

        let n = 100_000;
        let cw = Codeword { systematic: vec![0; n], parity: vec![] };
        let e = bec_transmit(&cw, 0.3, &mut rng).unwrap().erasures() as f64;
        let sd = (n as f64 * 0.3 * 0.7).sqrt();
        assert!((e - 0.3 * n as f64).abs() < 3.0 * sd);
    }

    #[test]
    fn wilson() {
        let (lo, hi) = wilson_interval(0, 100);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.0370).abs() < 1e-3);
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
    }

    #[test]
    fn fer_is_reproducible() {
        let k = 50;
        let perm: Vec<usize> = (0..2 * k).map(|m| (m * 37) % (2 * k)).collect();
        let code = TurboCode::new("1,5/7".parse().unwrap(), vec![2; k], Interleaver::new(perm).unwrap(), PuncturePattern::unpunctured(1))
            .unwrap();
        let dec = PeelingDecoder::default();
        let stop = StopRule { max_trials: 300, target_frame_errors: 20 };
        let a = run_fer(&code, &dec, &[0.0, 0.5, 0.8], stop, 5).unwrap();
        let b = run_fer(&code, &dec, &[0.0, 0.5, 0.8], stop, 5).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!((x.trials, x.frame_errors, x.bit_errors), (y.trials, y.frame_errors, y.bit_errors));
            assert_eq!(x.wrong_bits, 0);
        }
        assert_eq!(a[0].frame_errors, 0);
        assert_eq!(a[0].trials, 300);
        assert_eq!(a[2].frame_errors, 20);
        assert!(a[2].trials < 300);
        let csv = results_to_csv(&a);
        assert!(csv.starts_with(CSV_HEADER));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn oracle_trivial_case() {
        let t = Trellis::new("1,5/7".parse().unwrap()).unwrap();
        let est = validate_pext_oracle(&t, 0.0, 0.5, &"1,0".parse().unwrap(), 20_000, 3).unwrap();
        assert_eq!(est.mean, 0.0);
        assert_eq!(est.stderr, 0.0);
        assert!(validate_pext_oracle(&t, 0.5, 0.5, &PuncturePattern::unpunctured(1), 100, 3).is_err());
    }
}
