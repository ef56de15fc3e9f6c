//! Exact extrinsic erasure probability of a (punctured) RSC decoder on the
//! binary erasure channel.
//!
//! Under the all-zero codeword the forward and backward BCJR state
//! distributions take values in small finite alphabets and evolve as Markov
//! chains whose transition probabilities are bilinear in the information
//! erasure probability `p` and the parity erasure probability `q`. The
//! stationary laws of these chains, combined with the conditional erasure
//! indicator `T(q)`, give the extrinsic erasure probability in closed form.
//! Periodic puncturing is handled by running the chains window by window.

mod mask;
mod matrix;
mod pattern;
mod stationary;

pub use mask::{
    alphabet_bound, backward_step, forward_step, step, Direction, DistributionAlphabet, StateMask, OUTCOMES,
};
pub use matrix::{Bilinear, BilinearMatrix, ErasureIndicator, Matrix};
pub use pattern::PuncturePattern;
pub use stationary::{stationary, STATIONARY_MAX_DOUBLINGS, STATIONARY_TOLERANCE};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::trellis::{RscSpec, Trellis};

/// Values of `P_ext,X(0, q)` above this are structurally positive.
pub const CATASTROPHIC_THRESHOLD: f64 = 1e-9;

/// Parity erasure probabilities probed by [`ErasureAnalysis::is_catastrophic`].
/// `q = 1` is excluded: with every parity erased the extrinsic output is
/// erased for any pattern.
pub const CATASTROPHIC_PROBES: [f64; 3] = [0.25, 0.5, 0.75];

/// Largest alphabet handled with dense matrices.
const MAX_DENSE_ALPHABET: usize = 512;

/// Per-code analysis object: alphabets, symbolic transition matrices and the
/// erasure indicator. Immutable once built.
#[derive(Debug, Clone)]
pub struct ErasureAnalysis {
    trellis: Trellis,
    forward: DistributionAlphabet,
    backward: DistributionAlphabet,
    m_forward: BilinearMatrix,
    m_backward: BilinearMatrix,
    indicator: ErasureIndicator,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CatastrophicCheck {
    pub catastrophic: bool,
    /// Largest `P_ext,X(0, q)` over the probes (NaN if a window chain failed to
    /// settle, which is reported as catastrophic).
    pub witness: f64,
}

/// Single-step matrices evaluated at one `(p, q)`, with and without the
/// parity observation.
struct StepMatrices {
    forward_on: Matrix,
    forward_off: Matrix,
    backward_on: Matrix,
    backward_off: Matrix,
}

impl StepMatrices {
    fn forward(&self, transmitted: bool) -> &Matrix {
        if transmitted { &self.forward_on } else { &self.forward_off }
    }

    fn backward(&self, transmitted: bool) -> &Matrix {
        if transmitted { &self.backward_on } else { &self.backward_off }
    }
}

fn check_probability(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidParameter(format!("{name} = {v} outside [0, 1]")));
    }
    Ok(())
}

impl ErasureAnalysis {
    pub fn new(spec: RscSpec) -> Result<Self> {
        Self::from_trellis(Trellis::new(spec)?)
    }

    pub fn from_trellis(trellis: Trellis) -> Result<Self> {
        let forward = DistributionAlphabet::enumerate(&trellis, Direction::Forward)?;
        let backward = DistributionAlphabet::enumerate(&trellis, Direction::Backward)?;
        for a in [&forward, &backward] {
            if a.len() > MAX_DENSE_ALPHABET {
                return Err(Error::InvalidParameter(format!(
                    "alphabet of {} members is too large for dense analysis",
                    a.len()
                )));
            }
        }
        let m_forward = BilinearMatrix::transition(&trellis, &forward)?;
        let m_backward = BilinearMatrix::transition(&trellis, &backward)?;
        let indicator = ErasureIndicator::new(&trellis, &forward, &backward);
        Ok(Self { trellis, forward, backward, m_forward, m_backward, indicator })
    }

    pub fn trellis(&self) -> &Trellis {
        &self.trellis
    }

    pub fn spec(&self) -> &RscSpec {
        self.trellis.spec()
    }

    pub fn forward_alphabet(&self) -> &DistributionAlphabet {
        &self.forward
    }

    pub fn backward_alphabet(&self) -> &DistributionAlphabet {
        &self.backward
    }

    pub fn forward_matrix(&self) -> &BilinearMatrix {
        &self.m_forward
    }

    pub fn backward_matrix(&self) -> &BilinearMatrix {
        &self.m_backward
    }

    pub fn indicator(&self) -> &ErasureIndicator {
        &self.indicator
    }

    fn step_matrices(&self, p: f64, q: f64) -> StepMatrices {
        StepMatrices {
            forward_on: self.m_forward.eval(p, q),
            forward_off: self.m_forward.eval(p, 1.0),
            backward_on: self.m_backward.eval(p, q),
            backward_off: self.m_backward.eval(p, 1.0),
        }
    }

    /// Unpunctured extrinsic erasure probability `pi_F T(q) pi_B^t`.
    pub fn extrinsic_probability(&self, p: f64, q: f64) -> Result<f64> {
        check_probability("p", p)?;
        check_probability("q", q)?;
        let pi_f = stationary(&self.m_forward.eval(p, q))?;
        let pi_b = stationary(&self.m_backward.eval(p, q))?;
        Ok(self.indicator.quadratic_form(&pi_f, q, &pi_b).clamp(0.0, 1.0))
    }

    /// Window transition matrices `(M_F,X, M_B,X)`. The forward product runs
    /// over the pattern left to right; the backward one right to left.
    pub fn window_matrices(&self, pattern: &PuncturePattern, p: f64, q: f64) -> Result<(Matrix, Matrix)> {
        check_probability("p", p)?;
        check_probability("q", q)?;
        Ok(self.window_from(&self.step_matrices(p, q), pattern))
    }

    fn window_from(&self, m: &StepMatrices, pattern: &PuncturePattern) -> (Matrix, Matrix) {
        let bits = pattern.bits();
        let fwd = bits
            .iter()
            .fold(Matrix::identity(self.forward.len()), |acc, &x| acc.mul(m.forward(x == 1)));
        let bwd = bits
            .iter()
            .rev()
            .fold(Matrix::identity(self.backward.len()), |acc, &x| acc.mul(m.backward(x == 1)));
        (fwd, bwd)
    }

    /// Extrinsic erasure probability under periodic puncturing, averaged over
    /// the positions of one window.
    pub fn punctured_extrinsic_probability(&self, p: f64, q: f64, pattern: &PuncturePattern) -> Result<f64> {
        check_probability("p", p)?;
        check_probability("q", q)?;
        let m = self.step_matrices(p, q);
        if pattern.period() == 1 {
            // Single position: the window chain is the step chain itself.
            let transmitted = pattern.bits()[0] == 1;
            let pi_f = stationary(m.forward(transmitted))?;
            let pi_b = stationary(m.backward(transmitted))?;
            let qx = if transmitted { q } else { 1.0 };
            return Ok(self.indicator.quadratic_form(&pi_f, qx, &pi_b).clamp(0.0, 1.0));
        }
        let (wf, wb) = self.window_from(&m, pattern);
        let bits = pattern.bits();
        let gamma = bits.len();

        // Left-of-step forward laws, position 0 .. gamma-1.
        let mut forward = Vec::with_capacity(gamma);
        forward.push(stationary(&wf)?);
        for g in 1..gamma {
            let next = m.forward(bits[g - 1] == 1).left_mul(&forward[g - 1]);
            forward.push(next);
        }
        // Right-of-step backward laws, filled from the last position down.
        let mut backward = vec![Vec::new(); gamma];
        backward[gamma - 1] = stationary(&wb)?;
        for g in (0..gamma - 1).rev() {
            backward[g] = m.backward(bits[g + 1] == 1).left_mul(&backward[g + 1]);
        }

        let total: f64 = (0..gamma)
            .map(|g| {
                let qx = if bits[g] == 1 { q } else { 1.0 };
                self.indicator.quadratic_form(&forward[g], qx, &backward[g])
            })
            .sum();
        Ok((total / gamma as f64).clamp(0.0, 1.0))
    }

    /// A pattern is catastrophic when perfect a-priori knowledge of the
    /// information bits (`p = 0`) still leaves extrinsic erasures.
    pub fn is_catastrophic(&self, pattern: &PuncturePattern) -> CatastrophicCheck {
        let mut witness: f64 = 0.0;
        for q in CATASTROPHIC_PROBES {
            match self.punctured_extrinsic_probability(0.0, q, pattern) {
                Ok(v) => witness = witness.max(v),
                Err(_) => return CatastrophicCheck { catastrophic: true, witness: f64::NAN },
            }
        }
        CatastrophicCheck { catastrophic: witness > CATASTROPHIC_THRESHOLD, witness }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a57() -> ErasureAnalysis {
        ErasureAnalysis::new("1,5/7".parse().unwrap()).unwrap()
    }

    fn pat(s: &str) -> PuncturePattern {
        s.parse().unwrap()
    }

    #[test]
    fn trivial_extrinsic_values() {
        let a = a57();
        for q in [0.0, 0.3, 0.7, 0.99] {
            assert!(a.extrinsic_probability(0.0, q).unwrap().abs() < 1e-12);
        }
        assert!((a.extrinsic_probability(1.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(a.extrinsic_probability(1.1, 0.5).is_err());
    }

    #[test]
    fn stationary_known_cases() {
        let a = a57();
        let pi = stationary(&a.forward_matrix().eval(0.0, 0.4)).unwrap();
        assert!((pi[0] - 1.0).abs() < 1e-12);
        let pi = stationary(&a.forward_matrix().eval(1.0, 1.0)).unwrap();
        assert!((pi[4] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn window_products_follow_pattern_order() {
        let a = a57();
        let (p, q) = (0.3, 0.6);
        let (wf, wb) = a.window_matrices(&pat("1,0"), p, q).unwrap();
        let mf = a.forward_matrix();
        let mb = a.backward_matrix();
        assert_eq!(wf, mf.eval(p, q).mul(&mf.eval(p, 1.0)));
        assert_eq!(wb, mb.eval(p, 1.0).mul(&mb.eval(p, q)));
        let (wf, _) = a.window_matrices(&pat("1,1,1"), p, q).unwrap();
        let m = mf.eval(p, q);
        let cube = m.mul(&m).mul(&m);
        for i in 0..5 {
            for j in 0..5 {
                assert!((wf.get(i, j) - cube.get(i, j)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn all_ones_pattern_reduces_to_unpunctured() {
        let a = a57();
        for (p, q) in [(0.2, 0.3), (0.5, 0.5), (0.7, 0.4), (0.9, 0.9)] {
            let base = a.extrinsic_probability(p, q).unwrap();
            for period in [1, 2, 3, 5] {
                let v = a.punctured_extrinsic_probability(p, q, &PuncturePattern::unpunctured(period)).unwrap();
                assert!((v - base).abs() < 1e-10, "period {period}: {v} vs {base}");
            }
        }
    }

    #[test]
    fn half_rate_pattern_matches_two_term_expression() {
        // P = 1/2 [ pi_FX T(q) (pi_BX M_B(p,1))^t + (pi_FX M_F(p,q)) T(1) pi_BX^t ]
        let a = a57();
        let (p, q) = (0.35, 0.45);
        let mf = a.forward_matrix();
        let mb = a.backward_matrix();
        let pi_fx = stationary(&mf.eval(p, q).mul(&mf.eval(p, 1.0))).unwrap();
        let pi_bx = stationary(&mb.eval(p, 1.0).mul(&mb.eval(p, q))).unwrap();
        let t = a.indicator();
        let first = t.quadratic_form(&pi_fx, q, &mb.eval(p, 1.0).left_mul(&pi_bx));
        let second = t.quadratic_form(&mf.eval(p, q).left_mul(&pi_fx), 1.0, &pi_bx);
        let want = 0.5 * (first + second);
        let got = a.punctured_extrinsic_probability(p, q, &pat("1,0")).unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn catastrophic_patterns() {
        let a = a57();
        let c = a.is_catastrophic(&pat("1,0,0"));
        assert!(c.catastrophic && c.witness > 1e-3);
        assert!(a.punctured_extrinsic_probability(0.0, 0.5, &pat("1,0,0")).unwrap() > 0.0);
        assert!(!a.is_catastrophic(&pat("1,0,0,0,1,0")).catastrophic);
        assert!(!a.is_catastrophic(&pat("1,0")).catastrophic);
        assert!(!a.is_catastrophic(&pat("1")).catastrophic);
        assert!(!a.is_catastrophic(&PuncturePattern::unpunctured(4)).catastrophic);
    }

    #[test]
    fn eight_state_code_builds() {
        let a = ErasureAnalysis::new("1,15/13".parse().unwrap()).unwrap();
        let v = a.extrinsic_probability(0.5, 0.5).unwrap();
        assert!(v > 0.0 && v < 1.0);
        assert!(!a.is_catastrophic(&pat("1,0")).catastrophic);
    }
}
