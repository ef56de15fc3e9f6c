use std::fmt;
use std::ops::{Add, AddAssign};

use serde::Serialize;

use super::mask::{step, DistributionAlphabet, OUTCOMES};
use crate::error::Result;
use crate::trellis::Trellis;

/// Polynomial `c1 + cp*p + cq*q + cpq*p*q` with integer coefficients.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize)]
pub struct Bilinear {
    pub c1: i64,
    pub cp: i64,
    pub cq: i64,
    pub cpq: i64,
}

impl Bilinear {
    pub const ZERO: Bilinear = Bilinear::new(0, 0, 0, 0);
    pub const ONE: Bilinear = Bilinear::new(1, 0, 0, 0);

    pub const fn new(c1: i64, cp: i64, cq: i64, cpq: i64) -> Self {
        Self { c1, cp, cq, cpq }
    }

    /// Probability of each channel outcome, in [`OUTCOMES`] order.
    pub const OUTCOME_PROBABILITIES: [Bilinear; 4] = [
        Bilinear::new(1, -1, -1, 1),
        Bilinear::new(0, 1, 0, -1),
        Bilinear::new(0, 0, 1, -1),
        Bilinear::new(0, 0, 0, 1),
    ];

    pub fn eval(&self, p: f64, q: f64) -> f64 {
        let v = self.c1 as f64 + self.cp as f64 * p + self.cq as f64 * q + self.cpq as f64 * p * q;
        v.clamp(0.0, 1.0)
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::ZERO
    }
}

impl Add for Bilinear {
    type Output = Bilinear;

    fn add(self, o: Bilinear) -> Bilinear {
        Bilinear::new(self.c1 + o.c1, self.cp + o.cp, self.cq + o.cq, self.cpq + o.cpq)
    }
}

impl AddAssign for Bilinear {
    fn add_assign(&mut self, o: Bilinear) {
        *self = *self + o;
    }
}

impl fmt::Display for Bilinear {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms = Vec::new();
        for (c, name) in [(self.c1, ""), (self.cp, "p"), (self.cq, "q"), (self.cpq, "pq")] {
            match (c, name) {
                (0, _) => {}
                (c, "") => terms.push(c.to_string()),
                (1, n) => terms.push(n.to_string()),
                (-1, n) => terms.push(format!("-{n}")),
                (c, n) => terms.push(format!("{c}{n}")),
            }
        }
        if terms.is_empty() {
            return write!(f, "0");
        }
        let mut s = terms[0].clone();
        for t in &terms[1..] {
            match t.strip_prefix('-') {
                Some(rest) => s.push_str(&format!(" - {rest}")),
                None => s.push_str(&format!(" + {t}")),
            }
        }
        write!(f, "{s}")
    }
}

/// Square matrix of bilinear polynomials in `(p, q)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BilinearMatrix {
    dim: usize,
    entries: Vec<Bilinear>,
}

impl BilinearMatrix {
    /// Transition matrix of the state-distribution Markov chain: entry `(i, j)`
    /// collects the probabilities of the outcomes mapping member `i` to `j`.
    pub fn transition(trellis: &Trellis, alphabet: &DistributionAlphabet) -> Result<Self> {
        let dim = alphabet.len();
        let mut entries = vec![Bilinear::ZERO; dim * dim];
        for (i, &m) in alphabet.members().iter().enumerate() {
            for (k, (ie, pe)) in OUTCOMES.into_iter().enumerate() {
                let next = step(alphabet.direction(), m, trellis, ie, pe)?;
                let j = alphabet.index_of(next).ok_or_else(|| {
                    crate::Error::Internal(format!("alphabet not closed: {m} -> {next}"))
                })?;
                entries[i * dim + j] += Bilinear::OUTCOME_PROBABILITIES[k];
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> Bilinear {
        self.entries[i * self.dim + j]
    }

    pub fn row_sum(&self, i: usize) -> Bilinear {
        (0..self.dim).fold(Bilinear::ZERO, |acc, j| acc + self.get(i, j))
    }

    pub fn eval(&self, p: f64, q: f64) -> Matrix {
        Matrix {
            dim: self.dim,
            data: self.entries.iter().map(|e| e.eval(p, q)).collect(),
        }
    }
}

/// Conditional output-erasure indicator `T(q) = q*A + (1-q)*B`, where `A`
/// applies when the parity of the step is erased and `B` when it is received.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ErasureIndicator {
    rows: usize,
    cols: usize,
    erased: Vec<u8>,
    received: Vec<u8>,
}

impl ErasureIndicator {
    pub fn new(trellis: &Trellis, forward: &DistributionAlphabet, backward: &DistributionAlphabet) -> Self {
        let rows = forward.len();
        let cols = backward.len();
        let mut erased = vec![0u8; rows * cols];
        let mut received = vec![0u8; rows * cols];
        for (i, f) in forward.members().iter().enumerate() {
            for (j, b) in backward.members().iter().enumerate() {
                // Which information-bit hypotheses survive, with any parity or
                // with parity observed as 0.
                let (mut any, mut zero) = ([false; 2], [false; 2]);
                for e in trellis.edges() {
                    if f.contains(e.from) && b.contains(e.to) {
                        any[e.input as usize] = true;
                        if e.parity == 0 {
                            zero[e.input as usize] = true;
                        }
                    }
                }
                erased[i * cols + j] = (any[0] && any[1]) as u8;
                received[i * cols + j] = (zero[0] && zero[1]) as u8;
            }
        }
        Self { rows, cols, erased, received }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn erased(&self, i: usize, j: usize) -> u8 {
        self.erased[i * self.cols + j]
    }

    pub fn received(&self, i: usize, j: usize) -> u8 {
        self.received[i * self.cols + j]
    }

    /// Symbolic entry as a polynomial in `q` alone.
    pub fn entry(&self, i: usize, j: usize) -> Bilinear {
        let a = self.erased(i, j) as i64;
        let b = self.received(i, j) as i64;
        Bilinear::new(b, 0, a - b, 0)
    }

    /// `pi_f * T(q) * pi_b^t`.
    pub fn quadratic_form(&self, forward: &[f64], q: f64, backward: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (i, &fi) in forward.iter().enumerate() {
            if fi == 0.0 {
                continue;
            }
            let row = i * self.cols;
            let mut inner = 0.0;
            for (j, &bj) in backward.iter().enumerate() {
                let t = q * self.erased[row + j] as f64 + (1.0 - q) * self.received[row + j] as f64;
                inner += t * bj;
            }
            acc += fi * inner;
        }
        acc
    }
}

/// Dense row-major square matrix of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Self { dim, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let dim = rows.len();
        assert!(rows.iter().all(|r| r.len() == dim), "matrix must be square");
        Self { dim, data: rows.concat() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        let n = self.dim;
        debug_assert_eq!(n, other.dim);
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            let out = &mut data[i * n..(i + 1) * n];
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Matrix { dim: n, data }
    }

    /// Row vector times matrix.
    pub fn left_mul(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n];
        self.left_mul_into(v, &mut out);
        out
    }

    #[inline]
    pub fn left_mul_into(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, &m) in out.iter_mut().zip(self.row(i)) {
                *o += vi * m;
            }
        }
    }

    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.dim)
            .map(|i| (self.row(i).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::erasure::mask::Direction;

    #[test]
    fn bilinear_display() {
        assert_eq!(Bilinear::new(1, -1, -1, 1).to_string(), "1 - p - q + pq");
        assert_eq!(Bilinear::new(0, 1, 0, -1).to_string(), "p - pq");
        assert_eq!(Bilinear::ZERO.to_string(), "0");
        assert_eq!(Bilinear::new(1, 0, 0, -1).to_string(), "1 - pq");
    }

    #[test]
    fn rows_are_stochastic_symbolically() {
        for code in ["1,5/7", "1,15/13", "1,7/5"] {
            let t = Trellis::new(code.parse().unwrap()).unwrap();
            for dir in [Direction::Forward, Direction::Backward] {
                let a = DistributionAlphabet::enumerate(&t, dir).unwrap();
                let m = BilinearMatrix::transition(&t, &a).unwrap();
                for i in 0..m.dim() {
                    assert_eq!(m.row_sum(i), Bilinear::ONE);
                }
            }
        }
    }

    #[test]
    fn no_erasure_rows_are_deterministic() {
        let t = Trellis::new("1,15/13".parse().unwrap()).unwrap();
        let a = DistributionAlphabet::enumerate(&t, Direction::Forward).unwrap();
        let m = BilinearMatrix::transition(&t, &a).unwrap().eval(0.0, 0.0);
        for i in 0..m.dim() {
            assert_eq!(m.row(i).iter().filter(|&&x| x == 1.0).count(), 1);
            assert_eq!(m.row(i).iter().filter(|&&x| x == 0.0).count(), m.dim() - 1);
        }
    }

    #[test]
    fn matrix_products() {
        let a = Matrix::from_rows(&[vec![0.5, 0.5], vec![0.25, 0.75]]);
        let i = Matrix::identity(2);
        assert_eq!(a.mul(&i), a);
        let a2 = a.mul(&a);
        assert!((a2.get(0, 0) - 0.375).abs() < 1e-15);
        assert!(a2.max_row_sum_error() < 1e-15);
        assert_eq!(a.left_mul(&[1.0, 0.0]), vec![0.5, 0.5]);
    }
}
