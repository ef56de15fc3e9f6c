use super::matrix::Matrix;
use crate::error::{Error, Result};

pub const STATIONARY_TOLERANCE: f64 = 1e-12;

/// Cap on the number of doublings; the last iterate is `u M^(2^k - 1)`.
pub const STATIONARY_MAX_DOUBLINGS: usize = 48;

/// Largest `|pi M - pi|` accepted for the returned vector.
const INVARIANCE_TOLERANCE: f64 = 1e-11;

/// Stationary distribution of a row-stochastic matrix by power iteration from
/// the uniform vector `u`.
///
/// The result is the average of the rows of `lim M^k`, which is what the window
/// analysis needs when the chain has several closed classes. The iterates are
/// `u M^(2^k - 1)`, obtained by squaring the matrix, and iteration stops once
/// successive iterates differ by less than `1e-12` in max norm. A periodic
/// chain either never settles or settles on a vector that is not invariant;
/// both are reported as [`Error::NoConvergence`].
pub fn stationary(m: &Matrix) -> Result<Vec<f64>> {
    let n = m.dim();
    if n == 0 {
        return Err(Error::InvalidParameter("empty matrix".into()));
    }
    let row_err = m.max_row_sum_error();
    if row_err > 1e-12 {
        return Err(Error::InvalidParameter(format!("matrix is not row-stochastic (row sum error {row_err:e})")));
    }
    if (0..n).any(|i| m.row(i).iter().any(|&x| x < 0.0)) {
        return Err(Error::InvalidParameter("matrix has negative entries".into()));
    }

    let mut power = m.clone();
    let mut cur = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..STATIONARY_MAX_DOUBLINGS {
        power.left_mul_into(&cur, &mut next);
        residual = max_diff(&cur, &next);
        std::mem::swap(&mut cur, &mut next);
        if residual < STATIONARY_TOLERANCE {
            let total: f64 = cur.iter().sum();
            cur.iter_mut().for_each(|x| *x /= total);
            let drift = max_diff(&cur, &m.left_mul(&cur));
            if drift > INVARIANCE_TOLERANCE {
                return Err(Error::NoConvergence { iterations: 1 << STATIONARY_MAX_DOUBLINGS.min(62), residual: drift });
            }
            return Ok(cur);
        }
        power = power.mul(&power);
    }
    Err(Error::NoConvergence { iterations: 1 << STATIONARY_MAX_DOUBLINGS.min(62), residual })
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
