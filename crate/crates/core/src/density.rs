//! Ensemble algebra and density evolution for irregular turbo codes.
//!
//! Information bits of degree `d` are repeated `d` times before the
//! interleaver; a fraction of the parity stream is then punctured to reach the
//! target rate. On the erasure channel the erasure probability carried along
//! the propagation tree evolves as
//!
//! ```text
//! x_{l+1} = p0 * lambda( P_ext,X(x_l, p0) )
//! ```
//!
//! and the threshold is the largest `p0` for which this recursion is driven to
//! zero.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::erasure::{ErasureAnalysis, PuncturePattern};
use crate::error::{Error, Result};
use crate::trellis::RscSpec;

const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Node-perspective degree profile: the fraction `f_d` of information bits
/// repeated `d` times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeProfile {
    fractions: BTreeMap<usize, f64>,
}

impl DegreeProfile {
    pub fn new(fractions: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (d, f) in fractions {
            if d < 2 {
                return Err(Error::InvalidProfile(format!("degree {d} below 2")));
            }
            if !f.is_finite() || f < 0.0 {
                return Err(Error::InvalidProfile(format!("f_{d} = {f} is not a nonnegative number")));
            }
            *map.entry(d).or_insert(0.0) += f;
        }
        let total: f64 = map.values().sum();
        if map.is_empty() || (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::InvalidProfile(format!("fractions sum to {total}, expected 1")));
        }
        Ok(Self { fractions: map })
    }

    /// Scales arbitrary nonnegative weights onto the simplex.
    pub fn normalized(weights: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let weights: Vec<(usize, f64)> = weights.into_iter().collect();
        let total: f64 = weights.iter().map(|&(_, w)| w.max(0.0)).sum();
        if !total.is_finite() || total <= 0.0 {
            return Err(Error::InvalidProfile("all weights are zero".into()));
        }
        Self::new(weights.into_iter().map(|(d, w)| (d, w.max(0.0) / total)))
    }

    /// All mass on a single degree.
    pub fn regular(degree: usize) -> Result<Self> {
        Self::new([(degree, 1.0)])
    }

    pub fn fractions(&self) -> &BTreeMap<usize, f64> {
        &self.fractions
    }

    pub fn fraction(&self, d: usize) -> f64 {
        self.fractions.get(&d).copied().unwrap_or(0.0)
    }

    pub fn max_degree(&self) -> usize {
        *self.fractions.keys().next_back().expect("profile is never empty")
    }

    /// `d_bar = sum d f_d`.
    pub fn average_degree(&self) -> f64 {
        self.fractions.iter().map(|(&d, &f)| d as f64 * f).sum()
    }

    pub fn edge_distribution(&self) -> EdgeDistribution {
        let dbar = self.average_degree();
        EdgeDistribution {
            lambda: self.fractions.iter().map(|(&d, &f)| (d, d as f64 * f / dbar)).collect(),
        }
    }

    /// Number of bits of each degree for `info_len` bits: floors of `f_d K`,
    /// with the shortfall given to the largest fractional remainders (lower
    /// degree first on ties).
    pub fn degree_counts(&self, info_len: usize) -> Vec<(usize, usize)> {
        let exact: Vec<(usize, f64)> = self.fractions.iter().map(|(&d, &f)| (d, f * info_len as f64)).collect();
        let mut counts: Vec<(usize, usize)> = exact.iter().map(|&(d, x)| (d, x.floor() as usize)).collect();
        let assigned: usize = counts.iter().map(|c| c.1).sum();
        let mut order: Vec<usize> = (0..exact.len()).collect();
        order.sort_by(|&a, &b| {
            let ra = exact[a].1 - exact[a].1.floor();
            let rb = exact[b].1 - exact[b].1.floor();
            rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
        });
        for &i in order.iter().cycle().take(info_len.saturating_sub(assigned)) {
            counts[i].1 += 1;
        }
        counts
    }
}

impl fmt::Display for DegreeProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.fractions.iter().map(|(d, x)| format!("f{d}={x}")).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl FromStr for DegreeProfile {
    type Err = Error;

    /// Parses `f2=0.801,f4=0.101,...` (the `f` prefix is optional).
    fn from_str(s: &str) -> Result<Self> {
        let bad = |t: &str| Error::InvalidProfile(format!("cannot parse '{t}', expected e.g. f2=0.5"));
        let mut entries = Vec::new();
        for term in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (d, f) = term.split_once('=').ok_or_else(|| bad(term))?;
            let d = d.trim().trim_start_matches(['f', 'F']);
            let d: usize = d.parse().map_err(|_| bad(term))?;
            let f: f64 = f.trim().parse().map_err(|_| bad(term))?;
            entries.push((d, f));
        }
        Self::new(entries)
    }
}

/// Edge-perspective distribution `lambda_d = d f_d / d_bar`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeDistribution {
    lambda: BTreeMap<usize, f64>,
}

impl EdgeDistribution {
    pub fn coefficients(&self) -> &BTreeMap<usize, f64> {
        &self.lambda
    }

    /// `lambda(x) = sum_d lambda_d x^(d-1)`.
    pub fn eval(&self, x: f64) -> f64 {
        self.lambda.iter().map(|(&d, &l)| l * x.powi(d as i32 - 1)).sum()
    }

    /// Inverse map back to the node perspective: `f_d ∝ lambda_d / d`.
    pub fn to_profile(&self) -> Result<DegreeProfile> {
        DegreeProfile::normalized(self.lambda.iter().map(|(&d, &l)| (d, l / d as f64)))
    }
}

/// Rate of the constituent code after puncturing a fraction `phi` of parity.
pub fn punctured_rate(rho0: f64, phi: f64) -> Result<f64> {
    if !(rho0 > 0.0 && rho0 < 1.0) {
        return Err(Error::InvalidParameter(format!("mother rate {rho0} outside (0, 1)")));
    }
    if !(0.0..1.0).contains(&phi) {
        return Err(Error::InvalidParameter(format!("puncturing fraction {phi} outside [0, 1)")));
    }
    Ok(1.0 / (1.0 + (1.0 - phi) * (1.0 / rho0 - 1.0)))
}

/// Overall rate `R_c = 1 / (1 + (1/rho - 1) d_bar)`.
pub fn coding_rate(profile: &DegreeProfile, rho: f64) -> f64 {
    1.0 / (1.0 + (1.0 / rho - 1.0) * profile.average_degree())
}

/// Puncturing fraction giving overall rate `target`.
pub fn puncture_fraction_for_rate(profile: &DegreeProfile, rho0: f64, target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidParameter(format!("target rate {target} outside (0, 1)")));
    }
    let phi = 1.0 - (1.0 / target - 1.0) / (profile.average_degree() * (1.0 / rho0 - 1.0));
    // Round-off at the phi = 0 boundary.
    let phi = if phi.abs() < 1e-12 { 0.0 } else { phi };
    if !(0.0..1.0).contains(&phi) {
        return Err(Error::InfeasibleRate { target, phi });
    }
    Ok(phi)
}

/// Largest period considered when none is given.
pub const MAX_DEFAULT_PERIOD: usize = 64;

/// Largest mismatch between a pattern's transmitted fraction and the design
/// value for the pattern to count as matching it.
pub const PERIOD_MATCH_TOLERANCE: f64 = 2e-3;

/// Candidate periods for `phi`, most preferred first: periods where
/// `period * (1 - phi)` is an integer (within `1e-6`), then periods whose
/// closest pattern is within [`PERIOD_MATCH_TOLERANCE`] of `phi`, each group
/// in increasing order, then the period up to 64 with the smallest mismatch.
pub fn candidate_periods(phi: f64) -> Vec<usize> {
    let mismatch = |g: usize| {
        let w = g as f64 * (1.0 - phi);
        (w - w.round()).abs() / g as f64
    };
    let exact = (1..=MAX_DEFAULT_PERIOD).filter(|&g| mismatch(g) * (g as f64) < 1e-6);
    let close = (1..=MAX_DEFAULT_PERIOD).filter(|&g| mismatch(g) * (g as f64) >= 1e-6 && mismatch(g) <= PERIOD_MATCH_TOLERANCE);
    let mut out: Vec<usize> = exact.chain(close).collect();
    if out.is_empty() {
        let best = (1..=MAX_DEFAULT_PERIOD)
            .min_by(|&a, &b| mismatch(a).total_cmp(&mismatch(b)).then(a.cmp(&b)))
            .unwrap();
        out.push(best);
    }
    out
}

/// First candidate period of [`candidate_periods`].
pub fn default_period(phi: f64) -> usize {
    candidate_periods(phi)[0]
}

/// Cyclic gaps between consecutive transmitted positions.
fn max_cyclic_gap(bits: &[u8]) -> usize {
    let ones: Vec<usize> = bits.iter().enumerate().filter(|(_, &b)| b == 1).map(|(i, _)| i).collect();
    if ones.is_empty() {
        return usize::MAX;
    }
    let n = bits.len();
    (0..ones.len())
        .map(|i| {
            let next = ones[(i + 1) % ones.len()];
            (next + n - ones[i] - 1) % n + 1
        })
        .max()
        .unwrap()
}

/// Rotates so the pattern starts with a transmitted position.
fn canonical(bits: Vec<u8>) -> PuncturePattern {
    let first = bits.iter().position(|&b| b == 1).unwrap_or(0);
    PuncturePattern::new(bits).expect("bits are binary").rotated(first)
}

/// Largest enumeration of same-weight patterns attempted before giving up.
const PATTERN_SEARCH_LIMIT: u128 = 200_000;

/// Most uniform non-catastrophic pattern for puncturing fraction `phi`.
///
/// Transmitted positions start at `ceil(i * period / w)`, `i = 1..=w`. If that
/// pattern is catastrophic its cyclic shifts are tried, then single-position
/// moves of one transmitted bit, then (for small periods) every pattern of the
/// same weight ordered by largest cyclic gap and then lexicographically.
///
/// Without an explicit period every entry of [`candidate_periods`] is tried in
/// turn and the first one admitting a safe pattern is used.
pub fn uniform_pattern(phi: f64, period: Option<usize>, analysis: &ErasureAnalysis) -> Result<PuncturePattern> {
    if !(0.0..1.0).contains(&phi) {
        return Err(Error::InvalidParameter(format!("puncturing fraction {phi} outside [0, 1)")));
    }
    match period {
        Some(period) => pattern_with_period(phi, period, analysis),
        None => {
            let mut last = None;
            for period in candidate_periods(phi) {
                match pattern_with_period(phi, period, analysis) {
                    Ok(x) => return Ok(x),
                    Err(e @ Error::NoSafePattern { .. }) => last = Some(e),
                    Err(e) => return Err(e),
                }
            }
            Err(last.expect("at least one candidate period"))
        }
    }
}

fn pattern_with_period(phi: f64, period: usize, analysis: &ErasureAnalysis) -> Result<PuncturePattern> {
    if period == 0 {
        return Err(Error::InvalidParameter("period must be positive".into()));
    }
    let weight = ((period as f64 * (1.0 - phi)).round() as usize).clamp(1, period);
    let safe = |x: &PuncturePattern| !analysis.is_catastrophic(x).catastrophic;

    let mut bits = vec![0u8; period];
    for i in 1..=weight {
        let pos = (i * period).div_ceil(weight);
        bits[pos - 1] = 1;
    }
    let base = canonical(bits.clone());
    for k in 0..period {
        let cand = canonical(base.rotated(k).bits().to_vec());
        if safe(&cand) {
            return Ok(cand);
        }
    }

    let ones: Vec<usize> = bits.iter().enumerate().filter(|(_, &b)| b == 1).map(|(i, _)| i).collect();
    for shift in 1..period {
        for &i in &ones {
            for dir in [1isize, -1] {
                let j = (i as isize + dir * shift as isize).rem_euclid(period as isize) as usize;
                if bits[j] == 1 {
                    continue;
                }
                let mut moved = bits.clone();
                moved[i] = 0;
                moved[j] = 1;
                let cand = canonical(moved);
                if safe(&cand) {
                    return Ok(cand);
                }
            }
        }
    }

    if binomial(period as u128 - 1, weight as u128 - 1) <= PATTERN_SEARCH_LIMIT {
        let mut all = Vec::new();
        let mut current = vec![1u8];
        enumerate_patterns(&mut current, period, weight - 1, &mut all);
        all.sort_by(|a, b| max_cyclic_gap(a).cmp(&max_cyclic_gap(b)).then(a.cmp(b)));
        for bits in all {
            let cand = PuncturePattern::new(bits)?;
            if safe(&cand) {
                return Ok(cand);
            }
        }
    }
    Err(Error::NoSafePattern { period, weight })
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

fn enumerate_patterns(current: &mut Vec<u8>, len: usize, ones_left: usize, out: &mut Vec<Vec<u8>>) {
    let remaining = len - current.len();
    if ones_left > remaining {
        return;
    }
    if remaining == 0 {
        out.push(current.clone());
        return;
    }
    for bit in [0u8, 1] {
        if bit == 1 && ones_left == 0 {
            continue;
        }
        current.push(bit);
        enumerate_patterns(current, len, ones_left - bit as usize, out);
        current.pop();
    }
}

/// An irregular turbo ensemble with one rate-1/2 RSC constituent.
#[derive(Debug, Clone, Serialize)]
pub struct TurboEnsemble {
    pub constituent: RscSpec,
    pub profile: DegreeProfile,
    pub pattern: PuncturePattern,
    /// Number of information bits `K`.
    pub info_len: usize,
    /// Interleaver size `N = sum_d d * n_d` with the rounded per-degree counts.
    pub interleaver_len: usize,
    pub degree_counts: Vec<(usize, usize)>,
    pub mother_rate: f64,
    /// Design puncturing fraction.
    pub puncture_fraction: f64,
    pub constituent_rate: f64,
    pub coding_rate: f64,
}

impl TurboEnsemble {
    /// Ensemble with an explicit puncturing pattern; the design fraction is the
    /// pattern's own.
    pub fn with_pattern(constituent: RscSpec, profile: DegreeProfile, pattern: PuncturePattern, info_len: usize) -> Result<Self> {
        let phi = pattern.puncture_fraction();
        Self::build(constituent, profile, pattern, phi, info_len)
    }

    /// Ensemble hitting `target_rate`, with the most uniform safe pattern.
    pub fn for_rate(
        analysis: &ErasureAnalysis,
        profile: DegreeProfile,
        target_rate: f64,
        period: Option<usize>,
        info_len: usize,
    ) -> Result<Self> {
        let constituent = *analysis.spec();
        let phi = puncture_fraction_for_rate(&profile, constituent.rate(), target_rate)?;
        let pattern = uniform_pattern(phi, period, analysis)?;
        Self::build(constituent, profile, pattern, phi, info_len)
    }

    fn build(constituent: RscSpec, profile: DegreeProfile, pattern: PuncturePattern, phi: f64, info_len: usize) -> Result<Self> {
        constituent.validate()?;
        if info_len == 0 {
            return Err(Error::InvalidParameter("information length must be positive".into()));
        }
        let rho0 = constituent.rate();
        let rho = punctured_rate(rho0, phi)?;
        if (pattern.puncture_fraction() - phi).abs() > 1.0 / pattern.period() as f64 + 1e-12 {
            return Err(Error::InvalidPattern(format!(
                "pattern punctures {} but the ensemble needs {phi}",
                pattern.puncture_fraction()
            )));
        }
        let coding_rate = coding_rate(&profile, rho);
        let degree_counts = profile.degree_counts(info_len);
        let interleaver_len = degree_counts.iter().map(|&(d, n)| d * n).sum();
        Ok(Self {
            constituent,
            profile,
            pattern,
            info_len,
            interleaver_len,
            degree_counts,
            mother_rate: rho0,
            puncture_fraction: phi,
            constituent_rate: rho,
            coding_rate,
        })
    }

    /// Degree of each information bit, lowest degrees first.
    pub fn bit_degrees(&self) -> Vec<usize> {
        self.degree_counts.iter().flat_map(|&(d, n)| std::iter::repeat_n(d, n)).collect()
    }

    /// Transmitted length `K + #unpunctured parity` of one codeword.
    pub fn codeword_len(&self) -> usize {
        self.info_len + self.pattern.transmitted_count(self.interleaver_len)
    }
}

/// Settings of the threshold search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdOptions {
    /// Final bracket width of the bisection on `p0`.
    pub width: f64,
    pub grid_points: usize,
    /// Erasure probabilities below this count as recovered.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        Self { width: 1e-4, grid_points: 512, tolerance: 1e-7, max_iterations: 10_000 }
    }
}

impl ThresholdOptions {
    pub fn coarse() -> Self {
        Self { width: 1e-3, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdResult {
    pub threshold: f64,
    pub catastrophic: bool,
}

/// One density-evolution iteration `p0 * lambda(P_ext,X(x, p0))`.
pub fn de_step(x: f64, p0: f64, lambda: &EdgeDistribution, analysis: &ErasureAnalysis, pattern: &PuncturePattern) -> Result<f64> {
    let ext = analysis.punctured_extrinsic_probability(x, p0, pattern)?;
    Ok((p0 * lambda.eval(ext)).clamp(0.0, p0))
}

/// Whether decoding succeeds at channel erasure probability `p0`: the DE map
/// stays below the diagonal on the grid and the iteration from `p0` reaches
/// the recovery tolerance.
pub fn recovers(
    p0: f64,
    lambda: &EdgeDistribution,
    analysis: &ErasureAnalysis,
    pattern: &PuncturePattern,
    opts: &ThresholdOptions,
) -> Result<bool> {
    let n = opts.grid_points.max(2);
    let lo = opts.tolerance;
    if p0 <= lo {
        return Ok(true);
    }
    // Coarse-to-fine order so that violations surface early.
    let mut stride = (n - 1).next_power_of_two();
    let mut visited = vec![false; n];
    while stride >= 1 {
        for i in (0..n).step_by(stride) {
            if std::mem::replace(&mut visited[i], true) {
                continue;
            }
            let x = lo + (p0 - lo) * i as f64 / (n - 1) as f64;
            if de_step(x, p0, lambda, analysis, pattern)? > x {
                return Ok(false);
            }
        }
        stride /= 2;
    }

    let mut x = p0;
    for _ in 0..opts.max_iterations {
        let next = de_step(x, p0, lambda, analysis, pattern)?;
        if next < opts.tolerance {
            return Ok(true);
        }
        if (x - next).abs() < 1e-15 {
            return Ok(false);
        }
        x = next;
    }
    Ok(false)
}

/// Largest `p0` from which density evolution converges to zero, found by
/// bisection on `[0, 1]`.
pub fn threshold(
    lambda: &EdgeDistribution,
    analysis: &ErasureAnalysis,
    pattern: &PuncturePattern,
    opts: &ThresholdOptions,
) -> Result<ThresholdResult> {
    if analysis.is_catastrophic(pattern).catastrophic {
        return Ok(ThresholdResult { threshold: 0.0, catastrophic: true });
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > opts.width {
        let mid = 0.5 * (lo + hi);
        if recovers(mid, lambda, analysis, pattern, opts)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ThresholdResult { threshold: lo, catastrophic: false })
}
