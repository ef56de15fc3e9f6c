use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::trellis::Trellis;

/// Support of a BCJR state distribution under the all-zero codeword.
///
/// On the erasure channel every reachable forward or backward distribution is
/// uniform over its support, so the support alone identifies it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct StateMask(u64);

impl StateMask {
    pub const ZERO_STATE: StateMask = StateMask(1);

    pub fn new(bits: u64) -> Result<Self> {
        if bits & 1 == 0 {
            return Err(Error::InvalidParameter(format!(
                "state mask {bits:#b} must contain state 0"
            )));
        }
        Ok(Self(bits))
    }

    pub fn full(num_states: usize) -> Self {
        Self(if num_states >= 64 { u64::MAX } else { (1u64 << num_states) - 1 })
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, state: usize) -> bool {
        (self.0 >> state) & 1 == 1
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn states(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..64).filter(move |s| (bits >> s) & 1 == 1)
    }

    /// The distribution this mask stands for, as a dense probability vector.
    pub fn distribution(self, num_states: usize) -> Vec<f64> {
        let w = 1.0 / self.len() as f64;
        (0..num_states).map(|s| if self.contains(s) { w } else { 0.0 }).collect()
    }
}

impl fmt::Display for StateMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let states: Vec<String> = self.states().map(|s| s.to_string()).collect();
        write!(f, "{{{}}}", states.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

/// Channel outcome of one trellis step: `(info_erased, parity_erased)`, in the
/// order used for the outcome probabilities `(1-p)(1-q), p(1-q), (1-p)q, pq`.
pub const OUTCOMES: [(bool, bool); 4] = [(false, false), (true, false), (false, true), (true, true)];

#[inline]
fn edge_allowed(input: u8, parity: u8, info_erased: bool, parity_erased: bool) -> bool {
    (input == 0 || info_erased) && (parity == 0 || parity_erased)
}

/// One forward BCJR update on the all-zero codeword: the states reachable from
/// `mask` through branches consistent with the observation.
pub fn forward_step(mask: StateMask, trellis: &Trellis, info_erased: bool, parity_erased: bool) -> Result<StateMask> {
    let mut out = 0u64;
    for s in mask.states() {
        for b in 0..2 {
            let e = trellis.edge(s, b);
            if edge_allowed(e.input, e.parity, info_erased, parity_erased) {
                out |= 1 << e.to;
            }
        }
    }
    checked(out)
}

/// Mirror of [`forward_step`] running right to left.
pub fn backward_step(mask: StateMask, trellis: &Trellis, info_erased: bool, parity_erased: bool) -> Result<StateMask> {
    let mut out = 0u64;
    for s in mask.states() {
        for e in trellis.incoming(s) {
            if edge_allowed(e.input, e.parity, info_erased, parity_erased) {
                out |= 1 << e.from;
            }
        }
    }
    checked(out)
}

fn checked(bits: u64) -> Result<StateMask> {
    if bits & 1 == 0 {
        return Err(Error::Internal(
            "state 0 dropped from the support; the all-zero path must always survive".into(),
        ));
    }
    Ok(StateMask(bits))
}

pub fn step(direction: Direction, mask: StateMask, trellis: &Trellis, info_erased: bool, parity_erased: bool) -> Result<StateMask> {
    match direction {
        Direction::Forward => forward_step(mask, trellis, info_erased, parity_erased),
        Direction::Backward => backward_step(mask, trellis, info_erased, parity_erased),
    }
}

/// Upper bound on the alphabet size for memory `nu`:
/// `sum_{a=0..nu} C(2^nu - 1, 2^a - 1)`.
pub fn alphabet_bound(nu: u32) -> u128 {
    let n = (1u128 << nu) - 1;
    (0..=nu).map(|a| binomial(n, (1u128 << a) - 1)).sum()
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// The finite set of state distributions reachable by one recursion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistributionAlphabet {
    direction: Direction,
    members: Vec<StateMask>,
    index_of: HashMap<StateMask, usize>,
}

impl DistributionAlphabet {
    /// Closure of `{{0}}` under the four channel outcomes, ordered by support
    /// size and then by mask value. The singleton `{0}` is always member 0.
    pub fn enumerate(trellis: &Trellis, direction: Direction) -> Result<Self> {
        let mut seen = BTreeSet::from([StateMask::ZERO_STATE]);
        let mut queue = VecDeque::from([StateMask::ZERO_STATE]);
        while let Some(m) = queue.pop_front() {
            for (ie, pe) in OUTCOMES {
                let next = step(direction, m, trellis, ie, pe)?;
                if seen.insert(next) {
                    queue.push_back(next);
                }
            }
        }
        let bound = alphabet_bound(trellis.memory());
        if seen.len() as u128 > bound {
            return Err(Error::AlphabetBound { size: seen.len(), bound: bound as usize });
        }
        let mut members: Vec<StateMask> = seen.into_iter().collect();
        members.sort_by_key(|m| (m.len(), m.bits()));
        let index_of = members.iter().enumerate().map(|(i, &m)| (m, i)).collect();
        Ok(Self { direction, members, index_of })
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn members(&self) -> &[StateMask] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn index_of(&self, mask: StateMask) -> Option<usize> {
        self.index_of.get(&mask).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(code: &str) -> Trellis {
        Trellis::new(code.parse().unwrap()).unwrap()
    }

    fn mask(states: &[usize]) -> StateMask {
        StateMask::new(states.iter().fold(0, |acc, s| acc | 1 << s)).unwrap()
    }

    #[test]
    fn single_steps_from_known_state() {
        let t = t("1,5/7");
        let z = StateMask::ZERO_STATE;
        assert_eq!(forward_step(z, &t, false, false).unwrap(), z);
        assert_eq!(backward_step(z, &t, false, false).unwrap(), z);
        // Both erased: forward lands on (1/2,0,1/2,0), backward on (1/2,1/2,0,0).
        assert_eq!(forward_step(z, &t, true, true).unwrap(), mask(&[0, 2]));
        assert_eq!(backward_step(z, &t, true, true).unwrap(), mask(&[0, 1]));
    }

    #[test]
    fn full_mask_steps_match_edge_enumeration() {
        let t = t("1,5/7");
        let full = StateMask::full(4);
        // Edges with b = 0 and c = 0: 0->0 and 1->2.
        assert_eq!(forward_step(full, &t, false, false).unwrap(), mask(&[0, 2]));
        // Backward with b = 0, c = 0: predecessors 0 (of 0) and 1 (of 2).
        assert_eq!(backward_step(full, &t, false, false).unwrap(), mask(&[0, 1]));
        for m in [mask(&[0]), mask(&[0, 1]), mask(&[0, 3]), full] {
            // Info erased only: any input, parity must be zero.
            let want = t
                .edges()
                .iter()
                .filter(|e| m.contains(e.to) && e.parity == 0)
                .fold(0u64, |acc, e| acc | 1 << e.from);
            assert_eq!(backward_step(m, &t, true, false).unwrap().bits(), want);
        }
    }

    #[test]
    fn alphabet_of_57_is_the_five_listed_distributions() {
        let t = t("1,5/7");
        for dir in [Direction::Forward, Direction::Backward] {
            let a = DistributionAlphabet::enumerate(&t, dir).unwrap();
            let want = [mask(&[0]), mask(&[0, 1]), mask(&[0, 2]), mask(&[0, 3]), StateMask::full(4)];
            assert_eq!(a.members(), &want);
            assert_eq!(a.index_of(mask(&[0, 3])), Some(3));
        }
    }

    #[test]
    fn alphabet_bounds() {
        assert_eq!(alphabet_bound(1), 2);
        assert_eq!(alphabet_bound(2), 5);
        assert_eq!(alphabet_bound(3), 44);
        for code in ["1,1/3", "1,2/3"] {
            let a = DistributionAlphabet::enumerate(&t(code), Direction::Forward).unwrap();
            assert!(a.len() <= 2);
        }
        for dir in [Direction::Forward, Direction::Backward] {
            let a = DistributionAlphabet::enumerate(&t("1,15/13"), dir).unwrap();
            assert!(a.len() <= 44);
            assert!(a.members().iter().all(|m| m.len().is_power_of_two()));
        }
    }

    #[test]
    fn alphabet_is_closed() {
        for code in ["1,5/7", "1,15/13", "1,7/5", "1,17/15"] {
            let t = t(code);
            for dir in [Direction::Forward, Direction::Backward] {
                let a = DistributionAlphabet::enumerate(&t, dir).unwrap();
                assert_eq!(a.members()[0], StateMask::ZERO_STATE);
                for &m in a.members() {
                    for (ie, pe) in OUTCOMES {
                        let n = step(dir, m, &t, ie, pe).unwrap();
                        assert!(a.index_of(n).is_some());
                    }
                }
            }
        }
    }

    #[test]
    fn mask_requires_zero_state() {
        assert!(StateMask::new(0b110).is_err());
        assert_eq!(mask(&[0, 2]).to_string(), "{0,2}");
        assert_eq!(mask(&[0, 2]).distribution(4), vec![0.5, 0.0, 0.5, 0.0]);
    }
}
