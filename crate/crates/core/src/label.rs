//! Label sets over the ordered proposition list and the Hamming machinery used
//! to price label revisions.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Maximum number of atomic propositions a label bitmask can hold.
pub const MAX_PROPS: usize = 32;

/// A subset of the atomic propositions, bit `i` set iff proposition `i` holds.
#[derive(
    Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct LabelSet(pub u32);

impl LabelSet {
    pub const EMPTY: LabelSet = LabelSet(0);

    pub fn from_props<I: IntoIterator<Item = usize>>(props: I) -> Self {
        props.into_iter().fold(Self::EMPTY, |l, i| l.with(i))
    }

    /// All propositions `0..n`.
    pub fn full(n: usize) -> Self {
        if n >= 32 {
            LabelSet(u32::MAX)
        } else {
            LabelSet((1u32 << n) - 1)
        }
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn contains(self, prop: usize) -> bool {
        prop < MAX_PROPS && self.0 & (1 << prop) != 0
    }

    pub fn with(self, prop: usize) -> Self {
        LabelSet(self.0 | (1 << prop))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn props(self) -> impl Iterator<Item = usize> {
        (0..MAX_PROPS).filter(move |&i| self.contains(i))
    }

    /// Every label set over `n` propositions, in increasing bitmask order.
    pub fn all(n: usize) -> impl Iterator<Item = LabelSet> {
        (0..(1u64 << n)).map(|b| LabelSet(b as u32))
    }

    /// Renders the set with proposition names, e.g. `{Base1,Obs}`.
    pub fn display<'a>(self, names: &'a [String]) -> impl fmt::Display + 'a {
        LabelDisplay { set: self, names }
    }
}

struct LabelDisplay<'a> {
    set: LabelSet,
    names: &'a [String],
}

impl fmt::Display for LabelDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, i) in self.set.props().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            match self.names.get(i) {
                Some(n) => f.write_str(n)?,
                None => write!(f, "#{i}")?,
            }
        }
        f.write_str("}")
    }
}

/// The 0/1 evaluation vector of `l` over `num_props` ordered propositions.
pub fn eval_vector(l: LabelSet, num_props: usize) -> Vec<u8> {
    (0..num_props).map(|i| u8::from(l.contains(i))).collect()
}

/// ℓ1 distance between the evaluation vectors of two label sets.
pub fn rho(a: LabelSet, b: LabelSet) -> u32 {
    (a.0 ^ b.0).count_ones()
}

/// Distance from `l` to a set of letters: 0 on membership, otherwise the
/// smallest [`rho`]. `None` stands for +∞ and is returned for an empty set.
pub fn dist(l: LabelSet, letters: &[LabelSet]) -> Option<u32> {
    letters.iter().map(|&x| rho(l, x)).min()
}
