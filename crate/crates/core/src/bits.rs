//! Binary state vectors and deduplicated sets of them.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{check_len, CrbmError, Result};

/// A fixed-length vector of 0/1 values (targets `v`, hidden states `h`).
///
/// Ordering is lexicographic over the bit sequence, which is also the order
/// of the packed (MSB-first) representation.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BitVector {
    bits: Vec<u8>,
}

impl BitVector {
    /// Checks that every entry is 0 or 1.
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(CrbmError::invalid(format!(
                "bit {pos} has value {} (expected 0 or 1)",
                bits[pos]
            )));
        }
        Ok(BitVector { bits })
    }

    pub fn zeros(len: usize) -> Self {
        BitVector { bits: vec![0; len] }
    }

    pub fn ones(len: usize) -> Self {
        BitVector { bits: vec![1; len] }
    }

    pub fn from_bools(bits: impl IntoIterator<Item = bool>) -> Self {
        BitVector {
            bits: bits.into_iter().map(u8::from).collect(),
        }
    }

    /// Bit `i` is 1 iff `values[i] >= threshold`.
    pub fn threshold(values: &[f64], threshold: f64) -> Self {
        Self::from_bools(values.iter().map(|&x| x >= threshold))
    }

    /// The `index`-th configuration of `len` bits, bit 0 being the most
    /// significant. Positions above bit 63 of `index` are 0.
    pub fn from_index(index: u64, len: usize) -> Self {
        Self::from_bools((0..len).map(|i| {
            u32::try_from(len - 1 - i)
                .ok()
                .and_then(|s| index.checked_shr(s))
                .is_some_and(|x| x & 1 == 1)
        }))
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.bits[i] == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        self.bits[i] = u8::from(value);
    }

    #[inline]
    pub fn as_slice(&self) -> &[u8] {
        &self.bits
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.bits.iter().map(|&b| b == 1)
    }

    pub fn to_real(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| f64::from(b)).collect()
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    pub fn hamming(&self, other: &BitVector) -> usize {
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| a != b)
            .count()
    }

    /// MSB-first packing into `ceil(len / 8)` bytes.
    pub fn pack(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.bits.len().div_ceil(8)];
        for (i, &b) in self.bits.iter().enumerate() {
            out[i / 8] |= b << (7 - i % 8);
        }
        out
    }

    pub fn unpack(bytes: &[u8], len: usize) -> Result<Self> {
        check_len("packed bit payload", len.div_ceil(8), bytes.len())?;
        Ok(Self::from_bools(
            (0..len).map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1 == 1),
        ))
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector(")?;
        for &b in &self.bits {
            write!(f, "{b}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// A deduplicated set of equal-length target configurations, iterated in
/// canonical (sorted) order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CandidateSet {
    width: Option<usize>,
    members: BTreeSet<BitVector>,
}

impl CandidateSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts `v`, returning `false` if it was already present.
    pub fn insert(&mut self, v: BitVector) -> Result<bool> {
        match self.width {
            Some(w) => check_len("candidate width", w, v.len())?,
            None => self.width = Some(v.len()),
        }
        Ok(self.members.insert(v))
    }

    pub fn from_members(members: impl IntoIterator<Item = BitVector>) -> Result<Self> {
        let mut set = Self::new();
        for v in members {
            set.insert(v)?;
        }
        Ok(set)
    }

    pub fn extend_from(&mut self, other: &CandidateSet) -> Result<()> {
        for v in other.iter() {
            self.insert(v.clone())?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Bit length of the members, if any has been inserted.
    pub fn width(&self) -> Option<usize> {
        self.width
    }

    pub fn contains(&self, v: &BitVector) -> bool {
        self.members.contains(v)
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &BitVector> {
        self.members.iter()
    }

    /// All `2^len` configurations.
    pub fn full_space(len: usize) -> Result<Self> {
        if len > 20 {
            return Err(CrbmError::TooLargeToEnumerate(len));
        }
        Self::from_members((0..1u64 << len).map(|i| BitVector::from_index(i, len)))
    }
}

impl<'a> IntoIterator for &'a CandidateSet {
    type Item = &'a BitVector;
    type IntoIter = std::collections::btree_set::Iter<'a, BitVector>;

    fn into_iter(self) -> Self::IntoIter {
        self.members.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_non_binary_entries() {
        assert!(BitVector::new(vec![0, 1, 2]).is_err());
        assert!(BitVector::new(vec![0, 1, 1]).is_ok());
    }

    #[test]
    fn candidate_set_dedups_and_sorts() {
        let a = BitVector::new(vec![1, 0, 1]).unwrap();
        let b = BitVector::new(vec![0, 1, 1]).unwrap();
        let mut set = CandidateSet::new();
        assert!(set.insert(a.clone()).unwrap());
        assert!(set.insert(b.clone()).unwrap());
        assert!(!set.insert(a.clone()).unwrap());
        assert_eq!(set.len(), 2);
        let order: Vec<_> = set.iter().cloned().collect();
        assert_eq!(order, vec![b, a]);
        assert!(set.insert(BitVector::zeros(2)).is_err());
    }

    #[test]
    fn full_space_enumerates_in_index_order() {
        let set = CandidateSet::full_space(3).unwrap();
        let listed: Vec<String> = set.iter().map(|v| v.to_string()).collect();
        assert_eq!(
            listed,
            ["000", "001", "010", "011", "100", "101", "110", "111"]
        );
        assert!(CandidateSet::full_space(21).is_err());
    }

    #[test]
    fn threshold_ties_go_to_one() {
        let v = BitVector::threshold(&[0.5, 0.49, 0.51], 0.5);
        assert_eq!(v.as_slice(), &[1, 0, 1]);
    }

    proptest! {
        #[test]
        fn pack_roundtrip(bits in proptest::collection::vec(any::<bool>(), 0..70)) {
            let v = BitVector::from_bools(bits);
            let packed = v.pack();
            prop_assert_eq!(BitVector::unpack(&packed, v.len()).unwrap(), v);
        }

        #[test]
        fn packed_order_agrees_with_bit_order(
            a in proptest::collection::vec(any::<bool>(), 12),
            b in proptest::collection::vec(any::<bool>(), 12),
        ) {
            let a = BitVector::from_bools(a);
            let b = BitVector::from_bools(b);
            prop_assert_eq!(a.cmp(&b), a.pack().cmp(&b.pack()));
        }
    }
}
