//! Bit strings used for inputs, tapes, messages and transcripts.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// An owned, ordered sequence of bits.
///
/// Displayed and parsed as a string of `0`/`1` characters; the empty string is
/// the empty bit string.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString(Vec<bool>);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid bit character {0:?} (expected '0' or '1')")]
pub struct ParseBitsError(pub char);

impl BitString {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    pub fn from_bits(bits: impl IntoIterator<Item = bool>) -> Self {
        Self(bits.into_iter().collect())
    }

    /// The `width` low-order bits of `value`, most significant first.
    pub fn from_uint(value: u64, width: usize) -> Self {
        Self(
            (0..width)
                .rev()
                .map(|i| i < 64 && (value >> i) & 1 == 1)
                .collect(),
        )
    }

    /// Interprets the bits as an unsigned integer, most significant first.
    pub fn to_uint(&self) -> u64 {
        self.0
            .iter()
            .fold(0u64, |acc, &b| (acc << 1) | u64::from(b))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![false; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn get(&self, idx: usize) -> Option<bool> {
        self.0.get(idx).copied()
    }

    pub fn push(&mut self, bit: bool) {
        self.0.push(bit);
    }

    pub fn extend(&mut self, other: &BitString) {
        self.0.extend_from_slice(&other.0);
    }

    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a BitString>) -> BitString {
        let mut out = BitString::new();
        for p in parts {
            out.extend(p);
        }
        out
    }

    pub fn slice(&self, start: usize, end: usize) -> BitString {
        Self(self.0[start..end].to_vec())
    }

    pub fn prefix(&self, len: usize) -> BitString {
        self.slice(0, len)
    }

    pub fn is_prefix_of(&self, other: &BitString) -> bool {
        other.0.starts_with(&self.0)
    }

    /// Bitwise XOR of two strings of equal length.
    pub fn xor(&self, other: &BitString) -> BitString {
        assert_eq!(self.len(), other.len(), "xor of unequal lengths");
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a ^ b).collect())
    }

    /// Index of the first position where the strings differ, comparing only
    /// the common length.
    pub fn first_difference(&self, other: &BitString) -> Option<usize> {
        self.0.iter().zip(&other.0).position(|(a, b)| a != b)
    }

    /// Length of the longest common prefix.
    pub fn common_prefix_len(&self, other: &BitString) -> usize {
        self.first_difference(other)
            .unwrap_or_else(|| self.len().min(other.len()))
    }

    /// All bit strings of the given length in lexicographic order.
    pub fn all_of_len(len: usize) -> impl Iterator<Item = BitString> {
        assert!(len < 64, "enumeration width too large");
        (0..(1u64 << len)).map(move |v| BitString::from_uint(v, len))
    }

    /// Packs the bits into 64-bit words, first bit in the most significant
    /// position of word 0.
    pub fn to_words(&self) -> Vec<u64> {
        let mut words = vec![0u64; self.len().div_ceil(64)];
        for (i, &b) in self.0.iter().enumerate() {
            if b {
                words[i / 64] |= 1 << (63 - (i % 64));
            }
        }
        words
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{self}\"")
    }
}

impl FromStr for BitString {
    type Err = ParseBitsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(ParseBitsError(other)),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(BitString)
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Shorthand for literal bit strings in code and tests; panics on bad input.
pub fn bits(s: &str) -> BitString {
    s.parse().expect("literal bit string")
}

/// True when no string in the set is a proper prefix of another.
pub fn is_prefix_free<'a>(set: impl IntoIterator<Item = &'a BitString>) -> bool {
    let mut v: Vec<&BitString> = set.into_iter().collect();
    v.sort();
    v.dedup();
    // After sorting, a string that prefixes another sorts immediately before
    // some string it prefixes.
    v.windows(2).all(|w| !w[0].is_prefix_of(w[1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_round_trip() {
        let b = bits("010011");
        assert_eq!(b.to_string(), "010011");
        assert_eq!(BitString::new().to_string(), "");
        assert!("012".parse::<BitString>().is_err());
    }

    #[test]
    fn uint_conversions() {
        assert_eq!(BitString::from_uint(5, 4), bits("0101"));
        assert_eq!(bits("0101").to_uint(), 5);
        assert_eq!(BitString::all_of_len(2).count(), 4);
    }

    #[test]
    fn prefix_free_detection() {
        assert!(is_prefix_free(&[bits("0"), bits("10"), bits("11")]));
        assert!(!is_prefix_free(&[bits("0"), bits("01")]));
        assert!(is_prefix_free(&[bits("01"), bits("01")]));
        assert!(!is_prefix_free(&[bits("1"), bits("00"), bits("10")]));
    }

    #[test]
    fn first_difference_and_lcp() {
        assert_eq!(bits("0101").first_difference(&bits("0111")), Some(2));
        assert_eq!(bits("10").common_prefix_len(&bits("1")), 1);
        assert_eq!(bits("").first_difference(&bits("")), None);
    }

    #[test]
    fn word_packing() {
        let b = bits("1000000000000000000000000000000000000000000000000000000000000001");
        assert_eq!(b.to_words(), vec![(1u64 << 63) | 1]);
        assert_eq!(bits("11").to_words(), vec![3u64 << 62]);
    }
}
