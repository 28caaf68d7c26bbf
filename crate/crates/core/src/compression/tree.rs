use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use super::CompressionError;
use crate::bits::BitString;

/// One possible transcript of the tree's owner.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Leaf {
    pub transcript: BitString,
    /// Contents of the owner's messages, in global lot order.
    pub messages: Vec<BitString>,
    pub output: BitString,
    #[serde(serialize_with = "ser_ratio")]
    pub weight: BigRational,
}

fn ser_ratio<S: serde::Serializer>(v: &BigRational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    /// The longest common prefix of the leaf transcripts below this node.
    pub prefix: BitString,
    pub weight: BigRational,
    pub parent: Option<usize>,
    /// Children keyed by the bit following `prefix`.
    pub children: Option<[usize; 2]>,
    /// Leaf index when this node is a leaf.
    pub leaf: Option<usize>,
}

/// Weighted prefix tree over the transcripts one player can see given its
/// input and the public tape. Node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptTree {
    pub owner: usize,
    pub leaves: Vec<Leaf>,
    pub nodes: Vec<Node>,
}

impl TranscriptTree {
    /// Builds the tree from (transcript, messages, output, weight) entries.
    /// Entries with the same transcript are merged; their weights add up and
    /// their outputs must agree. Weights must sum to one.
    pub fn build(
        owner: usize,
        entries: impl IntoIterator<Item = (Vec<BitString>, BitString, BigRational)>,
    ) -> Result<Self, CompressionError> {
        let mut merged: BTreeMap<BitString, Leaf> = BTreeMap::new();
        for (messages, output, weight) in entries {
            let transcript = BitString::concat(&messages);
            match merged.get_mut(&transcript) {
                Some(leaf) => {
                    if leaf.output != output || leaf.messages != messages {
                        return Err(CompressionError::Inconsistent(format!(
                            "player {owner}: transcript {transcript} maps to two different views"
                        )));
                    }
                    leaf.weight += weight;
                }
                None => {
                    merged.insert(
                        transcript.clone(),
                        Leaf {
                            transcript,
                            messages,
                            output,
                            weight,
                        },
                    );
                }
            }
        }
        let leaves: Vec<Leaf> = merged.into_values().collect();
        if leaves.is_empty() {
            return Err(CompressionError::Inconsistent(format!(
                "player {owner}: no possible transcripts"
            )));
        }
        let total: BigRational = leaves.iter().map(|l| &l.weight).sum();
        if !total.is_one() {
            return Err(CompressionError::Inconsistent(format!(
                "player {owner}: leaf weights sum to {total}"
            )));
        }
        let mut tree = TranscriptTree {
            owner,
            leaves,
            nodes: Vec::new(),
        };
        tree.build_range(0, tree.leaves.len(), None)?;
        Ok(tree)
    }

    fn build_range(
        &mut self,
        lo: usize,
        hi: usize,
        parent: Option<usize>,
    ) -> Result<usize, CompressionError> {
        let id = self.nodes.len();
        let weight: BigRational = self.leaves[lo..hi].iter().map(|l| &l.weight).sum();
        if hi - lo == 1 {
            self.nodes.push(Node {
                prefix: self.leaves[lo].transcript.clone(),
                weight,
                parent,
                children: None,
                leaf: Some(lo),
            });
            return Ok(id);
        }
        let first = &self.leaves[lo].transcript;
        let last = &self.leaves[hi - 1].transcript;
        let len = first.common_prefix_len(last);
        if len == first.len() {
            return Err(CompressionError::Inconsistent(format!(
                "player {}: transcript {first} is a prefix of {last}",
                self.owner
            )));
        }
        self.nodes.push(Node {
            prefix: first.prefix(len),
            weight,
            parent,
            children: None,
            leaf: None,
        });
        let split = lo + self.leaves[lo..hi].partition_point(|l| !l.transcript.bits()[len]);
        let zero = self.build_range(lo, split, Some(id))?;
        let one = self.build_range(split, hi, Some(id))?;
        self.nodes[id].children = Some([zero, one]);
        Ok(id)
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    /// Follows the heavier child down to a leaf; ties go to the 0-child.
    pub fn candidate_leaf(&self, mut id: usize) -> usize {
        while let Some([zero, one]) = self.nodes[id].children {
            id = if self.nodes[one].weight > self.nodes[zero].weight {
                one
            } else {
                zero
            };
        }
        id
    }

    /// The leaf node whose transcript is `t`, if any.
    pub fn find_leaf(&self, t: &BitString) -> Option<usize> {
        let mut id = self.root();
        loop {
            let node = &self.nodes[id];
            if !node.prefix.is_prefix_of(t) {
                return None;
            }
            match node.children {
                None => return (node.prefix == *t).then_some(id),
                Some(children) => {
                    let bit = t.get(node.prefix.len())?;
                    id = children[usize::from(bit)];
                }
            }
        }
    }

    /// Whether `ancestor` lies on the path from the root to `id`.
    pub fn is_ancestor(&self, ancestor: usize, mut id: usize) -> bool {
        loop {
            if id == ancestor {
                return true;
            }
            match self.nodes[id].parent {
                Some(p) => id = p,
                None => return false,
            }
        }
    }

    /// log2(1 / w) of a node's weight; infinite for weight zero.
    pub fn log_inverse_weight(&self, id: usize) -> f64 {
        let w = &self.nodes[id].weight;
        if w.is_zero() {
            f64::INFINITY
        } else {
            -w.to_f64().unwrap_or(0.0).log2()
        }
    }

    pub fn leaf_of(&self, id: usize) -> Option<&Leaf> {
        self.nodes[id].leaf.map(|l| &self.leaves[l])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::bits;
    use crate::info::ratio;

    fn tree(entries: &[(&str, i64, i64)]) -> TranscriptTree {
        TranscriptTree::build(
            0,
            entries
                .iter()
                .map(|&(t, n, d)| (vec![bits(t)], bits("0"), ratio(n, d))),
        )
        .unwrap()
    }

    #[test]
    fn nodes_are_common_prefixes() {
        let t = tree(&[("000", 1, 4), ("001", 1, 4), ("11", 1, 2)]);
        assert_eq!(t.nodes[0].prefix, bits(""));
        let [z, o] = t.nodes[0].children.unwrap();
        assert_eq!(t.nodes[z].prefix, bits("00"));
        assert_eq!(t.nodes[z].weight, ratio(1, 2));
        assert_eq!(t.nodes[o].prefix, bits("11"));
        assert_eq!(
            t.find_leaf(&bits("001")).map(|n| t.nodes[n].prefix.clone()),
            Some(bits("001"))
        );
        assert_eq!(t.find_leaf(&bits("01")), None);
    }

    #[test]
    fn candidate_leaf_rules() {
        let t = tree(&[("0", 1, 2), ("1", 1, 2)]);
        assert_eq!(t.nodes[t.candidate_leaf(0)].prefix, bits("0"));
        let t = tree(&[("0", 1, 4), ("1", 3, 4)]);
        assert_eq!(t.nodes[t.candidate_leaf(0)].prefix, bits("1"));
        let leaf = t.candidate_leaf(0);
        assert_eq!(t.candidate_leaf(leaf), leaf);
    }

    #[test]
    fn single_leaf_and_bad_sets() {
        let t = tree(&[("0101", 1, 1)]);
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.nodes[0].prefix, bits("0101"));
        let bad = TranscriptTree::build(
            0,
            [("0", 1), ("01", 1)].map(|(s, n)| (vec![bits(s)], bits("0"), ratio(n, 2))),
        );
        assert!(bad.is_err());
    }
}
