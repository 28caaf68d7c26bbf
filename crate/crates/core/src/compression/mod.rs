//! Compression of oblivious public-coin protocols down to their information
//! cost, and the coordinator-phase conversion that makes any protocol
//! oblivious.
//!
//! Player transcripts here are the player's sent and received messages in
//! global lot order. For an oblivious protocol this is a fixed permutation
//! of every other bidirectional ordering.

mod check;
mod lcp;
mod oblivious;
mod run;
mod tree;

use std::collections::HashMap;

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rayon::prelude::*;

use crate::bits::BitString;
use crate::measures::{Analysis, InputDistribution, MeasureError};
use crate::model::{ObliviousWitness, ProtocolDef, SimError};

pub use check::{compression_theorem_check, CompressionReport, TheoremCheck};
pub use lcp::{
    field_width, lcp_answer, lcp_exact, lcp_randomized, randomized_parameters, LcpAnswer, LcpBox,
    LcpCall, LcpMode,
};
pub use oblivious::{audit_obliviousized, obliviousize, phase_bits, ObliviousAudit, Obliviousized};
pub use run::CompressRun;
pub use tree::{Leaf, Node, TranscriptTree};

#[derive(Debug, thiserror::Error)]
pub enum CompressionError {
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("protocol {protocol:?} is not oblivious: player {} follows different patterns in round {}", .witness.player, .witness.round)]
    NotOblivious {
        protocol: String,
        witness: Box<ObliviousWitness>,
    },
    #[error("protocol {0:?} uses private randomness; publicize it first")]
    NotPublicCoin(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("inconsistent transcripts: {0}")]
    Inconsistent(String),
    #[error("unparseable transcript: {0}")]
    Unparseable(String),
    #[error("internal invariant violated: {0}")]
    InvariantBreach(String),
    #[error("measured error {measured} exceeds the allowed {allowed}")]
    ErrorBound { measured: f64, allowed: f64 },
}

impl From<SimError> for CompressionError {
    fn from(e: SimError) -> Self {
        CompressionError::Measure(MeasureError::Sim(e))
    }
}

/// An enumerated oblivious public-coin protocol with every player's
/// transcript trees, ready to run the staged compression on any input.
pub struct Compressor {
    pub analysis: Analysis,
    /// (sender, receiver) of each message in global lot order.
    slots: Vec<(usize, usize)>,
    /// Per player, the global indices of its messages.
    player_slots: Vec<Vec<usize>>,
    /// Contents seen at each global index across all executions.
    codebooks: Vec<Vec<BitString>>,
    trees: HashMap<(usize, BitString, usize), TranscriptTree>,
    cc: usize,
}

impl Compressor {
    pub fn new(
        p: &ProtocolDef,
        mu: InputDistribution,
        budget: u64,
    ) -> Result<Self, CompressionError> {
        if p.has_private_randomness() {
            return Err(CompressionError::NotPublicCoin(p.name.clone()));
        }
        let analysis = Analysis::from_protocol(p, mu, budget)?;
        Self::from_analysis(analysis)
    }

    pub fn from_analysis(analysis: Analysis) -> Result<Self, CompressionError> {
        let p = analysis.def().clone();
        if p.has_private_randomness() {
            return Err(CompressionError::NotPublicCoin(p.name.clone()));
        }
        let table = &analysis.table;
        if let Some(w) = table.oblivious_witness() {
            return Err(CompressionError::NotOblivious {
                protocol: p.name.clone(),
                witness: Box::new(w),
            });
        }
        let k = p.k;
        let reference = &table.executions[0];
        let layout: Vec<(usize, usize, usize)> = reference
            .messages
            .iter()
            .map(|m| (m.sender, m.receiver, m.link_index))
            .collect();
        let mut codebooks: Vec<Vec<BitString>> = vec![Vec::new(); layout.len()];
        for e in &table.executions {
            let here: Vec<(usize, usize, usize)> = e
                .messages
                .iter()
                .map(|m| (m.sender, m.receiver, m.link_index))
                .collect();
            if here != layout {
                return Err(CompressionError::Inconsistent(format!(
                    "global message order differs on inputs {:?}",
                    e.inputs
                )));
            }
            for (g, m) in e.messages.iter().enumerate() {
                if !codebooks[g].contains(&m.content) {
                    codebooks[g].push(m.content.clone());
                }
            }
        }
        for book in &mut codebooks {
            book.sort();
        }
        let slots: Vec<(usize, usize)> = layout.iter().map(|&(s, r, _)| (s, r)).collect();
        let player_slots: Vec<Vec<usize>> = (0..k)
            .map(|i| {
                (0..slots.len())
                    .filter(|&g| slots[g].0 == i || slots[g].1 == i)
                    .collect()
            })
            .collect();
        let cc = table
            .executions
            .iter()
            .map(|e| e.total_bits)
            .max()
            .unwrap_or(0);

        let mu_of: HashMap<&[BitString], &BigRational> = analysis
            .mu
            .weights()
            .iter()
            .map(|(x, w)| (x.as_slice(), w))
            .collect();
        let mut keys = Vec::new();
        for i in 0..k {
            for xi in &p.input_domains[i] {
                let marginal: BigRational = analysis
                    .mu
                    .weights()
                    .iter()
                    .filter(|(x, _)| &x[i] == xi)
                    .map(|(_, w)| w)
                    .sum();
                if marginal.is_positive() {
                    for ti in 0..table.tape_count() {
                        keys.push((i, xi.clone(), ti, marginal.clone()));
                    }
                }
            }
        }
        let trees = keys
            .into_par_iter()
            .map(|(i, xi, ti, marginal)| {
                let entries = table
                    .inputs
                    .iter()
                    .enumerate()
                    .filter(|(_, x)| x[i] == xi)
                    .map(|(n, x)| {
                        let e = table.get(n, ti);
                        let w = mu_of
                            .get(x.as_slice())
                            .map(|&w| w / &marginal)
                            .unwrap_or_else(BigRational::zero);
                        let msgs = e.messages_of(i).map(|m| m.content.clone()).collect();
                        (msgs, e.outputs[i].clone(), w)
                    });
                let tree = TranscriptTree::build(i, entries)?;
                Ok(((i, xi, ti), tree))
            })
            .collect::<Result<HashMap<_, _>, CompressionError>>()?;

        Ok(Self {
            analysis,
            slots,
            player_slots,
            codebooks,
            trees,
            cc,
        })
    }

    pub fn def(&self) -> &ProtocolDef {
        self.analysis.def()
    }

    pub fn k(&self) -> usize {
        self.def().k
    }

    pub fn cc(&self) -> usize {
        self.cc
    }

    /// (sender, receiver) of each message in global lot order.
    pub fn message_layout(&self) -> &[(usize, usize)] {
        &self.slots
    }

    pub fn player_slots(&self, i: usize) -> &[usize] {
        &self.player_slots[i]
    }

    /// Player i's tree given its input and the public tape with index `ti`.
    pub fn tree(
        &self,
        i: usize,
        xi: &BitString,
        ti: usize,
    ) -> Result<&TranscriptTree, CompressionError> {
        self.trees.get(&(i, xi.clone(), ti)).ok_or_else(|| {
            CompressionError::InvalidArgument(format!(
                "no tree for player {i} with input {xi} (zero mass) and tape {ti}"
            ))
        })
    }

    /// The true lot-ordered transcripts of an execution.
    pub fn truth(&self, xi: usize, ti: usize) -> Vec<BitString> {
        let e = self.analysis.table.get(xi, ti);
        (0..self.k()).map(|i| e.bidirectional_by_lot(i)).collect()
    }

    /// (input index, tape index, probability) of every execution with
    /// positive mass.
    pub fn weighted_runs(&self) -> Vec<(usize, usize, BigRational)> {
        self.analysis
            .rows()
            .iter()
            .zip(self.analysis.joint().outcomes())
            .map(|(&(xi, ti), (_, w))| (xi, ti, w.clone()))
            .collect()
    }

    /// Splits a transcript of player i into its messages using the contents
    /// each message position can take.
    pub fn parse(&self, i: usize, t: &BitString) -> Result<Vec<BitString>, CompressionError> {
        let mut pos = 0;
        let mut out = Vec::with_capacity(self.player_slots[i].len());
        for &g in &self.player_slots[i] {
            let rest = t.slice(pos.min(t.len()), t.len());
            let m = self.codebooks[g]
                .iter()
                .find(|c| c.is_prefix_of(&rest))
                .ok_or_else(|| {
                    CompressionError::Unparseable(format!(
                        "player {i}: no possible message {g} at bit {pos} of {t}"
                    ))
                })?;
            pos += m.len();
            out.push(m.clone());
        }
        if pos != t.len() {
            return Err(CompressionError::Unparseable(format!(
                "player {i}: {} trailing bits in {t}",
                t.len() - pos
            )));
        }
        Ok(out)
    }

    /// Whether every message appears with the same content in the
    /// transcripts of its sender and its receiver.
    pub fn is_coherent(&self, profile: &[BitString]) -> Result<bool, CompressionError> {
        if profile.len() != self.k() {
            return Err(CompressionError::InvalidArgument(format!(
                "profile has {} transcripts for {} players",
                profile.len(),
                self.k()
            )));
        }
        let parsed = profile
            .iter()
            .enumerate()
            .map(|(i, t)| self.parse(i, t))
            .collect::<Result<Vec<_>, _>>()?;
        let mut pos = vec![0usize; self.k()];
        for &(s, r) in &self.slots {
            if parsed[s][pos[s]] != parsed[r][pos[r]] {
                return Ok(false);
            }
            pos[s] += 1;
            pos[r] += 1;
        }
        Ok(true)
    }

    /// Every coherent tuple of candidate leaves for one input and tape.
    pub fn coherent_profiles(
        &self,
        xi: usize,
        ti: usize,
    ) -> Result<Vec<Vec<BitString>>, CompressionError> {
        let x = &self.analysis.table.inputs[xi];
        let sets = (0..self.k())
            .map(|i| {
                Ok(self
                    .tree(i, &x[i], ti)?
                    .leaves
                    .iter()
                    .map(|l| l.transcript.clone())
                    .collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>, CompressionError>>()?;
        let mut found = Vec::new();
        let mut idx = vec![0usize; sets.len()];
        loop {
            let profile: Vec<BitString> =
                idx.iter().zip(&sets).map(|(&n, s)| s[n].clone()).collect();
            if self.is_coherent(&profile)? {
                found.push(profile);
            }
            let mut d = 0;
            loop {
                if d == idx.len() {
                    return Ok(found);
                }
                idx[d] += 1;
                if idx[d] < sets[d].len() {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
        }
    }

    /// H(Pi_i | X_i R^p) for every player, with Pi_i the lot-ordered
    /// bidirectional transcript.
    pub fn entropy_terms(&self) -> Result<Vec<f64>, CompressionError> {
        (0..self.k())
            .map(|i| {
                Ok(self
                    .analysis
                    .cond_entropy(&[format!("PIL{i}")], &[format!("X{i}"), "RP".into()])?)
            })
            .collect()
    }
}
