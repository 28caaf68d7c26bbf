use std::fmt::Write as _;

use num_rational::BigRational;
use serde::Serialize;

use super::lcp::field_width;
use super::{CompressionError, Compressor, LcpBox, TranscriptTree};
use crate::bits::BitString;

/// Outcome of one staged compression run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompressRun {
    /// Final candidate transcripts.
    pub profile: Vec<BitString>,
    pub outputs: Vec<BitString>,
    /// Whether the profile equals the true transcripts.
    pub correct: bool,
    /// Stages in which some player moved.
    pub moves: usize,
    /// All stages, including the final one that found no disagreement.
    pub stages: usize,
    pub moves_per_player: Vec<usize>,
    /// log2(1/w) of each true transcript's leaf.
    pub log_inverse_weights: Vec<f64>,
    pub lcp_calls: u64,
    pub lcp_bits: u64,
    pub broadcast_bits: u64,
    /// Stages in which several pairs attained the minimum index.
    pub ties: usize,
    /// The run stopped because the mover had nowhere to go (only possible
    /// with an erring lcp box).
    pub stalled: bool,
    pub trace: Vec<String>,
}

impl CompressRun {
    pub fn bits(&self) -> u64 {
        self.lcp_bits + self.broadcast_bits
    }
}

/// A conversation between two players as seen in one candidate, with the
/// global index and start offset of each message.
struct Conversation {
    bits: BitString,
    starts: Vec<(usize, usize)>,
}

impl Conversation {
    /// Global index of the message containing bit `pos`, if in range.
    fn message_at(&self, pos: usize) -> Option<(usize, usize)> {
        if pos >= self.bits.len() {
            return None;
        }
        let n = self.starts.partition_point(|&(_, s)| s <= pos) - 1;
        let (g, s) = self.starts[n];
        Some((g, pos - s))
    }
}

impl Compressor {
    fn conversation(&self, owner: usize, other: usize, messages: &[BitString]) -> Conversation {
        let mut bits = BitString::new();
        let mut starts = Vec::new();
        for (&g, m) in self.player_slots(owner).iter().zip(messages) {
            let (s, r) = self.message_layout()[g];
            if s == other || r == other {
                starts.push((g, bits.len()));
                bits.extend(m);
            }
        }
        Conversation { bits, starts }
    }

    /// Offset of message `g` inside player i's transcript.
    fn offset_in(&self, i: usize, messages: &[BitString], g: usize) -> Option<usize> {
        let n = self.player_slots(i).iter().position(|&h| h == g)?;
        Some(messages[..n].iter().map(|m| m.len()).sum())
    }

    /// Runs the staged search for the coherent profile on one input tuple
    /// and public tape. With an exact box, every stage is checked against
    /// the true transcripts and any deviation is an internal error.
    pub fn compress_run(
        &self,
        xi: usize,
        ti: usize,
        lcp: &mut LcpBox,
        trace: bool,
    ) -> Result<CompressRun, CompressionError> {
        let k = self.k();
        let pairs: Vec<(usize, usize)> = (0..k)
            .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
            .collect();
        let exact = lcp.is_exact();
        let x = self.analysis.table.inputs[xi].clone();
        let trees: Vec<&TranscriptTree> = (0..k)
            .map(|i| self.tree(i, &x[i], ti))
            .collect::<Result<_, _>>()?;
        let truth = self.truth(xi, ti);
        let truth_leaves: Vec<usize> = (0..k)
            .map(|i| {
                trees[i].find_leaf(&truth[i]).ok_or_else(|| {
                    CompressionError::InvariantBreach(format!(
                        "player {i}'s true transcript {} is not a leaf of its tree",
                        truth[i]
                    ))
                })
            })
            .collect::<Result<_, _>>()?;
        let q_width = field_width(self.cc());
        let node_total: usize = trees.iter().map(|t| t.nodes.len()).sum();

        let mut tau: Vec<usize> = trees.iter().map(|t| t.root()).collect();
        let mut run = CompressRun {
            profile: Vec::new(),
            outputs: Vec::new(),
            correct: false,
            moves: 0,
            stages: 0,
            moves_per_player: vec![0; k],
            log_inverse_weights: (0..k)
                .map(|i| trees[i].log_inverse_weight(truth_leaves[i]))
                .collect(),
            lcp_calls: 0,
            lcp_bits: 0,
            broadcast_bits: 0,
            ties: 0,
            stalled: false,
            trace: Vec::new(),
        };

        let cands = loop {
            run.stages += 1;
            if exact {
                for i in 0..k {
                    if !trees[i].is_ancestor(tau[i], truth_leaves[i]) {
                        return Err(CompressionError::InvariantBreach(format!(
                            "stage {}: player {i} left the path to its true transcript",
                            run.stages
                        )));
                    }
                }
            }
            let cands: Vec<usize> = (0..k).map(|i| trees[i].candidate_leaf(tau[i])).collect();
            let msgs: Vec<&[BitString]> = (0..k)
                .map(|i| {
                    trees[i]
                        .leaf_of(cands[i])
                        .expect("candidate is a leaf")
                        .messages
                        .as_slice()
                })
                .collect();

            // q[i][j]: (global index, offset inside the message) of the first
            // disagreement between i and j.
            let mut q: Vec<Vec<Option<(usize, usize)>>> = vec![vec![None; k]; k];
            for &(i, j) in &pairs {
                let a = self.conversation(i, j, msgs[i]);
                let b = self.conversation(j, i, msgs[j]);
                let call = lcp.call(&a.bits, &b.bits);
                run.lcp_calls += 1;
                run.lcp_bits += call.bits;
                let at = call
                    .answer
                    .index()
                    .and_then(|pos| a.message_at(pos).or_else(|| b.message_at(pos)));
                q[i][j] = at;
                q[j][i] = at;
            }
            run.broadcast_bits += (k * (k - 1)) as u64 * q_width;

            let mut best: Option<(usize, usize, usize, usize)> = None;
            let mut tied = false;
            for &(i, j) in &pairs {
                if let Some((g, off)) = q[i][j] {
                    match best {
                        Some((bg, ..)) if bg < g => {}
                        Some((bg, ..)) if bg == g => tied = true,
                        _ => best = Some((g, off, i, j)),
                    }
                }
            }
            if trace {
                let mut line = format!("stage {}", run.stages);
                for &(i, j) in &pairs {
                    match q[i][j] {
                        Some((g, _)) => write!(line, " q{i}{j}={g}").unwrap(),
                        None => write!(line, " q{i}{j}=inf").unwrap(),
                    }
                }
                match best {
                    Some((g, ..)) => write!(line, " Q={g}").unwrap(),
                    None => line.push_str(" Q=inf done"),
                }
                run.trace.push(line);
            }
            let Some((g, off, _, _)) = best else {
                break cands;
            };
            if tied {
                run.ties += 1;
            }
            let (sender, mover) = self.message_layout()[g];
            let leaf = trees[mover]
                .leaf_of(cands[mover])
                .expect("candidate is a leaf");
            let d = self.offset_in(mover, &leaf.messages, g).ok_or_else(|| {
                CompressionError::InvariantBreach(format!("message {g} is not player {mover}'s"))
            })? + off;

            let tree = trees[mover];
            let mut hat = cands[mover];
            while hat != tau[mover] && tree.node(hat).prefix.len() > d {
                hat = tree
                    .node(hat)
                    .parent
                    .expect("tau is an ancestor of the candidate");
            }
            if exact && tree.node(hat).prefix.len() != d {
                return Err(CompressionError::InvariantBreach(format!(
                    "stage {}: player {mover} has no branching node at bit {d}",
                    run.stages
                )));
            }
            let Some(children) = tree.node(hat).children else {
                if exact {
                    return Err(CompressionError::InvariantBreach(format!(
                        "stage {}: player {mover} must move but sits on a leaf",
                        run.stages
                    )));
                }
                run.stalled = true;
                break cands;
            };
            let toward = tree.leaf_of(cands[mover]).expect("leaf").transcript.bits()
                [tree.node(hat).prefix.len()];
            let next = children[usize::from(!toward)];
            let old: &BigRational = &tree.node(tau[mover]).weight;
            if &tree.node(next).weight * BigRational::from_integer(2.into()) > *old {
                return Err(CompressionError::InvariantBreach(format!(
                    "stage {}: player {mover}'s node weight {} is more than half of {}",
                    run.stages,
                    tree.node(next).weight,
                    old
                )));
            }
            if trace {
                let last = run.trace.last_mut().expect("trace line");
                write!(last, " sender={sender} mover={mover} bit={d}").unwrap();
                if tied {
                    last.push_str(" tie");
                }
            }
            tau[mover] = next;
            run.moves += 1;
            run.moves_per_player[mover] += 1;
            if run.moves > node_total {
                return Err(CompressionError::InvariantBreach(
                    "stage loop does not terminate".into(),
                ));
            }
        };

        run.profile = (0..k)
            .map(|i| trees[i].leaf_of(cands[i]).expect("leaf").transcript.clone())
            .collect();
        run.outputs = (0..k)
            .map(|i| trees[i].leaf_of(cands[i]).expect("leaf").output.clone())
            .collect();
        run.correct = run.profile == truth;
        if exact && !run.correct {
            return Err(CompressionError::InvariantBreach(format!(
                "exact run on input {x:?} ended with a wrong profile"
            )));
        }
        Ok(run)
    }
}
