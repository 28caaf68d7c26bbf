//! Executable semantics of the asynchronous number-in-hand peer-to-peer
//! model: players run in local rounds, each round sending to a set of peers,
//! optionally writing the output tape, then waiting on a set of FIFO links.

mod engine;
mod lots;
mod table;
pub mod tree;

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::bits::BitString;

pub use engine::{run, run_relaxed, Schedule};
pub use lots::assign_lots;
pub use table::{
    is_oblivious, required_executions, run_all, ExecutionTable, ObliviousWitness, DEFAULT_BUDGET,
};

/// Error raised by a player program (for example a protocol tree whose next
/// action is not determined by the player's view).
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct ProgramError(pub String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("model violation: {0}")]
    ModelViolation(String),
    #[error("player {player} is blocked in local round {round} without having written an output")]
    Deadlock { player: usize, round: usize },
    #[error("player {player} exceeded {limit} local rounds")]
    NonTermination { player: usize, limit: usize },
    #[error(
        "messages {first} and {second} on link {sender}->{receiver} (position {position}) are not prefix-free"
    )]
    SelfDelimiting {
        sender: usize,
        receiver: usize,
        position: usize,
        first: BitString,
        second: BitString,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("enumeration needs {required} executions, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u64 },
    #[error("program error at player {player}, round {round}: {source}")]
    Program {
        player: usize,
        round: usize,
        source: ProgramError,
    },
}

/// Which semantics a protocol is written for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Restricted,
    Relaxed,
}

/// The waiting phase at the end of a local round.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum Wait {
    /// Read exactly one message from each listed peer. An empty set moves
    /// straight on to the next local round.
    From(Vec<usize>),
    /// Relaxed model only: read the next message to arrive from any listed
    /// peer.
    Any(Vec<usize>),
    /// The player takes no further local rounds.
    Halt,
}

/// What a player does in one local round, as a function of its view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundPlan {
    pub sends: Vec<(usize, BitString)>,
    pub output: Option<BitString>,
    pub wait: Wait,
}

impl RoundPlan {
    pub fn new(wait: Wait) -> Self {
        Self {
            sends: Vec::new(),
            output: None,
            wait,
        }
    }

    pub fn send(mut self, to: usize, msg: BitString) -> Self {
        self.sends.push((to, msg));
        self
    }

    pub fn output(mut self, out: BitString) -> Self {
        self.output = Some(out);
        self
    }

    pub fn halt() -> Self {
        Self::new(Wait::Halt)
    }

    pub fn wait_from(from: Vec<usize>) -> Self {
        Self::new(Wait::From(from))
    }
}

/// A player's view at the start of a local round.
#[derive(Debug, Clone, Copy)]
pub struct View<'a> {
    pub player: usize,
    pub input: &'a BitString,
    pub private_tape: &'a BitString,
    pub public_tape: &'a BitString,
    /// Messages read so far, in reading order, with their senders.
    pub received: &'a [(usize, BitString)],
}

/// Per-player program: maps (player, local round, view) to the round's
/// send set, messages, output and wait set. Rounds are numbered from 1.
pub trait Program: Send + Sync {
    fn plan(&self, player: usize, round: usize, view: &View<'_>)
        -> Result<RoundPlan, ProgramError>;
}

/// Adapter for closures.
pub struct FnProgram<F>(pub F);

impl<F> Program for FnProgram<F>
where
    F: Fn(usize, usize, &View<'_>) -> Result<RoundPlan, ProgramError> + Send + Sync,
{
    fn plan(
        &self,
        player: usize,
        round: usize,
        view: &View<'_>,
    ) -> Result<RoundPlan, ProgramError> {
        (self.0)(player, round, view)
    }
}

/// The functions f_i the players are meant to compute, one output per player.
#[derive(Clone)]
pub struct FunctionFamily(Arc<FamilyFn>);

type FamilyFn = dyn Fn(&[BitString]) -> Vec<BitString> + Send + Sync;

impl FunctionFamily {
    pub fn new(f: impl Fn(&[BitString]) -> Vec<BitString> + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn eval(&self, inputs: &[BitString]) -> Vec<BitString> {
        (self.0)(inputs)
    }
}

impl fmt::Debug for FunctionFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FunctionFamily(..)")
    }
}

/// A k-player protocol together with its domains and tape lengths.
#[derive(Clone)]
pub struct ProtocolDef {
    pub name: String,
    pub k: usize,
    pub input_domains: Vec<Vec<BitString>>,
    pub output_domains: Vec<Vec<BitString>>,
    pub private_tape_bits: Vec<usize>,
    pub public_tape_bits: usize,
    pub max_local_rounds: usize,
    pub mode: Mode,
    pub program: Arc<dyn Program>,
    pub family: Option<FunctionFamily>,
}

impl fmt::Debug for ProtocolDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProtocolDef")
            .field("name", &self.name)
            .field("k", &self.k)
            .field("private_tape_bits", &self.private_tape_bits)
            .field("public_tape_bits", &self.public_tape_bits)
            .field("mode", &self.mode)
            .finish_non_exhaustive()
    }
}

impl ProtocolDef {
    pub fn total_tape_bits(&self) -> usize {
        self.private_tape_bits.iter().sum::<usize>() + self.public_tape_bits
    }

    pub fn has_private_randomness(&self) -> bool {
        self.private_tape_bits.iter().any(|&b| b > 0)
    }

    pub fn is_deterministic(&self) -> bool {
        self.total_tape_bits() == 0
    }

    /// Number of input tuples in the product domain.
    pub fn input_count(&self) -> u128 {
        self.input_domains.iter().map(|d| d.len() as u128).product()
    }

    /// Input tuples of the product domain, player 0 most significant.
    pub fn input_tuples(&self) -> Vec<Vec<BitString>> {
        let mut out: Vec<Vec<BitString>> = vec![Vec::new()];
        for dom in &self.input_domains {
            let mut next = Vec::with_capacity(out.len() * dom.len());
            for prefix in &out {
                for v in dom {
                    let mut t = prefix.clone();
                    t.push(v.clone());
                    next.push(t);
                }
            }
            out = next;
        }
        out
    }

    /// Splits a concatenated tape string into per-player private tapes and
    /// the public tape (private tapes first, in player order).
    pub fn split_tapes(&self, all: &BitString) -> Tapes {
        let mut pos = 0;
        let mut private = Vec::with_capacity(self.k);
        for &len in &self.private_tape_bits {
            private.push(all.slice(pos, pos + len));
            pos += len;
        }
        let public = all.slice(pos, pos + self.public_tape_bits);
        Tapes { private, public }
    }

    pub(crate) fn check_shape(&self) -> Result<(), SimError> {
        let k = self.k;
        if k == 0 {
            return Err(SimError::InvalidArgument("protocol has no players".into()));
        }
        if self.input_domains.len() != k
            || self.output_domains.len() != k
            || self.private_tape_bits.len() != k
        {
            return Err(SimError::InvalidArgument(format!(
                "per-player fields of {:?} do not all have length k={k}",
                self.name
            )));
        }
        if self.max_local_rounds == 0 {
            return Err(SimError::InvalidArgument(
                "max_local_rounds must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A complete assignment of random tapes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize)]
pub struct Tapes {
    pub private: Vec<BitString>,
    pub public: BitString,
}

impl Tapes {
    pub fn empty(k: usize) -> Self {
        Self {
            private: vec![BitString::new(); k],
            public: BitString::new(),
        }
    }

    /// Inverse of [`ProtocolDef::split_tapes`].
    pub fn concat(&self) -> BitString {
        let mut out = BitString::concat(&self.private);
        out.extend(&self.public);
        out
    }
}

/// One message of an execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MessageRecord {
    pub sender: usize,
    pub receiver: usize,
    pub content: BitString,
    /// Local round of the sender in which the message was sent.
    pub sent_round: usize,
    /// Local round of the receiver at whose end the message was read.
    pub read_round: usize,
    /// Position of the message on its directed link, from 0.
    pub link_index: usize,
    /// Lot number, from 1.
    pub lot: usize,
    /// Position in the global lot order, from 0.
    pub global_index: usize,
}

/// The communication pattern of one local round.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct RoundPattern {
    pub sends: Vec<usize>,
    pub wait: Wait,
}

/// Full record of one run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Execution {
    pub inputs: Vec<BitString>,
    pub tapes: Tapes,
    /// Per player, messages in reading order with their senders.
    pub received: Vec<Vec<(usize, BitString)>>,
    /// All messages in global lot order.
    pub messages: Vec<MessageRecord>,
    pub outputs: Vec<BitString>,
    /// Per player, the send set and wait set of each executed local round.
    pub patterns: Vec<Vec<RoundPattern>>,
    pub total_bits: usize,
}

impl Execution {
    pub fn k(&self) -> usize {
        self.inputs.len()
    }

    /// Pi_i: contents read by player i, by local round and then sender.
    pub fn transcript(&self, i: usize) -> BitString {
        BitString::concat(self.received[i].iter().map(|(_, m)| m))
    }

    /// Messages sent by player i, by local round and then recipient.
    pub fn sent_transcript(&self, i: usize) -> BitString {
        let mut sent: Vec<&MessageRecord> =
            self.messages.iter().filter(|m| m.sender == i).collect();
        sent.sort_by_key(|m| (m.sent_round, m.receiver));
        BitString::concat(sent.into_iter().map(|m| &m.content))
    }

    /// Bidirectional transcript: received messages followed by sent ones.
    pub fn bidirectional(&self, i: usize) -> BitString {
        let mut t = self.transcript(i);
        t.extend(&self.sent_transcript(i));
        t
    }

    /// Bidirectional transcript interleaved per local round: the messages
    /// sent in round j, then those read at the end of round j.
    pub fn bidirectional_by_round(&self, i: usize) -> BitString {
        let mut events: Vec<(usize, u8, usize, &BitString)> = Vec::new();
        for m in &self.messages {
            if m.sender == i {
                events.push((m.sent_round, 0, m.receiver, &m.content));
            }
            if m.receiver == i {
                events.push((m.read_round, 1, m.sender, &m.content));
            }
        }
        events.sort_by_key(|e| (e.0, e.1, e.2));
        BitString::concat(events.into_iter().map(|e| e.3))
    }

    /// Messages to or from player i in global lot order.
    pub fn messages_of(&self, i: usize) -> impl Iterator<Item = &MessageRecord> {
        self.messages
            .iter()
            .filter(move |m| m.sender == i || m.receiver == i)
    }

    /// Bidirectional transcript in global lot order.
    pub fn bidirectional_by_lot(&self, i: usize) -> BitString {
        BitString::concat(self.messages_of(i).map(|m| &m.content))
    }

    /// Pi_{i->j}: everything i sent to j, in FIFO order.
    pub fn link_log(&self, i: usize, j: usize) -> BitString {
        let mut on: Vec<&MessageRecord> = self
            .messages
            .iter()
            .filter(|m| m.sender == i && m.receiver == j)
            .collect();
        on.sort_by_key(|m| m.link_index);
        BitString::concat(on.into_iter().map(|m| &m.content))
    }

    /// Pi: concatenation of all Pi_i in player order.
    pub fn full_transcript(&self) -> BitString {
        BitString::concat(
            (0..self.k())
                .map(|i| self.transcript(i))
                .collect::<Vec<_>>()
                .iter(),
        )
    }

    /// Lots as lists of directed links, in lot order.
    pub fn lot_structure(&self) -> Vec<Vec<(usize, usize)>> {
        let mut lots: Vec<Vec<(usize, usize)>> = Vec::new();
        for m in &self.messages {
            if lots.len() < m.lot {
                lots.resize(m.lot, Vec::new());
            }
            lots[m.lot - 1].push((m.sender, m.receiver));
        }
        lots
    }
}
