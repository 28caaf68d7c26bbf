//! Built-in protocols: parity on a ring and on a star, the two-message AND
//! protocol, q-index queries, the relaxed-model order leak, and a small
//! two-round relay used as a compression fixture.
//!
//! Players are numbered from 0. Players that compute nothing write the fixed
//! one-bit output `0`.

use std::sync::Arc;

use serde::Serialize;

use crate::bits::BitString;
use crate::model::{
    FnProgram, FunctionFamily, Mode, Program, ProgramError, ProtocolDef, RoundPlan, View, Wait,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ZooError {
    #[error("unknown protocol {0:?}")]
    Unknown(String),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
}

/// Registry names accepted by [`by_name`].
pub const REGISTRY: &[&str] = &[
    "ring-parity",
    "star-parity",
    "and-opt",
    "q-index",
    "order-leak",
    "relay-and",
];

/// A named protocol with its parameters and a one-line description.
#[derive(Debug, Clone)]
pub struct ZooEntry {
    pub name: &'static str,
    pub params: ZooParams,
    pub def: ProtocolDef,
    pub description: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ZooParams {
    pub k: Option<usize>,
    pub n: Option<usize>,
    pub q: Option<usize>,
}

fn zero() -> BitString {
    BitString::from_bits([false])
}

fn one_bit_domain() -> Vec<BitString> {
    BitString::all_of_len(1).collect()
}

/// Bitwise parity of equal-length strings.
pub fn parity<'a>(xs: impl IntoIterator<Item = &'a BitString>) -> BitString {
    let mut it = xs.into_iter();
    let first = it.next().expect("at least one string").clone();
    it.fold(first, |acc, x| acc.xor(x))
}

fn bad(msg: impl Into<String>) -> ZooError {
    ZooError::InvalidParameters(msg.into())
}

fn perr(msg: impl Into<String>) -> ProgramError {
    ProgramError(msg.into())
}

fn last_message<'a>(view: &'a View<'_>) -> Result<&'a BitString, ProgramError> {
    view.received
        .last()
        .map(|(_, m)| m)
        .ok_or_else(|| perr("expected a message in the view"))
}

fn parity_family(k: usize) -> FunctionFamily {
    FunctionFamily::new(move |xs: &[BitString]| {
        let mut out = vec![zero(); k];
        out[0] = parity(xs);
        out
    })
}

/// Private parity around a ring. Player 0 masks its input with an n-bit
/// pad, each player XORs its input into the running value and forwards it,
/// and player 0 removes the pad from what comes back.
pub fn ring_parity(k: usize, n: usize) -> Result<ZooEntry, ZooError> {
    if k < 3 {
        return Err(bad("ring-parity needs k >= 3"));
    }
    if n == 0 {
        return Err(bad("ring-parity needs n >= 1"));
    }
    let program = FnProgram(move |i: usize, r: usize, v: &View<'_>| {
        Ok(match (i, r) {
            (0, 1) => RoundPlan::wait_from(vec![k - 1]).send(1, v.input.xor(v.private_tape)),
            (0, 2) => RoundPlan::halt().output(last_message(v)?.xor(v.private_tape)),
            (_, 1) => RoundPlan::wait_from(vec![i - 1]).output(zero()),
            (_, 2) => RoundPlan::halt().send((i + 1) % k, v.input.xor(last_message(v)?)),
            _ => return Err(perr("ring-parity has two local rounds")),
        })
    });
    let mut private = vec![0; k];
    private[0] = n;
    let mut outputs = vec![vec![zero()]; k];
    outputs[0] = BitString::all_of_len(n).collect();
    Ok(ZooEntry {
        name: "ring-parity",
        params: ZooParams {
            k: Some(k),
            n: Some(n),
            q: None,
        },
        def: ProtocolDef {
            name: format!("ring-parity(k={k},n={n})"),
            k,
            input_domains: vec![BitString::all_of_len(n).collect(); k],
            output_domains: outputs,
            private_tape_bits: private,
            public_tape_bits: 0,
            max_local_rounds: 4 * k * n,
            mode: Mode::Restricted,
            program: Arc::new(program),
            family: Some(parity_family(k)),
        },
        description: "one-time-padded parity passed around a ring; player 0 outputs",
    })
}

/// Deterministic parity: every other player sends its input to player 0
/// in its first round.
pub fn star_parity(k: usize, n: usize) -> Result<ZooEntry, ZooError> {
    if k < 2 {
        return Err(bad("star-parity needs k >= 2"));
    }
    if n == 0 {
        return Err(bad("star-parity needs n >= 1"));
    }
    let program = FnProgram(move |i: usize, r: usize, v: &View<'_>| {
        Ok(match (i, r) {
            (0, 1) => RoundPlan::wait_from((1..k).collect()),
            (0, 2) => {
                let xs: Vec<&BitString> = std::iter::once(v.input)
                    .chain(v.received.iter().map(|(_, m)| m))
                    .collect();
                RoundPlan::halt().output(parity(xs))
            }
            (_, 1) => RoundPlan::halt().send(0, v.input.clone()).output(zero()),
            _ => return Err(perr("star-parity round out of range")),
        })
    });
    let mut outputs = vec![vec![zero()]; k];
    outputs[0] = BitString::all_of_len(n).collect();
    Ok(ZooEntry {
        name: "star-parity",
        params: ZooParams {
            k: Some(k),
            n: Some(n),
            q: None,
        },
        def: ProtocolDef {
            name: format!("star-parity(k={k},n={n})"),
            k,
            input_domains: vec![BitString::all_of_len(n).collect(); k],
            output_domains: outputs,
            private_tape_bits: vec![0; k],
            public_tape_bits: 0,
            max_local_rounds: 4 * k * n,
            mode: Mode::Restricted,
            program: Arc::new(program),
            family: Some(parity_family(k)),
        },
        description: "all players send their input to player 0, which outputs the parity",
    })
}

/// Two-party AND: Alice sends x, Bob answers x AND y, both output it.
pub fn and_opt() -> ZooEntry {
    let program = FnProgram(|i: usize, r: usize, v: &View<'_>| {
        Ok(match (i, r) {
            (0, 1) => RoundPlan::wait_from(vec![1]).send(1, v.input.clone()),
            (0, 2) => RoundPlan::halt().output(last_message(v)?.clone()),
            (1, 1) => RoundPlan::wait_from(vec![0]),
            (1, 2) => {
                let x = last_message(v)?;
                let and = BitString::from_bits([x.bits()[0] && v.input.bits()[0]]);
                RoundPlan::halt().send(0, and.clone()).output(and)
            }
            _ => return Err(perr("and-opt round out of range")),
        })
    });
    ZooEntry {
        name: "and-opt",
        params: ZooParams::default(),
        def: ProtocolDef {
            name: "and-opt".into(),
            k: 2,
            input_domains: vec![one_bit_domain(), one_bit_domain()],
            output_domains: vec![one_bit_domain(), one_bit_domain()],
            private_tape_bits: vec![0, 0],
            public_tape_bits: 0,
            max_local_rounds: 8,
            mode: Mode::Restricted,
            program: Arc::new(program),
            family: Some(FunctionFamily::new(|xs: &[BitString]| {
                let a = BitString::from_bits([xs[0].bits()[0] && xs[1].bits()[0]]);
                vec![a.clone(), a]
            })),
        },
        description: "Alice sends x; Bob replies x AND y; both output the AND",
    }
}

/// Width in bits of one index in a q-index query over `k - 1` holders.
pub fn q_index_width(k: usize) -> usize {
    let holders = k - 1;
    (usize::BITS - (holders - 1).leading_zeros()).max(1) as usize
}

/// Encodes a query tuple for player k-1 of `q_index(k, q)`.
pub fn q_index_input(k: usize, indices: &[usize]) -> Result<BitString, ZooError> {
    let w = q_index_width(k);
    let mut seen = vec![false; k - 1];
    let mut out = BitString::new();
    for &j in indices {
        if j >= k - 1 {
            return Err(bad(format!("index {j} is not a holder (k={k})")));
        }
        if std::mem::replace(&mut seen[j], true) {
            return Err(bad(format!("duplicate index {j}")));
        }
        out.extend(&BitString::from_uint(j as u64, w));
    }
    Ok(out)
}

fn decode_indices(k: usize, input: &BitString) -> Result<Vec<usize>, ProgramError> {
    let w = q_index_width(k);
    let idx: Vec<usize> = (0..input.len() / w)
        .map(|t| input.slice(t * w, (t + 1) * w).to_uint() as usize)
        .collect();
    let mut seen = vec![false; k - 1];
    for &j in &idx {
        if j >= k - 1 || std::mem::replace(&mut seen[j], true) {
            return Err(perr(format!(
                "query input {input} is not a list of distinct holders"
            )));
        }
    }
    Ok(idx)
}

/// Player k-1 holds q distinct indices into players 0..k-2, each of which
/// holds one bit. It pings the indexed players with a `0`, each answers
/// with its bit, and it outputs the bits in query order.
pub fn q_index(k: usize, q: usize) -> Result<ZooEntry, ZooError> {
    if k < 2 {
        return Err(bad("q-index needs k >= 2"));
    }
    if q == 0 || q > k - 1 {
        return Err(bad(format!("q-index needs 1 <= q <= k-1 (q={q}, k={k})")));
    }
    let querier = k - 1;
    let program = FnProgram(move |i: usize, r: usize, v: &View<'_>| {
        if i == querier {
            let idx = decode_indices(k, v.input)?;
            return Ok(match r {
                1 => {
                    let mut plan = RoundPlan::wait_from(idx.clone());
                    for &j in &idx {
                        plan = plan.send(j, zero());
                    }
                    plan
                }
                2 => {
                    let mut out = BitString::new();
                    for &j in &idx {
                        let (_, m) = v
                            .received
                            .iter()
                            .find(|(s, _)| *s == j)
                            .ok_or_else(|| perr("missing reply"))?;
                        out.extend(m);
                    }
                    RoundPlan::halt().output(out)
                }
                _ => return Err(perr("q-index round out of range")),
            });
        }
        Ok(match r {
            1 => RoundPlan::wait_from(vec![querier]).output(zero()),
            2 => RoundPlan::halt().send(querier, v.input.clone()),
            _ => return Err(perr("q-index round out of range")),
        })
    });

    let mut queries = Vec::new();
    let mut current = Vec::new();
    ordered_tuples(k - 1, q, &mut current, &mut queries);
    let mut input_domains = vec![one_bit_domain(); k - 1];
    input_domains.push(
        queries
            .iter()
            .map(|t| q_index_input(k, t).expect("distinct holders"))
            .collect(),
    );
    let mut outputs = vec![vec![zero()]; k];
    outputs[querier] = BitString::all_of_len(q).collect();
    let family = FunctionFamily::new(move |xs: &[BitString]| {
        let mut out = vec![zero(); k];
        let idx = decode_indices(k, &xs[querier]).expect("query in domain");
        out[querier] = BitString::concat(idx.iter().map(|&j| &xs[j]));
        out
    });
    Ok(ZooEntry {
        name: "q-index",
        params: ZooParams {
            k: Some(k),
            n: None,
            q: Some(q),
        },
        def: ProtocolDef {
            name: format!("q-index(k={k},q={q})"),
            k,
            input_domains,
            output_domains: outputs,
            private_tape_bits: vec![0; k],
            public_tape_bits: 0,
            max_local_rounds: 4 * k,
            mode: Mode::Restricted,
            program: Arc::new(program),
            family: Some(family),
        },
        description: "the last player pings the indexed holders and collects their bits",
    })
}

fn ordered_tuples(n: usize, q: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if current.len() == q {
        out.push(current.clone());
        return;
    }
    for j in 0..n {
        if !current.contains(&j) {
            current.push(j);
            ordered_tuples(n, q, current, out);
            current.pop();
        }
    }
}

/// Player indices of the order-leak protocol.
pub mod order_leak_players {
    pub const A: usize = 0;
    pub const B: usize = 1;
    pub const C: usize = 2;
    pub const D: usize = 3;
}

/// Four players A, B, C, D where every message is the bit `0`, yet B learns
/// A's bit from which of C and D reaches it first. Needs the relaxed model:
/// B's first read waits for whichever of C and D speaks first.
pub fn order_leak() -> ZooEntry {
    use order_leak_players::*;
    let program = FnProgram(|i: usize, r: usize, v: &View<'_>| {
        Ok(match i {
            A => {
                let (first, second) = if v.input.bits()[0] { (D, C) } else { (C, D) };
                match r {
                    1 => RoundPlan::wait_from(vec![first])
                        .send(first, zero())
                        .output(zero()),
                    2 => RoundPlan::wait_from(vec![second]).send(second, zero()),
                    3 => RoundPlan::halt(),
                    _ => return Err(perr("order-leak round out of range")),
                }
            }
            B => match r {
                1 => RoundPlan::new(Wait::Any(vec![C, D])),
                2 => {
                    let s = v.received[0].0;
                    let other = if s == C { D } else { C };
                    let bit = BitString::from_bits([s == D]);
                    RoundPlan::new(Wait::Any(vec![other]))
                        .send(s, zero())
                        .output(bit)
                }
                3 => RoundPlan::halt().send(v.received[1].0, zero()),
                _ => return Err(perr("order-leak round out of range")),
            },
            _ => match r {
                1 => RoundPlan::wait_from(vec![A]).output(zero()),
                2 => RoundPlan::wait_from(vec![B]).send(B, zero()),
                3 => RoundPlan::halt().send(A, zero()),
                _ => return Err(perr("order-leak round out of range")),
            },
        })
    });
    let empty = vec![BitString::new()];
    let mut outputs = vec![vec![zero()]; 4];
    outputs[B] = one_bit_domain();
    ZooEntry {
        name: "order-leak",
        params: ZooParams::default(),
        def: ProtocolDef {
            name: "order-leak".into(),
            k: 4,
            input_domains: vec![one_bit_domain(), empty.clone(), empty.clone(), empty],
            output_domains: outputs,
            private_tape_bits: vec![0; 4],
            public_tape_bits: 0,
            max_local_rounds: 8,
            mode: Mode::Relaxed,
            program: Arc::new(program),
            family: Some(FunctionFamily::new(|xs: &[BitString]| {
                vec![zero(), xs[A].clone(), zero(), zero()]
            })),
        },
        description: "relaxed-model demo: all messages are 0, B learns A's bit from arrival order",
    }
}

/// Three players with one bit each. Round 1: player i sends x_i to i+1.
/// Round 2: player i sends x_i AND (what it got) to i+2. Every player
/// outputs the two bits it read.
pub fn relay_and() -> ZooEntry {
    let program = FnProgram(|i: usize, r: usize, v: &View<'_>| {
        let next = (i + 1) % 3;
        let prev = (i + 2) % 3;
        Ok(match r {
            1 => RoundPlan::wait_from(vec![prev]).send(next, v.input.clone()),
            2 => {
                let m = last_message(v)?;
                let and = BitString::from_bits([m.bits()[0] && v.input.bits()[0]]);
                RoundPlan::wait_from(vec![next]).send(prev, and)
            }
            3 => RoundPlan::halt().output(BitString::concat(v.received.iter().map(|(_, m)| m))),
            _ => return Err(perr("relay-and round out of range")),
        })
    });
    ZooEntry {
        name: "relay-and",
        params: ZooParams::default(),
        def: ProtocolDef {
            name: "relay-and".into(),
            k: 3,
            input_domains: vec![one_bit_domain(); 3],
            output_domains: vec![BitString::all_of_len(2).collect(); 3],
            private_tape_bits: vec![0; 3],
            public_tape_bits: 0,
            max_local_rounds: 8,
            mode: Mode::Restricted,
            program: Arc::new(program),
            family: Some(FunctionFamily::new(|xs: &[BitString]| {
                (0..3)
                    .map(|i| {
                        let prev = &xs[(i + 2) % 3];
                        let next = (i + 1) % 3;
                        let and = xs[next].bits()[0] && xs[i].bits()[0];
                        let mut o = prev.clone();
                        o.push(and);
                        o
                    })
                    .collect()
            })),
        },
        description: "two-round oblivious three-player relay of inputs and pairwise ANDs",
    }
}

struct Lifted {
    inner: Arc<dyn Program>,
    inner_k: usize,
}

impl Program for Lifted {
    fn plan(
        &self,
        player: usize,
        round: usize,
        view: &View<'_>,
    ) -> Result<RoundPlan, ProgramError> {
        if player < self.inner_k {
            self.inner.plan(player, round, view)
        } else {
            Ok(RoundPlan::halt().output(zero()))
        }
    }
}

/// Adds idle players (empty input, output `0`, no messages) so that `p`
/// runs with `k` players.
pub fn lift_players(p: &ProtocolDef, k: usize) -> Result<ProtocolDef, ZooError> {
    if k < p.k {
        return Err(bad(format!("cannot lift {} players down to {k}", p.k)));
    }
    let extra = k - p.k;
    let mut def = p.clone();
    def.name = format!("{}+{}idle", p.name, extra);
    def.k = k;
    def.input_domains
        .extend(std::iter::repeat_n(vec![BitString::new()], extra));
    def.output_domains
        .extend(std::iter::repeat_n(vec![zero()], extra));
    def.private_tape_bits.extend(std::iter::repeat_n(0, extra));
    def.program = Arc::new(Lifted {
        inner: p.program.clone(),
        inner_k: p.k,
    });
    let inner_k = p.k;
    def.family = p.family.clone().map(|f| {
        FunctionFamily::new(move |xs: &[BitString]| {
            let mut out = f.eval(&xs[..inner_k]);
            out.extend(std::iter::repeat_n(zero(), xs.len() - inner_k));
            out
        })
    });
    Ok(def)
}

/// Looks up a registry entry, using the parameters it needs. Missing k and
/// n default to 3 and 1; missing q defaults to 1.
pub fn by_name(
    name: &str,
    k: Option<usize>,
    n: Option<usize>,
    q: Option<usize>,
) -> Result<ZooEntry, ZooError> {
    let k = k.unwrap_or(3);
    let n = n.unwrap_or(1);
    match name {
        "ring-parity" => ring_parity(k, n),
        "star-parity" => star_parity(k, n),
        "and-opt" => Ok(and_opt()),
        "q-index" => q_index(k, q.unwrap_or(1)),
        "order-leak" => Ok(order_leak()),
        "relay-and" => Ok(relay_and()),
        other => Err(ZooError::Unknown(other.to_string())),
    }
}
