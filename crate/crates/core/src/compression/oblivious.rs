use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use super::lcp::ceil_log2;
use super::CompressionError;
use crate::bits::BitString;
use crate::measures::{Analysis, InputDistribution};
use crate::model::{
    is_oblivious, run_all, Execution, Mode, Program, ProgramError, ProtocolDef, RoundPlan, View,
    Wait,
};

type Codebooks = BTreeMap<(usize, usize, usize), Vec<BitString>>;

/// Result of [`obliviousize`].
#[derive(Debug, Clone)]
pub struct Obliviousized {
    pub def: ProtocolDef,
    /// Number of coordinator phases T = ceil(2C / eps).
    pub phases: usize,
    /// C: expected communication of the original protocol.
    pub acc: BigRational,
    /// Pr[|Pi| >= T] under mu and uniform tapes.
    pub truncation_mass: BigRational,
    /// Pr[|Pi| > T]: the runs the conversion may cut short.
    pub overflow_mass: BigRational,
    pub eps: f64,
}

fn perr(msg: impl Into<String>) -> ProgramError {
    ProgramError(msg.into())
}

struct Relay {
    inner: Arc<dyn Program>,
    k: usize,
    phases: usize,
    width: usize,
    inner_rounds: usize,
    codebooks: Arc<Codebooks>,
    defaults: Vec<BitString>,
}

/// One player's local replay of the original protocol, fed bit by bit.
struct Sim<'a> {
    relay: &'a Relay,
    view: &'a View<'a>,
    round: usize,
    waiting: Option<Vec<usize>>,
    halted: bool,
    received: Vec<(usize, BitString)>,
    partial: Vec<BitString>,
    complete: Vec<VecDeque<BitString>>,
    link_count: Vec<usize>,
    queue: VecDeque<(bool, usize)>,
    output: Option<BitString>,
}

impl<'a> Sim<'a> {
    fn new(relay: &'a Relay, view: &'a View<'a>) -> Self {
        let k = relay.k;
        Self {
            relay,
            view,
            round: 0,
            waiting: None,
            halted: false,
            received: Vec::new(),
            partial: vec![BitString::new(); k],
            complete: vec![VecDeque::new(); k],
            link_count: vec![0; k],
            queue: VecDeque::new(),
            output: None,
        }
    }

    fn deliver(&mut self, origin: usize, bit: bool) -> Result<(), ProgramError> {
        let me = self.view.player;
        self.partial[origin].push(bit);
        let key = (origin, me, self.link_count[origin]);
        let book = self
            .relay
            .codebooks
            .get(&key)
            .ok_or_else(|| perr(format!("unexpected bits from player {origin}")))?;
        let part = &self.partial[origin];
        if book.contains(part) {
            let m = std::mem::take(&mut self.partial[origin]);
            self.complete[origin].push_back(m);
            self.link_count[origin] += 1;
        } else if !book.iter().any(|c| part.is_prefix_of(c)) {
            return Err(perr(format!(
                "bits {part} from player {origin} match no message"
            )));
        }
        Ok(())
    }

    fn advance(&mut self) -> Result<(), ProgramError> {
        loop {
            if self.halted {
                return Ok(());
            }
            if let Some(from) = &self.waiting {
                if !from.iter().all(|&j| !self.complete[j].is_empty()) {
                    return Ok(());
                }
                let mut from = from.clone();
                from.sort_unstable();
                for j in from {
                    let m = self.complete[j].pop_front().expect("checked non-empty");
                    self.received.push((j, m));
                }
                self.waiting = None;
            }
            self.round += 1;
            if self.round > self.relay.inner_rounds {
                return Err(perr("simulated protocol exceeds its round limit"));
            }
            let plan = self.relay.inner.plan(
                self.view.player,
                self.round,
                &View {
                    received: &self.received,
                    ..*self.view
                },
            )?;
            let mut sends = plan.sends;
            sends.sort_by_key(|s| s.0);
            for (to, m) in sends {
                self.queue.extend(m.bits().iter().map(|&b| (b, to)));
            }
            if let Some(o) = plan.output {
                if self.output.replace(o).is_some() {
                    return Err(perr("simulated player wrote two outputs"));
                }
            }
            match plan.wait {
                Wait::Halt => self.halted = true,
                Wait::From(s) => self.waiting = Some(s),
                Wait::Any(_) => return Err(perr("relaxed wait sets cannot be relayed")),
            }
        }
    }

    fn final_output(&self) -> BitString {
        self.output
            .clone()
            .unwrap_or_else(|| self.relay.defaults[self.view.player].clone())
    }
}

impl Relay {
    fn encode_bit(&self, bit: Option<(bool, usize)>) -> BitString {
        match bit {
            None => BitString::from_bits([false]),
            Some((b, to)) => {
                let mut m = BitString::from_bits([true, b]);
                m.extend(&BitString::from_uint(to as u64, self.width));
                m
            }
        }
    }

    fn decode_bit(&self, m: &BitString) -> Result<Option<(bool, usize)>, ProgramError> {
        match m.bits() {
            [false] => Ok(None),
            [true, b, rest @ ..] if rest.len() == self.width => {
                let to = BitString::from_bits(rest.iter().copied()).to_uint() as usize;
                if to >= self.k {
                    return Err(perr(format!("bad destination {to}")));
                }
                Ok(Some((*b, to)))
            }
            _ => Err(perr(format!("malformed relay message {m}"))),
        }
    }

    /// Forwarded bits as (bit, origin) pairs, sorted by origin.
    fn encode_forward(&self, entries: &[(bool, usize)]) -> BitString {
        if entries.is_empty() {
            return BitString::from_bits([false]);
        }
        let mut m = BitString::from_bits([true]);
        m.extend(&BitString::from_uint(entries.len() as u64 - 1, self.width));
        for &(b, origin) in entries {
            m.push(b);
            m.extend(&BitString::from_uint(origin as u64, self.width));
        }
        m
    }

    fn decode_forward(&self, m: &BitString) -> Result<Vec<(bool, usize)>, ProgramError> {
        let bad = || perr(format!("malformed forward message {m}"));
        match m.get(0) {
            Some(false) if m.len() == 1 => Ok(Vec::new()),
            Some(true) if m.len() > self.width => {
                let count = m.slice(1, 1 + self.width).to_uint() as usize + 1;
                let entry = 1 + self.width;
                if m.len() != 1 + self.width + count * entry {
                    return Err(bad());
                }
                (0..count)
                    .map(|n| {
                        let s = 1 + self.width + n * entry;
                        let origin = m.slice(s + 1, s + entry).to_uint() as usize;
                        Ok((m.bits()[s], origin))
                    })
                    .collect()
            }
            _ => Err(bad()),
        }
    }

    fn coordinator(&self, round: usize, view: &View<'_>) -> Result<RoundPlan, ProgramError> {
        let k = self.k;
        let mut sim = Sim::new(self, view);
        let mut forward: Vec<Vec<(bool, usize)>> = vec![Vec::new(); k];
        for s in 1..=round {
            forward = vec![Vec::new(); k];
            if s >= 2 {
                for j in 1..k {
                    let (from, m) = view
                        .received
                        .get((s - 2) * (k - 1) + (j - 1))
                        .ok_or_else(|| perr("missing phase message"))?;
                    if *from != j {
                        return Err(perr("phase messages out of order"));
                    }
                    if let Some((b, to)) = self.decode_bit(m)? {
                        match to {
                            0 => sim.deliver(j, b)?,
                            t if t == j => return Err(perr("player relayed a bit to itself")),
                            t => forward[t].push((b, j)),
                        }
                    }
                }
            }
            sim.advance()?;
            if s <= self.phases {
                if let Some((b, to)) = sim.queue.pop_front() {
                    forward[to].push((b, 0));
                }
            }
        }
        let mut plan = if round <= self.phases {
            RoundPlan::wait_from((1..k).collect())
        } else {
            RoundPlan::halt().output(sim.final_output())
        };
        for (j, entries) in forward.iter_mut().enumerate().skip(1) {
            entries.sort_by_key(|e| e.1);
            plan = plan.send(j, self.encode_forward(entries));
        }
        Ok(plan)
    }

    fn member(&self, round: usize, view: &View<'_>) -> Result<RoundPlan, ProgramError> {
        let mut sim = Sim::new(self, view);
        let mut last = None;
        for s in 1..round {
            let (from, m) = view
                .received
                .get(s - 1)
                .ok_or_else(|| perr("missing forward"))?;
            if *from != 0 {
                return Err(perr("members only hear from the coordinator"));
            }
            for (b, origin) in self.decode_forward(m)? {
                sim.deliver(origin, b)?;
            }
            sim.advance()?;
            if s <= self.phases {
                last = sim.queue.pop_front();
            }
        }
        Ok(if round == 1 {
            RoundPlan::wait_from(vec![0])
        } else if round <= self.phases + 1 {
            RoundPlan::wait_from(vec![0]).send(0, self.encode_bit(last))
        } else {
            RoundPlan::halt().output(sim.final_output())
        })
    }
}

impl Program for Relay {
    fn plan(
        &self,
        player: usize,
        round: usize,
        view: &View<'_>,
    ) -> Result<RoundPlan, ProgramError> {
        if player == 0 {
            self.coordinator(round, view)
        } else {
            self.member(round, view)
        }
    }
}

fn total_bits_mass(a: &Analysis, pred: impl Fn(usize) -> bool) -> BigRational {
    let mut mass = BigRational::zero();
    for (&(xi, ti), (_, w)) in a.rows().iter().zip(a.joint().outcomes()) {
        if pred(a.table.get(xi, ti).total_bits) {
            mass += w;
        }
    }
    mass
}

/// Rewrites `p` so that all traffic goes through player 0 in exactly
/// T = ceil(2C / eps) phases, C being the expected communication of `p`
/// under mu. In each phase player 0 signals everyone, each player hands it
/// one queued bit with its destination (or nothing), and player 0 forwards
/// the bits. Players replay `p` locally; one whose replay has not produced
/// an output after T phases outputs the first value of its output domain.
/// The result is oblivious.
pub fn obliviousize(
    p: &ProtocolDef,
    mu: &InputDistribution,
    eps: f64,
    budget: u64,
) -> Result<Obliviousized, CompressionError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(CompressionError::InvalidArgument(format!(
            "eps must be in (0, 1), got {eps}"
        )));
    }
    if p.mode != Mode::Restricted {
        return Err(CompressionError::InvalidArgument(
            "only restricted-model protocols can be relayed".into(),
        ));
    }
    if p.k < 2 {
        return Err(CompressionError::InvalidArgument(
            "need at least two players".into(),
        ));
    }
    let analysis = Analysis::from_protocol(p, mu.clone(), budget)?;
    let acc = analysis.acc();
    let eps_q = BigRational::from_float(eps)
        .ok_or_else(|| CompressionError::InvalidArgument(format!("eps {eps} is not finite")))?;
    let t: BigInt = (acc.clone() * BigRational::from_integer(2.into()) / eps_q)
        .ceil()
        .to_integer();
    let phases = t.to_usize().unwrap_or(usize::MAX).max(1);

    let mut codebooks = Codebooks::new();
    for e in &analysis.table.executions {
        for m in &e.messages {
            let book = codebooks
                .entry((m.sender, m.receiver, m.link_index))
                .or_default();
            if !book.contains(&m.content) {
                book.push(m.content.clone());
            }
        }
    }
    let width = (ceil_log2(p.k as u64) as usize).max(1);
    let defaults = p
        .output_domains
        .iter()
        .map(|d| {
            d.first()
                .cloned()
                .unwrap_or_else(|| BitString::from_bits([false]))
        })
        .collect();
    let truncation_mass = total_bits_mass(&analysis, |b| b >= phases);
    let overflow_mass = total_bits_mass(&analysis, |b| b > phases);

    let mut def = p.clone();
    def.name = format!("obliviousize({}, eps={eps})", p.name);
    def.max_local_rounds = phases + 2;
    def.program = Arc::new(Relay {
        inner: p.program.clone(),
        k: p.k,
        phases,
        width,
        inner_rounds: p.max_local_rounds,
        codebooks: Arc::new(codebooks),
        defaults,
    });
    Ok(Obliviousized {
        def,
        phases,
        acc,
        truncation_mass,
        overflow_mass,
        eps,
    })
}

/// Bits sent in each coordinator phase of an obliviousized execution.
/// Phase t holds player 0's round-t messages and the other players'
/// round-(t+1) messages.
pub fn phase_bits(e: &Execution) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for m in &e.messages {
        let phase = if m.sender == 0 {
            m.sent_round
        } else {
            m.sent_round - 1
        };
        if out.len() < phase {
            out.resize(phase, 0);
        }
        out[phase - 1] += m.content.len();
    }
    out
}

/// Checks of an obliviousized protocol against its original.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObliviousAudit {
    pub oblivious: bool,
    pub phases: usize,
    pub acc: String,
    pub truncation_mass: String,
    pub markov_bound: String,
    /// Every run with |Pi| <= T reproduces the original outputs.
    pub agrees_when_complete: bool,
    pub original_error: Option<String>,
    pub error: Option<String>,
    pub cc: usize,
    pub max_phase_bits: usize,
}

/// Enumerates both protocols and checks obliviousness, the Markov bound on
/// the truncated mass and bit-exact agreement on complete runs.
pub fn audit_obliviousized(
    p: &ProtocolDef,
    ob: &Obliviousized,
    mu: &InputDistribution,
    budget: u64,
) -> Result<ObliviousAudit, CompressionError> {
    let (oblivious, _) = is_oblivious(&ob.def, budget)?;
    let original = Analysis::from_protocol(p, mu.clone(), budget)?;
    let converted = Analysis::new(run_all(&ob.def, budget)?, mu.clone())?;
    let mut agrees = true;
    for &(xi, ti) in original.rows() {
        let e = original.table.get(xi, ti);
        if e.total_bits <= ob.phases && e.outputs != converted.table.get(xi, ti).outputs {
            agrees = false;
        }
    }
    let markov = if ob.phases == 0 {
        BigRational::zero()
    } else {
        &ob.acc / BigRational::from_integer(ob.phases.into())
    };
    let err = |a: &Analysis| -> Result<Option<String>, CompressionError> {
        Ok(match a.def().family {
            Some(_) => Some(a.error_probability()?.to_string()),
            None => None,
        })
    };
    let cc = converted.cc();
    let max_phase_bits = converted
        .table
        .executions
        .iter()
        .flat_map(phase_bits)
        .max()
        .unwrap_or(0);
    Ok(ObliviousAudit {
        oblivious,
        phases: ob.phases,
        acc: ob.acc.to_string(),
        truncation_mass: ob.truncation_mass.to_string(),
        markov_bound: markov.to_string(),
        agrees_when_complete: agrees,
        original_error: err(&original)?,
        error: err(&converted)?,
        cc,
        max_phase_bits,
    })
}
