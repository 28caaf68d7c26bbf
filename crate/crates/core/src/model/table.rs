use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use super::{run, Execution, ProtocolDef, RoundPattern, SimError, Tapes};
use crate::bits::BitString;

/// Default cap on the number of executions an enumeration may perform.
pub const DEFAULT_BUDGET: u64 = 1 << 20;

/// Every execution of a protocol, over all input tuples and tape values.
#[derive(Debug, Clone)]
pub struct ExecutionTable {
    pub def: ProtocolDef,
    /// Input tuples, player 0 most significant.
    pub inputs: Vec<Vec<BitString>>,
    /// Tape assignments in lexicographic order of their concatenation.
    pub tapes: Vec<Tapes>,
    /// Row-major: input index, then tape index.
    pub executions: Vec<Execution>,
}

impl ExecutionTable {
    pub fn get(&self, input_idx: usize, tape_idx: usize) -> &Execution {
        &self.executions[input_idx * self.tapes.len() + tape_idx]
    }

    pub fn tape_count(&self) -> usize {
        self.tapes.len()
    }

    pub fn input_index(&self, x: &[BitString]) -> Option<usize> {
        self.inputs.iter().position(|t| t == x)
    }

    /// Index of each execution's input tuple and tape assignment.
    pub fn indexed(&self) -> impl Iterator<Item = (usize, usize, &Execution)> {
        let t = self.tapes.len();
        self.executions
            .iter()
            .enumerate()
            .map(move |(n, e)| (n / t, n % t, e))
    }

    /// First pair of executions whose send or wait sets differ at the same
    /// (player, local round), if any.
    pub fn oblivious_witness(&self) -> Option<ObliviousWitness> {
        let reference = self.executions.first()?;
        for e in &self.executions[1..] {
            for i in 0..self.def.k {
                let a = &reference.patterns[i];
                let b = &e.patterns[i];
                let n = a.len().max(b.len());
                for j in 0..n {
                    if a.get(j) != b.get(j) {
                        return Some(ObliviousWitness {
                            player: i,
                            round: j + 1,
                            first_inputs: reference.inputs.clone(),
                            first_tapes: reference.tapes.clone(),
                            first_pattern: a.get(j).cloned(),
                            second_inputs: e.inputs.clone(),
                            second_tapes: e.tapes.clone(),
                            second_pattern: b.get(j).cloned(),
                        });
                    }
                }
            }
        }
        None
    }
}

/// Two executions whose communication pattern differs at one local round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ObliviousWitness {
    pub player: usize,
    pub round: usize,
    pub first_inputs: Vec<BitString>,
    pub first_tapes: Tapes,
    pub first_pattern: Option<RoundPattern>,
    pub second_inputs: Vec<BitString>,
    pub second_tapes: Tapes,
    pub second_pattern: Option<RoundPattern>,
}

/// Number of executions an enumeration of `p` requires.
pub fn required_executions(p: &ProtocolDef) -> u128 {
    let t = p.total_tape_bits();
    if t >= 100 {
        return u128::MAX;
    }
    p.input_count().saturating_mul(1u128 << t)
}

/// Runs `p` on every input tuple and every tape assignment, and certifies
/// that messages at each (sender, receiver, link position) form a
/// prefix-free set across the whole table.
pub fn run_all(p: &ProtocolDef, budget: u64) -> Result<ExecutionTable, SimError> {
    p.check_shape()?;
    let required = required_executions(p);
    if required > u128::from(budget) {
        return Err(SimError::BudgetExceeded { required, budget });
    }
    let inputs = p.input_tuples();
    let tapes: Vec<Tapes> = BitString::all_of_len(p.total_tape_bits())
        .map(|all| p.split_tapes(&all))
        .collect();
    let nt = tapes.len();
    let executions = (0..inputs.len() * nt)
        .into_par_iter()
        .map(|n| run(p, &inputs[n / nt], &tapes[n % nt]))
        .collect::<Result<Vec<_>, _>>()?;

    let mut positions: BTreeMap<(usize, usize, usize), BTreeSet<&BitString>> = BTreeMap::new();
    for e in &executions {
        for m in &e.messages {
            positions
                .entry((m.sender, m.receiver, m.link_index))
                .or_default()
                .insert(&m.content);
        }
    }
    for ((sender, receiver, position), set) in positions {
        let v: Vec<&BitString> = set.into_iter().collect();
        for w in v.windows(2) {
            if w[0].is_prefix_of(w[1]) {
                return Err(SimError::SelfDelimiting {
                    sender,
                    receiver,
                    position,
                    first: w[0].clone(),
                    second: w[1].clone(),
                });
            }
        }
    }

    Ok(ExecutionTable {
        def: p.clone(),
        inputs,
        tapes,
        executions,
    })
}

/// Whether every execution of `p` follows the same communication pattern;
/// on failure, returns a witness pair.
pub fn is_oblivious(
    p: &ProtocolDef,
    budget: u64,
) -> Result<(bool, Option<ObliviousWitness>), SimError> {
    let table = run_all(p, budget)?;
    let w = table.oblivious_witness();
    Ok((w.is_none(), w))
}
