use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::lots::assign_lots;
use super::{
    Execution, MessageRecord, Mode, ProtocolDef, RoundPattern, SimError, Tapes, View, Wait,
};
use crate::bits::BitString;

/// Delivery choice for relaxed-mode "wait for any" reads, made among the
/// messages already queued when the waiting player is scheduled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Schedule {
    OldestFirst,
    NewestFirst,
    Seeded(u64),
}

#[derive(Debug, Clone)]
enum Status {
    Ready,
    Waiting(Wait),
    Halted,
}

struct Pending {
    sender: usize,
    receiver: usize,
    content: BitString,
    sent_round: usize,
    link_index: usize,
    seq: usize,
    read_round: Option<usize>,
}

/// Runs a restricted-mode protocol on one input and tape assignment.
pub fn run(p: &ProtocolDef, x: &[BitString], tapes: &Tapes) -> Result<Execution, SimError> {
    if p.mode != Mode::Restricted {
        return Err(SimError::ModelViolation(format!(
            "{:?} is a relaxed-model protocol; its wait sets are not view-determined",
            p.name
        )));
    }
    simulate(p, x, tapes, None)
}

/// Runs a relaxed-mode protocol under the given delivery schedule.
pub fn run_relaxed(
    p: &ProtocolDef,
    x: &[BitString],
    tapes: &Tapes,
    schedule: &Schedule,
) -> Result<Execution, SimError> {
    if p.mode != Mode::Relaxed {
        return Err(SimError::InvalidArgument(format!(
            "{:?} is not a relaxed-model protocol",
            p.name
        )));
    }
    simulate(p, x, tapes, Some(schedule))
}

fn check_inputs(p: &ProtocolDef, x: &[BitString], tapes: &Tapes) -> Result<(), SimError> {
    p.check_shape()?;
    if x.len() != p.k {
        return Err(SimError::InvalidArgument(format!(
            "expected {} inputs, got {}",
            p.k,
            x.len()
        )));
    }
    for (i, xi) in x.iter().enumerate() {
        if !p.input_domains[i].contains(xi) {
            return Err(SimError::InvalidArgument(format!(
                "input {xi} is outside player {i}'s domain"
            )));
        }
    }
    if tapes.private.len() != p.k
        || tapes
            .private
            .iter()
            .zip(&p.private_tape_bits)
            .any(|(t, &n)| t.len() != n)
        || tapes.public.len() != p.public_tape_bits
    {
        return Err(SimError::InvalidArgument(
            "tape lengths do not match the declared lengths".into(),
        ));
    }
    Ok(())
}

fn simulate(
    p: &ProtocolDef,
    x: &[BitString],
    tapes: &Tapes,
    schedule: Option<&Schedule>,
) -> Result<Execution, SimError> {
    check_inputs(p, x, tapes)?;
    let k = p.k;
    let relaxed = schedule.is_some();
    let mut rng = match schedule {
        Some(Schedule::Seeded(seed)) => Some(ChaCha8Rng::seed_from_u64(*seed)),
        _ => None,
    };

    let mut status = vec![Status::Ready; k];
    let mut rounds = vec![0usize; k];
    let mut received: Vec<Vec<(usize, BitString)>> = vec![Vec::new(); k];
    let mut outputs: Vec<Option<BitString>> = vec![None; k];
    let mut patterns: Vec<Vec<RoundPattern>> = vec![Vec::new(); k];
    let mut links: Vec<VecDeque<usize>> = vec![VecDeque::new(); k * k];
    let mut link_counts = vec![0usize; k * k];
    let mut pending: Vec<Pending> = Vec::new();

    loop {
        let mut progress = false;
        for i in 0..k {
            match status[i].clone() {
                Status::Halted => {}
                Status::Ready => {
                    progress = true;
                    rounds[i] += 1;
                    let r = rounds[i];
                    if r > p.max_local_rounds {
                        return Err(SimError::NonTermination {
                            player: i,
                            limit: p.max_local_rounds,
                        });
                    }
                    let view = View {
                        player: i,
                        input: &x[i],
                        private_tape: &tapes.private[i],
                        public_tape: &tapes.public,
                        received: &received[i],
                    };
                    let plan = p
                        .program
                        .plan(i, r, &view)
                        .map_err(|source| SimError::Program {
                            player: i,
                            round: r,
                            source,
                        })?;
                    validate_plan(i, r, k, relaxed, &plan.sends, &plan.wait)?;
                    let mut send_set: Vec<usize> = Vec::with_capacity(plan.sends.len());
                    let mut sends = plan.sends;
                    sends.sort_by_key(|s| s.0);
                    for (to, content) in sends {
                        let link = i * k + to;
                        let id = pending.len();
                        pending.push(Pending {
                            sender: i,
                            receiver: to,
                            content,
                            sent_round: r,
                            link_index: link_counts[link],
                            seq: id,
                            read_round: None,
                        });
                        link_counts[link] += 1;
                        links[link].push_back(id);
                        send_set.push(to);
                    }
                    if let Some(out) = plan.output {
                        if out.is_empty() {
                            return Err(SimError::ModelViolation(format!(
                                "player {i} wrote an empty output in round {r}"
                            )));
                        }
                        if outputs[i].is_some() {
                            return Err(SimError::ModelViolation(format!(
                                "player {i} wrote its output twice (round {r})"
                            )));
                        }
                        outputs[i] = Some(out);
                    }
                    patterns[i].push(RoundPattern {
                        sends: send_set,
                        wait: plan.wait.clone(),
                    });
                    status[i] = match plan.wait {
                        Wait::Halt => Status::Halted,
                        w => Status::Waiting(w),
                    };
                }
                Status::Waiting(Wait::From(from)) => {
                    if from.iter().all(|&s| !links[s * k + i].is_empty()) {
                        let mut from = from;
                        from.sort_unstable();
                        for s in from {
                            let id = links[s * k + i].pop_front().expect("non-empty link");
                            pending[id].read_round = Some(rounds[i]);
                            received[i].push((s, pending[id].content.clone()));
                        }
                        status[i] = Status::Ready;
                        progress = true;
                    }
                }
                Status::Waiting(Wait::Any(from)) => {
                    let ready: Vec<usize> = from
                        .iter()
                        .copied()
                        .filter(|&s| !links[s * k + i].is_empty())
                        .collect();
                    if !ready.is_empty() {
                        let head = |s: usize| pending[*links[s * k + i].front().unwrap()].seq;
                        let s = match schedule.expect("relaxed schedule") {
                            Schedule::OldestFirst => {
                                *ready.iter().min_by_key(|&&s| head(s)).unwrap()
                            }
                            Schedule::NewestFirst => {
                                *ready.iter().max_by_key(|&&s| head(s)).unwrap()
                            }
                            Schedule::Seeded(_) => {
                                let rng = rng.as_mut().expect("seeded rng");
                                ready[rng.random_range(0..ready.len())]
                            }
                        };
                        let id = links[s * k + i].pop_front().expect("non-empty link");
                        pending[id].read_round = Some(rounds[i]);
                        received[i].push((s, pending[id].content.clone()));
                        status[i] = Status::Ready;
                        progress = true;
                    }
                }
                Status::Waiting(Wait::Halt) => unreachable!("halt is never a waiting state"),
            }
        }
        if !progress {
            break;
        }
    }

    for i in 0..k {
        if outputs[i].is_none() {
            return Err(match status[i] {
                Status::Halted => {
                    SimError::ModelViolation(format!("player {i} halted without writing an output"))
                }
                _ => SimError::Deadlock {
                    player: i,
                    round: rounds[i],
                },
            });
        }
    }
    if let Some(m) = pending.iter().find(|m| m.read_round.is_none()) {
        return Err(SimError::ModelViolation(format!(
            "message {} from {} to {} is still in transit at termination",
            m.content, m.sender, m.receiver
        )));
    }

    let messages: Vec<MessageRecord> = pending
        .into_iter()
        .map(|m| MessageRecord {
            sender: m.sender,
            receiver: m.receiver,
            content: m.content,
            sent_round: m.sent_round,
            read_round: m.read_round.expect("all messages read"),
            link_index: m.link_index,
            lot: 0,
            global_index: 0,
        })
        .collect();
    let total_bits = messages.iter().map(|m| m.content.len()).sum();
    let mut exec = Execution {
        inputs: x.to_vec(),
        tapes: tapes.clone(),
        received,
        messages,
        outputs: outputs
            .into_iter()
            .map(|o| o.expect("checked above"))
            .collect(),
        patterns,
        total_bits,
    };
    exec.messages = assign_lots(&exec)?;
    Ok(exec)
}

fn validate_plan(
    i: usize,
    r: usize,
    k: usize,
    relaxed: bool,
    sends: &[(usize, BitString)],
    wait: &Wait,
) -> Result<(), SimError> {
    let mut seen = vec![false; k];
    for (to, content) in sends {
        if *to >= k || *to == i {
            return Err(SimError::ModelViolation(format!(
                "player {i} round {r}: invalid recipient {to}"
            )));
        }
        if std::mem::replace(&mut seen[*to], true) {
            return Err(SimError::ModelViolation(format!(
                "player {i} round {r}: two messages to player {to} in one round"
            )));
        }
        if content.is_empty() {
            return Err(SimError::ModelViolation(format!(
                "player {i} round {r}: empty message to {to} is not self-delimiting"
            )));
        }
    }
    let set = match wait {
        Wait::From(s) => s,
        Wait::Any(s) => {
            if !relaxed {
                return Err(SimError::ModelViolation(format!(
                    "player {i} round {r}: wait-for-any is not allowed in the restricted model"
                )));
            }
            if s.is_empty() {
                return Err(SimError::ModelViolation(format!(
                    "player {i} round {r}: wait-for-any over an empty set"
                )));
            }
            s
        }
        Wait::Halt => return Ok(()),
    };
    let mut seen = vec![false; k];
    for &s in set {
        if s >= k || s == i || std::mem::replace(&mut seen[s], true) {
            return Err(SimError::ModelViolation(format!(
                "player {i} round {r}: invalid wait set {set:?}"
            )));
        }
    }
    Ok(())
}
