use std::collections::BTreeMap;

use super::{Execution, MessageRecord, SimError};

/// Assigns every message of a completed execution to a lot and returns the
/// messages in global order: by lot, then lexicographically by link.
///
/// A node (i, r) is player i's local round r. Its level is one more than the
/// largest level among i's earlier sending rounds and the sending rounds of
/// every message i read before round r; all messages sent in round r of
/// player i land in the lot given by that level.
pub fn assign_lots(e: &Execution) -> Result<Vec<MessageRecord>, SimError> {
    let k = e.k();
    let msgs = &e.messages;
    // Sending rounds per player, ascending.
    let mut send_rounds: Vec<Vec<usize>> = vec![Vec::new(); k];
    for m in msgs {
        send_rounds[m.sender].push(m.sent_round);
    }
    for r in &mut send_rounds {
        r.sort_unstable();
        r.dedup();
    }
    let mut level: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (i, rs) in send_rounds.iter().enumerate() {
        for &r in rs {
            level.insert((i, r), 1);
        }
    }

    let limit = level.len() + 2;
    let mut iterations = 0;
    loop {
        let mut changed = false;
        for (i, rs) in send_rounds.iter().enumerate() {
            for &r in rs {
                let own = rs
                    .iter()
                    .filter(|&&r2| r2 < r)
                    .map(|&r2| level[&(i, r2)])
                    .max()
                    .unwrap_or(0);
                let heard = msgs
                    .iter()
                    .filter(|m| m.receiver == i && m.read_round < r)
                    .map(|m| level[&(m.sender, m.sent_round)])
                    .max()
                    .unwrap_or(0);
                let l = 1 + own.max(heard);
                let slot = level.get_mut(&(i, r)).expect("known node");
                if *slot != l {
                    *slot = l;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
        iterations += 1;
        if iterations > limit {
            return Err(SimError::ModelViolation(
                "message dependencies form a cycle; lots cannot be assigned".into(),
            ));
        }
    }

    let mut out: Vec<MessageRecord> = msgs
        .iter()
        .map(|m| MessageRecord {
            lot: level[&(m.sender, m.sent_round)],
            ..m.clone()
        })
        .collect();
    out.sort_by_key(|m| (m.lot, m.sender, m.receiver));
    for w in out.windows(2) {
        if w[0].lot == w[1].lot && w[0].sender == w[1].sender && w[0].receiver == w[1].receiver {
            return Err(SimError::ModelViolation(format!(
                "two messages on link {}->{} in lot {}",
                w[0].sender, w[0].receiver, w[0].lot
            )));
        }
    }
    for (g, m) in out.iter_mut().enumerate() {
        m.global_index = g;
    }
    Ok(out)
}
