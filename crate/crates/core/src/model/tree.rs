//! Table-driven protocols described as a rooted tree.
//!
//! Internal nodes carry `(sender, receiver, msg_bits)`, a message table and
//! children keyed by message value; leaves carry one output spec per player.
//! Message and output tables are keyed by the acting player's local string
//! `input ++ private tape ++ public tape`; keys may use `*` as a wildcard bit.
//!
//! ```json
//! {
//!   "name": "and",
//!   "k": 2,
//!   "input_bits": [1, 1],
//!   "tape_bits": { "private": [0, 0], "public": 0 },
//!   "functions": { "00": ["0", "0"], "01": ["0", "0"], "10": ["0", "0"], "11": ["1", "1"] },
//!   "tree": {
//!     "sender": 0, "receiver": 1, "msg_bits": 1,
//!     "message": { "0": "0", "1": "1" },
//!     "children": {
//!       "0": { "outputs": ["0", "0"] },
//!       "1": { "sender": 1, "receiver": 0, "msg_bits": 1,
//!              "message": { "0": "0", "1": "1" },
//!              "children": { "0": { "outputs": ["0", "0"] }, "1": { "outputs": ["1", "1"] } } }
//!     }
//!   }
//! }
//! ```
//!
//! Each player tracks the set of tree nodes consistent with its view. A
//! player acts only when every node in that set calls for the same action;
//! otherwise the tree is rejected at run time as not view-determined.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use super::{FunctionFamily, Mode, Program, ProgramError, ProtocolDef, RoundPlan, View, Wait};
use crate::bits::BitString;

#[derive(Debug, thiserror::Error)]
pub enum TreeError {
    #[error("cannot read protocol file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed protocol tree: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid protocol tree: {0}")]
    Invalid(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeFile {
    name: Option<String>,
    k: usize,
    input_bits: Vec<usize>,
    tape_bits: Option<TapeBits>,
    functions: Option<BTreeMap<String, Vec<String>>>,
    max_local_rounds: Option<usize>,
    tree: NodeSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TapeBits {
    private: Vec<usize>,
    #[serde(default)]
    public: usize,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum NodeSpec {
    Leaf(LeafSpec),
    Internal(InternalSpec),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LeafSpec {
    outputs: Vec<TableSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InternalSpec {
    sender: usize,
    receiver: usize,
    msg_bits: usize,
    message: TableSpec,
    children: BTreeMap<String, NodeSpec>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TableSpec {
    Const(String),
    Map(BTreeMap<String, String>),
}

/// A value looked up by a player's local string.
#[derive(Debug, Clone)]
enum Table {
    Const(BitString),
    Map {
        exact: HashMap<String, BitString>,
        patterns: Vec<(String, BitString)>,
    },
}

impl Table {
    fn compile(spec: &TableSpec, what: &str) -> Result<Self, TreeError> {
        let parse = |s: &str| {
            s.parse::<BitString>()
                .map_err(|e| TreeError::Invalid(format!("{what}: {e}")))
        };
        Ok(match spec {
            TableSpec::Const(s) => Table::Const(parse(s)?),
            TableSpec::Map(m) => {
                let mut exact = HashMap::new();
                let mut patterns = Vec::new();
                for (key, v) in m {
                    if key.chars().any(|c| !matches!(c, '0' | '1' | '*')) {
                        return Err(TreeError::Invalid(format!("{what}: bad key {key:?}")));
                    }
                    if key.contains('*') {
                        patterns.push((key.clone(), parse(v)?));
                    } else {
                        exact.insert(key.clone(), parse(v)?);
                    }
                }
                Table::Map { exact, patterns }
            }
        })
    }

    fn lookup(&self, key: &str) -> Result<BitString, ProgramError> {
        match self {
            Table::Const(v) => Ok(v.clone()),
            Table::Map { exact, patterns } => {
                if let Some(v) = exact.get(key) {
                    return Ok(v.clone());
                }
                let hits: BTreeSet<&BitString> = patterns
                    .iter()
                    .filter(|(p, _)| {
                        p.len() == key.len()
                            && p.chars().zip(key.chars()).all(|(a, b)| a == '*' || a == b)
                    })
                    .map(|(_, v)| v)
                    .collect();
                match hits.len() {
                    1 => Ok((*hits.iter().next().unwrap()).clone()),
                    0 => Err(ProgramError(format!(
                        "no table entry for local string {key:?}"
                    ))),
                    _ => Err(ProgramError(format!(
                        "conflicting wildcard entries for local string {key:?}"
                    ))),
                }
            }
        }
    }

    fn values(&self) -> Vec<BitString> {
        match self {
            Table::Const(v) => vec![v.clone()],
            Table::Map { exact, patterns } => exact
                .values()
                .chain(patterns.iter().map(|(_, v)| v))
                .cloned()
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(Vec<Table>),
    Internal {
        sender: usize,
        receiver: usize,
        message: Table,
        children: Vec<(BitString, usize)>,
    },
}

/// A compiled protocol tree.
#[derive(Debug, Clone)]
pub struct TreeProgram {
    nodes: Vec<Node>,
}

enum Action {
    Send { to: usize, msg: BitString },
    Receive { from: usize },
    Output(BitString),
}

impl TreeProgram {
    fn compile(
        spec: &NodeSpec,
        k: usize,
        nodes: &mut Vec<Node>,
    ) -> Result<(usize, usize), TreeError> {
        let id = nodes.len();
        nodes.push(Node::Leaf(Vec::new()));
        match spec {
            NodeSpec::Leaf(leaf) => {
                if leaf.outputs.len() != k {
                    return Err(TreeError::Invalid(format!(
                        "leaf has {} outputs for {k} players",
                        leaf.outputs.len()
                    )));
                }
                let outs = leaf
                    .outputs
                    .iter()
                    .map(|o| Table::compile(o, "leaf output"))
                    .collect::<Result<Vec<_>, _>>()?;
                if outs.iter().any(|t| t.values().iter().any(|v| v.is_empty())) {
                    return Err(TreeError::Invalid("leaf outputs must be non-empty".into()));
                }
                nodes[id] = Node::Leaf(outs);
                Ok((id, 0))
            }
            NodeSpec::Internal(n) => {
                if n.sender >= k || n.receiver >= k || n.sender == n.receiver {
                    return Err(TreeError::Invalid(format!(
                        "bad link {}->{} for {k} players",
                        n.sender, n.receiver
                    )));
                }
                if n.msg_bits == 0 {
                    return Err(TreeError::Invalid("msg_bits must be positive".into()));
                }
                let message = Table::compile(&n.message, "message")?;
                if n.children.is_empty() {
                    return Err(TreeError::Invalid("internal node without children".into()));
                }
                let mut children = Vec::new();
                let mut depth = 0;
                for (label, child) in &n.children {
                    let label: BitString = label
                        .parse()
                        .map_err(|e| TreeError::Invalid(format!("child label: {e}")))?;
                    if label.len() != n.msg_bits {
                        return Err(TreeError::Invalid(format!(
                            "child label {label} does not have {} bits",
                            n.msg_bits
                        )));
                    }
                    let (cid, d) = Self::compile(child, k, nodes)?;
                    depth = depth.max(d);
                    children.push((label, cid));
                }
                for v in message.values() {
                    if !children.iter().any(|(l, _)| *l == v) {
                        return Err(TreeError::Invalid(format!(
                            "message value {v} has no matching child"
                        )));
                    }
                }
                nodes[id] = Node::Internal {
                    sender: n.sender,
                    receiver: n.receiver,
                    message,
                    children,
                };
                Ok((id, depth + 1))
            }
        }
    }

    /// Expands nodes that do not involve `player` into all their children.
    fn closure(&self, player: usize, start: Vec<usize>) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        let mut stack = start;
        while let Some(n) = stack.pop() {
            match &self.nodes[n] {
                Node::Internal {
                    sender,
                    receiver,
                    children,
                    ..
                } if *sender != player && *receiver != player => {
                    stack.extend(children.iter().map(|c| c.1));
                }
                _ => {
                    out.insert(n);
                }
            }
        }
        out
    }

    fn child(&self, n: usize, label: &BitString) -> Result<usize, ProgramError> {
        match &self.nodes[n] {
            Node::Internal { children, .. } => children
                .iter()
                .find(|(l, _)| l == label)
                .map(|c| c.1)
                .ok_or_else(|| {
                    ProgramError(format!("message {label} is not a branch of node {n}"))
                }),
            Node::Leaf(_) => Err(ProgramError("leaf has no children".into())),
        }
    }

    fn decide(
        &self,
        player: usize,
        key: &str,
        frontier: &BTreeSet<usize>,
    ) -> Result<Action, ProgramError> {
        let mut actions = frontier.iter().map(|&n| -> Result<Action, ProgramError> {
            Ok(match &self.nodes[n] {
                Node::Leaf(outs) => Action::Output(outs[player].lookup(key)?),
                Node::Internal {
                    sender,
                    receiver,
                    message,
                    ..
                } => {
                    if *sender == player {
                        Action::Send {
                            to: *receiver,
                            msg: message.lookup(key)?,
                        }
                    } else {
                        Action::Receive { from: *sender }
                    }
                }
            })
        });
        let first = actions.next().expect("frontier is never empty")?;
        for a in actions {
            let a = a?;
            let same = match (&first, &a) {
                (Action::Output(x), Action::Output(y)) => x == y,
                (Action::Send { to: t1, msg: m1 }, Action::Send { to: t2, msg: m2 }) => {
                    t1 == t2 && m1 == m2
                }
                (Action::Receive { from: f1 }, Action::Receive { from: f2 }) => f1 == f2,
                _ => false,
            };
            if !same {
                return Err(ProgramError(format!(
                    "player {player}'s next action is not determined by its view"
                )));
            }
        }
        Ok(first)
    }

    fn advance(
        &self,
        player: usize,
        frontier: &BTreeSet<usize>,
        label: &BitString,
    ) -> Result<BTreeSet<usize>, ProgramError> {
        let next = frontier
            .iter()
            .map(|&n| self.child(n, label))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.closure(player, next))
    }
}

impl Program for TreeProgram {
    fn plan(
        &self,
        player: usize,
        round: usize,
        view: &View<'_>,
    ) -> Result<RoundPlan, ProgramError> {
        let key = format!("{}{}{}", view.input, view.private_tape, view.public_tape);
        let mut frontier = self.closure(player, vec![0]);
        let mut read = 0;
        for _ in 1..round {
            frontier = match self.decide(player, &key, &frontier)? {
                Action::Send { msg, .. } => self.advance(player, &frontier, &msg)?,
                Action::Receive { .. } => {
                    let (_, msg) = view
                        .received
                        .get(read)
                        .ok_or_else(|| ProgramError("view is missing a message".into()))?;
                    read += 1;
                    self.advance(player, &frontier, msg)?
                }
                Action::Output(_) => return Err(ProgramError("round after halting".into())),
            };
        }
        Ok(match self.decide(player, &key, &frontier)? {
            Action::Send { to, msg } => RoundPlan::new(Wait::From(Vec::new())).send(to, msg),
            Action::Receive { from } => RoundPlan::wait_from(vec![from]),
            Action::Output(out) => RoundPlan::halt().output(out),
        })
    }
}

/// Parses a protocol tree from JSON text.
pub fn from_json_str(text: &str) -> Result<ProtocolDef, TreeError> {
    let file: TreeFile = serde_json::from_str(text)?;
    let k = file.k;
    if k < 2 {
        return Err(TreeError::Invalid(
            "a protocol needs at least two players".into(),
        ));
    }
    if file.input_bits.len() != k {
        return Err(TreeError::Invalid(format!(
            "input_bits lists {} players, k is {k}",
            file.input_bits.len()
        )));
    }
    if file.input_bits.iter().any(|&b| b > 16) {
        return Err(TreeError::Invalid(
            "inputs wider than 16 bits are not supported".into(),
        ));
    }
    let (private, public) = match &file.tape_bits {
        Some(t) => (t.private.clone(), t.public),
        None => (vec![0; k], 0),
    };
    if private.len() != k {
        return Err(TreeError::Invalid(
            "tape_bits.private must list every player".into(),
        ));
    }
    let mut nodes = Vec::new();
    let (_, depth) = TreeProgram::compile(&file.tree, k, &mut nodes)?;
    let program = TreeProgram { nodes };

    let mut outputs: Vec<BTreeSet<BitString>> = vec![BTreeSet::new(); k];
    for n in &program.nodes {
        if let Node::Leaf(outs) = n {
            for (i, t) in outs.iter().enumerate() {
                outputs[i].extend(t.values());
            }
        }
    }

    let input_domains: Vec<Vec<BitString>> = file
        .input_bits
        .iter()
        .map(|&b| BitString::all_of_len(b).collect())
        .collect();

    let family = match file.functions {
        None => None,
        Some(map) => {
            let mut table: HashMap<BitString, Vec<BitString>> = HashMap::new();
            for (key, outs) in map {
                let key: BitString = key
                    .parse()
                    .map_err(|e| TreeError::Invalid(format!("functions key: {e}")))?;
                if outs.len() != k {
                    return Err(TreeError::Invalid(format!(
                        "functions entry {key} has {} outputs for {k} players",
                        outs.len()
                    )));
                }
                let outs = outs
                    .iter()
                    .map(|s| s.parse::<BitString>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| TreeError::Invalid(format!("functions value: {e}")))?;
                table.insert(key, outs);
            }
            let total: usize = file.input_bits.iter().sum();
            for x in BitString::all_of_len(total) {
                if !table.contains_key(&x) {
                    return Err(TreeError::Invalid(format!(
                        "functions table does not cover input {x}"
                    )));
                }
            }
            let table = Arc::new(table);
            Some(FunctionFamily::new(move |xs: &[BitString]| {
                table[&BitString::concat(xs)].clone()
            }))
        }
    };

    Ok(ProtocolDef {
        name: file.name.unwrap_or_else(|| "tree".to_string()),
        k,
        input_domains,
        output_domains: outputs
            .into_iter()
            .map(|s| s.into_iter().collect())
            .collect(),
        private_tape_bits: private,
        public_tape_bits: public,
        max_local_rounds: file.max_local_rounds.unwrap_or(2 * depth + 2),
        mode: Mode::Restricted,
        program: Arc::new(program),
        family,
    })
}

/// Reads and parses a protocol tree file.
pub fn from_path(path: &Path) -> Result<ProtocolDef, TreeError> {
    let text = std::fs::read_to_string(path)?;
    from_json_str(&text)
}
