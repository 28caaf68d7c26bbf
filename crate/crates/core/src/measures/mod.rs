//! Exact complexity and information measures over an enumerated protocol,
//! and the protocol transformations that preserve or bound them.

mod distribution;
mod grid;
mod report;
mod transform;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::bits::BitString;
use crate::info::{InfoError, JointDistribution, MiPlan, Value, VariableSelector};
use crate::model::{run_all, ExecutionTable, ProtocolDef, SimError};

pub use distribution::{input_widths, InputDistribution};
pub use grid::{and_pic_formula, sup_pic_grid, GridResult};
pub use report::{format_bits, round_bits, MeasureReport};
pub(crate) use report::{ser_bits, ser_opt_bits};
pub use transform::{
    derandomize_zero_error, interleave_tapes, mean_t, product_protocol, publicize, Derandomized,
};

#[derive(Debug, thiserror::Error)]
pub enum MeasureError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Info(#[from] InfoError),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("protocol {0:?} declares no function family")]
    MissingFamily(String),
    #[error("protocol is not zero-error: {0}")]
    NotZeroError(String),
}

/// Which transcript a measure reads for player i.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TranscriptKind {
    /// Pi_i: messages read, by local round then sender.
    Received,
    /// Received messages followed by sent messages.
    Bidirectional,
    /// Per local round: sent, then received.
    BidirectionalByRound,
    /// Messages to and from i in global lot order.
    BidirectionalByLot,
}

impl TranscriptKind {
    fn var(self, i: usize) -> String {
        match self {
            TranscriptKind::Received => format!("PI{i}"),
            TranscriptKind::Bidirectional => format!("PIB{i}"),
            TranscriptKind::BidirectionalByRound => format!("PIR{i}"),
            TranscriptKind::BidirectionalByLot => format!("PIL{i}"),
        }
    }
}

/// The joint law of inputs, tapes, transcripts and outputs of a protocol
/// under an input distribution and uniform tapes.
///
/// Variable names: `X{i}`, `R{i}` (private tape), `RP` (public tape),
/// `PI{i}`, `PIB{i}`, `PIR{i}`, `PIL{i}` (see [`TranscriptKind`]),
/// `OUT{i}`, `F{i}` (when the protocol declares a function family) and `PI`
/// (all `PI{i}` concatenated).
pub struct Analysis {
    pub table: ExecutionTable,
    pub mu: InputDistribution,
    joint: JointDistribution,
    nums: Vec<BigUint>,
    denom: BigUint,
    /// For each joint outcome, its (input index, tape index) in the table.
    rows: Vec<(usize, usize)>,
}

impl Analysis {
    pub fn from_protocol(
        p: &ProtocolDef,
        mu: InputDistribution,
        budget: u64,
    ) -> Result<Self, MeasureError> {
        let table = run_all(p, budget)?;
        Self::new(table, mu)
    }

    pub fn new(table: ExecutionTable, mu: InputDistribution) -> Result<Self, MeasureError> {
        let p = &table.def;
        mu.check_against(p)?;
        let k = p.k;
        let mut variables = Vec::new();
        for i in 0..k {
            variables.push(format!("X{i}"));
        }
        for i in 0..k {
            variables.push(format!("R{i}"));
        }
        variables.push("RP".to_string());
        for kind in [
            TranscriptKind::Received,
            TranscriptKind::Bidirectional,
            TranscriptKind::BidirectionalByRound,
            TranscriptKind::BidirectionalByLot,
        ] {
            for i in 0..k {
                variables.push(kind.var(i));
            }
        }
        for i in 0..k {
            variables.push(format!("OUT{i}"));
        }
        if p.family.is_some() {
            for i in 0..k {
                variables.push(format!("F{i}"));
            }
        }
        variables.push("PI".to_string());

        let tape_w = BigRational::new(BigInt::from(1), BigInt::from(table.tape_count()));
        let mut outcomes = Vec::new();
        let mut rows = Vec::new();
        for (x, w) in mu.weights() {
            let xi = table.input_index(x).ok_or_else(|| {
                MeasureError::InvalidDistribution(format!("input {x:?} not enumerated"))
            })?;
            let f = p.family.as_ref().map(|f| f.eval(x));
            for ti in 0..table.tape_count() {
                let e = table.get(xi, ti);
                let b = |s: BitString| Value::Bits(s);
                let mut t: Vec<Value> = Vec::with_capacity(variables.len());
                t.extend(e.inputs.iter().cloned().map(b));
                t.extend(e.tapes.private.iter().cloned().map(b));
                t.push(b(e.tapes.public.clone()));
                t.extend((0..k).map(|i| b(e.transcript(i))));
                t.extend((0..k).map(|i| b(e.bidirectional(i))));
                t.extend((0..k).map(|i| b(e.bidirectional_by_round(i))));
                t.extend((0..k).map(|i| b(e.bidirectional_by_lot(i))));
                t.extend(e.outputs.iter().cloned().map(b));
                if let Some(f) = &f {
                    t.extend(f.iter().cloned().map(b));
                }
                t.push(b(e.full_transcript()));
                outcomes.push((t, w * &tape_w));
                rows.push((xi, ti));
            }
        }
        let joint = JointDistribution::new(variables, outcomes)?;
        let (nums, denom) = joint.integer_weights();
        Ok(Self {
            table,
            mu,
            joint,
            nums,
            denom,
            rows,
        })
    }

    pub fn def(&self) -> &ProtocolDef {
        &self.table.def
    }

    pub fn k(&self) -> usize {
        self.table.def.k
    }

    pub fn joint(&self) -> &JointDistribution {
        &self.joint
    }

    /// (input index, tape index) of each joint outcome.
    pub fn rows(&self) -> &[(usize, usize)] {
        &self.rows
    }

    fn names(prefix: &str, players: impl IntoIterator<Item = usize>) -> Vec<String> {
        players
            .into_iter()
            .map(|j| format!("{prefix}{j}"))
            .collect()
    }

    fn others(&self, i: usize) -> Vec<usize> {
        (0..self.k()).filter(|&j| j != i).collect()
    }

    /// I(a; b | given) on the joint law, by variable names.
    pub fn mi(&self, a: &[String], b: &[String], given: &[String]) -> Result<f64, MeasureError> {
        let plan = self.mi_plan(a, b, given)?;
        Ok(plan.eval_integer(&self.nums, &self.denom))
    }

    pub(crate) fn mi_plan(
        &self,
        a: &[String],
        b: &[String],
        given: &[String],
    ) -> Result<MiPlan, MeasureError> {
        let sa = VariableSelector::new(a)?;
        let sb = VariableSelector::new(b)?;
        let sg = if given.is_empty() {
            None
        } else {
            Some(VariableSelector::new(given)?)
        };
        Ok(MiPlan::mutual_info(&self.joint, &sa, &sb, sg.as_ref())?)
    }

    /// H(a | given) on the joint law.
    pub fn cond_entropy(&self, a: &[String], given: &[String]) -> Result<f64, MeasureError> {
        let sa = VariableSelector::new(a)?;
        let sg = if given.is_empty() {
            None
        } else {
            Some(VariableSelector::new(given)?)
        };
        Ok(MiPlan::cond_entropy(&self.joint, &sa, sg.as_ref())?
            .eval_integer(&self.nums, &self.denom))
    }

    fn own(&self, i: usize) -> Vec<String> {
        vec![format!("X{i}"), format!("R{i}"), "RP".to_string()]
    }

    /// Worst-case total communication over every input and tape.
    pub fn cc(&self) -> usize {
        self.table
            .executions
            .iter()
            .map(|e| e.total_bits)
            .max()
            .unwrap_or(0)
    }

    /// Expected total communication under mu and uniform tapes.
    pub fn acc(&self) -> BigRational {
        let mut total = BigRational::zero();
        for (o, &(xi, ti)) in self.rows.iter().enumerate() {
            let bits = self.table.get(xi, ti).total_bits;
            total += &self.joint.outcomes()[o].1 * BigRational::from_integer(BigInt::from(bits));
        }
        total
    }

    /// Per player: I(X_-i ; T_i | X_i R_i R^p) with T_i the chosen transcript.
    pub fn ic_terms_with(&self, kind: TranscriptKind) -> Result<Vec<f64>, MeasureError> {
        (0..self.k())
            .map(|i| {
                self.mi(
                    &Self::names("X", self.others(i)),
                    &[kind.var(i)],
                    &self.own(i),
                )
            })
            .collect()
    }

    pub fn ic_terms(&self) -> Result<Vec<f64>, MeasureError> {
        self.ic_terms_with(TranscriptKind::Received)
    }

    /// Internal information cost.
    pub fn ic(&self) -> Result<f64, MeasureError> {
        Ok(self.ic_terms()?.iter().sum())
    }

    /// Per player: I(X_-i ; Pi_i R_-i | X_i R_i R^p).
    pub fn pic_terms(&self) -> Result<Vec<f64>, MeasureError> {
        (0..self.k())
            .map(|i| {
                let mut b = vec![format!("PI{i}")];
                b.extend(Self::names("R", self.others(i)));
                self.mi(&Self::names("X", self.others(i)), &b, &self.own(i))
            })
            .collect()
    }

    /// Public information cost.
    pub fn pic(&self) -> Result<f64, MeasureError> {
        Ok(self.pic_terms()?.iter().sum())
    }

    /// Per player: I(R_-i ; X_-i | X_i Pi_i R_i R^p).
    pub fn random_terms(&self) -> Result<Vec<f64>, MeasureError> {
        (0..self.k())
            .map(|i| {
                let mut given = self.own(i);
                given.push(format!("PI{i}"));
                self.mi(
                    &Self::names("R", self.others(i)),
                    &Self::names("X", self.others(i)),
                    &given,
                )
            })
            .collect()
    }

    /// (ic, random term) with ic + random term = pic.
    pub fn pic_decomposition(&self) -> Result<(f64, f64), MeasureError> {
        Ok((self.ic()?, self.random_terms()?.iter().sum()))
    }

    /// Sum over players of I(X_-i ; Pi_i | X_i R_i R^p f_i(X)).
    pub fn privacy_leakage_terms(&self) -> Result<Vec<f64>, MeasureError> {
        if self.def().family.is_none() {
            return Err(MeasureError::MissingFamily(self.def().name.clone()));
        }
        (0..self.k())
            .map(|i| {
                let mut given = self.own(i);
                given.push(format!("F{i}"));
                self.mi(
                    &Self::names("X", self.others(i)),
                    &[format!("PI{i}")],
                    &given,
                )
            })
            .collect()
    }

    pub fn privacy_leakage(&self) -> Result<f64, MeasureError> {
        Ok(self.privacy_leakage_terms()?.iter().sum())
    }

    /// H(Pi | X R^p).
    pub fn transcript_entropy(&self) -> Result<f64, MeasureError> {
        let mut given = Self::names("X", 0..self.k());
        given.push("RP".into());
        self.cond_entropy(&["PI".to_string()], &given)
    }

    /// Per player: I(X_i ; bidirectional transcript of i).
    pub fn spy_terms(&self) -> Result<Vec<f64>, MeasureError> {
        (0..self.k())
            .map(|i| self.mi(&[format!("X{i}")], &[format!("PIB{i}")], &[]))
            .collect()
    }

    pub fn spy_info(&self) -> Result<f64, MeasureError> {
        Ok(self.spy_terms()?.iter().sum())
    }

    /// Outputs equal f(x) on every execution whose input has positive mass.
    pub fn check_zero_error(&self) -> Result<(), MeasureError> {
        let family = self
            .def()
            .family
            .as_ref()
            .ok_or_else(|| MeasureError::MissingFamily(self.def().name.clone()))?;
        for &(xi, ti) in &self.rows {
            let e = self.table.get(xi, ti);
            let want = family.eval(&e.inputs);
            if e.outputs != want {
                return Err(MeasureError::NotZeroError(format!(
                    "inputs {:?}, tapes {:?}: outputs {:?}, expected {:?}",
                    e.inputs, e.tapes, e.outputs, want
                )));
            }
        }
        Ok(())
    }

    /// Probability under mu and tapes that some output differs from f(x).
    pub fn error_probability(&self) -> Result<BigRational, MeasureError> {
        let family = self
            .def()
            .family
            .as_ref()
            .ok_or_else(|| MeasureError::MissingFamily(self.def().name.clone()))?;
        let mut err = BigRational::zero();
        for (o, &(xi, ti)) in self.rows.iter().enumerate() {
            let e = self.table.get(xi, ti);
            if e.outputs != family.eval(&e.inputs) {
                err += &self.joint.outcomes()[o].1;
            }
        }
        Ok(err)
    }

    /// Every measure in one report.
    pub fn report(&self, tolerance: f64) -> Result<MeasureReport, MeasureError> {
        let acc = self.acc();
        let (ic, random) = self.pic_decomposition()?;
        Ok(MeasureReport {
            protocol: self.def().name.clone(),
            distribution: self.mu.id.clone(),
            cc: self.cc() as u64,
            acc: acc.to_string(),
            acc_bits: acc.to_f64().unwrap_or(f64::NAN),
            ic,
            pic: self.pic()?,
            pic_random_term: random,
            privacy_leakage: match self.def().family {
                Some(_) => Some(self.privacy_leakage()?),
                None => None,
            },
            transcript_entropy: self.transcript_entropy()?,
            spy_info: self.spy_info()?,
            tolerance,
        })
    }
}
