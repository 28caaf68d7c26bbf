//! Finite joint distributions with exact rational weights and the usual
//! Shannon quantities over them (entropy, conditional entropy, conditional
//! mutual information).
//!
//! Probabilities stay exact; only the logarithms are floating point. Every
//! quantity is computed from exact group sums, so conditioning never
//! accumulates drift.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::bits::BitString;

/// Comparison tolerance, in bits, for equality checks between measures.
pub const TOLERANCE: f64 = 1e-9;

/// Negative mutual-information residue above this magnitude is treated as a
/// bug rather than rounding noise.
pub const MI_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InfoError {
    #[error("unknown variable {0:?}")]
    UnknownVariable(String),
    #[error("variable {0:?} appears in more than one selector")]
    OverlappingSelectors(String),
    #[error("selector must name at least one variable")]
    EmptySelector,
    #[error("function is not defined on support value {0}")]
    NotTotal(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("mutual information came out at {0}, below the rounding clamp")]
    NegativeResidue(f64),
}

/// A discrete value carried by a variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Bits(BitString),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Bits(b) => write!(f, "{b}"),
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<BitString> for Value {
    fn from(b: BitString) -> Self {
        Value::Bits(b)
    }
}

/// A non-empty set of variable names.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VariableSelector {
    names: Vec<String>,
}

impl VariableSelector {
    pub fn new<S: AsRef<str>>(names: impl IntoIterator<Item = S>) -> Result<Self, InfoError> {
        let mut out: Vec<String> = Vec::new();
        for n in names {
            let n = n.as_ref().to_string();
            if !out.contains(&n) {
                out.push(n);
            }
        }
        if out.is_empty() {
            return Err(InfoError::EmptySelector);
        }
        Ok(Self { names: out })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Union of two selectors, keeping first-seen order.
    pub fn union(&self, other: &VariableSelector) -> VariableSelector {
        let mut names = self.names.clone();
        for n in &other.names {
            if !names.contains(n) {
                names.push(n.clone());
            }
        }
        VariableSelector { names }
    }
}

/// Shorthand: `sel(&["X0", "R0"])`. Panics on an empty list.
pub fn sel(names: &[&str]) -> VariableSelector {
    VariableSelector::new(names.iter().copied()).expect("non-empty selector")
}

/// Exact probability mass over tuples of named discrete values.
#[derive(Clone, Debug)]
pub struct JointDistribution {
    variables: Vec<String>,
    outcomes: Vec<(Vec<Value>, BigRational)>,
    index: HashMap<String, usize>,
}

impl JointDistribution {
    /// Validates and builds a distribution. Weights must be positive, sum to
    /// exactly one, and outcome tuples must be distinct with the right arity.
    pub fn new(
        variables: Vec<String>,
        outcomes: Vec<(Vec<Value>, BigRational)>,
    ) -> Result<Self, InfoError> {
        let index = Self::build_index(&variables)?;
        let mut seen = HashSet::with_capacity(outcomes.len());
        let mut total = BigRational::zero();
        for (tuple, w) in &outcomes {
            if tuple.len() != variables.len() {
                return Err(InfoError::InvalidDistribution(format!(
                    "outcome has {} values for {} variables",
                    tuple.len(),
                    variables.len()
                )));
            }
            if !w.is_positive() {
                return Err(InfoError::InvalidDistribution(format!(
                    "non-positive weight {w}"
                )));
            }
            if !seen.insert(tuple) {
                return Err(InfoError::InvalidDistribution(
                    "duplicate outcome tuple".into(),
                ));
            }
            total += w;
        }
        if !total.is_one() {
            return Err(InfoError::InvalidDistribution(format!(
                "weights sum to {total}, not 1"
            )));
        }
        Ok(Self {
            variables,
            outcomes,
            index,
        })
    }

    /// Builds a distribution from possibly repeated tuples, merging duplicates
    /// and dropping zero weights. The merged weights must still sum to one.
    pub fn from_weighted(
        variables: Vec<String>,
        items: impl IntoIterator<Item = (Vec<Value>, BigRational)>,
    ) -> Result<Self, InfoError> {
        let mut merged: HashMap<Vec<Value>, BigRational> = HashMap::new();
        let mut order: Vec<Vec<Value>> = Vec::new();
        for (t, w) in items {
            if w.is_zero() {
                continue;
            }
            match merged.get_mut(&t) {
                Some(acc) => *acc += w,
                None => {
                    order.push(t.clone());
                    merged.insert(t, w);
                }
            }
        }
        let outcomes = order
            .into_iter()
            .map(|t| {
                let w = merged.remove(&t).expect("merged weight");
                (t, w)
            })
            .collect();
        Self::new(variables, outcomes)
    }

    fn build_index(variables: &[String]) -> Result<HashMap<String, usize>, InfoError> {
        let mut index = HashMap::with_capacity(variables.len());
        for (i, v) in variables.iter().enumerate() {
            if index.insert(v.clone(), i).is_some() {
                return Err(InfoError::InvalidDistribution(format!(
                    "variable {v:?} declared twice"
                )));
            }
        }
        Ok(index)
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn outcomes(&self) -> &[(Vec<Value>, BigRational)] {
        &self.outcomes
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn has_variable(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub(crate) fn resolve(&self, s: &VariableSelector) -> Result<Vec<usize>, InfoError> {
        s.names
            .iter()
            .map(|n| {
                self.index
                    .get(n)
                    .copied()
                    .ok_or_else(|| InfoError::UnknownVariable(n.clone()))
            })
            .collect()
    }

    /// Exact marginal law of the selected variables.
    pub fn marginal(
        &self,
        s: &VariableSelector,
    ) -> Result<BTreeMap<Vec<Value>, BigRational>, InfoError> {
        let idx = self.resolve(s)?;
        let mut out: BTreeMap<Vec<Value>, BigRational> = BTreeMap::new();
        for (t, w) in &self.outcomes {
            let key: Vec<Value> = idx.iter().map(|&i| t[i].clone()).collect();
            *out.entry(key).or_insert_with(BigRational::zero) += w;
        }
        Ok(out)
    }

    /// Weights rewritten over a common denominator: `(numerators, denominator)`.
    pub fn integer_weights(&self) -> (Vec<BigUint>, BigUint) {
        let mut denom = BigInt::one();
        for (_, w) in &self.outcomes {
            let d = w.denom();
            denom = num_integer_lcm(&denom, d);
        }
        let nums = self
            .outcomes
            .iter()
            .map(|(_, w)| {
                let n = w.numer() * (&denom / w.denom());
                n.to_biguint().expect("positive weight")
            })
            .collect();
        (nums, denom.to_biguint().expect("positive denominator"))
    }
}

fn num_integer_lcm(a: &BigInt, b: &BigInt) -> BigInt {
    use num_integer::Integer;
    a.lcm(b)
}

/// Assigns each outcome a dense group id by its values on `idx`.
fn group_ids(d: &JointDistribution, idx: &[usize]) -> (Vec<u32>, usize) {
    let mut ids: HashMap<Vec<&Value>, u32> = HashMap::new();
    let mut out = Vec::with_capacity(d.outcomes.len());
    for (t, _) in &d.outcomes {
        let key: Vec<&Value> = idx.iter().map(|&i| &t[i]).collect();
        let next = ids.len() as u32;
        out.push(*ids.entry(key).or_insert(next));
    }
    let n = ids.len();
    (out, n)
}

fn disjoint(sels: &[&VariableSelector]) -> Result<(), InfoError> {
    let mut seen = HashSet::new();
    for s in sels {
        for n in &s.names {
            if !seen.insert(n.as_str()) {
                return Err(InfoError::OverlappingSelectors(n.clone()));
            }
        }
    }
    Ok(())
}

/// A precompiled evaluation of I(A;B|C) (or H(A|C)) over a fixed outcome
/// list, reusable across many weight vectors on the same support.
#[derive(Clone, Debug)]
pub struct MiPlan {
    kind: PlanKind,
    abc: (Vec<u32>, usize),
    ac: (Vec<u32>, usize),
    bc: (Vec<u32>, usize),
    c: (Vec<u32>, usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum PlanKind {
    MutualInfo,
    CondEntropy,
}

impl MiPlan {
    pub fn mutual_info(
        d: &JointDistribution,
        a: &VariableSelector,
        b: &VariableSelector,
        given: Option<&VariableSelector>,
    ) -> Result<Self, InfoError> {
        let mut all = vec![a, b];
        if let Some(g) = given {
            all.push(g);
        }
        disjoint(&all)?;
        let ia = d.resolve(a)?;
        let ib = d.resolve(b)?;
        let ic = match given {
            Some(g) => d.resolve(g)?,
            None => Vec::new(),
        };
        let cat = |xs: &[&[usize]]| xs.concat();
        Ok(Self {
            kind: PlanKind::MutualInfo,
            abc: group_ids(d, &cat(&[&ia, &ib, &ic])),
            ac: group_ids(d, &cat(&[&ia, &ic])),
            bc: group_ids(d, &cat(&[&ib, &ic])),
            c: group_ids(d, &ic),
        })
    }

    pub fn cond_entropy(
        d: &JointDistribution,
        a: &VariableSelector,
        given: Option<&VariableSelector>,
    ) -> Result<Self, InfoError> {
        if let Some(g) = given {
            disjoint(&[a, g])?;
        }
        let ia = d.resolve(a)?;
        let ic = match given {
            Some(g) => d.resolve(g)?,
            None => Vec::new(),
        };
        let ac = group_ids(d, &[ia.as_slice(), ic.as_slice()].concat());
        let c = group_ids(d, &ic);
        Ok(Self {
            kind: PlanKind::CondEntropy,
            abc: ac.clone(),
            ac,
            bc: c.clone(),
            c,
        })
    }

    /// Evaluates with the distribution's own exact weights.
    pub fn eval_exact(&self, d: &JointDistribution) -> f64 {
        let (nums, denom) = d.integer_weights();
        self.eval_integer(&nums, &denom)
    }

    /// Evaluates with exact weights `nums[o] / denom`, as returned by
    /// [`JointDistribution::integer_weights`].
    pub fn eval_integer(&self, nums: &[BigUint], denom: &BigUint) -> f64 {
        let sums = |g: &(Vec<u32>, usize)| {
            let mut s = vec![BigUint::zero(); g.1];
            for (o, &id) in g.0.iter().enumerate() {
                s[id as usize] += &nums[o];
            }
            s.into_iter()
                .map(|v| v.to_f64().expect("finite sum"))
                .collect::<Vec<f64>>()
        };
        let total = denom.to_f64().expect("finite denominator");
        self.combine(
            &sums(&self.abc),
            &sums(&self.ac),
            &sums(&self.bc),
            &sums(&self.c),
            total,
        )
    }

    /// Evaluates with caller-supplied non-negative weights on the same
    /// outcomes (need not be normalized; zero weights are skipped).
    pub fn eval_f64(&self, weights: &[f64]) -> f64 {
        let sums = |g: &(Vec<u32>, usize)| {
            let mut s = vec![0.0f64; g.1];
            for (o, &id) in g.0.iter().enumerate() {
                s[id as usize] += weights[o];
            }
            s
        };
        let total: f64 = weights.iter().sum();
        self.combine(
            &sums(&self.abc),
            &sums(&self.ac),
            &sums(&self.bc),
            &sums(&self.c),
            total,
        )
    }

    fn combine(&self, abc: &[f64], ac: &[f64], bc: &[f64], c: &[f64], total: f64) -> f64 {
        // Every group has positive mass when it contains a positive outcome,
        // so logs are taken only over groups that actually occur.
        let mut acc = 0.0;
        match self.kind {
            PlanKind::MutualInfo => {
                let mut done = vec![false; abc.len()];
                for o in 0..self.abc.0.len() {
                    let g = self.abc.0[o] as usize;
                    if done[g] || abc[g] <= 0.0 {
                        continue;
                    }
                    done[g] = true;
                    let r = (abc[g] * c[self.c.0[o] as usize])
                        / (ac[self.ac.0[o] as usize] * bc[self.bc.0[o] as usize]);
                    acc += abc[g] * r.log2();
                }
                let v = acc / total;
                if v < 0.0 && v > -MI_CLAMP {
                    0.0
                } else {
                    v
                }
            }
            PlanKind::CondEntropy => {
                let mut done = vec![false; ac.len()];
                for o in 0..self.ac.0.len() {
                    let g = self.ac.0[o] as usize;
                    if done[g] || ac[g] <= 0.0 {
                        continue;
                    }
                    done[g] = true;
                    acc += ac[g] * (c[self.c.0[o] as usize] / ac[g]).log2();
                }
                (acc / total).max(0.0)
            }
        }
    }
}

/// H(A) in bits.
pub fn entropy(d: &JointDistribution, a: &VariableSelector) -> Result<f64, InfoError> {
    Ok(MiPlan::cond_entropy(d, a, None)?.eval_exact(d))
}

/// H(A | given) in bits.
pub fn cond_entropy(
    d: &JointDistribution,
    a: &VariableSelector,
    given: &VariableSelector,
) -> Result<f64, InfoError> {
    Ok(MiPlan::cond_entropy(d, a, Some(given))?.eval_exact(d))
}

/// I(A; B | given) in bits. Residue in (-1e-12, 0) is clamped to zero; a
/// more negative value is reported as an error.
pub fn mutual_info(
    d: &JointDistribution,
    a: &VariableSelector,
    b: &VariableSelector,
    given: Option<&VariableSelector>,
) -> Result<f64, InfoError> {
    let v = MiPlan::mutual_info(d, a, b, given)?.eval_exact(d);
    if v < 0.0 {
        return Err(InfoError::NegativeResidue(v));
    }
    Ok(v)
}

/// Extends `d` with a variable `new_name = f(A)`, where `f` is a finite map
/// that must cover every value of A in the support.
pub fn apply_function(
    d: &JointDistribution,
    a: &VariableSelector,
    f: &HashMap<Vec<Value>, Value>,
    new_name: &str,
) -> Result<JointDistribution, InfoError> {
    apply_with(d, a, |v| f.get(v).cloned(), new_name)
}

/// Like [`apply_function`] with the map given as a closure returning `None`
/// where undefined.
pub fn apply_with(
    d: &JointDistribution,
    a: &VariableSelector,
    f: impl Fn(&[Value]) -> Option<Value>,
    new_name: &str,
) -> Result<JointDistribution, InfoError> {
    let idx = d.resolve(a)?;
    if d.has_variable(new_name) {
        return Err(InfoError::InvalidDistribution(format!(
            "variable {new_name:?} already exists"
        )));
    }
    let mut variables = d.variables.clone();
    variables.push(new_name.to_string());
    let mut outcomes = Vec::with_capacity(d.outcomes.len());
    for (t, w) in &d.outcomes {
        let arg: Vec<Value> = idx.iter().map(|&i| t[i].clone()).collect();
        let y = f(&arg).ok_or_else(|| {
            InfoError::NotTotal(
                arg.iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            )
        })?;
        let mut t2 = t.clone();
        t2.push(y);
        outcomes.push((t2, w.clone()));
    }
    let index = JointDistribution::build_index(&variables)?;
    Ok(JointDistribution {
        variables,
        outcomes,
        index,
    })
}

/// Binary entropy h(p) in bits.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.log2() };
    term(p) + term(1.0 - p)
}

/// Convenience constructor for rational weights.
pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}
