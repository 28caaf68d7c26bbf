use std::collections::HashMap;
use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::MeasureError;
use crate::bits::BitString;
use crate::model::ProtocolDef;

/// Exact probability weights over input tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct InputDistribution {
    pub id: String,
    weights: Vec<(Vec<BitString>, BigRational)>,
}

impl InputDistribution {
    /// Validates that weights are non-negative, tuples distinct, and the
    /// total is exactly one. Zero-weight entries are dropped.
    pub fn new(
        id: impl Into<String>,
        weights: Vec<(Vec<BitString>, BigRational)>,
    ) -> Result<Self, MeasureError> {
        let mut seen = HashMap::new();
        let mut total = BigRational::zero();
        let mut kept = Vec::with_capacity(weights.len());
        for (x, w) in weights {
            if w.is_negative() {
                return Err(MeasureError::InvalidDistribution(format!(
                    "negative weight {w}"
                )));
            }
            if seen.insert(x.clone(), ()).is_some() {
                return Err(MeasureError::InvalidDistribution(format!(
                    "input tuple {x:?} listed twice"
                )));
            }
            total += &w;
            if !w.is_zero() {
                kept.push((x, w));
            }
        }
        if !total.is_one() {
            return Err(MeasureError::InvalidDistribution(format!(
                "weights sum to {total}, not 1"
            )));
        }
        Ok(Self {
            id: id.into(),
            weights: kept,
        })
    }

    /// Uniform over the protocol's full input domain.
    pub fn uniform(p: &ProtocolDef) -> Self {
        let tuples = p.input_tuples();
        let w = BigRational::new(BigInt::one(), BigInt::from(tuples.len()));
        Self {
            id: "uniform".into(),
            weights: tuples.into_iter().map(|t| (t, w.clone())).collect(),
        }
    }

    /// Two one-bit players, independent, with Pr[X=0] = alpha and
    /// Pr[Y=0] = beta.
    pub fn independent_bits(alpha: &BigRational, beta: &BigRational) -> Result<Self, MeasureError> {
        let one = BigRational::one();
        let bit = |b: bool| BitString::from_bits([b]);
        let px = [alpha.clone(), &one - alpha];
        let py = [beta.clone(), &one - beta];
        let mut weights = Vec::new();
        for (a, wa) in px.iter().enumerate() {
            for (b, wb) in py.iter().enumerate() {
                weights.push((vec![bit(a == 1), bit(b == 1)], wa * wb));
            }
        }
        Self::new(format!("ber({alpha})xber({beta})"), weights)
    }

    /// Product law: player i's input is the concatenation of its inputs
    /// under `self` and under `other`.
    pub fn product(&self, other: &InputDistribution) -> Result<Self, MeasureError> {
        let k = self.weights.first().map(|w| w.0.len()).unwrap_or(0);
        if other.weights.first().map(|w| w.0.len()).unwrap_or(0) != k {
            return Err(MeasureError::InvalidDistribution(
                "product of distributions over different player counts".into(),
            ));
        }
        let mut weights = Vec::with_capacity(self.weights.len() * other.weights.len());
        for (x, wx) in &self.weights {
            for (y, wy) in &other.weights {
                let t = x
                    .iter()
                    .zip(y)
                    .map(|(a, b)| {
                        let mut c = a.clone();
                        c.extend(b);
                        c
                    })
                    .collect();
                weights.push((t, wx * wy));
            }
        }
        Self::new(format!("{}*{}", self.id, other.id), weights)
    }

    pub fn weights(&self) -> &[(Vec<BitString>, BigRational)] {
        &self.weights
    }

    pub fn weight_of(&self, x: &[BitString]) -> BigRational {
        self.weights
            .iter()
            .find(|(t, _)| t == x)
            .map(|(_, w)| w.clone())
            .unwrap_or_else(BigRational::zero)
    }

    /// True when every tuple of the protocol's input domain has positive
    /// weight.
    pub fn has_full_support(&self, p: &ProtocolDef) -> bool {
        self.weights.len() as u128 == p.input_count()
    }

    /// Checks that the support lies inside the protocol's input domain.
    pub fn check_against(&self, p: &ProtocolDef) -> Result<(), MeasureError> {
        for (x, _) in &self.weights {
            if x.len() != p.k || x.iter().zip(&p.input_domains).any(|(v, d)| !d.contains(v)) {
                return Err(MeasureError::InvalidDistribution(format!(
                    "input tuple {x:?} is outside the domain of {}",
                    p.name
                )));
            }
        }
        Ok(())
    }

    /// Parses the JSON file format: an array of `[[inputs...], num, den]`
    /// triples. Inputs are `0x`-prefixed hex (taking the low bits of the
    /// player's input width) or plain binary strings; numerator and
    /// denominator are integers or decimal strings.
    pub fn from_json_str(id: &str, text: &str, p: &ProtocolDef) -> Result<Self, MeasureError> {
        let rows: Vec<(Vec<String>, serde_json::Value, serde_json::Value)> =
            serde_json::from_str(text).map_err(|e| {
                MeasureError::InvalidDistribution(format!("distribution file: {e}"))
            })?;
        let widths = input_widths(p)?;
        let mut weights = Vec::with_capacity(rows.len());
        for (inputs, num, den) in rows {
            if inputs.len() != p.k {
                return Err(MeasureError::InvalidDistribution(format!(
                    "row has {} inputs for {} players",
                    inputs.len(),
                    p.k
                )));
            }
            let x = inputs
                .iter()
                .zip(&widths)
                .map(|(tok, &w)| parse_input_token(tok, w))
                .collect::<Result<Vec<_>, _>>()?;
            let n = parse_int(&num)?;
            let d = parse_int(&den)?;
            if d.is_zero() {
                return Err(MeasureError::InvalidDistribution("zero denominator".into()));
            }
            weights.push((x, BigRational::new(n, d)));
        }
        let dist = Self::new(id, weights)?;
        dist.check_against(p)?;
        Ok(dist)
    }

    pub fn from_path(path: &Path, p: &ProtocolDef) -> Result<Self, MeasureError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            MeasureError::InvalidDistribution(format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_json_str(&format!("file:{}", path.display()), &text, p)
    }
}

/// Fixed input width of each player, or an error if a domain mixes widths.
pub fn input_widths(p: &ProtocolDef) -> Result<Vec<usize>, MeasureError> {
    p.input_domains
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let w = d.first().map(|b| b.len()).unwrap_or(0);
            if d.iter().any(|b| b.len() != w) {
                Err(MeasureError::InvalidArgument(format!(
                    "player {i}'s input domain mixes lengths"
                )))
            } else {
                Ok(w)
            }
        })
        .collect()
}

fn parse_input_token(tok: &str, width: usize) -> Result<BitString, MeasureError> {
    let bad =
        || MeasureError::InvalidDistribution(format!("bad input token {tok:?} for width {width}"));
    if let Some(hex) = tok.strip_prefix("0x").or_else(|| tok.strip_prefix("0X")) {
        let mut bits = BitString::new();
        for c in hex.chars() {
            let v = c.to_digit(16).ok_or_else(bad)?;
            bits.extend(&BitString::from_uint(u64::from(v), 4));
        }
        if bits.len() < width {
            let mut padded = BitString::zeros(width - bits.len());
            padded.extend(&bits);
            return Ok(padded);
        }
        let excess = bits.len() - width;
        if bits.bits()[..excess].iter().any(|&b| b) {
            return Err(bad());
        }
        Ok(bits.slice(excess, bits.len()))
    } else {
        let b: BitString = tok.parse().map_err(|_| bad())?;
        if b.len() != width {
            return Err(bad());
        }
        Ok(b)
    }
}

fn parse_int(v: &serde_json::Value) -> Result<BigInt, MeasureError> {
    let bad = || MeasureError::InvalidDistribution(format!("bad integer {v}"));
    match v {
        serde_json::Value::Number(n) => n
            .as_i64()
            .map(BigInt::from)
            .or_else(|| n.as_u64().map(BigInt::from))
            .ok_or_else(bad),
        serde_json::Value::String(s) => s.parse().map_err(|_| bad()),
        _ => Err(bad()),
    }
}
