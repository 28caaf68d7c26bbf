use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bits::BitString;

/// Outcome of one lcp box call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LcpAnswer {
    Equal,
    /// First index (from 0) at which the strings differ.
    FirstDiff(usize),
    /// The shorter string is a proper prefix of the longer one; `common` is
    /// its length.
    LengthsDiffer {
        common: usize,
    },
}

impl LcpAnswer {
    /// The reported disagreement position, if any.
    pub fn index(self) -> Option<usize> {
        match self {
            LcpAnswer::Equal => None,
            LcpAnswer::FirstDiff(j) => Some(j),
            LcpAnswer::LengthsDiffer { common } => Some(common),
        }
    }
}

/// One lcp call with its accounted communication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LcpCall {
    pub answer: LcpAnswer,
    pub bits: u64,
}

/// ceil(log2(v)) for v >= 1.
pub(crate) fn ceil_log2(v: u64) -> u64 {
    if v <= 1 {
        0
    } else {
        u64::from(64 - (v - 1).leading_zeros())
    }
}

/// Width of one length or index field for strings of length at most `max`.
pub fn field_width(max: usize) -> u64 {
    ceil_log2(max as u64 + 2)
}

/// The true answer, without any accounting.
pub fn lcp_answer(x: &BitString, y: &BitString) -> LcpAnswer {
    let n = x.len().min(y.len());
    match x.prefix(n).first_difference(&y.prefix(n)) {
        Some(j) => LcpAnswer::FirstDiff(j),
        None if x.len() == y.len() => LcpAnswer::Equal,
        None => LcpAnswer::LengthsDiffer { common: n },
    }
}

/// Deterministic lcp box: both lengths are exchanged, then one side sends
/// the index. Costs three fields of `field_width(max(|x|, |y|))` bits.
pub fn lcp_exact(x: &BitString, y: &BitString) -> LcpCall {
    let w = field_width(x.len().max(y.len()));
    LcpCall {
        answer: lcp_answer(x, y),
        bits: 3 * w,
    }
}

/// Number of equality tests and hash width used by [`lcp_randomized`] on
/// strings whose common length is `n`.
pub fn randomized_parameters(n: usize, eps: f64) -> (u64, u64) {
    let tests = ceil_log2(n as u64) + 1;
    let h = (tests as f64 / eps).log2().ceil().max(1.0) as u64;
    (tests, h)
}

struct Hasher {
    rows: Vec<Vec<u64>>,
}

impl Hasher {
    fn new(rng: &mut impl RngCore, h: usize, words: usize) -> Self {
        let rows = (0..h)
            .map(|_| (0..words).map(|_| rng.next_u64()).collect())
            .collect();
        Self { rows }
    }

    /// Inner products mod 2 of the first `len` bits with each random row.
    fn hash(&self, words: &[u64], len: usize) -> Vec<bool> {
        let full = len / 64;
        let rest = len % 64;
        self.rows
            .iter()
            .map(|row| {
                let mut acc = 0u32;
                for t in 0..full {
                    acc ^= (words[t] & row[t]).count_ones();
                }
                if rest > 0 {
                    let mask = !0u64 << (64 - rest);
                    acc ^= (words[full] & row[full] & mask).count_ones();
                }
                acc & 1 == 1
            })
            .collect()
    }
}

/// Public-coin lcp box with error at most `eps`: exchange lengths, then
/// binary-search the first differing prefix length on the common part with
/// inner-product hashes of the prefixes. Each test sends an h-bit hash and
/// a one-bit verdict.
pub fn lcp_randomized(x: &BitString, y: &BitString, eps: f64, rng: &mut impl RngCore) -> LcpCall {
    let w = field_width(x.len().max(y.len()));
    let n = x.len().min(y.len());
    let mut bits = 2 * w;
    let tail = |common| {
        if x.len() == y.len() {
            LcpAnswer::Equal
        } else {
            LcpAnswer::LengthsDiffer { common }
        }
    };
    if n == 0 {
        return LcpCall {
            answer: tail(0),
            bits,
        };
    }
    let (_, h) = randomized_parameters(n, eps);
    let xw = x.to_words();
    let yw = y.to_words();
    let hasher = Hasher::new(rng, h as usize, n.div_ceil(64));
    let mut equal = |len: usize| {
        bits += h + 1;
        hasher.hash(&xw, len) == hasher.hash(&yw, len)
    };
    if equal(n) {
        return LcpCall {
            answer: tail(n),
            bits,
        };
    }
    let (mut lo, mut hi) = (0usize, n);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if equal(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    LcpCall {
        answer: LcpAnswer::FirstDiff(hi - 1),
        bits,
    }
}

/// Which lcp box a compression run uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum LcpMode {
    Exact,
    Randomized { eps: f64 },
}

/// An lcp box with its shared randomness.
pub struct LcpBox {
    mode: LcpMode,
    rng: ChaCha8Rng,
    calls: u64,
}

impl LcpBox {
    pub fn exact() -> Self {
        Self::new(LcpMode::Exact, 0)
    }

    pub fn randomized(eps: f64, seed: u64) -> Self {
        Self::new(LcpMode::Randomized { eps }, seed)
    }

    pub fn new(mode: LcpMode, seed: u64) -> Self {
        Self {
            mode,
            rng: ChaCha8Rng::seed_from_u64(seed),
            calls: 0,
        }
    }

    pub fn mode(&self) -> LcpMode {
        self.mode
    }

    pub fn is_exact(&self) -> bool {
        self.mode == LcpMode::Exact
    }

    pub fn calls(&self) -> u64 {
        self.calls
    }

    pub fn call(&mut self, x: &BitString, y: &BitString) -> LcpCall {
        self.calls += 1;
        match self.mode {
            LcpMode::Exact => lcp_exact(x, y),
            LcpMode::Randomized { eps } => lcp_randomized(x, y, eps, &mut self.rng),
        }
    }

    /// A fresh seed drawn from this box's randomness.
    pub fn fork_seed(&mut self) -> u64 {
        self.rng.random()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::bits;

    #[test]
    fn exact_examples() {
        assert_eq!(
            lcp_answer(&bits("0101"), &bits("0111")),
            LcpAnswer::FirstDiff(2)
        );
        assert_eq!(lcp_answer(&bits(""), &bits("")), LcpAnswer::Equal);
        assert_eq!(
            lcp_answer(&bits("10"), &bits("1")),
            LcpAnswer::LengthsDiffer { common: 1 }
        );
        assert_eq!(lcp_answer(&bits("00"), &bits("1")), LcpAnswer::FirstDiff(0));
        assert_eq!(lcp_exact(&bits("0101"), &bits("0111")).bits, 3 * 3);
    }

    #[test]
    fn randomized_equal_is_always_equal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = BitString::from_bits((0..300).map(|i| i % 7 == 0));
        for _ in 0..200 {
            assert_eq!(
                lcp_randomized(&x, &x, 0.1, &mut rng).answer,
                LcpAnswer::Equal
            );
        }
    }

    #[test]
    fn randomized_finds_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = BitString::from_bits((0..130).map(|i| i % 3 == 0));
        let mut wrong = 0;
        for j in [0, 1, 63, 64, 65, 127, 129] {
            let mut y = x.bits().to_vec();
            y[j] = !y[j];
            let y = BitString::from_bits(y);
            for _ in 0..100 {
                if lcp_randomized(&x, &y, 0.01, &mut rng).answer != LcpAnswer::FirstDiff(j) {
                    wrong += 1;
                }
            }
        }
        assert!(wrong <= 10, "{wrong} wrong answers out of 700");
    }

    #[test]
    fn parameters() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(5), 3);
        assert_eq!(randomized_parameters(1024, 0.5), (11, 5));
    }
}
