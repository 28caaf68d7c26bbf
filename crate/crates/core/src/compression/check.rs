use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use super::{CompressRun, CompressionError, Compressor, LcpBox, LcpMode};
use crate::bits::BitString;
use crate::measures::{format_bits, ser_bits, ser_opt_bits};

/// Settings for [`compression_theorem_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremCheck {
    /// Additive error budget for the randomized lcp boxes.
    pub delta: f64,
    pub randomized: bool,
    /// Runs per (input, tape) pair with randomized boxes.
    pub trials: usize,
    pub seed: u64,
}

impl Default for TheoremCheck {
    fn default() -> Self {
        Self {
            delta: 0.01,
            randomized: false,
            trials: 200,
            seed: 0,
        }
    }
}

/// Measured behaviour of the compressed protocol next to the quantities the
/// compression bound is stated in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompressionReport {
    pub protocol: String,
    pub distribution: String,
    pub lcp: String,
    /// Per-call error of the randomized boxes.
    #[serde(serialize_with = "ser_opt_bits")]
    pub lcp_eps: Option<f64>,
    pub delta: f64,
    pub k: usize,
    pub cc: usize,
    #[serde(serialize_with = "ser_bits")]
    pub ic: f64,
    /// Sum over players of H(Pi_i | X_i R^p).
    #[serde(serialize_with = "ser_bits")]
    pub entropy_sum: f64,
    /// Expected sum over players of log2(1/w(t_i)).
    #[serde(serialize_with = "ser_bits")]
    pub expected_log_weight: f64,
    /// Expected number of stages in which a player moved.
    #[serde(serialize_with = "ser_bits")]
    pub expected_moves: f64,
    /// Expected number of stages including the final one.
    #[serde(serialize_with = "ser_bits")]
    pub expected_stages: f64,
    pub max_moves: usize,
    #[serde(serialize_with = "ser_bits")]
    pub expected_lcp_calls: f64,
    /// Expected communication of the compressed protocol.
    #[serde(serialize_with = "ser_bits")]
    pub acc: f64,
    pub original_error: String,
    #[serde(serialize_with = "ser_bits")]
    pub measured_error: f64,
    #[serde(serialize_with = "ser_bits")]
    pub allowed_error: f64,
    /// Every exact run recovered the true profile.
    pub profiles_exact: bool,
    pub stage_ties: usize,
    #[serde(serialize_with = "ser_bits")]
    pub bound: f64,
    #[serde(serialize_with = "ser_opt_bits")]
    pub ratio: Option<f64>,
    pub trials: usize,
}

impl CompressionReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.serialize(self).expect("report serializes");
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| out.push_str(&format!("{k:<20} {v}\n"));
        let opt = |v: Option<f64>| v.map(format_bits).unwrap_or_else(|| "n/a".into());
        line("protocol", self.protocol.clone());
        line("distribution", self.distribution.clone());
        line("lcp", self.lcp.clone());
        line("lcp_eps", opt(self.lcp_eps));
        line("delta", self.delta.to_string());
        line("k", self.k.to_string());
        line("cc", self.cc.to_string());
        line("ic", format_bits(self.ic));
        line("entropy_sum", format_bits(self.entropy_sum));
        line("expected_log_weight", format_bits(self.expected_log_weight));
        line("expected_moves", format_bits(self.expected_moves));
        line("expected_stages", format_bits(self.expected_stages));
        line("max_moves", self.max_moves.to_string());
        line("expected_lcp_calls", format_bits(self.expected_lcp_calls));
        line("acc", format_bits(self.acc));
        line("original_error", self.original_error.clone());
        line("measured_error", format_bits(self.measured_error));
        line("allowed_error", format_bits(self.allowed_error));
        line("profiles_exact", self.profiles_exact.to_string());
        line("stage_ties", self.stage_ties.to_string());
        line("bound", format_bits(self.bound));
        line("ratio", opt(self.ratio));
        line("trials", self.trials.to_string());
        out
    }
}

fn f(v: &BigRational) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

fn run_seed(seed: u64, run: usize, trial: usize) -> u64 {
    seed ^ (run as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (trial as u64).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// Runs the compression on every input and public tape with positive mass
/// and compares the result with the compression bound. With exact boxes the
/// compressed protocol must reproduce the original outputs; with randomized
/// boxes each call may err with probability delta / E[calls], and the
/// measured error must stay within original + delta (plus three standard
/// deviations of the Monte-Carlo estimate).
pub fn compression_theorem_check(
    c: &Compressor,
    cfg: &TheoremCheck,
) -> Result<CompressionReport, CompressionError> {
    if cfg.randomized && !(cfg.delta > 0.0 && cfg.delta < 1.0) {
        return Err(CompressionError::InvalidArgument(format!(
            "randomized boxes need 0 < delta < 1 (got {})",
            cfg.delta
        )));
    }
    if cfg.randomized && cfg.trials == 0 {
        return Err(CompressionError::InvalidArgument(
            "trials must be positive".into(),
        ));
    }
    let p = c.def();
    let k = p.k;
    let runs = c.weighted_runs();
    let table = &c.analysis.table;
    let reference = |xi: usize, ti: usize| -> Vec<BitString> {
        match &p.family {
            Some(fam) => fam.eval(&table.inputs[xi]),
            None => table.get(xi, ti).outputs.clone(),
        }
    };
    let original_error = match &p.family {
        Some(_) => c.analysis.error_probability()?,
        None => BigRational::zero(),
    };

    let exact: Vec<CompressRun> = runs
        .par_iter()
        .map(|(xi, ti, _)| c.compress_run(*xi, *ti, &mut LcpBox::exact(), false))
        .collect::<Result<_, _>>()?;
    let mut moves = BigRational::zero();
    let mut stages = BigRational::zero();
    let mut calls = BigRational::zero();
    let mut bits = BigRational::zero();
    let mut exact_error = BigRational::zero();
    let mut log_weight = 0.0;
    let mut ties = 0;
    for ((xi, ti, w), r) in runs.iter().zip(&exact) {
        let int = |v: u64| BigRational::from_integer(v.into());
        moves += w * int(r.moves as u64);
        stages += w * int(r.stages as u64);
        calls += w * int(r.lcp_calls);
        bits += w * int(r.bits());
        log_weight += f(w) * r.log_inverse_weights.iter().sum::<f64>();
        ties += r.ties;
        if r.outputs != reference(*xi, *ti) {
            exact_error += w;
        }
    }
    let profiles_exact = exact.iter().all(|r| r.correct);
    if exact_error != original_error {
        return Err(CompressionError::InvariantBreach(format!(
            "exact compression error {exact_error} differs from the original {original_error}"
        )));
    }

    let ic = c.analysis.ic()?;
    let entropy_sum: f64 = c.entropy_terms()?.iter().sum();
    let cc = c.cc();
    let base = (k * k) as f64 * ic * (cc.max(2) as f64).log2();

    let (lcp, lcp_eps, acc, measured, allowed, bound, call_mean) = if cfg.randomized {
        let eps = cfg.delta / f(&calls);
        let outcomes: Vec<(f64, f64, f64)> = runs
            .par_iter()
            .enumerate()
            .map(|(n, (xi, ti, _))| {
                let want = reference(*xi, *ti);
                let mut fails = 0usize;
                let mut bits = 0u64;
                let mut calls = 0u64;
                for t in 0..cfg.trials {
                    let mut b = LcpBox::new(LcpMode::Randomized { eps }, run_seed(cfg.seed, n, t));
                    let r = c.compress_run(*xi, *ti, &mut b, false)?;
                    if r.outputs != want {
                        fails += 1;
                    }
                    bits += r.bits();
                    calls += r.lcp_calls;
                }
                let t = cfg.trials as f64;
                Ok((fails as f64 / t, bits as f64 / t, calls as f64 / t))
            })
            .collect::<Result<_, CompressionError>>()?;
        let mut err = 0.0;
        let mut acc = 0.0;
        let mut call_mean = 0.0;
        let mut var = 0.0;
        let target = (f(&original_error) + cfg.delta).min(1.0);
        for ((_, _, w), (e, b, cl)) in runs.iter().zip(&outcomes) {
            let w = f(w);
            err += w * e;
            acc += w * b;
            call_mean += w * cl;
            var += w * w * target * (1.0 - target) / cfg.trials as f64;
        }
        let allowed = target + 3.0 * var.sqrt();
        let bound = if base > 0.0 {
            base * (base / cfg.delta).log2().max(1.0)
        } else {
            0.0
        };
        ("randomized", Some(eps), acc, err, allowed, bound, call_mean)
    } else {
        let e = f(&original_error);
        ("exact", None, f(&bits), e, e, base, f(&calls))
    };
    if measured > allowed + 1e-12 {
        return Err(CompressionError::ErrorBound { measured, allowed });
    }

    Ok(CompressionReport {
        protocol: p.name.clone(),
        distribution: c.analysis.mu.id.clone(),
        lcp: lcp.into(),
        lcp_eps,
        delta: if cfg.randomized { cfg.delta } else { 0.0 },
        k,
        cc,
        ic,
        entropy_sum,
        expected_log_weight: log_weight,
        expected_moves: f(&moves),
        expected_stages: f(&stages),
        max_moves: exact.iter().map(|r| r.moves).max().unwrap_or(0),
        expected_lcp_calls: call_mean,
        acc,
        original_error: original_error.to_string(),
        measured_error: measured,
        allowed_error: allowed,
        profiles_exact,
        stage_ties: ties,
        bound,
        ratio: (bound > 0.0).then(|| acc / bound),
        trials: if cfg.randomized { cfg.trials } else { 1 },
    })
}
