use std::sync::Arc;

use super::{input_widths, Analysis, InputDistribution, MeasureError};
use crate::bits::BitString;
use crate::info::{mutual_info, JointDistribution, Value, VariableSelector};
use crate::model::{
    FunctionFamily, Mode, Program, ProgramError, ProtocolDef, RoundPlan, Tapes, View, Wait,
};

/// Positions of each tape inside the publicized tape: entry 0 is the
/// original public tape, entry 1 + i is player i's private tape. Bits are
/// dealt round-robin in that order, skipping tapes that are used up.
fn interleave_layout(p: &ProtocolDef) -> Vec<Vec<usize>> {
    let mut lens = vec![p.public_tape_bits];
    lens.extend(&p.private_tape_bits);
    let mut layout = vec![Vec::new(); lens.len()];
    let mut pos = 0;
    for step in 0..lens.iter().copied().max().unwrap_or(0) {
        for (t, &len) in lens.iter().enumerate() {
            if step < len {
                layout[t].push(pos);
                pos += 1;
            }
        }
    }
    layout
}

fn pick(tape: &BitString, positions: &[usize]) -> BitString {
    BitString::from_bits(positions.iter().map(|&q| tape.bits()[q]))
}

/// The publicized tape corresponding to an assignment of the original
/// protocol's tapes.
pub fn interleave_tapes(p: &ProtocolDef, tapes: &Tapes) -> BitString {
    let layout = interleave_layout(p);
    let total: usize = layout.iter().map(|l| l.len()).sum();
    let mut out = vec![false; total];
    let mut sources = vec![&tapes.public];
    sources.extend(tapes.private.iter());
    for (t, positions) in layout.iter().enumerate() {
        for (b, &q) in positions.iter().enumerate() {
            out[q] = sources[t].bits()[b];
        }
    }
    BitString::from_bits(out)
}

struct Publicized {
    inner: Arc<dyn Program>,
    layout: Vec<Vec<usize>>,
}

impl Program for Publicized {
    fn plan(
        &self,
        player: usize,
        round: usize,
        view: &View<'_>,
    ) -> Result<RoundPlan, ProgramError> {
        let private = pick(view.public_tape, &self.layout[1 + player]);
        let public = pick(view.public_tape, &self.layout[0]);
        self.inner.plan(
            player,
            round,
            &View {
                private_tape: &private,
                public_tape: &public,
                ..*view
            },
        )
    }
}

/// Moves every private tape onto the public tape by interleaving the k+1
/// tapes bit by bit. Each player reads its old private bits from their
/// slots on the public tape, so transcripts are unchanged for matching tape
/// assignments (see [`interleave_tapes`]).
pub fn publicize(p: &ProtocolDef) -> ProtocolDef {
    if !p.has_private_randomness() {
        return p.clone();
    }
    let layout = interleave_layout(p);
    let mut def = p.clone();
    def.name = format!("publicize({})", p.name);
    def.public_tape_bits = p.total_tape_bits();
    def.private_tape_bits = vec![0; p.k];
    def.program = Arc::new(Publicized {
        inner: p.program.clone(),
        layout,
    });
    def
}

struct FixedPublic {
    inner: Arc<dyn Program>,
    seed: BitString,
}

impl Program for FixedPublic {
    fn plan(
        &self,
        player: usize,
        round: usize,
        view: &View<'_>,
    ) -> Result<RoundPlan, ProgramError> {
        self.inner.plan(
            player,
            round,
            &View {
                public_tape: &self.seed,
                ..*view
            },
        )
    }
}

/// Result of [`derandomize_zero_error`].
#[derive(Debug, Clone)]
pub struct Derandomized {
    pub def: ProtocolDef,
    /// The chosen public tape value (empty for an already deterministic
    /// protocol).
    pub seed: BitString,
    /// t(r) = sum_i I(X_-i ; Pi_i | X_i, R^p = r) for every public tape r.
    pub t_values: Vec<(BitString, f64)>,
}

/// Fixes the public tape to the value minimizing the information revealed
/// given that tape. Requires a public-coin protocol that is zero-error on
/// the support of mu. Ties go to the lexicographically smallest tape.
pub fn derandomize_zero_error(
    p: &ProtocolDef,
    mu: &InputDistribution,
    budget: u64,
) -> Result<Derandomized, MeasureError> {
    if p.has_private_randomness() {
        return Err(MeasureError::InvalidArgument(
            "derandomization needs a public-coin protocol; publicize it first".into(),
        ));
    }
    let analysis = Analysis::from_protocol(p, mu.clone(), budget)?;
    analysis.check_zero_error()?;
    if p.public_tape_bits == 0 {
        return Ok(Derandomized {
            def: p.clone(),
            seed: BitString::new(),
            t_values: vec![(BitString::new(), analysis.ic()?)],
        });
    }
    let k = p.k;
    let table = &analysis.table;
    let mut variables: Vec<String> = (0..k).map(|i| format!("X{i}")).collect();
    variables.extend((0..k).map(|i| format!("PI{i}")));
    let mut t_values = Vec::with_capacity(table.tape_count());
    for (ti, tapes) in table.tapes.iter().enumerate() {
        let mut outcomes = Vec::new();
        for (x, w) in mu.weights() {
            let xi = table
                .input_index(x)
                .expect("distribution checked against domain");
            let e = table.get(xi, ti);
            let mut t: Vec<Value> = x.iter().cloned().map(Value::Bits).collect();
            t.extend((0..k).map(|i| Value::Bits(e.transcript(i))));
            outcomes.push((t, w.clone()));
        }
        let d = JointDistribution::new(variables.clone(), outcomes)?;
        let mut t = 0.0;
        for i in 0..k {
            let others: Vec<String> = (0..k)
                .filter(|&j| j != i)
                .map(|j| format!("X{j}"))
                .collect();
            t += mutual_info(
                &d,
                &VariableSelector::new(&others)?,
                &VariableSelector::new([format!("PI{i}")])?,
                Some(&VariableSelector::new([format!("X{i}")])?),
            )?;
        }
        t_values.push((tapes.public.clone(), t));
    }
    let mut best = 0;
    for (n, (_, t)) in t_values.iter().enumerate() {
        if *t < t_values[best].1 {
            best = n;
        }
    }
    let seed = t_values[best].0.clone();
    let mut def = p.clone();
    def.name = format!("derandomize({}, r={})", p.name, seed);
    def.public_tape_bits = 0;
    def.program = Arc::new(FixedPublic {
        inner: p.program.clone(),
        seed: seed.clone(),
    });
    Ok(Derandomized {
        def,
        seed,
        t_values,
    })
}

struct Product {
    p: Arc<dyn Program>,
    q: Arc<dyn Program>,
    input_widths: Vec<usize>,
    p_private: Vec<usize>,
    p_public: usize,
}

impl Program for Product {
    fn plan(
        &self,
        player: usize,
        round: usize,
        view: &View<'_>,
    ) -> Result<RoundPlan, ProgramError> {
        let w = self.input_widths[player];
        let split = |b: &BitString, at: usize| (b.prefix(at), b.slice(at, b.len()));
        let (xp, xq) = split(view.input, w);
        let (rp, rq) = split(view.private_tape, self.p_private[player]);
        let (pp, pq) = split(view.public_tape, self.p_public);

        let mut read = 0;
        let mut p_out: Option<BitString> = None;
        let mut p_rounds = 0;
        loop {
            p_rounds += 1;
            let plan = self.p.plan(
                player,
                p_rounds,
                &View {
                    player,
                    input: &xp,
                    private_tape: &rp,
                    public_tape: &pp,
                    received: view.received.get(..read).ok_or_else(|| {
                        ProgramError("view is shorter than the first protocol's reads".into())
                    })?,
                },
            )?;
            if let Some(o) = &plan.output {
                p_out = Some(o.clone());
            }
            let halted = plan.wait == Wait::Halt;
            if p_rounds == round {
                return Ok(RoundPlan {
                    sends: plan.sends,
                    output: None,
                    wait: if halted {
                        Wait::From(Vec::new())
                    } else {
                        plan.wait
                    },
                });
            }
            match plan.wait {
                Wait::Halt => break,
                Wait::From(s) => read += s.len(),
                Wait::Any(_) => {
                    return Err(ProgramError(
                        "products of relaxed protocols are not supported".into(),
                    ))
                }
            }
        }
        let plan = self.q.plan(
            player,
            round - p_rounds,
            &View {
                player,
                input: &xq,
                private_tape: &rq,
                public_tape: &pq,
                received: &view.received[read..],
            },
        )?;
        let output = match plan.output {
            Some(oq) => {
                let mut o = p_out.ok_or_else(|| {
                    ProgramError("first protocol halted without an output".into())
                })?;
                o.extend(&oq);
                Some(o)
            }
            None => None,
        };
        Ok(RoundPlan { output, ..plan })
    }
}

fn concat_domains(a: &[BitString], b: &[BitString]) -> Vec<BitString> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            let mut c = x.clone();
            c.extend(y);
            out.push(c);
        }
    }
    out
}

/// Runs `p` and then `q` on disjoint slices of each player's input and
/// tapes: every player first plays its part of `p` to completion, then its
/// part of `q`, and outputs its `p` output followed by its `q` output.
/// Every player of `p` must halt.
pub fn product_protocol(p: &ProtocolDef, q: &ProtocolDef) -> Result<ProtocolDef, MeasureError> {
    if p.k != q.k {
        return Err(MeasureError::InvalidArgument(format!(
            "product of a {}-player and a {}-player protocol",
            p.k, q.k
        )));
    }
    if p.mode != Mode::Restricted || q.mode != Mode::Restricted {
        return Err(MeasureError::InvalidArgument(
            "products are defined for restricted-model protocols".into(),
        ));
    }
    let widths = input_widths(p)?;
    let k = p.k;
    let family = match (&p.family, &q.family) {
        (Some(fp), Some(fq)) => {
            let (fp, fq, widths) = (fp.clone(), fq.clone(), widths.clone());
            Some(FunctionFamily::new(move |xs: &[BitString]| {
                let xp: Vec<BitString> =
                    xs.iter().zip(&widths).map(|(x, &w)| x.prefix(w)).collect();
                let xq: Vec<BitString> = xs
                    .iter()
                    .zip(&widths)
                    .map(|(x, &w)| x.slice(w, x.len()))
                    .collect();
                fp.eval(&xp)
                    .into_iter()
                    .zip(fq.eval(&xq))
                    .map(|(mut a, b)| {
                        a.extend(&b);
                        a
                    })
                    .collect()
            }))
        }
        _ => None,
    };
    Ok(ProtocolDef {
        name: format!("product({}, {})", p.name, q.name),
        k,
        input_domains: (0..k)
            .map(|i| concat_domains(&p.input_domains[i], &q.input_domains[i]))
            .collect(),
        output_domains: (0..k)
            .map(|i| concat_domains(&p.output_domains[i], &q.output_domains[i]))
            .collect(),
        private_tape_bits: (0..k)
            .map(|i| p.private_tape_bits[i] + q.private_tape_bits[i])
            .collect(),
        public_tape_bits: p.public_tape_bits + q.public_tape_bits,
        max_local_rounds: p.max_local_rounds + q.max_local_rounds + 1,
        mode: Mode::Restricted,
        program: Arc::new(Product {
            p: p.program.clone(),
            q: q.program.clone(),
            input_widths: widths,
            p_private: p.private_tape_bits.clone(),
            p_public: p.public_tape_bits,
        }),
        family,
    })
}

/// Weighted mean of t(r) over uniform r; equals the ic of the public-coin
/// protocol.
pub fn mean_t(t_values: &[(BitString, f64)]) -> f64 {
    if t_values.is_empty() {
        return 0.0;
    }
    t_values.iter().map(|(_, t)| t).sum::<f64>() / t_values.len() as f64
}
