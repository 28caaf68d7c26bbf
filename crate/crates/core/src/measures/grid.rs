use rayon::prelude::*;
use serde::Serialize;

use super::{Analysis, InputDistribution, MeasureError};
use crate::info::MiPlan;
use crate::model::ProtocolDef;

/// Best grid point found by [`sup_pic_grid`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridResult {
    /// Pr[X = 0] for player 0.
    pub alpha: f64,
    /// Pr[Y = 0] for player 1.
    pub beta: f64,
    #[serde(serialize_with = "super::report::ser_bits")]
    pub value: f64,
    pub points: usize,
}

/// Closed form of the AND protocol's public information cost when Bob's bit
/// is uniform, as a function of alpha = Pr[X = 0].
pub fn and_pic_formula(alpha: f64) -> f64 {
    let xlog = |p: f64| if p <= 0.0 { 0.0 } else { p * p.log2() };
    -xlog(alpha) - xlog(1.0 - alpha) + 1.0 - alpha
}

/// Maximizes pic over independent input laws Ber(alpha) x Ber(beta) on the
/// grid {0, step, 2 step, ..., 1}^2 for a two-player protocol with one-bit
/// inputs. Ties go to the smaller alpha, then the smaller beta.
pub fn sup_pic_grid(p: &ProtocolDef, step: f64, budget: u64) -> Result<GridResult, MeasureError> {
    let one_bit = |d: &Vec<crate::bits::BitString>| d.len() == 2 && d.iter().all(|b| b.len() == 1);
    if p.k != 2 || !p.input_domains.iter().all(one_bit) {
        return Err(MeasureError::InvalidArgument(
            "grid search needs two players with one-bit inputs".into(),
        ));
    }
    if !(step > 0.0 && step <= 1.0) {
        return Err(MeasureError::InvalidArgument(format!(
            "grid step {step} is not in (0, 1]"
        )));
    }
    let n = (1.0 / step).round() as usize;
    if ((n as f64) * step - 1.0).abs() > 1e-9 {
        return Err(MeasureError::InvalidArgument(format!(
            "grid step {step} does not divide 1"
        )));
    }

    let analysis = Analysis::from_protocol(p, InputDistribution::uniform(p), budget)?;
    let plans: Vec<MiPlan> = (0..2)
        .map(|i| {
            let j = 1 - i;
            analysis.mi_plan(
                &[format!("X{j}")],
                &[format!("PI{i}"), format!("R{j}")],
                &[format!("X{i}"), format!("R{i}"), "RP".into()],
            )
        })
        .collect::<Result<_, _>>()?;
    let tapes = analysis.table.tape_count() as f64;
    let bits: Vec<(bool, bool)> = analysis
        .rows()
        .iter()
        .map(|&(xi, _)| {
            let x = &analysis.table.inputs[xi];
            (x[0].bits()[0], x[1].bits()[0])
        })
        .collect();

    let eval = |alpha: f64, beta: f64, w: &mut Vec<f64>| {
        w.clear();
        w.extend(bits.iter().map(|&(a, b)| {
            let pa = if a { 1.0 - alpha } else { alpha };
            let pb = if b { 1.0 - beta } else { beta };
            pa * pb / tapes
        }));
        plans.iter().map(|pl| pl.eval_f64(w)).sum::<f64>()
    };

    let rows: Vec<(usize, usize, f64)> = (0..=n)
        .into_par_iter()
        .map(|i| {
            let alpha = i as f64 * step;
            let mut w = Vec::with_capacity(bits.len());
            let mut best = (0usize, f64::NEG_INFINITY);
            for j in 0..=n {
                let v = eval(alpha, j as f64 * step, &mut w);
                if v > best.1 {
                    best = (j, v);
                }
            }
            (i, best.0, best.1)
        })
        .collect();
    let mut best = (0usize, 0usize, f64::NEG_INFINITY);
    for (i, j, v) in rows {
        if v > best.2 {
            best = (i, j, v);
        }
    }
    Ok(GridResult {
        alpha: best.0 as f64 * step,
        beta: best.1 as f64 * step,
        value: best.2,
        points: (n + 1) * (n + 1),
    })
}
