//! Finite-difference verification of analytic gradients.

use super::matrix::DenseMatrix;
use crate::error::{EngineError, Result};

/// Named parameter handed to the closure under test.
#[derive(Debug, Clone)]
pub struct ParamEntry {
    pub name: String,
    pub value: DenseMatrix,
}

impl ParamEntry {
    pub fn new(name: impl Into<String>, value: DenseMatrix) -> Self {
        ParamEntry {
            name: name.into(),
            value,
        }
    }
}

/// Worst single entry found during a check.
#[derive(Debug, Clone)]
pub struct WorstEntry {
    pub param: String,
    pub row: usize,
    pub col: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub entries_checked: usize,
    pub worst: Option<WorstEntry>,
    /// Max relative error per parameter, in input order.
    pub per_param: Vec<(String, f64)>,
}

/// Relative error used throughout: `|a - b| / max(1, |a|, |b|)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Compare the closure's analytic gradients against central finite
/// differences at step `h`, sweeping every entry of every parameter.
///
/// The closure receives the current parameter values and a flag saying
/// whether gradients are needed; it must return the scalar loss, plus
/// gradients aligned with `params` when asked. It is evaluated twice at the
/// base point and must reproduce the loss bit for bit; a mismatch means
/// hidden state (an unseeded RNG, epoch-dependent sampling) and is reported
/// as a contract violation rather than a gradient error.
pub fn grad_check<F>(params: &[ParamEntry], mut eval: F, h: f64) -> Result<GradCheckReport>
where
    F: FnMut(&[ParamEntry], bool) -> Result<(f64, Option<Vec<DenseMatrix>>)>,
{
    let (base_loss, grads) = eval(params, true)?;
    let grads = grads.ok_or_else(|| {
        EngineError::contract("grad_check", "closure returned no gradients when asked")
    })?;
    if grads.len() != params.len() {
        return Err(EngineError::contract(
            "grad_check",
            format!("{} gradients for {} parameters", grads.len(), params.len()),
        ));
    }
    let (replay_loss, _) = eval(params, false)?;
    if replay_loss.to_bits() != base_loss.to_bits() {
        return Err(EngineError::contract(
            "grad_check",
            format!(
                "closure is nondeterministic: loss {base_loss:?} then {replay_loss:?} \
                 at the same point"
            ),
        ));
    }

    let mut work: Vec<ParamEntry> = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        entries_checked: 0,
        worst: None,
        per_param: Vec::with_capacity(params.len()),
    };
    for (pi, param) in params.iter().enumerate() {
        if grads[pi].shape() != param.value.shape() {
            return Err(EngineError::contract(
                "grad_check",
                format!(
                    "gradient for {} has shape {:?}, parameter is {:?}",
                    param.name,
                    grads[pi].shape(),
                    param.value.shape()
                ),
            ));
        }
        let (rows, cols) = param.value.shape();
        let mut param_max = 0.0f64;
        for r in 0..rows {
            for c in 0..cols {
                let orig = param.value.get(r, c);
                work[pi].value.set(r, c, orig + h);
                let (plus, _) = eval(&work, false)?;
                work[pi].value.set(r, c, orig - h);
                let (minus, _) = eval(&work, false)?;
                work[pi].value.set(r, c, orig);
                let numeric = (plus - minus) / (2.0 * h);
                let analytic = grads[pi].get(r, c);
                let rel = relative_error(analytic, numeric);
                report.entries_checked += 1;
                param_max = param_max.max(rel);
                if rel > report.max_rel_err {
                    report.max_rel_err = rel;
                    report.worst = Some(WorstEntry {
                        param: param.name.clone(),
                        row: r,
                        col: c,
                        analytic,
                        numeric,
                        rel_err: rel,
                    });
                }
            }
        }
        report.per_param.push((param.name.clone(), param_max));
    }
    Ok(report)
}
