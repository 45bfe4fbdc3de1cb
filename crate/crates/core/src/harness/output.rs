use std::io::Write;

use serde_json::{json, Map, Number, Value};

use super::{ConvergenceCurve, ImprovementDistribution, Summary};
use crate::error::Result;

pub const CURVES_HEADER: &str = "policy,n_T,sigma,bias,m";
pub const IMPROVEMENT_HEADER: &str = "qubits,state_index,improvement";

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn number(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    format_float(x).parse::<Number>().map(Value::Number).unwrap_or(Value::Null)
}

pub fn write_curves_csv<'a, W: Write>(out: &mut W, curves: impl IntoIterator<Item = &'a ConvergenceCurve>) -> Result<()> {
    writeln!(out, "{CURVES_HEADER}")?;
    for c in curves {
        for p in &c.points {
            writeln!(
                out,
                "{},{},{},{},{}",
                c.policy.name(),
                p.total_shots,
                format_float(p.sigma),
                format_float(p.bias),
                p.realizations
            )?;
        }
    }
    Ok(())
}

pub fn summary_json(summary: &Summary) -> Value {
    let slopes: Map<String, Value> = summary
        .tail_slope
        .iter()
        .map(|(k, v)| (k.clone(), v.map_or(Value::Null, number)))
        .collect();
    let mut v = json!({
        "task": summary.task,
        "config_digest": summary.config_digest,
        "tail_slope": slopes,
        "improvement": summary.improvement.map_or(Value::Null, number),
        "improvement_ci": summary.improvement_ci.map_or(Value::Null, |(lo, hi)| json!([number(lo), number(hi)])),
    });
    if let Some(e) = &summary.improvement_error {
        v["improvement_error"] = json!(e);
    }
    v
}

pub fn write_summary_json<W: Write>(out: &mut W, summary: &Summary) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, &summary_json(summary))?;
    writeln!(out)?;
    Ok(())
}

pub fn write_improvement_csv<'a, W: Write>(
    out: &mut W,
    sweeps: impl IntoIterator<Item = &'a ImprovementDistribution>,
) -> Result<()> {
    writeln!(out, "{IMPROVEMENT_HEADER}")?;
    for d in sweeps {
        for (j, v) in d.improvements.iter().enumerate() {
            writeln!(out, "{},{},{}", d.qubits, j, format_float(*v))?;
        }
    }
    Ok(())
}
