//! JSON helpers. Keys come out sorted, rationals as "num/den" strings and floats rounded
//! to 12 significant digits.

use std::io::Write;
use std::path::Path;

use locallll::rational;
use locallll::verify::{DistributionReport, ExactTable};
use locallll::Rational;
use serde_json::{json, Value};

pub fn q(r: &Rational) -> Value {
    Value::String(rational::format(r))
}

pub fn f12(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let rounded: f64 = format!("{x:.11e}").parse().unwrap();
    json!(rounded)
}

pub fn exact_table(t: &ExactTable) -> Value {
    Value::Array(
        t.outcomes
            .iter()
            .zip(&t.probs)
            .map(|(o, p)| json!({"values": o, "p": q(p)}))
            .collect(),
    )
}

pub fn distribution(r: &DistributionReport) -> Value {
    let counts: Vec<Value> = r.exact.outcomes.iter().zip(&r.counts).map(|(o, c)| json!({"values": o, "count": c})).collect();
    json!({
        "runs": r.runs,
        "base_seed": r.base_seed,
        "exact": exact_table(&r.exact),
        "counts": counts,
        "outside_support": r.outside,
        "tv": f12(r.tv),
        "chi2": f12(r.chi2),
        "df": r.df,
        "p_value": f12(r.p_value),
    })
}

/// Min, max and mean of a list of integers.
pub fn stats(xs: &[u64]) -> Value {
    if xs.is_empty() {
        return json!({"min": null, "max": null, "mean": null});
    }
    let mean = xs.iter().map(|x| *x as f64).sum::<f64>() / xs.len() as f64;
    json!({"min": xs.iter().min(), "max": xs.iter().max(), "mean": f12(mean)})
}

/// `[[value, count], ...]` in increasing value order.
pub fn histogram(xs: &[u64]) -> Value {
    let mut h = std::collections::BTreeMap::new();
    for x in xs {
        *h.entry(*x).or_insert(0u64) += 1;
    }
    Value::Array(h.into_iter().map(|(k, c)| json!([k, c])).collect())
}

pub fn render(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).unwrap();
    s.push('\n');
    s
}

pub fn write_or_print(v: &Value, path: Option<&Path>) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, render(v)),
        None => std::io::stdout().write_all(render(v).as_bytes()),
    }
}
