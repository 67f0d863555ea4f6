//! Plot-ready exports of a fairness curve.

use serde_json::{json, Value};

use super::quadrature::{MAX_DOUBLINGS, PANEL_ORDER};
use super::sweep::FairnessCurve;

/// `m,expected_prob_cheat` rows. `header` lines are written first as `# ` comments.
pub fn curve_csv(curve: &FairnessCurve, header: &[String]) -> String {
    let mut out = String::new();
    for h in header {
        out.push_str("# ");
        out.push_str(h);
        out.push('\n');
    }
    out.push_str("m,expected_prob_cheat\n");
    for (m, v) in curve.values.iter().enumerate() {
        out.push_str(&format!("{m},{v}\n"));
    }
    out
}

pub fn quadrature_settings(tol: f64) -> Value {
    json!({
        "method": "adaptive composite Gauss-Legendre, split at threshold jumps",
        "panel_order": PANEL_ORDER,
        "max_doublings": MAX_DOUBLINGS,
        "tol": tol,
    })
}

/// Structured curve document; `values` are included when `with_values`.
pub fn curve_json(curve: &FairnessCurve, with_values: bool) -> Value {
    let mut doc = json!({
        "n": curve.n,
        "split": curve.split,
        "alpha_distribution": curve.alpha_dist,
        "quadrature": quadrature_settings(curve.quad_tol),
        "sup": { "m": curve.sup_m, "value": curve.sup_value },
    });
    if with_values {
        doc["values"] = json!(curve.values);
    }
    doc
}
