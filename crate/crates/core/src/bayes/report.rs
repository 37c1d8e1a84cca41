use std::fmt::Write as _;
use std::io::Write;

use super::fit::{logit_shift_to_probability, CorrelationResult, Summary};
use crate::error::{Error, Result};

/// Topic label used for the pooled γ̄ row.
pub const POOLED_LABEL: &str = "(pooled)";

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("writing correlations: {e}"))
}

/// One row per (feature, topic) plus a pooled row per feature.
pub fn write_correlations_csv<W: Write>(results: &[CorrelationResult], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["feature", "topic", "mean", "sd", "q5", "q95", "rhat", "ess"]).map_err(csv_err)?;
    for r in results {
        let rows = r.topics.iter().map(|t| (t.topic.as_str(), &t.gamma)).chain([(POOLED_LABEL, &r.pooled)]);
        for (topic, s) in rows {
            let nums = [s.mean, s.sd, s.q5, s.q95, s.rhat, s.ess].map(|v| format!("{v:.6}"));
            out.write_record([r.feature.as_str(), topic].into_iter().chain(nums.iter().map(String::as_str)))
                .map_err(csv_err)?;
        }
    }
    out.flush().map_err(|e| Error::Config(format!("writing correlations: {e}")))?;
    Ok(())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Forest plot: one row per feature with a pooled interval and faint
/// per-topic intervals. The lower axis is the logit effect, the upper axis
/// the matching probability-point shift.
pub fn write_forest_svg<W: Write>(results: &[CorrelationResult], mut w: W) -> Result<()> {
    let (left, right, top, row_h) = (190.0, 40.0, 60.0, 28.0);
    let plot_w = 480.0;
    let width = left + plot_w + right;
    let height = top + row_h * results.len().max(1) as f64 + 60.0;
    let extent = results
        .iter()
        .flat_map(|r| r.topics.iter().map(|t| t.gamma).chain([r.pooled]))
        .flat_map(|s: Summary| [s.q5.abs(), s.q95.abs()])
        .filter(|v| v.is_finite())
        .fold(0.5f64, f64::max);
    let lim = (extent * 10.0).ceil() / 10.0;
    let x = |v: f64| left + (v + lim) / (2.0 * lim) * plot_w;
    let bottom = top + row_h * results.len().max(1) as f64;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r##"<line x1="{0}" y1="{top}" x2="{0}" y2="{bottom}" stroke="#999" stroke-dasharray="3,3"/>"##, x(0.0));
    for k in -4..=4 {
        let v = lim * k as f64 / 4.0;
        let px = x(v);
        let _ = writeln!(s, r#"<line x1="{px}" y1="{bottom}" x2="{px}" y2="{}" stroke="black"/>"#, bottom + 4.0);
        let _ = writeln!(s, r#"<text x="{px}" y="{}" text-anchor="middle">{v:.2}</text>"#, bottom + 16.0);
        let p = logit_shift_to_probability(v).points;
        let _ = writeln!(s, r#"<line x1="{px}" y1="{top}" x2="{px}" y2="{}" stroke="black"/>"#, top - 4.0);
        let _ = writeln!(s, r#"<text x="{px}" y="{}" text-anchor="middle">{p:+.1}</text>"#, top - 8.0);
    }
    let _ = writeln!(s, r#"<line x1="{left}" y1="{bottom}" x2="{}" y2="{bottom}" stroke="black"/>"#, left + plot_w);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{}" y2="{top}" stroke="black"/>"#, left + plot_w);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">logit effect (γ)</text>"#, left + plot_w / 2.0, bottom + 34.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">probability shift (points)</text>"#, left + plot_w / 2.0, top - 26.0);
    for (i, r) in results.iter().enumerate() {
        let y = top + row_h * (i as f64 + 0.5);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, left - 8.0, y + 4.0, escape(&r.feature));
        let n = r.topics.len().max(1) as f64;
        for (k, t) in r.topics.iter().enumerate() {
            let ty = y - row_h * 0.35 + row_h * 0.7 * (k as f64 + 0.5) / n;
            let g = t.gamma;
            let _ = writeln!(s, r##"<line x1="{}" y1="{ty}" x2="{}" y2="{ty}" stroke="#9ab" stroke-width="1"><title>{}</title></line>"##, x(g.q5), x(g.q95), escape(&t.topic));
        }
        let g = r.pooled;
        let color = if g.excludes_zero() { "#c33" } else { "#333" };
        let _ = writeln!(s, r#"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2.5"/>"#, x(g.q5), x(g.q95));
        let _ = writeln!(s, r#"<circle cx="{}" cy="{y}" r="3.5" fill="{color}"/>"#, x(g.mean));
    }
    s.push_str("</svg>\n");
    w.write_all(s.as_bytes()).map_err(|e| Error::io("<svg>", e))
}
