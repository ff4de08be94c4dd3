use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::json;

use super::{EvalError, EvalResult};
use crate::stats::least_squares;

const CSV_HEADER: [&str; 9] = [
    "id",
    "task",
    "accuracy",
    "combined",
    "norm",
    "token_count",
    "injected_continuations",
    "answers",
    "sub_scores",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportPaths {
    pub summary: PathBuf,
    pub records: PathBuf,
    pub scatter: PathBuf,
}

/// `<base>/run-<unix seconds>-seed<seed>`.
pub fn run_dir(base: &Path, seed: u64) -> PathBuf {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    base.join(format!("run-{secs}-seed{seed}"))
}

/// Writes `summary.json`, `records.csv` and `scatter.svg` into `out_dir`,
/// creating it if needed.
pub fn emit_report(result: &EvalResult, out_dir: &Path) -> Result<ReportPaths, EvalError> {
    std::fs::create_dir_all(out_dir)?;
    let paths = ReportPaths {
        summary: out_dir.join("summary.json"),
        records: out_dir.join("records.csv"),
        scatter: out_dir.join("scatter.svg"),
    };

    let summary = json!({
        "records": result.per_record.len(),
        "aggregate_accuracy": result.aggregate_accuracy,
        "aggregate_diversity": result.aggregate_diversity,
        "aggregate_norm": result.aggregate_norm,
        "pearson_acc_div": result.pearson_acc_div,
        "mean_injected_continuations": if result.per_record.is_empty() {
            0.0
        } else {
            result.per_record.iter().map(|r| r.injected_continuations as f64).sum::<f64>()
                / result.per_record.len() as f64
        },
    });
    std::fs::write(&paths.summary, serde_json::to_string_pretty(&summary).expect("plain json") + "\n")?;

    let mut w = csv::Writer::from_path(&paths.records).map_err(csv_io)?;
    w.write_record(CSV_HEADER).map_err(csv_io)?;
    for r in &result.per_record {
        let answers = serde_json::to_string(&r.answers).expect("plain json");
        let subs = serde_json::to_string(&r.diversity.sub_scores()).expect("plain json");
        w.write_record([
            r.id.clone(),
            r.task.clone(),
            r.accuracy.to_string(),
            r.diversity.d_combined.unwrap_or(0.0).to_string(),
            r.diversity.d_norm.unwrap_or(0.0).to_string(),
            r.diversity.token_count.to_string(),
            r.injected_continuations.to_string(),
            answers,
            subs,
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;

    let points: Vec<(f64, f64)> = result
        .per_record
        .iter()
        .map(|r| (r.diversity.d_combined.unwrap_or(0.0), r.accuracy))
        .collect();
    std::fs::write(&paths.scatter, scatter_svg(&points))?;
    Ok(paths)
}

fn csv_io(e: csv::Error) -> EvalError {
    EvalError::Io(std::io::Error::other(e.to_string()))
}

/// SVG scatter of `(diversity, accuracy)` points. When a least-squares line
/// exists it is drawn and its coefficients are stored in the `data-slope`
/// and `data-intercept` attributes at full precision.
pub fn scatter_svg(points: &[(f64, f64)]) -> String {
    const W: f64 = 480.0;
    const H: f64 = 360.0;
    const PAD: f64 = 40.0;
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let range = |v: &[f64]| -> (f64, f64) {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() || hi - lo < 1e-12 {
            (0.0, 1.0)
        } else {
            (lo, hi)
        }
    };
    let (x0, x1) = range(&xs);
    let (y0, y1) = range(&ys);
    let px = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let py = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<line x1="{PAD}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        H - PAD,
        W - PAD,
        H - PAD
    );
    let _ = writeln!(svg, r#"<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{}" stroke="black"/>"#, H - PAD);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">diversity</text>"#, W / 2.0, H - 8.0);
    let _ = writeln!(
        svg,
        r#"<text x="12" y="{}" transform="rotate(-90 12 {})" text-anchor="middle">accuracy</text>"#,
        H / 2.0,
        H / 2.0
    );
    for (x, y) in points {
        let _ = writeln!(
            svg,
            r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="#3366cc" data-x="{x}" data-y="{y}"/>"##,
            px(*x),
            py(*y)
        );
    }
    if let Ok(fit) = least_squares(&xs, &ys) {
        let _ = writeln!(
            svg,
            r##"<line class="fit" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#cc3333" data-slope="{}" data-intercept="{}"/>"##,
            px(x0),
            py(fit.slope * x0 + fit.intercept),
            px(x1),
            py(fit.slope * x1 + fit.intercept),
            fit.slope,
            fit.intercept
        );
    }
    svg.push_str("</svg>\n");
    svg
}
