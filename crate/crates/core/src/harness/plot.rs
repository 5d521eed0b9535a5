use std::fmt::Write as _;
use std::path::Path;

use super::config::Method;
use super::suite::{load_results_csv, ResultRow};
use crate::error::Result;

/// Height in pixels of the accuracy axis (0 to 1).
pub const PLOT_HEIGHT: f64 = 300.0;
const BAR_WIDTH: f64 = 18.0;
const GROUP_GAP: f64 = 24.0;
const LEFT: f64 = 60.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 70.0;
const RIGHT: f64 = 180.0;

fn colour(m: Method) -> &'static str {
    match m {
        Method::Cosml => "#1f77b4",
        Method::CosmlUniform => "#ff7f0e",
        Method::CosmlNoMixed => "#2ca02c",
        Method::MamlPooled => "#d62728",
        Method::NearestPrototype => "#9467bd",
    }
}

/// SVG bar chart with one bar per row that has metrics, grouped by holdout
/// domain, with ±CI error bars. Each bar carries `data-mean` and each error
/// bar `data-halfwidth` so the chart can be read back.
pub fn render_svg(rows: &[ResultRow]) -> String {
    let bars: Vec<(&ResultRow, f64, f64)> = rows
        .iter()
        .filter_map(|r| Some((r, r.mean_accuracy?, r.ci95_halfwidth.unwrap_or(0.0))))
        .collect();
    let mut holdouts: Vec<usize> = bars.iter().map(|b| b.0.holdout_id).collect();
    holdouts.sort_unstable();
    holdouts.dedup();

    let plot_width = bars.len() as f64 * BAR_WIDTH + (holdouts.len() as f64 + 1.0) * GROUP_GAP;
    let width = LEFT + plot_width.max(2.0 * GROUP_GAP) + RIGHT;
    let height = TOP + PLOT_HEIGHT + BOTTOM;
    let y_of = |v: f64| TOP + PLOT_HEIGHT * (1.0 - v);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.1}" height="{height:.1}" viewBox="0 0 {width:.1} {height:.1}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{LEFT}" y="20" font-size="14">Mean accuracy with 95% confidence intervals</text>"#
    );

    let axis_end = LEFT + plot_width.max(2.0 * GROUP_GAP);
    let _ = writeln!(s, r#"<g class="axes" stroke="black">"#);
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{:.3}"/>"#,
        y_of(0.0)
    );
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{:.3}" x2="{axis_end:.3}" y2="{:.3}"/>"#,
        y_of(0.0),
        y_of(0.0)
    );
    let _ = writeln!(s, "</g>");
    for tick in 0..=5 {
        let v = tick as f64 / 5.0;
        let y = y_of(v);
        let _ = writeln!(
            s,
            r#"<line x1="{:.3}" y1="{y:.3}" x2="{LEFT}" y2="{y:.3}" stroke="black"/>"#,
            LEFT - 4.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.3}" y="{:.3}" text-anchor="end">{v:.1}</text>"#,
            LEFT - 6.0,
            y + 4.0
        );
    }

    let mut x = LEFT + GROUP_GAP;
    for &h in &holdouts {
        let group: Vec<_> = bars.iter().filter(|b| b.0.holdout_id == h).collect();
        let start = x;
        for (row, mean, half) in group {
            let top = y_of(*mean);
            let _ = writeln!(
                s,
                r#"<rect class="bar" x="{x:.3}" y="{top:.3}" width="{BAR_WIDTH}" height="{:.3}" fill="{}" data-method="{}" data-holdout="{}" data-seed="{}" data-mean="{mean}"/>"#,
                PLOT_HEIGHT * mean,
                colour(row.method),
                row.method,
                row.holdout_id,
                row.seed,
            );
            let cx = x + BAR_WIDTH / 2.0;
            let _ = writeln!(
                s,
                r#"<line class="errorbar" x1="{cx:.3}" y1="{:.3}" x2="{cx:.3}" y2="{:.3}" stroke="black" data-halfwidth="{half}"/>"#,
                y_of(mean - half),
                y_of(mean + half),
            );
            x += BAR_WIDTH;
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.3}" y="{:.3}" text-anchor="middle">holdout {h}</text>"#,
            (start + x) / 2.0,
            y_of(0.0) + 16.0
        );
        x += GROUP_GAP;
    }

    let mut methods: Vec<Method> = bars.iter().map(|b| b.0.method).collect();
    methods.sort_unstable();
    methods.dedup();
    for (i, m) in methods.iter().enumerate() {
        let y = TOP + 16.0 * i as f64;
        let lx = axis_end + 16.0;
        let _ = writeln!(
            s,
            r#"<rect x="{lx:.3}" y="{y:.3}" width="10" height="10" fill="{}"/>"#,
            colour(*m)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.3}" y="{:.3}">{m}</text>"#,
            lx + 14.0,
            y + 9.0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Reads a results CSV and writes its bar chart to `out`.
pub fn plot(csv_path: &Path, out: &Path) -> Result<()> {
    let rows = load_results_csv(csv_path)?;
    std::fs::write(out, render_svg(&rows))?;
    Ok(())
}
