//! Scaling-curve SVGs: success rate against budget, one polyline per
//! (strategy, retrieval, feedback) series.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::results::ResultRow;
use crate::HarnessError;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

type Series = BTreeMap<String, BTreeMap<usize, f64>>;

fn series_label(r: &ResultRow) -> String {
    format!("{} {} {}", r.strategy, r.retrieval, r.feedback)
}

/// Success rate per series and budget for the rows selected by `keep`.
fn rates(rows: &[ResultRow], keep: impl Fn(&ResultRow) -> bool) -> Series {
    let mut acc: BTreeMap<String, BTreeMap<usize, (usize, usize)>> = BTreeMap::new();
    for r in rows.iter().filter(|r| keep(r)) {
        let e = acc.entry(series_label(r)).or_default().entry(r.budget).or_default();
        e.0 += usize::from(r.success);
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(k, v)| (k, v.into_iter().map(|(b, (s, n))| (b, s as f64 / n as f64)).collect()))
        .collect()
}

/// Mean over tasks of each task's rate.
fn average(rows: &[ResultRow], tasks: &[String]) -> Series {
    let per_task: Vec<Series> = tasks.iter().map(|t| rates(rows, |r| &r.task == t)).collect();
    let mut acc: BTreeMap<String, BTreeMap<usize, (f64, usize)>> = BTreeMap::new();
    for s in &per_task {
        for (label, points) in s {
            for (&b, &rate) in points {
                let e = acc.entry(label.clone()).or_default().entry(b).or_default();
                e.0 += rate;
                e.1 += 1;
            }
        }
    }
    acc.into_iter()
        .map(|(k, v)| (k, v.into_iter().map(|(b, (s, n))| (b, s / n as f64)).collect()))
        .collect()
}

pub fn render_svg(title: &str, series: &Series) -> String {
    let budgets: Vec<usize> = {
        let mut b: Vec<usize> = series.values().flat_map(|p| p.keys().copied()).collect();
        b.sort_unstable();
        b.dedup();
        b
    };
    let (lo, hi) = (budgets[0] as f64, *budgets.last().unwrap() as f64);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x = |b: f64| LEFT + if hi > lo { (b - lo) / (hi - lo) * plot_w } else { plot_w / 2.0 };
    let y = |r: f64| TOP + (1.0 - r) * plot_h;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{title}</text>"#, LEFT + plot_w / 2.0);
    for i in 0..=4 {
        let r = i as f64 / 4.0;
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{r:.2}</text>"##,
            y(r),
            LEFT + plot_w,
            y(r),
            LEFT - 6.0,
            y(r) + 4.0
        );
    }
    for &b in &budgets {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{b}</text>"#,
            x(b as f64),
            TOP + plot_h + 18.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">expanded nodes</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">success rate</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for (i, (label, points)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        if points.len() == 1 {
            // A single-budget baseline is drawn across the whole axis.
            let (_, &r) = points.iter().next().unwrap();
            let _ = writeln!(
                s,
                r#"<line x1="{LEFT}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2" stroke-dasharray="6 4"/>"#,
                y(r),
                LEFT + plot_w,
                y(r)
            );
        } else {
            let pts: Vec<String> = points
                .iter()
                .map(|(&b, &r)| format!("{:.2},{:.2}", x(b as f64), y(r)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                pts.join(" ")
            );
        }
        for (&b, &r) in points {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                x(b as f64),
                y(r)
            );
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = LEFT + plot_w + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{label}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// `(file name, svg)` for every task and for the average over tasks.
pub fn build_plots(rows: &[ResultRow]) -> Result<Vec<(String, String)>, HarnessError> {
    let mut budgets: Vec<usize> = rows.iter().map(|r| r.budget).collect();
    budgets.sort_unstable();
    budgets.dedup();
    if budgets.len() < 2 {
        return Err(HarnessError::InsufficientData(format!(
            "need at least 2 budgets, found {}",
            budgets.len()
        )));
    }
    let mut tasks: Vec<String> = Vec::new();
    for r in rows {
        if !tasks.contains(&r.task) {
            tasks.push(r.task.clone());
        }
    }
    let mut out = Vec::new();
    for t in &tasks {
        let series = rates(rows, |r| &r.task == t);
        out.push((format!("{t}.svg"), render_svg(t, &series)));
    }
    out.push(("average.svg".to_string(), render_svg("average", &average(rows, &tasks))));
    Ok(out)
}

pub fn emit_plots(rows: &[ResultRow], dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir)?;
    build_plots(rows)?
        .into_iter()
        .map(|(name, svg)| {
            let path = dir.join(name);
            std::fs::write(&path, svg)?;
            Ok(path)
        })
        .collect()
}
