//! Library half of the `aircsim` binary: scenario loading, output file
//! naming, SVG plotting, and time-series comparison. Kept out of `main.rs`
//! so the pieces are unit-testable.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};

use aircsim_core::workload::build_disaster_scenario;
use aircsim_core::{Scenario, SuccessWindow};

/// Loads a scenario by builtin name or TOML file path.
pub fn load_scenario(spec: &str) -> Result<Scenario> {
    match spec {
        "disaster-baseline" => Ok(build_disaster_scenario(false)),
        "disaster-uav" => Ok(build_disaster_scenario(true)),
        path => Scenario::from_path(Path::new(path))
            .with_context(|| format!("loading scenario {path}")),
    }
}

/// Parses a comma-separated seed list, e.g. `"1,2,10"`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<u64>()
                .with_context(|| format!("bad seed {s:?}"))
        })
        .collect()
}

/// One parsed row of a time-series CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub town: u32,
    pub window_start: f64,
    pub window_end: f64,
    pub completed: u64,
    pub succeeded: u64,
    pub rate: Option<f64>,
}

/// Parses the CSV produced by the simulator's metrics collector.
pub fn parse_time_series(csv: &str) -> Result<Vec<CsvRow>> {
    let mut lines = csv.lines();
    let header = lines.next().context("empty CSV")?;
    if header != "town,window_start,window_end,completed,succeeded,rate" {
        bail!("unrecognized CSV header: {header}");
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            bail!("line {}: expected 6 fields, got {}", n + 2, fields.len());
        }
        let ctx = |what| format!("line {}: bad {what}", n + 2);
        rows.push(CsvRow {
            town: fields[0].parse().with_context(|| ctx("town"))?,
            window_start: fields[1].parse().with_context(|| ctx("window_start"))?,
            window_end: fields[2].parse().with_context(|| ctx("window_end"))?,
            completed: fields[3].parse().with_context(|| ctx("completed"))?,
            succeeded: fields[4].parse().with_context(|| ctx("succeeded"))?,
            rate: if fields[5].is_empty() {
                None
            } else {
                Some(fields[5].parse().with_context(|| ctx("rate"))?)
            },
        });
    }
    Ok(rows)
}

fn phase_edges(boundaries: &[f64], horizon: f64) -> Vec<(f64, f64)> {
    let mut edges = vec![0.0];
    edges.extend(boundaries.iter().copied().filter(|&b| b > 0.0 && b < horizon));
    edges.push(horizon);
    edges.windows(2).map(|w| (w[0], w[1])).collect()
}

fn mean_in(rows: &[&CsvRow], from: f64, to: f64) -> Option<f64> {
    let rates: Vec<f64> = rows
        .iter()
        .filter(|r| r.window_start >= from && r.window_start < to)
        .filter_map(|r| r.rate)
        .collect();
    (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64)
}

/// Compares two time-series CSVs phase by phase. `boundaries` split the
/// horizon into phases; defaults are supplied by the CLI. Errors if the two
/// series do not share the same towns and windowing.
pub fn compare_series(csv_a: &str, csv_b: &str, boundaries: &[f64]) -> Result<String> {
    let a = parse_time_series(csv_a)?;
    let b = parse_time_series(csv_b)?;
    let shape = |rows: &[CsvRow]| -> Vec<(u32, u64, u64)> {
        rows.iter()
            .map(|r| (r.town, r.window_start.to_bits(), r.window_end.to_bits()))
            .collect()
    };
    if shape(&a) != shape(&b) {
        bail!("time series have different towns or windowing; cannot compare");
    }
    let horizon = a
        .iter()
        .map(|r| r.window_end)
        .fold(0.0f64, f64::max);

    let mut by_town_a: BTreeMap<u32, Vec<&CsvRow>> = BTreeMap::new();
    let mut by_town_b: BTreeMap<u32, Vec<&CsvRow>> = BTreeMap::new();
    for r in &a {
        by_town_a.entry(r.town).or_default().push(r);
    }
    for r in &b {
        by_town_b.entry(r.town).or_default().push(r);
    }

    let fmt = |v: Option<f64>| match v {
        Some(r) => format!("{r:.4}"),
        None => "-".into(),
    };
    let mut out = String::from("town  phase              a       b       delta\n");
    for (town, rows_a) in &by_town_a {
        let rows_b = &by_town_b[town];
        for (from, to) in phase_edges(boundaries, horizon) {
            let ma = mean_in(rows_a, from, to);
            let mb = mean_in(rows_b, from, to);
            let delta = match (ma, mb) {
                (Some(x), Some(y)) => format!("{:+.4}", y - x),
                _ => "-".into(),
            };
            out.push_str(&format!(
                "{town:<5} [{from:>6.0},{to:>6.0})  {:<7} {:<7} {delta}\n",
                fmt(ma),
                fmt(mb)
            ));
        }
    }
    Ok(out)
}

const PLOT_COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

/// Renders per-town success-rate series as a simple standalone SVG.
/// Empty windows break the polyline rather than being interpolated over.
pub fn render_plot(series_by_town: &[(u32, Vec<SuccessWindow>)]) -> String {
    const W: f64 = 800.0;
    const H: f64 = 400.0;
    const ML: f64 = 50.0; // left margin
    const MB: f64 = 30.0; // bottom margin
    const MT: f64 = 15.0;
    const MR: f64 = 15.0;

    let horizon = series_by_town
        .iter()
        .flat_map(|(_, s)| s.iter().map(|w| w.window_end))
        .fold(1.0f64, f64::max);
    let x = |t: f64| ML + (t / horizon) * (W - ML - MR);
    let y = |r: f64| H - MB - r * (H - MB - MT);

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    );
    svg.push_str(&format!(
        "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    ));
    // axes
    svg.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n",
        H - MB,
        W - MR
    ));
    svg.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - MB
    ));
    for frac in [0.0, 0.25, 0.5, 0.75, 1.0] {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{frac:.2}</text>\n",
            ML - 5.0,
            y(frac) + 4.0
        ));
        svg.push_str(&format!(
            "<line x1=\"{ML}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"#ddd\"/>\n",
            y(frac),
            W - MR
        ));
    }
    for i in 0..=4 {
        let t = horizon * i as f64 / 4.0;
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{t:.0}</text>\n",
            x(t),
            H - MB + 18.0
        ));
    }

    for (i, (town, series)) in series_by_town.iter().enumerate() {
        let color = PLOT_COLORS[i % PLOT_COLORS.len()];
        // split into segments at empty windows
        let mut segments: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
        for w in series {
            match w.rate {
                Some(r) => {
                    let mid = (w.window_start + w.window_end) / 2.0;
                    segments.last_mut().unwrap().push((x(mid), y(r)));
                }
                None => {
                    if !segments.last().unwrap().is_empty() {
                        segments.push(Vec::new());
                    }
                }
            }
        }
        for seg in segments.iter().filter(|s| s.len() > 1) {
            let points: Vec<String> = seg.iter().map(|(px, py)| format!("{px:.1},{py:.1}")).collect();
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
                points.join(" ")
            ));
        }
        for seg in segments.iter().filter(|s| s.len() == 1) {
            let (px, py) = seg[0];
            svg.push_str(&format!(
                "<circle cx=\"{px:.1}\" cy=\"{py:.1}\" r=\"2\" fill=\"{color}\"/>\n"
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\">town {town}</text>\n",
            W - MR - 70.0,
            MT + 14.0 * (i + 1) as f64
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
