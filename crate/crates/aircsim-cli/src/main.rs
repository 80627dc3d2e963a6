use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use aircsim_cli::{compare_series, load_scenario, parse_seeds, render_plot};
use aircsim_core::Simulation;

#[derive(Parser)]
#[command(name = "aircsim", about = "Air-computing task offloading simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write per-seed time-series and summary files.
    Run {
        /// Scenario TOML path, or a builtin: disaster-baseline, disaster-uav.
        scenario: String,
        /// Comma-separated seeds; defaults to the scenario's own seed.
        #[arg(long)]
        seed: Option<String>,
        /// Output directory (created if missing).
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Override the metrics window width, seconds.
        #[arg(long)]
        window: Option<f64>,
        /// Stop the clock early at this time instead of the full duration.
        #[arg(long)]
        until: Option<f64>,
        /// Also write a per-task trace CSV (large).
        #[arg(long)]
        trace: bool,
        /// Also write an SVG plot of the success-rate series.
        #[arg(long)]
        plot: bool,
    },
    /// Compare two time-series CSVs phase by phase.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Comma-separated phase boundaries, seconds.
        #[arg(long, default_value = "1000,2000")]
        boundaries: String,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            scenario,
            seed,
            out,
            window,
            until,
            trace,
            plot,
        } => run(&scenario, seed.as_deref(), &out, window, until, trace, plot),
        Command::Compare { a, b, boundaries } => {
            let csv_a = fs::read_to_string(&a).with_context(|| a.display().to_string())?;
            let csv_b = fs::read_to_string(&b).with_context(|| b.display().to_string())?;
            let bounds: Vec<f64> = boundaries
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad boundary {s:?}")))
                .collect::<Result<_>>()?;
            print!("{}", compare_series(&csv_a, &csv_b, &bounds)?);
            Ok(())
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run(
    scenario: &str,
    seeds: Option<&str>,
    out: &PathBuf,
    window: Option<f64>,
    until: Option<f64>,
    trace: bool,
    plot: bool,
) -> Result<()> {
    let mut base = load_scenario(scenario)?;
    if let Some(w) = window {
        base.metrics.window = w;
    }
    let seeds = match seeds {
        Some(list) => parse_seeds(list)?,
        None => vec![base.seed],
    };
    fs::create_dir_all(out).with_context(|| out.display().to_string())?;

    for seed in seeds {
        let mut scenario = base.clone();
        scenario.seed = seed;
        let mut sim = match Simulation::new(&scenario) {
            Ok(sim) => sim,
            Err(errors) => {
                eprintln!("scenario is invalid:");
                for e in &errors {
                    eprintln!("  - {e}");
                }
                bail!("{} validation error(s)", errors.len());
            }
        };
        if trace {
            let path = out.join(format!("trace_{seed}.csv"));
            let file = File::create(&path).with_context(|| path.display().to_string())?;
            sim.set_trace(Box::new(BufWriter::new(file)));
        }
        match until {
            Some(t) => sim.run_until(t),
            None => sim.run_to_end(),
        }

        let ts_path = out.join(format!("ts_{seed}.csv"));
        fs::write(&ts_path, sim.metrics().to_csv())
            .with_context(|| ts_path.display().to_string())?;
        let summary = sim.summary();
        let summary_path = out.join(format!("summary_{seed}.txt"));
        fs::write(&summary_path, summary.to_text())
            .with_context(|| summary_path.display().to_string())?;
        if plot {
            let series: Vec<_> = (0..sim.metrics().town_count())
                .map(|ix| {
                    let s = sim.metrics().time_series(ix);
                    (s[0].town, s)
                })
                .collect();
            let plot_path = out.join(format!("plot_{seed}.svg"));
            fs::write(&plot_path, render_plot(&series))
                .with_context(|| plot_path.display().to_string())?;
        }
        match summary.overall_success_rate {
            Some(r) => println!("seed {seed}: overall success rate {r:.6}"),
            None => println!("seed {seed}: no tasks resolved"),
        }
    }
    Ok(())
}
