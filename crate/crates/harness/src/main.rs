// SPDX-License-Identifier: Apache-2.0

use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use acw_harness::designs::Experiment;
use acw_harness::experiments::{run_experiment, DEFAULT_REPS};
use acw_harness::mutation::{mutant, MUTANTS};
use acw_harness::report::ratio_table;
use acw_harness::scenario::{read_metrics_csv, run_traced, write_metrics_csv, ScenarioConfig};
use acw_harness::testbench::Testbench;
use acw_secprops::{expand_template, AssetManifest, Level, Report, Suite};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "acwsim", version, about = "Access control wrapper simulator and property checker")]
struct Cli {
    /// Machine-readable output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario file and print response-time metrics.
    Simulate {
        scenario: PathBuf,
        /// Waveform of the scenario's watch-list.
        #[arg(long)]
        vcd: Option<PathBuf>,
        /// Per-transaction latencies as CSV.
        #[arg(long)]
        raw: Option<PathBuf>,
    },
    /// Check a bundled property suite on its testbench.
    Verify {
        /// ip, firmware or system.
        suite: String,
        /// Inject one of the faults listed by `mutants`.
        #[arg(long)]
        mutant: Option<String>,
        /// Check this property file instead of the bundled one.
        #[arg(long)]
        props: Option<PathBuf>,
        /// List every property, not only the failing ones.
        #[arg(long)]
        all: bool,
    },
    /// Expand templates against a manifest and print the properties.
    Expand {
        templates: PathBuf,
        /// Environments for templates without their own `bind:` section.
        manifest: Option<PathBuf>,
    },
    /// Run an experiment (isolation, interference, dos or all) on the three designs.
    Bench {
        experiment: String,
        #[arg(long, default_value_t = DEFAULT_REPS)]
        reps: u32,
        /// Write the metrics CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Ratio table from a metrics CSV written by `bench`.
    Report { csv: PathBuf },
    /// List the injectable faults.
    Mutants,
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    serde_json::to_writer_pretty(io::stdout().lock(), v)?;
    println!();
    Ok(())
}

fn simulate(path: PathBuf, vcd: Option<PathBuf>, raw: Option<PathBuf>, json: bool) -> Result<ExitCode> {
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let cfg = ScenarioConfig::from_json(&text)?;
    let (report, trace) = run_traced(&cfg)?;
    if let Some(p) = vcd {
        if cfg.watch.is_empty() {
            bail!("--vcd needs a non-empty `watch` list in the scenario");
        }
        trace.write_vcd(&mut BufWriter::new(File::create(&p)?))?;
    }
    if let Some(p) = raw {
        report.write_raw_csv(File::create(&p)?, "scenario")?;
    }
    if json {
        print_json(&report)?;
    } else {
        println!("{:<16} {:>10} {:>12} {:>8} {:>8} {:>6}", "probe", "beats", "mean", "min", "max", "count");
        for p in &report.probes {
            println!(
                "{:<16} {:>10} {:>12.2} {:>8} {:>8} {:>6}",
                p.probe, p.txn_beats, p.mean_cycles, p.min_cycles, p.max_cycles, p.count
            );
        }
        println!(
            "{} cycles, {}, {} protocol violations, {} mode-machine violations",
            report.cycles,
            if report.complete { "complete" } else { "budget exhausted" },
            report.violations,
            report.fsm_violations
        );
    }
    Ok(if report.complete { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn verify(suite: &str, mutant_id: Option<String>, props: Option<PathBuf>, all: bool, json: bool) -> Result<ExitCode> {
    let level: Level = suite.parse().map_err(anyhow::Error::msg)?;
    let m = match mutant_id {
        Some(id) => Some(mutant(&id).with_context(|| format!("unknown mutant `{id}`"))?),
        None => None,
    };
    let bench = Testbench::new(level, m.map(|m| m.fault))?;
    let report: Report = match props {
        Some(p) => {
            let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
            let e = Suite::parse(&text)?.expand()?;
            for w in &e.warnings {
                eprintln!("warning: {w}");
            }
            bench.verify_properties(&e.properties)?
        }
        None => bench.verify()?,
    };
    if json {
        print_json(&report)?;
    } else {
        print!("{}", report.table(all));
    }
    Ok(if report.clean() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn expand(templates: PathBuf, manifest: Option<PathBuf>, json: bool) -> Result<ExitCode> {
    let suite = Suite::parse(&fs::read_to_string(&templates)?)?;
    let shared = match manifest {
        Some(p) => Some(AssetManifest::parse(&fs::read_to_string(&p)?)?),
        None => None,
    };
    let mut props = Vec::new();
    for t in &suite.templates {
        let m = match (&shared, t.manifest.is_empty()) {
            (Some(m), true) => m,
            _ => &t.manifest,
        };
        let e = expand_template(&t.id, &t.ast, m)?;
        for w in &e.warnings {
            eprintln!("warning: {w}");
        }
        props.extend(e.properties);
    }
    if json {
        print_json(&props)?;
    } else {
        for p in &props {
            println!("{p}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn bench(name: &str, reps: u32, csv: Option<PathBuf>, json: bool) -> Result<ExitCode> {
    let exps: Vec<Experiment> =
        if name == "all" { Experiment::ALL.to_vec() } else { vec![name.parse().map_err(anyhow::Error::msg)?] };
    let mut reports = Vec::new();
    for e in exps {
        reports.push(run_experiment(e, reps)?);
    }
    if let Some(p) = csv {
        let rows: Vec<_> = reports
            .iter()
            .flat_map(|r| {
                r.metrics_rows().into_iter().map(move |(d, mut m)| {
                    m.probe = format!("{}:{}", r.experiment.label(), m.probe);
                    (d, m)
                })
            })
            .collect();
        write_metrics_csv(File::create(&p)?, &rows)?;
    }
    if json {
        print_json(&reports)?;
    } else {
        for r in &reports {
            println!("{}", r.table());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn report(path: PathBuf, json: bool) -> Result<ExitCode> {
    let rows = read_metrics_csv(File::open(&path).with_context(|| format!("opening {}", path.display()))?)?;
    let table = ratio_table(&rows);
    if json {
        print_json(&table)?;
    } else {
        println!("{:<28} {:<6} {:>12} {:>8}", "probe", "design", "mean", "ratio");
        for r in &table {
            println!("{:<28} {:<6} {:>12.1} {:>8.3}", r.probe, r.design, r.mean_cycles, r.ratio);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Simulate { scenario, vcd, raw } => simulate(scenario, vcd, raw, cli.json),
        Cmd::Verify { suite, mutant, props, all } => verify(&suite, mutant, props, all, cli.json),
        Cmd::Expand { templates, manifest } => expand(templates, manifest, cli.json),
        Cmd::Bench { experiment, reps, csv } => bench(&experiment, reps, csv, cli.json),
        Cmd::Report { csv } => report(csv, cli.json),
        Cmd::Mutants => {
            if cli.json {
                print_json(&MUTANTS)?;
            } else {
                for m in MUTANTS {
                    println!("{:<20} {}", m.id, m.description);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
