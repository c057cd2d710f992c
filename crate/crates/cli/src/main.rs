use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use tesim_core::config::ExperimentConfig;
use tesim_core::sim::system_paths;
use tesim_core::topology::validate_topology;
use tesim_core::{emit_outputs, parse_config, run_config};

/// Traffic-engineering experiment runner.
#[derive(Parser, Debug)]
#[command(name = "tesim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every configured system and write CSVs plus a manifest.
    Run(Common),
    /// Write the static path set of every system as JSON.
    Paths(Common),
    /// Check the config and its inputs, then print the resolved config.
    Validate(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment config (TOML).
    config: PathBuf,
    /// Output directory; defaults to `out_dir` relative to the config file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override every seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated subset of the configured systems.
    #[arg(long, value_delimiter = ',')]
    systems: Option<Vec<String>>,
    /// Suppress progress and summaries.
    #[arg(long)]
    quiet: bool,
}

struct Loaded {
    cfg: ExperimentConfig,
    base: PathBuf,
    out: PathBuf,
}

fn load(args: &Common) -> Result<Loaded> {
    let text = std::fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let mut cfg = parse_config(&text).with_context(|| format!("{}", args.config.display()))?;
    if let Some(seed) = args.seed {
        cfg.override_seed(seed);
    }
    if let Some(keep) = &args.systems {
        cfg.filter_systems(keep).with_context(|| format!("{}", args.config.display()))?;
    }
    let base = args.config.parent().map(FsPath::to_path_buf).unwrap_or_default();
    cfg.check_files(&base).with_context(|| format!("{}", args.config.display()))?;
    let out = match &args.out {
        Some(o) => o.clone(),
        None => base.join(&cfg.out_dir),
    };
    Ok(Loaded { cfg, base, out })
}

fn validate(args: &Common) -> Result<()> {
    let l = load(args)?;
    let t = l.cfg.load_topology(&l.base)?;
    let tms = l.cfg.load_demand(&l.base, &t)?;
    if !args.quiet {
        for v in validate_topology(&t) {
            eprintln!("warning: {v}");
        }
        eprintln!(
            "topology: {} nodes, {} links; demand: {} steps; systems: {}",
            t.node_count(),
            t.link_count(),
            tms.steps.len(),
            l.cfg.te_systems().len()
        );
    }
    print!("{}", l.cfg.to_toml());
    Ok(())
}

fn file_name(system: &str) -> String {
    system.chars().map(|c| if c.is_ascii_alphanumeric() || "+-#".contains(c) { c } else { '_' }).collect()
}

fn paths(args: &Common) -> Result<()> {
    let l = load(args)?;
    let t = l.cfg.load_topology(&l.base)?;
    let dir = l.out.join("paths");
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let opts = l.cfg.run_options();
    for sys in l.cfg.te_systems() {
        let Some(set) = system_paths(&sys, &t, &opts) else {
            if !args.quiet {
                eprintln!("{}: routes are decomposed per step from the all-paths optimum; skipped", sys.name);
            }
            continue;
        };
        let path = dir.join(format!("{}.json", file_name(&sys.name)));
        std::fs::write(&path, set.to_json()).with_context(|| format!("writing {}", path.display()))?;
        if !args.quiet {
            println!("{}\t{} paths\t{}", sys.name, set.total_paths(), path.display());
        }
    }
    Ok(())
}

fn run(args: &Common) -> Result<()> {
    let l = load(args)?;
    let out = run_config(&l.cfg, &l.base)?;
    let files = emit_outputs(&out.report, &out.manifest, &l.out)?;
    let mut failed = false;
    if !args.quiet {
        println!("{:<16} {:>10} {:>9} {:>10}", "system", "mean_thr", "peak_mlu", "bottleneck");
    }
    for s in &out.report.series {
        if let Some(f) = &s.failure {
            eprintln!("{}: failed at {f}", s.system.name);
            failed = true;
        }
        if !args.quiet {
            let peak = s.steps.get(out.report.peak_step);
            println!(
                "{:<16} {:>10.4} {:>9.3} {:>10.3}",
                s.system.name,
                s.mean_throughput(),
                peak.map_or(f64::NAN, |m| m.max_utilization),
                peak.map_or(f64::NAN, |m| m.bottleneck_fraction())
            );
        }
    }
    if !args.quiet {
        for f in files {
            println!("wrote {}", f.display());
        }
    }
    if failed {
        anyhow::bail!("one or more systems failed; see manifest.json");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => run(a),
        Command::Paths(a) => paths(a),
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
