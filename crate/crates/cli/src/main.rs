use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use assembler_core::montecarlo::{lifetimes, run_trials, write_trials_csv, Aggregate, Provenance};
use assembler_core::planner::repair_plan;
use assembler_core::{
    assembly_time_scaling, build_lattice, build_reservoir_with_target, compile, eta_vs_n, plan,
    Calibration, Embedding, GeometryFile, LatticeKind, MoveMode, MovePlan, MoveTiming, Occupancy,
    PlannerOptions, StudyConfig, StudyResult, TargetPattern, TrapArray, TrialSetup,
};
use clap::{Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

mod config;

use config::RunConfig;

/// Bad command-line input that is not caught by the library.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct InputError(pub String);

#[derive(Parser, Debug)]
#[command(
    name = "assembler",
    version,
    about = "Plan and simulate atom-by-atom assembly of tweezer arrays"
)]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the base seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for Monte Carlo trials.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a lattice geometry file. Values are the dimensions followed by the spacing in um.
    Generate {
        kind: LatticeKind,
        #[arg(required = true, num_args = 1..)]
        values: Vec<f64>,
        /// Build a reservoir holding a target of this many sites instead; only the spacing is given.
        #[arg(long)]
        target_size: Option<usize>,
        #[arg(long, default_value = "compact")]
        embedding: Embedding,
    },
    /// Print the move plan for a geometry and an occupancy (JSON index list).
    Plan {
        geometry: PathBuf,
        occupancy: PathBuf,
        #[arg(long, default_value = "type2")]
        mode: MoveMode,
        /// Target indices (JSON list); defaults to the target in the geometry file.
        #[arg(long)]
        target: Option<PathBuf>,
        /// Only fill defects; leave surplus atoms in place.
        #[arg(long)]
        repair: bool,
    },
    /// Run Monte Carlo trials and write per-trial CSV plus a JSON summary.
    Simulate {
        /// Built-in configuration: fig3 or figS3.
        #[arg(long)]
        preset: Option<String>,
    },
    /// Compile a plan into the binary waveform file.
    Waveform {
        plan: PathBuf,
        /// Calibration (JSON); by default centered on --geometry, else on the origin.
        #[arg(long)]
        calibration: Option<PathBuf>,
        #[arg(long)]
        geometry: Option<PathBuf>,
        /// Also write waveform.csv.
        #[arg(long)]
        csv: bool,
    },
    /// Assembly time versus target size with power-law fits.
    Scaling {
        #[arg(long)]
        preset: Option<String>,
    },
}

fn read_input(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| InputError(format!("cannot read {}: {e}", path.display())).into())
}

fn load_geometry(path: &Path) -> Result<(TrapArray, Option<TargetPattern>)> {
    let file = GeometryFile::from_json(&read_input(path)?)
        .with_context(|| format!("in {}", path.display()))?;
    file.into_parts()
        .with_context(|| format!("in {}", path.display()))
}

fn out_dir(cli_out: &Option<PathBuf>, cfg: Option<&RunConfig>) -> Result<PathBuf> {
    let dir = cli_out
        .clone()
        .or_else(|| cfg.and_then(|c| c.out_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    Ok(dir)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn resolve_config(cli: &Cli, preset: Option<&str>) -> Result<RunConfig> {
    let mut cfg = match (preset, &cli.config) {
        (Some(_), Some(_)) => {
            return Err(InputError("use either --preset or --config".into()).into())
        }
        (Some(name), None) => RunConfig::preset(name)?,
        (None, Some(path)) => RunConfig::load(path)?,
        (None, None) => {
            return Err(
                InputError("a configuration is required (--config or --preset)".into()).into(),
            )
        }
    };
    if let Some(seed) = cli.seed {
        cfg.base_seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_generate(
    cli: &Cli,
    kind: LatticeKind,
    values: &[f64],
    target_size: Option<usize>,
    embedding: Embedding,
) -> Result<()> {
    let (&spacing, dims) = values.split_last().expect("clap requires one value");
    let file = match target_size {
        Some(n) => {
            if !dims.is_empty() {
                return Err(InputError("with --target-size give only the spacing".into()).into());
            }
            let (array, target) = build_reservoir_with_target(kind, n, embedding, spacing)?;
            GeometryFile::from_array(&array, Some(&target))
        }
        None => {
            let dims = dims
                .iter()
                .map(|&d| {
                    if d >= 0.0 && d.fract() == 0.0 {
                        Ok(d as usize)
                    } else {
                        Err(InputError(format!("dimension {d} is not a whole number")))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            GeometryFile::from_array(&build_lattice(kind, &dims, spacing)?, None)
        }
    };
    let json = file.to_json() + "\n";
    match &cli.out {
        Some(_) => {
            let path = out_dir(&cli.out, None)?.join("geometry.json");
            write_file(&path, json.as_bytes())?;
            eprintln!("wrote {} ({} traps)", path.display(), file.traps.len());
        }
        None => print!("{json}"),
    }
    Ok(())
}

fn cmd_plan(
    cli: &Cli,
    geometry: &Path,
    occupancy: &Path,
    mode: MoveMode,
    target: Option<&Path>,
    repair: bool,
) -> Result<()> {
    let (array, file_target) = load_geometry(geometry)?;
    let pattern = match target {
        Some(path) => {
            let indices: Vec<usize> = serde_json::from_str(&read_input(path)?)
                .map_err(|e| InputError(format!("bad target list {}: {e}", path.display())))?;
            TargetPattern::new(&array, indices)?
        }
        None => {
            file_target.ok_or_else(|| InputError("geometry has no target; pass --target".into()))?
        }
    };
    let occ = Occupancy::from_json(&read_input(occupancy)?, array.len())
        .with_context(|| format!("in {}", occupancy.display()))?;
    let result = if repair {
        repair_plan(&array, &occ, &pattern, mode)?
    } else {
        plan(&array, &occ, &pattern, &PlannerOptions::with_mode(mode))?
    };
    let json = result.to_json() + "\n";
    match &cli.out {
        Some(_) => {
            let path = out_dir(&cli.out, None)?.join("plan.json");
            write_file(&path, json.as_bytes())?;
            eprintln!("wrote {} ({} moves)", path.display(), result.moves.len());
        }
        None => print!("{json}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct Lifetime {
    n_target: usize,
    lifetime_s: f64,
}

#[derive(Serialize)]
struct SimulationSummary<'a> {
    config_hash: String,
    base_seed: u64,
    config: &'a RunConfig,
    aggregates: &'a [Aggregate],
    lifetimes: Vec<Lifetime>,
}

fn study_config(cfg: &RunConfig, embedding: Option<Embedding>) -> StudyConfig {
    let g = &cfg.geometry;
    StudyConfig {
        kind: g.kind.expect("validated"),
        embedding: embedding.or(g.embedding).unwrap_or(Embedding::Compact),
        spacing: g.spacing.expect("validated"),
        planner: cfg.planner,
        loading: cfg.loading,
        physics: cfg.physics,
        n_trials: cfg.n_trials,
        base_seed: cfg.base_seed,
    }
}

fn cmd_simulate(cli: &Cli, preset: Option<&str>) -> Result<()> {
    let cfg = resolve_config(cli, preset)?;
    let provenance = Provenance {
        config_hash: cfg.hash(),
        base_seed: cfg.base_seed,
    };
    let result = match &cfg.geometry.file {
        Some(path) => {
            let (array, target) = load_geometry(path)?;
            let pattern =
                target.ok_or_else(|| InputError(format!("{} has no target", path.display())))?;
            let setup = TrialSetup {
                array: &array,
                pattern: &pattern,
                planner: cfg.planner,
                loading: cfg.loading,
                physics: cfg.physics,
            };
            let trials = run_trials(&setup, cfg.n_trials, cfg.base_seed)?;
            StudyResult {
                aggregates: vec![Aggregate::from_records(&trials)],
                trials,
            }
        }
        None => eta_vs_n(&study_config(&cfg, None), &cfg.target_sizes)?,
    };

    let dir = out_dir(&cli.out, Some(&cfg))?;
    let mut csv = Vec::new();
    write_trials_csv(&mut csv, &provenance, &result.trials)?;
    write_file(&dir.join("trials.csv"), &csv)?;
    let summary = SimulationSummary {
        config_hash: provenance.config_hash.clone(),
        base_seed: cfg.base_seed,
        config: &cfg,
        aggregates: &result.aggregates,
        lifetimes: lifetimes(&result, &cfg.physics)
            .into_iter()
            .map(|(n_target, lifetime_s)| Lifetime {
                n_target,
                lifetime_s,
            })
            .collect(),
    };
    write_file(
        &dir.join("summary.json"),
        (serde_json::to_string_pretty(&summary)? + "\n").as_bytes(),
    )?;

    for a in &result.aggregates {
        println!(
            "N={:<4} traps={:<4} eta={:.4} p_defect_free={:.3} moves={:.1} rearrangement={:.1}ms",
            a.n_target,
            a.n_traps,
            a.mean_eta,
            a.p_defect_free,
            a.mean_fill_moves + a.mean_disposals,
            a.mean_move_time * 1e3
        );
    }
    println!(
        "outputs in {} (config {})",
        dir.display(),
        &provenance.config_hash[..12]
    );
    Ok(())
}

#[derive(Serialize)]
struct FitSummary {
    embedding: Embedding,
    exponent: f64,
    prefactor: f64,
    r_squared: f64,
    n_points: usize,
    crossover_n: f64,
}

#[derive(Serialize)]
struct ScalingSummary<'a> {
    config_hash: String,
    base_seed: u64,
    config: &'a RunConfig,
    fits: Vec<FitSummary>,
}

fn cmd_scaling(cli: &Cli, preset: Option<&str>) -> Result<()> {
    let cfg = resolve_config(cli, preset)?;
    if cfg.geometry.kind != Some(LatticeKind::Square) {
        return Err(InputError(
            "scaling runs on square reservoirs; set geometry.kind to \"square\"".into(),
        )
        .into());
    }
    if cfg.planner.mode != MoveMode::Type2 {
        return Err(
            InputError("scaling uses type-2 moves; set planner.mode to \"type2\"".into()).into(),
        );
    }
    let sweep = cfg.scaling.clone().unwrap_or_default();
    let hash = cfg.hash();
    let provenance = Provenance {
        config_hash: hash.clone(),
        base_seed: cfg.base_seed,
    };
    let dir = out_dir(&cli.out, Some(&cfg))?;

    let mut table = csv::Writer::from_writer(Vec::new());
    table.write_record([
        "config_hash",
        "embedding",
        "n_target",
        "n_traps",
        "n_trials",
        "mean_fill_time_s",
        "mean_move_time_s",
        "mean_elapsed_s",
        "assembly_time_s",
        "lifetime_s",
        "mean_eta",
        "p_defect_free",
    ])?;
    let mut fits = Vec::new();
    for &embedding in &sweep.embeddings {
        let r = assembly_time_scaling(
            &study_config(&cfg, Some(embedding)),
            &cfg.target_sizes,
            sweep.clock,
            sweep.fit_min_n,
        )?;
        for a in &r.study.aggregates {
            table.write_record([
                hash.clone(),
                embedding.to_string(),
                a.n_target.to_string(),
                a.n_traps.to_string(),
                a.n_trials.to_string(),
                a.mean_fill_time.to_string(),
                a.mean_move_time.to_string(),
                a.mean_elapsed.to_string(),
                a.mean_time(sweep.clock).to_string(),
                (cfg.physics.tau_vac / a.n_target as f64).to_string(),
                a.mean_eta.to_string(),
                a.p_defect_free.to_string(),
            ])?;
        }
        let mut trials = Vec::new();
        write_trials_csv(&mut trials, &provenance, &r.study.trials)?;
        write_file(&dir.join(format!("trials_{embedding}.csv")), &trials)?;
        println!(
            "{embedding:<12} exponent={:.3} r2={:.3} crossover N={:.0}",
            r.fit.exponent, r.fit.r_squared, r.crossover_n
        );
        fits.push(FitSummary {
            embedding,
            exponent: r.fit.exponent,
            prefactor: r.fit.prefactor,
            r_squared: r.fit.r_squared,
            n_points: r.fit.n_points,
            crossover_n: r.crossover_n,
        });
    }
    let table = table.into_inner().context("flushing scaling table")?;
    write_file(&dir.join("scaling.csv"), &table)?;
    let summary = ScalingSummary {
        config_hash: hash,
        base_seed: cfg.base_seed,
        config: &cfg,
        fits,
    };
    write_file(
        &dir.join("scaling.json"),
        (serde_json::to_string_pretty(&summary)? + "\n").as_bytes(),
    )?;
    println!("outputs in {}", dir.display());
    Ok(())
}

fn cmd_waveform(
    cli: &Cli,
    plan_path: &Path,
    calibration: Option<&Path>,
    geometry: Option<&Path>,
    csv: bool,
) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => Some(RunConfig::load(path)?),
        None => None,
    };
    let moves = MovePlan::from_json(&read_input(plan_path)?)
        .with_context(|| format!("in {}", plan_path.display()))?;
    let cal = match (
        calibration,
        cfg.as_ref().and_then(|c| c.calibration),
        geometry,
    ) {
        (Some(path), _, _) => serde_json::from_str::<Calibration>(&read_input(path)?)
            .map_err(|e| InputError(format!("bad calibration {}: {e}", path.display())))?,
        (None, Some(cal), _) => cal,
        (None, None, Some(path)) => Calibration::for_array(&load_geometry(path)?.0),
        (None, None, None) => Calibration::default(),
    };
    let timing = cfg
        .as_ref()
        .map(|c| MoveTiming::from(&c.physics))
        .unwrap_or_default();
    let wf = compile(&moves, &cal, &timing)?;

    let dir = out_dir(&cli.out, cfg.as_ref())?;
    let path = dir.join("waveform.bin");
    let mut file = std::io::BufWriter::new(
        fs::File::create(&path).with_context(|| format!("cannot create {}", path.display()))?,
    );
    wf.write_binary(&mut file)?;
    file.flush()?;
    if csv {
        let mut out = Vec::new();
        wf.write_csv(&mut out)?;
        write_file(&dir.join("waveform.csv"), &out)?;
    }
    println!(
        "{} moves, {} samples, duration {:.6} s -> {}",
        moves.moves.len(),
        wf.len(),
        wf.duration(),
        path.display()
    );
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(InputError("--threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring thread pool")?;
    }
    match &cli.command {
        Command::Generate {
            kind,
            values,
            target_size,
            embedding,
        } => cmd_generate(cli, *kind, values, *target_size, *embedding),
        Command::Plan {
            geometry,
            occupancy,
            mode,
            target,
            repair,
        } => cmd_plan(cli, geometry, occupancy, *mode, target.as_deref(), *repair),
        Command::Simulate { preset } => cmd_simulate(cli, preset.as_deref()),
        Command::Waveform {
            plan,
            calibration,
            geometry,
            csv,
        } => cmd_waveform(cli, plan, calibration.as_deref(), geometry.as_deref(), *csv),
        Command::Scaling { preset } => cmd_scaling(cli, preset.as_deref()),
    }
}

/// 2 for bad input, 3 for failures while running.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<assembler_core::Error>() {
            return if e.is_validation() { 2 } else { 3 };
        }
        if cause.is::<InputError>() || cause.is::<serde_json::Error>() {
            return 2;
        }
    }
    3
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
