use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use viscotherm::coexistence::{
    compare_zero_sets, crossing_cells, degeneracy_residual, lemma3_expression, lemma4_expression,
    sample_grid, trace_coexistence_curve, write_curve_csv, SELECTED_ETA_BINDING,
};
use viscotherm::io::{csv_row, fmt_float};
use viscotherm::plane::{run, write_manifest, write_snapshot, SimCoefficients};
use viscotherm::tensor::{general_invariants, kahler_invariants, ReductionReport};
use viscotherm::thermo::{ModelKind, ThermoState};
use viscotherm::verify::run_verification;

use viscotherm_cli::config::{require, RunConfig};

#[derive(Parser, Debug)]
#[command(
    name = "viscotherm",
    version,
    about = "Thermodynamics of moving viscous media"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the polynomial invariants of a deformation.
    Invariants(CommonArgs),
    /// Print the free energy, entropy, energy, chemical potential and stress at one state.
    Stress(CommonArgs),
    /// Trace the co-existence curve in the (rho, T) plane.
    Coexist(CommonArgs),
    /// Run the plane solver and write snapshots plus a manifest.
    Simulate(CommonArgs),
    /// Run the oracle suite and print a pass/fail table.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct CommonArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Defaults to the built-in settings.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Model(#[from] viscotherm::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("verification failed")]
    VerificationFailed,
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::VerificationFailed => 1,
            CliError::Model(viscotherm::Error::CflViolation { .. }) => 3,
            CliError::Model(viscotherm::Error::NumericalAbort { .. }) => 4,
            CliError::Model(_) | CliError::Io { .. } => 2,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn load(path: &Path) -> CliResult<RunConfig> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(RunConfig::parse(&text)?)
}

fn create(dir: &Path, name: &str) -> CliResult<(PathBuf, BufWriter<File>)> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(name);
    let file = File::create(&path).map_err(io_err(&path))?;
    Ok((path, BufWriter::new(file)))
}

fn cmd_invariants(cfg: &RunConfig) -> CliResult<()> {
    let (d, g, j) = require(&cfg.invariants, "invariants")?.resolve()?;
    let gi = general_invariants(&d, &g)?;
    let mut header = vec!["d1", "d2", "d3"];
    let mut row = vec![gi.d1, gi.d2, gi.d3];
    if let (2, Some(j)) = (d.dim(), j) {
        let t = kahler_invariants(&d, &g, &j)?;
        let r = ReductionReport::from_invariants(&t);
        header.extend(["t1", "t2", "t3", "t4", "t5", "t6", "t7"]);
        header.extend(["residual_t4", "residual_t5", "residual_t6", "residual_t7"]);
        row.extend(t.as_array());
        row.extend(r.residuals());
    }
    println!("{}", header.join(","));
    println!("{}", csv_row(&row));
    Ok(())
}

fn cmd_stress(cfg: &RunConfig) -> CliResult<()> {
    let medium = cfg.model()?.medium()?;
    let sc = require(&cfg.stress, "stress")?;
    let state = ThermoState::new(sc.rho, sc.temperature, sc.delta()?);
    let out = medium.derived(&state)?;
    let n = medium.dim();
    let mut header = vec!["h".to_string(), "s".into(), "e".into(), "eta".into()];
    let mut row = vec![out.h, out.s, out.e, out.eta];
    for i in 0..n {
        for k in 0..n {
            header.push(format!("sigma_{}{}", i + 1, k + 1));
            row.push(out.sigma[(i, k)]);
        }
    }
    println!("{}", header.join(","));
    println!("{}", csv_row(&row));
    Ok(())
}

fn cmd_coexist(cfg: &RunConfig, out_dir: &Path) -> CliResult<()> {
    let medium = cfg.model()?.medium()?;
    let cc = require(&cfg.coexist, "coexist")?;
    let window = cc.window()?;
    let delta = cc.delta(medium.dim())?;
    let settings = cc.settings()?;

    if cc.check_lemma {
        let nodes = settings.grid;
        let lemma = (0..nodes.0 * nodes.1)
            .into_par_iter()
            .map(|k| {
                let (rho, t) = window.node(nodes, k % nodes.0, k / nodes.0);
                let st = ThermoState::new(rho, t, delta);
                match medium.kind {
                    ModelKind::Bulk => lemma3_expression(&medium, &st),
                    ModelKind::Surface(_) => lemma4_expression(&medium, &st, SELECTED_ETA_BINDING),
                }
            })
            .collect::<viscotherm::Result<Vec<f64>>>()?;
        let det = sample_grid(
            |rho, t| {
                degeneracy_residual(&medium, &ThermoState::new(rho, t, delta))
                    .map_or(f64::NAN, |d| d.value)
            },
            &window,
            nodes,
        );
        let cmp = compare_zero_sets(
            &crossing_cells(&det, nodes),
            &crossing_cells(&lemma, nodes),
            (nodes.0 - 1, nodes.1 - 1),
            1,
        );
        eprintln!(
            "closed-form condition {}: {} determinant cells, {} condition cells, unmatched {} / {}",
            if cmp.agree() { "agrees" } else { "disagrees" },
            cmp.count_a,
            cmp.count_b,
            cmp.unmatched_a.len(),
            cmp.unmatched_b.len()
        );
    }

    let trace = trace_coexistence_curve(&medium, &delta, &window, &settings)?;
    let (path, mut w) = create(out_dir, &cc.output)?;
    write_curve_csv(&mut w, &trace)
        .and_then(|_| w.flush())
        .map_err(io_err(&path))?;
    eprintln!(
        "{} branches, {} points, {} dropped -> {}",
        trace.branch_count(),
        trace.points.len(),
        trace.dropped,
        path.display()
    );
    Ok(())
}

fn cmd_simulate(cfg: &RunConfig, out_dir: &Path) -> CliResult<()> {
    let model = cfg.model()?.coefficients()?;
    let sc = require(&cfg.simulate, "simulate")?;
    let sim = sc.sim_config()?;
    let (rho_ref, t_ref) = sc.reference();
    let coeffs = SimCoefficients::from_model(&model, rho_ref, t_ref)?;
    let initial = sc.initial_state(sim.grid, &model)?;

    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut rows = Vec::new();
    let mut io_failure = None;
    let result = run(&sim, &coeffs, initial, |idx, state, diag| {
        let name = format!("snapshot_{idx:05}.csv");
        let path = out_dir.join(&name);
        let written = File::create(&path).and_then(|f| {
            let mut w = BufWriter::new(f);
            write_snapshot(&mut w, state)?;
            w.flush()
        });
        if let Err(e) = written {
            io_failure = Some(CliError::Io { path, source: e });
            return Err(viscotherm::Error::NumericalAbort {
                time: diag.time,
                reason: "snapshot could not be written".into(),
            });
        }
        rows.push((name, *diag));
        Ok(())
    });
    if let Some(e) = io_failure {
        return Err(e);
    }
    if !rows.is_empty() {
        let (path, mut w) = create(out_dir, "manifest.csv")?;
        write_manifest(&mut w, &rows)
            .and_then(|_| w.flush())
            .map_err(io_err(&path))?;
    }
    let summary = result?;
    eprintln!(
        "{} steps, dt in [{}, {}], {} snapshots -> {}",
        summary.steps,
        fmt_float(summary.dt_min),
        fmt_float(summary.dt_max),
        rows.len(),
        out_dir.display()
    );
    Ok(())
}

fn cmd_verify(cfg: &RunConfig) -> CliResult<()> {
    let settings = cfg.verify.clone().unwrap_or_default().settings()?;
    let report = run_verification(&settings);
    print!("{}", report.render());
    if report.all_passed() {
        Ok(())
    } else {
        Err(CliError::VerificationFailed)
    }
}

/// Caps rayon's global pool at `VISCOTHERM_THREADS` when set.
fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("VISCOTHERM_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        viscotherm::Error::InvalidConfig(format!(
            "VISCOTHERM_THREADS must be a positive integer, got `{raw}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| viscotherm::Error::InvalidConfig(e.to_string()))?;
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Invariants(a) => cmd_invariants(&load(&a.config)?),
        Command::Stress(a) => cmd_stress(&load(&a.config)?),
        Command::Coexist(a) => cmd_coexist(&load(&a.config)?, &a.output_dir),
        Command::Simulate(a) => cmd_simulate(&load(&a.config)?, &a.output_dir),
        Command::Verify(a) => {
            let cfg = match &a.config {
                Some(p) => load(p)?,
                None => RunConfig::default(),
            };
            cmd_verify(&cfg)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
