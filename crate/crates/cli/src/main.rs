mod config;
mod error;
mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use vdoc_core::certificate::params_for;
use vdoc_core::{
    certify, mesh_hierarchy, run_study_with, solve_hierarchy, solve_kkt, uniform_triangulation, KktSolution, Mesh,
};

use config::{check_level, parse_alphas, parse_config, parse_level_range, RunConfig};
use error::CliError;
use io::{num, write_file, Manifest};

/// Variational-discretization solver for semilinear elliptic optimal
/// control with control and state constraints.
#[derive(Parser)]
#[command(name = "vdoc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Problem configuration (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_directory` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve on one mesh; dump the fields, the multipliers and the certificate.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Mesh level: the uniform mesh with 2^L subdivisions per side.
        #[arg(long)]
        level: Option<u32>,
        /// Solve on a mesh read from this file instead.
        #[arg(long)]
        mesh: Option<PathBuf>,
    },
    /// Solve on one level and print only the certificate line.
    Certify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        level: Option<u32>,
    },
    /// Convergence study against a finer reference solution.
    Study {
        #[command(flatten)]
        common: Common,
        /// Inclusive level range, e.g. `1..7`.
        #[arg(long)]
        levels: Option<String>,
        /// Reference level, at least two above the finest study level.
        #[arg(long = "ref")]
        reference: Option<u32>,
    },
    /// Adjoint norm against the certificate threshold over several α.
    SweepAlpha {
        #[command(flatten)]
        common: Common,
        /// Comma-separated α values.
        #[arg(long)]
        alphas: Option<String>,
        #[arg(long)]
        level: Option<u32>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("VDOC_THREADS") else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("VDOC_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size the thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Solve { common, level, mesh } => {
            let cfg = parse_config(&common.config)?;
            let out = output_dir(&common, &cfg)?;
            cmd_solve(&cfg, &common.config, &out, level, mesh.as_deref())
        }
        Command::Certify { common, level } => {
            let cfg = parse_config(&common.config)?;
            let out = output_dir(&common, &cfg)?;
            cmd_certify(&cfg, &common.config, &out, level)
        }
        Command::Study { common, levels, reference } => {
            let cfg = parse_config(&common.config)?;
            let out = output_dir(&common, &cfg)?;
            cmd_study(&cfg, &common.config, &out, levels.as_deref(), reference)
        }
        Command::SweepAlpha { common, alphas, level } => {
            let cfg = parse_config(&common.config)?;
            let out = output_dir(&common, &cfg)?;
            cmd_sweep(&cfg, &common.config, &out, alphas.as_deref(), level)
        }
    }
}

fn output_dir(common: &Common, cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = common.out.clone().or_else(|| cfg.output_directory.clone()).unwrap_or_else(|| PathBuf::from("vdoc-out"));
    io::ensure_dir(&dir)?;
    Ok(dir)
}

fn resolve_level(arg: Option<u32>, cfg: &RunConfig) -> Result<u32, CliError> {
    let l = arg.or(cfg.level).ok_or_else(|| CliError::Usage("no mesh level: pass --level or set `level`".into()))?;
    check_level(l).map_err(|m| CliError::Usage(format!("invalid level: {m}")))
}

fn manifest(cfg: &RunConfig, path: &Path, command: &str, entries: Vec<(String, String)>) -> Result<Manifest, CliError> {
    Ok(Manifest {
        command: command.into(),
        config_path: path.to_path_buf(),
        config_source: cfg.source.clone(),
        pdas: cfg.pdas,
        params: params_for(&cfg.problem, cfg.c_q)?,
        entries,
    })
}

fn solve_on(cfg: &RunConfig, mesh: &Arc<Mesh>) -> Result<KktSolution, CliError> {
    Ok(solve_kkt(&cfg.problem, mesh, &cfg.pdas, None)?)
}

fn cmd_solve(
    cfg: &RunConfig,
    config_path: &Path,
    out: &Path,
    level: Option<u32>,
    mesh_file: Option<&Path>,
) -> Result<(), CliError> {
    let (mesh, mesh_entry) = match mesh_file {
        Some(p) => (Arc::new(io::read_mesh(p)?), ("mesh_file".to_string(), p.display().to_string())),
        None => {
            let l = resolve_level(level, cfg)?;
            (Arc::new(uniform_triangulation(1usize << l)?), ("level".to_string(), l.to_string()))
        }
    };
    let sol = solve_on(cfg, &mesh)?;
    let verdict = certify(&sol, &cfg.problem, &mesh, cfg.c_q)?;
    let line = io::certificate_line(mesh.level(), mesh.h(), &verdict);

    write_file(&out.join("mesh.txt"), &io::mesh_text(&mesh))?;
    write_file(&out.join("u.csv"), &io::fe_csv(&sol.u.nodal))?;
    write_file(&out.join("y.csv"), &io::fe_csv(&sol.y))?;
    write_file(&out.join("p.csv"), &io::fe_csv(&sol.p))?;
    write_file(&out.join("multipliers.csv"), &io::multiplier_csv(&sol))?;
    write_file(&out.join("certificate.csv"), &format!("{}\n{line}\n", io::CERTIFICATE_HEADER))?;
    let entries = vec![
        mesh_entry,
        ("kkt_residual".into(), num(sol.kkt_residual)),
        ("outer_iterations".into(), sol.iterations.to_string()),
        ("newton_iterations".into(), sol.newton_iterations.to_string()),
    ];
    write_file(&out.join("manifest.txt"), &manifest(cfg, config_path, "solve", entries)?.render())?;
    println!("{}", io::CERTIFICATE_HEADER);
    println!("{line}");
    Ok(())
}

fn cmd_certify(cfg: &RunConfig, config_path: &Path, out: &Path, level: Option<u32>) -> Result<(), CliError> {
    let l = resolve_level(level, cfg)?;
    let mesh = Arc::new(uniform_triangulation(1usize << l)?);
    let sol = solve_on(cfg, &mesh)?;
    let verdict = certify(&sol, &cfg.problem, &mesh, cfg.c_q)?;
    let line = io::certificate_line(l, mesh.h(), &verdict);
    write_file(&out.join("certificate.csv"), &format!("{}\n{line}\n", io::CERTIFICATE_HEADER))?;
    let entries = vec![
        ("level".into(), l.to_string()),
        ("kkt_residual".into(), num(sol.kkt_residual)),
        ("relative_margin".into(), num(verdict.relative_margin())),
    ];
    write_file(&out.join("manifest.txt"), &manifest(cfg, config_path, "certify", entries)?.render())?;
    println!("{}", io::CERTIFICATE_HEADER);
    println!("{line}");
    Ok(())
}

fn cmd_study(
    cfg: &RunConfig,
    config_path: &Path,
    out: &Path,
    levels: Option<&str>,
    reference: Option<u32>,
) -> Result<(), CliError> {
    let (first, last) = match levels {
        Some(s) => parse_level_range(s).map_err(|m| CliError::Usage(format!("--levels: {m}")))?,
        None => cfg.levels.ok_or_else(|| CliError::Usage("no level range: pass --levels or set `levels`".into()))?,
    };
    let reference = reference
        .or(cfg.reference_level)
        .ok_or_else(|| CliError::Usage("no reference level: pass --ref or set `reference_level`".into()))?;
    check_level(reference).map_err(|m| CliError::Usage(format!("--ref: {m}")))?;
    if reference < last + 2 {
        return Err(CliError::Usage(format!(
            "reference level {reference} must be at least two above the finest study level {last}"
        )));
    }
    let report = run_study_with(&cfg.problem, first..=last, reference, &cfg.pdas, cfg.c_q)?;
    let params = params_for(&cfg.problem, cfg.c_q)?;

    write_file(&out.join("study.csv"), &io::study_csv(&report, params.q))?;
    write_file(&out.join("eoc.csv"), &io::eoc_csv(&report))?;
    let mut certs = format!("{}\n", io::CERTIFICATE_HEADER);
    for ((level, h), v) in report.levels.iter().zip(&report.certificates) {
        certs.push_str(&io::certificate_line(*level, *h, v));
        certs.push('\n');
    }
    write_file(&out.join("certificates.csv"), &certs)?;
    let contaminated: Vec<String> =
        report.eoc.iter().filter(|r| r.contaminated).map(|r| format!("{}-{}", r.pair.0, r.pair.1)).collect();
    let entries = vec![
        ("levels".into(), format!("{first}..{last}")),
        ("reference_level".into(), reference.to_string()),
        ("outer_iterations".into(), report.iterations.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")),
        ("reference_limited_pairs".into(), contaminated.join(",")),
    ];
    write_file(&out.join("manifest.txt"), &manifest(cfg, config_path, "study", entries)?.render())?;
    print!("{}", io::eoc_csv(&report));
    Ok(())
}

fn cmd_sweep(
    cfg: &RunConfig,
    config_path: &Path,
    out: &Path,
    alphas: Option<&str>,
    level: Option<u32>,
) -> Result<(), CliError> {
    let alphas = match alphas {
        Some(s) => parse_alphas(s).map_err(|m| CliError::Usage(format!("--alphas: {m}")))?,
        None => cfg.alphas.clone().ok_or_else(|| CliError::Usage("no α list: pass --alphas or set `alphas`".into()))?,
    };
    let l = resolve_level(level, cfg)?;
    let meshes = mesh_hierarchy(1, l)?;
    let params = params_for(&cfg.problem, cfg.c_q)?;
    let mut csv = format!("{}\n", io::sweep_header(params.q));
    for &alpha in &alphas {
        let spec = cfg.problem.clone().with_alpha(alpha);
        let sols = solve_hierarchy(&spec, &meshes, &cfg.pdas, true)?;
        let sol = sols.last().expect("non-empty hierarchy");
        let v = certify(sol, &spec, sol.mesh(), cfg.c_q)?;
        csv.push_str(&format!("{},{},{}\n", num(alpha), num(v.p_norm), num(v.eta_value)));
    }
    write_file(&out.join("sweep.csv"), &csv)?;
    let entries = vec![
        ("level".into(), l.to_string()),
        ("alphas".into(), alphas.iter().map(|a| num(*a)).collect::<Vec<_>>().join(",")),
    ];
    write_file(&out.join("manifest.txt"), &manifest(cfg, config_path, "sweep-alpha", entries)?.render())?;
    print!("{csv}");
    Ok(())
}
