use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stokes_tresca::admm::VelocityProblem;
use stokes_tresca::assembly::element_divergence;
use stokes_tresca::config::parse_config;
use stokes_tresca::io::{write_convergence_csv, write_vtk};
use stokes_tresca::mesh::{load_msh, BoundaryTag};
use stokes_tresca::outer::{run_nisp_outcome, StopReason};
use stokes_tresca::{checks, Error};

/// Stokes flow with Tresca friction on P1/P0 triangles.
#[derive(Parser)]
#[command(name = "stokes-tresca", version)]
struct Cli {
    /// Overrides `output.dir` from the config.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Only report errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the problem described by a config file.
    Solve { config: PathBuf },
    /// Print mesh statistics for a Gmsh 2.2 file.
    MeshInfo { msh: PathBuf },
    /// Cross-check the solvers against the dense oracles.
    Verify,
}

const EXIT_NOT_CONVERGED: u8 = 1;
const EXIT_SETUP: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve { config } => solve(config, cli.output_dir.as_deref(), cli.quiet),
        Command::MeshInfo { msh } => mesh_info(msh),
        Command::Verify => Ok(verify(cli.quiet)),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_SETUP)
        }
    }
}

fn solve(path: &Path, output_dir: Option<&Path>, quiet: bool) -> Result<u8, Error> {
    let cfg = parse_config(path)?;
    let mesh = cfg.mesh.build()?;
    let force = cfg.force.field(&mesh);
    let problem = VelocityProblem::new(&mesh, force, &cfg.solver)?;
    let outcome = run_nisp_outcome(&problem, &cfg.solver)?;
    let sol = &outcome.solution;

    let dir = output_dir.unwrap_or(&cfg.output_dir);
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    if cfg.formats.csv {
        write_convergence_csv(&sol.report, dir.join("convergence.csv"))?;
    }
    if cfg.formats.vtk {
        let div = element_divergence(&mesh, &sol.velocity)?;
        write_vtk(&mesh, &sol.velocity, &sol.pressure, &div, dir.join("solution.vtk"))?;
    }

    let r = &sol.report;
    let last = |v: &[f64]| v.last().copied().unwrap_or(f64::NAN);
    let summary = format!(
        "{} outer iterations, {} ADMM iterations, |du|_1 + |dp|_0 = {:.3e}, |div u|_0 = {:.3e}",
        r.iterations(),
        r.total_inner_iterations(),
        last(&r.velocity_changes) + last(&r.pressure_changes),
        last(&r.divergence_norms),
    );
    match &outcome.stop {
        StopReason::Converged => {
            if !quiet {
                println!("converged: {summary}");
                println!("wrote results to {}", dir.display());
            }
            Ok(0)
        }
        StopReason::OuterLimit => {
            eprintln!("not converged after max_outer = {}: {summary}", cfg.solver.max_outer);
            Ok(EXIT_NOT_CONVERGED)
        }
        StopReason::InnerLimit(inner) => {
            eprintln!(
                "ADMM not converged after max_inner = {} in outer iteration {}: {summary}",
                inner.iterations,
                r.iterations() + 1
            );
            Ok(EXIT_NOT_CONVERGED)
        }
    }
}

fn mesh_info(path: &Path) -> Result<u8, Error> {
    let mesh = load_msh(path)?;
    let (lo, hi) = mesh.bounding_box();
    println!("vertices:        {}", mesh.num_vertices());
    println!("triangles:       {}", mesh.num_triangles());
    println!("velocity dofs:   {}", mesh.num_velocity_dofs());
    println!("area:            {:.12e}", mesh.total_area());
    println!("bounding box:    [{}, {}] x [{}, {}]", lo[0], hi[0], lo[1], hi[1]);
    println!("boundary facets: {}", mesh.boundary_facets().len());
    println!(
        "dirichlet length: {:.12e}",
        mesh.boundary_length(Some(BoundaryTag::Dirichlet))
    );
    println!(
        "friction length:  {:.12e}",
        mesh.boundary_length(Some(BoundaryTag::Friction))
    );
    Ok(0)
}

fn verify(quiet: bool) -> u8 {
    let results = checks::run_all();
    let mut failed = 0;
    for r in &results {
        if !r.passed {
            failed += 1;
            eprintln!("{r}");
        } else if !quiet {
            println!("{r}");
        }
    }
    if !quiet {
        println!("{} of {} checks passed", results.len() - failed, results.len());
    }
    if failed == 0 {
        0
    } else {
        EXIT_NOT_CONVERGED
    }
}
