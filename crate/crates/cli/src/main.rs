//! Command-line driver: declare relations in a JSON configuration, solve
//! hydrostatic profiles, run culling campaigns, probe isotropy, and solve
//! for stresses.
//!
//! Exit codes: 0 on success, 2 on input/configuration/solver failure, 3 when
//! a checked property is violated.

#![forbid(unsafe_code)]

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use implicit_fluids::constitutive::{isotropy_check_fn, ConstitutiveRelation};
use implicit_fluids::culling::{cull, generate_observation, ObservationData};
use implicit_fluids::hydrostatics::{
    consistency_on_profile, ideal_gas_profile, phi_from_density, verify_balances,
    write_profile_csv, HydrostaticSolution,
};
use implicit_fluids::solver::{solve_spherical, solve_stress, RootReport, SphericalRoots};
use implicit_fluids::tensor3::{outer, SymTensor3, Vec3};

use config::LoadedConfig;

/// Threshold on the sampled equivariance defect below which a relation
/// passes the isotropy check.
const ISOTROPY_PASS_TOL: f64 = 1e-8;

#[derive(Parser)]
#[command(name = "ifluids", version)]
#[command(about = "Evaluate, solve, and falsify implicit constitutive relations of compressible fluids")]
struct Cli {
    /// Path to the JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output artifacts (overrides the configuration).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Seed for sampling-based commands and generated observations.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Tolerance override: consistency tolerance for `cull`/`hydrostatic`,
    /// Newton absolute tolerance for `solve-stress`.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Newton iteration cap override.
    #[arg(long, global = true)]
    max_iter: Option<u32>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the half-space hydrostatic problem for one relation and write
    /// the profile CSV (columns y, rho, phi, h_residual).
    Hydrostatic {
        /// Name of the relation declared in the configuration.
        #[arg(long)]
        relation: String,
    },
    /// Classify every candidate against every observation and write the
    /// culling report JSON.
    Cull,
    /// Sample the equivariance defect of a relation under random orthogonal
    /// transformations.
    CheckIsotropy {
        #[arg(long)]
        relation: String,
        #[arg(long, default_value_t = 1000)]
        samples: u32,
        /// Add a symmetry-breaking term to the residual (validation fixture).
        #[arg(long)]
        anisotropic_fixture: bool,
    },
    /// Solve the implicit relation for the stress at a fixed density.
    SolveStress {
        #[arg(long)]
        relation: String,
        #[arg(long, allow_negative_numbers = true)]
        rho: f64,
        /// Density gradient as "x,y,z".
        #[arg(long, default_value = "0,0,0", allow_hyphen_values = true)]
        grad: String,
        /// Initial guess as "xx,yy,zz,xy,xz,yz".
        #[arg(long, allow_hyphen_values = true)]
        initial: Option<String>,
        /// Spherical initial guess: T0 = -phi * identity.
        #[arg(long, conflicts_with = "initial", allow_negative_numbers = true)]
        initial_phi: Option<f64>,
        /// Emit the full report as JSON on stdout.
        #[arg(long)]
        json: bool,
    },
}

enum AppError {
    /// Input, configuration, or solver failure: exit code 2.
    Failure(anyhow::Error),
    /// A checked property does not hold: exit code 3.
    Violation(String),
}

impl<E: Into<anyhow::Error>> From<E> for AppError {
    fn from(e: E) -> Self {
        AppError::Failure(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Failure(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
        Err(AppError::Violation(message)) => {
            eprintln!("{message}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Result<(), AppError> {
    let config_path = cli
        .config
        .as_deref()
        .ok_or_else(|| anyhow!("--config is required"))?;
    let config = LoadedConfig::from_file(config_path)?;
    let out_dir = config.output_dir(cli.out_dir.as_deref());
    match &cli.command {
        Command::Hydrostatic { relation } => cmd_hydrostatic(&cli, &config, &out_dir, relation),
        Command::Cull => cmd_cull(&cli, &config, &out_dir),
        Command::CheckIsotropy { relation, samples, anisotropic_fixture } => {
            cmd_check_isotropy(&cli, &config, relation, *samples, *anisotropic_fixture)
        }
        Command::SolveStress { relation, rho, grad, initial, initial_phi, json } => {
            cmd_solve_stress(
                &cli,
                &config,
                relation,
                *rho,
                grad,
                initial.as_deref(),
                *initial_phi,
                *json,
            )
        }
    }
}

fn cmd_hydrostatic(
    cli: &Cli,
    config: &LoadedConfig,
    out_dir: &Path,
    relation_name: &str,
) -> Result<(), AppError> {
    let rel = config.relation(relation_name)?;
    let grid = &config.grid;
    let surface = &config.raw.surface;

    let solution: HydrostaticSolution =
        if let Some(prescribed) = &config.raw.prescribed_density {
            let phi0 = surface
                .phi0
                .ok_or_else(|| anyhow!("surface.phi0 is required with a prescribed density"))?;
            let rho0 = prescribed.constant;
            phi_from_density(|_| rho0, phi0, grid, 2).map_err(anyhow::Error::from)?
        } else {
            match rel {
                ConstitutiveRelation::IdealGas { c } => {
                    let k = match (surface.k, surface.phi0) {
                        (Some(k), _) => k,
                        (None, Some(phi0)) => phi0 / c,
                        (None, None) => {
                            return Err(anyhow!(
                                "surface condition required: set surface.k or surface.phi0"
                            )
                            .into())
                        }
                    };
                    ideal_gas_profile(k, *c, grid).map_err(anyhow::Error::from)?
                }
                _ if rel.is_implicit_euler_family() => {
                    let phi0 = match (surface.phi0, surface.k) {
                        (Some(phi0), _) => phi0,
                        (None, Some(k)) => match rel.euler_pressure(k) {
                            Some(p) => p.map_err(anyhow::Error::from)?,
                            None => {
                                return Err(anyhow!(
                                    "surface.phi0 is required: `{relation_name}` has no \
                                     explicit pressure to apply at the surface density"
                                )
                                .into())
                            }
                        },
                        (None, None) => {
                            return Err(anyhow!(
                                "surface condition required: set surface.phi0 (or surface.k)"
                            )
                            .into())
                        }
                    };
                    let obs = generate_observation(rel, grid, phi0, 0.0, cli.seed)
                        .with_context(|| format!("solving profile for `{relation_name}`"))?;
                    match obs.data {
                        ObservationData::Profile(sol) => sol,
                        ObservationData::Samples(_) => unreachable!("generator emits profiles"),
                    }
                }
                _ => {
                    return Err(anyhow!(
                        "hydrostatic profiles require an implicit-Euler-family relation, \
                         `{relation_name}` is {}",
                        rel.family_name()
                    )
                    .into())
                }
            }
        };

    let tol = config.consistency_tol(cli.tol);
    let consistency = consistency_on_profile(rel, &solution, tol).map_err(anyhow::Error::from)?;
    let balance = verify_balances(&solution, None).map_err(anyhow::Error::from)?;

    let mut csv = Vec::new();
    write_profile_csv(&mut csv, &solution, &consistency.h).map_err(anyhow::Error::from)?;
    let path = out_dir.join(format!("{relation_name}-profile.csv"));
    write_atomic(&path, &csv)?;

    println!("relation: {relation_name} ({})", rel.family_name());
    println!(
        "grid: [{}, 0], {} points, gravity {}",
        solution.grid().y_min(),
        solution.grid().len(),
        solution.grid().gravity()
    );
    println!("phi(0) = {:.6e}", solution.phi_surface());
    println!(
        "balance: mass residual {:.1e}, momentum residual {:.3e} (fd step {:.3e})",
        balance.mass_residual, balance.momentum_residual, balance.fd_step
    );
    println!(
        "consistency: max |h| = {:.3e}, normalized {:.3e} (tol {:.1e}) -> {}",
        consistency.max_abs_h,
        consistency.max_normalized,
        consistency.tol,
        if consistency.consistent { "consistent" } else { "inconsistent" }
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_cull(cli: &Cli, config: &LoadedConfig, out_dir: &Path) -> Result<(), AppError> {
    let candidates = config.candidate_set()?;
    let observations = config.observations(cli.seed)?;
    if observations.is_empty() {
        return Err(anyhow!("no observations: declare at least one in the configuration").into());
    }
    let tol = config.consistency_tol(cli.tol);
    let report = cull(&candidates, &observations, tol).map_err(anyhow::Error::from)?;

    let json = serde_json::to_vec_pretty(&report).map_err(anyhow::Error::from)?;
    let path = out_dir.join("culling-report.json");
    write_atomic(&path, &json)?;

    print!("{}", report.text_table());
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_check_isotropy(
    cli: &Cli,
    config: &LoadedConfig,
    relation_name: &str,
    samples: u32,
    anisotropic_fixture: bool,
) -> Result<(), AppError> {
    if samples == 0 {
        return Err(anyhow!("samples must be >= 1").into());
    }
    let rel = config.relation(relation_name)?.clone();
    let error = if anisotropic_fixture {
        let e1 = Vec3::new(1.0, 0.0, 0.0);
        isotropy_check_fn(
            move |rho, g, t| Ok(rel.residual_general(rho, g, t)? + outer(e1, e1)),
            samples,
            cli.seed,
        )
    } else {
        isotropy_check_fn(move |rho, g, t| rel.residual_general(rho, g, t), samples, cli.seed)
    }
    .map_err(anyhow::Error::from)?;

    println!("max equivariance error over {samples} samples: {error:.6e}");
    if error <= ISOTROPY_PASS_TOL {
        println!("isotropy: OK (threshold {ISOTROPY_PASS_TOL:.1e})");
        Ok(())
    } else {
        Err(AppError::Violation(format!(
            "isotropy violated: equivariance error {error:.6e} exceeds {ISOTROPY_PASS_TOL:.1e}"
        )))
    }
}

#[derive(Serialize)]
struct SphericalSummary {
    degenerate: bool,
    roots: Vec<RootReport<f64>>,
}

#[derive(Serialize)]
struct SolveStressOutput {
    relation: String,
    rho: f64,
    spherical: Option<SphericalSummary>,
    stress: RootReport<SymTensor3>,
}

#[allow(clippy::too_many_arguments)]
fn cmd_solve_stress(
    cli: &Cli,
    config: &LoadedConfig,
    relation_name: &str,
    rho: f64,
    grad: &str,
    initial: Option<&str>,
    initial_phi: Option<f64>,
    json: bool,
) -> Result<(), AppError> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(anyhow!("density must be positive, got {rho}").into());
    }
    let rel = config.relation(relation_name)?;
    let g = parse_vec3(grad).context("--grad")?;
    let t0 = match (initial, initial_phi) {
        (Some(text), _) => SymTensor3::from_array(parse_array6(text).context("--initial")?),
        (None, Some(phi)) => SymTensor3::scaled_identity(-phi),
        (None, None) => SymTensor3::ZERO,
    };
    let settings = config.settings(cli.tol, cli.max_iter);

    // the gradient-free families also expose their spherical branches
    let spherical = if rel.is_implicit_euler_family() {
        let phi_guess = initial_phi
            .or_else(|| rel.euler_pressure(rho).and_then(|p| p.ok()))
            .unwrap_or(1.0);
        let result =
            solve_spherical(rel, rho, phi_guess, &settings).map_err(anyhow::Error::from)?;
        Some(match result {
            SphericalRoots::Degenerate => SphericalSummary { degenerate: true, roots: vec![] },
            SphericalRoots::Roots(roots) => SphericalSummary { degenerate: false, roots },
        })
    } else {
        None
    };

    let report = solve_stress(rel, rho, g, t0, &settings).map_err(anyhow::Error::from)?;

    if let Some(summary) = spherical.as_ref().filter(|_| !json) {
        if summary.degenerate {
            println!(
                "spherical branches: the relation does not constrain phi \
                 (condition vanishes identically)"
            );
        } else if summary.roots.is_empty() {
            println!("spherical branches: no real root in the scan interval");
        } else {
            let list = summary
                .roots
                .iter()
                .map(|r| format!("{:.12e} ({})", r.solution, r.branch))
                .collect::<Vec<_>>()
                .join(", ");
            println!("spherical branches: phi = {list}");
        }
    }

    if !report.converged {
        return Err(anyhow!(
            "stress solve did not converge after {} iterations (residual {:.3e})",
            report.iterations,
            report.residual_norm
        )
        .into());
    }

    if json {
        let output = SolveStressOutput {
            relation: relation_name.to_string(),
            rho,
            spherical,
            stress: report,
        };
        println!(
            "{}",
            serde_json::to_string_pretty(&output).map_err(anyhow::Error::from)?
        );
        return Ok(());
    }

    let t = report.solution;
    println!(
        "stress: converged in {} iterations, residual {:.3e}",
        report.iterations, report.residual_norm
    );
    println!("T = [{:.12e}  {:.12e}  {:.12e}]", t.xx, t.xy, t.xz);
    println!("    [{:.12e}  {:.12e}  {:.12e}]", t.xy, t.yy, t.yz);
    println!("    [{:.12e}  {:.12e}  {:.12e}]", t.xz, t.yz, t.zz);
    Ok(())
}

fn parse_vec3(text: &str) -> Result<Vec3> {
    let values = parse_floats(text, 3)?;
    Ok(Vec3::new(values[0], values[1], values[2]))
}

fn parse_array6(text: &str) -> Result<[f64; 6]> {
    let values = parse_floats(text, 6)?;
    Ok([values[0], values[1], values[2], values[3], values[4], values[5]])
}

fn parse_floats(text: &str, expected: usize) -> Result<Vec<f64>> {
    let values: Vec<f64> = text
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .with_context(|| format!("cannot parse `{part}` as a number"))
        })
        .collect::<Result<_>>()?;
    if values.len() != expected {
        bail!("expected {expected} comma-separated numbers, got {}", values.len());
    }
    Ok(values)
}

/// Writes through a temporary sibling and renames, so interrupted runs never
/// leave truncated artifacts.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .with_context(|| format!("cannot create `{}`", parent.display()))?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp-{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).with_context(|| format!("cannot write `{}`", tmp.display()))?;
    fs::rename(&tmp, path)
        .with_context(|| format!("cannot move `{}` into place", path.display()))?;
    Ok(())
}
