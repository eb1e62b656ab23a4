//! Observation-driven model selection.
//!
//! Many distinct constitutive relations can reproduce the same observed
//! state, so candidates are kept or discarded by checking each one against a
//! growing set of observations. A candidate survives when it is consistent
//! with (or unconstrained by) every observation; adding observations can
//! only shrink the surviving set.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};
use serde::Serialize;
use thiserror::Error;

use crate::constitutive::{ConstitutiveError, ConstitutiveRelation};
use crate::hydrostatics::{consistency_on_profile, HalfSpaceGrid, HydroError, HydrostaticSolution};
use crate::tensor3::{SymTensor3, Vec3};

#[derive(Debug, Error)]
pub enum CullingError {
    #[error("candidate names must be unique: `{0}` appears more than once")]
    DuplicateName(String),
    #[error("culling requires at least one candidate")]
    NoCandidates,
    #[error("culling requires at least one observation")]
    NoObservations,
    #[error("observation `{0}` has no samples")]
    EmptyObservation(String),
    #[error("observation `{name}` sample {index} has non-positive density {rho}")]
    InvalidSample { name: String, index: usize, rho: f64 },
    #[error("noise amplitude must be in [0, 1), got {0}")]
    BadNoise(f64),
    #[error(
        "relation does not determine phi from rho: the spherical condition \
         vanishes identically near phi = {phi}"
    )]
    DegenerateRelation { phi: f64 },
    #[error("no density satisfies the relation at phi = {phi} (searched rho in [{lo:.3e}, {hi:.3e}])")]
    NotInvertible { phi: f64, lo: f64, hi: f64 },
    #[error("synthetic observations require an implicit-Euler-family relation, got {0}")]
    UnsupportedFamily(&'static str),
    #[error(transparent)]
    Hydro(#[from] HydroError),
    #[error(transparent)]
    Constitutive(#[from] ConstitutiveError),
}

/// A single measured state: density, density gradient, and stress.
#[derive(Clone, Copy, Debug)]
pub struct StressSample {
    pub rho: f64,
    pub grad: Vec3,
    pub stress: SymTensor3,
}

/// The payload of an observation: either a hydrostatic profile or a list of
/// point samples.
#[derive(Clone, Debug)]
pub enum ObservationData {
    Profile(HydrostaticSolution),
    Samples(Vec<StressSample>),
}

/// A named observation, optionally carrying its own tolerance.
#[derive(Clone, Debug)]
pub struct Observation {
    pub name: String,
    pub data: ObservationData,
    pub tolerance: Option<f64>,
}

/// Named candidate relations with unique names.
#[derive(Clone, Debug)]
pub struct CandidateSet {
    entries: Vec<(String, ConstitutiveRelation)>,
}

impl CandidateSet {
    pub fn new(entries: Vec<(String, ConstitutiveRelation)>) -> Result<Self, CullingError> {
        let mut seen = BTreeSet::new();
        for (name, _) in &entries {
            if !seen.insert(name.clone()) {
                return Err(CullingError::DuplicateName(name.clone()));
            }
        }
        Ok(CandidateSet { entries })
    }

    pub fn entries(&self) -> &[(String, ConstitutiveRelation)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Verdict of one candidate against one observation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Consistent,
    Inconsistent,
    /// The relation imposes no constraint on the observed states; such a
    /// candidate survives until a richer observation can cull it.
    Degenerate,
    EvaluationError,
}

impl Verdict {
    pub fn survives(self) -> bool {
        matches!(self, Verdict::Consistent | Verdict::Degenerate)
    }

    fn label(self) -> &'static str {
        match self {
            Verdict::Consistent => "consistent",
            Verdict::Inconsistent => "inconsistent",
            Verdict::Degenerate => "degenerate",
            Verdict::EvaluationError => "error",
        }
    }
}

/// One cell of the verdict matrix.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellReport {
    pub candidate: String,
    pub observation: String,
    pub verdict: Verdict,
    pub max_residual: Option<f64>,
    pub normalization: Option<f64>,
    pub detail: Option<String>,
}

/// Full culling outcome: matrix of verdicts (rows follow candidate order,
/// columns observation order) and the surviving candidate names.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CullingReport {
    pub tolerance: f64,
    pub candidates: Vec<String>,
    pub observations: Vec<String>,
    pub cells: Vec<Vec<CellReport>>,
    pub survivors: Vec<String>,
}

impl CullingReport {
    /// Plain-text verdict table for terminal output.
    pub fn text_table(&self) -> String {
        let name_width = self
            .candidates
            .iter()
            .map(|c| c.len())
            .max()
            .unwrap_or(0)
            .max("candidate".len());
        let col_width = self
            .observations
            .iter()
            .map(|o| o.len())
            .max()
            .unwrap_or(0)
            .max("inconsistent".len());
        let mut out = String::new();
        let _ = write!(out, "{:name_width$}", "candidate");
        for obs in &self.observations {
            let _ = write!(out, "  {obs:col_width$}");
        }
        out.push('\n');
        for (row, candidate) in self.cells.iter().zip(self.candidates.iter()) {
            let _ = write!(out, "{candidate:name_width$}");
            for cell in row {
                let _ = write!(out, "  {:col_width$}", cell.verdict.label());
            }
            out.push('\n');
        }
        let _ = write!(out, "survivors: ");
        if self.survivors.is_empty() {
            out.push_str("(none)");
        } else {
            out.push_str(&self.survivors.join(", "));
        }
        out.push('\n');
        out
    }
}

/// Number of spherical probe values used to decide whether a relation
/// constrains the profile at all.
const PROBE_OFFSETS: [f64; 8] = [0.0, 0.31, -0.47, 1.07, -1.61, 2.9, -3.7, 5.3];

/// Absolute floor for the degeneracy probes, relative to term magnitudes.
const DEGENERACY_TOL: f64 = 1e-12;

/// Classifies every candidate against every observation and reports the
/// surviving subset. Per-cell evaluation failures are recorded in the cell
/// and never abort the run; an empty survivor set is a legal outcome.
pub fn cull(
    candidates: &CandidateSet,
    observations: &[Observation],
    tol: f64,
) -> Result<CullingReport, CullingError> {
    if candidates.is_empty() {
        return Err(CullingError::NoCandidates);
    }
    if observations.is_empty() {
        return Err(CullingError::NoObservations);
    }
    for obs in observations {
        match &obs.data {
            ObservationData::Profile(p) => {
                if p.density().is_empty() {
                    return Err(CullingError::EmptyObservation(obs.name.clone()));
                }
            }
            ObservationData::Samples(samples) => {
                if samples.is_empty() {
                    return Err(CullingError::EmptyObservation(obs.name.clone()));
                }
                for (index, sample) in samples.iter().enumerate() {
                    if !(sample.rho.is_finite() && sample.rho > 0.0) {
                        return Err(CullingError::InvalidSample {
                            name: obs.name.clone(),
                            index,
                            rho: sample.rho,
                        });
                    }
                }
            }
        }
    }

    let mut cells = Vec::with_capacity(candidates.len());
    let mut survivors = Vec::new();
    for (name, rel) in candidates.entries() {
        let mut row = Vec::with_capacity(observations.len());
        for obs in observations {
            let cell_tol = obs.tolerance.unwrap_or(tol);
            row.push(evaluate_cell(name, rel, obs, cell_tol));
        }
        if row.iter().all(|cell| cell.verdict.survives()) {
            survivors.push(name.clone());
        }
        cells.push(row);
    }
    Ok(CullingReport {
        tolerance: tol,
        candidates: candidates.entries().iter().map(|(n, _)| n.clone()).collect(),
        observations: observations.iter().map(|o| o.name.clone()).collect(),
        cells,
        survivors,
    })
}

fn evaluate_cell(
    candidate: &str,
    rel: &ConstitutiveRelation,
    obs: &Observation,
    tol: f64,
) -> CellReport {
    let base = CellReport {
        candidate: candidate.to_string(),
        observation: obs.name.clone(),
        verdict: Verdict::EvaluationError,
        max_residual: None,
        normalization: None,
        detail: None,
    };
    match &obs.data {
        ObservationData::Profile(sol) => {
            if !rel.is_implicit_euler_family() {
                return CellReport {
                    detail: Some(format!(
                        "profile observations require an implicit-Euler-family \
                         relation, got {}",
                        rel.family_name()
                    )),
                    ..base
                };
            }
            match consistency_on_profile(rel, sol, tol) {
                Ok(report) => {
                    let degenerate = profile_degenerate(rel, sol);
                    let verdict = if degenerate {
                        Verdict::Degenerate
                    } else if report.consistent {
                        Verdict::Consistent
                    } else {
                        Verdict::Inconsistent
                    };
                    CellReport {
                        verdict,
                        max_residual: Some(report.max_abs_h),
                        normalization: Some(report.normalization),
                        ..base
                    }
                }
                Err(err) => CellReport { detail: Some(err.to_string()), ..base },
            }
        }
        ObservationData::Samples(samples) => match evaluate_samples(rel, samples, tol) {
            Ok((verdict, max_residual, normalization)) => CellReport {
                verdict,
                max_residual: Some(max_residual),
                normalization: Some(normalization),
                ..base
            },
            Err(err) => CellReport { detail: Some(err.to_string()), ..base },
        },
    }
}

/// True when the spherical condition vanishes at widely spaced probe values
/// across the profile's density range: the relation does not constrain the
/// observed scalar at all.
fn profile_degenerate(rel: &ConstitutiveRelation, sol: &HydrostaticSolution) -> bool {
    let n = sol.density().len();
    let checks = [0, n / 2, n - 1];
    for &i in &checks {
        let rho = sol.density()[i];
        let scale = sol.phi()[i].abs().max(1.0);
        for offset in PROBE_OFFSETS {
            let phi = offset * scale;
            let Ok((a1, a2, a4)) = rel.spherical_coefficients(rho, phi) else {
                return false;
            };
            let h = a1 - a2 * phi + a4 * phi * phi;
            let term_scale = 1.0 + a1.abs() + (a2 * phi).abs() + (a4 * phi * phi).abs();
            if h.abs() > DEGENERACY_TOL * term_scale {
                return false;
            }
        }
    }
    true
}

fn evaluate_samples(
    rel: &ConstitutiveRelation,
    samples: &[StressSample],
    tol: f64,
) -> Result<(Verdict, f64, f64), ConstitutiveError> {
    let mut max_residual = 0.0_f64;
    let mut max_alpha1 = 0.0_f64;
    for sample in samples {
        let residual = if rel.is_implicit_euler_family() {
            rel.residual_implicit_euler(sample.rho, sample.stress)?
        } else {
            rel.residual_general(sample.rho, sample.grad, sample.stress)?
        };
        max_residual = max_residual.max(residual.norm_inf());
        max_alpha1 = max_alpha1.max(rel.alpha1_magnitude(
            sample.rho,
            sample.grad,
            sample.stress,
        )?);
    }
    let normalization = 1.0 + max_alpha1;
    let verdict = if max_residual / normalization <= tol {
        Verdict::Consistent
    } else {
        Verdict::Inconsistent
    };
    Ok((verdict, max_residual, normalization))
}

/// Integrates the coupled hydrostatic problem for a relation that links
/// density and spherical stress: `dphi/dy = -g rho(phi)` from the surface
/// value `phi0` downward, inverting the relation for the density at every
/// stage. Optional multiplicative uniform noise (amplitude < 1, independent
/// for density and stress) makes repeatable synthetic measurements.
pub fn generate_observation(
    rel: &ConstitutiveRelation,
    grid: &HalfSpaceGrid,
    phi0: f64,
    noise_amplitude: f64,
    seed: u64,
) -> Result<Observation, CullingError> {
    if !rel.is_implicit_euler_family() {
        return Err(CullingError::UnsupportedFamily(rel.family_name()));
    }
    if !(0.0..1.0).contains(&noise_amplitude) {
        return Err(CullingError::BadNoise(noise_amplitude));
    }

    let y = grid.points();
    let n = grid.len();
    let grav = grid.gravity();
    let mut rho = vec![0.0; n];
    let mut phi = vec![0.0; n];
    phi[n - 1] = phi0;
    let mut warm = density_for_phi(rel, phi0, 1.0)?;
    rho[n - 1] = warm;

    // classic fourth-order Runge-Kutta, one step per grid cell, marching
    // down from the surface (negative step)
    for i in (0..n - 1).rev() {
        let step = y[i] - y[i + 1];
        let phi_top = phi[i + 1];
        let k1 = -grav * density_for_phi(rel, phi_top, warm)?;
        let k2 = -grav * density_for_phi(rel, phi_top + 0.5 * step * k1, warm)?;
        let k3 = -grav * density_for_phi(rel, phi_top + 0.5 * step * k2, warm)?;
        let k4 = -grav * density_for_phi(rel, phi_top + step * k3, warm)?;
        phi[i] = phi_top + step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        warm = density_for_phi(rel, phi[i], warm)?;
        rho[i] = warm;
    }

    if noise_amplitude > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..n {
            rho[i] *= 1.0 + noise_amplitude * rng.gen_range(-1.0..1.0);
            phi[i] *= 1.0 + noise_amplitude * rng.gen_range(-1.0..1.0);
        }
    }

    let solution = HydrostaticSolution::new(grid.clone(), rho, phi)?;
    Ok(Observation {
        name: format!("synthetic-seed{seed}"),
        data: ObservationData::Profile(solution),
        tolerance: None,
    })
}

/// Solves the spherical condition for the density at a fixed `phi`, warm
/// starting from the previous value. Errors when the condition vanishes
/// identically (nothing to invert) or no positive density satisfies it.
fn density_for_phi(
    rel: &ConstitutiveRelation,
    phi: f64,
    warm: f64,
) -> Result<f64, CullingError> {
    // the linear pressure law inverts exactly
    if let ConstitutiveRelation::IdealGas { c } = rel {
        let rho = phi / c;
        if rho > 0.0 {
            return Ok(rho);
        }
        return Err(CullingError::NotInvertible { phi, lo: 0.0, hi: 0.0 });
    }

    let h = |rho: f64| rel.spherical_residual(rho, phi);

    // degeneracy probe in rho: if h vanishes across the range the relation
    // cannot be inverted
    let probes = [warm, warm * 0.13, warm * 0.71, warm * 2.3, warm * 7.7, warm * 23.0];
    let mut all_zero = true;
    for rho in probes {
        match h(rho) {
            Ok(value) => {
                if value.abs() > DEGENERACY_TOL * (1.0 + value.abs() + phi.abs()) {
                    all_zero = false;
                    break;
                }
            }
            Err(_) => {
                all_zero = false;
                break;
            }
        }
    }
    if all_zero {
        return Err(CullingError::DegenerateRelation { phi });
    }

    // Newton from the warm start
    let mut rho = warm.max(1e-12);
    let mut f = h(rho).map_err(CullingError::from)?;
    for _ in 0..100 {
        if f.abs() <= 1e-13 * (1.0 + phi.abs()) {
            return Ok(rho);
        }
        let step = 1e-7 * rho.max(1e-6);
        let fp = h(rho + step).map_err(CullingError::from)?;
        let derivative = (fp - f) / step;
        if derivative == 0.0 || !derivative.is_finite() {
            break;
        }
        let mut candidate = rho - f / derivative;
        if candidate <= 0.0 {
            candidate = 0.5 * rho;
        }
        let fc = match h(candidate) {
            Ok(v) => v,
            Err(_) => break,
        };
        if fc.abs() >= f.abs() {
            break;
        }
        rho = candidate;
        f = fc;
    }
    if f.abs() <= 1e-10 * (1.0 + phi.abs()) {
        return Ok(rho);
    }

    // geometric bracket scan around the warm start, then bisection
    let lo_bound = warm * 1e-6;
    let hi_bound = warm * 1e6;
    let mut prev: Option<(f64, f64)> = None;
    let steps = 256;
    for j in 0..=steps {
        let t = j as f64 / steps as f64;
        let rho_probe = lo_bound * (hi_bound / lo_bound).powf(t);
        let Ok(value) = h(rho_probe) else {
            prev = None;
            continue;
        };
        if value == 0.0 {
            return Ok(rho_probe);
        }
        if let Some((rho_prev, value_prev)) = prev {
            if value_prev * value < 0.0 {
                let (mut lo, mut hi, mut flo) = (rho_prev, rho_probe, value_prev);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let Ok(fmid) = h(mid) else { break };
                    if fmid == 0.0 || (hi - lo) <= 1e-15 * mid.max(1e-30) {
                        return Ok(mid);
                    }
                    if flo * fmid < 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                        flo = fmid;
                    }
                }
                return Ok(0.5 * (lo + hi));
            }
        }
        prev = Some((rho_probe, value));
    }
    Err(CullingError::NotInvertible { phi, lo: lo_bound, hi: hi_bound })
}
