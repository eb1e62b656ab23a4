//! JSON run configuration: named relations, grid, surface condition, solver
//! settings, and observations (inline, generated, or loaded from files).
//!
//! Expressions are parsed and relation references resolved at load time, so
//! configuration mistakes surface before any computation starts.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use implicit_fluids::constitutive::{CoefficientSet, ConstitutiveRelation};
use implicit_fluids::culling::{
    generate_observation, CandidateSet, Observation, ObservationData, StressSample,
};
use implicit_fluids::exprdsl::Expr;
use implicit_fluids::hydrostatics::{
    HalfSpaceGrid, HydrostaticSolution, DEFAULT_CONSISTENCY_TOL,
};
use implicit_fluids::solver::NewtonSettings;
use implicit_fluids::tensor3::{SymTensor3, Vec3};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub relations: Vec<RelationConfig>,
    pub grid: GridConfig,
    #[serde(default)]
    pub surface: SurfaceConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Consistency tolerance for culling and profile verdicts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Density law used by `hydrostatic` instead of inverting the relation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prescribed_density: Option<PrescribedDensity>,
    /// Candidate names for `cull`; defaults to every declared relation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub observations: Vec<ObservationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RelationConfig {
    pub name: String,
    #[serde(flatten)]
    pub family: FamilyConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum FamilyConfig {
    IdealGas {
        c: f64,
    },
    ClassicalEuler {
        pressure: String,
    },
    ImplicitEuler {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha1: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha2: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha4: Option<String>,
    },
    StressLinear {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha1: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha2: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha3: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha5: Option<String>,
    },
    GeneralImplicit {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha1: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha2: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha3: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha4: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha5: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha6: Option<String>,
    },
}

fn parse_expr(source: &str, what: &str, relation: &str) -> Result<Expr> {
    Expr::parse(source)
        .with_context(|| format!("relation `{relation}`: {what} = `{source}`"))
}

fn parse_opt(source: &Option<String>, what: &str, relation: &str) -> Result<Option<Expr>> {
    source
        .as_ref()
        .map(|s| parse_expr(s, what, relation))
        .transpose()
}

impl FamilyConfig {
    fn build(&self, name: &str) -> Result<ConstitutiveRelation> {
        let rel = match self {
            FamilyConfig::IdealGas { c } => ConstitutiveRelation::ideal_gas(*c)?,
            FamilyConfig::ClassicalEuler { pressure } => {
                ConstitutiveRelation::classical_euler(parse_expr(pressure, "pressure", name)?)?
            }
            FamilyConfig::ImplicitEuler { alpha1, alpha2, alpha4 } => {
                ConstitutiveRelation::implicit_euler(
                    parse_opt(alpha1, "alpha1", name)?,
                    parse_opt(alpha2, "alpha2", name)?,
                    parse_opt(alpha4, "alpha4", name)?,
                )?
            }
            FamilyConfig::StressLinear { alpha1, alpha2, alpha3, alpha5 } => {
                ConstitutiveRelation::stress_linear(
                    parse_opt(alpha1, "alpha1", name)?,
                    parse_opt(alpha2, "alpha2", name)?,
                    parse_opt(alpha3, "alpha3", name)?,
                    parse_opt(alpha5, "alpha5", name)?,
                )?
            }
            FamilyConfig::GeneralImplicit { alpha1, alpha2, alpha3, alpha4, alpha5, alpha6 } => {
                ConstitutiveRelation::general_implicit(CoefficientSet::new([
                    parse_opt(alpha1, "alpha1", name)?,
                    parse_opt(alpha2, "alpha2", name)?,
                    parse_opt(alpha3, "alpha3", name)?,
                    parse_opt(alpha4, "alpha4", name)?,
                    parse_opt(alpha5, "alpha5", name)?,
                    parse_opt(alpha6, "alpha6", name)?,
                ]))?
            }
        };
        Ok(rel)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridConfig {
    pub y_min: f64,
    pub n_points: usize,
    pub gravity: f64,
}

/// Surface condition: either the stress scalar `phi(0)` directly or the
/// surface density `K` (from which `phi(0)` follows for explicit pressure
/// laws).
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SurfaceConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SolverConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<f64>,
}

/// Only a constant law is supported for prescribed densities.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PrescribedDensity {
    pub constant: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObservationConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generate: Option<GenerateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<SampleConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GenerateConfig {
    pub relation: String,
    pub phi0: f64,
    #[serde(default)]
    pub noise: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProfileConfig {
    pub y: Vec<f64>,
    pub rho: Vec<f64>,
    pub phi: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gravity: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleConfig {
    pub rho: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad: Option<[f64; 3]>,
    /// Components in the order `[xx, yy, zz, xy, xz, yz]`.
    pub stress: [f64; 6],
}

/// Observation payload as stored in an external file.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct ObservationBody {
    #[serde(default)]
    profile: Option<ProfileConfig>,
    #[serde(default)]
    samples: Option<Vec<SampleConfig>>,
    #[serde(default)]
    tol: Option<f64>,
}

/// A parsed and validated configuration, ready to drive commands.
pub struct LoadedConfig {
    pub raw: RunConfig,
    relations: Vec<(String, ConstitutiveRelation)>,
    index: HashMap<String, usize>,
    pub grid: HalfSpaceGrid,
    base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read configuration `{}`", path.display()))?;
        let raw: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("cannot parse configuration `{}`", path.display()))?;
        let base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Self::from_raw(raw, base_dir)
    }

    pub fn from_raw(raw: RunConfig, base_dir: PathBuf) -> Result<Self> {
        let mut relations = Vec::with_capacity(raw.relations.len());
        let mut index = HashMap::new();
        for rc in &raw.relations {
            if index.contains_key(&rc.name) {
                bail!("relation `{}` is declared twice", rc.name);
            }
            let rel = rc.family.build(&rc.name)?;
            index.insert(rc.name.clone(), relations.len());
            relations.push((rc.name.clone(), rel));
        }
        // every reference must resolve at load time
        if let Some(candidates) = &raw.candidates {
            for name in candidates {
                if !index.contains_key(name) {
                    bail!("candidate `{name}` does not name a declared relation");
                }
            }
        }
        for obs in &raw.observations {
            let sources = [
                obs.generate.is_some(),
                obs.profile.is_some(),
                obs.samples.is_some(),
                obs.file.is_some(),
            ];
            if sources.iter().filter(|&&s| s).count() != 1 {
                bail!(
                    "observation `{}` must declare exactly one of \
                     `generate`, `profile`, `samples`, `file`",
                    obs.name
                );
            }
            if let Some(generate) = &obs.generate {
                if !index.contains_key(&generate.relation) {
                    bail!(
                        "observation `{}` references unknown relation `{}`",
                        obs.name,
                        generate.relation
                    );
                }
            }
        }
        let grid = HalfSpaceGrid::new(raw.grid.y_min, raw.grid.n_points, raw.grid.gravity)?;
        Ok(LoadedConfig { raw, relations, index, grid, base_dir })
    }

    pub fn relation(&self, name: &str) -> Result<&ConstitutiveRelation> {
        self.index
            .get(name)
            .map(|&i| &self.relations[i].1)
            .ok_or_else(|| anyhow!("unknown relation `{name}`"))
    }

    /// Newton settings with command-line overrides applied.
    pub fn settings(&self, tol: Option<f64>, max_iter: Option<u32>) -> NewtonSettings {
        let defaults = NewtonSettings::default();
        NewtonSettings {
            abs_tol: tol.or(self.raw.solver.abs_tol).unwrap_or(defaults.abs_tol),
            rel_tol: self.raw.solver.rel_tol.unwrap_or(defaults.rel_tol),
            max_iter: max_iter.or(self.raw.solver.max_iter).unwrap_or(defaults.max_iter),
            fd_step: self.raw.solver.fd_step.unwrap_or(defaults.fd_step),
        }
    }

    /// Consistency tolerance for culling-style verdicts.
    pub fn consistency_tol(&self, tol: Option<f64>) -> f64 {
        tol.or(self.raw.tolerance).unwrap_or(DEFAULT_CONSISTENCY_TOL)
    }

    pub fn output_dir(&self, cli_out_dir: Option<&Path>) -> PathBuf {
        cli_out_dir
            .map(Path::to_path_buf)
            .or_else(|| self.raw.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn candidate_set(&self) -> Result<CandidateSet> {
        let entries: Vec<(String, ConstitutiveRelation)> = match &self.raw.candidates {
            Some(names) => names
                .iter()
                .map(|n| self.relation(n).map(|r| (n.clone(), r.clone())))
                .collect::<Result<_>>()?,
            None => self.relations.clone(),
        };
        if entries.is_empty() {
            bail!("no candidates: declare relations or a non-empty `candidates` list");
        }
        CandidateSet::new(entries).map_err(Into::into)
    }

    /// Builds every configured observation; `default_seed` feeds generated
    /// observations that do not pin their own seed.
    pub fn observations(&self, default_seed: u64) -> Result<Vec<Observation>> {
        let mut out = Vec::with_capacity(self.raw.observations.len());
        for oc in &self.raw.observations {
            let mut obs = self
                .build_observation(oc, default_seed)
                .with_context(|| format!("observation `{}`", oc.name))?;
            obs.name = oc.name.clone();
            obs.tolerance = oc.tol;
            out.push(obs);
        }
        Ok(out)
    }

    fn build_observation(
        &self,
        oc: &ObservationConfig,
        default_seed: u64,
    ) -> Result<Observation> {
        if let Some(generate) = &oc.generate {
            let rel = self.relation(&generate.relation)?;
            let seed = generate.seed.unwrap_or(default_seed);
            let obs = generate_observation(rel, &self.grid, generate.phi0, generate.noise, seed)?;
            return Ok(obs);
        }
        if let Some(profile) = &oc.profile {
            let sol = build_profile(profile, self.raw.grid.gravity)?;
            return Ok(Observation {
                name: String::new(),
                data: ObservationData::Profile(sol),
                tolerance: None,
            });
        }
        if let Some(samples) = &oc.samples {
            return Ok(Observation {
                name: String::new(),
                data: ObservationData::Samples(build_samples(samples)),
                tolerance: None,
            });
        }
        let file = oc.file.as_ref().expect("validated at load time");
        let path = if file.is_absolute() {
            file.clone()
        } else {
            self.base_dir.join(file)
        };
        let text = fs::read_to_string(&path)
            .with_context(|| format!("cannot read observation file `{}`", path.display()))?;
        let body: ObservationBody = serde_json::from_str(&text)
            .with_context(|| format!("cannot parse observation file `{}`", path.display()))?;
        let data = match (body.profile, body.samples) {
            (Some(profile), None) => {
                ObservationData::Profile(build_profile(&profile, self.raw.grid.gravity)?)
            }
            (None, Some(samples)) => ObservationData::Samples(build_samples(&samples)),
            _ => bail!(
                "observation file `{}` must contain exactly one of `profile`, `samples`",
                path.display()
            ),
        };
        Ok(Observation { name: String::new(), data, tolerance: body.tol })
    }
}

fn build_samples(samples: &[SampleConfig]) -> Vec<StressSample> {
    samples
        .iter()
        .map(|s| StressSample {
            rho: s.rho,
            grad: s
                .grad
                .map(|g| Vec3::new(g[0], g[1], g[2]))
                .unwrap_or(Vec3::ZERO),
            stress: SymTensor3::from_array(s.stress),
        })
        .collect()
}

/// Reconstructs a half-space grid from explicit points, enforcing uniform
/// spacing with the surface at zero.
fn build_profile(profile: &ProfileConfig, default_gravity: f64) -> Result<HydrostaticSolution> {
    let y = &profile.y;
    if y.len() < 3 {
        bail!("profile needs at least 3 points, got {}", y.len());
    }
    let gravity = profile.gravity.unwrap_or(default_gravity);
    let grid = HalfSpaceGrid::new(y[0], y.len(), gravity)?;
    for (given, expected) in y.iter().zip(grid.points().iter()) {
        if (given - expected).abs() > 1e-9 * y[0].abs() {
            bail!(
                "profile grid must be uniform on [{}, 0]: point {given} deviates from {expected}",
                y[0]
            );
        }
    }
    HydrostaticSolution::new(grid, profile.rho.clone(), profile.phi.clone()).map_err(Into::into)
}
