//! Constitutive relation families and their tensor residuals.
//!
//! The central object is the implicit relation between density, density
//! gradient, and Cauchy stress, written through the isotropic representation
//!
//! ```text
//! a1*I + a2*T + a3*(g⊗g) + a4*T² + a5*(g⊗Tg + Tg⊗g) + a6*(g⊗T²g + T²g⊗g) = 0
//! ```
//!
//! with scalar moduli `a1..a6` depending on the density and the six
//! invariants of `(T, g)`. Families restrict which coefficients may appear
//! and which invariants each may reference; the restrictions are enforced at
//! construction time. The explicit gradient-stress evaluator for capillary
//! fluids lives here as well ([`korteweg_stress`]).

use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};
use thiserror::Error;

use crate::exprdsl::{EvalContext, EvalError, Expr, Var};
use crate::tensor3::{invariants, outer, random_orthogonal_from, SymTensor3, Vec3};

#[derive(Debug, Error)]
pub enum ConstitutiveError {
    #[error("coefficient {coefficient} of a {family} relation may not reference `{var}` (allowed: {allowed})")]
    ForbiddenVariable {
        family: &'static str,
        coefficient: &'static str,
        var: &'static str,
        allowed: &'static str,
    },
    #[error("ideal gas constant must be positive, got {c}")]
    NonPositiveGasConstant { c: f64 },
    #[error("density must be positive, got {rho}")]
    NonPositiveDensity { rho: f64 },
    #[error("{op} requires an implicit-Euler-family relation, got {family}")]
    UnsupportedFamily { op: &'static str, family: &'static str },
    #[error("shear viscosity must be nonnegative, got {mu}")]
    NegativeShearViscosity { mu: f64 },
    #[error("bulk response 3*lambda + 2*mu must be nonnegative, got {value}")]
    NegativeBulkResponse { value: f64 },
    #[error("isotropy check requires at least one sample")]
    NoSamples,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// The six scalar moduli of the isotropic representation. `None` means the
/// coefficient is absent (identically zero) and its term is skipped.
#[derive(Clone, Debug, Default)]
pub struct CoefficientSet {
    alphas: [Option<Expr>; 6],
}

impl CoefficientSet {
    pub fn new(alphas: [Option<Expr>; 6]) -> Self {
        CoefficientSet { alphas }
    }

    /// Coefficient by 1-based index, matching the conventional naming.
    pub fn alpha(&self, index: usize) -> Option<&Expr> {
        self.alphas[index - 1].as_ref()
    }

    fn evaluate(&self, ctx: &EvalContext) -> Result<[Option<f64>; 6], EvalError> {
        let mut out = [None; 6];
        for (slot, expr) in out.iter_mut().zip(self.alphas.iter()) {
            if let Some(e) = expr {
                *slot = Some(e.eval(ctx)?);
            }
        }
        Ok(out)
    }
}

const COEFFICIENT_NAMES: [&str; 6] = ["alpha1", "alpha2", "alpha3", "alpha4", "alpha5", "alpha6"];

/// A named constitutive family together with its data.
#[derive(Clone, Debug)]
pub enum ConstitutiveRelation {
    /// Full isotropic representation; every coefficient may reference the
    /// density and all six invariants.
    GeneralImplicit(CoefficientSet),
    /// Representation restricted to terms linear in the stress. `alpha1` and
    /// `alpha3` may reference `rho, i1, i4, i5`; `alpha2` and `alpha5` only
    /// `rho, i4`.
    StressLinear(CoefficientSet),
    /// Stress-density relation with no gradient dependence: `alpha1`,
    /// `alpha2`, `alpha4` over `rho, i1, i2, i3`.
    ImplicitEuler(CoefficientSet),
    /// Explicit pressure law `T = -p(rho) I`.
    ClassicalEuler { pressure: Expr },
    /// Linear pressure law `p = C rho`.
    IdealGas { c: f64 },
}

/// Variables admissible for each coefficient of a family. `phi` counts as an
/// `i1` reference since it abbreviates `-i1/3`.
fn allowed_vars(family: &'static str, coefficient: usize) -> (&'static [Var], &'static str) {
    const GENERAL: &[Var] = &[
        Var::Rho,
        Var::I1,
        Var::I2,
        Var::I3,
        Var::I4,
        Var::I5,
        Var::I6,
        Var::Phi,
    ];
    const EULER: &[Var] = &[Var::Rho, Var::I1, Var::I2, Var::I3, Var::Phi];
    const LINEAR_13: &[Var] = &[Var::Rho, Var::I1, Var::I4, Var::I5, Var::Phi];
    const LINEAR_25: &[Var] = &[Var::Rho, Var::I4];
    match family {
        "general-implicit" => (GENERAL, "rho, i1..i6, phi"),
        "implicit-euler" => (EULER, "rho, i1, i2, i3, phi"),
        "stress-linear" => match coefficient {
            1 | 3 => (LINEAR_13, "rho, i1, i4, i5, phi"),
            _ => (LINEAR_25, "rho, i4"),
        },
        _ => (GENERAL, "rho, i1..i6, phi"),
    }
}

fn check_coefficient(
    family: &'static str,
    coefficient: usize,
    expr: &Expr,
) -> Result<(), ConstitutiveError> {
    let (allowed, allowed_text) = allowed_vars(family, coefficient);
    for var in expr.variables() {
        if !allowed.contains(&var) {
            return Err(ConstitutiveError::ForbiddenVariable {
                family,
                coefficient: COEFFICIENT_NAMES[coefficient - 1],
                var: var.name(),
                allowed: allowed_text,
            });
        }
    }
    Ok(())
}

impl ConstitutiveRelation {
    pub fn general_implicit(set: CoefficientSet) -> Result<Self, ConstitutiveError> {
        for idx in 1..=6 {
            if let Some(expr) = set.alpha(idx) {
                check_coefficient("general-implicit", idx, expr)?;
            }
        }
        Ok(ConstitutiveRelation::GeneralImplicit(set))
    }

    pub fn stress_linear(
        alpha1: Option<Expr>,
        alpha2: Option<Expr>,
        alpha3: Option<Expr>,
        alpha5: Option<Expr>,
    ) -> Result<Self, ConstitutiveError> {
        let set = CoefficientSet::new([alpha1, alpha2, alpha3, None, alpha5, None]);
        for idx in [1, 2, 3, 5] {
            if let Some(expr) = set.alpha(idx) {
                check_coefficient("stress-linear", idx, expr)?;
            }
        }
        Ok(ConstitutiveRelation::StressLinear(set))
    }

    pub fn implicit_euler(
        alpha1: Option<Expr>,
        alpha2: Option<Expr>,
        alpha4: Option<Expr>,
    ) -> Result<Self, ConstitutiveError> {
        let set = CoefficientSet::new([alpha1, alpha2, None, alpha4, None, None]);
        for idx in [1, 2, 4] {
            if let Some(expr) = set.alpha(idx) {
                check_coefficient("implicit-euler", idx, expr)?;
            }
        }
        Ok(ConstitutiveRelation::ImplicitEuler(set))
    }

    pub fn classical_euler(pressure: Expr) -> Result<Self, ConstitutiveError> {
        for var in pressure.variables() {
            if var != Var::Rho {
                return Err(ConstitutiveError::ForbiddenVariable {
                    family: "classical-euler",
                    coefficient: "pressure",
                    var: var.name(),
                    allowed: "rho",
                });
            }
        }
        Ok(ConstitutiveRelation::ClassicalEuler { pressure })
    }

    pub fn ideal_gas(c: f64) -> Result<Self, ConstitutiveError> {
        if !(c.is_finite() && c > 0.0) {
            return Err(ConstitutiveError::NonPositiveGasConstant { c });
        }
        Ok(ConstitutiveRelation::IdealGas { c })
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            ConstitutiveRelation::GeneralImplicit(_) => "general-implicit",
            ConstitutiveRelation::StressLinear(_) => "stress-linear",
            ConstitutiveRelation::ImplicitEuler(_) => "implicit-euler",
            ConstitutiveRelation::ClassicalEuler { .. } => "classical-euler",
            ConstitutiveRelation::IdealGas { .. } => "ideal-gas",
        }
    }

    /// True for the families whose coefficients depend on the stress
    /// invariants only (no gradient dependence).
    pub fn is_implicit_euler_family(&self) -> bool {
        matches!(
            self,
            ConstitutiveRelation::ImplicitEuler(_)
                | ConstitutiveRelation::ClassicalEuler { .. }
                | ConstitutiveRelation::IdealGas { .. }
        )
    }

    /// The explicit pressure `p(rho)` when the relation has one.
    pub fn euler_pressure(&self, rho: f64) -> Option<Result<f64, ConstitutiveError>> {
        match self {
            ConstitutiveRelation::ClassicalEuler { pressure } => Some(
                pressure
                    .eval(&EvalContext::density_only(rho))
                    .map_err(ConstitutiveError::from),
            ),
            ConstitutiveRelation::IdealGas { c } => Some(Ok(c * rho)),
            _ => None,
        }
    }

    fn coefficients_at(
        &self,
        ctx: &EvalContext,
    ) -> Result<[Option<f64>; 6], ConstitutiveError> {
        match self {
            ConstitutiveRelation::GeneralImplicit(set)
            | ConstitutiveRelation::StressLinear(set)
            | ConstitutiveRelation::ImplicitEuler(set) => Ok(set.evaluate(ctx)?),
            ConstitutiveRelation::ClassicalEuler { pressure } => {
                let p = pressure.eval(&EvalContext::density_only(ctx.rho))?;
                Ok([Some(p), Some(1.0), None, None, None, None])
            }
            ConstitutiveRelation::IdealGas { c } => {
                Ok([Some(c * ctx.rho), Some(1.0), None, None, None, None])
            }
        }
    }

    /// Residual of the full isotropic representation at `(rho, g, T)`.
    /// The zero tensor indicates the state satisfies the relation.
    pub fn residual_general(
        &self,
        rho: f64,
        g: Vec3,
        t: SymTensor3,
    ) -> Result<SymTensor3, ConstitutiveError> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(ConstitutiveError::NonPositiveDensity { rho });
        }
        let ctx = EvalContext::new(rho, {
            let inv = invariants(t, g);
            [inv.i1, inv.i2, inv.i3, inv.i4, inv.i5, inv.i6]
        });
        let a = self.coefficients_at(&ctx)?;
        let mut r = SymTensor3::ZERO;
        if let Some(a1) = a[0] {
            r = r + SymTensor3::scaled_identity(a1);
        }
        if let Some(a2) = a[1] {
            r = r + t * a2;
        }
        if let Some(a3) = a[2] {
            r = r + outer(g, g) * a3;
        }
        if let Some(a4) = a[3] {
            r = r + t.square() * a4;
        }
        if let Some(a5) = a[4] {
            // g⊗Tg + Tg⊗g = 2 * sym(g ⊗ Tg)
            r = r + outer(g, t.apply(g)) * (2.0 * a5);
        }
        if let Some(a6) = a[5] {
            r = r + outer(g, t.square().apply(g)) * (2.0 * a6);
        }
        Ok(r)
    }

    /// Residual `a1*I + a2*T + a4*T²` for gradient-free families.
    pub fn residual_implicit_euler(
        &self,
        rho: f64,
        t: SymTensor3,
    ) -> Result<SymTensor3, ConstitutiveError> {
        if !self.is_implicit_euler_family() {
            return Err(ConstitutiveError::UnsupportedFamily {
                op: "residual_implicit_euler",
                family: self.family_name(),
            });
        }
        self.residual_general(rho, Vec3::ZERO, t)
    }

    /// The moduli `(a1, a2, a4)` evaluated on the spherical branch
    /// `T = -phi*I`, i.e. with `i1 = -3phi`, `i2 = 3phi²`, `i3 = -3phi³`.
    pub fn spherical_coefficients(
        &self,
        rho: f64,
        phi: f64,
    ) -> Result<(f64, f64, f64), ConstitutiveError> {
        if !self.is_implicit_euler_family() {
            return Err(ConstitutiveError::UnsupportedFamily {
                op: "spherical_coefficients",
                family: self.family_name(),
            });
        }
        if !(rho.is_finite() && rho > 0.0) {
            return Err(ConstitutiveError::NonPositiveDensity { rho });
        }
        let ctx = EvalContext::spherical(rho, phi);
        let a = self.coefficients_at(&ctx)?;
        Ok((
            a[0].unwrap_or(0.0),
            a[1].unwrap_or(0.0),
            a[3].unwrap_or(0.0),
        ))
    }

    /// The scalar consistency condition on the spherical branch:
    /// `h(rho, phi) = a1 - a2*phi + a4*phi²`. A spherical stress `-phi*I`
    /// satisfies the relation exactly when `h` vanishes.
    pub fn spherical_residual(&self, rho: f64, phi: f64) -> Result<f64, ConstitutiveError> {
        let (a1, a2, a4) = self.spherical_coefficients(rho, phi)?;
        Ok(a1 - a2 * phi + a4 * phi * phi)
    }

    /// Magnitude scale of the leading modulus, used to normalize residual
    /// comparisons (`1 + max|a1|` semantics).
    pub fn alpha1_magnitude(
        &self,
        rho: f64,
        g: Vec3,
        t: SymTensor3,
    ) -> Result<f64, ConstitutiveError> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(ConstitutiveError::NonPositiveDensity { rho });
        }
        let inv = invariants(t, g);
        let ctx = EvalContext::new(rho, [inv.i1, inv.i2, inv.i3, inv.i4, inv.i5, inv.i6]);
        let a = self.coefficients_at(&ctx)?;
        Ok(a[0].unwrap_or(0.0).abs())
    }
}

/// Parameters of the explicit gradient-stress evaluator:
/// `T = (a0(rho) + a1 tr(H) + a2 |g|²) I + a3 (g⊗g) + a4 H
///      + lambda tr(Dv) I + 2 mu Dv`
/// where `H` is the density Hessian and `Dv` the symmetric velocity
/// gradient. The Laplacian of the density enters as `tr(H)`.
#[derive(Clone, Debug)]
pub struct KortewegParams {
    pub alpha0: Expr,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub lambda: f64,
    pub mu: f64,
}

impl KortewegParams {
    pub fn new(
        alpha0: Expr,
        a1: f64,
        a2: f64,
        a3: f64,
        a4: f64,
        lambda: f64,
        mu: f64,
    ) -> Result<Self, ConstitutiveError> {
        for var in alpha0.variables() {
            if var != Var::Rho {
                return Err(ConstitutiveError::ForbiddenVariable {
                    family: "korteweg",
                    coefficient: "alpha0",
                    var: var.name(),
                    allowed: "rho",
                });
            }
        }
        if mu < 0.0 {
            return Err(ConstitutiveError::NegativeShearViscosity { mu });
        }
        let bulk = 3.0 * lambda + 2.0 * mu;
        if bulk < 0.0 {
            return Err(ConstitutiveError::NegativeBulkResponse { value: bulk });
        }
        Ok(KortewegParams { alpha0, a1, a2, a3, a4, lambda, mu })
    }
}

/// Explicit stress of a capillary (gradient) fluid. With zero gradients and
/// no flow this reduces to `alpha0(rho) * I`.
pub fn korteweg_stress(
    params: &KortewegParams,
    rho: f64,
    g: Vec3,
    hess: SymTensor3,
    dv: SymTensor3,
) -> Result<SymTensor3, ConstitutiveError> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(ConstitutiveError::NonPositiveDensity { rho });
    }
    let a0 = params.alpha0.eval(&EvalContext::density_only(rho))?;
    let iso = a0 + params.a1 * hess.trace() + params.a2 * g.dot(g) + params.lambda * dv.trace();
    Ok(SymTensor3::scaled_identity(iso)
        + outer(g, g) * params.a3
        + hess * params.a4
        + dv * (2.0 * params.mu))
}

/// Maximum normalized equivariance defect of a relation under random
/// orthogonal transformations: samples `(rho, g, T, Q)` and compares
/// `residual(rho, Qg, QTQᵀ)` against `Q residual(rho, g, T) Qᵀ`.
/// A representation-built relation stays at rounding level; values above
/// ~0.1 indicate an anisotropic response.
pub fn isotropy_check(
    rel: &ConstitutiveRelation,
    samples: u32,
    seed: u64,
) -> Result<f64, ConstitutiveError> {
    isotropy_check_fn(|rho, g, t| rel.residual_general(rho, g, t), samples, seed)
}

/// [`isotropy_check`] over an arbitrary residual function, so composed or
/// deliberately perturbed responses can be probed with the same sampling.
pub fn isotropy_check_fn<F>(residual: F, samples: u32, seed: u64) -> Result<f64, ConstitutiveError>
where
    F: Fn(f64, Vec3, SymTensor3) -> Result<SymTensor3, ConstitutiveError>,
{
    if samples == 0 {
        return Err(ConstitutiveError::NoSamples);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_err = 0.0_f64;
    for _ in 0..samples {
        let rho = rng.gen_range(0.5..4.0);
        let g = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let mut comps = [0.0_f64; 6];
        for c in comps.iter_mut() {
            *c = rng.gen_range(-2.0..2.0);
        }
        let t = SymTensor3::from_array(comps);
        let q = random_orthogonal_from(&mut rng);

        let r = residual(rho, g, t)?;
        let r_rotated_inputs = residual(rho, q.rotate_vec(g), q.rotate_tensor(t))?;
        let rotated_r = q.rotate_tensor(r);
        let err = (r_rotated_inputs - rotated_r).norm_inf() / (r.norm_inf() + 1.0);
        max_err = max_err.max(err);
    }
    Ok(max_err)
}
