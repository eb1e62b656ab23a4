//! The half-space hydrostatic problem: a fluid at rest under gravity on
//! `y ∈ [y_min, 0]` with the free surface at `y = 0`.
//!
//! With zero velocity, mass balance holds identically and momentum balance
//! reduces to `phi(y) = phi(0) + ∫_y^0 g rho(s) ds` for a spherical stress
//! `T = -phi(y) I`. This module builds such profiles (closed-form for the
//! linear pressure law, quadrature otherwise), checks relations against them
//! through the spherical consistency condition, and verifies the balance
//! laws with finite differences.

use std::io;

use thiserror::Error;

use crate::constitutive::{ConstitutiveError, ConstitutiveRelation};
use crate::solver::{integrate_profile, SolverError};

/// Exponent ceiling before `exp` overflows to infinity.
const MAX_EXP_ARG: f64 = 700.0;

/// Default relative tolerance for declaring a relation consistent with a
/// profile; dominated by quadrature error at default panel counts.
pub const DEFAULT_CONSISTENCY_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum HydroError {
    #[error("half-space grid requires y_min < 0, got {y_min}")]
    BadYMin { y_min: f64 },
    #[error("half-space grid requires at least 3 points, got {n}")]
    TooFewPoints { n: usize },
    #[error("gravity must be positive and finite, got {grav}")]
    BadGravity { grav: f64 },
    #[error("surface constants must be positive, got K = {k}, C = {c}")]
    BadSurfaceConstants { k: f64, c: f64 },
    #[error(
        "exponential overflow: g*|y_min|/C = {exponent:.1} exceeds {MAX_EXP_ARG}; \
         truncate the grid (raise y_min) or increase C"
    )]
    Overflow { exponent: f64 },
    #[error("density must be positive and finite, got {value} at y = {y}")]
    BadDensity { value: f64, y: f64 },
    #[error("stress profile must be finite, got {value} at y = {y}")]
    BadPhi { value: f64, y: f64 },
    #[error("profile length {got} does not match grid length {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("grid too coarse for finite differences: {reason}")]
    TooCoarse { reason: String },
    #[error("at grid point {index} (y = {y}): {source}")]
    AtPoint {
        index: usize,
        y: f64,
        source: ConstitutiveError,
    },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Uniform grid on `[y_min, 0]` with the last point exactly at the surface,
/// together with the gravity magnitude.
#[derive(Clone, Debug)]
pub struct HalfSpaceGrid {
    y: Vec<f64>,
    grav: f64,
}

impl HalfSpaceGrid {
    pub fn new(y_min: f64, n_points: usize, grav: f64) -> Result<Self, HydroError> {
        if !(y_min.is_finite() && y_min < 0.0) {
            return Err(HydroError::BadYMin { y_min });
        }
        if n_points < 3 {
            return Err(HydroError::TooFewPoints { n: n_points });
        }
        if !(grav.is_finite() && grav > 0.0) {
            return Err(HydroError::BadGravity { grav });
        }
        let last = (n_points - 1) as f64;
        let y = (0..n_points)
            .map(|i| y_min * ((n_points - 1 - i) as f64) / last)
            .collect();
        Ok(HalfSpaceGrid { y, grav })
    }

    pub fn points(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn gravity(&self) -> f64 {
        self.grav
    }

    pub fn y_min(&self) -> f64 {
        self.y[0]
    }

    /// Nominal spacing `|y_min| / (n - 1)`.
    pub fn spacing(&self) -> f64 {
        -self.y_min() / ((self.len() - 1) as f64)
    }
}

/// Density and spherical stress profiles on a half-space grid.
#[derive(Clone, Debug)]
pub struct HydrostaticSolution {
    grid: HalfSpaceGrid,
    rho: Vec<f64>,
    phi: Vec<f64>,
}

impl HydrostaticSolution {
    pub fn new(
        grid: HalfSpaceGrid,
        rho: Vec<f64>,
        phi: Vec<f64>,
    ) -> Result<Self, HydroError> {
        if rho.len() != grid.len() {
            return Err(HydroError::LengthMismatch { expected: grid.len(), got: rho.len() });
        }
        if phi.len() != grid.len() {
            return Err(HydroError::LengthMismatch { expected: grid.len(), got: phi.len() });
        }
        for (i, &r) in rho.iter().enumerate() {
            if !(r.is_finite() && r > 0.0) {
                return Err(HydroError::BadDensity { value: r, y: grid.points()[i] });
            }
        }
        for (i, &p) in phi.iter().enumerate() {
            if !p.is_finite() {
                return Err(HydroError::BadPhi { value: p, y: grid.points()[i] });
            }
        }
        Ok(HydrostaticSolution { grid, rho, phi })
    }

    pub fn grid(&self) -> &HalfSpaceGrid {
        &self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.rho
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    /// Surface value `phi(0)`.
    pub fn phi_surface(&self) -> f64 {
        *self.phi.last().expect("grid has at least 3 points")
    }
}

/// Closed-form profile for the linear pressure law `p = C rho`:
/// `rho = K exp(-(g/C) y)` and `phi = C rho`, with `K` the surface density.
pub fn ideal_gas_profile(
    k: f64,
    c: f64,
    grid: &HalfSpaceGrid,
) -> Result<HydrostaticSolution, HydroError> {
    if !(k > 0.0 && c > 0.0) {
        return Err(HydroError::BadSurfaceConstants { k, c });
    }
    let exponent = grid.gravity() * (-grid.y_min()) / c;
    if exponent > MAX_EXP_ARG {
        return Err(HydroError::Overflow { exponent });
    }
    let rate = grid.gravity() / c;
    let rho: Vec<f64> = grid.points().iter().map(|&y| k * (-rate * y).exp()).collect();
    let phi = rho.iter().map(|&r| c * r).collect();
    HydrostaticSolution::new(grid.clone(), rho, phi)
}

/// Builds the stress profile for a prescribed density law by accumulating
/// the momentum-balance integral cell by cell from the surface downward.
/// Each cell is integrated with `panels_per_cell` Simpson panels.
pub fn phi_from_density<F>(
    density: F,
    phi0: f64,
    grid: &HalfSpaceGrid,
    panels_per_cell: usize,
) -> Result<HydrostaticSolution, HydroError>
where
    F: Fn(f64) -> f64,
{
    let n = grid.len();
    let y = grid.points();
    let rho: Vec<f64> = y.iter().map(|&s| density(s)).collect();
    for (i, &r) in rho.iter().enumerate() {
        if !(r.is_finite() && r > 0.0) {
            return Err(HydroError::BadDensity { value: r, y: y[i] });
        }
    }
    let mut phi = vec![0.0; n];
    phi[n - 1] = phi0;
    for i in (0..n - 1).rev() {
        phi[i] = integrate_profile(
            &density,
            grid.gravity(),
            y[i],
            y[i + 1],
            phi[i + 1],
            panels_per_cell,
        )?;
    }
    HydrostaticSolution::new(grid.clone(), rho, phi)
}

/// Result of checking a relation against a profile point by point.
#[derive(Clone, Debug)]
pub struct ConsistencyReport {
    /// Spherical-condition residual at each grid point.
    pub h: Vec<f64>,
    pub max_abs_h: f64,
    /// `1 + max|a1|` over the profile; residuals are compared against
    /// `tol * normalization` so verdicts are scale-aware.
    pub normalization: f64,
    pub max_normalized: f64,
    pub tol: f64,
    pub consistent: bool,
}

/// Evaluates the spherical consistency condition of `rel` along a profile.
/// The relation is consistent with the solution when the normalized maximum
/// residual stays below `tol`.
pub fn consistency_on_profile(
    rel: &ConstitutiveRelation,
    sol: &HydrostaticSolution,
    tol: f64,
) -> Result<ConsistencyReport, HydroError> {
    let y = sol.grid().points();
    let mut h = Vec::with_capacity(sol.density().len());
    let mut max_abs_h = 0.0_f64;
    let mut max_alpha1 = 0.0_f64;
    for (i, (&rho, &phi)) in sol.density().iter().zip(sol.phi().iter()).enumerate() {
        let (a1, a2, a4) = rel
            .spherical_coefficients(rho, phi)
            .map_err(|source| HydroError::AtPoint { index: i, y: y[i], source })?;
        let hi = a1 - a2 * phi + a4 * phi * phi;
        max_abs_h = max_abs_h.max(hi.abs());
        max_alpha1 = max_alpha1.max(a1.abs());
        h.push(hi);
    }
    let normalization = 1.0 + max_alpha1;
    let max_normalized = max_abs_h / normalization;
    Ok(ConsistencyReport {
        h,
        max_abs_h,
        normalization,
        max_normalized,
        tol,
        consistent: max_normalized <= tol,
    })
}

/// Residuals of the balance laws on a static profile. The mass balance is
/// identically satisfied for a time-independent density with zero velocity
/// and is reported as exact zero; the momentum residual is the largest
/// finite-difference defect of `-dphi/dy = rho g`, normalized per unit
/// `rho g`.
#[derive(Clone, Copy, Debug)]
pub struct BalanceReport {
    pub mass_residual: f64,
    pub momentum_residual: f64,
    /// Finite-difference step actually used.
    pub fd_step: f64,
}

/// Verifies the balance laws on a profile with central differences. When
/// `fd_step` is given it is rounded to the nearest whole number of grid
/// cells; by default adjacent points are used.
pub fn verify_balances(
    sol: &HydrostaticSolution,
    fd_step: Option<f64>,
) -> Result<BalanceReport, HydroError> {
    let n = sol.grid().len();
    if n < 5 {
        return Err(HydroError::TooCoarse {
            reason: format!("need at least 5 points, got {n}"),
        });
    }
    let spacing = sol.grid().spacing();
    let stride = match fd_step {
        Some(step) => {
            if !(step.is_finite() && step > 0.0) {
                return Err(HydroError::TooCoarse {
                    reason: format!("fd_step must be positive, got {step}"),
                });
            }
            ((step / spacing).round() as usize).max(1)
        }
        None => 1,
    };
    if 2 * stride + 1 > n {
        return Err(HydroError::TooCoarse {
            reason: format!("stride {stride} leaves no interior points on {n}-point grid"),
        });
    }
    let y = sol.grid().points();
    let phi = sol.phi();
    let rho = sol.density();
    let grav = sol.grid().gravity();
    let mut momentum_residual = 0.0_f64;
    for i in stride..(n - stride) {
        let dphi_dy = (phi[i + stride] - phi[i - stride]) / (y[i + stride] - y[i - stride]);
        // momentum balance along the vertical axis: -dphi/dy - rho*g = 0
        let defect = (-dphi_dy - rho[i] * grav).abs();
        momentum_residual = momentum_residual.max(defect / (rho[i] * grav));
    }
    Ok(BalanceReport {
        mass_residual: 0.0,
        momentum_residual,
        fd_step: stride as f64 * spacing,
    })
}

/// Writes a profile as CSV with the mandatory header `y,rho,phi,h_residual`.
/// Numbers carry 17 significant digits so values round-trip exactly.
///
/// # Panics
///
/// Panics when `h` does not match the grid length.
#[allow(clippy::needless_range_loop)] // four parallel columns
pub fn write_profile_csv<W: io::Write>(
    mut w: W,
    sol: &HydrostaticSolution,
    h: &[f64],
) -> io::Result<()> {
    assert_eq!(h.len(), sol.grid().len(), "h_residual column length mismatch");
    writeln!(w, "y,rho,phi,h_residual")?;
    for i in 0..sol.grid().len() {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            sol.grid().points()[i],
            sol.density()[i],
            sol.phi()[i],
            h[i]
        )?;
    }
    Ok(())
}
