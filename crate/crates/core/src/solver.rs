//! Root finding for implicit relations and quadrature for hydrostatic
//! profiles.
//!
//! Implicit relations generally cannot be solved for the stress in closed
//! form, so the stress at a given `(rho, g)` is found numerically: a damped
//! Newton iteration on the six symmetric components with a finite-difference
//! Jacobian, plus a dedicated scalar solver for the spherical branch
//! `T = -phi*I` where the relation collapses to `h(rho, phi) = 0`.

use serde::Serialize;
use thiserror::Error;

use crate::constitutive::{ConstitutiveError, ConstitutiveRelation};
use crate::tensor3::{SymTensor3, Vec3};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver settings: {0}")]
    InvalidSettings(String),
    #[error("integration bounds must satisfy y <= y_top, got y = {y}, y_top = {y_top}")]
    BadBounds { y: f64, y_top: f64 },
    #[error("panel count must be an even number >= 2, got {n}")]
    BadPanelCount { n: usize },
    #[error("non-finite density sample at y = {y}")]
    NonFiniteSample { y: f64 },
    #[error(transparent)]
    Constitutive(#[from] ConstitutiveError),
}

/// Tolerances and iteration limits for the Newton solvers. The Jacobian is
/// approximated by central differences with relative step `fd_step`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct NewtonSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: u32,
    pub fd_step: f64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_iter: 100,
            fd_step: 1e-7,
        }
    }
}

impl NewtonSettings {
    fn validate(&self) -> Result<(), SolverError> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(SolverError::InvalidSettings(
                "tolerances must be positive".into(),
            ));
        }
        if self.max_iter < 1 {
            return Err(SolverError::InvalidSettings("max_iter must be >= 1".into()));
        }
        if !(self.fd_step > 0.0 && self.fd_step.is_finite()) {
            return Err(SolverError::InvalidSettings("fd_step must be positive".into()));
        }
        Ok(())
    }

    fn tolerance_at(&self, solution_norm: f64) -> f64 {
        self.abs_tol + self.rel_tol * solution_norm
    }
}

/// Outcome of a root solve. When `converged` holds, `residual_norm` is below
/// `abs_tol + rel_tol * |solution|`.
#[derive(Clone, Debug, Serialize)]
pub struct RootReport<S> {
    pub solution: S,
    pub iterations: u32,
    pub residual_norm: f64,
    pub converged: bool,
    pub branch: String,
}

/// Result of the scalar spherical solve.
#[derive(Clone, Debug)]
pub enum SphericalRoots {
    /// The consistency condition vanishes at every probe value: the relation
    /// places no constraint on the spherical scalar.
    Degenerate,
    /// Real roots found in the scan interval (possibly none), ordered by
    /// magnitude.
    Roots(Vec<RootReport<f64>>),
}

impl SphericalRoots {
    pub fn roots(&self) -> &[RootReport<f64>] {
        match self {
            SphericalRoots::Degenerate => &[],
            SphericalRoots::Roots(r) => r,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self, SphericalRoots::Degenerate)
    }
}

/// Number of probe points in the bracketing scan.
const SCAN_PROBES: usize = 1024;

/// Step-halving budget for the damped Newton line search.
const MAX_HALVINGS: u32 = 30;

/// Offsets (in units of the problem scale) probed when testing whether the
/// spherical condition vanishes identically. Spread on both sides of zero
/// and irregularly spaced so constructed root patterns cannot mimic
/// degeneracy.
const DEGENERACY_PROBES: [f64; 8] = [0.0, 0.31, -0.47, 1.07, -1.61, 2.9, -3.7, 5.3];

/// Solves `residual(rho, g, T) = 0` for the stress by damped Newton from
/// `t0`. Non-convergence (including a singular Jacobian or a stalled line
/// search) is reported through the `converged` flag, not as an error;
/// errors are reserved for invalid inputs and coefficient evaluation
/// failures at the initial state.
pub fn solve_stress(
    rel: &ConstitutiveRelation,
    rho: f64,
    g: Vec3,
    t0: SymTensor3,
    settings: &NewtonSettings,
) -> Result<RootReport<SymTensor3>, SolverError> {
    settings.validate()?;
    let residual = |x: &[f64; 6]| -> Result<[f64; 6], SolverError> {
        let r = rel.residual_general(rho, g, SymTensor3::from_array(*x))?;
        Ok(r.as_array())
    };

    let mut x = t0.as_array();
    let mut f = residual(&x)?;
    let mut fnorm = inf_norm(&f);
    let mut iterations = 0;

    let report = |x: [f64; 6], iterations: u32, fnorm: f64, converged: bool| RootReport {
        solution: SymTensor3::from_array(x),
        iterations,
        residual_norm: fnorm,
        converged,
        branch: "newton".to_string(),
    };

    for _ in 0..settings.max_iter {
        if fnorm <= settings.tolerance_at(inf_norm(&x)) {
            return Ok(report(x, iterations, fnorm, true));
        }
        let jac = match fd_jacobian(&residual, &x, settings.fd_step) {
            Ok(j) => j,
            // evaluation failure while probing the neighborhood: treat as
            // non-convergence rather than a hard error
            Err(_) => return Ok(report(x, iterations, fnorm, false)),
        };
        let rhs = f.map(|v| -v);
        let Some(step) = solve6(jac, rhs) else {
            return Ok(report(x, iterations, fnorm, false));
        };

        // damped update: halve the step until the residual decreases
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let mut trial = [0.0; 6];
            for i in 0..6 {
                trial[i] = x[i] + lambda * step[i];
            }
            if let Ok(ft) = residual(&trial) {
                let ftnorm = inf_norm(&ft);
                if ftnorm < fnorm {
                    accepted = Some((trial, ft, ftnorm));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((xn, fn_, fnn)) = accepted else {
            return Ok(report(x, iterations, fnorm, false));
        };
        x = xn;
        f = fn_;
        fnorm = fnn;
        iterations += 1;
    }

    let converged = fnorm <= settings.tolerance_at(inf_norm(&x));
    Ok(report(x, iterations, fnorm, converged))
}

/// Finds real roots of the spherical consistency condition
/// `h(rho, phi) = a1 - a2*phi + a4*phi²` by Newton from `phi0` plus a
/// bracketing scan over `[0, 10*max(1, p_estimate)]`, where `p_estimate`
/// is the explicit pressure when the relation has one and `|phi0|`
/// otherwise. If `h` vanishes at all probe values the condition is
/// declared degenerate instead of returning a root list.
pub fn solve_spherical(
    rel: &ConstitutiveRelation,
    rho: f64,
    phi0: f64,
    settings: &NewtonSettings,
) -> Result<SphericalRoots, SolverError> {
    settings.validate()?;
    let h = |phi: f64| rel.spherical_residual(rho, phi);

    let p_estimate = match rel.euler_pressure(rho) {
        Some(p) => p?.abs(),
        None => phi0.abs(),
    };
    let scale = p_estimate.max(1.0).max(phi0.abs());

    if is_degenerate(rel, rho, scale, settings.abs_tol) {
        return Ok(SphericalRoots::Degenerate);
    }

    let hi = 10.0 * p_estimate.max(1.0);
    let mut roots: Vec<f64> = Vec::new();

    // Newton start from the caller's guess; may land outside the scan range.
    if let Some(root) = scalar_newton(&h, phi0, settings) {
        push_root(&mut roots, root, &h);
    }

    // bracketing scan over [0, hi]
    let mut prev: Option<(f64, f64)> = None;
    for j in 0..=SCAN_PROBES {
        let phi = hi * (j as f64) / (SCAN_PROBES as f64);
        let Ok(value) = h(phi) else {
            prev = None;
            continue;
        };
        if value == 0.0 {
            push_root(&mut roots, phi, &h);
            prev = Some((phi, value));
            continue;
        }
        if let Some((phi_prev, value_prev)) = prev {
            if value_prev * value < 0.0 {
                if let Some(root) = bisect(&h, phi_prev, phi, settings) {
                    push_root(&mut roots, root, &h);
                    // a Newton polish may land closer still; the merge keeps
                    // whichever has the smaller residual
                    if let Some(polished) = scalar_newton(&h, root, settings) {
                        push_root(&mut roots, polished, &h);
                    }
                }
            }
        }
        prev = Some((phi, value));
    }

    roots.sort_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap());
    let reports = roots
        .into_iter()
        .enumerate()
        .map(|(idx, phi)| {
            let residual_norm = h(phi).map(f64::abs).unwrap_or(f64::NAN);
            RootReport {
                solution: phi,
                iterations: 0,
                residual_norm,
                converged: residual_norm <= settings.tolerance_at(phi.abs()),
                branch: format!("branch-{idx}"),
            }
        })
        .collect();
    Ok(SphericalRoots::Roots(reports))
}

/// Selects the default branch among spherical roots: the one closest to the
/// explicit Euler pressure when available, otherwise the smallest magnitude.
pub fn physical_branch(
    roots: &[RootReport<f64>],
    euler_pressure: Option<f64>,
) -> Option<&RootReport<f64>> {
    match euler_pressure {
        Some(p) => roots.iter().min_by(|a, b| {
            (a.solution - p)
                .abs()
                .partial_cmp(&(b.solution - p).abs())
                .unwrap()
        }),
        // roots are ordered by |phi|
        None => roots.first(),
    }
}

fn is_degenerate(rel: &ConstitutiveRelation, rho: f64, scale: f64, abs_tol: f64) -> bool {
    for offset in DEGENERACY_PROBES {
        let phi = offset * scale;
        let Ok((a1, a2, a4)) = rel.spherical_coefficients(rho, phi) else {
            return false;
        };
        let h = a1 - a2 * phi + a4 * phi * phi;
        // compare against the magnitude of the participating terms so exact
        // cancellation at large scales still registers as zero
        let term_scale = 1.0 + a1.abs() + (a2 * phi).abs() + (a4 * phi * phi).abs();
        if h.abs() > abs_tol * term_scale {
            return false;
        }
    }
    true
}

/// Records a root, merging near-duplicates and keeping whichever copy has
/// the smaller residual.
fn push_root<H>(roots: &mut Vec<f64>, root: f64, h: &H)
where
    H: Fn(f64) -> Result<f64, ConstitutiveError>,
{
    let residual = |phi: f64| h(phi).map(f64::abs).unwrap_or(f64::INFINITY);
    for existing in roots.iter_mut() {
        if (*existing - root).abs() <= 1e-8 * (1.0 + root.abs()) {
            if residual(root) < residual(*existing) {
                *existing = root;
            }
            return;
        }
    }
    roots.push(root);
}

/// Damped Newton in one variable. Iterates until the residual stops
/// improving (machine-limited near a simple root), then accepts only if the
/// final residual is within tolerance.
fn scalar_newton<H>(h: &H, start: f64, settings: &NewtonSettings) -> Option<f64>
where
    H: Fn(f64) -> Result<f64, ConstitutiveError>,
{
    let mut x = start;
    let mut fx = h(x).ok()?;
    for _ in 0..settings.max_iter {
        if fx == 0.0 {
            return Some(x);
        }
        let step = settings.fd_step * x.abs().max(1.0);
        let fp = h(x + step).ok()?;
        let fm = h(x - step).ok()?;
        let derivative = (fp - fm) / (2.0 * step);
        if derivative == 0.0 || !derivative.is_finite() {
            break;
        }
        let full_step = -fx / derivative;
        if full_step.abs() <= f64::EPSILON * x.abs().max(1.0) {
            break;
        }
        let mut lambda = 1.0;
        let mut advanced = false;
        for _ in 0..=MAX_HALVINGS {
            let trial = x + lambda * full_step;
            if let Ok(ft) = h(trial) {
                if ft.abs() < fx.abs() {
                    x = trial;
                    fx = ft;
                    advanced = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !advanced {
            break;
        }
    }
    (fx.abs() <= settings.tolerance_at(x.abs())).then_some(x)
}

fn bisect<H>(h: &H, mut lo: f64, mut hi: f64, settings: &NewtonSettings) -> Option<f64>
where
    H: Fn(f64) -> Result<f64, ConstitutiveError>,
{
    let mut flo = h(lo).ok()?;
    let fhi = h(hi).ok()?;
    if flo * fhi > 0.0 {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 0.25 * settings.abs_tol.max(1e-15 * mid.abs().max(1.0)) {
            return Some(mid);
        }
        let fmid = h(mid).ok()?;
        if fmid == 0.0 {
            return Some(mid);
        }
        if flo * fmid < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fmid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Hydrostatic stress scalar at depth `y`: integrates `grav * density(s)`
/// from `y` up to `y_top` with composite Simpson quadrature (`n_panels`
/// even) and adds the surface value `phi_top`. Fourth-order accurate in the
/// panel width for smooth densities.
pub fn integrate_profile<F>(
    density: F,
    grav: f64,
    y: f64,
    y_top: f64,
    phi_top: f64,
    n_panels: usize,
) -> Result<f64, SolverError>
where
    F: Fn(f64) -> f64,
{
    if y > y_top {
        return Err(SolverError::BadBounds { y, y_top });
    }
    if n_panels < 2 || !n_panels.is_multiple_of(2) {
        return Err(SolverError::BadPanelCount { n: n_panels });
    }
    if y == y_top {
        return Ok(phi_top);
    }
    let sample = |s: f64| -> Result<f64, SolverError> {
        let value = density(s);
        if value.is_finite() {
            Ok(grav * value)
        } else {
            Err(SolverError::NonFiniteSample { y: s })
        }
    };
    let h = (y_top - y) / (n_panels as f64);
    let mut sum = sample(y)? + sample(y_top)?;
    for j in 1..n_panels {
        let s = y + h * (j as f64);
        let weight = if j % 2 == 1 { 4.0 } else { 2.0 };
        sum += weight * sample(s)?;
    }
    Ok(phi_top + sum * h / 3.0)
}

fn inf_norm(v: &[f64; 6]) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

fn fd_jacobian<F>(
    residual: &F,
    x: &[f64; 6],
    fd_step: f64,
) -> Result<[[f64; 6]; 6], SolverError>
where
    F: Fn(&[f64; 6]) -> Result<[f64; 6], SolverError>,
{
    let mut jac = [[0.0; 6]; 6];
    for col in 0..6 {
        let step = fd_step * x[col].abs().max(1.0);
        let mut xp = *x;
        let mut xm = *x;
        xp[col] += step;
        xm[col] -= step;
        let fp = residual(&xp)?;
        let fm = residual(&xm)?;
        for row in 0..6 {
            jac[row][col] = (fp[row] - fm[row]) / (2.0 * step);
        }
    }
    Ok(jac)
}

/// Gaussian elimination with partial pivoting on the 6x6 Newton system.
/// Returns `None` when the matrix is numerically singular.
#[allow(clippy::needless_range_loop)]
fn solve6(mut a: [[f64; 6]; 6], mut b: [f64; 6]) -> Option<[f64; 6]> {
    const N: usize = 6;
    for col in 0..N {
        let mut pivot_row = col;
        let mut pivot_mag = a[col][col].abs();
        for row in (col + 1)..N {
            if a[row][col].abs() > pivot_mag {
                pivot_mag = a[row][col].abs();
                pivot_row = row;
            }
        }
        if pivot_mag < 1e-300 || !pivot_mag.is_finite() {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in (col + 1)..N {
            let factor = a[row][col] / a[col][col];
            for k in col..N {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = [0.0; 6];
    for row in (0..N).rev() {
        let mut sum = b[row];
        for k in (row + 1)..N {
            sum -= a[row][k] * x[k];
        }
        x[row] = sum / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::CoefficientSet;
    use crate::exprdsl::Expr;

    fn expr(src: &str) -> Expr {
        Expr::parse(src).unwrap()
    }

    fn constant_quadratic(a1: f64, a2: f64, a4: f64) -> ConstitutiveRelation {
        ConstitutiveRelation::implicit_euler(
            Some(Expr::number(a1)),
            Some(Expr::number(a2)),
            Some(Expr::number(a4)),
        )
        .unwrap()
    }

    #[test]
    fn solve_stress_ideal_gas() {
        let rel = ConstitutiveRelation::ideal_gas(1.0).unwrap();
        let report = solve_stress(
            &rel,
            2.0,
            Vec3::ZERO,
            SymTensor3::ZERO,
            &NewtonSettings::default(),
        )
        .unwrap();
        assert!(report.converged);
        let expected = SymTensor3::scaled_identity(-2.0);
        assert!((report.solution - expected).norm_inf() <= 1e-10);
    }

    #[test]
    fn solve_stress_degenerate_spherical_family() {
        // a1 = phi*rho, a2 = rho: every spherical stress satisfies the
        // relation, so the initial spherical guess is already a root
        let rel = ConstitutiveRelation::implicit_euler(
            Some(expr("phi*rho")),
            Some(expr("rho")),
            None,
        )
        .unwrap();
        let report = solve_stress(
            &rel,
            1.0,
            Vec3::ZERO,
            SymTensor3::scaled_identity(-0.5),
            &NewtonSettings::default(),
        )
        .unwrap();
        assert!(report.converged);
        assert!(report.residual_norm <= 1e-12);
        assert!(report.solution.xy.abs() <= 1e-12);
        assert!(report.solution.xz.abs() <= 1e-12);
        assert!(report.solution.yz.abs() <= 1e-12);
    }

    #[test]
    fn solve_stress_inconsistent_relation_fails_to_converge() {
        // residual = I for every stress: no root exists
        let rel = ConstitutiveRelation::general_implicit(CoefficientSet::new([
            Some(Expr::number(1.0)),
            None,
            None,
            None,
            None,
            None,
        ]))
        .unwrap();
        let report = solve_stress(
            &rel,
            1.0,
            Vec3::ZERO,
            SymTensor3::ZERO,
            &NewtonSettings::default(),
        )
        .unwrap();
        assert!(!report.converged);
    }

    #[test]
    fn solve_spherical_ideal_gas_single_root() {
        let rel = ConstitutiveRelation::ideal_gas(2.0).unwrap();
        let roots = solve_spherical(&rel, 3.0, 0.0, &NewtonSettings::default()).unwrap();
        let roots = roots.roots();
        assert_eq!(roots.len(), 1);
        assert!((roots[0].solution - 6.0).abs() <= 1e-10);
        assert!(roots[0].converged);
    }

    #[test]
    fn solve_spherical_quadratic_two_roots() {
        // h(phi) = 2 - 3*phi + phi^2 = (phi-1)(phi-2)
        let rel = constant_quadratic(2.0, 3.0, 1.0);
        let roots = solve_spherical(&rel, 1.0, 1.0, &NewtonSettings::default()).unwrap();
        let roots = roots.roots();
        assert_eq!(roots.len(), 2);
        assert!((roots[0].solution - 1.0).abs() <= 1e-10);
        assert!((roots[1].solution - 2.0).abs() <= 1e-10);
        assert_eq!(roots[0].branch, "branch-0");
        assert_eq!(roots[1].branch, "branch-1");
    }

    #[test]
    fn solve_spherical_flags_identically_zero_condition() {
        // h = phi^2*rho - (phi*rho)*phi = 0 for every phi
        let rel = ConstitutiveRelation::implicit_euler(
            Some(expr("phi^2*rho")),
            Some(expr("phi*rho")),
            None,
        )
        .unwrap();
        let result = solve_spherical(&rel, 1.0, 1.0, &NewtonSettings::default()).unwrap();
        assert!(result.is_degenerate());
    }

    #[test]
    fn solve_spherical_empty_when_no_root_in_range() {
        // h = 1 + phi^2 has no real roots
        let rel = constant_quadratic(1.0, 0.0, 1.0);
        let result = solve_spherical(&rel, 1.0, 1.0, &NewtonSettings::default()).unwrap();
        assert!(!result.is_degenerate());
        assert!(result.roots().is_empty());
    }

    #[test]
    fn spherical_roots_match_bisection_oracle() {
        // randomized quadratics with prescribed well-separated roots
        use rand::Rng;
        use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let settings = NewtonSettings::default();
        for _ in 0..20 {
            let r1: f64 = rng.gen_range(0.05..4.0);
            let mut r2: f64 = rng.gen_range(0.05..4.0);
            if (r1 - r2).abs() < 0.1 {
                r2 += 0.5;
            }
            let c: f64 = rng.gen_range(0.5..2.0);
            // c*phi^2 - c*(r1+r2)*phi + c*r1*r2, matching h = a1 - a2 phi + a4 phi^2
            let rel = constant_quadratic(c * r1 * r2, c * (r1 + r2), c);
            let roots = solve_spherical(&rel, 1.0, 1.0, &settings).unwrap();
            let got: Vec<f64> = roots
                .roots()
                .iter()
                .map(|r| r.solution)
                .filter(|phi| (0.0..=10.0).contains(phi))
                .collect();
            let mut expected = [r1.min(r2), r1.max(r2)];
            expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert_eq!(got.len(), 2, "roots {got:?} vs {expected:?}");
            for (g, e) in got.iter().zip(expected.iter()) {
                assert!((g - e).abs() <= 1e-10, "{g} vs {e}");
            }
        }
    }

    #[test]
    fn tensor_and_scalar_solvers_agree() {
        let rel = constant_quadratic(2.0, 3.0, 1.0);
        let settings = NewtonSettings::default();
        let scalar = solve_spherical(&rel, 1.0, 1.0, &settings).unwrap();
        let tensor = solve_stress(
            &rel,
            1.0,
            Vec3::ZERO,
            SymTensor3::scaled_identity(-0.9),
            &settings,
        )
        .unwrap();
        assert!(tensor.converged);
        let phi_tensor = -tensor.solution.xx;
        let closest = scalar
            .roots()
            .iter()
            .map(|r| (r.solution - phi_tensor).abs())
            .fold(f64::INFINITY, f64::min);
        assert!(closest <= 1e-8, "tensor root {phi_tensor} off by {closest}");
    }

    #[test]
    fn physical_branch_selection() {
        let rel = constant_quadratic(2.0, 3.0, 1.0);
        let roots = solve_spherical(&rel, 1.0, 1.0, &NewtonSettings::default()).unwrap();
        let roots = roots.roots();
        let near_euler = physical_branch(roots, Some(2.2)).unwrap();
        assert!((near_euler.solution - 2.0).abs() <= 1e-9);
        let smallest = physical_branch(roots, None).unwrap();
        assert!((smallest.solution - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn newton_converges_quadratically() {
        // reconstruct the iterate sequence by capping max_iter
        let rel = constant_quadratic(2.0, 3.0, 1.0);
        let target = 1.0;
        let mut errors = Vec::new();
        for cap in 1..=6 {
            let settings = NewtonSettings {
                abs_tol: 1e-300,
                rel_tol: 1e-300,
                max_iter: cap,
                ..NewtonSettings::default()
            };
            let report = solve_stress(
                &rel,
                1.0,
                Vec3::ZERO,
                SymTensor3::scaled_identity(-0.4),
                &settings,
            )
            .unwrap();
            errors.push((-report.solution.xx - target).abs());
        }
        // ratios e_{n+1}/e_n^2 stay bounded once the iteration enters the
        // quadratic regime
        for window in errors.windows(2) {
            let (e0, e1) = (window[0], window[1]);
            if e0 > 1e-13 && e1 > 1e-15 {
                assert!(e1 <= 10.0 * e0 * e0 + 1e-12, "e0 = {e0:.3e}, e1 = {e1:.3e}");
            }
        }
        // the ideal-gas (affine) residual converges in a single step
        let ideal = ConstitutiveRelation::ideal_gas(1.0).unwrap();
        let report = solve_stress(
            &ideal,
            2.0,
            Vec3::ZERO,
            SymTensor3::ZERO,
            &NewtonSettings::default(),
        )
        .unwrap();
        assert!(report.iterations <= 2);
    }

    #[test]
    fn quadrature_constant_density() {
        // phi = -g*rho0*y for constant density and zero surface value
        let phi = integrate_profile(|_| 1.0, 9.81, -2.0, 0.0, 0.0, 16).unwrap();
        assert!((phi - 19.62).abs() <= 1e-12);
    }

    #[test]
    fn quadrature_exponential_closed_form() {
        let phi = integrate_profile(|s: f64| (-s).exp(), 1.0, -1.0, 0.0, 1.0, 1024).unwrap();
        assert!((phi - std::f64::consts::E).abs() <= 1e-10);
    }

    #[test]
    fn quadrature_fourth_order_convergence() {
        let exact = std::f64::consts::E;
        let err = |n: usize| {
            (integrate_profile(|s: f64| (-s).exp(), 1.0, -1.0, 0.0, 1.0, n).unwrap() - exact)
                .abs()
        };
        // doubling the panel count must reduce the error by 2^3.9 or better
        let ratio = err(256) / err(512);
        assert!(
            (14.9..40.0).contains(&ratio),
            "expected ~16x error reduction, got {ratio}"
        );
    }

    #[test]
    fn quadrature_input_validation() {
        assert!(matches!(
            integrate_profile(|_| 1.0, 1.0, 0.0, -1.0, 0.0, 8),
            Err(SolverError::BadBounds { .. })
        ));
        assert!(matches!(
            integrate_profile(|_| 1.0, 1.0, -1.0, 0.0, 0.0, 3),
            Err(SolverError::BadPanelCount { n: 3 })
        ));
        assert!(matches!(
            integrate_profile(|s| if s < -0.5 { f64::NAN } else { 1.0 }, 1.0, -1.0, 0.0, 0.0, 8),
            Err(SolverError::NonFiniteSample { .. })
        ));
        // degenerate interval returns the surface value
        assert_eq!(integrate_profile(|_| 1.0, 1.0, 0.0, 0.0, 7.5, 8).unwrap(), 7.5);
    }

    #[test]
    fn settings_validation() {
        let bad = NewtonSettings { abs_tol: 0.0, ..NewtonSettings::default() };
        assert!(matches!(
            solve_spherical(
                &ConstitutiveRelation::ideal_gas(1.0).unwrap(),
                1.0,
                0.0,
                &bad
            ),
            Err(SolverError::InvalidSettings(_))
        ));
    }
}
