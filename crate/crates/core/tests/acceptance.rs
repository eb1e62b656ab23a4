//! Acceptance suite: one test per criterion, each printing a pass line.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the
//! per-criterion lines.

use std::time::Instant;

use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

use implicit_fluids::constitutive::{
    isotropy_check, isotropy_check_fn, korteweg_stress, CoefficientSet, ConstitutiveRelation,
    KortewegParams,
};
use implicit_fluids::culling::{
    cull, generate_observation, CandidateSet, Observation, ObservationData, StressSample,
};
use implicit_fluids::exprdsl::{BinOp, EvalContext, Expr, Func, Var};
use implicit_fluids::hydrostatics::{
    ideal_gas_profile, phi_from_density, verify_balances, HalfSpaceGrid,
};
use implicit_fluids::solver::{solve_spherical, solve_stress, NewtonSettings};
use implicit_fluids::tensor3::{outer, SymTensor3, Vec3};

fn expr(src: &str) -> Expr {
    Expr::parse(src).unwrap()
}

fn free_linear() -> ConstitutiveRelation {
    ConstitutiveRelation::implicit_euler(Some(expr("phi*rho")), Some(expr("rho")), None).unwrap()
}

fn free_quadratic() -> ConstitutiveRelation {
    ConstitutiveRelation::implicit_euler(Some(expr("phi^2*rho")), Some(expr("phi*rho")), None)
        .unwrap()
}

#[test]
fn criterion_1_ideal_gas_hydrostatics() {
    let start = Instant::now();
    let grid = HalfSpaceGrid::new(-10.0, 2001, 1.0).unwrap();
    let (k, c) = (1.0, 1.0);
    let rate = grid.gravity() / c;
    let sol = phi_from_density(|y: f64| k * (-rate * y).exp(), k * c, &grid, 2).unwrap();
    let mut max_rel = 0.0_f64;
    for (&y, &phi) in grid.points().iter().zip(sol.phi().iter()) {
        let exact = k * c * (-rate * y).exp();
        max_rel = max_rel.max((phi - exact).abs() / exact);
    }
    let elapsed = start.elapsed();
    assert!(max_rel <= 1e-8, "max relative error {max_rel:.3e}");
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!(
        "criterion 1 (ideal-gas hydrostatics): PASS — max rel error {max_rel:.3e} in {elapsed:?}"
    );
}

#[test]
fn criterion_2_balance_verification() {
    let grid = HalfSpaceGrid::new(-10.0, 2001, 1.0).unwrap();
    let sol = phi_from_density(|y: f64| (-y).exp(), 1.0, &grid, 2).unwrap();
    let coarse = verify_balances(&sol, None).unwrap();
    assert_eq!(coarse.mass_residual, 0.0);
    assert!(
        coarse.momentum_residual <= 1e-5,
        "momentum residual {:.3e}",
        coarse.momentum_residual
    );

    let fine_grid = HalfSpaceGrid::new(-10.0, 4001, 1.0).unwrap();
    let fine_sol = phi_from_density(|y: f64| (-y).exp(), 1.0, &fine_grid, 2).unwrap();
    let fine = verify_balances(&fine_sol, None).unwrap();
    let ratio = coarse.momentum_residual / fine.momentum_residual;
    assert!(
        (3.5..=4.5).contains(&ratio),
        "halving the spacing gave ratio {ratio:.3}"
    );
    println!(
        "criterion 2 (balance verification): PASS — residual {:.3e}, refinement ratio {ratio:.2}",
        coarse.momentum_residual
    );
}

#[test]
fn criterion_3_isotropy_equivariance() {
    let families: Vec<(&str, ConstitutiveRelation)> = vec![
        ("ideal-gas", ConstitutiveRelation::ideal_gas(1.3).unwrap()),
        (
            "classical-euler",
            ConstitutiveRelation::classical_euler(expr("2*rho+0.1*rho^2")).unwrap(),
        ),
        (
            "implicit-euler",
            ConstitutiveRelation::implicit_euler(
                Some(expr("rho*(1+0.1*i2)")),
                Some(expr("1+0.05*i1")),
                Some(expr("0.02*rho")),
            )
            .unwrap(),
        ),
        (
            "stress-linear",
            ConstitutiveRelation::stress_linear(
                Some(expr("rho+0.1*i5+0.03*i1*i4")),
                Some(expr("1+0.1*i4")),
                Some(expr("0.2*rho+0.05*i1")),
                Some(expr("0.01*rho*i4")),
            )
            .unwrap(),
        ),
        (
            "general-implicit",
            ConstitutiveRelation::general_implicit(CoefficientSet::new([
                Some(expr("rho*(1+0.1*i2)")),
                Some(expr("1+0.05*i1")),
                Some(expr("0.2*rho+0.01*i5")),
                Some(expr("0.02*rho")),
                Some(expr("0.03+0.01*i4")),
                Some(expr("0.005*i6")),
            ]))
            .unwrap(),
        ),
    ];
    let mut worst = 0.0_f64;
    for (name, rel) in &families {
        let err = isotropy_check(rel, 1000, 2024).unwrap();
        assert!(err <= 1e-10, "{name}: equivariance error {err:.3e}");
        worst = worst.max(err);
    }
    // a deliberately anisotropic response must be flagged
    let base = ConstitutiveRelation::ideal_gas(1.0).unwrap();
    let e1 = Vec3::new(1.0, 0.0, 0.0);
    let defect = isotropy_check_fn(
        |rho, g, t| Ok(base.residual_general(rho, g, t)? + outer(e1, e1)),
        1000,
        2024,
    )
    .unwrap();
    assert!(defect > 0.1, "anisotropic fixture not detected: {defect:.3e}");
    println!(
        "criterion 3 (isotropy equivariance): PASS — worst family error {worst:.3e}, \
         anisotropic defect {defect:.3}"
    );
}

#[test]
fn criterion_4_infinite_family_reproduction() {
    let start = Instant::now();
    let c = 1.0;
    let candidates = CandidateSet::new(vec![
        ("ideal-c".into(), ConstitutiveRelation::ideal_gas(c).unwrap()),
        ("ideal-2c".into(), ConstitutiveRelation::ideal_gas(2.0 * c).unwrap()),
        ("free-linear".into(), free_linear()),
        ("free-quadratic".into(), free_quadratic()),
    ])
    .unwrap();
    let grid = HalfSpaceGrid::new(-5.0, 1001, 1.0).unwrap();
    let observation = Observation {
        name: "ideal-gas-profile".into(),
        data: ObservationData::Profile(ideal_gas_profile(1.0, c, &grid).unwrap()),
        tolerance: None,
    };
    let report = cull(&candidates, &[observation], 1e-8).unwrap();
    let elapsed = start.elapsed();
    assert_eq!(report.survivors, vec!["ideal-c", "free-linear", "free-quadratic"]);
    for (row, expected) in report.cells.iter().zip([
        implicit_fluids::culling::Verdict::Consistent,
        implicit_fluids::culling::Verdict::Inconsistent,
        implicit_fluids::culling::Verdict::Degenerate,
        implicit_fluids::culling::Verdict::Degenerate,
    ]) {
        assert_eq!(row[0].verdict, expected);
    }
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!(
        "criterion 4 (infinite-family reproduction): PASS — survivors {:?} in {elapsed:?}",
        report.survivors
    );
}

#[test]
fn criterion_5_solver_oracle_equivalence() {
    let settings = NewtonSettings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut max_root_dev = 0.0_f64;
    let mut max_tensor_dev = 0.0_f64;
    for trial in 0..100 {
        let r1: f64 = rng.gen_range(0.05..4.5);
        let mut r2: f64 = rng.gen_range(0.05..4.5);
        if (r1 - r2).abs() < 0.1 {
            r2 = (r2 + 0.6).min(4.5 + 0.6);
        }
        let scale: f64 = rng.gen_range(0.5..2.0);
        // h(phi) = scale*(phi - r1)*(phi - r2) expressed through the moduli
        let rel = ConstitutiveRelation::implicit_euler(
            Some(Expr::number(scale * r1 * r2)),
            Some(Expr::number(scale * (r1 + r2))),
            Some(Expr::number(scale)),
        )
        .unwrap();

        let solved = solve_spherical(&rel, 1.0, 1.0, &settings).unwrap();
        let mut newton_roots: Vec<f64> = solved
            .roots()
            .iter()
            .map(|r| r.solution)
            .filter(|phi| (0.0..=10.0).contains(phi))
            .collect();
        newton_roots.sort_by(|a, b| a.partial_cmp(b).unwrap());

        let h = |phi: f64| scale * r1 * r2 - scale * (r1 + r2) * phi + scale * phi * phi;
        let oracle_roots = bisection_oracle(h, 0.0, 10.0, 1024);
        assert_eq!(
            newton_roots.len(),
            oracle_roots.len(),
            "trial {trial}: {newton_roots:?} vs oracle {oracle_roots:?}"
        );
        for (a, b) in newton_roots.iter().zip(oracle_roots.iter()) {
            let dev = (a - b).abs();
            max_root_dev = max_root_dev.max(dev);
            assert!(dev <= 1e-10, "trial {trial}: root {a} vs oracle {b}");
        }

        // tensor Newton from a spherical guess lands on a scalar branch
        if trial % 5 == 0 {
            let guess = SymTensor3::scaled_identity(-(r1.min(r2) * 0.9 + 0.01));
            let report = solve_stress(&rel, 1.0, Vec3::ZERO, guess, &settings).unwrap();
            assert!(report.converged, "trial {trial}: tensor solve did not converge");
            let phi_tensor = -report.solution.xx;
            let dev = newton_roots
                .iter()
                .map(|r| (r - phi_tensor).abs())
                .fold(f64::INFINITY, f64::min);
            max_tensor_dev = max_tensor_dev.max(dev);
            assert!(dev <= 1e-8, "trial {trial}: tensor root {phi_tensor} off by {dev:.3e}");
        }
    }
    println!(
        "criterion 5 (solver oracle equivalence): PASS — max root deviation {max_root_dev:.3e}, \
         max tensor-scalar deviation {max_tensor_dev:.3e}"
    );
}

/// Plain scan-and-bisect root finder, independent of the library solvers.
fn bisection_oracle<H: Fn(f64) -> f64>(h: H, lo: f64, hi: f64, probes: usize) -> Vec<f64> {
    let mut roots = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for j in 0..=probes {
        let x = lo + (hi - lo) * (j as f64) / (probes as f64);
        let value = h(x);
        if value == 0.0 {
            roots.push(x);
            prev = Some((x, value));
            continue;
        }
        if let Some((xp, vp)) = prev {
            if vp * value < 0.0 {
                let (mut a, mut b, mut fa) = (xp, x, vp);
                for _ in 0..200 {
                    let mid = 0.5 * (a + b);
                    if b - a <= 1e-14 {
                        break;
                    }
                    let fm = h(mid);
                    if fm == 0.0 {
                        a = mid;
                        b = mid;
                        break;
                    }
                    if fa * fm < 0.0 {
                        b = mid;
                    } else {
                        a = mid;
                        fa = fm;
                    }
                }
                roots.push(0.5 * (a + b));
            }
        }
        prev = Some((x, value));
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-9);
    roots
}

#[test]
fn criterion_6_culling_monotonicity() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for campaign in 0..50u64 {
        let c_true: f64 = rng.gen_range(0.4..2.5);
        let mut entries = vec![
            ("true".to_string(), ConstitutiveRelation::ideal_gas(c_true).unwrap()),
            (
                "off".to_string(),
                ConstitutiveRelation::ideal_gas(c_true * rng.gen_range(1.2..3.0)).unwrap(),
            ),
            ("free-linear".to_string(), free_linear()),
            ("free-quadratic".to_string(), free_quadratic()),
        ];
        if campaign % 2 == 0 {
            entries.push((
                "near-euler".to_string(),
                ConstitutiveRelation::classical_euler(expr("rho + 1e-12*rho^5")).unwrap(),
            ));
        }
        let candidates = CandidateSet::new(entries).unwrap();
        let rel_true = ConstitutiveRelation::ideal_gas(c_true).unwrap();
        let grid = HalfSpaceGrid::new(rng.gen_range(-4.0..-0.5), 101, rng.gen_range(0.5..2.0))
            .unwrap();

        let n_obs = rng.gen_range(2..=4);
        let mut observations: Vec<Observation> = Vec::new();
        let mut previous: Option<Vec<String>> = None;
        for k in 0..n_obs {
            let mut obs = if k == n_obs - 1 && campaign % 3 == 0 {
                // finish with a high-density sample observation
                let samples: Vec<StressSample> = (0..4)
                    .map(|_| {
                        let rho = rng.gen_range(10.0..500.0);
                        StressSample {
                            rho,
                            grad: Vec3::ZERO,
                            stress: SymTensor3::scaled_identity(-(c_true * rho)),
                        }
                    })
                    .collect();
                Observation {
                    name: String::new(),
                    data: ObservationData::Samples(samples),
                    tolerance: None,
                }
            } else {
                let noise = if k > 0 && rng.gen_bool(0.3) { 1e-3 } else { 0.0 };
                generate_observation(
                    &rel_true,
                    &grid,
                    rng.gen_range(0.5..3.0),
                    noise,
                    campaign * 100 + k as u64,
                )
                .unwrap()
            };
            obs.name = format!("obs-{k}");
            observations.push(obs);

            let report = cull(&candidates, &observations, 1e-6).unwrap();
            if let Some(prev) = &previous {
                for survivor in &report.survivors {
                    assert!(
                        prev.contains(survivor),
                        "campaign {campaign}, observation {k}: survivor set grew \
                         ({prev:?} -> {:?})",
                        report.survivors
                    );
                }
            }
            previous = Some(report.survivors);
        }
    }
    println!("criterion 6 (culling monotonicity): PASS — 50 randomized campaigns");
}

#[test]
fn criterion_7_dsl_correctness() {
    let ctx = EvalContext::new(1.7, [-0.9, 2.3, -1.1, 0.6, 0.2, 0.8]);
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut evaluated = 0usize;
    for trial in 0..1000 {
        let ast = random_expr(&mut rng, 4);

        // structural round trip through the minimal printing
        let printed = ast.to_string();
        let reparsed = Expr::parse(&printed)
            .unwrap_or_else(|e| panic!("trial {trial}: reparse of `{printed}` failed: {e}"));
        assert_eq!(reparsed, ast, "trial {trial}: `{printed}` repeats differently");

        // the fully parenthesized form parses to the same tree
        let full = fully_parenthesized(&ast);
        let reparsed_full = Expr::parse(&full).unwrap();
        assert_eq!(reparsed_full, ast, "trial {trial}: `{full}`");

        // when evaluation succeeds it matches the raw reference walk bitwise
        if let Ok(value) = reparsed.eval(&ctx) {
            let reference = reference_eval(&ast, &ctx);
            assert_eq!(
                value.to_bits(),
                reference.to_bits(),
                "trial {trial}: `{printed}` -> {value} vs reference {reference}"
            );
            evaluated += 1;
        }
    }
    assert!(evaluated >= 300, "only {evaluated}/1000 expressions evaluated cleanly");
    println!(
        "criterion 7 (DSL correctness): PASS — 1000 round trips, {evaluated} exact \
         evaluation matches"
    );
}

fn random_expr(rng: &mut ChaCha8Rng, depth: u32) -> Expr {
    if depth == 0 || rng.gen_bool(0.35) {
        return if rng.gen_bool(0.5) {
            // two-decimal literals keep printed forms short
            let value = (rng.gen_range(0.01..10.0f64) * 100.0).round() / 100.0;
            Expr::number(value)
        } else {
            let vars = Var::ALL;
            Expr::variable(vars[rng.gen_range(0..vars.len())])
        };
    }
    match rng.gen_range(0..10) {
        0..=5 => {
            let op = match rng.gen_range(0..9) {
                0 | 1 => BinOp::Add,
                2 | 3 => BinOp::Sub,
                4 | 5 => BinOp::Mul,
                6 | 7 => BinOp::Div,
                _ => BinOp::Pow,
            };
            Expr::Binary {
                op,
                lhs: Box::new(random_expr(rng, depth - 1)),
                rhs: Box::new(random_expr(rng, depth - 1)),
            }
        }
        6 => Expr::Neg(Box::new(random_expr(rng, depth - 1))),
        _ => {
            let func = match rng.gen_range(0..4) {
                0 => Func::Exp,
                1 => Func::Log,
                2 => Func::Abs,
                _ => Func::Sqrt,
            };
            Expr::Call { func, arg: Box::new(random_expr(rng, depth - 1)) }
        }
    }
}

/// Prints with parentheses around every compound node.
fn fully_parenthesized(e: &Expr) -> String {
    match e {
        Expr::Number(x) => format!("{x}"),
        Expr::Variable(v) => v.name().to_string(),
        Expr::Neg(inner) => format!("(-{})", fully_parenthesized(inner)),
        Expr::Binary { op, lhs, rhs } => format!(
            "({}{}{})",
            fully_parenthesized(lhs),
            op.symbol(),
            fully_parenthesized(rhs)
        ),
        Expr::Call { func, arg } => format!("{}({})", func.name(), fully_parenthesized(arg)),
    }
}

/// Raw IEEE walk over the tree with no domain checking; the reference for
/// the production evaluator whenever the latter succeeds.
fn reference_eval(e: &Expr, ctx: &EvalContext) -> f64 {
    match e {
        Expr::Number(x) => *x,
        Expr::Variable(v) => match v {
            Var::Rho => ctx.rho,
            Var::I1 => ctx.i1,
            Var::I2 => ctx.i2,
            Var::I3 => ctx.i3,
            Var::I4 => ctx.i4,
            Var::I5 => ctx.i5,
            Var::I6 => ctx.i6,
            Var::Phi => ctx.phi,
        },
        Expr::Neg(inner) => -reference_eval(inner, ctx),
        Expr::Binary { op, lhs, rhs } => {
            let a = reference_eval(lhs, ctx);
            let b = reference_eval(rhs, ctx);
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => a / b,
                BinOp::Pow => a.powf(b),
            }
        }
        Expr::Call { func, arg } => {
            let x = reference_eval(arg, ctx);
            match func {
                Func::Exp => x.exp(),
                Func::Log => x.ln(),
                Func::Abs => x.abs(),
                Func::Sqrt => x.sqrt(),
            }
        }
    }
}

#[test]
fn criterion_8_korteweg_evaluator() {
    // no flow and no gradients: exactly alpha0(rho) * I
    let params = KortewegParams::new(expr("-rho"), 0.0, 0.0, 0.0, 0.0, 0.0, 0.0).unwrap();
    let t = korteweg_stress(&params, 3.0, Vec3::ZERO, SymTensor3::ZERO, SymTensor3::ZERO)
        .unwrap();
    assert_eq!(t, SymTensor3::scaled_identity(-3.0));

    struct Fixture {
        name: &'static str,
        alpha0: &'static str,
        consts: [f64; 6], // a1, a2, a3, a4, lambda, mu
        rho: f64,
        g: Vec3,
        hess: SymTensor3,
        dv: SymTensor3,
    }
    let fixtures = [
        Fixture {
            name: "gradient-squared and dyad",
            alpha0: "0",
            consts: [0.0, 1.0, 2.0, 0.0, 0.0, 0.0],
            rho: 1.0,
            g: Vec3::new(1.0, 0.0, 0.0),
            hess: SymTensor3::ZERO,
            dv: SymTensor3::ZERO,
        },
        Fixture {
            name: "viscous terms",
            alpha0: "0",
            consts: [0.0, 0.0, 0.0, 0.0, 1.0, 1.0],
            rho: 1.0,
            g: Vec3::ZERO,
            hess: SymTensor3::ZERO,
            dv: SymTensor3::IDENTITY,
        },
        Fixture {
            name: "hessian trace and tensor",
            alpha0: "0",
            consts: [2.0, 0.0, 0.0, 0.5, 0.0, 0.0],
            rho: 1.0,
            g: Vec3::ZERO,
            hess: SymTensor3::new(1.0, 2.0, 3.0, 0.0, 0.0, 0.0),
            dv: SymTensor3::ZERO,
        },
        Fixture {
            name: "density-dependent base pressure",
            alpha0: "rho^2-2*rho",
            consts: [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            rho: 3.0,
            g: Vec3::ZERO,
            hess: SymTensor3::ZERO,
            dv: SymTensor3::ZERO,
        },
        Fixture {
            name: "all terms combined",
            alpha0: "rho^2",
            consts: [0.5, 3.0, 2.0, 1.0, 0.5, 0.25],
            rho: 2.0,
            g: Vec3::new(0.5, -0.5, 1.0),
            hess: SymTensor3::new(1.0, 0.0, -1.0, 0.5, 0.0, 0.25),
            dv: SymTensor3::new(0.2, 0.2, 0.2, 0.1, 0.0, 0.0),
        },
    ];
    for f in &fixtures {
        let [a1, a2, a3, a4, lambda, mu] = f.consts;
        let params = KortewegParams::new(expr(f.alpha0), a1, a2, a3, a4, lambda, mu).unwrap();
        let got = korteweg_stress(&params, f.rho, f.g, f.hess, f.dv).unwrap();

        // independent term-by-term evaluation on dense components
        let a0 = expr(f.alpha0)
            .eval(&EvalContext::new(f.rho, [0.0; 6]))
            .unwrap();
        let g = [f.g.x, f.g.y, f.g.z];
        let hess = f.hess.to_matrix().0;
        let dv = f.dv.to_matrix().0;
        let g_sq = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
        let tr_hess = hess[0][0] + hess[1][1] + hess[2][2];
        let tr_dv = dv[0][0] + dv[1][1] + dv[2][2];
        let got_m = got.to_matrix().0;
        for i in 0..3 {
            for j in 0..3 {
                let kron = if i == j { 1.0 } else { 0.0 };
                let expected = (a0 + a1 * tr_hess + a2 * g_sq) * kron
                    + a3 * g[i] * g[j]
                    + a4 * hess[i][j]
                    + lambda * tr_dv * kron
                    + 2.0 * mu * dv[i][j];
                let tol = 1e-14 * expected.abs().max(1.0);
                assert!(
                    (got_m[i][j] - expected).abs() <= tol,
                    "{}: component ({i},{j}) {} vs {}",
                    f.name,
                    got_m[i][j],
                    expected
                );
            }
        }
    }
    println!("criterion 8 (gradient-stress evaluator): PASS — no-flow case exact, 5 fixtures match");
}
