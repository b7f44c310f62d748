//! Command-line driver: exponent evaluation, barrier certification, the
//! Monge-Ampère solver and boundary-exponent fits, wired through one TOML
//! config per run.
//!
//! Exit codes: 0 pass, 1 verification failure, 2 usage/config error.

mod config;

use clap::{Parser, Subcommand};
use std::io::Write;

use config::RunConfig;
use maholder::geometry::{classify_boundary_point, interior_cert_with_eta, CertKind, Point2};
use maholder::masolver::{
    boundary_exponent, power_rhs, residual, solve_dirichlet_ma, BoundaryData, GridField,
    SolveConfig,
};
use maholder::operators::concave_envelope;
use maholder::params::{admissible_b_interval, mu_exponent, MuBranch, Side};
use maholder::verifier::{
    affine_sphere, eigen_oracle_check, BarrierVerifier, GridSpec, ScalarField2,
};
use maholder::Error;

#[derive(Parser)]
#[command(name = "maholder", version, about = "Barrier toolkit for boundary Hölder estimates of fully nonlinear elliptic Dirichlet problems")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print μ(a), its branch, the admissible b-interval and b₀
    Exponent {
        #[arg(long)]
        config: String,
    },
    /// Certify the barrier as a sub- or supersolution by grid scan
    CheckBarrier {
        #[arg(long)]
        config: String,
        /// "sub" or "sup"
        #[arg(long)]
        side: String,
        /// Write the verification report CSV here
        #[arg(long)]
        out: Option<String>,
    },
    /// Solve det D²u = f with Dirichlet data on a lattice
    Solve {
        #[arg(long)]
        config: String,
        /// Write the solution field CSV here
        #[arg(long)]
        out: Option<String>,
        /// Write the compact binary field dump here
        #[arg(long)]
        dump: Option<String>,
    },
    /// Fit the boundary growth exponent at a boundary point
    FitExponent {
        #[arg(long)]
        config: String,
        /// Boundary point "x,y"
        #[arg(long)]
        point: String,
        /// Fit window "min,max,count" of radii along the inward normal
        #[arg(long)]
        window: String,
        /// Binary field dump to fit; the exact worked-example solution when absent
        #[arg(long)]
        field: Option<String>,
    },
    /// Run the full worked-example pipeline (hyperbolic affine sphere)
    ExampleAffineSphere {
        #[arg(long, default_value_t = 2)]
        n: u32,
        /// Analytic subset only (skip the grid solver)
        #[arg(long)]
        skip_solver: bool,
        /// Optional config override for grids and solver resolution
        #[arg(long)]
        config: Option<String>,
    },
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidParams(_)
        | Error::Io(_)
        | Error::InsufficientSamples { .. }
        | Error::KOutOfRange { .. }
        | Error::DegenerateDenominator(_)
        | Error::SignConditionViolated(_)
        | Error::NotOnBoundary(_)
        | Error::RangeMismatch { .. }
        | Error::OutsideV
        | Error::ZeroDenominator
        | Error::BoundaryPoint
        | Error::NonPositiveXn(_)
        | Error::RegimeMismatch(_) => 2,
        _ => 1,
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    };
    std::process::exit(code);
}

fn dispatch(cli: Cli) -> Result<i32, Error> {
    match cli.cmd {
        Cmd::Exponent { config } => cmd_exponent(&RunConfig::from_path(&config)?),
        Cmd::CheckBarrier { config, side, out } => {
            let side = match side.as_str() {
                "sub" => Side::Subsolution,
                "sup" => Side::Supersolution,
                other => {
                    return Err(Error::InvalidParams(format!("side must be sub or sup, got {other}")))
                }
            };
            cmd_check_barrier(&RunConfig::from_path(&config)?, side, out.as_deref())
        }
        Cmd::Solve { config, out, dump } => {
            cmd_solve(&RunConfig::from_path(&config)?, out.as_deref(), dump.as_deref())
        }
        Cmd::FitExponent { config, point, window, field } => cmd_fit_exponent(
            &RunConfig::from_path(&config)?,
            &point,
            &window,
            field.as_deref(),
        ),
        Cmd::ExampleAffineSphere { n, skip_solver, config } => {
            let cfg = match config {
                Some(path) => Some(RunConfig::from_path(&path)?),
                None => None,
            };
            cmd_example_affine_sphere(n, skip_solver, cfg.as_ref())
        }
    }
}

fn cmd_exponent(cfg: &RunConfig) -> Result<i32, Error> {
    let p = cfg.structure_params()?;
    let a = cfg.barrier.a;
    let res = mu_exponent(a, &p)?;
    let branch = match res.branch {
        MuBranch::Formula => "formula",
        MuBranch::SaturatedOne => "saturated_one",
    };
    if res.branch == MuBranch::Formula {
        let sub = admissible_b_interval(a, &p, Side::Subsolution)?;
        let hi = sub.hi.map_or("inf".to_string(), |v| format!("{v}"));
        println!("mu={} branch={} b0={} b_sub=[{}, {}] b_sup=(0, {}]", res.mu, branch, sub.b0, sub.lo, hi, sub.b0);
    } else {
        println!("mu={} branch={}", res.mu, branch);
    }
    Ok(0)
}

/// Loads the lid/solution data for the supersolution ordering check.
enum SolutionSource {
    Exact,
    Field(GridField),
}

impl ScalarField2 for SolutionSource {
    fn at(&self, p: Point2) -> Option<f64> {
        match self {
            SolutionSource::Exact => Some(affine_sphere::exact_solution(p)),
            SolutionSource::Field(f) => f.eval(p),
        }
    }
}

fn cmd_check_barrier(cfg: &RunConfig, side: Side, out: Option<&str>) -> Result<i32, Error> {
    let p = cfg.structure_params()?;
    let dom = cfg.build_domain()?;
    let a = cfg.barrier.a;
    let point = cfg.run.point;
    let grid = GridSpec::new(cfg.run.grid_nr, cfg.run.grid_nxn);
    let b = match cfg.barrier.b {
        Some(b) => b,
        None => admissible_b_interval(a, &p, side)?.b0,
    };

    let (report, _xi) = match side {
        Side::Subsolution => {
            let cert = match cfg.run.eta_interior {
                Some(eta) => interior_cert_with_eta(&dom, point, a, eta)?,
                None => classify_boundary_point(&dom, point, CertKind::Interior, a)?,
            };
            let eta_ext = match cfg.run.eta_ext {
                Some(eta) => eta,
                None => classify_boundary_point(&dom, point, CertKind::Exterior, a)?.eta,
            };
            let verifier = BarrierVerifier::new(&p, &dom, &cert)?;
            let (xi, rep) = verifier.search_xi_subsolution(eta_ext, b, cfg.barrier.delta, grid)?;
            (rep, xi)
        }
        Side::Supersolution => {
            let cert = interior_cert_with_eta(&dom, point, a, cfg.run.eta_sup)?;
            let verifier = BarrierVerifier::new(&p, &dom, &cert)?;
            let phi = cfg.boundary_fn(&dom)?;
            let samples: Vec<(Point2, f64)> =
                dom.boundary_samples(1024).into_iter().map(|q| (q, phi(q))).collect();
            let phi_star = concave_envelope(&samples, &dom)?;
            let u = match cfg.run.u_source.as_str() {
                "exact" => SolutionSource::Exact,
                path => {
                    let mut f = std::fs::File::open(path).map_err(|e| {
                        Error::InvalidParams(format!("cannot open field dump {path}: {e}"))
                    })?;
                    SolutionSource::Field(GridField::read_binary(&mut f)?)
                }
            };
            let (xi, rep) = verifier.certify_supersolution(b, &u, &phi_star, grid)?;
            (rep, xi)
        }
    };

    match out {
        Some(path) => std::fs::write(path, report.to_csv())?,
        None => print!("{}", report.to_csv()),
    }
    eprintln!("{}", report.render_text());
    Ok(if report.pass { 0 } else { 1 })
}

fn cmd_solve(cfg: &RunConfig, out: Option<&str>, dump: Option<&str>) -> Result<i32, Error> {
    let dom = cfg.build_domain()?;
    let phi = cfg.boundary_fn(&dom)?;
    let bc = BoundaryData::Func(phi.as_ref());
    let p = cfg.structure_params()?;
    let s = &cfg.solver;
    let f: Box<dyn Fn(Point2, f64, Point2) -> f64> = match s.rhs.as_str() {
        "power" => Box::new(power_rhs(p.amp, p.alpha, s.eps_u)),
        "one" => Box::new(|_x: Point2, _z: f64, _q: Point2| 1.0),
        "zero" => Box::new(|_x: Point2, _z: f64, _q: Point2| 0.0),
        other => return Err(Error::InvalidParams(format!("unknown rhs {other:?}"))),
    };

    let mut hs = vec![s.h];
    if s.cascade {
        let mut h = s.h;
        while h < dom.diam() / 12.0 {
            h *= 2.0;
            hs.push(h);
        }
        hs.reverse();
    }
    let mut warm: Option<GridField> = None;
    let mut field = None;
    for &h in &hs {
        let level = SolveConfig {
            h,
            directions: s.directions,
            eps_u: s.eps_u,
            damping: s.damping,
            max_iters: s.max_iters,
            tol: if h == s.h { s.tol } else { s.tol.max(1e-7) },
            seed: cfg.run.seed,
        };
        let sol = solve_dirichlet_ma(&dom, f.as_ref(), &bc, &level, warm.as_ref())?;
        warm = Some(sol.clone());
        field = Some((sol, level));
    }
    let (field, level) = field.ok_or(Error::EmptyRegion)?;
    let res = residual(&field, f.as_ref(), &level)?;
    println!(
        "h={} nodes={} residual={res:.6e}",
        level.h,
        field.interior_indices().len()
    );
    if let Some(path) = out {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        field.write_csv(&mut w)?;
        w.flush()?;
    }
    if let Some(path) = dump {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        field.write_binary(&mut w)?;
        w.flush()?;
    }
    Ok(0)
}

fn parse_pair(s: &str, what: &str) -> Result<[f64; 2], Error> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(Error::InvalidParams(format!("{what} must be \"x,y\", got {s:?}")));
    }
    let x = parts[0]
        .parse::<f64>()
        .map_err(|_| Error::InvalidParams(format!("bad number in {what}: {s:?}")))?;
    let y = parts[1]
        .parse::<f64>()
        .map_err(|_| Error::InvalidParams(format!("bad number in {what}: {s:?}")))?;
    Ok([x, y])
}

fn cmd_fit_exponent(
    cfg: &RunConfig,
    point: &str,
    window: &str,
    field_path: Option<&str>,
) -> Result<i32, Error> {
    let p = cfg.structure_params()?;
    let dom = cfg.build_domain()?;
    let pt = parse_pair(point, "--point")?;
    let parts: Vec<&str> = window.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::InvalidParams("--window must be \"min,max,count\"".into()));
    }
    let lo: f64 = parts[0].parse().map_err(|_| Error::InvalidParams("bad window min".into()))?;
    let hi: f64 = parts[1].parse().map_err(|_| Error::InvalidParams("bad window max".into()))?;
    let count: usize = parts[2].parse().map_err(|_| Error::InvalidParams("bad window count".into()))?;
    if !(lo > 0.0 && hi > lo && count >= 3) {
        return Err(Error::InvalidParams("window needs 0 < min < max and count >= 3".into()));
    }
    let radii: Vec<f64> =
        (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect();

    let source = match field_path {
        Some(path) => {
            let mut f = std::fs::File::open(path)
                .map_err(|e| Error::InvalidParams(format!("cannot open field dump {path}: {e}")))?;
            SolutionSource::Field(GridField::read_binary(&mut f)?)
        }
        None => SolutionSource::Exact,
    };
    let inward = dom.inward_normal(pt)?;
    let phi = cfg.boundary_fn(&dom)?;
    let u_p = phi(pt);
    let mu_target = mu_exponent(cfg.barrier.a, &p)?.mu;
    let fit = match &source {
        SolutionSource::Field(f) => {
            boundary_exponent(f, pt, u_p, inward, &radii, mu_target, 8, cfg.run.seed)?
        }
        SolutionSource::Exact => maholder::verifier::sandwich_fit(
            &source, pt, u_p, inward, &radii, mu_target, 8, cfg.run.seed,
        )?,
    };
    println!(
        "mu_normal={:.6} mu_lower={:.6} mu_upper={:.6} m_hat={:.6e} M_hat={:.6e} samples={}",
        fit.mu_normal, fit.mu_lower, fit.mu_upper, fit.prefactor_min, fit.prefactor_max, fit.samples
    );
    Ok(0)
}

fn cmd_example_affine_sphere(
    n: u32,
    skip_solver: bool,
    cfg: Option<&RunConfig>,
) -> Result<i32, Error> {
    let mut all_pass = true;
    let mut check = |name: &str, ok: bool, detail: String| {
        all_pass &= ok;
        println!("[{}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    };

    let p = affine_sphere::structure_params(n);
    let res = mu_exponent(2.0, &p)?;
    let iv = admissible_b_interval(2.0, &p, Side::Subsolution)?;
    check(
        "exponent",
        res.mu == 0.5 && iv.b0 == 2.0,
        format!("mu={} (want 1/2), b0={} (want 2)", res.mu, iv.b0),
    );

    let oracle = eigen_oracle_check(1000, 2..=6, 42)?;
    check(
        "eigenvalue lemma oracle",
        oracle.max_abs_err < 1e-10 && oracle.bounds_ok,
        format!("{} states, max |err| = {:.3e}", oracle.states, oracle.max_abs_err),
    );

    let mut worst = 0.0f64;
    let mut rng_state = 88172645463325252u64;
    let mut next = || {
        // xorshift64 keeps this dependency-free and deterministic.
        rng_state ^= rng_state << 13;
        rng_state ^= rng_state >> 7;
        rng_state ^= rng_state << 17;
        (rng_state >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..10_000 {
        let ang = std::f64::consts::TAU * next();
        let rad = 0.5 * next().sqrt().max(1e-3);
        let r = (rad * ang.cos()).abs().max(1e-9);
        let x_n = 0.5 + rad * ang.sin();
        worst = worst.max(affine_sphere::identity_defect(r, x_n, n)?.abs());
    }
    check("exact-solution identity", worst < 1e-10, format!("max |det·|U|^(n+2) − 1| = {worst:.3e}"));

    if n == 2 {
        let dom = affine_sphere::domain();
        let (nr, nxn) = cfg.map_or((120, 120), |c| (c.run.grid_nr, c.run.grid_nxn));
        let grid = GridSpec::new(nr, nxn);
        let cert = classify_boundary_point(&dom, [0.0, 0.0], CertKind::Interior, 2.0)?;
        let verifier = BarrierVerifier::new(&p, &dom, &cert)?;
        match verifier.search_xi_subsolution(1.0, 2.0, 0.1, grid) {
            Ok((xi, rep)) => check(
                "subsolution certification",
                rep.pass,
                format!("xi={xi:.3e}, min H = {:.6} on V'", rep.h_min),
            ),
            Err(e) => check("subsolution certification", false, format!("{e}")),
        }

        let eta_sup = cfg.map_or(16.0, |c| c.run.eta_sup);
        let cert_sup = interior_cert_with_eta(&dom, [0.0, 0.0], 2.0, eta_sup)?;
        let verifier_sup = BarrierVerifier::new(&p, &dom, &cert_sup)?;
        let samples: Vec<(Point2, f64)> = dom
            .boundary_samples(1024)
            .into_iter()
            .map(|q| (q, affine_sphere::boundary_phi(q)))
            .collect();
        let phi_star = concave_envelope(&samples, &dom)?;
        let u = SolutionSource::Exact;
        match verifier_sup.certify_supersolution(2.0, &u, &phi_star, grid) {
            Ok((xi, rep)) => check(
                "supersolution certification",
                rep.pass,
                format!(
                    "xi={xi:.3e}, max H = {:.6} on V, boundary margin {:.3e}",
                    rep.h_max,
                    rep.boundary_ordering_margin.unwrap_or(f64::NAN)
                ),
            ),
            Err(e) => check("supersolution certification", false, format!("{e}")),
        }

        if !skip_solver {
            let h = cfg.map_or(1.0 / 64.0, |c| c.solver.h);
            let scfg = SolveConfig { h, tol: 1e-7, max_iters: 120, ..Default::default() };
            let f = power_rhs(1.0, 4.0, scfg.eps_u);
            let phi = affine_sphere::boundary_phi;
            let mut warm: Option<GridField> = None;
            let mut hh = h * 4.0;
            while hh > h {
                let lvl = SolveConfig { h: hh, tol: 1e-6, max_iters: 80, ..scfg };
                warm = Some(solve_dirichlet_ma(&dom, &f, &BoundaryData::Func(&phi), &lvl, warm.as_ref())?);
                hh /= 2.0;
            }
            match solve_dirichlet_ma(&dom, &f, &BoundaryData::Func(&phi), &scfg, warm.as_ref()) {
                Ok(field) => {
                    let res = residual(&field, &f, &scfg)?;
                    check("solver convergence", res < 1e-6, format!("h={h}, residual {res:.3e}"));
                    let radii: Vec<f64> =
                        (1..=24).map(|i| 0.02 + 0.28 * i as f64 / 24.0).collect();
                    match boundary_exponent(&field, [0.0, 0.0], 0.0, [0.0, 1.0], &radii, 0.5, 0, 42)
                    {
                        Ok(fit) => check(
                            "boundary exponent fit",
                            (fit.mu_normal - 0.5).abs() <= 0.05,
                            format!("mu_normal = {:.4} (target 1/2)", fit.mu_normal),
                        ),
                        Err(e) => check("boundary exponent fit", false, format!("{e}")),
                    }
                }
                Err(e) => check("solver convergence", false, format!("{e}")),
            }
        } else {
            println!("[SKIP] solver (requested via --skip-solver)");
        }
    } else {
        println!("[SKIP] grid certification and solver (analytic-only run for n = {n})");
    }

    println!("overall: {}", if all_pass { "ALL PASS" } else { "FAILURES PRESENT" });
    Ok(if all_pass { 0 } else { 1 })
}
