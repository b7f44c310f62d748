//! End-to-end barrier verification: choosing (b, ξ, δ), certifying H̃ ≥ 1 on
//! V′ (subsolution) and H̃ ≤ 1 on V (supersolution) by grid scans with a 2x
//! refinement re-check, fitting boundary exponents and prefactors from
//! solution fields, and the dense-eigensolver oracle for the eigenvalue lemma.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::barrier::{barrier_value, eval_barrier, hessian_eigenvalues, BarrierParams};
use crate::constants::{
    estimate_rho, table1_constants, table2_constants, xi_exponent, xn_exponent, ConstantSet,
    RegionVGeometry,
};
use crate::error::{Error, Result};
use crate::geometry::{BoundaryTypeCert, CertKind, ConvexDomain, Point2};
use crate::operators::{h_tilde, BoundaryEnvelope, EnvelopeKind, PowerOperator, RhsBound, RhsKind};
use crate::params::{admissible_b_interval, mu_exponent, Side, StructureParams};
use crate::smalleig::{jacobi_eigenvalues, SymMatrix};

/// Anything that yields scalar samples over the plane (analytic callbacks,
/// grid fields). `None` marks points outside the sampled support.
pub trait ScalarField2 {
    fn at(&self, p: Point2) -> Option<f64>;
}

impl<F: Fn(Point2) -> f64> ScalarField2 for F {
    fn at(&self, p: Point2) -> Option<f64> {
        Some(self(p))
    }
}

/// Tensor scan resolution in (r, xₙ).
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub nr: usize,
    pub nxn: usize,
}

impl GridSpec {
    pub fn new(nr: usize, nxn: usize) -> Self {
        Self { nr, nxn }
    }

    fn refined(&self) -> Self {
        Self { nr: self.nr * 2, nxn: self.nxn * 2 }
    }
}

#[derive(Debug, Clone, Copy)]
struct ScanResult {
    min: f64,
    max: f64,
    points: usize,
}

/// Certification record for one barrier side.
#[derive(Debug, Clone)]
pub struct VerificationReport {
    pub side: Side,
    pub a: f64,
    pub b: f64,
    pub xi: f64,
    pub delta: f64,
    pub eta: f64,
    pub eps: f64,
    pub h_min: f64,
    pub h_max: f64,
    /// min H̃ − 1 on the subsolution side, 1 − max H̃ on the supersolution side.
    pub margin: f64,
    pub grid: (usize, usize),
    pub h_min_refined: f64,
    pub h_max_refined: f64,
    pub boundary_ordering_margin: Option<f64>,
    pub pass: bool,
    pub constants: Option<ConstantSet>,
    pub fit: Option<SandwichFit>,
    pub notes: Vec<String>,
}

impl VerificationReport {
    /// Key/value CSV with the constant table appended.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("key,value\n");
        let side = match self.side {
            Side::Subsolution => "subsolution",
            Side::Supersolution => "supersolution",
        };
        s.push_str(&format!("side,{side}\n"));
        for (k, v) in [
            ("a", self.a),
            ("b", self.b),
            ("xi", self.xi),
            ("delta", self.delta),
            ("eta", self.eta),
            ("eps", self.eps),
            ("h_min", self.h_min),
            ("h_max", self.h_max),
            ("margin", self.margin),
            ("h_min_refined", self.h_min_refined),
            ("h_max_refined", self.h_max_refined),
            ("boundary_ordering_margin", self.boundary_ordering_margin.unwrap_or(f64::NAN)),
        ] {
            s.push_str(&format!("{k},{v:.17e}\n"));
        }
        s.push_str(&format!("grid_nr,{}\n", self.grid.0));
        s.push_str(&format!("grid_nxn,{}\n", self.grid.1));
        s.push_str(&format!("pass,{}\n", self.pass));
        if let Some(fit) = &self.fit {
            s.push_str(&format!("fit_mu_normal,{:.17e}\n", fit.mu_normal));
            s.push_str(&format!("fit_mu_lower,{:.17e}\n", fit.mu_lower));
            s.push_str(&format!("fit_mu_upper,{:.17e}\n", fit.mu_upper));
            s.push_str(&format!("fit_prefactor_min,{:.17e}\n", fit.prefactor_min));
            s.push_str(&format!("fit_prefactor_max,{:.17e}\n", fit.prefactor_max));
        }
        if let Some(cs) = &self.constants {
            for e in &cs.entries {
                s.push_str(&format!("const_{},{:.17e}\n", e.symbol, e.value));
            }
        }
        s
    }

    pub fn render_text(&self) -> String {
        let side = match self.side {
            Side::Subsolution => "subsolution (want min H >= 1 on V')",
            Side::Supersolution => "supersolution (want max H <= 1 on V)",
        };
        let mut s = format!(
            "{}\n  a={} b={} xi={:.6e} delta={} eta={} eps={}\n  \
             H in [{:.6e}, {:.6e}], margin {:.3e}; refined H in [{:.6e}, {:.6e}]\n",
            side,
            self.a,
            self.b,
            self.xi,
            self.delta,
            self.eta,
            self.eps,
            self.h_min,
            self.h_max,
            self.margin,
            self.h_min_refined,
            self.h_max_refined,
        );
        if let Some(m) = self.boundary_ordering_margin {
            s.push_str(&format!("  boundary ordering margin {m:.3e}\n"));
        }
        for n in &self.notes {
            s.push_str(&format!("  note: {n}\n"));
        }
        s.push_str(&format!("  verdict: {}\n", if self.pass { "PASS" } else { "FAIL" }));
        s
    }
}

/// Shared context for barrier certification over one interior certificate.
pub struct BarrierVerifier<'a> {
    pub params: &'a StructureParams,
    pub dom: &'a ConvexDomain,
    pub cert: &'a BoundaryTypeCert,
}

impl<'a> BarrierVerifier<'a> {
    pub fn new(
        params: &'a StructureParams,
        dom: &'a ConvexDomain,
        cert: &'a BoundaryTypeCert,
    ) -> Result<Self> {
        if cert.kind != CertKind::Interior {
            return Err(Error::InvalidParams("certification needs an interior certificate".into()));
        }
        if dom.dim() != 2 || params.n != 2 {
            return Err(Error::InvalidParams("grid certification runs in n = 2".into()));
        }
        params.validate()?;
        Ok(Self { params, dom, cert })
    }

    fn power_op(&self) -> PowerOperator {
        PowerOperator { amp: self.params.op_amp, s: self.params.s, t: self.params.t }
    }

    fn rhs_bound(&self, side: Side) -> Result<RhsBound> {
        // The certification ratio uses the structural bound with |W| itself
        // (the envelope shift is already absorbed into W_sub = W + φ* and
        // W_sup = W + φ_*), hence the zero envelope here.
        let (kind, env_kind) = match side {
            Side::Subsolution => (RhsKind::UpperF3, EnvelopeKind::Convex),
            Side::Supersolution => (RhsKind::LowerF3Prime, EnvelopeKind::Concave),
        };
        RhsBound::new(kind, *self.params, BoundaryEnvelope::affine(env_kind, [0.0, 0.0, 0.0]))
    }

    /// min/max of H̃[W] over a tensor grid of
    /// {η|x′|^a < xₙ < (1/4)ηε^a, |x′| < (1/4)^(1/a)ε} in the cert frame.
    fn scan_h(&self, bp: &BarrierParams, rb: &RhsBound, grid: GridSpec) -> Result<ScanResult> {
        let a = self.cert.a;
        let eta = self.cert.eta;
        let eps = self.cert.eps();
        let r_max = 0.25f64.powf(1.0 / a) * eps;
        let lid = 0.25 * eta * eps.powf(a);
        let op = self.power_op();
        let mut res = ScanResult { min: f64::INFINITY, max: f64::NEG_INFINITY, points: 0 };
        for i in 0..grid.nr {
            let r = r_max * i as f64 / grid.nr as f64;
            let floor = eta * r.powf(a);
            if floor >= lid {
                continue;
            }
            for j in 1..=grid.nxn {
                let x_n = floor + (lid - floor) * j as f64 / (grid.nxn as f64 + 1.0);
                let be = eval_barrier(r, x_n, bp)?;
                let es = hessian_eigenvalues(&be, self.params.n)?;
                let world = self.cert.frame.to_world([r, x_n]);
                let dist = self.dom.distance_to_boundary(&world);
                let h = h_tilde(&es, be.w, [be.w_r, be.w_n], world, dist, rb, &op)?;
                res.min = res.min.min(h);
                res.max = res.max.max(h);
                res.points += 1;
            }
        }
        if res.points == 0 {
            return Err(Error::EmptyRegion);
        }
        Ok(res)
    }

    /// Geometric downward ξ-scan from ξ_init = min{1, η_ext·δ^(a/2)} until
    /// min H̃[W] ≥ 1 over the V′ grid, re-checked on a 2x refinement.
    pub fn search_xi_subsolution(
        &self,
        eta_ext: f64,
        b: f64,
        delta: f64,
        grid: GridSpec,
    ) -> Result<(f64, VerificationReport)> {
        let a = self.cert.a;
        let p = self.params;
        let iv = admissible_b_interval(a, p, Side::Subsolution)?;
        if xn_exponent(a, b, p) > 1e-12 {
            return Err(Error::SignConditionViolated(format!(
                "x_n exponent {} > 0: b = {b} sits below b0 = {}",
                xn_exponent(a, b, p),
                iv.b0
            )));
        }
        if xi_exponent(a, b, p) > 1e-12 {
            return Err(Error::SignConditionViolated(format!(
                "xi exponent {} > 0: b = {b} exceeds (alpha-gamma+s+t)/s",
                xi_exponent(a, b, p)
            )));
        }
        let rb = self.rhs_bound(Side::Subsolution)?;
        let mut xi = 1f64.min(eta_ext * delta.powf(a / 2.0));
        for step in 0..60 {
            let bp = BarrierParams::new(a, b, xi, delta)?;
            let scan = self.scan_h(&bp, &rb, grid)?;
            if scan.min >= 1.0 {
                let fine = self.scan_h(&bp, &rb, grid.refined())?;
                if fine.min >= 1.0 - 1e-9 {
                    let constants = table1_constants(
                        a,
                        b,
                        delta,
                        self.cert.eta,
                        self.cert.eps(),
                        self.dom.diam(),
                        p,
                    )
                    .ok();
                    let report = VerificationReport {
                        side: Side::Subsolution,
                        a,
                        b,
                        xi,
                        delta,
                        eta: self.cert.eta,
                        eps: self.cert.eps(),
                        h_min: scan.min,
                        h_max: scan.max,
                        margin: scan.min - 1.0,
                        grid: (grid.nr, grid.nxn),
                        h_min_refined: fine.min,
                        h_max_refined: fine.max,
                        boundary_ordering_margin: None,
                        pass: true,
                        constants,
                        fit: None,
                        notes: vec![format!("xi certified after {step} halvings")],
                    };
                    return Ok((xi, report));
                }
            }
            xi *= 0.5;
        }
        Err(Error::SearchExhausted(60))
    }

    /// Supersolution certification: ξ = max{(1/2)^(a/2−1)η, ξ₀}, doubled
    /// while max H̃[W] > 1 (capped at ξ ≤ η so the barrier support covers V),
    /// then the boundary ordering W + φ_* ≥ u is sampled on L and S.
    pub fn certify_supersolution(
        &self,
        b: f64,
        u: &dyn ScalarField2,
        phi_star_lower: &BoundaryEnvelope,
        grid: GridSpec,
    ) -> Result<(f64, VerificationReport)> {
        let a = self.cert.a;
        let p = self.params;
        let iv = admissible_b_interval(a, p, Side::Supersolution)?;
        if !iv.contains(b) {
            return Err(Error::SignConditionViolated(format!(
                "b = {b} outside the supersolution range (0, {}]",
                iv.b0
            )));
        }
        if phi_star_lower.kind != EnvelopeKind::Concave {
            return Err(Error::InvalidParams("supersolution needs the concave envelope".into()));
        }
        let eta = self.cert.eta;
        let eps = self.cert.eps();
        let r_max = 0.25f64.powf(1.0 / a) * eps;
        let lid = 0.25 * eta * eps.powf(a);
        let mu = mu_exponent(a, p)?.mu;

        // The construction needs u < 0 strictly on the lid L.
        let n_lid = 256;
        let mut max_lid_u = f64::NEG_INFINITY;
        let mut min_lid_phi = f64::INFINITY;
        for i in 0..=n_lid {
            let r = r_max * (2.0 * i as f64 / n_lid as f64 - 1.0);
            let world = self.cert.frame.to_world([r, lid]);
            let uv = u
                .at(world)
                .ok_or_else(|| Error::InvalidParams("solution field undefined on the lid L".into()))?;
            max_lid_u = max_lid_u.max(uv);
            min_lid_phi = min_lid_phi.min(phi_star_lower.eval(world));
        }
        if max_lid_u >= 0.0 {
            return Err(Error::LidNotNegative(max_lid_u));
        }
        let seminorm = self.holder_seminorm(phi_star_lower, mu, 42);
        // The unconstructive constant m: the largest value keeping
        // max_L u <= -m - [phi_*]_mu + min_L phi_*, with a 0.9 safety factor.
        let m_raw = -max_lid_u - seminorm + min_lid_phi;
        let m_hat = if m_raw > 0.0 { 0.9 * m_raw } else { 0.45 * (-max_lid_u) };
        let xi0 = 0.25 * eta * eps.powf(a) * (m_hat + seminorm).powf(-a * b / 2.0);
        let mut xi = (0.5f64.powf(a / 2.0 - 1.0) * eta).max(xi0);
        if xi > eta * (1.0 + 1e-12) {
            return Err(Error::NoCertificate(format!(
                "xi0 = {xi0} exceeds eta = {eta}: barrier support cannot cover V"
            )));
        }

        let rb = self.rhs_bound(Side::Supersolution)?;
        let mut last_max = f64::INFINITY;
        for step in 0..60 {
            let bp = BarrierParams::new(a, b, xi, 0.5)?;
            let scan = self.scan_h(&bp, &rb, grid)?;
            last_max = scan.max;
            if scan.max <= 1.0 {
                let fine = self.scan_h(&bp, &rb, grid.refined())?;
                if fine.max <= 1.0 + 1e-9 {
                    let ordering = self.boundary_ordering_margin(&bp, u, phi_star_lower)?;
                    if ordering < -1e-9 {
                        return Err(Error::NoCertificate(format!(
                            "boundary ordering W_sup >= u fails by {ordering:.3e} on L or S"
                        )));
                    }
                    let rho =
                        estimate_rho(&bp, &RegionVGeometry { a, eta, eps }, 64).unwrap_or(f64::NAN);
                    let constants = table2_constants(a, b, eta, eps, p, rho).ok();
                    let report = VerificationReport {
                        side: Side::Supersolution,
                        a,
                        b,
                        xi,
                        delta: 0.5,
                        eta,
                        eps,
                        h_min: scan.min,
                        h_max: scan.max,
                        margin: 1.0 - scan.max,
                        grid: (grid.nr, grid.nxn),
                        h_min_refined: fine.min,
                        h_max_refined: fine.max,
                        boundary_ordering_margin: Some(ordering),
                        pass: true,
                        constants,
                        fit: None,
                        notes: vec![
                            format!("xi fixed after {step} doublings; m estimate {m_hat:.6e}, xi0 = {xi0:.6e}"),
                            format!("rho = {rho:.6e}"),
                        ],
                    };
                    return Ok((xi, report));
                }
            }
            if xi * 2.0 > eta * (1.0 + 1e-12) {
                return Err(Error::SearchExhausted(step + 1));
            }
            xi *= 2.0;
        }
        Err(Error::NonConvergence { residual: last_max - 1.0, iters: 60 })
    }

    /// min over sampled L ∪ S of (W + φ_*) − u.
    fn boundary_ordering_margin(
        &self,
        bp: &BarrierParams,
        u: &dyn ScalarField2,
        phi_star_lower: &BoundaryEnvelope,
    ) -> Result<f64> {
        let a = self.cert.a;
        let eta = self.cert.eta;
        let eps = self.cert.eps();
        let r_max = 0.25f64.powf(1.0 / a) * eps;
        let lid = 0.25 * eta * eps.powf(a);
        let mut margin = f64::INFINITY;
        let mut seen = 0usize;
        let k = 512;
        for i in 0..=k {
            let r = r_max * (2.0 * i as f64 / k as f64 - 1.0);
            // The lid L and the lower boundary piece S.
            for x_n in [lid, eta * r.abs().powf(a)] {
                let w_sup = barrier_value(r.abs(), x_n.max(1e-300), bp);
                let world = self.cert.frame.to_world([r, x_n]);
                let uv = match u.at(world) {
                    Some(v) => v,
                    None => continue,
                };
                margin = margin.min(w_sup + phi_star_lower.eval(world) - uv);
                seen += 1;
            }
        }
        if seen < 16 {
            return Err(Error::InsufficientSamples { needed: 16, got: seen });
        }
        Ok(margin)
    }

    /// Sampled Hölder seminorm sup |φ(x)−φ(y)|/|x−y|^μ of an envelope.
    fn holder_seminorm(&self, env: &BoundaryEnvelope, mu: f64, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = self.dom.centroid();
        let diam = self.dom.diam();
        let mut sup = 0.0f64;
        let draw = |rng: &mut ChaCha8Rng| -> Point2 {
            for _ in 0..64 {
                let p = [
                    c[0] + diam * rng.gen_range(-0.6..0.6),
                    c[1] + diam * rng.gen_range(-0.6..0.6),
                ];
                if self.dom.contains(&p) {
                    return p;
                }
            }
            [c[0], c[1]]
        };
        for _ in 0..2000 {
            let x = draw(&mut rng);
            let y = draw(&mut rng);
            let d = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
            if d < 1e-9 * diam {
                continue;
            }
            sup = sup.max((env.eval(x) - env.eval(y)).abs() / d.powf(mu));
        }
        sup
    }
}

/// Boundary-exponent fit: slopes of log|u(y) − u(P)| against log dist(y, P)
/// along the inward normal and a fan of chords, plus the extremal prefactors
/// at a target exponent.
#[derive(Debug, Clone, Copy)]
pub struct SandwichFit {
    pub mu_normal: f64,
    pub mu_lower: f64,
    pub mu_upper: f64,
    /// min over samples of |u(y) − u(P)| / dist(y, P)^μ_target.
    pub prefactor_min: f64,
    pub prefactor_max: f64,
    pub samples: usize,
}

fn linfit_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    if xs.len() < 3 {
        return None;
    }
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let det = n * sxx - sx * sx;
    if det.abs() < 1e-14 {
        return None;
    }
    Some((n * sxy - sx * sy) / det)
}

/// Least-squares exponent fit around a boundary point P with value u(P).
#[allow(clippy::too_many_arguments)]
pub fn sandwich_fit(
    field: &dyn ScalarField2,
    p: Point2,
    u_p: f64,
    inward: Point2,
    radii: &[f64],
    mu_target: f64,
    n_chords: usize,
    seed: u64,
) -> Result<SandwichFit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slopes = Vec::new();
    let mut pref = (f64::INFINITY, f64::NEG_INFINITY);
    let mut total = 0usize;

    let mut fit_direction = |dir: Point2| -> Option<f64> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for &t in radii {
            let q = [p[0] + t * dir[0], p[1] + t * dir[1]];
            let v = field.at(q)?;
            let dv = (v - u_p).abs();
            if dv <= 0.0 {
                return None;
            }
            xs.push(t.ln());
            ys.push(dv.ln());
            pref.0 = pref.0.min(dv / t.powf(mu_target));
            pref.1 = pref.1.max(dv / t.powf(mu_target));
            total += 1;
        }
        linfit_slope(&xs, &ys)
    };

    let mu_normal = fit_direction(inward)
        .ok_or(Error::InsufficientSamples { needed: radii.len().max(3), got: 0 })?;
    slopes.push(mu_normal);
    for _ in 0..n_chords {
        let theta: f64 = rng.gen_range(-1.3..1.3);
        let dir = [
            inward[0] * theta.cos() - inward[1] * theta.sin(),
            inward[0] * theta.sin() + inward[1] * theta.cos(),
        ];
        if let Some(s) = fit_direction(dir) {
            slopes.push(s);
        }
    }
    if total < 5 {
        return Err(Error::InsufficientSamples { needed: 5, got: total });
    }
    let mu_lower = slopes.iter().cloned().fold(f64::INFINITY, f64::min);
    let mu_upper = slopes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(SandwichFit {
        mu_normal,
        mu_lower,
        mu_upper,
        prefactor_min: pref.0,
        prefactor_max: pref.1,
        samples: total,
    })
}

/// Outcome of the eigenvalue-lemma oracle run.
#[derive(Debug, Clone, Copy)]
pub struct EigenOracleReport {
    pub states: usize,
    pub max_abs_err: f64,
    pub bounds_ok: bool,
}

/// Draws random admissible rotationally symmetric states, assembles the full
/// n×n Hessian along a random radial direction, and compares its Jacobi
/// spectrum against the closed-form eigenvalue list.
pub fn eigen_oracle_check(
    samples: usize,
    n_range: std::ops::RangeInclusive<u32>,
    seed: u64,
) -> Result<EigenOracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_err = 0.0f64;
    let mut bounds_ok = true;
    let mut states = 0usize;
    for _ in 0..samples {
        // Admissible by construction: W_rr > 0, W_nn > 0, det > 0.
        let w_rr = 10f64.powf(rng.gen_range(-1.0..1.0));
        let w_nn = 10f64.powf(rng.gen_range(-1.0..1.0));
        let theta: f64 = rng.gen_range(-0.95..0.95);
        let w_rn = theta * (w_rr * w_nn).sqrt();
        let q = 10f64.powf(rng.gen_range(-1.3..1.3));
        let r = rng.gen_range(0.1..2.0);
        let be = crate::barrier::BarrierEval {
            r,
            x_n: 1.0,
            w: -1.0,
            w_r: q * r,
            w_n: -1.0,
            w_rr,
            w_nn,
            w_rn,
            w_r_over_r: q,
        };
        for n in n_range.clone() {
            let es = hessian_eigenvalues(&be, n)?;
            let mut lemma = es.list();
            lemma.sort_by(|a, b| a.partial_cmp(b).unwrap());

            let nn = n as usize;
            let mut m = SymMatrix::zeros(nn);
            // Random unit radial direction in the first n-1 coordinates.
            let mut u = vec![0.0f64; nn - 1];
            loop {
                let mut s = 0.0;
                for v in u.iter_mut() {
                    *v = rng.gen_range(-1.0..1.0);
                    s += *v * *v;
                }
                if s > 1e-4 {
                    let inv = s.sqrt().recip();
                    u.iter_mut().for_each(|v| *v *= inv);
                    break;
                }
            }
            for i in 0..nn - 1 {
                for j in i..nn - 1 {
                    let kron = if i == j { 1.0 } else { 0.0 };
                    m.set(i, j, q * (kron - u[i] * u[j]) + w_rr * u[i] * u[j]);
                }
                m.set(i, nn - 1, w_rn * u[i]);
            }
            m.set(nn - 1, nn - 1, w_nn);
            let dense = jacobi_eigenvalues(&m)?;
            for (l, d) in lemma.iter().zip(&dense) {
                max_err = max_err.max((l - d).abs());
            }
            bounds_ok &= crate::barrier::eigen_bound_check(&es, &be);
            states += 1;
        }
    }
    Ok(EigenOracleReport { states, max_abs_err: max_err, bounds_ok })
}

/// The built-in worked example: the hyperbolic affine sphere problem
/// det D²u = |u|^(−(n+2)) on B_(1/2)((0,…,0,1/2)) with u = −√(xₙ) on the
/// boundary, whose exact solution is U = −√(1 − r² − (xₙ−1)²).
pub mod affine_sphere {
    use super::*;

    pub fn domain() -> ConvexDomain {
        ConvexDomain::disk([0.0, 0.5], 0.5).unwrap()
    }

    /// α = n+2, β = n+1, γ = 0, s = n−1, t = 1, A = B = 1.
    pub fn structure_params(n: u32) -> StructureParams {
        StructureParams::new(1.0, n as f64 + 2.0, n as f64 + 1.0, 0.0, 1.0, n as f64 - 1.0, 1.0, n)
            .unwrap()
    }

    /// Exact solution in radial coordinates (any n ≥ 2).
    pub fn exact_radial(r: f64, x_n: f64) -> f64 {
        -(1.0 - r * r - (x_n - 1.0) * (x_n - 1.0)).max(0.0).sqrt()
    }

    /// Exact solution at a 2-D world point.
    pub fn exact_solution(x: Point2) -> f64 {
        exact_radial(x[0], x[1])
    }

    /// Boundary data φ = −√(xₙ).
    pub fn boundary_phi(x: Point2) -> f64 {
        -(x[1].max(0.0)).sqrt()
    }

    /// Derivative pack of U at (r, xₙ), r > 0.
    pub fn exact_eval(r: f64, x_n: f64) -> Result<crate::barrier::BarrierEval> {
        let u = exact_radial(r, x_n);
        if u >= 0.0 {
            return Err(Error::OutsideSupport(0.0));
        }
        let u3 = u * u * u;
        crate::barrier::BarrierEval::from_derivatives(
            r,
            x_n,
            u,
            -r / u,
            -(x_n - 1.0) / u,
            -(u * u + r * r) / u3,
            -(u * u + (x_n - 1.0) * (x_n - 1.0)) / u3,
            -r * (x_n - 1.0) / u3,
        )
    }

    /// det D²U·|U|^(n+2) − 1 through the eigenvalue lemma (zero for the
    /// exact solution).
    pub fn identity_defect(r: f64, x_n: f64, n: u32) -> Result<f64> {
        let be = exact_eval(r, x_n)?;
        let es = hessian_eigenvalues(&be, n)?;
        let det: f64 = es.list().iter().product();
        let u = exact_radial(r, x_n);
        Ok(det * u.abs().powi(n as i32 + 2) - 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{classify_boundary_point, interior_cert_with_eta};
    use approx::assert_relative_eq;

    #[test]
    fn eigen_oracle_small_run() {
        let rep = eigen_oracle_check(100, 2..=6, 7).unwrap();
        assert!(rep.max_abs_err < 1e-10, "max err {}", rep.max_abs_err);
        assert!(rep.bounds_ok);
        assert_eq!(rep.states, 500);
    }

    #[test]
    fn sandwich_fit_recovers_power_laws() {
        let radii: Vec<f64> = (1..=24).map(|i| 0.01 + 0.28 * i as f64 / 24.0).collect();
        for (pw, c) in [(0.5, 1.3), (1.0, 0.7), (0.75, 2.0)] {
            let f = move |x: Point2| -> f64 { -c * (x[0].hypot(x[1])).powf(pw) };
            let fit = sandwich_fit(&f, [0.0, 0.0], 0.0, [0.0, 1.0], &radii, pw, 8, 3).unwrap();
            assert!((fit.mu_normal - pw).abs() < 1e-3, "normal fit {}", fit.mu_normal);
            assert!((fit.mu_lower - pw).abs() < 1e-3 && (fit.mu_upper - pw).abs() < 1e-3);
            assert_relative_eq!(fit.prefactor_min, c, max_relative = 1e-9);
            assert_relative_eq!(fit.prefactor_max, c, max_relative = 1e-9);
        }
    }

    #[test]
    fn sandwich_fit_exact_solution_normal_exponent() {
        let radii: Vec<f64> = (1..=30).map(|i| 0.002 + 0.06 * i as f64 / 30.0).collect();
        let u = affine_sphere::exact_solution;
        let fit = sandwich_fit(&u, [0.0, 0.0], 0.0, [0.0, 1.0], &radii, 0.5, 12, 5).unwrap();
        assert!((fit.mu_normal - 0.5).abs() < 0.01, "mu_normal = {}", fit.mu_normal);
        // Lipschitz cone profile fits 1.0.
        let cone = |x: Point2| -> f64 { -x[0].hypot(x[1]) };
        let fit1 = sandwich_fit(&cone, [0.0, 0.0], 0.0, [0.0, 1.0], &radii, 1.0, 6, 5).unwrap();
        assert!((fit1.mu_normal - 1.0).abs() < 0.01);
    }

    #[test]
    fn subsolution_certification_on_worked_example() {
        let p = affine_sphere::structure_params(2);
        let dom = affine_sphere::domain();
        let cert = classify_boundary_point(&dom, [0.0, 0.0], CertKind::Interior, 2.0).unwrap();
        let verifier = BarrierVerifier::new(&p, &dom, &cert).unwrap();
        let (xi, rep) =
            verifier.search_xi_subsolution(1.0, 2.0, 0.1, GridSpec::new(60, 60)).unwrap();
        assert!(rep.pass);
        assert!(rep.h_min >= 1.0);
        assert!(rep.h_min_refined >= 1.0 - 1e-9);
        assert!(xi > 0.0 && xi <= 0.1 + 1e-12);
        // Comparison sandwich: W <= U <= 0 on the scanned region.
        let bp = BarrierParams::new(2.0, 2.0, xi, 0.1).unwrap();
        let eps = cert.eps();
        let r_max = 0.5 * eps;
        let lid = 0.25 * cert.eta * eps * eps;
        for i in 0..40 {
            let r = r_max * i as f64 / 40.0;
            let floor = cert.eta * r * r;
            for j in 1..40 {
                let x_n = floor + (lid - floor) * j as f64 / 40.0;
                let w = barrier_value(r, x_n, &bp);
                let world = cert.frame.to_world([r, x_n]);
                let u = affine_sphere::exact_solution(world);
                assert!(w <= u + 1e-12 && u <= 1e-12, "W={w} u={u} at ({r},{x_n})");
            }
        }
    }

    #[test]
    fn subsolution_rejects_bad_b() {
        let p = affine_sphere::structure_params(2);
        let dom = affine_sphere::domain();
        let cert = classify_boundary_point(&dom, [0.0, 0.0], CertKind::Interior, 2.0).unwrap();
        let verifier = BarrierVerifier::new(&p, &dom, &cert).unwrap();
        // b = 1 < b0 = 2 violates the x_n sign condition.
        assert!(matches!(
            verifier.search_xi_subsolution(1.0, 1.0, 0.1, GridSpec::new(20, 20)),
            Err(Error::SignConditionViolated(_))
        ));
    }

    #[test]
    fn supersolution_certification_on_worked_example() {
        let p = affine_sphere::structure_params(2);
        let dom = affine_sphere::domain();
        let cert = interior_cert_with_eta(&dom, [0.0, 0.0], 2.0, 16.0).unwrap();
        let verifier = BarrierVerifier::new(&p, &dom, &cert).unwrap();
        let samples: Vec<(Point2, f64)> = dom
            .boundary_samples(1024)
            .into_iter()
            .map(|q| (q, affine_sphere::boundary_phi(q)))
            .collect();
        let phi_star = crate::operators::concave_envelope(&samples, &dom).unwrap();
        let u = affine_sphere::exact_solution;
        let (xi, rep) =
            verifier.certify_supersolution(2.0, &u, &phi_star, GridSpec::new(60, 60)).unwrap();
        assert!(rep.pass, "{}", rep.render_text());
        assert!(rep.h_max <= 1.0);
        assert!(rep.boundary_ordering_margin.unwrap() >= -1e-9);
        // Comparison sandwich: U <= W <= 0 inside V.
        let bp = BarrierParams::new(2.0, 2.0, xi, 0.5).unwrap();
        let eps = cert.eps();
        let r_max = 0.5 * eps;
        let lid = 0.25 * cert.eta * eps * eps;
        for i in 0..40 {
            let r = r_max * i as f64 / 40.0;
            let floor = cert.eta * r * r;
            for j in 1..40 {
                let x_n = floor + (lid - floor) * j as f64 / 40.0;
                let w = barrier_value(r, x_n, &bp);
                let world = cert.frame.to_world([r, x_n]);
                let u = affine_sphere::exact_solution(world);
                assert!(u <= w + 1e-12 && w <= 0.0, "u={u} W={w} at ({r},{x_n})");
            }
        }
    }

    #[test]
    fn supersolution_scaling_in_op_amp() {
        // Scaling B down keeps H-tilde <= 1 (H is linear in B).
        let mut p = affine_sphere::structure_params(2);
        p.op_amp = 0.1;
        let dom = affine_sphere::domain();
        let cert = interior_cert_with_eta(&dom, [0.0, 0.0], 2.0, 16.0).unwrap();
        let verifier = BarrierVerifier::new(&p, &dom, &cert).unwrap();
        let samples: Vec<(Point2, f64)> = dom
            .boundary_samples(512)
            .into_iter()
            .map(|q| (q, affine_sphere::boundary_phi(q)))
            .collect();
        let phi_star = crate::operators::concave_envelope(&samples, &dom).unwrap();
        let u = affine_sphere::exact_solution;
        let (_, rep) =
            verifier.certify_supersolution(2.0, &u, &phi_star, GridSpec::new(40, 40)).unwrap();
        assert!(rep.h_max <= 0.11);
    }

    #[test]
    fn supersolution_rejects_zero_lid() {
        let p = affine_sphere::structure_params(2);
        let dom = affine_sphere::domain();
        let cert = interior_cert_with_eta(&dom, [0.0, 0.0], 2.0, 16.0).unwrap();
        let verifier = BarrierVerifier::new(&p, &dom, &cert).unwrap();
        let samples: Vec<(Point2, f64)> =
            dom.boundary_samples(256).into_iter().map(|q| (q, 0.0)).collect();
        let phi_star = crate::operators::concave_envelope(&samples, &dom).unwrap();
        let u = |_: Point2| 0.0;
        assert!(matches!(
            verifier.certify_supersolution(2.0, &u, &phi_star, GridSpec::new(20, 20)),
            Err(Error::LidNotNegative(_))
        ));
    }

    #[test]
    fn subsolution_xi_shrinks_with_larger_amp() {
        // Increasing A forces a smaller certified xi.
        let dom = affine_sphere::domain();
        let cert = classify_boundary_point(&dom, [0.0, 0.0], CertKind::Interior, 2.0).unwrap();
        let p1 = affine_sphere::structure_params(2);
        let mut p10 = p1;
        p10.amp = 10.0;
        let v1 = BarrierVerifier::new(&p1, &dom, &cert).unwrap();
        let v10 = BarrierVerifier::new(&p10, &dom, &cert).unwrap();
        let (xi1, _) = v1.search_xi_subsolution(1.0, 2.0, 0.1, GridSpec::new(40, 40)).unwrap();
        let (xi10, _) = v10.search_xi_subsolution(1.0, 2.0, 0.1, GridSpec::new(40, 40)).unwrap();
        assert!(xi10 <= xi1);
    }

    #[test]
    fn exact_solution_identity_defect() {
        for n in [2u32, 3] {
            let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
            for _ in 0..2000 {
                let ang = rng.gen_range(0.0..std::f64::consts::TAU);
                let rad = 0.5 * rng.gen_range(0.01f64..0.98).sqrt();
                let (r, x_n) = ((rad * ang.cos()).abs().max(1e-6), 0.5 + rad * ang.sin());
                let d = affine_sphere::identity_defect(r, x_n, n).unwrap();
                assert!(d.abs() < 1e-10, "defect {d} at n={n}");
            }
        }
    }
}
