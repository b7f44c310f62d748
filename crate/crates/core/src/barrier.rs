//! The barrier W(r, xₙ) = −((xₙ/ξ)^(2/a) − r²)^(1/b), its closed-form partial
//! derivatives, and the eigenvalues of its Hessian.
//!
//! The Hessian of a rotationally symmetric function W(|x′|, xₙ) has the
//! repeated eigenvalue W_r/r with multiplicity n−2 plus the two eigenvalues of
//! the 2×2 radial block, provided W_rr, W_nn and W_rr·W_nn − W_rn² are all
//! positive. `hessian_eigenvalues` implements exactly that list, so it also
//! serves arbitrary rotationally symmetric C² functions, not just W.

use crate::error::{Error, Result};

/// Barrier shape parameters (a, b, ξ, δ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierParams {
    pub a: f64,
    pub b: f64,
    pub xi: f64,
    pub delta: f64,
}

impl BarrierParams {
    pub fn new(a: f64, b: f64, xi: f64, delta: f64) -> Result<Self> {
        if !(a >= 1.0) || !a.is_finite() {
            return Err(Error::InvalidParams(format!("a must be >= 1, got {a}")));
        }
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::InvalidParams(format!("b must be > 0, got {b}")));
        }
        if !(xi > 0.0) || !xi.is_finite() {
            return Err(Error::InvalidParams(format!("xi must be > 0, got {xi}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParams(format!("delta must lie in (0,1), got {delta}")));
        }
        Ok(Self { a, b, xi, delta })
    }

    /// Assumption-7 compatibility: ξ(1/δ)^{a/2} ≤ η.
    pub fn compatible_with_eta(&self, eta: f64) -> bool {
        self.xi * (1.0 / self.delta).powf(self.a / 2.0) <= eta * (1.0 + 1e-12)
    }
}

/// W and its five partial derivatives at a point (r, xₙ).
///
/// `w_r_over_r` carries W_r/r with the removable singularity at r = 0 filled
/// by its analytic limit; it is the (n−2)-fold Hessian eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierEval {
    pub r: f64,
    pub x_n: f64,
    pub w: f64,
    pub w_r: f64,
    pub w_n: f64,
    pub w_rr: f64,
    pub w_nn: f64,
    pub w_rn: f64,
    pub w_r_over_r: f64,
}

impl BarrierEval {
    /// Wraps externally computed derivatives of a rotationally symmetric
    /// function (for example an exact solution) so the eigenvalue lemma and
    /// the operators can be applied to it. Requires r > 0 so that W_r/r is
    /// well defined.
    pub fn from_derivatives(
        r: f64,
        x_n: f64,
        w: f64,
        w_r: f64,
        w_n: f64,
        w_rr: f64,
        w_nn: f64,
        w_rn: f64,
    ) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::InvalidParams(
                "from_derivatives needs r > 0; use eval_barrier for on-axis points".into(),
            ));
        }
        Ok(Self { r, x_n, w, w_r, w_n, w_rr, w_nn, w_rn, w_r_over_r: w_r / r })
    }

    /// |DW|² = W_r² + W_n².
    pub fn grad_norm_sq(&self) -> f64 {
        self.w_r * self.w_r + self.w_n * self.w_n
    }
}

/// Evaluates W and its derivatives strictly inside the support
/// {(xₙ/ξ)^(2/a) > r²}.
pub fn eval_barrier(r: f64, x_n: f64, bp: &BarrierParams) -> Result<BarrierEval> {
    if !(x_n > 0.0) {
        return Err(Error::NonPositiveXn(x_n));
    }
    if r < 0.0 {
        return Err(Error::InvalidParams(format!("r must be >= 0, got {r}")));
    }
    let (a, b, xi) = (bp.a, bp.b, bp.xi);
    let base = x_n / xi;
    let phi_b = base.powf(2.0 / a) - r * r;
    if phi_b <= 0.0 {
        return Err(Error::OutsideSupport(phi_b));
    }
    let phi = phi_b.powf(1.0 / b);
    let phi_1mb = phi.powf(1.0 - b);
    let phi_1m2b = phi.powf(1.0 - 2.0 * b);
    let p1 = base.powf(2.0 / a - 1.0);
    let p2 = base.powf(2.0 / a - 2.0);
    let p3 = base.powf(4.0 / a - 2.0);

    let w_r_over_r = 2.0 / b * phi_1mb;
    let w_r = w_r_over_r * r;
    let w_n = -2.0 / (a * b) * phi_1mb * p1 / xi;
    let w_rr = w_r_over_r + 4.0 * (b - 1.0) / (b * b) * phi_1m2b * r * r;
    let w_nn = (2.0 * (a - 2.0) / (a * a * b) * phi_1mb * p2
        + 4.0 * (b - 1.0) / (a * a * b * b) * phi_1m2b * p3)
        / (xi * xi);
    let w_rn = -4.0 * (b - 1.0) / (a * b * b) * phi_1m2b * r * p1 / xi;

    Ok(BarrierEval { r, x_n, w: -phi, w_r, w_n, w_rr, w_nn, w_rn, w_r_over_r })
}

/// W clamped to 0 outside its support. Used for boundary-ordering checks that
/// sample exactly on the zero set S, where `eval_barrier` would reject the
/// point.
pub fn barrier_value(r: f64, x_n: f64, bp: &BarrierParams) -> f64 {
    if x_n <= 0.0 {
        return 0.0;
    }
    let phi_b = (x_n / bp.xi).powf(2.0 / bp.a) - r * r;
    if phi_b <= 0.0 {
        0.0
    } else {
        -phi_b.powf(1.0 / bp.b)
    }
}

/// The n Hessian eigenvalues of a rotationally symmetric function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenSet {
    /// W_r/r, with multiplicity `repeated_count` = n − 2.
    pub repeated: f64,
    pub repeated_count: usize,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl EigenSet {
    /// Full eigenvalue list (length n).
    pub fn list(&self) -> Vec<f64> {
        let mut v = vec![self.repeated; self.repeated_count];
        v.push(self.lambda_minus);
        v.push(self.lambda_plus);
        v
    }

    pub fn dim(&self) -> usize {
        self.repeated_count + 2
    }
}

/// Eigenvalues of the assembled n×n Hessian via the closed-form list,
/// under the lemma hypotheses W_rr > 0, W_nn > 0, W_rr·W_nn − W_rn² > 0.
pub fn hessian_eigenvalues(be: &BarrierEval, n: u32) -> Result<EigenSet> {
    if n < 2 {
        return Err(Error::InvalidParams(format!("dimension n must be >= 2, got {n}")));
    }
    if !(be.w_rr > 0.0) {
        return Err(Error::LemmaHypothesisViolated("W_rr <= 0"));
    }
    if !(be.w_nn > 0.0) {
        return Err(Error::LemmaHypothesisViolated("W_nn <= 0"));
    }
    let det2 = be.w_rr * be.w_nn - be.w_rn * be.w_rn;
    if !(det2 > 0.0) {
        return Err(Error::LemmaHypothesisViolated("W_rr*W_nn - W_rn^2 <= 0"));
    }
    let tr = be.w_rr + be.w_nn;
    let disc = ((be.w_rr - be.w_nn).powi(2) + 4.0 * be.w_rn * be.w_rn).sqrt();
    let lambda_minus = 0.5 * (tr - disc);
    let lambda_plus = 0.5 * (tr + disc);
    let repeated_count = (n - 2) as usize;
    let (mut lambda_min, mut lambda_max) = (lambda_minus, lambda_plus);
    if repeated_count > 0 {
        lambda_min = lambda_min.min(be.w_r_over_r);
        lambda_max = lambda_max.max(be.w_r_over_r);
    }
    Ok(EigenSet {
        repeated: be.w_r_over_r,
        repeated_count,
        lambda_minus,
        lambda_plus,
        lambda_min,
        lambda_max,
    })
}

fn inside(x: f64, lo: f64, hi: f64) -> bool {
    // Absolute 1e-12 slack scaled by the interval width.
    let tol = 1e-12 * (1.0 + (hi - lo).abs() + lo.abs().max(hi.abs()));
    x >= lo - tol && x <= hi + tol
}

/// Checks the interval memberships
/// λ₋ ∈ [(W_rr·W_nn − W_rn²)/(W_rr+W_nn), min{W_rr, W_nn}],
/// λ₊ ∈ [max{W_rr, W_nn}, W_rr+W_nn],
/// λ_min ∈ [min{W_r/r, (W_rr·W_nn − W_rn²)/(W_rr+W_nn)}, W_r/r] and
/// λ_max ∈ [W_nn, (n−2)W_r/r + W_rr + W_nn].
///
/// The upper λ_min bound involves the (n−2)-fold eigenvalue W_r/r, which only
/// exists for n ≥ 3; for n = 2 that comparison is skipped.
pub fn eigen_bound_check(es: &EigenSet, be: &BarrierEval) -> bool {
    let det2 = be.w_rr * be.w_nn - be.w_rn * be.w_rn;
    let tr = be.w_rr + be.w_nn;
    let q = be.w_r_over_r;
    let n_minus_2 = es.repeated_count as f64;

    let ok_minus = inside(es.lambda_minus, det2 / tr, be.w_rr.min(be.w_nn));
    let ok_plus = inside(es.lambda_plus, be.w_rr.max(be.w_nn), tr);
    let mut ok_min = inside(es.lambda_min, q.min(det2 / tr), f64::INFINITY);
    if es.repeated_count > 0 {
        ok_min = ok_min && inside(es.lambda_min, f64::NEG_INFINITY, q);
    }
    let ok_max = inside(es.lambda_max, be.w_nn, n_minus_2 * q + tr);
    ok_minus && ok_plus && ok_min && ok_max
}

/// Region for the |W| magnitude sandwich.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MagnitudeRegion {
    /// Points with r² ≤ δ(xₙ/ξ)^(2/a) (the assumption-7 cone).
    Assumption7,
    /// The supersolution-side bound |W| ≥ (1−(1/4)^(2/a))^(1/b)(xₙ/ξ)^(2/ab),
    /// valid on the part of V with r² ≤ (1/4)^(2/a)(xₙ/ξ)^(2/a).
    RegionV,
}

/// Two-sided bound for |W| at height xₙ inside the named region:
/// [factor·(xₙ/ξ)^(2/ab), (xₙ/ξ)^(2/ab)].
pub fn barrier_magnitude_bounds(
    x_n: f64,
    bp: &BarrierParams,
    region: MagnitudeRegion,
) -> Result<(f64, f64)> {
    if !(x_n > 0.0) {
        return Err(Error::NonPositiveXn(x_n));
    }
    let hi = (x_n / bp.xi).powf(2.0 / (bp.a * bp.b));
    let factor = match region {
        MagnitudeRegion::Assumption7 => (1.0 - bp.delta).powf(1.0 / bp.b),
        MagnitudeRegion::RegionV => {
            (1.0 - 0.25f64.powf(2.0 / bp.a)).powf(1.0 / bp.b)
        }
    };
    Ok((factor * hi, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Hyperdual scalar carrying value, two first derivatives and the mixed
    /// second derivative: an independent route to the closed forms.
    #[derive(Debug, Clone, Copy)]
    struct Hd {
        v: f64,
        dx: f64,
        dy: f64,
        dxy: f64,
    }

    impl Hd {
        fn c(v: f64) -> Self {
            Hd { v, dx: 0.0, dy: 0.0, dxy: 0.0 }
        }
        fn sub(self, o: Hd) -> Hd {
            Hd { v: self.v - o.v, dx: self.dx - o.dx, dy: self.dy - o.dy, dxy: self.dxy - o.dxy }
        }
        fn mul(self, o: Hd) -> Hd {
            Hd {
                v: self.v * o.v,
                dx: self.v * o.dx + self.dx * o.v,
                dy: self.v * o.dy + self.dy * o.v,
                dxy: self.v * o.dxy + self.dx * o.dy + self.dy * o.dx + self.dxy * o.v,
            }
        }
        fn powf(self, c: f64) -> Hd {
            let f = self.v.powf(c);
            let f1 = c * self.v.powf(c - 1.0);
            let f2 = c * (c - 1.0) * self.v.powf(c - 2.0);
            Hd {
                v: f,
                dx: f1 * self.dx,
                dy: f1 * self.dy,
                dxy: f1 * self.dxy + f2 * self.dx * self.dy,
            }
        }
        fn neg(self) -> Hd {
            Hd { v: -self.v, dx: -self.dx, dy: -self.dy, dxy: -self.dxy }
        }
    }

    /// W(r, xn) through hyperdual arithmetic; seeds pick which derivatives
    /// come out in dx/dy/dxy.
    fn w_hyperdual(r: Hd, x_n: Hd, bp: &BarrierParams) -> Hd {
        let base = x_n.mul(Hd::c(1.0 / bp.xi));
        base.powf(2.0 / bp.a).sub(r.mul(r)).powf(1.0 / bp.b).neg()
    }

    fn oracle_eval(r: f64, x_n: f64, bp: &BarrierParams) -> BarrierEval {
        let rr = w_hyperdual(Hd { v: r, dx: 1.0, dy: 1.0, dxy: 0.0 }, Hd::c(x_n), bp);
        let nn = w_hyperdual(Hd::c(r), Hd { v: x_n, dx: 1.0, dy: 1.0, dxy: 0.0 }, bp);
        let rn = w_hyperdual(
            Hd { v: r, dx: 1.0, dy: 0.0, dxy: 0.0 },
            Hd { v: x_n, dx: 0.0, dy: 1.0, dxy: 0.0 },
            bp,
        );
        BarrierEval {
            r,
            x_n,
            w: rr.v,
            w_r: rr.dx,
            w_n: nn.dx,
            w_rr: rr.dxy,
            w_nn: nn.dxy,
            w_rn: rn.dxy,
            w_r_over_r: if r > 0.0 { rr.dx / r } else { f64::NAN },
        }
    }

    #[test]
    fn quadratic_case_matches_hand_computation() {
        // a=2, b=1, xi=1: W = -(x_n - r^2).
        let bp = BarrierParams::new(2.0, 1.0, 1.0, 0.5).unwrap();
        let be = eval_barrier(0.3, 0.5, &bp).unwrap();
        assert_relative_eq!(be.w, -(0.5 - 0.09), epsilon = 1e-15);
        assert_relative_eq!(be.w_r, 0.6, epsilon = 1e-15);
        assert_relative_eq!(be.w_n, -1.0, epsilon = 1e-15);
        assert_relative_eq!(be.w_rr, 2.0, epsilon = 1e-15);
        assert_eq!(be.w_nn, 0.0);
        assert_eq!(be.w_rn, 0.0);
    }

    #[test]
    fn on_axis_radial_symmetry() {
        let bp = BarrierParams::new(2.0, 2.0, 0.7, 0.5).unwrap();
        let be = eval_barrier(0.0, 0.4, &bp).unwrap();
        assert_relative_eq!(be.w, -(0.4f64 / 0.7).powf(2.0 / (2.0 * 2.0)), epsilon = 1e-15);
        assert_eq!(be.w_r, 0.0);
        assert_eq!(be.w_rn, 0.0);
        // The removable-singularity limit 2|W|^(1-b)/b.
        assert_relative_eq!(be.w_r_over_r, 2.0 / 2.0 * be.w.abs().powf(-1.0), epsilon = 1e-14);
    }

    #[test]
    fn closed_forms_match_hyperdual_oracle() {
        for &(a, b, xi) in &[(2.0, 2.0, 1.0), (2.0, 2.0, 0.3), (3.0, 0.8, 0.9), (1.5, 2.5, 0.4)] {
            let bp = BarrierParams::new(a, b, xi, 0.5).unwrap();
            for &(r, x_n) in &[(0.1, 0.5), (0.05, 0.2), (0.2, 0.9)] {
                if (x_n / xi).powf(2.0 / a) <= r * r {
                    continue;
                }
                let got = eval_barrier(r, x_n, &bp).unwrap();
                let want = oracle_eval(r, x_n, &bp);
                assert_relative_eq!(got.w, want.w, max_relative = 1e-12);
                assert_relative_eq!(got.w_r, want.w_r, max_relative = 1e-12);
                assert_relative_eq!(got.w_n, want.w_n, max_relative = 1e-12);
                assert_relative_eq!(got.w_rr, want.w_rr, max_relative = 1e-12);
                assert_relative_eq!(got.w_nn, want.w_nn, max_relative = 1e-12);
                assert_relative_eq!(got.w_rn, want.w_rn, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn finite_difference_consistency_second_order() {
        let bp = BarrierParams::new(2.0, 2.0, 1.0, 0.5).unwrap();
        let (r, x_n) = (0.15, 0.6);
        let be = eval_barrier(r, x_n, &bp).unwrap();
        // Observed order of the central-difference error should be >= 1.9.
        let mut errs_r = Vec::new();
        let mut errs_n = Vec::new();
        let hs = [1e-2, 5e-3, 2.5e-3, 1.25e-3];
        for &h in &hs {
            let wr = (eval_barrier(r + h, x_n, &bp).unwrap().w
                - eval_barrier(r - h, x_n, &bp).unwrap().w)
                / (2.0 * h);
            let wn = (eval_barrier(r, x_n + h, &bp).unwrap().w
                - eval_barrier(r, x_n - h, &bp).unwrap().w)
                / (2.0 * h);
            errs_r.push((wr - be.w_r).abs());
            errs_n.push((wn - be.w_n).abs());
        }
        for errs in [errs_r, errs_n] {
            let order = (errs[0] / errs[3]).ln() / (hs[0] / hs[3]).ln();
            assert!(order >= 1.9, "observed order {order}");
        }
    }

    #[test]
    fn identity_hessian_eigenvalues() {
        // W = (r^2 + x_n^2)/2 has the identity Hessian.
        let be = BarrierEval::from_derivatives(0.3, 0.4, 0.125, 0.3, 0.4, 1.0, 1.0, 0.0).unwrap();
        for n in 2..=6 {
            let es = hessian_eigenvalues(&be, n).unwrap();
            for lam in es.list() {
                assert_relative_eq!(lam, 1.0, epsilon = 1e-14);
            }
            assert!(eigen_bound_check(&es, &be));
        }
    }

    #[test]
    fn affine_sphere_exact_solution_eigenvalues() {
        // U = -sqrt(1 - r^2 - (x_n - 1)^2); eigenvalues are -1/U (n-1 of them) and -1/U^3.
        let (r, x_n) = (0.1f64, 0.5f64);
        let u = -(1.0 - r * r - (x_n - 1.0) * (x_n - 1.0)).sqrt();
        let u_r = -r / u;
        let u_n = -(x_n - 1.0) / u;
        let u_rr = -(u * u + r * r) / (u * u * u);
        let u_nn = -(u * u + (x_n - 1.0) * (x_n - 1.0)) / (u * u * u);
        let u_rn = -r * (x_n - 1.0) / (u * u * u);
        let be = BarrierEval::from_derivatives(r, x_n, u, u_r, u_n, u_rr, u_nn, u_rn).unwrap();
        for n in [2u32, 3, 5] {
            let es = hessian_eigenvalues(&be, n).unwrap();
            let mut got = es.list();
            got.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut want = vec![-1.0 / u; (n - 1) as usize];
            want.push(-1.0 / (u * u * u));
            want.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (g, w) in got.iter().zip(&want) {
                assert_relative_eq!(g, w, max_relative = 1e-12);
            }
            assert_relative_eq!(es.lambda_min, -1.0 / u, max_relative = 1e-12);
            assert_relative_eq!(es.lambda_max, -1.0 / (u * u * u), max_relative = 1e-12);
            assert!(eigen_bound_check(&es, &be));
        }
    }

    #[test]
    fn adversarial_eigen_set_rejected() {
        let be = BarrierEval::from_derivatives(0.3, 0.4, 0.125, 0.3, 0.4, 1.0, 2.0, 0.0).unwrap();
        let mut es = hessian_eigenvalues(&be, 3).unwrap();
        es.lambda_max = 1.5; // below W_nn = 2
        assert!(!eigen_bound_check(&es, &be));
    }

    #[test]
    fn lemma_hypotheses_reported() {
        let be = BarrierEval::from_derivatives(0.3, 0.4, 0.1, 0.3, 0.4, -1.0, 1.0, 0.0).unwrap();
        assert_eq!(
            hessian_eigenvalues(&be, 2),
            Err(Error::LemmaHypothesisViolated("W_rr <= 0"))
        );
        let be = BarrierEval::from_derivatives(0.3, 0.4, 0.1, 0.3, 0.4, 1.0, 1.0, 1.5).unwrap();
        assert_eq!(
            hessian_eigenvalues(&be, 2),
            Err(Error::LemmaHypothesisViolated("W_rr*W_nn - W_rn^2 <= 0"))
        );
    }

    #[test]
    fn magnitude_bounds() {
        let bp = BarrierParams::new(2.0, 2.0, 0.5, 1e-9).unwrap();
        // delta -> 0 collapses the assumption-7 interval.
        let (lo, hi) = barrier_magnitude_bounds(0.3, &bp, MagnitudeRegion::Assumption7).unwrap();
        assert_relative_eq!(lo, hi, max_relative = 1e-8);
        // Region V lower factor at a=2, b=2 is (1 - 1/4)^(1/2) = sqrt(3)/2.
        let (lo, hi) = barrier_magnitude_bounds(0.3, &bp, MagnitudeRegion::RegionV).unwrap();
        assert_relative_eq!(lo / hi, (0.75f64).sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn magnitude_bounds_contain_samples_in_v() {
        // Sampled |W| must lie inside the returned interval on the part of V
        // the bound covers, the cone r^2 <= (1/4)^(2/a) (x_n/xi)^(2/a).
        let (a, b) = (2.0, 2.0);
        let (eta, eps) = (4.0, 0.4);
        let xi = (0.5f64).powf(a / 2.0 - 1.0) * eta;
        let bp = BarrierParams::new(a, b, xi, 0.5).unwrap();
        let rmax = 0.25f64.powf(1.0 / a) * eps;
        let lid = 0.25 * eta * eps.powf(a);
        for i in 0..60 {
            let r = rmax * i as f64 / 60.0;
            let floor = (eta * r.powf(a)).max(4.0 * xi * r.powf(a));
            for j in 1..60 {
                let x_n = floor + (lid - floor) * j as f64 / 60.0;
                if x_n <= 0.0 || x_n >= lid || x_n <= floor {
                    continue;
                }
                let w = barrier_value(r, x_n, &bp).abs();
                let (lo, hi) = barrier_magnitude_bounds(x_n, &bp, MagnitudeRegion::RegionV).unwrap();
                assert!(
                    w >= lo - 1e-12 && w <= hi + 1e-12,
                    "|W|={w} outside [{lo},{hi}] at r={r}, x_n={x_n}"
                );
            }
        }
    }

    #[test]
    fn outside_support_rejected() {
        let bp = BarrierParams::new(2.0, 2.0, 1.0, 0.5).unwrap();
        assert!(matches!(eval_barrier(1.0, 0.5, &bp), Err(Error::OutsideSupport(_))));
        assert!(matches!(eval_barrier(0.1, 0.0, &bp), Err(Error::NonPositiveXn(_))));
    }
}
