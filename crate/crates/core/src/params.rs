//! Structural parameters, the Hölder exponent μ(a) and the admissible b-interval.
//!
//! The exponent and interval endpoints are simple rational expressions in the
//! structural constants, and the acceptance checks assert exact equalities like
//! μ = 1/2. Every f64 is an exact rational, so the arithmetic here is done in
//! `BigRational` and only converted back to f64 at the edges.

use num::rational::BigRational;
use num::{BigInt, FromPrimitive, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// The structural constant bundle of conditions (f₁)-(f₃′) and (F₁)-(F₂′).
///
/// `amp` is the right-hand-side amplitude A, `op_amp` the operator amplitude B.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureParams {
    pub amp: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub op_amp: f64,
    pub s: f64,
    pub t: f64,
    pub n: u32,
}

impl StructureParams {
    pub fn new(
        amp: f64,
        alpha: f64,
        beta: f64,
        gamma: f64,
        op_amp: f64,
        s: f64,
        t: f64,
        n: u32,
    ) -> Result<Self> {
        let p = Self { amp, alpha, beta, gamma, op_amp, s, t, n };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.amp.is_finite() || self.amp < 0.0 {
            return Err(Error::InvalidParams(format!("A must be >= 0, got {}", self.amp)));
        }
        if self.op_amp <= 0.0 || !self.op_amp.is_finite() {
            return Err(Error::InvalidParams(format!("B must be > 0, got {}", self.op_amp)));
        }
        if self.s < 0.0 || self.t < 0.0 {
            return Err(Error::InvalidParams(format!(
                "s, t must be >= 0, got s={}, t={}",
                self.s, self.t
            )));
        }
        if self.n < 2 {
            return Err(Error::InvalidParams(format!("dimension n must be >= 2, got {}", self.n)));
        }
        // (f3)/(f3') require beta >= n + 1 + gamma.
        if self.beta < self.n as f64 + 1.0 + self.gamma {
            return Err(Error::InvalidParams(format!(
                "beta = {} violates beta >= n + 1 + gamma = {}",
                self.beta,
                self.n as f64 + 1.0 + self.gamma
            )));
        }
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("s", self.s),
            ("t", self.t),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} must be finite, got {v}")));
            }
        }
        Ok(())
    }

    /// α − γ + s + t, the denominator shared by μ(a) and the b-interval.
    pub fn denom(&self) -> f64 {
        self.alpha - self.gamma + self.s + self.t
    }
}

fn rat(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite f64 is an exact rational")
}

fn int(n: u32) -> BigRational {
    BigRational::from_integer(BigInt::from_u32(n).unwrap())
}

/// Which branch of the μ(a) formula fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MuBranch {
    /// β below the saturation threshold: the rational formula applies.
    Formula,
    /// β at or above the threshold: μ is reported as 1.
    SaturatedOne,
}

/// Exponent value together with the branch taken and the exact rational form.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentResult {
    pub mu: f64,
    pub mu_exact: BigRational,
    pub branch: MuBranch,
    pub a_used: f64,
}

/// Boundary Hölder exponent μ(a) as a function of the convexity parameter.
///
/// μ(a) = (β−γ+2t−n−1)/(α−γ+s+t) + 2s/(a(α−γ+s+t)) when
/// β < α+n+s−t+1−2s/a, and 1 otherwise.
pub fn mu_exponent(a: f64, p: &StructureParams) -> Result<ExponentResult> {
    p.validate()?;
    if !(a >= 1.0) || !a.is_finite() {
        return Err(Error::InvalidParams(format!("convexity parameter a must be >= 1, got {a}")));
    }
    let (ra, alpha, beta, gamma, s, t) =
        (rat(a), rat(p.alpha), rat(p.beta), rat(p.gamma), rat(p.s), rat(p.t));
    let n = int(p.n);
    let one = BigRational::one();
    let two = &one + &one;

    // Saturation test beta >= alpha + n + s - t + 1 - 2s/a, cleared of the 1/a.
    let threshold_scaled = &ra * (&alpha + &n + &s - &t + &one) - &two * &s;
    if &beta * &ra >= threshold_scaled {
        return Ok(ExponentResult { mu: 1.0, mu_exact: one, branch: MuBranch::SaturatedOne, a_used: a });
    }

    let denom = &alpha - &gamma + &s + &t;
    if denom.is_zero() {
        return Err(Error::DegenerateDenominator("mu(a): alpha - gamma + s + t = 0"));
    }
    let mu = (&beta - &gamma + &two * &t - &n - &one) / &denom + (&two * &s) / (&ra * &denom);
    if !mu.is_positive() || mu > one {
        return Err(Error::InvalidParams(format!(
            "mu(a) = {} outside (0, 1]; parameters degenerate",
            mu.to_f64().unwrap_or(f64::NAN)
        )));
    }
    Ok(ExponentResult {
        mu: mu.to_f64().unwrap_or(f64::NAN),
        mu_exact: mu,
        branch: MuBranch::Formula,
        a_used: a,
    })
}

/// Which barrier construction the b-interval feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Subsolution,
    Supersolution,
}

/// Admissible interval for the barrier exponent b, with the recommended b₀.
///
/// Subsolution: [b₀, (α−γ+s+t)/s] (upper endpoint absent when s = 0).
/// Supersolution: (0, b₀].
#[derive(Debug, Clone, PartialEq)]
pub struct BInterval {
    pub side: Side,
    pub lo: f64,
    /// `None` means the interval is unbounded above.
    pub hi: Option<f64>,
    pub b0: f64,
    pub b0_exact: BigRational,
}

impl BInterval {
    pub fn contains(&self, b: f64) -> bool {
        let above = match self.side {
            Side::Subsolution => b >= self.lo - 1e-12,
            Side::Supersolution => b > 0.0,
        };
        above && self.hi.map_or(true, |hi| b <= hi + 1e-12)
    }
}

/// Admissible b-interval with b₀ = 2(α−γ+s+t)/(a(β−γ−n−1+2t)+2s).
pub fn admissible_b_interval(a: f64, p: &StructureParams, side: Side) -> Result<BInterval> {
    p.validate()?;
    if !(a >= 1.0) || !a.is_finite() {
        return Err(Error::InvalidParams(format!("convexity parameter a must be >= 1, got {a}")));
    }
    let (ra, alpha, beta, gamma, s, t) =
        (rat(a), rat(p.alpha), rat(p.beta), rat(p.gamma), rat(p.s), rat(p.t));
    let n = int(p.n);
    let one = BigRational::one();
    let two = &one + &one;

    let dnum = &alpha - &gamma + &s + &t;
    let b0_den = &ra * (&beta - &gamma - &n - &one + &two * &t) + &two * &s;
    if b0_den.is_zero() {
        return Err(Error::DegenerateDenominator("b0: a(beta-gamma-n-1+2t)+2s = 0"));
    }
    let b0 = &two * &dnum / &b0_den;
    if !b0.is_positive() {
        return Err(Error::InvalidParams(format!(
            "b0 = {} is not positive",
            b0.to_f64().unwrap_or(f64::NAN)
        )));
    }
    let b0_f = b0.to_f64().unwrap_or(f64::NAN);

    match side {
        Side::Subsolution => {
            let hi = if s.is_zero() {
                None
            } else {
                let hi = &dnum / &s;
                if b0 > hi {
                    return Err(Error::EmptyInterval {
                        lo: b0_f,
                        hi: hi.to_f64().unwrap_or(f64::NAN),
                    });
                }
                Some(hi.to_f64().unwrap_or(f64::NAN))
            };
            Ok(BInterval { side, lo: b0_f, hi, b0: b0_f, b0_exact: b0 })
        }
        Side::Supersolution => Ok(BInterval { side, lo: 0.0, hi: Some(b0_f), b0: b0_f, b0_exact: b0 }),
    }
}

/// Checks μ(a) = 2/(a·b₀) on the formula branch (1e-12 relative tolerance).
///
/// On the saturated branch the identity is not applicable and an error is
/// returned instead of a boolean.
pub fn mu_equals_two_over_ab(a: f64, b0: f64, p: &StructureParams) -> Result<bool> {
    let res = mu_exponent(a, p)?;
    if res.branch == MuBranch::SaturatedOne {
        return Err(Error::RegimeMismatch(
            "mu = 2/(a b0) only applies on the formula branch".into(),
        ));
    }
    if b0 <= 0.0 {
        return Err(Error::InvalidParams(format!("b0 must be positive, got {b0}")));
    }
    let rhs = 2.0 / (a * b0);
    let scale = res.mu.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
    Ok((res.mu - rhs).abs() <= 1e-12 * scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::traits::ToPrimitive;
    use proptest::prelude::*;

    fn example_params() -> StructureParams {
        // Hyperbolic affine sphere example in n = 2.
        StructureParams::new(1.0, 4.0, 3.0, 0.0, 1.0, 1.0, 1.0, 2).unwrap()
    }

    #[test]
    fn affine_sphere_exponent_is_exactly_half() {
        let r = mu_exponent(2.0, &example_params()).unwrap();
        assert_eq!(r.branch, MuBranch::Formula);
        assert_eq!(r.mu, 0.5);
        assert_eq!(r.mu_exact, BigRational::new(1.into(), 2.into()));
    }

    #[test]
    fn affine_sphere_b0_is_exactly_two() {
        let iv = admissible_b_interval(2.0, &example_params(), Side::Subsolution).unwrap();
        assert_eq!(iv.b0, 2.0);
        assert_eq!(iv.b0_exact, BigRational::from_integer(2.into()));
        // Upper endpoint (alpha - gamma + s + t)/s = 6.
        assert_eq!(iv.hi, Some(6.0));
    }

    #[test]
    fn saturated_branch() {
        // beta = 10 >= alpha + n + s - t + 1 - 2s/a = 5.
        let p = StructureParams::new(1.0, 3.0, 10.0, 0.0, 1.0, 1.0, 1.0, 2).unwrap();
        let r = mu_exponent(2.0, &p).unwrap();
        assert_eq!(r.branch, MuBranch::SaturatedOne);
        assert_eq!(r.mu, 1.0);
        assert!(matches!(
            mu_equals_two_over_ab(2.0, 1.0, &p),
            Err(Error::RegimeMismatch(_))
        ));
    }

    #[test]
    fn b0_five_thirds_case() {
        // n=2, alpha=3, beta=3, gamma=0, s=1, t=1, a=2 -> b0 = 10/6 = 5/3.
        let p = StructureParams::new(1.0, 3.0, 3.0, 0.0, 1.0, 1.0, 1.0, 2).unwrap();
        let iv = admissible_b_interval(2.0, &p, Side::Subsolution).unwrap();
        assert_eq!(iv.b0_exact, BigRational::new(5.into(), 3.into()));
        assert!(mu_equals_two_over_ab(2.0, iv.b0, &p).unwrap());
        // mu = 3/5 on the formula branch.
        let r = mu_exponent(2.0, &p).unwrap();
        assert_eq!(r.mu_exact, BigRational::new(3.into(), 5.into()));
    }

    #[test]
    fn lazer_mckenna_reduction() {
        // beta = n+1, gamma = 0, s = n-1, t = 1 gives mu = (n+1)/(n+alpha).
        for n in 2u32..=6 {
            for alpha_i in 2u32..=6 {
                let alpha = alpha_i as f64;
                let p = StructureParams::new(
                    1.0,
                    alpha,
                    n as f64 + 1.0,
                    0.0,
                    1.0,
                    n as f64 - 1.0,
                    1.0,
                    n,
                )
                .unwrap();
                let r = mu_exponent(2.0, &p).unwrap();
                let want = BigRational::new(
                    BigInt::from(n as i64 + 1),
                    BigInt::from(n as i64 + alpha_i as i64),
                );
                assert_eq!(r.mu_exact, want, "n={n} alpha={alpha}");
            }
        }
    }

    #[test]
    fn ratio_exactly_one_when_denominators_match() {
        // a(beta-gamma-n-1+2t)+2s = 2(alpha-gamma+s+t) forces b0 = 1:
        // take a=2, n=2, gamma=0, t=1, s=1, alpha=2, beta=4: lhs 2*3+2=8, rhs 2*4=8.
        let p = StructureParams::new(1.0, 2.0, 4.0, 0.0, 1.0, 1.0, 1.0, 2).unwrap();
        let iv = admissible_b_interval(2.0, &p, Side::Supersolution).unwrap();
        assert_eq!(iv.b0, 1.0);
        assert_eq!(iv.hi, Some(1.0));
    }

    #[test]
    fn unbounded_above_when_s_zero() {
        let p = StructureParams::new(1.0, 4.0, 3.0, 0.0, 1.0, 0.0, 1.0, 2).unwrap();
        let iv = admissible_b_interval(2.0, &p, Side::Subsolution).unwrap();
        assert_eq!(iv.hi, None);
        assert!(iv.contains(1e9));
    }

    #[test]
    fn degenerate_denominator_detected() {
        // beta = n+1, gamma = s = t = 0 zeroes the b0 denominator
        // a(beta-gamma-n-1+2t)+2s.
        let p = StructureParams::new(1.0, 2.0, 3.0, 0.0, 1.0, 0.0, 0.0, 2).unwrap();
        assert!(matches!(
            admissible_b_interval(2.0, &p, Side::Subsolution),
            Err(Error::DegenerateDenominator(_))
        ));
    }

    proptest! {
        // mu is non-increasing in a on the formula branch.
        #[test]
        fn mu_nonincreasing_in_a(a1 in 1.0f64..8.0, da in 0.0f64..4.0,
                                 alpha in 1.0f64..6.0, beta_off in 0.0f64..0.8,
                                 s in 0.0f64..3.0, t in 0.0f64..2.0) {
            let n = 2u32;
            let beta = n as f64 + 1.0 + beta_off;
            let p = StructureParams::new(1.0, alpha, beta, 0.0, 1.0, s, t, n);
            prop_assume!(p.is_ok());
            let p = p.unwrap();
            prop_assume!(p.denom() > 0.1);
            let a2 = a1 + da;
            let m1 = mu_exponent(a1, &p);
            let m2 = mu_exponent(a2, &p);
            prop_assume!(m1.is_ok() && m2.is_ok());
            let (m1, m2) = (m1.unwrap(), m2.unwrap());
            prop_assume!(m1.branch == MuBranch::Formula && m2.branch == MuBranch::Formula);
            prop_assert!(m2.mu <= m1.mu + 1e-12);
        }

        // On the formula branch, mu(a) * a * b0 = 2 exactly in rational arithmetic.
        #[test]
        fn mu_a_b0_identity(a_num in 2u32..12, alpha in 1.0f64..6.0,
                            beta_off in 0.0f64..0.9, s in 0.0f64..3.0, t in 0.0f64..2.0) {
            let a = a_num as f64 / 2.0;
            prop_assume!(a >= 1.0);
            let n = 2u32;
            let beta = n as f64 + 1.0 + beta_off;
            let p = StructureParams::new(1.0, alpha, beta, 0.0, 1.0, s, t, n);
            prop_assume!(p.is_ok());
            let p = p.unwrap();
            prop_assume!(p.denom() > 0.1);
            let m = mu_exponent(a, &p);
            prop_assume!(m.is_ok());
            let m = m.unwrap();
            prop_assume!(m.branch == MuBranch::Formula);
            let iv = admissible_b_interval(a, &p, Side::Supersolution);
            prop_assume!(iv.is_ok());
            let iv = iv.unwrap();
            let prod = &m.mu_exact * rat(a) * &iv.b0_exact;
            prop_assert_eq!(prod.to_f64().unwrap(), 2.0);
            prop_assert_eq!(prod, BigRational::from_integer(2.into()));
        }

        // mu stays inside (0, 1] for every valid draw.
        #[test]
        fn mu_range(a in 1.0f64..10.0, alpha in -2.0f64..6.0, beta_off in 0.0f64..6.0,
                    gamma in -1.0f64..1.0, s in 0.0f64..3.0, t in 0.0f64..2.0) {
            let n = 3u32;
            let beta = n as f64 + 1.0 + gamma + beta_off;
            let p = StructureParams::new(1.0, alpha, beta, gamma, 1.0, s, t, n);
            prop_assume!(p.is_ok());
            if let Ok(m) = mu_exponent(a, &p.unwrap()) {
                prop_assert!(m.mu > 0.0 && m.mu <= 1.0);
            }
        }
    }
}
