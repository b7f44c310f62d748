//! The named constants of the sub/supersolution constructions (Tables 1-3),
//! the |W| ≥ ρ·dist(x,S) slope estimate, and the appendix inequality
//! sandwiches for W_rr·W_nn − W_rn², W_rr + W_nn and the individual rows.

use crate::barrier::{eval_barrier, BarrierParams};
use crate::error::{Error, Result};
use crate::params::StructureParams;

/// Parameter regime a constant set belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// a ≥ 2, b > 1.
    Step11,
    /// a ≥ 2, 0 < b ≤ 1.
    Step12,
    /// Supersolution side, a ≥ 2.
    Supersolution,
    /// a ∈ [1, 2), b > 1, ab > 2 (the tilded family).
    AIn12,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Regime::Step11 => "step1-1",
            Regime::Step12 => "step1-2",
            Regime::Supersolution => "supersolution",
            Regime::AIn12 => "a-in-[1,2)",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone)]
pub struct ConstantEntry {
    pub symbol: &'static str,
    pub value: f64,
    pub required_positive: bool,
}

/// Named constant values for one regime, with the δ that made them positive.
#[derive(Debug, Clone)]
pub struct ConstantSet {
    pub regime: Regime,
    pub delta_used: Option<f64>,
    pub entries: Vec<ConstantEntry>,
}

impl ConstantSet {
    pub fn get(&self, symbol: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.symbol == symbol).map(|e| e.value)
    }

    pub fn first_nonpositive(&self) -> Option<&ConstantEntry> {
        self.entries.iter().find(|e| e.required_positive && !(e.value > 0.0))
    }

    pub fn all_positive(&self) -> bool {
        self.first_nonpositive().is_none()
    }

    /// CSV export: symbol, value, regime, positive flag.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("symbol,value,regime,positive\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{:.17e},{},{}\n",
                e.symbol,
                e.value,
                self.regime,
                e.value > 0.0
            ));
        }
        out
    }
}

/// Coefficients of the appendix interval rows for one (regime, a, b, δ, diam):
/// the sandwich constants C₁, C₂, C₃ and the endpoint coefficients of the
/// W_rr (relative to |W|^(1−b)) and W_nn (relative to |W|^(1−ab)ξ⁻²) rows.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SandwichRows {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub wrr: (f64, f64),
    pub wnn: (f64, f64),
}

pub(crate) fn sandwich_rows(regime: Regime, a: f64, b: f64, delta: f64, diam: f64) -> SandwichRows {
    let d = delta;
    let a2 = a * a;
    let b2 = b * b;
    // Shared pieces.
    let wrr_base = 2.0 / b;
    let wrr_pert = 2.0 / b + 4.0 * (b - 1.0) / b2 * d / (1.0 - d);
    match regime {
        Regime::Step11 => {
            let c1 = 8.0 * (b - 1.0) / (a2 * b2 * b) * (1.0 - d).powf(a - 2.0);
            let wnn_hi = 2.0 * (a - 2.0) / (a2 * b) + 4.0 * (b - 1.0) / (a2 * b2);
            let wnn_lo = 2.0 * (a - 2.0) / (a2 * b) * (1.0 - d).powf(a - 1.0)
                + 4.0 * (b - 1.0) / (a2 * b2) * (1.0 - d).powf(a - 2.0);
            let c2 = wrr_pert * wnn_hi;
            let c3 = wrr_pert * diam.powf(2.0 - 2.0 / a)
                + 2.0 * (a - 2.0) / (a2 * b)
                + 4.0 * (b - 1.0) / (a2 * b2);
            SandwichRows { c1, c2, c3, wrr: (wrr_base, wrr_pert), wnn: (wnn_lo, wnn_hi) }
        }
        Regime::Step12 => {
            let c1 = 8.0 * (b - 1.0) / (a2 * b2 * b) * (d * (a - 2.0) + 1.0)
                + 4.0 * (a - 2.0) / (a2 * b2) * (1.0 - d).powf(a - 1.0);
            let c2 = 4.0 * (a - 2.0) / (a2 * b2)
                + 8.0 * (b - 1.0) / (a2 * b2 * b) * (1.0 - d).powf(a - 2.0);
            let c3 = wrr_base * diam.powf(2.0 - 2.0 / a)
                + 2.0 * (a - 2.0) / (a2 * b)
                + 4.0 * (b - 1.0) / (a2 * b2) * (1.0 - d).powf(a - 2.0);
            let wnn_lo = 2.0 * (a - 2.0) / (a2 * b) * (1.0 - d).powf(a - 1.0)
                + 4.0 * (b - 1.0) / (a2 * b2);
            let wnn_hi = 2.0 * (a - 2.0) / (a2 * b)
                + 4.0 * (b - 1.0) / (a2 * b2) * (1.0 - d).powf(a - 2.0);
            // b <= 1 swaps the W_rr endpoints.
            SandwichRows { c1, c2, c3, wrr: (wrr_pert, wrr_base), wnn: (wnn_lo, wnn_hi) }
        }
        Regime::AIn12 => {
            let c1 = 8.0 * (b - 1.0) / (a2 * b2 * b) * (1.0 - d);
            let wnn_lo = 2.0 * (a * b - 2.0) / (a2 * b2);
            let wnn_hi = 2.0 * (a - 2.0) / (a2 * b) * (1.0 - d).powf(a - 1.0)
                + 4.0 * (b - 1.0) / (a2 * b2) * (1.0 - d).powf(a - 2.0);
            let c2 = wrr_pert * wnn_hi;
            let c3 = wrr_pert * diam.powf(2.0 - 2.0 / a)
                + 2.0 * (a - 2.0) / (a2 * b) * (1.0 - d).powf(a - 1.0)
                + 4.0 * (b - 1.0) / (a2 * b2) * (1.0 - d).powf(a - 2.0);
            SandwichRows { c1, c2, c3, wrr: (wrr_base, wrr_pert), wnn: (wnn_lo, wnn_hi) }
        }
        Regime::Supersolution => unreachable!("no sandwich rows on the supersolution side"),
    }
}

fn check_regime(regime: Regime, a: f64, b: f64) -> Result<()> {
    let ok = match regime {
        Regime::Step11 => a >= 2.0 && b > 1.0,
        Regime::Step12 => a >= 2.0 && b > 0.0 && b <= 1.0,
        Regime::Supersolution => a >= 2.0 && b > 0.0,
        Regime::AIn12 => (1.0..2.0).contains(&a) && b > 1.0 && a * b > 2.0,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::RegimeMismatch(format!("(a, b) = ({a}, {b}) invalid for regime {regime}")))
    }
}

fn regime_for_table1(a: f64, b: f64) -> Result<Regime> {
    if a >= 2.0 && b > 1.0 {
        Ok(Regime::Step11)
    } else if a >= 2.0 && b > 0.0 && b <= 1.0 {
        Ok(Regime::Step12)
    } else {
        Err(Error::RegimeMismatch(format!("table 1 needs a >= 2 and b > 0, got ({a}, {b})")))
    }
}

/// C₈ = min{2^(β−n−1)(1+(aηε^(a−1))²)^((β−n−1)/2), 1}; shared by the
/// subsolution chains of tables 1 and 3 (with η = η′).
fn c8(a: f64, eta_p: f64, eps: f64, beta: f64, n: f64) -> f64 {
    let e = beta - n - 1.0;
    (2f64.powf(e) * (1.0 + (a * eta_p * eps.powf(a - 1.0)).powi(2)).powf(e / 2.0)).min(1.0)
}

/// Exponent n+1−β+γ+(2/(ab))(α−γ+(1−b)s+(1−ab)t) of the xₙ power (the
/// quantity that must be ≤ 0 for subsolutions / ≥ 0 for supersolutions).
pub fn xn_exponent(a: f64, b: f64, p: &StructureParams) -> f64 {
    p.n as f64 + 1.0 - p.beta
        + p.gamma
        + 2.0 / (a * b) * (p.alpha - p.gamma + (1.0 - b) * p.s + (1.0 - a * b) * p.t)
}

/// Exponent −2t−(2/(ab))(α−γ+(1−b)s+(1−ab)t) of the ξ power.
pub fn xi_exponent(a: f64, b: f64, p: &StructureParams) -> f64 {
    -2.0 * p.t - 2.0 / (a * b) * (p.alpha - p.gamma + (1.0 - b) * p.s + (1.0 - a * b) * p.t)
}

/// Table 1: subsolution constants C₁..C₁₂ for the case a ∈ [2, ∞).
///
/// δ is halved (up to 20 times) whenever a required-positive constant comes
/// out non-positive; the δ actually used is reported in the set.
pub fn table1_constants(
    a: f64,
    b: f64,
    delta: f64,
    eta_prime: f64,
    eps: f64,
    diam: f64,
    p: &StructureParams,
) -> Result<ConstantSet> {
    let regime = regime_for_table1(a, b)?;
    p.validate()?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParams(format!("delta must lie in (0,1), got {delta}")));
    }
    let mut d = delta;
    for _ in 0..=20 {
        let set = table1_at_delta(regime, a, b, d, eta_prime, eps, diam, p);
        if set.all_positive() {
            return Ok(set);
        }
        d *= 0.5;
    }
    let set = table1_at_delta(regime, a, b, d, eta_prime, eps, diam, p);
    let bad = set.first_nonpositive().unwrap();
    Err(Error::NonPositiveConstant { symbol: bad.symbol, value: bad.value })
}

#[allow(clippy::too_many_arguments)]
fn table1_at_delta(
    regime: Regime,
    a: f64,
    b: f64,
    d: f64,
    eta_prime: f64,
    eps: f64,
    diam: f64,
    p: &StructureParams,
) -> ConstantSet {
    let rows = sandwich_rows(regime, a, b, d, diam);
    let (c1, c2, c3) = (rows.c1, rows.c2, rows.c3);
    let c4 = (2.0 / b).min(c1 / c3);
    let c5 = rows.wnn.0;
    let c6 = 1.0
        + a * a * diam.powf(4.0 - 4.0 / a)
        + a * a * b * b / 4.0 * (1.0 - d).powf(2.0 - a) * diam.powf(2.0 - 4.0 / (a * b));
    let g = p.gamma;
    let c7 = (a * b / 2.0).powf(g)
        * 1f64.min(c6.powf(-g / 2.0))
        * 1f64.min((1.0 - d).powf((1.0 - a / 2.0) * g));
    let c8v = c8(a, eta_prime, eps, p.beta, p.n as f64);
    let c9 = p.amp.recip() * p.op_amp * c4.powf(p.s) * c5.powf(p.t) * c7 * c8v;
    let c10_exp = p.alpha / b + (a / 2.0 - 1.0 / b) * g + (1.0 / b - 1.0) * p.s + (1.0 / b - a) * p.t;
    let c10 = c9 * 1f64.min((1.0 - d).powf(c10_exp));
    let c11 = diam.powf(xn_exponent(a, b, p));
    let c12 = c10 * c11;
    let entries = vec![
        ConstantEntry { symbol: "C1", value: c1, required_positive: true },
        ConstantEntry { symbol: "C2", value: c2, required_positive: true },
        ConstantEntry { symbol: "C3", value: c3, required_positive: true },
        ConstantEntry { symbol: "C4", value: c4, required_positive: true },
        ConstantEntry { symbol: "C5", value: c5, required_positive: true },
        ConstantEntry { symbol: "C6", value: c6, required_positive: true },
        ConstantEntry { symbol: "C7", value: c7, required_positive: true },
        ConstantEntry { symbol: "C8", value: c8v, required_positive: true },
        ConstantEntry { symbol: "C9", value: c9, required_positive: true },
        ConstantEntry { symbol: "C10", value: c10, required_positive: true },
        ConstantEntry { symbol: "C11", value: c11, required_positive: true },
        ConstantEntry { symbol: "C12", value: c12, required_positive: true },
    ];
    ConstantSet { regime, delta_used: Some(d), entries }
}

/// Table 2: supersolution constants C₁₃..C₂₂ for a ≥ 2; ρ is the slope from
/// `estimate_rho`.
pub fn table2_constants(
    a: f64,
    b: f64,
    eta: f64,
    eps: f64,
    p: &StructureParams,
    rho: f64,
) -> Result<ConstantSet> {
    check_regime(Regime::Supersolution, a, b)?;
    p.validate()?;
    if !(rho > 0.0) {
        return Err(Error::InvalidParams(format!("rho must be > 0, got {rho}")));
    }
    let n = p.n as f64;
    let g = p.gamma;
    let c13 = 2.0 / b;
    let c14 = 2f64.powf(6.0 / a - 4.0)
        * ((n - 1.0) / b + 2.0 * (b - 1.0).abs() / (b * b))
        * eta
        * eta
        * eps.powf(2.0 * a - 2.0)
        + (2.0 * (a - 2.0).abs() / (a * a * b) + 4.0 * (b - 1.0).abs() / (a * a * b * b));
    let e15 = p.beta - n - 1.0;
    let c15 = (2f64.powf(e15) * (1.0 + (a * eta * eps.powf(a - 1.0)).powi(2)).powf(e15 / 2.0)).max(1.0);
    let vfac = 1.0 - 0.25f64.powf(2.0 / a);
    let c16 = 4.0 * (1.0 / rho + 1.0).powi(2)
        * (1.0 + (2.0 * a * eta * eps.powf(a - 1.0)).powi(2))
        * vfac.powf(2.0 - a).max(1.0);
    let c17 = (2f64.powf(-g) * a.powf(g) * b.powf(g)).max(c16.powf(-g / 2.0));
    let c18 = p.amp.recip() * p.op_amp * c13.powf(p.s) * c14.powf(p.t) * c15 * c17;
    let c19_exp = (p.alpha + (b - 1.0) * g + (1.0 - b) * p.s + (1.0 - a * b) * p.t) / b;
    let c19 = vfac.powf(c19_exp).max(1.0);
    let c20 = c18 * c19;
    let c21 = (0.25 * eta * eps.powf(a)).powf(xn_exponent(a, b, p));
    let c22 = c20 * c21;
    let entries = vec![
        ConstantEntry { symbol: "C13", value: c13, required_positive: true },
        ConstantEntry { symbol: "C14", value: c14, required_positive: true },
        ConstantEntry { symbol: "C15", value: c15, required_positive: true },
        ConstantEntry { symbol: "C16", value: c16, required_positive: true },
        ConstantEntry { symbol: "C17", value: c17, required_positive: true },
        ConstantEntry { symbol: "C18", value: c18, required_positive: true },
        ConstantEntry { symbol: "C19", value: c19, required_positive: true },
        ConstantEntry { symbol: "C20", value: c20, required_positive: true },
        ConstantEntry { symbol: "C21", value: c21, required_positive: true },
        ConstantEntry { symbol: "C22", value: c22, required_positive: true },
    ];
    let set = ConstantSet { regime: Regime::Supersolution, delta_used: None, entries };
    match set.first_nonpositive() {
        None => Ok(set),
        Some(bad) => Err(Error::NonPositiveConstant { symbol: bad.symbol, value: bad.value }),
    }
}

/// Geometry scales feeding the a ∈ [1, 2) table: both the sub-side (η′, ρ′)
/// and sup-side (η, ρ) quantities appear in the tilded family.
#[derive(Debug, Clone, Copy)]
pub struct Table3Geometry {
    pub eta: f64,
    pub eta_prime: f64,
    pub eps: f64,
    pub diam: f64,
    pub rho: f64,
    pub rho_prime: f64,
}

/// Table 3: the tilded constants for a ∈ [1, 2) (b > 1, ab > 2), with the
/// untilded cross-references they compose with.
pub fn table3_constants(
    a: f64,
    b: f64,
    delta: f64,
    geom: &Table3Geometry,
    p: &StructureParams,
) -> Result<ConstantSet> {
    check_regime(Regime::AIn12, a, b)?;
    p.validate()?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParams(format!("delta must lie in (0,1), got {delta}")));
    }
    let mut d = delta;
    for _ in 0..=20 {
        let set = table3_at_delta(a, b, d, geom, p)?;
        if set.all_positive() {
            return Ok(set);
        }
        d *= 0.5;
    }
    let set = table3_at_delta(a, b, d, geom, p)?;
    let bad = set.first_nonpositive().unwrap();
    Err(Error::NonPositiveConstant { symbol: bad.symbol, value: bad.value })
}

fn table3_at_delta(
    a: f64,
    b: f64,
    d: f64,
    geom: &Table3Geometry,
    p: &StructureParams,
) -> Result<ConstantSet> {
    let rows = sandwich_rows(Regime::AIn12, a, b, d, geom.diam);
    let (ct1, ct2, ct3) = (rows.c1, rows.c2, rows.c3);
    let ct4 = (2.0 / b).min(ct1 / ct3);
    let ct5 = 2.0 * (a * b - 2.0) / (a * a * b * b);
    let g = p.gamma;
    let n = p.n as f64;
    let vfac = 1.0 - 0.25f64.powf(2.0 / a);
    let ct6 = 4.0 * (1.0 / geom.rho_prime + 1.0).powi(2)
        * (1.0 + (2.0 * a * geom.eta_prime * geom.eps.powf(a - 1.0)).powi(2))
        * vfac.powf(2.0 - a).max(1.0);
    let ct7 = (2f64.powf(-g) * a.powf(g) * b.powf(g)).min(ct6.powf(-g / 2.0));
    let c8v = c8(a, geom.eta_prime, geom.eps, p.beta, n);
    let c19_exp = (p.alpha + (b - 1.0) * g + (1.0 - b) * p.s + (1.0 - a * b) * p.t) / b;
    let ct10 = p.amp.recip()
        * p.op_amp
        * ct4.powf(p.s)
        * ct5.powf(p.t)
        * ct7
        * c8v
        * 1f64.min(vfac.powf(c19_exp));
    let c11 = geom.diam.powf(xn_exponent(a, b, p));
    let ct12 = ct10 * c11;
    let ct16 = 16.0 / (a * a)
        * (1.0 / geom.rho + 1.0).powi(2)
        * (1.0 + (2.0 * a * geom.eta * geom.eps.powf(a - 1.0)).powi(2));
    let ct17 = (2f64.powf(-g) * a.powf(g) * b.powf(g)).max(ct16.powf(-g / 2.0));
    let c13 = 2.0 / b;
    let c14 = 2f64.powf(6.0 / a - 4.0)
        * ((n - 1.0) / b + 2.0 * (b - 1.0).abs() / (b * b))
        * geom.eta
        * geom.eta
        * geom.eps.powf(2.0 * a - 2.0)
        + (2.0 * (a - 2.0).abs() / (a * a * b) + 4.0 * (b - 1.0).abs() / (a * a * b * b));
    let e15 = p.beta - n - 1.0;
    let c15 =
        (2f64.powf(e15) * (1.0 + (a * geom.eta * geom.eps.powf(a - 1.0)).powi(2)).powf(e15 / 2.0)).max(1.0);
    let ct18 = p.amp.recip() * p.op_amp * c13.powf(p.s) * c14.powf(p.t) * c15 * ct17;
    let c19 = vfac.powf(c19_exp).max(1.0);
    let ct20 = ct18 * c19;
    let c21 = (0.25 * geom.eta * geom.eps.powf(a)).powf(xn_exponent(a, b, p));
    let ct22 = ct20 * c21;
    let entries = vec![
        ConstantEntry { symbol: "Ct1", value: ct1, required_positive: true },
        ConstantEntry { symbol: "Ct2", value: ct2, required_positive: true },
        ConstantEntry { symbol: "Ct3", value: ct3, required_positive: true },
        ConstantEntry { symbol: "Ct4", value: ct4, required_positive: true },
        ConstantEntry { symbol: "Ct5", value: ct5, required_positive: true },
        ConstantEntry { symbol: "Ct6", value: ct6, required_positive: true },
        ConstantEntry { symbol: "Ct7", value: ct7, required_positive: true },
        ConstantEntry { symbol: "C8", value: c8v, required_positive: true },
        ConstantEntry { symbol: "Ct10", value: ct10, required_positive: true },
        ConstantEntry { symbol: "C11", value: c11, required_positive: true },
        ConstantEntry { symbol: "Ct12", value: ct12, required_positive: true },
        ConstantEntry { symbol: "C13", value: c13, required_positive: true },
        ConstantEntry { symbol: "C14", value: c14, required_positive: true },
        ConstantEntry { symbol: "C15", value: c15, required_positive: true },
        ConstantEntry { symbol: "Ct16", value: ct16, required_positive: true },
        ConstantEntry { symbol: "Ct17", value: ct17, required_positive: true },
        ConstantEntry { symbol: "Ct18", value: ct18, required_positive: true },
        ConstantEntry { symbol: "C19", value: c19, required_positive: true },
        ConstantEntry { symbol: "Ct20", value: ct20, required_positive: true },
        ConstantEntry { symbol: "C21", value: c21, required_positive: true },
        ConstantEntry { symbol: "Ct22", value: ct22, required_positive: true },
    ];
    Ok(ConstantSet { regime: Regime::AIn12, delta_used: Some(d), entries })
}

/// Geometry of the region V for the ρ estimate.
#[derive(Debug, Clone, Copy)]
pub struct RegionVGeometry {
    pub a: f64,
    pub eta: f64,
    pub eps: f64,
}

impl RegionVGeometry {
    pub fn r_max(&self) -> f64 {
        0.25f64.powf(1.0 / self.a) * self.eps
    }

    pub fn lid(&self) -> f64 {
        0.25 * self.eta * self.eps.powf(self.a)
    }

    /// Distance from a local point to the lower boundary piece
    /// S = {xₙ = η|x′|^a, |x′| ≤ r_max}, by dense scan plus refinement.
    pub fn dist_to_s(&self, r: f64, x_n: f64) -> f64 {
        let rm = self.r_max();
        let f = |w: f64| -> f64 {
            let dy = x_n - self.eta * w.powf(self.a);
            let dx = r - w;
            (dx * dx + dy * dy).sqrt()
        };
        let coarse = 256;
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=coarse {
            let w = rm * i as f64 / coarse as f64;
            let v = f(w);
            if v < best.0 {
                best = (v, w);
            }
        }
        let (mut lo, mut hi) = ((best.1 - rm / coarse as f64).max(0.0), (best.1 + rm / coarse as f64).min(rm));
        for _ in 0..50 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if f(m1) <= f(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        f(0.5 * (lo + hi)).min(best.0)
    }
}

/// Largest ρ (times a 0.95 safety factor) with |W| ≥ ρ·dist(x, S) on a dense
/// grid of V.
pub fn estimate_rho(bp: &BarrierParams, region: &RegionVGeometry, grid: usize) -> Result<f64> {
    if grid < 2 {
        return Err(Error::EmptyRegion);
    }
    let rm = region.r_max();
    let lid = region.lid();
    if !(rm > 0.0) || !(lid > 0.0) {
        return Err(Error::EmptyRegion);
    }
    let mut min_ratio = f64::INFINITY;
    let mut count = 0usize;
    for i in 0..grid {
        let r = rm * i as f64 / grid as f64;
        let floor = region.eta * r.powf(region.a);
        if floor >= lid {
            continue;
        }
        for j in 1..grid {
            let x_n = floor + (lid - floor) * j as f64 / grid as f64;
            let be = match eval_barrier(r, x_n, bp) {
                Ok(v) => v,
                Err(_) => continue,
            };
            let d = region.dist_to_s(r, x_n);
            if d <= 0.0 {
                continue;
            }
            min_ratio = min_ratio.min(be.w.abs() / d);
            count += 1;
        }
    }
    if count < 2 || !min_ratio.is_finite() {
        return Err(Error::EmptyRegion);
    }
    Ok(0.95 * min_ratio)
}

/// Sampling layout for the appendix checks over the assumption-7 cone.
#[derive(Debug, Clone, Copy)]
pub struct SandwichGrid {
    pub nr: usize,
    pub nxn: usize,
    pub xn_lo: f64,
    pub xn_hi: f64,
}

impl SandwichGrid {
    pub fn new(nr: usize, nxn: usize, xn_lo: f64, xn_hi: f64) -> Self {
        Self { nr, nxn, xn_lo, xn_hi }
    }
}

/// Outcome of the appendix sandwich checks: worst relative decomposition
/// error and the minimum margins of every interval row (nonnegative margins
/// mean the row holds at all sampled points).
#[derive(Debug, Clone)]
pub struct SandwichReport {
    pub regime: Regime,
    pub points: usize,
    pub max_decomposition_rel_err: f64,
    pub margin_det_lower: f64,
    pub margin_det_upper: f64,
    pub margin_sum_upper: f64,
    pub margin_wrr_lower: f64,
    pub margin_wrr_upper: f64,
    pub margin_wnn_lower: f64,
    pub margin_wnn_upper: f64,
}

impl SandwichReport {
    pub fn pass(&self, decomp_tol: f64) -> bool {
        let slack = -1e-12;
        self.max_decomposition_rel_err <= decomp_tol
            && self.margin_det_lower >= slack
            && self.margin_det_upper >= slack
            && self.margin_sum_upper >= slack
            && self.margin_wrr_lower >= slack
            && self.margin_wrr_upper >= slack
            && self.margin_wnn_lower >= slack
            && self.margin_wnn_upper >= slack
    }
}

/// I₁, I₂, I₃ of the determinant decomposition
/// W_rr·W_nn − W_rn² = I₁ + I₂ + I₃ at a point of the barrier.
pub fn decomposition_terms(r: f64, x_n: f64, bp: &BarrierParams) -> Result<[f64; 3]> {
    let be = eval_barrier(r, x_n, bp)?;
    let w = be.w.abs();
    let (a, b, xi) = (bp.a, bp.b, bp.xi);
    let base = x_n / xi;
    let i1 = 8.0 * (a - 2.0) * (b - 1.0) / (a * a * b * b * b)
        * w.powf(2.0 - 3.0 * b)
        * base.powf(2.0 / a - 2.0)
        * r
        * r
        / (xi * xi);
    let i2 = 8.0 * (b - 1.0) / (a * a * b * b * b)
        * w.powf(2.0 - 3.0 * b)
        * base.powf(4.0 / a - 2.0)
        / (xi * xi);
    let i3 = 4.0 * (a - 2.0) / (a * a * b * b)
        * w.powf(2.0 - 2.0 * b)
        * base.powf(2.0 / a - 2.0)
        / (xi * xi);
    Ok([i1, i2, i3])
}

/// Verifies, over a grid of the assumption-7 cone, (i) the I₁+I₂+I₃
/// decomposition of W_rr·W_nn − W_rn², (ii) the C₁/C₂ sandwich and the C₃
/// upper bound of the regime and (iii) the W_rr and W_nn interval rows.
pub fn appendix_sandwich_check(
    bp: &BarrierParams,
    p: &StructureParams,
    regime: Regime,
    grid: &SandwichGrid,
) -> Result<SandwichReport> {
    check_regime(regime, bp.a, bp.b)?;
    if regime == Regime::Supersolution {
        return Err(Error::RegimeMismatch("sandwich checks are for the subsolution regimes".into()));
    }
    if bp.xi >= 1.0 {
        return Err(Error::InvalidParams(
            "the C3 bound requires xi < 1 (the subsolution scale)".into(),
        ));
    }
    p.validate()?;
    // diam enters C3 only through xn <= diam: the grid's top height serves.
    let rows = sandwich_rows(regime, bp.a, bp.b, bp.delta, grid.xn_hi);
    let (a, b, xi) = (bp.a, bp.b, bp.xi);
    let mut rep = SandwichReport {
        regime,
        points: 0,
        max_decomposition_rel_err: 0.0,
        margin_det_lower: f64::INFINITY,
        margin_det_upper: f64::INFINITY,
        margin_sum_upper: f64::INFINITY,
        margin_wrr_lower: f64::INFINITY,
        margin_wrr_upper: f64::INFINITY,
        margin_wnn_lower: f64::INFINITY,
        margin_wnn_upper: f64::INFINITY,
    };
    for j in 0..grid.nxn {
        let x_n = grid.xn_lo + (grid.xn_hi - grid.xn_lo) * j as f64 / (grid.nxn - 1).max(1) as f64;
        if x_n <= 0.0 {
            continue;
        }
        let r_edge = (bp.delta.sqrt() * (x_n / xi).powf(1.0 / a)).min(1e12);
        for i in 0..grid.nr {
            let r = r_edge * i as f64 / (grid.nr - 1).max(1) as f64 * 0.999_999;
            let be = match eval_barrier(r, x_n, bp) {
                Ok(v) => v,
                Err(_) => continue,
            };
            let w = be.w.abs();
            let det2 = be.w_rr * be.w_nn - be.w_rn * be.w_rn;
            let terms = decomposition_terms(r, x_n, bp)?;
            let sum_i = terms[0] + terms[1] + terms[2];
            let scale = det2.abs().max(terms.iter().map(|t| t.abs()).sum());
            if scale > 0.0 {
                rep.max_decomposition_rel_err =
                    rep.max_decomposition_rel_err.max((sum_i - det2).abs() / scale);
            }
            let det_norm = det2 / (w.powf(2.0 - b - a * b) / (xi * xi));
            let sum_norm = (be.w_rr + be.w_nn) / (w.powf(1.0 - a * b) / (xi * xi));
            let wrr_norm = be.w_rr / w.powf(1.0 - b);
            let wnn_norm = be.w_nn / (w.powf(1.0 - a * b) / (xi * xi));
            rep.margin_det_lower = rep.margin_det_lower.min(det_norm - rows.c1);
            rep.margin_det_upper = rep.margin_det_upper.min(rows.c2 - det_norm);
            rep.margin_sum_upper = rep.margin_sum_upper.min(rows.c3 - sum_norm);
            rep.margin_wrr_lower = rep.margin_wrr_lower.min(wrr_norm - rows.wrr.0);
            rep.margin_wrr_upper = rep.margin_wrr_upper.min(rows.wrr.1 - wrr_norm);
            rep.margin_wnn_lower = rep.margin_wnn_lower.min(wnn_norm - rows.wnn.0);
            rep.margin_wnn_upper = rep.margin_wnn_upper.min(rows.wnn.1 - wnn_norm);
            rep.points += 1;
        }
    }
    if rep.points == 0 {
        return Err(Error::EmptyRegion);
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn p53() -> StructureParams {
        StructureParams::new(1.0, 4.0, 3.0, 0.0, 1.0, 1.0, 1.0, 2).unwrap()
    }

    #[test]
    fn c4_recomposition_and_small_delta_limit() {
        let set = table1_constants(2.0, 2.0, 1e-9, 4.0, 0.45, 0.99, &p53()).unwrap();
        let (c1, c3, c4) = (set.get("C1").unwrap(), set.get("C3").unwrap(), set.get("C4").unwrap());
        assert_eq!(c4, (2.0f64 / 2.0).min(c1 / c3));
        // delta -> 0, a = 2, b = 2: C1 -> 8(b-1)/(a^2 b^3) = 1/4.
        assert_relative_eq!(c1, 0.25, max_relative = 1e-6);
    }

    #[test]
    fn c8_is_one_when_beta_hits_n_plus_one() {
        // beta = n+1 makes the exponent zero.
        let set = table1_constants(2.0, 2.0, 0.1, 4.0, 0.45, 0.99, &p53()).unwrap();
        assert_eq!(set.get("C8").unwrap(), 1.0);
    }

    #[test]
    fn compositional_rows_recompute() {
        let p = StructureParams::new(1.3, 4.0, 3.4, 0.2, 2.0, 1.5, 0.7, 2).unwrap();
        let set = table1_constants(2.5, 1.8, 0.1, 3.0, 0.3, 0.9, &p).unwrap();
        let g = |s: &str| set.get(s).unwrap();
        let d = set.delta_used.unwrap();
        assert_eq!(g("C4"), (2.0f64 / 1.8).min(g("C1") / g("C3")));
        let c9 = 1.0 / 1.3 * 2.0 * g("C4").powf(1.5) * g("C5").powf(0.7) * g("C7") * g("C8");
        assert_relative_eq!(g("C9"), c9, max_relative = 1e-13);
        let c10_exp = 4.0 / 1.8 + (2.5 / 2.0 - 1.0 / 1.8) * 0.2 + (1.0 / 1.8 - 1.0) * 1.5
            + (1.0 / 1.8 - 2.5) * 0.7;
        assert_relative_eq!(
            g("C10"),
            g("C9") * 1f64.min((1.0 - d).powf(c10_exp)),
            max_relative = 1e-13
        );
        assert_relative_eq!(g("C12"), g("C10") * g("C11"), max_relative = 1e-13);
    }

    #[test]
    fn table2_rows() {
        let set = table2_constants(2.0, 2.0, 4.0, 0.45, &p53(), 0.5).unwrap();
        assert_eq!(set.get("C13").unwrap(), 1.0);
        // 5.3 parameters zero out the xn exponent, so C21 = 1.
        assert_eq!(set.get("C21").unwrap(), 1.0);
        let g = |s: &str| set.get(s).unwrap();
        assert_relative_eq!(g("C20"), g("C18") * g("C19"), max_relative = 1e-14);
        assert_relative_eq!(g("C22"), g("C20") * g("C21"), max_relative = 1e-14);
    }

    #[test]
    fn table3_regime_guard() {
        let geom = Table3Geometry {
            eta: 4.0,
            eta_prime: 4.0,
            eps: 0.3,
            diam: 0.9,
            rho: 0.5,
            rho_prime: 0.5,
        };
        // ab <= 2 rejected at construction.
        let p = p53();
        assert!(matches!(
            table3_constants(1.5, 1.2, 0.1, &geom, &p),
            Err(Error::RegimeMismatch(_))
        ));
        let set = table3_constants(1.5, 2.0, 0.6, &geom, &p).unwrap();
        // Ct5 = 2(ab-2)/(a^2 b^2) = 2/9.
        assert_relative_eq!(set.get("Ct5").unwrap(), 2.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn ct5_vanishes_at_ab_equals_two() {
        // Boundary of validity: ab = 2 gives Ct5 = 0, flagged non-positive.
        let rows_val = 2.0 * (1.25 * 1.6 - 2.0) / (1.25f64 * 1.25 * 1.6 * 1.6);
        assert_relative_eq!(rows_val, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn positivity_under_random_draws() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        let mut per_regime = [0usize; 3];
        for _ in 0..3000 {
            let n = 2u32;
            let alpha = rng.gen_range(1.0..6.0);
            let beta = n as f64 + 1.0 + rng.gen_range(0.0..0.8);
            let gamma = rng.gen_range(-0.5..0.5f64).min(beta - n as f64 - 1.0);
            let s = rng.gen_range(0.0..3.0);
            let t = rng.gen_range(0.0..2.0);
            let p = match StructureParams::new(1.0, alpha, beta, gamma, 1.0, s, t, n) {
                Ok(p) => p,
                Err(_) => continue,
            };
            if p.denom() <= 0.3 {
                continue;
            }
            let which = rng.gen_range(0..3usize);
            match which {
                0 => {
                    let a = rng.gen_range(2.0..5.0);
                    let b = rng.gen_range(1.01..4.0);
                    let set =
                        table1_constants(a, b, 0.1, rng.gen_range(1.0..8.0), rng.gen_range(0.1..0.5), 0.9, &p)
                            .unwrap();
                    assert!(set.all_positive());
                    per_regime[0] += 1;
                }
                1 => {
                    let a = rng.gen_range(2.0..5.0);
                    let b = rng.gen_range(0.05..4.0);
                    let set = table2_constants(
                        a,
                        b,
                        rng.gen_range(1.0..8.0),
                        rng.gen_range(0.1..0.5),
                        &p,
                        rng.gen_range(0.05..2.0),
                    )
                    .unwrap();
                    assert!(set.all_positive());
                    per_regime[1] += 1;
                }
                _ => {
                    let a = rng.gen_range(1.05..1.95);
                    let b = rng.gen_range(2.0 / a + 0.05..6.0);
                    let geom = Table3Geometry {
                        eta: rng.gen_range(1.0..8.0),
                        eta_prime: rng.gen_range(1.0..8.0),
                        eps: rng.gen_range(0.1..0.5),
                        diam: 0.9,
                        rho: rng.gen_range(0.05..2.0),
                        rho_prime: rng.gen_range(0.05..2.0),
                    };
                    if let Ok(set) = table3_constants(a, b, 0.1, &geom, &p) {
                        assert!(set.all_positive());
                        per_regime[2] += 1;
                    }
                }
            }
        }
        assert!(per_regime.iter().all(|&c| c > 300), "draw counts {per_regime:?}");
    }

    #[test]
    fn step12_needs_delta_shrink_but_succeeds() {
        // a=3, b=0.8 at a large starting delta: shrink drives C1 positive.
        let p = p53();
        let set = table1_constants(3.0, 0.8, 0.9, 4.0, 0.45, 0.9, &p).unwrap();
        assert!(set.all_positive());
        assert!(set.delta_used.unwrap() < 0.9);
    }

    #[test]
    fn rho_estimate_valid_on_fresh_samples() {
        let region = RegionVGeometry { a: 2.0, eta: 4.0, eps: 0.4 };
        let xi = (0.5f64).powf(2.0 / 2.0 - 1.0) * 4.0;
        let bp = BarrierParams::new(2.0, 2.0, xi, 0.5).unwrap();
        let rho = estimate_rho(&bp, &region, 64).unwrap();
        assert!(rho > 0.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        let rm = region.r_max();
        let lid = region.lid();
        let mut checked = 0usize;
        while checked < 100_000 {
            let r = rng.gen_range(0.0..rm);
            let floor = region.eta * r.powf(region.a);
            if floor >= lid {
                continue;
            }
            let x_n = rng.gen_range(floor..lid);
            if let Ok(be) = eval_barrier(r, x_n, &bp) {
                let d = region.dist_to_s(r, x_n);
                assert!(
                    be.w.abs() >= rho * d * (1.0 - 1e-9),
                    "violated at r={r}, x_n={x_n}: |W|={} < rho*d={}",
                    be.w.abs(),
                    rho * d
                );
                checked += 1;
            }
        }
        // Degenerate grid is an error.
        assert!(matches!(estimate_rho(&bp, &region, 1), Err(Error::EmptyRegion)));
    }

    #[test]
    fn decomposition_identity_and_b1_reduction() {
        let bp = BarrierParams::new(2.5, 1.0, 0.7, 0.3).unwrap();
        // b = 1: I1 = I2 = 0, det reduces to I3.
        let t = decomposition_terms(0.1, 0.5, &bp).unwrap();
        assert_eq!(t[0], 0.0);
        assert_eq!(t[1], 0.0);
        let be = eval_barrier(0.1, 0.5, &bp).unwrap();
        let det2 = be.w_rr * be.w_nn - be.w_rn * be.w_rn;
        assert_relative_eq!(det2, t[2], max_relative = 1e-12);
    }

    #[test]
    fn sandwich_margins_three_regimes() {
        let p = p53();
        // Step 1-1: a = 2, b = 2.
        let bp = BarrierParams::new(2.0, 2.0, 0.1, 0.1).unwrap();
        let grid = SandwichGrid::new(50, 50, 1e-3, 0.9);
        let rep = appendix_sandwich_check(&bp, &p, Regime::Step11, &grid).unwrap();
        assert!(rep.pass(1e-10), "{rep:?}");
        // Step 1-2: a = 3, b = 0.8.
        let bp = BarrierParams::new(3.0, 0.8, 0.1, 0.1).unwrap();
        let rep = appendix_sandwich_check(&bp, &p, Regime::Step12, &grid).unwrap();
        assert!(rep.pass(1e-10), "{rep:?}");
        // a in [1,2): a = 1.5, b = 2 (ab > 2) with delta large enough for
        // the printed Ct1 row.
        let bp = BarrierParams::new(1.5, 2.0, 0.1, 0.6).unwrap();
        let rep = appendix_sandwich_check(&bp, &p, Regime::AIn12, &grid).unwrap();
        assert!(rep.pass(1e-10), "{rep:?}");
        // Wrong regime pairing is rejected.
        assert!(matches!(
            appendix_sandwich_check(&bp, &p, Regime::Step12, &grid),
            Err(Error::RegimeMismatch(_))
        ));
    }
}
