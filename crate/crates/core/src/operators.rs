//! Nonlinear operators on Hessian eigenvalues, the structural right-hand-side
//! bound, the ratio H̃, and the convex/concave boundary-value envelopes.
//!
//! The convex envelope φ* of boundary data is the supremum of affine
//! minorants, i.e. the lower convex hull of the lifted boundary graph
//! {(x, φ(x))}; the concave envelope φ_* is its mirror image. The 2-D build
//! runs an exact incremental 3-D hull on the lifted samples.

use crate::barrier::EigenSet;
use crate::error::{Error, Result};
use crate::geometry::{ConvexDomain, Point2};
use crate::params::StructureParams;

/// F(λ) = B·λ_min^s·λ_max^t, the two-sided structural bound on the operator.
pub fn power_f(eigs: &EigenSet, amp: f64, s: f64, t: f64) -> Result<f64> {
    Ok(amp * signed_pow(eigs.lambda_min, s)? * signed_pow(eigs.lambda_max, t)?)
}

fn signed_pow(base: f64, e: f64) -> Result<f64> {
    if e == 0.0 {
        return Ok(1.0);
    }
    if base >= 0.0 {
        return Ok(base.powf(e));
    }
    if e.fract() == 0.0 && e.abs() < 1e15 {
        let sign = if (e as i64) % 2 == 0 { 1.0 } else { -1.0 };
        Ok(sign * (-base).powf(e))
    } else {
        Err(Error::NegativeEigenvalue { lambda: base, exponent: e })
    }
}

/// k-th elementary symmetric polynomial of the eigenvalue list.
pub fn sigma_k(eigs: &[f64], k: usize) -> Result<f64> {
    let n = eigs.len();
    if k == 0 || k > n {
        return Err(Error::KOutOfRange { k, n });
    }
    // Standard elementary-symmetric recurrence.
    let mut e = vec![0.0f64; k + 1];
    e[0] = 1.0;
    for &lam in eigs {
        for j in (1..=k).rev() {
            e[j] += lam * e[j - 1];
        }
    }
    Ok(e[k])
}

/// Operator handle used by H̃: anything that maps an eigenvalue set to F(λ).
pub trait EllipticOperator {
    fn apply(&self, eigs: &EigenSet) -> Result<f64>;
    fn name(&self) -> &'static str;
}

/// B·λ_min^s·λ_max^t.
#[derive(Debug, Clone, Copy)]
pub struct PowerOperator {
    pub amp: f64,
    pub s: f64,
    pub t: f64,
}

impl EllipticOperator for PowerOperator {
    fn apply(&self, eigs: &EigenSet) -> Result<f64> {
        power_f(eigs, self.amp, self.s, self.t)
    }
    fn name(&self) -> &'static str {
        "power"
    }
}

/// σ_k(D²u); k = n is the Monge-Ampère determinant.
#[derive(Debug, Clone, Copy)]
pub struct SigmaKOperator {
    pub k: usize,
}

impl EllipticOperator for SigmaKOperator {
    fn apply(&self, eigs: &EigenSet) -> Result<f64> {
        sigma_k(&eigs.list(), self.k)
    }
    fn name(&self) -> &'static str {
        "sigma_k"
    }
}

/// Which side of the structural bound on f is meant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhsKind {
    /// (f₃): f ≤ A dist^(β−n−1)|z−φ*|^(−α)(1+|q−Dφ*|²)^(γ/2).
    UpperF3,
    /// (f₃′): f ≥ A dist^(β−n−1)|z−φ_*|^(−α)(1+|q−Dφ_*|²)^(γ/2).
    LowerF3Prime,
}

/// The structural right-hand-side bound together with its envelope.
#[derive(Debug, Clone)]
pub struct RhsBound {
    pub kind: RhsKind,
    pub params: StructureParams,
    pub envelope: BoundaryEnvelope,
}

impl RhsBound {
    pub fn new(kind: RhsKind, params: StructureParams, envelope: BoundaryEnvelope) -> Result<Self> {
        let want = match kind {
            RhsKind::UpperF3 => EnvelopeKind::Convex,
            RhsKind::LowerF3Prime => EnvelopeKind::Concave,
        };
        if envelope.kind != want {
            return Err(Error::InvalidParams(format!(
                "{kind:?} needs a {want:?} envelope, got {:?}",
                envelope.kind
            )));
        }
        if kind == RhsKind::LowerF3Prime && params.amp == 0.0 {
            // A = 0 makes the supersolution test vacuous.
            return Err(Error::InvalidParams(
                "A = 0 makes the (f3') lower bound vacuous; supersolution runs need A > 0".into(),
            ));
        }
        Ok(Self { kind, params, envelope })
    }
}

fn dist_power(dist: f64, e: f64) -> Result<f64> {
    if e == 0.0 {
        Ok(1.0)
    } else if dist > 0.0 {
        Ok(dist.powf(e))
    } else if e > 0.0 {
        Ok(0.0)
    } else {
        Err(Error::BoundaryPoint)
    }
}

/// A·dist^(β−n−1)·|z−φ(x)|^(−α)·(1+|q−Dφ(x)|²)^(γ/2) with φ the envelope.
pub fn f_bound(x: Point2, z: f64, grad: Point2, rb: &RhsBound, dist: f64) -> Result<f64> {
    let p = &rb.params;
    let d_term = dist_power(dist, p.beta - p.n as f64 - 1.0)?;
    let phi = rb.envelope.eval(x);
    let dz = (z - phi).abs();
    let z_term = if dz > 0.0 {
        dz.powf(-p.alpha)
    } else if p.alpha > 0.0 {
        return Err(Error::ZeroDenominator);
    } else if p.alpha == 0.0 {
        1.0
    } else {
        0.0
    };
    let dphi = rb.envelope.gradient(x);
    let qd = [grad[0] - dphi[0], grad[1] - dphi[1]];
    let g_term = (1.0 + qd[0] * qd[0] + qd[1] * qd[1]).powf(p.gamma / 2.0);
    Ok(p.amp * d_term * z_term * g_term)
}

/// H̃ = F(λ(D²W)) / f_bound(x, W, DW).
///
/// Subsolution test: H̃ ≥ 1. Supersolution test: H̃ ≤ 1. A vanishing bound
/// (possible when A·dist-power degenerates) yields +∞, which is the correct
/// subsolution-side limit.
pub fn h_tilde(
    es: &EigenSet,
    z: f64,
    grad: Point2,
    x: Point2,
    dist: f64,
    rb: &RhsBound,
    op: &dyn EllipticOperator,
) -> Result<f64> {
    let f = f_bound(x, z, grad, rb, dist)?;
    let num = op.apply(es)?;
    if f == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(num / f)
}

/// Convex (φ*) or concave (φ_*) envelope of boundary data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeKind {
    Convex,
    Concave,
}

#[derive(Debug, Clone)]
struct Facet {
    tri: [Point2; 3],
    /// v = c0 + c1·x + c2·y on the facet (convex orientation).
    plane: [f64; 3],
}

/// Piecewise-linear envelope evaluator over the closed domain.
#[derive(Debug, Clone)]
pub struct BoundaryEnvelope {
    pub kind: EnvelopeKind,
    samples: Vec<(Point2, f64)>,
    /// Exact plane when the data is affine (values in original orientation).
    plane: Option<[f64; 3]>,
    facets: Vec<Facet>,
    centroid: Point2,
    scale: f64,
}

/// φ* = sup of affine minorants of the boundary data.
pub fn convex_envelope(samples: &[(Point2, f64)], dom: &ConvexDomain) -> Result<BoundaryEnvelope> {
    build_envelope(samples, dom, EnvelopeKind::Convex)
}

/// φ_* = inf of affine majorants of the boundary data.
pub fn concave_envelope(samples: &[(Point2, f64)], dom: &ConvexDomain) -> Result<BoundaryEnvelope> {
    build_envelope(samples, dom, EnvelopeKind::Concave)
}

fn build_envelope(
    samples: &[(Point2, f64)],
    dom: &ConvexDomain,
    kind: EnvelopeKind,
) -> Result<BoundaryEnvelope> {
    if dom.dim() != 2 {
        return Err(Error::InvalidParams("envelopes are built for 2-D domains".into()));
    }
    if samples.len() < 3 {
        return Err(Error::InsufficientSamples { needed: 3, got: samples.len() });
    }
    let c = dom.centroid();
    let centroid = [c[0], c[1]];
    let scale = samples
        .iter()
        .map(|(p, v)| p[0].abs().max(p[1].abs()).max(v.abs()))
        .fold(1.0f64, f64::max);

    // Affine data is its own envelope; detect it exactly and skip the hull.
    if let Some(plane) = fit_plane(samples, 1e-9 * scale) {
        return Ok(BoundaryEnvelope {
            kind,
            samples: samples.to_vec(),
            plane: Some(plane),
            facets: Vec::new(),
            centroid,
            scale,
        });
    }

    let sign = match kind {
        EnvelopeKind::Convex => 1.0,
        EnvelopeKind::Concave => -1.0,
    };
    let lifted: Vec<[f64; 3]> =
        samples.iter().map(|(p, v)| [p[0], p[1], sign * v]).collect();
    let facets = lower_hull_facets(&lifted, 1e-12 * scale)?;
    Ok(BoundaryEnvelope {
        kind,
        samples: samples.to_vec(),
        plane: None,
        facets,
        centroid,
        scale,
    })
}

impl BoundaryEnvelope {
    /// Envelope that is exactly the affine function c0 + c1·x + c2·y
    /// (constant boundary data, and the zero envelope of the H̃ ratio).
    pub fn affine(kind: EnvelopeKind, coeffs: [f64; 3]) -> Self {
        Self {
            kind,
            samples: Vec::new(),
            plane: Some(coeffs),
            facets: Vec::new(),
            centroid: [0.0, 0.0],
            scale: 1.0,
        }
    }

    fn sign(&self) -> f64 {
        match self.kind {
            EnvelopeKind::Convex => 1.0,
            EnvelopeKind::Concave => -1.0,
        }
    }

    /// Envelope value at a point of the closed domain.
    pub fn eval(&self, q: Point2) -> f64 {
        if let Some(p) = self.plane {
            return p[0] + p[1] * q[0] + p[2] * q[1];
        }
        self.sign() * self.hull_value(q).0
    }

    /// Gradient of the active facet. At facet boundaries the facet hit after a
    /// tiny nudge toward the domain centroid is used.
    pub fn gradient(&self, q: Point2) -> Point2 {
        if let Some(p) = self.plane {
            return [p[1], p[2]];
        }
        let d = [self.centroid[0] - q[0], self.centroid[1] - q[1]];
        let l = d[0].hypot(d[1]).max(1e-30);
        let step = 1e-9 * self.scale;
        let qq = [q[0] + step * d[0] / l, q[1] + step * d[1] / l];
        let (_, grad) = self.hull_value(qq);
        [self.sign() * grad[0], self.sign() * grad[1]]
    }

    /// Lower-hull value and facet gradient (convex orientation).
    fn hull_value(&self, q: Point2) -> (f64, Point2) {
        let eps = 1e-9 * self.scale;
        let mut best: Option<(f64, Point2)> = None;
        let mut nearest = (f64::INFINITY, 0.0, [0.0, 0.0]);
        for f in &self.facets {
            let v = f.plane[0] + f.plane[1] * q[0] + f.plane[2] * q[1];
            let d = tri_containment_defect(&f.tri, q);
            if d <= eps {
                // Among facets containing q (ties on shared edges), the lower
                // hull is the pointwise minimum.
                if best.map_or(true, |(bv, _)| v < bv) {
                    best = Some((v, [f.plane[1], f.plane[2]]));
                }
            }
            if d < nearest.0 {
                nearest = (d, v, [f.plane[1], f.plane[2]]);
            }
        }
        best.unwrap_or((nearest.1, nearest.2))
    }

    /// Max over samples of (envelope − value) on the minorant side; a correct
    /// convex envelope satisfies envelope ≤ value with equality on hull
    /// vertices. Used by tests and validation.
    pub fn max_violation(&self) -> f64 {
        self.samples
            .iter()
            .map(|(p, v)| self.sign() * (self.eval(*p) - v))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Signed containment defect: 0 inside, positive outside (max of the three
/// outward half-plane excesses, normalized by edge length).
fn tri_containment_defect(tri: &[Point2; 3], q: Point2) -> f64 {
    let mut defect = f64::NEG_INFINITY;
    for i in 0..3 {
        let (a, b) = (tri[i], tri[(i + 1) % 3]);
        let e = [b[0] - a[0], b[1] - a[1]];
        let l = e[0].hypot(e[1]).max(1e-30);
        // Positive cross = q left of a->b; triangle orientation handled below.
        let c = (e[0] * (q[1] - a[1]) - e[1] * (q[0] - a[0])) / l;
        defect = defect.max(-c);
    }
    // If tri is CW, all interior crosses are negative; flip.
    let area2 = (tri[1][0] - tri[0][0]) * (tri[2][1] - tri[0][1])
        - (tri[1][1] - tri[0][1]) * (tri[2][0] - tri[0][0]);
    if area2 < 0.0 {
        let mut d2 = f64::NEG_INFINITY;
        for i in 0..3 {
            let (a, b) = (tri[i], tri[(i + 1) % 3]);
            let e = [b[0] - a[0], b[1] - a[1]];
            let l = e[0].hypot(e[1]).max(1e-30);
            let c = (e[0] * (q[1] - a[1]) - e[1] * (q[0] - a[0])) / l;
            d2 = d2.max(c);
        }
        d2
    } else {
        defect
    }
}

fn fit_plane(samples: &[(Point2, f64)], tol: f64) -> Option<[f64; 3]> {
    // Least-squares plane through (x, y, v) via 3x3 normal equations.
    let mut m = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for (p, v) in samples {
        let row = [1.0, p[0], p[1]];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += row[i] * row[j];
            }
            rhs[i] += row[i] * v;
        }
    }
    let c = solve3(m, rhs)?;
    let worst = samples
        .iter()
        .map(|(p, v)| (c[0] + c[1] * p[0] + c[2] * p[1] - v).abs())
        .fold(0.0f64, f64::max);
    (worst <= tol).then_some(c)
}

fn solve3(mut m: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-14 {
            return None;
        }
        m.swap(col, piv);
        b.swap(col, piv);
        for row in 0..3 {
            if row == col {
                continue;
            }
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    Some([b[0] / m[0][0], b[1] / m[1][1], b[2] / m[2][2]])
}

/// Incremental 3-D convex hull restricted to its downward-facing facets,
/// returned as projected triangles with their plane functions.
fn lower_hull_facets(pts: &[[f64; 3]], eps: f64) -> Result<Vec<Facet>> {
    #[derive(Clone)]
    struct Face {
        v: [usize; 3],
        normal: [f64; 3],
        offset: f64,
        alive: bool,
    }

    fn minus(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
        [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
    }
    fn crossp(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
        [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
    }
    fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
    }

    let n = pts.len();
    if n < 4 {
        return Err(Error::InsufficientSamples { needed: 4, got: n });
    }

    // Non-degenerate starting tetrahedron.
    let i0 = 0usize;
    let i1 = (0..n)
        .max_by(|&a, &b| {
            let da = dot(minus(pts[a], pts[i0]), minus(pts[a], pts[i0]));
            let db = dot(minus(pts[b], pts[i0]), minus(pts[b], pts[i0]));
            da.total_cmp(&db)
        })
        .unwrap();
    let e01 = minus(pts[i1], pts[i0]);
    let i2 = (0..n)
        .max_by(|&a, &b| {
            let ca = crossp(e01, minus(pts[a], pts[i0]));
            let cb = crossp(e01, minus(pts[b], pts[i0]));
            dot(ca, ca).total_cmp(&dot(cb, cb))
        })
        .unwrap();
    let nrm = crossp(e01, minus(pts[i2], pts[i0]));
    let i3 = (0..n)
        .max_by(|&a, &b| {
            let da = dot(nrm, minus(pts[a], pts[i0])).abs();
            let db = dot(nrm, minus(pts[b], pts[i0])).abs();
            da.total_cmp(&db)
        })
        .unwrap();
    if dot(nrm, minus(pts[i3], pts[i0])).abs() <= eps {
        return Err(Error::NonConvexDomain("lifted samples are coplanar".into()));
    }

    let inner = {
        let mut c = [0.0; 3];
        for &i in &[i0, i1, i2, i3] {
            for k in 0..3 {
                c[k] += pts[i][k] / 4.0;
            }
        }
        c
    };

    let mut faces: Vec<Face> = Vec::new();
    let push_face = |faces: &mut Vec<Face>, v: [usize; 3]| {
        let mut normal = crossp(minus(pts[v[1]], pts[v[0]]), minus(pts[v[2]], pts[v[0]]));
        let mut offset = dot(normal, pts[v[0]]);
        if dot(normal, inner) > offset {
            normal = [-normal[0], -normal[1], -normal[2]];
            offset = -offset;
        }
        faces.push(Face { v, normal, offset, alive: true });
    };
    for v in [[i0, i1, i2], [i0, i1, i3], [i0, i2, i3], [i1, i2, i3]] {
        push_face(&mut faces, v);
    }

    for p in 0..n {
        if [i0, i1, i2, i3].contains(&p) {
            continue;
        }
        let visible: Vec<usize> = faces
            .iter()
            .enumerate()
            .filter(|(_, f)| f.alive && dot(f.normal, pts[p]) > f.offset + eps * nscale(f.normal))
            .map(|(i, _)| i)
            .collect();
        if visible.is_empty() {
            continue;
        }
        // Horizon = undirected edges of visible faces seen exactly once.
        // BTreeMap keeps face creation order deterministic across runs.
        let mut edge_count: std::collections::BTreeMap<(usize, usize), usize> =
            std::collections::BTreeMap::new();
        for &fi in &visible {
            let v = faces[fi].v;
            for (a, b) in [(v[0], v[1]), (v[1], v[2]), (v[2], v[0])] {
                let key = (a.min(b), a.max(b));
                *edge_count.entry(key).or_insert(0) += 1;
            }
        }
        for &fi in &visible {
            faces[fi].alive = false;
        }
        for ((a, b), cnt) in edge_count {
            if cnt == 1 {
                push_face(&mut faces, [a, b, p]);
            }
        }
    }

    fn nscale(nrm: [f64; 3]) -> f64 {
        (nrm[0].abs() + nrm[1].abs() + nrm[2].abs()).max(1e-30)
    }

    let mut out = Vec::new();
    for f in faces.into_iter().filter(|f| f.alive) {
        if f.normal[2] >= -1e-12 * nscale(f.normal) {
            continue;
        }
        // normal . (x, y, v) = offset  =>  v = (offset - nx x - ny y)/nz.
        let plane = [
            f.offset / f.normal[2],
            -f.normal[0] / f.normal[2],
            -f.normal[1] / f.normal[2],
        ];
        out.push(Facet {
            tri: [
                [pts[f.v[0]][0], pts[f.v[0]][1]],
                [pts[f.v[1]][0], pts[f.v[1]][1]],
                [pts[f.v[2]][0], pts[f.v[2]][1]],
            ],
            plane,
        });
    }
    if out.is_empty() {
        return Err(Error::NonConvexDomain("no downward hull facets".into()));
    }
    Ok(out)
}

/// Boundary samples from CSV text. Two columns (t, φ) parametrize the domain
/// boundary; three columns are (x, y, φ) directly.
pub fn boundary_samples_from_csv(text: &str, dom: &ConvexDomain) -> Result<Vec<(Point2, f64)>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::InvalidParams(format!("bad number {s:?} on line {}", lineno + 1)))
        };
        match cols.len() {
            2 => {
                if lineno == 0 && cols[0].parse::<f64>().is_err() {
                    continue; // header row
                }
                let t = parse(cols[0])?;
                out.push((dom.boundary_point(t), parse(cols[1])?));
            }
            3 => {
                if lineno == 0 && cols[0].parse::<f64>().is_err() {
                    continue;
                }
                out.push(([parse(cols[0])?, parse(cols[1])?], parse(cols[2])?));
            }
            _ => {
                return Err(Error::InvalidParams(format!(
                    "expected 2 or 3 CSV columns, got {} on line {}",
                    cols.len(),
                    lineno + 1
                )))
            }
        }
    }
    if out.len() < 3 {
        return Err(Error::InsufficientSamples { needed: 3, got: out.len() });
    }
    Ok(out)
}
