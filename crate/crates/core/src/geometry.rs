//! Convex domains, boundary convexity certificates, the subdomains V, V′, V₀,
//! Ṽ, the chord region Ω_{1/2,P} and the domain-ratio bounds.
//!
//! All classification work is 2-D (polygons and disks); balls in higher
//! dimension are supported where only norms are needed (membership, distance).

use crate::error::{Error, Result};

pub type Point2 = [f64; 2];

fn sub(a: Point2, b: Point2) -> Point2 {
    [a[0] - b[0], a[1] - b[1]]
}

fn norm(a: Point2) -> f64 {
    a[0].hypot(a[1])
}

fn dist2(a: Point2, b: Point2) -> f64 {
    norm(sub(a, b))
}

fn cross(o: Point2, a: Point2, b: Point2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Bounded convex domain: a CCW convex polygon or an n-ball.
#[derive(Debug, Clone)]
pub enum ConvexDomain {
    Polygon2d { vertices: Vec<Point2> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl ConvexDomain {
    pub fn polygon(vertices: Vec<Point2>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InsufficientSamples { needed: 3, got: vertices.len() });
        }
        let n = vertices.len();
        let area2: f64 = (0..n)
            .map(|i| {
                let (p, q) = (vertices[i], vertices[(i + 1) % n]);
                p[0] * q[1] - q[0] * p[1]
            })
            .sum();
        if area2 <= 0.0 {
            return Err(Error::NonConvexDomain("vertex list must be CCW with positive area".into()));
        }
        let scale = vertices.iter().map(|v| norm(*v)).fold(0.0f64, f64::max).max(1.0);
        for i in 0..n {
            let c = cross(vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
            if c < -1e-12 * scale * scale {
                return Err(Error::NonConvexDomain(format!("reflex corner at vertex {}", (i + 1) % n)));
            }
        }
        Ok(Self::Polygon2d { vertices })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.len() < 2 {
            return Err(Error::InvalidParams("ball center must have dimension >= 2".into()));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParams(format!("ball radius must be > 0, got {radius}")));
        }
        Ok(Self::Ball { center, radius })
    }

    pub fn disk(center: Point2, radius: f64) -> Result<Self> {
        Self::ball(center.to_vec(), radius)
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Polygon2d { .. } => 2,
            Self::Ball { center, .. } => center.len(),
        }
    }

    pub fn diam(&self) -> f64 {
        match self {
            Self::Polygon2d { vertices } => {
                let mut d = 0.0f64;
                for (i, p) in vertices.iter().enumerate() {
                    for q in vertices.iter().skip(i + 1) {
                        d = d.max(dist2(*p, *q));
                    }
                }
                d
            }
            Self::Ball { radius, .. } => 2.0 * radius,
        }
    }

    /// Uniform rescale about the centroid so that diam < 1. Opt-in; domains
    /// already satisfying the bound are returned unchanged.
    pub fn normalized_to_unit_diam(&self) -> (Self, f64) {
        let d = self.diam();
        if d < 1.0 {
            return (self.clone(), 1.0);
        }
        let s = 0.99 / d;
        let c = self.centroid();
        let dom = match self {
            Self::Polygon2d { vertices } => Self::Polygon2d {
                vertices: vertices
                    .iter()
                    .map(|v| [c[0] + s * (v[0] - c[0]), c[1] + s * (v[1] - c[1])])
                    .collect(),
            },
            Self::Ball { center, radius } => {
                Self::Ball { center: center.clone(), radius: radius * s }
            }
        };
        (dom, s)
    }

    pub fn centroid(&self) -> Vec<f64> {
        match self {
            Self::Polygon2d { vertices } => {
                let n = vertices.len() as f64;
                let (mut x, mut y) = (0.0, 0.0);
                for v in vertices {
                    x += v[0];
                    y += v[1];
                }
                vec![x / n, y / n]
            }
            Self::Ball { center, .. } => center.clone(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Self::Polygon2d { vertices } => {
                let p = [x[0], x[1]];
                let n = vertices.len();
                (0..n).all(|i| cross(vertices[i], vertices[(i + 1) % n], p) >= -1e-12)
            }
            Self::Ball { center, radius } => {
                let d2: f64 = center.iter().zip(x).map(|(c, v)| (v - c) * (v - c)).sum();
                d2 <= radius * radius * (1.0 + 1e-12)
            }
        }
    }

    /// Unsigned distance from x to the boundary.
    pub fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        match self {
            Self::Polygon2d { vertices } => {
                let p = [x[0], x[1]];
                let n = vertices.len();
                (0..n)
                    .map(|i| segment_distance(vertices[i], vertices[(i + 1) % n], p))
                    .fold(f64::INFINITY, f64::min)
            }
            Self::Ball { center, radius } => {
                let d: f64 =
                    center.iter().zip(x).map(|(c, v)| (v - c) * (v - c)).sum::<f64>().sqrt();
                (radius - d).abs()
            }
        }
    }

    pub fn project_to_boundary(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Self::Polygon2d { vertices } => {
                let p = [x[0], x[1]];
                let n = vertices.len();
                let mut best = (f64::INFINITY, p);
                for i in 0..n {
                    let q = closest_on_segment(vertices[i], vertices[(i + 1) % n], p);
                    let d = dist2(q, p);
                    if d < best.0 {
                        best = (d, q);
                    }
                }
                vec![best.1[0], best.1[1]]
            }
            Self::Ball { center, radius } => {
                let mut v: Vec<f64> = x.iter().zip(center).map(|(a, c)| a - c).collect();
                let d = v.iter().map(|t| t * t).sum::<f64>().sqrt();
                if d < 1e-300 {
                    v = vec![0.0; center.len()];
                    v[0] = 1.0;
                    return center.iter().zip(&v).map(|(c, t)| c + radius * t).collect();
                }
                center.iter().zip(&v).map(|(c, t)| c + radius * t / d).collect()
            }
        }
    }

    /// Boundary point at parameter t ∈ [0, 1), CCW (2-D domains only).
    pub fn boundary_point(&self, t: f64) -> Point2 {
        let t = t.rem_euclid(1.0);
        match self {
            Self::Polygon2d { vertices } => {
                let n = vertices.len();
                let per: f64 =
                    (0..n).map(|i| dist2(vertices[i], vertices[(i + 1) % n])).sum();
                let mut s = t * per;
                for i in 0..n {
                    let (p, q) = (vertices[i], vertices[(i + 1) % n]);
                    let l = dist2(p, q);
                    if s <= l || i == n - 1 {
                        let u = (s / l).clamp(0.0, 1.0);
                        return [p[0] + u * (q[0] - p[0]), p[1] + u * (q[1] - p[1])];
                    }
                    s -= l;
                }
                vertices[0]
            }
            Self::Ball { center, radius } => {
                let ang = 2.0 * std::f64::consts::PI * t;
                [center[0] + radius * ang.cos(), center[1] + radius * ang.sin()]
            }
        }
    }

    pub fn boundary_samples(&self, k: usize) -> Vec<Point2> {
        (0..k).map(|i| self.boundary_point(i as f64 / k as f64)).collect()
    }

    /// Inverse of `boundary_point` for a point on (or near) the boundary.
    pub fn boundary_param(&self, p: Point2) -> f64 {
        match self {
            Self::Ball { center, .. } => {
                let ang = (p[1] - center[1]).atan2(p[0] - center[0]);
                (ang / (2.0 * std::f64::consts::PI)).rem_euclid(1.0)
            }
            Self::Polygon2d { vertices } => {
                let n = vertices.len();
                let per: f64 = (0..n).map(|i| dist2(vertices[i], vertices[(i + 1) % n])).sum();
                let mut best = (f64::INFINITY, 0.0);
                let mut acc = 0.0;
                for i in 0..n {
                    let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                    let q = closest_on_segment(a, b, p);
                    let d = dist2(q, p);
                    if d < best.0 {
                        best = (d, (acc + dist2(a, q)) / per);
                    }
                    acc += dist2(a, b);
                }
                best.1
            }
        }
    }

    /// Axis-aligned bounding box (2-D domains).
    pub fn bbox(&self) -> (Point2, Point2) {
        match self {
            Self::Polygon2d { vertices } => {
                let mut lo = [f64::INFINITY, f64::INFINITY];
                let mut hi = [f64::NEG_INFINITY, f64::NEG_INFINITY];
                for v in vertices {
                    for k in 0..2 {
                        lo[k] = lo[k].min(v[k]);
                        hi[k] = hi[k].max(v[k]);
                    }
                }
                (lo, hi)
            }
            Self::Ball { center, radius } => (
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            ),
        }
    }

    /// Inward unit normal at a boundary point (2-D). At polygon vertices the
    /// bisector of the adjacent edge normals is used.
    pub fn inward_normal(&self, p: Point2) -> Result<Point2> {
        let tol = 1e-9 * self.diam().max(1.0);
        if self.distance_to_boundary(&p) > tol {
            return Err(Error::NotOnBoundary(self.distance_to_boundary(&p)));
        }
        match self {
            Self::Ball { center, .. } => {
                let v = [center[0] - p[0], center[1] - p[1]];
                let d = norm(v);
                Ok([v[0] / d, v[1] / d])
            }
            Self::Polygon2d { vertices } => {
                let n = vertices.len();
                let mut acc = [0.0, 0.0];
                for i in 0..n {
                    let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                    if segment_distance(a, b, p) <= tol {
                        let e = sub(b, a);
                        let l = norm(e);
                        // CCW polygon: inward normal is the left-hand normal.
                        acc[0] += -e[1] / l;
                        acc[1] += e[0] / l;
                    }
                }
                let l = norm(acc);
                if l < 1e-12 {
                    return Err(Error::NotOnBoundary(0.0));
                }
                Ok([acc[0] / l, acc[1] / l])
            }
        }
    }
}

fn closest_on_segment(a: Point2, b: Point2, p: Point2) -> Point2 {
    let ab = sub(b, a);
    let l2 = ab[0] * ab[0] + ab[1] * ab[1];
    if l2 < 1e-300 {
        return a;
    }
    let t = (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / l2).clamp(0.0, 1.0);
    [a[0] + t * ab[0], a[1] + t * ab[1]]
}

fn segment_distance(a: Point2, b: Point2, p: Point2) -> f64 {
    dist2(closest_on_segment(a, b, p), p)
}

/// Local frame at a boundary point: origin P, x′ along the tangent, xₙ along
/// the inward normal.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub origin: Point2,
    pub tangent: Point2,
    pub normal: Point2,
}

impl Frame {
    pub fn at(dom: &ConvexDomain, p: Point2) -> Result<Self> {
        let normal = dom.inward_normal(p)?;
        Ok(Self { origin: p, tangent: [normal[1], -normal[0]], normal })
    }

    /// World → (x′, xₙ).
    pub fn to_local(&self, w: Point2) -> Point2 {
        let d = sub(w, self.origin);
        [d[0] * self.tangent[0] + d[1] * self.tangent[1], d[0] * self.normal[0] + d[1] * self.normal[1]]
    }

    /// (x′, xₙ) → world.
    pub fn to_world(&self, l: Point2) -> Point2 {
        [
            self.origin[0] + l[0] * self.tangent[0] + l[1] * self.normal[0],
            self.origin[1] + l[0] * self.tangent[1] + l[1] * self.normal[1],
        ]
    }
}

/// Exterior-(a, η) or interior-(a, η, ε) certificate at a boundary point.
#[derive(Debug, Clone)]
pub struct BoundaryTypeCert {
    pub kind: CertKind,
    pub point: Point2,
    pub a: f64,
    pub eta: f64,
    pub eps: Option<f64>,
    /// Interior region half-width (the independent width constant of the
    /// interior-type definition). Set to the largest admissible value ε.
    pub width: Option<f64>,
    pub frame: Frame,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertKind {
    Exterior,
    Interior,
}

impl BoundaryTypeCert {
    pub fn eps(&self) -> f64 {
        self.eps.unwrap_or(f64::NAN)
    }

    /// ηε^a, the invariant C_{η,ε} of the interior family.
    pub fn c_eta_eps(&self) -> f64 {
        self.eta * self.eps().powf(self.a)
    }
}

/// Classifies P as exterior-(a, η) or interior-(a, η, ε) with the best η
/// found on a sampled search, validated on a 4x denser sample.
pub fn classify_boundary_point(
    dom: &ConvexDomain,
    p: Point2,
    kind: CertKind,
    a: f64,
) -> Result<BoundaryTypeCert> {
    if dom.dim() != 2 {
        return Err(Error::InvalidParams("classification is implemented for 2-D domains".into()));
    }
    if !(a >= 1.0) {
        return Err(Error::InvalidParams(format!("a must be >= 1, got {a}")));
    }
    let frame = Frame::at(dom, p)?;
    match kind {
        CertKind::Exterior => {
            let eta = best_exterior_eta(dom, &frame, a, 2048)?;
            let cert = BoundaryTypeCert { kind, point: p, a, eta, eps: None, width: None, frame };
            validate_exterior(dom, &cert, 8192)?;
            Ok(cert)
        }
        CertKind::Interior => {
            // Scan the lid constant C = eta eps^a downward; for each C bisect
            // the smallest feasible eta (larger eta shrinks the region within
            // the fixed-lid family, so feasibility is monotone in eta).
            let height = domain_height(dom, &frame);
            if height <= 0.0 {
                return Err(Error::NoCertificate("domain has no interior above P".into()));
            }
            for k in 0..16 {
                let c = 1.6 * height / 1.7f64.powi(k);
                if let Some((eta, eps)) = smallest_interior_eta(dom, &frame, a, c) {
                    let cert = BoundaryTypeCert {
                        kind,
                        point: p,
                        a,
                        eta,
                        eps: Some(eps),
                        width: Some(eps),
                        frame,
                    };
                    if validate_interior(dom, &cert, 128).is_ok() {
                        return Ok(cert);
                    }
                }
            }
            Err(Error::NoCertificate("no interior-(a, eta, eps) region fits".into()))
        }
    }
}

/// Interior certificate for a prescribed η (the supersolution side wants η
/// large with ηε^a controlled): finds the largest ε that fits and validates.
pub fn interior_cert_with_eta(
    dom: &ConvexDomain,
    p: Point2,
    a: f64,
    eta: f64,
) -> Result<BoundaryTypeCert> {
    let frame = Frame::at(dom, p)?;
    let diam = dom.diam();
    let (mut lo, mut hi) = (0.0f64, 2.0 * diam);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if interior_region_fits(dom, &frame, a, eta, mid, 96) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo <= 1e-9 * diam {
        return Err(Error::NoCertificate(format!("no interior region fits for eta = {eta}")));
    }
    let eps = lo * 0.98;
    let cert = BoundaryTypeCert {
        kind: CertKind::Interior,
        point: p,
        a,
        eta,
        eps: Some(eps),
        width: Some(eps),
        frame,
    };
    validate_interior(dom, &cert, 128)?;
    Ok(cert)
}

fn best_exterior_eta(dom: &ConvexDomain, frame: &Frame, a: f64, k: usize) -> Result<f64> {
    let scale = dom.diam();
    let mut eta = f64::INFINITY;
    for q in dom.boundary_samples(k) {
        let l = frame.to_local(q);
        let w = l[0].abs();
        if w < 1e-7 * scale {
            continue;
        }
        if l[1] < -1e-9 * scale {
            return Err(Error::NoCertificate("boundary leaves the upper half-space at P".into()));
        }
        eta = eta.min(l[1].max(0.0) / w.powf(a));
    }
    if !eta.is_finite() || eta <= 1e-12 {
        return Err(Error::NoCertificate(format!("sup eta vanishes for a = {a}")));
    }
    Ok(eta * (1.0 - 1e-6))
}

fn validate_exterior(dom: &ConvexDomain, cert: &BoundaryTypeCert, k: usize) -> Result<()> {
    let scale = dom.diam();
    for q in dom.boundary_samples(k) {
        let l = cert.frame.to_local(q);
        if l[1] < cert.eta * l[0].abs().powf(cert.a) - 1e-7 * scale {
            return Err(Error::NoCertificate(format!(
                "exterior check failed at local ({}, {})",
                l[0], l[1]
            )));
        }
    }
    Ok(())
}

fn domain_height(dom: &ConvexDomain, frame: &Frame) -> f64 {
    dom.boundary_samples(512)
        .into_iter()
        .map(|q| frame.to_local(q)[1])
        .fold(0.0f64, f64::max)
}

fn interior_region_fits(
    dom: &ConvexDomain,
    frame: &Frame,
    a: f64,
    eta: f64,
    eps: f64,
    k: usize,
) -> bool {
    if eps <= 0.0 || eta <= 0.0 {
        return false;
    }
    let lid = 0.5 * eta * eps.powf(a);
    // Sample the closed region {|x'| <= eps, (1/2) eta |x'|^a <= x_n <= lid}.
    for i in 0..=k {
        let w = eps * (2.0 * i as f64 / k as f64 - 1.0);
        let floor = 0.5 * eta * w.abs().powf(a);
        if floor > lid {
            continue;
        }
        for j in 0..=8 {
            let x_n = floor + (lid - floor) * j as f64 / 8.0;
            if !dom.contains(&frame.to_world([w, x_n])) {
                return false;
            }
        }
    }
    true
}

fn smallest_interior_eta(
    dom: &ConvexDomain,
    frame: &Frame,
    a: f64,
    c: f64,
) -> Option<(f64, f64)> {
    let eps_of = |eta: f64| (c / eta).powf(1.0 / a);
    let fits = |eta: f64| interior_region_fits(dom, frame, a, eta, eps_of(eta), 64);
    let (mut lo, mut hi) = (1e-6, 1e9);
    if !fits(hi) {
        return None;
    }
    if fits(lo) {
        return Some((lo, eps_of(lo)));
    }
    for _ in 0..80 {
        let mid = (lo * hi).sqrt();
        if fits(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let eta = hi * 1.02;
    Some((eta, eps_of(eta)))
}

fn validate_interior(dom: &ConvexDomain, cert: &BoundaryTypeCert, k: usize) -> Result<()> {
    let (a, eta) = (cert.a, cert.eta);
    let eps = cert.eps.ok_or(Error::InvalidParams("interior cert missing eps".into()))?;
    if !interior_region_fits(dom, &cert.frame, a, eta, eps, k) {
        return Err(Error::NoCertificate("interior region escapes the domain".into()));
    }
    Ok(())
}

/// Exterior (a ∈ [1,2]) sphere radius max{1/η, diam} or interior (a ≥ 2)
/// radius min{1/η, (1/4)ηε²}, with the stated ball inclusion sampled.
pub fn sphere_condition_radius(cert: &BoundaryTypeCert, dom: &ConvexDomain) -> Result<f64> {
    match cert.kind {
        CertKind::Exterior => {
            if !(1.0..=2.0).contains(&cert.a) {
                return Err(Error::RangeMismatch { a: cert.a });
            }
            let r = (1.0 / cert.eta).max(dom.diam());
            // Omega must sit inside B_R(R e_n) in the frame.
            for q in dom.boundary_samples(4096) {
                let l = cert.frame.to_local(q);
                let d = (l[0] * l[0] + (l[1] - r) * (l[1] - r)).sqrt();
                if d > r * (1.0 + 1e-7) {
                    return Err(Error::NoCertificate(format!(
                        "exterior sphere inclusion fails at local ({}, {})",
                        l[0], l[1]
                    )));
                }
            }
            Ok(r)
        }
        CertKind::Interior => {
            if cert.a < 2.0 {
                return Err(Error::RangeMismatch { a: cert.a });
            }
            let eps = cert.eps.ok_or(Error::InvalidParams("interior cert missing eps".into()))?;
            let r = (1.0 / cert.eta).min(0.25 * cert.eta * eps * eps);
            for i in 0..4096 {
                let ang = 2.0 * std::f64::consts::PI * i as f64 / 4096.0;
                let local = [r * ang.cos(), r + r * ang.sin()];
                let w = cert.frame.to_world(local);
                if !dom.contains(&w) && dom.distance_to_boundary(&w) > 1e-7 * dom.diam() {
                    return Err(Error::NoCertificate(format!(
                        "interior sphere inclusion fails at angle {ang}"
                    )));
                }
            }
            Ok(r)
        }
    }
}

/// Subdomains of the interior-type region, in local frame coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// η|x′|^a < xₙ < (1/4)ηε^a, |x′| < (1/4)^(1/a) ε.
    V,
    /// Same shape built from an η′ certificate.
    Vprime,
    /// 2η|x′|^a < xₙ < (1/4)ηε^a, |x′| < (1/8)^(1/a) ε.
    V0,
    /// (1/2)η|x′|^a < xₙ < (1/2)ηε^a, |x′| < ε.
    Vtilde,
}

/// Exact membership predicate in the certificate frame.
pub fn region_membership(local: Point2, region: Region, cert: &BoundaryTypeCert) -> bool {
    let (a, eta) = (cert.a, cert.eta);
    let eps = match cert.eps {
        Some(e) => e,
        None => return false,
    };
    let w = local[0].abs();
    let x_n = local[1];
    match region {
        Region::V | Region::Vprime => {
            w < 0.25f64.powf(1.0 / a) * eps
                && eta * w.powf(a) < x_n
                && x_n < 0.25 * eta * eps.powf(a)
        }
        Region::V0 => {
            w < 0.125f64.powf(1.0 / a) * eps
                && 2.0 * eta * w.powf(a) < x_n
                && x_n < 0.25 * eta * eps.powf(a)
        }
        Region::Vtilde => {
            w < eps && 0.5 * eta * w.powf(a) < x_n && x_n < 0.5 * eta * eps.powf(a)
        }
    }
}

/// Local two-sided bound dist(x, ∂Ω) ∈ [2⁻¹(1+(aηε^(a−1))²)^(−1/2) xₙ, xₙ]
/// for x ∈ V.
pub fn dist_bounds_v(local: Point2, cert: &BoundaryTypeCert) -> Result<(f64, f64)> {
    if cert.kind != CertKind::Interior {
        return Err(Error::InvalidParams("dist_bounds_v needs an interior certificate".into()));
    }
    if !region_membership(local, Region::V, cert) {
        return Err(Error::OutsideV);
    }
    let (a, eta) = (cert.a, cert.eta);
    let eps = cert.eps.unwrap();
    let slope = a * eta * eps.powf(a - 1.0);
    let lo = 0.5 * (1.0 + slope * slope).powf(-0.5) * local[1];
    Ok((lo, local[1]))
}

/// One chord of Ω_{1/2,P}: endpoint Q, the chordwise minimizer y_Q of u and
/// its parameter along P→Q.
#[derive(Debug, Clone, Copy)]
pub struct ChordMin {
    pub q: Point2,
    pub y: Point2,
    pub t_min: f64,
}

/// The region generated by P: union of open segments (P, y_Q) over boundary
/// chords, stored as sampled chords plus the rule to recompute membership.
#[derive(Debug, Clone)]
pub struct HalfRegion {
    pub p: Point2,
    pub chords: Vec<ChordMin>,
}

impl HalfRegion {
    pub fn k_pq(&self, chord: &ChordMin) -> f64 {
        dist2(self.p, chord.y) / dist2(self.p, chord.q)
    }

    /// Membership predicate: x lies on some open segment (P, y_Q). The chord
    /// through x is recomputed from u, so the answer follows the tie rules of
    /// the construction rather than interpolating stored chords.
    pub fn contains(
        &self,
        dom: &ConvexDomain,
        u: &dyn Fn(Point2) -> f64,
        x: Point2,
    ) -> Result<bool> {
        let d = sub(x, self.p);
        let len = norm(d);
        let scale = dom.diam();
        if len < 1e-12 * scale || !dom.contains(&x) {
            return Ok(false);
        }
        let dir = [d[0] / len, d[1] / len];
        // Exit point of the ray P + t·dir by bisection on membership.
        let mut lo = len;
        let mut hi = 2.0 * scale;
        if dom.contains(&[self.p[0] + hi * dir[0], self.p[1] + hi * dir[1]]) {
            return Err(Error::NonConvexDomain("ray never leaves the domain".into()));
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if dom.contains(&[self.p[0] + mid * dir[0], self.p[1] + mid * dir[1]]) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let q = [self.p[0] + hi * dir[0], self.p[1] + hi * dir[1]];
        let ch = chord_min(self.p, q, u, 512)?;
        Ok(len / hi < ch.t_min)
    }
}

/// Locates the first chordwise minimizer of u along P→Q (ties resolved toward
/// P) on a dense scan plus golden-section refinement.
fn chord_min(p: Point2, q: Point2, u: &dyn Fn(Point2) -> f64, samples: usize) -> Result<ChordMin> {
    let at = |t: f64| -> Point2 { [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])] };
    let mut vals = Vec::with_capacity(samples + 1);
    for i in 0..=samples {
        let t = i as f64 / samples as f64;
        vals.push(u(at(t)));
    }
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    let tol = 1e-9 * scale;
    let mut best = 0usize;
    for (i, v) in vals.iter().enumerate() {
        if *v < vals[best] - tol * 1e-3 {
            best = i;
        }
    }
    // Unimodality within tolerance: no significant descent after the minimum.
    let mut rising_peak = vals[best];
    for v in vals.iter().skip(best + 1) {
        if *v < rising_peak - 1e3 * tol {
            return Err(Error::NonConvexSamples);
        }
        rising_peak = rising_peak.max(*v);
    }
    let (mut lo, mut hi) = (
        (best.saturating_sub(1)) as f64 / samples as f64,
        ((best + 1).min(samples)) as f64 / samples as f64,
    );
    let inv_phi = 0.618_033_988_749_894_9;
    let (mut x1, mut x2) = (hi - inv_phi * (hi - lo), lo + inv_phi * (hi - lo));
    let (mut f1, mut f2) = (u(at(x1)), u(at(x2)));
    for _ in 0..60 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = u(at(x1));
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = u(at(x2));
        }
    }
    let mut t = 0.5 * (lo + hi);
    // Prefer the grid minimizer when refinement gained nothing (flat valley).
    if u(at(t)) > vals[best] {
        t = best as f64 / samples as f64;
    }
    Ok(ChordMin { q, y: at(t), t_min: t })
}

/// Ω_{1/2,P} from a sampled convex function: chordwise minimizers over
/// `n_chords` boundary chords from P.
pub fn omega_half(
    dom: &ConvexDomain,
    p: Point2,
    u: &dyn Fn(Point2) -> f64,
    n_chords: usize,
) -> Result<HalfRegion> {
    let tol = 1e-7 * dom.diam();
    let mut chords = Vec::with_capacity(n_chords);
    for q in dom.boundary_samples(n_chords) {
        if dist2(q, p) < tol {
            continue;
        }
        chords.push(chord_min(p, q, u, 512)?);
    }
    if chords.len() < 3 {
        return Err(Error::InsufficientSamples { needed: 3, got: chords.len() });
    }
    Ok(HalfRegion { p, chords })
}

/// Closed-form bounds of the domain-ratio proposition:
/// c₁ = 1/(1+(1+diam^(1−ν/μ))(M/m)^(1/μ)) and c₂ = 1/(1+(m/M)^(1/ν)).
pub fn domain_ratio_bounds(mu: f64, nu: f64, m_upper: f64, m_lower: f64, diam: f64) -> Result<(f64, f64)> {
    if !(nu > 0.0 && nu <= mu && mu <= 1.0 && m_lower > 0.0 && m_upper >= m_lower) {
        return Err(Error::ParamOrderViolated);
    }
    let c1 = 1.0 / (1.0 + (1.0 + diam.powf(1.0 - nu / mu)) * (m_upper / m_lower).powf(1.0 / mu));
    let c2 = 1.0 / (1.0 + (m_lower / m_upper).powf(1.0 / nu));
    Ok((c1, c2))
}
