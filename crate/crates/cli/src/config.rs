//! Run configuration: one self-describing TOML document per run. Unknown
//! keys are rejected and every referenced file must exist.

use serde::Deserialize;

use maholder::geometry::{ConvexDomain, Point2};
use maholder::{Error, Result, StructureParams};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: ParamsSection,
    pub domain: DomainSection,
    #[serde(default)]
    pub barrier: BarrierSection,
    #[serde(default)]
    pub boundary: BoundarySection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub amp: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub op_amp: f64,
    pub s: f64,
    pub t: f64,
    pub n: u32,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub kind: String,
    #[serde(default)]
    pub center: Option<[f64; 2]>,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub vertices_csv: Option<String>,
    #[serde(default)]
    pub normalize_diam: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierSection {
    pub a: f64,
    #[serde(default)]
    pub b: Option<f64>,
    pub delta: f64,
}

impl Default for BarrierSection {
    fn default() -> Self {
        Self { a: 2.0, b: None, delta: 0.1 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySection {
    /// "zero" | "sqrt_xn" | "quadratic" | "csv".
    pub kind: String,
    #[serde(default)]
    pub csv: Option<String>,
}

impl Default for BoundarySection {
    fn default() -> Self {
        Self { kind: "sqrt_xn".into(), csv: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub h: f64,
    pub directions: usize,
    pub eps_u: f64,
    pub damping: f64,
    pub max_iters: usize,
    pub tol: f64,
    /// Warm-start through a chain of coarser grids.
    pub cascade: bool,
    /// "power" (A |z|^-alpha), "one", "zero".
    pub rhs: String,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            h: 1.0 / 128.0,
            directions: 8,
            eps_u: 1e-6,
            damping: 1.0,
            max_iters: 120,
            tol: 1e-8,
            cascade: true,
            rhs: "power".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    /// Boundary point P for certificates and fits.
    pub point: [f64; 2],
    pub grid_nr: usize,
    pub grid_nxn: usize,
    /// Exterior η at P; classified for the barrier's a when absent.
    #[serde(default)]
    pub eta_ext: Option<f64>,
    /// Interior η′ for the subsolution side; classified when absent.
    #[serde(default)]
    pub eta_interior: Option<f64>,
    /// Interior η for the supersolution side (large, per the η-ε tradeoff).
    pub eta_sup: f64,
    /// Supersolution lid data: "exact" (built-in worked example) or a path
    /// to a binary field dump.
    pub u_source: String,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 42,
            point: [0.0, 0.0],
            grid_nr: 200,
            grid_nxn: 200,
            eta_ext: None,
            eta_interior: None,
            eta_sup: 16.0,
            u_source: "exact".into(),
        }
    }
}

impl RunConfig {
    pub fn from_path(path: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidParams(format!("cannot read config {path}: {e}")))?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::InvalidParams(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.structure_params()?;
        for path in [&self.domain.vertices_csv, &self.boundary.csv] {
            if let Some(p) = path {
                if !std::path::Path::new(p).exists() {
                    return Err(Error::InvalidParams(format!("referenced file {p} does not exist")));
                }
            }
        }
        match self.boundary.kind.as_str() {
            "zero" | "sqrt_xn" | "quadratic" => {}
            "csv" => {
                if self.boundary.csv.is_none() {
                    return Err(Error::InvalidParams("boundary.kind = csv needs boundary.csv".into()));
                }
            }
            other => {
                return Err(Error::InvalidParams(format!("unknown boundary kind {other:?}")));
            }
        }
        match self.solver.rhs.as_str() {
            "power" | "one" | "zero" => Ok(()),
            other => Err(Error::InvalidParams(format!("unknown solver rhs {other:?}"))),
        }
    }

    pub fn structure_params(&self) -> Result<StructureParams> {
        let p = &self.params;
        StructureParams::new(p.amp, p.alpha, p.beta, p.gamma, p.op_amp, p.s, p.t, p.n)
    }

    pub fn build_domain(&self) -> Result<ConvexDomain> {
        let dom = match self.domain.kind.as_str() {
            "ball" | "disk" => {
                let c = self
                    .domain
                    .center
                    .ok_or_else(|| Error::InvalidParams("ball domain needs center".into()))?;
                let r = self
                    .domain
                    .radius
                    .ok_or_else(|| Error::InvalidParams("ball domain needs radius".into()))?;
                ConvexDomain::disk(c, r)?
            }
            "polygon" => {
                let path = self
                    .domain
                    .vertices_csv
                    .as_ref()
                    .ok_or_else(|| Error::InvalidParams("polygon domain needs vertices_csv".into()))?;
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::InvalidParams(format!("cannot read {path}: {e}")))?;
                let mut vertices: Vec<Point2> = Vec::new();
                for (i, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    let cols: Vec<&str> = line.split(',').map(str::trim).collect();
                    if cols.len() != 2 {
                        return Err(Error::InvalidParams(format!(
                            "vertex CSV line {} needs 2 columns",
                            i + 1
                        )));
                    }
                    if i == 0 && cols[0].parse::<f64>().is_err() {
                        continue;
                    }
                    let x = cols[0].parse::<f64>().map_err(|_| {
                        Error::InvalidParams(format!("bad vertex on line {}", i + 1))
                    })?;
                    let y = cols[1].parse::<f64>().map_err(|_| {
                        Error::InvalidParams(format!("bad vertex on line {}", i + 1))
                    })?;
                    vertices.push([x, y]);
                }
                ConvexDomain::polygon(vertices)?
            }
            other => return Err(Error::InvalidParams(format!("unknown domain kind {other:?}"))),
        };
        Ok(if self.domain.normalize_diam { dom.normalized_to_unit_diam().0 } else { dom })
    }

    /// Boundary trace φ as a callback.
    pub fn boundary_fn(&self, dom: &ConvexDomain) -> Result<Box<dyn Fn(Point2) -> f64>> {
        match self.boundary.kind.as_str() {
            "zero" => Ok(Box::new(|_| 0.0)),
            "sqrt_xn" => Ok(Box::new(|x: Point2| -(x[1].max(0.0)).sqrt())),
            "quadratic" => Ok(Box::new(|x: Point2| 0.5 * (x[0] * x[0] + x[1] * x[1]))),
            "csv" => {
                let path = self.boundary.csv.as_ref().unwrap();
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::InvalidParams(format!("cannot read {path}: {e}")))?;
                let samples = maholder::operators::boundary_samples_from_csv(&text, dom)?;
                let dom = dom.clone();
                Ok(Box::new(move |x: Point2| {
                    // Nearest-parameter linear interpolation of the samples.
                    let t = dom.boundary_param(x);
                    let mut ts: Vec<(f64, f64)> =
                        samples.iter().map(|(q, v)| (dom.boundary_param(*q), *v)).collect();
                    ts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                    let n = ts.len();
                    for k in 0..n {
                        let (t0, v0) = ts[k];
                        let (mut t1, v1) = ts[(k + 1) % n];
                        if k + 1 == n {
                            t1 += 1.0;
                        }
                        let tt = if t < t0 { t + 1.0 } else { t };
                        if tt >= t0 && tt <= t1 {
                            let w = if t1 > t0 { (tt - t0) / (t1 - t0) } else { 0.0 };
                            return v0 + w * (v1 - v0);
                        }
                    }
                    ts[0].1
                }))
            }
            other => Err(Error::InvalidParams(format!("unknown boundary kind {other:?}"))),
        }
    }
}
