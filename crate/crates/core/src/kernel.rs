//! Interaction potential, spatial/velocity grids, convolution and the
//! mean-field force. Everything here is immutable after construction and
//! safe to share across threads.

use crate::error::{Result, SegError};
use crate::quad;
use serde::{Deserialize, Serialize};

/// Repulsive cross-species kernel with unit range and unit mass.
///
/// All families satisfy U(r) >= 0, U(r) = 0 for r >= 1 and
/// `int_R U(|x|) dx = 1` (enforced at construction).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InteractionPotential {
    family: PotentialFamily,
    norm_const: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum PotentialFamily {
    /// `c (1 - r^2)^(degree/2)` on [-1, 1]; degree must be even and >= 2.
    /// The normalization constant has a closed form.
    PolynomialBump { degree: u32 },
    /// `c exp(-1/(1 - r^2))` on (-1, 1); normalized numerically.
    Mollifier,
    /// Piecewise-linear table of (r, U(r)) samples on [0, 1]; rescaled so the
    /// interpolant integrates to one.
    Tabulated { r: Vec<f64>, u: Vec<f64> },
}

impl InteractionPotential {
    /// The default kernel: degree-6 polynomial bump, (35/32)(1-r^2)^3.
    pub fn default_bump() -> Self {
        Self::polynomial_bump(6).expect("degree 6 is valid")
    }

    pub fn polynomial_bump(degree: u32) -> Result<Self> {
        if degree < 2 || degree % 2 != 0 {
            return Err(SegError::Config(format!(
                "polynomial bump degree must be even and >= 2, got {degree}"
            )));
        }
        let p = (degree / 2) as i64;
        // int_{-1}^{1} (1-x^2)^p dx = 2^(2p+1) (p!)^2 / (2p+1)!
        let mut integral = 2.0;
        for m in 1..=p {
            integral *= 2.0 * m as f64 / (2.0 * m as f64 + 1.0);
        }
        Ok(Self {
            family: PotentialFamily::PolynomialBump { degree },
            norm_const: 1.0 / integral,
        })
    }

    pub fn mollifier() -> Self {
        let raw = |x: f64| {
            if x.abs() < 1.0 {
                (-1.0 / (1.0 - x * x)).exp()
            } else {
                0.0
            }
        };
        let integral = 2.0 * quad::integrate(raw, 0.0, 1.0, 1e-14);
        Self {
            family: PotentialFamily::Mollifier,
            norm_const: 1.0 / integral,
        }
    }

    /// Build from (r, U) samples. Radii must start at 0, be strictly
    /// increasing and stay within [0, 1]; values must be nonnegative.
    pub fn tabulated(r: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        if r.len() != u.len() || r.len() < 2 {
            return Err(SegError::Config(
                "tabulated potential needs at least two (r, U) samples".into(),
            ));
        }
        if r[0] != 0.0 {
            return Err(SegError::Config("tabulated radii must start at 0".into()));
        }
        for w in r.windows(2) {
            if w[1] <= w[0] {
                return Err(SegError::Config(
                    "tabulated radii must be strictly increasing".into(),
                ));
            }
        }
        if *r.last().unwrap() > 1.0 {
            return Err(SegError::Config(
                "tabulated radii must stay within [0, 1]".into(),
            ));
        }
        if u.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(SegError::Config(
                "tabulated values must be finite and nonnegative".into(),
            ));
        }
        let mut half = 0.0;
        for i in 0..r.len() - 1 {
            half += 0.5 * (u[i] + u[i + 1]) * (r[i + 1] - r[i]);
        }
        // the interpolant is taken to drop linearly to zero at r = 1 if the
        // table stops short
        let last = *r.last().unwrap();
        if last < 1.0 {
            half += 0.5 * u[u.len() - 1] * (1.0 - last);
        }
        if half <= 0.0 {
            return Err(SegError::Config("tabulated potential integrates to zero".into()));
        }
        Ok(Self {
            family: PotentialFamily::Tabulated { r, u },
            norm_const: 1.0 / (2.0 * half),
        })
    }

    pub fn family(&self) -> &PotentialFamily {
        &self.family
    }

    /// A short human-readable identity, reported next to quantitative output.
    pub fn describe(&self) -> String {
        match &self.family {
            PotentialFamily::PolynomialBump { degree } => format!("bump(degree={degree})"),
            PotentialFamily::Mollifier => "mollifier".to_string(),
            PotentialFamily::Tabulated { r, .. } => format!("tabulated({} samples)", r.len()),
        }
    }

    /// U(r) for r >= 0; exactly zero for r >= 1.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if r < 0.0 || !r.is_finite() {
            return Err(SegError::Domain(format!("potential radius must be >= 0, got {r}")));
        }
        Ok(self.eval_unchecked(r))
    }

    fn eval_unchecked(&self, r: f64) -> f64 {
        let r = r.abs();
        if r >= 1.0 {
            return 0.0;
        }
        match &self.family {
            PotentialFamily::PolynomialBump { degree } => {
                self.norm_const * (1.0 - r * r).powi((degree / 2) as i32)
            }
            PotentialFamily::Mollifier => self.norm_const * (-1.0 / (1.0 - r * r)).exp(),
            PotentialFamily::Tabulated { r: rs, u } => {
                let last = *rs.last().unwrap();
                if r >= last {
                    // linear drop to zero at r = 1
                    let u_last = *u.last().unwrap();
                    if last >= 1.0 {
                        return 0.0;
                    }
                    return self.norm_const * u_last * (1.0 - r) / (1.0 - last);
                }
                let j = rs.partition_point(|&x| x <= r).min(rs.len() - 1);
                let (j0, j1) = (j - 1, j);
                let t = (r - rs[j0]) / (rs[j1] - rs[j0]);
                self.norm_const * (u[j0] + t * (u[j1] - u[j0]))
            }
        }
    }

    /// dU/dx at x (signed; odd function). Analytic for the smooth families,
    /// `None` for tabulated ones.
    pub fn derivative(&self, x: f64) -> Option<f64> {
        let r = x.abs();
        if r >= 1.0 {
            return match self.family {
                PotentialFamily::Tabulated { .. } => None,
                _ => Some(0.0),
            };
        }
        match &self.family {
            PotentialFamily::PolynomialBump { degree } => {
                let p = (degree / 2) as i32;
                Some(self.norm_const * p as f64 * (1.0 - x * x).powi(p - 1) * (-2.0 * x))
            }
            PotentialFamily::Mollifier => {
                let s = 1.0 - x * x;
                Some(self.norm_const * (-1.0 / s).exp() * (-2.0 * x / (s * s)))
            }
            PotentialFamily::Tabulated { .. } => None,
        }
    }

    /// Fourier transform `Uhat(k) = int U(|x|) e^{-ikx} dx`, real by evenness.
    pub fn uhat(&self, k: f64) -> f64 {
        let k = k.abs();
        2.0 * quad::integrate(|s| self.eval_unchecked(s) * (k * s).cos(), 0.0, 1.0, 5e-13)
    }

    /// `int_a^1 U(s) ds` for a in [0, 1]; zero for a >= 1.
    pub fn tail_integral(&self, a: f64) -> f64 {
        if a >= 1.0 {
            return 0.0;
        }
        quad::integrate(|s| self.eval_unchecked(s), a.max(0.0), 1.0, 1e-13)
    }

    /// Numerical check of the unit-mass normalization.
    pub fn normalization_defect(&self) -> f64 {
        (2.0 * self.tail_integral(0.0) - 1.0).abs()
    }
}

/// One-dimensional uniform grid with cell-centered nodes
/// `x_i = -L + (i + 1/2) h`, `h = 2L/Nx`. The node set is symmetric under
/// x -> -x, with the mirror of node `i` at `Nx - 1 - i`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpatialGrid {
    pub half_length: f64,
    pub n_nodes: usize,
    pub spacing: f64,
    pub boundary: Boundary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Boundary {
    /// Field values continue as constants outside [-L, L].
    Pinned { left: f64, right: f64 },
    /// Period equals the grid extent 2L.
    Periodic,
}

impl SpatialGrid {
    pub fn pinned(half_length: f64, n_nodes: usize, left: f64, right: f64) -> Result<Self> {
        let g = Self {
            half_length,
            n_nodes,
            spacing: 2.0 * half_length / n_nodes as f64,
            boundary: Boundary::Pinned { left, right },
        };
        g.validate()?;
        Ok(g)
    }

    pub fn periodic(period: f64, n_nodes: usize) -> Result<Self> {
        let g = Self {
            half_length: period / 2.0,
            n_nodes,
            spacing: period / n_nodes as f64,
            boundary: Boundary::Periodic,
        };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        if self.n_nodes < 4 {
            return Err(SegError::Config(format!(
                "spatial grid needs at least 4 nodes, got {}",
                self.n_nodes
            )));
        }
        if !(self.spacing > 0.0) {
            return Err(SegError::Config("spatial grid spacing must be positive".into()));
        }
        if let Boundary::Pinned { .. } = self.boundary {
            if self.half_length <= 1.0 {
                return Err(SegError::Config(
                    "pinned grid half-length must exceed the interaction range 1".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn node(&self, i: usize) -> f64 {
        -self.half_length + (i as f64 + 0.5) * self.spacing
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes).map(|i| self.node(i)).collect()
    }

    pub fn mirror(&self, i: usize) -> usize {
        self.n_nodes - 1 - i
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.boundary, Boundary::Periodic)
    }

    /// Halo pair (left, right) for pinned grids.
    pub fn halo(&self) -> Option<(f64, f64)> {
        match self.boundary {
            Boundary::Pinned { left, right } => Some((left, right)),
            Boundary::Periodic => None,
        }
    }
}

/// Precomputed convolution weights for a (potential, grid) pair.
///
/// Offsets are restricted to the support window |d h| < 1 and the weights are
/// rescaled to sum to exactly one, mirroring the unit mass of U at the
/// discrete level; constants are then reproduced to machine precision.
#[derive(Debug, Clone)]
pub struct ConvolutionStencil {
    weights: Vec<f64>, // indexed by d + half_width
    half_width: usize,
    n_nodes: usize,
    periodic: bool,
}

impl ConvolutionStencil {
    pub fn new(pot: &InteractionPotential, grid: &SpatialGrid) -> Result<Self> {
        let h = grid.spacing;
        if h >= 1.0 {
            return Err(SegError::Config(format!(
                "grid spacing {h} does not resolve the unit interaction range"
            )));
        }
        let half_width = ((1.0 / h).ceil() as usize).saturating_sub(0);
        let mut weights = Vec::with_capacity(2 * half_width + 1);
        for d in -(half_width as i64)..=(half_width as i64) {
            let x = d as f64 * h;
            weights.push(h * pot.eval_unchecked(x.abs()));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(SegError::Config("convolution stencil has zero mass".into()));
        }
        for w in &mut weights {
            *w /= sum;
        }
        Ok(Self {
            weights,
            half_width,
            n_nodes: grid.n_nodes,
            periodic: grid.is_periodic(),
        })
    }

    /// Antisymmetric stencil of dU/dx for the force; `None` when the family
    /// has no analytic derivative.
    pub fn force_stencil(pot: &InteractionPotential, grid: &SpatialGrid) -> Result<Option<Self>> {
        let h = grid.spacing;
        if h >= 1.0 {
            return Err(SegError::Config(format!(
                "grid spacing {h} does not resolve the unit interaction range"
            )));
        }
        let half_width = (1.0 / h).ceil() as usize;
        let mut weights = Vec::with_capacity(2 * half_width + 1);
        for d in -(half_width as i64)..=(half_width as i64) {
            let x = d as f64 * h;
            match pot.derivative(x) {
                Some(du) => weights.push(h * du),
                None => return Ok(None),
            }
        }
        Ok(Some(Self {
            weights,
            half_width,
            n_nodes: grid.n_nodes,
            periodic: grid.is_periodic(),
        }))
    }

    /// Weight table indexed by offset `d + half_width`; sums to one for the
    /// convolution stencil, to zero for the force stencil.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    /// Apply to a field, with `halo` supplying values beyond a pinned grid.
    pub fn apply(&self, field: &[f64], halo: (f64, f64)) -> Vec<f64> {
        assert_eq!(field.len(), self.n_nodes);
        let n = self.n_nodes as i64;
        let w = self.half_width as i64;
        let mut out = vec![0.0; self.n_nodes];
        for i in 0..n {
            let mut acc = 0.0;
            for d in -w..=w {
                let j = i - d;
                let v = if self.periodic {
                    field[(j.rem_euclid(n)) as usize]
                } else if j < 0 {
                    halo.0
                } else if j >= n {
                    halo.1
                } else {
                    field[j as usize]
                };
                acc += self.weights[(d + w) as usize] * v;
            }
            out[i as usize] = acc;
        }
        out
    }
}

/// `(U * field)(x_i)` using the grid's own boundary data.
pub fn convolve(
    pot: &InteractionPotential,
    grid: &SpatialGrid,
    field: &[f64],
) -> Result<Vec<f64>> {
    let halo = grid.halo().unwrap_or((0.0, 0.0));
    convolve_with_halo(pot, grid, field, halo)
}

/// Same with an explicit halo pair (used when two species share a grid but
/// pin to different constants).
pub fn convolve_with_halo(
    pot: &InteractionPotential,
    grid: &SpatialGrid,
    field: &[f64],
    halo: (f64, f64),
) -> Result<Vec<f64>> {
    if field.len() != grid.n_nodes {
        return Err(SegError::Config(format!(
            "field length {} does not match grid ({})",
            field.len(),
            grid.n_nodes
        )));
    }
    if field.iter().any(|v| !v.is_finite()) {
        return Err(SegError::Domain("field contains non-finite values".into()));
    }
    let st = ConvolutionStencil::new(pot, grid)?;
    Ok(st.apply(field, halo))
}

/// Mean-field force `F = -d/dx (U * density)`.
///
/// Uses the analytic kernel derivative when available (antisymmetric
/// stencil, so constants give exactly zero force); falls back to centered
/// differences of the convolved field for tabulated potentials.
pub fn vlasov_force(
    pot: &InteractionPotential,
    grid: &SpatialGrid,
    density: &[f64],
) -> Result<Vec<f64>> {
    let halo = grid.halo().unwrap_or((0.0, 0.0));
    vlasov_force_with_halo(pot, grid, density, halo)
}

pub fn vlasov_force_with_halo(
    pot: &InteractionPotential,
    grid: &SpatialGrid,
    density: &[f64],
    halo: (f64, f64),
) -> Result<Vec<f64>> {
    if density.len() != grid.n_nodes {
        return Err(SegError::Config(format!(
            "density length {} does not match grid ({})",
            density.len(),
            grid.n_nodes
        )));
    }
    if density.iter().any(|v| !v.is_finite()) {
        return Err(SegError::Domain("density contains non-finite values".into()));
    }
    match ConvolutionStencil::force_stencil(pot, grid)? {
        Some(st) => Ok(st.apply(density, halo).iter().map(|v| -v).collect()),
        None => vlasov_force_fd(pot, grid, density, halo),
    }
}

/// Finite-difference route: centered differences of `U * density`. Retained
/// as a cross-check of the analytic-derivative stencil.
pub fn vlasov_force_fd(
    pot: &InteractionPotential,
    grid: &SpatialGrid,
    density: &[f64],
    halo: (f64, f64),
) -> Result<Vec<f64>> {
    let conv = convolve_with_halo(pot, grid, density, halo)?;
    let n = grid.n_nodes;
    let h = grid.spacing;
    let mut out = vec![0.0; n];
    for i in 0..n {
        let (lo, hi) = if grid.is_periodic() {
            (conv[(i + n - 1) % n], conv[(i + 1) % n])
        } else {
            // halo keeps the convolved field constant outside
            let lo = if i == 0 { conv[0] } else { conv[i - 1] };
            let hi = if i + 1 == n { conv[n - 1] } else { conv[i + 1] };
            (lo, hi)
        };
        out[i] = -(hi - lo) / (2.0 * h);
    }
    Ok(out)
}

/// Velocity grid: either a uniform cutoff grid for the simulator or scaled
/// Gauss-Hermite nodes for spectral velocity quadrature.
///
/// `weights` are plain dv-quadrature weights: `int f dv ~ sum w_j f(v_j)`.
/// For Gauss-Hermite they are Christoffel numbers divided by the Gaussian
/// weight, computed from Hermite functions to avoid overflow; the rule is
/// then exact for (polynomial of degree < 2N) x Maxwellian integrands.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VelocityGrid {
    pub kind: VelocityGridKind,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum VelocityGridKind {
    Uniform { vmax: f64, n: usize },
    GaussHermite { n: usize, beta: f64 },
}

/// 1D Maxwellian `mu_1(v) = sqrt(beta/2pi) exp(-beta v^2/2)`.
pub fn maxwellian_1d(beta: f64, v: f64) -> f64 {
    (beta / (2.0 * std::f64::consts::PI)).sqrt() * (-0.5 * beta * v * v).exp()
}

impl VelocityGrid {
    /// Cell-centered uniform grid on [-vmax, vmax]; symmetric under v -> -v.
    pub fn uniform(vmax: f64, n: usize) -> Result<Self> {
        if n < 4 || vmax <= 0.0 {
            return Err(SegError::Config(format!(
                "uniform velocity grid needs n >= 4 and vmax > 0 (n={n}, vmax={vmax})"
            )));
        }
        let dv = 2.0 * vmax / n as f64;
        let nodes: Vec<f64> = (0..n).map(|j| -vmax + (j as f64 + 0.5) * dv).collect();
        let weights = vec![dv; n];
        Ok(Self {
            kind: VelocityGridKind::Uniform { vmax, n },
            nodes,
            weights,
        })
    }

    /// Gauss-Hermite nodes scaled so that Maxwellian moments at inverse
    /// temperature `beta` are exact.
    pub fn gauss_hermite(n: usize, beta: f64) -> Result<Self> {
        if n < 4 || beta <= 0.0 {
            return Err(SegError::Config(format!(
                "Gauss-Hermite grid needs n >= 4 and beta > 0 (n={n}, beta={beta})"
            )));
        }
        let u = hermite_nodes(n);
        let scale = (2.0 / beta).sqrt();
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for &ui in &u {
            // sum of squared Hermite functions h_m(u) e^{-u^2/2}
            let mut hm1 = 0.0f64;
            let mut h = std::f64::consts::PI.powf(-0.25) * (-0.5 * ui * ui).exp();
            let mut ksum = h * h;
            for m in 0..n - 1 {
                let hnext =
                    ui * (2.0 / (m as f64 + 1.0)).sqrt() * h - (m as f64 / (m as f64 + 1.0)).sqrt() * hm1;
                hm1 = h;
                h = hnext;
                ksum += h * h;
            }
            nodes.push(scale * ui);
            weights.push(scale / ksum);
        }
        Ok(Self {
            kind: VelocityGridKind::GaussHermite { n, beta },
            nodes,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn spacing(&self) -> Option<f64> {
        match self.kind {
            VelocityGridKind::Uniform { vmax, n } => Some(2.0 * vmax / n as f64),
            VelocityGridKind::GaussHermite { .. } => None,
        }
    }

    /// `|sum w_j mu_1(v_j) - 1|` for the Maxwellian at inverse temperature beta.
    pub fn maxwellian_defect(&self, beta: f64) -> f64 {
        let s: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&v, &w)| w * maxwellian_1d(beta, v))
            .sum();
        (s - 1.0).abs()
    }
}

/// Roots of the n-th Hermite polynomial via the symmetric Jacobi matrix.
fn hermite_nodes(n: usize) -> Vec<f64> {
    use nalgebra::DMatrix;
    let mut j = DMatrix::<f64>::zeros(n, n);
    for m in 0..n - 1 {
        let b = ((m as f64 + 1.0) / 2.0).sqrt();
        j[(m, m + 1)] = b;
        j[(m + 1, m)] = b;
    }
    let eig = j.symmetric_eigen();
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // symmetrize against roundoff so the node set mirrors exactly
    for i in 0..n / 2 {
        let s = 0.5 * (nodes[n - 1 - i] - nodes[i]);
        nodes[i] = -s;
        nodes[n - 1 - i] = s;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    nodes
}
