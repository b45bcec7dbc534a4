//! Penrose dispersion analysis of the homogeneous state and the collisional
//! eigenproblem: growth rates, unstable bands, and persistence of the
//! instability as the collision strength grows.

use crate::error::{Result, SegError};
use crate::kernel::{maxwellian_1d, InteractionPotential, VelocityGrid};
use crate::linalg;
use crate::quad;
use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Relaxation-type surrogate for the linearized collision operator: nonpositive,
/// bounded, and annihilating the chosen span of collision invariants.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CollisionModel {
    pub kind: CollisionKind,
    /// overall strength multiplier (the alpha of the family of systems)
    pub alpha: f64,
    pub span: ProjectionSpan,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CollisionKind {
    None,
    /// constant collision frequency nu0
    Bgk { nu0: f64 },
    /// velocity-dependent frequency nu0 (1 + |v|)
    BgkHardSphereFrequency { nu0: f64 },
}

/// Which moments the relaxation conserves.
///
/// `MassMomentumEnergy` matches the classical linearized operator with null
/// space {sqrt(mu), v sqrt(mu), v^2 sqrt(mu)}. `MassOnly` is the effective
/// operator in the segregation channel (species-antisymmetric perturbations),
/// where cross-species collisions damp relative momentum and energy and only
/// the per-species mass survives in the null space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProjectionSpan {
    MassMomentumEnergy,
    MassOnly,
}

impl CollisionModel {
    pub fn none() -> Self {
        Self {
            kind: CollisionKind::None,
            alpha: 0.0,
            span: ProjectionSpan::MassMomentumEnergy,
        }
    }

    pub fn bgk(nu0: f64, alpha: f64) -> Self {
        Self {
            kind: CollisionKind::Bgk { nu0 },
            alpha,
            span: ProjectionSpan::MassMomentumEnergy,
        }
    }

    pub fn with_span(mut self, span: ProjectionSpan) -> Self {
        self.span = span;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            CollisionKind::None => Ok(()),
            CollisionKind::Bgk { nu0 } | CollisionKind::BgkHardSphereFrequency { nu0 } => {
                if nu0 > 0.0 {
                    Ok(())
                } else {
                    Err(SegError::Config(format!(
                        "collision frequency must be positive, got {nu0}"
                    )))
                }
            }
        }
    }
}

/// The real dispersion function
/// `F(lambda, k) = beta Uhat(k) int k^2 v^2 mu_1(v) / (lambda^2 + k^2 v^2) dv`.
///
/// The transverse velocity directions integrate out exactly, so the 1D
/// Maxwellian marginal gives the full value.
pub fn penrose_f(pot: &InteractionPotential, beta: f64, k: f64, lam: f64) -> Result<f64> {
    if lam < 0.0 {
        return Err(SegError::Domain(format!("penrose_f needs lambda >= 0, got {lam}")));
    }
    if k == 0.0 && lam == 0.0 {
        return Err(SegError::Domain(
            "penrose_f is undefined at (lambda, k) = (0, 0)".into(),
        ));
    }
    Ok(beta * pot.uhat(k) * velocity_integral(beta, k, lam, 1e-13))
}

fn velocity_integral(beta: f64, k: f64, lam: f64, tol: f64) -> f64 {
    if k == 0.0 {
        return 0.0;
    }
    let k2 = k * k;
    let vstar = (84.0 / beta).sqrt();
    2.0 * quad::integrate(
        |v| {
            let kv2 = k2 * v * v;
            kv2 * maxwellian_1d(beta, v) / (lam * lam + kv2)
        },
        0.0,
        vstar,
        tol,
    )
}

/// Collisionless growth rate: the unique `lambda > 0` with `F(lambda, k) = 1`
/// when `beta Uhat(k) > 1`, absent otherwise.
pub fn growth_rate(pot: &InteractionPotential, beta: f64, k: f64) -> Result<Option<f64>> {
    if k == 0.0 {
        return Err(SegError::Domain("growth_rate needs k != 0".into()));
    }
    let f0 = beta * pot.uhat(k);
    if f0 <= 1.0 {
        return Ok(None);
    }
    let uh = pot.uhat(k);
    let f = |lam: f64| beta * uh * velocity_integral(beta, k, lam, 1e-13) - 1.0;
    // F decreases monotonically from beta*Uhat(k) to 0
    let mut hi = 1.0;
    while f(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e8 {
            return Err(SegError::NonConvergence {
                what: "growth-rate bracket expansion".into(),
                iterations: 27,
                residual: f(hi),
            });
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm.abs() <= 1e-11 && (hi - lo) <= 1e-12 * (1.0 + mid) {
            return Ok(Some(mid));
        }
        if fm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// Collisionless eigenmode `q(v) = beta k Uhat(k) i v sqrt(mu_1) / (lambda + i v k)`,
/// normalized so that `int q sqrt(mu_1) dv = 1` at a true root.
pub fn penrose_mode(
    pot: &InteractionPotential,
    beta: f64,
    k: f64,
    lam: f64,
    vgrid: &VelocityGrid,
) -> Result<Vec<Complex<f64>>> {
    let uh = pot.uhat(k);
    let mode: Vec<Complex<f64>> = vgrid
        .nodes
        .iter()
        .map(|&v| {
            let num = Complex::new(0.0, beta * k * uh * v) * maxwellian_1d(beta, v).sqrt();
            num / Complex::new(lam, v * k)
        })
        .collect();
    // self-consistency: int q sqrt(mu) dv reduces analytically to F(lambda, k)
    // (the odd imaginary part integrates to zero), so it must equal 1 at a root
    let c = penrose_f(pot, beta, k, lam)?;
    if (c - 1.0).abs() > 1e-8 {
        return Err(SegError::Domain(format!(
            "lambda = {lam} is not a dispersion root at k = {k}: int q sqrt(mu) = {c}"
        )));
    }
    Ok(mode)
}

#[cfg(test)]
fn mode_mass(mode: &[Complex<f64>], beta: f64, vgrid: &VelocityGrid) -> Complex<f64> {
    mode.iter()
        .zip(vgrid.nodes.iter().zip(&vgrid.weights))
        .map(|(q, (&v, &w))| q * w * maxwellian_1d(beta, v).sqrt())
        .sum()
}

/// Assembled linearized operator at wavenumber k: diagonal advection `ikv`,
/// rank-one Vlasov coupling `-i beta k Uhat(k) (v sqrt(mu)) (row of sqrt(mu)
/// quadrature)`, plus the dissipative collision matrix scaled by alpha.
pub struct TalphaOperator {
    pub matrix: DMatrix<Complex<f64>>,
    pub beta: f64,
    pub k: f64,
    pub collision: CollisionModel,
    pub vgrid: VelocityGrid,
    pub uhat: f64,
}

pub fn build_talpha(
    pot: &InteractionPotential,
    beta: f64,
    k: f64,
    collision: CollisionModel,
    vgrid: &VelocityGrid,
) -> Result<TalphaOperator> {
    collision.validate()?;
    if k == 0.0 {
        return Err(SegError::Domain("build_talpha needs k != 0".into()));
    }
    check_moment_exactness(beta, vgrid)?;
    let n = vgrid.len();
    let uh = pot.uhat(k);
    let sqrt_mu: Vec<f64> = vgrid
        .nodes
        .iter()
        .map(|&v| maxwellian_1d(beta, v).sqrt())
        .collect();

    let mut m = DMatrix::<Complex<f64>>::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = Complex::new(0.0, k * vgrid.nodes[i]);
    }
    for i in 0..n {
        let col = Complex::new(0.0, -beta * k * uh) * vgrid.nodes[i] * sqrt_mu[i];
        for j in 0..n {
            m[(i, j)] += col * vgrid.weights[j] * sqrt_mu[j];
        }
    }
    if collision.alpha != 0.0 {
        let c = collision_matrix(beta, &collision, vgrid)?;
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] += Complex::new(collision.alpha * c[(i, j)], 0.0);
            }
        }
    }
    Ok(TalphaOperator {
        matrix: m,
        beta,
        k,
        collision,
        vgrid: vgrid.clone(),
        uhat: uh,
    })
}

fn check_moment_exactness(beta: f64, vgrid: &VelocityGrid) -> Result<()> {
    // moments of the Maxwellian up to degree 4 within 1e-10
    let exact = [1.0, 0.0, 1.0 / beta, 0.0, 3.0 / (beta * beta)];
    for (deg, &target) in exact.iter().enumerate() {
        let got: f64 = vgrid
            .nodes
            .iter()
            .zip(&vgrid.weights)
            .map(|(&v, &w)| w * v.powi(deg as i32) * maxwellian_1d(beta, v))
            .sum();
        if (got - target).abs() > 1e-10 {
            return Err(SegError::Config(format!(
                "velocity grid quadrature misses the degree-{deg} Maxwellian moment by {:.2e}",
                (got - target).abs()
            )));
        }
    }
    Ok(())
}

/// Real collision matrix `nu (P - I)` with P the weighted orthogonal
/// projection onto the chosen invariants. Validates that the invariants are
/// annihilated to 1e-10 before returning.
fn collision_matrix(
    beta: f64,
    collision: &CollisionModel,
    vgrid: &VelocityGrid,
) -> Result<DMatrix<f64>> {
    let n = vgrid.len();
    let sqrt_mu: Vec<f64> = vgrid
        .nodes
        .iter()
        .map(|&v| maxwellian_1d(beta, v).sqrt())
        .collect();
    let n_inv = match collision.span {
        ProjectionSpan::MassMomentumEnergy => 3,
        ProjectionSpan::MassOnly => 1,
    };
    let invariants: Vec<Vec<f64>> = (0..n_inv)
        .map(|p| {
            vgrid
                .nodes
                .iter()
                .zip(&sqrt_mu)
                .map(|(&v, &s)| v.powi(p as i32) * s)
                .collect()
        })
        .collect();

    let nu: Vec<f64> = match collision.kind {
        CollisionKind::None => return Ok(DMatrix::zeros(n, n)),
        CollisionKind::Bgk { nu0 } => vec![nu0; n],
        CollisionKind::BgkHardSphereFrequency { nu0 } => {
            vgrid.nodes.iter().map(|&v| nu0 * (1.0 + v.abs())).collect()
        }
    };

    // Gram-Schmidt under the nu-weighted quadrature inner product, so that
    // nu (P - I) annihilates the invariants and stays conservative.
    let ip = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .zip(vgrid.weights.iter().zip(&nu))
            .map(|((x, y), (w, nv))| x * y * w * nv)
            .sum()
    };
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for inv in &invariants {
        let mut e = inv.clone();
        for b in &basis {
            let c = ip(&e, b);
            for (ei, bi) in e.iter_mut().zip(b) {
                *ei -= c * bi;
            }
        }
        let nrm = ip(&e, &e).sqrt();
        if nrm < 1e-300 {
            return Err(SegError::Assembly("degenerate collision invariants".into()));
        }
        e.iter_mut().for_each(|x| *x /= nrm);
        basis.push(e);
    }

    // matrix of -nu (I - P_nu): entries nu_i [sum_m e_m(i) (W nu e_m)(j)] - nu_i delta_ij
    let mut c = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut p = 0.0;
            for e in &basis {
                p += e[i] * e[j] * vgrid.weights[j] * nu[j];
            }
            c[(i, j)] = nu[i] * p;
        }
        c[(i, i)] -= nu[i];
    }

    // structural check: collision invariants must be annihilated
    for inv in &invariants {
        let mut worst = 0.0f64;
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += c[(i, j)] * inv[j];
            }
            worst = worst.max(acc.abs());
        }
        if worst > 1e-10 {
            return Err(SegError::Assembly(format!(
                "collision matrix fails to annihilate an invariant (defect {worst:.2e})"
            )));
        }
    }
    Ok(c)
}

/// Eigenvalue of maximal real part with mode and residual. Ties break by
/// largest imaginary part, then first index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenResult {
    pub beta: f64,
    pub k: f64,
    pub alpha: f64,
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub residual: f64,
    #[serde(skip)]
    pub mode: Vec<Complex<f64>>,
    /// scalar moments of the mode: (int q sqrt(mu), projections of the
    /// collision part on 1, v, v^2), enough to evaluate q off-grid
    #[serde(skip)]
    pub mode_moments: ModeMoments,
}

#[derive(Debug, Clone, Default)]
pub struct ModeMoments {
    pub c_mass: Complex<f64>,
    pub p: [Complex<f64>; 3],
}

pub fn rightmost_eigenvalue(op: &TalphaOperator) -> Result<EigenResult> {
    let eigs = linalg::complex_eigenvalues(&op.matrix);
    if eigs.is_empty() {
        return Err(SegError::NonConvergence {
            what: "complex eigensolve".into(),
            iterations: 0,
            residual: f64::NAN,
        });
    }
    let mut best = eigs[0];
    for &e in &eigs[1..] {
        if e.re > best.re + 1e-13 || ((e.re - best.re).abs() <= 1e-13 && e.im > best.im) {
            best = e;
        }
    }
    // the real embedding reports lambda and conj(lambda) together; pick the
    // representative that actually belongs to the complex matrix
    let (mut mode, mut residual) = linalg::inverse_iteration(&op.matrix, best, 5);
    if residual > 1e-6 {
        let (m2, r2) = linalg::inverse_iteration(&op.matrix, best.conj(), 5);
        if r2 < residual {
            best = best.conj();
            mode = m2;
            residual = r2;
        }
    }
    if residual > 1e-6 {
        return Err(SegError::NonConvergence {
            what: format!("eigenvector inverse iteration at lambda = {best}"),
            iterations: 5,
            residual,
        });
    }

    let beta = op.beta;
    let sqrt_mu: Vec<f64> = op
        .vgrid
        .nodes
        .iter()
        .map(|&v| maxwellian_1d(beta, v).sqrt())
        .collect();
    let mut modev: Vec<Complex<f64>> = mode.iter().cloned().collect();
    let c: Complex<f64> = modev
        .iter()
        .zip(op.vgrid.weights.iter().zip(&sqrt_mu))
        .map(|(q, (&w, &s))| q * w * s)
        .sum();
    if c.norm() > 1e-8 {
        for q in &mut modev {
            *q /= c;
        }
    }
    let c_mass: Complex<f64> = modev
        .iter()
        .zip(op.vgrid.weights.iter().zip(&sqrt_mu))
        .map(|(q, (&w, &s))| q * w * s)
        .sum();
    // projections of P q on the plain invariant basis {1, v, v^2} x sqrt(mu)
    let p = projection_coefficients(op, &modev, &sqrt_mu)?;

    Ok(EigenResult {
        beta,
        k: op.k,
        alpha: op.collision.alpha,
        lambda_re: best.re,
        lambda_im: best.im,
        residual,
        mode: modev,
        mode_moments: ModeMoments { c_mass, p },
    })
}

/// Coefficients (p0, p1, p2) such that `(P q)(v) = (p0 + p1 v + p2 v^2) sqrt(mu)`.
fn projection_coefficients(
    op: &TalphaOperator,
    mode: &[Complex<f64>],
    sqrt_mu: &[f64],
) -> Result<[Complex<f64>; 3]> {
    let n_inv = match op.collision.span {
        ProjectionSpan::MassMomentumEnergy => 3usize,
        ProjectionSpan::MassOnly => 1,
    };
    if matches!(op.collision.kind, CollisionKind::None) || op.collision.alpha == 0.0 {
        return Ok([Complex::default(); 3]);
    }
    let nu: Vec<f64> = match op.collision.kind {
        CollisionKind::None => unreachable!(),
        CollisionKind::Bgk { nu0 } => vec![nu0; op.vgrid.len()],
        CollisionKind::BgkHardSphereFrequency { nu0 } => op
            .vgrid
            .nodes
            .iter()
            .map(|&v| nu0 * (1.0 + v.abs()))
            .collect(),
    };
    // Solve the small Gram system G a = b with G_{pq} = <v^p smu, v^q smu>_nu
    // and b_p = <v^p smu, q>_nu, then (P q) = sum a_q v^q sqrt(mu).
    let mut g = DMatrix::<f64>::zeros(n_inv, n_inv);
    let mut b = DVector::<Complex<f64>>::zeros(n_inv);
    for p in 0..n_inv {
        for qd in 0..n_inv {
            g[(p, qd)] = op
                .vgrid
                .nodes
                .iter()
                .zip(sqrt_mu)
                .zip(op.vgrid.weights.iter().zip(&nu))
                .map(|((&v, &s), (&w, &nv))| v.powi((p + qd) as i32) * s * s * w * nv)
                .sum();
        }
        let mut acc = Complex::default();
        for i in 0..op.vgrid.len() {
            acc += op.vgrid.nodes[i].powi(p as i32)
                * sqrt_mu[i]
                * op.vgrid.weights[i]
                * nu[i]
                * mode[i];
        }
        b[p] = acc;
    }
    let lu = g.lu();
    let re = DVector::from_fn(n_inv, |i, _| b[i].re);
    let im = DVector::from_fn(n_inv, |i, _| b[i].im);
    let sr = lu.solve(&re).ok_or_else(|| {
        SegError::Assembly("singular Gram matrix in projection coefficients".into())
    })?;
    let si = lu
        .solve(&im)
        .ok_or_else(|| SegError::Assembly("singular Gram matrix".into()))?;
    let mut out = [Complex::default(); 3];
    for i in 0..n_inv {
        out[i] = Complex::new(sr[i], si[i]);
    }
    Ok(out)
}

impl EigenResult {
    pub fn lambda(&self) -> Complex<f64> {
        Complex::new(self.lambda_re, self.lambda_im)
    }

    /// Discrete residual of the continuity identity
    /// `lambda int q sqrt(mu) - i k int q v sqrt(mu) = 0` (mass moment of the
    /// eigen relation; the Vlasov and collision terms drop out exactly).
    pub fn continuity_residual(&self, vgrid: &VelocityGrid) -> f64 {
        let smu: Vec<f64> = vgrid
            .nodes
            .iter()
            .map(|&v| maxwellian_1d(self.beta, v).sqrt())
            .collect();
        let m0: Complex<f64> = self
            .mode
            .iter()
            .zip(vgrid.weights.iter().zip(&smu))
            .map(|(q, (&w, &s))| q * w * s)
            .sum();
        let m1: Complex<f64> = self
            .mode
            .iter()
            .zip(vgrid.nodes.iter().zip(vgrid.weights.iter().zip(&smu)))
            .map(|(q, (&v, (&w, &s)))| q * v * w * s)
            .sum();
        (self.lambda() * m0 - Complex::new(0.0, self.k) * m1).norm()
    }

    /// Evaluate the eigenmode at an arbitrary velocity from its scalar
    /// moments (closed form of the eigen relation):
    /// `q(v) = [-i beta k Uhat c v + alpha nu(v) (p0 + p1 v + p2 v^2)] sqrt(mu)
    ///         / (lambda + alpha nu(v) - i k v)`.
    pub fn evaluate_mode(&self, op_uhat: f64, collision: &CollisionModel, v: f64) -> Complex<f64> {
        let nu_v = match collision.kind {
            CollisionKind::None => 0.0,
            CollisionKind::Bgk { nu0 } => nu0,
            CollisionKind::BgkHardSphereFrequency { nu0 } => nu0 * (1.0 + v.abs()),
        };
        let a_nu = collision.alpha * nu_v;
        let s = maxwellian_1d(self.beta, v).sqrt();
        let p = &self.mode_moments.p;
        let num = (Complex::new(0.0, -self.beta * self.k * op_uhat) * self.mode_moments.c_mass * v
            + (p[0] + p[1] * v + p[2] * v * v) * a_nu)
            * s;
        let den = self.lambda() + Complex::new(a_nu, -self.k * v);
        num / den
    }
}

/// Scan of `beta Uhat(k)` with growth rates where the criterion is exceeded.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PenroseScan {
    pub beta: f64,
    pub k_values: Vec<f64>,
    pub uhat: Vec<f64>,
    pub lambda: Vec<Option<f64>>,
    pub band: Vec<(f64, f64)>,
}

pub fn penrose_scan(
    pot: &InteractionPotential,
    beta: f64,
    k_max: f64,
    n_samples: usize,
) -> Result<PenroseScan> {
    if n_samples < 2 || !(k_max > 0.0) {
        return Err(SegError::Config(
            "penrose scan needs k_max > 0 and at least 2 samples".into(),
        ));
    }
    let mut k_values = Vec::with_capacity(n_samples);
    let mut uhat = Vec::with_capacity(n_samples);
    let mut lambda = Vec::with_capacity(n_samples);
    for i in 1..=n_samples {
        let k = k_max * i as f64 / n_samples as f64;
        let uh = pot.uhat(k);
        k_values.push(k);
        uhat.push(uh);
        lambda.push(growth_rate(pot, beta, k)?);
    }
    let band = unstable_band(pot, beta, k_max, n_samples)?;
    Ok(PenroseScan {
        beta,
        k_values,
        uhat,
        lambda,
        band,
    })
}

/// The sampled sub-level set `{k in (0, k_max] : beta Uhat(k) > 1}` with
/// endpoints refined by bisection. A left endpoint of 0.0 means the band is
/// open at k = 0 (k = 0 itself is always excluded).
pub fn unstable_band(
    pot: &InteractionPotential,
    beta: f64,
    k_max: f64,
    n_samples: usize,
) -> Result<Vec<(f64, f64)>> {
    if n_samples < 2 || !(k_max > 0.0) {
        return Err(SegError::Config(
            "unstable_band needs k_max > 0 and at least 2 samples".into(),
        ));
    }
    let crit = |k: f64| beta * pot.uhat(k) - 1.0;
    let ks: Vec<f64> = (1..=n_samples)
        .map(|i| k_max * i as f64 / n_samples as f64)
        .collect();
    let refine = |mut lo: f64, mut hi: f64| -> f64 {
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if crit(lo).signum() == crit(mid).signum() {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-13 {
                break;
            }
        }
        0.5 * (lo + hi)
    };
    let mut bands = Vec::new();
    let mut open: Option<f64> = if crit(ks[0]) > 0.0 { Some(0.0) } else { None };
    for w in ks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (fa, fb) = (crit(a), crit(b));
        if fa > 0.0 && fb <= 0.0 {
            let edge = refine(a, b);
            bands.push((open.take().unwrap_or(a), edge));
        } else if fa <= 0.0 && fb > 0.0 {
            open = Some(refine(a, b));
        }
    }
    if let Some(lo) = open {
        bands.push((lo, k_max));
    }
    Ok(bands)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::InteractionPotential;

    fn pot() -> InteractionPotential {
        InteractionPotential::default_bump()
    }

    #[test]
    fn f_at_zero_lambda_is_beta_uhat() {
        let p = pot();
        for (beta, k) in [(2.0, 0.3), (1.5, 1.0), (0.7, 0.2)] {
            let f = penrose_f(&p, beta, k, 0.0).unwrap();
            assert!(
                (f - beta * p.uhat(k)).abs() < 1e-10,
                "beta {beta} k {k}: {f} vs {}",
                beta * p.uhat(k)
            );
        }
    }

    #[test]
    fn f_vanishes_at_large_lambda() {
        let p = pot();
        let f = penrose_f(&p, 2.0, 0.3, 1e6).unwrap();
        assert!(f < 1e-6, "{f}");
    }

    #[test]
    fn f_decreasing_in_lambda() {
        let p = pot();
        let f0 = penrose_f(&p, 2.0, 0.3, 0.0).unwrap();
        let f1 = penrose_f(&p, 2.0, 0.3, 1.0).unwrap();
        assert!(f1 < f0);
    }

    #[test]
    fn f_corner_rejected() {
        assert!(penrose_f(&pot(), 2.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn reduction_matches_3d_tensor_quadrature() {
        // the full 3D-velocity integral with the isotropic Maxwellian
        // factorizes; verify once at (beta, k, lambda) = (2, 0.3, 0.1).
        // Transverse directions by Gauss-Hermite (exact for Gaussians), the
        // singular v direction by adaptive quadrature.
        let p = pot();
        let (beta, k, lam) = (2.0f64, 0.3f64, 0.1f64);
        let gh = VelocityGrid::gauss_hermite(48, beta).unwrap();
        let zeta_mass: f64 = gh
            .nodes
            .iter()
            .zip(&gh.weights)
            .map(|(&z, &wz)| wz * maxwellian_1d(beta, z))
            .sum();
        let vstar = (84.0f64 / beta).sqrt();
        let v_part = 2.0
            * quad::integrate(
                |v| k * k * v * v * maxwellian_1d(beta, v) / (lam * lam + k * k * v * v),
                0.0,
                vstar,
                1e-13,
            );
        let f3d = beta * p.uhat(k) * zeta_mass * zeta_mass * v_part;
        let f1d = penrose_f(&p, beta, k, lam).unwrap();
        assert!((f3d - f1d).abs() < 1e-8, "3d {f3d} vs 1d {f1d}");
    }

    #[test]
    fn growth_rate_root_quality() {
        let p = pot();
        let lam = growth_rate(&p, 2.0, 0.3).unwrap().expect("inside band");
        assert!(lam > 0.0);
        let f = penrose_f(&p, 2.0, 0.3, lam).unwrap();
        assert!((f - 1.0).abs() <= 1e-10, "|F-1| = {}", (f - 1.0).abs());

        // oracle at tighter quadrature tolerance
        let uh = p.uhat(0.3);
        let fo = |l: f64| 2.0 * uh * velocity_integral(2.0, 0.3, l, 1e-15) - 1.0;
        let (mut lo, mut hi) = (0.0, 4.0);
        while hi - lo > 1e-13 {
            let mid = 0.5 * (lo + hi);
            if fo(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((lam - 0.5 * (lo + hi)).abs() < 1e-9);
    }

    #[test]
    fn growth_rate_absent_below_critical() {
        let p = pot();
        for k in [0.1, 0.5, 2.0] {
            assert!(growth_rate(&p, 0.5, k).unwrap().is_none());
        }
    }

    #[test]
    fn growth_rate_decreases_toward_band_edge() {
        let p = pot();
        let scan = penrose_scan(&p, 2.0, 3.5, 60).unwrap();
        // within the band, lambda decreases as beta*Uhat(k) approaches 1
        let mut prev: Option<f64> = None;
        for (uh, lam) in scan.uhat.iter().zip(&scan.lambda) {
            if let Some(l) = lam {
                if let Some(pl) = prev {
                    if 2.0 * uh < 1.4 {
                        assert!(*l <= pl + 1e-9);
                    }
                }
                prev = Some(*l);
            }
        }
        let last_inside = scan
            .lambda
            .iter()
            .filter_map(|l| *l)
            .last()
            .expect("band nonempty");
        assert!(last_inside < 0.1, "lambda shrinks to 0 at the edge");
    }

    #[test]
    fn mode_self_consistency_and_parity() {
        let p = pot();
        let (beta, k) = (2.0, 0.3);
        let lam = growth_rate(&p, beta, k).unwrap().unwrap();
        let vg = VelocityGrid::gauss_hermite(128, beta).unwrap();
        let q = penrose_mode(&p, beta, k, lam, &vg).unwrap();
        // continuum self-consistency: int q sqrt(mu) dv reduces to F(lam, k)
        let c = penrose_f(&p, beta, k, lam).unwrap();
        assert!((c - 1.0).abs() < 1e-8, "mass {c}");
        // the grid-level quadrature of the Lorentzian-shaped mode is coarser
        let c_grid = mode_mass(&q, beta, &vg);
        assert!((c_grid - Complex::new(1.0, 0.0)).norm() < 1e-4, "grid mass {c_grid}");
        // real part even, imaginary part odd
        let n = vg.len();
        for i in 0..n {
            let j = n - 1 - i;
            assert!((q[i].re - q[j].re).abs() < 1e-10);
            assert!((q[i].im + q[j].im).abs() < 1e-10);
        }
        // residual of the collisionless eigen relation, with the integral
        // term evaluated through the continuum quadrature
        let uh = p.uhat(k);
        let mut worst = 0.0f64;
        for (i, &v) in vg.nodes.iter().enumerate() {
            let r = Complex::new(lam, v * k) * q[i]
                - Complex::new(0.0, beta * k * uh * c) * v * maxwellian_1d(beta, v).sqrt();
            worst = worst.max(r.norm());
        }
        assert!(worst <= 1e-8, "eigen relation residual {worst}");
        // non-root lambda must be rejected
        assert!(penrose_mode(&p, beta, k, lam * 2.0, &vg).is_err());
    }

    #[test]
    fn talpha_alpha0_matches_penrose() {
        let p = pot();
        let (beta, k) = (2.0, 0.3);
        let vg = VelocityGrid::gauss_hermite(128, beta).unwrap();
        let op = build_talpha(&p, beta, k, CollisionModel::none(), &vg).unwrap();
        let eig = rightmost_eigenvalue(&op).unwrap();
        let lam = growth_rate(&p, beta, k).unwrap().unwrap();
        assert!(
            (eig.lambda_re - lam).abs() < 1e-6 && eig.lambda_im.abs() < 1e-8,
            "matrix {} + {}i vs penrose {lam}",
            eig.lambda_re,
            eig.lambda_im
        );
        assert!(eig.residual < 1e-8);
        assert!(eig.continuity_residual(&vg) < 1e-6);
    }

    #[test]
    fn talpha_stable_outside_band() {
        let p = pot();
        // beta Uhat(k) < 1 at beta = 0.9: spectrum on/left of the imaginary axis
        let vg = VelocityGrid::gauss_hermite(96, 0.9).unwrap();
        let op = build_talpha(&p, 0.9, 0.4, CollisionModel::none(), &vg).unwrap();
        let eig = rightmost_eigenvalue(&op).unwrap();
        assert!(eig.lambda_re <= 1e-8, "rightmost {}", eig.lambda_re);
    }

    #[test]
    fn collision_matrix_annihilates_invariants() {
        let beta = 2.0;
        let vg = VelocityGrid::gauss_hermite(64, beta).unwrap();
        let cm = collision_matrix(beta, &CollisionModel::bgk(1.0, 1.0), &vg).unwrap();
        let smu: Vec<f64> = vg.nodes.iter().map(|&v| maxwellian_1d(beta, v).sqrt()).collect();
        for p in 0..3 {
            let mut worst = 0.0f64;
            for i in 0..vg.len() {
                let mut acc = 0.0;
                for j in 0..vg.len() {
                    acc += cm[(i, j)] * vg.nodes[j].powi(p) * smu[j];
                }
                worst = worst.max(acc.abs());
            }
            assert!(worst < 1e-10, "degree {p} defect {worst}");
        }
    }

    #[test]
    fn persistence_under_collisions() {
        let p = pot();
        let (beta, k) = (2.0, 0.3);
        let vg = VelocityGrid::gauss_hermite(96, beta).unwrap();
        for alpha in [0.1, 1.0, 10.0] {
            for span in [ProjectionSpan::MassMomentumEnergy, ProjectionSpan::MassOnly] {
                let model = CollisionModel::bgk(1.0, alpha).with_span(span);
                let op = build_talpha(&p, beta, k, model, &vg).unwrap();
                let eig = rightmost_eigenvalue(&op).unwrap();
                assert!(
                    eig.lambda_re > 1e-8,
                    "alpha {alpha} span {span:?}: Re lambda = {}",
                    eig.lambda_re
                );
                assert!(eig.lambda_re < 10.0, "bounded");
            }
        }
    }

    #[test]
    fn massonly_matches_scalar_dispersion_oracle() {
        // independent oracle for the mass-only collisional root:
        // beta k^2 Uhat I2(D) + alpha nu0 D I0(D) = 1 with D = lambda + alpha nu0
        let p = pot();
        let (beta, k, alpha, nu0) = (2.0f64, 0.3f64, 1.0f64, 1.0f64);
        let uh = p.uhat(k);
        let int_m = |m: i32, d: f64| {
            2.0 * quad::integrate(
                |v: f64| v.powi(m) * maxwellian_1d(beta, v) / (d * d + k * k * v * v),
                0.0,
                (84.0f64 / beta).sqrt(),
                1e-14,
            )
        };
        let rel = |lam: f64| {
            let d = lam + alpha * nu0;
            beta * k * k * uh * int_m(2, d) + alpha * nu0 * d * int_m(0, d) - 1.0
        };
        let (mut lo, mut hi) = (0.0, 4.0);
        assert!(rel(lo) > 0.0 && rel(hi) < 0.0);
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if rel(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = 0.5 * (lo + hi);

        let vg = VelocityGrid::gauss_hermite(128, beta).unwrap();
        let model = CollisionModel::bgk(nu0, alpha).with_span(ProjectionSpan::MassOnly);
        let op = build_talpha(&p, beta, k, model, &vg).unwrap();
        let eig = rightmost_eigenvalue(&op).unwrap();
        assert!(
            (eig.lambda_re - oracle).abs() < 1e-6 && eig.lambda_im.abs() < 1e-8,
            "matrix {} vs oracle {oracle}",
            eig.lambda_re
        );
    }

    #[test]
    fn eigenvalues_in_conjugate_pairs() {
        let p = pot();
        let vg = VelocityGrid::gauss_hermite(48, 2.0).unwrap();
        let op = build_talpha(&p, 2.0, 0.3, CollisionModel::bgk(1.0, 1.0), &vg).unwrap();
        let eigs = linalg::complex_eigenvalues(&op.matrix);
        for e in &eigs {
            if e.im.abs() > 1e-9 {
                let partner = eigs
                    .iter()
                    .map(|x| (x - e.conj()).norm())
                    .fold(f64::INFINITY, f64::min);
                assert!(partner < 1e-7, "no conjugate partner for {e}");
            }
        }
    }

    #[test]
    fn mode_closure_matches_grid_values() {
        let p = pot();
        let (beta, k) = (2.0, 0.3);
        let vg = VelocityGrid::gauss_hermite(96, beta).unwrap();
        let model = CollisionModel::bgk(1.0, 1.0).with_span(ProjectionSpan::MassOnly);
        let op = build_talpha(&p, beta, k, model, &vg).unwrap();
        let eig = rightmost_eigenvalue(&op).unwrap();
        let mut worst = 0.0f64;
        for (i, &v) in vg.nodes.iter().enumerate() {
            let closed = eig.evaluate_mode(op.uhat, &model, v);
            worst = worst.max((closed - eig.mode[i]).norm());
        }
        assert!(worst < 1e-6, "closure mismatch {worst}");
    }

    #[test]
    fn band_nonempty_supercritical_empty_subcritical() {
        let p = pot();
        let band = unstable_band(&p, 2.0, 4.0, 200).unwrap();
        assert!(!band.is_empty());
        assert_eq!(band[0].0, 0.0, "band contains small k");
        assert!(band[0].1 > 0.3);
        let empty = unstable_band(&p, 0.9, 4.0, 200).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn band_endpoints_stable_under_refinement() {
        let p = pot();
        let b1 = unstable_band(&p, 2.0, 4.0, 100).unwrap();
        let b2 = unstable_band(&p, 2.0, 4.0, 200).unwrap();
        assert_eq!(b1.len(), b2.len());
        for (x, y) in b1.iter().zip(&b2) {
            assert!((x.1 - y.1).abs() < 1e-6);
        }
    }

    #[test]
    fn grid_convergence_of_rightmost() {
        let p = pot();
        let model = CollisionModel::bgk(1.0, 1.0);
        let e1 = {
            let vg = VelocityGrid::gauss_hermite(128, 2.0).unwrap();
            rightmost_eigenvalue(&build_talpha(&p, 2.0, 0.3, model, &vg).unwrap()).unwrap()
        };
        let e2 = {
            let vg = VelocityGrid::gauss_hermite(256, 2.0).unwrap();
            rightmost_eigenvalue(&build_talpha(&p, 2.0, 0.3, model, &vg).unwrap()).unwrap()
        };
        assert!(
            (e1.lambda_re - e2.lambda_re).abs() < 1e-4,
            "{} vs {}",
            e1.lambda_re,
            e2.lambda_re
        );
    }
}
