//! Non-homogeneous front minimizer of the excess free energy, the
//! linearized free-energy operator A and its spectral gap.

use crate::error::{Result, SegError};
use crate::kernel::{ConvolutionStencil, InteractionPotential, SpatialGrid};
use crate::linalg;
use crate::phasediag::{self, PhasePoint};
use serde::{Deserialize, Serialize};

/// Converged front minimizer on a pinned grid. `rho1` rises from `rho_minus`
/// to `rho_plus`, `rho2` is its mirror image, and both satisfy the discrete
/// stationarity conditions to within `residual`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrontProfile {
    pub grid: SpatialGrid,
    pub beta: f64,
    pub rho_total: f64,
    pub rho1: Vec<f64>,
    pub rho2: Vec<f64>,
    pub chem_pot: f64,
    pub residual: f64,
    pub iterations: usize,
    pub phase: PhasePoint,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrontSolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
}

impl Default for FrontSolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200_000,
            damping: 0.5,
        }
    }
}

/// Damped fixed-point iteration for the stationarity system
/// `ln rho_i + beta U * rho_{i+1} = C`, symmetrized every sweep to pin the
/// translation freedom at the canonical mirror-symmetric minimizer.
pub fn solve_front(
    pot: &InteractionPotential,
    beta: f64,
    grid: &SpatialGrid,
    opts: &FrontSolverOptions,
    initial_guess: Option<(&[f64], &[f64])>,
) -> Result<FrontProfile> {
    let rho_total = 2.0;
    let phase = phasediag::pure_phases(beta, rho_total)?;
    if phase.m <= 0.0 {
        return Err(SegError::Config(format!(
            "front requires the segregated regime (beta*rho > 2); beta = {beta} is {}",
            phase.regime
        )));
    }
    if grid.is_periodic() {
        return Err(SegError::Config("front solver needs a pinned grid".into()));
    }
    if grid.half_length < 5.0 {
        return Err(SegError::Config(format!(
            "front grid should span several interaction ranges (L >= 5), got L = {}",
            grid.half_length
        )));
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(SegError::Config(format!(
            "damping must lie in (0, 1], got {}",
            opts.damping
        )));
    }
    let (rp, rm) = (phase.rho_plus, phase.rho_minus);
    let c = phasediag::chemical_potential(&phase);
    let stencil = ConvolutionStencil::new(pot, grid)?;
    let n = grid.n_nodes;
    let halo1 = (rm, rp);
    let halo2 = (rp, rm);

    let (mut rho1, mut rho2) = match initial_guess {
        Some((g1, g2)) => {
            if g1.len() != n || g2.len() != n {
                return Err(SegError::Config("initial guess length mismatch".into()));
            }
            if g1.iter().chain(g2.iter()).any(|&v| !(v > 0.0)) {
                return Err(SegError::Config("initial guess must be positive".into()));
            }
            (g1.to_vec(), g2.to_vec())
        }
        None => {
            let r1: Vec<f64> = grid
                .nodes()
                .iter()
                .map(|&x| 1.0 + phase.m * (2.0 * x).tanh())
                .collect();
            let r2: Vec<f64> = (0..n).map(|i| r1[grid.mirror(i)]).collect();
            (r1, r2)
        }
    };
    // clamp the guess into the invariant box so the iteration stays there
    for v in rho1.iter_mut().chain(rho2.iter_mut()) {
        *v = v.clamp(rm, rp);
    }

    let mut theta = opts.damping;
    let mut residual = f64::INFINITY;
    let mut best_residual = f64::INFINITY;
    let mut stagnant = 0usize;
    let mut iterations = 0usize;
    const TRANSIENT: usize = 50;

    while iterations < opts.max_iter {
        iterations += 1;
        let conv2 = stencil.apply(&rho2, halo2);
        let conv1 = stencil.apply(&rho1, halo1);

        residual = 0.0;
        for i in 0..n {
            residual = residual
                .max((rho1[i].ln() + beta * conv2[i] - c).abs())
                .max((rho2[i].ln() + beta * conv1[i] - c).abs());
        }
        if residual <= opts.tol {
            break;
        }
        // residual must keep shrinking once the transient has passed
        if iterations > TRANSIENT {
            if residual < best_residual * (1.0 - 1e-12) {
                best_residual = residual;
                stagnant = 0;
            } else {
                stagnant += 1;
                if stagnant > 2000 {
                    if theta > 0.1 {
                        theta *= 0.5;
                        stagnant = 0;
                    } else {
                        return Err(SegError::NonConvergence {
                            what: "front fixed-point iteration (residual stalled)".into(),
                            iterations,
                            residual,
                        });
                    }
                }
            }
        } else {
            best_residual = best_residual.min(residual);
        }

        for i in 0..n {
            let t1 = (c - beta * conv2[i]).exp();
            let t2 = (c - beta * conv1[i]).exp();
            rho1[i] = (1.0 - theta) * rho1[i] + theta * t1;
            rho2[i] = (1.0 - theta) * rho2[i] + theta * t2;
        }
        // symmetrize: rho1(x) <- (rho1(x) + rho2(-x))/2, rho2 = mirror(rho1)
        for i in 0..n {
            let m = grid.mirror(i);
            if i <= m {
                let a = 0.5 * (rho1[i] + rho2[m]);
                let b = 0.5 * (rho1[m] + rho2[i]);
                rho1[i] = a;
                rho1[m] = b;
            }
        }
        for i in 0..n {
            rho2[i] = rho1[grid.mirror(i)];
        }
    }

    if residual > opts.tol {
        return Err(SegError::NonConvergence {
            what: "front fixed-point iteration".into(),
            iterations,
            residual,
        });
    }

    Ok(FrontProfile {
        grid: grid.clone(),
        beta,
        rho_total,
        rho1,
        rho2,
        chem_pot: c,
        residual,
        iterations,
        phase,
    })
}

impl FrontProfile {
    /// Centered differences, one-sided at the ends (tails are flat there).
    pub fn derivative(&self, field: &[f64]) -> Vec<f64> {
        let n = field.len();
        let h = self.grid.spacing;
        let mut out = vec![0.0; n];
        for i in 0..n {
            out[i] = if i == 0 {
                (field[1] - field[0]) / h
            } else if i == n - 1 {
                (field[n - 1] - field[n - 2]) / h
            } else {
                (field[i + 1] - field[i - 1]) / (2.0 * h)
            };
        }
        out
    }

    pub fn rho1_prime(&self) -> Vec<f64> {
        self.derivative(&self.rho1)
    }

    pub fn rho2_prime(&self) -> Vec<f64> {
        self.derivative(&self.rho2)
    }

    /// Value of rho1 at x = 0, averaged over the two center cells.
    pub fn midpoint_rho1(&self) -> f64 {
        let n = self.grid.n_nodes;
        0.5 * (self.rho1[n / 2 - 1] + self.rho1[n / 2])
    }

    /// Sup-norm defect of the derivative identity
    /// `rho_i' + beta rho_i (U * rho_{i+1}') = 0`; O(h^2) for a converged front.
    pub fn derivative_identity_defect(&self, pot: &InteractionPotential) -> Result<f64> {
        let stencil = ConvolutionStencil::new(pot, &self.grid)?;
        let d1 = self.rho1_prime();
        let d2 = self.rho2_prime();
        // derivatives vanish at infinity: zero halo
        let c2 = stencil.apply(&d2, (0.0, 0.0));
        let c1 = stencil.apply(&d1, (0.0, 0.0));
        let n = self.grid.n_nodes;
        // skip the one-sided boundary cells
        let mut defect = 0.0f64;
        for i in 1..n - 1 {
            defect = defect
                .max((d1[i] + self.beta * self.rho1[i] * c2[i]).abs())
                .max((d2[i] + self.beta * self.rho2[i] * c1[i]).abs());
        }
        Ok(defect)
    }

    /// Sup-norm of `rho1'(x) + rho2'(-x)`; zero for the canonical symmetric
    /// minimizer.
    pub fn oddness_defect(&self) -> f64 {
        let d1 = self.rho1_prime();
        let d2 = self.rho2_prime();
        let mut worst = 0.0f64;
        for i in 0..d1.len() {
            worst = worst.max((d1[i] + d2[self.grid.mirror(i)]).abs());
        }
        worst
    }

    pub fn symmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rho1.len() {
            worst = worst.max((self.rho1[i] - self.rho2[self.grid.mirror(i)]).abs());
        }
        worst
    }

    /// True when both profiles stay within [rho_minus - tol, rho_plus + tol]
    /// and rho1 / rho2 are monotone up to `tol`.
    pub fn check_shape(&self, tol: f64) -> bool {
        let (rp, rm) = (self.phase.rho_plus, self.phase.rho_minus);
        let bounds = self
            .rho1
            .iter()
            .chain(self.rho2.iter())
            .all(|&v| v >= rm - tol && v <= rp + tol);
        let mono1 = self.rho1.windows(2).all(|w| w[1] - w[0] >= -tol);
        let mono2 = self.rho2.windows(2).all(|w| w[0] - w[1] >= -tol);
        bounds && mono1 && mono2
    }
}

/// Result of the excess-free-energy evaluation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ExcessFreeEnergy {
    pub value: f64,
    /// change when the window shrinks by 10% (truncation sensitivity)
    pub tail_sensitivity: f64,
    /// set when the profile tails deviate from the pure phases by > 1e-6
    pub truncation_dominated: bool,
}

/// Excess free energy over the grid window, in the rearranged symmetric-kernel
/// form whose integrand vanishes identically on pure phases:
/// `sum h [phi(rho) - phi(rho+, rho-)]
///  + beta/2 sum_{x,y} w(x-y) [rho1(x)-rho1(y)][rho2(y)-rho2(x)]`.
pub fn excess_free_energy(
    pot: &InteractionPotential,
    profile: &FrontProfile,
) -> Result<ExcessFreeEnergy> {
    let value = excess_on_window(pot, profile, profile.grid.half_length)?;
    let shrunk = excess_on_window(pot, profile, 0.9 * profile.grid.half_length)?;
    let n = profile.grid.n_nodes;
    let tail_dev = (profile.rho1[0] - profile.phase.rho_minus)
        .abs()
        .max((profile.rho1[n - 1] - profile.phase.rho_plus).abs());
    Ok(ExcessFreeEnergy {
        value,
        tail_sensitivity: (value - shrunk).abs(),
        truncation_dominated: tail_dev > 1e-6,
    })
}

/// Same functional evaluated for arbitrary density pairs (used to compare
/// the front against e.g. a sharp step with the same asymptotes).
pub fn excess_free_energy_of(
    pot: &InteractionPotential,
    grid: &SpatialGrid,
    beta: f64,
    phase: &PhasePoint,
    rho1: &[f64],
    rho2: &[f64],
    window: f64,
) -> Result<f64> {
    let h = grid.spacing;
    let stencil = ConvolutionStencil::new(pot, grid)?;
    let weights = stencil.weights().to_vec();
    let w = (weights.len() - 1) / 2;
    let n = grid.n_nodes;
    let bulk = phasediag::local_free_energy(beta, phase.rho_plus, phase.rho_minus)?;

    let inside: Vec<bool> = (0..n).map(|i| grid.node(i).abs() <= window).collect();
    let mut local = 0.0;
    for i in 0..n {
        if inside[i] {
            local += h * (phasediag::local_free_energy(beta, rho1[i], rho2[i])? - bulk);
        }
    }
    let mut pair = 0.0;
    for i in 0..n {
        if !inside[i] {
            continue;
        }
        for d in -(w as i64)..=(w as i64) {
            if d == 0 {
                continue;
            }
            let j = i as i64 - d;
            if j < 0 || j >= n as i64 {
                continue;
            }
            let j = j as usize;
            if !inside[j] {
                continue;
            }
            pair += h * weights[(d + w as i64) as usize] * (rho1[i] - rho1[j]) * (rho2[j] - rho2[i]);
        }
    }
    Ok(local + 0.5 * beta * pair)
}

fn excess_on_window(
    pot: &InteractionPotential,
    profile: &FrontProfile,
    window: f64,
) -> Result<f64> {
    excess_free_energy_of(
        pot,
        &profile.grid,
        profile.beta,
        &profile.phase,
        &profile.rho1,
        &profile.rho2,
        window,
    )
}

/// Hessian of the excess free energy at a density pair:
/// `(A u)_1 = u_1 / rho1 + beta U * u_2`, `(A u)_2 = u_2 / rho2 + beta U * u_1`,
/// acting on perturbations that vanish outside the window (zero halo).
#[derive(Debug, Clone)]
pub struct AOperator {
    inv_rho1: Vec<f64>,
    inv_rho2: Vec<f64>,
    stencil: ConvolutionStencil,
    beta: f64,
    n: usize,
}

impl AOperator {
    pub fn from_profile(pot: &InteractionPotential, profile: &FrontProfile) -> Result<Self> {
        Self::new(pot, &profile.grid, profile.beta, &profile.rho1, &profile.rho2)
    }

    /// Constant-coefficient variant (pure phases or the mixed state).
    pub fn with_constant_densities(
        pot: &InteractionPotential,
        grid: &SpatialGrid,
        beta: f64,
        rho1: f64,
        rho2: f64,
    ) -> Result<Self> {
        Self::new(
            pot,
            grid,
            beta,
            &vec![rho1; grid.n_nodes],
            &vec![rho2; grid.n_nodes],
        )
    }

    fn new(
        pot: &InteractionPotential,
        grid: &SpatialGrid,
        beta: f64,
        rho1: &[f64],
        rho2: &[f64],
    ) -> Result<Self> {
        if rho1.iter().chain(rho2.iter()).any(|&v| !(v > 0.0)) {
            return Err(SegError::Domain("densities must be positive".into()));
        }
        Ok(Self {
            inv_rho1: rho1.iter().map(|v| 1.0 / v).collect(),
            inv_rho2: rho2.iter().map(|v| 1.0 / v).collect(),
            stencil: ConvolutionStencil::new(pot, grid)?,
            beta,
            n: grid.n_nodes,
        })
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    /// y = A u for u = (u1, u2) packed as [u1, u2].
    pub fn apply(&self, u: &[f64], y: &mut [f64]) {
        let n = self.n;
        let (u1, u2) = u.split_at(n);
        let c2 = self.stencil.apply(u2, (0.0, 0.0));
        let c1 = self.stencil.apply(u1, (0.0, 0.0));
        for i in 0..n {
            y[i] = self.inv_rho1[i] * u1[i] + self.beta * c2[i];
            y[n + i] = self.inv_rho2[i] * u2[i] + self.beta * c1[i];
        }
    }

    /// `<u, A u>` in the h-weighted inner product, symmetric and nonnegative
    /// at a minimizer.
    pub fn quadratic_form(&self, u: &[f64], h: f64) -> f64 {
        let mut y = vec![0.0; u.len()];
        self.apply(u, &mut y);
        h * u.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Gershgorin upper bound on the spectrum.
    pub fn spectral_upper_bound(&self) -> f64 {
        let diag = self
            .inv_rho1
            .iter()
            .chain(self.inv_rho2.iter())
            .fold(0.0f64, |m, &v| m.max(v));
        let offdiag: f64 = self
            .stencil
            .weights()
            .iter()
            .map(|w| w.abs())
            .sum();
        diag + self.beta * offdiag
    }

    /// Dense symmetric 2N x 2N representation (oracle / small problems).
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.n;
        let w = self.stencil.weights();
        let half = (w.len() - 1) / 2;
        let mut m = nalgebra::DMatrix::<f64>::zeros(2 * n, 2 * n);
        for i in 0..n {
            m[(i, i)] = self.inv_rho1[i];
            m[(n + i, n + i)] = self.inv_rho2[i];
            for d in -(half as i64)..=(half as i64) {
                let j = i as i64 - d;
                if j < 0 || j >= n as i64 {
                    continue;
                }
                let wd = self.beta * w[(d + half as i64) as usize];
                m[(i, n + j as usize)] += wd;
                m[(n + j as usize, i)] += wd;
            }
        }
        // the convolution weights are symmetric, so m is symmetric; enforce
        // exactly against roundoff
        let mt = m.transpose();
        (m + mt) * 0.5
    }
}

/// Spectral data of A at a converged front.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SpectralGap {
    /// smallest Rayleigh quotient orthogonal to the translation mode
    pub gap: f64,
    /// ||A rho_bar'||_2 / ||rho_bar'||_2
    pub null_residual: f64,
}

/// Build A from the profile and compute (gap, null residual). The gap is the
/// smallest eigenvalue over the complement of span{rho_bar'}, computed by a
/// deflated Lanczos iteration (independent of dense eigensolvers).
pub fn spectral_gap(
    pot: &InteractionPotential,
    profile: &FrontProfile,
    tol: f64,
) -> Result<SpectralGap> {
    let a = AOperator::from_profile(pot, profile)?;
    let n = profile.grid.n_nodes;
    let mut dprime = profile.rho1_prime();
    dprime.extend(profile.rho2_prime());
    let norm_d = dprime.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm_d == 0.0 {
        return Err(SegError::Domain("front derivative vanished".into()));
    }
    let mut adp = vec![0.0; 2 * n];
    a.apply(&dprime, &mut adp);
    let null_residual = adp.iter().map(|v| v * v).sum::<f64>().sqrt() / norm_d;

    let upper = a.spectral_upper_bound();
    let (gap, _) = linalg::smallest_eigenvalue_deflated(
        |x, y| a.apply(x, y),
        2 * n,
        &[dprime],
        upper,
        600.min(2 * n),
        tol,
    );
    Ok(SpectralGap { gap, null_residual })
}

/// Smallest eigenvalue of the constant-coefficient A (trivial null space).
pub fn constant_coefficient_gap(
    pot: &InteractionPotential,
    grid: &SpatialGrid,
    beta: f64,
    rho1: f64,
    rho2: f64,
    tol: f64,
) -> Result<f64> {
    let a = AOperator::with_constant_densities(pot, grid, beta, rho1, rho2)?;
    let upper = a.spectral_upper_bound();
    let (gap, _) = linalg::smallest_eigenvalue_deflated(
        |x, y| a.apply(x, y),
        a.dim(),
        &[],
        upper,
        600.min(a.dim()),
        tol,
    );
    Ok(gap)
}

/// Exponential decay rate of the right tail, by a least-squares fit of
/// `ln |rho1(x) - rho_plus|` over a window.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TailDecay {
    pub rate: f64,
    pub fit_residual: f64,
    pub window: (f64, f64),
    pub n_points: usize,
}

pub fn tail_decay_rate(profile: &FrontProfile, window: Option<(f64, f64)>) -> Result<TailDecay> {
    let l = profile.grid.half_length;
    let (x_lo, x_hi) = window.unwrap_or((l - 4.0, l - 1.0));
    if x_hi - x_lo < 0.5 || x_hi > l {
        return Err(SegError::Config(format!(
            "bad tail fit window ({x_lo}, {x_hi}) for L = {l}"
        )));
    }
    let rp = profile.phase.rho_plus;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..profile.grid.n_nodes {
        let x = profile.grid.node(i);
        if x < x_lo || x > x_hi {
            continue;
        }
        let dev = (profile.rho1[i] - rp).abs();
        if dev > 1e-14 {
            xs.push(x);
            ys.push(dev.ln());
        }
    }
    if xs.len() < 8 {
        return Err(SegError::Domain(
            "tail underflows in the fit window; shrink the window".into(),
        ));
    }
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|v| v * v).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(a, b)| a * b).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let mut ss = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        let r = y - (slope * x + intercept);
        ss += r * r;
    }
    Ok(TailDecay {
        rate: -slope,
        fit_residual: (ss / n).sqrt(),
        window: (x_lo, x_hi),
        n_points: xs.len(),
    })
}
