//! Growth-rate and escape-time experiments around the homogeneous state, and
//! boundedness experiments around the front / pure-phase / mixed equilibria.

use super::{
    cfl_dt_x, diagnostics, maxwellian_state, step, DiagnosticsConfig, DiagnosticsRecord,
    SimConfig,
};
use crate::dispersion::{
    build_talpha, rightmost_eigenvalue, CollisionModel, EigenResult, ProjectionSpan,
};
use crate::error::{Result, SegError};
use crate::front::{solve_front, FrontProfile, FrontSolverOptions};
use crate::kernel::{maxwellian_1d, InteractionPotential, SpatialGrid, VelocityGrid};
use nalgebra::Complex;
use serde::{Deserialize, Serialize};

/// Numerical knobs shared by both experiments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentGrids {
    pub nx: usize,
    pub nv: usize,
    pub cfl: f64,
    pub output_every: usize,
}

impl Default for ExperimentGrids {
    fn default() -> Self {
        Self {
            nx: 128,
            nv: 128,
            cfl: 0.85,
            output_every: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EscapeRecord {
    pub delta: f64,
    pub t_escape_w: Option<f64>,
    pub t_escape_l2: Option<f64>,
    pub fitted_rate: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstabilityReport {
    pub beta: f64,
    pub k0: f64,
    pub alpha: f64,
    /// rightmost eigenvalue of the segregation-channel linearized operator
    pub lambda_ref: f64,
    /// rate fitted from the smallest-delta run
    pub fitted_rate: f64,
    pub rate_rel_err: f64,
    pub theta_w: f64,
    pub theta_l2: f64,
    pub escapes: Vec<EscapeRecord>,
    /// a box harmonic grows faster than the seeded mode (fit unreliable)
    pub harmonic_takeover: bool,
    /// least-squares slope of t_escape against ln(1/delta), expected 1/lambda
    pub escape_slope: Option<f64>,
    pub escape_slope_expected: f64,
    pub escape_slope_rel_err: Option<f64>,
    pub series: Vec<Vec<DiagnosticsRecord>>,
    /// end state of the last (smallest-delta) run, for snapshot output
    #[serde(skip)]
    pub final_state: Option<super::SpeciesState>,
}

/// Eigenmode-seeded growth experiment on a periodic cell of one unstable
/// wavelength. The perturbation enters anti-symmetrically between the
/// species (the segregation channel) with the phase-space symmetry
/// g1(x, v) = g2(-x, -v).
#[allow(clippy::too_many_arguments)]
pub fn run_instability_experiment(
    pot: &InteractionPotential,
    beta: f64,
    k0: f64,
    delta_list: &[f64],
    theta_scale: f64,
    alpha: f64,
    nu0: f64,
    grids: &ExperimentGrids,
    t_end: Option<f64>,
) -> Result<InstabilityReport> {
    if beta * pot.uhat(k0) <= 1.0 {
        return Err(SegError::Config(format!(
            "k0 = {k0} lies outside the unstable band at beta = {beta}"
        )));
    }
    if delta_list.is_empty() {
        return Err(SegError::Config("need at least one delta".into()));
    }

    // reference growing mode of the linearized operator in this channel
    let collision = if alpha > 0.0 {
        CollisionModel::bgk(nu0, alpha).with_span(ProjectionSpan::MassOnly)
    } else {
        CollisionModel::none()
    };
    let gh = VelocityGrid::gauss_hermite(128, beta)?;
    let op = build_talpha(pot, beta, k0, collision, &gh)?;
    let eig = rightmost_eigenvalue(&op)?;
    let lambda_ref = eig.lambda_re;
    if lambda_ref <= 0.0 {
        return Err(SegError::Config(format!(
            "no growing mode at (beta, k, alpha) = ({beta}, {k0}, {alpha})"
        )));
    }
    // a box harmonic that grows faster than the seeded mode will eventually
    // take over the fit; flag it so callers pick k0 near the peak of lambda(k)
    let mut harmonic_takeover = false;
    for n in 2..=6 {
        if let Some(l_n) = crate::dispersion::growth_rate(pot, beta, n as f64 * k0)? {
            if l_n > lambda_ref {
                harmonic_takeover = true;
            }
        }
    }

    let period = 2.0 * std::f64::consts::PI / k0;
    let xgrid = SpatialGrid::periodic(period, grids.nx)?;
    let vgrid = VelocityGrid::uniform(6.5 / beta.sqrt(), grids.nv)?;

    let theta_w = theta_scale * equilibrium_w_scale(beta, &vgrid, 1.0, 2.0);
    let mass_total = 2.0 * period;
    let theta_l2 = theta_scale * mass_total.sqrt();

    let mut escapes = Vec::new();
    let mut series_all = Vec::new();
    let mut fitted_smallest = None;
    let mut final_state = None;
    let mut sorted: Vec<f64> = delta_list.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());

    for &delta in &sorted {
        let run_t_end = t_end.unwrap_or_else(|| {
            ((theta_l2 / (delta * mass_total.sqrt())).ln() / lambda_ref) * 1.6 + 10.0
        });
        let (series, esc_w, esc_l2, state) = run_single_delta(
            pot, beta, k0, delta, alpha, nu0, &xgrid, &vgrid, &op, &eig, collision, grids,
            run_t_end, theta_w, theta_l2,
        )?;
        final_state = Some(state);
        let rate = fit_growth_rate(&series, theta_l2);
        escapes.push(EscapeRecord {
            delta,
            t_escape_w: esc_w,
            t_escape_l2: esc_l2,
            fitted_rate: rate,
        });
        fitted_smallest = rate.or(fitted_smallest);
        series_all.push(series);
    }

    let fitted_rate = fitted_smallest.ok_or_else(|| SegError::NonConvergence {
        what: "growth-rate fit window never filled".into(),
        iterations: 0,
        residual: f64::NAN,
    })?;
    let rate_rel_err = (fitted_rate - lambda_ref).abs() / lambda_ref;

    // escape-time scaling: t = (1/lambda) ln(theta/delta) + const
    let pts: Vec<(f64, f64)> = escapes
        .iter()
        .filter_map(|e| e.t_escape_w.map(|t| ((1.0 / e.delta).ln(), t)))
        .collect();
    let escape_slope = if pts.len() >= 2 {
        Some(least_squares_slope(&pts))
    } else {
        None
    };
    let escape_slope_expected = 1.0 / lambda_ref;
    let escape_slope_rel_err =
        escape_slope.map(|s| (s - escape_slope_expected).abs() / escape_slope_expected);

    Ok(InstabilityReport {
        beta,
        k0,
        alpha,
        lambda_ref,
        fitted_rate,
        rate_rel_err,
        theta_w,
        theta_l2,
        escapes,
        harmonic_takeover,
        escape_slope,
        escape_slope_expected,
        escape_slope_rel_err,
        series: series_all,
        final_state,
    })
}

/// `max_v w(v) sqrt(mu_1(v))`: the weighted amplitude at which a
/// perturbation becomes comparable to the equilibrium itself.
pub fn equilibrium_w_scale(beta: f64, vgrid: &VelocityGrid, sigma: f64, gamma: f64) -> f64 {
    vgrid
        .nodes
        .iter()
        .map(|&v| (sigma + v * v).powf(gamma) * maxwellian_1d(beta, v).sqrt())
        .fold(0.0, f64::max)
}

#[allow(clippy::too_many_arguments)]
fn run_single_delta(
    pot: &InteractionPotential,
    beta: f64,
    k0: f64,
    delta: f64,
    _alpha: f64,
    _nu0: f64,
    xgrid: &SpatialGrid,
    vgrid: &VelocityGrid,
    op: &crate::dispersion::TalphaOperator,
    eig: &EigenResult,
    collision: CollisionModel,
    grids: &ExperimentGrids,
    t_end: f64,
    theta_w: f64,
    theta_l2: f64,
) -> Result<(Vec<DiagnosticsRecord>, Option<f64>, Option<f64>, super::SpeciesState)> {
    let nx = xgrid.n_nodes;
    let nv = vgrid.len();
    let reference = maxwellian_state(xgrid, vgrid, &vec![1.0; nx], &vec![1.0; nx], beta)?;
    let mut state = reference.clone();

    // r(x, v) = Im[q(v) e^{ik0 x} - q(-v) e^{-ik0 x}] is odd under
    // (x, v) -> (-x, -v); seeded anti-symmetrically between the species it
    // satisfies g1(x, v) = g2(-x, -v).
    let mut clipped = 0usize;
    let mut seeded_mass = 0.0f64;
    for ix in 0..nx {
        let x = xgrid.node(ix);
        let phase = Complex::new(0.0, k0 * x).exp();
        for iv in 0..nv {
            let v = vgrid.nodes[iv];
            let q_p = eig.evaluate_mode(op.uhat, &collision, v);
            let q_m = eig.evaluate_mode(op.uhat, &collision, -v);
            let r = (q_p * phase - q_m * phase.conj()).im;
            let smu = maxwellian_1d(beta, v).sqrt();
            let mu = smu * smu;
            let mut bump = delta * r * smu;
            // positivity cutoff: zero the perturbation where it would
            // overwhelm the Maxwellian tail
            if bump.abs() > 0.9 * mu {
                bump = 0.0;
                clipped += 1;
            }
            let idx = ix * nv + iv;
            state.f1[idx] += bump;
            state.f2[idx] -= bump;
            seeded_mass += bump.abs();
        }
    }
    if seeded_mass == 0.0 {
        return Err(SegError::Config(
            "delta too large: the positivity cutoff removed the whole perturbation; \
             use a smaller delta"
                .into(),
        ));
    }
    if clipped * 10 > nx * nv {
        return Err(SegError::Config(format!(
            "delta = {delta} too large: positivity cutoff removed {clipped} of {} nodes",
            nx * nv
        )));
    }

    let dt = cfl_dt_x(&state, grids.cfl);
    let cfg = SimConfig {
        dt,
        cfl_limit: grids.cfl.max(0.9),
        collision,
        t_end,
        output_every: grids.output_every,
    };
    let dcfg = DiagnosticsConfig::new(beta, beta);
    let mut series = vec![diagnostics(pot, &state, &reference, &dcfg)?];
    let mut esc_w = None;
    let mut esc_l2 = None;
    let steps = (t_end / dt).ceil() as usize;
    let mut done = 0usize;
    while done < steps {
        for _ in 0..grids.output_every.min(steps - done) {
            step(pot, &mut state, &cfg)?;
            done += 1;
        }
        let rec = diagnostics(pot, &state, &reference, &dcfg)?;
        if esc_w.is_none() && rec.w_linf >= theta_w {
            esc_w = Some(rec.t);
        }
        if esc_l2.is_none() && rec.l2 >= theta_l2 {
            esc_l2 = Some(rec.t);
        }
        series.push(rec);
        if esc_w.is_some() && esc_l2.is_some() {
            break;
        }
    }
    Ok((series, esc_w, esc_l2, state))
}

/// Least-squares slope of ln(L2) over the window where the amplitude is
/// clearly above the seed and safely below the escape threshold.
fn fit_growth_rate(series: &[DiagnosticsRecord], theta_l2: f64) -> Option<f64> {
    let l2_0 = series.first()?.l2;
    if l2_0 <= 0.0 {
        return None;
    }
    let cap = theta_l2 / 3.0;
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|r| r.l2 > 0.0 && r.l2 <= cap && r.l2 >= 1.5 * l2_0)
        .map(|r| (r.t, r.l2.ln()))
        .collect();
    if pts.len() < 8 {
        return None;
    }
    Some(least_squares_slope(&pts))
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Which equilibrium the boundedness experiment perturbs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum StabilityCase {
    /// front minimizer on a pinned grid of half-length `l`
    Front { l: f64 },
    /// segregated constants on a periodic cell
    PurePhase { period: f64 },
    /// mixed state (1, 1) on a periodic cell (stable for beta < 1)
    Mixed { period: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub beta: f64,
    pub case: StabilityCase,
    pub delta: f64,
    pub w_linf_initial: f64,
    pub w_linf_sup: f64,
    pub ratio: f64,
    pub bound: f64,
    pub pass: bool,
    pub series: Vec<DiagnosticsRecord>,
    #[serde(skip)]
    pub final_state: Option<super::SpeciesState>,
}

/// Evolve a small symmetric perturbation to `t_end` and record the worst
/// weighted sup norm relative to its initial value; PASS when the ratio
/// stays below `bound`.
#[allow(clippy::too_many_arguments)]
pub fn run_stability_experiment(
    pot: &InteractionPotential,
    beta: f64,
    case: StabilityCase,
    delta: f64,
    alpha: f64,
    nu0: f64,
    grids: &ExperimentGrids,
    t_end: f64,
    bound: f64,
) -> Result<StabilityReport> {
    let vgrid = VelocityGrid::uniform(6.5 / beta.sqrt(), grids.nv)?;
    let (xgrid, rho1, rho2, chem_pot, symmetric): (SpatialGrid, Vec<f64>, Vec<f64>, f64, bool) =
        match &case {
            StabilityCase::Front { l } => {
                let grid = SpatialGrid::pinned(*l, grids.nx, 0.0, 0.0)?;
                let prof: FrontProfile =
                    solve_front(pot, beta, &grid, &FrontSolverOptions::default(), None)?;
                let c = prof.chem_pot;
                (grid, prof.rho1, prof.rho2, c, true)
            }
            StabilityCase::PurePhase { period } => {
                let phase = crate::phasediag::pure_phases(beta, 2.0)?;
                if phase.m <= 0.0 {
                    return Err(SegError::Config(
                        "pure-phase case needs the segregated regime".into(),
                    ));
                }
                let grid = SpatialGrid::periodic(*period, grids.nx)?;
                let c = crate::phasediag::chemical_potential(&phase);
                (
                    grid,
                    vec![phase.rho_plus; grids.nx],
                    vec![phase.rho_minus; grids.nx],
                    c,
                    false,
                )
            }
            StabilityCase::Mixed { period } => {
                let grid = SpatialGrid::periodic(*period, grids.nx)?;
                (grid, vec![1.0; grids.nx], vec![1.0; grids.nx], beta, false)
            }
        };

    let reference = maxwellian_state(&xgrid, &vgrid, &rho1, &rho2, beta)?;
    let mut state = reference.clone();

    // localized perturbation; for the front case the discrete symmetry
    // g1(x, v) = g2(-x, -v) is imposed exactly
    let nx = xgrid.n_nodes;
    let nv = vgrid.len();
    for ix in 0..nx {
        let x = xgrid.node(ix);
        let envelope = (-x * x / 4.0).exp();
        for iv in 0..nv {
            let v = vgrid.nodes[iv];
            let smu = maxwellian_1d(beta, v).sqrt();
            let g = delta * envelope * ((1.3 * x).cos() + 0.5 * v * (0.7 * x).sin()) * smu;
            state.f1[ix * nv + iv] += g;
            if symmetric {
                let mx = nx - 1 - ix;
                let mv = nv - 1 - iv;
                state.f2[mx * nv + mv] += g;
            } else {
                state.f2[ix * nv + iv] += g * 0.5;
            }
        }
    }
    // keep densities positive
    for f in state.f1.iter_mut().chain(state.f2.iter_mut()) {
        if *f < 0.0 {
            *f = 0.0;
        }
    }

    let dt = cfl_dt_x(&state, grids.cfl);
    let cfg = SimConfig {
        dt,
        cfl_limit: grids.cfl.max(0.9),
        collision: if alpha > 0.0 {
            CollisionModel::bgk(nu0, alpha)
        } else {
            CollisionModel::none()
        },
        t_end,
        output_every: grids.output_every,
    };
    let dcfg = DiagnosticsConfig::new(beta, chem_pot);
    let first = diagnostics(pot, &state, &reference, &dcfg)?;
    let w0 = first.w_linf;
    if w0 == 0.0 {
        return Err(SegError::Config("zero initial perturbation".into()));
    }
    let mut series = vec![first];
    let mut sup = w0;
    let steps = (t_end / dt).ceil() as usize;
    let mut done = 0;
    while done < steps {
        for _ in 0..grids.output_every.min(steps - done) {
            step(pot, &mut state, &cfg)?;
            done += 1;
        }
        let rec = diagnostics(pot, &state, &reference, &dcfg)?;
        sup = sup.max(rec.w_linf);
        series.push(rec);
    }
    let ratio = sup / w0;
    Ok(StabilityReport {
        beta,
        case,
        delta,
        w_linf_initial: w0,
        w_linf_sup: sup,
        ratio,
        bound,
        pass: ratio <= bound,
        series,
        final_state: Some(state),
    })
}
