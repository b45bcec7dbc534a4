//! Finite-volume building blocks for the phase-space stepper: second-order
//! flux-form advection with a positivity failsafe, and the conservative
//! relaxation collision step.

use crate::error::{Result, SegError};

/// Boundary handling for one advection sweep.
pub enum AdvectionBc<'a> {
    Periodic,
    /// ghost values beyond the left/right edge (constant inflow states)
    Ghost { left: &'a [f64], right: &'a [f64] },
    /// closed walls: both boundary fluxes forced to zero
    ZeroFlux,
}

/// One conservative advection substep at constant speed `c`:
/// `f_j -= (dt/h) (phi_{j+1/2} - phi_{j-1/2})` with Fromm-slope fluxes,
/// limited only where the update would drive a cell negative.
///
/// In smooth positive regions the correction fluxes telescope, so mass is
/// conserved exactly and low-order diffusion never activates.
pub fn advect(f: &mut [f64], c: f64, dt: f64, h: f64, bc: AdvectionBc<'_>) {
    let n = f.len();
    if c == 0.0 || n == 0 {
        return;
    }
    let nu = c * dt / h;
    debug_assert!(nu.abs() <= 1.0 + 1e-12, "CFL violated: nu = {nu}");

    // cell value with ghost handling; offset in [-2, n+1]
    let get = |idx: i64| -> f64 {
        if idx >= 0 && (idx as usize) < n {
            return f[idx as usize];
        }
        match &bc {
            AdvectionBc::Periodic => f[idx.rem_euclid(n as i64) as usize],
            AdvectionBc::Ghost { left, right } => {
                if idx < 0 {
                    let k = (-idx - 1) as usize;
                    left[k.min(left.len() - 1)]
                } else {
                    let k = (idx as usize - n).min(right.len() - 1);
                    right[k]
                }
            }
            AdvectionBc::ZeroFlux => 0.0,
        }
    };

    // faces j+1/2 for j in [-1, n-1]; face index i = j + 1 in [0, n]
    let n_faces = n + 1;
    let mut low = vec![0.0; n_faces];
    let mut anti = vec![0.0; n_faces];
    let closed = matches!(bc, AdvectionBc::ZeroFlux);
    for i in 0..n_faces {
        let j = i as i64 - 1; // donor side is j for c > 0, j+1 for c < 0
        if closed && (i == 0 || i == n_faces - 1) {
            continue;
        }
        let (upw, slope) = if c > 0.0 {
            let fm = get(j - 1);
            let f0 = get(j);
            let fp = get(j + 1);
            (f0, 0.5 * (fp - fm))
        } else {
            let f0 = get(j + 1);
            let fm = get(j);
            let fp = get(j + 2);
            (f0, 0.5 * (fp - fm))
        };
        low[i] = c * upw;
        anti[i] = c * 0.5 * (1.0 - nu.abs()) * slope * c.signum();
    }

    // low-order update is positivity-preserving under the CFL bound
    let lam = dt / h;
    let mut f_low = vec![0.0; n];
    for j in 0..n {
        f_low[j] = f[j] - lam * (low[j + 1] - low[j]);
    }

    // scale back antidiffusive fluxes that would empty a cell
    let mut ratio = vec![1.0f64; n];
    for j in 0..n {
        let out = lam * (anti[j + 1].max(0.0) - anti[j].min(0.0));
        if out > 0.0 && f_low[j] < out {
            ratio[j] = (f_low[j] / out).clamp(0.0, 1.0);
        }
    }
    let bounded = |j: i64| -> f64 {
        if j >= 0 && (j as usize) < n {
            ratio[j as usize]
        } else if matches!(bc, AdvectionBc::Periodic) {
            ratio[j.rem_euclid(n as i64) as usize]
        } else {
            1.0
        }
    };
    for j in 0..n {
        let c_r = if anti[j + 1] >= 0.0 {
            bounded(j as i64)
        } else {
            bounded(j as i64 + 1)
        };
        let c_l = if anti[j] >= 0.0 {
            bounded(j as i64 - 1)
        } else {
            bounded(j as i64)
        };
        f[j] = f_low[j] - lam * (c_r * anti[j + 1] - c_l * anti[j]);
    }
}

/// Discrete Maxwellian shape on the velocity grid: `exp(t0 + t1 v + t2 v^2)`
/// whose *discrete* moments (mass, mean, second moment) match the targets
/// exactly. Newton iteration starting from the analytic parameters.
pub fn discrete_maxwellian_shape(
    nodes: &[f64],
    dv: f64,
    u: f64,
    temp: f64,
) -> Result<Vec<f64>> {
    if !(temp > 0.0) {
        return Err(SegError::Domain(format!(
            "nonpositive temperature {temp} in collision step"
        )));
    }
    let mut th = [
        -(2.0 * std::f64::consts::PI * temp).ln() / 2.0 - u * u / (2.0 * temp),
        u / temp,
        -1.0 / (2.0 * temp),
    ];
    let targets = [1.0, u, u * u + temp];
    let scale = [1.0, u.abs() + temp.sqrt(), u * u + temp];
    let mut m = vec![0.0; nodes.len()];
    for it in 0..50 {
        let mut g = [0.0f64; 3];
        let mut mom = [0.0f64; 5];
        for (j, &v) in nodes.iter().enumerate() {
            let e = (th[0] + th[1] * v + th[2] * v * v).exp();
            m[j] = e;
            let mut p = dv * e;
            for mom_p in mom.iter_mut() {
                *mom_p += p;
                p *= v;
            }
        }
        for p in 0..3 {
            g[p] = mom[p] - targets[p];
        }
        let worst = (0..3).map(|p| (g[p] / scale[p]).abs()).fold(0.0, f64::max);
        if worst < 1e-14 {
            return Ok(m);
        }
        // Jacobian is the moment matrix [mom_{p+q}]
        let a = [
            [mom[0], mom[1], mom[2]],
            [mom[1], mom[2], mom[3]],
            [mom[2], mom[3], mom[4]],
        ];
        let d = solve3(a, g).ok_or_else(|| {
            SegError::NonConvergence {
                what: "collision Maxwellian Newton (singular moments)".into(),
                iterations: it,
                residual: worst,
            }
        })?;
        for (t, dd) in th.iter_mut().zip(d) {
            *t -= dd;
        }
    }
    Err(SegError::NonConvergence {
        what: "collision Maxwellian Newton".into(),
        iterations: 50,
        residual: f64::NAN,
    })
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv_det = 1.0 / det;
    let x = [
        (b[0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (b[1] * a[2][2] - a[1][2] * b[2])
            + a[0][2] * (b[1] * a[2][1] - a[1][1] * b[2]))
            * inv_det,
        (a[0][0] * (b[1] * a[2][2] - a[1][2] * b[2])
            - b[0] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * b[2] - b[1] * a[2][0]))
            * inv_det,
        (a[0][0] * (a[1][1] * b[2] - b[1] * a[2][1])
            - a[0][1] * (a[1][0] * b[2] - b[1] * a[2][0])
            + b[0] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]))
            * inv_det,
    ];
    Some(x)
}
