//! Characteristic curves of a force field: position, velocity, and the
//! phase-space shear dX/dv, integrated adaptively with conserved particle
//! energy as the accuracy witness.

use crate::error::{Result, SegError};
use crate::kernel::SpatialGrid;
use serde::{Deserialize, Serialize};

/// Natural cubic spline with analytic derivative and antiderivative.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x0: f64,
    h: f64,
    // per-interval coefficients: s(x) = a + b t + c t^2 + d t^3, t = x - x_i
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    d: Vec<f64>,
    /// antiderivative value at each knot (integral from the first knot)
    big: Vec<f64>,
}

impl CubicSpline {
    /// Build on a uniform grid starting at `x0` with spacing `h`.
    pub fn uniform(x0: f64, h: f64, y: &[f64]) -> Self {
        let n = y.len();
        assert!(n >= 3);
        // second derivatives m_i from the natural spline tridiagonal system
        let mut m = vec![0.0; n];
        if n > 2 {
            let mut diag = vec![4.0; n - 2];
            let mut rhs = vec![0.0; n - 2];
            for i in 1..n - 1 {
                rhs[i - 1] = 6.0 * (y[i + 1] - 2.0 * y[i] + y[i - 1]) / (h * h);
            }
            // Thomas algorithm with unit off-diagonals
            for i in 1..n - 2 {
                let w = 1.0 / diag[i - 1];
                diag[i] -= w;
                rhs[i] -= w * rhs[i - 1];
            }
            let mut sol = vec![0.0; n - 2];
            sol[n - 3] = rhs[n - 3] / diag[n - 3];
            for i in (0..n - 3).rev() {
                sol[i] = (rhs[i] - sol[i + 1]) / diag[i];
            }
            m[1..n - 1].copy_from_slice(&sol);
        }
        let mut a = Vec::with_capacity(n - 1);
        let mut b = Vec::with_capacity(n - 1);
        let mut c = Vec::with_capacity(n - 1);
        let mut d = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            a.push(y[i]);
            b.push((y[i + 1] - y[i]) / h - h * (2.0 * m[i] + m[i + 1]) / 6.0);
            c.push(m[i] / 2.0);
            d.push((m[i + 1] - m[i]) / (6.0 * h));
        }
        let mut big = vec![0.0; n];
        for i in 0..n - 1 {
            let seg = a[i] * h + b[i] * h * h / 2.0 + c[i] * h * h * h / 3.0
                + d[i] * h * h * h * h / 4.0;
            big[i + 1] = big[i] + seg;
        }
        Self { x0, h, a, b, c, d, big }
    }

    fn locate(&self, x: f64) -> (usize, f64) {
        let n_seg = self.a.len();
        let mut i = ((x - self.x0) / self.h).floor() as i64;
        i = i.clamp(0, n_seg as i64 - 1);
        (i as usize, x - (self.x0 + i as f64 * self.h))
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (i, t) = self.locate(x);
        self.a[i] + t * (self.b[i] + t * (self.c[i] + t * self.d[i]))
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let (i, t) = self.locate(x);
        self.b[i] + t * (2.0 * self.c[i] + t * 3.0 * self.d[i])
    }

    /// Integral from the first knot to x (within the knot range).
    pub fn antiderivative(&self, x: f64) -> f64 {
        let (i, t) = self.locate(x);
        self.big[i]
            + t * (self.a[i] + t * (self.b[i] / 2.0 + t * (self.c[i] / 3.0 + t * self.d[i] / 4.0)))
    }

    pub fn x_min(&self) -> f64 {
        self.x0
    }

    pub fn x_max(&self) -> f64 {
        self.x0 + self.h * self.a.len() as f64
    }
}

/// Static force field sampled on a spatial grid. The potential used in the
/// energy diagnostic is the analytic antiderivative of the force spline
/// (energy = v^2/2 - phi with phi' = F), so energy drift measures only the
/// time integrator.
#[derive(Debug, Clone)]
pub struct ForceField {
    spline: CubicSpline,
    periodic: Option<f64>,
    /// start of the core (unpadded) window for periodic wrapping
    core_lo: f64,
    /// constant extension beyond a pinned grid: (F_left, F_right)
    extension: (f64, f64),
}

impl ForceField {
    pub fn from_samples(grid: &SpatialGrid, force: &[f64]) -> Result<Self> {
        if force.len() != grid.n_nodes {
            return Err(SegError::Config("force samples do not match the grid".into()));
        }
        let spline = if grid.is_periodic() {
            // pad with wrapped ghosts so the natural-end boundary layer sits
            // outside the evaluation window
            let pad = 8.min(grid.n_nodes);
            let n = grid.n_nodes;
            let mut ext = Vec::with_capacity(n + 2 * pad);
            for i in 0..pad {
                ext.push(force[n - pad + i]);
            }
            ext.extend_from_slice(force);
            for item in force.iter().take(pad) {
                ext.push(*item);
            }
            CubicSpline::uniform(grid.node(0) - pad as f64 * grid.spacing, grid.spacing, &ext)
        } else {
            CubicSpline::uniform(grid.node(0), grid.spacing, force)
        };
        Ok(Self {
            periodic: if grid.is_periodic() {
                Some(2.0 * grid.half_length)
            } else {
                None
            },
            core_lo: grid.node(0),
            extension: (force[0], force[force.len() - 1]),
            spline,
        })
    }

    /// Maps x into the spline range; returns (mapped x, true) when the point
    /// needed the constant extension of a pinned field.
    fn map(&self, x: f64) -> (f64, bool) {
        match self.periodic {
            Some(p) => {
                let lo = self.spline.x_min() + 8.0f64.min(1e18) * 0.0; // core start below
                let core_lo = self.core_lo;
                let y = (x - core_lo).rem_euclid(p) + core_lo;
                let _ = lo;
                (y, false)
            }
            None => {
                if x < self.spline.x_min() {
                    (self.spline.x_min(), true)
                } else if x > self.spline.x_max() {
                    (self.spline.x_max(), true)
                } else {
                    (x, false)
                }
            }
        }
    }

    pub fn force(&self, x: f64) -> f64 {
        let (y, clipped) = self.map(x);
        if clipped {
            if x < self.spline.x_min() {
                self.extension.0
            } else {
                self.extension.1
            }
        } else {
            self.spline.eval(y)
        }
    }

    pub fn force_gradient(&self, x: f64) -> f64 {
        let (y, clipped) = self.map(x);
        if clipped {
            0.0
        } else {
            self.spline.deriv(y)
        }
    }

    /// phi(x) with phi' = F; linear continuation outside a pinned range.
    pub fn potential(&self, x: f64) -> f64 {
        let (y, clipped) = self.map(x);
        let base = self.spline.antiderivative(y);
        if clipped {
            if x < self.spline.x_min() {
                base + self.extension.0 * (x - self.spline.x_min())
            } else {
                base + self.extension.1 * (x - self.spline.x_max())
            }
        } else {
            base
        }
    }
}

/// Point on a characteristic trace.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrajectoryState {
    pub s: f64,
    pub x: f64,
    pub v: f64,
    /// variational derivatives with respect to the launch velocity
    pub dx_dv: f64,
    pub dv_dv: f64,
    /// v^2/2 - phi(x); constant along the exact flow
    pub energy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trace {
    pub samples: Vec<TrajectoryState>,
    /// true when the trajectory used the constant extension of a pinned field
    pub left_domain: bool,
}

/// Integrate (X, V, dX/dv, dV/dv) from s = t over `s_span`, sampling at
/// `n_samples` uniform times. Dormand-Prince 5(4) with PI step control.
pub fn integrate_characteristics(
    field: &ForceField,
    start: (f64, f64, f64),
    s_span: f64,
    tol: f64,
    n_samples: usize,
) -> Result<Trace> {
    let (t0, x0, v0) = start;
    if n_samples < 2 {
        return Err(SegError::Config("need at least 2 trace samples".into()));
    }
    let mut y = [x0, v0, 0.0, 1.0];
    let mut s = t0;
    let mut left_domain = false;
    let rhs = |_s: f64, y: &[f64; 4]| -> [f64; 4] {
        [
            y[1],
            field.force(y[0]),
            y[3],
            field.force_gradient(y[0]) * y[2],
        ]
    };
    let e0 = 0.5 * v0 * v0 - field.potential(x0);
    let mut samples = Vec::with_capacity(n_samples);
    samples.push(TrajectoryState {
        s: t0,
        x: x0,
        v: v0,
        dx_dv: 0.0,
        dv_dv: 1.0,
        energy: e0,
    });

    let mut h = (s_span / 100.0).max(1e-6).min(0.1);
    for i in 1..n_samples {
        let target = t0 + s_span * i as f64 / (n_samples - 1) as f64;
        while s < target {
            let h_try = h.min(target - s);
            let (y_new, err) = dopri_step(&rhs, s, &y, h_try);
            let scale = tol + tol * y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if err <= scale {
                s += h_try;
                y = y_new;
                if field.periodic.is_none()
                    && (y[0] < field.spline.x_min() || y[0] > field.spline.x_max())
                {
                    left_domain = true;
                }
            }
            let safety = 0.9 * (scale / err.max(1e-300)).powf(0.2);
            h = (h_try * safety.clamp(0.2, 5.0)).min(0.5);
            if h < 1e-12 {
                return Err(SegError::NonConvergence {
                    what: "characteristic integrator step collapse".into(),
                    iterations: i,
                    residual: err,
                });
            }
        }
        samples.push(TrajectoryState {
            s,
            x: y[0],
            v: y[1],
            dx_dv: y[2],
            dv_dv: y[3],
            energy: 0.5 * y[1] * y[1] - field.potential(y[0]),
        });
    }
    Ok(Trace {
        samples,
        left_domain,
    })
}

/// One Dormand-Prince 5(4) step; returns (solution, error estimate).
fn dopri_step<F: Fn(f64, &[f64; 4]) -> [f64; 4]>(
    f: &F,
    s: f64,
    y: &[f64; 4],
    h: f64,
) -> ([f64; 4], f64) {
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const C: [f64; 6] = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let mut k = [[0.0f64; 4]; 7];
    k[0] = f(s, y);
    for stage in 0..6 {
        let mut yi = *y;
        for (j, kj) in k.iter().enumerate().take(stage + 1) {
            for d in 0..4 {
                yi[d] += h * A[stage][j] * kj[d];
            }
        }
        k[stage + 1] = f(s + C[stage] * h, &yi);
    }
    // stage 7 coefficients are the 5th-order solution weights (FSAL form)
    let y_new = {
        let mut out = *y;
        for d in 0..4 {
            out[d] += h
                * (35.0 / 384.0 * k[0][d]
                    + 500.0 / 1113.0 * k[2][d]
                    + 125.0 / 192.0 * k[3][d]
                    - 2187.0 / 6784.0 * k[4][d]
                    + 11.0 / 84.0 * k[5][d]);
        }
        out
    };
    let mut err = 0.0f64;
    for d in 0..4 {
        let mut e = 0.0;
        for (j, kj) in k.iter().enumerate() {
            e += E[j] * kj[d];
        }
        err = err.max((h * e).abs());
    }
    (y_new, err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::front::{solve_front, FrontSolverOptions};
    use crate::kernel::{vlasov_force_with_halo, InteractionPotential};

    #[test]
    fn spline_linear_exact_quadratic_interior() {
        // natural end conditions are exact for linear data everywhere
        let lin = |x: f64| 0.7 - 2.0 * x;
        let yl: Vec<f64> = (0..50).map(|i| lin(-2.0 + 0.1 * i as f64)).collect();
        let spl = CubicSpline::uniform(-2.0, 0.1, &yl);
        for i in 0..400 {
            let x = -1.95 + i as f64 * 0.0097;
            assert!((spl.eval(x) - lin(x)).abs() < 1e-12);
            assert!((spl.deriv(x) + 2.0).abs() < 1e-10);
        }
        // quadratics: the natural boundary layer decays geometrically, so the
        // interior is clean two units in from the ends
        let f = |x: f64| 1.0 + x - 0.5 * x * x;
        let y: Vec<f64> = (0..81).map(|i| f(-4.0 + 0.1 * i as f64)).collect();
        let sp = CubicSpline::uniform(-4.0, 0.1, &y);
        for i in 0..200 {
            let x = -1.0 + i as f64 * 0.01;
            assert!((sp.eval(x) - f(x)).abs() < 1e-10);
            assert!((sp.deriv(x) - (1.0 - x)).abs() < 1e-8);
        }
        // antiderivative consistency: d/dx int = value
        let x = 0.73;
        let d = 1e-6;
        let fd = (sp.antiderivative(x + d) - sp.antiderivative(x - d)) / (2.0 * d);
        assert!((fd - sp.eval(x)).abs() < 1e-8);
    }

    #[test]
    fn free_motion_is_exact() {
        let grid = SpatialGrid::periodic(20.0, 64).unwrap();
        let field = ForceField::from_samples(&grid, &vec![0.0; 64]).unwrap();
        let trace = integrate_characteristics(&field, (0.0, 1.0, 0.7), 10.0, 1e-12, 11).unwrap();
        for p in &trace.samples {
            assert!((p.x - (1.0 + 0.7 * (p.s))).abs() < 1e-10);
            assert!((p.v - 0.7).abs() < 1e-12);
            assert!((p.dx_dv - p.s).abs() < 1e-10);
            assert!((p.dv_dv - 1.0).abs() < 1e-12);
        }
    }

    fn front_force_field() -> (SpatialGrid, ForceField) {
        let pot = InteractionPotential::default_bump();
        let grid = SpatialGrid::pinned(10.0, 512, 0.0, 0.0).unwrap();
        let prof = solve_front(&pot, 2.0, &grid, &FrontSolverOptions::default(), None).unwrap();
        let f = vlasov_force_with_halo(
            &pot,
            &grid,
            &prof.rho2,
            (prof.phase.rho_plus, prof.phase.rho_minus),
        )
        .unwrap();
        let field = ForceField::from_samples(&grid, &f).unwrap();
        (grid, field)
    }

    #[test]
    fn energy_conserved_in_front_field() {
        let (_grid, field) = front_force_field();
        let trace =
            integrate_characteristics(&field, (0.0, -1.0, 0.8), 20.0, 1e-12, 201).unwrap();
        let e0 = trace.samples[0].energy;
        for p in &trace.samples {
            assert!(
                (p.energy - e0).abs() <= 1e-9,
                "energy drift {} at s = {}",
                (p.energy - e0).abs(),
                p.s
            );
        }
    }

    #[test]
    fn shear_matches_finite_difference() {
        let (_grid, field) = front_force_field();
        let dv = 1e-5;
        let base = integrate_characteristics(&field, (0.0, 0.3, 0.9), 12.0, 1e-12, 25).unwrap();
        let up =
            integrate_characteristics(&field, (0.0, 0.3, 0.9 + dv), 12.0, 1e-12, 25).unwrap();
        let dn =
            integrate_characteristics(&field, (0.0, 0.3, 0.9 - dv), 12.0, 1e-12, 25).unwrap();
        for ((p, u), d) in base.samples.iter().zip(&up.samples).zip(&dn.samples) {
            let fd = (u.x - d.x) / (2.0 * dv);
            let denom = p.dx_dv.abs().max(1.0);
            assert!(
                ((p.dx_dv - fd) / denom).abs() < 1e-5,
                "s = {}: dX/dv {} vs fd {}",
                p.s,
                p.dx_dv,
                fd
            );
        }
    }

    #[test]
    fn pinned_exit_is_flagged() {
        let (_grid, field) = front_force_field();
        // launch fast enough to leave [-10, 10] within the span
        let trace = integrate_characteristics(&field, (0.0, 8.0, 2.0), 5.0, 1e-10, 11).unwrap();
        assert!(trace.left_domain);
    }

    #[test]
    fn periodic_wrapping() {
        let grid = SpatialGrid::periodic(10.0, 128).unwrap();
        let force: Vec<f64> = grid.nodes().iter().map(|&x| -0.2 * (0.628318530717959 * x).sin()).collect();
        let field = ForceField::from_samples(&grid, &force).unwrap();
        let trace = integrate_characteristics(&field, (0.0, 4.0, 1.5), 30.0, 1e-11, 61).unwrap();
        assert!(!trace.left_domain);
        let e0 = trace.samples[0].energy;
        for p in &trace.samples {
            assert!((p.energy - e0).abs() < 2e-4, "wrap energy drift {}", (p.energy - e0).abs());
        }
    }
}
