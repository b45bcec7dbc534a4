//! Local free energy and the homogeneous phase diagram on the (beta, rho)
//! plane: pure-phase densities, regime classification, bifurcation scans.

use crate::error::{Result, SegError};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Regime::Subcritical => write!(f, "subcritical"),
            Regime::Critical => write!(f, "critical"),
            Regime::Supercritical => write!(f, "supercritical"),
        }
    }
}

/// A point on the bifurcation diagram. `m` is the order parameter,
/// `rho_plus - rho_minus = m * rho_total` and `rho_plus + rho_minus = rho_total`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PhasePoint {
    pub beta: f64,
    pub rho_total: f64,
    pub m: f64,
    pub rho_plus: f64,
    pub rho_minus: f64,
    pub regime: Regime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MixedPhaseKind {
    Minimizer,
    Degenerate,
    Maximizer,
}

const CRITICAL_TOL: f64 = 1e-12;

/// `phi(r1, r2) = r1 ln r1 + r2 ln r2 + beta r1 r2`.
pub fn local_free_energy(beta: f64, r1: f64, r2: f64) -> Result<f64> {
    if !(r1 > 0.0) || !(r2 > 0.0) {
        return Err(SegError::Domain(format!(
            "local free energy needs positive densities, got ({r1}, {r2})"
        )));
    }
    Ok(r1 * r1.ln() + r2 * r2.ln() + beta * r1 * r2)
}

/// Solve the stationarity condition `ln(r1/r2) = beta (r1 - r2)` on the line
/// r1 + r2 = rho_total. Reduces to `m = tanh(beta rho m / 2)`; the positive
/// root is bracketed by bisection when beta*rho > 2, otherwise m = 0.
pub fn pure_phases(beta: f64, rho_total: f64) -> Result<PhasePoint> {
    if !(beta > 0.0) || !(rho_total > 0.0) {
        return Err(SegError::Domain(format!(
            "pure_phases needs beta > 0 and rho > 0, got ({beta}, {rho_total})"
        )));
    }
    let br = beta * rho_total;
    let half = rho_total / 2.0;
    if (br - 2.0).abs() <= CRITICAL_TOL {
        return Ok(PhasePoint {
            beta,
            rho_total,
            m: 0.0,
            rho_plus: half,
            rho_minus: half,
            regime: Regime::Critical,
        });
    }
    if br < 2.0 {
        return Ok(PhasePoint {
            beta,
            rho_total,
            m: 0.0,
            rho_plus: half,
            rho_minus: half,
            regime: Regime::Subcritical,
        });
    }
    let g = |m: f64| m - (0.5 * br * m).tanh();
    let mut a = 1e-16;
    let mut b = 1.0 - 1e-16;
    debug_assert!(g(a) < 0.0 && g(b) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if g(mid) <= 0.0 {
            a = mid;
        } else {
            b = mid;
        }
        if b - a < 1e-16 {
            break;
        }
    }
    let m = 0.5 * (a + b);
    // deep quench: 1 - m underflows relative precision through the bisection;
    // refine the tail variable w = 1 - m by its own contraction
    // w = 2 / (exp(beta rho (1 - w)) + 1), which converges for small w
    let mut w = 1.0 - m;
    if br > 4.0 {
        for _ in 0..100 {
            let next = 2.0 / ((br * (1.0 - w)).exp() + 1.0);
            if (next - w).abs() <= 1e-17 * w.abs() {
                w = next;
                break;
            }
            w = next;
        }
    }
    Ok(PhasePoint {
        beta,
        rho_total,
        m: 1.0 - w,
        rho_plus: half * (2.0 - w),
        rho_minus: half * w,
        regime: Regime::Supercritical,
    })
}

/// Character of the mixed point (rho/2, rho/2): sign of the second derivative
/// of phi along the exchange direction, `4/rho - 2 beta`.
pub fn classify_mixed_phase(beta: f64, rho_total: f64) -> Result<MixedPhaseKind> {
    if !(beta > 0.0) || !(rho_total > 0.0) {
        return Err(SegError::Domain(format!(
            "classify_mixed_phase needs beta > 0 and rho > 0, got ({beta}, {rho_total})"
        )));
    }
    let second = 4.0 / rho_total - 2.0 * beta;
    Ok(if second.abs() <= CRITICAL_TOL * 2.0 {
        MixedPhaseKind::Degenerate
    } else if second > 0.0 {
        MixedPhaseKind::Minimizer
    } else {
        MixedPhaseKind::Maximizer
    })
}

/// Chemical potential of a phase point: `C = ln rho_plus + beta rho_minus`.
/// For the mixed phase this evaluates to `ln(rho/2) + beta rho/2`.
pub fn chemical_potential(point: &PhasePoint) -> f64 {
    point.rho_plus.ln() + point.beta * point.rho_minus
}

/// Sample the phase diagram on a uniform beta range.
pub fn bifurcation_scan(
    beta_min: f64,
    beta_max: f64,
    rho_total: f64,
    n_samples: usize,
) -> Result<Vec<PhasePoint>> {
    if n_samples < 2 {
        return Err(SegError::Config(format!(
            "bifurcation scan needs at least 2 samples, got {n_samples}"
        )));
    }
    if !(beta_max > beta_min) {
        return Err(SegError::Config(format!(
            "empty beta range [{beta_min}, {beta_max}]"
        )));
    }
    let mut out = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let beta = beta_min + (beta_max - beta_min) * i as f64 / (n_samples - 1) as f64;
        out.push(pure_phases(beta, rho_total)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle for the order parameter at beta*rho = 4:
    /// bisection on m - tanh(2m) over (0, 1) down to width 1e-14.
    fn m_oracle_beta2() -> f64 {
        let g = |m: f64| m - (2.0 * m).tanh();
        let (mut a, mut b) = (1e-12, 1.0 - 1e-12);
        while b - a > 1e-14 {
            let mid = 0.5 * (a + b);
            if g(mid) <= 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn free_energy_at_unit_densities() {
        for beta in [0.3, 1.0, 2.0, 7.5] {
            assert_eq!(local_free_energy(beta, 1.0, 1.0).unwrap(), beta);
        }
    }

    #[test]
    fn free_energy_symmetric() {
        let a = local_free_energy(2.0, 1.5, 0.5).unwrap();
        let b = local_free_energy(2.0, 0.5, 1.5).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn free_energy_rejects_nonpositive() {
        assert!(local_free_energy(1.0, 0.0, 1.0).is_err());
        assert!(local_free_energy(1.0, 1.0, -0.5).is_err());
    }

    #[test]
    fn pure_phases_beta2() {
        let p = pure_phases(2.0, 2.0).unwrap();
        let m = m_oracle_beta2();
        assert!((p.m - m).abs() < 1e-12, "m = {} vs oracle {}", p.m, m);
        assert!((p.m - 0.957504).abs() < 1e-6);
        assert!((p.rho_plus - 1.957504).abs() < 1e-6);
        assert!((p.rho_minus - 0.042496).abs() < 1e-6);
        assert_eq!(p.regime, Regime::Supercritical);
    }

    #[test]
    fn subcritical_and_critical() {
        let p = pure_phases(0.5, 2.0).unwrap();
        assert_eq!(p.m, 0.0);
        assert_eq!(p.regime, Regime::Subcritical);
        assert_eq!((p.rho_plus, p.rho_minus), (1.0, 1.0));

        let c = pure_phases(1.0, 2.0).unwrap();
        assert_eq!(c.m, 0.0);
        assert_eq!(c.regime, Regime::Critical);
    }

    #[test]
    fn segregated_minimum_beats_mixed() {
        let beta = 2.0;
        let p = pure_phases(beta, 2.0).unwrap();
        let seg = local_free_energy(beta, p.rho_plus, p.rho_minus).unwrap();
        let mixed = local_free_energy(beta, 1.0, 1.0).unwrap();
        assert!(seg < mixed);
    }

    #[test]
    fn mixed_phase_classification() {
        assert_eq!(
            classify_mixed_phase(2.0, 2.0).unwrap(),
            MixedPhaseKind::Maximizer
        );
        assert_eq!(
            classify_mixed_phase(0.5, 2.0).unwrap(),
            MixedPhaseKind::Minimizer
        );
        assert_eq!(
            classify_mixed_phase(1.0, 2.0).unwrap(),
            MixedPhaseKind::Degenerate
        );
    }

    #[test]
    fn root_consistency_and_chemical_potential_symmetry() {
        for beta in [1.2, 1.7, 2.0, 3.5, 8.0] {
            let p = pure_phases(beta, 2.0).unwrap();
            let root = ((p.rho_plus / p.rho_minus).ln() - beta * (p.rho_plus - p.rho_minus)).abs();
            assert!(root < 1e-10, "beta {beta}: root defect {root}");
            let c1 = p.rho_plus.ln() + beta * p.rho_minus;
            let c2 = p.rho_minus.ln() + beta * p.rho_plus;
            assert!((c1 - c2).abs() < 1e-10);
        }
    }

    #[test]
    fn chemical_potential_values() {
        let p = pure_phases(2.0, 2.0).unwrap();
        assert!((chemical_potential(&p) - 0.7567).abs() < 1e-4);
        let sub = pure_phases(0.5, 2.0).unwrap();
        assert!((chemical_potential(&sub) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn scan_monotone_and_zero_below_critical() {
        let table = bifurcation_scan(0.5, 1.5, 2.0, 21).unwrap();
        for p in &table {
            if p.beta <= 1.0 {
                assert_eq!(p.m, 0.0, "beta {}", p.beta);
            }
        }
        let grow = bifurcation_scan(1.0, 3.0, 2.0, 41).unwrap();
        for w in grow.windows(2) {
            assert!(w[1].m >= w[0].m);
            if w[0].beta > 1.0 {
                assert!(w[1].m > w[0].m, "strict growth past critical");
            }
        }
    }

    #[test]
    fn scan_endpoints_match_direct_calls() {
        let table = bifurcation_scan(1.1, 2.9, 2.0, 7).unwrap();
        let lo = pure_phases(1.1, 2.0).unwrap();
        let hi = pure_phases(2.9, 2.0).unwrap();
        assert_eq!(table.first().unwrap().m, lo.m);
        assert_eq!(table.last().unwrap().m, hi.m);
    }

    #[test]
    fn empty_range_rejected() {
        assert!(bifurcation_scan(2.0, 2.0, 2.0, 5).is_err());
        assert!(bifurcation_scan(1.0, 2.0, 2.0, 1).is_err());
    }

    #[test]
    fn absolute_minimizer_among_random_splits() {
        use rand::{RngExt, SeedableRng};
        let beta = 2.0;
        let p = pure_phases(beta, 2.0).unwrap();
        let best = local_free_energy(beta, p.rho_plus, p.rho_minus).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            let a = rng.random::<f64>() * 1.999 + 5e-4;
            let v = local_free_energy(beta, a, 2.0 - a).unwrap();
            assert!(best <= v + 1e-12);
        }
    }

    #[test]
    fn exchange_symmetry_under_relabeling() {
        // swapping species maps (rho+, rho-) to (rho-, rho+): same root data
        let p = pure_phases(2.4, 2.0).unwrap();
        assert!((p.rho_plus + p.rho_minus - 2.0).abs() < 1e-12);
        assert!((p.rho_plus - p.rho_minus - 2.0 * p.m).abs() < 1e-12);
        assert!(p.rho_plus >= p.rho_minus && p.rho_minus > 0.0);
    }
}
