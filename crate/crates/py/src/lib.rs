//! Python bindings for the segregation-kinetics toolkit: the interaction
//! potential, phase diagram, front minimizer, dispersion analysis and the
//! characteristics integrator.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use segkin_core::dispersion::{self, CollisionModel, ProjectionSpan};
use segkin_core::error::SegError;
use segkin_core::front::{self, FrontSolverOptions};
use segkin_core::kernel::{InteractionPotential, SpatialGrid, VelocityGrid};
use segkin_core::kinetics::characteristics::{integrate_characteristics, ForceField};
use segkin_core::phasediag;

fn err(e: SegError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Repulsive cross-species interaction kernel with unit range and unit mass.
#[pyclass]
struct Potential {
    inner: InteractionPotential,
}

#[pymethods]
impl Potential {
    /// kind: "bump" (with even degree >= 2) or "mollifier"
    #[new]
    #[pyo3(signature = (kind="bump", degree=6))]
    fn new(kind: &str, degree: u32) -> PyResult<Self> {
        let inner = match kind {
            "bump" => InteractionPotential::polynomial_bump(degree).map_err(err)?,
            "mollifier" => InteractionPotential::mollifier(),
            other => return Err(PyValueError::new_err(format!("unknown kind `{other}`"))),
        };
        Ok(Self { inner })
    }

    fn eval(&self, r: f64) -> PyResult<f64> {
        self.inner.eval(r).map_err(err)
    }

    /// Fourier transform Uhat(k); real by evenness, Uhat(0) = 1.
    fn uhat(&self, k: f64) -> f64 {
        self.inner.uhat(k)
    }

    fn describe(&self) -> String {
        self.inner.describe()
    }
}

/// Pure-phase densities and regime at (beta, rho_total).
#[pyfunction]
#[pyo3(signature = (beta, rho_total=2.0))]
fn pure_phases(py: Python<'_>, beta: f64, rho_total: f64) -> PyResult<Py<PyDict>> {
    let p = phasediag::pure_phases(beta, rho_total).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("beta", p.beta)?;
    d.set_item("m", p.m)?;
    d.set_item("rho_plus", p.rho_plus)?;
    d.set_item("rho_minus", p.rho_minus)?;
    d.set_item("regime", p.regime.to_string())?;
    d.set_item("chemical_potential", phasediag::chemical_potential(&p))?;
    Ok(d.unbind())
}

/// r1 ln r1 + r2 ln r2 + beta r1 r2
#[pyfunction]
fn local_free_energy(beta: f64, r1: f64, r2: f64) -> PyResult<f64> {
    phasediag::local_free_energy(beta, r1, r2).map_err(err)
}

/// Solve the front minimizer; returns a dict with the profile arrays and the
/// derived quantities (excess free energy, spectral gap, tail decay rate).
#[pyfunction]
#[pyo3(signature = (beta, l=10.0, nx=512, tol=1e-10))]
fn solve_front(py: Python<'_>, beta: f64, l: f64, nx: usize, tol: f64) -> PyResult<Py<PyDict>> {
    let pot = InteractionPotential::default_bump();
    let grid = SpatialGrid::pinned(l, nx, 0.0, 0.0).map_err(err)?;
    let opts = FrontSolverOptions {
        tol,
        ..Default::default()
    };
    let prof = front::solve_front(&pot, beta, &grid, &opts, None).map_err(err)?;
    let excess = front::excess_free_energy(&pot, &prof).map_err(err)?;
    let gap = front::spectral_gap(&pot, &prof, 1e-12).map_err(err)?;
    let decay = front::tail_decay_rate(&prof, None).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("x", grid.nodes())?;
    d.set_item("rho1", prof.rho1.clone())?;
    d.set_item("rho2", prof.rho2.clone())?;
    d.set_item("chem_pot", prof.chem_pot)?;
    d.set_item("residual", prof.residual)?;
    d.set_item("iterations", prof.iterations)?;
    d.set_item("excess_free_energy", excess.value)?;
    d.set_item("spectral_gap", gap.gap)?;
    d.set_item("null_residual", gap.null_residual)?;
    d.set_item("tail_decay_rate", decay.rate)?;
    Ok(d.unbind())
}

/// The real dispersion function F(lambda, k).
#[pyfunction]
fn penrose_f(beta: f64, k: f64, lam: f64) -> PyResult<f64> {
    let pot = InteractionPotential::default_bump();
    dispersion::penrose_f(&pot, beta, k, lam).map_err(err)
}

/// Collisionless growth rate at wavenumber k, or None outside the band.
#[pyfunction]
fn growth_rate(beta: f64, k: f64) -> PyResult<Option<f64>> {
    let pot = InteractionPotential::default_bump();
    dispersion::growth_rate(&pot, beta, k).map_err(err)
}

/// Intervals of k in (0, k_max] where beta*Uhat(k) > 1.
#[pyfunction]
#[pyo3(signature = (beta, k_max=4.0, samples=200))]
fn unstable_band(beta: f64, k_max: f64, samples: usize) -> PyResult<Vec<(f64, f64)>> {
    let pot = InteractionPotential::default_bump();
    dispersion::unstable_band(&pot, beta, k_max, samples).map_err(err)
}

/// Rightmost eigenvalue of the collisional linearized operator at (beta, k)
/// with collision strength alpha; span: "full" or "mass".
#[pyfunction]
#[pyo3(signature = (beta, k, alpha=1.0, nu0=1.0, nv=128, span="full"))]
fn rightmost_eigenvalue(
    py: Python<'_>,
    beta: f64,
    k: f64,
    alpha: f64,
    nu0: f64,
    nv: usize,
    span: &str,
) -> PyResult<Py<PyDict>> {
    let pot = InteractionPotential::default_bump();
    let vgrid = VelocityGrid::gauss_hermite(nv, beta).map_err(err)?;
    let model = if alpha == 0.0 {
        CollisionModel::none()
    } else {
        let s = match span {
            "full" => ProjectionSpan::MassMomentumEnergy,
            "mass" => ProjectionSpan::MassOnly,
            other => return Err(PyValueError::new_err(format!("unknown span `{other}`"))),
        };
        CollisionModel::bgk(nu0, alpha).with_span(s)
    };
    let op = dispersion::build_talpha(&pot, beta, k, model, &vgrid).map_err(err)?;
    let eig = dispersion::rightmost_eigenvalue(&op).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("lambda_re", eig.lambda_re)?;
    d.set_item("lambda_im", eig.lambda_im)?;
    d.set_item("residual", eig.residual)?;
    d.set_item("continuity_residual", eig.continuity_residual(&vgrid))?;
    Ok(d.unbind())
}

/// Integrate a characteristic of the beta-front force field from (x0, v0);
/// returns a dict of arrays (s, x, v, dx_dv, energy).
#[pyfunction]
#[pyo3(signature = (beta, x0, v0, s_span=20.0, tol=1e-12, samples=101))]
fn characteristics(
    py: Python<'_>,
    beta: f64,
    x0: f64,
    v0: f64,
    s_span: f64,
    tol: f64,
    samples: usize,
) -> PyResult<Py<PyDict>> {
    let pot = InteractionPotential::default_bump();
    let grid = SpatialGrid::pinned(10.0, 512, 0.0, 0.0).map_err(err)?;
    let prof =
        front::solve_front(&pot, beta, &grid, &FrontSolverOptions::default(), None).map_err(err)?;
    let force = segkin_core::kernel::vlasov_force_with_halo(
        &pot,
        &grid,
        &prof.rho2,
        (prof.phase.rho_plus, prof.phase.rho_minus),
    )
    .map_err(err)?;
    let field = ForceField::from_samples(&grid, &force).map_err(err)?;
    let trace =
        integrate_characteristics(&field, (0.0, x0, v0), s_span, tol, samples).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("s", trace.samples.iter().map(|p| p.s).collect::<Vec<_>>())?;
    d.set_item("x", trace.samples.iter().map(|p| p.x).collect::<Vec<_>>())?;
    d.set_item("v", trace.samples.iter().map(|p| p.v).collect::<Vec<_>>())?;
    d.set_item(
        "dx_dv",
        trace.samples.iter().map(|p| p.dx_dv).collect::<Vec<_>>(),
    )?;
    d.set_item(
        "energy",
        trace.samples.iter().map(|p| p.energy).collect::<Vec<_>>(),
    )?;
    d.set_item("left_domain", trace.left_domain)?;
    Ok(d.unbind())
}

#[pymodule]
fn segkin_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Potential>()?;
    m.add_function(wrap_pyfunction!(pure_phases, m)?)?;
    m.add_function(wrap_pyfunction!(local_free_energy, m)?)?;
    m.add_function(wrap_pyfunction!(solve_front, m)?)?;
    m.add_function(wrap_pyfunction!(penrose_f, m)?)?;
    m.add_function(wrap_pyfunction!(growth_rate, m)?)?;
    m.add_function(wrap_pyfunction!(unstable_band, m)?)?;
    m.add_function(wrap_pyfunction!(rightmost_eigenvalue, m)?)?;
    m.add_function(wrap_pyfunction!(characteristics, m)?)?;
    Ok(())
}
