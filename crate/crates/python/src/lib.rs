//! Python bindings: `import phonon_scatter`.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use phonon_core::dynamics::{simulate_with_increments, ChainState, NoisePath};
use phonon_core::harness::{run_experiment as run_harness, ExperimentConfig, HarnessError};
use phonon_core::wigner::experiments::ScatteringSetup;
use phonon_core::wigner::{GaussianPacket, W0Profile};
use phonon_core::{scattering, Error, KernelPreset, ThermostatParams};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Parameter { .. } | Error::Domain(_) | Error::Kernel(_) | Error::SingularZone { .. } => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Dispersion relation of a named coupling preset.
#[pyclass(name = "Dispersion", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Dispersion {
    inner: phonon_core::DispersionRelation,
    preset: String,
}

#[pymethods]
impl Dispersion {
    #[new]
    #[pyo3(signature = (preset = "nn_unpinned"))]
    fn new(preset: &str) -> PyResult<Self> {
        let inner = KernelPreset::parse(preset)
            .and_then(phonon_core::DispersionRelation::from_preset)
            .map_err(py_err)?;
        Ok(Dispersion {
            inner,
            preset: preset.to_string(),
        })
    }

    #[getter]
    fn preset(&self) -> &str {
        &self.preset
    }

    fn omega(&self, k: f64) -> f64 {
        self.inner.omega(k)
    }

    fn omega_prime(&self, k: f64) -> f64 {
        self.inner.omega_prime(k)
    }

    fn group_velocity(&self, k: f64) -> f64 {
        self.inner.group_velocity(k)
    }

    fn band_edges(&self) -> (f64, f64) {
        let [a, b] = self.inner.band_edges();
        (a, b)
    }

    fn in_exclusion_zone(&self, k: f64, delta: f64) -> bool {
        self.inner.in_exclusion_zone(k, delta)
    }

    /// Memory kernel `J(t)`.
    fn memory_kernel(&self, t: f64) -> PyResult<f64> {
        phonon_core::memory::j_eval(&self.inner, t).map_err(py_err)
    }

    /// Laplace transform of `J` at `lam` with positive real part.
    fn memory_kernel_laplace(&self, lam: Complex64) -> PyResult<Complex64> {
        phonon_core::memory::j_laplace(&self.inner, lam).map_err(py_err)
    }

    /// `{nu, absorb, p_plus, p_minus}` at momentum `k`.
    fn coefficients<'py>(&self, py: Python<'py>, gamma: f64, k: f64) -> PyResult<Bound<'py, PyDict>> {
        let c = scattering::evaluate(&self.inner, gamma, k).map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("nu", c.nu)?;
        d.set_item("absorb", c.absorb)?;
        d.set_item("p_plus", c.p_plus)?;
        d.set_item("p_minus", c.p_minus)?;
        Ok(d)
    }

    /// Coefficient table on `n_k` momenta outside the exclusion zone, as
    /// column lists.
    #[pyo3(signature = (gamma, n_k = 512, delta_excl = 0.02))]
    fn table<'py>(&self, py: Python<'py>, gamma: f64, n_k: usize, delta_excl: f64) -> PyResult<Bound<'py, PyDict>> {
        let t = scattering::build_table(&self.inner, gamma, n_k, delta_excl).map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("k", t.k_grid.clone())?;
        d.set_item("nu", t.rows.iter().map(|c| c.nu).collect::<Vec<_>>())?;
        d.set_item("absorb", t.rows.iter().map(|c| c.absorb).collect::<Vec<_>>())?;
        d.set_item("p_plus", t.rows.iter().map(|c| c.p_plus).collect::<Vec<_>>())?;
        d.set_item("p_minus", t.rows.iter().map(|c| c.p_minus).collect::<Vec<_>>())?;
        d.set_item("max_identity_residual", t.max_identity_residual)?;
        Ok(d)
    }
}

/// Periodic chain of `n` sites.
#[pyclass(name = "Chain", frozen)]
struct Chain {
    inner: phonon_core::Chain,
}

#[pymethods]
impl Chain {
    #[new]
    fn new(dispersion: &Dispersion, n: usize) -> PyResult<Self> {
        Ok(Chain {
            inner: phonon_core::Chain::new(dispersion.inner.clone(), n).map_err(py_err)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn omegas(&self) -> Vec<f64> {
        self.inner.omegas().to_vec()
    }

    fn hamiltonian(&self, p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
        Ok(self.inner.hamiltonian(&self.state(p, q)?))
    }

    /// Runs `steps` steps from `(p, q)` with the thermostat at site 0 and
    /// returns `(p, q, energy)`, `energy` being twice the shadow energy at
    /// every step boundary.
    #[pyo3(signature = (p, q, gamma, temperature, dt, steps, seed = 0))]
    #[allow(clippy::too_many_arguments)]
    fn simulate(
        &self,
        p: Vec<f64>,
        q: Vec<f64>,
        gamma: f64,
        temperature: f64,
        dt: f64,
        steps: usize,
        seed: u64,
    ) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let mut state = self.state(p, q)?;
        let params = ThermostatParams::new(gamma, temperature).map_err(py_err)?;
        let mut noise = NoisePath::new(seed, dt);
        let dw: Vec<f64> = (0..steps).map(|_| noise.next_increment()).collect();
        let tr = simulate_with_increments(&self.inner, &mut state, params, dt, &dw, &[]).map_err(py_err)?;
        Ok((state.p, state.q, tr.energy))
    }
}

impl Chain {
    fn state(&self, p: Vec<f64>, q: Vec<f64>) -> PyResult<ChainState> {
        if p.len() != self.inner.n() || q.len() != self.inner.n() {
            return Err(PyValueError::new_err(format!("p and q must have length {}", self.inner.n())));
        }
        Ok(ChainState { p, q, t_micro: 0.0 })
    }
}

/// Zero-temperature packet scattering with the standard packet; returns the
/// measured and predicted energy fractions.
#[pyfunction]
#[pyo3(signature = (dispersion, gamma, k_center, n, dt = None))]
fn scatter_packet<'py>(
    py: Python<'py>,
    dispersion: &Dispersion,
    gamma: f64,
    k_center: f64,
    n: usize,
    dt: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut setup = ScatteringSetup::standard(&dispersion.inner, gamma, k_center);
    if let Some(dt) = dt {
        setup.dt = dt;
    }
    let o = py.detach(|| setup.run(&dispersion.inner, n)).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("transmitted", o.e_trans)?;
    d.set_item("reflected", o.e_refl)?;
    d.set_item("absorbed", o.e_absorbed)?;
    d.set_item("expected", o.expected.to_vec())?;
    d.set_item("max_error", o.max_error())?;
    Ok(d)
}

/// Closed-form kinetic limit for Gaussian initial data
/// `[(amplitude, x0, k0, sx, sk), ...]`, or equilibrium data when
/// `equilibrium` is given.
#[pyclass(name = "LimitSolution", frozen)]
struct LimitSolution {
    inner: phonon_core::wigner::LimitSolution,
}

#[pymethods]
impl LimitSolution {
    #[new]
    #[pyo3(signature = (dispersion, gamma, temperature, packets = Vec::new(), equilibrium = None))]
    fn new(
        dispersion: &Dispersion,
        gamma: f64,
        temperature: f64,
        packets: Vec<(f64, f64, f64, f64, f64)>,
        equilibrium: Option<f64>,
    ) -> PyResult<Self> {
        let w0 = match equilibrium {
            Some(t) => W0Profile::Equilibrium { temperature: t },
            None if packets.is_empty() => W0Profile::Zero,
            None => W0Profile::Packets {
                packets: packets
                    .into_iter()
                    .map(|(amplitude, x0, k0, sx, sk)| GaussianPacket { amplitude, x0, k0, sx, sk })
                    .collect(),
            },
        };
        let inner = phonon_core::wigner::LimitSolution::new(dispersion.inner.clone(), gamma, temperature, w0)
            .map_err(py_err)?;
        Ok(LimitSolution { inner })
    }

    fn wigner(&self, t: f64, x: f64, k: f64) -> PyResult<f64> {
        self.inner.limit_wigner(t, x, k).map_err(py_err)
    }

    fn boundary_residual(&self, t: f64, k: f64) -> PyResult<f64> {
        self.inner.boundary_residual(t, k).map_err(py_err)
    }

    fn laplace_fourier(&self, lam: f64, eta: f64, k: f64) -> PyResult<Complex64> {
        self.inner.laplace_fourier_limit(lam, eta, k).map_err(py_err)
    }
}

/// Runs an experiment from a JSON config and returns the report as JSON.
/// `kind` overrides the config's `experiment` key.
#[pyfunction]
#[pyo3(signature = (config_json, kind = None))]
fn run_experiment(py: Python<'_>, config_json: &str, kind: Option<&str>) -> PyResult<String> {
    let kind = match kind {
        Some(k) => Some(
            phonon_core::harness::ExperimentKind::parse(k)
                .ok_or_else(|| PyValueError::new_err(format!("unknown experiment `{k}`")))?,
        ),
        None => None,
    };
    let cfg = ExperimentConfig::from_json_str(config_json, kind).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let report = py.detach(|| run_harness(&cfg)).map_err(|e| match e {
        HarnessError::Config(c) => PyValueError::new_err(c.to_string()),
        HarnessError::Failure(f) => py_err(f),
    })?;
    serde_json::to_string(&report).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
fn phonon_scatter(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dispersion>()?;
    m.add_class::<Chain>()?;
    m.add_class::<LimitSolution>()?;
    m.add_function(wrap_pyfunction!(scatter_packet, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
