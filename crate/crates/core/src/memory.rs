//! Thermostat memory objects.
//!
//! Eliminating the bulk from the equations of motion leaves a closed Volterra
//! equation for the momentum of the thermostatted particle. Its ingredients
//! are the kernel `J(t) = int_T cos(omega(k) t) dk`, its Laplace transform
//! `J~(lambda)`, the resolvent `g~(lambda) = 1 / (1 + gamma J~(lambda))` and
//! the resolvent measure `g(dt) = delta_0(dt) + g*(t) dt`, whose density
//! solves `g* + gamma J * g* = -gamma J`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::DispersionRelation;
use crate::error::{Error, Result};
use crate::quadrature::{self, convolution_weights, Rule, Tolerance};

/// Equispaced node count (over the full torus) for the `J` quadrature at time
/// `t`: `max(2048, 64 ceil(t omega_max))`.
pub fn j_node_count(t: f64, omega_max: f64) -> usize {
    let scaled = 64 * (t * omega_max).ceil() as usize;
    let n = scaled.max(2048);
    n + n % 2
}

/// Trapezoid nodes and weights on `[0, 1/2]` equivalent to the periodic
/// trapezoid rule with `n_full` nodes on the torus for an even integrand.
fn half_torus_rule(disp: &DispersionRelation, n_full: usize) -> (Vec<f64>, Vec<f64>) {
    let half = n_full / 2;
    let mut omegas = Vec::with_capacity(half + 1);
    let mut weights = Vec::with_capacity(half + 1);
    for i in 0..=half {
        let k = i as f64 / n_full as f64;
        omegas.push(disp.omega(k));
        let w = if i == 0 || i == half { 1.0 } else { 2.0 };
        weights.push(w / n_full as f64);
    }
    (omegas, weights)
}

/// `J(t) = int_T cos(omega(k) t) dk` by the periodic trapezoid rule, which is
/// spectrally accurate because `cos(omega t)` is a smooth function of
/// `alpha_hat`.
pub fn j_eval(disp: &DispersionRelation, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("J(t) requires t >= 0, got {t}")));
    }
    let (omegas, weights) = half_torus_rule(disp, j_node_count(t, disp.omega_max()));
    let terms: Vec<f64> = omegas
        .iter()
        .zip(&weights)
        .map(|(w, c)| c * (w * t).cos())
        .collect();
    Ok(quadrature::pairwise_sum(&terms))
}

/// Samples `J(j dt)` for `j = 0..=n`. The node count is fixed by the last
/// time; each node's phase is advanced by complex rotation and re-anchored
/// every 256 steps.
pub fn sample_j(disp: &DispersionRelation, dt: f64, n: usize) -> Vec<f64> {
    let t_end = dt * n as f64;
    let (omegas, weights) = half_torus_rule(disp, j_node_count(t_end, disp.omega_max()));
    const CHUNK: usize = 512;
    let partials: Vec<Vec<f64>> = omegas
        .par_chunks(CHUNK)
        .zip(weights.par_chunks(CHUNK))
        .map(|(ws, cs)| {
            let mut acc = vec![0.0; n + 1];
            for (&w, &c) in ws.iter().zip(cs) {
                let step = Complex64::from_polar(1.0, w * dt);
                let mut z = Complex64::new(1.0, 0.0);
                for (j, a) in acc.iter_mut().enumerate() {
                    if j % 256 == 0 {
                        z = Complex64::from_polar(1.0, w * dt * j as f64);
                    }
                    *a += c * z.re;
                    z *= step;
                }
            }
            acc
        })
        .collect();
    let mut out = vec![0.0; n + 1];
    for p in &partials {
        for (o, v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    // the weights sum to one; pin J(0) exactly
    if let Some(first) = out.first_mut() {
        *first = 1.0;
    }
    out
}

/// Laplace transform `J~(lambda) = int_T lambda / (lambda^2 + omega^2) dk`
/// for `Re lambda > 0`, by adaptive quadrature with a breakpoint at the
/// near-resonant momentum when `Im lambda` lies in the band.
pub fn j_laplace(disp: &DispersionRelation, lambda: Complex64) -> Result<Complex64> {
    if !(lambda.re > 0.0) {
        return Err(Error::Domain(format!(
            "J~(lambda) requires Re lambda > 0, got {lambda}"
        )));
    }
    let lambda2 = lambda * lambda;
    let freq = lambda.im.abs();
    let mut breaks = Vec::new();
    if freq > disp.omega_min() && freq < disp.omega_max() {
        breaks.push(disp.inverse_branch(freq)?);
    }
    let integrand = |l: f64| {
        let w = disp.omega(l);
        lambda / (lambda2 + w * w)
    };
    let tol = Tolerance {
        abs: 1e-14,
        rel: 1e-12,
        max_intervals: 20_000,
    };
    let est = quadrature::integrate(integrand, 0.0, 0.5, &breaks, tol);
    Ok(2.0 * est.value)
}

/// The dispersion relation together with the friction: everything needed for
/// the Laplace-domain objects `J~` and `g~`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Resolvent {
    disp: DispersionRelation,
    gamma: f64,
}

impl Resolvent {
    pub fn new(disp: DispersionRelation, gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::param("gamma", format!("must be finite and >= 0, got {gamma}")));
        }
        Ok(Resolvent { disp, gamma })
    }

    pub fn disp(&self) -> &DispersionRelation {
        &self.disp
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn j_laplace(&self, lambda: Complex64) -> Result<Complex64> {
        j_laplace(&self.disp, lambda)
    }

    /// `g~(lambda) = (1 + gamma J~(lambda))^{-1}`; `|g~| <= 1` on `Re lambda > 0`.
    pub fn g_tilde(&self, lambda: Complex64) -> Result<Complex64> {
        if self.gamma == 0.0 {
            if !(lambda.re > 0.0) {
                return Err(Error::Domain(format!(
                    "g~(lambda) requires Re lambda > 0, got {lambda}"
                )));
            }
            return Ok(Complex64::new(1.0, 0.0));
        }
        Ok(1.0 / (1.0 + self.gamma * self.j_laplace(lambda)?))
    }
}

/// Time grid of the sampled kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryKernelConfig {
    pub dt: f64,
    pub horizon: f64,
}

impl MemoryKernelConfig {
    /// Defaults for an experiment at macroscopic time `t_macro` and scaling
    /// `eps`: `dt = 1e-3`, horizon `2 t_macro / eps`.
    pub fn for_experiment(t_macro: f64, eps: f64) -> Self {
        MemoryKernelConfig {
            dt: 1e-3,
            horizon: 2.0 * t_macro / eps,
        }
    }

    fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0) {
            return Err(Error::param("dt_kernel", format!("must be > 0, got {}", self.dt)));
        }
        if !(self.horizon >= self.dt) {
            return Err(Error::param(
                "horizon",
                format!("must be >= dt_kernel, got {}", self.horizon),
            ));
        }
        Ok((self.horizon / self.dt).round() as usize)
    }
}

/// Value of the truncated resolvent series with its remainder bound.
#[derive(Debug, Clone, Copy)]
pub struct SeriesValue {
    pub value: f64,
    pub truncation_bound: f64,
}

/// Sampled `J` and `g*` on a uniform grid, plus the Laplace-domain evaluators.
#[derive(Debug, Clone)]
pub struct MemoryKernel {
    resolvent: Resolvent,
    dt: f64,
    j: Vec<f64>,
    gstar: Vec<f64>,
}

impl MemoryKernel {
    pub fn new(disp: DispersionRelation, gamma: f64, config: MemoryKernelConfig) -> Result<Self> {
        let n = config.steps()?;
        let resolvent = Resolvent::new(disp, gamma)?;
        let j = sample_j(resolvent.disp(), config.dt, n);
        let gstar = march_volterra(&j, gamma, config.dt);
        Ok(MemoryKernel {
            resolvent,
            dt: config.dt,
            j,
            gstar,
        })
    }

    pub fn resolvent(&self) -> &Resolvent {
        &self.resolvent
    }

    pub fn disp(&self) -> &DispersionRelation {
        self.resolvent.disp()
    }

    pub fn gamma(&self) -> f64 {
        self.resolvent.gamma()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.dt * (self.j.len() - 1) as f64
    }

    pub fn steps(&self) -> usize {
        self.j.len() - 1
    }

    pub fn j_samples(&self) -> &[f64] {
        &self.j
    }

    pub fn gstar_samples(&self) -> &[f64] {
        &self.gstar
    }

    pub fn j_eval(&self, t: f64) -> Result<f64> {
        j_eval(self.disp(), t)
    }

    pub fn j_laplace(&self, lambda: Complex64) -> Result<Complex64> {
        self.resolvent.j_laplace(lambda)
    }

    pub fn g_tilde(&self, lambda: Complex64) -> Result<Complex64> {
        self.resolvent.g_tilde(lambda)
    }

    /// Solves the Volterra equation for `g*` on `[0, t_end]` with step `dt`
    /// by the product trapezoidal rule (second order).
    pub fn g_star_volterra(&self, t_end: f64, dt: f64) -> Result<Vec<f64>> {
        if !(dt > 0.0) || !(t_end >= dt) {
            return Err(Error::param(
                "dt",
                format!("need dt > 0 and t_end >= dt, got dt = {dt}, t_end = {t_end}"),
            ));
        }
        let n = (t_end / dt).round() as usize;
        let j = sample_j(self.disp(), dt, n);
        Ok(march_volterra(&j, self.gamma(), dt))
    }

    /// `sum_{n=1}^{n_max} (-gamma)^n J^{*n}(t)` with the iterated convolutions
    /// evaluated by fourth-order composite quadrature on a grid of step close
    /// to the kernel's `dt` ending exactly at `t`. Test oracle only.
    pub fn g_star_series(&self, t: f64, n_max: usize) -> Result<SeriesValue> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("series requires t >= 0, got {t}")));
        }
        if n_max == 0 {
            return Err(Error::param("n_max", "must be >= 1"));
        }
        if t == 0.0 {
            return Ok(SeriesValue {
                value: -self.gamma(),
                truncation_bound: 0.0,
            });
        }
        let steps = ((t / self.dt).round() as usize).max(1);
        let (samples, bound) = self.series_on_grid(t / steps as f64, steps, n_max);
        Ok(SeriesValue {
            value: samples[steps],
            truncation_bound: bound,
        })
    }

    /// Series values on `j h`, `j = 0..=steps`, and the remainder bound at the
    /// final time.
    pub fn series_on_grid(&self, h: f64, steps: usize, n_max: usize) -> (Vec<f64>, f64) {
        let gamma = self.gamma();
        let j = sample_j(self.disp(), h, steps);
        let mut power = j.clone();
        let mut sum: Vec<f64> = j.iter().map(|v| -gamma * v).collect();
        let mut coeff = -gamma;
        for _ in 2..=n_max {
            power = convolve(&j, &power, h, Rule::Simpson);
            coeff *= -gamma;
            for (s, p) in sum.iter_mut().zip(&power) {
                *s += coeff * p;
            }
        }
        // |J^{*n}(t)| <= t^{n-1}/(n-1)!  =>  tail <= gamma (gamma t)^N e^{gamma t} / N!
        let t = h * steps as f64;
        let x = gamma * t;
        let mut term = gamma;
        for m in 1..=n_max {
            term *= x / m as f64;
        }
        (sum, term * x.exp())
    }

    /// Sup-norm residual of the sampled `g*` in the Volterra equation, with
    /// the convolution re-evaluated by a fourth-order rule.
    pub fn volterra_residual(&self) -> f64 {
        let conv = convolve(&self.j, &self.gstar, self.dt, Rule::Simpson);
        let gamma = self.gamma();
        self.gstar
            .iter()
            .zip(&conv)
            .zip(&self.j)
            .map(|((g, c), j)| (g + gamma * c + gamma * j).abs())
            .fold(0.0, f64::max)
    }

    /// `phi(t, k) = exp(-i omega t) (1 + int_0^t exp(i omega tau) g*(tau) dtau)`.
    pub fn phi_eval(&self, t: f64, k: f64) -> Result<Complex64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("phi requires t >= 0, got {t}")));
        }
        let horizon = self.horizon();
        if t > horizon * (1.0 + 1e-12) {
            return Err(Error::Range { t, horizon });
        }
        let omega = self.disp().omega(k);
        let h = self.dt;
        let full = ((t / h).floor() as usize).min(self.steps());
        let phase = |s: f64| Complex64::from_polar(1.0, omega * s);
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..full {
            let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
            acc += 0.5 * h * (phase(a) * self.gstar[i] + phase(b) * self.gstar[i + 1]);
        }
        let rest = t - full as f64 * h;
        if rest > 0.0 && full < self.steps() {
            let a = full as f64 * h;
            let frac = rest / h;
            let g_end = self.gstar[full] * (1.0 - frac) + self.gstar[full + 1] * frac;
            acc += 0.5 * rest * (phase(a) * self.gstar[full] + phase(t) * g_end);
        }
        Ok(Complex64::from_polar(1.0, -omega * t) * (1.0 + acc))
    }

    /// `int_0^{t_j} exp(i omega tau) g(dtau)` for `t_j = j dt`, `j = 0..=steps`:
    /// the unit atom plus the cumulative trapezoid over `g*`. This equals
    /// `exp(i omega t) phi(t, k)`.
    pub fn phi_tilde_series(&self, k: f64, steps: usize) -> Result<Vec<Complex64>> {
        if steps > self.steps() {
            return Err(Error::Range {
                t: steps as f64 * self.dt,
                horizon: self.horizon(),
            });
        }
        let omega = self.disp().omega(k);
        let h = self.dt;
        let rot = Complex64::from_polar(1.0, omega * h);
        let mut out = Vec::with_capacity(steps + 1);
        let mut acc = Complex64::new(1.0, 0.0);
        let mut z = Complex64::new(1.0, 0.0);
        out.push(acc);
        for i in 0..steps {
            let z_next = if (i + 1) % 256 == 0 {
                Complex64::from_polar(1.0, omega * h * (i + 1) as f64)
            } else {
                z * rot
            };
            acc += 0.5 * h * (z * self.gstar[i] + z_next * self.gstar[i + 1]);
            out.push(acc);
            z = z_next;
        }
        Ok(out)
    }
}

/// Product-trapezoidal march for `g + gamma J * g = -gamma J`.
fn march_volterra(j: &[f64], gamma: f64, h: f64) -> Vec<f64> {
    let n = j.len();
    let mut g = vec![0.0; n];
    if n == 0 {
        return g;
    }
    g[0] = -gamma * j[0];
    let diag = 1.0 + 0.5 * gamma * h * j[0];
    for m in 1..n {
        let mut hist = 0.5 * j[m] * g[0];
        for i in 1..m {
            hist += j[m - i] * g[i];
        }
        g[m] = (-gamma * j[m] - gamma * h * hist) / diag;
    }
    g
}

/// `(f * g)(t_n) = int_0^{t_n} f(t_n - s) g(s) ds` on every grid point.
pub fn convolve(f: &[f64], g: &[f64], h: f64, rule: Rule) -> Vec<f64> {
    let n = f.len().min(g.len());
    (0..n)
        .into_par_iter()
        .map(|m| {
            let w = convolution_weights(m, h, rule);
            (0..=m).map(|i| w[i] * f[m - i] * g[i]).sum()
        })
        .collect()
}

/// Equispaced time grid helper used by the spectral solver.
pub fn time_grid(dt: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|j| j as f64 * dt).collect()
}
