//! Finite periodic lattice with the thermostat at site 0.
//!
//! `dq_y = p_y dt`, `dp_y = -(alpha * q)_y dt - delta_{y,0} (gamma p_0 dt - sqrt(2 gamma T) dw)`.
//! The direct route integrates this SDE by splitting; [`mild`] reconstructs
//! the zero-temperature solution from the closed Volterra equation for `p_0`.

pub mod mild;
pub mod snapshot;

use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dispersion::DispersionRelation;
use crate::error::{Error, Result};

pub use mild::{free_p0, p0_volterra, psi_spectral_mild};

/// Largest admissible `dt * omega_max`.
pub const STABILITY_MARGIN: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub t_micro: f64,
}

impl ChainState {
    pub fn zeros(n: usize) -> Self {
        ChainState {
            p: vec![0.0; n],
            q: vec![0.0; n],
            t_micro: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermostatParams {
    pub gamma: f64,
    pub temperature: f64,
}

impl ThermostatParams {
    pub fn new(gamma: f64, temperature: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::param("gamma", format!("must be finite and >= 0, got {gamma}")));
        }
        if !(temperature >= 0.0 && temperature.is_finite()) {
            return Err(Error::param(
                "temperature",
                format!("must be finite and >= 0, got {temperature}"),
            ));
        }
        Ok(ThermostatParams { gamma, temperature })
    }
}

/// Brownian increments with variance `dt`, generated on demand from a
/// ChaCha8 stream. Equal seeds give equal sequences.
#[derive(Debug, Clone)]
pub struct NoisePath {
    seed: u64,
    dt: f64,
    rng: ChaCha8Rng,
    drawn: u64,
}

impl NoisePath {
    pub fn new(seed: u64, dt: f64) -> Self {
        NoisePath {
            seed,
            dt,
            rng: ChaCha8Rng::seed_from_u64(seed),
            drawn: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn drawn(&self) -> u64 {
        self.drawn
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.drawn += 1;
        StandardNormal.sample(&mut self.rng)
    }

    pub fn next_increment(&mut self) -> f64 {
        self.dt.sqrt() * self.standard_normal()
    }
}

/// Lattice of `n` sites with FFT plans and the sampled symbol of the coupling.
#[derive(Clone)]
pub struct Chain {
    n: usize,
    disp: DispersionRelation,
    alpha_hat: Vec<f64>,
    omega: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Chain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Chain")
            .field("n", &self.n)
            .field("disp", &self.disp)
            .finish()
    }
}

impl Chain {
    pub fn new(disp: DispersionRelation, n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::param("n", format!("must be a power of two, got {n}")));
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let alpha_hat = (0..n).map(|j| disp.hat_alpha(j as f64 / n as f64)).collect();
        let omega = (0..n).map(|j| disp.omega(j as f64 / n as f64)).collect();
        Ok(Chain {
            n,
            disp,
            alpha_hat,
            omega,
            fwd,
            inv,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn disp(&self) -> &DispersionRelation {
        &self.disp
    }

    /// `omega(j / n)` in FFT order.
    pub fn omegas(&self) -> &[f64] {
        &self.omega
    }

    /// Momentum of FFT bin `j`, folded into `[-1/2, 1/2)`.
    pub fn momentum(&self, j: usize) -> f64 {
        let k = j as f64 / self.n as f64;
        if k >= 0.5 {
            k - 1.0
        } else {
            k
        }
    }

    /// Centered site label of array index `i`.
    pub fn site(&self, i: usize) -> i64 {
        if i >= self.n / 2 {
            i as i64 - self.n as i64
        } else {
            i as i64
        }
    }

    pub fn fft(&self, data: &mut [Complex64]) {
        self.fwd.process(data);
    }

    /// Unnormalized inverse transform.
    pub fn ifft(&self, data: &mut [Complex64]) {
        self.inv.process(data);
    }

    /// Periodic convolution `(alpha * q)_y`.
    pub fn force(&self, q: &[f64], out: &mut [f64], buf: &mut Vec<Complex64>) {
        buf.clear();
        buf.extend(q.iter().map(|&x| Complex64::new(x, 0.0)));
        self.fwd.process(buf);
        for (b, a) in buf.iter_mut().zip(&self.alpha_hat) {
            *b *= *a;
        }
        self.inv.process(buf);
        let scale = 1.0 / self.n as f64;
        for (o, b) in out.iter_mut().zip(buf.iter()) {
            *o = b.re * scale;
        }
    }

    /// `psi_hat(j/n) = omega q_hat + i p_hat`.
    pub fn wave_hat(&self, state: &ChainState) -> Vec<Complex64> {
        let mut qh: Vec<Complex64> = state.q.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let mut ph: Vec<Complex64> = state.p.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.fwd.process(&mut qh);
        self.fwd.process(&mut ph);
        qh.iter()
            .zip(&ph)
            .zip(&self.omega)
            .map(|((q, p), w)| q * w + Complex64::i() * p)
            .collect()
    }

    /// Lattice wave function `psi_y = (omega~ * q)_y + i p_y`, indexed `y mod n`.
    pub fn wave_field(&self, state: &ChainState) -> Vec<Complex64> {
        let mut psi = self.wave_hat(state);
        self.inv.process(&mut psi);
        let scale = 1.0 / self.n as f64;
        psi.iter_mut().for_each(|z| *z *= scale);
        psi
    }

    /// Inverse of [`Chain::wave_field`]: `p = Im psi`, `q_hat = FFT(Re psi) / omega`
    /// (zero on modes with `omega = 0`).
    pub fn state_from_wave(&self, psi: &[Complex64]) -> ChainState {
        let mut re: Vec<Complex64> = psi.iter().map(|z| Complex64::new(z.re, 0.0)).collect();
        self.fwd.process(&mut re);
        for (r, &w) in re.iter_mut().zip(&self.omega) {
            *r = if w > 0.0 { *r / w } else { Complex64::new(0.0, 0.0) };
        }
        self.inv.process(&mut re);
        let scale = 1.0 / self.n as f64;
        ChainState {
            p: psi.iter().map(|z| z.im).collect(),
            q: re.iter().map(|z| z.re * scale).collect(),
            t_micro: 0.0,
        }
    }

    /// `H = |p|^2 / 2 + q . (alpha * q) / 2`.
    pub fn hamiltonian(&self, state: &ChainState) -> f64 {
        let mut f = vec![0.0; self.n];
        let mut buf = Vec::with_capacity(self.n);
        self.force(&state.q, &mut f, &mut buf);
        energy_parts(state, &f, 0.0)
    }

    pub fn check_step(&self, dt: f64) -> Result<()> {
        if !(dt > 0.0) || dt * self.disp.omega_max() >= STABILITY_MARGIN {
            return Err(Error::param(
                "dt",
                format!(
                    "need 0 < dt * omega_max < {STABILITY_MARGIN}, got dt = {dt}, omega_max = {}",
                    self.disp.omega_max()
                ),
            ));
        }
        Ok(())
    }
}

fn energy_parts(state: &ChainState, force: &[f64], shadow_h: f64) -> f64 {
    let kin: f64 = state.p.iter().map(|p| p * p).sum();
    let pot: f64 = state.q.iter().zip(force).map(|(q, f)| q * f).sum();
    let corr: f64 = force.iter().map(|f| f * f).sum();
    0.5 * kin + 0.5 * pot - shadow_h * shadow_h / 8.0 * corr
}

/// One trajectory's integrator: caches the force between steps.
///
/// Each step is symmetric: half kick, half drift, exact Ornstein-Uhlenbeck
/// update of `p_0` driven by the supplied Brownian increment, half drift,
/// half kick. At `gamma = 0` this is velocity Verlet.
#[derive(Debug)]
pub struct Stepper<'a> {
    chain: &'a Chain,
    params: ThermostatParams,
    dt: f64,
    decay: f64,
    kick: f64,
    force: Vec<f64>,
    buf: Vec<Complex64>,
}

impl<'a> Stepper<'a> {
    pub fn new(chain: &'a Chain, params: ThermostatParams, dt: f64, state: &ChainState) -> Result<Self> {
        chain.check_step(dt)?;
        if state.len() != chain.n() || state.q.len() != chain.n() {
            return Err(Error::param(
                "state",
                format!("length {} does not match lattice size {}", state.len(), chain.n()),
            ));
        }
        let decay = (-params.gamma * dt).exp();
        let kick = (params.temperature * (1.0 - decay * decay)).sqrt();
        let mut s = Stepper {
            chain,
            params,
            dt,
            decay,
            kick,
            force: vec![0.0; chain.n()],
            buf: Vec::with_capacity(chain.n()),
        };
        s.refresh(state);
        Ok(s)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn params(&self) -> ThermostatParams {
        self.params
    }

    /// Recompute the cached force after the state was modified externally.
    pub fn refresh(&mut self, state: &ChainState) {
        self.chain.force(&state.q, &mut self.force, &mut self.buf);
    }

    /// Advance by `dt` with Brownian increment `dw` (variance `dt`).
    pub fn step(&mut self, state: &mut ChainState, dw: f64) {
        let h = self.dt;
        for (p, f) in state.p.iter_mut().zip(&self.force) {
            *p -= 0.5 * h * f;
        }
        for (q, p) in state.q.iter_mut().zip(&state.p) {
            *q += 0.5 * h * p;
        }
        if self.params.gamma > 0.0 {
            state.p[0] = self.decay * state.p[0] + self.kick * dw / h.sqrt();
        }
        for (q, p) in state.q.iter_mut().zip(&state.p) {
            *q += 0.5 * h * p;
        }
        self.chain.force(&state.q, &mut self.force, &mut self.buf);
        for (p, f) in state.p.iter_mut().zip(&self.force) {
            *p -= 0.5 * h * f;
        }
        state.t_micro += h;
    }

    pub fn energy(&self, state: &ChainState) -> f64 {
        energy_parts(state, &self.force, 0.0)
    }

    /// `|p|^2/2 + q.(A - dt^2 A^2 / 4) q / 2`, conserved exactly by the scheme
    /// at `gamma = 0`.
    pub fn shadow_energy(&self, state: &ChainState) -> f64 {
        energy_parts(state, &self.force, self.dt)
    }
}

/// Single step with a freshly computed force; see [`Stepper`] for loops.
pub fn step_direct(
    chain: &Chain,
    state: &mut ChainState,
    params: ThermostatParams,
    dt: f64,
    dw: f64,
) -> Result<()> {
    let mut s = Stepper::new(chain, params, dt, state)?;
    s.step(state, dw);
    Ok(())
}

/// Per-step record of a direct run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    /// `p_0` at step boundaries (`steps + 1` values).
    pub p0: Vec<f64>,
    /// Brownian increments used by each step.
    pub dw: Vec<f64>,
    /// `2 x` shadow energy at step boundaries.
    pub energy: Vec<f64>,
    pub snapshot_steps: Vec<usize>,
    pub snapshots: Vec<ChainState>,
}

/// Runs `steps` steps, drawing increments from `noise` (which must share
/// `dt`), and stores full states at the listed step indices.
pub fn simulate(
    chain: &Chain,
    state: &mut ChainState,
    params: ThermostatParams,
    dt: f64,
    steps: usize,
    noise: &mut NoisePath,
    snapshot_steps: &[usize],
) -> Result<Trajectory> {
    if (noise.dt() - dt).abs() > 1e-15 * dt {
        return Err(Error::param("noise", "noise path dt differs from the step"));
    }
    let increments: Vec<f64> = (0..steps).map(|_| noise.next_increment()).collect();
    simulate_with_increments(chain, state, params, dt, &increments, snapshot_steps)
}

/// As [`simulate`] with explicit increments, one per step.
pub fn simulate_with_increments(
    chain: &Chain,
    state: &mut ChainState,
    params: ThermostatParams,
    dt: f64,
    increments: &[f64],
    snapshot_steps: &[usize],
) -> Result<Trajectory> {
    let mut stepper = Stepper::new(chain, params, dt, state)?;
    let steps = increments.len();
    let mut tr = Trajectory {
        dt,
        p0: Vec::with_capacity(steps + 1),
        dw: increments.to_vec(),
        energy: Vec::with_capacity(steps + 1),
        snapshot_steps: Vec::new(),
        snapshots: Vec::new(),
    };
    let mut want = snapshot_steps.to_vec();
    want.sort_unstable();
    want.dedup();
    let mut next = want.iter().peekable();
    let mut record = |n: usize, state: &ChainState, stepper: &Stepper, tr: &mut Trajectory| {
        tr.p0.push(state.p[0]);
        tr.energy.push(2.0 * stepper.shadow_energy(state));
        while next.peek().is_some_and(|&&s| s == n) {
            tr.snapshot_steps.push(n);
            tr.snapshots.push(state.clone());
            next.next();
        }
    };
    record(0, state, &stepper, &mut tr);
    for (n, &dw) in increments.iter().enumerate() {
        stepper.step(state, dw);
        record(n + 1, state, &stepper, &mut tr);
    }
    Ok(tr)
}

impl Trajectory {
    /// Largest cumulative discrepancy in the microscopic energy balance
    /// `d sum|psi|^2 = (-2 gamma p_0^2 + 2 gamma T) dt + 2 sqrt(2 gamma T) p_0 dw`,
    /// relative to the initial energy.
    pub fn energy_balance_residual(&self, params: ThermostatParams) -> Result<f64> {
        let steps = self.energy.len().saturating_sub(1);
        if self.dw.len() != steps || self.p0.len() != steps + 1 {
            return Err(Error::param(
                "trajectory",
                "recorded p_0 / noise increments do not cover every step",
            ));
        }
        let (g, t) = (params.gamma, params.temperature);
        let scale = self.energy.first().copied().unwrap_or(0.0).abs().max(f64::MIN_POSITIVE);
        let noise = 2.0 * (2.0 * g * t).sqrt();
        let mut acc = 0.0;
        let mut worst: f64 = 0.0;
        for n in 0..steps {
            let (a, b) = (self.p0[n], self.p0[n + 1]);
            let drift = (-g * (a * a + b * b) + 2.0 * g * t) * self.dt;
            acc += self.energy[n + 1] - self.energy[n] - drift - noise * a * self.dw[n];
            worst = worst.max(acc.abs());
        }
        Ok(worst / scale)
    }
}
