//! Simulation experiments comparing the lattice to the kinetic limit:
//! packet scattering, thermal production, the Laplace-transformed thermal
//! Wigner function, Gibbs stationarity and the energy bound.
//!
//! Ensembles run path `i` with seed `seed + i`; results are collected in path
//! order and reduced by pairwise summation, so they do not depend on the
//! number of worker threads.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::estimate::{shifts_for, WignerAccumulator, WignerEstimate};
use super::packet::{sample_gibbs, sample_initial, Envelope, WavePacketSpec};
use crate::dispersion::{torus_distance, DispersionRelation};
use crate::dynamics::{Chain, ChainState, NoisePath, Stepper, ThermostatParams};
use crate::error::{Error, Result};
use crate::quadrature::pairwise_sum;
use crate::scattering;

/// Energy allowed near the seam opposite the thermostat, relative to the
/// initial energy.
pub const GUARD_TOL: f64 = 1e-6;
/// Energy allowed near the thermostat at the end of a scattering run.
pub const CENTRAL_TOL: f64 = 0.01;

pub fn path_seed(seed: u64, path: usize) -> u64 {
    seed.wrapping_add(path as u64)
}

/// Generator for initial data of path `seed`, on a stream separate from the
/// Brownian increments.
pub fn initial_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Runs `f(path)` for `0..paths` on the rayon pool, results in path order.
pub fn run_paths<T, F>(paths: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..paths).into_par_iter().map(f).collect()
}

/// Column means and standard errors of per-path observables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub samples: usize,
}

pub fn moments(rows: &[Vec<f64>]) -> Moments {
    let m = rows.len();
    let width = rows.first().map_or(0, Vec::len);
    let mut mean = Vec::with_capacity(width);
    let mut stderr = Vec::with_capacity(width);
    for c in 0..width {
        let col: Vec<f64> = rows.iter().map(|r| r[c]).collect();
        let mu = pairwise_sum(&col) / m.max(1) as f64;
        let dev: Vec<f64> = col.iter().map(|x| (x - mu) * (x - mu)).collect();
        let se = if m > 1 {
            (pairwise_sum(&dev) / ((m - 1) * m) as f64).sqrt()
        } else {
            0.0
        };
        mean.push(mu);
        stderr.push(se);
    }
    Moments {
        mean,
        stderr,
        samples: m,
    }
}

/// Raised-cosine mask: 1 on `|d| <= flat`, 0 on `|d| >= edge`.
pub fn tukey(d: f64, flat: f64, edge: f64) -> f64 {
    let d = d.abs();
    if d <= flat {
        1.0
    } else if d >= edge {
        0.0
    } else {
        0.5 * (1.0 + (PI * (d - flat) / (edge - flat)).cos())
    }
}

/// Hann bump `sin^2` on `[a, b]`, zero outside.
pub fn hann(x: f64, a: f64, b: f64) -> f64 {
    if x <= a || x >= b {
        0.0
    } else {
        (PI * (x - a) / (b - a)).sin().powi(2)
    }
}

/// Macroscopic position of array index `i`.
fn position(chain: &Chain, eps: f64, i: usize) -> f64 {
    eps * chain.site(i) as f64
}

/// `eps sum |psi_y|^2` over sites with `inside(x)`.
pub fn region_energy(chain: &Chain, psi: &[Complex64], eps: f64, inside: impl Fn(f64) -> bool) -> f64 {
    let terms: Vec<f64> = psi
        .iter()
        .enumerate()
        .filter(|(i, _)| inside(position(chain, eps, *i)))
        .map(|(_, z)| z.norm_sqr())
        .collect();
    eps * pairwise_sum(&terms)
}

/// Wigner `k`-density averaged over the spatial weight `mask^2`:
/// `(eps/2) |FT(mask psi)(k_j)|^2 / (eps sum mask^2)`, FFT order.
pub fn windowed_density(
    chain: &Chain,
    psi: &[Complex64],
    eps: f64,
    mask: impl Fn(f64) -> f64,
) -> Result<Vec<f64>> {
    let weights: Vec<f64> = (0..chain.n()).map(|i| mask(position(chain, eps, i))).collect();
    let norm = eps * pairwise_sum(&weights.iter().map(|w| w * w).collect::<Vec<_>>());
    if !(norm > 0.0) {
        return Err(Error::param("mask", "spatial window is empty on this lattice"));
    }
    let mut buf: Vec<Complex64> = psi.iter().zip(&weights).map(|(z, w)| z * w).collect();
    chain.fft(&mut buf);
    Ok(buf.iter().map(|z| 0.5 * eps * z.norm_sqr() / norm).collect())
}

/// FFT indices whose momentum lies in `[lo, hi)` (folded to the torus).
pub fn modes_in(chain: &Chain, lo: f64, hi: f64) -> Vec<usize> {
    (0..chain.n())
        .filter(|&j| {
            let k = chain.momentum(j);
            k >= lo && k < hi
        })
        .collect()
}

/// Field restricted to the raised-cosine band `|k - k0| <= 16/n` (flat up to
/// `8/n`).
pub fn band_restrict(chain: &Chain, psi: &[Complex64], k0: f64) -> Vec<Complex64> {
    let n = chain.n() as f64;
    let mut h = psi.to_vec();
    chain.fft(&mut h);
    for (j, z) in h.iter_mut().enumerate() {
        *z *= tukey(torus_distance(chain.momentum(j), k0), 8.0 / n, 16.0 / n) / n;
    }
    chain.ifft(&mut h);
    h
}

fn mean_over(values: &[f64], idx: &[usize]) -> f64 {
    let v: Vec<f64> = idx.iter().map(|&j| values[j]).collect();
    pairwise_sum(&v) / idx.len().max(1) as f64
}

// ---------------------------------------------------------------------------
// Deterministic packet scattering

/// Zero-temperature packet launched towards the thermostat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatteringSetup {
    pub gamma: f64,
    pub x_center: f64,
    pub k_center: f64,
    pub envelope: Envelope,
    pub window_halfwidth: f64,
    pub dt: f64,
    pub t_macro: f64,
}

impl ScatteringSetup {
    /// Cosine bump of half-width 0.1 centred at -0.225, run until its centre
    /// has moved by 0.45.
    pub fn standard(disp: &DispersionRelation, gamma: f64, k_center: f64) -> Self {
        let v = disp.group_velocity(k_center).abs().max(f64::MIN_POSITIVE);
        ScatteringSetup {
            gamma,
            x_center: -0.225,
            k_center,
            envelope: Envelope::CosineBump { half_width: 0.1 },
            window_halfwidth: 0.1,
            dt: 0.00625,
            t_macro: 0.45 / v,
        }
    }

    pub fn validate(&self, disp: &DispersionRelation) -> Result<()> {
        if !(self.gamma >= 0.0) {
            return Err(Error::param("gamma", "must be >= 0"));
        }
        if !(self.x_center < 0.0) {
            return Err(Error::param("x_center", "the packet must start at x < 0"));
        }
        if !(disp.group_velocity(self.k_center) > 0.0) {
            return Err(Error::param("k_center", "group velocity must point towards the thermostat"));
        }
        if !(self.window_halfwidth > 0.0 && self.window_halfwidth < 0.375) {
            return Err(Error::param("window_halfwidth", "must lie in (0, 0.375)"));
        }
        if !(self.t_macro > 0.0) {
            return Err(Error::param("t_macro", "must be > 0"));
        }
        Ok(())
    }

    fn spec(&self, n: usize) -> WavePacketSpec {
        WavePacketSpec {
            eps: 1.0 / n as f64,
            x_center: self.x_center,
            k_center: self.k_center,
            envelope: self.envelope,
            phase_random: false,
        }
    }

    /// Runs the lattice with `n` sites (`eps = 1/n`) and splits the final
    /// energy into transmitted, reflected and absorbed parts.
    pub fn run(&self, disp: &DispersionRelation, n: usize) -> Result<ScatteringOutcome> {
        Ok(self.run_recorded(disp, n, 0)?.outcome)
    }

    /// As [`run`](Self::run), also keeping the final state and `snapshots`
    /// evenly spaced intermediate states (the initial state included).
    pub fn run_recorded(&self, disp: &DispersionRelation, n: usize, snapshots: usize) -> Result<ScatteringRun> {
        self.validate(disp)?;
        let chain = Chain::new(disp.clone(), n)?;
        let spec = self.spec(n);
        spec.validate(&chain)?;
        let eps = spec.eps;
        let psi0 = spec.wave(&chain, 0.0);
        let e0 = eps * pairwise_sum(&psi0.iter().map(|z| z.norm_sqr()).collect::<Vec<_>>());
        let mut state = chain.state_from_wave(&psi0);
        let params = ThermostatParams::new(self.gamma, 0.0)?;
        let mut stepper = Stepper::new(&chain, params, self.dt, &state)?;
        let steps = (self.t_macro / (eps * self.dt)).round() as usize;
        let guard_every = ((0.005 / (eps * self.dt)).round() as usize).max(1);
        let snap_at: Vec<usize> = if snapshots == 0 {
            Vec::new()
        } else if snapshots == 1 {
            vec![0]
        } else {
            (0..snapshots).map(|i| i * steps / (snapshots - 1)).collect()
        };
        let mut kept = Vec::with_capacity(snap_at.len());
        if snap_at.first() == Some(&0) {
            kept.push(state.clone());
        }
        let seam = |x: f64| x.abs() > 0.375;
        let mut guard: f64 = 0.0;
        for s in 1..=steps {
            stepper.step(&mut state, 0.0);
            if snap_at.contains(&s) {
                kept.push(state.clone());
            }
            if s % guard_every == 0 || s == steps {
                let psi = chain.wave_field(&state);
                guard = guard.max(region_energy(&chain, &psi, eps, seam) / e0);
            }
        }
        let psi = chain.wave_field(&state);
        let w = self.window_halfwidth;
        let central = region_energy(&chain, &psi, eps, |x| x.abs() < w) / e0;
        let e_band = region_energy(&chain, &band_restrict(&chain, &psi0, self.k_center), eps, |_| true);
        let cut = |keep: &dyn Fn(f64) -> bool| -> Vec<Complex64> {
            psi.iter()
                .enumerate()
                .map(|(i, &z)| if keep(position(&chain, eps, i)) { z } else { Complex64::new(0.0, 0.0) })
                .collect()
        };
        let band_energy = |field: &[Complex64], k0: f64| {
            region_energy(&chain, &band_restrict(&chain, field, k0), eps, |_| true)
        };
        let e_trans = band_energy(&cut(&|x| x > w), self.k_center) / e_band;
        let e_refl = band_energy(&cut(&|x| x < -w), -self.k_center) / e_band;
        let c = scattering::evaluate(disp, self.gamma, self.k_center)?;
        let out = ScatteringOutcome {
            n,
            steps,
            initial_energy: e0,
            band_energy: e_band,
            e_trans,
            e_refl,
            e_absorbed: 1.0 - e_trans - e_refl,
            expected: [c.p_plus, c.p_minus, c.absorb],
            central_residual: central,
            guard_energy: guard,
        };
        if guard > GUARD_TOL {
            return Err(Error::InvalidRun(format!(
                "wraparound guard: energy fraction {guard:e} reached the seam (n = {n})"
            )));
        }
        if central > CENTRAL_TOL {
            return Err(Error::InvalidRun(format!(
                "packet has not cleared the interface: energy fraction {central:e} within |x| < {w} (n = {n})"
            )));
        }
        Ok(ScatteringRun {
            outcome: out,
            snapshot_steps: snap_at,
            snapshots: kept,
            final_state: state,
        })
    }
}

/// A scattering run with its recorded states.
#[derive(Debug, Clone)]
pub struct ScatteringRun {
    pub outcome: ScatteringOutcome,
    pub snapshot_steps: Vec<usize>,
    pub snapshots: Vec<ChainState>,
    pub final_state: ChainState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringOutcome {
    pub n: usize,
    pub steps: usize,
    pub initial_energy: f64,
    /// Initial energy inside the `+k_center` mask; the fractions are relative
    /// to it.
    pub band_energy: f64,
    pub e_trans: f64,
    pub e_refl: f64,
    pub e_absorbed: f64,
    /// `(p_+, p_-, g)` at the carrier momentum.
    pub expected: [f64; 3],
    pub central_residual: f64,
    pub guard_energy: f64,
}

impl ScatteringOutcome {
    pub fn measured(&self) -> [f64; 3] {
        [self.e_trans, self.e_refl, self.e_absorbed]
    }

    pub fn max_error(&self) -> f64 {
        self.measured()
            .iter()
            .zip(&self.expected)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Errors along a sweep are non-increasing up to a relative `slack`.
pub fn errors_non_increasing(errors: &[f64], slack: f64) -> bool {
    errors.windows(2).all(|w| w[1] <= w[0] * (1.0 + slack))
}

// ---------------------------------------------------------------------------
// Thermal production from zero initial data

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductionSetup {
    pub gamma: f64,
    pub temperature: f64,
    pub n: usize,
    pub dt: f64,
    pub t_macro: f64,
    pub k_lo: f64,
    pub k_hi: f64,
    pub bins: usize,
    pub paths: usize,
    pub seed: u64,
}

impl ProductionSetup {
    pub fn standard(paths: usize, seed: u64) -> Self {
        ProductionSetup {
            gamma: 1.0,
            temperature: 1.0,
            n: 512,
            dt: 0.05,
            t_macro: 0.3,
            k_lo: 0.15,
            k_hi: 0.35,
            bins: 10,
            paths,
            seed,
        }
    }

    pub fn validate(&self, disp: &DispersionRelation) -> Result<()> {
        if !(self.temperature >= 0.0) {
            return Err(Error::param("temperature", "must be >= 0"));
        }
        if !(self.t_macro > 0.0) {
            return Err(Error::param("t_macro", "must be > 0"));
        }
        if !(0.0 < self.k_lo && self.k_lo < self.k_hi && self.k_hi < 0.5) || self.bins == 0 {
            return Err(Error::param("k window", "need 0 < k_lo < k_hi < 1/2 and bins > 0"));
        }
        if self.paths < 2 {
            return Err(Error::param("paths", "need at least 2 paths for error bars"));
        }
        for b in self.bin_edges() {
            for k in b {
                if disp.in_exclusion_zone(k, super::packet::DEFAULT_DELTA_EXCL) {
                    return Err(Error::param("k window", format!("bin edge {k} lies in the exclusion zone")));
                }
            }
        }
        let [_, lim] = self.geometry(disp, self.bin_edges()[0]);
        if lim.1 > 0.45 {
            return Err(Error::param("t_macro", "production front reaches the lattice seam"));
        }
        Ok(())
    }

    pub fn bin_edges(&self) -> Vec<[f64; 2]> {
        let w = (self.k_hi - self.k_lo) / self.bins as f64;
        (0..self.bins)
            .map(|b| [self.k_lo + b as f64 * w, self.k_lo + (b + 1) as f64 * w])
            .collect()
    }

    /// Wedge `[0.1 v_max t, 0.9 v_min t]` and the complement window beyond
    /// the fastest front (bin widened by 0.03 for spectral leakage).
    fn geometry(&self, disp: &DispersionRelation, [lo, hi]: [f64; 2]) -> [(f64, f64); 2] {
        let speeds = |a: f64, b: f64| {
            (0..=16)
                .map(|i| disp.group_velocity(a + (b - a) * i as f64 / 16.0).abs())
                .fold((f64::INFINITY, 0.0f64), |(mn, mx), v| (mn.min(v), mx.max(v)))
        };
        let (v_min, v_max) = speeds(lo, hi);
        let (_, v_edge) = speeds((lo - 0.03).max(0.0), (hi + 0.03).min(0.5));
        let t = self.t_macro;
        let start = v_edge * t + 0.05;
        [(0.1 * v_max * t, 0.9 * v_min * t), (start, start + 0.1)]
    }

    pub fn run(&self, disp: &DispersionRelation) -> Result<ProductionProfile> {
        Ok(self.run_with_wigner(disp, &[])?.0)
    }

    /// As [`run`](Self::run), also estimating the final Wigner transform at
    /// the requested `etas` (which must lie on the shift grid of `eps = 1/n`).
    pub fn run_with_wigner(
        &self,
        disp: &DispersionRelation,
        etas: &[f64],
    ) -> Result<(ProductionProfile, WignerEstimate)> {
        self.validate(disp)?;
        let shifts = shifts_for(1.0 / self.n as f64, self.n, etas)?;
        let chain = Chain::new(disp.clone(), self.n)?;
        let eps = 1.0 / self.n as f64;
        let params = ThermostatParams::new(self.gamma, self.temperature)?;
        chain.check_step(self.dt)?;
        let steps = (self.t_macro / (eps * self.dt)).round() as usize;
        let edges = self.bin_edges();
        let geo: Vec<[(f64, f64); 2]> = edges.iter().map(|&b| self.geometry(disp, b)).collect();
        let plus: Vec<Vec<usize>> = edges.iter().map(|&[lo, hi]| modes_in(&chain, lo, hi)).collect();
        let minus: Vec<Vec<usize>> = edges.iter().map(|&[lo, hi]| modes_in(&chain, -hi, -lo)).collect();
        if plus.iter().any(Vec::is_empty) {
            return Err(Error::param("bins", "a k-bin contains no lattice momentum"));
        }

        let rows = run_paths(self.paths, |path| {
            let seed = path_seed(self.seed, path);
            let mut state = ChainState::zeros(self.n);
            let mut noise = NoisePath::new(seed, self.dt);
            let mut stepper = Stepper::new(&chain, params, self.dt, &state)?;
            for _ in 0..steps {
                let dw = noise.next_increment();
                stepper.step(&mut state, dw);
            }
            let psi = chain.wave_field(&state);
            let hat = if shifts.is_empty() {
                Vec::new()
            } else {
                let mut h = psi.clone();
                chain.fft(&mut h);
                h
            };
            let mut row = Vec::with_capacity(2 * edges.len());
            for (b, g) in geo.iter().enumerate() {
                let side = |(a, c): (f64, f64)| -> Result<f64> {
                    let right = windowed_density(&chain, &psi, eps, |x| hann(x, a, c))?;
                    let left = windowed_density(&chain, &psi, eps, |x| hann(-x, a, c))?;
                    Ok(0.5 * (mean_over(&right, &plus[b]) + mean_over(&left, &minus[b])))
                };
                row.push(side(g[0])?);
                row.push(side(g[1])?);
            }
            Ok((row, hat))
        })?;
        let mut acc = WignerAccumulator::new(self.n, &shifts);
        if !shifts.is_empty() {
            for (_, h) in &rows {
                acc.add(h);
            }
        }
        let rows: Vec<Vec<f64>> = rows.into_iter().map(|(r, _)| r).collect();
        let mo = moments(&rows);
        let half = moments(&rows[..self.paths / 2]);
        let ratios: Vec<f64> = (0..edges.len())
            .filter(|&b| mo.stderr[2 * b] > 0.0)
            .map(|b| half.stderr[2 * b] / mo.stderr[2 * b])
            .collect();
        let half_ensemble_stderr_ratio = if ratios.is_empty() {
            f64::NAN
        } else {
            pairwise_sum(&ratios) / ratios.len() as f64
        };

        let mut bins = Vec::with_capacity(edges.len());
        for (b, &[lo, hi]) in edges.iter().enumerate() {
            let mut g = Vec::with_capacity(plus[b].len());
            for &j in &plus[b] {
                g.push(scattering::evaluate(disp, self.gamma, chain.momentum(j))?.absorb);
            }
            let target = self.temperature * pairwise_sum(&g) / g.len() as f64;
            let plateau = mo.mean[2 * b];
            bins.push(PlateauBin {
                k_lo: lo,
                k_hi: hi,
                wedge: geo[b][0],
                plateau,
                stderr: mo.stderr[2 * b],
                target,
                ratio: if target > 0.0 { plateau / target } else { f64::NAN },
                complement: mo.mean[2 * b + 1],
                complement_stderr: mo.stderr[2 * b + 1],
            });
        }
        let profile = ProductionProfile {
            bins,
            samples: self.paths,
            steps,
            half_ensemble_stderr_ratio,
        };
        Ok((profile, acc.finish(eps, self.t_macro)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauBin {
    pub k_lo: f64,
    pub k_hi: f64,
    pub wedge: (f64, f64),
    pub plateau: f64,
    pub stderr: f64,
    /// `T` times the bin average of `g(k)`.
    pub target: f64,
    pub ratio: f64,
    /// Mean density just beyond the production front.
    pub complement: f64,
    pub complement_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductionProfile {
    pub bins: Vec<PlateauBin>,
    pub samples: usize,
    pub steps: usize,
    /// Plateau standard error from the first half of the paths over that of
    /// all paths, averaged over bins; close to `sqrt(2)` for a sound estimator.
    pub half_ensemble_stderr_ratio: f64,
}

impl ProductionProfile {
    pub fn max_plateau(&self) -> f64 {
        self.bins.iter().map(|b| b.plateau).fold(0.0, f64::max)
    }

    /// Largest `|complement|` relative to the largest plateau.
    pub fn complement_ratio(&self) -> f64 {
        let m = self.max_plateau();
        let c = self.bins.iter().map(|b| b.complement.abs()).fold(0.0, f64::max);
        if m > 0.0 {
            c / m
        } else if c == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "k_lo,k_hi,plateau,stderr,target,ratio,complement,complement_stderr")?;
        for b in &self.bins {
            writeln!(
                out,
                "{:.6},{:.6},{:.10e},{:.4e},{:.10e},{:.8},{:.6e},{:.4e}",
                b.k_lo, b.k_hi, b.plateau, b.stderr, b.target, b.ratio, b.complement, b.complement_stderr
            )?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Laplace transform of the thermal Wigner function

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalLaplaceSetup {
    pub gamma: f64,
    pub temperature: f64,
    pub eps: f64,
    pub n: usize,
    pub dt: f64,
    pub lambda: f64,
    pub etas: Vec<f64>,
    pub k_center: f64,
    /// Half-width of the momentum bin around `k_center`.
    pub half_bin: f64,
    /// Macroscopic integration horizon.
    pub t_end: f64,
    /// Macroscopic sampling step of the time integral.
    pub sample_dt: f64,
    pub paths: usize,
    pub seed: u64,
}

impl ThermalLaplaceSetup {
    pub fn standard(paths: usize, seed: u64) -> Self {
        ThermalLaplaceSetup {
            gamma: 1.0,
            temperature: 1.0,
            eps: 1.0 / 64.0,
            n: 512,
            dt: 0.1,
            lambda: 1.0,
            etas: vec![0.0, 2.0, 4.0],
            k_center: 0.25,
            half_bin: 0.01,
            t_end: 10.0,
            sample_dt: 0.0125,
            paths,
            seed,
        }
    }

    fn sample_every(&self) -> usize {
        ((self.sample_dt / (self.eps * self.dt)).round() as usize).max(1)
    }

    fn samples(&self) -> usize {
        let every = self.sample_every() as f64 * self.eps * self.dt;
        let s = (self.t_end / every).round() as usize;
        s + s % 2
    }

    pub fn validate(&self, disp: &DispersionRelation) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::param("lambda", "must be > 0"));
        }
        if !(self.t_end > 0.0 && self.sample_dt > 0.0) {
            return Err(Error::param("t_end/sample_dt", "must be > 0"));
        }
        if self.paths < 2 {
            return Err(Error::param("paths", "need at least 2 paths for error bars"));
        }
        if disp.in_exclusion_zone(self.k_center, super::packet::DEFAULT_DELTA_EXCL + self.half_bin) {
            return Err(Error::param("k_center", "bin overlaps the exclusion zone"));
        }
        shifts_for(self.eps, self.n, &self.etas)?;
        Ok(())
    }

    /// Target `gamma T |nu|^2 / (lambda (lambda + i omega' eta))` averaged over
    /// the bin, for each `eta`.
    pub fn targets(&self, disp: &DispersionRelation) -> Result<Vec<Complex64>> {
        let chain = Chain::new(disp.clone(), self.n)?;
        let bin = self.bin(&chain);
        let mut coeffs = Vec::with_capacity(bin.len());
        for &j in &bin {
            let k = chain.momentum(j);
            coeffs.push((scattering::evaluate(disp, self.gamma, k)?.nu.norm_sqr(), disp.omega_prime(k)));
        }
        let l = self.lambda;
        Ok(self
            .etas
            .iter()
            .map(|&eta| {
                let terms: Vec<Complex64> = coeffs
                    .iter()
                    .map(|&(nu2, wp)| {
                        self.gamma * self.temperature * nu2 / (l * Complex64::new(l, wp * eta))
                    })
                    .collect();
                crate::quadrature::pairwise_sum_complex(&terms) / terms.len() as f64
            })
            .collect())
    }

    fn bin(&self, chain: &Chain) -> Vec<usize> {
        (0..chain.n())
            .filter(|&j| torus_distance(chain.momentum(j), self.k_center) <= self.half_bin + 1e-12)
            .collect()
    }

    pub fn run(&self, disp: &DispersionRelation) -> Result<Vec<LaplaceEntry>> {
        self.validate(disp)?;
        let chain = Chain::new(disp.clone(), self.n)?;
        let params = ThermostatParams::new(self.gamma, self.temperature)?;
        chain.check_step(self.dt)?;
        let shifts = shifts_for(self.eps, self.n, &self.etas)?;
        let bin = self.bin(&chain);
        let n = self.n as i64;
        let mirror: Vec<usize> = bin.iter().map(|&j| ((n - j as i64) % n) as usize).collect();
        let every = self.sample_every();
        let samples = self.samples();
        let h = every as f64 * self.eps * self.dt;
        // Simpson weights times the Laplace factor.
        let weights: Vec<f64> = (0..=samples)
            .map(|s| {
                let w = if s == 0 || s == samples {
                    1.0
                } else if s % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                w * h / 3.0 * (-self.lambda * s as f64 * h).exp()
            })
            .collect();
        let wrap = |j: i64| j.rem_euclid(n) as usize;
        let scale = 0.5 * self.eps / bin.len() as f64;

        let rows = run_paths(self.paths, |path| {
            let seed = path_seed(self.seed, path);
            let mut state = ChainState::zeros(self.n);
            let mut noise = NoisePath::new(seed, self.dt);
            let mut stepper = Stepper::new(&chain, params, self.dt, &state)?;
            let mut acc = vec![Complex64::new(0.0, 0.0); shifts.len()];
            for (s, w) in weights.iter().enumerate() {
                if s > 0 {
                    for _ in 0..every {
                        let dw = noise.next_increment();
                        stepper.step(&mut state, dw);
                    }
                }
                if s == 0 {
                    continue;
                }
                let hat = chain.wave_hat(&state);
                for (a, &m) in acc.iter_mut().zip(&shifts) {
                    let mut sum = Complex64::new(0.0, 0.0);
                    for (&j, &jm) in bin.iter().zip(&mirror) {
                        let (j, jm) = (j as i64, jm as i64);
                        let direct = hat[wrap(j - m)].conj() * hat[wrap(j + m)];
                        let mirrored = hat[wrap(jm - m)].conj() * hat[wrap(jm + m)];
                        sum += 0.5 * (direct + mirrored.conj());
                    }
                    *a += w * scale * sum;
                }
            }
            Ok(acc.iter().flat_map(|z| [z.re, z.im]).collect::<Vec<f64>>())
        })?;
        let mo = moments(&rows);
        let targets = self.targets(disp)?;
        Ok(self
            .etas
            .iter()
            .enumerate()
            .map(|(r, &eta)| {
                let estimate = Complex64::new(mo.mean[2 * r], mo.mean[2 * r + 1]);
                let target = targets[r];
                LaplaceEntry {
                    eta,
                    estimate,
                    stderr: mo.stderr[2 * r].hypot(mo.stderr[2 * r + 1]),
                    target,
                    rel_error: (estimate - target).norm() / target.norm(),
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceEntry {
    pub eta: f64,
    pub estimate: Complex64,
    pub stderr: f64,
    pub target: Complex64,
    pub rel_error: f64,
}

// ---------------------------------------------------------------------------
// Gibbs stationarity

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSetup {
    pub gamma: f64,
    pub temperature: f64,
    pub n: usize,
    pub dt: f64,
    pub t_micro: f64,
    /// Number of recording intervals; times `0, t/r, ..., t`.
    pub records: usize,
    pub bins: usize,
    pub paths: usize,
    pub seed: u64,
}

impl EquilibriumSetup {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) {
            return Err(Error::param("temperature", "must be > 0"));
        }
        if !(self.t_micro > 0.0) || self.records == 0 {
            return Err(Error::param("t_micro/records", "need t_micro > 0 and records > 0"));
        }
        if self.bins == 0 || self.bins > self.n {
            return Err(Error::param("bins", "need 0 < bins <= n"));
        }
        if self.paths < 2 {
            return Err(Error::param("paths", "need at least 2 paths for error bars"));
        }
        Ok(())
    }

    /// Bins of the `eta = 0` row over the torus; modes with `omega = 0` carry
    /// no potential energy and are left out.
    fn bin_modes(&self, chain: &Chain) -> Vec<Vec<usize>> {
        let w = 1.0 / self.bins as f64;
        (0..self.bins)
            .map(|b| {
                let lo = -0.5 + b as f64 * w;
                modes_in(chain, lo, lo + w)
                    .into_iter()
                    .filter(|&j| chain.omegas()[j] > 0.0)
                    .collect()
            })
            .collect()
    }

    pub fn run(&self, disp: &DispersionRelation) -> Result<EquilibriumReport> {
        self.validate()?;
        let chain = Chain::new(disp.clone(), self.n)?;
        let params = ThermostatParams::new(self.gamma, self.temperature)?;
        chain.check_step(self.dt)?;
        let eps = 1.0 / self.n as f64;
        let total = (self.t_micro / self.dt).round() as usize;
        let per = total / self.records;
        if per == 0 {
            return Err(Error::param("records", "more records than steps"));
        }
        let bins = self.bin_modes(&chain);
        let rows = run_paths(self.paths, |path| {
            let seed = path_seed(self.seed, path);
            let mut state = sample_gibbs(&chain, self.temperature, &mut initial_rng(seed))?;
            let mut noise = NoisePath::new(seed, self.dt);
            let mut stepper = Stepper::new(&chain, params, self.dt, &state)?;
            let mut row = Vec::with_capacity((self.records + 1) * bins.len());
            for r in 0..=self.records {
                if r > 0 {
                    for _ in 0..per {
                        let dw = noise.next_increment();
                        stepper.step(&mut state, dw);
                    }
                }
                let hat = chain.wave_hat(&state);
                let w: Vec<f64> = hat.iter().map(|z| 0.5 * eps * z.norm_sqr()).collect();
                row.extend(bins.iter().map(|b| mean_over(&w, b)));
            }
            Ok(row)
        })?;
        let mo = moments(&rows);
        let nb = bins.len();
        let times = (0..=self.records).map(|r| (r * per) as f64 * self.dt).collect();
        let mean: Vec<Vec<f64>> = mo.mean.chunks(nb).map(<[f64]>::to_vec).collect();
        let stderr: Vec<Vec<f64>> = mo.stderr.chunks(nb).map(<[f64]>::to_vec).collect();
        let mut max_z: f64 = 0.0;
        for (m, s) in mean.iter().flatten().zip(stderr.iter().flatten()) {
            let z = (m - self.temperature).abs() / s.max(f64::MIN_POSITIVE);
            max_z = max_z.max(z);
        }
        Ok(EquilibriumReport {
            temperature: self.temperature,
            times,
            bin_centers: (0..nb).map(|b| -0.5 + (b as f64 + 0.5) / nb as f64).collect(),
            mean,
            stderr,
            max_z,
            samples: self.paths,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub temperature: f64,
    pub times: Vec<f64>,
    pub bin_centers: Vec<f64>,
    /// `mean[record][bin]`.
    pub mean: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    /// Largest `|mean - T| / stderr` over records and bins.
    pub max_z: f64,
    pub samples: usize,
}

impl EquilibriumReport {
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t_micro,k,mean,stderr")?;
        for (r, &t) in self.times.iter().enumerate() {
            for (b, &k) in self.bin_centers.iter().enumerate() {
                writeln!(out, "{t},{k:.6},{:.10e},{:.4e}", self.mean[r][b], self.stderr[r][b])?;
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Energy bound for a thermostatted packet

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySetup {
    pub gamma: f64,
    pub temperature: f64,
    pub n: usize,
    pub dt: f64,
    pub steps: usize,
    pub record_every: usize,
    pub packet: WavePacketSpec,
    pub paths: usize,
    pub seed: u64,
}

impl EnergySetup {
    pub fn run(&self, disp: &DispersionRelation) -> Result<EnergyReport> {
        if self.record_every == 0 || self.paths < 2 {
            return Err(Error::param("record_every/paths", "need record_every > 0 and paths >= 2"));
        }
        let chain = Chain::new(disp.clone(), self.n)?;
        let params = ThermostatParams::new(self.gamma, self.temperature)?;
        self.packet.validate(&chain)?;
        let rows = run_paths(self.paths, |path| {
            let seed = path_seed(self.seed, path);
            let mut state = sample_initial(&chain, &self.packet, &mut initial_rng(seed))?;
            let mut noise = NoisePath::new(seed, self.dt);
            let mut stepper = Stepper::new(&chain, params, self.dt, &state)?;
            let mut row = vec![2.0 * stepper.energy(&state)];
            for s in 1..=self.steps {
                stepper.step(&mut state, noise.next_increment());
                if s % self.record_every == 0 {
                    row.push(2.0 * stepper.energy(&state));
                }
            }
            Ok(row)
        })?;
        let mo = moments(&rows);
        let times: Vec<f64> = (0..mo.mean.len())
            .map(|r| (r * self.record_every) as f64 * self.dt)
            .collect();
        let initial = mo.mean[0];
        let rate = 2.0 * self.gamma * self.temperature;
        let worst_excess = times
            .iter()
            .zip(mo.mean.iter().zip(&mo.stderr))
            .map(|(t, (m, s))| m - (initial + rate * t + 3.0 * s))
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(EnergyReport {
            times,
            mean: mo.mean,
            stderr: mo.stderr,
            initial,
            worst_excess,
            samples: self.paths,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    /// Microscopic times of the records.
    pub times: Vec<f64>,
    /// Ensemble mean of `sum |psi_y|^2`.
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub initial: f64,
    /// `max_t [mean(t) - (initial + 2 gamma T t + 3 stderr(t))]`; the bound
    /// holds when this is `<= 0`.
    pub worst_excess: f64,
    pub samples: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::KernelPreset;

    fn nn() -> DispersionRelation {
        DispersionRelation::from_preset(KernelPreset::NnUnpinned).unwrap()
    }

    #[test]
    fn moments_of_known_rows() {
        let rows = vec![vec![1.0, 10.0], vec![3.0, 10.0]];
        let m = moments(&rows);
        assert_eq!(m.mean, vec![2.0, 10.0]);
        assert!((m.stderr[0] - 1.0).abs() < 1e-15);
        assert_eq!(m.stderr[1], 0.0);
    }

    #[test]
    fn masks() {
        assert_eq!(tukey(0.0, 1.0, 2.0), 1.0);
        assert_eq!(tukey(-1.5, 1.0, 2.0), 0.5);
        assert_eq!(tukey(2.5, 1.0, 2.0), 0.0);
        assert!((hann(0.5, 0.0, 1.0) - 1.0).abs() < 1e-15);
        assert_eq!(hann(1.5, 0.0, 1.0), 0.0);
    }

    #[test]
    fn windowed_density_of_a_plane_wave() {
        // psi_y = e^{2 pi i j0 y / n}: density concentrates at j0 with total
        // (eps/2) sum |FT|^2 / (eps sum m^2) summed over j = n / 2.
        let c = Chain::new(nn(), 256).unwrap();
        let psi: Vec<Complex64> = (0..256)
            .map(|i| Complex64::from_polar(1.0, 2.0 * PI * 64.0 * c.site(i) as f64 / 256.0))
            .collect();
        let d = windowed_density(&c, &psi, 1.0 / 256.0, |x| hann(x, -0.25, 0.25)).unwrap();
        let total: f64 = d.iter().sum();
        assert!((total - 128.0).abs() < 1e-9, "{total}");
        let peak = d.iter().cloned().fold(0.0, f64::max);
        assert_eq!(d[64], peak);
    }

    #[test]
    fn free_transmission() {
        let disp = nn();
        let setup = ScatteringSetup {
            dt: 0.05,
            ..ScatteringSetup::standard(&disp, 0.0, 0.25)
        };
        let out = setup.run(&disp, 2048).unwrap();
        assert!((out.e_trans - 1.0).abs() < 1e-6, "{out:?}");
        assert!(out.e_refl < 1e-6);
        assert!(out.max_error() < 1e-6);
    }

    #[test]
    fn scattering_preconditions() {
        let disp = nn();
        let mut s = ScatteringSetup::standard(&disp, 1.0, 0.25);
        s.dt = 0.05;
        s.t_macro = 0.1;
        let err = s.run(&disp, 1024).unwrap_err().to_string();
        assert!(err.contains("cleared the interface"), "{err}");
        let bad = ScatteringSetup { x_center: 0.2, ..s };
        assert!(matches!(bad.run(&disp, 256), Err(Error::Parameter { .. })));
        s.t_macro = 1.0;
        let err = s.run(&disp, 1024).unwrap_err().to_string();
        assert!(err.contains("wraparound"), "{err}");
    }

    #[test]
    fn scattering_fractions_small_lattice() {
        let disp = nn();
        let s = ScatteringSetup {
            dt: 0.05,
            ..ScatteringSetup::standard(&disp, 1.0, 0.25)
        };
        let out = s.run(&disp, 1024).unwrap();
        assert!(out.max_error() < 1e-3, "{out:?}");
    }

    #[test]
    fn zero_temperature_production_vanishes() {
        let disp = nn();
        let s = ProductionSetup {
            temperature: 0.0,
            n: 256,
            ..ProductionSetup::standard(4, 1)
        };
        let p = s.run(&disp).unwrap();
        assert!(p.bins.iter().all(|b| b.plateau == 0.0 && b.complement == 0.0));
        assert_eq!(p.complement_ratio(), 0.0);
    }

    #[test]
    fn ensembles_do_not_depend_on_thread_count() {
        let disp = nn();
        let s = EquilibriumSetup {
            gamma: 1.0,
            temperature: 1.0,
            n: 64,
            dt: 0.05,
            t_micro: 5.0,
            records: 2,
            bins: 4,
            paths: 9,
            seed: 5,
        };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| s.run(&disp)).unwrap();
        let b = three.install(|| s.run(&disp)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn equilibrium_scales_with_temperature() {
        let disp = nn();
        let s = EquilibriumSetup {
            gamma: 0.0,
            temperature: 1.0,
            n: 128,
            dt: 0.05,
            t_micro: 20.0,
            records: 2,
            bins: 4,
            paths: 50,
            seed: 2,
        };
        let a = s.run(&disp).unwrap();
        let b = EquilibriumSetup { temperature: 2.0, ..s }.run(&disp).unwrap();
        for (x, y) in a.mean.iter().flatten().zip(b.mean.iter().flatten()) {
            assert!((2.0 * x - y).abs() < 1e-12 * y.abs());
        }
        assert!(a.max_z < 4.0, "{}", a.max_z);
    }
}
