//! Zero-temperature mild solution.
//!
//! With `p0_free(t) = int Im(psi_hat(0,k) e^{-i omega t}) dk` the thermostatted
//! momentum is `p_0 = p0_free + g* conv p0_free`, and
//! `psi_hat(t,k) = e^{-i omega t} psi_hat(0,k) - i gamma int_0^t phi(t-s,k) p0_free(s) ds`.
//! Time integrals use the trapezoid rule on the memory kernel's grid.

use num_complex::Complex64;
use rayon::prelude::*;

use super::Chain;
use crate::error::{Error, Result};
use crate::memory::MemoryKernel;

fn check_branch(temperature: f64) -> Result<()> {
    if temperature != 0.0 {
        return Err(Error::UnsupportedBranch(format!(
            "the mild route is deterministic and needs T = 0, got T = {temperature}"
        )));
    }
    Ok(())
}

fn steps_for(mk: &MemoryKernel, t: f64) -> Result<usize> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("t must be >= 0, got {t}")));
    }
    if t > mk.horizon() * (1.0 + 1e-12) {
        return Err(Error::Range {
            t,
            horizon: mk.horizon(),
        });
    }
    let n = (t / mk.dt()).round();
    if (n * mk.dt() - t).abs() > 1e-9 * t.max(1.0) {
        return Err(Error::param(
            "t",
            format!("must be a multiple of the kernel step {}, got {t}", mk.dt()),
        ));
    }
    Ok(n as usize)
}

fn psi_hat(chain: &Chain, psi0: &[Complex64]) -> Result<Vec<Complex64>> {
    if psi0.len() != chain.n() {
        return Err(Error::param(
            "psi0",
            format!("length {} does not match lattice size {}", psi0.len(), chain.n()),
        ));
    }
    let mut h = psi0.to_vec();
    chain.fft(&mut h);
    Ok(h)
}

/// Free momentum at site 0 on `j dt`, `j = 0..=steps`, from the lattice sum
/// `(1/n) sum_j Im(psi_hat_j e^{-i omega_j t})`.
pub fn free_p0(chain: &Chain, psi_hat0: &[Complex64], dt: f64, steps: usize) -> Vec<f64> {
    let n = chain.n() as f64;
    let mut out = vec![0.0; steps + 1];
    for (z0, &w) in psi_hat0.iter().zip(chain.omegas()) {
        if z0.norm_sqr() == 0.0 {
            continue;
        }
        let rot = Complex64::from_polar(1.0, -w * dt);
        let mut z = *z0;
        for (m, o) in out.iter_mut().enumerate() {
            if m % 256 == 0 {
                z = z0 * Complex64::from_polar(1.0, -w * dt * m as f64);
            }
            *o += z.im / n;
            z *= rot;
        }
    }
    out
}

/// `p_0(j dt)` for `j = 0..=steps` from the closed Volterra relation, with
/// `dt` the kernel step.
pub fn p0_volterra(
    chain: &Chain,
    psi0: &[Complex64],
    mk: &MemoryKernel,
    temperature: f64,
    t_end: f64,
) -> Result<Vec<f64>> {
    check_branch(temperature)?;
    let steps = steps_for(mk, t_end)?;
    let free = free_p0(chain, &psi_hat(chain, psi0)?, mk.dt(), steps);
    let g = mk.gstar_samples();
    let h = mk.dt();
    let out = (0..=steps)
        .into_par_iter()
        .map(|m| {
            if m == 0 {
                return free[0];
            }
            let mut conv = 0.5 * (free[m] * g[0] + free[0] * g[m]);
            for i in 1..m {
                conv += free[m - i] * g[i];
            }
            free[m] + h * conv
        })
        .collect();
    Ok(out)
}

/// `psi_hat(t, j/n)` for every lattice momentum, in FFT order.
pub fn psi_spectral_mild(
    chain: &Chain,
    psi0: &[Complex64],
    mk: &MemoryKernel,
    temperature: f64,
    t: f64,
) -> Result<Vec<Complex64>> {
    check_branch(temperature)?;
    let steps = steps_for(mk, t)?;
    let hat0 = psi_hat(chain, psi0)?;
    let h = mk.dt();
    let gamma = mk.gamma();
    let free = free_p0(chain, &hat0, h, steps);
    let t_exact = steps as f64 * h;
    (0..chain.n())
        .into_par_iter()
        .map(|j| {
            let w = chain.omegas()[j];
            let free_part = hat0[j] * Complex64::from_polar(1.0, -w * t_exact);
            if gamma == 0.0 || steps == 0 {
                return Ok(free_part);
            }
            // phi(tau_m) = e^{-i omega tau_m} phi_tilde_m
            let tilde = mk.phi_tilde_series(chain.momentum(j), steps)?;
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, f) in free.iter().enumerate() {
                let m = steps - i;
                let phi = tilde[m] * Complex64::from_polar(1.0, -w * (m as f64 * h));
                let wgt = if i == 0 || i == steps { 0.5 } else { 1.0 };
                acc += wgt * phi * *f;
            }
            Ok(free_part - Complex64::i() * gamma * h * acc)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::{simulate, ChainState, NoisePath, ThermostatParams};
    use super::*;
    use crate::dispersion::{DispersionRelation, KernelPreset};
    use crate::memory::MemoryKernelConfig;
    use std::f64::consts::PI;

    fn setup(n: usize, gamma: f64, dt: f64, horizon: f64) -> (Chain, MemoryKernel) {
        let d = DispersionRelation::from_preset(KernelPreset::NnUnpinned).unwrap();
        let mk = MemoryKernel::new(d.clone(), gamma, MemoryKernelConfig { dt, horizon }).unwrap();
        (Chain::new(d, n).unwrap(), mk)
    }

    fn packet(c: &Chain, y0: f64, k0: f64, width: f64) -> Vec<Complex64> {
        (0..c.n())
            .map(|i| {
                let y = c.site(i) as f64;
                let env = (-(y - y0).powi(2) / (2.0 * width * width)).exp();
                Complex64::from_polar(env, 2.0 * PI * k0 * y)
            })
            .collect()
    }

    /// Wave field whose state round trip is exact (no acoustic zero mode).
    fn consistent(c: &Chain, psi: &[Complex64]) -> (ChainState, Vec<Complex64>) {
        let s = c.state_from_wave(psi);
        let back = c.wave_field(&s);
        (s, back)
    }

    #[test]
    fn trivial_cases() {
        let (c, mk) = setup(64, 1.0, 0.02, 5.0);
        let zero = vec![Complex64::new(0.0, 0.0); 64];
        assert!(p0_volterra(&c, &zero, &mk, 0.0, 5.0).unwrap().iter().all(|&p| p == 0.0));
        assert!(matches!(p0_volterra(&c, &zero, &mk, 1.0, 5.0), Err(Error::UnsupportedBranch(_))));
        assert!(matches!(p0_volterra(&c, &zero, &mk, 0.0, 6.0), Err(Error::Range { .. })));
        let psi = packet(&c, -6.0, 0.2, 3.0);
        let id = psi_spectral_mild(&c, &psi, &mk, 0.0, 0.0).unwrap();
        let mut hat = psi.clone();
        c.fft(&mut hat);
        for (a, b) in id.iter().zip(&hat) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn free_case_is_phase_rotation() {
        let (c, mk) = setup(64, 0.0, 0.02, 5.0);
        let psi = packet(&c, -6.0, 0.2, 3.0);
        let p0 = p0_volterra(&c, &psi, &mk, 0.0, 4.0).unwrap();
        let mut hat = psi.clone();
        c.fft(&mut hat);
        assert_eq!(p0, free_p0(&c, &hat, 0.02, 200));
        let out = psi_spectral_mild(&c, &psi, &mk, 0.0, 4.0).unwrap();
        for ((a, b), w) in out.iter().zip(&hat).zip(c.omegas()) {
            assert!((a - b * Complex64::from_polar(1.0, -w * 4.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn volterra_p0_matches_direct_run() {
        let dt = 0.02;
        let (c, mk) = setup(256, 1.0, dt, 50.0);
        let (s0, psi) = consistent(&c, &packet(&c, -15.0, 0.2, 4.0));
        let mild = p0_volterra(&c, &psi, &mk, 0.0, 50.0).unwrap();
        let params = ThermostatParams::new(1.0, 0.0).unwrap();
        let tr = simulate(&c, &mut s0.clone(), params, dt, 2500, &mut NoisePath::new(0, dt), &[]).unwrap();
        let err = mild.iter().zip(&tr.p0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 5.0 * dt, "sup error {err}");
    }

    #[test]
    fn mild_wave_matches_direct_and_converges() {
        let dist = |dt: f64| {
            let (c, mk) = setup(256, 1.0, dt, 25.0);
            let (s0, psi) = consistent(&c, &packet(&c, -12.0, 0.2, 4.0));
            let mild = psi_spectral_mild(&c, &psi, &mk, 0.0, 25.0).unwrap();
            let params = ThermostatParams::new(1.0, 0.0).unwrap();
            let steps = (25.0 / dt).round() as usize;
            let mut s = s0.clone();
            simulate(&c, &mut s, params, dt, steps, &mut NoisePath::new(0, dt), &[]).unwrap();
            let direct = c.wave_hat(&s);
            let num: f64 = mild.iter().zip(&direct).map(|(a, b)| (a - b).norm_sqr()).sum();
            let den: f64 = direct.iter().map(|z| z.norm_sqr()).sum();
            (num / den).sqrt()
        };
        let (a, b) = (dist(0.04), dist(0.02));
        assert!(a < 10.0 * 0.04 && b < 10.0 * 0.02, "{a} {b}");
        assert!(a / b >= 1.8, "contraction {}", a / b);
    }
}
