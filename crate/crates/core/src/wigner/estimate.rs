//! Monte-Carlo estimator of the rescaled Wigner transform
//! `W^(eta, k) = (eps/2) E[psi^*(k - eps eta/2) psi^(k + eps eta/2)]`.
//!
//! Frequencies are restricted to exact lattice shifts `eps eta / 2 = m / n`,
//! so `eta = 2 m / (eps n)`. On the periodic window of length `L = eps n`
//! the resulting grid has spacing `2 / L`: test-function pairings see the
//! test function periodized with period `L / 2`.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lattice shift `m` for each requested `eta`.
pub fn shifts_for(eps: f64, n: usize, etas: &[f64]) -> Result<Vec<i64>> {
    etas.iter()
        .map(|&eta| {
            let m = eps * eta * n as f64 / 2.0;
            let r = m.round();
            if (m - r).abs() > 1e-9 * m.abs().max(1.0) {
                return Err(Error::param(
                    "eta",
                    format!("eta = {eta} is not on the shift grid (eps eta n / 2 = {m})"),
                ));
            }
            if eps * eta.abs() > 0.25 {
                return Err(Error::param(
                    "eta",
                    format!("|eps eta| must be <= 1/4, got {}", eps * eta.abs()),
                ));
            }
            Ok(r as i64)
        })
        .collect()
}

fn wrap(j: i64, n: usize) -> usize {
    j.rem_euclid(n as i64) as usize
}

/// Unscaled products `psi^*(k_j - m/n) psi^(k_j + m/n)` for one sample.
pub fn products(psi_hat: &[Complex64], m: i64) -> impl Iterator<Item = Complex64> + '_ {
    let n = psi_hat.len();
    (0..n).map(move |j| psi_hat[wrap(j as i64 - m, n)].conj() * psi_hat[wrap(j as i64 + m, n)])
}

/// Running sums for a group of samples; groups merge in a fixed order so
/// results do not depend on thread scheduling.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WignerAccumulator {
    pub n: usize,
    pub shifts: Vec<i64>,
    sum: Vec<Vec<Complex64>>,
    sum_sq: Vec<Vec<f64>>,
    count: usize,
}

impl WignerAccumulator {
    pub fn new(n: usize, shifts: &[i64]) -> Self {
        WignerAccumulator {
            n,
            shifts: shifts.to_vec(),
            sum: vec![vec![Complex64::new(0.0, 0.0); n]; shifts.len()],
            sum_sq: vec![vec![0.0; n]; shifts.len()],
            count: 0,
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn add(&mut self, psi_hat: &[Complex64]) {
        assert_eq!(psi_hat.len(), self.n, "sample length differs from n");
        for (r, &m) in self.shifts.iter().enumerate() {
            for (j, z) in products(psi_hat, m).enumerate() {
                self.sum[r][j] += z;
                self.sum_sq[r][j] += z.norm_sqr();
            }
        }
        self.count += 1;
    }

    pub fn merge(&mut self, other: &WignerAccumulator) {
        assert_eq!(self.shifts, other.shifts);
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self.count += other.count;
    }

    /// Merges a list of accumulators by a balanced tree in list order.
    pub fn merge_all(mut parts: Vec<WignerAccumulator>) -> Option<WignerAccumulator> {
        while parts.len() > 1 {
            let mut next = Vec::with_capacity(parts.len().div_ceil(2));
            let mut it = parts.into_iter();
            while let Some(mut a) = it.next() {
                if let Some(b) = it.next() {
                    a.merge(&b);
                }
                next.push(a);
            }
            parts = next;
        }
        parts.pop()
    }

    pub fn finish(&self, eps: f64, t_macro: f64) -> WignerEstimate {
        let m = self.count.max(1) as f64;
        let scale = 0.5 * eps;
        let mut values = Vec::with_capacity(self.shifts.len());
        let mut stderr = Vec::with_capacity(self.shifts.len());
        for (s, sq) in self.sum.iter().zip(&self.sum_sq) {
            let mean: Vec<Complex64> = s.iter().map(|z| z / m).collect();
            let se: Vec<f64> = if self.count > 1 {
                sq.iter()
                    .zip(&mean)
                    .map(|(q, mu)| {
                        let var = ((q - m * mu.norm_sqr()) / (m - 1.0)).max(0.0);
                        scale * (var / m).sqrt()
                    })
                    .collect()
            } else {
                vec![0.0; self.n]
            };
            values.push(mean.iter().map(|z| z * scale).collect());
            stderr.push(se);
        }
        WignerEstimate {
            eps,
            n: self.n,
            eta: self
                .shifts
                .iter()
                .map(|&m| 2.0 * m as f64 / (eps * self.n as f64))
                .collect(),
            shifts: self.shifts.clone(),
            values,
            stderr,
            samples: self.count,
            t_macro,
        }
    }
}

/// Estimated `W^(eta, k)` on the lattice momenta `j / n` (FFT order).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WignerEstimate {
    pub eps: f64,
    pub n: usize,
    pub shifts: Vec<i64>,
    pub eta: Vec<f64>,
    pub values: Vec<Vec<Complex64>>,
    pub stderr: Vec<Vec<f64>>,
    pub samples: usize,
    pub t_macro: f64,
}

impl WignerEstimate {
    pub fn eta_step(&self) -> f64 {
        2.0 / (self.eps * self.n as f64)
    }

    /// Momentum of column `j`, folded into `[-1/2, 1/2)`.
    pub fn k(&self, j: usize) -> f64 {
        let k = j as f64 / self.n as f64;
        if k >= 0.5 {
            k - 1.0
        } else {
            k
        }
    }

    pub fn row(&self, m: i64) -> Option<&[Complex64]> {
        self.shifts
            .iter()
            .position(|&s| s == m)
            .map(|r| self.values[r].as_slice())
    }

    /// `sum_{eta, k} W^(eta, k) conj(G^(eta, k)) d_eta d_k`.
    pub fn pair_test_function<G>(&self, g_hat: G) -> Complex64
    where
        G: Fn(f64, f64) -> Complex64,
    {
        let weight = self.eta_step() / self.n as f64;
        let mut total = Complex64::new(0.0, 0.0);
        for (row, &eta) in self.values.iter().zip(&self.eta) {
            let terms: Vec<Complex64> = row
                .iter()
                .enumerate()
                .map(|(j, w)| w * g_hat(eta, self.k(j)).conj())
                .collect();
            total += crate::quadrature::pairwise_sum_complex(&terms);
        }
        total * weight
    }

    /// CSV with columns `eta,k,re,im,stderr`, rows sorted by `eta` then `k`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "eta,k,re,im,stderr")?;
        let mut order: Vec<usize> = (0..self.eta.len()).collect();
        order.sort_by(|&a, &b| self.eta[a].total_cmp(&self.eta[b]));
        let mut cols: Vec<usize> = (0..self.n).collect();
        cols.sort_by(|&a, &b| self.k(a).total_cmp(&self.k(b)));
        for r in order {
            for &j in &cols {
                let v = self.values[r][j];
                writeln!(
                    out,
                    "{},{:.10},{:.12e},{:.12e},{:.6e}",
                    self.eta[r],
                    self.k(j),
                    v.re,
                    v.im,
                    self.stderr[r][j]
                )?;
            }
        }
        Ok(())
    }
}

/// Estimate from a list of lattice wave fields (FFT applied here).
pub fn wigner_estimate(
    chain: &crate::dynamics::Chain,
    samples: &[Vec<Complex64>],
    eps: f64,
    etas: &[f64],
    t_macro: f64,
) -> Result<WignerEstimate> {
    let shifts = shifts_for(eps, chain.n(), etas)?;
    let mut acc = WignerAccumulator::new(chain.n(), &shifts);
    for s in samples {
        if s.len() != chain.n() {
            return Err(Error::param("samples", "all samples must share the lattice size"));
        }
        let mut h = s.clone();
        chain.fft(&mut h);
        acc.add(&h);
    }
    Ok(acc.finish(eps, t_macro))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::{DispersionRelation, KernelPreset};
    use crate::dynamics::Chain;
    use crate::wigner::packet::{Envelope, WavePacketSpec};
    use std::f64::consts::PI;

    fn chain(n: usize) -> Chain {
        Chain::new(DispersionRelation::from_preset(KernelPreset::NnUnpinned).unwrap(), n).unwrap()
    }

    fn packet(n: usize, half_width: f64) -> WavePacketSpec {
        WavePacketSpec {
            eps: 1.0 / n as f64,
            x_center: -0.2,
            k_center: 0.25,
            envelope: Envelope::CosineBump { half_width },
            phase_random: false,
        }
    }

    fn all_etas(max_m: i64, n: usize) -> Vec<f64> {
        let eps = 1.0 / n as f64;
        (-max_m..=max_m).map(|m| 2.0 * m as f64 / (eps * n as f64)).collect()
    }

    #[test]
    fn shift_grid() {
        assert_eq!(shifts_for(1.0 / 256.0, 256, &[0.0, 2.0, -4.0]).unwrap(), vec![0, 1, -2]);
        assert!(shifts_for(1.0 / 256.0, 256, &[3.0]).is_err());
        assert!(shifts_for(1.0 / 256.0, 256, &[128.0]).is_err());
        assert_eq!(shifts_for(1.0 / 64.0, 512, &[2.0, 4.0]).unwrap(), vec![8, 16]);
    }

    #[test]
    fn single_sample_diagonal_and_hermitian() {
        let c = chain(128);
        let s = packet(128, 0.1);
        let psi = s.wave(&c, 0.3);
        let est = wigner_estimate(&c, &[psi.clone()], s.eps, &all_etas(6, 128), 0.0).unwrap();
        let mut hat = psi;
        c.fft(&mut hat);
        let row0 = est.row(0).unwrap();
        for (w, h) in row0.iter().zip(&hat) {
            assert_eq!(*w, Complex64::new(0.5 * s.eps * h.norm_sqr(), 0.0));
        }
        for m in 1..=6i64 {
            let (p, q) = (est.row(m).unwrap(), est.row(-m).unwrap());
            // W(-eta, k) = conj(W(eta, k)) at the same k
            for j in 0..128 {
                assert_eq!(p[j], q[j].conj());
            }
        }
    }

    #[test]
    fn zero_row_sums_to_half_energy() {
        let c = chain(256);
        let s = packet(256, 0.1);
        let psi = s.wave(&c, 0.0);
        let est = wigner_estimate(&c, &[psi.clone()], s.eps, &[0.0], 0.0).unwrap();
        let total: f64 = est.row(0).unwrap().iter().map(|z| z.re).sum::<f64>() / 256.0;
        let energy: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        assert!((total - 0.5 * s.eps * energy).abs() < 1e-12);
    }

    #[test]
    fn packet_spectrum_is_concentrated() {
        let n = 1024;
        let c = chain(n);
        let s = packet(n, 0.2);
        let est = wigner_estimate(&c, &[s.wave(&c, 0.0)], s.eps, &[0.0], 0.0).unwrap();
        let row = est.row(0).unwrap();
        let total: f64 = row.iter().map(|z| z.re).sum();
        let near: f64 = (0..n)
            .filter(|&j| (est.k(j) - 0.25).abs() < 8.0 / n as f64)
            .map(|j| row[j].re)
            .sum();
        assert!(near / total >= 0.95, "{}", near / total);
    }

    #[test]
    fn initial_decay_in_eta() {
        // |W^(eta, k_c)| <= C (1 + eta^2)^(-2) for the cosine bump (kappa = 1/2)
        let n = 512;
        let c = chain(n);
        let s = packet(n, 0.1);
        let etas = all_etas(60, n);
        let est = wigner_estimate(&c, &[s.wave(&c, 0.0)], s.eps, &etas, 0.0).unwrap();
        let jc = n / 4;
        let w0 = est.row(0).unwrap()[jc].norm();
        for (r, &eta) in est.eta.iter().enumerate() {
            let bound = 2.0 * w0 * (1.0 + (0.1 * eta).powi(2)).powf(-2.0);
            assert!(est.values[r][jc].norm() <= bound, "eta {eta}");
        }
    }

    #[test]
    fn pairing_with_constant_and_spatial_functions() {
        let n = 512;
        let c = chain(n);
        let s = packet(n, 0.1);
        let psi = s.wave(&c, 1.1);
        let etas = all_etas((n / 8) as i64, n);
        let est = wigner_estimate(&c, &[psi.clone()], s.eps, &etas, 0.0).unwrap();

        // G = 1: only eta = 0 contributes, with weight 1 / d_eta
        let one = est.pair_test_function(|eta, _| {
            if eta == 0.0 {
                Complex64::new(1.0 / est.eta_step(), 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let row0: f64 = est.row(0).unwrap().iter().map(|z| z.re).sum::<f64>() / n as f64;
        assert!((one.re - row0).abs() < 1e-14 && one.im.abs() < 1e-14);

        // G(x, k) = Gaussian bump in x near the packet
        let (x0, sig) = (-0.18, 0.05);
        let g1 = |x: f64| (-(x - x0).powi(2) / (2.0 * sig * sig)).exp();
        let g1_hat = |eta: f64| {
            Complex64::from_polar(
                (2.0 * PI).sqrt() * sig * (-2.0 * (PI * eta * sig).powi(2)).exp(),
                -2.0 * PI * eta * x0,
            )
        };
        let paired = est.pair_test_function(|eta, _| g1_hat(eta));
        let direct: f64 = (0..n)
            .map(|i| 0.5 * s.eps * psi[i].norm_sqr() * g1(s.eps * c.site(i) as f64))
            .sum();
        assert!((paired.re - direct).abs() < 0.02 * direct, "{paired} vs {direct}");
        assert!(paired.im.abs() < 1e-10);
    }

    #[test]
    fn accumulator_merge_is_order_fixed() {
        let c = chain(64);
        let s = packet(64, 0.1);
        let hats: Vec<Vec<Complex64>> = (0..7)
            .map(|i| {
                let mut h = s.wave(&c, i as f64);
                c.fft(&mut h);
                h
            })
            .collect();
        let shifts = [0i64, 1, 2];
        let parts: Vec<WignerAccumulator> = hats
            .chunks(2)
            .map(|ch| {
                let mut a = WignerAccumulator::new(64, &shifts);
                ch.iter().for_each(|h| a.add(h));
                a
            })
            .collect();
        let a = WignerAccumulator::merge_all(parts.clone()).unwrap().finish(1.0 / 64.0, 0.0);
        let b = WignerAccumulator::merge_all(parts).unwrap().finish(1.0 / 64.0, 0.0);
        assert_eq!(a.values, b.values);
        assert_eq!(a.samples, 7);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 3 * 64);
    }
}
