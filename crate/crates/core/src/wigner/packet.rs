//! Initial data: random-phase wave packets and Gibbs samples.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{Chain, ChainState};
use crate::error::{Error, Result};

/// Exclusion half-width around the band edges used for packet carriers.
pub const DEFAULT_DELTA_EXCL: f64 = 0.02;

/// Envelope profile in macroscopic units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Envelope {
    /// `cos^2(pi x / (2 w))` on `|x| < w`.
    CosineBump { half_width: f64 },
    /// `exp(-x^2 / (2 s^2))`, treated as supported on `|x| < 8 s`.
    Gaussian { sigma: f64 },
    Zero,
}

impl Envelope {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Envelope::CosineBump { half_width } => {
                if x.abs() < half_width {
                    (PI * x / (2.0 * half_width)).cos().powi(2)
                } else {
                    0.0
                }
            }
            Envelope::Gaussian { sigma } => (-x * x / (2.0 * sigma * sigma)).exp(),
            Envelope::Zero => 0.0,
        }
    }

    /// `int envelope(x)^2 dx`.
    pub fn energy(&self) -> f64 {
        match *self {
            Envelope::CosineBump { half_width } => 0.75 * half_width,
            Envelope::Gaussian { sigma } => sigma * PI.sqrt(),
            Envelope::Zero => 0.0,
        }
    }

    pub fn support_radius(&self) -> f64 {
        match *self {
            Envelope::CosineBump { half_width } => half_width,
            Envelope::Gaussian { sigma } => 8.0 * sigma,
            Envelope::Zero => 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let w = match *self {
            Envelope::CosineBump { half_width } => half_width,
            Envelope::Gaussian { sigma } => sigma,
            Envelope::Zero => return Ok(()),
        };
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::param("envelope", format!("width must be > 0, got {w}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavePacketSpec {
    pub eps: f64,
    pub x_center: f64,
    pub k_center: f64,
    pub envelope: Envelope,
    #[serde(default = "default_true")]
    pub phase_random: bool,
}

fn default_true() -> bool {
    true
}

impl WavePacketSpec {
    /// Checks the carrier against the exclusion zone and the envelope against
    /// the periodic window `[-eps n / 2, eps n / 2)`.
    pub fn validate(&self, chain: &Chain) -> Result<()> {
        self.envelope.validate()?;
        if !(self.eps > 0.0) {
            return Err(Error::param("eps", format!("must be > 0, got {}", self.eps)));
        }
        if chain.disp().in_exclusion_zone(self.k_center, DEFAULT_DELTA_EXCL) {
            return Err(Error::param(
                "k_center",
                format!(
                    "{} lies within {DEFAULT_DELTA_EXCL} of a band edge",
                    self.k_center
                ),
            ));
        }
        let half = 0.5 * self.eps * chain.n() as f64;
        let r = self.envelope.support_radius();
        if self.x_center - r < -half || self.x_center + r > half {
            return Err(Error::param(
                "x_center",
                format!(
                    "envelope [{}, {}] does not fit in the window [{}, {})",
                    self.x_center - r,
                    self.x_center + r,
                    -half,
                    half
                ),
            ));
        }
        Ok(())
    }

    /// `psi_y = envelope(eps y - x_center) e^{2 pi i k_center y} e^{i theta}` on
    /// centered sites.
    pub fn wave(&self, chain: &Chain, theta: f64) -> Vec<Complex64> {
        let phase = Complex64::from_polar(1.0, theta);
        (0..chain.n())
            .map(|i| {
                let y = chain.site(i) as f64;
                let env = self.envelope.eval(self.eps * y - self.x_center);
                if env == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    env * phase * Complex64::from_polar(1.0, 2.0 * PI * self.k_center * y)
                }
            })
            .collect()
    }
}

/// Draws the global phase (when random) and returns the lattice state
/// `p = Im psi`, `q_hat = FFT(Re psi) / omega`.
pub fn sample_initial<R: Rng + ?Sized>(
    chain: &Chain,
    spec: &WavePacketSpec,
    rng: &mut R,
) -> Result<ChainState> {
    spec.validate(chain)?;
    let theta = if spec.phase_random {
        rng.random::<f64>() * 2.0 * PI
    } else {
        0.0
    };
    Ok(chain.state_from_wave(&spec.wave(chain, theta)))
}

/// Gibbs sample at temperature `t`: `p_y` i.i.d. `N(0, t)` and `q` with
/// covariance `t A^{-1}` (the zero mode is pinned to 0 for acoustic chains).
pub fn sample_gibbs<R: Rng + ?Sized>(chain: &Chain, temperature: f64, rng: &mut R) -> Result<ChainState> {
    if !(temperature >= 0.0) {
        return Err(Error::param("temperature", format!("must be >= 0, got {temperature}")));
    }
    let n = chain.n();
    let sd = temperature.sqrt();
    let p: Vec<f64> = (0..n).map(|_| sd * Distribution::<f64>::sample(&StandardNormal, rng)).collect();
    let zeta: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(sd * Distribution::<f64>::sample(&StandardNormal, rng), 0.0))
        .collect();
    let mut buf = zeta;
    chain.fft(&mut buf);
    for (b, &w) in buf.iter_mut().zip(chain.omegas()) {
        *b = if w > 0.0 { *b / w } else { Complex64::new(0.0, 0.0) };
    }
    chain.ifft(&mut buf);
    let q = buf.iter().map(|z| z.re / n as f64).collect();
    Ok(ChainState { p, q, t_micro: 0.0 })
}
