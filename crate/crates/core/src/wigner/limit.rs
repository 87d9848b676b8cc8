//! Closed-form kinetic limit.
//!
//! For `v = omega'(k) / (2 pi)` and `I = [0, v t]` (or `[v t, 0]` when `v < 0`),
//!
//! ```text
//! W(t,x,k) = W0(x - v t, k)                                       x outside I
//!          = g(k) T + p_+(k) W0(x - v t, k) + p_-(k) W0(v t - x, -k)  x inside I
//! ```
//!
//! and its Laplace (in `t`) / Fourier (in `x`) transform has a closed form in
//! terms of `W0^`. Coefficients are evaluated at the exact `k`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dispersion::DispersionRelation;
use crate::error::{Error, Result};
use crate::quadrature::{self, Tolerance};
use crate::scattering::{self, Coefficients};

/// Gaussian bump `a exp(-(x-x0)^2/(2 sx^2) - d(k,k0)^2/(2 sk^2))` with `d` the
/// torus distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPacket {
    pub amplitude: f64,
    pub x0: f64,
    pub k0: f64,
    pub sx: f64,
    pub sk: f64,
}

impl GaussianPacket {
    fn k_factor(&self, k: f64) -> f64 {
        let d = crate::dispersion::torus_distance(k, self.k0);
        (-d * d / (2.0 * self.sk * self.sk)).exp()
    }

    pub fn eval(&self, x: f64, k: f64) -> f64 {
        let dx = x - self.x0;
        self.amplitude * (-dx * dx / (2.0 * self.sx * self.sx)).exp() * self.k_factor(k)
    }

    /// `int e^{-2 pi i eta x} W0(x, k) dx`.
    pub fn hat(&self, eta: f64, k: f64) -> Complex64 {
        let mag = self.amplitude
            * (2.0 * PI).sqrt()
            * self.sx
            * (-2.0 * (PI * eta * self.sx).powi(2)).exp()
            * self.k_factor(k);
        Complex64::from_polar(mag, -2.0 * PI * eta * self.x0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum W0Profile {
    Zero,
    Equilibrium { temperature: f64 },
    Packets { packets: Vec<GaussianPacket> },
}

impl W0Profile {
    pub fn eval(&self, x: f64, k: f64) -> f64 {
        match self {
            W0Profile::Zero => 0.0,
            W0Profile::Equilibrium { temperature } => *temperature,
            W0Profile::Packets { packets } => packets.iter().map(|p| p.eval(x, k)).sum(),
        }
    }

    /// Fourier transform in `x`; undefined (a delta in `eta`) for the
    /// equilibrium profile.
    pub fn hat(&self, eta: f64, k: f64) -> Result<Complex64> {
        match self {
            W0Profile::Zero => Ok(Complex64::new(0.0, 0.0)),
            W0Profile::Equilibrium { .. } => Err(Error::UnsupportedBranch(
                "the Fourier transform of a constant profile is a delta".into(),
            )),
            W0Profile::Packets { packets } => Ok(packets.iter().map(|p| p.hat(eta, k)).sum()),
        }
    }

    fn scale(&self) -> f64 {
        match self {
            W0Profile::Zero => 0.0,
            W0Profile::Equilibrium { temperature } => *temperature,
            W0Profile::Packets { packets } => packets.iter().map(|p| p.amplitude.abs()).sum(),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            W0Profile::Packets { packets } => packets.iter().map(|p| p.x0).collect(),
            _ => Vec::new(),
        }
    }

    fn spatial_reach(&self) -> f64 {
        match self {
            W0Profile::Packets { packets } => packets
                .iter()
                .map(|p| p.x0.abs() + 12.0 * p.sx)
                .fold(0.0, f64::max),
            _ => 0.0,
        }
    }
}

/// Which one-sided limit to take when `x` sits on an interval end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitSolution {
    pub disp: DispersionRelation,
    pub gamma: f64,
    pub temperature: f64,
    pub w0: W0Profile,
    pub delta_excl: f64,
}

impl LimitSolution {
    pub fn new(disp: DispersionRelation, gamma: f64, temperature: f64, w0: W0Profile) -> Result<Self> {
        if !(gamma >= 0.0) || !(temperature >= 0.0) {
            return Err(Error::param("gamma/temperature", "must be >= 0"));
        }
        Ok(LimitSolution {
            disp,
            gamma,
            temperature,
            w0,
            delta_excl: super::packet::DEFAULT_DELTA_EXCL,
        })
    }

    pub fn coefficients(&self, k: f64) -> Result<Coefficients> {
        if self.disp.in_exclusion_zone(k, self.delta_excl) {
            return Err(Error::SingularZone {
                k,
                omega_prime: self.disp.omega_prime(k),
            });
        }
        scattering::evaluate(&self.disp, self.gamma, k)
    }

    fn value(&self, t: f64, x: f64, k: f64, side: Option<Side>) -> Result<f64> {
        let c = self.coefficients(k)?;
        let v = self.disp.group_velocity(k);
        let end = v * t;
        let (lo, hi) = if end >= 0.0 { (0.0, end) } else { (end, 0.0) };
        let inside = if lo == hi {
            false
        } else if x > lo && x < hi {
            true
        } else if x == lo {
            side == Some(Side::Right)
        } else if x == hi {
            side == Some(Side::Left)
        } else {
            false
        };
        let free = self.w0.eval(x - end, k);
        if !inside {
            return Ok(free);
        }
        Ok(c.absorb * self.temperature + c.p_plus * free + c.p_minus * self.w0.eval(end - x, -k))
    }

    pub fn limit_wigner(&self, t: f64, x: f64, k: f64) -> Result<f64> {
        self.value(t, x, k, None)
    }

    pub fn limit_wigner_side(&self, t: f64, x: f64, k: f64, side: Side) -> Result<f64> {
        self.value(t, x, k, Some(side))
    }

    /// Residuals of the interface conditions at `x = 0` for the pair `(k, -k)`:
    /// outgoing = reflected incoming + transmitted incoming + production.
    pub fn boundary_residual(&self, t: f64, k: f64) -> Result<f64> {
        if !(k > 0.0 && k < 0.5) || !(t > 0.0) {
            return Err(Error::param("k/t", "need 0 < k < 1/2 and t > 0"));
        }
        let c = self.coefficients(k)?;
        let tt = self.temperature;
        let w = |k: f64, side: Side| self.limit_wigner_side(t, 0.0, k, side);
        let r_plus = w(k, Side::Right)?
            - c.p_minus * w(-k, Side::Right)?
            - c.p_plus * w(k, Side::Left)?
            - c.absorb * tt;
        let r_minus = w(-k, Side::Left)?
            - c.p_minus * w(k, Side::Left)?
            - c.p_plus * w(-k, Side::Right)?
            - c.absorb * tt;
        Ok(r_plus.abs().max(r_minus.abs()))
    }

    /// `|d_t W + v d_x W|` by fourth-order central differences with step `h`.
    pub fn transport_residual(&self, t: f64, x: f64, k: f64, h: f64) -> Result<f64> {
        let v = self.disp.group_velocity(k);
        let d = |f: &dyn Fn(f64) -> Result<f64>, s: f64| -> Result<f64> {
            Ok((f(s - 2.0 * h)? - 8.0 * f(s - h)? + 8.0 * f(s + h)? - f(s + 2.0 * h)?) / (12.0 * h))
        };
        let dt = d(&|s| self.limit_wigner(s, x, k), t)?;
        let dx = d(&|s| self.limit_wigner(t, s, k), x)?;
        Ok((dt + v * dx).abs())
    }

    pub fn scale(&self) -> f64 {
        self.w0.scale().max(self.temperature)
    }

    /// Closed-form `w(lambda, eta, k) = int_0^inf e^{-lambda t} int e^{-2 pi i eta x} W dx dt`.
    pub fn laplace_fourier_limit(&self, lambda: f64, eta: f64, k: f64) -> Result<Complex64> {
        if !(lambda > 0.0) {
            return Err(Error::Domain(format!("lambda must be > 0, got {lambda}")));
        }
        let c = self.coefficients(k)?;
        let wp = self.disp.omega_prime(k);
        let v = wp.abs() / (2.0 * PI);
        let i = Complex64::i();
        let denom = lambda + i * wp * eta;
        let mut out = self.temperature * v * c.absorb / (lambda * denom);
        if matches!(self.w0, W0Profile::Zero) {
            return Ok(out);
        }
        out += self.w0.hat(eta, k)? / denom;
        let reach = self.eta_reach();
        let tol = Tolerance {
            abs: 1e-14,
            rel: 1e-11,
            max_intervals: 20_000,
        };
        let mut first = Ok(());
        let incoming = quadrature::integrate(
            |e| match self.w0.hat(e, k) {
                Ok(h) => h / (lambda + i * wp * e),
                Err(err) => {
                    first = Err(err);
                    Complex64::new(0.0, 0.0)
                }
            },
            -reach,
            reach,
            &[0.0],
            tol,
        )
        .value;
        first?;
        let mirrored = quadrature::integrate(
            |e| self.w0.hat(e, -k).unwrap_or_default() / (lambda - i * wp * e),
            -reach,
            reach,
            &[0.0],
            tol,
        )
        .value;
        out += v * (c.p_plus - 1.0) / denom * incoming + v * c.p_minus / denom * mirrored;
        Ok(out)
    }

    fn eta_reach(&self) -> f64 {
        match &self.w0 {
            W0Profile::Packets { packets } => packets
                .iter()
                .map(|p| 7.0 / (PI * p.sx))
                .fold(0.0, f64::max),
            _ => 0.0,
        }
    }

    /// The same transform computed by direct quadrature of [`limit_wigner`]:
    /// adaptive in `t` on `[0, 40/lambda]`, adaptive in `x` with breakpoints at
    /// every discontinuity and packet centre.
    pub fn laplace_fourier_numeric(&self, lambda: f64, eta: f64, k: f64) -> Result<Complex64> {
        if !(lambda > 0.0) {
            return Err(Error::Domain(format!("lambda must be > 0, got {lambda}")));
        }
        self.coefficients(k)?;
        let v = self.disp.group_velocity(k);
        let reach = self.w0.spatial_reach();
        let centers = self.w0.breakpoints();
        let tol = Tolerance {
            abs: 1e-10,
            rel: 1e-8,
            max_intervals: 20_000,
        };
        let t_max = 40.0 / lambda;
        let inner = |t: f64| -> Complex64 {
            let end = v * t;
            let lo = (-reach).min(end.min(0.0) - reach);
            let hi = reach.max(end.max(0.0) + reach);
            let mut bps = vec![0.0, end];
            for &c in &centers {
                bps.extend([c + end, end - c]);
            }
            let f = |x: f64| {
                let w = self.limit_wigner(t, x, k).unwrap_or(0.0);
                Complex64::from_polar(w, -2.0 * PI * eta * x)
            };
            quadrature::integrate(f, lo, hi, &bps, tol).value
        };
        let outer = quadrature::integrate(|t| inner(t) * (-lambda * t).exp(), 0.0, t_max, &[], tol);
        Ok(outer.value)
    }
}
