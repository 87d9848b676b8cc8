//! Coupling kernels of the harmonic chain and the dispersion relation they
//! induce.
//!
//! A kernel is a finite, even set of coefficients `alpha_y`. Its symbol
//! `alpha_hat(k) = sum_y alpha_y exp(-2 pi i k y)` is a cosine polynomial on
//! the torus `[-1/2, 1/2]`, and the dispersion relation is
//! `omega(k) = sqrt(alpha_hat(k))`. All evaluators are exact closed forms of
//! the cosine sums; nothing is tabulated.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of points of the validation grid on `[0, 1/2]`.
pub const VALIDATION_GRID: usize = 10_000;
/// Tolerance of the kernel validation checks.
pub const VALIDATION_TOL: f64 = 1e-12;

/// Named kernels shipped with the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum KernelPreset {
    /// `alpha_0 = 2`, `alpha_{+-1} = -1`: acoustic, `omega(k) = 2|sin(pi k)|`.
    NnUnpinned,
    /// `alpha_0 = 2 + m^2`, `alpha_{+-1} = -1`: optical with gap `m`.
    NnPinned { mass: f64 },
}

impl KernelPreset {
    /// Parses `"nn_unpinned"` or `"nn_pinned(m)"`.
    pub fn parse(name: &str) -> Result<Self> {
        let name = name.trim();
        if name == "nn_unpinned" {
            return Ok(KernelPreset::NnUnpinned);
        }
        if let Some(rest) = name.strip_prefix("nn_pinned") {
            let inner = rest.trim().trim_start_matches('(').trim_end_matches(')');
            let mass = if inner.is_empty() {
                1.0
            } else {
                inner
                    .parse::<f64>()
                    .map_err(|e| Error::Kernel(format!("bad mass in `{name}`: {e}")))?
            };
            return Ok(KernelPreset::NnPinned { mass });
        }
        Err(Error::Kernel(format!("unknown kernel preset `{name}`")))
    }

    pub fn name(&self) -> String {
        match self {
            KernelPreset::NnUnpinned => "nn_unpinned".to_string(),
            KernelPreset::NnPinned { mass } => format!("nn_pinned({mass})"),
        }
    }

    pub fn kernel(&self) -> Result<CouplingKernel> {
        match *self {
            KernelPreset::NnUnpinned => CouplingKernel::new(&[(0, 2.0), (1, -1.0), (-1, -1.0)]),
            KernelPreset::NnPinned { mass } => {
                if !(mass > 0.0) {
                    return Err(Error::Kernel(format!("pinning mass must be positive, got {mass}")));
                }
                CouplingKernel::new(&[(0, 2.0 + mass * mass), (1, -1.0), (-1, -1.0)])
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DispersionKind {
    /// `alpha_hat(0) = 0`: unpinned chain, `omega` vanishes linearly at `k = 0`.
    Acoustic,
    /// `alpha_hat(0) > 0`: pinned chain with a spectral gap.
    Optical,
}

/// Real even coefficients `alpha_y` of the harmonic interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingKernel {
    /// `alpha_y` for `y = 0..=R`; negative offsets follow by evenness.
    half: Vec<f64>,
    decay_constant: f64,
}

impl CouplingKernel {
    /// Builds and validates a kernel from `(y, alpha_y)` pairs. Both `y` and
    /// `-y` may be listed; they must agree.
    pub fn new(pairs: &[(i64, f64)]) -> Result<Self> {
        let mut map: BTreeMap<i64, f64> = BTreeMap::new();
        for &(y, a) in pairs {
            if !a.is_finite() {
                return Err(Error::Kernel(format!("alpha_{y} is not finite")));
            }
            if map.insert(y, a).is_some() {
                return Err(Error::Kernel(format!("alpha_{y} listed twice")));
            }
        }
        let radius = map.keys().map(|y| y.unsigned_abs()).max().unwrap_or(0) as usize;
        let mut half = vec![0.0; radius + 1];
        for (&y, &a) in &map {
            let mirror = map.get(&-y).copied();
            match mirror {
                Some(b) if (a - b).abs() > VALIDATION_TOL * a.abs().max(1.0) => {
                    return Err(Error::Kernel(format!(
                        "not even: alpha_{y} = {a} but alpha_{} = {b}",
                        -y
                    )))
                }
                _ => half[y.unsigned_abs() as usize] = a,
            }
        }
        while half.len() > 1 && half[half.len() - 1] == 0.0 {
            half.pop();
        }
        let decay_constant = minimal_decay_constant(&half);
        let kernel = CouplingKernel {
            half,
            decay_constant,
        };
        kernel.validate()?;
        Ok(kernel)
    }

    /// Like [`CouplingKernel::new`] but checks the exponential-decay bound
    /// against a caller-supplied constant.
    pub fn with_decay_constant(pairs: &[(i64, f64)], decay_constant: f64) -> Result<Self> {
        let mut kernel = Self::new(pairs)?;
        for (y, &a) in kernel.half.iter().enumerate() {
            let bound = decay_constant * (-(y as f64) / decay_constant).exp();
            if a.abs() > bound * (1.0 + VALIDATION_TOL) {
                return Err(Error::Kernel(format!(
                    "|alpha_{y}| = {} exceeds C exp(-|y|/C) = {bound} for C = {decay_constant}",
                    a.abs()
                )));
            }
        }
        kernel.decay_constant = decay_constant;
        Ok(kernel)
    }

    pub fn radius(&self) -> usize {
        self.half.len() - 1
    }

    pub fn decay_constant(&self) -> f64 {
        self.decay_constant
    }

    /// `alpha_y` for any integer offset.
    pub fn coefficient(&self, y: i64) -> f64 {
        self.half
            .get(y.unsigned_abs() as usize)
            .copied()
            .unwrap_or(0.0)
    }

    /// `(y, alpha_y)` over the full symmetric support, `y` ascending.
    pub fn pairs(&self) -> Vec<(i64, f64)> {
        let r = self.radius() as i64;
        (-r..=r).map(|y| (y, self.coefficient(y))).collect()
    }

    /// Symbol `sum_y alpha_y exp(-2 pi i k y)`, computed as the full complex
    /// sum. The imaginary part cancels by evenness.
    pub fn hat_alpha(&self, k: f64) -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (y, a) in self.pairs() {
            acc += a * Complex64::from_polar(1.0, -2.0 * PI * k * y as f64);
        }
        debug_assert!(acc.im.abs() < VALIDATION_TOL * (1.0 + acc.re.abs()));
        acc.re
    }

    fn hat_alpha_cos(&self, k: f64) -> f64 {
        self.half
            .iter()
            .enumerate()
            .map(|(y, &a)| if y == 0 { a } else { 2.0 * a * (2.0 * PI * k * y as f64).cos() })
            .sum()
    }

    fn hat_alpha_prime(&self, k: f64) -> f64 {
        self.half
            .iter()
            .enumerate()
            .skip(1)
            .map(|(y, &a)| {
                let w = 2.0 * PI * y as f64;
                -2.0 * a * w * (w * k).sin()
            })
            .sum()
    }

    fn hat_alpha_second(&self, k: f64) -> f64 {
        self.half
            .iter()
            .enumerate()
            .skip(1)
            .map(|(y, &a)| {
                let w = 2.0 * PI * y as f64;
                -2.0 * a * w * w * (w * k).cos()
            })
            .sum()
    }

    /// `alpha_hat(k1) - alpha_hat(k2)` without cancellation:
    /// `-4 sum_{y>0} alpha_y sin(pi y (k1 + k2)) sin(pi y (k1 - k2))`.
    fn hat_alpha_difference(&self, k1: f64, k2: f64) -> f64 {
        self.half
            .iter()
            .enumerate()
            .skip(1)
            .map(|(y, &a)| {
                let y = y as f64;
                -4.0 * a * (PI * y * (k1 + k2)).sin() * (PI * y * (k1 - k2)).sin()
            })
            .sum()
    }

    /// For acoustic kernels `alpha_hat(k) = sin^2(pi k) alpha0(k)`; returns
    /// `(alpha0(k), alpha0'(k))` through Chebyshev polynomials of the second
    /// kind, `sin(pi k y) / sin(pi k) = U_{y-1}(cos pi k)`.
    fn acoustic_factor(&self, k: f64) -> (f64, f64) {
        let c = (PI * k).cos();
        let dc = -PI * (PI * k).sin();
        // U_{-1} = 0, U_0 = 1
        let (mut u_prev, mut u) = (0.0, 1.0);
        let (mut du_prev, mut du) = (0.0, 0.0);
        let mut value = 0.0;
        let mut slope = 0.0;
        for y in 1..self.half.len() {
            // u holds U_{y-1}(c)
            let a = self.half[y];
            value += -4.0 * a * u * u;
            slope += -8.0 * a * u * du * dc;
            let u_next = 2.0 * c * u - u_prev;
            let du_next = 2.0 * u + 2.0 * c * du - du_prev;
            u_prev = u;
            u = u_next;
            du_prev = du;
            du = du_next;
        }
        (value, slope)
    }

    fn is_acoustic(&self) -> bool {
        self.hat_alpha_cos(0.0).abs() <= VALIDATION_TOL * self.scale()
    }

    fn scale(&self) -> f64 {
        self.half.iter().map(|a| a.abs()).sum::<f64>().max(1.0)
    }

    fn validate(&self) -> Result<()> {
        let scale = self.scale();
        let at_zero = self.hat_alpha_cos(0.0);
        if at_zero < -VALIDATION_TOL * scale {
            return Err(Error::Kernel(format!("alpha_hat(0) = {at_zero} < 0")));
        }
        let acoustic = self.is_acoustic();
        if acoustic && self.hat_alpha_second(0.0) <= 0.0 {
            return Err(Error::Kernel(
                "alpha_hat(0) = 0 requires alpha_hat''(0) > 0".to_string(),
            ));
        }
        for i in 1..=VALIDATION_GRID {
            let k = 0.5 * i as f64 / VALIDATION_GRID as f64;
            let v = if acoustic {
                self.acoustic_factor(k).0
            } else {
                self.hat_alpha_cos(k)
            };
            if v <= 0.0 {
                return Err(Error::Kernel(format!("alpha_hat not positive at k = {k}")));
            }
        }
        // monotonicity of omega on [0, 1/2]
        let mut prev = self.hat_alpha_cos(0.0);
        for i in 1..=VALIDATION_GRID {
            let k = 0.5 * i as f64 / VALIDATION_GRID as f64;
            let v = self.hat_alpha_cos(k);
            if v < prev - VALIDATION_TOL * scale {
                return Err(Error::Kernel(format!(
                    "omega is not increasing on [0, 1/2] (drops at k = {k})"
                )));
            }
            prev = v;
        }
        Ok(())
    }
}

fn minimal_decay_constant(half: &[f64]) -> f64 {
    let fits = |c: f64| {
        half.iter()
            .enumerate()
            .all(|(y, a)| a.abs() <= c * (-(y as f64) / c).exp())
    };
    let mut hi = 1.0;
    while !fits(hi) {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid > 0.0 && fits(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Maps any real `k` onto the torus `[-1/2, 1/2)`.
pub fn wrap_torus(k: f64) -> f64 {
    let w = k - k.round();
    if w >= 0.5 {
        w - 1.0
    } else {
        w
    }
}

/// Distance on the unit torus.
pub fn torus_distance(a: f64, b: f64) -> f64 {
    wrap_torus(a - b).abs()
}

/// Dispersion relation `omega(k) = sqrt(alpha_hat(k))` of a validated kernel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DispersionRelation {
    kernel: CouplingKernel,
    kind: DispersionKind,
    omega_min: f64,
    omega_max: f64,
}

impl DispersionRelation {
    pub fn new(kernel: CouplingKernel) -> Self {
        let kind = if kernel.is_acoustic() {
            DispersionKind::Acoustic
        } else {
            DispersionKind::Optical
        };
        let mut disp = DispersionRelation {
            kernel,
            kind,
            omega_min: 0.0,
            omega_max: 0.0,
        };
        disp.omega_min = disp.omega(0.0);
        disp.omega_max = disp.omega(0.5);
        disp
    }

    pub fn from_preset(preset: KernelPreset) -> Result<Self> {
        Ok(Self::new(preset.kernel()?))
    }

    pub fn kernel(&self) -> &CouplingKernel {
        &self.kernel
    }

    pub fn kind(&self) -> DispersionKind {
        self.kind
    }

    pub fn omega_min(&self) -> f64 {
        self.omega_min
    }

    pub fn omega_max(&self) -> f64 {
        self.omega_max
    }

    pub fn hat_alpha(&self, k: f64) -> f64 {
        self.kernel.hat_alpha(k)
    }

    pub fn omega(&self, k: f64) -> f64 {
        let k = wrap_torus(k);
        match self.kind {
            DispersionKind::Acoustic => (PI * k).sin().abs() * self.kernel.acoustic_factor(k).0.sqrt(),
            DispersionKind::Optical => self.kernel.hat_alpha_cos(k).max(0.0).sqrt(),
        }
    }

    /// Analytic derivative of `omega`. Returns the one-sided (right) limit at
    /// `k = 0` in the acoustic case and exactly 0 at `k = +-1/2`.
    pub fn omega_prime(&self, k: f64) -> f64 {
        let k = wrap_torus(k);
        if k.abs() == 0.5 {
            return 0.0;
        }
        match self.kind {
            DispersionKind::Optical => {
                let w = self.omega(k);
                if w == 0.0 {
                    0.0
                } else {
                    self.kernel.hat_alpha_prime(k) / (2.0 * w)
                }
            }
            DispersionKind::Acoustic => {
                let (a0, a0p) = self.kernel.acoustic_factor(k);
                let root = a0.sqrt();
                let sign = if k < 0.0 { -1.0 } else { 1.0 };
                let s = (PI * k).sin().abs();
                sign * PI * (PI * k).cos() * root + s * a0p / (2.0 * root)
            }
        }
    }

    /// Group velocity `omega'(k) / (2 pi)`.
    pub fn group_velocity(&self, k: f64) -> f64 {
        self.omega_prime(k) / (2.0 * PI)
    }

    /// `omega(k1) - omega(k2)` computed without subtractive cancellation.
    pub fn omega_difference(&self, k1: f64, k2: f64) -> f64 {
        let (w1, w2) = (self.omega(k1), self.omega(k2));
        let sum = w1 + w2;
        if sum == 0.0 {
            return 0.0;
        }
        self.kernel.hat_alpha_difference(wrap_torus(k1), wrap_torus(k2)) / sum
    }

    /// Positive inverse branch `omega_+ : [omega_min, omega_max] -> [0, 1/2]`.
    /// The negative branch is `-inverse_branch(w)`.
    pub fn inverse_branch(&self, w: f64) -> Result<f64> {
        let tol = 1e-14 * self.omega_max.max(1.0);
        if !(w >= self.omega_min - tol && w <= self.omega_max + tol) {
            return Err(Error::Domain(format!(
                "frequency {w} outside the band [{}, {}]",
                self.omega_min, self.omega_max
            )));
        }
        if w <= self.omega_min {
            return Ok(0.0);
        }
        if w >= self.omega_max {
            return Ok(0.5);
        }
        let (mut lo, mut hi) = (0.0, 0.5);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.omega(mid) < w {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut k = 0.5 * (lo + hi);
        // Newton polish inside the bracket
        for _ in 0..3 {
            let d = self.omega_prime(k);
            if d <= 0.0 {
                break;
            }
            let next = k - (self.omega(k) - w) / d;
            if next > lo && next < hi {
                k = next;
            }
        }
        Ok(k)
    }

    /// Points where `omega'` vanishes: `{0, 1/2}` for optical kernels and
    /// `{1/2}` for acoustic ones (where `omega'(0+)` is finite and nonzero).
    pub fn stationary_set(&self) -> Vec<f64> {
        match self.kind {
            DispersionKind::Optical => vec![0.0, 0.5],
            DispersionKind::Acoustic => vec![0.5],
        }
    }

    /// Band-edge momenta `{0, 1/2}` around which scattering coefficients are
    /// excluded. This contains the stationary set for both kinds.
    pub fn band_edges(&self) -> [f64; 2] {
        [0.0, 0.5]
    }

    /// True when `k` lies within `delta` of a band edge.
    pub fn in_exclusion_zone(&self, k: f64, delta: f64) -> bool {
        self.band_edges()
            .iter()
            .any(|&e| torus_distance(k, e) < delta)
    }

    /// Uniform samples `k_j = -1/2 + j/n`, `j = 0..n`.
    pub fn grid(&self, n: usize) -> Vec<f64> {
        (0..n).map(|j| -0.5 + j as f64 / n as f64).collect()
    }
}
