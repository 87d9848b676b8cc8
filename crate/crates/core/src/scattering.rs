//! Interface scattering at the thermostat.
//!
//! The boundary value `nu(k) = lim g~(eps - i omega(k))` is computed from a
//! principal-value formula and, independently, by extrapolating the resolvent
//! toward the imaginary axis. From it follow the reflection/transmission
//! amplitude `wp`, the absorption `g` and the transmission/reflection
//! probabilities `p_+`, `p_-`, which satisfy `p_+ + p_- + g = 1`.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::DispersionRelation;
use crate::error::{Error, Result};
use crate::memory::{MemoryKernel, Resolvent};
use crate::quadrature::{self, extrapolate_to_zero, Tolerance};

/// `|omega'|` below this (relative to `omega_max`) is treated as stationary.
pub const SINGULAR_THRESHOLD: f64 = 1e-6;
pub const IDENTITY_TOL: f64 = 1e-8;
pub const RE_NU_TOL: f64 = 1e-6;

fn pole_of(disp: &DispersionRelation, k: f64) -> Result<(f64, f64)> {
    let l0 = crate::dispersion::wrap_torus(k).abs();
    let wp = disp.omega_prime(l0).abs();
    let edge = l0.min(0.5 - l0);
    if edge < 1e-9 || wp < SINGULAR_THRESHOLD * disp.omega_max().max(1.0) {
        return Err(Error::SingularZone { k, omega_prime: wp });
    }
    Ok((l0, wp))
}

/// `nu(k)` from `1 / (1 + i gamma (G + H))` with
/// `G(u) = int_0^{1/2} dl / (u + omega(l))` and
/// `H(u) = PV int_0^{1/2} dl / (u - omega(l)) - i pi / |omega'(k)|`, `u = omega(k)`.
///
/// The principal value pairs `l0 + s` with `l0 - s` on a symmetric window, so
/// the integrand there is bounded.
pub fn nu_pv(disp: &DispersionRelation, gamma: f64, k: f64) -> Result<Complex64> {
    if gamma == 0.0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let (l0, wp) = pole_of(disp, k)?;
    let u = disp.omega(l0);
    let tol = Tolerance::default();

    let g = quadrature::integrate_real(|l| 1.0 / (u + disp.omega(l)), 0.0, 0.5, &[l0], tol);

    let h = 0.5 * l0.min(0.5 - l0);
    let f = |l: f64| 1.0 / disp.omega_difference(l0, l);
    let left = quadrature::integrate_real(f, 0.0, l0 - h, &[], tol);
    let right = quadrature::integrate_real(f, l0 + h, 0.5, &[], tol);
    let paired = quadrature::integrate_real(
        |s| {
            let (dp, dm) = (
                disp.omega_difference(l0, l0 + s),
                disp.omega_difference(l0, l0 - s),
            );
            (dp + dm) / (dp * dm)
        },
        0.0,
        h,
        &[],
        tol,
    );
    let pv = left + right + paired;
    let hval = Complex64::new(pv, -PI / wp);
    Ok(1.0 / (1.0 + Complex64::i() * gamma * (g + hval)))
}

impl Resolvent {
    /// `g~(eps - i omega(k))` for each `eps` in a strictly decreasing list,
    /// extrapolated polynomially to `eps = 0`.
    pub fn nu_laplace_limit(&self, k: f64, eps_list: &[f64]) -> Result<Complex64> {
        if eps_list.is_empty() {
            return Err(Error::param("eps_list", "must be non-empty"));
        }
        if eps_list.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::param("eps_list", "entries must be positive"));
        }
        if eps_list.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::param("eps_list", "must be strictly decreasing"));
        }
        let w = self.disp().omega(k);
        let values = eps_list
            .iter()
            .map(|&e| self.g_tilde(Complex64::new(e, -w)))
            .collect::<Result<Vec<_>>>()?;
        Ok(extrapolate_to_zero(eps_list, &values))
    }
}

/// Laplace-route oracle for [`nu_pv`].
pub fn nu_laplace_limit(mk: &MemoryKernel, k: f64, eps_list: &[f64]) -> Result<Complex64> {
    mk.resolvent().nu_laplace_limit(k, eps_list)
}

/// The four derived coefficients at one momentum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub nu: Complex64,
    pub wp: Complex64,
    pub absorb: f64,
    pub p_plus: f64,
    pub p_minus: f64,
}

impl Coefficients {
    pub fn identity_residual(&self) -> f64 {
        (self.p_plus + self.p_minus + self.absorb - 1.0).abs()
    }
}

/// `wp = pi gamma nu / |omega'|`, `g = 2 pi gamma |nu|^2 / |omega'|`,
/// `p_+ = |1 - wp|^2`, `p_- = |wp|^2`.
pub fn coefficients(
    disp: &DispersionRelation,
    gamma: f64,
    k: f64,
    nu: Complex64,
) -> Result<Coefficients> {
    let (_, wp_abs) = pole_of(disp, k)?;
    let wp = PI * gamma * nu / wp_abs;
    Ok(Coefficients {
        nu,
        wp,
        absorb: 2.0 * PI * gamma * nu.norm_sqr() / wp_abs,
        p_plus: (1.0 - wp).norm_sqr(),
        p_minus: wp.norm_sqr(),
    })
}

/// `nu_pv` followed by [`coefficients`].
pub fn evaluate(disp: &DispersionRelation, gamma: f64, k: f64) -> Result<Coefficients> {
    let nu = nu_pv(disp, gamma, k)?;
    coefficients(disp, gamma, k, nu)
}

/// `Re nu - (1 + pi gamma / |omega'|) |nu|^2`.
pub fn re_nu_residual(disp: &DispersionRelation, gamma: f64, k: f64, nu: Complex64) -> f64 {
    let wp = disp.omega_prime(k).abs();
    (nu.re - (1.0 + PI * gamma / wp) * nu.norm_sqr()).abs()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScatteringTable {
    pub gamma: f64,
    pub delta_excl: f64,
    pub k_grid: Vec<f64>,
    pub rows: Vec<Coefficients>,
    pub max_identity_residual: f64,
    pub max_re_nu_residual: f64,
}

/// Tabulates the coefficients on the uniform grid `-1/2 + j/n_k` minus the
/// exclusion zone, checking the three exact identities at every point.
pub fn build_table(
    disp: &DispersionRelation,
    gamma: f64,
    n_k: usize,
    delta_excl: f64,
) -> Result<ScatteringTable> {
    if n_k < 64 {
        return Err(Error::param("n_k", format!("must be >= 64, got {n_k}")));
    }
    if !(delta_excl > 0.0 && delta_excl < 0.25) {
        return Err(Error::param(
            "delta_excl",
            format!("must lie in (0, 1/4), got {delta_excl}"),
        ));
    }
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::param("gamma", format!("must be finite and >= 0, got {gamma}")));
    }
    let k_grid: Vec<f64> = disp
        .grid(n_k)
        .into_iter()
        .filter(|&k| !disp.in_exclusion_zone(k, delta_excl))
        .collect();
    let rows = k_grid
        .par_iter()
        .map(|&k| evaluate(disp, gamma, k))
        .collect::<Result<Vec<_>>>()?;

    let mut max_identity_residual: f64 = 0.0;
    let mut max_re_nu_residual: f64 = 0.0;
    for (&k, c) in k_grid.iter().zip(&rows) {
        let id = c.identity_residual();
        if id > IDENTITY_TOL {
            return Err(Error::Invariant {
                name: "p_plus + p_minus + absorb = 1",
                k,
                residual: id,
            });
        }
        if !(c.absorb >= 0.0 && c.absorb <= 1.0) {
            return Err(Error::Invariant {
                name: "0 <= absorb <= 1",
                k,
                residual: c.absorb,
            });
        }
        let re = re_nu_residual(disp, gamma, k, c.nu);
        if re > RE_NU_TOL {
            return Err(Error::Invariant {
                name: "Re nu = (1 + pi gamma / |omega'|) |nu|^2",
                k,
                residual: re,
            });
        }
        max_identity_residual = max_identity_residual.max(id);
        max_re_nu_residual = max_re_nu_residual.max(re);
    }
    Ok(ScatteringTable {
        gamma,
        delta_excl,
        k_grid,
        rows,
        max_identity_residual,
        max_re_nu_residual,
    })
}

impl ScatteringTable {
    pub fn len(&self) -> usize {
        self.k_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k_grid.is_empty()
    }

    /// CSV with columns `k,re_nu,im_nu,absorb,p_plus,p_minus,identity_residual`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "k,re_nu,im_nu,absorb,p_plus,p_minus,identity_residual")?;
        for (k, c) in self.k_grid.iter().zip(&self.rows) {
            writeln!(
                out,
                "{k:.10},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.3e}",
                c.nu.re,
                c.nu.im,
                c.absorb,
                c.p_plus,
                c.p_minus,
                c.identity_residual()
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::{CouplingKernel, KernelPreset};
    use crate::memory::MemoryKernelConfig;

    fn unpinned() -> DispersionRelation {
        DispersionRelation::from_preset(KernelPreset::NnUnpinned).unwrap()
    }

    fn pinned() -> DispersionRelation {
        DispersionRelation::from_preset(KernelPreset::NnPinned { mass: 1.0 }).unwrap()
    }

    // For the unpinned nearest-neighbour chain J~(lambda) = 1/sqrt(lambda^2 + 4);
    // continued to lambda = -i omega(k) this gives nu = 2 cos(pi k) / (2 cos(pi k) + gamma).
    fn nu_closed(k: f64, gamma: f64) -> f64 {
        let c = 2.0 * (PI * k).cos().abs();
        c / (c + gamma)
    }

    #[test]
    fn free_thermostat_is_transparent() {
        let d = pinned();
        assert_eq!(nu_pv(&d, 0.0, 0.3).unwrap(), Complex64::new(1.0, 0.0));
        let c = evaluate(&d, 0.0, 0.3).unwrap();
        assert_eq!((c.absorb, c.p_plus, c.p_minus), (0.0, 1.0, 0.0));
    }

    #[test]
    fn unpinned_quarter_values() {
        let d = unpinned();
        let c = evaluate(&d, 1.0, 0.25).unwrap();
        assert!((c.nu.re - 0.585_786_437_626_905).abs() < 1e-9);
        assert!(c.nu.im.abs() < 1e-9);
        assert!((c.wp.re - 0.414_213_562_373_095).abs() < 1e-9);
        assert!((c.absorb - 0.485_281_374_238_570).abs() < 1e-9);
        assert!((c.p_plus - 0.343_145_750_507_619).abs() < 1e-9);
        assert!((c.p_minus - 0.171_572_875_253_810).abs() < 1e-9);
    }

    #[test]
    fn unpinned_matches_closed_form() {
        let d = unpinned();
        for &gamma in &[0.3, 1.0, 4.0] {
            for &k in &[0.05, 0.13, 0.31, 0.44, -0.2] {
                let nu = nu_pv(&d, gamma, k).unwrap();
                assert!((nu - nu_closed(k, gamma)).norm() < 1e-9, "k={k} gamma={gamma} nu={nu}");
            }
        }
    }

    #[test]
    fn pv_agrees_with_laplace_limit() {
        for d in [unpinned(), pinned()] {
            let r = Resolvent::new(d.clone(), 1.0).unwrap();
            for &k in &[0.1, 0.25, 0.4] {
                let a = nu_pv(&d, 1.0, k).unwrap();
                let b = r.nu_laplace_limit(k, &[1e-2, 1e-3, 1e-4]).unwrap();
                assert!((a - b).norm() < 1e-3, "k={k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn laplace_limit_validates_eps() {
        let r = Resolvent::new(unpinned(), 1.0).unwrap();
        assert!(r.nu_laplace_limit(0.2, &[1e-3, 1e-2]).is_err());
        assert!(r.nu_laplace_limit(0.2, &[]).is_err());
        assert!(r.nu_laplace_limit(0.2, &[1e-2, 0.0]).is_err());
        let free = Resolvent::new(unpinned(), 0.0).unwrap();
        let v = free.nu_laplace_limit(0.2, &[1e-2, 1e-3]).unwrap();
        assert!((v - 1.0).norm() < 1e-15);
    }

    #[test]
    fn time_domain_route_matches() {
        // int_0^T e^{i omega tau} g(dtau) at T = 1000 against the extrapolated boundary value
        let d = pinned();
        let mk = MemoryKernel::new(d.clone(), 1.0, MemoryKernelConfig { dt: 0.05, horizon: 1000.0 }).unwrap();
        let k = 0.25;
        let tail = *mk.phi_tilde_series(k, mk.steps()).unwrap().last().unwrap();
        let lim = nu_laplace_limit(&mk, k, &[1e-2, 1e-3, 1e-4]).unwrap();
        assert!((tail - lim).norm() < 1e-2, "{tail} vs {lim}");
    }

    #[test]
    fn nu_vanishes_towards_stationary_point() {
        let d = pinned();
        let mut last = f64::INFINITY;
        for &k in &[0.4, 0.45, 0.48, 0.49, 0.495, 0.499] {
            let m = nu_pv(&d, 1.0, k).unwrap().norm();
            assert!(m < last);
            last = m;
        }
        assert!(last < 0.05);
        assert!(matches!(nu_pv(&d, 1.0, 0.5), Err(Error::SingularZone { .. })));
        assert!(matches!(nu_pv(&d, 1.0, 0.0), Err(Error::SingularZone { .. })));
    }

    #[test]
    fn strong_friction_scaling() {
        let d = pinned();
        let k = 0.3;
        let c = nu_pv(&d, 500.0, k).unwrap().norm() * 500.0;
        let big = nu_pv(&d, 1e3, k).unwrap().norm();
        assert!(big >= 0.5 * c / 1e3 && big <= 2.0 * c / 1e3);

        // next-nearest-neighbour coupling keeps G + PV away from zero, so
        // transmission survives as gamma grows
        let kernel = CouplingKernel::new(&[(0, 2.2), (1, -1.0), (-1, -1.0), (2, -0.1), (-2, -0.1)]).unwrap();
        let nnn = DispersionRelation::new(kernel);
        let rows: Vec<Coefficients> = [1e2, 1e3, 1e4].iter().map(|&g| evaluate(&nnn, g, k).unwrap()).collect();
        for w in rows.windows(2) {
            assert!(w[1].absorb <= 0.5 * w[0].absorb);
        }
        for c in &rows {
            assert!(c.p_minus > 0.05 && c.p_minus < 0.97, "{c:?}");
            assert!(c.p_plus > 0.03);
        }
    }

    #[test]
    fn nearest_neighbour_chains_reflect_totally_at_strong_friction() {
        // nu is real on the band for both presets, so wp -> 1
        for d in [unpinned(), pinned()] {
            let c = evaluate(&d, 1e4, 0.3).unwrap();
            assert!(c.nu.im.abs() < 1e-12);
            assert!(c.p_minus > 0.999 && c.p_plus < 1e-6);
        }
    }

    #[test]
    fn table_invariants_and_symmetry() {
        for d in [unpinned(), pinned()] {
            let t = build_table(&d, 1.0, 512, 0.02).unwrap();
            assert!(t.max_identity_residual < 1e-8);
            assert!(t.max_re_nu_residual < 1e-6);
            assert!(t.k_grid.iter().all(|&k| !d.in_exclusion_zone(k, 0.02)));
            for (i, &k) in t.k_grid.iter().enumerate() {
                if let Some(j) = t.k_grid.iter().position(|&q| (q + k).abs() < 1e-12) {
                    assert!((t.rows[i].nu - t.rows[j].nu).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn table_parameter_checks() {
        let d = unpinned();
        assert!(build_table(&d, 1.0, 32, 0.02).is_err());
        assert!(build_table(&d, 1.0, 128, 0.25).is_err());
        let t = build_table(&d, 0.0, 128, 0.02).unwrap();
        assert!(t.rows.iter().all(|c| c.p_plus == 1.0 && c.p_minus == 0.0 && c.absorb == 0.0));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let t = build_table(&unpinned(), 1.0, 64, 0.05).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("k,re_nu,im_nu,absorb,p_plus,p_minus,identity_residual\n"));
        assert_eq!(s.lines().count(), t.len() + 1);
    }
}
