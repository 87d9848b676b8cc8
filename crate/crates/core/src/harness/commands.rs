//! The six experiment commands. Each returns a [`RunReport`] holding its
//! checks and output artifacts; nothing touches the filesystem here.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::time::Instant;

use num_complex::Complex64;

use super::config::{ConfigError, ExperimentConfig, ExperimentKind};
use super::report::{Artifact, Check, Comparison, Provenance, RunReport};
use crate::dispersion::DispersionRelation;
use crate::dynamics::snapshot::{encode_snapshots, SnapshotMeta};
use crate::dynamics::{psi_spectral_mild, simulate, Chain, NoisePath, Stepper, ThermostatParams};
use crate::error::Error;
use crate::memory::{self, MemoryKernel, MemoryKernelConfig, Resolvent};
use crate::scattering::{self, build_table};
use crate::wigner::experiments::{
    errors_non_increasing, EnergySetup, EquilibriumSetup, ProductionSetup, ScatteringSetup, ThermalLaplaceSetup,
};
use crate::wigner::{LimitSolution, W0Profile, WignerEstimate};

pub const RNG_DESCRIPTION: &str =
    "ChaCha8 per path, seed = base seed + path index; initial data on stream 1, noise on stream 0";

/// Tolerances of the exact checks.
pub const PV_LAPLACE_TOL: f64 = 1e-3;
pub const J_ORACLE_TOL: f64 = 1e-8;
pub const J_LAPLACE_TOL: f64 = 1e-10;
pub const GSTAR_TOL: f64 = 1e-6;
pub const CROSS_CONTRACTION: f64 = 1.8;
pub const BOUNDARY_TOL: f64 = 1e-12;
pub const TRANSPORT_TOL: f64 = 1e-6;
pub const TRANSFORM_TOL: f64 = 1e-3;
pub const MONOTONE_SLACK: f64 = 0.2;

#[derive(Debug)]
pub enum HarnessError {
    /// Exit code 2.
    Config(ConfigError),
    /// Exit code 1.
    Failure(Error),
}

impl std::fmt::Display for HarnessError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HarnessError::Config(e) => e.fmt(f),
            HarnessError::Failure(e) => write!(f, "run failed: {e}"),
        }
    }
}

impl std::error::Error for HarnessError {}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Failure(_) => 1,
        }
    }
}

impl From<ConfigError> for HarnessError {
    fn from(e: ConfigError) -> Self {
        HarnessError::Config(e)
    }
}

impl From<Error> for HarnessError {
    fn from(e: Error) -> Self {
        match e {
            Error::Parameter { name, reason } => HarnessError::Config(ConfigError {
                key: name.to_string(),
                reason,
            }),
            Error::Kernel(reason) => HarnessError::Config(ConfigError {
                key: "kernel".into(),
                reason,
            }),
            other => HarnessError::Failure(other),
        }
    }
}

impl From<std::fmt::Error> for HarnessError {
    fn from(e: std::fmt::Error) -> Self {
        HarnessError::Failure(Error::Io(std::io::Error::other(e)))
    }
}

type Res<T> = std::result::Result<T, HarnessError>;

/// Accumulates checks, warnings and artifacts while a command runs.
struct Run {
    checks: Vec<Check>,
    warnings: Vec<String>,
    artifacts: Vec<Artifact>,
    invalid_run: Option<String>,
    notes: Vec<String>,
}

impl Run {
    fn new() -> Self {
        Run {
            checks: Vec::new(),
            warnings: Vec::new(),
            artifacts: Vec::new(),
            invalid_run: None,
            notes: Vec::new(),
        }
    }

    fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    fn file(&mut self, name: &str, text: String) {
        self.artifacts.push(Artifact::text(name, text));
    }

    /// Records an invalid run; other errors propagate.
    fn guard<T>(&mut self, r: crate::Result<T>) -> Res<Option<T>> {
        match r {
            Ok(v) => Ok(Some(v)),
            Err(Error::InvalidRun(msg)) => {
                self.invalid_run = Some(msg);
                Ok(None)
            }
            Err(e) => Err(e.into()),
        }
    }
}

/// Runs the experiment selected by `cfg.experiment` on the current rayon pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Res<RunReport> {
    cfg.validate()?;
    let start = Instant::now();
    let disp = cfg.dispersion()?;
    let mut run = Run::new();
    match cfg.experiment {
        ExperimentKind::Coefficients => coefficients(cfg, &disp, &mut run)?,
        ExperimentKind::Scattering => scattering_sweep(cfg, &disp, &mut run)?,
        ExperimentKind::Production => production(cfg, &disp, &mut run)?,
        ExperimentKind::Equilibrium => equilibrium(cfg, &disp, &mut run)?,
        ExperimentKind::Convergence => convergence(cfg, &disp, &mut run)?,
        ExperimentKind::TransportCheck => transport_check(cfg, &disp, &mut run)?,
    }
    Ok(RunReport {
        experiment: cfg.experiment.name().to_string(),
        checks: run.checks,
        invalid_run: run.invalid_run,
        warnings: run.warnings,
        notes: run.notes,
        config: serde_json::to_value(cfg).map_err(Error::from)?,
        provenance: Provenance {
            seed: cfg.ensemble.seed,
            rng: RNG_DESCRIPTION.into(),
            threads: rayon::current_num_threads(),
            crate_version: env!("CARGO_PKG_VERSION").into(),
        },
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        artifacts: run.artifacts,
    })
}

fn csv<F>(f: F) -> Res<String>
where
    F: FnOnce(&mut Vec<u8>) -> crate::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(String::from_utf8(buf).expect("CSV writers emit ASCII"))
}

fn plot_script(title: &str, file: &str, xlabel: &str, ylabel: &str, series: &[(usize, usize, &str)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set title '{title}'");
    let _ = writeln!(s, "set xlabel '{xlabel}'");
    let _ = writeln!(s, "set ylabel '{ylabel}'");
    let parts: Vec<String> = series
        .iter()
        .map(|(x, y, style)| format!("'{file}' using {x}:{y} with {style}"))
        .collect();
    let _ = writeln!(s, "plot {}", parts.join(", \\\n     "));
    s
}

// ---------------------------------------------------------------------------

fn coefficients(cfg: &ExperimentConfig, disp: &DispersionRelation, run: &mut Run) -> Res<()> {
    let table = match build_table(disp, cfg.gamma, cfg.k_grid, cfg.delta_excl) {
        Ok(t) => t,
        Err(Error::Invariant { name, k, residual }) => {
            run.check(Check::at_most(format!("invariant `{name}` at k = {k}"), residual, 0.0));
            return Ok(());
        }
        Err(e) => return Err(e.into()),
    };
    run.check(Check::at_most(
        "max |p+ + p- + g - 1|",
        table.max_identity_residual,
        scattering::IDENTITY_TOL,
    ));
    let g_min = table.rows.iter().map(|c| c.absorb).fold(f64::INFINITY, f64::min);
    let g_max = table.rows.iter().map(|c| c.absorb).fold(0.0, f64::max);
    run.check(Check::at_least("min g", g_min, 0.0));
    run.check(Check::at_most("max g", g_max, 1.0));
    run.check(Check::at_most(
        "max |Re nu - (1 + pi gamma / |omega'|) |nu|^2|",
        table.max_re_nu_residual,
        scattering::RE_NU_TOL,
    ));
    let res = Resolvent::new(disp.clone(), cfg.gamma)?;
    let mut worst: f64 = 0.0;
    for k in [0.1, 0.2, 0.25, 0.3, 0.4, -0.3] {
        if disp.in_exclusion_zone(k, cfg.delta_excl) {
            continue;
        }
        let a = scattering::nu_pv(disp, cfg.gamma, k)?;
        let b = res.nu_laplace_limit(k, &[1e-2, 1e-3, 1e-4])?;
        worst = worst.max((a - b).norm());
    }
    run.check(Check::at_most(
        "max |nu (principal value) - nu (Laplace limit)|",
        worst,
        PV_LAPLACE_TOL,
    ));
    run.file("coefficients.csv", csv(|b| table.write_csv(b))?);
    run.file(
        "plot.gp",
        plot_script(
            &format!("scattering coefficients, gamma = {}", cfg.gamma),
            "coefficients.csv",
            "k",
            "fraction",
            &[(1, 4, "lines"), (1, 5, "lines"), (1, 6, "lines")],
        ),
    );
    Ok(())
}

// ---------------------------------------------------------------------------

fn scattering_sweep(cfg: &ExperimentConfig, disp: &DispersionRelation, run: &mut Run) -> Res<()> {
    let v = disp.group_velocity(cfg.packet.k_center);
    let setup = ScatteringSetup {
        gamma: cfg.gamma,
        x_center: cfg.packet.x_center,
        k_center: cfg.packet.k_center,
        envelope: cfg.packet.envelope,
        window_halfwidth: cfg.window_halfwidth,
        dt: cfg.dt,
        t_macro: cfg.t_macro.unwrap_or(0.45 / v),
    };
    let sizes = cfg.lattice_sizes();
    let mut table = String::from("n,steps,e_trans,e_refl,e_absorbed,p_plus,p_minus,g,max_error,guard,central\n");
    let mut errors = Vec::new();
    for (i, &n) in sizes.iter().enumerate() {
        let last = i + 1 == sizes.len();
        let snaps = if cfg.snapshots { 5 } else { 0 };
        let Some(rec) = run.guard(setup.run_recorded(disp, n, snaps))? else {
            return Ok(());
        };
        let o = &rec.outcome;
        writeln!(
            table,
            "{},{},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.4e},{:.4e},{:.4e}",
            n,
            o.steps,
            o.e_trans,
            o.e_refl,
            o.e_absorbed,
            o.expected[0],
            o.expected[1],
            o.expected[2],
            o.max_error(),
            o.guard_energy,
            o.central_residual
        )?;
        run.check(Check::at_most(format!("n = {n}: max fraction error"), o.max_error(), cfg.tolerance));
        errors.push(o.max_error());
        if cfg.snapshots {
            let times: Vec<f64> = rec.snapshot_steps.iter().map(|&s| s as f64 * cfg.dt).collect();
            let meta = SnapshotMeta::new(n, cfg.dt, times, cfg.ensemble.seed, cfg.kernel.label());
            let (bytes, side) = encode_snapshots(&rec.snapshots, &meta)?;
            run.artifacts.push(Artifact {
                name: format!("snapshots/scattering_n{n}.bin"),
                bytes,
            });
            run.file(&format!("snapshots/scattering_n{n}.json"), side);
        }
        if last {
            let chain = Chain::new(disp.clone(), n)?;
            let psi = chain.wave_field(&rec.final_state);
            let eps = 1.0 / n as f64;
            let mut prof = String::from("x,energy_density\n");
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by_key(|&i| chain.site(i));
            for i in idx {
                writeln!(prof, "{:.8},{:.10e}", eps * chain.site(i) as f64, psi[i].norm_sqr())?;
            }
            run.file("profile.csv", prof);
        }
    }
    if errors.len() > 1 {
        run.check(Check::flag(
            format!("errors non-increasing in n (slack {MONOTONE_SLACK})"),
            errors_non_increasing(&errors, MONOTONE_SLACK),
        ));
    }
    run.file("scattering.csv", table);
    run.file(
        "plot.gp",
        plot_script(
            "final energy density",
            "profile.csv",
            "x",
            "|psi|^2",
            &[(1, 2, "lines")],
        ),
    );
    Ok(())
}

// ---------------------------------------------------------------------------

/// `W^(t, eta, k)` of the limit for zero initial data: `g T` on the segment
/// between `0` and `v t`.
pub fn production_limit_hat(g: f64, temperature: f64, v: f64, t: f64, eta: f64) -> Complex64 {
    if eta == 0.0 {
        return Complex64::new(g * temperature * v.abs() * t, 0.0);
    }
    let z = Complex64::new(0.0, 2.0 * PI * eta);
    let val = (1.0 - (-z * v * t).exp()) / z;
    g * temperature * v.signum() * val
}

fn wigner_with_limit(est: &WignerEstimate, disp: &DispersionRelation, cfg: &ExperimentConfig, t: f64) -> Res<String> {
    let mut s = String::from("eta,k,re,im,stderr,limit_re,limit_im\n");
    let mut cols: Vec<usize> = (0..est.n).collect();
    cols.sort_by(|&a, &b| est.k(a).total_cmp(&est.k(b)));
    let mut order: Vec<usize> = (0..est.eta.len()).collect();
    order.sort_by(|&a, &b| est.eta[a].total_cmp(&est.eta[b]));
    let mut limits = Vec::with_capacity(est.n);
    for &j in &cols {
        let k = est.k(j);
        if disp.in_exclusion_zone(k, cfg.delta_excl) {
            limits.push(None);
        } else {
            let g = scattering::evaluate(disp, cfg.gamma, k)?.absorb;
            limits.push(Some((g, disp.group_velocity(k))));
        }
    }
    for r in order {
        let eta = est.eta[r];
        for (c, &j) in cols.iter().enumerate() {
            let w = est.values[r][j];
            let lim = match limits[c] {
                Some((g, v)) => {
                    let l = production_limit_hat(g, cfg.temperature, v, t, eta);
                    format!("{:.12e},{:.12e}", l.re, l.im)
                }
                None => "nan,nan".to_string(),
            };
            writeln!(
                s,
                "{},{:.10},{:.12e},{:.12e},{:.6e},{}",
                eta,
                est.k(j),
                w.re,
                w.im,
                est.stderr[r][j],
                lim
            )?;
        }
    }
    Ok(s)
}

fn production(cfg: &ExperimentConfig, disp: &DispersionRelation, run: &mut Run) -> Res<()> {
    let p = &cfg.production;
    let setup = ProductionSetup {
        gamma: cfg.gamma,
        temperature: cfg.temperature,
        n: cfg.n,
        dt: cfg.dt,
        t_macro: cfg.t_macro.unwrap_or(0.3),
        k_lo: p.k_lo,
        k_hi: p.k_hi,
        bins: p.bins,
        paths: cfg.ensemble.paths,
        seed: cfg.ensemble.seed,
    };
    let etas: Vec<f64> = (0..p.wigner_rows).map(|m| 2.0 * m as f64).collect();
    let Some((profile, est)) = run.guard(setup.run_with_wigner(disp, &etas))? else {
        return Ok(());
    };
    for b in &profile.bins {
        let name = format!("k in [{:.3}, {:.3}]", b.k_lo, b.k_hi);
        if cfg.temperature == 0.0 {
            run.check(Check::new(format!("plateau on {name}"), b.plateau, 0.0, 0.0, Comparison::Within));
            continue;
        }
        run.check(Check::new(
            format!("plateau / (g T) on {name}"),
            b.ratio,
            1.0,
            p.tolerance,
            Comparison::Within,
        ));
        if b.target > 0.0 && 3.0 * b.stderr / b.target > p.tolerance {
            run.warnings.push(format!(
                "{name}: 3 standard errors ({:.3}) exceed the tolerance {}; increase ensemble.paths",
                3.0 * b.stderr / b.target,
                p.tolerance
            ));
        }
    }
    if profile.half_ensemble_stderr_ratio.is_finite() {
        run.notes.push(format!(
            "standard error from half the paths / from all paths: {:.3} (sqrt 2 = 1.414)",
            profile.half_ensemble_stderr_ratio
        ));
    }
    run.check(Check::at_most(
        "max |complement| / max plateau",
        profile.complement_ratio(),
        p.complement_tolerance,
    ));
    run.file("production.csv", csv(|b| profile.write_csv(b))?);
    if !etas.is_empty() {
        run.file("wigner.csv", wigner_with_limit(&est, disp, cfg, setup.t_macro)?);
    }
    if let Some(l) = &p.laplace {
        let ls = ThermalLaplaceSetup {
            gamma: cfg.gamma,
            temperature: cfg.temperature,
            eps: l.eps,
            n: l.n,
            dt: l.dt,
            lambda: l.lambda,
            etas: l.etas.clone(),
            k_center: l.k_center,
            half_bin: l.half_bin,
            t_end: l.t_end,
            sample_dt: l.sample_dt,
            paths: l.paths,
            seed: cfg.ensemble.seed,
        };
        let Some(entries) = run.guard(ls.run(disp))? else {
            return Ok(());
        };
        let mut s = String::from("eta,estimate_re,estimate_im,stderr,target_re,target_im,rel_error\n");
        for e in &entries {
            writeln!(
                s,
                "{},{:.10e},{:.10e},{:.4e},{:.10e},{:.10e},{:.6e}",
                e.eta, e.estimate.re, e.estimate.im, e.stderr, e.target.re, e.target.im, e.rel_error
            )?;
            run.check(Check::at_most(
                format!("thermal Laplace transform at eta = {}: relative error", e.eta),
                e.rel_error,
                l.tolerance,
            ));
        }
        run.file("laplace.csv", s);
    }
    run.file(
        "plot.gp",
        plot_script(
            "thermal production plateau",
            "production.csv",
            "k_lo",
            "W",
            &[(1, 3, "linespoints"), (1, 5, "lines")],
        ),
    );
    Ok(())
}

// ---------------------------------------------------------------------------

fn equilibrium(cfg: &ExperimentConfig, disp: &DispersionRelation, run: &mut Run) -> Res<()> {
    let e = &cfg.equilibrium;
    let setup = EquilibriumSetup {
        gamma: cfg.gamma,
        temperature: cfg.temperature,
        n: cfg.n,
        dt: cfg.dt,
        t_micro: e.t_micro,
        records: e.records,
        bins: e.bins,
        paths: cfg.ensemble.paths,
        seed: cfg.ensemble.seed,
    };
    let Some(rep) = run.guard(setup.run(disp))? else {
        return Ok(());
    };
    run.check(Check::at_most("max |mean - T| / stderr over bins and times", rep.max_z, e.sigmas));
    run.file("equilibrium.csv", csv(|b| rep.write_csv(b))?);
    run.file(
        "plot.gp",
        plot_script(
            "binned W(eta = 0, k) over time",
            "equilibrium.csv",
            "k",
            "W",
            &[(2, 3, "points")],
        ),
    );
    Ok(())
}

// ---------------------------------------------------------------------------

/// `J_0(x)` by Miller's backward recurrence normalized with
/// `J_0 + 2 sum J_{2m} = 1`.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x == 0.0 {
        return 1.0;
    }
    if x < 1e-4 {
        return 1.0 - x * x / 4.0;
    }
    let mut top = (x + 30.0 + 6.0 * x.sqrt()) as usize;
    top += top % 2;
    let (mut next, mut cur) = (0.0f64, 1e-300f64);
    let mut norm = 0.0;
    let mut j0 = 0.0;
    for k in (1..=top).rev() {
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        // cur now holds J_{k-1}
        if (k - 1) % 2 == 0 && k - 1 > 0 {
            norm += 2.0 * cur;
        }
        if k == 1 {
            j0 = cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            j0 *= 1e-250;
        }
    }
    j0 / (norm + j0)
}

/// Gaussian probe for the mild-versus-direct comparison, in lattice units:
/// centre 12 sites left of the thermostat, width 4 sites, carrier 0.2.
const PROBE: (f64, f64, f64) = (-12.0, 4.0, 0.2);

fn convergence(cfg: &ExperimentConfig, disp: &DispersionRelation, run: &mut Run) -> Res<()> {
    let c = &cfg.convergence;

    // memory kernel against its closed form (unpinned chain only)
    if cfg.kernel.is_unpinned_nn() {
        let mut s = String::from("t,j,j_oracle,abs_error\n");
        let mut worst: f64 = 0.0;
        let pts = (c.j_t_max / 0.25).round() as usize;
        for i in 0..=pts {
            let t = i as f64 * 0.25;
            let j = memory::j_eval(disp, t)?;
            let o = bessel_j0(2.0 * t);
            worst = worst.max((j - o).abs());
            writeln!(s, "{t},{j:.15e},{o:.15e},{:.3e}", (j - o).abs())?;
        }
        run.check(Check::at_most(
            format!("max |J(t) - J_0(2t)| on [0, {}]", c.j_t_max),
            worst,
            J_ORACLE_TOL,
        ));
        let lap = memory::j_laplace(disp, Complex64::new(1.0, 0.0))?;
        run.check(Check::at_most(
            "|J~(1) - 1/sqrt(5)|",
            (lap - 1.0 / 5f64.sqrt()).norm(),
            J_LAPLACE_TOL,
        ));
        run.file("j_oracle.csv", s);
    } else {
        run.warnings.push(format!(
            "kernel `{}` has no closed-form memory kernel; J oracle checks skipped",
            cfg.kernel.label()
        ));
    }

    // resolvent series against the Volterra solution
    let mk = MemoryKernel::new(
        disp.clone(),
        cfg.gamma,
        MemoryKernelConfig {
            dt: c.gstar_dt,
            horizon: c.gstar_t_max,
        },
    )?;
    let vol = mk.g_star_volterra(c.gstar_t_max, c.gstar_dt)?;
    let steps = vol.len() - 1;
    let x = cfg.gamma * c.gstar_t_max;
    let mut n_max = 1;
    let mut term = cfg.gamma * x * x.exp();
    while term > 1e-12 && n_max < 400 {
        n_max += 1;
        term *= x / n_max as f64;
    }
    let (series, bound) = mk.series_on_grid(c.gstar_dt, steps, n_max);
    let diff = series.iter().zip(&vol).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    run.check(Check::at_most(
        format!("max |g* series - g* Volterra| on [0, {}]", c.gstar_t_max),
        diff + bound,
        GSTAR_TOL,
    ));
    let mut s = String::from("t,volterra,series\n");
    let stride = (steps / 500).max(1);
    for i in (0..=steps).step_by(stride) {
        writeln!(s, "{:.6},{:.12e},{:.12e}", i as f64 * c.gstar_dt, vol[i], series[i])?;
    }
    run.file("gstar.csv", s);

    // deterministic mild solution against the direct integrator
    let chain = Chain::new(disp.clone(), c.cross_n)?;
    let (y0, w, k0) = PROBE;
    let psi: Vec<Complex64> = (0..chain.n())
        .map(|i| {
            let y = chain.site(i) as f64;
            Complex64::from_polar((-(y - y0).powi(2) / (2.0 * w * w)).exp(), 2.0 * PI * k0 * y)
        })
        .collect();
    let s0 = chain.state_from_wave(&psi);
    let psi = chain.wave_field(&s0);
    let params = ThermostatParams::new(cfg.gamma, 0.0)?;
    let distance = |dt: f64| -> crate::Result<f64> {
        let mk = MemoryKernel::new(
            disp.clone(),
            cfg.gamma,
            MemoryKernelConfig {
                dt,
                horizon: c.cross_t_micro,
            },
        )?;
        let mild = psi_spectral_mild(&chain, &psi, &mk, 0.0, c.cross_t_micro)?;
        let steps = (c.cross_t_micro / dt).round() as usize;
        let mut st = s0.clone();
        simulate(&chain, &mut st, params, dt, steps, &mut NoisePath::new(0, dt), &[])?;
        let direct = chain.wave_hat(&st);
        let num: f64 = mild.iter().zip(&direct).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den: f64 = direct.iter().map(|z| z.norm_sqr()).sum();
        Ok((num / den).sqrt())
    };
    let (a, b) = (distance(c.cross_dt)?, distance(0.5 * c.cross_dt)?);
    run.check(Check::at_most("mild vs direct relative distance at dt", a, 10.0 * c.cross_dt));
    run.check(Check::at_most(
        "mild vs direct relative distance at dt/2",
        b,
        5.0 * c.cross_dt,
    ));
    run.check(Check::at_least("mild vs direct contraction under halving dt", a / b, CROSS_CONTRACTION));

    // energy bound with a thermostat, and monotone decay without one
    let packet = cfg.packet.spec(c.energy_n);
    let es = EnergySetup {
        gamma: cfg.gamma,
        temperature: c.energy_temperature,
        n: c.energy_n,
        dt: cfg.dt,
        steps: c.energy_steps,
        record_every: c.energy_record_every,
        packet,
        paths: c.energy_paths,
        seed: cfg.ensemble.seed,
    };
    let Some(rep) = run.guard(es.run(disp))? else {
        return Ok(());
    };
    run.check(Check::at_most(
        "max_t [E(t) - (E(0) + 2 gamma T t + 3 stderr)]",
        rep.worst_excess,
        0.0,
    ));
    let mut s = String::from("t_micro,mean,stderr,bound\n");
    for ((t, m), e) in rep.times.iter().zip(&rep.mean).zip(&rep.stderr) {
        let bound = rep.initial + 2.0 * cfg.gamma * c.energy_temperature * t;
        writeln!(s, "{t},{m:.10e},{e:.4e},{bound:.10e}")?;
    }
    run.file("energy.csv", s);

    let echain = Chain::new(disp.clone(), c.energy_n)?;
    let rise = cold_energy_rise(&echain, &packet, cfg.gamma, cfg.dt, c.energy_steps)?;
    run.check(Check::at_most(
        "max per-step rise of H / H(0) at T = 0",
        rise,
        cfg.dt.powi(3),
    ));
    run.file(
        "plot.gp",
        plot_script(
            "ensemble energy and bound",
            "energy.csv",
            "t",
            "E",
            &[(1, 2, "linespoints"), (1, 4, "lines")],
        ),
    );
    Ok(())
}

/// Largest `(H(n+1) - H(n)) / H(0)` over a deterministic run; the scheme
/// dissipates energy up to `O(dt^3)` per step.
pub fn cold_energy_rise(
    chain: &Chain,
    packet: &crate::wigner::WavePacketSpec,
    gamma: f64,
    dt: f64,
    steps: usize,
) -> crate::Result<f64> {
    let mut st = chain.state_from_wave(&packet.wave(chain, 0.0));
    let mut stepper = Stepper::new(chain, ThermostatParams::new(gamma, 0.0)?, dt, &st)?;
    let mut last = stepper.energy(&st);
    let scale = last.abs().max(f64::MIN_POSITIVE);
    let mut rise = f64::NEG_INFINITY;
    for _ in 0..steps {
        stepper.step(&mut st, 0.0);
        let e = stepper.energy(&st);
        rise = rise.max((e - last) / scale);
        last = e;
    }
    Ok(rise)
}

// ---------------------------------------------------------------------------

fn transport_check(cfg: &ExperimentConfig, disp: &DispersionRelation, run: &mut Run) -> Res<()> {
    let tc = &cfg.transport;
    let mut sol = LimitSolution::new(disp.clone(), cfg.gamma, cfg.temperature, cfg.w0.clone())?;
    sol.delta_excl = cfg.delta_excl;
    let ks: Vec<f64> = [0.1, 0.2, 0.25, 0.3, 0.4, tc.k]
        .into_iter()
        .filter(|&k| !disp.in_exclusion_zone(k, cfg.delta_excl))
        .collect();

    let mut worst: f64 = 0.0;
    for &k in &ks {
        for t in [0.5 * tc.t, tc.t, 2.0 * tc.t] {
            worst = worst.max(sol.boundary_residual(t, k)?);
        }
    }
    run.check(Check::at_most("max interface residual", worst, BOUNDARY_TOL));

    let scale = sol.scale().max(f64::MIN_POSITIVE);
    let h = tc.fd_step;
    let mut worst: f64 = 0.0;
    let mut s = String::from("k,x,w,transport_residual\n");
    for &k in &[tc.k, -tc.k] {
        if disp.in_exclusion_zone(k, cfg.delta_excl) {
            continue;
        }
        let end = disp.group_velocity(k) * tc.t;
        for i in 0..=40 {
            let x = -0.8 + 0.04 * i as f64;
            if (x.abs() < 4.0 * h) || ((x - end).abs() < 4.0 * h) {
                continue;
            }
            let r = sol.transport_residual(tc.t, x, k, h)?;
            worst = worst.max(r);
            writeln!(s, "{k},{x:.4},{:.12e},{r:.3e}", sol.limit_wigner(tc.t, x, k)?)?;
        }
    }
    run.check(Check::at_most(
        "max transport residual / scale",
        worst / scale,
        TRANSPORT_TOL,
    ));
    run.file("transport.csv", s);

    let teq = if cfg.temperature > 0.0 { cfg.temperature } else { 1.0 };
    let eq = LimitSolution::new(disp.clone(), cfg.gamma, teq, W0Profile::Equilibrium { temperature: teq })?;
    let mut dev: f64 = 0.0;
    for &k in &ks {
        for t in [0.0, tc.t, 5.0 * tc.t] {
            for i in 0..=20 {
                let x = -1.0 + 0.1 * i as f64;
                dev = dev.max((eq.limit_wigner(t, x, k)? - teq).abs());
                dev = dev.max((eq.limit_wigner(t, x, -k)? - teq).abs());
            }
        }
    }
    run.check(Check::at_most("max |W - T| for equilibrium data", dev, BOUNDARY_TOL * teq));

    if matches!(cfg.w0, W0Profile::Equilibrium { .. }) {
        run.warnings.push(
            "the Fourier transform of constant initial data is a delta; transform-pair check skipped".into(),
        );
    } else if !disp.in_exclusion_zone(tc.k, cfg.delta_excl) {
        let mut s = String::from("lambda,eta,k,closed_re,closed_im,numeric_re,numeric_im,rel_error\n");
        let mut worst: f64 = 0.0;
        for eta in [0.0, tc.eta] {
            let a = sol.laplace_fourier_limit(tc.lambda, eta, tc.k)?;
            let b = sol.laplace_fourier_numeric(tc.lambda, eta, tc.k)?;
            let rel = (a - b).norm() / a.norm().max(f64::MIN_POSITIVE);
            worst = worst.max(rel);
            writeln!(
                s,
                "{},{},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.3e}",
                tc.lambda, eta, tc.k, a.re, a.im, b.re, b.im, rel
            )?;
        }
        run.check(Check::at_most(
            "Laplace-Fourier closed form vs quadrature: relative error",
            worst,
            TRANSFORM_TOL,
        ));
        run.file("transform_pair.csv", s);
    }
    run.file(
        "plot.gp",
        plot_script(
            "limit Wigner function",
            "transport.csv",
            "x",
            "W",
            &[(2, 3, "linespoints")],
        ),
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn miller_j0_matches_tabulated_values() {
        // J_0 at 1, 2.404825557695773 (first zero), 10, 100
        assert!((bessel_j0(1.0) - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!(bessel_j0(2.404_825_557_695_773).abs() < 1e-14);
        assert!((bessel_j0(10.0) + 0.245_935_764_451_348_3).abs() < 1e-14);
        assert!((bessel_j0(100.0) - 0.019_985_850_304_223_12).abs() < 1e-14);
        assert_eq!(bessel_j0(0.0), 1.0);
    }

    #[test]
    fn production_limit_small_eta_matches_zero() {
        let a = production_limit_hat(0.5, 2.0, -0.3, 0.7, 1e-9);
        let b = production_limit_hat(0.5, 2.0, -0.3, 0.7, 0.0);
        assert!((a - b).norm() < 1e-8);
        // eta = 1 / (v t) integrates a full period
        let c = production_limit_hat(0.5, 2.0, 0.5, 2.0, 1.0);
        assert!(c.norm() < 1e-15);
    }

    #[test]
    fn coefficients_command_passes() {
        let cfg = ExperimentConfig::preset(ExperimentKind::Coefficients, &[]).unwrap();
        let rep = run_experiment(&cfg).unwrap();
        assert!(rep.failed().next().is_none(), "{}", rep.summary());
        assert!(rep.artifacts.iter().any(|a| a.name == "coefficients.csv"));
    }

    #[test]
    fn invalid_run_is_reported() {
        let mut cfg = ExperimentConfig::preset(ExperimentKind::Scattering, &[]).unwrap();
        cfg.n_sweep = vec![1024];
        cfg.dt = 0.05;
        cfg.t_macro = Some(0.1);
        let rep = run_experiment(&cfg).unwrap();
        assert_eq!(rep.outcome().exit_code(), 3);
        assert!(rep.invalid_run.unwrap().contains("cleared the interface"));
    }
}
