//! Experiment configuration: a JSON tree, optionally assembled from named
//! presets merged key by key.
//!
//! Merge order is: built-in defaults of the experiment kind, then each entry
//! of `"presets"` in order, then the file's own keys. Objects merge
//! recursively; any other value replaces the previous one. A preset name that
//! ends in `.json` is read from disk relative to the config file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::dispersion::{CouplingKernel, DispersionRelation, KernelPreset};
use crate::dynamics::Chain;
use crate::wigner::packet::DEFAULT_DELTA_EXCL;
use crate::wigner::{Envelope, GaussianPacket, W0Profile, WavePacketSpec};

/// Rejected configuration; maps to exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// Dotted path of the offending key, or the failing precondition.
    pub key: String,
    pub reason: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config rejected at `{}`: {}", self.key, self.reason)
    }
}

impl std::error::Error for ConfigError {}

fn reject(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError {
        key: key.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Coefficients,
    Scattering,
    Production,
    Equilibrium,
    Convergence,
    TransportCheck,
}

impl ExperimentKind {
    pub fn parse(name: &str) -> Option<Self> {
        serde_json::from_value(Value::String(name.replace('-', "_"))).ok()
    }

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Coefficients => "coefficients",
            ExperimentKind::Scattering => "scattering",
            ExperimentKind::Production => "production",
            ExperimentKind::Equilibrium => "equilibrium",
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::TransportCheck => "transport_check",
        }
    }
}

/// Preset name (`"nn_unpinned"`, `"nn_pinned(m)"`) or explicit coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KernelSpec {
    Preset(String),
    Explicit {
        coefficients: Vec<(i64, f64)>,
        #[serde(default)]
        decay_constant: Option<f64>,
    },
}

impl KernelSpec {
    pub fn dispersion(&self) -> crate::Result<DispersionRelation> {
        match self {
            KernelSpec::Preset(name) => DispersionRelation::from_preset(KernelPreset::parse(name)?),
            KernelSpec::Explicit {
                coefficients,
                decay_constant,
            } => {
                let k = match decay_constant {
                    Some(c) => CouplingKernel::with_decay_constant(coefficients, *c)?,
                    None => CouplingKernel::new(coefficients)?,
                };
                Ok(DispersionRelation::new(k))
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            KernelSpec::Preset(name) => name.clone(),
            KernelSpec::Explicit { .. } => "explicit".into(),
        }
    }

    pub fn is_unpinned_nn(&self) -> bool {
        matches!(self, KernelSpec::Preset(n) if n.trim() == "nn_unpinned")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketConfig {
    pub x_center: f64,
    pub k_center: f64,
    pub envelope: Envelope,
    pub phase_random: bool,
}

impl PacketConfig {
    pub fn spec(&self, n: usize) -> WavePacketSpec {
        WavePacketSpec {
            eps: 1.0 / n as f64,
            x_center: self.x_center,
            k_center: self.k_center,
            envelope: self.envelope,
            phase_random: self.phase_random,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub paths: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaplaceConfig {
    pub eps: f64,
    pub n: usize,
    pub dt: f64,
    pub lambda: f64,
    pub etas: Vec<f64>,
    pub k_center: f64,
    pub half_bin: f64,
    pub t_end: f64,
    pub sample_dt: f64,
    pub paths: usize,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductionConfig {
    pub k_lo: f64,
    pub k_hi: f64,
    pub bins: usize,
    pub tolerance: f64,
    pub complement_tolerance: f64,
    /// Number of Wigner rows `eta = 0, 2, 4, ...` exported with the limit.
    pub wigner_rows: usize,
    /// Optional Laplace-transform check of the thermal Wigner function.
    pub laplace: Option<LaplaceConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumConfig {
    pub t_micro: f64,
    pub records: usize,
    pub bins: usize,
    pub sigmas: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    /// `J` oracle range `[0, j_t_max]` (unpinned chain only).
    pub j_t_max: f64,
    /// Series-versus-Volterra range.
    pub gstar_t_max: f64,
    pub gstar_dt: f64,
    /// Mild-versus-direct comparison time and lattice.
    pub cross_t_micro: f64,
    pub cross_n: usize,
    pub cross_dt: f64,
    /// Energy-bound ensemble.
    pub energy_temperature: f64,
    pub energy_n: usize,
    pub energy_steps: usize,
    pub energy_record_every: usize,
    pub energy_paths: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportConfig {
    pub t: f64,
    pub lambda: f64,
    pub eta: f64,
    pub k: f64,
    pub fd_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub presets: Vec<String>,
    pub kernel: KernelSpec,
    pub gamma: f64,
    pub temperature: f64,
    pub n: usize,
    /// Lattice sizes for scattering sweeps; empty means `[n]`.
    pub n_sweep: Vec<usize>,
    pub dt: f64,
    /// Macroscopic run time; `null` picks the experiment's default.
    pub t_macro: Option<f64>,
    pub delta_excl: f64,
    pub k_grid: usize,
    pub packet: PacketConfig,
    pub window_halfwidth: f64,
    pub tolerance: f64,
    pub ensemble: EnsembleConfig,
    pub production: ProductionConfig,
    pub equilibrium: EquilibriumConfig,
    pub convergence: ConvergenceConfig,
    pub transport: TransportConfig,
    /// Initial Wigner profile of the analytic transport check.
    pub w0: W0Profile,
    pub snapshots: bool,
    pub threads: Option<usize>,
    pub out_dir: Option<String>,
}

/// Defaults shared by every experiment kind.
fn base_defaults() -> Value {
    json!({
        "kernel": "nn_unpinned",
        "gamma": 1.0,
        "temperature": 0.0,
        "n": 512,
        "n_sweep": [],
        "dt": 0.05,
        "t_macro": null,
        "delta_excl": DEFAULT_DELTA_EXCL,
        "k_grid": 512,
        "packet": {
            "x_center": -0.225,
            "k_center": 0.25,
            "envelope": { "shape": "cosine_bump", "half_width": 0.1 },
            "phase_random": true
        },
        "window_halfwidth": 0.1,
        "tolerance": 0.05,
        "ensemble": { "paths": 1000, "seed": 0 },
        "production": {
            "k_lo": 0.15,
            "k_hi": 0.35,
            "bins": 10,
            "tolerance": 0.1,
            "complement_tolerance": 0.05,
            "wigner_rows": 3,
            "laplace": null
        },
        "equilibrium": { "t_micro": 1000.0, "records": 4, "bins": 16, "sigmas": 3.0 },
        "convergence": {
            "j_t_max": 50.0,
            "gstar_t_max": 5.0,
            "gstar_dt": 0.001,
            "cross_t_micro": 25.0,
            "cross_n": 256,
            "cross_dt": 0.04,
            "energy_temperature": 1.0,
            "energy_n": 512,
            "energy_steps": 8000,
            "energy_record_every": 400,
            "energy_paths": 200
        },
        "transport": { "t": 1.0, "lambda": 1.0, "eta": 2.0, "k": 0.25, "fd_step": 1e-3 },
        "w0": {
            "profile": "packets",
            "packets": [{ "amplitude": 1.0, "x0": -0.2, "k0": 0.25, "sx": 0.05, "sk": 0.02 }]
        },
        "snapshots": false,
        "threads": null,
        "out_dir": null
    })
}

/// Per-kind overrides of [`base_defaults`].
fn kind_defaults(kind: ExperimentKind) -> Value {
    match kind {
        ExperimentKind::Scattering => json!({
            "n_sweep": [1024, 2048, 4096],
            "dt": 0.00625,
            "packet": { "phase_random": false }
        }),
        ExperimentKind::Production => json!({ "temperature": 1.0, "t_macro": 0.3 }),
        ExperimentKind::Equilibrium => json!({ "temperature": 1.0, "n": 256, "ensemble": { "paths": 200 } }),
        _ => json!({}),
    }
}

/// Built-in named fragments.
pub fn builtin_preset(name: &str) -> Option<Value> {
    let v = match name {
        "nn_unpinned" => json!({ "kernel": "nn_unpinned" }),
        "nn_pinned" => json!({ "kernel": "nn_pinned(1)" }),
        "free" => json!({ "gamma": 0.0 }),
        "quick" => json!({
            "n_sweep": [512, 1024],
            "dt": 0.05,
            "ensemble": { "paths": 50 },
            "equilibrium": { "t_micro": 50.0 },
            "convergence": { "j_t_max": 20.0, "energy_steps": 800, "energy_paths": 20, "energy_n": 256 }
        }),
        "thermal_laplace" => json!({
            "production": { "laplace": {
                "eps": 1.0 / 64.0,
                "n": 512,
                "dt": 0.1,
                "lambda": 1.0,
                "etas": [0.0, 2.0, 4.0],
                "k_center": 0.25,
                "half_bin": 0.01,
                "t_end": 10.0,
                "sample_dt": 0.0125,
                "paths": 2000,
                "tolerance": 0.1
            } }
        }),
        "equilibrium_w0" => json!({
            "temperature": 1.0,
            "w0": { "profile": "equilibrium", "temperature": 1.0 }
        }),
        _ => return None,
    };
    Some(v)
}

pub const BUILTIN_PRESETS: &[&str] = &[
    "nn_unpinned",
    "nn_pinned",
    "free",
    "quick",
    "thermal_laplace",
    "equilibrium_w0",
];

/// Recursive merge of `patch` into `base`.
pub fn merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, p) => *b = p.clone(),
    }
}

fn load_preset(name: &str, base_dir: Option<&Path>) -> Result<Value, ConfigError> {
    if let Some(v) = builtin_preset(name) {
        return Ok(v);
    }
    if name.ends_with(".json") {
        let path: PathBuf = match base_dir {
            Some(d) => d.join(name),
            None => PathBuf::from(name),
        };
        let text = fs::read_to_string(&path)
            .map_err(|e| reject("presets", format!("cannot read `{}`: {e}", path.display())))?;
        return serde_json::from_str(&text)
            .map_err(|e| reject("presets", format!("`{}` is not valid JSON: {e}", path.display())));
    }
    Err(reject(
        "presets",
        format!("unknown preset `{name}` (built-in: {})", BUILTIN_PRESETS.join(", ")),
    ))
}

impl ExperimentConfig {
    /// Resolves presets and defaults for a raw JSON tree. `kind` overrides
    /// the tree's `"experiment"` key when given (the CLI subcommand).
    pub fn from_value(raw: &Value, kind: Option<ExperimentKind>, base_dir: Option<&Path>) -> Result<Self, ConfigError> {
        let obj: &Map<String, Value> = raw
            .as_object()
            .ok_or_else(|| reject("<root>", "config must be a JSON object"))?;
        let kind = match (kind, obj.get("experiment")) {
            (Some(k), _) => k,
            (None, Some(v)) => serde_json::from_value(v.clone())
                .map_err(|e| reject("experiment", format!("unknown experiment kind: {e}")))?,
            (None, None) => return Err(reject("experiment", "missing experiment kind")),
        };
        let presets: Vec<String> = match obj.get("presets") {
            None => Vec::new(),
            Some(v) => serde_json::from_value(v.clone())
                .map_err(|_| reject("presets", "must be a list of preset names"))?,
        };
        let mut tree = base_defaults();
        merge(&mut tree, &kind_defaults(kind));
        for p in &presets {
            merge(&mut tree, &load_preset(p, base_dir)?);
        }
        merge(&mut tree, raw);
        tree["experiment"] = serde_json::to_value(kind).expect("kind serializes");
        tree["presets"] = serde_json::to_value(&presets).expect("names serialize");
        let cfg: ExperimentConfig = serde_json::from_value(tree).map_err(|e| reject("<schema>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(text: &str, kind: Option<ExperimentKind>) -> Result<Self, ConfigError> {
        let raw: Value = serde_json::from_str(text).map_err(|e| reject("<file>", format!("invalid JSON: {e}")))?;
        Self::from_value(&raw, kind, None)
    }

    pub fn load(path: &Path, kind: Option<ExperimentKind>) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path)
            .map_err(|e| reject("<file>", format!("cannot read `{}`: {e}", path.display())))?;
        let raw: Value = serde_json::from_str(&text).map_err(|e| reject("<file>", format!("invalid JSON: {e}")))?;
        Self::from_value(&raw, kind, path.parent())
    }

    /// Defaulted configuration for `kind` with the given presets.
    pub fn preset(kind: ExperimentKind, presets: &[&str]) -> Result<Self, ConfigError> {
        Self::from_value(&json!({ "presets": presets }), Some(kind), None)
    }

    pub fn lattice_sizes(&self) -> Vec<usize> {
        if self.n_sweep.is_empty() {
            vec![self.n]
        } else {
            self.n_sweep.clone()
        }
    }

    pub fn dispersion(&self) -> Result<DispersionRelation, ConfigError> {
        self.kernel.dispersion().map_err(|e| reject("kernel", e.to_string()))
    }

    /// Checks every module precondition the selected experiment depends on.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let disp = self.dispersion()?;
        let finite_nonneg = |key: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(reject(key, format!("must be finite and >= 0, got {v}")))
            }
        };
        finite_nonneg("gamma", self.gamma)?;
        finite_nonneg("temperature", self.temperature)?;
        if !(self.delta_excl > 0.0 && self.delta_excl < 0.25) {
            return Err(reject("delta_excl", format!("need 0 < delta_excl < 1/4, got {}", self.delta_excl)));
        }
        if let Some(t) = self.threads {
            if t == 0 {
                return Err(reject("threads", "must be >= 1"));
            }
        }
        if let Some(t) = self.t_macro {
            if !(t > 0.0 && t.is_finite()) {
                return Err(reject("t_macro", format!("must be > 0, got {t}")));
            }
        }
        let lattice = |key: &str, n: usize, dt: f64| -> Result<Chain, ConfigError> {
            let chain = Chain::new(disp.clone(), n).map_err(|e| reject(key, e.to_string()))?;
            chain.check_step(dt).map_err(|e| reject("dt", e.to_string()))?;
            Ok(chain)
        };
        match self.experiment {
            ExperimentKind::Coefficients => {
                if self.k_grid < 64 {
                    return Err(reject("k_grid", format!("need at least 64 points, got {}", self.k_grid)));
                }
            }
            ExperimentKind::Scattering => {
                if self.temperature != 0.0 {
                    return Err(reject("temperature", "scattering runs are deterministic and need T = 0"));
                }
                if !(disp.group_velocity(self.packet.k_center) > 0.0) {
                    return Err(reject("packet.k_center", "carrier must move towards the thermostat (v > 0)"));
                }
                if !(self.packet.x_center < 0.0) {
                    return Err(reject("packet.x_center", "packet must start at x < 0"));
                }
                if !(self.window_halfwidth > 0.0 && self.window_halfwidth < 0.375) {
                    return Err(reject("window_halfwidth", "must lie in (0, 0.375)"));
                }
                for n in self.lattice_sizes() {
                    let chain = lattice("n_sweep", n, self.dt)?;
                    self.packet
                        .spec(n)
                        .validate(&chain)
                        .map_err(|e| reject("packet", e.to_string()))?;
                }
            }
            ExperimentKind::Production => {
                lattice("n", self.n, self.dt)?;
                self.check_paths(self.ensemble.paths)?;
                let p = &self.production;
                if !(0.0 < p.k_lo && p.k_lo < p.k_hi && p.k_hi < 0.5) || p.bins == 0 {
                    return Err(reject("production", "need 0 < k_lo < k_hi < 1/2 and bins > 0"));
                }
                for k in [p.k_lo, p.k_hi] {
                    if disp.in_exclusion_zone(k, self.delta_excl) {
                        return Err(reject("production", format!("k = {k} lies in the exclusion zone")));
                    }
                }
                if let Some(l) = &p.laplace {
                    let chain = lattice("production.laplace.n", l.n, l.dt)?;
                    self.check_paths(l.paths)?;
                    if !(l.lambda > 0.0) {
                        return Err(reject("production.laplace.lambda", "must be > 0"));
                    }
                    crate::wigner::estimate::shifts_for(l.eps, chain.n(), &l.etas)
                        .map_err(|e| reject("production.laplace.etas", e.to_string()))?;
                    if disp.in_exclusion_zone(l.k_center, self.delta_excl + l.half_bin) {
                        return Err(reject("production.laplace.k_center", "bin overlaps the exclusion zone"));
                    }
                }
            }
            ExperimentKind::Equilibrium => {
                if !(self.temperature > 0.0) {
                    return Err(reject("temperature", "the equilibrium check needs T > 0"));
                }
                lattice("n", self.n, self.dt)?;
                self.check_paths(self.ensemble.paths)?;
                let e = &self.equilibrium;
                if !(e.t_micro > 0.0) || e.records == 0 || e.bins == 0 || e.bins > self.n {
                    return Err(reject("equilibrium", "need t_micro > 0, records > 0, 0 < bins <= n"));
                }
            }
            ExperimentKind::Convergence => {
                let c = &self.convergence;
                lattice("convergence.cross_n", c.cross_n, c.cross_dt)?;
                let chain = lattice("convergence.energy_n", c.energy_n, self.dt)?;
                self.packet
                    .spec(c.energy_n)
                    .validate(&chain)
                    .map_err(|e| reject("packet", e.to_string()))?;
                self.check_paths(c.energy_paths)?;
                if !(c.gstar_dt > 0.0 && c.gstar_t_max > 0.0 && c.j_t_max >= 0.0 && c.cross_t_micro > 0.0) {
                    return Err(reject("convergence", "time ranges and steps must be positive"));
                }
                if c.energy_record_every == 0 {
                    return Err(reject("convergence.energy_record_every", "must be > 0"));
                }
            }
            ExperimentKind::TransportCheck => {
                let t = &self.transport;
                if !(t.t > 0.0 && t.lambda > 0.0 && t.fd_step > 0.0) {
                    return Err(reject("transport", "t, lambda and fd_step must be > 0"));
                }
                if disp.in_exclusion_zone(t.k, self.delta_excl) {
                    return Err(reject("transport.k", "lies in the exclusion zone"));
                }
                if let W0Profile::Packets { packets } = &self.w0 {
                    for GaussianPacket { sx, sk, .. } in packets {
                        if !(*sx > 0.0 && *sk > 0.0) {
                            return Err(reject("w0.packets", "widths must be > 0"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn check_paths(&self, paths: usize) -> Result<(), ConfigError> {
        if paths < 2 {
            return Err(reject("ensemble.paths", "need at least 2 paths for error bars"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_for_every_kind() {
        for k in [
            ExperimentKind::Coefficients,
            ExperimentKind::Scattering,
            ExperimentKind::Production,
            ExperimentKind::Equilibrium,
            ExperimentKind::Convergence,
            ExperimentKind::TransportCheck,
        ] {
            let c = ExperimentConfig::preset(k, &[]).unwrap();
            assert_eq!(c.experiment, k);
            assert_eq!(ExperimentKind::parse(k.name()), Some(k));
        }
    }

    #[test]
    fn presets_merge_by_key_and_file_wins() {
        let c = ExperimentConfig::from_json_str(
            r#"{"experiment": "production", "presets": ["quick", "nn_pinned"], "ensemble": {"seed": 9}}"#,
            None,
        )
        .unwrap();
        assert_eq!(c.ensemble.paths, 50);
        assert_eq!(c.ensemble.seed, 9);
        assert_eq!(c.kernel, KernelSpec::Preset("nn_pinned(1)".into()));
        assert_eq!(c.production.k_lo, 0.15);
    }

    #[test]
    fn merge_replaces_scalars_and_recurses() {
        let mut a = json!({"a": {"b": 1, "c": 2}, "d": [1]});
        merge(&mut a, &json!({"a": {"b": 5}, "d": [2, 3]}));
        assert_eq!(a, json!({"a": {"b": 5, "c": 2}, "d": [2, 3]}));
    }

    #[test]
    fn rejections_name_the_key() {
        let bad = |s: &str| ExperimentConfig::from_json_str(s, None).unwrap_err().key;
        assert_eq!(bad(r#"{"experiment": "coefficients", "delta_excl": 0.3}"#), "delta_excl");
        assert_eq!(bad(r#"{"experiment": "scattering", "temperature": 1.0}"#), "temperature");
        assert_eq!(bad(r#"{"experiment": "equilibrium", "temperature": 0.0}"#), "temperature");
        assert_eq!(bad(r#"{"experiment": "production", "dt": 0.5}"#), "dt");
        assert_eq!(bad(r#"{"experiment": "production", "n": 100}"#), "n");
        assert_eq!(bad(r#"{"experiment": "coefficients", "kernel": "bogus"}"#), "kernel");
        assert_eq!(bad(r#"{"experiment": "coefficients", "presets": ["nope"]}"#), "presets");
        assert_eq!(bad(r#"{"experiment": "coefficients", "gama": 1.0}"#), "<schema>");
        assert_eq!(bad(r#"{"experiment": "teleport"}"#), "experiment");
        assert_eq!(bad(r#"[1, 2]"#), "<root>");
    }

    #[test]
    fn explicit_kernel() {
        let c = ExperimentConfig::from_json_str(
            r#"{"experiment": "coefficients", "kernel": {"coefficients": [[0, 2.2], [1, -1.0], [-1, -1.0], [2, -0.1], [-2, -0.1]]}}"#,
            None,
        )
        .unwrap();
        let d = c.dispersion().unwrap();
        assert!((d.hat_alpha(0.0)).abs() < 1e-12);
    }

    #[test]
    fn file_presets_resolve_relative_to_the_config() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("frag.json"), r#"{"gamma": 2.0}"#).unwrap();
        let cfg = dir.path().join("cfg.json");
        fs::write(&cfg, r#"{"experiment": "coefficients", "presets": ["frag.json"]}"#).unwrap();
        assert_eq!(ExperimentConfig::load(&cfg, None).unwrap().gamma, 2.0);
    }
}
