//! Run manifests: strict structured-text configuration for every command.
//!
//! Parsing is two-pass: a schema walk over the raw TOML that collects every
//! unknown-key and type error (with a nearest-key suggestion), then typed
//! deserialization plus semantic validation. All errors are reported
//! together, not just the first.

use crate::error::CoreError;
use crate::grid::AxisSpec;
use crate::kernels::BroadeningScheme;
use crate::models::ModelSpec;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Geometry,
    Kernels,
    PropagateExact,
    PropagateFriction,
    Lite,
    Validate,
}

impl std::fmt::Display for Command {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Command::Geometry => "geometry",
            Command::Kernels => "kernels",
            Command::PropagateExact => "propagate-exact",
            Command::PropagateFriction => "propagate-friction",
            Command::Lite => "lite",
            Command::Validate => "validate",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub axes: Vec<AxisSpec>,
    #[serde(default)]
    pub level: usize,
    /// Degeneracy tolerance (Hartree).
    #[serde(default = "default_gap_tol")]
    pub gap_tol: f64,
    /// Nuclear mass entering the scalar potential φ.
    #[serde(default = "default_mass")]
    pub mass: f64,
}

fn default_gap_tol() -> f64 {
    crate::geometry::DEFAULT_GAP_TOL
}

fn default_mass() -> f64 {
    2000.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSection {
    /// Loop center in the plane axes.
    pub center: Vec<f64>,
    pub radius: f64,
    pub points: usize,
    /// The two coordinate indices spanned by the circle.
    #[serde(default = "default_plane")]
    pub plane: [usize; 2],
    #[serde(default)]
    pub level: usize,
    /// Values of the remaining coordinates.
    #[serde(default)]
    pub fixed: Vec<f64>,
}

fn default_plane() -> [usize; 2] {
    [0, 1]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelsSection {
    /// Nuclear configurations to sweep.
    pub points: Vec<Vec<f64>>,
    #[serde(default = "default_tau_max")]
    pub tau_max: f64,
    #[serde(default = "default_tau_steps")]
    pub tau_steps: usize,
    /// Rows of the η-halving convergence table.
    #[serde(default = "default_halvings")]
    pub eta_halvings: usize,
}

fn default_tau_max() -> f64 {
    50.0
}

fn default_tau_steps() -> usize {
    200
}

fn default_halvings() -> usize {
    3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum InitialPacket {
    /// ψ(x)·u_level(x) adiabatic construction.
    Adiabatic {
        center: f64,
        width: f64,
        momentum: f64,
        #[serde(default)]
        level: usize,
    },
    /// Packet on one electronic basis component.
    Component {
        center: f64,
        width: f64,
        momentum: f64,
        component: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationSection {
    pub start: f64,
    pub step: f64,
    pub n: usize,
    pub mass: f64,
    pub dt: f64,
    pub n_steps: usize,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    pub initial: InitialPacket,
}

fn default_stride() -> usize {
    100
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum GammaSpec {
    /// Fixed scalar coefficient.
    Constant {
        gamma: f64,
        #[serde(default)]
        gamma_im: f64,
    },
    /// γ₁₁ from the Markov kernel of the run's model at a configuration.
    FromKernel { at: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrictionSection {
    pub mode: crate::friction::FrictionMode,
    pub gamma: GammaSpec,
    #[serde(default = "default_floor")]
    pub floor: f64,
    #[serde(default = "default_audit")]
    pub audit_stride: usize,
}

fn default_floor() -> f64 {
    1e-10
}

fn default_audit() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiteSection {
    /// Sample times δt expressed in propagator steps.
    pub sample_steps: Vec<usize>,
    pub dt: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: Command,
    /// Seed for randomized property checks (validate command).
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub grid: Option<GridSection>,
    #[serde(default, rename = "loop")]
    pub loop_: Option<LoopSection>,
    #[serde(default)]
    pub broadening: Option<BroadeningScheme>,
    #[serde(default)]
    pub kernels: Option<KernelsSection>,
    #[serde(default)]
    pub propagation: Option<PropagationSection>,
    #[serde(default)]
    pub friction: Option<FrictionSection>,
    #[serde(default)]
    pub lite: Option<LiteSection>,
}

const TOP_LEVEL_KEYS: &[&str] = &[
    "schema_version",
    "command",
    "seed",
    "model",
    "grid",
    "loop",
    "broadening",
    "kernels",
    "propagation",
    "friction",
    "lite",
];

const SECTION_KEYS: &[(&str, &[&str])] = &[
    (
        "model",
        &[
            "kind",
            "b0",
            "a",
            "c",
            "k_f",
            "x0",
            "delta",
            "n_band",
            "w",
            "eps_d",
            "coupling",
            "dim_nuc",
            "n_electrons",
        ],
    ),
    ("grid", &["axes", "level", "gap_tol", "mass"]),
    (
        "loop",
        &["center", "radius", "points", "plane", "level", "fixed"],
    ),
    ("broadening", &["kind", "eta", "omega", "epsilon"]),
    (
        "kernels",
        &["points", "tau_max", "tau_steps", "eta_halvings"],
    ),
    (
        "propagation",
        &[
            "start",
            "step",
            "n",
            "mass",
            "dt",
            "n_steps",
            "snapshot_stride",
            "initial",
        ],
    ),
    ("friction", &["mode", "gamma", "floor", "audit_stride"]),
    ("lite", &["sample_steps", "dt"]),
];

fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for i in 1..=a.len() {
        cur[0] = i;
        for j in 1..=b.len() {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            cur[j] = (prev[j] + 1).min(cur[j - 1] + 1).min(prev[j - 1] + cost);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn suggestion(key: &str, allowed: &[&str]) -> String {
    let best = allowed
        .iter()
        .map(|cand| (levenshtein(key, cand), *cand))
        .min_by_key(|(d, _)| *d);
    match best {
        Some((d, cand)) if d <= 2 => format!(" (did you mean `{cand}`?)"),
        _ => String::new(),
    }
}

fn check_keys(table: &toml::Table, allowed: &[&str], path: &str, errors: &mut Vec<String>) {
    for key in table.keys() {
        if !allowed.contains(&key.as_str()) {
            errors.push(format!(
                "unknown key `{path}{key}`{}",
                suggestion(key, allowed)
            ));
        }
    }
}

/// Parse and fully validate a manifest file. Returns either the manifest or
/// the complete list of validation errors.
pub fn load_manifest(path: &Path) -> Result<(RunManifest, Vec<u8>), CoreError> {
    let bytes = std::fs::read(path)?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| CoreError::ManifestParse(format!("not UTF-8: {e}")))?;
    let manifest = parse_manifest(text)?;
    Ok((manifest, bytes))
}

/// Parse and validate manifest text.
pub fn parse_manifest(text: &str) -> Result<RunManifest, CoreError> {
    let value: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| CoreError::ManifestParse(e.to_string()))?;

    let mut errors = Vec::new();
    check_keys(&value, TOP_LEVEL_KEYS, "", &mut errors);
    for (section, allowed) in SECTION_KEYS {
        if let Some(v) = value.get(*section) {
            if let Some(table) = v.as_table() {
                check_keys(table, allowed, &format!("{section}."), &mut errors);
            }
        }
    }

    // drop the keys already reported so typed deserialization and the
    // semantic checks can still run and contribute their own errors
    let mut sanitized = value.clone();
    sanitized.retain(|k, _| TOP_LEVEL_KEYS.contains(&k));
    for (section, allowed) in SECTION_KEYS {
        if let Some(table) = sanitized.get_mut(*section).and_then(|v| v.as_table_mut()) {
            table.retain(|k, _| allowed.contains(&k));
        }
    }
    let manifest: Option<RunManifest> = match RunManifest::deserialize(sanitized) {
        Ok(m) => Some(m),
        Err(e) => {
            errors.push(e.to_string());
            None
        }
    };

    if let Some(m) = &manifest {
        validate_semantics(m, &mut errors);
    }
    if !errors.is_empty() {
        return Err(CoreError::ManifestInvalid(errors));
    }
    Ok(manifest.expect("validated"))
}

fn validate_semantics(m: &RunManifest, errors: &mut Vec<String>) {
    if m.schema_version != 1 {
        errors.push(format!(
            "schema_version {} unsupported (this build reads 1)",
            m.schema_version
        ));
    }
    let need = |cond: bool, msg: &str, errors: &mut Vec<String>| {
        if !cond {
            errors.push(msg.to_string());
        }
    };
    match m.command {
        Command::Geometry => {
            need(m.model.is_some(), "geometry: [model] is required", errors);
            need(
                m.grid.is_some() || m.loop_.is_some(),
                "geometry: need [grid] and/or [loop]",
                errors,
            );
        }
        Command::Kernels => {
            need(m.model.is_some(), "kernels: [model] is required", errors);
            need(
                m.broadening.is_some(),
                "kernels: [broadening] is required",
                errors,
            );
            need(
                m.kernels.is_some(),
                "kernels: [kernels] is required",
                errors,
            );
        }
        Command::PropagateExact => {
            need(
                m.model.is_some(),
                "propagate-exact: [model] is required",
                errors,
            );
            need(
                m.propagation.is_some(),
                "propagate-exact: [propagation] is required",
                errors,
            );
        }
        Command::PropagateFriction => {
            need(
                m.model.is_some(),
                "propagate-friction: [model] is required",
                errors,
            );
            need(
                m.propagation.is_some(),
                "propagate-friction: [propagation] is required",
                errors,
            );
            need(
                m.friction.is_some(),
                "propagate-friction: [friction] is required",
                errors,
            );
            if let Some(f) = &m.friction {
                if matches!(f.gamma, GammaSpec::FromKernel { .. }) && m.broadening.is_none() {
                    errors.push("propagate-friction: gamma from_kernel needs [broadening]".into());
                }
                if f.mode == crate::friction::FrictionMode::NonMarkov {
                    if !matches!(f.gamma, GammaSpec::FromKernel { .. }) {
                        errors.push(
                            "propagate-friction: non_markov mode needs gamma = from_kernel".into(),
                        );
                    }
                    if m.broadening.map(|b| b.epsilon <= 0.0).unwrap_or(true) {
                        errors.push(
                            "propagate-friction: non_markov mode needs [broadening] with epsilon > 0".into(),
                        );
                    }
                }
            }
        }
        Command::Lite => {
            need(m.model.is_some(), "lite: [model] is required", errors);
            need(
                m.propagation.is_some(),
                "lite: [propagation] is required",
                errors,
            );
            need(m.lite.is_some(), "lite: [lite] is required", errors);
        }
        Command::Validate => {}
    }
    if let Some(b) = &m.broadening {
        if let Err(e) = b.validate() {
            errors.push(e.to_string());
        }
    }
    if let Some(g) = &m.grid {
        for (k, ax) in g.axes.iter().enumerate() {
            if !(ax.step > 0.0) {
                errors.push(format!("grid axis {k}: step must be > 0"));
            }
            if ax.n < 3 {
                errors.push(format!("grid axis {k}: need at least 3 points"));
            }
        }
    }
    if let Some(p) = &m.propagation {
        if !(p.dt > 0.0) {
            errors.push("propagation: dt must be > 0".into());
        }
        if !(p.mass > 0.0) {
            errors.push("propagation: mass must be > 0".into());
        }
    }
    if let Some(f) = &m.friction {
        if let GammaSpec::Constant { gamma, .. } = f.gamma {
            if gamma < 0.0 {
                errors.push("friction: Re gamma must be >= 0".into());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_geometry_manifest_fills_defaults() {
        let text = r#"
schema_version = 1
command = "geometry"

[model]
kind = "conical"
a = 1.0
c = 1.0

[grid]
axes = [{ start = -1.0, step = 0.5, n = 5 }, { start = -1.0, step = 0.5, n = 5 }]
"#;
        let m = parse_manifest(text).unwrap();
        assert_eq!(m.command, Command::Geometry);
        let g = m.grid.unwrap();
        assert_eq!(g.level, 0);
        assert!((g.gap_tol - 1e-8).abs() < 1e-20);
        assert!((g.mass - 2000.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_key_gets_suggestion_and_all_errors_reported() {
        let text = r#"
schema_version = 1
command = "propagate-friction"

[model]
kind = "avoided_crossing"
k_f = 0.02
x0 = 1.0
delta = 0.0
c = 0.005

[propagation]
start = -10.0
step = 0.02
n = 512
mass = 2000.0
dt = 0.5
n_steps = 10
initial = { adiabatic = { center = -3.0, width = 0.5, momentum = 10.0 } }

[friction]
mode = "kostin"
gama = { constant = { gamma = 0.001 } }
"#;
        let err = parse_manifest(text).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("gama"), "missing unknown-key report: {text}");
        assert!(text.contains("did you mean `gamma`?"), "{text}");
        // the missing required key is reported too, not just the first error
        assert!(text.contains("gamma"), "{text}");
    }

    #[test]
    fn negative_eta_cites_broadening() {
        let text = r#"
schema_version = 1
command = "kernels"

[model]
kind = "spin_monopole"
b0 = 1.0

[broadening]
kind = "gaussian"
eta = -0.1
omega = 0.0
epsilon = 0.0

[kernels]
points = [[0.0, 0.0, 1.0]]
"#;
        let err = parse_manifest(text).unwrap_err();
        assert!(err.to_string().contains("eta must be > 0"), "{err}");
    }
}
