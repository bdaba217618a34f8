//! Scenario configuration files.
//!
//! ```yaml
//! pipeline:
//!   seed: 42
//!   order: [fov, occlusion, structured_dropout, dropout, sparsify, noise, motion]
//!   random_subset: false
//!   strict: true
//! augmentations:
//!   dropout:            { heavy: { ratio: 0.5 } }
//!   structured_dropout: { extreme: { start_deg: random, extent_deg: 30 } }
//!   fov:                { light: { max_azimuth_deg: 175, max_elevation_deg: 87.5 } }
//!   occlusion:          { moderate: { patches: 2, radius: 0.5, min_range: 1, max_range: 15 } }
//!   noise:              { heavy: { sigma: 0.035, outlier_prob: 0.005, outlier_sigma: 0.4 } }
//!   sparsify:           { extreme: { stride: 4 } }
//!   motion:             { light: { linear_velocity: [0.5, 0, 0], angular_velocity: [0, 0, 0.125], use_imu: false } }
//! ```
//!
//! Every field is optional; missing ones take the built-in tier table.

use nalgebra::Vector3;
use serde_json::json;
use serde_yaml::{Mapping, Value};
use thiserror::Error;

use crate::model::{
    validate_params, DegradationParams, ModuleId, ParamError, ScenarioConfig, SectorParams, SectorStart, Tier,
};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("config is not valid YAML: {0}")]
    Syntax(String),
    #[error("{path}: unknown key")]
    UnknownKey { path: String },
    #[error("{path}: expected {expected}, found {found}")]
    Type { path: String, expected: &'static str, found: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("override `{0}` must look like key.path=value")]
    Override(String),
}

fn describe(v: &Value) -> String {
    match v {
        Value::Null => "null".into(),
        Value::Bool(b) => format!("boolean {b}"),
        Value::Number(n) => format!("number {n}"),
        Value::String(s) => format!("string {s:?}"),
        Value::Sequence(_) => "a sequence".into(),
        Value::Mapping(_) => "a mapping".into(),
        Value::Tagged(_) => "a tagged value".into(),
    }
}

fn type_err(path: &str, expected: &'static str, v: &Value) -> ConfigError {
    ConfigError::Type { path: path.to_string(), expected, found: describe(v) }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn as_mapping<'a>(v: &'a Value, path: &str) -> Result<Option<&'a Mapping>, ConfigError> {
    match v {
        Value::Null => Ok(None),
        Value::Mapping(m) => Ok(Some(m)),
        other => Err(type_err(path, "a mapping", other)),
    }
}

/// Iterates `(key, value, path)` and rejects keys outside `allowed` when
/// strict.
fn entries<'a>(
    m: &'a Mapping,
    path: &str,
    allowed: &[&str],
    strict: bool,
) -> Result<Vec<(&'a str, &'a Value, String)>, ConfigError> {
    let mut out = Vec::new();
    for (k, v) in m {
        let key = k.as_str().ok_or_else(|| type_err(path, "string keys", k))?;
        let p = join(path, key);
        if !allowed.contains(&key) {
            if strict {
                return Err(ConfigError::UnknownKey { path: p });
            }
            continue;
        }
        out.push((key, v, p));
    }
    Ok(out)
}

fn number(v: &Value, path: &str) -> Result<f64, ConfigError> {
    v.as_f64().ok_or_else(|| type_err(path, "a number", v))
}

fn unsigned(v: &Value, path: &str) -> Result<u64, ConfigError> {
    v.as_u64().ok_or_else(|| type_err(path, "a non-negative integer", v))
}

fn boolean(v: &Value, path: &str) -> Result<bool, ConfigError> {
    v.as_bool().ok_or_else(|| type_err(path, "a boolean", v))
}

fn vector3(v: &Value, path: &str) -> Result<Vector3<f64>, ConfigError> {
    match v.as_sequence() {
        Some(s) if s.len() == 3 => {
            let c: Vec<f64> =
                s.iter().enumerate().map(|(i, x)| number(x, &format!("{path}[{i}]"))).collect::<Result<_, _>>()?;
            Ok(Vector3::new(c[0], c[1], c[2]))
        }
        _ => Err(type_err(path, "a 3-element sequence", v)),
    }
}

/// Config namespace of each module.
const MODULE_KEYS: [(&str, ModuleId); 7] = [
    ("fov", ModuleId::Fov),
    ("occlusion", ModuleId::Occlusion),
    ("structured_dropout", ModuleId::StructuredDropout),
    ("dropout", ModuleId::Dropout),
    ("sparsify", ModuleId::Sparsify),
    ("noise", ModuleId::Noise),
    ("motion", ModuleId::Motion),
];

fn module_fields(module: ModuleId) -> &'static [&'static str] {
    match module {
        ModuleId::Fov => &["max_azimuth_deg", "max_elevation_deg"],
        ModuleId::Occlusion => &["patches", "radius", "min_range", "max_range"],
        ModuleId::StructuredDropout => &["start_deg", "extent_deg"],
        ModuleId::Dropout => &["ratio"],
        ModuleId::Sparsify => &["stride"],
        ModuleId::Noise => &["sigma", "outlier_prob", "outlier_sigma"],
        ModuleId::Motion => &["linear_velocity", "angular_velocity", "use_imu"],
    }
}

fn apply_module_fields(
    module: ModuleId,
    m: &Mapping,
    path: &str,
    strict: bool,
    p: &mut DegradationParams,
) -> Result<(), ConfigError> {
    for (key, v, kp) in entries(m, path, module_fields(module), strict)? {
        match (module, key) {
            (ModuleId::Fov, "max_azimuth_deg") => p.fov.max_azimuth_deg = number(v, &kp)?,
            (ModuleId::Fov, "max_elevation_deg") => p.fov.max_elevation_deg = number(v, &kp)?,
            (ModuleId::Occlusion, "patches") => p.occlusion.patch_count = unsigned(v, &kp)? as usize,
            (ModuleId::Occlusion, "radius") => p.occlusion.patch_radius = number(v, &kp)?,
            (ModuleId::Occlusion, "min_range") => p.occlusion.min_range = number(v, &kp)?,
            (ModuleId::Occlusion, "max_range") => p.occlusion.max_range = number(v, &kp)?,
            (ModuleId::StructuredDropout, "start_deg") => {
                let start = match v {
                    Value::String(s) if s == "random" => SectorStart::Random,
                    other => SectorStart::Degrees(
                        other.as_f64().ok_or_else(|| type_err(&kp, "a number or \"random\"", other))?,
                    ),
                };
                let extent_deg = p.structured_sector.map_or(0.0, |s| s.extent_deg);
                p.structured_sector = Some(SectorParams { start, extent_deg });
            }
            (ModuleId::StructuredDropout, "extent_deg") => {
                let extent_deg = number(v, &kp)?;
                let start = p.structured_sector.map_or(SectorStart::Random, |s| s.start);
                p.structured_sector = Some(SectorParams { start, extent_deg });
            }
            (ModuleId::Dropout, "ratio") => p.dropout_ratio = number(v, &kp)?,
            (ModuleId::Sparsify, "stride") => p.sparsify_stride = unsigned(v, &kp)? as usize,
            (ModuleId::Noise, "sigma") => p.noise.sigma = number(v, &kp)?,
            (ModuleId::Noise, "outlier_prob") => p.noise.outlier_prob = number(v, &kp)?,
            (ModuleId::Noise, "outlier_sigma") => p.noise.outlier_sigma = number(v, &kp)?,
            (ModuleId::Motion, "linear_velocity") => p.motion.linear_velocity = vector3(v, &kp)?,
            (ModuleId::Motion, "angular_velocity") => p.motion.angular_velocity = vector3(v, &kp)?,
            (ModuleId::Motion, "use_imu") => p.motion.use_imu = boolean(v, &kp)?,
            _ => unreachable!("field list and match arms disagree"),
        }
    }
    Ok(())
}

/// Config key path of a parameter named in a [`ParamError`].
fn param_path(tier: Tier, field: &str) -> String {
    let (ns, key) = match field {
        "dropout_ratio" => ("dropout", "ratio"),
        "sparsify_stride" => ("sparsify", "stride"),
        "structured_sector.extent_deg" => ("structured_dropout", "extent_deg"),
        "structured_sector.start_deg" => ("structured_dropout", "start_deg"),
        "occlusion.patch_radius" => ("occlusion", "radius"),
        other => other.split_once('.').unwrap_or((other, "")),
    };
    format!("augmentations.{ns}.{tier}.{key}")
}

/// Parses a scenario config, filling unspecified fields from the built-in
/// tier table and validating every tier.
pub fn parse_scenario_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let doc: Value = serde_yaml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    config_from_value(&doc)
}

/// Like [`parse_scenario_config`], applying `key.path=value` overrides on
/// top of the document first.
pub fn parse_scenario_config_with_overrides(text: &str, overrides: &[String]) -> Result<ScenarioConfig, ConfigError> {
    let mut doc: Value = serde_yaml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    config_from_value(&doc)
}

/// Sets one `key.path=value` entry, creating intermediate mappings. The
/// value is read as a YAML scalar or flow collection.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| ConfigError::Override(assignment.to_string()))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(ConfigError::Override(assignment.to_string()));
    }
    let value: Value = serde_yaml::from_str(raw).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if !matches!(node, Value::Mapping(_)) {
            if node.is_null() {
                *node = Value::Mapping(Mapping::new());
            } else {
                return Err(type_err(&parts[..i].join("."), "a mapping", node));
            }
        }
        let Value::Mapping(m) = node else { unreachable!() };
        let k = Value::String(part.to_string());
        if i + 1 == parts.len() {
            m.insert(k, value);
            return Ok(());
        }
        node = m.entry(k).or_insert(Value::Null);
    }
    Ok(())
}

fn config_from_value(doc: &Value) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = ScenarioConfig::with_defaults(0);
    let Some(root) = as_mapping(doc, "")? else { return Ok(cfg) };

    let pipeline = root.get("pipeline").map(|v| as_mapping(v, "pipeline")).transpose()?.flatten();
    let strict = match pipeline.and_then(|p| p.get("strict")) {
        Some(v) => boolean(v, "pipeline.strict")?,
        None => true,
    };
    for (key, v, path) in entries(root, "", &["pipeline", "augmentations"], strict)? {
        let Some(m) = as_mapping(v, &path)? else { continue };
        match key {
            "pipeline" => {
                for (key, v, path) in entries(m, &path, &["seed", "order", "random_subset", "strict"], strict)? {
                    match key {
                        "seed" => cfg.global_seed = unsigned(v, &path)?,
                        "random_subset" => cfg.random_subset = boolean(v, &path)?,
                        "strict" => {}
                        "order" => {
                            let seq = match v {
                                Value::Null => &Vec::new(),
                                Value::Sequence(s) => s,
                                other => return Err(type_err(&path, "a sequence of module names", other)),
                            };
                            let mut chain = Vec::with_capacity(seq.len());
                            for (i, item) in seq.iter().enumerate() {
                                let ip = format!("{path}[{i}]");
                                let name = item.as_str().ok_or_else(|| type_err(&ip, "a module name", item))?;
                                let module: ModuleId =
                                    name.parse().map_err(|e: crate::model::UnknownModule| ConfigError::Invalid {
                                        path: ip.clone(),
                                        message: e.to_string(),
                                    })?;
                                if chain.contains(&module) {
                                    return Err(ConfigError::Invalid {
                                        path: ip,
                                        message: format!("module `{name}` listed twice"),
                                    });
                                }
                                chain.push(module);
                            }
                            cfg.module_chain = chain;
                        }
                        _ => unreachable!(),
                    }
                }
            }
            "augmentations" => {
                let names: Vec<&str> = MODULE_KEYS.iter().map(|(k, _)| *k).collect();
                for (key, v, path) in entries(m, &path, &names, strict)? {
                    let module = MODULE_KEYS.iter().find(|(k, _)| *k == key).unwrap().1;
                    let Some(tiers) = as_mapping(v, &path)? else { continue };
                    for (tier_name, v, tier_path) in entries(tiers, &path, &["light", "moderate", "heavy", "extreme"], strict)? {
                        let tier: Tier = tier_name.parse().unwrap();
                        if let Some(fields) = as_mapping(v, &tier_path)? {
                            apply_module_fields(module, fields, &tier_path, strict, cfg.params_mut(tier))?;
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
    }

    for tier in Tier::ALL {
        let params = cfg.params_mut(tier);
        if params.structured_sector.is_some_and(|s| s.extent_deg == 0.0) {
            params.structured_sector = None;
        }
        validate_params(params.clone()).map_err(|e: ParamError| ConfigError::Invalid {
            path: param_path(tier, e.field),
            message: format!("{} is out of range, expected {}", e.value, e.expected),
        })?;
    }
    Ok(cfg)
}

/// Fully expanded config in the file layout; parsing it yields `cfg` back.
pub fn config_document(cfg: &ScenarioConfig) -> serde_json::Value {
    let mut aug = serde_json::Map::new();
    for (ns, module) in MODULE_KEYS {
        let mut tiers = serde_json::Map::new();
        for tier in Tier::ALL {
            let p = cfg.params(tier);
            let v3 = |v: &Vector3<f64>| json!([v.x, v.y, v.z]);
            let fields = match module {
                ModuleId::Fov => {
                    json!({"max_azimuth_deg": p.fov.max_azimuth_deg, "max_elevation_deg": p.fov.max_elevation_deg})
                }
                ModuleId::Occlusion => json!({
                    "patches": p.occlusion.patch_count,
                    "radius": p.occlusion.patch_radius,
                    "min_range": p.occlusion.min_range,
                    "max_range": p.occlusion.max_range,
                }),
                ModuleId::StructuredDropout => match p.structured_sector {
                    Some(s) => json!({
                        "start_deg": match s.start {
                            SectorStart::Degrees(d) => json!(d),
                            SectorStart::Random => json!("random"),
                        },
                        "extent_deg": s.extent_deg,
                    }),
                    None => json!({"extent_deg": 0.0}),
                },
                ModuleId::Dropout => json!({"ratio": p.dropout_ratio}),
                ModuleId::Sparsify => json!({"stride": p.sparsify_stride}),
                ModuleId::Noise => json!({
                    "sigma": p.noise.sigma,
                    "outlier_prob": p.noise.outlier_prob,
                    "outlier_sigma": p.noise.outlier_sigma,
                }),
                ModuleId::Motion => json!({
                    "linear_velocity": v3(&p.motion.linear_velocity),
                    "angular_velocity": v3(&p.motion.angular_velocity),
                    "use_imu": p.motion.use_imu,
                }),
            };
            tiers.insert(tier.as_str().to_string(), fields);
        }
        aug.insert(ns.to_string(), serde_json::Value::Object(tiers));
    }
    json!({
        "pipeline": {
            "seed": cfg.global_seed,
            "order": cfg.module_chain.iter().map(|m| m.as_str()).collect::<Vec<_>>(),
            "random_subset": cfg.random_subset,
            "strict": true,
        },
        "augmentations": aug,
    })
}
