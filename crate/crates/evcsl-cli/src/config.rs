//! Algorithm config resolution: preset lookup plus JSON field overrides.

use std::path::Path;

use anyhow::{bail, Context, Result};
use evcsl::presets::{preset, AlgoSpec};
use serde_json::Value;

/// Default preset per algorithm when only `--algo` is given: the stronger
/// of the two tuned configurations.
fn default_preset(algo: &str) -> Option<&'static str> {
    match algo {
        "ga" => Some(evcsl::presets::GA_2),
        "vns" => Some(evcsl::presets::VNS_2),
        _ => None,
    }
}

/// Resolves the algorithm to run from `--algo`, `--preset` and `--config`.
///
/// Precedence: the preset (or the algorithm's default preset) provides the
/// base configuration, then every field present in the `--config` JSON
/// object overrides the base. The JSON may carry an `algorithm` key, which
/// must agree with `--algo`/`--preset` when those are present.
pub fn resolve_algo(
    algo_flag: Option<&str>,
    preset_name: Option<&str>,
    config_path: Option<&Path>,
) -> Result<(AlgoSpec, String)> {
    let patch: Option<Value> = match config_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config {}", path.display()))?;
            let value: Value = serde_json::from_str(&text)
                .with_context(|| format!("cannot parse config {}", path.display()))?;
            if !value.is_object() {
                bail!("config {} must be a JSON object", path.display());
            }
            Some(value)
        }
        None => None,
    };

    let patch_algo = patch
        .as_ref()
        .and_then(|v| v.get("algorithm"))
        .map(|v| {
            v.as_str()
                .map(str::to_string)
                .ok_or_else(|| anyhow::anyhow!("config field `algorithm` must be a string"))
        })
        .transpose()?;

    // Which algorithm? --preset wins, then --algo, then the config file.
    let preset_algo = preset_name.map(|name| {
        preset(name)
            .map(|spec| spec.algorithm_name().to_string())
            .ok_or_else(|| {
                anyhow::anyhow!(
                    "unknown preset `{name}` (available: {})",
                    evcsl::presets::preset_names().join(", ")
                )
            })
    });
    let preset_algo = preset_algo.transpose()?;

    let algorithm = preset_algo
        .clone()
        .or_else(|| algo_flag.map(str::to_string))
        .or(patch_algo.clone())
        .context("specify the solver with --preset, --algo or a config file")?;

    if let Some(flag) = algo_flag {
        if flag != algorithm {
            bail!("--algo {flag} conflicts with preset/config algorithm `{algorithm}`");
        }
    }
    if let Some(pa) = &patch_algo {
        if *pa != algorithm {
            bail!("config algorithm `{pa}` conflicts with selected algorithm `{algorithm}`");
        }
    }

    let base_name = match preset_name {
        Some(name) => name.to_string(),
        None => default_preset(&algorithm)
            .with_context(|| format!("unknown algorithm `{algorithm}` (use ga or vns)"))?
            .to_string(),
    };
    let base = preset(&base_name).expect("base preset exists");

    let spec = match patch {
        None => base,
        Some(patch) => apply_patch(base, patch)?,
    };
    spec.validate()?;

    let label = if config_path.is_some() {
        format!("{base_name}+custom")
    } else {
        base_name
    };
    Ok((spec, label))
}

/// Overrides fields of `base` with the entries of `patch`. Unknown fields
/// are rejected so typos cannot silently fall back to preset values.
fn apply_patch(base: AlgoSpec, patch: Value) -> Result<AlgoSpec> {
    let mut merged = serde_json::to_value(base).expect("config serializes");
    let target = merged.as_object_mut().expect("config is an object");
    let Value::Object(fields) = patch else {
        bail!("config must be a JSON object");
    };
    for (key, value) in fields {
        if key == "algorithm" {
            continue; // validated by the caller
        }
        if !target.contains_key(&key) {
            bail!(
                "config field `{key}` is not a parameter of this algorithm (known: {})",
                target
                    .keys()
                    .filter(|k| *k != "algorithm")
                    .cloned()
                    .collect::<Vec<_>>()
                    .join(", ")
            );
        }
        target.insert(key, value);
    }
    serde_json::from_value(merged).context("config override produced an invalid configuration")
}
