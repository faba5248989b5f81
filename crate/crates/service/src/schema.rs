//! Versioned JSON form of [`RunConfig`].

use percept_core::params::SCHEMA_VERSION;
use percept_core::RunConfig;
use serde_json::{json, Value};

use crate::error::{Result, ServiceError};

/// Parses a configuration document, checking its version and shape but not
/// the physical constraints (see [`RunConfig::validate`]).
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let value: Value = serde_json::from_str(text).map_err(|e| ServiceError::Schema(format!("invalid JSON: {e}")))?;
    config_from_value(value)
}

pub fn config_from_value(value: Value) -> Result<RunConfig> {
    if !value.is_object() {
        return Err(ServiceError::Schema("configuration must be a JSON object".into()));
    }
    match value.get("schema_version") {
        None => return Err(ServiceError::Schema("schema_version is required".into())),
        Some(v) if v.as_u64() != Some(SCHEMA_VERSION as u64) => {
            return Err(ServiceError::Schema(format!(
                "unsupported schema_version {v}; this build reads version {SCHEMA_VERSION}"
            )))
        }
        _ => {}
    }
    serde_json::from_value(value).map_err(|e| ServiceError::Schema(e.to_string()))
}

/// Compact JSON with object keys sorted.
pub fn canonical_json(value: &Value) -> String {
    // serde_json keeps maps ordered by key unless `preserve_order` is enabled
    let sorted: Value = serde_json::from_str(&value.to_string()).unwrap_or(Value::Null);
    sorted.to_string()
}

pub fn config_json(config: &RunConfig) -> Value {
    serde_json::to_value(config).unwrap_or(Value::Null)
}

fn number(min: Option<f64>, exclusive_min: Option<f64>, max: Option<f64>, default: Value) -> Value {
    let mut v = json!({ "type": "number", "default": default });
    if let Some(m) = min {
        v["minimum"] = json!(m);
    }
    if let Some(m) = exclusive_min {
        v["exclusiveMinimum"] = json!(m);
    }
    if let Some(m) = max {
        v["maximum"] = json!(m);
    }
    v
}

fn object(properties: Value) -> Value {
    json!({ "type": "object", "additionalProperties": false, "properties": properties })
}

/// JSON Schema (draft 2020-12) of the configuration document. Ranges mirror
/// the checks of [`RunConfig::validate`] that depend on a single field.
pub fn config_schema() -> Value {
    let d = RunConfig::default();
    let stereo = percept_core::StereoParams::default();
    let timing = json!({ "enum": ["SIMULTANEOUS", "ALTERNATING"] });
    json!({
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "RunConfig",
        "type": "object",
        "additionalProperties": false,
        "required": ["schema_version"],
        "properties": {
            "schema_version": { "const": SCHEMA_VERSION },
            "id": { "type": "string" },
            "mode": { "enum": ["NON_STEREO", "STEREO"], "default": "NON_STEREO" },
            "backend": { "enum": ["auto", "cpu", "accelerator"], "default": "auto" },
            "stimulus": object(json!({
                "velocity_cm_per_s": number(None, None, None, json!(d.stimulus.velocity_cm_per_s)),
                "width_cm": number(None, Some(0.0), None, json!(d.stimulus.width_cm)),
                "recording_length_s": number(None, Some(0.0), None, json!(d.stimulus.recording_length_s)),
                "l_max": number(None, Some(0.0), None, json!(d.stimulus.l_max)),
            })),
            "display": object(json!({
                "flash_count": { "type": "integer", "minimum": 1, "default": d.display.flash_count },
                "rgb_mode": { "enum": ["BW", "RGB_SEQ", "RGB_SIMUL"], "default": "BW" },
                "capture_rate_hz": number(None, Some(0.0), None, json!(d.display.capture_rate_hz)),
                "hold_interval": number(Some(0.0), None, Some(1.0), json!(d.display.hold_interval)),
                "pixel_response_s": number(Some(0.0), None, None, json!(d.display.pixel_response_s)),
                "dpi": number(None, Some(0.0), None, json!(d.display.dpi)),
                "fill_factor": number(None, Some(0.0), Some(1.0), json!(d.display.fill_factor)),
                "contrast": {
                    "type": "array",
                    "items": { "type": "number", "exclusiveMinimum": 0 },
                    "minItems": 1,
                    "maxItems": 3,
                    "default": d.display.contrast,
                },
                "color_offset_correction": { "type": "boolean", "default": false },
            })),
            "viewing": object(json!({
                "distance_cm": number(None, Some(0.0), None, json!(d.viewing.distance_cm)),
                "tracking": { "type": "boolean", "default": false },
                "angle_convention": { "enum": ["CENTERED", "TANGENT"] },
            })),
            "stereo": object(json!({
                "capture_mode": { "allOf": [timing.clone()], "default": "SIMULTANEOUS" },
                "presentation_mode": { "allOf": [timing], "default": "ALTERNATING" },
                "nominal_disparity_deg": number(None, None, None, json!(stereo.nominal_disparity_deg)),
                "eye_order": { "enum": ["LEFT_FIRST", "RIGHT_FIRST"], "default": "LEFT_FIRST" },
            })),
            "grid": object(json!({
                "spatial_samples_per_pixel": { "type": "integer", "minimum": 2, "default": d.grid.spatial_samples_per_pixel },
                "temporal_samples_per_frame": { "type": "integer", "minimum": 4, "default": d.grid.temporal_samples_per_frame },
                "padding_factor": number(Some(1.0), None, None, json!(d.grid.padding_factor)),
                "time_bins": { "type": "integer", "minimum": 8 },
                "space_bins": { "type": "integer", "minimum": 8 },
                "memory_budget_mb": number(None, Some(0.0), None, json!(d.grid.memory_budget_mb)),
            })),
            "thresholds": object(json!({
                "blur_ratio": number(None, Some(0.0), None, json!(d.thresholds.blur_ratio)),
                "breakup_pixels": number(None, Some(0.0), None, json!(d.thresholds.breakup_pixels)),
                "frequency_guard_bins": number(None, Some(0.0), None, json!(d.thresholds.frequency_guard_bins)),
                "replicate_energy_fraction": number(None, Some(0.0), None, json!(d.thresholds.replicate_energy_fraction)),
            })),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let text = serde_json::to_string(&RunConfig::default()).unwrap();
        assert_eq!(parse_config(&text).unwrap(), RunConfig::default());
    }

    #[test]
    fn version_is_required_and_checked() {
        assert!(matches!(parse_config("{}"), Err(ServiceError::Schema(_))));
        assert!(matches!(parse_config(r#"{"schema_version": 2}"#), Err(ServiceError::Schema(_))));
        assert!(parse_config(r#"{"schema_version": 1}"#).is_ok());
    }

    #[test]
    fn unknown_fields_and_bad_types_are_schema_errors() {
        let e = parse_config(r#"{"schema_version": 1, "display": {"dpii": 3}}"#).unwrap_err();
        assert!(e.to_string().contains("dpii"));
        assert!(matches!(parse_config(r#"{"schema_version": 1, "mode": "MONO"}"#), Err(ServiceError::Schema(_))));
        assert!(matches!(parse_config("[1]"), Err(ServiceError::Schema(_))));
        assert!(matches!(parse_config("{"), Err(ServiceError::Schema(_))));
    }

    #[test]
    fn canonical_form_sorts_keys() {
        let v: Value = serde_json::from_str(r#"{"b": 1, "a": {"d": 2, "c": 3}}"#).unwrap();
        assert_eq!(canonical_json(&v), r#"{"a":{"c":3,"d":2},"b":1}"#);
    }

    #[test]
    fn schema_lists_every_default_field() {
        let schema = config_schema();
        let defaults = config_json(&RunConfig::stereo_default());
        for (section, body) in defaults.as_object().unwrap() {
            let props = &schema["properties"][section];
            assert!(!props.is_null(), "{section}");
            if let Some(fields) = body.as_object() {
                for key in fields.keys() {
                    assert!(!props["properties"][key].is_null(), "{section}.{key}");
                }
            }
        }
    }
}
