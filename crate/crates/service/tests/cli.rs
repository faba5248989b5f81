use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use percept_service::server::{AppState, ServiceConfig};
use serde_json::{json, Value};

fn percept(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_percept"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, v.to_string()).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr_json(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text.lines().rev().find(|l| l.starts_with('{')).unwrap_or_else(|| panic!("no JSON in {text}"));
    serde_json::from_str(line).unwrap()
}

const PANELS: [&str; 8] = [
    "continuous_stimulus",
    "continuous_input_spectrum",
    "continuous_filtered_spectrum",
    "continuous_reconstruction",
    "sampled_stimulus",
    "sampled_input_spectrum",
    "sampled_filtered_spectrum",
    "sampled_reconstruction",
];

#[test]
fn clean_run_writes_eight_panels_and_a_clear_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &json!({ "schema_version": 1 }));
    let out = dir.path().join("out");
    let o = percept(&["run", "-c", s(&cfg), "-o", s(&out), "--backend", "cpu"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["all_clear"], true);
    for name in PANELS {
        for ext in ["f32", "json", "png"] {
            assert!(out.join("panels").join(format!("{name}.{ext}")).is_file(), "{name}.{ext}");
        }
    }
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    for flag in ["flicker", "judder", "edge_banding", "motion_blur", "color_breakup"] {
        assert_eq!(report[flag], false, "{flag}");
    }
    assert!(out.join("metrics.json").is_file());
    assert!(out.join("csf.json").is_file());
    assert_eq!(std::fs::read_to_string(out.join("config.json")).unwrap(), r#"{"schema_version":1}"#);
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (json!({ "schema_version": 1, "display": { "dpii": 1 } }), 2, "schema"),
        (json!({ "schema_version": 3 }), 2, "schema"),
        (
            json!({ "schema_version": 1, "display": { "hold_interval": 0.1, "pixel_response_s": 0.01 } }),
            3,
            "validation",
        ),
        (json!({ "schema_version": 1, "grid": { "memory_budget_mb": 1 } }), 4, "resource"),
    ];
    for (i, (cfg, code, kind)) in cases.into_iter().enumerate() {
        let path = write_config(dir.path(), &format!("c{i}.json"), &cfg);
        let out = dir.path().join(format!("out{i}"));
        let o = percept(&["run", "-c", s(&path), "-o", s(&out)]);
        assert_eq!(o.status.code(), Some(code), "{cfg}");
        let err = stderr_json(&o);
        assert_eq!(err["kind"], kind);
        let written: Value = serde_json::from_str(&std::fs::read_to_string(out.join("error.json")).unwrap()).unwrap();
        assert_eq!(written, err);
        if kind == "validation" {
            assert!(err["message"].as_str().unwrap().contains("hold_interval * field_period >= 2 * pixel_response_s"));
        }
    }
    let o = percept(&["run", "-c", "/definitely/not/here.json", "-o", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(percept(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn run_with_master_writes_a_comparison_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let run = write_config(dir.path(), "run.json", &json!({ "schema_version": 1, "display": { "capture_rate_hz": 30.0 } }));
    let master = write_config(dir.path(), "master.json", &json!({ "schema_version": 1 }));
    let out = dir.path().join("out");
    let o = percept(&["run", "-c", s(&run), "-o", s(&out), "--compare", s(&master)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let bundle = out.join("comparison");
    let cmp: Value = serde_json::from_str(&std::fs::read_to_string(bundle.join("comparison.json")).unwrap()).unwrap();
    assert_eq!(cmp["reference"]["kind"], "run");
    assert!(cmp["entries"][0]["l2"].as_f64().unwrap() > 0.0);
    let panel = cmp["entries"][0]["panel"].as_str().unwrap();
    assert!(bundle.join("panels").join(format!("{panel}.f32")).is_file());
}

#[test]
fn compare_accepts_run_directories_and_configs() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_config(dir.path(), "a.json", &json!({ "schema_version": 1, "display": { "capture_rate_hz": 60.0 } }));
    let out_a = dir.path().join("a");
    assert!(percept(&["run", "-c", s(&a), "-o", s(&out_a)]).status.success());
    let b = write_config(dir.path(), "b.json", &json!({ "schema_version": 1, "display": { "capture_rate_hz": 30.0 } }));
    let out = dir.path().join("cmp");
    let o = percept(&["compare", "-c", s(&out_a), "-c", s(&b), "-o", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cmp: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(cmp["reference"]["kind"], "continuous");
    assert_eq!(cmp["entries"].as_array().unwrap().len(), 2);
    let l2: Vec<f64> = cmp["entries"].as_array().unwrap().iter().map(|e| e["l2"].as_f64().unwrap()).collect();
    assert!(l2[1] > l2[0], "{l2:?}");
}

#[test]
fn stereo_command_writes_the_disparity_series() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = percept_core::RunConfig::stereo_default();
    c.stimulus.velocity_cm_per_s = 10.0;
    c.display.capture_rate_hz = 60.0;
    let cfg = write_config(dir.path(), "s.json", &serde_json::to_value(&c).unwrap());
    let out = dir.path().join("out");
    let o = percept(&["stereo", "-c", s(&cfg), "-o", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("disparity.csv")).unwrap();
    assert!(csv.starts_with("time_s,disparity_deg,pairing\n"));
    assert!(csv.lines().count() > 2);
    assert!(out.join("stereo.png").is_file());
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((summary["metrics"]["error_arcmin"].as_f64().unwrap() + 5.655).abs() < 0.01);

    let flat = write_config(dir.path(), "flat.json", &json!({ "schema_version": 1 }));
    let o = percept(&["stereo", "-c", s(&flat), "-o", s(&dir.path().join("x"))]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stderr_json(&o)["field"], "mode");
}

#[test]
fn csf_command_exports_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("csf");
    let o = percept(&["csf", "-o", s(&out), "-l", "0.5", "-l", "160", "--points", "16"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let spatial = std::fs::read_to_string(out.join("csf_spatial.csv")).unwrap();
    assert_eq!(spatial.lines().count(), 1 + 2 * 16);
    for f in ["csf_temporal.csv", "csf_surface.csv", "csf_spatial.png", "csf_surface_1.png", "csf_models.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let models: Value = serde_json::from_str(&std::fs::read_to_string(out.join("csf_models.json")).unwrap()).unwrap();
    let peaks: Vec<f64> = models["models"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["combined_peak"].as_f64().unwrap())
        .collect();
    assert!(peaks[1] > peaks[0]);
}

#[test]
fn cli_and_service_write_identical_panels() {
    let dir = tempfile::tempdir().unwrap();
    let config = json!({ "schema_version": 1, "stimulus": { "velocity_cm_per_s": 5.0 }, "display": { "capture_rate_hz": 60.0 } });
    let cfg = write_config(dir.path(), "c.json", &config);
    let cli_out = dir.path().join("cli");
    assert!(percept(&["run", "-c", s(&cfg), "-o", s(&cli_out)]).status.success());

    let data = dir.path().join("service");
    let rt = tokio::runtime::Runtime::new().unwrap();
    let state = AppState::new(&ServiceConfig {
        data_dir: data.clone(),
        workers: 1,
        queue_capacity: 2,
    })
    .unwrap();
    let id = rt.block_on(async {
        use axum::body::Body;
        use axum::http::Request;
        use http_body_util::BodyExt;
        use tower::ServiceExt;
        let app = percept_service::server::router(state.clone());
        let req = Request::post("/runs").body(Body::from(config.to_string())).unwrap();
        let resp = app.oneshot(req).await.unwrap();
        let body: Value = serde_json::from_slice(&resp.into_body().collect().await.unwrap().to_bytes()).unwrap();
        let id = body["run_id"].as_str().unwrap().to_string();
        let start = Instant::now();
        while !state.store().get(&id).unwrap().status.is_final() {
            assert!(start.elapsed() < Duration::from_secs(120));
            tokio::time::sleep(Duration::from_millis(20)).await;
        }
        id
    });
    let svc_out = state.store().run_dir(&id);
    for name in PANELS {
        for ext in ["f32", "json", "png"] {
            let file = format!("panels/{name}.{ext}");
            let a = std::fs::read(cli_out.join(&file)).unwrap();
            let b = std::fs::read(svc_out.join(&file)).unwrap();
            assert!(a == b, "{file} differs");
        }
    }
    for file in ["report.json", "metrics.json", "csf.json", "config.json"] {
        assert_eq!(std::fs::read(cli_out.join(file)).unwrap(), std::fs::read(svc_out.join(file)).unwrap(), "{file}");
    }
}
