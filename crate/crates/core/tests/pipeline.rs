use percept_core::pipeline::{
    color_breakup_offsets, compare_runs, run_prediction, run_stages, PanelKind, PanelPath, Reference,
};
use percept_core::{Error, RgbMode, RunConfig, RunResult};

fn judder_grid(v: f64, capture: f64) -> RunConfig {
    let mut c = RunConfig::default();
    c.stimulus.velocity_cm_per_s = v;
    c.display.capture_rate_hz = capture;
    c.grid.time_bins = Some(256);
    c.grid.space_bins = Some(512);
    c
}

fn tracking(v: f64, hold: f64) -> RunConfig {
    let mut c = RunConfig::default();
    c.stimulus.velocity_cm_per_s = v;
    c.display.hold_interval = hold;
    c.viewing.tracking = true;
    c
}

fn run(c: &RunConfig) -> RunResult {
    run_prediction::<f64>(c).unwrap()
}

fn increment(c: &RunConfig) -> f64 {
    c.derive().unwrap().channels[0].increment()
}

#[test]
fn slow_motion_on_fast_display_is_clean() {
    let c = RunConfig::default();
    let r = run(&c);
    assert!(r.report.all_clear(), "{:?}", r.report);
    assert!(r.metrics["reconstruction_rms_difference"] < 0.03 * increment(&c));
}

#[test]
fn faster_motion_judders_without_flicker() {
    let r = run(&judder_grid(10.0, 120.0));
    assert!(r.report.judder);
    assert!(!r.report.flicker);
    assert!(r.report.visible_replicates > 1);
    assert!(!r.report.edge_banding);
}

#[test]
fn low_capture_rate_judders() {
    assert!(run(&judder_grid(1.0, 30.0)).report.judder);
    assert!(!run(&judder_grid(1.0, 120.0)).report.judder);
}

#[test]
fn hold_does_not_remove_judder() {
    for h in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let mut c = judder_grid(10.0, 120.0);
        c.display.hold_interval = h;
        assert!(run(&c).report.judder, "hold {h}");
    }
}

#[test]
fn multi_flash_judder_bands_edges() {
    let mut c = judder_grid(10.0, 60.0);
    c.display.flash_count = 2;
    let r = run(&c);
    assert!(r.report.judder && r.report.edge_banding);
}

#[test]
fn visible_replicates_grow_with_speed() {
    let counts: Vec<usize> = [1.0, 2.0, 5.0, 10.0, 20.0]
        .iter()
        .map(|&v| run(&judder_grid(v, 120.0)).report.visible_replicates)
        .collect();
    assert!(counts.windows(2).all(|w| w[0] <= w[1]), "{counts:?}");
    assert!(counts[0] < counts[4]);
}

#[test]
fn visible_replicates_shrink_with_capture_rate() {
    let counts: Vec<usize> = [30.0, 60.0, 120.0, 240.0]
        .iter()
        .map(|&c| run(&judder_grid(1.0, c)).report.visible_replicates)
        .collect();
    assert!(counts.windows(2).all(|w| w[0] >= w[1]), "{counts:?}");
    assert!(counts[0] > counts[3]);
}

#[test]
fn tracking_blur_follows_hold() {
    let ratios: Vec<f64> = [0.1, 0.25, 0.5, 0.75, 1.0]
        .iter()
        .map(|&h| run(&tracking(20.0, h)).report.blur_ratio.unwrap())
        .collect();
    assert!(ratios.windows(2).all(|w| w[0] <= w[1]), "{ratios:?}");
    assert!(run(&tracking(20.0, 1.0)).report.motion_blur);
    assert!(!run(&tracking(20.0, 0.1)).report.motion_blur);
}

#[test]
fn blur_needs_tracking() {
    let mut c = tracking(20.0, 1.0);
    c.viewing.tracking = false;
    assert!(!run(&c).report.motion_blur);
}

#[test]
fn sequential_colour_breaks_up_and_correction_realigns() {
    let mut c = tracking(20.0, 0.5);
    c.display.rgb_mode = RgbMode::RgbSeq;
    let r = run(&c);
    let d = c.derive().unwrap();
    let expected = color_breakup_offsets(d.velocity_deg_s, c.display.capture_rate_hz)[1];
    let sep = r.report.color_separation_deg.unwrap();
    assert!(r.report.color_breakup);
    assert!((sep - expected).abs() < 0.1 * expected, "{sep} vs {expected}");

    c.display.color_offset_correction = true;
    let fixed = run(&c);
    assert!(fixed.report.color_separation_deg.unwrap() < 0.5 * d.pixel_deg);
    assert!(!fixed.report.color_breakup);
}

#[test]
fn breakup_only_reported_for_sequential_colour() {
    let mut c = tracking(20.0, 0.5);
    c.display.rgb_mode = RgbMode::RgbSimul;
    let r = run(&c);
    assert!(r.report.color_separation_deg.is_none());
    assert!(!r.report.color_breakup);
}

#[test]
fn runs_are_bit_identical() {
    let c = judder_grid(10.0, 60.0);
    let (a, b) = (run(&c), run(&c));
    for (p, q) in a.panels.iter().zip(&b.panels) {
        assert_eq!(p.to_le_f32_bytes(), q.to_le_f32_bytes());
    }
    assert_eq!(a.report, b.report);
    assert_eq!(a.metrics, b.metrics);
}

#[test]
fn single_precision_agrees_on_flags() {
    for c in [RunConfig::default(), judder_grid(10.0, 120.0), tracking(20.0, 1.0)] {
        let lo = run_prediction::<f32>(&c).unwrap();
        let hi = run(&c);
        assert_eq!(lo.report.judder, hi.report.judder);
        assert_eq!(lo.report.motion_blur, hi.report.motion_blur);
        assert_eq!(lo.report.flicker, hi.report.flicker);
    }
}

#[test]
fn memory_budget_is_enforced() {
    let mut c = RunConfig::default();
    c.grid.memory_budget_mb = 1.0;
    match run_prediction::<f64>(&c) {
        Err(Error::Resource { message }) => assert!(message.contains("recording length")),
        other => panic!("expected a resource error, got {other:?}"),
    }
}

#[test]
fn panels_share_axes_and_stay_positive() {
    let r = run(&judder_grid(10.0, 120.0));
    assert_eq!(r.panels.len(), 8);
    let stim = &r.panel(PanelPath::Continuous, PanelKind::Stimulus).meta;
    let spec = &r.panel(PanelPath::Continuous, PanelKind::InputSpectrum).meta;
    for p in &r.panels {
        let want = if p.meta.kind.is_spectrum() { spec } else { stim };
        assert_eq!(p.meta.rows, want.rows);
        assert_eq!(p.meta.cols, want.cols);
        assert_eq!(p.meta.shape, want.shape);
    }
    assert!(r.metrics["reconstruction_min"] > -1e-9);
    assert!(r.metrics["imaginary_residue"] < 1e-9);
}

#[test]
fn clean_runs_filter_to_the_same_spectrum() {
    // Without visible replicates the two filtered spectra differ only by the
    // emission aperture on the baseband: the magnitude of `Z(-r u)` departs
    // from one by well under a percent where the energy is.
    let c = RunConfig::default();
    let s = run_stages::<f64>(&c).unwrap();
    let a = &s.continuous.filtered;
    let b = &s.sampled.filtered;
    let top = a.data.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    for (za, zb) in a.data.iter().zip(&b.data) {
        if za.norm() >= 0.1 * top {
            worst = worst.max((za.norm() - zb.norm()).abs() / za.norm());
        }
    }
    assert!(worst < 1e-2, "{worst}");
    let diff: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).norm_sqr()).sum();
    assert!(diff < 1e-2 * a.energy());
}

#[test]
fn self_comparison_is_zero() {
    let r = run(&judder_grid(10.0, 120.0));
    let cmp = compare_runs(Some(&r), &[&r]).unwrap();
    assert_eq!(cmp.entries[0].l2, 0.0);
    assert!(cmp.entries[0].difference.data.iter().all(|&v| v == 0.0));
    assert!(cmp.entries[0].metric_deltas.values().all(|&d| d == 0.0));
}

#[test]
fn continuous_reference_by_default() {
    let c = RunConfig::default();
    let r = run(&c);
    let cmp = compare_runs(None, &[&r]).unwrap();
    assert_eq!(cmp.reference, Reference::Continuous);
    assert!(cmp.entries[0].l2 < 0.03 * increment(&c));
}

#[test]
fn difference_shrinks_with_capture_rate() {
    let runs: Vec<RunResult> = [30.0, 60.0, 120.0]
        .iter()
        .map(|&rate| {
            let mut c = RunConfig::default();
            c.display.capture_rate_hz = rate;
            run(&c)
        })
        .collect();
    let refs: Vec<&RunResult> = runs.iter().collect();
    let cmp = compare_runs(None, &refs).unwrap();
    let l2: Vec<f64> = cmp.entries.iter().map(|e| e.l2).collect();
    assert!(l2[0] > l2[1] && l2[1] > l2[2], "{l2:?}");
}

#[test]
fn master_on_other_axes_is_resampled() {
    let a = run(&tracking(20.0, 1.0));
    let b = run(&tracking(20.0, 0.1));
    let cmp = compare_runs(Some(&a), &[&b]).unwrap();
    let e = &cmp.entries[0];
    assert!(e.resampled);
    assert_eq!(e.difference.meta.shape, a.panel(PanelPath::Sampled, PanelKind::Reconstruction).meta.shape);
    assert!(e.l2 > 0.0);
    assert!(e.metric_deltas["blur_ratio"] < 0.0);
}

#[test]
fn incompatible_runs_are_rejected() {
    let a = run(&RunConfig::default());
    let b = run(&tracking(1.0, 0.5));
    assert!(matches!(compare_runs(Some(&a), &[&b]), Err(Error::Incompatible(_))));
    let mut c = a.clone();
    c.config.mode = percept_core::params::RunMode::Stereo;
    assert!(matches!(compare_runs(Some(&a), &[&c]), Err(Error::Incompatible(_))));
}
