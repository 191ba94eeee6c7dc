mod common;

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crowdcount::config::Config;
use crowdcount::dataset::Sample;
use crowdcount::imaging::{GrayImage, Patch};
use crowdcount::pipeline::{
    column_names, count_image, cross_validate, evaluate_model, extract_cell_row, train, ModelError, PipelineError,
    TrainedModel,
};
use crowdcount::synth::SynthParams;

fn config() -> Config {
    let mut c = Config::new();
    c.cell_size = 32;
    c.sampling.stride = Some(16);
    c.codebook.k = 20;
    c.codebook.max_descriptors = 3000;
    c
}

fn data() -> &'static (Vec<Sample>, TrainedModel) {
    static DATA: OnceLock<(Vec<Sample>, TrainedModel)> = OnceLock::new();
    DATA.get_or_init(|| {
        let samples = common::synth_samples(&SynthParams {
            width: 128,
            height: 128,
            ..SynthParams::new(12, 10, 80, 41)
        });
        let model = train(&samples[..10], &config(), 3).unwrap();
        (samples, model)
    })
}

#[test]
fn constant_cell_row_is_finite_with_no_peaks_or_heads() {
    let (_, model) = data();
    let row = extract_cell_row(&Patch::filled(32, 32, 0.4).unwrap(), &model.sources()).unwrap();
    let names = column_names();
    assert_eq!(row.values.len(), names.len());
    assert!(row.values.iter().all(|v| v.is_finite()));
    let col = |n: &str| row.values[names.iter().position(|c| c == n).unwrap()];
    assert_eq!(col("fourier_maxima"), 0.0);
    for n in ["eta_head", "head_scale_mean", "head_scale_var", "head_conf_mean", "head_conf_var"] {
        assert_eq!(col(n), 0.0);
    }
}

#[test]
fn blob_cell_has_interest_and_fourier_evidence() {
    let (_, model) = data();
    let spots: Vec<_> = (0..4).map(|k| (8.0 + 16.0 * (k / 2) as f64, 8.0 + 16.0 * (k % 2) as f64, 1.6, 0.65)).collect();
    let p = common::blob_patch(32, 32, 0.2, &spots);
    let a = extract_cell_row(&p, &model.sources()).unwrap();
    let names = column_names();
    let col = |n: &str| a.values[names.iter().position(|c| c == n).unwrap()];
    assert!(col("interest_count") > 0.0);
    assert!(col("fourier_maxima") > 0.0);
    assert_eq!(a, extract_cell_row(&p, &model.sources()).unwrap());
}

#[test]
fn training_is_deterministic_and_order_free() {
    let (samples, model) = data();
    let again = train(&samples[..10], &config(), 3).unwrap();
    assert_eq!(again.digest(), model.digest());
    let mut reversed = samples[..10].to_vec();
    reversed.reverse();
    let flipped = train(&reversed, &config(), 3).unwrap();
    for s in &samples[10..] {
        let a = count_image(&s.image, model).unwrap().total;
        let b = count_image(&s.image, &flipped).unwrap().total;
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn totals_are_nonnegative_cell_sums() {
    let (samples, model) = data();
    for s in samples {
        let c = count_image(&s.image, model).unwrap();
        assert!(c.cells.iter().all(|e| e.count >= 0.0));
        let sum: f64 = c.cells.iter().map(|e| e.count).sum();
        assert_eq!(sum, c.total);
        let area: usize = c.cells.iter().map(|e| e.rect.area()).sum();
        assert_eq!(area, s.image.width() * s.image.height());
    }
}

#[test]
fn four_blobs_per_cell_count_near_sixteen() {
    let (_, model) = data();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let spots: Vec<_> = (0..16)
        .map(|k| {
            let (cell, j) = (k / 4, k % 4);
            let r = 16.0 * (cell / 2) as f64 * 2.0 + 8.0 + 16.0 * (j / 2) as f64;
            let c = 16.0 * (cell % 2) as f64 * 2.0 + 8.0 + 16.0 * (j % 2) as f64;
            (r + rng.gen_range(-2.0..2.0), c + rng.gen_range(-2.0..2.0), 1.6, rng.gen_range(0.5..0.8))
        })
        .collect();
    let p = common::blob_patch(64, 64, 0.2, &spots);
    let data: Vec<f64> = p.data().iter().map(|v| (v + rng.gen_range(-0.03..0.03)).clamp(0.0, 1.0)).collect();
    let img = GrayImage::new(64, 64, data).unwrap();
    let c = count_image(&img, model).unwrap();
    assert_eq!(c.cells.len(), 4);
    assert!((c.total - 16.0).abs() <= 4.0, "total {}", c.total);
}

#[test]
fn incompatible_configs_and_models_are_refused() {
    let (_, model) = data();
    let mut other = model.config.clone();
    other.cell_size = 64;
    assert!(matches!(model.check_compatible(&other), Err(ModelError::ConfigMismatch { .. })));
    other = model.config.clone();
    other.seed += 1;
    model.check_compatible(&other).unwrap();

    let mut broken: serde_json::Value = serde_json::from_slice(&model.to_json()).unwrap();
    broken["codebook"]["centroids"].as_array_mut().unwrap().pop();
    let bytes = serde_json::to_vec(&broken).unwrap();
    assert!(matches!(TrainedModel::from_json(&bytes), Err(ModelError::Inconsistent(_))));
    broken = serde_json::from_slice(&model.to_json()).unwrap();
    broken["format_version"] = 99.into();
    assert!(matches!(
        TrainedModel::from_json(&serde_json::to_vec(&broken).unwrap()),
        Err(ModelError::FormatVersion { .. })
    ));
}

#[test]
fn training_needs_two_images() {
    let (samples, _) = data();
    assert!(matches!(train(&samples[..1], &config(), 0), Err(PipelineError::Stage { .. })));
}

#[test]
fn crossval_tests_every_image_once() {
    let (samples, _) = data();
    let subset = &samples[..6];
    let mut cfg = config();
    cfg.sampling.stride = Some(32);
    let cv = cross_validate(subset, 3, 8, &cfg).unwrap();
    assert_eq!(cv.folds.len(), 3);
    let mut ids: Vec<_> = cv.folds.iter().flat_map(|f| f.report.images.iter().map(|r| r.image_id.clone())).collect();
    ids.sort();
    let mut expect: Vec<_> = subset.iter().map(|s| s.id.clone()).collect();
    expect.sort();
    assert_eq!(ids, expect);
    let n: usize = cv.folds.iter().map(|f| f.report.image_summary.n).sum();
    assert_eq!(cv.pooled.image_summary.n, n);
    assert_eq!(cv.pooled.patches.len(), cv.folds.iter().map(|f| f.report.patches.len()).sum::<usize>());
    for f in &cv.folds {
        let mut test: Vec<_> = f.report.images.iter().map(|r| r.image_id.as_str()).collect();
        let mut listed: Vec<_> = f.test_ids.iter().map(String::as_str).collect();
        test.sort();
        listed.sort();
        assert_eq!(test, listed);
    }
}

#[test]
fn evaluation_mean_is_the_mean_of_image_errors() {
    let (samples, model) = data();
    let report = evaluate_model(&samples[10..], model).unwrap();
    let direct = report.images.iter().map(|r| r.ae).sum::<f64>() / report.images.len() as f64;
    assert_eq!(report.image_summary.mean_ae, direct);
    let zero_gt = report.patches.iter().filter(|p| p.gt == 0.0).count();
    assert_eq!(report.patch_summary.nae_excluded, zero_gt);
}
