use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::features::{assemble_row, cell_evidence, source_outputs, CellEvidence, ROW_LAYOUT_VERSION};
use super::model::{TrainedModel, TrainingDiagnostics, MODEL_FORMAT_VERSION};
use super::PipelineError;
use crate::config::Config;
use crate::dataset::{window_ground_truth, Sample};
use crate::imaging::{sliding_rects, CellRect, Patch};
use crate::learn::CountRegressor;
use crate::sources::head::train_head_filter;
use crate::sources::interest::{
    build_codebook, estimate_rates, layout_tag, word_histogram, Codebook, Descriptor, RATE_FLOOR,
};
use crate::sources::{glcm, wavelet, SourceError};

/// Stage-specific seeds derived from the run seed.
fn stage_seed(seed: u64, stage: u64) -> u64 {
    seed ^ stage.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

struct TrainCell {
    patch: Patch<f64>,
    count: f64,
    evidence: CellEvidence,
}

fn stage_err(stage: &'static str) -> impl Fn(SourceError) -> PipelineError {
    move |error| PipelineError::Stage { stage, message: error.to_string() }
}

fn sample_windows(samples: &[&Sample], config: &Config) -> Result<Vec<(usize, CellRect, f64)>, PipelineError> {
    let mut out = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        let rects = sliding_rects(s.image.height(), s.image.width(), config.cell_size, config.stride())?;
        let counts = window_ground_truth(&s.annotation, &rects);
        out.extend(rects.into_iter().zip(counts).map(|(r, c)| (i, r, c as f64)));
    }
    Ok(out)
}

fn codebook_pool<'a>(cells: &'a [TrainCell], config: &Config, seed: u64) -> Vec<Descriptor<f64>> {
    let all: Vec<&'a Descriptor<f64>> = cells.iter().flat_map(|c| c.evidence.descriptors.iter()).collect();
    if all.len() <= config.codebook.max_descriptors {
        return all.into_iter().cloned().collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, all.len(), config.codebook.max_descriptors).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| all[i].clone()).collect()
}

/// Head windows centered on dots, and background windows holding no dot.
fn head_examples(samples: &[&Sample], window: usize, seed: u64) -> (Vec<Patch<f64>>, Vec<Patch<f64>>) {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = (window / 2) as f64;
    for s in samples {
        let (h, w) = (s.image.height(), s.image.width());
        if h < window || w < window {
            continue;
        }
        for &[x, y] in &s.annotation.points {
            let (r0, c0) = ((y - half).round(), (x - half).round());
            if r0 >= 0.0 && c0 >= 0.0 && r0 as usize + window <= h && c0 as usize + window <= w {
                if let Ok(p) = s.image.patch(r0 as usize, c0 as usize, window, window) {
                    pos.push(p);
                }
            }
        }
        let target = s.annotation.count().max(20);
        let mut found = 0;
        for _ in 0..target * 4 {
            if found >= target {
                break;
            }
            let r0 = rng.gen_range(0..=h - window);
            let c0 = rng.gen_range(0..=w - window);
            let rect = CellRect { row: r0, col: c0, height: window, width: window };
            if s.annotation.points.iter().any(|&[x, y]| rect.contains_point(x, y)) {
                continue;
            }
            if let Ok(p) = s.image.rect_patch(rect) {
                neg.push(p);
                found += 1;
            }
        }
    }
    (pos, neg)
}

/// Fits every stage in order: descriptors, codebook, Poisson rates, the three
/// per-source regressors, the head filter, and finally the fusion regressor on
/// densely sampled (overlapping) training cells.
pub fn train(samples: &[Sample], config: &Config, seed: u64) -> Result<TrainedModel, PipelineError> {
    config.validate()?;
    if samples.len() < 2 {
        return Err(PipelineError::Stage { stage: "data", message: format!("need at least 2 images, got {}", samples.len()) });
    }
    let mut config = config.clone();
    config.seed = seed;
    // Canonical order so the model does not depend on how the images were listed.
    let mut samples: Vec<&Sample> = samples.iter().collect();
    samples.sort_by(|a, b| a.id.cmp(&b.id));

    let windows = sample_windows(&samples, &config)?;
    let cells: Vec<TrainCell> = windows
        .par_iter()
        .map(|&(i, rect, count)| -> Result<TrainCell, PipelineError> {
            let patch = samples[i].image.rect_patch(rect)?;
            let evidence = cell_evidence(&patch, &config)?;
            Ok(TrainCell { patch, count, evidence })
        })
        .collect::<Result<_, _>>()?;
    let targets: Vec<f64> = cells.iter().map(|c| c.count).collect();
    let n_descriptors: usize = cells.iter().map(|c| c.evidence.descriptors.len()).sum();

    let pool = codebook_pool(&cells, &config, stage_seed(seed, 1));
    let codebook: Codebook<f64> = build_codebook(&pool, config.codebook.k, stage_seed(seed, 2), config.codebook.max_iter)
        .map_err(stage_err("codebook"))?;
    drop(pool);

    let histograms = cells
        .par_iter()
        .map(|c| word_histogram(&c.evidence.descriptors, &codebook))
        .collect::<Result<Vec<_>, _>>()
        .map_err(stage_err("codebook"))?;
    let is_crowd: Vec<bool> = targets.iter().map(|&t| t > 0.0).collect();
    let rates = estimate_rates(&histograms, &is_crowd, RATE_FLOOR).map_err(stage_err("poisson rates"))?;

    let fit = |stage: &'static str, layout: String, rows: Vec<Vec<f64>>, sub: u64| {
        let params = config.svr.params(rows.first().map_or(1, Vec::len));
        CountRegressor::fit(layout, &rows, &targets, &params, stage_seed(seed, sub))
            .map_err(|e| PipelineError::Stage { stage, message: e.to_string() })
    };
    let interest = fit("interest regressor", layout_tag(codebook.size()), histograms.iter().map(|h| h.to_real()).collect(), 3)?;
    let glcm_model = fit(
        "glcm regressor",
        glcm::layout_tag(config.glcm.levels),
        cells.iter().map(|c| c.evidence.glcm.to_vec()).collect(),
        4,
    )?;
    let wavelet_model = fit(
        "wavelet regressor",
        wavelet::LAYOUT.to_string(),
        cells.iter().map(|c| c.evidence.wavelet.energies.to_vec()).collect(),
        5,
    )?;

    let (pos, neg) = head_examples(&samples, config.head.window, stage_seed(seed, 6));
    let head = train_head_filter(&pos, &neg, config.head.window, config.head.max_examples, stage_seed(seed, 7))
        .map_err(stage_err("head filter"))?;

    let mut model = TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        row_layout: ROW_LAYOUT_VERSION.to_string(),
        descriptor_version: crate::sources::interest::DESCRIPTOR_VERSION.to_string(),
        config_hash: config.fingerprint(),
        config: config.clone(),
        codebook,
        rates,
        interest,
        glcm: glcm_model,
        wavelet: wavelet_model,
        head,
        fusion: CountRegressor {
            layout: String::new(),
            input: crate::learn::Standardizer { mean: vec![], scale: vec![] },
            target: crate::learn::Standardizer { mean: vec![0.0], scale: vec![1.0] },
            svr: crate::learn::SvrModel::constant(0, 0.0),
        },
        diagnostics: TrainingDiagnostics {
            images: samples.len(),
            cells: cells.len(),
            descriptors: n_descriptors,
            head_positives: pos.len(),
            head_negatives: neg.len(),
            converged: false,
        },
    };

    let rows = {
        let sources = model.sources();
        cells
            .par_iter()
            .map(|c| source_outputs(&c.patch, &c.evidence, &sources).map(|s| assemble_row(&c.evidence, &s).values))
            .collect::<Result<Vec<_>, _>>()?
    };
    model.fusion = fit("fusion regressor", ROW_LAYOUT_VERSION.to_string(), rows, 8)?;
    model.diagnostics.converged = [&model.interest, &model.glcm, &model.wavelet, &model.fusion]
        .iter()
        .all(|r| r.svr.converged);
    model.validate()?;
    Ok(model)
}
