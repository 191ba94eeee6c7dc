mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crowdcount::imaging::Patch;
use crowdcount::sources::fourier::{fourier_analyze, low_pass, FourierParams};

fn params(cutoff: f64) -> FourierParams {
    FourierParams { cutoff, ..FourierParams::default() }
}

#[test]
fn lattice_peaks_sit_on_blob_centers() {
    let out = fourier_analyze(&common::blob_lattice(2.0, 8.0), &params(0.25)).unwrap();
    let mut peaks = out.peaks.clone();
    peaks.sort_unstable();
    let expect: Vec<_> = (0..16).map(|k| (8 + 16 * (k / 4), 8 + 16 * (k % 4))).collect();
    assert_eq!(peaks, expect);
}

#[test]
fn counts_do_not_grow_as_the_cutoff_tightens() {
    for sigma in [1.5, 1.75, 2.0] {
        let p = common::blob_lattice(sigma, 8.0);
        let mut last = f64::INFINITY;
        for cutoff in [1.0, 0.75, 0.5, 0.35, 0.25] {
            let n = fourier_analyze(&p, &params(cutoff)).unwrap().maxima_count;
            assert!(n <= last, "sigma {sigma} cutoff {cutoff}: {n} > {last}");
            last = n;
        }
    }
}

#[test]
fn peaks_follow_a_translation() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..10 {
        let blobs: Vec<_> = (0..6)
            .map(|_| (rng.gen_range(24.0..40.0), rng.gen_range(24.0..40.0), rng.gen_range(1.5..2.5), rng.gen_range(0.5..1.0)))
            .collect();
        let (dr, dc) = (rng.gen_range(-8..=8isize), rng.gen_range(-8..=8isize));
        let moved: Vec<_> = blobs.iter().map(|&(r, c, s, a)| (r + dr as f64, c + dc as f64, s, a)).collect();
        let a = fourier_analyze(&common::blob_patch(64, 64, 0.0, &blobs), &params(0.35)).unwrap();
        let b = fourier_analyze(&common::blob_patch(64, 64, 0.0, &moved), &params(0.35)).unwrap();
        let mut shifted: Vec<_> =
            a.peaks.iter().map(|&(r, c)| ((r as isize + dr) as usize, (c as isize + dc) as usize)).collect();
        let mut got = b.peaks.clone();
        shifted.sort_unstable();
        got.sort_unstable();
        assert_eq!(shifted, got, "trial {trial} shift ({dr}, {dc})");
        assert!((a.recon_stats.mean - b.recon_stats.mean).abs() < 1e-9);
    }
}

#[test]
fn low_pass_keeps_the_mean_and_removes_fine_detail() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (h, w) = (32, 40);
    let v: Vec<f64> = (0..h * w).map(|_| rng.gen()).collect();
    let smooth = low_pass(&v, h, w, 0.1);
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let var = |x: &[f64]| {
        let m = mean(x);
        x.iter().map(|a| (a - m).powi(2)).sum::<f64>() / x.len() as f64
    };
    assert!((mean(&v) - mean(&smooth)).abs() < 1e-12);
    assert!(var(&smooth) < 0.2 * var(&v));
}

#[test]
fn single_precision_counts_the_lattice() {
    let p64 = common::blob_lattice(2.0, 8.0);
    let p32 = Patch::from_fn(64, 64, |r, c| p64.get(r, c) as f32).unwrap();
    assert_eq!(fourier_analyze(&p32, &params(0.25)).unwrap().maxima_count, 16.0);
}
