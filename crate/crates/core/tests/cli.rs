use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crowdcount")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = bin(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, n: &str, seed: &str) -> PathBuf {
    let line = ok(&[
        "synth", "--n", n, "--min-dots", "10", "--max-dots", "80", "--width", "128", "--height", "128", "--seed", seed,
        "--out", s(dir),
    ]);
    PathBuf::from(line.trim())
}

/// One trained model and a held-out dataset, shared by the tests below.
fn fixture() -> &'static (tempfile::TempDir, PathBuf, PathBuf) {
    static FIX: OnceLock<(tempfile::TempDir, PathBuf, PathBuf)> = OnceLock::new();
    FIX.get_or_init(|| {
        let tmp = tempfile::tempdir().unwrap();
        let train = synth(&tmp.path().join("train"), "8", "1");
        let test = synth(&tmp.path().join("test"), "3", "2");
        let model = tmp.path().join("model.json");
        ok(&[
            "train", "--manifest", s(&train), "--out", s(&model), "--seed", "4", "--cell-size", "32", "--stride", "32",
            "--codebook-k", "16",
        ]);
        (tmp, model, test)
    })
}

#[test]
fn synth_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let a = synth(&tmp.path().join("a"), "3", "7");
    let b = synth(&tmp.path().join("b"), "3", "7");
    let ma: serde_json::Value = serde_json::from_slice(&std::fs::read(&a).unwrap()).unwrap();
    let mb: serde_json::Value = serde_json::from_slice(&std::fs::read(&b).unwrap()).unwrap();
    assert_eq!(ma, mb);
    for sub in ["images", "annotations"] {
        let mut names: Vec<_> = std::fs::read_dir(a.parent().unwrap().join(sub)).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert_eq!(names.len(), 3);
        for n in names {
            let x = std::fs::read(a.parent().unwrap().join(sub).join(&n)).unwrap();
            let y = std::fs::read(b.parent().unwrap().join(sub).join(&n)).unwrap();
            assert_eq!(x, y, "{n:?}");
        }
    }
}

#[test]
fn count_prints_one_total_per_image_and_writes_cells() {
    let (tmp, model, test) = fixture();
    let images: Vec<PathBuf> = std::fs::read_dir(test.parent().unwrap().join("images"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    let cells = tmp.path().join("cells.csv");
    let mut args = vec!["count", "--model", s(model), "--cells", s(&cells)];
    args.extend(images.iter().map(|p| s(p)));
    let stdout = ok(&args);
    let totals: Vec<f64> = stdout.lines().map(|l| l.rsplit('\t').next().unwrap().parse().unwrap()).collect();
    assert_eq!(totals.len(), images.len());

    let mut rdr = csv::Reader::from_path(&cells).unwrap();
    let mut per_image = std::collections::HashMap::<String, f64>::new();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        *per_image.entry(rec[0].to_string()).or_default() += rec[5].parse::<f64>().unwrap();
    }
    for (line, total) in stdout.lines().zip(&totals) {
        let path = line.rsplit_once('\t').unwrap().0;
        assert!((per_image[path] - total).abs() <= 0.05 + 1e-9);
    }
}

#[test]
fn count_with_another_cell_size_is_refused() {
    let (_, model, test) = fixture();
    let img = std::fs::read_dir(test.parent().unwrap().join("images")).unwrap().next().unwrap().unwrap().path();
    let out = bin(&["count", "--model", s(model), "--cell-size", "64", s(&img)]);
    assert_eq!(out.status.code(), Some(4));
    // Restating the trained value is accepted.
    ok(&["count", "--model", s(model), "--cell-size", "32", s(&img)]);
}

#[test]
fn evaluate_summary_matches_its_own_csv() {
    let (tmp, model, test) = fixture();
    let out = tmp.path().join("eval");
    ok(&["evaluate", "--model", s(model), "--manifest", s(test), "--out", s(&out)]);
    let mut rdr = csv::Reader::from_path(out.join("images.csv")).unwrap();
    let aes: Vec<f64> = rdr
        .deserialize::<std::collections::HashMap<String, String>>()
        .map(|r| r.unwrap()["ae"].parse().unwrap())
        .collect();
    assert_eq!(aes.len(), 3);
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    let mean = aes.iter().sum::<f64>() / aes.len() as f64;
    assert!((summary["image"]["mean_ae"].as_f64().unwrap() - mean).abs() < 1e-9);
    for f in ["patches.csv", "patch_analysis.csv"] {
        assert!(csv::Reader::from_path(out.join(f)).unwrap().records().all(|r| r.is_ok()));
    }
}

#[test]
fn exit_codes_follow_the_failure_kind() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.json");
    assert_eq!(bin(&["count", "--model", s(&missing), "x.pgm"]).status.code(), Some(3));
    assert_eq!(bin(&["synth", "--n", "1", "--seed", "1"]).status.code(), Some(2));
    let out = tmp.path().join("d");
    let code = bin(&["synth", "--n", "1", "--seed", "1", "--max-dots", "100000", "--out", s(&out)]).status.code();
    assert_eq!(code, Some(2));
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, b"{\"cell_size\": 8}").unwrap();
    let manifest = synth(&tmp.path().join("m"), "2", "3");
    let code = bin(&["train", "--manifest", s(&manifest), "--out", s(&tmp.path().join("m.json")), "--seed", "1", "--config", s(&bad)])
        .status
        .code();
    assert_eq!(code, Some(2));
}
