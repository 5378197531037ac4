use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn synthforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_synthforge"))
        .args(args)
        .env("SYNTHFORGE_LOG_LEVEL", "warn")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn shipped(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name).display().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.yaml");
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL_AE: &str = "model_family: autoencoder\nimage_size: 16\nepochs: 2\nbatch_size: 4\nbase_channels: 8\nlatent_dim: 8\nseed: 4\n";

#[test]
fn validate_config_prints_effective_config() {
    let out = synthforge(&["validate-config", "--config", &shipped("minimal.yaml")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("model_family: autoencoder\n") && text.contains("batch_size: 16\n"), "{text}");
}

#[test]
fn every_shipped_config_validates() {
    for name in ["minimal.yaml", "vae_phantom.yaml", "gan_phantom.yaml", "diffusion_phantom.yaml"] {
        let out = synthforge(&["validate-config", "--config", &shipped(name)]);
        assert_eq!(code(&out), 0, "{name}: {}", stderr(&out));
    }
}

#[test]
fn config_errors_exit_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "model_family: gan\nimage_size: 16\nepochs: 1\nbatch_sise: 4\n");
    let out = synthforge(&["validate-config", "--config", s(&cfg)]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(err.contains("line 4") && err.contains("batch_size") && err.contains("run.yaml"), "{err}");
}

#[test]
fn usage_errors_exit_1() {
    let out = synthforge(&["train", "--manifest", "m.csv", "--output-dir", "o"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("Usage"), "{}", stderr(&out));
    assert_eq!(code(&synthforge(&["frobnicate"])), 1);
    assert_eq!(code(&synthforge(&["info", "--bogus"])), 1);
    assert_eq!(code(&synthforge(&["--help"])), 0);
}

#[test]
fn missing_files_name_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_AE);
    let missing = dir.path().join("nope.csv");
    let out = synthforge(&["train", "--config", s(&cfg), "--manifest", s(&missing), "--output-dir", s(dir.path())]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("--manifest"), "{}", stderr(&out));
}

fn pipeline(root: &Path) {
    let data = root.join("data");
    let run = root.join("run");
    let gen = root.join("gen");
    let out = synthforge(&["phantom", "--output-dir", s(&data), "--per-class", "4", "--size", "16", "--unlabeled"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let cfg = write_config(root, SMALL_AE);
    let manifest = data.join("manifest.csv");
    let out = synthforge(&[
        "train", "--config", s(&cfg), "--manifest", s(&manifest), "--output-dir", s(&run), "--workers", "2",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(run.join("last.gsyn").exists() && run.join("metrics.csv").exists());

    let ckpt = run.join("last.gsyn");
    let out = synthforge(&["generate", "--checkpoint", s(&ckpt), "--num-samples", "3", "--output-dir", s(&gen)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = root.join("report.csv");
    let out = synthforge(&[
        "compare", "--real-manifest", s(&manifest), "--synth-manifest", s(&gen), "--output", s(&report),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

fn listing(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = walk(dir).into_iter().map(|p| {
        let bytes = std::fs::read(&p).unwrap();
        (p.strip_prefix(dir).unwrap().display().to_string(), bytes)
    }).collect();
    files.sort();
    files
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn full_pipeline_is_byte_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    pipeline(a.path());
    pipeline(b.path());

    let gen = a.path().join("gen");
    let pgms: Vec<_> = walk(&gen).into_iter().filter(|p| p.extension().is_some_and(|e| e == "pgm")).collect();
    assert_eq!(pgms.len(), 3);
    let manifest = std::fs::read_to_string(gen.join("manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 4, "{manifest}");
    assert!(manifest.starts_with("SubjectID,Channel_0\nsample_0000,sample_0000.pgm\n"), "{manifest}");

    let report = std::fs::read_to_string(a.path().join("report.csv")).unwrap();
    assert_eq!(report.lines().count(), 15, "{report}");

    assert_eq!(listing(a.path()), listing(b.path()));
}

#[test]
fn resume_and_generate_validation() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert_eq!(code(&synthforge(&["phantom", "--output-dir", s(&data), "--per-class", "2"])), 0);
    let labeled = format!("{SMALL_AE}labeling_paradigm: labeled\nnum_classes: 2\n");
    let cfg = write_config(dir.path(), &labeled);
    let manifest = data.join("manifest.csv");
    let run = dir.path().join("run");
    let train = |extra: &[&str]| {
        let mut args = vec!["train", "--config", s(&cfg), "--manifest", s(&manifest), "--output-dir", s(&run)];
        args.extend_from_slice(extra);
        synthforge(&args)
    };
    let out = train(&["--resume"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("no checkpoint"), "{}", stderr(&out));

    assert_eq!(code(&train(&[])), 0);
    assert_eq!(code(&train(&["--resume", "--seed", "9"])), 2);
    assert_eq!(code(&train(&["--workers", "0"])), 2);

    let ckpt = run.join("last.gsyn");
    let gen = dir.path().join("gen");
    let out = synthforge(&[
        "generate", "--checkpoint", s(&ckpt), "--num-samples", "2", "--class-id", "1", "--output-dir", s(&gen),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(gen.join("sample_1_0000.pgm").exists() && gen.join("sample_1_0001.pgm").exists());
    let m = std::fs::read_to_string(gen.join("manifest.csv")).unwrap();
    assert!(m.starts_with("SubjectID,Channel_0,Label\n") && m.ends_with("sample_1_0001,sample_1_0001.pgm,1\n"), "{m}");

    let out = synthforge(&[
        "generate", "--checkpoint", s(&ckpt), "--num-samples", "2", "--class-id", "5", "--output-dir", s(&gen),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--class-id"));

    let out = synthforge(&["info", "--checkpoint", s(&ckpt)]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("epoch: 2") && text.contains("model family: autoencoder"), "{text}");

    let bad = dir.path().join("bad.gsyn");
    std::fs::write(&bad, b"NOPE").unwrap();
    let out = synthforge(&["info", "--checkpoint", s(&bad)]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("bad magic"));
}
