use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use crbm::bits::BitVector;
use crbm::data::{save_idx_images, save_multilabel, MultiLabelDataset};
use crbm::harness::{read_records, RgbImage};

fn crbm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crbm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn value<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .unwrap_or_else(|| panic!("no `{key}` in\n{text}"))
}

/// Two labels, each a threshold of one feature: linearly separable.
fn toy_multilabel(dir: &Path) -> PathBuf {
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for i in 0..200 {
        let a = ((i * 37) % 101) as f64 / 50.0 - 1.0;
        let b = ((i * 53) % 97) as f64 / 48.0 - 1.0;
        inputs.push(vec![a, b, 0.5]);
        targets.push(BitVector::from_bools([a > 0.1, b < -0.2]));
    }
    let path = dir.join("toy.txt");
    save_multilabel(&MultiLabelDataset::new(inputs, targets, 3, 2).unwrap(), &path).unwrap();
    path
}

fn toy_images(dir: &Path) -> PathBuf {
    let images: Vec<Vec<f64>> = (0..60)
        .map(|i| {
            (0..100)
                .map(|p| {
                    let (r, c) = (p / 10, p % 10);
                    if (r + i) % 4 < 2 && c > 2 { 1.0 } else { 0.0 }
                })
                .collect()
        })
        .collect();
    let path = dir.join("images.idx.gz");
    save_idx_images(&images, 10, 10, &path).unwrap();
    path
}

fn image_flags(data: &Path, task: &str) -> Vec<String> {
    [
        "--task",
        task,
        "--data",
        data.to_str().unwrap(),
        "--set",
        "train_size=40",
        "--set",
        "valid_size=10",
        "--set",
        "test_size=10",
        "--set",
        "patch=3",
    ]
    .map(String::from)
    .to_vec()
}

#[test]
fn train_logreg_fits_separable_toy_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy_multilabel(dir.path());
    let ckpt = dir.path().join("model.crbm");
    let out = stdout(&crbm(&[
        "train",
        "--model",
        "logreg",
        "--data",
        data.to_str().unwrap(),
        "--learning-rate",
        "2^0",
        "--epochs",
        "30",
        "--set",
        "batch_size=16",
        "--set",
        "patience=0",
        "--out",
        ckpt.to_str().unwrap(),
    ]));
    let errors: Vec<f64> = value(&out, "valid_error")
        .split(',')
        .map(|x| x.parse().unwrap())
        .collect();
    assert_eq!(errors.len(), 30);
    let best: f64 = value(&out, "best_valid_error").parse().unwrap();
    assert_eq!(best, errors.iter().cloned().fold(f64::INFINITY, f64::min));
    assert_eq!(best, 0.0, "{errors:?}");
    assert!(ckpt.exists());
    let meta = read_records(&dir.path().join("model.crbm.meta")).unwrap();
    assert_eq!(meta["model"], "logreg");
    assert!(dir.path().join("model.crbm.report").exists());
}

#[test]
fn bad_paths_exit_nonzero() {
    let out = crbm(&["train", "--data", "/nonexistent/data.txt", "--out", "/tmp/unused.crbm"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    let out = crbm(&["evaluate", "--checkpoint", "/nonexistent/model.crbm"]);
    assert!(!out.status.success());
}

#[test]
fn seeded_training_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy_multilabel(dir.path());
    let mut checkpoints = Vec::new();
    for name in ["a.crbm", "b.crbm"] {
        let ckpt = dir.path().join(name);
        stdout(&crbm(&[
            "train",
            "--model",
            "hashcrbm",
            "--hidden-size",
            "4",
            "--n-bits",
            "3",
            "--epochs",
            "3",
            "--seed",
            "11",
            "--data",
            data.to_str().unwrap(),
            "--out",
            ckpt.to_str().unwrap(),
        ]));
        checkpoints.push((
            fs::read(&ckpt).unwrap(),
            fs::read(dir.path().join(format!("{name}.index"))).unwrap(),
        ));
    }
    assert_eq!(checkpoints[0], checkpoints[1]);
}

#[test]
fn grid_of_one_matches_train_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy_multilabel(dir.path());
    let config = dir.path().join("run.cfg");
    fs::write(
        &config,
        format!(
            "# toy run\nmodel=cd\nhidden_size=4\nlearning_rate=2^-2\nepochs=4\ngibbs_k=1\nbatch_size=20\ndata={}\n",
            data.display()
        ),
    )
    .unwrap();
    let cfg = config.to_str().unwrap();
    let ckpt = dir.path().join("m.crbm");
    stdout(&crbm(&["train", "--config", cfg, "--out", ckpt.to_str().unwrap()]));
    let eval = stdout(&crbm(&["evaluate", "--checkpoint", ckpt.to_str().unwrap()]));
    let grid = stdout(&crbm(&[
        "grid",
        "--config",
        cfg,
        "--grid",
        "learning_rate=2^-2",
        "--grid",
        "hidden_size=4",
        "--grid",
        "gibbs_k=1",
    ]));
    assert_eq!(value(&grid, "winner"), "0");
    assert_eq!(value(&eval, "mean_error"), value(&grid, "test_error"));
}

#[test]
fn grid_winner_has_lowest_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy_multilabel(dir.path());
    let out = stdout(&crbm(&[
        "grid",
        "--model",
        "logreg",
        "--epochs",
        "5",
        "--data",
        data.to_str().unwrap(),
        "--grid",
        "learning_rate=2^-10,2^0,2^-4",
    ]));
    let winner: f64 = value(&out, "valid_error").parse().unwrap();
    let rows: Vec<f64> = out
        .lines()
        .skip_while(|l| !l.starts_with("index\t"))
        .skip(1)
        .map(|l| l.rsplit('\t').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|&e| winner <= e));
}

#[test]
fn baseline_on_flip_task_misses_every_changed_pixel() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy_images(dir.path());
    let mut args = vec!["evaluate".to_string(), "--baseline".to_string()];
    args.extend(image_flags(&data, "denoise-flip"));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = stdout(&crbm(&refs));
    assert_eq!(value(&out, "mean_changed"), "100.0000");
    assert_eq!(value(&out, "mean_all"), "10.0000");
}

#[test]
fn denoise_train_evaluate_and_render() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy_images(dir.path());
    let ckpt = dir.path().join("d.crbm");
    let mut args: Vec<String> = ["train", "--model", "percloss", "--hidden-size", "6", "--epochs", "2", "--gibbs-k", "2"]
        .map(String::from)
        .to_vec();
    args.extend(image_flags(&data, "denoise-occlude"));
    args.extend(["--out".to_string(), ckpt.display().to_string()]);
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    stdout(&crbm(&refs));

    let eval = stdout(&crbm(&["evaluate", "--checkpoint", ckpt.to_str().unwrap()]));
    assert!(value(&eval, "mean_changed").parse::<f64>().is_ok());

    let ppm = dir.path().join("grid.ppm");
    stdout(&crbm(&[
        "render",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--count",
        "4",
        "--out",
        ppm.to_str().unwrap(),
    ]));
    let img = RgbImage::read_ppm(fs::File::open(&ppm).unwrap()).unwrap();
    assert_eq!((img.width, img.height), (2 * 10 + 3, 4 * 11 + 1));
}

#[test]
fn make_noise_and_hash_index() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy_images(dir.path());
    let noisy = dir.path().join("noisy.idx");
    let out = stdout(&crbm(&[
        "make-noise",
        "--input",
        data.to_str().unwrap(),
        "--output",
        noisy.to_str().unwrap(),
        "--noise",
        "flip",
        "--rate",
        "0.1",
        "--seed",
        "3",
    ]));
    assert_eq!(value(&out, "images"), "60");
    let clean = crbm::data::load_idx_images(&data).unwrap();
    let flipped = crbm::data::load_idx_images(&noisy).unwrap();
    for (a, b) in clean.images.iter().zip(&flipped.images) {
        assert_eq!(a.iter().zip(b).filter(|(x, y)| x != y).count(), 10);
    }

    let text = toy_multilabel(dir.path());
    let index = dir.path().join("toy.index");
    stdout(&crbm(&[
        "hash-index",
        "--data",
        text.to_str().unwrap(),
        "--n-bits",
        "3",
        "--out",
        index.to_str().unwrap(),
    ]));
    let loaded = crbm::hashing::SpectralHashIndex::load(&index).unwrap();
    assert_eq!(loaded.n_visible(), 2);
}
