//! Dataset loading, binarization, noise processes and fold splitting.
//!
//! Multi-label text format: a header line `D L`, then one example per line
//! with `D` reals, a `|` separator and `L` bits, all whitespace separated.
//! Images use the standard big-endian IDX layout, optionally gzipped.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::bits::BitVector;
use crate::error::{check_len, CrbmError, Result};
use crate::rng::{derive_seed, seeded};
use crate::training::Example;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq)]
pub struct MultiLabelDataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<BitVector>,
    pub feature_count: usize,
    pub label_count: usize,
}

impl MultiLabelDataset {
    pub fn new(
        inputs: Vec<Vec<f64>>,
        targets: Vec<BitVector>,
        feature_count: usize,
        label_count: usize,
    ) -> Result<Self> {
        check_len("target count", inputs.len(), targets.len())?;
        for (u, v) in inputs.iter().zip(&targets) {
            check_len("feature count", feature_count, u.len())?;
            check_len("label count", label_count, v.len())?;
        }
        Ok(MultiLabelDataset {
            inputs,
            targets,
            feature_count,
            label_count,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn examples(&self, indices: &[usize]) -> Vec<Example> {
        indices
            .iter()
            .map(|&i| Example::new(self.inputs[i].clone(), self.targets[i].clone()))
            .collect()
    }

    pub fn all_examples(&self) -> Vec<Example> {
        self.examples(&(0..self.len()).collect::<Vec<_>>())
    }
}

pub fn parse_multilabel<R: BufRead>(reader: R, source: &str) -> Result<MultiLabelDataset> {
    let parse_err = |line: usize, message: String| CrbmError::Parse {
        path: source.into(),
        line,
        message,
    };
    let mut lines = reader.lines().enumerate();
    let (d, l) = loop {
        let Some((i, line)) = lines.next() else {
            return Err(parse_err(1, "missing `D L` header".into()));
        };
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let dims: Vec<&str> = line.split_whitespace().collect();
        let parsed: Option<Vec<usize>> = dims.iter().map(|t| t.parse().ok()).collect();
        match parsed.as_deref() {
            Some(&[d, l]) if l > 0 => break (d, l),
            _ => return Err(parse_err(i + 1, format!("expected `D L` header, found `{line}`"))),
        }
    };
    let (mut inputs, mut targets) = (Vec::new(), Vec::new());
    for (i, line) in lines {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (features, labels) = line
            .split_once('|')
            .ok_or_else(|| parse_err(lineno, "missing `|` separator".into()))?;
        let u = features
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| parse_err(lineno, format!("bad feature value `{t}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        if u.len() != d {
            return Err(parse_err(lineno, format!("expected {d} features, found {}", u.len())));
        }
        let v = labels
            .split_whitespace()
            .map(|t| match t {
                "0" => Ok(0),
                "1" => Ok(1),
                _ => Err(parse_err(lineno, format!("bad label `{t}`"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        if v.len() != l {
            return Err(parse_err(lineno, format!("expected {l} labels, found {}", v.len())));
        }
        inputs.push(u);
        targets.push(BitVector::new(v)?);
    }
    if inputs.is_empty() {
        return Err(parse_err(1, "no examples".into()));
    }
    MultiLabelDataset::new(inputs, targets, d, l)
}

pub fn load_multilabel(path: impl AsRef<Path>) -> Result<MultiLabelDataset> {
    let path = path.as_ref();
    let file = File::open(path)?;
    parse_multilabel(BufReader::new(file), &path.display().to_string())
}

pub fn write_multilabel<W: Write>(dataset: &MultiLabelDataset, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "{} {}", dataset.feature_count, dataset.label_count)?;
    for (u, v) in dataset.inputs.iter().zip(&dataset.targets) {
        let features: Vec<String> = u.iter().map(|x| format!("{x:?}")).collect();
        let labels: Vec<&str> = v.iter().map(|b| if b { "1" } else { "0" }).collect();
        writeln!(out, "{} | {}", features.join(" "), labels.join(" "))?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_multilabel(dataset: &MultiLabelDataset, path: impl AsRef<Path>) -> Result<()> {
    write_multilabel(dataset, File::create(path)?)
}

/// Images from an IDX3 file, pixel bytes scaled to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub width: usize,
    pub height: usize,
    pub images: Vec<Vec<f64>>,
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let mut raw = Vec::new();
    File::open(path)?.read_to_end(&mut raw)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn idx_header(bytes: &[u8], magic: u32, dims: usize) -> Result<(Vec<usize>, &[u8])> {
    let header_len = 4 + 4 * dims;
    if bytes.len() < header_len {
        return Err(CrbmError::format("idx", "truncated header"));
    }
    let word = |i: usize| u32::from_be_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap());
    if word(0) != magic {
        return Err(CrbmError::format(
            "idx",
            format!("bad magic {:#010x}, expected {magic:#010x}", word(0)),
        ));
    }
    let sizes: Vec<usize> = (1..=dims).map(|i| word(i) as usize).collect();
    let body = &bytes[header_len..];
    let expected: usize = sizes.iter().product();
    if body.len() != expected {
        return Err(CrbmError::format(
            "idx",
            format!("expected {expected} data bytes, found {}", body.len()),
        ));
    }
    Ok((sizes, body))
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let (sizes, body) = idx_header(bytes, IDX_IMAGES_MAGIC, 3)?;
    let (height, width) = (sizes[1], sizes[2]);
    let pixels = width * height;
    let images = if pixels == 0 {
        vec![Vec::new(); sizes[0]]
    } else {
        body.chunks(pixels)
            .map(|img| img.iter().map(|&b| f64::from(b) / 255.0).collect())
            .collect()
    };
    Ok(IdxImages {
        width,
        height,
        images,
    })
}

/// Reads an IDX3 image file; gzip compression is detected automatically.
pub fn load_idx_images(path: impl AsRef<Path>) -> Result<IdxImages> {
    parse_idx_images(&read_maybe_gz(path.as_ref())?)
}

pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let bytes = read_maybe_gz(path.as_ref())?;
    Ok(idx_header(&bytes, IDX_LABELS_MAGIC, 1)?.1.to_vec())
}

/// Serializes images (values in `[0, 1]`, rounded to bytes) as IDX3.
pub fn encode_idx_images(images: &[Vec<f64>], width: usize, height: usize) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(16 + images.len() * width * height);
    for word in [IDX_IMAGES_MAGIC, images.len() as u32, height as u32, width as u32] {
        out.extend_from_slice(&word.to_be_bytes());
    }
    for img in images {
        check_len("image pixels", width * height, img.len())?;
        for &x in img {
            if !(0.0..=1.0).contains(&x) {
                return Err(CrbmError::invalid(format!("pixel value {x} outside [0, 1]")));
            }
            out.push((x * 255.0).round() as u8);
        }
    }
    Ok(out)
}

/// Writes IDX3; gzipped when the path ends in `.gz`.
pub fn save_idx_images(
    images: &[Vec<f64>],
    width: usize,
    height: usize,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_idx_images(images, width, height)?;
    let file = File::create(path)?;
    if path.extension().is_some_and(|e| e == "gz") {
        let mut enc = GzEncoder::new(file, Compression::default());
        enc.write_all(&bytes)?;
        enc.finish()?;
    } else {
        BufWriter::new(file).write_all(&bytes)?;
    }
    Ok(())
}

/// Bit `i` is 1 iff pixel `i` is strictly above 0.5.
pub fn binarize(images: &[Vec<f64>]) -> Result<Vec<BitVector>> {
    images
        .iter()
        .map(|img| {
            if let Some(x) = img.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return Err(CrbmError::invalid(format!("pixel value {x} outside [0, 1]")));
            }
            Ok(BitVector::from_bools(img.iter().map(|&x| x > 0.5)))
        })
        .collect()
}

/// Flips exactly `round(rate·|v|)` distinct, uniformly chosen coordinates.
pub fn corrupt_flip<R: Rng + ?Sized>(v: &BitVector, rate: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(CrbmError::invalid(format!("flip rate {rate} outside [0, 1]")));
    }
    let mut u = v.to_real();
    let count = (rate * v.len() as f64).round() as usize;
    for i in index::sample(rng, v.len(), count) {
        u[i] = 1.0 - u[i];
    }
    Ok(u)
}

/// Uniform top-left corner `(row, col)` of a `patch × patch` block.
pub fn occlusion_corner<R: Rng + ?Sized>(
    patch: usize,
    width: usize,
    height: usize,
    rng: &mut R,
) -> Result<(usize, usize)> {
    if patch == 0 || patch > width || patch > height {
        return Err(CrbmError::invalid(format!(
            "patch {patch} does not fit a {width}x{height} image"
        )));
    }
    Ok((
        rng.random_range(0..=height - patch),
        rng.random_range(0..=width - patch),
    ))
}

/// Sets a uniformly placed `patch × patch` block of the row-major image to 0.
pub fn corrupt_occlude<R: Rng + ?Sized>(
    v: &BitVector,
    patch: usize,
    width: usize,
    height: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_len("image pixels", width * height, v.len())?;
    let (top, left) = occlusion_corner(patch, width, height, rng)?;
    let mut u = v.to_real();
    for r in top..top + patch {
        u[r * width + left..r * width + left + patch].fill(0.0);
    }
    Ok(u)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    Flip { rate: f64 },
    Occlude { patch: usize },
}

/// Clean binary images paired with their corrupted versions.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePairDataset {
    pub clean: Vec<BitVector>,
    pub noisy: Vec<Vec<f64>>,
    pub width: usize,
    pub height: usize,
}

impl ImagePairDataset {
    pub fn new(clean: Vec<BitVector>, noisy: Vec<Vec<f64>>, width: usize, height: usize) -> Result<Self> {
        check_len("noisy count", clean.len(), noisy.len())?;
        for (v, u) in clean.iter().zip(&noisy) {
            check_len("clean pixels", width * height, v.len())?;
            check_len("noisy pixels", width * height, u.len())?;
        }
        Ok(ImagePairDataset {
            clean,
            noisy,
            width,
            height,
        })
    }

    /// Corrupts every image with its own stream `derive_seed(seed, [i])`.
    pub fn corrupt(clean: Vec<BitVector>, width: usize, height: usize, noise: Noise, seed: u64) -> Result<Self> {
        let noisy = clean
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let mut rng = seeded(derive_seed(seed, &[i as u64]));
                match noise {
                    Noise::Flip { rate } => corrupt_flip(v, rate, &mut rng),
                    Noise::Occlude { patch } => corrupt_occlude(v, patch, width, height, &mut rng),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(clean, noisy, width, height)
    }

    pub fn len(&self) -> usize {
        self.clean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clean.is_empty()
    }

    /// `(u = noisy, v = clean)` pairs.
    pub fn examples(&self) -> Vec<Example> {
        self.noisy
            .iter()
            .zip(&self.clean)
            .map(|(u, v)| Example::new(u.clone(), v.clone()))
            .collect()
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        ImagePairDataset {
            clean: self.clean[range.clone()].to_vec(),
            noisy: self.noisy[range].to_vec(),
            width: self.width,
            height: self.height,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldSpec {
    pub index: usize,
    pub seed: u64,
    pub fractions: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

impl FoldSpec {
    pub fn new(index: usize, seed: u64) -> Self {
        FoldSpec {
            index,
            seed,
            fractions: [0.8, 0.1, 0.1],
        }
    }

    /// Seeded permutation of `0..n`: validation and test take
    /// `floor(0.1·n)` each and training keeps the remainder.
    pub fn split(&self, n: usize) -> Fold {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut seeded(derive_seed(self.seed, &[self.index as u64])));
        let n_valid = (self.fractions[1] * n as f64).floor() as usize;
        let n_test = (self.fractions[2] * n as f64).floor() as usize;
        let test = perm.split_off(n - n_test);
        let valid = perm.split_off(n - n_test - n_valid);
        Fold {
            train: perm,
            valid,
            test,
        }
    }
}

/// `n_folds` independent 80/10/10 resplits of `0..n`. At least 10 examples
/// are required so that every part is non-empty.
pub fn make_folds(n: usize, n_folds: usize, seed: u64) -> Result<Vec<Fold>> {
    if n_folds == 0 || n < 2 * n_folds || n < 10 {
        return Err(CrbmError::invalid(format!(
            "{n} examples are too few for {n_folds} folds"
        )));
    }
    Ok((0..n_folds).map(|i| FoldSpec::new(i, seed).split(n)).collect())
}

/// Parameters of the synthetic correlated multi-label generator.
///
/// Each example belongs to one of `n_clusters` latent clusters. A cluster
/// has a Gaussian centre in feature space and a fixed prototype label
/// vector, so labels are strongly correlated through the cluster while any
/// single label is a union of scattered clusters (not linearly separable).
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_samples: usize,
    pub n_features: usize,
    pub n_labels: usize,
    pub n_clusters: usize,
    /// Feature noise around the cluster centre (centres are `N(0, 1)`).
    pub feature_noise: f64,
    /// Independent per-label flip probability applied to the prototype.
    pub label_noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_samples: 1500,
            n_features: 8,
            n_labels: 10,
            n_clusters: 16,
            feature_noise: 0.35,
            label_noise: 0.02,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMultiLabel {
    pub dataset: MultiLabelDataset,
    pub prototypes: Vec<BitVector>,
    pub clusters: Vec<usize>,
}

pub fn synthetic_multilabel(config: &SyntheticConfig) -> Result<SyntheticMultiLabel> {
    if config.n_clusters == 0 || config.n_labels == 0 || config.n_features == 0 {
        return Err(CrbmError::invalid("synthetic generator needs clusters, labels and features"));
    }
    let noise = Normal::new(0.0, config.feature_noise)
        .map_err(|e| CrbmError::invalid(format!("feature noise: {e}")))?;
    let mut rng = seeded(config.seed);
    let centres: Vec<Vec<f64>> = (0..config.n_clusters)
        .map(|_| (0..config.n_features).map(|_| rng.sample(rand_distr::StandardNormal)).collect())
        .collect();
    let prototypes: Vec<BitVector> = (0..config.n_clusters)
        .map(|_| BitVector::from_bools((0..config.n_labels).map(|_| rng.random_bool(0.5))))
        .collect();
    let (mut inputs, mut targets, mut clusters) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..config.n_samples {
        let c = rng.random_range(0..config.n_clusters);
        inputs.push(centres[c].iter().map(|&m| m + noise.sample(&mut rng)).collect());
        targets.push(BitVector::from_bools(
            prototypes[c].iter().map(|b| b ^ rng.random_bool(config.label_noise)),
        ));
        clusters.push(c);
    }
    Ok(SyntheticMultiLabel {
        dataset: MultiLabelDataset::new(inputs, targets, config.n_features, config.n_labels)?,
        prototypes,
        clusters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn bits(v: &[u8]) -> BitVector {
        BitVector::new(v.to_vec()).unwrap()
    }

    fn parse(text: &str) -> Result<MultiLabelDataset> {
        parse_multilabel(Cursor::new(text), "mem")
    }

    #[test]
    fn parses_small_file() {
        let ds = parse("3 2\n0.5 1 -2 | 1 0\n0 0 1e-3 | 0 1\n").unwrap();
        assert_eq!((ds.len(), ds.feature_count, ds.label_count), (2, 3, 2));
        assert_eq!(ds.targets[1], bits(&[0, 1]));
        assert_eq!(ds.inputs[0], vec![0.5, 1.0, -2.0]);
    }

    #[test]
    fn malformed_files_name_the_line() {
        assert!(parse("").is_err());
        assert!(parse("3 2\n").is_err());
        let line_of = |text: &str| match parse(text) {
            Err(CrbmError::Parse { line, .. }) => line,
            other => panic!("expected parse error, got {other:?}"),
        };
        assert_eq!(line_of("2 1\n1 2 | 1\n1 2 1\n"), 3);
        assert_eq!(line_of("2 1\n1 2 | 1 0\n"), 2);
        assert_eq!(line_of("2 1\n1 | 1\n"), 2);
        assert_eq!(line_of("2 1\n1 x | 1\n"), 2);
        assert_eq!(line_of("2 1\n1 2 | 2\n"), 2);
        assert_eq!(line_of("two 1\n"), 1);
    }

    #[test]
    fn multilabel_round_trip() {
        let ds = synthetic_multilabel(&SyntheticConfig {
            n_samples: 50,
            ..SyntheticConfig::default()
        })
        .unwrap()
        .dataset;
        let mut buf = Vec::new();
        write_multilabel(&ds, &mut buf).unwrap();
        assert_eq!(parse_multilabel(Cursor::new(buf), "mem").unwrap(), ds);
    }

    #[test]
    fn idx_header_only_and_scaling() {
        let empty = encode_idx_images(&[], 28, 28).unwrap();
        assert_eq!(empty.len(), 16);
        let parsed = parse_idx_images(&empty).unwrap();
        assert!(parsed.images.is_empty());
        assert_eq!((parsed.width, parsed.height), (28, 28));

        let mut bytes = encode_idx_images(&[vec![0.0; 4]], 2, 2).unwrap();
        bytes[16] = 255;
        let parsed = parse_idx_images(&bytes).unwrap();
        assert_eq!(parsed.images, vec![vec![1.0, 0.0, 0.0, 0.0]]);
    }

    #[test]
    fn idx_rejects_bad_magic_and_truncation() {
        let mut bytes = encode_idx_images(&[vec![0.5; 4]], 2, 2).unwrap();
        assert!(parse_idx_images(&bytes[..bytes.len() - 1]).is_err());
        assert!(parse_idx_images(&bytes[..10]).is_err());
        bytes[3] = 0x01;
        assert!(parse_idx_images(&bytes).is_err());
    }

    #[test]
    fn idx_gz_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let images = vec![vec![0.0, 1.0, 0.2, 0.8, 0.4, 0.6]; 3];
        for name in ["x.idx", "x.idx.gz"] {
            let path = dir.path().join(name);
            save_idx_images(&images, 3, 2, &path).unwrap();
            let back = load_idx_images(&path).unwrap();
            assert_eq!((back.width, back.height, back.images.len()), (3, 2, 3));
            for (a, b) in back.images[0].iter().zip(&images[0]) {
                assert!((a - b).abs() <= 0.5 / 255.0);
            }
        }
    }

    #[test]
    fn binarize_is_strict() {
        let out = binarize(&[vec![0.5, 0.51, 0.0, 1.0]]).unwrap();
        assert_eq!(out[0], bits(&[0, 1, 0, 1]));
        assert_eq!(binarize(&[vec![0.0; 5]]).unwrap()[0], BitVector::zeros(5));
        assert!(binarize(&[vec![1.5]]).is_err());
        assert!(binarize(&[vec![f64::NAN]]).is_err());
    }

    #[test]
    fn flip_counts_are_exact_and_input_untouched() {
        let v = BitVector::from_index(0xdead_beef, 784);
        let copy = v.clone();
        let mut rng = seeded(1);
        assert_eq!(corrupt_flip(&v, 0.0, &mut rng).unwrap(), v.to_real());
        for _ in 0..20 {
            let u = corrupt_flip(&v, 0.1, &mut rng).unwrap();
            let changed = u.iter().zip(v.iter()).filter(|(&x, b)| (x >= 0.5) != *b).count();
            assert_eq!(changed, 78);
        }
        assert_eq!(v, copy);
        assert!(corrupt_flip(&v, 1.1, &mut rng).is_err());
    }

    #[test]
    fn occlusion_zeroes_one_block() {
        let mut rng = seeded(2);
        let zeros = BitVector::zeros(784);
        assert_eq!(corrupt_occlude(&zeros, 8, 28, 28, &mut rng).unwrap(), zeros.to_real());
        let ones = BitVector::ones(784);
        for _ in 0..50 {
            let u = corrupt_occlude(&ones, 8, 28, 28, &mut rng).unwrap();
            let off: Vec<(usize, usize)> = (0..784).filter(|&i| u[i] == 0.0).map(|i| (i / 28, i % 28)).collect();
            assert_eq!(off.len(), 64);
            let (r0, c0) = off[0];
            assert!(off.iter().all(|&(r, c)| (r0..r0 + 8).contains(&r) && (c0..c0 + 8).contains(&c)));
        }
        assert!(corrupt_occlude(&BitVector::ones(16), 8, 4, 4, &mut rng).is_err());
        assert!(corrupt_occlude(&ones, 8, 27, 28, &mut rng).is_err());
    }

    #[test]
    fn folds_are_exact_disjoint_and_reproducible() {
        let folds = make_folds(100, 10, 7).unwrap();
        assert_eq!(folds, make_folds(100, 10, 7).unwrap());
        assert_ne!(folds[0], folds[1]);
        for f in &folds {
            assert_eq!((f.train.len(), f.valid.len(), f.test.len()), (80, 10, 10));
            let mut all: Vec<usize> = f.train.iter().chain(&f.valid).chain(&f.test).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..100).collect::<Vec<_>>());
        }
        let odd = FoldSpec::new(0, 1).split(37);
        assert_eq!((odd.train.len(), odd.valid.len(), odd.test.len()), (31, 3, 3));
        assert!(make_folds(19, 10, 0).is_err());
        assert!(make_folds(100, 0, 0).is_err());
    }

    #[test]
    fn image_pairs_are_seeded_per_image() {
        let clean = vec![BitVector::ones(16); 4];
        let a = ImagePairDataset::corrupt(clean.clone(), 4, 4, Noise::Occlude { patch: 2 }, 5).unwrap();
        let b = ImagePairDataset::corrupt(clean[..2].to_vec(), 4, 4, Noise::Occlude { patch: 2 }, 5).unwrap();
        assert_eq!(a.noisy[..2], b.noisy[..]);
        assert_eq!(a.examples()[3].target, clean[3]);
    }

    #[test]
    fn synthetic_labels_follow_prototypes() {
        let s = synthetic_multilabel(&SyntheticConfig {
            n_samples: 400,
            label_noise: 0.0,
            ..SyntheticConfig::default()
        })
        .unwrap();
        for (v, &c) in s.dataset.targets.iter().zip(&s.clusters) {
            assert_eq!(v, &s.prototypes[c]);
        }
    }
}
