//! Spectral hashing of conditioning inputs and hamming-ball retrieval of
//! candidate target sets.
//!
//! Codes come from PCA projections passed through the analytic
//! one-dimensional Laplacian eigenfunctions `sin(π/2 + mπ·t)`, where `t` is
//! the projection rescaled to `[0, 1]` over the estimated range of its
//! principal direction. The `n_bits` eigenfunctions with the smallest
//! eigenvalues `(m / (b − a))²` are kept. Unlike classic spectral hashing,
//! the hash table maps each code to the *targets* of the inputs that
//! produced it.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::bits::{BitVector, CandidateSet};
use crate::error::{check_len, CrbmError, Result};
use crate::linalg::Matrix;

const MAGIC: &[u8; 5] = b"SHIX1";
const MIN_RANGE_WIDTH: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralHashConfig {
    pub n_bits: usize,
    pub pca_dims: usize,
    /// Fraction of projections ignored at each tail when estimating ranges.
    pub outlier_clip: f64,
}

impl SpectralHashConfig {
    /// `pca_dims = n_bits`, 1% tail clipping.
    pub fn with_bits(n_bits: usize) -> Self {
        SpectralHashConfig {
            n_bits,
            pca_dims: n_bits,
            outlier_clip: 0.01,
        }
    }
}

/// An `n`-bit code. Bit 0 is the first selected eigenfunction and is printed first.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitCode {
    value: u64,
    len: u32,
}

impl BitCode {
    pub fn from_bits(bits: impl IntoIterator<Item = bool>) -> Self {
        let mut value = 0u64;
        let mut len = 0u32;
        for b in bits {
            value = (value << 1) | u64::from(b);
            len += 1;
        }
        assert!(len <= 64, "codes are limited to 64 bits");
        BitCode { value, len }
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        (self.value >> (self.len as usize - 1 - i)) & 1 == 1
    }

    pub fn flip(&self, i: usize) -> Self {
        BitCode {
            value: self.value ^ (1 << (self.len as usize - 1 - i)),
            len: self.len,
        }
    }

    pub fn hamming(&self, other: &BitCode) -> usize {
        (self.value ^ other.value).count_ones() as usize
    }

    /// The code itself followed by each single-bit flip, `len + 1` keys.
    pub fn radius_one(&self) -> Vec<BitCode> {
        std::iter::once(*self)
            .chain((0..self.len()).map(|i| self.flip(i)))
            .collect()
    }
}

impl fmt::Display for BitCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len() {
            write!(f, "{}", u8::from(self.get(i)))?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitCode({self})")
    }
}

/// One selected eigenfunction: principal direction `dim`, mode `mode ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Eigenfunction {
    pub dim: usize,
    pub mode: usize,
}

/// The learned code function: PCA basis, per-direction ranges and the
/// selected eigenfunctions.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralHash {
    pub mean: Vec<f64>,
    /// `pca_dims × input_dim`, orthonormal rows.
    pub components: Matrix,
    pub ranges: Vec<(f64, f64)>,
    pub selected: Vec<Eigenfunction>,
}

impl SpectralHash {
    pub fn fit(inputs: &[Vec<f64>], config: &SpectralHashConfig) -> Result<Self> {
        if inputs.len() < 2 {
            return Err(CrbmError::invalid("spectral hashing needs at least two inputs"));
        }
        let dim = inputs[0].len();
        for u in inputs {
            check_len("hash input", dim, u.len())?;
        }
        if config.pca_dims == 0 || config.pca_dims > dim {
            return Err(CrbmError::invalid(format!(
                "pca_dims must be in 1..={dim}, got {}",
                config.pca_dims
            )));
        }
        if config.n_bits == 0 || config.n_bits > 64 {
            return Err(CrbmError::invalid("n_bits must be in 1..=64"));
        }
        if !(0.0..0.5).contains(&config.outlier_clip) {
            return Err(CrbmError::invalid("outlier_clip must be in [0, 0.5)"));
        }

        let n = inputs.len() as f64;
        let mut mean = vec![0.0; dim];
        for u in inputs {
            crate::linalg::axpy(1.0 / n, u, &mut mean);
        }
        let components = principal_components(inputs, &mean, config.pca_dims);

        let mut ranges = Vec::with_capacity(config.pca_dims);
        let mut projected = vec![Vec::with_capacity(inputs.len()); config.pca_dims];
        for u in inputs {
            for (j, x) in project(&components, &mean, u).into_iter().enumerate() {
                projected[j].push(x);
            }
        }
        for values in projected.iter_mut() {
            values.sort_by(f64::total_cmp);
            let last = (values.len() - 1) as f64;
            let lo = (config.outlier_clip * last).floor() as usize;
            let hi = ((1.0 - config.outlier_clip) * last).ceil() as usize;
            ranges.push((values[lo], values[hi]));
        }

        let selected = select_eigenfunctions(&ranges, config.n_bits)?
            .into_iter()
            .map(|(ef, _)| ef)
            .collect();
        Ok(SpectralHash {
            mean,
            components,
            ranges,
            selected,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn n_bits(&self) -> usize {
        self.selected.len()
    }

    pub fn encode(&self, u: &[f64]) -> Result<BitCode> {
        check_len("hash input", self.input_dim(), u.len())?;
        let x = project(&self.components, &self.mean, u);
        Ok(BitCode::from_bits(self.selected.iter().map(|ef| {
            let (a, b) = self.ranges[ef.dim];
            eigenfunction_bit(x[ef.dim], a, b, ef.mode)
        })))
    }
}

/// `sin(π/2 + mπ·t) > 0` with `t` the clamped position of `x` in `[a, b]`.
pub fn eigenfunction_bit(x: f64, a: f64, b: f64, mode: usize) -> bool {
    let t = ((x - a) / (b - a)).clamp(0.0, 1.0);
    (FRAC_PI_2 + mode as f64 * PI * t).sin() > 0.0
}

/// Chooses the `n_bits` eigenfunctions `(j, m)`, `m ≥ 1`, with the smallest
/// eigenvalue proxy `(m / (b_j − a_j))²`, ties going to smaller `j` then
/// smaller `m`. Directions with an empty range are skipped.
pub fn select_eigenfunctions(
    ranges: &[(f64, f64)],
    n_bits: usize,
) -> Result<Vec<(Eigenfunction, f64)>> {
    let mut pool = Vec::new();
    for (dim, &(a, b)) in ranges.iter().enumerate() {
        let width = b - a;
        if !(width > MIN_RANGE_WIDTH) {
            continue;
        }
        for mode in 1..=n_bits {
            let proxy = (mode as f64 / width).powi(2);
            pool.push((Eigenfunction { dim, mode }, proxy));
        }
    }
    if pool.len() < n_bits {
        return Err(CrbmError::invalid(format!(
            "only {} eigenfunction candidates for {n_bits} bits",
            pool.len()
        )));
    }
    pool.sort_by(|(ea, pa), (eb, pb)| {
        pa.total_cmp(pb)
            .then(ea.dim.cmp(&eb.dim))
            .then(ea.mode.cmp(&eb.mode))
    });
    pool.truncate(n_bits);
    Ok(pool)
}

fn project(components: &Matrix, mean: &[f64], u: &[f64]) -> Vec<f64> {
    let centered: Vec<f64> = u.iter().zip(mean).map(|(x, m)| x - m).collect();
    let mut out = vec![0.0; components.rows()];
    components.accumulate_right_product(&centered, &mut out);
    out
}

/// Top `count` eigenvectors of the sample covariance, as rows, each with
/// its largest-magnitude entry made positive.
fn principal_components(inputs: &[Vec<f64>], mean: &[f64], count: usize) -> Matrix {
    let dim = mean.len();
    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    let mut centered = vec![0.0; dim];
    for u in inputs {
        for (c, (x, m)) in centered.iter_mut().zip(u.iter().zip(mean)) {
            *c = x - m;
        }
        for r in 0..dim {
            if centered[r] == 0.0 {
                continue;
            }
            for c in r..dim {
                cov[(r, c)] += centered[r] * centered[c];
            }
        }
    }
    let scale = 1.0 / (inputs.len() - 1) as f64;
    for r in 0..dim {
        for c in r..dim {
            let x = cov[(r, c)] * scale;
            cov[(r, c)] = x;
            cov[(c, r)] = x;
        }
    }

    let eigen = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[b]
            .total_cmp(&eigen.eigenvalues[a])
            .then(a.cmp(&b))
    });

    let mut components = Matrix::zeros(count, dim);
    for (row, &idx) in order.iter().take(count).enumerate() {
        let column = eigen.eigenvectors.column(idx);
        let mut pivot = 0;
        for i in 1..dim {
            if column[i].abs() > column[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if column[pivot] < 0.0 { -1.0 } else { 1.0 };
        for (c, x) in components.row_mut(row).iter_mut().enumerate() {
            *x = sign * column[c];
        }
    }
    components
}

/// Spectral hash plus a table from codes to the training targets whose
/// inputs produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralHashIndex {
    pub hash: SpectralHash,
    n_visible: usize,
    table: HashMap<BitCode, CandidateSet>,
}

impl SpectralHashIndex {
    pub fn build(pairs: &[(Vec<f64>, BitVector)], config: &SpectralHashConfig) -> Result<Self> {
        if pairs.is_empty() {
            return Err(CrbmError::invalid("cannot build an index from no pairs"));
        }
        let inputs: Vec<Vec<f64>> = pairs.iter().map(|(u, _)| u.clone()).collect();
        let hash = SpectralHash::fit(&inputs, config)?;
        let n_visible = pairs[0].1.len();
        let mut index = SpectralHashIndex {
            hash,
            n_visible,
            table: HashMap::new(),
        };
        for (u, v) in pairs {
            index.insert(u, v.clone())?;
        }
        Ok(index)
    }

    fn insert(&mut self, u: &[f64], v: BitVector) -> Result<()> {
        check_len("indexed target", self.n_visible, v.len())?;
        let code = self.hash.encode(u)?;
        self.table.entry(code).or_default().insert(v)?;
        Ok(())
    }

    pub fn n_visible(&self) -> usize {
        self.n_visible
    }

    pub fn encode(&self, u: &[f64]) -> Result<BitCode> {
        self.hash.encode(u)
    }

    pub fn bucket(&self, code: &BitCode) -> Option<&CandidateSet> {
        self.table.get(code)
    }

    pub fn buckets(&self) -> impl Iterator<Item = (&BitCode, &CandidateSet)> {
        self.table.iter()
    }

    /// Union of the buckets at hamming distance ≤ 1 from `encode(u)`;
    /// possibly empty.
    pub fn retrieve(&self, u: &[f64]) -> Result<CandidateSet> {
        let code = self.encode(u)?;
        let mut out = CandidateSet::new();
        for key in code.radius_one() {
            if let Some(bucket) = self.table.get(&key) {
                out.extend_from(bucket)?;
            }
        }
        Ok(out)
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let h = &self.hash;
        out.write_all(MAGIC)?;
        for x in [h.input_dim(), h.components.rows(), h.n_bits(), self.n_visible] {
            out.write_all(&(x as u32).to_le_bytes())?;
        }
        for &x in h.mean.iter().chain(h.components.as_slice()) {
            out.write_all(&x.to_le_bytes())?;
        }
        for &(a, b) in &h.ranges {
            out.write_all(&a.to_le_bytes())?;
            out.write_all(&b.to_le_bytes())?;
        }
        for ef in &h.selected {
            out.write_all(&(ef.dim as u32).to_le_bytes())?;
            out.write_all(&(ef.mode as u32).to_le_bytes())?;
        }
        let mut codes: Vec<&BitCode> = self.table.keys().collect();
        codes.sort();
        out.write_all(&(codes.len() as u32).to_le_bytes())?;
        for code in codes {
            let bucket = &self.table[code];
            out.write_all(&code.value.to_le_bytes())?;
            out.write_all(&(bucket.len() as u32).to_le_bytes())?;
            for v in bucket {
                out.write_all(&v.pack())?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 5];
        read_bytes(&mut input, &mut magic)?;
        if &magic != MAGIC {
            return Err(CrbmError::format("index", "bad magic"));
        }
        let input_dim = read_u32(&mut input)? as usize;
        let pca_dims = read_u32(&mut input)? as usize;
        let n_bits = read_u32(&mut input)? as usize;
        let n_visible = read_u32(&mut input)? as usize;
        if n_bits == 0 || n_bits > 64 {
            return Err(CrbmError::format("index", "code length out of range"));
        }
        let mean = (0..input_dim)
            .map(|_| read_f64(&mut input))
            .collect::<Result<Vec<_>>>()?;
        let comp = (0..pca_dims * input_dim)
            .map(|_| read_f64(&mut input))
            .collect::<Result<Vec<_>>>()?;
        let components = Matrix::from_vec(pca_dims, input_dim, comp);
        let ranges = (0..pca_dims)
            .map(|_| Ok((read_f64(&mut input)?, read_f64(&mut input)?)))
            .collect::<Result<Vec<_>>>()?;
        let mut selected = Vec::with_capacity(n_bits);
        for _ in 0..n_bits {
            let dim = read_u32(&mut input)? as usize;
            let mode = read_u32(&mut input)? as usize;
            if dim >= pca_dims || mode == 0 {
                return Err(CrbmError::format("index", "invalid eigenfunction"));
            }
            selected.push(Eigenfunction { dim, mode });
        }
        let entries = read_u32(&mut input)? as usize;
        let mut table = HashMap::with_capacity(entries);
        let payload = n_visible.div_ceil(8);
        for _ in 0..entries {
            let mut buf = [0u8; 8];
            read_bytes(&mut input, &mut buf)?;
            let value = u64::from_le_bytes(buf);
            if n_bits < 64 && value >> n_bits != 0 {
                return Err(CrbmError::format("index", "code wider than n_bits"));
            }
            let code = BitCode {
                value,
                len: n_bits as u32,
            };
            let count = read_u32(&mut input)? as usize;
            let mut bucket = CandidateSet::new();
            let mut bytes = vec![0u8; payload];
            for _ in 0..count {
                read_bytes(&mut input, &mut bytes)?;
                bucket.insert(BitVector::unpack(&bytes, n_visible)?)?;
            }
            table.insert(code, bucket);
        }
        Ok(SpectralHashIndex {
            hash: SpectralHash {
                mean,
                components,
                ranges,
                selected,
            },
            n_visible,
            table,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?))
    }
}

fn read_bytes<R: Read>(input: &mut R, buf: &mut [u8]) -> Result<()> {
    input.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            CrbmError::format("index", "truncated file")
        } else {
            CrbmError::Io(e)
        }
    })
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_bytes(input, &mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64<R: Read>(input: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    read_bytes(input, &mut buf)?;
    Ok(f64::from_le_bytes(buf))
}
