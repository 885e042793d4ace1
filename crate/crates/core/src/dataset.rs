//! Vector datasets: `fvecs`/`ivecs` I/O, query splits, exact ground truth and
//! synthetic clustered data.
//!
//! `fvecs` layout, repeated once per record:
//!
//! 1. `i32` little-endian: vector dimension `d`
//! 2. `d` little-endian `f32` components
//!
//! `ivecs` is identical with `i32` components. An empty file is a valid
//! matrix with zero rows and unknown (zero) dimension.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::sq_l2;
use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Copy> Matrix<T> {
    pub fn new(dim: usize, data: Vec<T>) -> Result<Self> {
        if dim == 0 && !data.is_empty() {
            return Err(Error::invalid("zero dimension with non-empty data"));
        }
        if dim > 0 && data.len() % dim != 0 {
            return Err(Error::invalid(format!(
                "data length {} is not a multiple of dim {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            data: Vec::new(),
        }
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Ok(Self::empty(0));
        };
        let dim = first.as_ref().len();
        let mut data = Vec::with_capacity(dim * rows.len());
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        (0..self.rows()).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn push_row(&mut self, row: &[T]) -> Result<()> {
        if self.dim == 0 && self.data.is_empty() {
            self.dim = row.len();
        }
        if row.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                actual: row.len(),
            });
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    /// Rows `[start, end)` as a new matrix.
    pub fn slice_rows(&self, start: usize, end: usize) -> Self {
        Self {
            dim: self.dim,
            data: self.data[start * self.dim..end * self.dim].to_vec(),
        }
    }
}

/// Little-endian 4-byte scalar payload of a `*vecs` file.
trait VecsScalar: Copy {
    fn from_le(b: [u8; 4]) -> Self;
    fn to_le(self) -> [u8; 4];
}

impl VecsScalar for f32 {
    fn from_le(b: [u8; 4]) -> Self {
        f32::from_le_bytes(b)
    }
    fn to_le(self) -> [u8; 4] {
        self.to_le_bytes()
    }
}

impl VecsScalar for i32 {
    fn from_le(b: [u8; 4]) -> Self {
        i32::from_le_bytes(b)
    }
    fn to_le(self) -> [u8; 4] {
        self.to_le_bytes()
    }
}

fn parse_vecs<T: VecsScalar>(bytes: &[u8]) -> Result<Matrix<T>> {
    let mut dim: Option<usize> = None;
    let mut data = Vec::new();
    let mut pos = 0usize;
    while pos < bytes.len() {
        let record_start = pos;
        if bytes.len() - pos < 4 {
            return Err(Error::Format {
                offset: pos as u64,
                msg: "truncated dimension header".into(),
            });
        }
        let d = i32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap());
        pos += 4;
        if d <= 0 {
            return Err(Error::Format {
                offset: record_start as u64,
                msg: format!("non-positive dimension {d}"),
            });
        }
        let d = d as usize;
        match dim {
            None => dim = Some(d),
            Some(prev) if prev != d => {
                return Err(Error::Format {
                    offset: record_start as u64,
                    msg: format!("inconsistent dimension: record has {d}, expected {prev}"),
                })
            }
            _ => {}
        }
        let payload = d * 4;
        if bytes.len() - pos < payload {
            return Err(Error::Format {
                offset: pos as u64,
                msg: format!(
                    "truncated record: need {payload} payload bytes, {} left",
                    bytes.len() - pos
                ),
            });
        }
        data.extend(
            bytes[pos..pos + payload]
                .chunks_exact(4)
                .map(|c| T::from_le(c.try_into().unwrap())),
        );
        pos += payload;
    }
    Matrix::new(dim.unwrap_or(0), data)
}

fn encode_vecs<T: VecsScalar>(m: &Matrix<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(m.rows() * (4 + 4 * m.dim()));
    for row in m.iter_rows() {
        out.extend_from_slice(&(m.dim() as i32).to_le_bytes());
        for v in row {
            out.extend_from_slice(&v.to_le());
        }
    }
    out
}

pub fn read_fvecs(bytes: &[u8]) -> Result<Matrix<f32>> {
    parse_vecs(bytes)
}

pub fn read_ivecs(bytes: &[u8]) -> Result<Matrix<i32>> {
    parse_vecs(bytes)
}

pub fn load_fvecs(path: impl AsRef<Path>) -> Result<Matrix<f32>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_fvecs(&bytes)
}

pub fn load_ivecs(path: impl AsRef<Path>) -> Result<Matrix<i32>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_ivecs(&bytes)
}

pub fn encode_fvecs(m: &Matrix<f32>) -> Vec<u8> {
    encode_vecs(m)
}

pub fn encode_ivecs(m: &Matrix<i32>) -> Vec<u8> {
    encode_vecs(m)
}

pub fn write_fvecs(path: impl AsRef<Path>, m: &Matrix<f32>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_vecs(m))
}

pub fn write_ivecs(path: impl AsRef<Path>, m: &Matrix<i32>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_vecs(m))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

fn nearest(base: &Matrix<f32>, q: &[f32]) -> u32 {
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for (i, row) in base.iter_rows().enumerate() {
        let d = sq_l2(row, q);
        // strict comparison keeps the lowest index on ties
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best as u32
}

/// Exact nearest base row for every query (squared Euclidean, lowest index on ties).
pub fn brute_force_gt(base: &Matrix<f32>, queries: &Matrix<f32>) -> Result<Vec<u32>> {
    if base.is_empty() {
        return Err(Error::invalid("base set is empty"));
    }
    if !queries.is_empty() && queries.dim() != base.dim() {
        return Err(Error::DimMismatch {
            expected: base.dim(),
            actual: queries.dim(),
        });
    }
    Ok((0..queries.rows())
        .into_par_iter()
        .map(|i| nearest(base, queries.row(i)))
        .collect())
}

/// Index minimizing the summed Euclidean distance to every base point.
pub fn medoid(base: &Matrix<f32>) -> Result<u32> {
    if base.is_empty() {
        return Err(Error::invalid("base set is empty"));
    }
    let n = base.rows();
    let sums: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = base.row(i);
            (0..n).map(|j| sq_l2(a, base.row(j)).sqrt()).sum()
        })
        .collect();
    let mut best = 0usize;
    for (i, s) in sums.iter().enumerate() {
        if *s < sums[best] {
            best = i;
        }
    }
    Ok(best as u32)
}

/// Drops rows of `queries` that are bit-identical to some row of `reference`.
///
/// Used to keep held-out test queries out of a training set drawn from the
/// same pool. Only exact duplicates are detected.
pub fn remove_exact_duplicates(queries: &Matrix<f32>, reference: &Matrix<f32>) -> Matrix<f32> {
    let seen: HashSet<Vec<u32>> = reference
        .iter_rows()
        .map(|r| r.iter().map(|v| v.to_bits()).collect())
        .collect();
    let mut out = Matrix::empty(queries.dim());
    for row in queries.iter_rows() {
        let key: Vec<u32> = row.iter().map(|v| v.to_bits()).collect();
        if !seen.contains(&key) {
            out.data.extend_from_slice(row);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// Base vectors plus train/validation/test queries and their exact nearest neighbors.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub base: Matrix<f32>,
    pub train: Matrix<f32>,
    pub val: Matrix<f32>,
    pub test: Matrix<f32>,
    pub gt_train: Option<Vec<u32>>,
    pub gt_val: Option<Vec<u32>>,
    pub gt_test: Option<Vec<u32>>,
}

impl Dataset {
    pub fn new(
        base: Matrix<f32>,
        train: Matrix<f32>,
        val: Matrix<f32>,
        test: Matrix<f32>,
    ) -> Result<Self> {
        if base.is_empty() {
            return Err(Error::invalid("base set is empty"));
        }
        for q in [&train, &val, &test] {
            if !q.is_empty() && q.dim() != base.dim() {
                return Err(Error::DimMismatch {
                    expected: base.dim(),
                    actual: q.dim(),
                });
            }
        }
        Ok(Self {
            base,
            train,
            val,
            test,
            gt_train: None,
            gt_val: None,
            gt_test: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn queries(&self, split: Split) -> &Matrix<f32> {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn gt(&self, split: Split) -> Option<&[u32]> {
        match split {
            Split::Train => self.gt_train.as_deref(),
            Split::Val => self.gt_val.as_deref(),
            Split::Test => self.gt_test.as_deref(),
        }
    }

    pub fn require_gt(&self, split: Split) -> Result<&[u32]> {
        self.gt(split).ok_or_else(|| {
            Error::invalid(format!("ground truth for split `{}` missing", split.name()))
        })
    }

    fn gt_slot(&mut self, split: Split) -> &mut Option<Vec<u32>> {
        match split {
            Split::Train => &mut self.gt_train,
            Split::Val => &mut self.gt_val,
            Split::Test => &mut self.gt_test,
        }
    }

    /// Fills every missing ground-truth vector by brute force.
    pub fn compute_gt(&mut self) -> Result<()> {
        for split in Split::ALL {
            if self.gt(split).is_none() {
                let gt = brute_force_gt(&self.base, self.queries(split))?;
                *self.gt_slot(split) = Some(gt);
            }
        }
        Ok(())
    }

    fn check_gt(&self) -> Result<()> {
        let n = self.base.rows();
        for split in Split::ALL {
            if let Some(gt) = self.gt(split) {
                if gt.len() != self.queries(split).rows() {
                    return Err(Error::invalid(format!(
                        "split `{}`: {} ground-truth ids for {} queries",
                        split.name(),
                        gt.len(),
                        self.queries(split).rows()
                    )));
                }
                if let Some(bad) = gt.iter().find(|&&id| id as usize >= n) {
                    return Err(Error::invalid(format!(
                        "split `{}`: ground-truth id {bad} out of range (n = {n})",
                        split.name()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Writes all matrices plus a `manifest.toml` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>, seed: Option<u64>) -> Result<Manifest> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_fvecs(dir.join("base.fvecs"), &self.base)?;
        let mut splits = Vec::new();
        for split in Split::ALL {
            let qpath = format!("{}.fvecs", split.name());
            write_fvecs(dir.join(&qpath), self.queries(split))?;
            let gt = match self.gt(split) {
                Some(ids) => {
                    let gpath = format!("gt_{}.ivecs", split.name());
                    let rows: Vec<[i32; 1]> = ids.iter().map(|&i| [i as i32]).collect();
                    write_ivecs(dir.join(&gpath), &Matrix::from_rows(&rows)?)?;
                    Some(gpath)
                }
                None => None,
            };
            splits.push(SplitEntry {
                name: split,
                path: qpath,
                rows: self.queries(split).rows(),
                gt,
            });
        }
        let manifest = Manifest {
            dim: self.dim(),
            seed,
            base: BaseEntry {
                path: "base.fvecs".into(),
                rows: self.base.rows(),
            },
            splits,
        };
        let text = toml::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
        write_bytes(&dir.join(MANIFEST_FILE), text.as_bytes())?;
        Ok(manifest)
    }

    /// Loads a dataset described by a manifest; paths are relative to the manifest.
    pub fn load_manifest(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: Manifest = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        manifest.load(&root)
    }
}

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseEntry {
    pub path: String,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitEntry {
    pub name: Split,
    pub path: String,
    pub rows: usize,
    pub gt: Option<String>,
}

/// On-disk description of a prepared dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dim: usize,
    pub seed: Option<u64>,
    pub base: BaseEntry,
    pub splits: Vec<SplitEntry>,
}

impl Manifest {
    pub fn load(&self, root: &Path) -> Result<Dataset> {
        let resolve = |p: &str| -> PathBuf { root.join(p) };
        let base = load_fvecs(resolve(&self.base.path))?;
        check_rows("base", base.rows(), self.base.rows)?;
        let mut queries = [None, None, None];
        let mut gts = [None, None, None];
        for entry in &self.splits {
            let idx = entry.name as usize;
            let m = load_fvecs(resolve(&entry.path))?;
            check_rows(entry.name.name(), m.rows(), entry.rows)?;
            if let Some(g) = &entry.gt {
                let ids = load_ivecs(resolve(g))?;
                if ids.dim() > 1 || ids.as_slice().iter().any(|&v| v < 0) {
                    return Err(Error::invalid(format!("malformed ground truth file {g}")));
                }
                gts[idx] = Some(ids.as_slice().iter().map(|&v| v as u32).collect());
            }
            queries[idx] = Some(m);
        }
        let [train, val, test] = queries.map(|q| q.unwrap_or_else(|| Matrix::empty(base.dim())));
        let mut ds = Dataset::new(base, train, val, test)?;
        let [gt_train, gt_val, gt_test] = gts;
        ds.gt_train = gt_train;
        ds.gt_val = gt_val;
        ds.gt_test = gt_test;
        ds.check_gt()?;
        Ok(ds)
    }
}

fn check_rows(what: &str, actual: usize, expected: usize) -> Result<()> {
    if actual != expected {
        return Err(Error::invalid(format!(
            "{what}: manifest says {expected} rows, file has {actual}"
        )));
    }
    Ok(())
}

/// Parameters for Gaussian-blob synthetic data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_clusters: usize,
    pub per_cluster: usize,
    pub dim: usize,
    pub spread: f32,
    pub seed: u64,
    #[serde(default)]
    pub n_train: usize,
    #[serde(default)]
    pub n_val: usize,
    #[serde(default)]
    pub n_test: usize,
}

impl SynthSpec {
    pub fn new(n_clusters: usize, per_cluster: usize, dim: usize, spread: f32, seed: u64) -> Self {
        Self {
            n_clusters,
            per_cluster,
            dim,
            spread,
            seed,
            n_train: 0,
            n_val: 0,
            n_test: 0,
        }
    }

    pub fn with_queries(mut self, n_train: usize, n_val: usize, n_test: usize) -> Self {
        self.n_train = n_train;
        self.n_val = n_val;
        self.n_test = n_test;
        self
    }
}

/// Gaussian blobs: cluster centers are standard normal, points are
/// `center + spread * N(0, I)`. Base rows are stored cluster by cluster;
/// queries pick a cluster uniformly at random. Ground truth is filled in.
pub fn synth_clusters(spec: &SynthSpec) -> Result<Dataset> {
    if spec.n_clusters == 0 || spec.per_cluster == 0 || spec.dim == 0 {
        return Err(Error::invalid("cluster count, cluster size and dim must be positive"));
    }
    if !(spec.spread.is_finite() && spec.spread >= 0.0) {
        return Err(Error::invalid("spread must be finite and non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dim = spec.dim;
    let centers: Vec<Vec<f32>> = (0..spec.n_clusters)
        .map(|_| (0..dim).map(|_| rng.sample::<f32, _>(StandardNormal)).collect())
        .collect();
    let point = |rng: &mut ChaCha8Rng, c: usize, out: &mut Vec<f32>| {
        for &x in &centers[c] {
            out.push(x + spec.spread * rng.sample::<f32, _>(StandardNormal));
        }
    };
    let mut base = Vec::with_capacity(spec.n_clusters * spec.per_cluster * dim);
    for c in 0..spec.n_clusters {
        for _ in 0..spec.per_cluster {
            point(&mut rng, c, &mut base);
        }
    }
    let draw = |n: usize, rng: &mut ChaCha8Rng| -> Result<Matrix<f32>> {
        let mut data = Vec::with_capacity(n * dim);
        for _ in 0..n {
            let c = rng.random_range(0..spec.n_clusters);
            point(rng, c, &mut data);
        }
        Matrix::new(dim, data)
    };
    let train = draw(spec.n_train, &mut rng)?;
    let val = draw(spec.n_val, &mut rng)?;
    let test = draw(spec.n_test, &mut rng)?;
    let mut ds = Dataset::new(Matrix::new(dim, base)?, train, val, test)?;
    ds.compute_gt()?;
    Ok(ds)
}
