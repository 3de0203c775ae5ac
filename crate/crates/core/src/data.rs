//! Datasets: IDX ingestion, a synthetic threshold family with closed-form
//! risks, and index views used for splitting.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use ndarray::{Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, IdxError, Result};
use crate::rng::stream_rng;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Feature matrix with one row per example, integer labels in `[0, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Array2<f32>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    /// Image height and width when the rows are flattened images.
    pub image_shape: Option<(usize, usize)>,
    pub provenance: String,
}

impl Dataset {
    pub fn new(
        features: Array2<f32>,
        labels: Vec<usize>,
        num_classes: usize,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: features.nrows(),
                got: labels.len(),
            });
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(invalid(format!("label {y} outside [0, {num_classes})")));
        }
        Ok(Self {
            features,
            labels,
            num_classes,
            image_shape: None,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn x(&self, i: usize) -> ArrayView1<'_, f32> {
        self.features.row(i)
    }

    pub fn view(&self) -> View<'_> {
        View::new(self, (0..self.len()).collect())
    }

    /// Copy of the rows `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let features = self.features.select(ndarray::Axis(0), indices);
        Dataset {
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
            image_shape: self.image_shape,
            provenance: self.provenance.clone(),
        }
    }

    /// Per-class proportional subsample of `size` rows, shuffled.
    ///
    /// Class quotas use largest remainders so they sum to `size` exactly.
    pub fn stratified_subsample(&self, size: usize, seed: u64) -> Result<Dataset> {
        if size > self.len() {
            return Err(invalid(format!(
                "subsample of {size} requested from {} rows",
                self.len()
            )));
        }
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); self.num_classes];
        for (i, &y) in self.labels.iter().enumerate() {
            by_class[y].push(i);
        }
        let total = self.len() as f64;
        let exact: Vec<f64> = by_class
            .iter()
            .map(|c| size as f64 * c.len() as f64 / total)
            .collect();
        let mut quota: Vec<usize> = exact.iter().map(|q| q.floor() as usize).collect();
        let mut rest = size - quota.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..self.num_classes).collect();
        order.sort_by(|&a, &b| {
            let ra = exact[a] - exact[a].floor();
            let rb = exact[b] - exact[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &c in order.iter().cycle() {
            if rest == 0 {
                break;
            }
            if quota[c] < by_class[c].len() {
                quota[c] += 1;
                rest -= 1;
            }
        }
        let mut rng = stream_rng(seed, 0);
        let mut chosen = Vec::with_capacity(size);
        for (members, &q) in by_class.iter_mut().zip(&quota) {
            members.shuffle(&mut rng);
            chosen.extend_from_slice(&members[..q]);
        }
        chosen.shuffle(&mut rng);
        let mut out = self.select(&chosen);
        out.provenance = format!("{} [stratified {size}, seed {seed}]", self.provenance);
        Ok(out)
    }
}

/// A subset of a dataset's rows, addressed by position.
#[derive(Debug, Clone)]
pub struct View<'a> {
    pub data: &'a Dataset,
    pub indices: Vec<usize>,
}

impl<'a> View<'a> {
    pub fn new(data: &'a Dataset, indices: Vec<usize>) -> Self {
        Self { data, indices }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn x(&self, pos: usize) -> ArrayView1<'a, f32> {
        self.data.features.row(self.indices[pos])
    }

    pub fn y(&self, pos: usize) -> usize {
        self.data.labels[self.indices[pos]]
    }

    pub fn num_classes(&self) -> usize {
        self.data.num_classes
    }

    /// Gathers rows `positions` of the view into an `f64` matrix.
    pub fn batch(&self, positions: &[usize]) -> Array2<f64> {
        let d = self.data.dim();
        let mut out = Array2::zeros((positions.len(), d));
        for (r, &p) in positions.iter().enumerate() {
            out.row_mut(r)
                .iter_mut()
                .zip(self.x(p))
                .for_each(|(o, &v)| *o = f64::from(v));
        }
        out
    }

    pub fn labels(&self) -> Vec<usize> {
        self.indices.iter().map(|&i| self.data.labels[i]).collect()
    }
}

fn read_maybe_gz(path: &Path) -> std::result::Result<Vec<u8>, IdxError> {
    let io = |source| IdxError::Io {
        path: path.to_path_buf(),
        source,
    };
    let raw = fs::read(path).map_err(io)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..]).read_to_end(&mut out).map_err(io)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().unwrap())
}

fn parse_header(
    path: &Path,
    bytes: &[u8],
    magic: u32,
    dims: usize,
) -> std::result::Result<Vec<usize>, IdxError> {
    let header = 4 + 4 * dims;
    if bytes.len() < 4 {
        return Err(IdxError::Truncated {
            path: path.to_path_buf(),
            expected: header,
            found: bytes.len(),
        });
    }
    let found = be_u32(bytes, 0);
    if found != magic {
        return Err(IdxError::BadMagic {
            path: path.to_path_buf(),
            expected: magic,
            found,
        });
    }
    if bytes.len() < header {
        return Err(IdxError::Truncated {
            path: path.to_path_buf(),
            expected: header,
            found: bytes.len(),
        });
    }
    let shape: Vec<usize> = (0..dims).map(|d| be_u32(bytes, 4 + 4 * d) as usize).collect();
    let expected = header + shape.iter().product::<usize>();
    if bytes.len() < expected {
        return Err(IdxError::Truncated {
            path: path.to_path_buf(),
            expected,
            found: bytes.len(),
        });
    }
    Ok(shape)
}

/// Reads an IDX image file (magic `0x00000803`) and label file (magic
/// `0x00000801`), either raw or gzip-compressed. Pixels are scaled to
/// `[0, 1]` by dividing by 255.
pub fn load_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Dataset> {
    let (images, labels) = (images.as_ref(), labels.as_ref());
    let img = read_maybe_gz(images)?;
    let shape = parse_header(images, &img, IDX_IMAGES_MAGIC, 3)?;
    let (n, rows, cols) = (shape[0], shape[1], shape[2]);
    let lab = read_maybe_gz(labels)?;
    let n_labels = parse_header(labels, &lab, IDX_LABELS_MAGIC, 1)?[0];
    if n != n_labels {
        return Err(IdxError::CountMismatch {
            images: n,
            labels: n_labels,
        }
        .into());
    }
    let pixels = &img[16..16 + n * rows * cols];
    let features = Array2::from_shape_vec(
        (n, rows * cols),
        pixels.iter().map(|&p| f32::from(p) / 255.0).collect(),
    )
    .expect("shape matches payload length");
    let labels_vec: Vec<usize> = lab[8..8 + n].iter().map(|&y| usize::from(y)).collect();
    let num_classes = labels_vec.iter().max().map_or(0, |&m| m + 1);
    let mut ds = Dataset::new(features, labels_vec, num_classes, images.display().to_string())?;
    ds.image_shape = Some((rows, cols));
    Ok(ds)
}

/// Locates `{prefix}-images-idx3-ubyte` and `{prefix}-labels-idx1-ubyte` in
/// `dir`, accepting the `.idx3-ubyte` spelling and a `.gz` suffix.
pub fn find_idx_pair(dir: impl AsRef<Path>, prefix: &str) -> Result<(PathBuf, PathBuf)> {
    let dir = dir.as_ref();
    let find = |kind: &str, dims: u8| -> Result<PathBuf> {
        for sep in ['-', '.'] {
            for gz in ["", ".gz"] {
                let p = dir.join(format!("{prefix}-{kind}{sep}idx{dims}-ubyte{gz}"));
                if p.is_file() {
                    return Ok(p);
                }
            }
        }
        Err(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("no {prefix} {kind} IDX file in {}", dir.display()),
        )
        .into())
    };
    Ok((find("images", 3)?, find("labels", 1)?))
}

/// Writes `ds` back as an uncompressed IDX image/label pair. Pixels are
/// re-quantized with `round(255·x)`, so a loaded file round-trips
/// byte-for-byte.
pub fn write_idx(ds: &Dataset, images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<()> {
    let (rows, cols) = ds.image_shape.unwrap_or((1, ds.dim()));
    if rows * cols != ds.dim() {
        return Err(Error::ShapeMismatch(format!(
            "image shape {rows}x{cols} does not match {} features",
            ds.dim()
        )));
    }
    let mut img = Vec::with_capacity(16 + ds.features.len());
    for v in [IDX_IMAGES_MAGIC, ds.len() as u32, rows as u32, cols as u32] {
        img.extend_from_slice(&v.to_be_bytes());
    }
    img.extend(ds.features.iter().map(|&x| (x * 255.0).round().clamp(0.0, 255.0) as u8));
    let mut lab = Vec::with_capacity(8 + ds.len());
    for v in [IDX_LABELS_MAGIC, ds.len() as u32] {
        lab.extend_from_slice(&v.to_be_bytes());
    }
    for &y in &ds.labels {
        lab.push(u8::try_from(y).map_err(|_| invalid(format!("label {y} does not fit a byte")))?);
    }
    fs::File::create(images)?.write_all(&img)?;
    fs::File::create(labels)?.write_all(&lab)?;
    Ok(())
}

/// `X ~ U[0,1]`, `Y = 1[X ≥ θ*]` with each label flipped with probability η.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdDistribution {
    pub theta_star: f64,
    pub eta: f64,
}

impl ThresholdDistribution {
    pub fn new(theta_star: f64, eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta_star) {
            return Err(invalid(format!("theta_star {theta_star} outside [0, 1]")));
        }
        if !(0.0..0.5).contains(&eta) {
            return Err(invalid(format!("label noise {eta} outside [0, 0.5)")));
        }
        Ok(Self { theta_star, eta })
    }
}

pub fn gen_threshold_data(dist: &ThresholdDistribution, n: usize, seed: u64) -> Dataset {
    let mut rng = stream_rng(seed, 0);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        // Labels are computed from the stored f32 value so that every
        // threshold rule sees exactly the feature the label was made from.
        let x = rng.random::<f64>() as f32;
        let clean = usize::from(f64::from(x) >= dist.theta_star);
        let flip = rng.random::<f64>() < dist.eta;
        xs.push(x);
        ys.push(if flip { 1 - clean } else { clean });
    }
    let features = Array2::from_shape_vec((n, 1), xs).expect("n x 1");
    Dataset::new(
        features,
        ys,
        2,
        format!("threshold(theta*={}, eta={}, seed={seed})", dist.theta_star, dist.eta),
    )
    .expect("labels are binary")
}

/// Exact risk of `h_θ(x) = 1[x ≥ θ]`: `η + (1 − 2η)·|θ − θ*|`.
pub fn true_risk_threshold(theta: f64, dist: &ThresholdDistribution) -> f64 {
    dist.eta + (1.0 - 2.0 * dist.eta) * (theta - dist.theta_star).abs()
}
