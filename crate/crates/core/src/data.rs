//! MNIST IDX ingestion, class-uniform subsetting, and train/validation splits.
//!
//! IDX layout: a 4-byte big-endian magic `0x0000_08NN` (`08` = unsigned
//! byte, `NN` = number of dimensions), one big-endian `u32` per dimension,
//! then the raw bytes in row-major order.

use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{derive_seed, Matrix, SeededRng};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Decoded IDX image file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn pixels_per_image(&self) -> usize {
        self.rows * self.cols
    }
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(Error::Truncated {
            expected: offset + 4,
            found: bytes.len(),
        })
}

/// Checks the magic and returns the dimension sizes and the payload.
fn parse_idx(bytes: &[u8], magic: u32) -> Result<(Vec<usize>, &[u8])> {
    let found = read_u32(bytes, 0)?;
    if found != magic {
        return Err(Error::BadMagic {
            expected: magic,
            found,
        });
    }
    let ndims = (magic & 0xff) as usize;
    let dims = (0..ndims)
        .map(|i| read_u32(bytes, 4 + 4 * i).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let header = 4 + 4 * ndims;
    let payload = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::InvalidArgument("IDX dimensions overflow".into()))?;
    let expected = header
        .checked_add(payload)
        .ok_or_else(|| Error::InvalidArgument("IDX dimensions overflow".into()))?;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::TrailingBytes(bytes.len() - expected));
    }
    Ok((dims, &bytes[header..]))
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let (dims, payload) = parse_idx(bytes, IDX_IMAGES_MAGIC)?;
    Ok(IdxImages {
        count: dims[0],
        rows: dims[1],
        cols: dims[2],
        pixels: payload.to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let (_, payload) = parse_idx(bytes, IDX_LABELS_MAGIC)?;
    Ok(payload.to_vec())
}

pub fn encode_idx_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    out.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    for d in [images.count, images.rows, images.cols] {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Inputs in `[0, 1]` with integer class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub inputs: Matrix,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl Dataset {
    pub fn new(inputs: Matrix, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if inputs.rows() != labels.len() {
            return Err(Error::CountMismatch {
                images: inputs.rows(),
                labels: labels.len(),
            });
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        if inputs.as_slice().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("inputs must lie in [0, 1]".into()));
        }
        Ok(Dataset {
            inputs,
            labels,
            classes,
        })
    }

    /// Scales bytes by 1/255; the class count is `max label + 1`.
    pub fn from_idx(images: &IdxImages, labels: &[u8]) -> Result<Self> {
        if images.count != labels.len() {
            return Err(Error::CountMismatch {
                images: images.count,
                labels: labels.len(),
            });
        }
        let inputs = Matrix::from_vec(
            images.count,
            images.pixels_per_image(),
            images.pixels.iter().map(|&b| b as f64 / 255.0).collect(),
        )?;
        let classes = labels.iter().max().map_or(0, |&m| m as usize + 1);
        Self::new(inputs, labels.iter().map(|&l| l as usize).collect(), classes)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            inputs: self.inputs.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn load_mnist_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let images = parse_idx_images(&read_file(images_path.as_ref())?)?;
    let labels = parse_idx_labels(&read_file(labels_path.as_ref())?)?;
    Dataset::from_idx(&images, &labels)
}

/// Draws `size` samples with per-class counts differing by at most one; the
/// remainder goes to the lowest class ids. Output order is shuffled.
pub fn uniform_subset(ds: &Dataset, size: usize, rng: &mut SeededRng) -> Result<Dataset> {
    if size > ds.len() {
        return Err(Error::InvalidArgument(format!(
            "subset of {size} requested from {} samples",
            ds.len()
        )));
    }
    if ds.classes == 0 {
        return Err(Error::EmptyData);
    }
    let base = size / ds.classes;
    let extra = size % ds.classes;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.classes];
    for (i, &l) in ds.labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut chosen = Vec::with_capacity(size);
    for (class, members) in by_class.iter_mut().enumerate() {
        let want = base + usize::from(class < extra);
        if members.len() < want {
            return Err(Error::InsufficientClassSamples {
                class,
                available: members.len(),
                required: want,
            });
        }
        rng.shuffle(members);
        chosen.extend_from_slice(&members[..want]);
    }
    rng.shuffle(&mut chosen);
    Ok(ds.select(&chosen))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitSpec {
    pub n_splits: usize,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            n_splits: 3,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub index: usize,
    pub train: Dataset,
    pub validation: Dataset,
}

/// Validation rows for a dataset of `n`: `round(n·vf)`.
pub fn validation_size(n: usize, validation_fraction: f64) -> usize {
    (n as f64 * validation_fraction).round() as usize
}

/// Split `index` of `spec`: an independent seeded shuffle cut into train and
/// validation parts.
pub fn make_split(ds: &Dataset, spec: &SplitSpec, index: usize) -> Result<Split> {
    let n_val = validation_size(ds.len(), spec.validation_fraction);
    if !(spec.validation_fraction > 0.0 && spec.validation_fraction < 1.0)
        || n_val == 0
        || n_val >= ds.len()
    {
        return Err(Error::InvalidArgument(format!(
            "validation fraction {} leaves an empty side for {} samples",
            spec.validation_fraction,
            ds.len()
        )));
    }
    let mut rng = SeededRng::new(derive_seed(spec.seed, index as u64));
    let perm = rng.permutation(ds.len());
    let (val, train) = perm.split_at(n_val);
    Ok(Split {
        index,
        train: ds.select(train),
        validation: ds.select(val),
    })
}

pub fn make_splits(ds: &Dataset, spec: &SplitSpec) -> Result<Vec<Split>> {
    if spec.n_splits == 0 {
        return Err(Error::InvalidArgument("n_splits must be at least 1".into()));
    }
    (0..spec.n_splits).map(|i| make_split(ds, spec, i)).collect()
}
