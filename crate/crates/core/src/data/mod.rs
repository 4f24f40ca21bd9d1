//! Dataset domain types, on-disk format, synthetic generation and label statistics.

mod io;
mod ppm;
mod split;
mod stats;
mod synth;

pub use io::{load_dataset, write_dataset, MANIFEST_NAME};
pub use ppm::{read_ppm, write_ppm};
pub use split::train_val_split;
pub use stats::{label_stats, split_common_labels, LabelStats, DEFAULT_COMMON_THRESHOLD};
pub use synth::{generate_synthetic, UcmLike};

use std::collections::HashSet;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ImageShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl ImageShape {
    pub fn new(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
        }
    }

    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_tuple(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }
}

/// A real-valued image stored row-major with interleaved channels (HWC),
/// values nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    shape: ImageShape,
    data: Vec<f64>,
}

impl Image {
    pub fn new(shape: ImageShape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::ShapeMismatch(format!(
                "image buffer has {} values, shape {:?} needs {}",
                data.len(),
                shape.as_tuple(),
                shape.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: ImageShape) -> Self {
        Self {
            shape,
            data: vec![0.0; shape.len()],
        }
    }

    pub fn shape(&self) -> ImageShape {
        self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.shape.width + x) * self.shape.channels + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[self.index(y, x, c)]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f64) {
        let i = self.index(y, x, c);
        self.data[i] = v;
    }

    pub fn in_unit_range(&self) -> bool {
        self.data.iter().all(|v| (0.0..=1.0).contains(v))
    }

    /// Copies the image into `out` in channel-major (CHW) order.
    pub fn write_chw(&self, out: &mut [f64]) {
        let ImageShape {
            height,
            width,
            channels,
        } = self.shape;
        debug_assert_eq!(out.len(), self.data.len());
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    out[(c * height + y) * width + x] = self.data[(y * width + x) * channels + c];
                }
            }
        }
    }
}

/// Binary multilabel target.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelVector(Vec<bool>);

impl LabelVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![false; len])
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn from_indices(len: usize, indices: &[usize]) -> Self {
        let mut v = Self::zeros(len);
        for &i in indices {
            v.0[i] = true;
        }
        v
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, on: bool) {
        self.0[i] = on;
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: Image,
    pub labels: LabelVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultilabelDataset {
    samples: Vec<Sample>,
    label_names: Vec<String>,
    shape: ImageShape,
}

impl MultilabelDataset {
    /// Builds a dataset, checking that label names are unique and nonempty and
    /// that every sample agrees with the declared shape and vocabulary.
    pub fn new(samples: Vec<Sample>, label_names: Vec<String>, shape: ImageShape) -> Result<Self> {
        let mut seen = HashSet::new();
        for name in &label_names {
            if name.is_empty() {
                return Err(Error::InvalidDataset("empty label name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidDataset(format!("duplicate label {name:?}")));
            }
        }
        for (i, s) in samples.iter().enumerate() {
            if s.image.shape() != shape {
                return Err(Error::DimensionMismatch {
                    expected: shape.as_tuple(),
                    found: s.image.shape().as_tuple(),
                });
            }
            if s.labels.len() != label_names.len() {
                return Err(Error::InvalidDataset(format!(
                    "sample {i} has {} labels, vocabulary has {}",
                    s.labels.len(),
                    label_names.len()
                )));
            }
        }
        Ok(Self {
            samples,
            label_names,
            shape,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn shape(&self) -> ImageShape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_labels(&self) -> usize {
        self.label_names.len()
    }

    /// New dataset holding the given samples, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let samples = indices
            .iter()
            .map(|&i| {
                self.samples
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::invalid(format!("sample index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            samples,
            label_names: self.label_names.clone(),
            shape: self.shape,
        })
    }

    pub(crate) fn with_samples(&self, samples: Vec<Sample>) -> Self {
        Self {
            samples,
            label_names: self.label_names.clone(),
            shape: self.shape,
        }
    }

    /// Content hash: vocabulary, shape, labels and pixels quantized to bytes.
    pub fn content_id(&self) -> String {
        let mut h = Sha256::new();
        for name in &self.label_names {
            h.update(name.as_bytes());
            h.update([0u8]);
        }
        for d in [self.shape.height, self.shape.width, self.shape.channels] {
            h.update((d as u64).to_le_bytes());
        }
        for s in &self.samples {
            let bits: Vec<u8> = s.labels.bits().iter().map(|&b| b as u8).collect();
            h.update(&bits);
            let px: Vec<u8> = s.image.data().iter().map(|&v| quantize(v)).collect();
            h.update(&px);
        }
        hex::encode(h.finalize())
    }
}

/// Maps `[0,1]` to the 8-bit grid used on disk.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}
