//! Dataset directory layout: a `labels.csv` manifest plus one P6 image per row.
//!
//! ```text
//! #labels:airplane;bare-soil;buildings
//! img00000.ppm,airplane;buildings
//! img00001.ppm,
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{read_ppm, write_ppm, LabelVector, MultilabelDataset, Sample};
use crate::error::{Error, Result};

pub const MANIFEST_NAME: &str = "labels.csv";
const VOCAB_PREFIX: &str = "#labels:";

pub fn load_dataset(dir: &Path) -> Result<MultilabelDataset> {
    let manifest = dir.join(MANIFEST_NAME);
    if !manifest.is_file() {
        return Err(Error::MissingManifest(manifest));
    }
    let text = fs::read_to_string(&manifest).map_err(|e| Error::io(&manifest, e))?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));

    let (_, first) = lines.next().ok_or(Error::Manifest {
        line: 1,
        reason: "empty manifest".into(),
    })?;
    let vocab = first.strip_prefix(VOCAB_PREFIX).ok_or_else(|| Error::Manifest {
        line: 1,
        reason: format!("first line must start with {VOCAB_PREFIX:?}"),
    })?;
    let label_names: Vec<String> = vocab
        .split(';')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    let index: HashMap<&str, usize> = label_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();

    let mut samples = Vec::new();
    let mut shape = None;
    for (line, row) in lines {
        if row.trim().is_empty() {
            continue;
        }
        let (file, labels) = row.split_once(',').ok_or_else(|| Error::Manifest {
            line,
            reason: "expected `filename,labels`".into(),
        })?;
        let mut bits = LabelVector::zeros(label_names.len());
        for name in labels.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let &l = index.get(name).ok_or_else(|| Error::UnknownLabel {
                label: name.to_string(),
            })?;
            bits.set(l, true);
        }
        let image = read_ppm(&dir.join(file.trim()))?;
        let expected = *shape.get_or_insert(image.shape());
        if image.shape() != expected {
            return Err(Error::DimensionMismatch {
                expected: expected.as_tuple(),
                found: image.shape().as_tuple(),
            });
        }
        samples.push(Sample { image, labels: bits });
    }
    let shape = shape.ok_or(Error::EmptyDataset)?;
    MultilabelDataset::new(samples, label_names, shape)
}

/// Writes `ds` in the layout [`load_dataset`] reads. Pixels are quantized to 8 bits.
pub fn write_dataset(ds: &MultilabelDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = format!("{VOCAB_PREFIX}{}\n", ds.label_names().join(";"));
    for (i, s) in ds.samples().iter().enumerate() {
        let file = format!("img{i:05}.ppm");
        write_ppm(&dir.join(&file), &s.image)?;
        let names: Vec<&str> = s
            .labels
            .iter_ones()
            .map(|l| ds.label_names()[l].as_str())
            .collect();
        writeln!(manifest, "{file},{}", names.join(";")).expect("write to String");
    }
    let path = dir.join(MANIFEST_NAME);
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))
}
