//! Synthetic multilabel images with a learnable per-label visual signal.
//!
//! Each label owns a cell of a square grid laid over the image; a present
//! label stamps a colored rectangle (hue fixed per label, small positional
//! jitter) into its cell on top of low-intensity background noise.

use rand::Rng;

use super::{Image, ImageShape, LabelVector, MultilabelDataset, Sample};
use crate::error::{Error, Result};
use crate::rng::{rng_for, tag, SimRng};

/// Probability that a co-occurrence group fires for a sample.
const GROUP_FIRE: f64 = 0.5;
const BACKGROUND_MAX: f64 = 0.3;

struct LabelModel {
    /// Adjusted marginals, compensating for the at-least-one-label rejection.
    marginal: Vec<f64>,
    group_of: Vec<Option<usize>>,
    groups: Vec<Vec<usize>>,
}

/// Per-label (fired, not fired) inclusion probabilities for a group member.
fn group_probs(g: f64) -> (f64, f64) {
    let hi = (1.6 * g).min(1.0);
    let lo = ((g - GROUP_FIRE * hi) / (1.0 - GROUP_FIRE)).max(0.0);
    (hi, lo)
}

impl LabelModel {
    fn new(freqs: &[f64], groups: &[Vec<usize>]) -> Result<Self> {
        let mut group_of = vec![None; freqs.len()];
        for (gi, g) in groups.iter().enumerate() {
            for &l in g {
                if l >= freqs.len() {
                    return Err(Error::invalid(format!("group references label {l}")));
                }
                if group_of[l].replace(gi).is_some() {
                    return Err(Error::invalid(format!("label {l} is in two groups")));
                }
            }
        }
        let mut model = Self {
            marginal: freqs.to_vec(),
            group_of,
            groups: groups.to_vec(),
        };
        // Fixed point of g = f * (1 - P(no label | g)).
        for _ in 0..50 {
            let keep = 1.0 - model.p_empty();
            model.marginal = freqs.iter().map(|f| f * keep).collect();
        }
        Ok(model)
    }

    fn p_empty(&self) -> f64 {
        let mut p = 1.0;
        for g in &self.groups {
            let (mut fired, mut quiet) = (1.0, 1.0);
            for &l in g {
                let (hi, lo) = group_probs(self.marginal[l]);
                fired *= 1.0 - hi;
                quiet *= 1.0 - lo;
            }
            p *= GROUP_FIRE * fired + (1.0 - GROUP_FIRE) * quiet;
        }
        for (l, g) in self.group_of.iter().enumerate() {
            if g.is_none() {
                p *= 1.0 - self.marginal[l];
            }
        }
        p
    }

    fn draw(&self, rng: &mut SimRng) -> LabelVector {
        let l = self.marginal.len();
        loop {
            let fired: Vec<bool> = self.groups.iter().map(|_| rng.random::<f64>() < GROUP_FIRE).collect();
            let bits: Vec<bool> = (0..l)
                .map(|i| {
                    let p = match self.group_of[i] {
                        Some(g) => {
                            let (hi, lo) = group_probs(self.marginal[i]);
                            if fired[g] { hi } else { lo }
                        }
                        None => self.marginal[i],
                    };
                    rng.random::<f64>() < p
                })
                .collect();
            if bits.iter().any(|&b| b) {
                return LabelVector::from_bits(bits);
            }
        }
    }
}

fn label_color(l: usize, n_labels: usize) -> [f64; 3] {
    let h = 6.0 * l as f64 / n_labels as f64;
    let x = 1.0 - ((h % 2.0) - 1.0).abs();
    match h as usize {
        0 => [1.0, x, 0.0],
        1 => [x, 1.0, 0.0],
        2 => [0.0, 1.0, x],
        3 => [0.0, x, 1.0],
        4 => [x, 0.0, 1.0],
        _ => [1.0, 0.0, x],
    }
}

fn render(shape: ImageShape, labels: &LabelVector, rng: &mut SimRng) -> Image {
    let mut img = Image::zeros(shape);
    for v in img.data_mut() {
        *v = rng.random::<f64>() * BACKGROUND_MAX;
    }
    let n_labels = labels.len();
    let grid = (n_labels as f64).sqrt().ceil().max(1.0) as usize;
    let (cell_h, cell_w) = ((shape.height / grid).max(1), (shape.width / grid).max(1));
    let (rect_h, rect_w) = ((cell_h * 3 / 4).max(1), (cell_w * 3 / 4).max(1));
    for l in labels.iter_ones() {
        let color = label_color(l, n_labels);
        let intensity = 0.75 + 0.25 * rng.random::<f64>();
        let y0 = (l / grid) * cell_h + rng.random_range(0..=cell_h - rect_h);
        let x0 = (l % grid) * cell_w + rng.random_range(0..=cell_w - rect_w);
        for y in y0..(y0 + rect_h).min(shape.height) {
            for x in x0..(x0 + rect_w).min(shape.width) {
                for c in 0..shape.channels {
                    let v = if shape.channels >= 3 {
                        color[c % 3]
                    } else {
                        1.0
                    };
                    img.set(y, x, c, v * intensity);
                }
            }
        }
    }
    img
}

/// Generates `n` samples. Label `l` appears in roughly `n * label_freqs[l]`
/// samples; members of a co-occurrence group are positively correlated;
/// every sample carries at least one label.
pub fn generate_synthetic(
    n: usize,
    shape: ImageShape,
    label_freqs: &[f64],
    cooccur_groups: &[Vec<usize>],
    seed: u64,
) -> Result<MultilabelDataset> {
    if n == 0 {
        return Err(Error::invalid("synthetic dataset needs n > 0"));
    }
    if label_freqs.is_empty() {
        return Err(Error::invalid("at least one label frequency is required"));
    }
    if shape.is_empty() {
        return Err(Error::invalid("image shape has a zero dimension"));
    }
    if let Some(f) = label_freqs.iter().find(|&&f| !(f > 0.0 && f <= 1.0)) {
        return Err(Error::invalid(format!("label frequency {f} outside (0,1]")));
    }
    let model = LabelModel::new(label_freqs, cooccur_groups)?;
    let mut rng = rng_for(seed, &[tag::SYNTH]);
    let samples = (0..n)
        .map(|_| {
            let labels = model.draw(&mut rng);
            let image = render(shape, &labels, &mut rng);
            Sample { image, labels }
        })
        .collect();
    let names = (0..label_freqs.len()).map(|l| format!("label{l:02}")).collect();
    MultilabelDataset::new(samples, names, shape)
}

/// A few frequent, correlated labels and many rare, independent ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UcmLike {
    pub n_common: usize,
    pub n_rare: usize,
    pub common_freq: f64,
    pub rare_freq: f64,
    /// Common labels are grouped in consecutive runs of this size.
    pub group_size: usize,
}

impl Default for UcmLike {
    fn default() -> Self {
        Self {
            n_common: 6,
            n_rare: 10,
            common_freq: 0.4,
            rare_freq: 0.06,
            group_size: 3,
        }
    }
}

impl UcmLike {
    pub fn frequencies(&self) -> Vec<f64> {
        let mut f = vec![self.common_freq; self.n_common];
        f.extend(std::iter::repeat_n(self.rare_freq, self.n_rare));
        f
    }

    pub fn groups(&self) -> Vec<Vec<usize>> {
        let size = self.group_size.max(1);
        (0..self.n_common)
            .collect::<Vec<_>>()
            .chunks(size)
            .filter(|c| c.len() > 1)
            .map(<[usize]>::to_vec)
            .collect()
    }

    pub fn generate(&self, n: usize, shape: ImageShape, seed: u64) -> Result<MultilabelDataset> {
        let ds = generate_synthetic(n, shape, &self.frequencies(), &self.groups(), seed)?;
        let names = (0..self.n_common)
            .map(|i| format!("common{i:02}"))
            .chain((0..self.n_rare).map(|i| format!("rare{i:02}")))
            .collect();
        MultilabelDataset::new(ds.samples().to_vec(), names, shape)
    }
}
