//! Image corruptions used to double the training set, and the random
//! horizontal flip applied during local training.

use rand::Rng;

use crate::data::{Image, MultilabelDataset, Sample};
use crate::error::{Error, Result};
use crate::rng::{rng_for, tag};

const SNOW_VALUE: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorruptionKind {
    /// Each pixel channel set to 0 or 1 with probability `p`.
    ImpulseNoise { p: f64 },
    /// Horizontal box blur of length `k`, edges clamped.
    MotionBlur { k: usize },
    /// A fraction `density` of pixels turned near-white, each with a
    /// one-pixel streak below it.
    Snow { density: f64 },
    /// Block-average by `factor`, then nearest-neighbor upsample.
    Pixelation { factor: usize },
}

impl CorruptionKind {
    /// Default severities, in round-robin order.
    pub const DEFAULTS: [CorruptionKind; 4] = [
        CorruptionKind::ImpulseNoise { p: 0.05 },
        CorruptionKind::MotionBlur { k: 5 },
        CorruptionKind::Snow { density: 0.02 },
        CorruptionKind::Pixelation { factor: 4 },
    ];

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            CorruptionKind::ImpulseNoise { p } => (0.0..=1.0).contains(&p),
            CorruptionKind::MotionBlur { k } => k >= 1,
            CorruptionKind::Snow { density } => (0.0..=1.0).contains(&density),
            CorruptionKind::Pixelation { factor } => factor >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid corruption severity {self:?}")))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CorruptionKind::ImpulseNoise { .. } => "impulse_noise",
            CorruptionKind::MotionBlur { .. } => "motion_blur",
            CorruptionKind::Snow { .. } => "snow",
            CorruptionKind::Pixelation { .. } => "pixelation",
        }
    }
}

pub fn corrupt(img: &Image, kind: CorruptionKind, seed: u64) -> Result<Image> {
    kind.validate()?;
    let mut out = match kind {
        CorruptionKind::ImpulseNoise { p } => impulse_noise(img, p, seed),
        CorruptionKind::MotionBlur { k } => motion_blur(img, k),
        CorruptionKind::Snow { density } => snow(img, density, seed),
        CorruptionKind::Pixelation { factor } => pixelate(img, factor),
    };
    for v in out.data_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    Ok(out)
}

fn impulse_noise(img: &Image, p: f64, seed: u64) -> Image {
    let mut rng = rng_for(seed, &[tag::AUGMENT, 0]);
    let mut out = img.clone();
    for v in out.data_mut() {
        if rng.random::<f64>() < p {
            *v = if rng.random::<bool>() { 1.0 } else { 0.0 };
        }
    }
    out
}

fn motion_blur(img: &Image, k: usize) -> Image {
    let shape = img.shape();
    let w = shape.width as isize;
    // kernel spans [x - back, x + fwd]
    let back = ((k - 1) / 2) as isize;
    let fwd = (k / 2) as isize;
    let mut out = Image::zeros(shape);
    for y in 0..shape.height {
        for x in 0..shape.width {
            for c in 0..shape.channels {
                let sum: f64 = (-back..=fwd)
                    .map(|d| {
                        let xs = (x as isize + d).clamp(0, w - 1) as usize;
                        img.get(y, xs, c)
                    })
                    .sum();
                out.set(y, x, c, sum / k as f64);
            }
        }
    }
    out
}

fn snow(img: &Image, density: f64, seed: u64) -> Image {
    let shape = img.shape();
    let mut rng = rng_for(seed, &[tag::AUGMENT, 2]);
    let mut out = img.clone();
    let mut flakes = Vec::new();
    for y in 0..shape.height {
        for x in 0..shape.width {
            if rng.random::<f64>() < density {
                flakes.push((y, x));
            }
        }
    }
    for (y, x) in flakes {
        for yy in [y, y + 1] {
            if yy < shape.height {
                for c in 0..shape.channels {
                    out.set(yy, x, c, SNOW_VALUE);
                }
            }
        }
    }
    out
}

fn pixelate(img: &Image, factor: usize) -> Image {
    let shape = img.shape();
    let mut out = Image::zeros(shape);
    for by in (0..shape.height).step_by(factor) {
        for bx in (0..shape.width).step_by(factor) {
            // partial edge blocks average over their true extent
            let ys = by..(by + factor).min(shape.height);
            let xs = bx..(bx + factor).min(shape.width);
            let area = (ys.len() * xs.len()) as f64;
            for c in 0..shape.channels {
                let mut sum = 0.0;
                for y in ys.clone() {
                    for x in xs.clone() {
                        sum += img.get(y, x, c);
                    }
                }
                let mean = sum / area;
                for y in ys.clone() {
                    for x in xs.clone() {
                        out.set(y, x, c, mean);
                    }
                }
            }
        }
    }
    out
}

/// Kind used for the augmented copy of sample `i`.
pub fn round_robin_kind(i: usize) -> CorruptionKind {
    CorruptionKind::DEFAULTS[i % CorruptionKind::DEFAULTS.len()]
}

/// Returns the originals followed by one corrupted copy of each, labels unchanged.
pub fn augment_double(ds: &MultilabelDataset, seed: u64) -> Result<MultilabelDataset> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut samples = ds.samples().to_vec();
    for (i, s) in ds.samples().iter().enumerate() {
        let image = corrupt(&s.image, round_robin_kind(i), crate::rng::derive_seed(seed, &[i as u64]))?;
        samples.push(Sample {
            image,
            labels: s.labels.clone(),
        });
    }
    Ok(ds.with_samples(samples))
}

/// Mirrors the image left-right when `draw < 0.5`.
pub fn maybe_hflip(img: &Image, draw: f64) -> Image {
    if draw >= 0.5 {
        return img.clone();
    }
    let shape = img.shape();
    let mut out = Image::zeros(shape);
    for y in 0..shape.height {
        for x in 0..shape.width {
            for c in 0..shape.channels {
                out.set(y, shape.width - 1 - x, c, img.get(y, x, c));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ImageShape, LabelVector};
    use proptest::prelude::*;

    fn gray(h: usize, w: usize, values: &[f64]) -> Image {
        Image::new(ImageShape::new(h, w, 1), values.to_vec()).unwrap()
    }

    #[test]
    fn zero_impulse_noise_is_identity() {
        let img = gray(2, 2, &[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(corrupt(&img, CorruptionKind::ImpulseNoise { p: 0.0 }, 9).unwrap(), img);
    }

    #[test]
    fn full_impulse_noise_is_binary() {
        let img = gray(4, 4, &[0.5; 16]);
        let out = corrupt(&img, CorruptionKind::ImpulseNoise { p: 1.0 }, 9).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn pixelation_block_means() {
        let values: Vec<f64> = (0..64).map(|i| i as f64 / 64.0).collect();
        let img = gray(8, 8, &values);
        let out = corrupt(&img, CorruptionKind::Pixelation { factor: 4 }, 0).unwrap();
        for by in [0, 4] {
            for bx in [0, 4] {
                let mut mean = 0.0;
                for y in by..by + 4 {
                    for x in bx..bx + 4 {
                        mean += img.get(y, x, 0);
                    }
                }
                mean /= 16.0;
                for y in by..by + 4 {
                    for x in bx..bx + 4 {
                        assert!((out.get(y, x, 0) - mean).abs() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn pixelation_partial_blocks_use_true_extent() {
        let img = gray(1, 3, &[0.0, 0.2, 0.9]);
        let out = corrupt(&img, CorruptionKind::Pixelation { factor: 2 }, 0).unwrap();
        assert_eq!(out.data(), &[0.1, 0.1, 0.9]);
    }

    #[test]
    fn motion_blur_step_edge() {
        // hand convolution of [1 1 1 0 0 0] with a centered length-3 box
        let img = gray(1, 6, &[1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
        let out = corrupt(&img, CorruptionKind::MotionBlur { k: 3 }, 0).unwrap();
        let expected = [1.0, 1.0, 2.0 / 3.0, 1.0 / 3.0, 0.0, 0.0];
        for (a, b) in out.data().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{:?}", out.data());
        }
    }

    #[test]
    fn snow_turns_pixels_white() {
        let img = gray(10, 10, &[0.0; 100]);
        let out = corrupt(&img, CorruptionKind::Snow { density: 1.0 }, 1).unwrap();
        assert!(out.data().iter().all(|&v| v == SNOW_VALUE));
        let none = corrupt(&img, CorruptionKind::Snow { density: 0.0 }, 1).unwrap();
        assert_eq!(none, img);
    }

    #[test]
    fn invalid_severity() {
        let img = gray(1, 1, &[0.0]);
        assert!(corrupt(&img, CorruptionKind::ImpulseNoise { p: 1.5 }, 0).is_err());
        assert!(corrupt(&img, CorruptionKind::MotionBlur { k: 0 }, 0).is_err());
        assert!(corrupt(&img, CorruptionKind::Pixelation { factor: 0 }, 0).is_err());
        assert!(corrupt(&img, CorruptionKind::Snow { density: -0.1 }, 0).is_err());
    }

    #[test]
    fn hflip_contract() {
        let img = gray(2, 3, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        assert_eq!(maybe_hflip(&img, 0.7), img);
        assert_eq!(maybe_hflip(&img, 0.0).data(), &[0.3, 0.2, 0.1, 0.6, 0.5, 0.4]);
        assert_eq!(maybe_hflip(&maybe_hflip(&img, 0.2), 0.2), img);
    }

    #[test]
    fn round_robin_balance() {
        let mut counts = [0usize; 4];
        for i in 0..2100 {
            let k = round_robin_kind(i);
            counts[CorruptionKind::DEFAULTS.iter().position(|d| *d == k).unwrap()] += 1;
        }
        let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
        assert!(hi - lo <= 1, "{counts:?}");
    }

    #[test]
    fn doubling_keeps_prefix_and_labels() {
        let shape = ImageShape::new(4, 4, 3);
        let samples: Vec<Sample> = (0..6)
            .map(|i| Sample {
                image: Image::new(shape, vec![i as f64 / 10.0; 48]).unwrap(),
                labels: LabelVector::from_indices(2, &[i % 2]),
            })
            .collect();
        let ds = MultilabelDataset::new(samples, vec!["a".into(), "b".into()], shape).unwrap();
        let out = augment_double(&ds, 3).unwrap();
        assert_eq!(out.len(), 12);
        assert_eq!(&out.samples()[..6], ds.samples());
        for i in 0..6 {
            assert_eq!(out.samples()[6 + i].labels, ds.samples()[i].labels);
        }
        assert_eq!(augment_double(&ds, 3).unwrap(), out);
    }

    fn arb_image() -> impl Strategy<Value = Image> {
        (1usize..9, 1usize..9, 1usize..4).prop_flat_map(|(h, w, c)| {
            proptest::collection::vec(0.0f64..=1.0, h * w * c)
                .prop_map(move |d| Image::new(ImageShape::new(h, w, c), d).unwrap())
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn corruptions_preserve_shape_and_range(img in arb_image(), seed in any::<u64>()) {
            for kind in CorruptionKind::DEFAULTS {
                let out = corrupt(&img, kind, seed).unwrap();
                prop_assert_eq!(out.shape(), img.shape());
                prop_assert!(out.in_unit_range());
                prop_assert_eq!(out, corrupt(&img, kind, seed).unwrap());
            }
        }
    }
}
