//! Data layer: finite ground-truth distributions with exact expectations,
//! dataset sampling, IDX ingestion, label corruption, and the synthetic
//! desk-scale generators.
//!
//! A [`FiniteDistribution`] enumerates its whole support as `(x, y, p)`
//! triples; expected risks and the path-space moments needed by the bounds
//! engine are exact weighted sums, not estimates. Targets are always real
//! vectors; classification tasks use one-hot targets so squared-loss and
//! 0-1/margin analyses share one data model.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::netdag::{DagNetwork, NetError, PathSpace};
use crate::rng::{derive_seed, Rng};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("support probabilities sum to {sum}, not 1")]
    BadProbabilitySum { sum: f64 },
    #[error("negative probability {p} at support point {index}")]
    NegativeProbability { index: usize, p: f64 },
    #[error("support point {index} has x length {got}, expected {expected}")]
    InputDim {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("support point {index} has y length {got}, expected {expected}")]
    TargetDim {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("empty {what}")]
    Empty { what: &'static str },
    #[error("non-finite value in {context}")]
    NonFinite { context: String },
    #[error("fraction {0} outside [0, 1]")]
    BadFraction(f64),
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: bad magic at offset 0: found {found:#010x}, expected {expected:#010x}")]
    BadMagic {
        path: String,
        found: u32,
        expected: u32,
    },
    #[error("{path}: truncated at offset {offset}: needed {needed} more bytes")]
    Truncated {
        path: String,
        offset: usize,
        needed: usize,
    },
    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error(transparent)]
    Net(#[from] NetError),
}

/// One atom of a finite distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SupportPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub p: f64,
}

/// A fully enumerated distribution over finitely many `(x, y)` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiniteDistribution {
    support: Vec<SupportPoint>,
    input_dim: usize,
    target_dim: usize,
}

impl FiniteDistribution {
    pub fn new(support: Vec<SupportPoint>) -> Result<Self, DataError> {
        if support.is_empty() {
            return Err(DataError::Empty { what: "support" });
        }
        let input_dim = support[0].x.len();
        let target_dim = support[0].y.len();
        let mut sum = 0.0;
        for (index, pt) in support.iter().enumerate() {
            if pt.x.len() != input_dim {
                return Err(DataError::InputDim {
                    index,
                    expected: input_dim,
                    got: pt.x.len(),
                });
            }
            if pt.y.len() != target_dim {
                return Err(DataError::TargetDim {
                    index,
                    expected: target_dim,
                    got: pt.y.len(),
                });
            }
            if pt.p < 0.0 {
                return Err(DataError::NegativeProbability { index, p: pt.p });
            }
            if pt.x.iter().chain(&pt.y).any(|v| !v.is_finite()) || !pt.p.is_finite() {
                return Err(DataError::NonFinite {
                    context: format!("support point {index}"),
                });
            }
            sum += pt.p;
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(DataError::BadProbabilitySum { sum });
        }
        Ok(Self {
            support,
            input_dim,
            target_dim,
        })
    }

    /// Uniform probabilities over the given points.
    pub fn uniform(points: Vec<(Vec<f64>, Vec<f64>)>) -> Result<Self, DataError> {
        let n = points.len();
        if n == 0 {
            return Err(DataError::Empty { what: "support" });
        }
        // Exact unit sum even when 1/n is not representable.
        let base = 1.0 / n as f64;
        let mut probs = vec![base; n];
        let correction = 1.0 - base * n as f64;
        probs[0] += correction;
        Self::new(
            points
                .into_iter()
                .zip(probs)
                .map(|((x, y), p)| SupportPoint { x, y, p })
                .collect(),
        )
    }

    /// The empirical distribution of a dataset (uniform over its samples).
    pub fn empirical(dataset: &Dataset) -> Self {
        Self::uniform(dataset.samples.clone()).expect("datasets are nonempty and consistent")
    }

    pub fn support(&self) -> &[SupportPoint] {
        &self.support
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    /// Exact `E[||y||_2^2]`.
    pub fn exact_y_sq(&self) -> f64 {
        self.support
            .iter()
            .map(|pt| pt.p * pt.y.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    /// Mixture `lambda * self + (1 - lambda) * other` over the concatenated
    /// support.
    pub fn mix(&self, other: &Self, lambda: f64) -> Result<Self, DataError> {
        let mut support: Vec<SupportPoint> = self
            .support
            .iter()
            .map(|pt| SupportPoint {
                x: pt.x.clone(),
                y: pt.y.clone(),
                p: pt.p * lambda,
            })
            .collect();
        support.extend(other.support.iter().map(|pt| SupportPoint {
            x: pt.x.clone(),
            y: pt.y.clone(),
            p: pt.p * (1.0 - lambda),
        }));
        Self::new(support)
    }
}

/// Where a dataset came from; part of the serialized form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Sampled { seed: u64 },
    Loaded { file: String },
    Corrupted { fraction: f64, seed: u64 },
}

/// A concrete list of `(x, y)` samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    samples: Vec<(Vec<f64>, Vec<f64>)>,
    provenance: Provenance,
    input_dim: usize,
    target_dim: usize,
}

impl Dataset {
    pub fn new(
        samples: Vec<(Vec<f64>, Vec<f64>)>,
        provenance: Provenance,
    ) -> Result<Self, DataError> {
        if samples.is_empty() {
            return Err(DataError::Empty { what: "dataset" });
        }
        let input_dim = samples[0].0.len();
        let target_dim = samples[0].1.len();
        for (index, (x, y)) in samples.iter().enumerate() {
            if x.len() != input_dim {
                return Err(DataError::InputDim {
                    index,
                    expected: input_dim,
                    got: x.len(),
                });
            }
            if y.len() != target_dim {
                return Err(DataError::TargetDim {
                    index,
                    expected: target_dim,
                    got: y.len(),
                });
            }
        }
        Ok(Self {
            samples,
            provenance,
            input_dim,
            target_dim,
        })
    }

    pub fn samples(&self) -> &[(Vec<f64>, Vec<f64>)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    /// The first `ceil(alpha * m)` samples (at least one).
    pub fn prefix(&self, alpha: f64) -> Dataset {
        let m = self.samples.len();
        let take = ((alpha * m as f64).ceil() as usize).clamp(1, m);
        Dataset {
            samples: self.samples[..take].to_vec(),
            provenance: self.provenance.clone(),
            input_dim: self.input_dim,
            target_dim: self.target_dim,
        }
    }

    /// Everything after the first `ceil(alpha * m)` samples; `None` when the
    /// prefix swallows the dataset.
    pub fn suffix(&self, alpha: f64) -> Option<Dataset> {
        let m = self.samples.len();
        let skip = ((alpha * m as f64).ceil() as usize).clamp(1, m);
        if skip >= m {
            return None;
        }
        Some(Dataset {
            samples: self.samples[skip..].to_vec(),
            provenance: self.provenance.clone(),
            input_dim: self.input_dim,
            target_dim: self.target_dim,
        })
    }
}

/// `m` i.i.d. draws by inverse CDF over the support; deterministic per seed.
pub fn sample_dataset(p: &FiniteDistribution, m: usize, seed: u64) -> Result<Dataset, DataError> {
    if m == 0 {
        return Err(DataError::Empty {
            what: "requested sample",
        });
    }
    let mut cdf = Vec::with_capacity(p.support.len());
    let mut acc = 0.0;
    for pt in &p.support {
        acc += pt.p;
        cdf.push(acc);
    }
    let mut rng = Rng::from_seed(seed);
    let samples = (0..m)
        .map(|_| {
            let u = rng.uniform();
            let idx = cdf.partition_point(|&c| c <= u).min(p.support.len() - 1);
            let pt = &p.support[idx];
            (pt.x.clone(), pt.y.clone())
        })
        .collect();
    Dataset::new(samples, Provenance::Sampled { seed })
}

/// Loss functions for risk evaluation. `Squared` sums over output
/// coordinates; `ZeroOne` compares argmax prediction against argmax target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Squared,
    ZeroOne,
}

pub fn point_loss(output: &[f64], target: &[f64], loss: Loss) -> f64 {
    match loss {
        Loss::Squared => output
            .iter()
            .zip(target)
            .map(|(&o, &t)| (o - t) * (o - t))
            .sum(),
        Loss::ZeroOne => {
            if argmax(output) == argmax(target) {
                0.0
            } else {
                1.0
            }
        }
    }
}

/// Lowest-index argmax.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Exact expected risk of an arbitrary predictor over a finite distribution.
pub fn expected_risk_with(
    predict: impl Fn(&[f64]) -> Vec<f64>,
    p: &FiniteDistribution,
    loss: Loss,
) -> f64 {
    p.support
        .iter()
        .map(|pt| pt.p * point_loss(&predict(&pt.x), &pt.y, loss))
        .sum()
}

/// Exact expected risk of a network over a finite distribution.
pub fn expected_risk(
    net: &DagNetwork,
    p: &FiniteDistribution,
    loss: Loss,
) -> Result<f64, DataError> {
    let mut total = 0.0;
    for pt in &p.support {
        let out = net.forward(&pt.x)?;
        total += pt.p * point_loss(out.output(), &pt.y, loss);
    }
    Ok(total)
}

pub fn empirical_risk_with(
    predict: impl Fn(&[f64]) -> Vec<f64>,
    s: &Dataset,
    loss: Loss,
) -> f64 {
    let m = s.samples.len() as f64;
    s.samples
        .iter()
        .map(|(x, y)| point_loss(&predict(x), y, loss))
        .sum::<f64>()
        / m
}

pub fn empirical_risk(net: &DagNetwork, s: &Dataset, loss: Loss) -> Result<f64, DataError> {
    let mut total = 0.0;
    for (x, y) in &s.samples {
        let out = net.forward(x)?;
        total += point_loss(out.output(), y, loss);
    }
    Ok(total / s.samples.len() as f64)
}

/// Exact path-space moments of a finite distribution, with activation masks
/// taken from `mask_net`'s own forward passes: `E[z z^T]`, the per-output
/// `E[y_k z]` rows, and `E[||y||^2]`.
#[derive(Debug, Clone)]
pub struct PathMoments {
    /// `d_z x d_z`, symmetric PSD.
    pub second_moment: Matrix,
    /// `d_y x d_z`; row `k` is `E[y_k z]`.
    pub yz_moment: Matrix,
    pub y_sq: f64,
}

pub fn exact_path_moments(
    paths: &PathSpace,
    mask_net: &DagNetwork,
    p: &FiniteDistribution,
) -> Result<PathMoments, DataError> {
    let d_z = paths.d_z();
    let d_y = p.target_dim();
    let mut second = Matrix::zeros(d_z, d_z);
    let mut yz = Matrix::zeros(d_y, d_z);
    let mut y_sq = 0.0;
    for pt in p.support() {
        let z = paths.z_vector(mask_net, &pt.x)?;
        second.add_scaled_outer(&z, &z, pt.p);
        yz.add_scaled_outer(&pt.y, &z, pt.p);
        y_sq += pt.p * pt.y.iter().map(|v| v * v).sum::<f64>();
    }
    Ok(PathMoments {
        second_moment: second,
        yz_moment: yz,
        y_sq,
    })
}

/// Per-sample z-vectors of a dataset under `mask_net`'s activations.
pub fn dataset_z_vectors(
    paths: &PathSpace,
    mask_net: &DagNetwork,
    s: &Dataset,
) -> Result<Vec<Vec<f64>>, DataError> {
    s.samples
        .iter()
        .map(|(x, _)| paths.z_vector(mask_net, x).map_err(DataError::from))
        .collect()
}

/// Resample the labels of a seeded-random subset of `floor(fraction * m)`
/// samples, uniformly over `num_classes` one-hot targets.
pub fn corrupt_labels(
    s: &Dataset,
    fraction: f64,
    num_classes: usize,
    seed: u64,
) -> Result<Dataset, DataError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(DataError::BadFraction(fraction));
    }
    if num_classes == 0 {
        return Err(DataError::Empty { what: "class set" });
    }
    let m = s.samples.len();
    let count = (fraction * m as f64).floor() as usize;
    let mut order: Vec<usize> = (0..m).collect();
    let mut rng = Rng::from_seed(derive_seed(seed, "corrupt-pick", 0));
    rng.shuffle(&mut order);
    let mut samples = s.samples.clone();
    let mut label_rng = Rng::from_seed(derive_seed(seed, "corrupt-label", 0));
    for &idx in order.iter().take(count) {
        let class = label_rng.index(num_classes);
        let mut y = vec![0.0; num_classes];
        y[class] = 1.0;
        samples[idx].1 = y;
    }
    Dataset::new(samples, Provenance::Corrupted { fraction, seed })
}

// ---- IDX ingestion -----------------------------------------------------

const IDX_IMAGE_MAGIC: u32 = 2051;
const IDX_LABEL_MAGIC: u32 = 2049;

struct IdxReader<'a> {
    bytes: &'a [u8],
    offset: usize,
    path: &'a str,
}

impl<'a> IdxReader<'a> {
    fn read_u32(&mut self) -> Result<u32, DataError> {
        if self.offset + 4 > self.bytes.len() {
            return Err(DataError::Truncated {
                path: self.path.to_string(),
                offset: self.offset,
                needed: self.offset + 4 - self.bytes.len(),
            });
        }
        let v = u32::from_be_bytes(
            self.bytes[self.offset..self.offset + 4]
                .try_into()
                .expect("length checked"),
        );
        self.offset += 4;
        Ok(v)
    }

    fn read_bytes(&mut self, n: usize) -> Result<&'a [u8], DataError> {
        if self.offset + n > self.bytes.len() {
            return Err(DataError::Truncated {
                path: self.path.to_string(),
                offset: self.offset,
                needed: self.offset + n - self.bytes.len(),
            });
        }
        let s = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(s)
    }
}

/// Parse a big-endian IDX image/label file pair into a dataset.
///
/// Pixels are scaled to `[0, 1]`; labels become one-hot vectors over
/// `max_label + 1` classes. Wrong magics, truncation and count mismatches are
/// rejected with offsets.
pub fn load_idx(images_path: &str, labels_path: &str) -> Result<Dataset, DataError> {
    let image_bytes = std::fs::read(images_path).map_err(|source| DataError::Io {
        path: images_path.to_string(),
        source,
    })?;
    let label_bytes = std::fs::read(labels_path).map_err(|source| DataError::Io {
        path: labels_path.to_string(),
        source,
    })?;
    parse_idx(&image_bytes, images_path, &label_bytes, labels_path)
}

pub fn parse_idx(
    image_bytes: &[u8],
    images_path: &str,
    label_bytes: &[u8],
    labels_path: &str,
) -> Result<Dataset, DataError> {
    let mut ir = IdxReader {
        bytes: image_bytes,
        offset: 0,
        path: images_path,
    };
    let magic = ir.read_u32()?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(DataError::BadMagic {
            path: images_path.to_string(),
            found: magic,
            expected: IDX_IMAGE_MAGIC,
        });
    }
    let count = ir.read_u32()? as usize;
    let rows = ir.read_u32()? as usize;
    let cols = ir.read_u32()? as usize;
    let pixels = ir.read_bytes(count * rows * cols)?;

    let mut lr = IdxReader {
        bytes: label_bytes,
        offset: 0,
        path: labels_path,
    };
    let magic = lr.read_u32()?;
    if magic != IDX_LABEL_MAGIC {
        return Err(DataError::BadMagic {
            path: labels_path.to_string(),
            found: magic,
            expected: IDX_LABEL_MAGIC,
        });
    }
    let label_count = lr.read_u32()? as usize;
    if label_count != count {
        return Err(DataError::CountMismatch {
            images: count,
            labels: label_count,
        });
    }
    let labels = lr.read_bytes(count)?;
    let num_classes = labels.iter().copied().max().unwrap_or(0) as usize + 1;

    let dim = rows * cols;
    let samples = (0..count)
        .map(|i| {
            let x: Vec<f64> = pixels[i * dim..(i + 1) * dim]
                .iter()
                .map(|&b| b as f64 / 255.0)
                .collect();
            let mut y = vec![0.0; num_classes];
            y[labels[i] as usize] = 1.0;
            (x, y)
        })
        .collect();
    Dataset::new(
        samples,
        Provenance::Loaded {
            file: images_path.to_string(),
        },
    )
}

/// 2x2 average pooling of square images stored row-major.
pub fn downsample_2x2(dataset: &Dataset) -> Result<Dataset, DataError> {
    let dim = dataset.input_dim();
    let side = (dim as f64).sqrt() as usize;
    if side * side != dim || side % 2 != 0 {
        return Err(DataError::InputDim {
            index: 0,
            expected: side * side,
            got: dim,
        });
    }
    let half = side / 2;
    let samples = dataset
        .samples
        .iter()
        .map(|(x, y)| {
            let mut out = vec![0.0; half * half];
            for r in 0..half {
                for c in 0..half {
                    let base = 2 * r * side + 2 * c;
                    out[r * half + c] =
                        0.25 * (x[base] + x[base + 1] + x[base + side] + x[base + side + 1]);
                }
            }
            (out, y.clone())
        })
        .collect();
    Dataset::new(samples, dataset.provenance.clone())
}

/// Truncate to the first `n` samples.
pub fn take_prefix(dataset: &Dataset, n: usize) -> Dataset {
    let take = n.clamp(1, dataset.samples.len());
    Dataset {
        samples: dataset.samples[..take].to_vec(),
        provenance: dataset.provenance.clone(),
        input_dim: dataset.input_dim,
        target_dim: dataset.target_dim,
    }
}

pub mod synthetic {
    //! Deterministic synthetic datasets for the desk-scale experiment suite.

    use super::*;

    /// Two separable Gaussian blobs with one-hot labels.
    pub fn blobs(
        n: usize,
        dim: usize,
        separation: f64,
        spread: f64,
        seed: u64,
    ) -> Result<Dataset, DataError> {
        let mut rng = Rng::from_seed(seed);
        let samples = (0..n)
            .map(|_| {
                let class = rng.index(2);
                let center = if class == 0 { -separation } else { separation };
                let x: Vec<f64> = (0..dim).map(|_| center + spread * rng.normal()).collect();
                let mut y = vec![0.0; 2];
                y[class] = 1.0;
                (x, y)
            })
            .collect();
        Dataset::new(samples, Provenance::Sampled { seed })
    }

    /// Seven-segment digit glyphs on a `14x14` grid with per-sample jitter
    /// and pixel noise: a deterministic ten-class stand-in for a downscaled
    /// handwritten-digit set, at the same input dimension (196) and class
    /// count.
    pub fn digits(n: usize, noise: f64, seed: u64) -> Result<Dataset, DataError> {
        let mut rng = Rng::from_seed(seed);
        let samples = (0..n)
            .map(|_| {
                let class = rng.index(10);
                let dx = rng.index(3) as isize - 1;
                let dy = rng.index(3) as isize - 1;
                let mut img = render_digit(class, dx, dy);
                for v in img.iter_mut() {
                    *v = (*v + noise * rng.uniform()).clamp(0.0, 1.0);
                }
                let mut y = vec![0.0; 10];
                y[class] = 1.0;
                (img, y)
            })
            .collect();
        Dataset::new(samples, Provenance::Sampled { seed })
    }

    // Segment layout: 0 top, 1 upper-left, 2 upper-right, 3 middle,
    // 4 lower-left, 5 lower-right, 6 bottom.
    const SEGMENTS: [[u8; 7]; 10] = [
        [1, 1, 1, 0, 1, 1, 1], // 0
        [0, 0, 1, 0, 0, 1, 0], // 1
        [1, 0, 1, 1, 1, 0, 1], // 2
        [1, 0, 1, 1, 0, 1, 1], // 3
        [0, 1, 1, 1, 0, 1, 0], // 4
        [1, 1, 0, 1, 0, 1, 1], // 5
        [1, 1, 0, 1, 1, 1, 1], // 6
        [1, 0, 1, 0, 0, 1, 0], // 7
        [1, 1, 1, 1, 1, 1, 1], // 8
        [1, 1, 1, 1, 0, 1, 1], // 9
    ];

    fn render_digit(class: usize, dx: isize, dy: isize) -> Vec<f64> {
        const SIDE: isize = 14;
        let mut img = vec![0.0; (SIDE * SIDE) as usize];
        let mut fill = |r0: isize, r1: isize, c0: isize, c1: isize| {
            for r in r0..=r1 {
                for c in c0..=c1 {
                    let (r, c) = (r + dy, c + dx);
                    if (0..SIDE).contains(&r) && (0..SIDE).contains(&c) {
                        img[(r * SIDE + c) as usize] = 1.0;
                    }
                }
            }
        };
        let seg = SEGMENTS[class];
        // Glyph occupies rows 2..=11, columns 4..=9.
        if seg[0] == 1 {
            fill(2, 2, 4, 9);
        }
        if seg[1] == 1 {
            fill(2, 6, 4, 4);
        }
        if seg[2] == 1 {
            fill(2, 6, 9, 9);
        }
        if seg[3] == 1 {
            fill(6, 6, 4, 9);
        }
        if seg[4] == 1 {
            fill(6, 11, 4, 4);
        }
        if seg[5] == 1 {
            fill(6, 11, 9, 9);
        }
        if seg[6] == 1 {
            fill(11, 11, 4, 9);
        }
        img
    }

    /// A random finite distribution for bound audits: a seeded input cloud
    /// labeled by a seeded teacher network (one-hot over its argmax output),
    /// with seeded probabilities.
    pub fn random_classification_distribution(
        input_dim: usize,
        classes: usize,
        support: usize,
        seed: u64,
    ) -> Result<FiniteDistribution, DataError> {
        let teacher = DagNetwork::layered_relu(
            &[input_dim, 2 * classes, classes],
            derive_seed(seed, "teacher", 0),
        )?;
        let mut rng = Rng::from_seed(derive_seed(seed, "cloud", 0));
        let mut points = Vec::with_capacity(support);
        let mut weights = Vec::with_capacity(support);
        for _ in 0..support {
            let x: Vec<f64> = (0..input_dim).map(|_| rng.range(-1.0, 1.0)).collect();
            let out = teacher.forward(&x)?;
            let mut y = vec![0.0; classes];
            y[argmax(out.output())] = 1.0;
            points.push((x, y));
            weights.push(0.25 + rng.uniform());
        }
        let total: f64 = weights.iter().sum();
        let mut support_points: Vec<SupportPoint> = points
            .into_iter()
            .zip(&weights)
            .map(|((x, y), &w)| SupportPoint { x, y, p: w / total })
            .collect();
        let correction = 1.0 - support_points.iter().map(|pt| pt.p).sum::<f64>();
        support_points[0].p += correction;
        FiniteDistribution::new(support_points)
    }

    /// A random finite regression distribution: seeded inputs, real targets
    /// from a teacher network plus seeded label noise.
    pub fn random_regression_distribution(
        input_dim: usize,
        target_dim: usize,
        support: usize,
        label_noise: f64,
        seed: u64,
    ) -> Result<FiniteDistribution, DataError> {
        let teacher = DagNetwork::layered_relu(
            &[input_dim, input_dim + target_dim, target_dim],
            derive_seed(seed, "teacher", 0),
        )?;
        let mut rng = Rng::from_seed(derive_seed(seed, "cloud", 0));
        let mut points = Vec::with_capacity(support);
        for _ in 0..support {
            let x: Vec<f64> = (0..input_dim).map(|_| rng.range(-1.0, 1.0)).collect();
            let out = teacher.forward(&x)?;
            let y: Vec<f64> = out
                .output()
                .iter()
                .map(|&v| v + label_noise * rng.normal())
                .collect();
            points.push((x, y));
        }
        FiniteDistribution::uniform(points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point_distribution() -> FiniteDistribution {
        FiniteDistribution::new(vec![
            SupportPoint {
                x: vec![1.0, 0.0],
                y: vec![1.0, 0.0],
                p: 0.5,
            },
            SupportPoint {
                x: vec![0.0, 1.0],
                y: vec![0.0, 1.0],
                p: 0.5,
            },
        ])
        .unwrap()
    }

    #[test]
    fn validation_rejects_bad_support() {
        let bad = FiniteDistribution::new(vec![SupportPoint {
            x: vec![1.0],
            y: vec![1.0],
            p: 0.5,
        }]);
        assert!(matches!(bad, Err(DataError::BadProbabilitySum { .. })));

        let bad = FiniteDistribution::new(vec![
            SupportPoint {
                x: vec![1.0],
                y: vec![1.0],
                p: 1.5,
            },
            SupportPoint {
                x: vec![1.0],
                y: vec![1.0],
                p: -0.5,
            },
        ]);
        assert!(matches!(bad, Err(DataError::NegativeProbability { .. })));
    }

    #[test]
    fn single_point_support_samples_copies() {
        let p = FiniteDistribution::new(vec![SupportPoint {
            x: vec![2.0],
            y: vec![3.0],
            p: 1.0,
        }])
        .unwrap();
        let s = sample_dataset(&p, 5, 0).unwrap();
        assert_eq!(s.len(), 5);
        for (x, y) in s.samples() {
            assert_eq!(x, &[2.0]);
            assert_eq!(y, &[3.0]);
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let p = two_point_distribution();
        let a = sample_dataset(&p, 100, 7).unwrap();
        let b = sample_dataset(&p, 100, 7).unwrap();
        assert_eq!(a.samples(), b.samples());
        let c = sample_dataset(&p, 100, 8).unwrap();
        assert_ne!(a.samples(), c.samples());
    }

    #[test]
    fn sampling_frequency_within_binomial_band() {
        let p = two_point_distribution();
        let m = 10_000;
        let s = sample_dataset(&p, m, 42).unwrap();
        let first = s.samples().iter().filter(|(x, _)| x[0] == 1.0).count() as f64;
        let expected = 0.5 * m as f64;
        let sigma = (m as f64 * 0.25).sqrt();
        assert!(
            (first - expected).abs() <= 3.0 * sigma,
            "first-point count {first} outside 3-sigma band around {expected}"
        );
    }

    #[test]
    fn expected_risk_trivial_cases() {
        let p = two_point_distribution();
        // Zero-weight net: squared risk is E[||y||^2].
        let mut net = DagNetwork::layered_relu(&[2, 3, 2], 0).unwrap();
        let zeros = vec![0.0; net.param_count()];
        net.set_params(&zeros).unwrap();
        let r = expected_risk(&net, &p, Loss::Squared).unwrap();
        assert!((r - p.exact_y_sq()).abs() < 1e-12);

        let single = FiniteDistribution::new(vec![SupportPoint {
            x: vec![1.0, 1.0],
            y: vec![0.0, 2.0],
            p: 1.0,
        }])
        .unwrap();
        let net = DagNetwork::layered_relu(&[2, 3, 2], 1).unwrap();
        let out = net.forward(&[1.0, 1.0]).unwrap().output().to_vec();
        let manual = (out[0] - 0.0).powi(2) + (out[1] - 2.0).powi(2);
        let r = expected_risk(&net, &single, Loss::Squared).unwrap();
        assert!((r - manual).abs() < 1e-12);
    }

    #[test]
    fn expected_risk_matches_monte_carlo() {
        let p = synthetic::random_regression_distribution(3, 2, 12, 0.1, 5).unwrap();
        let net = DagNetwork::layered_relu(&[3, 4, 2], 9).unwrap();
        let exact = expected_risk(&net, &p, Loss::Squared).unwrap();

        let n = 200_000;
        let s = sample_dataset(&p, n, 123).unwrap();
        let losses: Vec<f64> = s
            .samples()
            .iter()
            .map(|(x, y)| point_loss(net.forward(x).unwrap().output(), y, Loss::Squared))
            .collect();
        let mean = losses.iter().sum::<f64>() / n as f64;
        let var = losses.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / n as f64;
        let se = (var / n as f64).sqrt();
        assert!(
            (exact - mean).abs() <= 3.0 * se.max(1e-9),
            "exact {exact} vs MC {mean} (se {se})"
        );
    }

    #[test]
    fn empirical_risk_equals_expected_on_empirical_distribution() {
        let p = synthetic::random_regression_distribution(3, 2, 8, 0.2, 1).unwrap();
        let s = sample_dataset(&p, 16, 3).unwrap();
        let net = DagNetwork::layered_relu(&[3, 5, 2], 2).unwrap();
        for loss in [Loss::Squared, Loss::ZeroOne] {
            let emp = empirical_risk(&net, &s, loss).unwrap();
            let via_dist = expected_risk(&net, &FiniteDistribution::empirical(&s), loss).unwrap();
            assert!(
                (emp - via_dist).abs() <= 1e-12,
                "risk identity broke for {loss:?}"
            );
        }
    }

    #[test]
    fn moments_are_linear_in_probability() {
        let p1 = synthetic::random_regression_distribution(2, 2, 5, 0.1, 10).unwrap();
        let p2 = synthetic::random_regression_distribution(2, 2, 6, 0.1, 11).unwrap();
        let net = DagNetwork::layered_relu(&[2, 3, 2], 4).unwrap();
        let paths = PathSpace::enumerate(&net, 1 << 16).unwrap();
        let lambda = 0.3;
        let mix = p1.mix(&p2, lambda).unwrap();
        let m1 = exact_path_moments(&paths, &net, &p1).unwrap();
        let m2 = exact_path_moments(&paths, &net, &p2).unwrap();
        let mm = exact_path_moments(&paths, &net, &mix).unwrap();
        let blended = m1
            .second_moment
            .scale(lambda)
            .add(&m2.second_moment.scale(1.0 - lambda))
            .unwrap();
        assert!(blended.sub(&mm.second_moment).unwrap().max_abs() < 1e-12);
        let blended_y = lambda * m1.y_sq + (1.0 - lambda) * m2.y_sq;
        assert!((blended_y - mm.y_sq).abs() < 1e-12);
    }

    #[test]
    fn second_moment_is_psd() {
        let p = synthetic::random_regression_distribution(3, 2, 10, 0.3, 21).unwrap();
        let net = DagNetwork::layered_relu(&[3, 4, 2], 22).unwrap();
        let paths = PathSpace::enumerate(&net, 1 << 16).unwrap();
        let m = exact_path_moments(&paths, &net, &p).unwrap();
        let eig = crate::linalg::sym_eig(&m.second_moment).unwrap();
        let min = eig.eigenvalues.last().copied().unwrap();
        assert!(min >= -1e-10, "E[zz^T] eigenvalue {min} below -1e-10");
    }

    #[test]
    fn single_point_moments_are_outer_products() {
        let p = FiniteDistribution::new(vec![SupportPoint {
            x: vec![0.5, -1.0],
            y: vec![1.0, 0.0],
            p: 1.0,
        }])
        .unwrap();
        let net = DagNetwork::layered_relu(&[2, 3, 2], 33).unwrap();
        let paths = PathSpace::enumerate(&net, 1 << 16).unwrap();
        let m = exact_path_moments(&paths, &net, &p).unwrap();
        let z = paths.z_vector(&net, &[0.5, -1.0]).unwrap();
        for i in 0..z.len() {
            for j in 0..z.len() {
                assert!((m.second_moment.get(i, j) - z[i] * z[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn corrupt_labels_edge_cases() {
        let s = synthetic::digits(50, 0.1, 3).unwrap();
        let same = corrupt_labels(&s, 0.0, 10, 9).unwrap();
        assert_eq!(same.samples(), s.samples(), "fraction 0 leaves data alone");

        let one_class = corrupt_labels(&s, 1.0, 1, 9).unwrap();
        for (_, y) in one_class.samples() {
            assert_eq!(y, &[1.0], "one class collapses every label");
        }
    }

    #[test]
    fn corrupt_labels_coincidence_rate() {
        let s = synthetic::digits(4000, 0.0, 77).unwrap();
        let corrupted = corrupt_labels(&s, 1.0, 10, 5).unwrap();
        let coincide = s
            .samples()
            .iter()
            .zip(corrupted.samples())
            .filter(|((_, y0), (_, y1))| argmax(y0) == argmax(y1))
            .count() as f64;
        let n = s.len() as f64;
        let sigma = (n * 0.1 * 0.9).sqrt();
        assert!(
            (coincide - 0.1 * n).abs() <= 3.0 * sigma,
            "coincidence count {coincide} outside band around {}",
            0.1 * n
        );
    }

    fn build_idx_pair(
        images: &[Vec<u8>],
        rows: u32,
        cols: u32,
        labels: &[u8],
        label_count: Option<u32>,
    ) -> (Vec<u8>, Vec<u8>) {
        let mut img = Vec::new();
        img.extend_from_slice(&2051u32.to_be_bytes());
        img.extend_from_slice(&(images.len() as u32).to_be_bytes());
        img.extend_from_slice(&rows.to_be_bytes());
        img.extend_from_slice(&cols.to_be_bytes());
        for im in images {
            img.extend_from_slice(im);
        }
        let mut lab = Vec::new();
        lab.extend_from_slice(&2049u32.to_be_bytes());
        lab.extend_from_slice(&label_count.unwrap_or(labels.len() as u32).to_be_bytes());
        lab.extend_from_slice(labels);
        (img, lab)
    }

    #[test]
    fn idx_parses_hand_built_pair() {
        let (img, lab) = build_idx_pair(
            &[vec![0, 51, 102, 255], vec![255, 0, 255, 0]],
            2,
            2,
            &[1, 0],
            None,
        );
        let ds = parse_idx(&img, "img", &lab, "lab").unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(
            ds.samples()[0].0,
            vec![0.0, 51.0 / 255.0, 102.0 / 255.0, 1.0]
        );
        assert_eq!(ds.samples()[0].1, vec![0.0, 1.0]);
        assert_eq!(ds.samples()[1].1, vec![1.0, 0.0]);
    }

    #[test]
    fn idx_file_pair_round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lab) = build_idx_pair(&[vec![10, 20, 30, 40]], 2, 2, &[3], None);
        let ip = dir.path().join("imgs");
        let lp = dir.path().join("labs");
        std::fs::write(&ip, &img).unwrap();
        std::fs::write(&lp, &lab).unwrap();
        let ds = load_idx(ip.to_str().unwrap(), lp.to_str().unwrap()).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.target_dim(), 4);
        assert!(matches!(ds.provenance(), Provenance::Loaded { .. }));
    }

    #[test]
    fn idx_count_mismatch_names_both_counts() {
        let (img, lab) = build_idx_pair(&[vec![0, 0, 0, 0]], 2, 2, &[1, 0], Some(2));
        let err = parse_idx(&img, "img", &lab, "lab").unwrap_err();
        match err {
            DataError::CountMismatch { images, labels } => {
                assert_eq!((images, labels), (1, 2));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn idx_wrong_magic_and_truncation() {
        let (mut img, lab) = build_idx_pair(&[vec![0, 0, 0, 0]], 2, 2, &[1], None);
        img[3] = 0; // magic 2051 -> 2048
        assert!(matches!(
            parse_idx(&img, "img", &lab, "lab"),
            Err(DataError::BadMagic { .. })
        ));

        let (img, lab) = build_idx_pair(&[vec![0, 0, 0, 0]], 2, 2, &[1], None);
        let truncated = &img[..img.len() - 2];
        match parse_idx(truncated, "img", &lab, "lab") {
            Err(DataError::Truncated { offset, needed, .. }) => {
                assert_eq!(offset, 16);
                assert_eq!(needed, 2);
            }
            other => panic!("unexpected result {other:?}"),
        }
    }

    #[test]
    fn official_mnist_test_file_when_available() {
        // Gated on the file being present; the build environment does not
        // ship the official archives.
        let images = "data/t10k-images-idx3-ubyte";
        let labels = "data/t10k-labels-idx1-ubyte";
        if !std::path::Path::new(images).exists() {
            return;
        }
        let ds = load_idx(images, labels).unwrap();
        assert_eq!(ds.len(), 10_000);
        assert_eq!(argmax(&ds.samples()[0].1), 7);
    }

    #[test]
    fn downsample_2x2_averages_blocks() {
        let x: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let ds = Dataset::new(vec![(x, vec![1.0])], Provenance::Sampled { seed: 0 }).unwrap();
        let down = downsample_2x2(&ds).unwrap();
        // 4x4 -> 2x2: block means.
        assert_eq!(down.samples()[0].0, vec![2.5, 4.5, 10.5, 12.5]);
    }

    #[test]
    fn digits_have_expected_shape_and_range() {
        let s = synthetic::digits(40, 0.2, 9).unwrap();
        assert_eq!(s.input_dim(), 196);
        assert_eq!(s.target_dim(), 10);
        for (x, _) in s.samples() {
            assert!(x.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn prefix_and_suffix_split() {
        let s = synthetic::digits(10, 0.0, 1).unwrap();
        let p = s.prefix(0.5);
        assert_eq!(p.len(), 5);
        let rest = s.suffix(0.5).unwrap();
        assert_eq!(rest.len(), 5);
        assert!(s.suffix(1.0).is_none());
        assert_eq!(s.prefix(0.0).len(), 1, "prefix is never empty");
    }
}
