//! Synthetic PPCA data, even partitioning across nodes, and measurement
//! matrices for affine structure from motion.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DataError {
    #[error("invalid data spec: {0}")]
    InvalidSpec(&'static str),
    #[error("cannot split {samples} samples across {nodes} nodes")]
    TooFewSamples { samples: usize, nodes: usize },
    #[error("cannot split {frames} frames across {nodes} nodes")]
    TooFewFrames { frames: usize, nodes: usize },
    #[error("measurement matrix is empty")]
    Empty,
    #[error("measurement matrix has {0} rows; expected an even count (x and y per frame)")]
    OddRows(usize),
    #[error("row {row} has {found} columns, expected {expected}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("non-finite entry at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Parameters of the synthetic subspace experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_samples: usize,
    pub ambient_dim: usize,
    pub latent_dim: usize,
    pub noise_variance: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            num_samples: 500,
            ambient_dim: 20,
            latent_dim: 5,
            noise_variance: 0.2,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.num_samples == 0 {
            return Err(DataError::InvalidSpec("num_samples must be ≥ 1"));
        }
        if self.latent_dim == 0 || self.latent_dim > self.ambient_dim {
            return Err(DataError::InvalidSpec("need ambient_dim ≥ latent_dim ≥ 1"));
        }
        if !(self.noise_variance.is_finite() && self.noise_variance >= 0.0) {
            return Err(DataError::InvalidSpec("noise_variance must be ≥ 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    /// `D x N` observations, one sample per column.
    pub x: DMatrix<f64>,
    /// `D x M` generating projection with orthonormal columns.
    pub w_true: DMatrix<f64>,
}

/// Draws `x_n = W z_n + eps_n` with `z_n ~ N(0, I_M)`, `eps_n ~ N(0, s I_D)`
/// and `W` the orthonormalized Gaussian basis.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData, DataError> {
    spec.validate()?;
    let (d, m, n) = (spec.ambient_dim, spec.latent_dim, spec.num_samples);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let gauss = DMatrix::from_fn(d, m, |_, _| gaussian(&mut rng));
    let w_true = gauss.qr().q();
    let z = DMatrix::from_fn(m, n, |_, _| gaussian(&mut rng));
    let noise_sd = libm::sqrt(spec.noise_variance);
    let noise = DMatrix::from_fn(d, n, |_, _| gaussian(&mut rng) * noise_sd);
    let x = &w_true * z + noise;
    Ok(SyntheticData { x, w_true })
}

/// Splits the columns into `nodes` contiguous blocks whose sizes differ by at
/// most one; the first `N mod J` blocks get the extra column.
pub fn partition_even(x: &DMatrix<f64>, nodes: usize) -> Result<Vec<DMatrix<f64>>, DataError> {
    let n = x.ncols();
    if nodes == 0 || n < nodes {
        return Err(DataError::TooFewSamples { samples: n, nodes });
    }
    Ok(block_sizes(n, nodes)
        .scan(0, |start, len| {
            let block = x.columns(*start, len).into_owned();
            *start += len;
            Some(block)
        })
        .collect())
}

fn block_sizes(total: usize, parts: usize) -> impl Iterator<Item = usize> {
    let (base, extra) = (total / parts, total % parts);
    (0..parts).map(move |k| base + usize::from(k < extra))
}

/// A `2F x N` matrix of tracked image points: rows `2f` and `2f + 1` hold the
/// x and y coordinates of all `N` points in frame `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMatrix {
    values: DMatrix<f64>,
}

impl MeasurementMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self, DataError> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(DataError::Empty);
        }
        if values.nrows() % 2 != 0 {
            return Err(DataError::OddRows(values.nrows()));
        }
        for row in 0..values.nrows() {
            for col in 0..values.ncols() {
                if !values[(row, col)].is_finite() {
                    return Err(DataError::NonFinite { row, col });
                }
            }
        }
        Ok(MeasurementMatrix { values })
    }

    /// Builds from row vectors, rejecting ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, DataError> {
        let Some(first) = rows.first() else {
            return Err(DataError::Empty);
        };
        let cols = first.len();
        if let Some((row, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
            return Err(DataError::Ragged {
                row,
                expected: cols,
                found: r.len(),
            });
        }
        Self::new(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn frames(&self) -> usize {
        self.values.nrows() / 2
    }

    pub fn points(&self) -> usize {
        self.values.ncols()
    }

    /// Distributes whole frames evenly across `nodes` and returns each node's
    /// shard as `N x 2F_i` data: every measurement row becomes one sample over
    /// the `N` points, centered by its own mean to remove the frame translation.
    pub fn partition_frames(&self, nodes: usize) -> Result<Vec<DMatrix<f64>>, DataError> {
        let frames = self.frames();
        if nodes == 0 || frames < nodes {
            return Err(DataError::TooFewFrames { frames, nodes });
        }
        Ok(block_sizes(frames, nodes)
            .scan(0, |start, len| {
                let rows = self.values.rows(2 * *start, 2 * len);
                *start += len;
                Some(center_samples(rows.transpose()))
            })
            .collect())
    }

    /// Orthonormal `N x rank` basis of the centralized structure estimate:
    /// the leading right singular vectors of the row-centered matrix.
    pub fn structure_basis(&self, rank: usize) -> DMatrix<f64> {
        let centered = center_samples(self.values.transpose()).transpose();
        let svd = centered.svd(false, true);
        let v_t = svd.v_t.expect("requested V^T");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let cols: Vec<_> = order
            .iter()
            .take(rank)
            .map(|&k| v_t.row(k).transpose())
            .collect();
        DMatrix::from_columns(&cols)
    }
}

/// Subtracts from every column its own mean.
fn center_samples(mut samples: DMatrix<f64>) -> DMatrix<f64> {
    for mut col in samples.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    samples
}

/// Parameters of a synthetic rigid scene seen by affine cameras.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineSpec {
    pub frames: usize,
    pub points: usize,
    /// Standard deviation of the image-coordinate noise.
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for AffineSpec {
    fn default() -> Self {
        AffineSpec {
            frames: 30,
            points: 100,
            noise_std: 0.01,
            seed: 0,
        }
    }
}

/// Rank-3 (plus translation) measurement matrix: Gaussian 3-D points viewed
/// by random orthographic cameras with random image translations.
pub fn generate_affine(spec: &AffineSpec) -> Result<MeasurementMatrix, DataError> {
    if spec.frames == 0 || spec.points < 4 {
        return Err(DataError::InvalidSpec("need ≥ 1 frame and ≥ 4 points"));
    }
    if !(spec.noise_std.is_finite() && spec.noise_std >= 0.0) {
        return Err(DataError::InvalidSpec("noise_std must be ≥ 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let structure = DMatrix::from_fn(3, spec.points, |_, _| gaussian(&mut rng));
    let mut values = DMatrix::zeros(2 * spec.frames, spec.points);
    for f in 0..spec.frames {
        let rotation = DMatrix::from_fn(3, 3, |_, _| gaussian(&mut rng)).qr().q();
        let camera = rotation.rows(0, 2).into_owned();
        let image = camera * &structure;
        for axis in 0..2 {
            let shift = gaussian(&mut rng);
            for p in 0..spec.points {
                values[(2 * f + axis, p)] = image[(axis, p)] + shift;
            }
        }
    }
    for v in values.iter_mut() {
        *v += spec.noise_std * gaussian(&mut rng);
    }
    MeasurementMatrix::new(values)
}
