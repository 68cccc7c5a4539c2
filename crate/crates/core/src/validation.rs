//! Sampling checks of the moment identities in [`crate::moments`].
//!
//! Each case draws a random distribution (and random matrices where the
//! identity needs them), estimates the moment from independent samples and
//! reports the deviation from the closed form in standard errors.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::linalg::{CMatrix, CVector, Hermitian};
use crate::moments::{
    expected_norm_fourth, factor_psd, outer_moment, quad_expectation, quartic_expectation, AffineMap, ComplexNormal, MomentsError,
    Sampler,
};
use crate::rng::{standard_complex_normal, stream, substream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ValidationError {
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("sample counts must be at least 2")]
    TooFewSamples,
    #[error(transparent)]
    Moments(#[from] MomentsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Identity {
    Quadratic,
    Outer,
    Quartic,
    NormFourth,
}

impl Identity {
    pub const ALL: [Identity; 4] = [Identity::Quadratic, Identity::Outer, Identity::Quartic, Identity::NormFourth];

    pub fn as_str(&self) -> &'static str {
        match self {
            Identity::Quadratic => "quad_expectation",
            Identity::Outer => "outer_moment",
            Identity::Quartic => "quartic_expectation",
            Identity::NormFourth => "expected_norm_fourth",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationOptions {
    pub seed: u64,
    /// Random instances per identity.
    pub trials: usize,
    /// Dimensions cycled through by the instances.
    pub dims: Vec<usize>,
    pub samples: usize,
    pub quartic_samples: usize,
    /// Pass threshold in standard errors.
    pub threshold: f64,
    /// Test hook: scale the closed form of one identity by 1.1.
    pub corrupt: Option<Identity>,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            seed: 1,
            trials: 25,
            dims: vec![1, 2, 4, 8],
            samples: 1_000_000,
            quartic_samples: 10_000_000,
            threshold: 5.0,
            corrupt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseReport {
    pub identity: Identity,
    pub instance: usize,
    pub dim: usize,
    pub samples: usize,
    /// Largest deviation over the compared components, in standard errors.
    pub max_sigma: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub threshold: f64,
    pub cases: Vec<CaseReport>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.cases.iter().all(|c| c.passed)
    }

    pub fn max_sigma(&self, identity: Identity) -> f64 {
        self.cases
            .iter()
            .filter(|c| c.identity == identity)
            .map(|c| c.max_sigma)
            .fold(0.0, f64::max)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CaseReport> {
        self.cases.iter().filter(|c| !c.passed)
    }
}

/// Running sums of real samples.
#[derive(Debug, Clone, Copy, Default)]
struct Moments1 {
    n: usize,
    sum: f64,
    sum_sq: f64,
}

impl Moments1 {
    fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn merge(mut self, o: Moments1) -> Self {
        self.n += o.n;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
        self
    }

    /// `|mean − expect|` in standard errors.
    fn sigma(&self, expect: f64) -> f64 {
        let n = self.n as f64;
        let mean = self.sum / n;
        let var = ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        let se = (var / n).sqrt();
        let dev = (mean - expect).abs();
        // Zero-variance components must match to rounding.
        let floor = 1e-12 * (mean.abs() + expect.abs()).max(1e-300);
        if dev <= floor {
            0.0
        } else if se == 0.0 {
            f64::INFINITY
        } else {
            dev / se
        }
    }
}

const CHUNK: usize = 1 << 16;

/// Splits `samples` draws into fixed chunks, each with its own stream, and
/// merges the per-chunk accumulators in chunk order.
fn sample_chunks<A, F>(seed: u64, samples: usize, init: A, run: F) -> A
where
    A: Clone + Send + Sync,
    F: Fn(&mut crate::rng::SeededStream, usize, &mut A) + Sync,
    A: Merge,
{
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, &[c as u64]);
            let n = CHUNK.min(samples - c * CHUNK);
            let mut acc = init.clone();
            run(&mut rng, n, &mut acc);
            acc
        })
        .collect();
    parts.into_iter().fold(init, |a, b| a.merge_with(b))
}

trait Merge {
    fn merge_with(self, other: Self) -> Self;
}

impl Merge for Vec<Moments1> {
    fn merge_with(self, other: Self) -> Self {
        self.into_iter().zip(other).map(|(a, b)| a.merge(b)).collect()
    }
}

fn random_distribution<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexNormal {
    // Rank between 1 and dim, so degenerate covariances are exercised too.
    let rank = 1 + (rng.random::<u64>() as usize) % dim;
    let x = CMatrix::from_fn(dim, rank, |_, _| standard_complex_normal(rng));
    let scale = rng.random::<f64>() + 0.1;
    let cov = Hermitian::symmetrize(&x * x.adjoint() * Complex64::new(scale / rank as f64, 0.0));
    let mean_scale = if rng.random::<f64>() < 0.2 { 0.0 } else { rng.random::<f64>() * 1.5 };
    let mean = CVector::from_fn(dim, |_, _| standard_complex_normal(rng) * mean_scale);
    ComplexNormal::new(mean, cov).expect("matching dimensions")
}

fn random_matrix<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(dim, dim, |_, _| standard_complex_normal(rng))
}

fn random_map<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> AffineMap {
    AffineMap::new(
        random_matrix(dim, rng),
        CVector::from_fn(dim, |_, _| standard_complex_normal(rng) * 0.5),
    )
}

fn corrupted(opts: &ValidationOptions, id: Identity) -> f64 {
    if opts.corrupt == Some(id) {
        1.1
    } else {
        1.0
    }
}

fn check_quadratic(dist: &ComplexNormal, sampler: &Sampler, a: &CMatrix, seed: u64, opts: &ValidationOptions) -> Result<f64, ValidationError> {
    let expect = quad_expectation(a, dist)? * corrupted(opts, Identity::Quadratic);
    let dim = dist.dim();
    let acc = sample_chunks(seed, opts.samples, vec![Moments1::default(); 2], |rng, n, acc| {
        let mut x = CVector::zeros(dim);
        let mut ax = CVector::zeros(dim);
        for _ in 0..n {
            sampler.sample_into(rng, &mut x);
            ax.gemv(Complex64::new(1.0, 0.0), a, &x, Complex64::new(0.0, 0.0));
            let v = x.dotc(&ax);
            acc[0].push(v.re);
            acc[1].push(v.im);
        }
    });
    Ok(acc[0].sigma(expect.re).max(acc[1].sigma(expect.im)))
}

fn check_outer(dist: &ComplexNormal, sampler: &Sampler, seed: u64, opts: &ValidationOptions) -> Result<f64, ValidationError> {
    let expect = outer_moment(dist).into_matrix() * Complex64::new(corrupted(opts, Identity::Outer), 0.0);
    let dim = dist.dim();
    // Upper triangle including the diagonal, real and imaginary parts.
    let pairs: Vec<(usize, usize)> = (0..dim).flat_map(|i| (i..dim).map(move |j| (i, j))).collect();
    let acc = sample_chunks(seed, opts.samples, vec![Moments1::default(); 2 * pairs.len()], |rng, n, acc| {
        let mut x = CVector::zeros(dim);
        for _ in 0..n {
            sampler.sample_into(rng, &mut x);
            for (p, &(i, j)) in pairs.iter().enumerate() {
                let v = x[i] * x[j].conj();
                acc[2 * p].push(v.re);
                acc[2 * p + 1].push(v.im);
            }
        }
    });
    Ok(pairs
        .iter()
        .enumerate()
        .map(|(p, &(i, j))| acc[2 * p].sigma(expect[(i, j)].re).max(acc[2 * p + 1].sigma(expect[(i, j)].im)))
        .fold(0.0, f64::max))
}

/// The four affine images of `x = m + G·w` stacked as one real-split map
/// of `w`, so that each draw costs one pass over a `4·dim × rank` matrix.
struct StackedMaps {
    dim: usize,
    rank: usize,
    re: Vec<f64>,
    im: Vec<f64>,
    off_re: Vec<f64>,
    off_im: Vec<f64>,
}

impl StackedMaps {
    fn new(maps: &[AffineMap; 4], dist: &ComplexNormal) -> Result<Self, ValidationError> {
        let g = factor_psd(dist.cov())?;
        let g = g.matrix();
        let (dim, rank) = (dist.dim(), g.ncols());
        let rows = 4 * dim;
        let mut st = StackedMaps {
            dim,
            rank,
            re: vec![0.0; rows * rank],
            im: vec![0.0; rows * rank],
            off_re: vec![0.0; rows],
            off_im: vec![0.0; rows],
        };
        for (b, map) in maps.iter().enumerate() {
            let h = &map.mat * g;
            let off = map.apply(dist.mean());
            for r in 0..dim {
                st.off_re[b * dim + r] = off[r].re;
                st.off_im[b * dim + r] = off[r].im;
                for c in 0..rank {
                    st.re[c * rows + b * dim + r] = h[(r, c)].re;
                    st.im[c * rows + b * dim + r] = h[(r, c)].im;
                }
            }
        }
        Ok(st)
    }

    #[inline]
    fn apply(&self, w: &[Complex64], y_re: &mut [f64], y_im: &mut [f64]) {
        let rows = 4 * self.dim;
        y_re.copy_from_slice(&self.off_re);
        y_im.copy_from_slice(&self.off_im);
        for (c, wc) in w.iter().enumerate() {
            let cr = &self.re[c * rows..(c + 1) * rows];
            let ci = &self.im[c * rows..(c + 1) * rows];
            for r in 0..rows {
                y_re[r] += cr[r] * wc.re - ci[r] * wc.im;
                y_im[r] += cr[r] * wc.im + ci[r] * wc.re;
            }
        }
    }

    /// `y_aᴴ·y_b` for blocks `a`, `b`.
    #[inline]
    fn inner(&self, y_re: &[f64], y_im: &[f64], a: usize, b: usize) -> Complex64 {
        let (d, mut re, mut im) = (self.dim, 0.0, 0.0);
        for r in 0..d {
            let (ar, ai) = (y_re[a * d + r], y_im[a * d + r]);
            let (br, bi) = (y_re[b * d + r], y_im[b * d + r]);
            re += ar * br + ai * bi;
            im += ar * bi - ai * br;
        }
        Complex64::new(re, im)
    }
}

fn check_quartic(
    dist: &ComplexNormal,
    maps: &[AffineMap; 4],
    seed: u64,
    opts: &ValidationOptions,
) -> Result<f64, ValidationError> {
    let expect =
        quartic_expectation(&maps[0], &maps[1], &maps[2], &maps[3], dist)? * corrupted(opts, Identity::Quartic);
    let stacked = StackedMaps::new(maps, dist)?;
    let rows = 4 * stacked.dim;
    let acc = sample_chunks(seed, opts.quartic_samples, vec![Moments1::default(); 2], |rng, n, acc| {
        let mut w = vec![Complex64::new(0.0, 0.0); stacked.rank];
        let mut y_re = vec![0.0; rows];
        let mut y_im = vec![0.0; rows];
        for _ in 0..n {
            w.iter_mut().for_each(|z| *z = standard_complex_normal(rng));
            stacked.apply(&w, &mut y_re, &mut y_im);
            let v = stacked.inner(&y_re, &y_im, 0, 1) * stacked.inner(&y_re, &y_im, 2, 3);
            acc[0].push(v.re);
            acc[1].push(v.im);
        }
    });
    Ok(acc[0].sigma(expect.re).max(acc[1].sigma(expect.im)))
}

fn check_norm_fourth(dist: &ComplexNormal, sampler: &Sampler, seed: u64, opts: &ValidationOptions) -> Result<f64, ValidationError> {
    let expect = expected_norm_fourth(dist) * corrupted(opts, Identity::NormFourth);
    let dim = dist.dim();
    let acc = sample_chunks(seed, opts.samples, vec![Moments1::default(); 1], |rng, n, acc| {
        let mut x = CVector::zeros(dim);
        for _ in 0..n {
            sampler.sample_into(rng, &mut x);
            let s = x.norm_squared();
            acc[0].push(s * s);
        }
    });
    Ok(acc[0].sigma(expect))
}

/// Runs every identity on `opts.trials` random instances.
pub fn validate_moments(opts: &ValidationOptions) -> Result<ValidationReport, ValidationError> {
    validate_identities(opts, &Identity::ALL)
}

/// Runs the selected identities on `opts.trials` random instances.
pub fn validate_identities(opts: &ValidationOptions, identities: &[Identity]) -> Result<ValidationReport, ValidationError> {
    if opts.trials == 0 || opts.dims.is_empty() {
        return Err(ValidationError::NoTrials);
    }
    if opts.samples < 2 || opts.quartic_samples < 2 {
        return Err(ValidationError::TooFewSamples);
    }
    let mut cases = Vec::new();
    for (id_index, &identity) in identities.iter().enumerate() {
        for instance in 0..opts.trials {
            let dim = opts.dims[instance % opts.dims.len()];
            let mut rng = stream(crate::rng::derive_seed(opts.seed, &[id_index as u64, instance as u64, 0]));
            let dist = random_distribution(dim, &mut rng);
            let sampler = dist.sampler()?;
            let seed = crate::rng::derive_seed(opts.seed, &[id_index as u64, instance as u64, 1]);
            let (max_sigma, samples) = match identity {
                Identity::Quadratic => {
                    let a = random_matrix(dim, &mut rng);
                    (check_quadratic(&dist, &sampler, &a, seed, opts)?, opts.samples)
                }
                Identity::Outer => (check_outer(&dist, &sampler, seed, opts)?, opts.samples),
                Identity::Quartic => {
                    let maps = std::array::from_fn(|_| random_map(dim, &mut rng));
                    (check_quartic(&dist, &maps, seed, opts)?, opts.quartic_samples)
                }
                Identity::NormFourth => (check_norm_fourth(&dist, &sampler, seed, opts)?, opts.samples),
            };
            cases.push(CaseReport {
                identity,
                instance,
                dim,
                samples,
                max_sigma,
                passed: max_sigma <= opts.threshold,
            });
        }
    }
    Ok(ValidationReport {
        threshold: opts.threshold,
        cases,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> ValidationOptions {
        ValidationOptions {
            trials: 8,
            samples: 50_000,
            quartic_samples: 100_000,
            ..Default::default()
        }
    }

    #[test]
    fn identities_pass_on_small_runs() {
        let report = validate_moments(&quick()).unwrap();
        assert_eq!(report.cases.len(), 32);
        assert!(report.passed(), "{:?}", report.failures().collect::<Vec<_>>());
    }

    #[test]
    fn corrupted_formula_is_caught() {
        for id in Identity::ALL {
            let opts = ValidationOptions {
                corrupt: Some(id),
                ..quick()
            };
            let report = validate_identities(&opts, &[id]).unwrap();
            assert!(!report.passed(), "{id:?}");
        }
    }

    #[test]
    fn zero_trials_rejected() {
        let opts = ValidationOptions { trials: 0, ..quick() };
        assert_eq!(validate_moments(&opts), Err(ValidationError::NoTrials));
    }

    #[test]
    fn reports_are_reproducible() {
        let opts = ValidationOptions {
            trials: 2,
            samples: 1000,
            quartic_samples: 1000,
            ..Default::default()
        };
        assert_eq!(validate_moments(&opts).unwrap(), validate_moments(&opts).unwrap());
    }
}
