//! Exact-law sampling: dense Cholesky factorization of the path covariance
//! (reference sampler), circulant embedding of the stationary increments
//! (performance sampler), and the bivariate pair law (B_s, B_t).
//!
//! All draws come from counter-based substreams of a master seed, so results
//! replay bit-identically and path-level parallelism cannot perturb them.

use std::io::{Read, Write};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::covariance::{abs_pow, cov_r, variance};
use crate::model::{Error, HurstModel, PairSample, Result, SimplexPoint};
use crate::rng::{substream, StreamDomain};

/// Dense factorization budget for the reference sampler.
pub const CHOLESKY_MAX_POINTS: usize = 4096;

/// One d-dimensional path sampled on a strictly increasing grid starting at
/// zero. Values are stored time-major: `values[i*d + c]` is coordinate c at
/// grid point i.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmPath {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub dim: usize,
    pub seed: u64,
}

impl FbmPath {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Coordinate values at grid index i.
    pub fn at(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Grid spacing if the grid is uniform.
    pub fn uniform_dt(&self) -> Option<f64> {
        if self.grid.len() < 2 {
            return None;
        }
        let dt = self.grid[1] - self.grid[0];
        let span = *self.grid.last().unwrap();
        for (i, &g) in self.grid.iter().enumerate() {
            if (g - i as f64 * dt).abs() > 1e-9 * span.max(1.0) {
                return None;
            }
        }
        Some(dt)
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 || grid[0] != 0.0 {
        return Err(Error::InvalidGrid);
    }
    if !grid.windows(2).all(|w| w[1] > w[0]) {
        return Err(Error::InvalidGrid);
    }
    Ok(())
}

/// Reference sampler: exact joint law via dense Cholesky factorization of
/// the grid covariance, one independent copy per coordinate.
pub struct CholeskySampler {
    model: HurstModel,
    grid: Vec<f64>,
    /// Lower-triangular factor, packed row-major (row i holds i+1 entries).
    factor: Vec<f64>,
    n: usize,
}

impl CholeskySampler {
    pub fn new(model: &HurstModel, grid: &[f64]) -> Result<Self> {
        validate_grid(grid)?;
        let n = grid.len() - 1;
        if n > CHOLESKY_MAX_POINTS {
            return Err(Error::GridTooLarge(n, CHOLESKY_MAX_POINTS));
        }
        let times = &grid[1..];
        let cov = DMatrix::from_fn(n, n, |i, j| cov_r(model, times[i], times[j]));
        let max_var = times
            .iter()
            .map(|&t| variance(model, t))
            .fold(0.0f64, f64::max);
        let chol = match nalgebra::Cholesky::new(cov.clone()) {
            Some(c) => c,
            None => {
                log::warn!("covariance factorization failed; retrying with diagonal jitter");
                let jitter = 1e-12 * max_var;
                let mut jittered = cov;
                for i in 0..n {
                    jittered[(i, i)] += jitter;
                }
                nalgebra::Cholesky::new(jittered).ok_or(Error::Factorization)?
            }
        };
        let l = chol.l();
        let mut factor = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in 0..=i {
                factor.push(l[(i, j)]);
            }
        }
        Ok(Self {
            model: *model,
            grid: grid.to_vec(),
            factor,
            n,
        })
    }

    /// Sample path `index` of the stream rooted at `seed`.
    pub fn sample(&self, seed: u64, index: u64) -> FbmPath {
        let mut rng = substream(seed, StreamDomain::PathSampling, index);
        let d = self.model.dim();
        let n = self.n;
        let mut values = vec![0.0; (n + 1) * d];
        let mut z = vec![0.0; n];
        for c in 0..d {
            for zk in z.iter_mut() {
                *zk = rng.sample(StandardNormal);
            }
            let mut row_start = 0;
            for i in 0..n {
                let row = &self.factor[row_start..row_start + i + 1];
                let mut acc = 0.0;
                for (lij, zj) in row.iter().zip(&z) {
                    acc += lij * zj;
                }
                values[(i + 1) * d + c] = acc;
                row_start += i + 1;
            }
        }
        FbmPath {
            grid: self.grid.clone(),
            values,
            dim: d,
            seed,
        }
    }
}

/// Reusable buffers for the circulant sampler.
pub struct CirculantScratch {
    freq: Vec<Complex<f64>>,
    fft_scratch: Vec<Complex<f64>>,
}

/// Performance sampler: circulant embedding of the stationary increment
/// autocovariance, one FFT per coordinate per path.
pub struct CirculantSampler {
    model: HurstModel,
    n: usize,
    dt: f64,
    /// Eigenvalues of the size-2n circulant, clamped at zero.
    eigenvalues: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl CirculantSampler {
    /// Builds the embedding for `n` increments of spacing `dt`. Fails with
    /// `Error::Factorization` when the embedding has materially negative
    /// eigenvalues (callers then fall back to the reference sampler).
    pub fn new(model: &HurstModel, n: usize, dt: f64) -> Result<Self> {
        if n < 2 || dt <= 0.0 {
            return Err(Error::InvalidGrid);
        }
        let e = model.two_h();
        // unit-spacing increment autocovariance
        let gamma = |k: usize| -> f64 {
            let k = k as f64;
            0.5 * (abs_pow(k + 1.0, e) - 2.0 * abs_pow(k, e) + abs_pow(k - 1.0, e))
        };
        let m = 2 * n;
        let mut row: Vec<Complex<f64>> = Vec::with_capacity(m);
        row.push(Complex::new(gamma(0), 0.0));
        for k in 1..=n {
            row.push(Complex::new(gamma(k), 0.0));
        }
        for k in (1..n).rev() {
            row.push(Complex::new(gamma(k), 0.0));
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        fft.process(&mut row);
        let max_eig = row.iter().map(|c| c.re).fold(0.0f64, f64::max);
        let min_eig = row.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
        if min_eig < -1e-8 * max_eig {
            return Err(Error::Factorization);
        }
        let eigenvalues = row.iter().map(|c| c.re.max(0.0)).collect();
        Ok(Self {
            model: *model,
            n,
            dt,
            eigenvalues,
            fft,
        })
    }

    pub fn scratch(&self) -> CirculantScratch {
        CirculantScratch {
            freq: vec![Complex::new(0.0, 0.0); 2 * self.n],
            fft_scratch: vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()],
        }
    }

    pub fn sample(&self, seed: u64, index: u64) -> FbmPath {
        let mut scratch = self.scratch();
        self.sample_with_scratch(seed, index, &mut scratch)
    }

    pub fn sample_with_scratch(
        &self,
        seed: u64,
        index: u64,
        scratch: &mut CirculantScratch,
    ) -> FbmPath {
        let mut rng = substream(seed, StreamDomain::PathSampling, index);
        let d = self.model.dim();
        let n = self.n;
        let m = 2 * n;
        let m_f = m as f64;
        let scale = abs_pow(self.dt, self.model.h());
        let mut values = vec![0.0; (n + 1) * d];
        for c in 0..d {
            let w = &mut scratch.freq;
            let g0: f64 = rng.sample(StandardNormal);
            let gn: f64 = rng.sample(StandardNormal);
            w[0] = Complex::new((self.eigenvalues[0] / m_f).sqrt() * g0, 0.0);
            w[n] = Complex::new((self.eigenvalues[n] / m_f).sqrt() * gn, 0.0);
            for k in 1..n {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                let amp = (self.eigenvalues[k] / (2.0 * m_f)).sqrt();
                w[k] = Complex::new(amp * a, amp * b);
                w[m - k] = w[k].conj();
            }
            self.fft.process_with_scratch(w, &mut scratch.fft_scratch);
            let mut acc = 0.0;
            for i in 0..n {
                acc += scale * w[i].re;
                values[(i + 1) * d + c] = acc;
            }
        }
        let grid = (0..=n).map(|i| i as f64 * self.dt).collect();
        FbmPath {
            grid,
            values,
            dim: d,
            seed,
        }
    }
}

/// Either sampler behind one interface, so studies can switch by config.
pub enum PathSampler {
    Cholesky(CholeskySampler),
    Circulant(CirculantSampler),
}

impl PathSampler {
    /// Uniform-grid constructor for the requested backend. A circulant
    /// embedding failure falls back to the reference sampler with a logged
    /// warning.
    pub fn uniform(model: &HurstModel, n: usize, dt: f64, circulant: bool) -> Result<Self> {
        if circulant {
            match CirculantSampler::new(model, n, dt) {
                Ok(s) => return Ok(PathSampler::Circulant(s)),
                Err(Error::Factorization) => {
                    log::warn!(
                        "circulant embedding not nonnegative definite (n={n}); \
                         falling back to dense Cholesky"
                    );
                }
                Err(e) => return Err(e),
            }
        }
        let grid: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
        Ok(PathSampler::Cholesky(CholeskySampler::new(model, &grid)?))
    }

    pub fn sample(&self, seed: u64, index: u64) -> FbmPath {
        match self {
            PathSampler::Cholesky(s) => s.sample(seed, index),
            PathSampler::Circulant(s) => s.sample(seed, index),
        }
    }
}

/// One-shot reference draw on an arbitrary grid.
pub fn sample_path_cholesky(model: &HurstModel, grid: &[f64], seed: u64) -> Result<FbmPath> {
    Ok(CholeskySampler::new(model, grid)?.sample(seed, 0))
}

/// One-shot circulant draw on the uniform grid {0, dt, ..., n·dt}.
pub fn sample_path_circulant(model: &HurstModel, n: usize, dt: f64, seed: u64) -> Result<FbmPath> {
    Ok(PathSampler::uniform(model, n, dt, true)?.sample(seed, 0))
}

/// Per-coordinate 2×2 law of (B_s, B_t).
#[derive(Debug, Clone, Copy)]
pub struct PairLaw {
    pub s: f64,
    pub t: f64,
    pub var_s: f64,
    pub var_t: f64,
    pub cov: f64,
    l11: f64,
    l21: f64,
    l22: f64,
}

impl PairLaw {
    pub fn new(model: &HurstModel, p: SimplexPoint) -> Result<Self> {
        let var_s = variance(model, p.s());
        let var_t = variance(model, p.t());
        let cov = cov_r(model, p.s(), p.t());
        let det = var_s * var_t - cov * cov;
        if det <= 0.0 || var_s <= 0.0 {
            return Err(Error::DiagonalPair { s: p.s(), t: p.t() });
        }
        let l11 = var_s.sqrt();
        let l21 = cov / l11;
        let l22 = (var_t - l21 * l21).sqrt();
        Ok(Self {
            s: p.s(),
            t: p.t(),
            var_s,
            var_t,
            cov,
            l11,
            l21,
            l22,
        })
    }

    /// One exact draw of (B_s, B_t) per coordinate.
    pub fn sample_into(&self, rng: &mut ChaCha8Rng, x: &mut PairSample) {
        for c in 0..x.bs.len() {
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            x.bs[c] = self.l11 * z1;
            x.bt[c] = self.l21 * z1 + self.l22 * z2;
        }
    }
}

/// Sequential stream of i.i.d. pair draws.
pub struct PairStream {
    law: PairLaw,
    dim: usize,
    rng: ChaCha8Rng,
    remaining: usize,
}

impl Iterator for PairStream {
    type Item = PairSample;

    fn next(&mut self) -> Option<PairSample> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let mut x = PairSample {
            bs: vec![0.0; self.dim],
            bt: vec![0.0; self.dim],
        };
        self.law.sample_into(&mut self.rng, &mut x);
        Some(x)
    }
}

/// `count` exact draws from the pair law at `p`, replayable from `seed`.
pub fn sample_pair(
    model: &HurstModel,
    p: SimplexPoint,
    count: usize,
    seed: u64,
) -> Result<PairStream> {
    Ok(PairStream {
        law: PairLaw::new(model, p)?,
        dim: model.dim(),
        rng: substream(seed, StreamDomain::PairSampling, 0),
        remaining: count,
    })
}

const DUMP_MAGIC: &[u8; 8] = b"FBMPATH1";

/// Writes a uniform-grid path as little-endian binary: the 8-byte magic,
/// then H (f64), d (u64), n (u64), dt (f64), seed (u64), then the
/// (n+1)·d values time-major as f64.
pub fn dump_path<W: Write>(model: &HurstModel, path: &FbmPath, mut out: W) -> Result<()> {
    let dt = path.uniform_dt().ok_or(Error::InvalidGrid)?;
    let n = path.len() - 1;
    out.write_all(DUMP_MAGIC)?;
    out.write_all(&model.h().to_le_bytes())?;
    out.write_all(&(path.dim as u64).to_le_bytes())?;
    out.write_all(&(n as u64).to_le_bytes())?;
    out.write_all(&dt.to_le_bytes())?;
    out.write_all(&path.seed.to_le_bytes())?;
    for v in &path.values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a dump produced by `dump_path`; returns the model and the path.
pub fn load_path<R: Read>(mut input: R) -> Result<(HurstModel, FbmPath)> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != DUMP_MAGIC {
        return Err(Error::MalformedDump("bad magic".into()));
    }
    let mut buf8 = [0u8; 8];
    let mut read_f64 = |input: &mut R| -> Result<f64> {
        input.read_exact(&mut buf8)?;
        Ok(f64::from_le_bytes(buf8))
    };
    let h = read_f64(&mut input)?;
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf)?;
    let d = u64::from_le_bytes(buf) as usize;
    input.read_exact(&mut buf)?;
    let n = u64::from_le_bytes(buf) as usize;
    input.read_exact(&mut buf)?;
    let dt = f64::from_le_bytes(buf);
    input.read_exact(&mut buf)?;
    let seed = u64::from_le_bytes(buf);
    let model = HurstModel::new(h, d.max(1))?;
    if d == 0 || n == 0 || dt <= 0.0 {
        return Err(Error::MalformedDump("degenerate header".into()));
    }
    let mut values = vec![0.0; (n + 1) * d];
    for v in values.iter_mut() {
        input.read_exact(&mut buf)?;
        *v = f64::from_le_bytes(buf);
    }
    let grid = (0..=n).map(|i| i as f64 * dt).collect();
    Ok((
        model,
        FbmPath {
            grid,
            values,
            dim: d,
            seed,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::map_indexed;
    use approx::assert_relative_eq;

    fn model(h: f64, d: usize) -> HurstModel {
        HurstModel::new(h, d).unwrap()
    }

    /// Empirical covariance of sampled paths at two grid indices, with the
    /// standard error of the product estimate.
    fn empirical_cov(paths: &[FbmPath], i: usize, j: usize, c1: usize, c2: usize) -> (f64, f64) {
        let n = paths.len() as f64;
        let prods: Vec<f64> = paths
            .iter()
            .map(|p| p.at(i)[c1] * p.at(j)[c2])
            .collect();
        let mean = prods.iter().sum::<f64>() / n;
        let var = prods.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }

    #[test]
    fn cholesky_marginals_match_law() {
        let m = model(0.75, 2);
        let grid = [0.0, 0.25, 0.5, 1.0];
        let sampler = CholeskySampler::new(&m, &grid).unwrap();
        let paths: Vec<FbmPath> = map_indexed(20_000, |k| sampler.sample(11, k as u64));
        for (idx, &t) in grid.iter().enumerate().skip(1) {
            let (var, se) = empirical_cov(&paths, idx, idx, 0, 0);
            assert!(
                (var - variance(&m, t)).abs() <= 4.0 * se,
                "var at t={t}: {var} vs {}",
                variance(&m, t)
            );
        }
        let (cov, se) = empirical_cov(&paths, 1, 3, 1, 1);
        assert!((cov - cov_r(&m, 0.25, 1.0)).abs() <= 4.0 * se);
        // cross-coordinate independence
        let (cross, se) = empirical_cov(&paths, 2, 3, 0, 1);
        assert!(cross.abs() <= 4.0 * se);
    }

    #[test]
    fn circulant_agrees_with_cholesky_law() {
        let m = model(0.7, 1);
        let n = 8;
        let dt = 0.125;
        let circ = CirculantSampler::new(&m, n, dt).unwrap();
        let grid: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
        let chol = CholeskySampler::new(&m, &grid).unwrap();
        let a: Vec<FbmPath> = map_indexed(20_000, |k| circ.sample(3, k as u64));
        let b: Vec<FbmPath> = map_indexed(20_000, |k| chol.sample(4, k as u64));
        for (i, j) in [(1, 1), (2, 5), (8, 8), (3, 7)] {
            let (ca, sa) = empirical_cov(&a, i, j, 0, 0);
            let (cb, sb) = empirical_cov(&b, i, j, 0, 0);
            let exact = cov_r(&m, grid[i], grid[j]);
            assert!((ca - exact).abs() <= 4.0 * sa, "circ cov({i},{j})");
            assert!((cb - exact).abs() <= 4.0 * sb, "chol cov({i},{j})");
            assert!((ca - cb).abs() <= 4.0 * (sa * sa + sb * sb).sqrt());
        }
    }

    #[test]
    fn increment_variance_h_sweep() {
        for &h in &[0.55, 0.75, 0.95] {
            let m = model(h, 1);
            let n = 16;
            let dt = 1.0 / 16.0;
            let sampler = CirculantSampler::new(&m, n, dt).unwrap();
            let paths: Vec<FbmPath> = map_indexed(20_000, |k| sampler.sample(5, k as u64));
            let sq: Vec<f64> = paths
                .iter()
                .map(|p| (p.at(9)[0] - p.at(8)[0]).powi(2))
                .collect();
            let mean = sq.iter().sum::<f64>() / sq.len() as f64;
            let var = sq.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (sq.len() - 1) as f64;
            let se = (var / sq.len() as f64).sqrt();
            let exact = abs_pow(dt, 2.0 * h);
            assert!(
                (mean - exact).abs() <= 4.0 * se,
                "H={h}: increment var {mean} vs {exact} (se {se})"
            );
        }
    }

    #[test]
    fn seed_replay_is_bit_identical() {
        let m = model(0.8, 2);
        let sampler = CirculantSampler::new(&m, 32, 0.03125).unwrap();
        let a = sampler.sample(9, 5);
        let b = sampler.sample(9, 5);
        assert_eq!(a, b);
        let c = sampler.sample(9, 6);
        assert_ne!(a, c);

        let grid = [0.0, 0.3, 0.9, 1.7];
        let chol = CholeskySampler::new(&m, &grid).unwrap();
        assert_eq!(chol.sample(1, 2), chol.sample(1, 2));
    }

    #[test]
    fn pair_sampler_law_and_replay() {
        let m = model(0.75, 2);
        let p = SimplexPoint::new(0.4, 1.3).unwrap();
        let draws: Vec<PairSample> = sample_pair(&m, p, 40_000, 17).unwrap().collect();
        let prods: Vec<f64> = draws.iter().map(|x| x.bs[0] * x.bt[0]).collect();
        let n = prods.len() as f64;
        let mean = prods.iter().sum::<f64>() / n;
        let var = prods.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        assert!((mean - cov_r(&m, 0.4, 1.3)).abs() <= 4.0 * se);

        let replay: Vec<PairSample> = sample_pair(&m, p, 3, 17).unwrap().collect();
        assert_eq!(&draws[..3], &replay[..]);

        // degenerate pair rejected at the type level
        assert!(SimplexPoint::new(1.0, 1.0 + 1e-13).is_err());
    }

    #[test]
    fn dump_round_trips() {
        let m = model(0.65, 2);
        let path = sample_path_circulant(&m, 16, 0.0625, 23).unwrap();
        let mut buf = Vec::new();
        dump_path(&m, &path, &mut buf).unwrap();
        let (m2, path2) = load_path(buf.as_slice()).unwrap();
        assert_eq!(m2.h(), m.h());
        assert_eq!(path2, path);
    }

    #[test]
    fn cholesky_rejects_bad_grids() {
        let m = model(0.75, 1);
        assert!(CholeskySampler::new(&m, &[0.5, 1.0]).is_err());
        assert!(CholeskySampler::new(&m, &[0.0, 1.0, 0.5]).is_err());
        let big: Vec<f64> = (0..=5000).map(|i| i as f64).collect();
        assert!(matches!(
            CholeskySampler::new(&m, &big),
            Err(Error::GridTooLarge(_, _))
        ));
    }

    #[test]
    fn parallel_sampling_is_schedule_independent() {
        let m = model(0.75, 1);
        let sampler = CirculantSampler::new(&m, 16, 0.0625).unwrap();
        let par: Vec<f64> = map_indexed(64, |k| sampler.sample(2, k as u64).values[16]);
        let seq: Vec<f64> = crate::exec::map_indexed_seq(64, |k| sampler.sample(2, k as u64).values[16]);
        assert_eq!(par, seq);
    }

    #[test]
    fn var_of_terminal_value_matches_relative_tolerance() {
        // tighter (non-statistical) check of the embedding: average 40k
        // paths and ask for 3 digits on Var(B_1)
        let m = model(0.6, 1);
        let n = 32;
        let sampler = CirculantSampler::new(&m, n, 1.0 / n as f64).unwrap();
        let sq: Vec<f64> = map_indexed(40_000, |k| {
            let p = sampler.sample(31, k as u64);
            p.values[n] * p.values[n]
        });
        let mean = sq.iter().sum::<f64>() / sq.len() as f64;
        assert_relative_eq!(mean, 1.0, max_relative = 0.03);
    }
}
