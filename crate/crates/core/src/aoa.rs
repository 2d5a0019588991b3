//! MUSIC angle-of-arrival estimation on a uniform linear array.

use std::f64::consts::PI;

use ndarray::ArrayView2;
use num_complex::Complex64;

use crate::channel::ArrayGeometry;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, CMatrix, HermitianEig};

/// Sample covariance of a set of snapshots.
#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    pub r: CMatrix,
    pub snapshots: usize,
}

/// `R = (1/N) Σ y yᴴ` over every column of every block, symmetrized as
/// `(R + Rᴴ)/2`.
pub fn sample_covariance<'a, I>(blocks: I) -> Result<CovarianceEstimate>
where
    I: IntoIterator<Item = ArrayView2<'a, Complex64>>,
{
    let mut acc: Option<CMatrix> = None;
    let mut snapshots = 0usize;
    for block in blocks {
        if block.ncols() == 0 {
            continue;
        }
        let gram = block.dot(&block.t().mapv(|z| z.conj()));
        match acc.as_mut() {
            Some(a) => {
                if a.nrows() != block.nrows() {
                    return Err(Error::invalid("snapshots have inconsistent lengths"));
                }
                *a += &gram;
            }
            None => acc = Some(gram),
        }
        snapshots += block.ncols();
    }
    let Some(mut r) = acc else {
        return Err(Error::invalid("covariance needs at least one snapshot"));
    };
    let inv = 1.0 / snapshots as f64;
    let n = r.nrows();
    for i in 0..n {
        r[[i, i]] = Complex64::new(r[[i, i]].re * inv, 0.0);
        for j in (i + 1)..n {
            let v = (r[[i, j]] + r[[j, i]].conj()) * (0.5 * inv);
            r[[i, j]] = v;
            r[[j, i]] = v.conj();
        }
    }
    Ok(CovarianceEstimate { r, snapshots })
}

/// Estimated LOS angles and the pseudo-spectrum they were read from.
#[derive(Debug, Clone)]
pub struct AoaEstimate {
    /// Ascending, radians in `[0, π]`.
    pub angles: Vec<f64>,
    /// `P(θ_i)` on the uniform grid `θ_i = iπ/(r−1)`.
    pub spectrum: Vec<f64>,
    pub grid_resolution: usize,
    /// Eigenvalues of the covariance, descending.
    pub eigenvalues: Vec<f64>,
    /// Complex multiply-accumulates spent (eigendecomposition + search).
    pub ops: u64,
}

impl AoaEstimate {
    pub fn grid_step(&self) -> f64 {
        PI / (self.grid_resolution - 1) as f64
    }
}

/// Largest ratio `λ_k/λ_{k+1}` for `k` in `1..=max_sources`.
pub fn estimate_source_count(eigenvalues: &[f64], max_sources: usize) -> usize {
    let floor = eigenvalues.first().copied().unwrap_or(0.0).abs() * 1e-14 + f64::MIN_POSITIVE;
    let upto = max_sources.min(eigenvalues.len().saturating_sub(1));
    let mut best = (1usize, f64::NEG_INFINITY);
    for k in 1..=upto {
        let ratio = eigenvalues[k - 1].max(floor) / eigenvalues[k].max(floor);
        if ratio > best.1 {
            best = (k, ratio);
        }
    }
    best.0.max(1).min(upto.max(1))
}

/// MUSIC on a covariance matrix: eigendecompose, then search.
pub fn music_spectrum(
    cov: &CovarianceEstimate,
    geometry: &ArrayGeometry,
    sources: usize,
    grid_resolution: usize,
) -> Result<AoaEstimate> {
    let eig = hermitian_eig(cov.r.view())?;
    music_from_eig(&eig, geometry, sources, grid_resolution)
}

/// MUSIC search given an eigendecomposition of the covariance. The noise
/// subspace is spanned by the eigenvectors past the first `sources`.
pub fn music_from_eig(
    eig: &HermitianEig,
    geometry: &ArrayGeometry,
    sources: usize,
    grid_resolution: usize,
) -> Result<AoaEstimate> {
    let ArrayGeometry::Ula { antennas: m, spacing } = *geometry else {
        return Err(Error::invalid("MUSIC search supports ULA geometries only"));
    };
    if eig.vectors.nrows() != m {
        return Err(Error::invalid(format!(
            "covariance is {}x{} but the array has {m} antennas",
            eig.vectors.nrows(),
            eig.vectors.nrows()
        )));
    }
    if sources == 0 || sources >= m {
        return Err(Error::invalid(format!(
            "MUSIC needs 1 <= sources < M, got {sources} sources for M = {m}"
        )));
    }
    if grid_resolution < 2 {
        return Err(Error::invalid("MUSIC grid needs at least 2 points"));
    }

    let ps = PseudoSpectrum::new(eig, m, spacing, sources);
    let step = PI / (grid_resolution - 1) as f64;
    let spectrum: Vec<f64> = (0..grid_resolution).map(|i| ps.eval(i as f64 * step)).collect();

    let picks = pick_peaks(&spectrum, sources);
    let mut angles: Vec<f64> = picks
        .into_iter()
        .map(|i| (refine(&spectrum, i) * step).clamp(0.0, PI))
        .collect();
    angles.sort_by(f64::total_cmp);

    let search_ops = (grid_resolution * ps.eval_ops() + ps.setup_ops(sources)) as u64;
    let eig_ops = eig.ops;
    Ok(AoaEstimate {
        angles,
        spectrum,
        grid_resolution,
        eigenvalues: eig.values.clone(),
        ops: search_ops + eig_ops,
    })
}

/// `P(θ) = 1/‖E_nᴴ α(θ)‖²` for a fixed eigendecomposition.
///
/// With `Π` the projector onto the smaller of the signal and noise
/// subspaces, `αᴴΠα = (1/M)(c₀ + 2 Re Σ_{d≥1} c_d e^{-jψd})` where `c_d` is
/// the sum of the `d`-th subdiagonal of `Π` and `ψ = 2π(d/λ)cos θ`, so each
/// grid point costs `O(M)`.
#[derive(Debug, Clone)]
pub struct PseudoSpectrum {
    antennas: usize,
    spacing: f64,
    use_signal: bool,
    /// Diagonal sums `c_d`, `d = 0..M`.
    coeffs: Vec<Complex64>,
}

impl PseudoSpectrum {
    /// `eig` must come from an `antennas × antennas` covariance and
    /// `0 < sources < antennas`.
    pub fn new(eig: &HermitianEig, antennas: usize, spacing: f64, sources: usize) -> Self {
        let m = antennas;
        let use_signal = sources < m - sources;
        let basis: Vec<usize> = if use_signal {
            (0..sources).collect()
        } else {
            (sources..m).collect()
        };
        let mut coeffs = vec![Complex64::new(0.0, 0.0); m];
        for &k in &basis {
            let e = eig.vectors.column(k);
            for d in 0..m {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in d..m {
                    acc += e[i] * e[i - d].conj();
                }
                coeffs[d] += acc;
            }
        }
        PseudoSpectrum {
            antennas,
            spacing,
            use_signal,
            coeffs,
        }
    }

    /// Multiplications per spectrum evaluation.
    fn eval_ops(&self) -> usize {
        2 * self.antennas
    }

    /// Multiplications spent building the coefficients.
    fn setup_ops(&self, sources: usize) -> usize {
        let m = self.antennas;
        sources.min(m - sources) * m * (m + 1) / 2
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let m = self.antennas;
        let psi = -2.0 * PI * self.spacing * theta.cos();
        let rot = Complex64::from_polar(1.0, -psi);
        let mut z = rot;
        let mut acc = 0.0;
        for c in &self.coeffs[1..] {
            acc += c.re * z.re - c.im * z.im;
            z *= rot;
        }
        let proj = (self.coeffs[0].re + 2.0 * acc) / m as f64;
        let denom = if self.use_signal { 1.0 - proj } else { proj };
        1.0 / denom.max(1e-18)
    }
}

/// Indices of the `count` largest strict local maxima, at least two grid
/// steps apart; topped up from the global ordering when there are too few.
fn pick_peaks(p: &[f64], count: usize) -> Vec<usize> {
    let n = p.len();
    let is_peak = |i: usize| {
        let left = i == 0 || p[i] > p[i - 1];
        let right = i + 1 == n || p[i] > p[i + 1];
        left && right
    };
    let by_height = |a: &usize, b: &usize| p[*b].total_cmp(&p[*a]).then(a.cmp(b));

    let mut peaks: Vec<usize> = (0..n).filter(|&i| is_peak(i)).collect();
    peaks.sort_by(by_height);
    let mut chosen: Vec<usize> = Vec::with_capacity(count);
    let far = |chosen: &[usize], i: usize| chosen.iter().all(|&c| c.abs_diff(i) >= 2);
    for i in peaks {
        if chosen.len() == count {
            break;
        }
        if far(&chosen, i) {
            chosen.push(i);
        }
    }
    if chosen.len() < count {
        let mut all: Vec<usize> = (0..n).collect();
        all.sort_by(by_height);
        for i in all {
            if chosen.len() == count {
                break;
            }
            if far(&chosen, i) {
                chosen.push(i);
            }
        }
    }
    chosen
}

/// Fractional grid index after one parabolic step on `ln P`.
fn refine(p: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 == p.len() {
        return i as f64;
    }
    let (a, b, c) = (p[i - 1].ln(), p[i].ln(), p[i + 1].ln());
    let curv = a - 2.0 * b + c;
    if !(curv < 0.0) {
        return i as f64;
    }
    let delta = (0.5 * (a - c) / curv).clamp(-0.5, 0.5);
    i as f64 + delta
}
