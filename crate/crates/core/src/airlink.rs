//! Pilot book, hopping-pattern codebook, uplink frame synthesis and
//! despreading.
//!
//! Pilot indices and pattern entries are 0-based throughout the crate
//! (`0..L`); human-readable dumps print them 1-based.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::{Read, Write};

use ndarray::{s, Array2, ArrayView1};
use num_complex::Complex64;
use rand::Rng;

use crate::channel::{draw_channel, ArrayGeometry, ChannelRealization, UserProfile};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::rng::{complex_normal, stream, Purpose};

/// `L` mutually orthogonal pilots of length `L` (DFT columns).
#[derive(Debug, Clone, PartialEq)]
pub struct PilotBook {
    /// `pilots[[n, k]]` is sample `n` of pilot `k`.
    pilots: CMatrix,
}

impl PilotBook {
    pub fn len(&self) -> usize {
        self.pilots.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.pilots.ncols() == 0
    }

    pub fn pilot(&self, k: usize) -> ArrayView1<'_, Complex64> {
        self.pilots.column(k)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.pilots
    }

    /// Gram matrix `μ_kᴴ μ_j`.
    pub fn gram(&self) -> CMatrix {
        self.pilots.t().mapv(|z| z.conj()).dot(&self.pilots)
    }
}

/// DFT pilots `μ_k[n] = exp(-j2πkn/L)`.
pub fn build_pilot_book(len: usize) -> Result<PilotBook> {
    if len == 0 {
        return Err(Error::invalid("pilot length must be at least 1"));
    }
    let pilots = Array2::from_shape_fn((len, len), |(n, k)| {
        // Reduce kn mod L first so the phase stays small and exact.
        let idx = (k * n) % len;
        Complex64::from_polar(1.0, -2.0 * PI * idx as f64 / len as f64)
    });
    Ok(PilotBook { pilots })
}

/// Injective map from user id to a length-`U` pilot-hopping pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct HoppingCodebook {
    pilot_count: usize,
    subframes: usize,
    patterns: Vec<Vec<usize>>,
    lookup: HashMap<Vec<usize>, usize>,
}

impl HoppingCodebook {
    /// Builds a codebook from explicit patterns; rejects duplicates and
    /// out-of-range entries.
    pub fn from_patterns(pilot_count: usize, subframes: usize, patterns: Vec<Vec<usize>>) -> Result<Self> {
        if pilot_count == 0 || subframes == 0 {
            return Err(Error::invalid("codebook needs L >= 1 and U >= 1"));
        }
        let mut lookup = HashMap::with_capacity(patterns.len());
        for (user, p) in patterns.iter().enumerate() {
            if p.len() != subframes {
                return Err(Error::invalid(format!(
                    "pattern of user {user} has length {} (expected {subframes})",
                    p.len()
                )));
            }
            if let Some(&bad) = p.iter().find(|&&a| a >= pilot_count) {
                return Err(Error::invalid(format!(
                    "pattern of user {user} uses pilot {bad} >= L = {pilot_count}"
                )));
            }
            if let Some(other) = lookup.insert(p.clone(), user) {
                return Err(Error::invalid(format!(
                    "users {other} and {user} share the pattern {p:?}"
                )));
            }
        }
        Ok(HoppingCodebook {
            pilot_count,
            subframes,
            patterns,
            lookup,
        })
    }

    pub fn users(&self) -> usize {
        self.patterns.len()
    }

    pub fn pilot_count(&self) -> usize {
        self.pilot_count
    }

    pub fn subframes(&self) -> usize {
        self.subframes
    }

    pub fn pattern(&self, user: usize) -> &[usize] {
        &self.patterns[user]
    }

    pub fn patterns(&self) -> &[Vec<usize>] {
        &self.patterns
    }

    /// The user owning `pattern`, if any.
    pub fn user_for(&self, pattern: &[usize]) -> Option<usize> {
        self.lookup.get(pattern).copied()
    }
}

/// Number of distinct patterns, `L^U`, saturating at `u128::MAX`.
pub fn pattern_capacity(pilot_count: usize, subframes: usize) -> u128 {
    (pilot_count as u128).checked_pow(subframes as u32).unwrap_or(u128::MAX)
}

/// Assigns `users` distinct patterns. User `i` receives the pattern whose
/// base-`L` index is the `i`-th element of a seeded random permutation of the
/// pattern space (a partial Fisher-Yates shuffle kept sparse in a map).
pub fn build_hopping_codebook(
    users: usize,
    pilot_count: usize,
    subframes: usize,
    seed: u64,
) -> Result<HoppingCodebook> {
    if pilot_count == 0 || subframes == 0 {
        return Err(Error::invalid("codebook needs L >= 1 and U >= 1"));
    }
    let capacity = pattern_capacity(pilot_count, subframes);
    if users as u128 > capacity {
        return Err(Error::CapacityExceeded { users, capacity });
    }
    let mut rng = stream(seed, Purpose::Codebook, &[pilot_count as u64, subframes as u64]);
    let mut swapped: HashMap<u128, u128> = HashMap::with_capacity(2 * users);
    let mut patterns = Vec::with_capacity(users);
    for i in 0..users as u128 {
        let j = rng.random_range(i..capacity);
        let at_j = *swapped.get(&j).unwrap_or(&j);
        let at_i = *swapped.get(&i).unwrap_or(&i);
        swapped.insert(j, at_i);
        swapped.insert(i, at_j);
        patterns.push(decode_pattern(at_j, pilot_count, subframes));
    }
    HoppingCodebook::from_patterns(pilot_count, subframes, patterns)
}

fn decode_pattern(mut index: u128, pilot_count: usize, subframes: usize) -> Vec<usize> {
    let l = pilot_count as u128;
    let mut digits = vec![0usize; subframes];
    for d in digits.iter_mut().rev() {
        *d = (index % l) as usize;
        index /= l;
    }
    digits
}

/// Per-superframe transmission parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameParams {
    pub geometry: ArrayGeometry,
    pub subframes: usize,
    /// Data symbols per subframe (`T_c − L`).
    pub data_len: usize,
    /// σ_w².
    pub noise_var: f64,
    /// p_t, shared by pilot and data phases.
    pub power: f64,
}

/// Everything the base station receives in one superframe, plus the ground
/// truth that produced it.
#[derive(Debug, Clone)]
pub struct SuperframeRealization {
    pub active: Vec<usize>,
    /// `channels[t][g]` for active user `active[g]`.
    pub channels: Vec<Vec<ChannelRealization>>,
    /// `Y_{t,p}`, `M × L` each.
    pub y_pilot: Vec<CMatrix>,
    /// `Y_{t,u}`, `M × data_len` each.
    pub y_data: Vec<CMatrix>,
    /// `X_t`, `G × data_len` 4-QAM symbols.
    pub symbols: Vec<CMatrix>,
    pub noise_pilot: Vec<CMatrix>,
    pub noise_data: Vec<CMatrix>,
    pub noise_var: f64,
    pub power: f64,
}

impl SuperframeRealization {
    pub fn antennas(&self) -> usize {
        self.y_pilot.first().map_or(0, |y| y.nrows())
    }
}

/// Unit-power 4-QAM point for a 2-bit label.
#[inline]
pub fn qam4(bits: u8) -> Complex64 {
    let a = std::f64::consts::FRAC_1_SQRT_2;
    Complex64::new(if bits & 1 == 0 { a } else { -a }, if bits & 2 == 0 { a } else { -a })
}

/// Synthesizes the pilot and data receive matrices of one superframe.
///
/// Random draws come from per-(trial, user, subframe) streams, so the same
/// trial reproduces the same channels and symbols regardless of SNR or κ;
/// noise is drawn at unit variance and scaled, so it is also shared across
/// SNR points.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_superframe(
    population: &[UserProfile],
    active: &[usize],
    codebook: &HoppingCodebook,
    pilots: &PilotBook,
    params: &FrameParams,
    seed: u64,
    trial: u64,
) -> Result<SuperframeRealization> {
    let m = params.geometry.antennas();
    let l = pilots.len();
    if codebook.pilot_count() != l {
        return Err(Error::invalid(format!(
            "codebook uses {} pilots but the pilot book has {l}",
            codebook.pilot_count()
        )));
    }
    if codebook.subframes() != params.subframes {
        return Err(Error::invalid("codebook and frame disagree on the subframe count"));
    }
    if !(params.power > 0.0) || !(params.noise_var >= 0.0) {
        return Err(Error::invalid("power must be > 0 and noise variance >= 0"));
    }
    for (i, &u) in active.iter().enumerate() {
        if u >= population.len() || u >= codebook.users() {
            return Err(Error::invalid(format!("active user {u} is not in the population")));
        }
        if active[..i].contains(&u) {
            return Err(Error::invalid(format!("active user {u} listed twice")));
        }
    }

    let g = active.len();
    let d = params.data_len;
    let sqrt_p = params.power.sqrt();
    let sigma = params.noise_var.sqrt();
    let mut out = SuperframeRealization {
        active: active.to_vec(),
        channels: Vec::with_capacity(params.subframes),
        y_pilot: Vec::with_capacity(params.subframes),
        y_data: Vec::with_capacity(params.subframes),
        symbols: Vec::with_capacity(params.subframes),
        noise_pilot: Vec::with_capacity(params.subframes),
        noise_data: Vec::with_capacity(params.subframes),
        noise_var: params.noise_var,
        power: params.power,
    };

    for t in 0..params.subframes {
        let mut channels = Vec::with_capacity(g);
        let mut h = CMatrix::zeros((m, g));
        let mut x = CMatrix::zeros((g, d));
        let mut y_p = CMatrix::zeros((m, l));
        for (col, &user) in active.iter().enumerate() {
            let mut rng = stream(seed, Purpose::Nlos, &[trial, user as u64, t as u64]);
            let ch = draw_channel(&population[user], &params.geometry, &mut rng);
            h.column_mut(col).assign(&ch.h);
            let mu = pilots.pilot(codebook.pattern(user)[t]);
            for i in 0..m {
                let hi = ch.h[i] * sqrt_p;
                for n in 0..l {
                    y_p[[i, n]] += hi * mu[n];
                }
            }
            let mut rng = stream(seed, Purpose::Symbols, &[trial, user as u64, t as u64]);
            for k in 0..d {
                x[[col, k]] = qam4(rng.random::<u8>() & 3);
            }
            channels.push(ch);
        }
        let mut rng = stream(seed, Purpose::PilotNoise, &[trial, t as u64]);
        let w_p = CMatrix::from_shape_fn((m, l), |_| complex_normal(&mut rng) * sigma);
        let mut rng = stream(seed, Purpose::DataNoise, &[trial, t as u64]);
        let w_d = CMatrix::from_shape_fn((m, d), |_| complex_normal(&mut rng) * sigma);
        y_p += &w_p;
        let y_d = h.dot(&x).mapv(|z| z * sqrt_p) + &w_d;

        out.channels.push(channels);
        out.y_pilot.push(y_p);
        out.y_data.push(y_d);
        out.symbols.push(x);
        out.noise_pilot.push(w_p);
        out.noise_data.push(w_d);
    }
    Ok(out)
}

/// Despread observations; `r[t]` is `M × L` with column `l` equal to `r_{t,l}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DespreadSet {
    pub r: Vec<CMatrix>,
}

impl DespreadSet {
    pub fn subframes(&self) -> usize {
        self.r.len()
    }

    pub fn pilots(&self) -> usize {
        self.r.first().map_or(0, |r| r.ncols())
    }

    pub fn antennas(&self) -> usize {
        self.r.first().map_or(0, |r| r.nrows())
    }

    pub fn get(&self, t: usize, l: usize) -> ArrayView1<'_, Complex64> {
        self.r[t].column(l)
    }
}

/// `r_{t,l} = Y_{t,p} μ_l* / (L √p_t)` for every subframe and pilot.
pub fn despread(y_pilot: &[CMatrix], pilots: &PilotBook, power: f64) -> Result<DespreadSet> {
    if !(power > 0.0) {
        return Err(Error::invalid(format!("transmit power must be > 0, got {power}")));
    }
    let l = pilots.len();
    let conj = pilots.matrix().mapv(|z| z.conj());
    let scale = Complex64::new(1.0 / (l as f64 * power.sqrt()), 0.0);
    let mut r = Vec::with_capacity(y_pilot.len());
    for y in y_pilot {
        if y.ncols() != l {
            return Err(Error::invalid(format!(
                "pilot block has {} columns, pilot length is {l}",
                y.ncols()
            )));
        }
        r.push(y.dot(&conj) * scale);
    }
    Ok(DespreadSet { r })
}

const DUMP_MAGIC: &[u8; 4] = b"MCFD";
const DUMP_VERSION: u32 = 1;

/// Receive-side content of a frame dump.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDump {
    pub noise_var: f64,
    pub power: f64,
    pub y_pilot: Vec<CMatrix>,
    pub y_data: Vec<CMatrix>,
}

/// Writes the received matrices of a superframe.
///
/// Layout, all little-endian:
///
/// ```text
/// offset  size  field
/// 0       4     magic "MCFD"
/// 4       4     u32 version (1)
/// 8       4     u32 M (antennas)
/// 12      4     u32 L (pilot length)
/// 16      4     u32 U (subframes)
/// 20      4     u32 data columns per subframe
/// 24      8     f64 noise variance σ_w²
/// 32      8     f64 transmit power p_t
/// 40      ...   U pilot matrices (M × L), then U data matrices (M × data)
/// ```
///
/// Each matrix is stored antenna-major (row-major), each entry as two f64
/// (real, imaginary).
pub fn write_frame_dump<W: Write>(frame: &SuperframeRealization, mut w: W) -> Result<()> {
    let m = frame.antennas();
    let l = frame.y_pilot.first().map_or(0, |y| y.ncols());
    let d = frame.y_data.first().map_or(0, |y| y.ncols());
    w.write_all(DUMP_MAGIC)?;
    for v in [DUMP_VERSION, m as u32, l as u32, frame.y_pilot.len() as u32, d as u32] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&frame.noise_var.to_le_bytes())?;
    w.write_all(&frame.power.to_le_bytes())?;
    for mat in frame.y_pilot.iter().chain(frame.y_data.iter()) {
        for z in mat.rows().into_iter().flat_map(|row| row.to_vec()) {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_frame_dump<R: Read>(mut r: R) -> Result<FrameDump> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != DUMP_MAGIC {
        return Err(Error::Malformed("not a frame dump (bad magic)".into()));
    }
    let mut word = [0u8; 4];
    let mut header = [0u32; 5];
    for h in header.iter_mut() {
        r.read_exact(&mut word)?;
        *h = u32::from_le_bytes(word);
    }
    let [version, m, l, u, d] = header.map(|x| x as usize);
    if version != DUMP_VERSION as usize {
        return Err(Error::Malformed(format!("unsupported dump version {version}")));
    }
    let read_f64 = |r: &mut R| -> Result<f64> {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    };
    let noise_var = read_f64(&mut r)?;
    let power = read_f64(&mut r)?;
    let read_matrix = |r: &mut R, cols: usize| -> Result<CMatrix> {
        let mut mat = CMatrix::zeros((m, cols));
        for i in 0..m {
            for j in 0..cols {
                let re = read_f64(r)?;
                let im = read_f64(r)?;
                mat[[i, j]] = Complex64::new(re, im);
            }
        }
        Ok(mat)
    };
    let y_pilot = (0..u).map(|_| read_matrix(&mut r, l)).collect::<Result<Vec<_>>>()?;
    let y_data = (0..u).map(|_| read_matrix(&mut r, d)).collect::<Result<Vec<_>>>()?;
    Ok(FrameDump {
        noise_var,
        power,
        y_pilot,
        y_data,
    })
}

/// First `tau` data columns of a subframe.
pub fn data_prefix(y_data: &CMatrix, tau: usize) -> CMatrix {
    y_data.slice(s![.., ..tau.min(y_data.ncols())]).to_owned()
}
