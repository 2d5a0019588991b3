//! User identification.
//!
//! The proposed method projects every despread observation `r_{t,l}` onto
//! the unit steering vector of each candidate angle, takes the per-subframe
//! argmax over pilots as that angle's pattern, and looks the pattern up in
//! the hopping codebook. No detection threshold is involved. The threshold
//! baseline declares a pilot present when `‖r_{t,l}‖` exceeds a threshold
//! and a user active when every pilot of its pattern is present.

use std::fmt;

use num_complex::Complex64;

use crate::airlink::{DespreadSet, HoppingCodebook};
use crate::channel::ArrayGeometry;
use crate::error::{Error, Result};
use crate::linalg::{norm_sqr, CMatrix, CVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Proposed,
    Baseline,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Proposed => "proposed",
            Method::Baseline => "baseline",
        })
    }
}

/// `β_{t,l}^{(k)} = α(φ_k)ᴴ r_{t,l}` for every candidate angle.
#[derive(Debug, Clone)]
pub struct ProjectionTable {
    pub angles: Vec<f64>,
    /// Unit-norm steering vector of each candidate.
    pub steering: Vec<CVector>,
    /// `beta[k][[t, l]]`.
    pub beta: Vec<CMatrix>,
}

impl ProjectionTable {
    pub fn candidates(&self) -> usize {
        self.angles.len()
    }

    pub fn get(&self, k: usize, t: usize, l: usize) -> Complex64 {
        self.beta[k][[t, l]]
    }

    /// Mean `|β|` along a pilot sequence.
    pub fn mean_magnitude(&self, k: usize, pilots: &[usize]) -> f64 {
        let sum: f64 = pilots
            .iter()
            .enumerate()
            .map(|(t, &l)| self.beta[k][[t, l]].norm())
            .sum();
        sum / pilots.len().max(1) as f64
    }
}

pub fn project(despread: &DespreadSet, angles: &[f64], geometry: &ArrayGeometry) -> Result<ProjectionTable> {
    let m = geometry.antennas();
    if despread.subframes() > 0 && despread.antennas() != m {
        return Err(Error::invalid(format!(
            "despread vectors have length {} but the array has {m} antennas",
            despread.antennas()
        )));
    }
    let steering: Vec<CVector> = angles
        .iter()
        .map(|&phi| geometry.normalized_steering(phi, 0.0))
        .collect();
    let k = angles.len();
    let u = despread.subframes();
    let l = despread.pilots();
    let mut a_h = CMatrix::zeros((k, m));
    for (row, s) in steering.iter().enumerate() {
        for i in 0..m {
            a_h[[row, i]] = s[i].conj();
        }
    }
    let mut beta = vec![CMatrix::zeros((u, l)); k];
    for (t, r) in despread.r.iter().enumerate() {
        let proj = a_h.dot(r);
        for (kk, b) in beta.iter_mut().enumerate() {
            b.row_mut(t).assign(&proj.row(kk));
        }
    }
    Ok(ProjectionTable {
        angles: angles.to_vec(),
        steering,
        beta,
    })
}

/// The argmax pattern of one candidate angle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SteeringPattern {
    pub candidate: usize,
    /// `η_t`, 0-based pilot index per subframe.
    pub eta: Vec<usize>,
}

/// `η_t = argmax_l |β_{t,l}^{(k)}|`, ties to the smallest `l`.
pub fn extract_pattern(table: &ProjectionTable, k: usize) -> SteeringPattern {
    let b = &table.beta[k];
    let eta = b
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            let mut best_mag = f64::NEG_INFINITY;
            for (l, z) in row.iter().enumerate() {
                let mag = z.norm_sqr();
                if mag > best_mag {
                    best_mag = mag;
                    best = l;
                }
            }
            best
        })
        .collect();
    SteeringPattern { candidate: k, eta }
}

/// A user declared active.
#[derive(Debug, Clone, PartialEq)]
pub struct UserMatch {
    pub user: usize,
    /// Candidate angle index; `None` for the threshold baseline.
    pub candidate: Option<usize>,
    pub aoa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationReport {
    pub method: Method,
    /// Ordered by candidate (proposed) or user id (baseline).
    pub matches: Vec<UserMatch>,
    pub unmatched_candidates: Vec<usize>,
    /// Two candidates produced the same user's pattern; the one with the
    /// larger mean `|β|` was kept.
    pub duplicate_binding: bool,
    /// Per candidate: smallest Hamming distance from its pattern to any
    /// codeword. Diagnostic only.
    pub hamming: Vec<usize>,
}

impl IdentificationReport {
    pub fn users(&self) -> Vec<usize> {
        let mut u: Vec<usize> = self.matches.iter().map(|m| m.user).collect();
        u.sort_unstable();
        u
    }

    pub fn find(&self, user: usize) -> Option<&UserMatch> {
        self.matches.iter().find(|m| m.user == user)
    }
}

/// Exact full-pattern lookup of each steering pattern in the codebook.
pub fn match_patterns(
    patterns: &[SteeringPattern],
    codebook: &HoppingCodebook,
    table: &ProjectionTable,
) -> IdentificationReport {
    let mut bound: Vec<(usize, usize)> = Vec::new(); // (user, candidate)
    let mut unmatched = Vec::new();
    let mut duplicate = false;
    for p in patterns {
        match codebook.user_for(&p.eta) {
            Some(user) => {
                if let Some(slot) = bound.iter_mut().find(|(u, _)| *u == user) {
                    duplicate = true;
                    let pilots = codebook.pattern(user);
                    let held = table.mean_magnitude(slot.1, pilots);
                    let challenger = table.mean_magnitude(p.candidate, pilots);
                    if challenger > held {
                        unmatched.push(slot.1);
                        slot.1 = p.candidate;
                    } else {
                        unmatched.push(p.candidate);
                    }
                } else {
                    bound.push((user, p.candidate));
                }
            }
            None => unmatched.push(p.candidate),
        }
    }
    bound.sort_by_key(|&(_, k)| k);
    unmatched.sort_unstable();
    let hamming = patterns
        .iter()
        .map(|p| nearest_codeword_distance(&p.eta, codebook))
        .collect();
    IdentificationReport {
        method: Method::Proposed,
        matches: bound
            .into_iter()
            .map(|(user, k)| UserMatch {
                user,
                candidate: Some(k),
                aoa: Some(table.angles[k]),
            })
            .collect(),
        unmatched_candidates: unmatched,
        duplicate_binding: duplicate,
        hamming,
    }
}

fn nearest_codeword_distance(eta: &[usize], codebook: &HoppingCodebook) -> usize {
    codebook
        .patterns()
        .iter()
        .map(|c| c.iter().zip(eta).filter(|(a, b)| a != b).count())
        .min()
        .unwrap_or(eta.len())
}

/// Projection, pattern extraction and matching in one call.
pub fn identify_users(
    despread: &DespreadSet,
    angles: &[f64],
    geometry: &ArrayGeometry,
    codebook: &HoppingCodebook,
) -> Result<(ProjectionTable, Vec<SteeringPattern>, IdentificationReport)> {
    let table = project(despread, angles, geometry)?;
    let patterns: Vec<SteeringPattern> = (0..table.candidates()).map(|k| extract_pattern(&table, k)).collect();
    let report = match_patterns(&patterns, codebook, &table);
    Ok((table, patterns, report))
}

/// `c·√(M σ_w² / (L p_t))`: `c` times the RMS norm of a noise-only
/// despread vector.
pub fn default_threshold(antennas: usize, noise_var: f64, pilot_len: usize, power: f64, scale: f64) -> f64 {
    scale * (antennas as f64 * noise_var / (pilot_len as f64 * power)).sqrt()
}

/// Threshold baseline: pilot `l` is present in subframe `t` iff
/// `‖r_{t,l}‖ > threshold`; a user is active iff all its pilots are present.
pub fn threshold_identify(
    despread: &DespreadSet,
    codebook: &HoppingCodebook,
    threshold: f64,
) -> Result<IdentificationReport> {
    if !(threshold >= 0.0) {
        return Err(Error::invalid(format!("threshold must be >= 0, got {threshold}")));
    }
    if despread.subframes() != codebook.subframes() {
        return Err(Error::invalid(
            "despread set and codebook disagree on the subframe count",
        ));
    }
    let thr2 = threshold * threshold;
    let present: Vec<Vec<bool>> = despread
        .r
        .iter()
        .map(|r| r.columns().into_iter().map(|c| norm_sqr(c) > thr2).collect())
        .collect();
    let matches = codebook
        .patterns()
        .iter()
        .enumerate()
        .filter(|(_, p)| p.iter().enumerate().all(|(t, &l)| present[t][l]))
        .map(|(user, _)| UserMatch {
            user,
            candidate: None,
            aoa: None,
        })
        .collect();
    Ok(IdentificationReport {
        method: Method::Baseline,
        matches,
        unmatched_candidates: Vec::new(),
        duplicate_binding: false,
        hamming: Vec::new(),
    })
}
