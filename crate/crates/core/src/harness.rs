//! Deterministic Monte Carlo sweeps.
//!
//! A sweep is the cartesian product of the list-valued config keys. Every
//! trial of every sweep point is a pure function of `(config, seed, trial)`:
//! the population, active set, channels, symbols and noise come from
//! counter-based streams, so results do not depend on the worker count and
//! all methods at a sweep point see identical realizations.

use std::cmp::Ordering;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::airlink::{
    build_hopping_codebook, build_pilot_book, despread, synthesize_superframe, FrameParams, HoppingCodebook, PilotBook,
    SuperframeRealization,
};
use crate::aoa::{estimate_source_count, music_from_eig, sample_covariance};
use crate::channel::{ArrayGeometry, UserProfile};
use crate::config::{AoaMode, ExperimentConfig, SourceCount};
use crate::error::{Error, Result};
use crate::estimate::{los_estimate, nmse, update_subframe, LosEstimate};
use crate::identify::{
    default_threshold, identify_users, threshold_identify, IdentificationReport, Method, ProjectionTable,
    SteeringPattern,
};
use crate::linalg::hermitian_eig;
use crate::rng::{stream, Purpose};

/// Transmit power per user; SNR is set through the noise variance.
pub const POWER: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub snr_db: f64,
    pub kappa: f64,
    pub antennas: usize,
    pub pilot_len: usize,
    pub active: usize,
}

impl SweepPoint {
    /// `σ² = p / 10^(SNR/10)`; zero for an infinite SNR.
    pub fn noise_var(&self) -> f64 {
        if self.snr_db == f64::INFINITY {
            0.0
        } else {
            POWER * 10f64.powf(-self.snr_db / 10.0)
        }
    }
}

/// Sweep points ordered by M, L, G, κ, then SNR.
pub fn sweep_points(cfg: &ExperimentConfig) -> Vec<SweepPoint> {
    let mut out = Vec::new();
    for &antennas in &cfg.antennas {
        for &pilot_len in &cfg.pilot_len {
            for &active in &cfg.active {
                for &kappa in &cfg.kappa {
                    for &snr_db in &cfg.snr_db {
                        out.push(SweepPoint {
                            snr_db,
                            kappa,
                            antennas,
                            pilot_len,
                            active,
                        });
                    }
                }
            }
        }
    }
    out
}

/// Which method and variant a row of results describes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodLabel {
    pub method: Method,
    pub aoa_mode: Option<AoaMode>,
    pub threshold_scale: Option<f64>,
}

/// Rows produced per sweep point, in output order.
pub fn method_labels(cfg: &ExperimentConfig) -> Vec<MethodLabel> {
    let mut out = Vec::new();
    for &method in &cfg.methods {
        match method {
            Method::Proposed => out.extend(cfg.aoa_modes.iter().map(|&m| MethodLabel {
                method,
                aoa_mode: Some(m),
                threshold_scale: None,
            })),
            Method::Baseline => out.extend(cfg.threshold_scale.iter().map(|&c| MethodLabel {
                method,
                aoa_mode: None,
                threshold_scale: Some(c),
            })),
        }
    }
    out
}

impl MethodLabel {
    pub fn method_name(&self, cfg: &ExperimentConfig) -> String {
        match (self.method, self.threshold_scale) {
            (Method::Baseline, Some(c)) if cfg.threshold_scale.len() > 1 => format!("baseline(c={c})"),
            (m, _) => m.to_string(),
        }
    }

    pub fn aoa_name(&self) -> &'static str {
        self.aoa_mode.map_or("na", |m| m.as_str())
    }
}

/// Everything fixed across the trials of one sweep point.
#[derive(Debug, Clone)]
pub struct PointContext {
    pub point: SweepPoint,
    pub geometry: ArrayGeometry,
    pub codebook: HoppingCodebook,
    pub pilots: PilotBook,
}

impl PointContext {
    pub fn new(cfg: &ExperimentConfig, point: SweepPoint) -> Result<Self> {
        Ok(PointContext {
            point,
            geometry: ArrayGeometry::ula(point.antennas, cfg.spacing)?,
            codebook: build_hopping_codebook(cfg.users, point.pilot_len, cfg.subframes, cfg.seed)?,
            pilots: build_pilot_book(point.pilot_len)?,
        })
    }
}

/// K users with `g ~ U[gain_min, gain_max]`, `θ ~ U[0, π]` and a common κ.
/// Gains and angles depend only on `(seed, trial)`, so sweeps over κ are
/// paired.
pub fn generate_population(cfg: &ExperimentConfig, kappa: f64, seed: u64, trial: u64) -> Result<Vec<UserProfile>> {
    let mut rng = stream(seed, Purpose::Population, &[trial]);
    (0..cfg.users)
        .map(|u| {
            let gain = if cfg.gain_max > cfg.gain_min {
                rng.random_range(cfg.gain_min..=cfg.gain_max)
            } else {
                cfg.gain_min
            };
            let theta = rng.random_range(0.0..=std::f64::consts::PI);
            UserProfile::new(u, gain, kappa, theta)
        })
        .collect()
}

/// Distance between two AOAs in `cos θ`, wrapped to the period `1/spacing`
/// of the ULA response.
pub fn cos_distance(a: f64, b: f64, spacing: f64) -> f64 {
    let period = 1.0 / spacing;
    let d = (a.cos() - b.cos()).abs() % period;
    d.min(period - d)
}

/// G distinct users drawn uniformly, rejecting users within `min_cos_gap`
/// (see [`cos_distance`]) of an already accepted user. Returned sorted.
pub fn draw_active_set(
    cfg: &ExperimentConfig,
    count: usize,
    population: &[UserProfile],
    seed: u64,
    trial: u64,
) -> Result<Vec<usize>> {
    if let Some(fixed) = &cfg.active_users {
        let mut v = fixed.clone();
        v.sort_unstable();
        return Ok(v);
    }
    let mut order: Vec<usize> = (0..population.len()).collect();
    let mut rng = stream(seed, Purpose::ActiveSet, &[trial]);
    order.shuffle(&mut rng);
    let mut chosen: Vec<usize> = Vec::with_capacity(count);
    for u in order {
        let theta = population[u].theta;
        if chosen
            .iter()
            .all(|&v| cos_distance(population[v].theta, theta, cfg.spacing) >= cfg.min_cos_gap)
        {
            chosen.push(u);
            if chosen.len() == count {
                chosen.sort_unstable();
                return Ok(chosen);
            }
        }
    }
    Err(Error::invalid(format!(
        "could not draw {count} active users with cos gap {}",
        cfg.min_cos_gap
    )))
}

/// Two or more active users on the same pilot in one subframe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Collision {
    pub subframe: usize,
    pub pilot: usize,
    pub users: Vec<usize>,
}

pub fn pilot_collisions(codebook: &HoppingCodebook, active: &[usize]) -> Vec<Collision> {
    let mut out = Vec::new();
    for t in 0..codebook.subframes() {
        for l in 0..codebook.pilot_count() {
            let users: Vec<usize> = active
                .iter()
                .copied()
                .filter(|&u| codebook.pattern(u)[t] == l)
                .collect();
            if users.len() > 1 {
                out.push(Collision {
                    subframe: t,
                    pilot: l,
                    users,
                });
            }
        }
    }
    out
}

/// A codebook match together with its ground-truth verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct Binding {
    pub user: usize,
    pub candidate: Option<usize>,
    pub aoa: Option<f64>,
    /// Active user whose LOS angle is closest in `cos θ` to the bound angle.
    pub nearest_active: Option<usize>,
    pub correct: bool,
}

/// Per-subframe NMSE of one correctly identified user.
#[derive(Debug, Clone, PartialEq)]
pub struct UserNmse {
    pub user: usize,
    pub los: Vec<f64>,
    pub updated: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ProposedDetail {
    pub aoa_mode: AoaMode,
    pub angles: Vec<f64>,
    pub patterns: Vec<SteeringPattern>,
    pub report: Option<IdentificationReport>,
    pub bindings: Vec<Binding>,
    pub nmse: Vec<UserNmse>,
    /// Stage errors met in this trial (AOA, identification or estimation).
    pub errors: Vec<String>,
    pub ops_aoa: u64,
    pub ops_match: u64,
    pub ops_mmse: u64,
}

#[derive(Debug, Clone)]
pub struct BaselineDetail {
    pub scale: f64,
    pub threshold: f64,
    pub report: Option<IdentificationReport>,
    pub bindings: Vec<Binding>,
    pub errors: Vec<String>,
    pub ops_match: u64,
}

/// Full record of one trial; summarized by [`summarize`].
#[derive(Debug, Clone)]
pub struct TrialDetail {
    pub trial: u64,
    pub point: SweepPoint,
    pub active: Vec<usize>,
    /// Profiles of the active users, in `active` order.
    pub profiles: Vec<UserProfile>,
    pub collisions: Vec<Collision>,
    pub proposed: Vec<ProposedDetail>,
    pub baseline: Vec<BaselineDetail>,
    pub frame: Option<SuperframeRealization>,
}

fn nearest_active(phi: f64, active: &[usize], population: &[UserProfile], spacing: f64) -> Option<usize> {
    active.iter().copied().min_by(|&a, &b| {
        let da = cos_distance(population[a].theta, phi, spacing);
        let db = cos_distance(population[b].theta, phi, spacing);
        da.partial_cmp(&db).unwrap_or(Ordering::Equal).then(a.cmp(&b))
    })
}

fn judge(report: &IdentificationReport, active: &[usize], population: &[UserProfile], spacing: f64) -> Vec<Binding> {
    report
        .matches
        .iter()
        .map(|m| {
            let (nearest, correct) = match m.aoa {
                Some(phi) => {
                    let n = nearest_active(phi, active, population, spacing);
                    (n, n == Some(m.user))
                }
                None => (None, active.contains(&m.user)),
            };
            Binding {
                user: m.user,
                candidate: m.candidate,
                aoa: m.aoa,
                nearest_active: nearest,
                correct,
            }
        })
        .collect()
}

fn estimated_angles(
    cfg: &ExperimentConfig,
    ctx: &PointContext,
    frame: &SuperframeRealization,
) -> Result<(Vec<f64>, u64)> {
    let blocks = frame.y_pilot.iter().chain(frame.y_data.iter()).map(|b| b.view());
    let cov = sample_covariance(blocks)?;
    let m = ctx.point.antennas;
    let eig = hermitian_eig(cov.r.view())?;
    let sources = match cfg.source_count {
        SourceCount::Known => ctx.point.active,
        SourceCount::EigenGap => estimate_source_count(&eig.values, m - 1),
    };
    let est = music_from_eig(&eig, &ctx.geometry, sources, cfg.grid)?;
    let cov_ops = (m * m * cov.snapshots) as u64;
    Ok((est.angles, est.ops + cov_ops))
}

#[allow(clippy::too_many_arguments)]
fn estimate_channels(
    cfg: &ExperimentConfig,
    ctx: &PointContext,
    frame: &SuperframeRealization,
    population: &[UserProfile],
    table: &ProjectionTable,
    report: &IdentificationReport,
    bindings: &[Binding],
    errors: &mut Vec<String>,
) -> (Vec<UserNmse>, u64) {
    let mut los: Vec<LosEstimate> = Vec::new();
    for m in &report.matches {
        match los_estimate(table, report, &ctx.codebook, m.user) {
            Ok(e) => los.push(e),
            Err(e) => errors.push(e.to_string()),
        }
    }
    let scored: Vec<(usize, usize, usize)> = bindings
        .iter()
        .filter(|b| b.correct)
        .filter_map(|b| {
            let col = los.iter().position(|e| e.user == b.user)?;
            let idx = frame.active.iter().position(|&u| u == b.user)?;
            Some((b.user, col, idx))
        })
        .collect();
    let mut out: Vec<UserNmse> = scored
        .iter()
        .map(|&(user, _, _)| UserNmse {
            user,
            los: Vec::with_capacity(cfg.subframes),
            updated: Vec::with_capacity(cfg.subframes),
        })
        .collect();
    if los.is_empty() {
        return (out, 0);
    }
    let vars: Vec<f64> = los.iter().map(|e| population[e.user].nlos_variance()).collect();
    let (m, g, tau) = (ctx.point.antennas as u64, los.len() as u64, cfg.tau as u64);
    let per_subframe = 3 * m * g * tau + g * g * tau + g * g * g + 2 * m * g * g;
    let mut ops = 0u64;
    for t in 0..cfg.subframes {
        let upd = update_subframe(
            &frame.y_data[t],
            &los,
            cfg.tau,
            frame.power,
            frame.noise_var,
            cfg.detection,
            cfg.rv_mode,
            &vars,
        );
        ops += per_subframe;
        if let Err(e) = &upd {
            errors.push(format!("subframe {t}: {e}"));
        }
        for (rec, &(_, col, idx)) in out.iter_mut().zip(&scored) {
            let h = &frame.channels[t][idx].h;
            rec.los.push(nmse(&los[col].h_bar_hat, h).unwrap_or(1.0));
            let u = match &upd {
                Ok(u) => nmse(&u.updated.column(col).to_owned(), h).unwrap_or(1.0),
                Err(_) => 1.0,
            };
            rec.updated.push(u);
        }
    }
    (out, ops)
}

/// Runs one trial of one sweep point and keeps every intermediate result.
pub fn evaluate_trial(cfg: &ExperimentConfig, ctx: &PointContext, trial: u64, keep_frame: bool) -> Result<TrialDetail> {
    let point = ctx.point;
    let population = generate_population(cfg, point.kappa, cfg.seed, trial)?;
    let active = draw_active_set(cfg, point.active, &population, cfg.seed, trial)?;
    let params = FrameParams {
        geometry: ctx.geometry,
        subframes: cfg.subframes,
        data_len: cfg.coherence_len - point.pilot_len,
        noise_var: point.noise_var(),
        power: POWER,
    };
    let frame = synthesize_superframe(
        &population,
        &active,
        &ctx.codebook,
        &ctx.pilots,
        &params,
        cfg.seed,
        trial,
    )?;
    let r = despread(&frame.y_pilot, &ctx.pilots, POWER)?;
    let (u, l, m) = (cfg.subframes as u64, point.pilot_len as u64, point.antennas as u64);

    let mut proposed = Vec::new();
    let mut baseline = Vec::new();
    for label in method_labels(cfg) {
        match label.method {
            Method::Proposed => {
                let mode = label.aoa_mode.unwrap_or(AoaMode::Estimated);
                let mut errors = Vec::new();
                let (angles, ops_aoa) = match mode {
                    AoaMode::Genie => {
                        let mut a: Vec<f64> = active.iter().map(|&u| population[u].theta).collect();
                        a.sort_by(f64::total_cmp);
                        (a, 0)
                    }
                    AoaMode::Estimated => estimated_angles(cfg, ctx, &frame).unwrap_or_else(|e| {
                        errors.push(format!("AOA: {e}"));
                        (Vec::new(), 0)
                    }),
                };
                let k = angles.len() as u64;
                let ops_match = u * l * k * m + u * l * k;
                let mut detail = ProposedDetail {
                    aoa_mode: mode,
                    angles: angles.clone(),
                    patterns: Vec::new(),
                    report: None,
                    bindings: Vec::new(),
                    nmse: Vec::new(),
                    errors: Vec::new(),
                    ops_aoa,
                    ops_match,
                    ops_mmse: 0,
                };
                match identify_users(&r, &angles, &ctx.geometry, &ctx.codebook) {
                    Ok((table, patterns, report)) => {
                        let bindings = judge(&report, &active, &population, cfg.spacing);
                        let (nm, ops) =
                            estimate_channels(cfg, ctx, &frame, &population, &table, &report, &bindings, &mut errors);
                        detail.patterns = patterns;
                        detail.bindings = bindings;
                        detail.report = Some(report);
                        detail.nmse = nm;
                        detail.ops_mmse = ops;
                    }
                    Err(e) => errors.push(format!("identify: {e}")),
                }
                detail.errors = errors;
                proposed.push(detail);
            }
            Method::Baseline => {
                let scale = label.threshold_scale.unwrap_or(3.0);
                let threshold = default_threshold(point.antennas, params.noise_var, point.pilot_len, POWER, scale);
                let ops_match = u * l * m + cfg.users as u64 * u;
                let (report, bindings, errors) = match threshold_identify(&r, &ctx.codebook, threshold) {
                    Ok(rep) => {
                        let b = judge(&rep, &active, &population, cfg.spacing);
                        (Some(rep), b, Vec::new())
                    }
                    Err(e) => (None, Vec::new(), vec![format!("baseline: {e}")]),
                };
                baseline.push(BaselineDetail {
                    scale,
                    threshold,
                    report,
                    bindings,
                    errors,
                    ops_match,
                });
            }
        }
    }

    Ok(TrialDetail {
        trial,
        point,
        profiles: active.iter().map(|&u| population[u]).collect(),
        collisions: pilot_collisions(&ctx.codebook, &active),
        active,
        proposed,
        baseline,
        frame: keep_frame.then_some(frame),
    })
}

/// Per-method summary of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub label: MethodLabel,
    pub active: usize,
    pub correct: usize,
    pub false_alarms: usize,
    pub exact: bool,
    pub duplicate: bool,
    pub failures: usize,
    /// NMSE sums over (subframe, correctly identified user).
    pub nmse_los_sum: f64,
    pub nmse_upd_sum: f64,
    pub nmse_count: usize,
    /// Same over every active user, a missed user counting as NMSE 1.
    pub nmse_los_all_sum: f64,
    pub nmse_upd_all_sum: f64,
    pub nmse_all_count: usize,
    pub ops_aoa: u64,
    pub ops_match: u64,
    pub ops_mmse: u64,
}

impl MethodOutcome {
    fn failed(label: MethodLabel, active: usize, subframes: usize) -> Self {
        let n = active * subframes;
        MethodOutcome {
            label,
            active,
            correct: 0,
            false_alarms: 0,
            exact: false,
            duplicate: false,
            failures: 1,
            nmse_los_sum: 0.0,
            nmse_upd_sum: 0.0,
            nmse_count: 0,
            nmse_los_all_sum: n as f64,
            nmse_upd_all_sum: n as f64,
            nmse_all_count: n,
            ops_aoa: 0,
            ops_match: 0,
            ops_mmse: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial: u64,
    pub methods: Vec<MethodOutcome>,
}

fn count_bindings(bindings: &[Binding], active: usize) -> (usize, usize, bool) {
    let correct = bindings.iter().filter(|b| b.correct).count();
    let false_alarms = bindings.len() - correct;
    (correct, false_alarms, correct == active && false_alarms == 0)
}

pub fn summarize(cfg: &ExperimentConfig, detail: &TrialDetail) -> TrialOutcome {
    let g = detail.active.len();
    let total = g * cfg.subframes;
    let mut methods = Vec::new();
    let mut prop = detail.proposed.iter();
    let mut base = detail.baseline.iter();
    for label in method_labels(cfg) {
        let outcome = match label.method {
            Method::Proposed => {
                let d = prop.next().expect("one proposed detail per label");
                let (correct, false_alarms, exact) = count_bindings(&d.bindings, g);
                let los: f64 = d.nmse.iter().flat_map(|n| &n.los).sum();
                let upd: f64 = d.nmse.iter().flat_map(|n| &n.updated).sum();
                let count: usize = d.nmse.iter().map(|n| n.los.len()).sum();
                let missing = (total - count) as f64;
                MethodOutcome {
                    label,
                    active: g,
                    correct,
                    false_alarms,
                    exact,
                    duplicate: d.report.as_ref().is_some_and(|r| r.duplicate_binding),
                    failures: d.errors.len(),
                    nmse_los_sum: los,
                    nmse_upd_sum: upd,
                    nmse_count: count,
                    nmse_los_all_sum: los + missing,
                    nmse_upd_all_sum: upd + missing,
                    nmse_all_count: total,
                    ops_aoa: d.ops_aoa,
                    ops_match: d.ops_match,
                    ops_mmse: d.ops_mmse,
                }
            }
            Method::Baseline => {
                let d = base.next().expect("one baseline detail per label");
                let (correct, false_alarms, exact) = count_bindings(&d.bindings, g);
                MethodOutcome {
                    label,
                    active: g,
                    correct,
                    false_alarms,
                    exact,
                    duplicate: false,
                    failures: d.errors.len(),
                    nmse_los_sum: 0.0,
                    nmse_upd_sum: 0.0,
                    nmse_count: 0,
                    nmse_los_all_sum: 0.0,
                    nmse_upd_all_sum: 0.0,
                    nmse_all_count: 0,
                    ops_aoa: 0,
                    ops_match: d.ops_match,
                    ops_mmse: 0,
                }
            }
        };
        methods.push(outcome);
    }
    TrialOutcome {
        trial: detail.trial,
        methods,
    }
}

/// Runs and summarizes one trial. Stage failures are folded into the
/// outcome as worst-case values.
pub fn run_trial(cfg: &ExperimentConfig, ctx: &PointContext, trial: u64) -> TrialOutcome {
    match evaluate_trial(cfg, ctx, trial, false) {
        Ok(d) => summarize(cfg, &d),
        Err(_) => TrialOutcome {
            trial,
            methods: method_labels(cfg)
                .into_iter()
                .map(|l| MethodOutcome::failed(l, ctx.point.active, cfg.subframes))
                .collect(),
        },
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub point: SweepPoint,
    pub subframes: usize,
    pub tau: usize,
    pub label: MethodLabel,
    pub method: String,
    pub trials: usize,
    pub id_acc_mean: f64,
    pub id_acc_se: f64,
    pub exact_set_rate: f64,
    /// Over correctly identified users; NaN when there are none.
    pub nmse_los_mean: f64,
    pub nmse_upd_mean: f64,
    /// Over all active users with misses counted as 1.
    pub nmse_los_all: f64,
    pub nmse_upd_all: f64,
    pub false_alarms_per_trial: f64,
    pub duplicate_rate: f64,
    pub failures: usize,
    pub ops_aoa: u64,
    pub ops_match: u64,
    pub ops_mmse: u64,
}

/// Mean and standard error (sample standard deviation over `√n`).
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn ratio(num: f64, den: usize) -> f64 {
    if den == 0 {
        f64::NAN
    } else {
        num / den as f64
    }
}

/// Folds the trials of one sweep point, in the order given, into one
/// record per method label.
pub fn aggregate(cfg: &ExperimentConfig, point: SweepPoint, trials: &[TrialOutcome]) -> Vec<MetricRecord> {
    method_labels(cfg)
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let rows: Vec<&MethodOutcome> = trials.iter().map(|t| &t.methods[i]).collect();
            let acc: Vec<f64> = rows.iter().map(|o| o.correct as f64 / o.active.max(1) as f64).collect();
            let (id_acc_mean, id_acc_se) = mean_se(&acc);
            let n = rows.len();
            let sum = |f: fn(&MethodOutcome) -> f64| rows.iter().map(|o| f(o)).sum::<f64>();
            let count = |f: fn(&MethodOutcome) -> usize| rows.iter().map(|o| f(o)).sum::<usize>();
            let nmse_count = count(|o| o.nmse_count);
            let all_count = count(|o| o.nmse_all_count);
            MetricRecord {
                point,
                subframes: cfg.subframes,
                tau: cfg.tau,
                label,
                method: label.method_name(cfg),
                trials: n,
                id_acc_mean,
                id_acc_se,
                exact_set_rate: ratio(sum(|o| f64::from(u8::from(o.exact))), n),
                nmse_los_mean: ratio(sum(|o| o.nmse_los_sum), nmse_count),
                nmse_upd_mean: ratio(sum(|o| o.nmse_upd_sum), nmse_count),
                nmse_los_all: ratio(sum(|o| o.nmse_los_all_sum), all_count),
                nmse_upd_all: ratio(sum(|o| o.nmse_upd_all_sum), all_count),
                false_alarms_per_trial: ratio(sum(|o| o.false_alarms as f64), n),
                duplicate_rate: ratio(sum(|o| f64::from(u8::from(o.duplicate))), n),
                failures: count(|o| o.failures),
                ops_aoa: rows.iter().map(|o| o.ops_aoa).sum(),
                ops_match: rows.iter().map(|o| o.ops_match).sum(),
                ops_mmse: rows.iter().map(|o| o.ops_mmse).sum(),
            }
        })
        .collect()
}

/// Runs every sweep point on a pool of `threads` workers.
pub fn run_sweep(cfg: &ExperimentConfig, threads: usize) -> Result<Vec<MetricRecord>> {
    cfg.validate()?;
    let contexts: Vec<PointContext> = sweep_points(cfg)
        .into_iter()
        .map(|p| PointContext::new(cfg, p))
        .collect::<Result<_>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let trials = cfg.trials;
    let outcomes: Vec<TrialOutcome> = pool.install(|| {
        (0..contexts.len() * trials)
            .into_par_iter()
            .map(|i| run_trial(cfg, &contexts[i / trials], (i % trials) as u64))
            .collect()
    });
    Ok(contexts
        .iter()
        .zip(outcomes.chunks(trials))
        .flat_map(|(ctx, chunk)| aggregate(cfg, ctx.point, chunk))
        .collect())
}

/// Column order of the results CSV.
pub const CSV_HEADER: [&str; 20] = [
    "snr_db",
    "kappa",
    "M",
    "L",
    "G",
    "U",
    "tau",
    "method",
    "aoa_mode",
    "trials",
    "id_acc_mean",
    "id_acc_se",
    "exact_set_rate",
    "nmse_los_mean",
    "nmse_upd_mean",
    "nmse_los_db",
    "nmse_upd_db",
    "ops_aoa",
    "ops_match",
    "ops_mmse",
];

/// Column order of the companion CSV with secondary metrics.
pub const EXTRA_HEADER: [&str; 14] = [
    "snr_db",
    "kappa",
    "M",
    "L",
    "G",
    "method",
    "aoa_mode",
    "trials",
    "nmse_los_all",
    "nmse_upd_all",
    "nmse_los_all_db",
    "nmse_upd_all_db",
    "false_alarms_per_trial",
    "duplicate_rate",
];

/// Shortest text that parses back to the same value.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else if x != 0.0 && (x.abs() < 1e-4 || x.abs() >= 1e15) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn point_fields(r: &MetricRecord) -> [String; 5] {
    [
        fmt_f64(r.point.snr_db),
        fmt_f64(r.point.kappa),
        r.point.antennas.to_string(),
        r.point.pilot_len.to_string(),
        r.point.active.to_string(),
    ]
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

pub fn write_csv<W: Write>(records: &[MetricRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in records {
        let [snr, kappa, m, l, g] = point_fields(r);
        out.write_record([
            snr,
            kappa,
            m,
            l,
            g,
            r.subframes.to_string(),
            r.tau.to_string(),
            r.method.clone(),
            r.label.aoa_name().to_string(),
            r.trials.to_string(),
            fmt_f64(r.id_acc_mean),
            fmt_f64(r.id_acc_se),
            fmt_f64(r.exact_set_rate),
            fmt_f64(r.nmse_los_mean),
            fmt_f64(r.nmse_upd_mean),
            fmt_f64(to_db(r.nmse_los_mean)),
            fmt_f64(to_db(r.nmse_upd_mean)),
            r.ops_aoa.to_string(),
            r.ops_match.to_string(),
            r.ops_mmse.to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_extra_csv<W: Write>(records: &[MetricRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(EXTRA_HEADER).map_err(csv_err)?;
    for r in records {
        let [snr, kappa, m, l, g] = point_fields(r);
        out.write_record([
            snr,
            kappa,
            m,
            l,
            g,
            r.method.clone(),
            r.label.aoa_name().to_string(),
            r.trials.to_string(),
            fmt_f64(r.nmse_los_all),
            fmt_f64(r.nmse_upd_all),
            fmt_f64(to_db(r.nmse_los_all)),
            fmt_f64(to_db(r.nmse_upd_all)),
            fmt_f64(r.false_alarms_per_trial),
            fmt_f64(r.duplicate_rate),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}
