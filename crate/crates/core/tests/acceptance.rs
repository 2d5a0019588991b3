//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `ACCEPTANCE_ONLY=2,5` restricts the run to the listed criteria.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use ndarray::s;
use num_complex::Complex64;

use mimo_crowd::airlink::{build_pilot_book, despread, synthesize_superframe, FrameParams, HoppingCodebook};
use mimo_crowd::aoa::{music_spectrum, sample_covariance};
use mimo_crowd::channel::{ArrayGeometry, UserProfile};
use mimo_crowd::cli::{Preset, EXTRA_FILE, RESULTS_FILE};
use mimo_crowd::config::{AoaMode, ExperimentConfig};
use mimo_crowd::estimate::{mmse_nlos, slice_qam4};
use mimo_crowd::harness::{
    aggregate, mean_se, run_trial, sweep_points, MetricRecord, PointContext, SweepPoint, TrialOutcome,
};
use mimo_crowd::identify::identify_users;
use mimo_crowd::linalg::{frobenius, hermitian_transpose, CMatrix};
use mimo_crowd::rng::{complex_normal, stream, Purpose};

type Check = fn() -> (bool, String);
type Runs = Vec<(SweepPoint, Vec<TrialOutcome>)>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::parse(text).expect("acceptance config")
}

/// Per-trial outcomes of every sweep point, in sweep order.
fn run_points(cfg: &ExperimentConfig) -> Runs {
    sweep_points(cfg)
        .into_iter()
        .map(|p| {
            let ctx = PointContext::new(cfg, p).unwrap();
            let trials = (0..cfg.trials as u64).map(|t| run_trial(cfg, &ctx, t)).collect();
            (p, trials)
        })
        .collect()
}

fn accuracy(t: &TrialOutcome, label: usize) -> f64 {
    let m = &t.methods[label];
    m.correct as f64 / m.active as f64
}

/// Mean and standard error of the per-trial difference `a − b`.
fn paired(a: &[TrialOutcome], la: usize, b: &[TrialOutcome], lb: usize) -> (f64, f64) {
    let d: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| accuracy(x, la) - accuracy(y, lb))
        .collect();
    mean_se(&d)
}

fn criterion1() -> (bool, String) {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for l in [1usize, 4, 16, 32] {
        let gram = build_pilot_book(l).unwrap().gram();
        for i in 0..l {
            for j in 0..l {
                let want = if i == j { l as f64 } else { 0.0 };
                worst = worst.max((gram[[i, j]] - c(want, 0.0)).norm());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        worst <= 1e-9 && secs < 1.0,
        format!("max |Gram - L*I| = {worst:.2e} over L in {{1,4,16,32}} ({secs:.3}s)"),
    )
}

fn criterion2() -> (bool, String) {
    let start = Instant::now();
    let cfg = config(
        "users = 250\nactive = 4\nantennas = 64\npilot_len = 8\nsubframes = 4\n\
         coherence_len = 200\ntau = 60\nkappa = inf\nsnr_db = inf\ntrials = 500\nseed = 2\n\
         methods = proposed\naoa_modes = genie\nmin_cos_gap = 0.0625\n",
    );
    let (p, trials) = run_points(&cfg).remove(0);
    let rec = &aggregate(&cfg, p, &trials)[0];
    let secs = start.elapsed().as_secs_f64();
    (
        rec.id_acc_mean == 1.0 && secs < 60.0,
        format!(
            "accuracy {} over {} trials, cos gap 4/M ({secs:.1}s)",
            rec.id_acc_mean, rec.trials
        ),
    )
}

/// Full pipeline on one noiseless pure-LOS superframe with MUSIC angles.
fn identify_instance(codebook: &HoppingCodebook, geometry: &ArrayGeometry, assignment: &[(usize, f64)]) -> bool {
    let mut population: Vec<UserProfile> = (0..codebook.users())
        .map(|u| UserProfile::new(u, 1.0, f64::INFINITY, PI / 2.0).unwrap())
        .collect();
    for &(u, theta) in assignment {
        population[u].theta = theta;
    }
    let active: Vec<usize> = assignment.iter().map(|&(u, _)| u).collect();
    let pilots = build_pilot_book(codebook.pilot_count()).unwrap();
    let params = FrameParams {
        geometry: *geometry,
        subframes: codebook.subframes(),
        data_len: 16,
        noise_var: 0.0,
        power: 1.0,
    };
    let frame = synthesize_superframe(&population, &active, codebook, &pilots, &params, 3, 0).unwrap();
    let r = despread(&frame.y_pilot, &pilots, 1.0).unwrap();
    let cov = sample_covariance(frame.y_pilot.iter().chain(&frame.y_data).map(|b| b.view())).unwrap();
    let est = music_spectrum(&cov, geometry, active.len(), 16384).unwrap();
    let (_, _, report) = identify_users(&r, &est.angles, geometry, codebook).unwrap();
    let found: BTreeSet<usize> = report.users().into_iter().collect();
    let truth: BTreeSet<usize> = active.iter().copied().collect();
    found == truth
        && report.matches.iter().all(|m| {
            let theta = population[m.user].theta;
            m.aoa.is_some_and(|a| (a - theta).abs() <= 2.0 * est.grid_step())
        })
}

fn criterion3() -> (bool, String) {
    let start = Instant::now();
    let (l, u, m) = (4usize, 3usize, 8usize);
    let patterns: Vec<Vec<usize>> = (0..l.pow(u as u32))
        .map(|i| (0..u).map(|t| (i / l.pow((u - 1 - t) as u32)) % l).collect())
        .collect();
    let k = patterns.len();
    let codebook = HoppingCodebook::from_patterns(l, u, patterns).unwrap();
    let geometry = ArrayGeometry::ula(m, 0.5).unwrap();
    // cos θ = ±1/2 makes the two steering vectors orthogonal for M = 8.
    let (a, b) = ((0.5f64).acos(), (-0.5f64).acos());
    let mut total = 0usize;
    let mut ok = 0usize;
    for i in 0..k {
        total += 1;
        ok += usize::from(identify_instance(&codebook, &geometry, &[(i, a)]));
        for j in 0..k {
            if j != i {
                total += 1;
                ok += usize::from(identify_instance(&codebook, &geometry, &[(i, a), (j, b)]));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        ok == total && secs < 300.0,
        format!("{ok}/{total} instances (all singles and ordered pairs over {k} patterns) ({secs:.1}s)"),
    )
}

/// Gauss-Jordan inverse with partial pivoting.
fn gj_inverse(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let mut aug = CMatrix::zeros((n, 2 * n));
    aug.slice_mut(s![.., ..n]).assign(a);
    for i in 0..n {
        aug[[i, n + i]] = c(1.0, 0.0);
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| aug[[x, col]].norm().total_cmp(&aug[[y, col]].norm()))
            .unwrap();
        for k in 0..2 * n {
            aug.swap([col, k], [piv, k]);
        }
        let d = aug[[col, col]];
        for k in 0..2 * n {
            aug[[col, k]] /= d;
        }
        for r in 0..n {
            if r != col {
                let f = aug[[r, col]];
                for k in 0..2 * n {
                    let v = aug[[col, k]];
                    aug[[r, k]] -= f * v;
                }
            }
        }
    }
    aug.slice(s![.., n..]).to_owned()
}

fn criterion4() -> (bool, String) {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for inst in 0..100u64 {
        let mut rng = stream(4, Purpose::Test, &[inst]);
        use rand::Rng;
        let g = rng.random_range(1..=8usize);
        let tau = rng.random_range(g + 1..=64usize);
        let m = rng.random_range(1..=32usize);
        let p: f64 = rng.random_range(0.1..4.0);
        let s2: f64 = rng.random_range(0.01..2.0);
        let res = CMatrix::from_shape_fn((m, tau), |_| complex_normal(&mut rng));
        let x = CMatrix::from_shape_fn((g, tau), |_| slice_qam4(complex_normal(&mut rng)));
        let bm = CMatrix::from_shape_fn((g, g), |_| complex_normal(&mut rng));
        let mut rv = bm.dot(&hermitian_transpose(bm.view())).mapv(|z| z / g as f64);
        for i in 0..g {
            rv[[i, i]] = c(rv[[i, i]].re + 0.1, 0.0);
            for j in (i + 1)..g {
                rv[[j, i]] = rv[[i, j]].conj();
            }
        }
        let lib = mmse_nlos(&res, &x, p, s2, &rv).unwrap().h;
        let xh = hermitian_transpose(x.view());
        let gram = x.dot(&xh).mapv(|z| z * p) + gj_inverse(&rv).mapv(|z| z * s2);
        let direct = res.dot(&xh.mapv(|z| z * p.sqrt())).dot(&gj_inverse(&gram));
        let rel = frobenius((&lib - &direct).view()) / frobenius(direct.view());
        worst = worst.max(rel);
    }
    let secs = start.elapsed().as_secs_f64();
    (
        worst <= 1e-10 && secs < 60.0,
        format!("worst relative deviation from direct inverse {worst:.2e} over 100 instances ({secs:.2}s)"),
    )
}

fn criterion5() -> (bool, String) {
    let start = Instant::now();
    let cfg = config(
        "users = 250\nactive = 10\nantennas = 100\npilot_len = 32\nkappa = 100, 10, 1\nsnr_db = 0\n\
         trials = 500\nseed = 5\nmethods = proposed\naoa_modes = estimated\n",
    );
    let runs = run_points(&cfg);
    let means: Vec<f64> = runs
        .iter()
        .map(|(p, t)| aggregate(&cfg, *p, t)[0].id_acc_mean)
        .collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for (hi, lo) in [(0usize, 1usize), (1, 2)] {
        let (d, se) = paired(&runs[hi].1, 0, &runs[lo].1, 0);
        let verdict = if d > 3.0 * se {
            "resolved"
        } else if d.abs() <= se {
            "tied"
        } else {
            pass = false;
            "unresolved"
        };
        parts.push(format!(
            "acc(k={}) - acc(k={}) = {d:.4} (SE {se:.4}, {verdict})",
            runs[hi].0.kappa, runs[lo].0.kappa
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    (
        pass && secs < 1800.0,
        format!(
            "M=100: acc k=100/10/1 = {:.4}/{:.4}/{:.4}; {} ({secs:.0}s)",
            means[0],
            means[1],
            means[2],
            parts.join("; ")
        ),
    )
}

/// κ = 10, M = 100, L = 32, G = 10, τ = 60, both methods, shared by 6 and 8.
fn kappa10_runs() -> &'static (ExperimentConfig, Runs) {
    static RUNS: OnceLock<(ExperimentConfig, Runs)> = OnceLock::new();
    RUNS.get_or_init(|| {
        let cfg = config(
            "users = 250\nactive = 10\nantennas = 100\npilot_len = 32\ntau = 60\nkappa = 10\n\
             snr_db = -10, 0, 10, 20\ntrials = 500\nseed = 6\nmethods = proposed, baseline\n\
             aoa_modes = estimated\ndetection = hard\nrv_mode = genie\n",
        );
        let runs = run_points(&cfg);
        (cfg, runs)
    })
}

fn criterion6() -> (bool, String) {
    let (_, runs) = kappa10_runs();
    let mut pass = true;
    let mut parts = Vec::new();
    for (p, trials) in runs.iter().filter(|(p, _)| p.snr_db <= 10.0) {
        let (d, se) = paired(trials, 0, trials, 1);
        let prop = trials.iter().map(|t| accuracy(t, 0)).sum::<f64>() / trials.len() as f64;
        let base = trials.iter().map(|t| accuracy(t, 1)).sum::<f64>() / trials.len() as f64;
        let ok = d > -3.0 * se;
        pass &= ok;
        parts.push(format!(
            "{}dB: {prop:.4} vs {base:.4} (diff {d:+.4}, SE {se:.4}{})",
            p.snr_db,
            if ok { "" } else { ", below" }
        ));
    }
    (pass, format!("proposed vs baseline(c=3), k=10: {}", parts.join("; ")))
}

fn criterion7() -> (bool, String) {
    let start = Instant::now();
    let cfg = config(
        "users = 250\nactive = 20\nantennas = 100\npilot_len = 16\nkappa = 10\n\
         snr_db = -20, -10, 0, 10, 20\ntrials = 500\nseed = 7\nmethods = proposed\n\
         aoa_modes = genie, estimated\n",
    );
    assert_eq!(cfg.aoa_modes, vec![AoaMode::Genie, AoaMode::Estimated]);
    let runs = run_points(&cfg);
    let mut pass = true;
    let mut worst_gap = 0.0f64;
    let mut parts = Vec::new();
    for (p, trials) in &runs {
        let rec = aggregate(&cfg, *p, trials);
        let (genie, est) = (rec[0].id_acc_mean, rec[1].id_acc_mean);
        let (d, se) = paired(trials, 1, trials, 0);
        let ok = d >= -0.15 && d <= 3.0 * se;
        pass &= ok;
        worst_gap = worst_gap.max(-d);
        parts.push(format!("{}dB {genie:.3}/{est:.3}", p.snr_db));
    }
    let secs = start.elapsed().as_secs_f64();
    (
        pass,
        format!(
            "genie/estimated: {}; largest drop {worst_gap:.4} ({secs:.0}s)",
            parts.join(", ")
        ),
    )
}

fn criterion8() -> (bool, String) {
    let (cfg, runs) = kappa10_runs();
    let recs: Vec<MetricRecord> = runs.iter().map(|(p, t)| aggregate(cfg, *p, t).remove(0)).collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for r in &recs {
        let ok = r.nmse_upd_mean < r.nmse_los_mean;
        pass &= ok;
        parts.push(format!(
            "{}dB los {:.2}/upd {:.2} dB",
            r.point.snr_db,
            10.0 * r.nmse_los_mean.log10(),
            10.0 * r.nmse_upd_mean.log10()
        ));
    }
    let flat: Vec<f64> = recs
        .iter()
        .filter(|r| r.point.snr_db >= 0.0)
        .map(|r| 10.0 * r.nmse_los_mean.log10())
        .collect();
    let spread =
        flat.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - flat.iter().cloned().fold(f64::INFINITY, f64::min);
    pass &= spread <= 3.0;
    (
        pass,
        format!("{}; LOS-only spread over SNR>=0: {spread:.3} dB", parts.join(", ")),
    )
}

fn criterion9() -> (bool, String) {
    let cfg = config(
        "users = 250\nactive = 1\nantennas = 100\npilot_len = 32\nkappa = 10\nsnr_db = 40\n\
         trials = 1000\nseed = 9\nmethods = proposed\naoa_modes = genie\n",
    );
    let (p, trials) = run_points(&cfg).remove(0);
    let rec = &aggregate(&cfg, p, &trials)[0];
    let target = 1.0 / 11.0;
    let rel = (rec.nmse_los_mean - target) / target;
    (
        rec.nmse_los_mean.is_finite() && rel.abs() <= 0.2,
        format!(
            "NMSE_los = {:.5} vs 1/(k+1) = {target:.5} ({:+.1}%), accuracy {}",
            rec.nmse_los_mean,
            100.0 * rel,
            rec.id_acc_mean
        ),
    )
}

fn criterion10() -> (bool, String) {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str, out: &Path| {
        Command::new(env!("CARGO_BIN_EXE_mimo-crowd"))
            .args(["--preset", "fig2", "--seed", "10", "--threads", threads, "--out"])
            .arg(out)
            .output()
            .map(|o| o.status.success())
            .unwrap_or(false)
    };
    let (a, b) = (dir.path().join("t1"), dir.path().join("t8"));
    if !run("1", &a) || !run("8", &b) {
        return (false, "fig2 run failed".into());
    }
    let same = |f: &str| {
        std::fs::read(a.join(f))
            .ok()
            .zip(std::fs::read(b.join(f)).ok())
            .is_some_and(|(x, y)| x == y)
    };
    let rows = std::fs::read_to_string(a.join(RESULTS_FILE)).map_or(0, |s| s.lines().count() - 1);
    let trials = ExperimentConfig::parse(Preset::Fig2.text()).unwrap().trials;
    let secs = start.elapsed().as_secs_f64();
    (
        same(RESULTS_FILE) && same(EXTRA_FILE),
        format!("fig2 preset ({trials} trials, {rows} rows) byte-identical with --threads 1 and 8 ({secs:.0}s)"),
    )
}

fn main() {
    let only: Option<BTreeSet<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let checks: [(usize, &str, Check); 10] = [
        (1, "pilot orthogonality", criterion1),
        (2, "pure-LOS identification limit", criterion2),
        (3, "exhaustive small-instance oracle", criterion3),
        (4, "MMSE against direct inverse", criterion4),
        (5, "Rician-factor ordering", criterion5),
        (6, "proposed vs threshold baseline", criterion6),
        (7, "estimated vs genie AOA", criterion7),
        (8, "updated vs LOS-only NMSE", criterion8),
        (9, "LOS-only NMSE floor", criterion9),
        (10, "determinism across thread counts", criterion10),
    ];
    let mut failed = 0;
    let mut ran = 0;
    let t0 = Instant::now();
    for (id, name, check) in checks {
        if only.as_ref().is_some_and(|s| !s.contains(&id)) {
            continue;
        }
        ran += 1;
        let (pass, detail) = check();
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {id} ({name}): {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
    }
    let total: Duration = t0.elapsed();
    println!(
        "acceptance: {}/{ran} passed in {:.0}s",
        ran - failed,
        total.as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
