//! Command line front end.
//!
//! ```text
//! mimo-crowd --preset fig2 --out results/fig2 --trials 200
//! mimo-crowd --config my.conf --set snr_db=0,10 --threads 4
//! mimo-crowd --preset fig4 --inspect 3 --dump frame.bin
//! mimo-crowd plotdata results/fig2/results.csv --out results/fig2/curves
//! ```
//!
//! Exit codes: 0 on success, 1 on any error, 2 when `plotdata` finds no rows.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};

use crate::airlink::write_frame_dump;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::harness::{
    evaluate_trial, fmt_f64, run_sweep, sweep_points, to_db, write_csv, write_extra_csv, PointContext, TrialDetail,
};

pub const RESULTS_FILE: &str = "results.csv";
pub const EXTRA_FILE: &str = "results_extra.csv";
pub const MANIFEST_FILE: &str = "manifest.conf";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Fig2,
    Fig3,
    Fig4,
}

impl Preset {
    pub fn text(self) -> &'static str {
        match self {
            Preset::Fig2 => include_str!("../presets/fig2.conf"),
            Preset::Fig3 => include_str!("../presets/fig3.conf"),
            Preset::Fig4 => include_str!("../presets/fig4.conf"),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mimo-crowd", version, about = "Crowded massive-MIMO uplink simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,
    /// Config file (key = value lines).
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Built-in experiment, applied before --config.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Worker threads; results do not depend on it.
    #[arg(long, env = "MIMO_CROWD_THREADS")]
    pub threads: Option<usize>,
    /// Print a dump of one trial at the first sweep point instead of sweeping.
    #[arg(long, value_name = "TRIAL")]
    pub inspect: Option<u64>,
    /// With --inspect, also write the received superframe as a binary frame dump.
    #[arg(long, value_name = "PATH", requires = "inspect")]
    pub dump: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split a results CSV into two-column curve files.
    Plotdata {
        csv: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
}

/// Builds the config from preset, file, overrides and shortcut flags.
pub fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if let Some(p) = cli.preset {
        cfg.apply_text(p.text())?;
    }
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
    }
    for kv in &cli.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config {
            key: kv.clone(),
            message: "expected KEY=VALUE".into(),
        })?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Writes `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Run metadata as `#` comments followed by the config; the whole file is
/// itself a valid config.
pub fn render_manifest(
    cfg: &ExperimentConfig,
    started: u64,
    finished: u64,
    threads: usize,
    outputs: &[PathBuf],
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# mimo-crowd run manifest");
    let _ = writeln!(s, "# version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "# seed = {}", cfg.seed);
    let _ = writeln!(s, "# started = {started}");
    let _ = writeln!(s, "# finished = {finished}");
    let _ = writeln!(s, "# threads = {threads}");
    for o in outputs {
        let _ = writeln!(s, "# output = {}", o.display());
    }
    s.push_str(&cfg.to_text());
    s
}

/// Runs the sweep and writes the CSVs and the manifest into `out`.
pub fn cmd_sweep(cfg: &ExperimentConfig, out: &Path, threads: usize) -> Result<Vec<PathBuf>> {
    let started = unix_now();
    let records = run_sweep(cfg, threads)?;
    fs::create_dir_all(out)?;
    let results = out.join(RESULTS_FILE);
    let extra = out.join(EXTRA_FILE);
    let mut buf = Vec::new();
    write_csv(&records, &mut buf)?;
    write_atomic(&results, &buf)?;
    buf.clear();
    write_extra_csv(&records, &mut buf)?;
    write_atomic(&extra, &buf)?;
    let manifest = out.join(MANIFEST_FILE);
    let outputs = vec![results, extra];
    let text = render_manifest(cfg, started, unix_now(), threads, &outputs);
    write_atomic(&manifest, text.as_bytes())?;
    let mut all = outputs;
    all.push(manifest);
    Ok(all)
}

fn pattern_1based(p: &[usize]) -> String {
    p.iter().map(|l| (l + 1).to_string()).collect::<Vec<_>>().join("-")
}

fn db(x: f64) -> String {
    format!("{:.3} dB", to_db(x))
}

/// Human-readable account of one trial.
pub fn render_inspect(cfg: &ExperimentConfig, ctx: &PointContext, d: &TrialDetail) -> String {
    let p = ctx.point;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "trial {} | M={} L={} G={} U={} kappa={} snr_db={} | seed {}",
        d.trial,
        p.antennas,
        p.pilot_len,
        p.active,
        cfg.subframes,
        fmt_f64(p.kappa),
        fmt_f64(p.snr_db),
        cfg.seed
    );
    let _ = writeln!(s, "\nactive users (patterns 1-based)");
    let _ = writeln!(s, "  {:>5}  {:>7}  {:>9}  pattern", "user", "gain", "theta");
    for (u, prof) in d.active.iter().zip(&d.profiles) {
        let _ = writeln!(
            s,
            "  {:>5}  {:>7.4}  {:>9.6}  {}",
            u,
            prof.gain,
            prof.theta,
            pattern_1based(ctx.codebook.pattern(*u))
        );
    }
    let _ = writeln!(s, "\npilot collisions");
    if d.collisions.is_empty() {
        let _ = writeln!(s, "  none");
    }
    for c in &d.collisions {
        let users: Vec<String> = c.users.iter().map(ToString::to_string).collect();
        let _ = writeln!(
            s,
            "  COLLISION subframe {} pilot {}: users {}",
            c.subframe + 1,
            c.pilot + 1,
            users.join(", ")
        );
    }

    for pd in &d.proposed {
        let _ = writeln!(s, "\n[proposed, {} AOA]", pd.aoa_mode.as_str());
        let est: Vec<String> = pd.angles.iter().map(|a| format!("{a:.6}")).collect();
        let mut sorted_truth = d.profiles.iter().map(|p| p.theta).collect::<Vec<_>>();
        sorted_truth.sort_by(f64::total_cmp);
        let sorted_truth: Vec<String> = sorted_truth.iter().map(|a| format!("{a:.6}")).collect();
        let _ = writeln!(s, "  true AOAs      {}", sorted_truth.join(" "));
        let _ = writeln!(s, "  estimated AOAs {}", est.join(" "));
        let _ = writeln!(
            s,
            "  {:>3}  {:>9}  {:<20}  {:>7}  match",
            "k", "aoa", "pattern", "hamming"
        );
        for (k, pat) in pd.patterns.iter().enumerate() {
            let ham = pd.report.as_ref().map_or(0, |r| r.hamming[k]);
            let bound = pd.bindings.iter().find(|b| b.candidate == Some(k));
            let verdict = match bound {
                Some(b) if b.correct => format!("user {} ok", b.user),
                Some(b) => format!("user {} WRONG (nearest active {:?})", b.user, b.nearest_active),
                None => "-".to_string(),
            };
            let _ = writeln!(
                s,
                "  {:>3}  {:>9.6}  {:<20}  {:>7}  {}",
                k,
                pd.angles[k],
                pattern_1based(&pat.eta),
                ham,
                verdict
            );
        }
        let missed: Vec<String> = d
            .active
            .iter()
            .filter(|u| !pd.bindings.iter().any(|b| b.correct && b.user == **u))
            .map(ToString::to_string)
            .collect();
        let correct = d.active.len() - missed.len();
        let _ = writeln!(s, "  identified {}/{}", correct, d.active.len());
        if !missed.is_empty() {
            let _ = writeln!(s, "  missed users: {}", missed.join(", "));
        }
        if pd.report.as_ref().is_some_and(|r| r.duplicate_binding) {
            let _ = writeln!(s, "  duplicate binding resolved by mean |beta|");
        }
        if !pd.nmse.is_empty() {
            let _ = writeln!(s, "  {:>5}  {:>12}  {:>12}", "user", "nmse_los", "nmse_upd");
            for n in &pd.nmse {
                let los = n.los.iter().sum::<f64>() / n.los.len().max(1) as f64;
                let upd = n.updated.iter().sum::<f64>() / n.updated.len().max(1) as f64;
                let _ = writeln!(s, "  {:>5}  {:>12}  {:>12}", n.user, db(los), db(upd));
            }
        }
        for e in &pd.errors {
            let _ = writeln!(s, "  error: {e}");
        }
    }

    for bd in &d.baseline {
        let _ = writeln!(
            s,
            "\n[baseline, c={}, threshold {:.6}]",
            fmt_f64(bd.scale),
            bd.threshold
        );
        let declared: Vec<String> = bd
            .bindings
            .iter()
            .map(|b| format!("{}{}", b.user, if b.correct { "" } else { "(false)" }))
            .collect();
        let correct = bd.bindings.iter().filter(|b| b.correct).count();
        let _ = writeln!(
            s,
            "  declared: {}",
            if declared.is_empty() {
                "none".to_string()
            } else {
                declared.join(", ")
            }
        );
        let _ = writeln!(s, "  identified {}/{}", correct, d.active.len());
        for e in &bd.errors {
            let _ = writeln!(s, "  error: {e}");
        }
    }
    s
}

/// Evaluates and renders one trial at the first sweep point.
pub fn cmd_inspect(cfg: &ExperimentConfig, trial: u64, dump: Option<&Path>) -> Result<String> {
    let point = sweep_points(cfg)[0];
    let ctx = PointContext::new(cfg, point)?;
    let detail = evaluate_trial(cfg, &ctx, trial, dump.is_some())?;
    if let (Some(path), Some(frame)) = (dump, &detail.frame) {
        let mut buf = Vec::new();
        write_frame_dump(frame, &mut buf)?;
        write_atomic(path, &buf)?;
    }
    Ok(render_inspect(cfg, &ctx, &detail))
}

/// Per-curve series gathered from a results CSV.
#[derive(Debug, Default)]
struct Curve {
    x: Vec<f64>,
    acc: Vec<f64>,
    los: Vec<f64>,
    upd: Vec<f64>,
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Writes one `x y` file per (metric, method, AOA mode, κ, M, L, G) curve;
/// NMSE curves are written linear and in dB. Returns the files written.
pub fn cmd_plotdata(csv_path: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let mut rdr = csv::Reader::from_path(csv_path).map_err(|e| Error::Malformed(e.to_string()))?;
    let header = rdr.headers().map_err(|e| Error::Malformed(e.to_string()))?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Malformed(format!("missing column `{name}`")))
    };
    let cols = [
        "snr_db",
        "kappa",
        "M",
        "L",
        "G",
        "method",
        "aoa_mode",
        "id_acc_mean",
        "nmse_los_mean",
        "nmse_upd_mean",
    ]
    .map(col);
    let mut idx = [0usize; 10];
    for (i, c) in cols.into_iter().enumerate() {
        idx[i] = c?;
    }
    let mut order: Vec<String> = Vec::new();
    let mut curves: BTreeMap<String, Curve> = BTreeMap::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Malformed(e.to_string()))?;
        let field = |i: usize| rec.get(idx[i]).unwrap_or("");
        let num = |i: usize| {
            field(i)
                .parse::<f64>()
                .map_err(|_| Error::Malformed(format!("row {}: bad number `{}`", n + 2, field(i))))
        };
        let key = format!(
            "{}__{}__kappa{}__M{}_L{}_G{}",
            sanitize(field(5)),
            sanitize(field(6)),
            sanitize(field(1)),
            sanitize(field(2)),
            sanitize(field(3)),
            sanitize(field(4))
        );
        num(1)?;
        let c = curves.entry(key.clone()).or_insert_with(|| {
            order.push(key.clone());
            Curve::default()
        });
        c.x.push(num(0)?);
        c.acc.push(num(7)?);
        c.los.push(num(8)?);
        c.upd.push(num(9)?);
    }
    if curves.is_empty() {
        return Ok(Vec::new());
    }
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    let mut emit = |name: String, ylabel: &str, x: &[f64], y: &[f64]| -> Result<()> {
        if y.iter().all(|v| v.is_nan()) {
            return Ok(());
        }
        let mut s = format!("# snr_db {ylabel}\n");
        for (a, b) in x.iter().zip(y) {
            let _ = writeln!(s, "{} {}", fmt_f64(*a), fmt_f64(*b));
        }
        let path = out.join(format!("{name}.dat"));
        write_atomic(&path, s.as_bytes())?;
        written.push(path);
        Ok(())
    };
    for key in &order {
        let c = &curves[key];
        emit(format!("id_acc__{key}"), "id_acc_mean", &c.x, &c.acc)?;
        emit(format!("nmse_los__{key}"), "nmse_los_mean", &c.x, &c.los)?;
        emit(format!("nmse_upd__{key}"), "nmse_upd_mean", &c.x, &c.upd)?;
        let los_db: Vec<f64> = c.los.iter().map(|&v| to_db(v)).collect();
        let upd_db: Vec<f64> = c.upd.iter().map(|&v| to_db(v)).collect();
        emit(format!("nmse_los_db__{key}"), "nmse_los_db", &c.x, &los_db)?;
        emit(format!("nmse_upd_db__{key}"), "nmse_upd_db", &c.x, &upd_db)?;
    }
    Ok(written)
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Parses `args` and runs; returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}

fn execute(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    if let Some(Command::Plotdata { csv, out }) = &cli.command {
        let files = cmd_plotdata(csv, out)?;
        if files.is_empty() {
            writeln!(stderr, "warning: {} has no data rows; no curves written", csv.display())?;
            return Ok(2);
        }
        writeln!(stdout, "wrote {} curve files to {}", files.len(), out.display())?;
        return Ok(0);
    }
    let cfg = load_config(cli)?;
    if let Some(trial) = cli.inspect {
        let text = cmd_inspect(&cfg, trial, cli.dump.as_deref())?;
        stdout.write_all(text.as_bytes())?;
        return Ok(0);
    }
    let threads = cli.threads.unwrap_or_else(default_threads);
    let files = cmd_sweep(&cfg, &cli.out, threads)?;
    for f in files {
        writeln!(stdout, "wrote {}", f.display())?;
    }
    Ok(0)
}
