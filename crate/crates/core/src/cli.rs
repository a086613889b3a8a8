//! Command-line front end. Every subcommand writes one machine-readable
//! artifact: JSON reports carry provenance, CSV tables carry data rows.
//! Floats are written with 17 significant digits.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::classify::{self, classify_system, tsweep, ScanConfig};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::flow::{self, integrate, write_trajectory_csv, IntegratorConfig, Method};
use crate::geometry::{ChartId, Point, Sign};
use crate::imaging::{self, coverage, sample_image, write_samples_csv, ImageWindow, SamplingDomain, Subset};
use crate::loci::{self, scan_rank1, Rank1Grid, Rank1Locus};
use crate::systems::{eval_f, make_system, Observable, SystemDef, SystemId, SystemParams};
use crate::verify::{self, verify_system, DEFAULT_SEED};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "BSEMITORIC_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "bsemitoric", version, about = "Integrable systems on b-symplectic manifolds: verification, classification, loci, images and flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Involution, gradient and chart-overlap suites (JSON).
    Verify(Common),
    /// Fixed points and their Williamson types (JSON).
    Classify {
        #[command(flatten)]
        common: Common,
        /// Skip the confirming grid scan.
        #[arg(long)]
        no_scan: bool,
    },
    /// Pole types over a sweep of the coupling t (JSON).
    Tsweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 101)]
        steps: usize,
    },
    /// Momentum-image samples (CSV) and coverage (JSON).
    Image {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, value_parser = parse_subset, default_value = "whole")]
        subset: Subset,
        /// L_min,L_max,H_min,H_max
        #[arg(long, value_parser = parse_window, default_value = "-3,3,-3,3")]
        window: [f64; 4],
        #[arg(long, default_value_t = 30)]
        resolution: usize,
    },
    /// Rank-1 locus scan (CSV).
    Loci {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 16)]
        resolution: usize,
    },
    /// Hamiltonian flow trajectory (CSV).
    Flow {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Which::H)]
        which: Which,
        #[arg(long, default_value_t = 10.0)]
        t_max: f64,
        /// Chart label of the start point, e.g. U0, U+, U0xU-.
        #[arg(long)]
        chart: Option<String>,
        /// Start coordinates c1,c2,c3,c4.
        #[arg(long, value_parser = parse_four)]
        start: Option<[f64; 4]>,
        #[arg(long, value_enum, default_value_t = MethodArg::Rk45)]
        method: MethodArg,
        /// RK4 step, or RK45 initial step.
        #[arg(long, default_value_t = 1e-2)]
        step: f64,
        #[arg(long, default_value_t = 1e-10)]
        tolerance: f64,
    },
    /// Scripted session writing every figure input plus a manifest.
    Manifest {
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Samples per image panel.
        #[arg(long, default_value_t = 200_000)]
        samples: usize,
        /// Output directory (defaults to $BSEMITORIC_OUT_DIR, then ./figures-data).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        sequential: bool,
    },
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long, value_parser = parse_system)]
    system: SystemId,
    #[arg(long)]
    rho1: Option<f64>,
    #[arg(long)]
    rho2: Option<f64>,
    #[arg(long = "R1", alias = "r1")]
    r1: Option<f64>,
    #[arg(long = "R2", alias = "r2")]
    r2: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Output file (defaults to $BSEMITORIC_OUT_DIR/<name>, then stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Which {
    L,
    H,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Rk4,
    Rk45,
}

fn parse_system(s: &str) -> std::result::Result<SystemId, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_subset(s: &str) -> std::result::Result<Subset, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_four(s: &str) -> std::result::Result<[f64; 4], String> {
    let v: Vec<f64> = s.split(',').map(|x| x.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|e| e.to_string())?;
    v.try_into().map_err(|_| "expected four comma-separated numbers".to_string())
}

fn parse_window(s: &str) -> std::result::Result<[f64; 4], String> {
    parse_four(s)
}

impl Common {
    fn params(&self) -> SystemParams {
        let d = SystemParams::default();
        SystemParams {
            rho1: self.rho1.unwrap_or(d.rho1),
            rho2: self.rho2.unwrap_or(d.rho2),
            r1: self.r1.unwrap_or(d.r1),
            r2: self.r2.unwrap_or(d.r2),
            t: self.t.unwrap_or(d.t),
        }
    }

    fn system(&self) -> Result<SystemDef> {
        make_system(self.system, self.params())
    }

    fn exec(&self) -> Execution {
        exec_of(self.sequential)
    }
}

fn exec_of(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

#[derive(Debug, Serialize)]
pub struct Tolerances {
    pub involution: f64,
    pub gradient: f64,
    pub overlap: f64,
    pub fixed_point: f64,
    pub newton: f64,
    pub collision: f64,
    pub pattern: f64,
    pub rank: f64,
    pub flow_rk45: f64,
    pub flow_z_guard: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let flow = IntegratorConfig::default();
        Tolerances {
            involution: verify::INVOLUTION_TOL,
            gradient: verify::GRADIENT_TOL,
            overlap: verify::OVERLAP_TOL,
            fixed_point: crate::systems::FIXED_POINT_TOL,
            newton: classify::NEWTON_TOL,
            collision: classify::COLLISION_TOL,
            pattern: classify::PATTERN_TOL,
            rank: loci::RANK_TOL,
            flow_rk45: flow.tolerance,
            flow_z_guard: flow.z_guard,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub system: Option<SystemId>,
    pub params: Option<SystemParams>,
    pub seed: u64,
    pub tolerances: Tolerances,
}

impl Provenance {
    fn new(command: &'static str, sys: Option<&SystemDef>, seed: u64) -> Self {
        Provenance {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            system: sys.map(|s| s.id),
            params: sys.map(|s| s.params),
            seed,
            tolerances: Tolerances::default(),
        }
    }
}

/// JSON number formatting with 17 significant digits.
struct Sig17;

impl serde_json::ser::Formatter for Sig17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        if v.is_finite() {
            write!(w, "{v:.16e}")
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }
}

/// Serializes `value` as one line of JSON with 17-digit floats.
pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17);
    value.serialize(&mut ser).map_err(|e| Error::Io(e.to_string()))?;
    buf.push(b'\n');
    Ok(buf)
}

/// Where an artifact goes: explicit path, env directory, or stdout.
fn destination(out: &Option<PathBuf>, default_name: &str) -> Option<PathBuf> {
    out.clone().or_else(|| std::env::var_os(OUT_DIR_ENV).map(|d| PathBuf::from(d).join(default_name)))
}

fn emit(dest: &Option<PathBuf>, bytes: &[u8]) -> Result<()> {
    match dest {
        Some(path) => write_file(path, bytes),
        None => io::stdout().write_all(bytes).map_err(|e| Error::Io(e.to_string())),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Outcome of a subcommand that completed without runtime error.
enum Outcome {
    Ok,
    ValidationFailed,
}

/// Runs the CLI and returns the process exit code: 0 success, 1
/// validation or runtime failure, 2 usage error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(Outcome::Ok) => 0,
        Ok(Outcome::ValidationFailed) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    provenance: Provenance,
    integrable: bool,
    passed: bool,
    suites: &'a [verify::SuiteReport],
}

#[derive(Serialize)]
struct ClassifyReport {
    provenance: Provenance,
    #[serde(flatten)]
    report: classify::ClassificationReport,
}

#[derive(Serialize)]
struct SweepOut {
    provenance: Provenance,
    #[serde(flatten)]
    report: classify::SweepReport,
}

#[derive(Serialize)]
struct FlowMeta {
    provenance: Provenance,
    which: Observable,
    config: IntegratorConfig,
    steps: usize,
    termination: flow::Termination,
    min_abs_z: f64,
    #[serde(rename = "max_dL")]
    max_dl: f64,
    #[serde(rename = "max_dH")]
    max_dh: f64,
}

#[derive(Serialize)]
struct CoverageOut {
    provenance: Provenance,
    samples: usize,
    subset: Subset,
    in_window: usize,
    #[serde(flatten)]
    coverage: imaging::CoverageReport,
}

fn dispatch(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Verify(c) => {
            let sys = c.system()?;
            let suites = verify_system(&sys, c.seed, c.exec());
            let integrable = sys.id.is_integrable();
            let passed = integrable && suites.iter().all(|s| s.passed);
            let report = VerifyReport { provenance: Provenance::new("verify", Some(&sys), c.seed), integrable, passed, suites: &suites };
            emit(&destination(&c.out, &format!("verify-{}.json", sys.id)), &to_json(&report)?)?;
            Ok(if passed { Outcome::Ok } else { Outcome::ValidationFailed })
        }
        Command::Classify { common: c, no_scan } => {
            let sys = c.system()?;
            let scan = ScanConfig::default();
            let report = classify_system(&sys, (!no_scan).then_some(&scan), c.exec())?;
            let out = ClassifyReport { provenance: Provenance::new("classify", Some(&sys), c.seed), report };
            emit(&destination(&c.out, &format!("classify-{}.json", sys.id)), &to_json(&out)?)?;
            Ok(Outcome::Ok)
        }
        Command::Tsweep { common: c, steps } => {
            let sys = c.system()?;
            let report = tsweep(sys.id, sys.params.r1, sys.params.r2, steps, c.exec())?;
            let out = SweepOut { provenance: Provenance::new("tsweep", Some(&sys), c.seed), report };
            emit(&destination(&c.out, &format!("tsweep-{}.json", sys.id)), &to_json(&out)?)?;
            Ok(Outcome::Ok)
        }
        Command::Image { common: c, samples, subset, window, resolution } => {
            let sys = c.system()?;
            let window = ImageWindow { l_range: [window[0], window[1]], h_range: [window[2], window[3]], resolution };
            let data = sample_image(&sys, samples, c.seed, &window, subset, &SamplingDomain::default(), c.exec())?;
            let mut csv = Vec::new();
            write_samples_csv(&mut csv, &data)?;
            let dest = destination(&c.out, &format!("image-{}-{}.csv", sys.id, subset.name()));
            emit(&dest, &csv)?;
            let cov = CoverageOut {
                provenance: Provenance::new("image", Some(&sys), c.seed),
                samples,
                subset,
                in_window: data.iter().filter(|s| s.in_window).count(),
                coverage: coverage(&data, &window),
            };
            let json = to_json(&cov)?;
            match dest {
                Some(path) => write_file(&path.with_extension("coverage.json"), &json)?,
                None => io::stderr().write_all(&json).map_err(|e| Error::Io(e.to_string()))?,
            }
            Ok(Outcome::Ok)
        }
        Command::Loci { common: c, resolution } => {
            let sys = c.system()?;
            let grid = Rank1Grid { resolution, ..Default::default() };
            let locus = scan_rank1(&sys, &grid, c.exec())?;
            let mut csv = Vec::new();
            write_locus_csv(&mut csv, &sys, &locus)?;
            emit(&destination(&c.out, &format!("loci-{}.csv", sys.id)), &csv)?;
            Ok(Outcome::Ok)
        }
        Command::Flow { common: c, which, t_max, chart, start, method, step, tolerance } => {
            let sys = c.system()?;
            let chart = match chart {
                Some(label) => ChartId::parse(&label).ok_or_else(|| Error::BadParams(format!("unknown chart '{label}'")))?,
                None => ChartId::cylindrical(sys.manifold()),
            };
            let coords = start.unwrap_or([0.0, 0.5, 1.0, -0.3]);
            let p0 = Point::new(chart, coords)?;
            let cfg = IntegratorConfig {
                method: match method {
                    MethodArg::Rk4 => Method::Rk4,
                    MethodArg::Rk45 => Method::Rk45,
                },
                step,
                tolerance,
                ..Default::default()
            };
            let which = match which {
                Which::L => Observable::L,
                Which::H => Observable::H,
            };
            let traj = integrate(&sys, &p0, which, t_max, &cfg)?;
            let mut csv = Vec::new();
            write_trajectory_csv(&mut csv, &traj)?;
            let name = format!("flow-{}-{}.csv", sys.id, if which == Observable::L { "L" } else { "H" });
            let dest = destination(&c.out, &name);
            emit(&dest, &csv)?;
            let (max_dl, max_dh) = flow::conservation_report(&traj);
            let meta = FlowMeta {
                provenance: Provenance::new("flow", Some(&sys), c.seed),
                which,
                config: traj.config,
                steps: traj.states.len() - 1,
                termination: traj.termination,
                min_abs_z: traj.min_abs_z,
                max_dl,
                max_dh,
            };
            let json = to_json(&meta)?;
            match dest {
                Some(path) => write_file(&path.with_extension("meta.json"), &json)?,
                None => io::stderr().write_all(&json).map_err(|e| Error::Io(e.to_string()))?,
            }
            Ok(Outcome::Ok)
        }
        Command::Manifest { seed, samples, out, sequential } => {
            let dir = out
                .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("figures-data"));
            write_manifest(&dir, seed, samples, exec_of(sequential))?;
            Ok(Outcome::Ok)
        }
    }
}

/// Writes `component,chart,c1,c2,c3,c4,mu,L,H` rows.
pub fn write_locus_csv<W: Write>(out: W, sys: &SystemDef, locus: &Rank1Locus) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = imaging::io_err;
    w.write_record(["component", "chart", "c1", "c2", "c3", "c4", "mu", "L", "H"]).map_err(io)?;
    for s in &locus.samples {
        let v = eval_f(sys, &s.point)?;
        let mut row = vec![s.component.to_string(), s.point.chart.label()];
        row.extend(s.point.coords.iter().map(|c| format!("{c:.16e}")));
        row.extend([s.mu, v.l, v.h].iter().map(|c| format!("{c:.16e}")));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

#[derive(Debug, Serialize)]
struct ManifestImage {
    subset: Subset,
    file: String,
}

#[derive(Debug, Serialize)]
struct ManifestPanel {
    t: Option<f64>,
    window: ImageWindow,
    samples: Vec<ManifestImage>,
    fixed_points: String,
}

#[derive(Debug, Serialize)]
struct ManifestFigure {
    kind: &'static str,
    system: SystemId,
    panels: Vec<ManifestPanel>,
    boundary: Option<String>,
}

#[derive(Debug, Serialize)]
struct Manifest {
    provenance: Provenance,
    samples_per_panel: usize,
    figures: Vec<ManifestFigure>,
}

fn figure_window(id: SystemId) -> ImageWindow {
    let (l, h) = match id {
        SystemId::Cso | SystemId::BCso | SystemId::BCsoReversed => ([-3.0, 3.0], [-3.0, 3.0]),
        SystemId::Cam => ([-3.0, 3.0], [-1.05, 1.05]),
        SystemId::Cam2 => ([-6.0, 3.0], [-3.0, 1.05]),
        _ => ([-6.0, 3.0], [-1.05, 1.05]),
    };
    ImageWindow { l_range: l, h_range: h, resolution: 30 }
}

/// Writes `label,L,H,type` for every fixed point.
fn fixed_point_csv(sys: &SystemDef, exec: Execution) -> Result<Vec<u8>> {
    let report = classify_system(sys, None, exec)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = imaging::io_err;
    w.write_record(["label", "L", "H", "type"]).map_err(io)?;
    for fp in &report.fixed_points {
        let v = eval_f(sys, &fp.point)?;
        w.write_record([fp.label.clone(), format!("{:.16e}", v.l), format!("{:.16e}", v.h), fp.kind.name().to_string()])
            .map_err(io)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

fn write_manifest(dir: &Path, seed: u64, samples: usize, exec: Execution) -> Result<()> {
    let kinds: [(&str, SystemId, bool); 7] = [
        ("cso", SystemId::Cso, false),
        ("bcso", SystemId::BCso, false),
        ("bcso-reversed", SystemId::BCsoReversed, false),
        ("cam-sweep-1", SystemId::Cam1, true),
        ("cam-sweep-2", SystemId::Cam2, true),
        ("cam-sweep-3", SystemId::Cam3, true),
        ("cam-classical", SystemId::Cam, false),
    ];
    let mut figures = Vec::new();
    for (kind, id, sweep) in kinds {
        let ts: Vec<Option<f64>> =
            if sweep { (0..6).map(|i| Some(i as f64 * 0.2)).collect() } else { vec![(!id.is_spin_oscillator()).then_some(0.5)] };
        let mut panels = Vec::new();
        for t in ts {
            let params = SystemParams { t: t.unwrap_or(0.5), ..SystemParams::default() };
            let sys = make_system(id, params)?;
            let window = figure_window(id);
            let tag = t.map_or(String::new(), |t| format!("-t{:.1}", t));
            let subsets: Vec<Subset> = match sys.singular_factor() {
                Some(0) => vec![Subset::FirstFactorUpper, Subset::FirstFactorLower],
                Some(_) => vec![Subset::SecondFactorUpper, Subset::SecondFactorLower],
                None => vec![Subset::Whole],
            };
            let mut files = Vec::new();
            for subset in subsets {
                let data = sample_image(&sys, samples, seed, &window, subset, &SamplingDomain::default(), exec)?;
                let mut csv = Vec::new();
                write_samples_csv(&mut csv, &data)?;
                let name = format!("{kind}{tag}-{}.csv", subset.name());
                write_file(&dir.join(&name), &csv)?;
                files.push(ManifestImage { subset, file: name });
            }
            let fp_name = format!("{kind}{tag}-fixed-points.csv");
            write_file(&dir.join(&fp_name), &fixed_point_csv(&sys, exec)?)?;
            panels.push(ManifestPanel { t, window, samples: files, fixed_points: fp_name });
        }
        let boundary = match id {
            SystemId::BCsoReversed => Some(write_reversed_boundary(dir, kind)?),
            SystemId::Cso => {
                let sys = make_system(id, SystemParams::default())?;
                let locus = scan_rank1(&sys, &Rank1Grid::default(), exec)?;
                let mut csv = Vec::new();
                write_locus_csv(&mut csv, &sys, &locus)?;
                let name = format!("{kind}-rank1.csv");
                write_file(&dir.join(&name), &csv)?;
                Some(name)
            }
            _ => None,
        };
        figures.push(ManifestFigure { kind, system: id, panels, boundary });
    }
    let manifest = Manifest { provenance: Provenance::new("manifest", None, seed), samples_per_panel: samples, figures };
    write_file(&dir.join("manifest.json"), &to_json(&manifest)?)
}

/// Both boundary branches of the reversed image as `z,branch,L,H`.
fn write_reversed_boundary(dir: &Path, kind: &str) -> Result<String> {
    let params = SystemParams::default();
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = imaging::io_err;
    w.write_record(["z", "branch", "L", "H"]).map_err(io)?;
    for branch in [Sign::Plus, Sign::Minus] {
        for i in 0..=400 {
            // log-spaced heights reach far along both branches
            let z = 10f64.powf(-3.0 * (1.0 - i as f64 / 400.0));
            let v = imaging::reversed_boundary(&params, z, branch)?;
            w.write_record([format!("{z:.16e}"), branch.symbol().to_string(), format!("{:.16e}", v.l), format!("{:.16e}", v.h)])
                .map_err(io)?;
        }
    }
    let name = format!("{kind}-boundary.csv");
    write_file(&dir.join(&name), &w.into_inner().map_err(|e| Error::Io(e.to_string()))?)?;
    Ok(name)
}
