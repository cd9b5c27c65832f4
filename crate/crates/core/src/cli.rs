//! Batch front end. Problem files are JSON; numeric series are written as CSV.
//!
//! Exit codes:
//!
//! | code | meaning                                                   |
//! |------|-----------------------------------------------------------|
//! | 0    | feasible / all checks passed / outputs written            |
//! | 1    | usage, schema or I/O error                                |
//! | 2    | infeasible LMIs, or a failing sample in the oracles       |
//! | 3    | numerical failure in the SDP solve                        |
//!
//! `summary.txt` always starts with `status=<feasible|infeasible|error> margin=<float>`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::lmi::RangeKind;
use crate::poly::{Controller, IntervalPlant, PinMask, Polynomial};
use crate::sdp::{self, SdpStatus};
use crate::synth::{self, build_problem, PerfSpec, SynthesisResult, SynthesisSpec};
use crate::verify::{
    self, sampling_plan, stability_table, step_response, sweep_sensitivity, SweepKind, SweepReport, UncertaintySample,
    DEFAULT_GRID_POINTS, DEFAULT_SAMPLES, DEFAULT_SEED,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Environment variable overriding `verify.seed`.
pub const SEED_ENV: &str = "RFIX_SEED";

/// Random interior samples used for the certificate soundness re-check.
const SOUNDNESS_SAMPLES: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub plant: PlantSection,
    pub controller: ControllerSection,
    pub dc: DcSection,
    #[serde(default)]
    pub specs: SpecsSection,
    #[serde(default)]
    pub verify: VerifySection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub order: usize,
    pub a_bounds: Vec<[f64; 2]>,
    pub b_bounds: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub order: usize,
    /// Coefficient name (`x1`, `y0`, ...) to pinned value.
    #[serde(default)]
    pub pins: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcSection {
    /// Descending powers, leading coefficient first.
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecsSection {
    pub sensitivity: Option<BoundSection>,
    pub comp_sensitivity: Option<BoundSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSection {
    pub bound_db: f64,
    pub band_rad_s: [f64; 2],
    #[serde(default = "default_range_kind")]
    pub range_kind: RangeKind,
}

fn default_range_kind() -> RangeKind {
    RangeKind::Middle
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}
fn default_grid_points() -> usize {
    DEFAULT_GRID_POINTS
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
            seed: DEFAULT_SEED,
            grid_points: DEFAULT_GRID_POINTS,
        }
    }
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text).map_err(|e| Error::Problem(format!("schema: {e}")))?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Problem(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Structural checks that do not need the numerical pipeline.
    pub fn validate(&self) -> Result<()> {
        let n = self.plant.order;
        if n == 0 {
            return Err(Error::Problem("schema: plant.order must be at least 1".into()));
        }
        for (name, bounds) in [("a_bounds", &self.plant.a_bounds), ("b_bounds", &self.plant.b_bounds)] {
            if bounds.len() != n {
                return Err(Error::Problem(format!(
                    "schema: plant.{name} has {} intervals, plant.order is {n}",
                    bounds.len()
                )));
            }
            for (i, [l, u]) in bounds.iter().enumerate() {
                if !(l.is_finite() && u.is_finite()) {
                    return Err(Error::Problem(format!("schema: plant.{name}[{i}] is not finite")));
                }
                if l > u {
                    return Err(Error::Problem(format!(
                        "schema: plant.{name}[{i}] = [{l}, {u}] is not ordered (need lower <= upper)"
                    )));
                }
            }
        }
        if self.controller.order == 0 {
            return Err(Error::Problem("schema: controller.order must be at least 1".into()));
        }
        if self.dc.coeffs.len() != n + self.controller.order + 1 {
            return Err(Error::Problem(format!(
                "schema: dc.coeffs needs {} entries for plant order {n} and controller order {}",
                n + self.controller.order + 1,
                self.controller.order
            )));
        }
        for (name, b) in [
            ("sensitivity", &self.specs.sensitivity),
            ("comp_sensitivity", &self.specs.comp_sensitivity),
        ] {
            if let Some(b) = b {
                let [lo, hi] = b.band_rad_s;
                if !(lo > 0.0 && hi > lo && hi.is_finite()) {
                    return Err(Error::Problem(format!(
                        "schema: specs.{name}.band_rad_s = [{lo}, {hi}] must be positive and increasing"
                    )));
                }
                if !b.bound_db.is_finite() {
                    return Err(Error::Problem(format!("schema: specs.{name}.bound_db is not finite")));
                }
            }
        }
        if self.verify.grid_points == 0 {
            return Err(Error::Problem("schema: verify.grid_points must be positive".into()));
        }
        Ok(())
    }

    pub fn plant(&self) -> Result<IntervalPlant> {
        IntervalPlant::from_bounds(&self.plant.a_bounds, &self.plant.b_bounds)
    }

    pub fn pins(&self) -> Result<PinMask> {
        let mut pins = PinMask::free(self.controller.order);
        for (name, v) in &self.controller.pins {
            pins.set(name, *v)?;
        }
        Ok(pins)
    }

    pub fn synthesis_spec(&self, overrides: &RangeOverrides) -> Result<SynthesisSpec> {
        let perf = |b: &Option<BoundSection>, kind: Option<RangeKind>| -> Result<Option<PerfSpec>> {
            b.as_ref()
                .map(|b| {
                    PerfSpec::from_db(
                        b.bound_db,
                        (b.band_rad_s[0], b.band_rad_s[1]),
                        kind.unwrap_or(b.range_kind),
                    )
                })
                .transpose()
        };
        let spec = SynthesisSpec {
            plant: self.plant()?,
            order: self.controller.order,
            dc: Polynomial::new(self.dc.coeffs.clone()),
            sensitivity: perf(&self.specs.sensitivity, overrides.sensitivity)?,
            comp_sensitivity: perf(&self.specs.comp_sensitivity, overrides.comp_sensitivity)?,
            pins: self.pins()?,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `verify.seed`, unless `RFIX_SEED` is set.
    pub fn seed(&self) -> Result<u64> {
        match std::env::var(SEED_ENV) {
            Ok(s) => s
                .trim()
                .parse()
                .map_err(|_| Error::Problem(format!("{SEED_ENV}='{s}' is not an unsigned integer"))),
            Err(_) => Ok(self.verify.seed),
        }
    }
}

/// Controller document as written by `synth` and read by the other commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerFile {
    /// `[1, x_1, ..., x_m]`
    pub x: Vec<f64>,
    /// `[y_0, ..., y_m]`
    pub y: Vec<f64>,
}

impl ControllerFile {
    pub fn load(path: &Path) -> Result<Controller> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Problem(format!("cannot read {}: {e}", path.display())))?;
        let f: Self = serde_json::from_str(&text).map_err(|e| Error::Problem(format!("controller schema: {e}")))?;
        Controller::new(f.x, f.y)
    }
}

/// Per-pair range kind overrides from the command line.
#[derive(Debug, Clone, Copy, Default)]
pub struct RangeOverrides {
    pub sensitivity: Option<RangeKind>,
    pub comp_sensitivity: Option<RangeKind>,
}

#[derive(Debug, Parser)]
#[command(
    name = "rfix",
    version,
    about = "Robust fixed-order controller synthesis for interval plants"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a controller satisfying every enabled bound.
    Synth {
        problem: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        ranges: RangeArgs,
        /// Also write the assembled SDP as sparse text.
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// Certify a given controller and run every sampling oracle.
    Check {
        problem: PathBuf,
        controller: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        ranges: RangeArgs,
        #[command(flatten)]
        step: StepArgs,
    },
    /// Write magnitude envelopes over the sampling plan.
    Bode {
        problem: PathBuf,
        controller: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Write a unit-step trace at one plant sample.
    Step {
        problem: PathBuf,
        controller: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        step: StepArgs,
    },
}

#[derive(Debug, Clone, Args)]
pub struct RangeArgs {
    /// Range kind for both bounds.
    #[arg(long, value_parser = parse_range_kind)]
    pub range_kind: Option<RangeKind>,
    /// Range kind for the sensitivity bound only.
    #[arg(long, value_parser = parse_range_kind)]
    pub s_range_kind: Option<RangeKind>,
    /// Range kind for the complementary sensitivity bound only.
    #[arg(long, value_parser = parse_range_kind)]
    pub t_range_kind: Option<RangeKind>,
}

impl RangeArgs {
    fn overrides(&self) -> RangeOverrides {
        RangeOverrides {
            sensitivity: self.s_range_kind.or(self.range_kind),
            comp_sensitivity: self.t_range_kind.or(self.range_kind),
        }
    }
}

fn parse_range_kind(s: &str) -> std::result::Result<RangeKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct StepArgs {
    /// Plant coefficients `a_1,...,a_n` for the step trace (default: interval midpoints).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub a: Option<Vec<f64>>,
    /// Plant coefficients `b_1,...,b_n` for the step trace.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub b: Option<Vec<f64>>,
    #[arg(long, default_value_t = 20.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub dt: f64,
}

impl StepArgs {
    fn sample(&self, plant: &IntervalPlant) -> Result<UncertaintySample> {
        let n = plant.order();
        let a = match &self.a {
            Some(a) => a.clone(),
            None => plant.a_c[1..].to_vec(),
        };
        let b = match &self.b {
            Some(b) => b.clone(),
            None => plant.b_c[1..].to_vec(),
        };
        if a.len() != n || b.len() != n {
            return Err(Error::Problem(format!("--a and --b need {n} values each")));
        }
        let (delta_a, delta_b) = plant.deltas_for(&a, &b)?;
        let mut s = UncertaintySample::nominal(n);
        s.delta_a = delta_a;
        s.delta_b = delta_b;
        Ok(s)
    }
}

/// Parses arguments and runs one command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Synth {
            problem,
            out,
            ranges,
            export,
        } => cmd_synth(&problem, &out, &ranges.overrides(), export.as_deref()),
        Command::Check {
            problem,
            controller,
            out,
            ranges,
            step,
        } => cmd_check(&problem, &controller, &out, &ranges.overrides(), &step),
        Command::Bode {
            problem,
            controller,
            out,
        } => cmd_bode(&problem, &controller, &out),
        Command::Step {
            problem,
            controller,
            out,
            step,
        } => cmd_step(&problem, &controller, &out, &step),
    }
}

fn exit_for(status: SdpStatus) -> i32 {
    match status {
        SdpStatus::Feasible => EXIT_OK,
        SdpStatus::Infeasible => EXIT_INFEASIBLE,
        SdpStatus::NumericalFailure => EXIT_NUMERICAL,
    }
}

fn status_word(code: i32) -> &'static str {
    match code {
        EXIT_OK => "feasible",
        EXIT_INFEASIBLE => "infeasible",
        _ => "error",
    }
}

/// Reports a usage or I/O failure; writes a summary when the output
/// directory is usable.
fn fail(out: Option<&Path>, err: &Error) -> i32 {
    eprintln!("rfix: {err}");
    if let Some(out) = out {
        if std::fs::create_dir_all(out).is_ok() {
            let _ = std::fs::write(
                out.join("summary.txt"),
                format!("status=error margin=nan\nerror: {err}\n"),
            );
        }
    }
    EXIT_USAGE
}

fn prepare_out(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::Problem(format!("cannot create {}: {e}", out.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Problem(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn controller_json(ctrl: &Controller, pins: &PinMask) -> serde_json::Value {
    let pinned: BTreeMap<String, f64> = pins
        .x
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.map(|v| (format!("x{}", i + 1), v)))
        .chain(
            pins.y
                .iter()
                .enumerate()
                .filter_map(|(i, p)| p.map(|v| (format!("y{i}"), v))),
        )
        .collect();
    json!({
        "order": ctrl.order(),
        "x": ctrl.x,
        "y": ctrl.y,
        "pins": pinned,
    })
}

fn certificates_json(result: &SynthesisResult, soundness: Option<&verify::SoundnessReport>) -> serde_json::Value {
    let certs: Vec<_> = result
        .certificates
        .iter()
        .map(|c| {
            json!({
                "groups": c.label(),
                "status": c.outcome.status,
                "margin": c.outcome.achieved_margin,
                "solver": c.outcome.stats,
                "report": c.outcome.report,
                "blocks": c.blocks(),
            })
        })
        .collect();
    json!({
        "status": result.status,
        "message": result.message,
        "runtime_s": result.runtime_s,
        "certificates": certs,
        "triage": result.triage,
        "soundness": soundness,
    })
}

fn summary_header(code: i32, margin: f64) -> String {
    format!("status={} margin={margin:e}\n", status_word(code))
}

fn describe_lmis(result: &SynthesisResult, s: &mut String) {
    for (label, report) in result.reports() {
        for l in &report.lmis {
            let _ = writeln!(
                s,
                "lmi {label}/{} size={} max_eig={:e}",
                l.name, l.size, l.max_eigenvalue
            );
        }
    }
    for c in &result.certificates {
        let st = &c.outcome.stats;
        let _ = writeln!(
            s,
            "solve {} status={:?} t_star={:e} iterations={} runtime_s={:.3}",
            c.label(),
            c.outcome.status,
            st.t_star,
            st.iterations,
            st.runtime_s
        );
    }
    for t in &result.triage {
        let _ = writeln!(s, "triage {} status={:?} t_star={:e}", t.groups, t.status, t.t_star);
    }
}

/// Soundness re-check of every certificate at the vertices and seeded
/// interior samples; `None` when a certificate is not feasible.
fn soundness(
    spec: &SynthesisSpec,
    ctrl: &Controller,
    result: &SynthesisResult,
    seed: u64,
) -> Result<Option<verify::SoundnessReport>> {
    if result.status != SdpStatus::Feasible {
        return Ok(None);
    }
    let samples = sampling_plan(&spec.plant, SOUNDNESS_SAMPLES, seed);
    let mut merged = verify::SoundnessReport {
        entries: Vec::new(),
        samples: samples.len(),
    };
    for cert in &result.certificates {
        merged
            .entries
            .extend(verify::certificate_soundness(spec, ctrl, cert, &samples)?.entries);
    }
    Ok(Some(merged))
}

pub fn cmd_synth(problem: &Path, out: &Path, overrides: &RangeOverrides, export: Option<&Path>) -> i32 {
    match synth_inner(problem, out, overrides, export) {
        Ok(code) => code,
        Err(e) => fail(Some(out), &e),
    }
}

fn synth_inner(problem: &Path, out: &Path, overrides: &RangeOverrides, export: Option<&Path>) -> Result<i32> {
    let file = ProblemFile::load(problem)?;
    let spec = file.synthesis_spec(overrides)?;
    prepare_out(out)?;
    if let Some(path) = export {
        let (p, _) = build_problem(&spec, &spec.pins, &spec.groups())?;
        write_file(path, &sdp::export_text(&p))?;
    }
    let result = synth::synthesize(&spec)?;
    let mut code = exit_for(result.status);
    let sound = match &result.controller {
        Some(ctrl) => soundness(&spec, ctrl, &result, file.seed()?)?,
        None => None,
    };

    let mut s = String::new();
    if let Some(ctrl) = &result.controller {
        write_json(&out.join("controller.json"), &controller_json(ctrl, &spec.pins))?;
        let _ = writeln!(s, "controller x={:?} y={:?}", ctrl.x, ctrl.y);
        // The pair LMIs certify each of G_s ± G_o/ρ separately; the sampled
        // sweeps are the direct check of the magnitude bound.
        let samples = sampling_plan(&spec.plant, file.verify.samples, file.seed()?);
        let table = stability_table(&spec.plant, ctrl, &samples);
        let sweeps = run_sweeps(&file, &spec, ctrl, &samples)?;
        let oracles_pass = table.all_stable() && [&sweeps.s, &sweeps.t].into_iter().flatten().all(|r| r.pass);
        let _ = writeln!(s, "oracles samples={} pass={oracles_pass}", samples.len());
        describe_sweeps(&sweeps, &mut s);
        if !oracles_pass {
            eprintln!("rfix: warning: certified controller fails the sampled oracles; see summary.txt");
        }
    }
    if let Some(r) = &sound {
        let worst = r
            .entries
            .iter()
            .map(|e| e.worst_max_eigenvalue)
            .fold(f64::NEG_INFINITY, f64::max);
        let _ = writeln!(
            s,
            "soundness samples={} passed={} worst_max_eig={worst:e}",
            r.samples,
            r.passed()
        );
        if !r.passed() {
            code = EXIT_NUMERICAL;
        }
    }
    write_json(
        &out.join("certificates.json"),
        &certificates_json(&result, sound.as_ref()),
    )?;
    describe_lmis(&result, &mut s);
    let _ = writeln!(s, "message {}", result.message);
    let _ = writeln!(s, "runtime_s {:.3}", result.runtime_s);
    write_file(&out.join("summary.txt"), &(summary_header(code, result.margin()) + &s))?;
    if code != EXIT_OK {
        eprintln!("rfix: {}", result.message);
    }
    Ok(code)
}

struct Sweeps {
    s: Option<SweepReport>,
    t: Option<SweepReport>,
}

fn run_sweeps(
    file: &ProblemFile,
    spec: &SynthesisSpec,
    ctrl: &Controller,
    samples: &[UncertaintySample],
) -> Result<Sweeps> {
    let sweep = |b: &Option<PerfSpec>, kind| {
        b.as_ref()
            .map(|p| {
                sweep_sensitivity(
                    &spec.plant,
                    ctrl,
                    &spec.dc,
                    samples,
                    p.band,
                    p.bound_db(),
                    kind,
                    file.verify.grid_points,
                )
            })
            .transpose()
    };
    Ok(Sweeps {
        s: sweep(&spec.sensitivity, SweepKind::S)?,
        t: sweep(&spec.comp_sensitivity, SweepKind::T)?,
    })
}

fn describe_sweeps(sweeps: &Sweeps, s: &mut String) {
    for r in [&sweeps.s, &sweeps.t].into_iter().flatten() {
        let _ = writeln!(
            s,
            "sweep {:?} band=({}, {}) bound_db={} worst_margin_db={:e} worst_sample={} worst_omega={:e} complementarity_error={:e} pass={}",
            r.kind, r.band.0, r.band.1, r.bound_db, r.worst_margin_db, r.worst_sample, r.worst_omega, r.complementarity_error, r.pass
        );
    }
}

fn write_sweeps(out: &Path, sweeps: &Sweeps) -> Result<()> {
    if let Some(r) = &sweeps.s {
        verify::write_bode_csv(&out.join("bode_s.csv"), r)?;
    }
    if let Some(r) = &sweeps.t {
        verify::write_bode_csv(&out.join("bode_t.csv"), r)?;
    }
    Ok(())
}

fn load_pair(
    problem: &Path,
    controller: &Path,
    overrides: &RangeOverrides,
) -> Result<(ProblemFile, SynthesisSpec, Controller)> {
    let file = ProblemFile::load(problem)?;
    let spec = file.synthesis_spec(overrides)?;
    let ctrl = ControllerFile::load(controller)?;
    if ctrl.order() != spec.order {
        return Err(Error::Problem(format!(
            "controller order {} differs from controller.order {}",
            ctrl.order(),
            spec.order
        )));
    }
    Ok((file, spec, ctrl))
}

pub fn cmd_check(problem: &Path, controller: &Path, out: &Path, overrides: &RangeOverrides, step: &StepArgs) -> i32 {
    match check_inner(problem, controller, out, overrides, step) {
        Ok(code) => code,
        Err(e) => fail(Some(out), &e),
    }
}

fn check_inner(
    problem: &Path,
    controller: &Path,
    out: &Path,
    overrides: &RangeOverrides,
    step: &StepArgs,
) -> Result<i32> {
    let (file, spec, ctrl) = load_pair(problem, controller, overrides)?;
    prepare_out(out)?;
    let seed = file.seed()?;
    let result = synth::check_controller(&spec, &ctrl)?;
    let samples = sampling_plan(&spec.plant, file.verify.samples, seed);
    let table = stability_table(&spec.plant, &ctrl, &samples);
    verify::write_stability_csv(&out.join("stability.csv"), &table)?;
    let sweeps = run_sweeps(&file, &spec, &ctrl, &samples)?;
    write_sweeps(out, &sweeps)?;
    let sound = soundness(&spec, &ctrl, &result, seed)?;

    let mut s = String::new();
    let failing = table.failing();
    let _ = writeln!(
        s,
        "stability samples={} stable={} failing={}",
        table.rows.len(),
        table.rows.len() - failing.len(),
        failing.len()
    );
    for r in &failing {
        let _ = writeln!(s, "failing {} abscissa={:e}", r.sample, r.abscissa);
    }
    describe_sweeps(&sweeps, &mut s);
    if let Some(r) = &sound {
        let worst = r
            .entries
            .iter()
            .map(|e| e.worst_max_eigenvalue)
            .fold(f64::NEG_INFINITY, f64::max);
        let _ = writeln!(
            s,
            "soundness samples={} passed={} worst_max_eig={worst:e}",
            r.samples,
            r.passed()
        );
    }
    match step
        .sample(&spec.plant)
        .and_then(|smp| step_response(&spec.plant, &ctrl, &smp, step.t_end, step.dt))
    {
        Ok(trace) => {
            verify::write_step_csv(&out.join("step.csv"), &trace)?;
            let _ = writeln!(s, "step final_value={:e} h={:e}", trace.final_value(), trace.h);
        }
        Err(e) => {
            let _ = writeln!(s, "step skipped: {e}");
        }
    }
    describe_lmis(&result, &mut s);

    let oracles_pass = failing.is_empty() && [&sweeps.s, &sweeps.t].into_iter().flatten().all(|r| r.pass);
    let mut code = exit_for(result.status);
    if code == EXIT_OK && !oracles_pass {
        code = EXIT_INFEASIBLE;
    }
    if code == EXIT_OK && sound.as_ref().is_some_and(|r| !r.passed()) {
        code = EXIT_NUMERICAL;
    }
    if !failing.is_empty() {
        let names: Vec<&str> = failing.iter().map(|r| r.sample.as_str()).collect();
        eprintln!("rfix: unstable samples: {}", names.join(", "));
        if code == EXIT_NUMERICAL {
            code = EXIT_INFEASIBLE;
        }
    }
    write_json(
        &out.join("certificates.json"),
        &certificates_json(&result, sound.as_ref()),
    )?;
    write_file(&out.join("summary.txt"), &(summary_header(code, result.margin()) + &s))?;
    Ok(code)
}

pub fn cmd_bode(problem: &Path, controller: &Path, out: &Path) -> i32 {
    let run = || -> Result<i32> {
        let (file, spec, ctrl) = load_pair(problem, controller, &RangeOverrides::default())?;
        prepare_out(out)?;
        let samples = sampling_plan(&spec.plant, file.verify.samples, file.seed()?);
        write_sweeps(out, &run_sweeps(&file, &spec, &ctrl, &samples)?)?;
        Ok(EXIT_OK)
    };
    run().unwrap_or_else(|e| fail(None, &e))
}

pub fn cmd_step(problem: &Path, controller: &Path, out: &Path, step: &StepArgs) -> i32 {
    let run = || -> Result<i32> {
        let (_, spec, ctrl) = load_pair(problem, controller, &RangeOverrides::default())?;
        prepare_out(out)?;
        let sample = step.sample(&spec.plant)?;
        match step_response(&spec.plant, &ctrl, &sample, step.t_end, step.dt) {
            Ok(trace) => {
                verify::write_step_csv(&out.join("step.csv"), &trace)?;
                Ok(EXIT_OK)
            }
            Err(e @ Error::Unstable(_)) => {
                eprintln!("rfix: {e}");
                Ok(EXIT_INFEASIBLE)
            }
            Err(e) => Err(e),
        }
    };
    run().unwrap_or_else(|e| fail(None, &e))
}
