//! Solver-independent checks: vertex and random sampling of the interval
//! box, frequency sweeps of `S` and `T`, the bounded-real to positive-real
//! transform, step responses, and re-evaluation of certificates at
//! concrete uncertainty values.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lmi::{FrequencyRange, VarKind};
use crate::poly::{convolve_slices, Controller, IntervalPlant, Polynomial};
use crate::realize::{build_constructed_systems, realize_canonical, Constructed, ConstructedSystems};
use crate::synth::{Group, GroupCertificate, SynthesisSpec};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_SAMPLES: usize = 1000;
pub const DEFAULT_GRID_POINTS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Provenance {
    Vertex { index: usize },
    Random { seed: u64, index: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UncertaintySample {
    pub delta_a: Vec<f64>,
    pub delta_b: Vec<f64>,
    pub provenance: Provenance,
}

impl UncertaintySample {
    pub fn nominal(n: usize) -> Self {
        Self {
            delta_a: vec![0.0; n],
            delta_b: vec![0.0; n],
            provenance: Provenance::Vertex { index: usize::MAX },
        }
    }

    pub fn label(&self) -> String {
        match self.provenance {
            Provenance::Vertex { index } if index == usize::MAX => "nominal".into(),
            Provenance::Vertex { index } => format!("vertex-{index}"),
            Provenance::Random { index, .. } => format!("random-{index}"),
        }
    }
}

/// All `2^(2n)` vertices. Bit `i` of the index sets `δ_a,i` for `i < n` and
/// `δ_b,i-n` otherwise; a set bit means `+1`.
pub fn vertices(n: usize) -> Vec<UncertaintySample> {
    (0..1usize << (2 * n))
        .map(|idx| {
            let bit = |i: usize| if idx >> i & 1 == 1 { 1.0 } else { -1.0 };
            UncertaintySample {
                delta_a: (0..n).map(bit).collect(),
                delta_b: (n..2 * n).map(bit).collect(),
                provenance: Provenance::Vertex { index: idx },
            }
        })
        .collect()
}

/// Uniform samples on `[-1, 1]^(2n)` from a seeded ChaCha stream.
pub fn random_samples(n: usize, count: usize, seed: u64) -> Vec<UncertaintySample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|index| {
            let delta_a = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let delta_b = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
            UncertaintySample {
                delta_a,
                delta_b,
                provenance: Provenance::Random { seed, index },
            }
        })
        .collect()
}

/// Vertices first, then `count` random samples.
pub fn sampling_plan(plant: &IntervalPlant, count: usize, seed: u64) -> Vec<UncertaintySample> {
    let n = plant.order();
    let mut plan = vertices(n);
    plan.extend(random_samples(n, count, seed));
    plan
}

/// `a(δ) * x + b(δ) * y`
pub fn characteristic(plant: &IntervalPlant, ctrl: &Controller, sample: &UncertaintySample) -> Polynomial {
    let (a, b) = plant.sample(&sample.delta_a, &sample.delta_b);
    let ax = convolve_slices(a.coeffs(), &ctrl.x);
    let by = convolve_slices(b.coeffs(), &ctrl.y);
    Polynomial::new(ax.iter().zip(&by).map(|(p, q)| p + q).collect())
}

/// Largest root real part of the closed-loop characteristic polynomial.
pub fn closed_loop_abscissa(plant: &IntervalPlant, ctrl: &Controller, sample: &UncertaintySample) -> f64 {
    let p = characteristic(plant, ctrl, sample).trimmed();
    if p.degree() < plant.order() + ctrl.order() {
        return f64::INFINITY;
    }
    match p.roots() {
        Ok(r) => r.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max),
        Err(_) => f64::INFINITY,
    }
}

/// Eigenvalue test on the closed-loop characteristic polynomial.
pub fn closed_loop_stable(plant: &IntervalPlant, ctrl: &Controller, sample: &UncertaintySample) -> bool {
    closed_loop_abscissa(plant, ctrl, sample) < 0.0
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityRow {
    pub sample: String,
    pub stable: bool,
    pub abscissa: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityTable {
    pub rows: Vec<StabilityRow>,
}

impl StabilityTable {
    pub fn all_stable(&self) -> bool {
        self.rows.iter().all(|r| r.stable)
    }

    pub fn failing(&self) -> Vec<&StabilityRow> {
        self.rows.iter().filter(|r| !r.stable).collect()
    }
}

pub fn stability_table(plant: &IntervalPlant, ctrl: &Controller, samples: &[UncertaintySample]) -> StabilityTable {
    let rows = samples
        .par_iter()
        .map(|s| {
            let abscissa = closed_loop_abscissa(plant, ctrl, s);
            StabilityRow {
                sample: s.label(),
                stable: abscissa < 0.0,
                abscissa,
            }
        })
        .collect();
    StabilityTable { rows }
}

/// `points` log-spaced frequencies strictly inside `(w1, w2)`; the band
/// edges sit one grid step outside.
pub fn log_grid(band: (f64, f64), points: usize) -> Vec<f64> {
    let (l1, l2) = (band.0.log10(), band.1.log10());
    let step = (l2 - l1) / (points + 1) as f64;
    (1..=points).map(|i| 10f64.powf(l1 + step * i as f64)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepKind {
    S,
    T,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub kind: SweepKind,
    pub band: (f64, f64),
    pub bound_db: f64,
    pub grid: Vec<f64>,
    /// `20 log10 |H(jω)|`, one row per sample.
    pub magnitudes_db: Vec<Vec<f64>>,
    pub sample_labels: Vec<String>,
    /// `min (bound_db - magnitude_db)` over grid and samples.
    pub worst_margin_db: f64,
    pub worst_sample: String,
    pub worst_omega: f64,
    /// `max |S + T - 1|` over every evaluated point.
    pub complementarity_error: f64,
    pub pass: bool,
    pub cause: Option<String>,
}

impl SweepReport {
    /// Per-frequency `(min, max)` over samples.
    pub fn envelope(&self) -> Vec<(f64, f64)> {
        (0..self.grid.len())
            .map(|j| {
                self.magnitudes_db
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), row| {
                        (lo.min(row[j]), hi.max(row[j]))
                    })
            })
            .collect()
    }
}

/// Sweeps `|S|` or `|T|` through the constructed realizations with each
/// sample's uncertainty rows added to `C`.
#[allow(clippy::too_many_arguments)]
pub fn sweep_sensitivity(
    plant: &IntervalPlant,
    ctrl: &Controller,
    dc: &Polynomial,
    samples: &[UncertaintySample],
    band: (f64, f64),
    bound_db: f64,
    kind: SweepKind,
    grid_points: usize,
) -> Result<SweepReport> {
    if !(band.0 > 0.0 && band.0 < band.1 && band.1.is_finite()) {
        return Err(Error::InvalidFrequency(format!("band {band:?}")));
    }
    let sys = build_constructed_systems(plant, ctrl, dc)?;
    let grid = log_grid(band, grid_points);
    let rows = samples
        .par_iter()
        .map(|s| sample_sweep(&sys, s, &grid, kind))
        .collect::<Result<Vec<_>>>()?;

    let mut worst = (f64::INFINITY, String::new(), f64::NAN);
    let mut comp_err: f64 = 0.0;
    let mut magnitudes_db = Vec::with_capacity(rows.len());
    for (s, (mags, err)) in samples.iter().zip(rows) {
        comp_err = comp_err.max(err);
        for (j, m) in mags.iter().enumerate() {
            let margin = bound_db - m;
            if margin < worst.0 {
                worst = (margin, s.label(), grid[j]);
            }
        }
        magnitudes_db.push(mags);
    }
    let unstable: Vec<String> = samples
        .iter()
        .filter(|s| !closed_loop_stable(plant, ctrl, s))
        .map(UncertaintySample::label)
        .collect();
    let cause = (!unstable.is_empty()).then(|| format!("unstable samples: {}", unstable.join(", ")));
    Ok(SweepReport {
        kind,
        band,
        bound_db,
        grid,
        magnitudes_db,
        sample_labels: samples.iter().map(UncertaintySample::label).collect(),
        worst_margin_db: worst.0,
        worst_sample: worst.1,
        worst_omega: worst.2,
        complementarity_error: comp_err,
        pass: worst.0 > 0.0 && cause.is_none(),
        cause,
    })
}

fn sample_sweep(
    sys: &ConstructedSystems,
    s: &UncertaintySample,
    grid: &[f64],
    kind: SweepKind,
) -> Result<(Vec<f64>, f64)> {
    let mut mags = Vec::with_capacity(grid.len());
    let mut err: f64 = 0.0;
    for &w in grid {
        let (sv, tv) = sys.sensitivities(&s.delta_a, &s.delta_b, w)?;
        err = err.max((sv + tv - 1.0).norm());
        let h = match kind {
            SweepKind::S => sv,
            SweepKind::T => tv,
        };
        mags.push(20.0 * h.norm().log10());
    }
    Ok((mags, err))
}

#[derive(Debug, Clone, Serialize)]
pub struct GainBoundReport {
    pub points: usize,
    pub disagreements: usize,
    /// `|N/D| < γ` everywhere on the grid.
    pub bounded_real: bool,
    /// `Re((D - N/γ) / (D + N/γ)) > 0` everywhere on the grid.
    pub positive_real: bool,
}

impl GainBoundReport {
    pub fn agree(&self) -> bool {
        self.disagreements == 0
    }
}

/// Pointwise comparison of the gain bound `|N/D| < γ` with the positive-real
/// verdict on the transformed ratio.
pub fn gain_bound_transform_check(
    n: &Polynomial,
    d: &Polynomial,
    gamma: f64,
    band: (f64, f64),
    grid_points: usize,
) -> Result<GainBoundReport> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidBound(format!("gamma = {gamma}")));
    }
    let grid = log_grid(band, grid_points);
    let mut report = GainBoundReport {
        points: grid.len(),
        disagreements: 0,
        bounded_real: true,
        positive_real: true,
    };
    for w in grid {
        let s = Complex64::new(0.0, w);
        let nv = n.eval(s);
        let dv = d.eval(s);
        if dv.norm() == 0.0 {
            return Err(Error::Singular(w));
        }
        let sbr = (nv / dv).norm() < gamma;
        let spr = ((dv - nv / gamma) / (dv + nv / gamma)).re > 0.0;
        report.bounded_real &= sbr;
        report.positive_real &= spr;
        if sbr != spr {
            report.disagreements += 1;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct StepTrace {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    /// Internal integration step.
    pub h: f64,
}

impl StepTrace {
    pub fn final_value(&self) -> f64 {
        *self.y.last().unwrap_or(&f64::NAN)
    }
}

/// Unit-step response of `T = b y / (a x + b y)` at one sample, fixed-step
/// RK4 on the canonical realization, output every `dt`.
pub fn step_response(
    plant: &IntervalPlant,
    ctrl: &Controller,
    sample: &UncertaintySample,
    t_end: f64,
    dt: f64,
) -> Result<StepTrace> {
    if !(dt > 0.0 && t_end > 0.0 && dt.is_finite() && t_end.is_finite()) {
        return Err(Error::Problem(format!("t_end = {t_end}, dt = {dt}")));
    }
    let abscissa = closed_loop_abscissa(plant, ctrl, sample);
    if abscissa >= 0.0 {
        return Err(Error::Unstable(format!(
            "{}: closed-loop spectral abscissa {abscissa:e}",
            sample.label()
        )));
    }
    let (_, b) = plant.sample(&sample.delta_a, &sample.delta_b);
    let by = convolve_slices(b.coeffs(), &ctrl.y);
    let den = characteristic(plant, ctrl, sample);
    let ss = realize_canonical(&Polynomial::new(by), &den)?;

    let fastest =
        ss.a.clone()
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
    let mut h = dt.min(1e-3);
    if fastest > 0.0 {
        h = h.min(1.0 / fastest / 50.0);
    }
    let sub = (dt / h).ceil() as usize;
    let h = dt / sub as f64;

    let k = ss.order();
    let f = |x: &DVector<f64>| &ss.a * x + &ss.b;
    let mut x = DVector::<f64>::zeros(k);
    let steps = (t_end / dt).round() as usize;
    let mut t = Vec::with_capacity(steps + 1);
    let mut y = Vec::with_capacity(steps + 1);
    let out = |x: &DVector<f64>| ss.c.dot(&x.transpose()) + ss.d;
    t.push(0.0);
    y.push(out(&x));
    for i in 1..=steps {
        for _ in 0..sub {
            let k1 = f(&x);
            let k2 = f(&(&x + &k1 * (0.5 * h)));
            let k3 = f(&(&x + &k2 * (0.5 * h)));
            let k4 = f(&(&x + &k3 * h));
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        t.push(i as f64 * dt);
        y.push(out(&x));
    }
    Ok(StepTrace { t, y, h })
}

/// Worst eigenvalue of one certified inequality re-evaluated at concrete
/// uncertainty values.
#[derive(Debug, Clone, Serialize)]
pub struct SoundnessEntry {
    pub lmi: String,
    /// Largest eigenvalue of the certified LMI itself.
    pub certified_max_eigenvalue: f64,
    /// Largest eigenvalue of the uncertain inequality over all samples.
    pub worst_max_eigenvalue: f64,
    pub worst_sample: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SoundnessReport {
    pub entries: Vec<SoundnessEntry>,
    pub samples: usize,
}

/// Allowed excess of the uncertain inequality over the certified bound.
pub const SOUNDNESS_TOL: f64 = 1e-9;

impl SoundnessReport {
    /// Every uncertain inequality is negative definite and no worse than its
    /// certified LMI.
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| {
            e.worst_max_eigenvalue < 0.0 && e.worst_max_eigenvalue <= e.certified_max_eigenvalue + SOUNDNESS_TOL
        })
    }
}

fn block_value(cert: &GroupCertificate, name: &str) -> Result<DMatrix<Complex64>> {
    let vars = &cert.problem.variables;
    let id = vars
        .find(name)
        .ok_or_else(|| Error::Problem(format!("certificate has no block {name}")))?;
    Ok(vars.value(id, &cert.outcome.assignment))
}

fn diag_of(m: &DMatrix<Complex64>) -> Vec<f64> {
    m.diagonal().iter().map(|z| z.re).collect()
}

fn hermitian_max_eig(m: &DMatrix<Complex64>) -> f64 {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    h.symmetric_eigenvalues().max()
}

/// `[[AᵀP + PA, PB - cᵀ], [BᵀP - c, -2d]]`
fn kyp_matrix(sys: &ConstructedSystems, p: &DMatrix<Complex64>, c: &[f64], d: f64) -> DMatrix<Complex64> {
    let k = sys.gs.a.nrows();
    let a = sys.gs.a.map(|v| Complex64::new(v, 0.0));
    let b = DMatrix::from_fn(k, 1, |i, _| Complex64::new(sys.gs.b[i], 0.0));
    let mut m = DMatrix::zeros(k + 1, k + 1);
    m.view_mut((0, 0), (k, k)).copy_from(&(a.transpose() * p + p * &a));
    let pb = p * &b;
    for i in 0..k {
        m[(i, k)] = pb[(i, 0)] - c[i];
        m[(k, i)] = pb[(i, 0)].conj() - c[i];
    }
    m[(k, k)] = Complex64::new(-2.0 * d, 0.0);
    m
}

/// `[[A B],[I 0]]^H (Φ⊗P + Ψ⊗Q) [[A B],[I 0]] - [[0, cᵀ], [c, 2d]]`
fn gkyp_matrix(
    sys: &ConstructedSystems,
    range: &FrequencyRange,
    p: &DMatrix<Complex64>,
    q: &DMatrix<Complex64>,
    c: &[f64],
    d: f64,
) -> DMatrix<Complex64> {
    let k = sys.gs.a.nrows();
    let mut xi = DMatrix::<Complex64>::zeros(2 * k, 2 * k);
    for bi in 0..2 {
        for bj in 0..2 {
            let blk = p * Complex64::new(range.phi[(bi, bj)], 0.0) + q * range.psi[(bi, bj)];
            xi.view_mut((bi * k, bj * k), (k, k)).copy_from(&blk);
        }
    }
    let mut lam = DMatrix::<Complex64>::zeros(2 * k, k + 1);
    for i in 0..k {
        for j in 0..k {
            lam[(i, j)] = Complex64::new(sys.gs.a[(i, j)], 0.0);
        }
        lam[(i, k)] = Complex64::new(sys.gs.b[i], 0.0);
        lam[(k + i, i)] = Complex64::new(1.0, 0.0);
    }
    let mut m = lam.adjoint() * xi * lam;
    for i in 0..k {
        m[(i, k)] -= c[i];
        m[(k, i)] -= c[i];
    }
    m[(k, k)] -= 2.0 * d;
    m
}

/// Evaluates the uncertain KYP / GKYP inequalities that the certificate's
/// LMIs are meant to imply, at each sample, for a fixed controller.
pub fn certificate_soundness(
    spec: &SynthesisSpec,
    ctrl: &Controller,
    cert: &GroupCertificate,
    samples: &[UncertaintySample],
) -> Result<SoundnessReport> {
    let sys = build_constructed_systems(&spec.plant, ctrl, &spec.dc)?;
    let certified = |name: &str| {
        cert.outcome
            .report
            .lmis
            .iter()
            .find(|l| l.name == name)
            .map(|l| l.max_eigenvalue)
            .unwrap_or(f64::NAN)
    };
    let mut entries = Vec::new();
    for group in &cert.groups {
        match group {
            Group::Stability => {
                let p = block_value(cert, "P_s")?;
                let worst = worst_over(samples, |s| {
                    let c = row_vec(&sys.gs.c, &sys.perturbation(Constructed::S, &s.delta_a, &s.delta_b));
                    hermitian_max_eig(&kyp_matrix(&sys, &p, &c, sys.gs.d))
                });
                entries.push(SoundnessEntry {
                    lmi: "stability".into(),
                    certified_max_eigenvalue: certified("stability"),
                    worst_max_eigenvalue: worst.0,
                    worst_sample: worst.1,
                });
            }
            Group::Sensitivity | Group::CompSensitivity => {
                let (perf, other, letter, tag) = if *group == Group::Sensitivity {
                    (spec.sensitivity.as_ref(), Constructed::P, 'p', "sensitivity")
                } else {
                    (spec.comp_sensitivity.as_ref(), Constructed::Q, 'q', "comp_sensitivity")
                };
                let perf = perf.ok_or_else(|| Error::Problem(format!("no {tag} spec")))?;
                let p = block_value(cert, &format!("P_{letter}"))?;
                let q = block_value(cert, &format!("Q_{letter}"))?;
                let other_sys = sys.system(other);
                for (sign, suffix) in [(1.0, "+"), (-1.0, "-")] {
                    let k = sign / perf.rho;
                    let d = sys.gs.d + k * other_sys.d;
                    let worst = worst_over(samples, |s| {
                        let cs = row_vec(&sys.gs.c, &sys.perturbation(Constructed::S, &s.delta_a, &s.delta_b));
                        let co = row_vec(&other_sys.c, &sys.perturbation(other, &s.delta_a, &s.delta_b));
                        let c: Vec<f64> = cs.iter().zip(&co).map(|(x, y)| x + k * y).collect();
                        hermitian_max_eig(&gkyp_matrix(&sys, &perf.range, &p, &q, &c, d))
                    });
                    let name = format!("{tag}{suffix}");
                    entries.push(SoundnessEntry {
                        certified_max_eigenvalue: certified(&name),
                        lmi: name,
                        worst_max_eigenvalue: worst.0,
                        worst_sample: worst.1,
                    });
                }
            }
        }
    }
    Ok(SoundnessReport {
        entries,
        samples: samples.len(),
    })
}

fn row_vec(base: &nalgebra::RowDVector<f64>, delta: &nalgebra::RowDVector<f64>) -> Vec<f64> {
    base.iter().zip(delta.iter()).map(|(a, b)| a + b).collect()
}

fn worst_over(samples: &[UncertaintySample], f: impl Fn(&UncertaintySample) -> f64 + Sync) -> (f64, String) {
    samples
        .par_iter()
        .map(|s| (f(s), s.label()))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(
            (f64::NEG_INFINITY, String::new()),
            |acc, x| if x.0 > acc.0 { x } else { acc },
        )
}

/// Diagonal multipliers in a certificate, by block name.
pub fn certificate_multipliers(cert: &GroupCertificate) -> Vec<(String, Vec<f64>)> {
    let vars = &cert.problem.variables;
    vars.blocks()
        .iter()
        .filter(|b| matches!(b.kind, VarKind::DiagonalPositive(_)))
        .filter_map(|b| block_value(cert, &b.name).ok().map(|m| (b.name.clone(), diag_of(&m))))
        .collect()
}

pub fn write_bode_csv(path: &Path, report: &SweepReport) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "omega,min_db,max_db,bound_db")?;
    for (w, (lo, hi)) in report.grid.iter().zip(report.envelope()) {
        writeln!(f, "{w:.12e},{lo:.12e},{hi:.12e},{:.12e}", report.bound_db)?;
    }
    f.flush()?;
    Ok(())
}

pub fn write_step_csv(path: &Path, trace: &StepTrace) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "t,y")?;
    for (t, y) in trace.t.iter().zip(&trace.y) {
        writeln!(f, "{t:.9e},{y:.12e}")?;
    }
    f.flush()?;
    Ok(())
}

pub fn write_stability_csv(path: &Path, table: &StabilityTable) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "sample,stable,abscissa")?;
    for r in &table.rows {
        writeln!(f, "{},{},{:.12e}", r.sample, r.stable, r.abscissa)?;
    }
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmi::RangeKind;
    use crate::poly::PinMask;
    use crate::synth::{check_controller, synthesize, PerfSpec};

    fn plant() -> IntervalPlant {
        IntervalPlant::from_bounds(&[[0.5, 1.0], [-1.0, 1.0]], &[[0.5, 1.0], [1.0, 1.5]]).unwrap()
    }

    fn dc() -> Polynomial {
        Polynomial::new(vec![1.0, 4.5, 6.225, 4.525, 1.5])
    }

    fn reference() -> Controller {
        Controller::from_free(&[0.8213, 0.0], &[20.0270, 18.3422, 18.4318]).unwrap()
    }

    fn spec() -> SynthesisSpec {
        let mut pins = PinMask::free(2);
        pins.set("x2", 0.0).unwrap();
        SynthesisSpec {
            plant: plant(),
            order: 2,
            dc: dc(),
            sensitivity: Some(PerfSpec::from_db(-3.0, (0.01, 0.1), RangeKind::Middle).unwrap()),
            comp_sensitivity: Some(PerfSpec::from_db(-3.0, (50.0, 100.0), RangeKind::Middle).unwrap()),
            pins,
        }
    }

    fn sampled_plant_sample() -> UncertaintySample {
        let (da, db) = plant().deltas_for(&[0.7863, 0.4128], &[0.6132, 1.4309]).unwrap();
        UncertaintySample {
            delta_a: da,
            delta_b: db,
            provenance: Provenance::Random { seed: 0, index: 0 },
        }
    }

    #[test]
    fn vertex_enumeration() {
        let v = vertices(2);
        assert_eq!(v.len(), 16);
        assert_eq!(v[0].delta_a, vec![-1.0, -1.0]);
        assert_eq!(v[15].delta_b, vec![1.0, 1.0]);
        let mut seen: Vec<_> = v.iter().map(|s| (s.delta_a.clone(), s.delta_b.clone())).collect();
        seen.sort_by(|a, b| a.partial_cmp(b).unwrap());
        seen.dedup();
        assert_eq!(seen.len(), 16);
    }

    #[test]
    fn random_samples_are_seeded_and_bounded() {
        let a = random_samples(2, 50, 7);
        let b = random_samples(2, 50, 7);
        let c = random_samples(2, 50, 8);
        assert_eq!(a, b);
        assert_ne!(a[0].delta_a, c[0].delta_a);
        assert!(a
            .iter()
            .flat_map(|s| s.delta_a.iter().chain(&s.delta_b))
            .all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn reference_controller_stabilizes_sampled_plant_and_vertices() {
        assert!(closed_loop_stable(&plant(), &reference(), &sampled_plant_sample()));
        let table = stability_table(&plant(), &reference(), &vertices(2));
        assert!(table.all_stable());
    }

    #[test]
    fn open_loop_unstable_vertex_without_feedback() {
        let ctrl = Controller::from_free(&[1.0, 1.0], &[0.0, 0.0, 0.0]).unwrap();
        // a2 = -1 vertex: s^2 + a1 s - 1 has a positive root
        let s = UncertaintySample {
            delta_a: vec![1.0, -1.0],
            delta_b: vec![0.0, 0.0],
            provenance: Provenance::Vertex { index: 0 },
        };
        assert!(!closed_loop_stable(&plant(), &ctrl, &s));
    }

    #[test]
    fn grid_excludes_band_edges() {
        let g = log_grid((0.01, 0.1), 400);
        assert_eq!(g.len(), 400);
        assert!(g[0] > 0.01 && g[399] < 0.1);
        let ratio = g[1] / g[0];
        assert!((g[0] / 0.01 - ratio).abs() < 1e-9);
        assert!((0.1 / g[399] - ratio).abs() < 1e-9);
    }

    #[test]
    fn reference_sweeps_pass() {
        let samples = sampling_plan(&plant(), 200, DEFAULT_SEED);
        let s = sweep_sensitivity(
            &plant(),
            &reference(),
            &dc(),
            &samples,
            (0.01, 0.1),
            -3.0,
            SweepKind::S,
            400,
        )
        .unwrap();
        assert!(s.pass, "S worst margin {}", s.worst_margin_db);
        let t = sweep_sensitivity(
            &plant(),
            &reference(),
            &dc(),
            &samples,
            (50.0, 100.0),
            -3.0,
            SweepKind::T,
            400,
        )
        .unwrap();
        assert!(t.pass, "T worst margin {}", t.worst_margin_db);
        assert!(s.complementarity_error < 1e-8 && t.complementarity_error < 1e-8);
    }

    #[test]
    fn impossible_bound_fails() {
        let samples = vertices(2);
        let s = sweep_sensitivity(
            &plant(),
            &reference(),
            &dc(),
            &samples,
            (0.01, 0.1),
            -300.0,
            SweepKind::S,
            50,
        )
        .unwrap();
        assert!(!s.pass);
        assert!(s.worst_margin_db < 0.0);
    }

    #[test]
    fn sweep_reports_are_reproducible() {
        let run = || {
            let samples = sampling_plan(&plant(), 30, 9);
            let r = sweep_sensitivity(
                &plant(),
                &reference(),
                &dc(),
                &samples,
                (0.01, 0.1),
                -3.0,
                SweepKind::S,
                40,
            )
            .unwrap();
            serde_json::to_vec(&r).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn certain_plant_envelope_collapses() {
        let p = IntervalPlant::nominal(&[0.75, 0.0], &[0.75, 1.25]).unwrap();
        let samples = sampling_plan(&p, 5, 1);
        let r = sweep_sensitivity(&p, &reference(), &dc(), &samples, (0.01, 0.1), -3.0, SweepKind::S, 20).unwrap();
        for (lo, hi) in r.envelope() {
            assert!((hi - lo).abs() < 1e-12);
        }
    }

    #[test]
    fn gain_bound_transform_examples() {
        let one = Polynomial::new(vec![1.0]);
        let s_plus_1 = Polynomial::new(vec![1.0, 1.0]);
        let r = gain_bound_transform_check(&one, &s_plus_1, 2.0, (0.1, 10.0), 400).unwrap();
        assert!(r.agree() && r.bounded_real && r.positive_real);
        let s = Polynomial::new(vec![1.0, 0.0]);
        let r = gain_bound_transform_check(&s, &s_plus_1, 0.5, (1.0, 10.0), 400).unwrap();
        assert!(r.agree() && !r.bounded_real && !r.positive_real);
    }

    #[test]
    fn step_settles_at_unity() {
        let tr = step_response(&plant(), &reference(), &sampled_plant_sample(), 40.0, 0.01).unwrap();
        assert!((tr.final_value() - 1.0).abs() < 1e-3, "{}", tr.final_value());
    }

    #[test]
    fn step_refinement_is_stable() {
        let a = step_response(&plant(), &reference(), &sampled_plant_sample(), 10.0, 0.02).unwrap();
        let b = step_response(&plant(), &reference(), &sampled_plant_sample(), 10.0, 0.01).unwrap();
        let sup =
            a.y.iter()
                .enumerate()
                .map(|(i, y)| (y - b.y[2 * i]).abs())
                .fold(0.0, f64::max);
        assert!(sup < 1e-6, "{sup}");
    }

    #[test]
    fn step_refuses_unstable_loop() {
        let bad = Controller::new(
            reference().x.clone(),
            reference().y.iter().map(|v| -100.0 * v).collect(),
        )
        .unwrap();
        let err = step_response(&plant(), &bad, &sampled_plant_sample(), 1.0, 0.01).unwrap_err();
        assert!(matches!(err, Error::Unstable(_)));
    }

    #[test]
    fn reference_certificates_are_sound() {
        let r = check_controller(&spec(), &reference()).unwrap();
        let mut samples = vertices(2);
        samples.extend(random_samples(2, 200, DEFAULT_SEED));
        for cert in &r.certificates {
            let rep = certificate_soundness(&spec(), &reference(), cert, &samples).unwrap();
            assert!(rep.passed(), "{:?}", rep.entries);
        }
    }

    #[test]
    fn synthesized_controller_passes_oracles() {
        let r = synthesize(&spec()).unwrap();
        let ctrl = r.controller.clone().unwrap();
        let samples = sampling_plan(&plant(), 1000, DEFAULT_SEED);
        assert!(stability_table(&plant(), &ctrl, &samples).all_stable());
        let s = sweep_sensitivity(&plant(), &ctrl, &dc(), &samples, (0.01, 0.1), -3.0, SweepKind::S, 400).unwrap();
        let t = sweep_sensitivity(&plant(), &ctrl, &dc(), &samples, (50.0, 100.0), -3.0, SweepKind::T, 400).unwrap();
        assert!(s.pass && t.pass, "{} {}", s.worst_margin_db, t.worst_margin_db);
        let rep = certificate_soundness(&spec(), &ctrl, &r.certificates[0], &samples[..216]).unwrap();
        assert!(rep.passed(), "{:?}", rep.entries);
    }

    #[test]
    fn csv_writers() {
        let dir = tempfile::tempdir().unwrap();
        let tr = step_response(&plant(), &reference(), &sampled_plant_sample(), 1.0, 0.1).unwrap();
        write_step_csv(&dir.path().join("step.csv"), &tr).unwrap();
        let text = std::fs::read_to_string(dir.path().join("step.csv")).unwrap();
        assert_eq!(text.lines().count(), 12);
        let table = stability_table(&plant(), &reference(), &vertices(2));
        write_stability_csv(&dir.path().join("stab.csv"), &table).unwrap();
        let text = std::fs::read_to_string(dir.path().join("stab.csv")).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("vertex-0,true,"));
    }
}
