//! Semidefinite feasibility over assembled LMIs.
//!
//! The problem handed to the conic backend is
//!
//! ```text
//! maximize    t
//! subject to  F_i(v) + (ε_i + t) I ≼ 0     for every LMI i
//!             r ≥ ε_diag                   for every diagonal-multiplier entry
//!             Q(v) ≽ floor · I             for every floored block
//!             t ≤ t_max
//! ```
//!
//! with `t` free below. A strictly positive optimum means the LMIs hold with
//! room to spare; a negative one means no assignment satisfies them.
//!
//! # Export format
//!
//! [`export_text`] writes a plain-text sparse listing:
//!
//! ```text
//! sdp <scalars> <lmis>
//! var <index> <name> <kind>
//! floor <block> <value>
//! lmi <name> <size> <margin>
//! <var|c> <row> <col> <value>      upper triangle, nonzeros only
//! end
//! ```
//!
//! `c` marks the constant block; `<var>` is a scalar index.

use std::fmt::Write as _;
use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lmi::{embed_matrix, AffineLmi, VarKind, VariableTable};

pub const T_MAX: f64 = 1.0;
pub const DIAG_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub variables: VariableTable,
    pub lmis: Vec<AffineLmi>,
    pub t_max: f64,
    pub diag_floor: f64,
}

impl SdpProblem {
    pub fn new(variables: VariableTable, lmis: Vec<AffineLmi>) -> Self {
        Self {
            variables,
            lmis,
            t_max: T_MAX,
            diag_floor: DIAG_FLOOR,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nv = self.variables.scalar_count();
        if self.diag_floor.is_nan() || self.diag_floor <= 0.0 {
            return Err(Error::Problem("diagonal floor must be positive".into()));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::Problem("t_max must be positive and finite".into()));
        }
        for lmi in &self.lmis {
            let d = lmi.size();
            if lmi.constant.ncols() != d {
                return Err(Error::Dimension(format!("LMI {} is not square", lmi.name)));
            }
            let mut seen = std::collections::BTreeSet::new();
            for (idx, m) in &lmi.terms {
                if *idx >= nv {
                    return Err(Error::Problem(format!(
                        "LMI {} references undeclared scalar {idx}",
                        lmi.name
                    )));
                }
                if !seen.insert(*idx) {
                    return Err(Error::Problem(format!("LMI {} repeats scalar {idx}", lmi.name)));
                }
                if m.shape() != (d, d) {
                    return Err(Error::Dimension(format!("LMI {} term {idx} has wrong shape", lmi.name)));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SdpStatus {
    Feasible,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverStats {
    pub backend: String,
    pub solver_status: String,
    pub iterations: u32,
    pub runtime_s: f64,
    /// Optimal `t` from the solver.
    pub t_star: f64,
    /// Dual upper bound on `t`.
    pub t_upper: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LmiCheck {
    pub name: String,
    pub size: usize,
    pub max_eigenvalue: f64,
}

/// Solver-independent eigenvalue report for an assignment.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub lmis: Vec<LmiCheck>,
    /// Smallest diagonal-multiplier entry (`+inf` when there are none).
    pub min_diagonal: f64,
    /// Smallest eigenvalue over floored blocks (`+inf` when there are none).
    pub min_floored_eigenvalue: f64,
}

impl CertificateReport {
    /// `min_i (-λ_max,i)`
    pub fn margin(&self) -> f64 {
        self.lmis
            .iter()
            .map(|c| -c.max_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn passed(&self) -> bool {
        self.lmis.iter().all(|c| c.max_eigenvalue < 0.0) && self.min_diagonal > 0.0 && self.min_floored_eigenvalue > 0.0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SdpOutcome {
    pub status: SdpStatus,
    pub assignment: Vec<f64>,
    pub achieved_margin: f64,
    pub stats: SolverStats,
    pub report: CertificateReport,
    pub message: String,
}

fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().max()
}

pub fn verify_certificate(problem: &SdpProblem, assignment: &[f64]) -> CertificateReport {
    let vars = &problem.variables;
    let lmis = problem
        .lmis
        .iter()
        .map(|l| LmiCheck {
            name: l.name.clone(),
            size: l.size(),
            max_eigenvalue: max_eigenvalue(&l.evaluate(assignment)),
        })
        .collect();
    let mut min_diagonal = f64::INFINITY;
    let mut min_floored = f64::INFINITY;
    for (i, blk) in vars.blocks().iter().enumerate() {
        let id = crate::lmi::BlockId(i);
        match blk.kind {
            VarKind::DiagonalPositive(n) => {
                for j in 0..n {
                    min_diagonal = min_diagonal.min(assignment[blk.offset + j]);
                }
            }
            VarKind::Symmetric(_) | VarKind::Hermitian(_) if blk.psd_floor.is_some() => {
                let value = vars.value(id, assignment);
                let real = embed_matrix(&value)
                    .map(|e| -max_eigenvalue(&-e))
                    .unwrap_or(f64::NEG_INFINITY);
                min_floored = min_floored.min(real);
            }
            _ => {}
        }
    }
    CertificateReport {
        lmis,
        min_diagonal,
        min_floored_eigenvalue: min_floored,
    }
}

/// Cone blocks of a conic program, in row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    Zero(usize),
    Nonneg(usize),
    /// Upper-triangle column-major `svec` of a `d x d` matrix, off-diagonals
    /// scaled by `√2`.
    Psd(usize),
}

impl Cone {
    pub fn rows(&self) -> usize {
        match *self {
            Cone::Zero(n) | Cone::Nonneg(n) => n,
            Cone::Psd(d) => d * (d + 1) / 2,
        }
    }
}

/// `minimize cᵀz  s.t.  A z + s = b,  s ∈ K`, with `A` as triplets.
#[derive(Debug, Clone, Default)]
pub struct ConicProgram {
    pub num_vars: usize,
    pub c: Vec<f64>,
    pub a_rows: Vec<usize>,
    pub a_cols: Vec<usize>,
    pub a_vals: Vec<f64>,
    pub b: Vec<f64>,
    pub cones: Vec<Cone>,
}

impl ConicProgram {
    fn push(&mut self, row: usize, col: usize, v: f64) {
        if v != 0.0 {
            self.a_rows.push(row);
            self.a_cols.push(col);
            self.a_vals.push(v);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendStatus {
    Solved,
    PrimalInfeasible,
    DualInfeasible,
    Stalled,
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: BackendStatus,
    pub raw_status: String,
    pub z: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub iterations: u32,
    pub runtime_s: f64,
}

/// Any interior-point conic solver supporting zero, nonnegative and PSD cones.
pub trait ConicBackend {
    fn name(&self) -> &str;
    fn solve(&self, program: &ConicProgram) -> Result<ConicSolution>;
}

#[derive(Debug, Clone)]
pub struct ClarabelBackend {
    pub max_iter: u32,
    pub verbose: bool,
}

impl Default for ClarabelBackend {
    fn default() -> Self {
        Self {
            max_iter: 200,
            verbose: false,
        }
    }
}

impl ConicBackend for ClarabelBackend {
    fn name(&self) -> &str {
        "clarabel"
    }

    fn solve(&self, program: &ConicProgram) -> Result<ConicSolution> {
        let m = program.b.len();
        let n = program.num_vars;
        let a = CscMatrix::new_from_triplets(
            m,
            n,
            program.a_rows.clone(),
            program.a_cols.clone(),
            program.a_vals.clone(),
        );
        let p = CscMatrix::zeros((n, n));
        let cones: Vec<SupportedConeT<f64>> = program
            .cones
            .iter()
            .map(|c| match *c {
                Cone::Zero(k) => SupportedConeT::ZeroConeT(k),
                Cone::Nonneg(k) => SupportedConeT::NonnegativeConeT(k),
                Cone::Psd(d) => SupportedConeT::PSDTriangleConeT(d),
            })
            .collect();
        let settings = DefaultSettings {
            verbose: self.verbose,
            max_iter: self.max_iter,
            max_threads: 1,
            ..DefaultSettings::default()
        };
        let start = Instant::now();
        let mut solver = DefaultSolver::new(&p, &program.c, &a, &program.b, &cones, settings)
            .map_err(|e| Error::Solver(format!("{e:?}")))?;
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => BackendStatus::Solved,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => BackendStatus::PrimalInfeasible,
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => BackendStatus::DualInfeasible,
            _ => BackendStatus::Stalled,
        };
        Ok(ConicSolution {
            status,
            raw_status: format!("{:?}", sol.status),
            z: sol.x.clone(),
            primal_objective: sol.obj_val,
            dual_objective: sol.obj_val_dual,
            iterations: sol.iterations,
            runtime_s: start.elapsed().as_secs_f64(),
        })
    }
}

fn svec_index(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    j * (j + 1) / 2 + i
}

fn svec_weight(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        std::f64::consts::SQRT_2
    }
}

/// Upper-triangle column-major `svec` with `√2` off-diagonal scaling.
pub fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let d = m.nrows();
    let mut out = Vec::with_capacity(d * (d + 1) / 2);
    for j in 0..d {
        for i in 0..=j {
            out.push(m[(i, j)] * svec_weight(i, j));
        }
    }
    out
}

/// Conic form of an SDP problem; the last variable is `t`.
pub fn to_conic(problem: &SdpProblem) -> ConicProgram {
    let nv = problem.variables.scalar_count();
    let t = nv;
    let mut prog = ConicProgram {
        num_vars: nv + 1,
        c: vec![0.0; nv + 1],
        ..ConicProgram::default()
    };
    prog.c[t] = -1.0;

    // nonnegative block: diagonal floors, then t <= t_max
    let positive = problem.variables.positive_scalars();
    for (row, &idx) in positive.iter().enumerate() {
        prog.push(row, idx, -1.0);
        prog.b.push(-problem.diag_floor);
    }
    prog.push(positive.len(), t, 1.0);
    prog.b.push(problem.t_max);
    prog.cones.push(Cone::Nonneg(positive.len() + 1));

    for lmi in &problem.lmis {
        let d = lmi.size();
        let row0 = prog.b.len();
        let shifted = -&lmi.constant - DMatrix::identity(d, d) * lmi.margin;
        prog.b.extend(svec(&shifted));
        for (idx, f) in &lmi.terms {
            for j in 0..d {
                for i in 0..=j {
                    prog.push(row0 + svec_index(i, j), *idx, f[(i, j)] * svec_weight(i, j));
                }
            }
        }
        for i in 0..d {
            prog.push(row0 + svec_index(i, i), t, 1.0);
        }
        prog.cones.push(Cone::Psd(d));
    }

    // floored blocks: M(v) - floor I ≽ 0, real-embedded when Hermitian
    let vars = &problem.variables;
    for blk in vars.blocks() {
        let Some(floor) = blk.psd_floor else { continue };
        let k = blk.kind.dim();
        let hermitian = matches!(blk.kind, VarKind::Hermitian(_));
        let d = if hermitian { 2 * k } else { k };
        let row0 = prog.b.len();
        prog.b.extend(svec(&(DMatrix::identity(d, d) * -floor)));
        for s in 0..blk.kind.scalar_count() {
            let mut unit = vec![0.0; vars.scalar_count()];
            unit[blk.offset + s] = 1.0;
            let id = vars.find(&blk.name).expect("declared block");
            let value = vars.value(id, &unit);
            let m = if hermitian {
                embed_matrix(&value).expect("Hermitian by construction")
            } else {
                value.map(|z| z.re)
            };
            for j in 0..d {
                for i in 0..=j {
                    prog.push(row0 + svec_index(i, j), blk.offset + s, -m[(i, j)] * svec_weight(i, j));
                }
            }
        }
        prog.cones.push(Cone::Psd(d));
    }
    prog
}

pub fn solve(problem: &SdpProblem) -> Result<SdpOutcome> {
    solve_with(problem, &ClarabelBackend::default())
}

/// Solves and gates the result on an independent eigenvalue re-check.
pub fn solve_with(problem: &SdpProblem, backend: &dyn ConicBackend) -> Result<SdpOutcome> {
    problem.validate()?;
    let prog = to_conic(problem);
    let sol = backend.solve(&prog)?;
    let nv = problem.variables.scalar_count();
    let (mut assignment, t_star) = if sol.z.len() == nv + 1 {
        (sol.z[..nv].to_vec(), sol.z[nv])
    } else {
        (vec![0.0; nv], f64::NAN)
    };
    // interior-point iterates honour the floor only to solver tolerance
    for idx in problem.variables.positive_scalars() {
        assignment[idx] = assignment[idx].max(problem.diag_floor);
    }
    let report = verify_certificate(problem, &assignment);
    let stats = SolverStats {
        backend: backend.name().to_string(),
        solver_status: sol.raw_status.clone(),
        iterations: sol.iterations,
        runtime_s: sol.runtime_s,
        t_star,
        t_upper: -sol.dual_objective,
    };
    let verified = report.passed() && assignment.iter().all(|v| v.is_finite());
    let (status, message) = match sol.status {
        _ if t_star >= 0.0 && verified => (SdpStatus::Feasible, "certificate verified".to_string()),
        BackendStatus::Solved if t_star >= 0.0 => (
            SdpStatus::NumericalFailure,
            format!("solver margin {t_star:e} but eigenvalue re-check failed"),
        ),
        BackendStatus::Solved if stats.t_upper < 0.0 => (
            SdpStatus::Infeasible,
            format!("best margin {t_star:e}, dual bound {:e}", stats.t_upper),
        ),
        BackendStatus::Solved => (
            SdpStatus::NumericalFailure,
            format!(
                "margin {t_star:e} indistinguishable from zero (dual bound {:e})",
                stats.t_upper
            ),
        ),
        _ => (
            SdpStatus::NumericalFailure,
            format!("solver stopped with {}", sol.raw_status),
        ),
    };
    Ok(SdpOutcome {
        status,
        achieved_margin: report.margin(),
        assignment,
        stats,
        report,
        message,
    })
}

pub fn export_text(problem: &SdpProblem) -> String {
    let vars = &problem.variables;
    let mut s = String::new();
    let _ = writeln!(s, "sdp {} {}", vars.scalar_count(), problem.lmis.len());
    for idx in 0..vars.scalar_count() {
        let kind = vars.block_of(idx).map_or("scalar", |b| b.kind.tag());
        let _ = writeln!(s, "var {idx} {} {kind}", vars.scalar_name(idx));
    }
    for blk in vars.blocks() {
        if let Some(f) = blk.psd_floor {
            let _ = writeln!(s, "floor {} {f:e}", blk.name);
        }
    }
    let triplets = |s: &mut String, tag: &str, m: &DMatrix<f64>| {
        for j in 0..m.ncols() {
            for i in 0..=j {
                if m[(i, j)] != 0.0 {
                    let _ = writeln!(s, "{tag} {i} {j} {:.17e}", m[(i, j)]);
                }
            }
        }
    };
    for lmi in &problem.lmis {
        let _ = writeln!(s, "lmi {} {} {:e}", lmi.name, lmi.size(), lmi.margin);
        triplets(&mut s, "c", &lmi.constant);
        for (idx, m) in &lmi.terms {
            triplets(&mut s, &idx.to_string(), m);
        }
        let _ = writeln!(s, "end");
    }
    s
}
