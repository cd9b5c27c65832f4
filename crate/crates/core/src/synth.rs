//! End-to-end synthesis: free controller coefficients, all enabled LMIs, one
//! joint SDP solve. Also audits fixed controllers one LMI group at a time.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lmi::{
    assemble_comp_sensitivity_lmis, assemble_sensitivity_lmis, assemble_stability_lmi, db_to_linear, AffineSystems,
    ControllerVars, FrequencyRange, RangeKind, VarKind, VariableTable,
};
use crate::poly::{is_strictly_hurwitz, nominal_characteristic, Controller, IntervalPlant, PinMask, Polynomial};
use crate::sdp::{self, CertificateReport, SdpOutcome, SdpProblem, SdpStatus};

/// A bound `|H(jω)| < ρ` on a frequency band.
#[derive(Debug, Clone, PartialEq)]
pub struct PerfSpec {
    pub rho: f64,
    pub band: (f64, f64),
    pub range: FrequencyRange,
}

impl PerfSpec {
    pub fn new(rho: f64, band: (f64, f64), kind: RangeKind) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::InvalidBound(format!("rho = {rho} must be positive and finite")));
        }
        Ok(Self {
            rho,
            band,
            range: FrequencyRange::from_band(kind, band)?,
        })
    }

    pub fn from_db(bound_db: f64, band: (f64, f64), kind: RangeKind) -> Result<Self> {
        if !bound_db.is_finite() {
            return Err(Error::InvalidBound(format!("bound {bound_db} dB")));
        }
        Self::new(db_to_linear(bound_db), band, kind)
    }

    pub fn bound_db(&self) -> f64 {
        20.0 * self.rho.log10()
    }
}

#[derive(Debug, Clone)]
pub struct SynthesisSpec {
    pub plant: IntervalPlant,
    pub order: usize,
    pub dc: Polynomial,
    pub sensitivity: Option<PerfSpec>,
    pub comp_sensitivity: Option<PerfSpec>,
    pub pins: PinMask,
}

impl SynthesisSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.plant.order();
        if self.pins.order() != self.order || self.pins.y.len() != self.order + 1 {
            return Err(Error::Dimension(format!(
                "pin mask does not match controller order {}",
                self.order
            )));
        }
        if self.dc.degree() != self.order + n {
            return Err(Error::Dimension(format!(
                "d_c has degree {} but m + n = {}",
                self.dc.degree(),
                self.order + n
            )));
        }
        if !self.dc.is_monic() {
            return Err(Error::DegenerateInput("d_c must be monic".into()));
        }
        if !is_strictly_hurwitz(&self.dc)? {
            return Err(Error::NotHurwitz(format!("d_c = {:?}", self.dc.coeffs())));
        }
        Ok(())
    }

    /// Enabled LMI groups in triage order.
    pub fn groups(&self) -> Vec<Group> {
        let mut g = vec![Group::Stability];
        if self.sensitivity.is_some() {
            g.push(Group::Sensitivity);
        }
        if self.comp_sensitivity.is_some() {
            g.push(Group::CompSensitivity);
        }
        g
    }
}

/// `d_c` taken as the nominal closed-loop characteristic polynomial of a
/// baseline controller.
pub fn dc_from_baseline(plant: &IntervalPlant, baseline: &Controller) -> Result<Polynomial> {
    let dc = nominal_characteristic(plant, baseline);
    let lead = dc.leading();
    if lead == 0.0 {
        return Err(Error::DegenerateInput(
            "baseline characteristic polynomial has zero leading coefficient".into(),
        ));
    }
    let dc = dc.scale(1.0 / lead);
    if !is_strictly_hurwitz(&dc)? {
        return Err(Error::NotHurwitz(
            "baseline controller does not stabilize the nominal plant".into(),
        ));
    }
    Ok(dc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Stability,
    Sensitivity,
    CompSensitivity,
}

impl Group {
    pub fn tag(&self) -> &'static str {
        match self {
            Group::Stability => "stability",
            Group::Sensitivity => "sensitivity",
            Group::CompSensitivity => "comp_sensitivity",
        }
    }
}

/// One solved SDP together with the problem it certifies.
#[derive(Debug, Clone)]
pub struct GroupCertificate {
    pub groups: Vec<Group>,
    pub problem: SdpProblem,
    pub outcome: SdpOutcome,
}

impl GroupCertificate {
    pub fn label(&self) -> String {
        self.groups.iter().map(Group::tag).collect::<Vec<_>>().join("+")
    }

    pub fn blocks(&self) -> Vec<CertificateBlock> {
        certificate_blocks(&self.problem.variables, &self.outcome.assignment)
    }
}

/// Value of one declared variable block.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateBlock {
    pub name: String,
    pub kind: &'static str,
    pub re: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

pub fn certificate_blocks(vars: &VariableTable, values: &[f64]) -> Vec<CertificateBlock> {
    vars.blocks()
        .iter()
        .enumerate()
        .map(|(i, blk)| {
            let m = vars.value(crate::lmi::BlockId(i), values);
            let rows = |f: &dyn Fn(num_complex::Complex64) -> f64| {
                (0..m.nrows())
                    .map(|r| (0..m.ncols()).map(|c| f(m[(r, c)])).collect())
                    .collect()
            };
            CertificateBlock {
                name: blk.name.clone(),
                kind: blk.kind.tag(),
                re: rows(&|z| z.re),
                im: matches!(blk.kind, VarKind::Hermitian(_)).then(|| rows(&|z| z.im)),
            }
        })
        .collect()
}

/// Feasibility of a subset of groups with the controller free.
#[derive(Debug, Clone, Serialize)]
pub struct TriageEntry {
    pub groups: String,
    pub status: SdpStatus,
    pub t_star: f64,
}

#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub status: SdpStatus,
    pub controller: Option<Controller>,
    pub certificates: Vec<GroupCertificate>,
    pub triage: Vec<TriageEntry>,
    pub message: String,
    pub runtime_s: f64,
}

impl SynthesisResult {
    /// Smallest verified margin over all certificates.
    pub fn margin(&self) -> f64 {
        self.certificates
            .iter()
            .map(|c| c.outcome.achieved_margin)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn reports(&self) -> impl Iterator<Item = (String, &CertificateReport)> {
        self.certificates.iter().map(|c| (c.label(), &c.outcome.report))
    }

    pub fn certificate(&self, group: Group) -> Option<&GroupCertificate> {
        self.certificates.iter().find(|c| c.groups.contains(&group))
    }
}

/// Problem for the given groups with the given pins; returns the controller
/// variables so the solution can be read back.
pub fn build_problem(spec: &SynthesisSpec, pins: &PinMask, groups: &[Group]) -> Result<(SdpProblem, ControllerVars)> {
    let mut vars = VariableTable::new();
    let cv = ControllerVars::declare(&mut vars, pins)?;
    let sys = AffineSystems::new(&spec.plant, &cv, &spec.dc)?;
    let mut lmis = Vec::new();
    for g in groups {
        match g {
            Group::Stability => lmis.push(assemble_stability_lmi(&sys, &mut vars)?),
            Group::Sensitivity => {
                let s = spec
                    .sensitivity
                    .as_ref()
                    .ok_or_else(|| Error::Problem("no sensitivity spec".into()))?;
                let (a, b) = assemble_sensitivity_lmis(&sys, &mut vars, s.rho, &s.range)?;
                lmis.extend([a, b]);
            }
            Group::CompSensitivity => {
                let t = spec
                    .comp_sensitivity
                    .as_ref()
                    .ok_or_else(|| Error::Problem("no complementary sensitivity spec".into()))?;
                let (a, b) = assemble_comp_sensitivity_lmis(&sys, &mut vars, t.rho, &t.range)?;
                lmis.extend([a, b]);
            }
        }
    }
    Ok((SdpProblem::new(vars, lmis), cv))
}

fn solve_groups(spec: &SynthesisSpec, pins: &PinMask, groups: &[Group]) -> Result<(GroupCertificate, ControllerVars)> {
    let (problem, cv) = build_problem(spec, pins, groups)?;
    let outcome = sdp::solve(&problem)?;
    Ok((
        GroupCertificate {
            groups: groups.to_vec(),
            problem,
            outcome,
        },
        cv,
    ))
}

fn triage(spec: &SynthesisSpec) -> Result<Vec<TriageEntry>> {
    let mut subsets = vec![vec![Group::Stability]];
    if spec.sensitivity.is_some() {
        subsets.push(vec![Group::Stability, Group::Sensitivity]);
    }
    if spec.comp_sensitivity.is_some() {
        subsets.push(vec![Group::Stability, Group::CompSensitivity]);
    }
    subsets
        .par_iter()
        .map(|groups| {
            let (cert, _) = solve_groups(spec, &spec.pins, groups)?;
            Ok(TriageEntry {
                groups: cert.label(),
                status: cert.outcome.status,
                t_star: cert.outcome.stats.t_star,
            })
        })
        .collect()
}

fn triage_message(entries: &[TriageEntry]) -> String {
    let stability = entries.first().map(|e| e.status);
    if stability != Some(SdpStatus::Feasible) {
        return "stability LMI alone is not feasible".into();
    }
    let failing: Vec<&str> = entries[1..]
        .iter()
        .filter(|e| e.status != SdpStatus::Feasible)
        .map(|e| e.groups.trim_start_matches("stability+"))
        .collect();
    if failing.is_empty() {
        "every pair is feasible with stability alone; only the joint problem fails".into()
    } else {
        format!("infeasible with stability: {}", failing.join(", "))
    }
}

/// Joint synthesis over all enabled groups. On failure, each group is
/// retried with stability alone to locate the conflict.
pub fn synthesize(spec: &SynthesisSpec) -> Result<SynthesisResult> {
    spec.validate()?;
    let start = Instant::now();
    let groups = spec.groups();
    let (cert, cv) = solve_groups(spec, &spec.pins, &groups)?;
    let status = cert.outcome.status;
    let (controller, triage, message) = if status == SdpStatus::Feasible {
        let ctrl = cv.controller(&cert.problem.variables, &cert.outcome.assignment, &spec.pins)?;
        (Some(ctrl), Vec::new(), cert.outcome.message.clone())
    } else {
        let t = triage(spec)?;
        let msg = format!("{}; {}", cert.outcome.message, triage_message(&t));
        (None, t, msg)
    };
    Ok(SynthesisResult {
        status,
        controller,
        certificates: vec![cert],
        triage,
        message,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

/// Certificates for a fixed controller, one SDP per group.
pub fn check_controller(spec: &SynthesisSpec, ctrl: &Controller) -> Result<SynthesisResult> {
    spec.validate()?;
    if ctrl.order() != spec.order {
        return Err(Error::Dimension(format!(
            "controller order {} differs from the problem's {}",
            ctrl.order(),
            spec.order
        )));
    }
    let start = Instant::now();
    let pins = PinMask::all(ctrl);
    let certificates = spec
        .groups()
        .par_iter()
        .map(|g| solve_groups(spec, &pins, &[*g]).map(|(c, _)| c))
        .collect::<Result<Vec<_>>>()?;
    let status = if certificates.iter().all(|c| c.outcome.status == SdpStatus::Feasible) {
        SdpStatus::Feasible
    } else if certificates.iter().any(|c| c.outcome.status == SdpStatus::Infeasible) {
        SdpStatus::Infeasible
    } else {
        SdpStatus::NumericalFailure
    };
    let message = certificates
        .iter()
        .map(|c| format!("{}: {:?}", c.label(), c.outcome.status))
        .collect::<Vec<_>>()
        .join(", ");
    let controller = Controller::with_pins(ctrl.x.clone(), ctrl.y.clone(), ctrl.pins.clone()).ok();
    Ok(SynthesisResult {
        status,
        controller: controller.or_else(|| Some(ctrl.clone())),
        certificates,
        triage: Vec::new(),
        message,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}
