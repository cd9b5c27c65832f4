//! Affine LMIs for robust stability, sensitivity and complementary
//! sensitivity of the constructed systems.
//!
//! Every LMI has the bordered layout
//!
//! ```text
//! [ Γ          X_mapᵀ  Y_mapᵀ ]
//! [            0       0      ]
//! [ X_map  0   -R_a    0      ]
//! [ Y_map  0   0       -R_b   ]
//! ```
//!
//! where `Γ` is the `(k+1) x (k+1)` KYP or generalized KYP block and
//! `R_a`, `R_b` are positive diagonal multipliers for the interval
//! uncertainty of `a` and `b`.

pub mod affine;
pub mod vars;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use affine::{embed_matrix, real_embed, AffineLmi, AffineMatrix};
pub use vars::{BlockId, VarBlock, VarKind, VariableTable};

use crate::error::{Error, Result};
use crate::poly::{is_strictly_hurwitz, Controller, IntervalPlant, PinMask, Polynomial};
use crate::realize::companion;

/// Lower bound on the GKYP multiplier `Q`.
pub const Q_FLOOR: f64 = 1e-9;

type CMat = DMatrix<Complex64>;

fn re(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RangeKind {
    Low,
    Middle,
    High,
}

impl FromStr for RangeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(Self::Low),
            "middle" => Ok(Self::Middle),
            "high" => Ok(Self::High),
            other => Err(Error::Problem(format!("unknown range kind '{other}'"))),
        }
    }
}

impl fmt::Display for RangeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Low => "low",
            Self::Middle => "middle",
            Self::High => "high",
        })
    }
}

/// Frequency range in `(Φ, Ψ)` form.
///
/// - low: `|ω| <= ω_l`
/// - middle: `ω_l <= ω <= ω_h`
/// - high: `|ω| >= ω_h`
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyRange {
    pub kind: RangeKind,
    pub omega_l: Option<f64>,
    pub omega_h: Option<f64>,
    pub phi: DMatrix<f64>,
    pub psi: CMat,
}

fn check_freq(name: &str, w: Option<f64>) -> Result<f64> {
    match w {
        Some(v) if v.is_finite() && v > 0.0 => Ok(v),
        Some(v) => Err(Error::InvalidFrequency(format!(
            "{name} = {v} must be positive and finite"
        ))),
        None => Err(Error::InvalidFrequency(format!("{name} is required"))),
    }
}

pub fn table1_psi(kind: RangeKind, omega_l: Option<f64>, omega_h: Option<f64>) -> Result<FrequencyRange> {
    let j = Complex64::new(0.0, 1.0);
    let (wl, wh, psi) = match kind {
        RangeKind::Low => {
            let wl = check_freq("omega_l", omega_l)?;
            (
                Some(wl),
                None,
                CMat::from_row_slice(2, 2, &[re(-1.0), re(0.0), re(0.0), re(wl * wl)]),
            )
        }
        RangeKind::High => {
            let wh = check_freq("omega_h", omega_h)?;
            (
                None,
                Some(wh),
                CMat::from_row_slice(2, 2, &[re(1.0), re(0.0), re(0.0), re(-wh * wh)]),
            )
        }
        RangeKind::Middle => {
            let wl = check_freq("omega_l", omega_l)?;
            let wh = check_freq("omega_h", omega_h)?;
            if wl >= wh {
                return Err(Error::InvalidFrequency(format!(
                    "omega_l = {wl} must be below omega_h = {wh}"
                )));
            }
            let wc = 0.5 * (wl + wh);
            let psi = CMat::from_row_slice(2, 2, &[re(-1.0), j * wc, -j * wc, re(-wl * wh)]);
            (Some(wl), Some(wh), psi)
        }
    };
    Ok(FrequencyRange {
        kind,
        omega_l: wl,
        omega_h: wh,
        phi: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
        psi,
    })
}

impl FrequencyRange {
    /// Range of the given kind covering the band `(w1, w2)`: low uses `w2`
    /// as its upper edge, high uses `w1` as its lower edge.
    pub fn from_band(kind: RangeKind, band: (f64, f64)) -> Result<Self> {
        let (w1, w2) = band;
        if !(w1.is_finite() && w2.is_finite() && w1 > 0.0 && w1 < w2) {
            return Err(Error::InvalidFrequency(format!(
                "band ({w1}, {w2}) must satisfy 0 < w1 < w2"
            )));
        }
        match kind {
            RangeKind::Low => table1_psi(kind, Some(w2), None),
            RangeKind::Middle => table1_psi(kind, Some(w1), Some(w2)),
            RangeKind::High => table1_psi(kind, None, Some(w1)),
        }
    }

    pub fn contains(&self, omega: f64) -> bool {
        let w = omega.abs();
        match self.kind {
            RangeKind::Low => w <= self.omega_l.unwrap_or(0.0),
            RangeKind::Middle => w >= self.omega_l.unwrap_or(0.0) && w <= self.omega_h.unwrap_or(0.0),
            RangeKind::High => w >= self.omega_h.unwrap_or(f64::INFINITY),
        }
    }

    /// True when `Ψ` has a nonzero imaginary part.
    pub fn is_complex(&self) -> bool {
        self.psi.iter().any(|z| z.im != 0.0)
    }
}

/// `Ξ = Φ ⊗ P + Ψ ⊗ Q`.
pub fn gkyp_xi(range: &FrequencyRange, p: &AffineMatrix, q: &AffineMatrix) -> Result<AffineMatrix> {
    if p.nrows() != p.ncols() || q.nrows() != q.ncols() || p.nrows() != q.nrows() {
        return Err(Error::Dimension(format!(
            "P is {}x{}, Q is {}x{}",
            p.nrows(),
            p.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    let phi = range.phi.map(re);
    Ok(p.kron_left(&phi).add(&q.kron_left(&range.psi)))
}

/// Controller coefficients as affine scalars: pinned entries are constants,
/// free entries are solver scalars named `x1..xm`, `y0..ym`.
#[derive(Debug, Clone)]
pub struct ControllerVars {
    /// `[1, x_1, ..., x_m]`
    pub x: Vec<AffineMatrix>,
    /// `[y_0, ..., y_m]`
    pub y: Vec<AffineMatrix>,
    x_ids: Vec<BlockId>,
    y_ids: Vec<BlockId>,
}

impl ControllerVars {
    pub fn declare(vars: &mut VariableTable, pins: &PinMask) -> Result<Self> {
        let mut x = vec![AffineMatrix::constant_real(&DMatrix::from_element(1, 1, 1.0))];
        let mut x_ids = Vec::new();
        for (i, p) in pins.x.iter().enumerate() {
            let name = format!("x{}", i + 1);
            let id = match p {
                Some(v) => vars.pinned(&name, *v)?,
                None => vars.scalar(&name)?,
            };
            x.push(vars.expr(id));
            x_ids.push(id);
        }
        let mut y = Vec::new();
        let mut y_ids = Vec::new();
        for (i, p) in pins.y.iter().enumerate() {
            let name = format!("y{i}");
            let id = match p {
                Some(v) => vars.pinned(&name, *v)?,
                None => vars.scalar(&name)?,
            };
            y.push(vars.expr(id));
            y_ids.push(id);
        }
        Ok(Self { x, y, x_ids, y_ids })
    }

    /// Every coefficient pinned to `ctrl`.
    pub fn fixed(vars: &mut VariableTable, ctrl: &Controller) -> Result<Self> {
        Self::declare(vars, &PinMask::all(ctrl))
    }

    pub fn order(&self) -> usize {
        self.x.len() - 1
    }

    /// Controller read back from a solver assignment.
    pub fn controller(&self, vars: &VariableTable, values: &[f64], pins: &PinMask) -> Result<Controller> {
        let mut x = vec![1.0];
        x.extend(self.x_ids.iter().map(|&id| vars.value(id, values)[(0, 0)].re));
        let y = self.y_ids.iter().map(|&id| vars.value(id, values)[(0, 0)].re).collect();
        Controller::with_pins(x, y, pins.clone())
    }
}

fn scalar_zero() -> AffineMatrix {
    AffineMatrix::zeros(1, 1)
}

fn conv_affine(c: &[f64], v: &[AffineMatrix]) -> Vec<AffineMatrix> {
    let mut out = vec![scalar_zero(); c.len() + v.len() - 1];
    for (i, &ci) in c.iter().enumerate() {
        if ci == 0.0 {
            continue;
        }
        for (j, vj) in v.iter().enumerate() {
            out[i + j] = out[i + j].add(&vj.scale_real(ci));
        }
    }
    out
}

fn row_of(entries: Vec<AffineMatrix>) -> AffineMatrix {
    AffineMatrix::blocks(&[entries])
}

/// Constant feedthrough and affine ascending output row of `num / den`.
fn affine_output_row(num: &[AffineMatrix], den: &[f64]) -> Result<(f64, AffineMatrix)> {
    let k = den.len() - 1;
    if num[0].depends_on_variables() {
        return Err(Error::Problem("feedthrough depends on controller coefficients".into()));
    }
    let d = num[0].constant_part()[(0, 0)].re;
    let entries = (0..k)
        .map(|i| {
            num[k - i].sub(&AffineMatrix::constant_real(&DMatrix::from_element(
                1,
                1,
                d * den[k - i],
            )))
        })
        .collect();
    Ok((d, row_of(entries)))
}

/// `toeplitz_band(v, n)` with columns in ascending state order.
fn affine_band(v: &[AffineMatrix], n: usize) -> AffineMatrix {
    let k = n + v.len() - 1;
    let grid = (0..n)
        .map(|r| {
            let mut row = vec![scalar_zero(); k];
            for (j, vj) in v.iter().enumerate() {
                row[k - 1 - (r + j)] = vj.clone();
            }
            row
        })
        .collect::<Vec<_>>();
    AffineMatrix::blocks(&grid)
}

/// Constructed systems with output rows and Toeplitz maps affine in the
/// controller coefficients. `A`, `B`, `D` are constant.
#[derive(Debug, Clone)]
pub struct AffineSystems {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c_s: AffineMatrix,
    pub c_p: AffineMatrix,
    pub c_q: AffineMatrix,
    pub d_s: f64,
    pub d_p: f64,
    pub d_q: f64,
    pub x_map: AffineMatrix,
    pub y_map: AffineMatrix,
    pub a_d: Vec<f64>,
    pub b_d: Vec<f64>,
}

impl AffineSystems {
    pub fn new(plant: &IntervalPlant, ctrl: &ControllerVars, dc: &Polynomial) -> Result<Self> {
        let n = plant.order();
        let m = ctrl.order();
        if ctrl.y.len() != m + 1 {
            return Err(Error::Dimension("controller numerator length".into()));
        }
        if dc.degree() != n + m {
            return Err(Error::Dimension(format!(
                "d_c has degree {} but m + n = {}",
                dc.degree(),
                n + m
            )));
        }
        if !is_strictly_hurwitz(dc)? {
            return Err(Error::NotHurwitz(format!("{:?}", dc.coeffs())));
        }
        let (a, b) = companion(dc)?;
        let ax = conv_affine(&plant.a_c, &ctrl.x);
        let by = conv_affine(&plant.b_c, &ctrl.y);
        let sum: Vec<AffineMatrix> = ax.iter().zip(&by).map(|(p, q)| p.add(q)).collect();
        let den = dc.coeffs();
        let (d_s, c_s) = affine_output_row(&sum, den)?;
        let (d_p, c_p) = affine_output_row(&ax, den)?;
        let (d_q, c_q) = affine_output_row(&by, den)?;
        Ok(Self {
            a,
            b,
            c_s,
            c_p,
            c_q,
            d_s,
            d_p,
            d_q,
            x_map: affine_band(&ctrl.x, n),
            y_map: affine_band(&ctrl.y, n),
            a_d: plant.a_d.clone(),
            b_d: plant.b_d.clone(),
        })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn plant_order(&self) -> usize {
        self.a_d.len()
    }
}

fn const_block(m: &DMatrix<f64>) -> AffineMatrix {
    AffineMatrix::constant_real(m)
}

fn zero_block(r: usize, c: usize) -> AffineMatrix {
    AffineMatrix::zeros(r, c)
}

/// `w R wᵀ` for a row weight `w` and diagonal `R`.
fn weighted_quadratic(r: &AffineMatrix, w: &[f64]) -> AffineMatrix {
    let row = CMat::from_row_slice(1, w.len(), &w.iter().map(|&v| re(v)).collect::<Vec<_>>());
    r.left_mul(&row).right_mul(&row.transpose())
}

/// Wraps `Γ` with the Toeplitz border and `-diag(R_a, R_b)`.
fn bordered(gamma: AffineMatrix, sys: &AffineSystems, r_a: &AffineMatrix, r_b: &AffineMatrix) -> AffineMatrix {
    let n = sys.plant_order();
    let xt = sys.x_map.transpose();
    let yt = sys.y_map.transpose();
    AffineMatrix::blocks(&[
        vec![
            gamma,
            AffineMatrix::blocks(&[vec![xt, yt], vec![zero_block(1, n), zero_block(1, n)]]),
        ],
        vec![
            AffineMatrix::blocks(&[
                vec![sys.x_map.clone(), zero_block(n, 1)],
                vec![sys.y_map.clone(), zero_block(n, 1)],
            ]),
            AffineMatrix::blocks(&[
                vec![r_a.scale_real(-1.0), zero_block(n, n)],
                vec![zero_block(n, n), r_b.scale_real(-1.0)],
            ]),
        ],
    ])
}

fn scalar_const(v: f64) -> AffineMatrix {
    const_block(&DMatrix::from_element(1, 1, v))
}

/// Robust stability LMI of size `k + 1 + 2n` in `P_s`, `R_sa`, `R_sb` and the
/// free controller coefficients.
pub fn assemble_stability_lmi(sys: &AffineSystems, vars: &mut VariableTable) -> Result<AffineLmi> {
    let k = sys.state_dim();
    let n = sys.plant_order();
    let p_id = vars.symmetric("P_s", k, None)?;
    let ra_id = vars.diagonal_positive("R_sa", n)?;
    let rb_id = vars.diagonal_positive("R_sb", n)?;
    let (p, r_a, r_b) = (vars.expr(p_id), vars.expr(ra_id), vars.expr(rb_id));

    let a = sys.a.map(re);
    let b = DMatrix::from_column_slice(k, 1, sys.b.as_slice()).map(re);
    let pa = p.right_mul(&a);
    let top_left = pa.add(&pa.transpose());
    let pb_c = p.right_mul(&b).sub(&sys.c_s.transpose());
    let dblk = scalar_const(-2.0 * sys.d_s)
        .add(&weighted_quadratic(&r_a, &sys.a_d))
        .add(&weighted_quadratic(&r_b, &sys.b_d));
    let gamma = AffineMatrix::blocks(&[vec![top_left, pb_c.clone()], vec![pb_c.transpose(), dblk]]);
    AffineLmi::from_hermitian("stability", &bordered(gamma, sys, &r_a, &r_b))
}

/// Which performance pair is being assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Performance {
    /// `|S| < ρ`, multipliers `P_p, Q_p, R_pa..R_pd`.
    Sensitivity,
    /// `|T| < ρ`, multipliers `P_q, Q_q, R_qa..R_qd`.
    CompSensitivity,
}

impl Performance {
    pub fn tag(&self) -> &'static str {
        match self {
            Self::Sensitivity => "sensitivity",
            Self::CompSensitivity => "comp_sensitivity",
        }
    }

    fn letter(&self) -> char {
        match self {
            Self::Sensitivity => 'p',
            Self::CompSensitivity => 'q',
        }
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_finite() && rho > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidBound(format!("rho = {rho} must be positive and finite")))
    }
}

fn assemble_performance_pair(
    sys: &AffineSystems,
    vars: &mut VariableTable,
    which: Performance,
    rho: f64,
    range: &FrequencyRange,
) -> Result<(AffineLmi, AffineLmi)> {
    check_rho(rho)?;
    let k = sys.state_dim();
    let n = sys.plant_order();
    let l = which.letter();
    let (p_id, q_id) = if range.is_complex() {
        (
            vars.hermitian(&format!("P_{l}"), k, None)?,
            vars.hermitian(&format!("Q_{l}"), k, Some(Q_FLOOR))?,
        )
    } else {
        (
            vars.symmetric(&format!("P_{l}"), k, None)?,
            vars.symmetric(&format!("Q_{l}"), k, Some(Q_FLOOR))?,
        )
    };
    let xi = gkyp_xi(range, &vars.expr(p_id), &vars.expr(q_id))?;

    let mut lam = DMatrix::<f64>::zeros(2 * k, k + 1);
    lam.view_mut((0, 0), (k, k)).copy_from(&sys.a);
    lam.view_mut((0, k), (k, 1)).copy_from(&sys.b);
    lam.view_mut((k, 0), (k, k)).fill_with_identity();
    let lam = lam.map(re);
    let base = xi.left_mul(&lam.transpose()).right_mul(&lam);

    let (c_o, d_nom) = match which {
        Performance::Sensitivity => (&sys.c_p, sys.d_s),
        Performance::CompSensitivity => (&sys.c_q, sys.d_s),
    };
    let suffixes = [('a', 'b'), ('c', 'd')];
    let mut out = Vec::with_capacity(2);
    for (sign, (sa, sb)) in [1.0, -1.0].into_iter().zip(suffixes) {
        let rho_pm = 1.0 + sign / rho;
        let ra_id = vars.diagonal_positive(&format!("R_{l}{sa}"), n)?;
        let rb_id = vars.diagonal_positive(&format!("R_{l}{sb}"), n)?;
        let (r_a, r_b) = (vars.expr(ra_id), vars.expr(rb_id));
        let c_pm = sys.c_s.add(&c_o.scale_real(sign / rho));
        let (d_scale, wa, wb) = match which {
            Performance::Sensitivity => (rho_pm, rho_pm * rho_pm, 1.0),
            Performance::CompSensitivity => (1.0, 1.0, rho_pm * rho_pm),
        };
        let dblk = scalar_const(2.0 * d_scale * d_nom)
            .sub(&weighted_quadratic(&r_a, &sys.a_d).scale_real(wa))
            .sub(&weighted_quadratic(&r_b, &sys.b_d).scale_real(wb));
        let subtract = AffineMatrix::blocks(&[vec![zero_block(k, k), c_pm.transpose()], vec![c_pm, dblk]]);
        let gamma = base.sub(&subtract);
        let name = format!("{}{}", which.tag(), if sign > 0.0 { "+" } else { "-" });
        out.push(AffineLmi::from_hermitian(&name, &bordered(gamma, sys, &r_a, &r_b))?);
    }
    let second = out.pop().expect("two LMIs");
    let first = out.pop().expect("two LMIs");
    Ok((first, second))
}

/// The `|S| < ρ_s` pair sharing `(P_p, Q_p)`.
pub fn assemble_sensitivity_lmis(
    sys: &AffineSystems,
    vars: &mut VariableTable,
    rho_s: f64,
    range_s: &FrequencyRange,
) -> Result<(AffineLmi, AffineLmi)> {
    assemble_performance_pair(sys, vars, Performance::Sensitivity, rho_s, range_s)
}

/// The `|T| < ρ_t` pair sharing `(P_q, Q_q)`.
pub fn assemble_comp_sensitivity_lmis(
    sys: &AffineSystems,
    vars: &mut VariableTable,
    rho_t: f64,
    range_t: &FrequencyRange,
) -> Result<(AffineLmi, AffineLmi)> {
    assemble_performance_pair(sys, vars, Performance::CompSensitivity, rho_t, range_t)
}

/// `10^(dB/20)`
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

#[cfg(test)]
mod tests;
