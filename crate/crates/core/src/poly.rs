//! Real polynomials, the interval plant and the fixed-order controller.
//!
//! Coefficients are stored highest degree first everywhere, so the vector
//! `[c0, c1, ..., ck]` stands for `c0 s^k + c1 s^(k-1) + ... + ck`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute margin on root real parts (after normalization to monic) below
/// which a polynomial is not considered strictly Hurwitz.
pub const HURWITZ_TOL: f64 = 1e-9;

/// First-column Routh entries smaller than this are treated as zero pivots.
const ROUTH_ZERO_PIVOT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Wraps a coefficient vector. Leading zeros are kept (the vector length
    /// fixes the basis); an empty vector becomes the zero polynomial `[0]`.
    pub fn new(coeffs: Vec<f64>) -> Self {
        if coeffs.is_empty() {
            return Self::zero();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: vec![0.0] }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Length of the coefficient vector minus one.
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn is_monic(&self) -> bool {
        self.coeffs[0] == 1.0
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Drops leading zero coefficients (keeps at least one entry).
    pub fn trimmed(&self) -> Self {
        let first = self.coeffs.iter().position(|&c| c != 0.0);
        match first {
            Some(i) => Self::new(self.coeffs[i..].to_vec()),
            None => Self::zero(),
        }
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.coeffs.iter().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
    }

    /// Left-pads with zeros so the vector has `len` entries.
    pub fn padded(&self, len: usize) -> Result<Self> {
        if len < self.coeffs.len() {
            return Err(Error::Dimension(format!(
                "cannot pad length {} down to {}",
                self.coeffs.len(),
                len
            )));
        }
        let mut out = vec![0.0; len - self.coeffs.len()];
        out.extend_from_slice(&self.coeffs);
        Ok(Self::new(out))
    }

    pub fn add(&self, other: &Self) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        let a = self.padded(len).expect("len is max");
        let b = other.padded(len).expect("len is max");
        Self::new(a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x + y).collect())
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    /// Roots from the eigenvalues of the companion matrix.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        let p = self.trimmed();
        if p.is_zero() {
            return Err(Error::DegenerateInput("roots of the zero polynomial".into()));
        }
        let k = p.degree();
        if k == 0 {
            return Ok(Vec::new());
        }
        let lead = p.leading();
        let mut comp = DMatrix::<f64>::zeros(k, k);
        for j in 0..k {
            comp[(0, j)] = -p.coeffs[j + 1] / lead;
        }
        for i in 1..k {
            comp[(i, i - 1)] = 1.0;
        }
        Ok(comp.complex_eigenvalues().iter().copied().collect())
    }
}

impl From<Vec<f64>> for Polynomial {
    fn from(v: Vec<f64>) -> Self {
        Self::new(v)
    }
}

impl From<&[f64]> for Polynomial {
    fn from(v: &[f64]) -> Self {
        Self::new(v.to_vec())
    }
}

/// Cauchy product of two coefficient vectors.
pub fn convolve(p: &Polynomial, q: &Polynomial) -> Polynomial {
    Polynomial::new(convolve_slices(p.coeffs(), q.coeffs()))
}

pub(crate) fn convolve_slices(p: &[f64], q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + q.len() - 1];
    for (i, &a) in p.iter().enumerate() {
        for (j, &b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

/// Banded Toeplitz operator: row `i` holds `v` starting at column `i`.
///
/// `toeplitz_band(x, n)` is the `n x (n+m)` matrix that turns a row of `n`
/// weights `c` into the coefficients of `(sum_i c_i s^(n-1-i)) * x(s)` in the
/// `[s^(n+m-1) ... s 1]` basis.
pub fn toeplitz_band(v: &[f64], rows: usize) -> DMatrix<f64> {
    let cols = rows + v.len() - 1;
    let mut out = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for (j, &c) in v.iter().enumerate() {
            out[(i, i + j)] = c;
        }
    }
    out
}

/// Routh-array test on the first column. A (near) zero pivot counts as
/// failure: strictness is required, no epsilon continuation.
pub fn routh_hurwitz(p: &Polynomial) -> Result<bool> {
    let c = p.coeffs();
    if c[0] == 0.0 {
        return Err(Error::DegenerateInput("zero leading coefficient".into()));
    }
    let monic: Vec<f64> = c.iter().map(|v| v / c[0]).collect();
    let k = monic.len() - 1;
    if k == 0 {
        return Ok(true);
    }
    let width = k / 2 + 1;
    let mut prev: Vec<f64> = (0..width).map(|j| monic.get(2 * j).copied().unwrap_or(0.0)).collect();
    let mut cur: Vec<f64> = (0..width)
        .map(|j| monic.get(2 * j + 1).copied().unwrap_or(0.0))
        .collect();
    // rows s^k and s^(k-1) are seeded; k-1 more rows follow
    for _ in 0..k {
        if cur[0].abs() < ROUTH_ZERO_PIVOT || cur[0] < 0.0 {
            return Ok(false);
        }
        let next: Vec<f64> = (0..width)
            .map(|j| {
                let a = prev.get(j + 1).copied().unwrap_or(0.0);
                let b = cur.get(j + 1).copied().unwrap_or(0.0);
                (cur[0] * a - prev[0] * b) / cur[0]
            })
            .collect();
        prev = cur;
        cur = next;
    }
    Ok(true)
}

/// True iff every root has real part below `-HURWITZ_TOL`, decided by the
/// Routh array and cross-checked against companion-matrix eigenvalues.
pub fn is_strictly_hurwitz(p: &Polynomial) -> Result<bool> {
    let routh = routh_hurwitz(p)?;
    let roots = p.roots()?;
    let eig = roots.iter().all(|r| r.re < -HURWITZ_TOL);
    Ok(routh && eig)
}

/// Max real part over the roots; `-inf` for constants.
pub fn spectral_abscissa(p: &Polynomial) -> Result<f64> {
    Ok(p.roots()?.iter().map(|r| r.re).fold(f64::NEG_INFINITY, f64::max))
}

/// SISO plant whose denominator/numerator coefficients lie in independent
/// intervals, stored as medians and half-widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalPlant {
    /// `[1, a_1^c, ..., a_n^c]`
    pub a_c: Vec<f64>,
    /// `[0, b_1^c, ..., b_n^c]`
    pub b_c: Vec<f64>,
    /// `[a_1^d, ..., a_n^d]`
    pub a_d: Vec<f64>,
    /// `[b_1^d, ..., b_n^d]`
    pub b_d: Vec<f64>,
}

impl IntervalPlant {
    /// Builds the plant from `[lower, upper]` bounds on `a_1..a_n` and `b_1..b_n`.
    pub fn from_bounds(a_bounds: &[[f64; 2]], b_bounds: &[[f64; 2]]) -> Result<Self> {
        let n = a_bounds.len();
        if n == 0 {
            return Err(Error::DegenerateInput("plant order must be at least 1".into()));
        }
        if b_bounds.len() != n {
            return Err(Error::Dimension(format!(
                "a has {} intervals but b has {}",
                n,
                b_bounds.len()
            )));
        }
        let check = |name: &str, i: usize, [l, u]: [f64; 2]| -> Result<()> {
            if !l.is_finite() || !u.is_finite() {
                return Err(Error::InvalidBound(format!("{name}{} is not finite", i + 1)));
            }
            if l > u {
                return Err(Error::InvalidBound(format!(
                    "{name}{} bounds out of order: [{l}, {u}]",
                    i + 1
                )));
            }
            Ok(())
        };
        for (i, b) in a_bounds.iter().enumerate() {
            check("a", i, *b)?;
        }
        for (i, b) in b_bounds.iter().enumerate() {
            check("b", i, *b)?;
        }
        let mid = |[l, u]: [f64; 2]| (l + u) / 2.0;
        let half = |[l, u]: [f64; 2]| (u - l) / 2.0;

        let mut a_c = vec![1.0];
        a_c.extend(a_bounds.iter().copied().map(mid));
        let mut b_c = vec![0.0];
        b_c.extend(b_bounds.iter().copied().map(mid));
        Ok(Self {
            a_c,
            b_c,
            a_d: a_bounds.iter().copied().map(half).collect(),
            b_d: b_bounds.iter().copied().map(half).collect(),
        })
    }

    /// Plant with no uncertainty.
    pub fn nominal(a: &[f64], b: &[f64]) -> Result<Self> {
        let ab: Vec<[f64; 2]> = a.iter().map(|&v| [v, v]).collect();
        let bb: Vec<[f64; 2]> = b.iter().map(|&v| [v, v]).collect();
        Self::from_bounds(&ab, &bb)
    }

    pub fn order(&self) -> usize {
        self.a_d.len()
    }

    pub fn a_bounds(&self) -> Vec<[f64; 2]> {
        (0..self.order())
            .map(|i| [self.a_c[i + 1] - self.a_d[i], self.a_c[i + 1] + self.a_d[i]])
            .collect()
    }

    pub fn b_bounds(&self) -> Vec<[f64; 2]> {
        (0..self.order())
            .map(|i| [self.b_c[i + 1] - self.b_d[i], self.b_c[i + 1] + self.b_d[i]])
            .collect()
    }

    pub fn is_certain(&self) -> bool {
        self.a_d.iter().chain(&self.b_d).all(|&d| d == 0.0)
    }

    /// Denominator and numerator at the interval variables `delta_a`, `delta_b`.
    pub fn sample(&self, delta_a: &[f64], delta_b: &[f64]) -> (Polynomial, Polynomial) {
        let mut a = self.a_c.clone();
        let mut b = self.b_c.clone();
        for i in 0..self.order() {
            a[i + 1] += self.a_d[i] * delta_a[i];
            b[i + 1] += self.b_d[i] * delta_b[i];
        }
        (Polynomial::new(a), Polynomial::new(b))
    }

    /// Inverse of [`sample`](Self::sample) for a concrete plant inside the box.
    pub fn deltas_for(&self, a: &[f64], b: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.order();
        if a.len() != n || b.len() != n {
            return Err(Error::Dimension(format!("expected {n} a and {n} b coefficients")));
        }
        let map = |v: f64, c: f64, d: f64, name: &str| -> Result<f64> {
            if d == 0.0 {
                if v == c {
                    return Ok(0.0);
                }
                return Err(Error::InvalidBound(format!(
                    "{name} = {v} differs from its fixed value {c}"
                )));
            }
            let delta = (v - c) / d;
            if !(-1.0..=1.0).contains(&delta) {
                return Err(Error::InvalidBound(format!("{name} = {v} lies outside its interval")));
            }
            Ok(delta)
        };
        let da = (0..n)
            .map(|i| map(a[i], self.a_c[i + 1], self.a_d[i], &format!("a{}", i + 1)))
            .collect::<Result<Vec<_>>>()?;
        let db = (0..n)
            .map(|i| map(b[i], self.b_c[i + 1], self.b_d[i], &format!("b{}", i + 1)))
            .collect::<Result<Vec<_>>>()?;
        Ok((da, db))
    }
}

/// Pinned values for `x_1..x_m` and `y_0..y_m`; `None` leaves the
/// coefficient free for synthesis.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PinMask {
    pub x: Vec<Option<f64>>,
    pub y: Vec<Option<f64>>,
}

impl PinMask {
    pub fn free(m: usize) -> Self {
        Self {
            x: vec![None; m],
            y: vec![None; m + 1],
        }
    }

    /// Pins every coefficient to the given controller's values.
    pub fn all(ctrl: &Controller) -> Self {
        Self {
            x: ctrl.x[1..].iter().map(|&v| Some(v)).collect(),
            y: ctrl.y.iter().map(|&v| Some(v)).collect(),
        }
    }

    pub fn order(&self) -> usize {
        self.x.len()
    }

    /// Parses a coefficient name such as `x2` or `y0`.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let m = self.order();
        let (kind, idx) = name.split_at(1);
        let idx: usize = idx
            .parse()
            .map_err(|_| Error::Problem(format!("unknown controller coefficient '{name}'")))?;
        match kind {
            "x" if (1..=m).contains(&idx) => self.x[idx - 1] = Some(value),
            "y" if idx <= m => self.y[idx] = Some(value),
            _ => {
                return Err(Error::Problem(format!(
                    "unknown controller coefficient '{name}' for order {m}"
                )))
            }
        }
        Ok(())
    }

    pub fn is_fully_pinned(&self) -> bool {
        self.x.iter().chain(&self.y).all(Option::is_some)
    }
}

/// Fixed-order controller `K(s) = y(s) / x(s)` with monic `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Controller {
    /// `[1, x_1, ..., x_m]`
    pub x: Vec<f64>,
    /// `[y_0, ..., y_m]`
    pub y: Vec<f64>,
    #[serde(default)]
    pub pins: PinMask,
}

impl Controller {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let m = x.len().saturating_sub(1);
        let pins = PinMask::free(m);
        Self::with_pins(x, y, pins)
    }

    pub fn with_pins(x: Vec<f64>, y: Vec<f64>, pins: PinMask) -> Result<Self> {
        if x.is_empty() || x[0] != 1.0 {
            return Err(Error::DegenerateInput("controller denominator must be monic".into()));
        }
        if y.len() != x.len() {
            return Err(Error::Dimension(format!(
                "controller numerator has {} coefficients, denominator {}",
                y.len(),
                x.len()
            )));
        }
        let m = x.len() - 1;
        if pins.x.len() != m || pins.y.len() != m + 1 {
            return Err(Error::Dimension("pin mask does not match controller order".into()));
        }
        let ctrl = Self { x, y, pins };
        for (i, p) in ctrl.pins.x.iter().enumerate() {
            if let Some(v) = p {
                if ctrl.x[i + 1] != *v {
                    return Err(Error::Problem(format!("x{} violates its pin {v}", i + 1)));
                }
            }
        }
        for (i, p) in ctrl.pins.y.iter().enumerate() {
            if let Some(v) = p {
                if ctrl.y[i] != *v {
                    return Err(Error::Problem(format!("y{i} violates its pin {v}")));
                }
            }
        }
        Ok(ctrl)
    }

    /// Convenience constructor from `x_1..x_m` and `y_0..y_m`.
    pub fn from_free(x_tail: &[f64], y: &[f64]) -> Result<Self> {
        let mut x = vec![1.0];
        x.extend_from_slice(x_tail);
        Self::new(x, y.to_vec())
    }

    pub fn order(&self) -> usize {
        self.x.len() - 1
    }

    pub fn x_poly(&self) -> Polynomial {
        Polynomial::new(self.x.clone())
    }

    pub fn y_poly(&self) -> Polynomial {
        Polynomial::new(self.y.clone())
    }
}

/// Nominal closed-loop characteristic polynomial `a^c * x + b^c * y`; one
/// common choice for the target denominator `d_c`.
pub fn nominal_characteristic(plant: &IntervalPlant, ctrl: &Controller) -> Polynomial {
    let ax = convolve_slices(&plant.a_c, &ctrl.x);
    let by = convolve_slices(&plant.b_c, &ctrl.y);
    Polynomial::new(ax.iter().zip(&by).map(|(p, q)| p + q).collect())
}
