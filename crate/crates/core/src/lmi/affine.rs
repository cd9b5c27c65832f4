//! Matrices affine in the solver scalars, and the real symmetric LMIs built
//! from them.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::vars::VariableTable;
use crate::error::{Error, Result};

type CMat = DMatrix<Complex64>;

const HERMITIAN_TOL: f64 = 1e-12;

fn c(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

/// `M(v) = M_0 + sum_i v_i M_i` with complex coefficient matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMatrix {
    constant: CMat,
    terms: BTreeMap<usize, CMat>,
}

impl AffineMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            constant: CMat::zeros(rows, cols),
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(m: CMat) -> Self {
        Self {
            constant: m,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant_real(m: &DMatrix<f64>) -> Self {
        Self::constant(m.map(c))
    }

    pub fn nrows(&self) -> usize {
        self.constant.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.constant.ncols()
    }

    pub fn constant_part(&self) -> &CMat {
        &self.constant
    }

    pub fn terms(&self) -> impl Iterator<Item = (usize, &CMat)> {
        self.terms.iter().map(|(&k, v)| (k, v))
    }

    pub fn depends_on_variables(&self) -> bool {
        !self.terms.is_empty()
    }

    pub(crate) fn add_term(&mut self, var: usize, coef: CMat) {
        assert_eq!(coef.shape(), self.constant.shape());
        match self.terms.get_mut(&var) {
            Some(existing) => *existing += coef,
            None => {
                self.terms.insert(var, coef);
            }
        }
    }

    /// Applies a linear map to the constant and every coefficient.
    pub fn map_linear(&self, f: impl Fn(&CMat) -> CMat) -> Self {
        let constant = f(&self.constant);
        let terms = self
            .terms
            .iter()
            .map(|(&k, v)| (k, f(v)))
            .filter(|(_, v)| v.iter().any(|z| *z != c(0.0)))
            .collect();
        Self { constant, terms }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.constant.shape(), other.constant.shape(), "shape mismatch in add");
        let mut out = self.clone();
        out.constant += &other.constant;
        for (&k, v) in &other.terms {
            out.add_term(k, v.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(c(-1.0)))
    }

    pub fn scale(&self, k: Complex64) -> Self {
        self.map_linear(|m| m * k)
    }

    pub fn scale_real(&self, k: f64) -> Self {
        self.scale(c(k))
    }

    /// `L * self`
    pub fn left_mul(&self, l: &CMat) -> Self {
        self.map_linear(|m| l * m)
    }

    /// `self * r`
    pub fn right_mul(&self, r: &CMat) -> Self {
        self.map_linear(|m| m * r)
    }

    pub fn transpose(&self) -> Self {
        self.map_linear(|m| m.transpose())
    }

    pub fn adjoint(&self) -> Self {
        self.map_linear(|m| m.adjoint())
    }

    /// `K ⊗ self` for a constant `K`.
    pub fn kron_left(&self, k: &CMat) -> Self {
        self.map_linear(|m| k.kronecker(m))
    }

    /// Block assembly from a grid; every row of blocks must agree in height
    /// and every column in width.
    pub fn blocks(grid: &[Vec<AffineMatrix>]) -> Self {
        let heights: Vec<usize> = grid.iter().map(|row| row[0].nrows()).collect();
        let widths: Vec<usize> = grid[0].iter().map(|b| b.ncols()).collect();
        let rows: usize = heights.iter().sum();
        let cols: usize = widths.iter().sum();
        let mut out = Self::zeros(rows, cols);
        let mut r0 = 0;
        for (bi, row) in grid.iter().enumerate() {
            assert_eq!(row.len(), widths.len(), "ragged block grid");
            let mut c0 = 0;
            for (bj, blk) in row.iter().enumerate() {
                assert_eq!(blk.nrows(), heights[bi], "block height mismatch");
                assert_eq!(blk.ncols(), widths[bj], "block width mismatch");
                let place = |src: &CMat| {
                    let mut m = CMat::zeros(rows, cols);
                    m.view_mut((r0, c0), src.shape()).copy_from(src);
                    m
                };
                out.constant += place(&blk.constant);
                for (&k, v) in &blk.terms {
                    out.add_term(k, place(v));
                }
                c0 += widths[bj];
            }
            r0 += heights[bi];
        }
        out
    }

    pub fn evaluate(&self, values: &[f64]) -> CMat {
        let mut out = self.constant.clone();
        for (&k, v) in &self.terms {
            let x = values[k];
            if x != 0.0 {
                out += v * c(x);
            }
        }
        out
    }

    /// Largest `|M - M^H|` entry over the constant and all coefficients.
    pub fn hermitian_defect(&self) -> f64 {
        let defect = |m: &CMat| (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        self.terms.values().map(defect).fold(defect(&self.constant), f64::max)
    }

    pub fn is_real(&self) -> bool {
        std::iter::once(&self.constant)
            .chain(self.terms.values())
            .all(|m| m.iter().all(|z| z.im == 0.0))
    }

    fn scale_hint(&self) -> f64 {
        std::iter::once(&self.constant)
            .chain(self.terms.values())
            .flat_map(|m| m.iter())
            .map(|z| z.norm())
            .fold(1.0, f64::max)
    }
}

/// Real symmetric LMI `F_0 + sum_i v_i F_i ≺ 0`, enforced as
/// `≼ -margin * I`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineLmi {
    pub name: String,
    pub constant: DMatrix<f64>,
    pub terms: Vec<(usize, DMatrix<f64>)>,
    pub margin: f64,
}

/// Strictness scale relative to the largest constant entry.
pub const STRICTNESS_SCALE: f64 = 1e-7;

impl AffineLmi {
    fn new(name: &str, constant: DMatrix<f64>, terms: Vec<(usize, DMatrix<f64>)>) -> Self {
        let max_abs = constant.iter().map(|v| v.abs()).fold(0.0, f64::max);
        Self {
            name: name.to_string(),
            constant,
            terms,
            margin: STRICTNESS_SCALE * (1.0 + max_abs),
        }
    }

    pub fn size(&self) -> usize {
        self.constant.nrows()
    }

    pub fn evaluate(&self, values: &[f64]) -> DMatrix<f64> {
        let mut out = self.constant.clone();
        for (k, m) in &self.terms {
            let x = values[*k];
            if x != 0.0 {
                out += m * x;
            }
        }
        out
    }

    /// Converts a Hermitian affine matrix; real data is kept at its size,
    /// complex data goes through [`real_embed`].
    pub fn from_hermitian(name: &str, h: &AffineMatrix) -> Result<Self> {
        check_hermitian(h)?;
        if h.is_real() {
            let re = |m: &CMat| m.map(|z| z.re);
            let terms = h.terms().map(|(k, m)| (k, re(m))).collect();
            Ok(Self::new(name, re(h.constant_part()), terms))
        } else {
            real_embed(name, h)
        }
    }

    /// Plain-text listing: header, constant block, then one block per
    /// variable coefficient.
    pub fn dump_text(&self, vars: &VariableTable) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "lmi {} size {} margin {:e}", self.name, self.size(), self.margin);
        let write_mat = |s: &mut String, m: &DMatrix<f64>| {
            for i in 0..m.nrows() {
                let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.17e}", m[(i, j)])).collect();
                let _ = writeln!(s, "{}", row.join(" "));
            }
        };
        let _ = writeln!(s, "constant");
        write_mat(&mut s, &self.constant);
        for (k, m) in &self.terms {
            let _ = writeln!(s, "var {} {}", k, vars.scalar_name(*k));
            write_mat(&mut s, m);
        }
        let _ = writeln!(s, "end");
        s
    }
}

fn check_hermitian(h: &AffineMatrix) -> Result<()> {
    if h.nrows() != h.ncols() {
        return Err(Error::Dimension(format!("LMI block is {}x{}", h.nrows(), h.ncols())));
    }
    let defect = h.hermitian_defect();
    if defect > HERMITIAN_TOL * h.scale_hint() {
        return Err(Error::NonHermitian(defect));
    }
    Ok(())
}

/// `H_r + j H_i  ->  [[H_r, -H_i], [H_i, H_r]]`, applied to the constant
/// and every coefficient. Preserves definiteness and doubles each eigenvalue.
pub fn real_embed(name: &str, h: &AffineMatrix) -> Result<AffineLmi> {
    check_hermitian(h)?;
    let embed = |m: &CMat| {
        let d = m.nrows();
        let mut out = DMatrix::<f64>::zeros(2 * d, 2 * d);
        for i in 0..d {
            for j in 0..d {
                let z = m[(i, j)];
                out[(i, j)] = z.re;
                out[(i + d, j + d)] = z.re;
                out[(i, j + d)] = -z.im;
                out[(i + d, j)] = z.im;
            }
        }
        out
    };
    let terms = h.terms().map(|(k, m)| (k, embed(m))).collect();
    Ok(AffineLmi::new(name, embed(h.constant_part()), terms))
}

/// Embedding of a constant Hermitian matrix.
pub fn embed_matrix(h: &CMat) -> Result<DMatrix<f64>> {
    Ok(real_embed("", &AffineMatrix::constant(h.clone()))?.constant)
}
