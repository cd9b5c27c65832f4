//! Decision-variable registry shared by every LMI of one problem.
//!
//! Each declared block owns a contiguous range of real scalars:
//! - `Scalar`: one entry.
//! - `Symmetric(k)`: upper triangle, row-major (`(0,0), (0,1), ..., (k-1,k-1)`).
//! - `Hermitian(k)`: the symmetric real part as above, then the strictly upper
//!   imaginary part row-major; entry `(i,j)` gets `+j`, `(j,i)` gets `-j`.
//! - `DiagonalPositive(n)`: the diagonal, bounded below by the solver floor.
//! - `Pinned(v)`: no scalar; always evaluates to `v`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use super::affine::AffineMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum VarKind {
    Scalar,
    Pinned(f64),
    Symmetric(usize),
    Hermitian(usize),
    DiagonalPositive(usize),
}

impl VarKind {
    pub fn scalar_count(&self) -> usize {
        match *self {
            VarKind::Scalar => 1,
            VarKind::Pinned(_) => 0,
            VarKind::Symmetric(k) => k * (k + 1) / 2,
            VarKind::Hermitian(k) => k * k,
            VarKind::DiagonalPositive(n) => n,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            VarKind::Scalar => "scalar",
            VarKind::Pinned(_) => "pinned",
            VarKind::Symmetric(_) => "symmetric",
            VarKind::Hermitian(_) => "hermitian",
            VarKind::DiagonalPositive(_) => "diagonal-positive",
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            VarKind::Scalar | VarKind::Pinned(_) => 1,
            VarKind::Symmetric(k) | VarKind::Hermitian(k) | VarKind::DiagonalPositive(k) => k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct BlockId(pub usize);

#[derive(Debug, Clone, Serialize)]
pub struct VarBlock {
    pub name: String,
    pub kind: VarKind,
    pub offset: usize,
    /// Lower bound `Q >= floor * I` for symmetric/Hermitian blocks.
    pub psd_floor: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct VariableTable {
    blocks: Vec<VarBlock>,
    scalars: usize,
}

impl VariableTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn blocks(&self) -> &[VarBlock] {
        &self.blocks
    }

    pub fn block(&self, id: BlockId) -> &VarBlock {
        &self.blocks[id.0]
    }

    /// Number of real scalars handed to the solver.
    pub fn scalar_count(&self) -> usize {
        self.scalars
    }

    pub fn find(&self, name: &str) -> Option<BlockId> {
        self.blocks.iter().position(|b| b.name == name).map(BlockId)
    }

    fn declare(&mut self, name: &str, kind: VarKind, psd_floor: Option<f64>) -> Result<BlockId> {
        if self.find(name).is_some() {
            return Err(Error::Problem(format!("variable '{name}' declared twice")));
        }
        let id = BlockId(self.blocks.len());
        self.blocks.push(VarBlock {
            name: name.to_string(),
            kind,
            offset: self.scalars,
            psd_floor,
        });
        self.scalars += kind.scalar_count();
        Ok(id)
    }

    pub fn scalar(&mut self, name: &str) -> Result<BlockId> {
        self.declare(name, VarKind::Scalar, None)
    }

    pub fn pinned(&mut self, name: &str, value: f64) -> Result<BlockId> {
        self.declare(name, VarKind::Pinned(value), None)
    }

    pub fn symmetric(&mut self, name: &str, k: usize, psd_floor: Option<f64>) -> Result<BlockId> {
        self.declare(name, VarKind::Symmetric(k), psd_floor)
    }

    pub fn hermitian(&mut self, name: &str, k: usize, psd_floor: Option<f64>) -> Result<BlockId> {
        self.declare(name, VarKind::Hermitian(k), psd_floor)
    }

    pub fn diagonal_positive(&mut self, name: &str, n: usize) -> Result<BlockId> {
        self.declare(name, VarKind::DiagonalPositive(n), None)
    }

    /// Scalar index ranges of symmetric and Hermitian parts, in declaration
    /// order, as `(row, col, is_imag)` per scalar.
    fn layout(kind: VarKind) -> Vec<(usize, usize, bool)> {
        match kind {
            VarKind::Scalar => vec![(0, 0, false)],
            VarKind::Pinned(_) => vec![],
            VarKind::Symmetric(k) => upper(k, true).map(|(i, j)| (i, j, false)).collect(),
            VarKind::Hermitian(k) => upper(k, true)
                .map(|(i, j)| (i, j, false))
                .chain(upper(k, false).map(|(i, j)| (i, j, true)))
                .collect(),
            VarKind::DiagonalPositive(n) => (0..n).map(|i| (i, i, false)).collect(),
        }
    }

    /// Affine expression for a declared block.
    pub fn expr(&self, id: BlockId) -> AffineMatrix {
        let blk = self.block(id);
        let dim = blk.kind.dim();
        if let VarKind::Pinned(v) = blk.kind {
            return AffineMatrix::constant_real(&DMatrix::from_element(1, 1, v));
        }
        let mut out = AffineMatrix::zeros(dim, dim);
        for (s, (i, j, imag)) in Self::layout(blk.kind).into_iter().enumerate() {
            let mut coef = DMatrix::<Complex64>::zeros(dim, dim);
            if imag {
                coef[(i, j)] = Complex64::new(0.0, 1.0);
                coef[(j, i)] = Complex64::new(0.0, -1.0);
            } else {
                coef[(i, j)] = Complex64::new(1.0, 0.0);
                coef[(j, i)] = Complex64::new(1.0, 0.0);
            }
            out.add_term(blk.offset + s, coef);
        }
        out
    }

    /// Block value under an assignment of all solver scalars.
    pub fn value(&self, id: BlockId, values: &[f64]) -> DMatrix<Complex64> {
        self.expr(id).evaluate(values)
    }

    /// Writes a block value into the scalar vector (inverse of [`value`](Self::value)).
    /// The matrix is assumed to have the block's structure.
    pub fn assign(&self, id: BlockId, m: &DMatrix<Complex64>, values: &mut [f64]) {
        let blk = self.block(id);
        for (s, (i, j, imag)) in Self::layout(blk.kind).into_iter().enumerate() {
            values[blk.offset + s] = if imag { m[(i, j)].im } else { m[(i, j)].re };
        }
    }

    /// Block owning a solver scalar.
    pub fn block_of(&self, idx: usize) -> Option<&VarBlock> {
        self.blocks
            .iter()
            .find(|b| idx >= b.offset && idx < b.offset + b.kind.scalar_count())
    }

    /// Human-readable name of one solver scalar.
    pub fn scalar_name(&self, idx: usize) -> String {
        for blk in &self.blocks {
            let count = blk.kind.scalar_count();
            if idx >= blk.offset && idx < blk.offset + count {
                let (i, j, imag) = Self::layout(blk.kind)[idx - blk.offset];
                return match blk.kind {
                    VarKind::Scalar => blk.name.clone(),
                    _ if imag => format!("{}.im[{i},{j}]", blk.name),
                    _ => format!("{}[{i},{j}]", blk.name),
                };
            }
        }
        format!("#{idx}")
    }

    /// Solver scalars carrying a positive lower bound.
    pub fn positive_scalars(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .filter_map(|b| match b.kind {
                VarKind::DiagonalPositive(n) => Some(b.offset..b.offset + n),
                _ => None,
            })
            .flatten()
            .collect()
    }
}

fn upper(k: usize, with_diag: bool) -> impl Iterator<Item = (usize, usize)> {
    (0..k).flat_map(move |i| {
        let start = if with_diag { i } else { i + 1 };
        (start..k).map(move |j| (i, j))
    })
}
