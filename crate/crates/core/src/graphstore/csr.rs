use crate::error::{Error, Result};
use crate::numkit::Matrix;

/// Compressed sparse row matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(
        rows: usize,
        cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        vals: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != rows + 1
            || col_idx.len() != vals.len()
            || row_ptr.last() != Some(&col_idx.len())
            || row_ptr.windows(2).any(|w| w[0] > w[1])
            || col_idx.iter().any(|&c| c >= cols)
        {
            return Err(Error::shape("csr", format!("inconsistent {rows}x{cols} CSR")));
        }
        Ok(CsrMatrix {
            rows,
            cols,
            row_ptr,
            col_idx,
            vals,
        })
    }

    /// Builds from per-row `(col, value)` lists.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        for r in &rows {
            for &(c, v) in r {
                col_idx.push(c);
                vals.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix::new(rows.len(), cols, row_ptr, col_idx, vals)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn vals(&self) -> &[f64] {
        &self.vals
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[s..e].iter().copied().zip(self.vals[s..e].iter().copied())
    }

    pub fn row_len(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                m.set(i, j, m.get(i, j) + v);
            }
        }
        m
    }

    /// `self · x`
    pub fn spmm(&self, x: &Matrix) -> Result<Matrix> {
        if self.cols != x.rows() {
            return Err(Error::shape(
                "spmm",
                format!("{}x{} · {:?}", self.rows, self.cols, x.shape()),
            ));
        }
        let mut out = Matrix::zeros(self.rows, x.cols());
        for i in 0..self.rows {
            let o = out.row_mut(i);
            for (j, v) in self.row(i) {
                for (oo, &xv) in o.iter_mut().zip(x.row(j)) {
                    *oo += v * xv;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · g`
    pub fn spmm_t(&self, g: &Matrix) -> Result<Matrix> {
        if self.rows != g.rows() {
            return Err(Error::shape(
                "spmm_t",
                format!("({}x{})ᵀ · {:?}", self.rows, self.cols, g.shape()),
            ));
        }
        let mut out = Matrix::zeros(self.cols, g.cols());
        for i in 0..self.rows {
            let gi = g.row(i);
            for (j, v) in self.row(i) {
                for (oo, &gv) in out.row_mut(j).iter_mut().zip(gi) {
                    *oo += v * gv;
                }
            }
        }
        Ok(out)
    }
}
