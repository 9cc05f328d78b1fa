use super::matrix::{Matrix, Real};

/// Square CSR matrix used for normalized adjacency products.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    n: usize,
    offsets: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<T>,
}

impl<T: Real> SparseMatrix<T> {
    /// Rows given as `(column, value)` lists; columns need not be sorted.
    pub fn from_rows(rows: Vec<Vec<(usize, T)>>) -> Self {
        let n = rows.len();
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                cols.push(c as u32);
                vals.push(v);
            }
            offsets.push(cols.len());
        }
        SparseMatrix {
            n,
            offsets,
            cols,
            vals,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.cols[r.clone()]
            .iter()
            .zip(&self.vals[r])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.row(i)
            .find(|&(c, _)| c == j)
            .map_or(T::zero(), |(_, v)| v)
    }

    pub fn to_dense(&self) -> Matrix<T> {
        let mut m = Matrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m.set(i, j, v);
            }
        }
        m
    }

    /// `self * x`.
    pub fn mul(&self, x: &Matrix<T>) -> Matrix<T> {
        let d = x.cols();
        let mut out = Matrix::zeros(self.n, d);
        for i in 0..self.n {
            let acc = out.row_mut(i);
            for k in self.offsets[i]..self.offsets[i + 1] {
                let v = self.vals[k];
                let xr = x.row(self.cols[k] as usize);
                for (a, &b) in acc.iter_mut().zip(xr) {
                    *a += v * b;
                }
            }
        }
        out
    }

    /// `selfᵀ * g`.
    pub fn mul_transposed(&self, g: &Matrix<T>) -> Matrix<T> {
        let d = g.cols();
        let mut out = Matrix::zeros(self.n, d);
        for i in 0..self.n {
            for k in self.offsets[i]..self.offsets[i + 1] {
                let v = self.vals[k];
                let j = self.cols[k] as usize;
                for (a, &b) in out.row_mut(j).iter_mut().zip(g.row(i)) {
                    *a += v * b;
                }
            }
        }
        out
    }
}
