//! Compressed sparse row matrices.

/// Square or rectangular sparse matrix in compressed-row form. Duplicate
/// triplets are summed on construction, columns are sorted within each row.
#[derive(Debug, Clone)]
pub struct Csr {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Csr {
        let mut entries: Vec<(usize, usize, f64)> = triplets.to_vec();
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last = None;
        for &(r, c, v) in &entries {
            debug_assert!(r < rows && c < cols, "triplet ({r},{c}) out of bounds");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                vals.push(v);
                last = Some((r, c));
            }
            row_ptr[r + 1] = col_idx.len();
        }
        // rows with no entries inherit the running prefix
        for r in 0..rows {
            if row_ptr[r + 1] < row_ptr[r] {
                row_ptr[r + 1] = row_ptr[r];
            }
        }
        Csr { rows, cols, row_ptr, col_idx, vals }
    }

    pub fn zeros(rows: usize, cols: usize) -> Csr {
        Csr { rows, cols, row_ptr: vec![0; rows + 1], col_idx: Vec::new(), vals: Vec::new() }
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

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.col_idx[lo..hi].iter().copied().zip(self.vals[lo..hi].iter().copied())
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        self.matvec_acc(x, &mut y, 1.0);
        y
    }

    /// y += scale * A x
    pub fn matvec_acc(&self, x: &[f64], y: &mut [f64], scale: f64) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (i, out) in y.iter_mut().enumerate() {
            let lo = self.row_ptr[i];
            let hi = self.row_ptr[i + 1];
            let mut acc = 0.0;
            for k in lo..hi {
                acc += self.vals[k] * x[self.col_idx[k]];
            }
            *out += scale * acc;
        }
    }

    /// Extract the submatrix with the given row and column index sets, in the
    /// given order. Column lookup goes through a scatter map, so repeated
    /// extraction from a large matrix stays linear in its nonzeros.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Csr {
        let mut col_pos = vec![usize::MAX; self.cols];
        for (p, &c) in cols.iter().enumerate() {
            col_pos[c] = p;
        }
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        for &r in rows {
            let mut entries: Vec<(usize, f64)> = self
                .row(r)
                .filter_map(|(c, v)| {
                    let p = col_pos[c];
                    (p != usize::MAX).then_some((p, v))
                })
                .collect();
            entries.sort_unstable_by_key(|&(p, _)| p);
            for (p, v) in entries {
                col_idx.push(p);
                vals.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Csr { rows: rows.len(), cols: cols.len(), row_ptr, col_idx, vals }
    }

    /// self + scale * other, matching shapes required.
    pub fn add_scaled(&self, other: &Csr, scale: f64) -> Csr {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.rows {
            for (c, v) in self.row(i) {
                triplets.push((i, c, v));
            }
            for (c, v) in other.row(i) {
                triplets.push((i, c, scale * v));
            }
        }
        Csr::from_triplets(self.rows, self.cols, &triplets)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (c, v) in self.row(i) {
                m[(i, c)] += v;
            }
        }
        m
    }

    /// Largest absolute entry (0 for an empty matrix).
    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
