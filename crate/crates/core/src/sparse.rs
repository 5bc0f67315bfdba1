//! Sparse symmetric matrices and an envelope (profile) Cholesky factorization.

use crate::error::{Error, Result};

/// Symmetric matrix in CSR form with both triangles stored.
#[derive(Clone, Debug, PartialEq)]
pub struct SymCsr {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl SymCsr {
    /// Assemble from upper/lower triplets; duplicates are summed. Each off-diagonal
    /// triplet `(i, j, v)` is mirrored to `(j, i, v)`, so pass each pair once.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            rows[i].push((j, v));
            if i != j {
                rows[j].push((i, v));
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (j, v) in row {
                if last == Some(j) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    vals.push(v);
                    last = Some(j);
                }
            }
            row_ptr.push(col_idx.len());
        }
        SymCsr { n, row_ptr, col_idx, vals }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec(x, &mut y);
        y
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| {
                let mut s = 0.0;
                for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                    s += self.vals[k] * y[self.col_idx[k]];
                }
                x[i] * s
            })
            .sum()
    }

    /// Largest |A_ij − A_ji| relative to the largest |A_ij|.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                scale = scale.max(v.abs());
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    /// Gershgorin interval enclosing the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.n {
            let (mut d, mut r) = (0.0, 0.0);
            for (j, v) in self.row(i) {
                if j == i {
                    d += v;
                } else {
                    r += v.abs();
                }
            }
            lo = lo.min(d - r);
            hi = hi.max(d + r);
        }
        (lo, hi)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }
}

/// Cholesky factor `L Lᵀ = A − σ I` stored over the lower envelope of `A`.
///
/// Row `i` keeps columns `first[i]..=i`; fill-in is confined to that profile.
#[derive(Clone, Debug)]
pub struct EnvelopeCholesky {
    n: usize,
    first: Vec<usize>,
    offset: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &SymCsr, shift: f64) -> Result<Self> {
        let n = a.n();
        let mut first = Vec::with_capacity(n);
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for i in 0..n {
            let f = a.row(i).map(|(j, _)| j).filter(|&j| j <= i).min().unwrap_or(i);
            first.push(f);
            offset.push(offset[i] + (i - f + 1));
        }
        let mut data = vec![0.0; offset[n]];
        for i in 0..n {
            let base = offset[i];
            for (j, v) in a.row(i) {
                if j <= i {
                    data[base + j - first[i]] += v;
                }
            }
            data[base + i - first[i]] -= shift;
        }

        for i in 0..n {
            let fi = first[i];
            let (head, row_i) = data.split_at_mut(offset[i]);
            let row_i = &mut row_i[..i - fi + 1];
            for j in fi..i {
                let fj = first[j];
                let start = fi.max(fj);
                let row_j = &head[offset[j]..offset[j] + (j - fj + 1)];
                let dot = dot(&row_i[start - fi..j - fi], &row_j[start - fj..j - fj]);
                let ljj = row_j[j - fj];
                row_i[j - fi] = (row_i[j - fi] - dot) / ljj;
            }
            let sq = dot(&row_i[..i - fi], &row_i[..i - fi]);
            let d = row_i[i - fi] - sq;
            if !(d > 0.0) {
                return Err(Error::Assembly(format!(
                    "shifted matrix is not positive definite (pivot {d:.3e} at row {i}, shift {shift})"
                )));
            }
            row_i[i - fi] = d.sqrt();
        }
        Ok(EnvelopeCholesky { n, first, offset, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Stored entries, a proxy for factor cost.
    pub fn profile_len(&self) -> usize {
        self.data.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[self.offset[i]..self.offset[i + 1]]
    }

    /// Solve `(A − σ I) x = b` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        for i in 0..self.n {
            let fi = self.first[i];
            let row = self.row(i);
            let s = dot(&row[..i - fi], &x[fi..i]);
            x[i] = (x[i] - s) / row[i - fi];
        }
        for i in (0..self.n).rev() {
            let fi = self.first[i];
            let row = self.row(i);
            let xi = x[i] / row[i - fi];
            x[i] = xi;
            for (xj, l) in x[fi..i].iter_mut().zip(&row[..i - fi]) {
                *xj -= l * xi;
            }
        }
    }
    /// Solve for several right-hand sides with one pass over the factor.
    pub fn solve_many(&self, rhs: &mut [Vec<f64>]) {
        let b = rhs.len();
        if b == 0 {
            return;
        }
        // interleaved copy: x[i * b + c] is entry i of vector c
        let mut x = vec![0.0; self.n * b];
        for (c, v) in rhs.iter().enumerate() {
            assert_eq!(v.len(), self.n, "right-hand side has the wrong length");
            for (i, &e) in v.iter().enumerate() {
                x[i * b + c] = e;
            }
        }
        let mut s = vec![0.0; b];
        for i in 0..self.n {
            let fi = self.first[i];
            let row = self.row(i);
            s.iter_mut().for_each(|v| *v = 0.0);
            for (k, &l) in row[..i - fi].iter().enumerate() {
                let xj = &x[(fi + k) * b..(fi + k + 1) * b];
                s.iter_mut().zip(xj).for_each(|(acc, v)| *acc += l * v);
            }
            let d = row[i - fi];
            for (c, sc) in s.iter().enumerate() {
                x[i * b + c] = (x[i * b + c] - sc) / d;
            }
        }
        for i in (0..self.n).rev() {
            let fi = self.first[i];
            let row = self.row(i);
            let d = row[i - fi];
            let (head, tail) = x.split_at_mut(i * b);
            let xi = &mut tail[..b];
            xi.iter_mut().for_each(|v| *v /= d);
            for (k, &l) in row[..i - fi].iter().enumerate() {
                let xj = &mut head[(fi + k) * b..(fi + k + 1) * b];
                xj.iter_mut().zip(xi.iter()).for_each(|(t, v)| *t -= l * v);
            }
        }
        for (c, v) in rhs.iter_mut().enumerate() {
            for (i, e) in v.iter_mut().enumerate() {
                *e = x[i * b + c];
            }
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators let the compiler vectorize
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let p = 4 * k;
        acc[0] += a[p] * b[p];
        acc[1] += a[p + 1] * b[p + 1];
        acc[2] += a[p + 2] * b[p + 2];
        acc[3] += a[p + 3] * b[p + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for p in 4 * chunks..a.len() {
        s += a[p] * b[p];
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d_periodic(n: usize) -> SymCsr {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            t.push((i, (i + 1) % n, -1.0));
        }
        SymCsr::from_triplets(n, &t)
    }

    #[test]
    fn duplicates_are_summed_and_mirrored() {
        let a = SymCsr::from_triplets(3, &[(0, 0, 1.0), (0, 0, 2.0), (0, 2, -1.0)]);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(2, 0), -1.0);
        assert_eq!(a.get(0, 2), -1.0);
        assert_eq!(a.asymmetry(), 0.0);
    }

    #[test]
    fn envelope_cholesky_solves_wrapped_system() {
        // periodic coupling puts an entry in the far corner of the envelope
        let a = laplacian_1d_periodic(9);
        let chol = EnvelopeCholesky::factor(&a, -0.5).unwrap();
        let x_true: Vec<f64> = (0..9).map(|i| (i as f64 * 0.7).cos()).collect();
        let mut b = a.apply(&x_true);
        for (bi, xi) in b.iter_mut().zip(&x_true) {
            *bi += 0.5 * xi;
        }
        chol.solve_in_place(&mut b);
        for (u, v) in b.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn shift_above_spectrum_bottom_is_rejected() {
        let a = laplacian_1d_periodic(6);
        // smallest eigenvalue is 0
        assert!(EnvelopeCholesky::factor(&a, 0.1).is_err());
    }

    #[test]
    fn gershgorin_bounds_tridiagonal() {
        let a = laplacian_1d_periodic(5);
        assert_eq!(a.gershgorin(), (0.0, 4.0));
    }

    #[test]
    fn many_right_hand_sides_match_single_solves() {
        let a = laplacian_1d_periodic(11);
        let chol = EnvelopeCholesky::factor(&a, -0.3).unwrap();
        let mut many: Vec<Vec<f64>> = (0..3).map(|c| (0..11).map(|i| ((i * (c + 2)) as f64).sin()).collect()).collect();
        let singles: Vec<Vec<f64>> = many
            .iter()
            .map(|v| {
                let mut x = v.clone();
                chol.solve_in_place(&mut x);
                x
            })
            .collect();
        chol.solve_many(&mut many);
        for (m, s) in many.iter().zip(&singles) {
            for (u, v) in m.iter().zip(s) {
                assert!((u - v).abs() < 1e-13);
            }
        }
    }
}
