//! Lowest eigenpairs of a sparse symmetric matrix.
//!
//! The operator `(A − σ I)⁻¹` is applied through an envelope Cholesky factor, with σ
//! below the spectrum, and its dominant eigenspace is found by a thick-restarted
//! block Krylov iteration with Rayleigh–Ritz extraction. Blocks make exactly
//! degenerate eigenvalues come out with full multiplicity.

use std::collections::VecDeque;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sparse::{dot, EnvelopeCholesky, SymCsr};

#[derive(Clone, Debug)]
pub struct EigenOptions {
    /// Residual bound ‖A x − λ x‖ for unit x.
    pub tol: f64,
    pub max_restarts: usize,
    /// Shift below the lowest eigenvalue; Gershgorin's lower bound when `None`.
    pub lower_bound: Option<f64>,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { tol: 1e-9, max_restarts: 200, lower_bound: None, seed: 0x5eed_0f_d05 }
    }
}

/// Ascending eigenvalues with unit eigenvectors (one `Vec` per pair) and residual norms.
#[derive(Clone, Debug)]
pub struct LowestEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
}

pub fn lowest_eigenpairs(a: &SymCsr, k: usize, opts: &EigenOptions) -> Result<LowestEigen> {
    let n = a.n();
    if k == 0 || k > n {
        return Err(Error::Invalid(format!("requested {k} eigenpairs of a {n}×{n} matrix")));
    }
    let block = (k + 2).min(n);
    let keep = block;
    let max_dim = keep + 4 * block;
    if n <= max_dim {
        return dense_lowest(a, k);
    }

    let sigma = opts.lower_bound.unwrap_or_else(|| a.gershgorin().0) - margin(a);
    let chol = EnvelopeCholesky::factor(a, sigma)?;
    let apply = |vs: &[Vec<f64>]| {
        let mut xs = vs.to_vec();
        chol.solve_many(&mut xs);
        xs
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_dim);
    let mut images: Vec<Vec<f64>> = Vec::with_capacity(max_dim);
    let mut pending: VecDeque<usize> = VecDeque::new();
    for _ in 0..block {
        let v = random_vector(n, &mut rng);
        let idx = push_orthonormal(&mut basis, v, n, &mut rng);
        pending.push_back(idx);
    }
    images.extend(apply(&basis));

    let mut worst = f64::INFINITY;
    for _restart in 0..=opts.max_restarts {
        while basis.len() < max_dim {
            let start = basis.len();
            let take = block.min(max_dim - start);
            for _ in 0..take {
                let src = pending.pop_front().expect("expansion queue never drains");
                let idx = push_orthonormal(&mut basis, images[src].clone(), n, &mut rng);
                pending.push_back(idx);
            }
            images.extend(apply(&basis[start..]));
        }

        // Rayleigh–Ritz on the inverse operator
        let m = basis.len();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = 0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i]));
                t[(i, j)] = v;
                t[(j, i)] = v;
            }
        }
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&p, &q| eig.eigenvalues[q].total_cmp(&eig.eigenvalues[p]));

        let mut ritz = Vec::with_capacity(keep);
        let mut ritz_images: Vec<Vec<f64>> = Vec::with_capacity(keep);
        for &c in order.iter().take(keep) {
            let s = eig.eigenvectors.column(c);
            ritz.push(combine(&basis, s.as_slice()));
            ritz_images.push(combine(&images, s.as_slice()));
        }

        // One fresh inverse-iteration step on the wanted Ritz vectors, then Rayleigh–Ritz
        // on A itself. Combined images carry rounding noise that A amplifies by its norm;
        // freshly solved vectors do not.
        let mut fresh: Vec<Vec<f64>> = Vec::with_capacity(k);
        let mut polished_from = ritz[..k].to_vec();
        chol.solve_many(&mut polished_from);
        for (z, img) in polished_from.into_iter().zip(ritz_images.iter_mut()) {
            push_orthonormal(&mut fresh, z.clone(), n, &mut rng);
            *img = z;
        }
        let a_fresh: Vec<Vec<f64>> = fresh.iter().map(|y| a.apply(y)).collect();
        let mut g = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let v = 0.5 * (dot(&fresh[i], &a_fresh[j]) + dot(&fresh[j], &a_fresh[i]));
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        let small = SymmetricEigen::new(g);
        let mut ord: Vec<usize> = (0..k).collect();
        ord.sort_by(|&p, &q| small.eigenvalues[p].total_cmp(&small.eigenvalues[q]));
        let mut values = Vec::with_capacity(k);
        let mut residuals = Vec::with_capacity(k);
        let mut wanted = Vec::with_capacity(k);
        for &c in &ord {
            let s = small.eigenvectors.column(c);
            let y = combine(&fresh, s.as_slice());
            let ay = a.apply(&y);
            let yy = dot(&y, &y);
            let lambda = dot(&y, &ay) / yy;
            let r: f64 = ay.iter().zip(&y).map(|(p, q)| (p - lambda * q).powi(2)).sum::<f64>().sqrt();
            values.push(lambda);
            residuals.push(r / yy.sqrt());
            wanted.push(y);
        }
        worst = residuals.iter().cloned().fold(0.0, f64::max);
        if worst <= opts.tol {
            let mut pairs: Vec<(f64, Vec<f64>, f64)> = values
                .into_iter()
                .zip(wanted)
                .zip(residuals)
                .map(|((l, mut v), r)| {
                    let nv = dot(&v, &v).sqrt();
                    v.iter_mut().for_each(|x| *x /= nv);
                    (l, v, r)
                })
                .collect();
            pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
            let mut out = LowestEigen { values: Vec::new(), vectors: Vec::new(), residuals: Vec::new() };
            for (l, v, r) in pairs {
                out.values.push(l);
                out.vectors.push(v);
                out.residuals.push(r);
            }
            return Ok(out);
        }

        basis = ritz;
        images = ritz_images;
        pending = (0..keep).collect();
    }
    Err(Error::NoConvergence { restarts: opts.max_restarts, residual: worst })
}

/// Small distance kept between the shift and the lower bound so the factor stays well conditioned.
fn margin(a: &SymCsr) -> f64 {
    let (lo, hi) = a.gershgorin();
    (1e-5 * (hi - lo)).max(1e-2)
}

fn dense_lowest(a: &SymCsr, k: usize) -> Result<LowestEigen> {
    let dense = a.to_dense();
    let eig = SymmetricEigen::new(dense.clone());
    let mut order: Vec<usize> = (0..a.n()).collect();
    order.sort_by(|&p, &q| eig.eigenvalues[p].total_cmp(&eig.eigenvalues[q]));
    let mut out = LowestEigen { values: Vec::new(), vectors: Vec::new(), residuals: Vec::new() };
    for &c in order.iter().take(k) {
        let v: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
        let av = a.apply(&v);
        let l = eig.eigenvalues[c];
        out.residuals.push(av.iter().zip(&v).map(|(p, q)| (p - l * q).powi(2)).sum::<f64>().sqrt());
        out.values.push(l);
        out.vectors.push(v);
    }
    Ok(out)
}

fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>() - 0.5).collect()
}

/// Orthogonalize `v` against `basis` (two Gram–Schmidt passes), normalize and append.
/// A vector that collapses is replaced by a fresh random direction.
fn push_orthonormal(basis: &mut Vec<Vec<f64>>, mut v: Vec<f64>, n: usize, rng: &mut ChaCha8Rng) -> usize {
    loop {
        let start = dot(&v, &v).sqrt();
        for _ in 0..2 {
            for b in basis.iter() {
                let c = dot(b, &v);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let nv = dot(&v, &v).sqrt();
        if nv > 1e-10 * start && nv > 0.0 {
            v.iter_mut().for_each(|x| *x /= nv);
            basis.push(v);
            return basis.len() - 1;
        }
        v = random_vector(n, rng);
    }
}

fn combine(vectors: &[Vec<f64>], coeffs: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; vectors[0].len()];
    for (v, &c) in vectors.iter().zip(coeffs) {
        out.iter_mut().zip(v).for_each(|(o, x)| *o += c * x);
    }
    out
}
