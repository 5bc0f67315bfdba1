//! Galerkin projection of the Schrödinger operator onto an orthonormal grid basis.
//!
//! The reduced Hamiltonian is `H = T + U + B`: interior kinetic energy, potential energy
//! (kept as an affine sum of precomputed term matrices) and the boundary flux term.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::dns::{assemble_kinetic, kinetic_coefficient, Unknowns};
use crate::domain::{BoundaryCondition, Grid, MassField, PotentialAssembly, ScalarField, ScenarioParams};
use crate::error::{Error, Result};
use crate::pod::{symmetrize, PodBasis};

/// Any set of grid-sampled modes, orthonormal under the grid weights.
pub trait GridBasis {
    /// One mode per column.
    fn modes(&self) -> &DMatrix<f64>;

    /// Analytic `(∂x, ∂y)` of every mode, when available.
    fn exact_gradients(&self, _grid: &Grid) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        None
    }

    fn n_modes(&self) -> usize {
        self.modes().ncols()
    }
}

impl GridBasis for PodBasis {
    fn modes(&self) -> &DMatrix<f64> {
        &self.modes
    }
}

impl GridBasis for DMatrix<f64> {
    fn modes(&self) -> &DMatrix<f64> {
        self
    }
}

/// How the interior kinetic matrix is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KineticRoute {
    /// `η_iᵀ K η_j` with the DNS kinetic form; exact Rayleigh–Ritz w.r.t. the DNS operator.
    Stiffness,
    /// `Σ_p w_p c_p ∇η_i·∇η_j` with analytic gradients when the basis has them,
    /// otherwise central differences (one-sided at non-periodic edges).
    Gradient,
}

/// Tolerated ‖B‖/‖T‖ for the supported homogeneous and periodic boundary conditions.
pub const BOUNDARY_TOLERANCE: f64 = 1e-10;

/// Precomputed reduced matrices, all `M_max × M_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedModel {
    pub kinetic: DMatrix<f64>,
    pub potential_base: DMatrix<f64>,
    pub potential_terms: Vec<DMatrix<f64>>,
    pub boundary: DMatrix<f64>,
    pub param_names: Vec<String>,
    /// Largest relative asymmetry removed by symmetrization.
    pub asymmetry: f64,
}

impl ReducedModel {
    pub fn max_modes(&self) -> usize {
        self.kinetic.nrows()
    }

    /// ‖B‖_F / ‖T‖_F.
    pub fn boundary_ratio(&self) -> f64 {
        let t = self.kinetic.norm();
        if t == 0.0 {
            self.boundary.norm()
        } else {
            self.boundary.norm() / t
        }
    }
}

fn check_basis(modes: &DMatrix<f64>, grid: &Grid) -> Result<()> {
    if modes.nrows() != grid.len() {
        return Err(Error::Dimension(format!("basis has {} points, grid {}", modes.nrows(), grid.len())));
    }
    if modes.ncols() == 0 {
        return Err(Error::Invalid("empty basis".into()));
    }
    Ok(())
}

/// `U_ij = Σ_p w_p η_i(p) f(p) η_j(p)` by direct quadrature.
pub fn potential_matrix(modes: &DMatrix<f64>, grid: &Grid, field: &[f64]) -> DMatrix<f64> {
    let wf = DVector::from_iterator(grid.len(), grid.weights().iter().zip(field).map(|(w, f)| w * f));
    let mut scaled = modes.clone();
    for mut col in scaled.column_iter_mut() {
        col.component_mul_assign(&wf);
    }
    modes.tr_mul(&scaled)
}

/// Central-difference gradients of every column; one-sided second order at non-periodic edges.
pub fn finite_difference_gradients(modes: &DMatrix<f64>, grid: &Grid) -> (DMatrix<f64>, DMatrix<f64>) {
    let (nx, ny, h) = (grid.nx, grid.ny, grid.h);
    let mut gx = DMatrix::zeros(modes.nrows(), modes.ncols());
    let mut gy = DMatrix::zeros(modes.nrows(), modes.ncols());
    let derivative = |f: &dyn Fn(usize) -> f64, k: usize, n: usize, periodic: bool| -> f64 {
        if periodic {
            (f((k + 1) % n) - f((k + n - 1) % n)) / (2.0 * h)
        } else if n < 3 {
            if n == 2 {
                (f(1) - f(0)) / h
            } else {
                0.0
            }
        } else if k == 0 {
            (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * h)
        } else if k == n - 1 {
            (3.0 * f(n - 1) - 4.0 * f(n - 2) + f(n - 3)) / (2.0 * h)
        } else {
            (f(k + 1) - f(k - 1)) / (2.0 * h)
        }
    };
    for c in 0..modes.ncols() {
        let col = modes.column(c);
        for j in 0..ny {
            for i in 0..nx {
                let p = grid.index(i, j);
                gx[(p, c)] = derivative(&|a| col[grid.index(a, j)], i, nx, grid.bc.periodic_x());
                gy[(p, c)] = derivative(&|b| col[grid.index(i, b)], j, ny, grid.bc.periodic_y());
            }
        }
    }
    (gx, gy)
}

fn gradient_kinetic(gx: &DMatrix<f64>, gy: &DMatrix<f64>, grid: &Grid, coeff: &[f64]) -> DMatrix<f64> {
    potential_matrix(gx, grid, coeff) + potential_matrix(gy, grid, coeff)
}

fn stiffness_kinetic(modes: &DMatrix<f64>, grid: &Grid, mass: &MassField) -> Result<DMatrix<f64>> {
    let unknowns = Unknowns::new(grid);
    let k = assemble_kinetic(grid, mass, &unknowns)?;
    let mut kmodes = DMatrix::zeros(modes.nrows(), modes.ncols());
    for c in 0..modes.ncols() {
        let col = modes.column(c);
        let x = unknowns.gather(col.as_slice());
        let y = k.apply(&x);
        for (&p, v) in unknowns.nodes.iter().zip(y) {
            kmodes[(p, c)] = v;
        }
    }
    let mut restricted = modes.clone();
    for (p, keep) in unknowns.lookup.iter().enumerate() {
        if keep.is_none() {
            restricted.row_mut(p).fill(0.0);
        }
    }
    Ok(restricted.tr_mul(&kmodes))
}

/// `B_ij = −∮ η_i c ∂_n η_j dS`, using the flux each boundary condition prescribes:
/// zero on Neumann sides, zero trace on Dirichlet sides, and cancelling opposite faces
/// on periodic pairs.
fn boundary_matrix(
    modes: &DMatrix<f64>,
    gx: &DMatrix<f64>,
    gy: &DMatrix<f64>,
    grid: &Grid,
    coeff: &[f64],
) -> DMatrix<f64> {
    let m = modes.ncols();
    let mut b = DMatrix::zeros(m, m);
    let (nx, ny) = (grid.nx, grid.ny);
    // (points along the face, outward normal sign, x-normal?, condition)
    let sides: [(Vec<(usize, f64)>, f64, bool, BoundaryCondition); 4] = [
        ((0..ny).map(|j| (grid.index(0, j), grid.wy(j))).collect(), -1.0, true, grid.bc.left),
        (
            (0..ny).map(|j| (grid.index(if grid.bc.periodic_x() { 0 } else { nx - 1 }, j), grid.wy(j))).collect(),
            1.0,
            true,
            grid.bc.right,
        ),
        ((0..nx).map(|i| (grid.index(i, 0), grid.wx(i))).collect(), -1.0, false, grid.bc.bottom),
        (
            (0..nx).map(|i| (grid.index(i, if grid.bc.periodic_y() { 0 } else { ny - 1 }), grid.wx(i))).collect(),
            1.0,
            false,
            grid.bc.top,
        ),
    ];
    for (points, normal, along_x, bc) in sides.iter() {
        if *bc == BoundaryCondition::NeumannZero {
            continue;
        }
        let grad = if *along_x { gx } else { gy };
        for &(p, len) in points {
            for i in 0..m {
                let eta = modes[(p, i)];
                if eta == 0.0 {
                    continue;
                }
                for j in 0..m {
                    b[(i, j)] -= len * eta * coeff[p] * normal * grad[(p, j)];
                }
            }
        }
    }
    b
}

fn relative_asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax();
    if scale == 0.0 {
        return 0.0;
    }
    (m - m.transpose()).amax() / scale
}

pub fn assemble_reduced(
    basis: &dyn GridBasis,
    grid: &Grid,
    mass: &MassField,
    assembly: &PotentialAssembly,
    route: KineticRoute,
) -> Result<ReducedModel> {
    let modes = basis.modes();
    check_basis(modes, grid)?;
    if mass.len() != grid.len() || assembly.base.len() != grid.len() {
        return Err(Error::Dimension("mass or potential sampled on a different grid".into()));
    }
    let coeff = kinetic_coefficient(mass)?;
    let (gx, gy) = basis.exact_gradients(grid).unwrap_or_else(|| finite_difference_gradients(modes, grid));

    let mut kinetic = match route {
        KineticRoute::Stiffness => stiffness_kinetic(modes, grid, mass)?,
        KineticRoute::Gradient => gradient_kinetic(&gx, &gy, grid, &coeff),
    };
    let mut potential_base = potential_matrix(modes, grid, &assembly.base);
    let mut potential_terms: Vec<DMatrix<f64>> =
        assembly.terms.iter().map(|(_, shape)| potential_matrix(modes, grid, shape)).collect();
    let mut boundary = boundary_matrix(modes, &gx, &gy, grid, &coeff);

    let mut asymmetry = relative_asymmetry(&kinetic).max(relative_asymmetry(&potential_base));
    for t in &potential_terms {
        asymmetry = asymmetry.max(relative_asymmetry(t));
    }
    symmetrize(&mut kinetic);
    symmetrize(&mut potential_base);
    potential_terms.iter_mut().for_each(symmetrize);
    symmetrize(&mut boundary);

    let model = ReducedModel {
        kinetic,
        potential_base,
        potential_terms,
        boundary,
        param_names: assembly.terms.iter().map(|(n, _)| n.clone()).collect(),
        asymmetry,
    };
    if model.boundary_ratio() > BOUNDARY_TOLERANCE {
        return Err(Error::Assembly(format!(
            "boundary kinetic matrix does not vanish (‖B‖/‖T‖ = {:.3e})",
            model.boundary_ratio()
        )));
    }
    if asymmetry > 1e-10 {
        return Err(Error::Assembly(format!("reduced matrices asymmetric by {asymmetry:.3e}")));
    }
    Ok(model)
}

/// Leading `M × M` block of `T + U_base + Σ p_k U_k + B`.
pub fn evaluate_hamiltonian(model: &ReducedModel, params: &ScenarioParams, m: usize) -> Result<DMatrix<f64>> {
    if m == 0 || m > model.max_modes() {
        return Err(Error::Invalid(format!("mode count {m} outside 1..={}", model.max_modes())));
    }
    if params.values.len() != model.potential_terms.len() {
        return Err(Error::Dimension(format!(
            "expected {} parameters, got {}",
            model.potential_terms.len(),
            params.values.len()
        )));
    }
    let block = |a: &DMatrix<f64>| a.view((0, 0), (m, m)).into_owned();
    let mut h = block(&model.kinetic) + block(&model.potential_base) + block(&model.boundary);
    for (u, &p) in model.potential_terms.iter().zip(&params.values) {
        if p != 0.0 {
            h += block(u) * p;
        }
    }
    Ok(h)
}

/// Eigenpairs of the reduced Hamiltonian, ascending.
#[derive(Clone, Debug)]
pub struct ReducedSolution {
    pub energies: Vec<f64>,
    /// Column `k` holds the unit coefficient vector of state `k`.
    pub coeffs: DMatrix<f64>,
    pub m: usize,
}

impl ReducedSolution {
    pub fn coeff(&self, k: usize) -> &[f64] {
        &self.coeffs.as_slice()[k * self.m..(k + 1) * self.m]
    }
}

pub fn solve_reduced(h: &DMatrix<f64>) -> Result<ReducedSolution> {
    if !h.is_square() || h.nrows() == 0 {
        return Err(Error::Dimension(format!("reduced Hamiltonian is {}×{}", h.nrows(), h.ncols())));
    }
    if relative_asymmetry(h) > 1e-10 {
        return Err(Error::Invalid("reduced Hamiltonian is not symmetric".into()));
    }
    let m = h.nrows();
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&p, &q| eig.eigenvalues[p].total_cmp(&eig.eigenvalues[q]));
    let mut coeffs = DMatrix::zeros(m, m);
    let mut energies = Vec::with_capacity(m);
    for (k, &c) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(c).into_owned();
        let pivot = v.iter().cloned().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
        if pivot < 0.0 {
            v.neg_mut();
        }
        v /= v.norm();
        coeffs.set_column(k, &v);
        energies.push(eig.eigenvalues[c]);
    }
    Ok(ReducedSolution { energies, coeffs, m })
}

/// `ψ = Σ_{j<M} a_j η_j` on the full grid.
pub fn reconstruct(modes: &DMatrix<f64>, coeffs: &[f64]) -> Result<Vec<f64>> {
    if coeffs.is_empty() || coeffs.len() > modes.ncols() {
        return Err(Error::Dimension(format!("{} coefficients for a basis of {} modes", coeffs.len(), modes.ncols())));
    }
    let mut out = vec![0.0; modes.nrows()];
    for (j, &a) in coeffs.iter().enumerate() {
        if a != 0.0 {
            out.iter_mut().zip(modes.column(j).iter()).for_each(|(o, e)| *o += a * e);
        }
    }
    Ok(out)
}

/// Reconstruction restricted to a subset of grid points (coarse output).
pub fn reconstruct_at(modes: &DMatrix<f64>, coeffs: &[f64], points: &[usize]) -> Result<Vec<f64>> {
    if coeffs.is_empty() || coeffs.len() > modes.ncols() {
        return Err(Error::Dimension(format!("{} coefficients for a basis of {} modes", coeffs.len(), modes.ncols())));
    }
    Ok(points.iter().map(|&p| coeffs.iter().enumerate().map(|(j, a)| a * modes[(p, j)]).sum()).collect())
}

/// Coefficients `a_j = ∫ η_j ψ dΩ` of the first `m` modes.
pub fn project(modes: &DMatrix<f64>, grid: &Grid, psi: &[f64], m: usize) -> Vec<f64> {
    (0..m.min(modes.ncols())).map(|j| grid.inner(modes.column(j).as_slice(), psi)).collect()
}

/// Convenience for callers holding a single evaluated field.
pub fn monolithic_potential(modes: &DMatrix<f64>, grid: &Grid, u: &ScalarField) -> DMatrix<f64> {
    let mut m = potential_matrix(modes, grid, u);
    symmetrize(&mut m);
    m
}
