//! Finite-volume discretization of the effective-mass Schrödinger equation
//! `−∇·(ħ²/2m* ∇ψ) + U ψ = E ψ` and its lowest eigenpairs.
//!
//! Each grid point owns a dual cell of area `w_p` (the quadrature weight). The
//! discrete operator is the symmetric pair `(S, W)` with `S = K + W diag(U)`, where
//! `K` sums edge fluxes `c_face · (face length / h)` and `W = diag(w)`. Eigenpairs of
//! `S ψ = E W ψ` are found through the standard form `W^{-1/2} S W^{-1/2}`.

use nalgebra::DMatrix;

use crate::domain::{Grid, MassField, ScalarField};
use crate::eigen::{lowest_eigenpairs, EigenOptions};
use crate::error::{Error, Result};
use crate::sparse::SymCsr;
use crate::units::HBAR2_OVER_2M0;

/// Mapping between grid points and free unknowns (Dirichlet points are eliminated).
#[derive(Clone, Debug, PartialEq)]
pub struct Unknowns {
    /// Grid index of each unknown.
    pub nodes: Vec<usize>,
    /// Unknown index of each grid point, `None` on Dirichlet sides.
    pub lookup: Vec<Option<usize>>,
}

impl Unknowns {
    pub fn new(grid: &Grid) -> Self {
        let mut nodes = Vec::new();
        let mut lookup = vec![None; grid.len()];
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                if !grid.is_dirichlet(i, j) {
                    lookup[grid.index(i, j)] = Some(nodes.len());
                    nodes.push(grid.index(i, j));
                }
            }
        }
        Unknowns { nodes, lookup }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn gather(&self, field: &[f64]) -> Vec<f64> {
        self.nodes.iter().map(|&p| field[p]).collect()
    }

    pub fn scatter(&self, values: &[f64], n_grid: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_grid];
        for (&p, &v) in self.nodes.iter().zip(values) {
            out[p] = v;
        }
        out
    }
}

/// Kinetic coefficient ħ²/(2 m0 m_r) [eV nm²] at every grid point.
pub fn kinetic_coefficient(mass: &MassField) -> Result<Vec<f64>> {
    mass.iter()
        .map(|&m| {
            if m > 0.0 && m.is_finite() {
                Ok(HBAR2_OVER_2M0 / m)
            } else {
                Err(Error::Assembly(format!("non-positive effective mass {m}")))
            }
        })
        .collect()
}

/// Symmetric kinetic form `K` over the unknowns: `ψᵀ K ψ ≈ ∫ c |∇ψ|² dΩ`.
///
/// Face coefficients are harmonic means of `c` at the two end points.
pub fn assemble_kinetic(grid: &Grid, mass: &MassField, unknowns: &Unknowns) -> Result<SymCsr> {
    if mass.len() != grid.len() {
        return Err(Error::Dimension(format!("mass field has {} points, grid {}", mass.len(), grid.len())));
    }
    let c = kinetic_coefficient(mass)?;
    let mut trip = Vec::with_capacity(5 * unknowns.len());
    let mut edge = |p: usize, q: usize, a: f64| match (unknowns.lookup[p], unknowns.lookup[q]) {
        (Some(u), Some(v)) => {
            trip.push((u, u, a));
            trip.push((v, v, a));
            trip.push((u.min(v), u.max(v), -a));
        }
        (Some(u), None) | (None, Some(u)) => trip.push((u, u, a)),
        (None, None) => {}
    };
    let harmonic = |p: usize, q: usize| 2.0 * c[p] * c[q] / (c[p] + c[q]);
    let (nx, ny) = (grid.nx, grid.ny);
    let px = grid.bc.periodic_x() && nx > 2;
    let py = grid.bc.periodic_y() && ny > 2;
    for j in 0..ny {
        for i in 0..nx {
            let p = grid.index(i, j);
            if i + 1 < nx || px {
                let q = grid.index((i + 1) % nx, j);
                edge(p, q, harmonic(p, q) * grid.wy(j) / grid.h);
            }
            if j + 1 < ny || py {
                let q = grid.index(i, (j + 1) % ny);
                edge(p, q, harmonic(p, q) * grid.wx(i) / grid.h);
            }
        }
    }
    Ok(SymCsr::from_triplets(unknowns.len(), &trip))
}

/// Discrete Hamiltonian on a grid.
#[derive(Clone, Debug)]
pub struct DiscreteHamiltonian {
    pub grid: Grid,
    pub unknowns: Unknowns,
    /// Kinetic form `K` over the unknowns [eV nm²].
    pub kinetic: SymCsr,
    /// Potential energy at each unknown [eV].
    pub potential: Vec<f64>,
    /// Quadrature weight at each unknown [nm²].
    pub weights: Vec<f64>,
}

pub fn assemble_hamiltonian(grid: &Grid, mass: &MassField, potential: &ScalarField) -> Result<DiscreteHamiltonian> {
    if potential.len() != grid.len() {
        return Err(Error::Dimension(format!("potential has {} points, grid {}", potential.len(), grid.len())));
    }
    if potential.iter().any(|u| !u.is_finite()) {
        return Err(Error::Assembly("potential contains non-finite values".into()));
    }
    let unknowns = Unknowns::new(grid);
    if unknowns.is_empty() {
        return Err(Error::Assembly("grid has no interior unknowns".into()));
    }
    let kinetic = assemble_kinetic(grid, mass, &unknowns)?;
    Ok(DiscreteHamiltonian {
        potential: unknowns.gather(potential),
        weights: unknowns.gather(grid.weights()),
        grid: grid.clone(),
        unknowns,
        kinetic,
    })
}

impl DiscreteHamiltonian {
    pub fn dim(&self) -> usize {
        self.unknowns.len()
    }

    /// Standard-form matrix `W^{-1/2} (K + W U) W^{-1/2}` [eV].
    pub fn scaled(&self) -> SymCsr {
        let n = self.dim();
        let inv_sqrt: Vec<f64> = self.weights.iter().map(|w| 1.0 / w.sqrt()).collect();
        let mut trip = Vec::with_capacity(self.kinetic.nnz());
        for i in 0..n {
            for (j, v) in self.kinetic.row(i) {
                if j >= i {
                    trip.push((i, j, v * inv_sqrt[i] * inv_sqrt[j]));
                }
            }
            trip.push((i, i, self.potential[i]));
        }
        SymCsr::from_triplets(n, &trip)
    }

    /// Apply the pointwise operator `W^{-1} S` to a full-grid field, returning a full-grid field.
    pub fn apply(&self, psi: &[f64]) -> Vec<f64> {
        let x = self.unknowns.gather(psi);
        let kx = self.kinetic.apply(&x);
        let y: Vec<f64> = (0..self.dim()).map(|u| kx[u] / self.weights[u] + self.potential[u] * x[u]).collect();
        self.unknowns.scatter(&y, self.grid.len())
    }

    /// Energy form `φᵀ S ψ` for full-grid fields.
    pub fn energy_form(&self, phi: &[f64], psi: &[f64]) -> f64 {
        let a = self.unknowns.gather(phi);
        let b = self.unknowns.gather(psi);
        let pot: f64 = (0..self.dim()).map(|u| a[u] * self.weights[u] * self.potential[u] * b[u]).sum();
        self.kinetic.bilinear(&a, &b) + pot
    }
}

/// Lowest eigenpairs, ascending; states are full-grid fields with unit weighted norm.
#[derive(Clone, Debug)]
pub struct EigenSolution {
    pub energies: Vec<f64>,
    /// One column per state, grid points along rows.
    pub states: DMatrix<f64>,
    pub residual_norms: Vec<f64>,
}

impl EigenSolution {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        let n = self.states.nrows();
        &self.states.as_slice()[k * n..(k + 1) * n]
    }
}

/// Default residual tolerance [eV].
pub const DEFAULT_TOL: f64 = 1e-9;

pub fn solve_lowest(h: &DiscreteHamiltonian, k: usize, tol: f64) -> Result<EigenSolution> {
    let scaled = h.scaled();
    // the kinetic form is positive semidefinite, so min U bounds the spectrum from below
    let lower = h.potential.iter().cloned().fold(f64::INFINITY, f64::min);
    let opts = EigenOptions { tol, lower_bound: Some(lower), ..Default::default() };
    let res = lowest_eigenpairs(&scaled, k, &opts)?;
    let n_grid = h.grid.len();
    let mut states = DMatrix::zeros(n_grid, k);
    for (c, v) in res.vectors.iter().enumerate() {
        let psi: Vec<f64> = v.iter().zip(&h.weights).map(|(x, w)| x / w.sqrt()).collect();
        let mut full = h.unknowns.scatter(&psi, n_grid);
        // deterministic sign: largest-magnitude entry positive
        let pivot = full.iter().cloned().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if pivot < 0.0 {
            full.iter_mut().for_each(|x| *x = -*x);
        }
        states.column_mut(c).copy_from_slice(&full);
    }
    Ok(EigenSolution { energies: res.values, states, residual_norms: res.residuals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Boundaries, BoundaryCondition};
    use nalgebra::SymmetricEigen;
    use std::f64::consts::PI;

    fn uniform(grid: &Grid, m: f64) -> MassField {
        MassField(vec![m; grid.len()])
    }

    fn zero(grid: &Grid) -> ScalarField {
        ScalarField(vec![0.0; grid.len()])
    }

    fn box_energy(m: f64, l: f64, nx: usize, ny: usize) -> f64 {
        HBAR2_OVER_2M0 * PI * PI * (nx * nx + ny * ny) as f64 / (m * l * l)
    }

    #[test]
    fn box_ground_state_matches_analytic_within_discretization() {
        let g = Grid::new(10.0, 10.0, 0.1, Boundaries::uniform(BoundaryCondition::DirichletZero)).unwrap();
        let h = assemble_hamiltonian(&g, &uniform(&g, 0.067), &zero(&g)).unwrap();
        let sol = solve_lowest(&h, 3, DEFAULT_TOL).unwrap();
        let e11 = box_energy(0.067, 10.0, 1, 1);
        assert!((sol.energies[0] - e11).abs() / e11 < 1e-3);
        // discrete spectrum is known in closed form
        let c = HBAR2_OVER_2M0 / 0.067 / 0.01;
        let s = (PI * 0.1 / 20.0).sin().powi(2);
        assert!((sol.energies[0] - 8.0 * c * s).abs() < 1e-9);
        assert!((sol.energies[1] - sol.energies[2]).abs() < 1e-9);
    }

    #[test]
    fn constant_shift_moves_every_level() {
        let g = Grid::new(3.0, 2.0, 0.1, Boundaries::uniform(BoundaryCondition::DirichletZero)).unwrap();
        let mass = MassField(g.points().map(|(_, _, x, _)| if x < 1.5 { 0.067 } else { 0.023 }).collect());
        let u = ScalarField(g.points().map(|(_, _, x, y)| 0.1 * (x * y).cos()).collect());
        let shifted = ScalarField(u.iter().map(|v| v + 0.25).collect());
        let a = solve_lowest(&assemble_hamiltonian(&g, &mass, &u).unwrap(), 4, DEFAULT_TOL).unwrap();
        let b = solve_lowest(&assemble_hamiltonian(&g, &mass, &shifted).unwrap(), 4, DEFAULT_TOL).unwrap();
        for k in 0..4 {
            assert!((b.energies[k] - a.energies[k] - 0.25).abs() < 1e-9);
            let overlap = g.inner(a.state(k), b.state(k)).abs();
            assert!((overlap - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn free_particle_on_torus_has_constant_ground_state() {
        let g = Grid::new(4.0, 4.0, 0.1, Boundaries::uniform(BoundaryCondition::Periodic)).unwrap();
        let h = assemble_hamiltonian(&g, &uniform(&g, 0.067), &zero(&g)).unwrap();
        let sol = solve_lowest(&h, 5, DEFAULT_TOL).unwrap();
        assert!(sol.energies[0].abs() < 1e-9);
        let c = 1.0 / 4.0;
        assert!(sol.state(0).iter().all(|&v| (v - c).abs() < 1e-8));
        // first excited shell is four-fold degenerate
        for k in 2..5 {
            assert!((sol.energies[k] - sol.energies[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn non_positive_mass_is_an_assembly_error() {
        let g = Grid::new(1.0, 1.0, 0.25, Boundaries::uniform(BoundaryCondition::NeumannZero)).unwrap();
        let mut m = uniform(&g, 0.067);
        m.0[3] = 0.0;
        assert!(matches!(assemble_hamiltonian(&g, &m, &zero(&g)), Err(Error::Assembly(_))));
    }

    #[test]
    fn three_by_three_dirichlet_has_single_unknown() {
        let g = Grid::new(1.0, 1.0, 0.5, Boundaries::uniform(BoundaryCondition::DirichletZero)).unwrap();
        let h = assemble_hamiltonian(&g, &uniform(&g, 0.067), &ScalarField(vec![0.3; 9])).unwrap();
        assert_eq!(h.dim(), 1);
        let sol = solve_lowest(&h, 1, DEFAULT_TOL).unwrap();
        let dense = h.scaled().to_dense();
        assert!((sol.energies[0] - dense[(0, 0)]).abs() < 1e-12);
        assert!((sol.energies[0] - (4.0 * HBAR2_OVER_2M0 / 0.067 / 0.25 + 0.3)).abs() < 1e-12);
        assert!((g.norm(sol.state(0)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mixed_boundaries_give_symmetric_weighted_operator() {
        let bc = Boundaries {
            left: BoundaryCondition::DirichletZero,
            right: BoundaryCondition::NeumannZero,
            bottom: BoundaryCondition::NeumannZero,
            top: BoundaryCondition::DirichletZero,
        };
        let g = Grid::new(2.0, 1.5, 0.25, bc).unwrap();
        let mass = MassField(g.points().map(|(_, _, x, y)| if x + y > 1.5 { 0.023 } else { 0.067 }).collect());
        let h = assemble_hamiltonian(&g, &mass, &zero(&g)).unwrap();
        assert!(h.kinetic.asymmetry() < 1e-15);
        assert!(h.scaled().asymmetry() < 1e-12);
        // constant field on a pure-Neumann patch carries no kinetic energy
        let gn = Grid::new(2.0, 1.5, 0.25, Boundaries::uniform(BoundaryCondition::NeumannZero)).unwrap();
        let hn = assemble_hamiltonian(&gn, &uniform(&gn, 0.067), &zero(&gn)).unwrap();
        let ones = vec![1.0; gn.len()];
        assert!(hn.energy_form(&ones, &ones).abs() < 1e-14);
    }

    #[test]
    fn sparse_solver_agrees_with_dense_decomposition() {
        let g = Grid::new(1.9, 1.9, 0.1, Boundaries::uniform(BoundaryCondition::DirichletZero)).unwrap();
        assert_eq!((g.nx, g.ny), (20, 20));
        let mass = MassField(
            g.points()
                .map(|(_, _, x, y)| if (x - 1.0).abs() < 0.5 && (y - 0.9).abs() < 0.4 { 0.023 } else { 0.067 })
                .collect(),
        );
        let u = ScalarField(g.points().map(|(_, _, x, y)| 0.544 * ((x - 0.7).powi(2) + y * 0.3).sin().abs()).collect());
        let h = assemble_hamiltonian(&g, &mass, &u).unwrap();
        let sol = solve_lowest(&h, 6, DEFAULT_TOL).unwrap();
        let dense = SymmetricEigen::new(h.scaled().to_dense());
        let mut ev: Vec<f64> = dense.eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        for k in 0..6 {
            assert!((sol.energies[k] - ev[k]).abs() < 1e-9, "{k}: {} vs {}", sol.energies[k], ev[k]);
            assert!(sol.residual_norms[k] <= DEFAULT_TOL);
        }
        for a in 0..6 {
            for b in 0..6 {
                let d = g.inner(sol.state(a), sol.state(b)) - if a == b { 1.0 } else { 0.0 };
                assert!(d.abs() < 1e-8);
            }
        }
    }
}
