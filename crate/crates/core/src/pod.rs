//! Global POD basis from DNS wavefunction snapshots via the method of snapshots.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::dns::{assemble_hamiltonian, solve_lowest, EigenSolution};
use crate::domain::{Grid, MassField, PotentialAssembly, ScenarioParams};
use crate::error::{Error, Result};

/// Modes whose eigenvalue falls below this fraction of the largest are dropped.
pub const TRUNCATION_FLOOR: f64 = 1e-14;

/// Training configurations and the number of states collected from each.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingPlan {
    pub configs: Vec<ScenarioParams>,
    pub n_states: usize,
}

impl TrainingPlan {
    pub fn new(configs: Vec<ScenarioParams>, n_states: usize) -> Result<Self> {
        if configs.is_empty() {
            return Err(Error::Config("training plan has no configurations".into()));
        }
        if n_states == 0 {
            return Err(Error::Config("training plan needs at least one state per configuration".into()));
        }
        Ok(TrainingPlan { configs, n_states })
    }

    pub fn snapshot_count(&self) -> usize {
        self.configs.len() * self.n_states
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SnapshotMeta {
    pub config: usize,
    pub state: usize,
}

/// Column-stacked unit-norm wavefunctions.
#[derive(Clone, Debug)]
pub struct SnapshotSet {
    pub columns: DMatrix<f64>,
    pub meta: Vec<SnapshotMeta>,
    /// DNS energy of each snapshot [eV].
    pub energies: Vec<f64>,
}

impl SnapshotSet {
    pub fn len(&self) -> usize {
        self.columns.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column(&self, k: usize) -> &[f64] {
        let n = self.columns.nrows();
        &self.columns.as_slice()[k * n..(k + 1) * n]
    }

    /// Stack DNS solutions in configuration order.
    pub fn from_solutions(solutions: &[EigenSolution], n_states: usize) -> Self {
        let nr = solutions.first().map_or(0, |s| s.states.nrows());
        let mut columns = DMatrix::zeros(nr, solutions.len() * n_states);
        let mut meta = Vec::new();
        let mut energies = Vec::new();
        for (c, sol) in solutions.iter().enumerate() {
            for s in 0..n_states {
                columns.column_mut(meta.len()).copy_from(&sol.states.column(s));
                meta.push(SnapshotMeta { config: c, state: s });
                energies.push(sol.energies[s]);
            }
        }
        SnapshotSet { columns, meta, energies }
    }
}

/// Run DNS for every training configuration (in parallel) and stack the lowest states.
pub fn collect_snapshots(
    plan: &TrainingPlan,
    grid: &Grid,
    mass: &MassField,
    assembly: &PotentialAssembly,
    tol: f64,
) -> Result<SnapshotSet> {
    let solutions: Vec<EigenSolution> = plan
        .configs
        .par_iter()
        .enumerate()
        .map(|(c, params)| {
            let run = || -> Result<EigenSolution> {
                let u = assembly.assemble(params)?;
                let h = assemble_hamiltonian(grid, mass, &u)?;
                solve_lowest(&h, plan.n_states, tol)
            };
            run().map_err(|e| Error::Training { config: c, source: Box::new(e) })
        })
        .collect::<Result<_>>()?;
    Ok(SnapshotSet::from_solutions(&solutions, plan.n_states))
}

/// `G_ij = (1/N_s) ∫ ψ_i ψ_j dΩ`.
pub fn gram_matrix(snapshots: &SnapshotSet, grid: &Grid) -> Result<DMatrix<f64>> {
    check_rows(snapshots.columns.nrows(), grid)?;
    let ns = snapshots.len();
    if ns == 0 {
        return Err(Error::Invalid("empty snapshot set".into()));
    }
    let w = nalgebra::DVector::from_column_slice(grid.weights());
    let mut weighted = snapshots.columns.clone();
    for mut col in weighted.column_iter_mut() {
        col.component_mul_assign(&w);
    }
    let mut g = snapshots.columns.tr_mul(&weighted) / ns as f64;
    symmetrize(&mut g);
    Ok(g)
}

fn check_rows(nr: usize, grid: &Grid) -> Result<()> {
    if nr != grid.len() {
        return Err(Error::Dimension(format!("snapshots have {nr} points, grid {}", grid.len())));
    }
    Ok(())
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Orthonormal POD modes with descending eigenvalues.
#[derive(Clone, Debug)]
pub struct PodBasis {
    /// One mode per column.
    pub modes: DMatrix<f64>,
    /// Eigenvalues of the retained modes.
    pub lambdas: Vec<f64>,
    /// Full Gram spectrum (N_s values, clamped at zero), descending.
    pub spectrum: Vec<f64>,
    pub snapshot_count: usize,
}

impl PodBasis {
    pub fn len(&self) -> usize {
        self.modes.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mode(&self, k: usize) -> &[f64] {
        let n = self.modes.nrows();
        &self.modes.as_slice()[k * n..(k + 1) * n]
    }

    /// Largest |η_i·η_j − δ_ij|.
    pub fn orthonormality_defect(&self, grid: &Grid) -> f64 {
        orthonormality_defect(&self.modes, grid)
    }
}

pub fn orthonormality_defect(modes: &DMatrix<f64>, grid: &Grid) -> f64 {
    let m = modes.ncols();
    let n = modes.nrows();
    let s = modes.as_slice();
    let mut worst: f64 = 0.0;
    for i in 0..m {
        for j in i..m {
            let d = grid.inner(&s[i * n..(i + 1) * n], &s[j * n..(j + 1) * n]) - if i == j { 1.0 } else { 0.0 };
            worst = worst.max(d.abs());
        }
    }
    worst
}

/// Method of snapshots: eigenvectors `v_k` of `G` give `η_k ∝ Σ_i v_k[i] ψ_i`.
///
/// Modes are re-orthonormalized by two Gram–Schmidt sweeps in descending-λ order,
/// since modes with tiny λ lose orthogonality in floating point.
pub fn compute_modes(snapshots: &SnapshotSet, gram: &DMatrix<f64>, grid: &Grid) -> Result<PodBasis> {
    check_rows(snapshots.columns.nrows(), grid)?;
    let ns = snapshots.len();
    if gram.nrows() != ns || gram.ncols() != ns {
        return Err(Error::Dimension(format!("Gram matrix is {}×{}, expected {ns}×{ns}", gram.nrows(), gram.ncols())));
    }
    let eig = SymmetricEigen::new(gram.clone());
    let mut order: Vec<usize> = (0..ns).collect();
    order.sort_by(|&p, &q| eig.eigenvalues[q].total_cmp(&eig.eigenvalues[p]));
    let spectrum: Vec<f64> = order.iter().map(|&c| eig.eigenvalues[c].max(0.0)).collect();
    let lead = spectrum[0];
    if !(lead > 0.0) {
        return Err(Error::Invalid("snapshot set carries no energy (all columns zero)".into()));
    }

    let nr = grid.len();
    let mut modes: Vec<Vec<f64>> = Vec::new();
    let mut lambdas = Vec::new();
    for (rank, &c) in order.iter().enumerate() {
        let lambda = spectrum[rank];
        if lambda / lead < TRUNCATION_FLOOR {
            break;
        }
        let v = eig.eigenvectors.column(c);
        let mut eta: Vec<f64> = (&snapshots.columns * v).as_slice().to_vec();
        for _ in 0..2 {
            for prev in &modes {
                let p = grid.inner(prev, &eta);
                eta.iter_mut().zip(prev).for_each(|(e, q)| *e -= p * q);
            }
        }
        let norm = grid.norm(&eta);
        if !(norm > 0.0) {
            break;
        }
        eta.iter_mut().for_each(|e| *e /= norm);
        modes.push(eta);
        lambdas.push(lambda);
    }
    let mut mat = DMatrix::zeros(nr, modes.len());
    for (k, m) in modes.iter().enumerate() {
        mat.column_mut(k).copy_from_slice(m);
    }
    Ok(PodBasis { modes: mat, lambdas, spectrum, snapshot_count: ns })
}

/// Snapshots → Gram matrix → modes.
pub fn train_basis(snapshots: &SnapshotSet, grid: &Grid) -> Result<PodBasis> {
    let g = gram_matrix(snapshots, grid)?;
    compute_modes(snapshots, &g, grid)
}

/// `sqrt(Σ_{i>M} λ_i / Σ_i λ_i)`.
pub fn theoretical_ls_error(lambdas: &[f64], m: usize) -> Result<f64> {
    if m == 0 || m > lambdas.len() {
        return Err(Error::Invalid(format!("mode count {m} outside 1..={}", lambdas.len())));
    }
    let total: f64 = lambdas.iter().sum();
    let tail: f64 = lambdas[m..].iter().sum();
    Ok((tail / total).max(0.0).sqrt())
}
