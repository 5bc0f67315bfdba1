//! Property checks on a small field-driven structure, shared by the property tests and the
//! acceptance run. Each check returns a one-line summary or the reason it failed.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use qdrom::dns::EigenSolution;
use qdrom::domain::ScenarioParams;
use qdrom::metrics::ls_error;
use qdrom::pod::{gram_matrix, train_basis, PodBasis, SnapshotSet};
use qdrom::rom::{
    assemble_reduced, evaluate_hamiltonian, monolithic_potential, project, reconstruct, solve_reduced, KineticRoute,
    ReducedModel,
};
use qdrom::scenario::{Scenario, Setup};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

/// 2×2 dots on a 20×20 grid, three well-separated training fields (full-rank snapshot set).
pub const SMALL: &str = "
    name = small
    domain = 5.7, 5.7
    grid_spacing = 0.3
    dots = 2, 2
    dot_size = 1.5
    dot_gap = 0.7
    spacer = 1.0
    barrier = 0.067, 0.544
    well = 0.023, 0.0
    bc = dirichlet
    terms = field
    n_states = 3
    report_states = 4
    train.point = Ex=-35, Ey=20
    train.point = Ex=30, Ey=-35
    train.point = zero
    test.probe = Ex=20, Ey=-5
";

pub struct Small {
    pub setup: Setup,
    pub snapshots: SnapshotSet,
    pub basis: PodBasis,
    pub model: ReducedModel,
    pub probe: ScenarioParams,
    pub dns: EigenSolution,
}

pub fn small() -> Small {
    let setup = Setup::new(Scenario::parse(SMALL, "small").unwrap()).unwrap();
    let snapshots = setup.snapshots().unwrap();
    let basis = train_basis(&snapshots, &setup.grid).unwrap();
    let model = assemble_reduced(&basis, &setup.grid, &setup.mass, &setup.assembly, KineticRoute::Stiffness).unwrap();
    let probe = setup.scenario.test_params("probe").unwrap();
    let dns = setup.dns(&probe, 6).unwrap();
    Small { setup, snapshots, basis, model, probe, dns }
}

fn require(ok: bool, msg: String) -> Check {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

pub fn orthonormality(s: &Small) -> Check {
    let d = s.basis.orthonormality_defect(&s.setup.grid);
    require(d <= 1e-8, format!("max |η_i·η_j − δ_ij| = {d:.2e} over {} modes", s.basis.len()))
}

pub fn full_rank_reconstruction(s: &Small) -> Check {
    let g = &s.setup.grid;
    let m = s.basis.len();
    let mut worst = 0.0f64;
    for k in 0..s.snapshots.len() {
        let psi = s.snapshots.column(k);
        let back = reconstruct(&s.basis.modes, &project(&s.basis.modes, g, psi, m)).map_err(|e| e.to_string())?;
        let diff: Vec<f64> = back.iter().zip(psi).map(|(a, b)| a - b).collect();
        worst = worst.max(g.norm(&diff) / g.norm(psi));
    }
    require(
        worst <= 1e-8 && m == s.snapshots.len(),
        format!("worst relative error {worst:.2e} over {} snapshots, rank {m}", s.snapshots.len()),
    )
}

/// Upper bounds against DNS and monotone decrease in M for every state k ≤ M.
pub fn rayleigh_ritz(s: &Small) -> Check {
    let k_max = s.dns.len();
    let mut prev: Option<Vec<f64>> = None;
    let mut worst_bound = f64::NEG_INFINITY;
    let mut worst_rise = f64::NEG_INFINITY;
    for m in 1..=s.model.max_modes() {
        let h = evaluate_hamiltonian(&s.model, &s.probe, m).map_err(|e| e.to_string())?;
        let e = solve_reduced(&h).map_err(|e| e.to_string())?.energies;
        for k in 0..m.min(k_max) {
            worst_bound = worst_bound.max(s.dns.energies[k] - e[k]);
        }
        if let Some(p) = &prev {
            for k in 0..p.len().min(k_max) {
                worst_rise = worst_rise.max(e[k] - p[k]);
            }
        }
        prev = Some(e);
    }
    require(
        worst_bound <= 1e-9 && worst_rise <= 1e-9,
        format!("max E_dns − E_rom = {worst_bound:.2e} eV, max E(M+1) − E(M) = {worst_rise:.2e} eV"),
    )
}

pub fn affine_vs_monolithic(s: &Small) -> Check {
    let g = &s.setup.grid;
    let m = s.model.max_modes();
    let fixed = &s.model.kinetic + &s.model.boundary;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let params = ScenarioParams::new(vec![rng.random_range(-60.0..60.0), rng.random_range(-60.0..60.0)]);
        let affine = evaluate_hamiltonian(&s.model, &params, m).map_err(|e| e.to_string())?;
        let u = s.setup.assembly.assemble(&params).map_err(|e| e.to_string())?;
        let mono = &fixed + monolithic_potential(&s.basis.modes, g, &u);
        worst = worst.max((&affine - &mono).amax() / mono.amax());
    }
    require(worst <= 1e-12, format!("max relative entry difference {worst:.2e} over 5 random fields"))
}

/// Flipping the sign of half the snapshots leaves energies and LS errors unchanged.
pub fn sign_flip(s: &Small) -> Check {
    let g = &s.setup.grid;
    let mut flipped = s.snapshots.clone();
    for k in (0..flipped.len()).step_by(2) {
        flipped.columns.column_mut(k).neg_mut();
    }
    let basis = train_basis(&flipped, g).map_err(|e| e.to_string())?;
    let model = assemble_reduced(&basis, g, &s.setup.mass, &s.setup.assembly, KineticRoute::Stiffness)
        .map_err(|e| e.to_string())?;
    let m = 8.min(model.max_modes());
    let run = |model: &ReducedModel, modes: &DMatrix<f64>| -> Result<(Vec<f64>, Vec<f64>), String> {
        let sol = solve_reduced(&evaluate_hamiltonian(model, &s.probe, m).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let mut errs = Vec::new();
        for k in 0..3 {
            let psi = reconstruct(modes, sol.coeff(k)).map_err(|e| e.to_string())?;
            errs.push(ls_error(&psi, s.dns.state(k), g).map_err(|e| e.to_string())?);
        }
        Ok((sol.energies[..3].to_vec(), errs))
    };
    let (e0, l0) = run(&s.model, &s.basis.modes)?;
    let (e1, l1) = run(&model, &basis.modes)?;
    let de = e0.iter().zip(&e1).map(|(a, b)| (a - b).abs() / a.abs()).fold(0.0, f64::max);
    let dl = l0.iter().zip(&l1).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let dlam = s.basis.lambdas.iter().zip(&basis.lambdas).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    require(
        de <= 1e-10 && dl <= 1e-8 && dlam <= 1e-12,
        format!("M={m}: energy drift {de:.2e}, LS drift {dl:.2e}, λ drift {dlam:.2e}"),
    )
}

/// `(1/N_s) W^½ X Xᵀ W^½` on the full grid has the Gram spectrum and the same modes.
pub fn snapshot_vs_autocorrelation(s: &Small) -> Check {
    let g = &s.setup.grid;
    if g.nx > 20 || g.ny > 20 {
        return Err(format!("grid {}×{} too large for the explicit operator", g.nx, g.ny));
    }
    let ns = s.snapshots.len();
    let sw: Vec<f64> = g.weights().iter().map(|w| w.sqrt()).collect();
    let mut y = s.snapshots.columns.clone();
    for mut col in y.column_iter_mut() {
        col.iter_mut().zip(&sw).for_each(|(v, w)| *v *= w);
    }
    let r = &y * y.transpose() / ns as f64;
    let eig = SymmetricEigen::new(r);
    let mut order: Vec<usize> = (0..g.len()).collect();
    order.sort_by(|&p, &q| eig.eigenvalues[q].total_cmp(&eig.eigenvalues[p]));

    let gram = gram_matrix(&s.snapshots, g).map_err(|e| e.to_string())?;
    let lead = s.basis.spectrum[0];
    let mut lam_err = 0.0f64;
    for k in 0..ns {
        lam_err = lam_err.max((eig.eigenvalues[order[k]] - s.basis.spectrum[k]).abs() / lead);
    }
    let trace_err = (gram.trace() - eig.eigenvalues.sum()).abs() / gram.trace();

    let lam = &s.basis.lambdas;
    let mut mode_err = 0.0f64;
    let mut compared = 0;
    for k in 0..lam.len() {
        let lo = if k > 0 { lam[k - 1] - lam[k] } else { f64::INFINITY };
        let hi = if k + 1 < lam.len() { lam[k] - lam[k + 1] } else { lam[k] };
        if lo.min(hi) < 1e-3 * lam[k] || lam[k] < 1e-8 * lead {
            continue;
        }
        let u = eig.eigenvectors.column(order[k]);
        let eta: Vec<f64> = u.iter().zip(&sw).map(|(v, w)| v / w).collect();
        let c = g.inner(&eta, s.basis.mode(k)).abs() / g.norm(&eta);
        mode_err = mode_err.max(1.0 - c);
        compared += 1;
    }
    require(
        lam_err <= 1e-10 && trace_err <= 1e-10 && mode_err <= 1e-8 && compared > 0,
        format!(
            "λ mismatch {lam_err:.2e}, trace mismatch {trace_err:.2e}, mode misalignment {mode_err:.2e} over {compared} separated modes"
        ),
    )
}

pub const PROPERTIES: [(&str, fn(&Small) -> Check); 6] = [
    ("mode orthonormality", orthonormality),
    ("full-rank snapshot reconstruction", full_rank_reconstruction),
    ("Rayleigh-Ritz bound and monotonicity", rayleigh_ritz),
    ("affine vs monolithic assembly", affine_vs_monolithic),
    ("sign-flip invariance", sign_flip),
    ("snapshot method vs autocorrelation", snapshot_vs_autocorrelation),
];
