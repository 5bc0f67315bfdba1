//! Accuracy of reduced-order predictions against DNS.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::dns::EigenSolution;
use crate::domain::{Grid, ScenarioParams};
use crate::error::{Error, Result};
use crate::pod::theoretical_ls_error;
use crate::rom::{evaluate_hamiltonian, reconstruct, solve_reduced, ReducedModel};

/// Default energy gap [eV] below which consecutive DNS states form one cluster.
pub const DEFAULT_CLUSTER_GAP: f64 = 1e-3;

/// ROM state → DNS state assignment.
#[derive(Clone, Debug, PartialEq)]
pub struct StatePairing {
    /// `dns_index[r]` is the DNS state paired with ROM state `r`.
    pub dns_index: Vec<usize>,
    /// |∫ ψ_rom ψ_dns dΩ| of each pair.
    pub overlaps: Vec<f64>,
    /// Cluster label of each ROM state.
    pub cluster: Vec<usize>,
    /// DNS members of each cluster.
    pub clusters: Vec<Vec<usize>>,
}

/// Group consecutive DNS levels closer than `gap`.
pub fn clusters(energies: &[f64], gap: f64) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (k, e) in energies.iter().enumerate() {
        match out.last_mut() {
            Some(c) if e - energies[k - 1] < gap => c.push(k),
            _ => out.push(vec![k]),
        }
    }
    out
}

pub fn pair_states(
    dns: &EigenSolution,
    rom_states: &[Vec<f64>],
    grid: &Grid,
    cluster_gap: f64,
) -> Result<StatePairing> {
    if dns.is_empty() || rom_states.is_empty() {
        return Err(Error::Invalid("state pairing needs non-empty inputs".into()));
    }
    if rom_states.len() > dns.len() {
        return Err(Error::Invalid(format!("{} ROM states but only {} DNS states", rom_states.len(), dns.len())));
    }
    let groups = clusters(&dns.energies, cluster_gap);
    let n = rom_states.len();
    let mut dns_index = vec![usize::MAX; n];
    let mut overlaps = vec![0.0; n];
    let mut cluster = vec![0; n];
    for (label, members) in groups.iter().enumerate() {
        let roms: Vec<usize> = members.iter().copied().filter(|&r| r < n).collect();
        if roms.is_empty() {
            continue;
        }
        let ov = DMatrix::from_fn(roms.len(), members.len(), |a, b| {
            grid.inner(&rom_states[roms[a]], dns.state(members[b])).abs()
        });
        let assignment = best_assignment(&ov);
        for (a, &b) in assignment.iter().enumerate() {
            dns_index[roms[a]] = members[b];
            overlaps[roms[a]] = ov[(a, b)];
            cluster[roms[a]] = label;
        }
    }
    Ok(StatePairing { dns_index, overlaps, cluster, clusters: groups })
}

/// Injective rows → columns map maximizing the summed weight. Exhaustive for small
/// clusters, greedy beyond that.
fn best_assignment(w: &DMatrix<f64>) -> Vec<usize> {
    let (rows, cols) = w.shape();
    if cols <= 8 {
        let mut best = (f64::NEG_INFINITY, Vec::new());
        let mut current = Vec::with_capacity(rows);
        let mut used = vec![false; cols];
        search(w, 0, 0.0, &mut current, &mut used, &mut best);
        return best.1;
    }
    let mut used = vec![false; cols];
    (0..rows)
        .map(|r| {
            let c = (0..cols).filter(|&c| !used[c]).max_by(|&a, &b| w[(r, a)].total_cmp(&w[(r, b)])).unwrap();
            used[c] = true;
            c
        })
        .collect()
}

fn search(
    w: &DMatrix<f64>,
    row: usize,
    score: f64,
    current: &mut Vec<usize>,
    used: &mut [bool],
    best: &mut (f64, Vec<usize>),
) {
    if row == w.nrows() {
        // strict improvement keeps the identity-like order on ties
        if score > best.0 + 1e-14 {
            *best = (score, current.clone());
        }
        return;
    }
    for c in 0..w.ncols() {
        if !used[c] {
            used[c] = true;
            current.push(c);
            search(w, row + 1, score + w[(row, c)], current, used, best);
            current.pop();
            used[c] = false;
        }
    }
}

/// `min_s ‖s ψ_rom − ψ_dns‖ / ‖ψ_dns‖` over s = ±1, weighted L2.
pub fn ls_error(rom: &[f64], dns: &[f64], grid: &Grid) -> Result<f64> {
    if rom.len() != grid.len() || dns.len() != grid.len() {
        return Err(Error::Dimension("wavefunctions sampled on different grids".into()));
    }
    let mut plus = 0.0;
    let mut minus = 0.0;
    let mut norm = 0.0;
    for ((w, a), b) in grid.weights().iter().zip(rom).zip(dns) {
        plus += w * (a - b) * (a - b);
        minus += w * (a + b) * (a + b);
        norm += w * b * b;
    }
    Ok((plus.min(minus) / norm).sqrt())
}

/// `‖(I − P) ψ_rom‖ / ‖ψ_rom‖` with `P` the projector onto orthonormal DNS states.
pub fn subspace_error(rom: &[f64], span: &[&[f64]], grid: &Grid) -> f64 {
    let mut r = rom.to_vec();
    for s in span {
        let c = grid.inner(s, rom);
        r.iter_mut().zip(s.iter()).for_each(|(x, y)| *x -= c * y);
    }
    grid.norm(&r) / grid.norm(rom)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateError {
    pub state: usize,
    /// Paired DNS state.
    pub dns_state: usize,
    pub ls_error: f64,
    /// LS error against the DNS state of the same energy rank, without cluster matching.
    pub ls_error_ordered: f64,
    pub energy_error: f64,
    /// Energy error against the DNS state of the same energy rank.
    pub energy_error_ordered: f64,
    pub subspace_error: f64,
    pub energy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRow {
    pub m: usize,
    pub states: Vec<StateError>,
    /// Mean LS error over the trained states.
    pub avg_trained: f64,
    pub avg_trained_ordered: f64,
    /// Theoretical LS error from the POD spectrum; absent for non-POD bases.
    pub theoretical: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorTable {
    pub rows: Vec<ErrorRow>,
}

impl ErrorTable {
    pub fn row(&self, m: usize) -> Option<&ErrorRow> {
        self.rows.iter().find(|r| r.m == m)
    }
}

/// What an M-sweep compares against.
pub struct SweepTarget<'a> {
    pub grid: &'a Grid,
    pub params: &'a ScenarioParams,
    /// DNS reference; should hold a couple of states beyond `n_report` so clusters close.
    pub dns: &'a EigenSolution,
    pub n_report: usize,
    pub n_trained: usize,
    pub cluster_gap: f64,
}

pub fn error_sweep(
    model: &ReducedModel,
    modes: &DMatrix<f64>,
    spectrum: Option<&[f64]>,
    target: &SweepTarget<'_>,
    m_values: &[usize],
) -> Result<ErrorTable> {
    if target.dns.len() < target.n_report {
        return Err(Error::Invalid(format!(
            "DNS reference has {} states, {} requested",
            target.dns.len(),
            target.n_report
        )));
    }
    if let Some(&bad) = m_values.iter().find(|&&m| m == 0 || m > model.max_modes()) {
        return Err(Error::Invalid(format!("mode count {bad} outside 1..={}", model.max_modes())));
    }
    let rows =
        m_values.par_iter().map(|&m| sweep_row(model, modes, spectrum, target, m)).collect::<Result<Vec<_>>>()?;
    Ok(ErrorTable { rows })
}

fn sweep_row(
    model: &ReducedModel,
    modes: &DMatrix<f64>,
    spectrum: Option<&[f64]>,
    t: &SweepTarget<'_>,
    m: usize,
) -> Result<ErrorRow> {
    let grid = t.grid;
    let sol = solve_reduced(&evaluate_hamiltonian(model, t.params, m)?)?;
    let n = t.n_report.min(m);
    let psi: Vec<Vec<f64>> = (0..n).map(|k| reconstruct(modes, sol.coeff(k))).collect::<Result<_>>()?;
    let pairing = pair_states(t.dns, &psi, grid, t.cluster_gap)?;
    let mut states = Vec::with_capacity(n);
    for k in 0..n {
        let d = pairing.dns_index[k];
        let span: Vec<&[f64]> = pairing.clusters[pairing.cluster[k]].iter().map(|&c| t.dns.state(c)).collect();
        let e_dns = t.dns.energies[d];
        states.push(StateError {
            state: k,
            dns_state: d,
            ls_error: ls_error(&psi[k], t.dns.state(d), grid)?,
            ls_error_ordered: ls_error(&psi[k], t.dns.state(k), grid)?,
            energy_error: (sol.energies[k] - e_dns).abs() / e_dns.abs(),
            energy_error_ordered: (sol.energies[k] - t.dns.energies[k]).abs() / t.dns.energies[k].abs(),
            subspace_error: subspace_error(&psi[k], &span, grid),
            energy: sol.energies[k],
        });
    }
    let trained: Vec<&StateError> = states.iter().filter(|s| s.state < t.n_trained).collect();
    let mean = |f: &dyn Fn(&StateError) -> f64| {
        if trained.is_empty() {
            f64::NAN
        } else {
            trained.iter().map(|s| f(s)).sum::<f64>() / trained.len() as f64
        }
    };
    let theoretical = match spectrum {
        Some(l) if m <= l.len() => Some(theoretical_ls_error(l, m)?),
        _ => None,
    };
    Ok(ErrorRow {
        m,
        avg_trained: mean(&|s| s.ls_error),
        avg_trained_ordered: mean(&|s| s.ls_error_ordered),
        states,
        theoretical,
    })
}

pub const ERROR_CSV_HEADER: [&str; 7] =
    ["M", "state", "ls_error_pct", "energy_error_pct", "subspace_error_pct", "avg_trained_pct", "theoretical_pct"];

/// CSV rows of an error table; `ordered` selects plain energy-order pairing.
/// States are numbered from 1.
pub fn error_csv_rows(table: &ErrorTable, ordered: bool) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for row in &table.rows {
        let avg = if ordered { row.avg_trained_ordered } else { row.avg_trained };
        let theory = row.theoretical.map(pct3).unwrap_or_default();
        for s in &row.states {
            let (ls, en) =
                if ordered { (s.ls_error_ordered, s.energy_error_ordered) } else { (s.ls_error, s.energy_error) };
            rows.push(vec![
                row.m.to_string(),
                (s.state + 1).to_string(),
                pct3(ls),
                pct3(en),
                pct3(s.subspace_error),
                pct3(avg),
                theory.clone(),
            ]);
        }
    }
    rows
}

/// Percentage with three significant digits.
pub fn pct3(fraction: f64) -> String {
    sig3(100.0 * fraction)
}

pub fn sig3(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let decimals = 2 - x.abs().log10().floor() as i32;
    if (0..=9).contains(&decimals) {
        format!("{:.*}", decimals as usize, x)
    } else if decimals < 0 && decimals > -6 {
        format!("{:.0}", x)
    } else {
        format!("{:.2e}", x)
    }
}
