use std::fs;
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use qdrom::dns::{assemble_hamiltonian, solve_lowest, EigenSolution, Unknowns};
use qdrom::domain::ScenarioParams;
use qdrom::fpw::generate_fpw_basis;
use qdrom::io::{self, exact, write_csv, write_reduced, write_wavefunctions, Wavefunctions};
use qdrom::metrics::{error_csv_rows, error_sweep, pct3, SweepTarget, ERROR_CSV_HEADER};
use qdrom::pod::{train_basis, SnapshotSet};
use qdrom::rom::{
    assemble_reduced, evaluate_hamiltonian, reconstruct, reconstruct_at, solve_reduced, KineticRoute, ReducedModel,
    ReducedSolution,
};
use qdrom::scenario::Setup;
use qdrom::{Error, Result};

use crate::manifest::{ConfigEcho, RunManifest};
use crate::{Baseline, BenchArgs, Common, DnsArgs, Point, SolveArgs, SweepArgs, TrainArgs};

fn prepare(common: &Common) -> Result<Setup> {
    let setup = Setup::load(&common.scenario)?;
    fs::create_dir_all(&common.out)?;
    Ok(setup)
}

fn manifest(command: &'static str, common: &Common, setup: &Setup) -> RunManifest {
    RunManifest::new(command, &common.scenario, ConfigEcho::new(&setup.scenario, setup.grid.nx, setup.grid.ny))
}

fn resolve_point(setup: &Setup, point: &Point) -> Result<(ScenarioParams, String)> {
    match (&point.params, &point.test) {
        (Some(p), _) => Ok((setup.scenario.parse_params(p)?, p.clone())),
        (None, Some(t)) => Ok((setup.scenario.test_params(t)?, format!("test.{t}"))),
        (None, None) if setup.scenario.param_names().is_empty() => Ok((ScenarioParams::zeros(0), String::new())),
        (None, None) => Err(Error::Config("give --params or --test".into())),
    }
}

fn columns(vectors: &[Vec<f64>], rows: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, vectors.len());
    for (k, v) in vectors.iter().enumerate() {
        m.column_mut(k).copy_from_slice(v);
    }
    m
}

fn load_basis(setup: &Setup, path: &Path) -> Result<Wavefunctions> {
    let b = io::read_wavefunctions(path)?;
    if (b.nx, b.ny) != (setup.grid.nx, setup.grid.ny) {
        return Err(Error::Dimension(format!(
            "basis sampled on {}×{}, scenario grid is {}×{}",
            b.nx, b.ny, setup.grid.nx, setup.grid.ny
        )));
    }
    Ok(b)
}

fn reduced_model(
    setup: &Setup,
    basis: &DMatrix<f64>,
    cached: Option<&Path>,
    route: KineticRoute,
) -> Result<ReducedModel> {
    match cached {
        Some(p) => {
            let m = io::read_reduced(p, setup.scenario.param_names())?;
            if m.max_modes() != basis.ncols() {
                return Err(Error::Dimension(format!(
                    "cached model has {} modes, basis {}",
                    m.max_modes(),
                    basis.ncols()
                )));
            }
            Ok(m)
        }
        None => assemble_reduced(basis, &setup.grid, &setup.mass, &setup.assembly, route),
    }
}

fn finish(m: &RunManifest, dir: &Path) -> Result<()> {
    let path = m.write(dir)?;
    println!("manifest: {}", path.display());
    Ok(())
}

fn run_dns(setup: &Setup, params: &ScenarioParams, k: usize, m: &mut RunManifest) -> Result<EigenSolution> {
    let u = setup.assembly.assemble(params)?;
    let h = m.timed("dns_assembly", || assemble_hamiltonian(&setup.grid, &setup.mass, &u))?;
    m.timed("dns_solve", || solve_lowest(&h, k, setup.scenario.solver_tol))
}

fn write_dns(setup: &Setup, sol: &EigenSolution, out: &Path, m: &mut RunManifest) -> Result<()> {
    let states = out.join("dns_states.qwf");
    write_wavefunctions(&states, setup.grid.nx, setup.grid.ny, &sol.energies, &sol.states)?;
    m.artifact("dns_states", &states);
    let rows: Vec<Vec<String>> = (0..sol.len())
        .map(|k| vec![(k + 1).to_string(), exact(sol.energies[k]), exact(sol.residual_norms[k])])
        .collect();
    let csv = out.join("dns_energies.csv");
    write_csv(&csv, &["state", "energy_ev", "residual_ev"], &rows)?;
    m.artifact("dns_energies", &csv);
    Ok(())
}

pub fn dns(a: DnsArgs) -> Result<()> {
    let setup = prepare(&a.common)?;
    let (params, label) = resolve_point(&setup, &a.point)?;
    let k = a.states.unwrap_or(setup.scenario.report_states);
    let mut m = manifest("dns", &a.common, &setup);
    m.set("params", label);
    m.set("states", k);
    let sol = run_dns(&setup, &params, k, &mut m)?;
    write_dns(&setup, &sol, &a.common.out, &mut m)?;
    for (k, e) in sol.energies.iter().enumerate() {
        println!("state {:>3}  {:.6} eV", k + 1, e);
    }
    finish(&m, &a.common.out)
}

pub fn train(a: TrainArgs) -> Result<()> {
    let setup = prepare(&a.common)?;
    let plan = setup.scenario.training_plan()?;
    let out = &a.common.out;
    let mut m = manifest("train", &a.common, &setup);
    m.set("kinetic", format!("{:?}", a.kinetic).to_lowercase());
    m.set("snapshots", plan.snapshot_count());

    let snaps: SnapshotSet = m.timed("snapshots", || setup.snapshots())?;
    let basis = m.timed("pod", || train_basis(&snaps, &setup.grid))?;
    let model = m.timed("reduced_assembly", || {
        assemble_reduced(&basis, &setup.grid, &setup.mass, &setup.assembly, a.kinetic.into())
    })?;
    m.set("modes", basis.len());

    let (nx, ny) = (setup.grid.nx, setup.grid.ny);
    let p = out.join("snapshots.qwf");
    write_wavefunctions(&p, nx, ny, &snaps.energies, &snaps.columns)?;
    m.artifact("snapshots", &p);
    let p = out.join("snapshots.csv");
    let rows: Vec<Vec<String>> = snaps
        .meta
        .iter()
        .zip(&snaps.energies)
        .enumerate()
        .map(|(i, (s, e))| vec![(i + 1).to_string(), (s.config + 1).to_string(), (s.state + 1).to_string(), exact(*e)])
        .collect();
    write_csv(&p, &["snapshot", "config", "state", "energy_ev"], &rows)?;
    m.artifact("snapshot_index", &p);
    let p = out.join("basis.qwf");
    write_wavefunctions(&p, nx, ny, &basis.lambdas, &basis.modes)?;
    m.artifact("basis", &p);
    let p = out.join("spectrum.csv");
    let lead = basis.spectrum[0];
    let rows: Vec<Vec<String>> =
        basis.spectrum.iter().enumerate().map(|(i, l)| vec![(i + 1).to_string(), exact(*l), exact(l / lead)]).collect();
    write_csv(&p, &["mode", "lambda", "lambda_over_lambda1"], &rows)?;
    m.artifact("spectrum", &p);
    let p = out.join("model.podh");
    write_reduced(&p, &model)?;
    m.artifact("reduced_model", &p);

    println!("{} snapshots, {} modes retained", snaps.len(), basis.len());
    for i in [5usize, 10] {
        if let Some(l) = basis.spectrum.get(i) {
            println!("lambda_{}/lambda_1 = {:.3e}", i + 1, l / lead);
        }
    }
    println!("boundary ratio {:.3e}", model.boundary_ratio());
    finish(&m, out)
}

fn reconstruct_all(
    modes: &DMatrix<f64>,
    sol: &ReducedSolution,
    n: usize,
    points: Option<&[usize]>,
) -> Result<Vec<Vec<f64>>> {
    (0..n)
        .map(|k| match points {
            Some(p) => reconstruct_at(modes, sol.coeff(k), p),
            None => reconstruct(modes, sol.coeff(k)),
        })
        .collect()
}

pub fn solve(a: SolveArgs) -> Result<()> {
    let setup = prepare(&a.common)?;
    let (params, label) = resolve_point(&setup, &a.point)?;
    let basis = load_basis(&setup, &a.basis)?;
    let model = reduced_model(&setup, &basis.states, a.model.as_deref(), a.kinetic.into())?;
    if a.modes == 0 || a.modes > model.max_modes() {
        return Err(Error::Invalid(format!("--modes {} outside 1..={}", a.modes, model.max_modes())));
    }
    if a.coarse_output == 0 {
        return Err(Error::Invalid("--coarse-output must be at least 1".into()));
    }
    let n = a.states.unwrap_or(setup.scenario.report_states).min(a.modes);
    let out = &a.common.out;
    let mut m = manifest("solve", &a.common, &setup);
    m.set("params", label);
    m.set("modes", a.modes);
    m.set("states", n);
    m.set("coarse_output", a.coarse_output);
    m.artifact("basis", &a.basis);

    let sol = m.timed("reduced_solve", || solve_reduced(&evaluate_hamiltonian(&model, &params, a.modes)?))?;
    let (nx, ny, idx) = setup.grid.subsample_indices(a.coarse_output);
    let points = (a.coarse_output > 1).then_some(idx.as_slice());
    let states = m.timed("reconstruction", || reconstruct_all(&basis.states, &sol, n, points))?;

    let p = out.join("rom_energies.csv");
    let rows: Vec<Vec<String>> = (0..n).map(|k| vec![(k + 1).to_string(), exact(sol.energies[k])]).collect();
    write_csv(&p, &["state", "energy_ev"], &rows)?;
    m.artifact("energies", &p);
    let p = out.join("rom_coefficients.csv");
    let header: Vec<String> =
        std::iter::once("state".to_string()).chain((1..=a.modes).map(|i| format!("c{i}"))).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = (0..n)
        .map(|k| std::iter::once((k + 1).to_string()).chain(sol.coeff(k).iter().map(|c| exact(*c))).collect())
        .collect();
    write_csv(&p, &header, &rows)?;
    m.artifact("coefficients", &p);
    let p = out.join("rom_states.qwf");
    write_wavefunctions(&p, nx, ny, &sol.energies[..n], &columns(&states, nx * ny))?;
    m.artifact("states", &p);

    for (k, e) in sol.energies.iter().take(n).enumerate() {
        println!("state {:>3}  {:.6} eV", k + 1, e);
    }
    finish(&m, out)
}

/// `1:20,40,225` → sorted, de-duplicated mode counts.
pub fn parse_modes(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("cannot parse mode list `{s}`"));
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once(':') {
            Some((lo, hi)) => {
                let lo: usize = lo.trim().parse().map_err(|_| bad())?;
                let hi: usize = hi.trim().parse().map_err(|_| bad())?;
                if lo > hi {
                    return Err(bad());
                }
                out.extend(lo..=hi);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

pub fn sweep(a: SweepArgs) -> Result<()> {
    let setup = prepare(&a.common)?;
    let (params, label) = resolve_point(&setup, &a.point)?;
    let m_values = parse_modes(&a.modes)?;
    let m_max = *m_values.last().unwrap();
    let n_report = a.states.unwrap_or(setup.scenario.report_states);
    let out = &a.common.out;
    let mut m = manifest("sweep", &a.common, &setup);
    m.set("params", label);
    m.set("baseline", format!("{:?}", a.baseline).to_lowercase());
    m.set("modes", a.modes.clone());
    m.set("states", n_report);

    let (modes, spectrum, model) = match a.baseline {
        Baseline::Pod => {
            let path = a.basis.as_ref().ok_or_else(|| Error::Config("the pod baseline needs --basis".into()))?;
            m.artifact("basis", path);
            let b = load_basis(&setup, path)?;
            let model =
                m.timed("reduced_assembly", || reduced_model(&setup, &b.states, a.model.as_deref(), a.kinetic.into()))?;
            (b.states, Some(b.scalars), model)
        }
        Baseline::Fpw => {
            let b = m.timed("fpw_basis", || generate_fpw_basis(&setup.grid, m_max))?;
            let model = m.timed("reduced_assembly", || {
                assemble_reduced(&b, &setup.grid, &setup.mass, &setup.assembly, a.kinetic.into())
            })?;
            (b.modes, None, model)
        }
    };

    let dns = match &a.dns {
        Some(p) => {
            let w = load_basis(&setup, p)?;
            m.artifact("dns_states", p);
            EigenSolution { residual_norms: vec![f64::NAN; w.scalars.len()], energies: w.scalars, states: w.states }
        }
        None => {
            // two extra states so a degenerate cluster at the edge is complete
            let sol = run_dns(&setup, &params, n_report + 2, &mut m)?;
            write_dns(&setup, &sol, out, &mut m)?;
            sol
        }
    };
    let target = SweepTarget {
        grid: &setup.grid,
        params: &params,
        dns: &dns,
        n_report,
        n_trained: setup.scenario.n_states,
        cluster_gap: setup.scenario.cluster_gap,
    };
    let table = m.timed("sweep", || error_sweep(&model, &modes, spectrum.as_deref(), &target, &m_values))?;

    let p = out.join("errors.csv");
    write_csv(&p, &ERROR_CSV_HEADER, &error_csv_rows(&table, false))?;
    m.artifact("errors", &p);
    let p = out.join("errors_energy_order.csv");
    write_csv(&p, &ERROR_CSV_HEADER, &error_csv_rows(&table, true))?;
    m.artifact("errors_energy_order", &p);

    println!("{:>5}  {:>10}  {:>10}  {:>10}", "M", "avg_%", "max_%", "theory_%");
    for row in &table.rows {
        let max = row.states.iter().map(|s| s.ls_error).fold(0.0, f64::max);
        println!(
            "{:>5}  {:>10}  {:>10}  {:>10}",
            row.m,
            pct3(row.avg_trained),
            pct3(max),
            row.theoretical.map(pct3).unwrap_or_else(|| "-".into())
        );
    }
    finish(&m, out)
}

pub fn bench(a: BenchArgs) -> Result<()> {
    let setup = prepare(&a.common)?;
    let (params, label) = resolve_point(&setup, &a.point)?;
    let basis = load_basis(&setup, &a.basis)?;
    let model = reduced_model(&setup, &basis.states, a.model.as_deref(), a.kinetic.into())?;
    if a.modes == 0 || a.modes > model.max_modes() {
        return Err(Error::Invalid(format!("--modes {} outside 1..={}", a.modes, model.max_modes())));
    }
    if a.coarse_output == 0 || a.repeat == 0 {
        return Err(Error::Invalid("--coarse-output and --repeat must be at least 1".into()));
    }
    let n = a.states.min(a.modes);
    let mut m = manifest("bench", &a.common, &setup);
    m.set("params", label);
    m.set("modes", a.modes);
    m.set("states", a.states);
    m.set("coarse_output", a.coarse_output);
    m.set("repeat", a.repeat);

    run_dns(&setup, &params, a.states, &mut m)?;
    let t = Instant::now();
    let mut sol = None;
    for _ in 0..a.repeat {
        sol = Some(solve_reduced(&evaluate_hamiltonian(&model, &params, a.modes)?)?);
    }
    let reduced = t.elapsed().as_secs_f64() / a.repeat as f64;
    m.timings_s.insert("reduced_solve", reduced);
    let sol = sol.unwrap();
    m.timed("reconstruction_full", || reconstruct_all(&basis.states, &sol, n, None))?;
    let (_, _, idx) = setup.grid.subsample_indices(a.coarse_output);
    m.timed("reconstruction_coarse", || reconstruct_all(&basis.states, &sol, n, Some(&idx)))?;

    let t = &m.timings_s;
    let speedup = t["dns_solve"] / reduced;
    let recon = t["reconstruction_full"] / t["reconstruction_coarse"].max(f64::MIN_POSITIVE);
    let dof = Unknowns::new(&setup.grid).len() as f64 / a.modes as f64;
    println!("dns solve            {:.4e} s", t["dns_solve"]);
    println!("reduced solve        {:.4e} s", reduced);
    println!("reconstruction full  {:.4e} s", t["reconstruction_full"]);
    println!("reconstruction /{}    {:.4e} s", a.coarse_output, t["reconstruction_coarse"]);
    println!("solve speed-up       {speedup:.1}x");
    println!("reconstruction ratio {recon:.1}x");
    println!("DoF ratio            {dof:.1}");
    m.set("speedup_solve", speedup);
    m.set("reconstruction_ratio", recon);
    m.set("dof_ratio", dof);
    finish(&m, &a.common.out)
}
