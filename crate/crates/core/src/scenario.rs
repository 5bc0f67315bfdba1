//! Flat key/value scenario files.
//!
//! One `key = value` per line, `#` starts a comment. Keys:
//!
//! | key | value | default |
//! |---|---|---|
//! | `name` | text | file stem |
//! | `domain` | `Lx, Ly` [nm] | required |
//! | `grid_spacing` | h [nm] | required |
//! | `dots` | `rows, cols` | `0, 0` |
//! | `dot_size`, `dot_gap`, `spacer` | [nm] | `0` |
//! | `barrier`, `well` | `mass_ratio, band_edge` [eV] | GaAs, InAs |
//! | `bc` | `dirichlet`, `neumann` or `periodic` on all sides | `dirichlet` |
//! | `bc.left`, `bc.right`, `bc.bottom`, `bc.top` | per-side override | |
//! | `terms` | comma list of `field` (params `Ex`, `Ey` in kV/cm) and `pyramids` (params `h1`… in eV) | none |
//! | `pyramid.base` | base edge [nm] | `4.8` |
//! | `pyramid.center` | `x, y` [nm], repeatable, in parameter order | quarter points and center |
//! | `n_states` | states collected per training configuration | `6` |
//! | `report_states` | states compared in error tables | `n_states + 2` |
//! | `cluster_gap` | degeneracy threshold [eV] | `1e-3` |
//! | `solver_tol` | DNS residual tolerance [eV] | `1e-9` |
//! | `train.sweep` | `p1+p2…: lo, hi, n`: all listed parameters set to each of `n` equally spaced values, others zero | |
//! | `train.point` | `p=v, …` or `zero` | |
//! | `test.<label>` | `p=v, …` | |
//!
//! Training keys may repeat and are expanded in file order.

use std::collections::HashSet;
use std::path::Path;

use crate::dns::{assemble_hamiltonian, solve_lowest, EigenSolution};
use crate::domain::{
    build_grid, field_terms, pyramid_terms, sample_mass_and_base, Boundaries, BoundaryCondition, DotLayout, Grid,
    MassField, MaterialParams, PotentialAssembly, PyramidSpec, ScenarioParams, StructureSpec,
};
use crate::error::{Error, Result};
use crate::metrics::DEFAULT_CLUSTER_GAP;
use crate::pod::{collect_snapshots, SnapshotSet, TrainingPlan};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TermKind {
    Field,
    Pyramids,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrainingEntry {
    /// Listed parameters move together through `linspace(lo, hi, n)`.
    Sweep {
        params: Vec<String>,
        lo: f64,
        hi: f64,
        n: usize,
    },
    Point(Vec<(String, f64)>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub structure: StructureSpec,
    pub terms: Vec<TermKind>,
    pub pyramid_base: f64,
    pub pyramid_centers: Option<Vec<(f64, f64)>>,
    pub n_states: usize,
    pub report_states: usize,
    pub cluster_gap: f64,
    pub solver_tol: f64,
    pub training: Vec<TrainingEntry>,
    pub tests: Vec<(String, Vec<(String, f64)>)>,
}

fn err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("line {line}: {msg}"))
}

fn number(line: usize, s: &str) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| err(line, format!("`{}` is not a number", s.trim())))?;
    if !v.is_finite() {
        return Err(err(line, "value must be finite"));
    }
    Ok(v)
}

fn count(line: usize, s: &str) -> Result<usize> {
    s.trim().parse().map_err(|_| err(line, format!("`{}` is not a non-negative integer", s.trim())))
}

fn numbers<const N: usize>(line: usize, s: &str) -> Result<[f64; N]> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != N {
        return Err(err(line, format!("expected {N} comma-separated values")));
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = number(line, p)?;
    }
    Ok(out)
}

fn boundary(line: usize, s: &str) -> Result<BoundaryCondition> {
    match s.trim().to_ascii_lowercase().as_str() {
        "dirichlet" => Ok(BoundaryCondition::DirichletZero),
        "neumann" => Ok(BoundaryCondition::NeumannZero),
        "periodic" => Ok(BoundaryCondition::Periodic),
        other => Err(err(line, format!("unknown boundary condition `{other}`"))),
    }
}

/// `name=value` pairs separated by commas; `zero`, `none` or empty for no assignments.
pub fn parse_assignments(s: &str) -> Result<Vec<(String, f64)>> {
    let s = s.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("zero") || s.eq_ignore_ascii_case("none") {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|part| {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected name=value, got `{}`", part.trim())))?;
            let v: f64 = v.trim().parse().map_err(|_| Error::Config(format!("`{}` is not a number", v.trim())))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read scenario {}: {e}", path.display())))?;
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Self::parse(&text, &stem)
    }

    pub fn parse(text: &str, default_name: &str) -> Result<Self> {
        let mut name = default_name.to_string();
        let mut domain = None;
        let mut h = None;
        let mut layout = DotLayout { rows: 0, cols: 0, dot_size: 0.0, gap: 0.0, spacer: 0.0 };
        let mut barrier = MaterialParams::GAAS;
        let mut well = MaterialParams::INAS;
        let mut bc = Boundaries::uniform(BoundaryCondition::DirichletZero);
        let mut terms = Vec::new();
        let mut pyramid_base = 4.8;
        let mut centers: Vec<(f64, f64)> = Vec::new();
        let mut n_states = 6;
        let mut report_states = None;
        let mut cluster_gap = DEFAULT_CLUSTER_GAP;
        let mut solver_tol = crate::dns::DEFAULT_TOL;
        let mut training = Vec::new();
        let mut tests: Vec<(String, Vec<(String, f64)>)> = Vec::new();
        let mut seen = HashSet::new();

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap().trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| err(line, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            let repeatable = matches!(key, "train.sweep" | "train.point" | "pyramid.center");
            if !repeatable && !seen.insert(key.to_string()) {
                return Err(err(line, format!("duplicate key `{key}`")));
            }
            match key {
                "name" => name = value.to_string(),
                "domain" => {
                    let [lx, ly] = numbers(line, value)?;
                    domain = Some((lx, ly));
                }
                "grid_spacing" => h = Some(number(line, value)?),
                "dots" => {
                    let parts: Vec<&str> = value.split(',').collect();
                    if parts.len() != 2 {
                        return Err(err(line, "expected `rows, cols`"));
                    }
                    layout.rows = count(line, parts[0])?;
                    layout.cols = count(line, parts[1])?;
                }
                "dot_size" => layout.dot_size = number(line, value)?,
                "dot_gap" => layout.gap = number(line, value)?,
                "spacer" => layout.spacer = number(line, value)?,
                "barrier" | "well" => {
                    let [m, e] = numbers(line, value)?;
                    let mat = MaterialParams::new(m, e).map_err(|e| err(line, e))?;
                    if key == "barrier" {
                        barrier = mat;
                    } else {
                        well = mat;
                    }
                }
                "bc" => bc = Boundaries::uniform(boundary(line, value)?),
                "bc.left" => bc.left = boundary(line, value)?,
                "bc.right" => bc.right = boundary(line, value)?,
                "bc.bottom" => bc.bottom = boundary(line, value)?,
                "bc.top" => bc.top = boundary(line, value)?,
                "terms" => {
                    for t in value.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                        let kind = match t {
                            "field" => TermKind::Field,
                            "pyramids" => TermKind::Pyramids,
                            other => return Err(err(line, format!("unknown term `{other}`"))),
                        };
                        if terms.contains(&kind) {
                            return Err(err(line, format!("term `{t}` listed twice")));
                        }
                        terms.push(kind);
                    }
                }
                "pyramid.base" => pyramid_base = number(line, value)?,
                "pyramid.center" => {
                    let [x, y] = numbers(line, value)?;
                    centers.push((x, y));
                }
                "n_states" => n_states = count(line, value)?,
                "report_states" => report_states = Some(count(line, value)?),
                "cluster_gap" => cluster_gap = number(line, value)?,
                "solver_tol" => solver_tol = number(line, value)?,
                "train.sweep" => {
                    let (names, range) =
                        value.split_once(':').ok_or_else(|| err(line, "expected `p1+p2: lo, hi, n`"))?;
                    let params: Vec<String> = names.split('+').map(|p| p.trim().to_string()).collect();
                    let parts: Vec<&str> = range.split(',').collect();
                    if parts.len() != 3 {
                        return Err(err(line, "expected `lo, hi, n` after the parameter names"));
                    }
                    let n = count(line, parts[2])?;
                    if n == 0 {
                        return Err(err(line, "sweep needs at least one value"));
                    }
                    training.push(TrainingEntry::Sweep {
                        params,
                        lo: number(line, parts[0])?,
                        hi: number(line, parts[1])?,
                        n,
                    });
                }
                "train.point" => {
                    training.push(TrainingEntry::Point(parse_assignments(value).map_err(|e| err(line, e))?))
                }
                k if k.starts_with("test.") && k.len() > 5 => {
                    tests.push((k[5..].to_string(), parse_assignments(value).map_err(|e| err(line, e))?))
                }
                other => return Err(err(line, format!("unknown key `{other}`"))),
            }
        }

        let domain_size = domain.ok_or_else(|| Error::Config("missing key `domain`".into()))?;
        let grid_spacing = h.ok_or_else(|| Error::Config("missing key `grid_spacing`".into()))?;
        if n_states == 0 {
            return Err(Error::Config("n_states must be positive".into()));
        }
        if !(cluster_gap >= 0.0) || !(solver_tol > 0.0) {
            return Err(Error::Config("cluster_gap must be non-negative and solver_tol positive".into()));
        }
        if !(pyramid_base > 0.0) {
            return Err(Error::Config("pyramid.base must be positive".into()));
        }
        let structure = StructureSpec { domain_size, layout, barrier, well, bc, grid_spacing };
        structure.validate()?;
        let scenario = Scenario {
            name,
            structure,
            terms,
            pyramid_base,
            pyramid_centers: (!centers.is_empty()).then_some(centers),
            n_states,
            report_states: report_states.unwrap_or(n_states + 2),
            cluster_gap,
            solver_tol,
            training,
            tests,
        };
        let names = scenario.param_names();
        let known = |p: &str| names.iter().any(|n| n == p);
        for entry in &scenario.training {
            let listed: Vec<&str> = match entry {
                TrainingEntry::Sweep { params, .. } => params.iter().map(String::as_str).collect(),
                TrainingEntry::Point(a) => a.iter().map(|(n, _)| n.as_str()).collect(),
            };
            if let Some(bad) = listed.iter().find(|p| !known(p)) {
                return Err(Error::Config(format!("training refers to unknown parameter `{bad}`")));
            }
        }
        for (label, a) in &scenario.tests {
            scenario.resolve(a).map_err(|e| Error::Config(format!("test.{label}: {e}")))?;
        }
        Ok(scenario)
    }

    pub fn pyramids(&self) -> Vec<PyramidSpec> {
        let (lx, ly) = self.structure.domain_size;
        match &self.pyramid_centers {
            Some(c) => c.iter().map(|&center| PyramidSpec { center, base: self.pyramid_base }).collect(),
            None => PyramidSpec::default_layout(lx, ly, self.pyramid_base),
        }
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for t in &self.terms {
            match t {
                TermKind::Field => out.extend(["Ex".to_string(), "Ey".to_string()]),
                TermKind::Pyramids => out.extend((1..=self.pyramids().len()).map(|k| format!("h{k}"))),
            }
        }
        out
    }

    /// Parameter vector from named assignments; unlisted parameters are zero.
    pub fn resolve(&self, assignments: &[(String, f64)]) -> Result<ScenarioParams> {
        let names = self.param_names();
        let mut values = vec![0.0; names.len()];
        let mut set = HashSet::new();
        for (k, v) in assignments {
            let idx = names.iter().position(|n| n == k).ok_or_else(|| {
                Error::Config(format!("unknown parameter `{k}` (expected one of: {})", names.join(", ")))
            })?;
            if !set.insert(idx) {
                return Err(Error::Config(format!("parameter `{k}` given twice")));
            }
            values[idx] = *v;
        }
        Ok(ScenarioParams::new(values))
    }

    pub fn parse_params(&self, s: &str) -> Result<ScenarioParams> {
        self.resolve(&parse_assignments(s)?)
    }

    pub fn test_params(&self, label: &str) -> Result<ScenarioParams> {
        let (_, a) = self
            .tests
            .iter()
            .find(|(l, _)| l == label)
            .ok_or_else(|| Error::Config(format!("scenario has no test point `{label}`")))?;
        self.resolve(a)
    }

    /// Training configurations in file order.
    pub fn training_configs(&self) -> Result<Vec<ScenarioParams>> {
        let mut out = Vec::new();
        for entry in &self.training {
            match entry {
                TrainingEntry::Sweep { params, lo, hi, n } => {
                    for k in 0..*n {
                        let v = if *n == 1 { *lo } else { lo + (hi - lo) * k as f64 / (*n - 1) as f64 };
                        let a: Vec<(String, f64)> = params.iter().map(|p| (p.clone(), v)).collect();
                        out.push(self.resolve(&a)?);
                    }
                }
                TrainingEntry::Point(a) => out.push(self.resolve(a)?),
            }
        }
        Ok(out)
    }

    pub fn training_plan(&self) -> Result<TrainingPlan> {
        TrainingPlan::new(self.training_configs()?, self.n_states)
    }
}

/// A scenario sampled on its grid, ready for DNS and model reduction.
#[derive(Clone, Debug)]
pub struct Setup {
    pub scenario: Scenario,
    pub grid: Grid,
    pub mass: MassField,
    pub assembly: PotentialAssembly,
}

impl Setup {
    pub fn new(scenario: Scenario) -> Result<Self> {
        let grid = build_grid(&scenario.structure)?;
        let (mass, base) = sample_mass_and_base(&scenario.structure, &grid);
        let mut assembly = PotentialAssembly::new(base);
        for t in &scenario.terms {
            match t {
                TermKind::Field => {
                    let (sx, sy) = field_terms(&grid);
                    assembly = assembly.with_term("Ex", sx).with_term("Ey", sy);
                }
                TermKind::Pyramids => {
                    for (k, shape) in pyramid_terms(&scenario.pyramids(), &grid).into_iter().enumerate() {
                        assembly = assembly.with_term(format!("h{}", k + 1), shape);
                    }
                }
            }
        }
        Ok(Setup { scenario, grid, mass, assembly })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::new(Scenario::load(path)?)
    }

    pub fn dns(&self, params: &ScenarioParams, k: usize) -> Result<EigenSolution> {
        let u = self.assembly.assemble(params)?;
        let h = assemble_hamiltonian(&self.grid, &self.mass, &u)?;
        solve_lowest(&h, k, self.scenario.solver_tol)
    }

    pub fn snapshots(&self) -> Result<SnapshotSet> {
        collect_snapshots(
            &self.scenario.training_plan()?,
            &self.grid,
            &self.mass,
            &self.assembly,
            self.scenario.solver_tol,
        )
    }
}
