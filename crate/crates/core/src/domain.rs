//! Quantum-dot structures, their sampling grid, and the parametric potential.
//!
//! Coordinates are in nm with the origin at the lower-left domain corner.
//! Grid values are stored row-major: point `(i, j)` lives at `j * nx + i`.

use std::ops::Deref;

use crate::error::{Error, Result};
use crate::units::EV_PER_NM_PER_KV_CM;

/// Relative effective mass and conduction-band edge of one material.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialParams {
    /// m*/m0.
    pub mass_ratio: f64,
    /// Band-edge energy [eV].
    pub band_edge: f64,
}

impl MaterialParams {
    /// GaAs barrier: m* = 0.067 m0, band edge 0.544 eV above the InAs well.
    pub const GAAS: MaterialParams = MaterialParams { mass_ratio: 0.067, band_edge: 0.544 };
    /// InAs well, taken as the energy reference.
    pub const INAS: MaterialParams = MaterialParams { mass_ratio: 0.023, band_edge: 0.0 };

    pub fn new(mass_ratio: f64, band_edge: f64) -> Result<Self> {
        let m = MaterialParams { mass_ratio, band_edge };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        if !(self.mass_ratio > 0.0 && self.mass_ratio.is_finite()) {
            return Err(Error::Config(format!("effective mass ratio must be positive, got {}", self.mass_ratio)));
        }
        if !self.band_edge.is_finite() {
            return Err(Error::Config("band edge must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryCondition {
    DirichletZero,
    NeumannZero,
    Periodic,
}

impl BoundaryCondition {
    pub fn name(self) -> &'static str {
        match self {
            BoundaryCondition::DirichletZero => "dirichlet",
            BoundaryCondition::NeumannZero => "neumann",
            BoundaryCondition::Periodic => "periodic",
        }
    }
}

/// Boundary condition on each side of the rectangular domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Boundaries {
    pub left: BoundaryCondition,
    pub right: BoundaryCondition,
    pub bottom: BoundaryCondition,
    pub top: BoundaryCondition,
}

impl Boundaries {
    pub fn uniform(bc: BoundaryCondition) -> Self {
        Boundaries { left: bc, right: bc, bottom: bc, top: bc }
    }

    pub fn periodic_x(&self) -> bool {
        self.left == BoundaryCondition::Periodic
    }

    pub fn periodic_y(&self) -> bool {
        self.bottom == BoundaryCondition::Periodic
    }

    pub fn fully_periodic(&self) -> bool {
        self.periodic_x() && self.periodic_y()
    }

    pub fn validate(&self) -> Result<()> {
        let p = BoundaryCondition::Periodic;
        if (self.left == p) != (self.right == p) {
            return Err(Error::Config("periodic BC must be set on both left and right".into()));
        }
        if (self.bottom == p) != (self.top == p) {
            return Err(Error::Config("periodic BC must be set on both bottom and top".into()));
        }
        Ok(())
    }
}

/// Regular array of square dots.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DotLayout {
    pub rows: usize,
    pub cols: usize,
    /// Edge length of each square dot [nm].
    pub dot_size: f64,
    /// Separation between adjacent dots [nm].
    pub gap: f64,
    /// Barrier spacer between the outer dots and the domain edge [nm].
    pub spacer: f64,
}

impl DotLayout {
    fn extent(&self, count: usize) -> f64 {
        count as f64 * self.dot_size + (count as f64 - 1.0) * self.gap + 2.0 * self.spacer
    }
}

/// Closed axis-aligned rectangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    fn contains(&self, x: f64, y: f64, eps: f64) -> bool {
        x >= self.x0 - eps && x <= self.x1 + eps && y >= self.y0 - eps && y <= self.y1 + eps
    }
}

/// Declarative description of a quantum-dot nanostructure.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureSpec {
    /// (Lx, Ly) [nm].
    pub domain_size: (f64, f64),
    pub layout: DotLayout,
    pub barrier: MaterialParams,
    pub well: MaterialParams,
    pub bc: Boundaries,
    /// Grid spacing h [nm], equal in x and y.
    pub grid_spacing: f64,
}

impl StructureSpec {
    /// 4×4 array of 4 nm InAs dots in GaAs, 1 nm gaps, 2.5 nm spacer, 24 nm square, h = 0.1 nm.
    pub fn field_array() -> Self {
        StructureSpec {
            domain_size: (24.0, 24.0),
            layout: DotLayout { rows: 4, cols: 4, dot_size: 4.0, gap: 1.0, spacer: 2.5 },
            barrier: MaterialParams::GAAS,
            well: MaterialParams::INAS,
            bc: Boundaries::uniform(BoundaryCondition::DirichletZero),
            grid_spacing: 0.1,
        }
    }

    /// 3×3 array of 4 nm dots, 1.5 nm gaps, 1.25 nm spacer, 17.5 nm periodic cell, h = 0.1 nm.
    pub fn periodic_array() -> Self {
        StructureSpec {
            domain_size: (17.5, 17.5),
            layout: DotLayout { rows: 3, cols: 3, dot_size: 4.0, gap: 1.5, spacer: 1.25 },
            barrier: MaterialParams::GAAS,
            well: MaterialParams::INAS,
            bc: Boundaries::uniform(BoundaryCondition::Periodic),
            grid_spacing: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lx, ly) = self.domain_size;
        if !(lx > 0.0 && ly > 0.0 && self.grid_spacing > 0.0) {
            return Err(Error::Config("domain size and grid spacing must be positive".into()));
        }
        self.barrier.validate()?;
        self.well.validate()?;
        self.bc.validate()?;
        let l = &self.layout;
        if l.rows > 0 && l.cols > 0 {
            if !(l.dot_size > 0.0 && l.gap >= 0.0 && l.spacer >= 0.0) {
                return Err(Error::Config("dot size must be positive, gap and spacer non-negative".into()));
            }
            let tol = 1e-9 * lx.max(ly);
            if (l.extent(l.cols) - lx).abs() > tol {
                return Err(Error::Config(format!(
                    "dot layout spans {} nm along x but the domain is {} nm",
                    l.extent(l.cols),
                    lx
                )));
            }
            if (l.extent(l.rows) - ly).abs() > tol {
                return Err(Error::Config(format!(
                    "dot layout spans {} nm along y but the domain is {} nm",
                    l.extent(l.rows),
                    ly
                )));
            }
        }
        intervals(lx, self.grid_spacing)?;
        intervals(ly, self.grid_spacing)?;
        Ok(())
    }

    /// Dot rectangles, row by row from the bottom-left.
    pub fn dots(&self) -> Vec<Rect> {
        let l = &self.layout;
        let pitch = l.dot_size + l.gap;
        let mut out = Vec::with_capacity(l.rows * l.cols);
        for r in 0..l.rows {
            for c in 0..l.cols {
                let x0 = l.spacer + c as f64 * pitch;
                let y0 = l.spacer + r as f64 * pitch;
                out.push(Rect { x0, x1: x0 + l.dot_size, y0, y1: y0 + l.dot_size });
            }
        }
        out
    }
}

/// Number of grid intervals `length / h`, which must be an integer.
fn intervals(length: f64, h: f64) -> Result<usize> {
    let r = length / h;
    let n = r.round();
    if n < 1.0 || (r - n).abs() > 1e-9 * r.max(1.0) {
        return Err(Error::Config(format!(
            "domain length {length} nm is not an integer multiple of grid spacing {h} nm"
        )));
    }
    Ok(n as usize)
}

/// Uniform tensor grid with per-point quadrature weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub lx: f64,
    pub ly: f64,
    pub bc: Boundaries,
    wx: Vec<f64>,
    wy: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid {
    /// Build a grid directly from extents; non-periodic axes include both end points,
    /// periodic axes drop the duplicate at `L`.
    pub fn new(lx: f64, ly: f64, h: f64, bc: Boundaries) -> Result<Self> {
        bc.validate()?;
        if !(h > 0.0) {
            return Err(Error::Config("grid spacing must be positive".into()));
        }
        let (nx, wx) = axis(intervals(lx, h)?, h, bc.periodic_x());
        let (ny, wy) = axis(intervals(ly, h)?, h, bc.periodic_y());
        let mut weights = Vec::with_capacity(nx * ny);
        for &b in &wy {
            for &a in &wx {
                weights.push(a * b);
            }
        }
        Ok(Grid { nx, ny, h, lx, ly, bc, wx, wy, weights })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.h
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Extent of the dual cell along x at column `i` (h, or h/2 on a non-periodic edge).
    pub fn wx(&self, i: usize) -> f64 {
        self.wx[i]
    }

    pub fn wy(&self, j: usize) -> f64 {
        self.wy[j]
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    /// Whether point `(i, j)` sits on a homogeneous-Dirichlet side.
    pub fn is_dirichlet(&self, i: usize, j: usize) -> bool {
        use BoundaryCondition::DirichletZero as D;
        let bc = &self.bc;
        (!bc.periodic_x() && ((i == 0 && bc.left == D) || (i + 1 == self.nx && bc.right == D)))
            || (!bc.periodic_y() && ((j == 0 && bc.bottom == D) || (j + 1 == self.ny && bc.top == D)))
    }

    /// Weighted inner product ∫ a b dΩ.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.len());
        self.weights.iter().zip(a).zip(b).map(|((w, x), y)| w * x * y).sum()
    }

    pub fn norm(&self, a: &[f64]) -> f64 {
        self.inner(a, a).sqrt()
    }

    /// Every point as `(i, j, x, y)` in storage order.
    pub fn points(&self) -> impl Iterator<Item = (usize, usize, f64, f64)> + '_ {
        (0..self.ny).flat_map(move |j| (0..self.nx).map(move |i| (i, j, self.x(i), self.y(j))))
    }

    /// Grid keeping every `stride`-th point, for cheap output of reconstructed fields.
    pub fn subsample_indices(&self, stride: usize) -> (usize, usize, Vec<usize>) {
        let stride = stride.max(1);
        let xs: Vec<usize> = (0..self.nx).step_by(stride).collect();
        let ys: Vec<usize> = (0..self.ny).step_by(stride).collect();
        let mut idx = Vec::with_capacity(xs.len() * ys.len());
        for &j in &ys {
            for &i in &xs {
                idx.push(self.index(i, j));
            }
        }
        (xs.len(), ys.len(), idx)
    }
}

fn axis(intervals: usize, h: f64, periodic: bool) -> (usize, Vec<f64>) {
    if periodic {
        (intervals, vec![h; intervals])
    } else {
        let n = intervals + 1;
        let mut w = vec![h; n];
        w[0] = 0.5 * h;
        w[n - 1] = 0.5 * h;
        (n, w)
    }
}

pub fn build_grid(spec: &StructureSpec) -> Result<Grid> {
    spec.validate()?;
    Grid::new(spec.domain_size.0, spec.domain_size.1, spec.grid_spacing, spec.bc)
}

/// Grid-sampled scalar field, e.g. a potential energy [eV].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField(pub Vec<f64>);

impl Deref for ScalarField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Grid-sampled relative effective mass m*(r)/m0.
#[derive(Clone, Debug, PartialEq)]
pub struct MassField(pub Vec<f64>);

impl Deref for MassField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Material landscape: effective mass and band-edge energy at every grid point.
///
/// Points on a dot edge belong to the dot.
pub fn sample_mass_and_base(spec: &StructureSpec, grid: &Grid) -> (MassField, ScalarField) {
    let dots = spec.dots();
    let eps = 1e-6 * grid.h;
    let mut mass = Vec::with_capacity(grid.len());
    let mut band = Vec::with_capacity(grid.len());
    for (_, _, x, y) in grid.points() {
        let m = if dots.iter().any(|d| d.contains(x, y, eps)) { spec.well } else { spec.barrier };
        mass.push(m.mass_ratio);
        band.push(m.band_edge);
    }
    (MassField(mass), ScalarField(band))
}

/// Potential shapes for a uniform in-plane field, per kV/cm, referenced to the domain center.
///
/// An electron (charge −e) gains energy along the field direction, so a positive `Ex`
/// raises the potential towards +x.
pub fn field_terms(grid: &Grid) -> (ScalarField, ScalarField) {
    let (xc, yc) = (0.5 * grid.lx, 0.5 * grid.ly);
    let mut sx = Vec::with_capacity(grid.len());
    let mut sy = Vec::with_capacity(grid.len());
    for (_, _, x, y) in grid.points() {
        sx.push(EV_PER_NM_PER_KV_CM * (x - xc));
        sy.push(EV_PER_NM_PER_KV_CM * (y - yc));
    }
    (ScalarField(sx), ScalarField(sy))
}

/// Square-based pyramid of unit height.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PyramidSpec {
    pub center: (f64, f64),
    /// Base edge length [nm].
    pub base: f64,
}

impl PyramidSpec {
    /// Four pyramids on the quarter points plus one in the center, numbered row by row
    /// from the bottom-left with the central one third.
    pub fn default_layout(lx: f64, ly: f64, base: f64) -> Vec<PyramidSpec> {
        let (q1x, q3x, q1y, q3y) = (0.25 * lx, 0.75 * lx, 0.25 * ly, 0.75 * ly);
        [(q1x, q1y), (q3x, q1y), (0.5 * lx, 0.5 * ly), (q1x, q3y), (q3x, q3y)]
            .into_iter()
            .map(|center| PyramidSpec { center, base })
            .collect()
    }
}

/// Unit-height pyramid shapes `max(0, 1 − max(|dx|, |dy|) / (base/2))`.
///
/// Distances use the minimum image along periodic axes.
pub fn pyramid_terms(pyramids: &[PyramidSpec], grid: &Grid) -> Vec<ScalarField> {
    let dist = |d: f64, period: f64, periodic: bool| {
        if periodic {
            let d = d.rem_euclid(period);
            d.min(period - d)
        } else {
            d.abs()
        }
    };
    pyramids
        .iter()
        .map(|p| {
            let half = 0.5 * p.base;
            ScalarField(
                grid.points()
                    .map(|(_, _, x, y)| {
                        let dx = dist(x - p.center.0, grid.lx, grid.bc.periodic_x());
                        let dy = dist(y - p.center.1, grid.ly, grid.bc.periodic_y());
                        (1.0 - dx.max(dy) / half).max(0.0)
                    })
                    .collect(),
            )
        })
        .collect()
}

/// Ordered parameter values for one scenario, matched to `PotentialAssembly::param_names`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioParams {
    pub values: Vec<f64>,
}

impl ScenarioParams {
    pub fn new(values: Vec<f64>) -> Self {
        ScenarioParams { values }
    }

    pub fn zeros(n: usize) -> Self {
        ScenarioParams { values: vec![0.0; n] }
    }
}

/// Potential energy as `base + Σ_k p_k · shape_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialAssembly {
    pub base: ScalarField,
    pub terms: Vec<(String, ScalarField)>,
}

impl PotentialAssembly {
    pub fn new(base: ScalarField) -> Self {
        PotentialAssembly { base, terms: Vec::new() }
    }

    pub fn with_term(mut self, name: impl Into<String>, shape: ScalarField) -> Self {
        assert_eq!(shape.len(), self.base.len(), "affine term sampled on a different grid");
        self.terms.push((name.into(), shape));
        self
    }

    pub fn param_names(&self) -> Vec<&str> {
        self.terms.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn n_params(&self) -> usize {
        self.terms.len()
    }

    pub fn check_params(&self, params: &ScenarioParams) -> Result<()> {
        if params.values.len() != self.terms.len() {
            return Err(Error::Dimension(format!(
                "expected {} parameters ({}), got {}",
                self.terms.len(),
                self.param_names().join(", "),
                params.values.len()
            )));
        }
        Ok(())
    }

    pub fn assemble(&self, params: &ScenarioParams) -> Result<ScalarField> {
        self.check_params(params)?;
        let mut u = self.base.0.clone();
        for ((_, shape), &p) in self.terms.iter().zip(&params.values) {
            if p != 0.0 {
                for (v, s) in u.iter_mut().zip(shape.iter()) {
                    *v += p * s;
                }
            }
        }
        Ok(ScalarField(u))
    }
}

pub fn assemble_potential(assembly: &PotentialAssembly, params: &ScenarioParams) -> Result<ScalarField> {
    assembly.assemble(params)
}
