//! Real Fourier plane-wave basis on a doubly periodic grid.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::domain::Grid;
use crate::error::{Error, Result};
use crate::rom::GridBasis;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Constant,
    Cos,
    Sin,
}

/// Integer wavevector `(n_x, n_y)` with `k = 2π (n_x/Lx, n_y/Ly)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Wavevector {
    pub nx: i64,
    pub ny: i64,
    pub parity: Parity,
}

#[derive(Clone, Debug)]
pub struct PlaneWaveBasis {
    pub modes: DMatrix<f64>,
    pub wavevectors: Vec<Wavevector>,
    /// |k|² of each mode [nm⁻²].
    pub k_squared: Vec<f64>,
    lx: f64,
    ly: f64,
    norms: Vec<f64>,
}

impl PlaneWaveBasis {
    pub fn len(&self) -> usize {
        self.modes.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn k(&self, w: &Wavevector) -> (f64, f64) {
        (2.0 * PI * w.nx as f64 / self.lx, 2.0 * PI * w.ny as f64 / self.ly)
    }
}

impl GridBasis for PlaneWaveBasis {
    fn modes(&self) -> &DMatrix<f64> {
        &self.modes
    }

    fn exact_gradients(&self, grid: &Grid) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        let mut gx = DMatrix::zeros(grid.len(), self.len());
        let mut gy = DMatrix::zeros(grid.len(), self.len());
        for (c, w) in self.wavevectors.iter().enumerate() {
            let (kx, ky) = self.k(w);
            let amp = self.norms[c];
            for (p, (_, _, x, y)) in grid.points().enumerate() {
                let phase = kx * x + ky * y;
                let d = match w.parity {
                    Parity::Constant => 0.0,
                    Parity::Cos => -amp * phase.sin(),
                    Parity::Sin => amp * phase.cos(),
                };
                gx[(p, c)] = kx * d;
                gy[(p, c)] = ky * d;
            }
        }
        Some((gx, gy))
    }
}

/// Wavevectors in a half plane (so ±k are not duplicated), ordered by ascending |k|²,
/// then `n_x`, then `n_y`, cosine before sine.
fn ordered_wavevectors(count: usize, lx: f64, ly: f64) -> Vec<(Wavevector, f64)> {
    let ksq = |nx: i64, ny: i64| (2.0 * PI).powi(2) * ((nx as f64 / lx).powi(2) + (ny as f64 / ly).powi(2));
    let mut radius: i64 = 1;
    loop {
        let mut list = vec![(Wavevector { nx: 0, ny: 0, parity: Parity::Constant }, 0.0)];
        for nx in 0..=radius {
            for ny in -radius..=radius {
                if nx == 0 && ny <= 0 {
                    continue;
                }
                let k2 = ksq(nx, ny);
                list.push((Wavevector { nx, ny, parity: Parity::Cos }, k2));
                list.push((Wavevector { nx, ny, parity: Parity::Sin }, k2));
            }
        }
        // |k|² values equal up to rounding count as one shell
        let shell_cmp = |a: f64, b: f64| {
            if (a - b).abs() <= 1e-12 * a.max(b) {
                std::cmp::Ordering::Equal
            } else {
                a.total_cmp(&b)
            }
        };
        list.sort_by(|a, b| {
            shell_cmp(a.1, b.1)
                .then(a.0.nx.cmp(&b.0.nx))
                .then(a.0.ny.cmp(&b.0.ny))
                .then((a.0.parity == Parity::Sin).cmp(&(b.0.parity == Parity::Sin)))
        });
        // the square window is complete for every |k|² below the inscribed circle
        let limit = ksq(radius + 1, 0).min(ksq(0, radius + 1));
        if list.len() > count && list[count - 1].1 < limit {
            list.truncate(count);
            return list;
        }
        radius *= 2;
    }
}

pub fn generate_fpw_basis(grid: &Grid, m: usize) -> Result<PlaneWaveBasis> {
    if !grid.bc.fully_periodic() {
        return Err(Error::Invalid("plane-wave basis needs periodic boundaries on all sides".into()));
    }
    if m == 0 {
        return Err(Error::Invalid("plane-wave basis needs at least one mode".into()));
    }
    let waves = ordered_wavevectors(m, grid.lx, grid.ly);
    let max_n = waves.iter().map(|(w, _)| w.nx.abs().max(w.ny.abs())).max().unwrap_or(0);
    if 2 * max_n as usize >= grid.nx.min(grid.ny) {
        return Err(Error::Invalid(format!("{m} plane waves alias on a {}×{} grid", grid.nx, grid.ny)));
    }
    let mut modes = DMatrix::zeros(grid.len(), m);
    let mut norms = Vec::with_capacity(m);
    for (c, (w, _)) in waves.iter().enumerate() {
        let (kx, ky) = (2.0 * PI * w.nx as f64 / grid.lx, 2.0 * PI * w.ny as f64 / grid.ly);
        let raw: Vec<f64> = grid
            .points()
            .map(|(_, _, x, y)| {
                let phase = kx * x + ky * y;
                match w.parity {
                    Parity::Constant => 1.0,
                    Parity::Cos => std::f64::consts::SQRT_2 * phase.cos(),
                    Parity::Sin => std::f64::consts::SQRT_2 * phase.sin(),
                }
            })
            .collect();
        let norm = grid.norm(&raw);
        let amp = match w.parity {
            Parity::Constant => 1.0,
            _ => std::f64::consts::SQRT_2,
        } / norm;
        for (dst, v) in modes.column_mut(c).iter_mut().zip(&raw) {
            *dst = v / norm;
        }
        norms.push(amp);
    }
    Ok(PlaneWaveBasis {
        modes,
        k_squared: waves.iter().map(|w| w.1).collect(),
        wavevectors: waves.into_iter().map(|w| w.0).collect(),
        lx: grid.lx,
        ly: grid.ly,
        norms,
    })
}
