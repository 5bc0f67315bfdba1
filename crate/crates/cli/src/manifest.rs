//! Per-run JSON manifest: configuration echo, artifact paths and stage timings.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use qdrom::io::write_atomic;
use qdrom::scenario::{Scenario, TermKind};
use qdrom::{Error, Result};
use serde::Serialize;

#[derive(Serialize, Debug)]
pub struct ConfigEcho {
    pub name: String,
    pub domain_nm: (f64, f64),
    pub grid_spacing_nm: f64,
    pub grid_points: (usize, usize),
    pub boundaries: BTreeMap<&'static str, &'static str>,
    pub dots: (usize, usize),
    pub dot_size_nm: f64,
    pub dot_gap_nm: f64,
    pub spacer_nm: f64,
    pub barrier: (f64, f64),
    pub well: (f64, f64),
    pub terms: Vec<&'static str>,
    pub parameters: Vec<String>,
    pub n_states: usize,
    pub report_states: usize,
    pub cluster_gap_ev: f64,
    pub solver_tol_ev: f64,
    pub training_configs: usize,
}

impl ConfigEcho {
    pub fn new(s: &Scenario, nx: usize, ny: usize) -> Self {
        let st = &s.structure;
        let bc = [("left", st.bc.left), ("right", st.bc.right), ("bottom", st.bc.bottom), ("top", st.bc.top)]
            .into_iter()
            .map(|(k, v)| (k, v.name()))
            .collect();
        ConfigEcho {
            name: s.name.clone(),
            domain_nm: st.domain_size,
            grid_spacing_nm: st.grid_spacing,
            grid_points: (nx, ny),
            boundaries: bc,
            dots: (st.layout.rows, st.layout.cols),
            dot_size_nm: st.layout.dot_size,
            dot_gap_nm: st.layout.gap,
            spacer_nm: st.layout.spacer,
            barrier: (st.barrier.mass_ratio, st.barrier.band_edge),
            well: (st.well.mass_ratio, st.well.band_edge),
            terms: s
                .terms
                .iter()
                .map(|t| match t {
                    TermKind::Field => "field",
                    TermKind::Pyramids => "pyramids",
                })
                .collect(),
            parameters: s.param_names(),
            n_states: s.n_states,
            report_states: s.report_states,
            cluster_gap_ev: s.cluster_gap,
            solver_tol_ev: s.solver_tol,
            training_configs: s.training_configs().map(|c| c.len()).unwrap_or(0),
        }
    }
}

#[derive(Serialize, Debug)]
pub struct RunManifest {
    pub command: &'static str,
    pub scenario: PathBuf,
    pub config: ConfigEcho,
    pub settings: BTreeMap<&'static str, serde_json::Value>,
    pub artifacts: BTreeMap<&'static str, PathBuf>,
    pub timings_s: BTreeMap<&'static str, f64>,
}

impl RunManifest {
    pub fn new(command: &'static str, scenario: &Path, config: ConfigEcho) -> Self {
        RunManifest {
            command,
            scenario: scenario.to_path_buf(),
            config,
            settings: BTreeMap::new(),
            artifacts: BTreeMap::new(),
            timings_s: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, key: &'static str, value: impl Into<serde_json::Value>) {
        self.settings.insert(key, value.into());
    }

    pub fn artifact(&mut self, key: &'static str, path: &Path) {
        self.artifacts.insert(key, path.to_path_buf());
    }

    /// Run `f`, recording its wall time under `stage`.
    pub fn timed<T>(&mut self, stage: &'static str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.timings_s.insert(stage, t.elapsed().as_secs_f64());
        out
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("{}.manifest.json", self.command));
        let json = serde_json::to_vec_pretty(self).map_err(|e| Error::Invalid(format!("manifest: {e}")))?;
        write_atomic(&path, &json)?;
        Ok(path)
    }
}
