//! Binary and CSV artifacts.
//!
//! `QWF1` (wavefunctions, POD and plane-wave bases):
//! magic `QWF1`, `u32` nx, `u32` ny, `u32` count, then per state an `f64` scalar
//! (energy, POD eigenvalue or |k|²) followed by `nx·ny` `f64` values, row-major
//! (`p = j·nx + i`). All little-endian.
//!
//! `PODH` (reduced matrices): magic `PODH`, `u32` M_max, `u32` n_terms, then the
//! `M_max × M_max` row-major `f64` matrices T, U_base, U_1 … U_n, B.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::rom::ReducedModel;

const QWF_MAGIC: &[u8; 4] = b"QWF1";
const PODH_MAGIC: &[u8; 4] = b"PODH";

/// Write via a sibling temporary file and rename, so readers never see partial files.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = temp_path(path);
    {
        let mut f = BufWriter::new(fs::File::create(&tmp)?);
        f.write_all(bytes)?;
        f.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

fn temp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(format!(".tmp{}", std::process::id()));
    path.with_file_name(name)
}

/// Stack of grid functions, one per column, with one scalar each.
#[derive(Clone, Debug, PartialEq)]
pub struct Wavefunctions {
    pub nx: usize,
    pub ny: usize,
    pub scalars: Vec<f64>,
    pub states: DMatrix<f64>,
}

fn put_u32(buf: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Invalid(format!("{v} does not fit the header")))?;
    buf.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_f64s<'a>(buf: &mut Vec<u8>, vals: impl IntoIterator<Item = &'a f64>) {
    for v in vals {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_wavefunctions(nx: usize, ny: usize, scalars: &[f64], states: &DMatrix<f64>) -> Result<Vec<u8>> {
    if states.nrows() != nx * ny || states.ncols() != scalars.len() {
        return Err(Error::Dimension(format!(
            "{}×{} states for a {nx}×{ny} grid with {} scalars",
            states.nrows(),
            states.ncols(),
            scalars.len()
        )));
    }
    let mut buf = Vec::with_capacity(16 + 8 * scalars.len() * (1 + nx * ny));
    buf.extend_from_slice(QWF_MAGIC);
    put_u32(&mut buf, nx)?;
    put_u32(&mut buf, ny)?;
    put_u32(&mut buf, scalars.len())?;
    for (k, s) in scalars.iter().enumerate() {
        put_f64s(&mut buf, [s]);
        put_f64s(&mut buf, states.column(k).iter());
    }
    Ok(buf)
}

pub fn write_wavefunctions(path: &Path, nx: usize, ny: usize, scalars: &[f64], states: &DMatrix<f64>) -> Result<()> {
    write_atomic(path, &encode_wavefunctions(nx, ny, scalars, states)?)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn magic(&mut self, want: &[u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != want {
            return Err(Error::Format(format!(
                "expected magic {}, found {:?}",
                String::from_utf8_lossy(want),
                String::from_utf8_lossy(got)
            )));
        }
        Ok(())
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

pub fn decode_wavefunctions(bytes: &[u8]) -> Result<Wavefunctions> {
    let mut r = Reader { bytes, pos: 0 };
    r.magic(QWF_MAGIC)?;
    let (nx, ny, count) = (r.u32()?, r.u32()?, r.u32()?);
    let n = nx.checked_mul(ny).ok_or_else(|| Error::Format("grid size overflows".into()))?;
    let expected = count.checked_mul(n + 1).and_then(|c| c.checked_mul(8)).map(|c| c + 16);
    if expected != Some(bytes.len()) {
        return Err(Error::Format(format!("{} bytes for {count} states on {nx}×{ny}", bytes.len())));
    }
    let mut scalars = Vec::with_capacity(count);
    let mut states = DMatrix::zeros(n, count);
    for k in 0..count {
        scalars.push(r.f64()?);
        for p in 0..n {
            states[(p, k)] = r.f64()?;
        }
    }
    r.finish()?;
    Ok(Wavefunctions { nx, ny, scalars, states })
}

pub fn read_wavefunctions(path: &Path) -> Result<Wavefunctions> {
    decode_wavefunctions(&fs::read(path)?)
}

pub fn encode_reduced(model: &ReducedModel) -> Result<Vec<u8>> {
    let m = model.max_modes();
    let mats: Vec<&DMatrix<f64>> = std::iter::once(&model.kinetic)
        .chain(std::iter::once(&model.potential_base))
        .chain(model.potential_terms.iter())
        .chain(std::iter::once(&model.boundary))
        .collect();
    if mats.iter().any(|a| a.shape() != (m, m)) {
        return Err(Error::Dimension("reduced matrices differ in size".into()));
    }
    let mut buf = Vec::with_capacity(12 + 8 * m * m * mats.len());
    buf.extend_from_slice(PODH_MAGIC);
    put_u32(&mut buf, m)?;
    put_u32(&mut buf, model.potential_terms.len())?;
    for a in mats {
        // nalgebra is column-major; the transpose's storage is the row-major order
        put_f64s(&mut buf, a.transpose().as_slice());
    }
    Ok(buf)
}

/// Decode reduced matrices. Parameter names are not stored and come from the scenario.
pub fn decode_reduced(bytes: &[u8], param_names: Vec<String>) -> Result<ReducedModel> {
    let mut r = Reader { bytes, pos: 0 };
    r.magic(PODH_MAGIC)?;
    let (m, n_terms) = (r.u32()?, r.u32()?);
    if param_names.len() != n_terms {
        return Err(Error::Dimension(format!("{n_terms} stored terms, {} parameter names", param_names.len())));
    }
    let expected = m.checked_mul(m).and_then(|s| s.checked_mul(8 * (n_terms + 3))).map(|s| s + 12);
    if expected != Some(bytes.len()) {
        return Err(Error::Format(format!("{} bytes for M = {m} with {n_terms} terms", bytes.len())));
    }
    let mut matrix = || -> Result<DMatrix<f64>> {
        let vals = (0..m * m).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        Ok(DMatrix::from_row_slice(m, m, &vals))
    };
    let kinetic = matrix()?;
    let potential_base = matrix()?;
    let potential_terms = (0..n_terms).map(|_| matrix()).collect::<Result<Vec<_>>>()?;
    let boundary = matrix()?;
    r.finish()?;
    Ok(ReducedModel { kinetic, potential_base, potential_terms, boundary, param_names, asymmetry: 0.0 })
}

pub fn write_reduced(path: &Path, model: &ReducedModel) -> Result<()> {
    write_atomic(path, &encode_reduced(model)?)
}

pub fn read_reduced(path: &Path, param_names: Vec<String>) -> Result<ReducedModel> {
    decode_reduced(&fs::read(path)?, param_names)
}

pub fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    if let Some(bad) = rows.iter().find(|r| r.len() != header.len()) {
        return Err(Error::Dimension(format!("CSV row has {} cells, header {}", bad.len(), header.len())));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(header).map_err(to_io)?;
    for r in rows {
        w.write_record(r).map_err(to_io)?;
    }
    w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    write_atomic(path, &csv_bytes(header, rows)?)
}

/// Values in `{:e}` form round-trip exactly through `str::parse`.
pub fn exact(x: f64) -> String {
    format!("{x:e}")
}
