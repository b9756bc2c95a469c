//! The `PBRG` binary snapshot container.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic      4 bytes   "PBRG"
//! version    u32
//! kind       u8        0 field, 1 symbol, 2 trajectory index
//! n_points   u64
//! alpha      f64
//! t          f64
//! payload    (re, im) f64 pairs
//! ```
//!
//! Field payloads hold `N` coefficients in increasing frequency. Symbol payloads
//! hold `N²` coefficients row-major over `η` then `ξ`, followed by one trailing
//! pair `(order_m, declared_rho)`. A trajectory index holds one pair
//! `(t_i, i)` per sample; sample `i` lives in `<stem>.<i>.pbrg` beside it.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use paraburgers::solver::Trajectory;
use paraburgers::spectral::{Field, Grid};
use paraburgers::symbols::Symbol;
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"PBRG";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 1 + 8 + 8 + 8;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("not a PBRG snapshot")]
    BadMagic,
    #[error("snapshot format version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("payload truncated: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("snapshot holds kind {found}, expected {expected}")]
    WrongKind { found: u8, expected: u8 },
    #[error("invalid grid: {0}")]
    Grid(#[from] paraburgers::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Kind {
    Field = 0,
    Symbol = 1,
    TrajectoryIndex = 2,
}

/// Header fields shared by every snapshot kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Header {
    pub kind: u8,
    pub n_points: u64,
    pub alpha: f64,
    pub t: f64,
}

pub fn encode(kind: Kind, n_points: usize, alpha: f64, t: f64, payload: &[Complex64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(kind as u8);
    out.extend_from_slice(&(n_points as u64).to_le_bytes());
    out.extend_from_slice(&alpha.to_le_bytes());
    out.extend_from_slice(&t.to_le_bytes());
    for c in payload {
        out.extend_from_slice(&c.re.to_le_bytes());
        out.extend_from_slice(&c.im.to_le_bytes());
    }
    out
}

fn f64_at(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

/// Parses the header and payload. Nothing is returned unless the whole buffer is valid.
pub fn decode(bytes: &[u8]) -> Result<(Header, Vec<Complex64>), SnapshotError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(SnapshotError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(SnapshotError::TruncatedPayload {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(SnapshotError::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let header = Header {
        kind: bytes[8],
        n_points: u64::from_le_bytes(bytes[9..17].try_into().unwrap()),
        alpha: f64_at(bytes, 17),
        t: f64_at(bytes, 25),
    };
    let body = &bytes[HEADER_LEN..];
    if body.len() % 16 != 0 {
        return Err(SnapshotError::TruncatedPayload {
            expected: (body.len() / 16 + 1) * 16,
            found: body.len(),
        });
    }
    let payload = body
        .chunks_exact(16)
        .map(|c| Complex64::new(f64_at(c, 0), f64_at(c, 8)))
        .collect();
    Ok((header, payload))
}

fn expect_len(payload: &[Complex64], n: usize) -> Result<(), SnapshotError> {
    if payload.len() < n {
        return Err(SnapshotError::TruncatedPayload {
            expected: n * 16,
            found: payload.len() * 16,
        });
    }
    Ok(())
}

fn expect_kind(h: &Header, kind: Kind) -> Result<(), SnapshotError> {
    if h.kind != kind as u8 {
        return Err(SnapshotError::WrongKind {
            found: h.kind,
            expected: kind as u8,
        });
    }
    Ok(())
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

pub fn save_field(path: &Path, u: &Field, alpha: f64, t: f64) -> Result<(), SnapshotError> {
    let bytes = encode(Kind::Field, u.grid().n_points(), alpha, t, u.coeffs());
    Ok(write_atomic(path, &bytes)?)
}

pub fn field_from_bytes(bytes: &[u8]) -> Result<(Header, Field), SnapshotError> {
    let (h, payload) = decode(bytes)?;
    expect_kind(&h, Kind::Field)?;
    let g = Grid::new(h.n_points as usize)?;
    expect_len(&payload, g.n_points())?;
    let mut coeffs = payload;
    coeffs.truncate(g.n_points());
    let probe = Field::from_raw(g, coeffs, false);
    let is_real = probe.hermitian_defect() == 0.0;
    Ok((h, Field::from_raw(g, probe.into_coeffs(), is_real)))
}

pub fn load_field(path: &Path) -> Result<(Header, Field), SnapshotError> {
    field_from_bytes(&fs::read(path)?)
}

pub fn save_symbol(path: &Path, a: &Symbol, alpha: f64, t: f64) -> Result<(), SnapshotError> {
    let mut payload = a.coeffs().to_vec();
    payload.push(Complex64::new(a.order_m, a.declared_rho));
    let bytes = encode(Kind::Symbol, a.n_points(), alpha, t, &payload);
    Ok(write_atomic(path, &bytes)?)
}

pub fn symbol_from_bytes(bytes: &[u8]) -> Result<(Header, Symbol), SnapshotError> {
    let (h, mut payload) = decode(bytes)?;
    expect_kind(&h, Kind::Symbol)?;
    let g = Grid::new(h.n_points as usize)?;
    let n2 = g.n_points() * g.n_points();
    expect_len(&payload, n2 + 1)?;
    let meta = payload[n2];
    payload.truncate(n2);
    Ok((h, Symbol::from_raw(g, payload, meta.re, meta.im)))
}

pub fn load_symbol(path: &Path) -> Result<(Header, Symbol), SnapshotError> {
    symbol_from_bytes(&fs::read(path)?)
}

fn sample_path(index: &Path, i: usize) -> PathBuf {
    let stem = index.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    index.with_file_name(format!("{stem}.{i}.pbrg"))
}

/// Writes the index at `index` and one field snapshot per sample; returns every path written.
pub fn save_trajectory(index: &Path, traj: &Trajectory, alpha: f64) -> Result<Vec<PathBuf>, SnapshotError> {
    let Some(first) = traj.states.first() else {
        return Err(SnapshotError::TruncatedPayload { expected: 1, found: 0 });
    };
    let mut written = Vec::with_capacity(traj.states.len() + 1);
    for (i, (u, &t)) in traj.states.iter().zip(&traj.times).enumerate() {
        let p = sample_path(index, i);
        save_field(&p, u, alpha, t)?;
        written.push(p);
    }
    let entries: Vec<Complex64> = traj
        .times
        .iter()
        .enumerate()
        .map(|(i, &t)| Complex64::new(t, i as f64))
        .collect();
    let t_last = traj.times.last().copied().unwrap_or(0.0);
    let bytes = encode(Kind::TrajectoryIndex, first.grid().n_points(), alpha, t_last, &entries);
    write_atomic(index, &bytes)?;
    written.push(index.to_path_buf());
    Ok(written)
}

/// Reads an index and its samples back as `(times, states)`.
pub fn load_trajectory(index: &Path) -> Result<(Header, Vec<f64>, Vec<Field>), SnapshotError> {
    let (h, entries) = decode(&fs::read(index)?)?;
    expect_kind(&h, Kind::TrajectoryIndex)?;
    let mut times = Vec::with_capacity(entries.len());
    let mut states = Vec::with_capacity(entries.len());
    for e in entries {
        let (_, u) = load_field(&sample_path(index, e.im as usize))?;
        times.push(e.re);
        states.push(u);
    }
    Ok((h, times, states))
}
