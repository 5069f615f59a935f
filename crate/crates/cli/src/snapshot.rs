//! Velocity snapshot files. Fixed little-endian layout so a snapshot written
//! on one machine reads back byte-identical on another:
//!
//!   magic "SPKD" | version u32 | n u32 | box_length f64 | time f64
//!   | viscosity f64 | components u32 | payload
//!
//! The payload is component-major binary64, x fastest within a component.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use spicard::{Grid, GridError, VectorField};
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"SPKD";
pub const FORMAT_VERSION: u32 = 1;
pub const COMPONENTS: u32 = 3;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("snapshot io on {path}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path} is not a snapshot file (bad magic)")]
    BadMagic { path: PathBuf },
    #[error("{path} has unsupported format version {found}")]
    BadVersion { path: PathBuf, found: u32 },
    #[error("{path} has a malformed header: {detail}")]
    BadHeader { path: PathBuf, detail: String },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotMeta {
    pub n: u32,
    pub box_length: f64,
    pub time: f64,
    pub viscosity: f64,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SnapshotError + '_ {
    move |source| SnapshotError::Io {
        path: path.to_owned(),
        source,
    }
}

fn read_u32(r: &mut impl Read, path: &Path) -> Result<u32, SnapshotError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(io_err(path))?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64(r: &mut impl Read, path: &Path) -> Result<f64, SnapshotError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf).map_err(io_err(path))?;
    Ok(f64::from_le_bytes(buf))
}

pub fn write_snapshot(
    path: &Path,
    velocity: &VectorField,
    time: f64,
    viscosity: f64,
) -> Result<(), SnapshotError> {
    let grid = velocity.grid();
    let n = grid.n();
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);

    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(io_err(path));
    put(&MAGIC)?;
    put(&FORMAT_VERSION.to_le_bytes())?;
    put(&(n as u32).to_le_bytes())?;
    put(&grid.box_length().to_le_bytes())?;
    put(&time.to_le_bytes())?;
    put(&viscosity.to_le_bytes())?;
    put(&COMPONENTS.to_le_bytes())?;

    // Explicit index order: the in-memory arrays are indexed [x, y, z] with z
    // contiguous, but the file wants x fastest.
    for k in 0..3 {
        let c = velocity.component(k);
        for iz in 0..n {
            for iy in 0..n {
                for ix in 0..n {
                    w.write_all(&c[[ix, iy, iz]].to_le_bytes())
                        .map_err(io_err(path))?;
                }
            }
        }
    }
    w.flush().map_err(io_err(path))
}

pub fn read_snapshot(path: &Path) -> Result<(SnapshotMeta, VectorField), SnapshotError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io_err(path))?;
    if magic != MAGIC {
        return Err(SnapshotError::BadMagic {
            path: path.to_owned(),
        });
    }

    let version = read_u32(&mut r, path)?;
    if version != FORMAT_VERSION {
        return Err(SnapshotError::BadVersion {
            path: path.to_owned(),
            found: version,
        });
    }
    let n = read_u32(&mut r, path)?;
    let box_length = read_f64(&mut r, path)?;
    let time = read_f64(&mut r, path)?;
    let viscosity = read_f64(&mut r, path)?;

    let components = read_u32(&mut r, path)?;
    if components != COMPONENTS {
        return Err(SnapshotError::BadHeader {
            path: path.to_owned(),
            detail: format!("expected {COMPONENTS} components, found {components}"),
        });
    }

    let grid = Grid::new(n as usize, box_length)?;
    let n = n as usize;
    let mut field = VectorField::zeros(grid);
    let mut val = [0u8; 8];
    for k in 0..3 {
        let c = field.component_mut(k);
        for iz in 0..n {
            for iy in 0..n {
                for ix in 0..n {
                    r.read_exact(&mut val).map_err(io_err(path))?;
                    c[[ix, iy, iz]] = f64::from_le_bytes(val);
                }
            }
        }
    }

    // A well-formed file ends exactly at the payload boundary.
    let mut probe = [0u8; 1];
    match r.read(&mut probe).map_err(io_err(path))? {
        0 => {}
        _ => {
            return Err(SnapshotError::BadHeader {
                path: path.to_owned(),
                detail: "trailing bytes after payload".into(),
            });
        }
    }

    let meta = SnapshotMeta {
        n: n as u32,
        box_length,
        time,
        viscosity,
    };
    Ok((meta, field))
}
