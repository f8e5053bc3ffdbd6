//! Text mesh format, one record per line:
//!
//! ```text
//! v <x> <y>            vertex (numbered from 0 in order of appearance)
//! t <i> <j> <k>        counterclockwise triangle
//! b <i> <j> <label>    boundary edge on a labelled segment
//! ```
//!
//! Blank lines and `#` comments are ignored.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use biot_core::mesh::{Mesh, MeshError, Point};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshIoError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

fn fields<T: std::str::FromStr>(parts: &[&str], line: usize, what: &str) -> Result<Vec<T>, MeshIoError> {
    parts
        .iter()
        .map(|s| {
            s.parse::<T>().map_err(|_| MeshIoError::Parse {
                line,
                message: format!("invalid {what} `{s}`"),
            })
        })
        .collect()
}

pub fn parse_mesh(text: &str) -> Result<Mesh, MeshIoError> {
    let mut vertices: Vec<Point> = Vec::new();
    let mut triangles = Vec::new();
    let mut boundary = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.split('#').next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        let parts: Vec<&str> = s.split_whitespace().collect();
        let arity = |n: usize| -> Result<(), MeshIoError> {
            if parts.len() == n + 1 {
                Ok(())
            } else {
                Err(MeshIoError::Parse {
                    line,
                    message: format!("`{}` record takes {n} fields, found {}", parts[0], parts.len() - 1),
                })
            }
        };
        match parts[0] {
            "v" => {
                arity(2)?;
                let c: Vec<f64> = fields(&parts[1..], line, "coordinate")?;
                if !c.iter().all(|x| x.is_finite()) {
                    return Err(MeshIoError::Parse {
                        line,
                        message: "non-finite coordinate".into(),
                    });
                }
                vertices.push([c[0], c[1]]);
            }
            "t" => {
                arity(3)?;
                let v: Vec<usize> = fields(&parts[1..], line, "vertex index")?;
                triangles.push([v[0], v[1], v[2]]);
            }
            "b" => {
                arity(3)?;
                let v: Vec<usize> = fields(&parts[1..3], line, "vertex index")?;
                if v.iter().any(|&x| x >= vertices.len()) {
                    return Err(MeshIoError::Parse {
                        line,
                        message: "boundary edge references an undefined vertex".into(),
                    });
                }
                boundary.push(([v[0], v[1]], parts[3].to_string()));
            }
            other => {
                return Err(MeshIoError::Parse {
                    line,
                    message: format!("unknown record type `{other}`"),
                })
            }
        }
    }
    Ok(Mesh::new(vertices, triangles, boundary)?)
}

pub fn read_mesh(path: &Path) -> Result<Mesh, MeshIoError> {
    let text = std::fs::read_to_string(path).map_err(|source| MeshIoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_mesh(&text)
}

/// Serializes a mesh in the format read by [`parse_mesh`]. Coordinates are
/// written with enough digits to round-trip exactly.
pub fn format_mesh(mesh: &Mesh) -> String {
    let mut out = String::new();
    for v in mesh.vertices() {
        writeln!(out, "v {:e} {:e}", v[0], v[1]).unwrap();
    }
    for t in mesh.triangles() {
        writeln!(out, "t {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    for b in mesh.boundary() {
        writeln!(out, "b {} {} {}", b.vertices[0], b.vertices[1], mesh.label_name(b.label)).unwrap();
    }
    out
}
