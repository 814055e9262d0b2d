//! OBJ (v/f records) and binary STL input, OBJ output.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::mesh::{TriMesh, Vec3};
use crate::error::{Error, Result};

/// Vertices closer than this (per axis) are merged when reading STL.
pub const WELD_TOLERANCE: f64 = 1e-7;

const STL_HEADER: usize = 80;
const STL_RECORD: usize = 50;

/// Loads an OBJ or binary STL file. The format is chosen from the extension,
/// falling back to content sniffing.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let name = path.display().to_string();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    let mesh = match ext.as_deref() {
        Some("obj") => parse_obj(&bytes, &name)?,
        Some("stl") => parse_stl(&bytes, &name)?,
        _ if looks_like_binary_stl(&bytes) => parse_stl(&bytes, &name)?,
        _ => parse_obj(&bytes, &name)?,
    };
    if mesh.is_empty() {
        return Err(Error::EmptyMesh(name));
    }
    Ok(mesh)
}

fn looks_like_binary_stl(bytes: &[u8]) -> bool {
    if bytes.len() < STL_HEADER + 4 {
        return false;
    }
    let count = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    bytes.len() == STL_HEADER + 4 + count * STL_RECORD
}

pub fn parse_obj(bytes: &[u8], name: &str) -> Result<TriMesh> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::ObjParse {
        path: name.to_string(),
        line: 0,
        message: format!("not UTF-8: {e}"),
    })?;
    let err = |line: usize, message: String| Error::ObjParse {
        path: name.to_string(),
        line,
        message,
    };

    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut dropped = 0usize;
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut c = [0.0; 3];
                for slot in &mut c {
                    let tok = tokens
                        .next()
                        .ok_or_else(|| err(lineno, "vertex needs three coordinates".into()))?;
                    *slot = tok
                        .parse::<f64>()
                        .map_err(|e| err(lineno, format!("bad coordinate {tok:?}: {e}")))?;
                    if !slot.is_finite() {
                        return Err(err(lineno, format!("non-finite coordinate {tok:?}")));
                    }
                }
                vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let mut idx = Vec::with_capacity(4);
                for tok in tokens {
                    let head = tok.split('/').next().unwrap_or("");
                    let k: i64 = head
                        .parse()
                        .map_err(|e| err(lineno, format!("bad face index {tok:?}: {e}")))?;
                    let resolved = match k {
                        0 => return Err(err(lineno, "face index 0 (OBJ indices are 1-based)".into())),
                        k if k > 0 => k - 1,
                        k => vertices.len() as i64 + k,
                    };
                    if resolved < 0 || resolved as usize >= vertices.len() {
                        return Err(err(
                            lineno,
                            format!("face index {k} out of range ({} vertices so far)", vertices.len()),
                        ));
                    }
                    idx.push(resolved as u32);
                }
                if idx.len() < 3 {
                    return Err(err(lineno, "face needs at least three vertices".into()));
                }
                for j in 1..idx.len() - 1 {
                    let f = [idx[0], idx[j], idx[j + 1]];
                    if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                        dropped += 1;
                    } else {
                        faces.push(f);
                    }
                }
            }
            _ => {}
        }
    }
    if dropped > 0 {
        log::warn!("{name}: dropped {dropped} degenerate faces");
    }
    TriMesh::new(vertices, faces)
}

pub fn parse_stl(bytes: &[u8], name: &str) -> Result<TriMesh> {
    let err = |offset: usize, message: String| Error::StlParse {
        path: name.to_string(),
        offset: offset as u64,
        message,
    };
    if bytes.len() < STL_HEADER + 4 {
        return Err(err(bytes.len(), "truncated header".into()));
    }
    let count = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    let expected = STL_HEADER + 4 + count * STL_RECORD;
    if bytes.len() < expected {
        return Err(err(
            bytes.len(),
            format!("{count} triangles declared, file ends early (need {expected} bytes)"),
        ));
    }

    let mut soup = Vec::with_capacity(count * 3);
    for t in 0..count {
        let base = STL_HEADER + 4 + t * STL_RECORD + 12;
        for v in 0..3 {
            let mut c = [0.0f64; 3];
            for (a, slot) in c.iter_mut().enumerate() {
                let off = base + v * 12 + a * 4;
                let x = f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
                if !x.is_finite() {
                    return Err(err(off, "non-finite coordinate".into()));
                }
                *slot = x as f64;
            }
            soup.push(Vec3::new(c[0], c[1], c[2]));
        }
    }

    let (vertices, remap) = weld(&soup, WELD_TOLERANCE);
    let mut faces = Vec::with_capacity(count);
    let mut dropped = 0usize;
    for t in 0..count {
        let f = [remap[3 * t], remap[3 * t + 1], remap[3 * t + 2]];
        if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
            dropped += 1;
        } else {
            faces.push(f);
        }
    }
    if dropped > 0 {
        log::warn!("{name}: dropped {dropped} faces collapsed by welding");
    }
    TriMesh::new(vertices, faces)
}

/// Merges points closer than `tol` on every axis. Returns the unique points
/// and, for each input point, its index in the output.
pub fn weld(points: &[Vec3], tol: f64) -> (Vec<Vec3>, Vec<u32>) {
    let cell = |p: &Vec3| -> [i64; 3] {
        [
            (p.x / tol).floor() as i64,
            (p.y / tol).floor() as i64,
            (p.z / tol).floor() as i64,
        ]
    };
    let mut grid: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
    let mut unique: Vec<Vec3> = Vec::new();
    let mut remap = Vec::with_capacity(points.len());
    for p in points {
        let c = cell(p);
        let mut found = None;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(list) = grid.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        for &i in list {
                            let q = unique[i as usize];
                            if (q - p).amax() <= tol {
                                found = Some(i);
                                break 'search;
                            }
                        }
                    }
                }
            }
        }
        let idx = found.unwrap_or_else(|| {
            unique.push(*p);
            let i = (unique.len() - 1) as u32;
            grid.entry(c).or_default().push(i);
            i
        });
        remap.push(idx);
    }
    (unique, remap)
}

pub fn obj_string(mesh: &TriMesh) -> String {
    let mut out = String::with_capacity(mesh.vertices.len() * 40 + mesh.faces.len() * 24);
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for f in &mesh.faces {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}

pub fn write_obj(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, obj_string(mesh))?;
    Ok(())
}

/// Binary STL encoding (triangle soup). Used for fixtures and export.
pub fn stl_bytes(mesh: &TriMesh) -> Vec<u8> {
    let mut out = vec![0u8; STL_HEADER];
    out.extend_from_slice(&(mesh.faces.len() as u32).to_le_bytes());
    for f in 0..mesh.faces.len() {
        let n = mesh.face_normal(f);
        for c in n.iter() {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
        for v in mesh.triangle(f) {
            for c in v.iter() {
                out.extend_from_slice(&(*c as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives::icosphere;

    #[test]
    fn minimal_obj() {
        let m = parse_obj(b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n", "t").unwrap();
        assert_eq!(m.vertices.len(), 3);
        assert_eq!(m.faces, vec![[0, 1, 2]]);
    }

    #[test]
    fn zero_index_is_a_parse_error_with_line() {
        let e = parse_obj(b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n", "t").unwrap_err();
        match e {
            Error::ObjParse { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn slashes_negative_indices_and_quads() {
        let src = b"v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1 4//1\nf -4 -3 -2\n";
        let m = parse_obj(src, "t").unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3], [0, 1, 2]]);
    }

    #[test]
    fn malformed_coordinate_reports_line() {
        let e = parse_obj(b"v 0 0 0\nv 1 x 0\n", "t").unwrap_err();
        assert!(matches!(e, Error::ObjParse { line: 2, .. }));
    }

    #[test]
    fn empty_file_is_a_distinct_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.obj");
        fs::write(&p, "# nothing\n").unwrap();
        assert!(matches!(load_mesh(&p), Err(Error::EmptyMesh(_))));
    }

    #[test]
    fn obj_round_trip_preserves_icosphere() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.obj");
        let m = icosphere(4, 0.4);
        write_obj(&m, &p).unwrap();
        let back = load_mesh(&p).unwrap();
        assert_eq!(back.vertices.len(), 2562);
        assert_eq!(back.faces.len(), 5120);
        assert_eq!(back, m);
    }

    #[test]
    fn stl_is_welded_back_to_indexed_form() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.stl");
        let m = icosphere(3, 0.4);
        fs::write(&p, stl_bytes(&m)).unwrap();
        let back = load_mesh(&p).unwrap();
        assert_eq!(back.vertices.len(), m.vertices.len());
        assert_eq!(back.faces.len(), m.faces.len());
    }

    #[test]
    fn truncated_stl_reports_offset() {
        let m = icosphere(1, 0.4);
        let mut bytes = stl_bytes(&m);
        bytes.truncate(bytes.len() - 7);
        assert!(matches!(parse_stl(&bytes, "t"), Err(Error::StlParse { .. })));
    }
}
