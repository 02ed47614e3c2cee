//! STL (binary and ASCII) and OBJ readers and writers.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::IoError;
use crate::geometry::{GeometryError, Point3, TriangleMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    StlBinary,
    StlAscii,
    Obj,
}

/// Load-time options. Files are assumed to be in millimetres; `scale`
/// converts other units (e.g. 1000 for metres).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshLoadOptions {
    pub scale: f64,
}

impl Default for MeshLoadOptions {
    fn default() -> Self {
        Self { scale: 1.0 }
    }
}

pub fn load_mesh(path: &Path) -> Result<TriangleMesh, IoError> {
    load_mesh_with(path, MeshLoadOptions::default())
}

pub fn load_mesh_with(path: &Path, opts: MeshLoadOptions) -> Result<TriangleMesh, IoError> {
    let bytes = std::fs::read(path).map_err(|e| IoError::io(path, e))?;
    let is_obj = path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("obj"));
    let (vertices, triangles) = if is_obj { parse_obj(&bytes) } else { parse_stl(&bytes) }
        .map_err(|(offset, message)| IoError::Parse { path: path.display().to_string(), offset, message })?;
    build(vertices, triangles, opts.scale).map_err(|e| match e {
        GeometryError::EmptyMesh => IoError::EmptyMesh(path.display().to_string()),
        other => IoError::Invalid(format!("{}: {other}", path.display())),
    })
}

/// Parses mesh bytes in the given container. Errors carry the byte offset.
pub fn parse_mesh(bytes: &[u8], obj: bool, opts: MeshLoadOptions) -> Result<TriangleMesh, IoError> {
    let (v, t) = if obj { parse_obj(bytes) } else { parse_stl(bytes) }.map_err(|(offset, message)| IoError::Parse {
        path: "<memory>".into(),
        offset,
        message,
    })?;
    build(v, t, opts.scale).map_err(|e| match e {
        GeometryError::EmptyMesh => IoError::EmptyMesh("<memory>".into()),
        other => IoError::Invalid(other.to_string()),
    })
}

fn build(vertices: Vec<Point3>, triangles: Vec<[u32; 3]>, scale: f64) -> Result<TriangleMesh, GeometryError> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(GeometryError::InvalidScale(scale));
    }
    let vertices = if scale == 1.0 { vertices } else { vertices.into_iter().map(|p| p * scale).collect() };
    TriangleMesh::new(vertices, triangles)
}

pub fn detect_stl(bytes: &[u8]) -> MeshFormat {
    if bytes.len() >= 84 {
        let n = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
        if 84 + 50 * n == bytes.len() {
            return MeshFormat::StlBinary;
        }
    }
    if bytes.trim_ascii_start().starts_with(b"solid") {
        MeshFormat::StlAscii
    } else {
        MeshFormat::StlBinary
    }
}

type Parsed = (Vec<Point3>, Vec<[u32; 3]>);
type ParseFail = (usize, String);

/// Merges bit-identical positions so STL soups become indexed meshes.
#[derive(Default)]
struct Welder {
    index: HashMap<[u64; 3], u32>,
    vertices: Vec<Point3>,
}

impl Welder {
    fn add(&mut self, p: Point3) -> u32 {
        let key = [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()];
        *self.index.entry(key).or_insert_with(|| {
            self.vertices.push(p);
            (self.vertices.len() - 1) as u32
        })
    }
}

fn parse_stl(bytes: &[u8]) -> Result<Parsed, ParseFail> {
    match detect_stl(bytes) {
        MeshFormat::StlAscii => parse_stl_ascii(bytes),
        _ => parse_stl_binary(bytes),
    }
}

fn parse_stl_binary(bytes: &[u8]) -> Result<Parsed, ParseFail> {
    if bytes.len() < 84 {
        return Err((bytes.len(), "binary STL header truncated".into()));
    }
    let n = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    let need = 84usize.saturating_add(n.saturating_mul(50));
    if bytes.len() < need {
        let offset = 84 + (bytes.len() - 84) / 50 * 50;
        return Err((offset, format!("binary STL declares {n} triangles but data ends at byte {}", bytes.len())));
    }
    let mut w = Welder::default();
    let mut tris = Vec::with_capacity(n);
    for i in 0..n {
        let rec = &bytes[84 + 50 * i..84 + 50 * (i + 1)];
        let f = |k: usize| f32::from_le_bytes(rec[k..k + 4].try_into().unwrap()) as f64;
        let mut t = [0u32; 3];
        for (j, slot) in t.iter_mut().enumerate() {
            let o = 12 + 12 * j;
            let p = Point3::new(f(o), f(o + 4), f(o + 8));
            if !p.coords.iter().all(|v| v.is_finite()) {
                return Err((84 + 50 * i + o, "non-finite vertex".into()));
            }
            *slot = w.add(p);
        }
        tris.push(t);
    }
    Ok((w.vertices, tris))
}

/// Whitespace tokens with their byte offsets.
fn tokens(bytes: &[u8]) -> impl Iterator<Item = (usize, &str)> {
    let mut pos = 0;
    std::iter::from_fn(move || {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos >= bytes.len() {
            return None;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        Some((start, std::str::from_utf8(&bytes[start..pos]).unwrap_or("\u{fffd}")))
    })
}

struct Cursor<'a> {
    toks: Vec<(usize, &'a str)>,
    pos: usize,
    eof: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<(usize, &'a str)> {
        self.toks.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<(usize, &'a str)> {
        let t = self.peek();
        self.pos += 1;
        t
    }

    fn expect(&mut self, word: &str) -> Result<usize, ParseFail> {
        match self.bump() {
            Some((o, t)) if t == word => Ok(o),
            Some((o, t)) => Err((o, format!("expected '{word}', found '{t}'"))),
            None => Err((self.eof, format!("unexpected end of file, expected '{word}'"))),
        }
    }

    fn number(&mut self) -> Result<f64, ParseFail> {
        match self.bump() {
            Some((o, t)) => t.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or((o, format!("invalid number '{t}'"))),
            None => Err((self.eof, "unexpected end of file in number".into())),
        }
    }
}

fn parse_stl_ascii(bytes: &[u8]) -> Result<Parsed, ParseFail> {
    let mut c = Cursor { toks: tokens(bytes).collect(), pos: 0, eof: bytes.len() };
    c.expect("solid")?;
    // Optional solid name runs until the first "facet" or "endsolid".
    while let Some((_, t)) = c.peek() {
        if t == "facet" || t == "endsolid" {
            break;
        }
        c.bump();
    }
    let mut w = Welder::default();
    let mut tris = Vec::new();
    loop {
        match c.peek() {
            Some((_, "endsolid")) => break,
            Some((_, "facet")) => {}
            Some((o, t)) => return Err((o, format!("expected 'facet' or 'endsolid', found '{t}'"))),
            None => return Err((c.eof, "unexpected end of file, expected 'endsolid'".into())),
        }
        c.expect("facet")?;
        c.expect("normal")?;
        for _ in 0..3 {
            c.number()?;
        }
        c.expect("outer")?;
        c.expect("loop")?;
        let mut t = [0u32; 3];
        for slot in &mut t {
            c.expect("vertex")?;
            let p = Point3::new(c.number()?, c.number()?, c.number()?);
            *slot = w.add(p);
        }
        c.expect("endloop")?;
        c.expect("endfacet")?;
        tris.push(t);
    }
    Ok((w.vertices, tris))
}

fn parse_obj(bytes: &[u8]) -> Result<Parsed, ParseFail> {
    let text = std::str::from_utf8(bytes).map_err(|e| (e.valid_up_to(), "OBJ is not valid UTF-8".to_string()))?;
    let mut vertices = Vec::new();
    let mut tris = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let line_start = offset;
        offset += line.len();
        let body = line.split('#').next().unwrap_or("");
        let mut fields = body.split_whitespace();
        let Some(tag) = fields.next() else { continue };
        let at = |field: &str| line_start + line.find(field).unwrap_or(0);
        match tag {
            "v" => {
                let mut c = [0.0; 3];
                for slot in &mut c {
                    let f = fields.next().ok_or((line_start, "vertex needs three coordinates".to_string()))?;
                    *slot = f
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or((at(f), format!("invalid number '{f}'")))?;
                }
                vertices.push(Point3::new(c[0], c[1], c[2]));
            }
            "f" => {
                let mut idx = Vec::with_capacity(4);
                for f in fields {
                    let first = f.split('/').next().unwrap_or("");
                    let raw: i64 = first.parse().map_err(|_| (at(f), format!("invalid face index '{f}'")))?;
                    let n = vertices.len() as i64;
                    let i = if raw > 0 { raw - 1 } else { n + raw };
                    if raw == 0 || i < 0 || i >= n {
                        return Err((at(f), format!("face index {raw} out of range")));
                    }
                    idx.push(i as u32);
                }
                if idx.len() < 3 {
                    return Err((line_start, "face needs at least three vertices".into()));
                }
                for k in 1..idx.len() - 1 {
                    tris.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok((vertices, tris))
}

pub fn write_obj(mesh: &TriangleMesh) -> String {
    let mut s = String::with_capacity(mesh.vertices().len() * 48 + mesh.triangle_count() * 24);
    for v in mesh.vertices() {
        let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
    }
    for t in mesh.triangles() {
        let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    s
}

pub fn write_stl_binary(mesh: &TriangleMesh) -> Vec<u8> {
    let mut out = Vec::with_capacity(84 + 50 * mesh.triangle_count());
    let mut header = [0u8; 80];
    let tag = b"ventronav binary STL, millimetres";
    header[..tag.len()].copy_from_slice(tag);
    out.extend_from_slice(&header);
    out.extend_from_slice(&(mesh.triangle_count() as u32).to_le_bytes());
    for i in 0..mesh.triangle_count() {
        let n = mesh.face_normal(i);
        for v in [n.x, n.y, n.z] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        for p in mesh.triangle(i) {
            for v in [p.x, p.y, p.z] {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    out
}

pub fn write_stl_ascii(mesh: &TriangleMesh, name: &str) -> String {
    let mut s = format!("solid {name}\n");
    for i in 0..mesh.triangle_count() {
        let n = mesh.face_normal(i);
        let _ = writeln!(s, "  facet normal {} {} {}", n.x, n.y, n.z);
        s.push_str("    outer loop\n");
        for p in mesh.triangle(i) {
            let _ = writeln!(s, "      vertex {} {} {}", p.x, p.y, p.z);
        }
        s.push_str("    endloop\n  endfacet\n");
    }
    let _ = writeln!(s, "endsolid {name}");
    s
}

pub fn save_mesh(mesh: &TriangleMesh, path: &Path, format: MeshFormat) -> Result<(), IoError> {
    let bytes = match format {
        MeshFormat::StlBinary => write_stl_binary(mesh),
        MeshFormat::StlAscii => write_stl_ascii(mesh, "mesh").into_bytes(),
        MeshFormat::Obj => write_obj(mesh).into_bytes(),
    };
    std::fs::write(path, bytes).map_err(|e| IoError::io(path, e))
}
