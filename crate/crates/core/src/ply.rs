//! PLY point clouds and meshes.
//!
//! Clouds are written binary little-endian with `x,y,z,nx,ny,nz`, optional
//! `red,green,blue` display colors, and an optional per-point reflectance
//! payload as one float property per wavelength sample (`refl_<nm>`). Meshes
//! read from either ASCII or binary little-endian files.

use crate::error::{Error, Result};
use crate::geom::{OrientedPoint, TriangleMesh};
use crate::spectral::WavelengthGrid;
use nalgebra::{Point3, Unit, Vector3};
use std::io::{BufWriter, Read, Write};
use std::path::Path;

/// A point cloud with normals and optional spectral/display attributes.
#[derive(Debug, Clone, Default)]
pub struct PointCloud {
    pub positions: Vec<Point3<f64>>,
    pub normals: Vec<Vector3<f64>>,
    /// Per-point reflectance samples; all rows share `grid`.
    pub reflectance: Option<(WavelengthGrid, Vec<Vec<f32>>)>,
    pub colors: Option<Vec<[u8; 3]>>,
}

impl PointCloud {
    pub fn from_oriented(points: &[OrientedPoint]) -> Self {
        Self {
            positions: points.iter().map(|p| p.position).collect(),
            normals: points.iter().map(|p| *p.normal.as_ref()).collect(),
            reflectance: None,
            colors: None,
        }
    }

    pub fn oriented_points(&self) -> Vec<OrientedPoint> {
        self.positions
            .iter()
            .zip(&self.normals)
            .map(|(p, n)| OrientedPoint { position: *p, normal: Unit::new_normalize(*n) })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

pub fn write_point_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    let n = cloud.len();
    if cloud.normals.len() != n {
        return Err(Error::argument("cloud has mismatched normal count".to_string()));
    }
    let mut f = BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "ply")?;
    writeln!(f, "format binary_little_endian 1.0")?;
    writeln!(f, "element vertex {n}")?;
    for prop in ["x", "y", "z", "nx", "ny", "nz"] {
        writeln!(f, "property float {prop}")?;
    }
    if cloud.colors.is_some() {
        for prop in ["red", "green", "blue"] {
            writeln!(f, "property uchar {prop}")?;
        }
    }
    if let Some((grid, rows)) = &cloud.reflectance {
        if rows.len() != n {
            return Err(Error::argument("cloud has mismatched reflectance count".to_string()));
        }
        for w in grid.wavelengths() {
            writeln!(f, "property float refl_{}", w.round() as i64)?;
        }
    }
    writeln!(f, "end_header")?;

    for i in 0..n {
        let p = cloud.positions[i];
        let m = cloud.normals[i];
        for v in [p.x, p.y, p.z, m.x, m.y, m.z] {
            f.write_all(&(v as f32).to_le_bytes())?;
        }
        if let Some(colors) = &cloud.colors {
            f.write_all(&colors[i])?;
        }
        if let Some((_, rows)) = &cloud.reflectance {
            for v in &rows[i] {
                f.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_point_cloud(path: &Path) -> Result<PointCloud> {
    let parsed = parse_ply(path)?;
    let vertex = parsed
        .element("vertex")
        .ok_or_else(|| parse_err(path, "no vertex element"))?;
    let col = |name: &str| -> Result<Vec<f64>> {
        vertex.scalar_column(name).ok_or_else(|| parse_err(path, &format!("missing property {name}")))
    };
    let (x, y, z) = (col("x")?, col("y")?, col("z")?);
    let positions: Vec<Point3<f64>> =
        x.iter().zip(&y).zip(&z).map(|((&x, &y), &z)| Point3::new(x, y, z)).collect();
    let normals = match (vertex.scalar_column("nx"), vertex.scalar_column("ny"), vertex.scalar_column("nz")) {
        (Some(nx), Some(ny), Some(nz)) => nx
            .iter()
            .zip(&ny)
            .zip(&nz)
            .map(|((&a, &b), &c)| Vector3::new(a, b, c))
            .collect(),
        _ => vec![Vector3::z(); positions.len()],
    };
    let colors = match (
        vertex.scalar_column("red"),
        vertex.scalar_column("green"),
        vertex.scalar_column("blue"),
    ) {
        (Some(r), Some(g), Some(b)) => Some(
            r.iter()
                .zip(&g)
                .zip(&b)
                .map(|((&r, &g), &b)| [r as u8, g as u8, b as u8])
                .collect(),
        ),
        _ => None,
    };

    // reflectance columns, in declaration order
    let refl_names: Vec<&String> = vertex
        .properties
        .iter()
        .filter(|p| p.name.starts_with("refl_"))
        .map(|p| &p.name)
        .collect();
    let reflectance = if refl_names.len() >= 3 {
        let wavelengths: Vec<f64> = refl_names
            .iter()
            .map(|n| n.trim_start_matches("refl_").parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_err(path, "malformed reflectance property name"))?;
        let step = wavelengths[1] - wavelengths[0];
        let grid = WavelengthGrid::new(wavelengths[0], step, wavelengths.len())?;
        let columns: Vec<Vec<f64>> = refl_names
            .iter()
            .map(|n| vertex.scalar_column(n).unwrap())
            .collect();
        let rows = (0..positions.len())
            .map(|i| columns.iter().map(|c| c[i] as f32).collect())
            .collect();
        Some((grid, rows))
    } else {
        None
    };

    Ok(PointCloud { positions, normals, reflectance, colors })
}

pub fn write_mesh(path: &Path, mesh: &TriangleMesh, ascii: bool) -> Result<()> {
    let mut f = BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "ply")?;
    writeln!(f, "format {} 1.0", if ascii { "ascii" } else { "binary_little_endian" })?;
    writeln!(f, "element vertex {}", mesh.vertices.len())?;
    for prop in ["x", "y", "z"] {
        writeln!(f, "property float {prop}")?;
    }
    let has_normals = mesh.vertex_normals.is_some();
    if has_normals {
        for prop in ["nx", "ny", "nz"] {
            writeln!(f, "property float {prop}")?;
        }
    }
    writeln!(f, "element face {}", mesh.triangles.len())?;
    writeln!(f, "property list uchar int vertex_indices")?;
    writeln!(f, "end_header")?;

    for (i, v) in mesh.vertices.iter().enumerate() {
        let mut vals = vec![v.x, v.y, v.z];
        if let Some(normals) = &mesh.vertex_normals {
            vals.extend([normals[i].x, normals[i].y, normals[i].z]);
        }
        if ascii {
            let strs: Vec<String> = vals.iter().map(|v| format!("{v}")).collect();
            writeln!(f, "{}", strs.join(" "))?;
        } else {
            for v in vals {
                f.write_all(&(v as f32).to_le_bytes())?;
            }
        }
    }
    for t in &mesh.triangles {
        if ascii {
            writeln!(f, "3 {} {} {}", t[0], t[1], t[2])?;
        } else {
            f.write_all(&[3u8])?;
            for &i in t {
                f.write_all(&(i as i32).to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_mesh(path: &Path) -> Result<TriangleMesh> {
    let parsed = parse_ply(path)?;
    let vertex = parsed
        .element("vertex")
        .ok_or_else(|| parse_err(path, "no vertex element"))?;
    let x = vertex.scalar_column("x").ok_or_else(|| parse_err(path, "missing x"))?;
    let y = vertex.scalar_column("y").ok_or_else(|| parse_err(path, "missing y"))?;
    let z = vertex.scalar_column("z").ok_or_else(|| parse_err(path, "missing z"))?;
    let vertices: Vec<Point3<f64>> =
        x.iter().zip(&y).zip(&z).map(|((&x, &y), &z)| Point3::new(x, y, z)).collect();

    let face = parsed.element("face").ok_or_else(|| parse_err(path, "no face element"))?;
    let lists = face.list_column("vertex_indices").or_else(|| face.list_column("vertex_index"));
    let lists = lists.ok_or_else(|| parse_err(path, "missing vertex_indices"))?;
    let mut triangles = Vec::new();
    for l in lists {
        if l.len() != 3 {
            return Err(parse_err(path, "only triangle faces are supported"));
        }
        triangles.push([l[0] as usize, l[1] as usize, l[2] as usize]);
    }
    let mut mesh = TriangleMesh::new(vertices, triangles)?;
    if let (Some(nx), Some(ny), Some(nz)) = (
        vertex.scalar_column("nx"),
        vertex.scalar_column("ny"),
        vertex.scalar_column("nz"),
    ) {
        mesh.vertex_normals = Some(
            nx.iter()
                .zip(&ny)
                .zip(&nz)
                .map(|((&a, &b), &c)| Vector3::new(a, b, c))
                .collect(),
        );
    }
    Ok(mesh)
}

fn parse_err(path: &Path, msg: &str) -> Error {
    Error::Parse { path: path.display().to_string(), msg: msg.to_string() }
}

// --- generic reader -------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PlyType {
    F32,
    F64,
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
}

impl PlyType {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "float" | "float32" => PlyType::F32,
            "double" | "float64" => PlyType::F64,
            "char" | "int8" => PlyType::I8,
            "uchar" | "uint8" => PlyType::U8,
            "short" | "int16" => PlyType::I16,
            "ushort" | "uint16" => PlyType::U16,
            "int" | "int32" => PlyType::I32,
            "uint" | "uint32" => PlyType::U32,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            PlyType::I8 | PlyType::U8 => 1,
            PlyType::I16 | PlyType::U16 => 2,
            PlyType::F32 | PlyType::I32 | PlyType::U32 => 4,
            PlyType::F64 => 8,
        }
    }

    fn read(self, bytes: &[u8]) -> f64 {
        match self {
            PlyType::F32 => f32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            PlyType::F64 => f64::from_le_bytes(bytes[..8].try_into().unwrap()),
            PlyType::I8 => bytes[0] as i8 as f64,
            PlyType::U8 => bytes[0] as f64,
            PlyType::I16 => i16::from_le_bytes(bytes[..2].try_into().unwrap()) as f64,
            PlyType::U16 => u16::from_le_bytes(bytes[..2].try_into().unwrap()) as f64,
            PlyType::I32 => i32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            PlyType::U32 => u32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
        }
    }
}

#[derive(Debug)]
struct PlyProperty {
    name: String,
    kind: PlyType,
    list_count_kind: Option<PlyType>,
}

#[derive(Debug)]
struct PlyElement {
    name: String,
    count: usize,
    properties: Vec<PlyProperty>,
    /// scalar data per property index
    scalars: Vec<Vec<f64>>,
    /// list data per property index (empty vec for scalar properties)
    lists: Vec<Vec<Vec<f64>>>,
}

impl PlyElement {
    fn prop_index(&self, name: &str) -> Option<usize> {
        self.properties.iter().position(|p| p.name == name)
    }

    fn scalar_column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.prop_index(name)?;
        if self.properties[i].list_count_kind.is_some() {
            return None;
        }
        Some(self.scalars[i].clone())
    }

    fn list_column(&self, name: &str) -> Option<&Vec<Vec<f64>>> {
        let i = self.prop_index(name)?;
        self.properties[i].list_count_kind.as_ref()?;
        Some(&self.lists[i])
    }
}

struct PlyFile {
    elements: Vec<PlyElement>,
}

impl PlyFile {
    fn element(&self, name: &str) -> Option<&PlyElement> {
        self.elements.iter().find(|e| e.name == name)
    }
}

fn parse_ply(path: &Path) -> Result<PlyFile> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;

    // header is always ASCII lines
    let header_end = find_header_end(&bytes).ok_or_else(|| parse_err(path, "no end_header"))?;
    let header = String::from_utf8_lossy(&bytes[..header_end.0]);
    let mut lines = header.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(parse_err(path, "missing ply magic"));
    }

    let mut ascii = true;
    let mut elements: Vec<PlyElement> = Vec::new();
    for line in lines {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => match tok.next() {
                Some("ascii") => ascii = true,
                Some("binary_little_endian") => ascii = false,
                other => {
                    return Err(parse_err(path, &format!("unsupported format {other:?}")));
                }
            },
            Some("comment") | Some("obj_info") => {}
            Some("element") => {
                let name = tok.next().ok_or_else(|| parse_err(path, "element name"))?;
                let count: usize = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| parse_err(path, "element count"))?;
                elements.push(PlyElement {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                    scalars: Vec::new(),
                    lists: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(path, "property before element"))?;
                let first = tok.next().ok_or_else(|| parse_err(path, "property type"))?;
                let prop = if first == "list" {
                    let count_kind = PlyType::parse(tok.next().unwrap_or(""))
                        .ok_or_else(|| parse_err(path, "list count type"))?;
                    let kind = PlyType::parse(tok.next().unwrap_or(""))
                        .ok_or_else(|| parse_err(path, "list item type"))?;
                    let name = tok.next().ok_or_else(|| parse_err(path, "property name"))?;
                    PlyProperty { name: name.to_string(), kind, list_count_kind: Some(count_kind) }
                } else {
                    let kind =
                        PlyType::parse(first).ok_or_else(|| parse_err(path, "property type"))?;
                    let name = tok.next().ok_or_else(|| parse_err(path, "property name"))?;
                    PlyProperty { name: name.to_string(), kind, list_count_kind: None }
                };
                element.properties.push(prop);
            }
            Some("end_header") | None => {}
            Some(other) => return Err(parse_err(path, &format!("unknown header keyword {other}"))),
        }
    }

    for e in &mut elements {
        e.scalars = vec![Vec::new(); e.properties.len()];
        e.lists = vec![Vec::new(); e.properties.len()];
    }

    if ascii {
        let body = String::from_utf8_lossy(&bytes[header_end.1..]);
        let mut tokens = body.split_whitespace().map(|t| t.parse::<f64>());
        let mut next = |path: &Path| -> Result<f64> {
            tokens
                .next()
                .ok_or_else(|| parse_err(path, "unexpected end of data"))?
                .map_err(|_| parse_err(path, "non-numeric token"))
        };
        for e in &mut elements {
            for _ in 0..e.count {
                for (pi, p) in e.properties.iter().enumerate() {
                    if p.list_count_kind.is_some() {
                        let n = next(path)? as usize;
                        let mut items = Vec::with_capacity(n);
                        for _ in 0..n {
                            items.push(next(path)?);
                        }
                        e.lists[pi].push(items);
                    } else {
                        let v = next(path)?;
                        e.scalars[pi].push(v);
                    }
                }
            }
        }
    } else {
        let mut pos = header_end.1;
        for e in &mut elements {
            for _ in 0..e.count {
                for (pi, p) in e.properties.iter().enumerate() {
                    if let Some(count_kind) = p.list_count_kind {
                        ensure_len(&bytes, pos + count_kind.size(), path)?;
                        let n = count_kind.read(&bytes[pos..]) as usize;
                        pos += count_kind.size();
                        let mut items = Vec::with_capacity(n);
                        for _ in 0..n {
                            ensure_len(&bytes, pos + p.kind.size(), path)?;
                            items.push(p.kind.read(&bytes[pos..]));
                            pos += p.kind.size();
                        }
                        e.lists[pi].push(items);
                    } else {
                        ensure_len(&bytes, pos + p.kind.size(), path)?;
                        e.scalars[pi].push(p.kind.read(&bytes[pos..]));
                        pos += p.kind.size();
                    }
                }
            }
        }
    }

    Ok(PlyFile { elements })
}

fn ensure_len(bytes: &[u8], need: usize, path: &Path) -> Result<()> {
    if bytes.len() < need {
        return Err(parse_err(path, "truncated binary data"));
    }
    Ok(())
}

/// Byte offset of "end_header" line start and of the first data byte.
fn find_header_end(bytes: &[u8]) -> Option<(usize, usize)> {
    let needle = b"end_header";
    let mut i = 0;
    while i + needle.len() <= bytes.len() {
        if &bytes[i..i + needle.len()] == needle {
            // data begins after the newline that terminates this line
            let mut j = i + needle.len();
            while j < bytes.len() && bytes[j] != b'\n' {
                j += 1;
            }
            return Some((i, j + 1));
        }
        i += 1;
    }
    None
}
