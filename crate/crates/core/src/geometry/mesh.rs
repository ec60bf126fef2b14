use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use super::GeometryError;

/// Direction the front of every furniture item faces. Inputs are expected in
/// centimetres with +Z up; nothing is auto-detected.
pub const FRONT_AXIS: [f64; 3] = [0.0, -1.0, 0.0];

/// Triangle mesh in centimetres, Z up.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<[f64; 3]>,
    triangles: Vec<[usize; 3]>,
}

impl Mesh {
    pub fn new(vertices: Vec<[f64; 3]>, triangles: Vec<[usize; 3]>) -> Result<Self, GeometryError> {
        if triangles.is_empty() {
            return Err(GeometryError::EmptyMesh);
        }
        if let Some(v) = vertices.iter().position(|v| v.iter().any(|c| !c.is_finite())) {
            return Err(GeometryError::NonFinite { vertex: v });
        }
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&i) = tri.iter().find(|&&i| i >= vertices.len()) {
                return Err(GeometryError::IndexOutOfRange { triangle: t, index: i, vertex_count: vertices.len() });
            }
        }
        Ok(Self { vertices, triangles })
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, t: usize) -> [[f64; 3]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Parses a Wavefront OBJ stream. Only `v` and `f` records are interpreted;
    /// polygons are fan-triangulated. Negative (relative) indices are accepted.
    pub fn from_obj<R: BufRead>(reader: R) -> Result<Self, GeometryError> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line.map_err(|e| GeometryError::Io(e.to_string()))?;
            let line = line.split('#').next().unwrap_or("").trim();
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("v") => {
                    let coords: Vec<f64> = parts
                        .take(3)
                        .map(|p| p.parse::<f64>())
                        .collect::<Result<_, _>>()
                        .map_err(|e| parse_err(lineno, format!("bad vertex coordinate: {e}")))?;
                    if coords.len() != 3 {
                        return Err(parse_err(lineno, "vertex needs three coordinates"));
                    }
                    vertices.push([coords[0], coords[1], coords[2]]);
                }
                Some("f") => {
                    let mut idx = Vec::new();
                    for p in parts {
                        let head = p.split('/').next().unwrap_or("");
                        let raw: i64 = head.parse().map_err(|_| parse_err(lineno, format!("bad face index `{p}`")))?;
                        let n = vertices.len() as i64;
                        let resolved = if raw > 0 {
                            raw - 1
                        } else if raw < 0 {
                            n + raw
                        } else {
                            return Err(parse_err(lineno, "face index 0 is invalid (OBJ indices are 1-based)"));
                        };
                        if resolved < 0 || resolved >= n {
                            return Err(parse_err(lineno, format!("face index {raw} out of range ({n} vertices so far)")));
                        }
                        idx.push(resolved as usize);
                    }
                    if idx.len() < 3 {
                        return Err(parse_err(lineno, "face needs at least three vertices"));
                    }
                    for k in 1..idx.len() - 1 {
                        triangles.push([idx[0], idx[k], idx[k + 1]]);
                    }
                }
                _ => {}
            }
        }
        Self::new(vertices, triangles)
    }

    pub fn load_obj(path: impl AsRef<Path>) -> Result<Self, GeometryError> {
        let file = std::fs::File::open(path.as_ref())
            .map_err(|e| GeometryError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_obj(std::io::BufReader::new(file))
    }

    pub fn to_obj(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {} {}", v[0], v[1], v[2]);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        out
    }

    pub fn translated(&self, offset: [f64; 3]) -> Self {
        let vertices = self
            .vertices
            .iter()
            .map(|v| [v[0] + offset[0], v[1] + offset[1], v[2] + offset[2]])
            .collect();
        Self { vertices, triangles: self.triangles.clone() }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> GeometryError {
    GeometryError::Parse { line, message: message.into() }
}

/// Accumulates axis-aligned boxes into a single mesh. Used for synthetic
/// furniture fixtures and benchmarks.
#[derive(Debug, Default, Clone)]
pub struct MeshBuilder {
    vertices: Vec<[f64; 3]>,
    triangles: Vec<[usize; 3]>,
}

impl MeshBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Closed box with outward-facing triangles.
    pub fn add_box(&mut self, min: [f64; 3], max: [f64; 3]) -> &mut Self {
        let base = self.vertices.len();
        for k in 0..8 {
            self.vertices.push([
                if k & 1 == 0 { min[0] } else { max[0] },
                if k & 2 == 0 { min[1] } else { max[1] },
                if k & 4 == 0 { min[2] } else { max[2] },
            ]);
        }
        // Quads listed counter-clockwise when seen from outside.
        const QUADS: [[usize; 4]; 6] = [
            [4, 5, 7, 6], // top (+z)
            [0, 2, 3, 1], // bottom (-z)
            [0, 1, 5, 4], // front (-y)
            [2, 6, 7, 3], // back (+y)
            [0, 4, 6, 2], // left (-x)
            [1, 3, 7, 5], // right (+x)
        ];
        for q in QUADS {
            self.triangles.push([base + q[0], base + q[1], base + q[2]]);
            self.triangles.push([base + q[0], base + q[2], base + q[3]]);
        }
        self
    }

    /// Single upward-facing quad at height `z`.
    pub fn add_top_quad(&mut self, min: [f64; 2], max: [f64; 2], z: f64) -> &mut Self {
        let base = self.vertices.len();
        self.vertices.extend_from_slice(&[
            [min[0], min[1], z],
            [max[0], min[1], z],
            [max[0], max[1], z],
            [min[0], max[1], z],
        ]);
        self.triangles.push([base, base + 1, base + 2]);
        self.triangles.push([base, base + 2, base + 3]);
        self
    }

    pub fn build(&self) -> Result<Mesh, GeometryError> {
        Mesh::new(self.vertices.clone(), self.triangles.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CUBE: &str = "\
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
f 1 3 2
f 1 4 3
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 2 3 7
f 2 7 6
f 3 4 8
f 3 8 7
f 4 1 5
f 4 5 8
";

    #[test]
    fn unit_cube_has_twelve_triangles() {
        let m = Mesh::from_obj(CUBE.as_bytes()).unwrap();
        assert_eq!(m.triangles().len(), 12);
        assert_eq!(m.vertices().len(), 8);
    }

    #[test]
    fn quad_is_fan_triangulated() {
        let src = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1/1 2/2/1 3/3/1 4/4/1\n";
        let m = Mesh::from_obj(src.as_bytes()).unwrap();
        assert_eq!(m.triangles(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn zero_index_is_rejected() {
        let src = "v 0 0 0\nv 1 0 0\nv 1 1 0\nf 0 1 2\n";
        match Mesh::from_obj(src.as_bytes()) {
            Err(GeometryError::Parse { line: 4, .. }) => {}
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn out_of_range_index_is_rejected() {
        let src = "v 0 0 0\nv 1 0 0\nv 1 1 0\nf 1 2 9\n";
        assert!(matches!(Mesh::from_obj(src.as_bytes()), Err(GeometryError::Parse { .. })));
    }

    #[test]
    fn negative_indices_are_relative() {
        let src = "v 0 0 0\nv 1 0 0\nv 1 1 0\nf -3 -2 -1\n";
        let m = Mesh::from_obj(src.as_bytes()).unwrap();
        assert_eq!(m.triangles(), &[[0, 1, 2]]);
    }

    #[test]
    fn malformed_vertex_line() {
        let src = "v 0 zero 0\n";
        assert!(matches!(Mesh::from_obj(src.as_bytes()), Err(GeometryError::Parse { line: 1, .. })));
    }

    #[test]
    fn empty_mesh_is_an_error() {
        let src = "# nothing\nv 0 0 0\n";
        assert!(matches!(Mesh::from_obj(src.as_bytes()), Err(GeometryError::EmptyMesh)));
    }

    #[test]
    fn obj_round_trip() {
        let mut b = MeshBuilder::new();
        b.add_box([0.0, 0.0, 0.0], [2.0, 3.0, 4.0]);
        let m = b.build().unwrap();
        let back = Mesh::from_obj(m.to_obj().as_bytes()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn box_top_faces_point_up() {
        let mut b = MeshBuilder::new();
        b.add_box([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]);
        let m = b.build().unwrap();
        let ups = (0..m.triangles().len())
            .filter(|&t| {
                let [a, b, c] = m.triangle(t);
                let u = [b[0] - a[0], b[1] - a[1]];
                let v = [c[0] - a[0], c[1] - a[1]];
                u[0] * v[1] - u[1] * v[0] > 0.0 && a[2] == 1.0 && b[2] == 1.0 && c[2] == 1.0
            })
            .count();
        assert_eq!(ups, 2);
    }
}
