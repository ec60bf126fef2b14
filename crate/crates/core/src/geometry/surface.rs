use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{GeometryError, Mesh, OccupancyGrid, Rect};

/// A supporting region extracted from a furniture mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    pub index: usize,
    /// Support plane height: the highest vertex of the cluster.
    pub height_cm: f64,
    /// Outer boundary of the projected cluster, counter-clockwise.
    pub boundary: Vec<[f64; 2]>,
    /// Area of the union of the projected triangles.
    pub area_cm2: f64,
    pub bbox: Rect,
    /// Free height above the surface before other furniture geometry or a
    /// higher surface is reached; `None` when nothing lies above.
    pub clearance_cm: Option<f64>,
    pub grid: OccupancyGrid,
}

impl Surface {
    /// Builds a fully supported rectangular surface. Handy for solver
    /// instances that do not start from a mesh.
    pub fn rectangle(index: usize, bbox: Rect, height_cm: f64, resolution_cm: f64) -> Self {
        let mut grid = OccupancyGrid::new(&bbox, resolution_cm);
        grid.mark_where(&bbox, |x, y| bbox.contains_point(x, y, 0.0));
        grid.rebuild_prefix();
        Self {
            index,
            height_cm,
            boundary: vec![
                [bbox.min_x, bbox.min_y],
                [bbox.max_x, bbox.min_y],
                [bbox.max_x, bbox.max_y],
                [bbox.min_x, bbox.max_y],
            ],
            area_cm2: bbox.area(),
            bbox,
            clearance_cm: None,
            grid,
        }
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        let (nx, ny) = self.grid.dims();
        let cells = (0..ny).flat_map(|iy| (0..nx).map(move |ix| (ix, iy))).map(|(ix, iy)| self.grid.is_supported(ix, iy)).collect();
        let o = self.grid.origin();
        Self {
            boundary: self.boundary.iter().map(|p| [p[0] + dx, p[1] + dy]).collect(),
            bbox: self.bbox.translate(dx, dy),
            grid: OccupancyGrid::from_cells([o[0] + dx, o[1] + dy], self.grid.resolution_cm(), nx, ny, cells),
            ..self.clone()
        }
    }

    /// Containment test used by every placement check.
    pub fn contains(&self, rect: &Rect) -> bool {
        footprint_contained(self, rect)
    }
}

/// True iff `rect` lies inside the surface bbox and every occupancy cell whose
/// centre falls inside `rect` is supported.
pub fn footprint_contained(surface: &Surface, rect: &Rect) -> bool {
    if rect.is_degenerate() {
        return false;
    }
    surface.bbox.contains_rect(rect, 1e-9) && surface.grid.unsupported_in(rect) == 0
}

/// Tunables for [`extract_surfaces`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractOptions {
    pub height_tolerance_cm: f64,
    pub min_area_cm2: f64,
    pub grid_resolution_cm: f64,
    /// Maximum tilt of a face normal from +Z for the face to count as upward.
    pub max_tilt_deg: f64,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self { height_tolerance_cm: 2.0, min_area_cm2: 100.0, grid_resolution_cm: 1.0, max_tilt_deg: 15.0 }
    }
}

/// Upward-facing triangle projected to XY (counter-clockwise).
#[derive(Debug, Clone, Copy)]
struct FlatTri {
    p: [[f64; 2]; 3],
    z: [f64; 3],
    bbox: Rect,
}

impl FlatTri {
    fn z_mean(&self) -> f64 {
        (self.z[0] + self.z[1] + self.z[2]) / 3.0
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        const EPS: f64 = 1e-9;
        if !self.bbox.contains_point(x, y, EPS) {
            return false;
        }
        let [a, b, c] = self.p;
        let e = |p: [f64; 2], q: [f64; 2]| (q[0] - p[0]) * (y - p[1]) - (q[1] - p[1]) * (x - p[0]);
        e(a, b) >= -EPS && e(b, c) >= -EPS && e(c, a) >= -EPS
    }

    fn area(&self) -> f64 {
        let [a, b, c] = self.p;
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    }
}

/// Separating-axis test in 2D; touching triangles count as connected.
fn tris_touch(a: &FlatTri, b: &FlatTri) -> bool {
    const EPS: f64 = 1e-6;
    if a.bbox.min_x > b.bbox.max_x + EPS
        || b.bbox.min_x > a.bbox.max_x + EPS
        || a.bbox.min_y > b.bbox.max_y + EPS
        || b.bbox.min_y > a.bbox.max_y + EPS
    {
        return false;
    }
    for t in [a, b] {
        for k in 0..3 {
            let p = t.p[k];
            let q = t.p[(k + 1) % 3];
            let len = (q[0] - p[0]).hypot(q[1] - p[1]);
            if len == 0.0 {
                continue;
            }
            let n = [-(q[1] - p[1]) / len, (q[0] - p[0]) / len];
            let proj = |tri: &FlatTri| {
                let vals = tri.p.map(|v| v[0] * n[0] + v[1] * n[1]);
                (vals.iter().cloned().fold(f64::INFINITY, f64::min), vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
            };
            let (amin, amax) = proj(a);
            let (bmin, bmax) = proj(b);
            if amax < bmin - EPS || bmax < amin - EPS {
                return false;
            }
        }
    }
    true
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// Groups `members` (indices into `tris`) into XY-connected components whose
/// neighbouring triangles differ in mean height by at most `tol`.
fn components(tris: &[FlatTri], members: &[usize], tol: f64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..members.len()).collect();
    order.sort_by(|&i, &j| tris[members[i]].bbox.min_x.total_cmp(&tris[members[j]].bbox.min_x));
    let mut uf = UnionFind::new(members.len());
    for (oi, &i) in order.iter().enumerate() {
        let ti = &tris[members[i]];
        for &j in &order[oi + 1..] {
            let tj = &tris[members[j]];
            if tj.bbox.min_x > ti.bbox.max_x + 1e-6 {
                break;
            }
            if (ti.z_mean() - tj.z_mean()).abs() <= tol + 1e-9 && tris_touch(ti, tj) {
                uf.union(i, j);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..members.len() {
        let root = uf.find(i);
        groups.entry(root).or_default().push(members[i]);
    }
    groups.into_values().collect()
}

fn median_height(tris: &[FlatTri], members: &[usize]) -> f64 {
    let mut zs: Vec<f64> = members.iter().flat_map(|&t| tris[t].z).collect();
    zs.sort_by(f64::total_cmp);
    zs[(zs.len() - 1) / 2]
}

/// Splits the upward-facing triangles into height-coherent connected clusters.
///
/// Components are formed by XY adjacency between triangles of similar height;
/// triangles with a vertex further than `tol` from their component's median
/// height are peeled off and re-clustered on their own.
fn cluster(tris: &[FlatTri], tol: f64) -> Vec<Vec<usize>> {
    let mut accepted = Vec::new();
    let mut pool: Vec<usize> = (0..tris.len()).collect();
    while !pool.is_empty() {
        let mut outliers = Vec::new();
        let mut queue: VecDeque<Vec<usize>> = components(tris, &pool, tol).into();
        while let Some(comp) = queue.pop_front() {
            let med = median_height(tris, &comp);
            let (inl, out): (Vec<usize>, Vec<usize>) =
                comp.iter().partition(|&&t| tris[t].z.iter().all(|z| (z - med).abs() <= tol + 1e-9));
            if out.is_empty() {
                accepted.push(comp);
            } else if inl.is_empty() {
                // No triangle agrees with the median: the component is a slope.
                continue;
            } else {
                outliers.extend(out);
                queue.extend(components(tris, &inl, tol));
            }
        }
        outliers.sort_unstable();
        pool = outliers;
    }
    accepted
}

type Key = (i64, i64);

fn key(p: [f64; 2]) -> Key {
    ((p[0] * 1e6).round() as i64, (p[1] * 1e6).round() as i64)
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

pub(crate) fn signed_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| cross(poly[i], poly[(i + 1) % n])).sum::<f64>() / 2.0
}

/// Boundary loops of the union of `tris`, oriented with the covered side on
/// the left (outer loops counter-clockwise, holes clockwise). Returns `None`
/// when the loops cannot be closed.
fn union_loops(tris: &[FlatTri]) -> Option<Vec<Vec<[f64; 2]>>> {
    // Unique undirected edges.
    let mut segs: Vec<([f64; 2], [f64; 2])> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for t in tris {
        for k in 0..3 {
            let (a, b) = (t.p[k], t.p[(k + 1) % 3]);
            let (ka, kb) = (key(a), key(b));
            if ka == kb {
                continue;
            }
            if seen.insert(if ka < kb { (ka, kb) } else { (kb, ka) }) {
                segs.push((a, b));
            }
        }
    }

    // Split every segment at crossings and at vertices lying on it.
    let mut cuts: Vec<Vec<f64>> = vec![vec![0.0, 1.0]; segs.len()];
    let mut order: Vec<usize> = (0..segs.len()).collect();
    let min_x = |s: &([f64; 2], [f64; 2])| s.0[0].min(s.1[0]);
    let max_x = |s: &([f64; 2], [f64; 2])| s.0[0].max(s.1[0]);
    order.sort_by(|&i, &j| min_x(&segs[i]).total_cmp(&min_x(&segs[j])));
    const EPS: f64 = 1e-9;
    for (oi, &i) in order.iter().enumerate() {
        let (a1, b1) = segs[i];
        let d1 = sub(b1, a1);
        let l1 = d1[0].hypot(d1[1]);
        for &j in &order[oi + 1..] {
            if min_x(&segs[j]) > max_x(&segs[i]) + 1e-6 {
                break;
            }
            let (a2, b2) = segs[j];
            if a1[1].max(b1[1]) < a2[1].min(b2[1]) - 1e-6 || a2[1].max(b2[1]) < a1[1].min(b1[1]) - 1e-6 {
                continue;
            }
            let d2 = sub(b2, a2);
            let l2 = d2[0].hypot(d2[1]);
            let denom = cross(d1, d2);
            if denom.abs() > 1e-12 * l1 * l2 {
                let w = sub(a2, a1);
                let t = cross(w, d2) / denom;
                let u = cross(w, d1) / denom;
                let tol1 = 1e-7 / l1;
                let tol2 = 1e-7 / l2;
                if t > -tol1 && t < 1.0 + tol1 && u > -tol2 && u < 1.0 + tol2 {
                    cuts[i].push(t.clamp(0.0, 1.0));
                    cuts[j].push(u.clamp(0.0, 1.0));
                }
            } else if cross(sub(a2, a1), d1).abs() <= 1e-7 * l1 {
                let along1 = |p: [f64; 2]| ((p[0] - a1[0]) * d1[0] + (p[1] - a1[1]) * d1[1]) / (l1 * l1);
                let along2 = |p: [f64; 2]| ((p[0] - a2[0]) * d2[0] + (p[1] - a2[1]) * d2[1]) / (l2 * l2);
                for p in [a2, b2] {
                    let t = along1(p);
                    if t > EPS && t < 1.0 - EPS {
                        cuts[i].push(t);
                    }
                }
                for p in [a1, b1] {
                    let u = along2(p);
                    if u > EPS && u < 1.0 - EPS {
                        cuts[j].push(u);
                    }
                }
            }
        }
    }

    let mut points: HashMap<Key, [f64; 2]> = HashMap::new();
    let mut pieces: Vec<(Key, Key)> = Vec::new();
    let mut piece_seen = std::collections::HashSet::new();
    for (s, ts) in segs.iter().zip(cuts.iter_mut()) {
        ts.sort_by(f64::total_cmp);
        let at = |t: f64| [s.0[0] + (s.1[0] - s.0[0]) * t, s.0[1] + (s.1[1] - s.0[1]) * t];
        for w in ts.windows(2) {
            let (p, q) = (at(w[0]), at(w[1]));
            let (kp, kq) = (key(p), key(q));
            if kp == kq {
                continue;
            }
            points.entry(kp).or_insert(p);
            points.entry(kq).or_insert(q);
            if piece_seen.insert(if kp < kq { (kp, kq) } else { (kq, kp) }) {
                pieces.push((kp, kq));
            }
        }
    }

    let covered = |x: f64, y: f64| tris.iter().any(|t| t.contains(x, y));
    // Directed boundary edges: covered side on the left.
    let mut edges: Vec<(Key, Key)> = Vec::new();
    for (kp, kq) in pieces {
        let (p, q) = (points[&kp], points[&kq]);
        let d = sub(q, p);
        let len = d[0].hypot(d[1]);
        let delta = (len * 1e-3).min(1e-4);
        let m = [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0];
        let n = [-d[1] / len * delta, d[0] / len * delta];
        let left = covered(m[0] + n[0], m[1] + n[1]);
        let right = covered(m[0] - n[0], m[1] - n[1]);
        match (left, right) {
            (true, false) => edges.push((kp, kq)),
            (false, true) => edges.push((kq, kp)),
            _ => {}
        }
    }
    edges.sort();

    let mut outgoing: BTreeMap<Key, Vec<usize>> = BTreeMap::new();
    for (e, (from, _)) in edges.iter().enumerate() {
        outgoing.entry(*from).or_default().push(e);
    }
    let mut used = vec![false; edges.len()];
    let mut loops = Vec::new();
    for start in 0..edges.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let mut poly = vec![points[&edges[start].0]];
        let mut cur = start;
        loop {
            let (from, to) = edges[cur];
            if to == edges[start].0 {
                break;
            }
            poly.push(points[&to]);
            let back = sub(points[&from], points[&to]);
            let next = outgoing.get(&to)?.iter().copied().filter(|&e| !used[e]).min_by(|&a, &b| {
                let ang = |e: usize| {
                    let dir = sub(points[&edges[e].1], points[&to]);
                    let ccw = cross(back, dir).atan2(back[0] * dir[0] + back[1] * dir[1]);
                    let cw = (-ccw).rem_euclid(std::f64::consts::TAU);
                    if cw < 1e-12 {
                        std::f64::consts::TAU
                    } else {
                        cw
                    }
                };
                ang(a).total_cmp(&ang(b))
            })?;
            used[next] = true;
            cur = next;
            if poly.len() > edges.len() + 1 {
                return None;
            }
        }
        loops.push(simplify(poly));
    }
    Some(loops.into_iter().filter(|l| l.len() >= 3).collect())
}

/// Drops vertices lying on the straight line between their neighbours.
fn simplify(mut poly: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    let mut changed = true;
    while changed && poly.len() > 3 {
        changed = false;
        let n = poly.len();
        for i in 0..n {
            let (a, b, c) = (poly[(i + n - 1) % n], poly[i], poly[(i + 1) % n]);
            let ab = sub(b, a);
            let bc = sub(c, b);
            let scale = (ab[0].hypot(ab[1]) * bc[0].hypot(bc[1])).max(1e-300);
            if cross(ab, bc).abs() / scale < 1e-9 && ab[0] * bc[0] + ab[1] * bc[1] > 0.0 {
                poly.remove(i);
                changed = true;
                break;
            }
        }
    }
    // Start at the lowest-left vertex so output does not depend on traversal start.
    if let Some(pos) = (0..poly.len()).min_by(|&i, &j| (poly[i][1], poly[i][0]).partial_cmp(&(poly[j][1], poly[j][0])).unwrap()) {
        poly.rotate_left(pos);
    }
    poly
}

fn convex_hull(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(sub(lower[lower.len() - 1], lower[lower.len() - 2]), sub(p, lower[lower.len() - 1])) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(sub(upper[upper.len() - 1], upper[upper.len() - 2]), sub(p, upper[upper.len() - 1])) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Finds the supporting surfaces of a furniture mesh.
///
/// Upward-facing triangles (normal within `max_tilt_deg` of +Z) are grouped
/// into XY-connected clusters whose vertex heights stay within
/// `height_tolerance_cm` of the cluster median, so slightly rugged tops come
/// out as one surface. Results are sorted by height, then by area descending.
pub fn extract_surfaces(mesh: &Mesh, opts: &ExtractOptions) -> Result<Vec<Surface>, GeometryError> {
    if !(opts.height_tolerance_cm > 0.0) || !(opts.grid_resolution_cm > 0.0) {
        return Err(GeometryError::InvalidOptions("tolerance and grid resolution must be positive".into()));
    }
    let cos_limit = opts.max_tilt_deg.to_radians().cos();
    let mut flat = Vec::new();
    let mut downward = Vec::new();
    for t in 0..mesh.triangles().len() {
        let [a, b, c] = mesh.triangle(t);
        let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
        let n = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
        let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        if len <= 1e-12 {
            continue;
        }
        let bbox = Rect::new(
            a[0].min(b[0]).min(c[0]),
            a[1].min(b[1]).min(c[1]),
            a[0].max(b[0]).max(c[0]),
            a[1].max(b[1]).max(c[1]),
        );
        if n[2] / len >= cos_limit {
            flat.push(FlatTri { p: [[a[0], a[1]], [b[0], b[1]], [c[0], c[1]]], z: [a[2], b[2], c[2]], bbox });
        } else if n[2] / len < -0.5 {
            downward.push((a[2].min(b[2]).min(c[2]), bbox));
        }
    }

    let tol = opts.height_tolerance_cm;
    let mut surfaces = Vec::new();
    for members in cluster(&flat, tol) {
        let tris: Vec<FlatTri> = members.iter().map(|&i| flat[i]).collect();
        let (boundary, area) = match union_loops(&tris) {
            Some(loops) if !loops.is_empty() => {
                let area: f64 = loops.iter().map(|l| signed_area(l)).sum();
                let outer = loops
                    .into_iter()
                    .max_by(|a, b| signed_area(a).total_cmp(&signed_area(b)))
                    .unwrap_or_default();
                (outer, area)
            }
            _ => {
                log::warn!("could not trace surface boundary; falling back to convex hull");
                let pts = tris.iter().flat_map(|t| t.p).collect();
                (convex_hull(pts), tris.iter().map(FlatTri::area).sum())
            }
        };
        if area < opts.min_area_cm2 || boundary.len() < 3 {
            continue;
        }
        let bbox = tris.iter().fold(
            Rect::new(f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |r, t| Rect::new(r.min_x.min(t.bbox.min_x), r.min_y.min(t.bbox.min_y), r.max_x.max(t.bbox.max_x), r.max_y.max(t.bbox.max_y)),
        );
        let height = tris.iter().flat_map(|t| t.z).fold(f64::NEG_INFINITY, f64::max);
        let mut grid = OccupancyGrid::new(&bbox, opts.grid_resolution_cm);
        for t in &tris {
            grid.mark_where(&t.bbox, |x, y| t.contains(x, y));
        }
        grid.rebuild_prefix();
        surfaces.push(Surface { index: 0, height_cm: height, boundary, area_cm2: area, bbox, clearance_cm: None, grid });
    }
    if surfaces.is_empty() {
        return Err(GeometryError::NoSurface);
    }
    surfaces.sort_by(|a, b| {
        a.height_cm
            .total_cmp(&b.height_cm)
            .then(b.area_cm2.total_cmp(&a.area_cm2))
            .then(a.bbox.min_x.total_cmp(&b.bbox.min_x))
            .then(a.bbox.min_y.total_cmp(&b.bbox.min_y))
    });

    let overlaps = |a: &Rect, b: &Rect| a.intersection_area(b) > 1e-6;
    let clearances: Vec<Option<f64>> = surfaces
        .iter()
        .map(|s| {
            let limit = s.height_cm + tol;
            let from_geometry = downward.iter().filter(|(zmin, bb)| *zmin > limit && overlaps(bb, &s.bbox)).map(|(z, _)| *z);
            let from_surfaces =
                surfaces.iter().filter(|o| o.height_cm > limit && overlaps(&o.bbox, &s.bbox)).map(|o| o.height_cm);
            from_geometry.chain(from_surfaces).map(|z| z - s.height_cm).reduce(f64::min)
        })
        .collect();
    for (i, (s, c)) in surfaces.iter_mut().zip(clearances).enumerate() {
        s.index = i;
        s.clearance_cm = c;
    }
    Ok(surfaces)
}

#[derive(Serialize)]
struct SurfaceDump<'a> {
    index: usize,
    height_cm: f64,
    area_cm2: f64,
    boundary: &'a [[f64; 2]],
}

/// Compact JSON listing: `[{index, height_cm, area_cm2, boundary}]`.
pub fn surface_dump_json(surfaces: &[Surface]) -> String {
    let dump: Vec<SurfaceDump> = surfaces
        .iter()
        .map(|s| SurfaceDump { index: s.index, height_cm: s.height_cm, area_cm2: s.area_cm2, boundary: &s.boundary })
        .collect();
    serde_json::to_string_pretty(&dump).expect("surface dump serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::MeshBuilder;

    fn desk() -> Mesh {
        let mut b = MeshBuilder::new();
        b.add_box([0.0, 0.0, 72.0], [120.0, 60.0, 75.0]);
        for (x, y) in [(0.0, 0.0), (115.0, 0.0), (0.0, 55.0), (115.0, 55.0)] {
            b.add_box([x, y, 0.0], [x + 5.0, y + 5.0, 72.0]);
        }
        b.build().unwrap()
    }

    #[test]
    fn flat_desk_has_one_surface() {
        let s = extract_surfaces(&desk(), &ExtractOptions::default()).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].height_cm, 75.0);
        assert!((s[0].area_cm2 - 7200.0).abs() < 1e-6);
        assert_eq!(s[0].boundary.len(), 4);
        assert_eq!(s[0].grid.supported_count(), 7200);
        assert_eq!(s[0].clearance_cm, None);
    }

    #[test]
    fn u_shape_boundary_follows_notch() {
        let mut b = MeshBuilder::new();
        b.add_top_quad([0.0, 0.0], [20.0, 60.0], 80.0);
        b.add_top_quad([20.0, 0.0], [80.0, 20.0], 80.0);
        b.add_top_quad([80.0, 0.0], [100.0, 60.0], 80.0);
        let s = extract_surfaces(&b.build().unwrap(), &ExtractOptions::default()).unwrap();
        assert_eq!(s.len(), 1);
        let expected = 20.0 * 60.0 * 2.0 + 60.0 * 20.0;
        assert!((s[0].area_cm2 - expected).abs() < 1e-6, "{}", s[0].area_cm2);
        assert_eq!(s[0].boundary.len(), 8, "{:?}", s[0].boundary);
        assert!((signed_area(&s[0].boundary) - expected).abs() < 1e-6);
    }

    #[test]
    fn sloped_faces_are_ignored() {
        // 30 degree ramp: beyond the 15 degree tilt limit.
        let h = 100.0 * 30f64.to_radians().tan();
        let m = Mesh::new(
            vec![[0.0, 0.0, 0.0], [100.0, 0.0, h], [100.0, 100.0, h], [0.0, 100.0, 0.0]],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        assert!(matches!(extract_surfaces(&m, &ExtractOptions::default()), Err(GeometryError::NoSurface)));
    }

    #[test]
    fn small_fragments_are_discarded() {
        let mut b = MeshBuilder::new();
        b.add_top_quad([0.0, 0.0], [9.0, 9.0], 50.0);
        assert!(matches!(extract_surfaces(&b.build().unwrap(), &ExtractOptions::default()), Err(GeometryError::NoSurface)));
    }

    #[test]
    fn clearance_under_a_shelf() {
        let mut b = MeshBuilder::new();
        b.add_box([0.0, 0.0, 72.0], [120.0, 60.0, 75.0]);
        b.add_box([20.0, 40.0, 107.0], [100.0, 60.0, 110.0]);
        let s = extract_surfaces(&b.build().unwrap(), &ExtractOptions::default()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].clearance_cm, Some(32.0));
        assert_eq!(s[1].clearance_cm, None);
    }

    #[test]
    fn rejects_nonpositive_tolerance() {
        let opts = ExtractOptions { height_tolerance_cm: 0.0, ..Default::default() };
        assert!(matches!(extract_surfaces(&desk(), &opts), Err(GeometryError::InvalidOptions(_))));
    }

    #[test]
    fn containment_basics() {
        let s = Surface::rectangle(0, Rect::new(0.0, 0.0, 100.0, 100.0), 70.0, 1.0);
        assert!(footprint_contained(&s, &Rect::from_center(50.0, 50.0, 10.0, 10.0)));
        assert!(!footprint_contained(&s, &Rect::new(91.0, 40.0, 101.0, 50.0)));
        assert!(!footprint_contained(&s, &Rect::new(10.0, 10.0, 10.0, 20.0)));
    }
}
