//! Triangulation of one period of the grating domain and its newest-vertex
//! bisection.
//!
//! Triangles are stored counter-clockwise with the refinement edge between
//! the first two vertices; the third vertex is the newest one.

use std::collections::HashMap;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Piecewise-linear graph y = f(x) over one period.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceProfile {
    breakpoints: Vec<Point>,
}

impl SurfaceProfile {
    pub fn new(breakpoints: Vec<Point>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidProfile("need at least two breakpoints".into()));
        }
        if breakpoints.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::InvalidProfile("non-finite breakpoint".into()));
        }
        if breakpoints[0][0] != 0.0 {
            return Err(Error::InvalidProfile(format!(
                "first breakpoint must have x = 0, got {}",
                breakpoints[0][0]
            )));
        }
        for (k, w) in breakpoints.windows(2).enumerate() {
            if w[1][0] <= w[0][0] {
                return Err(Error::InvalidProfile(format!(
                    "x not strictly increasing at breakpoint {}",
                    k + 1
                )));
            }
        }
        let first = breakpoints[0][1];
        let last = breakpoints[breakpoints.len() - 1][1];
        let scale = breakpoints.iter().map(|p| p[1].abs()).fold(1.0, f64::max);
        if (first - last).abs() > 1e-12 * scale {
            return Err(Error::InvalidProfile(format!(
                "f(0) = {first} differs from f(period) = {last}"
            )));
        }
        let mut breakpoints = breakpoints;
        let n = breakpoints.len();
        breakpoints[n - 1][1] = first;
        Ok(Self { breakpoints })
    }

    pub fn flat(period: f64, height: f64) -> Result<Self> {
        if !(period > 0.0) {
            return Err(Error::InvalidProfile(format!("period must be positive, got {period}")));
        }
        Self::new(vec![[0.0, height], [period, height]])
    }

    pub fn breakpoints(&self) -> &[Point] {
        &self.breakpoints
    }

    pub fn period(&self) -> f64 {
        self.breakpoints[self.breakpoints.len() - 1][0]
    }

    pub fn max_height(&self) -> f64 {
        self.breakpoints.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_flat(&self) -> bool {
        let y0 = self.breakpoints[0][1];
        self.breakpoints.iter().all(|p| p[1] == y0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let bp = &self.breakpoints;
        if x <= bp[0][0] {
            return bp[0][1];
        }
        for w in bp.windows(2) {
            if x <= w[1][0] {
                let t = (x - w[0][0]) / (w[1][0] - w[0][0]);
                return w[0][1] + t * (w[1][1] - w[0][1]);
            }
        }
        bp[bp.len() - 1][1]
    }

    /// Interior breakpoints (excluding the two endpoints).
    pub fn corners(&self) -> &[Point] {
        &self.breakpoints[1..self.breakpoints.len() - 1]
    }

    /// Area of {f(x) < y < b}.
    pub fn area_below(&self, b: f64) -> f64 {
        let integral: f64 = self
            .breakpoints
            .windows(2)
            .map(|w| 0.5 * (w[0][1] + w[1][1]) * (w[1][0] - w[0][0]))
            .sum();
        self.period() * b - integral
    }

    pub fn check_height(&self, b: f64) -> Result<()> {
        if !(b > self.max_height()) {
            return Err(Error::InvalidProfile(format!(
                "max f = {} must lie strictly below b = {b}",
                self.max_height()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Surface,
    Top,
    Left,
    Right,
}

impl BoundaryTag {
    /// Integer code used in exported files.
    pub fn code(self) -> i32 {
        match self {
            BoundaryTag::Surface => 1,
            BoundaryTag::Top => 2,
            BoundaryTag::Left => 3,
            BoundaryTag::Right => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
}

/// An edge of the triangulation with its one or two neighbouring triangles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub triangles: [Option<usize>; 2],
    pub tag: Option<BoundaryTag>,
}

/// Triangles flagged for refinement.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MarkSet(pub Vec<usize>);

impl MarkSet {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }
}

pub const DEFAULT_MIN_ANGLE_DEG: f64 = 15.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    periodic_pairs: Vec<(usize, usize)>,
    parents: Vec<Option<usize>>,
    period: f64,
    top: f64,
    min_angle_floor: f64,
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn angles_deg(a: Point, b: Point, c: Point) -> [f64; 3] {
    let ang = |p: Point, q: Point, r: Point| {
        let u = [q[0] - p[0], q[1] - p[1]];
        let v = [r[0] - p[0], r[1] - p[1]];
        let cross = (u[0] * v[1] - u[1] * v[0]).abs();
        let dot = u[0] * v[0] + u[1] * v[1];
        cross.atan2(dot).to_degrees()
    };
    [ang(a, b, c), ang(b, c, a), ang(c, a, b)]
}

/// Orders a triangle counter-clockwise with its longest edge first. Ties are
/// broken by the sorted vertex pair so the choice is deterministic.
fn orient_longest_first(vertices: &[Point], t: [usize; 3]) -> [usize; 3] {
    let mut t = t;
    if signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]) < 0.0 {
        t.swap(0, 1);
    }
    let rot = |k: usize| [t[k], t[(k + 1) % 3], t[(k + 2) % 3]];
    (0..3)
        .map(rot)
        .max_by(|p, q| {
            let lp = dist(vertices[p[0]], vertices[p[1]]);
            let lq = dist(vertices[q[0]], vertices[q[1]]);
            lp.total_cmp(&lq)
                .then_with(|| edge_key(q[0], q[1]).cmp(&edge_key(p[0], p[1])))
        })
        .unwrap()
}

impl Mesh {
    /// Assembles a mesh from raw parts; periodic pairs are found by matching
    /// y-coordinates of Left and Right boundary vertices exactly. No validity
    /// checks are performed (see [`Mesh::validate`]).
    pub fn from_parts(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<BoundaryEdge>,
        period: f64,
        top: f64,
    ) -> Self {
        let side = |tag| {
            let mut v: Vec<usize> = boundary_edges
                .iter()
                .filter(|e| e.tag == tag)
                .flat_map(|e| e.vertices)
                .collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        let left = side(BoundaryTag::Left);
        let right = side(BoundaryTag::Right);
        let mut periodic_pairs = Vec::new();
        for &l in &left {
            if let Some(&r) = right.iter().find(|&&r| vertices[r][1] == vertices[l][1]) {
                periodic_pairs.push((l, r));
            }
        }
        let parents = vec![None; triangles.len()];
        Self {
            vertices,
            triangles,
            boundary_edges,
            periodic_pairs,
            parents,
            period,
            top,
            min_angle_floor: DEFAULT_MIN_ANGLE_DEG,
        }
    }

    /// Terrain-following structured mesh: every profile segment is split into
    /// the given number of columns, every column into `rows` cells between
    /// the surface and y = b. Each cell is cut along its shorter diagonal.
    pub fn structured(
        profile: &SurfaceProfile,
        b: f64,
        columns_per_segment: &[usize],
        rows: usize,
    ) -> Result<Self> {
        profile.check_height(b)?;
        let bp = profile.breakpoints();
        if columns_per_segment.len() != bp.len() - 1 {
            return Err(Error::InvalidParameter(format!(
                "expected {} segment column counts, got {}",
                bp.len() - 1,
                columns_per_segment.len()
            )));
        }
        if rows == 0 || columns_per_segment.contains(&0) {
            return Err(Error::InvalidParameter("column and row counts must be positive".into()));
        }
        // column abscissae and surface heights
        let mut xs: Vec<(f64, f64)> = vec![(bp[0][0], bp[0][1])];
        for (k, w) in bp.windows(2).enumerate() {
            let m = columns_per_segment[k];
            for i in 1..=m {
                if i == m {
                    xs.push((w[1][0], w[1][1]));
                } else {
                    let t = i as f64 / m as f64;
                    xs.push((
                        w[0][0] + t * (w[1][0] - w[0][0]),
                        w[0][1] + t * (w[1][1] - w[0][1]),
                    ));
                }
            }
        }
        let ncol = xs.len();
        // the right column reuses the left column's heights bit for bit
        xs[ncol - 1].1 = xs[0].1;

        let idx = |i: usize, j: usize| i * (rows + 1) + j;
        let mut vertices = Vec::with_capacity(ncol * (rows + 1));
        for &(x, f) in &xs {
            for j in 0..=rows {
                let y = if j == rows {
                    b
                } else {
                    f + (b - f) * (j as f64 / rows as f64)
                };
                vertices.push([x, y]);
            }
        }
        for j in 0..=rows {
            vertices[idx(ncol - 1, j)][1] = vertices[idx(0, j)][1];
        }

        let mut triangles = Vec::with_capacity(2 * (ncol - 1) * rows);
        for i in 0..ncol - 1 {
            for j in 0..rows {
                let (p00, p10, p01, p11) = (idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1));
                let d1 = dist(vertices[p00], vertices[p11]);
                let d2 = dist(vertices[p10], vertices[p01]);
                if d1 <= d2 {
                    triangles.push([p00, p10, p11]);
                    triangles.push([p00, p11, p01]);
                } else {
                    triangles.push([p00, p10, p01]);
                    triangles.push([p10, p11, p01]);
                }
            }
        }
        let triangles = triangles
            .into_iter()
            .map(|t| orient_longest_first(&vertices, t))
            .collect();

        let mut boundary_edges = Vec::new();
        for i in 0..ncol - 1 {
            boundary_edges.push(BoundaryEdge {
                vertices: [idx(i, 0), idx(i + 1, 0)],
                tag: BoundaryTag::Surface,
            });
            boundary_edges.push(BoundaryEdge {
                vertices: [idx(i, rows), idx(i + 1, rows)],
                tag: BoundaryTag::Top,
            });
        }
        for j in 0..rows {
            boundary_edges.push(BoundaryEdge {
                vertices: [idx(0, j), idx(0, j + 1)],
                tag: BoundaryTag::Left,
            });
            boundary_edges.push(BoundaryEdge {
                vertices: [idx(ncol - 1, j), idx(ncol - 1, j + 1)],
                tag: BoundaryTag::Right,
            });
        }
        let periodic_pairs = (0..=rows).map(|j| (idx(0, j), idx(ncol - 1, j))).collect();
        let ntri = 2 * (ncol - 1) * rows;
        Ok(Self {
            vertices,
            triangles,
            boundary_edges,
            periodic_pairs,
            parents: vec![None; ntri],
            period: profile.period(),
            top: b,
            min_angle_floor: DEFAULT_MIN_ANGLE_DEG,
        })
    }

    /// Uniform `nx` × `ny` grid of the rectangle [0, period] × [0, height].
    pub fn rectangle(period: f64, height: f64, nx: usize, ny: usize) -> Result<Self> {
        Self::structured(&SurfaceProfile::flat(period, 0.0)?, height, &[nx], ny)
    }

    pub fn with_min_angle_floor(mut self, degrees: f64) -> Self {
        self.min_angle_floor = degrees;
        self
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn periodic_pairs(&self) -> &[(usize, usize)] {
        &self.periodic_pairs
    }

    /// Parent triangle in the mesh this one was refined from.
    pub fn parents(&self) -> &[Option<usize>] {
        &self.parents
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn top(&self) -> f64 {
        self.top
    }

    pub fn min_angle_floor(&self) -> f64 {
        self.min_angle_floor
    }

    pub fn refinement_edge(&self, t: usize) -> [usize; 2] {
        let tri = self.triangles[t];
        [tri[0], tri[1]]
    }

    pub fn corners(&self, t: usize) -> [Point; 3] {
        let tri = self.triangles[t];
        [self.vertices[tri[0]], self.vertices[tri[1]], self.vertices[tri[2]]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        signed_area(a, b, c)
    }

    pub fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        dist(a, b).max(dist(b, c)).max(dist(c, a))
    }

    pub fn min_angle_deg(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.corners(t);
                angles_deg(a, b, c).into_iter().fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_edge_length(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.diameter(t)).fold(0.0, f64::max)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.area(t)).sum()
    }

    /// Tag lookup for boundary edges keyed by sorted vertex pair.
    pub fn boundary_tags(&self) -> HashMap<(usize, usize), BoundaryTag> {
        self.boundary_edges
            .iter()
            .map(|e| (edge_key(e.vertices[0], e.vertices[1]), e.tag))
            .collect()
    }

    /// All edges in first-seen order with their neighbouring triangles.
    pub fn edges(&self) -> Vec<Edge> {
        let tags = self.boundary_tags();
        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = edge_key(a, b);
                match index.get(&key) {
                    Some(&e) => {
                        let slot = &mut edges[e].triangles;
                        if slot[1].is_none() {
                            slot[1] = Some(t);
                        }
                    }
                    None => {
                        index.insert(key, edges.len());
                        edges.push(Edge {
                            vertices: [key.0, key.1],
                            triangles: [Some(t), None],
                            tag: tags.get(&key).copied(),
                        });
                    }
                }
            }
        }
        edges
    }

    /// Vertices carrying a boundary edge with the given tag, sorted and unique.
    pub fn vertices_on(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .boundary_edges
            .iter()
            .filter(|e| e.tag == tag)
            .flat_map(|e| e.vertices)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Newest-vertex bisection of the marked triangles plus the closure needed
    /// for conformity and for mirror-image vertex sets on x = 0 and x = period.
    pub fn bisect(&self, marks: &MarkSet) -> Mesh {
        let mut edge_id: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edge_vertices: Vec<[usize; 2]> = Vec::new();
        let mut edge_tris: Vec<Vec<usize>> = Vec::new();
        let mut tri_edges = Vec::with_capacity(self.triangles.len());
        for (t, tri) in self.triangles.iter().enumerate() {
            let mut ids = [0usize; 3];
            for k in 0..3 {
                let key = edge_key(tri[k], tri[(k + 1) % 3]);
                let id = *edge_id.entry(key).or_insert_with(|| {
                    edge_vertices.push([key.0, key.1]);
                    edge_tris.push(Vec::new());
                    edge_vertices.len() - 1
                });
                edge_tris[id].push(t);
                ids[k] = id;
            }
            // ids[0] is the refinement edge (t0, t1)
            tri_edges.push(ids);
        }

        let partner: HashMap<usize, usize> = self
            .periodic_pairs
            .iter()
            .flat_map(|&(l, r)| [(l, r), (r, l)])
            .collect();
        let mut edge_partner: HashMap<usize, usize> = HashMap::new();
        for e in self.boundary_edges.iter().filter(|e| e.tag == BoundaryTag::Left) {
            let [u, v] = e.vertices;
            if let (Some(&pu), Some(&pv)) = (partner.get(&u), partner.get(&v)) {
                if let (Some(&l), Some(&r)) = (edge_id.get(&edge_key(u, v)), edge_id.get(&edge_key(pu, pv))) {
                    edge_partner.insert(l, r);
                    edge_partner.insert(r, l);
                }
            }
        }

        let mut marked = vec![false; edge_vertices.len()];
        let mut queue = Vec::new();
        for &t in &marks.0 {
            let e = tri_edges[t][0];
            if !marked[e] {
                marked[e] = true;
                queue.push(e);
            }
        }
        while let Some(e) = queue.pop() {
            for &t in &edge_tris[e] {
                let r = tri_edges[t][0];
                if !marked[r] {
                    marked[r] = true;
                    queue.push(r);
                }
            }
            if let Some(&p) = edge_partner.get(&e) {
                if !marked[p] {
                    marked[p] = true;
                    queue.push(p);
                }
            }
        }

        let tags = self.boundary_tags();
        let mut vertices = self.vertices.clone();
        let mut midpoint = vec![usize::MAX; edge_vertices.len()];
        let mut new_pairs = Vec::new();
        for e in 0..edge_vertices.len() {
            if !marked[e] || midpoint[e] != usize::MAX {
                continue;
            }
            let [u, v] = edge_vertices[e];
            let (pu, pv) = (vertices[u], vertices[v]);
            let mut mid = [0.5 * (pu[0] + pv[0]), 0.5 * (pu[1] + pv[1])];
            let tag = tags.get(&(u, v)).copied();
            match tag {
                Some(BoundaryTag::Left) => mid[0] = 0.0,
                Some(BoundaryTag::Right) => mid[0] = self.period,
                Some(BoundaryTag::Top) => mid[1] = self.top,
                _ => {}
            }
            midpoint[e] = vertices.len();
            vertices.push(mid);
            if let (Some(&p), Some(BoundaryTag::Left | BoundaryTag::Right)) = (edge_partner.get(&e), tag) {
                // mirror vertex copies the y-coordinate exactly
                let x = if tag == Some(BoundaryTag::Left) { self.period } else { 0.0 };
                midpoint[p] = vertices.len();
                vertices.push([x, mid[1]]);
                if tag == Some(BoundaryTag::Left) {
                    new_pairs.push((midpoint[e], midpoint[p]));
                } else {
                    new_pairs.push((midpoint[p], midpoint[e]));
                }
            }
        }

        let mut triangles = Vec::with_capacity(self.triangles.len() * 2);
        let mut parents = Vec::with_capacity(self.triangles.len() * 2);
        for (t, &[a, b, c]) in self.triangles.iter().enumerate() {
            let [e_ab, e_bc, e_ca] = tri_edges[t];
            if !marked[e_ab] {
                triangles.push([a, b, c]);
                parents.push(Some(t));
                continue;
            }
            let m = midpoint[e_ab];
            if marked[e_ca] {
                let m1 = midpoint[e_ca];
                triangles.push([m, c, m1]);
                triangles.push([a, m, m1]);
                parents.extend([Some(t), Some(t)]);
            } else {
                triangles.push([c, a, m]);
                parents.push(Some(t));
            }
            if marked[e_bc] {
                let m2 = midpoint[e_bc];
                triangles.push([m, b, m2]);
                triangles.push([c, m, m2]);
                parents.extend([Some(t), Some(t)]);
            } else {
                triangles.push([b, c, m]);
                parents.push(Some(t));
            }
        }

        let mut boundary_edges = Vec::with_capacity(self.boundary_edges.len());
        for be in &self.boundary_edges {
            let [u, v] = be.vertices;
            let e = edge_id[&edge_key(u, v)];
            if marked[e] {
                let m = midpoint[e];
                boundary_edges.push(BoundaryEdge { vertices: [u, m], tag: be.tag });
                boundary_edges.push(BoundaryEdge { vertices: [m, v], tag: be.tag });
            } else {
                boundary_edges.push(*be);
            }
        }
        let mut periodic_pairs = self.periodic_pairs.clone();
        periodic_pairs.extend(new_pairs);

        Mesh {
            vertices,
            triangles,
            boundary_edges,
            periodic_pairs,
            parents,
            period: self.period,
            top: self.top,
            min_angle_floor: self.min_angle_floor,
        }
    }

    /// Refines every triangle once.
    pub fn bisect_all(&self) -> Mesh {
        self.bisect(&MarkSet((0..self.triangles.len()).collect()))
    }

    /// Checks all structural invariants; empty result means valid.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let nv = self.vertices.len();

        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                out.push(Diagnostic::new(DiagnosticKind::BadVertexIndex, t, "vertex index out of range"));
                continue;
            }
            let area = self.area(t);
            if !(area > 0.0) {
                out.push(Diagnostic::new(
                    DiagnosticKind::NonPositiveArea,
                    t,
                    format!("triangle {t} has non-positive area {area:e}"),
                ));
            }
            let [a, b, c] = self.corners(t);
            let min_angle = angles_deg(a, b, c).into_iter().fold(f64::INFINITY, f64::min);
            if min_angle < self.min_angle_floor {
                out.push(Diagnostic::new(
                    DiagnosticKind::SmallAngle,
                    t,
                    format!("triangle {t} has angle {min_angle:.3}° below {}°", self.min_angle_floor),
                ));
            }
        }
        if !out.is_empty() && out.iter().any(|d| d.kind == DiagnosticKind::BadVertexIndex) {
            return out;
        }

        let tags = self.boundary_tags();
        let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                *counts.entry(edge_key(tri[k], tri[(k + 1) % 3])).or_default() += 1;
            }
        }
        let mut keys: Vec<_> = counts.iter().collect();
        keys.sort();
        for (&(u, v), &count) in keys {
            let boundary = tags.contains_key(&(u, v));
            if count > 2 || (count == 2 && boundary) || (count == 1 && !boundary) {
                out.push(Diagnostic::new(
                    DiagnosticKind::NonConforming,
                    u,
                    format!("edge ({u}, {v}) shared by {count} triangles (boundary: {boundary})"),
                ));
            }
        }
        for (k, be) in self.boundary_edges.iter().enumerate() {
            if !counts.contains_key(&edge_key(be.vertices[0], be.vertices[1])) {
                out.push(Diagnostic::new(
                    DiagnosticKind::NonConforming,
                    k,
                    format!("boundary edge {k} belongs to no triangle"),
                ));
            }
            let on_line = |v: usize| {
                let p = self.vertices[v];
                match be.tag {
                    BoundaryTag::Left => p[0] == 0.0,
                    BoundaryTag::Right => p[0] == self.period,
                    BoundaryTag::Top => p[1] == self.top,
                    BoundaryTag::Surface => true,
                }
            };
            if !on_line(be.vertices[0]) || !on_line(be.vertices[1]) {
                out.push(Diagnostic::new(
                    DiagnosticKind::MisplacedBoundary,
                    k,
                    format!("boundary edge {k} ({:?}) is off its boundary line", be.tag),
                ));
            }
        }

        for (k, &(l, r)) in self.periodic_pairs.iter().enumerate() {
            let (pl, pr) = (self.vertices[l], self.vertices[r]);
            if pl[0] != 0.0 || pr[0] != self.period || pl[1] != pr[1] {
                out.push(Diagnostic::new(
                    DiagnosticKind::PeriodicMismatch,
                    k,
                    format!("periodic pair {k} ({l}, {r}) is not mirrored: {pl:?} vs {pr:?}"),
                ));
            }
        }
        let paired_left: std::collections::HashSet<usize> = self.periodic_pairs.iter().map(|p| p.0).collect();
        let paired_right: std::collections::HashSet<usize> = self.periodic_pairs.iter().map(|p| p.1).collect();
        let left_orphans: Vec<usize> = self
            .vertices_on(BoundaryTag::Left)
            .into_iter()
            .filter(|v| !paired_left.contains(v))
            .collect();
        for &v in &left_orphans {
            out.push(Diagnostic::new(
                DiagnosticKind::UnpairedVertex,
                v,
                format!("left boundary vertex {v} at y = {} has no periodic partner", self.vertices[v][1]),
            ));
        }
        for v in self.vertices_on(BoundaryTag::Right) {
            if paired_right.contains(&v) {
                continue;
            }
            let y = self.vertices[v][1];
            if left_orphans.iter().any(|&l| self.vertices[l][1] == y) {
                continue;
            }
            out.push(Diagnostic::new(
                DiagnosticKind::UnpairedVertex,
                v,
                format!("right boundary vertex {v} at y = {y} has no periodic partner"),
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticKind {
    BadVertexIndex,
    NonPositiveArea,
    SmallAngle,
    NonConforming,
    MisplacedBoundary,
    PeriodicMismatch,
    UnpairedVertex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    /// Index of the offending triangle, edge, pair or vertex depending on `kind`.
    pub entity: usize,
    pub message: String,
}

impl Diagnostic {
    fn new(kind: DiagnosticKind, entity: usize, message: impl Into<String>) -> Self {
        Self {
            kind,
            entity,
            message: message.into(),
        }
    }
}

/// Structured initial mesh whose longest edge does not exceed `h0`.
pub fn build_initial_mesh(profile: &SurfaceProfile, b: f64, h0: f64) -> Result<Mesh> {
    if !(h0 > 0.0) {
        return Err(Error::InvalidParameter(format!("h0 must be positive, got {h0}")));
    }
    profile.check_height(b)?;
    let bp = profile.breakpoints();
    let height = bp.iter().map(|p| b - p[1]).fold(0.0, f64::max);
    let mut spacing = h0 / std::f64::consts::SQRT_2;
    loop {
        let columns: Vec<usize> = bp
            .windows(2)
            .map(|w| ((w[1][0] - w[0][0]) / spacing - 1e-9).ceil().max(1.0) as usize)
            .collect();
        let rows = (height / spacing - 1e-9).ceil().max(1.0) as usize;
        let mesh = Mesh::structured(profile, b, &columns, rows)?;
        if mesh.max_edge_length() <= h0 {
            return Ok(mesh);
        }
        spacing *= 0.9;
        if spacing < 1e-6 * h0 {
            return Err(Error::InvalidGeometry(
                "could not meet the target edge length with a structured grid".into(),
            ));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat() -> SurfaceProfile {
        SurfaceProfile::flat(0.5, 0.0).unwrap()
    }

    fn mirror_sets(m: &Mesh) -> (Vec<f64>, Vec<f64>) {
        let ys = |tag| {
            let mut y: Vec<f64> = m.vertices_on(tag).iter().map(|&v| m.vertices()[v][1]).collect();
            y.sort_by(f64::total_cmp);
            y
        };
        (ys(BoundaryTag::Left), ys(BoundaryTag::Right))
    }

    #[test]
    fn profile_validation() {
        assert!(SurfaceProfile::new(vec![[0.0, 0.0], [0.3, 0.1], [0.2, 0.0], [0.5, 0.0]]).is_err());
        assert!(SurfaceProfile::new(vec![[0.0, 0.0], [0.5, 0.1]]).is_err());
        assert!(SurfaceProfile::new(vec![[0.1, 0.0], [0.5, 0.0]]).is_err());
        let p = SurfaceProfile::new(vec![[0.0, 0.0], [0.25, 0.1], [0.5, 0.0]]).unwrap();
        assert!(p.check_height(0.1).is_err());
        assert!(build_initial_mesh(&p, 0.05, 0.1).is_err());
        assert!((p.area_below(0.25) - (0.125 - 0.025)).abs() < 1e-15);
    }

    #[test]
    fn coarse_flat_mesh() {
        let m = build_initial_mesh(&flat(), 0.25, 0.25).unwrap();
        assert!(m.triangles().len() >= 4);
        assert!(m.validate().is_empty(), "{:?}", m.validate());
        assert!((m.total_area() - 0.125).abs() < 1e-15);
        // top and bottom corners are always paired
        let corners = m
            .periodic_pairs()
            .iter()
            .filter(|&&(l, _)| {
                let y = m.vertices()[l][1];
                y == 0.0 || y == 0.25
            })
            .count();
        assert_eq!(corners, 2);
    }

    #[test]
    fn two_by_one_rectangle_has_two_pairs() {
        let m = Mesh::rectangle(0.5, 0.25, 2, 1).unwrap();
        assert_eq!(m.triangles().len(), 4);
        assert_eq!(m.periodic_pairs().len(), 2);
        assert!(m.validate().is_empty());
    }

    #[test]
    fn sawtooth_breakpoints_are_vertices() {
        let p = SurfaceProfile::new(vec![[0.0, 0.0], [0.25, 0.1], [0.5, 0.0]]).unwrap();
        let m = build_initial_mesh(&p, 0.25, 0.05).unwrap();
        for bp in p.breakpoints() {
            assert!(m.vertices().iter().any(|v| v == bp), "breakpoint {bp:?} missing");
        }
        for e in m.boundary_edges().iter().filter(|e| e.tag == BoundaryTag::Surface) {
            for &v in &e.vertices {
                let q = m.vertices()[v];
                assert!((p.eval(q[0]) - q[1]).abs() < 1e-15);
            }
        }
        assert!(m.validate().is_empty(), "{:?}", m.validate());
    }

    #[test]
    fn max_edge_respects_target() {
        let m = build_initial_mesh(&flat(), 0.25, 0.05).unwrap();
        let mut longest: f64 = 0.0;
        for t in m.triangles() {
            for k in 0..3 {
                longest = longest.max(dist(m.vertices()[t[k]], m.vertices()[t[(k + 1) % 3]]));
            }
        }
        assert!(longest <= 0.05);
    }

    #[test]
    fn empty_marks_is_identity() {
        let m = build_initial_mesh(&flat(), 0.25, 0.1).unwrap();
        let r = m.bisect(&MarkSet::default());
        assert_eq!(r.vertices(), m.vertices());
        assert_eq!(r.triangles(), m.triangles());
        assert_eq!(r.boundary_edges(), m.boundary_edges());
    }

    #[test]
    fn left_refinement_is_mirrored_on_right() {
        let m = Mesh::rectangle(0.5, 0.25, 4, 2).unwrap();
        let on_left = |m: &Mesh, t: usize| {
            let [u, v] = m.refinement_edge(t);
            m.vertices()[u][0] == 0.0 && m.vertices()[v][0] == 0.0
        };
        // hypotenuses are the initial refinement edges; one bisection of a
        // left-column triangle exposes a leg on x = 0 as refinement edge
        let t0 = (0..m.triangles().len())
            .find(|&t| m.triangles()[t].iter().filter(|&&v| m.vertices()[v][0] == 0.0).count() == 2)
            .unwrap();
        let m1 = m.bisect(&MarkSet(vec![t0]));
        let t1 = (0..m1.triangles().len()).find(|&t| on_left(&m1, t)).unwrap();
        let before = m1.vertices_on(BoundaryTag::Left).len();
        let r = m1.bisect(&MarkSet(vec![t1]));
        assert_eq!(r.vertices_on(BoundaryTag::Left).len(), before + 1);
        let (l, rr) = mirror_sets(&r);
        assert_eq!(l, rr);
        assert_eq!(r.periodic_pairs().len(), l.len());
        assert!(r.validate().is_empty(), "{:?}", r.validate());
    }

    #[test]
    fn refining_everything_grows_by_two_to_four() {
        let m = Mesh::rectangle(0.5, 0.25, 4, 4).unwrap();
        assert_eq!(m.triangles().len(), 32);
        let angle0 = m.min_angle_deg();
        let r = m.bisect_all();
        let ratio = r.triangles().len() as f64 / 32.0;
        assert!((2.0..=4.0).contains(&ratio), "ratio {ratio}");
        assert!(r.min_angle_deg() >= angle0 - 1e-9);
        assert!(r.validate().is_empty());
        assert_eq!(r.parents().len(), r.triangles().len());
    }

    #[test]
    fn validate_reports_orphan_and_orientation() {
        let m = Mesh::rectangle(0.5, 0.25, 4, 2).unwrap();
        let mut broken = m.clone();
        let (l, _) = broken.periodic_pairs.remove(1);
        let d = broken.validate();
        assert_eq!(d.len(), 1, "{d:?}");
        assert_eq!(d[0].kind, DiagnosticKind::UnpairedVertex);
        assert_eq!(d[0].entity, l);

        let mut flipped = m.clone();
        flipped.triangles[3].swap(0, 1);
        let d = flipped.validate();
        assert_eq!(d.len(), 1, "{d:?}");
        assert_eq!(d[0].kind, DiagnosticKind::NonPositiveArea);
        assert_eq!(d[0].entity, 3);
    }

    #[test]
    fn twelve_rounds_keep_angles() {
        let mut m = build_initial_mesh(&flat(), 0.25, 0.125).unwrap();
        for round in 0..12 {
            // refine the triangles touching the bottom-left corner region
            let marks: Vec<usize> = (0..m.triangles().len())
                .filter(|&t| {
                    let [a, b, c] = m.corners(t);
                    let cx = (a[0] + b[0] + c[0]) / 3.0;
                    let cy = (a[1] + b[1] + c[1]) / 3.0;
                    cx < 0.1 + 0.01 * round as f64 && cy < 0.1
                })
                .collect();
            m = m.bisect(&MarkSet(marks));
            assert!(m.validate().is_empty(), "round {round}: {:?}", m.validate());
        }
        assert!(m.min_angle_deg() >= 15.0);
    }
}
