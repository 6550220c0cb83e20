//! Conforming triangular meshes with tagged boundary facets.
//!
//! A [`Mesh`] is validated once at construction and immutable afterwards.
//! Triangles are stored counter-clockwise and boundary facets are oriented
//! the same way as the edge of the triangle they close, so the outward
//! normal of facet `a -> b` is `(b - a)` rotated by -90 degrees.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    /// No-slip wall, `u = 0`.
    Dirichlet,
    /// Slip wall with Tresca friction, `u.n = 0`.
    Friction,
}

impl BoundaryTag {
    /// Gmsh physical tag convention: 1 = Dirichlet, 2 = Friction.
    pub fn physical_tag(self) -> i64 {
        match self {
            BoundaryTag::Dirichlet => 1,
            BoundaryTag::Friction => 2,
        }
    }

    pub fn from_physical_tag(tag: i64) -> Option<Self> {
        match tag {
            1 => Some(BoundaryTag::Dirichlet),
            2 => Some(BoundaryTag::Friction),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryFacet {
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Bottom, Side::Right, Side::Top, Side::Left];

    pub fn name(self) -> &'static str {
        match self {
            Side::Bottom => "bottom",
            Side::Right => "right",
            Side::Top => "top",
            Side::Left => "left",
        }
    }

    pub fn parse(s: &str) -> Option<Side> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bottom" => Some(Side::Bottom),
            "right" => Some(Side::Right),
            "top" => Some(Side::Top),
            "left" => Some(Side::Left),
            _ => None,
        }
    }
}

/// Boundary tag for each side of a rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SideTags {
    pub bottom: BoundaryTag,
    pub right: BoundaryTag,
    pub top: BoundaryTag,
    pub left: BoundaryTag,
}

impl SideTags {
    pub fn all(tag: BoundaryTag) -> Self {
        SideTags {
            bottom: tag,
            right: tag,
            top: tag,
            left: tag,
        }
    }

    /// Friction on the listed sides, Dirichlet everywhere else.
    pub fn friction_on(sides: &[Side]) -> Self {
        let mut tags = SideTags::all(BoundaryTag::Dirichlet);
        for &side in sides {
            *tags.get_mut(side) = BoundaryTag::Friction;
        }
        tags
    }

    pub fn get(&self, side: Side) -> BoundaryTag {
        match side {
            Side::Bottom => self.bottom,
            Side::Right => self.right,
            Side::Top => self.top,
            Side::Left => self.left,
        }
    }

    fn get_mut(&mut self, side: Side) -> &mut BoundaryTag {
        match side {
            Side::Bottom => &mut self.bottom,
            Side::Right => &mut self.right,
            Side::Top => &mut self.top,
            Side::Left => &mut self.left,
        }
    }

    pub fn friction_sides(&self) -> Vec<Side> {
        Side::ALL
            .into_iter()
            .filter(|&s| self.get(s) == BoundaryTag::Friction)
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_facets: Vec<BoundaryFacet>,
    element_areas: Vec<f64>,
    dirichlet_nodes: Vec<bool>,
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Mesh {
    /// Validates and builds a mesh.
    ///
    /// Triangles must be counter-clockwise. Facets may be given in either
    /// orientation; they are re-oriented to follow their triangle.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>, boundary_facets: Vec<BoundaryFacet>) -> Result<Mesh> {
        let nv = vertices.len();
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("mesh has no triangles".into()));
        }
        let mut used = vec![false; nv];
        let mut element_areas = Vec::with_capacity(triangles.len());
        // sorted edge -> (incidence count, orientation within its triangle)
        let mut edges: HashMap<(usize, usize), (usize, [usize; 2])> = HashMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= nv {
                    return Err(Error::InvalidMesh(format!(
                        "triangle {t} references vertex {v} but only {nv} vertices exist"
                    )));
                }
                used[v] = true;
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if !(area > 0.0) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} has nonpositive signed area {area:e}"
                )));
            }
            element_areas.push(area);
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let entry = edges.entry(edge_key(a, b)).or_insert((0, [a, b]));
                entry.0 += 1;
            }
        }
        if let Some(v) = used.iter().position(|&u| !u) {
            return Err(Error::InvalidMesh(format!("dangling vertex {v}")));
        }
        if let Some((e, _)) = edges.iter().find(|(_, (count, _))| *count > 2) {
            return Err(Error::InvalidMesh(format!(
                "edge ({}, {}) is shared by more than two triangles",
                e.0, e.1
            )));
        }

        let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
        let mut oriented = Vec::with_capacity(boundary_facets.len());
        for (i, facet) in boundary_facets.iter().enumerate() {
            let [a, b] = facet.vertices;
            let key = edge_key(a, b);
            match edges.get(&key) {
                Some((1, orient)) => {
                    if let Some(prev) = seen.insert(key, i) {
                        return Err(Error::InvalidMesh(format!(
                            "boundary facets {prev} and {i} both tag edge ({a}, {b})"
                        )));
                    }
                    oriented.push(BoundaryFacet {
                        vertices: *orient,
                        tag: facet.tag,
                    });
                }
                Some(_) => return Err(Error::InvalidMesh(format!("facet {i} ({a}, {b}) is an interior edge"))),
                None => {
                    return Err(Error::InvalidMesh(format!(
                        "facet {i} ({a}, {b}) is not an edge of any triangle"
                    )))
                }
            }
        }
        let mut untagged: Vec<_> = edges
            .iter()
            .filter(|(k, (count, _))| *count == 1 && !seen.contains_key(k))
            .map(|(k, _)| *k)
            .collect();
        if !untagged.is_empty() {
            untagged.sort_unstable();
            let (a, b) = untagged[0];
            return Err(Error::InvalidMesh(format!(
                "{} boundary edge(s) carry no tag, first is ({a}, {b})",
                untagged.len()
            )));
        }

        let mut dirichlet_nodes = vec![false; nv];
        let mut dirichlet_length = 0.0;
        for f in oriented.iter().filter(|f| f.tag == BoundaryTag::Dirichlet) {
            dirichlet_nodes[f.vertices[0]] = true;
            dirichlet_nodes[f.vertices[1]] = true;
            dirichlet_length += dist(vertices[f.vertices[0]], vertices[f.vertices[1]]);
        }
        if !(dirichlet_length > 0.0) {
            return Err(Error::InvalidMesh(
                "Dirichlet boundary is empty; at least one no-slip facet is required".into(),
            ));
        }

        Ok(Mesh {
            vertices,
            triangles,
            boundary_facets: oriented,
            element_areas,
            dirichlet_nodes,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.boundary_facets
    }

    pub fn element_areas(&self) -> &[f64] {
        &self.element_areas
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Number of velocity unknowns before constraints (two per vertex).
    pub fn num_velocity_dofs(&self) -> usize {
        2 * self.vertices.len()
    }

    pub fn total_area(&self) -> f64 {
        self.element_areas.iter().sum()
    }

    /// Nodes touching at least one Dirichlet facet. Such nodes are fully
    /// clamped even if they also touch a friction facet.
    pub fn dirichlet_nodes(&self) -> &[bool] {
        &self.dirichlet_nodes
    }

    pub fn facet_length(&self, facet: &BoundaryFacet) -> f64 {
        dist(self.vertices[facet.vertices[0]], self.vertices[facet.vertices[1]])
    }

    /// Unit outward normal of a boundary facet.
    pub fn facet_normal(&self, facet: &BoundaryFacet) -> [f64; 2] {
        let a = self.vertices[facet.vertices[0]];
        let b = self.vertices[facet.vertices[1]];
        let len = dist(a, b);
        [(b[1] - a[1]) / len, -(b[0] - a[0]) / len]
    }

    pub fn boundary_length(&self, tag: Option<BoundaryTag>) -> f64 {
        self.boundary_facets
            .iter()
            .filter(|f| tag.is_none_or(|t| f.tag == t))
            .map(|f| self.facet_length(f))
            .sum()
    }

    pub fn has_friction_boundary(&self) -> bool {
        self.boundary_facets.iter().any(|f| f.tag == BoundaryTag::Friction)
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        (lo, hi)
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        [(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0]
    }

    /// Gradients of the three P1 basis functions on triangle `t`.
    pub fn basis_gradients(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        let two_area = 2.0 * self.element_areas[t];
        [
            [(pb[1] - pc[1]) / two_area, (pc[0] - pb[0]) / two_area],
            [(pc[1] - pa[1]) / two_area, (pa[0] - pc[0]) / two_area],
            [(pa[1] - pb[1]) / two_area, (pb[0] - pa[0]) / two_area],
        ]
    }

    /// Same mesh with every friction facet re-tagged as Dirichlet.
    pub fn with_friction_as_dirichlet(&self) -> Mesh {
        let facets = self
            .boundary_facets
            .iter()
            .map(|f| BoundaryFacet {
                vertices: f.vertices,
                tag: BoundaryTag::Dirichlet,
            })
            .collect();
        Mesh::new(self.vertices.clone(), self.triangles.clone(), facets)
            .expect("re-tagging a valid mesh keeps it valid")
    }
}

fn dist(a: Point, b: Point) -> f64 {
    (b[0] - a[0]).hypot(b[1] - a[1])
}

/// Structured rectangle `[0, width] x [0, height]` with alternating diagonals.
pub fn generate_rectangle(nx: usize, ny: usize, width: f64, height: f64, tags: SideTags) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::invalid(format!(
            "cell counts must be >= 1, got nx={nx}, ny={ny}"
        )));
    }
    if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
        return Err(Error::invalid(format!(
            "rectangle dimensions must be positive, got {width} x {height}"
        )));
    }
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([width * i as f64 / nx as f64, height * j as f64 / ny as f64]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            if (i + j) % 2 == 0 {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }
    let mut facets = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        facets.push(BoundaryFacet {
            vertices: [idx(i, 0), idx(i + 1, 0)],
            tag: tags.bottom,
        });
    }
    for j in 0..ny {
        facets.push(BoundaryFacet {
            vertices: [idx(nx, j), idx(nx, j + 1)],
            tag: tags.right,
        });
    }
    for i in (0..nx).rev() {
        facets.push(BoundaryFacet {
            vertices: [idx(i + 1, ny), idx(i, ny)],
            tag: tags.top,
        });
    }
    for j in (0..ny).rev() {
        facets.push(BoundaryFacet {
            vertices: [idx(0, j + 1), idx(0, j)],
            tag: tags.left,
        });
    }
    Mesh::new(vertices, triangles, facets)
}

/// Local frame at a node of the friction boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryFrame {
    pub node: usize,
    /// Unit outward normal.
    pub normal: [f64; 2],
    /// Unit tangent, the normal rotated by +90 degrees.
    pub tangent: [f64; 2],
    /// Lumped boundary measure: half the summed length of incident friction facets.
    pub weight: f64,
}

/// One frame per node incident to a friction facet, ordered by node index.
///
/// Nodes that also touch a Dirichlet facet still get a frame; they are
/// clamped later by the constraint handling.
pub fn boundary_frames(mesh: &Mesh) -> Vec<BoundaryFrame> {
    let mut acc: Vec<Option<([f64; 2], f64)>> = vec![None; mesh.num_vertices()];
    for facet in mesh.boundary_facets().iter().filter(|f| f.tag == BoundaryTag::Friction) {
        let n = mesh.facet_normal(facet);
        let half = 0.5 * mesh.facet_length(facet);
        for &v in &facet.vertices {
            let slot = acc[v].get_or_insert(([0.0, 0.0], 0.0));
            slot.0[0] += n[0];
            slot.0[1] += n[1];
            slot.1 += half;
        }
    }
    acc.into_iter()
        .enumerate()
        .filter_map(|(node, slot)| {
            let (sum, weight) = slot?;
            let len = sum[0].hypot(sum[1]);
            let normal = [sum[0] / len, sum[1] / len];
            Some(BoundaryFrame {
                node,
                normal,
                tangent: [-normal[1], normal[0]],
                weight,
            })
        })
        .collect()
}

/// Reads an ASCII Gmsh 2.2 file.
pub fn load_msh(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_msh(&text)
}

fn msh_err(line: usize, message: impl Into<String>) -> Error {
    Error::MshParse {
        line,
        message: message.into(),
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next_nonempty(&mut self) -> Option<(usize, &'a str)> {
        for (i, l) in self.inner.by_ref() {
            self.last = i + 1;
            let l = l.trim();
            if !l.is_empty() {
                return Some((i + 1, l));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.next_nonempty()
            .ok_or_else(|| msh_err(self.last, format!("unexpected end of file, expected {what}")))
    }
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| msh_err(line, format!("cannot parse {what}")))
}

/// Parses the text of an ASCII Gmsh 2.2 file.
///
/// Only 2-node lines (type 1) and 3-node triangles (type 2) are used; point
/// elements (type 15) are skipped. The first tag of a line element is its
/// physical tag: 1 = Dirichlet, 2 = Friction.
pub fn parse_msh(text: &str) -> Result<Mesh> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let mut version_ok = false;
    let mut node_ids: HashMap<i64, usize> = HashMap::new();
    let mut vertices: Vec<Point> = Vec::new();
    let mut node_gmsh_ids: Vec<i64> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    let mut facets: Vec<BoundaryFacet> = Vec::new();
    let mut facet_ids: Vec<i64> = Vec::new();

    while let Some((ln, line)) = lines.next_nonempty() {
        match line {
            "$MeshFormat" => {
                let (ln, l) = lines.expect("format line")?;
                let mut tok = l.split_whitespace();
                let version = tok.next().unwrap_or("");
                if version != "2.2" {
                    return Err(msh_err(ln, format!("unsupported version {version}")));
                }
                let file_type: i64 = parse_num(tok.next(), ln, "file type")?;
                if file_type != 0 {
                    return Err(msh_err(ln, "binary msh files are not supported"));
                }
                let (ln, end) = lines.expect("$EndMeshFormat")?;
                if end != "$EndMeshFormat" {
                    return Err(msh_err(ln, "expected $EndMeshFormat"));
                }
                version_ok = true;
            }
            "$Nodes" => {
                if !version_ok {
                    return Err(msh_err(ln, "$Nodes before $MeshFormat"));
                }
                let (ln, l) = lines.expect("node count")?;
                let count: usize = parse_num(Some(l), ln, "node count")?;
                for _ in 0..count {
                    let (ln, l) = lines.expect("node")?;
                    let mut tok = l.split_whitespace();
                    let id: i64 = parse_num(tok.next(), ln, "node id")?;
                    let x: f64 = parse_num(tok.next(), ln, "node x")?;
                    let y: f64 = parse_num(tok.next(), ln, "node y")?;
                    if node_ids.insert(id, vertices.len()).is_some() {
                        return Err(msh_err(ln, format!("duplicate node {id}")));
                    }
                    vertices.push([x, y]);
                    node_gmsh_ids.push(id);
                }
                let (ln, end) = lines.expect("$EndNodes")?;
                if end != "$EndNodes" {
                    return Err(msh_err(ln, "expected $EndNodes"));
                }
            }
            "$Elements" => {
                if !version_ok {
                    return Err(msh_err(ln, "$Elements before $MeshFormat"));
                }
                let (ln, l) = lines.expect("element count")?;
                let count: usize = parse_num(Some(l), ln, "element count")?;
                for _ in 0..count {
                    let (ln, l) = lines.expect("element")?;
                    let tok: Vec<&str> = l.split_whitespace().collect();
                    let id: i64 = parse_num(tok.first().copied(), ln, "element id")?;
                    let ty: i64 = parse_num(tok.get(1).copied(), ln, "element type")?;
                    let ntags: usize = parse_num(tok.get(2).copied(), ln, "tag count")?;
                    let tags: Vec<i64> = tok
                        .get(3..3 + ntags)
                        .ok_or_else(|| msh_err(ln, format!("element {id}: missing tags")))?
                        .iter()
                        .map(|t| parse_num(Some(t), ln, "tag"))
                        .collect::<Result<_>>()?;
                    let node_tok = &tok[3 + ntags..];
                    let lookup = |t: &str| -> Result<usize> {
                        let gid: i64 = parse_num(Some(t), ln, "element node")?;
                        node_ids
                            .get(&gid)
                            .copied()
                            .ok_or_else(|| msh_err(ln, format!("element {id} references unknown node {gid}")))
                    };
                    let expect_nodes = |n: usize| -> Result<()> {
                        if node_tok.len() != n {
                            return Err(msh_err(
                                ln,
                                format!("element {id}: expected {n} nodes, found {}", node_tok.len()),
                            ));
                        }
                        Ok(())
                    };
                    match ty {
                        1 => {
                            expect_nodes(2)?;
                            let phys = *tags
                                .first()
                                .ok_or_else(|| msh_err(ln, format!("untagged boundary line element {id}")))?;
                            let tag = BoundaryTag::from_physical_tag(phys).ok_or_else(|| {
                                msh_err(ln, format!("unknown physical tag {phys} on line element {id}"))
                            })?;
                            facets.push(BoundaryFacet {
                                vertices: [lookup(node_tok[0])?, lookup(node_tok[1])?],
                                tag,
                            });
                            facet_ids.push(id);
                        }
                        2 => {
                            expect_nodes(3)?;
                            let mut tri = [lookup(node_tok[0])?, lookup(node_tok[1])?, lookup(node_tok[2])?];
                            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
                            if area < 0.0 {
                                tri.swap(1, 2);
                            }
                            triangles.push(tri);
                        }
                        15 => {}
                        other => return Err(msh_err(ln, format!("element {id} has unsupported type {other}"))),
                    }
                }
                let (ln, end) = lines.expect("$EndElements")?;
                if end != "$EndElements" {
                    return Err(msh_err(ln, "expected $EndElements"));
                }
            }
            section if section.starts_with('$') => {
                let end = format!("$End{}", &section[1..]);
                loop {
                    let (_, l) = lines.expect(&end)?;
                    if l == end {
                        break;
                    }
                }
            }
            other => return Err(msh_err(ln, format!("unexpected content `{other}`"))),
        }
    }
    if !version_ok {
        return Err(msh_err(lines.last, "missing $MeshFormat section"));
    }
    let mut used = vec![false; vertices.len()];
    for tri in &triangles {
        for &v in tri {
            used[v] = true;
        }
    }
    if let Some(v) = used.iter().position(|&u| !u) {
        return Err(msh_err(
            lines.last,
            format!("dangling vertex: node {} belongs to no triangle", node_gmsh_ids[v]),
        ));
    }
    Mesh::new(vertices, triangles, facets).map_err(|e| match e {
        Error::InvalidMesh(m) => msh_err(lines.last, m),
        other => other,
    })
}

/// Serializes a mesh as ASCII Gmsh 2.2 (1-based ids, two tags per element).
pub fn to_msh_string(mesh: &Mesh) -> String {
    let mut s = String::new();
    s.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n");
    let _ = writeln!(s, "{}", mesh.num_vertices());
    for (i, v) in mesh.vertices().iter().enumerate() {
        let _ = writeln!(s, "{} {} {} 0", i + 1, v[0], v[1]);
    }
    s.push_str("$EndNodes\n$Elements\n");
    let _ = writeln!(s, "{}", mesh.boundary_facets().len() + mesh.num_triangles());
    let mut id = 1;
    for f in mesh.boundary_facets() {
        let tag = f.tag.physical_tag();
        let _ = writeln!(s, "{id} 1 2 {tag} {tag} {} {}", f.vertices[0] + 1, f.vertices[1] + 1);
        id += 1;
    }
    for t in mesh.triangles() {
        let _ = writeln!(s, "{id} 2 2 0 1 {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        id += 1;
    }
    s.push_str("$EndElements\n");
    s
}

pub fn save_msh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    crate::io::write_atomic(path.as_ref(), to_msh_string(mesh).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize, tags: SideTags) -> Mesh {
        generate_rectangle(n, n, 1.0, 1.0, tags).unwrap()
    }

    #[test]
    fn smallest_rectangle() {
        let m = unit(1, SideTags::all(BoundaryTag::Dirichlet));
        assert_eq!(m.num_vertices(), 4);
        assert_eq!(m.num_triangles(), 2);
        assert_eq!(m.boundary_facets().len(), 4);
        assert!(m.boundary_facets().iter().all(|f| f.tag == BoundaryTag::Dirichlet));
    }

    #[test]
    fn counts_and_friction_facets() {
        let m = unit(2, SideTags::friction_on(&[Side::Bottom]));
        assert_eq!(m.num_vertices(), 9);
        assert_eq!(m.num_triangles(), 8);
        let fr: Vec<_> = m
            .boundary_facets()
            .iter()
            .filter(|f| f.tag == BoundaryTag::Friction)
            .collect();
        assert_eq!(fr.len(), 2);
        for f in fr {
            for &v in &f.vertices {
                assert_eq!(m.vertices()[v][1], 0.0);
            }
        }
    }

    #[test]
    fn areas_partition_domain() {
        let m = generate_rectangle(4, 4, 1.0, 1.0, SideTags::all(BoundaryTag::Dirichlet)).unwrap();
        assert!((m.total_area() - 1.0).abs() < 1e-12);
        let m = generate_rectangle(3, 5, 2.0, 0.7, SideTags::all(BoundaryTag::Dirichlet)).unwrap();
        assert!((m.total_area() - 1.4).abs() < 1e-12);
        assert!(m.element_areas().iter().all(|&a| a > 0.0));
    }

    #[test]
    fn refinement_preserves_boundary_length() {
        let tags = SideTags::friction_on(&[Side::Bottom, Side::Top]);
        let coarse = generate_rectangle(3, 2, 1.5, 0.5, tags).unwrap();
        let fine = generate_rectangle(6, 4, 1.5, 0.5, tags).unwrap();
        assert!((coarse.boundary_length(None) - 4.0).abs() < 1e-12);
        assert!((coarse.boundary_length(None) - fine.boundary_length(None)).abs() < 1e-12);
        assert!(
            (coarse.boundary_length(Some(BoundaryTag::Friction)) - fine.boundary_length(Some(BoundaryTag::Friction)))
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn invalid_rectangle_arguments() {
        let t = SideTags::all(BoundaryTag::Dirichlet);
        assert!(matches!(
            generate_rectangle(0, 1, 1.0, 1.0, t),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            generate_rectangle(1, 1, -1.0, 1.0, t),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            generate_rectangle(1, 1, 1.0, 0.0, t),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn empty_dirichlet_rejected() {
        let r = generate_rectangle(2, 2, 1.0, 1.0, SideTags::all(BoundaryTag::Friction));
        assert!(matches!(r, Err(Error::InvalidMesh(_))));
    }

    #[test]
    fn mesh_validation_errors() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let facets = |tag| {
            vec![
                BoundaryFacet { vertices: [0, 1], tag },
                BoundaryFacet { vertices: [1, 2], tag },
                BoundaryFacet { vertices: [2, 0], tag },
            ]
        };
        assert!(Mesh::new(v.clone(), vec![[0, 1, 2]], facets(BoundaryTag::Dirichlet)).is_ok());
        // clockwise
        assert!(Mesh::new(v.clone(), vec![[0, 2, 1]], facets(BoundaryTag::Dirichlet)).is_err());
        // missing a facet
        let mut f = facets(BoundaryTag::Dirichlet);
        f.pop();
        assert!(Mesh::new(v.clone(), vec![[0, 1, 2]], f).is_err());
        // duplicate facet
        let mut f = facets(BoundaryTag::Dirichlet);
        f.push(BoundaryFacet {
            vertices: [1, 0],
            tag: BoundaryTag::Friction,
        });
        assert!(Mesh::new(v.clone(), vec![[0, 1, 2]], f).is_err());
        // dangling vertex
        let mut v4 = v.clone();
        v4.push([5.0, 5.0]);
        assert!(Mesh::new(v4, vec![[0, 1, 2]], facets(BoundaryTag::Dirichlet)).is_err());
    }

    #[test]
    fn facets_are_oriented_outward() {
        let m = unit(3, SideTags::all(BoundaryTag::Dirichlet));
        let c = [0.5, 0.5];
        for f in m.boundary_facets() {
            let n = m.facet_normal(f);
            let p = m.vertices()[f.vertices[0]];
            assert!(n[0] * (p[0] - c[0]) + n[1] * (p[1] - c[1]) > 0.0);
        }
    }

    #[test]
    fn flat_bottom_frames() {
        let m = unit(2, SideTags::friction_on(&[Side::Bottom]));
        let frames = boundary_frames(&m);
        assert_eq!(frames.len(), 3);
        for fr in &frames {
            assert_eq!(fr.normal, [0.0, -1.0]);
            assert_eq!(fr.tangent, [1.0, 0.0]);
        }
        let w: Vec<f64> = frames.iter().map(|f| f.weight).collect();
        assert_eq!(w, vec![0.25, 0.5, 0.25]);
    }

    #[test]
    fn corner_frame_is_normalized_average() {
        let m = unit(2, SideTags::friction_on(&[Side::Bottom, Side::Right]));
        let frames = boundary_frames(&m);
        let corner = frames.iter().find(|f| f.node == 2).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((corner.normal[0] - s).abs() < 1e-15);
        assert!((corner.normal[1] + s).abs() < 1e-15);
        assert!((corner.weight - 0.5).abs() < 1e-15);
        for f in &frames {
            let nn = f.normal[0].hypot(f.normal[1]);
            let tt = f.tangent[0].hypot(f.tangent[1]);
            let dot = f.normal[0] * f.tangent[0] + f.normal[1] * f.tangent[1];
            assert!((nn - 1.0).abs() < 1e-12 && (tt - 1.0).abs() < 1e-12 && dot.abs() < 1e-12);
        }
    }

    const TWO_TRIANGLES: &str = "$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
4
10 0 0 0
20 1 0 0
30 1 1 0
40 0 1 0
$EndNodes
$Elements
6
1 1 2 2 1 10 20
2 1 2 1 2 20 30
3 1 2 1 3 30 40
4 1 2 1 4 40 10
5 2 2 0 1 10 20 30
6 2 2 0 1 10 40 30
$EndElements
";

    #[test]
    fn hand_written_square() {
        let m = parse_msh(TWO_TRIANGLES).unwrap();
        assert_eq!(m.num_vertices(), 4);
        assert_eq!(m.num_triangles(), 2);
        // the second triangle is clockwise in the file and gets flipped
        assert!((m.total_area() - 1.0).abs() < 1e-15);
        let frames = boundary_frames(&m);
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[0].normal, [0.0, -1.0]);
    }

    #[test]
    fn unknown_physical_tag() {
        let bad = TWO_TRIANGLES.replace("2 1 2 1 2 20 30", "2 1 2 3 2 20 30");
        let err = parse_msh(&bad).unwrap_err().to_string();
        assert!(err.contains("unknown physical tag"), "{err}");
        assert!(err.contains("line 14"), "{err}");
    }

    #[test]
    fn untagged_line_and_version() {
        let bad = TWO_TRIANGLES.replace("2 1 2 1 2 20 30", "2 1 0 20 30");
        let err = parse_msh(&bad).unwrap_err().to_string();
        assert!(err.contains("untagged boundary line element 2"), "{err}");

        let bad = TWO_TRIANGLES.replace("2.2 0 8", "4.1 0 8");
        let err = parse_msh(&bad).unwrap_err().to_string();
        assert!(err.contains("unsupported version 4.1"), "{err}");
    }

    #[test]
    fn dangling_vertex_named() {
        let bad = TWO_TRIANGLES
            .replace("$Nodes\n4\n", "$Nodes\n5\n")
            .replace("40 0 1 0\n", "40 0 1 0\n77 3 3 0\n");
        let err = parse_msh(&bad).unwrap_err().to_string();
        assert!(err.contains("node 77"), "{err}");
    }

    #[test]
    fn msh_round_trip() {
        let m = generate_rectangle(3, 2, 1.0, 0.5, SideTags::friction_on(&[Side::Top])).unwrap();
        let back = parse_msh(&to_msh_string(&m)).unwrap();
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.triangles(), m.triangles());
        assert_eq!(back.boundary_facets(), m.boundary_facets());
    }
}
