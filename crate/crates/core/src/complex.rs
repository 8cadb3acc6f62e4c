//! Graphs, their 2-truncated clique complexes, and geometric cones.
//!
//! Vertices are ordered by index. Base simplices are oriented by that order;
//! cells that contain a cone apex are oriented apex-first, so the face that
//! forgets the apex always enters the boundary with sign `+1`.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite simple undirected graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    vertex_count: usize,
    edges: Vec<[usize; 2]>,
}

impl Graph {
    /// Validates and normalizes the edge list (each pair sorted, list sorted).
    pub fn new(vertex_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for &(u, v) in edges {
            if u >= vertex_count || v >= vertex_count {
                return Err(Error::VertexOutOfRange { u, v, vertex_count });
            }
            if u == v {
                return Err(Error::SelfLoop(u));
            }
            let key = [u.min(v), u.max(v)];
            if !seen.insert(key) {
                return Err(Error::DuplicateEdge(u, v));
            }
        }
        Ok(Graph { vertex_count, edges: seen.into_iter().collect() })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// The n-cycle `0 - 1 - ... - (n-1) - 0`.
    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::TooSmall { n, min: 3 });
        }
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Graph::new(n, &edges)
    }

    /// Prism over the n-cycle: an outer ring `0..n`, an inner ring `n..2n`,
    /// and rungs `(i, n + i)`. Triangle-free for `n >= 4`.
    pub fn prism(n: usize) -> Result<Self> {
        if n < 4 {
            return Err(Error::TooSmall { n, min: 4 });
        }
        let mut edges = Vec::with_capacity(3 * n);
        for i in 0..n {
            edges.push((i, (i + 1) % n));
            edges.push((n + i, n + (i + 1) % n));
            edges.push((i, n + i));
        }
        Graph::new(2 * n, &edges)
    }

    pub fn complete(n: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                edges.push((u, v));
            }
        }
        Graph::new(n, &edges)
    }
}

/// Oriented 2-truncated cell complex with signed incidences.
#[derive(Debug, Clone, PartialEq)]
pub struct CliqueComplex {
    vertex_count: usize,
    edges: Vec<[usize; 2]>,
    triangles: Vec<[usize; 3]>,
    apex: Option<usize>,
    edge_index: HashMap<[usize; 2], usize>,
    // (face vertex, sign) for each edge, in omitted-position order.
    edge_faces: Vec<[(usize, f64); 2]>,
    // (face edge index, sign) for each triangle, in omitted-position order.
    tri_faces: Vec<[(usize, f64); 3]>,
    vertex_cofaces: Vec<Vec<usize>>,
    edge_cofaces: Vec<Vec<usize>>,
}

impl CliqueComplex {
    /// Builds the clique complex of `g` truncated to dimension two.
    pub fn from_graph(g: &Graph) -> Self {
        let n = g.vertex_count();
        let mut adj = vec![BTreeSet::new(); n];
        for &[u, v] in g.edges() {
            adj[u].insert(v);
            adj[v].insert(u);
        }
        let mut triangles = Vec::new();
        for &[u, v] in g.edges() {
            for &w in adj[v].range(v + 1..) {
                if adj[u].contains(&w) {
                    triangles.push([u, v, w]);
                }
            }
        }
        triangles.sort();
        Self::assemble(n, g.edges().to_vec(), triangles, None)
    }

    fn assemble(vertex_count: usize, edges: Vec<[usize; 2]>, triangles: Vec<[usize; 3]>, apex: Option<usize>) -> Self {
        let edge_index: HashMap<[usize; 2], usize> = edges.iter().enumerate().map(|(i, e)| (*e, i)).collect();
        let mut cx = CliqueComplex {
            vertex_count,
            edges,
            triangles,
            apex,
            edge_index,
            edge_faces: Vec::new(),
            tri_faces: Vec::new(),
            vertex_cofaces: vec![Vec::new(); vertex_count],
            edge_cofaces: Vec::new(),
        };
        let edge_faces: Vec<_> = cx
            .edges
            .iter()
            .map(|e| {
                let o = cx.oriented(e);
                [(o[1], 1.0), (o[0], -1.0)]
            })
            .collect();
        let tri_faces: Vec<_> = cx
            .triangles
            .iter()
            .map(|t| {
                let o = cx.oriented(t);
                let key = |a: usize, b: usize| cx.edge_index[&[a.min(b), a.max(b)]];
                [(key(o[1], o[2]), 1.0), (key(o[0], o[2]), -1.0), (key(o[0], o[1]), 1.0)]
            })
            .collect();
        for (i, e) in cx.edges.iter().enumerate() {
            cx.vertex_cofaces[e[0]].push(i);
            cx.vertex_cofaces[e[1]].push(i);
        }
        let mut edge_cofaces = vec![Vec::new(); cx.edges.len()];
        for (t, faces) in tri_faces.iter().enumerate() {
            for &(e, _) in faces {
                edge_cofaces[e].push(t);
            }
        }
        cx.edge_faces = edge_faces;
        cx.tri_faces = tri_faces;
        cx.edge_cofaces = edge_cofaces;
        cx
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn apex(&self) -> Option<usize> {
        self.apex
    }

    /// Number of cells of dimension `dim` (0, 1 or 2).
    pub fn cell_count(&self, dim: usize) -> usize {
        match dim {
            0 => self.vertex_count,
            1 => self.edges.len(),
            2 => self.triangles.len(),
            _ => 0,
        }
    }

    pub fn edge_index(&self, u: usize, v: usize) -> Option<usize> {
        self.edge_index.get(&[u.min(v), u.max(v)]).copied()
    }

    pub fn triangle_index(&self, t: [usize; 3]) -> Option<usize> {
        let mut s = t;
        s.sort();
        self.triangles.binary_search(&s).ok()
    }

    /// `(vertex, sign)` faces of edge `e`.
    pub fn edge_faces(&self, e: usize) -> &[(usize, f64); 2] {
        &self.edge_faces[e]
    }

    /// `(edge index, sign)` faces of triangle `t`.
    pub fn triangle_faces(&self, t: usize) -> &[(usize, f64); 3] {
        &self.tri_faces[t]
    }

    pub fn vertex_cofaces(&self, v: usize) -> &[usize] {
        &self.vertex_cofaces[v]
    }

    pub fn edge_cofaces(&self, e: usize) -> &[usize] {
        &self.edge_cofaces[e]
    }

    /// Orientation of a cell given by its sorted vertex list: ascending,
    /// except that an apex vertex is moved to the front.
    pub fn oriented(&self, cell: &[usize]) -> Vec<usize> {
        let mut v: Vec<usize> = cell.to_vec();
        v.sort();
        if let Some(a) = self.apex {
            if let Some(pos) = v.iter().position(|&x| x == a) {
                v.remove(pos);
                v.insert(0, a);
            }
        }
        v
    }

    /// Incidence number `[cell : face]` for a codimension-1 face.
    pub fn incidence_sign(&self, cell: &[usize], face: &[usize]) -> Result<i8> {
        let not_incident = || Error::NotIncident { cell: cell.to_vec(), face: face.to_vec() };
        if cell.len() != face.len() + 1 || cell.is_empty() {
            return Err(not_incident());
        }
        let o = self.oriented(cell);
        let mut f: Vec<usize> = face.to_vec();
        f.sort();
        for i in 0..o.len() {
            let mut rest: Vec<usize> = o.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &x)| x).collect();
            rest.sort();
            if rest == f {
                return Ok(if i % 2 == 0 { 1 } else { -1 });
            }
        }
        Err(not_incident())
    }

    /// Geometric cone: adds an apex `vertex_count`, a cone edge over every
    /// vertex and a cone triangle over every edge. Cones over triangles
    /// would be 3-cells and are dropped by the truncation.
    pub fn cone(&self) -> Result<Self> {
        if self.apex.is_some() {
            return Err(Error::AlreadyConed);
        }
        let apex = self.vertex_count;
        let mut edges = self.edges.clone();
        edges.extend((0..self.vertex_count).map(|v| [v, apex]));
        edges.sort();
        let mut triangles = self.triangles.clone();
        triangles.extend(self.edges.iter().map(|&[u, v]| [u, v, apex]));
        triangles.sort();
        Ok(Self::assemble(self.vertex_count + 1, edges, triangles, Some(apex)))
    }

    /// Index of the cone edge `*v` in a coned complex.
    pub fn cone_edge(&self, v: usize) -> Option<usize> {
        self.apex.and_then(|a| self.edge_index(v, a))
    }

    /// Index of the cone triangle `*e` for the base edge `(u, v)`.
    pub fn cone_triangle(&self, u: usize, v: usize) -> Option<usize> {
        self.apex.and_then(|a| self.triangle_index([u, v, a]))
    }
}
