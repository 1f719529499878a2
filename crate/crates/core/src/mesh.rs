//! Structured triangulations of the unit square.
//!
//! The square is split into `N x N` cells, each cut along the diagonal running
//! from its lower-left to its upper-right corner. Vertex `(i, j)` sits at
//! `(i / N, j / N)` and has index `i + j (N + 1)`. Edges are stored with the
//! lower vertex index first; that ordering fixes the global edge orientation and
//! therefore the sign of every normal-trace degree of freedom.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{BiotError, Result};

pub type Point = [f64; 2];

/// Conforming triangulation with oriented edges.
#[derive(Debug, Clone)]
pub struct TriMesh {
    n: usize,
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    /// Local edge `k` of a cell is opposite local vertex `k`. The sign is `+1`
    /// when the global edge normal points out of the cell.
    cell_edges: Vec<[(usize, f64); 3]>,
    edge_cells: Vec<Vec<usize>>,
    boundary_edges: Vec<usize>,
}

impl TriMesh {
    /// Number of squares per side.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn cell_edges(&self) -> &[[(usize, f64); 3]] {
        &self.cell_edges
    }

    /// Cells adjacent to each edge (one for boundary edges, two otherwise).
    pub fn edge_cells(&self, edge: usize) -> &[usize] {
        &self.edge_cells[edge]
    }

    pub fn boundary_edges(&self) -> &[usize] {
        &self.boundary_edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn cell_points(&self, cell: usize) -> [Point; 3] {
        let [a, b, c] = self.cells[cell];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Signed area; positive for counter-clockwise cells.
    pub fn signed_area(&self, cell: usize) -> f64 {
        let [p0, p1, p2] = self.cell_points(cell);
        0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
    }

    pub fn area(&self, cell: usize) -> f64 {
        self.signed_area(cell).abs()
    }

    pub fn centroid(&self, cell: usize) -> Point {
        let [p0, p1, p2] = self.cell_points(cell);
        [(p0[0] + p1[0] + p2[0]) / 3.0, (p0[1] + p1[1] + p2[1]) / 3.0]
    }

    /// Total area of the domain.
    pub fn domain_area(&self) -> f64 {
        (0..self.num_cells()).map(|c| self.signed_area(c)).sum()
    }

    pub fn edge_length(&self, edge: usize) -> f64 {
        let [a, b] = self.edges[edge];
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        (pb[0] - pa[0]).hypot(pb[1] - pa[1])
    }

    pub fn edge_midpoint(&self, edge: usize) -> Point {
        let [a, b] = self.edges[edge];
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
    }

    /// Unit normal of an edge: the tangent from the low-index to the
    /// high-index vertex rotated by -90 degrees.
    pub fn edge_normal(&self, edge: usize) -> Result<Point> {
        if edge >= self.edges.len() {
            return Err(BiotError::IndexOutOfRange {
                index: edge,
                len: self.edges.len(),
            });
        }
        let [a, b] = self.edges[edge];
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        let (tx, ty) = (pb[0] - pa[0], pb[1] - pa[1]);
        let len = tx.hypot(ty);
        Ok([ty / len, -tx / len])
    }

    /// Plain-text dump: a vertex block followed by a cell block.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "vertices {}", self.vertices.len());
        for v in &self.vertices {
            let _ = writeln!(out, "{:.17e} {:.17e}", v[0], v[1]);
        }
        let _ = writeln!(out, "cells {}", self.cells.len());
        for c in &self.cells {
            let _ = writeln!(out, "{} {} {}", c[0], c[1], c[2]);
        }
        out
    }
}

/// Builds the `N x N` two-triangles-per-square mesh of the unit square.
pub fn build_unit_square_mesh(n: usize) -> Result<TriMesh> {
    if n == 0 {
        return Err(BiotError::InvalidArgument(
            "mesh resolution N must be at least 1".into(),
        ));
    }
    let h = 1.0 / n as f64;
    let vid = |i: usize, j: usize| i + j * (n + 1);

    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 * h, j as f64 * h]);
        }
    }
    // Exact endpoints so boundary classification never depends on rounding.
    for v in vertices.iter_mut() {
        for x in v.iter_mut() {
            if (*x - 1.0).abs() < 1e-14 {
                *x = 1.0;
            }
        }
    }

    let mut cells = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (v00, v10, v11, v01) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            cells.push([v00, v10, v11]);
            cells.push([v00, v11, v01]);
        }
    }

    let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut edges = Vec::with_capacity(3 * n * n + 2 * n);
    let mut edge_cells: Vec<Vec<usize>> = Vec::new();
    let mut cell_edges = Vec::with_capacity(cells.len());
    for (c, cell) in cells.iter().enumerate() {
        let mut local = [(0usize, 0.0f64); 3];
        for (k, slot) in local.iter_mut().enumerate() {
            // Counter-clockwise traversal of the edge opposite vertex k.
            let from = cell[(k + 1) % 3];
            let to = cell[(k + 2) % 3];
            let key = (from.min(to), from.max(to));
            let e = *edge_index.entry(key).or_insert_with(|| {
                edges.push([key.0, key.1]);
                edge_cells.push(Vec::with_capacity(2));
                edges.len() - 1
            });
            edge_cells[e].push(c);
            let sign = if from < to { 1.0 } else { -1.0 };
            *slot = (e, sign);
        }
        cell_edges.push(local);
    }

    let boundary_edges = (0..edges.len()).filter(|&e| edge_cells[e].len() == 1).collect();

    Ok(TriMesh {
        n,
        vertices,
        cells,
        edges,
        cell_edges,
        edge_cells,
        boundary_edges,
    })
}

/// Elasticity boundary regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BcMode {
    /// Displacement fixed on the whole boundary; no traction boundary.
    Clamped,
    /// Traction-free on the top edge `y = 1`, displacement fixed elsewhere.
    Mixed,
}

impl BcMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BcMode::Clamped => "clamped",
            BcMode::Mixed => "mixed",
        }
    }
}

impl std::str::FromStr for BcMode {
    type Err = BiotError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "clamped" => Ok(BcMode::Clamped),
            "mixed" | "nonclamped" => Ok(BcMode::Mixed),
            other => Err(BiotError::InvalidArgument(format!(
                "unknown boundary mode '{other}' (expected clamped|mixed)"
            ))),
        }
    }
}

/// Two partitions of the boundary edges: pressure (`gamma_p`, `gamma_f`) and
/// elasticity (`gamma_d`, `gamma_t`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryTags {
    pub gamma_p: Vec<usize>,
    pub gamma_f: Vec<usize>,
    pub gamma_d: Vec<usize>,
    pub gamma_t: Vec<usize>,
}

impl BoundaryTags {
    pub fn is_clamped(&self) -> bool {
        self.gamma_t.is_empty()
    }
}

/// Pressure is always pure Neumann (`gamma_p` empty). In mixed mode the
/// traction boundary is the top edge.
pub fn classify_boundary(mesh: &TriMesh, mode: BcMode) -> BoundaryTags {
    let boundary = mesh.boundary_edges().to_vec();
    let on_top = |e: usize| {
        let [a, b] = mesh.edges()[e];
        mesh.vertices()[a][1] == 1.0 && mesh.vertices()[b][1] == 1.0
    };
    let (gamma_t, gamma_d) = match mode {
        BcMode::Clamped => (Vec::new(), boundary.clone()),
        BcMode::Mixed => boundary.iter().partition(|&&e| on_top(e)),
    };
    BoundaryTags {
        gamma_p: Vec::new(),
        gamma_f: boundary,
        gamma_d,
        gamma_t,
    }
}
