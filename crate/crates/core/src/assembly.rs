//! P1 velocity / P0 cell-field operators.
//!
//! Velocity unknowns are numbered `2 * node + component` and stored in the
//! Cartesian frame. Constraint handling rotates slip nodes into their
//! `(n, tau)` frame only inside [`Constraints`], so every field handed to
//! callers is Cartesian.
//!
//! Every integrand is elementwise constant or linear, so one-point
//! (centroid) quadrature is used throughout.

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, TripletBuilder};
use crate::mesh::{boundary_frames, BoundaryFrame, Mesh, Point};

/// Nodal P1 velocity, flat `[u0x, u0y, u1x, u1y, ...]`.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityField {
    pub values: Vec<f64>,
}

impl VelocityField {
    pub fn zeros(num_nodes: usize) -> Self {
        VelocityField {
            values: vec![0.0; 2 * num_nodes],
        }
    }

    /// P1 interpolant of `f` at the mesh vertices.
    pub fn interpolate(mesh: &Mesh, f: impl Fn(Point) -> [f64; 2]) -> Self {
        let values = mesh.vertices().iter().flat_map(|&p| f(p)).collect();
        VelocityField { values }
    }

    pub fn num_nodes(&self) -> usize {
        self.values.len() / 2
    }

    pub fn node(&self, i: usize) -> [f64; 2] {
        [self.values[2 * i], self.values[2 * i + 1]]
    }

    pub fn sub(&self, other: &VelocityField) -> VelocityField {
        VelocityField {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Piecewise-constant scalar, one value per triangle.
#[derive(Clone, Debug, PartialEq)]
pub struct CellField {
    pub values: Vec<f64>,
}

impl CellField {
    pub fn zeros(num_cells: usize) -> Self {
        CellField {
            values: vec![0.0; num_cells],
        }
    }

    pub fn constant(num_cells: usize, c: f64) -> Self {
        CellField {
            values: vec![c; num_cells],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Scalar per friction-boundary node, in [`boundary_frames`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentialTrace {
    pub values: Vec<f64>,
}

impl TangentialTrace {
    pub fn zeros(n: usize) -> Self {
        TangentialTrace { values: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Viscous form `nu * int eps(u) : eps(v)`.
pub fn assemble_viscous(mesh: &Mesh, nu: f64) -> CsrMatrix {
    let mut b = TripletBuilder::with_capacity(mesh.num_velocity_dofs(), 36 * mesh.num_triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = mesh.basis_gradients(t);
        let w = nu * mesh.element_areas()[t];
        for a in 0..3 {
            for c in 0..3 {
                let gg = g[a][0] * g[c][0] + g[a][1] * g[c][1];
                for i in 0..2 {
                    for k in 0..2 {
                        // eps(phi_a e_i) : eps(phi_c e_k)
                        let delta = if i == k { gg } else { 0.0 };
                        let v = 0.5 * (delta + g[a][k] * g[c][i]);
                        b.add(2 * tri[a] + i, 2 * tri[c] + k, w * v);
                    }
                }
            }
        }
    }
    b.build()
}

/// Divergence penalty form `int (div u)(div v)`, i.e. `D^T M_c D`.
pub fn assemble_divdiv(mesh: &Mesh) -> CsrMatrix {
    let mut b = TripletBuilder::with_capacity(mesh.num_velocity_dofs(), 36 * mesh.num_triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = mesh.basis_gradients(t);
        let area = mesh.element_areas()[t];
        for a in 0..3 {
            for i in 0..2 {
                for c in 0..3 {
                    for k in 0..2 {
                        b.add(2 * tri[a] + i, 2 * tri[c] + k, area * g[a][i] * g[c][k]);
                    }
                }
            }
        }
    }
    b.build()
}

/// Lumped boundary mass over friction-node tangential values; the diagonal
/// holds the frame weights. Empty when there is no friction boundary.
pub fn assemble_boundary_tangential_mass(mesh: &Mesh) -> CsrMatrix {
    let weights: Vec<f64> = boundary_frames(mesh).iter().map(|f| f.weight).collect();
    CsrMatrix::from_diagonal(&weights)
}

/// The lumped tangential mass expressed on Cartesian velocity unknowns:
/// `w_i tau_i tau_i^T` on the 2x2 block of each frame node.
pub fn tangential_mass_cartesian(num_nodes: usize, frames: &[BoundaryFrame]) -> CsrMatrix {
    let mut b = TripletBuilder::with_capacity(2 * num_nodes, 4 * frames.len());
    for f in frames {
        for i in 0..2 {
            for k in 0..2 {
                b.add(2 * f.node + i, 2 * f.node + k, f.weight * f.tangent[i] * f.tangent[k]);
            }
        }
    }
    b.build()
}

/// Body-force load `int f . v` with centroid quadrature.
pub fn assemble_load(mesh: &Mesh, f: impl Fn(Point) -> [f64; 2]) -> Vec<f64> {
    let mut load = vec![0.0; mesh.num_velocity_dofs()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let fc = f(mesh.centroid(t));
        let w = mesh.element_areas()[t] / 3.0;
        for &v in tri {
            load[2 * v] += w * fc[0];
            load[2 * v + 1] += w * fc[1];
        }
    }
    load
}

/// Exact elementwise divergence of a P1 field.
pub fn element_divergence(mesh: &Mesh, u: &VelocityField) -> Result<CellField> {
    check_len(mesh.num_velocity_dofs(), u.values.len())?;
    let values = mesh
        .triangles()
        .iter()
        .enumerate()
        .map(|(t, tri)| {
            let g = mesh.basis_gradients(t);
            (0..3)
                .map(|a| u.values[2 * tri[a]] * g[a][0] + u.values[2 * tri[a] + 1] * g[a][1])
                .sum()
        })
        .collect();
    Ok(CellField { values })
}

/// Vector `b` with `b . v = sum_K area_K q_K (div v)_K` for every `v`.
pub fn pressure_coupling(mesh: &Mesh, q: &CellField) -> Result<Vec<f64>> {
    check_len(mesh.num_triangles(), q.len())?;
    let mut out = vec![0.0; mesh.num_velocity_dofs()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = mesh.basis_gradients(t);
        let s = mesh.element_areas()[t] * q.values[t];
        for a in 0..3 {
            out[2 * tri[a]] += s * g[a][0];
            out[2 * tri[a] + 1] += s * g[a][1];
        }
    }
    Ok(out)
}

pub fn area_weighted_mean(mesh: &Mesh, q: &CellField) -> f64 {
    let total: f64 = mesh.element_areas().iter().zip(&q.values).map(|(a, v)| a * v).sum();
    total / mesh.total_area()
}

/// L2 projection onto mean-zero cell fields.
pub fn project_mean_zero(mesh: &Mesh, q: &CellField) -> Result<CellField> {
    check_len(mesh.num_triangles(), q.len())?;
    let mean = area_weighted_mean(mesh, q);
    Ok(CellField {
        values: q.values.iter().map(|v| v - mean).collect(),
    })
}

/// `sum_K area_K a_K b_K`.
pub fn cell_inner(mesh: &Mesh, a: &CellField, b: &CellField) -> f64 {
    mesh.element_areas()
        .iter()
        .zip(a.values.iter().zip(&b.values))
        .map(|(w, (x, y))| w * x * y)
        .sum()
}

pub fn cell_l2_norm(mesh: &Mesh, q: &CellField) -> f64 {
    cell_inner(mesh, q, q).sqrt()
}

/// Full H1 norm `(||u||_0^2 + |u|_1^2)^(1/2)` of a P1 field, integrated exactly.
pub fn velocity_h1_norm(mesh: &Mesh, u: &VelocityField) -> f64 {
    let mut total = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = mesh.basis_gradients(t);
        let area = mesh.element_areas()[t];
        for i in 0..2 {
            let vals = [
                u.values[2 * tri[0] + i],
                u.values[2 * tri[1] + i],
                u.values[2 * tri[2] + i],
            ];
            let grad = [
                (0..3).map(|a| vals[a] * g[a][0]).sum::<f64>(),
                (0..3).map(|a| vals[a] * g[a][1]).sum::<f64>(),
            ];
            total += area * (grad[0] * grad[0] + grad[1] * grad[1]);
            // exact P1 mass: area/12 * (1 + delta_ab)
            let s: f64 = vals.iter().sum();
            let ss: f64 = vals.iter().map(|v| v * v).sum();
            total += area / 12.0 * (s * s + ss);
        }
    }
    total.sqrt()
}

/// L2 norm of a P1 field, integrated exactly.
pub fn velocity_l2_norm(mesh: &Mesh, u: &VelocityField) -> f64 {
    let mut total = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.element_areas()[t];
        for i in 0..2 {
            let vals = [
                u.values[2 * tri[0] + i],
                u.values[2 * tri[1] + i],
                u.values[2 * tri[2] + i],
            ];
            let s: f64 = vals.iter().sum();
            let ss: f64 = vals.iter().map(|v| v * v).sum();
            total += area / 12.0 * (s * s + ss);
        }
    }
    total.sqrt()
}

/// `u . tau` at every frame node.
pub fn tangential_trace(u: &VelocityField, frames: &[BoundaryFrame]) -> TangentialTrace {
    TangentialTrace {
        values: frames
            .iter()
            .map(|f| {
                let v = u.node(f.node);
                v[0] * f.tangent[0] + v[1] * f.tangent[1]
            })
            .collect(),
    }
}

/// Cartesian load of a boundary term `sum_i w_i g_i v_tau,i`.
pub fn tangential_load(num_nodes: usize, frames: &[BoundaryFrame], g: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; 2 * num_nodes];
    for (f, gi) in frames.iter().zip(g) {
        out[2 * f.node] += f.weight * gi * f.tangent[0];
        out[2 * f.node + 1] += f.weight * gi * f.tangent[1];
    }
    out
}

/// `(sum_i w_i a_i^2)^(1/2)` over the friction boundary.
pub fn boundary_l2_norm(frames: &[BoundaryFrame], a: &[f64]) -> f64 {
    frames.iter().zip(a).map(|(f, v)| f.weight * v * v).sum::<f64>().sqrt()
}

/// Kinematic constraints of the velocity space: `u = 0` at Dirichlet nodes
/// and `u . n = 0` at the remaining friction nodes.
///
/// In the rotated numbering a slip node stores `(u_n, u_tau)` in place of
/// `(u_x, u_y)`; all other nodes are left Cartesian.
#[derive(Clone, Debug)]
pub struct Constraints {
    num_nodes: usize,
    frames: Vec<BoundaryFrame>,
    slip_frame: Vec<Option<usize>>,
    constrained: Vec<bool>,
}

impl Constraints {
    pub fn new(mesh: &Mesh) -> Self {
        let n = mesh.num_vertices();
        let frames = boundary_frames(mesh);
        let dirichlet = mesh.dirichlet_nodes();
        let mut slip_frame = vec![None; n];
        let mut constrained = vec![false; 2 * n];
        for (node, &d) in dirichlet.iter().enumerate() {
            if d {
                constrained[2 * node] = true;
                constrained[2 * node + 1] = true;
            }
        }
        for (k, f) in frames.iter().enumerate() {
            if !dirichlet[f.node] {
                slip_frame[f.node] = Some(k);
                constrained[2 * f.node] = true;
            }
        }
        Constraints {
            num_nodes: n,
            frames,
            slip_frame,
            constrained,
        }
    }

    pub fn frames(&self) -> &[BoundaryFrame] {
        &self.frames
    }

    pub fn num_dofs(&self) -> usize {
        2 * self.num_nodes
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.constrained[dof]
    }

    /// Frame index of a node that slips (friction node not clamped by Dirichlet).
    pub fn slip_frame(&self, node: usize) -> Option<usize> {
        self.slip_frame[node]
    }

    /// Unconstrained unknowns in the rotated numbering.
    pub fn free_dofs(&self) -> Vec<usize> {
        (0..self.num_dofs()).filter(|&d| !self.constrained[d]).collect()
    }

    /// 2x2 block `R` with `u_cart = R u_rot`; columns are `n` and `tau`.
    fn rotation(&self, node: usize) -> [[f64; 2]; 2] {
        match self.slip_frame[node] {
            Some(k) => {
                let f = &self.frames[k];
                [[f.normal[0], f.tangent[0]], [f.normal[1], f.tangent[1]]]
            }
            None => [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    /// `R^T A R`.
    pub fn rotate_matrix(&self, a: &CsrMatrix) -> CsrMatrix {
        let mut b = TripletBuilder::with_capacity(a.dim(), 4 * a.nnz());
        for (i, j, v) in a.triplets() {
            let (na, ci) = (i / 2, i % 2);
            let (nb, cj) = (j / 2, j % 2);
            let ra = self.rotation(na);
            let rb = self.rotation(nb);
            for r in 0..2 {
                if ra[ci][r] == 0.0 {
                    continue;
                }
                for s in 0..2 {
                    if rb[cj][s] == 0.0 {
                        continue;
                    }
                    b.add(2 * na + r, 2 * nb + s, ra[ci][r] * v * rb[cj][s]);
                }
            }
        }
        b.build()
    }

    /// Cartesian vector to rotated numbering (`R^T b`).
    pub fn rotate_vector(&self, b: &[f64]) -> Vec<f64> {
        let mut out = b.to_vec();
        for node in 0..self.num_nodes {
            if self.slip_frame[node].is_some() {
                let r = self.rotation(node);
                let (x, y) = (b[2 * node], b[2 * node + 1]);
                out[2 * node] = r[0][0] * x + r[1][0] * y;
                out[2 * node + 1] = r[0][1] * x + r[1][1] * y;
            }
        }
        out
    }

    /// Rotated numbering back to Cartesian (`R x`).
    pub fn unrotate_vector(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        for node in 0..self.num_nodes {
            if self.slip_frame[node].is_some() {
                let r = self.rotation(node);
                let (a, b) = (x[2 * node], x[2 * node + 1]);
                out[2 * node] = r[0][0] * a + r[0][1] * b;
                out[2 * node + 1] = r[1][0] * a + r[1][1] * b;
            }
        }
        out
    }

    /// Symmetric elimination of constrained unknowns of an already rotated
    /// system: rows and columns zeroed, unit diagonal, zero right-hand side.
    pub fn eliminate(&self, a: &CsrMatrix, rhs: &mut [f64]) -> CsrMatrix {
        let mut b = TripletBuilder::with_capacity(a.dim(), a.nnz());
        for (i, j, v) in a.triplets() {
            if !self.constrained[i] && !self.constrained[j] {
                b.add(i, j, v);
            }
        }
        for (d, &c) in self.constrained.iter().enumerate() {
            if c {
                b.add(d, d, 1.0);
                rhs[d] = 0.0;
            }
        }
        b.build()
    }

    /// Zeroes constrained entries of a rotated vector.
    pub fn zero_constrained(&self, x: &mut [f64]) {
        for (xi, &c) in x.iter_mut().zip(&self.constrained) {
            if c {
                *xi = 0.0;
            }
        }
    }

    /// Rotation followed by elimination, with a well-posedness check.
    pub fn apply(&self, a: &CsrMatrix, rhs: &[f64]) -> Result<ConstrainedSystem> {
        check_len(self.num_dofs(), a.dim())?;
        check_len(self.num_dofs(), rhs.len())?;
        if !self
            .constrained
            .iter()
            .step_by(2)
            .zip(self.constrained.iter().skip(1).step_by(2))
            .any(|(x, y)| *x && *y)
        {
            return Err(Error::Configuration(
                "no Dirichlet node: the constrained system is singular".into(),
            ));
        }
        let rotated = self.rotate_matrix(a);
        let mut rhs = self.rotate_vector(rhs);
        let matrix = self.eliminate(&rotated, &mut rhs);
        if let Some((d, v)) = matrix.diagonal().into_iter().enumerate().find(|(_, v)| !(*v > 0.0)) {
            return Err(Error::Configuration(format!(
                "constrained matrix is singular: diagonal entry {d} is {v:e}"
            )));
        }
        Ok(ConstrainedSystem { matrix, rhs })
    }
}

/// Constrained system in the rotated numbering.
#[derive(Clone, Debug)]
pub struct ConstrainedSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

pub fn apply_constraints(matrix: &CsrMatrix, rhs: &[f64], mesh: &Mesh) -> Result<ConstrainedSystem> {
    Constraints::new(mesh).apply(matrix, rhs)
}
