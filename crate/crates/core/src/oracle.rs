//! Dense reference minimizers for tiny meshes.
//!
//! Works in reduced coordinates: two Cartesian values per interior node and
//! one tangential value per sliding boundary node. Nothing here touches the
//! ADMM code path.

use nalgebra::{DMatrix, DVector};

use crate::assembly::{assemble_load, assemble_viscous, pressure_coupling, CellField, VelocityField};
use crate::error::{Error, Result};
use crate::mesh::{boundary_frames, Mesh, Point};
use crate::outer::FrictionBound;

/// Largest number of reduced unknowns the oracle accepts.
pub const MAX_ORACLE_DOFS: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub struct FrictionNode {
    /// Index of the tangential unknown in the reduced vector.
    pub index: usize,
    pub xi: f64,
    pub weight: f64,
}

/// `min 1/2 v^T A v - load^T v + sum w xi |v_t|` subject to `|(D v)_K| <= eps`.
#[derive(Clone, Debug)]
pub struct DenseProblem {
    pub matrix: DMatrix<f64>,
    /// Cell divergence of each reduced unknown, `cells x unknowns`.
    pub divergence: DMatrix<f64>,
    pub areas: Vec<f64>,
    pub friction: Vec<FrictionNode>,
    pub load: DVector<f64>,
    /// `f64::INFINITY` disables the divergence constraint.
    pub eps: f64,
    /// Maps reduced unknowns to Cartesian DOFs, `2 * nodes x unknowns`.
    pub basis: DMatrix<f64>,
}

impl DenseProblem {
    /// Builds the reduced problem at frozen pressure `p`.
    pub fn new(
        mesh: &Mesh,
        force: impl Fn(Point) -> [f64; 2],
        pressure: &CellField,
        nu: f64,
        xi: &FrictionBound,
        eps: f64,
    ) -> Result<Self> {
        let frames = boundary_frames(mesh);
        let xi_values = xi.nodal_values(frames.len())?;
        let ndof = mesh.num_velocity_dofs();
        let mut columns: Vec<Vec<(usize, f64)>> = Vec::new();
        let mut friction = Vec::new();
        let mut on_boundary = vec![false; mesh.num_vertices()];
        for (k, f) in frames.iter().enumerate() {
            on_boundary[f.node] = true;
            if mesh.dirichlet_nodes()[f.node] {
                continue;
            }
            friction.push(FrictionNode {
                index: columns.len(),
                xi: xi_values[k],
                weight: f.weight,
            });
            columns.push(vec![(2 * f.node, f.tangent[0]), (2 * f.node + 1, f.tangent[1])]);
        }
        for node in 0..mesh.num_vertices() {
            if !on_boundary[node] && !mesh.dirichlet_nodes()[node] {
                columns.push(vec![(2 * node, 1.0)]);
                columns.push(vec![(2 * node + 1, 1.0)]);
            }
        }
        if columns.len() > MAX_ORACLE_DOFS {
            return Err(Error::OracleTooLarge {
                dofs: columns.len(),
                limit: MAX_ORACLE_DOFS,
            });
        }
        let mut basis = DMatrix::zeros(ndof, columns.len());
        for (j, col) in columns.iter().enumerate() {
            for &(i, v) in col {
                basis[(i, j)] = v;
            }
        }

        let mut cart_div = DMatrix::zeros(mesh.num_triangles(), ndof);
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let g = mesh.basis_gradients(t);
            for a in 0..3 {
                cart_div[(t, 2 * tri[a])] += g[a][0];
                cart_div[(t, 2 * tri[a] + 1)] += g[a][1];
            }
        }
        let a = assemble_viscous(mesh, nu).to_dense();
        let mut f = DVector::from_vec(assemble_load(mesh, force));
        f += DVector::from_vec(pressure_coupling(mesh, pressure)?);
        Ok(DenseProblem {
            matrix: basis.transpose() * a * &basis,
            divergence: cart_div * &basis,
            areas: mesh.element_areas().to_vec(),
            friction,
            load: basis.transpose() * f,
            eps,
            basis,
        })
    }

    pub fn num_unknowns(&self) -> usize {
        self.load.len()
    }

    pub fn to_velocity(&self, v: &DVector<f64>) -> VelocityField {
        VelocityField {
            values: (&self.basis * v).iter().copied().collect(),
        }
    }

    /// Least-squares restriction of a Cartesian field to reduced coordinates.
    pub fn restrict(&self, u: &VelocityField) -> DVector<f64> {
        // basis columns are orthonormal
        self.basis.transpose() * DVector::from_column_slice(&u.values)
    }

    /// Smooth part `1/2 v^T A v - load^T v`.
    pub fn smooth_objective(&self, v: &DVector<f64>) -> f64 {
        0.5 * v.dot(&(&self.matrix * v)) - self.load.dot(v)
    }

    pub fn gradient(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.matrix * v - &self.load
    }

    pub fn friction_objective(&self, v: &DVector<f64>) -> f64 {
        self.friction.iter().map(|f| f.weight * f.xi * v[f.index].abs()).sum()
    }

    pub fn max_divergence(&self, v: &DVector<f64>) -> f64 {
        (&self.divergence * v).amax()
    }

    /// Euclidean projection onto the divergence slabs by Dykstra's method.
    pub fn project(&self, y: &DVector<f64>) -> DVector<f64> {
        if !self.eps.is_finite() {
            return y.clone();
        }
        let rows: Vec<DVector<f64>> = (0..self.divergence.nrows())
            .map(|k| self.divergence.row(k).transpose())
            .collect();
        let norms: Vec<f64> = rows.iter().map(|r| r.norm_squared()).collect();
        let mut x = y.clone();
        let mut corrections = vec![0.0; rows.len()];
        for _ in 0..200_000 {
            let mut change: f64 = 0.0;
            for (k, r) in rows.iter().enumerate() {
                if norms[k] == 0.0 {
                    continue;
                }
                // undo the previous correction, then project onto the slab
                let s = r.dot(&x) + corrections[k] * norms[k];
                let target = s.clamp(-self.eps, self.eps);
                let c = (s - target) / norms[k];
                let delta = c - corrections[k];
                if delta != 0.0 {
                    x.axpy(-delta, r, 1.0);
                    change = change.max(delta.abs() * norms[k].sqrt());
                }
                corrections[k] = c;
            }
            if change < 1e-12 {
                break;
            }
        }
        x
    }
}

/// Total energy of a reduced vector.
pub fn objective(problem: &DenseProblem, v: &DVector<f64>) -> f64 {
    problem.smooth_objective(v) + problem.friction_objective(v)
}

#[derive(Clone, Debug)]
pub struct OracleSolution {
    pub v: DVector<f64>,
    pub objective: f64,
    /// Best objective seen, recorded every `steps / 100` iterations.
    pub checkpoints: Vec<f64>,
}

impl OracleSolution {
    pub fn velocity(&self, problem: &DenseProblem) -> VelocityField {
        problem.to_velocity(&self.v)
    }
}

/// Projected subgradient descent from `v = 0`.
///
/// Steps are `a / (k0 + k)` with `a = k0 / L` and `k0 = max(L / m, steps / 10)`,
/// where `L` and `m` are the extreme eigenvalues of the matrix: close to
/// `1 / L` for the first `k0` steps, then decaying like `1 / k`. The subgradient of `|t|` is taken as 0 at `t = 0`.
/// Returns the best of the best iterate and the weighted iterate average.
pub fn oracle_solve(problem: &DenseProblem, steps: usize) -> Result<OracleSolution> {
    let n = problem.num_unknowns();
    if n > MAX_ORACLE_DOFS {
        return Err(Error::OracleTooLarge {
            dofs: n,
            limit: MAX_ORACLE_DOFS,
        });
    }
    if n == 0 {
        return Ok(OracleSolution {
            v: DVector::zeros(0),
            objective: 0.0,
            checkpoints: vec![0.0],
        });
    }
    let eig = problem.matrix.clone().symmetric_eigen().eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo > 0.0) {
        return Err(Error::Configuration("oracle matrix is not positive definite".into()));
    }
    let k0 = (hi / lo).ceil().max((steps / 10) as f64);
    let a = k0 / hi;

    let mut v = problem.project(&DVector::zeros(n));
    let mut best = v.clone();
    let mut best_obj = objective(problem, &v);
    let mut avg = DVector::zeros(n);
    let mut avg_weight = 0.0;
    let every = (steps / 100).max(1);
    let mut checkpoints = Vec::new();
    for k in 0..steps {
        let mut g = problem.gradient(&v);
        for f in &problem.friction {
            if v[f.index] != 0.0 {
                g[f.index] += f.weight * f.xi * v[f.index].signum();
            }
        }
        let step = a / (k0 + k as f64);
        v = problem.project(&(&v - step * g));
        let obj = objective(problem, &v);
        if obj < best_obj {
            best_obj = obj;
            best.copy_from(&v);
        }
        // average over the second half of the run
        if 2 * k >= steps {
            avg += step * &v;
            avg_weight += step;
        }
        if (k + 1) % every == 0 {
            checkpoints.push(best_obj);
        }
    }
    if avg_weight > 0.0 {
        let mean = problem.project(&(avg / avg_weight));
        let obj = objective(problem, &mean);
        if obj < best_obj {
            best_obj = obj;
            best = mean;
        }
    }
    if checkpoints.last() != Some(&best_obj) {
        checkpoints.push(best_obj);
    }
    Ok(OracleSolution {
        v: best,
        objective: best_obj,
        checkpoints,
    })
}

/// Minimizer of the smooth energy subject to `D v = 0`, via a nullspace basis
/// of the dense divergence. Requires a problem without friction unknowns.
pub fn saddle_point_solve(problem: &DenseProblem) -> Result<DVector<f64>> {
    if !problem.friction.is_empty() {
        return Err(Error::invalid("saddle-point oracle needs an empty friction boundary"));
    }
    let n = problem.num_unknowns();
    if n > MAX_ORACLE_DOFS {
        return Err(Error::OracleTooLarge {
            dofs: n,
            limit: MAX_ORACLE_DOFS,
        });
    }
    let null = nullspace(&problem.divergence);
    if null.ncols() == 0 {
        return Ok(DVector::zeros(n));
    }
    let reduced = null.transpose() * &problem.matrix * &null;
    let rhs = null.transpose() * &problem.load;
    let y = reduced
        .cholesky()
        .ok_or_else(|| Error::Configuration("reduced saddle-point matrix is singular".into()))?
        .solve(&rhs);
    Ok(null * y)
}

/// Orthonormal basis of the kernel of `m`.
pub fn nullspace(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.ncols();
    // pad with zero rows so the SVD yields a full set of right vectors
    let rows = m.nrows().max(n);
    let mut padded = DMatrix::zeros(rows, n);
    padded.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested v_t");
    let smax = svd.singular_values.max();
    let tol = 1e-10 * smax.max(1.0);
    let keep: Vec<usize> = (0..n).filter(|&i| svd.singular_values[i] <= tol).collect();
    let mut out = DMatrix::zeros(n, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        out.set_column(c, &vt.row(i).transpose());
    }
    out
}
