//! ADMM for the velocity problem at frozen pressure.
//!
//! The constraints `u_tau = Phi` on the friction boundary and
//! `div u = Lambda` in the domain are dualized with multipliers `lambda`
//! and `mu`. One iteration is an exact block minimization of the augmented
//! Lagrangian in `u`, then `Lambda`, then `Phi`, followed by dual ascent:
//!
//! ```text
//! lambda <- lambda + rho (u_tau - Phi)
//! mu     <- mu     + rho (div u - Lambda)
//! ```
//!
//! The boundary inner product is lumped, so the `Phi` and `lambda` updates
//! are nodal; `Lambda` and `mu` are elementwise.

use crate::assembly::{
    assemble_divdiv, assemble_load, assemble_viscous, boundary_l2_norm, cell_inner, cell_l2_norm, element_divergence,
    pressure_coupling, tangential_load, tangential_mass_cartesian, tangential_trace, velocity_h1_norm, CellField,
    Constraints, TangentialTrace, VelocityField,
};
use crate::error::{Error, Result};
use crate::linalg::{cg_solve_from, dot, CsrMatrix};
use crate::mesh::{BoundaryFrame, Mesh, Point};
use crate::outer::{LambdaStepMode, SolverConfig};

/// Primal and dual iterate of the ADMM loop.
#[derive(Clone, Debug, PartialEq)]
pub struct AdmmState {
    pub u: VelocityField,
    /// Auxiliary divergence `Lambda`, one value per element.
    pub div_aux: CellField,
    /// Auxiliary slip `Phi_tau`, one value per friction frame.
    pub slip_aux: TangentialTrace,
    /// Friction multiplier `lambda` (minus the tangential traction).
    pub slip_multiplier: TangentialTrace,
    /// Divergence multiplier `mu`.
    pub div_multiplier: CellField,
    /// Iterations performed so far.
    pub k: usize,
}

impl AdmmState {
    pub fn zeros(mesh: &Mesh, num_frames: usize) -> Self {
        AdmmState {
            u: VelocityField::zeros(mesh.num_vertices()),
            div_aux: CellField::zeros(mesh.num_triangles()),
            slip_aux: TangentialTrace::zeros(num_frames),
            slip_multiplier: TangentialTrace::zeros(num_frames),
            div_multiplier: CellField::zeros(mesh.num_triangles()),
            k: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdmmReport {
    /// `||u_tau - Phi||` in the lumped boundary norm, per iteration.
    pub slip_residuals: Vec<f64>,
    /// `||div u - Lambda||_0`, per iteration.
    pub div_residuals: Vec<f64>,
    /// `||u^{k+1} - u^k||_1`, per iteration.
    pub velocity_changes: Vec<f64>,
    /// `J(u) + j(u)`, per iteration.
    pub energies: Vec<f64>,
    /// `max_K |Lambda_K|` after each Lambda step.
    pub max_div_aux: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizer of `(rho/2) phi^2 - omega phi` over `[-eps, eps]`.
pub fn clamp_divergence(omega: f64, rho: f64, eps: f64) -> f64 {
    (omega / rho).clamp(-eps, eps)
}

/// Minimizer of `xi |psi| - v psi + (rho/2) psi^2`: soft thresholding of
/// `v` at `xi`, scaled by `1/rho`.
pub fn shrink(v: f64, xi: f64, rho: f64) -> f64 {
    let theta = v.abs();
    if theta <= xi {
        0.0
    } else {
        (theta - xi) / (rho * theta) * v
    }
}

/// Operators and data of the velocity problem, assembled once per mesh and
/// configuration and reused across outer iterations.
#[derive(Clone, Debug)]
pub struct VelocityProblem<'m> {
    mesh: &'m Mesh,
    constraints: Constraints,
    viscous: CsrMatrix,
    /// `viscous + rho divdiv + rho M_tau`, rotated and constrained.
    system: CsrMatrix,
    body_load: Vec<f64>,
    xi: Vec<f64>,
    cfg: SolverConfig,
}

impl<'m> VelocityProblem<'m> {
    pub fn new(mesh: &'m Mesh, force: impl Fn(Point) -> [f64; 2], cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let constraints = Constraints::new(mesh);
        let xi = cfg.xi.nodal_values(constraints.frames().len())?;
        let viscous = assemble_viscous(mesh, cfg.nu);
        let augmented = viscous.add_scaled(&assemble_divdiv(mesh), cfg.rho).add_scaled(
            &tangential_mass_cartesian(mesh.num_vertices(), constraints.frames()),
            cfg.rho,
        );
        let system = constraints.apply(&augmented, &vec![0.0; augmented.dim()])?.matrix;
        Ok(VelocityProblem {
            mesh,
            constraints,
            viscous,
            system,
            body_load: assemble_load(mesh, force),
            xi,
            cfg: cfg.clone(),
        })
    }

    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    pub fn frames(&self) -> &[BoundaryFrame] {
        self.constraints.frames()
    }

    pub fn constraints(&self) -> &Constraints {
        &self.constraints
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn body_load(&self) -> &[f64] {
        &self.body_load
    }

    /// Constrained velocity matrix in the rotated numbering.
    pub fn system_matrix(&self) -> &CsrMatrix {
        &self.system
    }

    pub fn initial_state(&self) -> AdmmState {
        AdmmState::zeros(self.mesh, self.frames().len())
    }

    /// Cartesian right-hand side of the velocity step.
    pub fn velocity_rhs(&self, state: &AdmmState, pressure: &CellField) -> Result<Vec<f64>> {
        let rho = self.cfg.rho;
        let mut rhs = self.body_load.clone();
        let cell_source = CellField {
            values: state
                .div_aux
                .values
                .iter()
                .zip(&state.div_multiplier.values)
                .zip(&pressure.values)
                .map(|((l, m), p)| p + rho * l - m)
                .collect(),
        };
        let coupling = pressure_coupling(self.mesh, &cell_source)?;
        let g: Vec<f64> = state
            .slip_aux
            .values
            .iter()
            .zip(&state.slip_multiplier.values)
            .map(|(phi, lam)| rho * phi - lam)
            .collect();
        let boundary = tangential_load(self.mesh.num_vertices(), self.frames(), &g);
        for ((r, c), b) in rhs.iter_mut().zip(&coupling).zip(&boundary) {
            *r += c + b;
        }
        Ok(rhs)
    }

    /// Exact minimization in `u`: solves
    /// `[A + rho D^T D + rho M_tau] u = f + B^T(p + rho Lambda - mu) + M_tau (rho Phi - lambda)`
    /// on the constrained space, warm-started from `state.u`.
    pub fn velocity_step(&self, state: &AdmmState, pressure: &CellField) -> Result<VelocityField> {
        let mut rhs = self.constraints.rotate_vector(&self.velocity_rhs(state, pressure)?);
        self.constraints.zero_constrained(&mut rhs);
        let mut guess = self.constraints.rotate_vector(&state.u.values);
        self.constraints.zero_constrained(&mut guess);
        let max_iter = self.cfg.cg_max_iter.unwrap_or(10 * self.system.dim());
        let out = cg_solve_from(&self.system, &rhs, Some(&guess), self.cfg.cg_tol, max_iter)?;
        Ok(VelocityField {
            values: self.constraints.unrotate_vector(&out.x),
        })
    }

    /// `omega = mu + rho div u`, with `state.u` the new velocity.
    fn omega(&self, state: &AdmmState) -> Result<CellField> {
        let div = element_divergence(self.mesh, &state.u)?;
        Ok(CellField {
            values: state
                .div_multiplier
                .values
                .iter()
                .zip(&div.values)
                .map(|(m, d)| m + self.cfg.rho * d)
                .collect(),
        })
    }

    /// Minimization in `Lambda` given the new velocity in `state.u`.
    pub fn lambda_step(&self, state: &AdmmState, eps: f64) -> Result<CellField> {
        let rho = self.cfg.rho;
        if !(rho > 0.0) {
            return Err(Error::Configuration(format!("rho must be > 0, got {rho}")));
        }
        let omega = self.omega(state)?;
        let values = match self.cfg.lambda_step_mode {
            LambdaStepMode::Clamp => omega.values.iter().map(|&w| clamp_divergence(w, rho, eps)).collect(),
            LambdaStepMode::PaperBall => {
                let denom = (rho * eps).max(cell_l2_norm(self.mesh, &omega));
                if denom > 0.0 {
                    omega.values.iter().map(|w| w / denom).collect()
                } else {
                    vec![0.0; omega.len()]
                }
            }
        };
        Ok(CellField { values })
    }

    /// Nodal shrinkage of `lambda + rho u_tau`, with `state.u` the new velocity.
    pub fn phi_step(&self, state: &AdmmState) -> TangentialTrace {
        let rho = self.cfg.rho;
        let ut = tangential_trace(&state.u, self.frames());
        TangentialTrace {
            values: state
                .slip_multiplier
                .values
                .iter()
                .zip(&ut.values)
                .zip(&self.xi)
                .map(|((lam, u), xi)| shrink(lam + rho * u, *xi, rho))
                .collect(),
        }
    }

    /// Dual ascent on both multipliers from the primal blocks in `state`.
    pub fn multiplier_update(&self, state: &AdmmState) -> Result<(TangentialTrace, CellField)> {
        let rho = self.cfg.rho;
        let ut = tangential_trace(&state.u, self.frames());
        let slip = TangentialTrace {
            values: state
                .slip_multiplier
                .values
                .iter()
                .zip(ut.values.iter().zip(&state.slip_aux.values))
                .map(|(lam, (u, phi))| lam + rho * (u - phi))
                .collect(),
        };
        let div = element_divergence(self.mesh, &state.u)?;
        let cell = CellField {
            values: state
                .div_multiplier
                .values
                .iter()
                .zip(div.values.iter().zip(&state.div_aux.values))
                .map(|(m, (d, l))| m + rho * (d - l))
                .collect(),
        };
        Ok((slip, cell))
    }

    /// `J(u) = (1/2) A(u, u) - F(u) - (p, div u)`.
    pub fn smooth_energy(&self, u: &VelocityField, pressure: &CellField) -> Result<f64> {
        let coupling = pressure_coupling(self.mesh, pressure)?;
        Ok(0.5 * self.viscous.quadratic_form(&u.values) - dot(&self.body_load, &u.values) - dot(&coupling, &u.values))
    }

    /// Lumped friction functional `sum_i w_i xi_i |t_i|`.
    pub fn friction_energy(&self, trace: &TangentialTrace) -> f64 {
        self.frames()
            .iter()
            .zip(&self.xi)
            .zip(&trace.values)
            .map(|((f, xi), t)| f.weight * xi * t.abs())
            .sum()
    }

    /// `J(u) + j(slip)`.
    pub fn energy(&self, u: &VelocityField, pressure: &CellField, slip: &TangentialTrace) -> Result<f64> {
        Ok(self.smooth_energy(u, pressure)? + self.friction_energy(slip))
    }

    /// Augmented Lagrangian at `state`; `+inf` if `Lambda` leaves `[-eps, eps]`.
    pub fn augmented_lagrangian(&self, state: &AdmmState, pressure: &CellField, eps: f64) -> Result<f64> {
        if state.div_aux.values.iter().any(|l| l.abs() > eps) {
            return Ok(f64::INFINITY);
        }
        let rho = self.cfg.rho;
        let ut = tangential_trace(&state.u, self.frames());
        let slip_gap: Vec<f64> = ut
            .values
            .iter()
            .zip(&state.slip_aux.values)
            .map(|(u, p)| u - p)
            .collect();
        let div = element_divergence(self.mesh, &state.u)?;
        let div_gap = CellField {
            values: div
                .values
                .iter()
                .zip(&state.div_aux.values)
                .map(|(d, l)| d - l)
                .collect(),
        };
        let lumped: f64 = self
            .frames()
            .iter()
            .zip(state.slip_multiplier.values.iter().zip(&slip_gap))
            .map(|(f, (lam, g))| f.weight * lam * g)
            .sum();
        let slip_pen = boundary_l2_norm(self.frames(), &slip_gap).powi(2);
        Ok(self.energy(&state.u, pressure, &state.slip_aux)?
            + lumped
            + cell_inner(self.mesh, &state.div_multiplier, &div_gap)
            + 0.5 * rho * cell_inner(self.mesh, &div_gap, &div_gap)
            + 0.5 * rho * slip_pen)
    }

    /// Primal residuals `(||u_tau - Phi||, ||div u - Lambda||_0)` of `state`.
    pub fn primal_residuals(&self, state: &AdmmState) -> Result<(f64, f64)> {
        let ut = tangential_trace(&state.u, self.frames());
        let gap: Vec<f64> = ut
            .values
            .iter()
            .zip(&state.slip_aux.values)
            .map(|(u, p)| u - p)
            .collect();
        let div = element_divergence(self.mesh, &state.u)?;
        let div_gap = CellField {
            values: div
                .values
                .iter()
                .zip(&state.div_aux.values)
                .map(|(d, l)| d - l)
                .collect(),
        };
        Ok((boundary_l2_norm(self.frames(), &gap), cell_l2_norm(self.mesh, &div_gap)))
    }

    /// One full ADMM iteration in place; returns the H1 velocity change.
    pub fn iterate(&self, state: &mut AdmmState, pressure: &CellField, eps: f64) -> Result<f64> {
        let u_next = self.velocity_step(state, pressure)?;
        let du = velocity_h1_norm(self.mesh, &u_next.sub(&state.u));
        state.u = u_next;
        state.div_aux = self.lambda_step(state, eps)?;
        state.slip_aux = self.phi_step(state);
        let (slip, cell) = self.multiplier_update(state)?;
        state.slip_multiplier = slip;
        state.div_multiplier = cell;
        state.k += 1;
        Ok(du)
    }
}

/// Runs ADMM at frozen pressure until the H1 velocity change and both
/// primal residuals drop below `inner_tol`.
pub fn run_nisv(
    problem: &VelocityProblem,
    pressure: &CellField,
    eps: f64,
    warm_start: Option<AdmmState>,
) -> Result<(AdmmState, AdmmReport)> {
    let cfg = problem.config();
    if !(eps >= 0.0) {
        return Err(Error::Configuration(format!("epsilon must be >= 0, got {eps}")));
    }
    if pressure.len() != problem.mesh().num_triangles() {
        return Err(Error::DimensionMismatch {
            expected: problem.mesh().num_triangles(),
            got: pressure.len(),
        });
    }
    let mut state = warm_start.unwrap_or_else(|| problem.initial_state());
    let mut report = AdmmReport::default();
    for _ in 0..cfg.max_inner {
        let du = problem.iterate(&mut state, pressure, eps)?;
        let (r1, r2) = problem.primal_residuals(&state)?;
        let ut = tangential_trace(&state.u, problem.frames());
        report.velocity_changes.push(du);
        report.slip_residuals.push(r1);
        report.div_residuals.push(r2);
        report.energies.push(problem.energy(&state.u, pressure, &ut)?);
        report
            .max_div_aux
            .push(state.div_aux.values.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        report.iterations += 1;
        if du < cfg.inner_tol && r1 < cfg.inner_tol && r2 < cfg.inner_tol {
            report.converged = true;
            return Ok((state, report));
        }
    }
    Err(Error::AdmmNotConverged(Box::new(report)))
}
