//! Cross-checks of the solvers against the dense oracles on tiny meshes.
//! Run by the `verify` subcommand.

use crate::admm::{run_nisv, VelocityProblem};
use crate::assembly::{velocity_l2_norm, CellField, VelocityField};
use crate::error::Result;
use crate::mesh::{generate_rectangle, BoundaryTag, Mesh, Point, Side, SideTags};
use crate::oracle::{objective, oracle_solve, saddle_point_solve, DenseProblem};
use crate::outer::{run_nisp, Epsilon, FrictionBound, SolverConfig};

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}: {}", self.name, self.detail)
    }
}

fn outcome(name: &str, r: Result<(bool, String)>) -> CheckOutcome {
    let (passed, detail) = r.unwrap_or_else(|e| (false, format!("error: {e}")));
    CheckOutcome {
        name: name.to_string(),
        passed,
        detail,
    }
}

/// Lid-like shear pushing along the bottom wall.
fn bottom_shear(c: f64) -> impl Fn(Point) -> [f64; 2] + Copy {
    move |x| [c * (1.0 - x[1]), 0.0]
}

#[derive(Clone, Debug)]
pub struct OracleComparison {
    pub admm_energy: f64,
    pub oracle_energy: f64,
    pub velocity_l2_gap: f64,
    pub oracle_max_divergence: f64,
}

impl OracleComparison {
    pub fn energy_gap(&self) -> f64 {
        (self.admm_energy - self.oracle_energy).abs()
    }
}

/// Runs NISV at zero pressure and the projected-subgradient oracle on the
/// same problem.
pub fn compare_with_oracle(
    mesh: &Mesh,
    force: impl Fn(Point) -> [f64; 2] + Copy,
    eps: f64,
    xi: f64,
    steps: usize,
) -> Result<OracleComparison> {
    let cfg = SolverConfig {
        epsilon: Epsilon::Fixed(eps),
        xi: FrictionBound::Constant(xi),
        inner_tol: 1e-10,
        max_inner: 100_000,
        ..Default::default()
    };
    let problem = VelocityProblem::new(mesh, force, &cfg)?;
    let p = CellField::zeros(mesh.num_triangles());
    let (state, _) = run_nisv(&problem, &p, eps, None)?;
    let dense = DenseProblem::new(mesh, force, &p, cfg.nu, &cfg.xi, eps)?;
    let sol = oracle_solve(&dense, steps)?;
    Ok(OracleComparison {
        admm_energy: problem.energy(&state.u, &p, &state.slip_aux)?,
        oracle_energy: objective(&dense, &sol.v),
        velocity_l2_gap: velocity_l2_norm(mesh, &sol.velocity(&dense).sub(&state.u)),
        oracle_max_divergence: dense.max_divergence(&sol.v),
    })
}

/// L2 gap between the NISP velocity at `eps = 0` and the dense mixed
/// saddle-point solution on an all-Dirichlet mesh.
pub fn saddle_point_gap(mesh: &Mesh, force: impl Fn(Point) -> [f64; 2] + Copy) -> Result<(f64, VelocityField)> {
    let cfg = SolverConfig {
        epsilon: Epsilon::Fixed(0.0),
        tau_p: -1.0,
        inner_tol: 1e-10,
        max_inner: 100_000,
        ..Default::default()
    };
    let sol = run_nisp(mesh, force, &cfg)?;
    let p = CellField::zeros(mesh.num_triangles());
    let dense = DenseProblem::new(mesh, force, &p, cfg.nu, &FrictionBound::Constant(0.0), 0.0)?;
    let exact = dense.to_velocity(&saddle_point_solve(&dense)?);
    Ok((velocity_l2_norm(mesh, &exact.sub(&sol.velocity)), exact))
}

/// Max nodal gap between a very high friction bound and the retagged
/// all-Dirichlet mesh, plus the largest `|Phi|`.
pub fn stick_limit_gap(mesh: &Mesh, force: impl Fn(Point) -> [f64; 2] + Copy, xi: f64) -> Result<(f64, f64)> {
    let cfg = SolverConfig {
        xi: FrictionBound::Constant(xi),
        inner_tol: 1e-10,
        max_inner: 100_000,
        ..Default::default()
    };
    let eps = cfg.epsilon.at(1);
    let p = CellField::zeros(mesh.num_triangles());
    let slip = VelocityProblem::new(mesh, force, &cfg)?;
    let (a, _) = run_nisv(&slip, &p, eps, None)?;
    let fixed_mesh = mesh.with_friction_as_dirichlet();
    let stuck = VelocityProblem::new(&fixed_mesh, force, &cfg)?;
    let (b, _) = run_nisv(&stuck, &p, eps, None)?;
    let gap =
        a.u.values
            .iter()
            .zip(&b.u.values)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let phi = a.slip_aux.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok((gap, phi))
}

pub fn run_all() -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    for (n, steps) in [(2usize, 100_000usize), (4, 20_000)] {
        let name = format!("nisv vs subgradient oracle, {n}x{n} friction-bottom cavity");
        out.push(outcome(
            &name,
            (|| {
                let m = generate_rectangle(n, n, 1.0, 1.0, SideTags::friction_on(&[Side::Bottom]))?;
                let c = compare_with_oracle(&m, bottom_shear(20.0), 1e-2, 0.1, steps)?;
                let rel = c.energy_gap() / (1.0 + c.oracle_energy.abs());
                Ok((
                    rel <= 1e-4 && c.velocity_l2_gap <= 1e-3,
                    format!(
                        "energy {:.10e} vs {:.10e} (rel gap {rel:.2e}), velocity L2 gap {:.2e}",
                        c.admm_energy, c.oracle_energy, c.velocity_l2_gap
                    ),
                ))
            })(),
        ));
    }
    for n in [2usize, 8] {
        let name = format!("nisp at eps = 0 vs mixed saddle-point oracle, {n}x{n} cavity");
        out.push(outcome(
            &name,
            (|| {
                let m = generate_rectangle(n, n, 1.0, 1.0, SideTags::all(BoundaryTag::Dirichlet))?;
                let (gap, exact) = saddle_point_gap(&m, |x| [-x[1], 0.0])?;
                Ok((
                    gap <= 1e-4,
                    format!(
                        "velocity L2 gap {gap:.2e} (oracle L2 norm {:.2e})",
                        velocity_l2_norm(&m, &exact)
                    ),
                ))
            })(),
        ));
    }
    out.push(outcome(
        "stick limit xi = 1e6 vs retagged Dirichlet, 4x4 cavity",
        (|| {
            let m = generate_rectangle(4, 4, 1.0, 1.0, SideTags::friction_on(&[Side::Bottom]))?;
            let (gap, phi) = stick_limit_gap(&m, bottom_shear(20.0), 1e6)?;
            Ok((
                gap <= 1e-6 && phi <= 1e-8,
                format!("max nodal gap {gap:.2e}, max |Phi| {phi:.2e}"),
            ))
        })(),
    ));
    out
}
