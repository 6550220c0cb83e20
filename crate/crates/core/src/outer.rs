//! Fixed-point pressure iteration around the ADMM velocity solver.
//!
//! Each outer step solves the velocity problem at frozen pressure `p^n`
//! and then sets `p^{n+1} = p^n + tau_p * P0(div u^{n+1})`, where `P0`
//! removes the area-weighted mean.

use crate::admm::{run_nisv, AdmmReport, AdmmState, VelocityProblem};
use crate::assembly::{
    cell_l2_norm, element_divergence, project_mean_zero, velocity_h1_norm, CellField, VelocityField,
};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};

/// Width of the admissible divergence interval `[-eps, eps]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Epsilon {
    Fixed(f64),
    /// `eps_n = initial / n` at outer iteration `n` (1-based).
    Schedule {
        initial: f64,
    },
}

impl Epsilon {
    pub fn at(&self, outer_iteration: usize) -> f64 {
        match *self {
            Epsilon::Fixed(e) => e,
            Epsilon::Schedule { initial } => initial / outer_iteration.max(1) as f64,
        }
    }
}

/// Friction threshold `xi >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub enum FrictionBound {
    Constant(f64),
    /// One value per friction-boundary frame, in frame order.
    PerNode(Vec<f64>),
}

impl FrictionBound {
    pub fn nodal_values(&self, num_frames: usize) -> Result<Vec<f64>> {
        match self {
            FrictionBound::Constant(c) => Ok(vec![*c; num_frames]),
            FrictionBound::PerNode(v) if v.len() == num_frames => Ok(v.clone()),
            FrictionBound::PerNode(v) => Err(Error::DimensionMismatch {
                expected: num_frames,
                got: v.len(),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LambdaStepMode {
    /// Elementwise clamp of `omega / rho` onto `[-eps, eps]`.
    Clamp,
    /// `omega / max(rho * eps, ||omega||_0)`; kept for comparison only, it
    /// does not guarantee `|Lambda| <= eps`.
    PaperBall,
}

impl LambdaStepMode {
    pub fn name(self) -> &'static str {
        match self {
            LambdaStepMode::Clamp => "clamp",
            LambdaStepMode::PaperBall => "paper-ball",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "clamp" => Some(LambdaStepMode::Clamp),
            "paper-ball" => Some(LambdaStepMode::PaperBall),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Viscosity.
    pub nu: f64,
    /// ADMM penalty.
    pub rho: f64,
    pub epsilon: Epsilon,
    pub xi: FrictionBound,
    /// Pressure step factor. The update uses `+ tau_p`; a negative value
    /// gives the classical descent direction.
    pub tau_p: f64,
    pub inner_tol: f64,
    pub outer_tol: f64,
    pub div_tol: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    pub lambda_step_mode: LambdaStepMode,
    pub warm_start: bool,
    pub cg_tol: f64,
    /// `None` means `10 * n`.
    pub cg_max_iter: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            nu: 1.0,
            rho: 1.0,
            epsilon: Epsilon::Fixed(1e-3),
            xi: FrictionBound::Constant(0.1),
            tau_p: 1.0,
            inner_tol: 1e-8,
            outer_tol: 1e-6,
            div_tol: 1e-6,
            max_inner: 5000,
            max_outer: 200,
            lambda_step_mode: LambdaStepMode::Clamp,
            warm_start: true,
            cg_tol: 1e-10,
            cg_max_iter: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Configuration(m));
        if !(self.nu > 0.0) {
            return bad(format!("nu must be > 0, got {}", self.nu));
        }
        if !(self.rho > 0.0) {
            return bad(format!("rho must be > 0, got {}", self.rho));
        }
        match self.epsilon {
            Epsilon::Fixed(e) if !(e >= 0.0) => return bad(format!("epsilon must be >= 0, got {e}")),
            Epsilon::Schedule { initial } if !(initial > 0.0) => {
                return bad(format!("epsilon schedule needs an initial value > 0, got {initial}"))
            }
            _ => {}
        }
        let xi_ok = match &self.xi {
            FrictionBound::Constant(c) => *c >= 0.0,
            FrictionBound::PerNode(v) => v.iter().all(|x| *x >= 0.0),
        };
        if !xi_ok {
            return bad("xi must be >= 0".into());
        }
        if !(self.tau_p != 0.0 && self.tau_p.is_finite()) {
            return bad(format!("tau_p must be nonzero, got {}", self.tau_p));
        }
        for (name, v) in [
            ("inner_tol", self.inner_tol),
            ("outer_tol", self.outer_tol),
            ("div_tol", self.div_tol),
        ] {
            if !(v > 0.0) {
                return bad(format!("{name} must be > 0, got {v}"));
            }
        }
        if !(self.cg_tol > 0.0 && self.cg_tol < 1.0) {
            return bad(format!("cg_tol must lie in (0, 1), got {}", self.cg_tol));
        }
        if self.max_inner == 0 || self.max_outer == 0 {
            return bad("iteration caps must be >= 1".into());
        }
        Ok(())
    }
}

/// Convergence history of the outer loop, one entry per outer iteration.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OuterReport {
    /// `||u^{n+1} - u^n||_1`.
    pub velocity_changes: Vec<f64>,
    /// `||p^{n+1} - p^n||_0`.
    pub pressure_changes: Vec<f64>,
    /// `||div u^{n+1}||_0`.
    pub divergence_norms: Vec<f64>,
    /// ADMM iterations spent in each outer iteration.
    pub inner_iterations: Vec<usize>,
    /// Divergence width used in each outer iteration.
    pub epsilons: Vec<f64>,
    pub converged: bool,
    /// Whether the final `||div u||_0` is below `div_tol`.
    pub divergence_converged: bool,
}

impl OuterReport {
    pub fn iterations(&self) -> usize {
        self.velocity_changes.len()
    }

    pub fn total_inner_iterations(&self) -> usize {
        self.inner_iterations.iter().sum()
    }
}

/// `p + tau_p * P0(div u)`.
pub fn pressure_update(mesh: &Mesh, p: &CellField, u: &VelocityField, tau_p: f64) -> Result<CellField> {
    let div = project_mean_zero(mesh, &element_divergence(mesh, u)?)?;
    Ok(CellField {
        values: p.values.iter().zip(&div.values).map(|(p, d)| p + tau_p * d).collect(),
    })
}

#[derive(Clone, Debug)]
pub struct NispSolution {
    pub velocity: VelocityField,
    pub pressure: CellField,
    /// Final inner state; its multiplier fields carry the friction traction
    /// and the divergence reaction.
    pub state: AdmmState,
    pub report: OuterReport,
}

/// Why the outer loop stopped.
#[derive(Clone, Debug)]
pub enum StopReason {
    Converged,
    OuterLimit,
    /// ADMM hit `max_inner`; the solution holds the last completed outer step.
    InnerLimit(Box<AdmmReport>),
}

#[derive(Clone, Debug)]
pub struct NispOutcome {
    pub solution: NispSolution,
    pub stop: StopReason,
}

/// Runs the outer loop from `p^0 = 0`.
///
/// On non-convergence of either loop the error carries the report.
pub fn run_nisp(mesh: &Mesh, force: impl Fn(Point) -> [f64; 2], cfg: &SolverConfig) -> Result<NispSolution> {
    let problem = VelocityProblem::new(mesh, force, cfg)?;
    run_nisp_with(&problem, cfg)
}

/// Outer loop on already assembled operators.
pub fn run_nisp_with(problem: &VelocityProblem, cfg: &SolverConfig) -> Result<NispSolution> {
    let out = run_nisp_outcome(problem, cfg)?;
    match out.stop {
        StopReason::Converged => Ok(out.solution),
        StopReason::OuterLimit => Err(Error::OuterNotConverged(Box::new(out.solution.report))),
        StopReason::InnerLimit(inner) => Err(Error::AdmmNotConverged(inner)),
    }
}

/// Like [`run_nisp_with`] but returns the last iterate when a loop hits its
/// iteration cap. Errors are reserved for setup and linear-solver failures.
pub fn run_nisp_outcome(problem: &VelocityProblem, cfg: &SolverConfig) -> Result<NispOutcome> {
    cfg.validate()?;
    let mesh = problem.mesh();
    let mut report = OuterReport::default();
    let mut pressure = CellField::zeros(mesh.num_triangles());
    let mut state = problem.initial_state();
    for n in 1..=cfg.max_outer {
        let eps = cfg.epsilon.at(n);
        let start = cfg.warm_start.then(|| state.clone());
        let (next, inner) = match run_nisv(problem, &pressure, eps, start) {
            Ok(r) => r,
            Err(Error::AdmmNotConverged(inner)) => {
                let solution = NispSolution {
                    velocity: state.u.clone(),
                    pressure,
                    state,
                    report,
                };
                return Ok(NispOutcome {
                    solution,
                    stop: StopReason::InnerLimit(inner),
                });
            }
            Err(e) => return Err(e),
        };
        let next_pressure = pressure_update(mesh, &pressure, &next.u, cfg.tau_p)?;
        let du = velocity_h1_norm(mesh, &next.u.sub(&state.u));
        let dp = cell_l2_norm(
            mesh,
            &CellField {
                values: next_pressure
                    .values
                    .iter()
                    .zip(&pressure.values)
                    .map(|(a, b)| a - b)
                    .collect(),
            },
        );
        let div = cell_l2_norm(mesh, &element_divergence(mesh, &next.u)?);
        report.velocity_changes.push(du);
        report.pressure_changes.push(dp);
        report.divergence_norms.push(div);
        report.inner_iterations.push(inner.iterations);
        report.epsilons.push(eps);
        report.divergence_converged = div < cfg.div_tol;
        state = next;
        pressure = next_pressure;
        if du + dp < cfg.outer_tol {
            report.converged = true;
            break;
        }
    }
    let stop = if report.converged {
        StopReason::Converged
    } else {
        StopReason::OuterLimit
    };
    Ok(NispOutcome {
        solution: NispSolution {
            velocity: state.u.clone(),
            pressure,
            state,
            report,
        },
        stop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_rectangle, BoundaryTag, SideTags};

    #[test]
    fn schedule_values() {
        let s = Epsilon::Schedule { initial: 0.1 };
        assert_eq!(s.at(1), 0.1);
        assert!((s.at(10) - 0.01).abs() < 1e-18);
        assert_eq!(Epsilon::Fixed(0.5).at(7), 0.5);
    }

    #[test]
    fn validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let c = SolverConfig {
            rho: -1.0,
            ..Default::default()
        };
        assert!(c.validate().unwrap_err().to_string().contains("rho must be > 0"));
        let c = SolverConfig {
            epsilon: Epsilon::Schedule { initial: 0.0 },
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = SolverConfig {
            epsilon: Epsilon::Fixed(0.0),
            ..Default::default()
        };
        assert!(c.validate().is_ok());
        let c = SolverConfig {
            xi: FrictionBound::PerNode(vec![0.1, -0.1]),
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = SolverConfig {
            tau_p: 0.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn pressure_update_cases() {
        let m = generate_rectangle(3, 3, 1.0, 1.0, SideTags::all(BoundaryTag::Dirichlet)).unwrap();
        let p = project_mean_zero(
            &m,
            &CellField {
                values: (0..m.num_triangles()).map(|i| (i as f64).sin()).collect(),
            },
        )
        .unwrap();
        let rot = VelocityField::interpolate(&m, |x| [-x[1], x[0]]);
        let radial = VelocityField::interpolate(&m, |x| [x[0], x[1]]);
        for u in [&rot, &radial] {
            let next = pressure_update(&m, &p, u, 1.0).unwrap();
            for (a, b) in next.values.iter().zip(&p.values) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        let wavy = VelocityField::interpolate(&m, |x| [x[0] * x[0], x[1] * x[0]]);
        let mut q = p.clone();
        for _ in 0..5 {
            q = pressure_update(&m, &q, &wavy, 0.7).unwrap();
            assert!(crate::assembly::area_weighted_mean(&m, &q).abs() < 1e-12);
        }
    }

    #[test]
    fn step_sign_at_fixed_eps() {
        let m = generate_rectangle(4, 4, 1.0, 1.0, SideTags::all(BoundaryTag::Dirichlet)).unwrap();
        let eps = 1e-3;
        let literal = SolverConfig {
            epsilon: Epsilon::Fixed(eps),
            max_outer: 30,
            ..Default::default()
        };
        let report = match run_nisp(&m, |_| [1.0, 0.0], &literal) {
            Err(Error::OuterNotConverged(r)) => r,
            other => panic!("expected non-convergence, got {other:?}"),
        };
        // every cell stays saturated, so the pressure keeps moving by eps
        for dp in &report.pressure_changes[10..] {
            assert!((dp - eps).abs() < 1e-2 * eps, "{dp}");
        }
        let descent = SolverConfig {
            tau_p: -1.0,
            max_outer: 2000,
            ..literal
        };
        let sol = run_nisp(&m, |_| [1.0, 0.0], &descent).unwrap();
        assert!(sol.report.converged);
        assert!(*sol.report.divergence_norms.last().unwrap() < 1e-5);
    }
}
