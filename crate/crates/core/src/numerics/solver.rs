//! Damped Newton iteration for two-equation nonlinear systems.

use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};

/// Stopping rule and step control for [`solve_newton_2d`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Convergence threshold on the largest scaled residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Fraction of the full Newton step tried first, in (0, 1].
    pub damping: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100,
            damping: 1.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(CalibError::InvalidConfig(format!("solver tol must be > 0, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(CalibError::InvalidConfig("solver max_iter must be >= 1".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(CalibError::InvalidConfig(format!(
                "solver damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        Ok(())
    }
}

/// A system `F(x) = 0` in two unknowns.
pub trait NonlinearSystem2 {
    fn residual(&self, x: [f64; 2]) -> [f64; 2];

    /// `J[i][j] = dF_i / dx_j`.
    fn jacobian(&self, x: [f64; 2]) -> [[f64; 2]; 2];

    /// Positive magnitudes the residuals are divided by before the
    /// convergence test.
    fn scale(&self, _x: [f64; 2]) -> [f64; 2] {
        [1.0, 1.0]
    }

    /// Whether `x` lies in the domain of the system.
    fn admissible(&self, _x: [f64; 2]) -> bool {
        true
    }

    fn scaled_residual(&self, x: [f64; 2]) -> f64 {
        let r = self.residual(x);
        let s = self.scale(x);
        let v = (r[0] / s[0]).abs().max((r[1] / s[1]).abs());
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

/// Adapter turning a residual closure and a Jacobian closure into a system.
pub struct FnSystem<R, J> {
    residual: R,
    jacobian: J,
}

impl<R, J> FnSystem<R, J>
where
    R: Fn(f64, f64) -> [f64; 2],
    J: Fn(f64, f64) -> [[f64; 2]; 2],
{
    pub fn new(residual: R, jacobian: J) -> Self {
        Self { residual, jacobian }
    }
}

impl<R, J> NonlinearSystem2 for FnSystem<R, J>
where
    R: Fn(f64, f64) -> [f64; 2],
    J: Fn(f64, f64) -> [[f64; 2]; 2],
{
    fn residual(&self, x: [f64; 2]) -> [f64; 2] {
        (self.residual)(x[0], x[1])
    }

    fn jacobian(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        (self.jacobian)(x[0], x[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSolution {
    pub point: [f64; 2],
    pub iterations: usize,
    /// Largest scaled residual at `point`.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    MaxIterations,
    /// No step length along the Newton direction reduced the residual.
    Stalled,
    /// Every trial step along the Newton direction left the domain.
    LeftDomain,
    SingularJacobian,
    NonFiniteStart,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonFailure {
    pub kind: FailureKind,
    /// Last accepted iterate.
    pub point: [f64; 2],
    pub iterations: usize,
    pub residual: f64,
}

const MAX_HALVINGS: usize = 60;

/// Solves a two-variable system by Newton's method with an analytic
/// Jacobian. The step starts at `cfg.damping` times the Newton step and is
/// halved while it leaves the domain or fails to reduce the largest scaled
/// residual.
pub fn solve_newton_2d<S: NonlinearSystem2 + ?Sized>(
    system: &S,
    init: [f64; 2],
    cfg: &SolverConfig,
) -> std::result::Result<NewtonSolution, NewtonFailure> {
    let mut x = init;
    let mut norm = system.scaled_residual(x);
    let mut iterations = 0;
    let fail = |kind, point, iterations, residual| NewtonFailure {
        kind,
        point,
        iterations,
        residual,
    };
    if !(init[0].is_finite() && init[1].is_finite()) {
        return Err(fail(FailureKind::NonFiniteStart, x, 0, norm));
    }
    while norm >= cfg.tol {
        if iterations == cfg.max_iter {
            return Err(fail(FailureKind::MaxIterations, x, iterations, norm));
        }
        iterations += 1;

        let r = system.residual(x);
        let j = system.jacobian(x);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            return Err(fail(FailureKind::SingularJacobian, x, iterations, norm));
        }
        let dx = [
            -(j[1][1] * r[0] - j[0][1] * r[1]) / det,
            -(-j[1][0] * r[0] + j[0][0] * r[1]) / det,
        ];

        let mut step = cfg.damping;
        let mut any_admissible = false;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial = [x[0] + step * dx[0], x[1] + step * dx[1]];
            if system.admissible(trial) {
                any_admissible = true;
                let trial_norm = system.scaled_residual(trial);
                if trial_norm < norm {
                    accepted = Some((trial, trial_norm));
                    break;
                }
            }
            step *= 0.5;
        }
        match accepted {
            Some((trial, trial_norm)) => {
                x = trial;
                norm = trial_norm;
            }
            None if !any_admissible => {
                return Err(fail(FailureKind::LeftDomain, x, iterations, norm));
            }
            None => return Err(fail(FailureKind::Stalled, x, iterations, norm)),
        }
    }
    Ok(NewtonSolution {
        point: x,
        iterations,
        residual: norm,
    })
}

impl From<NewtonFailure> for CalibError {
    fn from(f: NewtonFailure) -> Self {
        CalibError::NoConvergence {
            iterations: f.iterations,
            residual: f.residual,
        }
    }
}
