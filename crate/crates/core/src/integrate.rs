//! Trapezoidal time stepping of `Ψ_t = A_h Ψ` and trajectory recording.

use std::path::Path;

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::discretize::{Grid, SecondOrderSystem, StateVector};
use crate::model::InitialCondition;
use crate::{output, Error, Result};

/// One-step map of the trapezoidal rule for a fixed `(sys, dt)`.
///
/// The velocity update solves `(M + dt/2·D + dt²/4·K) v' = …`, which is the
/// block elimination of `(E − dt/2·G) Ψ' = (E + dt/2·G) Ψ`.
pub struct TrapezoidalStepper<'a> {
    sys: &'a SecondOrderSystem,
    dt: f64,
    lu: LU<f64, Dyn, Dyn>,
}

impl<'a> TrapezoidalStepper<'a> {
    /// Any finite nonzero `dt` is accepted; a negative step runs backwards.
    pub fn new(sys: &'a SecondOrderSystem, dt: f64) -> Result<Self> {
        if !dt.is_finite() || dt == 0.0 {
            return Err(Error::TimeStep(format!("step size must be finite and nonzero (got {dt})")));
        }
        let s: DMatrix<f64> = &sys.mfull + &sys.dmat * (0.5 * dt) + &sys.k * (0.25 * dt * dt);
        let lu = s.lu();
        if !lu.is_invertible() {
            return Err(Error::Internal(format!("trapezoidal step matrix is singular for dt = {dt}")));
        }
        Ok(Self { sys, dt, lu })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&self, psi: &StateVector) -> Result<StateVector> {
        let n = self.sys.n();
        if psi.u.len() != n || psi.v.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: psi.u.len().max(psi.v.len()),
            });
        }
        let half = 0.5 * self.dt;
        let sys = self.sys;
        let ru: DVector<f64> = &psi.u + &psi.v * half;
        let rv: DVector<f64> = &sys.mfull * &psi.v - (&sys.k * &psi.u + &sys.dmat * &psi.v) * half;
        let rhs = rv - &sys.k * &ru * half;
        let v_new = self
            .lu
            .solve(&rhs)
            .ok_or_else(|| Error::Internal("trapezoidal solve failed".into()))?;
        let u_new = ru + &v_new * half;
        Ok(StateVector { u: u_new, v: v_new })
    }
}

/// Single trapezoidal step; factors the step matrix on every call.
pub fn step_trapezoidal(sys: &SecondOrderSystem, psi: &StateVector, dt: f64) -> Result<StateVector> {
    if !(dt > 0.0) {
        return Err(Error::TimeStep(format!("dt must be positive (got {dt})")));
    }
    TrapezoidalStepper::new(sys, dt)?.step(psi)
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub dt: f64,
    pub t_final: f64,
    pub record_every: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Number of whole steps of size `dt` that fit in `t_final`.
pub fn step_count(dt: f64, t_final: f64) -> usize {
    let ratio = t_final / dt;
    (ratio + 1e-9 * ratio.max(1.0)).floor() as usize
}

fn check_run(dt: f64, t_final: f64, record_every: usize) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::TimeStep(format!("dt must be positive (got {dt})")));
    }
    if !(t_final >= dt) || !t_final.is_finite() {
        return Err(Error::TimeStep(format!(
            "final time must be at least dt (got T = {t_final}, dt = {dt})"
        )));
    }
    if record_every == 0 {
        return Err(Error::TimeStep("record_every must be at least 1".into()));
    }
    Ok(())
}

/// Steps from `psi0` and hands every recorded `(t, state)` to `visit`,
/// starting with `t = 0`.
pub fn simulate_from<F>(
    sys: &SecondOrderSystem,
    psi0: StateVector,
    dt: f64,
    t_final: f64,
    record_every: usize,
    mut visit: F,
) -> Result<()>
where
    F: FnMut(f64, &StateVector) -> Result<()>,
{
    check_run(dt, t_final, record_every)?;
    if psi0.u.len() != sys.n() || psi0.v.len() != sys.n() {
        return Err(Error::Dimension {
            expected: sys.n(),
            got: psi0.u.len(),
        });
    }
    let stepper = TrapezoidalStepper::new(sys, dt)?;
    let steps = step_count(dt, t_final);
    let mut psi = psi0;
    visit(0.0, &psi)?;
    for k in 1..=steps {
        psi = stepper.step(&psi)?;
        if k % record_every == 0 {
            visit(k as f64 * dt, &psi)?;
        }
    }
    Ok(())
}

pub fn simulate(
    sys: &SecondOrderSystem,
    ic: &InitialCondition,
    dt: f64,
    t_final: f64,
    record_every: usize,
) -> Result<Trajectory> {
    let psi0 = StateVector::from_initial_condition(&sys.grid, &sys.params, ic)?;
    simulate_state(sys, psi0, dt, t_final, record_every)
}

pub fn simulate_state(
    sys: &SecondOrderSystem,
    psi0: StateVector,
    dt: f64,
    t_final: f64,
    record_every: usize,
) -> Result<Trajectory> {
    let mut times = Vec::new();
    let mut states = Vec::new();
    simulate_from(sys, psi0, dt, t_final, record_every, |t, psi| {
        times.push(t);
        states.push(psi.clone());
        Ok(())
    })?;
    Ok(Trajectory {
        times,
        states,
        dt,
        t_final,
        record_every,
    })
}

/// Rows `t, x, w, w_t` for every recorded time and every node, including the
/// clamped left end.
pub fn snapshot_rows(grid: &Grid, t: f64, psi: &StateVector) -> Vec<[f64; 4]> {
    let mut rows = Vec::with_capacity(psi.len() + 1);
    rows.push([t, grid.x1[0], 0.0, 0.0]);
    for (i, x) in grid.dof_coordinates().into_iter().enumerate() {
        rows.push([t, x, psi.u[i], psi.v[i]]);
    }
    rows
}

pub fn write_snapshots(path: &Path, grid: &Grid, traj: &Trajectory) -> Result<()> {
    let rows = traj
        .times
        .iter()
        .zip(&traj.states)
        .flat_map(|(&t, psi)| snapshot_rows(grid, t, psi));
    output::write_csv(path, &["t", "x", "w", "w_t"], rows)
}
