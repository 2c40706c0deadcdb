//! Grids and the averaged finite-difference system `M ü + D u̇ + K u = 0`.
//!
//! Unknown ordering (0-based): segment-1 interior nodes `0..N1`, the shared
//! interface displacement `z` at `N1`, then segment-2 nodes `1..=N2+1` at
//! `N1+1..N1+N2+2`. The last unknown is the free right end.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::model::{validate_params, Gains, InitialCondition, PhysicalParams};
use crate::{output, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub n1: usize,
    pub n2: usize,
    pub h1: f64,
    pub h2: f64,
    /// Segment-1 nodes `x¹_0 = l0, …, x¹_{N1+1} = l1`.
    pub x1: Vec<f64>,
    /// Segment-2 nodes `x²_0 = l1, …, x²_{N2+1} = l2`.
    pub x2: Vec<f64>,
}

pub fn build_grid(p: &PhysicalParams, n1: usize, n2: usize) -> Result<Grid> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::InvalidGrid(format!(
            "interior counts must be at least 1 (got N1 = {n1}, N2 = {n2})"
        )));
    }
    if !(p.l0 < p.l1 && p.l1 < p.l2) {
        return Err(Error::InvalidGrid(format!(
            "endpoints must be strictly increasing (got {}, {}, {})",
            p.l0, p.l1, p.l2
        )));
    }
    let h1 = (p.l1 - p.l0) / (n1 + 1) as f64;
    let h2 = (p.l2 - p.l1) / (n2 + 1) as f64;
    let nodes = |start: f64, end: f64, h: f64, count: usize| -> Vec<f64> {
        let mut x: Vec<f64> = (0..=count + 1).map(|j| start + j as f64 * h).collect();
        x[0] = start;
        x[count + 1] = end;
        x
    };
    Ok(Grid {
        n1,
        n2,
        h1,
        h2,
        x1: nodes(p.l0, p.l1, h1, n1),
        x2: nodes(p.l1, p.l2, h2, n2),
    })
}

impl Grid {
    /// Number of unknowns `N1 + N2 + 2`.
    pub fn dofs(&self) -> usize {
        self.n1 + self.n2 + 2
    }

    pub fn interface_index(&self) -> usize {
        self.n1
    }

    pub fn right_index(&self) -> usize {
        self.n1 + self.n2 + 1
    }

    /// Unknown index of node `j` of `segment`, `None` for the clamped node.
    pub fn dof(&self, segment: usize, j: usize) -> Option<usize> {
        match segment {
            1 => {
                assert!(j <= self.n1 + 1);
                j.checked_sub(1)
            }
            2 => {
                assert!(j <= self.n2 + 1);
                Some(self.n1 + j)
            }
            _ => panic!("segment index must be 1 or 2, got {segment}"),
        }
    }

    /// Coordinates of the unknowns, in unknown order.
    pub fn dof_coordinates(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dofs());
        x.extend_from_slice(&self.x1[1..]);
        x.extend_from_slice(&self.x2[1..]);
        x
    }

    /// All distinct node coordinates from `l0` to `l2`, clamped node first.
    pub fn all_nodes(&self) -> Vec<f64> {
        let mut x = vec![self.x1[0]];
        x.extend(self.dof_coordinates());
        x
    }

    pub fn midpoints(&self, segment: usize) -> Vec<f64> {
        let x = if segment == 1 { &self.x1 } else { &self.x2 };
        x.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn step(&self, segment: usize) -> f64 {
        if segment == 1 {
            self.h1
        } else {
            self.h2
        }
    }

    pub fn cells(&self, segment: usize) -> usize {
        if segment == 1 {
            self.n1 + 1
        } else {
            self.n2 + 1
        }
    }
}

/// How the two cells touching the point mass contribute string inertia.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterfaceMass {
    /// Averaged stencil everywhere, including the interface row.
    #[default]
    Averaged,
    /// Diagonal (lumped) mass on the two interface cells; their interface
    /// halves are absorbed into the point mass. Removes every inertial
    /// coupling between `z` and its neighbours.
    Lumped,
}

impl fmt::Display for InterfaceMass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InterfaceMass::Averaged => "averaged",
            InterfaceMass::Lumped => "lumped",
        })
    }
}

impl FromStr for InterfaceMass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "averaged" => Ok(InterfaceMass::Averaged),
            "lumped" => Ok(InterfaceMass::Lumped),
            other => Err(Error::InvalidParams(format!(
                "unknown interface treatment '{other}' (expected averaged or lumped)"
            ))),
        }
    }
}

/// Assembled matrices of the semi-discrete system.
#[derive(Debug, Clone)]
pub struct SecondOrderSystem {
    pub grid: Grid,
    pub params: PhysicalParams,
    pub gains: Gains,
    pub interface: InterfaceMass,
    /// String inertia (without the point mass).
    pub mseg: DMatrix<f64>,
    /// `mseg` with every entry in the interface row and column that the
    /// energy attributes to the point mass removed.
    pub mkin: DMatrix<f64>,
    /// Inertia carried by the interface unknown in the energy.
    pub m_eff: f64,
    pub mfull: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub dmat: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

pub fn assemble(p: &PhysicalParams, g: &Gains, grid: &Grid) -> Result<SecondOrderSystem> {
    assemble_with(p, g, grid, InterfaceMass::Averaged)
}

pub fn assemble_with(
    p: &PhysicalParams,
    g: &Gains,
    grid: &Grid,
    interface: InterfaceMass,
) -> Result<SecondOrderSystem> {
    validate_params(p, g).into_result()?;
    let expected = build_grid(p, grid.n1, grid.n2)?;
    if (expected.h1 - grid.h1).abs() > 1e-14 * expected.h1
        || (expected.h2 - grid.h2).abs() > 1e-14 * expected.h2
    {
        return Err(Error::InvalidGrid(
            "grid does not match the segment endpoints".into(),
        ));
    }

    let n = grid.dofs();
    let z = grid.interface_index();
    let right = grid.right_index();
    let mut mseg = DMatrix::<f64>::zeros(n, n);
    let mut k = DMatrix::<f64>::zeros(n, n);

    for segment in [1usize, 2] {
        let h = grid.step(segment);
        let rho = p.rho(segment);
        let alpha = p.alpha(segment);
        let cells = grid.cells(segment);
        for c in 0..cells {
            let a = grid.dof(segment, c);
            let b = grid.dof(segment, c + 1);
            let touches_mass = a == Some(z) || b == Some(z);
            let (diag, off) = if interface == InterfaceMass::Lumped && touches_mass {
                (rho * h / 2.0, 0.0)
            } else {
                (rho * h / 4.0, rho * h / 4.0)
            };
            let s = alpha / h;
            for (i, j, mv, kv) in [(a, a, diag, s), (b, b, diag, s), (a, b, off, -s)] {
                if let (Some(i), Some(j)) = (i, j) {
                    mseg[(i, j)] += mv;
                    k[(i, j)] += kv;
                    if i != j {
                        mseg[(j, i)] += mv;
                        k[(j, i)] += kv;
                    }
                }
            }
        }
    }

    let mut mfull = mseg.clone();
    mfull[(z, z)] += p.m;

    let (mkin, m_eff) = match interface {
        InterfaceMass::Averaged => (mseg.clone(), p.m),
        InterfaceMass::Lumped => {
            let mut mk = mseg.clone();
            let absorbed = mk[(z, z)];
            for i in 0..n {
                mk[(z, i)] = 0.0;
                mk[(i, z)] = 0.0;
            }
            (mk, p.m + absorbed)
        }
    };

    let mut dmat = DMatrix::<f64>::zeros(n, n);
    if g.b0 != 0.0 {
        for j in 0..n {
            dmat[(z, j)] = g.b0 * k[(z, j)];
        }
    }
    dmat[(z, z)] += g.b1;
    dmat[(right, right)] += g.d1;

    let chol = Cholesky::new(mfull.clone())
        .ok_or_else(|| Error::Internal("mass matrix is not positive definite".into()))?;

    Ok(SecondOrderSystem {
        grid: grid.clone(),
        params: *p,
        gains: *g,
        interface,
        mseg,
        mkin,
        m_eff,
        mfull,
        k,
        dmat,
        chol,
    })
}

/// Displacement and velocity samples at the unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub u: DVector<f64>,
    pub v: DVector<f64>,
}

impl StateVector {
    pub fn zeros(n: usize) -> Self {
        Self {
            u: DVector::zeros(n),
            v: DVector::zeros(n),
        }
    }

    pub fn new(u: DVector<f64>, v: DVector<f64>) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::Dimension {
                expected: u.len(),
                got: v.len(),
            });
        }
        Ok(Self { u, v })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// `Ψ = (u, v)` stacked into one vector of length `2n`.
    pub fn stacked(&self) -> DVector<f64> {
        let n = self.len();
        let mut out = DVector::zeros(2 * n);
        out.rows_mut(0, n).copy_from(&self.u);
        out.rows_mut(n, n).copy_from(&self.v);
        out
    }

    pub fn from_stacked(psi: &DVector<f64>) -> Result<Self> {
        if psi.len() % 2 != 0 {
            return Err(Error::Dimension {
                expected: psi.len() + 1,
                got: psi.len(),
            });
        }
        let n = psi.len() / 2;
        Ok(Self {
            u: psi.rows(0, n).into_owned(),
            v: psi.rows(n, n).into_owned(),
        })
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            u: &self.u * s,
            v: &self.v * s,
        }
    }

    pub fn norm(&self) -> f64 {
        (self.u.norm_squared() + self.v.norm_squared()).sqrt()
    }

    /// Samples an initial condition at the grid unknowns.
    pub fn from_initial_condition(
        grid: &Grid,
        p: &PhysicalParams,
        ic: &InitialCondition,
    ) -> Result<Self> {
        let n = grid.dofs();
        if let InitialCondition::CustomSamples { segment1, segment2 } = ic {
            let need1 = grid.n1 + 2;
            let need2 = grid.n2 + 2;
            for (name, len, need) in [
                ("segment-1 displacement", segment1.displacement.len(), need1),
                ("segment-1 velocity", segment1.velocity.len(), need1),
                ("segment-2 displacement", segment2.displacement.len(), need2),
                ("segment-2 velocity", segment2.velocity.len(), need2),
            ] {
                if len != need {
                    return Err(Error::InitialCondition(format!(
                        "{name} has {len} samples, expected {need}"
                    )));
                }
            }
            if segment1.displacement[0] != 0.0 {
                return Err(Error::InitialCondition(format!(
                    "displacement at the clamped end must be 0 (got {})",
                    segment1.displacement[0]
                )));
            }
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
            let (dl, dr) = (segment1.displacement[need1 - 1], segment2.displacement[0]);
            if !close(dl, dr) {
                return Err(Error::InitialCondition(format!(
                    "displacement is discontinuous at the mass ({dl} vs {dr})"
                )));
            }
            let (vl, vr) = (segment1.velocity[need1 - 1], segment2.velocity[0]);
            if !close(vl, vr) {
                return Err(Error::InitialCondition(format!(
                    "velocity is discontinuous at the mass ({vl} vs {vr})"
                )));
            }
            let mut u = DVector::zeros(n);
            let mut v = DVector::zeros(n);
            for j in 1..need1 {
                u[j - 1] = segment1.displacement[j];
                v[j - 1] = segment1.velocity[j];
            }
            for j in 1..need2 {
                u[grid.n1 + j] = segment2.displacement[j];
                v[grid.n1 + j] = segment2.velocity[j];
            }
            return Ok(Self { u, v });
        }

        let x = grid.dof_coordinates();
        let mut u = DVector::zeros(n);
        let mut v = DVector::zeros(n);
        for (i, &xi) in x.iter().enumerate() {
            u[i] = ic.displacement_at(p, xi).unwrap_or(0.0);
            v[i] = ic.velocity_at(p, xi).unwrap_or(0.0);
        }
        Ok(Self { u, v })
    }
}

impl SecondOrderSystem {
    pub fn n(&self) -> usize {
        self.grid.dofs()
    }

    pub fn interface_index(&self) -> usize {
        self.grid.interface_index()
    }

    pub fn right_index(&self) -> usize {
        self.grid.right_index()
    }

    /// `m_eff + b0·b1`, the denominator of the interface energy term.
    pub fn mu(&self) -> f64 {
        self.m_eff + self.gains.b0 * self.gains.b1
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n() {
            return Err(Error::Dimension {
                expected: self.n(),
                got: len,
            });
        }
        Ok(())
    }

    /// Solves `Mfull x = rhs` with the stored factor.
    pub fn solve_mass(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(rhs.len())?;
        Ok(self.chol.solve(rhs))
    }

    /// Acceleration `a` with `Mfull a = −K u − D v`.
    pub fn acceleration(&self, psi: &StateVector) -> Result<DVector<f64>> {
        self.check_len(psi.u.len())?;
        self.check_len(psi.v.len())?;
        let rhs = -(&self.k * &psi.u) - &self.dmat * &psi.v;
        Ok(self.chol.solve(&rhs))
    }

    /// Writes `Mfull`, `K` and `D` in coordinate format into `dir`.
    pub fn dump_matrices(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        output::write_coordinate(&dir.join("mfull.mtx"), &self.mfull)?;
        output::write_coordinate(&dir.join("k.mtx"), &self.k)?;
        output::write_coordinate(&dir.join("dmat.mtx"), &self.dmat)?;
        Ok(())
    }
}

/// `Ψ_t = A_h Ψ`, returned as `(v, a)`.
pub fn apply_generator(sys: &SecondOrderSystem, psi: &StateVector) -> Result<StateVector> {
    let a = sys.acceleration(psi)?;
    Ok(StateVector {
        u: psi.v.clone(),
        v: a,
    })
}

/// Explicit `A_h = [[0, I], [−Mfull⁻¹K, −Mfull⁻¹D]]`.
pub fn dense_operator(sys: &SecondOrderSystem) -> DMatrix<f64> {
    let n = sys.n();
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        a[(i, n + i)] = 1.0;
    }
    let minv_k = sys.chol.solve(&sys.k);
    let minv_d = sys.chol.solve(&sys.dmat);
    a.view_mut((n, 0), (n, n)).copy_from(&(-minv_k));
    a.view_mut((n, n), (n, n)).copy_from(&(-minv_d));
    a
}
