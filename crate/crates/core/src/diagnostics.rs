//! Discrete energy, interface variable, dissipation rate, Lyapunov
//! functionals and decay-rate fits.

use std::path::Path;

use nalgebra::DVector;
use serde::Serialize;

use crate::discretize::{InterfaceMass, SecondOrderSystem, StateVector};
use crate::integrate::Trajectory;
use crate::{output, Error, Result};

/// Slope jump `α1·δu¹_{N1+½} − α2·δu²_{½}` at the mass.
pub fn interface_flux(sys: &SecondOrderSystem, u: &DVector<f64>) -> f64 {
    let z = sys.interface_index();
    let p = &sys.params;
    let left = p.alpha1 * (u[z] - u[z - 1]) / sys.grid.h1;
    let right = p.alpha2 * (u[z + 1] - u[z]) / sys.grid.h2;
    left - right
}

/// Per-cell midpoint velocity and slope of one segment, paired with the cell
/// midpoint coordinate.
fn cells(sys: &SecondOrderSystem, psi: &StateVector, segment: usize) -> Vec<(f64, f64, f64)> {
    let grid = &sys.grid;
    let h = grid.step(segment);
    let mids = grid.midpoints(segment);
    let value = |x: &DVector<f64>, j: usize| grid.dof(segment, j).map_or(0.0, |i| x[i]);
    (0..grid.cells(segment))
        .map(|c| {
            let vm = 0.5 * (value(&psi.v, c) + value(&psi.v, c + 1));
            let s = (value(&psi.u, c + 1) - value(&psi.u, c)) / h;
            (mids[c], vm, s)
        })
        .collect()
}

/// `η_h = b0·J + m·v_z`, with `m` the interface inertia of the energy.
pub fn discrete_eta(sys: &SecondOrderSystem, psi: &StateVector) -> f64 {
    let z = sys.interface_index();
    sys.gains.b0 * interface_flux(sys, &psi.u) + sys.m_eff * psi.v[z]
}

/// Energy by explicit cell sums: midpoint kinetic energy, cell strain energy
/// and the interface term `η_h²/(2(m + b0·b1))`.
pub fn discrete_energy(sys: &SecondOrderSystem, psi: &StateVector) -> f64 {
    let grid = &sys.grid;
    let z = sys.interface_index();
    let mut e = 0.0;
    for segment in [1usize, 2] {
        let h = grid.step(segment);
        let rho = sys.params.rho(segment);
        let alpha = sys.params.alpha(segment);
        let value = |x: &DVector<f64>, j: usize| grid.dof(segment, j).map_or(0.0, |i| x[i]);
        for c in 0..grid.cells(segment) {
            let (a, b) = (grid.dof(segment, c), grid.dof(segment, c + 1));
            let (va, vb) = (value(&psi.v, c), value(&psi.v, c + 1));
            let lumped = sys.interface == InterfaceMass::Lumped && (a == Some(z) || b == Some(z));
            e += if lumped {
                // the interface half belongs to the point mass
                let other = if a == Some(z) { vb } else { va };
                0.25 * rho * h * other * other
            } else {
                let vm = 0.5 * (va + vb);
                0.5 * rho * h * vm * vm
            };
            let s = (value(&psi.u, c + 1) - value(&psi.u, c)) / h;
            e += 0.5 * alpha * h * s * s;
        }
    }
    let eta = discrete_eta(sys, psi);
    e + eta * eta / (2.0 * sys.mu())
}

/// The same energy as a quadratic form, `½vᵀM v + ½uᵀK u + η²/(2μ)`.
pub fn energy_quadratic(sys: &SecondOrderSystem, psi: &StateVector) -> f64 {
    let eta = discrete_eta(sys, psi);
    0.5 * psi.v.dot(&(&sys.mkin * &psi.v))
        + 0.5 * psi.u.dot(&(&sys.k * &psi.u))
        + eta * eta / (2.0 * sys.mu())
}

/// Right side of the dissipation identity:
/// `−b0/μ·J² − m·b1/μ·v_z² − d1·v_right²`.
pub fn dissipation_rhs(sys: &SecondOrderSystem, psi: &StateVector) -> f64 {
    let g = &sys.gains;
    let mu = sys.mu();
    let j = interface_flux(sys, &psi.u);
    let vz = psi.v[sys.interface_index()];
    let vr = psi.v[sys.right_index()];
    -g.b0 / mu * j * j - sys.m_eff * g.b1 / mu * vz * vz - g.d1 * vr * vr
}

/// `⟨∇E_h, A_h Ψ⟩`, the exact time derivative of the energy along the flow.
pub fn energy_rate(sys: &SecondOrderSystem, psi: &StateVector) -> Result<f64> {
    let a = sys.acceleration(psi)?;
    let z = sys.interface_index();
    let eta = discrete_eta(sys, psi);
    let eta_dot = sys.gains.b0 * interface_flux(sys, &psi.v) + sys.m_eff * a[z];
    Ok(psi.v.dot(&(&sys.mkin * &a)) + psi.u.dot(&(&sys.k * &psi.v)) + eta * eta_dot / sys.mu())
}

/// `energy_rate − dissipation_rhs`, in closed form: `b0·S·(b1·v_z − J)/μ`
/// where `S` is the string inertia force `(M a)_z` on the interface unknown.
/// Vanishes identically when the mass has no inertial coupling to its
/// neighbours.
pub fn interface_residual(sys: &SecondOrderSystem, psi: &StateVector) -> Result<f64> {
    let a = sys.acceleration(psi)?;
    let z = sys.interface_index();
    let s = sys.mkin.row(z).transpose().dot(&a);
    let j = interface_flux(sys, &psi.u);
    Ok(sys.gains.b0 * s * (sys.gains.b1 * psi.v[z] - j) / sys.mu())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Functionals {
    pub l: f64,
    pub v: f64,
    pub i1: f64,
    pub i2: f64,
    pub p1: f64,
    pub p2: f64,
}

/// `I_j = 2∫ρ w_t w_x`, `P_j = 3∫(x − l_{j−1})ρ w_x w_t` by midpoint
/// quadrature, `L = E + ε1·I1 + ε2·I2`, `V = t·L + P1 + P2`.
pub fn lyapunov_functionals(
    sys: &SecondOrderSystem,
    psi: &StateVector,
    t: f64,
    eps1: f64,
    eps2: f64,
) -> Functionals {
    let mut i = [0.0; 2];
    let mut pj = [0.0; 2];
    for segment in [1usize, 2] {
        let h = sys.grid.step(segment);
        let rho = sys.params.rho(segment);
        let start = if segment == 1 { sys.params.l0 } else { sys.params.l1 };
        for (xm, vm, s) in cells(sys, psi, segment) {
            i[segment - 1] += 2.0 * h * rho * vm * s;
            pj[segment - 1] += 3.0 * (xm - start) * h * rho * s * vm;
        }
    }
    let e = discrete_energy(sys, psi);
    let l = e + eps1 * i[0] + eps2 * i[1];
    Functionals {
        l,
        v: t * l + pj[0] + pj[1],
        i1: i[0],
        i2: i[1],
        p1: pj[0],
        p2: pj[1],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    pub t: f64,
    pub e: f64,
    pub e_norm: f64,
    pub eta: f64,
    pub diss_rhs: f64,
    pub l: f64,
    pub v: f64,
    pub i1: f64,
    pub i2: f64,
    pub p1: f64,
    pub p2: f64,
}

impl EnergyReport {
    pub const HEADER: [&'static str; 11] =
        ["t", "E", "E_norm", "L", "V", "I1", "I2", "P1", "P2", "eta", "diss_rhs"];

    pub fn row(&self) -> [f64; 11] {
        [
            self.t, self.e, self.e_norm, self.l, self.v, self.i1, self.i2, self.p1, self.p2,
            self.eta, self.diss_rhs,
        ]
    }
}

pub fn energy_report(
    sys: &SecondOrderSystem,
    psi: &StateVector,
    t: f64,
    e0: f64,
    eps1: f64,
    eps2: f64,
) -> EnergyReport {
    let e = discrete_energy(sys, psi);
    let f = lyapunov_functionals(sys, psi, t, eps1, eps2);
    EnergyReport {
        t,
        e,
        e_norm: if e0 > 0.0 { e / e0 } else { 0.0 },
        eta: discrete_eta(sys, psi),
        diss_rhs: dissipation_rhs(sys, psi),
        l: f.l,
        v: f.v,
        i1: f.i1,
        i2: f.i2,
        p1: f.p1,
        p2: f.p2,
    }
}

pub fn energy_reports(
    sys: &SecondOrderSystem,
    traj: &Trajectory,
    eps1: f64,
    eps2: f64,
) -> Vec<EnergyReport> {
    let e0 = traj.states.first().map_or(0.0, |s| discrete_energy(sys, s));
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(&t, psi)| energy_report(sys, psi, t, e0, eps1, eps2))
        .collect()
}

pub fn write_energy_csv(path: &Path, reports: &[EnergyReport]) -> Result<()> {
    output::write_csv(path, &EnergyReport::HEADER, reports.iter().map(|r| r.row()))
}

/// Least-squares fits `E ≈ A·e^{−σt}` (all samples) and `E ≈ B·t^{−p}`
/// (samples with `t ≥ 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub sigma_hat: f64,
    pub log_a: f64,
    pub r2_exp: f64,
    /// `None` when fewer than two samples lie at `t ≥ 1`.
    pub p_hat: Option<f64>,
    pub r2_poly: Option<f64>,
}

/// Slope, intercept and coefficient of determination of `y ≈ c0 + c1·x`.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|&a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| (b - intercept - slope * a).powi(2))
        .sum();
    let ss_tot: f64 = y.iter().map(|&b| (b - my) * (b - my)).sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    (slope, intercept, r2)
}

pub fn fit_decay(times: &[f64], energies: &[f64]) -> Result<DecayFit> {
    if times.len() != energies.len() {
        return Err(Error::DecayData(format!(
            "{} times but {} energies",
            times.len(),
            energies.len()
        )));
    }
    if times.len() < 10 {
        return Err(Error::DecayData(format!(
            "at least 10 samples are required (got {})",
            times.len()
        )));
    }
    if let Some((i, e)) = energies.iter().enumerate().find(|(_, &e)| !(e > 0.0 && e.is_finite())) {
        return Err(Error::DecayData(format!(
            "energy sample {i} is not positive ({e})"
        )));
    }
    let log_e: Vec<f64> = energies.iter().map(|e| e.ln()).collect();
    let (slope, log_a, r2_exp) = linear_fit(times, &log_e);

    let (lt, le): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(&log_e)
        .filter(|(&t, _)| t >= 1.0)
        .map(|(&t, &e)| (t.ln(), e))
        .unzip();
    let (p_hat, r2_poly) = if lt.len() >= 2 {
        let (s, _, r2) = linear_fit(&lt, &le);
        (Some(-s), Some(r2))
    } else {
        (None, None)
    };
    Ok(DecayFit {
        sigma_hat: -slope,
        log_a,
        r2_exp,
        p_hat,
        r2_poly,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{assemble, assemble_with, build_grid};
    use crate::model::{Gains, PhysicalParams, Preset};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn system(n: usize, g: Gains, interface: InterfaceMass) -> SecondOrderSystem {
        let p = PhysicalParams::reference();
        assemble_with(&p, &g, &build_grid(&p, n, n).unwrap(), interface).unwrap()
    }

    fn random_state(rng: &mut ChaCha8Rng, n: usize) -> StateVector {
        StateVector {
            u: DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0)),
            v: DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0)),
        }
    }

    #[test]
    fn zero_state_is_zero_everywhere() {
        let sys = system(5, Gains::new(1.0, 1.0, 1.0), InterfaceMass::Averaged);
        let psi = StateVector::zeros(sys.n());
        assert_eq!(discrete_energy(&sys, &psi), 0.0);
        assert_eq!(discrete_eta(&sys, &psi), 0.0);
        let f = lyapunov_functionals(&sys, &psi, 3.0, 0.1, 0.1);
        assert_eq!([f.l, f.v, f.i1, f.i2, f.p1, f.p2], [0.0; 6]);
    }

    #[test]
    fn linear_ramp_energy_is_exact() {
        // Unit coefficients, zero velocity, u = x/l2 over both segments.
        let p = PhysicalParams {
            rho1: 1.0,
            rho2: 1.0,
            alpha1: 1.0,
            alpha2: 1.0,
            m: 1.0,
            l0: 0.0,
            l1: 0.5,
            l2: 1.0,
        };
        for n in [1usize, 4, 17] {
            let grid = build_grid(&p, n, n).unwrap();
            let sys = assemble(&p, &Gains::new(0.0, 1.0, 1.0), &grid).unwrap();
            let u = DVector::from_vec(grid.dof_coordinates());
            let psi = StateVector { u, v: DVector::zeros(sys.n()) };
            assert_relative_eq!(discrete_energy(&sys, &psi), 0.5, epsilon = 1e-14);
        }
    }

    #[test]
    fn eta_without_slope_feedback() {
        let sys = system(4, Gains::new(0.0, 1.0, 1.0), InterfaceMass::Averaged);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let psi = random_state(&mut rng, sys.n());
        assert_eq!(discrete_eta(&sys, &psi), sys.params.m * psi.v[sys.interface_index()]);
    }

    #[test]
    fn rhs_vanishes_when_it_should() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sys = system(4, Gains::zero(), InterfaceMass::Averaged);
        let psi = random_state(&mut rng, sys.n());
        assert_eq!(dissipation_rhs(&sys, &psi), 0.0);

        // Straight line through the mass with matched fluxes, at rest.
        let sys = system(4, Gains::new(1.0, 1.0, 1.0), InterfaceMass::Averaged);
        let p = sys.params;
        let x = sys.grid.dof_coordinates();
        let u = DVector::from_iterator(
            x.len(),
            x.iter().map(|&x| if x <= p.l1 { x / p.alpha1 } else { p.l1 / p.alpha1 + (x - p.l1) / p.alpha2 }),
        );
        let psi = StateVector { u, v: DVector::zeros(sys.n()) };
        assert!(interface_flux(&sys, &psi.u).abs() < 1e-12);
        assert!(dissipation_rhs(&sys, &psi).abs() < 1e-20);
    }

    #[test]
    fn energy_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for interface in [InterfaceMass::Averaged, InterfaceMass::Lumped] {
            for preset in Preset::ALL {
                let sys = system(7, preset.gains(), interface);
                for _ in 0..20 {
                    let psi = random_state(&mut rng, sys.n());
                    let a = discrete_energy(&sys, &psi);
                    let b = energy_quadratic(&sys, &psi);
                    assert_relative_eq!(a, b, max_relative = 1e-12);
                    assert!(a > 0.0);
                }
            }
        }
    }

    #[test]
    fn conservative_rate_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sys = system(10, Gains::zero(), InterfaceMass::Averaged);
        for _ in 0..100 {
            let psi = random_state(&mut rng, sys.n());
            let e = discrete_energy(&sys, &psi);
            assert!(energy_rate(&sys, &psi).unwrap().abs() <= 1e-10 * e);
        }
    }

    #[test]
    fn rate_splits_into_rhs_and_interface_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for interface in [InterfaceMass::Averaged, InterfaceMass::Lumped] {
            for preset in Preset::ALL {
                let sys = system(9, preset.gains(), interface);
                for _ in 0..50 {
                    let psi = random_state(&mut rng, sys.n());
                    let rate = energy_rate(&sys, &psi).unwrap();
                    let rhs = dissipation_rhs(&sys, &psi);
                    let res = interface_residual(&sys, &psi).unwrap();
                    let scale = discrete_energy(&sys, &psi).max(rhs.abs());
                    assert!((rate - rhs - res).abs() <= 1e-10 * scale, "{interface} {preset}");
                }
            }
        }
    }

    #[test]
    fn lumped_interface_satisfies_dissipation_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for preset in Preset::ALL {
            let sys = system(12, preset.gains(), InterfaceMass::Lumped);
            for _ in 0..100 {
                let psi = random_state(&mut rng, sys.n());
                let rate = energy_rate(&sys, &psi).unwrap();
                let rhs = dissipation_rhs(&sys, &psi);
                let scale = discrete_energy(&sys, &psi).max(rhs.abs());
                assert!((rate - rhs).abs() <= 1e-10 * scale);
                assert!(rate <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn averaged_interface_residual_is_generically_nonzero() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sys = system(8, Preset::C.gains(), InterfaceMass::Averaged);
        let psi = random_state(&mut rng, sys.n());
        let e = discrete_energy(&sys, &psi);
        assert!(interface_residual(&sys, &psi).unwrap().abs() > 1e-6 * e);
        // No slope feedback: the residual carries a factor b0.
        let sys = system(8, Preset::A.gains(), InterfaceMass::Averaged);
        assert_eq!(interface_residual(&sys, &psi).unwrap(), 0.0);
    }

    #[test]
    fn rest_state_functionals() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let sys = system(6, Gains::new(1.0, 1.0, 1.0), InterfaceMass::Averaged);
        let mut psi = random_state(&mut rng, sys.n());
        psi.v.fill(0.0);
        let f = lyapunov_functionals(&sys, &psi, 2.5, 0.07, 0.12);
        let e = discrete_energy(&sys, &psi);
        assert_eq!([f.i1, f.i2, f.p1, f.p2], [0.0; 4]);
        assert_eq!(f.l, e);
        assert_eq!(f.v, 2.5 * e);
    }

    #[test]
    fn exact_exponential_and_power_fits() {
        let t: Vec<f64> = (0..=200).map(|k| k as f64 * 0.1).collect();
        let e: Vec<f64> = t.iter().map(|t| (-2.0 * t).exp()).collect();
        let fit = fit_decay(&t, &e).unwrap();
        assert_relative_eq!(fit.sigma_hat, 2.0, epsilon = 1e-10);
        assert_relative_eq!(fit.r2_exp, 1.0, epsilon = 1e-12);

        let t: Vec<f64> = (10..=200).map(|k| k as f64 * 0.1).collect();
        let e: Vec<f64> = t.iter().map(|t| 1.0 / t).collect();
        let fit = fit_decay(&t, &e).unwrap();
        assert_relative_eq!(fit.p_hat.unwrap(), 1.0, epsilon = 1e-10);
        assert_relative_eq!(fit.r2_poly.unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fit_rejects_bad_data() {
        let t: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let mut e = vec![1.0; 20];
        e[3] = 0.0;
        assert!(matches!(fit_decay(&t, &e), Err(Error::DecayData(_))));
        assert!(fit_decay(&t[..5], &e[..5]).is_err());
        let short: Vec<f64> = (0..12).map(|k| k as f64 * 0.05).collect();
        let fit = fit_decay(&short, &vec![1.0; 12]).unwrap();
        assert_eq!(fit.p_hat, None);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn young_sandwich_for_l(seed in any::<u64>(), eps_frac in 0.01f64..0.99, n in 1usize..12) {
            let sys = system(n, Gains::new(1.0, 1.0, 1.0), InterfaceMass::Averaged);
            let p = sys.params;
            let c = (p.rho1 / p.alpha1).sqrt().max((p.rho2 / p.alpha2).sqrt());
            let eps = eps_frac / (2.0 * c);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let psi = random_state(&mut rng, sys.n());
            let e = discrete_energy(&sys, &psi);
            let f = lyapunov_functionals(&sys, &psi, 0.0, eps, eps * 0.7);
            prop_assert!(f.l >= (1.0 - 2.0 * eps * c) * e - 1e-12 * e);
            prop_assert!(f.l <= (1.0 + 2.0 * eps * c) * e + 1e-12 * e);
        }

        #[test]
        fn energy_is_positive(seed in any::<u64>(), n in 1usize..12, b0 in 0.0f64..3.0, b1 in 0.0f64..3.0) {
            let sys = system(n, Gains::new(b0, b1, 1.0), InterfaceMass::Averaged);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let psi = random_state(&mut rng, sys.n());
            prop_assert!(discrete_energy(&sys, &psi) > 0.0);
            prop_assert!(dissipation_rhs(&sys, &psi) <= 0.0);
        }
    }
}
