use stringlab::diagnostics::{discrete_energy, fit_decay};
use stringlab::discretize::{assemble, assemble_with, build_grid, InterfaceMass, SecondOrderSystem};
use stringlab::integrate::simulate;
use stringlab::model::{Gains, InitialCondition, PhysicalParams, Preset};
use stringlab::spectral::{eigenvalues, spectral_metrics};

fn system(n: usize, g: Gains, interface: InterfaceMass) -> SecondOrderSystem {
    let p = PhysicalParams::reference();
    assemble_with(&p, &g, &build_grid(&p, n, n).unwrap(), interface).unwrap()
}

fn lowest_frequency(n: usize) -> f64 {
    let p = PhysicalParams::reference();
    let sys = assemble(&p, &Gains::zero(), &build_grid(&p, n, n).unwrap()).unwrap();
    let spec = eigenvalues(&sys, 7).unwrap();
    spec.eigenvalues
        .iter()
        .map(|z| z.im)
        .filter(|&w| w > 0.0)
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn lowest_frequency_converges_at_second_order() {
    let w: Vec<f64> = [10, 20, 40].iter().map(|&n| lowest_frequency(n)).collect();
    let ratio = (w[0] - w[1]).abs() / (w[1] - w[2]).abs();
    assert!(ratio > 3.0 && ratio < 5.0, "{w:?}, ratio {ratio}");
}

#[test]
fn lumped_full_damping_is_stable_and_dissipative() {
    let sys = system(20, Preset::C.gains(), InterfaceMass::Lumped);
    let spec = eigenvalues(&sys, 1).unwrap();
    let abscissa = spectral_metrics(&spec).abscissa;
    assert!(abscissa < 0.0);

    let traj = simulate(&sys, &InitialCondition::PaperExperiment, 2e-3, 30.0, 50).unwrap();
    let energies: Vec<f64> = traj.states.iter().map(|s| discrete_energy(&sys, s)).collect();
    assert!(energies.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    let fit = fit_decay(&traj.times, &energies).unwrap();
    assert!(fit.sigma_hat > 0.0);
}
