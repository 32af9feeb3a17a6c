//! Moves a thermal state (mean occupation 1) from one mode to the other and
//! reports the raw and normalized overlaps with the swapped state.

use bosonet::evolve::{density_evolve, EvolveOptions};
use bosonet::fock::{tensor_product, thermal_state, Factor, FockBasis, Product};
use bosonet::metrics::{fidelity_mixed, fidelity_mixed_normalized};
use bosonet::synthesis::{synth_two_mode, two_mode_ramp_schedule, AlphaRateForm, AlphaStart};

fn mixed(p: Product) -> bosonet::fock::DensityMatrix {
    match p {
        Product::Mixed(d) => d,
        Product::Pure(s) => bosonet::fock::DensityMatrix::from_pure(&s),
    }
}

fn main() -> bosonet::Result<()> {
    let cutoff = 24;
    let single = FockBasis::cutoffs(&[cutoff])?;
    let th = thermal_state(&single, 1, 1.0, 1e-6)?;
    let vac = thermal_state(&single, 1, 0.0, 1e-6)?;
    let rho0 = mixed(tensor_product(&[Factor::Mixed(&th), Factor::Mixed(&vac)])?);
    let target = mixed(tensor_product(&[Factor::Mixed(&vac), Factor::Mixed(&th)])?);

    let ctl = synth_two_mode(&two_mode_ramp_schedule(3.0)?, AlphaRateForm::Fdot, AlphaStart::CleanTransfer)?;
    let traj = density_evolve(&ctl, &rho0, &EvolveOptions::default())?;
    println!("{} branches on {} states", traj.branches.len(), rho0.basis.dim());
    for t in [0.0, 0.5, 1.0] {
        let i = traj.times.partition_point(|&x| x < t).min(traj.times.len() - 1);
        let rho = traj.density_at(i);
        println!(
            "t = {t}: Tr[rho sigma] = {:.9}, normalized = {:.9}",
            fidelity_mixed(&rho, &target)?,
            fidelity_mixed_normalized(&rho, &target)?
        );
    }
    Ok(())
}
