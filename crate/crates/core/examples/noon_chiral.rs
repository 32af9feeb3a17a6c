//! Carries a two-photon NOON state around a three-mode loop in both
//! directions and prints the stage-end fidelities.

use bosonet::evolve::{schrodinger_evolve, EvolveOptions};
use bosonet::fock::{FockBasis, StateVector};
use bosonet::metrics::{noon_fidelity, noon_target};
use bosonet::synthesis::{build_noon_chiral_schedule, synth_three_mode, AlphaRateForm, Direction, NoonPhasePlan};

fn main() -> bosonet::Result<()> {
    let basis = FockBasis::sector(3, 2)?;
    let psi0 = StateVector { basis: basis.clone(), amp: noon_target(&basis, 1, 3, 2)?, deficit: 0.0 };
    for dir in [Direction::Ccw, Direction::Cw] {
        let schedule = build_noon_chiral_schedule(dir, 2, NoonPhasePlan::for_direction(dir))?;
        let ctl = synth_three_mode(&schedule, AlphaRateForm::Fdot)?;
        let traj = schrodinger_evolve(&ctl, &psi0, &EvolveOptions::default())?;
        println!("{dir:?}");
        for t in 0..=6 {
            let i = traj.nearest(t as f64);
            let psi = psi0.with_amp(traj.states[i].clone());
            let f = [(1, 3), (1, 2), (2, 3)].map(|(j, k)| noon_fidelity(&psi, j, k, 2).unwrap());
            println!("  t = {t}: F13 = {:.9}  F12 = {:.9}  F23 = {:.9}", f[0], f[1], f[2]);
        }
    }
    Ok(())
}
