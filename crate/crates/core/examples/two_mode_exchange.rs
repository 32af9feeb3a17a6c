//! Swaps |5,0> into |0,5> on two coupled modes and prints the populations
//! at a few times, next to the binomial law they follow.

use bosonet::evolve::{schrodinger_evolve, single_particle_propagator, EvolveOptions};
use bosonet::fock::{binomial, fock_state, FockBasis};
use bosonet::metrics::population;
use bosonet::synthesis::{synth_two_mode, two_mode_ramp_schedule, AlphaRateForm, AlphaStart};

fn main() -> bosonet::Result<()> {
    let schedule = two_mode_ramp_schedule(0.0)?;
    let ctl = synth_two_mode(&schedule, AlphaRateForm::Fdot, AlphaStart::CleanTransfer)?;

    let basis = FockBasis::sector(2, 5)?;
    let psi0 = fock_state(&basis, &[5, 0])?;
    let opts = EvolveOptions::default();
    let traj = schrodinger_evolve(&ctl, &psi0, &opts)?;
    let g = single_particle_propagator(&ctl, &opts)?;

    println!("{:>6} {:>10} {:>10} {:>10}", "t", "P_41", "P_05", "binomial");
    for t in [0.0, 0.3, 0.5, 0.7, 1.0] {
        let i = traj.nearest(t);
        let psi = psi0.with_amp(traj.states[i].clone());
        // One photon stays with probability p = |G_11|².
        let p = g.states[g.nearest(t)][(0, 0)].norm_sqr();
        let b41 = binomial(5, 1) as f64 * p.powi(4) * (1.0 - p);
        println!(
            "{:>6.3} {:>10.6} {:>10.6} {:>10.6}",
            traj.times[i],
            population(&psi, &[4, 1])?,
            population(&psi, &[0, 5])?,
            b41
        );
    }
    Ok(())
}
