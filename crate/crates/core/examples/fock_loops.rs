//! Star network: five photons hop 1 -> 2 -> 3 -> 1 through the hub, then
//! the four-stage variant visits every outer node. Amplitudes come from
//! permanents of the single-particle propagator.

use bosonet::evolve::{fock_amplitudes, single_particle_propagator, EvolveOptions};
use bosonet::synthesis::{build_fock_chiral_schedule, synth_four_mode, FockLoop, StarPhases};

fn main() -> bosonet::Result<()> {
    let input = [5, 0, 0, 0];
    let targets = [[5, 0, 0, 0], [0, 5, 0, 0], [0, 0, 5, 0], [0, 0, 0, 5]];
    for (variant, loops) in [(FockLoop::ThreeNode, 2), (FockLoop::FourNode, 1)] {
        let schedule = build_fock_chiral_schedule(loops, variant)?;
        let ctl = synth_four_mode(&schedule, StarPhases::QuarterTurn)?;
        let g = single_particle_propagator(&ctl, &EvolveOptions::default())?;
        println!("{variant:?} x {loops}");
        for (a, b) in schedule.stages() {
            let u = &g.states[g.nearest(b)];
            let probs: Vec<String> = targets
                .iter()
                .map(|m| format!("{:.6}", fock_amplitudes(u, &input, m).unwrap().norm_sqr()))
                .collect();
            println!("  stage [{a}, {b}]: P(5000, 0500, 0050, 0005) = ({})", probs.join(", "));
        }
    }
    Ok(())
}
