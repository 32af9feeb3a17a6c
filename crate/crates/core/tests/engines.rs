use std::f64::consts::PI;

use bosonet::ancillary::global_phase;
use bosonet::evolve::{
    density_evolve, fock_amplitudes, schrodinger_evolve, single_particle_propagator, EvolveOptions, FnProvider,
    Reversed,
};
use bosonet::experiment::{build_controls, preset};
use bosonet::fock::{binomial, fock_state, DensityMatrix, FockBasis};
use bosonet::linalg::{expm, max_abs, unitarity_defect, CMat, I};
use bosonet::metrics::{fidelity_mixed, population};
use bosonet::synthesis::{
    build_noon_chiral_schedule, synth_three_mode, synth_two_mode, two_mode_ramp_schedule, AlphaRateForm,
    AlphaStart, Direction, NoonPhasePlan,
};
use num_complex::Complex64;
use rand::{rngs::StdRng, Rng, SeedableRng};

fn ramp_controls(f_multiplier: f64) -> bosonet::synthesis::LabControls {
    let s = two_mode_ramp_schedule(f_multiplier).unwrap();
    synth_two_mode(&s, AlphaRateForm::Fdot, AlphaStart::CleanTransfer).unwrap()
}

#[test]
fn two_mode_global_phase_follows_f() {
    for c in [0.0, 3.0] {
        let ctl = ramp_controls(c);
        for t in [0.25, 0.5, 0.8, 1.0] {
            let f = c * PI * t / 2.0;
            assert!((global_phase(&ctl, 1, 0.0, t, 1e-8).unwrap() - f).abs() < 1e-8);
            assert!((global_phase(&ctl, 2, 0.0, t, 1e-8).unwrap() + f).abs() < 1e-8);
        }
    }
}

#[test]
fn three_mode_phase_difference_is_twice_f() {
    let plan = NoonPhasePlan::uniform(3.0);
    let s = build_noon_chiral_schedule(Direction::Ccw, 1, plan).unwrap();
    let ctl = synth_three_mode(&s, AlphaRateForm::Fdot).unwrap();
    for t in [0.2, 0.5, 0.9] {
        let f = 3.0 * s.theta[1].eval(t).unwrap().v;
        let d = global_phase(&ctl, 2, 0.0, t, 1e-8).unwrap() - global_phase(&ctl, 3, 0.0, t, 1e-8).unwrap();
        assert!((d - 2.0 * f).abs() < 1e-8, "t = {t}: {d} vs {}", 2.0 * f);
        assert!(global_phase(&ctl, 1, 0.0, t, 1e-8).unwrap().abs() < 1e-8);
    }
}

#[test]
fn propagator_completes_single_particle_transfer() {
    let g = single_particle_propagator(&ramp_controls(0.0), &EvolveOptions::default()).unwrap();
    let end = g.states.last().unwrap();
    assert!((end[(1, 0)].norm() - 1.0).abs() < 1e-9);
    assert!(g.states.iter().all(|u| unitarity_defect(u) < 1e-9));
}

#[test]
fn propagators_stay_unitary_on_presets() {
    for name in ["fig3a", "fig4b", "fig4-fourmode"] {
        let ctl = build_controls(&preset(name).unwrap()).unwrap();
        let g = single_particle_propagator(&ctl, &EvolveOptions::default()).unwrap();
        let worst = g.states.iter().map(unitarity_defect).fold(0.0, f64::max);
        assert!(worst < 1e-9, "{name}: {worst:e}");
    }
}

/// P_{n−k,k} = C(n,k) p^{n−k} (1−p)^k with p = |G_11|², without permanents.
#[test]
fn exchange_populations_are_binomial() {
    let ctl = ramp_controls(3.0);
    let opts = EvolveOptions::default();
    let g = single_particle_propagator(&ctl, &opts).unwrap();
    let basis = FockBasis::sector(2, 5).unwrap();
    let psi = schrodinger_evolve(&ctl, &fock_state(&basis, &[5, 0]).unwrap(), &opts).unwrap();
    let mut compared = 0;
    for (i, &t) in psi.times.iter().enumerate().step_by(37) {
        let Some(j) = g.times.iter().position(|&s| s == t) else { continue };
        let p = g.states[j][(0, 0)].norm_sqr();
        let state = psi.states[i].clone();
        for k in 0..=5 {
            let expect = binomial(5, k) as f64 * p.powi(5 - k as i32) * (1.0 - p).powi(k as i32);
            let got = population(&fock_state(&basis, &[5, 0]).unwrap().with_amp(state.clone()), &[5 - k, k]).unwrap();
            assert!((got - expect).abs() < 1e-8, "t = {t}, k = {k}");
        }
        compared += 1;
    }
    assert!(compared > 5);
}

#[test]
fn random_unitary_amplitudes_are_complete() {
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..10 {
        let h = CMat::from_fn(3, 3, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let u = expm(&((&h + h.adjoint()) * I));
        let basis = FockBasis::sector(3, 2).unwrap();
        let total: f64 = (0..basis.dim())
            .map(|i| {
                let out: Vec<usize> = basis.occupation(i).iter().map(|&x| x as usize).collect();
                fock_amplitudes(&u, &[2, 0, 0], &out).unwrap().norm_sqr()
            })
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}

#[test]
fn permanent_guard_and_mismatch() {
    let u = CMat::identity(2, 2);
    assert!(fock_amplitudes(&u, &[1, 0], &[2, 0]).is_err());
    assert!(fock_amplitudes(&u, &[1, 0, 0], &[1, 0, 0]).is_err());
    assert!(fock_amplitudes(&u, &[9, 0], &[0, 9]).is_err());
}

#[test]
fn density_engine_matches_pure_engine() {
    let ctl = ramp_controls(3.0);
    let opts = EvolveOptions::default();
    let basis = FockBasis::sector(2, 3).unwrap();
    let psi0 = fock_state(&basis, &[2, 1]).unwrap();
    let pure = schrodinger_evolve(&ctl, &psi0, &opts).unwrap();
    let mixed = density_evolve(&ctl, &DensityMatrix::from_pure(&psi0), &opts).unwrap();
    assert_eq!(pure.times, mixed.times);
    for i in (0..pure.times.len()).step_by(25) {
        let v = &pure.states[i];
        let proj = v * v.adjoint();
        assert!(max_abs(&(mixed.density_at(i).rho - proj)) < 1e-10);
    }
}

#[test]
fn zero_hamiltonian_leaves_density_unchanged() {
    let p = FnProvider { modes: 2, stages: vec![(0.0, 1.0)], f: |_| CMat::zeros(2, 2) };
    let basis = FockBasis::cutoffs(&[6, 6]).unwrap();
    let th = bosonet::fock::thermal_state(&FockBasis::cutoffs(&[6]).unwrap(), 1, 0.5, 1e-2).unwrap();
    let mut rho = DensityMatrix::from_pure(&fock_state(&basis, &[0, 0]).unwrap());
    rho.rho = CMat::from_fn(basis.dim(), basis.dim(), |i, j| {
        let (a, b) = (basis.occupation(i), basis.occupation(j));
        if a[1] == 0 && b[1] == 0 {
            th.rho[(a[0] as usize, b[0] as usize)]
        } else {
            Complex64::default()
        }
    });
    let tr = density_evolve(&p, &rho, &EvolveOptions::default()).unwrap();
    let last = tr.density_at(tr.times.len() - 1);
    assert!(max_abs(&(last.rho - &rho.rho)) < 1e-15);
    assert!((fidelity_mixed(&rho, &rho).unwrap() - fidelity_mixed(&tr.density_at(0), &rho).unwrap()).abs() < 1e-15);
}

#[test]
fn excitation_number_is_conserved_on_cutoff_basis() {
    let ctl = ramp_controls(3.0);
    let basis = FockBasis::cutoffs(&[4, 4]).unwrap();
    let tr = schrodinger_evolve(&ctl, &fock_state(&basis, &[2, 1]).unwrap(), &EvolveOptions::default()).unwrap();
    for s in &tr.states {
        let leak: f64 = (0..basis.dim())
            .filter(|&i| basis.occupation(i).iter().map(|&x| x as usize).sum::<usize>() != 3)
            .map(|i| s[i].norm_sqr())
            .sum();
        assert!(leak < 1e-12);
    }
}

#[test]
fn reversed_schedule_undoes_the_transfer() {
    let ctl = build_controls(&preset("fig1a").unwrap()).unwrap();
    let opts = EvolveOptions::default();
    let basis = FockBasis::sector(2, 5).unwrap();
    let psi0 = fock_state(&basis, &[5, 0]).unwrap();
    let fwd = schrodinger_evolve(&ctl, &psi0, &opts).unwrap();
    let mid = psi0.with_amp(fwd.states.last().unwrap().clone());
    assert!(population(&mid, &[0, 5]).unwrap() > 1.0 - 1e-9);
    let back = schrodinger_evolve(&Reversed(&ctl), &mid, &opts).unwrap();
    let end = back.states.last().unwrap();
    assert!((end - &psi0.amp).norm() < 1e-8);
}

#[test]
fn residual_series_along_trajectories() {
    let ctl = ramp_controls(3.0);
    let g = single_particle_propagator(&ctl, &EvolveOptions::default()).unwrap();
    for k in [1, 2] {
        let r = g.residual_series(&ctl, k);
        assert_eq!(r.len(), g.times.len());
        assert!(r.iter().all(|x| *x < 1e-10), "k = {k}");
    }
    // Star loops diverge at stage ends; interior points still close.
    let star = build_controls(&preset("fig4b").unwrap()).unwrap();
    let g = single_particle_propagator(&star, &EvolveOptions::default()).unwrap();
    let r = g.residual_series(&star, 4);
    let finite: Vec<f64> = r.iter().copied().filter(|x| x.is_finite()).collect();
    assert!(finite.len() > r.len() / 2);
    assert!(finite.iter().all(|x| *x < 1e-8), "{:e}", finite.iter().cloned().fold(0.0, f64::max));
}
