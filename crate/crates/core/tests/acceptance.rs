//! End-to-end acceptance: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines are always printed.

use std::collections::HashMap;
use std::path::Path;

use bosonet::ancillary::{rotation_matrix, transform_matrix, FrameSource};
use bosonet::curves::{make_schedule, Curve, CurveForm, ScheduleSpec};
use bosonet::evolve::{
    fock_amplitudes, heisenberg_passage_check, schrodinger_evolve, single_particle_propagator, EvolveOptions,
};
use bosonet::experiment::{
    self, build_controls, prepare_state, preset, residual_report, BasisDesc, CheckDesc, ExperimentSpec, Prepared,
    ScheduleDesc, SynthesisDesc, PRESETS,
};
use bosonet::fock::FockBasis;
use bosonet::linalg::max_abs;
use bosonet::synthesis::{AlphaRateForm, AlphaStart};
use num_complex::Complex64;
use rand::{rngs::StdRng, Rng, SeedableRng};

/// Columns of a series.csv by header label.
fn read_csv(path: &Path) -> HashMap<String, Vec<f64>> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    let mut cols: HashMap<String, Vec<f64>> = header.iter().map(|h| (h.clone(), Vec::new())).collect();
    for line in lines {
        for (h, v) in header.iter().zip(line.split(',')) {
            cols.get_mut(h).unwrap().push(v.parse().unwrap());
        }
    }
    cols
}

/// Linear interpolation; at a repeated time (stage join) the later sample wins.
fn at(cols: &HashMap<String, Vec<f64>>, label: &str, t: f64) -> f64 {
    let ts = &cols["t"];
    let vs = &cols[label];
    let i = ts.partition_point(|&x| x <= t);
    if i == 0 {
        return vs[0];
    }
    if i == ts.len() {
        return vs[i - 1];
    }
    let (t0, t1) = (ts[i - 1], ts[i]);
    if t0 == t {
        return vs[i - 1];
    }
    vs[i - 1] + (vs[i] - vs[i - 1]) * (t - t0) / (t1 - t0)
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

/// Runs a preset into a temp dir; checks the artifacts and returns the series.
fn run_preset(name: &str) -> (bool, HashMap<String, Vec<f64>>) {
    let dir = tempfile::tempdir().unwrap();
    let spec = preset(name).unwrap();
    let summary = experiment::run(&spec, dir.path()).unwrap();
    for f in ["pulses.json", "residuals.json", "series.csv", "summary.json"] {
        assert!(dir.path().join(f).exists(), "{name}: missing {f}");
    }
    (summary.passed, read_csv(&dir.path().join("series.csv")))
}

fn close(v: f64, target: f64, tol: f64) -> bool {
    (v - target).abs() <= tol
}

fn criterion_1() -> Outcome {
    let (ok, c) = run_preset("fig1a");
    let f = at(&c, "P_05", 1.0);
    let quoted = [("P_41", 0.30, 0.410), ("P_32", 0.44, 0.346), ("P_23", 0.558, 0.35), ("P_14", 0.705, 0.41)];
    let mut pass = ok && f >= 1.0 - 1e-6;
    let mut detail = format!("F(tau) = {f:.12}");
    for (l, t, v) in quoted {
        let got = at(&c, l, t);
        pass &= close(got, v, 0.01);
        detail += &format!(", {l}({t}) = {got:.4}");
    }
    outcome(pass, detail)
}

fn criterion_2() -> Outcome {
    let (ok, c) = run_preset("fig1b");
    let f = at(&c, "F", 1.0);
    let series = bosonet::metrics::ObservableSeries::new("F", c["t"].clone(), c["F"].clone());
    let peaks = series.interior_maxima(1e-6);
    let inside = peaks.iter().filter(|&&t| t > 0.0 && t < 1.0).count();
    outcome(ok && f >= 1.0 - 1e-4 && inside == 5, format!("F(tau) = {f:.10}, interior maxima = {inside}"))
}

fn criterion_3() -> Outcome {
    let (ok, c) = run_preset("fig1c");
    let f = at(&c, "F", 1.0);
    outcome(ok && f >= 1.0 - 1e-4, format!("F(tau) = {f:.10}"))
}

fn criterion_4() -> Outcome {
    let (ok, c) = run_preset("fig1d");
    let f = at(&c, "F_normalized", 1.0);
    outcome(ok && f >= 1.0 - 1e-4, format!("normalized overlap(tau) = {f:.10}"))
}

/// Endpoint values within 1e-6 and the second loop repeating the first within 1e-8.
fn chiral(c: &HashMap<String, Vec<f64>>, order: &[(&str, f64)], labels: &[&str]) -> (bool, f64, f64) {
    let mut worst_end = 0.0f64;
    for &(l, t) in order {
        worst_end = worst_end.max((1.0 - at(c, l, t)).abs());
    }
    let mut worst_loop = 0.0f64;
    for l in labels {
        for t in [0.0, 1.0, 2.0, 3.0] {
            worst_loop = worst_loop.max((at(c, l, t + 3.0) - at(c, l, t)).abs());
        }
    }
    (worst_end <= 1e-6 && worst_loop <= 1e-8, worst_end, worst_loop)
}

fn criterion_5() -> Outcome {
    let labels = ["F_13", "F_12", "F_23"];
    let (ok_a, a) = run_preset("fig3a");
    let (pa, ea, la) = chiral(&a, &[("F_13", 0.0), ("F_12", 1.0), ("F_23", 2.0), ("F_13", 3.0)], &labels);
    let (ok_b, b) = run_preset("fig3b");
    let (pb, eb, _) = chiral(&b, &[("F_23", 1.0), ("F_12", 2.0), ("F_13", 3.0)], &labels);
    outcome(
        ok_a && ok_b && pa && pb,
        format!("ccw endpoint dev {ea:.2e}, loop dev {la:.2e}; cw endpoint dev {eb:.2e}"),
    )
}

fn criterion_6() -> Outcome {
    let (ok, c) = run_preset("fig4a");
    let p = at(&c, "P_0500", 1.0);
    let quoted = [("P_0023", 0.311), ("P_0032", 0.314), ("P_0014", 0.154), ("P_0041", 0.158), ("P_0050", 0.032)];
    let mut pass = ok && p >= 1.0 - 1e-6;
    let mut detail = format!("P_0500(tau) = {p:.12}");
    for (l, v) in quoted {
        let got = at(&c, l, 0.5);
        pass &= close(got, v, 0.005);
        detail += &format!(", {l} = {got:.4}");
    }
    outcome(pass, detail)
}

fn criterion_7() -> Outcome {
    let (ok, c) = run_preset("fig4b");
    let labels = ["P_5000", "P_0500", "P_0050"];
    let (p, e, l) = chiral(&c, &[("P_5000", 0.0), ("P_0500", 1.0), ("P_0050", 2.0), ("P_5000", 3.0)], &labels);
    outcome(ok && p, format!("endpoint dev {e:.2e}, loop dev {l:.2e}"))
}

fn criterion_8() -> Outcome {
    let (ok, c) = run_preset("fig4-fourmode");
    let visits = [("P_0500", 1.0), ("P_0050", 2.0), ("P_0005", 3.0), ("P_5000", 4.0)];
    let worst = visits.iter().map(|&(l, t)| 1.0 - at(&c, l, t)).fold(0.0f64, f64::max);
    outcome(ok && worst <= 1e-6, format!("worst visit deficit {worst:.2e}"))
}

fn random_curve<R: Rng>(rng: &mut R) -> Curve {
    let form = if rng.gen_bool(0.5) {
        CurveForm::Sinusoid {
            c0: rng.gen_range(-1.0..1.0),
            c1: rng.gen_range(-2.0..2.0),
            c2: rng.gen_range(0.5..6.0),
            c3: rng.gen_range(0.0..0.9),
            t0: rng.gen_range(0.0..1.0),
        }
    } else {
        CurveForm::Linear { c0: rng.gen_range(-2.0..2.0), c1: rng.gen_range(-3.0..3.0) }
    };
    Curve::single(0.0, 1.0, form).unwrap()
}

/// Worst ‖M†(t)W(t) − M†(0)‖_max over 100 random schedules.
fn w_identity() -> f64 {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(2..=5);
        let spec = ScheduleSpec {
            theta: (0..n - 1).map(|_| random_curve(&mut rng)).collect(),
            alpha: (0..n - 1).map(|_| random_curve(&mut rng)).collect(),
            phase_f: Vec::new(),
        };
        let s = make_schedule(n, spec, Vec::new()).unwrap();
        let t = rng.gen_range(0.05..1.0);
        let w = rotation_matrix(&s, 0.0, t).unwrap();
        let m0 = transform_matrix(&s, 0.0).unwrap().m_dag;
        let mt = transform_matrix(&s, t).unwrap().m_dag;
        assert_eq!(s.node_count(), n);
        worst = worst.max(max_abs(&(mt * w - m0)));
    }
    worst
}

/// Many-body amplitudes against permanents of G at shared grid times.
fn cross_engine(spec: &ExperimentSpec) -> f64 {
    let ctl = build_controls(spec).unwrap();
    let BasisDesc::Sector { modes, excitations } = spec.basis else { panic!("sector presets only") };
    let basis = FockBasis::sector(modes, excitations).unwrap();
    let Prepared::Pure(psi0) = prepare_state(&basis, &spec.initial, 1e-6).unwrap() else { panic!("pure") };
    let opts = EvolveOptions::default();
    let many = schrodinger_evolve(&ctl, &psi0, &opts).unwrap();
    let g = single_particle_propagator(&ctl, &opts).unwrap();
    let occ = |i: usize| basis.occupation(i).iter().map(|&x| x as usize).collect::<Vec<_>>();
    let components: Vec<(Vec<usize>, Complex64)> =
        (0..basis.dim()).filter(|&i| psi0.amp[i].norm() > 0.0).map(|i| (occ(i), psi0.amp[i])).collect();
    let stride = (many.times.len() / 12).max(1);
    let mut worst = 0.0f64;
    let mut compared = 0;
    for i in (0..many.times.len()).step_by(stride).chain([many.times.len() - 1]) {
        let Some(j) = g.times.iter().position(|&t| t == many.times[i]) else { continue };
        compared += 1;
        for m in 0..basis.dim() {
            let out = occ(m);
            let amp: Complex64 = components
                .iter()
                .map(|(inp, a)| a * fock_amplitudes(&g.states[j], inp, &out).unwrap())
                .sum();
            worst = worst.max((amp - many.states[i][m]).norm());
        }
    }
    assert!(compared >= 5, "{}: only {compared} shared times", spec.name);
    worst
}

/// Final transfer fidelity of the phase-modulated variant and whether its run passed.
fn phase_variant_fidelity() -> (f64, bool) {
    let mut spec = preset("fig1a").unwrap();
    spec.name = "phase-variant".into();
    spec.schedule = ScheduleDesc::TwoModePhase { detuning_gap: 2.0, alpha0: 0.0 };
    spec.synthesis = SynthesisDesc::TwoModePhase { omega1: 1.0, omega2: -1.0 };
    spec.checks = vec![CheckDesc::AtLeast { observable: "P_05".into(), t: 1.0, min: 1.0 - 1e-6 }];
    let dir = tempfile::tempdir().unwrap();
    let summary = experiment::run(&spec, dir.path()).unwrap();
    let c = read_csv(&dir.path().join("series.csv"));
    (at(&c, "P_05", 1.0), summary.passed)
}

fn criterion_9() -> Outcome {
    let w = w_identity();
    let mut residual = 0.0f64;
    for (name, _) in PRESETS {
        let spec = preset(name).unwrap();
        let ctl = build_controls(&spec).unwrap();
        residual = residual.max(residual_report(&spec, &ctl).unwrap().max_residual);
    }
    let mut engines = 0.0f64;
    for name in ["fig1a", "fig3a", "fig3b", "fig4a", "fig4b", "fig4-fourmode"] {
        engines = engines.max(cross_engine(&preset(name).unwrap()));
    }
    let opts = EvolveOptions::default();
    let mut heisenberg = 0.0f64;
    for (name, ks) in [("fig1a", vec![1, 2]), ("fig3a", vec![1, 2, 3]), ("fig4b", vec![4])] {
        let ctl = build_controls(&preset(name).unwrap()).unwrap();
        for k in ks {
            heisenberg = heisenberg.max(heisenberg_passage_check(&ctl, k, &opts, 1e-8).unwrap().max_deviation);
        }
    }
    let (f29, ok29) = phase_variant_fidelity();
    let pass = w < 1e-10 && residual < 1e-10 && engines < 1e-7 && heisenberg < 1e-8 && ok29 && f29 >= 1.0 - 1e-6;
    outcome(
        pass,
        format!(
            "W identity {w:.2e}, residual {residual:.2e}, cross-engine {engines:.2e}, \
             Heisenberg {heisenberg:.2e}, phase-variant F = {f29:.12}"
        ),
    )
}

/// Which α̇ numerator keeps the residual bound on the f = 3θ₁ schedule.
fn criterion_10() -> Outcome {
    let mut passing = Vec::new();
    let mut detail = Vec::new();
    for (label, form) in [("f-dot", AlphaRateForm::Fdot), ("f-ddot", AlphaRateForm::Fddot)] {
        let mut spec = preset("fig1c").unwrap();
        spec.synthesis = SynthesisDesc::TwoMode { alpha_form: form, alpha_start: AlphaStart::CleanTransfer };
        let residual = build_controls(&spec).and_then(|ctl| residual_report(&spec, &ctl)).map(|r| r.max_residual);
        match residual {
            Ok(r) => {
                detail.push(format!("{label}: residual {r:.2e}"));
                if r < 1e-10 {
                    passing.push(label);
                }
            }
            Err(e) => detail.push(format!("{label}: {e}")),
        }
    }
    let verdict = match passing.as_slice() {
        [one] => format!("numerator form satisfying the bound: {one}"),
        [] => "neither form satisfies the bound".into(),
        _ => "both forms satisfy the bound; switch is not discriminating".into(),
    };
    outcome(passing.len() == 1, format!("{}; {verdict}", detail.join(", ")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("two-mode Fock exchange", criterion_1),
        ("coherent x Fock exchange", criterion_2),
        ("cat exchange", criterion_3),
        ("thermal exchange", criterion_4),
        ("NOON chirality", criterion_5),
        ("four-node stage populations", criterion_6),
        ("chiral Fock loops", criterion_7),
        ("four-stage loop", criterion_8),
        ("property suite", criterion_9),
        ("numerator switch", criterion_10),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        let state = if o.passed { "PASS" } else { "FAIL" };
        println!("{state} criterion {} ({name}): {}", i + 1, o.detail);
        if !o.passed {
            failed.push(i + 1);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
