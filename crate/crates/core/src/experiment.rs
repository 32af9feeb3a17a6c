//! Experiment runner: JSON configs and named presets go through synthesis,
//! passage verification, evolution and metrics, and come out as artifacts.
//!
//! A run directory holds `pulses.json`, `residuals.json`, `series.csv` and
//! `summary.json`; the summary is written last so its presence means the run
//! finished.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::curves::{make_schedule, Schedule, ScheduleSpec};
use crate::error::{Error, Result};
use crate::evolve::{density_evolve, schrodinger_evolve, spectral_branches, DensityTrajectory, EvolveOptions, Trajectory};
use crate::fock::{
    cat_state, coherent_state, fock_state, tensor_product, thermal_state, DensityMatrix, Factor, FockBasis,
    ModeKind, Product, StateVector,
};
use crate::linalg::CVec;
use crate::metrics::{fidelity_mixed, noon_target, ObservableSeries};
use crate::synthesis::{
    build_fock_chiral_schedule, build_noon_chiral_schedule, synth_four_mode, synth_three_mode, synth_two_mode,
    synth_two_mode_phase, two_mode_phase_schedule, two_mode_ramp_schedule, verify_passage, AlphaRateForm,
    AlphaStart, Direction, FockLoop, LabControls, NoonPhasePlan, PassageReport, SampledPulses, StarPhases,
};

/// Environment variable overriding the output directory.
pub const ENV_OUT: &str = "BOSONET_OUT";
/// Environment variable overriding the thread count.
pub const ENV_THREADS: &str = "BOSONET_THREADS";

/// Top-level config: a preset name or an explicit spec, plus overrides.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<ExperimentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub overrides: Overrides,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loops: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps_per_stage: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

/// Everything a run needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub schedule: ScheduleDesc,
    pub synthesis: SynthesisDesc,
    /// Replay sampled pulses instead of the synthesized ones; the synthesized
    /// frame is still used for residuals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulses_file: Option<PathBuf>,
    pub basis: BasisDesc,
    pub initial: StateDesc,
    pub observables: Vec<ObservableDesc>,
    #[serde(default)]
    pub checks: Vec<CheckDesc>,
    #[serde(default)]
    pub options: EvolveOptions,
    /// Passages to verify; defaults to the ones the synthesis activates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify_modes: Option<Vec<usize>>,
    #[serde(default = "default_verify_points")]
    pub verify_points: usize,
    #[serde(default = "default_residual_tol")]
    pub residual_tol: f64,
    #[serde(default = "default_pulse_points")]
    pub pulse_points: usize,
    #[serde(default = "default_truncation_tol")]
    pub truncation_tol: f64,
}

fn default_verify_points() -> usize {
    200
}
fn default_residual_tol() -> f64 {
    1e-10
}
fn default_pulse_points() -> usize {
    1000
}
fn default_truncation_tol() -> f64 {
    1e-6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleDesc {
    /// θ_1 = πt/2 on [0, 1], f = c·θ_1.
    TwoModeRamp { f_multiplier: f64 },
    /// θ_1 = πt/2, α_1 = α_0 + gap·t/2.
    TwoModePhase {
        detuning_gap: f64,
        #[serde(default)]
        alpha0: f64,
    },
    Noon {
        direction: Direction,
        loops: usize,
        /// Per-stage f multipliers; the direction's defaults when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        multipliers: Option<[f64; 3]>,
    },
    FockLoop { variant: FockLoop, loops: usize },
    Custom {
        n: usize,
        spec: ScheduleSpec,
        #[serde(default)]
        boundaries: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum SynthesisDesc {
    TwoMode {
        #[serde(default)]
        alpha_form: AlphaRateForm,
        #[serde(default)]
        alpha_start: AlphaStart,
    },
    TwoModePhase { omega1: f64, omega2: f64 },
    ThreeMode {
        #[serde(default)]
        alpha_form: AlphaRateForm,
    },
    FourMode { phases: StarPhases },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BasisDesc {
    Sector { modes: usize, excitations: usize },
    Cutoffs { cutoffs: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateDesc {
    Fock { occupation: Vec<usize> },
    /// (|n0⟩ + |0n⟩)/√2 on modes (j, k), 1-based.
    Noon { j: usize, k: usize, n: usize },
    /// Product of single-mode states; needs a cutoff basis.
    Product { modes: Vec<ModeState> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModeState {
    Fock {
        n: usize,
    },
    Coherent {
        re: f64,
        #[serde(default)]
        im: f64,
    },
    Cat {
        re: f64,
        #[serde(default)]
        im: f64,
    },
    Thermal {
        nbar: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableDesc {
    Population {
        occupation: Vec<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    /// Overlap with a target; mixed targets give Tr[ρσ], divided by Tr[σ²]
    /// when `normalized`.
    Fidelity {
        target: StateDesc,
        #[serde(default)]
        normalized: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    Noon {
        j: usize,
        k: usize,
        n: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckDesc {
    /// |value(t) − expect| ≤ tol.
    Value { observable: String, t: f64, expect: f64, tol: f64 },
    /// value(t) ≥ min.
    AtLeast { observable: String, t: f64, min: f64 },
    /// Exactly `count` interior local maxima.
    Peaks {
        observable: String,
        count: usize,
        #[serde(default = "default_prominence")]
        prominence: f64,
    },
    /// |value(t + period) − value(t)| ≤ tol for each t.
    Periodic { observable: String, times: Vec<f64>, period: f64, tol: f64 },
}

fn default_prominence() -> f64 {
    1e-6
}

/// One evaluated check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub value: f64,
    pub target: String,
    pub passed: bool,
    /// Checks outside the simulated window are skipped, not failed.
    pub skipped: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub passed: bool,
    pub checks: Vec<CheckOutcome>,
    pub residuals: Vec<PassageReport>,
    pub max_residual: f64,
    pub residual_tol: f64,
    pub max_norm_drift: f64,
    pub series_in_range: bool,
    pub stage_steps: Vec<usize>,
    pub dim: usize,
    pub final_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub residual_tol: f64,
    pub max_residual: f64,
    pub passed: bool,
    pub passages: Vec<PassageReport>,
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Synthesis { .. } => 3,
        Error::Integration(_) => 4,
        Error::Acceptance(_) | Error::PassageNotActivated { .. } => 5,
        _ => 2,
    }
}

/// Preset names with one-line descriptions.
pub const PRESETS: &[(&str, &str)] = &[
    ("fig1a", "two-mode Fock exchange |5,0> -> |0,5>, f = 0"),
    ("fig1b", "coherent (alpha=5) x Fock(5) exchange, cutoff 60 per mode"),
    ("fig1c", "even cat (alpha=5) exchange with f = 3 theta_1"),
    ("fig1d", "thermal (nbar=1) x vacuum exchange with f = 3 theta_1"),
    ("fig3a", "counterclockwise NOON chiral loops on the triangle"),
    ("fig3b", "clockwise NOON chiral loops on the triangle"),
    ("fig4a", "star network, stage (i) populations of |5000> -> |0500>"),
    ("fig4b", "star network, chiral Fock loops 1 -> 2 -> 3 -> 1"),
    ("fig4-fourmode", "star network, four-stage loop 1 -> 2 -> 3 -> 4 -> 1"),
];

fn pop(occ: &[usize]) -> ObservableDesc {
    ObservableDesc::Population { occupation: occ.to_vec(), label: None }
}

fn at_least(obs: &str, t: f64, min: f64) -> CheckDesc {
    CheckDesc::AtLeast { observable: obs.into(), t, min }
}

fn value(obs: &str, t: f64, expect: f64, tol: f64) -> CheckDesc {
    CheckDesc::Value { observable: obs.into(), t, expect, tol }
}

fn base_spec(name: &str, schedule: ScheduleDesc, synthesis: SynthesisDesc, basis: BasisDesc) -> ExperimentSpec {
    ExperimentSpec {
        name: name.into(),
        schedule,
        synthesis,
        pulses_file: None,
        basis,
        initial: StateDesc::Fock { occupation: Vec::new() },
        observables: Vec::new(),
        checks: Vec::new(),
        options: EvolveOptions::default(),
        verify_modes: None,
        verify_points: default_verify_points(),
        residual_tol: default_residual_tol(),
        pulse_points: default_pulse_points(),
        truncation_tol: default_truncation_tol(),
    }
}

fn two_mode_synthesis() -> SynthesisDesc {
    SynthesisDesc::TwoMode { alpha_form: AlphaRateForm::Fdot, alpha_start: AlphaStart::CleanTransfer }
}

/// Expands a preset name into its spec.
pub fn preset(name: &str) -> Result<ExperimentSpec> {
    let two = |f| ScheduleDesc::TwoModeRamp { f_multiplier: f };
    let spec = match name {
        "fig1a" => {
            let mut s = base_spec(name, two(0.0), two_mode_synthesis(), BasisDesc::Sector { modes: 2, excitations: 5 });
            s.initial = StateDesc::Fock { occupation: vec![5, 0] };
            s.observables = (0..=5).rev().map(|n| pop(&[n, 5 - n])).collect();
            s.checks = vec![
                at_least("P_05", 1.0, 1.0 - 1e-6),
                value("P_41", 0.30, 0.410, 0.01),
                value("P_32", 0.44, 0.346, 0.01),
                value("P_23", 0.558, 0.35, 0.01),
                value("P_14", 0.705, 0.41, 0.01),
            ];
            s
        }
        "fig1b" => {
            let mut s = base_spec(name, two(0.0), two_mode_synthesis(), BasisDesc::Cutoffs { cutoffs: vec![60, 60] });
            let coh = ModeState::Coherent { re: 5.0, im: 0.0 };
            let five = ModeState::Fock { n: 5 };
            s.initial = StateDesc::Product { modes: vec![coh.clone(), five.clone()] };
            s.observables = vec![
                ObservableDesc::Fidelity {
                    target: StateDesc::Product { modes: vec![five, coh] },
                    normalized: false,
                    label: Some("F".into()),
                },
                ObservableDesc::Fidelity {
                    target: s.initial.clone(),
                    normalized: false,
                    label: Some("F_initial".into()),
                },
            ];
            s.checks = vec![
                at_least("F", 1.0, 1.0 - 1e-4),
                CheckDesc::Peaks { observable: "F".into(), count: 5, prominence: 1e-6 },
            ];
            s
        }
        "fig1c" => {
            let mut s = base_spec(name, two(3.0), two_mode_synthesis(), BasisDesc::Cutoffs { cutoffs: vec![60, 60] });
            let cat = ModeState::Cat { re: 5.0, im: 0.0 };
            let vac = ModeState::Fock { n: 0 };
            s.initial = StateDesc::Product { modes: vec![cat.clone(), vac.clone()] };
            s.observables = vec![
                ObservableDesc::Fidelity {
                    target: StateDesc::Product { modes: vec![vac, cat] },
                    normalized: false,
                    label: Some("F".into()),
                },
                ObservableDesc::Fidelity {
                    target: s.initial.clone(),
                    normalized: false,
                    label: Some("F_initial".into()),
                },
            ];
            s.checks = vec![at_least("F", 1.0, 1.0 - 1e-4)];
            s
        }
        "fig1d" => {
            let mut s = base_spec(name, two(3.0), two_mode_synthesis(), BasisDesc::Cutoffs { cutoffs: vec![24, 24] });
            let th = ModeState::Thermal { nbar: 1.0 };
            let vac = ModeState::Fock { n: 0 };
            s.initial = StateDesc::Product { modes: vec![th.clone(), vac.clone()] };
            s.observables = vec![
                ObservableDesc::Fidelity {
                    target: StateDesc::Product { modes: vec![vac.clone(), th.clone()] },
                    normalized: false,
                    label: Some("F".into()),
                },
                ObservableDesc::Fidelity {
                    target: StateDesc::Product { modes: vec![vac, th] },
                    normalized: true,
                    label: Some("F_normalized".into()),
                },
            ];
            s.checks = vec![at_least("F_normalized", 1.0, 1.0 - 1e-4)];
            s
        }
        "fig3a" | "fig3b" => {
            let direction = if name == "fig3a" { Direction::Ccw } else { Direction::Cw };
            let mut s = base_spec(
                name,
                ScheduleDesc::Noon { direction, loops: 2, multipliers: None },
                SynthesisDesc::ThreeMode { alpha_form: AlphaRateForm::Fdot },
                BasisDesc::Sector { modes: 3, excitations: 2 },
            );
            s.initial = StateDesc::Noon { j: 1, k: 3, n: 2 };
            s.observables = [(1, 3), (1, 2), (2, 3)]
                .iter()
                .map(|&(j, k)| ObservableDesc::Noon { j, k, n: 2, label: None })
                .collect();
            let order = match direction {
                Direction::Ccw => ["F_13", "F_12", "F_23", "F_13"],
                Direction::Cw => ["F_13", "F_23", "F_12", "F_13"],
            };
            s.checks = order.iter().enumerate().map(|(i, o)| value(o, i as f64, 1.0, 1e-6)).collect();
            for o in ["F_13", "F_12", "F_23"] {
                s.checks.push(CheckDesc::Periodic {
                    observable: o.into(),
                    times: vec![0.0, 1.0, 2.0, 3.0],
                    period: 3.0,
                    tol: 1e-8,
                });
            }
            s
        }
        "fig4a" | "fig4b" | "fig4-fourmode" => {
            let (variant, loops) = match name {
                "fig4a" => (FockLoop::ThreeNode, 1),
                "fig4b" => (FockLoop::ThreeNode, 2),
                _ => (FockLoop::FourNode, 1),
            };
            let mut s = base_spec(
                name,
                ScheduleDesc::FockLoop { variant, loops },
                SynthesisDesc::FourMode { phases: StarPhases::QuarterTurn },
                BasisDesc::Sector { modes: 4, excitations: 5 },
            );
            s.initial = StateDesc::Fock { occupation: vec![5, 0, 0, 0] };
            let mut occs = vec![[5, 0, 0, 0], [0, 5, 0, 0], [0, 0, 5, 0]];
            match name {
                "fig4a" => {
                    occs.extend([[0, 0, 2, 3], [0, 0, 3, 2], [0, 0, 1, 4], [0, 0, 4, 1], [0, 0, 0, 5]]);
                    s.checks = vec![
                        at_least("P_0500", 1.0, 1.0 - 1e-6),
                        value("P_0023", 0.5, 0.311, 0.005),
                        value("P_0032", 0.5, 0.314, 0.005),
                        value("P_0014", 0.5, 0.154, 0.005),
                        value("P_0041", 0.5, 0.158, 0.005),
                        value("P_0050", 0.5, 0.032, 0.005),
                    ];
                }
                "fig4b" => {
                    s.checks = vec![
                        value("P_5000", 0.0, 1.0, 1e-6),
                        value("P_0500", 1.0, 1.0, 1e-6),
                        value("P_0050", 2.0, 1.0, 1e-6),
                        value("P_5000", 3.0, 1.0, 1e-6),
                    ];
                    for o in ["P_5000", "P_0500", "P_0050"] {
                        s.checks.push(CheckDesc::Periodic {
                            observable: o.into(),
                            times: vec![0.0, 1.0, 2.0, 3.0],
                            period: 3.0,
                            tol: 1e-8,
                        });
                    }
                }
                _ => {
                    occs.push([0, 0, 0, 5]);
                    s.checks = vec![
                        value("P_0500", 1.0, 1.0, 1e-6),
                        value("P_0050", 2.0, 1.0, 1e-6),
                        value("P_0005", 3.0, 1.0, 1e-6),
                        at_least("P_5000", 4.0, 1.0 - 1e-6),
                    ];
                }
            }
            s.observables = occs.iter().map(|o| pop(o)).collect();
            s
        }
        _ => {
            let names: Vec<&str> = PRESETS.iter().map(|p| p.0).collect();
            return Err(Error::Config(format!("unknown preset {name:?}; known: {}", names.join(", "))));
        }
    };
    Ok(spec)
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// The spec with overrides applied (environment thread count included).
    pub fn resolve(&self) -> Result<ExperimentSpec> {
        let mut spec = match (&self.preset, &self.spec) {
            (Some(p), None) => preset(p)?,
            (None, Some(s)) => s.clone(),
            (Some(_), Some(_)) => return Err(Error::Config("give either a preset or a spec, not both".into())),
            (None, None) => return Err(Error::Config("config needs a preset or a spec".into())),
        };
        let o = &self.overrides;
        if let Some(l) = o.loops {
            match &mut spec.schedule {
                ScheduleDesc::Noon { loops, .. } | ScheduleDesc::FockLoop { loops, .. } => *loops = l,
                _ => return Err(Error::Config("--loops applies only to looped schedules".into())),
            }
        }
        if let Some(n) = o.steps_per_stage {
            spec.options.steps_per_stage = n;
        }
        if let Some(t) = o.tolerance {
            spec.options.tolerance = t;
        }
        if let Some(t) = env_threads()?.or(o.threads) {
            spec.options.threads = t;
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Output directory: environment, then config, then `out/<name>`.
    pub fn output_dir(&self, spec: &ExperimentSpec) -> PathBuf {
        if let Some(p) = std::env::var_os(ENV_OUT) {
            return PathBuf::from(p);
        }
        self.out.clone().unwrap_or_else(|| Path::new("out").join(&spec.name))
    }
}

fn env_threads() -> Result<Option<usize>> {
    match std::env::var(ENV_THREADS) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{ENV_THREADS} must be a positive integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

impl ExperimentSpec {
    /// Checks everything that can be checked before any compute.
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        let o = &self.options;
        if o.steps_per_stage < 2 || o.record_stride == 0 {
            return cfg("steps_per_stage must be ≥ 2 and record_stride ≥ 1".into());
        }
        if !(o.tolerance > 0.0) || !(o.log_zone > 0.0 && o.log_zone < 0.5) || !(o.log_floor > 0.0 && o.log_floor < o.log_zone) {
            return cfg("tolerance, log_zone and log_floor must be positive with log_floor < log_zone < 0.5".into());
        }
        if self.observables.is_empty() {
            return cfg("at least one observable is required".into());
        }
        if self.verify_points == 0 || self.pulse_points == 0 {
            return cfg("verify_points and pulse_points must be ≥ 1".into());
        }
        let modes = match &self.basis {
            BasisDesc::Sector { modes, .. } => *modes,
            BasisDesc::Cutoffs { cutoffs } => cutoffs.len(),
        };
        let nodes = match &self.synthesis {
            SynthesisDesc::TwoMode { .. } | SynthesisDesc::TwoModePhase { .. } => 2,
            SynthesisDesc::ThreeMode { .. } => 3,
            SynthesisDesc::FourMode { .. } => 4,
        };
        if modes != nodes {
            return cfg(format!("basis has {modes} modes but the synthesis drives {nodes}"));
        }
        let labels = self.labels();
        let mut seen = std::collections::HashSet::new();
        for l in &labels {
            if !seen.insert(l) {
                return cfg(format!("duplicate observable label {l:?}"));
            }
        }
        for c in &self.checks {
            let obs = match c {
                CheckDesc::Value { observable, .. }
                | CheckDesc::AtLeast { observable, .. }
                | CheckDesc::Peaks { observable, .. }
                | CheckDesc::Periodic { observable, .. } => observable,
            };
            if !labels.contains(obs) {
                return cfg(format!("check refers to unknown observable {obs:?}"));
            }
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<String> {
        self.observables.iter().map(observable_label).collect()
    }
}

fn occupation_label(occ: &[usize]) -> String {
    if occ.iter().all(|&m| m < 10) {
        occ.iter().map(|m| m.to_string()).collect()
    } else {
        occ.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(".")
    }
}

fn observable_label(o: &ObservableDesc) -> String {
    match o {
        ObservableDesc::Population { label: Some(l), .. }
        | ObservableDesc::Fidelity { label: Some(l), .. }
        | ObservableDesc::Noon { label: Some(l), .. } => l.clone(),
        ObservableDesc::Population { occupation, .. } => format!("P_{}", occupation_label(occupation)),
        ObservableDesc::Fidelity { .. } => "F".into(),
        ObservableDesc::Noon { j, k, .. } => format!("F_{j}{k}"),
    }
}

/// Builds the schedule a spec describes.
pub fn build_schedule(desc: &ScheduleDesc) -> Result<Schedule> {
    match desc {
        ScheduleDesc::TwoModeRamp { f_multiplier } => two_mode_ramp_schedule(*f_multiplier),
        ScheduleDesc::TwoModePhase { detuning_gap, alpha0 } => two_mode_phase_schedule(*detuning_gap, *alpha0),
        ScheduleDesc::Noon { direction, loops, multipliers } => {
            let plan = multipliers
                .map(|m| NoonPhasePlan { multipliers: m })
                .unwrap_or_else(|| NoonPhasePlan::for_direction(*direction));
            build_noon_chiral_schedule(*direction, *loops, plan)
        }
        ScheduleDesc::FockLoop { variant, loops } => build_fock_chiral_schedule(*loops, *variant),
        ScheduleDesc::Custom { n, spec, boundaries } => make_schedule(*n, spec.clone(), boundaries.clone()),
    }
}

/// Synthesized controls, or replayed samples when `pulses_file` is set.
pub fn build_controls(spec: &ExperimentSpec) -> Result<LabControls> {
    let schedule = build_schedule(&spec.schedule)?;
    let ctl = match &spec.synthesis {
        SynthesisDesc::TwoMode { alpha_form, alpha_start } => synth_two_mode(&schedule, *alpha_form, *alpha_start)?,
        SynthesisDesc::TwoModePhase { omega1, omega2 } => synth_two_mode_phase(&schedule, *omega1, *omega2)?,
        SynthesisDesc::ThreeMode { alpha_form } => synth_three_mode(&schedule, *alpha_form)?,
        SynthesisDesc::FourMode { phases } => synth_four_mode(&schedule, *phases)?,
    };
    match &spec.pulses_file {
        None => Ok(ctl),
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read pulses {}: {e}", path.display())))?;
            let data: SampledPulses =
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("pulses file: {e}")))?;
            LabControls::from_samples(data, Some(ctl))
        }
    }
}

fn activated_modes(spec: &ExperimentSpec) -> Vec<usize> {
    if let Some(m) = &spec.verify_modes {
        return m.clone();
    }
    match spec.synthesis {
        SynthesisDesc::TwoMode { .. } | SynthesisDesc::TwoModePhase { .. } => vec![1, 2],
        SynthesisDesc::ThreeMode { .. } => vec![1, 2, 3],
        SynthesisDesc::FourMode { .. } => vec![4],
    }
}

/// Residuals of every activated passage at cell midpoints.
pub fn residual_report(spec: &ExperimentSpec, ctl: &LabControls) -> Result<ResidualReport> {
    let grid = ctl.sample_times(spec.verify_points);
    let passages = activated_modes(spec)
        .into_iter()
        .map(|k| verify_passage(ctl, k, &grid))
        .collect::<Result<Vec<_>>>()?;
    let max_residual = passages.iter().fold(0.0f64, |m, r| if r.max_residual.is_nan() { f64::NAN } else { m.max(r.max_residual) });
    Ok(ResidualReport {
        residual_tol: spec.residual_tol,
        max_residual,
        passed: max_residual <= spec.residual_tol,
        passages,
    })
}

fn make_basis(desc: &BasisDesc) -> Result<std::sync::Arc<FockBasis>> {
    match desc {
        BasisDesc::Sector { modes, excitations } => FockBasis::sector(*modes, *excitations),
        BasisDesc::Cutoffs { cutoffs } => FockBasis::cutoffs(cutoffs),
    }
}

/// A prepared state.
#[derive(Clone, Debug)]
pub enum Prepared {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

/// Prepares a state on `basis`.
pub fn prepare_state(basis: &std::sync::Arc<FockBasis>, desc: &StateDesc, tol: f64) -> Result<Prepared> {
    match desc {
        StateDesc::Fock { occupation } => Ok(Prepared::Pure(fock_state(basis, occupation)?)),
        StateDesc::Noon { j, k, n } => {
            let amp = noon_target(basis, *j, *k, *n)?;
            Ok(Prepared::Pure(StateVector { basis: basis.clone(), amp, deficit: 0.0 }))
        }
        StateDesc::Product { modes } => {
            let ModeKind::Cutoffs(cutoffs) = basis.kind() else {
                return Err(Error::Config("product states need a cutoff basis".into()));
            };
            if modes.len() != cutoffs.len() {
                return Err(Error::Config(format!(
                    "product has {} factors for {} modes",
                    modes.len(),
                    cutoffs.len()
                )));
            }
            let mut pure = Vec::new();
            let mut mixed = Vec::new();
            let mut is_mixed = Vec::new();
            for (m, &c) in modes.iter().zip(cutoffs) {
                let b = FockBasis::cutoffs(&[c])?;
                match m {
                    ModeState::Fock { n } => pure.push(fock_state(&b, &[*n])?),
                    ModeState::Coherent { re, im } => pure.push(coherent_state(&b, 1, Complex64::new(*re, *im), tol)?),
                    ModeState::Cat { re, im } => pure.push(cat_state(&b, 1, Complex64::new(*re, *im), tol)?),
                    ModeState::Thermal { nbar } => {
                        mixed.push(thermal_state(&b, 1, *nbar, tol)?);
                        is_mixed.push(true);
                        continue;
                    }
                }
                is_mixed.push(false);
            }
            let (mut pi, mut mi) = (pure.iter(), mixed.iter());
            let factors: Vec<Factor> = is_mixed
                .iter()
                .map(|&m| if m { Factor::Mixed(mi.next().unwrap()) } else { Factor::Pure(pi.next().unwrap()) })
                .collect();
            Ok(match tensor_product(&factors)? {
                Product::Pure(s) => Prepared::Pure(s),
                Product::Mixed(d) => Prepared::Mixed(d),
            })
        }
    }
}

enum Probe {
    Index(usize),
    Vector(CVec),
    /// σ as weighted components, times a normalization.
    Density(Vec<(f64, CVec)>, f64),
}

fn make_probe(basis: &std::sync::Arc<FockBasis>, o: &ObservableDesc, tol: f64) -> Result<Probe> {
    Ok(match o {
        ObservableDesc::Population { occupation, .. } => Probe::Index(
            basis.index_of(occupation).ok_or_else(|| Error::OccupationNotInBasis(occupation.clone()))?,
        ),
        ObservableDesc::Noon { j, k, n, .. } => Probe::Vector(noon_target(basis, *j, *k, *n)?),
        ObservableDesc::Fidelity { target, normalized, .. } => match prepare_state(basis, target, tol)? {
            Prepared::Pure(s) => Probe::Vector(s.amp),
            Prepared::Mixed(d) => {
                let scale = if *normalized { 1.0 / fidelity_mixed(&d, &d)? } else { 1.0 };
                Probe::Density(spectral_branches(&d)?, scale)
            }
        },
    })
}

fn probe_pure(p: &Probe, psi: &CVec) -> f64 {
    match p {
        Probe::Index(i) => psi[*i].norm_sqr(),
        Probe::Vector(v) => v.dotc(psi).norm_sqr(),
        Probe::Density(parts, scale) => parts.iter().map(|(w, v)| w * v.dotc(psi).norm_sqr()).sum::<f64>() * scale,
    }
}

fn probe_mixed(p: &Probe, d: &DensityTrajectory, i: usize) -> f64 {
    d.weights.iter().zip(&d.branches).map(|(w, b)| w * probe_pure(p, &b.states[i])).sum()
}

/// Evolution output reduced to what the artifacts need.
pub struct RunSeries {
    pub times: Vec<f64>,
    pub series: Vec<ObservableSeries>,
    pub max_norm_drift: f64,
    pub stage_steps: Vec<usize>,
    pub dim: usize,
}

/// Prepares the state, evolves under `ctl` and evaluates the observables.
pub fn simulate(spec: &ExperimentSpec, ctl: &LabControls) -> Result<RunSeries> {
    let basis = make_basis(&spec.basis)?;
    let initial = prepare_state(&basis, &spec.initial, spec.truncation_tol)?;
    let probes = spec
        .observables
        .iter()
        .map(|o| make_probe(&basis, o, spec.truncation_tol))
        .collect::<Result<Vec<_>>>()?;
    let labels = spec.labels();
    let (times, values, max_norm_drift, stage_steps): (Vec<f64>, Vec<Vec<f64>>, f64, Vec<usize>) = match &initial {
        Prepared::Pure(psi) => {
            let tr: Trajectory<CVec> = schrodinger_evolve(ctl, psi, &spec.options)?;
            let vals = probes.iter().map(|p| tr.states.iter().map(|s| probe_pure(p, s)).collect()).collect();
            let drift = tr.drift.iter().cloned().fold(0.0, f64::max);
            (tr.times, vals, drift, tr.stage_steps)
        }
        Prepared::Mixed(rho) => {
            let tr = density_evolve(ctl, rho, &spec.options)?;
            let vals = probes.iter().map(|p| (0..tr.times.len()).map(|i| probe_mixed(p, &tr, i)).collect()).collect();
            let drift = tr.trace_drift().into_iter().fold(0.0, f64::max);
            let steps = tr.branches.first().map(|b| b.stage_steps.clone()).unwrap_or_default();
            (tr.times.clone(), vals, drift, steps)
        }
    };
    let series = labels
        .into_iter()
        .zip(values)
        .map(|(l, v)| ObservableSeries::new(l, times.clone(), v))
        .collect();
    Ok(RunSeries { times, series, max_norm_drift, stage_steps, dim: basis.dim() })
}

/// Evaluates the spec's checks on a finished run.
pub fn evaluate_checks(spec: &ExperimentSpec, run: &RunSeries) -> Vec<CheckOutcome> {
    let find = |label: &str| run.series.iter().find(|s| s.label == label).expect("labels validated");
    let (t0, t1) = (run.times[0], *run.times.last().unwrap());
    let inside = |t: f64| t >= t0 - 1e-12 && t <= t1 + 1e-12;
    let skipped = |name: String, target: String| CheckOutcome { name, value: f64::NAN, target, passed: true, skipped: true };
    let mut out = Vec::new();
    for c in &spec.checks {
        out.push(match c {
            CheckDesc::Value { observable, t, expect, tol } => {
                let name = format!("{observable}({t})");
                let target = format!("{expect} ± {tol:e}");
                if !inside(*t) {
                    skipped(name, target)
                } else {
                    let v = find(observable).interpolate(*t);
                    CheckOutcome { name, value: v, target, passed: (v - expect).abs() <= *tol, skipped: false }
                }
            }
            CheckDesc::AtLeast { observable, t, min } => {
                let name = format!("{observable}({t})");
                let target = format!("≥ {min}");
                if !inside(*t) {
                    skipped(name, target)
                } else {
                    let v = find(observable).interpolate(*t);
                    CheckOutcome { name, value: v, target, passed: v >= *min, skipped: false }
                }
            }
            CheckDesc::Peaks { observable, count, prominence } => {
                let n = find(observable).interior_maxima(*prominence).len();
                CheckOutcome {
                    name: format!("interior maxima of {observable}"),
                    value: n as f64,
                    target: format!("= {count}"),
                    passed: n == *count,
                    skipped: false,
                }
            }
            CheckDesc::Periodic { observable, times, period, tol } => {
                let s = find(observable);
                let pairs: Vec<f64> = times.iter().filter(|t| inside(**t + period)).copied().collect();
                let name = format!("{observable} repeats with period {period}");
                let target = format!("≤ {tol:e}");
                if pairs.is_empty() {
                    skipped(name, target)
                } else {
                    let dev = pairs.iter().map(|t| (s.interpolate(t + period) - s.interpolate(*t)).abs()).fold(0.0, f64::max);
                    CheckOutcome { name, value: dev, target, passed: dev <= *tol, skipped: false }
                }
            }
        });
    }
    out
}

/// CSV with a header, 15 significant digits and UNIX newlines.
pub fn series_csv(run: &RunSeries) -> String {
    let mut s = String::from("t");
    for ser in &run.series {
        s.push(',');
        s.push_str(&ser.label);
    }
    s.push('\n');
    for (i, t) in run.times.iter().enumerate() {
        let _ = write!(s, "{t:.14e}");
        for ser in &run.series {
            let _ = write!(s, ",{:.14e}", ser.values[i]);
        }
        s.push('\n');
    }
    s
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, text + "\n")?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn prepare_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::Config(format!("cannot create {}: {e}", out.display())))?;
    // A stale summary would claim a finished run.
    let summary = out.join("summary.json");
    if summary.exists() {
        fs::remove_file(&summary)?;
    }
    Ok(())
}

/// Steps (1)–(2): pulses.json and residuals.json.
pub fn verify(spec: &ExperimentSpec, out: &Path) -> Result<ResidualReport> {
    spec.validate()?;
    prepare_dir(out)?;
    let ctl = build_controls(spec)?;
    write_json(&out.join("pulses.json"), &ctl.sample(spec.pulse_points)?)?;
    let rep = residual_report(spec, &ctl)?;
    write_json(&out.join("residuals.json"), &rep)?;
    Ok(rep)
}

/// Full pipeline. Returns the summary; `passed == false` maps to exit 5.
pub fn run(spec: &ExperimentSpec, out: &Path) -> Result<Summary> {
    spec.validate()?;
    prepare_dir(out)?;
    let ctl = build_controls(spec)?;
    write_json(&out.join("pulses.json"), &ctl.sample(spec.pulse_points)?)?;
    let rep = residual_report(spec, &ctl)?;
    write_json(&out.join("residuals.json"), &rep)?;
    let series = simulate(spec, &ctl)?;
    fs::write(out.join("series.csv"), series_csv(&series))?;
    let checks = evaluate_checks(spec, &series);
    let eps = 1e-9;
    let series_in_range = series
        .series
        .iter()
        .all(|s| s.values.iter().all(|v| *v >= -eps && *v <= 1.0 + eps));
    let passed = rep.passed && series_in_range && checks.iter().all(|c| c.passed);
    let summary = Summary {
        name: spec.name.clone(),
        passed,
        checks,
        residuals: rep.passages,
        max_residual: rep.max_residual,
        residual_tol: rep.residual_tol,
        max_norm_drift: series.max_norm_drift,
        series_in_range,
        stage_steps: series.stage_steps,
        dim: series.dim,
        final_time: *series.times.last().unwrap(),
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

/// One entry of a sweep's index.json.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub value: Value,
    pub dir: PathBuf,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_norm_drift: Option<f64>,
}

fn pointer(path: &str) -> String {
    path.split('.').fold(String::new(), |mut acc, p| {
        acc.push('/');
        acc.push_str(&p.replace('~', "~0").replace('/', "~1"));
        acc
    })
}

/// Copy of `spec` with the dotted `path` set to `value`.
pub fn with_parameter(spec: &ExperimentSpec, path: &str, value: &Value) -> Result<ExperimentSpec> {
    let mut json = serde_json::to_value(spec)?;
    let slot = json
        .pointer_mut(&pointer(path))
        .ok_or_else(|| Error::Config(format!("parameter path {path:?} does not resolve in the spec")))?;
    *slot = value.clone();
    serde_json::from_value(json).map_err(|e| Error::Config(format!("{path} = {value}: {e}")))
}

fn dir_name(i: usize, v: &Value) -> String {
    let raw = match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    };
    let clean: String = raw
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .take(40)
        .collect();
    format!("{i:03}_{clean}")
}

/// Independent runs over `values`, up to `threads` at a time, plus index.json.
pub fn sweep(spec: &ExperimentSpec, path: &str, values: &[Value], out: &Path, threads: usize) -> Result<Vec<SweepEntry>> {
    if values.is_empty() {
        return Ok(Vec::new());
    }
    let specs = values
        .iter()
        .map(|v| with_parameter(spec, path, v))
        .collect::<Result<Vec<_>>>()?;
    for s in &specs {
        s.validate()?;
    }
    fs::create_dir_all(out).map_err(|e| Error::Config(format!("cannot create {}: {e}", out.display())))?;
    let jobs: Vec<(usize, &ExperimentSpec)> = specs.iter().enumerate().collect();
    let threads = threads.max(1).min(jobs.len());
    let chunk = jobs.len().div_ceil(threads);
    let mut entries: Vec<SweepEntry> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|(i, s)| {
                            let dir = out.join(dir_name(*i, &values[*i]));
                            let (exit_code, error, drift) = match run(s, &dir) {
                                Ok(sum) => (if sum.passed { 0 } else { 5 }, None, Some(sum.max_norm_drift)),
                                Err(e) => (exit_code(&e), Some(e.to_string()), None),
                            };
                            SweepEntry { value: values[*i].clone(), dir, exit_code, error, max_norm_drift: drift }
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    entries.sort_by(|a, b| a.dir.cmp(&b.dir));
    write_json(&out.join("index.json"), &entries)?;
    Ok(entries)
}

/// JSON Schema of [`ExperimentConfig`].
pub fn config_schema() -> Value {
    serde_json::to_value(schemars::schema_for!(ExperimentConfig)).expect("schema serializes")
}
