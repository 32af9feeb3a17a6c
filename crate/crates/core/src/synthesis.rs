//! Inverse engineering of laboratory pulses from frame schedules.
//!
//! Every synthesized [`LabControls`] carries its own ancillary frame
//! (including the integrated α tracks), so the commutation residual can be
//! checked against exactly the frame the pulses were derived from.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::ancillary::{commutation_residual, gauge_at, FrameParams, FrameSource, PassageModel};
use crate::curves::{Curve, CurveForm, Jet, Schedule, ScheduleSpec, Segment, Side, make_schedule};
use crate::error::{Error, Result};
use crate::evolve::HamiltonianProvider;
use crate::linalg::{cis, CMat};
use crate::quad;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    TwoMode,
    Triangle,
    /// All edges incident on the last node.
    Star,
}

/// Nodes and coupled pairs. An edge `(i, j)` places `J e^{iφ}` at `H[i][j]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkTopology {
    pub n: usize,
    pub layout: Layout,
    pub edges: Vec<(usize, usize)>,
}

impl NetworkTopology {
    pub fn two_mode() -> Self {
        Self { n: 2, layout: Layout::TwoMode, edges: vec![(0, 1)] }
    }

    /// Edges (1,2), (1,3), (2,3) carrying J_1, J_2, J_3.
    pub fn triangle() -> Self {
        Self { n: 3, layout: Layout::Triangle, edges: vec![(0, 1), (0, 2), (1, 2)] }
    }

    /// Node `n` is the hub; edge k joins it to node k.
    pub fn star(n: usize) -> Self {
        Self { n, layout: Layout::Star, edges: (0..n - 1).map(|k| (n - 1, k)).collect() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.layout {
            Layout::TwoMode => self.n == 2 && self.edges == vec![(0, 1)],
            Layout::Triangle => self.n == 3 && self.edges == vec![(0, 1), (0, 2), (1, 2)],
            Layout::Star => {
                self.n >= 2 && self.edges == (0..self.n - 1).map(|k| (self.n - 1, k)).collect::<Vec<_>>()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("edges do not match {:?} layout", self.layout)))
        }
    }
}

/// Pulse values at one time: per-node detunings, per-edge coupling and phase.
#[derive(Clone, Debug, PartialEq)]
pub struct Pulses {
    pub delta: Vec<f64>,
    pub j: Vec<f64>,
    pub phi: Vec<f64>,
}

/// H^a with Δ_n/2 on the diagonal and J e^{iφ} on the edges.
pub fn assemble_hamiltonian(topology: &NetworkTopology, p: &Pulses) -> CMat {
    let n = topology.n;
    let mut h = CMat::zeros(n, n);
    for (i, d) in p.delta.iter().enumerate() {
        h[(i, i)] = Complex64::new(0.5 * d, 0.0);
    }
    for (e, &(i, k)) in topology.edges.iter().enumerate() {
        let z = cis(p.phi[e]) * p.j[e];
        h[(i, k)] += z;
        h[(k, i)] += z.conj();
    }
    h
}

/// Which numerator is used for the rate of α.
///
/// `Fdot` uses `−2ḟθ̇²cos2θ` in the last term; `Fddot` uses `−2f̈θ̇²cos2θ`.
/// Only one of them is the time derivative of arg(ḟ sin2θ − iθ̇).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum AlphaRateForm {
    #[default]
    Fdot,
    Fddot,
}

/// α̇ from θ and f; zero where the rate is indeterminate (θ̇ = ḟ sin2θ = 0).
pub fn alpha_rate(th: Jet, f: Jet, form: AlphaRateForm) -> f64 {
    let (s, c) = (2.0 * th.v).sin_cos();
    let den = f.d1 * f.d1 * s * s + th.d1 * th.d1;
    if den < 1e-300 {
        return 0.0;
    }
    let third = match form {
        AlphaRateForm::Fdot => f.d1,
        AlphaRateForm::Fddot => f.d2,
    };
    -(th.d2 * f.d1 * s - f.d2 * th.d1 * s - 2.0 * third * th.d1 * th.d1 * c) / den
}

/// arg(ḟ sin2θ − iθ̇), or `None` where both parts vanish.
fn coupling_phase(th: Jet, f: Jet) -> Option<f64> {
    let x = f.d1 * (2.0 * th.v).sin();
    let y = -th.d1;
    if x.hypot(y) < 1e-14 {
        None
    } else {
        Some(y.atan2(x))
    }
}

const CHECKPOINTS: usize = 64;

/// α(t) obtained by integrating α̇ within each stage from a chosen start.
#[derive(Clone, Debug)]
pub struct AlphaTrack {
    theta: Curve,
    f: Curve,
    form: AlphaRateForm,
    stages: Vec<(f64, f64)>,
    /// Per stage: increments since stage start at uniform checkpoints.
    increments: Vec<Vec<f64>>,
    starts: Vec<f64>,
}

fn side_for(t: f64, a: f64) -> Side {
    if t <= a {
        Side::Right
    } else {
        Side::Left
    }
}

impl AlphaTrack {
    pub fn new(theta: Curve, f: Curve, form: AlphaRateForm, stages: Vec<(f64, f64)>) -> Result<Self> {
        let mut track = Self {
            theta,
            f,
            form,
            increments: Vec::new(),
            starts: vec![0.0; stages.len()],
            stages,
        };
        for s in 0..track.stages.len() {
            let (a, b) = track.stages[s];
            let h = (b - a) / CHECKPOINTS as f64;
            let mut inc = vec![0.0];
            for i in 0..CHECKPOINTS {
                let lo = a + i as f64 * h;
                let v = track.integrate_rate(lo, lo + h, a)?;
                inc.push(inc[i] + v);
            }
            track.increments.push(inc);
        }
        Ok(track)
    }

    fn jets(&self, t: f64, side: Side) -> Result<(Jet, Jet)> {
        Ok((self.theta.eval_side(t, side)?, self.f.eval_side(t, side)?))
    }

    fn rate(&self, t: f64, side: Side) -> Result<f64> {
        let (th, f) = self.jets(t, side)?;
        Ok(alpha_rate(th, f, self.form))
    }

    fn integrate_rate(&self, lo: f64, hi: f64, stage_start: f64) -> Result<f64> {
        let mut err = None;
        let (v, _) = quad::integrate(
            |s| match self.rate(s, side_for(s, stage_start)) {
                Ok(x) => x,
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            },
            lo,
            hi,
            1e-14,
        );
        match err {
            Some(e) => Err(e),
            None => Ok(v),
        }
    }

    pub fn stages(&self) -> &[(f64, f64)] {
        &self.stages
    }

    pub fn set_starts(&mut self, starts: Vec<f64>) {
        self.starts = starts;
    }

    pub fn starts(&self) -> &[f64] {
        &self.starts
    }

    fn stage_of(&self, t: f64, side: Side) -> usize {
        let last = self.stages.len() - 1;
        self.stages
            .iter()
            .position(|&(a, b)| match side {
                Side::Left => t <= b && (t > a || a == self.stages[0].0),
                Side::Right => t >= a && t < b,
            })
            .unwrap_or(last)
    }

    /// Increment of α over stage `s` up to time `t`.
    fn increment(&self, s: usize, t: f64) -> Result<f64> {
        let (a, b) = self.stages[s];
        let h = (b - a) / CHECKPOINTS as f64;
        let i = (((t - a) / h).floor().max(0.0) as usize).min(CHECKPOINTS);
        let base = a + i as f64 * h;
        Ok(self.increments[s][i] + self.integrate_rate(base, t.min(b), a)?)
    }

    /// Total change of α across stage `s`.
    pub fn stage_change(&self, s: usize) -> f64 {
        self.increments[s][CHECKPOINTS]
    }

    /// (α, α̇) at `t`.
    pub fn eval(&self, t: f64, side: Side) -> Result<(f64, f64)> {
        let s = self.stage_of(t, side);
        let a = self.stages[s].0;
        let side = if t <= a { Side::Right } else { side };
        Ok((self.starts[s] + self.increment(s, t)?, self.rate(t, side)?))
    }

    /// Stage starts such that α equals the coupling phase arg(ḟ sin2θ − iθ̇)
    /// at the first checkpoint where that phase is defined.
    pub fn anchored_starts(&self) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.stages.len());
        for (s, &(a, b)) in self.stages.iter().enumerate() {
            let h = (b - a) / CHECKPOINTS as f64;
            let mut start = 0.0;
            for i in 0..=CHECKPOINTS {
                let t = a + i as f64 * h;
                let (th, f) = self.jets(t, side_for(t, a))?;
                if let Some(psi) = coupling_phase(th, f) {
                    start = psi - self.increments[s][i];
                    break;
                }
            }
            out.push(start);
        }
        Ok(out)
    }
}

/// How α_1(0) is chosen for the detuning-modulated two-mode synthesis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum AlphaStart {
    Value(f64),
    /// α_1(0) such that the end-of-stage map a_1 → a_2 carries no phase.
    CleanTransfer,
}

impl Default for AlphaStart {
    fn default() -> Self {
        AlphaStart::Value(0.0)
    }
}

#[derive(Clone, Debug)]
pub struct TwoModeSynth {
    schedule: Schedule,
    alpha: AlphaTrack,
    phi: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct TwoModePhaseSynth {
    schedule: Schedule,
    detuning_gap: f64,
}

#[derive(Clone, Debug)]
pub struct ThreeModeSynth {
    schedule: Schedule,
    alpha1: AlphaTrack,
    alpha2: AlphaTrack,
}

/// Edge-phase choice for the star synthesis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum StarPhases {
    /// Every sine argument in the coupling conditions equals π/2.
    QuarterTurn,
    Fixed([f64; 3]),
}

#[derive(Clone, Debug)]
pub struct FourModeSynth {
    schedule: Schedule,
    phases: StarPhases,
}

/// Pulses recorded on a grid, one block per stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledPulses {
    pub topology: NetworkTopology,
    pub notes: Vec<String>,
    pub stages: Vec<SampledStage>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledStage {
    pub start: f64,
    pub end: f64,
    pub t: Vec<f64>,
    /// `delta[n][i]` is Δ_n at `t[i]`.
    pub delta: Vec<Vec<f64>>,
    pub j: Vec<Vec<f64>>,
    pub phi: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
enum ControlKind {
    TwoMode(TwoModeSynth),
    TwoModePhase(TwoModePhaseSynth),
    ThreeMode(ThreeModeSynth),
    FourMode(FourModeSynth),
    Sampled { data: SampledPulses, frame: Option<Box<LabControls>> },
}

/// Laboratory pulses Δ_n(t), J_e(t), φ_e(t) with the frame they activate.
#[derive(Clone, Debug)]
pub struct LabControls {
    pub topology: NetworkTopology,
    pub notes: Vec<String>,
    coupling_scale: f64,
    kind: ControlKind,
}

fn non_finite(t: f64, what: &str) -> Error {
    Error::Synthesis { t, reason: format!("{what} is not finite") }
}

fn edge_from_complex(z: Complex64) -> (f64, f64) {
    // Couplings are reported as J ≤ 0 with the phase absorbing the rest.
    if z.norm() == 0.0 {
        (0.0, 0.0)
    } else {
        (-z.norm(), (-z).arg())
    }
}

impl TwoModeSynth {
    fn pulses(&self, t: f64, side: Side) -> Result<Pulses> {
        let th = self.schedule.theta[0].eval_side(t, side)?;
        let f = self.schedule.phase_f[0].eval_side(t, side)?;
        let (_, alpha_dot) = self.alpha.eval(t, side)?;
        let (s, c) = (2.0 * th.v).sin_cos();
        let j = -(th.d1.hypot(f.d1 * s));
        let delta = alpha_dot + 2.0 * f.d1 * c;
        let stage = self.schedule.stage_index(t, side);
        Ok(Pulses { delta: vec![delta, -delta], j: vec![j], phi: vec![self.phi[stage]] })
    }

    fn frame_params(&self, t: f64, side: Side) -> Result<FrameParams> {
        let th = self.schedule.theta[0].eval_side(t, side)?;
        let (alpha, alpha_dot) = self.alpha.eval(t, side)?;
        Ok(FrameParams { theta: vec![th.v], theta_dot: vec![th.d1], alpha: vec![alpha], alpha_dot: vec![alpha_dot] })
    }
}

impl TwoModePhaseSynth {
    fn pulses(&self, t: f64, side: Side) -> Result<Pulses> {
        let th = self.schedule.theta[0].eval_side(t, side)?;
        let al = self.schedule.alpha[0].eval_side(t, side)?;
        let (s, c) = (2.0 * th.v).sin_cos();
        let mismatch = al.d1 - 0.5 * self.detuning_gap;
        let re = if mismatch == 0.0 {
            0.0
        } else if c.abs() < 1e-12 {
            return Err(Error::Synthesis {
                t,
                reason: "phase-modulated coupling diverges where cos2θ = 0".into(),
            });
        } else {
            0.5 * mismatch * s / c
        };
        let z = Complex64::new(re, th.d1);
        let (j, psi) = if z.norm() == 0.0 { (0.0, 0.0) } else { (-z.norm(), (-z).arg()) };
        if !j.is_finite() {
            return Err(non_finite(t, "coupling"));
        }
        let d = 0.5 * self.detuning_gap;
        Ok(Pulses { delta: vec![d, -d], j: vec![j], phi: vec![psi - al.v] })
    }
}

impl ThreeModeSynth {
    fn pulses(&self, t: f64, side: Side) -> Result<Pulses> {
        let sch = &self.schedule;
        let th1 = sch.theta[0].eval_side(t, side)?;
        let th2 = sch.theta[1].eval_side(t, side)?;
        let f1 = sch.phase_f[0].eval_side(t, side)?;
        let f = sch.phase_f[1].eval_side(t, side)?;
        let (a1, a1_dot) = self.alpha1.eval(t, side)?;
        let (_, a2_dot) = self.alpha2.eval(t, side)?;
        let (s1, c1) = (2.0 * th1.v).sin_cos();
        let (s2, c2) = (2.0 * th2.v).sin_cos();
        let ja = -(th1.d1.hypot(f1.d1 * s1));
        let jc = -(th2.d1.hypot(f.d1 * s2));
        let da = -(a1_dot + 2.0 * f1.d1 * c1);
        let d = -(a2_dot + 2.0 * f.d1 * c2 + f1.d1);
        let (sn, cs) = th1.v.sin_cos();
        let delta = vec![-d * sn * sn - da, -d * cs * cs + da, d];
        let z1 = Complex64::new(ja, 0.0) - cis(-a1) * (0.5 * d * sn * cs);
        let z2 = cis(-0.5 * a1) * (jc * sn);
        let z3 = cis(0.5 * a1) * (jc * cs);
        let (mut j, mut phi) = (Vec::with_capacity(3), Vec::with_capacity(3));
        for z in [z1, z2, z3] {
            let (m, p) = edge_from_complex(z);
            j.push(m);
            phi.push(p);
        }
        Ok(Pulses { delta, j, phi })
    }

    fn frame_params(&self, t: f64, side: Side) -> Result<FrameParams> {
        let th1 = self.schedule.theta[0].eval_side(t, side)?;
        let th2 = self.schedule.theta[1].eval_side(t, side)?;
        let (a1, a1d) = self.alpha1.eval(t, side)?;
        let (a2, a2d) = self.alpha2.eval(t, side)?;
        Ok(FrameParams {
            theta: vec![th1.v, th2.v],
            theta_dot: vec![th1.d1, th2.d1],
            alpha: vec![a1, a2],
            alpha_dot: vec![a1d, a2d],
        })
    }
}

impl FourModeSynth {
    fn pulses(&self, t: f64, side: Side) -> Result<Pulses> {
        let p = self.schedule.frame_params(t, side)?;
        let (s1, c1) = p.theta[0].sin_cos();
        let (s2, c2) = p.theta[1].sin_cos();
        let tan3 = p.theta[2].tan();
        let cot3 = 1.0 / tan3;
        let [d1, d2, d3] = [p.theta_dot[0], p.theta_dot[1], p.theta_dot[2]];
        let [a1, a2, a3] = [p.alpha[0], p.alpha[1], p.alpha[2]];
        let (phi, args) = match self.phases {
            StarPhases::QuarterTurn => {
                let phi = [FRAC_PI_2 - a3, FRAC_PI_2 + a1 - a3, FRAC_PI_2 + a2 - a3];
                (phi, [FRAC_PI_2; 3])
            }
            StarPhases::Fixed(phi) => (phi, [phi[0] + a3, phi[1] - a1 + a3, phi[2] - a2 + a3]),
        };
        let sines: Vec<f64> = args.iter().map(|x| x.sin()).collect();
        if let Some(k) = sines.iter().position(|s| s.abs() < 1e-9) {
            return Err(Error::Synthesis {
                t,
                reason: format!("edge {} phase argument is near a multiple of π", k + 1),
            });
        }
        let cosines: Vec<f64> = match self.phases {
            StarPhases::QuarterTurn => vec![0.0; 3],
            StarPhases::Fixed(_) => args.iter().map(|x| x.cos()).collect(),
        };
        let j1 = -(d3 * s2 * s1 + d2 * tan3 * c2 * s1 + d1 * tan3 * s2 * c1) / sines[0];
        let j2 = -(d3 * s2 * c1 + d2 * tan3 * c2 * c1 - d1 * tan3 * s2 * s1) / sines[1];
        let j3 = -(d3 * c2 - d2 * tan3 * s2) / sines[2];
        let term = |j: f64, geo: f64, cosine: f64| if cosine == 0.0 { 0.0 } else { j * geo * cosine };
        let delta = vec![
            -term(j1, cot3 / (s2 * s1), cosines[0]),
            p.alpha_dot[0] - term(j2, cot3 / (s2 * c1), cosines[1]),
            p.alpha_dot[1] - term(j3, cot3 / c2, cosines[2]),
            p.alpha_dot[2]
                - term(j1, tan3 * s2 * s1, cosines[0])
                - term(j2, tan3 * s2 * c1, cosines[1])
                - term(j3, tan3 * c2, cosines[2]),
        ];
        let j = vec![j1, j2, j3];
        if j.iter().chain(&delta).any(|x| !x.is_finite()) {
            return Err(non_finite(t, "star coupling"));
        }
        Ok(Pulses { delta, j, phi: phi.to_vec() })
    }
}

fn interp(ts: &[f64], ys: &[f64], t: f64) -> f64 {
    if t <= ts[0] {
        return ys[0];
    }
    let last = ts.len() - 1;
    if t >= ts[last] {
        return ys[last];
    }
    let i = ts.partition_point(|&x| x <= t) - 1;
    let w = (t - ts[i]) / (ts[i + 1] - ts[i]);
    ys[i] + w * (ys[i + 1] - ys[i])
}

impl SampledPulses {
    fn stage_of(&self, t: f64, side: Side) -> usize {
        let last = self.stages.len() - 1;
        self.stages
            .iter()
            .position(|s| match side {
                Side::Left => t <= s.end,
                Side::Right => t < s.end,
            })
            .unwrap_or(last)
    }

    fn pulses(&self, t: f64, side: Side) -> Result<Pulses> {
        let (a, b) = (self.stages[0].start, self.stages[self.stages.len() - 1].end);
        if t < a - 1e-12 || t > b + 1e-12 {
            return Err(Error::Domain { t, start: a, end: b });
        }
        let st = &self.stages[self.stage_of(t, side)];
        let pick = |rows: &Vec<Vec<f64>>| rows.iter().map(|r| interp(&st.t, r, t)).collect();
        Ok(Pulses { delta: pick(&st.delta), j: pick(&st.j), phi: pick(&st.phi) })
    }

    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        if self.stages.is_empty() {
            return Err(Error::Config("pulse file has no stages".into()));
        }
        for s in &self.stages {
            let m = s.t.len();
            let ok = m >= 1
                && s.delta.len() == self.topology.n
                && s.j.len() == self.topology.edges.len()
                && s.phi.len() == self.topology.edges.len()
                && s.delta.iter().chain(&s.j).chain(&s.phi).all(|r| r.len() == m)
                && s.t.windows(2).all(|w| w[1] > w[0]);
            if !ok {
                return Err(Error::Config("pulse file arrays are inconsistent".into()));
            }
        }
        Ok(())
    }
}

impl LabControls {
    fn new(topology: NetworkTopology, notes: Vec<String>, kind: ControlKind) -> Self {
        Self { topology, notes, coupling_scale: 1.0, kind }
    }

    /// Replays recorded pulses; `frame` supplies the ancillary frame used for
    /// residual checks.
    pub fn from_samples(data: SampledPulses, frame: Option<LabControls>) -> Result<Self> {
        data.validate()?;
        Ok(Self::new(
            data.topology.clone(),
            data.notes.clone(),
            ControlKind::Sampled { data, frame: frame.map(Box::new) },
        ))
    }

    /// Copy with every coupling multiplied by `factor`.
    pub fn with_coupling_scale(mut self, factor: f64) -> Self {
        self.coupling_scale = factor;
        self
    }

    pub fn variant_name(&self) -> &'static str {
        match self.kind {
            ControlKind::TwoMode(_) => "two_mode",
            ControlKind::TwoModePhase(_) => "two_mode_phase",
            ControlKind::ThreeMode(_) => "three_mode",
            ControlKind::FourMode(_) => "four_mode",
            ControlKind::Sampled { .. } => "sampled",
        }
    }

    pub fn pulses(&self, t: f64, side: Side) -> Result<Pulses> {
        let mut p = match &self.kind {
            ControlKind::TwoMode(s) => s.pulses(t, side),
            ControlKind::TwoModePhase(s) => s.pulses(t, side),
            ControlKind::ThreeMode(s) => s.pulses(t, side),
            ControlKind::FourMode(s) => s.pulses(t, side),
            ControlKind::Sampled { data, .. } => data.pulses(t, side),
        }?;
        if self.coupling_scale != 1.0 {
            p.j.iter_mut().for_each(|j| *j *= self.coupling_scale);
        }
        Ok(p)
    }

    pub fn schedule(&self) -> Option<&Schedule> {
        match &self.kind {
            ControlKind::TwoMode(s) => Some(&s.schedule),
            ControlKind::TwoModePhase(s) => Some(&s.schedule),
            ControlKind::ThreeMode(s) => Some(&s.schedule),
            ControlKind::FourMode(s) => Some(&s.schedule),
            ControlKind::Sampled { frame, .. } => frame.as_ref().and_then(|f| f.schedule()),
        }
    }

    /// Pulse samples at cell midpoints, `points_per_stage` per stage.
    ///
    /// Midpoints keep singular stage edges out of the file.
    pub fn sample(&self, points_per_stage: usize) -> Result<SampledPulses> {
        let mut stages = Vec::new();
        for (a, b) in self.stage_intervals() {
            let h = (b - a) / points_per_stage as f64;
            let t: Vec<f64> = (0..points_per_stage).map(|i| a + (i as f64 + 0.5) * h).collect();
            let mut st = SampledStage {
                start: a,
                end: b,
                t: t.clone(),
                delta: vec![Vec::with_capacity(t.len()); self.topology.n],
                j: vec![Vec::with_capacity(t.len()); self.topology.edges.len()],
                phi: vec![Vec::with_capacity(t.len()); self.topology.edges.len()],
            };
            for &ti in &t {
                let p = self.pulses(ti, Side::Left)?;
                for (row, v) in st.delta.iter_mut().zip(&p.delta) {
                    row.push(*v);
                }
                for (row, v) in st.j.iter_mut().zip(&p.j) {
                    row.push(*v);
                }
                for (row, v) in st.phi.iter_mut().zip(&p.phi) {
                    row.push(*v);
                }
            }
            stages.push(st);
        }
        Ok(SampledPulses { topology: self.topology.clone(), notes: self.notes.clone(), stages })
    }

    /// Sample times of [`LabControls::sample`].
    pub fn sample_times(&self, points_per_stage: usize) -> Vec<f64> {
        self.stage_intervals()
            .into_iter()
            .flat_map(|(a, b)| {
                let h = (b - a) / points_per_stage as f64;
                (0..points_per_stage).map(move |i| a + (i as f64 + 0.5) * h)
            })
            .collect()
    }
}

impl FrameSource for LabControls {
    fn node_count(&self) -> usize {
        self.topology.n
    }

    fn frame_params(&self, t: f64, side: Side) -> Result<FrameParams> {
        match &self.kind {
            ControlKind::TwoMode(s) => s.frame_params(t, side),
            ControlKind::TwoModePhase(s) => s.schedule.frame_params(t, side),
            ControlKind::ThreeMode(s) => s.frame_params(t, side),
            ControlKind::FourMode(s) => s.schedule.frame_params(t, side),
            ControlKind::Sampled { frame: Some(f), .. } => f.frame_params(t, side),
            ControlKind::Sampled { frame: None, .. } => {
                Err(Error::Config("replayed pulses have no reference frame".into()))
            }
        }
    }
}

impl HamiltonianProvider for LabControls {
    fn modes(&self) -> usize {
        self.topology.n
    }

    fn coefficient(&self, t: f64, side: Side) -> Result<CMat> {
        Ok(assemble_hamiltonian(&self.topology, &self.pulses(t, side)?))
    }

    fn stage_intervals(&self) -> Vec<(f64, f64)> {
        match &self.kind {
            ControlKind::Sampled { data, .. } => data.stages.iter().map(|s| (s.start, s.end)).collect(),
            _ => self.schedule().expect("synthesized controls carry a schedule").stages(),
        }
    }
}

fn check_nodes(schedule: &Schedule, n: usize, phase_curves: usize) -> Result<()> {
    if schedule.n != n {
        return Err(Error::Config(format!("expected a {n}-node schedule, got {}", schedule.n)));
    }
    if schedule.phase_f.len() < phase_curves {
        return Err(Error::Config(format!(
            "{n}-node synthesis needs {phase_curves} phase curves, got {}",
            schedule.phase_f.len()
        )));
    }
    Ok(())
}

/// Two-mode synthesis with modulated detuning and a constant phase per stage.
///
/// J = −√(θ̇² + ḟ²sin²2θ), Δ = α̇ + 2ḟcos2θ, and φ fixed per stage so that
/// φ + α tracks arg(ḟ sin2θ − iθ̇).
pub fn synth_two_mode(
    schedule: &Schedule,
    form: AlphaRateForm,
    start: AlphaStart,
) -> Result<LabControls> {
    check_nodes(schedule, 2, 1)?;
    let stages = schedule.stages();
    let mut track = AlphaTrack::new(
        schedule.theta[0].clone(),
        schedule.phase_f[0].clone(),
        form,
        stages.clone(),
    )?;
    let alpha0 = match start {
        AlphaStart::Value(v) => v,
        AlphaStart::CleanTransfer => {
            let (a, b) = stages[0];
            let f = &schedule.phase_f[0];
            let df = f.eval_side(b, Side::Left)?.v - f.eval_side(a, Side::Right)?.v;
            PI + df - 0.5 * track.stage_change(0)
        }
    };
    let mut starts = vec![alpha0];
    for s in 1..stages.len() {
        starts.push(starts[s - 1] + track.stage_change(s - 1));
    }
    track.set_starts(starts);
    let anchors = track.anchored_starts()?;
    let phi: Vec<f64> = anchors.iter().zip(track.starts()).map(|(psi0, a0)| psi0 - a0).collect();
    let notes = vec![
        format!("two-mode detuning-modulated synthesis, alpha rate form {form:?}"),
        format!("alpha_1(0) = {alpha0:.15}"),
        "H^a diagonal carries Delta_n/2; J <= 0".into(),
    ];
    Ok(LabControls::new(
        NetworkTopology::two_mode(),
        notes,
        ControlKind::TwoMode(TwoModeSynth { schedule: schedule.clone(), alpha: track, phi }),
    ))
}

/// Two-mode synthesis at fixed detunings (ω₁−ω₂)/2 ∓ with a time-dependent
/// coupling phase. The schedule supplies both θ_1 and α_1.
pub fn synth_two_mode_phase(schedule: &Schedule, omega1: f64, omega2: f64) -> Result<LabControls> {
    check_nodes(schedule, 2, 0)?;
    let notes = vec![
        "two-mode phase-modulated synthesis at fixed detunings".into(),
        format!("omega1 - omega2 = {:.15}", omega1 - omega2),
    ];
    Ok(LabControls::new(
        NetworkTopology::two_mode(),
        notes,
        ControlKind::TwoModePhase(TwoModePhaseSynth {
            schedule: schedule.clone(),
            detuning_gap: omega1 - omega2,
        }),
    ))
}

/// Three-mode synthesis from θ_1, θ_2, f_1 and f (phase curves `[f1, f]`).
pub fn synth_three_mode(schedule: &Schedule, form: AlphaRateForm) -> Result<LabControls> {
    check_nodes(schedule, 3, 2)?;
    let stages = schedule.stages();
    let mut alpha1 =
        AlphaTrack::new(schedule.theta[0].clone(), schedule.phase_f[0].clone(), form, stages.clone())?;
    let mut alpha2 =
        AlphaTrack::new(schedule.theta[1].clone(), schedule.phase_f[1].clone(), form, stages)?;
    alpha1.set_starts(alpha1.anchored_starts()?);
    alpha2.set_starts(alpha2.anchored_starts()?);
    let notes = vec![
        format!("three-mode synthesis, alpha rate form {form:?}"),
        "alpha_k anchored to arg(f_k' sin2theta_k - i theta_k') at each stage start".into(),
        "scaling detunings: Delta_a = -(a1' + 2 f1' cos2th1), Delta = -(a2' + 2 f' cos2th2 + f1')".into(),
    ];
    Ok(LabControls::new(
        NetworkTopology::triangle(),
        notes,
        ControlKind::ThreeMode(ThreeModeSynth { schedule: schedule.clone(), alpha1, alpha2 }),
    ))
}

/// Star synthesis activating the passage through the hub mode μ_4.
pub fn synth_four_mode(schedule: &Schedule, phases: StarPhases) -> Result<LabControls> {
    check_nodes(schedule, 4, 0)?;
    let notes = vec![
        format!("four-mode star synthesis, phases {phases:?}"),
        "passage mu_4 activated; node 4 is the hub".into(),
    ];
    Ok(LabControls::new(
        NetworkTopology::star(4),
        notes,
        ControlKind::FourMode(FourModeSynth { schedule: schedule.clone(), phases }),
    ))
}

/// Worst residual of passage k over a grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PassageReport {
    pub k: usize,
    pub max_residual: f64,
    pub at: f64,
}

pub fn verify_passage<P: PassageModel + ?Sized>(model: &P, k: usize, grid: &[f64]) -> Result<PassageReport> {
    let mut rep = PassageReport { k, max_residual: 0.0, at: grid.first().copied().unwrap_or(0.0) };
    for &t in grid {
        let r = commutation_residual(&gauge_at(model, t, Side::Left)?, k)?;
        if r > rep.max_residual || r.is_nan() {
            rep.max_residual = r;
            rep.at = t;
        }
    }
    Ok(rep)
}

/// Rotation sense of a chiral loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Ccw,
    Cw,
}

/// f = c_s·θ_2 multipliers for the three stages of a NOON loop.
///
/// Each stage permutes the modes cyclically and gives every two-photon
/// branch a fixed phase; the defaults make the two branches of the carried
/// NOON pair pick up equal phases, so every stage lands exactly on the next
/// target and loops repeat.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct NoonPhasePlan {
    pub multipliers: [f64; 3],
}

impl NoonPhasePlan {
    pub fn for_direction(direction: Direction) -> Self {
        match direction {
            Direction::Ccw => Self { multipliers: [3.5, 2.5, 3.0] },
            Direction::Cw => Self { multipliers: [3.0, 2.5, 3.5] },
        }
    }

    pub fn uniform(c: f64) -> Self {
        Self { multipliers: [c; 3] }
    }
}

fn linear_seg(start: f64, end: f64, offset: f64, slope: f64) -> Segment {
    // offset + slope·(t − start)
    Segment { start, end, form: CurveForm::Linear { c0: offset - slope * start, c1: slope } }
}

fn const_seg(start: f64, end: f64, c0: f64) -> Segment {
    Segment { start, end, form: CurveForm::Constant { c0 } }
}

fn zero_curves(count: usize, end: f64) -> Result<Vec<Curve>> {
    (0..count).map(|_| Curve::constant(0.0, end, 0.0)).collect()
}

/// Three-mode NOON chiral loops with unit stage length.
///
/// With x = π(t − t_loop)/2 the stages set, counterclockwise:
/// (θ1 = x, θ2 = θ1), (θ1 = x − π/2, θ2 = θ1), (θ1 = x + π, θ2 = θ1 − π/2);
/// clockwise: (θ1 = x + π/2, θ2 = θ1 − π/2), (θ1 = x, θ2 = θ1 + π/2),
/// (θ1 = x + π/2, θ2 = θ1 + π/2). f_1 = 0 and f = c·θ_2.
pub fn build_noon_chiral_schedule(direction: Direction, loops: usize, plan: NoonPhasePlan) -> Result<Schedule> {
    if loops == 0 {
        return Err(Error::Config("loops must be ≥ 1".into()));
    }
    let rate = FRAC_PI_2;
    let (mut th1, mut th2, mut f) = (Vec::new(), Vec::new(), Vec::new());
    for k in 0..loops {
        for stage in 0..3 {
            let a = (3 * k + stage) as f64;
            let b = a + 1.0;
            // x at stage start is stage·π/2
            let x0 = stage as f64 * rate;
            let (o1, o2) = match (direction, stage) {
                (Direction::Ccw, 0) => (x0, x0),
                (Direction::Ccw, 1) => (x0 - FRAC_PI_2, x0 - FRAC_PI_2),
                (Direction::Ccw, _) => (x0 + PI, x0 + FRAC_PI_2),
                (Direction::Cw, 0) => (x0 + FRAC_PI_2, x0),
                (Direction::Cw, 1) => (x0, x0 + FRAC_PI_2),
                (Direction::Cw, _) => (x0 + FRAC_PI_2, x0 + PI),
            };
            let c = plan.multipliers[stage];
            th1.push(linear_seg(a, b, o1, rate));
            th2.push(linear_seg(a, b, o2, rate));
            f.push(linear_seg(a, b, c * o2, c * rate));
        }
    }
    let end = 3.0 * loops as f64;
    let spec = ScheduleSpec {
        theta: vec![Curve::new(th1)?, Curve::new(th2)?],
        alpha: zero_curves(2, end)?,
        phase_f: vec![Curve::constant(0.0, end, 0.0)?, Curve::new(f)?],
    };
    make_schedule(3, spec, (1..3 * loops).map(|i| i as f64).collect())
}

/// Which chiral Fock-state loop to build on the four-node star.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum FockLoop {
    /// a_1 → a_2 → a_3 → a_1 in three stages.
    ThreeNode,
    /// a_1 → a_2 → a_3 → a_4 → a_1 in four stages.
    FourNode,
}

fn hub_angle(start: f64, end: f64, loop_start: f64) -> Segment {
    Segment {
        start,
        end,
        form: CurveForm::Sinusoid { c0: FRAC_PI_2, c1: FRAC_PI_2, c2: PI, c3: 1.0, t0: loop_start },
    }
}

/// Chiral Fock-state loops on the star (unit stage length, α ≡ 0).
///
/// Stage (i): θ1 = Φ + π/2, θ2 = 2Φ + π/2; stage (ii): θ1 = Φ + π/2, θ2 = Φ;
/// three-node stage (iii): θ1 = θ2 = Φ, with θ3 = (π/2)[1 + s/(1+s²)],
/// s = sin(π t_loop). The four-node loop instead parks θ1 = 3π/2, θ2 = π in
/// stage (iii), ramps θ1 = θ2 = Φ + π/2 in stage (iv), and drives
/// θ3 = (π/2)[1 − sin(π t_loop/2)] across stages (iii)–(iv).
pub fn build_fock_chiral_schedule(loops: usize, variant: FockLoop) -> Result<Schedule> {
    if loops == 0 {
        return Err(Error::Config("loops must be ≥ 1".into()));
    }
    let per = match variant {
        FockLoop::ThreeNode => 3,
        FockLoop::FourNode => 4,
    };
    let rate = FRAC_PI_2;
    let (mut th1, mut th2, mut th3) = (Vec::new(), Vec::new(), Vec::new());
    for k in 0..loops {
        let l0 = (per * k) as f64;
        for stage in 0..per {
            let a = l0 + stage as f64;
            let b = a + 1.0;
            let phi0 = stage as f64 * rate;
            match stage {
                0 => {
                    th1.push(linear_seg(a, b, phi0 + FRAC_PI_2, rate));
                    th2.push(linear_seg(a, b, 2.0 * phi0 + FRAC_PI_2, 2.0 * rate));
                }
                1 => {
                    th1.push(linear_seg(a, b, phi0 + FRAC_PI_2, rate));
                    th2.push(linear_seg(a, b, phi0, rate));
                }
                2 if variant == FockLoop::ThreeNode => {
                    th1.push(linear_seg(a, b, phi0, rate));
                    th2.push(linear_seg(a, b, phi0, rate));
                }
                2 => {
                    th1.push(const_seg(a, b, 3.0 * FRAC_PI_2));
                    th2.push(const_seg(a, b, PI));
                }
                _ => {
                    th1.push(linear_seg(a, b, phi0 + FRAC_PI_2, rate));
                    th2.push(linear_seg(a, b, phi0 + FRAC_PI_2, rate));
                }
            }
        }
        match variant {
            FockLoop::ThreeNode => th3.push(hub_angle(l0, l0 + 3.0, l0)),
            FockLoop::FourNode => {
                th3.push(hub_angle(l0, l0 + 2.0, l0));
                th3.push(Segment {
                    start: l0 + 2.0,
                    end: l0 + 4.0,
                    form: CurveForm::Sinusoid { c0: FRAC_PI_2, c1: -FRAC_PI_2, c2: FRAC_PI_2, c3: 0.0, t0: l0 },
                });
            }
        }
    }
    let end = (per * loops) as f64;
    let spec = ScheduleSpec {
        theta: vec![Curve::new(th1)?, Curve::new(th2)?, Curve::new(th3)?],
        alpha: zero_curves(3, end)?,
        phase_f: Vec::new(),
    };
    make_schedule(4, spec, (1..per * loops).map(|i| i as f64).collect())
}

/// Single-stage two-mode ramp θ_1 = πt/2 on [0, 1] with f = c·θ_1.
pub fn two_mode_ramp_schedule(f_multiplier: f64) -> Result<Schedule> {
    let spec = ScheduleSpec {
        theta: vec![Curve::linear(0.0, 1.0, 0.0, FRAC_PI_2)?],
        alpha: vec![Curve::constant(0.0, 1.0, 0.0)?],
        phase_f: vec![Curve::linear(0.0, 1.0, 0.0, f_multiplier * FRAC_PI_2)?],
    };
    make_schedule(2, spec, Vec::new())
}

/// Ramp θ_1 = πt/2 with α_1 = α_0 + (ω₁−ω₂)t/2 for the phase-modulated variant.
pub fn two_mode_phase_schedule(detuning_gap: f64, alpha0: f64) -> Result<Schedule> {
    let spec = ScheduleSpec {
        theta: vec![Curve::linear(0.0, 1.0, 0.0, FRAC_PI_2)?],
        alpha: vec![Curve::linear(0.0, 1.0, alpha0, 0.5 * detuning_gap)?],
        phase_f: Vec::new(),
    };
    make_schedule(2, spec, Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ancillary::{frame_from_params, transform_matrix_side};
    use crate::linalg::{c, max_abs};

    fn grid(model: &LabControls, per_stage: usize) -> Vec<f64> {
        model.sample_times(per_stage)
    }

    #[test]
    fn ramp_without_phase_gives_bare_ramp_coupling() {
        let s = two_mode_ramp_schedule(0.0).unwrap();
        let ctl = synth_two_mode(&s, AlphaRateForm::Fdot, AlphaStart::Value(0.0)).unwrap();
        for t in [0.0, 0.3, 0.77, 1.0] {
            let p = ctl.pulses(t, Side::Left).unwrap();
            assert_eq!(p.delta[0], 0.0);
            assert!((p.j[0] + FRAC_PI_2).abs() < 1e-15);
        }
    }

    #[test]
    fn coupling_for_three_theta_phase() {
        let s = two_mode_ramp_schedule(3.0).unwrap();
        let ctl = synth_two_mode(&s, AlphaRateForm::Fdot, AlphaStart::CleanTransfer).unwrap();
        for t in [0.1, 0.4, 0.9] {
            let th = FRAC_PI_2 * t;
            let expect = -FRAC_PI_2 * (1.0 + 9.0 * (2.0 * th).sin().powi(2)).sqrt();
            assert!((ctl.pulses(t, Side::Left).unwrap().j[0] - expect).abs() < 1e-13);
        }
        let rep = verify_passage(&ctl, 1, &grid(&ctl, 200)).unwrap();
        assert!(rep.max_residual < 1e-10, "{rep:?}");
    }

    #[test]
    fn idle_schedule_idles() {
        let spec = ScheduleSpec {
            theta: vec![Curve::constant(0.0, 1.0, 0.4).unwrap()],
            alpha: vec![],
            phase_f: vec![Curve::constant(0.0, 1.0, 2.0).unwrap()],
        };
        let s = make_schedule(2, spec, vec![]).unwrap();
        let ctl = synth_two_mode(&s, AlphaRateForm::Fdot, AlphaStart::Value(0.0)).unwrap();
        let p = ctl.pulses(0.5, Side::Left).unwrap();
        assert_eq!((p.delta[0], p.j[0]), (0.0, 0.0));
    }

    #[test]
    fn corrupted_coupling_breaks_residual() {
        let s = two_mode_ramp_schedule(0.0).unwrap();
        let ctl = synth_two_mode(&s, AlphaRateForm::Fdot, AlphaStart::CleanTransfer).unwrap();
        let g = grid(&ctl, 50);
        assert!(verify_passage(&ctl, 1, &g).unwrap().max_residual < 1e-12);
        let bad = ctl.with_coupling_scale(1.01);
        assert!(verify_passage(&bad, 1, &g).unwrap().max_residual > 1e-3);
    }

    #[test]
    fn phase_variant_static_theta_gives_minus_alpha() {
        let spec = ScheduleSpec {
            theta: vec![Curve::constant(0.0, 1.0, 0.3).unwrap()],
            alpha: vec![Curve::linear(0.0, 1.0, 0.2, 1.0).unwrap()],
            phase_f: vec![],
        };
        let s = make_schedule(2, spec, vec![]).unwrap();
        let ctl = synth_two_mode_phase(&s, 5.0, 1.0).unwrap();
        for t in [0.0, 0.5] {
            let p = ctl.pulses(t, Side::Left).unwrap();
            let alpha = 0.2 + t;
            // φ ≡ −α modulo π; J's sign carries the rest
            let d = (p.phi[0] + alpha).rem_euclid(PI);
            assert!(d < 1e-12 || (PI - d) < 1e-12, "{d}");
        }
        let rep = verify_passage(&ctl, 1, &[0.1, 0.5, 0.9]).unwrap();
        assert!(rep.max_residual < 1e-12);
    }

    #[test]
    fn phase_variant_closes_residual_and_reports_divergence() {
        let s = two_mode_phase_schedule(20.0 * PI, 0.0).unwrap();
        let ctl = synth_two_mode_phase(&s, 10.0 * PI, -10.0 * PI).unwrap();
        let rep = verify_passage(&ctl, 1, &grid(&ctl, 200)).unwrap();
        assert!(rep.max_residual < 1e-10, "{rep:?}");
        // α ≡ 0 leaves a mismatch that blows up at cos2θ = 0
        let frozen = two_mode_phase_schedule(0.0, 0.0).unwrap();
        let bad = synth_two_mode_phase(&frozen, 10.0 * PI, -10.0 * PI).unwrap();
        assert!(matches!(bad.pulses(0.5, Side::Left), Err(Error::Synthesis { .. })));
    }

    #[test]
    fn three_mode_ramp_values() {
        let th = || Curve::linear(0.0, 1.0, 0.0, FRAC_PI_2).unwrap();
        let spec = ScheduleSpec {
            theta: vec![th(), th()],
            alpha: vec![],
            phase_f: vec![Curve::constant(0.0, 1.0, 0.0).unwrap(), Curve::constant(0.0, 1.0, 0.0).unwrap()],
        };
        let s = make_schedule(3, spec, vec![]).unwrap();
        let ctl = synth_three_mode(&s, AlphaRateForm::Fdot).unwrap();
        let p = ctl.pulses(0.5, Side::Left).unwrap();
        for d in &p.delta {
            assert!(d.abs() < 1e-15);
        }
        // θ_1 = π/4 here: |J_2/J_3| = tan θ_1 = 1
        assert!((p.j[1] / p.j[2] - 1.0).abs() < 1e-12);
        assert!((p.j[1].hypot(p.j[2]) - FRAC_PI_2).abs() < 1e-12);
        for k in 1..=3 {
            assert!(verify_passage(&ctl, k, &grid(&ctl, 100)).unwrap().max_residual < 1e-10);
        }
    }

    #[test]
    fn noon_schedules_close_all_residuals() {
        for dir in [Direction::Ccw, Direction::Cw] {
            let s = build_noon_chiral_schedule(dir, 1, NoonPhasePlan::for_direction(dir)).unwrap();
            let ctl = synth_three_mode(&s, AlphaRateForm::Fdot).unwrap();
            for k in 1..=3 {
                let r = verify_passage(&ctl, k, &grid(&ctl, 200)).unwrap();
                assert!(r.max_residual < 1e-10, "{dir:?} k={k} {r:?}");
            }
        }
    }

    #[test]
    fn noon_boundary_values() {
        let ccw = build_noon_chiral_schedule(Direction::Ccw, 2, NoonPhasePlan::for_direction(Direction::Ccw)).unwrap();
        assert_eq!(ccw.theta[0].eval_side(0.0, Side::Right).unwrap().v, 0.0);
        assert!((ccw.theta[0].eval(1.0).unwrap().v - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(ccw.theta[0].eval_side(1.0, Side::Right).unwrap().v, 0.0);
        assert_eq!(ccw.stages()[3].0, 3.0);
        let cw = build_noon_chiral_schedule(Direction::Cw, 1, NoonPhasePlan::for_direction(Direction::Cw)).unwrap();
        assert!((cw.theta[0].eval_side(0.0, Side::Right).unwrap().v - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(cw.theta[1].eval_side(0.0, Side::Right).unwrap().v, 0.0);
    }

    #[test]
    fn ccw_endpoint_mapping() {
        // μ_1(0)=a_1 → μ_1(τ)=a_2 and so on, row by row on M†.
        let s = build_noon_chiral_schedule(Direction::Ccw, 1, NoonPhasePlan::for_direction(Direction::Ccw)).unwrap();
        let ctl = synth_three_mode(&s, AlphaRateForm::Fdot).unwrap();
        let m0 = transform_matrix_side(&ctl, 0.0, Side::Right).unwrap().m_dag;
        let m1 = transform_matrix_side(&ctl, 1.0, Side::Left).unwrap().m_dag;
        for (k, (from, to)) in [(0usize, 1usize), (1, 2), (2, 0)].iter().enumerate() {
            assert!((m0[(k, *from)].norm() - 1.0).abs() < 1e-12);
            assert!((m1[(k, *to)].norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fock_schedule_boundaries() {
        let s = build_fock_chiral_schedule(1, FockLoop::ThreeNode).unwrap();
        for th in &s.theta {
            assert!((th.eval_side(0.0, Side::Right).unwrap().v - FRAC_PI_2).abs() < 1e-15);
        }
        assert!((s.theta[2].eval(0.5).unwrap().v - 0.75 * PI).abs() < 1e-15);
        assert!((s.theta[1].eval(2.0).unwrap().v - PI).abs() < 1e-15);
        assert!((s.theta[0].eval(1.0).unwrap().v - PI).abs() < 1e-15);
        let f = build_fock_chiral_schedule(1, FockLoop::FourNode).unwrap();
        assert!((f.theta[2].eval(3.0).unwrap().v - PI).abs() < 1e-15);
        for th in &f.theta {
            let v = th.eval(4.0).unwrap().v.rem_euclid(2.0 * PI);
            assert!((v - FRAC_PI_2).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn star_passage_closes() {
        let s = build_fock_chiral_schedule(1, FockLoop::ThreeNode).unwrap();
        let ctl = synth_four_mode(&s, StarPhases::QuarterTurn).unwrap();
        let r = verify_passage(&ctl, 4, &[0.25, 0.5, 1.3, 2.7]).unwrap();
        assert!(r.max_residual < 1e-10, "{r:?}");
        let p = ctl.pulses(0.25, Side::Left).unwrap();
        assert!(p.delta.iter().all(|d| *d == 0.0));
    }

    #[test]
    fn star_static_theta2_coupling() {
        let spec = ScheduleSpec {
            theta: vec![
                Curve::constant(0.0, 1.0, 0.4).unwrap(),
                Curve::constant(0.0, 1.0, 0.9).unwrap(),
                Curve::linear(0.0, 1.0, 0.2, 0.7).unwrap(),
            ],
            ..Default::default()
        };
        let s = make_schedule(4, spec, vec![]).unwrap();
        let ctl = synth_four_mode(&s, StarPhases::QuarterTurn).unwrap();
        let p = ctl.pulses(0.3, Side::Left).unwrap();
        assert!((p.j[2] + 0.7 * 0.9f64.cos()).abs() < 1e-15);
        let still = make_schedule(
            4,
            ScheduleSpec {
                theta: (0..3).map(|i| Curve::constant(0.0, 1.0, 0.3 * i as f64 + 0.1).unwrap()).collect(),
                ..Default::default()
            },
            vec![],
        )
        .unwrap();
        let p = synth_four_mode(&still, StarPhases::QuarterTurn).unwrap().pulses(0.5, Side::Left).unwrap();
        assert_eq!(p.j, vec![0.0, 0.0, 0.0]);
        let bad = synth_four_mode(&still, StarPhases::Fixed([0.0, 1.0, 1.0])).unwrap();
        assert!(matches!(bad.pulses(0.5, Side::Left), Err(Error::Synthesis { .. })));
    }

    #[test]
    fn two_mode_hamiltonian_layout() {
        let top = NetworkTopology::two_mode();
        let p = Pulses { delta: vec![0.0, 0.0], j: vec![-FRAC_PI_2], phi: vec![0.3] };
        let h = assemble_hamiltonian(&top, &p);
        let z = cis(0.3) * -FRAC_PI_2;
        let expect = CMat::from_row_slice(2, 2, &[c(0., 0.), z, z.conj(), c(0., 0.)]);
        assert!(max_abs(&(h - expect)) < 1e-16);
    }

    #[test]
    fn sample_roundtrip_replays_exactly() {
        let s = two_mode_ramp_schedule(3.0).unwrap();
        let ctl = synth_two_mode(&s, AlphaRateForm::Fdot, AlphaStart::CleanTransfer).unwrap();
        let data = ctl.sample(40).unwrap();
        let json = serde_json::to_string(&data).unwrap();
        let back: SampledPulses = serde_json::from_str(&json).unwrap();
        let replay = LabControls::from_samples(back, Some(ctl.clone())).unwrap();
        let r = verify_passage(&replay, 1, &ctl.sample_times(40)).unwrap();
        assert!(r.max_residual < 1e-12, "{r:?}");
    }

    #[test]
    fn frame_of_static_schedule_is_static() {
        let s = build_fock_chiral_schedule(1, FockLoop::ThreeNode).unwrap();
        let p = s.frame_params(0.5, Side::Left).unwrap();
        assert_eq!(frame_from_params(&p, 0.5).n, 4);
    }
}
