//! Dynamics engines: many-body Schrödinger and density evolution, the
//! first-quantized propagator, a permanent-based amplitude oracle, and the
//! Heisenberg-picture passage check.
//!
//! All engines share one fixed-step RK4 driver. Each stage is split into
//! pieces mapped from a unit parameter u; stage ends where the couplings
//! diverge like 1/δ are integrated in log-distance, which keeps δ·H bounded.

use std::sync::Arc;

use num_complex::Complex64;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::ancillary::{commutation_residual, gauge_at, global_phase, transform_matrix_side, PassageModel};
use crate::curves::Side;
use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, FockBasis, LadderTable, StateVector};
use crate::linalg::{max_abs, unitarity_defect, CMat, CVec, I};

/// Source of the N×N coefficient matrix H^a(t).
pub trait HamiltonianProvider: Sync {
    fn modes(&self) -> usize;
    fn coefficient(&self, t: f64, side: Side) -> Result<CMat>;
    /// Stage intervals in order; controls may jump between them.
    fn stage_intervals(&self) -> Vec<(f64, f64)>;
    /// Whether the coefficients blow up at the (start, end) of a stage.
    fn singular_ends(&self, stage: usize) -> (bool, bool) {
        detect_singular_ends(self, stage)
    }
}

fn probe<P: HamiltonianProvider + ?Sized>(p: &P, t: f64, side: Side) -> f64 {
    match p.coefficient(t, side) {
        Ok(h) => {
            let m = max_abs(&h);
            if m.is_finite() {
                m
            } else {
                f64::INFINITY
            }
        }
        Err(_) => f64::INFINITY,
    }
}

/// Flags a stage end as singular when the coefficients are not finite there
/// or grow by more than 100× between 1e−3 and 1e−7 of the stage length.
pub fn detect_singular_ends<P: HamiltonianProvider + ?Sized>(p: &P, stage: usize) -> (bool, bool) {
    let (a, b) = p.stage_intervals()[stage];
    let len = b - a;
    let check = |edge: f64, dir: f64, side: Side| {
        let at = probe(p, edge, side);
        let near = probe(p, edge + dir * 1e-7 * len, Side::Left);
        let far = probe(p, edge + dir * 1e-3 * len, Side::Left);
        !at.is_finite() || !near.is_finite() || near > 100.0 * (far + 1e-9)
    };
    (check(a, 1.0, Side::Right), check(b, -1.0, Side::Left))
}

/// Integration settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct EvolveOptions {
    pub steps_per_stage: usize,
    /// Bound on norm (or unitarity) drift over the whole trajectory.
    pub tolerance: f64,
    /// Number of times the step count may be doubled.
    pub max_halvings: u32,
    /// Record every n-th step of the regular part of a stage.
    pub record_stride: usize,
    /// Width (in stage lengths) of a log-distance zone at a singular end.
    pub log_zone: f64,
    /// Closest approach (in stage lengths) to a singular end.
    pub log_floor: f64,
    pub threads: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            steps_per_stage: 2000,
            tolerance: 1e-9,
            max_halvings: 4,
            record_stride: 4,
            log_zone: 0.05,
            log_floor: 1e-12,
            threads: 1,
        }
    }
}

/// Sampled states plus diagnostics on the same grid.
#[derive(Clone, Debug)]
pub struct Trajectory<Y> {
    pub times: Vec<f64>,
    pub states: Vec<Y>,
    /// |‖ψ‖² − ‖ψ₀‖²| for vectors, ‖G†G − I‖_max for propagators.
    pub drift: Vec<f64>,
    /// Steps used per stage after halving.
    pub stage_steps: Vec<usize>,
}

impl<Y> Trajectory<Y> {
    /// Index of the recorded time closest to `t`.
    pub fn nearest(&self, t: f64) -> usize {
        let i = self.times.partition_point(|&x| x < t);
        if i == 0 {
            0
        } else if i == self.times.len() {
            i - 1
        } else if (self.times[i] - t).abs() < (t - self.times[i - 1]).abs() {
            i
        } else {
            i - 1
        }
    }

    /// Commutation residual of passage `k` at every recorded time. Points
    /// where the controls are singular (divergent stage ends) read NaN.
    pub fn residual_series<P: PassageModel + ?Sized>(&self, model: &P, k: usize) -> Vec<f64> {
        let stages = model.stage_intervals();
        self.times
            .iter()
            .map(|&t| {
                let (a, b) = stages.iter().copied().find(|&(a, b)| t >= a && t <= b).unwrap_or(stages[0]);
                let side = if t < 0.5 * (a + b) { Side::Right } else { Side::Left };
                gauge_at(model, t, side)
                    .and_then(|g| commutation_residual(&g, k))
                    .ok()
                    .filter(|r| r.is_finite())
                    .unwrap_or(f64::NAN)
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug)]
enum Map {
    Linear { t0: f64, t1: f64 },
    /// t = a + floor·e^{uL}
    LogLeft { a: f64, floor: f64, l: f64 },
    /// t = b − width·e^{−uL}
    LogRight { b: f64, width: f64, l: f64 },
}

impl Map {
    fn at(&self, u: f64) -> (f64, f64) {
        match *self {
            Map::Linear { t0, t1 } => (t0 + u * (t1 - t0), t1 - t0),
            Map::LogLeft { a, floor, l } => {
                let d = floor * (u * l).exp();
                (a + d, d * l)
            }
            Map::LogRight { b, width, l } => {
                let d = width * (-u * l).exp();
                (b - d, d * l)
            }
        }
    }

    fn is_linear(&self) -> bool {
        matches!(self, Map::Linear { .. })
    }
}

fn stage_pieces(a: f64, b: f64, ends: (bool, bool), opts: &EvolveOptions, mult: usize) -> Vec<(Map, usize)> {
    let len = b - a;
    let w = opts.log_zone * len;
    let floor = opts.log_floor * len;
    let l = (w / floor).ln();
    let n = opts.steps_per_stage * mult;
    let mut out = Vec::new();
    let lo = if ends.0 { a + w } else { a };
    let hi = if ends.1 { b - w } else { b };
    if ends.0 {
        out.push((Map::LogLeft { a, floor, l }, n / 2));
    }
    let frac = (hi - lo) / len;
    out.push((Map::Linear { t0: lo, t1: hi }, ((n as f64 * frac).ceil() as usize).max(1)));
    if ends.1 {
        out.push((Map::LogRight { b, width: w, l }, n / 2));
    }
    out
}

/// State types the RK4 driver can advance.
pub trait OdeState: Clone + Send + Sync {
    fn zeros_like(&self) -> Self;
    /// self = y + a·k
    fn set_axpy(&mut self, y: &Self, a: f64, k: &Self);
    /// self += a·k
    fn add_scaled(&mut self, a: f64, k: &Self);
    fn drift_from(&self, initial: &Self) -> f64;
}

impl OdeState for CVec {
    fn zeros_like(&self) -> Self {
        CVec::zeros(self.len())
    }
    fn set_axpy(&mut self, y: &Self, a: f64, k: &Self) {
        for ((s, y), k) in self.iter_mut().zip(y.iter()).zip(k.iter()) {
            *s = y + k * a;
        }
    }
    fn add_scaled(&mut self, a: f64, k: &Self) {
        self.axpy(Complex64::new(a, 0.0), k, Complex64::new(1.0, 0.0));
    }
    fn drift_from(&self, initial: &Self) -> f64 {
        (self.norm_squared() - initial.norm_squared()).abs()
    }
}

impl OdeState for CMat {
    fn zeros_like(&self) -> Self {
        CMat::zeros(self.nrows(), self.ncols())
    }
    fn set_axpy(&mut self, y: &Self, a: f64, k: &Self) {
        for ((s, y), k) in self.iter_mut().zip(y.iter()).zip(k.iter()) {
            *s = y + k * a;
        }
    }
    fn add_scaled(&mut self, a: f64, k: &Self) {
        for (s, k) in self.iter_mut().zip(k.iter()) {
            *s += k * a;
        }
    }
    fn drift_from(&self, _initial: &Self) -> f64 {
        unitarity_defect(self)
    }
}

/// Right-hand side: out = scale·H(h_a)·y.
pub trait Generator<Y>: Sync {
    fn apply(&self, h_a: &CMat, scale: Complex64, y: &Y, out: &mut Y);
}

struct ManyBody<'a>(&'a LadderTable);

impl Generator<CVec> for ManyBody<'_> {
    fn apply(&self, h_a: &CMat, scale: Complex64, y: &CVec, out: &mut CVec) {
        self.0.apply(h_a, scale, y, out);
    }
}

struct FirstQuantized;

impl Generator<CMat> for FirstQuantized {
    fn apply(&self, h_a: &CMat, scale: Complex64, y: &CMat, out: &mut CMat) {
        let prod = h_a * y;
        for (o, p) in out.iter_mut().zip(prod.iter()) {
            *o = p * scale;
        }
    }
}

struct StageResult<Y> {
    times: Vec<f64>,
    states: Vec<Y>,
    end: Y,
    steps: usize,
}

fn run_stage<Y: OdeState, P: HamiltonianProvider + ?Sized, G: Generator<Y>>(
    provider: &P,
    gen: &G,
    y0: &Y,
    (a, b): (f64, f64),
    ends: (bool, bool),
    opts: &EvolveOptions,
    mult: usize,
) -> Result<StageResult<Y>> {
    // Curves snap to breakpoints within a tiny window, so pick the side by
    // which half of the stage t is in.
    let side_at = |t: f64| if t < 0.5 * (a + b) { Side::Right } else { Side::Left };
    let coeff = |t: f64| -> Result<CMat> {
        let h = provider.coefficient(t, side_at(t))?;
        if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Integration(format!("non-finite coefficients at t = {t}")));
        }
        Ok(h)
    };
    let mut y = y0.clone();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (y.zeros_like(), y.zeros_like(), y.zeros_like(), y.zeros_like(), y.zeros_like());
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut total = 0;
    let pieces = stage_pieces(a, b, ends, opts, mult);
    let last_piece = pieces.len() - 1;
    for (pi, (map, steps)) in pieces.into_iter().enumerate() {
        let h = 1.0 / steps as f64;
        let (t_start, d_start) = map.at(0.0);
        let mut h0 = coeff(t_start)?;
        let mut s0 = -I * d_start;
        let stride = if map.is_linear() { (opts.record_stride * mult).max(1) } else { usize::MAX };
        for i in 0..steps {
            let u = i as f64 * h;
            let (tm, dm) = map.at(u + 0.5 * h);
            let (t1, d1) = map.at(u + h);
            let hm = coeff(tm)?;
            let h1 = coeff(t1)?;
            let sm = -I * dm;
            let s1 = -I * d1;
            gen.apply(&h0, s0, &y, &mut k1);
            tmp.set_axpy(&y, 0.5 * h, &k1);
            gen.apply(&hm, sm, &tmp, &mut k2);
            tmp.set_axpy(&y, 0.5 * h, &k2);
            gen.apply(&hm, sm, &tmp, &mut k3);
            tmp.set_axpy(&y, h, &k3);
            gen.apply(&h1, s1, &tmp, &mut k4);
            y.add_scaled(h / 6.0, &k1);
            y.add_scaled(h / 3.0, &k2);
            y.add_scaled(h / 3.0, &k3);
            y.add_scaled(h / 6.0, &k4);
            h0 = h1;
            s0 = s1;
            total += 1;
            let piece_end = i + 1 == steps;
            if piece_end && pi == last_piece {
                break;
            }
            if (i + 1) % stride == 0 || (piece_end && !map.is_linear()) {
                times.push(t1);
                states.push(y.clone());
            }
        }
    }
    Ok(StageResult { times, states, end: y, steps: total })
}

/// Runs all stages with step doubling. Each stage may add at most
/// `tolerance / stages` of drift, so the whole trajectory stays within
/// `tolerance`.
pub fn integrate<Y: OdeState, P: HamiltonianProvider + ?Sized, G: Generator<Y>>(
    provider: &P,
    gen: &G,
    y0: Y,
    opts: &EvolveOptions,
) -> Result<Trajectory<Y>> {
    let stages = provider.stage_intervals();
    let initial = y0.clone();
    let mut traj = Trajectory {
        times: vec![stages[0].0],
        drift: vec![y0.drift_from(&initial)],
        states: vec![y0.clone()],
        stage_steps: Vec::new(),
    };
    let budget = opts.tolerance / stages.len() as f64;
    let mut y = y0;
    for (s, &(a, b)) in stages.iter().enumerate() {
        let ends = provider.singular_ends(s);
        let before = y.drift_from(&initial);
        let mut mult = 1;
        let res = loop {
            let r = run_stage(provider, gen, &y, (a, b), ends, opts, mult)?;
            let gained = (r.end.drift_from(&initial) - before).abs();
            if gained <= budget {
                break r;
            }
            if mult >= 1 << opts.max_halvings {
                return Err(Error::Integration(format!(
                    "stage [{a}, {b}]: drift {gained:.3e} above {budget:.1e} with {} steps",
                    r.steps
                )));
            }
            mult *= 2;
        };
        for (t, st) in res.times.into_iter().zip(res.states) {
            traj.drift.push(st.drift_from(&initial));
            traj.times.push(t);
            traj.states.push(st);
        }
        traj.times.push(b);
        traj.drift.push(res.end.drift_from(&initial));
        traj.states.push(res.end.clone());
        traj.stage_steps.push(res.steps);
        y = res.end;
    }
    Ok(traj)
}

fn check_modes<P: HamiltonianProvider + ?Sized>(p: &P, basis: &FockBasis) -> Result<()> {
    if p.modes() != basis.modes() {
        return Err(Error::BasisMismatch(format!(
            "provider has {} modes, basis has {}",
            p.modes(),
            basis.modes()
        )));
    }
    Ok(())
}

/// Integrates i dψ/dt = H(t)ψ on the many-body basis. Norm is never
/// renormalized; its drift is part of the trajectory.
pub fn schrodinger_evolve<P: HamiltonianProvider + ?Sized>(
    provider: &P,
    psi0: &StateVector,
    opts: &EvolveOptions,
) -> Result<Trajectory<CVec>> {
    check_modes(provider, &psi0.basis)?;
    let table = LadderTable::new(psi0.basis.clone());
    integrate(provider, &ManyBody(&table), psi0.amp.clone(), opts)
}

/// Same as [`schrodinger_evolve`] with a prebuilt ladder table.
pub fn schrodinger_evolve_with<P: HamiltonianProvider + ?Sized>(
    provider: &P,
    table: &LadderTable,
    amp0: CVec,
    opts: &EvolveOptions,
) -> Result<Trajectory<CVec>> {
    integrate(provider, &ManyBody(table), amp0, opts)
}

/// Mixture evolved branch by branch.
#[derive(Clone, Debug)]
pub struct DensityTrajectory {
    pub basis: Arc<FockBasis>,
    pub times: Vec<f64>,
    pub weights: Vec<f64>,
    pub branches: Vec<Trajectory<CVec>>,
}

impl DensityTrajectory {
    pub fn density_at(&self, i: usize) -> DensityMatrix {
        let dim = self.basis.dim();
        let mut rho = CMat::zeros(dim, dim);
        for (w, br) in self.weights.iter().zip(&self.branches) {
            let v = &br.states[i];
            rho += (v * v.adjoint()) * Complex64::new(*w, 0.0);
        }
        DensityMatrix { basis: self.basis.clone(), rho, deficit: 0.0 }
    }

    /// |Tr ρ(t) − Tr ρ(0)| per grid point.
    pub fn trace_drift(&self) -> Vec<f64> {
        (0..self.times.len())
            .map(|i| {
                self.weights
                    .iter()
                    .zip(&self.branches)
                    .map(|(w, br)| w * (br.states[i].norm_squared() - br.states[0].norm_squared()))
                    .sum::<f64>()
                    .abs()
            })
            .collect()
    }

    /// Tr[ρ(t_i) σ] without forming ρ.
    pub fn overlap(&self, i: usize, sigma: &CMat) -> f64 {
        self.weights
            .iter()
            .zip(&self.branches)
            .map(|(w, br)| {
                let v = &br.states[i];
                w * (v.adjoint() * sigma * v)[(0, 0)].re
            })
            .sum()
    }
}

/// Drift budget of one branch: light branches may drift more, keeping the
/// weighted sum (the trace drift) within `tol`.
fn branch_tolerance(tol: f64, weight: f64, count: usize) -> f64 {
    (tol / (weight * count as f64)).clamp(tol, 1e-4)
}

/// Weighted pure components of ρ: basis vectors when ρ is diagonal,
/// eigenvectors otherwise. Weights below 1e-16 are dropped.
pub fn spectral_branches(rho0: &DensityMatrix) -> Result<Vec<(f64, CVec)>> {
    let dim = rho0.basis.dim();
    let diagonal = (0..dim).all(|r| (0..dim).all(|c| r == c || rho0.rho[(r, c)].norm() == 0.0));
    let mut branches0: Vec<(f64, CVec)> = Vec::new();
    if diagonal {
        for i in 0..dim {
            let w = rho0.rho[(i, i)].re;
            if w > 1e-16 {
                let mut v = CVec::zeros(dim);
                v[i] = Complex64::new(1.0, 0.0);
                branches0.push((w, v));
            }
        }
    } else {
        let eig = rho0.rho.clone().symmetric_eigen();
        for (i, w) in eig.eigenvalues.iter().enumerate() {
            if *w < -1e-12 {
                return Err(Error::Config(format!("density has negative eigenvalue {w}")));
            }
            if *w > 1e-16 {
                branches0.push((*w, eig.eigenvectors.column(i).into_owned()));
            }
        }
    }
    Ok(branches0)
}

/// Spectral decomposition of ρ₀; each eigenvector is evolved separately.
pub fn density_evolve<P: HamiltonianProvider + ?Sized>(
    provider: &P,
    rho0: &DensityMatrix,
    opts: &EvolveOptions,
) -> Result<DensityTrajectory> {
    check_modes(provider, &rho0.basis)?;
    let defect = crate::linalg::hermitian_defect(&rho0.rho);
    if defect > 1e-12 {
        return Err(Error::NotHermitian { defect });
    }
    let branches0 = spectral_branches(rho0)?;
    let table = LadderTable::new(rho0.basis.clone());
    let count = branches0.len();
    let threads = opts.threads.max(1).min(branches0.len().max(1));
    let chunk = branches0.len().div_ceil(threads).max(1);
    let results: Vec<Result<Vec<Trajectory<CVec>>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = branches0
            .chunks(chunk)
            .map(|part| {
                let table = &table;
                scope.spawn(move || {
                    part.iter()
                        .map(|(w, v)| {
                            let o = EvolveOptions { tolerance: branch_tolerance(opts.tolerance, *w, count), ..opts.clone() };
                            integrate(provider, &ManyBody(table), v.clone(), &o)
                        })
                        .collect::<Result<Vec<_>>>()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("branch thread panicked")).collect()
    });
    let mut branches = Vec::with_capacity(branches0.len());
    for r in results {
        branches.extend(r?);
    }
    let times = branches.first().map(|b| b.times.clone()).unwrap_or_default();
    Ok(DensityTrajectory {
        basis: rho0.basis.clone(),
        times,
        weights: branches0.iter().map(|(w, _)| *w).collect(),
        branches,
    })
}

/// G(t) solving i dG/dt = H^a(t) G with G(0) = I.
pub fn single_particle_propagator<P: HamiltonianProvider + ?Sized>(
    provider: &P,
    opts: &EvolveOptions,
) -> Result<Trajectory<CMat>> {
    let n = provider.modes();
    integrate(provider, &FirstQuantized, CMat::identity(n, n), opts)
}

/// Permanent by Ryser's formula with Gray-code updates.
pub fn permanent(a: &CMat) -> Complex64 {
    let n = a.nrows();
    if n == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let mut row_sums = vec![Complex64::default(); n];
    let mut total = Complex64::default();
    let mut gray: u64 = 0;
    for k in 1u64..(1 << n) {
        let next = k ^ (k >> 1);
        let flipped = (gray ^ next).trailing_zeros() as usize;
        let adding = next & (1 << flipped) != 0;
        for (r, s) in row_sums.iter_mut().enumerate() {
            if adding {
                *s += a[(r, flipped)];
            } else {
                *s -= a[(r, flipped)];
            }
        }
        gray = next;
        let prod = row_sums.iter().fold(Complex64::new(1.0, 0.0), |acc, s| acc * s);
        let sign = if (n as u32 - next.count_ones()) % 2 == 0 { 1.0 } else { -1.0 };
        total += prod * sign;
    }
    total
}

pub const PERMANENT_LIMIT: usize = 8;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|x| x as f64).product()
}

/// ⟨m′|U|m⟩ for the many-body evolution generated by the propagator G.
pub fn fock_amplitudes(g: &CMat, input: &[usize], output: &[usize]) -> Result<Complex64> {
    let (nin, nout): (usize, usize) = (input.iter().sum(), output.iter().sum());
    if nin != nout {
        return Err(Error::ExcitationMismatch { input: nin, output: nout });
    }
    if nin > PERMANENT_LIMIT {
        return Err(Error::PermanentGuard(nin));
    }
    if input.len() != g.ncols() || output.len() != g.nrows() {
        return Err(Error::BasisMismatch("occupation length differs from propagator size".into()));
    }
    let rows: Vec<usize> = output.iter().enumerate().flat_map(|(i, &m)| std::iter::repeat(i).take(m)).collect();
    let cols: Vec<usize> = input.iter().enumerate().flat_map(|(j, &m)| std::iter::repeat(j).take(m)).collect();
    let sub = CMat::from_fn(nin, nin, |r, c| g[(rows[r], cols[c])]);
    let norm: f64 = input.iter().chain(output).map(|&m| factorial(m)).product::<f64>().sqrt();
    Ok(permanent(&sub) / norm)
}

/// Largest deviation found by [`heisenberg_passage_check`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeisenbergReport {
    pub k: usize,
    pub max_deviation: f64,
    pub at: f64,
}

/// Checks, stage by stage, that G carries col_k(M(t_s)) onto
/// e^{−i f_kk}·col_k(M(t)), with f_kk from the global-phase quadrature.
pub fn heisenberg_passage_check<P: PassageModel + ?Sized>(
    model: &P,
    k: usize,
    opts: &EvolveOptions,
    residual_tol: f64,
) -> Result<HeisenbergReport> {
    let traj = single_particle_propagator(model, opts)?;
    let mut rep = HeisenbergReport { k, max_deviation: 0.0, at: traj.times[0] };
    for &(a, b) in &model.stage_intervals() {
        let Some(i0) = traj.times.iter().position(|&t| t == a) else {
            continue;
        };
        let g0_inv = traj.states[i0].adjoint();
        let v0 = transform_matrix_side(model, a, Side::Right)?.passage_vector(k - 1);
        let mut phase = 0.0;
        let mut prev = a;
        for i in i0 + 1..traj.times.len() {
            let t = traj.times[i];
            if t > b {
                break;
            }
            phase += global_phase(model, k, prev, t, residual_tol)?;
            prev = t;
            let moved = &traj.states[i] * &g0_inv * &v0;
            let target = transform_matrix_side(model, t, Side::Left)?.passage_vector(k - 1)
                * Complex64::from_polar(1.0, -phase);
            let dev = (moved - target).iter().fold(0.0f64, |m, z| m.max(z.norm()));
            if dev > rep.max_deviation {
                rep.max_deviation = dev;
                rep.at = t;
            }
        }
    }
    Ok(rep)
}

/// Any closure-backed provider; handy for tests and ad-hoc drives.
pub struct FnProvider<F> {
    pub modes: usize,
    pub stages: Vec<(f64, f64)>,
    pub f: F,
}

impl<F: Fn(f64) -> CMat + Sync> HamiltonianProvider for FnProvider<F> {
    fn modes(&self) -> usize {
        self.modes
    }
    fn coefficient(&self, t: f64, _side: Side) -> Result<CMat> {
        Ok((self.f)(t))
    }
    fn stage_intervals(&self) -> Vec<(f64, f64)> {
        self.stages.clone()
    }
}

/// Runs a provider backwards: H_rev(t) = −H(a + b − t) on each reversed
/// stage, which undoes the forward evolution.
pub struct Reversed<'a, P: ?Sized>(pub &'a P);

impl<P: HamiltonianProvider + ?Sized> HamiltonianProvider for Reversed<'_, P> {
    fn modes(&self) -> usize {
        self.0.modes()
    }
    fn coefficient(&self, t: f64, side: Side) -> Result<CMat> {
        let (a, b) = self.span();
        let flipped = match side {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        };
        Ok(-self.0.coefficient(a + b - t, flipped)?)
    }
    fn stage_intervals(&self) -> Vec<(f64, f64)> {
        let (a, b) = self.span();
        self.0.stage_intervals().iter().rev().map(|&(lo, hi)| (a + b - hi, a + b - lo)).collect()
    }
    fn singular_ends(&self, stage: usize) -> (bool, bool) {
        let n = self.0.stage_intervals().len();
        let (l, r) = self.0.singular_ends(n - 1 - stage);
        (r, l)
    }
}

impl<P: HamiltonianProvider + ?Sized> Reversed<'_, P> {
    fn span(&self) -> (f64, f64) {
        let s = self.0.stage_intervals();
        (s[0].0, s[s.len() - 1].1)
    }
}
