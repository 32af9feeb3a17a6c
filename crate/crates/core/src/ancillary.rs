//! Time-dependent ancillary frame: the unitary M†(t), bright vectors, gauge
//! potential, rotated coefficient matrix and the commutation residual.

use num_complex::Complex64;

use crate::curves::{Schedule, Side};
use crate::error::{Error, Result};
use crate::evolve::HamiltonianProvider;
use crate::linalg::{cis, expm, hermitian_defect, CMat, CVec, I};
use crate::quad;

/// Instantaneous frame angles and their rates (`theta[k]` is θ_{k+1}).
#[derive(Clone, Debug, PartialEq)]
pub struct FrameParams {
    pub theta: Vec<f64>,
    pub theta_dot: Vec<f64>,
    pub alpha: Vec<f64>,
    pub alpha_dot: Vec<f64>,
}

impl FrameParams {
    pub fn n(&self) -> usize {
        self.theta.len() + 1
    }

    pub fn is_static(&self) -> bool {
        self.theta_dot.iter().chain(&self.alpha_dot).all(|&x| x == 0.0)
    }
}

/// Anything that can report the frame angles at a time.
pub trait FrameSource {
    fn node_count(&self) -> usize;
    fn frame_params(&self, t: f64, side: Side) -> Result<FrameParams>;
}

impl FrameSource for Schedule {
    fn node_count(&self) -> usize {
        self.n
    }

    fn frame_params(&self, t: f64, side: Side) -> Result<FrameParams> {
        self.check_time(t)?;
        let m = self.n - 1;
        let mut p = FrameParams {
            theta: Vec::with_capacity(m),
            theta_dot: Vec::with_capacity(m),
            alpha: Vec::with_capacity(m),
            alpha_dot: Vec::with_capacity(m),
        };
        for k in 0..m {
            let th = self.theta[k].eval_side(t, side)?;
            let al = self.alpha[k].eval_side(t, side)?;
            p.theta.push(th.v);
            p.theta_dot.push(th.d1);
            p.alpha.push(al.v);
            p.alpha_dot.push(al.d1);
        }
        Ok(p)
    }
}

/// M†(t) and its elementwise time derivative.
#[derive(Clone, Debug)]
pub struct AncillaryFrame {
    pub n: usize,
    pub m_dag: CMat,
    pub m_dag_dot: CMat,
    pub t: f64,
}

impl AncillaryFrame {
    /// Column k (0-based) of M, i.e. the conjugated ancillary row.
    pub fn passage_vector(&self, k: usize) -> CVec {
        self.m_dag.row(k).adjoint()
    }
}

/// Coefficient matrices in the rotated ancillary basis.
#[derive(Clone, Debug)]
pub struct GaugeData {
    pub h_mu: CMat,
    pub a: CMat,
    pub h_rot: CMat,
    pub t: f64,
}

/// Bright vector b_k of length k+1 (1 ≤ k ≤ N−1).
pub fn bright_vector(params: &FrameParams, k: usize) -> Result<CVec> {
    let max = params.theta.len();
    if k == 0 || k > max {
        return Err(Error::IndexOutOfRange { index: k, max });
    }
    let mut b = vec![Complex64::new(1.0, 0.0)];
    for j in 0..k {
        let (s, c) = params.theta[j].sin_cos();
        let half = 0.5 * params.alpha[j];
        let up = cis(half) * s;
        let mut next: Vec<Complex64> = b.iter().map(|z| z * up).collect();
        next.push(cis(-half) * c);
        b = next;
    }
    Ok(CVec::from_vec(b))
}

/// Frame matrix from explicit parameters.
pub fn frame_from_params(params: &FrameParams, t: f64) -> AncillaryFrame {
    let n = params.n();
    let mut m = CMat::zeros(n, n);
    let mut md = CMat::zeros(n, n);
    let mut b = vec![Complex64::new(1.0, 0.0)];
    let mut bd = vec![Complex64::new(0.0, 0.0)];
    for k in 0..n - 1 {
        let (s, c) = params.theta[k].sin_cos();
        let (th_d, al_d) = (params.theta_dot[k], params.alpha_dot[k]);
        let ep = cis(0.5 * params.alpha[k]);
        let em = ep.conj();
        let p = ep * c;
        let p_d = ep * Complex64::new(-s * th_d, 0.5 * c * al_d);
        let q = -em * s;
        let q_d = em * Complex64::new(-c * th_d, 0.5 * s * al_d);
        let u = ep * s;
        let u_d = ep * Complex64::new(c * th_d, 0.5 * s * al_d);
        let w = em * c;
        let w_d = em * Complex64::new(-s * th_d, -0.5 * c * al_d);
        for j in 0..=k {
            m[(k, j)] = p * b[j];
            md[(k, j)] = p_d * b[j] + p * bd[j];
        }
        m[(k, k + 1)] = q;
        md[(k, k + 1)] = q_d;
        let mut nb: Vec<Complex64> = b.iter().map(|z| u * z).collect();
        let mut nbd: Vec<Complex64> = b.iter().zip(&bd).map(|(z, zd)| u_d * z + u * zd).collect();
        nb.push(w);
        nbd.push(w_d);
        b = nb;
        bd = nbd;
    }
    for j in 0..n {
        m[(n - 1, j)] = b[j];
        md[(n - 1, j)] = bd[j];
    }
    AncillaryFrame { n, m_dag: m, m_dag_dot: md, t }
}

pub fn transform_matrix<S: FrameSource + ?Sized>(src: &S, t: f64) -> Result<AncillaryFrame> {
    transform_matrix_side(src, t, Side::Left)
}

pub fn transform_matrix_side<S: FrameSource + ?Sized>(
    src: &S,
    t: f64,
    side: Side,
) -> Result<AncillaryFrame> {
    Ok(frame_from_params(&src.frame_params(t, side)?, t))
}

/// A = i·M†·dM/dt.
pub fn gauge_potential(frame: &AncillaryFrame) -> CMat {
    (&frame.m_dag * frame.m_dag_dot.adjoint()) * I
}

/// H^μ = M†·H^a·M and H_rot = H^μ − A.
pub fn rotated_coefficient(h_a: &CMat, frame: &AncillaryFrame) -> Result<GaugeData> {
    if h_a.nrows() != frame.n || h_a.ncols() != frame.n {
        return Err(Error::BasisMismatch(format!(
            "coefficient matrix is {}x{}, frame is {}",
            h_a.nrows(),
            h_a.ncols(),
            frame.n
        )));
    }
    let defect = hermitian_defect(h_a);
    if defect > 1e-10 * (1.0 + crate::linalg::max_abs(h_a)) {
        return Err(Error::NotHermitian { defect });
    }
    let h_mu = &frame.m_dag * h_a * frame.m_dag.adjoint();
    let a = gauge_potential(frame);
    let h_rot = &h_mu - &a;
    Ok(GaugeData { h_mu, a, h_rot, t: frame.t })
}

/// Largest off-diagonal magnitude in row/column k (1-based) of H_rot.
pub fn commutation_residual(g: &GaugeData, k: usize) -> Result<f64> {
    let n = g.h_rot.nrows();
    if k == 0 || k > n {
        return Err(Error::IndexOutOfRange { index: k, max: n });
    }
    let r = k - 1;
    Ok((0..n)
        .filter(|&j| j != r)
        .map(|j| g.h_rot[(r, j)].norm().max(g.h_rot[(j, r)].norm()))
        .fold(0.0, f64::max))
}

fn pad(v: &CVec, n: usize) -> CVec {
    let mut out = CVec::zeros(n);
    out.rows_mut(0, v.len()).copy_from(v);
    out
}

/// First-quantized matrix W(t) of V_{N−1}(t) = V_{α1}V_{θ1}⋯V_{α(N−1)}V_{θ(N−1)}.
///
/// Each factor is the exponential of a generator acting on span{b_{k−1}(0),
/// a_{k+1}}, with conjugation V†aV = W a. Satisfies M†(t)·W(t) = M†(0).
pub fn rotation_matrix_from_params(p0: &FrameParams, pt: &FrameParams) -> CMat {
    let n = p0.n();
    let mut w = CMat::identity(n, n);
    for k in 0..n - 1 {
        let beta = if k == 0 {
            pad(&CVec::from_element(1, Complex64::new(1.0, 0.0)), n)
        } else {
            pad(&bright_vector(p0, k).expect("k in range"), n)
        };
        let d_alpha = pt.alpha[k] - p0.alpha[k];
        let d_theta = pt.theta[k] - p0.theta[k];

        let mut ka = beta.conjugate() * beta.transpose();
        ka[(k + 1, k + 1)] -= Complex64::new(1.0, 0.0);
        let ka = ka * Complex64::new(0.5 * d_alpha, 0.0);

        let mut kt = CMat::zeros(n, n);
        let ph = cis(p0.alpha[k]);
        for l in 0..n {
            kt[(k + 1, l)] += -I * d_theta * ph * beta[l];
            kt[(l, k + 1)] += I * d_theta * ph.conj() * beta[l].conj();
        }
        w = w * expm(&(ka * (-I))) * expm(&(kt * (-I)));
    }
    w
}

pub fn rotation_matrix<S: FrameSource + ?Sized>(src: &S, t0: f64, t: f64) -> Result<CMat> {
    let p0 = src.frame_params(t0, Side::Right)?;
    let pt = src.frame_params(t, Side::Left)?;
    Ok(rotation_matrix_from_params(&p0, &pt))
}

/// A frame together with the coefficient matrix that drives it.
pub trait PassageModel: FrameSource + HamiltonianProvider {}

impl<T: FrameSource + HamiltonianProvider + ?Sized> PassageModel for T {}

/// Gauge data of a model at one time.
pub fn gauge_at<P: PassageModel + ?Sized>(model: &P, t: f64, side: Side) -> Result<GaugeData> {
    let frame = transform_matrix_side(model, t, side)?;
    rotated_coefficient(&model.coefficient(t, side)?, &frame)
}

/// f_kk(t) = ∫ (H^μ_kk − A_kk) dt′ from `t0` to `t`, stage by stage.
///
/// Fails with `PassageNotActivated` if the residual of passage k exceeds
/// `residual_tol` at any quadrature node.
pub fn global_phase<P: PassageModel + ?Sized>(
    model: &P,
    k: usize,
    t0: f64,
    t: f64,
    residual_tol: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for (a, b) in model.stage_intervals() {
        let lo = a.max(t0);
        let hi = b.min(t);
        if hi <= lo {
            continue;
        }
        let mut failure: Option<Error> = None;
        let (v, _) = quad::integrate(
            |s| {
                if failure.is_some() {
                    return 0.0;
                }
                match gauge_at(model, s, Side::Left).and_then(|g| {
                    let r = commutation_residual(&g, k)?;
                    if r > residual_tol {
                        Err(Error::PassageNotActivated { k, residual: r, t: s })
                    } else {
                        Ok(g.h_rot[(k - 1, k - 1)].re)
                    }
                }) {
                    Ok(x) => x,
                    Err(e) => {
                        failure = Some(e);
                        0.0
                    }
                }
            },
            lo,
            hi,
            1e-11,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        total += v;
    }
    Ok(total)
}
