//! Piecewise-analytic parameter curves and multi-parameter schedules.
//!
//! Times are in units of the stage period τ. Every curve carries exact first
//! and second derivatives, because the synthesis formulas need θ̈ and f̈.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack used when matching a time against segment boundaries.
const EDGE_EPS: f64 = 1e-12;

/// Which segment owns a boundary time.
///
/// `Left` resolves a boundary to the segment that just completed (the
/// default: a boundary value belongs to the finished stage). `Right` resolves
/// it to the segment that starts there, i.e. the `t + 0⁺` limit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Side {
    #[default]
    Left,
    Right,
}

/// Value with first and second time derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Jet {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet {
    pub fn new(v: f64, d1: f64, d2: f64) -> Self {
        Self { v, d1, d2 }
    }

    pub fn scale(self, c: f64) -> Self {
        Self::new(c * self.v, c * self.d1, c * self.d2)
    }
}

/// Analytic form of one segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum CurveForm {
    Constant {
        c0: f64,
    },
    /// `c0 + c1·t`
    Linear {
        c0: f64,
        c1: f64,
    },
    /// `c0 + c1·s/(1 + c3·s²)` with `s = sin(c2·(t − t0))`.
    Sinusoid {
        c0: f64,
        c1: f64,
        c2: f64,
        c3: f64,
        #[serde(default)]
        t0: f64,
    },
    /// `c·reference(t) + offset`
    Scaled {
        c: f64,
        #[serde(default)]
        offset: f64,
        reference: Box<Curve>,
    },
}

impl CurveForm {
    fn eval(&self, t: f64, side: Side) -> Result<Jet> {
        Ok(match self {
            CurveForm::Constant { c0 } => Jet::new(*c0, 0.0, 0.0),
            CurveForm::Linear { c0, c1 } => Jet::new(c0 + c1 * t, *c1, 0.0),
            CurveForm::Sinusoid { c0, c1, c2, c3, t0 } => {
                let x = c2 * (t - t0);
                let (s, co) = x.sin_cos();
                let den = 1.0 + c3 * s * s;
                let g = s / den;
                let gs = (1.0 - c3 * s * s) / (den * den);
                let gss = 2.0 * c3 * s * (c3 * s * s - 3.0) / (den * den * den);
                let d1 = gs * c2 * co;
                let d2 = gss * c2 * c2 * co * co - gs * c2 * c2 * s;
                Jet::new(c0 + c1 * g, c1 * d1, c1 * d2)
            }
            CurveForm::Scaled { c, offset, reference } => {
                let r = reference.eval_side(t, side)?.scale(*c);
                Jet::new(r.v + offset, r.d1, r.d2)
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    #[serde(flatten)]
    pub form: CurveForm,
}

/// Ordered segments tiling `[start, end]` without gaps or overlaps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Segment>", into = "Vec<Segment>")]
pub struct Curve {
    segments: Vec<Segment>,
}

impl TryFrom<Vec<Segment>> for Curve {
    type Error = Error;
    fn try_from(segments: Vec<Segment>) -> Result<Self> {
        Curve::new(segments)
    }
}

impl JsonSchema for Curve {
    fn schema_name() -> String {
        "Curve".into()
    }

    fn json_schema(gen: &mut schemars::gen::SchemaGenerator) -> schemars::schema::Schema {
        <Vec<Segment>>::json_schema(gen)
    }
}

impl From<Curve> for Vec<Segment> {
    fn from(c: Curve) -> Self {
        c.segments
    }
}

impl Curve {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidSchedule("curve has no segments".into()));
        }
        for s in &segments {
            if !(s.end > s.start) || !s.start.is_finite() || !s.end.is_finite() {
                return Err(Error::InvalidSchedule(format!(
                    "segment [{}, {}] is empty or not finite",
                    s.start, s.end
                )));
            }
        }
        for w in segments.windows(2) {
            if w[0].end != w[1].start {
                let kind = if w[1].start > w[0].end { "gap" } else { "overlap" };
                return Err(Error::InvalidSchedule(format!(
                    "{kind} between segments ending at {} and starting at {}",
                    w[0].end, w[1].start
                )));
            }
        }
        Ok(Self { segments })
    }

    /// Single-segment curve.
    pub fn single(start: f64, end: f64, form: CurveForm) -> Result<Self> {
        Self::new(vec![Segment { start, end, form }])
    }

    pub fn constant(start: f64, end: f64, c0: f64) -> Result<Self> {
        Self::single(start, end, CurveForm::Constant { c0 })
    }

    pub fn linear(start: f64, end: f64, c0: f64, c1: f64) -> Result<Self> {
        Self::single(start, end, CurveForm::Linear { c0, c1 })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.segments[0].start, self.segments[self.segments.len() - 1].end)
    }

    /// Interior segment boundaries.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.segments[1..].iter().map(|s| s.start).collect()
    }

    fn locate(&self, t: f64, side: Side) -> Result<&Segment> {
        let (a, b) = self.domain();
        let slack = EDGE_EPS * (1.0 + (b - a).abs());
        if !(t >= a - slack && t <= b + slack) {
            return Err(Error::Domain { t, start: a, end: b });
        }
        let idx = match side {
            Side::Left => self
                .segments
                .iter()
                .position(|s| t <= s.end + slack)
                .unwrap_or(self.segments.len() - 1),
            Side::Right => self
                .segments
                .iter()
                .position(|s| t < s.end - slack)
                .unwrap_or(self.segments.len() - 1),
        };
        Ok(&self.segments[idx])
    }

    /// Value and one-sided derivatives, with boundaries owned by the
    /// completed segment.
    pub fn eval(&self, t: f64) -> Result<Jet> {
        self.eval_side(t, Side::Left)
    }

    pub fn eval_side(&self, t: f64, side: Side) -> Result<Jet> {
        self.locate(t, side)?.form.eval(t, side)
    }
}

/// Free-function form of [`Curve::eval`].
pub fn eval_curve(curve: &Curve, t: f64) -> Result<(f64, f64, f64)> {
    let j = curve.eval(t)?;
    Ok((j.v, j.d1, j.d2))
}

/// Named parameter curves of an N-node ancillary frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub n: usize,
    pub theta: Vec<Curve>,
    pub alpha: Vec<Curve>,
    /// Global-phase generators: `[f]` for two modes, `[f1, f]` for three.
    #[serde(default)]
    pub phase_f: Vec<Curve>,
    /// Interior stage boundaries, strictly increasing.
    pub boundaries: Vec<f64>,
    pub domain: (f64, f64),
}

/// Curve descriptors consumed by [`make_schedule`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ScheduleSpec {
    pub theta: Vec<Curve>,
    #[serde(default)]
    pub alpha: Vec<Curve>,
    #[serde(default)]
    pub phase_f: Vec<Curve>,
}

pub fn make_schedule(n: usize, spec: ScheduleSpec, boundaries: Vec<f64>) -> Result<Schedule> {
    if n < 2 {
        return Err(Error::InvalidSchedule(format!("need at least 2 nodes, got {n}")));
    }
    if spec.theta.len() != n - 1 {
        return Err(Error::InvalidSchedule(format!(
            "N = {n} needs {} theta curves, got {}",
            n - 1,
            spec.theta.len()
        )));
    }
    let domain = spec.theta[0].domain();
    let alpha = if spec.alpha.is_empty() {
        (0..n - 1)
            .map(|_| Curve::constant(domain.0, domain.1, 0.0))
            .collect::<Result<Vec<_>>>()?
    } else {
        spec.alpha
    };
    if alpha.len() != n - 1 {
        return Err(Error::InvalidSchedule(format!(
            "N = {n} needs {} alpha curves, got {}",
            n - 1,
            alpha.len()
        )));
    }
    for c in spec.theta.iter().chain(&alpha).chain(&spec.phase_f) {
        if c.domain() != domain {
            return Err(Error::InvalidSchedule(format!(
                "curve domain {:?} differs from {:?}",
                c.domain(),
                domain
            )));
        }
    }
    for w in boundaries.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidSchedule("stage boundaries must increase".into()));
        }
    }
    if boundaries.iter().any(|&b| !(b > domain.0 && b < domain.1)) {
        return Err(Error::InvalidSchedule("stage boundary outside domain".into()));
    }
    Ok(Schedule {
        n,
        theta: spec.theta,
        alpha,
        phase_f: spec.phase_f,
        boundaries,
        domain,
    })
}

impl Schedule {
    /// Stage intervals `[t_a, t_b]` in order.
    pub fn stages(&self) -> Vec<(f64, f64)> {
        let mut edges = vec![self.domain.0];
        edges.extend(&self.boundaries);
        edges.push(self.domain.1);
        edges.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Index of the stage owning `t` (boundaries resolved by `side`).
    pub fn stage_index(&self, t: f64, side: Side) -> usize {
        let slack = EDGE_EPS * (1.0 + self.domain.1 - self.domain.0);
        self.boundaries
            .iter()
            .filter(|&&b| match side {
                Side::Left => t > b + slack,
                Side::Right => t >= b - slack,
            })
            .count()
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        let (a, b) = self.domain;
        let slack = EDGE_EPS * (1.0 + b - a);
        if t >= a - slack && t <= b + slack {
            Ok(())
        } else {
            Err(Error::Domain { t, start: a, end: b })
        }
    }
}
