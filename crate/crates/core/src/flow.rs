//! Negative gradient flow of `f o mu`, its lift to the complex group, and the
//! Kempf-Ness monotonicity monitor.
//!
//! The energy-decreasing flow is `dz/dt = J sigma_z(df|mu) = sigma_z(i df|mu)`,
//! induced by `dg/dt g^{-1} = i df|mu(g z0)`.

use serde::{Deserialize, Serialize};

use crate::convex::ConvexInvariantFunction;
use crate::error::{Error, Result};
use crate::lie::{bracket, c, exponential, pair, ComplexLieElement, GroupElement, I};
use crate::phase::{CVector, PhasePoint, PhaseSpace};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct StepControl {
    pub initial_step: f64,
    /// Local error target per step (step doubling estimate).
    pub local_tol: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            initial_step: 1e-2,
            local_tol: 1e-9,
            min_step: 1e-12,
            max_step: 0.05,
            max_steps: 200_000,
        }
    }
}

/// Number of consecutive accepted steps below tolerance needed to stop.
const CONVERGED_STREAK: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxTime,
    StepUnderflow,
    MaxSteps,
}

#[derive(Clone, Debug)]
pub struct FlowSample {
    pub t: f64,
    pub z: PhasePoint,
    pub energy: f64,
    pub grad_norm: f64,
    pub kn_value: f64,
}

#[derive(Clone, Debug)]
pub struct FlowTrace {
    pub samples: Vec<FlowSample>,
    pub reason: Termination,
    /// Set when the function is not strictly convex.
    pub warning: Option<String>,
}

impl FlowTrace {
    pub fn last(&self) -> &FlowSample {
        self.samples.last().expect("traces hold at least the initial sample")
    }

    /// CSV with columns `t,energy,grad_norm,kn_value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,energy,grad_norm,kn_value\n");
        for s in &self.samples {
            out.push_str(&format!("{:.12e},{:.12e},{:.12e},{:.12e}\n", s.t, s.energy, s.grad_norm, s.kn_value));
        }
        out
    }
}

/// Energy and metric norm of `sigma_z(df|mu(z))` at `z`.
pub fn energy_and_gradient(
    space: &PhaseSpace,
    f: &dyn ConvexInvariantFunction,
    z: &PhasePoint,
) -> Result<(f64, f64)> {
    let mu = space.moment(z);
    let df = f.gradient(&mu)?;
    Ok((f.value(&mu)?, space.metric_norm(&space.sigma(z, &df))))
}

fn warning_for(f: &dyn ConvexInvariantFunction) -> Option<String> {
    (!f.is_strict()).then(|| format!("{} is not strictly convex", f.name()))
}

/// Generic adaptive driver with RK-type step doubling.
struct Driver<'a> {
    ctrl: StepControl,
    tol: f64,
    t_max: f64,
    stops: &'a [f64],
}

trait FlowState: Sized + Clone {
    fn step(&self, h: f64) -> Result<Self>;
    fn error(&self, other: &Self) -> f64;
    fn finish_step(self) -> Result<Self> {
        Ok(self)
    }
}

impl Driver<'_> {
    /// Runs until convergence, `t_max`, or underflow; `observe(t, state)` returns the grad norm.
    fn run<S: FlowState>(
        &self,
        init: S,
        mut observe: impl FnMut(f64, &S) -> Result<f64>,
    ) -> Result<(Termination, Vec<(f64, S)>)> {
        let mut t = 0.0;
        let mut state = init;
        let mut stop_hits = Vec::new();
        let g0 = observe(t, &state)?;
        if self.tol >= 0.0 && g0 <= self.tol && self.stops.is_empty() {
            return Ok((Termination::Converged, stop_hits));
        }
        let mut h = self.ctrl.initial_step.min(self.ctrl.max_step);
        let mut streak = 0;
        let mut next_stop = 0;
        while next_stop < self.stops.len() && self.stops[next_stop] <= 0.0 {
            stop_hits.push((0.0, state.clone()));
            next_stop += 1;
        }
        for _ in 0..self.ctrl.max_steps {
            if t >= self.t_max - 1e-15 {
                return Ok((Termination::MaxTime, stop_hits));
            }
            let mut target = self.t_max;
            if next_stop < self.stops.len() {
                target = target.min(self.stops[next_stop]);
            }
            let clipped = h >= target - t;
            let hs = if clipped { target - t } else { h };
            let full = state.step(hs)?;
            let half = state.step(0.5 * hs)?.finish_step()?.step(0.5 * hs)?;
            let err = full.error(&half);
            if !err.is_finite() || err > self.ctrl.local_tol {
                let factor = if err.is_finite() {
                    (0.9 * (self.ctrl.local_tol / err).powf(0.2)).clamp(0.1, 0.5)
                } else {
                    0.25
                };
                h = hs * factor;
                if h < self.ctrl.min_step {
                    return Ok((Termination::StepUnderflow, stop_hits));
                }
                continue;
            }
            state = half.finish_step()?;
            t = if clipped { target } else { t + hs };
            while next_stop < self.stops.len() && self.stops[next_stop] <= t + 1e-14 {
                stop_hits.push((t, state.clone()));
                next_stop += 1;
            }
            let gn = observe(t, &state)?;
            if self.tol >= 0.0 && gn <= self.tol {
                streak += 1;
                if streak >= CONVERGED_STREAK && next_stop >= self.stops.len() {
                    return Ok((Termination::Converged, stop_hits));
                }
            } else {
                streak = 0;
            }
            let grow = if err > 0.0 { (0.9 * (self.ctrl.local_tol / err).powf(0.2)).clamp(0.2, 2.0) } else { 2.0 };
            if !clipped || grow < 1.0 {
                h = (hs * grow).min(self.ctrl.max_step);
            }
        }
        Ok((Termination::MaxSteps, stop_hits))
    }
}

/// Ambient state for the projected flow: unnormalized representatives plus the
/// integrated Kempf-Ness value.
#[derive(Clone)]
struct PointState<'a> {
    space: &'a PhaseSpace,
    f: &'a dyn ConvexInvariantFunction,
    w: Vec<CVector>,
    kn: f64,
}

impl PointState<'_> {
    fn point(&self) -> Result<PhasePoint> {
        self.space.point(self.w.clone())
    }

    /// `V(w)_i = xi w_i - (what_i^* xi what_i) w_i` with `xi = i df|mu(what)`, and the kn rate.
    fn field(&self) -> Result<(Vec<CVector>, f64)> {
        let z = self.point()?;
        let mu = self.space.moment(&z);
        let xi = self.f.gradient(&mu)?.to_complex().scale_complex(I);
        let sigma = self.space.infinitesimal_action(&z, &xi);
        let rate = -pair(&mu, &self.f.gradient(&mu)?)?;
        let v = sigma
            .components()
            .iter()
            .zip(&self.w)
            .map(|(s, w)| s * c(w.norm(), 0.0))
            .collect();
        Ok((v, rate))
    }

    fn shifted(&self, dir: &(Vec<CVector>, f64), h: f64) -> Self {
        let w = self.w.iter().zip(&dir.0).map(|(a, b)| a + b * c(h, 0.0)).collect();
        PointState { space: self.space, f: self.f, w, kn: self.kn + h * dir.1 }
    }
}

impl FlowState for PointState<'_> {
    fn step(&self, h: f64) -> Result<Self> {
        let k1 = self.field()?;
        let k2 = self.shifted(&k1, 0.5 * h).field()?;
        let k3 = self.shifted(&k2, 0.5 * h).field()?;
        let k4 = self.shifted(&k3, h).field()?;
        let w = (0..self.w.len())
            .map(|i| &self.w[i] + (&k1.0[i] + &k2.0[i] * c(2.0, 0.0) + &k3.0[i] * c(2.0, 0.0) + &k4.0[i]) * c(h / 6.0, 0.0))
            .collect();
        let kn = self.kn + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        Ok(PointState { space: self.space, f: self.f, w, kn })
    }

    fn error(&self, other: &Self) -> f64 {
        let zw = self
            .w
            .iter()
            .zip(&other.w)
            .map(|(a, b)| (a / c(a.norm(), 0.0) - b / c(b.norm(), 0.0)).norm())
            .fold(0.0, f64::max);
        zw.max((self.kn - other.kn).abs())
    }

    fn finish_step(self) -> Result<Self> {
        let z = self.point()?;
        Ok(PointState { w: z.components().to_vec(), ..self })
    }
}

fn flow_sample(
    space: &PhaseSpace,
    f: &dyn ConvexInvariantFunction,
    t: f64,
    z: PhasePoint,
    kn: f64,
) -> Result<FlowSample> {
    let (energy, grad_norm) = energy_and_gradient(space, f, &z)?;
    Ok(FlowSample { t, z, energy, grad_norm, kn_value: kn })
}

/// Adaptive RK4 integration of the projected flow on `Z`.
pub fn gradient_flow(
    space: &PhaseSpace,
    f: &dyn ConvexInvariantFunction,
    z0: &PhasePoint,
    ctrl: &StepControl,
    tol: f64,
    t_max: f64,
) -> Result<FlowTrace> {
    space.check_point(z0)?;
    let init = PointState { space, f, w: z0.components().to_vec(), kn: 0.0 };
    let mut samples = Vec::new();
    let driver = Driver { ctrl: *ctrl, tol, t_max, stops: &[] };
    let (reason, _) = driver.run(init, |t, s| {
        let sample = flow_sample(space, f, t, s.point()?, s.kn)?;
        let g = sample.grad_norm;
        samples.push(sample);
        Ok(g)
    })?;
    Ok(FlowTrace { samples, reason, warning: warning_for(f) })
}

/// Points of the projected flow at the requested (sorted) times.
pub fn flow_points_at(
    space: &PhaseSpace,
    f: &dyn ConvexInvariantFunction,
    z0: &PhasePoint,
    ctrl: &StepControl,
    times: &[f64],
) -> Result<Vec<(f64, PhasePoint)>> {
    space.check_point(z0)?;
    let init = PointState { space, f, w: z0.components().to_vec(), kn: 0.0 };
    let t_max = times.iter().cloned().fold(0.0, f64::max);
    let driver = Driver { ctrl: *ctrl, tol: -1.0, t_max, stops: times };
    let (_, hits) = driver.run(init, |_, _| Ok(1.0))?;
    hits.into_iter().map(|(t, s)| Ok((t, s.point()?))).collect()
}

#[derive(Clone)]
struct GroupState<'a> {
    space: &'a PhaseSpace,
    f: &'a dyn ConvexInvariantFunction,
    z0: &'a PhasePoint,
    g: GroupElement,
}

impl GroupState<'_> {
    fn generator(&self, g: &GroupElement) -> Result<ComplexLieElement> {
        let z = self.space.act(g, self.z0)?;
        Ok(self.f.gradient(&self.space.moment(&z))?.to_complex().scale_complex(I))
    }

    fn with(&self, g: GroupElement) -> Self {
        GroupState { g, ..self.clone() }
    }
}

/// `u - [w,u]/2 + [w,[w,u]]/12`, truncated inverse of the exponential's derivative.
fn dexpinv(w: &ComplexLieElement, u: &ComplexLieElement) -> Result<ComplexLieElement> {
    let b1 = bracket(w, u)?;
    let b2 = bracket(w, &b1)?;
    u.axpy(-0.5, &b1)?.axpy(1.0 / 12.0, &b2)
}

impl FlowState for GroupState<'_> {
    /// One RKMK4 step `g <- exp(Omega) g`.
    fn step(&self, h: f64) -> Result<Self> {
        let at = |omega: &ComplexLieElement| -> Result<ComplexLieElement> {
            self.generator(&exponential(omega).compose(&self.g)?)
        };
        let k1 = self.generator(&self.g)?.scale(h);
        let w2 = k1.scale(0.5);
        let k2 = dexpinv(&w2, &at(&w2)?)?.scale(h);
        let w3 = k2.scale(0.5);
        let k3 = dexpinv(&w3, &at(&w3)?)?.scale(h);
        let k4 = dexpinv(&k3, &at(&k3)?)?.scale(h);
        let omega = k1.axpy(2.0, &k2)?.axpy(2.0, &k3)?.add(&k4)?.scale(1.0 / 6.0);
        Ok(self.with(exponential(&omega).compose(&self.g)?))
    }

    fn error(&self, other: &Self) -> f64 {
        let a = self.space.act(&self.g, self.z0);
        let b = self.space.act(&other.g, self.z0);
        let ka = self.space.kempf_ness_value(&self.g, self.z0);
        let kb = self.space.kempf_ness_value(&other.g, self.z0);
        match (a, b, ka, kb) {
            (Ok(a), Ok(b), Ok(ka), Ok(kb)) => a.distance(&b).max((ka - kb).abs()),
            _ => f64::INFINITY,
        }
    }
}

/// Integrates `dg/dt = (i df|mu(g z0)) g` with RKMK4 exponential steps.
/// Returns the induced trace (with `kn` computed from `g`) and the group path.
pub fn group_flow(
    space: &PhaseSpace,
    f: &dyn ConvexInvariantFunction,
    z0: &PhasePoint,
    ctrl: &StepControl,
    tol: f64,
    t_max: f64,
) -> Result<(FlowTrace, Vec<GroupElement>)> {
    space.check_point(z0)?;
    let init = GroupState { space, f, z0, g: GroupElement::identity(space.algebra()) };
    let mut samples = Vec::new();
    let mut path = Vec::new();
    let driver = Driver { ctrl: *ctrl, tol, t_max, stops: &[] };
    let (reason, _) = driver.run(init, |t, s| {
        let z = space.act(&s.g, z0)?;
        let kn = space.kempf_ness_value(&s.g, z0)?;
        let sample = flow_sample(space, f, t, z, kn)?;
        let g = sample.grad_norm;
        samples.push(sample);
        path.push(s.g.clone());
        Ok(g)
    })?;
    Ok((FlowTrace { samples, reason, warning: warning_for(f) }, path))
}

/// Derivative at `ts[i]` of the Lagrange interpolant through up to five neighbours.
pub fn stencil_derivative(ts: &[f64], ys: &[f64], i: usize) -> f64 {
    let n = ts.len();
    let width = n.min(5);
    let lo = i.saturating_sub(width / 2).min(n - width);
    let idx: Vec<usize> = (lo..lo + width).collect();
    let x = ts[i];
    let mut d = 0.0;
    for &j in &idx {
        // L_j'(x) = sum_{m != j} 1/(t_j - t_m) prod_{l != j,m} (x - t_l)/(t_j - t_l)
        let mut lj = 0.0;
        for &m in &idx {
            if m == j {
                continue;
            }
            let mut term = 1.0 / (ts[j] - ts[m]);
            for &l in &idx {
                if l != j && l != m {
                    term *= (x - ts[l]) / (ts[j] - ts[l]);
                }
            }
            lj += term;
        }
        d += lj * ys[j];
    }
    d
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KempfNessReport {
    pub samples: usize,
    /// `f(0)`, subtracted from `f` in the bound.
    pub shift: f64,
    pub max_equality_defect: f64,
    /// Largest value of `d/dt kn + (f - f(0))(mu)`; the bound says this is `<= 0`.
    pub max_bound_excess: f64,
    pub equality_ok: bool,
    pub bound_ok: bool,
}

pub const KN_EQUALITY_TOL: f64 = 1e-4;
pub const KN_BOUND_SLACK: f64 = 1e-6;

/// Checks `d/dt kn = -<mu, df|mu>` and `d/dt kn <= -(f(mu) - f(0))` along a trace.
pub fn kempf_ness_monitor(
    space: &PhaseSpace,
    trace: &FlowTrace,
    f: &dyn ConvexInvariantFunction,
) -> Result<KempfNessReport> {
    let n = trace.samples.len();
    if n < 3 {
        return Err(Error::TraceTooShort(n));
    }
    let shift = f.value(&crate::lie::DualElement::zero(space.algebra()))?;
    let ts: Vec<f64> = trace.samples.iter().map(|s| s.t).collect();
    let ks: Vec<f64> = trace.samples.iter().map(|s| s.kn_value).collect();
    let (mut eq, mut excess) = (0.0f64, f64::NEG_INFINITY);
    for (i, s) in trace.samples.iter().enumerate() {
        let rate = stencil_derivative(&ts, &ks, i);
        let mu = space.moment(&s.z);
        let exact = -pair(&mu, &f.gradient(&mu)?)?;
        eq = eq.max((rate - exact).abs());
        excess = excess.max(rate + f.value(&mu)? - shift);
    }
    Ok(KempfNessReport {
        samples: n,
        shift,
        max_equality_defect: eq,
        max_bound_excess: excess,
        equality_ok: eq <= KN_EQUALITY_TOL,
        bound_ok: excess <= KN_BOUND_SLACK,
    })
}

/// Largest energy increase between consecutive samples, relative to `1 + |E|`.
pub fn max_energy_increase(trace: &FlowTrace) -> f64 {
    trace
        .samples
        .windows(2)
        .map(|w| (w[1].energy - w[0].energy) / (1.0 + w[0].energy.abs()))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Relative defect of `dE/dt = -grad_norm^2` at interior samples where
/// `grad_norm^2` exceeds `floor`.
pub fn dissipation_defect(trace: &FlowTrace, floor: f64) -> f64 {
    let ts: Vec<f64> = trace.samples.iter().map(|s| s.t).collect();
    let es: Vec<f64> = trace.samples.iter().map(|s| s.energy).collect();
    let mut worst: f64 = 0.0;
    for (i, s) in trace.samples.iter().enumerate() {
        let g2 = s.grad_norm * s.grad_norm;
        if ts.len() < 5 || g2 < floor {
            continue;
        }
        let de = stencil_derivative(&ts, &es, i);
        worst = worst.max((de + g2).abs() / g2);
    }
    worst
}
