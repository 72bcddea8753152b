//! Coupled planar/parabolic systems and the experiments built on them.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::cutoffs::{
    build_cutoff_family, intervals_from_lengths, midpoints, mollifier_bump, planar_rhs, BoundLaw, BumpFunction,
    CutoffFamily,
};
use crate::fit::{fit_line, least_squares};
use crate::floquet::{
    analytic_beta, ceil_sqrt, equalizers, poincare_predicted, ratio_bounds_check, PeriodicOperator, WeightedShift,
};
use crate::geometry::{PointCloud, PointTag, SequenceLaw};
use crate::integrate::{integrate_to, LawsonOptions, LawsonState, LawsonStats, LawsonSystem};
use crate::logreal::{log_sum_exp, LogReal};
use crate::modevec::LogModeVector;
use crate::quad::{adaptive_simpson, GaussLegendre};
use crate::spectral::{spectral_gap, GapValue, Spectrum};
use crate::{Error, Result};

#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Parameters shared by the Floquet-driven experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub spectrum: Spectrum,
    /// Lipschitz budget `L`.
    pub l_budget: f64,
    /// Half period `T` of the drive.
    pub t_half: f64,
    pub amplitude: f64,
    pub plateau_fraction: f64,
    /// Modes carried by the integrator.
    pub n_trunc: usize,
    /// Kick levels `n0..=n_kick_max`.
    pub n0: usize,
    pub n_kick_max: usize,
    /// Kick window width before each period boundary.
    pub kappa: f64,
    /// Labels live in `[1 - kappa_seg, 1]`.
    pub kappa_seg: f64,
    pub periods: usize,
    pub rtol: f64,
    pub atol: f64,
    /// Largest admitted `remainder / eps_n` in the kick residual check.
    pub residual_margin: f64,
}

impl Scenario {
    /// Linear spectrum `lambda_n = n`, `T = 4`, 16 modes, 6 periods.
    pub fn pair_default() -> Result<Self> {
        Ok(Scenario {
            spectrum: crate::spectral::make_spectrum(crate::spectral::SpectrumFamily::Linear { c: 1.0 }, 16)?,
            l_budget: 2.5,
            t_half: 4.0,
            amplitude: 1.0,
            plateau_fraction: 0.9,
            n_trunc: 16,
            n0: 4,
            n_kick_max: 6,
            kappa: 0.03,
            kappa_seg: 0.5,
            periods: 6,
            rtol: 1e-10,
            atol: 1e-12,
            residual_margin: 1e-3,
        })
    }

    /// Checks `L > max(L0 / 2, lambda_2)` and basic ranges.
    pub fn validate(&self) -> Result<()> {
        if self.spectrum.n_max() < 3 || self.n_trunc > self.spectrum.n_max() || self.n_trunc < 3 {
            return Err(Error::TruncationTooSmall { needed: self.n_trunc.max(3), available: self.spectrum.n_max() });
        }
        let l0 = match spectral_gap(&self.spectrum) {
            GapValue::Finite(g) => g,
            GapValue::Unbounded => f64::INFINITY,
        };
        let need = (0.5 * l0).max(self.spectrum.lambda(2));
        if !(self.l_budget > need) {
            return Err(Error::InvalidParameter(format!(
                "Lipschitz budget {} must exceed max(L0/2, lambda_2) = {need}",
                self.l_budget
            )));
        }
        if !(self.t_half > 0.0) || !(self.kappa > 0.0) || !(self.kappa_seg > 0.0 && self.kappa_seg < 1.0) {
            return Err(Error::InvalidParameter("T, kappa and kappa_seg must be positive, kappa_seg < 1".into()));
        }
        if self.n0 == 0 || self.n_kick_max < self.n0 {
            return Err(Error::InvalidParameter("kick range needs 1 <= n0 <= n_max".into()));
        }
        Ok(())
    }

    pub fn operator(&self) -> Result<PeriodicOperator> {
        PeriodicOperator::new(&self.spectrum.prefix(self.n_trunc)?, self.t_half, self.amplitude, self.plateau_fraction)
    }

    pub fn options(&self) -> LawsonOptions {
        LawsonOptions { rtol: self.rtol, atol: self.atol, ..Default::default() }
    }
}

/// `(x, y, w)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoupledState {
    pub x: f64,
    pub y: f64,
    pub w: LogModeVector,
}

impl CoupledState {
    pub fn new(x: f64, y: f64, w: LogModeVector) -> Result<Self> {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::InvalidParameter("planar part must be finite".into()));
        }
        Ok(CoupledState { x, y, w })
    }

    /// `w_1 = (w, e_1)`.
    pub fn w1(&self) -> LogReal {
        self.w.get(1)
    }

    fn to_lawson(&self, t: f64, n_modes: usize) -> Result<LawsonState> {
        if self.w.max_mode() > n_modes {
            return Err(Error::TruncationTooSmall { needed: self.w.max_mode(), available: n_modes });
        }
        let mut entries = alloc::vec![(0i8, 0.0); n_modes];
        for &(n, x) in self.w.entries() {
            entries[n - 1] = (x.sign, x.logmag);
        }
        Ok(LawsonState::from_log(t, alloc::vec![self.x, self.y], &entries))
    }

    fn from_lawson(st: &LawsonState) -> Self {
        let w = LogModeVector::from_entries(st.v.iter().zip(&st.ln_scale).enumerate().filter(|(_, (v, _))| **v != 0.0).map(
            |(i, (&v, &s))| (i + 1, LogReal::new(if v > 0.0 { 1 } else { -1 }, v.abs().ln() + s)),
        ));
        CoupledState { x: st.planar[0], y: st.planar[1], w }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum EventKind {
    XZeroCrossing,
    PeriodBoundary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrajectoryEvent {
    pub t: f64,
    pub kind: EventKind,
}

/// Samples of one trajectory.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<CoupledState>,
    /// `ln ||w(t)||_H`, `-inf` for `w = 0`.
    pub ln_norms: Vec<f64>,
    pub events: Vec<TrajectoryEvent>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

/// Integrates from `(t0, initial)` through the strictly increasing `times`.
/// Period boundaries are marked when `period` is given.
pub fn integrate<S: LawsonSystem + ?Sized>(
    sys: &S,
    initial: &CoupledState,
    t0: f64,
    times: &[f64],
    opts: &LawsonOptions,
    period: Option<f64>,
) -> Result<TrajectoryRecord> {
    if sys.planar_dim() != 2 {
        return Err(Error::InvalidParameter("coupled systems carry a 2D planar part".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) || times.first().is_some_and(|&t| t < t0) {
        return Err(Error::InvalidParameter("sample times must increase from t0".into()));
    }
    let mut st = initial.to_lawson(t0, sys.rates().len())?;
    let mut stats = LawsonStats::default();
    let mut rec = TrajectoryRecord {
        times: Vec::with_capacity(times.len()),
        states: Vec::with_capacity(times.len()),
        ln_norms: Vec::with_capacity(times.len()),
        events: Vec::new(),
        accepted_steps: 0,
        rejected_steps: 0,
    };
    for &t in times {
        integrate_to(sys, &mut st, t, opts, &mut stats)?;
        let cs = CoupledState::from_lawson(&st);
        if let (Some(prev), Some(&tp)) = (rec.states.last(), rec.times.last()) {
            let prev: &CoupledState = prev;
            if prev.x != 0.0 && cs.x != 0.0 && (prev.x < 0.0) != (cs.x < 0.0) {
                let tc = tp + (t - tp) * prev.x / (prev.x - cs.x);
                rec.events.push(TrajectoryEvent { t: tc, kind: EventKind::XZeroCrossing });
            }
        }
        if let Some(p) = period {
            let k = (t / p).round();
            if (t - k * p).abs() <= 1e-9 * p.max(1.0) {
                rec.events.push(TrajectoryEvent { t, kind: EventKind::PeriodBoundary });
            }
        }
        rec.ln_norms.push(cs.w.ln_norm());
        rec.times.push(t);
        rec.states.push(cs);
    }
    rec.accepted_steps = stats.accepted;
    rec.rejected_steps = stats.rejected;
    Ok(rec)
}

/// `w' = -A w`, planar part frozen.
#[derive(Debug, Clone)]
pub struct DecaySystem {
    pub rates: Vec<f64>,
}

impl LawsonSystem for DecaySystem {
    fn planar_dim(&self) -> usize {
        2
    }
    fn rates(&self) -> &[f64] {
        &self.rates
    }
    fn rhs(&self, _t: f64, _p: &[f64], _v: &[f64], _s: &[f64], dp: &mut [f64], dv: &mut [f64]) {
        dp.iter_mut().for_each(|d| *d = 0.0);
        dv.iter_mut().for_each(|d| *d = 0.0);
    }
}

/// The cone system with the angular forcing:
/// `x' = -beta x (R^2 - 1)`, `y' = -beta y (R^2 - 1)`,
/// `w' = -A w + beta sum_n B_n theta(R) psi_n(phi) e_n`.
#[derive(Debug, Clone)]
pub struct Section4System {
    rates: Vec<f64>,
    pub beta: f64,
    /// Forced mode and `ln B_n` of each angular interval.
    pub modes: Vec<usize>,
    pub ln_b: Vec<f64>,
    pub family: CutoffFamily,
    pub theta: BumpFunction,
}

impl Section4System {
    /// `phi_n`, the anchor of interval `i`.
    pub fn anchor(&self, i: usize) -> f64 {
        self.family.anchors[i]
    }

    /// Full right-hand side at a dense state (for residual checks).
    pub fn residual(&self, x: f64, y: f64, w: &[f64]) -> f64 {
        let (dx, dy) = planar_rhs(x, y);
        let mut r2 = (self.beta * dx).powi(2) + (self.beta * dy).powi(2);
        let mut f = alloc::vec![0.0; w.len()];
        self.forcing(x, y, |m, val| f[m - 1] += val);
        for (i, wi) in w.iter().enumerate() {
            let d = -self.rates[i] * wi + f[i];
            r2 += d * d;
        }
        r2.sqrt()
    }

    fn forcing<F: FnMut(usize, f64)>(&self, x: f64, y: f64, mut put: F) {
        let r = (x * x + y * y).sqrt();
        let th = self.theta.value(r);
        if th == 0.0 {
            return;
        }
        let mut phi = y.atan2(x);
        if phi < 0.0 {
            phi += 2.0 * PI;
        }
        if let Some(i) = self.family.locate(phi) {
            let psi = self.family.member_value(i, phi);
            if psi != 0.0 {
                put(self.modes[i], self.beta * self.ln_b[i].exp() * th * psi);
            }
        }
    }
}

impl LawsonSystem for Section4System {
    fn planar_dim(&self) -> usize {
        2
    }
    fn rates(&self) -> &[f64] {
        &self.rates
    }
    fn rhs(&self, _t: f64, p: &[f64], _v: &[f64], s: &[f64], dp: &mut [f64], dv: &mut [f64]) {
        let (dx, dy) = planar_rhs(p[0], p[1]);
        dp[0] = self.beta * dx;
        dp[1] = self.beta * dy;
        dv.iter_mut().for_each(|d| *d = 0.0);
        self.forcing(p[0], p[1], |m, val| dv[m - 1] += val * (-s[m - 1]).exp());
    }
}

/// `Phi(t)` with optional kicks, coupled to a planar part that follows the
/// drive: `x' = x_d'(t)`, `y' = x_d'(t + T/2)`.
#[derive(Debug, Clone)]
pub struct FloquetSystem {
    pub op: PeriodicOperator,
    pub kicks: Option<KickOperator>,
}

impl FloquetSystem {
    /// Drive phase of the planar state at `t`: `(x_d(t), x_d(t + T/2))`.
    pub fn planar_at(&self, t: f64) -> (f64, f64) {
        let d = &self.op.drive;
        (d.value(t), d.value(t + 0.5 * self.op.t_half))
    }
}

impl LawsonSystem for FloquetSystem {
    fn planar_dim(&self) -> usize {
        2
    }
    fn rates(&self) -> &[f64] {
        LawsonSystem::rates(&self.op)
    }
    fn rhs(&self, t: f64, _p: &[f64], v: &[f64], s: &[f64], dp: &mut [f64], dv: &mut [f64]) {
        let d = &self.op.drive;
        dp[0] = d.derivative(t);
        dp[1] = d.derivative(t + 0.5 * self.op.t_half);
        self.op.scaled_apply_at(d.value(t), v, s, dv);
        if let Some(k) = &self.kicks {
            let w1 = if v[0] == 0.0 { 0.0 } else { v[0] * s[0].exp() };
            k.add_forcing(t, w1, |m, ln_c, c| dv[m - 1] += c * (ln_c - s[m - 1]).exp());
        }
    }
}

/// Planar part of [`FloquetSystem`] alone.
struct DriveSystem<'a> {
    op: &'a PeriodicOperator,
}

impl LawsonSystem for DriveSystem<'_> {
    fn planar_dim(&self) -> usize {
        2
    }
    fn rates(&self) -> &[f64] {
        &[]
    }
    fn rhs(&self, t: f64, _p: &[f64], _v: &[f64], _s: &[f64], dp: &mut [f64], _dv: &mut [f64]) {
        let d = &self.op.drive;
        dp[0] = d.derivative(t);
        dp[1] = d.derivative(t + 0.5 * self.op.t_half);
    }
}

/// Advances the mode part of [`FloquetSystem`] from `t_from` to `t_to`. The
/// linear flow is exact; kick windows, where it is diagonal, are stepped.
fn advance_modes(sys: &FloquetSystem, w: &mut [LogReal], t_from: f64, t_to: f64, opts: &LawsonOptions, stats: &mut LawsonStats) -> Result<()> {
    let op = &sys.op;
    let Some(kick) = &sys.kicks else { return op.propagate(w, t_from, t_to) };
    let p = op.period();
    let mut a = t_from;
    while a < t_to {
        let end = (a / p).floor() * p + p;
        let open = end - kick.kappa;
        if a < open {
            let b = open.min(t_to);
            op.propagate(w, a, b)?;
            a = b;
            continue;
        }
        let b = end.min(t_to);
        if w[0].is_zero() {
            op.propagate(w, a, b)?;
        } else {
            let entries: Vec<(i8, f64)> = w.iter().map(|x| (x.sign, x.logmag)).collect();
            let (x0, y0) = sys.planar_at(a);
            let mut st = LawsonState::from_log(a, alloc::vec![x0, y0], &entries);
            // forcing starts from zero coordinates; keep the control relative
            let o = LawsonOptions { atol: 0.0, ..*opts };
            integrate_to(sys, &mut st, b, &o, stats)?;
            for (i, x) in w.iter_mut().enumerate() {
                let v = st.v[i];
                *x = if v == 0.0 { LogReal::ZERO } else { LogReal::new(if v > 0.0 { 1 } else { -1 }, v.abs().ln() + st.ln_scale[i]) };
            }
        }
        a = b;
    }
    Ok(())
}

/// Trajectory of [`FloquetSystem`]: planar part integrated numerically, mode
/// part by the exact flow.
pub fn floquet_trajectory(
    sys: &FloquetSystem,
    initial: &CoupledState,
    t0: f64,
    times: &[f64],
    opts: &LawsonOptions,
) -> Result<TrajectoryRecord> {
    let n = sys.op.n_modes();
    if initial.w.max_mode() > n {
        return Err(Error::TruncationTooSmall { needed: initial.w.max_mode(), available: n });
    }
    let planar = CoupledState::new(initial.x, initial.y, LogModeVector::new())?;
    let mut rec = integrate(&DriveSystem { op: &sys.op }, &planar, t0, times, opts, Some(sys.op.period()))?;
    let mut w: Vec<LogReal> = (1..=n).map(|m| initial.w.get(m)).collect();
    let mut stats = LawsonStats::default();
    let mut t = t0;
    for (i, &tt) in times.iter().enumerate() {
        // the main state only crosses whole pieces, so sampling inside a
        // rotation does not split the turn
        let cut = sys.op.last_cut(tt).max(t).min(tt);
        advance_modes(sys, &mut w, t, cut, opts, &mut stats)?;
        t = cut;
        let mut sample = w.clone();
        advance_modes(sys, &mut sample, cut, tt, opts, &mut stats)?;
        let w = sample;
        let wv = LogModeVector::from_entries(w.iter().enumerate().filter(|(_, x)| !x.is_zero()).map(|(j, x)| (j + 1, *x)));
        rec.ln_norms[i] = wv.ln_norm();
        rec.states[i].w = wv;
    }
    rec.accepted_steps += stats.accepted;
    rec.rejected_steps += stats.rejected;
    Ok(rec)
}

/// Verdict of the trajectory-pair fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PairVerdict {
    /// `-ln ||u - v||` is quadratic in `t` with positive curvature.
    SuperExponential,
    /// Linear in `t`: plain exponential decay.
    ExponentialOnly,
    /// Zero initial separation.
    Degenerate,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PairFit {
    /// `kappa` in `-ln ||w|| = a + kappa t^2`.
    pub kappa: f64,
    pub intercept: f64,
    pub r2: f64,
    pub linear_slope: f64,
    pub linear_r2: f64,
    /// First and last fitted time.
    pub window: (f64, f64),
    /// `(t, ln ||w_u - w_v||)` at period boundaries.
    pub boundary_samples: Vec<(f64, f64)>,
    pub verdict: PairVerdict,
    /// `beta / (2T)^2` from the analytic shift, when available.
    pub predicted_kappa: Option<f64>,
}

/// Both trajectories of the experiment and the fit.
#[derive(Debug, Clone, PartialEq)]
pub struct PairExperiment {
    pub u: TrajectoryRecord,
    pub v: TrajectoryRecord,
    pub fit: PairFit,
    pub epsilon: f64,
}

/// Integrates `u = (x, y, 0)` and `v = (x, y, w0)` over `scenario.periods`
/// drive periods and fits `-ln ||u - v||` against `t^2` at period
/// boundaries. Both planar parts follow the same prescribed drive, so the
/// distance is taken on the mode part; planar drift is checked against the
/// closed-form drive.
/// `epsilon` overrides the calibrated rotation speed.
pub fn trajectory_pair_experiment(
    sc: &Scenario,
    w0: &LogModeVector,
    epsilon: Option<f64>,
    samples_per_period: usize,
) -> Result<PairExperiment> {
    let mut op = sc.operator()?;
    if let Some(e) = epsilon {
        op = op.with_epsilon(e);
    }
    let eps_used = op.epsilon;
    let sys = FloquetSystem { op, kicks: None };
    let period = sys.op.period();
    let spp = samples_per_period.max(1);
    let times: Vec<f64> = (1..=sc.periods * spp).map(|i| period * i as f64 / spp as f64).collect();
    let (x0, y0) = sys.planar_at(0.0);
    let opts = sc.options();
    let u0 = CoupledState::new(x0, y0, LogModeVector::new())?;
    let v0 = CoupledState::new(x0, y0, w0.clone())?;
    let mut all = alloc::vec![0.0];
    all.extend_from_slice(&times);
    let u = floquet_trajectory(&sys, &u0, 0.0, &all[1..], &opts).map(|r| prepend(r, &u0))?;
    let v = floquet_trajectory(&sys, &v0, 0.0, &all[1..], &opts).map(|r| prepend(r, &v0))?;
    for rec in [&u, &v] {
        for (t, s) in rec.times.iter().zip(&rec.states) {
            let (xd, yd) = sys.planar_at(*t);
            let drift = (s.x - xd).abs().max((s.y - yd).abs());
            if drift > 1e-6 * sc.amplitude {
                return Err(Error::Desynchronized { t: *t, drift });
            }
        }
    }
    let boundary: Vec<(f64, f64)> = v
        .times
        .iter()
        .zip(&v.states)
        .zip(&u.states)
        .enumerate()
        .filter(|(i, _)| i % spp == 0)
        .map(|(_, ((&t, a), b))| (t, a.w.sub(&b.w).ln_norm()))
        .collect();
    let predicted_kappa = analytic_beta(&sc.spectrum, sc.t_half).map(|b| b / (period * period));
    let fit = fit_pair(&boundary, predicted_kappa);
    Ok(PairExperiment { u, v, fit, epsilon: eps_used })
}

fn prepend(mut r: TrajectoryRecord, s0: &CoupledState) -> TrajectoryRecord {
    r.times.insert(0, 0.0);
    r.ln_norms.insert(0, s0.w.ln_norm());
    r.states.insert(0, s0.clone());
    r.events.insert(0, TrajectoryEvent { t: 0.0, kind: EventKind::PeriodBoundary });
    r
}

/// `ln ||a - b||` in `R^2 x H`.
pub fn pair_distance(a: &CoupledState, b: &CoupledState) -> f64 {
    let dw = a.w.sub(&b.w);
    let mut terms: Vec<f64> = dw.entries().iter().map(|(_, x)| 2.0 * x.logmag).collect();
    for d in [a.x - b.x, a.y - b.y] {
        if d != 0.0 {
            terms.push(2.0 * d.abs().ln());
        }
    }
    0.5 * log_sum_exp(&terms)
}

fn fit_pair(samples: &[(f64, f64)], predicted_kappa: Option<f64>) -> PairFit {
    let window = (samples.first().map_or(0.0, |s| s.0), samples.last().map_or(0.0, |s| s.0));
    let finite: Vec<(f64, f64)> = samples.iter().copied().filter(|s| s.1.is_finite()).collect();
    let degenerate = PairFit {
        kappa: 0.0,
        intercept: 0.0,
        r2: 0.0,
        linear_slope: 0.0,
        linear_r2: 0.0,
        window,
        boundary_samples: samples.to_vec(),
        verdict: PairVerdict::Degenerate,
        predicted_kappa,
    };
    if finite.len() < 3 {
        return degenerate;
    }
    let ts: Vec<f64> = finite.iter().map(|s| s.0).collect();
    let ys: Vec<f64> = finite.iter().map(|s| -s.1).collect();
    let one = |_t: f64| 1.0;
    let sq = |t: f64| t * t;
    let Some(q) = least_squares(&ts, &ys, &[&one, &sq]) else { return degenerate };
    let lin = fit_line(&ts, &ys);
    let (linear_slope, linear_r2) = lin.map_or((0.0, 0.0), |l| (l.slope, l.r2));
    let r2 = if q.r2.is_nan() { 0.0 } else { q.r2 };
    let verdict = if q.coef[1] > 0.0 && r2 >= 0.99 {
        PairVerdict::SuperExponential
    } else if linear_r2 >= 0.999 {
        PairVerdict::ExponentialOnly
    } else {
        PairVerdict::Inconclusive
    };
    PairFit {
        kappa: q.coef[1],
        intercept: q.coef[0],
        r2,
        linear_slope,
        linear_r2,
        window,
        boundary_samples: samples.to_vec(),
        verdict,
        predicted_kappa,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ModulusTrend {
    /// The sup over the second half stays within 5% of the first half.
    Bounded,
    Upward,
    /// No usable sample.
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModulusReport {
    pub gamma: f64,
    pub s: f64,
    pub ln_c0: f64,
    /// `(t, ln ratio)` for every usable sample.
    pub samples: Vec<(f64, f64)>,
    /// Samples with zero distance.
    pub skipped: usize,
    pub sup: f64,
    pub sup_first_half: f64,
    pub sup_second_half: f64,
    pub trend: ModulusTrend,
}

/// `sup_t ||A(u - v)||_s / (d (ln(C0/d))^gamma)` with `d = ||u - v||_s`
/// and `C0 = e max d`, evaluated in log space. With `include_planar` false
/// the planar parts are taken as identical.
pub fn log_lipschitz_modulus(
    u: &TrajectoryRecord,
    v: &TrajectoryRecord,
    spec: &Spectrum,
    gamma: f64,
    s: f64,
    include_planar: bool,
) -> Result<ModulusReport> {
    if u.times.len() != v.times.len() {
        return Err(Error::InvalidParameter("trajectories are sampled differently".into()));
    }
    let mut raw = Vec::new();
    let mut skipped = 0;
    for ((&t, a), b) in u.times.iter().zip(&u.states).zip(&v.states) {
        let dw = a.w.sub(&b.w);
        if dw.max_mode() > spec.n_max() {
            return Err(Error::TruncationTooSmall { needed: dw.max_mode(), available: spec.n_max() });
        }
        let ln_w = |n: usize| 0.5 * s * spec.lambda(n).ln();
        let mut d_terms: Vec<f64> = dw.entries().iter().map(|&(n, x)| 2.0 * (x.logmag + ln_w(n))).collect();
        if include_planar {
            for d in [a.x - b.x, a.y - b.y] {
                if d != 0.0 {
                    d_terms.push(2.0 * d.abs().ln());
                }
            }
        }
        let ln_d = 0.5 * log_sum_exp(&d_terms);
        let ln_num = dw.weighted_ln_norm(|n| ln_w(n) + spec.lambda(n).ln());
        if ln_d == f64::NEG_INFINITY || ln_num == f64::NEG_INFINITY {
            skipped += 1;
            continue;
        }
        raw.push((t, ln_d, ln_num));
    }
    let ln_c0 = 1.0 + raw.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let samples: Vec<(f64, f64)> = raw
        .iter()
        .map(|&(t, ln_d, ln_num)| (t, ln_num - ln_d - gamma * (ln_c0 - ln_d).ln()))
        .collect();
    let sup_of = |xs: &[(f64, f64)]| xs.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
    let h = samples.len() / 2;
    let (first, second) = samples.split_at(h);
    let sup = sup_of(&samples);
    let (sf, ss) = (sup_of(first), sup_of(second));
    let trend = if samples.len() < 2 {
        ModulusTrend::Empty
    } else if ss > sf + 1.05f64.ln() {
        ModulusTrend::Upward
    } else {
        ModulusTrend::Bounded
    };
    Ok(ModulusReport {
        gamma,
        s,
        ln_c0,
        samples,
        skipped,
        sup: sup.exp(),
        sup_first_half: sf.exp(),
        sup_second_half: ss.exp(),
        trend,
    })
}

/// One kick level: deposits on modes `2(n+k)`, `k = 1..=K`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KickLevel {
    pub n: usize,
    /// `K = ceil(sqrt n)`.
    pub k: usize,
    /// Periods `N = 2n + K` after which the pattern is read off.
    pub iterations: usize,
    /// `ln eps_n = -beta n^2 / 2 + ln B(n)`.
    pub ln_eps: f64,
    /// `ln A_k(n)` for `k = 1..=K`.
    pub ln_a: Vec<f64>,
    /// `ln K` of the gain integral for mode `2(n+k)`.
    pub ln_gain: Vec<f64>,
    /// `ln(||P^N e_1|| / eps_n)`: the residual left by a unit `e_1` part.
    pub ln_residual: f64,
    /// Index of the `p = 0` member in the cut-off family.
    pub first_member: usize,
}

impl KickLevel {
    /// `ln` of the post-kick amplitude on mode `2(n+k)`.
    pub fn ln_target(&self, beta: f64, k: usize) -> f64 {
        -0.5 * beta * (self.n * self.n) as f64 + self.ln_a[k - 1]
    }

    /// Largest forcing coefficient, `max_k ln(target_k / K_k)`.
    pub fn ln_amplitude(&self, beta: f64) -> f64 {
        (1..=self.k).map(|k| self.ln_target(beta, k) - self.ln_gain[k - 1]).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Sum of kick terms, one per `(n, p)`, each supported on its own label
/// interval and on the time window `(-kappa, 0)` before every period end.
#[derive(Debug, Clone)]
pub struct KickOperator {
    pub beta: f64,
    pub kappa: f64,
    pub levels: Vec<KickLevel>,
    pub family: CutoffFamily,
    /// `(level index, p)` of each family member.
    pub members: Vec<(usize, usize)>,
    /// Time bump on `(-kappa, 0)`.
    pub theta: BumpFunction,
    op: PeriodicOperator,
    rule: GaussLegendre,
}

/// Panels used when integrating diagonal rates over the kick window.
const RATE_PANELS: usize = 4;

impl KickOperator {
    /// `exp(int_h^0 rate_m)`, in logs, for `h` in the window before a period end.
    fn ln_propagation(&self, mode: usize, h: f64) -> f64 {
        let d = &self.op.drive;
        self.rule.composite(&|tau: f64| self.op.diag_rate(mode, d.value(tau)), h, 0.0, RATE_PANELS)
    }

    /// Offset `h in (-kappa, 0)` of `t` from the next period end, if inside a window.
    pub fn window_offset(&self, t: f64) -> Option<f64> {
        let p = self.op.period();
        let end = (t / p).ceil() * p;
        let h = t - end;
        (h > -self.kappa && h < 0.0).then_some(h)
    }

    /// `w_1(t)` carried forward to the period end along the `e_1` decay.
    pub fn label(&self, t: f64, w1: f64) -> Option<f64> {
        self.window_offset(t).map(|h| w1 * self.ln_propagation(1, h).exp())
    }

    /// Members whose cut-off is nonzero at `label`.
    pub fn active_terms(&self, label: f64) -> Vec<usize> {
        (0..self.members.len()).filter(|&i| self.family.member_value(i, label) != 0.0).collect()
    }

    /// Anchor label of `(n, p)`.
    pub fn anchor(&self, n: usize, p: usize) -> Option<f64> {
        let li = self.levels.iter().position(|l| l.n == n)?;
        let l = &self.levels[li];
        (p < 1 << l.k).then(|| self.family.anchors[l.first_member + p])
    }

    pub fn level(&self, n: usize) -> Option<&KickLevel> {
        self.levels.iter().find(|l| l.n == n)
    }

    /// Post-kick state on the kicked modes for `(n, p)`:
    /// `exp(-beta n^2 / 2) A_k(n) g_k` on mode `2(n+k)`.
    pub fn post_kick_target(&self, n: usize, p: usize) -> Option<LogModeVector> {
        let l = self.level(n)?;
        Some(LogModeVector::from_entries(
            (1..=l.k).filter(|k| p >> (k - 1) & 1 == 1).map(|k| (2 * (n + k), LogReal::from_ln(l.ln_target(self.beta, k)))),
        ))
    }

    /// Calls `put(mode, ln|c|, psi theta)` for the active term at `(t, w_1)`.
    pub fn add_forcing<F: FnMut(usize, f64, f64)>(&self, t: f64, w1: f64, mut put: F) {
        let Some(h) = self.window_offset(t) else { return };
        let th = self.theta.value(h);
        if th == 0.0 || w1 == 0.0 {
            return;
        }
        let label = w1 * self.ln_propagation(1, h).exp();
        let Some(i) = self.family.locate(label) else { return };
        let psi = self.family.member_value(i, label);
        if psi == 0.0 {
            return;
        }
        let (li, p) = self.members[i];
        let l = &self.levels[li];
        for k in 1..=l.k {
            if p >> (k - 1) & 1 == 1 {
                put(2 * (l.n + k), l.ln_target(self.beta, k) - l.ln_gain[k - 1], psi * th);
            }
        }
    }

    /// `ln` of the bound `M e^{-beta n^2/2} 2^{2Rn}` shape: the forcing
    /// amplitude of each level next to `2 R n ln 2`.
    pub fn ln_norm_budget(&self, r: usize) -> Vec<(usize, f64, f64)> {
        self.levels
            .iter()
            .map(|l| (l.n, l.ln_amplitude(self.beta), 2.0 * (r * l.n) as f64 * core::f64::consts::LN_2))
            .collect()
    }
}

/// Builds the kick operator over levels `n0..=n_kick_max`. Fails with
/// [`Error::KickResidual`] when `||P^N e_1|| > margin * eps_n` at some level.
pub fn build_kick_operator(sc: &Scenario, shift: &WeightedShift) -> Result<KickOperator> {
    sc.validate()?;
    let op = sc.operator()?;
    if !(sc.kappa < op.t0) {
        return Err(Error::InvalidParameter(format!(
            "kick window {} must be shorter than the quarter time {}",
            sc.kappa, op.t0
        )));
    }
    let ns: Vec<usize> = (sc.n0..=sc.n_kick_max).collect();
    let top_mode = 2 * (sc.n_kick_max + ceil_sqrt(sc.n_kick_max)) + 1;
    if top_mode > op.n_modes() {
        return Err(Error::TruncationTooSmall { needed: top_mode, available: op.n_modes() });
    }
    let mut beta = f64::INFINITY;
    for &n in &ns {
        beta = beta.min(ratio_bounds_check(shift, n)?.beta);
    }
    let ln_margin = sc.residual_margin.ln();
    let mut partial = Vec::new();
    for &n in &ns {
        let r = ratio_bounds_check(shift, n)?;
        let eq = equalizers(shift, n)?;
        let ln_eps = -0.5 * beta * (n * n) as f64 + eq.ln_b;
        partial.push((n, r.k, r.iterations, ln_eps, eq.ln_a[1..].to_vec(), r.lognorm_e1 - ln_eps));
    }
    if let Some(bad) = partial.iter().position(|p| p.5 > ln_margin) {
        let last_bad = partial.iter().rposition(|p| p.5 > ln_margin).unwrap_or(bad);
        let minimal_n0 = partial.get(last_bad + 1).map(|p| p.0);
        return Err(Error::KickResidual { failing_n: partial[bad].0, minimal_n0 });
    }
    // label intervals: |I_n| = kappa_seg 2^{-n}, stacked down from 1
    let mut top = 1.0;
    let mut blocks = Vec::new();
    for p in &partial {
        let len = sc.kappa_seg * (0.5f64).powi(p.0 as i32);
        blocks.push((top - len, top));
        top -= len;
    }
    let mut intervals = Vec::new();
    let mut members = Vec::new();
    let mut levels_of_members = Vec::new();
    let mut first = alloc::vec![0usize; partial.len()];
    for li in (0..partial.len()).rev() {
        let (lo, hi) = blocks[li];
        let cnt = 1usize << partial[li].1;
        first[li] = intervals.len();
        let w = (hi - lo) / cnt as f64;
        for p in 0..cnt {
            intervals.push((lo + w * p as f64, lo + w * (p + 1) as f64));
            members.push((li, p));
            levels_of_members.push(partial[li].0);
        }
    }
    let anchors = midpoints(&intervals);
    let family = build_cutoff_family(&intervals, &anchors, BoundLaw::Eq318 { r: 1, levels: levels_of_members })?;
    let theta = mollifier_bump(-sc.kappa, 0.0, -0.75 * sc.kappa, -0.25 * sc.kappa, 4)?;
    let mut kick = KickOperator {
        beta,
        kappa: sc.kappa,
        levels: Vec::new(),
        family,
        members,
        theta,
        op,
        rule: GaussLegendre::new(20),
    };
    for (li, p) in partial.into_iter().enumerate() {
        let (n, k, iterations, ln_eps, ln_a, ln_residual) = p;
        let mut ln_gain = Vec::with_capacity(k);
        for kk in 1..=k {
            let m = 2 * (n + kk);
            let g = adaptive_simpson(
                |h| kick.theta.value(h) * kick.ln_propagation(m, h).exp(),
                -sc.kappa,
                0.0,
                1e-12 * sc.kappa,
            );
            if !(g > 0.0) {
                return Err(Error::EmptyWindow("kick gain".into()));
            }
            ln_gain.push(g.ln());
        }
        kick.levels.push(KickLevel { n, k, iterations, ln_eps, ln_a, ln_gain, ln_residual, first_member: first[li] });
    }
    Ok(kick)
}

/// Integrated check of one kicked trajectory against the analytic pattern.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KickValidation {
    pub n: usize,
    pub p: usize,
    /// Largest `|ln|w_m| - ln target_m|` right after the kick window.
    pub post_kick_max_ln_err: f64,
    /// Largest `|ln|w| - ln eps_n| / |ln eps_n|` over the vertex modes after `N` periods.
    pub transported_max_rel_err: f64,
    /// Modes `2(n+K-k)+1` that carry the vertex after `N` periods.
    pub landing_modes: Vec<usize>,
}

/// Integrates the labelled trajectory of `(n, p)` from the start of the
/// positive half before the first kick window through `N` periods.
pub fn validate_kick(sc: &Scenario, kick: &KickOperator, n: usize, p: usize) -> Result<KickValidation> {
    let l = kick.level(n).ok_or(Error::InvalidParameter(format!("level {n} not in the kick range")))?.clone();
    let anchor = kick.anchor(n, p).ok_or(Error::InvalidParameter(format!("vertex {p} out of range")))?;
    let op = kick.op.clone();
    let big_t = op.t_half;
    let period = op.period();
    if 2 * l.iterations + 2 > op.n_modes() {
        return Err(Error::TruncationTooSmall { needed: 2 * l.iterations + 2, available: op.n_modes() });
    }
    // e_1 alone over the positive half: w_1(2T) = w_1(T) exp(int rate_1)
    let rule = GaussLegendre::new(20);
    let d = op.drive.clone();
    let ln_half = rule.composite(&|t: f64| op.diag_rate(1, d.value(t)), big_t, period, 64);
    let w1 = LogReal::from_ln(anchor.ln() - ln_half);
    let sys = FloquetSystem { op, kicks: Some(kick.clone()) };
    let (x0, y0) = sys.planar_at(big_t);
    let init = CoupledState::new(x0, y0, LogModeVector::from_entries([(1, w1)]))?;
    let end = period * (1 + l.iterations) as f64;
    let rec = floquet_trajectory(&sys, &init, big_t, &[period, end], &sc.options())?;
    let after = &rec.states[0].w;
    let mut post = 0.0f64;
    for k in 1..=l.k {
        if p >> (k - 1) & 1 == 1 {
            let got = after.get(2 * (n + k)).ln_abs();
            post = post.max((got - l.ln_target(kick.beta, k)).abs());
        }
    }
    let fin = &rec.states[1].w;
    let mut rel = 0.0f64;
    let mut landing = Vec::new();
    for k in 1..=l.k {
        let m = 2 * (n + l.k - k) + 1;
        landing.push(m);
        if p >> (k - 1) & 1 == 1 {
            rel = rel.max((fin.get(m).ln_abs() - l.ln_eps).abs() / l.ln_eps.abs().max(1.0));
        }
    }
    Ok(KickValidation { n, p, post_kick_max_ln_err: post, transported_max_rel_err: rel, landing_modes: landing })
}

/// Per-level data of the analytic cube cloud.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CubeLevel {
    pub n: usize,
    pub k: usize,
    pub ln_eps: f64,
    /// Indices of this level's points in the cloud.
    pub points: Vec<usize>,
}

/// All `2^K` vertices `eps_n g_p(n)` on modes `2(n+k)` per level, with
/// `beta` the smallest ratio constant over `levels`.
pub fn bad_cube_cloud(spec: &Spectrum, shift: &WeightedShift, levels: &[usize]) -> Result<(PointCloud, Vec<CubeLevel>, f64)> {
    let mut beta = f64::INFINITY;
    for &n in levels {
        beta = beta.min(ratio_bounds_check(shift, n)?.beta);
    }
    let mut cloud = PointCloud::for_spectrum(0, spec, 0.0);
    let mut out = Vec::with_capacity(levels.len());
    for &n in levels {
        let eq = equalizers(shift, n)?;
        let k = ceil_sqrt(n);
        let ln_eps = -0.5 * beta * (n * n) as f64 + eq.ln_b;
        let mut pts = Vec::with_capacity(1 << k);
        for p in 0..1usize << k {
            let w = LogModeVector::from_entries(
                (1..=k).filter(|j| p >> (j - 1) & 1 == 1).map(|j| (2 * (n + j), LogReal::from_ln(ln_eps))),
            );
            pts.push(cloud.len());
            cloud.push(Vec::new(), w, PointTag::Vertex { n, p })?;
        }
        out.push(CubeLevel { n, k, ln_eps, points: pts });
    }
    Ok((cloud, out, beta))
}

/// Shift large enough for the ratio estimates at level `n_max`.
pub fn shift_for_levels(spec: &Spectrum, t_half: f64, n_max: usize) -> Result<WeightedShift> {
    let big_n = 2 * n_max + ceil_sqrt(n_max);
    let need = 2 * big_n + 2;
    poincare_predicted(&spec.prefix(need)?, t_half)
}

/// Sampling of the cone attractor.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Section4Sampling {
    /// Grid spacing of the planar disk.
    pub disk_spacing: f64,
    /// Points per segment, base included.
    pub segment_points: usize,
    /// Smallest nonzero segment point relative to its top.
    pub segment_floor: f64,
}

impl Default for Section4Sampling {
    fn default() -> Self {
        Section4Sampling { disk_spacing: 0.02, segment_points: 64, segment_floor: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Section4Report {
    pub interval_total: f64,
    pub modes: Vec<usize>,
    pub disk_points: usize,
    /// Largest rhs norm at the equilibria.
    pub max_equilibrium_residual: f64,
    /// Largest drift from `P_n` over `t in [0, 10]`, for the checked `n`.
    pub max_equilibrium_drift: f64,
    pub drift_checked: Vec<usize>,
    /// Every segment base lies on the unit circle with zero mode part.
    pub bases_on_circle: bool,
}

/// Analytic sample of the cone attractor with equilibria
/// `P_n = (cos phi_n, sin phi_n, beta B_n / lambda_n e_n)` and the segments
/// joining them to the circle.
pub fn section4_attractor(
    b_law: &SequenceLaw,
    a_law: &SequenceLaw,
    spec: &Spectrum,
    n_max: usize,
    beta: f64,
    sampling: &Section4Sampling,
) -> Result<(PointCloud, Section4Report, Section4System)> {
    if n_max > spec.n_max() {
        return Err(Error::TruncationTooSmall { needed: n_max, available: spec.n_max() });
    }
    let mut modes = Vec::new();
    let mut lengths = Vec::new();
    let mut ln_b = Vec::new();
    for n in 1..=n_max {
        if let (Some(a), Some(b)) = (a_law.ln_value(spec, n), b_law.ln_value(spec, n)) {
            modes.push(n);
            lengths.push(a.exp());
            ln_b.push(b);
        }
    }
    if modes.is_empty() {
        return Err(Error::InvalidParameter("laws define no mode".into()));
    }
    if ln_b.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("B_n must decrease strictly".into()));
    }
    let total: f64 = lengths.iter().sum();
    if !(total < 2.0 * PI) {
        return Err(Error::IntervalBudget { total });
    }
    let intervals = intervals_from_lengths(0.0, &lengths);
    let anchors = midpoints(&intervals);
    let family = build_cutoff_family(&intervals, &anchors, BoundLaw::Eq44 { k: 1 })?;
    let theta = mollifier_bump(0.0, 1.5, 0.5, 1.0, 4)?;
    let sys = Section4System { rates: spec.prefix(n_max)?.values().to_vec(), beta, modes: modes.clone(), ln_b: ln_b.clone(), family, theta };

    let mut cloud = PointCloud::for_spectrum(2, &spec.prefix(n_max)?, 0.0);
    let h = sampling.disk_spacing;
    let m = (1.0 / h).floor() as i64;
    let mut disk = 0;
    for i in -m..=m {
        for j in -m..=m {
            let (x, y) = (i as f64 * h, j as f64 * h);
            if x * x + y * y <= 1.0 + 1e-12 {
                cloud.push(alloc::vec![x, y], LogModeVector::new(), PointTag::Cone)?;
                disk += 1;
            }
        }
    }
    let mut max_res: f64 = 0.0;
    let mut bases_on_circle = true;
    let seg = sampling.segment_points.max(2);
    for (i, &n) in modes.iter().enumerate() {
        let phi = anchors[i];
        let (c, s) = (phi.cos(), phi.sin());
        let ln_top = beta.ln() + ln_b[i] - spec.lambda(n).ln();
        let pn = LogModeVector::from_entries([(n, LogReal::from_ln(ln_top))]);
        let mut dense = alloc::vec![0.0; n_max];
        dense[n - 1] = ln_top.exp();
        max_res = max_res.max(sys.residual(c, s, &dense));
        cloud.push(alloc::vec![c, s], pn, PointTag::Equilibrium { n })?;
        bases_on_circle &= ((c * c + s * s) - 1.0).abs() < 1e-12;
        cloud.push(alloc::vec![c, s], LogModeVector::new(), PointTag::Segment { n, j: 0 })?;
        let ln_floor = sampling.segment_floor.ln();
        for j in 1..seg {
            let l = ln_top + ln_floor * j as f64 / (seg - 1) as f64;
            cloud.push(alloc::vec![c, s], LogModeVector::from_entries([(n, LogReal::from_ln(l))]), PointTag::Segment { n, j })?;
        }
    }
    let report = Section4Report {
        interval_total: total,
        modes,
        disk_points: disk,
        max_equilibrium_residual: max_res,
        max_equilibrium_drift: f64::NAN,
        drift_checked: Vec::new(),
        bases_on_circle,
    };
    Ok((cloud, report, sys))
}

/// Integrates from each `P_n`, `n` in `check`, over `[0, t_end]` and returns
/// the largest deviation in `R^2 x H`.
pub fn equilibrium_drift(sys: &Section4System, spec: &Spectrum, check: &[usize], t_end: f64, opts: &LawsonOptions) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &n in check {
        let i = sys.modes.iter().position(|&m| m == n).ok_or(Error::InvalidParameter(format!("mode {n} is not forced")))?;
        let phi = sys.anchor(i);
        let ln_top = sys.beta.ln() + sys.ln_b[i] - spec.lambda(n).ln();
        let p = CoupledState::new(phi.cos(), phi.sin(), LogModeVector::from_entries([(n, LogReal::from_ln(ln_top))]))?;
        let times: Vec<f64> = (1..=10).map(|k| t_end * k as f64 / 10.0).collect();
        let rec = integrate(sys, &p, 0.0, &times, opts, None)?;
        for st in &rec.states {
            worst = worst.max(pair_distance(st, &p).exp());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{make_spectrum, SpectrumFamily};

    fn linear(n: usize) -> Spectrum {
        make_spectrum(SpectrumFamily::Linear { c: 1.0 }, n).unwrap()
    }

    #[test]
    fn decay_is_exponential() {
        let sys = DecaySystem { rates: alloc::vec![1.0, 2.0, 3.0] };
        let w = LogModeVector::from_dense(&[1.0, -1.0, 1.0]);
        let rec = integrate(&sys, &CoupledState::new(0.3, 0.0, w).unwrap(), 0.0, &[5.0, 10.0], &LawsonOptions::default(), None).unwrap();
        let end = &rec.states[1];
        for n in 1..=3 {
            assert!((end.w.get(n).logmag + 10.0 * n as f64).abs() < 1e-8);
        }
        assert_eq!(end.w.get(2).sign, -1);
        assert_eq!((end.x, end.y), (0.3, 0.0));
    }

    #[test]
    fn cone_radius_relaxes_and_equilibria_hold() {
        let spec = make_spectrum(SpectrumFamily::Quadratic, 30).unwrap();
        let (cloud, rep, sys) = section4_attractor(
            &SequenceLaw::LogCubedHeights,
            &SequenceLaw::LogSquaredLengths,
            &spec,
            30,
            1.0,
            &Section4Sampling { disk_spacing: 0.1, segment_points: 8, segment_floor: 1e-4 },
        )
        .unwrap();
        assert!(rep.bases_on_circle && rep.max_equilibrium_residual < 1e-12);
        assert_eq!(cloud.len(), rep.disk_points + rep.modes.len() * 9);
        let opts = LawsonOptions::default();
        let rec = integrate(&sys, &CoupledState::new(0.5, 0.0, LogModeVector::new()).unwrap(), 0.0, &[20.0], &opts, None).unwrap();
        let s = &rec.states[0];
        assert!(((s.x * s.x + s.y * s.y).sqrt() - 1.0).abs() < 1e-6);
        assert!(equilibrium_drift(&sys, &spec, &[2, 3], 10.0, &opts).unwrap() < 1e-8);
    }

    fn short_scenario() -> Scenario {
        let mut sc = Scenario::pair_default().unwrap();
        sc.t_half = 1.0;
        sc.periods = 3;
        sc
    }

    #[test]
    fn pair_experiment_edge_cases() {
        let sc = short_scenario();
        let z = trajectory_pair_experiment(&sc, &LogModeVector::new(), None, 2).unwrap();
        assert_eq!(z.fit.verdict, PairVerdict::Degenerate);
        let w0 = LogModeVector::basis(1);
        let off = trajectory_pair_experiment(&sc, &w0, Some(0.0), 2).unwrap();
        assert_eq!(off.fit.verdict, PairVerdict::ExponentialOnly);
        assert!(off.fit.linear_slope > 0.0 && off.fit.linear_r2 > 1.0 - 1e-9);
        let m = log_lipschitz_modulus(&off.u, &off.v, &sc.spectrum, 0.5, 0.0, false).unwrap();
        assert_eq!(m.skipped, 0);
        assert!(m.sup.is_finite());
    }

    fn kick_setup() -> (Scenario, KickOperator) {
        let spec = linear(40);
        let mut sc = Scenario::pair_default().unwrap();
        sc.spectrum = spec.clone();
        sc.t_half = 1.0;
        sc.n_trunc = 32;
        sc.n_kick_max = 5;
        let shift = shift_for_levels(&spec, 1.0, 5).unwrap();
        let kick = build_kick_operator(&sc, &shift).unwrap();
        (sc, kick)
    }

    #[test]
    fn kick_terms_are_local() {
        let (_, kick) = kick_setup();
        for n in [4, 5] {
            for p in 0..4 {
                let a = kick.anchor(n, p).unwrap();
                let act = kick.active_terms(a);
                assert_eq!(act.len(), 1);
                assert_eq!(kick.members[act[0]].1, p);
            }
        }
        let t = 2.0 * 3.0 - 0.5 * kick.kappa;
        let mut hits = 0;
        kick.add_forcing(t, 0.0, |_, _, _| hits += 1);
        kick.add_forcing(1.0, 0.9, |_, _, _| hits += 1);
        assert_eq!(hits, 0);
        let target = kick.post_kick_target(4, 3).unwrap();
        assert_eq!(target.entries().iter().map(|e| e.0).collect::<Vec<_>>(), [10, 12]);
    }

    #[test]
    fn kick_lands_on_the_cube_vertex() {
        let (sc, kick) = kick_setup();
        let v = validate_kick(&sc, &kick, 4, 2).unwrap();
        assert!(v.post_kick_max_ln_err < 1e-6, "{v:?}");
        assert!(v.transported_max_rel_err < 1e-9, "{v:?}");
        assert_eq!(v.landing_modes, [11, 9]);
    }

    #[test]
    fn cube_levels() {
        let spec = linear(120);
        let shift = shift_for_levels(&spec, 1.0, 16).unwrap();
        let (cloud, lv, beta) = bad_cube_cloud(&spec, &shift, &[4, 9, 16]).unwrap();
        assert!(beta > 0.0);
        assert_eq!(lv.iter().map(|l| l.points.len()).collect::<Vec<_>>(), [4, 8, 16]);
        assert_eq!(cloud.len(), 28);
        assert!(lv[2].ln_eps < lv[1].ln_eps && lv[1].ln_eps < lv[0].ln_eps);
    }
}
