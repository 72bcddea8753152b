//! The time-periodic coupling `Phi(t)` and its Poincaré map.
//!
//! On the half period where the drive is negative, `Phi` couples the pairs
//! `(2n-1, 2n)`; where it is positive, the pairs `(2n, 2n+1)` and mode 1
//! alone. Each active pair gets the diagonal correction
//! `(lambda_a - lambda_b) theta_2 / 2 * diag(1, -1)`, so both modes decay at
//! the pair mean, plus a rotation `eps * theta_1` that turns `e_a` into
//! `e_b` over the plateau. One period therefore acts as a weighted shift
//! on the basis, which is what [`poincare_predicted`] writes down exactly.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::cutoffs::{mollifier_bump, periodic_drive, BumpFunction, PeriodicDrive};
use crate::fit::least_squares;
use crate::integrate::{integrate_samples, LawsonOptions, LawsonState, LawsonSystem};
use crate::logreal::{log_sum_exp, LogReal};
use crate::modevec::LogModeVector;
use crate::quad::adaptive_simpson;
use crate::spectral::{Spectrum, SpectrumFamily};
use crate::{Error, Result};

#[cfg(not(feature = "std"))]
use num_traits::Float;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Absolute tolerance of every plateau and gain integral.
pub const QUAD_TOL: f64 = 1e-12;

/// `Phi(t)` over a fixed truncation, with calibrated rotation speed.
#[derive(Debug, Clone)]
pub struct PeriodicOperator {
    spectrum: Spectrum,
    rates: Vec<f64>,
    pub drive: PeriodicDrive,
    pub theta1: BumpFunction,
    pub theta2: BumpFunction,
    /// Rotation speed on the plateau.
    pub epsilon: f64,
    /// Half period; the full period is `2 T`.
    pub t_half: f64,
    /// First time with `|x| = amplitude / 4`.
    pub t0: f64,
    /// Mode-1 gain calibration `T / int theta_2(x) dt` over the positive half.
    pub gain_c: f64,
    zeroed: bool,
    /// `int theta_1(|x|)` over `[t0, T - t0]` and `int theta_2(|x|)` over
    /// `[0, t0]` and `[T - t0, T]` of one half.
    core_i1: f64,
    edge_i2: [f64; 2],
}

impl PeriodicOperator {
    /// Operator on all modes of `spectrum`, half period `t_half`.
    pub fn new(spectrum: &Spectrum, t_half: f64, amplitude: f64, plateau_fraction: f64) -> Result<Self> {
        if spectrum.n_max() == 0 {
            return Err(Error::InvalidParameter("empty spectrum".into()));
        }
        let drive = periodic_drive(amplitude, t_half, plateau_fraction)?;
        let n = amplitude;
        let theta1 = mollifier_bump(0.25 * n, 1.25 * n, 0.5 * n, n, 8)?;
        let theta2 = mollifier_bump(0.0, 3.0 * n, 0.25 * n, 2.0 * n, 8)?;
        let t0 = drive.quarter_time();
        let epsilon = calibrate_epsilon(&drive, &theta1, t0, t_half)?;
        let active = adaptive_simpson(|t| theta2.value(drive.value(t)), t_half, 2.0 * t_half, QUAD_TOL);
        if !(active > 0.0) {
            return Err(Error::EmptyWindow("mode-1 gain window".into()));
        }
        let th2 = |t: f64| theta2.value(drive.value(t).abs());
        let core_i1 = adaptive_simpson(|t| theta1.value(drive.value(t).abs()), t0, t_half - t0, QUAD_TOL);
        let edge_i2 = [adaptive_simpson(th2, 0.0, t0, QUAD_TOL), adaptive_simpson(th2, t_half - t0, t_half, QUAD_TOL)];
        Ok(PeriodicOperator {
            spectrum: spectrum.clone(),
            rates: spectrum.values().to_vec(),
            drive,
            theta1,
            theta2,
            epsilon,
            t_half,
            t0,
            gain_c: t_half / active,
            zeroed: false,
            core_i1,
            edge_i2,
        })
    }

    /// Same operator with a different rotation speed.
    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    /// `Phi = 0`: only the diagonal decay remains.
    pub fn zeroed(mut self) -> Self {
        self.zeroed = true;
        self.epsilon = 0.0;
        self
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn n_modes(&self) -> usize {
        self.rates.len()
    }

    pub fn period(&self) -> f64 {
        2.0 * self.t_half
    }

    /// Truncated copy acting on the first `n` modes.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        let spectrum = self.spectrum.prefix(n)?;
        let mut op = self.clone();
        op.rates = spectrum.values().to_vec();
        op.spectrum = spectrum;
        Ok(op)
    }

    /// `out = Phi(t) w` on the stored truncation.
    pub fn phi_apply(&self, t: f64, w: &[f64], out: &mut [f64]) {
        let zeros = alloc::vec![0.0; w.len()];
        self.scaled_apply_at(self.drive.value(t), w, &zeros, out);
    }

    /// `dv_i = exp(-s_i) (Phi w)_i` with `w_j = exp(s_j) v_j`, for drive value `x`.
    pub fn scaled_apply_at(&self, x: f64, v: &[f64], s: &[f64], dv: &mut [f64]) {
        dv.iter_mut().for_each(|d| *d = 0.0);
        if self.zeroed || x == 0.0 {
            return;
        }
        let ax = x.abs();
        let th1 = self.theta1.value(ax);
        let th2 = self.theta2.value(ax);
        let lam = &self.rates;
        let n = lam.len();
        let mut a = if x < 0.0 { 1 } else { 2 };
        if x > 0.0 {
            dv[0] += 0.5 * lam[0] * self.gain_c * th2 * v[0];
        }
        let e = self.epsilon * th1;
        while a < n {
            let (ia, ib) = (a - 1, a);
            let d = 0.5 * (lam[ia] - lam[ib]) * th2;
            dv[ia] += d * v[ia];
            dv[ib] -= d * v[ib];
            if e != 0.0 {
                if v[ib] != 0.0 {
                    dv[ia] -= e * v[ib] * (s[ib] - s[ia]).exp();
                }
                if v[ia] != 0.0 {
                    dv[ib] += e * v[ia] * (s[ia] - s[ib]).exp();
                }
            }
            a += 2;
        }
    }

    /// Coefficient of `theta_2` in the diagonal entry of `mode` on one half.
    fn theta2_coef(&self, mode: usize, minus: bool) -> f64 {
        let lam = &self.rates;
        let n = lam.len();
        if !minus && mode == 1 {
            return 0.5 * lam[0] * self.gain_c;
        }
        let first_of_pair = (mode % 2 == 1) == minus;
        if first_of_pair && mode < n {
            0.5 * (lam[mode - 1] - lam[mode])
        } else if !first_of_pair && mode >= 2 {
            -0.5 * (lam[mode - 2] - lam[mode - 1])
        } else {
            0.0
        }
    }

    /// Exact flow of `w' = (-A + Phi(t)) w` from `t_from` to `t_to` on log
    /// coordinates (`w[i]` is mode `i + 1`).
    ///
    /// On `[t0, T - t0]` of every half `theta_2 = 1`, so each pair decays at
    /// its mean rate while it turns by `eps int theta_1`; on the rest
    /// `theta_1 = 0` and the flow is diagonal. Only bump integrals are
    /// evaluated numerically; a full calibrated turn is applied as an exact
    /// quarter turn.
    pub fn propagate(&self, w: &mut [LogReal], t_from: f64, t_to: f64) -> Result<()> {
        let n = self.rates.len();
        if w.len() != n {
            return Err(Error::TruncationTooSmall { needed: w.len(), available: n });
        }
        if !(t_to >= t_from) {
            return Err(Error::InvalidParameter(format!("cannot propagate backwards from {t_from} to {t_to}")));
        }
        if self.zeroed {
            for (x, l) in w.iter_mut().zip(&self.rates) {
                *x = x.scale_ln(-l * (t_to - t_from));
            }
            return Ok(());
        }
        let big_t = self.t_half;
        let tol = 1e-12 * big_t;
        let mut a = t_from;
        while a < t_to {
            let k = ((a + tol) / big_t).floor();
            let base = k * big_t;
            let cuts = [base + self.t0, base + big_t - self.t0, base + big_t];
            let piece = cuts.iter().position(|&c| a < c - tol).unwrap_or(2);
            let b = cuts[piece].min(t_to);
            let start = if piece == 0 { base } else { cuts[piece - 1] };
            let full = (a - start).abs() <= tol && (b - cuts[piece]).abs() <= tol;
            let minus = (k as i64).rem_euclid(2) == 0;
            let dt = b - a;
            if piece == 1 {
                let i1 = if full {
                    self.core_i1
                } else {
                    adaptive_simpson(|t| self.theta1.value(self.drive.value(t).abs()), a, b, QUAD_TOL)
                };
                self.apply_core(w, minus, dt, self.epsilon * i1);
            } else {
                let i2 = if full {
                    self.edge_i2[piece / 2]
                } else {
                    adaptive_simpson(|t| self.theta2.value(self.drive.value(t).abs()), a, b, QUAD_TOL)
                };
                for (i, x) in w.iter_mut().enumerate() {
                    *x = x.scale_ln(-self.rates[i] * dt + self.theta2_coef(i + 1, minus) * i2);
                }
            }
            a = if b >= t_to { t_to } else { b };
        }
        Ok(())
    }

    /// Latest piece boundary of [`Self::propagate`] at or before `t`.
    pub fn last_cut(&self, t: f64) -> f64 {
        let big_t = self.t_half;
        let tol = 1e-12 * big_t;
        let base = ((t + tol) / big_t).floor() * big_t;
        [base + big_t - self.t0, base + self.t0, base].into_iter().find(|&c| c <= t + tol).unwrap_or(base)
    }

    fn apply_core(&self, w: &mut [LogReal], minus: bool, dt: f64, angle: f64) {
        let lam = &self.rates;
        let n = lam.len();
        let quarter = (angle - core::f64::consts::FRAC_PI_2).abs() <= 1e-9;
        let (c, s) = if quarter { (0.0, 1.0) } else { (angle.cos(), angle.sin()) };
        let (cl, sl) = (LogReal::from_f64(c), LogReal::from_f64(s));
        let mut i = 0;
        if !minus {
            w[0] = w[0].scale_ln((-lam[0] + 0.5 * lam[0] * self.gain_c) * dt);
            i = 1;
        }
        while i + 1 < n {
            let mean = -0.5 * (lam[i] + lam[i + 1]) * dt;
            let (wa, wb) = (w[i], w[i + 1]);
            w[i] = (cl * wa - sl * wb).scale_ln(mean);
            w[i + 1] = (sl * wa + cl * wb).scale_ln(mean);
            i += 2;
        }
        if i < n {
            w[i] = w[i].scale_ln(-lam[i] * dt);
        }
    }

    /// Diagonal entry `-lambda_m + Phi_mm` at drive value `x`.
    pub fn diag_rate(&self, mode: usize, x: f64) -> f64 {
        let lam = &self.rates;
        let base = -lam[mode - 1];
        if self.zeroed || x == 0.0 {
            return base;
        }
        let th2 = self.theta2.value(x.abs());
        if x > 0.0 && mode == 1 {
            return base + 0.5 * lam[0] * self.gain_c * th2;
        }
        // pairs start at odd modes on the negative half, even ones on the positive
        let first_of_pair = (mode % 2 == 1) == (x < 0.0);
        if first_of_pair {
            if mode < lam.len() {
                base + 0.5 * (lam[mode - 1] - lam[mode]) * th2
            } else {
                base
            }
        } else {
            base - 0.5 * (lam[mode - 2] - lam[mode - 1]) * th2
        }
    }

    /// Operator norm of `Phi(t)`: the largest `|d| + |e|` over active blocks.
    pub fn norm_at(&self, t: f64) -> f64 {
        if self.zeroed {
            return 0.0;
        }
        let x = self.drive.value(t);
        if x == 0.0 {
            return 0.0;
        }
        let ax = x.abs();
        let th1 = self.theta1.value(ax);
        let th2 = self.theta2.value(ax);
        let lam = &self.rates;
        let mut m: f64 = 0.0;
        let mut a = if x < 0.0 { 1 } else { 2 };
        if x > 0.0 {
            m = 0.5 * lam[0] * self.gain_c * th2;
        }
        while a < lam.len() {
            // singular values of [[d, -e], [e, -d]] are |d| +- |e|
            let d = 0.5 * (lam[a - 1] - lam[a]) * th2;
            let e = self.epsilon * th1;
            m = m.max(d.abs() + e.abs());
            a += 2;
        }
        m
    }

    /// `L0` of the norm bound: the widest coupled gap, or the mode-1 gain
    /// `c lambda_1` when that is larger.
    pub fn l0(&self) -> f64 {
        let lam = &self.rates;
        let gap = lam.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        gap.max(self.gain_c * lam[0])
    }

    /// `L0 / 2 + eps`.
    pub fn norm_bound(&self) -> f64 {
        0.5 * self.l0() + self.epsilon
    }

    /// Sampled `sup_t ||Phi(t)||` over one period.
    pub fn sampled_sup_norm(&self, samples: usize) -> f64 {
        (0..samples)
            .map(|i| self.norm_at(self.period() * (i as f64 + 0.5) / samples as f64))
            .fold(0.0, f64::max)
    }
}

impl LawsonSystem for PeriodicOperator {
    fn planar_dim(&self) -> usize {
        0
    }
    fn rates(&self) -> &[f64] {
        &self.rates
    }
    fn rhs(&self, t: f64, _p: &[f64], v: &[f64], s: &[f64], _dp: &mut [f64], dv: &mut [f64]) {
        self.scaled_apply_at(self.drive.value(t), v, s, dv);
    }
}

/// `eps = pi / (2 m)` for an active plateau measure `m`.
pub fn epsilon_for_active_measure(m: f64) -> Result<f64> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::EmptyWindow(format!("active window measure {m}")));
    }
    Ok(PI / (2.0 * m))
}

/// Rotation speed turning `e_a` into `e_b` exactly once per negative half:
/// `eps = pi / (2 int_{T0}^{T-T0} theta_1(-x(t)) dt)`.
pub fn calibrate_epsilon(drive: &PeriodicDrive, theta1: &BumpFunction, t0: f64, t_half: f64) -> Result<f64> {
    if !(t_half - t0 > t0) {
        return Err(Error::EmptyWindow(format!("active window [{t0}, {}]", t_half - t0)));
    }
    let m = adaptive_simpson(|t| theta1.value(-drive.value(t)), t0, t_half - t0, QUAD_TOL);
    epsilon_for_active_measure(m)
}

/// Image of one basis vector under a shift-like map.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ShiftEntry {
    pub image: usize,
    pub log_mu: f64,
    pub sign: i8,
}

/// Weighted shift `P e_n = sign * exp(log_mu) e_image`, with the half maps.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WeightedShift {
    /// Index `n - 1` holds the image of `e_n`, if it stays in the truncation.
    pub entries: Vec<Option<ShiftEntry>>,
    pub minus: Vec<Option<ShiftEntry>>,
    pub plus: Vec<Option<ShiftEntry>>,
}

impl WeightedShift {
    /// A shift from explicit full-period entries; half maps are left empty.
    pub fn from_parts(entries: Vec<Option<ShiftEntry>>) -> Self {
        let n = entries.len();
        WeightedShift { entries, minus: alloc::vec![None; n], plus: alloc::vec![None; n] }
    }

    pub fn n_modes(&self) -> usize {
        self.entries.len()
    }

    pub fn entry(&self, mode: usize) -> Option<ShiftEntry> {
        self.entries.get(mode.wrapping_sub(1)).copied().flatten()
    }

    /// Image of `e_mode` under the full period.
    pub fn image_index(&self, mode: usize) -> Option<usize> {
        self.entry(mode).map(|e| e.image)
    }

    pub fn log_multiplier(&self, mode: usize) -> Option<f64> {
        self.entry(mode).map(|e| e.log_mu)
    }

    fn apply_with(map: &[Option<ShiftEntry>], u: &LogModeVector, step: usize) -> Result<LogModeVector> {
        let mut out = LogModeVector::new();
        for &(m, x) in u.entries() {
            let e = map
                .get(m - 1)
                .copied()
                .flatten()
                .ok_or(Error::OrbitExitsTruncation { mode: m, step })?;
            let y = LogReal::new(e.sign, e.log_mu) * x;
            out.set(e.image, out.get(e.image) + y);
        }
        Ok(out)
    }

    pub fn apply(&self, u: &LogModeVector) -> Result<LogModeVector> {
        Self::apply_with(&self.entries, u, 0)
    }

    pub fn apply_minus(&self, u: &LogModeVector) -> Result<LogModeVector> {
        Self::apply_with(&self.minus, u, 0)
    }

    pub fn apply_plus(&self, u: &LogModeVector) -> Result<LogModeVector> {
        Self::apply_with(&self.plus, u, 0)
    }
}

/// Exact Poincaré map `P = P_+ P_-` of `Phi` over one period `2T`.
pub fn poincare_predicted(spec: &Spectrum, t_half: f64) -> Result<WeightedShift> {
    let n = spec.n_max();
    if n < 3 {
        return Err(Error::InvalidParameter(format!("need at least 3 modes, got {n}")));
    }
    let lam = |k: usize| spec.lambda(k);
    let pair = |a: usize| -0.5 * t_half * (lam(a) + lam(a + 1));
    let mut minus = alloc::vec![None; n];
    let mut plus = alloc::vec![None; n];
    let mut a = 1;
    while a < n {
        let l = pair(a);
        minus[a - 1] = Some(ShiftEntry { image: a + 1, log_mu: l, sign: 1 });
        minus[a] = Some(ShiftEntry { image: a, log_mu: l, sign: -1 });
        a += 2;
    }
    plus[0] = Some(ShiftEntry { image: 1, log_mu: -0.5 * t_half * lam(1), sign: 1 });
    let mut a = 2;
    while a < n {
        let l = pair(a);
        plus[a - 1] = Some(ShiftEntry { image: a + 1, log_mu: l, sign: 1 });
        plus[a] = Some(ShiftEntry { image: a, log_mu: l, sign: -1 });
        a += 2;
    }
    let entries = (0..n)
        .map(|i| {
            let m = minus[i]?;
            let p = plus[m.image - 1]?;
            Some(ShiftEntry { image: p.image, log_mu: m.log_mu + p.log_mu, sign: m.sign * p.sign })
        })
        .collect();
    Ok(WeightedShift { entries, minus, plus })
}

/// Monodromy `U(2T, 0)` on a truncation; `columns[j][i]` is entry `i` of `U e_{j+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoincareMatrix {
    pub columns: Vec<Vec<LogReal>>,
    pub rhs_evals: usize,
}

impl PoincareMatrix {
    pub fn n(&self) -> usize {
        self.columns.len()
    }

    /// Row-major dense copy (`a[i][j]`), underflowing entries become 0.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut a = alloc::vec![alloc::vec![0.0; n]; n];
        for (j, col) in self.columns.iter().enumerate() {
            for (i, x) in col.iter().enumerate() {
                a[i][j] = x.to_f64();
            }
        }
        a
    }

    /// `M^k e_mode`, evaluated column by column in log arithmetic.
    pub fn power_apply(&self, mode: usize, k: usize) -> Vec<LogReal> {
        let n = self.n();
        let mut v = alloc::vec![LogReal::ZERO; n];
        v[mode - 1] = LogReal::ONE;
        for _ in 0..k {
            let mut w = alloc::vec![LogReal::ZERO; n];
            for (j, x) in v.iter().enumerate() {
                if x.is_zero() {
                    continue;
                }
                for (i, m) in self.columns[j].iter().enumerate() {
                    w[i] = w[i] + *m * *x;
                }
            }
            v = w;
        }
        v
    }
}

fn column(op: &PeriodicOperator, j: usize, opts: &LawsonOptions) -> Result<(Vec<LogReal>, usize)> {
    let n = op.n_modes();
    let mut v = alloc::vec![0.0; n];
    v[j] = 1.0;
    let init = LawsonState::dense(0.0, Vec::new(), v);
    let (states, stats) = integrate_samples(op, init, &[op.t_half, op.period()], opts)?;
    let last = &states[1];
    let col = last
        .v
        .iter()
        .zip(&last.ln_scale)
        .map(|(&x, &s)| if x == 0.0 { LogReal::ZERO } else { LogReal::new(if x > 0.0 { 1 } else { -1 }, x.abs().ln() + s) })
        .collect();
    Ok((col, stats.rhs_evals))
}

/// Columns `U(2T, 0) e_n` for `n = 1..=n_trunc`, integrated with relative
/// tolerance `tol`. Columns are computed independently and kept in order.
pub fn poincare_numeric(op: &PeriodicOperator, n_trunc: usize, tol: f64) -> Result<PoincareMatrix> {
    let op = op.truncated(n_trunc)?;
    let opts = LawsonOptions { rtol: tol, atol: tol * 1e-2, ..Default::default() };
    #[cfg(feature = "parallel")]
    let cols: Vec<Result<(Vec<LogReal>, usize)>> = (0..n_trunc).into_par_iter().map(|j| column(&op, j, &opts)).collect();
    #[cfg(not(feature = "parallel"))]
    let cols: Vec<Result<(Vec<LogReal>, usize)>> = (0..n_trunc).map(|j| column(&op, j, &opts)).collect();
    let mut columns = Vec::with_capacity(n_trunc);
    let mut rhs_evals = 0;
    for c in cols {
        let (c, e) = c?;
        columns.push(c);
        rhs_evals += e;
    }
    Ok(PoincareMatrix { columns, rhs_evals })
}

/// Agreement between a numerical monodromy and the predicted shift.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ShiftMatch {
    pub pattern_ok: bool,
    pub signs_ok: bool,
    /// Largest `|ln|P_ij| - log_mu| / max(1, |log_mu|)` over checked columns.
    pub max_log_rel_err: f64,
    /// Largest off-pattern entry relative to its column's Euclidean norm.
    pub max_off_pattern: f64,
    /// Columns whose orbit stays inside the truncation.
    pub checked_columns: Vec<usize>,
}

/// Compares `m` with the shift predicted on the same truncation.
pub fn compare_shift(m: &PoincareMatrix, shift: &WeightedShift) -> ShiftMatch {
    let mut out = ShiftMatch {
        pattern_ok: true,
        signs_ok: true,
        max_log_rel_err: 0.0,
        max_off_pattern: 0.0,
        checked_columns: Vec::new(),
    };
    for (j, col) in m.columns.iter().enumerate() {
        let Some(e) = shift.entry(j + 1) else { continue };
        if e.image > col.len() {
            continue;
        }
        out.checked_columns.push(j + 1);
        let ln2: Vec<f64> = col.iter().map(|x| 2.0 * x.ln_abs()).collect();
        let ln_norm = 0.5 * log_sum_exp(&ln2);
        let mut biggest = 0usize;
        for (i, x) in col.iter().enumerate() {
            if x.ln_abs() > col[biggest].ln_abs() {
                biggest = i;
            }
        }
        if biggest + 1 != e.image {
            out.pattern_ok = false;
        }
        let hit = col[e.image - 1];
        if hit.sign != e.sign {
            out.signs_ok = false;
        }
        let err = (hit.ln_abs() - e.log_mu).abs() / e.log_mu.abs().max(1.0);
        out.max_log_rel_err = out.max_log_rel_err.max(err);
        for (i, x) in col.iter().enumerate() {
            if i + 1 != e.image && !x.is_zero() {
                out.max_off_pattern = out.max_off_pattern.max((x.ln_abs() - ln_norm).exp());
            }
        }
    }
    out
}

/// `||P^N e_mode||` along the shift orbit.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IterateNorms {
    pub mode: usize,
    pub n: usize,
    pub lognorm: f64,
    pub final_mode: usize,
    pub sign: i8,
}

/// Telescoped log-norm of `P^N e_mode`.
pub fn iterate_norm(shift: &WeightedShift, mode: usize, n: usize) -> Result<IterateNorms> {
    if mode == 0 || mode > shift.n_modes() {
        return Err(Error::OrbitExitsTruncation { mode, step: 0 });
    }
    let mut m = mode;
    let mut lognorm = 0.0;
    let mut sign = 1i8;
    for step in 0..n {
        let e = shift.entry(m).ok_or(Error::OrbitExitsTruncation { mode: m, step })?;
        lognorm += e.log_mu;
        sign *= e.sign;
        m = e.image;
    }
    Ok(IterateNorms { mode, n, lognorm, final_mode: m, sign })
}

/// Quadratic-in-`N` fit of `-ln ||P^N e_mode||`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecayCertificate {
    /// `ln C` in `||P^N e|| ~ C exp(-beta N^2)`.
    pub ln_c: f64,
    pub beta: f64,
    pub r2: f64,
    pub passes: bool,
    /// Closed-form `beta` when the spectrum family provides one.
    pub analytic_beta: Option<f64>,
}

/// Fits `-lognorm(N) = a + beta N^2` over `N = 0..=n_max`; passes iff
/// `beta > 0` and `R^2 >= 0.999`.
pub fn decay_certificate(shift: &WeightedShift, mode: usize, n_max: usize) -> Result<DecayCertificate> {
    if n_max < 4 {
        return Err(Error::InvalidParameter(format!("decay certificate needs N_max >= 4, got {n_max}")));
    }
    let mut xs = Vec::with_capacity(n_max + 1);
    let mut ys = Vec::with_capacity(n_max + 1);
    for k in 0..=n_max {
        xs.push(k as f64);
        ys.push(-iterate_norm(shift, mode, k)?.lognorm);
    }
    let one = |_x: f64| 1.0;
    let sq = |x: f64| x * x;
    let f = least_squares(&xs, &ys, &[&one, &sq]).ok_or(Error::InvalidParameter("degenerate fit".into()))?;
    let (a, beta) = (f.coef[0], f.coef[1]);
    let r2 = if f.r2.is_nan() { 0.0 } else { f.r2 };
    Ok(DecayCertificate { ln_c: -a, beta, r2, passes: beta > 0.0 && r2 >= 0.999, analytic_beta: None })
}

/// `beta = 2 c T` for `lambda_n = c n`: the orbit of `e_2` climbs through
/// odd modes and step `m` costs `4 c T m`.
pub fn analytic_beta(spec: &Spectrum, t_half: f64) -> Option<f64> {
    match spec.family() {
        SpectrumFamily::Linear { c } => Some(2.0 * c * t_half),
        _ => None,
    }
}

/// Outcome of the ratio estimates at level `n`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RatioBounds {
    pub n: usize,
    pub k: usize,
    pub iterations: usize,
    /// `min_s -ln(||P^N e_1|| / ||P^N e_{2s}||) / n^2`.
    pub beta: f64,
    /// `max_{s1,s2} |ln(||P^N e_{2s1}|| / ||P^N e_{2s2}||)| / n^{3/2}`.
    pub gamma: f64,
    /// Both inequalities hold with the reported constants.
    pub holds: bool,
    /// `ln ||P^N e_{2s}||` for `s = n..=n+k`.
    pub lognorms: Vec<f64>,
    pub lognorm_e1: f64,
}

pub fn ceil_sqrt(n: usize) -> usize {
    let mut k = (n as f64).sqrt() as usize;
    while k * k < n {
        k += 1;
    }
    while k > 0 && (k - 1) * (k - 1) >= n {
        k -= 1;
    }
    k
}

/// Evaluates the ratio estimates with `N = 2n + ceil(sqrt n)` exactly in log space.
pub fn ratio_bounds_check(shift: &WeightedShift, n: usize) -> Result<RatioBounds> {
    if n == 0 {
        return Err(Error::InvalidParameter("level n must be positive".into()));
    }
    let k = ceil_sqrt(n);
    let big_n = 2 * n + k;
    let needed = 2 * big_n + 2;
    if shift.n_modes() < needed {
        return Err(Error::TruncationTooSmall { needed, available: shift.n_modes() });
    }
    let e1 = iterate_norm(shift, 1, big_n)?.lognorm;
    let mut lognorms = Vec::with_capacity(k + 1);
    for s in n..=n + k {
        lognorms.push(iterate_norm(shift, 2 * s, big_n)?.lognorm);
    }
    let n2 = (n * n) as f64;
    let beta = lognorms.iter().map(|l| -(e1 - l)).fold(f64::INFINITY, f64::min) / n2;
    let hi = lognorms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = lognorms.iter().cloned().fold(f64::INFINITY, f64::min);
    let gamma = (hi - lo) / (n as f64).powf(1.5);
    let holds = lognorms.iter().all(|l| e1 - l <= -beta * n2 * (1.0 - 1e-12)) && beta > 0.0;
    Ok(RatioBounds { n, k, iterations: big_n, beta, gamma, holds, lognorms, lognorm_e1: e1 })
}

/// Equalizing factors at level `n`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Equalizers {
    pub n: usize,
    /// `ln A_k(n)` for `k = 0..=ceil(sqrt n)`.
    pub ln_a: Vec<f64>,
    pub ln_b: f64,
    pub gamma: f64,
    /// `1 >= A_k >= exp(-2 gamma n^{3/2})` for every `k`.
    pub a_bounds_ok: bool,
    /// `max_k |ln(A_k ||P^N e_{2(n+k)}||) - ln B|`.
    pub max_equalized_dev: f64,
}

pub fn equalizers(shift: &WeightedShift, n: usize) -> Result<Equalizers> {
    let r = ratio_bounds_check(shift, n)?;
    let ln_b = r.lognorms.iter().cloned().fold(f64::INFINITY, f64::min);
    let ln_a: Vec<f64> = r.lognorms.iter().map(|l| ln_b - l).collect();
    let floor = -2.0 * r.gamma * (n as f64).powf(1.5);
    let a_bounds_ok = ln_a.iter().all(|&a| a <= 0.0 && a >= floor * (1.0 + 1e-12));
    let max_equalized_dev = ln_a
        .iter()
        .zip(&r.lognorms)
        .map(|(a, l)| (a + l - ln_b).abs())
        .fold(0.0, f64::max);
    Ok(Equalizers { n, ln_a, ln_b, gamma: r.gamma, a_bounds_ok, max_equalized_dev })
}

/// `gamma_1 <= -ln B(n) / n^2 <= gamma_2` over the given levels.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BBounds {
    pub levels: Vec<usize>,
    pub ln_b: Vec<f64>,
    pub gamma1: f64,
    pub gamma2: f64,
}

pub fn fit_b_bounds(shift: &WeightedShift, levels: &[usize]) -> Result<BBounds> {
    let mut ln_b = Vec::with_capacity(levels.len());
    for &n in levels {
        ln_b.push(equalizers(shift, n)?.ln_b);
    }
    let q: Vec<f64> = levels.iter().zip(&ln_b).map(|(&n, b)| -b / (n * n) as f64).collect();
    Ok(BBounds {
        levels: levels.to_vec(),
        ln_b,
        gamma1: q.iter().cloned().fold(f64::INFINITY, f64::min),
        gamma2: q.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Kick gain in both orientations of the exponential weight.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KickGain {
    /// `int theta(h) exp(lambda h) dh`: the propagation factor from `h` to 0.
    pub decay: f64,
    /// `int theta(h) exp(-lambda h) dh`, the weight as printed.
    pub printed: f64,
    /// Smallest `C` with `decay >= 2^{-C lambda}`; 0 when `decay >= 1`.
    pub fitted_c: f64,
    /// `decay <= 1`.
    pub decay_le_one: bool,
}

/// `int theta(h) exp(ln_factor(h)) dh` over `(-kappa, 0)`.
pub fn kick_gain_profile<F: Fn(f64) -> f64>(theta: &BumpFunction, kappa: f64, ln_factor: F) -> Result<f64> {
    let (a, b) = theta.support();
    if !(kappa > 0.0) || a < -kappa - 1e-12 || b > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "kick bump support [{a}, {b}] must lie in (-{kappa}, 0)"
        )));
    }
    let k = adaptive_simpson(|h| theta.value(h) * ln_factor(h).exp(), a, b, QUAD_TOL);
    if !(k > 0.0) {
        return Err(Error::EmptyWindow("kick support".into()));
    }
    Ok(k)
}

pub fn kick_gain(theta: &BumpFunction, lambda: f64, kappa: f64) -> Result<KickGain> {
    let decay = kick_gain_profile(theta, kappa, |h| lambda * h)?;
    let printed = kick_gain_profile(theta, kappa, |h| -lambda * h)?;
    let fitted_c = if decay >= 1.0 || lambda == 0.0 { 0.0 } else { -decay.log2() / lambda };
    Ok(KickGain { decay, printed, fitted_c, decay_le_one: decay <= 1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_spectrum;

    fn linear(n: usize) -> Spectrum {
        make_spectrum(SpectrumFamily::Linear { c: 1.0 }, n).unwrap()
    }

    #[test]
    fn predicted_multipliers_small_case() {
        let s = poincare_predicted(&linear(3), 1.0).unwrap();
        let e2 = s.entry(2).unwrap();
        assert_eq!((e2.image, e2.sign), (1, -1));
        assert!((e2.log_mu + 2.0).abs() < 1e-15);
        let m1 = s.minus[0].unwrap();
        assert_eq!(m1.image, 2);
        assert!((m1.log_mu + 1.5).abs() < 1e-15);
        let z = poincare_predicted(&linear(6), 0.0).unwrap();
        assert!(z.entries.iter().flatten().all(|e| e.log_mu == 0.0));
    }

    #[test]
    fn iterate_norm_examples() {
        let s = poincare_predicted(&linear(10), 1.0).unwrap();
        assert_eq!(iterate_norm(&s, 1, 0).unwrap().lognorm, 0.0);
        assert!((iterate_norm(&s, 2, 1).unwrap().lognorm + 2.0).abs() < 1e-15);
        assert!((iterate_norm(&s, 1, 1).unwrap().lognorm + 4.0).abs() < 1e-15);
        assert!(matches!(iterate_norm(&s, 1, 10), Err(Error::OrbitExitsTruncation { .. })));
    }

    #[test]
    fn epsilon_closed_form_and_scaling() {
        assert!((epsilon_for_active_measure(10.0).unwrap() - PI / 20.0).abs() < 1e-15);
        assert!(epsilon_for_active_measure(0.0).is_err());
        let a = PeriodicOperator::new(&linear(4), 5.0, 1.0, 0.8).unwrap();
        let b = PeriodicOperator::new(&linear(4), 10.0, 1.0, 0.8).unwrap();
        assert!((a.epsilon / b.epsilon - 2.0).abs() < 0.04);
    }

    #[test]
    fn ceil_sqrt_values() {
        let got: Vec<usize> = [1, 2, 4, 5, 9, 10, 16, 17].iter().map(|&n| ceil_sqrt(n)).collect();
        assert_eq!(got, [1, 2, 2, 3, 3, 4, 4, 5]);
    }

    #[test]
    fn kick_gain_limits() {
        let th = mollifier_bump(-1.0, 0.0, -0.9, -0.1, 4).unwrap();
        let k0 = kick_gain(&th, 0.0, 1.0).unwrap();
        let plain = adaptive_simpson(|h| th.value(h), -1.0, 0.0, 1e-13);
        assert!((k0.decay - plain).abs() < 1e-11 && (k0.printed - plain).abs() < 1e-11);
        let k = kick_gain(&th, 5.0, 1.0).unwrap();
        assert!(k.decay_le_one && k.printed > 1.0);
        assert!((2f64.powf(-k.fitted_c * 5.0) - k.decay).abs() < 1e-12);
    }

    fn unit(n: usize, j: usize) -> Vec<LogReal> {
        let mut w = alloc::vec![LogReal::ZERO; n];
        w[j] = LogReal::ONE;
        w
    }

    #[test]
    fn propagate_matches_numeric_monodromy() {
        let op = PeriodicOperator::new(&linear(8), 2.0, 1.0, 0.9).unwrap();
        let m = poincare_numeric(&op, 8, 1e-11).unwrap();
        for j in 0..8 {
            let mut w = unit(8, j);
            op.propagate(&mut w, 0.0, op.period()).unwrap();
            let scale = m.columns[j].iter().map(|x| x.ln_abs()).fold(f64::NEG_INFINITY, f64::max);
            for (a, b) in w.iter().zip(&m.columns[j]) {
                let d = (*a - *b).ln_abs();
                assert!(d <= scale + 1e-7_f64.ln(), "column {j}: {a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn propagate_splits_on_piece_boundaries() {
        let op = PeriodicOperator::new(&linear(6), 1.5, 1.0, 0.9).unwrap();
        let mut whole = unit(6, 1);
        op.propagate(&mut whole, 0.0, 2.0 * op.period()).unwrap();
        let mut parts = unit(6, 1);
        let cuts = [0.4 * op.t0, op.t0, op.t_half - op.t0, op.t_half + 0.3 * op.t0, op.period(), 2.0 * op.period()];
        let mut t = 0.0;
        for c in cuts {
            op.propagate(&mut parts, t, c).unwrap();
            t = c;
        }
        for (a, b) in whole.iter().zip(&parts) {
            assert_eq!(a.is_zero(), b.is_zero());
            if !a.is_zero() {
                assert!((a.logmag - b.logmag).abs() < 1e-9 && a.sign == b.sign);
            }
        }
    }

    #[test]
    fn last_cut_is_a_piece_boundary() {
        let op = PeriodicOperator::new(&linear(4), 1.0, 1.0, 0.9).unwrap();
        assert_eq!(op.last_cut(0.5 * op.t0), 0.0);
        assert!((op.last_cut(0.5) - op.t0).abs() < 1e-15);
        assert!((op.last_cut(1.0 - 0.5 * op.t0) - (1.0 - op.t0)).abs() < 1e-15);
        assert_eq!(op.last_cut(1.0), 1.0);
    }
}
