//! Smooth cut-offs built from the mollifier `phi(x) = exp(-1/(1-x^2))`.
//!
//! A transition `sigma(u)` rises from 0 at `u <= 0` to 1 at `u >= 1` and is
//! the normalized integral of `phi(2u - 1)`. Its derivatives use the closed
//! form `phi^(j)(x) = P_j(x) (1-x^2)^(-2j) phi(x)` with
//! `P_{j+1} = (1-x^2)^2 P_j' + 4jx(1-x^2) P_j - 2x P_j`.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::quad::GaussLegendre;
use crate::{Error, Result};

#[cfg(not(feature = "std"))]
use num_traits::Float;

const NODES: usize = 16;
/// Highest derivative order any transition can evaluate.
pub const MAX_ORDER: usize = 16;

/// The normalized mollifier transition and its derivative polynomials.
#[derive(Debug, Clone)]
pub struct SmoothStep {
    rule: GaussLegendre,
    /// `int_{-1}^{1} phi`.
    z: f64,
    polys: Vec<Vec<f64>>,
    /// `int_{-1}^{x_i} phi` on a uniform grid of `[-1, 0]`.
    table: Vec<f64>,
}

/// Cells of the cumulative table on `[-1, 0]`.
const TABLE_CELLS: usize = 512;

fn phi(x: f64) -> f64 {
    let d = 1.0 - x * x;
    if d <= 0.0 {
        0.0
    } else {
        (-1.0 / d).exp()
    }
}

fn poly_eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = alloc::vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = alloc::vec![0.0; a.len().max(b.len())];
    for (i, x) in a.iter().enumerate() {
        out[i] += x;
    }
    for (i, x) in b.iter().enumerate() {
        out[i] += x;
    }
    out
}

fn poly_deriv(a: &[f64]) -> Vec<f64> {
    if a.len() <= 1 {
        return alloc::vec![0.0];
    }
    a.iter().enumerate().skip(1).map(|(i, c)| c * i as f64).collect()
}

impl SmoothStep {
    pub fn new() -> Self {
        let rule = GaussLegendre::new(NODES);
        let one_minus_sq = [1.0, 0.0, -1.0];
        let one_minus_sq2 = poly_mul(&one_minus_sq, &one_minus_sq);
        let mut polys = alloc::vec![alloc::vec![1.0]];
        for j in 0..MAX_ORDER {
            let p = &polys[j];
            let t1 = poly_mul(&one_minus_sq2, &poly_deriv(p));
            let t2 = poly_mul(&poly_mul(&[0.0, 4.0 * j as f64], &one_minus_sq), p);
            let t3 = poly_mul(&[0.0, -2.0], p);
            polys.push(poly_add(&poly_add(&t1, &t2), &t3));
        }
        let mut table = alloc::vec![0.0; TABLE_CELLS + 1];
        let hcell = 1.0 / TABLE_CELLS as f64;
        for i in 1..=TABLE_CELLS {
            let a = -1.0 + (i - 1) as f64 * hcell;
            table[i] = table[i - 1] + rule.composite(&phi, a, a + hcell, 1);
        }
        let mut s = SmoothStep { rule, z: 1.0, polys, table };
        s.z = 2.0 * s.half_integral(0.0);
        s
    }

    /// `int_{-1}^{x} phi` for `x <= 0`.
    fn half_integral(&self, x: f64) -> f64 {
        if x <= -1.0 {
            return 0.0;
        }
        let pos = (x + 1.0) * TABLE_CELLS as f64;
        let i = (pos.floor() as usize).min(TABLE_CELLS);
        let xi = -1.0 + i as f64 / TABLE_CELLS as f64;
        self.table[i] + self.rule.composite(&phi, xi, x, 1)
    }

    /// `int_{-1}^{x} phi / int_{-1}^{1} phi`.
    fn cumulative(&self, x: f64) -> f64 {
        if x <= -1.0 {
            0.0
        } else if x >= 1.0 {
            1.0
        } else if x <= 0.0 {
            self.half_integral(x) / self.z
        } else {
            1.0 - self.half_integral(-x) / self.z
        }
    }

    /// `sigma(u)`: exactly 0 for `u <= 0`, exactly 1 for `u >= 1`.
    pub fn value(&self, u: f64) -> f64 {
        if u <= 0.0 {
            0.0
        } else if u >= 1.0 {
            1.0
        } else {
            self.cumulative(2.0 * u - 1.0)
        }
    }

    /// `phi^(j)(x)`.
    pub fn mollifier_derivative(&self, x: f64, j: usize) -> f64 {
        let d = 1.0 - x * x;
        if d <= 0.0 {
            return 0.0;
        }
        let p = poly_eval(&self.polys[j], x);
        if p == 0.0 {
            return 0.0;
        }
        p * (-1.0 / d - 2.0 * j as f64 * d.ln()).exp()
    }

    /// `sigma^(j)(u)`; `j = 0` is the value.
    pub fn derivative(&self, u: f64, j: usize) -> f64 {
        assert!(j <= MAX_ORDER + 1, "derivative order {j} exceeds {}", MAX_ORDER + 1);
        if j == 0 {
            return self.value(u);
        }
        if u <= 0.0 || u >= 1.0 {
            return 0.0;
        }
        let scale = (2.0f64).powi(j as i32) / self.z;
        scale * self.mollifier_derivative(2.0 * u - 1.0, j - 1)
    }

    /// `int_{-1}^{1} phi`.
    pub fn normalization(&self) -> f64 {
        self.z
    }
}

impl Default for SmoothStep {
    fn default() -> Self {
        Self::new()
    }
}

/// A `C^infinity` function equal to 0 outside `[a, b]`, 1 on
/// `[plateau_lo, plateau_hi]`, with mollifier transitions in between.
#[derive(Debug, Clone)]
pub struct BumpFunction {
    pub a: f64,
    pub b: f64,
    pub plateau_lo: f64,
    pub plateau_hi: f64,
    pub order_cap: usize,
    step: Arc<SmoothStep>,
}

/// Builds a bump; needs `a < plateau_lo <= plateau_hi < b`.
pub fn mollifier_bump(a: f64, b: f64, plateau_lo: f64, plateau_hi: f64, order_cap: usize) -> Result<BumpFunction> {
    BumpFunction::with_step(a, b, plateau_lo, plateau_hi, order_cap, Arc::new(SmoothStep::new()))
}

impl BumpFunction {
    /// As [`mollifier_bump`], sharing an existing transition table.
    pub fn with_step(
        a: f64,
        b: f64,
        plateau_lo: f64,
        plateau_hi: f64,
        order_cap: usize,
        step: Arc<SmoothStep>,
    ) -> Result<Self> {
        if !(a < plateau_lo && plateau_lo <= plateau_hi && plateau_hi < b) || !(b - a).is_finite() {
            return Err(Error::InvalidParameter(format!(
                "bump needs a < lo <= hi < b, got a={a}, lo={plateau_lo}, hi={plateau_hi}, b={b}"
            )));
        }
        if order_cap > MAX_ORDER {
            return Err(Error::InvalidParameter(format!("order cap {order_cap} exceeds {MAX_ORDER}")));
        }
        Ok(BumpFunction { a, b, plateau_lo, plateau_hi, order_cap, step })
    }

    pub fn value(&self, x: f64) -> f64 {
        if x <= self.a || x >= self.b {
            0.0
        } else if x < self.plateau_lo {
            self.step.value((x - self.a) / (self.plateau_lo - self.a))
        } else if x <= self.plateau_hi {
            1.0
        } else {
            self.step.value((self.b - x) / (self.b - self.plateau_hi))
        }
    }

    /// `j`-th derivative, `j <= order_cap`.
    pub fn derivative(&self, x: f64, j: usize) -> f64 {
        assert!(j <= self.order_cap, "order {j} above cap {}", self.order_cap);
        if j == 0 {
            return self.value(x);
        }
        if x <= self.a || x >= self.b || (x >= self.plateau_lo && x <= self.plateau_hi) {
            0.0
        } else if x < self.plateau_lo {
            let w = self.plateau_lo - self.a;
            self.step.derivative((x - self.a) / w, j) / w.powi(j as i32)
        } else {
            let w = self.b - self.plateau_hi;
            let sgn = if j % 2 == 0 { 1.0 } else { -1.0 };
            sgn * self.step.derivative((self.b - x) / w, j) / w.powi(j as i32)
        }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    /// `max_{j <= k} sup |f^(j)|` sampled at `samples` uniform points of the support.
    pub fn sampled_ck_norm(&self, k: usize, samples: usize) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..=samples {
            let x = self.a + (self.b - self.a) * i as f64 / samples as f64;
            for j in 0..=k {
                m = m.max(self.derivative(x, j).abs());
            }
        }
        m
    }
}

/// Declared growth law for a cut-off family's `C^k` norms.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BoundLaw {
    /// `||psi_n||_{C^k} <= C_k |I_n|^{-k}`.
    Eq44 { k: usize },
    /// `||psi_n||_{C^R} <= M_R 2^{2Rn}` with `n` the level of each member
    /// (`levels` empty means level = member index + 1).
    Eq318 { r: usize, levels: Vec<usize> },
}

/// Samples per interval for the empirical constants.
pub const BOUND_SAMPLES: usize = 1 << 12;
/// Members whose normalized constant exceeds the smallest one by more than
/// this factor are flagged.
pub const BOUND_SLACK: f64 = 4.0;

/// Cut-offs over disjoint intervals, each equal to 1 at its own anchor and
/// vanishing on every other interval.
#[derive(Debug, Clone)]
pub struct CutoffFamily {
    pub intervals: Vec<(f64, f64)>,
    pub anchors: Vec<f64>,
    pub members: Vec<BumpFunction>,
    pub law: BoundLaw,
    /// Per-member sampled `C^k` norm divided by the law's growth factor.
    pub ck_constants: Vec<f64>,
    /// Largest per-member constant.
    pub constant: f64,
    /// Members whose constant breaks the uniform law (see [`BOUND_SLACK`]).
    pub violations: Vec<usize>,
}

impl CutoffFamily {
    /// Index of the member whose interval contains `x`.
    pub fn locate(&self, x: f64) -> Option<usize> {
        let i = self.intervals.partition_point(|iv| iv.1 <= x);
        (i < self.intervals.len() && self.intervals[i].0 < x).then_some(i)
    }

    /// `psi_i(x)`; cheap because at most one member is nonzero at `x`.
    pub fn member_value(&self, i: usize, x: f64) -> f64 {
        self.members[i].value(x)
    }
}

/// Builds a family with plateau `[s - h, s + h]`, `h = min(s - l, r - s)/2`,
/// and support equal to each interval. Intervals must be sorted and disjoint.
pub fn build_cutoff_family(intervals: &[(f64, f64)], anchors: &[f64], law: BoundLaw) -> Result<CutoffFamily> {
    if intervals.len() != anchors.len() {
        return Err(Error::InvalidParameter(format!(
            "{} intervals but {} anchors",
            intervals.len(),
            anchors.len()
        )));
    }
    let mut order: Vec<usize> = (0..intervals.len()).collect();
    order.sort_by(|&i, &j| intervals[i].0.partial_cmp(&intervals[j].0).unwrap_or(core::cmp::Ordering::Equal));
    for w in order.windows(2) {
        if intervals[w[0]].1 > intervals[w[1]].0 {
            return Err(Error::OverlappingIntervals { first: w[0], second: w[1] });
        }
    }
    if order.iter().enumerate().any(|(i, &j)| i != j) {
        return Err(Error::InvalidParameter("intervals must be given in increasing order".into()));
    }
    let step = Arc::new(SmoothStep::new());
    let (order_k, levels) = match &law {
        BoundLaw::Eq44 { k } => (*k, Vec::new()),
        BoundLaw::Eq318 { r, levels } => (*r, levels.clone()),
    };
    let mut members = Vec::with_capacity(intervals.len());
    let mut ck = Vec::with_capacity(intervals.len());
    for (i, (&(l, r), &s)) in intervals.iter().zip(anchors).enumerate() {
        if !(l < s && s < r) {
            return Err(Error::AnchorOutside { index: i });
        }
        let h = 0.5 * (s - l).min(r - s);
        let m = BumpFunction::with_step(l, r, s - h, s + h, order_k, step.clone())?;
        let norm = m.sampled_ck_norm(order_k, BOUND_SAMPLES);
        let c = match &law {
            BoundLaw::Eq44 { k } => norm * (r - l).powi(*k as i32),
            BoundLaw::Eq318 { r: rr, .. } => {
                let n = levels.get(i).copied().unwrap_or(i + 1);
                norm / (2.0f64).powf(2.0 * *rr as f64 * n as f64)
            }
        };
        members.push(m);
        ck.push(c);
    }
    let constant = ck.iter().copied().fold(0.0, f64::max);
    let floor = ck.iter().copied().fold(f64::INFINITY, f64::min);
    let violations = ck
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > BOUND_SLACK * floor)
        .map(|(i, _)| i)
        .collect();
    Ok(CutoffFamily {
        intervals: intervals.to_vec(),
        anchors: anchors.to_vec(),
        members,
        law,
        ck_constants: ck,
        constant,
        violations,
    })
}

/// Consecutive intervals starting at `start` with the given lengths.
pub fn intervals_from_lengths(start: f64, lengths: &[f64]) -> Vec<(f64, f64)> {
    let mut lo = start;
    lengths
        .iter()
        .map(|&a| {
            let iv = (lo, lo + a);
            lo += a;
            iv
        })
        .collect()
}

pub fn midpoints(intervals: &[(f64, f64)]) -> Vec<f64> {
    intervals.iter().map(|&(l, r)| 0.5 * (l + r)).collect()
}

/// `A_n = c 2^{-n}`, `n = 1..=count`.
pub fn geometric_lengths(c: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|n| c * (0.5f64).powi(n as i32)).collect()
}

/// `A_n = c / n^2`, with `c` chosen so that the `n_max` lengths sum to
/// `2 pi - 0.1`.
pub fn default_inverse_square_lengths(n_max: usize) -> Vec<f64> {
    let s: f64 = (1..=n_max).map(|n| 1.0 / (n * n) as f64).sum();
    let c = (2.0 * PI - 0.1) / s;
    (1..=n_max).map(|n| c / (n * n) as f64).collect()
}

/// A `2 tau`-periodic smoothed square wave: on `[0, tau]`
/// `x(t) = -N sigma(t/delta) sigma((tau-t)/delta)` with `delta = (1-f) tau`,
/// and `x(t + tau) = -x(t)`. It is odd and satisfies `x(tau - t) = x(t)`.
#[derive(Debug, Clone)]
pub struct PeriodicDrive {
    pub amplitude: f64,
    pub tau: f64,
    pub plateau_fraction: f64,
    delta: f64,
    step: Arc<SmoothStep>,
}

pub fn periodic_drive(amplitude: f64, tau: f64, plateau_fraction: f64) -> Result<PeriodicDrive> {
    if !(amplitude > 0.0) || !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "drive needs positive amplitude and tau, got {amplitude}, {tau}"
        )));
    }
    if !(plateau_fraction > 0.5 && plateau_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "plateau fraction {plateau_fraction} must lie in (0.5, 1)"
        )));
    }
    Ok(PeriodicDrive {
        amplitude,
        tau,
        plateau_fraction,
        delta: (1.0 - plateau_fraction) * tau,
        step: Arc::new(SmoothStep::new()),
    })
}

impl PeriodicDrive {
    /// Reduces `t` to `[0, 2 tau)` and reports the half (`-1` first, `+1` second)
    /// together with the offset inside it.
    fn phase(&self, t: f64) -> (f64, f64) {
        let p = 2.0 * self.tau;
        let mut r = t % p;
        if r < 0.0 {
            r += p;
        }
        if r < self.tau {
            (-1.0, r)
        } else {
            (1.0, r - self.tau)
        }
    }

    fn envelope(&self, s: f64, j: usize) -> f64 {
        let d = self.delta;
        let u = s / d;
        let v = (self.tau - s) / d;
        match j {
            0 => self.step.value(u) * self.step.value(v),
            1 => (self.step.derivative(u, 1) * self.step.value(v) - self.step.value(u) * self.step.derivative(v, 1)) / d,
            _ => unreachable!(),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        let (sgn, s) = self.phase(t);
        sgn * self.amplitude * self.envelope(s, 0)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let (sgn, s) = self.phase(t);
        sgn * self.amplitude * self.envelope(s, 1)
    }

    /// Width of each transition.
    pub fn transition_width(&self) -> f64 {
        self.delta
    }

    /// First time in `(0, tau/2)` with `|x| = amplitude / 4`, by bisection.
    pub fn quarter_time(&self) -> f64 {
        let target = 0.25 * self.amplitude;
        let (mut lo, mut hi) = (0.0, 0.5 * self.tau);
        while hi - lo > 1e-13 * self.tau.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if self.value(mid).abs() < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Right-hand side of `x' = -x(x^2+y^2-1), y' = -y(x^2+y^2-1)`.
pub fn planar_rhs(x: f64, y: f64) -> (f64, f64) {
    let g = x * x + y * y - 1.0;
    (-x * g, -y * g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::adaptive_simpson;

    #[test]
    fn normalization_matches_adaptive_quadrature() {
        let s = SmoothStep::new();
        let z = adaptive_simpson(phi, -1.0, 1.0, 1e-15);
        assert!((s.normalization() - z).abs() < 1e-13, "{} vs {z}", s.normalization());
        assert!((s.normalization() - 0.443_993_816_168_079_4).abs() < 1e-12);
    }

    #[test]
    fn step_values_against_quadrature() {
        let s = SmoothStep::new();
        for &u in &[0.05, 0.3, 0.5, 0.77, 0.99] {
            let x = 2.0 * u - 1.0;
            let oracle = adaptive_simpson(phi, -1.0, x, 1e-15) / s.normalization();
            assert!((s.value(u) - oracle).abs() < 1e-12, "u={u}");
        }
        assert_eq!(s.value(0.0), 0.0);
        assert_eq!(s.value(1.0), 1.0);
        assert!((s.value(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn derivative_polynomials_match_finite_differences() {
        let s = SmoothStep::new();
        for j in 0..5 {
            for &x in &[-0.6, -0.1, 0.3, 0.7] {
                let h = 1e-5;
                let fd = (s.mollifier_derivative(x + h, j) - s.mollifier_derivative(x - h, j)) / (2.0 * h);
                let d = s.mollifier_derivative(x, j + 1);
                assert!((fd - d).abs() <= 1e-5 * (1.0 + d.abs()), "j={j} x={x}: {fd} vs {d}");
            }
        }
    }

    #[test]
    fn bump_basic_values() {
        let b = mollifier_bump(0.0, 4.0, 1.0, 2.0, 3).unwrap();
        assert_eq!(b.value(1.5), 1.0);
        assert_eq!(b.value(-0.1), 0.0);
        assert_eq!(b.value(4.5), 0.0);
        assert_eq!(b.value(4.0), 0.0);
        let ramp = adaptive_simpson(|x| b.derivative(x, 1), 0.0, 1.0, 1e-13);
        assert!((ramp - 1.0).abs() < 1e-10);
        assert!(mollifier_bump(1.0, 0.0, 0.5, 0.5, 2).is_err());
    }

    #[test]
    fn family_kronecker_and_scaling() {
        let iv = [(0.0, 1.0), (2.0, 3.0)];
        let f = build_cutoff_family(&iv, &[0.5, 2.5], BoundLaw::Eq44 { k: 1 }).unwrap();
        assert_eq!(f.member_value(0, 2.5), 0.0);
        assert_eq!(f.member_value(1, 2.5), 1.0);
        assert_eq!(f.member_value(0, 0.5), 1.0);
        assert!(f.violations.is_empty());
        assert!(matches!(
            build_cutoff_family(&[(0.0, 1.0), (0.5, 2.0)], &[0.2, 1.5], BoundLaw::Eq44 { k: 1 }),
            Err(Error::OverlappingIntervals { .. })
        ));
        assert!(matches!(
            build_cutoff_family(&[(0.0, 1.0)], &[1.0], BoundLaw::Eq44 { k: 1 }),
            Err(Error::AnchorOutside { index: 0 })
        ));
    }

    #[test]
    fn first_derivative_scales_inversely_with_length() {
        let lens = [1.0, 0.5, 0.25];
        let iv = intervals_from_lengths(0.0, &lens);
        let f = build_cutoff_family(&iv, &midpoints(&iv), BoundLaw::Eq44 { k: 1 }).unwrap();
        // independent dense sampling of the first derivative only
        let sup1: Vec<f64> = f
            .members
            .iter()
            .map(|m| {
                (0..=4096)
                    .map(|i| m.a + (m.b - m.a) * i as f64 / 4096.0)
                    .map(|x| m.derivative(x, 1).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        let c1 = sup1[0] * lens[0];
        for (s, a) in sup1.iter().zip(lens) {
            let ratio = s / (c1 / a);
            assert!((0.5..=2.0).contains(&ratio), "{ratio}");
        }
    }

    #[test]
    fn geometric_splitting_stays_below_circle() {
        let l = geometric_lengths(1.0, 40);
        let s: f64 = l.iter().sum();
        assert!(s < 1.0 && s > 1.0 - 1e-11 && s < 2.0 * PI);
        let d = default_inverse_square_lengths(100);
        assert!((d.iter().sum::<f64>() - (2.0 * PI - 0.1)).abs() < 1e-12);
    }

    #[test]
    fn drive_symmetries_and_extremes() {
        let d = periodic_drive(2.0, 5.0, 0.8).unwrap();
        assert_eq!(d.value(0.0), 0.0);
        assert_eq!(d.value(2.5), -2.0);
        assert_eq!(d.value(-2.5), 2.0);
        let mut worst: f64 = 0.0;
        for i in 0..2000 {
            let t = -10.0 + 20.0 * i as f64 / 2000.0;
            worst = worst.max((d.value(-t) + d.value(t)).abs());
            worst = worst.max((d.value(5.0 - t) - d.value(t)).abs());
            worst = worst.max((d.value(t + 5.0) + d.value(t)).abs());
        }
        assert!(worst <= 1e-12, "{worst}");
        assert!((d.value(5.0 - 0.3) - d.value(0.3)).abs() <= 1e-12);
    }

    #[test]
    fn drive_time_near_extremes() {
        let d = periodic_drive(1.0, 4.0, 0.75).unwrap();
        let n = 40_000;
        let near = (0..n)
            .filter(|i| d.value(4.0 * (*i as f64 + 0.5) / n as f64).abs() >= 0.5)
            .count();
        assert!(near as f64 / n as f64 >= 0.75 - 1e-3);
        let t0 = d.quarter_time();
        assert!((d.value(t0).abs() - 0.25).abs() < 1e-11);
    }

    #[test]
    fn drive_derivative_matches_finite_difference() {
        let d = periodic_drive(1.5, 3.0, 0.7).unwrap();
        for &t in &[0.1, 0.4, 0.8, 2.6, 3.3] {
            let h = 1e-6;
            let fd = (d.value(t + h) - d.value(t - h)) / (2.0 * h);
            assert!((fd - d.derivative(t)).abs() < 1e-6, "t={t}");
        }
    }

    #[test]
    fn planar_rhs_examples() {
        assert_eq!(planar_rhs(1.0, 0.0), (0.0, 0.0));
        assert_eq!(planar_rhs(0.0, 0.0), (0.0, 0.0));
        let (a, b) = planar_rhs(0.5, 0.0);
        assert!((a - 0.375).abs() < 1e-15 && b == 0.0);
    }
}
