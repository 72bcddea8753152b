//! Covering numbers and dimension estimates on point clouds in
//! `R^p x H^s`, with mode coordinates stored in log form.
//!
//! Every scale is passed as `ln eps`. Distances are evaluated in plain
//! `f64` when all weighted coordinates sit comfortably inside the normal
//! range, and coordinate by coordinate in log arithmetic otherwise.

use alloc::format;
use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::fit::{fit_line, local_slopes};
use crate::logreal::{log_sum_exp, LogReal};
use crate::modevec::LogModeVector;
use crate::spectral::Spectrum;
use crate::{Error, Result};

#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Where a point came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PointTag {
    Plain,
    /// Planar disk sample with zero mode part.
    Cone,
    Equilibrium { n: usize },
    Segment { n: usize, j: usize },
    Vertex { n: usize, p: usize },
    /// Read from line `line` of an input file.
    File { line: usize },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CloudPoint {
    pub planar: Vec<f64>,
    pub modes: LogModeVector,
    pub tag: PointTag,
}

/// Points of `R^planar_dims x H^s`. Planar coordinates have weight 1, mode
/// `n` has weight `lambda_n^{s/2}`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PointCloud {
    pub planar_dims: usize,
    /// `ln lambda_n` for `n = 1..`.
    pub ln_lambda: Vec<f64>,
    pub s: f64,
    points: Vec<CloudPoint>,
}

/// Below this `|ln|` every weighted coordinate fits plain `f64` arithmetic.
const FAST_LN_RANGE: f64 = 600.0;
/// Relative slack on `d <= eps` comparisons.
const LN_SLACK: f64 = 1e-12;
/// Above this size neighbour lists use a hash grid when possible.
const ALL_PAIRS_MAX: usize = 2000;
/// Largest cloud accepted by the exhaustive cover.
pub const EXACT_MAX: usize = 24;

impl PointCloud {
    pub fn new(planar_dims: usize, ln_lambda: Vec<f64>, s: f64) -> Self {
        PointCloud { planar_dims, ln_lambda, s, points: Vec::new() }
    }

    /// Cloud over the eigenvalues of `spec`.
    pub fn for_spectrum(planar_dims: usize, spec: &Spectrum, s: f64) -> Self {
        Self::new(planar_dims, spec.ln_values(), s)
    }

    pub fn push(&mut self, planar: Vec<f64>, modes: LogModeVector, tag: PointTag) -> Result<()> {
        if planar.len() != self.planar_dims {
            return Err(Error::InvalidParameter(format!(
                "point has {} planar coordinates, cloud expects {}",
                planar.len(),
                self.planar_dims
            )));
        }
        if planar.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("planar coordinate is not finite".into()));
        }
        if modes.max_mode() > self.ln_lambda.len() {
            return Err(Error::TruncationTooSmall { needed: modes.max_mode(), available: self.ln_lambda.len() });
        }
        if modes.entries().iter().any(|(_, x)| !x.logmag.is_finite()) {
            return Err(Error::InvalidParameter("mode coordinate is not finite".into()));
        }
        self.points.push(CloudPoint { planar, modes, tag });
        Ok(())
    }

    pub fn points(&self) -> &[CloudPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Same points measured in `H^s`.
    pub fn with_s(&self, s: f64) -> Self {
        let mut c = self.clone();
        c.s = s;
        c
    }

    /// Drops the planar block (the projection onto the mode part).
    pub fn project_modes(&self) -> Self {
        PointCloud {
            planar_dims: 0,
            ln_lambda: self.ln_lambda.clone(),
            s: self.s,
            points: self
                .points
                .iter()
                .map(|p| CloudPoint { planar: Vec::new(), modes: p.modes.clone(), tag: p.tag })
                .collect(),
        }
    }

    /// Keeps only the listed modes and planar coordinates.
    pub fn restrict(&self, keep_planar: &[usize], keep_mode: &dyn Fn(usize) -> bool) -> Self {
        PointCloud {
            planar_dims: keep_planar.len(),
            ln_lambda: self.ln_lambda.clone(),
            s: self.s,
            points: self
                .points
                .iter()
                .map(|p| CloudPoint {
                    planar: keep_planar.iter().map(|&i| p.planar[i]).collect(),
                    modes: p.modes.restrict(keep_mode),
                    tag: p.tag,
                })
                .collect(),
        }
    }

    /// Every point multiplied by `exp(l)`.
    pub fn scaled_ln(&self, l: f64) -> Self {
        let f = l.exp();
        PointCloud {
            planar_dims: self.planar_dims,
            ln_lambda: self.ln_lambda.clone(),
            s: self.s,
            points: self
                .points
                .iter()
                .map(|p| CloudPoint {
                    planar: p.planar.iter().map(|x| x * f).collect(),
                    modes: p.modes.scale_ln(l),
                    tag: p.tag,
                })
                .collect(),
        }
    }

    /// Concatenation of two clouds over the same coordinates.
    pub fn union(&self, other: &PointCloud) -> Result<Self> {
        if self.planar_dims != other.planar_dims {
            return Err(Error::InvalidParameter("planar dimensions differ".into()));
        }
        let mut c = self.clone();
        if other.ln_lambda.len() > c.ln_lambda.len() {
            c.ln_lambda = other.ln_lambda.clone();
        }
        c.points.extend(other.points.iter().cloned());
        Ok(c)
    }

    fn ln_weight(&self, n: usize) -> f64 {
        0.5 * self.s * self.ln_lambda[n - 1]
    }

    /// Exact `ln d(i, j)`; `-inf` for coincident points.
    pub fn ln_distance(&self, i: usize, j: usize) -> f64 {
        let p = PreparedCloud::exact(self);
        p.ln_dist(i, j)
    }

    /// `ln ||x_i||` in the cloud's norm.
    pub fn ln_norm(&self, i: usize) -> f64 {
        let p = &self.points[i];
        let mut terms: Vec<f64> = p.planar.iter().filter(|x| **x != 0.0).map(|x| 2.0 * x.abs().ln()).collect();
        terms.extend(p.modes.entries().iter().map(|&(n, x)| 2.0 * (x.logmag + self.ln_weight(n))));
        0.5 * log_sum_exp(&terms)
    }

    pub fn prepare(&self) -> PreparedCloud {
        PreparedCloud::new(self)
    }
}

/// Sparse weighted coordinates of a cloud, ready for distance queries.
#[derive(Debug, Clone)]
pub struct PreparedCloud {
    repr: Repr,
    n: usize,
}

#[derive(Debug, Clone)]
enum Repr {
    /// `(coordinate, weighted value)` sorted by coordinate.
    Fast(Vec<Vec<(usize, f64)>>),
    Exact(Vec<Vec<(usize, LogReal)>>),
}

fn weighted_log_coords(c: &PointCloud) -> Vec<Vec<(usize, LogReal)>> {
    c.points
        .iter()
        .map(|p| {
            let mut v: Vec<(usize, LogReal)> = p
                .planar
                .iter()
                .enumerate()
                .filter(|(_, x)| **x != 0.0)
                .map(|(i, &x)| (i, LogReal::from_f64(x)))
                .collect();
            v.extend(
                p.modes
                    .entries()
                    .iter()
                    .map(|&(n, x)| (c.planar_dims + n - 1, x.scale_ln(c.ln_weight(n)))),
            );
            v
        })
        .collect()
}

impl PreparedCloud {
    pub fn new(c: &PointCloud) -> Self {
        let coords = weighted_log_coords(c);
        let fast = coords
            .iter()
            .all(|p| p.iter().all(|(_, x)| x.logmag.abs() <= FAST_LN_RANGE));
        let n = coords.len();
        if fast {
            let f = coords
                .into_iter()
                .map(|p| p.into_iter().map(|(i, x)| (i, x.to_f64())).collect())
                .collect();
            PreparedCloud { repr: Repr::Fast(f), n }
        } else {
            PreparedCloud { repr: Repr::Exact(coords), n }
        }
    }

    /// Always uses log arithmetic.
    pub fn exact(c: &PointCloud) -> Self {
        let coords = weighted_log_coords(c);
        PreparedCloud { n: coords.len(), repr: Repr::Exact(coords) }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn is_fast(&self) -> bool {
        matches!(self.repr, Repr::Fast(_))
    }

    /// `ln d(i, j)`.
    pub fn ln_dist(&self, i: usize, j: usize) -> f64 {
        match &self.repr {
            Repr::Fast(v) => 0.5 * sq_dist(&v[i], &v[j]).ln(),
            Repr::Exact(v) => {
                let (a, b) = (&v[i], &v[j]);
                let mut terms = Vec::with_capacity(a.len() + b.len());
                let (mut x, mut y) = (0, 0);
                while x < a.len() || y < b.len() {
                    let d = if y >= b.len() || (x < a.len() && a[x].0 < b[y].0) {
                        x += 1;
                        a[x - 1].1
                    } else if x >= a.len() || b[y].0 < a[x].0 {
                        y += 1;
                        b[y - 1].1
                    } else {
                        x += 1;
                        y += 1;
                        a[x - 1].1 - b[y - 1].1
                    };
                    if !d.is_zero() {
                        terms.push(2.0 * d.logmag);
                    }
                }
                0.5 * log_sum_exp(&terms)
            }
        }
    }

    /// `d(i, j) <= eps`.
    pub fn within(&self, i: usize, j: usize, ln_eps: f64) -> bool {
        let bound = ln_eps + LN_SLACK * ln_eps.abs().max(1.0);
        match &self.repr {
            _ if i == j => true,
            Repr::Fast(v) => sq_dist(&v[i], &v[j]) <= (2.0 * bound).exp(),
            Repr::Exact(_) => self.ln_dist(i, j) <= bound,
        }
    }

    /// Bucket grid over the two widest coordinates of `subset`, when the
    /// subset is large enough to need one.
    fn grid(&self, subset: &[usize], ln_eps: f64) -> Option<Grid> {
        let Repr::Fast(v) = &self.repr else { return None };
        if subset.len() <= ALL_PAIRS_MAX {
            return None;
        }
        Some(Grid::new(v, subset, widest_axes(v, subset), ln_eps.exp()))
    }

    /// For every `i` in `subset`, positions (into `subset`) of the points
    /// within `eps`, itself included, in increasing order.
    pub fn neighbours(&self, subset: &[usize], ln_eps: f64) -> Vec<Vec<usize>> {
        let m = subset.len();
        let mut nb: Vec<Vec<usize>> = (0..m).map(|i| alloc::vec![i]).collect();
        if let Some(grid) = self.grid(subset, ln_eps) {
            for i in 0..m {
                for j in grid.around(i) {
                    if j > i && self.within(subset[i], subset[j], ln_eps) {
                        nb[i].push(j);
                        nb[j].push(i);
                    }
                }
            }
        } else {
            for i in 0..m {
                for j in i + 1..m {
                    if self.within(subset[i], subset[j], ln_eps) {
                        nb[i].push(j);
                        nb[j].push(i);
                    }
                }
            }
        }
        for l in nb.iter_mut() {
            l.sort_unstable();
        }
        nb
    }
}

struct Grid {
    axes: (usize, usize),
    eps: f64,
    keys: Vec<(i64, i64)>,
    cells: BTreeMap<(i64, i64), Vec<usize>>,
}

impl Grid {
    fn new(v: &[Vec<(usize, f64)>], subset: &[usize], axes: (usize, usize), eps: f64) -> Self {
        let mut g = Grid { axes, eps, keys: Vec::with_capacity(subset.len()), cells: BTreeMap::new() };
        for (i, &p) in subset.iter().enumerate() {
            let k = g.key(&v[p]);
            g.keys.push(k);
            g.cells.entry(k).or_default().push(i);
        }
        g
    }

    fn key(&self, p: &[(usize, f64)]) -> (i64, i64) {
        ((coord(p, self.axes.0) / self.eps).floor() as i64, (coord(p, self.axes.1) / self.eps).floor() as i64)
    }

    /// Positions in the 3x3 block of cells around `key`.
    fn around_key(&self, (kx, ky): (i64, i64)) -> impl Iterator<Item = usize> + '_ {
        (-1..=1)
            .flat_map(move |dx| (-1..=1).map(move |dy| (kx + dx, ky + dy)))
            .filter_map(|k| self.cells.get(&k))
            .flatten()
            .copied()
    }

    fn around(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.around_key(self.keys[i])
    }
}

fn sq_dist(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let (mut x, mut y) = (0, 0);
    let mut s = 0.0;
    while x < a.len() || y < b.len() {
        let d = if y >= b.len() || (x < a.len() && a[x].0 < b[y].0) {
            x += 1;
            a[x - 1].1
        } else if x >= a.len() || b[y].0 < a[x].0 {
            y += 1;
            b[y - 1].1
        } else {
            x += 1;
            y += 1;
            a[x - 1].1 - b[y - 1].1
        };
        s += d * d;
    }
    s
}

fn coord(p: &[(usize, f64)], ax: usize) -> f64 {
    p.binary_search_by_key(&ax, |e| e.0).map_or(0.0, |k| p[k].1)
}

/// The two coordinates with the widest spread over `subset`. Projections
/// onto coordinates are 1-Lipschitz, so bucketing on them loses no pair.
fn widest_axes(v: &[Vec<(usize, f64)>], subset: &[usize]) -> (usize, usize) {
    let mut lo: alloc::collections::BTreeMap<usize, (f64, f64)> = Default::default();
    for &g in subset {
        for &(i, x) in &v[g] {
            let e = lo.entry(i).or_insert((0.0, 0.0));
            e.0 = e.0.min(x);
            e.1 = e.1.max(x);
        }
    }
    let mut spread: Vec<(usize, f64)> = lo.into_iter().map(|(i, (a, b))| (i, b - a)).collect();
    spread.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(core::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
    let a = spread.first().map_or(0, |e| e.0);
    let b = spread.get(1).map_or(usize::MAX, |e| e.0);
    (a, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum CoverMethod {
    /// Most constrained point first, covered by the candidate center with
    /// the largest new coverage; redundant centers pruned afterwards.
    Greedy,
    /// Gonzalez farthest-point selection.
    FarthestPoint,
    /// Exhaustive minimum over data-point centers (at most [`EXACT_MAX`] points).
    Exact,
    /// Maximal net: each still uncovered point, in index order, opens a ball.
    /// Needs no neighbour lists, for large clouds.
    Net,
}

/// A cover by `eps`-balls centered at data points.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoverReport {
    pub ln_eps: f64,
    pub count: usize,
    pub method: CoverMethod,
    /// Indices into the cloud.
    pub centers: Vec<usize>,
    /// Every point lies within `eps` of a center (rechecked independently).
    pub valid: bool,
}

pub fn covering_number(cloud: &PointCloud, ln_eps: f64, method: CoverMethod) -> Result<CoverReport> {
    let prep = cloud.prepare();
    let all: Vec<usize> = (0..cloud.len()).collect();
    cover_subset(&prep, &all, ln_eps, method)
}

/// Cover of the points `subset` of a prepared cloud.
pub fn cover_subset(prep: &PreparedCloud, subset: &[usize], ln_eps: f64, method: CoverMethod) -> Result<CoverReport> {
    if ln_eps.is_nan() || ln_eps == f64::NEG_INFINITY {
        return Err(Error::InvalidParameter("covering scale must be positive".into()));
    }
    if method == CoverMethod::Exact && subset.len() > EXACT_MAX {
        return Err(Error::InvalidParameter(format!(
            "exact cover limited to {EXACT_MAX} points, got {}",
            subset.len()
        )));
    }
    let local = match method {
        CoverMethod::FarthestPoint => farthest_point(prep, subset, ln_eps),
        CoverMethod::Greedy => greedy(&prep.neighbours(subset, ln_eps)),
        CoverMethod::Exact => exact(&prep.neighbours(subset, ln_eps)),
        CoverMethod::Net => net(prep, subset, ln_eps),
    };
    let centers: Vec<usize> = local.iter().map(|&i| subset[i]).collect();
    let valid = match (&prep.repr, prep.grid(subset, ln_eps)) {
        (Repr::Fast(v), Some(grid)) => {
            let near = Grid::new(v, &centers, grid.axes, grid.eps);
            subset.iter().all(|&p| near.around_key(near.key(&v[p])).any(|j| prep.within(p, centers[j], ln_eps)))
        }
        _ => subset.iter().all(|&p| centers.iter().any(|&c| prep.within(p, c, ln_eps))),
    };
    Ok(CoverReport { ln_eps, count: centers.len(), method, centers, valid })
}

fn net(prep: &PreparedCloud, subset: &[usize], ln_eps: f64) -> Vec<usize> {
    let m = subset.len();
    let grid = prep.grid(subset, ln_eps);
    let mut covered = alloc::vec![false; m];
    let mut centers = Vec::new();
    for i in 0..m {
        if covered[i] {
            continue;
        }
        centers.push(i);
        let mut mark = |j: usize| {
            if !covered[j] && prep.within(subset[i], subset[j], ln_eps) {
                covered[j] = true;
            }
        };
        match &grid {
            Some(g) => g.around(i).for_each(&mut mark),
            None => (i..m).for_each(&mut mark),
        }
    }
    centers
}

fn greedy(nb: &[Vec<usize>]) -> Vec<usize> {
    let m = nb.len();
    let mut covered = alloc::vec![false; m];
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by_key(|&i| (nb[i].len(), i));
    let mut centers = Vec::new();
    for &u in &order {
        if covered[u] {
            continue;
        }
        let mut best = (0usize, usize::MAX);
        for &c in &nb[u] {
            let gain = nb[c].iter().filter(|&&q| !covered[q]).count();
            if gain > best.0 || (gain == best.0 && c < best.1) {
                best = (gain, c);
            }
        }
        let c = best.1;
        for &q in &nb[c] {
            covered[q] = true;
        }
        centers.push(c);
    }
    // drop centers whose whole ball is covered twice, latest first
    let mut count = alloc::vec![0usize; m];
    for &c in &centers {
        for &q in &nb[c] {
            count[q] += 1;
        }
    }
    let mut keep = alloc::vec![true; centers.len()];
    for k in (0..centers.len()).rev() {
        let c = centers[k];
        if nb[c].iter().all(|&q| count[q] >= 2) {
            keep[k] = false;
            for &q in &nb[c] {
                count[q] -= 1;
            }
        }
    }
    centers.into_iter().zip(keep).filter(|p| p.1).map(|p| p.0).collect()
}

fn farthest_point(prep: &PreparedCloud, subset: &[usize], ln_eps: f64) -> Vec<usize> {
    let m = subset.len();
    if m == 0 {
        return Vec::new();
    }
    let mut centers = alloc::vec![0usize];
    let mut dist: Vec<f64> = (0..m).map(|i| prep.ln_dist(subset[i], subset[0])).collect();
    dist[0] = f64::NEG_INFINITY;
    loop {
        let mut far = 0;
        for i in 1..m {
            if dist[i] > dist[far] {
                far = i;
            }
        }
        if dist[far] <= ln_eps + LN_SLACK * ln_eps.abs().max(1.0) {
            break;
        }
        centers.push(far);
        for i in 0..m {
            let d = if i == far { f64::NEG_INFINITY } else { prep.ln_dist(subset[i], subset[far]) };
            if d < dist[i] {
                dist[i] = d;
            }
        }
    }
    centers
}

fn exact(nb: &[Vec<usize>]) -> Vec<usize> {
    let m = nb.len();
    if m == 0 {
        return Vec::new();
    }
    let masks: Vec<u32> = nb.iter().map(|l| l.iter().fold(0u32, |a, &q| a | (1 << q))).collect();
    let full: u32 = if m == 32 { u32::MAX } else { (1u32 << m) - 1 };
    let mut best = greedy(nb);
    let mut cur = Vec::new();
    fn search(masks: &[u32], full: u32, covered: u32, cur: &mut Vec<usize>, best: &mut Vec<usize>) {
        if covered == full {
            if cur.len() < best.len() {
                *best = cur.clone();
            }
            return;
        }
        if cur.len() + 1 >= best.len() {
            return;
        }
        // lower bound: uncovered count over the largest possible ball
        let left = (full & !covered).count_ones();
        let widest = masks.iter().map(|m| (m & !covered).count_ones()).max().unwrap_or(1).max(1);
        if cur.len() + left.div_ceil(widest) as usize >= best.len() {
            return;
        }
        let u = (full & !covered).trailing_zeros() as usize;
        let mut cands: Vec<usize> = (0..masks.len()).filter(|&c| masks[c] & (1 << u) != 0).collect();
        cands.sort_by_key(|&c| (core::cmp::Reverse((masks[c] & !covered).count_ones()), c));
        for c in cands {
            cur.push(c);
            search(masks, full, covered | masks[c], cur, best);
            cur.pop();
        }
    }
    search(&masks, full, 0, &mut cur, &mut best);
    best.sort_unstable();
    best
}

/// Box-counting slope over a window of scales.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DimensionEstimate {
    /// Scales, strictly decreasing.
    pub ln_eps: Vec<f64>,
    pub counts: Vec<usize>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Slopes between consecutive scales.
    pub local_slopes: Vec<f64>,
    pub method: CoverMethod,
}

impl DimensionEstimate {
    /// Local slopes strictly increasing over the last `k` entries.
    pub fn increasing_tail(&self, k: usize) -> bool {
        let l = &self.local_slopes;
        l.len() >= k && l[l.len() - k..].windows(2).all(|w| w[1] > w[0])
    }
}

fn sorted_scales(ln_scales: &[f64]) -> Result<Vec<f64>> {
    let mut s = ln_scales.to_vec();
    if s.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("scales must be positive and finite".into()));
    }
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    s.dedup();
    Ok(s)
}

/// Largest cloud covered greedily by [`fractal_dimension_estimate`]; larger
/// ones use [`CoverMethod::Net`].
pub const GREEDY_MAX: usize = 5000;

/// Least-squares slope of `ln N_eps` against `ln(1/eps)`.
pub fn fractal_dimension_estimate(cloud: &PointCloud, ln_scales: &[f64]) -> Result<DimensionEstimate> {
    let scales = sorted_scales(ln_scales)?;
    if scales.len() < 4 {
        return Err(Error::InvalidParameter(format!("need at least 4 scales, got {}", scales.len())));
    }
    let prep = cloud.prepare();
    let all: Vec<usize> = (0..cloud.len()).collect();
    let method = if cloud.len() <= GREEDY_MAX { CoverMethod::Greedy } else { CoverMethod::Net };
    let mut counts = Vec::with_capacity(scales.len());
    for &l in &scales {
        counts.push(if cloud.len() <= 1 { cloud.len() } else { cover_subset(&prep, &all, l, method)?.count });
    }
    if cloud.len() <= 1 {
        let k = scales.len() - 1;
        return Ok(DimensionEstimate {
            ln_eps: scales,
            counts,
            slope: 0.0,
            intercept: 0.0,
            r2: 1.0,
            local_slopes: alloc::vec![0.0; k],
            method,
        });
    }
    Ok(estimate_from_counts(scales, counts, method))
}

fn estimate_from_counts(scales: Vec<f64>, counts: Vec<usize>, method: CoverMethod) -> DimensionEstimate {
    let xs: Vec<f64> = scales.iter().map(|l| -l).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let (slope, intercept, r2) = match fit_line(&xs, &ys) {
        Some(f) => (f.slope, f.intercept, if f.r2.is_nan() { 1.0 } else { f.r2 }),
        None => (0.0, ys[0], 1.0),
    };
    DimensionEstimate { local_slopes: local_slopes(&xs, &ys), ln_eps: scales, counts, slope, intercept, r2, method }
}

/// `D_eps` with the ball that attains it.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DoublingReport {
    pub ln_eps: f64,
    pub d: usize,
    pub center: usize,
}

/// `D_eps = max_x N_{eps/2}(B(eps, x))` over data-point centers. Balls of at
/// most 16 points are covered exactly, larger ones greedily.
pub fn doubling_factor(cloud: &PointCloud, ln_eps: f64) -> Result<DoublingReport> {
    doubling_prepared(&cloud.prepare(), ln_eps)
}

pub fn doubling_prepared(prep: &PreparedCloud, ln_eps: f64) -> Result<DoublingReport> {
    if ln_eps.is_nan() || ln_eps == f64::NEG_INFINITY {
        return Err(Error::InvalidParameter("doubling scale must be positive".into()));
    }
    let all: Vec<usize> = (0..prep.len()).collect();
    if all.is_empty() {
        return Ok(DoublingReport { ln_eps, d: 0, center: 0 });
    }
    let nb = prep.neighbours(&all, ln_eps);
    let half = ln_eps - core::f64::consts::LN_2;
    let mut best = DoublingReport { ln_eps, d: 0, center: 0 };
    // centers of one cluster share their ball
    let mut seen: BTreeMap<&[usize], usize> = BTreeMap::new();
    for (x, ball) in nb.iter().enumerate() {
        let c = match seen.get(ball.as_slice()) {
            Some(&c) => c,
            None => {
                let method = if ball.len() <= 16 { CoverMethod::Exact } else { CoverMethod::Greedy };
                let c = cover_subset(prep, ball, half, method)?.count;
                seen.insert(ball.as_slice(), c);
                c
            }
        };
        if c > best.d {
            best = DoublingReport { ln_eps, d: c, center: x };
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum GrowthVerdict {
    Finite,
    Diverging,
}

/// `ln D` against `ln ln(1/eps)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LogDoublingReport {
    /// Representative scale of each group (its largest).
    pub ln_eps: Vec<f64>,
    /// Largest `D` over each group's scales.
    pub d: Vec<usize>,
    pub slope: f64,
    pub local_slopes: Vec<f64>,
    pub verdict: GrowthVerdict,
    /// `max log2 D` over all groups.
    pub doubling_dimension: f64,
}

/// Log-doubling estimate; each group is a set of scales whose largest
/// doubling factor counts as one sample.
pub fn log_doubling_estimate(cloud: &PointCloud, groups: &[Vec<f64>]) -> Result<LogDoublingReport> {
    let flat: Vec<f64> = groups.iter().flatten().copied().collect();
    if groups.is_empty() || groups.iter().any(|g| g.is_empty()) {
        return Err(Error::InvalidParameter("empty scale group".into()));
    }
    if flat.iter().any(|&l| !(l < 0.0)) {
        return Err(Error::InvalidParameter("log-doubling scales must lie below 1".into()));
    }
    let hi = flat.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = flat.iter().cloned().fold(f64::INFINITY, f64::min);
    if hi - lo < 2.0 * core::f64::consts::LN_10 {
        return Err(Error::InvalidParameter("scales must span at least two decades".into()));
    }
    let prep = cloud.prepare();
    let mut rows: Vec<(f64, usize)> = Vec::with_capacity(groups.len());
    for g in groups {
        let mut d = 0;
        for &l in g {
            d = d.max(doubling_prepared(&prep, l)?.d);
        }
        rows.push((g.iter().cloned().fold(f64::NEG_INFINITY, f64::max), d));
    }
    rows.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(core::cmp::Ordering::Equal));
    let xs: Vec<f64> = rows.iter().map(|r| (-r.0).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| (r.1.max(1) as f64).ln()).collect();
    let slope = fit_line(&xs, &ys).map_or(0.0, |f| f.slope);
    let local = local_slopes(&xs, &ys);
    let verdict = divergence_verdict(&local);
    let doubling_dimension = rows.iter().map(|r| (r.1.max(1) as f64).log2()).fold(0.0, f64::max);
    Ok(LogDoublingReport {
        ln_eps: rows.iter().map(|r| r.0).collect(),
        d: rows.iter().map(|r| r.1).collect(),
        slope,
        local_slopes: local,
        verdict,
        doubling_dimension,
    })
}

/// Diverging when there are at least three local slopes and the last half
/// of them is strictly increasing, positive, and ends at 0.1 or more.
pub fn divergence_verdict(local: &[f64]) -> GrowthVerdict {
    if local.len() < 3 {
        return GrowthVerdict::Finite;
    }
    let tail = &local[local.len() / 2..];
    let tail = if tail.len() < 2 { &local[local.len() - 2..] } else { tail };
    let rising = tail.windows(2).all(|w| w[1] > w[0]);
    let positive = tail.iter().all(|&x| x > 0.0);
    if rising && positive && *tail.last().unwrap() >= 0.1 {
        GrowthVerdict::Diverging
    } else {
        GrowthVerdict::Finite
    }
}

/// A sequence `n -> ln a_n` used by the smoothness criterion.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SequenceLaw {
    /// `A_n = 1 / (lambda_n^{1/2} (ln lambda_n)^2)`.
    LogSquaredLengths,
    /// `B_n = A_n / ln lambda_n` with `A_n` as above.
    LogCubedHeights,
    /// `B_n = exp(-sqrt n)`.
    ExpSqrt,
    /// `A_n = c / n^2`.
    InverseSquare { c: f64 },
    /// `ln a_n` listed from `n = 1`.
    Explicit(Vec<f64>),
}

impl SequenceLaw {
    /// `ln a_n`, or `None` where undefined (e.g. `ln lambda_n <= 0`).
    pub fn ln_value(&self, spec: &Spectrum, n: usize) -> Option<f64> {
        let ll = |n: usize| spec.lambda(n).ln();
        match self {
            SequenceLaw::LogSquaredLengths => {
                let l = ll(n);
                (l > 0.0).then(|| -0.5 * l - 2.0 * l.ln())
            }
            SequenceLaw::LogCubedHeights => {
                let l = ll(n);
                (l > 0.0).then(|| -0.5 * l - 3.0 * l.ln())
            }
            SequenceLaw::ExpSqrt => Some(-(n as f64).sqrt()),
            SequenceLaw::InverseSquare { c } => Some(c.ln() - 2.0 * (n as f64).ln()),
            SequenceLaw::Explicit(v) => v.get(n - 1).copied(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Boundedness {
    Bounded,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SmoothnessReport {
    pub verdict: Boundedness,
    /// First mode index at which the law is defined.
    pub first_n: usize,
    /// `ln B_n + (s/2) ln lambda_n - k ln A_n` from `first_n` on.
    pub values: Vec<f64>,
    /// Indices `n` of successive running maxima.
    pub witness: Vec<usize>,
}

/// Evaluates `ln(B_n lambda_n^{s/2} A_n^{-k})` for `n <= n_max`; the
/// verdict is unbounded iff the last quartile increases strictly.
pub fn smoothness_criterion(
    b_law: &SequenceLaw,
    a_law: &SequenceLaw,
    spec: &Spectrum,
    s: f64,
    k: f64,
    n_max: usize,
) -> Result<SmoothnessReport> {
    if n_max > spec.n_max() {
        return Err(Error::TruncationTooSmall { needed: n_max, available: spec.n_max() });
    }
    let mut first_n = 0;
    let mut values = Vec::new();
    for n in 1..=n_max {
        let (Some(b), Some(a)) = (b_law.ln_value(spec, n), a_law.ln_value(spec, n)) else {
            if values.is_empty() {
                continue;
            }
            return Err(Error::InvalidParameter(format!("law undefined at n = {n}")));
        };
        if values.is_empty() {
            first_n = n;
        }
        values.push(b + 0.5 * s * spec.lambda(n).ln() - k * a);
    }
    if values.len() < 8 {
        return Err(Error::InvalidParameter("need at least 8 defined terms".into()));
    }
    let q = values.len() - values.len() / 4;
    let rising = values[q - 1..].windows(2).all(|w| w[1] > w[0]);
    let mut witness = Vec::new();
    let mut top = f64::NEG_INFINITY;
    for (i, &v) in values.iter().enumerate() {
        if v > top {
            top = v;
            witness.push(first_n + i);
        }
    }
    Ok(SmoothnessReport {
        verdict: if rising { Boundedness::Unbounded } else { Boundedness::Bounded },
        first_n,
        values,
        witness,
    })
}

/// One row of an `s` scan.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DimensionRow {
    pub s: f64,
    pub estimate: DimensionEstimate,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DimensionScan {
    pub rows: Vec<DimensionRow>,
}

/// Re-norms the cloud under each `s` and estimates the box-counting slope.
pub fn dimension_vs_s_scan(cloud: &PointCloud, s_list: &[f64], ln_scales: &[f64]) -> Result<DimensionScan> {
    let mut rows = Vec::with_capacity(s_list.len());
    for &s in s_list {
        rows.push(DimensionRow { s, estimate: fractal_dimension_estimate(&cloud.with_s(s), ln_scales)? });
    }
    Ok(DimensionScan { rows })
}

/// `ln N_eps` for the separated cloud `{(ln lambda_n)^{-3} e_n : n >= 2} ∪ {0}`
/// with `lambda_n = n^2`: `N_eps = #{n >= 2 : (2 ln n)^{-3} > eps} + 1`.
/// Evaluated in closed form, so `eps` may be far below any enumerable range.
pub fn ln_separated_count(ln_eps: f64) -> f64 {
    // (2 ln n)^{-3} > eps  <=>  n < M = exp(eps^{-1/3} / 2)
    let ln_m = 0.5 * (-ln_eps / 3.0).exp();
    if ln_m > 30.0 {
        // M - 1 = count to within one part in e^30
        return ln_m + (-(-ln_m).exp()).ln_1p();
    }
    let m = ln_m.exp();
    let below = if m.fract() == 0.0 { m - 1.0 } else { m.floor() };
    // n in [2, below] plus the origin
    let count = (below - 1.0).max(0.0) + 1.0;
    count.ln()
}

/// Same count by enumeration over `n = 2..=n_max` (the truncated cloud).
pub fn separated_count_truncated(ln_eps: f64, n_max: usize) -> usize {
    (2..=n_max).filter(|&n| -3.0 * (2.0 * (n as f64).ln()).ln() > ln_eps).count() + 1
}

/// The truncated separated cloud as points.
pub fn separated_cloud(n_max: usize) -> Result<PointCloud> {
    let ln_lambda: Vec<f64> = (1..=n_max).map(|n| 2.0 * (n as f64).ln()).collect();
    let mut c = PointCloud::new(0, ln_lambda, 0.0);
    c.push(Vec::new(), LogModeVector::new(), PointTag::Plain)?;
    for n in 2..=n_max {
        let r = -3.0 * (2.0 * (n as f64).ln()).ln();
        c.push(Vec::new(), LogModeVector::from_entries([(n, LogReal::from_ln(r))]), PointTag::Equilibrium { n })?;
    }
    Ok(c)
}

/// Geometric `ln` scales from `eps_hi` down to `eps_lo`, `count` values.
pub fn geometric_ln_scales(eps_hi: f64, eps_lo: f64, count: usize) -> Vec<f64> {
    let (a, b) = (eps_hi.ln(), eps_lo.ln());
    if count <= 1 {
        return alloc::vec![a];
    }
    (0..count).map(|i| a + (b - a) * i as f64 / (count - 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planar_cloud(pts: &[(f64, f64)]) -> PointCloud {
        let mut c = PointCloud::new(2, Vec::new(), 0.0);
        for &(x, y) in pts {
            c.push(alloc::vec![x, y], LogModeVector::new(), PointTag::Plain).unwrap();
        }
        c
    }

    #[test]
    fn collinear_and_orthonormal() {
        let c = planar_cloud(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0), (4.0, 0.0)]);
        for m in [CoverMethod::Greedy, CoverMethod::FarthestPoint, CoverMethod::Exact] {
            let r = covering_number(&c, 0.5f64.ln(), m).unwrap();
            assert_eq!(r.count, 5);
            assert!(r.valid);
        }
        let mut o = PointCloud::new(0, alloc::vec![0.0; 6], 0.0);
        for n in 1..=6 {
            o.push(Vec::new(), LogModeVector::basis(n), PointTag::Plain).unwrap();
        }
        assert_eq!(covering_number(&o, 0.5f64.ln(), CoverMethod::Greedy).unwrap().count, 6);
    }

    #[test]
    fn grid_greedy_close_to_exact() {
        let pts: Vec<(f64, f64)> = (0..16).map(|i| ((i % 4) as f64, (i / 4) as f64)).collect();
        let c = planar_cloud(&pts);
        let l = 1.1f64.ln();
        let e = covering_number(&c, l, CoverMethod::Exact).unwrap();
        let g = covering_number(&c, l, CoverMethod::Greedy).unwrap();
        assert!(e.valid && g.valid);
        assert_eq!(e.count, 4);
        assert!(g.count <= e.count + 1, "{} vs {}", g.count, e.count);
    }

    #[test]
    fn exact_and_fast_distances_agree() {
        let mut c = PointCloud::new(1, alloc::vec![0.0, 1.0], 2.0);
        c.push(alloc::vec![0.5], LogModeVector::from_dense(&[1.0, -2.0]), PointTag::Plain).unwrap();
        c.push(alloc::vec![-0.5], LogModeVector::from_dense(&[0.0, 1.0]), PointTag::Plain).unwrap();
        // weights 1, e^{1}: d^2 = 1 + 1 + e^2 * 9
        let want = 0.5 * (2.0 + 9.0 * 1f64.exp().powi(2)).ln();
        assert!(c.prepare().is_fast());
        assert!((c.prepare().ln_dist(0, 1) - want).abs() < 1e-14);
        assert!((c.ln_distance(0, 1) - want).abs() < 1e-14);
    }

    #[test]
    fn tiny_scales_use_log_arithmetic() {
        let mut c = PointCloud::new(0, alloc::vec![0.0; 3], 0.0);
        c.push(Vec::new(), LogModeVector::from_entries([(1, LogReal::from_ln(-2000.0))]), PointTag::Plain).unwrap();
        c.push(Vec::new(), LogModeVector::from_entries([(2, LogReal::from_ln(-2000.0))]), PointTag::Plain).unwrap();
        let p = c.prepare();
        assert!(!p.is_fast());
        assert!((p.ln_dist(0, 1) - (-2000.0 + 0.5 * 2f64.ln())).abs() < 1e-12);
        assert_eq!(covering_number(&c, -2000.0, CoverMethod::Exact).unwrap().count, 2);
        assert_eq!(covering_number(&c, -1999.0, CoverMethod::Exact).unwrap().count, 1);
    }

    #[test]
    fn separated_count_closed_form_matches_enumeration() {
        for &eps in &[0.2, 0.1, 0.05, 0.03] {
            let l = f64::ln(eps);
            let n = separated_count_truncated(l, 100_000);
            assert!((ln_separated_count(l) - (n as f64).ln()).abs() < 1e-12, "{eps}: {n}");
        }
    }

    #[test]
    fn smoothness_examples() {
        let spec = crate::spectral::make_spectrum(crate::spectral::SpectrumFamily::Quadratic, 400).unwrap();
        let b = SequenceLaw::LogCubedHeights;
        let a = SequenceLaw::LogSquaredLengths;
        let v = |s, k| smoothness_criterion(&b, &a, &spec, s, k, 400).unwrap().verdict;
        assert_eq!(v(1.0, 0.0), Boundedness::Bounded);
        assert_eq!(v(0.0, 1.0), Boundedness::Bounded);
        assert_eq!(v(1.0, 1.0), Boundedness::Unbounded);
    }

    #[test]
    fn verdict_rules() {
        assert_eq!(divergence_verdict(&[0.1, 0.2]), GrowthVerdict::Finite);
        assert_eq!(divergence_verdict(&[0.0, 0.2, 0.3, 0.5]), GrowthVerdict::Diverging);
        assert_eq!(divergence_verdict(&[0.0, 0.2, 0.1, 0.05]), GrowthVerdict::Finite);
    }

    #[test]
    fn net_cover_on_large_grid() {
        let pts: Vec<(f64, f64)> = (0..6400).map(|i| ((i % 80) as f64 * 0.01, (i / 80) as f64 * 0.01)).collect();
        let c = planar_cloud(&pts);
        let l = 0.05f64.ln();
        let net = covering_number(&c, l, CoverMethod::Net).unwrap();
        let greedy = covering_number(&c, l, CoverMethod::Greedy).unwrap();
        assert!(net.valid && greedy.valid);
        assert!(net.count >= greedy.count && net.count <= 2 * greedy.count, "{} vs {}", net.count, greedy.count);
        let d = fractal_dimension_estimate(&c, &geometric_ln_scales(0.2, 0.03, 5)).unwrap();
        assert_eq!(d.method, CoverMethod::Net);
        assert!((d.slope - 2.0).abs() < 0.3, "{}", d.slope);
    }
}
