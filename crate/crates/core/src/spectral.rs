//! Eigenvalue sequences, Sobolev weights, spectral gaps and the two-site
//! linearization spectra.

use alloc::format;
use alloc::vec::Vec;
use num_complex::Complex64;

use crate::eigen;
use crate::modevec::LogModeVector;
use crate::{Error, Result};

#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Growth family of the eigenvalues `lambda_n`, 1-based.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SpectrumFamily {
    /// `lambda_n = c n`.
    Linear { c: f64 },
    /// `lambda_n = n^kappa`.
    Power { kappa: f64 },
    /// `lambda_n = n^2`.
    Quadratic,
    /// Values supplied by the caller.
    Explicit,
}

/// A truncated, nondecreasing sequence of positive eigenvalues.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Spectrum {
    family: SpectrumFamily,
    values: Vec<f64>,
}

impl Spectrum {
    pub fn family(&self) -> &SpectrumFamily {
        &self.family
    }

    pub fn n_max(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `lambda_n`, 1-based. Panics outside the truncation.
    pub fn lambda(&self, n: usize) -> f64 {
        self.values[n - 1]
    }

    /// Validates an explicit list.
    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 eigenvalues, got {}",
                values.len()
            )));
        }
        for (i, &v) in values.iter().enumerate() {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "eigenvalue {} = {v} is not positive",
                    i + 1
                )));
            }
            if i > 0 && v < values[i - 1] {
                return Err(Error::NonMonotoneSpectrum { index: i + 1 });
            }
        }
        Ok(Spectrum { family: SpectrumFamily::Explicit, values })
    }

    /// The first `n` eigenvalues, keeping the family tag.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n < 2 || n > self.values.len() {
            return Err(Error::TruncationTooSmall { needed: n, available: self.values.len() });
        }
        Ok(Spectrum { family: self.family.clone(), values: self.values[..n].to_vec() })
    }

    /// Same family, every eigenvalue multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let family = match self.family {
            SpectrumFamily::Linear { c } => SpectrumFamily::Linear { c: c * factor },
            _ => SpectrumFamily::Explicit,
        };
        Spectrum { family, values: self.values.iter().map(|v| v * factor).collect() }
    }

    /// `ln lambda_n` for all stored modes.
    pub fn ln_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.ln()).collect()
    }
}

/// Builds a spectrum of the given family with `n_max` modes.
pub fn make_spectrum(family: SpectrumFamily, n_max: usize) -> Result<Spectrum> {
    if n_max < 2 {
        return Err(Error::InvalidParameter(format!("n_max must be >= 2, got {n_max}")));
    }
    let values: Vec<f64> = match family {
        SpectrumFamily::Linear { c } => {
            if !(c > 0.0) {
                return Err(Error::InvalidParameter(format!("linear slope c = {c} must be positive")));
            }
            (1..=n_max).map(|n| c * n as f64).collect()
        }
        SpectrumFamily::Power { kappa } => {
            if !(kappa > 0.0) {
                return Err(Error::InvalidParameter(format!("power kappa = {kappa} must be positive")));
            }
            (1..=n_max).map(|n| (n as f64).powf(kappa)).collect()
        }
        SpectrumFamily::Quadratic => (1..=n_max).map(|n| (n * n) as f64).collect(),
        SpectrumFamily::Explicit => {
            return Err(Error::InvalidParameter(
                "explicit spectra are built with Spectrum::explicit".into(),
            ))
        }
    };
    Ok(Spectrum { family, values })
}

/// Sobolev index: `||u||_{H^s}^2 = sum lambda_n^s |u_n|^2`, i.e. mode `n`
/// carries the weight `lambda_n^{s/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SobolevIndex {
    pub s: f64,
}

impl SobolevIndex {
    pub fn ln_weight(&self, spec: &Spectrum, mode: usize) -> f64 {
        0.5 * self.s * spec.lambda(mode).ln()
    }

    /// `ln ||u||_{H^s}`; modes beyond the truncation are an error.
    pub fn ln_norm(&self, spec: &Spectrum, u: &LogModeVector) -> Result<f64> {
        if u.max_mode() > spec.n_max() {
            return Err(Error::TruncationTooSmall { needed: u.max_mode(), available: spec.n_max() });
        }
        Ok(u.weighted_ln_norm(|n| self.ln_weight(spec, n)))
    }
}

/// Supremum of consecutive gaps.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum GapValue {
    Finite(f64),
    /// The family's analytic gap diverges, whatever the truncation.
    Unbounded,
}

impl GapValue {
    pub fn finite(&self) -> Option<f64> {
        match self {
            GapValue::Finite(v) => Some(*v),
            GapValue::Unbounded => None,
        }
    }
}

pub fn spectral_gap(spec: &Spectrum) -> GapValue {
    match spec.family {
        SpectrumFamily::Quadratic => return GapValue::Unbounded,
        SpectrumFamily::Power { kappa } if kappa > 1.0 => return GapValue::Unbounded,
        SpectrumFamily::Linear { c } => return GapValue::Finite(c),
        _ => {}
    }
    let g = spec.values.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    GapValue::Finite(g)
}

/// Roots of `z^2 + (a+b) z + a b + L^2 = 0`, the spectrum of the block
/// `[[-a, L], [-L, -b]]`. Non-real iff `2L > b - a`.
pub fn block_eigenvalues(lambda_a: f64, lambda_b: f64, l: f64) -> [Complex64; 2] {
    let mid = -0.5 * (lambda_a + lambda_b);
    let half_gap = 0.5 * (lambda_b - lambda_a);
    let disc = half_gap * half_gap - l * l;
    if disc < 0.0 {
        let w = (-disc).sqrt();
        [Complex64::new(mid, w), Complex64::new(mid, -w)]
    } else {
        let r = disc.sqrt();
        // larger-magnitude root first, the other from Vieta to avoid cancellation
        let big = mid - r;
        let prod = lambda_a * lambda_b + l * l;
        let small = if big != 0.0 { prod / big } else { mid + r };
        [Complex64::new(small, 0.0), Complex64::new(big, 0.0)]
    }
}

/// Which equilibrium the linearization is taken at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Site {
    /// Pairs `(2n-1, 2n)`; needs an even truncation.
    Minus,
    /// Mode 1 alone with eigenvalue `L - lambda_1`, pairs `(2n, 2n+1)`; needs
    /// an odd truncation.
    Plus,
}

/// Tolerance rule for calling an eigenvalue real.
pub fn is_real(z: Complex64) -> bool {
    z.im.abs() <= 1e-9 * (1.0 + z.re.abs())
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LinearizationSpectrum {
    pub site: Site,
    /// Block-assembled eigenvalues in mode order.
    pub eigenvalues: Vec<Complex64>,
    pub real_count: usize,
    /// Max distance between block eigenvalues and their matched dense ones.
    pub dense_max_abs_diff: f64,
}

/// Assembles `-A + F'(u_site)` on the first `spec.n_max()` modes.
pub fn linearization_matrix(spec: &Spectrum, l: f64, site: Site) -> Result<Vec<Vec<f64>>> {
    let n = spec.n_max();
    check_pairing(n, site)?;
    let mut m = alloc::vec![alloc::vec![0.0; n]; n];
    for i in 0..n {
        m[i][i] = -spec.values[i];
    }
    let first = match site {
        Site::Minus => 0,
        Site::Plus => {
            m[0][0] += l;
            1
        }
    };
    let mut i = first;
    while i + 1 < n {
        m[i][i + 1] = l;
        m[i + 1][i] = -l;
        i += 2;
    }
    Ok(m)
}

fn check_pairing(n: usize, site: Site) -> Result<()> {
    let ok = match site {
        Site::Minus => n % 2 == 0,
        Site::Plus => n % 2 == 1,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::OrphanedMode { n_max: n })
    }
}

/// Block-assembled spectrum at one site, cross-checked against the dense
/// eigensolver on the assembled matrix.
pub fn linearization_spectrum(spec: &Spectrum, l: f64, site: Site) -> Result<LinearizationSpectrum> {
    let n = spec.n_max();
    check_pairing(n, site)?;
    let lam = &spec.values;
    let mut eig = Vec::with_capacity(n);
    let first = match site {
        Site::Minus => 0,
        Site::Plus => {
            eig.push(Complex64::new(l - lam[0], 0.0));
            1
        }
    };
    let mut i = first;
    while i + 1 < n {
        eig.extend_from_slice(&block_eigenvalues(lam[i], lam[i + 1], l));
        i += 2;
    }
    let real_count = eig.iter().filter(|z| is_real(**z)).count();
    let dense = eigen::eigenvalues(&linearization_matrix(spec, l, site)?)
        .ok_or_else(|| Error::InvalidParameter("dense QR iteration did not converge".into()))?;
    let dense_max_abs_diff = match_max_distance(&eig, &dense);
    Ok(LinearizationSpectrum { site, eigenvalues: eig, real_count, dense_max_abs_diff })
}

/// Greedy nearest matching; returns the largest matched distance.
pub fn match_max_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = alloc::vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for z in a {
        let mut best = (f64::INFINITY, usize::MAX);
        for (j, w) in b.iter().enumerate() {
            if !used[j] {
                let d = (z - w).norm();
                if d < best.0 {
                    best = (d, j);
                }
            }
        }
        if best.1 == usize::MAX {
            return f64::INFINITY;
        }
        used[best.1] = true;
        worst = worst.max(best.0);
    }
    worst
}

/// Outcome of the two-site parity argument.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct C1Verdict {
    pub minus_real_count: usize,
    pub plus_real_count: usize,
    /// `L > max(L0/2, lambda_1)` with `L0` the stored (or analytic) gap.
    pub regime_ok: bool,
    /// Minus site has no real eigenvalue while the plus site has exactly one,
    /// and it is positive.
    pub parity_contradiction: bool,
    pub minus_truncation: usize,
    pub plus_truncation: usize,
}

/// Runs both sites at the largest admissible truncations not exceeding
/// `n_trunc` (even for the minus site, odd for the plus site).
pub fn c1_obstruction_check(spec: &Spectrum, l: f64, n_trunc: usize) -> Result<C1Verdict> {
    let n_trunc = n_trunc.min(spec.n_max());
    if n_trunc < 3 {
        return Err(Error::TruncationTooSmall { needed: 3, available: n_trunc });
    }
    let minus_n = n_trunc - n_trunc % 2;
    let plus_n = if n_trunc % 2 == 1 { n_trunc } else { n_trunc - 1 };
    let minus = linearization_spectrum(&spec.prefix(minus_n)?, l, Site::Minus)?;
    let plus = linearization_spectrum(&spec.prefix(plus_n)?, l, Site::Plus)?;
    let l0 = match spectral_gap(&spec.prefix(n_trunc)?) {
        GapValue::Finite(g) => g,
        GapValue::Unbounded => f64::INFINITY,
    };
    let regime_ok = l > 0.5 * l0 && l > spec.lambda(1);
    let plus_positive = plus
        .eigenvalues
        .iter()
        .filter(|z| is_real(**z))
        .all(|z| z.re > 0.0);
    let parity_contradiction =
        regime_ok && minus.real_count == 0 && plus.real_count == 1 && plus_positive;
    Ok(C1Verdict {
        minus_real_count: minus.real_count,
        plus_real_count: plus.real_count,
        regime_ok,
        parity_contradiction,
        minus_truncation: minus_n,
        plus_truncation: plus_n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lin(n: usize) -> Spectrum {
        make_spectrum(SpectrumFamily::Linear { c: 1.0 }, n).unwrap()
    }

    #[test]
    fn families() {
        assert_eq!(lin(5).values(), &[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(make_spectrum(SpectrumFamily::Quadratic, 4).unwrap().values(), &[1.0, 4.0, 9.0, 16.0]);
        let p = make_spectrum(SpectrumFamily::Power { kappa: 1.5 }, 3).unwrap();
        // independent: n * sqrt(n)
        for (n, v) in p.values().iter().enumerate() {
            let nf = (n + 1) as f64;
            assert!((v - nf * nf.sqrt()).abs() < 1e-14);
        }
        assert!((p.lambda(2) - 2.828_427_124_746_19).abs() < 1e-12);
        assert!((p.lambda(3) - 5.196_152_422_706_632).abs() < 1e-12);
    }

    #[test]
    fn explicit_list_rejects_decrease_with_index() {
        assert_eq!(
            Spectrum::explicit(alloc::vec![1.0, 3.0, 2.0]),
            Err(Error::NonMonotoneSpectrum { index: 3 })
        );
        assert!(make_spectrum(SpectrumFamily::Linear { c: 1.0 }, 1).is_err());
    }

    #[test]
    fn gaps() {
        assert_eq!(spectral_gap(&lin(10)), GapValue::Finite(1.0));
        assert_eq!(spectral_gap(&make_spectrum(SpectrumFamily::Quadratic, 3).unwrap()), GapValue::Unbounded);
        assert_eq!(
            spectral_gap(&make_spectrum(SpectrumFamily::Power { kappa: 1.2 }, 3).unwrap()),
            GapValue::Unbounded
        );
        let e = Spectrum::explicit(alloc::vec![1.0, 2.0, 4.0, 5.0, 7.0, 8.0]).unwrap();
        assert_eq!(spectral_gap(&e), GapValue::Finite(2.0));
    }

    fn residual(z: Complex64, a: f64, b: f64, l: f64) -> f64 {
        let p = z * z + (a + b) * z + a * b + l * l;
        p.norm() / (z.norm_sqr() + (a + b) * z.norm() + a * b + l * l)
    }

    #[test]
    fn block_roots() {
        let r = block_eigenvalues(1.0, 2.0, 1.0);
        assert!((r[0].re + 1.5).abs() < 1e-15);
        assert!((r[0].im - 0.866_025_403_784_438_6).abs() < 1e-15);
        let r = block_eigenvalues(2.0, 3.0, 2.0);
        assert!((r[0].re + 2.5).abs() < 1e-15);
        assert!((r[0].im - 1.936_491_673_103_708_5).abs() < 1e-15);
        let r = block_eigenvalues(1.0, 2.0, 0.5);
        assert!(r.iter().all(|z| z.im == 0.0 && (z.re + 1.5).abs() < 1e-15));
        for z in block_eigenvalues(1.0, 30.0, 0.1) {
            assert!(residual(z, 1.0, 30.0, 0.1) < 1e-14);
        }
    }

    #[test]
    fn linearization_examples() {
        let m = linearization_spectrum(&lin(8), 1.0, Site::Minus).unwrap();
        assert_eq!(m.real_count, 0);
        assert!(m.dense_max_abs_diff < 1e-9);
        let p = linearization_spectrum(&lin(9), 2.0, Site::Plus).unwrap();
        assert_eq!(p.real_count, 1);
        assert!((p.eigenvalues[0].re - 1.0).abs() < 1e-15);
        let w = linearization_spectrum(&lin(8), 0.4, Site::Minus).unwrap();
        assert_eq!(w.real_count, 8);
        assert_eq!(
            linearization_spectrum(&lin(9), 1.0, Site::Minus),
            Err(Error::OrphanedMode { n_max: 9 })
        );
    }

    #[test]
    fn obstruction_verdicts() {
        assert!(c1_obstruction_check(&lin(33), 2.0, 33).unwrap().parity_contradiction);
        assert!(!c1_obstruction_check(&lin(32), 0.4, 32).unwrap().parity_contradiction);
        // explicit (1,2,4,5) at L = 1.6 sits in the regime and both sites
        // have the required parity
        let e = Spectrum::explicit(alloc::vec![1.0, 2.0, 4.0, 5.0]).unwrap();
        let v = c1_obstruction_check(&e, 1.6, 4).unwrap();
        assert_eq!((v.minus_real_count, v.plus_real_count), (0, 1));
        assert!(v.parity_contradiction);
        // below lambda_1 the verdict is withheld
        assert!(!c1_obstruction_check(&e, 0.9, 4).unwrap().parity_contradiction);
    }

    #[test]
    fn h0_norm_is_plain_norm() {
        let spec = lin(4);
        let u = LogModeVector::from_dense(&[1.0, -2.0, 0.0, 2.0]);
        let n = SobolevIndex { s: 0.0 }.ln_norm(&spec, &u).unwrap();
        assert!((n.exp() - 3.0).abs() < 1e-14);
        let n1 = SobolevIndex { s: 2.0 }.ln_norm(&spec, &u).unwrap();
        // weights lambda_n: sqrt(1 + 16 + 64)
        assert!((n1.exp() - 9.0).abs() < 1e-13);
    }
}
