//! Sparse mode coordinates in log form.

use alloc::vec::Vec;

use crate::logreal::{log_sum_exp, LogReal};

/// Sparse vector of eigenmode coordinates `u_n = (u, e_n)`, 1-based, each
/// stored as a [`LogReal`]. Absent entries are exact zeros; stored entries
/// are never zero.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LogModeVector {
    entries: Vec<(usize, LogReal)>,
}

/// Dense conversion together with the underflow flag.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseModes {
    pub values: Vec<f64>,
    pub underflow: bool,
}

impl LogModeVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// The basis vector `e_mode`.
    pub fn basis(mode: usize) -> Self {
        let mut v = Self::new();
        v.set(mode, LogReal::ONE);
        v
    }

    /// From dense coordinates, `values[i]` being mode `i + 1`.
    pub fn from_dense(values: &[f64]) -> Self {
        let entries = values
            .iter()
            .enumerate()
            .filter(|(_, &x)| x != 0.0)
            .map(|(i, &x)| (i + 1, LogReal::from_f64(x)))
            .collect();
        LogModeVector { entries }
    }

    /// From `(mode, value)` pairs in any order; zeros are dropped and later
    /// duplicates overwrite earlier ones.
    pub fn from_entries<I: IntoIterator<Item = (usize, LogReal)>>(it: I) -> Self {
        let mut v = Self::new();
        for (n, x) in it {
            v.set(n, x);
        }
        v
    }

    /// Dense coordinates for modes `1..=n_modes`. Entries beyond `n_modes`
    /// are ignored; magnitudes below the normal range raise the flag.
    pub fn to_dense(&self, n_modes: usize) -> DenseModes {
        let mut values = alloc::vec![0.0; n_modes];
        let mut underflow = false;
        for &(n, x) in &self.entries {
            if n >= 1 && n <= n_modes {
                let d = x.to_dense();
                underflow |= d.underflow;
                values[n - 1] = d.value;
            }
        }
        DenseModes { values, underflow }
    }

    pub fn get(&self, mode: usize) -> LogReal {
        match self.entries.binary_search_by_key(&mode, |e| e.0) {
            Ok(i) => self.entries[i].1,
            Err(_) => LogReal::ZERO,
        }
    }

    pub fn set(&mut self, mode: usize, value: LogReal) {
        assert!(mode >= 1, "modes are 1-based");
        match self.entries.binary_search_by_key(&mode, |e| e.0) {
            Ok(i) => {
                if value.is_zero() {
                    self.entries.remove(i);
                } else {
                    self.entries[i].1 = value;
                }
            }
            Err(i) => {
                if !value.is_zero() {
                    self.entries.insert(i, (mode, value));
                }
            }
        }
    }

    pub fn entries(&self) -> &[(usize, LogReal)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Largest stored mode index, 0 when empty.
    pub fn max_mode(&self) -> usize {
        self.entries.last().map_or(0, |e| e.0)
    }

    pub fn scale_ln(&self, l: f64) -> Self {
        LogModeVector {
            entries: self.entries.iter().map(|&(n, x)| (n, x.scale_ln(l))).collect(),
        }
    }

    /// Exact coordinate-wise difference `self - other`.
    pub fn sub(&self, other: &Self) -> Self {
        let mut out = Vec::with_capacity(self.entries.len() + other.entries.len());
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            let (n, x) = if j >= b.len() || (i < a.len() && a[i].0 < b[j].0) {
                i += 1;
                (a[i - 1].0, a[i - 1].1)
            } else if i >= a.len() || b[j].0 < a[i].0 {
                j += 1;
                (b[j - 1].0, -b[j - 1].1)
            } else {
                i += 1;
                j += 1;
                (a[i - 1].0, a[i - 1].1 - b[j - 1].1)
            };
            if !x.is_zero() {
                out.push((n, x));
            }
        }
        LogModeVector { entries: out }
    }

    /// Keeps only modes for which `keep` returns true.
    pub fn restrict<F: Fn(usize) -> bool>(&self, keep: F) -> Self {
        LogModeVector {
            entries: self.entries.iter().copied().filter(|e| keep(e.0)).collect(),
        }
    }

    /// `ln ||u||` with per-mode log-weights: `||u||^2 = sum w_n^2 u_n^2`,
    /// `ln_weight(n) = ln w_n`.
    pub fn weighted_ln_norm<W: Fn(usize) -> f64>(&self, ln_weight: W) -> f64 {
        let terms: Vec<f64> = self
            .entries
            .iter()
            .map(|&(n, x)| 2.0 * (x.logmag + ln_weight(n)))
            .collect();
        0.5 * log_sum_exp(&terms)
    }

    /// `ln ||u||_H` (plain norm).
    pub fn ln_norm(&self) -> f64 {
        self.weighted_ln_norm(|_| 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_round_trip_and_zero_convention() {
        let d = [0.0, 1.5, -2.0, 0.0, 1e-200];
        let v = LogModeVector::from_dense(&d);
        assert_eq!(v.len(), 3);
        assert_eq!(v.get(1), LogReal::ZERO);
        let back = v.to_dense(5);
        assert!(!back.underflow);
        for (a, b) in back.values.iter().zip(d.iter()) {
            assert!((a - b).abs() <= 1e-13 * b.abs());
        }
    }

    #[test]
    fn dense_conversion_flags_underflow() {
        let v = LogModeVector::from_entries([(2, LogReal::from_ln(-900.0))]);
        let d = v.to_dense(3);
        assert!(d.underflow);
    }

    #[test]
    fn sub_cancels_exactly() {
        let a = LogModeVector::from_dense(&[1.0, 2.0, 3.0]);
        let b = LogModeVector::from_dense(&[1.0, 0.0, 3.0]);
        let d = a.sub(&b);
        assert_eq!(d.entries().len(), 1);
        assert_eq!(d.get(2).sign, 1);
        assert!(a.sub(&a).is_empty());
    }

    #[test]
    fn setting_zero_removes_entry() {
        let mut v = LogModeVector::basis(4);
        v.set(4, LogReal::ZERO);
        assert!(v.is_empty());
    }

    #[test]
    fn plain_norm_matches_euclidean() {
        let v = LogModeVector::from_dense(&[3.0, 0.0, 4.0]);
        assert!((v.ln_norm().exp() - 5.0).abs() < 1e-14);
        assert_eq!(LogModeVector::new().ln_norm(), f64::NEG_INFINITY);
    }
}
