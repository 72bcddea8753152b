use std::sync::OnceLock;

use manelab_core::cutoffs::{mollifier_bump, periodic_drive};
use manelab_core::floquet::{iterate_norm, poincare_predicted};
use manelab_core::geometry::{covering_number, doubling_factor, CoverMethod, PointCloud, PointTag};
use manelab_core::sim::{build_kick_operator, shift_for_levels, KickOperator, Scenario};
use manelab_core::spectral::{block_eigenvalues, make_spectrum, spectral_gap, SobolevIndex, Spectrum, SpectrumFamily};
use manelab_core::{LogModeVector, LogReal};
use proptest::prelude::*;

fn increasing(values: Vec<f64>) -> Vec<f64> {
    let mut acc = 0.0;
    values.into_iter().map(|d| {
        acc += d;
        acc
    }).collect()
}

fn planar(pts: &[(f64, f64)]) -> PointCloud {
    let mut c = PointCloud::new(2, Vec::new(), 0.0);
    for &(x, y) in pts {
        c.push(vec![x, y], LogModeVector::new(), PointTag::Plain).unwrap();
    }
    c
}

fn mixed(pts: &[(f64, f64, f64, f64)]) -> PointCloud {
    let spec = make_spectrum(SpectrumFamily::Linear { c: 1.0 }, 4).unwrap();
    let mut c = PointCloud::for_spectrum(1, &spec, 1.0);
    for &(x, a, b, d) in pts {
        c.push(vec![x], LogModeVector::from_dense(&[a, 0.0, b, d]), PointTag::Plain).unwrap();
    }
    c
}

fn pts2() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..24)
}

fn pts4() -> impl Strategy<Value = Vec<(f64, f64, f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64), 1..16)
}

fn kick() -> &'static KickOperator {
    static K: OnceLock<KickOperator> = OnceLock::new();
    K.get_or_init(|| {
        let spec = make_spectrum(SpectrumFamily::Linear { c: 1.0 }, 40).unwrap();
        let mut sc = Scenario::pair_default().unwrap();
        sc.spectrum = spec.clone();
        sc.t_half = 1.0;
        sc.n_trunc = 32;
        sc.n_kick_max = 6;
        build_kick_operator(&sc, &shift_for_levels(&spec, 1.0, 6).unwrap()).unwrap()
    })
}

proptest! {
    #[test]
    fn h0_norm_is_euclidean(v in prop::collection::vec(-1e3..1e3f64, 2..40)) {
        let spec = make_spectrum(SpectrumFamily::Quadratic, v.len()).unwrap();
        let u = LogModeVector::from_dense(&v);
        let got = SobolevIndex { s: 0.0 }.ln_norm(&spec, &u).unwrap();
        let want = v.iter().map(|x| x * x).sum::<f64>().sqrt().ln();
        if want.is_finite() {
            prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
        } else {
            prop_assert_eq!(got, f64::NEG_INFINITY);
        }
    }

    #[test]
    fn gap_of_prefix_is_not_larger(d in prop::collection::vec(0.01..5.0f64, 4..30), cut in 3usize..30) {
        let spec = Spectrum::explicit(increasing(d)).unwrap();
        let k = cut.min(spec.n_max());
        let full = spectral_gap(&spec).finite().unwrap();
        let part = spectral_gap(&spec.prefix(k).unwrap()).finite().unwrap();
        prop_assert!(part <= full);
    }

    #[test]
    fn block_roots_solve_the_quadratic(a in 0.1..50.0f64, gap in 0.0..20.0f64, l in 0.0..30.0f64) {
        let b = a + gap;
        for z in block_eigenvalues(a, b, l) {
            let p = z * z + (a + b) * z + a * b + l * l;
            let scale = (z.norm() * z.norm() + (a + b) * z.norm() + a * b + l * l).max(1.0);
            prop_assert!(p.norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn log_multipliers_scale_with_time(t in 0.05..5.0f64, alpha in 0.1..10.0f64, n in 3usize..40) {
        let spec = make_spectrum(SpectrumFamily::Linear { c: 1.0 }, n).unwrap();
        let a = poincare_predicted(&spec, t).unwrap();
        let b = poincare_predicted(&spec, alpha * t).unwrap();
        for (x, y) in a.entries.iter().zip(&b.entries) {
            match (x, y) {
                (Some(x), Some(y)) => {
                    prop_assert_eq!((x.image, x.sign), (y.image, y.sign));
                    prop_assert!((y.log_mu - alpha * x.log_mu).abs() <= 1e-12 * y.log_mu.abs().max(1.0));
                }
                (None, None) => {}
                _ => prop_assert!(false, "pattern changed"),
            }
        }
    }

    #[test]
    fn shift_orbit_matches_repeated_application(t in 0.1..3.0f64, mode in 1usize..4, steps in 0usize..8) {
        let spec = make_spectrum(SpectrumFamily::Linear { c: 1.0 }, 40).unwrap();
        let shift = poincare_predicted(&spec, t).unwrap();
        let it = iterate_norm(&shift, mode, steps).unwrap();
        let mut u = LogModeVector::basis(mode);
        for _ in 0..steps {
            u = shift.apply(&u).unwrap();
        }
        prop_assert_eq!(u.len(), 1);
        let (m, x) = u.entries()[0];
        prop_assert_eq!(m, it.final_mode);
        prop_assert_eq!(x.sign, it.sign);
        prop_assert!((x.logmag - it.lognorm).abs() <= 1e-12 * it.lognorm.abs().max(1.0));
    }

    #[test]
    fn covers_are_valid(p in pts2(), eps in 0.05..1.5f64) {
        let c = planar(&p);
        for m in [CoverMethod::Greedy, CoverMethod::FarthestPoint, CoverMethod::Net, CoverMethod::Exact] {
            let r = covering_number(&c, eps.ln(), m).unwrap();
            prop_assert!(r.valid);
            prop_assert!(r.count >= 1 && r.count <= p.len());
        }
    }

    #[test]
    fn exact_count_monotone_in_eps(p in pts4(), e1 in 0.05..1.0f64, f in 1.0..3.0f64) {
        let c = mixed(&p);
        let small = covering_number(&c, e1.ln(), CoverMethod::Exact).unwrap().count;
        let large = covering_number(&c, (e1 * f).ln(), CoverMethod::Exact).unwrap().count;
        prop_assert!(large <= small);
        prop_assert!(doubling_factor(&c, e1.ln()).unwrap().d >= 1);
    }

    #[test]
    fn counts_invariant_under_common_scaling(p in pts4(), eps in 0.05..1.0f64, k in -40i32..40) {
        let c = mixed(&p);
        let l = k as f64 * std::f64::consts::LN_2;
        let scaled = c.scaled_ln(l);
        let le = eps.ln();
        prop_assert_eq!(
            covering_number(&c, le, CoverMethod::Greedy).unwrap().count,
            covering_number(&scaled, le + l, CoverMethod::Greedy).unwrap().count
        );
        prop_assert_eq!(doubling_factor(&c, le).unwrap().d, doubling_factor(&scaled, le + l).unwrap().d);
    }

    #[test]
    fn projection_does_not_increase_counts(p in pts4(), eps in 0.05..1.5f64) {
        let c = mixed(&p);
        let le = eps.ln();
        let full = covering_number(&c, le, CoverMethod::Exact).unwrap().count;
        let modes = covering_number(&c.project_modes(), le, CoverMethod::Exact).unwrap().count;
        let odd = covering_number(&c.restrict(&[0], &|n| n % 2 == 1), le, CoverMethod::Exact).unwrap().count;
        prop_assert!(modes <= full && odd <= full);
    }

    #[test]
    fn bumps_stay_in_unit_range(lo in -3.0..0.0f64, w in 0.5..3.0f64, x in -5.0..5.0f64) {
        let (a, b) = (lo, lo + w);
        let bump = mollifier_bump(a, b, a + 0.25 * w, b - 0.25 * w, 4).unwrap();
        let v = bump.value(x);
        prop_assert!((0.0..=1.0).contains(&v));
        if x <= a || x >= b {
            prop_assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn drive_symmetries(tau in 0.5..8.0f64, pf in 0.55..0.95f64, t in -20.0..20.0f64) {
        let d = periodic_drive(1.0, tau, pf).unwrap();
        prop_assert!((d.value(-t) + d.value(t)).abs() <= 1e-12);
        prop_assert!((d.value(tau - t) - d.value(t)).abs() <= 1e-12);
    }

    #[test]
    fn at_most_one_kick_term(label in 0.0..1.0f64) {
        prop_assert!(kick().active_terms(label).len() <= 1);
    }

    #[test]
    fn log_reals_track_floats(a in -1e6..1e6f64, b in -1e6..1e6f64) {
        let (x, y) = (LogReal::from_f64(a), LogReal::from_f64(b));
        let tol = 1e-12 * (a.abs() + b.abs()).max(1e-300);
        prop_assert!(((x + y).to_f64() - (a + b)).abs() <= tol);
        prop_assert!(((x * y).to_f64() - a * b).abs() <= 1e-12 * (a * b).abs());
    }
}

#[test]
fn kick_locality_on_a_dense_label_grid() {
    let k = kick();
    let hits = (0..=20_000).map(|i| k.active_terms(i as f64 / 20_000.0).len()).max().unwrap();
    assert_eq!(hits, 1);
}
