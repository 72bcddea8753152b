//! The experiments behind each subcommand.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;

use manelab_core::floquet::{
    analytic_beta, ceil_sqrt, compare_shift, decay_certificate, iterate_norm, poincare_numeric, poincare_predicted,
    PeriodicOperator,
};
use manelab_core::geometry::{
    covering_number, dimension_vs_s_scan, doubling_factor, doubling_prepared, log_doubling_estimate,
    smoothness_criterion, Boundedness, CoverMethod, GrowthVerdict, PointCloud, PointTag, SequenceLaw,
};
use manelab_core::sim::{
    bad_cube_cloud, log_lipschitz_modulus, section4_attractor, shift_for_levels, trajectory_pair_experiment,
    ModulusTrend, PairVerdict, Scenario, Section4Sampling,
};
use manelab_core::spectral::{c1_obstruction_check, is_real, linearization_spectrum, spectral_gap, GapValue, Site};
use manelab_core::{LogModeVector, LogReal};
use serde::Serialize;
use serde_json::json;

use crate::cloud_file::read_cloud;
use crate::config::{CloudKind, Config, ScaleSpec};
use crate::output::{num, Artifacts};
use crate::LabError;

/// One checked verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub verdict: String,
    pub expected: Option<String>,
    pub as_expected: bool,
    pub constants: BTreeMap<String, f64>,
}

impl Verdict {
    fn new(name: &str, verdict: &str, expected: &Option<String>) -> Self {
        Verdict {
            name: name.into(),
            verdict: verdict.into(),
            expected: expected.clone(),
            as_expected: expected.as_deref().is_none_or(|e| e == verdict),
            constants: BTreeMap::new(),
        }
    }

    fn with(mut self, key: &str, value: f64) -> Self {
        self.constants.insert(key.into(), value);
        self
    }
}

/// Verdicts and files of one experiment. A failure still carries whatever
/// files were produced before it, such as a state dump.
#[derive(Debug)]
pub struct Outcome {
    pub verdicts: Vec<Verdict>,
    pub artifacts: Artifacts,
    pub failure: Option<String>,
}

fn core_err(what: &str) -> impl Fn(manelab_core::Error) -> LabError + '_ {
    move |e| LabError::Experiment(format!("{what}: {e}"))
}

fn flag(b: bool) -> String {
    if b { "true".into() } else { "false".into() }
}

pub fn gap_check(cfg: &Config, art: &mut Artifacts) -> Result<Vec<Verdict>, LabError> {
    let spec = cfg.spectrum()?;
    let l = cfg.dynamics.l;
    let gap = spectral_gap(&spec);
    let c1 = c1_obstruction_check(&spec, l, spec.n_max()).map_err(core_err("obstruction check"))?;
    let first_gap = spec.values().windows(2).position(|w| w[1] - w[0] > 2.0 * l).map(|i| i + 1);
    let verdict = match gap {
        GapValue::Unbounded => "unbounded_gap",
        GapValue::Finite(g) if g > 2.0 * l => "gap_holds",
        _ if c1.parity_contradiction => "obstruction",
        _ => "inconclusive",
    };
    let mut eig_rows = Vec::new();
    for (site, n, name) in [(Site::Minus, c1.minus_truncation, "minus"), (Site::Plus, c1.plus_truncation, "plus")] {
        let ls = linearization_spectrum(&spec.prefix(n).map_err(core_err("prefix"))?, l, site)
            .map_err(core_err("linearization"))?;
        for (i, z) in ls.eigenvalues.iter().enumerate() {
            eig_rows.push(vec![name.into(), (i + 1).to_string(), num(z.re), num(z.im), flag(is_real(*z))]);
        }
    }
    let gap_value = gap.finite().unwrap_or(f64::INFINITY);
    art.csv(
        "gap_check.csv",
        &[
            "n_max",
            "L",
            "gap",
            "first_gap_index",
            "minus_truncation",
            "minus_real_count",
            "plus_truncation",
            "plus_real_count",
            "regime_ok",
            "parity_contradiction",
            "verdict",
        ],
        &[vec![
            spec.n_max().to_string(),
            num(l),
            num(gap_value),
            first_gap.map_or(String::new(), |n| n.to_string()),
            c1.minus_truncation.to_string(),
            c1.minus_real_count.to_string(),
            c1.plus_truncation.to_string(),
            c1.plus_real_count.to_string(),
            flag(c1.regime_ok),
            flag(c1.parity_contradiction),
            verdict.into(),
        ]],
    )?;
    art.csv("gap_check_eigenvalues.csv", &["site", "index", "re", "im", "real"], &eig_rows)?;
    let note = match gap {
        GapValue::Unbounded => Some("unbounded gap: the gap condition holds beyond every L, inertial manifold regime"),
        _ => None,
    };
    art.json("gap_check.json", &json!({ "gap": gap, "first_gap_index": first_gap, "c1": c1, "verdict": verdict, "note": note }))?;
    Ok(vec![Verdict::new("gap_check", verdict, &cfg.expect.gap_check)
        .with("L", l)
        .with("gap", gap_value)
        .with("minus_real_count", c1.minus_real_count as f64)
        .with("plus_real_count", c1.plus_real_count as f64)])
}

pub fn floquet(cfg: &Config, art: &mut Artifacts) -> Result<Vec<Verdict>, LabError> {
    let d = &cfg.drive;
    let y = &cfg.dynamics;
    let t = d.t_half();
    let spec = cfg.spectrum()?;
    let small = spec.prefix(y.floquet_modes).map_err(core_err("floquet truncation"))?;
    let mut op = PeriodicOperator::new(&small, t, d.amplitude, d.plateau_fraction).map_err(core_err("operator"))?;
    if let Some(e) = y.epsilon {
        op = op.with_epsilon(e);
    }
    let m = poincare_numeric(&op, y.floquet_modes, y.floquet_tol).map_err(core_err("monodromy"))?;
    let predicted = poincare_predicted(&small, t).map_err(core_err("predicted shift"))?;
    let r = compare_shift(&m, &predicted);
    let shift_ok = r.pattern_ok && r.signs_ok && r.max_log_rel_err <= 1e-6 && r.max_off_pattern <= 1e-8;

    let mut shift_rows = Vec::new();
    for (j, col) in m.columns.iter().enumerate() {
        let ln_norm = manelab_core::logreal::log_sum_exp(&col.iter().map(|x| 2.0 * x.ln_abs()).collect::<Vec<_>>()) / 2.0;
        let e = predicted.entry(j + 1);
        let (image, numeric, off) = match e {
            Some(e) => {
                let off = col
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| i + 1 != e.image)
                    .map(|(_, x)| x.ln_abs())
                    .fold(f64::NEG_INFINITY, f64::max);
                (e.image.to_string(), col[e.image - 1], off - ln_norm)
            }
            None => (String::new(), LogReal::ZERO, f64::NAN),
        };
        shift_rows.push(vec![
            (j + 1).to_string(),
            image,
            e.map_or(String::new(), |e| e.sign.to_string()),
            e.map_or(String::new(), |e| num(e.log_mu)),
            numeric.sign.to_string(),
            num(numeric.ln_abs()),
            num(off),
        ]);
    }
    art.csv(
        "floquet_shift.csv",
        &["column", "image", "sign", "log_mu_predicted", "numeric_sign", "ln_abs_numeric", "ln_off_pattern_ratio"],
        &shift_rows,
    )?;

    let full = poincare_predicted(&spec, t).map_err(core_err("predicted shift"))?;
    let mut cert = decay_certificate(&full, y.decay_mode, y.decay_iterations).map_err(core_err("decay certificate"))?;
    cert.analytic_beta = analytic_beta(&spec, t);
    let mut rows = Vec::new();
    for k in 0..=y.decay_iterations {
        let it = iterate_norm(&full, y.decay_mode, k).map_err(core_err("iterates"))?;
        rows.push(vec![k.to_string(), num(it.lognorm), it.final_mode.to_string(), it.sign.to_string()]);
    }
    art.csv("floquet_iterates.csv", &["N", "lognorm", "final_mode", "sign"], &rows)?;
    art.json(
        "floquet.json",
        &json!({ "t_half": t, "epsilon": op.epsilon, "rhs_evals": m.rhs_evals, "shift_match": r, "decay": cert }),
    )?;

    let mut shift_v = Verdict::new("floquet_shift", if shift_ok { "shift_pattern" } else { "no_pattern" }, &cfg.expect.floquet_shift)
        .with("epsilon", op.epsilon)
        .with("max_log_rel_err", r.max_log_rel_err)
        .with("max_off_pattern", r.max_off_pattern);
    shift_v.constants.insert("checked_columns".into(), r.checked_columns.len() as f64);
    let mut decay_v = Verdict::new(
        "floquet_decay",
        if cert.passes { "super_exponential" } else { "not_certified" },
        &cfg.expect.floquet_decay,
    )
    .with("beta", cert.beta)
    .with("r2", cert.r2);
    if let Some(b) = cert.analytic_beta {
        decay_v = decay_v.with("analytic_beta", b);
    }
    Ok(vec![shift_v, decay_v])
}

fn scenario(cfg: &Config) -> Result<Scenario, LabError> {
    let d = &cfg.drive;
    let y = &cfg.dynamics;
    let mut sc = Scenario::pair_default().map_err(core_err("scenario"))?;
    sc.spectrum = cfg.spectrum_with(y.n_trunc)?;
    sc.l_budget = y.l;
    sc.t_half = d.t_half();
    sc.amplitude = d.amplitude;
    sc.plateau_fraction = d.plateau_fraction;
    sc.n_trunc = y.n_trunc;
    sc.n0 = y.n0;
    sc.n_kick_max = y.n_kick_max;
    sc.kappa = y.kappa;
    sc.kappa_seg = y.kappa_seg;
    sc.periods = y.periods;
    sc.rtol = y.rtol;
    sc.atol = y.atol;
    sc.validate().map_err(core_err("scenario"))?;
    Ok(sc)
}

fn pair_name(v: PairVerdict) -> &'static str {
    match v {
        PairVerdict::SuperExponential => "super_exponential",
        PairVerdict::ExponentialOnly => "exponential_only",
        PairVerdict::Degenerate => "degenerate",
        PairVerdict::Inconclusive => "inconclusive",
    }
}

fn trend_name(t: ModulusTrend) -> &'static str {
    match t {
        ModulusTrend::Bounded => "bounded",
        ModulusTrend::Upward => "upward",
        ModulusTrend::Empty => "empty",
    }
}

pub fn simulate(cfg: &Config, art: &mut Artifacts) -> Result<Vec<Verdict>, LabError> {
    let sc = scenario(cfg)?;
    let y = &cfg.dynamics;
    let w0 = if y.initial_amplitude == 0.0 {
        LogModeVector::new()
    } else {
        LogModeVector::from_entries([(y.initial_mode, LogReal::from_f64(y.initial_amplitude))])
    };
    let exp = match trajectory_pair_experiment(&sc, &w0, y.epsilon, y.samples_per_period) {
        Ok(e) => e,
        Err(e) => {
            art.json_always(
                "simulate_failure.json",
                &json!({
                    "error": e.to_string(),
                    "t_half": sc.t_half,
                    "n_trunc": sc.n_trunc,
                    "periods": sc.periods,
                    "rtol": sc.rtol,
                    "atol": sc.atol,
                    "epsilon": y.epsilon,
                    "initial_state": { "mode": y.initial_mode, "amplitude": y.initial_amplitude },
                }),
            )?;
            return Err(LabError::Experiment(format!("trajectory pair: {e}; state dumped to simulate_failure.json")));
        }
    };
    let f = &exp.fit;
    let mut rows = Vec::with_capacity(exp.u.times.len());
    for (i, &t) in exp.v.times.iter().enumerate() {
        let dist = exp.v.states[i].w.sub(&exp.u.states[i].w).ln_norm();
        let boundary = i % y.samples_per_period == 0;
        rows.push(vec![num(t), num(dist), num(exp.u.ln_norms[i]), num(exp.v.ln_norms[i]), flag(boundary)]);
    }
    art.csv("simulate_pair.csv", &["t", "ln_distance", "ln_norm_u", "ln_norm_v", "period_boundary"], &rows)?;

    let mut out = Vec::new();
    let mut pair = Verdict::new("simulate", pair_name(f.verdict), &cfg.expect.simulate)
        .with("epsilon", exp.epsilon)
        .with("kappa_fit", f.kappa)
        .with("r2", f.r2)
        .with("linear_slope", f.linear_slope)
        .with("linear_r2", f.linear_r2);
    if let Some(k) = f.predicted_kappa {
        pair = pair.with("predicted_kappa", k);
    }
    out.push(pair);

    let mut mod_rows = Vec::new();
    let mut reports = Vec::new();
    for m in &cfg.expect.modulus {
        let r = log_lipschitz_modulus(&exp.u, &exp.v, &sc.spectrum, m.gamma, 0.0, false).map_err(core_err("modulus"))?;
        for &(t, v) in &r.samples {
            mod_rows.push(vec![num(m.gamma), num(t), num(v)]);
        }
        out.push(
            Verdict::new(&format!("modulus_gamma_{}", m.gamma), trend_name(r.trend), &Some(m.trend.clone()))
                .with("gamma", m.gamma)
                .with("sup_first_half", r.sup_first_half)
                .with("sup_second_half", r.sup_second_half),
        );
        reports.push(r);
    }
    art.csv("simulate_modulus.csv", &["gamma", "t", "ln_ratio"], &mod_rows)?;
    art.json(
        "simulate.json",
        &json!({
            "epsilon": exp.epsilon,
            "fit": f,
            "modulus": reports,
            "accepted_steps": [exp.u.accepted_steps, exp.v.accepted_steps],
            "rejected_steps": [exp.u.rejected_steps, exp.v.rejected_steps],
        }),
    )?;
    Ok(out)
}

fn growth_name(g: GrowthVerdict) -> &'static str {
    match g {
        GrowthVerdict::Diverging => "diverging",
        GrowthVerdict::Finite => "finite",
    }
}

fn planar_grid(m: usize) -> Result<PointCloud, LabError> {
    let h = 1.0 / (m - 1) as f64;
    let mut c = PointCloud::new(2, Vec::new(), 0.0);
    for i in 0..m * m {
        c.push(vec![(i % m) as f64 * h, (i / m) as f64 * h], LogModeVector::new(), PointTag::Plain)
            .map_err(core_err("grid"))?;
    }
    Ok(c)
}

/// Box-counting scan over `s`, with `D_eps` at every scale when asked.
fn scan(cloud: &PointCloud, cfg: &Config, ln_scales: &[f64], art: &mut Artifacts) -> Result<Vec<(f64, f64)>, LabError> {
    let g = &cfg.geometry;
    let sc = dimension_vs_s_scan(cloud, &g.s_list, ln_scales).map_err(core_err("dimension scan"))?;
    let doubling = g.doubling.unwrap_or(false);
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for row in &sc.rows {
        let e = &row.estimate;
        let prep = if doubling { Some(cloud.with_s(row.s).prepare()) } else { None };
        for (i, (&l, &n)) in e.ln_eps.iter().zip(&e.counts).enumerate() {
            let d = match &prep {
                Some(p) => doubling_prepared(p, l).map_err(core_err("doubling"))?.d.to_string(),
                None => String::new(),
            };
            let local = if i == 0 { String::new() } else { num(e.local_slopes[i - 1]) };
            rows.push(vec![num(row.s), num(l.exp()), num(l), n.to_string(), d, local]);
        }
        fits.push(vec![num(row.s), num(e.slope), num(e.intercept), num(e.r2), format!("{:?}", e.method).to_lowercase()]);
    }
    art.csv("dimension.csv", &["s", "eps", "ln_eps", "N_eps", "D_eps", "local_slope"], &rows)?;
    art.csv("dimension_fit.csv", &["s", "slope", "intercept", "r2", "method"], &fits)?;
    art.json("dimension_scan.json", &sc)?;
    Ok(sc.rows.iter().map(|r| (r.s, r.estimate.slope)).collect())
}

fn cube(cfg: &Config, art: &mut Artifacts) -> Result<Vec<Verdict>, LabError> {
    let g = &cfg.geometry;
    let top = *g.levels.iter().max().expect("levels validated nonempty");
    let need = 2 * (2 * top + ceil_sqrt(top)) + 2;
    let spec = cfg.spectrum_with(need)?;
    let t = cfg.drive.t_half();
    let shift = shift_for_levels(&spec, t, top).map_err(core_err("cube shift"))?;
    let (cloud, levels, beta) = bad_cube_cloud(&spec, &shift, &g.levels).map_err(core_err("cube cloud"))?;
    let prep = cloud.prepare();
    let mut rows = Vec::new();
    let mut groups = Vec::new();
    let mut bounds_hold = true;
    for lv in &levels {
        let k = ceil_sqrt(lv.n);
        let mut sub = PointCloud::for_spectrum(0, &spec, 0.0);
        for &i in &lv.points {
            sub.push(Vec::new(), cloud.points()[i].modes.clone(), PointTag::Vertex { n: lv.n, p: i })
                .map_err(core_err("cube level"))?;
        }
        let half = lv.ln_eps - LN_2;
        let separated = lv
            .points
            .iter()
            .enumerate()
            .all(|(a, &i)| lv.points[a + 1..].iter().all(|&j| prep.ln_dist(i, j) > half));
        let n_half = if separated {
            lv.points.len()
        } else {
            covering_number(&sub, half, CoverMethod::Greedy).map_err(core_err("cover"))?.count
        };
        let scales: Vec<f64> = (1..=k).map(|h| lv.ln_eps + 0.5 * (h as f64).ln()).collect();
        let mut d = 0;
        for &e in &scales {
            d = d.max(doubling_factor(&sub, e).map_err(core_err("doubling"))?.d);
        }
        let log2d = (d.max(1) as f64).log2();
        let ok = separated && n_half >= 1 << k && log2d >= 0.5 * (lv.n as f64).sqrt();
        bounds_hold &= ok;
        rows.push(vec![
            lv.n.to_string(),
            k.to_string(),
            num(lv.ln_eps),
            lv.points.len().to_string(),
            flag(separated),
            n_half.to_string(),
            d.to_string(),
            num(log2d),
            num(0.5 * (lv.n as f64).sqrt()),
            flag(ok),
        ]);
        groups.push(scales);
    }
    art.csv(
        "dimension_cube.csv",
        &["n", "k", "ln_eps", "vertices", "separated", "N_half", "D", "log2_D", "half_sqrt_n", "bound_ok"],
        &rows,
    )?;
    let ld = log_doubling_estimate(&cloud, &groups).map_err(core_err("log-doubling"))?;
    let ld_rows: Vec<Vec<String>> = ld
        .ln_eps
        .iter()
        .zip(&ld.d)
        .enumerate()
        .map(|(i, (&l, &d))| {
            let local = if i == 0 { String::new() } else { num(ld.local_slopes[i - 1]) };
            vec![num(l), num((-l).ln()), d.to_string(), local]
        })
        .collect();
    art.csv("dimension_log_doubling.csv", &["ln_eps", "ln_ln_inv_eps", "D", "local_slope"], &ld_rows)?;
    if let Some(s) = &g.scales {
        scan(&cloud, cfg, &ScaleSpec::parse(s)?.ln_scales(), art)?;
    }
    art.json("dimension.json", &json!({ "cloud": "cube", "beta": beta, "levels": levels, "log_doubling": ld, "bounds_hold": bounds_hold }))?;
    Ok(vec![Verdict::new("dimension", growth_name(ld.verdict), &cfg.expect.dimension)
        .with("beta", beta)
        .with("log_doubling_slope", ld.slope)
        .with("doubling_dimension", ld.doubling_dimension)
        .with("bounds_hold", if bounds_hold { 1.0 } else { 0.0 })])
}

fn section4(cfg: &Config, art: &mut Artifacts) -> Result<Vec<Verdict>, LabError> {
    let g = &cfg.geometry;
    let spec = cfg.spectrum_with(g.section4_modes.max(g.smoothness_modes))?;
    let (b, a) = (SequenceLaw::LogCubedHeights, SequenceLaw::LogSquaredLengths);
    let sampling = Section4Sampling {
        disk_spacing: g.disk_spacing,
        segment_points: g.segment_points,
        segment_floor: g.segment_floor,
    };
    let (cloud, rep, _) = section4_attractor(&b, &a, &spec, g.section4_modes, cfg.dynamics.beta_scale, &sampling)
        .map_err(core_err("cone attractor"))?;
    let scales = ScaleSpec::parse(g.scales.as_deref().expect("resolved"))?.ln_scales();
    let slopes = scan(&cloud, cfg, &scales, art)?;
    let mut smooth_rows = Vec::new();
    let mut smooth = Vec::new();
    for (s, k) in [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
        let r = smoothness_criterion(&b, &a, &spec, s, k, g.smoothness_modes).map_err(core_err("smoothness"))?;
        smooth_rows.push(vec![
            num(s),
            num(k),
            format!("{:?}", r.verdict).to_lowercase(),
            r.first_n.to_string(),
            g.smoothness_modes.to_string(),
            num(*r.values.last().unwrap_or(&f64::NAN)),
            r.witness.last().map_or(String::new(), |w| w.to_string()),
        ]);
        smooth.push(r.verdict);
    }
    art.csv("smoothness.csv", &["s", "k", "verdict", "first_n", "n_max", "last_value", "last_running_max"], &smooth_rows)?;
    let worst = slopes.iter().filter(|(s, _)| *s <= 2.0).map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let profile_ok =
        worst <= 2.5 && smooth == [Boundedness::Bounded, Boundedness::Bounded, Boundedness::Unbounded];
    art.json("dimension.json", &json!({ "cloud": "section4", "points": cloud.len(), "report": rep, "smoothness": smooth }))?;
    Ok(vec![Verdict::new(
        "dimension",
        if profile_ok { "bounded_profile" } else { "unbounded_profile" },
        &cfg.expect.dimension,
    )
    .with("points", cloud.len() as f64)
    .with("max_slope_s_le_2", worst)])
}

fn generic(cfg: &Config, cloud: PointCloud, name: &str, art: &mut Artifacts) -> Result<Vec<Verdict>, LabError> {
    let g = &cfg.geometry;
    let scales = ScaleSpec::parse(g.scales.as_deref().expect("resolved"))?.ln_scales();
    let slopes = scan(&cloud, cfg, &scales, art)?;
    let span = scales.first().unwrap() - scales.last().unwrap();
    let evaluable = g.doubling.unwrap_or(false) && scales.iter().all(|&l| l < 0.0) && span >= 2.0 * std::f64::consts::LN_10;
    let mut v = if evaluable {
        let base = cloud.with_s(g.s_list[0]);
        let groups: Vec<Vec<f64>> = scales.iter().map(|&l| vec![l]).collect();
        let ld = log_doubling_estimate(&base, &groups).map_err(core_err("log-doubling"))?;
        art.json("dimension.json", &json!({ "cloud": name, "points": cloud.len(), "log_doubling": ld }))?;
        Verdict::new("dimension", growth_name(ld.verdict), &cfg.expect.dimension)
            .with("log_doubling_slope", ld.slope)
            .with("doubling_dimension", ld.doubling_dimension)
    } else {
        art.json("dimension.json", &json!({ "cloud": name, "points": cloud.len() }))?;
        Verdict::new("dimension", "not_evaluated", &cfg.expect.dimension)
    };
    for (s, slope) in slopes {
        v = v.with(&format!("slope_s_{s}"), slope);
    }
    Ok(vec![v.with("points", cloud.len() as f64)])
}

pub fn dimension(cfg: &Config, art: &mut Artifacts) -> Result<Vec<Verdict>, LabError> {
    match cfg.geometry.cloud {
        CloudKind::Cube => cube(cfg, art),
        CloudKind::Section4 => section4(cfg, art),
        CloudKind::Grid => generic(cfg, planar_grid(cfg.geometry.grid_points)?, "grid", art),
        CloudKind::File => {
            let path = cfg.geometry.file.as_ref().expect("resolved");
            let f = std::fs::File::open(path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
            let cloud = read_cloud(std::io::BufReader::new(f), |n| cfg.spectrum_with(n)).map_err(|e| match e {
                LabError::Parse { line, msg } => LabError::Parse { line, msg: format!("{}: {msg}", path.display()) },
                other => other,
            })?;
            generic(cfg, cloud, "file", art)
        }
    }
}

/// Runs `f` and packages its result.
pub fn run_one(cfg: &Config, f: fn(&Config, &mut Artifacts) -> Result<Vec<Verdict>, LabError>) -> Outcome {
    let mut art = Artifacts::new(&cfg.output.formats);
    match f(cfg, &mut art) {
        Ok(verdicts) => Outcome { verdicts, artifacts: art, failure: None },
        Err(e) => Outcome { verdicts: Vec::new(), artifacts: art, failure: Some(e.to_string()) },
    }
}
