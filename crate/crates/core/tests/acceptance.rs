//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Long experiments run on desk-scale meshes (coarse h = 2^-7, refinement 4,
//! dt = 2^-11 for the 1D hybrid model; Schrodinger dx = eps/8) so that the whole
//! suite finishes in tens of minutes on one core.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use surfhop::harness::verify::{verify_all, VerifyOptions, ALGEBRA_TOL, IDENTITY_TOL};
use surfhop::harness::{parse_config, run_experiment, ExperimentConfig, RunReport, SolverKind};
use surfhop::hybrid::{build_partition, run_hybrid, HybridParams};
use surfhop::linalg::{mat4_apply, C64};
use surfhop::liouville::advection::{advect_tvd, total_variation};
use surfhop::liouville::{run_liouville, LiouvilleParams, SourceOperator};
use surfhop::observables::{fit_rate, ObservableSeries, TransitionCriteria};
use surfhop::potentials::{ModelKind, TwoBandPotential};
use surfhop::schrodinger::run_schrodinger;

const DESK_1D: [&str; 4] = [
    "liouville.h=0.0078125",
    "liouville.dt=0.00048828125",
    "hybrid.refinement=4",
    r#"schrodinger.dx={"coeff":0.125,"power":1}"#,
];

fn desk(preset: &str, eps: f64, extra: &[&str]) -> ExperimentConfig {
    let overrides: Vec<String> = DESK_1D.iter().chain(extra).map(|s| s.to_string()).collect();
    parse_config(Some(preset), None, &overrides, Some(eps)).expect("desk config").1
}

struct Line {
    pass: bool,
    detail: String,
}

impl Line {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

/// Desk runs shared between criteria, keyed by preset and log2(1/eps).
#[derive(Default)]
struct Runs {
    cache: BTreeMap<(String, i32), RunReport>,
}

impl Runs {
    fn get(&mut self, preset: &str, k: i32) -> &RunReport {
        self.cache.entry((preset.to_string(), k)).or_insert_with(|| {
            let start = Instant::now();
            let cfg = desk(preset, 2f64.powi(-k), &[]);
            let r = run_experiment(&cfg, None, None).expect("desk run");
            eprintln!("  [{preset} eps=2^-{k}: {:.0}s]", start.elapsed().as_secs_f64());
            r
        })
    }
}

fn series(r: &RunReport, s: SolverKind) -> &ObservableSeries {
    &r.outcome(s).expect("solver ran").series
}

fn c1_algebra() -> Line {
    let opts = VerifyOptions {
        samples: 1000,
        ..Default::default()
    };
    let rs = verify_all(&opts).expect("verify suite");
    let alg = rs.iter().map(|r| r.unitarity.max(r.diagonalisation).max(r.skew).max(r.real_part)).fold(0.0, f64::max);
    let fd = rs.iter().map(|r| r.coupling_fd).fold(0.0, f64::max);
    let ids = rs.iter().map(|r| r.conjugation.max(r.laplacian).max(r.berry)).fold(0.0, f64::max);
    let pass = rs.iter().all(|r| r.passes());
    Line::new(
        pass,
        format!(
            "{} samples x 3 models; algebra {alg:.1e} (<{ALGEBRA_TOL:.0e}), b vs FD {fd:.1e}, identities {ids:.1e} (<{IDENTITY_TOL:.0e})",
            opts.samples
        ),
    )
}

fn rk4(g: &surfhop::linalg::Mat4, f: [C64; 4], dt: f64, steps: usize) -> [C64; 4] {
    let h = dt / steps as f64;
    let mut y = f;
    let axpy = |a: &[C64; 4], s: f64, b: &[C64; 4]| -> [C64; 4] { std::array::from_fn(|k| a[k] + b[k] * s) };
    for _ in 0..steps {
        let k1 = mat4_apply(g, &y);
        let k2 = mat4_apply(g, &axpy(&y, h / 2.0, &k1));
        let k3 = mat4_apply(g, &axpy(&y, h / 2.0, &k2));
        let k4 = mat4_apply(g, &axpy(&y, h, &k3));
        y = std::array::from_fn(|k| y[k] + (k1[k] + k2[k] * 2.0 + k3[k] * 2.0 + k4[k]) * (h / 6.0));
    }
    y
}

fn c2_solver_units(runs: &mut Runs) -> Line {
    // TSSP norm over a full 1D run
    let cfg = desk("1d-pure", 2f64.powi(-8), &[]);
    let pot = cfg.potential().unwrap();
    let s = run_schrodinger(&cfg.schrodinger_params().unwrap(), &pot).unwrap();
    let norm_drift = (s.final_field.norm_sqr() - s.initial_norm).abs();

    // total variation of an advected square wave
    let n = 400;
    let h = 1.0 / n as f64;
    let mut f: Vec<f64> = (0..n).map(|i| if (100..200).contains(&i) { 1.0 } else { 0.0 }).collect();
    let vel = vec![1.0; 1];
    let mut tv = total_variation(&f, &[n], 0);
    let mut tv_ok = true;
    for _ in 0..300 {
        advect_tvd(&mut f, &[n], 0, &vel, 0.4 * h, h).unwrap();
        let next = total_variation(&f, &[n], 0);
        tv_ok &= next <= tv + 1e-12;
        tv = next;
    }

    // order of accuracy on a smooth profile
    let mut pairs = Vec::new();
    for n in [100usize, 200, 400, 800] {
        let h = 1.0 / n as f64;
        let profile = |x: f64| (-200.0 * (x - 0.3f64).powi(2)).exp();
        let mut f: Vec<f64> = (0..n).map(|i| profile((i as f64 + 0.5) * h)).collect();
        let dt = 0.4 * h;
        let steps = (0.25 / dt).round() as usize;
        for _ in 0..steps {
            advect_tvd(&mut f, &[n], 0, &[1.0], dt, h).unwrap();
        }
        let t = steps as f64 * dt;
        let err: f64 = (0..n).map(|i| (f[i] - profile((i as f64 + 0.5) * h - t)).abs() * h).sum();
        pairs.push((h, err));
    }
    let order = fit_rate(&pairs).unwrap();

    // total mass of the hybrid run
    let r = runs.get("1d-pure", 8);
    let hs = series(r, SolverKind::Hybrid);
    let m0 = hs.p_plus[0] + hs.p_minus[0];
    let mass_drift = (0..hs.len()).map(|k| (hs.p_plus[k] + hs.p_minus[k] - m0).abs()).fold(0.0, f64::max);

    // realness of f+- under the complex 4x4 source generator
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut imag: f64 = 0.0;
    for kind in [ModelKind::OneD, ModelKind::TwoDReal, ModelKind::TwoDComplex] {
        let pot = TwoBandPotential::new(kind, 0.1).unwrap();
        for _ in 0..20 {
            let x: Vec<f64> = (0..kind.dim()).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let p: Vec<f64> = (0..kind.dim()).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let op = SourceOperator::at(&pot, &x, &p, 1.0 / 64.0);
            let fi = C64::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1));
            let v = [C64::new(0.7, 0.0), C64::new(0.2, 0.0), fi, fi.conj()];
            let out = rk4(&op.generator(), v, 0.01, 2000);
            imag = imag.max(out[0].im.abs()).max(out[1].im.abs());
        }
    }

    let pass = norm_drift < 1e-10 && tv_ok && (1.6..=2.2).contains(&order) && mass_drift < 1e-8 && imag < 1e-12;
    Line::new(
        pass,
        format!(
            "TSSP norm drift {norm_drift:.1e}; TVD {}; order {order:.3}; mass drift {mass_drift:.1e}; Im f+- {imag:.1e}",
            if tv_ok { "non-increasing" } else { "INCREASED" }
        ),
    )
}

fn c3_one_transition(runs: &mut Runs) -> Line {
    let r = runs.get("1d-pure", 8);
    let (s, h) = (series(r, SolverKind::Schrodinger), series(r, SolverKind::Hybrid));
    let (ps, ph) = (s.p_plus_at(0.75).unwrap(), h.p_plus_at(0.75).unwrap());
    let c = TransitionCriteria::default();
    let (ns, nh) = (s.transitions(&c).len(), h.transitions(&c).len());
    let diff = (ps - ph).abs();
    Line::new(
        diff <= 0.05 && ns == 1 && nh == 1,
        format!("eps=2^-8: P+(0.75) hybrid {ph:.4}, reference {ps:.4}, |diff| {diff:.4} (<=0.05); transitions {nh}/{ns}"),
    )
}

fn err_study(runs: &mut Runs, preset: &str, ks: &[i32]) -> (Vec<(f64, f64)>, bool) {
    let pairs: Vec<(f64, f64)> = ks
        .iter()
        .map(|&k| (2f64.powi(-k), runs.get(preset, k).err().expect("err")))
        .collect();
    let monotone = pairs.windows(2).all(|w| w[1].1 < w[0].1);
    (pairs, monotone)
}

fn fmt_errs(pairs: &[(f64, f64)]) -> String {
    pairs
        .iter()
        .map(|(e, v)| format!("2^{}:{v:.2e}", e.log2().round()))
        .collect::<Vec<_>>()
        .join(" ")
}

fn c4_rate(runs: &mut Runs) -> Line {
    let (pairs, monotone) = err_study(runs, "1d-pure", &[6, 7, 8, 9]);
    let slope = fit_rate(&pairs).unwrap();
    Line::new(
        monotone && (0.3..=0.7).contains(&slope),
        format!("Err {}; monotone {monotone}; slope {slope:.3} (in [0.3, 0.7])", fmt_errs(&pairs)),
    )
}

fn c5_double_transition() -> Line {
    let start = Instant::now();
    let cfg = desk("1d-pure-longtime", 2f64.powi(-8), &[]);
    let r = run_experiment(&cfg, None, None).expect("longtime run");
    eprintln!("  [1d-pure-longtime eps=2^-8: {:.0}s]", start.elapsed().as_secs_f64());
    let c = TransitionCriteria::default();
    let th: Vec<f64> = series(&r, SolverKind::Hybrid).transitions(&c).iter().map(|t| t.time).collect();
    let ts: Vec<f64> = series(&r, SolverKind::Schrodinger).transitions(&c).iter().map(|t| t.time).collect();
    let pass = th.len() == 2
        && ts.len() == 2
        && (0.15..=0.45).contains(&th[0])
        && (2.4..=3.1).contains(&th[1])
        && (th[0] - ts[0]).abs() <= 0.1
        && (th[1] - ts[1]).abs() <= 0.1;
    Line::new(pass, format!("hybrid jumps at {th:.3?}, reference at {ts:.3?}"))
}

fn c6_mixed(runs: &mut Runs) -> Line {
    let (pairs, monotone) = err_study(runs, "1d-mixed", &[6, 7, 8]);
    let r = runs.get("1d-mixed", 8);
    let (s, h) = (
        r.outcome(SolverKind::Schrodinger).unwrap().final_p(),
        r.outcome(SolverKind::Hybrid).unwrap().final_p(),
    );
    let (dp, dm) = ((s.0 - h.0).abs(), (s.1 - h.1).abs());
    Line::new(
        monotone && dp <= 0.08 && dm <= 0.08,
        format!(
            "Err {}; monotone {monotone}; eps=2^-8 final |dP+| {dp:.4}, |dP-| {dm:.4} (<=0.08)",
            fmt_errs(&pairs)
        ),
    )
}

/// Runs to `t_final = 0.703125` so the series covers the crossing, which the
/// packet reaches near `t = 0.45` at this epsilon.
fn c7_two_d() -> Line {
    let eps = 2f64.powi(-6);
    let base = |j: i32| {
        let h = eps.sqrt() / 2f64.powi(j - 1);
        let o = [format!("liouville.h={h}"), "t_final=0.703125".to_string()];
        parse_config(Some("2d-pure"), None, &o, Some(eps)).unwrap().1
    };
    let cfg = base(1);
    let pot = cfg.potential().unwrap();
    let start = Instant::now();
    let schr = run_schrodinger(&cfg.schrodinger_params().unwrap(), &pot).unwrap().series;
    eprintln!("  [2d schrodinger: {:.0}s]", start.elapsed().as_secs_f64());
    let mut levels = Vec::new();
    for j in 1..=3 {
        let start = Instant::now();
        let r = run_hybrid(&base(j).hybrid_params().unwrap(), &pot).unwrap();
        eprintln!("  [2d hybrid j={j}: {:.0}s]", start.elapsed().as_secs_f64());
        levels.push(r.series);
    }
    let t = 0.234375;
    let finest = levels.last().unwrap();
    let diff = (finest.p_plus_at(t).unwrap() - schr.p_plus_at(t).unwrap()).abs();
    let cauchy: Vec<f64> = levels.windows(2).map(|w| w[0].max_p_plus_difference(&w[1]).unwrap()).collect();
    let ratios: Vec<f64> = cauchy.windows(2).map(|w| w[0] / w[1]).collect();
    let end = (finest.last().unwrap().1 - schr.last().unwrap().1).abs();
    Line::new(
        diff <= 0.08 && ratios.iter().all(|r| *r >= 1.5),
        format!(
            "|P+ - ref| at t={t}: {diff:.4} (<=0.08); Cauchy diffs [{}], ratios {ratios:.2?} (>=1.5); |P+ - ref| at t=0.703: {end:.4}",
            cauchy.iter().map(|c| format!("{c:.2e}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn c8_degenerate() -> Line {
    let eps = 2f64.powi(-6);
    let cfg = parse_config(
        Some("1d-pure"),
        None,
        &["liouville.h=0.03125".into(), "liouville.dt=0.001953125".into(), "hybrid.c0=100".into()],
        Some(eps),
    )
    .unwrap()
    .1;
    let pot = cfg.potential().unwrap();
    let hp: HybridParams = cfg.hybrid_params().unwrap();
    let part = build_partition(hp.epsilon, hp.c0, &hp.coarse, hp.refinement, hp.momentum_refinement).unwrap();
    let hybrid = run_hybrid(&hp, &pot).unwrap();
    let fine = run_liouville(
        &LiouvilleParams {
            packet: hp.packet.clone(),
            grid: part.fine.clone(),
            epsilon: eps,
            dt: hybrid.dt,
            t_final: hp.t_final,
            output_interval: hp.output_interval,
            coupled: true,
            snapshot_times: vec![],
        },
        &pot,
    )
    .unwrap();
    let d = hybrid.series.max_p_plus_difference(&fine.series).unwrap();
    Line::new(
        part.is_degenerate() && d <= 1e-10,
        format!("degenerate {}; max |P+ hybrid - P+ fine| {d:.1e} (<=1e-10)", part.is_degenerate()),
    )
}

fn main() {
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let want = |k: u32| only.as_ref().is_none_or(|o| o.contains(&k));
    let mut runs = Runs::default();
    let mut failed = 0;
    let names = [
        "algebraic property suite",
        "solver unit properties",
        "1D pure-state transition",
        "convergence rate",
        "long-time double transition",
        "mixed-state study",
        "2D desk-scale check",
        "degenerate-partition equivalence",
    ];
    for (i, name) in names.iter().enumerate() {
        let k = i as u32 + 1;
        if !want(k) {
            continue;
        }
        let start = Instant::now();
        let line = match k {
            1 => c1_algebra(),
            2 => c2_solver_units(&mut runs),
            3 => c3_one_transition(&mut runs),
            4 => c4_rate(&mut runs),
            5 => c5_double_transition(),
            6 => c6_mixed(&mut runs),
            7 => c7_two_d(),
            _ => c8_degenerate(),
        };
        if !line.pass {
            failed += 1;
        }
        println!(
            "criterion {k} ({name}): {} [{:.0}s] {}",
            if line.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            line.detail
        );
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
