//! Acceptance suite. Prints one PASS/FAIL line per criterion, with the
//! measured quantities underneath, then checks that the failing set is the
//! documented one.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use conelab::cli::{execute, verify_ledger, DataKind, Experiment, RunConfig};
use conelab::fields::{make_constant_data, make_gaussian_data, FieldMeta, Frame, GridSpec, ScalarField, VectorField};
use conelab::geometry::{CoeffKind, ConeChart};
use conelab::kernels::{
    envelope_check, kernel_constants, riesz_convolve, riesz_convolve_direct, ConvolutionEngine,
};
use conelab::limits::{
    blowup_fit, reconstruct_center_series, ForcingAccumulator,
};
use conelab::scheme::{
    contraction_constant, march, nonvanish_criterion, original_nse_picard, picard_lockstep, residual_check_forced,
    transform_audit, ConvectionVariant, NseOptions, PicardReport, SchemeConfig, TermToggles,
};

/// Criteria that fail for documented reasons; see the README.
const KNOWN_FAILURES: [usize; 4] = [5, 7, 8, 9];

struct Verdict {
    lines: Vec<String>,
    pass: bool,
}

impl Verdict {
    fn new() -> Self {
        Self { lines: Vec::new(), pass: true }
    }

    fn check(&mut self, ok: bool, what: String) {
        self.lines.push(format!("    [{}] {what}", if ok { "ok" } else { "FAIL" }));
        self.pass &= ok;
    }

    fn info(&mut self, what: String) {
        self.lines.push(format!("    [info] {what}"));
    }

    fn runtime(&mut self, start: Instant, limit: Duration) {
        let e = start.elapsed();
        self.check(e < limit, format!("runtime {:.2} s < {} s", e.as_secs_f64(), limit.as_secs()));
    }
}

fn chart(rho: f64) -> ConeChart<f64> {
    ConeChart::new(3, rho).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn damping_log_divergence() -> Verdict {
    let t0 = Instant::now();
    let mut v = Verdict::new();
    for (rho, eps) in [(0.1, 1e-3), (0.05, 1e-4)] {
        let got = chart(rho).damping_time_integral(eps).unwrap();
        let want = (rho / eps).ln();
        v.check(rel(got, want) <= 1e-6, format!("rho={rho} eps={eps}: integral {got} vs ln(rho/eps) {want}, rel {:.2e}", rel(got, want)));
    }
    v.runtime(t0, Duration::from_secs(1));
    v
}

fn coefficient_ledger() -> Verdict {
    let t0 = Instant::now();
    let mut v = Verdict::new();
    for rho in [0.2, 0.1, 0.05, 0.01] {
        let sup = chart(rho).coeff_sup(CoeffKind::Burgers).value;
        v.check(rel(sup, rho) <= 1e-6, format!("sup Burgers at rho={rho}: {sup}, rel {:.2e}", rel(sup, rho)));
    }
    let want = 27f64.sqrt() / 4.0;
    for rho in [0.2, 0.01] {
        let sup = chart(rho).coeff_sup(CoeffKind::Damping).value;
        v.check(rel(sup, want) <= 1e-6, format!("sup damping at rho={rho}: {sup} vs 3*sqrt(3)/4, rel {:.2e}", rel(sup, want)));
    }
    let ledger = verify_ledger(&RunConfig::default()).unwrap();
    let entry = ledger.discrepancies.iter().find(|d| d.name == "sup damping coefficient");
    v.check(
        entry.is_some_and(|d| d.claimed == Some(1.0) && d.measured.is_some_and(|m| (m - want).abs() < 1e-6)),
        format!("ledger discrepancy entry: {:?}", entry.map(|d| (d.measured, d.claimed))),
    );
    v.runtime(t0, Duration::from_secs(1));
    v
}

fn transform_audit_criterion() -> Verdict {
    let t0 = Instant::now();
    let mut v = Verdict::new();
    let c = chart(0.05);
    let a = transform_audit(1000, 7, &c).unwrap();
    let b = transform_audit(1000, 7, &c).unwrap();
    for term in ["burgers", "damping", "leray"] {
        let e = a.entry(term, None).unwrap();
        v.check(e.max_rel_error <= 1e-10, format!("{term}: max relative error {:.2e} over {} samples", e.max_rel_error, a.samples));
    }
    v.check(
        a.resolved_variant == ConvectionVariant::ChainRule && b.resolved_variant == a.resolved_variant,
        format!("convection variant resolved to {} on both runs", a.resolved_variant),
    );
    v.runtime(t0, Duration::from_secs(10));
    v
}

fn kernel_bounds() -> Verdict {
    let t0 = Instant::now();
    let mut v = Verdict::new();
    let taus = [1e-3, 1e-2, 1e-1, 1.0];
    for mu in [0.3, 0.5, 0.9] {
        let r = envelope_check(&kernel_constants(3, mu).unwrap(), 0.1, &taus, 32, 4.0).unwrap();
        v.check(r.value_ratio <= 1.0 + 1e-9, format!("value envelope mu={mu}: worst ratio {:.6} over {} samples", r.value_ratio, r.samples));
    }
    for mu in [0.6, 0.75, 0.9] {
        let r = envelope_check(&kernel_constants(3, mu).unwrap(), 0.1, &taus, 32, 4.0).unwrap();
        v.check(r.grad_ratio <= 1.0 + 1e-9, format!("gradient envelope mu={mu}: worst ratio {:.6}", r.grad_ratio));
    }

    let spec = GridSpec::new(3, 64, 8.0).unwrap();
    let eng = ConvolutionEngine::new(&spec);
    let coords = spec.coords();
    // Smooth periodic-compatible field with a nontrivial gradient part.
    let mut comps = vec![vec![0.0; spec.len()]; 3];
    spec.for_each_index(|flat, idx| {
        let x: Vec<f64> = idx.iter().map(|&k| coords[k]).collect();
        let g = (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 2.0).exp();
        comps[0][flat] = g * (1.0 + x[1]);
        comps[1][flat] = g * x[2] * x[0];
        comps[2][flat] = -g * x[1];
    });
    let p1 = eng.leray(&comps);
    let p2 = eng.leray(&p1);
    let idem = p1.iter().flatten().zip(p2.iter().flatten()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    v.check(idem <= 1e-10, format!("Leray idempotence at 64^3: {idem:.2e}"));

    // ∇φ with φ = exp(−|x|²/2) sampled analytically.
    let mut grad = vec![vec![0.0; spec.len()]; 3];
    spec.for_each_index(|flat, idx| {
        let x: Vec<f64> = idx.iter().map(|&k| coords[k]).collect();
        let g = (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 2.0).exp();
        for a in 0..3 {
            grad[a][flat] = -x[a] * g;
        }
    });
    let pg = eng.leray(&grad);
    let ann = pg.iter().flatten().map(|a| a.abs()).fold(0.0, f64::max);
    v.check(ann <= 1e-10, format!("Leray annihilates a gradient at 64^3: {ann:.2e}"));

    let meta = FieldMeta::new(Frame::OriginalX, 0.0, 0.1, 0.0);
    let bump = ScalarField::from_fn(spec, meta, |x| {
        let r2 = x.iter().map(|v| v * v).sum::<f64>() / 4.0;
        if r2 < 1.0 {
            (-1.0 / (1.0 - r2)).exp()
        } else {
            0.0
        }
    });
    let fast = riesz_convolve(&bump, 0).unwrap();
    let c = 32;
    let targets: Vec<usize> = [[c + 2, c, c], [c + 4, c + 1, c], [c - 3, c + 2, c + 1], [c + 8, c, c - 2], [c - 6, c - 6, c], [c + 1, c + 3, c - 4]]
        .iter()
        .map(|i| spec.flat_index(i))
        .collect();
    let direct = riesz_convolve_direct(&bump, 0, &targets).unwrap();
    let scale = fast.max_abs();
    let worst = targets.iter().zip(&direct).map(|(&t, d)| (fast.data[t] - d).abs() / scale).fold(0.0, f64::max);
    v.check(worst <= 1e-3, format!("Riesz fast vs direct on a compact bump at 64^3: relative {worst:.2e}"));
    v.runtime(t0, Duration::from_secs(60));
    v
}

fn lockstep(rho: f64, nu: f64, points: usize, s_max: f64, k_max: usize) -> PicardReport {
    let c = chart(rho);
    let mut cfg = SchemeConfig::new(c, nu, points).unwrap();
    cfg.s_max = s_max;
    cfg.k_max = k_max;
    cfg.norm_every = 1;
    let data = make_gaussian_data(&c, points).unwrap();
    picard_lockstep(&cfg, &data.h_rho).unwrap()
}

/// Ratios of consecutive increments, skipping pairs at round-off level.
fn resolved_ratios(r: &PicardReport) -> Vec<Option<f64>> {
    let floor = 1e-14 * r.data_norm;
    r.increments.windows(2).map(|w| if w[1] > floor && w[0] > floor { Some(w[1] / w[0]) } else { None }).collect()
}

fn contraction() -> Verdict {
    let t0 = Instant::now();
    let mut v = Verdict::new();
    let (pts, s_max, k) = (32, 1.0, 4);
    let base = lockstep(0.02, 1e-2, pts, s_max, k);
    let cstar = contraction_constant(base.data_norm, 2, &kernel_constants(3, 0.75).unwrap()).unwrap();
    let bound = 0.02 * cstar;
    let r02 = resolved_ratios(&base);
    v.info(format!("rho=0.02 nu=1e-2 increments {:?}", base.increments));
    let later: Vec<f64> = r02.iter().skip(1).flatten().copied().collect();
    v.check(
        later.iter().all(|&r| r <= bound),
        format!("ratios after the first {later:?} <= rho*c* = {bound:.3e}"),
    );

    let half = lockstep(0.01, 1e-2, pts, s_max, k);
    let r01 = resolved_ratios(&half);
    let pairs: Vec<(f64, f64)> = r01.iter().zip(&r02).filter_map(|(a, b)| Some(((*a)?, (*b)?))).collect();
    v.check(
        !pairs.is_empty() && pairs.iter().all(|(a, b)| *a <= 0.6 * b),
        format!("rho=0.01 vs rho=0.02 ratios {pairs:?}, need each <= 0.6x"),
    );

    let mut by_nu = Vec::new();
    for nu in [1e-1, 1e-2, 1e-3] {
        let r = if nu == 1e-2 { r02.clone() } else { resolved_ratios(&lockstep(0.02, nu, pts, s_max, k)) };
        by_nu.push((nu, r));
    }
    let mut agree = true;
    for j in 0..r02.len() {
        let vals: Vec<f64> = by_nu.iter().filter_map(|(_, r)| r[j]).collect();
        if vals.len() < by_nu.len() {
            agree = false;
            continue;
        }
        let (lo, hi) = vals.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &x| (l.min(x), h.max(x)));
        agree &= hi <= 1.25 * lo;
    }
    v.check(agree, format!("ratios across nu within 25% (None = round-off level): {by_nu:?}"));
    v.runtime(t0, Duration::from_secs(600));
    v
}

fn damping_only_oracle() -> Verdict {
    let t0 = Instant::now();
    let mut v = Verdict::new();
    let rho = 0.05;
    let c = chart(rho);
    let mut cfg = SchemeConfig::new(c, 1e-6, 32).unwrap();
    cfg.toggles = TermToggles::damping_only();
    cfg.s_max = c.s_at_tip_fraction(1e-3).unwrap();
    cfg.norm_every = 100;
    let data = make_constant_data(&c, 32, 1.0).unwrap();
    let r = march(&cfg, &data, |_| Ok(())).unwrap();
    let worst = r.samples.iter().map(|p| (p.center[0] - p.lambda / rho).abs()).fold(0.0, f64::max);
    v.check(worst <= 1e-2, format!("max |w(s,0) - (rho-t)/rho| = {worst:.2e} over {} slices", r.samples.len()));
    let vs: Vec<f64> = r.samples.iter().map(|p| p.center[0] / p.lambda).collect();
    let (lo, hi) = vs.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &x| (l.min(x), h.max(x)));
    v.check(hi / lo - 1.0 <= 1e-2, format!("v(t,0) in [{lo}, {hi}]"));
    v.runtime(t0, Duration::from_secs(120));
    v
}

fn non_vanishing() -> Verdict {
    let t0 = Instant::now();
    let mut v = Verdict::new();
    let nv = nonvanish_criterion(0.02, 0.5, 1.0).unwrap();
    v.check((nv.max_rho - 1.0 / 9.0).abs() <= 1e-10 && nv.pass, format!("threshold rho <= {} (1/9), rho=0.02 passes: {}", nv.max_rho, nv.pass));

    let rho = 0.02;
    let c = chart(rho);
    let pts = 16;
    let s_end = c.s_at_tip_fraction(1e-3).unwrap();
    let pic = lockstep(rho, 1e-2, pts, s_end, 3);
    let sum: f64 = pic.increments_c0.iter().sum();
    v.check(sum <= 0.5, format!("center increment sum {sum:.4} (per sweep {:?}) <= h(0)/2 = 0.5", pic.increments_c0));

    let mut cfg = SchemeConfig::new(c, 1e-2, pts).unwrap();
    cfg.s_max = c.s_at_tip_fraction(1e-4).unwrap();
    cfg.norm_every = 100;
    let data = make_gaussian_data(&c, pts).unwrap();
    let run = march(&cfg, &data.h_rho, |_| Ok(())).unwrap();
    let s: Vec<f64> = run.samples.iter().map(|p| p.s).collect();
    let w: Vec<f64> = run.samples.iter().map(|p| p.center[0]).collect();
    let fit = blowup_fit(&reconstruct_center_series(&s, &w, &c).unwrap(), &c).unwrap();
    v.check(
        fit.tail_limit_estimate - fit.tail_ci95 >= 0.5,
        format!("tail estimate w*(rho,0) = {:.3e} +/- {:.1e} >= 0.5", fit.tail_limit_estimate, fit.tail_ci95),
    );
    let (lo, hi) = fit.final_decade_product;
    v.check(lo >= 0.4 && hi.is_finite(), format!("final-decade |v|(rho-t) in [{lo:.3e}, {hi:.3e}], need >= 0.4"));
    v.info(format!("fitted order {:.3e} +/- {:.1e}", fit.fitted_order, fit.order_ci95));

    let synth: Vec<(f64, f64)> = (0..400)
        .map(|k| {
            let lam = rho * 10f64.powf(-4.0 * k as f64 / 399.0);
            (rho - lam, 0.7 / lam)
        })
        .collect();
    let sf = blowup_fit(&synth, &c).unwrap();
    v.check((sf.fitted_order - 1.0).abs() <= 1e-3, format!("synthetic A/(rho-t): order {:.6}", sf.fitted_order));
    v.runtime(t0, Duration::from_secs(900));
    v
}

fn forcing() -> Verdict {
    let t0 = Instant::now();
    let mut v = Verdict::new();
    let (rho, nu, pts) = (0.02, 1e-2, 16);
    let c = chart(rho);
    let mut cfg = SchemeConfig::new(c, nu, pts).unwrap();
    cfg.s_max = c.s_at_tip_fraction(1e-4).unwrap();
    cfg.norm_every = 100;
    let data = make_gaussian_data(&c, pts).unwrap();
    let mut one = ForcingAccumulator::new(c, nu);
    let mut two = ForcingAccumulator::new(c, 2.0 * nu);
    march(&cfg, &data.h_rho, |f| {
        one.push(f)?;
        two.push(f)
    })
    .unwrap();
    let eps: Vec<f64> = [1e-2, 1e-3, 1e-4].iter().map(|f| f * rho).collect();
    let a = one.finish(&eps).unwrap();
    let b = two.finish(&eps).unwrap();
    let lin = a.l2_w.iter().chain(&a.l2_v).zip(b.l2_w.iter().chain(&b.l2_v)).map(|(x, y)| rel(*y, 2.0 * x)).fold(0.0, f64::max);
    v.check(lin <= 1e-10, format!("doubling nu doubles both L2 norms: worst rel {lin:.2e}"));
    v.check(a.cauchy_v && !a.truncated, format!("eps ladder {:?}: ||f^v|| = {:?} (successive differences non-increasing)", a.eps, a.l2_v));

    let residual = |ds: f64| {
        let mut rc = SchemeConfig::new(c, nu, pts).unwrap();
        rc.ds = ds;
        rc.s_max = 2.0;
        rc.fp_tol = 1e-12;
        rc.norm_every = 1000;
        let mut traj = Vec::new();
        march(&rc, &data.h_rho, |f| {
            traj.push(f.clone());
            Ok(())
        })
        .unwrap();
        // The stiff viscous layer near s = 0 is not resolved by centred differences.
        let skip = (1.0 / ds).round() as usize;
        (residual_check_forced(&traj[skip..], &rc).unwrap(), rc.fp_tol)
    };
    let (coarse, _) = residual(0.05);
    let (r, tol) = residual(0.025);
    v.check(
        r.relative <= tol,
        format!("forced residual relative {:.2e} (max {:.2e}) vs fixed-point tolerance {tol:.0e}", r.relative, r.max_residual),
    );
    v.info(format!(
        "residual max {:.2e} at ds=0.05, {:.2e} at ds=0.025: observed order {:.2} in ds",
        coarse.max_residual,
        r.max_residual,
        (coarse.max_residual / r.max_residual).log2()
    ));
    v.runtime(t0, Duration::from_secs(300));
    v
}

fn decay_preservation() -> Verdict {
    let t0 = Instant::now();
    let mut v = Verdict::new();
    let spec = GridSpec::new(3, 64, 8.0).unwrap();
    let nu = 0.1;
    let h = VectorField::from_fn(spec, FieldMeta::new(Frame::OriginalX, 0.0, 0.1, nu), 3, |x: &[f64], _| {
        0.05 * (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 2.0).exp()
    });
    let r = original_nse_picard(&h, nu, 0.5, 3, NseOptions::default()).unwrap();
    for rec in &r.records {
        v.check(
            rec.increment.pass,
            format!("t={} k={}: increment window ratio {:.3} (threshold 1.1), norm {:.2e}", rec.t, rec.k, rec.increment.max_ratio, rec.increment_norm),
        );
    }
    let control = original_nse_picard(&h, nu, 0.5, 3, NseOptions { leray: false, ..NseOptions::default() }).unwrap();
    v.info(format!(
        "control without the Leray term: all increments pass = {}, worst ratio {:.3}",
        control.all_increments_pass(),
        control.records.iter().map(|r| r.increment.max_ratio).fold(0.0, f64::max)
    ));
    v.runtime(t0, Duration::from_secs(300));
    v
}

fn collect(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n != "config.ini") {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Verdict {
    let mut v = Verdict::new();
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig {
        experiment: Experiment::Sweep,
        rhos: vec![0.05, 0.02],
        nus: vec![1e-1, 1e-2, 1e-3],
        tip_fraction: 1e-2,
        seed: 11,
        ..RunConfig::default()
    };
    let mut outputs = Vec::new();
    for rep in 0..2 {
        cfg.output_dir = tmp.path().join(format!("sweep{rep}"));
        execute(&cfg).unwrap();
        outputs.push(collect(&cfg.output_dir));
    }
    v.check(!outputs[0].is_empty() && outputs[0] == outputs[1], format!("sweep: {} files byte-identical", outputs[0].len()));

    let mut run = RunConfig {
        experiment: Experiment::Run,
        data: DataKind::Gaussian,
        tip_fraction: 1e-2,
        emit_snapshots: true,
        seed: 11,
        ..RunConfig::default()
    };
    let mut outputs = Vec::new();
    for rep in 0..2 {
        run.output_dir = tmp.path().join(format!("run{rep}"));
        execute(&run).unwrap();
        outputs.push(collect(&run.output_dir));
    }
    v.check(outputs[0] == outputs[1], format!("run with snapshots: {} files byte-identical", outputs[0].len()));
    v
}

fn main() {
    let criteria: [(usize, &str, fn() -> Verdict); 10] = [
        (1, "damping log-divergence", damping_log_divergence),
        (2, "coefficient ledger", coefficient_ledger),
        (3, "transform audit", transform_audit_criterion),
        (4, "kernel bounds", kernel_bounds),
        (5, "contraction", contraction),
        (6, "damping-only oracle", damping_only_oracle),
        (7, "non-vanishing chain", non_vanishing),
        (8, "forcing", forcing),
        (9, "decay preservation", decay_preservation),
        (10, "determinism", determinism),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = BTreeSet::new();
    let mut ran = BTreeSet::new();
    for (id, name, f) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let v = f();
        println!("{} criterion {id}: {name}", if v.pass { "PASS" } else { "FAIL" });
        for l in &v.lines {
            println!("{l}");
        }
        ran.insert(id);
        if !v.pass {
            failed.insert(id);
        }
    }
    let expected: BTreeSet<usize> = KNOWN_FAILURES.iter().copied().filter(|k| ran.contains(k)).collect();
    println!("failing criteria {failed:?}, documented {expected:?}");
    assert_eq!(failed, expected, "failing set differs from the documented one");
}
