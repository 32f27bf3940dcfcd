//! Viscosity sweeps, ν → 0 extrapolation, reconstruction of `v(t, 0)`,
//! blow-up diagnostics and forcing synthesis.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{domain, Result};
use crate::fields::{laplacian_via_cone, VectorField};
use crate::geometry::{CoeffKind, ConeChart};
use crate::scalar::{to_f64, Real};
use crate::scheme::{march, SchemeConfig};
use crate::spectral::Spectral;

/// Center-value series of a family of runs that differ only in `ν`.
#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub rho: f64,
    /// Strictly decreasing.
    pub nus: Vec<f64>,
    /// Slice times, shared by every run.
    pub s: Vec<f64>,
    /// `W_0(s, 0)` per `ν`.
    pub trajectories: Vec<Vec<f64>>,
    /// `sup_s ‖W‖_{H^m ∩ C^m}` per `ν`.
    pub norms: Vec<f64>,
    /// Fixed-point steps that did not converge, per `ν`.
    pub unconverged: Vec<usize>,
    pub extrapolation: Extrapolation,
}

/// Richardson extrapolation to `ν = 0` from the three smallest viscosities.
#[derive(Debug, Clone, Serialize)]
pub struct Extrapolation {
    /// `ν → 0` series; the smallest-`ν` run when declined.
    pub series: Vec<f64>,
    /// Pointwise size of the Richardson correction.
    pub error: Vec<f64>,
    /// Fitted convergence order in `ν`, if one was found.
    pub order: Option<f64>,
    /// Why the extrapolation was declined.
    pub declined: Option<String>,
}

impl SweepResult {
    /// The series to use for reconstruction.
    pub fn best_series(&self) -> &[f64] {
        &self.extrapolation.series
    }
}

/// Richardson step on three series ordered by decreasing `ν` with a
/// common refinement ratio. Differences must shrink geometrically.
pub fn richardson(nus: [f64; 3], series: [&[f64]; 3]) -> Extrapolation {
    let [a, b, c] = series;
    let fine = c.to_vec();
    let declined = |why: String| Extrapolation { series: fine.clone(), error: vec![0.0; fine.len()], order: None, declined: Some(why) };
    let r1 = nus[0] / nus[1];
    let r2 = nus[1] / nus[2];
    if (r1 / r2 - 1.0).abs() > 1e-9 {
        return declined(format!("ν ratios {r1} and {r2} differ"));
    }
    let d1: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
    let d2: Vec<f64> = c.iter().zip(b).map(|(x, y)| x - y).collect();
    let n1 = d1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let n2 = d2.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if n2 == 0.0 {
        if n1 == 0.0 {
            return Extrapolation { series: fine.clone(), error: vec![0.0; fine.len()], order: None, declined: None };
        }
        return declined("finest difference vanishes while the coarse one does not".into());
    }
    let q = n1 / n2;
    if !(q > 1.0) {
        return declined(format!("ν-differences do not shrink (ratio {q})"));
    }
    let corr: Vec<f64> = d2.iter().map(|d| d / (q - 1.0)).collect();
    Extrapolation {
        series: c.iter().zip(&corr).map(|(x, e)| x + e).collect(),
        error: corr.iter().map(|e| e.abs()).collect(),
        order: Some(q.ln() / r1.ln()),
        declined: None,
    }
}

/// Runs the scheme once per `ν` (same data, grid and steps) and extrapolates
/// the center series to `ν = 0`.
pub fn viscosity_sweep<T: Real>(base: &SchemeConfig<T>, data: &VectorField<T>, nus: &[T]) -> Result<SweepResult> {
    if nus.len() < 3 {
        return domain("a sweep needs at least three viscosities");
    }
    if nus.iter().any(|&v| !(v > T::zero())) || nus.windows(2).any(|w| !(w[0] > w[1])) {
        return domain("viscosities must be positive and strictly decreasing");
    }
    let mut trajectories = Vec::with_capacity(nus.len());
    let mut norms = Vec::with_capacity(nus.len());
    let mut unconverged = Vec::with_capacity(nus.len());
    let mut s = Vec::new();
    for &nu in nus {
        let mut cfg = base.clone();
        cfg.nu = nu;
        let run = march(&cfg, data, |_| Ok(()))?;
        s = run.samples.iter().map(|p| p.s).collect();
        trajectories.push(run.samples.iter().map(|p| p.center[0]).collect::<Vec<f64>>());
        norms.push(run.sup_norm);
        unconverged.push(run.unconverged_steps);
    }
    let k = nus.len();
    let nf: Vec<f64> = nus.iter().map(|&v| to_f64(v)).collect();
    let extrapolation =
        richardson([nf[k - 3], nf[k - 2], nf[k - 1]], [&trajectories[k - 3], &trajectories[k - 2], &trajectories[k - 1]]);
    Ok(SweepResult { rho: to_f64(base.chart.rho()), nus: nf, s, trajectories, norms, unconverged, extrapolation })
}

/// `(t, v(t, 0))` with `v = w(s(t), 0)/(ρ − t)`.
pub fn reconstruct_center_series(s: &[f64], w: &[f64], chart: &ConeChart<f64>) -> Result<Vec<(f64, f64)>> {
    if s.len() != w.len() {
        return domain("time and value series differ in length");
    }
    s.iter().zip(w).map(|(&si, &wi)| Ok((chart.t_of_s(si)?, wi / chart.lambda_of_s(si)?))).collect()
}

/// Reconstructed center series of a sweep's best (extrapolated) estimate.
pub fn reconstruct_sweep(sweep: &SweepResult, chart: &ConeChart<f64>) -> Result<Vec<(f64, f64)>> {
    reconstruct_center_series(&sweep.s, sweep.best_series(), chart)
}

#[derive(Debug, Clone, Serialize)]
pub struct BlowupReport {
    /// Slope of `log|v|` against `−log(ρ − t)` over the last two decades.
    pub fitted_order: f64,
    /// Half-width of the 95% confidence interval of the slope.
    pub order_ci95: f64,
    pub fit_points: usize,
    /// `sup_t |v(t, 0)|·(ρ − t)`.
    pub bounded_product: f64,
    /// Range of `|v|·(ρ − t)` over the last decade.
    pub final_decade_product: (f64, f64),
    /// Intercept at `ρ − t = 0` of a linear fit of `v·(ρ − t)` over the last decade.
    pub tail_limit_estimate: f64,
    pub tail_ci95: f64,
    /// `v` changes sign on the fit window; the fit used `|v|`.
    pub sign_change: bool,
}

struct LineFit {
    intercept: f64,
    slope: f64,
    se_intercept: f64,
    se_slope: f64,
    dof: usize,
}

fn line_fit(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 3 {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let s2 = sse / (nf - 2.0);
    Some(LineFit {
        intercept,
        slope,
        se_slope: (s2 / sxx).sqrt(),
        se_intercept: (s2 * (1.0 / nf + mx * mx / sxx)).sqrt(),
        dof: n - 2,
    })
}

fn t_quantile(dof: usize) -> f64 {
    StudentsT::new(0.0, 1.0, dof as f64).map(|d| d.inverse_cdf(0.975)).unwrap_or(f64::INFINITY)
}

/// Order and tail diagnostics of `v(t, 0)` as `t → ρ`.
pub fn blowup_fit(series: &[(f64, f64)], chart: &ConeChart<f64>) -> Result<BlowupReport> {
    let rho = chart.rho();
    let pts: Vec<(f64, f64)> = series.iter().map(|&(t, v)| (rho - t, v)).filter(|&(l, _)| l > 0.0).collect();
    if pts.len() < 3 {
        return domain("blow-up fit needs at least three samples before the tip");
    }
    let lmin = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let lmax = pts.iter().map(|p| p.0).fold(0.0, f64::max);
    if lmax < 100.0 * lmin * (1.0 - 1e-9) {
        return domain(format!("series covers {:.2} decades of ρ − t; two are needed", (lmax / lmin).log10()));
    }
    let window: Vec<&(f64, f64)> = pts.iter().filter(|p| p.0 <= 100.0 * lmin * (1.0 + 1e-12)).collect();
    let sign_change = window.iter().any(|p| p.1 > 0.0) && window.iter().any(|p| p.1 < 0.0);
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        window.iter().filter(|p| p.1 != 0.0).map(|p| (-p.0.ln(), p.1.abs().ln())).unzip();
    let fit = line_fit(&xs, &ys).ok_or_else(|| crate::Error::Domain("degenerate fit window".into()))?;

    let last: Vec<&(f64, f64)> = pts.iter().filter(|p| p.0 <= 10.0 * lmin * (1.0 + 1e-12)).collect();
    let prod: Vec<f64> = last.iter().map(|p| p.1.abs() * p.0).collect();
    let (lo, hi) = prod.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    let (lx, wy): (Vec<f64>, Vec<f64>) = last.iter().map(|p| (p.0, p.1 * p.0)).unzip();
    let (tail, tail_ci) = match line_fit(&lx, &wy) {
        Some(f) => (f.intercept, f.se_intercept * t_quantile(f.dof)),
        None => (wy.iter().sum::<f64>() / wy.len() as f64, f64::INFINITY),
    };
    Ok(BlowupReport {
        fitted_order: fit.slope,
        order_ci95: fit.se_slope * t_quantile(fit.dof),
        fit_points: xs.len(),
        bounded_product: pts.iter().map(|p| p.1.abs() * p.0).fold(0.0, f64::max),
        final_decade_product: (lo, hi),
        tail_limit_estimate: tail,
        tail_ci95: tail_ci,
        sign_change,
    })
}

/// `f^w = −ν Δ_y W` on the cylinder grid and `f^v = −ν Δ_x v` sampled at
/// `x = tan z`, for one slice.
pub fn forcing_fields<T: Real>(w: &VectorField<T>, nu: T, chart: &ConeChart<T>) -> Result<(VectorField<T>, VectorField<T>)> {
    let lambda = chart.lambda_of_s(w.meta.time)?;
    let sp = Spectral::new(&w.spec);
    let scale = -nu / (lambda * lambda);
    let mut fw = w.clone();
    for c in fw.comps.iter_mut() {
        let lap = sp.filter(c, |xi, _| rustfft::num_complex::Complex::new(-xi.iter().fold(T::zero(), |a, &k| a + k * k), T::zero()));
        *c = lap.into_iter().map(|v| v * scale).collect();
    }
    let mut fv = laplacian_via_cone(w, chart)?;
    for c in fv.comps.iter_mut() {
        for v in c.iter_mut() {
            *v = -nu * *v;
        }
    }
    Ok((fw, fv))
}

/// Space-time `L²` norms of the forcing over `t ∈ [0, ρ − ε]`.
#[derive(Debug, Clone, Serialize)]
pub struct ForcingReport {
    pub nu: f64,
    pub rho: f64,
    pub eps: Vec<f64>,
    pub l2_w: Vec<f64>,
    pub l2_v: Vec<f64>,
    /// Successive differences of `l2_v` are non-increasing.
    pub cauchy_v: bool,
    /// `(s, ‖f^w(s)‖², ‖f^v(s)‖²)`, spatial norms in the physical measures.
    pub series: Vec<(f64, f64, f64)>,
    /// The run stops before the smallest `ε` on the ladder.
    pub truncated: bool,
}

/// Streams slices of a trajectory and keeps only the spatial forcing norms.
pub struct ForcingAccumulator<T: Real> {
    chart: ConeChart<T>,
    nu: T,
    series: Vec<(f64, f64, f64)>,
}

impl<T: Real> ForcingAccumulator<T> {
    pub fn new(chart: ConeChart<T>, nu: T) -> Self {
        Self { chart, nu, series: Vec::new() }
    }

    pub fn push(&mut self, w: &VectorField<T>) -> Result<()> {
        let (fw, fv) = forcing_fields(w, self.nu, &self.chart)?;
        let lambda = to_f64(self.chart.lambda_of_s(w.meta.time)?);
        let spec = w.spec;
        let cell = to_f64(spec.cell_volume());
        let y_cell = cell * lambda.powi(spec.n as i32);
        let nw: f64 = fw.comps.iter().flatten().map(|&v| to_f64(v).powi(2)).sum::<f64>() * y_cell;
        // dx = Π sec² z_l dz; the seam nodes z = −π/2 map to |x| = ∞ and carry no weight.
        let coords: Vec<f64> = spec.coords().iter().map(|&z| to_f64(z)).collect();
        let sec2: Vec<f64> = coords
            .iter()
            .map(|&z| if (z.abs() - std::f64::consts::FRAC_PI_2).abs() < 1e-12 { 0.0 } else { 1.0 / z.cos().powi(2) })
            .collect();
        let mut nv = 0.0;
        spec.for_each_index(|flat, idx| {
            let m: f64 = idx.iter().map(|&k| sec2[k]).product();
            if m > 0.0 {
                nv += fv.comps.iter().map(|c| to_f64(c[flat]).powi(2)).sum::<f64>() * m;
            }
        });
        self.series.push((to_f64(w.meta.time), nw, nv * cell));
        Ok(())
    }

    /// Trapezoidal time integrals in `t` (`dt = B ds`) up to each `t = ρ − ε`.
    pub fn finish(self, eps: &[f64]) -> Result<ForcingReport> {
        let chart = ConeChart::<f64>::new(self.chart.n(), to_f64(self.chart.rho()))?;
        let rho = chart.rho();
        let series = self.series;
        let weight = |s: f64| chart.coeff_of_s(CoeffKind::Burgers, s).unwrap_or(0.0);
        let s_last = series.last().map(|p| p.0).unwrap_or(0.0);
        let mut truncated = false;
        let (mut l2_w, mut l2_v) = (Vec::new(), Vec::new());
        for &e in eps {
            if !(e > 0.0 && e < rho) {
                return domain(format!("ε = {e} outside (0, ρ)"));
            }
            let s_end = chart.s_of_t(rho - e)?;
            if s_end > s_last * (1.0 + 1e-12) {
                truncated = true;
            }
            let (mut aw, mut av) = (0.0, 0.0);
            for p in series.windows(2) {
                let (s0, s1) = (p[0].0, p[1].0.min(s_end));
                if s1 <= s0 {
                    break;
                }
                let frac = (s1 - s0) / (p[1].0 - p[0].0);
                let lerp = |a: f64, b: f64| a + (b - a) * frac;
                let (w0, w1) = (p[0].1 * weight(s0), lerp(p[0].1, p[1].1) * weight(s1));
                let (v0, v1) = (p[0].2 * weight(s0), lerp(p[0].2, p[1].2) * weight(s1));
                aw += 0.5 * (w0 + w1) * (s1 - s0);
                av += 0.5 * (v0 + v1) * (s1 - s0);
            }
            l2_w.push(aw.sqrt());
            l2_v.push(av.sqrt());
        }
        let diffs: Vec<f64> = l2_v.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        let cauchy_v = diffs.windows(2).all(|d| d[1] <= d[0]);
        Ok(ForcingReport { nu: to_f64(self.nu), rho, eps: eps.to_vec(), l2_w, l2_v, cauchy_v, series, truncated })
    }
}

/// Forcing norms of a stored trajectory over the `ε` ladder.
pub fn synthesize_forcing<T: Real>(traj: &[VectorField<T>], nu: T, chart: &ConeChart<T>, eps: &[f64]) -> Result<ForcingReport> {
    let mut acc = ForcingAccumulator::new(*chart, nu);
    for w in traj {
        acc.push(w)?;
    }
    acc.finish(eps)
}

/// `ε ∈ {10⁻², 10⁻³, 10⁻⁴}·ρ`.
pub fn default_eps_ladder(rho: f64) -> Vec<f64> {
    vec![1e-2 * rho, 1e-3 * rho, 1e-4 * rho]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart() -> ConeChart<f64> {
        ConeChart::new(3, 0.05).unwrap()
    }

    fn synthetic(f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
        let rho = chart().rho();
        (0..=400).map(|k| rho * 10f64.powf(-4.0 * k as f64 / 400.0)).map(|l| (rho - l, f(l))).collect()
    }

    #[test]
    fn richardson_recovers_linear_limit() {
        let base = [1.0, 2.0, 3.0];
        let series: Vec<Vec<f64>> = [0.4, 0.2, 0.1].iter().map(|nu| base.iter().map(|b| b + 3.0 * nu).collect()).collect();
        let e = richardson([0.4, 0.2, 0.1], [&series[0], &series[1], &series[2]]);
        assert!(e.declined.is_none());
        assert!((e.order.unwrap() - 1.0).abs() < 1e-12);
        for (x, b) in e.series.iter().zip(base) {
            assert!((x - b).abs() < 1e-12);
        }
    }

    #[test]
    fn richardson_declines_growing_differences() {
        let a = [0.0];
        let b = [1.0];
        let c = [3.0];
        let e = richardson([0.4, 0.2, 0.1], [&a, &b, &c]);
        assert!(e.declined.is_some());
        assert_eq!(e.series, vec![3.0]);
    }

    #[test]
    fn blowup_fit_synthetic_orders() {
        let c = chart();
        let r = blowup_fit(&synthetic(|l| 2.0 / l), &c).unwrap();
        assert!((r.fitted_order - 1.0).abs() < 1e-9);
        assert!((r.bounded_product - 2.0).abs() < 1e-9);
        assert!((r.tail_limit_estimate - 2.0).abs() < 1e-9);
        let r = blowup_fit(&synthetic(|l| 1.0 / l.sqrt()), &c).unwrap();
        assert!((r.fitted_order - 0.5).abs() < 1e-2);
        let r = blowup_fit(&synthetic(|_| 1.0), &c).unwrap();
        assert!(r.fitted_order.abs() < 1e-9);
        assert!(r.final_decade_product.1 < 1e-2);
    }

    #[test]
    fn blowup_fit_needs_two_decades() {
        let rho = chart().rho();
        let s: Vec<(f64, f64)> = (0..50).map(|k| rho - rho * (1.0 - 0.015 * k as f64)).map(|t| (t, 1.0)).collect();
        assert!(blowup_fit(&s, &chart()).is_err());
    }

    #[test]
    fn reconstruction_of_constant_is_hyperbola() {
        let c = chart();
        let s = [0.0, 1.0, 10.0, 100.0];
        let r = reconstruct_center_series(&s, &[3.0; 4], &c).unwrap();
        for (t, v) in r {
            assert!((v * (c.rho() - t) - 3.0).abs() < 1e-9 * v.abs().max(1.0));
        }
    }
}
