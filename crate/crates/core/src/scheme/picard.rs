//! Whole-interval Picard iteration and its contraction diagnostics.

use serde::Serialize;

use super::{check_data, check_slice, divergence_limit, field_of, Operator, SchemeConfig};
use crate::error::{domain, Result};
use crate::fields::{sobolev_cm_norm_vector, NormReport, VectorField};
use crate::kernels::KernelConstants;
use crate::scalar::{from_usize, lit, to_f64, Real};

/// Stored-trajectory Picard state; suited to short `s` ranges.
#[derive(Debug, Clone)]
pub struct IterationState<T> {
    pub k: usize,
    pub data: VectorField<T>,
    /// Current iterate on every slice `s_0 = 0, …, s_K = s_max`.
    pub w: Vec<VectorField<T>>,
    /// `sup_s` norms of `δw^{(k)}`, starting with `δw^{(1)} = w^{(1)} − h^ρ∗G_ν`.
    pub increments: Vec<NormReport<T>>,
}

fn slice_times<T: Real>(cfg: &SchemeConfig<T>) -> Vec<T> {
    let (steps, ds) = cfg.steps();
    (0..=steps).map(|i| ds * from_usize::<T>(i)).collect()
}

impl<T: Real> IterationState<T> {
    /// `w^{(0)} = h^ρ ∗ G_ν` on every slice.
    pub fn new(data: VectorField<T>, cfg: &SchemeConfig<T>) -> Result<Self> {
        cfg.validate()?;
        check_data(cfg, &data)?;
        let op = Operator::new(cfg);
        let times = slice_times(cfg);
        let mut w = Vec::with_capacity(times.len());
        w.push(field_of(cfg, T::zero(), data.comps.clone()));
        for win in times.windows(2) {
            let prev = &w.last().expect("nonempty").comps;
            let next = op.propagate(prev, win[0], win[1], false)?;
            w.push(field_of(cfg, win[1], next));
        }
        Ok(Self { k: 0, data, w, increments: Vec::new() })
    }
}

/// `∫_0^s P(σ, s) N(w_prev(σ)) dσ` on every slice, midpoint rule per interval.
pub fn duhamel_rhs<T: Real>(w_prev: &[VectorField<T>], cfg: &SchemeConfig<T>) -> Result<Vec<VectorField<T>>> {
    let op = Operator::new(cfg);
    let zeros = vec![vec![T::zero(); cfg.grid.len()]; cfg.grid.n];
    let mut out = vec![field_of(cfg, w_prev[0].meta.time, zeros)];
    let limit = lit::<T>(super::DIVERGENCE_FACTOR) * w_prev.iter().fold(T::one(), |m, f| m.max(f.max_abs()));
    for (i, pair) in w_prev.windows(2).enumerate() {
        let (s1, s2) = (pair[0].meta.time, pair[1].meta.time);
        let mid: Vec<Vec<T>> = pair[0]
            .comps
            .iter()
            .zip(&pair[1].comps)
            .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| (x + y) / lit(2.0)).collect())
            .collect();
        let n_mid = op.nonlinear(&mid, (s1 + s2) / lit(2.0))?;
        let next = op.step_with(&out[i].comps, &n_mid, s1, s2, cfg.toggles.damping)?;
        check_slice(&next, i + 1, s2, limit)?;
        out.push(field_of(cfg, s2, next));
    }
    Ok(out)
}

fn sup_increment<T: Real>(a: &[VectorField<T>], b: &[VectorField<T>], m: usize) -> NormReport<T> {
    let mut acc: Option<NormReport<T>> = None;
    for (x, y) in a.iter().zip(b) {
        let r = sobolev_cm_norm_vector(&x.sub(y), m);
        acc = Some(match acc {
            None => r,
            Some(prev) => prev.max(&r),
        });
    }
    acc.expect("at least one slice")
}

/// `w^{(k+1)} = P h^ρ + duhamel_rhs(w^{(k)})`, damping applied to the new iterate.
pub fn picard_sweep<T: Real>(state: IterationState<T>, cfg: &SchemeConfig<T>) -> Result<IterationState<T>> {
    if state.k >= cfg.k_max {
        return domain(format!("sweep {} exceeds k_max = {}", state.k + 1, cfg.k_max));
    }
    let op = Operator::new(cfg);
    let contribution = duhamel_rhs(&state.w, cfg)?;
    let mut flowed = state.data.comps.clone();
    let mut next = Vec::with_capacity(contribution.len());
    for (i, c) in contribution.iter().enumerate() {
        if i > 0 {
            flowed = op.propagate(&flowed, contribution[i - 1].meta.time, c.meta.time, cfg.toggles.damping)?;
        }
        let comps = flowed.iter().zip(&c.comps).map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| x + y).collect()).collect();
        next.push(field_of(cfg, c.meta.time, comps));
    }
    let inc = sup_increment(&next, &state.w, cfg.m);
    let mut increments = state.increments;
    increments.push(inc);
    Ok(IterationState { k: state.k + 1, data: state.data, w: next, increments })
}

/// Increment history of a whole-interval Picard run.
#[derive(Debug, Clone, Serialize)]
pub struct PicardReport {
    pub rho: f64,
    pub nu: f64,
    pub m: usize,
    pub s_max: f64,
    /// `sup_s ‖δw^{(k)}‖` for `k = 1..=K` (combined `H^m ∩ C^m`).
    pub increments: Vec<f64>,
    pub increments_sobolev: Vec<f64>,
    pub increments_sup: Vec<f64>,
    /// `sup_s |δw^{(k)}|_{C⁰}`.
    pub increments_c0: Vec<f64>,
    /// `increments[k] / increments[k−1]`.
    pub ratios: Vec<f64>,
    /// `‖h^ρ‖_{H^m ∩ C^m}`.
    pub data_norm: f64,
    /// `sup_s |w^{(0)}(s,0) − h^ρ(0)|`.
    pub heat_center_shift: f64,
    /// `(s, w^{(K)}(s, 0))` for component 0.
    pub center: Vec<(f64, f64)>,
    /// `sup_s |w^{(K)}(s,0) − h^ρ(0)|`.
    pub center_deviation: f64,
}

/// Whole-interval Picard iteration, all iterates marched together in `s` so
/// only the current slice of each is held in memory.
pub fn picard_lockstep<T: Real>(cfg: &SchemeConfig<T>, data: &VectorField<T>) -> Result<PicardReport> {
    cfg.validate()?;
    check_data(cfg, data)?;
    let op = Operator::new(cfg);
    let kmax = cfg.k_max;
    let (steps, ds) = cfg.steps();
    let origin = cfg.grid.origin_index();
    let h0 = data.comps[0][origin];
    let limit = divergence_limit(&data.comps);
    let mut iters: Vec<Vec<Vec<T>>> = vec![data.comps.clone(); kmax + 1];
    let mut sup: Vec<Option<NormReport<T>>> = vec![None; kmax];
    let mut sup_c0 = vec![0.0f64; kmax];
    let mut heat_shift: f64 = 0.0;
    let mut center = vec![(0.0, to_f64(h0))];
    let mut deviation: f64 = 0.0;
    for step in 0..steps {
        let s1 = ds * from_usize::<T>(step);
        let s2 = ds * from_usize::<T>(step + 1);
        let sm = (s1 + s2) / lit(2.0);
        let mut next: Vec<Vec<Vec<T>>> = Vec::with_capacity(kmax + 1);
        next.push(op.propagate(&iters[0], s1, s2, false)?);
        for k in 1..=kmax {
            let mid: Vec<Vec<T>> = iters[k - 1]
                .iter()
                .zip(&next[k - 1])
                .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| (x + y) / lit(2.0)).collect())
                .collect();
            let n_mid = op.nonlinear(&mid, sm)?;
            let w = op.step_with(&iters[k], &n_mid, s1, s2, cfg.toggles.damping)?;
            check_slice(&w, step + 1, s2, limit)?;
            next.push(w);
        }
        iters = next;
        heat_shift = heat_shift.max(to_f64((iters[0][0][origin] - h0).abs()));
        let c = iters[kmax][0][origin];
        center.push((to_f64(s2), to_f64(c)));
        deviation = deviation.max(to_f64((c - h0).abs()));
        for k in 1..=kmax {
            let d: Vec<Vec<T>> = iters[k]
                .iter()
                .zip(&iters[k - 1])
                .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| x - y).collect())
                .collect();
            sup_c0[k - 1] = sup_c0[k - 1].max(to_f64(d[0][origin].abs()));
            if (step + 1) % cfg.norm_every == 0 || step + 1 == steps {
                let r = sobolev_cm_norm_vector(&field_of(cfg, s2, d), cfg.m);
                sup[k - 1] = Some(match sup[k - 1].take() {
                    None => r,
                    Some(p) => p.max(&r),
                });
            }
        }
    }
    let reports: Vec<NormReport<T>> = sup.into_iter().map(|r| r.expect("norms evaluated at the last step")).collect();
    let increments: Vec<f64> = reports.iter().map(|r| to_f64(r.combined())).collect();
    let ratios = increments.windows(2).map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 }).collect();
    Ok(PicardReport {
        rho: to_f64(cfg.chart.rho()),
        nu: to_f64(cfg.nu),
        m: cfg.m,
        s_max: to_f64(cfg.s_max),
        increments_sobolev: reports.iter().map(|r| to_f64(r.sobolev)).collect(),
        increments_sup: reports.iter().map(|r| to_f64(r.sup_cm)).collect(),
        increments,
        increments_c0: sup_c0,
        ratios,
        data_norm: to_f64(sobolev_cm_norm_vector(data, cfg.m).combined()),
        heat_center_shift: heat_shift,
        center,
        center_deviation: deviation,
    })
}

/// `c* = 4·2^m·C_hρ²·C_G·(1 + C_Kn)`.
pub fn contraction_constant(data_norm: f64, m: usize, constants: &KernelConstants) -> Result<f64> {
    if !(data_norm > 0.0) {
        return domain("data norm must be positive");
    }
    if !constants.gradient_integrable() {
        return domain(format!("C′ requires μ in (0.5, 1), got {}", constants.mu));
    }
    Ok(4.0 * 2f64.powi(m as i32) * data_norm * data_norm * constants.c_g() * (1.0 + constants.c_kn))
}

/// Evaluation of `r(1 + r/(1−r)) ≤ ½ h^ρ(0)` with `r = ρ^μ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NonvanishReport {
    pub r: f64,
    /// `r(1 + r/(1−r))`, which simplifies to `r/(1−r)`.
    pub lhs: f64,
    pub threshold: f64,
    pub pass: bool,
    /// Largest `ρ` for which the criterion holds.
    pub max_rho: f64,
}

pub fn nonvanish_criterion(rho: f64, mu: f64, h0: f64) -> Result<NonvanishReport> {
    if !(rho > 0.0) || !(mu > 0.0 && mu < 1.0) {
        return domain("need ρ > 0 and μ in (0, 1)");
    }
    let r = rho.powf(mu);
    if r >= 1.0 {
        return domain(format!("ρ^μ = {r} must be below 1"));
    }
    let lhs = r * (1.0 + r / (1.0 - r));
    let threshold = h0 / 2.0;
    let r_star = threshold / (1.0 + threshold);
    Ok(NonvanishReport { r, lhs, threshold, pass: lhs <= threshold, max_rho: r_star.powf(1.0 / mu) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nonvanish_threshold_is_one_ninth() {
        let r = nonvanish_criterion(0.1, 0.5, 1.0).unwrap();
        assert!((r.max_rho - 1.0 / 9.0).abs() < 1e-12);
        assert!(nonvanish_criterion(1.0 / 9.0 - 1e-9, 0.5, 1.0).unwrap().pass);
        assert!(!nonvanish_criterion(1.0 / 9.0 + 1e-9, 0.5, 1.0).unwrap().pass);
        assert!(nonvanish_criterion(1.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn contraction_constant_scaling() {
        let k = crate::kernels::kernel_constants(3, 0.75).unwrap();
        let a = contraction_constant(1.0, 2, &k).unwrap();
        assert!((contraction_constant(2.0, 2, &k).unwrap() / a - 4.0).abs() < 1e-12);
        assert!((contraction_constant(1.0, 3, &k).unwrap() / a - 2.0).abs() < 1e-12);
        let low = crate::kernels::kernel_constants(3, 0.4).unwrap();
        assert!(contraction_constant(1.0, 2, &low).is_err());
    }
}
