//! Time-marching with per-step fixed-point iteration.

use serde::Serialize;

use super::{check_data, check_slice, divergence_limit, field_of, max_abs, Operator, SchemeConfig};
use crate::error::Result;
use crate::fields::{sobolev_cm_norm_vector, VectorField};
use crate::scalar::{from_usize, lit, to_f64, Real};

/// Per-step record of a marched run.
#[derive(Debug, Clone, Serialize)]
pub struct StepSample {
    pub s: f64,
    pub t: f64,
    pub lambda: f64,
    /// `W_i(s, 0)` for every component.
    pub center: Vec<f64>,
    /// `‖W(s)‖_{H^m ∩ C^m}` when evaluated at this step.
    pub norm: Option<f64>,
    pub fp_iters: usize,
    /// Relative change in the last fixed-point sweep.
    pub fp_defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MarchResult {
    pub samples: Vec<StepSample>,
    /// Largest evaluated norm over the run.
    pub sup_norm: f64,
    /// Steps whose fixed-point iteration hit `max_fp_iters`.
    pub unconverged_steps: usize,
}

/// Marches `data` from `s = 0` to `s_max`. Each step solves
/// `W⁺ = P W + P_½ N((W + W⁺)/2) ds` by fixed-point iteration to `fp_tol`.
/// `observe` sees every slice, including the initial one.
pub fn march<T: Real>(
    cfg: &SchemeConfig<T>,
    data: &VectorField<T>,
    mut observe: impl FnMut(&VectorField<T>) -> Result<()>,
) -> Result<MarchResult> {
    cfg.validate()?;
    check_data(cfg, data)?;
    let op = Operator::new(cfg);
    let (steps, ds) = cfg.steps();
    let origin = cfg.grid.origin_index();
    let limit = divergence_limit(&data.comps);
    let chart = &cfg.chart;
    let mut w = data.comps.clone();
    let mut samples = Vec::with_capacity(steps + 1);
    let mut sup_norm: f64 = 0.0;
    let mut unconverged = 0usize;

    let mut record = |w: &[Vec<T>], s: T, step: usize, iters: usize, defect: T, samples: &mut Vec<StepSample>| -> Result<()> {
        let field = field_of(cfg, s, w.to_vec());
        let norm = if step % cfg.norm_every == 0 || step == steps {
            let v = to_f64(sobolev_cm_norm_vector(&field, cfg.m).combined());
            sup_norm = sup_norm.max(v);
            Some(v)
        } else {
            None
        };
        samples.push(StepSample {
            s: to_f64(s),
            t: to_f64(chart.t_of_s(s)?),
            lambda: to_f64(chart.lambda_of_s(s)?),
            center: w.iter().map(|c| to_f64(c[origin])).collect(),
            norm,
            fp_iters: iters,
            fp_defect: to_f64(defect),
        });
        observe(&field)
    };
    record(&w, T::zero(), 0, 0, T::zero(), &mut samples)?;

    // Without net drift and nonlinear terms the exact propagator is the step.
    let no_drift = !cfg.toggles.convection || cfg.convection_variant == super::ConvectionVariant::ChainRule;
    let linear_only = !cfg.toggles.any_nonlinear() && no_drift;
    for step in 0..steps {
        let s1 = ds * from_usize::<T>(step);
        let s2 = ds * from_usize::<T>(step + 1);
        let sm = (s1 + s2) / lit(2.0);
        let damped = cfg.toggles.damping;
        let (next, iters, defect) = if linear_only {
            (op.propagate(&w, s1, s2, damped)?, 0, T::zero())
        } else {
            let mut guess = op.step_with(&w, &op.nonlinear(&w, s1)?, s1, s2, damped)?;
            let mut iters = 1;
            let mut defect = T::infinity();
            while iters < cfg.max_fp_iters {
                let mid: Vec<Vec<T>> =
                    w.iter().zip(&guess).map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| (x + y) / lit(2.0)).collect()).collect();
                let new = op.step_with(&w, &op.nonlinear(&mid, sm)?, s1, s2, damped)?;
                let change = new
                    .iter()
                    .flatten()
                    .zip(guess.iter().flatten())
                    .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()));
                defect = change / max_abs(&new).max(T::one());
                guess = new;
                iters += 1;
                if defect <= cfg.fp_tol {
                    break;
                }
            }
            if defect > cfg.fp_tol {
                unconverged += 1;
            }
            (guess, iters, defect)
        };
        check_slice(&next, step + 1, s2, limit)?;
        w = next;
        record(&w, s2, step + 1, iters, defect, &mut samples)?;
    }
    Ok(MarchResult { samples, sup_norm, unconverged_steps: unconverged })
}
