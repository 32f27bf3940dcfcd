//! Local-time Picard scheme for the Navier–Stokes equations in Leray form,
//! in the original coordinates.

use serde::Serialize;

use super::{check_slice, divergence_limit};
use crate::error::{domain, Error, Result};
use crate::fields::{decay_class_check_with_floor, sobolev_cm_norm_vector, DecayReport, Frame, VectorField};
use crate::kernels::ConvolutionEngine;
use crate::scalar::{from_usize, lit, to_f64, Real};
use crate::spectral::Window;

#[derive(Debug, Clone, Copy)]
pub struct NseOptions {
    pub steps: usize,
    /// Record decay reports every this many steps (and at the last).
    pub record_every: usize,
    /// Derivative order `m` of the decay classes.
    pub m: usize,
    pub burgers: bool,
    pub leray: bool,
}

impl Default for NseOptions {
    fn default() -> Self {
        Self { steps: 8, record_every: 4, m: 2, burgers: true, leray: true }
    }
}

/// Decay status of one iterate at one time.
#[derive(Debug, Clone, Serialize)]
pub struct NseRecord {
    pub t: f64,
    pub k: usize,
    /// `δv^{(k)}` against `C^{m(n+1)}_{pol,m}`, worst component.
    pub increment: DecayReport,
    /// `v^{(k)}` against `C^{m(n+1)−1}_{pol,m}`, worst component.
    pub iterate: DecayReport,
    pub increment_norm: f64,
}

#[derive(Debug, Clone)]
pub struct NsePicardReport<T> {
    pub records: Vec<NseRecord>,
    /// Iterates `v^{(0..=K)}` at the horizon.
    pub finals: Vec<VectorField<T>>,
}

impl<T: Real> NsePicardReport<T> {
    pub fn all_increments_pass(&self) -> bool {
        self.records.iter().all(|r| r.increment.pass)
    }
}

fn worst(reports: Vec<DecayReport>) -> DecayReport {
    let fail = reports.iter().position(|r| !r.pass);
    let pick = fail.unwrap_or_else(|| {
        (0..reports.len()).max_by(|&a, &b| reports[a].max_ratio.total_cmp(&reports[b].max_ratio)).unwrap_or(0)
    });
    reports.into_iter().nth(pick).expect("at least one component")
}

fn vector_decay<T: Real>(v: &VectorField<T>, l: f64, m: usize, reference: f64) -> Result<DecayReport> {
    let reps =
        (0..v.ncomp()).map(|i| decay_class_check_with_floor(&v.component(i), l, m, reference)).collect::<Result<Vec<_>>>()?;
    Ok(worst(reps))
}

struct NseOperator<T: Real> {
    eng: ConvolutionEngine<T>,
    n: usize,
    burgers: bool,
    leray: bool,
}

impl<T: Real> NseOperator<T> {
    /// `−(v·∇)v_i + K_i ∗ Σ ∂_j v_m ∂_m v_j`.
    fn nonlinear(&self, v: &[Vec<T>]) -> Vec<Vec<T>> {
        let n = self.n;
        let len = v[0].len();
        let mut out = vec![vec![T::zero(); len]; n];
        if !self.burgers && !self.leray {
            return out;
        }
        let grad: Vec<Vec<Vec<T>>> = v
            .iter()
            .map(|c| {
                let hat = self.eng.sp.forward(c);
                (0..n)
                    .map(|j| {
                        let mut h = hat.clone();
                        let mut g = vec![0; n];
                        g[j] = 1;
                        self.eng.sp.apply_derivative(&mut h, &g);
                        self.eng.sp.inverse_real(h)
                    })
                    .collect()
            })
            .collect();
        if self.burgers {
            for (i, o) in out.iter_mut().enumerate() {
                for j in 0..n {
                    for (k, ov) in o.iter_mut().enumerate() {
                        *ov = *ov - v[j][k] * grad[i][j][k];
                    }
                }
            }
        }
        if self.leray {
            let mut src = vec![T::zero(); len];
            for j in 0..n {
                for m in 0..n {
                    for (k, sv) in src.iter_mut().enumerate() {
                        *sv = *sv + grad[m][j][k] * grad[j][m][k];
                    }
                }
            }
            let (hat, _) = self.eng.forward_windowed(&src, Window::Taper);
            for (i, o) in out.iter_mut().enumerate() {
                let mut h = hat.clone();
                self.eng.riesz_hat(&mut h, i);
                for (ov, r) in o.iter_mut().zip(self.eng.sp.inverse_real(h)) {
                    *ov = *ov + r;
                }
            }
        }
        out
    }

    fn heat(&self, v: &[Vec<T>], nu_tau: T) -> Vec<Vec<T>> {
        v.iter().map(|c| self.eng.heat(c, nu_tau, Window::Taper)).collect()
    }
}

/// Picard iterates `v^{(0)} = G∗h`, `v^{(k)} = G∗h + ∫ G(t−σ) ∗ N(v^{(k−1)}(σ)) dσ`
/// on `[0, t_horizon]`, marched together in time, with decay-class reports of
/// every increment `δv^{(k)} = v^{(k)} − v^{(k−1)}` at the recorded times.
pub fn original_nse_picard<T: Real>(
    h: &VectorField<T>,
    nu: T,
    t_horizon: T,
    k_max: usize,
    opts: NseOptions,
) -> Result<NsePicardReport<T>> {
    if h.meta.frame != Frame::OriginalX {
        return domain("original_nse_picard expects original-frame data");
    }
    if !(nu > T::zero()) || !(t_horizon > T::zero()) || k_max == 0 || opts.steps == 0 || opts.record_every == 0 {
        return domain("need ν > 0, t_horizon > 0, k_max ≥ 1 and at least one step");
    }
    let n = h.spec.n;
    if h.ncomp() != n {
        return domain("data must have n components");
    }
    let op = NseOperator { eng: ConvolutionEngine::new(&h.spec), n, burgers: opts.burgers, leray: opts.leray };
    let dt = t_horizon / from_usize::<T>(opts.steps);
    let half = nu * dt / lit(2.0);
    let limit = divergence_limit(&h.comps);
    let l_inc = (opts.m * (n + 1)) as f64;
    let mut iters: Vec<Vec<Vec<T>>> = vec![h.comps.clone(); k_max + 1];
    let mut records = Vec::new();
    let as_field = |c: &[Vec<T>], t: T| {
        let mut f = h.clone();
        f.comps = c.to_vec();
        f.meta.time = t;
        f.warnings.clear();
        f
    };
    for step in 0..opts.steps {
        let t2 = dt * from_usize::<T>(step + 1);
        let mut next = Vec::with_capacity(k_max + 1);
        next.push(op.heat(&iters[0], nu * dt));
        for k in 1..=k_max {
            let mid: Vec<Vec<T>> = iters[k - 1]
                .iter()
                .zip(&next[k - 1])
                .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| (x + y) / lit(2.0)).collect())
                .collect();
            let nm = op.nonlinear(&mid);
            let first = op.heat(&iters[k], half);
            let summed: Vec<Vec<T>> =
                first.iter().zip(&nm).map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| x + y * dt).collect()).collect();
            let w = op.heat(&summed, half);
            check_slice(&w, step + 1, t2, limit).map_err(|e| match e {
                Error::Diverged { slice, s, reason } => {
                    Error::Diverged { slice, s, reason: format!("{reason}; reduce t_horizon") }
                }
                other => other,
            })?;
            next.push(w);
        }
        iters = next;
        if (step + 1) % opts.record_every == 0 || step + 1 == opts.steps {
            for k in 1..=k_max {
                let d: Vec<Vec<T>> = iters[k]
                    .iter()
                    .zip(&iters[k - 1])
                    .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| x - y).collect())
                    .collect();
                let df = as_field(&d, t2);
                let vf = as_field(&iters[k], t2);
                // The increment is a difference of fields of this size and inherits their round-off.
                let reference = to_f64(vf.max_abs());
                records.push(NseRecord {
                    t: to_f64(t2),
                    k,
                    increment: vector_decay(&df, l_inc, opts.m, reference)?,
                    iterate: vector_decay(&vf, l_inc - 1.0, opts.m, 0.0)?,
                    increment_norm: to_f64(sobolev_cm_norm_vector(&df, opts.m).combined()),
                });
            }
        }
    }
    let t_end = t_horizon;
    let finals = iters.iter().map(|c| as_field(c, t_end)).collect();
    Ok(NsePicardReport { records, finals })
}
