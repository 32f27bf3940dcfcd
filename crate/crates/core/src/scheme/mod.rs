//! Viscosity-regularised Picard iteration for the transformed equation on the
//! cylinder grid, the original-frame local scheme, residuals and the
//! chain-rule coefficient audit.
//!
//! Fields are stored as `W(s, z) = w(s, (ρ−t)z)`. In these variables the
//! regularised equation reads
//!
//! ```text
//! ∂_s W = ν/λ² Δ_z W − D W_i − D Σ_j cos²z_j W_j ∂_j W_i
//!         + (c_conv − B)/λ Σ_j z_j ∂_j W_i + D K^z_i ∗ S
//! ```
//!
//! with `λ = ρ − t`, `B = (ρ²−t²)^{3/2}/ρ²`, `D = B/λ`, `c_conv` the convection
//! coefficient of the selected variant and `S` the strain contraction weighted
//! by the cylinder measure. The `−B/λ` part is the drift of the frame; the
//! convection toggle switches the net coefficient `(c_conv − B)/λ`.

mod audit;
mod march;
mod nse;
mod picard;
mod residual;

pub use audit::{transform_audit, AuditEntry, AuditLedger};
pub use march::{march, MarchResult, StepSample};
pub use nse::{original_nse_picard, NseOptions, NsePicardReport, NseRecord};
pub use picard::{
    contraction_constant, duhamel_rhs, nonvanish_criterion, picard_lockstep, picard_sweep, IterationState,
    NonvanishReport, PicardReport,
};
pub use residual::{residual_check, residual_check_forced, ResidualReport};

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::fields::{FieldMeta, Frame, GridSpec, VectorField};
use crate::geometry::{CoeffKind, ConeChart};
use crate::kernels::ConvolutionEngine;
use crate::scalar::{from_usize, lit, to_f64, Real};
use crate::spectral::{taper_window, Window};

/// Which printed form of the convection coefficient is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Default)]
pub enum ConvectionVariant {
    /// `(ρ−t)·B·arctan(x_j)`.
    PrintedA,
    /// `B·y_j`.
    PrintedB,
    /// `B·arctan(x_j)`, the form the chain rule produces.
    #[default]
    ChainRule,
}

impl ConvectionVariant {
    pub const ALL: [ConvectionVariant; 3] = [Self::PrintedA, Self::PrintedB, Self::ChainRule];

    /// Coefficient multiplying `z_j ∂_{y_j}` at pseudo-time `s`.
    pub fn coefficient<T: Real>(self, chart: &ConeChart<T>, s: T) -> Result<T> {
        let b = chart.coeff_of_s(CoeffKind::Burgers, s)?;
        Ok(match self {
            Self::PrintedA | Self::PrintedB => chart.lambda_of_s(s)? * b,
            Self::ChainRule => b,
        })
    }
}

impl fmt::Display for ConvectionVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::PrintedA => "printed_a",
            Self::PrintedB => "printed_b",
            Self::ChainRule => "chain_rule",
        })
    }
}

impl FromStr for ConvectionVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "printed_a" | "a" => Ok(Self::PrintedA),
            "printed_b" | "b" => Ok(Self::PrintedB),
            "chain_rule" | "chain" => Ok(Self::ChainRule),
            other => Err(Error::Config(format!("unknown convection variant '{other}'"))),
        }
    }
}

/// Which terms of the transformed equation are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TermToggles {
    pub burgers: bool,
    pub convection: bool,
    pub damping: bool,
    pub leray: bool,
}

impl TermToggles {
    pub fn all_on() -> Self {
        Self { burgers: true, convection: true, damping: true, leray: true }
    }

    pub fn all_off() -> Self {
        Self { burgers: false, convection: false, damping: false, leray: false }
    }

    pub fn damping_only() -> Self {
        Self { damping: true, ..Self::all_off() }
    }

    fn any_nonlinear(&self) -> bool {
        self.burgers || self.leray
    }
}

impl Default for TermToggles {
    fn default() -> Self {
        Self::all_on()
    }
}

/// Solver parameters.
#[derive(Debug, Clone, Serialize)]
pub struct SchemeConfig<T> {
    #[serde(skip)]
    pub chart: ConeChart<T>,
    pub nu: T,
    /// Order of the `H^m ∩ C^m` norms.
    pub m: usize,
    #[serde(skip)]
    pub grid: GridSpec<T>,
    pub ds: T,
    pub s_max: T,
    pub k_max: usize,
    pub fp_tol: T,
    pub max_fp_iters: usize,
    pub toggles: TermToggles,
    pub convection_variant: ConvectionVariant,
    /// Norms are evaluated every this many steps (and at the last step).
    pub norm_every: usize,
}

/// Fraction of `ρ` left before the tip at the default horizon.
pub const DEFAULT_TIP_FRACTION: f64 = 1e-3;
/// A slice norm above this multiple of the data norm aborts the run.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

impl<T: Real> SchemeConfig<T> {
    pub fn new(chart: ConeChart<T>, nu: T, points: usize) -> Result<Self> {
        let grid = GridSpec::cylinder(chart.n(), points)?;
        let s_max = chart.s_at_tip_fraction(lit(DEFAULT_TIP_FRACTION))?;
        let cfg = Self {
            chart,
            nu,
            m: 2,
            grid,
            ds: lit(0.05),
            s_max,
            k_max: 6,
            fp_tol: lit(1e-8),
            max_fp_iters: 30,
            toggles: TermToggles::all_on(),
            convection_variant: ConvectionVariant::ChainRule,
            norm_every: 1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > T::zero()) {
            return Err(Error::Config(format!("ν = {} must be positive", self.nu)));
        }
        if !(self.ds > T::zero()) || !(self.s_max > T::zero()) {
            return Err(Error::Config("ds and s_max must be positive".into()));
        }
        if self.k_max == 0 {
            return Err(Error::Config("k_max must be at least 1".into()));
        }
        if !(self.fp_tol > T::zero()) {
            return Err(Error::Config("fp_tol must be positive".into()));
        }
        if self.grid.n != self.chart.n() {
            return Err(Error::Config("grid and chart dimensions differ".into()));
        }
        if self.norm_every == 0 || self.max_fp_iters == 0 {
            return Err(Error::Config("norm_every and max_fp_iters must be positive".into()));
        }
        Ok(())
    }

    /// Number of steps and the step actually used (`s_max` is hit exactly).
    pub fn steps(&self) -> (usize, T) {
        let k = (self.s_max / self.ds).ceil().to_usize().unwrap_or(1).max(1);
        (k, self.s_max / from_usize::<T>(k))
    }

    pub fn meta(&self, s: T) -> FieldMeta<T> {
        FieldMeta::new(Frame::ConeY, s, self.chart.rho(), self.nu)
    }
}

/// Precomputed tables and the FFT engine for evaluating the transformed
/// equation on one grid.
pub struct Operator<'a, T: Real> {
    pub cfg: &'a SchemeConfig<T>,
    pub eng: ConvolutionEngine<T>,
    z: Vec<T>,
    cos2: Vec<T>,
    /// Taper times `Π sec² z_l`, zero wherever the taper vanishes.
    measure: Vec<T>,
}

impl<'a, T: Real> Operator<'a, T> {
    pub fn new(cfg: &'a SchemeConfig<T>) -> Self {
        let grid = cfg.grid;
        let z = grid.coords();
        let cos2: Vec<T> = z.iter().map(|v| v.cos() * v.cos()).collect();
        let window = taper_window(&grid);
        let mut measure = vec![T::zero(); grid.len()];
        grid.for_each_index(|flat, idx| {
            if window[flat] > T::zero() {
                measure[flat] = idx.iter().fold(window[flat], |acc, &k| acc / cos2[k]);
            }
        });
        Self { cfg, eng: ConvolutionEngine::new(&grid), z, cos2, measure }
    }

    fn n(&self) -> usize {
        self.cfg.grid.n
    }

    /// `∂_{z_j} W_i` for all `i, j`, indexed `[i][j]`.
    fn gradients(&self, w: &[Vec<T>]) -> Vec<Vec<Vec<T>>> {
        let n = self.n();
        w.iter()
            .map(|c| {
                let hat = self.eng.sp.forward(c);
                (0..n)
                    .map(|j| {
                        let mut h = hat.clone();
                        let mut gamma = vec![0; n];
                        gamma[j] = 1;
                        self.eng.sp.apply_derivative(&mut h, &gamma);
                        self.eng.sp.inverse_real(h)
                    })
                    .collect()
            })
            .collect()
    }

    /// Every term except viscosity and damping, which the propagator handles
    /// exactly.
    pub fn nonlinear(&self, w: &[Vec<T>], s: T) -> Result<Vec<Vec<T>>> {
        let cfg = self.cfg;
        let chart = &cfg.chart;
        let n = self.n();
        let grid = cfg.grid;
        let len = grid.len();
        let mut out = vec![vec![T::zero(); len]; w.len()];
        let lambda = chart.lambda_of_s(s)?;
        let b = chart.coeff_of_s(CoeffKind::Burgers, s)?;
        let d = chart.coeff_of_s(CoeffKind::Damping, s)?;
        // The convection toggle acts on the net drift of the stored equation,
        // which the chain-rule coefficient cancels exactly.
        let frame = if cfg.toggles.convection {
            (cfg.convection_variant.coefficient(chart, s)? - b) / lambda
        } else {
            T::zero()
        };
        let need_frame = frame.abs() > T::epsilon() * d;
        if !cfg.toggles.any_nonlinear() && !need_frame {
            return Ok(out);
        }
        let grad = self.gradients(w);
        let (z, cos2) = (&self.z, &self.cos2);
        let stride: Vec<usize> = (0..n).map(|a| grid.points.pow((n - 1 - a) as u32)).collect();
        let axis_index = |flat: usize, a: usize| (flat / stride[a]) % grid.points;

        for (i, oi) in out.iter_mut().enumerate() {
            for (flat, o) in oi.iter_mut().enumerate() {
                let mut acc = T::zero();
                for j in 0..n {
                    let k = axis_index(flat, j);
                    let g = grad[i][j][flat];
                    if cfg.toggles.burgers {
                        acc = acc - d * cos2[k] * w[j][flat] * g;
                    }
                    if need_frame {
                        acc = acc + frame * z[k] * g;
                    }
                }
                *o = acc;
            }
        }

        if cfg.toggles.leray {
            let mut src = vec![T::zero(); len];
            for (flat, sv) in src.iter_mut().enumerate() {
                if self.measure[flat] == T::zero() {
                    continue;
                }
                let mut acc = T::zero();
                for j in 0..n {
                    for m in 0..n {
                        let wj = cos2[axis_index(flat, j)] * cos2[axis_index(flat, m)];
                        acc = acc + grad[m][j][flat] * grad[j][m][flat] * wj;
                    }
                }
                *sv = acc * self.measure[flat];
            }
            let (hat, _) = self.eng.forward_windowed(&src, Window::None);
            for (i, oi) in out.iter_mut().enumerate().take(n) {
                let mut h = hat.clone();
                self.eng.riesz_hat(&mut h, i);
                for (o, r) in oi.iter_mut().zip(self.eng.sp.inverse_real(h)) {
                    *o = *o + d * r;
                }
            }
        }
        Ok(out)
    }

    /// Applies the exact linear propagator (heat, and damping if `damped`) from `s1` to `s2`.
    pub fn propagate(&self, w: &[Vec<T>], s1: T, s2: T, damped: bool) -> Result<Vec<Vec<T>>> {
        let chart = &self.cfg.chart;
        let e = if damped { chart.damping_factor(s1, s2)? } else { T::one() };
        let nt = self.cfg.nu * chart.viscous_clock(s1, s2)?;
        Ok(w
            .iter()
            .map(|c| {
                let h = if nt > T::zero() { self.eng.heat(c, nt, Window::None) } else { c.clone() };
                h.into_iter().map(|v| v * e).collect()
            })
            .collect())
    }

    /// One exponential-midpoint step `W(s2) = P(s1,s2)W(s1) + P(s_mid,s2) N(mid)·ds`
    /// with the nonlinearity already evaluated at the midpoint.
    pub fn step_with(&self, w: &[Vec<T>], n_mid: &[Vec<T>], s1: T, s2: T, damped: bool) -> Result<Vec<Vec<T>>> {
        let sm = (s1 + s2) / lit(2.0);
        let ds = s2 - s1;
        let first = self.propagate(w, s1, sm, damped)?;
        let summed: Vec<Vec<T>> =
            first.iter().zip(n_mid).map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| x + y * ds).collect()).collect();
        self.propagate(&summed, sm, s2, damped)
    }

    /// Strong-form right-hand side including viscosity and damping.
    pub fn full_rhs(&self, w: &[Vec<T>], s: T, nu: T) -> Result<Vec<Vec<T>>> {
        let chart = &self.cfg.chart;
        let lambda = chart.lambda_of_s(s)?;
        let d = chart.coeff_of_s(CoeffKind::Damping, s)?;
        let mut out = self.nonlinear(w, s)?;
        let visc = nu / (lambda * lambda);
        for (o, c) in out.iter_mut().zip(w) {
            if visc > T::zero() {
                let lap = self.eng.sp.filter(c, |xi, _| {
                    rustfft::num_complex::Complex::new(-xi.iter().fold(T::zero(), |a, &x| a + x * x), T::zero())
                });
                for (ov, l) in o.iter_mut().zip(lap) {
                    *ov = *ov + visc * l;
                }
            }
            if self.cfg.toggles.damping {
                for (ov, &cv) in o.iter_mut().zip(c) {
                    *ov = *ov - d * cv;
                }
            }
        }
        Ok(out)
    }
}

pub(crate) fn max_abs<T: Real>(w: &[Vec<T>]) -> T {
    w.iter().flatten().fold(T::zero(), |m, &v| m.max(v.abs()))
}

pub(crate) fn check_slice<T: Real>(w: &[Vec<T>], slice: usize, s: T, limit: T) -> Result<()> {
    let mut worst = T::zero();
    for &v in w.iter().flatten() {
        if !v.is_finite() {
            return Err(Error::Diverged { slice, s: to_f64(s), reason: "non-finite value".into() });
        }
        worst = worst.max(v.abs());
    }
    if worst > limit {
        return Err(Error::Diverged {
            slice,
            s: to_f64(s),
            reason: format!("sup norm {} exceeds {} x data norm", to_f64(worst), DIVERGENCE_FACTOR),
        });
    }
    Ok(())
}

pub(crate) fn field_of<T: Real>(cfg: &SchemeConfig<T>, s: T, comps: Vec<Vec<T>>) -> VectorField<T> {
    VectorField { spec: cfg.grid, meta: cfg.meta(s), comps, warnings: Vec::new() }
}

pub(crate) fn divergence_limit<T: Real>(data: &[Vec<T>]) -> T {
    lit::<T>(DIVERGENCE_FACTOR) * max_abs(data).max(T::min_positive_value())
}

pub(crate) fn check_data<T: Real>(cfg: &SchemeConfig<T>, data: &VectorField<T>) -> Result<()> {
    if data.spec != cfg.grid || data.meta.frame != Frame::ConeY {
        return domain("data must be a cone-frame field on the configured cylinder grid");
    }
    if data.ncomp() != cfg.grid.n {
        return domain("data must have n components");
    }
    Ok(())
}

/// Exact slice at `s` for runs without Burgers and Leray terms and without
/// net drift: the heat flow of the data with clock `ν ∫ ds/λ²`, times
/// `λ(s)/ρ` when damping is on.
pub fn linear_reference<T: Real>(cfg: &SchemeConfig<T>, data: &VectorField<T>, s: T) -> Result<Vec<Vec<T>>> {
    check_data(cfg, data)?;
    if cfg.toggles.any_nonlinear() {
        return domain("the linear reference needs the Burgers and Leray terms off");
    }
    if cfg.toggles.convection && cfg.convection_variant != ConvectionVariant::ChainRule {
        return domain("no closed-form reference with a printed convection variant");
    }
    let chart = &cfg.chart;
    let eng = ConvolutionEngine::new(&cfg.grid);
    let damp = if cfg.toggles.damping { chart.lambda_of_s(s)? / chart.rho() } else { T::one() };
    let nt = cfg.nu * chart.viscous_clock(T::zero(), s)?;
    Ok(data.comps.iter().map(|c| eng.heat(c, nt, Window::None).into_iter().map(|v| v * damp).collect()).collect())
}
