//! Cone coordinates `(t, x) ↔ (s, y) ↔ (t, z)`, measure factors and the
//! time-dependent coefficients of the transformed equation.
//!
//! With `λ = ρ − t`:
//! `s = t/√(ρ²−t²)`, `y_i = λ·arctan(x_i)`, `z_i = y_i/λ = arctan(x_i)`.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::optimize::{maximize, Maximum};
use crate::quad;
use crate::scalar::{from_usize, lit, to_f64, Real};

/// Points in the bracketing scan that precedes golden-section refinement.
pub const SUP_SCAN_POINTS: usize = 2048;

/// The four coefficient families of the transformed equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, PartialOrd, Ord)]
pub enum CoeffKind {
    Burgers,
    Convection,
    Damping,
    Leray,
}

impl CoeffKind {
    pub const ALL: [CoeffKind; 4] = [CoeffKind::Burgers, CoeffKind::Convection, CoeffKind::Damping, CoeffKind::Leray];
}

/// Dimension `n ≥ 3` and horizon `ρ > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeChart<T> {
    n: usize,
    rho: T,
}

impl<T: Real> ConeChart<T> {
    pub fn new(n: usize, rho: T) -> Result<Self> {
        if n < 3 {
            return domain(format!("dimension n = {n}; the construction needs n >= 3"));
        }
        if !(rho > T::zero()) || !rho.is_finite() {
            return domain(format!("horizon rho = {rho} must be positive"));
        }
        Ok(Self { n, rho })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rho(&self) -> T {
        self.rho
    }

    fn check_t(&self, t: T) -> Result<()> {
        if t < T::zero() || t >= self.rho || t.is_nan() {
            return domain(format!("t = {t} outside [0, rho) with rho = {}", self.rho));
        }
        Ok(())
    }

    /// `t(s) = ρs/√(1+s²)`.
    pub fn t_of_s(&self, s: T) -> Result<T> {
        if s < T::zero() || s.is_nan() {
            return domain(format!("s = {s} is negative"));
        }
        Ok(self.rho * s / (T::one() + s * s).sqrt())
    }

    /// `s(t) = t/√(ρ²−t²)`.
    pub fn s_of_t(&self, t: T) -> Result<T> {
        self.check_t(t)?;
        Ok(t / ((self.rho - t) * (self.rho + t)).sqrt())
    }

    /// `ds/dt = ρ²/(ρ²−t²)^{3/2}`.
    pub fn ds_dt(&self, t: T) -> Result<T> {
        self.check_t(t)?;
        let q = (self.rho - t) * (self.rho + t);
        Ok(self.rho * self.rho / (q * q.sqrt()))
    }

    /// `λ(s) = ρ − t(s)`, evaluated without cancellation for large `s`.
    pub fn lambda_of_s(&self, s: T) -> Result<T> {
        if s < T::zero() || s.is_nan() {
            return domain(format!("s = {s} is negative"));
        }
        let c = (T::one() + s * s).sqrt();
        Ok(self.rho / (c * (c + s)))
    }

    /// `y_i = (ρ−t)·arctan(x_i)`.
    pub fn y_of_x(&self, t: T, x: &[T]) -> Result<Vec<T>> {
        self.check_t(t)?;
        self.check_len(x.len())?;
        let lam = self.rho - t;
        Ok(x.iter().map(|&xi| lam * xi.atan()).collect())
    }

    /// `x_i = tan(y_i/(ρ−t))`; requires `|y_i| < (ρ−t)π/2`.
    pub fn x_of_y(&self, t: T, y: &[T]) -> Result<Vec<T>> {
        self.check_t(t)?;
        self.check_len(y.len())?;
        let lam = self.rho - t;
        let half = lam * T::FRAC_PI_2();
        y.iter()
            .map(|&yi| {
                if yi.abs() >= half {
                    domain(format!("y = {yi} outside the cone section |y| < {half}"))
                } else {
                    Ok((yi / lam).tan())
                }
            })
            .collect()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return domain(format!("point has {len} coordinates, chart has n = {}", self.n));
        }
        Ok(())
    }

    /// Jacobian `dy/dx = (ρ−t)^n Π 1/(1+x_i²)`.
    pub fn measure_factor(&self, t: T, x: &[T]) -> Result<T> {
        self.check_t(t)?;
        self.check_len(x.len())?;
        let lam = self.rho - t;
        Ok(x.iter().fold(lam.powi(self.n as i32), |acc, &xi| acc / (T::one() + xi * xi)))
    }

    /// Jacobian `dx/dy`, the reciprocal of [`measure_factor`](Self::measure_factor).
    pub fn inverse_measure_factor(&self, t: T, x: &[T]) -> Result<T> {
        Ok(T::one() / self.measure_factor(t, x)?)
    }

    /// Coefficient `kind` at time `t ∈ [0, ρ)`, in the printed closed forms.
    pub fn coeff(&self, kind: CoeffKind, t: T) -> Result<T> {
        self.check_t(t)?;
        let rho = self.rho;
        let lam = rho - t;
        let r3 = ((rho - t) * (rho + t)).sqrt().powi(3);
        let rho2 = rho * rho;
        Ok(match kind {
            CoeffKind::Burgers => r3 / rho2,
            CoeffKind::Convection | CoeffKind::Leray => lam * r3 / rho2,
            CoeffKind::Damping => r3 / (rho2 * lam),
        })
    }

    /// Coefficient `kind` as a function of `s`, using `ρ² − t² = ρ²/(1+s²)` so
    /// the values stay accurate as `t → ρ`.
    pub fn coeff_of_s(&self, kind: CoeffKind, s: T) -> Result<T> {
        let lam = self.lambda_of_s(s)?;
        let q = T::one() + s * s;
        let b = self.rho / (q * q.sqrt());
        Ok(match kind {
            CoeffKind::Burgers => b,
            CoeffKind::Convection | CoeffKind::Leray => lam * b,
            CoeffKind::Damping => (q.sqrt() + s) / q,
        })
    }

    /// Damping coefficient in the simplified form `√(ρ²−t²)(ρ+t)/ρ²`, continuous on `[0, ρ]`.
    pub fn damping_simplified(&self, t: T) -> T {
        let rho = self.rho;
        let q = ((rho - t) * (rho + t)).max(T::zero());
        q.sqrt() * (rho + t) / (rho * rho)
    }

    /// Continuous extension of every coefficient to the closed interval `[0, ρ]`.
    fn coeff_closed(&self, kind: CoeffKind, t: T) -> T {
        if kind == CoeffKind::Damping {
            return self.damping_simplified(t);
        }
        if t >= self.rho {
            return T::zero();
        }
        self.coeff(kind, t).unwrap_or_else(|_| T::zero())
    }

    /// Supremum of `coeff(kind, ·)` over `[0, ρ]`.
    pub fn coeff_sup(&self, kind: CoeffKind) -> Maximum<T> {
        maximize(|t| self.coeff_closed(kind, t), T::zero(), self.rho, SUP_SCAN_POINTS)
    }

    /// `∫ D(t(s)) ds` over `t ∈ [0, ρ−ε]`, integrated numerically in `s`.
    pub fn damping_time_integral(&self, eps: T) -> Result<T> {
        if !(eps > T::zero()) || eps >= self.rho {
            return domain(format!("eps = {eps} outside (0, rho) with rho = {}", self.rho));
        }
        let s_end = to_f64(self.s_of_t(self.rho - eps)?);
        let rho = to_f64(self.rho);
        let chart = ConeChart::<f64> { n: self.n, rho };
        let integrand = |s: f64| {
            let t = chart.t_of_s(s).unwrap_or(rho);
            chart.coeff(CoeffKind::Damping, t).unwrap_or(0.0)
        };
        let v = quad::integrate_panels(integrand, 0.0, s_end, &quad::geometric_breaks(s_end), 1e-14);
        Ok(lit(v))
    }

    /// `∫_Z (ρ−t)^{n−1}·C dt dz` over the cylinder `[0,ρ] × (−π/2, π/2)^n`,
    /// which equals `C·π^n·ρ^n/n`.
    pub fn cylinder_damping_mass(&self, bound: T) -> Result<T> {
        if bound < T::zero() || bound.is_nan() {
            return domain(format!("bound C = {bound} must be nonnegative"));
        }
        let rho = to_f64(self.rho);
        let n = self.n as i32;
        let time = quad::integrate_panels(|t| (rho - t).powi(n - 1), 0.0, rho, &[], 1e-16 * rho.powi(n).max(1e-300));
        let vol = std::f64::consts::PI.powi(n);
        Ok(bound * lit::<T>(time * vol))
    }

    /// Closed-form `C·π^n·ρ^n/n`.
    pub fn cylinder_damping_mass_closed(&self, bound: T) -> T {
        bound * T::PI().powi(self.n as i32) * self.rho.powi(self.n as i32) / from_usize::<T>(self.n)
    }

    /// `∫_{s1}^{s2} ds/λ(s)²`, the clock that converts `νΔ_y` into cylinder units.
    pub fn viscous_clock(&self, s1: T, s2: T) -> Result<T> {
        let f = |s: T| -> Result<T> {
            if s < T::zero() {
                return domain(format!("s = {s} is negative"));
            }
            let u = s.asinh();
            let (e1, e3, e5, em) = (u.exp(), (lit::<T>(3.0) * u).exp(), (lit::<T>(5.0) * u).exp(), (-u).exp());
            Ok((e5 / lit(5.0) + e3 + lit::<T>(3.0) * e1 - em) / (lit::<T>(8.0) * self.rho * self.rho))
        };
        Ok(f(s2)? - f(s1)?)
    }

    /// Damping propagator `exp(−∫_{s1}^{s2} D ds) = λ(s2)/λ(s1)`.
    pub fn damping_factor(&self, s1: T, s2: T) -> Result<T> {
        Ok(self.lambda_of_s(s2)? / self.lambda_of_s(s1)?)
    }

    /// `s` at which `t(s) = ρ(1 − frac)`.
    pub fn s_at_tip_fraction(&self, frac: T) -> Result<T> {
        self.s_of_t(self.rho * (T::one() - frac))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart(rho: f64) -> ConeChart<f64> {
        ConeChart::new(3, rho).unwrap()
    }

    #[test]
    fn coefficients_in_s_match_t_forms() {
        let c = chart(0.05);
        for &s in &[0.0, 0.3, 2.0, 17.0] {
            let t = c.t_of_s(s).unwrap();
            for kind in CoeffKind::ALL {
                let a = c.coeff(kind, t).unwrap();
                let b = c.coeff_of_s(kind, s).unwrap();
                assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-12), "{kind:?} {a} {b}");
            }
        }
    }

    #[test]
    fn rejects_low_dimension_and_bad_rho() {
        assert!(ConeChart::new(2, 0.1).is_err());
        assert!(ConeChart::new(3, 0.0).is_err());
        assert!(ConeChart::new(3, -1.0).is_err());
    }

    #[test]
    fn t_of_s_examples() {
        let c = chart(0.1);
        assert_eq!(c.t_of_s(0.0).unwrap(), 0.0);
        assert!((c.t_of_s(1.0).unwrap() - 0.1 / 2f64.sqrt()).abs() < 1e-15);
        assert!((c.t_of_s(1e6).unwrap() - 0.1).abs() < 1e-12);
        assert!(c.t_of_s(-1e-3).is_err());
    }

    #[test]
    fn s_of_t_examples() {
        let c = chart(0.1);
        assert_eq!(c.s_of_t(0.0).unwrap(), 0.0);
        for t in [0.01, 0.05, 0.09] {
            assert!((c.t_of_s(c.s_of_t(t).unwrap()).unwrap() - t).abs() < 1e-12);
        }
        let one = chart(1.0);
        assert!((one.s_of_t(1.0 / 2f64.sqrt()).unwrap() - 1.0).abs() < 1e-12);
        assert!(c.s_of_t(0.1).is_err());
        assert!(c.s_of_t(-0.01).is_err());
    }

    #[test]
    fn ds_dt_examples() {
        let c = chart(0.1);
        assert!((c.ds_dt(0.0).unwrap() - 10.0).abs() < 1e-12);
        let t = 0.05;
        let h = 1e-7;
        let fd = (c.s_of_t(t + h).unwrap() - c.s_of_t(t - h).unwrap()) / (2.0 * h);
        assert!((c.ds_dt(t).unwrap() / fd - 1.0).abs() < 1e-6);
        let mut prev = 0.0;
        for k in 0..40 {
            let t = 0.1 * (1.0 - 0.8f64.powi(k));
            let v = c.ds_dt(t).unwrap();
            assert!(v > prev);
            prev = v;
        }
        assert!(c.ds_dt(0.1).is_err());
    }

    #[test]
    fn lambda_matches_rho_minus_t() {
        let c = chart(0.1);
        for s in [0.0, 0.5, 3.0, 40.0] {
            let lam = c.lambda_of_s(s).unwrap();
            assert!((lam - (0.1 - c.t_of_s(s).unwrap())).abs() < 1e-15);
        }
    }

    #[test]
    fn y_of_x_examples() {
        let c = chart(1.0);
        assert_eq!(c.y_of_x(0.0, &[0.0; 3]).unwrap(), vec![0.0; 3]);
        let y = c.y_of_x(0.0, &[1.0, 0.0, 0.0]).unwrap();
        assert!((y[0] - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert!(c.x_of_y(0.5, &[0.5 * std::f64::consts::FRAC_PI_2, 0.0, 0.0]).is_err());
        assert!(c.y_of_x(0.0, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn measure_factor_examples() {
        let c = chart(0.1);
        assert!((c.measure_factor(0.0, &[0.0; 3]).unwrap() - 1e-3).abs() < 1e-18);
        assert!((c.inverse_measure_factor(0.0, &[0.0; 3]).unwrap() - 1e3).abs() < 1e-9);
    }

    #[test]
    fn coefficient_examples() {
        for rho in [0.2, 0.1, 0.01] {
            let c = chart(rho);
            assert!((c.coeff(CoeffKind::Burgers, 0.0).unwrap() - rho).abs() < 1e-15);
            assert!((c.coeff(CoeffKind::Damping, 0.0).unwrap() - 1.0).abs() < 1e-14);
            for k in 0..200 {
                let t = rho * k as f64 / 200.0;
                let a = c.coeff(CoeffKind::Damping, t).unwrap();
                assert!((a - c.damping_simplified(t)).abs() < 1e-12);
            }
        }
        assert!(chart(0.1).coeff(CoeffKind::Leray, 0.1).is_err());
    }

    #[test]
    fn sup_values() {
        let c = chart(0.1);
        let b = c.coeff_sup(CoeffKind::Burgers);
        assert!((b.value - 0.1).abs() < 1e-12);
        assert_eq!(b.argmax, 0.0);
        let d = c.coeff_sup(CoeffKind::Damping);
        assert!((d.value - 3.0 * 3f64.sqrt() / 4.0).abs() < 1e-12);
        assert!((d.argmax - 0.05).abs() < 1e-7);
        let v = c.coeff_sup(CoeffKind::Convection);
        assert!(v.value <= 0.01 + 1e-15);
        assert!((v.value - 0.01).abs() < 1e-15);
    }

    #[test]
    fn damping_integral_examples() {
        let c = chart(0.1);
        let v = c.damping_time_integral(1e-3).unwrap();
        assert!((v / 100f64.ln() - 1.0).abs() < 1e-6);
        assert!(c.damping_time_integral(0.1 - 1e-12).unwrap().abs() < 1e-9);
        let a = c.damping_time_integral(1e-3).unwrap();
        let b = c.damping_time_integral(2e-3).unwrap();
        assert!((a - b - 2f64.ln()).abs() < 1e-8);
        assert!(c.damping_time_integral(0.1).is_err());
    }

    #[test]
    fn cylinder_mass_examples() {
        let c = chart(0.1);
        assert_eq!(c.cylinder_damping_mass(0.0).unwrap(), 0.0);
        let m = c.cylinder_damping_mass(1.0).unwrap();
        let pi3 = std::f64::consts::PI.powi(3);
        assert!((m - pi3 * 1e-3 / 3.0).abs() < 1e-12);
        let half = chart(0.05).cylinder_damping_mass(1.0).unwrap();
        assert!((m / half - 8.0).abs() < 1e-10);
    }

    #[test]
    fn viscous_clock_matches_quadrature() {
        let c = chart(0.1);
        let (s1, s2) = (0.3, 2.5);
        let q = quad::integrate_panels(|s| c.lambda_of_s(s).unwrap().powi(-2), s1, s2, &[1.0, 2.0], 1e-10);
        let v = c.viscous_clock(s1, s2).unwrap();
        assert!((v / q - 1.0).abs() < 1e-10);
    }

    #[test]
    fn damping_factor_is_exact_propagator() {
        let c = chart(0.1);
        let (s1, s2) = (0.2, 1.7);
        let integral = quad::integrate_panels(
            |s| c.coeff(CoeffKind::Damping, c.t_of_s(s).unwrap()).unwrap(),
            s1,
            s2,
            &[1.0],
            1e-14,
        );
        assert!((c.damping_factor(s1, s2).unwrap() - (-integral).exp()).abs() < 1e-12);
    }

    #[test]
    fn works_in_single_precision() {
        let c = ConeChart::<f32>::new(3, 0.1).unwrap();
        let t = c.t_of_s(c.s_of_t(0.05).unwrap()).unwrap();
        assert!((t - 0.05).abs() < 1e-6);
        assert!((c.coeff_sup(CoeffKind::Damping).value - 1.299_038).abs() < 1e-4);
    }
}
