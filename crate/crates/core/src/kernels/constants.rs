//! Constants of the kernel bounds and the checks that sample them.

use serde::Serialize;

use super::{sphere_area, ConvolutionEngine, HeatKernel};
use crate::error::{domain, Result};
use crate::fields::ScalarField;
use crate::optimize::maximize;
use crate::quad::{integrate_panels, midpoint};
use crate::spectral::Window;

const SCAN_POINTS: usize = 4096;
/// Radial nodes for the kernel-norm quadrature.
pub const RADIAL_NODES: usize = 10_000;

/// Constants of the Gaussian and Riesz kernel estimates for one `(n, μ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelConstants {
    pub n: usize,
    pub mu: f64,
    /// `π^{−n/2} sup_z z^{n−2μ} e^{−z²}`.
    pub c: f64,
    pub argmax: f64,
    /// `2 π^{−n/2} sup_z z^{n+2−2μ} e^{−z²}`, the gradient counterpart of `c`.
    pub c_prime: f64,
    pub argmax_prime: f64,
    /// `C′` computed with the exponent `n+1−2μ` instead, for comparison.
    pub c_prime_alt: f64,
    /// `‖K‖_{L¹(B₁)} + ‖K‖_{L²(ℝⁿ∖B₁)}`.
    pub c_kn: f64,
    /// Relative change of `c_kn` between half and full radial resolution.
    pub c_kn_refinement: f64,
    /// Second moment of the unit-variance Gaussian in one coordinate.
    pub m2: f64,
}

impl KernelConstants {
    /// `C_G = max{C, C′}`.
    pub fn c_g(&self) -> f64 {
        self.c.max(self.c_prime)
    }

    /// The gradient envelope is integrable near the origin only for `μ > ½`.
    pub fn gradient_integrable(&self) -> bool {
        self.mu > 0.5
    }
}

fn sup_power_gauss(p: f64) -> (f64, f64) {
    let hi = (p / 2.0).sqrt().max(1.0) * 6.0;
    let m = maximize(|z: f64| z.powf(p) * (-z * z).exp(), 0.0, hi, SCAN_POINTS);
    (m.argmax, m.value)
}

fn kernel_norms(n: usize, nodes: usize) -> f64 {
    let c = 1.0 / sphere_area(n);
    let nf = n as f64;
    // ∫_{S^{n−1}} |ω₁| dω = |S^{n−2}| ∫_0^π |cos θ| sin^{n−2}θ dθ.
    let polar = midpoint(|th: f64| th.cos().abs() * th.sin().powi(n as i32 - 2), 0.0, std::f64::consts::PI, nodes);
    let angular_l1 = sphere_area(n - 1) * polar;
    // In B₁ the radial factor r^{1−n}·r^{n−1} is 1.
    let radial_l1 = midpoint(|r: f64| r.powf(1.0 - nf) * r.powf(nf - 1.0), 0.0, 1.0, nodes);
    // Outside B₁, with r = 1/u: ∫_1^∞ r^{1−n} dr = ∫_0^1 u^{n−3} du.
    let radial_l2 = midpoint(|u: f64| u.powf(nf - 3.0), 0.0, 1.0, nodes);
    let angular_l2 = sphere_area(n) / nf;
    c * radial_l1 * angular_l1 + c * (radial_l2 * angular_l2).sqrt()
}

pub fn kernel_constants(n: usize, mu: f64) -> Result<KernelConstants> {
    if n < 3 {
        return domain(format!("dimension {n} < 3"));
    }
    if !(mu > 0.0 && mu < 1.0) {
        return domain(format!("kernel exponent μ = {mu} outside (0, 1)"));
    }
    let nf = n as f64;
    let pi_n = std::f64::consts::PI.powf(-nf / 2.0);
    let (argmax, s) = sup_power_gauss(nf - 2.0 * mu);
    let (argmax_prime, sp) = sup_power_gauss(nf + 2.0 - 2.0 * mu);
    let (_, sa) = sup_power_gauss(nf + 1.0 - 2.0 * mu);
    let fine = kernel_norms(n, RADIAL_NODES);
    let coarse = kernel_norms(n, RADIAL_NODES / 2);
    let gauss = |x: f64| x * x * (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let breaks: Vec<f64> = (-11..=11).map(|k| k as f64).collect();
    let m2 = integrate_panels(gauss, -12.0, 12.0, &breaks, 1e-15);
    Ok(KernelConstants {
        n,
        mu,
        c: pi_n * s,
        argmax,
        c_prime: 2.0 * pi_n * sp,
        argmax_prime,
        c_prime_alt: 2.0 * pi_n * sa,
        c_kn: fine,
        c_kn_refinement: ((fine - coarse) / fine).abs(),
        m2,
    })
}

/// `4·L·M₂`.
pub fn lipschitz_moment_bound(l: f64, constants: &KernelConstants) -> f64 {
    4.0 * l * constants.m2
}

/// Measured `max |F ∗ ∂_i G_ν(τ)|` over all axes against `4 L M₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzCheck {
    pub max_abs: f64,
    pub bound: f64,
    pub pass: bool,
}

/// `F` is convolved on its plain periodic extension, so it must be continuous
/// across the seam with Lipschitz constant `l` there too.
pub fn lipschitz_check(f: &ScalarField<f64>, nu: f64, tau: f64, l: f64, constants: &KernelConstants) -> Result<LipschitzCheck> {
    if !(tau > 0.0 && nu > 0.0) {
        return domain("ν and τ must be positive");
    }
    let eng = ConvolutionEngine::new(&f.spec);
    let s = f.meta.scale();
    let nt = nu * tau / (s * s);
    let mut max_abs: f64 = 0.0;
    for axis in 0..f.spec.n {
        let g = eng.heat_grad(&f.data, nt, axis, Window::None);
        max_abs = g.iter().fold(max_abs, |m, v| m.max(v.abs() / s));
    }
    let bound = lipschitz_moment_bound(l, constants);
    Ok(LipschitzCheck { max_abs, bound, pass: max_abs <= bound * (1.0 + 1e-12) + 1e-14 })
}

/// Worst sampled ratios of `G_ν`, `∂_iG_ν` against their envelopes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub n: usize,
    pub mu: f64,
    /// `max G·(4ντ)^μ |x|^{n−2μ} / C` over the samples.
    pub value_ratio: f64,
    /// `max |∂_iG|·(4ντ)^μ |x|^{n+1−2μ} / C′`.
    pub grad_ratio: f64,
    /// Samples violating `G ≤ C (ντ)^{−μ/2} |x|^{2μ−n}`.
    pub value_violations_unscaled: usize,
    /// Samples violating the gradient envelope when `C′` uses exponent `n+1−2μ`.
    pub grad_violations_alt: usize,
    pub samples: usize,
    pub pass: bool,
}

/// Samples the envelopes at every node of `[−h, h)^n` (origin excluded) for each `τ`.
pub fn envelope_check(constants: &KernelConstants, nu: f64, taus: &[f64], points: usize, half_extent: f64) -> Result<EnvelopeReport> {
    let n = constants.n;
    let mu = constants.mu;
    let kernel = HeatKernel::new(n, nu)?;
    let spec = crate::fields::GridSpec::new(n, points, half_extent)?;
    let coords = spec.coords();
    let mut x = vec![0.0; n];
    let (mut vr, mut gr) = (0.0f64, 0.0f64);
    let (mut bad_unscaled, mut bad_alt, mut samples) = (0usize, 0usize, 0usize);
    let nf = n as f64;
    for &tau in taus {
        let four = 4.0 * nu * tau;
        spec.for_each_index(|_, idx| {
            for a in 0..n {
                x[a] = coords[idx[a]];
            }
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r == 0.0 {
                return;
            }
            samples += 1;
            let g = kernel.value(tau, &x);
            let dg = (0..n).map(|i| kernel.grad(tau, &x, i).abs()).fold(0.0, f64::max);
            vr = vr.max(g * four.powf(mu) * r.powf(nf - 2.0 * mu) / constants.c);
            gr = gr.max(dg * four.powf(mu) * r.powf(nf + 1.0 - 2.0 * mu) / constants.c_prime);
            if g > constants.c / ((nu * tau).powf(mu / 2.0) * r.powf(nf - 2.0 * mu)) {
                bad_unscaled += 1;
            }
            if dg > constants.c_prime_alt / (four.powf(mu) * r.powf(nf + 1.0 - 2.0 * mu)) {
                bad_alt += 1;
            }
        });
    }
    let tol = 1.0 + 1e-9;
    Ok(EnvelopeReport {
        n,
        mu,
        value_ratio: vr,
        grad_ratio: gr,
        value_violations_unscaled: bad_unscaled,
        grad_violations_alt: bad_alt,
        samples,
        pass: vr <= tol && gr <= tol,
    })
}

/// `∫_1^∞ (4πνs)^{−n/2} ds` by quadrature (substituting `s = v^{−2}`) and in closed form.
pub fn large_time_envelope_integral(n: usize, nu: f64) -> (f64, f64) {
    let nf = n as f64;
    let f = |v: f64| 2.0 * (4.0 * std::f64::consts::PI * nu).powf(-nf / 2.0) * v.powf(nf - 3.0);
    let numeric = integrate_panels(f, 0.0, 1.0, &[0.5], 1e-14);
    let closed = (4.0 * std::f64::consts::PI * nu).powf(-nf / 2.0) * 2.0 / (nf - 2.0);
    (numeric, closed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_and_moment() {
        let k = kernel_constants(3, 0.75).unwrap();
        assert!((k.argmax - 0.75f64.sqrt()).abs() < 1e-8);
        assert!((k.m2 - 1.0).abs() < 1e-8);
        assert!(k.c_kn_refinement < 1e-4);
        assert!(kernel_constants(3, 1.0).is_err());
        assert!(kernel_constants(2, 0.5).is_err());
    }

    #[test]
    fn kernel_norm_closed_form() {
        // n = 3: c = 1/(4π), ∫|ω₁| = 2π, L² part √(4π/3).
        let k = kernel_constants(3, 0.5).unwrap();
        let c = 1.0 / (4.0 * std::f64::consts::PI);
        let exact = c * 2.0 * std::f64::consts::PI + c * (4.0 * std::f64::consts::PI / 3.0).sqrt();
        assert!((k.c_kn - exact).abs() < 1e-7);
    }

    #[test]
    fn large_time_integral_converges() {
        let (a, b) = large_time_envelope_integral(3, 0.1);
        assert!((a / b - 1.0).abs() < 1e-10, "{a} {b}");
    }
}
