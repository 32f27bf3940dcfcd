//! Heat and Riesz kernels, the spectral convolution engine, the Leray projector
//! and the bound constants of the kernel estimates.

mod constants;
mod direct;

pub use constants::{
    envelope_check, kernel_constants, large_time_envelope_integral, lipschitz_check, lipschitz_moment_bound,
    EnvelopeReport, KernelConstants, LipschitzCheck,
};
pub use direct::{lattice_zeta, riesz_convolve_direct};

use rustfft::num_complex::Complex;

use crate::error::{domain, Result};
use crate::fields::{FieldWarning, GridSpec, ScalarField, VectorField};
use crate::scalar::{from_usize, lit, Real};
use crate::spectral::{taper_window, xi_sq, Spectral, Window, TAPER_FRACTION};

/// Relative amplitude inside the taper band above which a Riesz source counts
/// as non-decaying.
const ALIASING_TOLERANCE: f64 = 1e-3;

/// Area of the unit sphere `S^{n−1}`.
pub fn sphere_area(n: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(n as f64 / 2.0) / libm::tgamma(n as f64 / 2.0)
}

/// Heat kernel `G_ν(τ, x) = (4πντ)^{−n/2} exp(−|x|²/(4ντ))`.
#[derive(Debug, Clone, Copy)]
pub struct HeatKernel<T> {
    pub nu: T,
    pub n: usize,
}

impl<T: Real> HeatKernel<T> {
    pub fn new(n: usize, nu: T) -> Result<Self> {
        if !(nu > T::zero()) {
            return domain(format!("viscosity {nu} must be positive"));
        }
        Ok(Self { nu, n })
    }

    pub fn value(&self, tau: T, x: &[T]) -> T {
        let four_nt = lit::<T>(4.0) * self.nu * tau;
        let r2 = xi_sq(x);
        (T::PI() * four_nt).powf(-lit::<T>(self.n as f64 / 2.0)) * (-r2 / four_nt).exp()
    }

    /// `∂_i G_ν(τ, x)`.
    pub fn grad(&self, tau: T, x: &[T], i: usize) -> T {
        -x[i] / (lit::<T>(2.0) * self.nu * tau) * self.value(tau, x)
    }

    /// `∫ G_ν(τ, x) dx` by radial quadrature.
    pub fn mass(&self, tau: T) -> f64 {
        let four_nt = crate::scalar::to_f64(lit::<T>(4.0) * self.nu * tau);
        let n = self.n as f64;
        let radial = |r: f64| r.powf(n - 1.0) * (std::f64::consts::PI * four_nt).powf(-n / 2.0) * (-r * r / four_nt).exp();
        let width = four_nt.sqrt();
        let breaks: Vec<f64> = (1..40).map(|k| k as f64 * width).collect();
        sphere_area(self.n) * crate::quad::integrate_panels(radial, 0.0, 40.0 * width, &breaks, 1e-14)
    }
}

/// Riesz kernel `K_{n,i}(x) = c x_i/|x|^n`, the gradient of the Laplace
/// fundamental solution.
#[derive(Debug, Clone, Copy)]
pub struct RieszKernel {
    pub n: usize,
    pub c: f64,
}

impl RieszKernel {
    pub fn new(n: usize) -> Self {
        Self { n, c: 1.0 / sphere_area(n) }
    }

    pub fn value<T: Real>(&self, x: &[T], i: usize) -> T {
        let r = xi_sq(x).sqrt();
        lit::<T>(self.c) * x[i] / r.powi(self.n as i32)
    }
}

/// Reusable FFT workspace, taper window and wavenumber tables for one grid.
/// Distances are in grid units; callers rescale for the physical frame.
pub struct ConvolutionEngine<T: Real> {
    pub spec: GridSpec<T>,
    pub sp: Spectral<T>,
    window: Vec<T>,
    seam: Vec<usize>,
    xi2: Vec<T>,
}

impl<T: Real> ConvolutionEngine<T> {
    pub fn new(spec: &GridSpec<T>) -> Self {
        let sp = Spectral::new(spec);
        let mut seam = Vec::new();
        spec.for_each_index(|flat, idx| {
            if idx.iter().any(|&k| k == 0) {
                seam.push(flat);
            }
        });
        let mut xi2 = vec![T::zero(); sp.len()];
        let mut xi = vec![T::zero(); spec.n];
        sp.for_each_mode(|flat, idx| {
            for a in 0..idx.len() {
                xi[a] = sp.xi(idx[a]);
            }
            xi2[flat] = xi_sq(&xi);
        });
        Self { spec: *spec, window: taper_window(spec), seam, xi2, sp }
    }

    pub fn window(&self) -> &[T] {
        &self.window
    }

    pub fn seam_mean(&self, data: &[T]) -> T {
        let sum = self.seam.iter().fold(T::zero(), |acc, &k| acc + data[k]);
        sum / from_usize::<T>(self.seam.len())
    }

    /// Transform of the windowed deviation and the far-field level.
    pub fn forward_windowed(&self, data: &[T], window: Window) -> (Vec<Complex<T>>, T) {
        match window {
            Window::None => (self.sp.forward(data), T::zero()),
            Window::Taper => {
                let fb = self.seam_mean(data);
                let dev: Vec<T> = data.iter().zip(&self.window).map(|(&f, &w)| w * (f - fb)).collect();
                (self.sp.forward(&dev), fb)
            }
        }
    }

    /// Multiplies by `exp(−|ξ|² ντ)`, `ντ` in squared grid units.
    pub fn heat_hat(&self, hat: &mut [Complex<T>], nu_tau: T) {
        for (h, &k2) in hat.iter_mut().zip(&self.xi2) {
            *h = *h * (-k2 * nu_tau).exp();
        }
    }

    pub fn heat(&self, data: &[T], nu_tau: T, window: Window) -> Vec<T> {
        let (mut hat, fb) = self.forward_windowed(data, window);
        self.heat_hat(&mut hat, nu_tau);
        self.sp.inverse_real(hat).into_iter().map(|v| v + fb).collect()
    }

    pub fn heat_grad(&self, data: &[T], nu_tau: T, axis: usize, window: Window) -> Vec<T> {
        let (mut hat, _) = self.forward_windowed(data, window);
        self.heat_hat(&mut hat, nu_tau);
        let mut gamma = vec![0; self.spec.n];
        gamma[axis] = 1;
        self.sp.apply_derivative(&mut hat, &gamma);
        self.sp.inverse_real(hat)
    }

    /// Multiplies by the Riesz symbol `−iξ_i/|ξ|²` (zero mode dropped).
    pub fn riesz_hat(&self, hat: &mut [Complex<T>], axis: usize) {
        let mut k = 0usize;
        self.sp.apply(hat, |xi, nyq| {
            let k2 = self.xi2[k];
            k += 1;
            if k2 == T::zero() || nyq[axis] {
                Complex::new(T::zero(), T::zero())
            } else {
                Complex::new(T::zero(), -xi[axis] / k2)
            }
        });
    }

    pub fn riesz(&self, data: &[T], axis: usize, window: Window) -> Vec<T> {
        let (mut hat, _) = self.forward_windowed(data, window);
        self.riesz_hat(&mut hat, axis);
        self.sp.inverse_real(hat)
    }

    /// True when the source has appreciable amplitude where the taper acts.
    pub fn is_aliased(&self, data: &[T]) -> bool {
        let fb = self.seam_mean(data);
        let peak = data.iter().fold(T::zero(), |m, &v| m.max((v - fb).abs()));
        if peak == T::zero() {
            return false;
        }
        let band = data
            .iter()
            .zip(&self.window)
            .filter(|(_, &w)| w < T::one())
            .fold(T::zero(), |m, (&v, _)| m.max((v - fb).abs()));
        band > lit::<T>(ALIASING_TOLERANCE) * peak
    }

    /// Leray projection `(I − ξξᵀ/|ξ|²)` of the first `n` components, with
    /// Nyquist axes removed from `ξ`; modes with no resolved wavenumber pass through.
    pub fn leray(&self, comps: &[Vec<T>]) -> Vec<Vec<T>> {
        let n = self.spec.n;
        let hats: Vec<Vec<Complex<T>>> = comps.iter().map(|c| self.sp.forward(c)).collect();
        let mut out = hats.clone();
        let mut xi = vec![T::zero(); n];
        self.sp.for_each_mode(|flat, idx| {
            for a in 0..n {
                xi[a] = if self.sp.is_nyquist(idx[a]) { T::zero() } else { self.sp.xi(idx[a]) };
            }
            let k2 = xi_sq(&xi);
            if k2 == T::zero() {
                return;
            }
            let dot = (0..n).fold(Complex::new(T::zero(), T::zero()), |acc, a| acc + hats[a][flat] * xi[a]);
            for a in 0..n {
                out[a][flat] = hats[a][flat] - dot * (xi[a] / k2);
            }
        });
        out.into_iter().map(|h| self.sp.inverse_real(h)).collect()
    }
}

fn heat_warnings<T: Real>(field: &ScalarField<T>, nu_tau_grid: T) -> Vec<FieldWarning> {
    let mut w = Vec::new();
    let width = (lit::<T>(2.0) * nu_tau_grid).sqrt();
    if width < field.spec.spacing() {
        w.push(FieldWarning::UnderResolved);
    }
    if width > lit::<T>(TAPER_FRACTION) * field.spec.half_extent {
        w.push(FieldWarning::Aliasing);
    }
    w
}

fn check_tau<T: Real>(tau: T) -> Result<()> {
    if !(tau > T::zero()) {
        return domain(format!("elapsed time {tau} must be positive"));
    }
    Ok(())
}

/// `ντ` converted to squared grid units of `field`.
fn grid_nu_tau<T: Real>(field: &ScalarField<T>, nu: T, tau: T) -> T {
    let s = field.meta.scale();
    nu * tau / (s * s)
}

/// Spatial convolution with `G_ν(τ)` on the tapered periodic extension.
pub fn heat_convolve<T: Real>(field: &ScalarField<T>, nu: T, tau: T) -> Result<ScalarField<T>> {
    check_tau(tau)?;
    let nt = grid_nu_tau(field, nu, tau);
    let eng = ConvolutionEngine::new(&field.spec);
    let mut out = field.with_data(eng.heat(&field.data, nt, Window::Taper));
    for w in heat_warnings(field, nt) {
        out.warn(w);
    }
    Ok(out)
}

/// Convolution with `∂_axis G_ν(τ)`.
pub fn heat_convolve_grad<T: Real>(field: &ScalarField<T>, nu: T, tau: T, axis: usize) -> Result<ScalarField<T>> {
    check_tau(tau)?;
    if axis >= field.spec.n {
        return domain(format!("axis {axis} out of range"));
    }
    let nt = grid_nu_tau(field, nu, tau);
    let eng = ConvolutionEngine::new(&field.spec);
    let inv_scale = T::one() / field.meta.scale();
    let data = eng.heat_grad(&field.data, nt, axis, Window::Taper).into_iter().map(|v| v * inv_scale).collect();
    let mut out = field.with_data(data);
    for w in heat_warnings(field, nt) {
        out.warn(w);
    }
    Ok(out)
}

/// Divergence-free projection of a vector field.
pub fn leray_project<T: Real>(v: &VectorField<T>) -> VectorField<T> {
    let eng = ConvolutionEngine::new(&v.spec);
    let mut comps = eng.leray(&v.comps[..v.spec.n.min(v.ncomp())]);
    comps.extend(v.comps.iter().skip(v.spec.n).cloned());
    VectorField { spec: v.spec, meta: v.meta, comps, warnings: v.warnings.clone() }
}

/// Convolution with `K_{n,axis}` through its symbol `−iξ/|ξ|²`.
pub fn riesz_convolve<T: Real>(source: &ScalarField<T>, axis: usize) -> Result<ScalarField<T>> {
    if axis >= source.spec.n {
        return domain(format!("axis {axis} out of range"));
    }
    let eng = ConvolutionEngine::new(&source.spec);
    let spec = source.spec;
    let scale = source.meta.scale();
    let mut data: Vec<T> = eng.riesz(&source.data, axis, Window::Taper).into_iter().map(|v| v * scale).collect();
    // The periodic solve removes the zero mode, i.e. adds a uniform background
    // of opposite charge whose field is −(M x − P)/(nV) at leading order.
    let fb = eng.seam_mean(&source.data);
    let coords: Vec<T> = spec.coords().into_iter().map(|c| c * scale).collect();
    let (mut mass, mut moment) = (T::zero(), T::zero());
    spec.for_each_index(|flat, idx| {
        let dev = eng.window[flat] * (source.data[flat] - fb);
        mass = mass + dev;
        moment = moment + dev * coords[idx[axis]];
    });
    let cell = (spec.spacing() * scale).powi(spec.n as i32);
    let volume = cell * from_usize::<T>(spec.len());
    let denom = from_usize::<T>(spec.n) * volume;
    // The background field jumps by 2L across the seam; take the midpoint there
    // so the correction keeps the parity of the kernel.
    let mut field_coords = coords;
    field_coords[0] = T::zero();
    spec.for_each_index(|flat, idx| {
        data[flat] = data[flat] + (mass * field_coords[idx[axis]] - moment) * cell / denom;
    });
    let mut out = source.with_data(data);
    if eng.is_aliased(&source.data) {
        out.warn(FieldWarning::Aliasing);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{FieldMeta, Frame};

    fn meta() -> FieldMeta<f64> {
        FieldMeta::new(Frame::OriginalX, 0.0, 0.1, 0.0)
    }

    #[test]
    fn heat_mass_is_one() {
        let g = HeatKernel::new(3, 0.3).unwrap();
        assert!((g.mass(0.7) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn heat_rejects_nonpositive_tau() {
        let spec = GridSpec::new(3, 16, 4.0).unwrap();
        let f = ScalarField::constant(spec, meta(), 1.0);
        assert!(heat_convolve(&f, 0.1, 0.0).is_err());
        let g = heat_convolve(&f, 0.1, 0.5).unwrap();
        assert!(g.data.iter().all(|v| (v - 1.0).abs() < 1e-14));
        let d = heat_convolve_grad(&f, 0.1, 0.5, 1).unwrap();
        assert!(d.data.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn riesz_symbol_is_odd() {
        let spec = GridSpec::new(3, 32, 8.0).unwrap();
        let f = ScalarField::from_fn(spec, meta(), |x| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            (-(r2 - 2.0 * x[0]) / 2.0).exp()
        });
        let out = riesz_convolve(&f, 0).unwrap();
        let mirrored: Vec<f64> = (0..spec.len()).map(|k| f.data[spec.reflect_index(k, 0)]).collect();
        let out_m = riesz_convolve(&f.with_data(mirrored), 0).unwrap();
        for k in 0..spec.len() {
            assert!((out.data[k] + out_m.data[spec.reflect_index(k, 0)]).abs() < 1e-12);
        }
    }
}

#[cfg(test)]
mod riesz_paths {
    use super::*;
    use crate::fields::{FieldMeta, Frame};

    #[test]
    fn fast_and_direct_agree_on_laplacian_of_gaussian() {
        let spec = GridSpec::new(3, 32, 8.0).unwrap();
        let meta = FieldMeta::new(Frame::OriginalX, 0.0, 0.1, 0.0);
        // Δ exp(−r²/2) = (r² − 3) exp(−r²/2); its Riesz transform is ∂_0 exp(−r²/2).
        let src = ScalarField::from_fn(spec, meta, |x| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            (r2 - 3.0) * (-r2 / 2.0).exp()
        });
        let fast = riesz_convolve(&src, 0).unwrap();
        assert!(fast.warnings.is_empty());
        let targets: Vec<usize> = [[16, 16, 16], [17, 16, 16], [18, 15, 16], [14, 17, 18], [20, 16, 13]]
            .iter()
            .map(|i| spec.flat_index(i))
            .collect();
        let direct = riesz_convolve_direct(&src, 0, &targets).unwrap();
        let exact = |flat: usize| {
            let x: Vec<f64> = {
                let mut v = vec![0.0; 3];
                let mut c = flat;
                for a in (0..3).rev() {
                    v[a] = spec.coord(c % 32);
                    c /= 32;
                }
                v
            };
            let r2: f64 = x.iter().map(|v| v * v).sum();
            -x[0] * (-r2 / 2.0).exp()
        };
        let scale = (-0.5f64).exp();
        for (k, &t) in targets.iter().enumerate() {
            assert!((fast.data[t] - exact(t)).abs() < 1e-6 * scale, "fast {} vs {}", fast.data[t], exact(t));
            assert!((direct[k] - exact(t)).abs() < 2e-2 * scale, "direct {} vs {}", direct[k], exact(t));
        }
    }
}
