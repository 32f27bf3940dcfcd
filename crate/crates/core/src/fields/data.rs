//! Initial data generators.

use super::{FieldMeta, Frame, GridSpec, VectorField};
use crate::error::Result;
use crate::geometry::ConeChart;
use crate::scalar::{lit, Real};
use crate::spectral::taper_weight;

/// Standard deviations of the data Gaussian covered by the original-frame grid.
pub const DATA_HALF_WIDTH_SIGMAS: f64 = 8.0;

/// The Gaussian data in both frames.
#[derive(Debug, Clone)]
pub struct GaussianData<T> {
    /// `h_i(x) = ρ⁻¹ exp(−ρ³|x|²)` on `[−8σ, 8σ)^n`.
    pub h: VectorField<T>,
    /// `h^ρ_i = ρ·h_i(x(y))` on the cylinder grid, tapered to zero at the seam.
    pub h_rho: VectorField<T>,
    /// Standard deviation `σ = (2ρ³)^{-1/2}` of `h`.
    pub sigma: T,
    /// Share of the mass of `h` lying outside the sampled original-frame box.
    pub outside_mass: T,
    /// Relative L¹ change of `h^ρ` caused by the seam taper.
    pub taper_mass: T,
}

/// Builds the radial Gaussian data for `chart` with every component equal.
pub fn make_gaussian_data<T: Real>(chart: &ConeChart<T>, points: usize) -> Result<GaussianData<T>> {
    let n = chart.n();
    let rho = chart.rho();
    let a_inv = rho.powi(3);
    let sigma = (lit::<T>(2.0) * a_inv).sqrt().recip();
    let half = lit::<T>(DATA_HALF_WIDTH_SIGMAS) * sigma;
    let xspec = GridSpec::new(n, points, half)?;
    let zspec = GridSpec::cylinder(n, points)?;
    let nu = T::zero();

    let h = VectorField::from_fn(xspec, FieldMeta::new(Frame::OriginalX, T::zero(), rho, nu), n, |x, _| {
        let r2 = x.iter().fold(T::zero(), |acc, &v| acc + v * v);
        (-a_inv * r2).exp() / rho
    });

    let exact = |z: &[T]| {
        let r2 = z.iter().fold(T::zero(), |acc, &v| acc + v.tan() * v.tan());
        (-a_inv * r2).exp()
    };
    let window = |z: &[T]| z.iter().fold(T::one(), |acc, &v| acc * taper_weight(v, T::FRAC_PI_2()));
    let h_rho = VectorField::from_fn(zspec, FieldMeta::new(Frame::ConeY, T::zero(), rho, nu), n, |z, _| {
        exact(z) * window(z)
    });

    let (mut full, mut cut) = (T::zero(), T::zero());
    for (flat, e) in zspec.sample(exact).into_iter().enumerate() {
        full = full + e;
        cut = cut + (e - h_rho.comps[0][flat]).abs();
    }
    let taper_mass = if full > T::zero() { cut / full } else { T::zero() };

    // Per axis the Gaussian mass beyond |x| = 8σ is erfc(8/√2); the box misses 1 − (1 − that)^n.
    let tail_1d = lit::<T>(libm::erfc(DATA_HALF_WIDTH_SIGMAS / std::f64::consts::SQRT_2));
    let outside_mass = T::one() - (T::one() - tail_1d).powi(n as i32);

    Ok(GaussianData { h, h_rho, sigma, outside_mass, taper_mass })
}

/// Spatially constant data `W ≡ value` on the cylinder grid.
pub fn make_constant_data<T: Real>(chart: &ConeChart<T>, points: usize, value: T) -> Result<VectorField<T>> {
    let zspec = GridSpec::cylinder(chart.n(), points)?;
    let meta = FieldMeta::new(Frame::ConeY, T::zero(), chart.rho(), T::zero());
    Ok(VectorField::from_fn(zspec, meta, chart.n(), |_, _| value))
}
