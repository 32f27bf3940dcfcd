//! Frame changes `w ↔ v` and derivative identities between the frames.

use super::{FieldMeta, FieldWarning, Frame, GridSpec, ScalarField, VectorField};
use crate::error::{domain, Result};
use crate::geometry::ConeChart;
use crate::interp::{resample_tensor, Outside, UniformAxis};
use crate::scalar::{lit, Real};
use rustfft::num_complex::Complex;

use crate::spectral::Spectral;

fn axis_of<T: Real>(spec: &GridSpec<T>) -> UniformAxis<T> {
    UniformAxis { x0: -spec.half_extent, dx: spec.spacing(), len: spec.points }
}

/// `v(t, x) = w(s, y(t, x))/(ρ − t)` sampled on `xspec`, from a cone-frame field
/// stored on the cylinder grid.
pub fn push_velocity<T: Real>(w: &VectorField<T>, chart: &ConeChart<T>, xspec: &GridSpec<T>) -> Result<VectorField<T>> {
    if w.meta.frame != Frame::ConeY {
        return domain("push_velocity expects a cone-frame field");
    }
    let s = w.meta.time;
    let t = chart.t_of_s(s)?;
    let lambda = chart.lambda_of_s(s)?;
    let targets: Vec<T> = xspec.coords().iter().map(|x| x.atan()).collect();
    let src = axis_of(&w.spec);
    let comps = w
        .comps
        .iter()
        .map(|c| resample_tensor(c, w.spec.n, &src, Outside::Periodic, &targets).into_iter().map(|v| v / lambda).collect())
        .collect();
    let mut out = VectorField::new(*xspec, FieldMeta::new(Frame::OriginalX, t, w.meta.rho, w.meta.nu), comps)?;
    out.warnings = w.warnings.clone();
    Ok(out)
}

/// Inverse of [`push_velocity`]: `w(s, z) = (ρ − t)·v(t, tan z)` on `zspec`.
/// Points whose preimage leaves the sampled box take the seam value of `v`.
pub fn pull_velocity<T: Real>(v: &VectorField<T>, chart: &ConeChart<T>, zspec: &GridSpec<T>) -> Result<VectorField<T>> {
    if v.meta.frame != Frame::OriginalX {
        return domain("pull_velocity expects an original-frame field");
    }
    let t = v.meta.time;
    let s = chart.s_of_t(t)?;
    let lambda = chart.lambda_of_s(s)?;
    let targets: Vec<T> = zspec
        .coords()
        .iter()
        .map(|z| if z.abs() >= T::FRAC_PI_2() { -T::infinity() } else { z.tan() })
        .collect();
    let src = axis_of(&v.spec);
    let comps = v
        .comps
        .iter()
        .map(|c| resample_tensor(c, v.spec.n, &src, Outside::SeamValue, &targets).into_iter().map(|x| x * lambda).collect())
        .collect();
    let mut out = VectorField::new(*zspec, FieldMeta::new(Frame::ConeY, s, v.meta.rho, v.meta.nu), comps)?;
    out.warnings = v.warnings.clone();
    Ok(out)
}

/// `Δv_i` evaluated through `w` on the cylinder nodes:
/// `Σ_j [cos⁴z_j ∂²_{z_j}W_i − 2 cos³z_j sin z_j ∂_{z_j}W_i] / (ρ − t)`.
/// The result is tagged [`Frame::CylinderZ`] with time `t`.
pub fn laplacian_via_cone<T: Real>(w: &VectorField<T>, chart: &ConeChart<T>) -> Result<VectorField<T>> {
    if w.meta.frame != Frame::ConeY {
        return domain("laplacian_via_cone expects a cone-frame field");
    }
    let spec = w.spec;
    let s = w.meta.time;
    let t = chart.t_of_s(s)?;
    let lambda = chart.lambda_of_s(s)?;
    let sp = Spectral::new(&spec);
    let coords = spec.coords();
    let c4: Vec<T> = coords.iter().map(|z| z.cos().powi(4)).collect();
    let c3s: Vec<T> = coords.iter().map(|z| lit::<T>(2.0) * z.cos().powi(3) * z.sin()).collect();
    let mut out = VectorField::zeros(spec, FieldMeta::new(Frame::CylinderZ, t, w.meta.rho, w.meta.nu), w.ncomp());
    for (i, c) in w.comps.iter().enumerate() {
        let hat = sp.forward(c);
        let acc = &mut out.comps[i];
        for j in 0..spec.n {
            let mut g1 = vec![0; spec.n];
            g1[j] = 1;
            let mut g2 = vec![0; spec.n];
            g2[j] = 2;
            let mut h1 = hat.clone();
            sp.apply_derivative(&mut h1, &g1);
            let d1 = sp.inverse_real(h1);
            let mut h2 = hat.clone();
            sp.apply_derivative(&mut h2, &g2);
            let d2 = sp.inverse_real(h2);
            spec.for_each_index(|flat, idx| {
                let k = idx[j];
                acc[flat] = acc[flat] + (c4[k] * d2[flat] - c3s[k] * d1[flat]) / lambda;
            });
        }
        if super::sobolev_cm_norm(&w.component(i), 2).warnings.contains(&FieldWarning::UnderResolved) {
            out.warn(FieldWarning::UnderResolved);
        }
    }
    Ok(out)
}

/// Spectral Laplacian in the field's physical frame. Nyquist axes are dropped
/// so that the result equals the divergence of the spectral gradient.
pub fn laplacian<T: Real>(f: &ScalarField<T>) -> ScalarField<T> {
    let sp = Spectral::new(&f.spec);
    let scale2 = f.meta.scale() * f.meta.scale();
    let data = sp.filter(&f.data, |xi, nyq| {
        let k2 = xi.iter().zip(nyq).filter(|(_, &q)| !q).fold(T::zero(), |acc, (&x, _)| acc + x * x);
        Complex::new(-k2 / scale2, T::zero())
    });
    f.with_data(data)
}

/// Spectral divergence `Σ_i ∂_i v_i` in the field's physical frame.
pub fn divergence<T: Real>(v: &VectorField<T>) -> ScalarField<T> {
    let sp = Spectral::new(&v.spec);
    let scale = v.meta.scale();
    let mut acc = vec![T::zero(); v.spec.len()];
    for (i, c) in v.comps.iter().enumerate().take(v.spec.n) {
        let mut gamma = vec![0; v.spec.n];
        gamma[i] = 1;
        for (a, d) in acc.iter_mut().zip(sp.derivative(c, &gamma)) {
            *a = *a + d / scale;
        }
    }
    ScalarField { spec: v.spec, meta: v.meta, data: acc, warnings: v.warnings.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smooth_w(chart: &ConeChart<f64>, points: usize, s: f64) -> VectorField<f64> {
        let spec = GridSpec::cylinder(3, points).unwrap();
        let meta = FieldMeta::new(Frame::ConeY, s, chart.rho(), 0.0);
        VectorField::from_fn(spec, meta, 3, |z, i| {
            let r2: f64 = z.iter().map(|v| v.tan() * v.tan()).sum();
            (1.0 + 0.3 * i as f64) * (-0.5 * r2).exp() * (1.0 + 0.2 * z[0].sin())
        })
    }

    #[test]
    fn constant_slice_pushes_to_one() {
        let chart = ConeChart::new(3, 0.1).unwrap();
        let s = 0.7;
        let lam = chart.lambda_of_s(s).unwrap();
        let spec = GridSpec::cylinder(3, 16).unwrap();
        let w = VectorField::from_fn(spec, FieldMeta::new(Frame::ConeY, s, 0.1, 0.0), 3, |_, _| lam);
        let xspec = GridSpec::new(3, 16, 4.0).unwrap();
        let v = push_velocity(&w, &chart, &xspec).unwrap();
        assert!(v.comps.iter().flatten().all(|x: &f64| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn divergence_of_gradient_is_laplacian() {
        let spec = GridSpec::<f64>::new(3, 32, 6.0).unwrap();
        let meta = FieldMeta::new(Frame::OriginalX, 0.0, 0.1, 0.0);
        let phi = ScalarField::from_fn(spec, meta, |x| (-x.iter().map(|v| v * v).sum::<f64>()).exp());
        let sp = Spectral::new(&spec);
        let grad: Vec<ScalarField<f64>> = (0..3)
            .map(|i| {
                let mut g = vec![0; 3];
                g[i] = 1;
                phi.with_data(sp.derivative(&phi.data, &g))
            })
            .collect();
        let v = VectorField::from_components(grad).unwrap();
        let div = divergence(&v);
        let lap = laplacian(&phi);
        for (a, b) in div.data.iter().zip(&lap.data) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn cone_laplacian_matches_direct() {
        let chart = ConeChart::new(3, 0.1).unwrap();
        let w = smooth_w(&chart, 64, 0.5);
        let lap = laplacian_via_cone(&w, &chart).unwrap();
        let xspec = GridSpec::new(3, 64, 10.0).unwrap();
        let v = push_velocity(&w, &chart, &xspec).unwrap();
        let direct = laplacian(&v.component(0));
        // Compare at x-nodes that coincide closely with z-nodes near the centre.
        let scale = direct.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let xo = xspec.origin_index();
        let zo = w.spec.origin_index();
        assert!((direct.data[xo] - lap.comps[0][zo]).abs() <= 1e-3 * scale);
    }
}
