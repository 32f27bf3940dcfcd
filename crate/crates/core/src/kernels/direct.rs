//! Direct (real-space) Riesz convolution, the reference for the spectral path.

use super::RieszKernel;
use crate::error::{domain, Result};
use crate::fields::ScalarField;
use crate::scalar::{lit, to_f64, Real};
use crate::spectral::Spectral;

/// Upper incomplete gamma `Γ(a, x)` for `a` a multiple of ½ (`x > 0` when `a ≤ 0`).
fn upper_gamma_half(a: f64, x: f64) -> f64 {
    let twice = (2.0 * a).round() as i64;
    let (mut g, mut cur) = if twice.rem_euclid(2) == 1 {
        (std::f64::consts::PI.sqrt() * libm::erfc(x.sqrt()), 0.5)
    } else {
        ((-x).exp(), 1.0)
    };
    while cur < a - 0.25 {
        g = cur * g + x.powf(cur) * (-x).exp();
        cur += 1.0;
    }
    while cur > a + 0.25 {
        cur -= 1.0;
        g = (g - x.powf(cur) * (-x).exp()) / cur;
    }
    g
}

/// Analytic continuation of the lattice sum `Σ_{k∈ℤⁿ∖0} |k|^{−s}` (Epstein zeta
/// of the cubic lattice), for `s` and `n − s` positive multiples of ½.
pub fn lattice_zeta(n: usize, s: f64) -> f64 {
    let nf = n as f64;
    let reach: i64 = 6;
    let width = (2 * reach + 1) as usize;
    let mut sum = 0.0;
    for code in 0..width.pow(n as u32) {
        let mut c = code;
        let mut k2 = 0i64;
        for _ in 0..n {
            let k = (c % width) as i64 - reach;
            c /= width;
            k2 += k * k;
        }
        if k2 == 0 {
            continue;
        }
        let x = std::f64::consts::PI * k2 as f64;
        sum += upper_gamma_half(s / 2.0, x) * x.powf(-s / 2.0) + upper_gamma_half((nf - s) / 2.0, x) * x.powf(-(nf - s) / 2.0);
    }
    std::f64::consts::PI.powf(s / 2.0) / libm::tgamma(s / 2.0) * (sum - 2.0 / (nf - s) - 2.0 / s)
}

/// `(K_{n,axis} ∗ f)(x)` at the listed flat indices by punctured lattice
/// quadrature over the whole grid. The self-cell term is restored to second
/// order by the lattice-zeta correction `c ∂_axis f(x) h² Z_n(n−2)/n`.
pub fn riesz_convolve_direct<T: Real>(source: &ScalarField<T>, axis: usize, targets: &[usize]) -> Result<Vec<T>> {
    let spec = source.spec;
    if axis >= spec.n {
        return domain(format!("axis {axis} out of range"));
    }
    let n = spec.n;
    let scale = to_f64(source.meta.scale());
    let h = to_f64(spec.spacing()) * scale;
    let cell = h.powi(n as i32);
    let kernel = RieszKernel::new(n);
    let data: Vec<f64> = source.data.iter().map(|&v| to_f64(v)).collect();

    let sp = Spectral::new(&spec);
    let mut gamma = vec![0; n];
    gamma[axis] = 1;
    let grad = sp.derivative(&source.data, &gamma);
    let zeta = lattice_zeta(n, n as f64 - 2.0);

    let mut out = Vec::with_capacity(targets.len());
    let mut tidx = vec![0i64; n];
    let mut d = vec![0.0f64; n];
    for &t in targets {
        let mut c = t;
        for a in (0..n).rev() {
            tidx[a] = (c % spec.points) as i64;
            c /= spec.points;
        }
        let mut acc = 0.0;
        spec.for_each_index(|flat, idx| {
            if flat == t {
                return;
            }
            for a in 0..n {
                d[a] = (tidx[a] - idx[a] as i64) as f64 * h;
            }
            acc += kernel.value(&d, axis) * data[flat];
        });
        let grad_phys = to_f64(grad[t]) / scale;
        let correction = kernel.c * grad_phys * h * h * zeta / n as f64;
        out.push(lit::<T>(acc * cell + correction));
    }
    Ok(out)
}
