//! Axis-by-axis monotone cubic resampling of tensor-product grid data.

use crate::scalar::{lit, Real};

/// Behaviour for targets beyond the sampled period.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outside {
    /// Wrap around (the samples are one period of a periodic function).
    Periodic,
    /// Return the sample at index 0 (the seam, read as the far-field level).
    SeamValue,
}

/// Uniform sample locations `x0 + k·dx`, `k = 0..len`.
#[derive(Debug, Clone, Copy)]
pub struct UniformAxis<T> {
    pub x0: T,
    pub dx: T,
    pub len: usize,
}

/// Cubic Hermite interpolant on one periodic line, with fourth-order centred
/// slopes limited by Hyman's monotonicity filter where the data are monotone.
pub fn interpolate_line<T: Real>(line: &[T], axis: &UniformAxis<T>, outside: Outside, targets: &[T], out: &mut [T]) {
    let n = line.len();
    let at = |k: isize| line[k.rem_euclid(n as isize) as usize];
    let slopes: Vec<T> = (0..n as isize)
        .map(|k| {
            let d = (at(k - 2) - at(k + 2) + lit::<T>(8.0) * (at(k + 1) - at(k - 1))) / (lit::<T>(12.0) * axis.dx);
            let left = (at(k) - at(k - 1)) / axis.dx;
            let right = (at(k + 1) - at(k)) / axis.dx;
            if left * right > T::zero() {
                let cap = lit::<T>(3.0) * left.abs().min(right.abs());
                if d * left <= T::zero() {
                    T::zero()
                } else {
                    d.signum() * d.abs().min(cap)
                }
            } else if left * right == T::zero() {
                T::zero()
            } else {
                d
            }
        })
        .collect();
    let period = axis.dx * T::from_usize(n).unwrap();
    for (o, &x) in out.iter_mut().zip(targets) {
        let mut u = (x - axis.x0) / axis.dx;
        if u < T::zero() || u >= T::from_usize(n).unwrap() {
            match outside {
                Outside::SeamValue => {
                    *o = line[0];
                    continue;
                }
                Outside::Periodic => {
                    let r = (x - axis.x0) % period;
                    u = (if r < T::zero() { r + period } else { r }) / axis.dx;
                }
            }
        }
        let k = u.floor().to_usize().unwrap_or(0).min(n - 1);
        let tau = u - T::from_usize(k).unwrap();
        let k1 = (k + 1) % n;
        let (y0, y1) = (line[k], line[k1]);
        let (m0, m1) = (slopes[k] * axis.dx, slopes[k1] * axis.dx);
        let t2 = tau * tau;
        let t3 = t2 * tau;
        let two = lit::<T>(2.0);
        let three = lit::<T>(3.0);
        let h00 = two * t3 - three * t2 + T::one();
        let h10 = t3 - two * t2 + tau;
        let h01 = three * t2 - two * t3;
        let h11 = t3 - t2;
        *o = h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1;
    }
}

/// Resamples row-major `data` of shape `dims` along `axis` at `targets`.
/// Returns the new data; the new shape is `dims` with `dims[axis] = targets.len()`.
pub fn resample_axis<T: Real>(
    data: &[T],
    dims: &[usize],
    axis: usize,
    src: &UniformAxis<T>,
    outside: Outside,
    targets: &[T],
) -> Vec<T> {
    let p = dims[axis];
    let inner: usize = dims[axis + 1..].iter().product();
    let outer: usize = dims[..axis].iter().product();
    let q = targets.len();
    let mut out = vec![T::zero(); outer * q * inner];
    let mut line = vec![T::zero(); p];
    let mut res = vec![T::zero(); q];
    for o in 0..outer {
        for i in 0..inner {
            for k in 0..p {
                line[k] = data[(o * p + k) * inner + i];
            }
            interpolate_line(&line, src, outside, targets, &mut res);
            for k in 0..q {
                out[(o * q + k) * inner + i] = res[k];
            }
        }
    }
    out
}

/// Resamples a cubic tensor grid along every axis with the same target set.
pub fn resample_tensor<T: Real>(data: &[T], n: usize, src: &UniformAxis<T>, outside: Outside, targets: &[T]) -> Vec<T> {
    let mut dims = vec![src.len; n];
    let mut cur = data.to_vec();
    for axis in 0..n {
        cur = resample_axis(&cur, &dims, axis, src, outside, targets);
        dims[axis] = targets.len();
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis(n: usize) -> UniformAxis<f64> {
        let dx = 2.0 * std::f64::consts::PI / n as f64;
        UniformAxis { x0: -std::f64::consts::PI, dx, len: n }
    }

    #[test]
    fn reproduces_nodes() {
        let ax = axis(32);
        let line: Vec<f64> = (0..32).map(|k| (ax.x0 + ax.dx * k as f64).sin()).collect();
        let targets: Vec<f64> = (0..32).map(|k| ax.x0 + ax.dx * k as f64).collect();
        let mut out = vec![0.0; 32];
        interpolate_line(&line, &ax, Outside::Periodic, &targets, &mut out);
        for (a, b) in out.iter().zip(&line) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn converges_at_least_third_order() {
        let err = |n: usize| {
            let ax = axis(n);
            let line: Vec<f64> = (0..n).map(|k| (ax.x0 + ax.dx * k as f64).sin()).collect();
            let targets: Vec<f64> = (0..97).map(|k| -3.0 + 6.0 * k as f64 / 96.0 + 0.0123).collect();
            let mut out = vec![0.0; targets.len()];
            interpolate_line(&line, &ax, Outside::Periodic, &targets, &mut out);
            out.iter().zip(&targets).map(|(o, x)| (o - x.sin()).abs()).fold(0.0, f64::max)
        };
        let order = (err(32) / err(64)).log2();
        assert!(order >= 3.0, "order {order}");
    }

    #[test]
    fn monotone_data_stays_monotone() {
        let ax = UniformAxis { x0: -1.0, dx: 2.0 / 16.0, len: 16 };
        let line: Vec<f64> = (0..16).map(|k| if k < 8 { 0.0 } else { 1.0 }).collect();
        let targets: Vec<f64> = (0..200).map(|k| -0.95 + 1.8 * k as f64 / 199.0).collect();
        let mut out = vec![0.0; 200];
        interpolate_line(&line, &ax, Outside::Periodic, &targets, &mut out);
        assert!(out.windows(2).all(|w| w[1] >= w[0] - 1e-15));
        assert!(out.iter().all(|&v| (-1e-15..=1.0 + 1e-15).contains(&v)));
    }
}
