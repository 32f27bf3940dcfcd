//! N-dimensional FFT on periodic row-major grids, Fourier multipliers and the
//! C² taper window used by every convolution.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::fields::GridSpec;
use crate::scalar::{from_usize, lit, Real};

/// Width of the taper band at each end of an axis, as a fraction of the full axis length.
pub const TAPER_FRACTION: f64 = 0.125;

/// Per-call FFT workspace for one grid shape.
pub struct Spectral<T: Real> {
    n: usize,
    points: usize,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
    xi: Vec<T>,
}

impl<T: Real> Spectral<T> {
    pub fn new(spec: &GridSpec<T>) -> Self {
        let mut planner = FftPlanner::new();
        let points = spec.points;
        let xi = (0..points)
            .map(|k| {
                let signed = if k <= points / 2 { k as f64 } else { k as f64 - points as f64 };
                lit::<T>(signed) * T::PI() / spec.half_extent
            })
            .collect();
        Self {
            n: spec.n,
            points,
            fwd: planner.plan_fft_forward(points),
            inv: planner.plan_fft_inverse(points),
            xi,
        }
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Wavenumber (grid units) of index `k` along any axis.
    pub fn xi(&self, k: usize) -> T {
        self.xi[k]
    }

    pub fn is_nyquist(&self, k: usize) -> bool {
        k == self.points / 2
    }

    fn transform(&self, buf: &mut [Complex<T>], fft: &Arc<dyn Fft<T>>) {
        let p = self.points;
        let mut line = vec![Complex::new(T::zero(), T::zero()); p];
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); fft.get_inplace_scratch_len()];
        for axis in 0..self.n {
            let stride = p.pow((self.n - 1 - axis) as u32);
            let outer = p.pow(axis as u32);
            for o in 0..outer {
                for inner in 0..stride {
                    let base = o * p * stride + inner;
                    for (k, c) in line.iter_mut().enumerate() {
                        *c = buf[base + k * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (k, c) in line.iter().enumerate() {
                        buf[base + k * stride] = *c;
                    }
                }
            }
        }
    }

    pub fn forward(&self, data: &[T]) -> Vec<Complex<T>> {
        let mut buf: Vec<Complex<T>> = data.iter().map(|&x| Complex::new(x, T::zero())).collect();
        self.transform(&mut buf, &self.fwd);
        buf
    }

    /// Inverse transform, normalised, keeping the real part.
    pub fn inverse_real(&self, mut buf: Vec<Complex<T>>) -> Vec<T> {
        self.transform(&mut buf, &self.inv);
        let norm = T::one() / from_usize::<T>(self.len());
        buf.into_iter().map(|c| c.re * norm).collect()
    }

    /// Visits every mode with its per-axis index vector.
    pub fn for_each_mode(&self, mut f: impl FnMut(usize, &[usize])) {
        let mut idx = vec![0usize; self.n];
        for flat in 0..self.len() {
            f(flat, &idx);
            for a in (0..self.n).rev() {
                idx[a] += 1;
                if idx[a] < self.points {
                    break;
                }
                idx[a] = 0;
            }
        }
    }

    /// Multiplies `hat` by `mult(ξ, nyquist_flags)` in place.
    pub fn apply(&self, hat: &mut [Complex<T>], mut mult: impl FnMut(&[T], &[bool]) -> Complex<T>) {
        let mut xi = vec![T::zero(); self.n];
        let mut nyq = vec![false; self.n];
        self.for_each_mode(|flat, idx| {
            for a in 0..idx.len() {
                xi[a] = self.xi[idx[a]];
                nyq[a] = self.is_nyquist(idx[a]);
            }
            hat[flat] = hat[flat] * mult(&xi, &nyq);
        });
    }

    /// Real-space result of applying a Fourier multiplier to `data`.
    pub fn filter(&self, data: &[T], mult: impl FnMut(&[T], &[bool]) -> Complex<T>) -> Vec<T> {
        let mut hat = self.forward(data);
        self.apply(&mut hat, mult);
        self.inverse_real(hat)
    }

    /// Spectral derivative `D^γ` in grid units, with the Nyquist mode dropped on
    /// axes differentiated an odd number of times.
    pub fn derivative(&self, data: &[T], gamma: &[usize]) -> Vec<T> {
        let mut hat = self.forward(data);
        self.apply_derivative(&mut hat, gamma);
        self.inverse_real(hat)
    }

    pub fn apply_derivative(&self, hat: &mut [Complex<T>], gamma: &[usize]) {
        self.apply(hat, |xi, nyq| derivative_symbol(xi, nyq, gamma));
    }
}

/// Symbol `Π (iξ_a)^{γ_a}` with odd-order Nyquist modes removed.
pub fn derivative_symbol<T: Real>(xi: &[T], nyq: &[bool], gamma: &[usize]) -> Complex<T> {
    let mut m = Complex::new(T::one(), T::zero());
    for a in 0..gamma.len() {
        for _ in 0..gamma[a] {
            if nyq[a] && gamma[a] % 2 == 1 {
                return Complex::new(T::zero(), T::zero());
            }
            m = m * Complex::new(T::zero(), xi[a]);
        }
    }
    m
}

/// Squared wavenumber magnitude.
pub fn xi_sq<T: Real>(xi: &[T]) -> T {
    xi.iter().fold(T::zero(), |acc, &x| acc + x * x)
}

/// One-dimensional taper weight at coordinate `x` on `[-h, h)`: 1 in the interior,
/// quintic smoothstep (C²) to 0 at the periodic seam.
pub fn taper_weight<T: Real>(x: T, h: T) -> T {
    let band = lit::<T>(2.0 * TAPER_FRACTION) * h;
    let d = (h - x.abs()) / band;
    if d >= T::one() {
        T::one()
    } else if d <= T::zero() {
        T::zero()
    } else {
        d * d * d * (lit::<T>(10.0) - d * (lit::<T>(15.0) - lit::<T>(6.0) * d))
    }
}

/// Tensor-product taper window sampled on the grid.
pub fn taper_window<T: Real>(spec: &GridSpec<T>) -> Vec<T> {
    let w1: Vec<T> = (0..spec.points).map(|k| taper_weight(spec.coord(k), spec.half_extent)).collect();
    let mut out = vec![T::one(); spec.len()];
    spec.for_each_index(|flat, idx| {
        out[flat] = idx.iter().fold(T::one(), |acc, &k| acc * w1[k]);
    });
    out
}

/// Mean of `data` over the seam nodes (any index 0), the far-field level the
/// window preserves.
pub fn seam_mean<T: Real>(data: &[T], spec: &GridSpec<T>) -> T {
    let mut acc = T::zero();
    let mut count = 0usize;
    spec.for_each_index(|flat, idx| {
        if idx.iter().any(|&k| k == 0) {
            acc = acc + data[flat];
            count += 1;
        }
    });
    acc / from_usize::<T>(count.max(1))
}

/// How an operator treats the periodic wrap-around.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    /// Plain periodic transform.
    None,
    /// `f_b + T·(f − f_b)` with `f_b` the seam mean and `T` the taper.
    Taper,
}

/// Applies the window; returns the windowed deviation and the seam level.
pub fn windowed<T: Real>(data: &[T], spec: &GridSpec<T>, window: Window) -> (Vec<T>, T) {
    match window {
        Window::None => (data.to_vec(), T::zero()),
        Window::Taper => {
            let fb = seam_mean(data, spec);
            let w = taper_window(spec);
            (data.iter().zip(&w).map(|(&f, &t)| t * (f - fb)).collect(), fb)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_derivative_of_sine() {
        let spec = GridSpec::<f64>::new(3, 16, std::f64::consts::PI).unwrap();
        let sp = Spectral::new(&spec);
        let mut data = vec![0.0; spec.len()];
        spec.for_each_index(|flat, idx| {
            let x = spec.coord(idx[0]);
            let y = spec.coord(idx[1]);
            data[flat] = (2.0 * x).sin() * y.cos();
        });
        let back = sp.inverse_real(sp.forward(&data));
        for (a, b) in back.iter().zip(&data) {
            assert!((a - b).abs() < 1e-13);
        }
        let dx = sp.derivative(&data, &[1, 0, 0]);
        spec.for_each_index(|flat, idx| {
            let x = spec.coord(idx[0]);
            let y = spec.coord(idx[1]);
            assert!((dx[flat] - 2.0 * (2.0 * x).cos() * y.cos()).abs() < 1e-12);
        });
    }

    #[test]
    fn taper_is_c2_and_vanishes_at_seam() {
        let h = 1.0;
        assert_eq!(taper_weight(-h, h), 0.0);
        assert_eq!(taper_weight(0.0, h), 1.0);
        assert_eq!(taper_weight(0.74, h), 1.0);
        let e = 1e-4;
        let x0 = -h + e;
        assert!(taper_weight(x0, h) < 1e-9);
    }

    #[test]
    fn window_preserves_constants() {
        let spec = GridSpec::<f64>::new(3, 16, 1.0).unwrap();
        let data = vec![2.5; spec.len()];
        let (dev, fb) = windowed(&data, &spec, Window::Taper);
        assert!((fb - 2.5).abs() < 1e-15);
        assert!(dev.iter().all(|d| d.abs() < 1e-15));
    }
}
