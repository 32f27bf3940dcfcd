//! One-dimensional maximisation: dense bracketing scan then golden-section refinement.

use crate::scalar::{from_usize, lit, Real};

/// Location and value of a maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum<T> {
    pub argmax: T,
    pub value: T,
}

/// Maximises `f` over `[a, b]` with a `scan_points` bracketing scan followed by
/// golden-section search in the bracket around the best sample.
pub fn maximize<T: Real>(f: impl Fn(T) -> T, a: T, b: T, scan_points: usize) -> Maximum<T> {
    let m = scan_points.max(3);
    let h = (b - a) / from_usize::<T>(m - 1);
    let mut best = 0;
    let mut best_val = f(a);
    for i in 1..m {
        let v = f(a + h * from_usize::<T>(i));
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    let lo = if best == 0 { a } else { a + h * from_usize::<T>(best - 1) };
    let hi = if best == m - 1 { b } else { a + h * from_usize::<T>(best + 1) };
    let refined = golden_section_max(&f, lo, hi);
    // The endpoints are candidates too: monotone functions peak there.
    let mut out = refined;
    for x in [a, b, a + h * from_usize::<T>(best)] {
        let v = f(x);
        if v > out.value {
            out = Maximum { argmax: x, value: v };
        }
    }
    out
}

/// Golden-section search for the maximum of a unimodal function on `[lo, hi]`.
pub fn golden_section_max<T: Real>(f: impl Fn(T) -> T, mut lo: T, mut hi: T) -> Maximum<T> {
    let inv_phi = (lit::<T>(5.0).sqrt() - T::one()) / lit(2.0);
    let tol = T::epsilon().sqrt() * (T::one() + lo.abs().max(hi.abs()));
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iter = 0;
    while (hi - lo).abs() > tol && iter < 200 {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
        iter += 1;
    }
    let x = (lo + hi) / lit(2.0);
    Maximum { argmax: x, value: f(x) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parabola_peak() {
        let m = maximize(|x: f64| -(x - 0.3) * (x - 0.3) + 2.0, 0.0, 1.0, 64);
        assert!((m.argmax - 0.3).abs() < 1e-7);
        assert!((m.value - 2.0).abs() < 1e-14);
    }

    #[test]
    fn monotone_function_peaks_at_endpoint() {
        let m = maximize(|x: f64| -x, 0.0, 1.0, 16);
        assert_eq!(m.argmax, 0.0);
        let m = maximize(|x: f64| x * x, 0.0, 2.0, 16);
        assert_eq!(m.argmax, 2.0);
    }
}
