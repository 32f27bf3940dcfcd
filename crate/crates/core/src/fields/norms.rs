//! Discrete `H^m` and `C^m` norms in the physical frame of a field.

use serde::Serialize;

use super::{FieldWarning, ScalarField, VectorField};
use crate::scalar::{from_usize, Real};
use crate::spectral::{derivative_symbol, xi_sq, Spectral};

/// Share of the `H^m` energy allowed in the outer third of the spectrum before
/// the field is flagged as under-resolved.
const RESOLUTION_TOLERANCE: f64 = 1e-4;

/// `H^m` and `C^m` norms of one field. The combined `H^m ∩ C^m` norm is their maximum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormReport<T> {
    pub sobolev: T,
    pub sup_cm: T,
    pub m: usize,
    pub warnings: Vec<FieldWarning>,
}

impl<T: Real> NormReport<T> {
    pub fn combined(&self) -> T {
        self.sobolev.max(self.sup_cm)
    }

    fn zero(m: usize) -> Self {
        Self { sobolev: T::zero(), sup_cm: T::zero(), m, warnings: Vec::new() }
    }

    /// Componentwise maximum of two reports of the same order.
    pub fn max(mut self, other: &Self) -> Self {
        self.sobolev = self.sobolev.max(other.sobolev);
        self.sup_cm = self.sup_cm.max(other.sup_cm);
        for w in &other.warnings {
            if !self.warnings.contains(w) {
                self.warnings.push(*w);
            }
        }
        self
    }
}

/// All multi-indices of length `n` with total order at most `m`.
pub(crate) fn multi_indices(n: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![0; n]];
    for _ in 0..m {
        let mut next = Vec::new();
        for g in &out {
            for a in 0..n {
                let mut h = g.clone();
                h[a] += 1;
                if !out.contains(&h) && !next.contains(&h) {
                    next.push(h);
                }
            }
        }
        out.extend(next);
    }
    out
}

/// `H^m` via the multiplier `(1+|ξ|²)^m` and Parseval, `C^m` as the largest grid
/// maximum of any spectral derivative of order `≤ m`. Derivatives and volume
/// elements use the physical scale of the field's frame.
pub fn sobolev_cm_norm<T: Real>(field: &ScalarField<T>, m: usize) -> NormReport<T> {
    let spec = field.spec;
    let scale = field.meta.scale();
    let sp = Spectral::new(&spec);
    let hat = sp.forward(&field.data);
    let total = from_usize::<T>(sp.len());
    let cell = (spec.spacing() * scale).powi(spec.n as i32);
    let cutoff = spec.points / 3;

    let mut energy = T::zero();
    let mut outer = T::zero();
    let mut xi = vec![T::zero(); spec.n];
    sp.for_each_mode(|flat, idx| {
        for a in 0..idx.len() {
            xi[a] = sp.xi(idx[a]) / scale;
        }
        let weight = (T::one() + xi_sq(&xi)).powi(m as i32);
        let e = weight * hat[flat].norm_sqr();
        energy = energy + e;
        let signed_far = idx.iter().any(|&k| k.min(spec.points - k) > cutoff);
        if signed_far {
            outer = outer + e;
        }
    });
    let mut report = NormReport::zero(m);
    report.sobolev = (energy * cell / total).sqrt();
    if energy > T::zero() && outer / energy > T::from_f64(RESOLUTION_TOLERANCE).unwrap() {
        report.warnings.push(FieldWarning::UnderResolved);
    }

    for gamma in multi_indices(spec.n, m) {
        let order: usize = gamma.iter().sum();
        let values = if order == 0 {
            field.data.clone()
        } else {
            let mut h = hat.clone();
            sp.apply(&mut h, |xi, nyq| derivative_symbol(xi, nyq, &gamma));
            sp.inverse_real(h)
        };
        let factor = scale.powi(-(order as i32));
        let sup = values.iter().fold(T::zero(), |acc, &v| acc.max(v.abs())) * factor;
        report.sup_cm = report.sup_cm.max(sup);
    }
    report
}

/// Vector norm: the maximum over components.
pub fn sobolev_cm_norm_vector<T: Real>(field: &VectorField<T>, m: usize) -> NormReport<T> {
    (0..field.ncomp()).fold(NormReport::zero(m), |acc, i| acc.max(&sobolev_cm_norm(&field.component(i), m)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{FieldMeta, Frame, GridSpec};

    #[test]
    fn multi_index_count() {
        assert_eq!(multi_indices(3, 0).len(), 1);
        assert_eq!(multi_indices(3, 1).len(), 4);
        assert_eq!(multi_indices(3, 2).len(), 10);
    }

    #[test]
    fn gaussian_l2_norm() {
        let spec = GridSpec::<f64>::new(3, 32, 6.0).unwrap();
        let meta = FieldMeta::new(Frame::OriginalX, 0.0, 0.1, 0.0);
        let f = ScalarField::from_fn(spec, meta, |x| (-x.iter().map(|v| v * v).sum::<f64>() / 2.0).exp());
        let r = sobolev_cm_norm(&f, 0);
        let exact = std::f64::consts::PI.powf(0.75);
        assert!((r.sobolev / exact - 1.0).abs() < 1e-4);
        assert!((r.sup_cm - 1.0).abs() < 1e-12);
        let r1 = sobolev_cm_norm(&f, 1);
        assert!(r1.sobolev >= r.sobolev);
        assert!(r1.warnings.is_empty());
    }
}
