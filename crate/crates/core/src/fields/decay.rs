//! Finite-grid proxy for membership in the polynomial decay classes.

use serde::Serialize;

use super::norms::multi_indices;
use super::{Frame, ScalarField};
use crate::error::{domain, Result};
use crate::scalar::Real;
use crate::spectral::{Spectral, TAPER_FRACTION};

/// Outer radii of the nested windows as fractions of the largest usable radius.
pub const DECAY_WINDOWS: [f64; 4] = [0.55, 0.7, 0.85, 1.0];
/// A window constant may grow by less than this factor from one window to the next.
pub const DECAY_RATIO_THRESHOLD: f64 = 1.1;
/// Samples below this fraction of a derivative's grid maximum are round-off and ignored.
const NOISE_FLOOR: f64 = 1e-12;

/// Outcome of a decay-class check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub l: f64,
    pub m: usize,
    /// Outer radius of each window `[1, R_k]`.
    pub radii: Vec<f64>,
    /// Per multi-index `γ`, the constant `max |D^γ f|(1+|x|^l)` over each window.
    pub window_constants: Vec<(Vec<usize>, Vec<f64>)>,
    /// Largest successive-window ratio seen.
    pub max_ratio: f64,
    pub pass: bool,
}

/// Checks `|D^γ f(x)| ≤ c/(1+|x|^l)` for `|x| ≥ 1` and `|γ| ≤ m` by fitting `c`
/// over nested windows and requiring it to stop growing.
pub fn decay_class_check<T: Real>(field: &ScalarField<T>, l: f64, m: usize) -> Result<DecayReport> {
    decay_class_check_with_floor(field, l, m, 0.0)
}

/// As [`decay_class_check`], for a field that is the difference of fields of
/// size `reference`: samples of `D^γ f` below the round-off those carry,
/// `NOISE_FLOOR·reference·(π/dx)^{|γ|}`, are ignored as well.
pub fn decay_class_check_with_floor<T: Real>(field: &ScalarField<T>, l: f64, m: usize, reference: f64) -> Result<DecayReport> {
    if field.meta.frame != Frame::OriginalX {
        return domain("decay classes are checked in the original frame");
    }
    let spec = field.spec;
    let h = field.spec.half_extent.to_f64().unwrap_or(0.0);
    let r_max = h * (1.0 - 2.0 * TAPER_FRACTION);
    if h <= 1.0 || DECAY_WINDOWS[0] * r_max <= 1.0 {
        return domain(format!("grid half-extent {h} too small for windows beyond |x| = 1"));
    }
    let radii: Vec<f64> = DECAY_WINDOWS.iter().map(|f| f * r_max).collect();
    let coords: Vec<f64> = spec.coords().iter().map(|c| c.to_f64().unwrap()).collect();
    let mut radius = vec![0.0; spec.len()];
    spec.for_each_index(|flat, idx| {
        radius[flat] = idx.iter().map(|&k| coords[k] * coords[k]).sum::<f64>().sqrt();
    });

    let k_max = std::f64::consts::PI / spec.spacing().to_f64().unwrap_or(1.0);
    let sp = Spectral::new(&spec);
    let hat = if m > 0 { Some(sp.forward(&field.data)) } else { None };
    let mut window_constants = Vec::new();
    let mut max_ratio: f64 = 0.0;
    let mut pass = true;
    for gamma in multi_indices(spec.n, m) {
        let order: usize = gamma.iter().sum();
        let values: Vec<f64> = if order == 0 {
            field.data.iter().map(|v| v.to_f64().unwrap()).collect()
        } else {
            let mut hh = hat.clone().unwrap_or_default();
            sp.apply_derivative(&mut hh, &gamma);
            sp.inverse_real(hh).iter().map(|v| v.to_f64().unwrap()).collect()
        };
        let sup = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let floor = NOISE_FLOOR * sup.max(reference * k_max.powi(order as i32));
        let mut consts = vec![0.0f64; radii.len()];
        for (flat, &v) in values.iter().enumerate() {
            let r = radius[flat];
            if r < 1.0 || v.abs() <= floor {
                continue;
            }
            let c = v.abs() * (1.0 + r.powf(l));
            for (k, &rk) in radii.iter().enumerate() {
                if r <= rk {
                    consts[k] = consts[k].max(c);
                }
            }
        }
        for w in consts.windows(2) {
            let ratio = if w[0] > 0.0 {
                w[1] / w[0]
            } else if w[1] > 0.0 {
                f64::INFINITY
            } else {
                1.0
            };
            max_ratio = max_ratio.max(ratio);
            if !(ratio < DECAY_RATIO_THRESHOLD) || !w[1].is_finite() {
                pass = false;
            }
        }
        window_constants.push((gamma, consts));
    }
    Ok(DecayReport { l, m, radii, window_constants, max_ratio, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{FieldMeta, GridSpec};

    fn field(h: f64, f: impl Fn(f64) -> f64) -> ScalarField<f64> {
        let spec = GridSpec::<f64>::new(3, 32, h).unwrap();
        let meta = FieldMeta::new(Frame::OriginalX, 0.0, 0.1, 0.0);
        ScalarField::from_fn(spec, meta, |x| f(x.iter().map(|v| v * v).sum::<f64>()))
    }

    #[test]
    fn algebraic_decay_oracle() {
        let f = field(16.0, |r2| 1.0 / (1.0 + r2));
        assert!(decay_class_check(&f, 2.0, 0).unwrap().pass);
        assert!(!decay_class_check(&f, 3.0, 0).unwrap().pass);
    }

    #[test]
    fn small_grid_rejected() {
        let f = field(1.0, |r2| (-r2).exp());
        assert!(decay_class_check(&f, 2.0, 0).is_err());
    }
}
