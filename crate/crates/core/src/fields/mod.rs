//! Grid field containers, discrete norms, decay-class checks, data generators
//! and the `w ↔ v` field transforms.

mod data;
mod decay;
mod norms;
pub mod snapshot;
mod transport;

pub use data::{make_constant_data, make_gaussian_data, GaussianData};
pub use decay::{decay_class_check, decay_class_check_with_floor, DecayReport, DECAY_RATIO_THRESHOLD, DECAY_WINDOWS};
pub use norms::{sobolev_cm_norm, sobolev_cm_norm_vector, NormReport};
pub use transport::{
    divergence, laplacian, laplacian_via_cone, pull_velocity, push_velocity,
};

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::scalar::{from_usize, lit, Real};

/// Coordinate frame of a sampled field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Frame {
    /// Original coordinates `x`; time tag is `t`.
    OriginalX,
    /// Cone coordinates `y`, stored on the cylinder grid `z = y/(ρ−t)`; time tag is `s`.
    ConeY,
    /// Cylinder coordinates `z` without the `(ρ−t)` scaling; time tag is `t`.
    CylinderZ,
}

impl Frame {
    pub fn tag(self) -> u64 {
        match self {
            Frame::OriginalX => 0,
            Frame::ConeY => 1,
            Frame::CylinderZ => 2,
        }
    }

    pub fn from_tag(tag: u64) -> Result<Self> {
        match tag {
            0 => Ok(Frame::OriginalX),
            1 => Ok(Frame::ConeY),
            2 => Ok(Frame::CylinderZ),
            other => Err(Error::Format(format!("unknown frame tag {other}"))),
        }
    }
}

/// Uniform periodic grid covering `[-h, h)^n` with the origin at index `points/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T> {
    pub n: usize,
    pub points: usize,
    pub half_extent: T,
}

impl<T: Real> GridSpec<T> {
    pub fn new(n: usize, points: usize, half_extent: T) -> Result<Self> {
        if n == 0 {
            return domain("grid dimension must be positive");
        }
        if points < 16 || !points.is_power_of_two() {
            return domain(format!("points_per_axis = {points} must be a power of two >= 16"));
        }
        if !(half_extent > T::zero()) || !half_extent.is_finite() {
            return domain(format!("half_extent = {half_extent} must be positive"));
        }
        Ok(Self { n, points, half_extent })
    }

    /// The cylinder grid `(−π/2, π/2)^n`.
    pub fn cylinder(n: usize, points: usize) -> Result<Self> {
        Self::new(n, points, T::FRAC_PI_2())
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> T {
        lit::<T>(2.0) * self.half_extent / from_usize::<T>(self.points)
    }

    pub fn cell_volume(&self) -> T {
        self.spacing().powi(self.n as i32)
    }

    pub fn coord(&self, k: usize) -> T {
        -self.half_extent + self.spacing() * from_usize::<T>(k)
    }

    pub fn coords(&self) -> Vec<T> {
        (0..self.points).map(|k| self.coord(k)).collect()
    }

    /// Flat index of the origin node.
    pub fn origin_index(&self) -> usize {
        (0..self.n).fold(0, |acc, _| acc * self.points + self.points / 2)
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &k| acc * self.points + k)
    }

    /// Visits every node with its per-axis index vector, in row-major order.
    pub fn for_each_index(&self, mut f: impl FnMut(usize, &[usize])) {
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

    /// Samples `f(coords)` on every node.
    pub fn sample(&self, f: impl Fn(&[T]) -> T) -> Vec<T> {
        let axis = self.coords();
        let mut out = vec![T::zero(); self.len()];
        let mut x = vec![T::zero(); self.n];
        self.for_each_index(|flat, idx| {
            for a in 0..idx.len() {
                x[a] = axis[idx[a]];
            }
            out[flat] = f(&x);
        });
        out
    }

    /// Index of the node mirrored along `axis` (`x_axis → −x_axis`).
    pub fn reflect_index(&self, flat: usize, axis: usize) -> usize {
        let stride = self.points.pow((self.n - 1 - axis) as u32);
        let k = (flat / stride) % self.points;
        let mirrored = (self.points - k) % self.points;
        flat - k * stride + mirrored * stride
    }
}

/// Non-fatal conditions attached to a computed field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FieldWarning {
    /// The operator's kernel or the field's spectrum is not resolved by the grid.
    UnderResolved,
    /// The source does not decay inside the grid; periodic images contaminate the result.
    Aliasing,
}

/// Frame, time tag and the parameters the snapshot header records.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldMeta<T> {
    pub frame: Frame,
    /// `s` for [`Frame::ConeY`], `t` otherwise.
    pub time: T,
    pub rho: T,
    pub nu: T,
}

impl<T: Real> FieldMeta<T> {
    pub fn new(frame: Frame, time: T, rho: T, nu: T) -> Self {
        Self { frame, time, rho, nu }
    }

    /// Physical length of one grid unit: `ρ − t(s)` for cone fields, 1 otherwise.
    pub fn scale(&self) -> T {
        match self.frame {
            Frame::ConeY => {
                let c = (T::one() + self.time * self.time).sqrt();
                self.rho / (c * (c + self.time))
            }
            _ => T::one(),
        }
    }
}

/// Sampled scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField<T> {
    pub spec: GridSpec<T>,
    pub meta: FieldMeta<T>,
    pub data: Vec<T>,
    pub warnings: Vec<FieldWarning>,
}

impl<T: Real> ScalarField<T> {
    pub fn new(spec: GridSpec<T>, meta: FieldMeta<T>, data: Vec<T>) -> Result<Self> {
        check_samples(&spec, &data)?;
        Ok(Self { spec, meta, data, warnings: Vec::new() })
    }

    pub fn from_fn(spec: GridSpec<T>, meta: FieldMeta<T>, f: impl Fn(&[T]) -> T) -> Self {
        let data = spec.sample(f);
        Self { spec, meta, data, warnings: Vec::new() }
    }

    pub fn constant(spec: GridSpec<T>, meta: FieldMeta<T>, c: T) -> Self {
        Self { spec, meta, data: vec![c; spec.len()], warnings: Vec::new() }
    }

    pub fn zeros(spec: GridSpec<T>, meta: FieldMeta<T>) -> Self {
        Self::constant(spec, meta, T::zero())
    }

    pub fn with_data(&self, data: Vec<T>) -> Self {
        Self { spec: self.spec, meta: self.meta, data, warnings: self.warnings.clone() }
    }

    pub fn at_origin(&self) -> T {
        self.data[self.spec.origin_index()]
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn warn(&mut self, w: FieldWarning) {
        if !self.warnings.contains(&w) {
            self.warnings.push(w);
        }
    }
}

/// Sampled vector field, components stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField<T> {
    pub spec: GridSpec<T>,
    pub meta: FieldMeta<T>,
    pub comps: Vec<Vec<T>>,
    pub warnings: Vec<FieldWarning>,
}

impl<T: Real> VectorField<T> {
    pub fn new(spec: GridSpec<T>, meta: FieldMeta<T>, comps: Vec<Vec<T>>) -> Result<Self> {
        for c in &comps {
            check_samples(&spec, c)?;
        }
        Ok(Self { spec, meta, comps, warnings: Vec::new() })
    }

    pub fn from_fn(spec: GridSpec<T>, meta: FieldMeta<T>, ncomp: usize, f: impl Fn(&[T], usize) -> T) -> Self {
        let comps = (0..ncomp).map(|i| spec.sample(|x| f(x, i))).collect();
        Self { spec, meta, comps, warnings: Vec::new() }
    }

    pub fn zeros(spec: GridSpec<T>, meta: FieldMeta<T>, ncomp: usize) -> Self {
        Self { spec, meta, comps: vec![vec![T::zero(); spec.len()]; ncomp], warnings: Vec::new() }
    }

    pub fn from_components(parts: Vec<ScalarField<T>>) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::Domain("no components".into()))?;
        let (spec, meta) = (first.spec, first.meta);
        let mut warnings = Vec::new();
        let mut comps = Vec::with_capacity(parts.len());
        for p in parts {
            if p.spec != spec {
                return domain("components live on different grids");
            }
            for w in p.warnings {
                if !warnings.contains(&w) {
                    warnings.push(w);
                }
            }
            comps.push(p.data);
        }
        Ok(Self { spec, meta, comps, warnings })
    }

    pub fn ncomp(&self) -> usize {
        self.comps.len()
    }

    pub fn component(&self, i: usize) -> ScalarField<T> {
        ScalarField { spec: self.spec, meta: self.meta, data: self.comps[i].clone(), warnings: self.warnings.clone() }
    }

    pub fn at_origin(&self, i: usize) -> T {
        self.comps[i][self.spec.origin_index()]
    }

    pub fn max_abs(&self) -> T {
        self.comps.iter().flatten().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().flatten().all(|v| v.is_finite())
    }

    /// `self − other`, componentwise.
    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
            .collect();
        Self { spec: self.spec, meta: self.meta, comps, warnings: self.warnings.clone() }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        let comps = self.comps.iter().map(|a| a.iter().map(|&x| f(x)).collect()).collect();
        Self { spec: self.spec, meta: self.meta, comps, warnings: self.warnings.clone() }
    }

    pub fn warn(&mut self, w: FieldWarning) {
        if !self.warnings.contains(&w) {
            self.warnings.push(w);
        }
    }

    /// True when `f(y) = f(y^{−j})` for every axis `j` and component, within `tol`.
    pub fn is_reflection_symmetric(&self, tol: T) -> bool {
        (0..self.spec.n).all(|axis| {
            self.comps.iter().all(|c| {
                (0..c.len()).all(|flat| (c[flat] - c[self.spec.reflect_index(flat, axis)]).abs() <= tol)
            })
        })
    }
}

fn check_samples<T: Real>(spec: &GridSpec<T>, data: &[T]) -> Result<()> {
    if data.len() != spec.len() {
        return domain(format!("{} samples for a grid of {}", data.len(), spec.len()));
    }
    if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
        return domain(format!("non-finite sample at index {bad}"));
    }
    Ok(())
}
