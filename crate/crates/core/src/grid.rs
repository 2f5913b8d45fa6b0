//! Uniform Cartesian grids centered on the origin, dense scalar fields and
//! the second-order Laplacian stencil.
//!
//! Storage is row-major: the last axis varies fastest. Node `k` on axis `i`
//! sits at `-extent[i] / 2 + k * spacing[i]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible number of nodes along any axis.
pub const MIN_POINTS: usize = 5;

/// Default node spacing in meters when neither extent nor spacing is given.
pub const DEFAULT_SPACING: f64 = 1.0;

/// Serialized form of a [`Grid`]: node counts plus either the physical
/// extent of each axis or one uniform spacing (default 1 m).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub points: Vec<usize>,
    /// Length in meters of each axis, node to node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extent: Option<Vec<f64>>,
    /// Uniform node spacing in meters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
}

/// Spatial discretization descriptor. Immutable and `Copy`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid {
    ndim: usize,
    points: [usize; 3],
    extent: [f64; 3],
    spacing: [f64; 3],
}

impl TryFrom<GridSpec> for Grid {
    type Error = Error;

    fn try_from(spec: GridSpec) -> Result<Self> {
        match (spec.extent, spec.spacing) {
            (Some(_), Some(_)) => Err(Error::config("grid", "give either extent or spacing, not both")),
            (Some(extent), None) => Grid::new(spec.points.len(), &spec.points, &extent),
            (None, h) => {
                let h = h.unwrap_or(DEFAULT_SPACING);
                if !(h.is_finite() && h > 0.0) {
                    return Err(Error::config("grid.spacing", format!("must be positive and finite, got {h}")));
                }
                Grid::with_spacing(&spec.points, h)
            }
        }
    }
}

impl From<Grid> for GridSpec {
    fn from(g: Grid) -> Self {
        GridSpec {
            points: g.points().to_vec(),
            extent: Some(g.extent().to_vec()),
            spacing: None,
        }
    }
}

impl Grid {
    pub fn new(ndim: usize, points: &[usize], extent: &[f64]) -> Result<Self> {
        if !(2..=3).contains(&ndim) {
            return Err(Error::config("grid", format!("ndim must be 2 or 3, got {ndim}")));
        }
        if points.len() != ndim {
            return Err(Error::config(
                "grid.points",
                format!("expected {ndim} entries, got {}", points.len()),
            ));
        }
        if extent.len() != ndim {
            return Err(Error::config(
                "grid.extent",
                format!("expected {ndim} entries, got {}", extent.len()),
            ));
        }
        let mut g = Grid {
            ndim,
            points: [1; 3],
            extent: [0.0; 3],
            spacing: [0.0; 3],
        };
        for axis in 0..ndim {
            let n = points[axis];
            if n < MIN_POINTS {
                return Err(Error::config(
                    format!("grid.points[{axis}]"),
                    format!("need at least {MIN_POINTS} points, got {n}"),
                ));
            }
            let len = extent[axis];
            let h = len / (n - 1) as f64;
            if !(len.is_finite() && h.is_finite() && h > 0.0) {
                return Err(Error::config(
                    format!("grid.extent[{axis}]"),
                    format!("extent must be positive and finite, got {len}"),
                ));
            }
            g.points[axis] = n;
            g.extent[axis] = len;
            g.spacing[axis] = h;
        }
        Ok(g)
    }

    /// Grid with the given node counts and a uniform spacing `h` on every axis.
    pub fn with_spacing(points: &[usize], h: f64) -> Result<Self> {
        let extent: Vec<f64> = points
            .iter()
            .map(|&n| n.saturating_sub(1) as f64 * h)
            .collect();
        Grid::new(points.len(), points, &extent)
    }

    pub fn ndim(&self) -> usize {
        self.ndim
    }

    pub fn points(&self) -> &[usize] {
        &self.points[..self.ndim]
    }

    pub fn extent(&self) -> &[f64] {
        &self.extent[..self.ndim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.ndim]
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing().iter().copied().fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.points().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Row-major strides, padded to three axes (unused axes have stride 1).
    pub fn strides(&self) -> [usize; 3] {
        let p = self.points;
        match self.ndim {
            2 => [p[1], 1, 1],
            _ => [p[1] * p[2], p[2], 1],
        }
    }

    /// Coordinate in meters of node `k` along `axis`.
    pub fn coord(&self, axis: usize, k: usize) -> f64 {
        -0.5 * self.extent[axis] + k as f64 * self.spacing[axis]
    }

    /// Lower and upper coordinate bounds of `axis`.
    pub fn bounds(&self, axis: usize) -> (f64, f64) {
        let half = 0.5 * self.extent[axis];
        (-half, half)
    }

    pub fn index(&self, idx: &[usize]) -> usize {
        let s = self.strides();
        idx.iter().zip(s.iter()).map(|(i, s)| i * s).sum()
    }

    /// Multi-index of a flat offset, padded with zeros to three axes.
    pub fn unravel(&self, mut flat: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        for axis in (0..self.ndim).rev() {
            out[axis] = flat % self.points[axis];
            flat /= self.points[axis];
        }
        out
    }

    /// Physical position of a flat offset.
    pub fn position(&self, flat: usize) -> [f64; 3] {
        let idx = self.unravel(flat);
        let mut pos = [0.0; 3];
        for axis in 0..self.ndim {
            pos[axis] = self.coord(axis, idx[axis]);
        }
        pos
    }

    /// Distance in nodes from a multi-index to the closest domain face.
    pub fn boundary_distance(&self, idx: &[usize; 3]) -> usize {
        (0..self.ndim)
            .map(|a| idx[a].min(self.points[a] - 1 - idx[a]))
            .min()
            .unwrap_or(0)
    }

    /// Whether `position` lies in the closed bounding box.
    pub fn contains(&self, position: &[f64]) -> bool {
        position.len() == self.ndim
            && position.iter().enumerate().all(|(axis, &x)| {
                let (lo, hi) = self.bounds(axis);
                let tol = 1e-9 * self.spacing[axis];
                x.is_finite() && x >= lo - tol && x <= hi + tol
            })
    }
}

/// Dense field of `f64` samples over a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::config(
                format!("field[{pos}]"),
                "non-finite value in scalar field",
            ));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        ScalarField {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        ScalarField {
            grid,
            values: vec![value; grid.len()],
        }
    }

    /// Samples `f` at every node position.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|flat| {
                let p = grid.position(flat);
                f(&p[..grid.ndim()])
            })
            .collect();
        ScalarField { grid, values }
    }

    /// Wraps values without the finiteness scan. Used on hot paths that
    /// perform their own blow-up detection.
    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub(crate) fn storage_mut(&mut self) -> &mut Vec<f64> {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.values[self.grid.index(idx)]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Second-order central Laplacian. The outer ring of nodes is set to zero.
pub fn laplacian(u: &ScalarField) -> ScalarField {
    let mut out = vec![0.0; u.values.len()];
    laplacian_into(&u.grid, &u.values, &mut out);
    ScalarField::from_raw(u.grid, out)
}

/// Writes the Laplacian of `u` into `out`, zeroing the boundary ring.
///
/// Work is split over slabs of the first axis; every node is evaluated with
/// the same operation order, so the result does not depend on thread count.
#[allow(clippy::needless_range_loop)]
pub fn laplacian_into(grid: &Grid, u: &[f64], out: &mut [f64]) {
    assert_eq!(u.len(), grid.len());
    assert_eq!(out.len(), grid.len());
    let p = grid.points;
    let h = grid.spacing;
    let inv: [f64; 3] = [1.0 / (h[0] * h[0]), 1.0 / (h[1] * h[1]), 1.0 / (h[2] * h[2])];
    let slab = grid.strides()[0];

    match grid.ndim {
        2 => {
            let (nx, ny) = (p[0], p[1]);
            out.par_chunks_mut(slab).enumerate().for_each(|(i, row)| {
                if i == 0 || i == nx - 1 {
                    row.fill(0.0);
                    return;
                }
                let c = i * ny;
                row[0] = 0.0;
                row[ny - 1] = 0.0;
                for j in 1..ny - 1 {
                    let k = c + j;
                    let centre = 2.0 * u[k];
                    row[j] = (u[k + ny] - centre + u[k - ny]) * inv[0]
                        + (u[k + 1] - centre + u[k - 1]) * inv[1];
                }
            });
        }
        _ => {
            let (nx, ny, nz) = (p[0], p[1], p[2]);
            let sx = ny * nz;
            out.par_chunks_mut(slab).enumerate().for_each(|(i, plane)| {
                if i == 0 || i == nx - 1 {
                    plane.fill(0.0);
                    return;
                }
                for j in 0..ny {
                    let line = &mut plane[j * nz..(j + 1) * nz];
                    if j == 0 || j == ny - 1 {
                        line.fill(0.0);
                        continue;
                    }
                    line[0] = 0.0;
                    line[nz - 1] = 0.0;
                    let base = i * sx + j * nz;
                    for kz in 1..nz - 1 {
                        let k = base + kz;
                        let centre = 2.0 * u[k];
                        line[kz] = (u[k + sx] - centre + u[k - sx]) * inv[0]
                            + (u[k + nz] - centre + u[k - nz]) * inv[1]
                            + (u[k + 1] - centre + u[k - 1]) * inv[2];
                    }
                }
            });
        }
    }
}

/// Multilinear interpolation of `u` at a physical position.
pub fn interpolate(u: &ScalarField, position: &[f64]) -> Result<f64> {
    let stencil = InterpStencil::new(&u.grid, position)?;
    Ok(stencil.apply(&u.values))
}

/// Precomputed corner offsets and weights for repeated sampling at a fixed
/// position.
#[derive(Clone, Debug)]
pub struct InterpStencil {
    corners: Vec<(usize, f64)>,
}

impl InterpStencil {
    pub fn new(grid: &Grid, position: &[f64]) -> Result<Self> {
        if position.len() != grid.ndim() || !grid.contains(position) {
            return Err(Error::OutOfBounds {
                position: position.to_vec(),
            });
        }
        let ndim = grid.ndim();
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for axis in 0..ndim {
            let (lo, _) = grid.bounds(axis);
            let n = grid.points[axis];
            let s = ((position[axis] - lo) / grid.spacing[axis]).clamp(0.0, (n - 1) as f64);
            let mut i = s.floor() as usize;
            if i >= n - 1 {
                i = n - 2;
            }
            base[axis] = i;
            frac[axis] = s - i as f64;
        }
        let strides = grid.strides();
        let mut corners = Vec::with_capacity(1 << ndim);
        for mask in 0..(1usize << ndim) {
            let mut offset = 0;
            let mut weight = 1.0;
            for axis in 0..ndim {
                let hi = (mask >> axis) & 1 == 1;
                offset += (base[axis] + hi as usize) * strides[axis];
                weight *= if hi { frac[axis] } else { 1.0 - frac[axis] };
            }
            corners.push((offset, weight));
        }
        Ok(InterpStencil { corners })
    }

    pub fn apply(&self, values: &[f64]) -> f64 {
        self.corners.iter().map(|&(k, w)| w * values[k]).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid2(n: usize, h: f64) -> Grid {
        Grid::with_spacing(&[n, n], h).unwrap()
    }

    #[test]
    fn spacing_from_extent() {
        let g = Grid::new(2, &[256, 256], &[255.0, 255.0]).unwrap();
        assert_eq!(g.spacing(), &[1.0, 1.0]);
        assert_eq!(g.bounds(0), (-127.5, 127.5));
        let g3 = Grid::new(3, &[64, 64, 64], &[63.0, 63.0, 63.0]).unwrap();
        assert_eq!(g3.spacing(), &[1.0, 1.0, 1.0]);
        assert_eq!(g3.len(), 64 * 64 * 64);
    }

    #[test]
    fn signed_probe_coordinates_are_interior() {
        let g = Grid::new(2, &[256, 256], &[255.0, 255.0]).unwrap();
        assert!(g.contains(&[-64.0, 0.0]));
        assert!(g.contains(&[64.0, 0.0]));
        assert_eq!(g.coord(0, 0), -127.5);
        assert_eq!(g.coord(0, 255), 127.5);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Grid::new(1, &[10], &[1.0]).is_err());
        assert!(Grid::new(2, &[10], &[1.0, 1.0]).is_err());
        assert!(Grid::new(2, &[10, 4], &[1.0, 1.0]).is_err());
        assert!(Grid::new(2, &[10, 10], &[1.0, 0.0]).is_err());
        assert!(Grid::new(2, &[10, 10], &[1.0, f64::NAN]).is_err());
        assert!(Grid::new(4, &[5, 5, 5, 5], &[1.0; 4]).is_err());
    }

    #[test]
    fn grid_serde_validates() {
        let g: Grid = serde_json::from_str(r#"{"points":[8,9],"extent":[7.0,16.0]}"#).unwrap();
        assert_eq!(g.spacing(), &[1.0, 2.0]);
        assert!(serde_json::from_str::<Grid>(r#"{"points":[3,9],"extent":[7.0,16.0]}"#).is_err());

        let unit: Grid = serde_json::from_str(r#"{"points":[6,11]}"#).unwrap();
        assert_eq!(unit.spacing(), &[1.0, 1.0]);
        assert_eq!(unit.extent(), &[5.0, 10.0]);
        let coarse: Grid = serde_json::from_str(r#"{"points":[6,11],"spacing":2.5}"#).unwrap();
        assert_eq!(coarse.extent(), &[12.5, 25.0]);
        assert!(serde_json::from_str::<Grid>(r#"{"points":[6,6],"spacing":1.0,"extent":[5.0,5.0]}"#).is_err());
        assert!(serde_json::from_str::<Grid>(r#"{"points":[6,6],"spacing":-1.0}"#).is_err());
        let back: Grid = serde_json::from_str(&serde_json::to_string(&coarse).unwrap()).unwrap();
        assert_eq!(back, coarse);
    }

    #[test]
    fn field_rejects_nan() {
        let g = grid2(5, 1.0);
        let mut v = vec![0.0; 25];
        v[3] = f64::NAN;
        assert!(ScalarField::new(g, v).is_err());
        assert!(ScalarField::new(g, vec![0.0; 24]).is_err());
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let u = ScalarField::constant(grid2(9, 1.0), 5.0);
        assert!(laplacian(&u).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn laplacian_of_quadratic_is_exact() {
        let u = ScalarField::from_fn(grid2(17, 1.0), |p| p[0] * p[0] + p[1] * p[1]);
        let l = laplacian(&u);
        let g = *u.grid();
        for i in 1..16 {
            for j in 1..16 {
                assert!((l.get(&[i, j]) - 4.0).abs() < 1e-12);
            }
        }
        assert_eq!(l.get(&[0, 3]), 0.0);
        assert_eq!(l.values()[g.index(&[16, 16])], 0.0);
    }

    #[test]
    fn laplacian_3d_quadratic() {
        let g = Grid::with_spacing(&[7, 8, 9], 0.5).unwrap();
        let u = ScalarField::from_fn(g, |p| p[0] * p[0]);
        let l = laplacian(&u);
        for i in 1..6 {
            for j in 1..7 {
                for k in 1..8 {
                    assert!((l.get(&[i, j, k]) - 2.0).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn interpolation_basics() {
        let g = grid2(5, 1.0);
        let u = ScalarField::from_fn(g, |p| 3.0 * p[0] - p[1] + 0.5);
        // node value
        let node = [g.coord(0, 1), g.coord(1, 3)];
        assert_eq!(interpolate(&u, &node).unwrap(), u.get(&[1, 3]));

        let mut v = vec![0.0; 25];
        v[g.index(&[1, 1])] = 4.0;
        let cell = ScalarField::new(g, v).unwrap();
        let mid = [g.coord(0, 0) + 0.5, g.coord(1, 0) + 0.5];
        assert_eq!(interpolate(&cell, &mid).unwrap(), 1.0);

        assert!(matches!(
            interpolate(&u, &[2.5, 0.0]),
            Err(Error::OutOfBounds { .. })
        ));
        assert!(interpolate(&u, &[2.0, -2.0]).is_ok());
    }

    #[test]
    fn interpolation_reproduces_linear_x() {
        let g = Grid::with_spacing(&[21, 11], 1.0).unwrap();
        let u = ScalarField::from_fn(g, |p| p[0]);
        for &x in &[-9.75, -3.3, 0.0, 7.25, 9.999] {
            let got = interpolate(&u, &[x, 1.3]).unwrap();
            assert!((got - x).abs() < 1e-12, "{got} vs {x}");
        }
    }

    #[test]
    fn parallel_laplacian_is_bit_identical() {
        let g = Grid::with_spacing(&[40, 33], 0.7).unwrap();
        let u = ScalarField::from_fn(g, |p| (p[0] * 0.3).sin() * (p[1] * 0.2).cos());
        let a = laplacian(&u);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| laplacian(&u));
        assert_eq!(a.values(), b.values());
    }
}
