//! Propagation-speed fields: homogeneous, linear-gradient and folded layered
//! presets, optionally modulated in time.
//!
//! Depth runs along the last grid axis, with node 0 at the top. Horizontal
//! structure (tilt and folding) follows the first axis.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    /// Fraction of the depth extent covered by this layer.
    pub thickness: f64,
    /// Speed in m/s.
    pub speed: f64,
}

/// Static speed-field preset, as written in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Preset {
    Constant {
        speed: f64,
    },
    Gradient {
        c_top: f64,
        c_bottom: f64,
    },
    Layered {
        layers: Vec<Layer>,
        #[serde(default)]
        tilt: f64,
        #[serde(default)]
        fold_amplitude: f64,
        #[serde(default = "default_fold_period")]
        fold_period: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Procedural stand-in for the Marmousi benchmark: eight folded, tilted
    /// layers whose speed increases with depth.
    Marmousi {
        #[serde(default)]
        seed: u64,
    },
}

fn default_fold_period() -> f64 {
    1.0
}

/// Time dependence applied on top of a static preset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModulationSpec {
    /// `c(x, t) = base(x) * (1 + amplitude * sin(2 pi t / period))`.
    Sinusoid { amplitude: f64, period: f64 },
    /// Piecewise-linear blend between named fields, clamped outside the range.
    Keyframes { frames: Vec<KeyframeSpec> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyframeSpec {
    pub time: f64,
    pub field: String,
}

/// Full medium description: a base preset, optional modulation and the
/// named presets that keyframes may refer to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSpec {
    pub preset: Preset,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulation: Option<ModulationSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub fields: BTreeMap<String, Preset>,
}

impl MediumSpec {
    pub fn constant(speed: f64) -> Self {
        MediumSpec {
            preset: Preset::Constant { speed },
            modulation: None,
            fields: BTreeMap::new(),
        }
    }

    pub fn build(&self, grid: &Grid) -> Result<SpeedField> {
        let base = self.preset.build(grid, "medium.preset")?;
        match &self.modulation {
            None => Ok(base),
            Some(ModulationSpec::Sinusoid { amplitude, period }) => {
                base.with_sinusoid(*amplitude, *period)
            }
            Some(ModulationSpec::Keyframes { frames }) => {
                let mut library = BTreeMap::new();
                for (id, preset) in &self.fields {
                    library.insert(id.clone(), preset.build(grid, &format!("medium.fields.{id}"))?);
                }
                let frames: Vec<(f64, &str)> =
                    frames.iter().map(|f| (f.time, f.field.as_str())).collect();
                SpeedField::keyframed(&frames, &library)
            }
        }
    }
}

impl Preset {
    pub fn build(&self, grid: &Grid, field: &str) -> Result<SpeedField> {
        match self {
            Preset::Constant { speed } => constant_medium(grid, *speed)
                .map_err(|e| rename_field(e, &format!("{field}.speed"))),
            Preset::Gradient { c_top, c_bottom } => gradient_medium(grid, *c_top, *c_bottom)
                .map_err(|e| rename_field(e, field)),
            Preset::Layered {
                layers,
                tilt,
                fold_amplitude,
                fold_period,
                seed,
            } => layered_medium(
                grid,
                &LayeredParams {
                    layers: layers.clone(),
                    tilt: *tilt,
                    fold_amplitude: *fold_amplitude,
                    fold_period: *fold_period,
                },
                *seed,
            )
            .map_err(|e| rename_field(e, field)),
            Preset::Marmousi { seed } => marmousi_like(grid, *seed),
        }
    }
}

fn rename_field(e: Error, prefix: &str) -> Error {
    match e {
        Error::Config { field, reason } if field.is_empty() => Error::config(prefix, reason),
        Error::Config { field, reason } => Error::config(format!("{prefix}.{field}"), reason),
        other => other,
    }
}

#[derive(Clone, Debug)]
enum Modulation {
    Static,
    Sinusoid { amplitude: f64, period: f64 },
    Keyframes(Vec<(f64, Arc<ScalarField>)>),
}

/// Propagation speed `c(x, t)` in m/s over a grid.
#[derive(Clone, Debug)]
pub struct SpeedField {
    base: Arc<ScalarField>,
    modulation: Modulation,
    name: String,
    c_min: f64,
    c_max: f64,
}

impl SpeedField {
    fn from_base(base: ScalarField, name: impl Into<String>) -> Result<Self> {
        let c_min = base.min();
        let c_max = base.max();
        if !(c_min > 0.0 && c_max.is_finite()) {
            return Err(Error::config("", format!("speeds must be positive and finite (min {c_min})")));
        }
        Ok(SpeedField {
            base: Arc::new(base),
            modulation: Modulation::Static,
            name: name.into(),
            c_min,
            c_max,
        })
    }

    /// Wraps an arbitrary positive field.
    pub fn from_field(base: ScalarField, name: impl Into<String>) -> Result<Self> {
        Self::from_base(base, name)
    }

    pub fn with_sinusoid(mut self, amplitude: f64, period: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&amplitude) {
            return Err(Error::config(
                "medium.modulation.amplitude",
                format!("must lie in [0, 1), got {amplitude}"),
            ));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::config(
                "medium.modulation.period",
                format!("must be positive, got {period}"),
            ));
        }
        self.modulation = Modulation::Sinusoid { amplitude, period };
        Ok(self)
    }

    /// Builds a keyframed field from `(time, field id)` pairs resolved against
    /// `library`. Times must be strictly increasing.
    pub fn keyframed(frames: &[(f64, &str)], library: &BTreeMap<String, SpeedField>) -> Result<Self> {
        let field = "medium.modulation.frames";
        if frames.is_empty() {
            return Err(Error::config(field, "at least one keyframe required"));
        }
        let mut resolved = Vec::with_capacity(frames.len());
        for (i, &(time, id)) in frames.iter().enumerate() {
            if !(time >= 0.0 && time.is_finite()) {
                return Err(Error::config(format!("{field}[{i}].time"), "must be finite and >= 0"));
            }
            if let Some(&(prev, _)) = resolved.last() {
                if time <= prev {
                    return Err(Error::config(
                        format!("{field}[{i}].time"),
                        "keyframe times must be strictly increasing",
                    ));
                }
            }
            let sf = library.get(id).ok_or_else(|| {
                Error::config(format!("{field}[{i}].field"), format!("unknown field id `{id}`"))
            })?;
            if !sf.is_static() {
                return Err(Error::config(format!("{field}[{i}].field"), "keyframe fields must be static"));
            }
            resolved.push((time, Arc::clone(&sf.base)));
        }
        let grid = *resolved[0].1.grid();
        if resolved.iter().any(|(_, f)| *f.grid() != grid) {
            return Err(Error::config(field, "keyframe fields live on different grids"));
        }
        let c_min = resolved.iter().map(|(_, f)| f.min()).fold(f64::INFINITY, f64::min);
        let c_max = resolved.iter().map(|(_, f)| f.max()).fold(0.0, f64::max);
        let name = frames.iter().map(|f| f.1).collect::<Vec<_>>().join("->");
        Ok(SpeedField {
            base: Arc::clone(&resolved[0].1),
            modulation: Modulation::Keyframes(resolved),
            name,
            c_min,
            c_max,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.base.grid()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn base(&self) -> &ScalarField {
        &self.base
    }

    pub fn is_static(&self) -> bool {
        match self.modulation {
            Modulation::Static => true,
            Modulation::Sinusoid { amplitude, .. } => amplitude == 0.0,
            Modulation::Keyframes(ref k) => k.len() == 1,
        }
    }

    /// Minimum of the unmodulated field (over all keyframes for keyframed media).
    pub fn c_min(&self) -> f64 {
        self.c_min
    }

    pub fn c_max(&self) -> f64 {
        self.c_max
    }

    /// Supremum of `c` over all times.
    pub fn sup_speed(&self) -> f64 {
        match self.modulation {
            Modulation::Sinusoid { amplitude, .. } => self.c_max * (1.0 + amplitude),
            _ => self.c_max,
        }
    }

    /// Infimum of `c` over all times.
    pub fn inf_speed(&self) -> f64 {
        match self.modulation {
            Modulation::Sinusoid { amplitude, .. } => self.c_min * (1.0 - amplitude),
            _ => self.c_min,
        }
    }

    pub fn speed_at(&self, t: f64) -> ScalarField {
        match &self.modulation {
            Modulation::Static => (*self.base).clone(),
            _ => {
                let mut out = vec![0.0; self.base.values().len()];
                self.fill(t, &mut out, |c| c);
                ScalarField::from_raw(*self.grid(), out)
            }
        }
    }

    /// Writes `c(x, t)^2` into `out`.
    pub fn speed_squared_into(&self, t: f64, out: &mut [f64]) {
        self.fill(t, out, |c| c * c);
    }

    fn fill(&self, t: f64, out: &mut [f64], map: impl Fn(f64) -> f64) {
        let base = self.base.values();
        match &self.modulation {
            Modulation::Static => {
                for (o, &c) in out.iter_mut().zip(base) {
                    *o = map(c);
                }
            }
            Modulation::Sinusoid { amplitude, period } => {
                let factor = 1.0 + amplitude * (2.0 * PI * t / period).sin();
                for (o, &c) in out.iter_mut().zip(base) {
                    *o = map(c * factor);
                }
            }
            Modulation::Keyframes(frames) => {
                let (lo, hi, w) = bracket(frames, t);
                let (a, b) = (frames[lo].1.values(), frames[hi].1.values());
                for ((o, &ca), &cb) in out.iter_mut().zip(a).zip(b) {
                    *o = map(if w == 0.0 { ca } else { (1.0 - w) * ca + w * cb });
                }
            }
        }
    }
}

fn bracket(frames: &[(f64, Arc<ScalarField>)], t: f64) -> (usize, usize, f64) {
    let last = frames.len() - 1;
    if t <= frames[0].0 {
        return (0, 0, 0.0);
    }
    if t >= frames[last].0 {
        return (last, last, 0.0);
    }
    let hi = frames.partition_point(|f| f.0 <= t);
    let lo = hi - 1;
    let w = (t - frames[lo].0) / (frames[hi].0 - frames[lo].0);
    (lo, hi, w)
}

fn check_speed(c: f64, field: &str) -> Result<()> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("speed must be positive and finite, got {c}")))
    }
}

pub fn constant_medium(grid: &Grid, c: f64) -> Result<SpeedField> {
    check_speed(c, "")?;
    SpeedField::from_base(ScalarField::constant(*grid, c), format!("constant-{c}"))
}

/// Linear ramp along the depth axis from `c_top` (node 0) to `c_bottom`.
pub fn gradient_medium(grid: &Grid, c_top: f64, c_bottom: f64) -> Result<SpeedField> {
    check_speed(c_top, "c_top")?;
    check_speed(c_bottom, "c_bottom")?;
    let depth_axis = grid.ndim() - 1;
    let n = grid.points()[depth_axis];
    let values = (0..grid.len())
        .map(|flat| {
            let k = grid.unravel(flat)[depth_axis];
            let w = k as f64 / (n - 1) as f64;
            c_top + (c_bottom - c_top) * w
        })
        .collect();
    SpeedField::from_base(ScalarField::from_raw(*grid, values), "gradient")
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayeredParams {
    /// Top-to-bottom layers; thickness fractions must sum to one.
    pub layers: Vec<Layer>,
    /// Interface dip in radians.
    pub tilt: f64,
    /// Vertical fold displacement in meters.
    pub fold_amplitude: f64,
    /// Horizontal fold wavelength in meters.
    pub fold_period: f64,
}

/// Depth-ordered layers, displaced by a sinusoidal fold (random phase drawn
/// from `seed`) and a linear tilt.
pub fn layered_medium(grid: &Grid, params: &LayeredParams, seed: u64) -> Result<SpeedField> {
    let layers = &params.layers;
    if layers.is_empty() {
        return Err(Error::config("layers", "at least one layer required"));
    }
    let mut cumulative = Vec::with_capacity(layers.len());
    let mut acc = 0.0;
    for (i, layer) in layers.iter().enumerate() {
        if !(layer.thickness > 0.0 && layer.thickness.is_finite()) {
            return Err(Error::config(format!("layers[{i}].thickness"), "must be positive"));
        }
        check_speed(layer.speed, &format!("layers[{i}].speed"))?;
        acc += layer.thickness;
        cumulative.push(acc);
    }
    if (acc - 1.0).abs() > 1e-9 {
        return Err(Error::config("layers", format!("thickness fractions sum to {acc}, expected 1")));
    }
    if !params.tilt.is_finite() || params.tilt.abs() >= PI / 2.0 {
        return Err(Error::config("tilt", "must be finite and within (-pi/2, pi/2)"));
    }
    if !params.fold_amplitude.is_finite() {
        return Err(Error::config("fold_amplitude", "must be finite"));
    }
    if params.fold_amplitude != 0.0 && !(params.fold_period > 0.0 && params.fold_period.is_finite()) {
        return Err(Error::config("fold_period", "must be positive when folding is enabled"));
    }

    let phase = ChaCha8Rng::seed_from_u64(seed).random_range(0.0..2.0 * PI);
    let depth_axis = grid.ndim() - 1;
    let depth_extent = grid.extent()[depth_axis];
    let slope = params.tilt.tan();
    let last = layers.len() - 1;

    let values = (0..grid.len())
        .map(|flat| {
            let idx = grid.unravel(flat);
            let x = grid.coord(0, idx[0]);
            let n = grid.points()[depth_axis];
            let mut depth = idx[depth_axis] as f64 / (n - 1) as f64;
            let fold = params.fold_amplitude * (2.0 * PI * x / params.fold_period + phase).sin();
            let shift = slope * x + fold;
            if shift != 0.0 {
                depth += shift / depth_extent;
            }
            let k = cumulative.partition_point(|&c| c <= depth).min(last);
            layers[k].speed
        })
        .collect();
    SpeedField::from_base(ScalarField::from_raw(*grid, values), "layered")
}

/// Layer stack used by the Marmousi-style preset.
pub fn marmousi_layers() -> Vec<Layer> {
    const STACK: [(f64, f64); 8] = [
        (0.08, 1500.0),
        (0.10, 1700.0),
        (0.12, 1950.0),
        (0.14, 2250.0),
        (0.12, 2600.0),
        (0.16, 3000.0),
        (0.13, 3500.0),
        (0.15, 4200.0),
    ];
    STACK
        .iter()
        .map(|&(thickness, speed)| Layer { thickness, speed })
        .collect()
}

pub fn marmousi_like(grid: &Grid, seed: u64) -> Result<SpeedField> {
    let depth_extent = grid.extent()[grid.ndim() - 1];
    let params = LayeredParams {
        layers: marmousi_layers(),
        tilt: 0.12,
        fold_amplitude: 0.06 * depth_extent,
        fold_period: 0.55 * grid.extent()[0],
    };
    let mut field = layered_medium(grid, &params, seed)?;
    field.name = "marmousi".into();
    Ok(field)
}
