//! Explicit leapfrog integration of the damped acoustic wave equation
//!
//! ```text
//! u_tt = c(x, t)^2 lap(u) - alpha u_t + f(x, t)
//! ```
//!
//! The wave speed is stored in m/s and squared in the update. Damping uses
//! the centered average of the two outer time levels:
//!
//! ```text
//! u_next = [2 u - (1 - alpha dt / 2) u_prev + dt^2 (c^2 lap(u) + f)] / (1 + alpha dt / 2)
//! ```
//!
//! The outer ring of nodes is held at zero. With a sponge boundary the
//! `width` rings next to it are additionally scaled every step by
//! `exp(-(strength * (1 - b / width))^2)`, `b` being the node's distance in
//! points from the domain face.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::Interrogator;
use crate::error::{Error, Result};
use crate::grid::{laplacian_into, Grid, InterpStencil, ScalarField};
use crate::media::SpeedField;
use crate::source::{SourceKernel, SourceSpec};

/// Magnitude treated as divergence, scaled by `max(1, |amplitude|)`.
///
/// Leapfrog above the CFL limit grows the highest grid mode geometrically
/// from roundoff; waiting for an f64 overflow can take thousands of steps.
pub const BLOWUP_LIMIT: f64 = 1e100;

/// Snapping tolerance when converting a duration to a step count.
const STEP_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Boundary {
    DirichletZero,
    Sponge { width: usize, strength: f64 },
}

impl Default for Boundary {
    fn default() -> Self {
        Boundary::Sponge {
            width: 16,
            strength: 3.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeStep {
    Fixed(f64),
    Auto(AutoStep),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoStep {
    Auto,
}

impl Default for TimeStep {
    fn default() -> Self {
        TimeStep::Auto(AutoStep::Auto)
    }
}

impl TimeStep {
    pub const AUTO: TimeStep = TimeStep::Auto(AutoStep::Auto);
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Simulated time in seconds.
    pub duration: f64,
    #[serde(default)]
    pub dt: TimeStep,
    #[serde(default = "default_safety")]
    pub cfl_safety: f64,
    /// Attenuation in 1/s.
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<u64>,
    /// When false, a fixed `dt` is not checked against the stability limit.
    #[serde(default = "default_true")]
    pub enforce_cfl: bool,
}

fn default_safety() -> f64 {
    0.5
}

fn default_true() -> bool {
    true
}

impl SimConfig {
    pub fn new(duration: f64) -> Self {
        SimConfig {
            duration,
            dt: TimeStep::AUTO,
            cfl_safety: default_safety(),
            alpha: 0.0,
            boundary: Boundary::default(),
            snapshot_every: None,
            enforce_cfl: true,
        }
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(Error::config("sim.duration", format!("must be >= 0, got {}", self.duration)));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::config("sim.cfl_safety", format!("must lie in (0, 1], got {}", self.cfl_safety)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::config("sim.alpha", format!("must be finite and >= 0, got {}", self.alpha)));
        }
        if let TimeStep::Fixed(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::config("sim.dt", format!("must be positive, got {dt}")));
            }
        }
        if self.snapshot_every == Some(0) {
            return Err(Error::config("sim.snapshot_every", "must be at least 1"));
        }
        if let Boundary::Sponge { width, strength } = self.boundary {
            let smallest = *grid.points().iter().min().unwrap_or(&0);
            if width < 4 || 2 * width >= smallest {
                return Err(Error::config(
                    "sim.boundary.width",
                    format!("sponge width {width} must be >= 4 and below half the smallest axis ({smallest} points)"),
                ));
            }
            if !(strength >= 0.0 && strength.is_finite()) {
                return Err(Error::config("sim.boundary.strength", "must be finite and >= 0"));
            }
        }
        Ok(())
    }

    /// Time step used for this medium, checking explicit steps against the
    /// stability limit (`cfl_dt` with safety 1).
    pub fn resolve_dt(&self, grid: &Grid, medium: &SpeedField) -> Result<f64> {
        match self.dt {
            TimeStep::Auto(_) => Ok(cfl_dt(grid, medium, self.cfl_safety)),
            TimeStep::Fixed(dt) => {
                let limit = cfl_dt(grid, medium, 1.0);
                if self.enforce_cfl && dt > limit {
                    return Err(Error::config(
                        "sim.dt",
                        format!("dt = {dt:e} s exceeds the CFL stability bound {limit:e} s"),
                    ));
                }
                Ok(dt)
            }
        }
    }
}

/// Number of leapfrog steps covering `duration`.
pub fn step_count(duration: f64, dt: f64) -> u64 {
    let n = duration / dt;
    let r = n.round();
    if (n - r).abs() <= STEP_EPS * r.max(1.0) {
        r as u64
    } else {
        n.ceil() as u64
    }
}

/// `safety * h_min / (c_sup * sqrt(ndim))`.
pub fn cfl_dt(grid: &Grid, medium: &SpeedField, safety: f64) -> f64 {
    safety * grid.min_spacing() / (medium.sup_speed() * (grid.ndim() as f64).sqrt())
}

/// Two consecutive time levels of the displacement field.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveState {
    pub u_prev: ScalarField,
    pub u_curr: ScalarField,
    pub step_index: u64,
    pub time: f64,
}

impl WaveState {
    pub fn quiescent(grid: Grid) -> Self {
        WaveState {
            u_prev: ScalarField::zeros(grid),
            u_curr: ScalarField::zeros(grid),
            step_index: 0,
            time: 0.0,
        }
    }
}

/// Reusable stepper bound to one medium, source and configuration.
pub struct Solver<'a> {
    grid: Grid,
    medium: &'a SpeedField,
    kernel: SourceKernel,
    dt: f64,
    alpha: f64,
    sponge: Option<Vec<f64>>,
    c2: Vec<f64>,
    scratch: Vec<f64>,
    next: Vec<f64>,
    limit: f64,
}

impl<'a> Solver<'a> {
    pub fn new(grid: &Grid, medium: &'a SpeedField, source: &SourceSpec, cfg: &SimConfig) -> Result<Self> {
        if medium.grid() != grid {
            return Err(Error::config("medium", "speed field grid differs from simulation grid"));
        }
        cfg.validate(grid)?;
        let dt = cfg.resolve_dt(grid, medium)?;
        let kernel = source.kernel(grid)?;
        let sponge = match cfg.boundary {
            Boundary::DirichletZero => None,
            Boundary::Sponge { width, strength } => Some(sponge_profile(grid, width, strength)),
        };
        let mut c2 = vec![0.0; grid.len()];
        medium.speed_squared_into(0.0, &mut c2);
        Ok(Solver {
            grid: *grid,
            medium,
            kernel,
            dt,
            alpha: cfg.alpha,
            sponge,
            c2,
            scratch: vec![0.0; grid.len()],
            next: vec![0.0; grid.len()],
            limit: BLOWUP_LIMIT * source.amplitude.abs().max(1.0),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Advances one step using the configured source.
    pub fn step(&mut self, state: &mut WaveState) -> Result<()> {
        let t = state.step_index as f64 * self.dt;
        self.prepare(state, t);
        self.kernel.accumulate(t, 1.0, &mut self.scratch);
        self.finish(state)
    }

    /// Advances one step replacing the configured source with a dense
    /// forcing field sampled at the current time.
    pub fn step_with_forcing(&mut self, state: &mut WaveState, forcing: &[f64]) -> Result<()> {
        if forcing.len() != self.grid.len() {
            return Err(Error::Dimension {
                expected: self.grid.len(),
                actual: forcing.len(),
            });
        }
        let t = state.step_index as f64 * self.dt;
        self.prepare(state, t);
        for (s, f) in self.scratch.iter_mut().zip(forcing) {
            *s += f;
        }
        self.finish(state)
    }

    // scratch <- c^2 lap(u_curr)
    fn prepare(&mut self, state: &WaveState, t: f64) {
        if !self.medium.is_static() {
            self.medium.speed_squared_into(t, &mut self.c2);
        }
        laplacian_into(&self.grid, state.u_curr.values(), &mut self.scratch);
        self.scratch
            .par_iter_mut()
            .zip(self.c2.par_iter())
            .for_each(|(s, c2)| *s *= c2);
    }

    fn finish(&mut self, state: &mut WaveState) -> Result<()> {
        let dt = self.dt;
        let dt2 = dt * dt;
        let half = 0.5 * self.alpha * dt;
        let lag = 1.0 - half;
        let inv = 1.0 / (1.0 + half);
        let curr = state.u_curr.values();
        let prev = state.u_prev.values();
        let rhs = &self.scratch;
        self.next
            .par_iter_mut()
            .enumerate()
            .for_each(|(k, n)| *n = (2.0 * curr[k] - lag * prev[k] + dt2 * rhs[k]) * inv);

        zero_ring(&self.grid, &mut self.next);
        if let Some(profile) = &self.sponge {
            self.next
                .par_iter_mut()
                .zip(profile.par_iter())
                .for_each(|(n, d)| *n *= d);
            state
                .u_curr
                .values_mut()
                .par_iter_mut()
                .zip(profile.par_iter())
                .for_each(|(c, d)| *c *= d);
        }

        let limit = self.limit;
        if self.next.par_iter().any(|v| !v.is_finite() || v.abs() > limit) {
            return Err(Error::Instability {
                step: state.step_index,
                time: state.step_index as f64 * dt,
            });
        }

        std::mem::swap(&mut state.u_prev, &mut state.u_curr);
        std::mem::swap(state.u_curr.storage_mut(), &mut self.next);
        state.step_index += 1;
        state.time = state.step_index as f64 * dt;
        Ok(())
    }

    /// Discrete energy of the leapfrog scheme,
    /// `sum (c_max / c)^2 ((u - u_prev) / dt)^2 + c_max^2 sum grad(u) . grad(u_prev)`,
    /// with forward differences on every grid edge. For a homogeneous medium
    /// this is `sum v^2 + c^2 sum grad(u) . grad(u_prev)`, which undamped
    /// leapfrog with a zero boundary ring conserves exactly.
    pub fn energy(&self, state: &WaveState) -> f64 {
        discrete_energy(&self.grid, &self.c2, self.medium.c_max(), state, self.dt)
    }
}

#[allow(clippy::needless_range_loop)]
fn discrete_energy(grid: &Grid, c2: &[f64], c_ref: f64, state: &WaveState, dt: f64) -> f64 {
    let u = state.u_curr.values();
    let p = state.u_prev.values();
    let c_ref2 = c_ref * c_ref;
    let kinetic: f64 = u
        .iter()
        .zip(p)
        .zip(c2)
        .map(|((a, b), c2)| {
            let v = (a - b) / dt;
            c_ref2 / c2 * v * v
        })
        .sum();
    let strides = grid.strides();
    let mut potential = 0.0;
    for axis in 0..grid.ndim() {
        let h = grid.spacing()[axis];
        let s = strides[axis];
        let n = grid.points()[axis];
        let mut acc = 0.0;
        for k in 0..u.len() {
            if grid.unravel(k)[axis] + 1 < n {
                acc += (u[k + s] - u[k]) * (p[k + s] - p[k]);
            }
        }
        potential += acc / (h * h);
    }
    kinetic + c_ref2 * potential
}

fn zero_ring(grid: &Grid, values: &mut [f64]) {
    let p = grid.points();
    let slab = grid.strides()[0];
    let ndim = grid.ndim();
    values.par_chunks_mut(slab).enumerate().for_each(|(i, chunk)| {
        if i == 0 || i == p[0] - 1 {
            chunk.fill(0.0);
            return;
        }
        if ndim == 2 {
            chunk[0] = 0.0;
            chunk[p[1] - 1] = 0.0;
        } else {
            let nz = p[2];
            for j in 0..p[1] {
                let line = &mut chunk[j * nz..(j + 1) * nz];
                if j == 0 || j == p[1] - 1 {
                    line.fill(0.0);
                } else {
                    line[0] = 0.0;
                    line[nz - 1] = 0.0;
                }
            }
        }
    });
}

/// Per-node multiplicative damping factors for a sponge layer.
pub fn sponge_profile(grid: &Grid, width: usize, strength: f64) -> Vec<f64> {
    (0..grid.len())
        .map(|flat| {
            let b = grid.boundary_distance(&grid.unravel(flat));
            if b < width {
                let x = strength * (1.0 - b as f64 / width as f64);
                (-(x * x)).exp()
            } else {
                1.0
            }
        })
        .collect()
}

/// Single update of `state`, building a throwaway [`Solver`].
pub fn step(state: &WaveState, medium: &SpeedField, source: &SourceSpec, cfg: &SimConfig) -> Result<WaveState> {
    let mut solver = Solver::new(state.u_curr.grid(), medium, source, cfg)?;
    let mut next = state.clone();
    solver.step(&mut next)?;
    Ok(next)
}

/// Output of [`run`].
#[derive(Clone, Debug, PartialEq)]
pub struct SimResult {
    pub dt: f64,
    pub steps: u64,
    /// One trace per interrogator, sampled at every step including `t = 0`.
    pub raw_traces: Vec<Vec<f64>>,
    pub snapshots: Vec<(f64, ScalarField)>,
}

/// Runs from a quiescent state for `ceil(duration / dt)` steps.
pub fn run(
    grid: &Grid,
    medium: &SpeedField,
    source: &SourceSpec,
    cfg: &SimConfig,
    probes: &[Interrogator],
) -> Result<SimResult> {
    run_from(WaveState::quiescent(*grid), medium, source, cfg, probes)
}

pub fn run_from(
    mut state: WaveState,
    medium: &SpeedField,
    source: &SourceSpec,
    cfg: &SimConfig,
    probes: &[Interrogator],
) -> Result<SimResult> {
    let grid = *state.u_curr.grid();
    let stencils = probes
        .iter()
        .enumerate()
        .map(|(i, p)| {
            InterpStencil::new(&grid, &p.position).map_err(|_| {
                Error::config(
                    format!("interrogators[{i}].position"),
                    format!("{:?} ({}) lies outside the domain", p.position, p.id),
                )
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut solver = Solver::new(&grid, medium, source, cfg)?;
    let steps = step_count(cfg.duration, solver.dt());

    let mut raw_traces: Vec<Vec<f64>> = stencils
        .iter()
        .map(|_| Vec::with_capacity(steps as usize + 1))
        .collect();
    let mut snapshots = Vec::new();
    let record = |state: &WaveState, traces: &mut Vec<Vec<f64>>, snaps: &mut Vec<(f64, ScalarField)>| {
        for (trace, s) in traces.iter_mut().zip(&stencils) {
            trace.push(s.apply(state.u_curr.values()));
        }
        if let Some(every) = cfg.snapshot_every {
            if state.step_index.is_multiple_of(every) {
                snaps.push((state.time, state.u_curr.clone()));
            }
        }
    };

    record(&state, &mut raw_traces, &mut snapshots);
    for _ in 0..steps {
        solver.step(&mut state)?;
        record(&state, &mut raw_traces, &mut snapshots);
    }
    Ok(SimResult {
        dt: solver.dt(),
        steps,
        raw_traces,
        snapshots,
    })
}
