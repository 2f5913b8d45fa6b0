//! Interrogators (virtual seismometers) and fixed-rate seismograms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{interpolate, Grid};
use crate::media::SpeedField;
use crate::solver::{run, SimConfig, SimResult, WaveState};
use crate::source::SourceSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interrogator {
    pub id: String,
    /// Domain coordinates in meters.
    pub position: Vec<f64>,
}

impl Interrogator {
    pub fn new(id: impl Into<String>, position: &[f64]) -> Self {
        Interrogator {
            id: id.into(),
            position: position.to_vec(),
        }
    }

    pub fn validate(&self, grid: &Grid, field: &str) -> Result<()> {
        if self.position.len() != grid.ndim() || !grid.contains(&self.position) {
            return Err(Error::config(
                format!("{field}.position"),
                format!("{:?} must lie inside the domain", self.position),
            ));
        }
        Ok(())
    }
}

/// Displacement time series sampled at `rate` Hz from `t = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Seismogram {
    pub interrogator_id: String,
    pub rate: f64,
    pub samples: Vec<f64>,
}

impl Seismogram {
    pub fn t0(&self) -> f64 {
        0.0
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 / self.rate
    }
}

/// Displacement `u_curr` at the interrogator position.
pub fn probe(state: &WaveState, g: &Interrogator) -> Result<f64> {
    interpolate(&state.u_curr, &g.position)
}

/// `floor(duration * rate) + 1`.
pub fn sample_count(duration: f64, rate: f64) -> usize {
    (duration * rate + 1e-9).floor() as usize + 1
}

pub fn check_rate(dt: f64, rate: f64) -> Result<()> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::config("acquisition.rate", format!("must be positive, got {rate}")));
    }
    if dt * rate > 1.0 + 1e-12 {
        return Err(Error::config(
            "acquisition.rate",
            format!("solver dt {dt:e} s is coarser than the output interval {:e} s", 1.0 / rate),
        ));
    }
    Ok(())
}

/// Linearly interpolates per-step samples (spacing `dt`) onto `k / rate`.
pub fn resample(raw: &[f64], dt: f64, rate: f64, duration: f64) -> Result<Vec<f64>> {
    check_rate(dt, rate)?;
    if raw.is_empty() {
        return Err(Error::config("acquisition", "no raw samples to resample"));
    }
    let n = sample_count(duration, rate);
    let last = raw.len() - 1;
    let ratio = rate * dt;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let pos = if ratio == 1.0 { k as f64 } else { k as f64 / ratio };
        let nearest = pos.round();
        let value = if (pos - nearest).abs() <= 1e-9 * nearest.max(1.0) {
            raw[(nearest as usize).min(last)]
        } else {
            let i = (pos.floor() as usize).min(last);
            let j = (i + 1).min(last);
            let w = pos - i as f64;
            raw[i] + (raw[j] - raw[i]) * w
        };
        out.push(value);
    }
    Ok(out)
}

/// Converts a [`SimResult`]'s raw traces to seismograms at `rate`.
pub fn seismograms(
    result: &SimResult,
    probes: &[Interrogator],
    rate: f64,
    duration: f64,
) -> Result<Vec<Seismogram>> {
    result
        .raw_traces
        .iter()
        .zip(probes)
        .map(|(raw, p)| {
            Ok(Seismogram {
                interrogator_id: p.id.clone(),
                rate,
                samples: resample(raw, result.dt, rate, duration)?,
            })
        })
        .collect()
}

/// Time step satisfying both the CFL bound and the output rate.
pub fn effective_config(cfg: &SimConfig, grid: &Grid, medium: &SpeedField, rate: f64) -> Result<SimConfig> {
    let dt = cfg.resolve_dt(grid, medium)?;
    let mut out = cfg.clone();
    if matches!(cfg.dt, crate::solver::TimeStep::Auto(_)) && dt * rate > 1.0 {
        out.dt = crate::solver::TimeStep::Fixed(1.0 / rate);
    }
    check_rate(out.resolve_dt(grid, medium)?, rate)?;
    Ok(out)
}

/// Runs a simulation and samples every interrogator at `rate`.
pub fn record(
    grid: &Grid,
    medium: &SpeedField,
    source: &SourceSpec,
    cfg: &SimConfig,
    probes: &[Interrogator],
    rate: f64,
) -> Result<(SimResult, Vec<Seismogram>)> {
    for (i, p) in probes.iter().enumerate() {
        p.validate(grid, &format!("interrogators[{i}]"))?;
    }
    let cfg = effective_config(cfg, grid, medium, rate)?;
    let result = run(grid, medium, source, &cfg, probes)?;
    let traces = seismograms(&result, probes, rate, cfg.duration)?;
    Ok((result, traces))
}
