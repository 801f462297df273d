//! Piecewise-constant control schedules.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Bounds, HamiltonianModel};

/// Amplitude table `u[m][j]` for control `m` on interval `j`; every interval
/// has length `total_time / intervals`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule {
    total_time: f64,
    values: Vec<Vec<f64>>,
}

impl ControlSchedule {
    pub fn new(total_time: f64, values: Vec<Vec<f64>>) -> Result<Self> {
        if !(total_time > 0.0) || !total_time.is_finite() {
            return Err(Error::Schedule(format!(
                "total time {total_time} must be positive"
            )));
        }
        let n = values.first().map(Vec::len).unwrap_or(0);
        if n == 0 {
            return Err(Error::Schedule(
                "schedule needs at least one control and one interval".into(),
            ));
        }
        if values.iter().any(|row| row.len() != n) {
            return Err(Error::Schedule(
                "controls have different interval counts".into(),
            ));
        }
        Ok(Self { total_time, values })
    }

    pub fn zeros(total_time: f64, controls: usize, intervals: usize) -> Result<Self> {
        Self::new(total_time, vec![vec![0.0; intervals]; controls])
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn intervals(&self) -> usize {
        self.values[0].len()
    }

    pub fn controls(&self) -> usize {
        self.values.len()
    }

    pub fn dt(&self) -> f64 {
        self.total_time / self.intervals() as f64
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn control(&self, m: usize) -> &[f64] {
        &self.values[m]
    }

    pub fn get(&self, m: usize, j: usize) -> f64 {
        self.values[m][j]
    }

    pub fn set(&mut self, m: usize, j: usize, value: f64) {
        self.values[m][j] = value;
    }

    /// Amplitudes of all controls on interval `j`.
    pub fn amplitudes(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[j]).collect()
    }

    /// `∫ u_m dt` for each control.
    pub fn integrals(&self) -> Vec<f64> {
        let dt = self.dt();
        self.values
            .iter()
            .map(|row| row.iter().sum::<f64>() * dt)
            .collect()
    }

    /// `u += step · direction`, then projection onto the bounds.
    pub fn ascend(&mut self, step: f64, direction: &[Vec<f64>], bounds: &[Bounds]) {
        for ((row, g), b) in self.values.iter_mut().zip(direction).zip(bounds) {
            for (u, &gj) in row.iter_mut().zip(g) {
                *u = b.clamp(*u + step * gj);
            }
        }
    }

    pub fn clamp_to(&mut self, bounds: &[Bounds]) {
        for (row, b) in self.values.iter_mut().zip(bounds) {
            for u in row.iter_mut() {
                *u = b.clamp(*u);
            }
        }
    }

    /// Writes `t_start,t_end,u_0,...,u_{M-1}` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t_start".to_string(), "t_end".to_string()];
        header.extend((0..self.controls()).map(|m| format!("u_{m}")));
        w.write_record(&header)?;
        let dt = self.dt();
        for j in 0..self.intervals() {
            let mut row = vec![fmt_f64(j as f64 * dt), fmt_f64((j + 1) as f64 * dt)];
            row.extend(self.values.iter().map(|r| fmt_f64(r[j])));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.len() < 3 || &headers[0] != "t_start" || &headers[1] != "t_end" {
            return Err(Error::Schedule(format!(
                "unexpected pulse header {headers:?}"
            )));
        }
        let controls = headers.len() - 2;
        let mut values = vec![Vec::new(); controls];
        let mut t_end = 0.0;
        for record in r.records() {
            let record = record?;
            let parse = |k: usize| -> Result<f64> {
                record[k]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Schedule(format!("bad number `{}`: {e}", &record[k])))
            };
            t_end = parse(1)?;
            for (m, row) in values.iter_mut().enumerate() {
                row.push(parse(m + 2)?);
            }
        }
        Self::new(t_end, values)
    }
}

/// Scientific notation with 17 significant digits; parses back exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// How to seed a control before optimisation. Evaluated at interval
/// midpoints `t_j = (j + ½)Δt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialField {
    /// `amplitude · sin(frequency · t + phase)`.
    Sin {
        amplitude: f64,
        #[serde(default = "one")]
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    Constant {
        value: f64,
    },
    /// Uniform on `[lo, hi]`, one independent stream per control.
    Random {
        seed: u64,
        lo: f64,
        hi: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl InitialField {
    pub fn sin_scaled(amplitude: f64) -> Self {
        InitialField::Sin {
            amplitude,
            frequency: 1.0,
            phase: 0.0,
        }
    }
}

/// Builds the starting schedule. `fields` holds one entry per control, or a
/// single entry applied to all controls.
pub fn init_schedule(
    fields: &[InitialField],
    model: &HamiltonianModel,
    total_time: f64,
    intervals: usize,
) -> Result<ControlSchedule> {
    let m_count = model.control_count();
    if intervals == 0 {
        return Err(Error::Schedule("interval count must be >= 1".into()));
    }
    if fields.len() != 1 && fields.len() != m_count {
        return Err(Error::Schedule(format!(
            "{} initial fields given for {m_count} controls",
            fields.len()
        )));
    }
    let dt = total_time / intervals as f64;
    let values = model
        .controls
        .iter()
        .enumerate()
        .map(|(m, control)| {
            let field = fields[if fields.len() == 1 { 0 } else { m }];
            let raw: Vec<f64> = match field {
                InitialField::Sin {
                    amplitude,
                    frequency,
                    phase,
                } => (0..intervals)
                    .map(|j| amplitude * (frequency * (j as f64 + 0.5) * dt + phase).sin())
                    .collect(),
                InitialField::Constant { value } => vec![value; intervals],
                InitialField::Random { seed, lo, hi } => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(m as u64));
                    (0..intervals).map(|_| rng.random_range(lo..=hi)).collect()
                }
            };
            raw.into_iter().map(|u| control.bounds.clamp(u)).collect()
        })
        .collect();
    ControlSchedule::new(total_time, values)
}

/// Projects every entry onto its control's bounds.
pub fn clip(schedule: &ControlSchedule, model: &HamiltonianModel) -> ControlSchedule {
    let mut out = schedule.clone();
    out.clamp_to(&model.bounds());
    out
}

/// Re-bins onto `intervals` equal pieces; each new value is the time average
/// of the old piecewise-constant function over the new interval.
pub fn resample(schedule: &ControlSchedule, intervals: usize) -> Result<ControlSchedule> {
    if intervals == 0 {
        return Err(Error::Schedule("interval count must be >= 1".into()));
    }
    let old_n = schedule.intervals();
    if intervals == old_n {
        return Ok(schedule.clone());
    }
    // Work in units of 1/(old_n·new_n) of the total time so that every
    // boundary is an integer.
    let old_w = intervals as u64;
    let new_w = old_n as u64;
    let values = schedule
        .values
        .iter()
        .map(|row| {
            (0..intervals as u64)
                .map(|k| {
                    let (start, end) = (k * new_w, (k + 1) * new_w);
                    let first = (start / old_w) as usize;
                    let last = ((end - 1) / old_w) as usize;
                    let mut acc = 0.0;
                    for (j, &u) in row.iter().enumerate().take(last + 1).skip(first) {
                        let lo = start.max(j as u64 * old_w);
                        let hi = end.min((j as u64 + 1) * old_w);
                        acc += u * (hi - lo) as f64;
                    }
                    acc / new_w as f64
                })
                .collect()
        })
        .collect();
    ControlSchedule::new(schedule.total_time, values)
}
