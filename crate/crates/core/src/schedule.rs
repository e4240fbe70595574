//! Interleaved gate schedule and the induced mode sequence.
//!
//! S1 is gated high on `[0, D*T)` and S2 on `[T/2, T/2 + D*T) mod T` (180
//! degree interleave). For `D > 0.5` the two gates overlap and one period
//! tiles into exactly four intervals:
//!
//! ```text
//!   [0, (D-1/2)T)          both on          -> Mode I
//!   [(D-1/2)T, T/2)        S1 on, S2 off    -> Mode III
//!   [T/2, D*T)             both on          -> Mode I
//!   [D*T, T)               S1 off, S2 on    -> Mode II
//! ```
//!
//! Mode I therefore occupies `(2D-1)*T` per period and Modes II and III
//! `(1-D)*T` each. `D <= 0.5` removes the both-on interval that the
//! three-mode analysis is built on and is rejected.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the three conduction configurations of the converter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Both switches on; all ladder diodes blocking; the output capacitor
    /// alone feeds the load while both inductors charge from the source.
    I,
    /// S1 off, S2 on; D1 and D3 conduct; leg-1 current charges C1 and C3
    /// while C2 discharges into the ladder and C4 into the load.
    II,
    /// S1 on, S2 off; D2 and D4 conduct; leg-2 current charges C2 and C4
    /// while C1 and C3 discharge.
    III,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::I, Mode::II, Mode::III];

    /// Dense index used for per-mode tables.
    pub fn index(self) -> usize {
        match self {
            Mode::I => 0,
            Mode::II => 1,
            Mode::III => 2,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::I => write!(f, "I"),
            Mode::II => write!(f, "II"),
            Mode::III => write!(f, "III"),
        }
    }
}

/// A contiguous interval of one period spent in a single mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tile {
    pub mode: Mode,
    /// Start time within the period, seconds.
    pub start: f64,
    /// Tile length, seconds.
    pub duration: f64,
}

impl Tile {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }
}

/// The ordered mode tiling of one switching period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSchedule {
    /// Switching period, seconds.
    pub period: f64,
    /// Contiguous, non-overlapping tiles summing exactly to one period.
    pub tiles: Vec<Tile>,
}

impl GateSchedule {
    /// Total time spent in each mode per period, indexed by [`Mode::index`].
    pub fn mode_occupancy(&self) -> [f64; 3] {
        let mut occ = [0.0; 3];
        for tile in &self.tiles {
            occ[tile.mode.index()] += tile.duration;
        }
        occ
    }

    /// Structural checks: contiguity and exact coverage of one period.
    pub fn validate(&self) -> Result<()> {
        if self.tiles.is_empty() {
            return Err(Error::InvalidInput {
                message: "schedule has no tiles".into(),
            });
        }
        let mut t = 0.0;
        for tile in &self.tiles {
            if (tile.start - t).abs() > 1e-12 * self.period {
                return Err(Error::InvalidInput {
                    message: format!(
                        "tile starting at {} s is not contiguous with previous end {} s",
                        tile.start, t
                    ),
                });
            }
            if tile.duration <= 0.0 {
                return Err(Error::InvalidInput {
                    message: format!(
                        "tile at {} s has non-positive duration {}",
                        tile.start, tile.duration
                    ),
                });
            }
            t = tile.end();
        }
        if (t - self.period).abs() > 1e-12 * self.period {
            return Err(Error::InvalidInput {
                message: format!(
                    "tiles sum to {t} s, expected one period of {} s",
                    self.period
                ),
            });
        }
        Ok(())
    }
}

/// Builds the interleaved schedule for one period.
///
/// Fails with an unsupported-operating-region error for `duty <= 0.5`
/// (the Mode I interval would have zero or negative length) and for
/// `duty >= 1`.
pub fn gate_schedule(duty: f64, f_sw: f64) -> Result<GateSchedule> {
    if !f_sw.is_finite() || f_sw <= 0.0 {
        return Err(Error::InvalidConfig {
            field: "f_sw",
            message: format!("must be finite and > 0, got {f_sw}"),
        });
    }
    if !(duty > 0.5 && duty < 1.0) {
        return Err(Error::UnsupportedOperatingRegion {
            message: format!(
                "three-mode operation requires 0.5 < duty < 1 (a both-switches-on interval must exist), got {duty}"
            ),
        });
    }
    let period = 1.0 / f_sw;
    let overlap = (duty - 0.5) * period; // per-half both-on interval
    let half = 0.5 * period;
    let s1_off = duty * period;
    // The final duration is closed against the period so the tiles sum to T
    // exactly in floating point.
    let tiles = vec![
        Tile {
            mode: Mode::I,
            start: 0.0,
            duration: overlap,
        },
        Tile {
            mode: Mode::III,
            start: overlap,
            duration: half - overlap,
        },
        Tile {
            mode: Mode::I,
            start: half,
            duration: s1_off - half,
        },
        Tile {
            mode: Mode::II,
            start: s1_off,
            duration: period - s1_off,
        },
    ];
    let schedule = GateSchedule { period, tiles };
    schedule.validate()?;
    Ok(schedule)
}
