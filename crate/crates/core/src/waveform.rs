//! Staircase signals: waveform levels plus switching angles on `[0, π)`.

use std::f64::consts::PI;

use crate::dynamics::TimeGrid;
use crate::error::{Result, ShmError};
use crate::penalty::LevelSet;

/// `u(t) = s_m` on `[φ_m, φ_{m+1})` with `φ_0 = 0`, `φ_{M+1} = π`.
#[derive(Debug, Clone, PartialEq)]
pub struct StaircaseSignal {
    levels: Vec<f64>,
    angles: Vec<f64>,
}

impl StaircaseSignal {
    pub fn new(levels: Vec<f64>, angles: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(ShmError::InvalidConfig("a signal needs at least one level".into()));
        }
        if angles.len() + 1 != levels.len() {
            return Err(ShmError::InvalidConfig(format!(
                "{} levels need {} switching angles, got {}",
                levels.len(),
                levels.len() - 1,
                angles.len()
            )));
        }
        if let Some(bad) = levels.iter().chain(&angles).find(|v| !v.is_finite()) {
            return Err(ShmError::InvalidConfig(format!("non-finite value {bad} in signal")));
        }
        let mut prev = 0.0;
        for &phi in &angles {
            if phi <= prev || phi >= PI {
                return Err(ShmError::InvalidConfig(format!(
                    "switching angles must satisfy 0 < φ_1 < … < φ_M < π, found {phi} after {prev}"
                )));
            }
            prev = phi;
        }
        if let Some(m) = levels.windows(2).position(|w| w[0] == w[1]) {
            return Err(ShmError::InvalidConfig(format!("levels {m} and {} are equal", m + 1)));
        }
        Ok(Self { levels, angles })
    }

    pub fn constant(level: f64) -> Self {
        Self {
            levels: vec![level],
            angles: Vec::new(),
        }
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// Number of switches `M`.
    pub fn switches(&self) -> usize {
        self.angles.len()
    }

    /// Value on `[0, π)`, right-open pieces.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(0.0..PI).contains(&t) {
            return Err(ShmError::Domain {
                value: t,
                domain: "[0, pi)",
            });
        }
        Ok(self.levels[self.angles.partition_point(|&phi| phi <= t)])
    }

    /// Samples at every grid node; the closing node `π` takes the last level.
    pub fn sample(&self, grid: &TimeGrid) -> Vec<f64> {
        grid.nodes()
            .iter()
            .map(|&t| self.levels[self.angles.partition_point(|&phi| phi <= t)])
            .collect()
    }
}

/// `s_m` for the piece containing `t`.
pub fn eval_signal(signal: &StaircaseSignal, t: f64) -> Result<f64> {
    signal.eval(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// `s_m` is not an admissible level.
    NotALevel,
    /// `s_m == s_{m+1}`.
    RepeatedLevel,
    /// An admissible level lies strictly between `s_m` and `s_{m+1}`.
    SkippedLevel,
    /// Angles not strictly increasing inside `(0, π)`.
    AngleOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StaircaseCheck {
    Valid,
    Violation { index: usize, kind: ViolationKind },
}

impl StaircaseCheck {
    pub fn is_valid(&self) -> bool {
        matches!(self, StaircaseCheck::Valid)
    }
}

const MEMBER_TOL: f64 = 1e-12;

/// Checks level membership, ordering, and that consecutive levels are
/// adjacent in `levels`.
pub fn validate_staircase(signal: &StaircaseSignal, levels: &LevelSet) -> StaircaseCheck {
    let member = |s: f64| levels.values().iter().position(|&u| (u - s).abs() <= MEMBER_TOL);
    let mut prev_angle = 0.0;
    for (m, &phi) in signal.angles.iter().enumerate() {
        if phi <= prev_angle || phi >= PI {
            return StaircaseCheck::Violation {
                index: m,
                kind: ViolationKind::AngleOrder,
            };
        }
        prev_angle = phi;
    }
    let mut prev: Option<usize> = None;
    for (m, &s) in signal.levels.iter().enumerate() {
        let Some(k) = member(s) else {
            return StaircaseCheck::Violation {
                index: m,
                kind: ViolationKind::NotALevel,
            };
        };
        if let Some(j) = prev {
            let kind = match k.abs_diff(j) {
                0 => Some(ViolationKind::RepeatedLevel),
                1 => None,
                _ => Some(ViolationKind::SkippedLevel),
            };
            if let Some(kind) = kind {
                return StaircaseCheck::Violation { index: m - 1, kind };
            }
        }
        prev = Some(k);
    }
    StaircaseCheck::Valid
}

/// How much of a sampled control was rewritten by dwell merging.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MergeReport {
    pub merged_intervals: usize,
    /// Total length (radians) of intervals whose level was replaced.
    pub merged_duration: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub signal: StaircaseSignal,
    pub merges: MergeReport,
}

#[derive(Debug, Clone, Copy)]
struct Run {
    level: usize,
    start: f64,
}

/// Converts grid samples into a staircase signal.
///
/// Samples are snapped to the nearest level. A switch between nodes `t_{i-1}`
/// and `t_i` is placed at their midpoint. Intervals shorter than `min_dwell`
/// are merged, shortest first: between two equal levels the interval is
/// dropped and its neighbors fused, otherwise it is absorbed by the longer
/// neighbor.
pub fn extract(u_samples: &[f64], grid: &TimeGrid, levels: &LevelSet, min_dwell: f64) -> Result<Extraction> {
    grid.check_samples(u_samples)?;
    let half_gap = 0.5 * levels.gap();
    let values = levels.values();

    let mut runs: Vec<Run> = Vec::new();
    for (i, (&u, &t)) in u_samples.iter().zip(grid.nodes()).enumerate() {
        let k = levels.nearest_index(u);
        if !((u - values[k]).abs() <= half_gap) {
            return Err(ShmError::Extraction { index: i, value: u });
        }
        match runs.last() {
            Some(last) if last.level == k => {}
            Some(_) => runs.push(Run {
                level: k,
                start: 0.5 * (grid.nodes()[i - 1] + t),
            }),
            None => runs.push(Run { level: k, start: 0.0 }),
        }
    }

    let mut merges = MergeReport::default();
    let duration = |runs: &[Run], j: usize| runs.get(j + 1).map_or(PI, |r| r.start) - runs[j].start;
    while runs.len() > 1 {
        let (j, shortest) = (0..runs.len())
            .map(|j| (j, duration(&runs, j)))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
        if shortest >= min_dwell {
            break;
        }
        merges.merged_intervals += 1;
        merges.merged_duration += shortest;
        let last = runs.len() - 1;
        if j == 0 {
            runs.remove(0);
            runs[0].start = 0.0;
        } else if j == last {
            runs.pop();
        } else if runs[j - 1].level == runs[j + 1].level {
            runs.drain(j..=j + 1);
        } else if duration(&runs, j - 1) >= duration(&runs, j + 1) {
            runs.remove(j);
        } else {
            let start = runs[j].start;
            runs.remove(j);
            runs[j].start = start;
        }
    }

    let signal = StaircaseSignal {
        levels: runs.iter().map(|r| values[r.level]).collect(),
        angles: runs.iter().skip(1).map(|r| r.start).collect(),
    };
    match validate_staircase(&signal, levels) {
        StaircaseCheck::Valid => Ok(Extraction { signal, merges }),
        StaircaseCheck::Violation { index, .. } => Err(ShmError::Staircase { index }),
    }
}
