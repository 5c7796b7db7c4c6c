//! Drive schedules: piecewise-constant pulse windows modulating the
//! tunneling amplitude as `T(t) = T⁰ [1 + A Σ_k cos(2π ω_k t + δ_k)]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::TWO_PI;

/// Absolute tolerance (ns) for segment contiguity.
pub const EDGE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyComponent {
    /// GHz.
    pub omega: f64,
    /// Radians, taken as given.
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSegment {
    pub t_start: f64,
    pub t_end: f64,
    /// 0.0 (no driving) or 1.0.
    pub toggle: f64,
    pub frequencies: Vec<FrequencyComponent>,
    /// Multiplies the electrode drive amplitude.
    pub amplitude_scale: f64,
}

impl PulseSegment {
    pub fn new(t_start: f64, t_end: f64, omega: f64, phase: f64) -> Self {
        PulseSegment {
            t_start,
            t_end,
            toggle: 1.0,
            frequencies: vec![FrequencyComponent { omega, phase }],
            amplitude_scale: 1.0,
        }
    }

    /// Undriven window. It keeps a frequency entry so it can be written in
    /// the pulse file format.
    pub fn free(t_start: f64, t_end: f64, omega: f64) -> Self {
        PulseSegment {
            toggle: 0.0,
            ..PulseSegment::new(t_start, t_end, omega, 0.0)
        }
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    pub fn is_driven(&self) -> bool {
        self.toggle == 1.0
    }

    /// Amplitude-level factor `1 + A Σ cos(2π ω t + δ)`; exactly 1 when the
    /// toggle is off. No bounds check on `t`.
    pub fn drive_factor(&self, amplitude: f64, t: f64) -> f64 {
        if !self.is_driven() {
            return 1.0;
        }
        let a = amplitude * self.amplitude_scale;
        if a == 0.0 {
            return 1.0;
        }
        let sum: f64 = self
            .frequencies
            .iter()
            .map(|f| (TWO_PI * f.omega * t + f.phase).cos())
            .sum();
        1.0 + a * sum
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseProgram {
    pub t_initial: f64,
    pub t_final: f64,
    /// Number of frequency/phase entries per pulse in the file format.
    pub max_frequencies: usize,
    pub segments: Vec<PulseSegment>,
}

impl PulseProgram {
    /// Builds and validates a program; `max_frequencies` is the largest
    /// component count among the segments.
    pub fn new(t_initial: f64, t_final: f64, segments: Vec<PulseSegment>) -> Result<Self> {
        let max_frequencies = segments.iter().map(|s| s.frequencies.len()).max().unwrap_or(1).max(1);
        let p = PulseProgram {
            t_initial,
            t_final,
            max_frequencies,
            segments,
        };
        p.validate()?;
        Ok(p)
    }

    /// Single undriven window.
    pub fn free_evolution(t_initial: f64, t_final: f64) -> Result<Self> {
        Self::new(t_initial, t_final, vec![PulseSegment::free(t_initial, t_final, 0.0)])
    }

    /// Single driven window at one frequency.
    pub fn continuous(t_initial: f64, t_final: f64, omega: f64, phase: f64) -> Result<Self> {
        Self::new(t_initial, t_final, vec![PulseSegment::new(t_initial, t_final, omega, phase)])
    }

    pub fn validate(&self) -> Result<()> {
        if !self.t_initial.is_finite() || !self.t_final.is_finite() || self.t_final <= self.t_initial {
            return Err(Error::validation(format!(
                "program interval [{}, {}] is empty or not finite",
                self.t_initial, self.t_final
            )));
        }
        if self.segments.is_empty() {
            return Err(Error::validation("program has no pulses"));
        }
        let mut cursor = self.t_initial;
        for (k, s) in self.segments.iter().enumerate() {
            let index = k + 1;
            let err = |message: String| Error::Schedule { index, message };
            if !s.t_start.is_finite() || !s.t_end.is_finite() {
                return Err(err("non-finite time".into()));
            }
            if s.t_end <= s.t_start {
                return Err(err(format!(
                    "non-positive duration: [{}, {}]",
                    s.t_start, s.t_end
                )));
            }
            if s.t_start < cursor - EDGE_TOLERANCE {
                return Err(err(format!(
                    "overlaps the previous window: starts at {} before {}",
                    s.t_start, cursor
                )));
            }
            if s.t_start > cursor + EDGE_TOLERANCE {
                return Err(err(format!("gap: starts at {} but previous window ends at {}", s.t_start, cursor)));
            }
            if s.toggle != 0.0 && s.toggle != 1.0 {
                return Err(err(format!("toggle must be 0.0 or 1.0, found {}", s.toggle)));
            }
            if s.frequencies.len() > self.max_frequencies {
                return Err(err(format!(
                    "{} frequencies exceed the declared maximum of {}",
                    s.frequencies.len(),
                    self.max_frequencies
                )));
            }
            if s.is_driven() && s.frequencies.is_empty() {
                return Err(err("driven pulse without a frequency".into()));
            }
            if s.frequencies.iter().any(|f| !f.omega.is_finite() || !f.phase.is_finite()) {
                return Err(err("non-finite frequency or phase".into()));
            }
            if !s.amplitude_scale.is_finite() {
                return Err(err("non-finite amplitude scale".into()));
            }
            cursor = s.t_end;
        }
        if (cursor - self.t_final).abs() > EDGE_TOLERANCE {
            return Err(Error::Schedule {
                index: self.segments.len(),
                message: format!("last window ends at {cursor} but the program ends at {}", self.t_final),
            });
        }
        Ok(())
    }

    /// Index of the window containing `t`; the right edge of the program
    /// belongs to the last window, interior edges to the later window.
    pub fn segment_index_at(&self, t: f64) -> Result<usize> {
        if !(t >= self.t_initial && t <= self.t_final) {
            return Err(Error::OutOfRange {
                t,
                start: self.t_initial,
                end: self.t_final,
            });
        }
        let k = self.segments.partition_point(|s| s.t_end <= t);
        Ok(k.min(self.segments.len() - 1))
    }

    pub fn drive_factor(&self, amplitude: f64, t: f64) -> Result<f64> {
        let k = self.segment_index_at(t)?;
        Ok(self.segments[k].drive_factor(amplitude, t))
    }

    /// Shifts every time by `offset`.
    pub fn shifted(&self, offset: f64) -> Self {
        let mut p = self.clone();
        p.t_initial += offset;
        p.t_final += offset;
        for s in &mut p.segments {
            s.t_start += offset;
            s.t_end += offset;
        }
        p
    }
}

/// Free-function form of [`PulseProgram::drive_factor`].
pub fn drive_factor(program: &PulseProgram, amplitude: f64, t: f64) -> Result<f64> {
    program.drive_factor(amplitude, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn toggle_off_is_unity() {
        let p = PulseProgram::free_evolution(0.0, 10.0).unwrap();
        for t in [0.0, 3.3, 10.0] {
            assert_eq!(p.drive_factor(0.5, t).unwrap(), 1.0);
        }
    }

    #[test]
    fn phase_zero_peak() {
        let p = PulseProgram::continuous(0.0, 10.0, 2.0, 0.0).unwrap();
        assert_eq!(p.drive_factor(0.5, 0.0).unwrap(), 1.5);
        let p = PulseProgram::continuous(0.0, 10.0, 0.25, -std::f64::consts::FRAC_PI_2).unwrap();
        assert!((p.drive_factor(0.5, 1.0).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn two_frequencies_add() {
        let mut s = PulseSegment::new(0.0, 1.0, 3.0, 0.0);
        s.frequencies.push(FrequencyComponent { omega: 5.0, phase: 0.0 });
        let p = PulseProgram::new(0.0, 1.0, vec![s]).unwrap();
        assert_eq!(p.max_frequencies, 2);
        assert_eq!(p.drive_factor(0.5, 0.0).unwrap(), 2.0);
    }

    #[test]
    fn out_of_range() {
        let p = PulseProgram::free_evolution(0.0, 10.0).unwrap();
        assert!(matches!(p.drive_factor(0.5, 10.5), Err(Error::OutOfRange { .. })));
        assert!(p.drive_factor(0.5, -1e-3).is_err());
    }

    #[test]
    fn overlap_gap_and_negative_duration() {
        let overlap = PulseProgram::new(
            0.0,
            10.0,
            vec![PulseSegment::new(0.0, 5.0, 1.0, 0.0), PulseSegment::new(4.0, 10.0, 1.0, 0.0)],
        );
        assert!(matches!(overlap, Err(Error::Schedule { index: 2, .. })));
        let gap = PulseProgram::new(
            0.0,
            10.0,
            vec![PulseSegment::new(0.0, 5.0, 1.0, 0.0), PulseSegment::new(6.0, 10.0, 1.0, 0.0)],
        );
        assert!(matches!(gap, Err(Error::Schedule { index: 2, .. })));
        let negative = PulseProgram::new(0.0, 10.0, vec![PulseSegment::new(0.0, -5.0, 1.0, 0.0)]);
        assert!(matches!(negative, Err(Error::Schedule { index: 1, .. })));
        let short = PulseProgram::new(0.0, 10.0, vec![PulseSegment::new(0.0, 9.0, 1.0, 0.0)]);
        assert!(short.is_err());
        let mut bad_toggle = PulseSegment::new(0.0, 10.0, 1.0, 0.0);
        bad_toggle.toggle = 0.5;
        assert!(PulseProgram::new(0.0, 10.0, vec![bad_toggle]).is_err());
    }

    #[test]
    fn interior_edge_belongs_to_later_window() {
        let p = PulseProgram::new(
            0.0,
            10.0,
            vec![PulseSegment::new(0.0, 5.0, 1.0, 0.0), PulseSegment::free(5.0, 10.0, 1.0)],
        )
        .unwrap();
        assert_eq!(p.segment_index_at(5.0).unwrap(), 1);
        assert_eq!(p.segment_index_at(10.0).unwrap(), 1);
        assert_eq!(p.segment_index_at(4.999).unwrap(), 0);
    }

    proptest! {
        #[test]
        fn bounded_by_amplitude_sum(
            a in 0.0f64..2.0,
            omegas in prop::collection::vec((0.1f64..40.0, -7.0f64..7.0), 1..4),
            t in 0.0f64..50.0,
        ) {
            let seg = PulseSegment {
                t_start: 0.0,
                t_end: 50.0,
                toggle: 1.0,
                frequencies: omegas.iter().map(|&(omega, phase)| FrequencyComponent { omega, phase }).collect(),
                amplitude_scale: 1.0,
            };
            let n = seg.frequencies.len() as f64;
            let p = PulseProgram::new(0.0, 50.0, vec![seg]).unwrap();
            let f = p.drive_factor(a, t).unwrap();
            prop_assert!(f >= 1.0 - a * n - 1e-12 && f <= 1.0 + a * n + 1e-12);
        }

        #[test]
        fn partitions_accepted_and_perturbations_rejected(
            cuts in prop::collection::vec(0.01f64..1.0, 1..6),
            shift in prop::sample::select(vec![-0.01f64, 0.01]),
            which in 0usize..6,
        ) {
            let mut edges = vec![0.0];
            for c in &cuts {
                let last = *edges.last().unwrap();
                edges.push(last + c);
            }
            let segs: Vec<PulseSegment> = edges.windows(2).map(|w| PulseSegment::new(w[0], w[1], 1.0, 0.0)).collect();
            let t_final = *edges.last().unwrap();
            prop_assert!(PulseProgram::new(0.0, t_final, segs.clone()).is_ok());
            let mut broken = segs;
            let k = which % broken.len();
            broken[k].t_start += shift;
            prop_assert!(PulseProgram::new(0.0, t_final, broken).is_err());
        }
    }
}
