//! Score data model and quantization onto the metric grid.
//!
//! A [`Score`] lives in MIDI ticks. [`quantize`] maps it onto a [`GridSpec`]
//! and yields a [`QuantizedScore`] whose onsets and durations are counted in
//! grid units. Both keep their notes in canonical order: by onset, then
//! track, then pitch, then duration.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Time-signature denominators accepted anywhere in the pipeline.
pub const SUPPORTED_DENOMINATORS: [u8; 5] = [1, 2, 4, 8, 16];

/// A single note: MIDI pitch, onset, duration and source track.
///
/// Onset and duration are in ticks for a [`Score`] and in grid units for a
/// [`QuantizedScore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NoteEvent {
    pub pitch: u8,
    pub onset: u64,
    pub duration: u64,
    #[serde(default)]
    pub track: u32,
}

impl NoteEvent {
    pub fn new(pitch: u8, onset: u64, duration: u64, track: u32) -> Self {
        NoteEvent {
            pitch,
            onset,
            duration,
            track,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pitch > 127 {
            return Err(Error::Range(format!("pitch {} outside 0..=127", self.pitch)));
        }
        if self.duration == 0 {
            return Err(Error::Range(format!(
                "note at onset {} has zero duration",
                self.onset
            )));
        }
        Ok(())
    }
}

impl Ord for NoteEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.onset, self.track, self.pitch, self.duration).cmp(&(
            other.onset,
            other.track,
            other.pitch,
            other.duration,
        ))
    }
}

impl PartialOrd for NoteEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A time signature taking effect at `start` (ticks or grid units,
/// matching the enclosing score).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeSignature {
    pub start: u64,
    pub numerator: u8,
    pub denominator: u8,
}

impl TimeSignature {
    pub fn new(start: u64, numerator: u8, denominator: u8) -> Self {
        TimeSignature {
            start,
            numerator,
            denominator,
        }
    }

    pub fn common_time() -> Self {
        TimeSignature::new(0, 4, 4)
    }

    fn validate(&self) -> Result<()> {
        if self.numerator == 0 {
            return Err(Error::Parse("time signature numerator is zero".into()));
        }
        if !SUPPORTED_DENOMINATORS.contains(&self.denominator) {
            return Err(Error::Parse(format!(
                "unsupported time signature denominator {}",
                self.denominator
            )));
        }
        Ok(())
    }
}

fn validate_time_signatures(sigs: &[TimeSignature]) -> Result<()> {
    let first = sigs
        .first()
        .ok_or_else(|| Error::Parse("score has no time signature".into()))?;
    if first.start != 0 {
        return Err(Error::Parse("first time signature must start at 0".into()));
    }
    for ts in sigs {
        ts.validate()?;
    }
    if sigs.windows(2).any(|w| w[0].start >= w[1].start) {
        return Err(Error::Parse(
            "time signatures must be strictly ordered by start".into(),
        ));
    }
    Ok(())
}

/// A score in MIDI ticks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Score {
    pub ticks_per_quarter: u32,
    pub time_signatures: Vec<TimeSignature>,
    pub notes: Vec<NoteEvent>,
}

impl Score {
    /// Builds a validated score and puts its notes in canonical order.
    pub fn new(
        ticks_per_quarter: u32,
        time_signatures: Vec<TimeSignature>,
        mut notes: Vec<NoteEvent>,
    ) -> Result<Self> {
        if ticks_per_quarter == 0 {
            return Err(Error::Parse("ticks per quarter must be positive".into()));
        }
        validate_time_signatures(&time_signatures)?;
        for n in &notes {
            n.validate()?;
        }
        notes.sort();
        Ok(Score {
            ticks_per_quarter,
            time_signatures,
            notes,
        })
    }

    /// Re-checks every invariant, e.g. after deserializing from JSON.
    pub fn validate(&self) -> Result<()> {
        let rebuilt = Score::new(
            self.ticks_per_quarter,
            self.time_signatures.clone(),
            self.notes.clone(),
        )?;
        if rebuilt.notes != self.notes {
            return Err(Error::Parse("notes are not in canonical order".into()));
        }
        Ok(())
    }
}

/// Resolution of the metric grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    /// Grid positions per quarter note.
    pub subdivisions_per_beat: u32,
    /// Longest representable note, in 4/4 bars.
    pub max_duration_bars: u32,
    /// Longest supported bar, in quarter notes.
    pub max_bar_quarters: u32,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            subdivisions_per_beat: 4,
            max_duration_bars: 4,
            max_bar_quarters: 8,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.subdivisions_per_beat == 0 {
            return Err(Error::Config("subdivisions_per_beat must be >= 1".into()));
        }
        if self.max_duration_bars == 0 {
            return Err(Error::Config("max_duration_bars must be >= 1".into()));
        }
        if self.max_bar_quarters == 0 {
            return Err(Error::Config("max_bar_quarters must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of `Position` tokens, i.e. the length of the longest bar.
    pub fn max_positions(&self) -> u32 {
        self.max_bar_quarters * self.subdivisions_per_beat
    }

    /// Largest `Duration` value.
    pub fn max_duration(&self) -> u64 {
        u64::from(self.max_duration_bars) * 4 * u64::from(self.subdivisions_per_beat)
    }

    /// Grid positions in one bar of the given meter.
    pub fn positions_per_bar(&self, numerator: u8, denominator: u8) -> Result<u32> {
        let scaled = u32::from(numerator) * self.subdivisions_per_beat * 4;
        let den = u32::from(denominator);
        if den == 0 || !scaled.is_multiple_of(den) {
            return Err(Error::Grid(format!(
                "{numerator}/{denominator} does not fill a whole number of positions at {} subdivisions per beat",
                self.subdivisions_per_beat
            )));
        }
        let positions = scaled / den;
        if positions == 0 || positions > self.max_positions() {
            return Err(Error::Grid(format!(
                "{numerator}/{denominator} bar has {positions} positions, supported range is 1..={}",
                self.max_positions()
            )));
        }
        Ok(positions)
    }
}

/// A score whose onsets and durations are counted in grid units.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizedScore {
    pub grid: GridSpec,
    pub time_signatures: Vec<TimeSignature>,
    pub notes: Vec<NoteEvent>,
}

impl QuantizedScore {
    /// Builds a validated quantized score in canonical order.
    pub fn new(
        grid: GridSpec,
        time_signatures: Vec<TimeSignature>,
        mut notes: Vec<NoteEvent>,
    ) -> Result<Self> {
        grid.validate()?;
        validate_time_signatures(&time_signatures)?;
        for ts in &time_signatures {
            grid.positions_per_bar(ts.numerator, ts.denominator)?;
        }
        let max = grid.max_duration();
        for n in &notes {
            n.validate()?;
            if n.duration > max {
                return Err(Error::Range(format!(
                    "duration {} exceeds grid maximum {max}",
                    n.duration
                )));
            }
        }
        notes.sort();
        Ok(QuantizedScore {
            grid,
            time_signatures,
            notes,
        })
    }

    /// Back to a tick-based score with one tick per grid unit.
    pub fn to_ticks(&self) -> Score {
        Score {
            ticks_per_quarter: self.grid.subdivisions_per_beat,
            time_signatures: self.time_signatures.clone(),
            notes: self.notes.clone(),
        }
    }

    pub fn layout(&self) -> Result<BarLayout> {
        BarLayout::new(&self.time_signatures, &self.grid)
    }

    pub fn tracks(&self) -> Vec<u32> {
        let mut tracks: Vec<u32> = self.notes.iter().map(|n| n.track).collect();
        tracks.sort_unstable();
        tracks.dedup();
        tracks
    }
}

/// `value * subdivisions / tpq`, rounded to nearest with ties going up.
fn ticks_to_grid(value: u64, subdivisions: u32, tpq: u32) -> u64 {
    let num = u128::from(value) * u128::from(subdivisions) * 2 + u128::from(tpq);
    (num / (2 * u128::from(tpq))) as u64
}

/// Snaps onsets and durations of `score` onto `grid`.
///
/// Onsets round to the nearest grid unit (ties up). Durations round the same
/// way and are then clamped to `1..=grid.max_duration()`.
pub fn quantize(score: &Score, grid: &GridSpec) -> Result<QuantizedScore> {
    grid.validate()?;
    let tpq = score.ticks_per_quarter;
    let subdiv = grid.subdivisions_per_beat;

    let mut time_signatures: Vec<TimeSignature> = Vec::with_capacity(score.time_signatures.len());
    for ts in &score.time_signatures {
        let start = ticks_to_grid(ts.start, subdiv, tpq);
        let snapped = TimeSignature::new(start, ts.numerator, ts.denominator);
        match time_signatures.last_mut() {
            // a later signature landing on the same grid unit overrides the earlier one
            Some(prev) if prev.start == start => *prev = snapped,
            _ => time_signatures.push(snapped),
        }
    }

    let max = grid.max_duration();
    let notes = score
        .notes
        .iter()
        .map(|n| {
            let onset = ticks_to_grid(n.onset, subdiv, tpq);
            let duration = ticks_to_grid(n.duration, subdiv, tpq).clamp(1, max);
            NoteEvent::new(n.pitch, onset, duration, n.track)
        })
        .collect();

    QuantizedScore::new(*grid, time_signatures, notes)
}

fn shift_pitch(pitch: u8, semitones: i32) -> Result<u8> {
    let shifted = i32::from(pitch) + semitones;
    if !(0..=127).contains(&shifted) {
        return Err(Error::Range(format!(
            "pitch {pitch} transposed by {semitones} leaves 0..=127"
        )));
    }
    Ok(shifted as u8)
}

pub(crate) fn transpose_notes(notes: &[NoteEvent], semitones: i32) -> Result<Vec<NoteEvent>> {
    notes
        .iter()
        .map(|n| {
            Ok(NoteEvent {
                pitch: shift_pitch(n.pitch, semitones)?,
                ..*n
            })
        })
        .collect()
}

/// Shifts every pitch by `semitones`.
pub fn transpose(score: &Score, semitones: i32) -> Result<Score> {
    Ok(Score {
        notes: transpose_notes(&score.notes, semitones)?,
        ..score.clone()
    })
}

/// [`transpose`] for quantized scores.
pub fn transpose_quantized(score: &QuantizedScore, semitones: i32) -> Result<QuantizedScore> {
    Ok(QuantizedScore {
        notes: transpose_notes(&score.notes, semitones)?,
        ..score.clone()
    })
}

#[derive(Debug, Clone, Copy)]
struct MeterSegment {
    start: u64,
    positions: u64,
    first_bar: u64,
}

/// Maps grid-unit onsets to `(bar, position)` pairs and back.
///
/// Each time signature opens a new bar at its start. When a signature
/// change falls mid-bar, the bar before it is truncated.
#[derive(Debug, Clone)]
pub struct BarLayout {
    segments: Vec<MeterSegment>,
}

impl BarLayout {
    pub fn new(time_signatures: &[TimeSignature], grid: &GridSpec) -> Result<Self> {
        validate_time_signatures(time_signatures)?;
        let mut segments: Vec<MeterSegment> = Vec::with_capacity(time_signatures.len());
        for ts in time_signatures {
            let positions = u64::from(grid.positions_per_bar(ts.numerator, ts.denominator)?);
            let first_bar = match segments.last() {
                Some(prev) => prev.first_bar + (ts.start - prev.start).div_ceil(prev.positions),
                None => 0,
            };
            segments.push(MeterSegment {
                start: ts.start,
                positions,
                first_bar,
            });
        }
        Ok(BarLayout { segments })
    }

    /// 4/4 throughout.
    pub fn common_time(grid: &GridSpec) -> Result<Self> {
        BarLayout::new(&[TimeSignature::common_time()], grid)
    }

    pub fn locate(&self, onset: u64) -> (u64, u64) {
        let idx = self.segments.partition_point(|s| s.start <= onset) - 1;
        let seg = self.segments[idx];
        let rel = onset - seg.start;
        (seg.first_bar + rel / seg.positions, rel % seg.positions)
    }

    /// Inverse of [`BarLayout::locate`]; `None` when `position` does not
    /// exist in `bar`.
    pub fn onset(&self, bar: u64, position: u64) -> Option<u64> {
        let idx = self.segments.partition_point(|s| s.first_bar <= bar) - 1;
        let seg = self.segments[idx];
        if position >= seg.positions {
            return None;
        }
        let onset = seg.start + (bar - seg.first_bar) * seg.positions + position;
        match self.segments.get(idx + 1) {
            Some(next) if onset >= next.start => None,
            _ => Some(onset),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn score(notes: Vec<NoteEvent>) -> Score {
        Score::new(480, vec![TimeSignature::common_time()], notes).unwrap()
    }

    #[test]
    fn onset_rounds_to_nearest_unit() {
        let q = quantize(&score(vec![NoteEvent::new(60, 479, 120, 0)]), &GridSpec::default()).unwrap();
        assert_eq!(q.notes[0].onset, 4);
    }

    #[test]
    fn short_duration_clamps_to_one_unit() {
        let q = quantize(&score(vec![NoteEvent::new(60, 0, 10, 0)]), &GridSpec::default()).unwrap();
        assert_eq!(q.notes[0].duration, 1);
    }

    #[test]
    fn ties_round_up() {
        let q = quantize(&score(vec![NoteEvent::new(60, 180, 60, 0)]), &GridSpec::default()).unwrap();
        assert_eq!(q.notes[0].onset, 2);
        assert_eq!(q.notes[0].duration, 1);
    }

    #[test]
    fn long_duration_clamps_to_maximum() {
        let q = quantize(
            &score(vec![NoteEvent::new(60, 0, 480 * 40, 0)]),
            &GridSpec::default(),
        )
        .unwrap();
        assert_eq!(q.notes[0].duration, 64);
    }

    #[test]
    fn quantize_reorders_notes_that_collapse() {
        let s = score(vec![
            NoteEvent::new(64, 0, 120, 1),
            NoteEvent::new(60, 10, 120, 0),
        ]);
        let q = quantize(&s, &GridSpec::default()).unwrap();
        assert_eq!(q.notes[0].track, 0);
        assert_eq!(q.notes[1].track, 1);
    }

    #[test]
    fn transpose_examples() {
        let s = score(vec![NoteEvent::new(60, 0, 10, 0)]);
        assert_eq!(transpose(&s, 0).unwrap(), s);
        assert_eq!(transpose(&s, 12).unwrap().notes[0].pitch, 72);
        let high = score(vec![NoteEvent::new(120, 0, 10, 0)]);
        assert!(matches!(transpose(&high, 12), Err(Error::Range(_))));
    }

    #[test]
    fn duplicate_notes_are_kept() {
        let n = NoteEvent::new(60, 0, 10, 0);
        assert_eq!(score(vec![n, n]).notes.len(), 2);
    }

    #[test]
    fn rejects_bad_time_signatures() {
        let bad_den = Score::new(480, vec![TimeSignature::new(0, 3, 3)], vec![]);
        assert!(matches!(bad_den, Err(Error::Parse(_))));
        let late = Score::new(480, vec![TimeSignature::new(10, 4, 4)], vec![]);
        assert!(matches!(late, Err(Error::Parse(_))));
        let unsorted = Score::new(
            480,
            vec![TimeSignature::new(0, 4, 4), TimeSignature::new(0, 3, 4)],
            vec![],
        );
        assert!(matches!(unsorted, Err(Error::Parse(_))));
    }

    #[test]
    fn positions_per_bar_follow_meter() {
        let g = GridSpec::default();
        assert_eq!(g.positions_per_bar(4, 4).unwrap(), 16);
        assert_eq!(g.positions_per_bar(3, 4).unwrap(), 12);
        assert_eq!(g.positions_per_bar(6, 8).unwrap(), 12);
        assert_eq!(g.positions_per_bar(5, 16).unwrap(), 5);
        assert!(g.positions_per_bar(9, 4).is_err());
        let coarse = GridSpec {
            subdivisions_per_beat: 1,
            ..g
        };
        assert!(coarse.positions_per_bar(3, 8).is_err());
    }

    #[test]
    fn layout_handles_meter_changes() {
        let g = GridSpec::default();
        // 4/4 for one bar, then 3/4 starting mid-way through bar 1
        let sigs = [TimeSignature::new(0, 4, 4), TimeSignature::new(24, 3, 4)];
        let layout = BarLayout::new(&sigs, &g).unwrap();
        assert_eq!(layout.locate(0), (0, 0));
        assert_eq!(layout.locate(17), (1, 1));
        assert_eq!(layout.locate(24), (2, 0));
        assert_eq!(layout.locate(36), (3, 0));
        assert_eq!(layout.onset(1, 8), None);
        assert_eq!(layout.onset(2, 11), Some(35));
        assert_eq!(layout.onset(0, 16), None);
        for onset in 0..100 {
            let (bar, pos) = layout.locate(onset);
            assert_eq!(layout.onset(bar, pos), Some(onset));
        }
    }
}
