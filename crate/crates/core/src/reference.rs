//! Monophonic reference streams: melody track, skyline, bottom-line, or an
//! externally supplied line such as a tonic pedal.
//!
//! Extractors work per onset over whole notes: every onset time of the
//! input contributes exactly one note. Among notes sharing an onset the
//! winner is chosen by pitch (highest for the skyline, lowest for the
//! bottom-line), then by longer duration, then by lower track index.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::score::{NoteEvent, QuantizedScore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    Melody,
    Skyline,
    BottomLine,
    External,
}

impl ReferenceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ReferenceKind::Melody => "melody",
            ReferenceKind::Skyline => "skyline",
            ReferenceKind::BottomLine => "bottom_line",
            ReferenceKind::External => "external",
        }
    }
}

/// Monophonic reference line, in grid units.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceStream {
    pub kind: ReferenceKind,
    pub events: Vec<NoteEvent>,
}

impl ReferenceStream {
    /// Number of reference events.
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn is_external(&self) -> bool {
        self.kind == ReferenceKind::External
    }

    pub fn transposed(&self, semitones: i32) -> Result<Self> {
        Ok(ReferenceStream {
            kind: self.kind,
            events: crate::score::transpose_notes(&self.events, semitones)?,
        })
    }
}

/// `Greater` when `a` should win over `b` for the given pitch preference.
fn prefer(a: &NoteEvent, b: &NoteEvent, highest: bool) -> Ordering {
    let by_pitch = if highest {
        a.pitch.cmp(&b.pitch)
    } else {
        b.pitch.cmp(&a.pitch)
    };
    by_pitch
        .then(a.duration.cmp(&b.duration))
        .then(b.track.cmp(&a.track))
}

fn per_onset(notes: &[NoteEvent], highest: bool) -> Vec<NoteEvent> {
    let mut sorted: Vec<&NoteEvent> = notes.iter().collect();
    sorted.sort_by_key(|n| n.onset);
    sorted
        .chunk_by(|a, b| a.onset == b.onset)
        .map(|group| {
            // first maximal element; later duplicates are identical anyway
            let mut best = group[0];
            for n in &group[1..] {
                if prefer(n, best, highest) == Ordering::Greater {
                    best = n;
                }
            }
            *best
        })
        .collect()
}

fn non_empty(score: &QuantizedScore, what: &str) -> Result<()> {
    if score.notes.is_empty() {
        return Err(Error::EmptyInput(format!("cannot extract {what} from an empty score")));
    }
    Ok(())
}

/// Highest note at every onset.
pub fn extract_skyline(score: &QuantizedScore) -> Result<ReferenceStream> {
    non_empty(score, "a skyline")?;
    Ok(ReferenceStream {
        kind: ReferenceKind::Skyline,
        events: per_onset(&score.notes, true),
    })
}

/// Lowest note at every onset.
pub fn extract_bottomline(score: &QuantizedScore) -> Result<ReferenceStream> {
    non_empty(score, "a bottom-line")?;
    Ok(ReferenceStream {
        kind: ReferenceKind::BottomLine,
        events: per_onset(&score.notes, false),
    })
}

/// Notes of `melody_track`, reduced with the skyline rule where the track
/// itself has simultaneous onsets.
pub fn extract_melody(score: &QuantizedScore, melody_track: u32) -> Result<ReferenceStream> {
    let track_notes: Vec<NoteEvent> = score
        .notes
        .iter()
        .copied()
        .filter(|n| n.track == melody_track)
        .collect();
    if track_notes.is_empty() {
        return Err(Error::EmptyInput(format!(
            "melody track {melody_track} has no notes"
        )));
    }
    Ok(ReferenceStream {
        kind: ReferenceKind::Melody,
        events: per_onset(&track_notes, true),
    })
}

/// Checks a user-supplied reference line. Membership in the score is not
/// required.
pub fn validate_external_reference(
    events: &[NoteEvent],
    _score: &QuantizedScore,
) -> Result<ReferenceStream> {
    if events.is_empty() {
        return Err(Error::EmptyInput("external reference has no events".into()));
    }
    for e in events {
        e.validate()?;
    }
    if let Some(w) = events.windows(2).find(|w| w[0].onset >= w[1].onset) {
        return Err(Error::Monophony(format!(
            "external reference onsets must strictly increase, found {} then {}",
            w[0].onset, w[1].onset
        )));
    }
    Ok(ReferenceStream {
        kind: ReferenceKind::External,
        events: events.to_vec(),
    })
}
