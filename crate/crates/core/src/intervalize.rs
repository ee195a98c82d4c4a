//! Partition of a score by its reference line, and conversion of absolute
//! pitches into interval payloads.
//!
//! Reference note `j` governs every note whose onset lies in
//! `[t_ref_j, t_ref_{j+1})`. Reference notes are encoded absolutely or as a
//! horizontal interval to reference note `j - 1`. The first reference note
//! then has no predecessor and is dropped. Non-reference notes are encoded
//! absolutely or as a vertical interval to their governing reference pitch.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reference::ReferenceStream;
use crate::score::{NoteEvent, QuantizedScore};
use crate::strategy::{NonRefEncoding, RefEncoding, StrategyConfig};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub reference: NoteEvent,
    pub companions: Vec<NoteEvent>,
}

impl Segment {
    pub fn len(&self) -> usize {
        1 + self.companions.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub segments: Vec<Segment>,
    /// Reference events are not score notes.
    pub external: bool,
    /// Notes sounding before the first reference onset, folded into the
    /// first segment.
    pub pre_first: usize,
}

impl Partition {
    /// Number of notes across all segments, reference events included.
    pub fn note_count(&self) -> usize {
        self.segments.iter().map(Segment::len).sum()
    }
}

/// Splits `score` into one segment per reference event.
///
/// For in-score references every reference event must match a distinct
/// score note; for external ones every score note becomes a companion.
pub fn partition(score: &QuantizedScore, reference: &ReferenceStream) -> Result<Partition> {
    if reference.is_empty() {
        return Err(Error::EmptyInput("reference stream is empty".into()));
    }
    if let Some(w) = reference.events.windows(2).find(|w| w[0].onset >= w[1].onset) {
        return Err(Error::Monophony(format!(
            "reference onsets must strictly increase, found {} then {}",
            w[0].onset, w[1].onset
        )));
    }

    let external = reference.is_external();
    let mut unclaimed: BTreeMap<NoteEvent, usize> = BTreeMap::new();
    if !external {
        for e in &reference.events {
            *unclaimed.entry(*e).or_default() += 1;
        }
    }

    let mut segments: Vec<Segment> = reference
        .events
        .iter()
        .map(|&reference| Segment {
            reference,
            companions: Vec::new(),
        })
        .collect();
    let mut pre_first = 0;

    for note in &score.notes {
        if let Some(count) = unclaimed.get_mut(note) {
            if *count > 0 {
                *count -= 1;
                continue;
            }
        }
        let governing = reference.events.partition_point(|r| r.onset <= note.onset);
        let idx = if governing == 0 {
            pre_first += 1;
            0
        } else {
            governing - 1
        };
        segments[idx].companions.push(*note);
    }

    if let Some((missing, _)) = unclaimed.iter().find(|(_, &count)| count > 0) {
        return Err(Error::InvalidReference(format!(
            "reference event {missing:?} is not a note of the score"
        )));
    }
    if pre_first > 0 {
        log::debug!("{pre_first} note(s) precede the first reference event");
    }

    Ok(Partition {
        segments,
        external,
        pre_first,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Payload {
    Absolute(u8),
    Vertical(i32),
    Horizontal(i32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedEvent {
    pub payload: Payload,
    /// The note this payload encodes.
    pub note: NoteEvent,
    pub is_reference: bool,
    /// False for events of an external reference line.
    pub from_score: bool,
}

impl EncodedEvent {
    fn emission_key(&self) -> (u64, bool, u8, u64, u32) {
        (
            self.note.onset,
            !self.is_reference,
            self.note.pitch,
            self.note.duration,
            self.note.track,
        )
    }
}

/// Encoded notes in emission order: by onset, the reference event first,
/// then ascending pitch, duration and track.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EncodedEvents {
    pub events: Vec<EncodedEvent>,
    /// Intervals that hit the clamp.
    pub saturated: usize,
    pub pre_first: usize,
    /// Reference note removed by horizontal encoding.
    pub dropped: Option<NoteEvent>,
}

impl EncodedEvents {
    fn sort(&mut self) {
        self.events.sort_by_key(EncodedEvent::emission_key);
    }

    pub fn count_where(&self, pred: impl Fn(&Payload) -> bool) -> usize {
        self.events.iter().filter(|e| pred(&e.payload)).count()
    }
}

fn saturate(interval: i32, clamp: u32, saturated: &mut usize) -> i32 {
    let c = clamp as i32;
    if interval.abs() > c {
        *saturated += 1;
        interval.clamp(-c, c)
    } else {
        interval
    }
}

/// Encodes every note of `part` under `cfg`.
pub fn intervalize(part: &Partition, cfg: &StrategyConfig) -> EncodedEvents {
    let mut out = EncodedEvents {
        pre_first: part.pre_first,
        ..EncodedEvents::default()
    };
    let mut previous_ref: Option<u8> = None;

    for segment in &part.segments {
        let r = segment.reference;
        let ref_payload = match (cfg.i_ref, previous_ref) {
            (RefEncoding::Absolute, _) => Some(Payload::Absolute(r.pitch)),
            (RefEncoding::Hpi, Some(prev)) => Some(Payload::Horizontal(saturate(
                i32::from(r.pitch) - i32::from(prev),
                cfg.clamp,
                &mut out.saturated,
            ))),
            (RefEncoding::Hpi, None) => None,
        };
        match ref_payload {
            Some(payload) => out.events.push(EncodedEvent {
                payload,
                note: r,
                is_reference: true,
                from_score: !part.external,
            }),
            None => out.dropped = Some(r),
        }
        previous_ref = Some(r.pitch);

        for c in &segment.companions {
            let payload = match cfg.i_nonref {
                NonRefEncoding::Absolute => Payload::Absolute(c.pitch),
                NonRefEncoding::Vpi => Payload::Vertical(saturate(
                    i32::from(c.pitch) - i32::from(r.pitch),
                    cfg.clamp,
                    &mut out.saturated,
                )),
            };
            out.events.push(EncodedEvent {
                payload,
                note: *c,
                is_reference: false,
                from_score: true,
            });
        }
    }

    if out.saturated > 0 {
        log::warn!("{} interval(s) saturated at +/-{}", out.saturated, cfg.clamp);
    }
    out.sort();
    out
}

/// Absolute encoding with no reference line: every note is a plain pitch.
pub fn encode_absolute(score: &QuantizedScore) -> EncodedEvents {
    let mut out = EncodedEvents {
        events: score
            .notes
            .iter()
            .map(|&note| EncodedEvent {
                payload: Payload::Absolute(note.pitch),
                note,
                is_reference: false,
                from_score: true,
            })
            .collect(),
        ..EncodedEvents::default()
    };
    out.sort();
    out
}

/// Splits an interval into octaves and an interval class in `0..12`, so
/// that `interval == 12 * octave + class`.
pub fn interval_class_decompose(interval: i32) -> (i32, u8) {
    (interval.div_euclid(12), interval.rem_euclid(12) as u8)
}

pub fn interval_class_compose(octave: i32, class: u8) -> i32 {
    12 * octave + i32::from(class)
}
