//! End-to-end tokenization: quantize, extract the reference line,
//! partition, encode intervals, emit REMI tokens. And the way back.

use crate::error::{Error, Result};
use crate::intervalize::{encode_absolute, intervalize, partition, EncodedEvents, Payload};
use crate::reference::{
    extract_bottomline, extract_melody, extract_skyline, ReferenceKind, ReferenceStream,
};
use crate::remi::{emit_with_provenance, groups, validate};
use crate::score::{quantize, BarLayout, NoteEvent, QuantizedScore, Score, TimeSignature};
use crate::strategy::{NonRefEncoding, RefEncoding, StrategyConfig};
use crate::token::TokenSequence;

/// Where the reference line comes from, beyond what the strategy says.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReferenceInput<'a> {
    pub melody_track: Option<u32>,
    pub external: Option<&'a ReferenceStream>,
}

impl<'a> ReferenceInput<'a> {
    pub fn none() -> Self {
        ReferenceInput::default()
    }

    pub fn melody(track: u32) -> Self {
        ReferenceInput {
            melody_track: Some(track),
            external: None,
        }
    }

    pub fn external(reference: &'a ReferenceStream) -> Self {
        ReferenceInput {
            melody_track: None,
            external: Some(reference),
        }
    }
}

/// Everything produced while tokenizing one piece.
#[derive(Debug, Clone)]
pub struct Tokenized {
    pub quantized: QuantizedScore,
    /// `None` when the strategy ignores the reference line.
    pub reference: Option<ReferenceStream>,
    pub encoded: EncodedEvents,
    pub sequence: TokenSequence,
    /// Per token, the encoded event it belongs to.
    pub token_events: Vec<Option<usize>>,
}

impl Tokenized {
    /// Per token, the score note it encodes. `None` for scaffolding tokens
    /// and for events of an external reference.
    pub fn token_notes(&self) -> Vec<Option<NoteEvent>> {
        self.token_events
            .iter()
            .map(|owner| {
                owner
                    .map(|i| &self.encoded.events[i])
                    .filter(|e| e.from_score)
                    .map(|e| e.note)
            })
            .collect()
    }
}

/// Extracts the reference line `cfg` asks for.
pub fn extract_reference(
    score: &QuantizedScore,
    cfg: &StrategyConfig,
    input: ReferenceInput<'_>,
) -> Result<ReferenceStream> {
    match cfg.reference_kind {
        ReferenceKind::Skyline => extract_skyline(score),
        ReferenceKind::BottomLine => extract_bottomline(score),
        ReferenceKind::Melody => {
            let track = input.melody_track.ok_or_else(|| {
                Error::Config("melody reference requires a melody track".into())
            })?;
            extract_melody(score, track)
        }
        ReferenceKind::External => {
            let external = input.external.ok_or_else(|| {
                Error::Config("external reference requires a reference stream".into())
            })?;
            if !external.is_external() {
                return Err(Error::Config("supplied reference is not marked external".into()));
            }
            crate::reference::validate_external_reference(&external.events, score)
        }
    }
}

/// Tokenizes an already quantized score. `score.grid` must equal
/// `cfg.grid`.
pub fn tokenize_quantized(
    score: &QuantizedScore,
    cfg: &StrategyConfig,
    input: ReferenceInput<'_>,
) -> Result<Tokenized> {
    cfg.validate()?;
    if score.grid != cfg.grid {
        return Err(Error::Config("score grid differs from strategy grid".into()));
    }
    let (reference, encoded) = if cfg.uses_reference() {
        let reference = extract_reference(score, cfg, input)?;
        let part = partition(score, &reference)?;
        let encoded = intervalize(&part, cfg);
        (Some(reference), encoded)
    } else {
        (None, encode_absolute(score))
    };
    let layout = score.layout()?;
    let (sequence, token_events) = emit_with_provenance(&encoded, &layout, cfg)?;
    Ok(Tokenized {
        quantized: score.clone(),
        reference,
        encoded,
        sequence,
        token_events,
    })
}

pub fn tokenize_detailed(
    score: &Score,
    cfg: &StrategyConfig,
    input: ReferenceInput<'_>,
) -> Result<Tokenized> {
    cfg.validate()?;
    let quantized = quantize(score, &cfg.grid)?;
    tokenize_quantized(&quantized, cfg, input)
}

/// Tokenizes a score under `cfg`.
pub fn tokenize(
    score: &Score,
    cfg: &StrategyConfig,
    melody_track: Option<u32>,
    external_ref: Option<&ReferenceStream>,
) -> Result<TokenSequence> {
    let input = ReferenceInput {
        melody_track,
        external: external_ref,
    };
    tokenize_detailed(score, cfg, input).map(|t| t.sequence)
}

/// Track given to decoded reference notes.
pub const REFERENCE_TRACK: u32 = 0;
/// Track given to decoded non-reference notes.
pub const COMPANION_TRACK: u32 = 1;

/// Decodes tokens back into a quantized score in common time.
///
/// See [`detokenize_with_time_signatures`].
pub fn detokenize(tokens: &TokenSequence, cfg: &StrategyConfig, anchor_pitch: u8) -> Result<QuantizedScore> {
    detokenize_with_time_signatures(tokens, cfg, anchor_pitch, &[TimeSignature::common_time()])
}

/// Decodes tokens back into a quantized score laid out on
/// `time_signatures`.
///
/// Under horizontal reference encoding the first reference pitch is not
/// in the stream; `anchor_pitch` stands in for it and the first reference
/// note itself is not restored. When the strategy distinguishes reference
/// from non-reference payloads, reference notes land on
/// [`REFERENCE_TRACK`] and the rest on [`COMPANION_TRACK`]; otherwise all
/// notes land on track 0.
pub fn detokenize_with_time_signatures(
    tokens: &TokenSequence,
    cfg: &StrategyConfig,
    anchor_pitch: u8,
    time_signatures: &[TimeSignature],
) -> Result<QuantizedScore> {
    cfg.validate()?;
    if let Some(v) = validate(tokens, cfg).into_iter().next() {
        return Err(v.into());
    }
    if anchor_pitch > 127 {
        return Err(Error::Range(format!("anchor pitch {anchor_pitch} outside 0..=127")));
    }
    let layout = BarLayout::new(time_signatures, &cfg.grid)?;

    let roles = cfg.uses_reference();
    // Absolute reference pitches are learned from the stream; a horizontal
    // chain starts at the anchor.
    let mut current_ref: Option<i32> = match cfg.i_ref {
        RefEncoding::Hpi => Some(i32::from(anchor_pitch)),
        RefEncoding::Absolute => None,
    };
    let mut waiting: Vec<(usize, i32, u64, u64)> = Vec::new();
    let mut notes: Vec<NoteEvent> = Vec::new();

    let to_pitch = |value: i32, offset: usize| -> Result<u8> {
        u8::try_from(value)
            .ok()
            .filter(|p| *p <= 127)
            .ok_or_else(|| Error::Range(format!("decoded pitch {value} at token {offset} outside 0..=127")))
    };

    for g in groups(tokens)? {
        let onset = layout.onset(g.bar, g.position).ok_or_else(|| Error::Grammar {
            offset: g.offset,
            message: format!("position {} does not exist in bar {}", g.position, g.bar),
        })?;
        let (pitch, is_reference) = match g.payload {
            Payload::Absolute(p) => {
                let is_reference =
                    roles && cfg.i_ref == RefEncoding::Absolute && cfg.i_nonref == NonRefEncoding::Vpi;
                if is_reference {
                    let p = i32::from(p);
                    if current_ref.is_none() {
                        for (offset, interval, onset, duration) in waiting.drain(..) {
                            notes.push(NoteEvent::new(
                                to_pitch(p + interval, offset)?,
                                onset,
                                duration,
                                COMPANION_TRACK,
                            ));
                        }
                    }
                    current_ref = Some(p);
                }
                (p, is_reference)
            }
            Payload::Horizontal(i) => {
                let prev = current_ref.ok_or_else(|| Error::Internal("no horizontal anchor".into()))?;
                let p = prev + i;
                current_ref = Some(p);
                (to_pitch(p, g.offset)?, true)
            }
            Payload::Vertical(i) => match current_ref {
                Some(r) => (to_pitch(r + i, g.offset)?, false),
                None => {
                    waiting.push((g.offset, i, onset, g.duration));
                    continue;
                }
            },
        };
        let track = if roles && !is_reference {
            COMPANION_TRACK
        } else {
            REFERENCE_TRACK
        };
        notes.push(NoteEvent::new(pitch, onset, g.duration, track));
    }

    if let Some((offset, ..)) = waiting.first() {
        return Err(Error::Grammar {
            offset: *offset,
            message: "vertical interval with no reference pitch in the sequence".into(),
        });
    }

    QuantizedScore::new(cfg.grid, time_signatures.to_vec(), notes)
}
