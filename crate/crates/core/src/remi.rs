//! REMI scaffolding around pitch payloads.
//!
//! Grammar, for the velocity-free score variant:
//!
//! ```text
//! sequence := BOS? bar* (EOS PAD*)? PAD*
//! bar      := Bar (Position group+)*
//! group    := payload Duration
//! payload  := Pitch | VPI | HPI | VOct VIC | HOct HIC
//! ```
//!
//! Every bar up to the last occupied one emits a `Bar` token, empty or not.
//! Positions strictly increase within a bar.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intervalize::{interval_class_decompose, EncodedEvents, Payload};
use crate::score::BarLayout;
use crate::strategy::{IntervalForm, NonRefEncoding, RefEncoding, StrategyConfig};
use crate::token::{Token, TokenSequence};

/// Token group of a single payload.
pub fn payload_tokens(payload: Payload, form: IntervalForm) -> Vec<Token> {
    match (payload, form) {
        (Payload::Absolute(p), _) => vec![Token::Pitch(p)],
        (Payload::Vertical(i), IntervalForm::PlainInterval) => vec![Token::Vpi(i)],
        (Payload::Horizontal(i), IntervalForm::PlainInterval) => vec![Token::Hpi(i)],
        (Payload::Vertical(i), IntervalForm::OctavePlusClass) => {
            let (o, c) = interval_class_decompose(i);
            vec![Token::VOct(o), Token::Vic(c)]
        }
        (Payload::Horizontal(i), IntervalForm::OctavePlusClass) => {
            let (o, c) = interval_class_decompose(i);
            vec![Token::HOct(o), Token::Hic(c)]
        }
    }
}

/// Lays out encoded events as a REMI token sequence.
///
/// Also returns, for every token, the index of the encoded event it belongs
/// to (`None` for `Bar` and `Position`).
pub fn emit_with_provenance(
    encoded: &EncodedEvents,
    layout: &BarLayout,
    cfg: &StrategyConfig,
) -> Result<(TokenSequence, Vec<Option<usize>>)> {
    let max_positions = u64::from(cfg.grid.max_positions());
    let mut tokens = Vec::with_capacity(encoded.events.len() * 3);
    let mut owners = Vec::with_capacity(encoded.events.len() * 3);
    let mut bars_open: u64 = 0;
    let mut current: Option<(u64, u64)> = None;

    for (idx, event) in encoded.events.iter().enumerate() {
        let (bar, position) = layout.locate(event.note.onset);
        if position >= max_positions {
            return Err(Error::Internal(format!(
                "position {position} outside bar of {max_positions} positions"
            )));
        }
        if let Some(prev) = current {
            if (bar, position) < prev {
                return Err(Error::Internal("encoded events are not in onset order".into()));
            }
        }
        while bars_open <= bar {
            tokens.push(Token::Bar);
            owners.push(None);
            bars_open += 1;
        }
        if current != Some((bar, position)) {
            tokens.push(Token::Position(position as u32));
            owners.push(None);
            current = Some((bar, position));
        }
        for t in payload_tokens(event.payload, cfg.interval_form) {
            tokens.push(t);
            owners.push(Some(idx));
        }
        let duration = u32::try_from(event.note.duration)
            .map_err(|_| Error::Internal("duration overflow".into()))?;
        tokens.push(Token::Duration(duration));
        owners.push(Some(idx));
    }

    Ok((TokenSequence::new(tokens, cfg.fingerprint()), owners))
}

pub fn emit(encoded: &EncodedEvents, layout: &BarLayout, cfg: &StrategyConfig) -> Result<TokenSequence> {
    emit_with_provenance(encoded, layout, cfg).map(|(seq, _)| seq)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrammarViolation {
    /// Index of the offending token; the sequence length for violations
    /// detected at the end.
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for GrammarViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "token {}: {}", self.offset, self.message)
    }
}

impl From<GrammarViolation> for Error {
    fn from(v: GrammarViolation) -> Self {
        Error::Grammar {
            offset: v.offset,
            message: v.message,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Expect {
    Free,
    Duration,
    VerticalClass,
    HorizontalClass,
}

/// Which payload tokens `cfg` can produce.
struct Allowed {
    pitch: bool,
    vpi: bool,
    hpi: bool,
    voct: bool,
    hoct: bool,
    octaves: (i32, i32),
    clamp: i32,
}

impl Allowed {
    fn new(cfg: &StrategyConfig) -> Self {
        let plain = cfg.interval_form == IntervalForm::PlainInterval;
        let vertical = cfg.i_nonref == NonRefEncoding::Vpi;
        let horizontal = cfg.i_ref == RefEncoding::Hpi;
        Allowed {
            pitch: cfg.has_absolute_payload(),
            vpi: vertical && plain,
            hpi: horizontal && plain,
            voct: vertical && !plain,
            hoct: horizontal && !plain,
            octaves: cfg.octave_range(),
            clamp: cfg.clamp as i32,
        }
    }

    fn check(&self, token: &Token) -> Option<String> {
        let (allowed, in_range) = match *token {
            Token::Pitch(p) => (self.pitch, p <= 127),
            Token::Vpi(i) => (self.vpi, i.abs() <= self.clamp),
            Token::Hpi(i) => (self.hpi, i.abs() <= self.clamp),
            Token::VOct(o) => (self.voct, (self.octaves.0..=self.octaves.1).contains(&o)),
            Token::HOct(o) => (self.hoct, (self.octaves.0..=self.octaves.1).contains(&o)),
            Token::Vic(c) => (self.voct, c < 12),
            Token::Hic(c) => (self.hoct, c < 12),
            _ => (true, true),
        };
        if !allowed {
            Some(format!("{token} is not produced by this strategy"))
        } else if !in_range {
            Some(format!("{token} is out of range"))
        } else {
            None
        }
    }
}

/// Checks `seq` against the REMI grammar and the token ranges of `cfg`.
/// Returns every violation found; an empty list means the sequence is
/// well-formed.
pub fn validate(seq: &TokenSequence, cfg: &StrategyConfig) -> Vec<GrammarViolation> {
    let mut out = Vec::new();
    let mut flag = |offset: usize, message: String| out.push(GrammarViolation { offset, message });

    let expected = cfg.fingerprint();
    if seq.config_fingerprint != expected {
        flag(
            0,
            format!(
                "sequence fingerprint {} does not match strategy {}",
                seq.config_fingerprint, expected
            ),
        );
    }

    let allowed = Allowed::new(cfg);
    let max_positions = cfg.grid.max_positions();
    let max_duration = cfg.grid.max_duration();
    let mut expect = Expect::Free;
    let mut in_bar = false;
    let mut position: Option<u32> = None;
    let mut closed = false; // EOS seen
    let mut padding = false;

    for (i, token) in seq.tokens.iter().enumerate() {
        if padding && *token != Token::Pad {
            flag(i, format!("{token} after PAD"));
            continue;
        }
        if closed && *token != Token::Pad {
            flag(i, format!("{token} after EOS"));
            continue;
        }
        if let Some(msg) = allowed.check(token) {
            flag(i, msg);
        }
        let needs_free = !matches!(token, Token::Duration(_) | Token::Vic(_) | Token::Hic(_));
        if needs_free && expect != Expect::Free {
            flag(i, format!("{token} interrupts an unfinished pitch group"));
            expect = Expect::Free;
        }
        match *token {
            Token::Bos => {
                if i != 0 {
                    flag(i, "BOS is only allowed at the start".into());
                }
            }
            Token::Eos => closed = true,
            Token::Pad => padding = true,
            Token::Mask => flag(i, "MASK cannot be decoded".into()),
            Token::Bar => {
                in_bar = true;
                position = None;
            }
            Token::Position(p) => {
                if !in_bar {
                    flag(i, "Position before the first Bar".into());
                }
                if p >= max_positions {
                    flag(i, format!("Position_{p} exceeds {max_positions} positions per bar"));
                }
                if let Some(prev) = position {
                    if p <= prev {
                        flag(i, format!("Position_{p} does not follow Position_{prev}"));
                    }
                }
                position = Some(p);
            }
            Token::Pitch(_) | Token::Vpi(_) | Token::Hpi(_) | Token::VOct(_) | Token::HOct(_) => {
                if position.is_none() {
                    flag(i, format!("{token} without a Position in the current bar"));
                }
                expect = match token {
                    Token::VOct(_) => Expect::VerticalClass,
                    Token::HOct(_) => Expect::HorizontalClass,
                    _ => Expect::Duration,
                };
            }
            Token::Vic(_) | Token::Hic(_) => {
                let wanted = if token.is_vertical() {
                    Expect::VerticalClass
                } else {
                    Expect::HorizontalClass
                };
                if expect != wanted {
                    flag(i, format!("{token} does not follow its octave token"));
                }
                expect = Expect::Duration;
            }
            Token::Duration(d) => {
                if expect != Expect::Duration {
                    flag(i, format!("{token} without a pitch group"));
                }
                if d == 0 || u64::from(d) > max_duration {
                    flag(i, format!("{token} outside 1..={max_duration}"));
                }
                expect = Expect::Free;
            }
        }
    }
    if expect != Expect::Free {
        flag(seq.tokens.len(), "sequence ends inside a pitch group".into());
    }
    out
}

/// One decoded pitch group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Group {
    /// Index of the first payload token.
    pub offset: usize,
    pub bar: u64,
    pub position: u64,
    pub payload: Payload,
    pub duration: u64,
}

/// Splits a sequence that passed [`validate`] into its pitch groups.
pub fn groups(seq: &TokenSequence) -> Result<Vec<Group>> {
    let mut out = Vec::new();
    let mut bar: Option<u64> = None;
    let mut position: u64 = 0;
    let mut pending: Option<(usize, Payload)> = None;
    let mut octave = 0i32;

    let broken = |offset: usize| Error::Grammar {
        offset,
        message: "unexpected token while grouping".into(),
    };

    for (i, token) in seq.tokens.iter().enumerate() {
        match *token {
            Token::Bar => bar = Some(bar.map_or(0, |b| b + 1)),
            Token::Position(p) => position = u64::from(p),
            Token::Pitch(p) => pending = Some((i, Payload::Absolute(p))),
            Token::Vpi(v) => pending = Some((i, Payload::Vertical(v))),
            Token::Hpi(v) => pending = Some((i, Payload::Horizontal(v))),
            Token::VOct(o) | Token::HOct(o) => {
                octave = o;
                pending = Some((i, Payload::Absolute(0)));
            }
            Token::Vic(c) => {
                let (offset, _) = pending.ok_or_else(|| broken(i))?;
                pending = Some((offset, Payload::Vertical(12 * octave + i32::from(c))));
            }
            Token::Hic(c) => {
                let (offset, _) = pending.ok_or_else(|| broken(i))?;
                pending = Some((offset, Payload::Horizontal(12 * octave + i32::from(c))));
            }
            Token::Duration(d) => {
                let (offset, payload) = pending.take().ok_or_else(|| broken(i))?;
                out.push(Group {
                    offset,
                    bar: bar.ok_or_else(|| broken(i))?,
                    position,
                    payload,
                    duration: u64::from(d),
                });
            }
            Token::Pad | Token::Mask | Token::Bos | Token::Eos => {}
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intervalize::EncodedEvent;
    use crate::reference::ReferenceKind;
    use crate::score::{GridSpec, NoteEvent};

    fn layout() -> BarLayout {
        BarLayout::common_time(&GridSpec::default()).unwrap()
    }

    fn event(payload: Payload, pitch: u8, onset: u64, duration: u64, is_reference: bool) -> EncodedEvent {
        EncodedEvent {
            payload,
            note: NoteEvent::new(pitch, onset, duration, 0),
            is_reference,
            from_score: true,
        }
    }

    fn seq(cfg: &StrategyConfig, tokens: Vec<Token>) -> TokenSequence {
        TokenSequence::new(tokens, cfg.fingerprint())
    }

    #[test]
    fn single_note() {
        let cfg = StrategyConfig::remi_absolute();
        let enc = EncodedEvents {
            events: vec![event(Payload::Absolute(60), 60, 0, 4, false)],
            ..Default::default()
        };
        let out = emit(&enc, &layout(), &cfg).unwrap();
        assert_eq!(
            out.tokens,
            vec![Token::Bar, Token::Position(0), Token::Pitch(60), Token::Duration(4)]
        );
        assert!(validate(&out, &cfg).is_empty());
    }

    #[test]
    fn reference_then_vertical_interval() {
        let cfg = StrategyConfig::new(ReferenceKind::BottomLine, RefEncoding::Absolute, NonRefEncoding::Vpi);
        let enc = EncodedEvents {
            events: vec![
                event(Payload::Absolute(60), 60, 0, 4, true),
                event(Payload::Vertical(4), 64, 0, 2, false),
            ],
            ..Default::default()
        };
        let out = emit(&enc, &layout(), &cfg).unwrap();
        assert_eq!(
            out.tokens,
            vec![
                Token::Bar,
                Token::Position(0),
                Token::Pitch(60),
                Token::Duration(4),
                Token::Vpi(4),
                Token::Duration(2)
            ]
        );
        assert!(validate(&out, &cfg).is_empty());
    }

    #[test]
    fn empty_bars_emit_bare_bar() {
        let cfg = StrategyConfig::remi_absolute();
        let enc = EncodedEvents {
            events: vec![event(Payload::Absolute(60), 60, 16, 4, false)],
            ..Default::default()
        };
        let out = emit(&enc, &layout(), &cfg).unwrap();
        assert_eq!(&out.tokens[..3], &[Token::Bar, Token::Bar, Token::Position(0)]);
    }

    #[test]
    fn octave_class_pairs() {
        let cfg = StrategyConfig::new(ReferenceKind::Skyline, RefEncoding::Hpi, NonRefEncoding::Vpi)
            .with_interval_form(IntervalForm::OctavePlusClass);
        assert_eq!(
            payload_tokens(Payload::Vertical(-14), cfg.interval_form),
            vec![Token::VOct(-2), Token::Vic(10)]
        );
        let enc = EncodedEvents {
            events: vec![
                event(Payload::Horizontal(16), 76, 0, 4, true),
                event(Payload::Vertical(-14), 62, 0, 4, false),
            ],
            ..Default::default()
        };
        let out = emit(&enc, &layout(), &cfg).unwrap();
        assert!(validate(&out, &cfg).is_empty());
        let g = groups(&out).unwrap();
        assert_eq!(g[0].payload, Payload::Horizontal(16));
        assert_eq!(g[1].payload, Payload::Vertical(-14));
    }

    #[test]
    fn duration_without_group() {
        let cfg = StrategyConfig::remi_absolute();
        let v = validate(&seq(&cfg, vec![Token::Bar, Token::Duration(1)]), &cfg);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].offset, 1);
    }

    #[test]
    fn non_increasing_position() {
        let cfg = StrategyConfig::remi_absolute();
        let v = validate(
            &seq(&cfg, vec![Token::Bar, Token::Position(3), Token::Position(1)]),
            &cfg,
        );
        assert_eq!(v.len(), 1, "{v:?}");
    }

    #[test]
    fn class_must_follow_octave() {
        let cfg = StrategyConfig::new(ReferenceKind::Skyline, RefEncoding::Absolute, NonRefEncoding::Vpi)
            .with_interval_form(IntervalForm::OctavePlusClass);
        let v = validate(
            &seq(
                &cfg,
                vec![Token::Bar, Token::Position(0), Token::Vic(4), Token::Duration(1)],
            ),
            &cfg,
        );
        assert_eq!(v.len(), 1, "{v:?}");
    }

    #[test]
    fn payload_kind_must_match_strategy() {
        let cfg = StrategyConfig::new(ReferenceKind::Skyline, RefEncoding::Absolute, NonRefEncoding::Vpi);
        let v = validate(
            &seq(&cfg, vec![Token::Bar, Token::Position(0), Token::Hpi(2), Token::Duration(1)]),
            &cfg,
        );
        assert_eq!(v.len(), 1, "{v:?}");
        let remi = StrategyConfig::remi_absolute();
        let v = validate(
            &seq(&remi, vec![Token::Bar, Token::Position(0), Token::Vpi(2), Token::Duration(1)]),
            &remi,
        );
        assert_eq!(v.len(), 1, "{v:?}");
    }

    #[test]
    fn fingerprint_mismatch_is_reported() {
        let cfg = StrategyConfig::remi_absolute();
        let v = validate(&TokenSequence::new(vec![], "deadbeef"), &cfg);
        assert_eq!(v.len(), 1);
    }

    #[test]
    fn specials_placement() {
        let cfg = StrategyConfig::remi_absolute();
        let ok = seq(
            &cfg,
            vec![
                Token::Bos,
                Token::Bar,
                Token::Position(0),
                Token::Pitch(60),
                Token::Duration(1),
                Token::Eos,
                Token::Pad,
                Token::Pad,
            ],
        );
        assert!(validate(&ok, &cfg).is_empty());
        let bad = seq(&cfg, vec![Token::Bar, Token::Bos, Token::Eos, Token::Bar, Token::Mask]);
        assert_eq!(validate(&bad, &cfg).len(), 3);
    }

    #[test]
    fn unfinished_group_at_end() {
        let cfg = StrategyConfig::remi_absolute();
        let v = validate(&seq(&cfg, vec![Token::Bar, Token::Position(0), Token::Pitch(60)]), &cfg);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].offset, 3);
    }
}
