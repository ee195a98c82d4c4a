//! Standard MIDI File ingestion and export.
//!
//! Note-ons are paired with note-offs first-in first-out per
//! `(track, channel, pitch)`. A note-on with velocity 0 counts as a
//! note-off. Velocities and tempo are discarded.

use std::collections::{HashMap, VecDeque};

use midly::num::{u15, u28, u4, u7};
use midly::{Format, Header, MetaMessage, MidiMessage, Smf, Timing, TrackEvent, TrackEventKind};

use crate::error::{Error, Result};
use crate::score::{NoteEvent, QuantizedScore, Score, TimeSignature, SUPPORTED_DENOMINATORS};

/// Parser output with non-fatal diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedScore {
    pub score: Score,
    pub warnings: Vec<String>,
}

/// Parses a format 0 or format 1 Standard MIDI File.
pub fn parse_smf(bytes: &[u8]) -> Result<Score> {
    parse_smf_with_diagnostics(bytes).map(|p| p.score)
}

pub fn parse_smf_with_diagnostics(bytes: &[u8]) -> Result<ParsedScore> {
    if !bytes.starts_with(b"MThd") {
        return Err(Error::Parse("missing MThd header chunk".into()));
    }
    let smf = Smf::parse(bytes).map_err(|e| Error::Parse(e.to_string()))?;
    if smf.header.format == Format::Sequential {
        return Err(Error::Parse("format 2 files are not supported".into()));
    }
    let ticks_per_quarter = match smf.header.timing {
        Timing::Metrical(tpq) if tpq.as_int() > 0 => u32::from(tpq.as_int()),
        Timing::Metrical(_) => return Err(Error::Parse("ticks per quarter is zero".into())),
        Timing::Timecode(..) => {
            return Err(Error::Parse("SMPTE time division is not supported".into()))
        }
    };

    let mut notes = Vec::new();
    let mut warnings = Vec::new();
    // (tick, track, order within track) keeps later events winning on ties
    let mut signatures: Vec<(u64, usize, usize, TimeSignature)> = Vec::new();

    for (track_idx, track) in smf.tracks.iter().enumerate() {
        let track_id = track_idx as u32;
        let mut tick: u64 = 0;
        let mut open: HashMap<(u8, u8), VecDeque<u64>> = HashMap::new();

        for (event_idx, event) in track.iter().enumerate() {
            tick += u64::from(event.delta.as_int());
            match event.kind {
                TrackEventKind::Midi { channel, message } => {
                    let channel = channel.as_int();
                    match message {
                        MidiMessage::NoteOn { key, vel } if vel.as_int() > 0 => {
                            open.entry((channel, key.as_int())).or_default().push_back(tick);
                        }
                        MidiMessage::NoteOn { key, .. } | MidiMessage::NoteOff { key, .. } => {
                            let pitch = key.as_int();
                            match open.get_mut(&(channel, pitch)).and_then(|q| q.pop_front()) {
                                Some(onset) => notes.push(NoteEvent::new(
                                    pitch,
                                    onset,
                                    (tick - onset).max(1),
                                    track_id,
                                )),
                                None => log::debug!(
                                    "track {track_id}: note-off for pitch {pitch} at tick {tick} without a matching note-on"
                                ),
                            }
                        }
                        _ => {}
                    }
                }
                TrackEventKind::Meta(MetaMessage::TimeSignature(num, den_pow, _, _)) => {
                    let denominator = 1u32.checked_shl(u32::from(den_pow)).unwrap_or(0);
                    if !SUPPORTED_DENOMINATORS.iter().any(|&d| u32::from(d) == denominator) {
                        return Err(Error::Parse(format!(
                            "unsupported time signature {num}/2^{den_pow} at tick {tick}"
                        )));
                    }
                    if num == 0 {
                        return Err(Error::Parse(format!(
                            "time signature with zero numerator at tick {tick}"
                        )));
                    }
                    signatures.push((
                        tick,
                        track_idx,
                        event_idx,
                        TimeSignature::new(tick, num, denominator as u8),
                    ));
                }
                _ => {}
            }
        }

        let mut dangling: Vec<((u8, u8), u64)> = open
            .into_iter()
            .flat_map(|(key, onsets)| onsets.into_iter().map(move |onset| (key, onset)))
            .collect();
        dangling.sort_unstable();
        for ((channel, pitch), onset) in dangling {
            let message = format!(
                "track {track_id}: note-on (channel {channel}, pitch {pitch}, tick {onset}) never released; closed at track end {tick}"
            );
            log::warn!("{message}");
            warnings.push(message);
            notes.push(NoteEvent::new(pitch, onset, (tick - onset).max(1), track_id));
        }
    }

    signatures.sort_by_key(|&(tick, track, order, _)| (tick, track, order));
    let mut time_signatures: Vec<TimeSignature> = Vec::new();
    for (_, _, _, ts) in signatures {
        match time_signatures.last_mut() {
            Some(prev) if prev.start == ts.start => *prev = ts,
            _ => time_signatures.push(ts),
        }
    }
    if time_signatures.first().is_none_or(|ts| ts.start != 0) {
        time_signatures.insert(0, TimeSignature::common_time());
    }

    Ok(ParsedScore {
        score: Score::new(ticks_per_quarter, time_signatures, notes)?,
        warnings,
    })
}

const EXPORT_VELOCITY: u8 = 64;

/// Writes a quantized score as a format 1 file with one grid unit per tick.
///
/// SMF track `i` carries the notes of score track `i`; time signatures go
/// into track 0.
pub fn write_smf(score: &QuantizedScore) -> Result<Vec<u8>> {
    let tpq = u16::try_from(score.grid.subdivisions_per_beat)
        .ok()
        .filter(|&t| t <= 0x7fff)
        .ok_or_else(|| Error::Range("subdivisions per beat too large for SMF".into()))?;
    let track_count = score.notes.iter().map(|n| n.track + 1).max().unwrap_or(1) as usize;

    // (tick, kind, payload): kind 0 = meta, 1 = note-off, 2 = note-on
    let mut per_track: Vec<Vec<(u64, u8, usize)>> = vec![Vec::new(); track_count];
    for (i, ts) in score.time_signatures.iter().enumerate() {
        per_track[0].push((ts.start, 0, i));
    }
    for n in &score.notes {
        let events = &mut per_track[n.track as usize];
        events.push((n.onset, 2, usize::from(n.pitch)));
        events.push((n.onset + n.duration, 1, usize::from(n.pitch)));
    }

    let mut tracks: Vec<Vec<TrackEvent<'static>>> = Vec::with_capacity(track_count);
    for mut events in per_track {
        events.sort_unstable();
        let mut last = 0u64;
        let mut track = Vec::with_capacity(events.len() + 1);
        for (tick, kind, payload) in events {
            let delta = u32::try_from(tick - last)
                .ok()
                .filter(|&d| d <= u28::max_value().as_int())
                .ok_or_else(|| Error::Range("delta time too large for SMF".into()))?;
            last = tick;
            let kind = match kind {
                0 => {
                    let ts = score.time_signatures[payload];
                    TrackEventKind::Meta(MetaMessage::TimeSignature(
                        ts.numerator,
                        ts.denominator.trailing_zeros() as u8,
                        24,
                        8,
                    ))
                }
                1 => TrackEventKind::Midi {
                    channel: u4::new(0),
                    message: MidiMessage::NoteOff {
                        key: u7::new(payload as u8),
                        vel: u7::new(0),
                    },
                },
                _ => TrackEventKind::Midi {
                    channel: u4::new(0),
                    message: MidiMessage::NoteOn {
                        key: u7::new(payload as u8),
                        vel: u7::new(EXPORT_VELOCITY),
                    },
                },
            };
            track.push(TrackEvent {
                delta: u28::new(delta),
                kind,
            });
        }
        track.push(TrackEvent {
            delta: u28::new(0),
            kind: TrackEventKind::Meta(MetaMessage::EndOfTrack),
        });
        tracks.push(track);
    }

    let header = Header::new(Format::Parallel, Timing::Metrical(u15::new(tpq)));
    let mut out = Vec::new();
    midly::write_std(&header, tracks.iter(), &mut out)
        .map_err(|e| Error::Internal(format!("SMF write failed: {e}")))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vlq(mut value: u32) -> Vec<u8> {
        let mut bytes = vec![(value & 0x7f) as u8];
        value >>= 7;
        while value > 0 {
            bytes.push(((value & 0x7f) as u8) | 0x80);
            value >>= 7;
        }
        bytes.reverse();
        bytes
    }

    fn chunk(tag: &[u8; 4], body: &[u8]) -> Vec<u8> {
        let mut out = tag.to_vec();
        out.extend_from_slice(&(body.len() as u32).to_be_bytes());
        out.extend_from_slice(body);
        out
    }

    fn header(format: u16, tracks: u16, division: u16) -> Vec<u8> {
        let mut body = Vec::new();
        body.extend_from_slice(&format.to_be_bytes());
        body.extend_from_slice(&tracks.to_be_bytes());
        body.extend_from_slice(&division.to_be_bytes());
        chunk(b"MThd", &body)
    }

    fn end_of_track() -> Vec<u8> {
        vec![0x00, 0xff, 0x2f, 0x00]
    }

    #[test]
    fn parses_single_note_file() {
        let mut track = Vec::new();
        track.extend(vlq(0));
        track.extend([0x90, 60, 100]);
        track.extend(vlq(480));
        track.extend([0x80, 60, 0]);
        track.extend(end_of_track());
        let mut bytes = header(0, 1, 480);
        bytes.extend(chunk(b"MTrk", &track));

        let score = parse_smf(&bytes).unwrap();
        assert_eq!(score.ticks_per_quarter, 480);
        assert_eq!(score.notes, vec![NoteEvent::new(60, 0, 480, 0)]);
        assert_eq!(score.time_signatures, vec![TimeSignature::common_time()]);
    }

    #[test]
    fn velocity_zero_is_note_off_and_running_status_works() {
        let mut track = Vec::new();
        track.extend(vlq(0));
        track.extend([0x90, 64, 90]);
        track.extend(vlq(240));
        track.extend([64, 0]); // running status, velocity 0
        track.extend(end_of_track());
        let mut bytes = header(0, 1, 480);
        bytes.extend(chunk(b"MTrk", &track));
        assert_eq!(
            parse_smf(&bytes).unwrap().notes,
            vec![NoteEvent::new(64, 0, 240, 0)]
        );
    }

    #[test]
    fn empty_track_gives_empty_notes() {
        let mut bytes = header(1, 1, 96);
        bytes.extend(chunk(b"MTrk", &end_of_track()));
        assert!(parse_smf(&bytes).unwrap().notes.is_empty());
    }

    #[test]
    fn rejects_missing_header_tag() {
        assert!(matches!(parse_smf(b"RIFF0000"), Err(Error::Parse(_))));
        assert!(matches!(parse_smf(b""), Err(Error::Parse(_))));
        let mut bytes = header(0, 1, 480);
        bytes[0] = b'X';
        assert!(matches!(parse_smf(&bytes), Err(Error::Parse(_))));
    }

    #[test]
    fn rejects_truncated_header() {
        assert!(matches!(parse_smf(b"MThd\x00\x00\x00\x06\x00"), Err(Error::Parse(_))));
    }

    #[test]
    fn rejects_smpte_and_format_two() {
        let mut bytes = header(0, 1, 0xE728);
        bytes.extend(chunk(b"MTrk", &end_of_track()));
        assert!(matches!(parse_smf(&bytes), Err(Error::Parse(_))));

        let mut bytes = header(2, 1, 480);
        bytes.extend(chunk(b"MTrk", &end_of_track()));
        assert!(matches!(parse_smf(&bytes), Err(Error::Parse(_))));
    }

    #[test]
    fn overlapping_same_pitch_matches_fifo() {
        let mut track = Vec::new();
        track.extend(vlq(0));
        track.extend([0x90, 60, 100]);
        track.extend(vlq(100));
        track.extend([0x90, 60, 100]);
        track.extend(vlq(100));
        track.extend([0x80, 60, 0]);
        track.extend(vlq(100));
        track.extend([0x80, 60, 0]);
        track.extend(end_of_track());
        let mut bytes = header(0, 1, 480);
        bytes.extend(chunk(b"MTrk", &track));
        assert_eq!(
            parse_smf(&bytes).unwrap().notes,
            vec![NoteEvent::new(60, 0, 200, 0), NoteEvent::new(60, 100, 200, 0)]
        );
    }

    #[test]
    fn channels_are_matched_separately() {
        let mut track = Vec::new();
        track.extend(vlq(0));
        track.extend([0x90, 60, 100]);
        track.extend(vlq(0));
        track.extend([0x91, 60, 100]);
        track.extend(vlq(50));
        track.extend([0x81, 60, 0]);
        track.extend(vlq(50));
        track.extend([0x80, 60, 0]);
        track.extend(end_of_track());
        let mut bytes = header(0, 1, 480);
        bytes.extend(chunk(b"MTrk", &track));
        assert_eq!(
            parse_smf(&bytes).unwrap().notes,
            vec![NoteEvent::new(60, 0, 50, 0), NoteEvent::new(60, 0, 100, 0)]
        );
    }

    #[test]
    fn dangling_note_closes_at_track_end_with_warning() {
        let mut track = Vec::new();
        track.extend(vlq(0));
        track.extend([0x90, 67, 100]);
        track.extend(vlq(960));
        track.extend([0xff, 0x2f, 0x00]);
        let mut bytes = header(0, 1, 480);
        bytes.extend(chunk(b"MTrk", &track));
        let parsed = parse_smf_with_diagnostics(&bytes).unwrap();
        assert_eq!(parsed.score.notes, vec![NoteEvent::new(67, 0, 960, 0)]);
        assert_eq!(parsed.warnings.len(), 1);
    }

    #[test]
    fn reads_time_signatures_and_rejects_unsupported_denominators() {
        let mut track = Vec::new();
        track.extend(vlq(0));
        track.extend([0xff, 0x58, 0x04, 3, 2, 24, 8]); // 3/4
        track.extend(vlq(1440));
        track.extend([0xff, 0x58, 0x04, 6, 3, 24, 8]); // 6/8
        track.extend(end_of_track());
        let mut bytes = header(1, 1, 480);
        bytes.extend(chunk(b"MTrk", &track));
        assert_eq!(
            parse_smf(&bytes).unwrap().time_signatures,
            vec![TimeSignature::new(0, 3, 4), TimeSignature::new(1440, 6, 8)]
        );

        let mut track = Vec::new();
        track.extend(vlq(0));
        track.extend([0xff, 0x58, 0x04, 3, 5, 24, 8]); // 3/32
        track.extend(end_of_track());
        let mut bytes = header(1, 1, 480);
        bytes.extend(chunk(b"MTrk", &track));
        assert!(matches!(parse_smf(&bytes), Err(Error::Parse(_))));
    }

    #[test]
    fn multi_track_notes_keep_track_index() {
        let mut melody = Vec::new();
        melody.extend(vlq(0));
        melody.extend([0x90, 72, 100]);
        melody.extend(vlq(480));
        melody.extend([0x80, 72, 0]);
        melody.extend(end_of_track());
        let mut bass = Vec::new();
        bass.extend(vlq(0));
        bass.extend([0x92, 48, 100]);
        bass.extend(vlq(960));
        bass.extend([0x82, 48, 0]);
        bass.extend(end_of_track());
        let mut bytes = header(1, 2, 480);
        bytes.extend(chunk(b"MTrk", &melody));
        bytes.extend(chunk(b"MTrk", &bass));
        assert_eq!(
            parse_smf(&bytes).unwrap().notes,
            vec![NoteEvent::new(72, 0, 480, 0), NoteEvent::new(48, 0, 960, 1)]
        );
    }

    #[test]
    fn export_then_parse_preserves_quantized_notes() {
        use crate::score::{quantize, GridSpec};
        let q = QuantizedScore::new(
            GridSpec::default(),
            vec![TimeSignature::new(0, 4, 4), TimeSignature::new(32, 3, 4)],
            vec![
                NoteEvent::new(60, 0, 4, 0),
                NoteEvent::new(64, 0, 8, 2),
                NoteEvent::new(67, 33, 3, 0),
            ],
        )
        .unwrap();
        let bytes = write_smf(&q).unwrap();
        let back = quantize(&parse_smf(&bytes).unwrap(), &q.grid).unwrap();
        assert_eq!(back, q);
    }
}
