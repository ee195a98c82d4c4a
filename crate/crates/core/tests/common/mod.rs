//! Random score generation and brute-force oracles shared by the
//! integration and acceptance suites.
#![allow(dead_code)]

use std::path::PathBuf;

use intervalize::{GridSpec, NoteEvent, QuantizedScore, TimeSignature};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("..")
        .join("core")
        .join("tests")
        .join("fixtures")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy)]
pub struct ScoreShape {
    pub max_notes: usize,
    pub max_tracks: u32,
    pub pitch_lo: u8,
    pub pitch_hi: u8,
    /// Also draw 3/4 and 6/8 segments.
    pub mixed_meter: bool,
}

impl Default for ScoreShape {
    fn default() -> Self {
        // a 48-semitone span keeps every interval inside the default clamp
        ScoreShape {
            max_notes: 200,
            max_tracks: 4,
            pitch_lo: 36,
            pitch_hi: 84,
            mixed_meter: true,
        }
    }
}

/// A random quantized score with 1..=max_notes notes; track 0 is never
/// empty. Onsets cluster on a coarse grid so chords and ties are common.
pub fn random_score(rng: &mut impl Rng, shape: ScoreShape) -> QuantizedScore {
    let grid = GridSpec::default();
    let bars: u64 = rng.gen_range(1..=8);
    let mut time_signatures = vec![TimeSignature::new(0, 4, 4)];
    if shape.mixed_meter && rng.gen_bool(0.3) {
        let (num, den) = *[(3u8, 4u8), (6, 8), (2, 4)].choose(rng).unwrap();
        time_signatures.push(TimeSignature::new(rng.gen_range(1..=bars * 16), num, den));
    }
    let span = bars * 16;
    let n = rng.gen_range(1..=shape.max_notes);
    let tracks = rng.gen_range(1..=shape.max_tracks);
    let step = *[1u64, 2, 4].choose(rng).unwrap();
    let mut notes: Vec<NoteEvent> = (0..n)
        .map(|i| {
            let onset = rng.gen_range(0..span) / step * step;
            let track = if i == 0 { 0 } else { rng.gen_range(0..tracks) };
            NoteEvent::new(
                rng.gen_range(shape.pitch_lo..=shape.pitch_hi),
                onset,
                rng.gen_range(1..=16),
                track,
            )
        })
        .collect();
    notes.shuffle(rng);
    QuantizedScore::new(grid, time_signatures, notes).expect("generated score is valid")
}

/// Brute force: for every distinct onset, scan all notes and keep the one
/// that wins under (pitch, longer duration, lower track).
pub fn oracle_extreme_line(notes: &[NoteEvent], highest: bool) -> Vec<NoteEvent> {
    let mut onsets: Vec<u64> = notes.iter().map(|n| n.onset).collect();
    onsets.sort_unstable();
    onsets.dedup();
    onsets
        .into_iter()
        .map(|t| {
            let mut best: Option<NoteEvent> = None;
            for n in notes.iter().filter(|n| n.onset == t) {
                let better = match best {
                    None => true,
                    Some(b) => {
                        let pitch_better = if highest { n.pitch > b.pitch } else { n.pitch < b.pitch };
                        pitch_better
                            || (n.pitch == b.pitch && n.duration > b.duration)
                            || (n.pitch == b.pitch && n.duration == b.duration && n.track < b.track)
                    }
                };
                if better {
                    best = Some(*n);
                }
            }
            best.unwrap()
        })
        .collect()
}

/// Multiset of (pitch, onset, duration), sorted.
pub fn note_triples(notes: &[NoteEvent]) -> Vec<(u8, u64, u64)> {
    let mut v: Vec<_> = notes.iter().map(|n| (n.pitch, n.onset, n.duration)).collect();
    v.sort_unstable();
    v
}

pub fn golden_name(strategy_name: &str) -> String {
    strategy_name.replace('/', "_")
}
