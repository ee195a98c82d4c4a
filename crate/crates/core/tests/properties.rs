mod common;

use common::{note_triples, random_score, rng, ScoreShape};
use intervalize::pipeline::{tokenize_quantized, ReferenceInput};
use intervalize::reference::ReferenceStream;
use intervalize::score::transpose_quantized;
use intervalize::strategy::IntervalForm;
use intervalize::{
    detokenize_with_time_signatures, quantize, QuantizedScore, ReferenceKind, Strategy,
    StrategyConfig, Token, Vocabulary,
};

const KINDS: [ReferenceKind; 3] = [
    ReferenceKind::Melody,
    ReferenceKind::Skyline,
    ReferenceKind::BottomLine,
];

fn input(cfg: &StrategyConfig) -> ReferenceInput<'static> {
    match cfg.reference_kind {
        ReferenceKind::Melody => ReferenceInput::melody(0),
        _ => ReferenceInput::none(),
    }
}

fn roundtrip(q: &QuantizedScore, cfg: &StrategyConfig, anchor: u8) -> QuantizedScore {
    let t = tokenize_quantized(q, cfg, input(cfg)).unwrap();
    detokenize_with_time_signatures(&t.sequence, cfg, anchor, &q.time_signatures).unwrap()
}

#[test]
fn absolute_reference_strategies_round_trip() {
    let mut r = rng(0xa11_0001);
    for _ in 0..200 {
        let q = random_score(&mut r, ScoreShape::default());
        let remi = StrategyConfig::remi_absolute();
        assert_eq!(note_triples(&roundtrip(&q, &remi, 60).notes), note_triples(&q.notes));
        for kind in KINDS {
            for form in [IntervalForm::PlainInterval, IntervalForm::OctavePlusClass] {
                let cfg = Strategy::AbsVpi.config(kind).with_interval_form(form);
                let back = roundtrip(&q, &cfg, 60);
                assert_eq!(note_triples(&back.notes), note_triples(&q.notes), "{cfg}");
            }
        }
    }
}

#[test]
fn hpi_round_trip_loses_only_the_first_reference_note() {
    let mut r = rng(0xa11_0002);
    for _ in 0..200 {
        let q = random_score(&mut r, ScoreShape::default());
        for kind in KINDS {
            let cfg = Strategy::HpiVpi.config(kind);
            let t = tokenize_quantized(&q, &cfg, input(&cfg)).unwrap();
            let dropped = t.encoded.dropped.expect("first reference note dropped");
            let back =
                detokenize_with_time_signatures(&t.sequence, &cfg, dropped.pitch, &q.time_signatures)
                    .unwrap();
            let mut expected = q.notes.clone();
            let at = expected.iter().position(|n| *n == dropped).unwrap();
            expected.remove(at);
            assert_eq!(note_triples(&back.notes), note_triples(&expected), "{cfg}");
        }
    }
}

#[test]
fn decoding_is_idempotent() {
    let mut r = rng(0xa11_0003);
    for _ in 0..100 {
        let q = random_score(&mut r, ScoreShape::default());
        for kind in KINDS {
            let cfg = Strategy::AbsVpi.config(kind);
            let once = roundtrip(&q, &cfg, 60);
            // decoded scores carry their reference on track 0
            let twice = roundtrip(&once, &cfg, 60);
            assert_eq!(once, twice, "{cfg}");
        }
    }
}

#[test]
fn quantize_is_idempotent() {
    let mut r = rng(0xa11_0004);
    for _ in 0..200 {
        let q = random_score(&mut r, ScoreShape::default());
        assert_eq!(quantize(&q.to_ticks(), &q.grid).unwrap(), q);
    }
}

#[test]
fn hpi_vpi_is_transposition_invariant() {
    let mut r = rng(0xa11_0005);
    for _ in 0..50 {
        let q = random_score(&mut r, ScoreShape::default());
        for kind in KINDS {
            let cfg = Strategy::HpiVpi.config(kind);
            let base = tokenize_quantized(&q, &cfg, input(&cfg)).unwrap().sequence;
            for k in -12..=12 {
                let moved = transpose_quantized(&q, k).unwrap();
                let seq = tokenize_quantized(&moved, &cfg, input(&cfg)).unwrap().sequence;
                assert_eq!(seq, base, "{cfg} shifted by {k}");
            }
        }
    }
}

#[test]
fn abs_vpi_keeps_its_vertical_tokens_under_transposition() {
    let mut r = rng(0xa11_0006);
    let verticals = |q: &QuantizedScore, cfg: &StrategyConfig| -> Vec<Token> {
        let seq = tokenize_quantized(q, cfg, input(cfg)).unwrap().sequence;
        seq.tokens.into_iter().filter(|t| !matches!(t, Token::Pitch(_))).collect()
    };
    for _ in 0..50 {
        let q = random_score(&mut r, ScoreShape::default());
        for kind in KINDS {
            let cfg = Strategy::AbsVpi.config(kind);
            let base = verticals(&q, &cfg);
            for k in [-12, -5, 1, 7, 12] {
                assert_eq!(verticals(&transpose_quantized(&q, k).unwrap(), &cfg), base);
            }
        }
    }
}

#[test]
fn token_counts_follow_the_partition() {
    let mut r = rng(0xa11_0007);
    for _ in 0..200 {
        let q = random_score(&mut r, ScoreShape::default());
        let n = q.notes.len();
        for kind in KINDS {
            for strategy in [Strategy::AbsVpi, Strategy::HpiVpi] {
                let cfg = strategy.config(kind);
                let t = tokenize_quantized(&q, &cfg, input(&cfg)).unwrap();
                let tau = t.reference.as_ref().unwrap().len();
                let count = |f: fn(&Token) -> bool| t.sequence.tokens.iter().filter(|x| f(x)).count();
                assert_eq!(count(|x| matches!(x, Token::Vpi(_))), n - tau);
                assert_eq!(count(|x| matches!(x, Token::Duration(_))), t.encoded.events.len());
                match strategy {
                    Strategy::AbsVpi => assert_eq!(count(|x| matches!(x, Token::Pitch(_))), tau),
                    _ => assert_eq!(count(|x| matches!(x, Token::Hpi(_))), tau - 1),
                }
            }
        }
    }
}

#[test]
fn external_reference_leaves_every_note_a_companion() {
    let mut r = rng(0xa11_0008);
    for _ in 0..100 {
        let q = random_score(&mut r, ScoreShape::default());
        let events = intervalize::reference::extract_skyline(&q).unwrap().events;
        let external = ReferenceStream {
            kind: ReferenceKind::External,
            events,
        };
        let cfg = Strategy::AbsVpi.config(ReferenceKind::External);
        let t = tokenize_quantized(&q, &cfg, ReferenceInput::external(&external)).unwrap();
        let vpi = t.sequence.tokens.iter().filter(|x| matches!(x, Token::Vpi(_))).count();
        assert_eq!(vpi, q.notes.len());
        let notes = t.token_notes().into_iter().flatten().count();
        assert_eq!(notes, 2 * q.notes.len());
    }
}

fn closed_form(cfg: &StrategyConfig) -> usize {
    let c = cfg.clamp as i32;
    let per_kind = match cfg.interval_form {
        IntervalForm::PlainInterval => (2 * c + 1) as usize,
        IntervalForm::OctavePlusClass => ((c.div_euclid(12) - (-c).div_euclid(12)) + 1 + 12) as usize,
    };
    let kinds = usize::from(cfg.i_nonref == intervalize::NonRefEncoding::Vpi)
        + usize::from(cfg.i_ref == intervalize::RefEncoding::Hpi);
    let absolute = if cfg.has_absolute_payload() { 128 } else { 0 };
    4 + 1 + cfg.grid.max_positions() as usize + cfg.grid.max_duration() as usize + absolute + kinds * per_kind
}

#[test]
fn vocabulary_size_has_a_closed_form() {
    for (_, base) in StrategyConfig::table_strategies() {
        for form in [IntervalForm::PlainInterval, IntervalForm::OctavePlusClass] {
            for clamp in [12, 24, 30, 48, 127] {
                let cfg = base.with_interval_form(form).with_clamp(clamp);
                assert_eq!(Vocabulary::build(&cfg).unwrap().len(), closed_form(&cfg), "{cfg}");
            }
        }
    }
}

#[test]
fn every_emitted_token_is_in_the_vocabulary() {
    let mut r = rng(0xa11_0009);
    let shape = ScoreShape {
        pitch_lo: 0,
        pitch_hi: 127,
        ..ScoreShape::default()
    };
    for _ in 0..100 {
        let q = random_score(&mut r, shape);
        for (_, cfg) in StrategyConfig::table_strategies() {
            let cfg = cfg.with_interval_form(IntervalForm::OctavePlusClass);
            let vocab = Vocabulary::build(&cfg).unwrap();
            let seq = tokenize_quantized(&q, &cfg, input(&cfg)).unwrap().sequence;
            let ids = vocab.encode_ids(&seq).unwrap();
            assert_eq!(vocab.decode_ids(&ids).unwrap(), seq);
        }
    }
}
