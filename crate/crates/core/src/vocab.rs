//! Closed vocabulary derived from a [`StrategyConfig`] and the token/id
//! codec.
//!
//! Ids `0..4` are `PAD`, `MASK`, `BOS`, `EOS`. The remaining tokens follow
//! in lexicographic order of their canonical strings.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::strategy::{IntervalForm, NonRefEncoding, RefEncoding, StrategyConfig};
use crate::token::{Token, TokenSequence, SPECIALS};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<Token>,
    ids: HashMap<Token, u32>,
    fingerprint: String,
}

/// On-disk form: `{"fingerprint": ..., "tokens": [...]}` in id order.
#[derive(Serialize, Deserialize)]
struct VocabFile {
    fingerprint: String,
    tokens: Vec<String>,
}

fn interval_tokens(
    cfg: &StrategyConfig,
    plain: fn(i32) -> Token,
    octave: fn(i32) -> Token,
    class: fn(u8) -> Token,
) -> Vec<Token> {
    let c = cfg.clamp as i32;
    match cfg.interval_form {
        IntervalForm::PlainInterval => (-c..=c).map(plain).collect(),
        IntervalForm::OctavePlusClass => {
            let (lo, hi) = cfg.octave_range();
            (lo..=hi).map(octave).chain((0..12).map(class)).collect()
        }
    }
}

/// Every token `cfg` can produce.
pub fn reachable_tokens(cfg: &StrategyConfig) -> Vec<Token> {
    let mut out = vec![Token::Bar];
    out.extend((0..cfg.grid.max_positions()).map(Token::Position));
    out.extend((1..=cfg.grid.max_duration() as u32).map(Token::Duration));
    if cfg.has_absolute_payload() {
        out.extend((0..=127u8).map(Token::Pitch));
    }
    if cfg.i_nonref == NonRefEncoding::Vpi {
        out.extend(interval_tokens(cfg, Token::Vpi, Token::VOct, Token::Vic));
    }
    if cfg.i_ref == RefEncoding::Hpi {
        out.extend(interval_tokens(cfg, Token::Hpi, Token::HOct, Token::Hic));
    }
    out
}

impl Vocabulary {
    pub fn build(cfg: &StrategyConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rest: Vec<(String, Token)> = reachable_tokens(cfg)
            .into_iter()
            .map(|t| (t.to_string(), t))
            .collect();
        rest.sort_by(|a, b| a.0.cmp(&b.0));
        let tokens = SPECIALS
            .iter()
            .copied()
            .chain(rest.into_iter().map(|(_, t)| t))
            .collect();
        Ok(Self::from_tokens(tokens, cfg.fingerprint()))
    }

    fn from_tokens(tokens: Vec<Token>, fingerprint: String) -> Self {
        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (*t, i as u32))
            .collect();
        Vocabulary {
            tokens,
            ids,
            fingerprint,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn id(&self, token: &Token) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<Token> {
        self.tokens.get(id as usize).copied()
    }

    /// Token string to id, in id order.
    pub fn mapping(&self) -> Vec<(String, u32)> {
        self.tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.to_string(), i as u32))
            .collect()
    }

    pub fn encode_ids(&self, seq: &TokenSequence) -> Result<Vec<u32>> {
        self.check_fingerprint(&seq.config_fingerprint)?;
        seq.tokens
            .iter()
            .enumerate()
            .map(|(i, t)| {
                self.id(t)
                    .ok_or_else(|| Error::Codec(format!("token {t} at offset {i} is not in the vocabulary")))
            })
            .collect()
    }

    pub fn decode_ids(&self, ids: &[u32]) -> Result<TokenSequence> {
        let tokens = ids
            .iter()
            .enumerate()
            .map(|(i, &id)| {
                self.token(id).ok_or_else(|| {
                    Error::Codec(format!(
                        "id {id} at offset {i} outside vocabulary of size {}",
                        self.len()
                    ))
                })
            })
            .collect::<Result<Vec<Token>>>()?;
        Ok(TokenSequence::new(tokens, self.fingerprint.clone()))
    }

    /// [`Vocabulary::decode_ids`] for ids recorded under `fingerprint`.
    pub fn decode_ids_checked(&self, ids: &[u32], fingerprint: &str) -> Result<TokenSequence> {
        self.check_fingerprint(fingerprint)?;
        self.decode_ids(ids)
    }

    fn check_fingerprint(&self, found: &str) -> Result<()> {
        if found != self.fingerprint {
            return Err(Error::ConfigMismatch {
                expected: self.fingerprint.clone(),
                found: found.to_string(),
            });
        }
        Ok(())
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let file = VocabFile {
            fingerprint: self.fingerprint.clone(),
            tokens: self.tokens.iter().map(Token::to_string).collect(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("vocab serializes");
        s.push('\n');
        s
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let file: VocabFile =
            serde_json::from_str(json).map_err(|e| Error::Codec(format!("invalid vocab file: {e}")))?;
        let tokens = file
            .tokens
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<Token>>>()?;
        if tokens.get(..4) != Some(&SPECIALS[..]) {
            return Err(Error::Codec("vocab file must start with PAD, MASK, BOS, EOS".into()));
        }
        let vocab = Self::from_tokens(tokens, file.fingerprint);
        if vocab.ids.len() != vocab.tokens.len() {
            return Err(Error::Codec("vocab file lists a token twice".into()));
        }
        Ok(vocab)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::ReferenceKind;
    use crate::strategy::Strategy;

    #[test]
    fn specials_come_first() {
        let v = Vocabulary::build(&StrategyConfig::remi_absolute()).unwrap();
        assert_eq!(&v.tokens()[..4], &SPECIALS);
        assert_eq!(v.id(&Token::Pad), Some(0));
        assert_eq!(v.id(&Token::Eos), Some(3));
        let rest: Vec<String> = v.tokens()[4..].iter().map(Token::to_string).collect();
        let mut sorted = rest.clone();
        sorted.sort();
        assert_eq!(rest, sorted);
    }

    #[test]
    fn plain_vpi_range() {
        let v = Vocabulary::build(&Strategy::AbsVpi.config(ReferenceKind::Skyline)).unwrap();
        let vpi = v.tokens().iter().filter(|t| matches!(t, Token::Vpi(_))).count();
        assert_eq!(vpi, 97);
        assert!(!v.tokens().iter().any(|t| matches!(t, Token::Hpi(_))));
    }

    #[test]
    fn remi_absolute_has_no_intervals() {
        let v = Vocabulary::build(&StrategyConfig::remi_absolute()).unwrap();
        assert!(!v.tokens().iter().any(|t| t.is_vertical() || t.is_horizontal()));
    }

    #[test]
    fn hpi_vpi_has_no_pitch_tokens() {
        let v = Vocabulary::build(&Strategy::HpiVpi.config(ReferenceKind::Melody)).unwrap();
        assert!(!v.tokens().iter().any(|t| matches!(t, Token::Pitch(_))));
    }

    #[test]
    fn build_is_deterministic() {
        let cfg = Strategy::HpiVpi.config(ReferenceKind::BottomLine);
        assert_eq!(
            Vocabulary::build(&cfg).unwrap().to_json(),
            Vocabulary::build(&cfg).unwrap().to_json()
        );
    }

    #[test]
    fn save_load_resave_is_byte_identical() {
        let cfg = Strategy::AbsVpi
            .config(ReferenceKind::Skyline)
            .with_interval_form(IntervalForm::OctavePlusClass);
        let v = Vocabulary::build(&cfg).unwrap();
        let json = v.to_json();
        let back = Vocabulary::from_json(&json).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.to_json(), json);
    }

    #[test]
    fn codec_errors() {
        let cfg = StrategyConfig::remi_absolute();
        let v = Vocabulary::build(&cfg).unwrap();
        assert!(matches!(v.decode_ids(&[v.len() as u32]), Err(Error::Codec(_))));
        let foreign = TokenSequence::new(vec![Token::Bar], "0000000000000000");
        assert!(matches!(v.encode_ids(&foreign), Err(Error::ConfigMismatch { .. })));
        let unknown = TokenSequence::new(vec![Token::Vpi(3)], cfg.fingerprint());
        assert!(matches!(v.encode_ids(&unknown), Err(Error::Codec(_))));
        assert!(matches!(
            v.decode_ids_checked(&[0], "ffff"),
            Err(Error::ConfigMismatch { .. })
        ));
    }

    #[test]
    fn rejects_malformed_files() {
        assert!(Vocabulary::from_json("{").is_err());
        assert!(Vocabulary::from_json(r#"{"fingerprint":"x","tokens":["Bar"]}"#).is_err());
        assert!(Vocabulary::from_json(
            r#"{"fingerprint":"x","tokens":["PAD","MASK","BOS","EOS","Bar","Bar"]}"#
        )
        .is_err());
    }
}
