//! REMI tokens and their canonical text forms.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Token {
    Pad,
    Mask,
    Bos,
    Eos,
    Bar,
    Position(u32),
    Pitch(u8),
    /// Vertical pitch interval.
    Vpi(i32),
    /// Horizontal pitch interval.
    Hpi(i32),
    VOct(i32),
    /// Vertical interval class, `0..12`.
    Vic(u8),
    HOct(i32),
    /// Horizontal interval class, `0..12`.
    Hic(u8),
    Duration(u32),
}

/// Special tokens in id order.
pub const SPECIALS: [Token; 4] = [Token::Pad, Token::Mask, Token::Bos, Token::Eos];

impl Token {
    pub fn is_special(&self) -> bool {
        matches!(self, Token::Pad | Token::Mask | Token::Bos | Token::Eos)
    }

    /// Tokens that open a pitch-payload group.
    pub fn opens_group(&self) -> bool {
        matches!(
            self,
            Token::Pitch(_) | Token::Vpi(_) | Token::Hpi(_) | Token::VOct(_) | Token::HOct(_)
        )
    }

    pub fn is_vertical(&self) -> bool {
        matches!(self, Token::Vpi(_) | Token::VOct(_) | Token::Vic(_))
    }

    pub fn is_horizontal(&self) -> bool {
        matches!(self, Token::Hpi(_) | Token::HOct(_) | Token::Hic(_))
    }
}

fn signed(v: i32) -> String {
    if v == 0 {
        "0".to_string()
    } else {
        format!("{v:+}")
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Pad => f.write_str("PAD"),
            Token::Mask => f.write_str("MASK"),
            Token::Bos => f.write_str("BOS"),
            Token::Eos => f.write_str("EOS"),
            Token::Bar => f.write_str("Bar"),
            Token::Position(p) => write!(f, "Position_{p}"),
            Token::Pitch(p) => write!(f, "Pitch_{p}"),
            Token::Vpi(i) => write!(f, "VPI_{}", signed(*i)),
            Token::Hpi(i) => write!(f, "HPI_{}", signed(*i)),
            Token::VOct(o) => write!(f, "VOct_{}", signed(*o)),
            Token::Vic(c) => write!(f, "VIC_{c}"),
            Token::HOct(o) => write!(f, "HOct_{}", signed(*o)),
            Token::Hic(c) => write!(f, "HIC_{c}"),
            Token::Duration(d) => write!(f, "Duration_{d}"),
        }
    }
}

fn bad(s: &str) -> Error {
    Error::Codec(format!("not a canonical token: '{s}'"))
}

fn parse_unsigned<T: FromStr>(s: &str, raw: &str) -> Result<T> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) || (s.len() > 1 && s.starts_with('0')) {
        return Err(bad(raw));
    }
    s.parse().map_err(|_| bad(raw))
}

fn parse_signed(s: &str, raw: &str) -> Result<i32> {
    if s == "0" {
        return Ok(0);
    }
    let (sign, digits) = match s.as_bytes().first() {
        Some(b'+') => (1, &s[1..]),
        Some(b'-') => (-1, &s[1..]),
        _ => return Err(bad(raw)),
    };
    let magnitude: i32 = parse_unsigned(digits, raw)?;
    if magnitude == 0 {
        return Err(bad(raw));
    }
    Ok(sign * magnitude)
}

impl FromStr for Token {
    type Err = Error;

    /// Accepts canonical spellings only, so `parse` and `to_string` are
    /// mutually inverse.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "PAD" => return Ok(Token::Pad),
            "MASK" => return Ok(Token::Mask),
            "BOS" => return Ok(Token::Bos),
            "EOS" => return Ok(Token::Eos),
            "Bar" => return Ok(Token::Bar),
            _ => {}
        }
        let (kind, value) = s.split_once('_').ok_or_else(|| bad(s))?;
        let token = match kind {
            "Position" => Token::Position(parse_unsigned(value, s)?),
            "Pitch" => Token::Pitch(parse_unsigned(value, s)?),
            "Duration" => Token::Duration(parse_unsigned(value, s)?),
            "VIC" => Token::Vic(parse_unsigned(value, s)?),
            "HIC" => Token::Hic(parse_unsigned(value, s)?),
            "VPI" => Token::Vpi(parse_signed(value, s)?),
            "HPI" => Token::Hpi(parse_signed(value, s)?),
            "VOct" => Token::VOct(parse_signed(value, s)?),
            "HOct" => Token::HOct(parse_signed(value, s)?),
            _ => return Err(bad(s)),
        };
        Ok(token)
    }
}

impl Serialize for Token {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Token {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Tokens of one piece, tagged with the fingerprint of the strategy that
/// produced them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<Token>,
    pub config_fingerprint: String,
}

impl TokenSequence {
    pub fn new(tokens: Vec<Token>, config_fingerprint: impl Into<String>) -> Self {
        TokenSequence {
            tokens,
            config_fingerprint: config_fingerprint.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.tokens.iter().map(Token::to_string).collect()
    }

    pub fn from_strings<S: AsRef<str>>(strings: &[S], config_fingerprint: impl Into<String>) -> Result<Self> {
        let tokens = strings
            .iter()
            .map(|s| s.as_ref().parse())
            .collect::<Result<Vec<Token>>>()?;
        Ok(TokenSequence::new(tokens, config_fingerprint))
    }
}
