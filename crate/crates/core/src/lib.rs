//! Symbolic music tokenization with absolute or interval-based pitch
//! encodings on a REMI scaffold.
//!
//! The pipeline reads a Standard MIDI File ([`smf`]), snaps it to a metric
//! grid ([`score`]), picks a monophonic reference line ([`reference`]),
//! re-expresses pitches relative to that line ([`intervalize`]) and lays
//! the result out as REMI tokens ([`remi`]). [`vocab`] maps tokens to ids.

pub mod error;
pub mod intervalize;
pub mod labels;
pub mod pipeline;
pub mod reference;
pub mod remi;
pub mod score;
pub mod smf;
pub mod strategy;
pub mod token;
pub mod vocab;

pub use error::{Error, Result};
pub use pipeline::{detokenize, detokenize_with_time_signatures, tokenize, ReferenceInput, Tokenized};
pub use reference::{ReferenceKind, ReferenceStream};
pub use score::{quantize, GridSpec, NoteEvent, QuantizedScore, Score, TimeSignature};
pub use strategy::{IntervalForm, NonRefEncoding, RefEncoding, Strategy, StrategyConfig};
pub use token::{Token, TokenSequence};
pub use vocab::Vocabulary;

