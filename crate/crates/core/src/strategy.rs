//! Tokenization strategy: which reference line, how reference and
//! non-reference pitches are encoded, and the interval vocabulary range.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::reference::ReferenceKind;
use crate::score::GridSpec;

/// Encoding of reference-line pitches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefEncoding {
    Absolute,
    /// Horizontal interval to the previous reference pitch.
    Hpi,
}

/// Encoding of non-reference pitches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonRefEncoding {
    Absolute,
    /// Vertical interval to the governing reference pitch.
    Vpi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalForm {
    #[default]
    PlainInterval,
    /// Octave token followed by an interval-class token in `0..12`.
    OctavePlusClass,
}

pub const DEFAULT_CLAMP: u32 = 48;
pub const MIN_CLAMP: u32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub reference_kind: ReferenceKind,
    pub i_ref: RefEncoding,
    pub i_nonref: NonRefEncoding,
    pub interval_form: IntervalForm,
    pub clamp: u32,
    pub grid: GridSpec,
}

/// The three tokenization families exposed on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    RemiAbsolute,
    AbsVpi,
    HpiVpi,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::RemiAbsolute => "remi-abs",
            Strategy::AbsVpi => "abs-vpi",
            Strategy::HpiVpi => "hpi-vpi",
        }
    }

    pub fn config(&self, reference: ReferenceKind) -> StrategyConfig {
        match self {
            Strategy::RemiAbsolute => StrategyConfig::remi_absolute(),
            Strategy::AbsVpi => StrategyConfig::new(reference, RefEncoding::Absolute, NonRefEncoding::Vpi),
            Strategy::HpiVpi => StrategyConfig::new(reference, RefEncoding::Hpi, NonRefEncoding::Vpi),
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "remi-abs" => Ok(Strategy::RemiAbsolute),
            "abs-vpi" => Ok(Strategy::AbsVpi),
            "hpi-vpi" => Ok(Strategy::HpiVpi),
            other => Err(Error::Config(format!("unknown strategy '{other}'"))),
        }
    }
}

impl StrategyConfig {
    pub fn new(reference_kind: ReferenceKind, i_ref: RefEncoding, i_nonref: NonRefEncoding) -> Self {
        StrategyConfig {
            reference_kind,
            i_ref,
            i_nonref,
            interval_form: IntervalForm::PlainInterval,
            clamp: DEFAULT_CLAMP,
            grid: GridSpec::default(),
        }
    }

    /// Plain REMI with absolute pitches. The reference kind is unused and
    /// fixed to `Skyline` so the fingerprint is unique.
    pub fn remi_absolute() -> Self {
        StrategyConfig::new(ReferenceKind::Skyline, RefEncoding::Absolute, NonRefEncoding::Absolute)
    }

    /// remi-abs plus abs-vpi and hpi-vpi over each in-score reference, with
    /// display names.
    pub fn table_strategies() -> Vec<(String, StrategyConfig)> {
        let mut out = vec![("remi-abs".to_string(), StrategyConfig::remi_absolute())];
        for strategy in [Strategy::AbsVpi, Strategy::HpiVpi] {
            for kind in [ReferenceKind::Melody, ReferenceKind::Skyline, ReferenceKind::BottomLine] {
                out.push((format!("{}/{}", strategy.name(), kind.as_str()), strategy.config(kind)));
            }
        }
        out
    }

    pub fn with_interval_form(mut self, form: IntervalForm) -> Self {
        self.interval_form = form;
        self
    }

    pub fn with_clamp(mut self, clamp: u32) -> Self {
        self.clamp = clamp;
        self
    }

    pub fn with_grid(mut self, grid: GridSpec) -> Self {
        self.grid = grid;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.clamp < MIN_CLAMP {
            return Err(Error::Config(format!(
                "clamp must be at least {MIN_CLAMP}, got {}",
                self.clamp
            )));
        }
        if self.clamp > 127 {
            return Err(Error::Config(format!("clamp must be at most 127, got {}", self.clamp)));
        }
        self.grid.validate()
    }

    /// Whether any payload depends on the reference line.
    pub fn uses_reference(&self) -> bool {
        self.i_ref == RefEncoding::Hpi || self.i_nonref == NonRefEncoding::Vpi
    }

    /// Whether `Pitch` tokens can appear.
    pub fn has_absolute_payload(&self) -> bool {
        self.i_ref == RefEncoding::Absolute || self.i_nonref == NonRefEncoding::Absolute
    }

    /// Canonical JSON; field order is fixed by the struct definition.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("strategy config serializes")
    }

    /// Hex SHA-256 prefix of [`StrategyConfig::canonical_json`].
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        hex::encode(&digest[..8])
    }

    /// Octave range reachable by intervals in `-clamp..=clamp`.
    pub fn octave_range(&self) -> (i32, i32) {
        let c = self.clamp as i32;
        ((-c).div_euclid(12), c.div_euclid(12))
    }
}

impl fmt::Display for StrategyConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let family = match (self.i_ref, self.i_nonref) {
            (RefEncoding::Absolute, NonRefEncoding::Absolute) => return write!(f, "remi-abs"),
            (RefEncoding::Absolute, NonRefEncoding::Vpi) => "abs-vpi",
            (RefEncoding::Hpi, NonRefEncoding::Vpi) => "hpi-vpi",
            (RefEncoding::Hpi, NonRefEncoding::Absolute) => "hpi-abs",
        };
        write!(f, "{family}/{}", self.reference_kind.as_str())
    }
}
