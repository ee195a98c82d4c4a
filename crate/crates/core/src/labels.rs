//! Note-level labels projected onto tokens, and vertical-interval
//! histograms grouped by label.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::intervalize::Payload;
use crate::pipeline::Tokenized;
use crate::score::NoteEvent;
use crate::token::Token;

/// Label id for tokens that carry no supervision.
pub const IGNORE: i64 = -1;

/// Pitch part of a label row: an exact MIDI pitch or `"*"` for any note at
/// the onset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PitchSelector {
    Exact(u8),
    Any,
}

impl PitchSelector {
    pub fn matches(&self, pitch: u8) -> bool {
        match self {
            PitchSelector::Exact(p) => *p == pitch,
            PitchSelector::Any => true,
        }
    }
}

impl Serialize for PitchSelector {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            PitchSelector::Exact(p) => s.serialize_u8(*p),
            PitchSelector::Any => s.serialize_str("*"),
        }
    }
}

impl<'de> Deserialize<'de> for PitchSelector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = PitchSelector;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a MIDI pitch or \"*\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<PitchSelector, E> {
                if v <= 127 {
                    Ok(PitchSelector::Exact(v as u8))
                } else {
                    Err(E::custom(format!("pitch {v} outside 0..=127")))
                }
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<PitchSelector, E> {
                if v < 0 {
                    return Err(E::custom(format!("pitch {v} outside 0..=127")));
                }
                self.visit_u64(v as u64)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<PitchSelector, E> {
                if v == "*" {
                    Ok(PitchSelector::Any)
                } else {
                    Err(E::custom(format!("expected \"*\", found \"{v}\"")))
                }
            }

            fn visit_unit<E: de::Error>(self) -> Result<PitchSelector, E> {
                Ok(PitchSelector::Any)
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRow {
    /// Grid units.
    pub onset: u64,
    pub pitch: PitchSelector,
    pub label: String,
}

impl LabelRow {
    pub fn new(onset: u64, pitch: PitchSelector, label: impl Into<String>) -> Self {
        LabelRow {
            onset,
            pitch,
            label: label.into(),
        }
    }

    pub fn matches(&self, note: &NoteEvent) -> bool {
        self.onset == note.onset && self.pitch.matches(note.pitch)
    }
}

/// Labels of one piece.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LabelFile {
    pub labels: Vec<LabelRow>,
}

impl LabelFile {
    pub fn new(labels: Vec<LabelRow>) -> Self {
        LabelFile { labels }
    }

    /// First row matching `note`, in file order.
    pub fn label_for(&self, note: &NoteEvent) -> Option<&str> {
        self.labels
            .iter()
            .find(|row| row.matches(note))
            .map(|row| row.label.as_str())
    }
}

/// Dense ids for label names, assigned in sorted order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LabelSet {
    pub names: Vec<String>,
}

impl LabelSet {
    pub fn from_files<'a>(files: impl IntoIterator<Item = &'a LabelFile>) -> Self {
        let names: BTreeSet<String> = files
            .into_iter()
            .flat_map(|f| f.labels.iter().map(|r| r.label.clone()))
            .collect();
        LabelSet {
            names: names.into_iter().collect(),
        }
    }

    pub fn id(&self, name: &str) -> Option<i64> {
        self.names
            .binary_search_by(|n| n.as_str().cmp(name))
            .ok()
            .map(|i| i as i64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alignment {
    /// Label per token; `None` for `IGNORE`.
    pub labels: Vec<Option<String>>,
    /// Label rows that matched no note of the piece.
    pub unmatched_rows: usize,
}

impl Alignment {
    pub fn ids(&self, set: &LabelSet) -> Vec<i64> {
        self.labels
            .iter()
            .map(|l| l.as_deref().and_then(|n| set.id(n)).unwrap_or(IGNORE))
            .collect()
    }
}

/// Copies each note's label onto every token of its pitch group.
/// Scaffolding and special tokens stay unlabeled.
pub fn align_labels(tokenized: &Tokenized, labels: &LabelFile) -> Alignment {
    let notes = &tokenized.quantized.notes;
    let unmatched_rows = labels
        .labels
        .iter()
        .filter(|row| !notes.iter().any(|n| row.matches(n)))
        .count();
    if unmatched_rows > 0 {
        log::warn!("{unmatched_rows} label row(s) match no note");
    }
    let token_labels = tokenized
        .token_notes()
        .into_iter()
        .map(|note| note.and_then(|n| labels.label_for(&n)).map(str::to_string))
        .collect();
    Alignment {
        labels: token_labels,
        unmatched_rows,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HistogramBin {
    pub count: u64,
    /// Tokens predicted with this label whose true label differs.
    pub false_positive: u64,
}

/// Counts of vertical intervals per label.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HistogramReport {
    pub bins: BTreeMap<String, BTreeMap<i32, HistogramBin>>,
}

#[derive(Serialize)]
struct BinRecord {
    interval: i32,
    token: String,
    count: u64,
    false_positive: u64,
}

#[derive(Serialize)]
struct LabelRecord<'a> {
    label: &'a str,
    total: u64,
    bins: Vec<BinRecord>,
}

#[derive(Serialize)]
struct ReportRecord<'a> {
    total: u64,
    labels: Vec<LabelRecord<'a>>,
}

impl HistogramReport {
    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.bins.values().map(label_total).sum()
    }

    pub fn false_positives(&self) -> u64 {
        self.bins
            .values()
            .flat_map(|m| m.values())
            .map(|b| b.false_positive)
            .sum()
    }

    /// Adds one piece. `truth` and `predicted` are per-token labels from
    /// [`align_labels`]. Without predictions, intervals are grouped by true
    /// label; with them, by predicted label, and mismatches count as false
    /// positives.
    pub fn accumulate(
        &mut self,
        tokenized: &Tokenized,
        truth: &Alignment,
        predicted: Option<&Alignment>,
    ) {
        for (i, token) in tokenized.sequence.tokens.iter().enumerate() {
            // one count per group: the plain interval or its octave token
            if !matches!(token, Token::Vpi(_) | Token::VOct(_)) {
                continue;
            }
            let Some(event) = tokenized.token_events[i].map(|e| &tokenized.encoded.events[e]) else {
                continue;
            };
            let Payload::Vertical(interval) = event.payload else {
                continue;
            };
            let true_label = truth.labels[i].as_deref();
            let (group, false_positive) = match predicted {
                Some(p) => {
                    let Some(pred) = p.labels[i].as_deref() else {
                        continue;
                    };
                    (pred, true_label != Some(pred))
                }
                None => match true_label {
                    Some(t) => (t, false),
                    None => continue,
                },
            };
            let bin = self
                .bins
                .entry(group.to_string())
                .or_default()
                .entry(interval)
                .or_default();
            bin.count += 1;
            if false_positive {
                bin.false_positive += 1;
            }
        }
    }

    pub fn merge(&mut self, other: &HistogramReport) {
        for (label, bins) in &other.bins {
            let mine = self.bins.entry(label.clone()).or_default();
            for (interval, bin) in bins {
                let b = mine.entry(*interval).or_default();
                b.count += bin.count;
                b.false_positive += bin.false_positive;
            }
        }
    }

    /// Share of `label`'s count whose interval satisfies `pred`.
    pub fn mass_where(&self, label: &str, pred: impl Fn(i32) -> bool) -> f64 {
        let Some(bins) = self.bins.get(label) else {
            return 0.0;
        };
        let total = label_total(bins);
        if total == 0 {
            return 0.0;
        }
        let hit: u64 = bins
            .iter()
            .filter(|(i, _)| pred(**i))
            .map(|(_, b)| b.count)
            .sum();
        hit as f64 / total as f64
    }

    pub fn to_json(&self) -> String {
        let record = ReportRecord {
            total: self.total(),
            labels: self
                .bins
                .iter()
                .map(|(label, bins)| LabelRecord {
                    label,
                    total: label_total(bins),
                    bins: bins
                        .iter()
                        .map(|(interval, bin)| BinRecord {
                            interval: *interval,
                            token: Token::Vpi(*interval).to_string(),
                            count: bin.count,
                            false_positive: bin.false_positive,
                        })
                        .collect(),
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&record).expect("report serializes");
        s.push('\n');
        s
    }
}

fn label_total(bins: &BTreeMap<i32, HistogramBin>) -> u64 {
    bins.values().map(|b| b.count).sum()
}
