use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use intervalize::labels::{align_labels, Alignment, HistogramReport, LabelFile, LabelSet};
use intervalize::pipeline::{extract_reference as extract, tokenize_quantized, ReferenceInput, REFERENCE_TRACK};
use intervalize::{
    detokenize_with_time_signatures, quantize, NonRefEncoding, NoteEvent, ReferenceKind, RefEncoding,
    StrategyConfig, TimeSignature, TokenSequence, Vocabulary,
};
use serde::{Deserialize, Serialize};

use crate::corpus::{
    display, jsonl, parallel_map, read_external, read_score, report_failures, write_output, Failure, Piece,
    Usage,
};
use crate::Common;

/// Where label sidecars live: `song.mid` pairs with `song.<suffix>`.
#[derive(Debug, Clone, Args)]
pub struct LabelArgs {
    #[arg(long, default_value = "labels.json")]
    pub labels_suffix: String,
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

fn read_labels(path: &Path) -> Result<LabelFile, Failure> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// One line of a token file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TokenRecord {
    pub path: String,
    pub fingerprint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ids: Option<Vec<u32>>,
    /// Meter of the source piece; common time when absent.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub time_signatures: Vec<TimeSignature>,
}

impl TokenRecord {
    fn sequence(&self, cfg: &StrategyConfig, vocab: Option<&Vocabulary>) -> Result<TokenSequence, Failure> {
        let expected = cfg.fingerprint();
        if self.fingerprint != expected {
            return Err(intervalize::Error::ConfigMismatch {
                expected,
                found: self.fingerprint.clone(),
            }
            .into());
        }
        match (&self.tokens, &self.ids) {
            (Some(tokens), _) => Ok(TokenSequence::from_strings(tokens, self.fingerprint.clone())?),
            (None, Some(ids)) => {
                let vocab = vocab.ok_or_else(|| {
                    Failure::from(intervalize::Error::Codec("id records need --vocab".into()))
                })?;
                Ok(vocab.decode_ids_checked(ids, &self.fingerprint)?)
            }
            (None, None) => Err(intervalize::Error::Parse("record has neither tokens nor ids".into()).into()),
        }
    }

    fn time_signatures(&self) -> Vec<TimeSignature> {
        if self.time_signatures.is_empty() {
            vec![TimeSignature::common_time()]
        } else {
            self.time_signatures.clone()
        }
    }
}

/// Reads a token JSONL file. Lines that do not parse become failures.
fn read_token_file(path: &Path) -> anyhow::Result<Vec<(String, Result<TokenRecord, Failure>)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            let record: Result<TokenRecord, Failure> = serde_json::from_str(line).map_err(Failure::from);
            let label = match &record {
                Ok(r) => format!("{}:{} ({})", path.display(), i + 1, r.path),
                Err(_) => format!("{}:{}", path.display(), i + 1),
            };
            (label, record)
        })
        .collect())
}

fn load_vocab(cfg: &StrategyConfig, path: Option<&Path>) -> anyhow::Result<Vocabulary> {
    let Some(path) = path else {
        return Ok(Vocabulary::build(cfg)?);
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let vocab = Vocabulary::from_json(&text)?;
    if vocab.fingerprint() != cfg.fingerprint() {
        return Err(Usage(format!(
            "vocabulary {} was built for config {}, flags select {}",
            path.display(),
            vocab.fingerprint(),
            cfg.fingerprint()
        ))
        .into());
    }
    Ok(vocab)
}

fn pieces(common: &Common, cfg: &StrategyConfig, inputs: &[PathBuf]) -> Result<Vec<Piece>, Usage> {
    let refs = common.strategy.reference_files(cfg, inputs.len())?;
    Ok(Piece::pair(inputs, refs))
}

fn labels_of(inputs: &[PathBuf]) -> Vec<String> {
    inputs.iter().map(|p| display(p)).collect()
}

pub fn tokenize(common: &Common, ids: bool, vocab: Option<&Path>, inputs: &[PathBuf]) -> anyhow::Result<usize> {
    let cfg = common.strategy.config()?;
    let pieces = pieces(common, &cfg, inputs)?;
    let vocab = if ids || vocab.is_some() {
        Some(load_vocab(&cfg, vocab)?)
    } else {
        None
    };
    let results = parallel_map(&pieces, common.workers, |p| -> Result<TokenRecord, Failure> {
        let t = p.tokenize(&cfg, common.strategy.melody_track)?;
        let (tokens, ids) = match &vocab {
            Some(v) if ids => (None, Some(v.encode_ids(&t.sequence)?)),
            _ => (Some(t.sequence.to_strings()), None),
        };
        Ok(TokenRecord {
            path: display(&p.path),
            fingerprint: t.sequence.config_fingerprint,
            tokens,
            ids,
            time_signatures: t.quantized.time_signatures,
        })
    })?;
    let failures = report_failures(&labels_of(inputs), &results);
    write_output(common.out.as_deref(), &jsonl(results.iter().flatten()))?;
    Ok(failures)
}

pub fn detokenize(common: &Common, anchor: u8, vocab: Option<&Path>, tokens: &Path) -> anyhow::Result<usize> {
    let cfg = common.strategy.config()?;
    let out = common
        .out
        .as_deref()
        .ok_or_else(|| Usage("detokenize needs --out DIR".into()))?;
    let vocab = vocab.map(|v| load_vocab(&cfg, Some(v))).transpose()?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let records = read_token_file(tokens)?;
    let mut seen = HashSet::new();
    let jobs: Vec<_> = records
        .into_iter()
        .map(|(label, record)| {
            let target = record.as_ref().ok().map(|r| {
                let stem = Path::new(&r.path).file_stem().unwrap_or_default().to_string_lossy();
                out.join(format!("{stem}.mid"))
            });
            let duplicate = target.as_ref().is_some_and(|t| !seen.insert(t.clone()));
            (label, record, target, duplicate)
        })
        .collect();
    let results = parallel_map(&jobs, common.workers, |(_, record, target, duplicate)| -> Result<(), Failure> {
        let record = record.as_ref().map_err(Clone::clone)?;
        let target = target.as_ref().expect("parsed records have a target");
        if *duplicate {
            return Err(Failure {
                name: "IoError",
                message: format!("{} would be written twice", target.display()),
                offset: None,
            });
        }
        let seq = record.sequence(&cfg, vocab.as_ref())?;
        let score = detokenize_with_time_signatures(&seq, &cfg, anchor, &record.time_signatures())?;
        fs::write(target, intervalize::smf::write_smf(&score)?)?;
        Ok(())
    })?;
    let labels: Vec<String> = jobs.iter().map(|j| j.0.clone()).collect();
    Ok(report_failures(&labels, &results))
}

pub fn vocab(common: &Common) -> anyhow::Result<usize> {
    let cfg = common.strategy.config()?;
    write_output(common.out.as_deref(), Vocabulary::build(&cfg)?.to_json().as_bytes())?;
    Ok(0)
}

#[derive(Debug, Serialize)]
struct ExpectedLoss {
    reason: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<NoteEvent>,
}

const FIRST_REFERENCE_DROPPED: &str = "first reference note dropped";

#[derive(Debug, Serialize)]
struct Divergence {
    index: usize,
    expected: Option<String>,
    found: Option<String>,
}

#[derive(Debug, Serialize)]
struct RoundtripRecord {
    path: String,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    notes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    expected_loss: Option<ExpectedLoss>,
    #[serde(skip_serializing_if = "Option::is_none")]
    first_divergence: Option<Divergence>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<Failure>,
}

impl RoundtripRecord {
    fn new(path: String) -> Self {
        RoundtripRecord {
            path,
            status: "pass",
            notes: None,
            expected_loss: None,
            first_divergence: None,
            error: None,
        }
    }

    fn failed(path: String, error: Failure) -> Self {
        RoundtripRecord {
            status: "error",
            error: Some(error),
            ..RoundtripRecord::new(path)
        }
    }

    fn compare<T: PartialEq>(&mut self, expected: &[T], found: &[T], show: impl Fn(&T) -> String) {
        let index = expected
            .iter()
            .zip(found)
            .position(|(a, b)| a != b)
            .or_else(|| (expected.len() != found.len()).then(|| expected.len().min(found.len())));
        if let Some(index) = index {
            self.status = "fail";
            self.first_divergence = Some(Divergence {
                index,
                expected: expected.get(index).map(&show),
                found: found.get(index).map(&show),
            });
        }
    }
}

fn note_key(n: &NoteEvent) -> (u8, u64, u64) {
    (n.pitch, n.onset, n.duration)
}

fn show_note(n: &(u8, u64, u64)) -> String {
    format!("{}@{}/{}", n.0, n.1, n.2)
}

fn sorted_keys(notes: &[NoteEvent]) -> Vec<(u8, u64, u64)> {
    let mut keys: Vec<_> = notes.iter().map(note_key).collect();
    keys.sort_unstable();
    keys
}

fn roundtrip_piece(p: &Piece, cfg: &StrategyConfig, melody_track: Option<u32>) -> Result<RoundtripRecord, Failure> {
    let t = p.tokenize(cfg, melody_track)?;
    let mut record = RoundtripRecord::new(display(&p.path));
    let dropped = t.encoded.dropped;
    // the audit knows the dropped pitch, so decoding starts from it
    let anchor = dropped.map_or(60, |n| n.pitch);
    let back = detokenize_with_time_signatures(&t.sequence, cfg, anchor, &t.quantized.time_signatures)?;
    let mut expected = t.quantized.notes.clone();
    if let Some(reference) = t.reference.as_ref().filter(|r| r.is_external()) {
        expected.extend(&reference.events);
    }
    if let Some(d) = dropped {
        if let Some(i) = expected.iter().position(|n| *n == d) {
            expected.remove(i);
        }
        record.expected_loss = Some(ExpectedLoss {
            reason: FIRST_REFERENCE_DROPPED,
            note: Some(d),
        });
    }
    record.notes = Some(expected.len());
    record.compare(&sorted_keys(&expected), &sorted_keys(&back.notes), show_note);
    Ok(record)
}

fn finish_roundtrip(
    common: &Common,
    labels: &[String],
    results: Vec<Result<RoundtripRecord, Failure>>,
    paths: Vec<String>,
) -> anyhow::Result<usize> {
    report_failures(labels, &results);
    let records: Vec<RoundtripRecord> = results
        .into_iter()
        .zip(paths)
        .map(|(r, path)| r.unwrap_or_else(|e| RoundtripRecord::failed(path, e)))
        .collect();
    for (label, r) in labels.iter().zip(&records) {
        if let Some(d) = r.first_divergence.as_ref().filter(|_| r.status == "fail") {
            eprintln!(
                "fail: {label}: first divergence at {}: expected {:?}, found {:?}",
                d.index, d.expected, d.found
            );
        }
    }
    let bad = records.iter().filter(|r| r.status != "pass").count();
    write_output(common.out.as_deref(), &jsonl(&records))?;
    Ok(bad)
}

pub fn roundtrip(common: &Common, inputs: &[PathBuf]) -> anyhow::Result<usize> {
    let cfg = common.strategy.config()?;
    let pieces = pieces(common, &cfg, inputs)?;
    let results = parallel_map(&pieces, common.workers, |p| {
        roundtrip_piece(p, &cfg, common.strategy.melody_track)
    })?;
    let labels = labels_of(inputs);
    finish_roundtrip(common, &labels, results, labels.clone())
}

fn roundtrip_record(
    record: &TokenRecord,
    cfg: &StrategyConfig,
    anchor: u8,
    vocab: Option<&Vocabulary>,
) -> Result<RoundtripRecord, Failure> {
    let seq = record.sequence(cfg, vocab)?;
    let back = detokenize_with_time_signatures(&seq, cfg, anchor, &record.time_signatures())?;
    let mut out = RoundtripRecord::new(record.path.clone());
    out.notes = Some(back.notes.len());
    match cfg.i_ref {
        RefEncoding::Hpi => {
            out.expected_loss = Some(ExpectedLoss {
                reason: FIRST_REFERENCE_DROPPED,
                note: None,
            });
        }
        // an external line is not part of the decoded score, so it cannot
        // be re-extracted
        RefEncoding::Absolute if cfg.uses_reference() && cfg.reference_kind == ReferenceKind::External => {}
        RefEncoding::Absolute => {
            let again = tokenize_quantized(&back, cfg, ReferenceInput::melody(REFERENCE_TRACK))?;
            out.compare(&seq.tokens, &again.sequence.tokens, ToString::to_string);
        }
    }
    Ok(out)
}

pub fn roundtrip_tokens(common: &Common, anchor: u8, vocab: Option<&Path>, tokens: &Path) -> anyhow::Result<usize> {
    let cfg = common.strategy.config()?;
    let vocab = vocab.map(|v| load_vocab(&cfg, Some(v))).transpose()?;
    let records = read_token_file(tokens)?;
    let results = parallel_map(&records, common.workers, |(_, record)| {
        let record = record.as_ref().map_err(Clone::clone)?;
        roundtrip_record(record, &cfg, anchor, vocab.as_ref())
    })?;
    let labels: Vec<String> = records.iter().map(|r| r.0.clone()).collect();
    let paths = records
        .iter()
        .map(|(label, r)| r.as_ref().map_or_else(|_| label.clone(), |r| r.path.clone()))
        .collect();
    finish_roundtrip(common, &labels, results, paths)
}

#[derive(Debug, Serialize)]
struct AlignRecord {
    path: String,
    fingerprint: String,
    labels: Vec<i64>,
    unmatched_rows: usize,
}

pub fn align(
    common: &Common,
    label_args: &LabelArgs,
    label_map: Option<&Path>,
    inputs: &[PathBuf],
) -> anyhow::Result<usize> {
    let cfg = common.strategy.config()?;
    let pieces = pieces(common, &cfg, inputs)?;
    let results = parallel_map(&pieces, common.workers, |p| -> Result<_, Failure> {
        let t = p.tokenize(&cfg, common.strategy.melody_track)?;
        let labels = read_labels(&sidecar(&p.path, &label_args.labels_suffix))?;
        let alignment = align_labels(&t, &labels);
        Ok((t.sequence.config_fingerprint, labels, alignment))
    })?;
    let names = labels_of(inputs);
    let failures = report_failures(&names, &results);
    let set = LabelSet::from_files(results.iter().flatten().map(|r| &r.1));
    let records: Vec<AlignRecord> = pieces
        .iter()
        .zip(&results)
        .filter_map(|(p, r)| r.as_ref().ok().map(|r| (p, r)))
        .map(|(p, (fingerprint, _, alignment))| {
            if alignment.unmatched_rows > 0 {
                eprintln!(
                    "warning: {}: {} label row(s) match no note",
                    p.path.display(),
                    alignment.unmatched_rows
                );
            }
            AlignRecord {
                path: display(&p.path),
                fingerprint: fingerprint.clone(),
                labels: alignment.ids(&set),
                unmatched_rows: alignment.unmatched_rows,
            }
        })
        .collect();
    write_output(common.out.as_deref(), &jsonl(&records))?;
    if let Some(path) = label_map {
        let mut json = serde_json::to_string_pretty(&set)?;
        json.push('\n');
        fs::write(path, json).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(failures)
}

pub fn histogram(
    common: &Common,
    label_args: &LabelArgs,
    predicted_suffix: Option<&str>,
    inputs: &[PathBuf],
) -> anyhow::Result<usize> {
    let cfg = common.strategy.config()?;
    if cfg.i_nonref != NonRefEncoding::Vpi {
        return Err(Usage("histograms need a strategy with vertical intervals".into()).into());
    }
    let pieces = pieces(common, &cfg, inputs)?;
    let results = parallel_map(&pieces, common.workers, |p| -> Result<HistogramReport, Failure> {
        let t = p.tokenize(&cfg, common.strategy.melody_track)?;
        let truth = align_labels(&t, &read_labels(&sidecar(&p.path, &label_args.labels_suffix))?);
        let predicted: Option<Alignment> = predicted_suffix
            .map(|s| read_labels(&sidecar(&p.path, s)).map(|l| align_labels(&t, &l)))
            .transpose()?;
        let mut report = HistogramReport::default();
        report.accumulate(&t, &truth, predicted.as_ref());
        Ok(report)
    })?;
    let failures = report_failures(&labels_of(inputs), &results);
    let mut total = HistogramReport::default();
    for r in results.iter().flatten() {
        total.merge(r);
    }
    write_output(common.out.as_deref(), total.to_json().as_bytes())?;
    Ok(failures)
}

#[derive(Debug, Serialize)]
struct ReferenceRecord {
    path: String,
    kind: ReferenceKind,
    events: Vec<NoteEvent>,
}

pub fn extract_reference(common: &Common, inputs: &[PathBuf]) -> anyhow::Result<usize> {
    let cfg = common.strategy.config()?;
    if !cfg.uses_reference() {
        return Err(Usage("remi-abs has no reference line; pick abs-vpi or hpi-vpi".into()).into());
    }
    let pieces = pieces(common, &cfg, inputs)?;
    let results = parallel_map(&pieces, common.workers, |p| -> Result<ReferenceRecord, Failure> {
        let q = quantize(&read_score(&p.path)?, &cfg.grid)?;
        let external = p.reference_file.as_deref().map(read_external).transpose()?;
        let input = ReferenceInput {
            melody_track: common.strategy.melody_track,
            external: external.as_ref(),
        };
        let reference = extract(&q, &cfg, input)?;
        Ok(ReferenceRecord {
            path: display(&p.path),
            kind: reference.kind,
            events: reference.events,
        })
    })?;
    let failures = report_failures(&labels_of(inputs), &results);
    write_output(common.out.as_deref(), &jsonl(results.iter().flatten()))?;
    Ok(failures)
}
