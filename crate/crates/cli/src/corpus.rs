use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use intervalize::pipeline::{tokenize_detailed, ReferenceInput, Tokenized};
use intervalize::smf::parse_smf;
use intervalize::{NoteEvent, ReferenceKind, ReferenceStream, Score, StrategyConfig};
use rayon::prelude::*;
use serde::Serialize;

/// Bad flags or arguments; exit code 2.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

/// Why one input could not be processed.
#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub name: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offset: Option<usize>,
}

impl From<intervalize::Error> for Failure {
    fn from(e: intervalize::Error) -> Self {
        let offset = match &e {
            intervalize::Error::Grammar { offset, .. } => Some(*offset),
            _ => None,
        };
        Failure {
            name: e.name(),
            message: e.to_string(),
            offset,
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure {
            name: "IoError",
            message: e.to_string(),
            offset: None,
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure {
            name: "ParseError",
            message: e.to_string(),
            offset: None,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.name, self.message)
    }
}

/// Maps `f` over `items` on `workers` threads; results keep input order.
pub fn parallel_map<T, R, F>(items: &[T], workers: usize, f: F) -> anyhow::Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()?;
    Ok(pool.install(|| items.par_iter().map(&f).collect()))
}

/// Prints failures to stderr and returns how many there were.
pub fn report_failures<R>(labels: &[String], results: &[Result<R, Failure>]) -> usize {
    let mut n = 0;
    for (label, r) in labels.iter().zip(results) {
        if let Err(f) = r {
            n += 1;
            match f.offset {
                Some(offset) => eprintln!("error: {label}: {} at offset {offset}: {}", f.name, f.message),
                None => eprintln!("error: {label}: {f}"),
            }
        }
    }
    n
}

pub fn display(path: &Path) -> String {
    path.display().to_string()
}

/// Writes to `out`, or stdout when absent.
pub fn write_output(out: Option<&Path>, content: &[u8]) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, content)?,
        None => io::stdout().lock().write_all(content)?,
    }
    Ok(())
}

pub fn jsonl<T: Serialize>(records: impl IntoIterator<Item = T>) -> Vec<u8> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, &r).expect("record serializes");
        buf.push(b'\n');
    }
    buf
}

pub fn read_score(path: &Path) -> Result<Score, Failure> {
    Ok(parse_smf(&fs::read(path)?)?)
}

pub fn read_external(path: &Path) -> Result<ReferenceStream, Failure> {
    let events: Vec<NoteEvent> = serde_json::from_str(&fs::read_to_string(path)?)?;
    Ok(ReferenceStream {
        kind: ReferenceKind::External,
        events,
    })
}

/// One input together with its optional external reference.
#[derive(Debug, Clone)]
pub struct Piece {
    pub path: PathBuf,
    pub reference_file: Option<PathBuf>,
}

impl Piece {
    pub fn pair(inputs: &[PathBuf], refs: Vec<Option<PathBuf>>) -> Vec<Piece> {
        inputs
            .iter()
            .cloned()
            .zip(refs)
            .map(|(path, reference_file)| Piece { path, reference_file })
            .collect()
    }

    pub fn tokenize(&self, cfg: &StrategyConfig, melody_track: Option<u32>) -> Result<Tokenized, Failure> {
        let score = read_score(&self.path)?;
        let external = self.reference_file.as_deref().map(read_external).transpose()?;
        let input = ReferenceInput {
            melody_track,
            external: external.as_ref(),
        };
        Ok(tokenize_detailed(&score, cfg, input)?)
    }
}
