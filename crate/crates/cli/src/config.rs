use std::path::PathBuf;

use clap::{Args, ValueEnum};
use intervalize::strategy::IntervalForm;
use intervalize::{GridSpec, ReferenceKind, Strategy, StrategyConfig};

use crate::corpus::Usage;

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StrategyArg {
    #[value(name = "remi-abs")]
    RemiAbs,
    #[value(name = "abs-vpi")]
    AbsVpi,
    #[value(name = "hpi-vpi")]
    HpiVpi,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReferenceArg {
    Melody,
    Skyline,
    Bottomline,
    External,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormArg {
    Plain,
    #[value(name = "oct-class")]
    OctClass,
}

/// Flags that select the tokenization strategy.
#[derive(Debug, Clone, Args)]
pub struct StrategyArgs {
    #[arg(long, value_enum, default_value = "remi-abs")]
    pub strategy: StrategyArg,
    #[arg(long, value_enum, default_value = "skyline")]
    pub reference: ReferenceArg,
    /// Track holding the melody, for `--reference melody`.
    #[arg(long)]
    pub melody_track: Option<u32>,
    /// External reference per input, in input order: a JSON list of
    /// {pitch, onset, duration} in grid units.
    #[arg(long)]
    pub reference_file: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "plain")]
    pub interval_form: FormArg,
    #[arg(long, default_value_t = intervalize::strategy::DEFAULT_CLAMP)]
    pub clamp: u32,
    /// Grid positions per quarter note.
    #[arg(long, default_value_t = 4)]
    pub subdiv: u32,
}

impl StrategyArgs {
    pub fn config(&self) -> Result<StrategyConfig, Usage> {
        let strategy = match self.strategy {
            StrategyArg::RemiAbs => Strategy::RemiAbsolute,
            StrategyArg::AbsVpi => Strategy::AbsVpi,
            StrategyArg::HpiVpi => Strategy::HpiVpi,
        };
        let kind = match self.reference {
            ReferenceArg::Melody => ReferenceKind::Melody,
            ReferenceArg::Skyline => ReferenceKind::Skyline,
            ReferenceArg::Bottomline => ReferenceKind::BottomLine,
            ReferenceArg::External => ReferenceKind::External,
        };
        let form = match self.interval_form {
            FormArg::Plain => IntervalForm::PlainInterval,
            FormArg::OctClass => IntervalForm::OctavePlusClass,
        };
        let grid = GridSpec {
            subdivisions_per_beat: self.subdiv,
            ..GridSpec::default()
        };
        let cfg = strategy
            .config(kind)
            .with_interval_form(form)
            .with_clamp(self.clamp)
            .with_grid(grid);
        cfg.validate().map_err(|e| Usage(e.to_string()))?;
        if cfg.uses_reference() {
            match cfg.reference_kind {
                ReferenceKind::Melody if self.melody_track.is_none() => {
                    return Err(Usage("--reference melody needs --melody-track".into()));
                }
                ReferenceKind::External if self.reference_file.is_empty() => {
                    return Err(Usage("--reference external needs --reference-file".into()));
                }
                _ => {}
            }
        }
        Ok(cfg)
    }

    /// Pairs every input with its external reference file, if any.
    pub fn reference_files(&self, cfg: &StrategyConfig, inputs: usize) -> Result<Vec<Option<PathBuf>>, Usage> {
        if !cfg.uses_reference() || cfg.reference_kind != ReferenceKind::External {
            return Ok(vec![None; inputs]);
        }
        if self.reference_file.len() != inputs {
            return Err(Usage(format!(
                "{} --reference-file given for {inputs} input(s)",
                self.reference_file.len()
            )));
        }
        Ok(self.reference_file.iter().cloned().map(Some).collect())
    }
}
