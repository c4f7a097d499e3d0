//! Stage runner. Each stage reads its inputs (raw files or earlier stage
//! outputs) from disk and writes fixed file names into its own directory
//! below the output root.

mod cluster;
mod complexity;
mod ingest;
mod network;
mod regress;
mod synergy;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Result;
use synergy_core::iotensor::Registry;

use crate::config::PipelineConfig;
use crate::error::{invalid, PipelineError};
use crate::formats;
use crate::manifest::{self, RunManifest, StageRecord};

pub use network::file_stem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Cluster,
    Synergy,
    Network,
    Complexity,
    Regress,
}

impl Stage {
    /// Execution order of a full run.
    pub const ALL: [Stage; 6] = [
        Stage::Ingest,
        Stage::Cluster,
        Stage::Synergy,
        Stage::Network,
        Stage::Complexity,
        Stage::Regress,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Cluster => "cluster",
            Stage::Synergy => "synergy",
            Stage::Network => "network",
            Stage::Complexity => "complexity",
            Stage::Regress => "regress",
        }
    }
}

/// Marker left in a stage directory whose stage failed.
pub const PARTIAL_MARKER: &str = "PARTIAL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Replace existing stage directories.
    pub force: bool,
    /// Report stage timings on standard error.
    pub timings: bool,
}

pub(crate) struct Ctx<'a> {
    pub cfg: &'a PipelineConfig,
    pub registry: Registry,
    pub root: PathBuf,
    pub dir: PathBuf,
    pub pool: rayon::ThreadPool,
}

impl Ctx<'_> {
    pub fn stage_dir(&self, s: Stage) -> PathBuf {
        self.root.join(s.name())
    }

    /// Output of an earlier stage, which must exist.
    pub fn upstream(&self, s: Stage, file: &str) -> Result<PathBuf> {
        let p = self.stage_dir(s).join(file);
        if !p.is_file() {
            anyhow::bail!("missing {} (run the {} stage first)", p.display(), s.name());
        }
        if self.stage_dir(s).join(PARTIAL_MARKER).exists() {
            anyhow::bail!("the {} stage output is partial", s.name());
        }
        Ok(p)
    }
}

fn is_nonempty_dir(p: &Path) -> bool {
    fs::read_dir(p).is_ok_and(|mut d| d.next().is_some())
}

fn check_overwrite(root: &Path, stages: &[Stage], force: bool) -> Result<(), PipelineError> {
    if force {
        return Ok(());
    }
    for s in stages {
        let d = root.join(s.name());
        if is_nonempty_dir(&d) {
            return Err(invalid(format!(
                "{} already exists; pass --force to overwrite",
                d.display()
            )));
        }
    }
    Ok(())
}

fn stage_error(stage: Stage, error: anyhow::Error) -> PipelineError {
    PipelineError::Stage {
        stage: stage.name(),
        error,
    }
}

fn execute(cfg: &PipelineConfig, stage: Stage, opts: RunOptions) -> Result<(), PipelineError> {
    let root = cfg.output_root();
    let dir = root.join(stage.name());
    let fail = |e: anyhow::Error| stage_error(stage, e);
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(|e| fail(e.into()))?;
    }
    fs::create_dir_all(&dir).map_err(|e| fail(e.into()))?;

    let started = Instant::now();
    log::info!("stage {}: start", stage.name());
    let outcome = (|| -> Result<Vec<String>> {
        let period = cfg.period()?;
        let i = &cfg.inputs;
        let registry = formats::read_registry(
            &cfg.resolve(&i.countries),
            &cfg.resolve(&i.industries),
            i.sector_map.as_deref().map(|p| cfg.resolve(p)).as_deref(),
            period,
        )?;
        let mut pool = rayon::ThreadPoolBuilder::new();
        if let Some(n) = cfg.threads {
            pool = pool.num_threads(n);
        }
        let ctx = Ctx {
            cfg,
            registry,
            root: root.clone(),
            dir: dir.clone(),
            pool: pool.build()?,
        };
        match stage {
            Stage::Ingest => ingest::run(&ctx),
            Stage::Cluster => cluster::run(&ctx),
            Stage::Synergy => synergy::run(&ctx),
            Stage::Network => network::run(&ctx),
            Stage::Complexity => complexity::run(&ctx),
            Stage::Regress => regress::run(&ctx),
        }
    })();
    let warnings = match outcome {
        Ok(w) => w,
        Err(e) => {
            let _ = fs::write(dir.join(PARTIAL_MARKER), format!("{e:#}\n"));
            log::error!("stage {}: {e:#}", stage.name());
            return Err(fail(e));
        }
    };
    for w in &warnings {
        log::warn!("{}: {w}", stage.name());
    }
    let record = (|| -> Result<()> {
        let mut m = RunManifest::open(cfg, &root)?;
        m.stages.insert(
            stage.name().to_string(),
            StageRecord {
                outputs: manifest::digest_tree(&dir)?,
                warnings,
            },
        );
        m.write(&root)
    })();
    record.map_err(fail)?;
    let elapsed = started.elapsed();
    log::info!("stage {}: done", stage.name());
    if opts.timings {
        eprintln!("timing {}: {:.3}s", stage.name(), elapsed.as_secs_f64());
    }
    Ok(())
}

/// Runs one stage on the outputs of earlier stages.
pub fn run_stage(
    cfg: &PipelineConfig,
    stage: Stage,
    opts: RunOptions,
) -> Result<(), PipelineError> {
    cfg.validate(&[stage])?;
    check_overwrite(&cfg.output_root(), &[stage], opts.force)?;
    execute(cfg, stage, opts)
}

/// Runs every stage in order and returns the artifact directory.
pub fn run_pipeline(cfg: &PipelineConfig, opts: RunOptions) -> Result<PathBuf, PipelineError> {
    cfg.validate(&Stage::ALL)?;
    let root = cfg.output_root();
    check_overwrite(&root, &Stage::ALL, opts.force)?;
    if opts.force {
        // a fresh manifest, so no record survives from a different run
        let _ = fs::remove_file(root.join(manifest::FILE_NAME));
    }
    for s in Stage::ALL {
        execute(cfg, s, opts)?;
    }
    Ok(root)
}
