//! Experiment runner for [`rstab_core`].
//!
//! A JSON manifest names a model, a list of grid resolutions, a surface and
//! a list of tasks. [`run`] executes every task for every requested `r`,
//! writes `report.json`, `convergence.csv` and per-task CSV tables, and says
//! whether every assertion passed. The `rstab` binary wraps this with exit
//! codes 0 (all pass), 1 (an assertion failed) and 2 (bad manifest or
//! usage).

pub mod cache;
pub mod catalog;
pub mod manifest;
pub mod report;
pub mod tasks;

// The book chapters are compiled as doc-tests of this crate, which sees both
// libraries.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/curvature-algebra.md")]
    pub mod curvature_algebra {}
    #[doc = include_str!("../../../book/src/spacetimes-and-grids.md")]
    pub mod spacetimes_and_grids {}
    #[doc = include_str!("../../../book/src/surfaces.md")]
    pub mod surfaces {}
    #[doc = include_str!("../../../book/src/operators.md")]
    pub mod operators {}
    #[doc = include_str!("../../../book/src/variations.md")]
    pub mod variations {}
    #[doc = include_str!("../../../book/src/stability.md")]
    pub mod stability {}
    #[doc = include_str!("../../../book/src/runner.md")]
    pub mod runner {}
    #[doc = include_str!("../../../book/src/manifest-reference.md")]
    pub mod manifest_reference {}
}

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rstab_core::grid::FiberGrid;

use crate::manifest::{Manifest, ManifestError};
use crate::report::{Environment, RunReport};
use crate::tasks::{run_task, Context};

pub use crate::manifest::Task;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the manifest output directory.
    pub out: Option<PathBuf>,
    /// Overrides the manifest seed.
    pub seed: Option<u64>,
    /// Worker threads; all cores when `None`.
    pub jobs: Option<usize>,
    /// Grid cache directory; grids are built in memory when `None`.
    pub cache: Option<PathBuf>,
}

#[derive(Debug)]
pub enum RunError {
    Manifest(ManifestError),
    Io(std::io::Error),
    Setup(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Manifest(_) | RunError::Setup(_) => EXIT_USAGE,
            RunError::Io(_) => EXIT_FAIL,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Manifest(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
            RunError::Setup(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

pub struct RunOutcome {
    pub report: RunReport,
    pub out_dir: PathBuf,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.report.all_passed {
            EXIT_PASS
        } else {
            EXIT_FAIL
        }
    }
}

pub fn load_manifest(path: &Path) -> Result<Manifest, RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        RunError::Manifest(ManifestError {
            diagnostics: vec![format!("cannot read {}: {e}", path.display())],
        })
    })?;
    let dir = path.parent().unwrap_or(Path::new("."));
    Manifest::from_json_str_in(&text, dir).map_err(RunError::Manifest)
}

/// Runs every task of `manifest` and writes the outputs.
pub fn run(mut manifest: Manifest, opts: &RunOptions) -> Result<RunOutcome, RunError> {
    if let Some(seed) = opts.seed {
        manifest.seed = seed;
    }
    let out_dir = opts
        .out
        .clone()
        .or_else(|| manifest.output.clone())
        .unwrap_or_else(|| PathBuf::from("rstab-out"));
    let threads = opts.jobs.unwrap_or_else(rayon::current_num_threads).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| RunError::Setup(format!("cannot start {threads} worker threads: {e}")))?;

    let model = Arc::new(manifest.model.build().map_err(|e| RunError::Setup(e.to_string()))?);
    let mut grids = Vec::new();
    for spec in manifest.grid_specs() {
        let grid = match &opts.cache {
            Some(dir) => cache::load_or_build(dir, spec)?.0,
            None => FiberGrid::new(spec).map_err(|e| RunError::Setup(e.to_string()))?,
        };
        grids.push(Arc::new(grid));
    }
    let ctx = Context { manifest, model, grids };

    let mut jobs: Vec<(Task, Option<usize>)> = Vec::new();
    for &task in &ctx.manifest.tasks {
        if task.per_r() {
            jobs.extend(ctx.manifest.r.iter().map(|&r| (task, Some(r))));
        } else {
            jobs.push((task, None));
        }
    }
    let outcomes: Vec<_> = pool.install(|| {
        jobs.iter()
            .map(|&(task, r)| {
                log::info!("running {}{}", task.name(), r.map(|r| format!(" r={r}")).unwrap_or_default());
                run_task(&ctx, task, r)
            })
            .collect()
    });

    std::fs::create_dir_all(&out_dir)?;
    let mut records = Vec::new();
    for o in outcomes {
        for t in &o.tables {
            t.write(&out_dir)?;
        }
        records.push(o.record);
    }
    let report = RunReport::new(Environment::current(threads), ctx.manifest.seed, ctx.manifest.to_json(), records);
    report.write(&out_dir)?;
    Ok(RunOutcome { report, out_dir })
}
