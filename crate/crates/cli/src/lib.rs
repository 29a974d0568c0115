//! Command-line harness around `scribble-core`: phantom synthesis, batch
//! scribble generation, Dice evaluation, density statistics, loss gradient
//! checks and PNG overlays.
//!
//! Exit codes: 0 success, 1 some cases failed, 2 invalid input.

use std::fmt;
use std::path::Path;

pub mod args;
pub mod evaluate;
pub mod generate;
pub mod loss_check;
pub mod manifest;
pub mod overlay;
pub mod phantom;
pub mod stats;

pub use args::{run, Cli};

/// Marks an error as caused by bad user input (exit code 2).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvalidInput(pub String);

impl fmt::Display for InvalidInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InvalidInput {}

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

/// Exit code for an error that stopped a command.
pub fn exit_code_for(err: &anyhow::Error) -> i32 {
    if err.chain().any(|e| e.is::<InvalidInput>()) {
        EXIT_INVALID
    } else {
        EXIT_PARTIAL
    }
}

/// Runs `f` on a pool of `workers` threads (all cores when `None`).
pub fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    let threads = match workers {
        Some(0) => return Err(InvalidInput("--workers must be at least 1".into()).into()),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    Ok(pool.install(f))
}

/// Case outputs go in `dir`; created if missing.
pub(crate) fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| anyhow::anyhow!("cannot create {}: {e}", dir.display()))
}
