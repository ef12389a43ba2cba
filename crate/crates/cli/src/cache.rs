use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use muscle_core::calibration::CalibrationKey;
use muscle_core::{calibrate, default_grid, CalibrationCache, CriticalValueTable, QuantileConfig};

use crate::CliError;

const HEADER: &str = "# beta,alpha,intervals,n_reps,seed,m,q\n";

/// Critical value tables backed by an optional cache file.
pub(crate) struct Store {
    path: Option<PathBuf>,
    cache: CalibrationCache,
    pending: Vec<String>,
    pub verbose: bool,
}

impl Store {
    pub fn open(path: Option<&Path>, verbose: bool) -> Result<Store, CliError> {
        let cache = match path {
            Some(p) if p.exists() => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::Input(format!("cannot read cache {}: {e}", p.display())))?;
                CalibrationCache::parse(&text)?
            }
            _ => CalibrationCache::default(),
        };
        Ok(Store {
            path: path.map(Path::to_path_buf),
            cache,
            pending: Vec::new(),
            verbose,
        })
    }

    /// One table per level at the per-level error, for series of length `n`.
    /// With `verify`, cached lengths are recomputed and must agree exactly.
    pub fn tables(
        &mut self,
        quantiles: &QuantileConfig,
        n: usize,
        mc_reps: usize,
        seed: u64,
        verify: bool,
    ) -> Result<Vec<CriticalValueTable>, CliError> {
        let grid = default_grid(n, quantiles.interval_system);
        let mut out = Vec::with_capacity(quantiles.betas.len());
        for &beta in &quantiles.betas {
            let key = CalibrationKey {
                beta,
                alpha: quantiles.level_alpha(),
                interval_system: quantiles.interval_system,
                n_reps: mc_reps,
                master_seed: seed,
            };
            let missing: Vec<usize> = grid
                .iter()
                .copied()
                .filter(|&m| verify || self.path.is_none() || self.cache.table(&key, &[m]).is_none())
                .collect();
            let start = Instant::now();
            if !missing.is_empty() {
                let fresh = calibrate(beta, key.alpha, key.interval_system, &missing, mc_reps, seed)?;
                self.pending.extend(self.cache.absorb(&fresh)?);
            }
            if self.verbose {
                eprintln!(
                    "calibration beta={beta}: {} of {} lengths cached, {} simulated in {:.1} ms",
                    grid.len() - missing.len(),
                    grid.len(),
                    missing.len(),
                    start.elapsed().as_secs_f64() * 1e3
                );
            }
            let table = self
                .cache
                .table(&key, &grid)
                .ok_or_else(|| CliError::Internal("calibration table incomplete".into()))?;
            out.push(table);
        }
        Ok(out)
    }

    /// Appends records computed since opening.
    pub fn save(&mut self) -> Result<(), CliError> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        if self.pending.is_empty() && path.exists() {
            return Ok(());
        }
        let fail = |e: std::io::Error| CliError::Output(format!("cannot write cache {}: {e}", path.display()));
        let fresh_file = !path.exists();
        let mut f = fs::OpenOptions::new().create(true).append(true).open(path).map_err(fail)?;
        let mut text = String::new();
        if fresh_file {
            text.push_str(HEADER);
        }
        for line in self.pending.drain(..) {
            text.push_str(&line);
            text.push('\n');
        }
        f.write_all(text.as_bytes()).map_err(fail)
    }
}
