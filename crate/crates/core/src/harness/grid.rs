use std::path::Path;

use rayon::prelude::*;

use super::{with_workers, RunConfig};
use crate::accounting::{export_trace, format_real, Trace};
use crate::data::FederatedDataset;
use crate::error::{Error, Result};
use crate::model::objectives;
use crate::orchestrator::{run_experiment, Method};

/// Cartesian grid over (step size, local steps).
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub step_sizes: Vec<f64>,
    pub local_steps: Vec<usize>,
}

impl GridSpec {
    pub fn cells(&self) -> impl Iterator<Item = (f64, usize)> + '_ {
        self.step_sizes
            .iter()
            .flat_map(move |&s| self.local_steps.iter().map(move |&l| (s, l)))
    }

    pub fn len(&self) -> usize {
        self.step_sizes.len() * self.local_steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The tuning grids used for the reported experiments: 7 × 5 for the
/// second-order methods, 8 × 5 for FedAvg.
pub fn default_grid(method: Method) -> GridSpec {
    if method.is_second_order() {
        GridSpec {
            step_sizes: vec![0.1, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
            local_steps: vec![1, 2, 3, 5, 10],
        }
    } else {
        GridSpec {
            step_sizes: vec![1e-5, 1e-4, 1e-3, 1e-2, 0.1, 0.5, 0.9, 1.0],
            local_steps: vec![1, 10, 25, 50, 100],
        }
    }
}

impl RunConfig {
    /// Grid from `grid-step-sizes` / `grid-local-steps`, falling back to the
    /// method's default sets.
    pub fn grid(&self) -> GridSpec {
        let default = default_grid(self.method);
        GridSpec {
            step_sizes: self.grid_step_sizes.clone().unwrap_or(default.step_sizes),
            local_steps: self.grid_local_steps.clone().unwrap_or(default.local_steps),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridCell {
    pub step_size: f64,
    pub local_steps: usize,
    /// `+inf` when the run failed or ended non-finite.
    pub final_loss: f64,
    pub diverged: bool,
    pub trace: Option<Trace>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub cells: Vec<GridCell>,
    pub best: Option<usize>,
}

impl GridOutcome {
    pub fn best_cell(&self) -> Option<&GridCell> {
        self.best.map(|i| &self.cells[i])
    }
}

/// Smallest finite final loss; ties prefer the larger step size, then fewer
/// local steps.
pub fn select_best(cells: &[GridCell]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in cells.iter().enumerate() {
        if !c.final_loss.is_finite() {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => {
                let cur = &cells[b];
                c.final_loss < cur.final_loss
                    || (c.final_loss == cur.final_loss
                        && (c.step_size > cur.step_size
                            || (c.step_size == cur.step_size && c.local_steps < cur.local_steps)))
            }
        };
        if better {
            best = Some(i);
        }
    }
    best
}

/// Runs every cell with the experiment seed of `cfg`, so all cells see the
/// same client samples and concurrency cannot change any result.
pub fn run_grid(cfg: &RunConfig, data: &FederatedDataset, grid: &GridSpec) -> Result<GridOutcome> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty grid".into()));
    }
    let objs = objectives(&data.clients, cfg.gamma)?;
    let settings: Vec<(f64, usize)> = grid.cells().collect();
    let experiments = settings
        .iter()
        .map(|&(s, l)| {
            RunConfig {
                step_size: s,
                local_steps: l,
                ..cfg.clone()
            }
            .experiment_config()
        })
        .collect::<Result<Vec<_>>>()?;

    let cells = with_workers(cfg.workers, || {
        settings
            .par_iter()
            .zip(experiments.par_iter())
            .map(
                |(&(step_size, local_steps), exp)| match run_experiment(exp, &objs) {
                    Ok(trace) => {
                        let last = trace.final_loss().unwrap_or(f64::INFINITY);
                        GridCell {
                            step_size,
                            local_steps,
                            final_loss: if last.is_finite() {
                                last
                            } else {
                                f64::INFINITY
                            },
                            diverged: trace.divergence().diverged(),
                            trace: Some(trace),
                            error: None,
                        }
                    }
                    Err(e) => GridCell {
                        step_size,
                        local_steps,
                        final_loss: f64::INFINITY,
                        diverged: true,
                        trace: None,
                        error: Some(e.to_string()),
                    },
                },
            )
            .collect::<Vec<_>>()
    })?;
    let best = select_best(&cells);
    Ok(GridOutcome { cells, best })
}

pub fn cell_file_name(cfg: &RunConfig, cell: &GridCell) -> String {
    format!(
        "{}_{}_{}_step{}_local{}.csv",
        cfg.method.name(),
        cfg.dataset.name(),
        cfg.seed,
        cell.step_size,
        cell.local_steps
    )
}

/// Writes one trace per cell and `summary.csv` into `dir`.
pub fn write_grid_summary(cfg: &RunConfig, outcome: &GridOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    for cell in &outcome.cells {
        if let Some(trace) = &cell.trace {
            export_trace(trace, &dir.join(cell_file_name(cfg, cell)))?;
        }
    }
    let path = dir.join(format!(
        "{}_{}_{}_summary.csv",
        cfg.method.name(),
        cfg.dataset.name(),
        cfg.seed
    ));
    let file = std::fs::File::create(&path).map_err(|e| Error::file(&path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record([
        "step_size",
        "local_steps",
        "final_loss",
        "diverged",
        "selected",
    ])?;
    for (i, cell) in outcome.cells.iter().enumerate() {
        w.write_record([
            format_real(cell.step_size),
            cell.local_steps.to_string(),
            format_real(cell.final_loss),
            cell.diverged.to_string(),
            (outcome.best == Some(i)).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
