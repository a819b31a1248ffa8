use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::harness::config::{deep_merge, GridSpec, RunConfig};
use crate::harness::run::{run_experiment, RunResult};

/// One sweep cell outcome; failures are recorded, not fatal.
#[derive(Debug)]
pub struct SweepCell {
    pub config: RunConfig,
    pub outcome: std::result::Result<RunResult, String>,
}

/// Worker-thread cap: `CDMAD_LAB_THREADS` if set, else available parallelism.
pub fn sweep_threads() -> usize {
    std::env::var("CDMAD_LAB_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

/// Materialize the cross product of grid cells and seeds into full configs.
pub fn expand_grid(base: &serde_json::Value, grid: &GridSpec) -> Result<Vec<RunConfig>> {
    let mut configs = Vec::new();
    for cell in &grid.cells {
        let merged = deep_merge(base, cell);
        for &seed in &grid.seeds {
            let mut with_seed = merged.clone();
            if let serde_json::Value::Object(m) = &mut with_seed {
                m.insert("seed".into(), serde_json::json!(seed));
            }
            let cfg: RunConfig = serde_json::from_value(with_seed)
                .map_err(|e| Error::InvalidConfig(format!("bad grid cell: {e}")))?;
            configs.push(cfg);
        }
    }
    Ok(configs)
}

/// Run every (cell, seed) combination, in parallel up to the thread cap.
/// Output order matches the expanded grid regardless of scheduling.
pub fn sweep(base: &serde_json::Value, grid: &GridSpec) -> Result<Vec<SweepCell>> {
    let configs = expand_grid(base, grid)?;
    if configs.is_empty() {
        return Ok(Vec::new());
    }
    let n_threads = sweep_threads().min(configs.len());
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<SweepCell>>> =
        configs.iter().map(|_| Mutex::new(None)).collect();

    std::thread::scope(|scope| {
        for _ in 0..n_threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= configs.len() {
                    break;
                }
                let cfg = configs[i].clone();
                let outcome = run_experiment(&cfg).map_err(|e| e.to_string());
                *slots[i].lock().unwrap() = Some(SweepCell { config: cfg, outcome });
            });
        }
    });

    Ok(slots
        .into_iter()
        .map(|s| s.into_inner().unwrap().expect("every slot filled"))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_grid_gives_empty_table() {
        let base = serde_json::json!({});
        let grid = GridSpec { seeds: vec![1, 2], cells: vec![] };
        assert!(sweep(&base, &grid).unwrap().is_empty());
    }

    #[test]
    fn expansion_crosses_cells_and_seeds() {
        let base = serde_json::json!({"epochs": 1, "iters_per_epoch": 1});
        let grid = GridSpec {
            seeds: vec![1, 2, 3],
            cells: vec![
                serde_json::json!({"data": {"gamma_l": 10.0}}),
                serde_json::json!({"data": {"gamma_l": 100.0}}),
            ],
        };
        let configs = expand_grid(&base, &grid).unwrap();
        assert_eq!(configs.len(), 6);
        assert_eq!(configs[0].seed, 1);
        assert_eq!(configs[2].seed, 3);
        assert_eq!(configs[0].data.gamma_l, 10.0);
        assert_eq!(configs[3].data.gamma_l, 100.0);
        assert_eq!(configs[0].epochs, 1);
    }

    #[test]
    fn cell_failures_are_recorded_not_fatal() {
        let base = serde_json::json!({"epochs": 1, "iters_per_epoch": 1, "b": 4,
            "data": {"n1": 20, "m1": 20, "test_per_class": 2}});
        let grid = GridSpec {
            seeds: vec![1],
            cells: vec![
                serde_json::json!({"warm_epochs": 5}), // invalid: > epochs
                serde_json::json!({}),
            ],
        };
        let cells = sweep(&base, &grid).unwrap();
        assert_eq!(cells.len(), 2);
        assert!(cells[0].outcome.is_err());
        assert!(cells[1].outcome.is_ok());
    }
}
