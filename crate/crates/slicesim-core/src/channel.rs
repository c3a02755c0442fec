//! Link model: offset free-space pathloss, pathloss normalization for the
//! observation vector, and throughput prediction.
//!
//! Throughput comes from a `(pathloss, PRB count)` lookup table with a
//! Shannon-capacity fallback. Tables are either generated synthetically from
//! the fallback model or imported from CSV, so measured data can be dropped
//! in without touching the simulator.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use thiserror::Error;

use crate::config::NetworkConfig;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("PRB count {0} is not a column of the throughput table")]
    UnknownPrbColumn(u32),
    #[error("invalid table grid: {0}")]
    InvalidGrid(String),
    #[error("table I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("table schema error at line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("table invariant violated: {0}")]
    Invariant(String),
}

/// Pathloss in dB at `distance_m` meters from the base station.
///
/// Free-space term with distance in km and frequency in MHz (pairing with the
/// 32.44 constant), plus the calibration offset. Distances below `d_min_m`
/// are clamped up to it.
pub fn pathloss_db(distance_m: f64, cfg: &NetworkConfig) -> f64 {
    let d_km = distance_m.max(cfg.d_min_m) / 1000.0;
    20.0 * d_km.log10() + 20.0 * cfg.carrier_freq_mhz.log10() + 32.44 + cfg.cal_offset_db
}

/// Maps pathloss linearly onto `[0, 1]` for the observation vector.
///
/// The anchors are the pathloss at the distance clamp and at the half
/// diagonal of the square area (the farthest reachable point), clamped
/// outside.
pub fn normalize_pathloss(pl_db: f64, cfg: &NetworkConfig) -> f64 {
    let lo = pathloss_db(cfg.d_min_m, cfg);
    let hi = pathloss_db(cfg.d_max_m(), cfg);
    ((pl_db - lo) / (hi - lo)).clamp(0.0, 1.0)
}

/// Shannon-capacity throughput in Mbps for `n_prb` PRBs at pathloss `pl_db`.
///
/// SINR_dB = link_budget_db - pl_db, clamped to the configured cap and floor;
/// at or below the floor the link is in outage and carries nothing.
pub fn shannon_throughput(pl_db: f64, n_prb: u32, cfg: &NetworkConfig) -> f64 {
    let sinr_db = (cfg.link_budget_db - pl_db).clamp(cfg.sinr_floor_db, cfg.sinr_cap_db);
    if sinr_db <= cfg.sinr_floor_db {
        return 0.0;
    }
    let snr = 10f64.powf(sinr_db / 10.0);
    cfg.eta * n_prb as f64 * cfg.prb_bw_khz * 1e3 * (1.0 + snr).log2() / 1e6
}

/// Where a table's values came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Synthetic,
    Imported,
}

/// Dense `(pathloss, PRB count) -> throughput` map.
///
/// Rows follow the pathloss grid, columns the PRB grid; both grids are
/// strictly increasing. Values are nonincreasing along pathloss and
/// nondecreasing along PRBs.
#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputTable {
    pl_grid: Vec<f64>,
    prb_grid: Vec<u32>,
    /// Row-major: `values[row * prb_grid.len() + col]`.
    values: Vec<f64>,
    provenance: Provenance,
}

impl ThroughputTable {
    /// Builds a table from parts, checking every invariant.
    pub fn new(
        pl_grid: Vec<f64>,
        prb_grid: Vec<u32>,
        values: Vec<f64>,
        provenance: Provenance,
    ) -> Result<Self, ChannelError> {
        let t = Self {
            pl_grid,
            prb_grid,
            values,
            provenance,
        };
        t.check_invariants()?;
        Ok(t)
    }

    pub fn pl_grid(&self) -> &[f64] {
        &self.pl_grid
    }

    pub fn prb_grid(&self) -> &[u32] {
        &self.prb_grid
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn value_at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.prb_grid.len() + col]
    }

    fn check_invariants(&self) -> Result<(), ChannelError> {
        if self.pl_grid.is_empty() || self.prb_grid.is_empty() {
            return Err(ChannelError::InvalidGrid("grids must be nonempty".into()));
        }
        if self.values.len() != self.pl_grid.len() * self.prb_grid.len() {
            return Err(ChannelError::InvalidGrid(format!(
                "value matrix has {} cells, grids imply {}",
                self.values.len(),
                self.pl_grid.len() * self.prb_grid.len()
            )));
        }
        if self.pl_grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(ChannelError::InvalidGrid(
                "pathloss grid must be strictly increasing".into(),
            ));
        }
        if self.prb_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ChannelError::InvalidGrid(
                "PRB grid must be strictly increasing".into(),
            ));
        }
        for r in 0..self.pl_grid.len() {
            for c in 0..self.prb_grid.len() {
                let v = self.value_at(r, c);
                if !v.is_finite() || v < 0.0 {
                    return Err(ChannelError::Invariant(format!(
                        "cell (pl={}, prb={}) has invalid throughput {v}",
                        self.pl_grid[r], self.prb_grid[c]
                    )));
                }
                if self.prb_grid[c] == 0 && v != 0.0 {
                    return Err(ChannelError::Invariant(format!(
                        "cell (pl={}, prb=0) must be zero, got {v}",
                        self.pl_grid[r]
                    )));
                }
                if r > 0 && self.value_at(r - 1, c) < v {
                    return Err(ChannelError::Invariant(format!(
                        "throughput increases with pathloss at (pl={}, prb={})",
                        self.pl_grid[r], self.prb_grid[c]
                    )));
                }
                if c > 0 && self.value_at(r, c - 1) > v {
                    return Err(ChannelError::Invariant(format!(
                        "throughput decreases with PRB count at (pl={}, prb={})",
                        self.pl_grid[r], self.prb_grid[c]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Throughput at `(pl_db, n_prb)`: linear interpolation along the
    /// pathloss axis, clamped to the end rows outside the grid. The PRB count
    /// must appear exactly in the grid. Exact grid hits return the stored
    /// value bit-exactly.
    pub fn lookup(&self, pl_db: f64, n_prb: u32) -> Result<f64, ChannelError> {
        let col = self
            .prb_grid
            .binary_search(&n_prb)
            .map_err(|_| ChannelError::UnknownPrbColumn(n_prb))?;
        Ok(self.interpolate_col(pl_db, col))
    }

    fn interpolate_col(&self, pl_db: f64, col: usize) -> f64 {
        let grid = &self.pl_grid;
        if pl_db <= grid[0] {
            return self.value_at(0, col);
        }
        let last = grid.len() - 1;
        if pl_db >= grid[last] {
            return self.value_at(last, col);
        }
        // First row with breakpoint >= pl_db; pl_db is strictly inside.
        let hi = grid.partition_point(|&g| g < pl_db);
        if grid[hi] == pl_db {
            return self.value_at(hi, col);
        }
        let lo = hi - 1;
        let t = (pl_db - grid[lo]) / (grid[hi] - grid[lo]);
        let a = self.value_at(lo, col);
        let b = self.value_at(hi, col);
        a + t * (b - a)
    }

    /// Writes the table as CSV: header `pl_db,n_prb,throughput_mbps`, one row
    /// per cell, sorted by (pl_db, n_prb), LF line endings.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), ChannelError> {
        out.write_all(b"pl_db,n_prb,throughput_mbps\n")?;
        for (r, pl) in self.pl_grid.iter().enumerate() {
            for (c, prb) in self.prb_grid.iter().enumerate() {
                writeln!(out, "{pl},{prb},{}", self.value_at(r, c))?;
            }
        }
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<(), ChannelError> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Generates a synthetic table whose cells equal [`shannon_throughput`] at
/// each grid point. The pathloss grid spans the reachable range
/// `[PL(d_min), PL(d_max)]` in steps of `pl_grid_step_db`.
pub fn generate_table(
    cfg: &NetworkConfig,
    pl_grid_step_db: f64,
    prb_values: &[u32],
) -> Result<ThroughputTable, ChannelError> {
    if !(pl_grid_step_db > 0.0) {
        return Err(ChannelError::InvalidGrid(format!(
            "pathloss grid step must be positive, got {pl_grid_step_db}"
        )));
    }
    if prb_values.is_empty() {
        return Err(ChannelError::InvalidGrid("PRB value list is empty".into()));
    }
    if prb_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ChannelError::InvalidGrid(
            "PRB values must be strictly increasing".into(),
        ));
    }
    let lo = pathloss_db(cfg.d_min_m, cfg);
    let hi = pathloss_db(cfg.d_max_m(), cfg);
    let mut pl_grid = Vec::new();
    let mut pl = lo;
    while pl < hi {
        pl_grid.push(pl);
        pl += pl_grid_step_db;
    }
    pl_grid.push(hi);
    let mut values = Vec::with_capacity(pl_grid.len() * prb_values.len());
    for &pl in &pl_grid {
        for &prb in prb_values {
            values.push(shannon_throughput(pl, prb, cfg));
        }
    }
    ThroughputTable::new(pl_grid, prb_values.to_vec(), values, Provenance::Synthetic)
}

/// Reads a table from the CSV schema written by [`ThroughputTable::write_csv`]
/// and validates every invariant.
pub fn import_table(path: &Path) -> Result<ThroughputTable, ChannelError> {
    let file = std::fs::File::open(path)?;
    import_table_from(BufReader::new(file))
}

pub fn import_table_from<R: BufRead>(reader: R) -> Result<ThroughputTable, ChannelError> {
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => line?,
        None => {
            return Err(ChannelError::Schema {
                line: 1,
                message: "empty file".into(),
            })
        }
    };
    if header.trim_end() != "pl_db,n_prb,throughput_mbps" {
        return Err(ChannelError::Schema {
            line: 1,
            message: format!("expected header `pl_db,n_prb,throughput_mbps`, got {header:?}"),
        });
    }

    let mut rows: Vec<(f64, u32, f64)> = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let (pl, prb, tput) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), Some(c), None) => (a, b, c),
            _ => {
                return Err(ChannelError::Schema {
                    line: lineno,
                    message: "expected exactly three comma-separated fields".into(),
                })
            }
        };
        let parse_f = |s: &str, what: &str| {
            s.parse::<f64>().map_err(|_| ChannelError::Schema {
                line: lineno,
                message: format!("bad {what} value {s:?}"),
            })
        };
        let pl = parse_f(pl, "pl_db")?;
        let prb = prb.parse::<u32>().map_err(|_| ChannelError::Schema {
            line: lineno,
            message: format!("bad n_prb value {prb:?}"),
        })?;
        let tput = parse_f(tput, "throughput_mbps")?;
        rows.push((pl, prb, tput));
    }

    // Grids are recovered from the row order, which must be sorted by
    // (pl_db, n_prb) and dense.
    let mut pl_grid: Vec<f64> = Vec::new();
    let mut prb_grid: Vec<u32> = Vec::new();
    for (pl, prb, _) in &rows {
        if pl_grid.last() != Some(pl) {
            if pl_grid.iter().any(|g| g == pl) || pl_grid.last().is_some_and(|g| g > pl) {
                return Err(ChannelError::Schema {
                    line: 0,
                    message: "rows are not sorted by pathloss".into(),
                });
            }
            pl_grid.push(*pl);
        }
        if pl_grid.len() == 1 {
            prb_grid.push(*prb);
        }
    }
    if prb_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ChannelError::Schema {
            line: 0,
            message: "PRB columns are not sorted".into(),
        });
    }
    if rows.len() != pl_grid.len() * prb_grid.len() {
        return Err(ChannelError::Schema {
            line: 0,
            message: format!(
                "{} rows do not form a dense {} x {} grid",
                rows.len(),
                pl_grid.len(),
                prb_grid.len()
            ),
        });
    }
    let mut values = Vec::with_capacity(rows.len());
    for (i, (pl, prb, tput)) in rows.iter().enumerate() {
        let (r, c) = (i / prb_grid.len(), i % prb_grid.len());
        if *pl != pl_grid[r] || *prb != prb_grid[c] {
            return Err(ChannelError::Schema {
                line: i + 2,
                message: format!(
                    "cell ({pl}, {prb}) out of order; expected ({}, {})",
                    pl_grid[r], prb_grid[c]
                ),
            });
        }
        values.push(*tput);
    }
    ThroughputTable::new(pl_grid, prb_grid, values, Provenance::Imported)
}

/// The throughput model the environment and the baselines query.
///
/// `Table` answers from the lookup table and falls back to the Shannon model
/// for PRB counts outside the table's grid.
#[derive(Debug, Clone)]
pub enum ThroughputModel {
    Shannon,
    Table(ThroughputTable),
}

impl ThroughputModel {
    pub fn throughput_mbps(&self, pl_db: f64, n_prb: u32, cfg: &NetworkConfig) -> f64 {
        match self {
            ThroughputModel::Shannon => shannon_throughput(pl_db, n_prb, cfg),
            ThroughputModel::Table(t) => t
                .lookup(pl_db, n_prb)
                .unwrap_or_else(|_| shannon_throughput(pl_db, n_prb, cfg)),
        }
    }

    /// The PRB counts a table-driven estimator may search over.
    pub fn prb_grid(&self, cfg: &NetworkConfig) -> Vec<u32> {
        match self {
            ThroughputModel::Shannon => (0..=cfg.n_prb).collect(),
            ThroughputModel::Table(t) => t.prb_grid().to_vec(),
        }
    }
}
