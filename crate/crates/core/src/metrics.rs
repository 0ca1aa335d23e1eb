//! Append-only CSV metrics with a stable header.
//!
//! One file per training phase, one line per parameter update. Values are
//! written with Rust's shortest-round-trip float formatting, so identical
//! runs produce byte-identical files.

use crate::es::UpdateReport;
use crate::Result;
use std::io::Write;
use std::path::Path;

pub const METRICS_HEADER: &str = "iteration,mean_return,max_return,sigma_r,elite_mean_diff";

/// Streams update reports to a CSV file.
pub struct MetricsWriter {
    file: std::io::BufWriter<std::fs::File>,
}

impl MetricsWriter {
    /// Create (truncate) the file and write the header.
    pub fn create(path: &Path) -> Result<Self> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(file, "{METRICS_HEADER}")?;
        Ok(Self { file })
    }

    pub fn append(&mut self, iteration: usize, report: &UpdateReport) -> Result<()> {
        writeln!(self.file, "{}", format_line(iteration, report))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.file.flush()?;
        Ok(())
    }
}

/// Mean reward difference across the elite directions.
pub fn elite_mean_diff(report: &UpdateReport) -> f64 {
    if report.elites.is_empty() {
        return 0.0;
    }
    report.elites.iter().map(|&i| report.mean_diffs[i]).sum::<f64>() / report.elites.len() as f64
}

fn format_line(iteration: usize, report: &UpdateReport) -> String {
    format!(
        "{},{},{},{},{}",
        iteration,
        report.mean_reward,
        report.max_reward,
        report.sigma_r,
        elite_mean_diff(report)
    )
}

/// 3x3-of-3x3 landing/origin grid: where throws bounced on the robot side
/// crossed with where they were launched from on the human side, with hit
/// counts per cell pair.
#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
pub struct HeatmapGrid {
    /// episodes[robot_cell][origin_cell]
    pub episodes: [[usize; 9]; 9],
    /// hits[robot_cell][origin_cell]
    pub hits: [[usize; 9]; 9],
    pub total: usize,
}

fn bin3(v: f64, lo: f64, hi: f64) -> usize {
    let t = ((v - lo) / (hi - lo) * 3.0).floor();
    (t.max(0.0) as usize).min(2)
}

impl HeatmapGrid {
    /// Robot-side cell: x across the width, y from the end line to the net.
    fn robot_cell(x: f64, y: f64, table: &crate::physics::TableGeometry) -> usize {
        let col = bin3(x, -table.half_width, table.half_width);
        let row = bin3(y, -table.half_length, 0.0);
        row * 3 + col
    }

    /// Origin cell: throw start position on the human side (clamped into
    /// the table-scale box; starts can sit beyond the end line).
    fn origin_cell(x: f64, y: f64, table: &crate::physics::TableGeometry) -> usize {
        let col = bin3(x, -table.half_width, table.half_width);
        let row = bin3(y, 0.0, 2.0 * table.half_length);
        row * 3 + col
    }

    pub fn from_records(
        records: &[crate::env::EpisodeRecord],
        table: &crate::physics::TableGeometry,
    ) -> Self {
        let mut grid = Self::default();
        for r in records {
            let rc = Self::robot_cell(r.throw.landing.x, r.throw.landing.y, table);
            let oc = Self::origin_cell(r.throw.init.position.x, r.throw.init.position.y, table);
            grid.episodes[rc][oc] += 1;
            if r.hit {
                grid.hits[rc][oc] += 1;
            }
            grid.total += 1;
        }
        grid
    }

    /// Percentages over all episodes; sums to 100 up to rounding.
    pub fn percentages(&self) -> [[f64; 9]; 9] {
        let mut out = [[0.0; 9]; 9];
        if self.total == 0 {
            return out;
        }
        for rc in 0..9 {
            for oc in 0..9 {
                out[rc][oc] = 100.0 * self.episodes[rc][oc] as f64 / self.total as f64;
            }
        }
        out
    }

    /// CSV export: one row per (robot_cell, origin_cell).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "robot_cell,origin_cell,episodes,hits,pct")?;
        let pct = self.percentages();
        for rc in 0..9 {
            for oc in 0..9 {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    rc, oc, self.episodes[rc][oc], self.hits[rc][oc], pct[rc][oc]
                )?;
            }
        }
        Ok(())
    }
}
