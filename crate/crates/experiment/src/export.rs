//! CSV artifact writers. The CSV layouts are the external contract; writers
//! format deterministically so identical runs produce identical bytes.

use crate::config::ExperimentConfig;
use crate::harness::{CellOutcome, LossRecord, SweepResult, TrainedCondition};
use anyhow::{bail, Context, Result};
use dmf_core::dsp::CapFilterPair;
use dmf_core::neural::DeformedFilterPair;
use dmf_core::receiver::EvmReport;
use num_complex::Complex64;
use std::fs;
use std::path::{Path, PathBuf};

/// Shortest decimal form, used in file names (`0.5`, `0.55`, `25`).
pub fn compact(v: f64) -> String {
    format!("{v}")
}

pub const TAPS_HEADER: &str = "index,p_nominal,pb_nominal,p_deformed,pb_deformed";
pub const LOSS_HEADER: &str = "epoch,loss_total,loss_evm,loss_s1,loss_s2";
pub const CONSTELLATION_HEADER: &str = "re_tx,im_tx,re_rx,im_rx";

/// Tap table: index, time-reversed nominal pair, deformed pair.
pub fn taps_csv(nominal: &CapFilterPair, deformed: &DeformedFilterPair) -> Result<String> {
    if deformed.p.len() != nominal.len() {
        bail!(
            "deformed filter length {} does not match the configured length {}",
            deformed.p.len(),
            nominal.len()
        );
    }
    let (q, r) = nominal.matched_taps();
    let mut out = String::from(TAPS_HEADER);
    out.push('\n');
    for i in 0..nominal.len() {
        out.push_str(&format!(
            "{i},{:.12e},{:.12e},{:.12e},{:.12e}\n",
            q[i], r[i], deformed.p[i], deformed.p_b[i]
        ));
    }
    Ok(out)
}

pub fn loss_csv(losses: &[LossRecord]) -> String {
    let mut out = String::from(LOSS_HEADER);
    out.push('\n');
    for l in losses {
        out.push_str(&format!(
            "{},{:.9e},{:.9e},{:.9e},{:.9e}\n",
            l.epoch, l.total, l.evm, l.s1, l.s2
        ));
    }
    out
}

pub fn constellation_csv(points: &[(Complex64, Complex64)]) -> String {
    let mut out = String::from(CONSTELLATION_HEADER);
    out.push('\n');
    for (tx, rx) in points {
        out.push_str(&format!(
            "{:.8},{:.8},{:.8},{:.8}\n",
            tx.re, tx.im, rx.re, rx.im
        ));
    }
    out
}

pub fn sweep_csv(cells: &[Vec<CellOutcome>]) -> String {
    let mut out = String::from(EvmReport::csv_header());
    out.push('\n');
    for row in cells {
        for cell in row {
            out.push_str(&cell.csv_row());
            out.push('\n');
        }
    }
    out
}

fn loss_file_name(trained: &TrainedCondition) -> String {
    match trained.omega_n {
        Some(w) => format!("loss_{}.csv", compact(w)),
        None => "loss_pooled.csv".to_string(),
    }
}

/// Writes every sweep artifact under `out_dir` and returns the file list.
pub fn write_sweep(
    cfg: &ExperimentConfig,
    result: &SweepResult,
    nominal: &CapFilterPair,
) -> Result<Vec<PathBuf>> {
    let dir = &cfg.out_dir;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();

    let write = |name: String, contents: String| -> Result<PathBuf> {
        let path = dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    };

    written.push(write("evm_sweep.csv".into(), sweep_csv(&result.cells))?);

    for trained in &result.conditions {
        written.push(write(loss_file_name(trained), loss_csv(&trained.losses))?);
    }

    for (omega, deformed) in &result.taps {
        match deformed {
            Ok(d) => {
                written.push(write(
                    format!("taps_{}.csv", compact(*omega)),
                    taps_csv(nominal, d)?,
                )?);
            }
            Err(e) => eprintln!("taps export failed for omega_n={omega}: {e}"),
        }
    }

    for row in &result.cells {
        for cell in row {
            if let CellOutcome::Ok(cell) = cell {
                let name = format!(
                    "constellation_w{}_s{}.csv",
                    compact(cell.report.omega_n),
                    compact(cell.report.snr_db)
                );
                written.push(write(name, constellation_csv(&cell.constellation))?);
            }
        }
    }
    Ok(written)
}

/// Convenience wrapper used by the CLI `train` subcommand.
pub fn write_condition(
    cfg: &ExperimentConfig,
    trained: &TrainedCondition,
    omega_n: f64,
) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let ck_path = cfg
        .out_dir
        .join(format!("checkpoint_{}.txt", compact(omega_n)));
    trained.to_checkpoint(cfg).save(&ck_path)?;
    let loss_path = cfg.out_dir.join(format!("loss_{}.csv", compact(omega_n)));
    fs::write(&loss_path, loss_csv(&trained.losses))
        .with_context(|| format!("writing {}", loss_path.display()))?;
    Ok((ck_path, loss_path))
}

/// Reads a CSV written by [`write_sweep`] back into memory (test support).
pub fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use dmf_core::dsp::SystemParams;
    use dmf_core::neural::deform_filters;

    #[test]
    fn taps_csv_shape_and_zero_correction() {
        let pair = SystemParams::ci().nominal_pair().unwrap();
        let delta = vec![Complex64::new(0.0, 0.0); pair.len()];
        let deformed = deform_filters(&pair, &delta).unwrap();
        let csv = taps_csv(&pair, &deformed).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], TAPS_HEADER);
        assert_eq!(lines.len(), 1 + pair.len());
        // zero correction: deformed columns match the nominal ones
        for line in &lines[1..] {
            let cols: Vec<&str> = line.split(',').collect();
            assert_eq!(cols.len(), 5);
            assert_eq!(cols[1], cols[3]);
            assert_eq!(cols[2], cols[4]);
        }
    }

    #[test]
    fn taps_csv_rejects_length_mismatch() {
        let pair = SystemParams::ci().nominal_pair().unwrap();
        let short = DeformedFilterPair {
            p: vec![0.0; 3],
            p_b: vec![0.0; 3],
            correction_norm: 0.0,
        };
        assert!(taps_csv(&pair, &short).is_err());
    }

    #[test]
    fn compact_formatting() {
        assert_eq!(compact(0.5), "0.5");
        assert_eq!(compact(0.55), "0.55");
        assert_eq!(compact(25.0), "25");
    }
}
