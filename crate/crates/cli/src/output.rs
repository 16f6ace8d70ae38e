//! CSV artifacts shared by several commands.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{Context, Result};
use traji_agents::{EvalReport, LossRecord};

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

/// `step,loss_name,value`.
pub fn write_losses(path: &Path, losses: &[LossRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["step", "loss_name", "value"])?;
    for r in losses {
        w.write_record([r.step.to_string(), r.name.clone(), r.value.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `seed,ref_id,dtw,norm_dtw`.
pub fn write_eval(path: &Path, report: &EvalReport) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["seed", "ref_id", "dtw", "norm_dtw"])?;
    for r in &report.rows {
        w.write_record([r.seed.to_string(), r.ref_id.to_string(), r.dtw.to_string(), r.norm_dtw.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}
