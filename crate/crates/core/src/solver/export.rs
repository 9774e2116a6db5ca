use std::io::Write;

use super::Trajectory;
use crate::error::Result;

/// Write rows `path_id,step,t,X,phi,G`, one per (path, step), or only the
/// terminal step of each path. φ and G are empty for the direct schemes.
pub fn write_trajectories_csv<W: Write>(
    writer: W,
    paths: &[Trajectory],
    terminal_only: bool,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["path_id", "step", "t", "X", "phi", "G"])?;
    for (id, tr) in paths.iter().enumerate() {
        let grid = tr.grid();
        let first = if terminal_only { grid.steps() } else { 0 };
        for i in first..=grid.steps() {
            let (phi, g) = match tr.aux() {
                Some(aux) => (aux[i].phi.to_string(), aux[i].g.to_string()),
                None => (String::new(), String::new()),
            };
            w.write_record([
                id.to_string(),
                i.to_string(),
                grid.time(i).to_string(),
                tr.values()[i].to_string(),
                phi,
                g,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
