//! File-driven run: writes matrix files and a config for a small two-state
//! plant, then runs it the way the command-line tool does.

use std::fs;

use nalgebra::DMatrix;
use pglqr::cli::{format_matrix, read_trace, run, RunConfig};

fn main() -> pglqr::Result<()> {
    let dir = std::env::temp_dir().join("pglqr-config-example");
    fs::create_dir_all(&dir)?;
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -0.5]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let eye = DMatrix::<f64>::identity(2, 2);
    fs::write(dir.join("A.txt"), format_matrix(&a))?;
    fs::write(dir.join("B.txt"), format_matrix(&b))?;
    fs::write(dir.join("Q.txt"), format_matrix(&eye))?;
    fs::write(dir.join("R.txt"), format_matrix(&DMatrix::from_element(1, 1, 0.5)))?;
    fs::write(
        dir.join("run.cfg"),
        "a = A.txt\nb = B.txt\nq = Q.txt\nr = R.txt\nalgorithm = flow:natural(1)\nhorizon = 40\nout = out\n",
    )?;

    let cfg = RunConfig::load(&dir.join("run.cfg"))?;
    let summary = run(&cfg)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    let rows = read_trace(&cfg.out.join("trace.csv"))?;
    println!("{} trace rows in {}", rows.len(), cfg.out.display());
    Ok(())
}
