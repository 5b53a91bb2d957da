//! Accuracy and efficiency accounting over a batch of scored samples.
//!
//! Rebuilds the six-sample reference batch (per-sample efficiencies 79.1,
//! 79.7, 81.3, 75.0, 71.1, 80.0), whose combined efficiency averages to
//! 77.7, and writes the JSON report next to the printed table.
//!
//! ```bash
//! cargo run --example efficiency_report
//! ```

use std::fs;
use std::path::PathBuf;

use inscript::evalkit::{emit_report, format_table, CombinedReport, SampleReport};

fn main() -> anyhow::Result<()> {
    let out_dir = PathBuf::from("target/examples/efficiency_report");
    fs::create_dir_all(&out_dir)?;

    let batch = [
        ("thanjavur_wall_1", 1000, 791),
        ("thanjavur_wall_2", 1000, 797),
        ("thanjavur_wall_3", 1000, 813),
        ("thanjavur_wall_4", 4, 3),
        ("tenkasi_pillar", 1000, 711),
        ("kumbakonam_slab", 5, 4),
    ];
    let samples = batch
        .iter()
        .map(|&(id, total, correct)| SampleReport::new(id, total, Some(correct), None))
        .collect::<Result<Vec<_>, _>>()?;

    let report = CombinedReport::new(samples)?;
    print!("{}", format_table(&report));

    let path = out_dir.join("report.json");
    let bytes = emit_report(&report, &path)?;
    println!("\nwrote {bytes} bytes to {}", path.display());
    Ok(())
}
