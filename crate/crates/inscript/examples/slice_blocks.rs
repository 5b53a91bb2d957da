//! Slice a binarized page into letter blocks and reassemble the tile.
//!
//! Shows the uniform-grid slicer, the exported `r{row}_c{col}.pgm` crops
//! used for dataset curation, and the tile that would be handed to an
//! external OCR validator.
//!
//! ```bash
//! cargo run --example slice_blocks
//! ```

use std::fs;
use std::path::PathBuf;

use inscript::binarize::{binarize, Polarity};
use inscript::corpus::{render_page, Family};
use inscript::segment::{assemble_tile, export_blocks, slice, GridSpec};

fn main() -> anyhow::Result<()> {
    let out_dir = PathBuf::from("target/examples/slice_blocks");
    fs::create_dir_all(&out_dir)?;

    let grid = GridSpec::new(2, 4);
    let ids: Vec<usize> = (0..grid.cells()).map(|i| i % 6).collect();
    let page = render_page(&ids, grid, Family::Modern, 4);
    let (binary, _, _) = binarize(&page, Polarity::Auto)?;

    let blocks = slice(&binary, grid)?;
    println!("sliced {} blocks of 28x28", blocks.len());
    for block in &blocks {
        let ink: f64 = block.values().iter().sum::<f64>() / block.values().len() as f64;
        println!("  {} ink fraction {ink:.3}", block.export_name());
    }
    let paths = export_blocks(&blocks, &out_dir.join("blocks"))?;
    println!("exported {} crops", paths.len());

    let tile = assemble_tile(&blocks, grid, 1)?;
    fs::write(out_dir.join("tile.pgm"), tile.to_pgm())?;
    println!(
        "tile: {}x{} with 1px gutters -> {}",
        tile.image().width(),
        tile.image().height(),
        out_dir.join("tile.pgm").display()
    );
    Ok(())
}
