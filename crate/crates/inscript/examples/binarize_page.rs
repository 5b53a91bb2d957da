//! Otsu-binarize a page image.
//!
//! Renders a synthetic inscription page, runs the threshold sweep, and
//! writes the grayscale input plus the binarized result as PGM files.
//!
//! ```bash
//! cargo run --example binarize_page
//! ```

use std::fs;
use std::path::PathBuf;

use inscript::binarize::{binarize, Polarity};
use inscript::corpus::{render_page, Family};
use inscript::raster::write_pgm;
use inscript::segment::GridSpec;

fn main() -> anyhow::Result<()> {
    let out_dir = PathBuf::from("target/examples/binarize_page");
    fs::create_dir_all(&out_dir)?;

    let grid = GridSpec::new(3, 5);
    let ids: Vec<usize> = (0..grid.cells()).map(|i| i % 8).collect();
    let page = render_page(&ids, grid, Family::Ancient, 11);
    write_pgm(&page, &out_dir.join("page.pgm"))?;

    let (binary, otsu, polarity) = binarize(&page, Polarity::Auto)?;
    write_pgm(&binary.render_gray(), &out_dir.join("page.bin.pgm"))?;

    let foreground =
        binary.foreground_count() as f64 / (page.width() * page.height()) as f64;
    println!("threshold            : {}", otsu.threshold);
    println!("within-class variance: {:.3}", otsu.within_class_variance);
    println!("polarity             : {polarity}");
    println!("foreground fraction  : {foreground:.3}");
    println!("wrote page.pgm and page.bin.pgm under {}", out_dir.display());
    Ok(())
}
