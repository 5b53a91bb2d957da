//! Full pipeline on one page: binarize, slice, classify every block by its
//! nearest prototype, and print the digitized text.
//!
//! ```bash
//! cargo run --release --example recognize_page
//! ```

use inscript::corpus::{render_page, synth_corpus, Family};
use inscript::glyphnet::{train, TrainConfig};
use inscript::raster::Decoded;
use inscript::recognize::{build_prototypes, run_pipeline, PipelineOptions};
use inscript::segment::GridSpec;

fn main() -> anyhow::Result<()> {
    let corpus = synth_corpus(6, 25, 19);
    let report = train(&corpus, &TrainConfig::softmax(0.02, 8, 19))?;
    let model = report.checkpoint;
    let prototypes = build_prototypes(&model, &corpus)?;

    let grid = GridSpec::new(2, 3);
    let ids = vec![0, 1, 2, 3, 4, 5];
    let page = render_page(&ids, grid, Family::Modern, 19);

    let result = run_pipeline(
        &Decoded::Gray(page),
        grid,
        &model,
        &prototypes,
        &PipelineOptions::default(),
    )?;

    println!("digitized text:\n{}\n", result.final_text);
    println!("per-block detail:");
    for p in &result.predictions {
        println!(
            "  ({}, {})  {}  distance {:.3}  prob {:.3}",
            p.origin.0, p.origin.1, p.glyph, p.distance, p.prob
        );
    }
    println!(
        "\ntile: {}x{} (fed to the external validator when one is configured)",
        result.tile.image().width(),
        result.tile.image().height()
    );
    Ok(())
}
