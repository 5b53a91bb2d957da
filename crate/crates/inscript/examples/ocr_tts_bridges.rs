//! Double-validation and speech hand-off through external command bridges.
//!
//! Uses stub shell commands so the example runs anywhere: the OCR stub
//! prints a fixed reading of the tile, the TTS stub copies the digitized
//! text into the audio file. Swap in real engines the same way, e.g.
//! `tesseract {input} stdout -l tam` or a cloud TTS wrapper script.
//!
//! ```bash
//! cargo run --release --example ocr_tts_bridges
//! ```

use std::fs;
use std::path::PathBuf;

use inscript::corpus::{render_page, synth_corpus, Family};
use inscript::glyphnet::{train, TrainConfig};
use inscript::raster::Decoded;
use inscript::recognize::{
    build_prototypes, run_pipeline, EngineBridge, PipelineOptions,
};
use inscript::segment::GridSpec;

fn main() -> anyhow::Result<()> {
    let out_dir = PathBuf::from("target/examples/ocr_tts_bridges");
    fs::create_dir_all(&out_dir)?;

    let corpus = synth_corpus(4, 20, 33);
    let model = train(&corpus, &TrainConfig::softmax(0.02, 6, 33))?.checkpoint;
    let prototypes = build_prototypes(&model, &corpus)?;
    let grid = GridSpec::new(1, 4);
    let page = render_page(&[0, 1, 2, 3], grid, Family::Modern, 33);

    // Healthy stubs: the OCR engine's nonempty stdout wins final_text.
    let audio = out_dir.join("page.wav");
    let opts = PipelineOptions {
        ocr: Some(EngineBridge::ocr("printf 'ABCD'; : {input}")?),
        tts: Some(EngineBridge::tts("cp {input} {output}")?),
        audio_out: Some(audio.clone()),
        ..Default::default()
    };
    let result = run_pipeline(&Decoded::Gray(page.clone()), grid, &model, &prototypes, &opts)?;
    println!("net text  : {}", result.net_text);
    println!("ocr text  : {:?}", result.ocr_text);
    println!("final text: {}", result.final_text);
    for p in &result.predictions {
        println!(
            "  block ({}, {}) {} agreed_with_ocr={:?}",
            p.origin.0, p.origin.1, p.glyph, p.agreed_with_ocr
        );
    }
    println!("audio bytes: {}", fs::metadata(&audio)?.len());

    // A broken engine degrades to the network reading, with a warning.
    let opts = PipelineOptions {
        ocr: Some(EngineBridge::ocr("false # {input}")?),
        ..Default::default()
    };
    let fallback = run_pipeline(&Decoded::Gray(page), grid, &model, &prototypes, &opts)?;
    println!("\nwith a failing engine:");
    println!("final text: {}", fallback.final_text);
    for warning in &fallback.bridge_warnings {
        println!("warning   : {warning}");
    }
    Ok(())
}
