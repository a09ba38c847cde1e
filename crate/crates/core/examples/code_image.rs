//! Writes ELP code images for the anchor and anchor + 90 projections.
//!
//! `cargo run --example code_image -- [input image] [output dir]`

use std::path::PathBuf;

use elp_descriptors::dataset::synthetic_faces;
use elp_descriptors::elp::elp_code_image;
use elp_descriptors::{ElpParams, GrayImage};

fn main() -> elp_descriptors::Result<()> {
    let mut args = std::env::args().skip(1);
    let img = match args.next() {
        Some(path) => GrayImage::open(path)?,
        None => synthetic_faces(1, 1, 84, 112, 11).images.remove(0),
    };
    let out = PathBuf::from(args.next().unwrap_or_else(|| "codes".into()));
    std::fs::create_dir_all(&out).expect("output directory");
    img.save_png(out.join("input.png"))?;
    let params = ElpParams::default();
    for (idx, name) in [(0, "anchor"), (2, "anchor_plus_90")] {
        let codes = elp_code_image(&img, &params, idx)?;
        let path = out.join(format!("{name}.png"));
        codes.save_png(&path)?;
        println!("{} ({}x{})", path.display(), codes.width(), codes.height());
    }
    Ok(())
}
