//! Dense ELP(10) extraction throughput on synthetic 84x112 faces.
//!
//! `cargo run --release --example bench_extraction -- [images]`

use std::time::Instant;

use elp_descriptors::dataset::synthetic_faces;
use elp_descriptors::imaging::window_grid_dims;
use elp_descriptors::{extract_all, ElpParams, SubImageGrid};

fn main() -> elp_descriptors::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let faces = synthetic_faces(5, n.div_ceil(5), 84, 112, 0);
    let images = &faces.images[..n.min(faces.len())];
    let params = ElpParams::default();
    let (rows, cols) = window_grid_dims(112, 84, params.window_side, params.stride)?;

    let start = Instant::now();
    let vectors = extract_all(images, &params.into(), SubImageGrid::WHOLE)?;
    let secs = start.elapsed().as_secs_f64();
    let windows = images.len() * rows * cols;
    println!(
        "{} images, {} windows each, {secs:.2} s on {} threads: {:.1} images/s, {:.0} windows/s",
        vectors.len(),
        rows * cols,
        rayon::current_num_threads(),
        images.len() as f64 / secs,
        windows as f64 / secs
    );
    Ok(())
}
