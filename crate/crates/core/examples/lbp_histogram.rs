//! Uniform rotation-invariant LBP histograms and their rotation behaviour.

use elp_descriptors::dataset::synthetic_faces;
use elp_descriptors::lbp::lbp_descriptor;
use elp_descriptors::{LbpParams, SubImageGrid};

fn main() -> elp_descriptors::Result<()> {
    let img = synthetic_faces(1, 1, 84, 112, 3).images.remove(0);
    for (p, r) in [(8, 1), (24, 3)] {
        let params = LbpParams::new(p, r)?;
        let upright = lbp_descriptor(&img, SubImageGrid::WHOLE, &params)?;
        let turned = lbp_descriptor(&img.rotate90(), SubImageGrid::WHOLE, &params)?;
        let drift: f64 = upright.values.iter().zip(&turned.values).map(|(a, b)| (a - b).abs()).sum();
        let bins: Vec<String> = upright.values.iter().map(|v| format!("{v:.3}")).collect();
        println!("LBP({p},{r}) [{}]", bins.join(" "));
        println!("  L1 change under a 90 degree turn: {drift:.2e}");
    }
    Ok(())
}
