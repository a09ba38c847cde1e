//! ELP descriptors of one synthetic face in merged and detached form.

use elp_descriptors::dataset::synthetic_faces;
use elp_descriptors::elp::elp_descriptor;
use elp_descriptors::{length_of, ElpParams, HistogramMode, SubImageGrid};

fn main() -> elp_descriptors::Result<()> {
    let faces = synthetic_faces(1, 1, 84, 112, 7);
    let img = &faces.images[0];
    for mode in [HistogramMode::Merged, HistogramMode::Detached] {
        let params = ElpParams { histogram_mode: mode, ..ElpParams::default() };
        for n in 1..=3 {
            let grid = SubImageGrid::square(n)?;
            let d = elp_descriptor(img, grid, &params)?;
            let nonzero = d.values.iter().filter(|&&v| v > 0.0).count();
            println!(
                "ELP(10,{}) {grid}: length {} (closed form {}), {nonzero} non-empty bins",
                mode.letter(),
                d.values.len(),
                length_of(&params.clone().into(), grid)
            );
        }
    }
    Ok(())
}
