//! Retrieval accuracy of LBP(24,3) as the sub-image grid grows.

use elp_descriptors::dataset::synthetic_faces;
use elp_descriptors::eval::subimage_sweep;
use elp_descriptors::{DistanceMode, LbpParams, SubImageGrid};

fn main() -> elp_descriptors::Result<()> {
    let faces = synthetic_faces(5, 12, 84, 112, 4);
    let grids = (1..=8).map(SubImageGrid::square).collect::<elp_descriptors::Result<Vec<_>>>()?;
    let rows = subimage_sweep(
        &faces.images,
        &faces.labels,
        &faces.names,
        &LbpParams::new(24, 3)?.into(),
        &grids,
        5,
        DistanceMode::Paper,
    )?;
    println!("grid,length,accuracy");
    for row in rows {
        println!("{},{},{:.4}", row.grid, row.length, row.accuracy);
    }
    Ok(())
}
