//! Leave-one-out 5-NN chi-squared retrieval on synthetic faces, ELP against LBP.

use elp_descriptors::dataset::synthetic_faces;
use elp_descriptors::{
    eval, extract_all, DescriptorParams, DistanceMode, ElpParams, LabeledCorpus, LbpParams, SubImageGrid,
};

fn main() -> elp_descriptors::Result<()> {
    let faces = synthetic_faces(5, 16, 84, 112, 1);
    let methods: [DescriptorParams; 2] = [ElpParams::default().into(), LbpParams::new(24, 3)?.into()];
    for params in methods {
        for grid in [SubImageGrid::WHOLE, SubImageGrid::square(3)?] {
            let vectors = extract_all(&faces.images, &params, grid)?;
            let corpus = LabeledCorpus::new(
                params.clone(),
                grid,
                vectors,
                faces.labels.clone(),
                faces.names.clone(),
                faces.paths.clone(),
            )?;
            let report = eval::search(&corpus, 5, DistanceMode::Paper)?;
            println!("{:<10} {grid}: {:.1}% ({}/{})", params.label(), 100.0 * report.accuracy, report.correct, corpus.len());
        }
    }
    Ok(())
}
