//! Small C/gamma grid search with the one-vs-one RBF SVM, then a saved model
//! reloaded and applied to the held-out images.

use elp_descriptors::dataset::synthetic_faces;
use elp_descriptors::svm::{grid_search, ovo_fit, GridSearchOptions};
use elp_descriptors::{extract_all, LabeledCorpus, LbpParams, SubImageGrid, SvcModel, SvcParams};

fn main() -> elp_descriptors::Result<()> {
    let faces = synthetic_faces(4, 15, 84, 112, 2);
    let params = LbpParams::new(24, 3)?;
    let vectors = extract_all(&faces.images, &params.into(), SubImageGrid::WHOLE)?;
    let corpus = LabeledCorpus::new(params.into(), SubImageGrid::WHOLE, vectors, faces.labels, faces.names, faces.paths)?;

    let c_grid = [0.1, 1.0, 10.0, 100.0];
    let gamma_grid = [1e-3, 1e-2, 1e-1];
    let result = grid_search(&corpus, &c_grid, &gamma_grid, &GridSearchOptions::default())?;
    for cell in &result.table {
        println!("C {:>6} gamma {:>6}: {:.3}", cell.c, cell.gamma, cell.accuracy);
    }
    println!("best C {} gamma {} accuracy {:.3}", result.best_c, result.best_gamma, result.best_accuracy);

    let model = ovo_fit(&corpus.select(&result.train_indices), &SvcParams::new(result.best_c, result.best_gamma))?;
    let path = std::env::temp_dir().join("elp-example-model.svm");
    model.save(&path)?;
    let model = SvcModel::load(&path)?;
    let hits = result
        .test_indices
        .iter()
        .filter(|&&i| model.predict(&corpus.vectors()[i]).ok() == Some(corpus.labels()[i]))
        .count();
    println!("reloaded model: {hits}/{} held-out images correct", result.test_indices.len());
    Ok(())
}
