//! Writes a synthetic identity tree to disk, ingests it back and prints the
//! manifest. Pass a directory to ingest a real `<identity>/<image>` tree.

use elp_descriptors::dataset::{ingest, synthetic_faces, IngestOptions};

fn main() -> elp_descriptors::Result<()> {
    let tmp;
    let root = match std::env::args().nth(1) {
        Some(path) => path.into(),
        None => {
            tmp = std::env::temp_dir().join("elp-ingest-example");
            let _ = std::fs::remove_dir_all(&tmp);
            let mut set = synthetic_faces(3, 12, 84, 112, 5);
            // one sparse identity that the threshold should drop
            let few = synthetic_faces(1, 4, 84, 112, 6);
            set.write_tree(&tmp)?;
            for (img, path) in few.images.iter().zip(&few.paths) {
                let dir = tmp.join("sparse_person");
                std::fs::create_dir_all(&dir).expect("identity directory");
                img.save_png(dir.join(path.rsplit('/').next().unwrap()))?;
            }
            set.images.clear();
            tmp.clone()
        }
    };
    let options = IngestOptions { min_images_exclusive: 10, ..IngestOptions::default() };
    let (set, manifest) = ingest(&root, &options)?;
    println!("{} images kept across {} identities", set.len(), set.names.len());
    println!("{}", serde_json::to_string_pretty(&manifest).unwrap());
    Ok(())
}
