// Write a contaminated dataset as IDX files plus a manifest, load it back,
// and read a PGM grid of the first records.

use std::error::Error;
use std::path::{Path, PathBuf};

use rvae::dataio::{contaminate, load_manifest, make_synthetic_clusters, read_idx, ContaminationKind, ContaminationSpec, Dataset, Geometry};
use rvae::evalkit::{emit_image_grid, read_pgm};

pub fn run(out: &Path) -> Result<(Dataset, Dataset), Box<dyn Error>> {
    let clean = make_synthetic_clusters(100, 144, 5, Geometry::Shapes)?;
    let ds = contaminate(&clean, &ContaminationSpec::new(ContaminationKind::Blobs, 0.2, 5)?, None)?;
    std::fs::create_dir_all(out)?;
    let manifest = rvae::dataio::write_dataset(out, "blobs", &ds)?;
    let back = load_manifest(&manifest)?;

    let idx = read_idx(out.join("blobs-images.idx"))?;
    println!("images.idx dims {:?}", idx.dims);
    println!("{}", std::fs::read_to_string(&manifest)?.trim_end());

    let grid = out.join("first.pgm");
    emit_image_grid(&back.images.gather_rows(&(0..10).collect::<Vec<_>>()), 5, &grid)?;
    let pgm = read_pgm(&std::fs::read(&grid)?)?;
    println!("grid {}x{}", pgm.width, pgm.height);
    Ok((ds, back))
}

fn main() -> Result<(), Box<dyn Error>> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("rvae-idx"), PathBuf::from);
    let (ds, back) = run(&out)?;
    let max_err = ds.images.data().iter().zip(back.images.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("{} records, {} outliers, max pixel quantization error {max_err:.4}", back.len(), back.outlier_count());
    Ok(())
}
