//! The interleaved storage: element (i, l) of `d` consecutive stages sits
//! at adjacent addresses, and the last block is padded when the stage count
//! is not a multiple of `d`.

use nalgebra::DMatrix;
use ocpqp::compact::CompactBatch;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let stages: Vec<DMatrix<f64>> =
        (0..5).map(|j| DMatrix::from_fn(2, 2, |i, l| (100 * j + 10 * i + l) as f64)).collect();
    let batch = CompactBatch::pack(&stages, 4)?;
    println!(
        "{} stages of {}x{} in {} blocks of lane width {} ({} slots)",
        batch.stages(),
        batch.rows(),
        batch.cols(),
        batch.nblocks(),
        batch.lane_width(),
        batch.slots()
    );
    for (k, chunk) in batch.as_slice().chunks(batch.lane_width()).enumerate() {
        println!("{k:2}: {chunk:?}");
    }
    println!("element (1, 0) of stage 3 lives at flat index {}", batch.index(1, 0, 3));
    assert_eq!(batch.unpack(), stages);

    let narrow = batch.with_lane_width(2)?;
    assert_eq!(narrow.unpack(), stages);
    println!("repacked to d=2: {} blocks, round trip exact", narrow.nblocks());
    Ok(())
}
