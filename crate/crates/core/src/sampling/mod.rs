//! Patch extraction, similarity-labelled pair datasets and well-mixed batches.

mod batch;
mod pairs;
mod patch;

pub use batch::{Batch, BatchIterator};
pub use pairs::{
    build_pairs, count_pairs, enumerate_pairs, read_pair_records, write_pair_records, PairDataset, PairKind,
    PairRecord, PatchPair, PairPlan,
};
pub use patch::{
    extract_patches, purposive_centers, valid_centers, ManualCenter, Patch, PATCH_HALF, PATCH_LEN, PATCH_SIZE,
};
