//! Phantom generation, patch extraction, and all persistence: the shared
//! binary container, mask/image/k-space files, checkpoints, and PGM export.

pub mod checkpoint;
pub mod container;
pub mod patches;
pub mod pgm;
pub mod phantom;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointManifest, CheckpointMeta};
pub use container::{
    load_image, load_kspace, load_mask, save_image, save_kspace, save_mask, Payload,
};
pub use patches::extract_patches;
pub use pgm::{export_pgm, read_pgm16, write_pgm16};
pub use phantom::make_phantom;
