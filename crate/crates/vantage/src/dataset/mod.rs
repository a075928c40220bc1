//! Two-part training dataset: generation, serialization, loading, and the
//! equal-mixing batch sampler.

pub mod captions;
pub mod generate;
pub mod load;
pub mod records;
pub mod sampler;

pub use generate::{
    generate_augmented_split, generate_dataset, generate_rendered_split, AugmentedConfig,
    DatasetConfig, ObjectSpec,
};
pub use load::{check_seed_disjoint, kinds_overlap, LoadedDataset};
pub use records::{DatasetManifest, MetaRecord, ObjectViews, SplitKind, SplitStats};
pub use sampler::MixedBatchSampler;
