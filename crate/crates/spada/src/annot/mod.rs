//! Sparse ground-truth engineering: class remapping, spectral filtering,
//! skeletonization and buffering into scribbles, patch overlays, forest
//! splitting, point rasterization and dataset splits.

mod compose;
mod filter;
mod mapping;
mod morpho;
mod points;
mod split;

pub use compose::{build_scribbles, overlay, split_forest, ScribbleConfig};
pub use filter::{spectral_filter, SpectralFilterConfig, SpectralPredicate};
pub use mapping::{remap, ClassMapping, MapTarget, SourceScheme};
pub use morpho::{buffer, skeletonize, thin_mask};
pub use points::{
    points_from_labels, rasterize_points, read_points_csv, PointAnnotation, PointClass,
};
pub use split::split_train_val;
