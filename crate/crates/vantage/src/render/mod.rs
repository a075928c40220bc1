//! Deterministic toy renderer: canonical-front meshes, procedural
//! backgrounds, and a z-buffered flat-shaded rasterizer.

pub mod background;
pub mod image;
pub mod mesh;
pub mod raster;

pub use background::{background_by_name, BackgroundStyle, NamedBackground, NAMED_BACKGROUNDS};
pub use image::ImageBuf;
pub use mesh::{color_by_name, make_object, Mesh, ObjectKind, Region, ToyObject, COLOR_NAMES};
pub use raster::{coverage_centroid, render, render_region, Background, RenderSpec};
