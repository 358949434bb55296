//! Herb-space embedding and colour-coded pattern manifold plots.

mod mds;
mod svg;

pub use mds::{classical_mds, herb_embedding, pairwise_euclidean, rgb_colors, ColorCode, Embedding};
pub use svg::{emit_scatter_svg, render_scatter_svg};
