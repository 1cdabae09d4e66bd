//! Frames and appearance descriptors.

pub mod descriptors;
pub mod frame;

pub use descriptors::{
    area, color_covariance, color_histogram, dominant_color, extract_all, pyramid_cells, shape_ratio,
    CellHistogram, DescriptorSet, DominantColor, PyramidCell, COV_DIM,
};
pub use frame::{ColorFrame, GrayFrame, Mask, PixelRect};
