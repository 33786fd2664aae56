//! Software golden model of a pixel-serial FPGA image-filtering datapath.
//!
//! Frames are serialized into fixed-point sample streams, pass through a
//! line-buffered window generator and nine-tap MAC FIR filters, and are
//! reassembled into 8-bit frames. A double-precision full-frame [`oracle`]
//! provides the reference the streaming path is checked against, and
//! [`roi_stats`] computes region statistics used for tissue characterization.
//!
//! ```
//! use pixelmill::{imageio::GrayImage, pipeline::{run_pipeline, PipelineSpec}};
//!
//! let img = GrayImage::from_fn(8, 8, |_, c| if c < 4 { 0 } else { 255 }).unwrap();
//! let spec: PipelineSpec = "sobel:exact".parse().unwrap();
//! let edges = run_pipeline(&img, &spec).unwrap();
//! assert_eq!(edges.get(4, 3), 255);
//! assert_eq!(edges.get(4, 1), 0);
//! ```

pub mod cli;
pub mod fixedpoint;
pub mod imageio;
pub mod kernels;
pub mod oracle;
pub mod pipeline;
pub mod roi_stats;
pub mod streamcore;

pub use fixedpoint::{FixedFormat, FixedValue, Overflow, Quantization};
pub use imageio::{GrayImage, RgbImage};
pub use kernels::{GradientPath, Kernel, OperatorKind};
pub use pipeline::{run_pipeline, MagnitudeMode, PipelineSpec, StageSpec};
pub use streamcore::{FixedConfig, Padding, PixelStream};
