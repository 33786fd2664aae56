//! C ABI for pixelmill.
//!
//! Objects cross the boundary as opaque handles (`PmImage`, `PmPipeline`)
//! created and destroyed by this library. Every fallible call returns a
//! `PmStatus`; on failure `pm_last_error_message` describes the error for
//! the calling thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pixelmill::imageio::{self, GrayImage, ImageError};
use pixelmill::oracle::{self, Psnr};
use pixelmill::pipeline::{self, PipelineError, PipelineSpec};
use pixelmill::roi_stats::{self, RoiError, RoiSpec};
use pixelmill::streamcore::Padding;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Spec = 5,
    EmptyRoi = 6,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmPadding {
    Zero = 0,
    Replicate = 1,
}

/// Region statistics on intensities scaled to [0, 1].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PmStats {
    pub mean: f64,
    pub variance: f64,
    pub std_dev: f64,
    pub pixel_count: usize,
}

/// Difference between two frames. `psnr_db` is +infinity when identical.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PmDiff {
    pub max_abs_diff: f64,
    pub mean_abs_diff: f64,
    pub psnr_db: f64,
    pub identical: bool,
}

/// An 8-bit grayscale image.
pub struct PmImage {
    inner: GrayImage,
}

/// A parsed filter pipeline with its datapath settings.
pub struct PmPipeline {
    inner: PipelineSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(PmStatus, String);

impl From<ImageError> for Failure {
    fn from(e: ImageError) -> Self {
        let status = match e {
            ImageError::Io { .. } => PmStatus::Io,
            ImageError::Format { .. } => PmStatus::Format,
            ImageError::Dimensions { .. } => PmStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let status = match e {
            PipelineError::Parse { .. } | PipelineError::Empty | PipelineError::Kernel(_) => PmStatus::Spec,
            _ => PmStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<RoiError> for Failure {
    fn from(e: RoiError) -> Self {
        let status = match e {
            RoiError::Parse { .. } => PmStatus::InvalidArgument,
            _ => PmStatus::EmptyRoi,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PmStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PmStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PmStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(PmStatus::NullArgument, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(PmStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn pm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy `width * height` bytes from `data` into a new image.
#[no_mangle]
pub unsafe extern "C" fn pm_image_new(
    width: usize,
    height: usize,
    data: *const u8,
    out: *mut *mut PmImage,
) -> PmStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        let len = width
            .checked_mul(height)
            .ok_or_else(|| Failure(PmStatus::InvalidArgument, "image size overflows".into()))?;
        let pixels = std::slice::from_raw_parts(data, len).to_vec();
        let inner = GrayImage::new(width, height, pixels)?;
        store(out, PmImage { inner })
    })
}

/// Read a PGM or PPM file; colour input is converted to luma.
#[no_mangle]
pub unsafe extern "C" fn pm_image_read(path: *const c_char, out: *mut *mut PmImage) -> PmStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let inner = imageio::read_gray(path)?;
        store(out, PmImage { inner })
    })
}

/// Write a binary PGM. The file appears complete or not at all.
#[no_mangle]
pub unsafe extern "C" fn pm_image_write(image: *const PmImage, path: *const c_char) -> PmStatus {
    guard(|| {
        let image = ref_arg(image, "image")?;
        let path = str_arg(path, "path")?;
        imageio::write_image(&image.inner, path)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pm_image_width(image: *const PmImage) -> usize {
    image.as_ref().map_or(0, |i| i.inner.width())
}

#[no_mangle]
pub unsafe extern "C" fn pm_image_height(image: *const PmImage) -> usize {
    image.as_ref().map_or(0, |i| i.inner.height())
}

/// Row-major pixels, `width * height` bytes, owned by the image.
#[no_mangle]
pub unsafe extern "C" fn pm_image_data(image: *const PmImage) -> *const u8 {
    image.as_ref().map_or(ptr::null(), |i| i.inner.pixels().as_ptr())
}

#[no_mangle]
pub unsafe extern "C" fn pm_image_free(image: *mut PmImage) {
    if !image.is_null() {
        drop(Box::from_raw(image));
    }
}

/// Parse a stage list such as `gauss,sobel:abs,thresh=80`.
#[no_mangle]
pub unsafe extern "C" fn pm_pipeline_parse(text: *const c_char, out: *mut *mut PmPipeline) -> PmStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        let inner: PipelineSpec = text.parse()?;
        store(out, PmPipeline { inner })
    })
}

#[no_mangle]
pub unsafe extern "C" fn pm_pipeline_set_padding(pipeline: *mut PmPipeline, padding: PmPadding) -> PmStatus {
    guard(|| {
        let p = pipeline.as_mut().ok_or_else(|| null("pipeline"))?;
        let padding = match padding {
            PmPadding::Zero => Padding::Zero,
            PmPadding::Replicate => Padding::Replicate,
        };
        p.inner = p.inner.clone().with_padding(padding);
        Ok(())
    })
}

/// Run the streaming fixed-point model.
#[no_mangle]
pub unsafe extern "C" fn pm_pipeline_run(
    pipeline: *const PmPipeline,
    image: *const PmImage,
    out: *mut *mut PmImage,
) -> PmStatus {
    guard(|| {
        let p = ref_arg(pipeline, "pipeline")?;
        let image = ref_arg(image, "image")?;
        let inner = pipeline::run_pipeline(&image.inner, &p.inner)?;
        store(out, PmImage { inner })
    })
}

/// Run the floating-point full-frame reference.
#[no_mangle]
pub unsafe extern "C" fn pm_pipeline_run_reference(
    pipeline: *const PmPipeline,
    image: *const PmImage,
    out: *mut *mut PmImage,
) -> PmStatus {
    guard(|| {
        let p = ref_arg(pipeline, "pipeline")?;
        let image = ref_arg(image, "image")?;
        let inner = oracle::reference_pipeline(&image.inner, &p.inner)
            .map_err(|e| Failure(PmStatus::InvalidArgument, e.to_string()))?;
        store(out, PmImage { inner })
    })
}

#[no_mangle]
pub unsafe extern "C" fn pm_pipeline_free(pipeline: *mut PmPipeline) {
    if !pipeline.is_null() {
        drop(Box::from_raw(pipeline));
    }
}

/// Statistics over a region given as `rect:x,y,w,h` or `ellipse:cx,cy,rx,ry`.
#[no_mangle]
pub unsafe extern "C" fn pm_roi_stats(image: *const PmImage, roi: *const c_char, out: *mut PmStats) -> PmStatus {
    guard(|| {
        let image = ref_arg(image, "image")?;
        let roi: RoiSpec = str_arg(roi, "roi")?.parse()?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let (report, _) = roi_stats::roi_stats(&image.inner, &roi, "")?;
        *out = PmStats {
            mean: report.mean,
            variance: report.variance,
            std_dev: report.std_dev,
            pixel_count: report.pixel_count,
        };
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pm_compare(a: *const PmImage, b: *const PmImage, out: *mut PmDiff) -> PmStatus {
    guard(|| {
        let a = ref_arg(a, "a")?;
        let b = ref_arg(b, "b")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let diff = oracle::compare_images(&a.inner, &b.inner)
            .map_err(|e| Failure(PmStatus::InvalidArgument, e.to_string()))?;
        *out = PmDiff {
            max_abs_diff: diff.max_abs_diff,
            mean_abs_diff: diff.mean_abs_diff,
            psnr_db: match diff.psnr {
                Psnr::Identical => f64::INFINITY,
                Psnr::Db(db) => db,
            },
            identical: diff.is_identical(),
        };
        Ok(())
    })
}
