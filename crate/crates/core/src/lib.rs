//! Vector-extrapolation acceleration for regularization-by-denoising
//! image restoration.
//!
//! * [`extrapolation`]: MPE, RRE and SVD-MPE over a window of iterates.
//! * [`driver`]: fixed-point, steepest-descent and Nesterov baselines plus
//!   the extrapolation cycling loop.
//! * [`red`]: the RED objective, its gradient and fixed-point step.
//! * [`imaging`]: images, PSFs, circular convolution, degradation and PSNR.
//! * [`denoise`]: pluggable denoisers used as the RED prior.
//! * [`io`] and [`cli`]: PGM files, trace export and the experiment runner.

pub mod cli;
pub mod denoise;
pub mod driver;
pub mod extrapolation;
pub mod imaging;
pub mod io;
pub(crate) mod linalg;
pub mod red;

pub use linalg::Mat;
