//! Multiscale quantile segmentation of univariate series.
//!
//! A series is cut into the fewest segments whose every subinterval passes a
//! penalized multiscale test for a constant `beta`-quantile; among those
//! segmentations the one with the least check loss is returned.

pub mod calibration;
pub mod error;
pub mod evaluation;
pub mod input;
pub mod multiscale;
pub mod segmentation;
pub mod wavelet;

pub use calibration::{calibrate, default_grid, CalibrationCache, CalibrationKey, CriticalValueTable};
pub use error::{MuscleError, Result};
pub use input::{parse_series, ColumnSelector};
pub use multiscale::{IntervalSystem, QuantileConfig};
pub use segmentation::{m_muscle, muscle, muscle_s, Segmentation, TimeSeries};
pub use wavelet::WaveletTree;
