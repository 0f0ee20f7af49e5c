//! Calibration of machine-translation metric deltas against human pairwise
//! system rankings.
//!
//! Flow: [`ingest`] builds a [`Dataset`] from segment scores and human system
//! judgments, [`pairing`] turns it into oriented system pairs, [`calibration`]
//! fits accuracy-vs-delta sigmoids, and [`conversion`] maps deltas between
//! metrics at equal estimated accuracy. [`significance`] covers the paired
//! t-test and testset-size subsampling.

pub mod calibration;
pub mod conversion;
pub mod ingest;
pub mod metrics;
pub mod pairing;
pub mod published;
pub mod report;
pub mod significance;

pub use calibration::{calibrate, CalibrateOptions, CalibrationError, CalibrationSet, SigmoidFit, Threshold};
pub use conversion::{convert_delta, threshold_table, Equivalence, ThresholdTable};
pub use ingest::{Dataset, IngestError, InputFormat, SegmentScoreRecord, SystemKey, SystemRecord};
pub use pairing::{build_pairs, pairwise_accuracy, PairError, PairSet, Scope, SystemPair};
pub use significance::{paired_t_test, subsample_study, SignificanceError, SubsampleConfig, TTestResult};
