use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Pipeline stage that produced a failure. Used in error messages and by the
/// CLI to report which step gave up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Stage {
    Differencing,
    Lifting,
    ExclusionFilter,
    Clustering,
    Classification,
    AnchorDetection,
    WarmStart,
    Topology,
    Tracking,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Differencing => "differencing",
            Stage::Lifting => "lifting",
            Stage::ExclusionFilter => "exclusion-filter",
            Stage::Clustering => "clustering",
            Stage::Classification => "classification",
            Stage::AnchorDetection => "anchor-detection",
            Stage::WarmStart => "warm-start",
            Stage::Topology => "topology",
            Stage::Tracking => "tracking",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Mismatched dimensions or parameters outside their domain.
    Config(String),
    /// Inputs that violate an operation's precondition.
    InvalidInput(String),
    /// Segmentation produced nothing at the named stage.
    SegmentationFailed(Stage),
    ClassificationFailed(String),
    DetectionFailed(String),
    TopologyFailed(String),
    /// Synthetic scene could not be generated (for example off-screen).
    Generation(String),
}

impl Error {
    /// The pipeline stage this error belongs to, if any.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::SegmentationFailed(stage) => Some(*stage),
            Error::ClassificationFailed(_) => Some(Stage::Classification),
            Error::DetectionFailed(_) => Some(Stage::AnchorDetection),
            Error::TopologyFailed(_) => Some(Stage::Topology),
            _ => None,
        }
    }

    /// True for failures of a pipeline stage on otherwise valid input.
    pub fn is_stage_failure(&self) -> bool {
        self.stage().is_some()
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::SegmentationFailed(stage) => {
                write!(f, "segmentation failed at {stage} stage: no points left")
            }
            Error::ClassificationFailed(msg) => write!(f, "classification failed: {msg}"),
            Error::DetectionFailed(msg) => write!(f, "anchor detection failed: {msg}"),
            Error::TopologyFailed(msg) => write!(f, "topology recovery failed: {msg}"),
            Error::Generation(msg) => write!(f, "synthetic generation failed: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
