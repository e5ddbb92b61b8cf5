use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("position ({x}, {y}) lies outside the {width} x {height} field")]
    OutOfBounds { x: f64, y: f64, width: f64, height: f64 },
    #[error("cannot place {n} lattice sites in the field at pitch >= {min_pitch}")]
    LatticeTooDense { n: usize, min_pitch: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("sensor {0} does not exist")]
    UnknownSensor(usize),
    #[error("sensor {0} is inactive")]
    InactiveSensor(usize),
    #[error("no action supplied for active sensor {0}")]
    MissingAction(usize),
    #[error("degenerate homography correspondences: {0}")]
    DegenerateHomography(String),
    #[error("point maps to infinity under the inverse homography")]
    PointAtInfinity,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("action index {index} out of range for {n_actions} actions")]
    ActionOutOfRange { index: usize, n_actions: usize },
    #[error("replay buffer holds {size} transitions, batch of {batch} requested")]
    NotEnoughSamples { size: usize, batch: usize },
    #[error("network diverged: non-finite parameters after learner step {0}")]
    Diverged(u64),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("network shape mismatch: checkpoint has {found}, configuration expects {expected}")]
    ShapeMismatch { expected: String, found: String },
    #[error("unknown method `{name}`; valid methods: {valid}")]
    UnknownMethod { name: String, valid: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
