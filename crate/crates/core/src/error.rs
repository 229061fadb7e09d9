use std::fmt;

use thiserror::Error;

/// Pipeline stage of the field engine, attached to errors raised by `simulate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Excitation,
    TransmitImpedance,
    ReflectLoad,
    PortCurrents,
    TransmitCurrents,
    ReflectedField,
    TransmittedField,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Excitation => "plane-wave excitation",
            Stage::TransmitImpedance => "transmit array impedance",
            Stage::ReflectLoad => "reflect-side load",
            Stage::PortCurrents => "port currents",
            Stage::TransmitCurrents => "transmitted currents",
            Stage::ReflectedField => "reflected field",
            Stage::TransmittedField => "transmitted field",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    // network algebra
    #[error("singular conversion: {0}")]
    SingularConversion(String),
    #[error("singular system (reciprocal condition {rcond:.3e})")]
    SingularSystem { rcond: f64 },
    #[error("reference impedances differ ({a} vs {b} ohm)")]
    MismatchedReference { a: f64, b: f64 },
    #[error("two-port with |s21| = {s21:.3e} cannot be cascaded")]
    NonCascadable { s21: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    // circuit models
    #[error("degenerate circuit: {0}")]
    DegenerateCircuit(String),
    #[error("impedance {re}+j{im} ohm is not passive")]
    NonPassive { re: f64, im: f64 },
    #[error("power ratio is infinite (|s21| = 0)")]
    InfiniteRatio,
    #[error("target {target_db} dB unachievable; attainable range [{min_db:.3}, {max_db:.3}] dB")]
    Unachievable {
        target_db: f64,
        min_db: f64,
        max_db: f64,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate load: z_load + z_a vanishes")]
    DegenerateLoad,
    #[error("phase undefined: magnitude {0:.3e} too small")]
    PhaseUndefined(f64),

    // datasets and patterns
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("reciprocity violated in {matrix}: relative asymmetry {rel:.3e}")]
    Reciprocity { matrix: &'static str, rel: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("incidence theta = {0} deg is not on the reflecting side")]
    WrongSide(f64),
    #[error("pattern is identically zero")]
    ZeroPattern,
    #[error("no beam in sector (sector peak {0:.1} dB below global peak)")]
    NoBeam(f64),

    // optimization
    #[error("{side} target theta = {theta} deg lies outside its sector")]
    OutOfSector { side: &'static str, theta: f64 },
    #[error("search space too large: {0} configurations")]
    TooLarge(f64),

    #[error("{stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at(self, stage: Stage) -> Error {
        match self {
            e @ Error::Stage { .. } => e,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// Innermost error, with any stage annotation removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
