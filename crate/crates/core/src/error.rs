use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("value {0} is outside [0, 1)")]
    OutOfUnitInterval(String),

    #[error("cannot parse {what} from {input:?}")]
    Parse { what: &'static str, input: String },

    #[error("grid vector of resolution {resolution} needs {expected} values, got {actual}")]
    GridLength {
        resolution: u32,
        expected: usize,
        actual: usize,
    },

    #[error("index {index} is not representable on a grid of resolution {resolution}")]
    Aliased { index: String, resolution: u32 },

    #[error("point {point} is not a grid point at resolution {resolution}")]
    OffGrid { point: String, resolution: u32 },

    #[error("cut {cut} splits an atom with no closed form; render to a grid instead")]
    NeedsGrid { cut: String },

    #[error("no sign change of type (+1, -1) among r_1 .. r_{n}; m is undefined")]
    EmptySelection { n: u32 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("stage {stage} violates spectral separation: p(n_{stage}) <= 2 q(n_{prev})", prev = stage - 1)]
    SpectralOverlap { stage: usize },

    #[error("neither branch of the check is feasible: {0}")]
    Infeasible(String),

    #[error("resolution {requested} exceeds the grid cap {cap}")]
    GridCap { requested: u64, cap: u32 },
}

pub type Result<T> = std::result::Result<T, Error>;
