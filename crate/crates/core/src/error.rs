use num_bigint::BigInt;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("modulus must be a positive integer, got {0}")]
    InvalidModulus(BigInt),

    #[error("invalid factor list for modulus {modulus}: {reason}")]
    InvalidFactors { modulus: BigInt, reason: String },

    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("prime {p} divides modulus {modulus}")]
    PrimeDividesModulus { p: u64, modulus: BigInt },

    #[error("the two primes must be distinct, both are {0}")]
    EqualPrimes(u64),

    #[error("torus points live on different moduli ({0} vs {1})")]
    ModulusMismatch(BigInt, BigInt),

    #[error("merge hypothesis violated: distance {distance} is not below {bound}")]
    HypothesisViolated { distance: String, bound: String },

    #[error("layer step failed at index {index}: {source}")]
    LayerStep {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid pre-path: {0}")]
    InvalidPrePath(String),

    #[error("tolerance must satisfy 2*eps < 1, got {0}")]
    ToleranceTooLarge(String),

    #[error("moduli {0} and {1} share a factor")]
    ModuliNotCoprime(BigInt, BigInt),

    #[error("weights must have a positive sum")]
    DegenerateWeights,

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("end point of the first path does not match the initial point of the second")]
    EndpointMismatch,

    #[error("prime {0} appears more than once")]
    PrimeCollision(u64),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("pyramid does not belong to this path: {0}")]
    PathPyramidMismatch(String),

    #[error("enumeration of {needed} tuples exceeds the budget of {budget}")]
    ResourceGuard { needed: String, budget: u64 },

    #[error("census input mixes path lengths {0} and {1}")]
    MixedLength(usize, usize),

    #[error("census input mixes initial points")]
    MixedInitialPoint,

    #[error("invalid params: {0}")]
    InvalidParams(String),

    #[error("infeasible params: {0}")]
    InfeasibleParams(String),

    #[error("instance has no usable edges")]
    EmptyGraph,

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("no consensus: largest accepted cluster {accepted}/{total} is below the required fraction {required}")]
    NoConsensus {
        accepted: usize,
        total: usize,
        required: String,
    },

    #[error("nothing to aggregate")]
    NoEstimates,

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Stable snake_case name of the variant, for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidModulus(..) => "invalid_modulus",
            Error::InvalidFactors { .. } => "invalid_factors",
            Error::NotPrime(..) => "not_prime",
            Error::PrimeDividesModulus { .. } => "prime_divides_modulus",
            Error::EqualPrimes(..) => "equal_primes",
            Error::ModulusMismatch(..) => "modulus_mismatch",
            Error::HypothesisViolated { .. } => "hypothesis_violated",
            Error::LayerStep { .. } => "layer_step",
            Error::InvalidPrePath(..) => "invalid_pre_path",
            Error::ToleranceTooLarge(..) => "tolerance_too_large",
            Error::ModuliNotCoprime(..) => "moduli_not_coprime",
            Error::DegenerateWeights => "degenerate_weights",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::EndpointMismatch => "endpoint_mismatch",
            Error::PrimeCollision(..) => "prime_collision",
            Error::InvalidPath(..) => "invalid_path",
            Error::PathPyramidMismatch(..) => "path_pyramid_mismatch",
            Error::ResourceGuard { .. } => "resource_guard",
            Error::MixedLength(..) => "mixed_length",
            Error::MixedInitialPoint => "mixed_initial_point",
            Error::InvalidParams(..) => "invalid_params",
            Error::InfeasibleParams(..) => "infeasible_params",
            Error::EmptyGraph => "empty_graph",
            Error::InvariantViolation(..) => "invariant_violation",
            Error::NoConsensus { .. } => "no_consensus",
            Error::NoEstimates => "no_estimates",
            Error::Parse(..) => "parse",
        }
    }
}
