use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid group: {0}")]
    InvalidGroup(String),

    #[error("group mismatch: Z_{left} vs Z_{right}")]
    GroupMismatch { left: u64, right: u64 },

    #[error("subgroup index s = {s} outside [0, {r}]")]
    IndexOutOfRange { s: u32, r: u32 },

    #[error("value {value} is not an element of Z_{order}")]
    NotAnElement { value: u64, order: u64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid distribution: {0}")]
    InvalidPmf(String),

    #[error("layer weights differ between the two auxiliary variables")]
    WeightMismatch,

    #[error("marginal of {0} must be uniform")]
    NonUniform(&'static str),

    #[error("enumeration budget exceeded: {what} needs {needed} items, cap is {cap}")]
    BudgetExceeded { what: String, needed: f64, cap: u64 },

    #[error("typical set is only available for membership tests (size {0})")]
    NotEnumerated(f64),

    #[error("no typical sequence of length {k} exists for this distribution at epsilon = {epsilon}")]
    EmptyTypicalSet { k: usize, epsilon: f64 },

    #[error("rejection sampler gave up after {0} draws; increase epsilon or the length")]
    RejectionCap(u64),

    #[error("message word for layer {0} is not in its domain")]
    NotInDomain(usize),

    #[error("codebooks must share generator matrices")]
    MatrixMismatch,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
