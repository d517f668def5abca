use std::fmt;

/// Errors produced by the simulators, the exact solvers and the experiment
/// harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A trajectory accepted more jumps than its configured cap.
    #[error("jump budget exceeded: more than {cap} jumps")]
    Budget { cap: u64 },

    /// An internal invariant or caller contract was broken.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Input that carries too little information for the estimator.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Experiment configuration could not be parsed or validated.
    #[error("config error at {location}: {message}")]
    Config { location: Location, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// A failure inside one replica of a Monte Carlo batch.
    #[error("replica {replica}: {source}")]
    Replica {
        replica: usize,
        #[source]
        source: Box<Error>,
    },
}

/// Where in a configuration an error was found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Location {
    Line(usize),
    Field(String),
    Flag(String),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line(l) => write!(f, "line {l}"),
            Location::Field(name) => write!(f, "field `{name}`"),
            Location::Flag(name) => write!(f, "flag `--{name}`"),
        }
    }
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn field(name: &str, msg: impl Into<String>) -> Self {
        Error::Config {
            location: Location::Field(name.to_string()),
            message: msg.into(),
        }
    }

    pub(crate) fn in_replica(self, replica: usize) -> Self {
        match self {
            e @ Error::Replica { .. } => e,
            e => Error::Replica {
                replica,
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, with replica wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Replica { source, .. } => source.root(),
            e => e,
        }
    }

    /// Process exit code for the command-line runner: 1 for configuration
    /// problems, 2 for an exceeded jump budget, 3 for an invariant violation.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Config { .. } | Error::Domain(_) | Error::Degenerate(_) | Error::Io(_) => 1,
            Error::Budget { .. } => 2,
            Error::Contract(_) => 3,
            Error::Replica { .. } => unreachable!("root() strips replica wrappers"),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_root_cause() {
        let e = Error::Budget { cap: 10 }.in_replica(4);
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().starts_with("replica 4"));
        assert_eq!(Error::contract("x").exit_code(), 3);
        assert_eq!(Error::field("reps", "must be positive").exit_code(), 1);
    }

    #[test]
    fn replica_wrapping_is_idempotent() {
        let e = Error::Budget { cap: 1 }.in_replica(1).in_replica(2);
        match e {
            Error::Replica { replica, .. } => assert_eq!(replica, 1),
            _ => panic!("expected replica wrapper"),
        }
    }
}
