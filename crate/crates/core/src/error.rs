use thiserror::Error;

/// Side of the bipartite graph an id refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Service,
    Operator,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Service => f.write_str("service"),
            Side::Operator => f.write_str("operator"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown {side} id {id}")]
    Lookup { side: Side, id: usize },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("size limit exceeded: {0}")]
    Resource(String),
    #[error("did not converge: {0}")]
    Convergence(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("invalid document: {0}")]
    Document(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn service(id: usize) -> Self {
        Error::Lookup { side: Side::Service, id }
    }

    pub(crate) fn operator(id: usize) -> Self {
        Error::Lookup { side: Side::Operator, id }
    }
}
