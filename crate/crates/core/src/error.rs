use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("{key}: {msg}")]
    Range { key: String, msg: String },
    #[error("unknown {what} `{name}` (known: {known})")]
    Unknown { what: &'static str, name: String, known: String },
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("divergent tail integral for mode ({l},{m}): {detail}")]
    Divergent { l: usize, m: i64, detail: String },
    #[error("{0}")]
    Domain(String),
    #[error("band limit {got} exceeds grid band limit {limit}")]
    BandLimit { got: usize, limit: usize },
    #[error("CFL violated: |dt| = {dt} exceeds 0.5 h = {limit}")]
    Cfl { dt: f64, limit: f64 },
    #[error("containment breach at t = {t}: |u| = {amplitude:.3e} within the outer margin (r > {radius})")]
    Containment { t: f64, amplitude: f64, radius: f64 },
    #[error("non-finite state at t = {t} (last bounded time {last_bounded})")]
    Blowup { t: f64, last_bounded: f64 },
    #[error("stage `{stage}`: {source}")]
    Stage { stage: String, source: Box<Error> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn range(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Range { key: key.into(), msg: msg.into() }
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn in_stage(self, stage: &str) -> Self {
        Error::Stage { stage: stage.to_string(), source: Box::new(self) }
    }

    /// True for errors caused by the user's configuration rather than the run.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Syntax { .. } | Error::Range { .. } | Error::Unknown { .. } => true,
            Error::Stage { source, .. } => source.is_config(),
            _ => false,
        }
    }

    pub fn stage(&self) -> Option<&str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
