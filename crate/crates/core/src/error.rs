use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its physical domain.
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("configuration error: {0}")]
    Config(String),

    /// The integrator produced a non-finite or runaway state.
    #[error("numerical abort at t = {time:.6e} s: {reason} (|alpha|^2 = {photon_number:.6e}, atoms = {atoms})")]
    NumericalAbort {
        time: f64,
        reason: String,
        photon_number: f64,
        atoms: usize,
    },

    /// Not enough data for a statistically meaningful estimate.
    #[error("insufficient data: {0}")]
    Insufficient(String),

    /// The field amplitude collapsed so its phase is undefined.
    #[error("field amplitude collapsed at sample {index} (|alpha| = {amplitude:.3e})")]
    AmplitudeCollapse { index: usize, amplitude: f64 },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
