use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: cannot decode image: {source}")]
    Decode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("cannot encode PNG: {0}")]
    Encode(#[source] image::ImageError),
    #[error("{path}: invalid JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("cannot write CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("no decodable images under {0}")]
    NoImages(PathBuf),
    #[error("annotation file names missing from the image map: {}", .0.join(", "))]
    UnmappedAnnotations(Vec<String>),
    #[error("annotation document: {0}")]
    Annotation(String),
    #[error("output directory {output} lies inside input directory {input}")]
    NestedOutput { input: PathBuf, output: PathBuf },
    #[error(transparent)]
    Core(#[from] darkforge_core::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| Self::Io { path, source }
    }

    pub(crate) fn json(path: impl Into<PathBuf>) -> impl FnOnce(serde_json::Error) -> Self {
        let path = path.into();
        move |source| Self::Json { path, source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
