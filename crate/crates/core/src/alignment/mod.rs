//! Linear maps between embedding spaces.
//!
//! Maps act on row vectors: a source row `x` lands at `x·Q` in the target
//! space. Three ways to obtain one are provided: supervised orthogonal
//! Procrustes, unsupervised stochastic Wasserstein-Procrustes, and RCSLS
//! refinement of an existing map.

mod procrustes;
mod rcsls;
mod wproc;

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;

pub use crate::linalg::{orthogonality_error, project_orthogonal, project_spectral_ball};
pub use procrustes::{procrustes, procrustes_map, procrustes_objective};
pub use rcsls::{
    rcsls_gradient, rcsls_loss, rcsls_neighborhoods, rcsls_refine, Constraint, RcslsConfig, RcslsNeighborhoods,
    RcslsOutcome,
};
pub use wproc::{
    convex_relaxation_seed, moment_matching_seed, wasserstein_procrustes, ConvergenceLog, Init, WProcConfig,
};

use crate::embeddings::EmbeddingSpace;
use crate::error::{Error, Result};

/// Orthogonality tolerance used when reading maps and checking invariants.
pub const ORTHOGONALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Procrustes,
    WProc,
    Rcsls,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Procrustes => "procrustes",
            Method::WProc => "wproc",
            Method::Rcsls => "rcsls",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "procrustes" => Ok(Method::Procrustes),
            "wproc" => Ok(Method::WProc),
            "rcsls" => Ok(Method::Rcsls),
            other => Err(Error::invalid(format!("unknown alignment method `{other}`"))),
        }
    }
}

/// A `d×d` map from a source space into a target space.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentMap {
    pub matrix: Array2<f64>,
    pub source_lang: String,
    pub target_lang: String,
    pub method: Method,
    pub orthogonal: bool,
}

impl AlignmentMap {
    pub fn new(
        matrix: Array2<f64>,
        source_lang: impl Into<String>,
        target_lang: impl Into<String>,
        method: Method,
    ) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "alignment map must be square, got {:?}",
                matrix.dim()
            )));
        }
        let orthogonal = orthogonality_error(matrix.view()) <= ORTHOGONALITY_TOL;
        Ok(AlignmentMap {
            matrix,
            source_lang: source_lang.into(),
            target_lang: target_lang.into(),
            method,
            orthogonal,
        })
    }

    pub fn identity(d: usize, source_lang: &str, target_lang: &str) -> Self {
        AlignmentMap {
            matrix: Array2::eye(d),
            source_lang: source_lang.into(),
            target_lang: target_lang.into(),
            method: Method::Procrustes,
            orthogonal: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// All source vectors mapped into the target space.
    pub fn apply(&self, space: &EmbeddingSpace) -> Result<Array2<f64>> {
        if space.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "map is {0}x{0} but `{1}` vectors have {2} coordinates",
                self.dim(),
                space.lang(),
                space.dim()
            )));
        }
        Ok(space.vectors().dot(&self.matrix))
    }

    /// Text form: a `d method source_lang target_lang` header, then `d` rows.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        for lang in [&self.source_lang, &self.target_lang] {
            if lang.is_empty() || lang.contains(char::is_whitespace) {
                return Err(Error::invalid(format!("language tag `{lang}` must be a single word")));
            }
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
            writeln!(
                out,
                "{} {} {} {}",
                self.dim(),
                self.method,
                self.source_lang,
                self.target_lang
            )?;
            for row in self.matrix.rows() {
                let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                writeln!(out, "{}", line.join(" "))?;
            }
            out.flush()
        };
        write(&mut out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .transpose()
            .map_err(|e| Error::io(path, e))?
            .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let [d, method, src, tgt] = fields.as_slice() else {
            return Err(Error::parse(path, 1, "expected `d method source_lang target_lang`"));
        };
        let d: usize = d
            .parse()
            .map_err(|_| Error::parse(path, 1, format!("bad dimension `{d}`")))?;
        let method: Method = method
            .parse()
            .map_err(|e: Error| Error::parse(path, 1, e.to_string()))?;
        let mut data = Vec::with_capacity(d * d);
        for i in 0..d {
            let line = lines
                .next()
                .transpose()
                .map_err(|e| Error::io(path, e))?
                .ok_or_else(|| Error::parse(path, i + 2, "missing row"))?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(path, i + 2, "bad number"))?;
            if row.len() != d {
                return Err(Error::parse(
                    path,
                    i + 2,
                    format!("expected {d} values, got {}", row.len()),
                ));
            }
            data.extend(row);
        }
        let matrix = Array2::from_shape_vec((d, d), data).expect("d*d values");
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{}: map entries", path.display())));
        }
        AlignmentMap::new(matrix, *src, *tgt, method)
    }
}
