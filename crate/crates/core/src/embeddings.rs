//! Pre-trained word vectors and cosine interaction matrices.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::corpus::TermWeight;
use crate::error::{Error, Result};

/// How tokens without a usable vector enter similarity computations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OovPolicy {
    /// Drop the token from the matrix.
    #[default]
    SkipTerm,
    /// Keep the token with similarity 0 to everything.
    ZeroVector,
}

/// Unit-normalized word vectors. Zero-norm vectors are kept but behave as
/// out-of-vocabulary.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    lookup: HashMap<String, usize>,
    tokens: Vec<String>,
    vectors: Vec<f64>,
    usable: Vec<bool>,
    oov_policy: OovPolicy,
}

impl EmbeddingTable {
    pub fn new(dim: usize, oov_policy: OovPolicy) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Parameter("embedding dimension must be positive".into()));
        }
        Ok(EmbeddingTable {
            dim,
            lookup: HashMap::new(),
            tokens: Vec::new(),
            vectors: Vec::new(),
            usable: Vec::new(),
            oov_policy,
        })
    }

    /// Adds a vector unless the token is already present (first occurrence
    /// wins). Returns whether it was inserted.
    pub fn insert(&mut self, token: &str, vector: &[f64]) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(Error::Shape(format!(
                "vector for {token:?} has {} components, expected {}",
                vector.len(),
                self.dim
            )));
        }
        if self.lookup.contains_key(token) {
            return Ok(false);
        }
        let norm = vector.iter().map(|x| x * x).sum::<f64>().sqrt();
        let usable = norm > 0.0 && norm.is_finite();
        self.lookup.insert(token.to_string(), self.tokens.len());
        self.tokens.push(token.to_string());
        self.usable.push(usable);
        if usable {
            self.vectors.extend(vector.iter().map(|x| x / norm));
        } else {
            self.vectors.extend(std::iter::repeat_n(0.0, self.dim));
        }
        Ok(true)
    }

    /// Parses the textual word-vector format: a `V D` header, then lines of
    /// `token v1 ... vD`.
    pub fn load(path: &Path, oov_policy: OovPolicy) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header = match lines.next() {
            Some(line) => line.map_err(|e| Error::io(path, e))?,
            None => return Err(Error::parse(path, 1, "missing header")),
        };
        let header_fields: Vec<&str> = header.trim_end().split(' ').collect();
        let (declared, dim) = match header_fields.as_slice() {
            [v, d] => match (v.parse::<usize>(), d.parse::<usize>()) {
                (Ok(v), Ok(d)) if d > 0 => (v, d),
                _ => return Err(Error::parse(path, 1, format!("malformed header {header:?}"))),
            },
            _ => return Err(Error::parse(path, 1, format!("malformed header {header:?}"))),
        };

        let mut table = EmbeddingTable::new(dim, oov_policy)?;
        let mut buf = Vec::with_capacity(dim);
        let mut rows = 0usize;
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(' ');
            let token = fields.next().unwrap_or_default();
            buf.clear();
            for field in fields {
                let value: f64 = field.parse().map_err(|_| {
                    Error::parse(path, line_no, format!("non-numeric component {field:?}"))
                })?;
                buf.push(value);
            }
            if buf.len() != dim {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("expected {dim} components, found {}", buf.len()),
                ));
            }
            table.insert(token, &buf)?;
            rows += 1;
        }
        if rows != declared {
            log::warn!(
                "{}: header declares {declared} vectors but {rows} were read",
                path.display()
            );
        }
        Ok(table)
    }

    /// Writes the table in the same textual format, using the normalized
    /// vectors.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            writeln!(out, "{} {}", self.tokens.len(), self.dim)?;
            for (i, token) in self.tokens.iter().enumerate() {
                write!(out, "{token}")?;
                for x in &self.vectors[i * self.dim..(i + 1) * self.dim] {
                    write!(out, " {x}")?;
                }
                writeln!(out)?;
            }
            out.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }

    /// Deterministic Gaussian vectors for `tokens`, for tests and demos.
    pub fn random<'a>(
        tokens: impl IntoIterator<Item = &'a str>,
        dim: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut table = EmbeddingTable::new(dim, OovPolicy::SkipTerm)?;
        let mut v = vec![0.0; dim];
        for token in tokens {
            for x in v.iter_mut() {
                *x = rng.sample(StandardNormal);
            }
            table.insert(token, &v)?;
        }
        Ok(table)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn oov_policy(&self) -> OovPolicy {
        self.oov_policy
    }

    pub fn set_oov_policy(&mut self, policy: OovPolicy) {
        self.oov_policy = policy;
    }

    pub fn contains(&self, token: &str) -> bool {
        self.lookup.contains_key(token)
    }

    /// The unit vector for `token`, if present with non-zero norm.
    pub fn vector(&self, token: &str) -> Option<&[f64]> {
        let &i = self.lookup.get(token)?;
        self.usable[i].then(|| &self.vectors[i * self.dim..(i + 1) * self.dim])
    }

    /// Cosine similarity; `None` when either token is unusable under
    /// [`OovPolicy::SkipTerm`], `Some(0.0)` under [`OovPolicy::ZeroVector`].
    pub fn cosine(&self, a: &str, b: &str) -> Option<f64> {
        match (self.vector(a), self.vector(b)) {
            (Some(_), Some(_)) if a == b => Some(1.0),
            (Some(va), Some(vb)) => Some(dot(va, vb).clamp(-1.0, 1.0)),
            _ => match self.oov_policy {
                OovPolicy::SkipTerm => None,
                OovPolicy::ZeroVector => Some(0.0),
            },
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine similarities between summary terms (rows) and target terms
/// (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    rows: Vec<String>,
    /// position of each row in the summary it was built from
    row_source: Vec<usize>,
    cols: Vec<String>,
    values: Vec<f64>,
}

impl InteractionMatrix {
    /// Builds a matrix directly from values, mostly for tests.
    pub fn from_values(n_rows: usize, n_cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_rows * n_cols {
            return Err(Error::Shape(format!(
                "{} values for a {n_rows}x{n_cols} matrix",
                values.len()
            )));
        }
        Ok(InteractionMatrix {
            rows: (0..n_rows).map(|i| format!("r{i}")).collect(),
            row_source: (0..n_rows).collect(),
            cols: (0..n_cols).map(|j| format!("c{j}")).collect(),
            values: values.into_iter().map(|v| v.clamp(-1.0, 1.0)).collect(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    /// No rows or no columns survived OOV handling. Scorers treat this as a
    /// degenerate input.
    pub fn is_degenerate(&self) -> bool {
        self.rows.is_empty() || self.cols.is_empty()
    }

    pub fn row_terms(&self) -> &[String] {
        &self.rows
    }

    pub fn col_terms(&self) -> &[String] {
        &self.cols
    }

    pub fn row_source(&self) -> &[usize] {
        &self.row_source
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.cols.len();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols.len() + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        let n = self.cols.len().max(1);
        self.values.chunks(n).take(self.rows.len())
    }

    pub fn transpose(&self) -> InteractionMatrix {
        let (r, c) = (self.n_rows(), self.n_cols());
        let mut values = Vec::with_capacity(r * c);
        for j in 0..c {
            for i in 0..r {
                values.push(self.get(i, j));
            }
        }
        InteractionMatrix {
            rows: self.cols.clone(),
            row_source: (0..c).collect(),
            cols: self.rows.clone(),
            values,
        }
    }
}

/// Builds the summary-by-target cosine grid. Rows keep summary order and
/// columns keep target order; unusable tokens are handled per the table's
/// [`OovPolicy`].
pub fn interaction_matrix(
    summary: &[TermWeight],
    target: &[&str],
    table: &EmbeddingTable,
) -> Result<InteractionMatrix> {
    if summary.is_empty() {
        return Err(Error::Parameter("interaction matrix needs a non-empty summary".into()));
    }
    let keep = |token: &str| match table.oov_policy {
        OovPolicy::SkipTerm => table.vector(token).is_some(),
        OovPolicy::ZeroVector => true,
    };
    let mut rows = Vec::with_capacity(summary.len());
    let mut row_source = Vec::with_capacity(summary.len());
    for (i, tw) in summary.iter().enumerate() {
        if keep(&tw.term) {
            rows.push(tw.term.clone());
            row_source.push(i);
        }
    }
    let cols: Vec<String> = target
        .iter()
        .filter(|t| keep(t))
        .map(|t| t.to_string())
        .collect();

    let row_vecs: Vec<Option<&[f64]>> = rows.iter().map(|t| table.vector(t)).collect();
    let col_vecs: Vec<Option<&[f64]>> = cols.iter().map(|t| table.vector(t)).collect();
    let mut values = Vec::with_capacity(rows.len() * cols.len());
    for (rt, rv) in rows.iter().zip(&row_vecs) {
        for (ct, cv) in cols.iter().zip(&col_vecs) {
            let sim = match (rv, cv) {
                (Some(_), Some(_)) if rt == ct => 1.0,
                (Some(a), Some(b)) => dot(a, b).clamp(-1.0, 1.0),
                _ => 0.0,
            };
            values.push(sim);
        }
    }
    Ok(InteractionMatrix {
        rows,
        row_source,
        cols,
        values,
    })
}
