//! Linear optimization problem data and its self-dual embedding.
//!
//! The primal problem is `min c'x  s.t.  Ax >= b, x >= 0` with dual
//! `max b'y  s.t.  A'y <= c, y >= 0`. Row norms of `A` and the norms of
//! `b` and `c` are required to be at most 1. The primal-dual pair is
//! homogenized into a skew-symmetric system `M z >= -q, z >= 0` of
//! dimension `nbar = m + n + 2` for which the all-ones vector is strictly
//! feasible with slack equal to the all-ones vector.

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::error::{Error, Result};

/// How to handle inputs that violate the norm-at-most-1 normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Reject any row of `A`, or `b`, or `c`, with Euclidean norm > 1.
    Strict,
    /// Uniformly rescale offending rows (and `b`, `c`) down to unit norm,
    /// recording the scale factors.
    Rescale,
}

/// Normalized primal/dual LP data.
#[derive(Debug, Clone)]
pub struct LoProblem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    /// Structurally nonzero entries of `a`.
    pub nnz_a: usize,
    /// Scale factors applied on load (empty when no rescaling happened):
    /// one per row of `A`, then one for `b`, one for `c`.
    pub scales: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MatrixSpec {
    Dense(Vec<Vec<f64>>),
    Coo { coo: Vec<(usize, usize, f64)> },
}

#[derive(Deserialize)]
struct ProblemFile {
    m: usize,
    n: usize,
    #[serde(rename = "A")]
    a: MatrixSpec,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl LoProblem {
    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    /// Dimension of the embedded system, `m + n + 2`.
    pub fn nbar(&self) -> usize {
        self.m() + self.n() + 2
    }

    /// Build a problem from dense data, enforcing the normalization
    /// assumptions per `mode`.
    pub fn new(
        a: DMatrix<f64>,
        b: DVector<f64>,
        c: DVector<f64>,
        mode: Normalization,
    ) -> Result<Self> {
        let (m, n) = (a.nrows(), a.ncols());
        if m == 0 || n == 0 {
            return Err(Error::Dimension("m >= 1 and n >= 1 required".into()));
        }
        if b.len() != m || c.len() != n {
            return Err(Error::Dimension(format!(
                "A is {m}x{n} but |b| = {}, |c| = {}",
                b.len(),
                c.len()
            )));
        }
        for (idx, v) in a.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("A[{}]", idx)));
            }
        }
        for (i, v) in b.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("b[{i}]")));
            }
        }
        for (i, v) in c.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("c[{i}]")));
            }
        }

        let mut a = a;
        let mut b = b;
        let mut c = c;
        let mut scales = Vec::new();
        let mut rescaled = false;
        for i in 0..m {
            let norm = a.row(i).norm();
            if norm > 1.0 {
                match mode {
                    Normalization::Strict => {
                        return Err(Error::NormViolation(format!(
                            "row {i} of A has norm {norm:.6}"
                        )))
                    }
                    Normalization::Rescale => {
                        let s = 1.0 / norm;
                        a.row_mut(i).scale_mut(s);
                        // the constraint row a_i'x >= b_i scales as a whole
                        b[i] *= s;
                        rescaled = true;
                        scales.push(s);
                        continue;
                    }
                }
            }
            scales.push(1.0);
        }
        let bn = b.norm();
        if bn > 1.0 {
            match mode {
                Normalization::Strict => {
                    return Err(Error::NormViolation(format!("|b| = {bn:.6}")))
                }
                Normalization::Rescale => {
                    b.scale_mut(1.0 / bn);
                    rescaled = true;
                    scales.push(1.0 / bn);
                }
            }
        } else {
            scales.push(1.0);
        }
        let cn = c.norm();
        if cn > 1.0 {
            match mode {
                Normalization::Strict => {
                    return Err(Error::NormViolation(format!("|c| = {cn:.6}")))
                }
                Normalization::Rescale => {
                    c.scale_mut(1.0 / cn);
                    rescaled = true;
                    scales.push(1.0 / cn);
                }
            }
        } else {
            scales.push(1.0);
        }
        if !rescaled {
            scales.clear();
        }

        let nnz_a = a.iter().filter(|v| **v != 0.0).count();
        Ok(LoProblem { a, b, c, nnz_a, scales })
    }

    /// Parse a problem from the UTF-8 structured-text format: an object with
    /// fields `m`, `n`, `A` (dense row arrays, or `{"coo": [[i, j, v], ...]}`
    /// with 0-based indices), `b`, `c`.
    pub fn from_str(source: &str, mode: Normalization) -> Result<Self> {
        let file: ProblemFile =
            serde_json::from_str(source).map_err(|e| Error::Parse(e.to_string()))?;
        let (m, n) = (file.m, file.n);
        let a = match file.a {
            MatrixSpec::Dense(rows) => {
                if rows.len() != m || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::Dimension(format!(
                        "dense A must be {m} rows of {n} entries"
                    )));
                }
                DMatrix::from_fn(m, n, |i, j| rows[i][j])
            }
            MatrixSpec::Coo { coo } => {
                let mut a = DMatrix::zeros(m, n);
                for (i, j, v) in coo {
                    if i >= m || j >= n {
                        return Err(Error::Dimension(format!(
                            "COO entry ({i}, {j}) outside {m}x{n}"
                        )));
                    }
                    a[(i, j)] = v;
                }
                a
            }
        };
        Self::new(
            a,
            DVector::from_vec(file.b),
            DVector::from_vec(file.c),
            mode,
        )
    }

    pub fn from_path(path: &std::path::Path, mode: Normalization) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str(&text, mode)
    }
}

/// Named index blocks of the embedded variable `z = (y, x, beta, vartheta)`.
#[derive(Debug, Clone, Copy)]
pub struct BlockMap {
    pub m: usize,
    pub n: usize,
}

impl BlockMap {
    pub fn y(&self) -> std::ops::Range<usize> {
        0..self.m
    }
    pub fn x(&self) -> std::ops::Range<usize> {
        self.m..self.m + self.n
    }
    pub fn beta(&self) -> usize {
        self.m + self.n
    }
    pub fn vartheta(&self) -> usize {
        self.m + self.n + 1
    }

    /// Split `z` into its blocks.
    pub fn split(&self, z: &DVector<f64>) -> (DVector<f64>, DVector<f64>, f64, f64) {
        let y = DVector::from_iterator(self.m, self.y().map(|i| z[i]));
        let x = DVector::from_iterator(self.n, self.x().map(|i| z[i]));
        (y, x, z[self.beta()], z[self.vartheta()])
    }

    /// Inverse of [`split`](Self::split); reproduces `z` bit-for-bit.
    pub fn concat(&self, y: &DVector<f64>, x: &DVector<f64>, beta: f64, vartheta: f64) -> DVector<f64> {
        let mut z = DVector::zeros(self.m + self.n + 2);
        for (k, i) in self.y().enumerate() {
            z[i] = y[k];
        }
        for (k, i) in self.x().enumerate() {
            z[i] = x[k];
        }
        z[self.beta()] = beta;
        z[self.vartheta()] = vartheta;
        z
    }
}

/// Skew-symmetric embedding of a primal-dual LP pair, or a hand-built
/// complementarity system with the same algebraic shape (used by the
/// synthetic test systems).
///
/// Invariants enforced by construction: `M' = -M` exactly, and
/// `M e + q = e` so the all-ones vector is strictly feasible with unit
/// slack.
#[derive(Debug, Clone)]
pub struct SelfDualEmbedding {
    m_mat: DMatrix<f64>,
    q: DVector<f64>,
    /// Border column used in the construction, `r = e - Mbar e`
    /// (empty for hand-built systems).
    r: DVector<f64>,
    blocks: Option<BlockMap>,
    problem: Option<LoProblem>,
}

/// Result of mapping an embedded point back to the original LP pair.
#[derive(Debug, Clone)]
pub struct ExtractedSolution {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub beta: f64,
    pub vartheta: f64,
    pub duality_gap: f64,
    /// Componentwise `max(0, b - A x)`.
    pub primal_residuals: DVector<f64>,
    /// Componentwise `max(0, A'y - c)`.
    pub dual_residuals: DVector<f64>,
}

pub const DEFAULT_BETA_MIN: f64 = 1e-8;

impl SelfDualEmbedding {
    /// Embed an LP into the skew-symmetric system of dimension `m + n + 2`.
    ///
    /// The homogenized block matrix
    ///
    /// ```text
    ///        [ 0    A   -b ]
    /// Mbar = [ -A'  0    c ]
    ///        [ b'  -c'   0 ]
    /// ```
    ///
    /// is bordered by `r = e - Mbar e` and `-r'` to produce `M`, and
    /// `q = (0, ..., 0, nbar)`.
    pub fn embed(p: &LoProblem) -> Self {
        let (m, n) = (p.m(), p.n());
        let dim = m + n + 1;
        let nbar = dim + 1;

        // Build the upper triangle of Mbar, then mirror with sign so that
        // skew-symmetry holds exactly in floating point.
        let mut mat = DMatrix::zeros(nbar, nbar);
        for i in 0..m {
            for j in 0..n {
                mat[(i, m + j)] = p.a[(i, j)];
            }
            mat[(i, m + n)] = -p.b[i];
        }
        for j in 0..n {
            mat[(m + j, m + n)] = p.c[j];
        }
        // r = e - Mbar e from the upper-triangle data: (Mbar e)_i is the
        // signed sum over row i of Mbar.
        let mut r = DVector::zeros(dim);
        for i in 0..dim {
            let mut row_sum = 0.0;
            for j in 0..dim {
                let v = if j > i {
                    mat[(i, j)]
                } else if j < i {
                    -mat[(j, i)]
                } else {
                    0.0
                };
                row_sum += v;
            }
            r[i] = 1.0 - row_sum;
        }
        for i in 0..dim {
            mat[(i, dim)] = r[i];
        }
        // Mirror the strict upper triangle.
        for i in 0..nbar {
            for j in (i + 1)..nbar {
                mat[(j, i)] = -mat[(i, j)];
            }
        }

        let mut q = DVector::zeros(nbar);
        q[nbar - 1] = nbar as f64;

        SelfDualEmbedding {
            m_mat: mat,
            q,
            r,
            blocks: Some(BlockMap { m, n }),
            problem: Some(p.clone()),
        }
    }

    /// Build a system directly from `(M, q)`. Intended for synthetic test
    /// systems; `M` must be exactly skew-symmetric and `M e + q = e` must
    /// hold to 1e-12.
    pub fn from_parts(m_mat: DMatrix<f64>, q: DVector<f64>) -> Result<Self> {
        let nbar = q.len();
        if m_mat.nrows() != nbar || m_mat.ncols() != nbar {
            return Err(Error::Dimension("M must be square of dimension |q|".into()));
        }
        for i in 0..nbar {
            for j in 0..nbar {
                if m_mat[(i, j)] != -m_mat[(j, i)] {
                    return Err(Error::InvalidParameter(format!(
                        "M is not exactly skew-symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let e = DVector::from_element(nbar, 1.0);
        let slack_at_e = &m_mat * &e + &q;
        if (slack_at_e - &e).norm() > 1e-12 {
            return Err(Error::InvalidParameter(
                "M e + q must equal the all-ones vector".into(),
            ));
        }
        Ok(SelfDualEmbedding {
            m_mat,
            q,
            r: DVector::zeros(0),
            blocks: None,
            problem: None,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m_mat
    }

    pub fn q(&self) -> &DVector<f64> {
        &self.q
    }

    pub fn r(&self) -> &DVector<f64> {
        &self.r
    }

    pub fn nbar(&self) -> usize {
        self.q.len()
    }

    pub fn blocks(&self) -> Option<&BlockMap> {
        self.blocks.as_ref()
    }

    pub fn problem(&self) -> Option<&LoProblem> {
        self.problem.as_ref()
    }

    /// Slack vector `s(z) = M z + q`.
    pub fn slack(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        if z.len() != self.nbar() {
            return Err(Error::Dimension(format!(
                "z has length {}, embedding dimension is {}",
                z.len(),
                self.nbar()
            )));
        }
        Ok(&self.m_mat * z + &self.q)
    }

    /// Maximum Euclidean row norm over the first `nbar - 1` rows of `M`.
    pub fn max_row_norm(&self) -> f64 {
        let nbar = self.nbar();
        (0..nbar.saturating_sub(1))
            .map(|i| self.m_mat.row(i).norm())
            .fold(0.0, f64::max)
    }

    /// Map a nonnegative embedded point back to the LP pair by dividing the
    /// `(y, x)` blocks by the homogenizing variable `beta`.
    pub fn extract_solution(
        &self,
        z: &DVector<f64>,
        beta_min: f64,
    ) -> Result<ExtractedSolution> {
        let blocks = self.blocks.ok_or_else(|| {
            Error::InvalidParameter("embedding has no LP block structure".into())
        })?;
        let p = self.problem.as_ref().ok_or_else(|| {
            Error::InvalidParameter("embedding carries no problem data".into())
        })?;
        if z.len() != self.nbar() {
            return Err(Error::Dimension("z has wrong length".into()));
        }
        if z.iter().any(|v| *v < 0.0) {
            return Err(Error::InvalidParameter("z must be componentwise >= 0".into()));
        }
        let (y, x, beta, vartheta) = blocks.split(z);
        if beta <= beta_min {
            return Err(Error::BetaBelowThreshold { beta, threshold: beta_min });
        }
        let x = x / beta;
        let y = y / beta;
        let duality_gap = p.c.dot(&x) - p.b.dot(&y);
        let primal_residuals = (&p.b - &p.a * &x).map(|v| v.max(0.0));
        let dual_residuals = (p.a.transpose() * &y - &p.c).map(|v| v.max(0.0));
        Ok(ExtractedSolution {
            x,
            y,
            beta,
            vartheta,
            duality_gap,
            primal_residuals,
            dual_residuals,
        })
    }
}
