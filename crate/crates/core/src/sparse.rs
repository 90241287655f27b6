//! Thin wrapper around faer's sparse LU.

use std::sync::Once;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, MatMut};

use crate::error::{Error, Result};

static SEQUENTIAL: Once = Once::new();

/// Factorizations run single-threaded so repeated runs are bitwise reproducible.
fn force_sequential() {
    SEQUENTIAL.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

/// Square matrix assembled from `(row, col, value)` triplets; duplicates are summed.
#[derive(Debug, Clone)]
pub struct TripletMatrix {
    n: usize,
    entries: Vec<Triplet<usize, usize, f64>>,
}

impl TripletMatrix {
    pub fn new(n: usize) -> Self {
        Self { n, entries: Vec::with_capacity(5 * n) }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        self.entries.push(Triplet::new(row, col, value));
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Enlarge to `n × n`, keeping the entries.
    pub fn grow(&mut self, n: usize) {
        self.n = self.n.max(n);
    }

    pub fn to_csc(&self) -> Result<CscMatrix> {
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(self.n, self.n, &self.entries)
            .map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
        Ok(CscMatrix { mat })
    }
}

#[derive(Debug, Clone)]
pub struct CscMatrix {
    mat: SparseColMat<usize, f64>,
}

impl CscMatrix {
    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = vec![0.0; n];
        let a = self.mat.as_ref();
        let col_ptr = a.col_ptr();
        let rows = a.row_idx();
        let vals = a.val();
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            for k in col_ptr[j]..col_ptr[j + 1] {
                y[rows[k]] += vals[k] * xj;
            }
        }
        y
    }

    pub fn symbolic_lu(&self) -> Result<SymbolicLu<usize>> {
        force_sequential();
        SymbolicLu::try_new(self.mat.symbolic()).map_err(|e| Error::LinearSolve(format!("{e:?}")))
    }

    pub fn lu(&self) -> Result<LuFactor> {
        let symbolic = self.symbolic_lu()?;
        self.lu_with(&symbolic)
    }

    /// Numeric factorization reusing a symbolic analysis of the same pattern.
    pub fn lu_with(&self, symbolic: &SymbolicLu<usize>) -> Result<LuFactor> {
        force_sequential();
        let lu = Lu::try_new_with_symbolic(symbolic.clone(), self.mat.as_ref())
            .map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
        Ok(LuFactor { lu, n: self.dim() })
    }
}

pub struct LuFactor {
    lu: Lu<usize, f64>,
    n: usize,
}

impl LuFactor {
    pub fn solve_in_place(&self, rhs: &mut [f64]) -> Result<()> {
        assert_eq!(rhs.len(), self.n);
        let view = MatMut::from_column_major_slice_mut(rhs, self.n, 1);
        self.lu.solve_in_place(view);
        if rhs.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::LinearSolve("non-finite entries in the solution".into()))
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    /// Solve for several right-hand sides at once.
    pub fn solve_many(&self, rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if rhs.is_empty() {
            return Ok(Vec::new());
        }
        let mut m = Mat::<f64>::from_fn(self.n, rhs.len(), |i, j| rhs[j][i]);
        self.lu.solve_in_place(m.as_mut());
        let out: Vec<Vec<f64>> = (0..rhs.len())
            .map(|j| (0..self.n).map(|i| m[(i, j)]).collect())
            .collect();
        if out.iter().flatten().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(Error::LinearSolve("non-finite entries in the solution".into()))
        }
    }
}
