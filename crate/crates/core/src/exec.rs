//! Execution policy for the data-parallel loops (trial batches, Gram rows,
//! dense mat-vecs).
//!
//! With the `parallel` feature (on by default) the loops run on the rayon
//! pool; without it every loop is sequential. Results are identical either
//! way: work items are independent and reductions happen afterwards in index
//! order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Below this many rows a mat-vec is always run sequentially.
#[cfg(feature = "parallel")]
const PAR_ROW_THRESHOLD: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
    #[cfg(feature = "parallel")]
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        !matches!(self, Execution::Sequential)
    }

    /// `(0..n).map(f)` collected in index order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Execution::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
        }
    }

    /// Fills `out` (row-major, rows of `width`) by calling `f(row, slice)`.
    pub fn fill_rows<F>(self, out: &mut [f64], width: usize, f: F)
    where
        F: Fn(usize, &mut [f64]) + Sync + Send,
    {
        if width == 0 {
            return;
        }
        match self {
            Execution::Sequential => out
                .chunks_mut(width)
                .enumerate()
                .for_each(|(i, row)| f(i, row)),
            #[cfg(feature = "parallel")]
            Execution::Parallel => out
                .par_chunks_mut(width)
                .enumerate()
                .for_each(|(i, row)| f(i, row)),
        }
    }

    /// Dense row-major `matrix (rows × cols) · v`.
    pub fn matvec(self, matrix: &[f64], cols: usize, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), cols);
        let rows = matrix.len().checked_div(cols).unwrap_or(0);
        let mut out = vec![0.0; rows];
        let row_dot = |i: usize, o: &mut f64| {
            *o = crate::numeric::dot(&matrix[i * cols..(i + 1) * cols], v);
        };
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel if rows >= PAR_ROW_THRESHOLD => out
                .par_iter_mut()
                .enumerate()
                .for_each(|(i, o)| row_dot(i, o)),
            _ => out.iter_mut().enumerate().for_each(|(i, o)| row_dot(i, o)),
        }
        out
    }
}
