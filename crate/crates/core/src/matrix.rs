//! Small dense integer matrices used for incidence relations.

use std::fmt;

/// Dense row-major matrix with entries in `{-1, 0, 1}` (stored as `i8`).
#[derive(Clone, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i8>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> i8 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: i8) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[i8] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    /// Integer product, accumulated in `i64` so no entry can overflow.
    pub fn mul(&self, rhs: &IntMatrix) -> Vec<i64> {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        let mut out = vec![0i64; self.rows * rhs.cols];
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k) as i64;
                if a == 0 {
                    continue;
                }
                for c in 0..rhs.cols {
                    out[r * rhs.cols + c] += a * rhs.get(k, c) as i64;
                }
            }
        }
        out
    }

    /// `y = M x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (&m, &xc) in self.row(r).iter().zip(x) {
                match m {
                    1 => acc += xc,
                    -1 => acc -= xc,
                    _ => {}
                }
            }
            *yr = acc;
        }
    }

    /// `y = Mᵀ x`.
    pub fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(y.len(), self.cols);
        y.iter_mut().for_each(|v| *v = 0.0);
        for (r, &xr) in x.iter().enumerate() {
            for (yc, &m) in y.iter_mut().zip(self.row(r)) {
                match m {
                    1 => *yc += xr,
                    -1 => *yc -= xr,
                    _ => {}
                }
            }
        }
    }

    pub fn nonzeros_in_row(&self, r: usize) -> usize {
        self.row(r).iter().filter(|&&v| v != 0).count()
    }
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "IntMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        write!(f, "]")
    }
}
