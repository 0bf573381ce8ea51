//! Compressed sparse matrices built from coordinate triplets.

use std::io::Write;

use crate::error::Result;

/// Rectangular CSR matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicate entries. Triplets are ordered by (row, col) with a
    /// stable sort, so duplicates are added in insertion order.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Entries of row `r` as `(col, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.indptr[r]..self.indptr[r + 1];
        self.indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.indptr[r]..self.indptr[r + 1];
        match self.indices[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    pub fn transpose_matvec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.nrows);
        let mut out = vec![0.0; self.ncols];
        for (r, c, v) in self.iter() {
            out[c] += v * y[r];
        }
        out
    }

    /// Writes `row col value` lines (0-based, `%.17g`).
    pub fn write_coordinate<W: Write>(&self, mut out: W) -> Result<()> {
        let mut s = String::new();
        for (r, c, v) in self.iter() {
            s.push_str(&format!("{r} {c} {}\n", format_g17(v)));
        }
        out.write_all(s.as_bytes())?;
        Ok(())
    }
}

/// Symmetric matrix stored as its upper triangle (row <= col).
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSymMatrix {
    upper: CsrMatrix,
}

impl SparseSymMatrix {
    /// Triplets below the diagonal are mirrored into the upper triangle.
    pub fn from_triplets(n: usize, triplets: Vec<(usize, usize, f64)>) -> Self {
        let t = triplets
            .into_iter()
            .map(|(r, c, v)| if r <= c { (r, c, v) } else { (c, r, v) })
            .collect();
        SparseSymMatrix {
            upper: CsrMatrix::from_triplets(n, n, t),
        }
    }

    pub fn dim(&self) -> usize {
        self.upper.nrows
    }

    /// Number of stored (upper-triangle) entries.
    pub fn nnz(&self) -> usize {
        self.upper.nnz()
    }

    pub fn upper(&self) -> &CsrMatrix {
        &self.upper
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        if r <= c {
            self.upper.get(r, c)
        } else {
            self.upper.get(c, r)
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim());
        y.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..self.dim() {
            let mut acc = 0.0;
            for (c, v) in self.upper.row(r) {
                acc += v * x[c];
                if c != r {
                    y[c] += v * x[r];
                }
            }
            y[r] += acc;
        }
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.matvec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// All entries of the full matrix as triplets.
    pub fn full_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::with_capacity(2 * self.nnz());
        for (r, c, v) in self.upper.iter() {
            t.push((r, c, v));
            if r != c {
                t.push((c, r, v));
            }
        }
        t
    }

    /// Writes the stored upper triangle as `row col value` lines.
    pub fn write_coordinate<W: Write>(&self, out: W) -> Result<()> {
        self.upper.write_coordinate(out)
    }
}

/// Formats like C's `%.17g`.
pub fn format_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if !(-4..17).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (16 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
