//! Exact rational arithmetic and sparse row reduction.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qr(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Renders a rational as `p` or `p/q`.
pub fn fmt_q(x: &Q) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn parse_q(s: &str) -> Result<Q, String> {
    let s = s.trim();
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: BigInt = n.parse().map_err(|_| format!("bad rational {s:?}"))?;
    let d: BigInt = d.parse().map_err(|_| format!("bad rational {s:?}"))?;
    if d.is_zero() {
        return Err(format!("zero denominator in {s:?}"));
    }
    Ok(Q::new(n, d))
}

pub type SparseRow = BTreeMap<usize, Q>;

/// `dst += c * src`, dropping cancelled entries.
pub fn axpy(dst: &mut SparseRow, c: &Q, src: &SparseRow) {
    if c.is_zero() {
        return;
    }
    for (k, v) in src {
        let e = dst.entry(*k).or_insert_with(Q::zero);
        *e += c * v;
        if e.is_zero() {
            dst.remove(k);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, Q)>,
}

impl SparseMatrix {
    pub fn new(rows: usize, cols: usize) -> Self {
        SparseMatrix { rows, cols, entries: Vec::new() }
    }

    pub fn push(&mut self, r: usize, c: usize, v: Q) {
        assert!(r < self.rows && c < self.cols, "index ({r},{c}) out of range");
        if !v.is_zero() {
            self.entries.push((r, c, v));
        }
    }

    pub fn from_dense(a: &[Vec<Q>]) -> Self {
        let cols = a.first().map_or(0, |r| r.len());
        let mut m = SparseMatrix::new(a.len(), cols);
        for (i, row) in a.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                m.push(i, j, v.clone());
            }
        }
        m
    }

    /// Rows with duplicate entries summed.
    pub fn sparse_rows(&self) -> Vec<SparseRow> {
        let mut rows = vec![SparseRow::new(); self.rows];
        for (r, c, v) in &self.entries {
            let e = rows[*r].entry(*c).or_insert_with(Q::zero);
            *e += v;
            if e.is_zero() {
                rows[*r].remove(c);
            }
        }
        rows
    }

    pub fn mul_vec(&self, x: &[Q]) -> Vec<Q> {
        assert_eq!(x.len(), self.cols);
        let mut out = vec![Q::zero(); self.rows];
        for (r, c, v) in &self.entries {
            out[*r] += v * &x[*c];
        }
        out
    }
}

/// A reduced row echelon basis of a row space.
#[derive(Clone, Debug, Default)]
pub struct Rref {
    pub ncols: usize,
    pub rows: Vec<SparseRow>,
    pub pivots: Vec<usize>,
}

impl Rref {
    pub fn new(ncols: usize) -> Self {
        Rref { ncols, rows: Vec::new(), pivots: Vec::new() }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Reduces `v` against the pivots; the remainder is zero iff `v` is in the span.
    pub fn reduce(&self, v: &SparseRow) -> SparseRow {
        let mut v = v.clone();
        for (row, &p) in self.rows.iter().zip(&self.pivots) {
            if let Some(c) = v.get(&p).cloned() {
                axpy(&mut v, &(-c), row);
            }
        }
        v
    }

    /// Coordinates of `v` in the pivot-row basis, or `None` if `v` is outside the span.
    pub fn coordinates(&self, v: &SparseRow) -> Option<Vec<Q>> {
        let coords: Vec<Q> = self.pivots.iter().map(|p| v.get(p).cloned().unwrap_or_else(Q::zero)).collect();
        let mut rest = v.clone();
        for (row, c) in self.rows.iter().zip(&coords) {
            axpy(&mut rest, &(-c), row);
        }
        rest.is_empty().then_some(coords)
    }

    /// Adds a row, keeping the echelon form fully reduced. Returns false if dependent.
    pub fn insert(&mut self, v: &SparseRow) -> bool {
        let mut v = self.reduce(v);
        let Some((&p, lead)) = v.iter().next() else {
            return false;
        };
        let inv = lead.recip();
        for x in v.values_mut() {
            *x *= &inv;
        }
        for row in self.rows.iter_mut() {
            if let Some(c) = row.get(&p).cloned() {
                axpy(row, &(-c), &v);
            }
        }
        let at = self.pivots.partition_point(|&q| q < p);
        self.pivots.insert(at, p);
        self.rows.insert(at, v);
        true
    }

    pub fn from_rows(ncols: usize, rows: &[SparseRow]) -> Self {
        let mut r = Rref::new(ncols);
        for row in rows {
            r.insert(row);
        }
        r
    }

    pub fn free_columns(&self) -> Vec<usize> {
        let mut it = self.pivots.iter().peekable();
        let mut out = Vec::new();
        for c in 0..self.ncols {
            if it.peek() == Some(&&c) {
                it.next();
            } else {
                out.push(c);
            }
        }
        out
    }

    /// Basis of the null space of the row space (as column vectors), itself in RREF.
    pub fn null_space(&self) -> Vec<SparseRow> {
        let mut raw = Vec::new();
        for f in self.free_columns() {
            let mut v = SparseRow::new();
            v.insert(f, Q::one());
            for (row, &p) in self.rows.iter().zip(&self.pivots) {
                if let Some(c) = row.get(&f) {
                    v.insert(p, -c.clone());
                }
            }
            raw.push(v);
        }
        Rref::from_rows(self.ncols, &raw).rows
    }
}

pub fn to_dense(v: &SparseRow, n: usize) -> Vec<Q> {
    let mut out = vec![Q::zero(); n];
    for (k, x) in v {
        out[*k] = x.clone();
    }
    out
}

pub fn to_sparse(v: &[Q]) -> SparseRow {
    v.iter().enumerate().filter(|(_, x)| !x.is_zero()).map(|(i, x)| (i, x.clone())).collect()
}

/// Basis of `{v : Av = 0}` in reduced row echelon form.
pub fn kernel_basis(a: &SparseMatrix) -> Vec<Vec<Q>> {
    let r = Rref::from_rows(a.cols, &a.sparse_rows());
    r.null_space().iter().map(|v| to_dense(v, a.cols)).collect()
}

pub fn rank(a: &SparseMatrix) -> usize {
    Rref::from_rows(a.cols, &a.sparse_rows()).rank()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("inconsistent linear system")]
pub struct Inconsistent;

/// Particular solution of `Ax = b` with all free variables set to zero.
pub fn solve(a: &SparseMatrix, b: &[Q]) -> Result<Vec<Q>, Inconsistent> {
    assert_eq!(b.len(), a.rows, "right-hand side length");
    let n = a.cols;
    // Augment with the right-hand side in column n.
    let mut rows = a.sparse_rows();
    for (row, bi) in rows.iter_mut().zip(b) {
        if !bi.is_zero() {
            row.insert(n, bi.clone());
        }
    }
    let r = Rref::from_rows(n + 1, &rows);
    if r.pivots.contains(&n) {
        return Err(Inconsistent);
    }
    let mut x = vec![Q::zero(); n];
    for (row, &p) in r.rows.iter().zip(&r.pivots) {
        if let Some(v) = row.get(&n) {
            x[p] = v.clone();
        }
    }
    Ok(x)
}

pub type Mat = Vec<Vec<Q>>;

pub fn zeros(r: usize, c: usize) -> Mat {
    vec![vec![Q::zero(); c]; r]
}

pub fn identity(n: usize) -> Mat {
    let mut m = zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = Q::one();
    }
    m
}

pub fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    let (n, k) = (a.len(), b.len());
    let m = b.first().map_or(0, |r| r.len());
    let mut out = zeros(n, m);
    for i in 0..n {
        for l in 0..k {
            if a[i][l].is_zero() {
                continue;
            }
            for j in 0..m {
                if !b[l][j].is_zero() {
                    out[i][j] += &a[i][l] * &b[l][j];
                }
            }
        }
    }
    out
}

pub fn mat_add(a: &Mat, b: &Mat, cb: &Q) -> Mat {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + cb * y).collect())
        .collect()
}

pub fn mat_commutator(a: &Mat, b: &Mat) -> Mat {
    mat_add(&mat_mul(a, b), &mat_mul(b, a), &q(-1))
}

pub fn mat_scale(a: &Mat, c: &Q) -> Mat {
    a.iter().map(|r| r.iter().map(|x| x * c).collect()).collect()
}

pub fn mat_is_zero(a: &Mat) -> bool {
    a.iter().all(|r| r.iter().all(Zero::is_zero))
}

pub fn transpose(a: &Mat) -> Mat {
    let m = a.first().map_or(0, |r| r.len());
    (0..m).map(|j| a.iter().map(|r| r[j].clone()).collect()).collect()
}

pub fn mat_vec(a: &Mat, x: &[Q]) -> Vec<Q> {
    a.iter().map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

pub fn trace(a: &Mat) -> Q {
    (0..a.len()).map(|i| a[i][i].clone()).sum()
}

/// Inverse of a square matrix, or `None` if singular.
pub fn mat_inverse(a: &Mat) -> Option<Mat> {
    let n = a.len();
    let mut m: Mat = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { Q::one() } else { Q::zero() }));
            row
        })
        .collect();
    for c in 0..n {
        let p = (c..n).find(|&r| !m[r][c].is_zero())?;
        m.swap(c, p);
        let inv = m[c][c].recip();
        for x in m[c].iter_mut() {
            *x *= &inv;
        }
        for r in 0..n {
            if r != c && !m[r][c].is_zero() {
                let f = m[r][c].clone();
                let pivot = m[c].clone();
                for (x, y) in m[r].iter_mut().zip(&pivot) {
                    *x -= &f * y;
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Rational roots of a polynomial given by coefficients (constant term first).
pub fn rational_roots(coeffs: &[Q]) -> Vec<Q> {
    use num_integer::Integer;
    let mut c: Vec<Q> = coeffs.to_vec();
    while c.last().is_some_and(Zero::is_zero) {
        c.pop();
    }
    if c.len() <= 1 {
        return Vec::new();
    }
    let mut roots = Vec::new();
    while c.first().is_some_and(Zero::is_zero) {
        c.remove(0);
        if !roots.contains(&Q::zero()) {
            roots.push(Q::zero());
        }
    }
    if c.len() <= 1 {
        return roots;
    }
    let l = c.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let ints: Vec<BigInt> = c.iter().map(|x| (x * Q::from_integer(l.clone())).to_integer()).collect();
    let divisors = |n: &BigInt| -> Vec<BigInt> {
        let n = n.abs();
        let mut out = Vec::new();
        let mut d = BigInt::one();
        while &d * &d <= n {
            if (&n % &d).is_zero() {
                out.push(d.clone());
                out.push(&n / &d);
            }
            d += 1;
        }
        out
    };
    let eval = |x: &Q| -> Q {
        let mut acc = Q::zero();
        for a in c.iter().rev() {
            acc = acc * x + a;
        }
        acc
    };
    for p in divisors(&ints[0]) {
        for d in divisors(ints.last().unwrap()) {
            for s in [1, -1] {
                let x = Q::new(&p * s, d.clone());
                if eval(&x).is_zero() && !roots.contains(&x) {
                    roots.push(x);
                }
            }
        }
    }
    roots.sort();
    roots
}

/// Characteristic polynomial `det(tI - A)`, constant term first (Faddeev-LeVerrier).
pub fn char_poly(a: &Mat) -> Vec<Q> {
    let n = a.len();
    let mut coeffs = vec![Q::zero(); n + 1];
    coeffs[n] = Q::one();
    let mut m = zeros(n, n);
    for k in 1..=n {
        let am = mat_mul(a, &m);
        m = mat_add(&am, &identity(n), &coeffs[n - k + 1]);
        let c = -trace(&mat_mul(a, &m)) / q(k as i64);
        coeffs[n - k] = c;
    }
    coeffs
}

pub struct Pretty<'a>(pub &'a Q);

impl fmt::Display for Pretty<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&fmt_q(self.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[i64]]) -> SparseMatrix {
        SparseMatrix::from_dense(&rows.iter().map(|r| r.iter().map(|&x| q(x)).collect()).collect::<Vec<_>>())
    }

    #[test]
    fn identity_has_trivial_kernel() {
        assert!(kernel_basis(&m(&[&[1, 0], &[0, 1]])).is_empty());
    }

    #[test]
    fn rank_one_row() {
        let k = kernel_basis(&m(&[&[1, 1]]));
        assert_eq!(k, vec![vec![q(1), q(-1)]]);
    }

    #[test]
    fn kernel_vectors_annihilate() {
        let a = m(&[&[1, 2, 0, 3, -1], &[0, 1, 4, 1, 1], &[2, 0, 1, 0, 5]]);
        let k = kernel_basis(&a);
        assert_eq!(k.len(), 2);
        for v in &k {
            assert!(a.mul_vec(v).iter().all(Zero::is_zero));
        }
        let again = Rref::from_rows(5, &k.iter().map(|v| to_sparse(v)).collect::<Vec<_>>());
        let back: Vec<Vec<Q>> = again.rows.iter().map(|r| to_dense(r, 5)).collect();
        assert_eq!(back, k);
    }

    #[test]
    fn solve_examples() {
        assert_eq!(solve(&m(&[&[1, 0], &[0, 1]]), &[q(1), q(2)]).unwrap(), vec![q(1), q(2)]);
        assert_eq!(solve(&m(&[&[1, 1]]), &[q(0)]).unwrap(), vec![q(0), q(0)]);
        assert_eq!(solve(&m(&[&[2, 0], &[0, 0]]), &[q(1), q(1)]), Err(Inconsistent));
    }

    #[test]
    fn parse_and_format() {
        assert_eq!(parse_q("-6/4").unwrap(), qr(-3, 2));
        assert_eq!(fmt_q(&qr(-3, 2)), "-3/2");
        assert_eq!(fmt_q(&q(7)), "7");
        assert!(parse_q("1/0").is_err());
    }

    #[test]
    fn inverse_and_charpoly() {
        let a: Mat = vec![vec![q(2), q(1)], vec![q(0), q(3)]];
        let inv = mat_inverse(&a).unwrap();
        assert_eq!(mat_mul(&a, &inv), identity(2));
        let cp = char_poly(&a);
        assert_eq!(cp, vec![q(6), q(-5), q(1)]);
        assert_eq!(rational_roots(&cp), vec![q(2), q(3)]);
    }
}
