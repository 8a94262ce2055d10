//! Reductive Lie algebras with an sl2-triple, a good grading and the derived
//! tables (n, p, k, dual bases, r-basis, symplectic basis of k).

use std::cmp::Ordering;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::ratlin::{
    identity, kernel_basis, mat_commutator, mat_mul, parse_q, q, solve, to_sparse, trace, Mat, Rref, SparseMatrix, Q,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LieError {
    #[error("partition {0:?} does not sum to {1}")]
    PartitionMismatch(Vec<usize>, usize),
    #[error("nilpotent element is zero")]
    ZeroNilpotent,
    #[error("element is not nilpotent")]
    NotNilpotent,
    #[error("no sl2-triple through the given element")]
    NoTriple,
    #[error("singular pairing while building {0}")]
    Singular(&'static str),
    #[error("basis vector {0} is not a weight vector for the torus")]
    NotAdapted(String),
    #[error("invalid algebra: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kind {
    Gl,
    Sl,
}

/// A reductive Lie algebra with structure constants, invariant form,
/// sl2-triple, grading and tori, all in a fixed ordered basis.
#[derive(Clone, Debug)]
pub struct AlgebraSpec {
    pub name: String,
    pub labels: Vec<String>,
    /// `brackets[i][j]` is `[b_i, b_j]` as a sparse combination of basis vectors.
    pub brackets: Vec<Vec<Vec<(usize, Q)>>>,
    pub form: Mat,
    pub e: Vec<Q>,
    pub h: Vec<Q>,
    pub f: Vec<Q>,
    pub grading: Vec<i32>,
    pub t: Vec<Vec<Q>>,
    pub te: Vec<Vec<Q>>,
    /// Defining matrices of the basis, when the algebra is a matrix algebra.
    pub natural: Option<Vec<Mat>>,
}

fn unit(n: usize, i: usize) -> Vec<Q> {
    let mut v = vec![Q::zero(); n];
    v[i] = Q::one();
    v
}

fn add_scaled(dst: &mut [Q], c: &Q, src: &[Q]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += c * s;
    }
}

pub fn is_zero_vec(v: &[Q]) -> bool {
    v.iter().all(Zero::is_zero)
}

/// Sign of a t^e-weight under the lexicographic splitting functional.
pub fn lex_sign(w: &[Q]) -> Ordering {
    for x in w {
        if x.is_positive() {
            return Ordering::Greater;
        }
        if x.is_negative() {
            return Ordering::Less;
        }
    }
    Ordering::Equal
}

impl AlgebraSpec {
    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn basis_vec(&self, i: usize) -> Vec<Q> {
        unit(self.dim(), i)
    }

    pub fn bracket(&self, x: &[Q], y: &[Q]) -> Vec<Q> {
        let n = self.dim();
        let mut out = vec![Q::zero(); n];
        for (i, xi) in x.iter().enumerate() {
            if xi.is_zero() {
                continue;
            }
            for (j, yj) in y.iter().enumerate() {
                if yj.is_zero() {
                    continue;
                }
                let c = xi * yj;
                for (k, v) in &self.brackets[i][j] {
                    out[*k] += &c * v;
                }
            }
        }
        out
    }

    /// Matrix of `ad x`: column j holds the coordinates of `[x, b_j]`.
    pub fn ad(&self, x: &[Q]) -> Mat {
        let n = self.dim();
        let mut m = vec![vec![Q::zero(); n]; n];
        for j in 0..n {
            let col = self.bracket(x, &self.basis_vec(j));
            for i in 0..n {
                m[i][j] = col[i].clone();
            }
        }
        m
    }

    pub fn pair(&self, x: &[Q], y: &[Q]) -> Q {
        let mut s = Q::zero();
        for (i, xi) in x.iter().enumerate() {
            if xi.is_zero() {
                continue;
            }
            for (j, yj) in y.iter().enumerate() {
                if !yj.is_zero() && !self.form[i][j].is_zero() {
                    s += xi * yj * &self.form[i][j];
                }
            }
        }
        s
    }

    /// The functional `x -> (e|x)` as values on basis vectors.
    pub fn chi_e(&self) -> Vec<Q> {
        (0..self.dim()).map(|k| self.pair(&self.e, &self.basis_vec(k))).collect()
    }

    /// Degree of a vector if it is grading-homogeneous.
    pub fn degree_of(&self, x: &[Q]) -> Option<i32> {
        let mut d = None;
        for (i, xi) in x.iter().enumerate() {
            if !xi.is_zero() {
                match d {
                    None => d = Some(self.grading[i]),
                    Some(d0) if d0 != self.grading[i] => return None,
                    _ => {}
                }
            }
        }
        d
    }

    /// Eigenvalue of `ad t` on `x`, if `x` is an eigenvector.
    pub fn eigenvalue(&self, t: &[Q], x: &[Q]) -> Option<Q> {
        let y = self.bracket(t, x);
        let p = x.iter().position(|c| !c.is_zero())?;
        let lam = &y[p] / &x[p];
        y.iter().zip(x).all(|(a, b)| *a == &lam * b).then_some(lam)
    }

    /// Weight of `x` with respect to a list of commuting semisimple elements.
    pub fn weight(&self, torus: &[Vec<Q>], x: &[Q]) -> Option<Vec<Q>> {
        torus.iter().map(|t| self.eigenvalue(t, x)).collect()
    }

    pub fn t_weights(&self) -> Result<Vec<Vec<Q>>, LieError> {
        (0..self.dim())
            .map(|i| self.weight(&self.t, &self.basis_vec(i)).ok_or_else(|| LieError::NotAdapted(self.labels[i].clone())))
            .collect()
    }

    pub fn te_weights(&self) -> Result<Vec<Vec<Q>>, LieError> {
        (0..self.dim())
            .map(|i| self.weight(&self.te, &self.basis_vec(i)).ok_or_else(|| LieError::NotAdapted(self.labels[i].clone())))
            .collect()
    }

    /// Extends a t-weight (values on the t basis) to a functional on g that
    /// vanishes on all nonzero t-weight spaces.
    pub fn torus_functional(&self, w: &[Q]) -> Result<Vec<Q>, LieError> {
        let weights = self.t_weights()?;
        let n = self.dim();
        let mut a = SparseMatrix::new(n, self.t.len());
        for (m, tm) in self.t.iter().enumerate() {
            for i in 0..n {
                a.push(i, m, tm[i].clone());
            }
        }
        let mut out = vec![Q::zero(); n];
        for i in 0..n {
            if !is_zero_vec(&weights[i]) {
                continue;
            }
            let c = solve(&a, &self.basis_vec(i))
                .map_err(|_| LieError::Invalid(format!("zero-weight vector {} outside t", self.labels[i])))?;
            out[i] = c.iter().zip(w).map(|(x, y)| x * y).sum();
        }
        Ok(out)
    }

    /// The grading element `c` in `t` with `g(j)` equal to the `j`-eigenspace of `ad c`.
    pub fn grading_element(&self) -> Result<Vec<Q>, LieError> {
        let weights = self.t_weights()?;
        let mut a = SparseMatrix::new(self.dim(), self.t.len());
        for (i, w) in weights.iter().enumerate() {
            for (m, x) in w.iter().enumerate() {
                a.push(i, m, x.clone());
            }
        }
        let b: Vec<Q> = self.grading.iter().map(|&d| q(d as i64)).collect();
        let coeffs = solve(&a, &b).map_err(|_| LieError::Invalid("grading is not given by an element of t".into()))?;
        let mut c = vec![Q::zero(); self.dim()];
        for (cm, tm) in coeffs.iter().zip(&self.t) {
            add_scaled(&mut c, cm, tm);
        }
        Ok(c)
    }

    /// Checks the structural invariants; returns the list of violations.
    pub fn validate(&self) -> Vec<String> {
        let n = self.dim();
        let mut bad = Vec::new();
        let basis: Vec<Vec<Q>> = (0..n).map(|i| self.basis_vec(i)).collect();
        'anti: for i in 0..n {
            for j in 0..n {
                let a = self.bracket(&basis[i], &basis[j]);
                let b = self.bracket(&basis[j], &basis[i]);
                if a.iter().zip(&b).any(|(x, y)| *x != -y.clone()) {
                    bad.push(format!("antisymmetry fails at ({},{})", self.labels[i], self.labels[j]));
                    break 'anti;
                }
            }
        }
        'jac: for i in 0..n {
            for j in 0..n {
                let bij = self.bracket(&basis[i], &basis[j]);
                for k in 0..n {
                    let mut s = self.bracket(&bij, &basis[k]);
                    let bjk = self.bracket(&basis[j], &basis[k]);
                    let bki = self.bracket(&basis[k], &basis[i]);
                    add_scaled(&mut s, &Q::one(), &self.bracket(&bjk, &basis[i]));
                    add_scaled(&mut s, &Q::one(), &self.bracket(&bki, &basis[j]));
                    if !is_zero_vec(&s) {
                        bad.push(format!("Jacobi fails at ({},{},{})", self.labels[i], self.labels[j], self.labels[k]));
                        break 'jac;
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                if self.form[i][j] != self.form[j][i] {
                    bad.push("form is not symmetric".into());
                }
            }
        }
        if crate::ratlin::mat_inverse(&self.form).is_none() {
            bad.push("form is degenerate".into());
        }
        'inv: for i in 0..n {
            for j in 0..n {
                let bij = self.bracket(&basis[i], &basis[j]);
                for k in 0..n {
                    let bjk = self.bracket(&basis[j], &basis[k]);
                    if self.pair(&bij, &basis[k]) != self.pair(&basis[i], &bjk) {
                        bad.push("form is not invariant".into());
                        break 'inv;
                    }
                }
            }
        }
        let he = self.bracket(&self.h, &self.e);
        let ef = self.bracket(&self.e, &self.f);
        let hf = self.bracket(&self.h, &self.f);
        if he != self.e.iter().map(|x| x * q(2)).collect::<Vec<_>>() {
            bad.push("[h,e] = 2e".into());
        }
        if ef != self.h {
            bad.push("[e,f] = h".into());
        }
        if hf != self.f.iter().map(|x| x * q(-2)).collect::<Vec<_>>() {
            bad.push("[h,f] = -2f".into());
        }
        if !self.grading_is_lie() {
            bad.push("grading is not a Lie algebra grading".into());
        }
        for t in &self.t {
            if (0..n).any(|i| self.eigenvalue(t, &basis[i]).is_none()) {
                bad.push("t is not diagonal on the basis".into());
                break;
            }
        }
        for (a, ta) in self.t.iter().enumerate() {
            for tb in &self.t[a + 1..] {
                if !is_zero_vec(&self.bracket(ta, tb)) {
                    bad.push("t is not abelian".into());
                }
            }
        }
        let t_span = Rref::from_rows(n, &self.t.iter().map(|v| to_sparse(v)).collect::<Vec<_>>());
        for te in &self.te {
            if !t_span.reduce(&to_sparse(te)).is_empty() {
                bad.push("t^e is not contained in t".into());
            }
            if !is_zero_vec(&self.bracket(te, &self.e)) {
                bad.push("[t^e, e] = 0".into());
            }
            if !is_zero_vec(&self.bracket(te, &self.h)) {
                bad.push("[t^e, h] = 0".into());
            }
        }
        bad
    }

    fn grading_is_lie(&self) -> bool {
        let n = self.dim();
        for i in 0..n {
            for j in 0..n {
                let want = self.grading[i] + self.grading[j];
                if self.brackets[i][j].iter().any(|(k, _)| self.grading[*k] != want) {
                    return false;
                }
            }
        }
        true
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Human-readable rendering of a vector.
    pub fn show(&self, x: &[Q]) -> String {
        let mut parts = Vec::new();
        for (i, c) in x.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let coef = crate::ratlin::fmt_q(c);
            parts.push(if c.is_one() { self.labels[i].clone() } else { format!("{coef}*{}", self.labels[i]) });
        }
        if parts.is_empty() {
            "0".into()
        } else {
            parts.join(" + ")
        }
    }
}

fn matrix_unit(n: usize, i: usize, j: usize) -> Mat {
    let mut m = vec![vec![Q::zero(); n]; n];
    m[i][j] = Q::one();
    m
}

fn label(prefix: char, i: usize, j: Option<usize>, n: usize) -> String {
    let sep = if n >= 10 { "_" } else { "" };
    match j {
        Some(j) => format!("{prefix}{}{sep}{}", i + 1, j + 1),
        None => format!("{prefix}{}", i + 1),
    }
}

/// Builds gl_n or sl_n with the trace form and a nilpotent of Jordan type `partition`.
pub fn build_gl_sl(kind: Kind, n: usize, partition: &[usize]) -> Result<AlgebraSpec, LieError> {
    if partition.iter().sum::<usize>() != n || partition.contains(&0) {
        return Err(LieError::PartitionMismatch(partition.to_vec(), n));
    }
    if partition.iter().all(|&p| p == 1) {
        return Err(LieError::ZeroNilpotent);
    }
    // Jordan blocks in the standard basis, then a stable sort making h non-increasing.
    let mut parts = partition.to_vec();
    parts.sort_unstable_by(|a, b| b.cmp(a));
    let mut hdiag = Vec::new();
    let mut e_pairs = Vec::new();
    let mut f_pairs = Vec::new();
    let mut start = 0;
    for &m in &parts {
        for k in 0..m {
            hdiag.push(m as i64 - 1 - 2 * k as i64);
            if k + 1 < m {
                e_pairs.push((start + k, start + k + 1, 1i64));
                f_pairs.push((start + k + 1, start + k, ((k + 1) * (m - k - 1)) as i64));
            }
        }
        start += m;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| hdiag[*b].cmp(&hdiag[*a]));
    let mut pos = vec![0; n];
    for (new, &old) in order.iter().enumerate() {
        pos[old] = new;
    }
    let mut e_mat = vec![vec![Q::zero(); n]; n];
    let mut f_mat = vec![vec![Q::zero(); n]; n];
    let mut h_mat = vec![vec![Q::zero(); n]; n];
    for &(i, j, c) in &e_pairs {
        e_mat[pos[i]][pos[j]] = q(c);
    }
    for &(i, j, c) in &f_pairs {
        f_mat[pos[i]][pos[j]] = q(c);
    }
    for (old, &hv) in hdiag.iter().enumerate() {
        h_mat[pos[old]][pos[old]] = q(hv);
    }

    // Basis: upper e_ij, diagonal part, lower e_ij.
    let mut labels = Vec::new();
    let mut mats = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            labels.push(label('e', i, Some(j), n));
            mats.push(matrix_unit(n, i, j));
        }
    }
    let diag_start = mats.len();
    match kind {
        Kind::Gl => {
            for i in 0..n {
                labels.push(label('e', i, Some(i), n));
                mats.push(matrix_unit(n, i, i));
            }
        }
        Kind::Sl => {
            for i in 0..n - 1 {
                labels.push(label('h', i, None, n));
                let mut m = matrix_unit(n, i, i);
                m[i + 1][i + 1] = q(-1);
                mats.push(m);
            }
        }
    }
    let diag_end = mats.len();
    for i in 0..n {
        for j in 0..i {
            labels.push(label('e', i, Some(j), n));
            mats.push(matrix_unit(n, i, j));
        }
    }
    let dim = mats.len();
    let coords = |m: &Mat| -> Vec<Q> { matrix_coords(kind, n, m, &labels) };
    let mut brackets = vec![vec![Vec::new(); dim]; dim];
    for i in 0..dim {
        for j in 0..dim {
            let c = coords(&mat_commutator(&mats[i], &mats[j]));
            brackets[i][j] = c.iter().enumerate().filter(|(_, x)| !x.is_zero()).map(|(k, x)| (k, x.clone())).collect();
        }
    }
    let form: Mat = (0..dim).map(|i| (0..dim).map(|j| trace(&mat_mul(&mats[i], &mats[j]))).collect()).collect();
    let e = coords(&e_mat);
    let h = coords(&h_mat);
    let f = coords(&f_mat);
    let t: Vec<Vec<Q>> = (diag_start..diag_end).map(|i| unit(dim, i)).collect();
    let kind_name = match kind {
        Kind::Gl => "gl",
        Kind::Sl => "sl",
    };
    let mut spec = AlgebraSpec {
        name: format!("{kind_name}{n}:{partition:?}").replace(' ', ""),
        labels,
        brackets,
        form,
        e,
        h,
        f,
        grading: vec![0; dim],
        t,
        te: Vec::new(),
        natural: Some(mats),
    };
    spec.grading = dynkin_grading(&spec)?;
    spec.te = compute_te(&spec);
    Ok(spec)
}

/// Coordinates of a matrix in the gl/sl basis built above.
fn matrix_coords(kind: Kind, n: usize, m: &Mat, labels: &[String]) -> Vec<Q> {
    let mut out = vec![Q::zero(); labels.len()];
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            out[k] = m[i][j].clone();
            k += 1;
        }
    }
    match kind {
        Kind::Gl => {
            for i in 0..n {
                out[k] = m[i][i].clone();
                k += 1;
            }
        }
        Kind::Sl => {
            let mut acc = Q::zero();
            for i in 0..n - 1 {
                acc += &m[i][i];
                out[k] = acc.clone();
                k += 1;
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            out[k] = m[i][j].clone();
            k += 1;
        }
    }
    out
}

/// Grading by `ad h` eigenvalues; requires an adapted basis.
pub fn dynkin_grading(spec: &AlgebraSpec) -> Result<Vec<i32>, LieError> {
    (0..spec.dim())
        .map(|i| {
            let lam = spec.eigenvalue(&spec.h, &spec.basis_vec(i)).ok_or_else(|| LieError::NotAdapted(spec.labels[i].clone()))?;
            if !lam.is_integer() {
                return Err(LieError::Invalid("non-integral ad h eigenvalue".into()));
            }
            Ok(lam.to_integer().try_into().unwrap())
        })
        .collect()
}

/// `t^e = ker(ad e) ∩ ker(ad h) ∩ t`, as an RREF basis in t-coordinates mapped to g.
pub fn compute_te(spec: &AlgebraSpec) -> Vec<Vec<Q>> {
    let n = spec.dim();
    let m = spec.t.len();
    let mut a = SparseMatrix::new(2 * n, m);
    for (c, tc) in spec.t.iter().enumerate() {
        let be = spec.bracket(tc, &spec.e);
        let bh = spec.bracket(tc, &spec.h);
        for i in 0..n {
            a.push(i, c, be[i].clone());
            a.push(n + i, c, bh[i].clone());
        }
    }
    kernel_basis(&a)
        .into_iter()
        .map(|coef| {
            let mut v = vec![Q::zero(); n];
            for (cm, tm) in coef.iter().zip(&spec.t) {
                add_scaled(&mut v, cm, tm);
            }
            v
        })
        .collect()
}

/// RREF basis of `ker(ad x)`.
pub fn centralizer(spec: &AlgebraSpec, x: &[Q]) -> Vec<Vec<Q>> {
    kernel_basis(&SparseMatrix::from_dense(&spec.ad(x)))
}

/// Completes a nilpotent `e` to an sl2-triple with `h ∈ [e, g]`.
pub fn complete_sl2_triple(spec: &AlgebraSpec, e: &[Q]) -> Result<(Vec<Q>, Vec<Q>), LieError> {
    if is_zero_vec(e) {
        return Err(LieError::ZeroNilpotent);
    }
    let n = spec.dim();
    let ade = spec.ad(e);
    let mut power = identity(n);
    for _ in 0..=n {
        power = mat_mul(&ade, &power);
    }
    if !power.iter().all(|r| is_zero_vec(r)) {
        return Err(LieError::NotNilpotent);
    }
    // h = [e, z] with [e, [e, z]] = -2e.
    let ade2 = mat_mul(&ade, &ade);
    let rhs: Vec<Q> = e.iter().map(|x| x * q(-2)).collect();
    let z = solve(&SparseMatrix::from_dense(&ade2), &rhs).map_err(|_| LieError::NoTriple)?;
    let h = spec.bracket(e, &z);
    // f with [e, f] = h and [h, f] = -2f.
    let adh = spec.ad(&h);
    let mut a = SparseMatrix::new(2 * n, n);
    let mut b = vec![Q::zero(); 2 * n];
    for i in 0..n {
        for j in 0..n {
            a.push(i, j, ade[i][j].clone());
            let mut v = adh[i][j].clone();
            if i == j {
                v += q(2);
            }
            a.push(n + i, j, v);
        }
        b[i] = h[i].clone();
    }
    let f = solve(&a, &b).map_err(|_| LieError::NoTriple)?;
    Ok((h, f))
}

/// Checks the good-grading axioms; returns violated axiom names.
pub fn validate_good_grading(spec: &AlgebraSpec) -> Vec<String> {
    let mut bad = Vec::new();
    let n = spec.dim();
    let in_degree = |x: &[Q], d: i32| x.iter().enumerate().all(|(i, c)| c.is_zero() || spec.grading[i] == d);
    if !in_degree(&spec.e, 2) {
        bad.push("e ∈ g(2)".to_string());
    }
    if !in_degree(&spec.f, -2) {
        bad.push("f ∈ g(-2)".to_string());
    }
    let ge = centralizer(spec, &spec.e);
    if ge.iter().any(|v| v.iter().enumerate().any(|(i, c)| !c.is_zero() && spec.grading[i] < 0)) {
        bad.push("g^e ⊆ nonnegative degrees".to_string());
    }
    // Centre: common kernel of all ad b_i.
    let mut a = SparseMatrix::new(n * n, n);
    for i in 0..n {
        for j in 0..n {
            for (k, c) in &spec.brackets[j][i] {
                a.push(i * n + k, j, c.clone());
            }
        }
    }
    let centre = kernel_basis(&a);
    if centre.iter().any(|v| !in_degree(v, 0)) {
        bad.push("z(g) ⊆ g(0)".to_string());
    }
    if !spec.grading_is_lie() {
        bad.push("[g(i),g(j)] ⊆ g(i+j)".to_string());
    }
    if spec.t.iter().any(|t| !in_degree(t, 0)) {
        bad.push("t ⊆ g(0)".to_string());
    }
    bad
}

/// Derived tables for a validated spec.
#[derive(Clone, Debug)]
pub struct GradingTables {
    /// Basis of n as g-basis indices, ordered by `d` ascending then index.
    pub n_basis: Vec<usize>,
    pub d: Vec<i32>,
    pub p_basis: Vec<usize>,
    pub k_basis: Vec<usize>,
    /// t-weight of every g-basis vector (values on the t basis).
    pub t_weights: Vec<Vec<Q>>,
    /// t^e-weight of every g-basis vector (values on the t^e basis).
    pub te_weights: Vec<Vec<Q>>,
    /// `x_i ∈ g(d_i - 2)` with `(x_i|[b_j,e]) = δ_ij` and `x_i ⊥ g^f`.
    pub r_basis: Vec<Vec<Q>>,
    pub s: usize,
    /// Symplectic basis of k with `<z_i|z_{i+s}> = 1`.
    pub z: Vec<Vec<Q>>,
    pub chi: Vec<Q>,
    /// `β = Σ β_i` extended to a character of p (values on basis vectors).
    pub beta: Vec<Q>,
    /// Homogeneous t^e-weight basis of g^e: negative, zero, then positive
    /// restricted weights, each by ascending degree.
    pub ge: Vec<Vec<Q>>,
    pub ge_degree: Vec<i32>,
    pub ge_weight: Vec<Vec<Q>>,
    /// Grading element of t.
    pub c: Vec<Q>,
}

impl GradingTables {
    pub fn r(&self) -> usize {
        self.n_basis.len()
    }

    /// Symplectic form `<x|y> = (e|[y,x])` on k.
    pub fn omega(spec: &AlgebraSpec, x: &[Q], y: &[Q]) -> Q {
        spec.pair(&spec.e, &spec.bracket(y, x))
    }

    /// The dual partner `z_j^*` of the symplectic basis.
    pub fn z_star(&self, j: usize) -> Vec<Q> {
        if j < self.s {
            self.z[j + self.s].clone()
        } else {
            self.z[j - self.s].iter().map(|x| -x.clone()).collect()
        }
    }
}

pub fn grading_tables(spec: &AlgebraSpec) -> Result<GradingTables, LieError> {
    let n = spec.dim();
    let t_weights = spec.t_weights()?;
    let te_weights = spec.te_weights()?;
    let mut n_basis: Vec<usize> = (0..n).filter(|&i| spec.grading[i] < 0).collect();
    n_basis.sort_by_key(|&i| (-spec.grading[i], i));
    let d: Vec<i32> = n_basis.iter().map(|&i| -spec.grading[i]).collect();
    let mut p_basis: Vec<usize> = (0..n).filter(|&i| spec.grading[i] >= 0).collect();
    p_basis.sort_by_key(|&i| (spec.grading[i], i));
    let k_basis: Vec<usize> = (0..n).filter(|&i| spec.grading[i] == -1).collect();

    let gf = centralizer(spec, &spec.f);
    let mut r_basis = Vec::new();
    for (i, &bi) in n_basis.iter().enumerate() {
        let target = d[i] - 2;
        let support: Vec<usize> = (0..n).filter(|&k| spec.grading[k] == target).collect();
        let mut a = SparseMatrix::new(n_basis.len() + gf.len(), support.len());
        let mut rhs = vec![Q::zero(); n_basis.len() + gf.len()];
        for (row, &bj) in n_basis.iter().enumerate() {
            let v = spec.bracket(&spec.basis_vec(bj), &spec.e);
            for (col, &k) in support.iter().enumerate() {
                a.push(row, col, spec.pair(&spec.basis_vec(k), &v));
            }
            if bj == bi {
                rhs[row] = Q::one();
            }
        }
        for (g, y) in gf.iter().enumerate() {
            for (col, &k) in support.iter().enumerate() {
                a.push(n_basis.len() + g, col, spec.pair(&spec.basis_vec(k), y));
            }
        }
        let sol = solve(&a, &rhs).map_err(|_| LieError::Singular("r-basis"))?;
        if !kernel_basis(&a).is_empty() {
            return Err(LieError::Singular("r-basis (non-unique)"));
        }
        let mut x = vec![Q::zero(); n];
        for (col, &k) in support.iter().enumerate() {
            x[k] = sol[col].clone();
        }
        r_basis.push(x);
    }

    let z = symplectic_basis(spec, &k_basis)?;
    let s = z.len() / 2;
    let chi = spec.chi_e();
    let mut beta_t = vec![Q::zero(); spec.t.len()];
    for &bi in &n_basis {
        add_scaled(&mut beta_t, &Q::one(), &t_weights[bi]);
    }
    let beta = spec.torus_functional(&beta_t)?;

    // g^e basis: kernel of ad e within each (degree, t^e-weight) block.
    let mut blocks: Vec<(i32, Vec<Q>)> = Vec::new();
    for i in 0..n {
        let key = (spec.grading[i], te_weights[i].clone());
        if !blocks.contains(&key) {
            blocks.push(key);
        }
    }
    blocks.sort_by(|a, b| lex_sign(&a.1).cmp(&lex_sign(&b.1)).then_with(|| a.0.cmp(&b.0)).then_with(|| a.1.cmp(&b.1)));
    let mut ge = Vec::new();
    let mut ge_degree = Vec::new();
    let mut ge_weight = Vec::new();
    for (deg, w) in &blocks {
        let support: Vec<usize> = (0..n).filter(|&i| spec.grading[i] == *deg && te_weights[i] == *w).collect();
        let mut a = SparseMatrix::new(n, support.len());
        for (col, &k) in support.iter().enumerate() {
            let v = spec.bracket(&spec.e, &spec.basis_vec(k));
            for (row, x) in v.iter().enumerate() {
                a.push(row, col, x.clone());
            }
        }
        for kv in kernel_basis(&a) {
            let mut x = vec![Q::zero(); n];
            for (col, &k) in support.iter().enumerate() {
                x[k] = kv[col].clone();
            }
            ge.push(x);
            ge_degree.push(*deg);
            ge_weight.push(w.clone());
        }
    }
    let c = spec.grading_element()?;
    Ok(GradingTables { n_basis, d, p_basis, k_basis, t_weights, te_weights, r_basis, s, z, chi, beta, ge, ge_degree, ge_weight, c })
}

/// Symplectic Gram-Schmidt on k for `<x|y> = (e|[y,x])`.
fn symplectic_basis(spec: &AlgebraSpec, k_basis: &[usize]) -> Result<Vec<Vec<Q>>, LieError> {
    let mut rest: Vec<Vec<Q>> = k_basis.iter().map(|&i| spec.basis_vec(i)).collect();
    let mut us = Vec::new();
    let mut vs = Vec::new();
    while !rest.is_empty() {
        let u = rest.remove(0);
        let Some(p) = rest.iter().position(|w| !GradingTables::omega(spec, &u, w).is_zero()) else {
            return Err(LieError::Singular("symplectic basis"));
        };
        let w = rest.remove(p);
        let c = GradingTables::omega(spec, &u, &w).recip();
        let v: Vec<Q> = w.iter().map(|x| x * &c).collect();
        for w in rest.iter_mut() {
            let a = GradingTables::omega(spec, w, &v);
            let b = GradingTables::omega(spec, w, &u);
            add_scaled(w, &(-a), &u);
            add_scaled(w, &b, &v);
        }
        us.push(u);
        vs.push(v);
    }
    us.extend(vs);
    Ok(us)
}

/// JSON schema for user-supplied algebras; rationals as "p/q" strings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AlgebraJson {
    pub dim: usize,
    pub labels: Vec<String>,
    pub bracket: Vec<(usize, usize, usize, String)>,
    pub form: Vec<Vec<String>>,
    pub e: Vec<String>,
    #[serde(default)]
    pub h: Option<Vec<String>>,
    #[serde(default)]
    pub f: Option<Vec<String>>,
    #[serde(default)]
    pub grading: Option<Vec<i32>>,
    pub t: Vec<Vec<String>>,
    #[serde(default)]
    pub name: Option<String>,
}

fn parse_vec(v: &[String]) -> Result<Vec<Q>, LieError> {
    v.iter().map(|s| parse_q(s).map_err(LieError::Invalid)).collect()
}

impl AlgebraJson {
    pub fn build(&self) -> Result<AlgebraSpec, LieError> {
        let n = self.dim;
        if self.labels.len() != n || self.form.len() != n || self.e.len() != n {
            return Err(LieError::Invalid("dimension mismatch".into()));
        }
        let mut brackets = vec![vec![Vec::new(); n]; n];
        for (i, j, k, c) in &self.bracket {
            if *i >= n || *j >= n || *k >= n {
                return Err(LieError::Invalid("bracket index out of range".into()));
            }
            let c = parse_q(c).map_err(LieError::Invalid)?;
            let entry: &mut Vec<(usize, Q)> = &mut brackets[*i][*j];
            entry.push((*k, c));
        }
        let form = self.form.iter().map(|r| parse_vec(r)).collect::<Result<Mat, _>>()?;
        let e = parse_vec(&self.e)?;
        let t = self.t.iter().map(|r| parse_vec(r)).collect::<Result<Vec<_>, _>>()?;
        let mut spec = AlgebraSpec {
            name: self.name.clone().unwrap_or_else(|| "custom".into()),
            labels: self.labels.clone(),
            brackets,
            form,
            e: e.clone(),
            h: vec![Q::zero(); n],
            f: vec![Q::zero(); n],
            grading: vec![0; n],
            t,
            te: Vec::new(),
            natural: None,
        };
        let (h, f) = match (&self.h, &self.f) {
            (Some(h), Some(f)) => (parse_vec(h)?, parse_vec(f)?),
            _ => complete_sl2_triple(&spec, &e)?,
        };
        spec.h = h;
        spec.f = f;
        spec.grading = match &self.grading {
            Some(g) => g.clone(),
            None => dynkin_grading(&spec)?,
        };
        spec.te = compute_te(&spec);
        let bad = spec.validate();
        if !bad.is_empty() {
            return Err(LieError::Invalid(bad.join("; ")));
        }
        Ok(spec)
    }
}

impl AlgebraSpec {
    pub fn to_json(&self) -> AlgebraJson {
        let f = |v: &[Q]| v.iter().map(crate::ratlin::fmt_q).collect::<Vec<_>>();
        let mut bracket = Vec::new();
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                for (k, c) in &self.brackets[i][j] {
                    bracket.push((i, j, *k, crate::ratlin::fmt_q(c)));
                }
            }
        }
        AlgebraJson {
            dim: self.dim(),
            labels: self.labels.clone(),
            bracket,
            form: self.form.iter().map(|r| f(r)).collect(),
            e: f(&self.e),
            h: Some(f(&self.h)),
            f: Some(f(&self.f)),
            grading: Some(self.grading.clone()),
            t: self.t.iter().map(|r| f(r)).collect(),
            name: Some(self.name.clone()),
        }
    }

    /// The zero t^e-weight subalgebra with the induced data, and the index map into g.
    pub fn zero_weight_subalgebra(&self) -> Result<(AlgebraSpec, Vec<usize>), LieError> {
        let w = self.te_weights()?;
        let idx: Vec<usize> = (0..self.dim()).filter(|&i| is_zero_vec(&w[i])).collect();
        let mut pos = vec![usize::MAX; self.dim()];
        for (a, &i) in idx.iter().enumerate() {
            pos[i] = a;
        }
        let restrict = |v: &[Q]| -> Result<Vec<Q>, LieError> {
            for (i, c) in v.iter().enumerate() {
                if !c.is_zero() && pos[i] == usize::MAX {
                    return Err(LieError::Invalid("vector leaves the zero weight space".into()));
                }
            }
            Ok(idx.iter().map(|&i| v[i].clone()).collect())
        };
        let mut brackets = vec![vec![Vec::new(); idx.len()]; idx.len()];
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                let mut out = Vec::new();
                for (k, c) in &self.brackets[i][j] {
                    if pos[*k] == usize::MAX {
                        return Err(LieError::Invalid("zero weight space is not closed".into()));
                    }
                    out.push((pos[*k], c.clone()));
                }
                brackets[a][b] = out;
            }
        }
        let sub = AlgebraSpec {
            name: format!("{}/g0", self.name),
            labels: idx.iter().map(|&i| self.labels[i].clone()).collect(),
            brackets,
            form: idx.iter().map(|&i| idx.iter().map(|&j| self.form[i][j].clone()).collect()).collect(),
            e: restrict(&self.e)?,
            h: restrict(&self.h)?,
            f: restrict(&self.f)?,
            grading: idx.iter().map(|&i| self.grading[i]).collect(),
            t: self.t.iter().map(|v| restrict(v)).collect::<Result<_, _>>()?,
            te: self.te.iter().map(|v| restrict(v)).collect::<Result<_, _>>()?,
            natural: self.natural.as_ref().map(|m| idx.iter().map(|&i| m[i].clone()).collect()),
        };
        Ok((sub, idx))
    }
}

/// A finite-dimensional representation given by matrices of the basis of g,
/// in a basis of t-weight vectors.
#[derive(Clone, Debug)]
pub struct Rep {
    pub name: String,
    pub dim: usize,
    pub mats: Vec<Mat>,
}

impl Rep {
    pub fn natural(spec: &AlgebraSpec) -> Option<Rep> {
        let mats = spec.natural.clone()?;
        Some(Rep { name: "natural".into(), dim: mats[0].len(), mats })
    }

    pub fn adjoint(spec: &AlgebraSpec) -> Rep {
        let mats = (0..spec.dim()).map(|i| spec.ad(&spec.basis_vec(i))).collect();
        Rep { name: "adjoint".into(), dim: spec.dim(), mats }
    }

    /// The trivial one-dimensional representation.
    pub fn trivial(spec: &AlgebraSpec) -> Rep {
        Rep { name: "trivial".into(), dim: 1, mats: vec![vec![vec![Q::zero()]]; spec.dim()] }
    }

    pub fn of(&self, x: &[Q]) -> Mat {
        let mut m = vec![vec![Q::zero(); self.dim]; self.dim];
        for (c, a) in x.iter().zip(&self.mats) {
            if c.is_zero() {
                continue;
            }
            for i in 0..self.dim {
                for j in 0..self.dim {
                    if !a[i][j].is_zero() {
                        m[i][j] += c * &a[i][j];
                    }
                }
            }
        }
        m
    }

    /// Checks the homomorphism property and diagonality of the torus.
    pub fn validate(&self, spec: &AlgebraSpec) -> Vec<String> {
        let mut bad = Vec::new();
        let n = spec.dim();
        if self.mats.len() != n {
            bad.push("wrong number of matrices".into());
            return bad;
        }
        'hom: for i in 0..n {
            for j in 0..n {
                let lhs = self.of(&spec.bracket(&spec.basis_vec(i), &spec.basis_vec(j)));
                if lhs != mat_commutator(&self.mats[i], &self.mats[j]) {
                    bad.push(format!("not a representation at ({},{})", spec.labels[i], spec.labels[j]));
                    break 'hom;
                }
            }
        }
        for t in &spec.t {
            let m = self.of(t);
            if (0..self.dim).any(|i| (0..self.dim).any(|j| i != j && !m[i][j].is_zero())) {
                bad.push("basis is not a t-weight basis".into());
                break;
            }
        }
        bad
    }

    /// t-weight of each basis vector, as values on the t basis.
    pub fn weights(&self, spec: &AlgebraSpec) -> Vec<Vec<Q>> {
        (0..self.dim).map(|k| spec.t.iter().map(|t| self.of(t)[k][k].clone()).collect()).collect()
    }

    /// Eigenvalue of the grading element on each basis vector.
    pub fn grading_values(&self, c: &[Q]) -> Vec<Q> {
        let m = self.of(c);
        (0..self.dim).map(|k| m[k][k].clone()).collect()
    }
}

/// Parses a builder shorthand such as `sl3:[2,1]` or `gl2:[2]`.
pub fn parse_builder(s: &str) -> Option<(Kind, usize, Vec<usize>)> {
    let (head, part) = s.split_once(':')?;
    let kind = if let Some(r) = head.strip_prefix("sl") {
        (Kind::Sl, r)
    } else if let Some(r) = head.strip_prefix("gl") {
        (Kind::Gl, r)
    } else {
        return None;
    };
    let n: usize = kind.1.parse().ok()?;
    let part = part.trim().strip_prefix('[')?.strip_suffix(']')?;
    let parts: Option<Vec<usize>> = part.split(',').map(|x| x.trim().parse().ok()).collect();
    Some((kind.0, n, parts?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratlin::qr;

    fn vec_of(spec: &AlgebraSpec, terms: &[(&str, i64)]) -> Vec<Q> {
        let mut v = vec![Q::zero(); spec.dim()];
        for (l, c) in terms {
            v[spec.index_of(l).unwrap()] += q(*c);
        }
        v
    }

    #[test]
    fn sl2_triple_and_grading() {
        let s = build_gl_sl(Kind::Sl, 2, &[2]).unwrap();
        assert_eq!(s.labels, vec!["e12", "h1", "e21"]);
        assert_eq!(s.e, vec_of(&s, &[("e12", 1)]));
        assert_eq!(s.h, vec_of(&s, &[("h1", 1)]));
        assert_eq!(s.f, vec_of(&s, &[("e21", 1)]));
        assert_eq!(s.grading, vec![2, 0, -2]);
        assert!(s.validate().is_empty());
        assert!(validate_good_grading(&s).is_empty());
        assert!(s.te.is_empty());
    }

    #[test]
    fn sl3_regular() {
        let s = build_gl_sl(Kind::Sl, 3, &[3]).unwrap();
        assert_eq!(s.e, vec_of(&s, &[("e12", 1), ("e23", 1)]));
        // diag(2,0,-2) = 2 h1 + 2 h2
        assert_eq!(s.h, vec_of(&s, &[("h1", 2), ("h2", 2)]));
        assert!(s.validate().is_empty());
    }

    #[test]
    fn sl3_minimal() {
        let s = build_gl_sl(Kind::Sl, 3, &[2, 1]).unwrap();
        assert_eq!(s.e, vec_of(&s, &[("e13", 1)]));
        assert_eq!(s.h, vec_of(&s, &[("h1", 1), ("h2", 1)]));
        assert_eq!(s.f, vec_of(&s, &[("e31", 1)]));
        assert_eq!(centralizer(&s, &s.e).len(), 4);
        assert!(validate_good_grading(&s).is_empty());
        let k = s.grading.iter().filter(|&&d| d == -1).count();
        assert_eq!(k, 2);
        assert_eq!(s.te, vec![vec_of(&s, &[("h1", 1), ("h2", -1)])]);
    }

    #[test]
    fn triple_completion() {
        let s = build_gl_sl(Kind::Sl, 2, &[2]).unwrap();
        let (h, f) = complete_sl2_triple(&s, &s.e).unwrap();
        assert_eq!((h, f), (s.h.clone(), s.f.clone()));
        let s3 = build_gl_sl(Kind::Sl, 3, &[2, 1]).unwrap();
        let (h, f) = complete_sl2_triple(&s3, &s3.e).unwrap();
        assert_eq!(s3.bracket(&h, &s3.e), s3.e.iter().map(|x| x * q(2)).collect::<Vec<_>>());
        assert_eq!(s3.bracket(&s3.e, &f), h);
        assert_eq!(complete_sl2_triple(&s3, &vec![Q::zero(); 8]), Err(LieError::ZeroNilpotent));
        assert_eq!(complete_sl2_triple(&s3, &s3.h), Err(LieError::NotNilpotent));
    }

    #[test]
    fn bad_grading_is_reported() {
        let mut s = build_gl_sl(Kind::Sl, 2, &[2]).unwrap();
        s.grading = vec![0, 0, 0];
        assert!(validate_good_grading(&s).contains(&"e ∈ g(2)".to_string()));
    }

    #[test]
    fn centralizer_examples() {
        let s = build_gl_sl(Kind::Sl, 2, &[2]).unwrap();
        assert_eq!(centralizer(&s, &s.e), vec![s.e.clone()]);
        assert_eq!(centralizer(&s, &vec![Q::zero(); 3]).len(), 3);
        let s3 = build_gl_sl(Kind::Sl, 3, &[2, 1]).unwrap();
        let c = centralizer(&s3, &s3.e);
        let span = Rref::from_rows(8, &c.iter().map(|v| to_sparse(v)).collect::<Vec<_>>());
        for l in ["e12", "e23", "e13"] {
            assert!(span.reduce(&to_sparse(&s3.basis_vec(s3.index_of(l).unwrap()))).is_empty());
        }
    }

    #[test]
    fn sl2_tables() {
        let s = build_gl_sl(Kind::Sl, 2, &[2]).unwrap();
        let t = grading_tables(&s).unwrap();
        assert_eq!(t.s, 0);
        assert_eq!(t.r_basis, vec![vec_of(&s, &[])
            .into_iter()
            .enumerate()
            .map(|(i, _)| if i == 1 { qr(-1, 2) } else { Q::zero() })
            .collect::<Vec<_>>()]);
        // β(h) = -2
        assert_eq!(s.pair(&t.beta, &vec![Q::zero(); 3]), Q::zero());
        assert_eq!(t.beta[1], q(-2));
    }

    #[test]
    fn sl3_minimal_tables() {
        let s = build_gl_sl(Kind::Sl, 3, &[2, 1]).unwrap();
        let t = grading_tables(&s).unwrap();
        assert_eq!(t.s, 1);
        assert_eq!(t.z[0], vec_of(&s, &[("e21", 1)]));
        assert_eq!(t.z[1], vec_of(&s, &[("e32", 1)]));
        assert_eq!(GradingTables::omega(&s, &t.z[0], &t.z[1]), q(1));
        for (i, x) in t.r_basis.iter().enumerate() {
            for (j, &bj) in t.n_basis.iter().enumerate() {
                let v = s.pair(x, &s.bracket(&s.basis_vec(bj), &s.e));
                assert_eq!(v, if i == j { q(1) } else { q(0) });
            }
        }
        assert_eq!(t.n_basis.len() + t.p_basis.len(), 8);
        assert_eq!(t.ge.len(), 4);
        let e23 = vec_of(&s, &[("e23", 1)]);
        let e13 = vec_of(&s, &[("e13", 1)]);
        let e12 = vec_of(&s, &[("e12", 1)]);
        assert_eq!(t.ge[0], e23);
        assert_eq!(t.ge_degree[1], 0);
        assert_eq!(t.ge[2], e13);
        assert_eq!(t.ge[3], e12);
    }

    #[test]
    fn reps_validate() {
        let s = build_gl_sl(Kind::Sl, 3, &[2, 1]).unwrap();
        assert!(Rep::natural(&s).unwrap().validate(&s).is_empty());
        assert!(Rep::adjoint(&s).validate(&s).is_empty());
        let mut bad = Rep::natural(&s).unwrap();
        bad.mats[0][0][0] = q(1);
        assert!(!bad.validate(&s).is_empty());
    }
}
