//! Translation by finite-dimensional g-modules: lift matrices over U(p~) and
//! the translated action `u -> u_V` as a matrix over U(g,e).

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::liedata::{AlgebraSpec, Rep};
use crate::pbw::{Mono, Origin, PbwAlgebra, PbwElement};
use crate::ratlin::{fmt_q, identity, kernel_basis, mat_mul, parse_q, solve, zeros, Mat, SparseMatrix, Q};
use crate::walg::{ThetaCoords, ThetaMono, WAlgebra, WalgError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransError {
    #[error("invalid representation: {0}")]
    BadRep(String),
    #[error("lift system for column {0} has no solution")]
    Unsolvable(usize),
    #[error("lift system for column {0} has a {1}-dimensional kernel")]
    NotUnique(usize, usize),
    #[error("element is not in U(g,e)")]
    NotInvariant,
    #[error(transparent)]
    Walg(#[from] WalgError),
}

/// A representation in a basis ordered by non-increasing grading eigenvalue.
#[derive(Clone, Debug)]
pub struct RepSpec {
    pub rep: Rep,
    /// `perm[i]` is the input index of the i-th basis vector.
    pub perm: Vec<usize>,
    /// Eigenvalues of the grading element.
    pub c: Vec<Q>,
    /// Weights on the t^e basis.
    pub alpha: Vec<Vec<Q>>,
    /// t-weights.
    pub t_weights: Vec<Vec<Q>>,
}

/// Matrix over U(p~) (or U(g,e)) acting on `M ⊗ V`.
pub type ElemMatrix = Vec<Vec<PbwElement>>;

/// A translated action with entries in U(g,e).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionMatrix {
    pub entries: ElemMatrix,
    pub coords: Vec<Vec<ThetaCoords>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RepJson {
    pub dim: usize,
    #[serde(default)]
    pub basis_weights: Option<Vec<Vec<serde_json::Value>>>,
    pub matrices: BTreeMap<String, Vec<Vec<serde_json::Value>>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct ThetaTermJson {
    pub theta: Vec<u32>,
    pub coef: String,
}

fn json_q(v: &serde_json::Value) -> Result<Q, String> {
    match v {
        serde_json::Value::Number(n) => parse_q(&n.to_string()),
        serde_json::Value::String(s) => parse_q(s),
        _ => Err(format!("expected a rational, got {v}")),
    }
}

fn kaz_bound(c: &Q) -> i32 {
    c.floor().to_integer().try_into().unwrap_or(i32::MAX)
}

impl RepJson {
    /// Builds the representation, with matrices keyed by basis labels of g.
    pub fn to_rep(&self, spec: &AlgebraSpec, name: &str) -> Result<Rep, TransError> {
        let mut mats = vec![zeros(self.dim, self.dim); spec.dim()];
        for (label, m) in &self.matrices {
            let i = spec.index_of(label).ok_or_else(|| TransError::BadRep(format!("unknown basis label {label}")))?;
            if m.len() != self.dim || m.iter().any(|r| r.len() != self.dim) {
                return Err(TransError::BadRep(format!("matrix {label} is not {0}x{0}", self.dim)));
            }
            mats[i] = m
                .iter()
                .map(|r| r.iter().map(json_q).collect::<Result<Vec<_>, _>>())
                .collect::<Result<_, _>>()
                .map_err(TransError::BadRep)?;
        }
        let rep = Rep { name: name.into(), dim: self.dim, mats };
        if let Some(bw) = &self.basis_weights {
            let w = rep.weights(spec);
            let given: Vec<Vec<Q>> = bw
                .iter()
                .map(|r| r.iter().map(json_q).collect::<Result<Vec<_>, _>>())
                .collect::<Result<_, _>>()
                .map_err(TransError::BadRep)?;
            if given != w {
                return Err(TransError::BadRep("basis_weights disagree with the torus matrices".into()));
            }
        }
        Ok(rep)
    }

    pub fn from_rep(spec: &AlgebraSpec, rep: &Rep) -> RepJson {
        let val = |x: &Q| serde_json::Value::String(fmt_q(x));
        RepJson {
            dim: rep.dim,
            basis_weights: Some(rep.weights(spec).iter().map(|r| r.iter().map(val).collect()).collect()),
            matrices: spec
                .labels
                .iter()
                .zip(&rep.mats)
                .map(|(l, m)| (l.clone(), m.iter().map(|r| r.iter().map(val).collect()).collect()))
                .collect(),
        }
    }
}

/// Validates a representation and reorders its basis by grading eigenvalue
/// (descending), then t-weight (lexicographically descending), then input order.
pub fn load_rep(spec: &AlgebraSpec, rep: &Rep, grading: &[Q]) -> Result<RepSpec, TransError> {
    if rep.mats.iter().any(|m| m.len() != rep.dim || m.iter().any(|r| r.len() != rep.dim)) {
        return Err(TransError::BadRep("matrices must be square of the stated dimension".into()));
    }
    let bad = rep.validate(spec);
    if !bad.is_empty() {
        return Err(TransError::BadRep(bad.join("; ")));
    }
    let c = rep.grading_values(grading);
    let tw = rep.weights(spec);
    let mut perm: Vec<usize> = (0..rep.dim).collect();
    perm.sort_by(|&a, &b| c[b].cmp(&c[a]).then_with(|| tw[b].cmp(&tw[a])).then(a.cmp(&b)));
    let mats = rep.mats.iter().map(|m| perm.iter().map(|&a| perm.iter().map(|&b| m[a][b].clone()).collect()).collect()).collect();
    let rep = Rep { name: rep.name.clone(), dim: rep.dim, mats };
    let alpha = (0..rep.dim).map(|i| spec.te.iter().map(|t| rep.of(t)[i][i].clone()).collect()).collect();
    Ok(RepSpec {
        c: perm.iter().map(|&a| c[a].clone()).collect(),
        t_weights: perm.iter().map(|&a| tw[a].clone()).collect(),
        perm,
        alpha,
        rep,
    })
}

impl RepSpec {
    pub fn dim(&self) -> usize {
        self.rep.dim
    }

    /// Kazhdan bound `c_j - c_i` for entry `(i, j)`.
    pub fn bound(&self, i: usize, j: usize) -> i32 {
        kaz_bound(&(&self.c[j] - &self.c[i]))
    }

    /// Tensor product `self ⊗ other`, basis `v_i ⊗ v'_k` at index `i * n' + k` before sorting.
    pub fn tensor(&self, other: &RepSpec, spec: &AlgebraSpec, grading: &[Q]) -> Result<RepSpec, TransError> {
        let (n, m) = (self.dim(), other.dim());
        let mats = self
            .rep
            .mats
            .iter()
            .zip(&other.rep.mats)
            .map(|(a, b)| {
                let mut t = zeros(n * m, n * m);
                for i in 0..n {
                    for k in 0..m {
                        for j in 0..n {
                            if !a[i][j].is_zero() {
                                t[i * m + k][j * m + k] += &a[i][j];
                            }
                        }
                        for l in 0..m {
                            if !b[k][l].is_zero() {
                                t[i * m + k][i * m + l] += &b[k][l];
                            }
                        }
                    }
                }
                t
            })
            .collect();
        let rep = Rep { name: format!("{}⊗{}", self.rep.name, other.rep.name), dim: n * m, mats };
        load_rep(spec, &rep, grading)
    }
}

/// Loads a representation against the grading of the W-algebra.
pub fn load_for(w: &WAlgebra, rep: &Rep) -> Result<RepSpec, TransError> {
    load_rep(w.spec(), rep, &w.alg.tables.c)
}

/// Matrix of an element of U(g) on V; other generators are rejected.
pub fn coefficient_matrix(alg: &PbwAlgebra, rs: &RepSpec, u: &PbwElement) -> Result<Mat, TransError> {
    let n = rs.dim();
    let mut out = zeros(n, n);
    for (m, c) in &u.terms {
        let mut cur = identity(n);
        for (g, &e) in m.iter().enumerate() {
            let Origin::G(i) = alg.gens[g].origin else {
                if e > 0 {
                    return Err(TransError::BadRep(format!("generator {} is not in g", alg.gens[g].label)));
                }
                continue;
            };
            for _ in 0..e {
                cur = mat_mul(&cur, &rs.rep.mats[i]);
            }
        }
        for i in 0..n {
            for j in 0..n {
                out[i][j] += c * &cur[i][j];
            }
        }
    }
    Ok(out)
}

fn elem_of(monos: &[Mono], v: &[Q]) -> PbwElement {
    let mut e = PbwElement::zero();
    for (m, c) in monos.iter().zip(v) {
        e.add_term(m.clone(), c.clone());
    }
    e
}

/// Residual `Pr([x - x^ne, x_ij]) + Σ_k b_ik(x) x_kj` of the lift equation for the n-basis index `b`.
fn lift_residual(w: &WAlgebra, rs: &RepSpec, x: &ElemMatrix, b: usize, i: usize, j: usize) -> PbwElement {
    let t = &w.alg.tables;
    let rho = &rs.rep.mats[t.n_basis[b]];
    let mut r = w.dot_all(&x[i][j]).swap_remove(b);
    for k in 0..rs.dim() {
        if !rho[i][k].is_zero() {
            r.axpy(&rho[i][k], &x[k][j]);
        }
    }
    r
}

/// The canonical lift matrix x⁰: block unitriangular, satisfying the lift
/// equation, with `χ(x⁰_ij) = δ_ij`. Fails unless the solution is unique.
pub fn solve_lift_canonical(w: &WAlgebra, rs: &RepSpec) -> Result<ElemMatrix, TransError> {
    let n = rs.dim();
    let mut x: ElemMatrix = (0..n).map(|i| (0..n).map(|j| if i == j { w.alg.one() } else { PbwElement::zero() }).collect()).collect();
    for j in 0..n {
        let lower: Vec<usize> = (0..n).filter(|&i| rs.c[i] < rs.c[j]).collect();
        if lower.is_empty() {
            continue;
        }
        let blocks: Vec<Vec<Mono>> = lower.iter().map(|&i| w.alg.monomials(&w.ptilde, rs.bound(i, j), u32::MAX)).collect();
        let mut offset = Vec::new();
        let mut ncols = 0;
        for b in &blocks {
            offset.push(ncols);
            ncols += b.len();
        }
        let pos: HashMap<usize, usize> = lower.iter().enumerate().map(|(k, &i)| (i, k)).collect();
        // Rows: lift equations keyed by (n-index, row, monomial), then χ-normalization.
        let mut rows: HashMap<(usize, usize, Mono), usize> = HashMap::new();
        let mut chi_rows: HashMap<(usize, ThetaMono), usize> = HashMap::new();
        let mut entries: Vec<(usize, usize, Q)> = Vec::new();
        let mut rhs: BTreeMap<usize, Q> = BTreeMap::new();
        let row_of = |rows: &mut HashMap<(usize, usize, Mono), usize>, key: (usize, usize, Mono)| {
            let next = rows.len();
            *rows.entry(key).or_insert(next)
        };
        let nb = w.alg.tables.r();
        for (k, &i) in lower.iter().enumerate() {
            for (col, m) in blocks[k].iter().enumerate() {
                let col = offset[k] + col;
                let dots = w.dot_all(&PbwElement::from_mono(m.clone(), Q::one()));
                for (b, d) in dots.iter().enumerate() {
                    for (rm, c) in &d.terms {
                        let r = row_of(&mut rows, (b, i, rm.clone()));
                        entries.push((r, col, c.clone()));
                    }
                }
                // Σ_k b_{i'k}(x) x_kj with k = i, for every row i'.
                for b in 0..nb {
                    let rho = &rs.rep.mats[w.alg.tables.n_basis[b]];
                    for (ip, row) in rho.iter().enumerate() {
                        if !row[i].is_zero() {
                            let r = row_of(&mut rows, (b, ip, m.clone()));
                            entries.push((r, col, row[i].clone()));
                        }
                    }
                }
            }
        }
        let one = vec![0u16; w.alg.ngens()];
        for b in 0..nb {
            let rho = &rs.rep.mats[w.alg.tables.n_basis[b]];
            for (ip, row) in rho.iter().enumerate() {
                if !row[j].is_zero() {
                    let r = row_of(&mut rows, (b, ip, one.clone()));
                    *rhs.entry(r).or_insert_with(Q::zero) -= &row[j];
                }
            }
        }
        let neq = rows.len();
        for (k, &i) in lower.iter().enumerate() {
            for (col, m) in blocks[k].iter().enumerate() {
                let chi = w.chi_free_coords(&PbwElement::from_mono(m.clone(), Q::one()))?;
                for (tm, c) in chi {
                    let next = neq + chi_rows.len();
                    let r = *chi_rows.entry((i, tm)).or_insert(next);
                    entries.push((r, offset[k] + col, c));
                }
            }
        }
        let mut a = SparseMatrix::new(neq + chi_rows.len(), ncols);
        for (r, c, v) in entries {
            a.push(r, c, v);
        }
        let mut bvec = vec![Q::zero(); neq + chi_rows.len()];
        for (r, v) in rhs {
            bvec[r] = v;
        }
        let sol = solve(&a, &bvec).map_err(|_| TransError::Unsolvable(j))?;
        let ker = kernel_basis(&a).len();
        if ker > 0 {
            return Err(TransError::NotUnique(j, ker));
        }
        for &i in &lower {
            let k = pos[&i];
            x[i][j] = elem_of(&blocks[k], &sol[offset[k]..offset[k] + blocks[k].len()]);
        }
    }
    Ok(x)
}

/// Checks block unitriangularity, the Kazhdan bounds and the lift equation.
pub fn verify_lift(w: &WAlgebra, rs: &RepSpec, x: &ElemMatrix) -> bool {
    let n = rs.dim();
    if x.len() != n || x.iter().any(|r| r.len() != n) {
        return false;
    }
    for i in 0..n {
        for j in 0..n {
            let e = &x[i][j];
            if rs.c[i] >= rs.c[j] {
                let want = if i == j { w.alg.one() } else { PbwElement::zero() };
                if *e != want {
                    return false;
                }
                continue;
            }
            let in_ptilde = e.terms.keys().all(|m| m.iter().enumerate().all(|(g, &a)| a == 0 || w.alg.is_ptilde_gen(g as u16)));
            if !in_ptilde || w.alg.kazhdan(e).is_some_and(|k| k > rs.bound(i, j)) {
                return false;
            }
        }
    }
    (0..w.alg.tables.r()).all(|b| (0..n).all(|i| (0..n).all(|j| lift_residual(w, rs, x, b, i, j).is_zero())))
}

/// Inverse of a unitriangular matrix (identity plus nilpotent part).
pub fn unitriangular_inverse(alg: &PbwAlgebra, x: &ElemMatrix) -> ElemMatrix {
    let n = x.len();
    let id: ElemMatrix = (0..n).map(|i| (0..n).map(|j| if i == j { alg.one() } else { PbwElement::zero() }).collect()).collect();
    let nil: ElemMatrix = (0..n).map(|i| (0..n).map(|j| if i == j { x[i][j].sub(&alg.one()) } else { x[i][j].neg() }).collect()).collect();
    // (1 + N)^{-1} = Σ (-N)^k with -N stored in `nil`.
    let mut out = id.clone();
    let mut pw = id;
    for _ in 0..n {
        pw = alg.mat_mul(&pw, &nil);
        for i in 0..n {
            for j in 0..n {
                out[i][j].axpy(&Q::one(), &pw[i][j]);
            }
        }
    }
    out
}

/// Action of `u ∈ U(g,e)` on `M ⊛ V`: `u_ij = χ(Σ_k u*_ik x⁰_kj)`.
pub fn translation_action(w: &WAlgebra, rs: &RepSpec, x0: &ElemMatrix, u: &PbwElement) -> Result<ActionMatrix, TransError> {
    if !w.is_invariant(u) {
        return Err(TransError::NotInvariant);
    }
    action_unchecked(w, rs, x0, u)
}

/// As [`translation_action`] without the invariance check, for elements known to lie in U(g,e).
pub fn action_unchecked(w: &WAlgebra, rs: &RepSpec, x0: &ElemMatrix, u: &PbwElement) -> Result<ActionMatrix, TransError> {
    let n = rs.dim();
    let ustar = w.alg.act_matrix(u, &rs.rep);
    let prod = w.alg.mat_mul(&ustar, x0);
    let mut coords = vec![vec![ThetaCoords::new(); n]; n];
    let mut entries = vec![vec![PbwElement::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            let c = w.chi_free_coords(&w.alg.pr(&prod[i][j]))?;
            entries[i][j] = w.from_coords(&c);
            coords[i][j] = c;
        }
    }
    Ok(ActionMatrix { entries, coords })
}

/// Cross-check path: `(x⁰)^{-1} u* x⁰`, expressed in Θ-coordinates.
pub fn action_via_inverse(w: &WAlgebra, rs: &RepSpec, x0: &ElemMatrix, u: &PbwElement) -> Result<ActionMatrix, TransError> {
    let y = unitriangular_inverse(&w.alg, x0);
    let ustar = w.alg.act_matrix(u, &rs.rep);
    let m = w.alg.mat_mul(&y, &w.alg.mat_mul(&ustar, x0));
    let coords = m
        .iter()
        .map(|r| r.iter().map(|e| w.express_in_theta(&w.alg.pr(e))).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    let entries = coords.iter().map(|r| r.iter().map(|c| w.from_coords(c)).collect()).collect();
    Ok(ActionMatrix { entries, coords })
}

/// Outcome of a multiplicativity check.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct HomReport {
    pub checked: usize,
    pub first_failure: Option<(usize, usize)>,
}

impl HomReport {
    pub fn passed(&self) -> bool {
        self.first_failure.is_none()
    }
}

/// Checks `(uu')_V = u_V u'_V` for the given pairs of sample indices.
pub fn check_homomorphism(
    w: &WAlgebra,
    rs: &RepSpec,
    x0: &ElemMatrix,
    sample: &[PbwElement],
    pairs: &[(usize, usize)],
) -> Result<HomReport, TransError> {
    let acts: Vec<ActionMatrix> = sample.iter().map(|u| action_unchecked(w, rs, x0, u)).collect::<Result<_, _>>()?;
    let mut rep = HomReport::default();
    for &(a, b) in pairs {
        let prod = w.alg.mul(&sample[a], &sample[b]);
        let lhs = action_unchecked(w, rs, x0, &prod)?;
        let rhs = w.alg.mat_mul(&acts[a].entries, &acts[b].entries);
        rep.checked += 1;
        if lhs.entries != rhs {
            rep.first_failure = Some((a, b));
            break;
        }
    }
    Ok(rep)
}

/// Ordered pairs of Θ-generators with Kazhdan degree sum at most `max`.
pub fn theta_pairs(w: &WAlgebra, max: i32) -> Vec<(usize, usize)> {
    let k = w.ngen();
    (0..k).flat_map(|a| (0..k).map(move |b| (a, b))).filter(|&(a, b)| w.theta_kazhdan(a) + w.theta_kazhdan(b) <= max).collect()
}

/// `[θ(t), x⁰_ij] = (α_j - α_i)(t) x⁰_ij` for every t in the t^e basis.
pub fn equivariance_check(w: &WAlgebra, rs: &RepSpec, x: &ElemMatrix) -> Result<bool, TransError> {
    let spec = w.spec();
    for (k, t) in spec.te.iter().enumerate() {
        let th = w.theta_embed(t)?;
        for i in 0..rs.dim() {
            for j in 0..rs.dim() {
                let lhs = w.alg.commutator(&th, &x[i][j]);
                let rhs = x[i][j].scaled(&(&rs.alpha[j][k] - &rs.alpha[i][k]));
                if lhs != rhs {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Leading loop-degree terms of `u_V` for each Θ-generator: entry `(i,j)` has
/// loop degree at most `k + c_j - c_i` (k the degree of the generator), and
/// the part in that degree is `δ_ij θ(x) + ρ(x)_ij`.
pub fn loop_character_check(w: &WAlgebra, rs: &RepSpec, x0: &ElemMatrix) -> Result<bool, TransError> {
    let n = rs.dim();
    for g in 0..w.ngen() {
        let act = action_unchecked(w, rs, x0, &w.theta[g])?;
        let top = w.theta_embed(&w.ge[g])?;
        let rho = rs.rep.of(&w.ge[g]);
        for i in 0..n {
            for j in 0..n {
                let bound = w.ge_degree[g] + rs.bound(i, j);
                let e = &act.entries[i][j];
                if w.alg.loop_degree(e).is_some_and(|l| l > bound) {
                    return Ok(false);
                }
                let mut want = if i == j { top.clone() } else { PbwElement::zero() };
                if !rho[i][j].is_zero() {
                    if bound != 0 {
                        return Ok(false);
                    }
                    want.axpy(&Q::one(), &w.alg.scalar(rho[i][j].clone()));
                }
                if e.filter(|m| w.alg.mono_loop(m) == bound) != want {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Entry `(i,j)` of `u_V` has weight `α_j - α_i + wt(u)`.
pub fn action_weight_check(w: &WAlgebra, rs: &RepSpec, weight: &[Q], act: &ActionMatrix) -> bool {
    let n = rs.dim();
    (0..n).all(|i| {
        (0..n).all(|j| {
            let want: Vec<Q> = (0..weight.len()).map(|k| &rs.alpha[j][k] - &rs.alpha[i][k] + &weight[k]).collect();
            act.coords[i][j].keys().all(|b| w.theta_mono_weight(b) == want)
        })
    })
}

/// Θ-monomials of Kazhdan degree at most `max`.
pub fn theta_monomials(w: &WAlgebra, max: i32) -> Vec<ThetaMono> {
    fn go(w: &WAlgebra, pos: usize, left: i32, cur: &mut ThetaMono, out: &mut Vec<ThetaMono>) {
        if pos == w.ngen() {
            out.push(cur.clone());
            return;
        }
        let k = w.theta_kazhdan(pos);
        let mut a = 0;
        while a as i32 * k <= left {
            cur[pos] = a;
            go(w, pos + 1, left - a as i32 * k, cur, out);
            a += 1;
        }
        cur[pos] = 0;
    }
    let mut out = Vec::new();
    if max >= 0 {
        go(w, 0, max, &mut vec![0; w.ngen()], &mut out);
    }
    out
}

/// Factor `x = x⁰ w⁰` of a lift matrix: returns `w⁰ = (x⁰)^{-1} x` after
/// checking its entries are invariants within the Kazhdan bounds and that it
/// is block unitriangular with scalar diagonal blocks.
pub fn lift_factor(w: &WAlgebra, rs: &RepSpec, x0: &ElemMatrix, x: &ElemMatrix) -> Result<Option<ElemMatrix>, TransError> {
    let f = w.alg.mat_mul(&unitriangular_inverse(&w.alg, x0), x);
    let n = rs.dim();
    for i in 0..n {
        for j in 0..n {
            let e = &f[i][j];
            let ok = match rs.c[i].cmp(&rs.c[j]) {
                Ordering::Greater => e.is_zero(),
                Ordering::Equal => w.alg.kazhdan(e).is_none_or(|k| k == 0),
                Ordering::Less => w.alg.kazhdan(e).is_none_or(|k| k <= rs.bound(i, j)) && w.is_invariant(e),
            };
            if !ok {
                return Ok(None);
            }
        }
    }
    Ok(Some(f))
}

/// Solves for a block unitriangular `A` over U(g,e) with `A·P(u) = Q(u)·A`
/// for every sample `u`, given the two actions on the same c-ordered basis.
pub fn intertwiner(
    w: &WAlgebra,
    c: &[Q],
    left: &[ElemMatrix],
    right: &[ElemMatrix],
) -> Result<Option<ElemMatrix>, TransError> {
    let n = c.len();
    let mut unknowns: Vec<(usize, usize, ThetaMono)> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if c[i] < c[j] {
                let k = kaz_bound(&(&c[j] - &c[i]));
                for b in theta_monomials(w, k) {
                    unknowns.push((i, j, b));
                }
            }
        }
    }
    let basis: Vec<PbwElement> = unknowns.iter().map(|(_, _, b)| w.theta_monomial(b)).collect();
    let mut rows: HashMap<(usize, usize, usize, Mono), usize> = HashMap::new();
    let mut entries: Vec<(usize, usize, Q)> = Vec::new();
    let mut rhs: BTreeMap<usize, Q> = BTreeMap::new();
    let mut row = |key: (usize, usize, usize, Mono)| {
        let next = rows.len();
        *rows.entry(key).or_insert(next)
    };
    for (s, (p, qm)) in left.iter().zip(right).enumerate() {
        // Constant part with A = 1: P - Q.
        for i in 0..n {
            for j in 0..n {
                for (m, v) in &p[i][j].sub(&qm[i][j]).terms {
                    *rhs.entry(row((s, i, j, m.clone()))).or_insert_with(Q::zero) -= v;
                }
            }
        }
        for (col, (ui, uj, _)) in unknowns.iter().enumerate() {
            let e = &basis[col];
            // E_{ui,uj} e · P contributes to row ui.
            for l in 0..n {
                if !p[*uj][l].is_zero() {
                    for (m, v) in &w.alg.mul(e, &p[*uj][l]).terms {
                        entries.push((row((s, *ui, l, m.clone())), col, v.clone()));
                    }
                }
            }
            // -Q · E_{ui,uj} e contributes to column uj.
            for k in 0..n {
                if !qm[k][*ui].is_zero() {
                    for (m, v) in &w.alg.mul(&qm[k][*ui], e).terms {
                        entries.push((row((s, k, *uj, m.clone())), col, -v.clone()));
                    }
                }
            }
        }
    }
    let nrows = rows.len();
    let mut a = SparseMatrix::new(nrows, unknowns.len());
    for (r, c, v) in entries {
        a.push(r, c, v);
    }
    let mut b = vec![Q::zero(); nrows];
    for (r, v) in rhs {
        b[r] = v;
    }
    let Ok(sol) = solve(&a, &b) else {
        return Ok(None);
    };
    let mut out: ElemMatrix = (0..n).map(|i| (0..n).map(|j| if i == j { w.alg.one() } else { PbwElement::zero() }).collect()).collect();
    for (col, (i, j, _)) in unknowns.iter().enumerate() {
        out[*i][*j].axpy(&sol[col], &basis[col]);
    }
    Ok(Some(out))
}

/// Result of comparing `(M ⊛ V) ⊛ V'` with `M ⊛ (V ⊗ V')`.
#[derive(Clone, Debug)]
pub struct AssocReport {
    pub intertwiner: Option<ElemMatrix>,
    /// Whether the intertwiner found is the identity.
    pub identity: bool,
}

/// The iterated action (V' first, then V entrywise) against the direct action of `V ⊗ V'`.
pub fn associativity_check(w: &WAlgebra, v: &RepSpec, v2: &RepSpec) -> Result<AssocReport, TransError> {
    let x = solve_lift_canonical(w, v)?;
    let x2 = solve_lift_canonical(w, v2)?;
    let vt = v.tensor(v2, w.spec(), &w.alg.tables.c)?;
    let xt = solve_lift_canonical(w, &vt)?;
    let (n, m) = (v.dim(), v2.dim());
    let mut iter = Vec::new();
    let mut direct = Vec::new();
    for u in &w.theta {
        let outer = action_unchecked(w, v2, &x2, u)?;
        let mut big = vec![vec![PbwElement::zero(); n * m]; n * m];
        for k in 0..m {
            for l in 0..m {
                if outer.entries[k][l].is_zero() {
                    continue;
                }
                let inner = action_unchecked(w, v, &x, &outer.entries[k][l])?;
                for i in 0..n {
                    for j in 0..n {
                        big[i * m + k][j * m + l] = inner.entries[i][j].clone();
                    }
                }
            }
        }
        let p = &vt.perm;
        iter.push(p.iter().map(|&a| p.iter().map(|&b| big[a][b].clone()).collect()).collect::<ElemMatrix>());
        direct.push(action_unchecked(w, &vt, &xt, u)?.entries);
    }
    let a = intertwiner(w, &vt.c, &iter, &direct)?;
    let identity = a.as_ref().is_some_and(|a| {
        (0..n * m).all(|i| (0..n * m).all(|j| a[i][j] == if i == j { w.alg.one() } else { PbwElement::zero() }))
    });
    Ok(AssocReport { intertwiner: a, identity })
}

/// A finite-dimensional U(p~)-module given by matrices of the p~ generators.
#[derive(Clone, Debug)]
pub struct PtildeModule {
    pub dim: usize,
    pub mats: BTreeMap<u16, Mat>,
}

impl PtildeModule {
    /// One-dimensional module where p acts by a character and k^ne by 0.
    pub fn character(w: &WAlgebra, values: &[Q]) -> PtildeModule {
        let mut mats = BTreeMap::new();
        for &g in &w.ptilde {
            let v = match w.alg.gens[g as usize].origin {
                Origin::G(i) => values[i].clone(),
                _ => Q::zero(),
            };
            mats.insert(g, vec![vec![v]]);
        }
        PtildeModule { dim: 1, mats }
    }

    /// Restriction of a g-representation to p, with k^ne acting by 0.
    pub fn restrict(w: &WAlgebra, rep: &Rep) -> PtildeModule {
        let mut mats = BTreeMap::new();
        for &g in &w.ptilde {
            let m = match w.alg.gens[g as usize].origin {
                Origin::G(i) => rep.mats[i].clone(),
                _ => zeros(rep.dim, rep.dim),
            };
            mats.insert(g, m);
        }
        PtildeModule { dim: rep.dim, mats }
    }

    /// Checks the defining relations `[a, b] = bracket(a, b)` on generators.
    pub fn validate(&self, alg: &PbwAlgebra) -> bool {
        let gens: Vec<u16> = self.mats.keys().copied().collect();
        gens.iter().all(|&a| {
            gens.iter().all(|&b| {
                let (ma, mb) = (&self.mats[&a], &self.mats[&b]);
                let lhs = crate::ratlin::mat_commutator(ma, mb);
                self.of(&alg.bracket_elem(a, b)).is_some_and(|r| r == lhs)
            })
        })
    }

    /// Matrix of an element of U(p~); `None` if it involves other generators.
    pub fn of(&self, u: &PbwElement) -> Option<Mat> {
        let mut out = zeros(self.dim, self.dim);
        for (m, c) in &u.terms {
            let mut cur = identity(self.dim);
            for (g, &e) in m.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let a = self.mats.get(&(g as u16))?;
                for _ in 0..e {
                    cur = mat_mul(&cur, a);
                }
            }
            for i in 0..self.dim {
                for j in 0..self.dim {
                    out[i][j] += c * &cur[i][j];
                }
            }
        }
        Some(out)
    }

    fn block(&self, m: &ElemMatrix) -> Option<Mat> {
        let (n, d) = (m.len(), self.dim);
        let mut out = zeros(n * d, n * d);
        for i in 0..n {
            for j in 0..n {
                let b = self.of(&m[i][j])?;
                for a in 0..d {
                    for c in 0..d {
                        out[i * d + a][j * d + c] = b[a][c].clone();
                    }
                }
            }
        }
        Some(out)
    }
}

/// On `M ⊗ V` the map `m ⊗ v_j -> Σ_i x_ij m ⊗ v_i` intertwines the translated
/// action with the Δ~-action, and `x⁰` and its inverse act as mutual inverses.
pub fn tensor_identity_check(w: &WAlgebra, rs: &RepSpec, x0: &ElemMatrix, module: &PtildeModule) -> Result<bool, TransError> {
    if !module.validate(&w.alg) {
        return Err(TransError::BadRep("module relations fail".into()));
    }
    let y = unitriangular_inverse(&w.alg, x0);
    let (Some(xm), Some(ym)) = (module.block(x0), module.block(&y)) else {
        return Ok(false);
    };
    if mat_mul(&xm, &ym) != identity(xm.len()) {
        return Ok(false);
    }
    for u in &w.theta {
        let d = module.block(&w.alg.act_matrix(u, &rs.rep));
        let a = module.block(&action_unchecked(w, rs, x0, u)?.entries);
        let (Some(d), Some(a)) = (d, a) else {
            return Ok(false);
        };
        if mat_mul(&d, &xm) != mat_mul(&xm, &a) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// JSON form of an action matrix in Θ-coordinates.
pub fn action_json(act: &ActionMatrix) -> Vec<Vec<Vec<ThetaTermJson>>> {
    act.coords
        .iter()
        .map(|r| r.iter().map(|c| c.iter().map(|(b, v)| ThetaTermJson { theta: b.clone(), coef: fmt_q(v) }).collect()).collect())
        .collect()
}
