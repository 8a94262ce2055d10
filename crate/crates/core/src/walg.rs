//! The finite W-algebra as twisted n-invariants in U(p~): the θ embedding,
//! the lifted generators Θ, PBW coordinates, the projection from Q~ onto
//! U(g,e), restricted weights and the projection to U(g0,e).

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, RwLock};

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::liedata::{grading_tables, lex_sign, AlgebraSpec, LieError};
use crate::pbw::{Character, Flavor, MonoJson, Mono, Origin, PbwAlgebra, PbwElement};
use crate::ratlin::{kernel_basis, solve, to_sparse, Rref, SparseMatrix, SparseRow, Q};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WalgError {
    #[error("Kazhdan degree {0} exceeds the working bound {1}")]
    DegreeOverflow(i32, i32),
    #[error("vector is not in g^e")]
    NotCentralizer,
    #[error("element is not a twisted invariant")]
    NotInvariant,
    #[error("element is not of restricted weight zero")]
    NonzeroWeight,
    #[error("internal consistency failure: {0}")]
    Internal(String),
    #[error(transparent)]
    Lie(#[from] LieError),
}

/// Exponent vector over the ordered g^e basis.
pub type ThetaMono = Vec<u32>;

/// Coordinates in the ordered Θ-monomial basis.
pub type ThetaCoords = BTreeMap<ThetaMono, Q>;

/// Polynomial in S(g^e), keyed by exponent vectors over the g^e basis.
type SymPoly = BTreeMap<Vec<u32>, Q>;

/// Decomposition data for one (Kazhdan degree, weight) block of S(p~).
struct Decomp {
    monos: HashMap<Mono, usize>,
    pairs: Vec<(Vec<u32>, ThetaMono)>,
    rref: Rref,
}

/// U(g,e) with its Θ-generators and caches.
pub struct WAlgebra {
    pub alg: Arc<PbwAlgebra>,
    pub max_degree: i32,
    pub ge: Vec<Vec<Q>>,
    pub ge_degree: Vec<i32>,
    pub ge_weight: Vec<Vec<Q>>,
    pub theta: Vec<PbwElement>,
    /// Generators of p~ in PBW order.
    pub ptilde: Vec<u16>,
    /// g^e-coordinates of each generator under the projection along
    /// `[f, g(>=2)] ⊕ k^ne`; empty for generators outside p.
    zeta: Vec<Vec<Q>>,
    /// Basis of the complement r: `x_i^ne` for `d_i = 1`, `x_i` otherwise.
    pub r_elems: Vec<PbwElement>,
    r_kazhdan: Vec<i32>,
    r_weight: Vec<Vec<Q>>,
    dot_cache: RwLock<HashMap<(usize, Mono), PbwElement>>,
    theta_pows: RwLock<HashMap<ThetaMono, PbwElement>>,
    r_pows: RwLock<HashMap<Vec<u32>, PbwElement>>,
    decomps: RwLock<HashMap<(i32, Vec<Q>), Arc<Decomp>>>,
    pi_memo: RwLock<HashMap<Mono, PbwElement>>,
}

impl std::fmt::Debug for WAlgebra {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WAlgebra").field("generators", &self.theta.len()).field("max_degree", &self.max_degree).finish()
    }
}

/// Serialized Θ-generators for caching.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WBasisJson {
    pub algebra: String,
    pub max_degree: i32,
    pub theta: Vec<Vec<MonoJson>>,
}

fn add_weights(a: &[Q], b: &[Q]) -> Vec<Q> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn sym_mul(a: &SymPoly, b: &SymPoly) -> SymPoly {
    let mut out = SymPoly::new();
    for (ma, ca) in a {
        for (mb, cb) in b {
            let m: Vec<u32> = ma.iter().zip(mb).map(|(x, y)| x + y).collect();
            let e = out.entry(m.clone()).or_insert_with(Q::zero);
            *e += ca * cb;
            if e.is_zero() {
                out.remove(&m);
            }
        }
    }
    out
}

/// Commutative product of monomials with coefficients, over the generators of an algebra.
fn comm_mul(a: &BTreeMap<Mono, Q>, b: &BTreeMap<Mono, Q>) -> BTreeMap<Mono, Q> {
    let mut out = BTreeMap::new();
    for (ma, ca) in a {
        for (mb, cb) in b {
            let m: Mono = ma.iter().zip(mb).map(|(x, y)| x + y).collect();
            let e = out.entry(m.clone()).or_insert_with(Q::zero);
            *e += ca * cb;
            if e.is_zero() {
                out.remove(&m);
            }
        }
    }
    out
}

/// All exponent vectors `a` with `Σ a_i w_i = total` (all `w_i > 0`).
fn exponent_vectors(weights: &[i32], total: i32) -> Vec<Vec<u32>> {
    fn go(w: &[i32], pos: usize, left: i32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if pos == w.len() {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let mut a = 0;
        while a as i32 * w[pos] <= left {
            cur[pos] = a;
            go(w, pos + 1, left - a as i32 * w[pos], cur, out);
            a += 1;
        }
        cur[pos] = 0;
    }
    let mut out = Vec::new();
    let mut cur = vec![0; weights.len()];
    go(weights, 0, total, &mut cur, &mut out);
    out
}

impl WAlgebra {
    /// Builds U(g,e) for a spec, solving for all Θ-generators.
    pub fn build(spec: AlgebraSpec, max_degree: i32) -> Result<WAlgebra, WalgError> {
        let tables = grading_tables(&spec)?;
        let alg = Arc::new(PbwAlgebra::new(Arc::new(spec), Arc::new(tables), Flavor::Tilde));
        let mut w = Self::skeleton(alg, max_degree)?;
        for i in 0..w.ge.len() {
            let t = w.lift_theta(i)?;
            w.theta.push(t);
        }
        Ok(w)
    }

    /// Restores U(g,e) from cached Θ-generators, re-checking invariance.
    pub fn from_cached(spec: AlgebraSpec, cached: &WBasisJson) -> Result<WAlgebra, WalgError> {
        let tables = grading_tables(&spec)?;
        let alg = Arc::new(PbwAlgebra::new(Arc::new(spec), Arc::new(tables), Flavor::Tilde));
        let mut w = Self::skeleton(alg, cached.max_degree)?;
        for t in &cached.theta {
            let u = PbwElement::from_json(t).map_err(WalgError::Internal)?;
            if !w.is_invariant(&u) {
                return Err(WalgError::NotInvariant);
            }
            w.theta.push(u);
        }
        if w.theta.len() != w.ge.len() {
            return Err(WalgError::Internal("cached generator count mismatch".into()));
        }
        Ok(w)
    }

    pub fn to_json(&self) -> WBasisJson {
        WBasisJson {
            algebra: self.alg.spec.name.clone(),
            max_degree: self.max_degree,
            theta: self.theta.iter().map(|t| t.to_json()).collect(),
        }
    }

    fn skeleton(alg: Arc<PbwAlgebra>, max_degree: i32) -> Result<WAlgebra, WalgError> {
        let spec = alg.spec.clone();
        let tables = alg.tables.clone();
        let ptilde: Vec<u16> = (0..alg.ngens() as u16).filter(|&g| alg.is_ptilde_gen(g)).collect();
        let n = spec.dim();
        let mut zeta = vec![Vec::new(); alg.ngens()];
        for &g in &ptilde {
            if let Origin::G(i) = alg.gens[g as usize].origin {
                let j = spec.grading[i];
                let ge_idx: Vec<usize> = (0..tables.ge.len()).filter(|&k| tables.ge_degree[k] == j).collect();
                let up: Vec<usize> = (0..n).filter(|&k| spec.grading[k] == j + 2).collect();
                let mut a = SparseMatrix::new(n, ge_idx.len() + up.len());
                for (col, &k) in ge_idx.iter().enumerate() {
                    for (row, x) in tables.ge[k].iter().enumerate() {
                        a.push(row, col, x.clone());
                    }
                }
                for (col, &k) in up.iter().enumerate() {
                    let v = spec.bracket(&spec.f, &spec.basis_vec(k));
                    for (row, x) in v.iter().enumerate() {
                        a.push(row, ge_idx.len() + col, x.clone());
                    }
                }
                let sol = solve(&a, &spec.basis_vec(i)).map_err(|_| WalgError::Internal("p = g^e ⊕ [f,g(>=2)] fails".into()))?;
                let mut coords = vec![Q::zero(); tables.ge.len()];
                for (col, &k) in ge_idx.iter().enumerate() {
                    coords[k] = sol[col].clone();
                }
                zeta[g as usize] = coords;
            }
        }
        let mut r_elems = Vec::new();
        let mut r_kazhdan = Vec::new();
        let mut r_weight = Vec::new();
        for (i, x) in tables.r_basis.iter().enumerate() {
            let (e, k) = if tables.d[i] == 1 { (alg.ne_of(x), 1) } else { (alg.from_g(x), tables.d[i]) };
            let wt = alg.mono_weight(e.terms.keys().next().expect("nonzero r-basis vector"));
            r_elems.push(e);
            r_kazhdan.push(k);
            r_weight.push(wt);
        }
        Ok(WAlgebra {
            ge: tables.ge.clone(),
            ge_degree: tables.ge_degree.clone(),
            ge_weight: tables.ge_weight.clone(),
            alg,
            max_degree,
            theta: Vec::new(),
            ptilde,
            zeta,
            r_elems,
            r_kazhdan,
            r_weight,
            dot_cache: RwLock::new(HashMap::new()),
            theta_pows: RwLock::new(HashMap::new()),
            r_pows: RwLock::new(HashMap::new()),
            decomps: RwLock::new(HashMap::new()),
            pi_memo: RwLock::new(HashMap::new()),
        })
    }

    pub fn spec(&self) -> &AlgebraSpec {
        &self.alg.spec
    }

    pub fn ngen(&self) -> usize {
        self.ge.len()
    }

    pub fn theta_kazhdan(&self, i: usize) -> i32 {
        self.ge_degree[i] + 2
    }

    /// Restricted sign class of the i-th generator.
    pub fn sign_class(&self, i: usize) -> Ordering {
        lex_sign(&self.ge_weight[i])
    }

    fn in_ge(&self, x: &[Q]) -> bool {
        crate::liedata::is_zero_vec(&self.spec().bracket(&self.spec().e, x))
    }

    /// `θ(x) = x + 1/2 Σ [x, z_i^*]^ne z_i^ne` on g^e(0), and `x` on other degrees.
    pub fn theta_embed(&self, x: &[Q]) -> Result<PbwElement, WalgError> {
        if !self.in_ge(x) {
            return Err(WalgError::NotCentralizer);
        }
        let spec = self.spec();
        let a = &self.alg;
        let mut out = a.from_g(x);
        if spec.degree_of(x) == Some(0) {
            let t = &a.tables;
            let half = Q::new(1.into(), 2.into());
            for i in 0..t.z.len() {
                let left = a.ne_of(&spec.bracket(x, &t.z_star(i)));
                let right = a.ne_of(&t.z[i]);
                out.axpy(&half, &a.mul(&left, &right));
            }
        }
        Ok(out)
    }

    /// `dot(b_i, m)` for the i-th n basis vector, cached per monomial.
    fn dot_mono(&self, i: usize, m: &Mono) -> PbwElement {
        let key = (i, m.clone());
        if let Some(v) = self.dot_cache.read().unwrap().get(&key) {
            return v.clone();
        }
        let b = self.spec().basis_vec(self.alg.tables.n_basis[i]);
        let v = self.alg.dot(&b, &PbwElement::from_mono(m.clone(), Q::one()));
        self.dot_cache.write().unwrap().insert(key, v.clone());
        v
    }

    pub fn dot_all(&self, u: &PbwElement) -> Vec<PbwElement> {
        (0..self.alg.tables.r())
            .map(|i| {
                let mut out = PbwElement::zero();
                for (m, c) in &u.terms {
                    out.axpy(c, &self.dot_mono(i, m));
                }
                out
            })
            .collect()
    }

    /// Whether `u ∈ U(p~)` is killed by the twisted action of every `b_i`.
    pub fn is_invariant(&self, u: &PbwElement) -> bool {
        u.terms.keys().all(|m| m.iter().enumerate().all(|(g, &a)| a == 0 || self.alg.is_ptilde_gen(g as u16)))
            && self.dot_all(u).iter().all(PbwElement::is_zero)
    }

    /// Invariance for the right twisted action.
    pub fn is_invariant_right(&self, u: &PbwElement) -> bool {
        self.alg.tables.n_basis.iter().all(|&b| self.alg.dot_right(&self.spec().basis_vec(b), u).is_zero())
    }

    /// Monomials of U(p~) with Kazhdan degree at most `k` and the given weight.
    pub fn ansatz(&self, k: i32, weight: &[Q]) -> Vec<Mono> {
        self.alg.monomials(&self.ptilde, k, u32::MAX).into_iter().filter(|m| self.alg.mono_weight(m) == weight).collect()
    }

    /// Basis of the invariants spanned by the given monomials.
    pub fn invariants_in(&self, monos: &[Mono]) -> Vec<Vec<Q>> {
        let mut rows: HashMap<(usize, Mono), usize> = HashMap::new();
        let mut entries = Vec::new();
        for (col, m) in monos.iter().enumerate() {
            for i in 0..self.alg.tables.r() {
                for (rm, c) in &self.dot_mono(i, m).terms {
                    let next = rows.len();
                    let row = *rows.entry((i, rm.clone())).or_insert(next);
                    entries.push((row, col, c.clone()));
                }
            }
        }
        let mut a = SparseMatrix::new(rows.len(), monos.len());
        for (r, c, v) in entries {
            a.push(r, c, v);
        }
        kernel_basis(&a)
    }

    fn elem_of(monos: &[Mono], v: &[Q]) -> PbwElement {
        let mut e = PbwElement::zero();
        for (m, c) in monos.iter().zip(v) {
            e.add_term(m.clone(), c.clone());
        }
        e
    }

    /// ζ of a commutative monomial in p~ generators.
    fn zeta_mono(&self, m: &Mono) -> SymPoly {
        let t = self.ge.len();
        let mut acc = SymPoly::new();
        acc.insert(vec![0; t], Q::one());
        for (g, &a) in m.iter().enumerate() {
            if a == 0 {
                continue;
            }
            if self.zeta[g].is_empty() {
                return SymPoly::new();
            }
            let mut lin = SymPoly::new();
            for (k, c) in self.zeta[g].iter().enumerate() {
                if !c.is_zero() {
                    let mut e = vec![0; t];
                    e[k] = 1;
                    lin.insert(e, c.clone());
                }
            }
            for _ in 0..a {
                acc = sym_mul(&acc, &lin);
            }
        }
        acc
    }

    /// ζ applied to the Kazhdan-degree-`k` part of `u`.
    pub fn zeta_top(&self, u: &PbwElement, k: i32) -> BTreeMap<Vec<u32>, Q> {
        let mut out = SymPoly::new();
        for (m, c) in &u.terms {
            if self.alg.mono_kazhdan(m) != k {
                continue;
            }
            for (s, v) in self.zeta_mono(m) {
                let e = out.entry(s.clone()).or_insert_with(Q::zero);
                *e += c * v;
                if e.is_zero() {
                    out.remove(&s);
                }
            }
        }
        out
    }

    /// Solves for Θ of the i-th g^e basis vector.
    pub fn lift_theta(&self, i: usize) -> Result<PbwElement, WalgError> {
        let n = self.ge_degree[i];
        if n == 0 {
            return self.theta_embed(&self.ge[i]);
        }
        let k = n + 2;
        let monos = self.ansatz(k, &self.ge_weight[i]);
        let kern = self.invariants_in(&monos);
        let images: Vec<SymPoly> = kern.iter().map(|v| self.zeta_top(&Self::elem_of(&monos, v), k)).collect();
        let mut keys: Vec<Vec<u32>> = images.iter().flat_map(|p| p.keys().cloned()).collect();
        let mut target = vec![0u32; self.ge.len()];
        target[i] = 1;
        keys.push(target.clone());
        keys.sort();
        keys.dedup();
        let mut a = SparseMatrix::new(keys.len(), kern.len());
        for (col, p) in images.iter().enumerate() {
            for (m, c) in p {
                a.push(keys.binary_search(m).unwrap(), col, c.clone());
            }
        }
        let mut b = vec![Q::zero(); keys.len()];
        b[keys.binary_search(&target).unwrap()] = Q::one();
        let lam = solve(&a, &b).map_err(|_| WalgError::Internal(format!("no invariant lifts generator {i}")))?;
        let mut sol = vec![Q::zero(); monos.len()];
        for (l, v) in lam.iter().zip(&kern) {
            for (s, x) in sol.iter_mut().zip(v) {
                *s += l * x;
            }
        }
        // Canonical representative modulo invariants of lower Kazhdan degree.
        let lower = monos.iter().take_while(|m| self.alg.mono_kazhdan(m) < k).count();
        let low_kern = self.invariants_in(&monos[..lower]);
        let rows: Vec<SparseRow> = low_kern.iter().map(|v| to_sparse(v)).collect();
        let reduced = Rref::from_rows(monos.len(), &rows).reduce(&to_sparse(&sol));
        let mut out = PbwElement::zero();
        for (col, c) in reduced {
            out.add_term(monos[col].clone(), c);
        }
        Ok(out)
    }

    /// Dimension of `F_j U(g,e)` counted from Θ-monomials, for `j = 0..=d`.
    pub fn graded_dims(&self, d: i32) -> Vec<usize> {
        let w: Vec<i32> = (0..self.ngen()).map(|i| self.theta_kazhdan(i)).collect();
        let mut per = vec![0usize; d as usize + 1];
        for k in 0..=d {
            per[k as usize] = exponent_vectors(&w, k).len();
        }
        let mut acc = 0;
        per.iter()
            .map(|c| {
                acc += c;
                acc
            })
            .collect()
    }

    /// Dimension of `F_j U(g,e)` solved from scratch as the full invariant space in `F_j U(p~)`.
    pub fn oracle_dims(&self, d: i32) -> Vec<usize> {
        let all = self.alg.monomials(&self.ptilde, d, u32::MAX);
        let mut blocks: BTreeMap<Vec<Q>, Vec<Mono>> = BTreeMap::new();
        for m in all {
            blocks.entry(self.alg.mono_weight(&m)).or_default().push(m);
        }
        (0..=d)
            .map(|j| {
                blocks
                    .values()
                    .map(|ms| {
                        let cut = ms.iter().take_while(|m| self.alg.mono_kazhdan(m) <= j).count();
                        if cut == 0 {
                            0
                        } else {
                            self.invariants_in(&ms[..cut]).len()
                        }
                    })
                    .sum()
            })
            .collect()
    }

    /// The ordered product `Θ(x_1)^{b_1} ... Θ(x_t)^{b_t}`.
    pub fn theta_monomial(&self, b: &[u32]) -> PbwElement {
        if let Some(v) = self.theta_pows.read().unwrap().get(b) {
            return v.clone();
        }
        let res = match b.iter().rposition(|&x| x > 0) {
            None => self.alg.one(),
            Some(last) => {
                let mut prev = b.to_vec();
                prev[last] -= 1;
                self.alg.mul(&self.theta_monomial(&prev), &self.theta[last])
            }
        };
        self.theta_pows.write().unwrap().insert(b.to_vec(), res.clone());
        res
    }

    fn r_monomial(&self, a: &[u32]) -> PbwElement {
        if let Some(v) = self.r_pows.read().unwrap().get(a) {
            return v.clone();
        }
        let res = match a.iter().rposition(|&x| x > 0) {
            None => self.alg.one(),
            Some(last) => {
                let mut prev = a.to_vec();
                prev[last] -= 1;
                self.alg.mul(&self.r_monomial(&prev), &self.r_elems[last])
            }
        };
        self.r_pows.write().unwrap().insert(a.to_vec(), res.clone());
        res
    }

    pub fn from_coords(&self, c: &ThetaCoords) -> PbwElement {
        let mut out = PbwElement::zero();
        for (b, v) in c {
            out.axpy(v, &self.theta_monomial(b));
        }
        out
    }

    fn top_symbol(&self, u: &PbwElement, k: i32) -> BTreeMap<Mono, Q> {
        u.terms.iter().filter(|(m, _)| self.alg.mono_kazhdan(m) == k).map(|(m, c)| (m.clone(), c.clone())).collect()
    }

    fn decomp(&self, k: i32, weight: &[Q]) -> Arc<Decomp> {
        let key = (k, weight.to_vec());
        if let Some(d) = self.decomps.read().unwrap().get(&key) {
            return d.clone();
        }
        let mut wts: Vec<i32> = self.r_kazhdan.clone();
        wts.extend((0..self.ngen()).map(|i| self.theta_kazhdan(i)));
        let nr = self.r_elems.len();
        let mut pairs = Vec::new();
        let mut symbols = Vec::new();
        for v in exponent_vectors(&wts, k) {
            let (a, b) = (v[..nr].to_vec(), v[nr..].to_vec());
            let mut wt = vec![Q::zero(); weight.len()];
            for (i, &x) in a.iter().enumerate() {
                for _ in 0..x {
                    wt = add_weights(&wt, &self.r_weight[i]);
                }
            }
            for (i, &x) in b.iter().enumerate() {
                for _ in 0..x {
                    wt = add_weights(&wt, &self.ge_weight[i]);
                }
            }
            if wt != weight {
                continue;
            }
            let mut sym: BTreeMap<Mono, Q> = BTreeMap::new();
            sym.insert(vec![0; self.alg.ngens()], Q::one());
            for (i, &x) in a.iter().enumerate() {
                for _ in 0..x {
                    sym = comm_mul(&sym, &self.r_elems[i].terms);
                }
            }
            for (i, &x) in b.iter().enumerate() {
                let top = self.top_symbol(&self.theta[i], self.theta_kazhdan(i));
                for _ in 0..x {
                    sym = comm_mul(&sym, &top);
                }
            }
            pairs.push((a, b));
            symbols.push(sym);
        }
        let mut monos: HashMap<Mono, usize> = HashMap::new();
        for s in &symbols {
            for m in s.keys() {
                let next = monos.len();
                monos.entry(m.clone()).or_insert(next);
            }
        }
        let m = monos.len();
        let rows: Vec<SparseRow> = symbols
            .iter()
            .enumerate()
            .map(|(j, s)| {
                let mut r: SparseRow = s.iter().map(|(mono, c)| (monos[mono], c.clone())).collect();
                r.insert(m + j, Q::one());
                r
            })
            .collect();
        let rref = Rref::from_rows(m + pairs.len(), &rows);
        let d = Arc::new(Decomp { monos, pairs, rref });
        self.decomps.write().unwrap().insert(key, d.clone());
        d
    }

    /// Expands `u ∈ U(p~)` in the free right U(g,e)-module basis `X^a Θ^b`;
    /// returns the coefficients keyed by `(a, b)`.
    pub fn expand(&self, u: &PbwElement) -> Result<BTreeMap<(Vec<u32>, ThetaMono), Q>, WalgError> {
        let mut rest = u.clone();
        let mut out: BTreeMap<(Vec<u32>, ThetaMono), Q> = BTreeMap::new();
        while let Some(k) = self.alg.kazhdan(&rest) {
            if k > self.max_degree {
                return Err(WalgError::DegreeOverflow(k, self.max_degree));
            }
            let top = self.top_symbol(&rest, k);
            let mut by_weight: BTreeMap<Vec<Q>, Vec<(Mono, Q)>> = BTreeMap::new();
            for (m, c) in top {
                by_weight.entry(self.alg.mono_weight(&m)).or_default().push((m, c));
            }
            for (w, terms) in by_weight {
                let d = self.decomp(k, &w);
                let m = d.monos.len();
                let mut v = SparseRow::new();
                for (mono, c) in terms {
                    let Some(&col) = d.monos.get(&mono) else {
                        return Err(WalgError::Internal("symbol outside the free basis span".into()));
                    };
                    v.insert(col, c);
                }
                let red = d.rref.reduce(&v);
                if red.keys().any(|&c| c < m) {
                    return Err(WalgError::Internal("free basis symbols do not span".into()));
                }
                for (col, c) in red {
                    let coef = -c;
                    let (a, b) = d.pairs[col - m].clone();
                    let prod = self.alg.mul(&self.r_monomial(&a), &self.theta_monomial(&b));
                    rest.axpy(&-coef.clone(), &prod);
                    let e = out.entry((a, b)).or_insert_with(Q::zero);
                    *e += coef;
                }
            }
            if self.alg.kazhdan(&rest).is_some_and(|k2| k2 >= k) {
                return Err(WalgError::Internal("leading term did not cancel".into()));
            }
        }
        out.retain(|_, c| !c.is_zero());
        Ok(out)
    }

    /// The projection Q~ -> U(g,e) sending `X^a Θ^b` to `Θ^b` if `a = 0` and to 0 otherwise.
    pub fn chi_free(&self, u: &PbwElement) -> Result<PbwElement, WalgError> {
        Ok(self.from_coords(&self.chi_free_coords(u)?))
    }

    pub fn chi_free_coords(&self, u: &PbwElement) -> Result<ThetaCoords, WalgError> {
        let mut out = ThetaCoords::new();
        for ((a, b), c) in self.expand(u)? {
            if a.iter().all(|&x| x == 0) {
                out.insert(b, c);
            }
        }
        Ok(out)
    }

    /// Coordinates of an invariant in the Θ-monomial basis.
    pub fn express_in_theta(&self, u: &PbwElement) -> Result<ThetaCoords, WalgError> {
        let mut out = ThetaCoords::new();
        for ((a, b), c) in self.expand(u)? {
            if a.iter().any(|&x| x != 0) {
                return Err(WalgError::NotInvariant);
            }
            out.insert(b, c);
        }
        Ok(out)
    }

    /// Weight of a Θ-monomial.
    pub fn theta_mono_weight(&self, b: &[u32]) -> Vec<Q> {
        let mut w = vec![Q::zero(); self.spec().te.len()];
        for (i, &x) in b.iter().enumerate() {
            for _ in 0..x {
                w = add_weights(&w, &self.ge_weight[i]);
            }
        }
        w
    }

    /// Decomposition of an element of U(g,e) into restricted weight components.
    pub fn restricted_components(&self, u: &PbwElement) -> BTreeMap<Vec<Q>, PbwElement> {
        let mut out: BTreeMap<Vec<Q>, PbwElement> = BTreeMap::new();
        for (m, c) in &u.terms {
            out.entry(self.alg.mono_weight(m)).or_default().add_term(m.clone(), c.clone());
        }
        out
    }

    /// Whether a Θ-monomial contains a positive-weight factor.
    pub fn has_positive_factor(&self, b: &[u32]) -> bool {
        b.iter().enumerate().any(|(i, &x)| x > 0 && self.sign_class(i) == Ordering::Greater)
    }

    /// Membership in the left ideal generated by positive restricted weight spaces.
    pub fn sharp_membership(&self, u: &PbwElement) -> Result<bool, WalgError> {
        Ok(self.express_in_theta(u)?.keys().all(|b| self.has_positive_factor(b)))
    }

    /// The character γ of p0: the sum of the t-weights of the n basis vectors
    /// with negative restricted weight.
    pub fn gamma(&self) -> Result<Character, WalgError> {
        let spec = self.spec();
        let t = &self.alg.tables;
        let mut w = vec![Q::zero(); spec.t.len()];
        for &b in &t.n_basis {
            if lex_sign(&t.te_weights[b]) == Ordering::Less {
                w = add_weights(&w, &t.t_weights[b]);
            }
        }
        let values = spec.torus_functional(&w)?;
        let domain: Vec<usize> =
            t.p_basis.iter().copied().filter(|&i| crate::liedata::is_zero_vec(&t.te_weights[i])).collect();
        Character::new(spec, values, domain).map_err(|e| WalgError::Internal(e.to_string()))
    }

    /// The weight shift δ of the quasi-Verma labelling, as values on the t^e basis.
    pub fn delta_shift(&self) -> Vec<Q> {
        let spec = self.spec();
        let t = &self.alg.tables;
        let mut w = vec![Q::zero(); spec.te.len()];
        for (k, &b) in t.n_basis.iter().enumerate() {
            if lex_sign(&t.te_weights[b]) == Ordering::Less {
                let c = if t.d[k] >= 2 { Q::one() } else { Q::new(1.into(), 2.into()) };
                for (x, y) in w.iter_mut().zip(&t.te_weights[b]) {
                    *x += &c * y;
                }
            }
        }
        // te_weights are eigenvalues on the t^e basis, i.e. the restriction of β_i.
        w
    }

    /// π: U(p~)_0 -> U(p0) along the left ideal generated by positive weight vectors.
    pub fn pi(&self, u: &PbwElement) -> PbwElement {
        let mut out = PbwElement::zero();
        for (m, c) in &u.terms {
            out.axpy(c, &self.pi_mono(m));
        }
        out
    }

    fn pi_mono(&self, m: &Mono) -> PbwElement {
        let pos = (0..m.len()).rev().find(|&g| m[g] > 0 && lex_sign(&self.alg.gens[g].te_weight) == Ordering::Greater);
        let Some(g) = pos else {
            return PbwElement::from_mono(m.clone(), Q::one());
        };
        if let Some(v) = self.pi_memo.read().unwrap().get(m) {
            return v.clone();
        }
        // m = A g B with B after g; A g B = A B g + A [g, B].
        let mut a = m.clone();
        let mut b = vec![0; m.len()];
        for k in g + 1..m.len() {
            b[k] = m[k];
            a[k] = 0;
        }
        a[g] -= 1;
        let res = if b.iter().all(|&x| x == 0) {
            PbwElement::zero()
        } else {
            let be = PbwElement::from_mono(b, Q::one());
            let ge = self.alg.gen(g as u16);
            let comm = self.alg.mul(&ge, &be).sub(&self.alg.mul(&be, &ge));
            self.pi(&self.alg.mul(&PbwElement::from_mono(a, Q::one()), &comm))
        };
        self.pi_memo.write().unwrap().insert(m.clone(), res.clone());
        res
    }
}

/// Helper for tests and the CLI: builds U(g,e) for a builder shorthand.
pub fn build_from_shorthand(s: &str, max_degree: i32) -> Result<WAlgebra, WalgError> {
    let (kind, n, part) =
        crate::liedata::parse_builder(s).ok_or_else(|| WalgError::Internal(format!("bad algebra shorthand {s:?}")))?;
    WAlgebra::build(crate::liedata::build_gl_sl(kind, n, &part)?, max_degree)
}

/// Renders Θ-coordinates with generator labels.
pub fn show_coords(w: &WAlgebra, c: &ThetaCoords) -> String {
    if c.is_empty() {
        return "0".into();
    }
    let names: Vec<String> = (0..w.ngen()).map(|i| format!("Θ({})", w.spec().show(&w.ge[i]))).collect();
    c.iter()
        .map(|(b, v)| {
            let mono: Vec<String> = b
                .iter()
                .enumerate()
                .filter(|(_, &x)| x > 0)
                .map(|(i, &x)| if x == 1 { names[i].clone() } else { format!("{}^{x}", names[i]) })
                .collect();
            if mono.is_empty() {
                crate::ratlin::fmt_q(v)
            } else {
                format!("{}*{}", crate::ratlin::fmt_q(v), mono.join("*"))
            }
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratlin::{q, qr};

    fn sl2() -> WAlgebra {
        build_from_shorthand("sl2:[2]", 12).unwrap()
    }

    fn sl3_min() -> WAlgebra {
        build_from_shorthand("sl3:[2,1]", 8).unwrap()
    }

    #[test]
    fn sl2_theta_e() {
        let w = sl2();
        let a = &w.alg;
        let (e, h) = (a.gen(a.g_index(0)), a.gen(a.g_index(1)));
        let expect = e.add(&a.mul(&h, &h).scaled(&qr(1, 4))).sub(&h.scaled(&qr(1, 2)));
        assert_eq!(w.theta[0], expect);
        // The right-handed counterpart is S_{-β} of it.
        let beta = Character::new(w.spec(), a.tables.beta.clone(), a.tables.p_basis.clone()).unwrap();
        let right = a.shift(&w.theta[0], &beta, -1);
        assert_eq!(a.show(&right), "e12 + 1/4*h1^2 + 1/2*h1");
        assert!(w.is_invariant_right(&right));
    }

    #[test]
    fn invariance_examples() {
        let w = sl2();
        let a = &w.alg;
        assert!(!w.is_invariant(&a.gen(a.g_index(1))));
        assert!(w.is_invariant(&a.one()));
    }

    #[test]
    fn sl2_dims() {
        let w = sl2();
        assert_eq!(w.graded_dims(12), vec![1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3, 4]);
        assert_eq!(w.oracle_dims(8), w.graded_dims(8));
    }

    #[test]
    fn sl3_minimal_generators() {
        let w = sl3_min();
        assert_eq!(w.ngen(), 4);
        for (i, t) in w.theta.iter().enumerate() {
            assert!(w.is_invariant(t), "Θ{i} not invariant");
            let d = w.alg.degrees(t);
            assert_eq!(d.kazhdan, Some(w.theta_kazhdan(i)));
            // Top loop-degree part is θ(x).
            let top = w.alg.loop_degree(t).unwrap();
            assert_eq!(top, w.ge_degree[i]);
            let gr = t.filter(|m| w.alg.mono_loop(m) == top);
            assert_eq!(gr, w.theta_embed(&w.ge[i]).unwrap());
        }
        assert_eq!(w.oracle_dims(6), w.graded_dims(6));
    }

    #[test]
    fn theta_is_lie_hom_on_degree_zero() {
        let w = sl3_min();
        let t0 = w.theta_embed(&w.ge[1]).unwrap();
        assert!(w.is_invariant(&t0));
        let c = w.alg.commutator(&t0, &t0);
        assert!(c.is_zero());
    }

    #[test]
    fn chi_free_examples() {
        let w = sl2();
        assert_eq!(w.chi_free(&w.alg.one()).unwrap(), w.alg.one());
        assert_eq!(w.chi_free(&w.theta[0]).unwrap(), w.theta[0]);
        let x1 = w.alg.from_g(&w.alg.tables.r_basis[0]);
        assert!(w.chi_free(&x1).unwrap().is_zero());
        let sq = w.alg.mul(&w.theta[0], &w.theta[0]);
        let c = w.express_in_theta(&sq).unwrap();
        assert_eq!(c, ThetaCoords::from([(vec![2], q(1))]));
        assert_eq!(w.express_in_theta(&w.alg.scalar(q(5))).unwrap(), ThetaCoords::from([(vec![0], q(5))]));
        let w3 = sl3_min();
        let z = w3.alg.ne_of(&w3.alg.tables.z[0]);
        assert!(w3.chi_free(&z).unwrap().is_zero());
    }

    #[test]
    fn sharp_and_weights() {
        let w = sl3_min();
        // e12 has restricted weight 3 on diag(1,-2,1).
        assert_eq!(w.ge_weight[3], vec![q(3)]);
        assert!(!w.sharp_membership(&w.alg.one()).unwrap());
        let p = w.alg.mul(&w.theta[0], &w.theta[3]);
        assert!(w.sharp_membership(&p).unwrap());
        let p2 = w.alg.mul(&w.theta[3], &w.theta[0]);
        assert!(!w.sharp_membership(&p2).unwrap());
    }
}
