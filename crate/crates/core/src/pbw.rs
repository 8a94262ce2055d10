//! Normal ordering in enveloping superalgebras of nonlinear Lie superalgebras
//! built from g: plain U(g), U(g~) with the neutral k^ne, and U(g^) with
//! the odd n* and n^ch. Also the projections onto U(p~) along the left and
//! right twisted ideals, comultiplication, shifts and degree bookkeeping.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, RwLock};

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::liedata::{AlgebraSpec, GradingTables, Rep};
use crate::ratlin::{fmt_q, parse_q, q, Mat, Q};

pub type Mono = Vec<u16>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Flavor {
    Plain,
    Tilde,
    Hat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Origin {
    /// A basis vector of g.
    G(usize),
    /// The neutral copy of the basis vector of k with this g-index.
    Ne(usize),
    /// The dual `f_i` of the i-th n basis vector.
    Star(usize),
    /// The copy `b_i^ch` of the i-th n basis vector.
    Ch(usize),
}

#[derive(Clone, Debug)]
pub struct Generator {
    pub origin: Origin,
    pub label: String,
    pub odd: bool,
    pub charge: i32,
    pub kazhdan: i32,
    pub loop_deg: i32,
    pub te_weight: Vec<Q>,
}

/// A bracket value in `C ⊕ a`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Bracket {
    pub scalar: Q,
    pub linear: Vec<(u16, Q)>,
}

impl Bracket {
    pub fn is_zero(&self) -> bool {
        self.scalar.is_zero() && self.linear.is_empty()
    }
}

/// Sparse combination of normal-ordered monomials.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct PbwElement {
    pub terms: BTreeMap<Mono, Q>,
}

impl PbwElement {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_mono(m: Mono, c: Q) -> Self {
        let mut e = Self::zero();
        e.add_term(m, c);
        e
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, m: Mono, c: Q) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: &Q, other: &PbwElement) {
        if c.is_zero() {
            return;
        }
        for (m, v) in &other.terms {
            self.add_term(m.clone(), c * v);
        }
    }

    pub fn scaled(&self, c: &Q) -> PbwElement {
        if c.is_zero() {
            return Self::zero();
        }
        PbwElement { terms: self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect() }
    }

    pub fn add(&self, other: &PbwElement) -> PbwElement {
        let mut r = self.clone();
        r.axpy(&Q::one(), other);
        r
    }

    pub fn sub(&self, other: &PbwElement) -> PbwElement {
        let mut r = self.clone();
        r.axpy(&-Q::one(), other);
        r
    }

    pub fn neg(&self) -> PbwElement {
        self.scaled(&-Q::one())
    }

    /// Terms whose monomial satisfies the predicate.
    pub fn filter(&self, keep: impl Fn(&Mono) -> bool) -> PbwElement {
        PbwElement { terms: self.terms.iter().filter(|(m, _)| keep(m)).map(|(m, v)| (m.clone(), v.clone())).collect() }
    }

    /// Coefficient of the empty monomial.
    pub fn constant(&self) -> Q {
        self.terms.iter().find(|(m, _)| m.iter().all(|&a| a == 0)).map(|(_, c)| c.clone()).unwrap_or_else(Q::zero)
    }

    pub fn to_json(&self) -> Vec<MonoJson> {
        self.terms.iter().map(|(m, c)| MonoJson { mono: m.clone(), coef: fmt_q(c) }).collect()
    }

    pub fn from_json(v: &[MonoJson]) -> Result<PbwElement, String> {
        let mut e = PbwElement::zero();
        for t in v {
            e.add_term(t.mono.clone(), parse_q(&t.coef)?);
        }
        Ok(e)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonoJson {
    pub mono: Vec<u16>,
    pub coef: String,
}

/// Sparse element of `A ⊗ U(g)`.
pub type Tensor = BTreeMap<(Mono, Mono), Q>;

fn tensor_add(t: &mut Tensor, k: (Mono, Mono), c: Q) {
    if c.is_zero() {
        return;
    }
    let e = t.entry(k.clone()).or_insert_with(Q::zero);
    *e += c;
    if e.is_zero() {
        t.remove(&k);
    }
}

/// A character of a subalgebra, as values on the basis of g and the set of
/// basis indices spanning its domain.
#[derive(Clone, Debug, PartialEq)]
pub struct Character {
    pub values: Vec<Q>,
    pub domain: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PbwError {
    #[error("functional does not vanish on [{0},{1}]")]
    NotCharacter(String, String),
    #[error("domain is not closed under the bracket")]
    NotSubalgebra,
}

impl Character {
    pub fn new(spec: &AlgebraSpec, values: Vec<Q>, domain: Vec<usize>) -> Result<Character, PbwError> {
        for &i in &domain {
            for &j in &domain {
                let mut val = Q::zero();
                for (k, c) in &spec.brackets[i][j] {
                    if !domain.contains(k) {
                        return Err(PbwError::NotSubalgebra);
                    }
                    val += c * &values[*k];
                }
                if !val.is_zero() {
                    return Err(PbwError::NotCharacter(spec.labels[i].clone(), spec.labels[j].clone()));
                }
            }
        }
        Ok(Character { values, domain })
    }

    pub fn eval(&self, x: &[Q]) -> Q {
        self.domain.iter().map(|&i| &x[i] * &self.values[i]).sum()
    }
}

/// Degree summary of an element.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Degrees {
    pub kazhdan: Option<i32>,
    pub loop_max: Option<i32>,
    /// `None` if inhomogeneous or zero.
    pub charge: Option<i32>,
    pub te_weight: Option<Vec<String>>,
}

type MemoMap = RwLock<HashMap<(Mono, u16), PbwElement>>;

/// Generator table, bracket table and rewriting caches for one flavor.
pub struct PbwAlgebra {
    pub spec: Arc<AlgebraSpec>,
    pub tables: Arc<GradingTables>,
    pub flavor: Flavor,
    pub gens: Vec<Generator>,
    pub brackets: Vec<Vec<Bracket>>,
    g_gen: Vec<Option<u16>>,
    ne_gen: Vec<Option<u16>>,
    star_gen: Vec<u16>,
    ch_gen: Vec<u16>,
    /// Whether a generator is a g-generator lying in n.
    is_n: Vec<bool>,
    memo: MemoMap,
    pr_memo: RwLock<HashMap<Mono, PbwElement>>,
    prr_memo: RwLock<HashMap<Mono, PbwElement>>,
}

impl fmt::Debug for PbwAlgebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PbwAlgebra").field("flavor", &self.flavor).field("gens", &self.ngens()).finish()
    }
}

impl PbwAlgebra {
    pub fn new(spec: Arc<AlgebraSpec>, tables: Arc<GradingTables>, flavor: Flavor) -> PbwAlgebra {
        let n = spec.dim();
        let mut order: Vec<Origin> = Vec::new();
        let mut pn: Vec<usize> = (0..n).filter(|&i| spec.grading[i] < 0).collect();
        pn.sort_by_key(|&i| (spec.grading[i], i));
        if flavor == Flavor::Hat {
            order.extend((0..tables.r()).map(Origin::Ch));
        }
        if flavor != Flavor::Plain {
            order.extend(tables.k_basis.iter().map(|&i| Origin::Ne(i)));
        }
        order.extend(tables.p_basis.iter().map(|&i| Origin::G(i)));
        order.extend(pn.iter().map(|&i| Origin::G(i)));
        if flavor == Flavor::Hat {
            order.extend((0..tables.r()).map(Origin::Star));
        }
        assert!(order.len() < u16::MAX as usize);

        let mut gens = Vec::new();
        let mut g_gen = vec![None; n];
        let mut ne_gen = vec![None; n];
        let mut star_gen = vec![0; tables.r()];
        let mut ch_gen = vec![0; tables.r()];
        for (idx, o) in order.iter().enumerate() {
            let idx16 = idx as u16;
            let g = match *o {
                Origin::G(i) => {
                    g_gen[i] = Some(idx16);
                    Generator {
                        origin: *o,
                        label: spec.labels[i].clone(),
                        odd: false,
                        charge: 0,
                        kazhdan: spec.grading[i] + 2,
                        loop_deg: spec.grading[i],
                        te_weight: tables.te_weights[i].clone(),
                    }
                }
                Origin::Ne(i) => {
                    ne_gen[i] = Some(idx16);
                    Generator {
                        origin: *o,
                        label: format!("{}^ne", spec.labels[i]),
                        odd: false,
                        charge: 0,
                        kazhdan: 1,
                        loop_deg: 0,
                        te_weight: tables.te_weights[i].clone(),
                    }
                }
                Origin::Star(k) => {
                    star_gen[k] = idx16;
                    let b = tables.n_basis[k];
                    Generator {
                        origin: *o,
                        label: format!("f{}", k + 1),
                        odd: true,
                        charge: 1,
                        kazhdan: tables.d[k],
                        loop_deg: tables.d[k],
                        te_weight: tables.te_weights[b].iter().map(|x| -x).collect(),
                    }
                }
                Origin::Ch(k) => {
                    ch_gen[k] = idx16;
                    let b = tables.n_basis[k];
                    Generator {
                        origin: *o,
                        label: format!("{}^ch", spec.labels[b]),
                        odd: true,
                        charge: -1,
                        kazhdan: 2 - tables.d[k],
                        loop_deg: -tables.d[k],
                        te_weight: tables.te_weights[b].clone(),
                    }
                }
            };
            gens.push(g);
        }
        let m = gens.len();
        let mut brackets = vec![vec![Bracket::default(); m]; m];
        for a in 0..m {
            for b in 0..m {
                brackets[a][b] = match (gens[a].origin, gens[b].origin) {
                    (Origin::G(i), Origin::G(j)) => Bracket {
                        scalar: Q::zero(),
                        linear: spec.brackets[i][j].iter().map(|(k, c)| (g_gen[*k].unwrap(), c.clone())).collect(),
                    },
                    (Origin::Ne(i), Origin::Ne(j)) => Bracket {
                        scalar: GradingTables::omega(&spec, &spec.basis_vec(i), &spec.basis_vec(j)),
                        linear: Vec::new(),
                    },
                    (Origin::Star(i), Origin::Ch(j)) | (Origin::Ch(j), Origin::Star(i)) if i == j => {
                        Bracket { scalar: Q::one(), linear: Vec::new() }
                    }
                    _ => Bracket::default(),
                };
            }
        }
        let is_n = gens.iter().map(|g| matches!(g.origin, Origin::G(i) if spec.grading[i] < 0)).collect();
        PbwAlgebra {
            spec,
            tables,
            flavor,
            gens,
            brackets,
            g_gen,
            ne_gen,
            star_gen,
            ch_gen,
            is_n,
            memo: RwLock::new(HashMap::new()),
            pr_memo: RwLock::new(HashMap::new()),
            prr_memo: RwLock::new(HashMap::new()),
        }
    }

    pub fn ngens(&self) -> usize {
        self.gens.len()
    }

    pub fn g_index(&self, i: usize) -> u16 {
        self.g_gen[i].expect("g-generator present in every flavor")
    }

    pub fn ne_index(&self, i: usize) -> Option<u16> {
        self.ne_gen[i]
    }

    pub fn star_index(&self, k: usize) -> u16 {
        self.star_gen[k]
    }

    pub fn ch_index(&self, k: usize) -> u16 {
        self.ch_gen[k]
    }

    pub fn is_n_gen(&self, g: u16) -> bool {
        self.is_n[g as usize]
    }

    /// Whether the generator lies in p~ (p or k^ne).
    pub fn is_ptilde_gen(&self, g: u16) -> bool {
        match self.gens[g as usize].origin {
            Origin::G(i) => self.spec.grading[i] >= 0,
            Origin::Ne(_) => true,
            _ => false,
        }
    }

    pub fn one(&self) -> PbwElement {
        PbwElement::from_mono(vec![0; self.ngens()], Q::one())
    }

    pub fn scalar(&self, c: Q) -> PbwElement {
        PbwElement::from_mono(vec![0; self.ngens()], c)
    }

    pub fn gen(&self, g: u16) -> PbwElement {
        let mut m = vec![0; self.ngens()];
        m[g as usize] = 1;
        PbwElement::from_mono(m, Q::one())
    }

    /// Embeds a vector of g as a linear combination of generators.
    pub fn from_g(&self, x: &[Q]) -> PbwElement {
        let mut e = PbwElement::zero();
        for (i, c) in x.iter().enumerate() {
            if !c.is_zero() {
                let mut m = vec![0; self.ngens()];
                m[self.g_index(i) as usize] = 1;
                e.add_term(m, c.clone());
            }
        }
        e
    }

    /// `x^ne = (x(-1))^ne`; zero in the plain and for s = 0.
    pub fn ne_of(&self, x: &[Q]) -> PbwElement {
        let mut e = PbwElement::zero();
        for (i, c) in x.iter().enumerate() {
            if let (false, Some(g)) = (c.is_zero(), self.ne_gen[i]) {
                let mut m = vec![0; self.ngens()];
                m[g as usize] = 1;
                e.add_term(m, c.clone());
            }
        }
        e
    }

    /// `x^ch = (x(<0))^ch` in coordinates of the n basis.
    pub fn ch_of(&self, x: &[Q]) -> PbwElement {
        let mut e = PbwElement::zero();
        for (k, &b) in self.tables.n_basis.iter().enumerate() {
            if !x[b].is_zero() {
                e.axpy(&x[b], &self.gen(self.ch_gen[k]));
            }
        }
        e
    }

    pub fn is_odd_mono(&self, m: &Mono) -> bool {
        m.iter().zip(&self.gens).filter(|(a, g)| **a > 0 && g.odd).count() % 2 == 1
    }

    fn last_gen(m: &Mono) -> Option<usize> {
        m.iter().rposition(|&a| a > 0)
    }

    /// Normal form of `m * g`.
    pub fn mul_mono_gen(&self, m: &Mono, g: u16) -> PbwElement {
        let gi = g as usize;
        match Self::last_gen(m) {
            None => {
                let mut r = m.clone();
                r[gi] = 1;
                PbwElement::from_mono(r, Q::one())
            }
            Some(c) if c < gi => {
                let mut r = m.clone();
                r[gi] = 1;
                PbwElement::from_mono(r, Q::one())
            }
            Some(c) if c == gi => {
                if !self.gens[gi].odd {
                    let mut r = m.clone();
                    r[gi] += 1;
                    PbwElement::from_mono(r, Q::one())
                } else {
                    let mut r = m.clone();
                    r[gi] = 0;
                    let half = self.bracket_elem(g, g).scaled(&Q::new(1.into(), 2.into()));
                    self.mul_mono_elem(&r, &half)
                }
            }
            Some(c) => {
                let key = (m.clone(), g);
                if let Some(v) = self.memo.read().unwrap().get(&key) {
                    return v.clone();
                }
                let mut a = m.clone();
                a[c] -= 1;
                let sign = if self.gens[c].odd && self.gens[gi].odd { -Q::one() } else { Q::one() };
                let first = self.mul_mono_gen(&a, g);
                let mut res = PbwElement::zero();
                for (mono, coef) in &first.terms {
                    res.axpy(&(&sign * coef), &self.mul_mono_gen(mono, c as u16));
                }
                let br = &self.brackets[c][gi];
                if !br.is_zero() {
                    if !br.scalar.is_zero() {
                        res.add_term(a.clone(), br.scalar.clone());
                    }
                    for (k, v) in &br.linear {
                        res.axpy(v, &self.mul_mono_gen(&a, *k));
                    }
                }
                self.memo.write().unwrap().insert(key, res.clone());
                res
            }
        }
    }

    /// The bracket `[a, b]` of two generators as an element.
    pub fn bracket_elem(&self, a: u16, b: u16) -> PbwElement {
        let br = &self.brackets[a as usize][b as usize];
        let mut e = self.scalar(br.scalar.clone());
        for (k, v) in &br.linear {
            e.axpy(v, &self.gen(*k));
        }
        e
    }

    fn mul_mono_elem(&self, m: &Mono, b: &PbwElement) -> PbwElement {
        self.mul(&PbwElement::from_mono(m.clone(), Q::one()), b)
    }

    pub fn mul_elem_gen(&self, a: &PbwElement, g: u16) -> PbwElement {
        let mut out = PbwElement::zero();
        for (m, c) in &a.terms {
            out.axpy(c, &self.mul_mono_gen(m, g));
        }
        out
    }

    pub fn mul(&self, a: &PbwElement, b: &PbwElement) -> PbwElement {
        let mut out = PbwElement::zero();
        for (mb, cb) in &b.terms {
            let mut cur = a.clone();
            for (g, &e) in mb.iter().enumerate() {
                for _ in 0..e {
                    cur = self.mul_elem_gen(&cur, g as u16);
                }
            }
            out.axpy(cb, &cur);
        }
        out
    }

    /// Super-commutator `ab - (-1)^{|a||b|} ba` for homogeneous parity inputs.
    pub fn commutator(&self, a: &PbwElement, b: &PbwElement) -> PbwElement {
        let mut out = PbwElement::zero();
        for (ma, ca) in &a.terms {
            for (mb, cb) in &b.terms {
                let x = PbwElement::from_mono(ma.clone(), ca * cb);
                let y = PbwElement::from_mono(mb.clone(), Q::one());
                let sign = if self.is_odd_mono(ma) && self.is_odd_mono(mb) { -Q::one() } else { Q::one() };
                out.axpy(&Q::one(), &self.mul(&x, &y));
                out.axpy(&-sign, &self.mul(&y, &x));
            }
        }
        out
    }

    pub fn pow(&self, a: &PbwElement, k: u32) -> PbwElement {
        let mut r = self.one();
        for _ in 0..k {
            r = self.mul(&r, a);
        }
        r
    }

    /// Re-normal-orders an element whose monomials are read as words in generator order.
    pub fn normalize(&self, a: &PbwElement) -> PbwElement {
        self.mul(&self.one(), a)
    }

    /// Projection of U(g~) onto U(p~) along the left ideal generated by
    /// `x - x^ne - (e|x)` for x in n.
    pub fn pr(&self, u: &PbwElement) -> PbwElement {
        let mut out = PbwElement::zero();
        for (m, c) in &u.terms {
            out.axpy(c, &self.pr_mono(m));
        }
        out
    }

    fn pr_mono(&self, m: &Mono) -> PbwElement {
        let Some(last) = Self::last_gen(m) else {
            return PbwElement::from_mono(m.clone(), Q::one());
        };
        if !self.is_n[last] {
            return PbwElement::from_mono(m.clone(), Q::one());
        }
        if let Some(v) = self.pr_memo.read().unwrap().get(m) {
            return v.clone();
        }
        let Origin::G(b) = self.gens[last].origin else { unreachable!() };
        let mut a = m.clone();
        a[last] -= 1;
        let mut r = PbwElement::from_mono(a.clone(), self.tables.chi[b].clone());
        if let Some(ne) = self.ne_gen[b] {
            r.axpy(&Q::one(), &self.mul_mono_gen(&a, ne));
        }
        let res = self.pr(&r);
        self.pr_memo.write().unwrap().insert(m.clone(), res.clone());
        res
    }

    /// Projection of U(g~) onto U(p~) along the right ideal generated by
    /// `x - x^ne - (e|x)` for x in n.
    pub fn pr_right(&self, u: &PbwElement) -> PbwElement {
        let mut out = PbwElement::zero();
        for (m, c) in &u.terms {
            out.axpy(c, &self.prr_mono(m));
        }
        out
    }

    fn prr_mono(&self, m: &Mono) -> PbwElement {
        let Some(first) = (0..m.len()).find(|&i| m[i] > 0 && self.is_n[i]) else {
            return PbwElement::from_mono(m.clone(), Q::one());
        };
        if let Some(v) = self.prr_memo.read().unwrap().get(m) {
            return v.clone();
        }
        let Origin::G(b) = self.gens[first].origin else { unreachable!() };
        // m = P * b * N with P the part before b.
        let mut p = vec![0; m.len()];
        p[..first].copy_from_slice(&m[..first]);
        let mut n = m.clone();
        for a in n[..first].iter_mut() {
            *a = 0;
        }
        n[first] -= 1;
        let mut rest = m.clone();
        rest[first] -= 1;
        let mut lead = self.scalar(self.tables.chi[b].clone());
        if let Some(ne) = self.ne_gen[b] {
            lead.axpy(&Q::one(), &self.gen(ne));
        }
        let t1 = self.mul(&lead, &PbwElement::from_mono(rest, Q::one()));
        let pe = PbwElement::from_mono(p, Q::one());
        let bg = self.gen(first as u16);
        let comm = self.mul(&bg, &pe).sub(&self.mul(&pe, &bg));
        let t2 = self.mul(&comm, &PbwElement::from_mono(n, Q::one()));
        let res = self.pr_right(&t1).sub(&self.pr_right(&t2));
        self.prr_memo.write().unwrap().insert(m.clone(), res.clone());
        res
    }

    /// `x - x^ne` for x in n.
    pub fn twisted(&self, x: &[Q]) -> PbwElement {
        self.from_g(x).sub(&self.ne_of(x))
    }

    /// The twisted action `x . u = Pr([x - x^ne, u])` of n on U(p~).
    pub fn dot(&self, x: &[Q], u: &PbwElement) -> PbwElement {
        let t = self.twisted(x);
        self.pr(&self.mul(&t, u).sub(&self.mul(u, &t)))
    }

    /// The right twisted action `Pr'([x - x^ne, u])`.
    pub fn dot_right(&self, x: &[Q], u: &PbwElement) -> PbwElement {
        let t = self.twisted(x);
        self.pr_right(&self.mul(&t, u).sub(&self.mul(u, &t)))
    }

    /// `Pr((x - x^ne - (e|x)) u)`, the action through the left ideal.
    pub fn dot_via_ideal(&self, x: &[Q], u: &PbwElement) -> PbwElement {
        let chi = self.spec.pair(&self.spec.e, x);
        let t = self.twisted(x).sub(&self.scalar(chi));
        self.pr(&self.mul(&t, u))
    }

    /// Comultiplication into `self ⊗ U(g)`: g is primitive, everything else is `y ⊗ 1`.
    pub fn comultiply(&self, u: &PbwElement, target: &PbwAlgebra) -> Tensor {
        let one_t = vec![0u16; target.ngens()];
        let mut out = Tensor::new();
        for (m, c) in &u.terms {
            let mut cur: Tensor = Tensor::new();
            cur.insert((vec![0; self.ngens()], one_t.clone()), Q::one());
            for (g, &e) in m.iter().enumerate() {
                for _ in 0..e {
                    let mut next = Tensor::new();
                    for ((a, b), v) in &cur {
                        for (ma, ca) in &self.mul_mono_gen(a, g as u16).terms {
                            tensor_add(&mut next, (ma.clone(), b.clone()), v * ca);
                        }
                        if let Origin::G(i) = self.gens[g].origin {
                            for (mb, cb) in &target.mul_mono_gen(b, target.g_index(i)).terms {
                                tensor_add(&mut next, (a.clone(), mb.clone()), v * cb);
                            }
                        }
                    }
                    cur = next;
                }
            }
            for (k, v) in cur {
                tensor_add(&mut out, k, v * c);
            }
        }
        out
    }

    /// Product in `self ⊗ U(g)` (the second leg is even, so no signs arise).
    pub fn tensor_mul(&self, target: &PbwAlgebra, x: &Tensor, y: &Tensor) -> Tensor {
        let mut out = Tensor::new();
        for ((a1, b1), c1) in x {
            for ((a2, b2), c2) in y {
                let l = self.mul(&PbwElement::from_mono(a1.clone(), Q::one()), &PbwElement::from_mono(a2.clone(), Q::one()));
                let r = target.mul(&PbwElement::from_mono(b1.clone(), Q::one()), &PbwElement::from_mono(b2.clone(), Q::one()));
                for (ml, cl) in &l.terms {
                    for (mr, cr) in &r.terms {
                        tensor_add(&mut out, (ml.clone(), mr.clone()), c1 * c2 * cl * cr);
                    }
                }
            }
        }
        out
    }

    /// `(id ⊗ ρ) Δ(u)` as a matrix with entries in this algebra.
    pub fn act_matrix(&self, u: &PbwElement, rep: &Rep) -> Vec<Vec<PbwElement>> {
        let n = rep.dim;
        let mut out = vec![vec![PbwElement::zero(); n]; n];
        for (m, c) in &u.terms {
            let mut cur: Vec<Vec<PbwElement>> =
                (0..n).map(|i| (0..n).map(|j| if i == j { self.one() } else { PbwElement::zero() }).collect()).collect();
            for (g, &e) in m.iter().enumerate() {
                for _ in 0..e {
                    let mut next: Vec<Vec<PbwElement>> =
                        cur.iter().map(|row| row.iter().map(|x| self.mul_elem_gen(x, g as u16)).collect()).collect();
                    if let Origin::G(i) = self.gens[g].origin {
                        let rg = &rep.mats[i];
                        for r in 0..n {
                            for k in 0..n {
                                if cur[r][k].is_zero() {
                                    continue;
                                }
                                for j in 0..n {
                                    if !rg[k][j].is_zero() {
                                        next[r][j].axpy(&rg[k][j], &cur[r][k]);
                                    }
                                }
                            }
                        }
                    }
                    cur = next;
                }
            }
            for i in 0..n {
                for j in 0..n {
                    out[i][j].axpy(c, &cur[i][j]);
                }
            }
        }
        out
    }

    /// The automorphism `x -> x + sign * λ(x)` on g-generators in the domain of λ.
    pub fn shift(&self, u: &PbwElement, lambda: &Character, sign: i32) -> PbwElement {
        let mut shifts: Vec<Q> = vec![Q::zero(); self.ngens()];
        for &i in &lambda.domain {
            shifts[self.g_index(i) as usize] = &lambda.values[i] * q(sign as i64);
        }
        let mut out = PbwElement::zero();
        for (m, c) in &u.terms {
            // Expand each (g + s)^a binomially; lowering exponents keeps normal order.
            let mut partial: Vec<(Mono, Q)> = vec![(m.clone(), c.clone())];
            for (g, s) in shifts.iter().enumerate() {
                if s.is_zero() || m[g] == 0 {
                    continue;
                }
                let a = m[g];
                let mut next = Vec::new();
                for (mono, coef) in &partial {
                    let mut binom = Q::one();
                    for k in (0..=a).rev() {
                        // term binom(a,k) s^{a-k} g^k
                        let mut mm = mono.clone();
                        mm[g] = k;
                        let pw = num_traits::pow(s.clone(), (a - k) as usize);
                        next.push((mm, coef * &binom * pw));
                        binom = binom * q(k as i64) / q((a - k + 1) as i64);
                    }
                }
                partial = next;
            }
            for (mm, cc) in partial {
                out.add_term(mm, cc);
            }
        }
        out
    }

    pub fn mono_kazhdan(&self, m: &Mono) -> i32 {
        m.iter().zip(&self.gens).map(|(&a, g)| a as i32 * g.kazhdan).sum()
    }

    pub fn mono_loop(&self, m: &Mono) -> i32 {
        m.iter().zip(&self.gens).map(|(&a, g)| a as i32 * g.loop_deg).sum()
    }

    pub fn mono_charge(&self, m: &Mono) -> i32 {
        m.iter().zip(&self.gens).map(|(&a, g)| a as i32 * g.charge).sum()
    }

    pub fn mono_length(m: &Mono) -> u32 {
        m.iter().map(|&a| a as u32).sum()
    }

    pub fn mono_weight(&self, m: &Mono) -> Vec<Q> {
        let mut w = vec![Q::zero(); self.spec.te.len()];
        for (&a, g) in m.iter().zip(&self.gens) {
            if a > 0 {
                for (x, y) in w.iter_mut().zip(&g.te_weight) {
                    *x += y * q(a as i64);
                }
            }
        }
        w
    }

    pub fn kazhdan(&self, u: &PbwElement) -> Option<i32> {
        u.terms.keys().map(|m| self.mono_kazhdan(m)).max()
    }

    pub fn loop_degree(&self, u: &PbwElement) -> Option<i32> {
        u.terms.keys().map(|m| self.mono_loop(m)).max()
    }

    pub fn degrees(&self, u: &PbwElement) -> Degrees {
        let homog = |vals: Vec<Vec<Q>>| -> Option<Vec<Q>> {
            let first = vals.first()?.clone();
            vals.iter().all(|v| *v == first).then_some(first)
        };
        let charges: Vec<Vec<Q>> = u.terms.keys().map(|m| vec![q(self.mono_charge(m) as i64)]).collect();
        let weights: Vec<Vec<Q>> = u.terms.keys().map(|m| self.mono_weight(m)).collect();
        Degrees {
            kazhdan: self.kazhdan(u),
            loop_max: self.loop_degree(u),
            charge: homog(charges).map(|v| v[0].to_integer().try_into().unwrap()),
            te_weight: homog(weights).map(|w| w.iter().map(fmt_q).collect()),
        }
    }

    /// All monomials in the given generators with Kazhdan degree at most `max`.
    /// Generators of nonpositive Kazhdan degree are bounded by `max_len` in total.
    pub fn monomials(&self, gens: &[u16], max: i32, max_len: u32) -> Vec<Mono> {
        let mut out = Vec::new();
        let mut cur = vec![0u16; self.ngens()];
        self.enumerate(gens, 0, max, max_len, &mut cur, &mut out);
        out.sort_by_key(|m| (self.mono_kazhdan(m), m.clone()));
        out
    }

    fn enumerate(&self, gens: &[u16], pos: usize, left: i32, len_left: u32, cur: &mut Mono, out: &mut Vec<Mono>) {
        if pos == gens.len() {
            if left >= 0 {
                out.push(cur.clone());
            }
            return;
        }
        let g = gens[pos] as usize;
        let k = self.gens[g].kazhdan;
        let cap = if self.gens[g].odd { 1 } else { u32::MAX };
        let mut a = 0u32;
        while a <= cap && a <= len_left {
            let used = k * a as i32;
            if k > 0 && used > left + self.max_negative_gain(gens, pos + 1, len_left - a) {
                break;
            }
            cur[g] = a as u16;
            self.enumerate(gens, pos + 1, left - used, len_left - a, cur, out);
            a += 1;
        }
        cur[g] = 0;
    }

    fn max_negative_gain(&self, gens: &[u16], from: usize, len: u32) -> i32 {
        let most = gens[from..].iter().map(|&g| -self.gens[g as usize].kazhdan).max().unwrap_or(0);
        most.max(0) * len as i32
    }

    pub fn show(&self, u: &PbwElement) -> String {
        if u.is_zero() {
            return "0".into();
        }
        let mut terms: Vec<(&Mono, &Q)> = u.terms.iter().collect();
        terms.sort_by_key(|(m, _)| {
            let rev: Vec<u16> = m.iter().rev().copied().collect();
            (std::cmp::Reverse(self.mono_kazhdan(m)), std::cmp::Reverse(rev))
        });
        let mut parts = Vec::new();
        for (m, c) in terms {
            let mut word = Vec::new();
            for (g, &a) in m.iter().enumerate() {
                match a {
                    0 => {}
                    1 => word.push(self.gens[g].label.clone()),
                    _ => word.push(format!("{}^{}", self.gens[g].label, a)),
                }
            }
            let w = word.join("*");
            parts.push(match (w.is_empty(), c.is_one()) {
                (true, _) => fmt_q(c),
                (false, true) => w,
                (false, false) if *c == -Q::one() => format!("-{w}"),
                _ => format!("{}*{w}", fmt_q(c)),
            });
        }
        parts.join(" + ").replace("+ -", "- ")
    }

    /// Checks super-antisymmetry and the super-Jacobi identity of the bracket table.
    pub fn validate_brackets(&self) -> Vec<String> {
        let m = self.ngens();
        let mut bad = Vec::new();
        let parity = |a: usize| self.gens[a].odd;
        for a in 0..m {
            for b in 0..m {
                let sign = if parity(a) && parity(b) { Q::one() } else { -Q::one() };
                let ab = self.bracket_elem(a as u16, b as u16);
                let ba = self.bracket_elem(b as u16, a as u16).scaled(&sign);
                if ab != ba {
                    bad.push(format!("antisymmetry at ({},{})", self.gens[a].label, self.gens[b].label));
                }
            }
        }
        // Jacobi on linear parts; the scalar part of a bracket is central.
        let lin = |a: u16, b: u16| -> Vec<(u16, Q)> { self.brackets[a as usize][b as usize].linear.clone() };
        let br_with = |v: &[(u16, Q)], c: u16, left: bool| -> PbwElement {
            let mut e = PbwElement::zero();
            for (k, x) in v {
                let b = if left { self.bracket_elem(*k, c) } else { self.bracket_elem(c, *k) };
                e.axpy(x, &b);
            }
            e
        };
        'jac: for a in 0..m as u16 {
            for b in 0..m as u16 {
                for c in 0..m as u16 {
                    // [a,[b,c]] = [[a,b],c] + (-1)^{|a||b|} [b,[a,c]]
                    let lhs = br_with(&lin(b, c), a, false);
                    let mut rhs = br_with(&lin(a, b), c, true);
                    let s = if parity(a as usize) && parity(b as usize) { -Q::one() } else { Q::one() };
                    rhs.axpy(&s, &br_with(&lin(a, c), b, false));
                    if lhs != rhs {
                        bad.push(format!(
                            "Jacobi at ({},{},{})",
                            self.gens[a as usize].label, self.gens[b as usize].label, self.gens[c as usize].label
                        ));
                        break 'jac;
                    }
                }
            }
        }
        bad
    }

    /// Re-expresses an element of another flavor built on the same data,
    /// mapping generators by origin; `None` if some generator is missing.
    pub fn transfer(&self, from: &PbwAlgebra, u: &PbwElement) -> Option<PbwElement> {
        let map: Vec<Option<u16>> = from
            .gens
            .iter()
            .map(|g| match g.origin {
                Origin::G(i) => self.g_gen[i],
                Origin::Ne(i) => self.ne_gen[i],
                Origin::Star(k) => (self.flavor == Flavor::Hat).then(|| self.star_gen[k]),
                Origin::Ch(k) => (self.flavor == Flavor::Hat).then(|| self.ch_gen[k]),
            })
            .collect();
        let mut out = PbwElement::zero();
        for (m, c) in &u.terms {
            let mut w: Vec<u16> = Vec::new();
            let mut nm = vec![0u16; self.ngens()];
            let mut monotone = true;
            let mut last: Option<u16> = None;
            for (g, &a) in m.iter().enumerate() {
                if a == 0 {
                    continue;
                }
                let t = map[g]?;
                if last.is_some_and(|l| l >= t) {
                    monotone = false;
                }
                last = Some(t);
                for _ in 0..a {
                    w.push(t);
                }
                nm[t as usize] += a;
            }
            if monotone {
                out.add_term(nm, c.clone());
            } else {
                let mut e = self.scalar(c.clone());
                for g in w {
                    e = self.mul_elem_gen(&e, g);
                }
                out.axpy(&Q::one(), &e);
            }
        }
        Some(out)
    }

    /// Entrywise product of element matrices.
    pub fn mat_mul(&self, a: &[Vec<PbwElement>], b: &[Vec<PbwElement>]) -> Vec<Vec<PbwElement>> {
        let n = a.len();
        let m = b.first().map_or(0, |r| r.len());
        let mut out = vec![vec![PbwElement::zero(); m]; n];
        for i in 0..n {
            for (k, bk) in b.iter().enumerate() {
                if a[i][k].is_zero() {
                    continue;
                }
                for j in 0..m {
                    if !bk[j].is_zero() {
                        let p = self.mul(&a[i][k], &bk[j]);
                        out[i][j].axpy(&Q::one(), &p);
                    }
                }
            }
        }
        out
    }

    /// Embeds a scalar matrix.
    pub fn scalar_matrix(&self, m: &Mat) -> Vec<Vec<PbwElement>> {
        m.iter().map(|r| r.iter().map(|c| self.scalar(c.clone())).collect()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liedata::{build_gl_sl, grading_tables, Kind};
    use crate::ratlin::qr;

    pub(crate) fn alg(n: usize, part: &[usize], flavor: Flavor) -> PbwAlgebra {
        let spec = build_gl_sl(Kind::Sl, n, part).unwrap();
        let t = grading_tables(&spec).unwrap();
        PbwAlgebra::new(Arc::new(spec), Arc::new(t), flavor)
    }

    fn g(a: &PbwAlgebra, label: &str) -> PbwElement {
        a.gen(a.g_index(a.spec.index_of(label).unwrap()))
    }

    #[test]
    fn sl2_products() {
        let a = alg(2, &[2], Flavor::Tilde);
        let (e, h, f) = (g(&a, "e12"), g(&a, "h1"), g(&a, "e21"));
        assert_eq!(a.mul(&f, &e), a.mul(&e, &f).sub(&h));
        assert_eq!(a.show(&a.mul(&h, &h)), "h1^2");
        assert_eq!(a.ngens(), 3);
    }

    #[test]
    fn sl2_pr_examples() {
        let a = alg(2, &[2], Flavor::Tilde);
        let (h, f) = (g(&a, "h1"), g(&a, "e21"));
        assert_eq!(a.pr(&f), a.one());
        assert_eq!(a.pr(&h), h);
        let h2 = a.mul(&h, &h);
        let c = a.mul(&f, &h2).sub(&a.mul(&h2, &f));
        // Left ideal: [f,h^2] = 4hf + 4f, so Pr gives 4h + 4.
        assert_eq!(a.pr(&c), h.scaled(&q(4)).add(&a.scalar(q(4))));
        // Right ideal: [f,h^2] = 4fh - 4f, so Pr' gives 4h - 4.
        assert_eq!(a.pr_right(&c), h.scaled(&q(4)).sub(&a.scalar(q(4))));
    }

    #[test]
    fn sl2_dot_examples() {
        let a = alg(2, &[2], Flavor::Tilde);
        let s = a.spec.clone();
        let f = s.basis_vec(2);
        let (e, h) = (g(&a, "e12"), g(&a, "h1"));
        assert_eq!(a.dot(&f, &h), a.scalar(q(2)));
        assert!(a.dot(&f, &a.one()).is_zero());
        let h2 = a.mul(&h, &h);
        let left = e.add(&h2.scaled(&qr(1, 4))).sub(&h.scaled(&qr(1, 2)));
        let right = e.add(&h2.scaled(&qr(1, 4))).add(&h.scaled(&qr(1, 2)));
        assert!(a.dot(&f, &left).is_zero());
        assert!(a.dot_right(&f, &right).is_zero());
        assert!(!a.dot(&f, &right).is_zero());
        let d = a.degrees(&right);
        assert_eq!((d.kazhdan, d.loop_max), (Some(4), Some(2)));
    }

    #[test]
    fn sl3_tilde_table() {
        let a = alg(3, &[2, 1], Flavor::Tilde);
        assert_eq!(a.ngens(), 10);
        let nes: Vec<_> = a.gens.iter().filter(|g| matches!(g.origin, Origin::Ne(_))).collect();
        assert_eq!(nes.len(), 2);
        assert!(nes.iter().all(|g| g.kazhdan == 1));
        assert!(a.validate_brackets().is_empty());
    }

    #[test]
    fn sl2_hat_table() {
        let a = alg(2, &[2], Flavor::Hat);
        assert_eq!(a.ngens(), 5);
        let f1 = a.gen(a.star_index(0));
        let fch = a.gen(a.ch_index(0));
        assert!(a.mul(&f1, &f1).is_zero());
        assert_eq!(a.mul(&fch, &f1).add(&a.mul(&f1, &fch)), a.one());
        assert!(a.validate_brackets().is_empty());
        assert_eq!(a.degrees(&f1).charge, Some(1));
        assert_eq!(a.degrees(&fch).charge, Some(-1));
    }

    #[test]
    fn comultiply_primitive_square() {
        let a = alg(2, &[2], Flavor::Tilde);
        let p = alg(2, &[2], Flavor::Plain);
        let h = g(&a, "h1");
        let t = a.comultiply(&a.mul(&h, &h), &p);
        assert_eq!(t.len(), 3);
        let hh = p.g_index(1) as usize;
        let coeff = t.iter().find(|((x, y), _)| x.iter().sum::<u16>() == 1 && y[hh] == 1).unwrap().1;
        assert_eq!(*coeff, q(2));
    }

    #[test]
    fn shift_examples() {
        let a = alg(2, &[2], Flavor::Tilde);
        let beta = Character::new(&a.spec, a.tables.beta.clone(), a.tables.p_basis.clone()).unwrap();
        let h = g(&a, "h1");
        assert_eq!(a.shift(&h, &beta, 1), h.sub(&a.scalar(q(2))));
        assert_eq!(a.shift(&a.one(), &beta, 1), a.one());
        let u = a.mul(&h, &h).add(&g(&a, "e12"));
        assert_eq!(a.shift(&a.shift(&u, &beta, -1), &beta, 1), u);
        let bad = Character::new(&a.spec, vec![q(1), q(0), q(0)], a.tables.p_basis.clone());
        assert!(bad.is_err());
    }

    #[test]
    fn serialization_round_trip() {
        let a = alg(2, &[2], Flavor::Tilde);
        let u = g(&a, "h1").scaled(&qr(3, 4)).add(&a.one());
        let j = serde_json::to_string(&u.to_json()).unwrap();
        let back: Vec<MonoJson> = serde_json::from_str(&j).unwrap();
        assert_eq!(PbwElement::from_json(&back).unwrap(), u);
    }
}
