//! Highest-weight theory: restricted roots, the projection of U(g,e)_0 onto
//! U(g0,e), truncated quasi-Verma modules and the quasi-Verma filtration of
//! their translations.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::liedata::{lex_sign, AlgebraSpec, LieError};
use crate::pbw::{Character, PbwElement};
use crate::ratlin::{fmt_q, identity, mat_commutator, mat_mul, mat_vec, rational_roots, char_poly, solve, zeros, Mat, Rref, SparseMatrix, SparseRow, Q};
use crate::trans::{action_unchecked, solve_lift_canonical, RepSpec, TransError};
use crate::walg::{ThetaCoords, ThetaMono, WAlgebra, WalgError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HwError {
    #[error("truncation overflow at depth {0}")]
    Overflow(usize),
    #[error("neither sign of the γ-shift lands in U(g0,e)")]
    NoSign,
    #[error("element is not of restricted weight zero")]
    NonzeroWeight,
    #[error("invalid U(g0,e)-module: {0}")]
    BadModule(String),
    #[error("certificate failed: {0}")]
    Certificate(String),
    #[error(transparent)]
    Walg(#[from] WalgError),
    #[error(transparent)]
    Trans(#[from] TransError),
    #[error(transparent)]
    Lie(#[from] LieError),
}

/// Nonzero t^e-weights of g with multiplicities and a positive system.
#[derive(Clone, Debug)]
pub struct RestrictedRoots {
    pub roots: Vec<(Vec<Q>, usize)>,
    pub positive: Vec<Vec<Q>>,
    /// Basis indices of g spanning the zero weight space g0.
    pub g0: Vec<usize>,
    /// Splitting functional: positive on every positive root.
    pub split: Vec<Q>,
}

pub fn restricted_roots(spec: &AlgebraSpec) -> Result<RestrictedRoots, HwError> {
    let w = spec.te_weights()?;
    let mut roots: BTreeMap<Vec<Q>, usize> = BTreeMap::new();
    let mut g0 = Vec::new();
    for (i, wt) in w.iter().enumerate() {
        if wt.iter().all(Zero::is_zero) {
            g0.push(i);
        } else {
            *roots.entry(wt.clone()).or_default() += 1;
        }
    }
    let positive: Vec<Vec<Q>> = roots.keys().filter(|r| lex_sign(r) == Ordering::Greater).cloned().collect();
    let split = splitting_functional(&positive, spec.te.len());
    Ok(RestrictedRoots { roots: roots.into_iter().collect(), positive, g0, split })
}

/// A functional agreeing in sign with the lexicographic order on the given roots.
fn splitting_functional(positive: &[Vec<Q>], rank: usize) -> Vec<Q> {
    // Weights M^{rank-1-k} with M exceeding every ratio of coordinates.
    let mut big = Q::one();
    for r in positive {
        let lead = r.iter().find(|x| !x.is_zero()).map(|x| x.abs()).unwrap_or_else(Q::one);
        let total: Q = r.iter().map(|x| x.abs()).fold(Q::zero(), |a, b| a + b);
        let ratio = total / lead + Q::one();
        if ratio > big {
            big = ratio;
        }
    }
    let mut f = vec![Q::one(); rank];
    for k in (0..rank.saturating_sub(1)).rev() {
        f[k] = &f[k + 1] * &big;
    }
    f
}

impl RestrictedRoots {
    pub fn height(&self, w: &[Q]) -> Q {
        w.iter().zip(&self.split).map(|(a, b)| a * b).fold(Q::zero(), |a, b| a + b)
    }

    /// `a ≤ b`: `b - a` is a nonnegative integer combination of positive roots.
    pub fn le(&self, a: &[Q], b: &[Q]) -> bool {
        let d: Vec<Q> = b.iter().zip(a).map(|(x, y)| x - y).collect();
        self.in_cone(&d)
    }

    fn in_cone(&self, d: &[Q]) -> bool {
        if d.iter().all(Zero::is_zero) {
            return true;
        }
        if !self.height(d).is_positive() {
            return false;
        }
        self.positive.iter().any(|r| {
            let rest: Vec<Q> = d.iter().zip(r).map(|(x, y)| x - y).collect();
            self.in_cone(&rest)
        })
    }
}

/// U(g0,e) together with the projection `U(g,e)_0 -> U(g0,e)`.
pub struct HwContext<'a> {
    pub w: &'a WAlgebra,
    pub w0: WAlgebra,
    pub roots: RestrictedRoots,
    /// Position in g0 of each basis index of g, if any.
    g0_pos: Vec<Option<usize>>,
    pub gamma: Character,
    /// Sign of the γ-shift selected by the invariance test.
    pub sign: i32,
    /// Outcome of the invariance test for `+1` and `-1`.
    pub sign_tests: [bool; 2],
    pub neg: Vec<usize>,
    pub zero: Vec<usize>,
    pub pos: Vec<usize>,
}

impl<'a> HwContext<'a> {
    pub fn new(w: &'a WAlgebra) -> Result<HwContext<'a>, HwError> {
        let spec = w.spec();
        let roots = restricted_roots(spec)?;
        let (sub, idx) = spec.zero_weight_subalgebra()?;
        let w0 = WAlgebra::build(sub, w.max_degree)?;
        let mut g0_pos = vec![None; spec.dim()];
        for (a, &i) in idx.iter().enumerate() {
            g0_pos[i] = Some(a);
        }
        let classes = |o: Ordering| (0..w.ngen()).filter(|&i| w.sign_class(i) == o).collect::<Vec<_>>();
        let mut ctx = HwContext {
            gamma: w.gamma()?,
            neg: classes(Ordering::Less),
            zero: classes(Ordering::Equal),
            pos: classes(Ordering::Greater),
            w,
            w0,
            roots,
            g0_pos,
            sign: 1,
            sign_tests: [false, false],
        };
        let tests = ctx.sign_test_set();
        for (k, s) in [1, -1].into_iter().enumerate() {
            let mut ok = true;
            for u in &tests {
                let p = ctx.project_to_g0(u, s)?;
                if !ctx.w0.is_invariant(&p) {
                    ok = false;
                    break;
                }
            }
            ctx.sign_tests[k] = ok;
        }
        ctx.sign = match ctx.sign_tests {
            [true, _] => 1,
            [false, true] => -1,
            _ => return Err(HwError::NoSign),
        };
        Ok(ctx)
    }

    /// Zero-weight Θ-generators and weight-zero products of a negative and a positive one.
    fn sign_test_set(&self) -> Vec<PbwElement> {
        let w = self.w;
        let mut out: Vec<PbwElement> = self.zero.iter().map(|&i| w.theta[i].clone()).collect();
        for &a in &self.neg {
            for &b in &self.pos {
                let s: Vec<Q> = w.ge_weight[a].iter().zip(&w.ge_weight[b]).map(|(x, y)| x + y).collect();
                if s.iter().all(Zero::is_zero) {
                    out.push(w.alg.mul(&w.theta[a], &w.theta[b]));
                }
            }
        }
        out
    }

    /// `S_{±γ} ∘ π` on a weight-zero element of U(p~), landing in U(p0) written over g0.
    pub fn project_to_g0(&self, u: &PbwElement, sign: i32) -> Result<PbwElement, HwError> {
        let a = &self.w.alg;
        if u.terms.keys().any(|m| a.mono_weight(m).iter().any(|x| !x.is_zero())) {
            return Err(HwError::NonzeroWeight);
        }
        let p = a.shift(&self.w.pi(u), &self.gamma, sign);
        let b = &self.w0.alg;
        let mut out = PbwElement::zero();
        for (m, c) in &p.terms {
            let mut e = b.scalar(c.clone());
            for (g, &k) in m.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                let crate::pbw::Origin::G(i) = a.gens[g].origin else {
                    return Err(HwError::Certificate("π left a non-g generator".into()));
                };
                let Some(j) = self.g0_pos[i] else {
                    return Err(HwError::Certificate("π left a generator outside g0".into()));
                };
                for _ in 0..k {
                    e = b.mul_elem_gen(&e, b.g_index(j));
                }
            }
            out.axpy(&Q::one(), &e);
        }
        Ok(out)
    }

    /// The isomorphism `U(g,e)_0 / U(g,e)_{0,♯} -> U(g0,e)` in U(g0,e) Θ-coordinates.
    pub fn iota(&self, u: &PbwElement) -> Result<ThetaCoords, HwError> {
        Ok(self.w0.express_in_theta(&self.project_to_g0(u, self.sign)?)?)
    }

    /// Exponents of the negative generators only.
    fn neg_part(&self, b: &[u32]) -> ThetaMono {
        let mut out = vec![0; b.len()];
        for &i in &self.neg {
            out[i] = b[i];
        }
        out
    }

    /// Neg-monomials with at most `depth` factors, ordered by factor count then exponents.
    pub fn neg_monomials(&self, depth: usize) -> Vec<ThetaMono> {
        fn go(neg: &[usize], k: usize, left: usize, cur: &mut ThetaMono, out: &mut Vec<ThetaMono>) {
            if k == neg.len() {
                out.push(cur.clone());
                return;
            }
            for a in 0..=left {
                cur[neg[k]] = a as u32;
                go(neg, k + 1, left - a, cur, out);
            }
            cur[neg[k]] = 0;
        }
        let mut out = Vec::new();
        go(&self.neg, 0, depth, &mut vec![0; self.w.ngen()], &mut out);
        out.sort_by_key(|a| (a.iter().sum::<u32>(), std::cmp::Reverse(a.clone())));
        out
    }
}

/// A finite-dimensional U(g0,e)-module, by matrices of its Θ-generators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BaseModule {
    pub dim: usize,
    pub mats: Vec<Mat>,
}

impl BaseModule {
    pub fn act(&self, c: &ThetaCoords) -> Mat {
        let mut out = zeros(self.dim, self.dim);
        for (b, v) in c {
            let mut m = identity(self.dim);
            for (k, &e) in b.iter().enumerate() {
                for _ in 0..e {
                    m = mat_mul(&m, &self.mats[k]);
                }
            }
            for i in 0..self.dim {
                for j in 0..self.dim {
                    out[i][j] += v * &m[i][j];
                }
            }
        }
        out
    }

    /// Checks the commutation relations of U(g0,e) on generator pairs.
    pub fn validate(&self, w0: &WAlgebra) -> Result<(), HwError> {
        if self.mats.len() != w0.ngen() || self.mats.iter().any(|m| m.len() != self.dim) {
            return Err(HwError::BadModule("one square matrix per generator required".into()));
        }
        for a in 0..w0.ngen() {
            for b in a + 1..w0.ngen() {
                let c = w0.alg.commutator(&w0.theta[a], &w0.theta[b]);
                let lhs = self.act(&w0.express_in_theta(&c)?);
                if lhs != mat_commutator(&self.mats[a], &self.mats[b]) {
                    return Err(HwError::BadModule(format!("relation between generators {a} and {b} fails")));
                }
            }
        }
        Ok(())
    }

    /// One-dimensional module on which t^e acts (through U(g,e)) by `lambda0`;
    /// the generators outside t^e act by the given values (default 0).
    pub fn one_dim(ctx: &HwContext, lambda0: &[Q], others: &BTreeMap<usize, Q>) -> Result<BaseModule, HwError> {
        let w0 = &ctx.w0;
        let te0 = &w0.spec().te;
        let te_gens: Vec<usize> = (0..w0.ngen()).filter(|&k| te0.contains(&w0.ge[k])).collect();
        let base = |k: usize| others.get(&k).cloned().unwrap_or_else(Q::zero);
        // ι(θ(t)) is affine in the values of the t^e generators once the others are fixed.
        let mut a = SparseMatrix::new(te0.len(), te_gens.len());
        let mut rhs = Vec::new();
        for (r, t) in ctx.w.spec().te.iter().enumerate() {
            let c = ctx.iota(&ctx.w.theta_embed(t)?)?;
            let mut constant = Q::zero();
            for (b, v) in &c {
                let te_deg: u32 = te_gens.iter().map(|&k| b[k]).sum();
                let mut rest = v.clone();
                for (k, &e) in b.iter().enumerate() {
                    if !te_gens.contains(&k) {
                        rest *= num_traits::pow(base(k), e as usize);
                    }
                }
                match te_deg {
                    0 => constant += rest,
                    1 => {
                        let k = te_gens.iter().position(|&k| b[k] == 1).unwrap();
                        a.push(r, k, rest);
                    }
                    _ => return Err(HwError::BadModule("t^e image is not affine".into())),
                }
            }
            rhs.push(&lambda0[r] - constant);
        }
        let sol = solve(&a, &rhs).map_err(|_| HwError::BadModule("weight not attainable".into()))?;
        let mats = (0..w0.ngen())
            .map(|k| match te_gens.iter().position(|&g| g == k) {
                Some(p) => vec![vec![sol[p].clone()]],
                None => vec![vec![base(k)]],
            })
            .collect();
        let m = BaseModule { dim: 1, mats };
        m.validate(w0)?;
        Ok(m)
    }
}

pub type WeightChar = BTreeMap<Vec<Q>, usize>;

/// Basis `Θ(neg)^a ⊗ l` of M(L) up to `depth` negative factors.
pub struct VermaTruncation<'c, 'a> {
    pub ctx: &'c HwContext<'a>,
    pub base: BaseModule,
    pub depth: usize,
    pub lambda0: Vec<Q>,
    pub monos: Vec<ThetaMono>,
    mono_index: HashMap<ThetaMono, usize>,
    zero_mats: Vec<Mat>,
}

/// `(neg-monomial index, matrix on L, coefficient)` terms of `u Θ^a ⊗ -`.
type VermaImage = Vec<(usize, Mat)>;

impl<'c, 'a> VermaTruncation<'c, 'a> {
    pub fn new(ctx: &'c HwContext<'a>, base: BaseModule, depth: usize) -> Result<Self, HwError> {
        base.validate(&ctx.w0)?;
        let monos = ctx.neg_monomials(depth);
        let mono_index = monos.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
        let mut zero_mats = vec![Vec::new(); ctx.w.ngen()];
        for &k in &ctx.zero {
            zero_mats[k] = base.act(&ctx.iota(&ctx.w.theta[k])?);
        }
        // t^e acts on L by a weight.
        let mut lambda0 = Vec::new();
        for t in &ctx.w.spec().te {
            let m = base.act(&ctx.iota(&ctx.w.theta_embed(t)?)?);
            let lam = m.first().map_or_else(Q::zero, |r| r[0].clone());
            if m != crate::ratlin::mat_scale(&identity(base.dim), &lam) {
                return Err(HwError::BadModule("t^e does not act by a single weight".into()));
            }
            lambda0.push(lam);
        }
        Ok(VermaTruncation { ctx, base, depth, lambda0, monos, mono_index, zero_mats })
    }

    pub fn dim(&self) -> usize {
        self.monos.len() * self.base.dim
    }

    pub fn index(&self, a: usize, l: usize) -> usize {
        a * self.base.dim + l
    }

    pub fn mono_weight(&self, a: &[u32]) -> Vec<Q> {
        let w = self.ctx.w.theta_mono_weight(a);
        w.iter().zip(&self.lambda0).map(|(x, y)| x + y).collect()
    }

    pub fn weight(&self, idx: usize) -> Vec<Q> {
        self.mono_weight(&self.monos[idx / self.base.dim])
    }

    /// Matrix of `ι(Θ^z)` on L for a zero-weight Θ-monomial.
    fn zero_action(&self, b: &[u32]) -> Mat {
        let mut m = identity(self.base.dim);
        for &k in &self.ctx.zero {
            for _ in 0..b[k] {
                m = mat_mul(&m, &self.zero_mats[k]);
            }
        }
        m
    }

    /// `u · (Θ^a ⊗ -)` for `u ∈ U(g,e)`; `None` on overflow.
    fn image(&self, u: &PbwElement, a: usize) -> Result<Option<VermaImage>, HwError> {
        let w = self.ctx.w;
        let prod = w.alg.mul(u, &w.theta_monomial(&self.monos[a]));
        let mut acc: BTreeMap<usize, Mat> = BTreeMap::new();
        for (b, c) in w.express_in_theta(&prod)? {
            if w.has_positive_factor(&b) {
                continue;
            }
            let Some(&ai) = self.mono_index.get(&self.ctx.neg_part(&b)) else {
                return Ok(None);
            };
            let z = self.zero_action(&b);
            let e = acc.entry(ai).or_insert_with(|| zeros(self.base.dim, self.base.dim));
            for i in 0..self.base.dim {
                for j in 0..self.base.dim {
                    e[i][j] += &c * &z[i][j];
                }
            }
        }
        Ok(Some(acc.into_iter().collect()))
    }

    /// Applies `u` to a vector; `Overflow` if the result leaves the truncation.
    pub fn apply(&self, u: &PbwElement, v: &SparseRow) -> Result<SparseRow, HwError> {
        let d = self.base.dim;
        let mut out = SparseRow::new();
        let mut by_mono: BTreeMap<usize, Vec<(usize, Q)>> = BTreeMap::new();
        for (idx, c) in v {
            by_mono.entry(idx / d).or_default().push((idx % d, c.clone()));
        }
        for (a, ls) in by_mono {
            let img = self.image(u, a)?.ok_or(HwError::Overflow(self.depth))?;
            for (ai, m) in img {
                for (l, c) in &ls {
                    for (lp, row) in m.iter().enumerate() {
                        if !row[*l].is_zero() {
                            crate::ratlin::axpy(&mut out, &(c * &row[*l]), &SparseRow::from([(self.index(ai, lp), Q::one())]));
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn character(&self) -> WeightChar {
        let mut ch = WeightChar::new();
        for a in &self.monos {
            *ch.entry(self.mono_weight(a)).or_default() += self.base.dim;
        }
        ch
    }
}

/// Number of neg-monomials of each weight offset, up to `depth` factors.
fn neg_char(ctx: &HwContext, depth: usize) -> WeightChar {
    let mut ch = WeightChar::new();
    for a in ctx.neg_monomials(depth) {
        *ch.entry(ctx.w.theta_mono_weight(&a)).or_default() += 1;
    }
    ch
}

fn add(a: &[Q], b: &[Q]) -> Vec<Q> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// One quasi-Verma factor of a translated Verma module.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Factor {
    pub weight: Vec<Q>,
    pub dim: usize,
    pub certified: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct FactorJson {
    pub weight: BTreeMap<String, String>,
    pub dim: usize,
    pub certified: bool,
}

/// Result of the filtration extraction.
#[derive(Clone, Debug)]
pub struct FactorReport {
    /// One entry per weight space of V.
    pub layers: Vec<Factor>,
    /// Layers refined along composition series of each `L_i`.
    pub factors: Vec<Factor>,
    pub character_identity: bool,
    /// Weights checked by the certificates (complete within the truncation).
    pub window: Vec<Vec<Q>>,
    pub sign: i32,
}

impl FactorReport {
    pub fn to_json(&self, te_labels: &[String]) -> Vec<FactorJson> {
        self.factors
            .iter()
            .map(|f| FactorJson {
                weight: te_labels.iter().cloned().zip(f.weight.iter().map(fmt_q)).collect(),
                dim: f.dim,
                certified: f.certified,
            })
            .collect()
    }
}

/// Translation of a truncated quasi-Verma module, basis `(Θ^a ⊗ l) ⊗ v_i`.
pub struct TranslatedVerma<'v, 'c, 'a> {
    pub verma: &'v VermaTruncation<'c, 'a>,
    pub rs: &'v RepSpec,
    /// For each Θ-generator, the image of each basis vector (`None` on overflow).
    actions: Vec<Vec<Option<SparseRow>>>,
}

impl<'v, 'c, 'a> TranslatedVerma<'v, 'c, 'a> {
    pub fn new(verma: &'v VermaTruncation<'c, 'a>, rs: &'v RepSpec) -> Result<Self, HwError> {
        let w = verma.ctx.w;
        let x0 = solve_lift_canonical(w, rs)?;
        let n = rs.dim();
        let mut actions = Vec::new();
        let mats: Vec<Vec<Vec<PbwElement>>> =
            w.theta.iter().map(|u| action_unchecked(w, rs, &x0, u).map(|a| a.entries)).collect::<Result<_, _>>()?;
        let mut tv = TranslatedVerma { verma, rs, actions: Vec::new() };
        for m in &mats {
            actions.push(tv.columns(m, n)?);
        }
        tv.actions = actions;
        Ok(tv)
    }

    fn columns(&self, m: &[Vec<PbwElement>], n: usize) -> Result<Vec<Option<SparseRow>>, HwError> {
        let v = self.verma;
        let d = v.base.dim;
        let mut cols = vec![Some(SparseRow::new()); self.dim()];
        for a in 0..v.monos.len() {
            for j in 0..n {
                for (i, row) in m.iter().enumerate() {
                    if row[j].is_zero() {
                        continue;
                    }
                    let img = v.image(&row[j], a)?;
                    for l in 0..d {
                        let col = self.index(v.index(a, l), j);
                        let Some(img) = &img else {
                            cols[col] = None;
                            continue;
                        };
                        let Some(target) = cols[col].as_mut() else { continue };
                        for (ai, mat) in img {
                            for (lp, r) in mat.iter().enumerate() {
                                if !r[l].is_zero() {
                                    let k = self.index(v.index(*ai, lp), i);
                                    let e = target.entry(k).or_insert_with(Q::zero);
                                    *e += &r[l];
                                    if e.is_zero() {
                                        target.remove(&k);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(cols)
    }

    pub fn dim(&self) -> usize {
        self.verma.dim() * self.rs.dim()
    }

    pub fn index(&self, m: usize, i: usize) -> usize {
        m * self.rs.dim() + i
    }

    pub fn weight(&self, idx: usize) -> Vec<Q> {
        let n = self.rs.dim();
        add(&self.verma.weight(idx / n), &self.rs.alpha[idx % n])
    }

    /// Applies Θ-generator `g`; `Overflow` if a needed column left the truncation.
    pub fn apply_gen(&self, g: usize, v: &SparseRow) -> Result<SparseRow, HwError> {
        let mut out = SparseRow::new();
        for (k, c) in v {
            let col = self.actions[g][*k].as_ref().ok_or(HwError::Overflow(self.verma.depth))?;
            crate::ratlin::axpy(&mut out, c, col);
        }
        Ok(out)
    }

    /// Applies `Θ^a` (rightmost factor first).
    pub fn apply_mono(&self, a: &[u32], v: &SparseRow) -> Result<SparseRow, HwError> {
        let mut cur = v.clone();
        for g in (0..a.len()).rev() {
            for _ in 0..a[g] {
                cur = self.apply_gen(g, &cur)?;
            }
        }
        Ok(cur)
    }

    pub fn character(&self) -> WeightChar {
        let mut ch = WeightChar::new();
        for k in 0..self.dim() {
            *ch.entry(self.weight(k)).or_default() += 1;
        }
        ch
    }

    /// Weights whose whole weight space lies inside the truncation.
    pub fn window(&self) -> Vec<Vec<Q>> {
        let ctx = self.verma.ctx;
        let r = &ctx.roots;
        if ctx.neg.is_empty() {
            // No negative generators: the truncation is the whole module.
            let mut out: Vec<Vec<Q>> = self.character().into_keys().collect();
            out.sort_by(|a, b| r.height(b).cmp(&r.height(a)).then(b.cmp(a)));
            return out;
        }
        let step = ctx.neg.iter().map(|&k| r.height(&ctx.w.ge_weight[k])).max().unwrap_or_else(Q::zero);
        let top = self.rs.alpha.iter().map(|a| r.height(&add(&self.verma.lambda0, a))).max().unwrap_or_else(Q::zero);
        let cut = top + step * Q::from_integer((self.verma.depth as i64 + 1).into());
        let mut out: Vec<Vec<Q>> = self.character().into_keys().filter(|w| r.height(w) > cut).collect();
        out.sort_by(|a, b| r.height(b).cmp(&r.height(a)).then(b.cmp(a)));
        out
    }
}

/// Dimensions of composition factors over C of the module given by `mats`.
/// Commuting operators triangularize simultaneously, so every factor is a line;
/// otherwise common rational eigenlines are split off while they exist.
fn composition_dims(mats: &[Mat], dim: usize) -> Vec<usize> {
    if mats.iter().all(|a| mats.iter().all(|b| crate::ratlin::mat_is_zero(&mat_commutator(a, b)))) {
        return vec![1; dim];
    }
    rational_composition_dims(mats, dim)
}

fn rational_composition_dims(mats: &[Mat], dim: usize) -> Vec<usize> {
    if dim == 0 {
        return Vec::new();
    }
    // Look for a common eigenvector over Q by intersecting eigenspaces greedily.
    let mut space: Vec<Vec<Q>> = (0..dim).map(|i| identity(dim)[i].clone()).collect();
    for m in mats {
        let restricted = restrict(m, &space);
        let Some(restricted) = restricted else { return vec![dim] };
        let roots = rational_roots(&char_poly(&restricted));
        let Some(lam) = roots.first() else { return vec![dim] };
        let k = space.len();
        let shifted: Mat = (0..k).map(|i| (0..k).map(|j| if i == j { &restricted[i][j] - lam } else { restricted[i][j].clone() }).collect()).collect();
        let ker = crate::ratlin::kernel_basis(&SparseMatrix::from_dense(&shifted));
        space = ker
            .iter()
            .map(|c| (0..dim).map(|t| (0..k).map(|s| &c[s] * &space[s][t]).fold(Q::zero(), |a, b| a + b)).collect())
            .collect();
    }
    if space.is_empty() {
        return vec![dim];
    }
    let v = &space[0];
    if !mats.iter().all(|m| is_multiple(&mat_vec(m, v), v)) {
        return vec![dim];
    }
    // Quotient by the line.
    let pivot = v.iter().position(|x| !x.is_zero()).unwrap();
    let keep: Vec<usize> = (0..dim).filter(|&i| i != pivot).collect();
    let quotient: Vec<Mat> = mats
        .iter()
        .map(|m| {
            keep.iter()
                .map(|&i| {
                    keep.iter()
                        .map(|&j| {
                            // Column j of m, reduced along v at the pivot.
                            let r = &m[pivot][j] / &v[pivot];
                            &m[i][j] - &r * &v[i]
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let mut out = vec![1];
    out.extend(rational_composition_dims(&quotient, dim - 1));
    out
}

fn is_multiple(a: &[Q], v: &[Q]) -> bool {
    let p = v.iter().position(|x| !x.is_zero()).unwrap();
    let r = &a[p] / &v[p];
    a.iter().zip(v).all(|(x, y)| *x == &r * y)
}

/// Matrix of `m` on the span of `basis` if it is invariant.
fn restrict(m: &Mat, basis: &[Vec<Q>]) -> Option<Mat> {
    let k = basis.len();
    let dim = m.len();
    // Coordinates via solving B^T c = image.
    let bt: Mat = (0..dim).map(|t| (0..k).map(|s| basis[s][t].clone()).collect()).collect();
    let bm = SparseMatrix::from_dense(&bt);
    let mut out = zeros(k, k);
    for (s, b) in basis.iter().enumerate() {
        let img = mat_vec(m, b);
        let c = solve(&bm, &img).ok()?;
        for (t, x) in c.into_iter().enumerate() {
            out[t][s] = x;
        }
    }
    Some(out)
}

/// Extracts the quasi-Verma filtration of `M(L) ⊛ V` on the truncation, with
/// maximality and injectivity certificates on the complete weights.
pub fn translate_verma_factors(tv: &TranslatedVerma) -> Result<FactorReport, HwError> {
    let ctx = tv.verma.ctx;
    let roots = &ctx.roots;
    let window = tv.window();
    let dim = tv.dim();
    // Basis vectors per weight and the accumulated submodule per weight.
    let mut by_weight: BTreeMap<Vec<Q>, Vec<usize>> = BTreeMap::new();
    for k in 0..dim {
        by_weight.entry(tv.weight(k)).or_default().push(k);
    }
    let mut sub: BTreeMap<Vec<Q>, Rref> = window.iter().map(|w| (w.clone(), Rref::new(dim))).collect();
    let in_window = |w: &Vec<Q>| window.contains(w);

    weight_operator_certificate(tv, &window)?;

    // Distinct weights of V, non-increasing.
    let mut v_weights: Vec<(Vec<Q>, usize)> = Vec::new();
    for a in &tv.rs.alpha {
        match v_weights.iter_mut().find(|(w, _)| w == a) {
            Some(e) => e.1 += 1,
            None => v_weights.push((a.clone(), 1)),
        }
    }
    v_weights.sort_by(|a, b| roots.height(&b.0).cmp(&roots.height(&a.0)).then(b.0.cmp(&a.0)));

    let nchar = neg_char(ctx, 2 * tv.verma.depth + 2);
    let mut layers = Vec::new();
    let mut factors = Vec::new();
    for (lam, _) in &v_weights {
        let mu = add(&tv.verma.lambda0, lam);
        if !in_window(&mu) {
            return Err(HwError::Overflow(tv.verma.depth));
        }
        let mut certified = true;
        // Maximality: nothing above μ survives in the quotient.
        for nu in &window {
            if nu != &mu && roots.le(&mu, nu) && quotient_dim(&by_weight, &sub, nu) > 0 {
                certified = false;
            }
        }
        // Representatives of L_i = (M_{i-1})_μ.
        let mut reps: Vec<SparseRow> = Vec::new();
        {
            let mut tmp = sub[&mu].clone();
            for &k in by_weight.get(&mu).into_iter().flatten() {
                let v = SparseRow::from([(k, Q::one())]);
                if tmp.insert(&v) {
                    reps.push(v);
                }
            }
        }
        // Positive generators kill L_i modulo the submodule.
        for &g in &ctx.pos {
            for r in &reps {
                let img = tv.apply_gen(g, r)?;
                let wt = add(&mu, &ctx.w.ge_weight[g]);
                if !img.is_empty() && (!in_window(&wt) || !sub[&wt].reduce(&img).is_empty()) {
                    certified = false;
                }
            }
        }
        // The zero part acts on L_i modulo the submodule.
        let mut zero_mats = Vec::new();
        for &g in &ctx.zero {
            let mut m = zeros(reps.len(), reps.len());
            for (s, r) in reps.iter().enumerate() {
                let img = sub[&mu].reduce(&tv.apply_gen(g, r)?);
                let c = coords_mod(&sub[&mu], &reps, &img).ok_or_else(|| HwError::Certificate("zero part leaves L_i".into()))?;
                for (t, x) in c.into_iter().enumerate() {
                    m[t][s] = x;
                }
            }
            zero_mats.push(m);
        }
        // Injectivity of M(L_i) -> M_{i-1} on the window.
        for a in ctx.neg_monomials(tv.verma.depth) {
            let wt = add(&mu, &ctx.w.theta_mono_weight(&a));
            if !in_window(&wt) {
                continue;
            }
            for r in &reps {
                let img = tv.apply_mono(&a, r)?;
                if !sub.get_mut(&wt).unwrap().insert(&img) {
                    certified = false;
                }
            }
        }
        layers.push(Factor { weight: mu.clone(), dim: reps.len(), certified });
        for d in composition_dims(&zero_mats, reps.len()) {
            factors.push(Factor { weight: mu.clone(), dim: d, certified });
        }
    }
    // Exhaustion and the character identity on the window.
    let mut character_identity = true;
    let tch = tv.character();
    let base_ch = tv.verma.character();
    for nu in &window {
        if quotient_dim(&by_weight, &sub, nu) != 0 {
            character_identity = false;
        }
        let sum: usize = layers
            .iter()
            .map(|f| {
                let off: Vec<Q> = nu.iter().zip(&f.weight).map(|(x, y)| x - y).collect();
                f.dim * nchar.get(&off).copied().unwrap_or(0)
            })
            .sum();
        let conv: usize = tv
            .rs
            .alpha
            .iter()
            .map(|a| {
                let off: Vec<Q> = nu.iter().zip(a).map(|(x, y)| x - y).collect();
                base_ch.get(&off).copied().unwrap_or(0)
            })
            .sum();
        if sum != tch[nu] || conv != tch[nu] {
            character_identity = false;
        }
    }
    Ok(FactorReport { layers, factors, character_identity, window, sign: ctx.sign })
}

fn quotient_dim(by_weight: &BTreeMap<Vec<Q>, Vec<usize>>, sub: &BTreeMap<Vec<Q>, Rref>, w: &Vec<Q>) -> usize {
    by_weight.get(w).map_or(0, |v| v.len()) - sub.get(w).map_or(0, Rref::rank)
}

/// Coordinates of `v` (already reduced modulo `s`) in the span of `reps` modulo `s`.
fn coords_mod(s: &Rref, reps: &[SparseRow], v: &SparseRow) -> Option<Vec<Q>> {
    let reduced: Vec<SparseRow> = reps.iter().map(|r| s.reduce(r)).collect();
    let n = reps.len();
    // Solve Σ c_t reduced_t = v over the support.
    let mut cols: BTreeMap<usize, usize> = BTreeMap::new();
    for r in reduced.iter().chain(std::iter::once(v)) {
        for k in r.keys() {
            let next = cols.len();
            cols.entry(*k).or_insert(next);
        }
    }
    let mut a = SparseMatrix::new(cols.len(), n);
    for (t, r) in reduced.iter().enumerate() {
        for (k, x) in r {
            a.push(cols[k], t, x.clone());
        }
    }
    let mut b = vec![Q::zero(); cols.len()];
    for (k, x) in v {
        b[cols[k]] = x.clone();
    }
    solve(&a, &b).ok()
}

/// θ(t) acts on each complete weight space by its weight.
fn weight_operator_certificate(tv: &TranslatedVerma, window: &[Vec<Q>]) -> Result<(), HwError> {
    let ctx = tv.verma.ctx;
    let w = ctx.w;
    let x0 = solve_lift_canonical(w, tv.rs)?;
    for (k, t) in w.spec().te.iter().enumerate() {
        let th = w.theta_embed(t)?;
        let act = action_unchecked(w, tv.rs, &x0, &th)?;
        let cols = tv.columns(&act.entries, tv.rs.dim())?;
        for idx in 0..tv.dim() {
            let wt = tv.weight(idx);
            if !window.contains(&wt) {
                continue;
            }
            let want = SparseRow::from([(idx, wt[k].clone())]);
            let got = cols[idx].clone().ok_or(HwError::Overflow(tv.verma.depth))?;
            let got: SparseRow = got.into_iter().filter(|(_, c)| !c.is_zero()).collect();
            let want: SparseRow = want.into_iter().filter(|(_, c)| !c.is_zero()).collect();
            if got != want {
                return Err(HwError::Certificate(format!("θ(t{k}) is not diagonal on basis vector {idx}")));
            }
        }
    }
    Ok(())
}

/// Conditions of category O on a sequence of truncated characters of growing depth:
/// finite weight spaces and a set of maximal weights that does not move.
pub fn weight_finiteness_check(roots: &RestrictedRoots, chars: &[WeightChar]) -> bool {
    let maximal = |ch: &WeightChar| -> Vec<Vec<Q>> {
        ch.keys().filter(|w| !ch.keys().any(|v| v != *w && roots.le(w, v))).cloned().collect()
    };
    let Some(first) = chars.first() else { return true };
    let top = maximal(first);
    chars.iter().all(|ch| {
        maximal(ch) == top && ch.keys().all(|w| top.iter().any(|t| roots.le(w, t)))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liedata::Rep;
    use crate::ratlin::{q, qr};
    use crate::trans::load_for;
    use crate::walg::build_from_shorthand;

    #[test]
    fn roots_sl2_and_sl3() {
        let w = build_from_shorthand("sl2:[2]", 4).unwrap();
        let r = restricted_roots(w.spec()).unwrap();
        assert!(r.roots.is_empty());
        let w = build_from_shorthand("sl3:[2,1]", 4).unwrap();
        let r = restricted_roots(w.spec()).unwrap();
        assert_eq!(r.roots, vec![(vec![q(-3)], 2), (vec![q(3)], 2)]);
        let labels: Vec<&str> = r.g0.iter().map(|&i| w.spec().labels[i].as_str()).collect();
        assert_eq!(labels, vec!["e13", "h1", "h2", "e31"]);
        assert!(r.le(&[q(-3)], &[q(3)]));
        assert!(!r.le(&[q(3)], &[q(1)]));
    }

    #[test]
    fn rootless_verma_is_whole_module() {
        let w = build_from_shorthand("sl2:[2]", 8).unwrap();
        let ctx = HwContext::new(&w).unwrap();
        assert!(ctx.neg.is_empty());
        let l = BaseModule::one_dim(&ctx, &[], &BTreeMap::new()).unwrap();
        let v = VermaTruncation::new(&ctx, l, 3).unwrap();
        let rs = load_for(&w, &Rep::natural(w.spec()).unwrap()).unwrap();
        let tv = TranslatedVerma::new(&v, &rs).unwrap();
        let rep = translate_verma_factors(&tv).unwrap();
        assert_eq!(rep.layers, vec![Factor { weight: vec![], dim: 2, certified: true }]);
        assert_eq!(rep.factors.len(), 2);
        assert!(rep.factors.iter().all(|f| f.dim == 1 && f.certified));
        assert!(rep.character_identity);
    }

    #[test]
    fn sl3_verma_and_factors() {
        let w = build_from_shorthand("sl3:[2,1]", 16).unwrap();
        let ctx = HwContext::new(&w).unwrap();
        assert_eq!(ctx.neg.len(), 1);
        for lam in [q(0), qr(5, 2), q(-7)] {
            let l = BaseModule::one_dim(&ctx, &[lam.clone()], &BTreeMap::new()).unwrap();
            let v = VermaTruncation::new(&ctx, l, 3).unwrap();
            assert_eq!(v.lambda0, vec![lam.clone()]);
            let ch = v.character();
            assert_eq!(ch.len(), 4);
            assert!((0..4).all(|a| ch[&vec![&lam - q(3 * a)]] == 1));
            let rs = load_for(&w, &Rep::natural(w.spec()).unwrap()).unwrap();
            let tv = TranslatedVerma::new(&v, &rs).unwrap();
            let rep = translate_verma_factors(&tv).unwrap();
            let got: Vec<(Q, usize, bool)> = rep.factors.iter().map(|f| (f.weight[0].clone(), f.dim, f.certified)).collect();
            assert_eq!(got, vec![(&lam + q(1), 1, true), (&lam + q(1), 1, true), (&lam - q(2), 1, true)]);
            assert!(rep.character_identity);
        }
    }

    #[test]
    fn sl3_sign_iota_and_small_cases() {
        let w = build_from_shorthand("sl3:[2,1]", 12).unwrap();
        let ctx = HwContext::new(&w).unwrap();
        // Only the S_{-γ} composition lands in U(g0,e) here.
        assert_eq!(ctx.sign_tests, [false, true]);
        // ι is multiplicative on the zero part.
        let (a, b) = (ctx.zero[0], ctx.zero[1]);
        let p = w.alg.mul(&w.theta[a], &w.theta[b]);
        let lhs = ctx.w0.from_coords(&ctx.iota(&p).unwrap());
        let rhs = ctx.w0.alg.mul(&ctx.w0.from_coords(&ctx.iota(&w.theta[a]).unwrap()), &ctx.w0.from_coords(&ctx.iota(&w.theta[b]).unwrap()));
        assert_eq!(lhs, rhs);
        let l = BaseModule::one_dim(&ctx, &[q(4)], &BTreeMap::new()).unwrap();
        let v0 = VermaTruncation::new(&ctx, l.clone(), 0).unwrap();
        assert_eq!(v0.character(), WeightChar::from([(vec![q(4)], 1)]));
        let v = VermaTruncation::new(&ctx, l, 2).unwrap();
        // Θ(e12) Θ(e23) ⊗ l has weight λ0.
        let x = v.apply(&w.theta[ctx.neg[0]], &SparseRow::from([(0, q(1))])).unwrap();
        assert_eq!(x.keys().map(|&k| v.weight(k)).collect::<Vec<_>>(), vec![vec![q(1)]]);
        let y = v.apply(&w.theta[ctx.pos[0]], &x).unwrap();
        assert!(y.keys().all(|&k| v.weight(k) == vec![q(4)]));
        let rs = load_for(&w, &Rep::trivial(w.spec())).unwrap();
        let tv = TranslatedVerma::new(&v, &rs).unwrap();
        let rep = translate_verma_factors(&tv).unwrap();
        assert_eq!(rep.factors, vec![Factor { weight: vec![q(4)], dim: 1, certified: true }]);
        assert!(rep.character_identity);
    }

    #[test]
    fn finiteness() {
        let w = build_from_shorthand("sl3:[2,1]", 4).unwrap();
        let r = restricted_roots(w.spec()).unwrap();
        let good: Vec<WeightChar> =
            (0..4).map(|d| (0..=d).map(|a| (vec![q(-3 * a)], 1)).collect()).collect();
        assert!(weight_finiteness_check(&r, &good));
        let bad: Vec<WeightChar> = (0..4).map(|d| (0..=d).map(|a| (vec![q(3 * a)], 1)).collect()).collect();
        assert!(!weight_finiteness_check(&r, &bad));
    }
}
