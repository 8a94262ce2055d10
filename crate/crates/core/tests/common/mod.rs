//! Randomized property checks shared by the property tests and the acceptance run.

#![allow(dead_code)]

use std::sync::Arc;

use proptest::prelude::*;
use proptest::sample::Index;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use walgebra::liedata::{build_gl_sl, grading_tables, Kind, Rep};
use walgebra::pbw::{Flavor, Mono, PbwAlgebra, PbwElement};
use walgebra::ratlin::Q;
use walgebra::trans::{
    lift_factor, load_for, solve_lift_canonical, theta_monomials, translation_action, verify_lift, action_weight_check,
    ElemMatrix, RepSpec,
};
use walgebra::walg::{build_from_shorthand, WAlgebra};

pub type Property = fn() -> Result<(), String>;

pub const PROPERTIES: &[(&str, Property)] = &[
    ("pbw_confluence", pbw_confluence),
    ("normal_order_idempotent", normal_order_idempotent),
    ("multiply_respects_filtrations", multiply_respects_filtrations),
    ("pr_projection", pr_projection),
    ("pr_action_agrees", pr_action_agrees),
    ("comultiply_multiplicative", comultiply_multiplicative),
    ("comultiply_brackets", comultiply_brackets),
    ("chi_right_linear", chi_right_linear),
    ("lift_factorization", lift_factorization),
    ("action_weights", action_weights),
];

fn runner(seed: u8, cases: u32) -> TestRunner {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::from_seed(RngAlgorithm::ChaCha, &[seed; 32]))
}

fn report<E: std::fmt::Display>(r: Result<(), E>) -> Result<(), String> {
    r.map_err(|e| e.to_string())
}

pub fn algebra(n: usize, part: &[usize], flavor: Flavor) -> PbwAlgebra {
    let spec = build_gl_sl(Kind::Sl, n, part).unwrap();
    let t = grading_tables(&spec).unwrap();
    PbwAlgebra::new(Arc::new(spec), Arc::new(t), flavor)
}

pub fn rep(w: &WAlgebra, name: &str) -> RepSpec {
    let r = match name {
        "natural" => Rep::natural(w.spec()).unwrap(),
        "adjoint" => Rep::adjoint(w.spec()),
        _ => Rep::trivial(w.spec()),
    };
    load_for(w, &r).unwrap()
}

/// Up to three terms with small rational coefficients, monomials drawn from a list.
fn terms() -> impl Strategy<Value = Vec<(Index, i64, i64)>> {
    prop::collection::vec((any::<Index>(), -4i64..=4, 1i64..=3), 1..=3)
}

fn element(monos: &[Mono], t: &[(Index, i64, i64)]) -> PbwElement {
    let mut u = PbwElement::zero();
    for (i, n, d) in t {
        u.add_term(i.get(monos).clone(), Q::new((*n).into(), (*d).into()));
    }
    u
}

fn all_gens(a: &PbwAlgebra) -> Vec<u16> {
    (0..a.ngens() as u16).collect()
}

fn flavors() -> Vec<PbwAlgebra> {
    [Flavor::Plain, Flavor::Tilde, Flavor::Hat].into_iter().map(|f| algebra(3, &[2, 1], f)).collect()
}

/// `(ab)c = a(bc)` on 500 random generator triples per flavor.
pub fn pbw_confluence() -> Result<(), String> {
    for (k, a) in flavors().iter().enumerate() {
        let n = a.ngens();
        report(runner(1 + k as u8, 500).run(&(0..n, 0..n, 0..n), |(x, y, z)| {
            let (x, y, z) = (a.gen(x as u16), a.gen(y as u16), a.gen(z as u16));
            prop_assert_eq!(a.mul(&a.mul(&x, &y), &z), a.mul(&x, &a.mul(&y, &z)));
            Ok(())
        }))?;
    }
    Ok(())
}

pub fn normal_order_idempotent() -> Result<(), String> {
    for (k, a) in flavors().iter().enumerate() {
        let monos = a.monomials(&all_gens(a), 4, 3);
        report(runner(11 + k as u8, 100).run(&(terms(), terms()), |(s, t)| {
            let u = a.mul(&element(&monos, &s), &element(&monos, &t));
            prop_assert_eq!(a.normalize(&u), u);
            Ok(())
        }))?;
    }
    Ok(())
}

/// Kazhdan and loop degrees are subadditive; charge is additive.
pub fn multiply_respects_filtrations() -> Result<(), String> {
    let a = algebra(3, &[2, 1], Flavor::Hat);
    let monos = a.monomials(&all_gens(&a), 4, 3);
    report(runner(21, 200).run(&(any::<Index>(), any::<Index>()), |(i, j)| {
        let (m, n) = (i.get(&monos), j.get(&monos));
        let p = a.mul(&PbwElement::from_mono(m.clone(), Q::from_integer(1.into())), &PbwElement::from_mono(n.clone(), Q::from_integer(1.into())));
        for t in p.terms.keys() {
            prop_assert!(a.mono_kazhdan(t) <= a.mono_kazhdan(m) + a.mono_kazhdan(n));
            prop_assert!(a.mono_loop(t) <= a.mono_loop(m) + a.mono_loop(n));
            prop_assert_eq!(a.mono_charge(t), a.mono_charge(m) + a.mono_charge(n));
        }
        Ok(())
    }))
}

fn ptilde(a: &PbwAlgebra) -> Vec<u16> {
    all_gens(a).into_iter().filter(|&g| a.is_ptilde_gen(g)).collect()
}

/// `Pr∘Pr = Pr` on U(g~) and `Pr = id` on U(p~).
pub fn pr_projection() -> Result<(), String> {
    for (seed, a) in [(31, algebra(2, &[2], Flavor::Tilde)), (32, algebra(3, &[2, 1], Flavor::Tilde)), (33, algebra(3, &[3], Flavor::Tilde))] {
        let monos = a.monomials(&all_gens(&a), 4, 3);
        let p_monos = a.monomials(&ptilde(&a), 4, 3);
        report(runner(seed, 200).run(&(terms(), terms()), |(s, t)| {
            let u = element(&monos, &s);
            let pu = a.pr(&u);
            prop_assert_eq!(a.pr(&pu), pu);
            let v = element(&p_monos, &t);
            prop_assert_eq!(a.pr(&v), v);
            Ok(())
        }))?;
    }
    Ok(())
}

fn n_vector(a: &PbwAlgebra, coeffs: &[i64]) -> Vec<Q> {
    let mut x = vec![Q::from_integer(0.into()); a.spec.dim()];
    for (&b, &c) in a.tables.n_basis.iter().zip(coeffs) {
        x[b] = Q::from_integer(c.into());
    }
    x
}

/// `Pr((x - x^ne - (e|x)) u) = Pr([x - x^ne, Pr(u)])` for x in n.
pub fn pr_action_agrees() -> Result<(), String> {
    for (seed, a) in [(41, algebra(3, &[2, 1], Flavor::Tilde)), (42, algebra(3, &[3], Flavor::Tilde))] {
        let monos = a.monomials(&all_gens(&a), 4, 3);
        let r = a.tables.n_basis.len();
        report(runner(seed, 100).run(&(terms(), prop::collection::vec(-3i64..=3, r)), |(s, c)| {
            let u = element(&monos, &s);
            let x = n_vector(&a, &c);
            prop_assert_eq!(a.dot_via_ideal(&x, &u), a.dot(&x, &a.pr(&u)));
            Ok(())
        }))?;
    }
    Ok(())
}

/// `Δ(uv) = Δ(u)Δ(v)` for the tilde and hat comultiplications.
pub fn comultiply_multiplicative() -> Result<(), String> {
    let target = algebra(3, &[2, 1], Flavor::Plain);
    for (seed, a) in [(51, algebra(3, &[2, 1], Flavor::Tilde)), (52, algebra(3, &[2, 1], Flavor::Hat))] {
        let monos = a.monomials(&all_gens(&a), 4, 2);
        report(runner(seed, 60).run(&(terms(), terms()), |(s, t)| {
            let (u, v) = (element(&monos, &s), element(&monos, &t));
            let lhs = a.comultiply(&a.mul(&u, &v), &target);
            let rhs = a.tensor_mul(&target, &a.comultiply(&u, &target), &a.comultiply(&v, &target));
            prop_assert_eq!(lhs, rhs);
            Ok(())
        }))?;
    }
    Ok(())
}

/// `Δ([x,y]) = [Δ(x), Δ(y)]` on all generator pairs.
pub fn comultiply_brackets() -> Result<(), String> {
    let target = algebra(3, &[2, 1], Flavor::Plain);
    for a in [algebra(3, &[2, 1], Flavor::Tilde), algebra(3, &[3], Flavor::Tilde)] {
        let target = if a.tables.n_basis.len() == target.tables.n_basis.len() { &target } else { &algebra(3, &[3], Flavor::Plain) };
        for x in 0..a.ngens() as u16 {
            for y in 0..a.ngens() as u16 {
                let (gx, gy) = (a.gen(x), a.gen(y));
                let (dx, dy) = (a.comultiply(&gx, target), a.comultiply(&gy, target));
                let mut rhs = a.tensor_mul(target, &dx, &dy);
                for (k, v) in a.tensor_mul(target, &dy, &dx) {
                    let e = rhs.entry(k).or_insert_with(|| Q::from_integer(0.into()));
                    *e -= v;
                }
                rhs.retain(|_, v| *v != Q::from_integer(0.into()));
                if a.comultiply(&a.commutator(&gx, &gy), target) != rhs {
                    return Err(format!("bracket of generators {x}, {y}"));
                }
            }
        }
    }
    Ok(())
}

/// `chi_free(q w) = chi_free(q) w` for q in U(p~) and w a Θ-monomial.
pub fn chi_right_linear() -> Result<(), String> {
    for (seed, name) in [(61, "sl2:[2]"), (62, "sl3:[2,1]")] {
        let w = build_from_shorthand(name, 10).unwrap();
        let monos = w.alg.monomials(&w.ptilde, 4, 3);
        let thetas = theta_monomials(&w, 4);
        report(runner(seed, 40).run(&(terms(), any::<Index>()), |(s, i)| {
            let q = element(&monos, &s);
            let t = w.theta_monomial(i.get(&thetas));
            let lhs = w.chi_free(&w.alg.mul(&q, &t)).unwrap();
            let rhs = w.alg.mul(&w.chi_free(&q).unwrap(), &t);
            prop_assert_eq!(lhs, rhs);
            Ok(())
        }))?;
    }
    Ok(())
}

/// Random block-unitriangular `w` over U(g,e) within the Kazhdan bounds.
fn unitriangular(w: &WAlgebra, rs: &RepSpec, picks: &[(Index, i64)]) -> ElemMatrix {
    let n = rs.dim();
    let alg = &w.alg;
    let mut m: ElemMatrix = (0..n).map(|i| (0..n).map(|j| if i == j { alg.one() } else { PbwElement::zero() }).collect()).collect();
    let mut k = 0;
    for i in 0..n {
        for j in 0..n {
            let (idx, c) = &picks[k % picks.len()];
            k += 1;
            let c = Q::from_integer((*c).into());
            if rs.c[i] < rs.c[j] {
                let monos = theta_monomials(w, rs.bound(i, j));
                m[i][j] = w.theta_monomial(idx.get(&monos)).scaled(&c);
            } else if rs.c[i] == rs.c[j] && i < j {
                m[i][j] = alg.scalar(c);
            }
        }
    }
    m
}

/// `x = x⁰w` is a lift matrix and factors back to `w`.
pub fn lift_factorization() -> Result<(), String> {
    for (seed, name, r) in [(71, "sl2:[2]", "natural"), (72, "sl2:[2]", "adjoint"), (73, "sl3:[2,1]", "natural")] {
        let w = build_from_shorthand(name, 8).unwrap();
        let rs = rep(&w, r);
        let x0 = solve_lift_canonical(&w, &rs).map_err(|e| e.to_string())?;
        let n = rs.dim();
        report(runner(seed, 16).run(&prop::collection::vec((any::<Index>(), -3i64..=3), n * n), |picks| {
            let f = unitriangular(&w, &rs, &picks);
            let x = w.alg.mat_mul(&x0, &f);
            prop_assert!(verify_lift(&w, &rs, &x));
            prop_assert_eq!(lift_factor(&w, &rs, &x0, &x).unwrap(), Some(f));
            Ok(())
        }))?;
    }
    Ok(())
}

/// Entry `(i,j)` of the action of a Θ-monomial has weight `α_j - α_i + wt`.
pub fn action_weights() -> Result<(), String> {
    for (seed, name, r) in [(81, "sl3:[2,1]", "natural"), (82, "sl3:[2,1]", "adjoint"), (83, "sl3:[3]", "natural")] {
        let w = build_from_shorthand(name, 12).unwrap();
        let rs = rep(&w, r);
        let x0 = solve_lift_canonical(&w, &rs).map_err(|e| e.to_string())?;
        let thetas = theta_monomials(&w, 4);
        report(runner(seed, 12).run(&any::<Index>(), |i| {
            let b = i.get(&thetas);
            let act = translation_action(&w, &rs, &x0, &w.theta_monomial(b)).unwrap();
            prop_assert!(action_weight_check(&w, &rs, &w.theta_mono_weight(b), &act));
            Ok(())
        }))?;
    }
    Ok(())
}
