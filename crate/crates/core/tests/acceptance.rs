//! End-to-end acceptance run: one PASS/FAIL line per criterion, exact arithmetic throughout.

mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use proptest::prelude::*;
use proptest::sample::Index;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use walgebra::brst::Brst;
use walgebra::hw::{translate_verma_factors, BaseModule, HwContext, HwError, TranslatedVerma, VermaTruncation};
use walgebra::pbw::{Mono, PbwElement};
use walgebra::ratlin::{q, qr, Q};
use walgebra::trans::{
    action_via_inverse, check_homomorphism, equivariance_check, loop_character_check, solve_lift_canonical, theta_pairs,
    translation_action, verify_lift, TransError,
};
use walgebra::walg::{build_from_shorthand, WAlgebra, WalgError};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn walg(name: &str, degree: i32) -> Result<WAlgebra, String> {
    build_from_shorthand(name, degree).map_err(|e| format!("{name}: {e}"))
}

fn overflow(e: &TransError) -> Option<i32> {
    match e {
        TransError::Walg(WalgError::DegreeOverflow(k, _)) => Some(*k),
        _ => None,
    }
}

/// Runs `f` at increasing working degrees until no Kazhdan-degree overflow remains.
fn escalating<T>(name: &str, start: i32, mut f: impl FnMut(&WAlgebra) -> Result<T, TransError>) -> Result<(T, i32), String> {
    let mut degree = start;
    loop {
        let w = walg(name, degree)?;
        match f(&w) {
            Ok(t) => return Ok((t, degree)),
            Err(e) => match overflow(&e) {
                Some(k) if degree < 40 => degree = k.max(degree + 1),
                _ => return Err(format!("{name}: {e}")),
            },
        }
    }
}

fn elem(w: &WAlgebra, label: &str) -> PbwElement {
    let alg = &w.alg;
    alg.gen(alg.g_index(w.spec().index_of(label).unwrap()))
}

fn one() -> Q {
    q(1)
}

/// Fixtures shared by the lift, equivariance and duality criteria.
const FIXTURES: [(&str, &str, i32); 6] = [
    ("sl2:[2]", "natural", 8),
    ("sl2:[2]", "adjoint", 8),
    ("sl3:[2,1]", "natural", 8),
    ("sl3:[2,1]", "adjoint", 8),
    ("sl3:[3]", "natural", 8),
    ("sl3:[3]", "adjoint", 12),
];

fn kostant() -> Outcome {
    let w = walg("sl2:[2]", 12)?;
    let want: Vec<usize> = (0..=12).map(|j| j / 4 + 1).collect();
    let (counted, oracle) = (w.graded_dims(12), w.oracle_dims(12));
    ensure(counted == want && oracle == want, || format!("dims {counted:?}, oracle {oracle:?}, expected {want:?}"))?;
    let (e, h) = (elem(&w, "e12"), elem(&w, "h1"));
    let h2 = w.alg.mul(&h, &h);
    let quarter = qr(1, 4);
    let left = e.add(&h2.scaled(&quarter)).sub(&h.scaled(&qr(1, 2)));
    ensure(w.theta.len() == 1 && w.theta[0] == left, || format!("Θ(e) = {}", w.alg.show(&w.theta[0])))?;
    // The +½h normalization is the invariant for the right-handed action.
    let right = e.add(&h2.scaled(&quarter)).add(&h.scaled(&qr(1, 2)));
    ensure(w.is_invariant_right(&right) && !w.is_invariant(&right), || "e + ¼h² + ½h is not the right-handed invariant".into())?;
    Ok("dims 1,1,1,1,2,2,2,2,3,3,3,3,4; Θ(e) = e + ¼h² − ½h (left action), e + ¼h² + ½h right-invariant".into())
}

fn regular_sl3() -> Outcome {
    let mut out = Vec::new();
    for name in ["sl3:[3]", "sl3:[2,1]"] {
        let w = walg(name, 8)?;
        let (counted, oracle) = (w.graded_dims(8), w.oracle_dims(8));
        ensure(counted == oracle, || format!("{name}: Θ-monomials {counted:?}, invariant solve {oracle:?}"))?;
        out.push(format!("{name} {counted:?}"));
    }
    Ok(out.join("; "))
}

fn lifts() -> Outcome {
    for (name, rep) in [("sl2:[2]", "natural"), ("sl2:[2]", "adjoint"), ("sl3:[2,1]", "natural"), ("sl3:[3]", "natural")] {
        let w = walg(name, 8)?;
        let rs = common::rep(&w, rep);
        let x = solve_lift_canonical(&w, &rs).map_err(|e| format!("{name} {rep}: {e}"))?;
        ensure(verify_lift(&w, &rs, &x), || format!("{name} {rep}: lift equations fail"))?;
    }
    let w = walg("sl2:[2]", 8)?;
    let x = solve_lift_canonical(&w, &common::rep(&w, "natural")).unwrap();
    let want = vec![vec![w.alg.one(), PbwElement::zero()], vec![elem(&w, "h1").scaled(&qr(-1, 2)), w.alg.one()]];
    ensure(x == want, || "sl2 natural x⁰ differs from [[1,0],[−h/2,1]]".into())?;
    Ok("unique lifts for 4 fixtures; sl2 natural x⁰ = [[1,0],[−h/2,1]]".into())
}

fn homomorphism() -> Outcome {
    let mut out = Vec::new();
    for (name, rep) in [("sl2:[2]", "natural"), ("sl2:[2]", "adjoint"), ("sl3:[2,1]", "natural")] {
        let (r, degree) = escalating(name, 8, |w| {
            let rs = common::rep(w, rep);
            let x = solve_lift_canonical(w, &rs)?;
            check_homomorphism(w, &rs, &x, &w.theta, &theta_pairs(w, 8))
        })?;
        ensure(r.passed(), || format!("{name} {rep}: fails at {:?}", r.first_failure))?;
        out.push(format!("{name} {rep} {} pairs at degree {degree}", r.checked));
    }
    let w = walg("sl2:[2]", 8)?;
    let rs = common::rep(&w, "natural");
    let x = solve_lift_canonical(&w, &rs).unwrap();
    let u = &w.theta[0];
    let act = translation_action(&w, &rs, &x, u).map_err(|e| e.to_string())?;
    let s = |c: Q| w.alg.scalar(c);
    let want = vec![vec![u.add(&s(qr(-1, 4))), w.alg.one()], vec![u.clone(), u.add(&s(qr(3, 4)))]];
    ensure(act.entries == want, || "sl2 natural action of Θ(e) differs from [[u−¼,1],[u,u+¾]]".into())?;
    let oracle = action_via_inverse(&w, &rs, &x, u).map_err(|e| e.to_string())?;
    ensure(oracle == act, || "inverse-path oracle disagrees".into())?;
    out.push("sl2 natural Θ(e) ↦ [[u−¼,1],[u,u+¾]]".into());
    Ok(out.join("; "))
}

fn equivariance() -> Outcome {
    for (name, rep, degree) in FIXTURES {
        let ((equi, lp), _) = escalating(name, degree, |w| {
            let rs = common::rep(w, rep);
            let x = solve_lift_canonical(w, &rs)?;
            Ok((equivariance_check(w, &rs, &x)?, loop_character_check(w, &rs, &x)?))
        })?;
        ensure(equi && lp, || format!("{name} {rep}: equivariance {equi}, loop {lp}"))?;
    }
    Ok(format!("{} fixtures", FIXTURES.len()))
}

fn one_elem(m: &Mono) -> PbwElement {
    PbwElement::from_mono(m.clone(), one())
}

fn brst() -> Outcome {
    let mut out = Vec::new();
    for (seed, name) in [(91u8, "sl2:[2]"), (92, "sl3:[2,1]")] {
        let w = walg(name, 8)?;
        let b = Brst::new(&w).map_err(|e| format!("{name}: {e}"))?;
        let h = &b.hat;
        let all: Vec<u16> = (0..h.ngens() as u16).collect();
        // Kazhdan pieces of U(ĝ) are infinite-dimensional (f has degree 0); the span is cut by PBW length.
        let span = h.monomials(&all, 6, 3);
        if let Some(m) = span.iter().map(one_elem).find(|m| !b.d(&b.d(m)).is_zero()) {
            return Err(format!("{name}: d² ≠ 0 on {}", h.show(&m)));
        }
        let basis = w.alg.monomials(&w.ptilde, 6, u32::MAX);
        for m in basis.iter().map(one_elem) {
            let got = b.membership(&m).map_err(|e| e.to_string())?;
            ensure(got == w.is_invariant(&m), || format!("{name}: membership disagrees on {}", w.alg.show(&m)))?;
        }
        let small = w.alg.monomials(&w.ptilde, 4, u32::MAX);
        let mut runner = TestRunner::new_with_rng(
            Config { cases: 100, failure_persistence: None, ..Config::default() },
            TestRng::from_seed(RngAlgorithm::ChaCha, &[seed; 32]),
        );
        let terms = prop::collection::vec((any::<Index>(), -4i64..=4, 1i64..=3), 1..=4);
        runner
            .run(&terms, |t| {
                let mut u = PbwElement::zero();
                for (i, n, d) in &t {
                    u.add_term(i.get(&small).clone(), qr(*n, *d));
                }
                prop_assert_eq!(b.mess_identity(&u).ok(), Some(true));
                Ok(())
            })
            .map_err(|e| format!("{name}: mess identity: {e}"))?;
        for level in 0..=4 {
            let r = b.kernel_split(level, 2).map_err(|e| e.to_string())?;
            ensure(r.passed(), || format!("{name}: kernel split at level {level}: {r:?}"))?;
        }
        out.push(format!("{name}: d² on {} monomials, membership on {}", span.len(), basis.len()));
    }
    Ok(out.join("; "))
}

fn dualizability() -> Outcome {
    for (name, rep, degree) in FIXTURES {
        let w = walg(name, degree)?;
        let b = Brst::new(&w).map_err(|e| e.to_string())?;
        let rs = common::rep(&w, rep);
        let x = solve_lift_canonical(&w, &rs).map_err(|e| format!("{name} {rep}: {e}"))?;
        let pair = b.dualize_lift(&rs, &x).map_err(|e| format!("{name} {rep}: {e}"))?;
        ensure(b.verify_pair(&rs, &pair), || format!("{name} {rep}: dualizable pair fails"))?;
        ensure(b.verify_right_lift(&rs, &b.inverse_lift(&x)), || format!("{name} {rep}: inverse lift fails"))?;
        for (i, t) in w.theta.iter().enumerate().filter(|(i, _)| w.theta_kazhdan(*i) <= 4) {
            let ok = b.duality_action_check(&rs, &x, t).map_err(|e| format!("{name} {rep} Θ{i}: {e}"))?;
            ensure(ok, || format!("{name} {rep}: duality fails on Θ{i}"))?;
        }
    }
    Ok(format!("{} fixtures", FIXTURES.len()))
}

fn hw_overflow(e: &HwError) -> Option<i32> {
    match e {
        HwError::Walg(WalgError::DegreeOverflow(k, _)) | HwError::Trans(TransError::Walg(WalgError::DegreeOverflow(k, _))) => Some(*k),
        _ => None,
    }
}

fn verma() -> Outcome {
    let mut degree = 8;
    for lam in [q(0), qr(5, 2), q(-7)] {
        loop {
            let w = walg("sl3:[2,1]", degree)?;
            let rs = common::rep(&w, "natural");
            let res = (|| {
                let ctx = HwContext::new(&w)?;
                let l = BaseModule::one_dim(&ctx, &[lam.clone()], &BTreeMap::new())?;
                let v = VermaTruncation::new(&ctx, l, 3)?;
                translate_verma_factors(&TranslatedVerma::new(&v, &rs)?)
            })();
            match res {
                Ok(rep) => {
                    let got: Vec<(Q, usize)> = rep.factors.iter().map(|f| (f.weight[0].clone(), f.dim)).collect();
                    let want = vec![(&lam + q(1), 1), (&lam + q(1), 1), (&lam - q(2), 1)];
                    ensure(got == want, || format!("λ₀ = {lam}: factors {got:?}"))?;
                    ensure(rep.factors.iter().all(|f| f.certified), || format!("λ₀ = {lam}: uncertified factor"))?;
                    ensure(rep.character_identity, || format!("λ₀ = {lam}: character identity fails"))?;
                    break;
                }
                Err(e) => match hw_overflow(&e) {
                    Some(k) if degree < 40 => degree = k.max(degree + 1),
                    _ => return Err(format!("λ₀ = {lam}: {e}")),
                },
            }
        }
    }
    Ok(format!("λ₀ ∈ {{0, 5/2, −7}}, depth 3, working degree {degree}"))
}

fn properties() -> Outcome {
    for (name, p) in common::PROPERTIES {
        p().map_err(|e| format!("{name}: {e}"))?;
    }
    Ok(format!("{} properties", common::PROPERTIES.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("Kostant case", kostant),
        ("graded dimensions for sl3", regular_sl3),
        ("lift matrices", lifts),
        ("translation is a homomorphism", homomorphism),
        ("equivariance and loop compatibility", equivariance),
        ("BRST channel", brst),
        ("dualizability", dualizability),
        ("Verma filtration", verma),
        ("property suites", properties),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail} [{secs:.1}s]", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail} [{secs:.1}s]", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
