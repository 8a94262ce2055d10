//! The verification suites behind each subcommand.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use walgebra::brst::{Brst, BrstError, CheckJson};
use walgebra::hw::{translate_verma_factors, BaseModule, HwContext, HwError, TranslatedVerma, VermaTruncation};
use walgebra::liedata::{validate_good_grading, AlgebraSpec};
use walgebra::pbw::{Mono, PbwElement};
use walgebra::ratlin::{fmt_q, Q};
use walgebra::trans::{
    action_json, action_unchecked, action_via_inverse, action_weight_check, check_homomorphism, equivariance_check,
    loop_character_check, solve_lift_canonical, theta_pairs, translation_action, verify_lift, ElemMatrix, RepSpec,
    TransError,
};
use walgebra::walg::{show_coords, WAlgebra, WalgError};

use crate::config::{build_walgebra, load_rep, ConfigError, JobConfig};
use crate::report::SuiteReport;

fn weight_json(w: &[Q]) -> Vec<String> {
    w.iter().map(fmt_q).collect()
}

fn matrix_json(w: &WAlgebra, x: &ElemMatrix) -> Value {
    json!({
        "show": x.iter().map(|r| r.iter().map(|e| w.alg.show(e)).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "terms": x.iter().map(|r| r.iter().map(|e| e.to_json()).collect::<Vec<_>>()).collect::<Vec<_>>(),
    })
}

fn mono_elem(m: &Mono) -> PbwElement {
    PbwElement::from_mono(m.clone(), Q::from_integer(1.into()))
}

fn with_problems(c: CheckJson, problems: &[String]) -> CheckJson {
    if problems.is_empty() {
        c
    } else {
        c.detail(problems.join("; "))
    }
}

pub fn alg_suite(cfg: &JobConfig, spec: &AlgebraSpec) -> SuiteReport {
    let structure = spec.validate();
    let grading = validate_good_grading(spec);
    let checks = vec![
        with_problems(CheckJson::new("structure", structure.is_empty()), &structure),
        with_problems(CheckJson::new("good_grading", grading.is_empty()), &grading),
    ];
    let data = json!({
        "algebra": spec.to_json(),
        "te": spec.te.iter().map(|t| spec.show(t)).collect::<Vec<_>>(),
    });
    SuiteReport::new("alg", cfg, checks, data)
}

pub fn gens_suite(cfg: &JobConfig, w: &WAlgebra) -> SuiteReport {
    let mut checks = Vec::new();
    let mut gens = Vec::new();
    for (i, t) in w.theta.iter().enumerate() {
        checks.push(CheckJson::new(format!("theta_{i}_invariant"), w.is_invariant(t)).witness(t));
        gens.push(json!({
            "index": i,
            "centralizer_vector": w.spec().show(&w.ge[i]),
            "kazhdan": w.theta_kazhdan(i),
            "weight": weight_json(&w.ge_weight[i]),
            "element": w.alg.show(t),
            "terms": t.to_json(),
        }));
    }
    SuiteReport::new("gens", cfg, checks, json!({ "theta": gens }))
}

pub fn dims_suite(cfg: &JobConfig, w: &WAlgebra) -> SuiteReport {
    let d = cfg.max_degree;
    let counted = w.graded_dims(d);
    let oracle = w.oracle_dims(d);
    let check = CheckJson::new("dims_match_oracle", counted == oracle).detail(format!("j ≤ {d}"));
    SuiteReport::new("dims", cfg, vec![check], json!({ "theta_monomials": counted, "invariant_solve": oracle }))
}

/// Errors that may carry a Kazhdan-degree overflow.
trait Overflow: std::fmt::Display {
    fn overflow(&self) -> Option<i32>;
}

impl Overflow for WalgError {
    fn overflow(&self) -> Option<i32> {
        match self {
            WalgError::DegreeOverflow(k, _) => Some(*k),
            _ => None,
        }
    }
}

impl Overflow for TransError {
    fn overflow(&self) -> Option<i32> {
        match self {
            TransError::Walg(e) => e.overflow(),
            _ => None,
        }
    }
}

impl Overflow for BrstError {
    fn overflow(&self) -> Option<i32> {
        match self {
            BrstError::Walg(e) => e.overflow(),
            BrstError::Trans(e) => e.overflow(),
            _ => None,
        }
    }
}

impl Overflow for HwError {
    fn overflow(&self) -> Option<i32> {
        match self {
            HwError::Walg(e) => e.overflow(),
            HwError::Trans(e) => e.overflow(),
            _ => None,
        }
    }
}

const DEGREE_CAP: i32 = 40;

/// Working degree actually used and the raises that led to it.
struct Escalation {
    degree: i32,
    raises: Vec<Value>,
}

impl Escalation {
    fn json(&self) -> Value {
        json!({ "working_degree": self.degree, "degree_raises": self.raises })
    }
}

/// Runs `f` at `--max-deg`, rebuilding U(g,e) at the reported degree after each
/// Kazhdan-degree overflow. Every raise is recorded; other errors are returned.
fn escalate<T, E: Overflow>(
    cfg: &JobConfig,
    spec: &AlgebraSpec,
    w: &WAlgebra,
    rs: &RepSpec,
    mut f: impl FnMut(&WAlgebra, &RepSpec) -> Result<T, E>,
) -> Result<(Result<T, String>, Escalation), ConfigError> {
    let mut esc = Escalation { degree: cfg.max_degree, raises: Vec::new() };
    let mut raised: Option<(WAlgebra, RepSpec)> = None;
    loop {
        let (wd, rd) = raised.as_ref().map_or((w, rs), |(a, b)| (a, b));
        match f(wd, rd) {
            Ok(t) => return Ok((Ok(t), esc)),
            Err(e) => match e.overflow() {
                Some(k) if esc.degree < DEGREE_CAP => {
                    let next = k.max(esc.degree + 1).min(DEGREE_CAP);
                    esc.raises.push(json!({ "from": esc.degree, "to": next, "reason": e.to_string() }));
                    esc.degree = next;
                    let wn = build_walgebra(spec.clone(), next).map_err(ConfigError)?;
                    let rn = load_rep(&wn, &cfg.rep)?;
                    raised = Some((wn, rn));
                }
                _ => return Ok((Err(e.to_string()), esc)),
            },
        }
    }
}

fn merge(mut a: Value, b: Value) -> Value {
    if let (Some(a), Value::Object(b)) = (a.as_object_mut(), b) {
        a.extend(b);
    }
    a
}

pub fn lift_suite(cfg: &JobConfig, spec: &AlgebraSpec, w: &WAlgebra, rs: &RepSpec) -> Result<SuiteReport, ConfigError> {
    let (res, esc) = escalate(cfg, spec, w, rs, |w, rs| {
        let x = solve_lift_canonical(w, rs)?;
        let ok = verify_lift(w, rs, &x);
        let data = json!({
            "grading_eigenvalues": weight_json(&rs.c),
            "basis_order": rs.perm,
            "x0": matrix_json(w, &x),
        });
        Ok::<_, TransError>((ok, data))
    })?;
    let (checks, data) = match res {
        Ok((ok, data)) => (vec![CheckJson::new("unique_lift", true), CheckJson::new("lift_equations", ok)], data),
        Err(e) => (vec![CheckJson::new("unique_lift", false).detail(e)], json!({})),
    };
    Ok(SuiteReport::new("lift", cfg, checks, merge(data, esc.json())))
}

pub fn act_suite(cfg: &JobConfig, spec: &AlgebraSpec, w: &WAlgebra, rs: &RepSpec) -> Result<SuiteReport, ConfigError> {
    let (res, esc) = escalate(cfg, spec, w, rs, |w, rs| {
        let x = solve_lift_canonical(w, rs)?;
        let mut checks = Vec::new();
        let mut acts = Vec::new();
        for (i, t) in w.theta.iter().enumerate() {
            let a = translation_action(w, rs, &x, t)?;
            checks.push(CheckJson::new(format!("theta_{i}_weights"), action_weight_check(w, rs, &w.ge_weight[i], &a)));
            acts.push(json!({
                "index": i,
                "show": a.coords.iter().map(|r| r.iter().map(|c| show_coords(w, c)).collect::<Vec<_>>()).collect::<Vec<_>>(),
                "coords": action_json(&a),
            }));
        }
        Ok::<_, TransError>((checks, acts))
    })?;
    let (checks, acts) = match res {
        Ok(r) => r,
        Err(e) => (vec![CheckJson::new("action", false).detail(e)], Vec::new()),
    };
    Ok(SuiteReport::new("act", cfg, checks, merge(json!({ "actions": acts }), esc.json())))
}

/// Homomorphism on all Θ-pairs of degree sum ≤ `--max-deg`, equivariance, the
/// loop character and the inverse-path oracle. Action entries can exceed the
/// degree of the acting element, so the working degree may be raised.
pub fn trans_suite(cfg: &JobConfig, spec: &AlgebraSpec, w: &WAlgebra, rs: &RepSpec) -> Result<SuiteReport, ConfigError> {
    let (res, esc) = escalate(cfg, spec, w, rs, |w, rs| {
        let pairs = theta_pairs(w, cfg.max_degree);
        let x = solve_lift_canonical(w, rs)?;
        let hom = check_homomorphism(w, rs, &x, &w.theta, &pairs)?;
        let equi = equivariance_check(w, rs, &x)?;
        let lp = loop_character_check(w, rs, &x)?;
        let mut agree = true;
        for t in &w.theta {
            agree &= action_unchecked(w, rs, &x, t)? == action_via_inverse(w, rs, &x, t)?;
        }
        Ok::<_, TransError>((hom, equi, lp, agree))
    })?;
    let checks = match res {
        Ok((hom, equi, lp, agree)) => {
            let d = match hom.first_failure {
                Some((a, b)) => format!("{} pairs, fails at ({a},{b})", hom.checked),
                None => format!("{} pairs", hom.checked),
            };
            vec![
                CheckJson::new("homomorphism", hom.passed()).detail(d),
                CheckJson::new("equivariance", equi),
                CheckJson::new("loop_character", lp),
                CheckJson::new("inverse_path", agree),
            ]
        }
        Err(e) => vec![CheckJson::new("translate", false).detail(e)],
    };
    Ok(SuiteReport::new("trans", cfg, checks, esc.json()))
}

/// Random combination of up to four monomials drawn from `monos`.
fn random_element(monos: &[Mono], rng: &mut ChaCha8Rng) -> PbwElement {
    let mut u = PbwElement::zero();
    for _ in 0..rng.gen_range(1..=4) {
        let m = &monos[rng.gen_range(0..monos.len())];
        u.add_term(m.clone(), Q::new(rng.gen_range(-5..=5i64).into(), rng.gen_range(1..=3i64).into()));
    }
    u
}

/// Dualized lift, the inverse-lift cross-check and duality on Θ-generators of degree ≤ 4.
fn duality_block(w: &WAlgebra, rs: &RepSpec) -> Result<(Vec<CheckJson>, Value), BrstError> {
    let b = Brst::new(w)?;
    let x0 = solve_lift_canonical(w, rs)?;
    let p = b.dualize_lift(rs, &x0)?;
    let mut checks = vec![
        CheckJson::new("dualize_lift", b.verify_pair(rs, &p)),
        CheckJson::new("inverse_lift", b.verify_right_lift(rs, &b.inverse_lift(&x0))),
    ];
    let mut failed = None;
    for (i, t) in w.theta.iter().enumerate().filter(|(i, _)| w.theta_kazhdan(*i) <= 4) {
        if !b.duality_action_check(rs, &x0, t)? {
            failed = Some(i);
            break;
        }
    }
    let detail = failed.map_or("Θ-generators of degree ≤ 4".to_string(), |i| format!("fails on Θ-generator {i}"));
    checks.push(CheckJson::new("duality_action", failed.is_none()).detail(detail));
    let data = json!({ "x": matrix_json(w, &p.x), "y": matrix_json(w, &p.y), "w": matrix_json(w, &p.w) });
    Ok((checks, data))
}

/// BRST checks; the duality block raises its working degree after each overflow.
pub fn brst_suite(cfg: &JobConfig, spec: &AlgebraSpec, w: &WAlgebra, rs: &RepSpec) -> Result<SuiteReport, ConfigError> {
    let b = match Brst::new(w) {
        Ok(b) => b,
        Err(e) => return Ok(SuiteReport::new("brst", cfg, vec![CheckJson::new("delta_square", false).detail(e.to_string())], Value::Null)),
    };
    let mut checks = vec![CheckJson::new("delta_square", true)];
    let h = &b.hat;
    let top = cfg.max_degree.min(6);
    let all: Vec<u16> = (0..h.ngens() as u16).collect();
    let span = h.monomials(&all, top, 2);
    let bad = span.iter().map(mono_elem).find(|m| !b.d(&b.d(m)).is_zero());
    checks.push(CheckJson::new("d_squared", bad.is_none()).detail(format!("{} monomials, Kazhdan ≤ {top}, length ≤ 2", span.len())));
    if let Some(m) = bad {
        checks.last_mut().unwrap().counterexample = Some(m.to_json());
    }

    let basis = w.alg.monomials(&w.ptilde, top, u32::MAX);
    let mut first_bad = None;
    for m in basis.iter().map(mono_elem).chain(w.theta.iter().cloned()) {
        if b.membership(&m).ok() != Some(w.is_invariant(&m)) {
            first_bad = Some(m);
            break;
        }
    }
    let mut c = CheckJson::new("membership_vs_invariance", first_bad.is_none()).detail(format!("F_{top} basis and Θ-generators"));
    c.counterexample = first_bad.map(|m| m.to_json());
    checks.push(c);

    let small = w.alg.monomials(&w.ptilde, 4, u32::MAX);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut mess_bad = None;
    for _ in 0..100 {
        let u = random_element(&small, &mut rng);
        if b.mess_identity(&u).ok() != Some(true) {
            mess_bad = Some(u);
            break;
        }
    }
    let mut c = CheckJson::new("mess_identity", mess_bad.is_none()).detail("100 random elements of F_4");
    c.counterexample = mess_bad.map(|m| m.to_json());
    checks.push(c);
    let q_ok = small.iter().map(mono_elem).all(|m| b.phi(&m).and_then(|p| b.q(&p)).ok() == Some(m.clone()));
    checks.push(CheckJson::new("q_after_phi", q_ok));
    let pp_ok = small.iter().map(mono_elem).all(|m| b.phi_prime(&m).ok() == b.phi_prime_direct(&m).ok());
    checks.push(CheckJson::new("phi_prime", pp_ok));

    let mut blocks = Vec::new();
    let mut split_ok = true;
    for level in 0..=3 {
        match b.kernel_split(level, 2) {
            Ok(r) => {
                split_ok &= r.passed();
                blocks.push(r);
            }
            Err(_) => split_ok = false,
        }
    }
    checks.push(CheckJson::new("kernel_split", split_ok).detail("charge 0, levels ≤ 3"));

    let (res, esc) = escalate(cfg, spec, w, rs, duality_block)?;
    let (dual_checks, dual) = match res {
        Ok(r) => r,
        Err(e) => (vec![CheckJson::new("duality", false).detail(e)], Value::Null),
    };
    checks.extend(dual_checks);
    let leib = h.monomials(&all, 4, 2);
    let n = rs.dim();
    let mut leib_ok = true;
    for _ in 0..20 {
        let unit = |rng: &mut ChaCha8Rng| {
            let mut m: ElemMatrix = vec![vec![PbwElement::zero(); n]; n];
            let mono = &leib[rng.gen_range(0..leib.len())];
            m[rng.gen_range(0..n)][rng.gen_range(0..n)] = mono_elem(mono);
            m
        };
        let (x, y) = (unit(&mut rng), unit(&mut rng));
        leib_ok &= b.d_end_leibniz(rs, &x, &y);
    }
    checks.push(CheckJson::new("d_end_leibniz", leib_ok).detail("20 random pairs"));
    let mut dv_ok = true;
    for _ in 0..20 {
        let v: Vec<PbwElement> = (0..n).map(|_| random_element(&leib, &mut rng)).collect();
        dv_ok &= b.d_on_tensor(rs, &b.d_on_tensor(rs, &v)).iter().all(PbwElement::is_zero);
    }
    checks.push(CheckJson::new("d_v_squared", dv_ok).detail("20 random tensors"));
    Ok(SuiteReport::new("brst", cfg, checks, merge(json!({ "blocks": blocks, "dualizable_pair": dual }), esc.json())))
}

/// Translates the quasi-Verma module of a one-dimensional `L` by the chosen
/// representation, raising the working degree after each overflow.
pub fn verma_suite(cfg: &JobConfig, spec: &AlgebraSpec, w: &WAlgebra, rs: &RepSpec) -> Result<SuiteReport, ConfigError> {
    let lambda = cfg.lambda_values(spec.te.len())?;
    let labels: Vec<String> = (1..=spec.te.len()).map(|k| format!("t{k}")).collect();
    let (res, esc) = escalate(cfg, spec, w, rs, |w, rs| {
        let ctx = HwContext::new(w)?;
        let l = BaseModule::one_dim(&ctx, &lambda, &BTreeMap::new())?;
        let v = VermaTruncation::new(&ctx, l, cfg.depth)?;
        translate_verma_factors(&TranslatedVerma::new(&v, rs)?)
    })?;
    let (checks, data) = match res {
        Ok(rep) => (
            vec![
                CheckJson::new("factors_certified", rep.factors.iter().all(|f| f.certified)),
                CheckJson::new("character_identity", rep.character_identity),
            ],
            json!({
                "lambda": weight_json(&lambda),
                "sign": rep.sign,
                "factors": rep.to_json(&labels),
                "layers": rep.layers.iter().map(|f| json!({"weight": weight_json(&f.weight), "dim": f.dim})).collect::<Vec<_>>(),
                "window": rep.window.iter().map(|w| weight_json(w)).collect::<Vec<_>>(),
            }),
        ),
        Err(e) => (vec![CheckJson::new("translate", false).detail(e)], json!({})),
    };
    Ok(SuiteReport::new("verma", cfg, checks, merge(data, esc.json())))
}
