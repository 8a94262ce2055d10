//! Job configuration, input loading and the W-basis cache.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use walgebra::liedata::{build_gl_sl, parse_builder, AlgebraJson, AlgebraSpec, Rep};
use walgebra::ratlin::{parse_q, Q};
use walgebra::trans::{load_for, RepJson, RepSpec};
use walgebra::walg::{WAlgebra, WBasisJson};

/// Environment variable naming the W-basis cache directory.
pub const CACHE_ENV: &str = "WALG_CACHE_DIR";

pub const SUITES: [&str; 8] = ["alg", "gens", "dims", "lift", "act", "trans", "brst", "verma"];

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn cfg<E: fmt::Display>(what: &str) -> impl Fn(E) -> ConfigError + '_ {
    move |e| ConfigError(format!("{what}: {e}"))
}

#[derive(Clone, Debug, Serialize)]
pub struct JobConfig {
    pub alg: String,
    pub rep: String,
    pub max_degree: i32,
    pub depth: usize,
    pub suites: Vec<String>,
    pub lambda: Option<Vec<String>>,
    pub seed: u64,
}

impl JobConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_degree < 4 {
            return Err(ConfigError(format!("--max-deg must be at least 4, got {}", self.max_degree)));
        }
        if let Some(bad) = self.suites.iter().find(|s| !SUITES.contains(&s.as_str())) {
            return Err(ConfigError(format!("unknown suite {bad:?}; expected one of {}", SUITES.join(","))));
        }
        for (flag, v) in [("--alg", &self.alg), ("--rep", &self.rep)] {
            if looks_like_path(v) && !Path::new(v).exists() {
                return Err(ConfigError(format!("{flag} file {v} does not exist")));
            }
        }
        Ok(())
    }

    pub fn lambda_values(&self, n: usize) -> Result<Vec<Q>, ConfigError> {
        let given: Option<Vec<&String>> = self.lambda.as_ref().map(|v| v.iter().filter(|s| !s.is_empty()).collect());
        match given {
            None => Ok(vec![Q::default(); n]),
            Some(v) if v.len() == n => v.iter().map(|s| parse_q(s).map_err(cfg("--lambda"))).collect(),
            Some(v) => Err(ConfigError(format!("--lambda needs {n} values, got {}", v.len()))),
        }
    }
}

fn looks_like_path(s: &str) -> bool {
    s.ends_with(".json") || s.contains('/')
}

/// Builds the algebra from a builder shorthand (`sl3:[2,1]`) or a JSON file.
pub fn load_algebra(src: &str) -> Result<AlgebraSpec, ConfigError> {
    if looks_like_path(src) {
        let text = fs::read_to_string(src).map_err(cfg("--alg"))?;
        let j: AlgebraJson = serde_json::from_str(&text).map_err(cfg("--alg"))?;
        return j.build().map_err(cfg("--alg"));
    }
    let (kind, n, part) = parse_builder(src).ok_or_else(|| ConfigError(format!("--alg: cannot parse {src:?}")))?;
    build_gl_sl(kind, n, &part).map_err(cfg("--alg"))
}

pub fn load_rep(w: &WAlgebra, src: &str) -> Result<RepSpec, ConfigError> {
    let spec = w.spec();
    let rep = match src {
        "natural" => Rep::natural(spec).ok_or_else(|| ConfigError("--rep natural: algebra has no natural representation".into()))?,
        "adjoint" => Rep::adjoint(spec),
        "trivial" => Rep::trivial(spec),
        path if looks_like_path(path) => {
            let text = fs::read_to_string(path).map_err(cfg("--rep"))?;
            let j: RepJson = serde_json::from_str(&text).map_err(cfg("--rep"))?;
            j.to_rep(spec, path).map_err(cfg("--rep"))?
        }
        other => return Err(ConfigError(format!("--rep: unknown representation {other:?}"))),
    };
    load_for(w, &rep).map_err(cfg("--rep"))
}

/// Content-hash file name for the W-basis of an algebra at a degree bound.
pub fn cache_key(spec: &AlgebraSpec, max_degree: i32) -> String {
    let body = serde_json::to_string(&spec.to_json()).expect("algebra serializes");
    let mut h = Sha256::new();
    h.update(body.as_bytes());
    h.update(max_degree.to_le_bytes());
    format!("{}.json", hex::encode(h.finalize()))
}

/// Builds U(g,e), reusing a cached W-basis when the cache directory is set.
/// Cached generators are re-checked for invariance on load.
pub fn build_walgebra(spec: AlgebraSpec, max_degree: i32) -> Result<WAlgebra, String> {
    let dir = std::env::var_os(CACHE_ENV).map(PathBuf::from);
    let path = dir.as_ref().map(|d| d.join(cache_key(&spec, max_degree)));
    if let Some(p) = &path {
        if let Ok(text) = fs::read_to_string(p) {
            if let Ok(j) = serde_json::from_str::<WBasisJson>(&text) {
                if let Ok(w) = WAlgebra::from_cached(spec.clone(), &j) {
                    return Ok(w);
                }
            }
        }
    }
    let w = WAlgebra::build(spec, max_degree).map_err(|e| e.to_string())?;
    if let (Some(d), Some(p)) = (&dir, &path) {
        let body = serde_json::to_string(&w.to_json()).expect("basis serializes");
        // A failed cache write only costs a rebuild next time.
        let _ = fs::create_dir_all(d).and_then(|_| fs::write(p, body));
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn job() -> JobConfig {
        JobConfig {
            alg: "sl2:[2]".into(),
            rep: "natural".into(),
            max_degree: 8,
            depth: 3,
            suites: vec!["gens".into()],
            lambda: None,
            seed: 0,
        }
    }

    #[test]
    fn validation() {
        assert!(job().validate().is_ok());
        assert!(JobConfig { max_degree: 3, ..job() }.validate().is_err());
        assert!(JobConfig { suites: vec!["nope".into()], ..job() }.validate().is_err());
        assert!(JobConfig { rep: "absent/rep.json".into(), ..job() }.validate().is_err());
    }

    #[test]
    fn lambda_parsing() {
        assert_eq!(job().lambda_values(2).unwrap(), vec![Q::default(); 2]);
        let j = JobConfig { lambda: Some(vec!["5/2".into(), "-7".into()]), ..job() };
        assert_eq!(j.lambda_values(2).unwrap(), vec![parse_q("5/2").unwrap(), parse_q("-7").unwrap()]);
        assert!(j.lambda_values(1).is_err());
        assert!(JobConfig { lambda: Some(vec![String::new()]), ..job() }.lambda_values(0).unwrap().is_empty());
    }

    #[test]
    fn cache_key_depends_on_algebra_and_degree() {
        let a = load_algebra("sl2:[2]").unwrap();
        let b = load_algebra("sl3:[2,1]").unwrap();
        assert_eq!(cache_key(&a, 8), cache_key(&load_algebra("sl2:[2]").unwrap(), 8));
        assert_ne!(cache_key(&a, 8), cache_key(&a, 9));
        assert_ne!(cache_key(&a, 8), cache_key(&b, 8));
        assert_eq!(cache_key(&a, 8).len(), 64 + ".json".len());
    }

    #[test]
    fn unknown_inputs() {
        assert!(load_algebra("sl3:[4]").is_err());
        let w = build_walgebra(load_algebra("sl2:[2]").unwrap(), 4).unwrap();
        assert!(load_rep(&w, "spinor").is_err());
        assert_eq!(load_rep(&w, "adjoint").unwrap().dim(), 3);
    }
}
