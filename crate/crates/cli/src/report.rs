//! Versioned JSON reports and the run summary.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use walgebra::brst::CheckJson;

use crate::config::JobConfig;

pub const SCHEMA: &str = "walg-report/1";

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub schema: &'static str,
    pub suite: String,
    pub config: JobConfig,
    pub passed: bool,
    pub checks: Vec<CheckJson>,
    pub data: Value,
}

impl SuiteReport {
    pub fn new(suite: &str, config: &JobConfig, checks: Vec<CheckJson>, data: Value) -> SuiteReport {
        SuiteReport {
            schema: SCHEMA,
            suite: suite.to_string(),
            config: config.clone(),
            passed: checks.iter().all(|c| c.status),
            checks,
            data,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
struct SummaryLine {
    suite: String,
    passed: bool,
    checks: usize,
    failed: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
struct Summary {
    schema: &'static str,
    passed: bool,
    checks: usize,
    suites: Vec<SummaryLine>,
}

/// Writes one JSON file per suite plus `summary.json`; returns whether all checks passed.
pub fn emit_report(out: &Path, reports: &[SuiteReport]) -> std::io::Result<bool> {
    fs::create_dir_all(out)?;
    let mut lines = Vec::new();
    for r in reports {
        fs::write(out.join(format!("{}.json", r.suite)), to_pretty(r))?;
        lines.push(SummaryLine {
            suite: r.suite.clone(),
            passed: r.passed,
            checks: r.checks.len(),
            failed: r.checks.iter().filter(|c| !c.status).map(|c| c.name.clone()).collect(),
        });
    }
    let summary = Summary {
        schema: SCHEMA,
        passed: lines.iter().all(|l| l.passed),
        checks: lines.iter().map(|l| l.checks).sum(),
        suites: lines,
    };
    fs::write(out.join("summary.json"), to_pretty(&summary))?;
    Ok(summary.passed)
}

fn to_pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

/// Human-readable lines for stdout.
pub fn print_summary(reports: &[SuiteReport]) {
    for r in reports {
        for c in &r.checks {
            let tag = if c.status { "PASS" } else { "FAIL" };
            match &c.detail {
                Some(d) => println!("{tag} {}/{} ({d})", r.suite, c.name),
                None => println!("{tag} {}/{}", r.suite, c.name),
            }
        }
    }
    let total: usize = reports.iter().map(|r| r.checks.len()).sum();
    let failed: usize = reports.iter().map(|r| r.checks.iter().filter(|c| !c.status).count()).sum();
    println!("{} checks, {} failed", total, failed);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn job() -> JobConfig {
        JobConfig { alg: "sl2:[2]".into(), rep: "natural".into(), max_degree: 8, depth: 3, suites: vec![], lambda: None, seed: 0 }
    }

    #[test]
    fn empty_run_has_zero_checks() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_report(dir.path(), &[]).unwrap());
        let s: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(s["checks"], 0);
        assert_eq!(s["schema"], SCHEMA);
    }

    #[test]
    fn failing_check_is_summarized() {
        let dir = tempfile::tempdir().unwrap();
        let checks = vec![CheckJson::new("a", true), CheckJson::new("b", false).detail("why")];
        let r = SuiteReport::new("gens", &job(), checks, Value::Null);
        assert!(!r.passed);
        assert!(!emit_report(dir.path(), &[r]).unwrap());
        let s: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(s["suites"][0]["failed"], serde_json::json!(["b"]));
        let text = fs::read_to_string(dir.path().join("gens.json")).unwrap();
        assert!(text.ends_with("}\n"));
    }
}
