mod config;
mod report;
mod suites;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{build_walgebra, load_algebra, load_rep, ConfigError, JobConfig, SUITES};
use report::{emit_report, print_summary, SuiteReport};

#[derive(Parser)]
#[command(name = "walg", about = "Finite W-algebras: generators, translation functors and BRST checks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Validate an algebra and its good grading.
    Alg {
        #[command(subcommand)]
        cmd: AlgCmd,
    },
    /// Θ-generators and dimension checks of U(g,e).
    Walg {
        #[command(subcommand)]
        cmd: WalgCmd,
    },
    /// Lift matrix of a representation.
    Lift {
        #[command(subcommand)]
        cmd: LiftCmd,
    },
    /// Translated action of U(g,e) on M ⊗ V.
    Trans {
        #[command(subcommand)]
        cmd: TransCmd,
    },
    /// Quasi-Verma factors of a translated Verma module.
    Verma {
        #[command(subcommand)]
        cmd: VermaCmd,
    },
    /// BRST realization checks.
    Brst {
        #[command(subcommand)]
        cmd: BrstCmd,
    },
    /// Run a list of suites.
    Suite {
        #[command(subcommand)]
        cmd: SuiteCmd,
    },
}

#[derive(Subcommand)]
enum AlgCmd {
    Build(Common),
}

#[derive(Subcommand)]
enum WalgCmd {
    Gens(Common),
    Dims(Common),
}

#[derive(Subcommand)]
enum LiftCmd {
    Solve(Common),
}

#[derive(Subcommand)]
enum TransCmd {
    Act(Common),
    Verify(Common),
}

#[derive(Subcommand)]
enum VermaCmd {
    Translate(Common),
}

#[derive(Subcommand)]
enum BrstCmd {
    Verify(Common),
}

#[derive(Subcommand)]
enum SuiteCmd {
    All(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// Builder shorthand such as `sl3:[2,1]`, or a JSON file.
    #[arg(long)]
    alg: String,
    /// `natural`, `adjoint`, `trivial`, or a JSON file.
    #[arg(long, default_value = "natural")]
    rep: String,
    /// Kazhdan degree bound for the W-basis.
    #[arg(long = "max-deg", default_value_t = 8)]
    max_deg: i32,
    /// Number of negative Θ-factors in the Verma truncation.
    #[arg(long, default_value_t = 3)]
    depth: usize,
    #[arg(long, default_value = "walg-out")]
    out: PathBuf,
    /// Comma-separated suites for `suite all`.
    #[arg(long, value_delimiter = ',')]
    suite: Option<Vec<String>>,
    /// Highest weight on the t^e basis, comma-separated rationals.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lambda: Option<Vec<String>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl Common {
    fn job(&self, suites: Vec<String>) -> JobConfig {
        JobConfig {
            alg: self.alg.clone(),
            rep: self.rep.clone(),
            max_degree: self.max_deg,
            depth: self.depth,
            suites,
            lambda: self.lambda.clone(),
            seed: self.seed,
        }
    }
}

fn run(common: &Common, suites: Vec<String>) -> Result<Vec<SuiteReport>, ConfigError> {
    let cfg = common.job(suites);
    cfg.validate()?;
    let spec = load_algebra(&cfg.alg)?;
    let needs_w = cfg.suites.iter().any(|s| s != "alg");
    let w = if needs_w { Some(build_walgebra(spec.clone(), cfg.max_degree).map_err(ConfigError)?) } else { None };
    let needs_rep = cfg.suites.iter().any(|s| !matches!(s.as_str(), "alg" | "gens" | "dims"));
    let rs = match (&w, needs_rep) {
        (Some(w), true) => Some(load_rep(w, &cfg.rep)?),
        _ => None,
    };
    let mut out = Vec::new();
    for s in &cfg.suites {
        let (w, rs) = (w.as_ref(), rs.as_ref());
        out.push(match s.as_str() {
            "alg" => suites::alg_suite(&cfg, &spec),
            "gens" => suites::gens_suite(&cfg, w.unwrap()),
            "dims" => suites::dims_suite(&cfg, w.unwrap()),
            "lift" => suites::lift_suite(&cfg, &spec, w.unwrap(), rs.unwrap())?,
            "act" => suites::act_suite(&cfg, &spec, w.unwrap(), rs.unwrap())?,
            "trans" => suites::trans_suite(&cfg, &spec, w.unwrap(), rs.unwrap())?,
            "brst" => suites::brst_suite(&cfg, &spec, w.unwrap(), rs.unwrap())?,
            "verma" => suites::verma_suite(&cfg, &spec, w.unwrap(), rs.unwrap())?,
            other => unreachable!("suite {other} passed validation"),
        });
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let one = |s: &str| vec![s.to_string()];
    let (common, suites) = match &cli.cmd {
        Cmd::Alg { cmd: AlgCmd::Build(c) } => (c, one("alg")),
        Cmd::Walg { cmd: WalgCmd::Gens(c) } => (c, one("gens")),
        Cmd::Walg { cmd: WalgCmd::Dims(c) } => (c, one("dims")),
        Cmd::Lift { cmd: LiftCmd::Solve(c) } => (c, one("lift")),
        Cmd::Trans { cmd: TransCmd::Act(c) } => (c, one("act")),
        Cmd::Trans { cmd: TransCmd::Verify(c) } => (c, one("trans")),
        Cmd::Verma { cmd: VermaCmd::Translate(c) } => (c, one("verma")),
        Cmd::Brst { cmd: BrstCmd::Verify(c) } => (c, one("brst")),
        Cmd::Suite { cmd: SuiteCmd::All(c) } => {
            let all = || SUITES.iter().map(|s| s.to_string()).collect();
            (c, c.suite.clone().map(|v| v.into_iter().filter(|s| !s.is_empty()).collect()).unwrap_or_else(all))
        }
    };
    let reports = match run(common, suites) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    print_summary(&reports);
    match emit_report(&common.out, &reports) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: cannot write reports to {}: {e}", common.out.display());
            ExitCode::from(2)
        }
    }
}
