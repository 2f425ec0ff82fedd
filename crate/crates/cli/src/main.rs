use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use robba::characters::TriangulineParameter;
use robba::config::{parse_threshold, RunConfig, Suite};
use robba::error::Error;
use robba::phigamma::{CocycleTag, ExtensionCocycle};
use robba::verify::{envelope, jacquet_entry, verify_report, Status};

#[derive(Parser)]
#[command(name = "robba", version, about = "Trianguline (φ,Γ)-module calculus: classification, Jacquet data, verification suites")]
struct Cli {
    #[command(flatten)]
    opts: Opts,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Opts {
    /// Prime p.
    #[arg(long, global = true, default_value_t = 5)]
    p: u32,
    /// Truncation order M.
    #[arg(long, global = true, default_value_t = 64)]
    trunc: i64,
    /// Working p-adic precision N.
    #[arg(long, global = true, default_value_t = 40)]
    prec: i64,
    /// Coset level n.
    #[arg(long, global = true, default_value_t = 2)]
    level: u32,
    /// Moment order M'.
    #[arg(long, global = true, default_value_t = 16)]
    moments: usize,
    /// Convergence threshold θ, as `a/b` or a decimal. Defaults to 1/(2(p-1)).
    #[arg(long, global = true)]
    threshold: Option<String>,
    /// Suite for `verify`: series, wdelta, kernel, p1, all.
    #[arg(long, global = true, default_value = "all")]
    suite: String,
    /// Seed for randomized checks.
    #[arg(long, global = true, default_value_t = 20240601)]
    seed: u64,
    /// Make the limit-formula cross-check gating.
    #[arg(long, global = true)]
    gate_limit: bool,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Classify trianguline parameters.
    Classify { params: PathBuf },
    /// Expected and numeric Jacquet data per parameter.
    Jacquet {
        params: PathBuf,
        /// Cocycles aligned with the parameters by index.
        #[arg(long)]
        cocycles: Option<PathBuf>,
    },
    /// Run verification suites.
    Verify,
}

struct InputError(String);

impl From<Error> for InputError {
    fn from(e: Error) -> Self {
        InputError(e.to_string())
    }
}

fn config(o: &Opts) -> Result<RunConfig, InputError> {
    let mut cfg = RunConfig::with_prime(o.p);
    cfg.trunc = o.trunc;
    cfg.prec = o.prec;
    cfg.level = o.level;
    cfg.moments = o.moments;
    if let Some(t) = &o.threshold {
        cfg.theta = parse_threshold(t)?;
    }
    cfg.suite = Suite::parse(&o.suite)?;
    cfg.seed = o.seed;
    cfg.gate_limit = o.gate_limit;
    cfg.validate()?;
    Ok(cfg)
}

/// Entries of a JSON array or a JSON Lines file, each with its 1-based line.
fn read_entries(path: &Path) -> Result<Vec<(usize, Value)>, InputError> {
    let text = std::fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    let trimmed = text.trim_start();
    if trimmed.is_empty() {
        return Ok(Vec::new());
    }
    if trimmed.starts_with('[') {
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| InputError(format!("{}:{}: {e}", path.display(), e.line())))?;
        let offset = text.len() - trimmed.len();
        let first_line = text[..offset].matches('\n').count() + 1;
        return Ok(v.as_array().cloned().unwrap_or_default().into_iter().map(|x| (first_line, x)).collect());
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(line).map_err(|e| InputError(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push((i + 1, v));
    }
    Ok(out)
}

fn classify_entry(idx: usize, line: usize, v: &Value, cfg: &RunConfig) -> (Value, Status) {
    let name = v.get("name").cloned().unwrap_or(Value::Null);
    match TriangulineParameter::from_json(cfg.qp(), v).and_then(|s| Ok((s.classify()?, s))) {
        Ok((class, s)) => (
            json!({
                "index": idx,
                "line": line,
                "name": name,
                "class": class.label(),
                "exceptional": s.is_exceptional(),
                "w": s.w(),
                "v_delta1_p": s.delta1.lambda.valuation(),
                "diagnostics": [],
            }),
            Status::Pass,
        ),
        Err(e) => (
            json!({"index": idx, "line": line, "name": name, "class": Value::Null, "diagnostics": [e.to_string()]}),
            Status::Fail,
        ),
    }
}

fn cocycle_from(s: &TriangulineParameter, v: Option<&Value>, cfg: &RunConfig) -> Result<ExtensionCocycle, Error> {
    match v {
        None => ExtensionCocycle::for_parameter(s, cfg.trunc),
        Some(c) if c.get("g").is_some() || c.get("h").is_some() => ExtensionCocycle::from_json(cfg.qp(), c),
        Some(c) => {
            let tag = c.get("tag").and_then(Value::as_str).ok_or_else(|| Error::Parse("cocycle needs \"tag\" or \"g\"/\"h\"".into()))?;
            ExtensionCocycle::of_type(s, CocycleTag::parse(tag)?, cfg.trunc)
        }
    }
}

fn jacquet_one(idx: usize, line: usize, v: &Value, cocycle: Option<&Value>, cfg: &RunConfig) -> (Value, Status) {
    let name = v.get("name").cloned().unwrap_or(Value::Null);
    let built = TriangulineParameter::from_json(cfg.qp(), v).and_then(|s| {
        let c = cocycle_from(&s, cocycle.or_else(|| v.get("cocycle")), cfg)?;
        Ok((s, c))
    });
    let (mut body, st) = match built {
        Ok((s, c)) => jacquet_entry(&s, c, cfg),
        Err(e) => (json!({"verdict": "input-error", "diagnostics": [e.to_string()]}), Status::Fail),
    };
    body["index"] = json!(idx);
    body["line"] = json!(line);
    body["name"] = name;
    (body, st)
}

fn run(cli: &Cli) -> Result<(Value, i32), InputError> {
    let cfg = config(&cli.opts)?;
    match &cli.cmd {
        Cmd::Classify { params } => {
            let entries: Vec<(usize, (usize, Value))> = read_entries(params)?.into_iter().enumerate().collect();
            let rows = robba::par::map(&entries, |(i, (line, v))| classify_entry(*i, *line, v, &cfg));
            let invalid = rows.iter().any(|(_, s)| *s != Status::Pass);
            let body = json!({"entries": rows.iter().map(|(v, _)| v.clone()).collect::<Vec<_>>()});
            // Parameters that parse but violate the slope or weight conditions are input errors.
            let (status, code) = if invalid { (Status::Fail, 3) } else { (Status::Pass, 0) };
            let mut rep = envelope("classify", &cfg, status, body);
            rep["exit_code"] = json!(code);
            Ok((rep, code))
        }
        Cmd::Jacquet { params, cocycles } => {
            let ps = read_entries(params)?;
            let cs = match cocycles {
                Some(path) => {
                    let cs = read_entries(path)?;
                    if cs.len() != ps.len() {
                        return Err(InputError(format!("{} parameters but {} cocycles", ps.len(), cs.len())));
                    }
                    cs.into_iter().map(|(_, v)| Some(v)).collect()
                }
                None => vec![None; ps.len()],
            };
            let jobs: Vec<(usize, usize, Value, Option<Value>)> =
                ps.into_iter().zip(cs).enumerate().map(|(i, ((l, v), c))| (i, l, v, c)).collect();
            let rows = robba::par::map(&jobs, |(i, l, v, c)| jacquet_one(*i, *l, v, c.as_ref(), &cfg));
            let status = rows.iter().fold(Status::Pass, |a, (_, s)| a.worst(*s));
            let body = json!({"entries": rows.into_iter().map(|(v, _)| v).collect::<Vec<_>>()});
            Ok((envelope("jacquet", &cfg, status, body), status.exit_code()))
        }
        Cmd::Verify => {
            let (rep, status) = verify_report(&cfg);
            Ok((rep, status.exit_code()))
        }
    }
}

fn emit(v: &Value, out: Option<&Path>) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(v).expect("serializable") + "\n";
    match out {
        Some(p) => std::fs::write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (report, code) = match run(&cli) {
        Ok(r) => r,
        Err(InputError(msg)) => {
            eprintln!("error: {msg}");
            let rep = json!({
                "schema_version": robba::verify::SCHEMA_VERSION,
                "status": "input-error",
                "exit_code": 3,
                "error": msg,
            });
            (rep, 3)
        }
    };
    if let Err(e) = emit(&report, cli.opts.out.as_deref()) {
        eprintln!("error: writing report: {e}");
        return ExitCode::from(3);
    }
    ExitCode::from(code as u8)
}
