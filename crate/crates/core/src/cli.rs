//! Command-line front end. [`run`] takes the argument list and output sinks
//! and returns the process exit code, so it is testable in-process.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::bounds::{bound_profile, nonuniform_bound, tail_bound, uniform_bound, ConstantSet};
use crate::error::{Error, Result};
use crate::exact::{cdf_exact, pmf_exact};
use crate::fmt::sig12;
use crate::lab::sweep::{run_sweep, threads_from_env, write_csv};
use crate::lab::verify::{constants_suite, verify_suite, Outcome, DEFAULT_SEED};
use crate::lab::{calibrate_constants, delta_exact, SweepGrid};
use crate::params::HypParams;
use crate::stirling::{certified_pmf, DEFAULT_DELTA};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_REFUSED: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "hyperberry", version, about = "Exact hypergeometric probabilities and normal-approximation bounds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct PointArgs {
    /// Sample size.
    #[arg(long = "n")]
    pub n: u64,
    /// Marked items in the population.
    #[arg(long = "M")]
    pub m: u64,
    /// Population size.
    #[arg(long = "N")]
    pub pop: u64,
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact P(X = k).
    Pmf {
        #[command(flatten)]
        params: PointArgs,
        #[arg(long, allow_hyphen_values = true)]
        k: i64,
        #[command(flatten)]
        common: Common,
    },
    /// Exact P(X <= k).
    Cdf {
        #[command(flatten)]
        params: PointArgs,
        #[arg(long, allow_hyphen_values = true)]
        k: i64,
        #[command(flatten)]
        common: Common,
    },
    /// Certified Stirling enclosure of P(X = k).
    Certify {
        #[command(flatten)]
        params: PointArgs,
        #[arg(long, allow_hyphen_values = true)]
        k: i64,
        /// Admissible |a_kn| range.
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Bound profile, plus bound values when constants are given.
    Bound {
        #[command(flatten)]
        params: PointArgs,
        /// Constant set JSON.
        #[arg(long)]
        constants: Option<PathBuf>,
        /// Evaluation points for the non-uniform and tail bounds.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Exact Kolmogorov distance to the normal.
    Delta {
        #[command(flatten)]
        params: PointArgs,
        /// Include every jump deviation.
        #[arg(long)]
        jumps: bool,
        #[command(flatten)]
        common: Common,
    },
    /// One CSV row per grid instance.
    Sweep {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        constants: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Omit the timestamp comment line.
        #[arg(long)]
        no_timestamp: bool,
    },
    /// Calibrate a constant set on a grid and write it as JSON.
    Calibrate {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Leave `calibrated_at` empty for byte-identical output.
        #[arg(long)]
        no_timestamp: bool,
    },
    /// Run the property suite; exit 3 on any violation.
    Verify {
        /// Also check this constant set on `--grid`.
        #[arg(long, requires = "grid")]
        constants: Option<PathBuf>,
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Gate(_) | Error::ErrorBudget { .. } | Error::Calibration(_) => EXIT_REFUSED,
        _ => EXIT_INVALID,
    }
}

pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = if code == EXIT_OK {
                write!(out, "{e}")
            } else {
                write!(err, "{e}")
            };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn params(a: &PointArgs) -> Result<HypParams> {
    HypParams::new(a.n, a.m, a.pop)
}

fn load_constants(path: &Path) -> Result<ConstantSet> {
    ConstantSet::from_json(&fs::read_to_string(path)?)
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn emit(text: &str, output: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    match output {
        Some(p) => fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

/// A single record as `header\nrow\n` or a pretty JSON object.
fn record(fields: &[(&str, String)], value: &impl Serialize, format: Format) -> String {
    match format {
        Format::Csv => {
            let head: Vec<&str> = fields.iter().map(|f| f.0).collect();
            let row: Vec<&str> = fields.iter().map(|f| f.1.as_str()).collect();
            format!("{}\n{}\n", head.join(","), row.join(","))
        }
        Format::Json => {
            let mut s = serde_json::to_string_pretty(value).expect("serializable");
            s.push('\n');
            s
        }
    }
}

fn outcomes_text(outcomes: &[Outcome], format: Format) -> String {
    match format {
        Format::Csv => {
            let mut s = String::from("property,status,detail\n");
            for o in outcomes {
                let status = if o.passed { "PASS" } else { "FAIL" };
                s.push_str(&format!("{},{},\"{}\"\n", o.property, status, o.detail.replace('"', "'")));
            }
            s
        }
        Format::Json => serde_json::to_string_pretty(outcomes).expect("serializable") + "\n",
    }
}

fn execute(cmd: Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Pmf { params: a, k, common } => {
            let h = params(&a)?;
            let p = pmf_exact(&h, k);
            exact_value("pmf", k, p, &common, out)?;
        }
        Command::Cdf { params: a, k, common } => {
            let h = params(&a)?;
            let p = cdf_exact(&h, k);
            exact_value("cdf", k, p, &common, out)?;
        }
        Command::Certify { params: a, k, delta, common } => {
            let h = params(&a)?;
            let c = certified_pmf(&h, k, delta)?;
            let fields = [
                ("k", c.k.to_string()),
                ("log_main", sig12(c.log_main)),
                ("value", sig12(c.value)),
                ("rem_bound", sig12(c.rem_bound)),
                ("lo", sig12(c.lo)),
                ("hi", sig12(c.hi)),
            ];
            emit(&record(&fields, &c, common.format), common.output.as_deref(), out)?;
        }
        Command::Bound { params: a, constants, x, common } => {
            let h = params(&a)?;
            let b = bound_profile(&h);
            let mut fields = vec![
                ("f_bar", sig12(b.f_bar)),
                ("a1", sig12(b.a1)),
                ("delta", sig12(b.delta)),
                ("sigma", sig12(b.sigma)),
                ("gate_ok", b.gate_ok.to_string()),
            ];
            let mut body = json!({ "profile": b });
            let mut evals = Vec::new();
            if let Some(path) = constants {
                let c = load_constants(&path)?;
                let u = uniform_bound(&h, &c);
                fields.push(("uniform_bound", sig12(u.value)));
                body["uniform_bound"] = json!(u);
                for &xi in &x {
                    let nu = nonuniform_bound(&h, xi, &c)?;
                    let tail = if xi > 0.0 { Some(tail_bound(&h, xi, &c)?) } else { None };
                    evals.push(json!({ "x": xi, "nonuniform": nu, "tail": tail }));
                }
            } else if !x.is_empty() {
                return Err(Error::InvalidArgument("--x needs --constants".into()));
            }
            let text = match common.format {
                Format::Csv => {
                    let mut s = record(&fields, &(), Format::Csv);
                    if !evals.is_empty() {
                        s.push_str("x,nonuniform_bound,tail_bound\n");
                        for e in &evals {
                            let tail = e["tail"]["value"].as_f64().map(sig12).unwrap_or_default();
                            s.push_str(&format!(
                                "{},{},{}\n",
                                sig12(e["x"].as_f64().unwrap_or(f64::NAN)),
                                sig12(e["nonuniform"]["value"].as_f64().unwrap_or(f64::NAN)),
                                tail
                            ));
                        }
                    }
                    s
                }
                Format::Json => {
                    body["evaluations"] = json!(evals);
                    serde_json::to_string_pretty(&body)? + "\n"
                }
            };
            emit(&text, common.output.as_deref(), out)?;
        }
        Command::Delta { params: a, jumps, common } => {
            let h = params(&a)?;
            let mut r = delta_exact(&h)?;
            let fields = [
                ("n", a.n.to_string()),
                ("M", a.m.to_string()),
                ("N", a.pop.to_string()),
                ("backend", r.backend.to_string()),
                ("sigma", sig12(r.sigma)),
                ("delta_sup", sig12(r.delta_sup)),
                ("argmax_k", r.argmax_k.to_string()),
                ("side", serde_json::to_value(r.side)?.as_str().unwrap_or_default().to_string()),
                ("delta_times_sigma", sig12(r.delta_times_sigma)),
            ];
            let mut text = if jumps {
                record(&fields, &r, common.format)
            } else {
                let all = std::mem::take(&mut r.jumps);
                let t = record(&fields, &r, common.format);
                r.jumps = all;
                t
            };
            if jumps && common.format == Format::Csv {
                text.push_str("k,x,at_point,left_limit\n");
                for j in &r.jumps {
                    text.push_str(&format!("{},{},{},{}\n", j.k, sig12(j.x), sig12(j.at_point), sig12(j.left_limit)));
                }
            }
            emit(&text, common.output.as_deref(), out)?;
        }
        Command::Sweep { grid, constants, output, no_timestamp } => {
            let g = SweepGrid::from_file(&grid)?;
            let c = constants.as_deref().map(load_constants).transpose()?;
            let rows = run_sweep(&g, c.as_ref(), threads_from_env()?)?;
            let mut buf = Vec::new();
            if !no_timestamp {
                writeln!(buf, "# generated_at={}", unix_now())?;
            }
            write_csv(&rows, &mut buf)?;
            emit(&String::from_utf8_lossy(&buf), output.as_deref(), out)?;
        }
        Command::Calibrate { grid, output, no_timestamp } => {
            let g = SweepGrid::from_file(&grid)?;
            let mut c = calibrate_constants(&g)?;
            if !no_timestamp {
                c.calibrated_at = Some(unix_now());
            }
            emit(&(c.to_json() + "\n"), output.as_deref(), out)?;
        }
        Command::Verify { constants, grid, seed, format, output } => {
            let mut outcomes = verify_suite(seed)?;
            if let (Some(cp), Some(gp)) = (constants, grid) {
                let c = load_constants(&cp)?;
                outcomes.extend(constants_suite(&SweepGrid::from_file(&gp)?, &c)?);
            }
            emit(&outcomes_text(&outcomes, format), output.as_deref(), out)?;
            if outcomes.iter().any(|o| !o.passed) {
                return Ok(EXIT_VERIFY);
            }
        }
    }
    Ok(EXIT_OK)
}

fn exact_value(name: &str, k: i64, p: crate::exact::ExactProb, common: &Common, out: &mut dyn Write) -> Result<()> {
    let v = p.to_string();
    let text = match common.format {
        Format::Csv => format!("{v}\n"),
        Format::Json => {
            let mut obj = json!({ "k": k, "backend": p.backend(), "decimal": sig12(p.to_f64()) });
            obj[name] = json!(v);
            serde_json::to_string_pretty(&obj)? + "\n"
        }
    };
    emit(&text, common.output.as_deref(), out)
}
