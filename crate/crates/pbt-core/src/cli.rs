//! `pbt` command line.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::blockenc::{Encoder, Options, Padding};
use crate::error::{PbtError, Result};
use crate::la::{self, CMat};
use crate::schur;
use crate::simulate::{self, Engine, InputState, ProtocolRun};
use crate::store::{self, Cache, CacheKey, Labels};
use crate::twisted::{self, AlphaInfo, TwistedSchur};
use crate::verify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Bump when the Schur construction changes so cached transforms are rebuilt.
pub const SCHUR_CONSTRUCTION: &str = "schur:gt-yor:v1";

#[derive(Parser, Debug)]
#[command(name = "pbt", version, about = "Port-based teleportation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Tight,
    Padded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExportObject {
    Schur,
    Kraus,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Irrep table: α, d_α, m_α, D_α and λ_ν(α).
    Irreps {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Run a verification suite.
    Verify {
        #[arg(long)]
        suite: String,
        /// e.g. `3`, `2..6` (inclusive) or `2,4`.
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        d: Option<String>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Entanglement fidelity of the PGM scheme.
    Fidelity {
        #[arg(long)]
        n: String,
        #[arg(long)]
        d: usize,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Run the protocol on one input state.
    Simulate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        /// dense, amplified or compressed.
        #[arg(long, default_value = "dense")]
        engine: String,
        /// `entangled`, `mixed`, or a basis index `k` for |k⟩⟨k|.
        #[arg(long, default_value = "0")]
        input: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        shots: Option<u64>,
    },
    /// Scale and ancilla ledger of U^c(i).
    Encode {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        i: usize,
        #[arg(long, value_enum, default_value = "tight")]
        mode: Mode,
        #[arg(long)]
        x: Option<f64>,
        #[arg(long)]
        x_prime: Option<f64>,
        #[arg(long, default_value_t = false)]
        alpha_guard: bool,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Write a matrix file with a JSON label sidecar.
    Export {
        #[arg(value_enum)]
        object: ExportObject,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        /// Port for `kraus`.
        #[arg(long, default_value_t = 1)]
        i: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        path: PathBuf,
    },
}

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// `3`, `2..6` (inclusive), `2..=6` or `2,3,5`.
pub fn parse_range(s: &str) -> Result<Vec<usize>> {
    let bad = || PbtError::InvalidArgument(format!("bad range {s:?}"));
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    let out: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let (a, b) = (num(a)?, num(b)?);
        if a > b {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        s.split(',').map(num).collect::<Result<_>>()?
    };
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

fn csv_row(cells: &[String]) -> String {
    cells
        .iter()
        .map(|c| {
            if c.contains([',', '"', '\n']) {
                format!("\"{}\"", c.replace('"', "\"\""))
            } else {
                c.clone()
            }
        })
        .collect::<Vec<_>>()
        .join(",")
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| PbtError::Format(e.to_string()))
}

#[derive(Serialize)]
struct IrrepRow {
    alpha: String,
    d_alpha: usize,
    m_alpha: usize,
    big_d: usize,
    lambda: Vec<(String, f64)>,
}

pub fn cmd_irreps(n: usize, d: usize, format: Format) -> Result<String> {
    if n < 2 || d == 0 {
        return Err(PbtError::InvalidArgument(format!("need n >= 2 and d >= 1, got n={n}, d={d}")));
    }
    let mut rows = Vec::new();
    for a in twisted::alphas(n, d) {
        let info = AlphaInfo::new(n, d, &a)?;
        // errors out unless the closed form matches the Gram diagonalization
        twisted::gram_spectrum(n, d, &a)?;
        rows.push(IrrepRow {
            alpha: a.to_string(),
            d_alpha: info.d_alpha,
            m_alpha: info.m_alpha,
            big_d: info.big_d,
            lambda: info.children.iter().map(|c| c.to_string()).zip(info.lambda.iter().copied()).collect(),
        });
    }
    match format {
        Format::Json => json(&rows),
        Format::Csv => {
            let mut out = vec![csv_row(&["alpha".into(), "d_alpha".into(), "m_alpha".into(), "D_alpha".into(), "lambda".into()])];
            for r in &rows {
                let lam = r
                    .lambda
                    .iter()
                    .map(|(nu, l)| format!("{nu}:{}", fmt_f64(*l)))
                    .collect::<Vec<_>>()
                    .join(";");
                out.push(csv_row(&[
                    r.alpha.clone(),
                    r.d_alpha.to_string(),
                    r.m_alpha.to_string(),
                    r.big_d.to_string(),
                    lam,
                ]));
            }
            Ok(out.join("\n"))
        }
    }
}

pub fn cmd_verify(suite: &str, n: Option<&str>, d: Option<&str>) -> Result<verify::SuiteReport> {
    if !verify::SUITES.contains(&suite) {
        return Err(PbtError::InvalidArgument(format!(
            "unknown suite {suite:?}; available: {}",
            verify::SUITES.join(", ")
        )));
    }
    let (dn, dd) = verify::default_ranges(suite);
    let ns = n.map(parse_range).transpose()?.unwrap_or(dn);
    let ds = d.map(parse_range).transpose()?.unwrap_or(dd);
    verify::run_suite(suite, &ns, &ds)
}

fn render_verify(rep: &verify::SuiteReport, format: Format) -> Result<String> {
    match format {
        Format::Json => json(rep),
        Format::Csv => {
            let mut out = vec![csv_row(&["check".into(), "residual".into(), "tol".into(), "pass".into()])];
            for c in &rep.checks {
                out.push(csv_row(&[c.label.clone(), fmt_f64(c.residual), fmt_f64(c.tol), c.pass.to_string()]));
            }
            out.push(format!(
                "# suite {}: {} ({} checks, max residual {})",
                rep.suite,
                if rep.pass() { "PASS" } else { "FAIL" },
                rep.checks.len(),
                fmt_f64(rep.max_residual())
            ));
            Ok(out.join("\n"))
        }
    }
}

#[derive(Serialize)]
struct FidelityRow {
    n: usize,
    d: usize,
    fidelity: f64,
    twisted: f64,
}

pub fn cmd_fidelity(ns: &[usize], d: usize, format: Format) -> Result<String> {
    let rows = ns
        .iter()
        .map(|&n| {
            Ok(FidelityRow {
                n,
                d,
                fidelity: crate::pbt::fidelity(n, d)?,
                twisted: verify::twisted_fidelity(n, d, 0)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    match format {
        Format::Json => json(&rows),
        Format::Csv => {
            let mut out = vec!["n,d,fidelity,fidelity_twisted".to_string()];
            for r in &rows {
                out.push(format!("{},{},{},{}", r.n, r.d, fmt_f64(r.fidelity), fmt_f64(r.twisted)));
            }
            Ok(out.join("\n"))
        }
    }
}

pub fn parse_input(s: &str, d: usize) -> Result<InputState> {
    match s {
        "entangled" => Ok(InputState::EntangledWithReference),
        "mixed" => Ok(InputState::Density(la::identity(d) / la::c(d as f64))),
        "plus" => Ok(InputState::Density(CMat::from_element(d, d, la::c(1.0 / d as f64)))),
        k => {
            let k: usize = k
                .parse()
                .map_err(|_| PbtError::InvalidArgument(format!("bad input {s:?} (entangled, mixed, plus or a basis index)")))?;
            if k >= d {
                return Err(PbtError::InvalidArgument(format!("basis index {k} >= d = {d}")));
            }
            let mut e = CMat::zeros(d, d);
            e[(k, k)] = la::ONE;
            Ok(InputState::Density(e))
        }
    }
}

#[derive(Serialize)]
struct SimOutput {
    #[serde(flatten)]
    report: simulate::Report,
    #[serde(skip_serializing_if = "Option::is_none")]
    histogram: Option<simulate::Histogram>,
}

pub fn cmd_simulate(n: usize, d: usize, engine: &str, input: &str, seed: u64, shots: Option<u64>) -> Result<String> {
    let engine: Engine = engine.parse()?;
    let spec = ProtocolRun {
        n,
        d,
        input_state: parse_input(input, d)?,
        engine,
        seed,
    };
    let report = simulate::run(&spec)?;
    let histogram = shots
        .map(|s| simulate::sample_from(&report.probabilities, s, seed))
        .transpose()?;
    json(&SimOutput { report, histogram })
}

pub fn cmd_encode(
    n: usize,
    d: usize,
    i: usize,
    mode: Mode,
    opts: Options,
    format: Format,
) -> Result<(String, bool)> {
    let opts = Options {
        padding: match mode {
            Mode::Tight => Padding::Tight,
            Mode::Padded => Padding::Padded,
        },
        ..opts
    };
    let tw = TwistedSchur::build_seeded(n, d, opts.seed)?;
    let enc = Encoder::new(n, d, opts)?;
    let k = enc.encode_kraus(&tw, i)?;
    let ok = k.ledger.iter().all(|r| r.matches());
    let text = match format {
        Format::Json => json(&k.ledger)?,
        Format::Csv => {
            let mut out = vec![csv_row(
                &["matrix", "encoding", "scale", "scale_formula", "ancilla_qubits", "ancilla_formula", "error_bound", "residual"]
                    .map(String::from),
            )];
            for r in &k.ledger {
                out.push(csv_row(&[
                    r.matrix.clone(),
                    r.encoding.clone(),
                    fmt_f64(r.scale),
                    fmt_f64(r.scale_formula),
                    fmt_f64(r.ancilla_qubits),
                    fmt_f64(r.ancilla_formula),
                    fmt_f64(r.error_bound),
                    fmt_f64(r.residual),
                ]));
            }
            out.join("\n")
        }
    };
    Ok((text, ok))
}

/// Real Schur transform as a complex matrix, through the on-disk cache.
pub fn schur_matrix_cached(cache: &Cache, m: usize, d: usize, seed: u64) -> Result<(CMat, Labels)> {
    let key = CacheKey::new("schur", m, d, &format!("{SCHUR_CONSTRUCTION}:seed={seed}"));
    let t = schur::schur_cached(m, d, seed)?;
    let mats = cache.get_or_build(&key, || Ok(vec![t.matrix()]))?;
    let rows = t.index.iter().map(|l| format!("{}|r={}|j={}", l.lambda, l.r, l.path)).collect();
    let cols = (0..t.dim())
        .map(|x| (0..m).map(|q| char::from_digit(((x / d.pow((m - 1 - q) as u32)) % d) as u32, 36).unwrap()).collect())
        .collect();
    Ok((mats.into_iter().next().unwrap(), Labels { rows, cols }))
}

pub fn cmd_export(object: ExportObject, n: usize, d: usize, i: usize, seed: u64, path: &std::path::Path) -> Result<String> {
    let (m, labels) = match object {
        ExportObject::Schur => schur_matrix_cached(&Cache::from_env(), n, d, seed)?,
        ExportObject::Kraus => {
            let tw = TwistedSchur::build_seeded(n, d, seed)?;
            let k = crate::pbt::kraus_from_twisted(&tw, i)?;
            let idx: Vec<String> = (0..k.nrows()).map(|x| x.to_string()).collect();
            (k, Labels { rows: idx.clone(), cols: idx })
        }
    };
    store::write_matrix(path, &m, &labels)?;
    let back = store::read_matrix(path)?;
    let exact = back.matrix.iter().zip(m.iter()).all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits());
    if !exact {
        return Err(PbtError::Format(format!("{} did not round-trip bit-exactly", path.display())));
    }
    Ok(format!("wrote {}x{} matrix to {}", m.nrows(), m.ncols(), path.display()))
}

fn exit_code(e: &PbtError) -> i32 {
    match e {
        PbtError::InvalidArgument(_) => EXIT_USAGE,
        _ => EXIT_FAIL,
    }
}

/// Runs the CLI, writing to `out` and `err`; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok((text, pass)) => {
            let _ = writeln!(out, "{text}");
            if pass {
                EXIT_OK
            } else {
                EXIT_FAIL
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command) -> Result<(String, bool)> {
    match cmd {
        Command::Irreps { n, d, format } => Ok((cmd_irreps(n, d, format)?, true)),
        Command::Verify { suite, n, d, format } => {
            let rep = cmd_verify(&suite, n.as_deref(), d.as_deref())?;
            Ok((render_verify(&rep, format)?, rep.pass()))
        }
        Command::Fidelity { n, d, format } => Ok((cmd_fidelity(&parse_range(&n)?, d, format)?, true)),
        Command::Simulate {
            n,
            d,
            engine,
            input,
            seed,
            shots,
        } => Ok((cmd_simulate(n, d, &engine, &input, seed, shots)?, true)),
        Command::Encode {
            n,
            d,
            i,
            mode,
            x,
            x_prime,
            alpha_guard,
            format,
        } => {
            let opts = Options {
                x,
                x_prime,
                alpha_guard,
                ..Options::default()
            };
            cmd_encode(n, d, i, mode, opts, format)
        }
        Command::Export {
            object,
            n,
            d,
            i,
            seed,
            path,
        } => Ok((cmd_export(object, n, d, i, seed, &path)?, true)),
    }
}
