//! Command-line front end: sieve tables, moment grids, singular-series
//! evaluations, series cross-checks, and the verification suites.
//!
//! Output discipline: results go to stdout (or `--out`) as CSV with a
//! `#`-metadata header or as versioned JSON; the run manifest — command,
//! parameters, precision, workers, wall time, output digest — goes to stderr
//! as a single JSON line. Reruns of the same command produce byte-identical
//! output, and the digest covers exactly those bytes.
//!
//! Exit codes: 0 success, 1 verification failure or i/o error, 2 bad
//! arguments, 3 capacity exceeded, 4 work budget or precision not met.

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use std::path::PathBuf;
use std::time::Instant;

use kfree::moments::{ap_moment, short_moment, MomentReport};
use kfree::precision::{default_digits, kth_root_enclosure, zeta_inv, Dec, Enclosure};
use kfree::report::{enclosure_cells, OutputFormat, RunManifest, Table, SCHEMA_VERSION};
use kfree::shift::ShiftTuple;
use kfree::sieve::{sieve_range, SieveConfig};
use kfree::singular::{c_ell_binomial, singular_aqh};
use kfree::verify::run_suite;
use kfree::{fourier, Error, Rat, Result};

#[derive(Parser)]
#[command(
    name = "kfree",
    version,
    about = "k-free numbers: sieves, singular series, and moment statistics",
    propagate_version = true
)]
struct Cli {
    /// Worker threads for parallel stages (default: all available cores).
    /// The output bytes do not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Write output here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Output format for tables
    #[arg(long, global = true, default_value = "csv")]
    format: OutputFormat,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sieve k-free numbers up to a limit and tabulate counts against the
    /// density main term at logarithmic checkpoints
    Sieve(SieveArgs),
    /// Power sums and centered moments of k-free counting discrepancies
    Moments {
        #[command(subcommand)]
        flavor: MomentsCmd,
    },
    /// The singular series A_q(h) for one shift tuple
    Singular(SingularArgs),
    /// The compensated moment series C_ell(H; q), by either evaluation route
    Cseries(CseriesArgs),
    /// Run a verification suite and emit a JSON summary
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SieveArgs {
    /// Power-free exponent (k = 2 means squarefree)
    #[arg(long)]
    k: u32,
    /// Sieve the integers 1..=limit
    #[arg(long)]
    limit: u64,
    /// Segment size in bits for the windowed sieve
    #[arg(long)]
    segment: Option<usize>,
}

#[derive(Subcommand)]
enum MomentsCmd {
    /// Sliding windows [n, n+H) for n <= x
    Short(ShortArgs),
    /// Reduced residue classes modulo q, counts up to X
    Ap(ApArgs),
}

#[derive(Args)]
struct ShortArgs {
    #[arg(long)]
    k: u32,
    /// Window starts run over 1..=x
    #[arg(long)]
    x: u64,
    /// Window length
    #[arg(long = "H")]
    h: u64,
    /// Highest moment to assemble
    #[arg(long)]
    ell: u32,
    /// Absolute tolerance for the assembled moment
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Args)]
struct ApArgs {
    #[arg(long)]
    k: u32,
    /// Count k-free n <= X in each reduced class
    #[arg(long = "X")]
    x: u64,
    /// Modulus
    #[arg(long)]
    q: u64,
    /// Highest moment to assemble
    #[arg(long)]
    ell: u32,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Args)]
struct SingularArgs {
    #[arg(long)]
    q: u64,
    #[arg(long)]
    k: u32,
    /// Comma-separated shifts, e.g. 0,3,17
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    shifts: Vec<i64>,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Args)]
struct CseriesArgs {
    /// Window length, an integer or a fraction like 33/2
    #[arg(long = "H", value_parser = parse_rat)]
    h: Rat,
    #[arg(long)]
    ell: u32,
    #[arg(long)]
    q: u64,
    #[arg(long)]
    k: u32,
    #[arg(long, value_enum)]
    method: Method,
    /// Truncation radius for the series route
    #[arg(long, default_value_t = 30)]
    radius: u64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Binomial,
    Fourier,
    Both,
}

#[derive(Args)]
struct VerifyArgs {
    /// One of: identities, bounds, oracle, all
    suite: String,
}

fn parse_rat(s: &str) -> std::result::Result<Rat, String> {
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|e| format!("bad numerator: {e}"))?;
        let d: i64 = d.trim().parse().map_err(|e| format!("bad denominator: {e}"))?;
        if d <= 0 {
            return Err("denominator must be positive".into());
        }
        Ok(Rat::new(n, d))
    } else {
        s.trim()
            .parse::<i64>()
            .map(Rat::from_integer)
            .map_err(|e| format!("bad value: {e}"))
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Domain(_) => 2,
        Error::Capacity { .. } => 3,
        Error::Budget { .. } | Error::Precision { .. } => 4,
        Error::Io(_) => 1,
    }
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(run(cli));
}

fn run(cli: Cli) -> i32 {
    if let Some(w) = cli.workers {
        if w == 0 {
            eprintln!("error: --workers must be >= 1");
            return 2;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            eprintln!("error: worker pool: {e}");
            return 2;
        }
    }
    let start = Instant::now();
    let format = cli.format;
    let outcome = match &cli.command {
        Command::Sieve(args) => cmd_sieve(args, format),
        Command::Moments { flavor } => match flavor {
            MomentsCmd::Short(args) => cmd_moments_short(args, format),
            MomentsCmd::Ap(args) => cmd_moments_ap(args, format),
        },
        Command::Singular(args) => cmd_singular(args, format),
        Command::Cseries(args) => cmd_cseries(args, format),
        Command::Verify(args) => cmd_verify(args),
    };
    match outcome {
        Ok((rendered, mut manifest, code)) => {
            manifest.finish(&rendered, start.elapsed());
            if let Some(path) = &cli.out {
                if let Err(e) = std::fs::write(path, rendered.as_bytes()) {
                    eprintln!("error: writing {}: {e}", path.display());
                    return 1;
                }
            } else {
                print!("{rendered}");
            }
            eprintln!("{}", manifest.to_json());
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

type CmdOutput = Result<(String, RunManifest, i32)>;

fn manifest(command: &str) -> RunManifest {
    RunManifest::new(command, default_digits(), rayon::current_num_threads())
}

/// Checkpoints 1, 2, 5, 10, 20, 50, … capped at (and always including) the
/// limit itself.
fn log_checkpoints(limit: u64) -> Vec<u64> {
    let mut cps = Vec::new();
    let mut base = 1u64;
    loop {
        for m in [1u64, 2, 5] {
            let c = base.saturating_mul(m);
            if c <= limit {
                cps.push(c);
            }
        }
        match base.checked_mul(10) {
            Some(b) if b <= limit => base = b,
            _ => break,
        }
    }
    if cps.last() != Some(&limit) {
        cps.push(limit);
    }
    cps
}

fn cmd_sieve(args: &SieveArgs, format: OutputFormat) -> CmdOutput {
    if args.limit == 0 {
        return Err(Error::domain("limit must be >= 1"));
    }
    let cfg = match args.segment {
        Some(s) => SieveConfig::with_segment(args.k, 1, args.limit + 1, s)?,
        None => SieveConfig::new(args.k, 1, args.limit + 1)?,
    };
    let win = sieve_range(&cfg)?;
    let digits = default_digits();
    let zinv = zeta_inv(args.k, digits);

    let mut table = Table::new(
        "sieve",
        &[
            "x",
            "count",
            "main",
            "main_err",
            "residual",
            "residual_err",
            "scaled_residual",
            "scaled_residual_err",
        ],
    );
    table.push_meta("k", args.k);
    table.push_meta("limit", args.limit);
    table.push_meta("precision_digits", digits);
    for cp in log_checkpoints(args.limit) {
        let count = win.count_range(1, cp + 1);
        let main = zinv.mul_int(cp as i64);
        let residual = Enclosure::exact(Dec::from_int(count as i64, main.scale())).sub(&main);
        let root = kth_root_enclosure(cp, args.k, main.scale());
        let scaled = residual.div(&root);
        let (m, me) = enclosure_cells(&main, digits);
        let (r, re) = enclosure_cells(&residual, digits);
        let (s, se) = enclosure_cells(&scaled, digits);
        table.push_row(vec![cp.to_string(), count.to_string(), m, me, r, re, s, se]);
    }

    let manifest = manifest("sieve")
        .param("k", args.k)
        .param("limit", args.limit)
        .param("segment", args.segment.map_or("default".into(), |s| s.to_string()))
        .param("format", format_name(format));
    Ok((table.render(format), manifest, 0))
}

/// One row per power-sum order j; the assembled moment and its normalized
/// form repeat on every row so each row is self-contained for plotting.
fn moment_rows(table: &mut Table, rep: &MomentReport, lead: &[String], scaling: &Enclosure) {
    let digits = default_digits();
    let s = rep.moment.scale().max(scaling.scale());
    let normalized = rep.moment.rescale(s).div(&scaling.rescale(s));
    let (m, me) = enclosure_cells(&rep.moment, digits);
    let (n, ne) = enclosure_cells(&normalized, digits);
    for j in 0..=rep.ell {
        let mut row = lead.to_vec();
        row.push(j.to_string());
        row.push(rep.powersums.sum(j).to_string());
        row.extend([m.clone(), me.clone(), n.clone(), ne.clone()]);
        table.push_row(row);
    }
}

fn cmd_moments_short(args: &ShortArgs, format: OutputFormat) -> CmdOutput {
    let rep = short_moment(args.x, args.h, args.ell, args.k, args.tol)?;
    let mut table = Table::new(
        "moments-short",
        &[
            "x",
            "H",
            "k",
            "ell",
            "j",
            "power_sum",
            "moment",
            "moment_err",
            "normalized",
            "normalized_err",
        ],
    );
    table.push_meta("tol", args.tol);
    table.push_meta("precision_digits", default_digits());
    table.push_meta("normalization", "x * H^(ell/2k)");
    // x·(H^ℓ)^{1/(2k)}, the conjectured scale of the ℓ-th moment
    let s = rep.moment.scale();
    let scaling = kth_root_enclosure(BigInt::from(args.h).pow(args.ell), 2 * args.k, s)
        .mul_int(args.x as i64);
    let lead = vec![
        args.x.to_string(),
        args.h.to_string(),
        args.k.to_string(),
        args.ell.to_string(),
    ];
    moment_rows(&mut table, &rep, &lead, &scaling);
    let manifest = manifest("moments short")
        .param("k", args.k)
        .param("x", args.x)
        .param("H", args.h)
        .param("ell", args.ell)
        .param("tol", args.tol)
        .param("format", format_name(format));
    Ok((table.render(format), manifest, 0))
}

fn cmd_moments_ap(args: &ApArgs, format: OutputFormat) -> CmdOutput {
    let rep = ap_moment(args.x, args.q, args.ell, args.k, args.tol)?;
    let mut table = Table::new(
        "moments-ap",
        &[
            "X",
            "q",
            "k",
            "ell",
            "j",
            "power_sum",
            "moment",
            "moment_err",
            "normalized",
            "normalized_err",
        ],
    );
    table.push_meta("tol", args.tol);
    table.push_meta("precision_digits", default_digits());
    table.push_meta("normalization", "phi(q) * (X/q)^(ell/2k)");
    // φ(q)·((X/q)^ℓ)^{1/(2k)} — the progression analogue of the short scale
    let s = rep.moment.scale();
    let xl = kth_root_enclosure(BigInt::from(args.x).pow(args.ell), 2 * args.k, s);
    let ql = kth_root_enclosure(BigInt::from(args.q).pow(args.ell), 2 * args.k, s);
    let phi = kfree::arith::phi_u64(args.q);
    let scaling = xl.div(&ql).mul_int(phi as i64);
    let lead = vec![
        args.x.to_string(),
        args.q.to_string(),
        args.k.to_string(),
        args.ell.to_string(),
    ];
    moment_rows(&mut table, &rep, &lead, &scaling);
    let manifest = manifest("moments ap")
        .param("k", args.k)
        .param("X", args.x)
        .param("q", args.q)
        .param("ell", args.ell)
        .param("tol", args.tol)
        .param("format", format_name(format));
    Ok((table.render(format), manifest, 0))
}

fn cmd_singular(args: &SingularArgs, format: OutputFormat) -> CmdOutput {
    let h = ShiftTuple::new(args.shifts.clone(), args.k, args.q)?;
    let value = singular_aqh(&h, args.tol)?;
    let digits = default_digits();
    let mut table = Table::new("singular", &["q", "k", "shifts", "value", "err"]);
    table.push_meta("tol", args.tol);
    table.push_meta("precision_digits", digits);
    let shifts = args
        .shifts
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join(";");
    let (v, e) = enclosure_cells(&value, digits);
    table.push_row(vec![args.q.to_string(), args.k.to_string(), shifts, v, e]);
    let manifest = manifest("singular")
        .param("q", args.q)
        .param("k", args.k)
        .param("shifts", args.shifts.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","))
        .param("tol", args.tol)
        .param("format", format_name(format));
    Ok((table.render(format), manifest, 0))
}

fn cmd_cseries(args: &CseriesArgs, format: OutputFormat) -> CmdOutput {
    let digits = default_digits();
    let mut table = Table::new(
        "cseries",
        &["H", "ell", "q", "k", "method", "radius", "tuples", "value", "err"],
    );
    table.push_meta("tol", args.tol);
    table.push_meta("precision_digits", digits);
    let lead = |method: &str, radius: u64, tuples: u64| {
        vec![
            format!("{}", args.h),
            args.ell.to_string(),
            args.q.to_string(),
            args.k.to_string(),
            method.to_string(),
            radius.to_string(),
            tuples.to_string(),
        ]
    };

    let binomial = if args.method != Method::Fourier {
        Some(c_ell_binomial(args.h, args.ell, args.q, args.k, args.tol)?)
    } else {
        None
    };
    let series = if args.method != Method::Binomial {
        Some(fourier::c_ell_fourier(args.h, args.ell, args.q, args.k, args.radius, args.tol)?)
    } else {
        None
    };

    if let Some(b) = &binomial {
        let (v, e) = enclosure_cells(b, digits);
        let mut row = lead("binomial", 0, 0);
        row.extend([v, e]);
        table.push_row(row);
    }
    if let Some(f) = &series {
        let (v, e) = enclosure_cells(&f.value, digits);
        let mut row = lead("fourier", f.radius, f.tuples);
        row.extend([v, e]);
        table.push_row(row);
    }
    if let (Some(b), Some(f)) = (&binomial, &series) {
        // cross-method delta, with the two certified errors combined
        let s = b.scale().max(f.value.scale());
        let (b, fv) = (b.rescale(s), f.value.rescale(s));
        let delta = Enclosure {
            value: b.value.sub(&fv.value).abs(),
            err: b.err.add(&fv.err),
        };
        let (v, e) = enclosure_cells(&delta, digits);
        let mut row = lead("delta", f.radius, 0);
        row.extend([v, e]);
        table.push_row(row);
    }

    let manifest = manifest("cseries")
        .param("H", format!("{}", args.h))
        .param("ell", args.ell)
        .param("q", args.q)
        .param("k", args.k)
        .param("method", method_name(args.method))
        .param("radius", args.radius)
        .param("tol", args.tol)
        .param("format", format_name(format));
    Ok((table.render(format), manifest, 0))
}

fn cmd_verify(args: &VerifyArgs) -> CmdOutput {
    let results = run_suite(&args.suite)?;
    let ok = results.iter().all(|r| r.passed);
    let json = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "tool_version": kfree::report::tool_version(),
        "suite": args.suite,
        "ok": ok,
        "results": results.iter().map(|r| r.to_json()).collect::<Vec<_>>(),
    });
    let rendered = format!("{json:#}\n");
    let manifest = manifest("verify").param("suite", &args.suite);
    Ok((rendered, manifest, if ok { 0 } else { 1 }))
}

fn format_name(f: OutputFormat) -> &'static str {
    match f {
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Binomial => "binomial",
        Method::Fourier => "fourier",
        Method::Both => "both",
    }
}
