//! Command-line front end.
//!
//! Options come from flags and, optionally, a flat TOML file given with
//! `--config`; every key `name = value` in the file acts as `--name value`
//! and explicit flags take precedence. Exit codes: 0 success, 1 an identity
//! or bound failed, 2 configuration or input error.

pub mod battery;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coefficients::series_by_name;
use crate::correlation::{pair_sweep, write_pair_csv, PairFamily, SweepOptions};
use crate::error::Error;
use crate::experiments::{
    ap_discrepancy_with_mass, ap_record, bilinear_preset, bilinear_record, correlation_ladder, dyadic_ladder, fit_groups,
    read_records_csv, sort_records, write_fits_csv, write_records_csv, CorrelationRecord, Manifest, WeightV,
};
use crate::par;
use crate::spectral::dft_normalized;
use crate::trace::{parse_spec, read_table_csv, realize, write_table_csv, MultChar, SheafSpec};
use crate::zmod::{gcd, is_prime};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "TWISTLAB_OUT";

#[derive(Debug, Parser)]
#[command(name = "twistlab", version, about = "Trace functions, Kloosterman-type sums and correlation experiments")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Worker threads (0 uses all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = ".")]
    pub out: PathBuf,
    /// Flat TOML file of option defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Trace function tables.
    #[command(subcommand)]
    Trace(TraceCmd),
    /// Identity batteries.
    #[command(subcommand)]
    Check(CheckCmd),
    /// FT_2 closed form and bound sweeps.
    #[command(subcommand)]
    Ft2(Ft2Cmd),
    /// Shifted correlations of Z sums.
    #[command(subcommand)]
    Paircorr(PairCmd),
    /// Experiment presets and ladders.
    #[command(subcommand)]
    Exp(ExpCmd),
}

#[derive(Debug, Subcommand)]
pub enum TraceCmd {
    /// Realize a spec file into a table CSV.
    Gen {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value = "trace.csv")]
        output: String,
    },
    /// Normalized Fourier transform of a table CSV.
    Dft {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "trace_dft.csv")]
        output: String,
    },
}

#[derive(Debug, Args)]
pub struct Trials {
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
}

#[derive(Debug, Subcommand)]
pub enum CheckCmd {
    TwistedMult {
        #[command(flatten)]
        t: Trials,
        #[arg(long, default_value_t = 10_000)]
        max_q: u64,
    },
    KloostermanFactor {
        #[command(flatten)]
        t: Trials,
        #[arg(long, default_value_t = 10_000)]
        max_mn: u64,
    },
    Nsum {
        #[command(flatten)]
        t: Trials,
        /// Fixed prime modulus; random primes up to 397 when absent.
        #[arg(long)]
        q0: Option<u64>,
    },
    Err3 {
        #[command(flatten)]
        t: Trials,
        #[arg(long)]
        q0: Option<u64>,
    },
}

#[derive(Debug, Subcommand)]
pub enum Ft2Cmd {
    Case1 {
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 400)]
        max_k: u64,
    },
    Case2 {
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 400)]
        max_k: u64,
    },
}

#[derive(Debug, Subcommand)]
pub enum PairCmd {
    Sweep {
        /// `kummer` or `kl2`.
        #[arg(long, default_value = "kummer")]
        family: String,
        #[arg(long, default_value_t = 101)]
        q_min: u64,
        #[arg(long, default_value_t = 499)]
        q_max: u64,
        #[arg(long, default_value_t = 300)]
        count: usize,
        /// Keep tuples with a main term.
        #[arg(long)]
        include_degenerate: bool,
        #[arg(long, default_value = "paircorr.csv")]
        output: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum ExpCmd {
    /// Correlation ladder of a coefficient series against a CRT product of characters.
    Corr(CorrArgs),
    /// Discrepancies in progressions.
    Ap {
        #[arg(long, default_value = "d4")]
        series: String,
        #[arg(long, default_value_t = 303)]
        q: u64,
        #[arg(long, default_value_t = 100_000.0)]
        x: f64,
        #[arg(long, default_value_t = 1.0)]
        z: f64,
        /// Number of random residues; 0 uses every residue coprime to q.
        #[arg(long, default_value_t = 8)]
        residues: usize,
        #[arg(long, default_value = "ap.csv")]
        output: String,
    },
    /// Bilinear Kl_4 preset over dyadic boxes.
    Bilinear {
        #[arg(long, default_value = "d3")]
        series: String,
        #[arg(long, default_value_t = 15)]
        q: u64,
        #[arg(long, default_value_t = 10.0)]
        l: f64,
        #[arg(long, default_value_t = 10.0)]
        m: f64,
        #[arg(long, default_value_t = 4)]
        residues: usize,
        #[arg(long, default_value = "bilinear.csv")]
        output: String,
    },
    /// Log-log fits of an experiment CSV (runs the default ladder when no input is given).
    Fit {
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        corr: CorrArgs,
        #[arg(long, default_value = "fit.csv")]
        fit_output: String,
    },
}

#[derive(Debug, Args)]
pub struct CorrArgs {
    #[arg(long, default_value = "d3")]
    pub series: String,
    #[arg(long, default_value_t = 17)]
    pub q0: u64,
    #[arg(long, default_value_t = 59)]
    pub q1: u64,
    /// Character exponent modulo q0 (relative to the least primitive root).
    #[arg(long, default_value_t = 1)]
    pub e0: u64,
    #[arg(long, default_value_t = 1)]
    pub e1: u64,
    /// Ladder X = q, 2q, ..., 2^steps q.
    #[arg(long, default_value_t = 5)]
    pub steps: u32,
    #[arg(long, default_value_t = 4.0)]
    pub z: f64,
    #[arg(long, default_value = "corr.csv")]
    pub output: String,
}

/// Failure categories mapped to exit codes.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Failed(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

const GLOBAL_VALUE_FLAGS: [&str; 4] = ["--jobs", "--seed", "--out", "--config"];

/// Rebuilds argv as `[bin, group, command, <config flags>, <user flags>]` so that
/// options from the config file act as defaults overridden by the command line.
fn merge_config(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let strs: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let mut config = None;
    let mut path_idx = Vec::new();
    let mut i = 1;
    while i < strs.len() {
        let a = &strs[i];
        if let Some(v) = a.strip_prefix("--config=") {
            config = Some(v.to_string());
        } else if a == "--config" {
            config = strs.get(i + 1).cloned();
            i += 1;
        } else if GLOBAL_VALUE_FLAGS.contains(&a.as_str()) {
            i += 1;
        } else if !a.starts_with('-') && path_idx.len() < 2 {
            path_idx.push(i);
        }
        i += 1;
    }
    let Some(config) = config else {
        return Ok(args);
    };
    let text = fs::read_to_string(&config).map_err(|e| CliError::Config(format!("config file {config}: {e}")))?;
    let table: toml::Table = toml::from_str(&text).map_err(|e| CliError::Config(format!("config file {config}: {}", e.message())))?;
    let mut injected = Vec::new();
    for (key, value) in table {
        if key == "config" {
            return Err(CliError::Config("config key `config` is not allowed".into()));
        }
        let flag = format!("--{}", key.replace('_', "-"));
        match value {
            toml::Value::Boolean(true) => injected.push(flag),
            toml::Value::Boolean(false) => {}
            toml::Value::String(s) => {
                injected.push(flag);
                injected.push(s);
            }
            toml::Value::Integer(n) => {
                injected.push(flag);
                injected.push(n.to_string());
            }
            toml::Value::Float(x) => {
                injected.push(flag);
                injected.push(x.to_string());
            }
            _ => return Err(CliError::Config(format!("config key `{key}` must be a scalar"))),
        }
    }
    let mut out: Vec<OsString> = vec![args[0].clone()];
    out.extend(path_idx.iter().map(|&j| args[j].clone()));
    out.extend(injected.into_iter().map(OsString::from));
    out.extend((1..args.len()).filter(|j| !path_idx.contains(j)).map(|j| args[j].clone()));
    Ok(out)
}

fn write_output(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn write_manifest(dir: &Path, output: &str, mut manifest: Manifest) -> Result<(), CliError> {
    manifest.outputs.push(output.to_string());
    write_output(dir, &format!("{output}.manifest.toml"), manifest.to_toml().as_bytes())?;
    Ok(())
}

fn report(b: &battery::Battery) -> Result<(), CliError> {
    println!("{}", b.summary());
    if b.ok() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("{} failed", b.name)))
    }
}

fn crt_character_table(c: &CorrArgs) -> Result<crate::trace::TraceTable, CliError> {
    if !is_prime(c.q0) {
        return Err(Error::NotPrime(c.q0).into());
    }
    let k1 = if c.q1 == 1 {
        SheafSpec::constant_one(1)
    } else if is_prime(c.q1) {
        SheafSpec::kummer(MultChar::new(c.q1, c.e1)?)
    } else {
        return Err(Error::NotPrime(c.q1).into());
    };
    Ok(realize(&SheafSpec::crt_product(SheafSpec::kummer(MultChar::new(c.q0, c.e0)?), k1))?)
}

fn run_corr(c: &CorrArgs) -> Result<Vec<CorrelationRecord>, CliError> {
    let k = crt_character_table(c)?;
    let xs = dyadic_ladder(k.modulus(), c.steps);
    let need = (2.0 * xs.last().copied().unwrap_or(1.0)).floor() as usize;
    let coeffs = series_by_name(&c.series, need.max(1))?;
    let mut recs = correlation_ladder(&coeffs, &k, &xs, &WeightV::new(c.z)?)?;
    for r in &mut recs {
        r.kernel_id = format!("{}_vs_{}", c.series, r.kernel_id);
    }
    sort_records(&mut recs);
    Ok(recs)
}

fn corr_manifest(name: &str, seed: u64, c: &CorrArgs) -> Manifest {
    Manifest::new(name, seed)
        .param("series", &c.series)
        .param("q0", c.q0)
        .param("q1", c.q1)
        .param("e0", c.e0)
        .param("e1", c.e1)
        .param("steps", c.steps)
        .param("z", c.z)
}

fn residues(q: u64, count: usize, seed: u64) -> Vec<u64> {
    let units: Vec<u64> = (1..=q).map(|a| a % q).filter(|&a| gcd(a, q) == 1).collect();
    if count == 0 || count >= units.len() {
        let mut all = units;
        all.sort();
        return all;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = Vec::new();
    while picked.len() < count {
        let a = units[rng.random_range(0..units.len())];
        if !picked.contains(&a) {
            picked.push(a);
        }
    }
    picked.sort();
    picked
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let out = &cli.out;
    let seed = cli.seed;
    match &cli.command {
        Command::Trace(TraceCmd::Gen { spec, output }) => {
            let text = fs::read_to_string(spec).map_err(|e| CliError::Config(format!("{}: {e}", spec.display())))?;
            let spec = parse_spec(&text).map_err(|e| CliError::Config(format!("{}: {e}", spec.display())))?;
            let table = realize(&spec)?;
            let mut buf = Vec::new();
            table.write_csv(&mut buf)?;
            let path = write_output(out, output, &buf)?;
            println!("{} (q = {}, sup-norm {:.6}) -> {}", spec.label(), table.modulus(), table.supnorm(), path.display());
        }
        Command::Trace(TraceCmd::Dft { input, output }) => {
            let file = fs::File::open(input).map_err(|e| CliError::Config(format!("{}: {e}", input.display())))?;
            let table = read_table_csv(std::io::BufReader::new(file))?;
            let mut buf = Vec::new();
            write_table_csv(&dft_normalized(&table), &mut buf)?;
            let path = write_output(out, output, &buf)?;
            println!("transform of length {} -> {}", table.modulus(), path.display());
        }
        Command::Check(cmd) => {
            let b = match cmd {
                CheckCmd::TwistedMult { t, max_q } => battery::twisted_mult(t.trials, *max_q, seed)?,
                CheckCmd::KloostermanFactor { t, max_mn } => battery::kloosterman_factor(t.trials, *max_mn, seed)?,
                CheckCmd::Nsum { t, q0 } => {
                    if let Some(p) = q0 {
                        if !is_prime(*p) || *p < 5 {
                            return Err(CliError::Config(format!("--q0 must be a prime >= 5, got {p}")));
                        }
                    }
                    battery::nsum(t.trials, *q0, seed)?
                }
                CheckCmd::Err3 { t, q0 } => {
                    if let Some(p) = q0 {
                        if !is_prime(*p) {
                            return Err(Error::NotPrime(*p).into());
                        }
                    }
                    battery::err3(t.trials, *q0, seed)?
                }
            };
            report(&b)?;
        }
        Command::Ft2(Ft2Cmd::Case1 { trials, max_k }) => {
            let (rows, max_err) = battery::ft2_case1(*trials, *max_k, seed)?;
            let vanishing = rows.iter().filter(|r| r.params.c2 != r.params.c2p).count();
            let name = "ft2_case1.csv";
            write_output(out, name, battery::ft2_rows_csv(&rows).as_bytes())?;
            write_manifest(out, name, Manifest::new("ft2 case1", seed).param("trials", trials).param("max_k", max_k))?;
            println!("ft2 case1: {} tuples ({vanishing} with c2 != c2'), max |closed - brute| = {max_err:.3e}", rows.len());
            if max_err > 1e-6 {
                return Err(CliError::Failed("closed form disagrees with brute force".into()));
            }
        }
        Command::Ft2(Ft2Cmd::Case2 { trials, max_k }) => {
            let rows = battery::ft2_case2(*trials, *max_k, seed)?;
            let stated = battery::bound_violations(&rows, false);
            let refined = battery::bound_violations(&rows, true);
            let name = "ft2_case2.csv";
            write_output(out, name, battery::ft2_rows_csv(&rows).as_bytes())?;
            write_manifest(out, name, Manifest::new("ft2 case2", seed).param("trials", trials).param("max_k", max_k))?;
            println!(
                "ft2 case2: {} tuples, {stated} exceed k*phi(r c1/n1), {refined} exceed k*phi(r c1/n1)*gcd(c2,c2')",
                rows.len()
            );
            if stated > 0 {
                return Err(CliError::Failed("bound k*phi(r c1/n1) violated".into()));
            }
        }
        Command::Paircorr(PairCmd::Sweep { family, q_min, q_max, count, include_degenerate, output }) => {
            let family: PairFamily = family.parse()?;
            let opts = SweepOptions {
                family,
                q_min: *q_min,
                q_max: *q_max,
                count: *count,
                seed,
                non_degenerate_only: !include_degenerate,
            };
            let recs = pair_sweep(&opts)?;
            let mut buf = Vec::new();
            write_pair_csv(&recs, &mut buf)?;
            write_output(out, output, &buf)?;
            let manifest = Manifest::new("paircorr sweep", seed)
                .param("family", family.name())
                .param("q_min", q_min)
                .param("q_max", q_max)
                .param("count", count)
                .param("include_degenerate", include_degenerate);
            write_manifest(out, output, manifest)?;
            let max = recs.iter().filter(|r| !r.degenerate).map(|r| r.ratio_to_sqrtq()).fold(0.0, f64::max);
            println!("paircorr sweep: {} tuples, max |sum|/sqrt(q) over non-degenerate = {max:.4}", recs.len());
        }
        Command::Exp(ExpCmd::Corr(c)) => {
            let recs = run_corr(c)?;
            let mut buf = Vec::new();
            write_records_csv(&recs, &mut buf)?;
            write_output(out, &c.output, &buf)?;
            write_manifest(out, &c.output, corr_manifest("exp corr", seed, c))?;
            for r in &recs {
                println!("X = {:>10} |S| = {:.4e} ratio = {:.4e}", r.x, r.value.norm(), r.ratio);
            }
        }
        Command::Exp(ExpCmd::Ap { series, q, x, z, residues: count, output }) => {
            let coeffs = series_by_name(series, (2.0 * x).floor() as usize)?;
            let v = WeightV::new(*z)?;
            let picked = residues(*q, *count, seed);
            let rows = par::map(&picked, |&a| ap_discrepancy_with_mass(&coeffs, *q, a as i64, *x, &v))
                .into_iter()
                .collect::<Result<Vec<_>, Error>>()?;
            let recs: Vec<CorrelationRecord> = picked
                .iter()
                .zip(rows)
                .map(|(&a, (d, mass))| ap_record(*q, a, *x, *z, d, mass, series))
                .collect();
            let mut buf = Vec::new();
            write_records_csv(&recs, &mut buf)?;
            write_output(out, output, &buf)?;
            let manifest = Manifest::new("exp ap", seed)
                .param("series", series)
                .param("q", q)
                .param("x", x)
                .param("z", z)
                .param("residues", format!("{picked:?}"));
            write_manifest(out, output, manifest)?;
            println!("exp ap: {} residues modulo {q}", recs.len());
        }
        Command::Exp(ExpCmd::Bilinear { series, q, l, m, residues: count, output }) => {
            let coeffs = series_by_name(series, ((2.0 * m).floor() as usize).max(1))?;
            let picked = residues(*q, *count, seed);
            let mut recs = Vec::new();
            for &a in &picked {
                let value = bilinear_preset(*l, *m, *q, a as i64, &coeffs)?;
                recs.push(bilinear_record(*q, a, *l, *m, value, series));
            }
            let mut buf = Vec::new();
            write_records_csv(&recs, &mut buf)?;
            write_output(out, output, &buf)?;
            let manifest = Manifest::new("exp bilinear", seed)
                .param("series", series)
                .param("q", q)
                .param("l", l)
                .param("m", m)
                .param("residues", format!("{picked:?}"));
            write_manifest(out, output, manifest)?;
            for r in &recs {
                println!("{}: {:.6e}", r.kernel_id, r.value.norm());
            }
        }
        Command::Exp(ExpCmd::Fit { input, corr, fit_output }) => {
            let recs = match input {
                Some(path) => {
                    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                    read_records_csv(&text)?
                }
                None => {
                    let recs = run_corr(corr)?;
                    let mut buf = Vec::new();
                    write_records_csv(&recs, &mut buf)?;
                    write_output(out, &corr.output, &buf)?;
                    write_manifest(out, &corr.output, corr_manifest("exp fit", seed, corr))?;
                    recs
                }
            };
            let fits = fit_groups(&recs)?;
            let mut buf = Vec::new();
            write_fits_csv(&fits, &mut buf)?;
            write_output(out, fit_output, &buf)?;
            let mut manifest = Manifest::new("exp fit", seed);
            if let Some(p) = input {
                manifest = manifest.param("input", p.display());
            }
            write_manifest(out, fit_output, manifest)?;
            for f in &fits {
                println!("{} {}: slope {:.6} (r^2 {:.4}, {} points)", f.experiment, f.kernel_id, f.slope, f.r_squared, f.n_points);
            }
        }
    }
    Ok(())
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run(args: impl IntoIterator<Item = OsString>) -> i32 {
    let args: Vec<OsString> = args.into_iter().collect();
    let args = match merge_config(args) {
        Ok(a) => a,
        Err(CliError::Config(msg)) | Err(CliError::Failed(msg)) => {
            eprintln!("error: {msg}");
            return 2;
        }
    };
    let matches = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return 2;
        }
    };
    match par::with_jobs(cli.jobs, || execute(&cli)) {
        Ok(()) => 0,
        Err(CliError::Failed(msg)) => {
            eprintln!("failure: {msg}");
            1
        }
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn config_flags_are_overridden_by_command_line() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.toml");
        fs::write(&cfg, "trials = 5\nseed = 9\n").unwrap();
        let cfg = cfg.to_string_lossy().into_owned();
        let merged = merge_config(os(&["twistlab", "--config", &cfg, "check", "nsum", "--trials", "7"])).unwrap();
        let cli = Cli::try_parse_from(merged).unwrap();
        assert_eq!(cli.seed, 9);
        match cli.command {
            Command::Check(CheckCmd::Nsum { t, .. }) => assert_eq!(t.trials, 7),
            other => panic!("{other:?}"),
        }
        let merged = merge_config(os(&["twistlab", "check", "nsum", "--config", &cfg, "--seed", "3"])).unwrap();
        let cli = Cli::try_parse_from(merged).unwrap();
        assert_eq!(cli.seed, 3);
        match cli.command {
            Command::Check(CheckCmd::Nsum { t, .. }) => assert_eq!(t.trials, 5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(os(&["twistlab", "check", "nsum", "--q0", "7", "--trials", "5", "--seed", "1"])), 0);
        assert_eq!(run(os(&["twistlab", "check", "nsum", "--q0", "8"])), 2);
        assert_eq!(run(os(&["twistlab", "check", "bogus"])), 2);
    }
}
