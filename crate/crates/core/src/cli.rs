//! Command-line front end.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 for
//! configuration, usage or output errors.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::density::{enumerate_exact, rn_weight};
use crate::environment::{generate_environment, Generator};
use crate::excitation::{Excitation, REGISTRY};
use crate::experiments::{run, ExperimentSpec};
use crate::parallel::with_workers;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "ERW_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "erw-output";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Worker count: a positive integer or `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Workers {
    #[default]
    Auto,
    Count(usize),
}

impl Workers {
    fn threads(self) -> Option<usize> {
        match self {
            Workers::Auto => None,
            Workers::Count(n) => Some(n),
        }
    }
}

impl std::str::FromStr for Workers {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(Workers::Auto);
        }
        match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Workers::Count(n)),
            _ => Err(format!("workers must be a positive integer or \"auto\", got `{s}`")),
        }
    }
}

impl Serialize for Workers {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Workers::Auto => s.serialize_str("auto"),
            Workers::Count(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Workers {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(i64),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(n) if n > 0 => Ok(Workers::Count(n as usize)),
            Raw::Count(n) => Err(serde::de::Error::custom(format!("workers must be positive, got {n}"))),
            Raw::Name(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Contents of a run configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentSpec,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub workers: Workers,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.experiment.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::from_toml(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

#[derive(Debug, Parser)]
#[command(name = "erw", version, about = "Excited random walk and excited Brownian motion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct ConfigArg {
    /// Run configuration (TOML).
    #[arg(value_name = "CONFIG", conflicts_with = "config")]
    path: Option<PathBuf>,
    /// Same as the positional argument
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn path(&self) -> Result<&Path, String> {
        self.path
            .as_deref()
            .or(self.config.as_deref())
            .ok_or_else(|| "a configuration file is required".to_string())
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment and write its report and CSV files.
    Run {
        #[command(flatten)]
        config: ConfigArg,
        /// Overrides the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads, or `auto`
        #[arg(long)]
        workers: Option<Workers>,
        /// Output directory; falls back to the config, then ERW_OUTPUT_DIR
        #[arg(long, value_name = "DIR")]
        output: Option<PathBuf>,
    },
    /// Check a configuration without simulating.
    Validate {
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Print the excitation registry.
    ListPhi,
    /// Exact path enumeration and the density normalization defect.
    Enumerate {
        /// Path length, at most 20
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value = "tanh")]
        phi: String,
        /// Scale `n`; defaults to the number of steps.
        #[arg(long)]
        n: Option<usize>,
        /// Multiply the excitation by a Rademacher environment.
        #[arg(long)]
        omega: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Parses `args` (program name first) and executes; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Run {
            config,
            seed,
            workers,
            output,
        } => cmd_run(&config, seed, workers, output),
        Command::Validate { config } => cmd_validate(&config),
        Command::ListPhi => {
            print!("{}", registry_table());
            Ok(EXIT_PASS)
        }
        Command::Enumerate {
            steps,
            phi,
            n,
            omega,
            seed,
        } => cmd_enumerate(steps, &phi, n, omega, seed),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_CONFIG
        }
    }
}

fn resolve_output(flag: Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    flag.or_else(|| cfg.output_dir.clone())
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

fn write_file(dir: &Path, name: &str, contents: &[u8]) -> Result<(), String> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn cmd_run(config: &ConfigArg, seed: Option<u64>, workers: Option<Workers>, output: Option<PathBuf>) -> Result<i32, String> {
    let mut cfg = RunConfig::load(config.path()?)?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Some(w) = workers {
        cfg.workers = w;
    }
    let dir = resolve_output(output, &cfg);
    fs::create_dir_all(&dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    write_file(&dir, ".write-probe", b"")?;
    let _ = fs::remove_file(dir.join(".write-probe"));

    let out = with_workers(cfg.workers.threads(), || run(&cfg.experiment, cfg.master_seed)).map_err(|e| e.to_string())?;
    for a in &out.artifacts {
        write_file(&dir, &a.file_name, a.contents.as_bytes())?;
    }
    let json = serde_json::to_string_pretty(&out.report).map_err(|e| e.to_string())?;
    write_file(&dir, "report.json", json.as_bytes())?;
    for c in &out.report.checks {
        println!(
            "{} {}: {:.6} (tolerance {} = {})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.statistic,
            c.tolerance_name,
            c.tolerance
        );
    }
    println!("report written to {}", dir.join("report.json").display());
    Ok(if out.report.passed() { EXIT_PASS } else { EXIT_FAIL })
}

fn cmd_validate(config: &ConfigArg) -> Result<i32, String> {
    let cfg = RunConfig::load(config.path()?)?;
    println!("ok: {} experiment, master seed {}", cfg.experiment.kind(), cfg.master_seed);
    Ok(EXIT_PASS)
}

/// The registry as aligned text.
pub fn registry_table() -> String {
    let mut s = format!("{:<12} {:<12} {:<12} {:<10} {}\n", "family", "params", "defaults", "continuous", "profile");
    for f in REGISTRY {
        let defaults: Vec<String> = f.defaults.iter().map(|d| d.to_string()).collect();
        s.push_str(&format!(
            "{:<12} {:<12} {:<12} {:<10} {}\n",
            f.name,
            f.params.join(","),
            defaults.join(","),
            f.continuous,
            f.summary
        ));
    }
    s
}

fn cmd_enumerate(steps: usize, family: &str, n: Option<usize>, omega: bool, seed: u64) -> Result<i32, String> {
    let (phi, generator) = if omega {
        let g = Generator::rademacher();
        let base = Excitation::from_registry(family, false, None).map_err(|e| e.to_string())?;
        let phi = Excitation::from_registry(family, true, Some(base.bound())).map_err(|e| e.to_string())?;
        (phi, g)
    } else {
        (
            Excitation::from_registry(family, false, None).map_err(|e| e.to_string())?,
            Generator::Constant { value: 0.0 },
        )
    };
    let n = n.unwrap_or(steps.max(1));
    let env = generate_environment(&generator, seed, steps.max(1)).map_err(|e| e.to_string())?;
    let law = enumerate_exact(steps, &phi, &env, n).map_err(|e| e.to_string())?;
    let scale = 0.5f64.powi(steps as i32);
    let (mut total, mut gap) = (0.0, 0.0f64);
    for code in 0..(1u32 << steps) {
        let w = rn_weight(&law.path(code), &phi, &env, steps).map_err(|e| e.to_string())?;
        total += w.value * scale;
        gap = gap.max((w.value * scale - law.probability(code)).abs());
    }
    let defect = (total - 1.0).abs();
    println!("paths: {}", 1u64 << steps);
    println!("normalization defect |sum rho 2^-k - 1|: {defect:e}");
    println!("max |P(path) - rho 2^-k|: {gap:e}");
    println!("site,probability");
    for (site, p) in law.endpoint_law() {
        println!("{site},{p}");
    }
    Ok(if defect <= 1e-12 && gap <= 1e-12 { EXIT_PASS } else { EXIT_FAIL })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn workers_parse() {
        assert_eq!("auto".parse::<Workers>().unwrap(), Workers::Auto);
        assert_eq!("3".parse::<Workers>().unwrap(), Workers::Count(3));
        assert!("0".parse::<Workers>().is_err());
        #[derive(Deserialize)]
        struct W {
            w: Workers,
        }
        assert_eq!(toml::from_str::<W>("w = 4").unwrap().w, Workers::Count(4));
        assert_eq!(toml::from_str::<W>("w = \"auto\"").unwrap().w, Workers::Auto);
        assert!(toml::from_str::<W>("w = -1").is_err());
    }

    #[test]
    fn unknown_flag_is_config_error() {
        assert_eq!(main_with_args(["erw", "list-phi", "--bogus"]), EXIT_CONFIG);
        assert_eq!(main_with_args(["erw", "validate", "/no/such/file.toml"]), EXIT_CONFIG);
    }

    #[test]
    fn enumerate_passes() {
        assert_eq!(main_with_args(["erw", "enumerate", "--steps", "6", "--phi", "tanh"]), EXIT_PASS);
        assert_eq!(main_with_args(["erw", "enumerate", "--steps", "25"]), EXIT_CONFIG);
    }

    #[test]
    fn registry_lists_every_family() {
        let t = registry_table();
        for f in REGISTRY {
            assert!(t.contains(f.name));
        }
    }
}
