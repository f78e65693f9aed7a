//! Command-line parsing and the merged run configuration.
//!
//! Values come from flags first, then a `key = value` config file, then
//! `HTM_THREADS` and built-in defaults.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use htm_core::eigenform::MAX_DELTA_TERMS;

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "htm",
    version,
    about = "Central values and second moments of twisted L-functions"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: CommandArgs,
}

#[derive(Debug, Args, Default, Clone)]
pub struct GlobalArgs {
    /// Line-based `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: HTM_THREADS, else all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Target absolute accuracy, in [1e-12, 1e-3].
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Weight k of the eigenform.
    #[arg(long, global = true)]
    pub weight: Option<u32>,
    /// `builtin-delta` or a file of `p a(p)` lines.
    #[arg(long, global = true)]
    pub coeffs: Option<String>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write results here instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Rankin-Selberg constant used for an extra ratio.
    #[arg(long = "k-override", global = true)]
    pub k_override: Option<f64>,
    /// Binary cache of exact tau values.
    #[arg(long, global = true)]
    pub cache: Option<PathBuf>,
    /// Largest coefficient index any computation may use.
    #[arg(long = "max-terms", global = true)]
    pub max_terms: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum CommandArgs {
    /// Tabulate tau(n) and a(n).
    Coeffs {
        #[arg(long = "N")]
        n: Option<usize>,
    },
    /// List the Dirichlet characters of one modulus.
    Chars {
        #[command(flatten)]
        moduli: ModuliArgs,
    },
    /// Central value L(f x chi, 1/2 + it) of one twist.
    Lvalue {
        #[arg(long)]
        q: Option<u64>,
        #[arg(long = "char")]
        character: Option<u64>,
        /// Imaginary part t of the shift s = it.
        #[arg(long, allow_hyphen_values = true)]
        t: Option<f64>,
    },
    /// Second moment over primitive characters, every route.
    Moment {
        #[command(flatten)]
        moduli: ModuliArgs,
    },
    /// Predicted main term only.
    Predict {
        #[command(flatten)]
        moduli: ModuliArgs,
    },
    /// Size condition and divisor-sum diagnostics.
    Check {
        #[command(flatten)]
        moduli: ModuliArgs,
    },
    /// Fit secondary constants of the diagonal sum over a range of moduli.
    Fit {
        #[command(flatten)]
        moduli: ModuliArgs,
    },
}

#[derive(Debug, Args, Clone, Default)]
pub struct ModuliArgs {
    #[arg(long, conflicts_with = "q_range")]
    pub q: Option<u64>,
    /// Inclusive range `a:b`.
    #[arg(long = "q-range")]
    pub q_range: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoeffSource {
    BuiltinDelta,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Coeffs { n: usize },
    Chars { moduli: Vec<u64> },
    Lvalue { q: u64, character: u64, t: f64 },
    Moment { moduli: Vec<u64>, range: bool },
    Predict { moduli: Vec<u64> },
    Check { moduli: Vec<u64> },
    Fit { moduli: Vec<u64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub weight: u32,
    pub source: CoeffSource,
    pub tol: f64,
    pub threads: usize,
    pub format: Format,
    pub output: Option<PathBuf>,
    pub k_override: Option<f64>,
    pub cache: Option<PathBuf>,
    pub max_terms: usize,
}

pub const DEFAULT_TOL: f64 = 1e-8;
pub const THREADS_ENV: &str = "HTM_THREADS";

const KNOWN_KEYS: &[&str] = &[
    "threads",
    "tol",
    "weight",
    "coeffs",
    "format",
    "output",
    "k-override",
    "cache",
    "max-terms",
    "q",
    "q-range",
    "N",
    "char",
    "t",
];

/// Parses `key = value` lines; `#` starts a comment line.
pub fn parse_config_file(text: &str) -> CliResult<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Config(format!("config line {}: expected `key = value`", i + 1))
        })?;
        let key = key.trim().replace('_', "-");
        let key = if key.eq_ignore_ascii_case("n") {
            "N".to_string()
        } else {
            key
        };
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(CliError::Config(format!(
                "config line {}: unknown key `{key}`",
                i + 1
            )));
        }
        out.insert(key, value.trim().to_string());
    }
    Ok(out)
}

struct Layers<'a> {
    file: &'a BTreeMap<String, String>,
}

impl Layers<'_> {
    fn pick<T: std::str::FromStr>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Config(format!("config key `{key}`: cannot parse `{v}`"))),
            None => Ok(None),
        }
    }
}

fn parse_range(text: &str) -> CliResult<Vec<u64>> {
    let bad = || CliError::Config(format!("q-range must look like `a:b`, got `{text}`"));
    let (a, b) = text.split_once(':').ok_or_else(bad)?;
    let a: u64 = a.trim().parse().map_err(|_| bad())?;
    let b: u64 = b.trim().parse().map_err(|_| bad())?;
    if a > b {
        return Err(CliError::Config(format!("empty q-range {a}:{b}")));
    }
    Ok((a..=b).collect())
}

fn moduli(args: &ModuliArgs, layers: &Layers<'_>, min: u64) -> CliResult<(Vec<u64>, bool)> {
    let (list, range) = match (&args.q, &args.q_range) {
        (Some(q), _) => (vec![*q], false),
        (None, Some(r)) => (parse_range(r)?, true),
        (None, None) => match (layers.file.get("q"), layers.file.get("q-range")) {
            (Some(_), _) => (
                vec![layers.pick::<u64>(None, "q")?.expect("present")],
                false,
            ),
            (None, Some(r)) => (parse_range(r)?, true),
            (None, None) => {
                return Err(CliError::Config(
                    "one of --q or --q-range is required".into(),
                ))
            }
        },
    };
    if let Some(bad) = list.iter().find(|&&q| q < min) {
        return Err(CliError::Config(format!(
            "modulus must be at least {min}, got {bad}"
        )));
    }
    Ok((list, range))
}

fn threads_from_env(env_threads: Option<String>) -> CliResult<Option<usize>> {
    match env_threads {
        Some(v) if !v.trim().is_empty() => v.trim().parse().map(Some).map_err(|_| {
            CliError::Config(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))
        }),
        _ => Ok(None),
    }
}

impl RunConfig {
    /// Merges flags, the config file contents and the environment.
    pub fn resolve(
        cli: Cli,
        file: &BTreeMap<String, String>,
        env_threads: Option<String>,
    ) -> CliResult<Self> {
        let layers = Layers { file };
        let g = cli.global;
        let command = match cli.command {
            CommandArgs::Coeffs { n } => {
                let n = layers
                    .pick(n, "N")?
                    .ok_or_else(|| CliError::Config("coeffs needs --N".into()))?;
                if n == 0 {
                    return Err(CliError::Config("--N must be at least 1".into()));
                }
                Command::Coeffs { n }
            }
            CommandArgs::Chars { moduli: m } => Command::Chars {
                moduli: moduli(&m, &layers, 1)?.0,
            },
            CommandArgs::Lvalue { q, character, t } => {
                let q = layers
                    .pick(q, "q")?
                    .ok_or_else(|| CliError::Config("lvalue needs --q".into()))?;
                let character = layers
                    .pick(character, "char")?
                    .ok_or_else(|| CliError::Config("lvalue needs --char".into()))?;
                let t = layers.pick(t, "t")?.unwrap_or(0.0);
                if q < 3 {
                    return Err(CliError::Config(format!(
                        "no primitive characters modulo {q}"
                    )));
                }
                if !t.is_finite() {
                    return Err(CliError::Config("--t must be finite".into()));
                }
                Command::Lvalue { q, character, t }
            }
            CommandArgs::Moment { moduli: m } => {
                let (moduli, range) = moduli(&m, &layers, 3)?;
                Command::Moment { moduli, range }
            }
            CommandArgs::Predict { moduli: m } => Command::Predict {
                moduli: moduli(&m, &layers, 3)?.0,
            },
            CommandArgs::Check { moduli: m } => Command::Check {
                moduli: moduli(&m, &layers, 3)?.0,
            },
            CommandArgs::Fit { moduli: m } => Command::Fit {
                moduli: moduli(&m, &layers, 3)?.0,
            },
        };

        let weight = layers.pick(g.weight, "weight")?.unwrap_or(12);
        let source = match layers.pick(g.coeffs, "coeffs")? {
            None => CoeffSource::BuiltinDelta,
            Some(s) if s == "builtin-delta" => CoeffSource::BuiltinDelta,
            Some(path) => CoeffSource::File(PathBuf::from(path)),
        };
        if source == CoeffSource::BuiltinDelta && weight != 12 {
            return Err(CliError::Config(format!(
                "builtin-delta has weight 12, got --weight {weight}"
            )));
        }
        if weight < 12 || weight % 2 != 0 {
            return Err(CliError::Config(format!(
                "weight must be even and >= 12, got {weight}"
            )));
        }

        let tol = layers.pick(g.tol, "tol")?.unwrap_or(DEFAULT_TOL);
        if !(1e-12..=1e-3).contains(&tol) {
            return Err(CliError::Config(format!(
                "tol must lie in [1e-12, 1e-3], got {tol}"
            )));
        }

        let threads = match layers.pick(g.threads, "threads")? {
            Some(t) => t,
            None => threads_from_env(env_threads)?
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
        };
        if threads == 0 {
            return Err(CliError::Config("thread count must be at least 1".into()));
        }

        let format = match layers.pick::<String>(g.format.map(|f| format!("{f:?}")), "format")? {
            None => match command {
                Command::Coeffs { .. } => Format::Csv,
                Command::Moment { range: true, .. } => Format::Csv,
                _ => Format::Json,
            },
            Some(f) => Format::from_str(&f, true)
                .map_err(|_| CliError::Config(format!("format must be csv or json, got `{f}`")))?,
        };

        let k_override = layers.pick(g.k_override, "k-override")?;
        if let Some(k) = k_override {
            if !(k > 0.0 && k.is_finite()) {
                return Err(CliError::Config(format!(
                    "K override must be positive, got {k}"
                )));
            }
        }

        let max_terms = layers
            .pick(g.max_terms, "max-terms")?
            .unwrap_or(MAX_DELTA_TERMS);
        if max_terms == 0 {
            return Err(CliError::Config("max-terms must be at least 1".into()));
        }

        Ok(Self {
            command,
            weight,
            source,
            tol,
            threads,
            format,
            output: layers.pick(g.output, "output")?,
            k_override,
            cache: layers.pick(g.cache, "cache")?,
            max_terms,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(args: &[&str], file: &str, env: Option<&str>) -> CliResult<RunConfig> {
        let cli = Cli::try_parse_from(std::iter::once("htm").chain(args.iter().copied()))
            .map_err(|e| CliError::Config(e.to_string()))?;
        RunConfig::resolve(cli, &parse_config_file(file)?, env.map(String::from))
    }

    #[test]
    fn flags_beat_file_beat_env() {
        let file = "threads = 3\ntol = 1e-6\n";
        let c = resolve(&["moment", "--q", "7", "--threads", "2"], file, Some("5")).unwrap();
        assert_eq!(c.threads, 2);
        assert_eq!(c.tol, 1e-6);
        let c = resolve(&["moment", "--q", "7"], file, Some("5")).unwrap();
        assert_eq!(c.threads, 3);
        let c = resolve(&["moment", "--q", "7"], "", Some("5")).unwrap();
        assert_eq!(c.threads, 5);
        assert_eq!(c.tol, DEFAULT_TOL);
    }

    #[test]
    fn config_file_supplies_command_arguments() {
        let c = resolve(&["moment"], "q-range = 3:10\nformat = json\n", None).unwrap();
        assert_eq!(
            c.command,
            Command::Moment {
                moduli: (3..=10).collect(),
                range: true
            }
        );
        assert_eq!(c.format, Format::Json);
        let c = resolve(&["coeffs"], "N = 5", None).unwrap();
        assert_eq!(c.command, Command::Coeffs { n: 5 });
    }

    #[test]
    fn rejects_invalid_settings() {
        for (args, file) in [
            (&["coeffs", "--N", "0"][..], ""),
            (&["moment", "--q", "7", "--tol", "1e-2"][..], ""),
            (&["moment", "--q", "7", "--tol", "1e-13"][..], ""),
            (&["moment", "--q", "7", "--threads", "0"][..], ""),
            (&["moment", "--q", "2"][..], ""),
            (&["moment", "--q-range", "9:3"][..], ""),
            (&["moment"][..], ""),
            (&["moment", "--q", "7"][..], "colour = red"),
            (&["moment", "--q", "7"][..], "tol 1e-6"),
            (&["moment", "--q", "7", "--weight", "14"][..], ""),
        ] {
            let err = resolve(args, file, None).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{args:?} / {file}");
        }
    }

    #[test]
    fn default_formats() {
        assert_eq!(
            resolve(&["coeffs", "--N", "3"], "", None).unwrap().format,
            Format::Csv
        );
        assert_eq!(
            resolve(&["moment", "--q", "5"], "", None).unwrap().format,
            Format::Json
        );
        assert_eq!(
            resolve(&["moment", "--q-range", "3:5"], "", None)
                .unwrap()
                .format,
            Format::Csv
        );
    }
}
