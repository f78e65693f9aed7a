use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use htm_core::arith::{
    check_assumption, divisor_condition_sum, divisor_split_threshold, euler_product_p, factorize,
    psi, DEFAULT_K_CUTOFF, MIN_CONDITION_MODULUS,
};
use htm_core::characters::CharacterGroup;
use htm_core::eigenform::{
    delta_coefficients, hecke_extend, parse_prime_file, read_tau_cache, write_tau_cache,
    EigenformCoefficients, MAX_DELTA_TERMS,
};
use htm_core::lvalue::{afe_length, fe_residual, fe_residual_length, l_value_afe, AfeOptions};
use htm_core::moments::{
    default_k, diagonal_sum, double_sum_length, fit_secondary_constants, main_term, moment_report,
    required_terms, v_table, MomentOptions, MomentReport,
};
use htm_core::special::SmoothKernel;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{CoeffSource, Command, Format, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{emit, fmt_float, fmt_opt, json, Csv};

pub fn run(cfg: &RunConfig) -> CliResult<()> {
    let text = match &cfg.command {
        Command::Coeffs { n } => coeffs(cfg, *n)?,
        Command::Chars { moduli } => chars(cfg, moduli)?,
        Command::Lvalue { q, character, t } => lvalue(cfg, *q, *character, *t)?,
        Command::Moment { moduli, range } => moment(cfg, moduli, *range)?,
        Command::Predict { moduli } => predict(cfg, moduli)?,
        Command::Check { moduli } => check(cfg, moduli)?,
        Command::Fit { moduli } => fit(cfg, moduli)?,
    };
    emit(&text, cfg.output.as_deref())
}

fn psi_f64(q: u64) -> CliResult<f64> {
    let r = psi(&factorize(q)?);
    Ok(*r.numer() as f64 / *r.denom() as f64)
}

fn read_cache(path: &Path, terms: usize) -> Option<EigenformCoefficients> {
    let file = fs::File::open(path).ok()?;
    match read_tau_cache(std::io::BufReader::new(file)) {
        Ok(c) if c.weight() == 12 && c.len() >= terms => Some(c.truncated(terms)),
        Ok(_) => None,
        Err(e) => {
            eprintln!("htm: ignoring cache {}: {e}", path.display());
            None
        }
    }
}

fn write_cache(path: &Path, coeffs: &EigenformCoefficients) -> CliResult<()> {
    let ctx = || format!("writing cache {}", path.display());
    let file = fs::File::create(path).map_err(|e| CliError::io(ctx(), e))?;
    write_tau_cache(BufWriter::new(file), coeffs).map_err(|e| CliError::io(ctx(), e))
}

/// `a(n)` for `n <= terms` from the configured source, honouring the cache.
fn load_coefficients(
    cfg: &RunConfig,
    terms: usize,
    cache: Option<&Path>,
) -> CliResult<EigenformCoefficients> {
    let limit = cfg.max_terms.min(MAX_DELTA_TERMS);
    if terms > limit {
        return Err(CliError::Budget(format!(
            "{terms} coefficients needed, budget is {limit}"
        )));
    }
    match &cfg.source {
        CoeffSource::BuiltinDelta => {
            if let Some(c) = cache.and_then(|p| read_cache(p, terms)) {
                return Ok(c);
            }
            let coeffs = delta_coefficients(terms)?;
            if let Some(p) = cache {
                write_cache(p, &coeffs)?;
            }
            Ok(coeffs)
        }
        CoeffSource::File(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
            let primes = parse_prime_file(&text)?;
            let ext = hecke_extend(&primes, terms, cfg.weight)?;
            if !ext.deligne_warnings.is_empty() {
                eprintln!(
                    "htm: {} primes violate |a(p)| <= 2, first {}",
                    ext.deligne_warnings.len(),
                    ext.deligne_warnings[0]
                );
            }
            Ok(ext.coeffs)
        }
    }
}

fn coeffs(cfg: &RunConfig, n: usize) -> CliResult<String> {
    let cache: Option<PathBuf> = cfg.cache.clone().or_else(|| {
        cfg.output.as_ref().map(|p| {
            let mut s = p.clone().into_os_string();
            s.push(".tau");
            PathBuf::from(s)
        })
    });
    let cache = match cfg.source {
        CoeffSource::BuiltinDelta => cache,
        CoeffSource::File(_) => None,
    };
    let c = load_coefficients(cfg, n, cache.as_deref())?;
    let tau = |i: usize| c.tau(i).map(|t| t.to_string()).unwrap_or_default();
    Ok(match cfg.format {
        Format::Csv => {
            let mut t = Csv::new(&["n", "tau", "a"]);
            for i in 1..=n {
                t.row(&[i.to_string(), tau(i), fmt_float(c.a(i))]);
            }
            t.finish()
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Row {
                n: usize,
                tau: Option<String>,
                a: f64,
            }
            let rows: Vec<Row> = (1..=n)
                .map(|i| Row {
                    n: i,
                    tau: c.tau(i).map(|t| t.to_string()),
                    a: c.a(i),
                })
                .collect();
            json(&rows)
        }
    })
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct CharacterRow {
    pub q: u64,
    pub index: u64,
    pub conductor: u64,
    pub primitive: bool,
    pub parity: i32,
    pub real: bool,
    pub root_number: Option<Complex64>,
}

fn chars(cfg: &RunConfig, moduli: &[u64]) -> CliResult<String> {
    let mut rows = Vec::new();
    for &q in moduli {
        let group = CharacterGroup::new(q)?;
        for chi in group.characters() {
            rows.push(CharacterRow {
                q,
                index: chi.index(),
                conductor: chi.conductor(),
                primitive: chi.is_primitive(),
                parity: chi.parity(),
                real: chi.is_real(),
                root_number: if chi.is_primitive() {
                    Some(chi.root_number(cfg.weight)?)
                } else {
                    None
                },
            });
        }
    }
    Ok(match cfg.format {
        Format::Json => json(&rows),
        Format::Csv => {
            let mut t = Csv::new(&[
                "q",
                "index",
                "conductor",
                "primitive",
                "parity",
                "real",
                "root_number_re",
                "root_number_im",
            ]);
            for r in &rows {
                t.row(&[
                    r.q.to_string(),
                    r.index.to_string(),
                    r.conductor.to_string(),
                    r.primitive.to_string(),
                    r.parity.to_string(),
                    r.real.to_string(),
                    fmt_opt(r.root_number.map(|z| z.re)),
                    fmt_opt(r.root_number.map(|z| z.im)),
                ]);
            }
            t.finish()
        }
    })
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct LValueOutput {
    pub q: u64,
    pub char: u64,
    pub s: Complex64,
    pub value: Complex64,
    pub abs: f64,
    #[serde(rename = "truncation_N")]
    pub truncation_n: usize,
    pub tail_bound: f64,
    pub eps_trunc: f64,
    pub root_number: Complex64,
    pub fe_residual: f64,
    pub params_used: Vec<SmoothKernel>,
}

fn lvalue(cfg: &RunConfig, q: u64, index: u64, t: f64) -> CliResult<String> {
    let group = CharacterGroup::new(q)?;
    let chi = group.character(index)?;
    if !chi.is_primitive() {
        return Err(CliError::Config(format!(
            "character {index} mod {q} is not primitive (conductor {})",
            chi.conductor()
        )));
    }
    let s = Complex64::new(0.0, t);
    let terms = afe_length(cfg.weight, q, s, cfg.tol, &AfeOptions::default())?
        .max(fe_residual_length(cfg.weight, q, s, cfg.tol)?);
    let coeffs = load_coefficients(cfg, terms, cfg.cache.as_deref())?;
    let r = l_value_afe(&coeffs, &chi, s, cfg.tol)?;
    let out = LValueOutput {
        q,
        char: index,
        s,
        value: r.value,
        abs: r.value.norm(),
        truncation_n: r.truncation_n,
        tail_bound: r.tail_bound,
        eps_trunc: r.eps_trunc,
        root_number: chi.root_number(cfg.weight)?,
        fe_residual: fe_residual(&coeffs, &chi, s, cfg.tol)?,
        params_used: r.params_used,
    };
    if cfg.format == Format::Csv {
        let mut tbl = Csv::new(&[
            "q",
            "char",
            "t",
            "value_re",
            "value_im",
            "abs",
            "truncation_N",
            "tail_bound",
            "fe_residual",
        ]);
        tbl.row(&[
            q.to_string(),
            index.to_string(),
            fmt_float(t),
            fmt_float(out.value.re),
            fmt_float(out.value.im),
            fmt_float(out.abs),
            out.truncation_n.to_string(),
            fmt_float(out.tail_bound),
            fmt_float(out.fe_residual),
        ]);
        return Ok(tbl.finish());
    }
    Ok(json(&out))
}

/// Coefficients needed for the full report of every modulus, including
/// the double sum wherever it fits in the budget.
fn moment_terms(cfg: &RunConfig, moduli: &[u64]) -> CliResult<usize> {
    let limit = cfg.max_terms.min(MAX_DELTA_TERMS);
    let mut terms = 0;
    for &q in moduli {
        terms = terms.max(required_terms(cfg.weight, q, cfg.tol)?);
        let ds = double_sum_length(cfg.weight, q, cfg.tol)?;
        if ds as usize <= limit {
            terms = terms.max(ds as usize);
        }
    }
    Ok(terms)
}

pub const MOMENT_CSV_HEADER: [&str; 12] = [
    "q",
    "direct",
    "double_sum",
    "diagonal",
    "off_diagonal",
    "small_div",
    "large_div",
    "main_term",
    "ratio",
    "condition_lhs",
    "condition_rhs",
    "divisor_condition_sum",
];

fn moment(cfg: &RunConfig, moduli: &[u64], range: bool) -> CliResult<String> {
    let terms = moment_terms(cfg, moduli)?;
    let coeffs = load_coefficients(cfg, terms, cfg.cache.as_deref())?;
    let k = default_k(&coeffs)?;
    let opts = MomentOptions {
        tol: cfg.tol,
        k_override: cfg.k_override,
        max_terms: cfg.max_terms,
    };
    let mut reports = Vec::with_capacity(moduli.len());
    for &q in moduli {
        let (report, timings) = moment_report(&coeffs, q, k, &opts)?;
        eprintln!(
            "htm: q = {q}: direct {:.2}s, double sum {:.2}s, diagonal {:.2}s",
            timings.direct, timings.double_sum, timings.diagonal
        );
        reports.push(report);
    }
    Ok(match cfg.format {
        Format::Json if range => json(&reports),
        Format::Json => json(&reports[0]),
        Format::Csv => {
            let mut t = Csv::new(&MOMENT_CSV_HEADER);
            for r in &reports {
                t.row(&moment_row(r));
            }
            t.finish()
        }
    })
}

fn moment_row(r: &MomentReport) -> Vec<String> {
    let ds = r.double_sum.as_ref();
    vec![
        r.q.to_string(),
        fmt_float(r.direct),
        fmt_opt(ds.map(|d| d.total)),
        fmt_opt(ds.map(|d| d.diagonal_part)),
        fmt_opt(ds.map(|d| d.off_diagonal_part)),
        fmt_opt(ds.map(|d| d.small_divisor_part)),
        fmt_opt(ds.map(|d| d.large_divisor_part)),
        fmt_float(r.main_term),
        fmt_opt(r.ratio),
        fmt_opt(r.condition.as_ref().map(|c| c.lhs)),
        fmt_opt(r.condition.as_ref().map(|c| c.rhs)),
        fmt_float(r.divisor_condition_sum),
    ]
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct Prediction {
    pub q: u64,
    pub k_used: f64,
    pub p_q_1: f64,
    pub psi: f64,
    pub main_term: f64,
}

/// Table long enough for `K` and for `a(p)` at every prime factor.
fn k_table(cfg: &RunConfig, moduli: &[u64]) -> CliResult<EigenformCoefficients> {
    let top = moduli.iter().copied().max().unwrap_or(1) as usize;
    let terms = if cfg.k_override.is_some() {
        top
    } else {
        top.max(DEFAULT_K_CUTOFF)
    };
    load_coefficients(cfg, terms, cfg.cache.as_deref())
}

fn predict(cfg: &RunConfig, moduli: &[u64]) -> CliResult<String> {
    let coeffs = k_table(cfg, moduli)?;
    let k = match cfg.k_override {
        Some(k) => k,
        None => default_k(&coeffs)?,
    };
    let mut rows = Vec::new();
    for &q in moduli {
        let fq = factorize(q)?;
        rows.push(Prediction {
            q,
            k_used: k,
            p_q_1: euler_product_p(&fq, Complex64::new(1.0, 0.0), &coeffs)?
                .at_s
                .re,
            psi: psi_f64(q)?,
            main_term: main_term(&coeffs, q, k)?,
        });
    }
    Ok(match cfg.format {
        Format::Json if rows.len() == 1 => json(&rows[0]),
        Format::Json => json(&rows),
        Format::Csv => {
            let mut t = Csv::new(&["q", "k_used", "p_q_1", "psi", "main_term"]);
            for r in &rows {
                t.row(&[
                    r.q.to_string(),
                    fmt_float(r.k_used),
                    fmt_float(r.p_q_1),
                    fmt_float(r.psi),
                    fmt_float(r.main_term),
                ]);
            }
            t.finish()
        }
    })
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct CheckRow {
    pub q: u64,
    pub x_threshold: Option<f64>,
    pub condition_lhs: Option<f64>,
    pub condition_rhs: Option<f64>,
    pub holds: Option<bool>,
    pub divisor_threshold: f64,
    pub divisor_condition_sum: f64,
}

fn check(cfg: &RunConfig, moduli: &[u64]) -> CliResult<String> {
    let mut rows = Vec::new();
    for &q in moduli {
        let fq = factorize(q)?;
        let cond = if q >= MIN_CONDITION_MODULUS {
            Some(check_assumption(&fq)?)
        } else {
            None
        };
        rows.push(CheckRow {
            q,
            x_threshold: cond.as_ref().map(|c| c.x_threshold),
            condition_lhs: cond.as_ref().map(|c| c.lhs),
            condition_rhs: cond.as_ref().map(|c| c.rhs),
            holds: cond.as_ref().map(|c| c.holds),
            divisor_threshold: divisor_split_threshold(q),
            divisor_condition_sum: divisor_condition_sum(&fq)?,
        });
    }
    Ok(match cfg.format {
        Format::Json if rows.len() == 1 => json(&rows[0]),
        Format::Json => json(&rows),
        Format::Csv => {
            let mut t = Csv::new(&[
                "q",
                "x_threshold",
                "condition_lhs",
                "condition_rhs",
                "holds",
                "divisor_threshold",
                "divisor_condition_sum",
            ]);
            for r in &rows {
                t.row(&[
                    r.q.to_string(),
                    fmt_opt(r.x_threshold),
                    fmt_opt(r.condition_lhs),
                    fmt_opt(r.condition_rhs),
                    r.holds.map(|h| h.to_string()).unwrap_or_default(),
                    fmt_float(r.divisor_threshold),
                    fmt_float(r.divisor_condition_sum),
                ]);
            }
            t.finish()
        }
    })
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct FitOutput {
    pub k_used: f64,
    pub k1: f64,
    pub k2: f64,
    pub moduli: usize,
}

fn fit(cfg: &RunConfig, moduli: &[u64]) -> CliResult<String> {
    let cutoff = v_table(cfg.weight)?.cutoff_for(cfg.tol).sqrt();
    let top = moduli.iter().copied().max().unwrap_or(3) as f64;
    let mut terms = (top * cutoff).ceil() as usize;
    if cfg.k_override.is_none() {
        terms = terms.max(DEFAULT_K_CUTOFF);
    }
    let coeffs = load_coefficients(cfg, terms, cfg.cache.as_deref())?;
    let k = match cfg.k_override {
        Some(k) => k,
        None => default_k(&coeffs)?,
    };
    let mut points = Vec::with_capacity(moduli.len());
    for &q in moduli {
        let d = diagonal_sum(&coeffs, q, cfg.tol, k)?;
        let p = euler_product_p(&factorize(q)?, Complex64::new(1.0, 0.0), &coeffs)?;
        let p1 = p.at_s.re;
        points.push((
            d.value,
            p1,
            p.derivative_at_1().unwrap_or(0.0),
            (q as f64).ln(),
        ));
    }
    let (k1, k2) = fit_secondary_constants(&points, k)?;
    let out = FitOutput {
        k_used: k,
        k1,
        k2,
        moduli: moduli.len(),
    };
    Ok(match cfg.format {
        Format::Json => json(&out),
        Format::Csv => {
            let mut t = Csv::new(&["k_used", "k1", "k2", "moduli"]);
            t.row(&[
                fmt_float(k),
                fmt_float(k1),
                fmt_float(k2),
                out.moduli.to_string(),
            ]);
            t.finish()
        }
    })
}
