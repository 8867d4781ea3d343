use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use liouville_core::branch::{
    continue_branch_with, count_at_level, level_roots, ContinuationOptions, Sign, DEFAULT_N_WINDOW,
};
use liouville_core::curve::{
    count_solutions, critical_portrait, estimate_n0, find_c_of_n_with, j_value, sweep_alpha_with,
    C_WINDOW, DEFAULT_STEP, DEFAULT_WINDOW,
};
use liouville_core::figures::{write_figures, Fig1Row, Fig5CRow, Fig5JRow, FigureGrids};
use liouville_core::io::{write_csv, write_json, Header};
use liouville_core::radial::{a_star, ShootingParams, SolverSettings};
use liouville_core::spectral::n_k;
use liouville_core::variational::diagnostics;
use liouville_core::verify::{self, CriterionResult};
use liouville_core::Error;

#[derive(Parser, Debug)]
#[command(
    name = "liouville",
    version,
    about = "Radial solutions of -Δu = (1+|x|²)^N e^{2u}: sweeps, counts, branches"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Directory receiving the artifacts.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone, Copy)]
struct Sweep {
    #[arg(long = "N", allow_negative_numbers = true)]
    n: f64,
    #[arg(long, default_value_t = DEFAULT_WINDOW.0, allow_negative_numbers = true)]
    a_min: f64,
    #[arg(long, default_value_t = DEFAULT_WINDOW.1, allow_negative_numbers = true)]
    a_max: f64,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    step: f64,
}

#[derive(Args, Debug, Clone, Copy)]
struct NRange {
    #[arg(long, default_value_t = 0.5)]
    n_min: f64,
    #[arg(long, default_value_t = 30.0)]
    n_max: f64,
    #[arg(long, default_value_t = 0.5)]
    n_step: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a ↦ α(a) at fixed N.
    AlphaCurve(Sweep),
    /// Critical points of α(a) with their ε-coding.
    CriticalPoints(Sweep),
    /// Number of radial solutions at flux α (default the level N+2).
    Count {
        #[arg(long = "N", allow_negative_numbers = true)]
        n: f64,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Continue the branches C_k^± for k = 2..=k.
    Branches {
        #[arg(long, default_value_t = 3)]
        k: u32,
        #[arg(long, default_value_t = DEFAULT_N_WINDOW.0)]
        n_min: f64,
        #[arg(long, default_value_t = DEFAULT_N_WINDOW.1)]
        n_max: f64,
        #[arg(long, default_value_t = 400)]
        max_points: usize,
    },
    /// J_N(a) over an a-grid.
    JnCurve(Sweep),
    /// K_N(a) = α''(a)/2 over an a-grid.
    KnCurve(Sweep),
    /// First positive zero c(N) of J_N over an N-grid.
    COfN(NRange),
    /// Threshold N₀ where inf α crosses 2N.
    N0 {
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [1.0, 2.0])]
        bracket: Vec<f64>,
    },
    /// Run the acceptance checks.
    Verify {
        /// Run only these criteria (1-12).
        #[arg(long)]
        criterion: Vec<u32>,
    },
    /// Write the data behind all six figures.
    Figures,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::AlphaCurve(_) => "alpha-curve",
            Command::CriticalPoints(_) => "critical-points",
            Command::Count { .. } => "count",
            Command::Branches { .. } => "branches",
            Command::JnCurve(_) => "jn-curve",
            Command::KnCurve(_) => "kn-curve",
            Command::COfN(_) => "c-of-n",
            Command::N0 { .. } => "n0",
            Command::Verify { .. } => "verify",
            Command::Figures => "figures",
        }
    }
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: &'a str,
    command: &'a str,
    message: String,
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

fn check_n(n: f64) -> Result<(), Error> {
    if n.is_finite() && n > 0.0 {
        Ok(())
    } else {
        Err(config_error(format!(
            "--N must be positive and finite, got {n}"
        )))
    }
}

impl Sweep {
    fn validate(&self) -> Result<(), Error> {
        check_n(self.n)?;
        if !(self.a_min.is_finite() && self.a_max.is_finite() && self.a_min < self.a_max) {
            return Err(config_error(format!(
                "need --a-min < --a-max, got {} and {}",
                self.a_min, self.a_max
            )));
        }
        if !(self.step > 0.0 && self.step <= self.a_max - self.a_min) {
            return Err(config_error(format!(
                "--step must lie in (0, a_max - a_min], got {}",
                self.step
            )));
        }
        Ok(())
    }

    fn grid(&self) -> Vec<f64> {
        let m = ((self.a_max - self.a_min) / self.step + 1e-9).floor() as usize;
        (0..=m).map(|i| self.a_min + self.step * i as f64).collect()
    }

    fn header(&self, command: &str, settings: &SolverSettings) -> Header {
        Header::new(command, settings)
            .with("N", self.n)
            .with("a_min", self.a_min)
            .with("a_max", self.a_max)
            .with("step", self.step)
    }
}

impl NRange {
    fn grid(&self) -> Result<Vec<f64>, Error> {
        check_n(self.n_min)?;
        if !(self.n_max >= self.n_min && self.n_step > 0.0) {
            return Err(config_error("need --n-min <= --n-max and --n-step > 0"));
        }
        let m = ((self.n_max - self.n_min) / self.n_step + 1e-9).floor() as usize;
        Ok((0..=m)
            .map(|i| self.n_min + self.n_step * i as f64)
            .collect())
    }
}

struct Output<'a> {
    dir: &'a Path,
    format: Format,
}

impl Output<'_> {
    fn write<T: Serialize>(
        &self,
        stem: &str,
        header: &Header,
        rows: &[T],
    ) -> Result<PathBuf, Error> {
        std::fs::create_dir_all(self.dir)?;
        let path = match self.format {
            Format::Csv => self.dir.join(format!("{stem}.csv")),
            Format::Json => self.dir.join(format!("{stem}.json")),
        };
        match self.format {
            Format::Csv => write_csv(&path, header, rows)?,
            Format::Json => write_json(&path, header, rows)?,
        }
        Ok(path)
    }
}

#[derive(Serialize)]
struct CurveRow {
    #[serde(rename = "N")]
    n: f64,
    a: f64,
    alpha: f64,
    alpha_prime: f64,
    zero_count: usize,
}

#[derive(Serialize)]
struct CriticalRow {
    #[serde(rename = "N")]
    n: f64,
    a: f64,
    c: f64,
    kind: &'static str,
    epsilon: i32,
    #[serde(rename = "K")]
    k: Option<f64>,
}

#[derive(Serialize)]
struct CountRow {
    #[serde(rename = "N")]
    n: f64,
    alpha: f64,
    count: i64,
}

#[derive(Serialize)]
struct KRow {
    #[serde(rename = "N")]
    n: f64,
    a: f64,
    alpha: f64,
    #[serde(rename = "K")]
    k: f64,
}

#[derive(Serialize)]
struct N0Row {
    lo: f64,
    hi: f64,
    n0: f64,
}

/// Runs the command; returns the summary line and whether it counts as success.
fn run(cli: &Cli) -> Result<(String, bool), Error> {
    let settings = SolverSettings::default();
    let out = Output {
        dir: &cli.out_dir,
        format: cli.format,
    };
    let name = cli.command.name();
    match &cli.command {
        Command::AlphaCurve(sweep) => {
            sweep.validate()?;
            let curve =
                sweep_alpha_with(sweep.n, (sweep.a_min, sweep.a_max), sweep.step, &settings)?;
            let rows: Vec<CurveRow> = curve
                .samples
                .iter()
                .map(|s| CurveRow {
                    n: sweep.n,
                    a: s.a,
                    alpha: s.alpha,
                    alpha_prime: s.alpha_prime,
                    zero_count: s.zero_count,
                })
                .collect();
            let path = out.write("alpha_curve", &sweep.header(name, &settings), &rows)?;
            let min = curve.min_sample();
            Ok((
                format!(
                    "alpha-curve N={}: {} samples, alpha_min={:.10} at a={:.6}, wrote {}",
                    sweep.n,
                    rows.len(),
                    min.alpha,
                    min.a,
                    path.display()
                ),
                true,
            ))
        }
        Command::CriticalPoints(sweep) => {
            sweep.validate()?;
            let curve =
                sweep_alpha_with(sweep.n, (sweep.a_min, sweep.a_max), sweep.step, &settings)?;
            let portrait = critical_portrait(&curve)?;
            let mut points = portrait.critical_points.clone();
            points.sort_by(|x, y| x.a.total_cmp(&y.a));
            let rows: Vec<CriticalRow> = points
                .iter()
                .map(|p| CriticalRow {
                    n: sweep.n,
                    a: p.a,
                    c: p.c,
                    kind: match p.epsilon {
                        2 => "min",
                        -2 => "max",
                        _ => "inflection",
                    },
                    epsilon: p.epsilon,
                    k: p.k_value,
                })
                .collect();
            let header = sweep
                .header(name, &settings)
                .with("alpha_min", portrait.alpha_min)
                .with("alpha_min_attained", portrait.alpha_min_attained)
                .with("epsilon_0", portrait.epsilon_0);
            let path = out.write("critical_points", &header, &rows)?;
            Ok((
                format!(
                    "critical-points N={}: {} critical points, alpha_min={:.10} ({}), epsilon_0={}, wrote {}",
                    sweep.n,
                    rows.len(),
                    portrait.alpha_min,
                    if portrait.alpha_min_attained { "attained" } else { "not attained" },
                    portrait.epsilon_0,
                    path.display()
                ),
                true,
            ))
        }
        Command::Count { n, alpha } => {
            check_n(*n)?;
            let (level, count) = match alpha {
                None => (n + 2.0, count_at_level(*n)? as i64),
                Some(q) => {
                    let curve = sweep_alpha_with(*n, DEFAULT_WINDOW, DEFAULT_STEP, &settings)?;
                    let portrait = critical_portrait(&curve)?;
                    (*q, count_solutions(&portrait, *q)?.count as i64)
                }
            };
            let header = Header::new(name, &settings)
                .with("N", n)
                .with("alpha", level);
            let path = out.write(
                "count",
                &header,
                &[CountRow {
                    n: *n,
                    alpha: level,
                    count,
                }],
            )?;
            let mut line = format!("count N={n} alpha={level}: {count} radial solutions");
            if alpha.is_none() {
                let (roots, _) = level_roots(*n, &settings)?;
                let list: Vec<String> = roots.iter().map(|a| format!("{a:.6}")).collect();
                line.push_str(&format!(" at a = [{}]", list.join(", ")));
            }
            line.push_str(&format!(", wrote {}", path.display()));
            Ok((line, true))
        }
        Command::Branches {
            k,
            n_min,
            n_max,
            max_points,
        } => {
            if *k < 2 {
                return Err(config_error(format!("--k must be at least 2, got {k}")));
            }
            if !(n_min < n_max) || *max_points < 2 {
                return Err(config_error("need --n-min < --n-max and --max-points >= 2"));
            }
            let opts = ContinuationOptions {
                n_window: (*n_min, *n_max),
                max_points: *max_points,
                ..Default::default()
            };
            let arcs: Vec<(u32, Sign)> = (2..=*k)
                .filter(|&j| n_k(j) < *n_max)
                .flat_map(|j| [(j, Sign::Plus), (j, Sign::Minus)])
                .collect();
            let traced = arcs
                .par_iter()
                .map(|&(j, sign)| continue_branch_with(j, sign, &opts))
                .collect::<Result<Vec<_>, Error>>()?;
            let mut rows = Vec::new();
            let mut ends = Vec::new();
            for arc in &traced {
                rows.extend(arc.points.iter().map(|p| Fig1Row {
                    k: arc.k,
                    sign: arc.sign,
                    s: p.arclength_s,
                    n: p.n,
                    a: p.a,
                    f_at_zero: p.f_at_zero,
                    mu: p.mu,
                    zero_count: p.zero_count,
                }));
                ends.push(format!(
                    "C{}{} {} pts ({:?})",
                    arc.k,
                    arc.sign.symbol(),
                    arc.points.len(),
                    arc.terminated_by
                ));
            }
            let header = Header::new(name, &opts.settings)
                .with("k_max", k)
                .with("N_window", format!("{n_min} {n_max}"))
                .with("max_points", max_points);
            let path = out.write("branches", &header, &rows)?;
            Ok((
                format!("branches: {}, wrote {}", ends.join(", "), path.display()),
                true,
            ))
        }
        Command::JnCurve(sweep) => {
            sweep.validate()?;
            let grid = sweep.grid();
            let rows = grid
                .par_iter()
                .map(|&a| {
                    Ok(Fig5JRow {
                        n: sweep.n,
                        a,
                        j: j_value(sweep.n, a, &settings)?,
                    })
                })
                .collect::<Result<Vec<_>, Error>>()?;
            let changes = rows
                .windows(2)
                .filter(|w| w[0].j.signum() != w[1].j.signum())
                .count();
            let path = out.write("jn_curve", &sweep.header(name, &settings), &rows)?;
            Ok((
                format!(
                    "jn-curve N={}: {} samples, {} sign changes, wrote {}",
                    sweep.n,
                    rows.len(),
                    changes,
                    path.display()
                ),
                true,
            ))
        }
        Command::KnCurve(sweep) => {
            sweep.validate()?;
            let grid = sweep.grid();
            let rows = grid
                .par_iter()
                .map(|&a| {
                    let d = diagnostics(ShootingParams::new(sweep.n, a)?, &settings)?;
                    Ok(KRow {
                        n: sweep.n,
                        a,
                        alpha: d.alpha,
                        k: d.k_value,
                    })
                })
                .collect::<Result<Vec<_>, Error>>()?;
            let (kmin, kmax) = rows
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                    (lo.min(r.k), hi.max(r.k))
                });
            let path = out.write("kn_curve", &sweep.header(name, &settings), &rows)?;
            Ok((
                format!(
                    "kn-curve N={}: {} samples, K in [{kmin:.6e}, {kmax:.6e}], wrote {}",
                    sweep.n,
                    rows.len(),
                    path.display()
                ),
                true,
            ))
        }
        Command::COfN(range) => {
            let ns = range.grid()?;
            let rows = ns
                .par_iter()
                .map(|&n| {
                    Ok(Fig5CRow {
                        n,
                        c_of_n: find_c_of_n_with(n, &settings)?,
                        a_star: a_star(n),
                    })
                })
                .collect::<Result<Vec<_>, Error>>()?;
            let worst = rows
                .iter()
                .map(|r| r.c_of_n - r.a_star)
                .fold(f64::INFINITY, f64::min);
            let header = Header::new(name, &settings)
                .with("n_min", range.n_min)
                .with("n_max", range.n_max)
                .with("n_step", range.n_step)
                .with("a_window", format!("{} {}", C_WINDOW.0, C_WINDOW.1));
            let path = out.write("c_of_n", &header, &rows)?;
            Ok((
                format!(
                    "c-of-n: {} values, min c(N) - a*_N = {worst:.3e}, wrote {}",
                    rows.len(),
                    path.display()
                ),
                true,
            ))
        }
        Command::N0 { bracket } => {
            let (lo, hi) = (bracket[0], bracket[1]);
            if !(lo > 0.0 && lo < hi) {
                return Err(config_error(format!(
                    "--bracket needs 0 < LO < HI, got {lo} {hi}"
                )));
            }
            let n0 = estimate_n0((lo, hi))?;
            let header =
                Header::new(name, &SolverSettings::precise()).with("bracket", format!("{lo} {hi}"));
            let path = out.write("n0", &header, &[N0Row { lo, hi, n0 }])?;
            Ok((
                format!("n0: N0 = {n0:.4} in ({lo}, {hi}), wrote {}", path.display()),
                true,
            ))
        }
        Command::Verify { criterion } => {
            if let Some(bad) = criterion.iter().find(|&&c| !(1..=12).contains(&c)) {
                return Err(config_error(format!(
                    "--criterion must lie in 1..=12, got {bad}"
                )));
            }
            let results: Vec<CriterionResult> = if criterion.is_empty() {
                verify::run_all()
            } else {
                criterion.iter().filter_map(|&c| verify::run(c)).collect()
            };
            for r in &results {
                println!("{}", r.line());
            }
            let passed = results.iter().filter(|r| r.passed).count();
            let path = out.write("verify", &Header::new(name, &settings), &results)?;
            Ok((
                format!(
                    "verify: {passed}/{} criteria passed, wrote {}",
                    results.len(),
                    path.display()
                ),
                passed == results.len(),
            ))
        }
        Command::Figures => {
            if cli.format == Format::Json {
                return Err(config_error("figures are written as CSV only"));
            }
            let written = write_figures(&cli.out_dir, &FigureGrids::default(), &settings)?;
            let parts: Vec<String> = written
                .iter()
                .map(|(p, n)| {
                    format!(
                        "{} ({n} rows)",
                        p.file_name().unwrap_or_default().to_string_lossy()
                    )
                })
                .collect();
            Ok((
                format!("figures: {} in {}", parts.join(", "), cli.out_dir.display()),
                true,
            ))
        }
    }
}

fn init_threads() -> Result<(), Error> {
    let Ok(value) = std::env::var("LIOUVILLE_THREADS") else {
        return Ok(());
    };
    let threads: usize = value.parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        config_error(format!(
            "LIOUVILLE_THREADS must be a positive integer, got {value:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| config_error(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = init_threads().and_then(|()| run(&cli));
    match outcome {
        Ok((summary, ok)) => {
            println!("{summary}");
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            let record = ErrorRecord {
                error: e.kind(),
                command: cli.command.name(),
                message: e.to_string(),
            };
            eprintln!(
                "{}",
                serde_json::to_string(&record).expect("plain record serializes")
            );
            ExitCode::FAILURE
        }
    }
}
