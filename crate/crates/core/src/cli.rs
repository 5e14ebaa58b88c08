//! Command-line front end. Exit codes: 0 success, 2 validation error, 3 a
//! verification sweep found a violated invariant.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::function::GridFunction;
use crate::grid::{Cube, Grid};
use crate::harness::experiments::{decay_thresholds, run_sweep, ExperimentConfig};
use crate::harness::generators::{generate_weight, WeightSpec};
use crate::harness::report::{self, Format};
use crate::lerner::{domination, median};
use crate::shifts::{HaarShift, Orientation};
use crate::testing::{
    build_principal_forest, carleson_ratio_with, decay_profile, scale_layers, shift_testing_constant,
};
use crate::weights::{ainfty_with_cube, ap_two_weight, dual_weight, Weight};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_ASSERTION: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "dyadic-lab", version, about = "Dyadic Haar shifts, weights and sparse bounds on finite grids")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Dimension d (1 or 2).
    #[arg(long, default_value_t = 1)]
    pub dim: u32,
    /// Finest level L.
    #[arg(long, default_value_t = 8)]
    pub depth: u32,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// [w,σ]_{A_p}, [w]_{A_∞} and [σ]_{A_∞} for a weight and a list of exponents.
    Constants {
        /// Weight spec, e.g. `power:-0.5`, `step:2,2,1,1`, `random:7:0.3`.
        #[arg(long)]
        weight: String,
        /// Comma-separated exponents.
        #[arg(long, value_delimiter = ',', required = true)]
        p: Vec<f64>,
        /// σ spec; defaults to the dual weight w^{1-p'}.
        #[arg(long)]
        sigma: Option<String>,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Applies a shift, its adjoint and its maximal truncation to cell values.
    Apply {
        /// Shift document (JSON).
        #[arg(long)]
        shift: PathBuf,
        /// Cell values, one per row, in storage order.
        #[arg(long)]
        input: PathBuf,
    },
    /// Sparse family and domination constant of a function on a cube.
    Lerner {
        /// Cell values, one per row, in storage order.
        #[arg(long)]
        input: PathBuf,
        /// Root cube, `level:i` or `level:i,j`.
        #[arg(long)]
        q0: String,
        #[arg(long, default_value_t = 1)]
        dim: u32,
    },
    /// Testing constants, principal forests and a decay profile for a shift.
    Testing {
        #[arg(long)]
        shift: PathBuf,
        #[arg(long)]
        weight: String,
        #[arg(long)]
        p: f64,
        /// σ spec; defaults to the dual weight w^{1-p'}.
        #[arg(long)]
        sigma: Option<String>,
    },
    /// Runs the experiments of a JSON config and emits records.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Output path; overrides the config. Without either, CSV goes to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        format: Option<Format>,
    },
}

/// Parses `argv` and runs the command, writing results to `out`.
pub fn run_from(args: impl IntoIterator<Item = String>, out: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_VALIDATION
        }
    }
}

fn write_json(out: &mut dyn Write, value: &Value) -> Result<()> {
    writeln!(out, "{}", serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn weight_from(spec: &str, grid: Grid) -> Result<Weight> {
    generate_weight(&spec.parse::<WeightSpec>()?, grid)
}

fn sigma_for(spec: Option<&str>, w: &Weight, p: f64) -> Result<Weight> {
    match spec {
        Some(s) => weight_from(s, w.grid()),
        None => dual_weight(w, p),
    }
}

fn read_shift(path: &Path) -> Result<HaarShift> {
    HaarShift::from_json(&std::fs::read_to_string(path)?)
}

/// Reads one value per row. A header row is allowed; with several columns
/// the one named `value` is used, or the last one.
pub fn read_values(path: &Path) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path)?;
    let rows: Vec<csv::StringRecord> = reader.records().collect::<std::result::Result<_, _>>()?;
    let Some(first) = rows.first() else {
        return Err(Error::Config(format!("{} has no rows", path.display())));
    };
    let last = first.len().saturating_sub(1);
    let header = first.get(last).is_some_and(|f| f.parse::<f64>().is_err());
    let column = if header { first.iter().position(|h| h == "value").unwrap_or(last) } else { last };
    rows.iter()
        .skip(usize::from(header))
        .enumerate()
        .map(|(k, r)| {
            let field = r.get(column).unwrap_or("");
            field.parse::<f64>().map_err(|_| Error::Config(format!("row {}: {field:?} is not a number", k + 1)))
        })
        .collect()
}

/// The grid of dimension `dim` with exactly `n` cells.
fn grid_for(dim: u32, n: usize) -> Result<Grid> {
    let fan = 1usize << dim.min(2);
    let depth = (0..=14).find(|k| fan.checked_pow(*k) == Some(n)).ok_or_else(|| {
        Error::Config(format!("{n} values do not fill a dyadic grid of dimension {dim}"))
    })?;
    Grid::new(dim, depth)
}

fn execute(command: Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Constants { weight, p, sigma, grid } => {
            let grid = Grid::new(grid.dim, grid.depth)?;
            let w = weight_from(&weight, grid)?;
            let (ainfty_w, ainfty_w_cube) = ainfty_with_cube(&w, None)?;
            let mut rows = Vec::new();
            for p in p {
                let sigma = sigma_for(sigma.as_deref(), &w, p)?;
                let (ap, ap_cube) = ap_two_weight(&w, &sigma, p)?;
                let (ainfty_sigma, ainfty_sigma_cube) = ainfty_with_cube(&sigma, None)?;
                rows.push(json!({
                    "p": p,
                    "ap": ap,
                    "apCube": ap_cube.to_string(),
                    "ainftyW": ainfty_w,
                    "ainftyWCube": ainfty_w_cube.to_string(),
                    "ainftySigma": ainfty_sigma,
                    "ainftySigmaCube": ainfty_sigma_cube.to_string(),
                }));
            }
            write_json(out, &json!({ "weight": weight, "grid": grid, "constants": rows }))?;
            Ok(EXIT_OK)
        }
        Command::Apply { shift, input } => {
            let s = read_shift(&shift)?;
            let f = GridFunction::new(s.grid(), read_values(&input)?)?;
            let sf = s.apply(&f)?;
            let adj = s.adjoint_apply(&f)?;
            let nat = s.maximal_truncation(&f)?;
            let mut writer = csv::Writer::from_writer(Vec::new());
            writer.write_record(["cell", "f", "Sf", "SstarF", "Snatural"])?;
            for c in 0..f.values().len() {
                let row = [f.values()[c], sf.values()[c], adj.values()[c], nat.values()[c]];
                let mut fields = vec![c.to_string()];
                fields.extend(row.iter().map(f64::to_string));
                writer.write_record(&fields)?;
            }
            out.write_all(&writer.into_inner().map_err(|e| Error::Io(e.into_error()))?)?;
            Ok(EXIT_OK)
        }
        Command::Lerner { input, q0, dim } => {
            let values = read_values(&input)?;
            let grid = grid_for(dim, values.len())?;
            let f = GridFunction::new(grid, values)?;
            let q0: Cube = q0.parse()?;
            grid.check(&q0)?;
            let d = domination(&f, &q0)?;
            let generations: Vec<Vec<String>> =
                d.family.generations.iter().map(|g| g.iter().map(Cube::to_string).collect()).collect();
            let constant = if d.constant.is_finite() { json!(d.constant) } else { json!("inf") };
            write_json(
                out,
                &json!({
                    "grid": grid,
                    "q0": q0.to_string(),
                    "median": median(&f, &q0)?,
                    "generations": generations,
                    "sparse": d.family.verify(&grid).is_ok(),
                    "dominationConstant": constant,
                }),
            )?;
            Ok(EXIT_OK)
        }
        Command::Testing { shift, weight, p, sigma } => {
            let s = read_shift(&shift)?;
            let w = weight_from(&weight, s.grid())?;
            let sigma = sigma_for(sigma.as_deref(), &w, p)?;
            write_json(out, &testing_report(&s, &w, &sigma, p)?)?;
            Ok(EXIT_OK)
        }
        Command::Sweep { config, output, format } => {
            let mut cfg = ExperimentConfig::from_json(&std::fs::read_to_string(&config)?)?;
            if let Some(path) = output {
                let format = format.or(cfg.output.as_ref().map(|o| o.format)).unwrap_or_default();
                cfg.output = Some(crate::harness::experiments::OutputConfig { path, format });
            } else if let (Some(f), Some(o)) = (format, cfg.output.as_mut()) {
                o.format = f;
            }
            let outcome = run_sweep(&cfg)?;
            match &cfg.output {
                Some(o) => report::emit(&outcome.records, o.format, &o.path)?,
                None => match format.unwrap_or_default() {
                    Format::Csv => out.write_all(report::to_csv(&outcome.records)?.as_bytes())?,
                    Format::Json => out.write_all(report::to_json(&outcome.records)?.as_bytes())?,
                },
            }
            for (p, e) in &outcome.prop4_exponents {
                eprintln!("prop4 p={p}: growth exponent {e:?}");
            }
            if let Some(t) = &outcome.testing {
                eprintln!(
                    "testing: max proposition ratio {}, max carleson ratio {}, {} forests, {} decay profiles, min rate {:?}",
                    t.max_proposition_ratio, t.max_carleson_ratio, t.forests, t.decay_profiles, t.min_decay_rate
                );
            }
            if cfg.verify && !outcome.violations.is_empty() {
                for v in &outcome.violations {
                    eprintln!("violation: {v}");
                }
                return Ok(EXIT_ASSERTION);
            }
            Ok(EXIT_OK)
        }
    }
}

/// JSON report of the `testing` subcommand.
pub fn testing_report(s: &HaarShift, w: &Weight, sigma: &Weight, p: f64) -> Result<Value> {
    let (sp, sp_cube) = shift_testing_constant(s, w, sigma, p, Orientation::Forward)?;
    let (sp_star, sp_star_cube) = shift_testing_constant(s, w, sigma, p, Orientation::Adjoint)?;
    let (ainfty_sigma, _) = ainfty_with_cube(sigma, None)?;
    let root = s.grid().root();
    let family: Vec<Cube> = s.components().iter().map(|c| c.cube).collect();
    let mut layers = Vec::new();
    let mut forests = Vec::new();
    if !family.is_empty() {
        for (lambda, class) in scale_layers(&family, s.complexity())?.into_iter().enumerate() {
            if class.is_empty() {
                continue;
            }
            for forest in build_principal_forest(&class, lambda as u32, w, sigma, p)? {
                let principals: Vec<Vec<String>> =
                    forest.principals.iter().map(|g| g.iter().map(Cube::to_string).collect()).collect();
                layers.push(json!({
                    "a": forest.layer,
                    "lambda": forest.lambda,
                    "members": forest.members.len(),
                    "principals": principals,
                    "carlesonRatio": carleson_ratio_with(&forest, sigma, &root, ainfty_sigma)?,
                }));
                forests.push(forest);
            }
        }
    }
    // decay on the largest class 𝒦^a(P), first in canonical order on ties
    let mut best: Option<(usize, Cube, Vec<Cube>)> = None;
    for forest in &forests {
        for pc in forest.principal_cubes() {
            let class = forest.class_of(pc);
            if best.as_ref().is_none_or(|(n, q, _)| class.len() > *n || (class.len() == *n && pc < q)) {
                best = Some((class.len(), *pc, class));
            }
        }
    }
    let (decay, rate, decay_cube) = match best {
        Some((_, pc, class)) => {
            let restricted = s.restricted_to(|q| class.contains(q));
            let profile = decay_profile(&restricted, sigma, w, &pc, &decay_thresholds())?;
            let points: Vec<Value> = profile.points.iter().map(|(t, m)| json!({"t": t, "measure": m})).collect();
            (points, profile.rate, Some(pc.to_string()))
        }
        None => (Vec::new(), None, None),
    };
    Ok(json!({
        "Sp": sp,
        "SpStar": sp_star,
        "attainingCubes": { "Sp": sp_cube.to_string(), "SpStar": sp_star_cube.to_string() },
        "layers": layers,
        "decayCube": decay_cube,
        "decay": decay,
        "fittedRate": rate,
    }))
}
