use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use cornerlab::corners::{self, BehrendGrid, CornerMode, EmbedRule};
use cornerlab::driver::{self, DEFAULT_MAX_STEPS};
use cornerlab::partition::{self, PowerLaw, RunLimits};
use cornerlab::profile::{ConstantsProfile, ProfileName};
use cornerlab::setfile::{self, SetLiteral};
use cornerlab::verify;
use cornerlab::{fourier, graph, uniformity, zn, ComplexField, GridBox, GridSet};

const THREADS_VAR: &str = "CORNERLAB_THREADS";

#[derive(Parser, Debug)]
#[command(name = "cornerlab", version, about = "Corner counting, uniformity norms, spectral increments and energy partitions on Z_N x Z_N")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Corner counts and corner-free constructions.
    #[command(subcommand)]
    Corners(CornersCommand),
    /// Uniformity functional of the balanced function of a set.
    Uniformity(UniformityArgs),
    /// Spectrum of the intersection Gram matrix.
    Spectrum(SpectrumArgs),
    /// Density-increment search.
    Increment(IncrementArgs),
    /// Progression partitions, right squares and energy runs.
    #[command(subcommand)]
    Partition(PartitionCommand),
    /// Density-increment corner search.
    Hunt(HuntArgs),
    /// Randomized self-check suite.
    Verify(VerifyArgs),
}

#[derive(Subcommand, Debug)]
enum CornersCommand {
    Count {
        #[arg(long, value_enum, default_value_t = ModeArg::Grid)]
        mode: ModeArg,
        #[arg(long = "in")]
        input: PathBuf,
    },
    Behrend {
        #[arg(long = "k")]
        k: usize,
        /// Dimension range scanned, as `lo..hi` (inclusive).
        #[arg(long = "n-grid", value_parser = parse_range)]
        n_grid: Option<(usize, usize)>,
        /// Digit-bound range scanned, as `lo..hi` (inclusive).
        #[arg(long = "d-grid", value_parser = parse_range)]
        d_grid: Option<(usize, usize)>,
        /// Also write the set as a literal.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Embed {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "N")]
        n: usize,
        #[arg(long, value_enum, default_value_t = RuleArg::Translation)]
        rule: RuleArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Grid,
    Cyclic,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RuleArg {
    Translation,
    LatticeDifference,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProfileArg {
    Toy,
    Paper,
}

impl From<ProfileArg> for ProfileName {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Toy => ProfileName::Toy,
            ProfileArg::Paper => ProfileName::Paper,
        }
    }
}

#[derive(Args, Debug)]
struct UniformityArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Write the transform of the balanced function as CSV.
    #[arg(long)]
    spectrum: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "box", default_value = "full")]
    region: String,
}

#[derive(Args, Debug)]
struct IncrementArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = ProfileArg::Toy)]
    profile: ProfileArg,
    #[arg(long = "box", default_value = "full")]
    region: String,
}

#[derive(Subcommand, Debug)]
enum PartitionCommand {
    Ap {
        #[arg(long = "N")]
        n: usize,
        #[arg(long, allow_negative_numbers = true)]
        r1: i64,
        #[arg(long, allow_negative_numbers = true)]
        r2: i64,
        #[arg(long)]
        s: usize,
    },
    Refine {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_parser = parse_pair)]
        freq: (usize, usize),
    },
    EnergyRun {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long = "K", default_value_t = 0.25)]
        coefficient: f64,
        #[arg(long, default_value_t = 4.0)]
        rho: f64,
        #[arg(long, value_enum, default_value_t = ProfileArg::Toy)]
        profile: ProfileArg,
        #[arg(long = "max-iters", default_value_t = 5)]
        max_iters: usize,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct HuntArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = ProfileArg::Toy)]
    profile: ProfileArg,
    #[arg(long = "max-steps", default_value_t = DEFAULT_MAX_STEPS)]
    max_steps: usize,
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    quick: bool,
}

enum Failure {
    Input(String),
    Check,
}

impl From<cornerlab::Error> for Failure {
    fn from(e: cornerlab::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (lo, hi) = s.split_once("..").ok_or_else(|| format!("expected lo..hi, got '{s}'"))?;
    let lo: usize = lo.parse().map_err(|_| format!("bad bound '{lo}'"))?;
    let hi: usize = hi.trim_start_matches('=').parse().map_err(|_| format!("bad bound '{hi}'"))?;
    if lo > hi {
        return Err(format!("empty range {s}"));
    }
    Ok((lo, hi))
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected r1,r2, got '{s}'"))?;
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("bad frequency '{t}'"));
    Ok((parse(a)?, parse(b)?))
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn read_set(path: &Path) -> Result<SetLiteral, Failure> {
    setfile::parse(&read(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn read_grid(path: &Path) -> Result<GridSet, Failure> {
    setfile::parse_grid(&read(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn region(spec: &str, n: usize) -> Result<GridBox, Failure> {
    match spec {
        "full" => Ok(GridBox::full(n)),
        other => Err(Failure::Input(format!("unsupported box '{other}'; only 'full' is accepted"))),
    }
}

/// Prints `value` as one JSON line with the schema version added.
fn emit(value: impl Serialize) {
    let mut v = serde_json::to_value(value).expect("reports serialize");
    let mut obj = Map::new();
    obj.insert("schema_version".into(), json!(verify::SCHEMA_VERSION));
    match v.take() {
        Value::Object(map) => obj.extend(map),
        other => {
            obj.insert("value".into(), other);
        }
    }
    println!("{}", Value::Object(obj));
}

fn corners(cmd: CornersCommand) -> Outcome {
    match cmd {
        CornersCommand::Count { mode, input } => {
            let a = read_grid(&input)?;
            let mode = match mode {
                ModeArg::Grid => CornerMode::Grid,
                ModeArg::Cyclic => CornerMode::Cyclic,
            };
            let c = corners::count_corners(&a, mode);
            emit(json!({
                "count": c.count,
                "witness": c.witness,
                "size": a.len(),
                "density": zn::to_f64(&a.density()),
            }));
        }
        CornersCommand::Behrend { k, n_grid, d_grid, out } => {
            let mut grid = BehrendGrid::default();
            if let Some((lo, hi)) = n_grid {
                grid.dimensions = lo..=hi;
            }
            if let Some((lo, hi)) = d_grid {
                grid.digit_bounds = lo..=hi;
            }
            let b = corners::behrend_construct_with(k, &grid)?;
            if let Some(path) = out {
                std::fs::write(path, setfile::write_line(&b.set))?;
            }
            emit(json!({
                "count": 0,
                "witness": null,
                "size": b.set.len(),
                "density": zn::to_f64(&b.set.density()),
                "digit_bound": b.digit_bound,
                "dimension": b.dimension,
                "radius_sq": b.radius_sq,
                "achieved_exponent": b.achieved_exponent,
                "target_exponent": b.target_exponent,
                "members": b.set.members(),
            }));
        }
        CornersCommand::Embed { input, n, rule, out } => {
            let a1 = setfile::parse_line(&read(&input)?).map_err(|e| Failure::Input(format!("{}: {e}", input.display())))?;
            let rule = match rule {
                RuleArg::Translation => EmbedRule::Translation,
                RuleArg::LatticeDifference => EmbedRule::LatticeDifference,
            };
            let a = corners::embed_corner_free(&a1, n, rule)?;
            let c = corners::count_corners(&a, CornerMode::Grid);
            if let Some(path) = out {
                std::fs::write(path, setfile::write_grid(&a))?;
            }
            emit(json!({
                "count": c.count,
                "witness": c.witness,
                "size": a.len(),
                "density": zn::to_f64(&a.density()),
            }));
        }
    }
    Ok(())
}

fn uniformity_cmd(args: UniformityArgs) -> Outcome {
    let f = match read_set(&args.input)? {
        SetLiteral::Line(s) => ComplexField::balanced_1d(&s),
        SetLiteral::Grid(g) => ComplexField::balanced_2d(&g),
    };
    let report = match f.arity() {
        zn::Arity::One => uniformity::alpha_uniformity_1d(&f)?,
        zn::Arity::Two => uniformity::alpha_uniformity_2d(&f)?,
    };
    if let Some(path) = args.spectrum {
        let spectrum = fourier::dft(&f);
        let n = f.modulus();
        let mut w = csv::Writer::from_path(path)?;
        match f.arity() {
            zn::Arity::One => {
                w.write_record(["r", "re", "im"])?;
                for (r, z) in spectrum.coeffs().iter().enumerate() {
                    w.write_record([r.to_string(), z.re.to_string(), z.im.to_string()])?;
                }
            }
            zn::Arity::Two => {
                w.write_record(["r", "r2", "re", "im"])?;
                for (i, z) in spectrum.coeffs().iter().enumerate() {
                    w.write_record([(i / n).to_string(), (i % n).to_string(), z.re.to_string(), z.im.to_string()])?;
                }
            }
        }
        w.flush()?;
    }
    emit(json!({
        "functional": report.functional,
        "alpha": report.minimal_alpha,
        "denominator": report.denominator,
        "method_agreement": report.method_agreement,
    }));
    Ok(())
}

fn spectrum_cmd(args: SpectrumArgs) -> Outcome {
    let a = read_grid(&args.input)?;
    let bx = region(&args.region, a.modulus())?;
    let r = graph::gram_spectrum(&a, &bx)?;
    emit(json!({
        "n": r.n,
        "size": r.size,
        "delta": r.delta,
        "mu": r.mu,
        "deviation": r.deviation,
        "traces": {
            "trace": r.trace,
            "trace_of_square": r.trace_of_square,
            "intersection_energy": r.intersection_energy.to_string(),
            "trace_holds": r.trace_holds(),
            "trace_of_square_holds": r.trace_of_square_holds(),
        },
    }));
    Ok(())
}

fn increment_cmd(args: IncrementArgs) -> Outcome {
    let a = read_grid(&args.input)?;
    let bx = region(&args.region, a.modulus())?;
    let r = graph::find_density_increment(&a, &bx, args.alpha, args.profile.into())?;
    let verified = r.verify(&a);
    let mut v = serde_json::to_value(&r).expect("reports serialize");
    v["verified"] = json!(verified);
    emit(v);
    if verified {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn partition_cmd(cmd: PartitionCommand) -> Outcome {
    match cmd {
        PartitionCommand::Ap { n, r1, r2, s } => {
            let p = partition::ap_partition(n, r1, r2, s)?;
            let ok = p.checks.all_hold();
            emit(&p);
            if !ok {
                return Err(Failure::Check);
            }
        }
        PartitionCommand::Refine { input, freq } => {
            let a = read_grid(&input)?;
            emit(partition::right_square_partition(&a, freq)?);
        }
        PartitionCommand::EnergyRun { input, eps, coefficient, rho, profile, max_iters, trace } => {
            let w = read_grid(&input)?;
            let law = PowerLaw::new(coefficient, rho)?;
            let profile: ProfileName = profile.into();
            let run = partition::energy_increment_run_with(&w, eps, law, profile, RunLimits::for_profile(profile), max_iters)?;
            if let Some(path) = trace {
                let mut out = csv::Writer::from_path(path)?;
                out.write_record(["iteration", "cells", "energy", "badMass", "refinedCells"])?;
                for t in &run.trace {
                    out.write_record([
                        t.iteration.to_string(),
                        t.cells.to_string(),
                        t.energy.to_string(),
                        t.bad_mass.to_string(),
                        t.refined_cells.to_string(),
                    ])?;
                }
                out.flush()?;
            }
            let ok = run.accounting_holds;
            emit(&run);
            if !ok {
                return Err(Failure::Check);
            }
        }
    }
    Ok(())
}

fn label(v: impl Serialize) -> String {
    match serde_json::to_value(v) {
        Ok(Value::String(s)) => s,
        Ok(Value::Null) => String::new(),
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

fn hunt_cmd(args: HuntArgs) -> Outcome {
    let a = read_grid(&args.input)?;
    let profile = ConstantsProfile::named(args.profile.into());
    let hunt = driver::corner_hunt(&a, &profile, args.max_steps)?;
    if let Some(path) = args.trace {
        let mut out = csv::Writer::from_path(path)?;
        out.write_record([
            "step", "branch", "route", "width", "height", "gamma1", "gamma2", "beta1", "beta2", "density", "measuredAlpha",
        ])?;
        for r in &hunt.trace {
            out.write_record([
                r.step.to_string(),
                r.branch.as_str().to_string(),
                label(r.route),
                r.width.to_string(),
                r.height.to_string(),
                r.gamma1.to_string(),
                r.gamma2.to_string(),
                r.beta1.to_string(),
                r.beta2.to_string(),
                r.density_f64().to_string(),
                r.measured_alpha.map(|x| x.to_string()).unwrap_or_default(),
            ])?;
        }
        out.flush()?;
    }
    let witness_ok = hunt.found_corner().is_none_or(|w| w.verify(&a, CornerMode::Grid));
    let sound = witness_ok && hunt.densities_monotone() && hunt.replays(&a);
    emit(&hunt);
    if sound {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn verify_cmd(args: VerifyArgs) -> Outcome {
    let lines = verify::run_suite(args.seed, args.quick);
    print!("{}", verify::render(&lines));
    if lines.iter().any(|l| l.failed()) {
        Err(Failure::Check)
    } else {
        Ok(())
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Failure::Input(format!("{THREADS_VAR} must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Input(e.to_string()))
}

fn run(cli: Cli) -> Outcome {
    configure_threads()?;
    match cli.command {
        Command::Corners(c) => corners(c),
        Command::Uniformity(a) => uniformity_cmd(a),
        Command::Spectrum(a) => spectrum_cmd(a),
        Command::Increment(a) => increment_cmd(a),
        Command::Partition(c) => partition_cmd(c),
        Command::Hunt(a) => hunt_cmd(a),
        Command::Verify(a) => verify_cmd(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Input(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
