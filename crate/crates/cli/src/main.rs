mod manifest;
mod volumes;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use negspread::grid::{
    read_label_volume, read_regions_text, write_label_volume, write_regions_text, Region, Volume,
};
use negspread::metrics::{bias_rmse, profile_csv, radial_profile, region_table_csv, ProfileSpec};
use negspread::oracle::{oracle_solve, DenseLp, Norm};
use negspread::phantom::{
    add_noise, add_noise_in, body_region, make_phantom, PhantomConfig, PhantomSpec,
};
use negspread::solver::{
    check_feasible_with, solve, Feasibility, SolverConfig, SweepOrder, Tolerance,
};
use negspread::spread::{make_preset, BoundaryPolicy, SpreadMask};
use serde_json::json;

use manifest::{manifest_path, RunManifest};

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;
const EXIT_INVALID: u8 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "negspread",
    version,
    about = "Remove negative voxels while preserving local means"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve for the non-negative image and write it.
    Apply(ApplyArgs),
    /// Report feasibility of a volume and/or validity of a mask.
    Check(CheckArgs),
    /// Generate a synthetic phantom with optional noise.
    Phantom(PhantomArgs),
    /// Region bias/RMSE table and radial profile as CSV.
    Metrics(MetricsArgs),
    /// Compare the solver with the dense reference solution.
    OracleCompare(OracleArgs),
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Raw f32 volume (sidecar alongside) or a `.csv` file.
    #[arg(long)]
    input: PathBuf,
    /// Sidecar metadata; defaults to the input path with a `.json` extension.
    #[arg(long)]
    meta: Option<PathBuf>,
    /// Shape of a CSV input, e.g. `4,4`; a CSV is one-dimensional otherwise.
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
}

impl InputArgs {
    fn load(&self) -> anyhow::Result<Volume> {
        Ok(volumes::load(
            &self.input,
            self.meta.as_deref(),
            self.dims.as_deref(),
        )?)
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Boundary {
    Renormalize,
    Reject,
}

impl From<Boundary> for BoundaryPolicy {
    fn from(b: Boundary) -> Self {
        match b {
            Boundary::Renormalize => BoundaryPolicy::Renormalize,
            Boundary::Reject => BoundaryPolicy::Reject,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Order {
    Lexicographic,
    Reverse,
}

#[derive(Args, Debug)]
struct SolverArgs {
    /// Preset name (1d-2, 2d-4, 2d-8, 3d-6, 3d-18, 3d-26) or mask file; the
    /// nearest-neighbour preset for the volume's rank by default.
    #[arg(long)]
    mask: Option<String>,
    /// Negativity tolerance as a multiple of max|x|.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Absolute negativity tolerance; overrides `--tol`.
    #[arg(long)]
    tol_abs: Option<f64>,
    #[arg(long, value_enum, default_value_t = Boundary::Renormalize)]
    boundary: Boundary,
    #[arg(long, value_enum, default_value_t = Order::Lexicographic)]
    order: Order,
    /// Cap on sweeps that perform updates.
    #[arg(long, default_value_t = 10_000)]
    max_outer: usize,
    /// Cap on total site updates, in units of N.
    #[arg(long, default_value_t = 10_000)]
    max_inner: usize,
    /// Worker threads for the colour-partitioned sweep.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            neg_tolerance: match self.tol_abs {
                Some(a) => Tolerance::Absolute(a),
                None => Tolerance::Relative(self.tol),
            },
            max_outer_iterations: self.max_outer,
            max_inner_sweeps: self.max_inner,
            sweep_order: match self.order {
                Order::Lexicographic => SweepOrder::Lexicographic,
                Order::Reverse => SweepOrder::Reverse,
            },
            boundary: self.boundary.into(),
            threads: self.threads,
        }
    }

    fn mask(&self, v: &Volume) -> anyhow::Result<SpreadMask> {
        let name = match &self.mask {
            Some(m) => m.clone(),
            None => match v.dims().len() {
                1 => "1d-2".into(),
                2 => "2d-4".into(),
                _ => "3d-6".into(),
            },
        };
        load_mask(&name)
    }
}

fn load_mask(name: &str) -> anyhow::Result<SpreadMask> {
    if let Ok(m) = make_preset(name) {
        return Ok(m);
    }
    let path = Path::new(name);
    if path.exists() {
        return Ok(SpreadMask::read(path)?);
    }
    Err(negspread::Error::UnknownPreset(name.into()).into())
}

#[derive(Args, Debug)]
struct ApplyArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output volume (`.csv` for text, raw f32 plus sidecar otherwise).
    #[arg(long)]
    output: PathBuf,
    /// Also write the transfer coefficients.
    #[arg(long)]
    alpha: Option<PathBuf>,
    /// Manifest path; defaults to `<output>.manifest.json`.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    /// Volume to test for feasibility.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    meta: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    /// Mask file to validate; every violation is listed.
    #[arg(long)]
    mask_file: Option<PathBuf>,
    /// Preset or mask file whose coupling decides per-component feasibility.
    #[arg(long)]
    mask: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum NoiseSupport {
    /// Every voxel.
    All,
    /// Voxels inside the body outline only.
    Body,
}

#[derive(Args, Debug)]
struct PhantomArgs {
    /// JSON document with `phantom` and `noise` sections.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// JSON noise section; overrides the one in `--spec`.
    #[arg(long)]
    noise: Option<PathBuf>,
    /// Default layout scaled to these dims, e.g. `64,64,64`.
    #[arg(long, value_delimiter = ',', conflicts_with = "spec")]
    dims: Option<Vec<usize>>,
    /// Gaussian noise standard deviation.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = NoiseSupport::All)]
    noise_support: NoiseSupport,
    /// Writes `<prefix>.raw`, `<prefix>_truth.raw`, `<prefix>_regions.txt`,
    /// `<prefix>_labels.raw` and sidecars.
    #[arg(long)]
    out_prefix: PathBuf,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Region text file, or a label volume (`.raw` with sidecar).
    #[arg(long)]
    regions: PathBuf,
    /// True values per region, e.g. `cold=0,warm=177000`.
    #[arg(long, value_delimiter = ',')]
    truths: Vec<String>,
    /// Noise-free volume; region means become the true values.
    #[arg(long)]
    truth_volume: Option<PathBuf>,
    /// JSON profile specification.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Writes `<prefix>_regions.csv` and `<prefix>_profile.csv`.
    #[arg(long)]
    out_prefix: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum NormArg {
    L1,
    L2,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, value_enum, default_value_t = NormArg::L1)]
    norm: NormArg,
    /// Writes the deviation report and a manifest.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug)]
struct NotConverged;

impl std::fmt::Display for NotConverged {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "solver stopped at an iteration cap before converging")
    }
}

impl std::error::Error for NotConverged {}

/// A verdict already printed; only the exit code remains.
#[derive(Debug)]
struct Verdict(u8);

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "exit {}", self.0)
    }
}

impl std::error::Error for Verdict {}

fn exit_code(e: &anyhow::Error) -> u8 {
    if let Some(v) = e.downcast_ref::<Verdict>() {
        return v.0;
    }
    if e.downcast_ref::<NotConverged>().is_some() {
        return EXIT_NOT_CONVERGED;
    }
    match e.downcast_ref::<negspread::Error>() {
        Some(negspread::Error::Infeasible { .. }) => EXIT_INFEASIBLE,
        _ => EXIT_INVALID,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INVALID)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Apply(a) => apply(a),
        Command::Check(a) => check(a),
        Command::Phantom(a) => phantom(a),
        Command::Metrics(a) => metrics(a),
        Command::OracleCompare(a) => oracle_compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if e.downcast_ref::<Verdict>().is_none() {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}

fn apply(a: ApplyArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let x = a.input.load()?;
    let mask = a.solver.mask(&x)?;
    let cfg = a.solver.config();
    let s = solve(&x, &mask, &cfg)?;

    let mut m = RunManifest::new("apply");
    m.config = json!({ "solver": cfg, "mask": mask.to_text() });
    m.inputs.push(a.input.input.clone());
    m.outputs = volumes::save(&s.y, &a.output)?;
    if let Some(path) = &a.alpha {
        m.outputs
            .extend(volumes::save(&s.alpha.clone().into_volume(), path)?);
    }
    m.report = Some(serde_json::to_value(&s.report)?);
    m.finish(start.elapsed());
    m.write(&a.report.unwrap_or_else(|| manifest_path(&a.output)))?;

    let r = &s.report;
    println!(
        "converged={} outer_iterations={} site_updates={} active_set={} objective_l1={:e} mean_drift={:e}",
        r.converged,
        r.outer_iterations,
        r.total_site_updates,
        r.active_set_size,
        r.objective_l1,
        r.mean_drift
    );
    if !r.converged {
        return Err(NotConverged.into());
    }
    Ok(())
}

fn check(a: CheckArgs) -> anyhow::Result<()> {
    if a.input.is_none() && a.mask_file.is_none() {
        bail!("nothing to check: pass --input and/or --mask-file");
    }
    let mut code = 0;
    if let Some(path) = &a.mask_file {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mask = SpreadMask::from_text_unchecked(&text)?;
        let violations = mask.validate();
        if violations.is_empty() {
            println!(
                "mask ok: {} taps, radius {:?}",
                mask.taps().len(),
                mask.radius()
            );
        } else {
            println!("mask invalid:");
            for v in &violations {
                println!("  {v}");
            }
            code = EXIT_INVALID;
        }
    }
    if let Some(path) = &a.input {
        let x = volumes::load(path, a.meta.as_deref(), a.dims.as_deref())?;
        let mask = match &a.mask {
            Some(name) => load_mask(name)?,
            None => match x.dims().len() {
                1 => make_preset("1d-2")?,
                2 => make_preset("2d-4")?,
                _ => make_preset("3d-6")?,
            },
        };
        match check_feasible_with(&x, &mask)? {
            Feasibility::Feasible => println!("feasible: sum {:e}, mean {:e}", x.sum(), x.mean()),
            Feasibility::Infeasible { sum } => {
                println!("infeasible: sum {sum:e} is negative");
                if code == 0 {
                    code = EXIT_INFEASIBLE;
                }
            }
        }
    }
    if code != 0 {
        return Err(Verdict(code).into());
    }
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text)
        .map_err(|e| negspread::Error::Parse(format!("{}: {e}", path.display())).into())
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn phantom(a: PhantomArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let mut cfg: PhantomConfig = match &a.spec {
        Some(path) => read_json(path)?,
        None => PhantomConfig::default(),
    };
    if let Some(dims) = &a.dims {
        cfg.phantom = PhantomSpec::layout(dims)?;
    }
    if let Some(path) = &a.noise {
        cfg.noise = read_json(path)?;
    }
    if let Some(sigma) = a.sigma {
        cfg.noise.sigma = sigma;
    }
    if let Some(seed) = a.seed {
        cfg.noise.seed = seed;
    }
    let (truth, regions) = make_phantom(&cfg.phantom)?;
    let noisy = match a.noise_support {
        NoiseSupport::All => add_noise(&truth, &cfg.noise)?,
        NoiseSupport::Body => {
            add_noise_in(&truth, &cfg.noise, &body_region(&regions, truth.len())?)?
        }
    };

    let mut m = RunManifest::new("phantom");
    m.inputs.extend(a.spec.iter().cloned());
    m.inputs.extend(a.noise.iter().cloned());
    m.seeds.push(cfg.noise.seed);
    m.outputs
        .extend(volumes::save(&noisy, &with_suffix(&a.out_prefix, ".raw"))?);
    m.outputs.extend(volumes::save(
        &truth,
        &with_suffix(&a.out_prefix, "_truth.raw"),
    )?);
    let text = with_suffix(&a.out_prefix, "_regions.txt");
    write_regions_text(&regions, &text)?;
    m.outputs.push(text);
    let (labels, labels_meta) = (
        with_suffix(&a.out_prefix, "_labels.raw"),
        with_suffix(&a.out_prefix, "_labels.json"),
    );
    write_label_volume(truth.dims(), &regions, &labels, &labels_meta)?;
    m.outputs.extend([labels, labels_meta]);
    let counts: BTreeMap<&str, usize> = regions.iter().map(|r| (r.name(), r.len())).collect();
    m.config = json!({
        "phantom": cfg.phantom,
        "noise": cfg.noise,
        "noise_support": format!("{:?}", a.noise_support).to_lowercase(),
    });
    m.report = Some(json!({ "region_voxels": counts }));
    m.finish(start.elapsed());
    m.write(&with_suffix(&a.out_prefix, ".manifest.json"))?;
    println!("wrote {} voxels, regions {:?}", truth.len(), counts);
    Ok(())
}

fn load_regions(path: &Path, len: usize) -> anyhow::Result<Vec<Region>> {
    let raw = path.extension().is_some_and(|e| e == "raw" || e == "f32");
    let regions = if raw {
        read_label_volume(path, &volumes::sidecar(path))?
    } else {
        read_regions_text(path, len)?
    };
    if let Some(r) = regions
        .iter()
        .find(|r| r.indices().last().is_some_and(|&i| i >= len))
    {
        bail!(negspread::Error::InvalidRegion {
            name: r.name().into(),
            reason: "indices exceed the volume".into()
        });
    }
    Ok(regions)
}

fn parse_truths(items: &[String]) -> anyhow::Result<BTreeMap<String, f64>> {
    items
        .iter()
        .map(|item| {
            let (name, value) = item.split_once('=').ok_or_else(|| {
                anyhow!(negspread::Error::Parse(format!(
                    "truth `{item}` is not name=value"
                )))
            })?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| negspread::Error::Parse(format!("bad truth value in `{item}`")))?;
            Ok((name.trim().to_string(), value))
        })
        .collect()
}

fn metrics(a: MetricsArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let v = a.input.load()?;
    let regions = load_regions(&a.regions, v.len())?;
    let mut truths = parse_truths(&a.truths)?;
    if let Some(path) = &a.truth_volume {
        let t = volumes::load(path, None, Some(v.dims()))?;
        if t.dims() != v.dims() {
            bail!(negspread::Error::DimsMismatch {
                left: v.dims().to_vec(),
                right: t.dims().to_vec()
            });
        }
        for r in &regions {
            truths
                .entry(r.name().to_string())
                .or_insert(negspread::grid::region_stats(&t, r, 0.0)?.mean);
        }
    }
    let mut rows = Vec::new();
    for r in &regions {
        match truths.get(r.name()) {
            Some(&truth) => rows.push((r.name().to_string(), truth, bias_rmse(&v, r, truth)?)),
            None => eprintln!("note: no true value for region `{}`, skipped", r.name()),
        }
    }

    let mut m = RunManifest::new("metrics");
    m.inputs.extend([a.input.input.clone(), a.regions.clone()]);
    m.inputs.extend(a.truth_volume.iter().cloned());
    let table = with_suffix(&a.out_prefix, "_regions.csv");
    std::fs::write(&table, region_table_csv(&rows))
        .with_context(|| format!("writing {}", table.display()))?;
    m.outputs.push(table);
    let mut profile_spec = None;
    if let Some(path) = &a.profile {
        let spec: ProfileSpec = read_json(path)?;
        let bins = radial_profile(&v, &spec)?;
        let out = with_suffix(&a.out_prefix, "_profile.csv");
        std::fs::write(&out, profile_csv(&bins))
            .with_context(|| format!("writing {}", out.display()))?;
        m.inputs.push(path.clone());
        m.outputs.push(out);
        profile_spec = Some(spec);
    }
    m.config = json!({ "truths": truths, "profile": profile_spec });
    m.finish(start.elapsed());
    m.write(&with_suffix(&a.out_prefix, "_metrics.manifest.json"))?;
    print!("{}", region_table_csv(&rows));
    Ok(())
}

fn oracle_compare(a: OracleArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let x = a.input.load()?;
    let mask = a.solver.mask(&x)?;
    let cfg = a.solver.config();
    let s = solve(&x, &mask, &cfg)?;
    let norm = match a.norm {
        NormArg::L1 => Norm::L1,
        NormArg::L2 => Norm::L2,
    };
    let o = oracle_solve(&DenseLp::from_volume(norm, &x, &mask, cfg.boundary)?)?;
    let dev =
        s.y.data()
            .iter()
            .zip(&o.y)
            .fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
    let scale = x.max_abs().max(f64::MIN_POSITIVE);
    let report = json!({
        "voxels": x.len(),
        "norm": format!("{:?}", a.norm).to_lowercase(),
        "max_abs_x": x.max_abs(),
        "max_deviation": dev,
        "relative_deviation": dev / scale,
        "solver_objective_l1": s.alpha.total(),
        "oracle_objective": o.objective,
        "solver": s.report,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    if let Some(path) = &a.report {
        std::fs::write(path, serde_json::to_string_pretty(&report)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        let mut m = RunManifest::new("oracle-compare");
        m.config = json!({ "solver": cfg, "mask": mask.to_text(), "norm": report["norm"] });
        m.inputs.push(a.input.input.clone());
        m.outputs.push(path.clone());
        m.report = Some(report);
        m.finish(start.elapsed());
        m.write(&manifest_path(path))?;
    }
    if !s.report.converged {
        return Err(NotConverged.into());
    }
    Ok(())
}
