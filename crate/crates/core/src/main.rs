use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cst_core::mask::Connectivity;
use cst_core::phantom::{CohortSimSpec, FlagAssignment, PhantomSpec};
use cst_core::pipeline::{
    self, parse_phantom_spec, read_integrity_table, IntegrityOptions, RunManifest, Threshold,
};
use cst_core::stats::records::read_records;
use cst_core::{Error, Execution};

const EXIT_USAGE: u8 = 1;
const EXIT_BATCH_FAILED: u8 = 2;

#[derive(Parser)]
#[command(
    name = "cstkit",
    version,
    about = "Corticospinal tract integrity metrics and cohort outcome analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dice coefficient between two mask volumes.
    Dice {
        /// Predicted mask (.nii, .nii.gz or .hdr).
        pred: PathBuf,
        /// Reference mask on the same grid.
        truth: PathBuf,
        #[command(flatten)]
        threshold: ThresholdArgs,
    },
    /// Per-subject overlap and split flags for every subject in a manifest.
    Integrity(IntegrityArgs),
    /// Cohort summary table and outcome regressions.
    Analyze(AnalyzeArgs),
    /// Write a synthetic tract/haematoma pair with its known flags.
    Phantom(PhantomArgs),
    /// Simulate a cohort of records (and optionally masks) with known effects.
    CohortSim(CohortSimArgs),
}

#[derive(Args)]
struct ThresholdArgs {
    /// Voxels strictly above this value are foreground.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Interpret --threshold as a fraction of each volume's value range.
    #[arg(long)]
    relative_threshold: bool,
}

impl ThresholdArgs {
    fn resolve(&self, manifest: Option<f64>, explicit: bool) -> Threshold {
        let t = if explicit {
            self.threshold
        } else {
            manifest.unwrap_or(self.threshold)
        };
        if self.relative_threshold {
            Threshold::Relative(t)
        } else {
            Threshold::Absolute(t)
        }
    }
}

#[derive(Args)]
struct IntegrityArgs {
    /// Run manifest listing the subjects.
    manifest: PathBuf,
    #[command(flatten)]
    threshold: ThresholdArgs,
    /// Voxel adjacency for component filtering: 6 or 26.
    #[arg(long, value_parser = parse_connectivity)]
    connectivity: Option<Connectivity>,
    /// Drop connected components smaller than this many voxels.
    #[arg(long)]
    min_component: Option<usize>,
    /// Midsagittal plane world x in mm, for every subject.
    #[arg(long, allow_negative_numbers = true)]
    midline_x: Option<f64>,
    /// Worker threads; 1 runs sequentially. Defaults to all cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Treat any per-subject failure as fatal.
    #[arg(long)]
    strict: bool,
    /// Report directory; falls back to the manifest's output_dir, then `.`.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Clinical records CSV.
    #[arg(long)]
    records: PathBuf,
    /// Integrity table written by `cstkit integrity`.
    #[arg(long)]
    integrity: PathBuf,
    /// Also fit models with both integrity predictors together.
    #[arg(long)]
    joint: bool,
    /// Worker threads; 1 runs sequentially. Defaults to all cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Report directory.
    #[arg(long, default_value = ".")]
    output: PathBuf,
}

#[derive(Args)]
struct PhantomArgs {
    /// Phantom spec file; defaults are used for absent keys.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Overrides the jitter seed given in the phantom spec file.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for the mask pair and truth.txt.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct CohortSimArgs {
    /// Cohort size.
    #[arg(long, default_value_t = 487)]
    n: usize,
    /// Subjects with haematoma overlap (default scales 110 of 487).
    #[arg(long)]
    n_overlap: Option<usize>,
    /// Subjects with a tract split (default scales 170 of 487).
    #[arg(long)]
    n_split: Option<usize>,
    /// Master seed; equal seeds give byte-identical output.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 1 runs sequentially. Defaults to all cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Skip writing per-subject masks and the manifest.
    #[arg(long)]
    no_masks: bool,
    /// Output directory.
    #[arg(long)]
    output: PathBuf,
}

fn parse_connectivity(s: &str) -> Result<Connectivity, String> {
    s.parse::<u32>()
        .ok()
        .and_then(Connectivity::from_count)
        .ok_or_else(|| format!("connectivity must be 6 or 26, got '{s}'"))
}

enum Failure {
    Usage(String),
    Batch(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn threshold_given(name: &str) -> bool {
    std::env::args().any(|a| a == name || a.starts_with(&format!("{name}=")))
}

fn cmd_integrity(a: IntegrityArgs) -> Result<(), Failure> {
    let manifest = RunManifest::load(&a.manifest)?;
    manifest.validate()?;
    let opts = IntegrityOptions {
        threshold: a
            .threshold
            .resolve(manifest.threshold, threshold_given("--threshold")),
        connectivity: a.connectivity.or(manifest.connectivity).unwrap_or_default(),
        min_component: a.min_component.or(manifest.min_component).unwrap_or(0),
        midline_x: a.midline_x,
        exec: Execution::from_jobs(a.jobs),
    };
    let run = pipeline::run_integrity(&manifest, &opts);
    let out_dir = a
        .output
        .or_else(|| manifest.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    run.write(&out_dir)?;
    print!("{}", run.to_csv());
    for f in &run.failures {
        eprintln!("failed: {}: {}", f.id, f.error);
    }
    if run.rows.is_empty() {
        return Err(Failure::Batch(format!(
            "all {} subjects failed",
            run.failures.len()
        )));
    }
    if a.strict && !run.failures.is_empty() {
        return Err(Failure::Batch(format!(
            "{} of {} subjects failed (strict mode)",
            run.failures.len(),
            manifest.subjects.len()
        )));
    }
    Ok(())
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<(), Failure> {
    let records = read_records(&a.records)?;
    let (flags, metadata) = read_integrity_table(&a.integrity)?;
    let analysis = pipeline::run_analysis(
        &records,
        &flags,
        metadata,
        a.joint,
        Execution::from_jobs(a.jobs),
    )?;
    analysis.write(&a.output)?;
    print!(
        "{}\n{}",
        analysis.table.render_text(),
        analysis.regression_text()
    );
    Ok(())
}

fn cmd_phantom(a: PhantomArgs) -> Result<(), Failure> {
    let mut spec = match &a.spec {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            parse_phantom_spec(&text, &p.display().to_string())?
        }
        None => PhantomSpec::default(),
    };
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    let p = pipeline::run_phantom(&spec, &a.output)?;
    print!("{}", pipeline::truth_text(&p.truth));
    Ok(())
}

fn cmd_cohort_sim(a: CohortSimArgs) -> Result<(), Failure> {
    let mut spec = CohortSimSpec::with_reference_marginals(a.n);
    if let FlagAssignment::Counts { overlap, split } = &mut spec.flags {
        *overlap = a.n_overlap.unwrap_or(*overlap);
        *split = a.n_split.unwrap_or(*split);
    }
    let out = pipeline::run_cohort_sim(
        &spec,
        a.seed,
        &a.output,
        !a.no_masks,
        Execution::from_jobs(a.jobs),
    )?;
    println!("records: {}", out.records_path.display());
    println!("truth flags: {}", out.truth_path.display());
    if let Some(m) = &out.manifest_path {
        println!("manifest: {}", m.display());
    }
    println!("clamp rate: {:.4}", out.cohort.clamped.rate());
    Ok(())
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Dice {
            pred,
            truth,
            threshold,
        } => {
            let d = pipeline::run_dice(
                Path::new(&pred),
                Path::new(&truth),
                threshold.resolve(None, true),
            )?;
            println!("{d:.4}");
            Ok(())
        }
        Command::Integrity(a) => cmd_integrity(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Phantom(a) => cmd_phantom(a),
        Command::CohortSim(a) => cmd_cohort_sim(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Batch(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_BATCH_FAILED)
        }
    }
}
