use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use tnw_cate::bench::{
    emit_table, read_summary_csv, sweep_with_progress, train_model, ExperimentSpec, Metric, ModelId, SummaryRow,
    SweepSpec, TrainedModel,
};
use tnw_cate::datagen::{
    make_split_with, read_generator, read_split_dir, write_split_dir, Family, GeneratorSpec, TestSet, GENERATOR_FILE,
    TEST_POINTS,
};
use tnw_cate::rng;

#[derive(Parser)]
#[command(name = "tnw-cate", version, about = "Treatment effect estimation benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one synthetic split into a directory.
    Generate(GenerateArgs),
    /// Fit one model on a generated split and save it.
    Train(TrainArgs),
    /// Score a saved model on fresh test points from the split's generator.
    Evaluate(EvaluateArgs),
    /// Run replicated experiments from a config file.
    Sweep(SweepArgs),
    /// Render a table from one or more summary files.
    Table(TableArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value = "spiral")]
    family: Family,
    /// Training controls.
    #[arg(long, default_value_t = 100)]
    controls: usize,
    /// Treatments per control.
    #[arg(long, default_value_t = 0.1)]
    ratio: f64,
    #[arg(long, default_value_t = 10)]
    dim: usize,
    #[arg(long, default_value_t = 0.0)]
    noise_std: f64,
    #[arg(long, default_value_t = 0.2)]
    val_fraction: f64,
    #[arg(long, default_value_t = TEST_POINTS)]
    test_points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Directory written by `generate`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "TNW")]
    model: ModelId,
    /// Config file; its `[experiment]` table supplies TNW settings and grids.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Directory written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Directory written by `generate`, or a generator.json file.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = TEST_POINTS)]
    test_points: usize,
    /// Also write per-point predictions here.
    #[arg(long)]
    predictions: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// One or more families, comma separated; each gets its own subdirectory
    /// when more than one is given.
    #[arg(long, value_delimiter = ',')]
    family: Vec<Family>,
    /// Comma-separated model names.
    #[arg(long)]
    models: Option<String>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "cate")]
    metric: Metric,
    /// Show published reference values next to each cell.
    #[arg(long)]
    reference: bool,
    #[arg(long)]
    quiet: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TableArgs {
    /// summary.csv files, or directories containing one.
    #[arg(required = true)]
    summaries: Vec<PathBuf>,
    #[arg(long, default_value = "cate")]
    metric: Metric,
    #[arg(long)]
    reference: bool,
    /// Print CSV instead of aligned text.
    #[arg(long)]
    csv: bool,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Sweep(a) => sweep(a),
        Command::Table(a) => table(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn generate(a: GenerateArgs) -> Result<()> {
    let spec = GeneratorSpec::sample(a.family, a.dim, a.noise_std, a.seed)?;
    let split = make_split_with(&spec, a.controls, a.ratio, a.val_fraction, a.test_points)?;
    write_split_dir(&a.out, &spec, &split)?;
    println!(
        "{}: {} controls, {} treatments, {} validation, {} test -> {}",
        a.family,
        split.train.control.len(),
        split.train.treatment.len(),
        split.validation.control.len() + split.validation.treatment.len(),
        split.test.len(),
        a.out.display()
    );
    Ok(())
}

fn load_experiment(config: Option<&Path>) -> Result<ExperimentSpec> {
    Ok(match config {
        Some(path) => SweepSpec::from_toml_path(path)?.experiment,
        None => ExperimentSpec::default(),
    })
}

fn train(a: TrainArgs) -> Result<()> {
    let data = read_split_dir(&a.data).with_context(|| format!("reading {}", a.data.display()))?;
    let mut spec = load_experiment(a.config.as_deref())?;
    spec.family = data.generator.family;
    spec.d = data.generator.d;
    let model = train_model(a.model, &spec, &data.train, &data.validation, a.seed)?;
    model.save_dir(&a.out)?;
    match &model {
        TrainedModel::Tnw(_) => println!("{} trained -> {}", a.model, a.out.display()),
        TrainedModel::Meta {
            base, validation_mse, ..
        } => println!(
            "{} trained with {base:?} (validation {validation_mse:.6}) -> {}",
            a.model,
            a.out.display()
        ),
    }
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let gen_path = if a.data.is_dir() {
        a.data.join(GENERATOR_FILE)
    } else {
        a.data.clone()
    };
    let generator = read_generator(&gen_path)?;
    let model = TrainedModel::load_dir(&a.model)?;
    let test = TestSet::generate(&generator, a.test_points, rng::label("test"))?;
    let metrics = model.evaluate(&test)?;
    println!("model          {}", model.model());
    println!("cate_mse       {}", metrics.cate_mse);
    println!("control_mse    {}", metrics.control_mse);
    println!("treatment_mse  {}", metrics.treatment_mse);
    if let Some(path) = &a.predictions {
        let mut out = String::from("cate,control,treatment,true_cate,g0,g1\n");
        for (i, (cate, c, t)) in model.predict_rows(&test.features)?.into_iter().enumerate() {
            out.push_str(&format!(
                "{cate},{c},{t},{},{},{}\n",
                test.true_cate[i], test.g0[i], test.g1[i]
            ));
        }
        std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let mut base = match &a.config {
        Some(path) => SweepSpec::from_toml_path(path)?,
        None => SweepSpec::single(ExperimentSpec::default()),
    };
    if let Some(models) = &a.models {
        base.experiment.models = ModelId::parse_list(models)?;
    }
    if let Some(r) = a.replications {
        base.experiment.replications = r;
    }
    if let Some(s) = a.seed {
        base.experiment.base_seed = s;
    }
    let families = if a.family.is_empty() {
        vec![base.experiment.family]
    } else {
        a.family.clone()
    };
    let mut summary: Vec<SummaryRow> = Vec::new();
    for &family in &families {
        let mut spec = base.clone();
        spec.experiment.family = family;
        let dir = if families.len() > 1 {
            a.out.join(family.as_str())
        } else {
            a.out.clone()
        };
        let quiet = a.quiet;
        let output = sweep_with_progress(&spec, |row| {
            if quiet {
                return;
            }
            let status = match (row.cate_mse, &row.error) {
                (Some(m), _) => format!("cate_mse={m:.6}"),
                (None, Some(e)) => format!("failed: {e}"),
                (None, None) => "failed".into(),
            };
            eprintln!(
                "{family} {}={} rep {} {}: {status} ({:.1}s)",
                row.axis, row.value, row.replication, row.model, row.seconds
            );
        })?;
        output.write_dir(&dir)?;
        summary.extend(output.summary);
    }
    let table = emit_table(&summary, a.metric, a.reference);
    let text = table.to_text();
    std::fs::create_dir_all(&a.out)?;
    std::fs::write(a.out.join("table.txt"), &text)?;
    std::fs::write(a.out.join("table.csv"), table.to_csv())?;
    print!("{text}");
    Ok(())
}

fn table(a: TableArgs) -> Result<()> {
    let mut summary = Vec::new();
    for path in &a.summaries {
        let file = if path.is_dir() {
            path.join("summary.csv")
        } else {
            path.clone()
        };
        let f = std::fs::File::open(&file).with_context(|| format!("opening {}", file.display()))?;
        summary.extend(read_summary_csv(std::io::BufReader::new(f))?);
    }
    if summary.is_empty() {
        bail!("no summary rows found");
    }
    let table = emit_table(&summary, a.metric, a.reference);
    let body = if a.csv { table.to_csv() } else { table.to_text() };
    std::io::stdout().write_all(body.as_bytes())?;
    Ok(())
}
