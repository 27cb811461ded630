use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde::Serialize;

use rpsubspace::bounds::{self, BoundQuery};
use rpsubspace::data::{generate_union, load_matrix, write_matrix, DataFormat, LabeledDataset, UnionSpec};
use rpsubspace::experiments::attack::{attack_demo, AttackDemoConfig};
use rpsubspace::experiments::benchmark::{benchmark_report, BenchConfig, Method};
use rpsubspace::experiments::rejection::{rejection_curves, RejectionConfig, RejectionMode, ACUTE_TARGETS, OBTUSE_TARGETS};
use rpsubspace::experiments::{Cell, ExperimentReport, ReportFormat};
use rpsubspace::randproj::{issue_template, reissue_template, CancelableTemplate, ProjectionMatrix};
use rpsubspace::sparserep::{src_classify_batch, BasisPursuitOptions, Dictionary};
use rpsubspace::{Error, Recipe, Result};

#[derive(Parser)]
#[command(name = "rpsub", version, about = "Random projection experiments on union-of-subspaces data")]
struct Cli {
    /// Master seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value = "csv")]
    format: ReportFormat,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Add wall-clock time to report metadata. Stamped reports are not byte-reproducible.
    #[arg(long, global = true)]
    stamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a labeled dataset from random independent subspaces.
    GenData(GenDataArgs),
    /// Empirical rejection probability of cosine or inner-product preservation.
    Reject(RejectArgs),
    /// Reduction time and SRC accuracy of RP and PCA.
    Bench(BenchArgs),
    /// Sparse-representation classification of a test set.
    Classify(ClassifyArgs),
    /// Evaluate the probability bounds and dimension rules.
    Bounds(BoundsArgs),
    /// Pseudo-inverse attack on projected templates.
    Attack(AttackArgs),
    /// Issue, reissue or match cancelable templates.
    #[command(subcommand)]
    Template(TemplateCommand),
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long = "classes", default_value_t = 3)]
    k: usize,
    /// Subspace dimension per class.
    #[arg(long, default_value_t = 3)]
    d: usize,
    #[arg(long, default_value_t = 20)]
    per_class: usize,
    #[arg(long, default_value_t = 1.0)]
    coeff_scale: f64,
    /// Make the subspaces mutually orthogonal.
    #[arg(long)]
    orthogonal: bool,
    #[arg(long, default_value = "csv")]
    data_format: DataFormat,
}

#[derive(Args)]
struct RejectArgs {
    #[arg(long, default_value = "cosine")]
    mode: RejectionMode,
    /// One or more ε values, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.3")]
    eps: Vec<f64>,
    /// Cosine targets; defaults to the four acute and four obtuse reference values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    gamma: Option<Vec<f64>>,
    #[arg(long, default_value_t = 2000)]
    trials: usize,
    /// Comma list, or start:stop:step.
    #[arg(long, default_value = "30:300:30")]
    m_grid: String,
    #[arg(long, default_value_t = 300)]
    n: usize,
    #[arg(long, default_value = "dense-gaussian")]
    recipe: Recipe,
    #[arg(long, default_value_t = 1.0)]
    length_min: f64,
    #[arg(long, default_value_t = 10.0)]
    length_max: f64,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "100")]
    dims: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "rp,pca")]
    methods: Vec<Method>,
    /// Training fraction of the stratified split.
    #[arg(long, default_value_t = 0.5)]
    split: f64,
    #[arg(long, conflicts_with = "synthetic")]
    input: Option<PathBuf>,
    /// Generator spec, e.g. "n=1024,k=10,d=5,count=200".
    #[arg(long)]
    synthetic: Option<String>,
    /// Timed repetitions after a warm-up run; 0 omits timing.
    #[arg(long, default_value_t = 5)]
    timing_repeats: usize,
    /// Skip the classifier and report timing only.
    #[arg(long)]
    no_accuracy: bool,
    #[arg(long, default_value = "dense-gaussian")]
    recipe: Recipe,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 5000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    /// Allowed residual norm σ; 0 requires exact reconstruction.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
}

impl SolverArgs {
    fn options(&self) -> BasisPursuitOptions {
        BasisPursuitOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            rho: self.rho,
            noise: self.noise,
        }
    }
}

#[derive(Args)]
struct ClassifyArgs {
    /// Training dictionary.
    #[arg(long)]
    train: PathBuf,
    /// Samples to classify.
    #[arg(long)]
    test: PathBuf,
    /// Randomly project both sets to this dimension first.
    #[arg(long)]
    project: Option<usize>,
    #[arg(long, default_value = "dense-gaussian")]
    recipe: Recipe,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, default_value_t = 0.3)]
    eps: f64,
    #[arg(long, default_value_t = 300)]
    m: usize,
    /// Number of data samples N.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = bounds::DEFAULT_DELTA)]
    delta: f64,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    gamma: f64,
    /// Subspace dimension for the c·d·ln d rule.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, default_value_t = bounds::DEFAULT_SUBSPACE_CONSTANT)]
    c: f64,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long, default_value_t = 300)]
    n: usize,
    #[arg(long, default_value_t = 60)]
    m: usize,
    #[arg(long, default_value_t = 5)]
    d: usize,
    #[arg(long, default_value_t = 10)]
    count: usize,
}

#[derive(Subcommand)]
enum TemplateCommand {
    /// Project one sample into a template under R(--seed).
    Issue(TemplateIssueArgs),
    /// Replace a template with one under a fresh matrix R(--seed).
    Reissue(TemplateIssueArgs),
    /// Score probes against a template.
    Match(TemplateMatchArgs),
}

#[derive(Args)]
struct TemplateIssueArgs {
    /// Dataset file holding the sample.
    #[arg(long)]
    input: PathBuf,
    /// Row of the sample (0-based).
    #[arg(long, default_value_t = 0)]
    row: usize,
    #[arg(long)]
    subject: String,
    #[arg(long, default_value_t = 64)]
    m: usize,
}

#[derive(Args)]
struct TemplateMatchArgs {
    /// Template JSON written by `template issue`.
    #[arg(long)]
    template: PathBuf,
    /// Dataset file holding the probes; every row is scored.
    #[arg(long)]
    input: PathBuf,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidArgument(_) => 2,
        Error::Solver { .. } => 3,
        Error::Io(_) | Error::Parse { .. } | Error::Json(_) => 4,
    }
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit(cli: &Cli, mut report: ExperimentReport) -> Result<()> {
    report.set_meta("seed", cli.seed)?;
    if cli.stamp {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        report.set_meta("wall_clock_unix", now)?;
    }
    let mut out = open_out(cli.out.as_deref())?;
    report.write(cli.format, &mut out)?;
    out.flush()?;
    Ok(())
}

fn load(path: &Path) -> Result<LabeledDataset> {
    load_matrix(path, DataFormat::from_path(path))
}

fn parse_grid(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::InvalidArgument(format!("cannot parse m grid '{s}'"));
    if s.contains(':') {
        let parts: Vec<usize> = s
            .split(':')
            .map(|p| p.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let [start, stop, step] = parts[..] else { return Err(bad()) };
        if step == 0 || start > stop {
            return Err(bad());
        }
        Ok((start..=stop).step_by(step).collect())
    } else {
        s.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect()
    }
}

fn parse_synthetic(s: &str, seed: u64) -> Result<UnionSpec> {
    let mut spec = UnionSpec::uniform(1024, 10, 5, 200, seed);
    let (mut k, mut d, mut count) = (10, 5, 200);
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if part == "orthogonal" {
            spec.orthogonal = true;
            continue;
        }
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("expected key=value, got '{part}'")))?;
        let int = || {
            value
                .parse::<usize>()
                .map_err(|_| Error::InvalidArgument(format!("bad value for {key}: '{value}'")))
        };
        match key {
            "n" => spec.n = int()?,
            "k" => k = int()?,
            "d" => d = int()?,
            "count" => count = int()?,
            "scale" => {
                spec.coeff_scale = value
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad scale '{value}'")))?
            }
            other => return Err(Error::InvalidArgument(format!("unknown synthetic key '{other}'"))),
        }
    }
    spec.dims = vec![d; k];
    spec.counts = vec![count; k];
    Ok(spec)
}

fn gen_data(cli: &Cli, args: &GenDataArgs) -> Result<()> {
    let spec = UnionSpec {
        coeff_scale: args.coeff_scale,
        orthogonal: args.orthogonal,
        ..UnionSpec::uniform(args.n, args.k, args.d, args.per_class, cli.seed)
    };
    let ds = generate_union(&spec)?;
    let mut out = open_out(cli.out.as_deref())?;
    write_matrix(&ds, &mut out, args.data_format)?;
    out.flush()?;
    Ok(())
}

fn reject(cli: &Cli, args: &RejectArgs) -> Result<()> {
    let gammas = args
        .gamma
        .clone()
        .unwrap_or_else(|| ACUTE_TARGETS.iter().chain(&OBTUSE_TARGETS).copied().collect());
    let config = RejectionConfig {
        n: args.n,
        m_grid: parse_grid(&args.m_grid)?,
        trials: args.trials,
        eps: args.eps.first().copied().unwrap_or(0.1),
        gammas,
        mode: args.mode,
        master_seed: cli.seed,
        length_range: (args.length_min, args.length_max),
        recipe: args.recipe,
    };
    emit(cli, rejection_curves(&config, &args.eps)?)
}

fn bench(cli: &Cli, args: &BenchArgs) -> Result<()> {
    let data = match (&args.input, &args.synthetic) {
        (Some(path), _) => load(path)?,
        (None, Some(spec)) => generate_union(&parse_synthetic(spec, cli.seed)?)?,
        (None, None) => return Err(Error::InvalidArgument("bench needs --input or --synthetic".into())),
    };
    let config = BenchConfig {
        dims: args.dims.clone(),
        methods: args.methods.clone(),
        split_fraction: args.split,
        seed: cli.seed,
        recipe: args.recipe,
        timing_repeats: args.timing_repeats,
        accuracy: !args.no_accuracy,
        solver: args.solver.options(),
    };
    emit(cli, benchmark_report(&data, &config)?)
}

fn classify(cli: &Cli, args: &ClassifyArgs) -> Result<()> {
    let mut train = load(&args.train)?;
    let mut test = load(&args.test)?;
    if let Some(m) = args.project {
        let r = ProjectionMatrix::generate(train.ambient_dim(), m, args.recipe, cli.seed)?;
        train = r.project_dataset(&train)?;
        test = r.project_dataset(&test)?;
    }
    let dict = Dictionary::from_dataset(&train)?;
    let ys: Vec<DVector<f64>> = (0..test.len()).map(|i| test.sample(i)).collect();
    let decisions = src_classify_batch(&dict, &ys, &args.solver.options())?;

    #[derive(Serialize)]
    struct Shown<'a> {
        train: &'a Path,
        test: &'a Path,
        project: Option<usize>,
        recipe: Recipe,
        solver: BasisPursuitOptions,
    }
    let shown = Shown {
        train: &args.train,
        test: &args.test,
        project: args.project,
        recipe: args.recipe,
        solver: args.solver.options(),
    };
    let mut report = ExperimentReport::new("classify", &shown, &["index", "label", "predicted", "residual", "iterations"])?;
    let mut hits = 0;
    for (i, (d, &label)) in decisions.iter().zip(test.labels()).enumerate() {
        hits += usize::from(d.class == label);
        let residual = d.residuals.iter().find(|(c, _)| *c == d.class).map(|r| r.1);
        report.push_row(vec![i.into(), label.into(), d.class.into(), residual.into(), d.code.iterations.into()]);
    }
    if !test.is_empty() {
        report.set_meta("accuracy", hits as f64 / test.len() as f64)?;
    }
    emit(cli, report)
}

fn bounds_cmd(cli: &Cli, args: &BoundsArgs) -> Result<()> {
    let query = BoundQuery {
        eps: args.eps,
        m: args.m,
        n_samples: args.samples,
        delta: args.delta,
        gamma: args.gamma,
    };
    let mut report = ExperimentReport::new("bounds", &(&query, args.d, args.c), &["quantity", "value"])?;
    for (name, value) in query.evaluate()? {
        report.push_row(vec![Cell::Text(name), value.into()]);
    }
    if let Some(d) = args.d {
        report.push_row(vec![
            Cell::Text("recommended_dim_for_subspace".into()),
            bounds::recommended_dim_for_subspace(d, args.c)?.into(),
        ]);
    }
    emit(cli, report)
}

fn attack(cli: &Cli, args: &AttackArgs) -> Result<()> {
    let config = AttackDemoConfig { n: args.n, m: args.m, d: args.d, count: args.count, seed: cli.seed };
    emit(cli, attack_demo(&config)?)
}

fn template(cli: &Cli, cmd: &TemplateCommand) -> Result<()> {
    match cmd {
        TemplateCommand::Issue(a) | TemplateCommand::Reissue(a) => {
            let data = load(&a.input)?;
            if a.row >= data.len() {
                return Err(Error::InvalidArgument(format!("row {} out of range ({} rows)", a.row, data.len())));
            }
            let x = data.sample(a.row);
            let t = match cmd {
                TemplateCommand::Issue(_) => issue_template(&x, &a.subject, cli.seed, a.m)?,
                _ => reissue_template(&x, &a.subject, cli.seed, a.m)?,
            };
            let mut out = open_out(cli.out.as_deref())?;
            serde_json::to_writer_pretty(&mut out, &t)?;
            out.write_all(b"\n")?;
            out.flush()?;
            Ok(())
        }
        TemplateCommand::Match(a) => {
            let t: CancelableTemplate = serde_json::from_reader(io::BufReader::new(File::open(&a.template)?))?;
            let probes = load(&a.input)?;
            let mut report = ExperimentReport::new(
                "template-match",
                &(&t.subject, t.seed, t.dim(), &a.input),
                &["index", "label", "score"],
            )?;
            for i in 0..probes.len() {
                let score = t.match_score(&probes.sample(i))?;
                report.push_row(vec![i.into(), probes.labels()[i].into(), score.into()]);
            }
            emit(cli, report)
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::GenData(a) => gen_data(cli, a),
        Command::Reject(a) => reject(cli, a),
        Command::Bench(a) => bench(cli, a),
        Command::Classify(a) => classify(cli, a),
        Command::Bounds(a) => bounds_cmd(cli, a),
        Command::Attack(a) => attack(cli, a),
        Command::Template(c) => template(cli, c),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rpsub: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_forms() {
        assert_eq!(parse_grid("30:90:30").unwrap(), vec![30, 60, 90]);
        assert_eq!(parse_grid("5, 10").unwrap(), vec![5, 10]);
        assert!(parse_grid("1:2").is_err());
        assert!(parse_grid("x").is_err());
    }

    #[test]
    fn synthetic_spec() {
        let s = parse_synthetic("n=64,k=3,d=2,count=7,orthogonal", 9).unwrap();
        assert_eq!((s.n, s.dims.clone(), s.counts.clone(), s.orthogonal, s.seed), (64, vec![2; 3], vec![7; 3], true, 9));
        assert!(parse_synthetic("q=1", 0).is_err());
    }
}
