use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use epscluster::coarsen::{build_cluster_tree_with, estimate_eps0, Solver};
use epscluster::dataset::{load_csv, CsvOptions, Metric, PointSet, WeightedDataset};
use epscluster::graph::build_graph;
use epscluster::grid::{generate_grid, GridSpec};
use epscluster::partition::Chunk;
use epscluster::qubo::{
    build_msc_qubo, build_mwis_qubo, default_msc_lambda, reduce_qubo, DEFAULT_GAMMA,
};
use epscluster::tree::{ClusterTree, TreeParams};
use epscluster::validity::{score_labels, ScoreName};
use epscluster::Error;

#[derive(Parser)]
#[command(
    name = "epscluster",
    version,
    about = "Hierarchical clustering by epsilon-separated coarsening"
)]
struct Cli {
    /// Worker threads (defaults to the available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a Gaussian grid dataset with a ground-truth label column.
    GenGrid(GenGridArgs),
    /// Build a cluster tree and write it as JSON.
    Run(RunArgs),
    /// Write the cluster label of every input point at one tree level.
    Labels(LabelsArgs),
    /// Print internal validity scores.
    Score(ScoreArgs),
    /// Write the QUBO of the whole input at one radius.
    ExportQubo(ExportArgs),
}

#[derive(Args)]
struct InputArgs {
    /// CSV of points, one row per point.
    input: PathBuf,
    /// Column holding point weights (requires a header row).
    #[arg(long)]
    weight_column: Option<String>,
    /// Column to ignore, e.g. a ground-truth label. May be repeated.
    #[arg(long = "exclude-column")]
    exclude_columns: Vec<String>,
    #[arg(long, value_enum, default_value_t = MetricArg::Euclidean)]
    metric: MetricArg,
}

impl InputArgs {
    fn load(&self) -> epscluster::Result<WeightedDataset> {
        let opts = CsvOptions {
            weight_column: self.weight_column.clone(),
            exclude_columns: self.exclude_columns.clone(),
            metric: self.metric.into(),
        };
        load_csv(&self.input, &opts)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Euclidean,
    Manhattan,
    Chebyshev,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Euclidean => Metric::Euclidean,
            MetricArg::Manhattan => Metric::Manhattan,
            MetricArg::Chebyshev => Metric::Chebyshev,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Greedy,
    Exact,
    Anneal,
}

impl From<SolverArg> for Solver {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Greedy => Solver::Greedy,
            SolverArg::Exact => Solver::Exact,
            SolverArg::Anneal => Solver::Anneal,
        }
    }
}

#[derive(Args)]
struct GenGridArgs {
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Cells per axis.
    #[arg(long, default_value_t = 10)]
    side: usize,
    #[arg(long, default_value_t = 100)]
    samples_per_cell: usize,
    /// Standard deviation of every coordinate around its cell mean.
    #[arg(long, default_value_t = 2.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV (standard output when omitted).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Radius of the first level; estimated from the data when omitted.
    #[arg(long)]
    eps0: Option<f64>,
    /// Fraction of points that should collapse in the first level when
    /// estimating eps0.
    #[arg(long, default_value_t = 0.1)]
    collapse_fraction: f64,
    #[arg(long, default_value_t = 1.3)]
    alpha: f64,
    /// Maximum chunk size.
    #[arg(long, default_value_t = 1000)]
    kappa: usize,
    #[arg(long, value_enum, default_value_t = SolverArg::Greedy)]
    solver: SolverArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = TreeParams::DEFAULT_MAX_LEVELS)]
    max_levels: usize,
    /// Keep representative coordinates instead of cell centroids.
    #[arg(long)]
    raw_representatives: bool,
    /// Penalty margin of the annealing QUBO.
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    #[arg(long, default_value_t = 2000)]
    sweeps: usize,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    /// Tree JSON output.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct LabelsArgs {
    /// Tree JSON written by `run`.
    tree: PathBuf,
    #[arg(
        long,
        conflicts_with = "clusters",
        required_unless_present = "clusters"
    )]
    level: Option<usize>,
    /// Pick the lowest level with exactly this many clusters.
    #[arg(long)]
    clusters: Option<usize>,
    /// Output CSV (standard output when omitted).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScoreArg {
    All,
    CalinskiHarabasz,
    DaviesBouldin,
}

impl ScoreArg {
    fn names(self) -> Vec<ScoreName> {
        match self {
            ScoreArg::All => ScoreName::ALL.to_vec(),
            ScoreArg::CalinskiHarabasz => vec![ScoreName::CalinskiHarabasz],
            ScoreArg::DaviesBouldin => vec![ScoreName::DaviesBouldin],
        }
    }
}

#[derive(Args)]
struct ScoreArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Labels CSV with columns point_id,label.
    #[arg(long, conflicts_with = "tree", required_unless_present = "tree")]
    labels: Option<PathBuf>,
    /// Score every level of this tree instead.
    #[arg(long)]
    tree: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ScoreArg::All)]
    score: ScoreArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum QuboKind {
    /// Maximum-weight epsilon-separated subset.
    Mwis,
    /// Minimum-cost epsilon-dense subset with unit costs.
    Cover,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    eps: f64,
    #[arg(long, value_enum, default_value_t = QuboKind::Mwis)]
    kind: QuboKind,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    /// Fix variables of isolated vertices before writing.
    #[arg(long)]
    reduce: bool,
    /// Output file (standard output when omitted).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

/// Failure classified by exit code.
enum Failure {
    Input(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io { .. } => Failure::Runtime(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

fn io_failure(path: &Path) -> impl Fn(io::Error) -> Failure + '_ {
    move |e| Failure::Runtime(format!("i/o error on {}: {e}", path.display()))
}

type CmdResult = Result<(), Failure>;

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    match path {
        Some(p) => Ok(Box::new(BufWriter::new(
            File::create(p).map_err(io_failure(p))?,
        ))),
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

fn stdout_failure(e: io::Error) -> Failure {
    Failure::Runtime(format!("cannot write output: {e}"))
}

fn gen_grid(args: &GenGridArgs) -> CmdResult {
    let spec = GridSpec {
        dim: args.dim,
        side: args.side,
        samples_per_cell: args.samples_per_cell,
        sigma: args.sigma,
        seed: args.seed,
    };
    let sample = generate_grid(&spec)?;
    match &args.out {
        Some(p) => sample.save_csv(p)?,
        None => sample.write_csv(io::stdout().lock())?,
    }
    Ok(())
}

fn run(args: &RunArgs) -> CmdResult {
    let ds = args.input.load()?;
    let eps0 = match args.eps0 {
        Some(e) => e,
        None => {
            let e = estimate_eps0(&ds, args.kappa, args.collapse_fraction, args.seed)?;
            println!("estimated eps0 {e}");
            e
        }
    };
    let params = TreeParams {
        solver: args.solver.into(),
        seed: args.seed,
        max_levels: args.max_levels,
        use_centroids: !args.raw_representatives,
        gamma: args.gamma,
        sweeps: args.sweeps,
        restarts: args.restarts,
        ..TreeParams::new(eps0, args.alpha, args.kappa)
    };
    println!("level,epsilon,nodes,seconds");
    let tree = build_cluster_tree_with(&ds, &params, |r| {
        println!(
            "{},{},{},{:.3}",
            r.level,
            r.epsilon,
            r.n_nodes,
            r.elapsed.as_secs_f64()
        );
    })?;
    tree.save(&args.out)?;
    let status = match tree.root_id() {
        Some(root) => format!("complete, root {root}"),
        None => format!("truncated after {} levels", args.max_levels),
    };
    println!(
        "{} points, {} leaves, {} levels, {status}",
        tree.n_points(),
        tree.level(0).len(),
        tree.n_levels()
    );
    Ok(())
}

fn labels(args: &LabelsArgs) -> CmdResult {
    let tree = ClusterTree::load(&args.tree)?;
    let level = match (args.level, args.clusters) {
        (Some(l), _) => l,
        (None, Some(k)) => (0..tree.n_levels())
            .find(|&l| tree.level(l).len() == k)
            .ok_or_else(|| {
                let sizes: Vec<String> =
                    tree.levels().iter().map(|l| l.len().to_string()).collect();
                Failure::Input(format!(
                    "no level has {k} clusters; level sizes are {}",
                    sizes.join(", ")
                ))
            })?,
        (None, None) => unreachable!("clap requires --level or --clusters"),
    };
    let assignment = tree.labels_at_level(level)?;
    let mut out = open_output(args.out.as_deref())?;
    let write = |out: &mut Box<dyn Write>| -> io::Result<()> {
        writeln!(out, "point_id,label")?;
        for (i, l) in assignment.labels.iter().enumerate() {
            writeln!(out, "{i},{l}")?;
        }
        out.flush()
    };
    write(&mut out).map_err(stdout_failure)
}

fn read_labels(path: &Path, n_points: usize) -> Result<Vec<String>, Failure> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    let mut labels: Vec<Option<String>> = vec![None; n_points];
    for (row, record) in reader.records().enumerate() {
        let bad = |m: String| Failure::Input(format!("{} row {}: {m}", path.display(), row + 2));
        let record = record.map_err(|e| bad(e.to_string()))?;
        if record.len() != 2 {
            return Err(bad(format!(
                "expected point_id,label but found {} fields",
                record.len()
            )));
        }
        let id: usize = record[0]
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad point id '{}'", &record[0])))?;
        let slot = labels
            .get_mut(id)
            .ok_or_else(|| bad(format!("point id {id} exceeds the {n_points} input points")))?;
        if slot.replace(record[1].trim().to_string()).is_some() {
            return Err(bad(format!("point id {id} labelled twice")));
        }
    }
    labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| l.ok_or_else(|| Failure::Input(format!("point {i} has no label"))))
        .collect()
}

fn score(args: &ScoreArgs) -> CmdResult {
    let ds = args.input.load()?;
    let names = args.score.names();
    let mut out = io::stdout().lock();
    if let Some(path) = &args.labels {
        let labels = read_labels(path, ds.len())?;
        for &name in &names {
            let report = score_labels(&ds, &labels, name)?;
            writeln!(out, "{report}").map_err(stdout_failure)?;
        }
        return Ok(());
    }
    let path = args
        .tree
        .as_ref()
        .expect("clap requires --labels or --tree");
    let tree = ClusterTree::load(path)?;
    if tree.metadata().dataset_hash != ds.content_hash() {
        return Err(Failure::Input(format!(
            "{} was built from a different dataset than {}",
            path.display(),
            args.input.input.display()
        )));
    }
    writeln!(out, "level,score_name,value,n_clusters").map_err(stdout_failure)?;
    for level in 0..tree.n_levels() {
        let labels = tree.labels_at_level(level)?.labels;
        for &name in &names {
            // Levels where a score is undefined are skipped.
            if let Ok(r) = score_labels(&ds, &labels, name) {
                writeln!(out, "{level},{},{},{}", r.score_name, r.value, r.n_clusters)
                    .map_err(stdout_failure)?;
            }
        }
    }
    Ok(())
}

fn export_qubo(args: &ExportArgs) -> CmdResult {
    let ds = epscluster::dataset::dedupe(&args.input.load()?);
    let chunk = Chunk::new((0..ds.len()).collect());
    let g = build_graph(&ds, &chunk, args.eps)?;
    let mut qubo = match args.kind {
        QuboKind::Mwis => build_mwis_qubo(&g, args.gamma)?,
        QuboKind::Cover => {
            let costs = vec![1.0; g.n()];
            build_msc_qubo(&g, &costs, default_msc_lambda(&costs))?
        }
    };
    if args.reduce {
        qubo = reduce_qubo(&qubo);
    }
    let mut out = open_output(args.out.as_deref())?;
    out.write_all(qubo.to_text().as_bytes())
        .and_then(|_| out.flush())
        .map_err(stdout_failure)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match &cli.command {
        Command::GenGrid(a) => gen_grid(a),
        Command::Run(a) => run(a),
        Command::Labels(a) => labels(a),
        Command::Score(a) => score(a),
        Command::ExportQubo(a) => export_qubo(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn io_errors_are_runtime_failures() {
        let e = Error::Io {
            path: "x".into(),
            source: io::Error::other("boom"),
        };
        assert!(matches!(Failure::from(e), Failure::Runtime(_)));
        assert!(matches!(
            Failure::from(Error::EmptyInput),
            Failure::Input(_)
        ));
    }

    #[test]
    fn duplicate_label_rows_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.csv");
        std::fs::write(&p, "point_id,label\n0,a\n0,b\n").unwrap();
        assert!(matches!(read_labels(&p, 2), Err(Failure::Input(_))));
        std::fs::write(&p, "point_id,label\n0,a\n").unwrap();
        assert!(matches!(read_labels(&p, 2), Err(Failure::Input(_))));
        std::fs::write(&p, "point_id,label\n1,a\n0,b\n").unwrap();
        assert_eq!(read_labels(&p, 2).ok().unwrap(), vec!["b", "a"]);
    }
}
