//! `bgc`: runs, figure data, the adversary grid and the descent demo.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bgc_core::adversary::AttackKind;
use bgc_core::harness::figures::{fig2, fig3, fig4, fig4_simulated, fig5, write_rows};
use bgc_core::harness::grid::enumerate;
use bgc_core::harness::{
    execute, run_cases, run_demo_gd, run_direct_gd, write_csv, DemoTrainingConfig, GridCase,
    GridReport, GridSpec, RunConfig,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "bgc",
    version,
    about = "Byzantine-resilient gradient coding simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scheme and emit one CSV row per seed.
    Run(RunArgs),
    /// Regenerate figure data as CSV.
    Figure(FigureArgs),
    /// Sweep malicious placements and strategies, checking every invariant.
    Proptest(ProptestArgs),
    /// Quantized least-squares descent through the scheme.
    DemoGd(DemoArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON file with RunConfig fields; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Total workers; must equal m(s+u) when given.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    u: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    alphabet_log2: Option<u32>,
    /// none | symmetrization | align_and_stall | random | adaptive_custom
    #[arg(long)]
    attack: Option<AttackKind>,
    #[arg(long)]
    seed: Option<u64>,
    /// Consecutive seeds starting at --seed.
    #[arg(long)]
    repetitions: Option<u64>,
    /// Comma-separated 0-based worker indices.
    #[arg(long, value_delimiter = ',')]
    malicious: Option<Vec<usize>>,
    /// Comma-separated 0-based worker indices that never answer.
    #[arg(long, value_delimiter = ',')]
    stragglers: Option<Vec<usize>>,
    /// Symmetrization: collapse onto one sample (true) or not (false).
    #[arg(long)]
    collapse: Option<bool>,
    /// Symmetrization: honest workers play this block (1-based).
    #[arg(long)]
    honest_block: Option<usize>,
    /// Align-and-stall: local computations to concede.
    #[arg(long)]
    forced_local_comps: Option<usize>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON-lines transcript; suffixed with the seed when repeating.
    #[arg(long)]
    transcript: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Figure {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    All,
}

#[derive(Args)]
struct FigureArgs {
    which: Figure,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Dimension of the simulated fig4 point.
    #[arg(long, default_value_t = 1000)]
    sim_d: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ProptestArgs {
    #[arg(long, default_value_t = 12)]
    n_max: usize,
    #[arg(long, default_value_t = 5)]
    s_max: usize,
    #[arg(long, default_value_t = 3)]
    u_max: usize,
    #[arg(long, default_value_t = 3)]
    m_max: usize,
    /// Seeds per configuration and placement.
    #[arg(long, default_value_t = 1)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    base_seed: u64,
    /// Every placement is tried up to this many workers.
    #[arg(long, default_value_t = 6)]
    exhaustive_up_to: usize,
    /// Random placements per configuration above that.
    #[arg(long, default_value_t = 3)]
    sampled_placements: usize,
    /// Also sweep up to u - 1 stragglers.
    #[arg(long)]
    stragglers: bool,
    /// Where counterexample transcripts go.
    #[arg(long, default_value = "proptest-failures")]
    dump: PathBuf,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long, default_value_t = 8)]
    d: usize,
    #[arg(long, default_value_t = 16)]
    p: usize,
    #[arg(long, default_value_t = 20)]
    iterations: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    alphabet_log2: u32,
    #[arg(long, default_value_t = 16)]
    frac_bits: u32,
    #[arg(long, default_value_t = 2)]
    s: usize,
    #[arg(long, default_value_t = 1)]
    u: usize,
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long, default_value = "symmetrization")]
    attack: AttackKind,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Exit 2: the request itself is unusable.
struct ConfigError(String);

impl<E: std::fmt::Display> From<E> for ConfigError {
    fn from(e: E) -> Self {
        ConfigError(e.to_string())
    }
}

const VIOLATION: u8 = 1;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Figure(a) => cmd_figure(a),
        Command::Proptest(a) => cmd_proptest(a),
        Command::DemoGd(a) => cmd_demo(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(ConfigError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run_config(a: &RunArgs) -> Result<RunConfig, ConfigError> {
    let mut rc = match &a.config {
        Some(path) => RunConfig::from_json_file(path)?,
        None => RunConfig::default(),
    };
    macro_rules! over {
        ($($field:ident),*) => { $(if let Some(v) = a.$field.clone() { rc.$field = v; })* };
    }
    over!(
        s,
        u,
        m,
        p,
        d,
        alphabet_log2,
        attack,
        seed,
        repetitions,
        stragglers
    );
    if a.n.is_some() {
        rc.n = a.n;
    }
    if a.malicious.is_some() {
        rc.malicious = a.malicious.clone();
    }
    if a.collapse.is_some() {
        rc.params.collapse = a.collapse;
    }
    if a.honest_block.is_some() {
        rc.params.honest_block = a.honest_block;
    }
    if let Some(f) = a.forced_local_comps {
        rc.params.forced_local_comps = f;
    }
    if a.out.is_some() {
        rc.out = a.out.clone();
    }
    if a.transcript.is_some() {
        rc.transcript = a.transcript.clone();
    }
    Ok(rc)
}

fn transcript_path(base: &Path, seed: u64, repeated: bool) -> PathBuf {
    if !repeated {
        return base.to_path_buf();
    }
    let stem = base
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match base.extension() {
        Some(ext) => format!("{stem}.seed{seed}.{}", ext.to_string_lossy()),
        None => format!("{stem}.seed{seed}"),
    };
    base.with_file_name(name)
}

fn cmd_run(a: RunArgs) -> Result<u8, ConfigError> {
    let rc = run_config(&a)?;
    // Validate every seed before running any of them.
    let mut jobs = Vec::new();
    for seed in rc.seeds() {
        let cfg = rc.system(seed)?;
        let attack = rc.attack_spec(&cfg, seed)?;
        jobs.push((cfg, attack));
    }
    let repeated = jobs.len() > 1;
    let mut records = Vec::new();
    let mut code = 0;
    for (cfg, attack) in &jobs {
        let run = match execute(cfg, attack) {
            Ok(run) => run,
            Err(e @ bgc_core::Error::Protocol(_)) => {
                eprintln!("seed {}: {e}", attack.seed);
                code = VIOLATION;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        if let Some(base) = &rc.transcript {
            let path = transcript_path(base, attack.seed, repeated);
            let file = fs::File::create(&path)
                .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
            run.outcome
                .transcript
                .write_json_lines(io::BufWriter::new(file))?;
        }
        for v in &run.violations {
            eprintln!("seed {}: {v}", attack.seed);
        }
        if !run.violations.is_empty() || !run.correct() {
            code = VIOLATION;
        }
        records.push(run.record);
    }
    match &rc.out {
        Some(path) => {
            let file = fs::File::create(path)
                .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
            write_csv(&records, file)?;
        }
        None => write_csv(&records, io::stdout().lock())?,
    }
    Ok(code)
}

fn cmd_figure(a: FigureArgs) -> Result<u8, ConfigError> {
    fs::create_dir_all(&a.out_dir)
        .map_err(|e| ConfigError(format!("{}: {e}", a.out_dir.display())))?;
    let want = |f: Figure| {
        matches!(a.which, Figure::All)
            || std::mem::discriminant(&a.which) == std::mem::discriminant(&f)
    };
    let mut written = Vec::new();
    if want(Figure::Fig2) {
        written.push(a.out_dir.join("fig2.csv"));
        write_rows(&fig2(), written.last().unwrap())?;
    }
    if want(Figure::Fig3) {
        written.push(a.out_dir.join("fig3.csv"));
        write_rows(&fig3()?, written.last().unwrap())?;
    }
    if want(Figure::Fig4) {
        written.push(a.out_dir.join("fig4.csv"));
        write_rows(&fig4()?, written.last().unwrap())?;
        written.push(a.out_dir.join("fig4_simulated.csv"));
        write_rows(&[fig4_simulated(a.sim_d, a.seed)?], written.last().unwrap())?;
    }
    if want(Figure::Fig5) {
        written.push(a.out_dir.join("fig5.csv"));
        write_rows(&fig5()?, written.last().unwrap())?;
    }
    for path in written {
        println!("{}", path.display());
    }
    Ok(0)
}

fn summarize(label: &str, report: &GridReport) {
    let witnessed = report
        .results
        .iter()
        .filter(|r| r.witness.is_some())
        .count();
    let failed = report.failures().count();
    println!(
        "{label}: {} runs, {witnessed} witnessed, {failed} failed",
        report.runs()
    );
}

fn dump_failures(
    cases: &[GridCase],
    report: &GridReport,
    dir: &Path,
) -> Result<usize, ConfigError> {
    let mut count = 0;
    for (case, result) in cases.iter().zip(&report.results) {
        if result.passed() {
            continue;
        }
        if count == 0 {
            fs::create_dir_all(dir).map_err(|e| ConfigError(format!("{}: {e}", dir.display())))?;
        }
        let path = dir.join(format!("case-{}.jsonl", case.attack.seed));
        if let Ok(run) = execute(&case.cfg, &case.attack) {
            let file = fs::File::create(&path)
                .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
            run.outcome
                .transcript
                .write_json_lines(io::BufWriter::new(file))?;
        }
        let cfg = &case.cfg;
        let line = serde_json::json!({
            "n": cfg.n_workers, "s": cfg.n_malicious, "u": cfg.honest_per_group, "m": cfg.n_groups,
            "p": cfg.n_samples, "d": cfg.dim, "k": cfg.alphabet.size_log2(),
            "attack": case.attack.kind.name(), "seed": case.attack.seed,
            "result": result, "transcript": path,
        });
        eprintln!("{line}");
        count += 1;
    }
    Ok(count)
}

fn cmd_proptest(a: ProptestArgs) -> Result<u8, ConfigError> {
    let spec = GridSpec {
        n_max: a.n_max,
        s_max: a.s_max,
        u_max: a.u_max,
        m_max: a.m_max,
        seeds_per_case: a.trials,
        base_seed: a.base_seed,
        exhaustive_up_to: a.exhaustive_up_to,
        sampled_placements: a.sampled_placements,
        ..GridSpec::default()
    };
    let mut grids = vec![("grid", spec.clone())];
    if a.stragglers {
        grids.push((
            "stragglers",
            GridSpec {
                stragglers: true,
                ..spec
            },
        ));
    }
    let mut failed = 0;
    for (label, spec) in grids {
        let cases = enumerate(&spec);
        let report = run_cases(&cases);
        summarize(label, &report);
        failed += dump_failures(&cases, &report, &a.dump)?;
    }
    Ok(if failed > 0 { VIOLATION } else { 0 })
}

fn cmd_demo(a: DemoArgs) -> Result<u8, ConfigError> {
    let cfg = DemoTrainingConfig {
        d: a.d,
        p: a.p,
        iterations: a.iterations,
        learning_rate: a.lr,
        k: a.alphabet_log2,
        frac_bits: a.frac_bits,
        s: a.s,
        u: a.u,
        m: a.m,
        attack: a.attack,
        seed: a.seed,
    };
    let scheme = run_demo_gd(&cfg)?;
    let direct = run_direct_gd(&cfg)?;
    let out: Box<dyn Write> = match &a.out {
        Some(path) => Box::new(
            fs::File::create(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?,
        ),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "iteration",
        "loss",
        "direct_loss",
        "local_computations",
        "bit_identical",
        "theta",
    ])?;
    for (t, theta) in scheme.thetas.iter().enumerate() {
        let same = direct
            .thetas
            .get(t)
            .is_some_and(|o| o.iter().zip(theta).all(|(x, y)| x.to_bits() == y.to_bits()));
        let c = scheme
            .local_computations
            .get(t)
            .map(|c| c.to_string())
            .unwrap_or_default();
        let theta: Vec<String> = theta.iter().map(|x| x.to_string()).collect();
        w.write_record([
            t.to_string(),
            scheme.losses[t].to_string(),
            direct.losses[t].to_string(),
            c,
            u8::from(same).to_string(),
            theta.join(";"),
        ])?;
    }
    w.flush()?;
    if scheme.bit_identical(&direct) {
        Ok(0)
    } else {
        eprintln!("scheme trajectory differs from direct summation");
        Ok(VIOLATION)
    }
}
