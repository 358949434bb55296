//! Command-line interface.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::ccgp::ccgp_table;
use crate::corpus::{generate_synthetic, load_corpus, write_corpus, Corpus, CorpusPaths, GeneratorSpec, Space};
use crate::embed::{herb_embedding, rgb_colors};
use crate::error::{Error, Result};
use crate::herbtree::{depth_sweep, TreeReport};
use crate::report::{
    abstraction_rows, embedding_rows, run_pipeline, variance_rows, write_manifold_svgs, write_table, OutputFormat,
    PipelineConfig,
};

#[derive(Debug, Parser)]
#[command(
    name = "patternscope",
    version,
    about = "Pattern geometry over symptom and herb spaces"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a corpus and print its dimensions.
    Validate(CorpusArgs),
    /// Generate a synthetic corpus with planted structure.
    Synth(SynthArgs),
    /// Per-axis variance of pattern scores.
    Variance {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Abstraction index with permutation p-values.
    Abstraction {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Restrict to one space; both spaces by default.
        #[arg(long, value_enum)]
        space: Option<SpaceArg>,
        #[arg(long, default_value_t = 10_000, value_parser = positive)]
        permutations: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Cross-condition generalization of a linear SVM.
    Ccgp {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, value_enum)]
        space: Option<SpaceArg>,
        #[arg(long, default_value_t = 1000, value_parser = positive)]
        iterations: usize,
        /// Provisions per subgroup; defaults to the smallest subgroup.
        #[arg(long, value_parser = positive)]
        sample_size: Option<usize>,
        #[arg(long = "C", default_value_t = 1.0, value_parser = positive_real)]
        c: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Multi-output regression trees from symptoms to herbs.
    Tree {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, value_delimiter = ',', default_value = "3,5,7,10,30", value_parser = positive)]
        depths: Vec<usize>,
        /// Append the three signed pattern scores as features.
        #[arg(long)]
        with_patterns: bool,
        #[arg(long, default_value_t = 2)]
        min_samples_split: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Classical MDS of herb vectors, RGB coding and manifold scatters.
    Mds {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run every analysis and write a manifest.
    Report {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, default_value_t = 1000, value_parser = positive)]
        iterations: usize,
        #[arg(long, default_value_t = 10_000, value_parser = positive)]
        permutations: usize,
        #[arg(long, value_parser = positive)]
        sample_size: Option<usize>,
        #[arg(long, value_delimiter = ',', default_value = "3,5,7,10,30", value_parser = positive)]
        depths: Vec<usize>,
        #[arg(long, default_value_t = 2)]
        min_samples_split: usize,
        #[arg(long = "C", default_value_t = 1.0, value_parser = positive_real)]
        c: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// JSON Lines file, one provision per line.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub symptom_vocab: PathBuf,
    #[arg(long)]
    pub herb_vocab: PathBuf,
    /// CSV with header `token,category`; identity grouping when absent.
    #[arg(long)]
    pub category_map: Option<PathBuf>,
}

impl CorpusArgs {
    fn load(&self) -> Result<Corpus> {
        load_corpus(&CorpusPaths {
            corpus: self.corpus.clone(),
            symptom_vocab: self.symptom_vocab.clone(),
            herb_vocab: self.herb_vocab.clone(),
            category_map: self.category_map.clone(),
        })
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

impl OutputArgs {
    fn dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.out).map_err(|e| Error::io(&self.out, e))?;
        Ok(&self.out)
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 242)]
    pub provisions: usize,
    #[arg(long, default_value_t = 702)]
    pub symptoms: usize,
    #[arg(long, default_value_t = 500)]
    pub categories: usize,
    #[arg(long, default_value_t = 170)]
    pub herbs: usize,
    /// Planting strength per axis (Ext-Int,Cold-Heat,Def-Exc) for both spaces.
    #[arg(long, value_delimiter = ',', default_value = "0,0,0")]
    pub beta: Vec<f64>,
    /// Overrides `--beta` for symptom columns.
    #[arg(long, value_delimiter = ',')]
    pub symptom_beta: Option<Vec<f64>>,
    /// Overrides `--beta` for herb columns.
    #[arg(long, value_delimiter = ',')]
    pub herb_beta: Option<Vec<f64>>,
    #[arg(long, default_value_t = 4)]
    pub planted_symptoms: usize,
    #[arg(long, default_value_t = 4)]
    pub planted_herbs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub base_rate: f64,
    #[arg(long, default_value_t = 0.1)]
    pub neutral_rate: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

impl SynthArgs {
    pub fn spec(&self) -> Result<GeneratorSpec> {
        let triple = |v: &[f64]| -> Result<[f64; 3]> {
            v.try_into()
                .map_err(|_| Error::InvalidParameter(format!("expected three planting values, got {}", v.len())))
        };
        let beta = triple(&self.beta)?;
        Ok(GeneratorSpec {
            n_provisions: self.provisions,
            n_symptoms: self.symptoms,
            n_categories: self.categories,
            n_herbs: self.herbs,
            symptom_planting: self.symptom_beta.as_deref().map(triple).transpose()?.unwrap_or(beta),
            herb_planting: self.herb_beta.as_deref().map(triple).transpose()?.unwrap_or(beta),
            planted_symptoms: self.planted_symptoms,
            planted_herbs: self.planted_herbs,
            base_rate: self.base_rate,
            neutral_rate: self.neutral_rate,
        })
    }
}

fn positive(s: &str) -> std::result::Result<usize, String> {
    match s.trim().parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(format!("expected a positive integer, got `{s}`")),
    }
}

fn positive_real(s: &str) -> std::result::Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got `{s}`")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpaceArg {
    Symptom,
    Herb,
}

impl SpaceArg {
    fn spaces(arg: Option<SpaceArg>) -> Vec<Space> {
        match arg {
            Some(SpaceArg::Symptom) => vec![Space::Symptom],
            Some(SpaceArg::Herb) => vec![Space::Herb],
            None => vec![Space::Symptom, Space::Herb],
        }
    }
}

/// What a command printed and wrote.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Outcome {
    pub summary: String,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    fn line(&mut self, text: impl AsRef<str>) {
        self.summary.push_str(text.as_ref());
        self.summary.push('\n');
    }
}

fn tree_summary(out: &mut Outcome, reports: &[TreeReport]) {
    for r in reports {
        let top: Vec<String> = r.top_features.iter().map(|(n, i)| format!("{n}={i:.3}")).collect();
        out.line(format!(
            "depth {:>3}  r2 {:.4}  features {:>4}  {}",
            r.depth,
            r.r2,
            r.n_features_used,
            top.join(" ")
        ));
    }
}

pub fn run(cli: Cli) -> Result<Outcome> {
    let mut out = Outcome::default();
    match cli.command {
        Command::Validate(args) => {
            let corpus = args.load()?;
            out.line(format!(
                "N={} S={} G={} H={}",
                corpus.len(),
                corpus.symptom_vocab().len(),
                corpus.dim(Space::Symptom),
                corpus.herb_vocab().len()
            ));
        }
        Command::Synth(args) => {
            let corpus = generate_synthetic(&args.spec()?, args.seed)?;
            let paths = write_corpus(&corpus, &args.out)?;
            out.line(format!("wrote {} provisions to {}", corpus.len(), args.out.display()));
            out.files.extend([paths.corpus, paths.symptom_vocab, paths.herb_vocab]);
            out.files.extend(paths.category_map);
        }
        Command::Variance { corpus, output } => {
            let rows = variance_rows(&corpus.load()?)?;
            for r in &rows {
                out.line(format!("{:<10} {:.4}", r.axis, r.variance));
            }
            out.files
                .push(write_table(&rows, output.dir()?, "variance", output.format)?);
        }
        Command::Abstraction {
            corpus,
            space,
            permutations,
            seed,
            output,
        } => {
            let corpus = corpus.load()?;
            for space in SpaceArg::spaces(space) {
                let rows = abstraction_rows(&corpus, space, permutations, seed)?;
                for r in &rows {
                    out.line(format!(
                        "{:<8} {:<10} index {:.4}  p {:.4}",
                        r.space, r.axis, r.index, r.p_value
                    ));
                }
                let stem = format!("abstraction_{}", space.name());
                out.files.push(write_table(&rows, output.dir()?, &stem, output.format)?);
            }
        }
        Command::Ccgp {
            corpus,
            space,
            iterations,
            sample_size,
            c,
            seed,
            output,
        } => {
            let corpus = corpus.load()?;
            let config = PipelineConfig {
                seed,
                iterations,
                sample_size,
                c,
                ..PipelineConfig::default()
            };
            for space in SpaceArg::spaces(space) {
                let table = ccgp_table(&corpus, space, &config.ccgp_params())?;
                let rows = table.rows();
                for r in &rows {
                    out.line(format!(
                        "{:<8} {:<22} -> {:<22} {:.3} ± {:.3}",
                        space.name(),
                        r.training_set,
                        r.test_set,
                        r.ccgp_mean,
                        r.ccgp_std
                    ));
                }
                let stem = format!("ccgp_{}", space.name());
                out.files.push(write_table(&rows, output.dir()?, &stem, output.format)?);
            }
        }
        Command::Tree {
            corpus,
            depths,
            with_patterns,
            min_samples_split,
            output,
        } => {
            let reports = depth_sweep(&corpus.load()?, &depths, with_patterns, min_samples_split)?;
            tree_summary(&mut out, &reports);
            let rows: Vec<_> = reports.iter().map(TreeReport::to_row).collect();
            let stem = if with_patterns { "tree_concat" } else { "tree_symptom" };
            out.files.push(write_table(&rows, output.dir()?, stem, output.format)?);
        }
        Command::Mds { corpus, output } => {
            let corpus = corpus.load()?;
            let embedding = herb_embedding(&corpus)?;
            let colors = rgb_colors(&embedding);
            out.line(format!(
                "eigenvalues {:.4} {:.4} {:.4}  stress {:.4}",
                embedding.eigenvalues[0], embedding.eigenvalues[1], embedding.eigenvalues[2], embedding.stress
            ));
            let dir = output.dir()?;
            let rows = embedding_rows(&corpus, &embedding, &colors);
            out.files.push(write_table(&rows, dir, "embedding", output.format)?);
            out.files.extend(write_manifold_svgs(&corpus, &colors, dir)?);
        }
        Command::Report {
            corpus,
            iterations,
            permutations,
            sample_size,
            depths,
            min_samples_split,
            c,
            seed,
            output,
        } => {
            let corpus = corpus.load()?;
            let config = PipelineConfig {
                seed,
                iterations,
                permutations,
                sample_size,
                depths,
                c,
                min_samples_split,
                format: output.format,
            };
            let report = run_pipeline(&corpus, &config, &output.out)?;
            for r in &report.variance {
                out.line(format!("variance {:<10} {:.4}", r.axis, r.variance));
            }
            for r in report.abstraction_symptom.iter().chain(&report.abstraction_herb) {
                out.line(format!(
                    "abstraction {:<8} {:<10} {:.4}  p {:.4}",
                    r.space, r.axis, r.index, r.p_value
                ));
            }
            tree_summary(&mut out, &report.tree_concat);
            out.files
                .extend(report.manifest.iter().map(|m| output.out.join(&m.file)));
            out.files.push(output.out.join("manifest.json"));
        }
    }
    Ok(out)
}

/// Parses `args`, runs the command and reports on stdout/stderr.
/// Exit codes: 0 success, 1 runtime error, 2 usage error.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(outcome) => {
            let mut text = outcome.summary;
            for f in &outcome.files {
                let _ = writeln!(text, "wrote {}", f.display());
            }
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
