//! `xappctl`: operator entry point. Every subcommand prints one JSON
//! document on stdout. Exit status is 0 on success, 1 on a domain error and
//! 2 on a usage error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "xappctl", version, about = "Train, verify, explain, gate and serve the traffic-classifier xApp")]
pub struct Cli {
    /// Artifact store root.
    #[arg(long, global = true, env = "ARTIFACT_DIR", default_value = ".xapp-store")]
    pub store: PathBuf,
    /// Use a logical clock starting at 0 so that outputs replay byte for byte.
    #[arg(long, global = true)]
    pub fixed_ts: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the traffic simulator and write a labeled CSV.
    Simulate(SimulateArgs),
    /// Train the classifier and store the model document.
    Train(TrainArgs),
    /// Certified logit bands and the separation statistic on a test CSV.
    Verify(VerifyArgs),
    /// Global feature ranking by mean absolute Shapley value.
    Explain(ExplainArgs),
    /// Pipeline registry and deployment protocol.
    #[command(subcommand)]
    Plane(PlaneCommand),
    /// MLOps run and publish gate.
    #[command(subcommand)]
    Pipeline(PipelineCommand),
    /// Classify one feature vector with a published xApp.
    Infer(InferArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario JSON. Without it the pooled 10/20/30-UE grid under all four policies is run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Steps per scenario for the pooled grid.
    #[arg(long, default_value_t = 100, conflicts_with = "config")]
    pub steps: u64,
    #[arg(long, default_value_t = 1, conflicts_with = "config")]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Training JSON; defaults apply to omitted fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// `artifact://…` URI or a model document path.
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    /// `crown` or `ibp`.
    #[arg(long, default_value = "crown")]
    pub method: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub data: PathBuf,
    /// Rows to draw the background from; defaults to `--data`.
    #[arg(long)]
    pub background: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub background_size: usize,
    /// 0 selects exact enumeration (at most 12 features).
    #[arg(long, default_value_t = 200)]
    pub permutations: usize,
    #[arg(long, default_value_t = 200)]
    pub max_samples: usize,
    #[arg(long, default_value_t = 17)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum PlaneCommand {
    /// Register a pipeline manifest.
    Register {
        #[arg(long)]
        manifest: PathBuf,
        /// Pool JSON used when the plane state is created.
        #[arg(long)]
        pool: Option<PathBuf>,
    },
    /// Deploy a registered pipeline.
    Deploy {
        /// Pipeline id, or a manifest file to register first.
        #[arg(long)]
        manifest: String,
        #[arg(long)]
        pool: Option<PathBuf>,
    },
    /// Show one deployment, or the whole plane.
    Status {
        #[arg(long)]
        deployment: Option<String>,
    },
    /// Release a deployment's reservation.
    Release {
        #[arg(long)]
        deployment: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum PipelineCommand {
    Run(PipelineRunArgs),
}

#[derive(Debug, Args)]
pub struct PipelineRunArgs {
    /// Registered pipeline id, or a manifest file.
    #[arg(long, default_value = commands::DEFAULT_MANIFEST)]
    pub manifest: String,
    #[arg(long)]
    pub criteria: Option<PathBuf>,
    /// Dataset CSV; without it the pooled scenario grid is simulated.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub train_config: Option<PathBuf>,
    #[arg(long, default_value_t = 100, conflicts_with = "data")]
    pub steps: u64,
    #[arg(long, default_value_t = 1, conflicts_with = "data")]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub permutations: usize,
    /// Skip the attribution ranking; the gate then needs an operator answer
    /// when the criteria require an explanation report.
    #[arg(long)]
    pub no_explain: bool,
    /// Approve a pending decision without prompting.
    #[arg(long)]
    pub auto_approve: bool,
    #[arg(long, default_value = "operator")]
    pub operator_id: String,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    /// `<manifest>@<version>`, or a manifest id for its latest version.
    #[arg(long)]
    pub xapp: String,
    /// JSON array of 25 raw features, or an object with a `features` array.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub explain: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            if e.use_stderr() {
                let doc = serde_json::json!({ "error": e.kind().to_string(), "kind": "usage", "detail": e.to_string() });
                println!("{}", serde_json::to_string_pretty(&doc).expect("json value serializes"));
            }
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match commands::run(&cli) {
        Ok(doc) => {
            println!("{}", serde_json::to_string_pretty(&doc).expect("json value serializes"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            let doc = serde_json::json!({ "error": e.to_string(), "kind": e.kind() });
            println!("{}", serde_json::to_string_pretty(&doc).expect("json value serializes"));
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
