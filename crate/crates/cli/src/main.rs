//! `splab`: dataset generation, training, evaluation and analysis tools.
//! Every command writes JSON or CSV to stdout unless `--out` is given.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use splab_core::hops::HopIndex;
use splab_core::io::{emit_jsonl, read_jsonl_file};
use splab_core::kernels::{sp_distinguish, sp_wl_distinguish, wiener_index, wl_distinguish};
use splab_core::logic::{compile, eval_bruteforce_all, parse_formula, run_compiled};
use splab_core::molecules::{generate_molecules, MoleculeSpec};
use splab_core::prox::{generate_dataset, ProxSpec};
use splab_core::{fixtures, Graph};
use splab_nn::experiment::{build_structures, evaluate, DatasetFormat, DatasetSource};
use splab_nn::squash::{decay_csv, decay_curve, DecaySettings};
use splab_nn::{report_alphas, run_experiment, Checkpoint, ExperimentConfig, ModelKind, PoolMode};

#[derive(Parser)]
#[command(name = "splab", version, about = "Shortest-path message passing lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an h-Proximity dataset as JSONL.
    GenProx {
        #[arg(long)]
        h: usize,
        #[arg(long, default_value_t = 4500)]
        pairs: usize,
        #[arg(long, env = "SPLAB_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a relational molecule-style regression dataset as JSONL.
    GenMolecules {
        #[arg(long, default_value_t = 2000)]
        graphs: usize,
        #[arg(long, env = "SPLAB_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the split x repeat training grid and print the aggregated report.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "jsonl")]
        format: FormatArg,
    },
    /// Compare graphs 2i and 2i+1 of a JSONL file with WL, SP and SP-WL.
    KernelCheck {
        /// Omit to check the built-in fixture pairs.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        k: usize,
    },
    /// Compile a formula and evaluate it on every node of every graph.
    Logic {
        #[arg(long)]
        formula: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
    /// Jacobian decay on the layered graph as CSV.
    Squash {
        #[arg(long, default_value_t = 11)]
        l: usize,
        #[arg(long, default_value_t = 5)]
        w: usize,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 8)]
        dim: usize,
        #[arg(long, env = "SPLAB_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Softmaxed hop weights per layer of a checkpoint.
    Alphas {
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum FormatArg {
    Jsonl,
    Tu,
}

impl From<FormatArg> for DatasetFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Jsonl => DatasetFormat::Jsonl,
            FormatArg::Tu => DatasetFormat::Tu,
        }
    }
}

/// Flags override values from `--config`.
#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long)]
    model: Option<ModelKind>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long, value_parser = parse_pooling)]
    pooling: Option<PoolMode>,
    #[arg(long, env = "SPLAB_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    splits: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// Desk-scale preset (50 epochs, 3 splits x 2 repeats) as the base.
    #[arg(long)]
    desk: bool,
    #[arg(long)]
    ledger: Option<PathBuf>,
    #[arg(long)]
    report_dir: Option<PathBuf>,
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
}

fn parse_pooling(s: &str) -> Result<PoolMode, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown pooling `{s}`"))
}

impl TrainArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                ExperimentConfig::from_json(&text)?
            }
            None => {
                let Some(model) = self.model else {
                    bail!("either --config or --model is required");
                };
                let k = self.k.unwrap_or(1);
                let layers = self.layers.unwrap_or(2);
                if self.desk {
                    ExperimentConfig::desk(model, k, layers)
                } else {
                    ExperimentConfig::new(model, k, layers)
                }
            }
        };
        macro_rules! set {
            ($($field:ident),*) => {$(if let Some(v) = self.$field.clone() { cfg.$field = v; })*};
        }
        set!(model, k, layers, dim, lr, batch_size, epochs, dropout, pooling, seed, splits, repeats, workers);
        if let Some(path) = &self.data {
            cfg.dataset = Some(DatasetSource {
                path: path.clone(),
                format: self.format.unwrap_or(FormatArg::Jsonl).into(),
            });
        }
        for (dst, src) in [
            (&mut cfg.ledger, &self.ledger),
            (&mut cfg.report_dir, &self.report_dir),
            (&mut cfg.checkpoint_dir, &self.checkpoint_dir),
        ] {
            if src.is_some() {
                dst.clone_from(src);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_out(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => std::io::stdout().write_all(bytes).context("writing stdout"),
    }
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn pair_report(name: &str, a: &Graph, b: &Graph, k: usize) -> serde_json::Value {
    json!({
        "pair": name,
        "wl": wl_distinguish(a, b),
        "sp": sp_distinguish(a, b),
        "sp_wl": sp_wl_distinguish(a, b, k),
        "wiener": [wiener_index(a), wiener_index(b)],
    })
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::GenProx { h, pairs, seed, out } => {
            let dataset = generate_dataset(&ProxSpec::new(h, pairs, seed))?;
            let mut buf = Vec::new();
            emit_jsonl(&dataset, &mut buf)?;
            write_out(out.as_deref(), &buf)
        }
        Command::GenMolecules { graphs, seed, out } => {
            let dataset = generate_molecules(&MoleculeSpec::new(graphs, seed));
            let mut buf = Vec::new();
            emit_jsonl(&dataset, &mut buf)?;
            write_out(out.as_deref(), &buf)
        }
        Command::Train(args) => {
            let cfg = args.resolve()?;
            let report = run_experiment(&cfg)?;
            print_json(&json!({
                "config_hash": report.config_hash,
                "model": report.model,
                "metric": report.metric,
                "per_split": report.per_split,
                "mean": report.mean,
                "std": report.std,
                "runs": report.runs.iter().map(|r| json!({
                    "split": r.split,
                    "repeat": r.repeat,
                    "best_epoch": r.best_epoch,
                    "test_metric": r.test_metric,
                    "wall_seconds": r.wall_seconds,
                })).collect::<Vec<_>>(),
            }))
        }
        Command::Eval { checkpoint, data, format } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let model = ck.to_model()?;
            let dataset = DatasetSource {
                path: data,
                format: format.into(),
            }
            .load()?;
            let structures = build_structures(&dataset, &model.config);
            let ids: Vec<usize> = (0..dataset.len()).collect();
            let e = evaluate(&model, &structures, &ids, dataset.task);
            let metric = if dataset.task.is_classification() { "accuracy" } else { "mae" };
            print_json(&json!({"graphs": e.count, "loss": e.loss, "metric": metric, "value": e.metric}))
        }
        Command::KernelCheck { data, k } => {
            let rows: Vec<serde_json::Value> = match data {
                None => fixtures::all_pairs()
                    .iter()
                    .map(|(name, a, b)| pair_report(name, a, b, k))
                    .collect(),
                Some(path) => {
                    let ds = read_jsonl_file(&path)?;
                    if ds.len() % 2 != 0 {
                        bail!("{} holds an odd number of graphs", path.display());
                    }
                    ds.graphs
                        .chunks(2)
                        .enumerate()
                        .map(|(i, p)| pair_report(&i.to_string(), &p[0], &p[1], k))
                        .collect()
                }
            };
            print_json(&serde_json::Value::Array(rows))
        }
        Command::Logic { formula, data, k } => {
            let ast = parse_formula(&formula).map_err(|e| anyhow::anyhow!("formula {e}"))?;
            let compiled = compile(&ast, k)?;
            let ds = read_jsonl_file(&data)?;
            let mut rows = Vec::new();
            let mut mismatches = 0;
            for (g, graph) in ds.graphs.iter().enumerate() {
                let net = run_compiled(&compiled, graph, &HopIndex::build(graph, k));
                let oracle = eval_bruteforce_all(&ast, graph);
                mismatches += net.iter().zip(&oracle).filter(|(a, b)| a != b).count();
                rows.push(json!({"graph": g, "network": net, "oracle": oracle}));
            }
            print_json(&json!({
                "formula": formula,
                "dim": compiled.dim,
                "layers": compiled.layers,
                "mismatches": mismatches,
                "graphs": rows,
            }))
        }
        Command::Squash { l, w, k, dim, seed, out } => {
            let rows = decay_curve(&DecaySettings {
                l,
                w,
                k,
                dim,
                seed,
                beta: 1.0,
            });
            write_out(out.as_deref(), decay_csv(&rows).as_bytes())
        }
        Command::Alphas { checkpoint } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let alphas = report_alphas(&ck)?;
            print_json(&json!({"layers": alphas}))
        }
    }
}
