use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use nalgebra::DMatrix;

use sargraph::config::{parse_mask_file, RunConfigFile};
use sargraph::gibbs::{
    posterior_summary, run_gibbs, select_edges, selection_toml, summary_csv, Chain,
};
use sargraph::graph::build_chain_graph;
use sargraph::lattice::{build_weights, Layout, WeightPair};
use sargraph::metrics::{f1_of_selection, frobenius, metrics_csv_row, rmse};
use sargraph::params::{apply_restriction, MaskEntry};
use sargraph::simulate::{
    data_from_csv, data_to_csv, gen_data, gen_effects, gen_network, gen_precision, NetworkKind,
    TruthFile,
};
use sargraph::study::{desk_preset, report_csv, run_cell, smoke_preset};
use sargraph::{Error, Result};

#[derive(Parser)]
#[command(
    name = "sargraph",
    version,
    about = "Bayesian spatial autoregressive graphical models on lattice data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a ground-truth model and lattice data set.
    Simulate {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Number of locations on the alternating-category strip.
        #[arg(long)]
        n: usize,
        /// Number of variables per location.
        #[arg(long)]
        p: usize,
        #[arg(long, default_value = "random")]
        network: String,
        #[arg(long, default_value_t = 0.2)]
        edge_prob: f64,
        /// Sampler/model configuration (controls restriction and prior).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Fit the model to data and write the chain plus summaries.
    Fit {
        /// Data file with header v1..vp.
        #[arg(long)]
        x: PathBuf,
        /// Layout file (id,category,neighbours). Either this or both weight
        /// matrices must be given.
        #[arg(long)]
        layout: Option<PathBuf>,
        /// Explicit weight matrix files (numeric CSV, no header).
        #[arg(long)]
        w21: Option<PathBuf>,
        #[arg(long)]
        w12: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Accept proposals whenever the posterior kernel increases
        /// (reproduces the literal textbook comparison rule).
        #[arg(long)]
        greedy_accept: bool,
    },
    /// Score a chain against a ground-truth file.
    Metrics {
        #[arg(long)]
        truth: PathBuf,
        /// Directory holding chain.csv and chain.meta.toml.
        #[arg(long)]
        chain_dir: PathBuf,
        /// Proceed even when the config hashes differ.
        #[arg(long)]
        force: bool,
        /// Include tight-prior restricted entries in the F1 universe.
        #[arg(long)]
        include_restricted: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export the estimated spatial chain graph.
    ExportGraph {
        #[arg(long)]
        chain_dir: PathBuf,
        /// Output format: dot | structured.
        #[arg(long, default_value = "dot")]
        format: String,
        /// Credible level for edge selection (defaults to the fit's level).
        #[arg(long)]
        level: Option<f64>,
        /// Category labels as `first,second`.
        #[arg(long, default_value = "c1,c2")]
        labels: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the simulation-study grid and aggregate a report table.
    ReplicateStudy {
        /// Grid preset: desk | smoke.
        #[arg(long, default_value = "desk")]
        preset: String,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Worker threads for fanning out replications.
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn main() {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error[{}]: {}", err.class(), err);
            std::process::exit(if err.is_usage() { 2 } else { 3 });
        }
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn load_config(path: &Option<PathBuf>) -> Result<(RunConfigFile, Option<Vec<MaskEntry>>)> {
    let Some(path) = path else {
        return Ok((RunConfigFile::default(), None));
    };
    let cfg = RunConfigFile::parse(&read_to_string(path)?)?;
    let mask = match &cfg.model.mask_file {
        Some(rel) => {
            let mask_path = path.parent().unwrap_or(Path::new(".")).join(rel);
            Some(parse_mask_file(&read_to_string(&mask_path)?)?)
        }
        None => None,
    };
    Ok((cfg, mask))
}

fn parse_matrix_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in line.split(',') {
            row.push(field.trim().parse().map_err(|_| {
                Error::Parse(format!("matrix line {}: bad float `{field}`", lineno + 1))
            })?);
        }
        rows.push(row);
    }
    if rows.is_empty() || rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(Error::Parse("matrix file must be rectangular and non-empty".into()));
    }
    let (r, c) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn load_chain(dir: &Path) -> Result<Chain> {
    Chain::read_files(&dir.join("chain.csv"), &dir.join("chain.meta.toml"))
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate { out_dir, seed, n, p, network, edge_prob, config } => {
            let kind: NetworkKind = network.parse()?;
            let (cfg, mask) = load_config(&config)?;
            let settings = cfg.to_settings(seed, false, mask)?;
            let layout = Layout::strip(n);
            let weights = build_weights(&layout)?;
            let mut rng = sargraph::dist::Rng::split(seed, 1000);
            let adj = gen_network(kind, p, edge_prob, &mut rng)?;
            let theta = gen_precision(&adj, &mut rng)?;
            let sparse = matches!(settings.prior, sargraph::spatial_mh::EffectPrior::NormalGamma { .. });
            let effects = gen_effects(
                settings.restriction.clone(),
                sparse,
                p,
                settings.tau,
                &weights,
                &mut rng,
            )?;
            let x = gen_data(&effects, &theta, &weights, n, &mut rng)?;
            std::fs::create_dir_all(&out_dir)?;
            std::fs::write(out_dir.join("x.csv"), data_to_csv(&x))?;
            std::fs::write(out_dir.join("layout.csv"), layout.to_csv())?;
            let truth = TruthFile::new(&effects, &theta, seed, &settings.config_hash());
            std::fs::write(out_dir.join("truth.toml"), truth.to_toml())?;
            println!(
                "wrote x.csv ({n} x {p}), layout.csv and truth.toml to {}",
                out_dir.display()
            );
            Ok(())
        }
        Command::Fit { x, layout, w21, w12, config, out_dir, seed, greedy_accept } => {
            let data = data_from_csv(&read_to_string(&x)?)?;
            let weights = match (layout, w21, w12) {
                (Some(layout_path), None, None) => {
                    let (layout, warnings) = Layout::parse_csv(&read_to_string(&layout_path)?)?;
                    for w in warnings {
                        eprintln!("warning: {w}");
                    }
                    build_weights(&layout)?
                }
                (None, Some(a), Some(b)) => WeightPair::new(
                    parse_matrix_csv(&read_to_string(&a)?)?,
                    parse_matrix_csv(&read_to_string(&b)?)?,
                )?,
                _ => {
                    return Err(Error::Config(
                        "provide either --layout or both --w21 and --w12".into(),
                    ))
                }
            };
            let (cfg, mask) = load_config(&config)?;
            let mut settings = cfg.to_settings(seed, greedy_accept, mask)?;
            settings.abort_dump = Some(out_dir.clone());
            let chain = run_gibbs(&data, &weights, &settings)?;
            std::fs::create_dir_all(&out_dir)?;
            chain.write_files(&out_dir)?;
            let summaries = posterior_summary(&chain)?;
            std::fs::write(out_dir.join("summary.csv"), summary_csv(&summaries))?;
            let selection = select_edges(&chain, settings.credible_level)?;
            std::fs::write(out_dir.join("selection.toml"), selection_toml(&selection))?;
            println!(
                "chain: {} draws, acceptance rate {:.3}, config hash {}",
                chain.len(),
                chain.acceptance.acceptance_rate(),
                chain.config_hash
            );
            Ok(())
        }
        Command::Metrics { truth, chain_dir, force, include_restricted, out } => {
            let truth = TruthFile::from_toml(&read_to_string(&truth)?)?;
            let chain = load_chain(&chain_dir)?;
            if truth.config_hash != chain.config_hash && !force {
                return Err(Error::Config(format!(
                    "config hash mismatch: truth {} vs chain {} (use --force to override)",
                    truth.config_hash, chain.config_hash
                )));
            }
            let (psi1_true, psi2_true, theta_true) = truth.matrices()?;
            let (psi1_hat, psi2_hat, theta_hat) = chain.posterior_mean_matrices();
            let fn_value = frobenius(&theta_true, &theta_hat)?;
            let rmse_value = rmse((&psi1_true, &psi2_true), (&psi1_hat, &psi2_hat))?;
            let selection = select_edges(&chain, chain.settings.credible_level)?;
            let p = chain.p;
            let effects_shape = apply_restriction(
                DMatrix::zeros(p, p),
                DMatrix::zeros(p, p),
                chain.settings.restriction.clone(),
                chain.settings.tau,
                chain.settings.mu_diag,
            )?;
            let universe = if include_restricted {
                [DMatrix::from_element(p, p, true), DMatrix::from_element(p, p, true)]
            } else {
                effects_shape.free_mask()
            };
            let f1_value = f1_of_selection(
                (&psi1_true, &psi2_true),
                &selection,
                [&universe[0], &universe[1]],
            )?;
            let row = metrics_csv_row(
                fn_value,
                rmse_value,
                Some(f1_value),
                chain.settings.seed,
                &chain.config_hash,
            );
            match out {
                Some(path) => std::fs::write(path, row)?,
                None => print!("{row}"),
            }
            Ok(())
        }
        Command::ExportGraph { chain_dir, format, level, labels, out } => {
            let chain = load_chain(&chain_dir)?;
            let level = level.unwrap_or(chain.settings.credible_level);
            let (psi1_hat, psi2_hat, theta_hat) = chain.posterior_mean_matrices();
            let selection = select_edges(&chain, level)?;
            let mut parts = labels.splitn(2, ',');
            let l1 = parts.next().unwrap_or("c1").to_string();
            let l2 = parts.next().unwrap_or("c2").to_string();
            let graph =
                build_chain_graph(&theta_hat, (&psi1_hat, &psi2_hat), &selection, [l1, l2])?;
            let text = match format.as_str() {
                "dot" => graph.to_dot(),
                "structured" => graph.to_structured(),
                other => return Err(Error::Config(format!("unknown format `{other}`"))),
            };
            match out {
                Some(path) => std::fs::write(path, text)?,
                None => print!("{text}"),
            }
            Ok(())
        }
        Command::ReplicateStudy { preset, out_dir, seed, threads } => {
            let cells = match preset.as_str() {
                "desk" => desk_preset(),
                "smoke" => smoke_preset(),
                other => return Err(Error::Config(format!("unknown preset `{other}`"))),
            };
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.unwrap_or(0))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            let mut summaries = Vec::new();
            for (scenario, seeds) in &cells {
                let summary = pool.install(|| run_cell(scenario, seed, *seeds))?;
                eprintln!(
                    "cell done: {:?} prior={:?} n={} -> mean rmse {:.4}",
                    scenario.network, scenario.prior, scenario.n, summary.mean_rmse
                );
                summaries.push(summary);
            }
            let report = report_csv(&summaries);
            std::fs::create_dir_all(&out_dir)?;
            std::fs::write(out_dir.join("report.csv"), &report)?;
            print!("{report}");
            Ok(())
        }
    }
}
