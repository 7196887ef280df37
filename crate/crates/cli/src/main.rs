use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use pragsynth::eval::{self, EvalConfig, Trial};
use pragsynth::neural::{self, ListenerNet, TrainConfig};
use pragsynth::search::SearchConfig;
use pragsynth::speaker::SpeakerKind;
use pragsynth::{Listener, ListenerKind, MatchRule, Nonterminal, ProgramSpace, Spec, Utterance};
use pragsynth_service::ServiceConfig;

#[derive(Parser)]
#[command(
    name = "pragsynth",
    version,
    about = "Pragmatic program synthesis for 7x7 grid layouts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate machine-speaker trials as JSON lines.
    GenSpecs {
        #[arg(long, default_value = "literal")]
        speaker: SpeakerKind,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = eval::DEFAULT_MAX_LEN)]
        max_len: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Accuracy-vs-utterances curves as CSV.
    Eval {
        /// Comma-separated listener ids.
        #[arg(long, default_value = "J0,J1,F0,F1", value_delimiter = ',')]
        listeners: Vec<ListenerKind>,
        /// Trial files as NAME=PATH; without any, machine trials are generated.
        #[arg(long = "trials")]
        trial_files: Vec<String>,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = eval::DEFAULT_MAX_LEN)]
        max_len: usize,
        #[arg(long = "match", default_value = "equivalent")]
        match_rule: MatchRule,
        #[arg(long, default_value_t = pragsynth::search::DEFAULT_BUDGET)]
        budget: usize,
        /// Network checkpoint for N0/N1.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Joint vs factored marginals for one utterance sequence, as JSON.
    Marginals {
        /// JSON file holding either an array of utterances or a trial record.
        #[arg(long)]
        spec: PathBuf,
        /// Factor pair compared against the product of its marginals.
        #[arg(long, default_value = "Left,Right", value_delimiter = ',')]
        pair: Vec<Nonterminal>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Train the neural literal listener.
    Train {
        #[arg(long, default_value_t = 20_000)]
        steps: usize,
        /// Use the full 150,000-step schedule.
        #[arg(long)]
        full: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "256,256", value_delimiter = ',')]
        hidden: Vec<usize>,
        #[arg(long, default_value_t = 1e-2)]
        lr: f64,
        /// Held-out specs for the final cross-entropy report.
        #[arg(long, default_value_t = 500)]
        held_out: usize,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Run the reference-game HTTP server.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Network checkpoint enabling N0/N1 games.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Append-only session journal, replayed on startup.
        #[arg(long)]
        journal: Option<PathBuf>,
        /// Minutes of inactivity before a session is dropped.
        #[arg(long, default_value_t = 30)]
        idle_minutes: u64,
        #[arg(long, default_value_t = pragsynth::search::DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Enumerate the program space.
    Enumerate {
        /// Print counts only.
        #[arg(long)]
        stats: bool,
    },
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load_model(path: &Option<PathBuf>) -> Result<Option<ListenerNet>> {
    path.as_ref()
        .map(|p| ListenerNet::load(p).with_context(|| format!("loading {}", p.display())))
        .transpose()
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let space = ProgramSpace::dsl();
    match cli.command {
        Command::GenSpecs {
            speaker,
            n,
            max_len,
            seed,
            out,
        } => {
            let trials = eval::generate_trials(space, speaker, n, max_len, seed);
            eval::write_trials(output(&out)?, &trials)?;
        }
        Command::Eval {
            listeners,
            trial_files,
            n,
            seed,
            max_len,
            match_rule,
            budget,
            model,
            out,
        } => {
            if budget == 0 {
                bail!("--budget must be positive");
            }
            let net = load_model(&model)?;
            let listeners = listeners
                .into_iter()
                .map(|k| Listener::new(k, space, net.as_ref()))
                .collect::<pragsynth::Result<Vec<_>>>()?;
            let sets: Vec<(String, Vec<Trial>)> = if trial_files.is_empty() {
                vec![
                    (
                        "S_M0".into(),
                        eval::generate_trials(space, SpeakerKind::Literal, n, max_len, seed),
                    ),
                    (
                        "S_M1".into(),
                        eval::generate_trials(space, SpeakerKind::Pragmatic, n, max_len, seed),
                    ),
                ]
            } else {
                trial_files
                    .iter()
                    .map(|arg| {
                        let (name, path) = arg.split_once('=').unwrap_or((arg.as_str(), arg.as_str()));
                        let file = File::open(path).with_context(|| format!("opening {path}"))?;
                        let trials =
                            eval::read_trials(BufReader::new(file)).with_context(|| format!("reading {path}"))?;
                        Ok((name.to_string(), trials))
                    })
                    .collect::<Result<_>>()?
            };
            let cfg = EvalConfig {
                max_len,
                match_rule,
                search: SearchConfig::new(budget),
            };
            let start = Instant::now();
            let points = eval::run_matrix(&listeners, &sets, &cfg);
            eprintln!("evaluated in {:.1}s", start.elapsed().as_secs_f64());
            eval::write_curve_csv(output(&out)?, &points)?;
        }
        Command::Marginals { spec, pair, out } => {
            let text = std::fs::read_to_string(&spec).with_context(|| format!("reading {}", spec.display()))?;
            let (utterances, target) = match serde_json::from_str::<Vec<Utterance>>(&text) {
                Ok(u) => (u, None),
                Err(_) => {
                    let t = eval::read_trials(text.trim().as_bytes())?
                        .pop()
                        .context("spec file holds neither utterances nor a trial")?;
                    (t.utterances.as_slice().to_vec(), space.program_index(&t.target))
                }
            };
            let spec = Spec::dedup_first(utterances);
            let [a, b] = pair[..] else {
                bail!("--pair takes exactly two nonterminals")
            };
            let report = eval::marginal_report(space, &spec.ids(), a.index(), b.index(), target)?;
            let mut w = output(&out)?;
            serde_json::to_writer_pretty(&mut w, &report)?;
            writeln!(w)?;
        }
        Command::Train {
            steps,
            full,
            seed,
            hidden,
            lr,
            held_out,
            out,
        } => {
            let [h1, h2] = hidden[..] else {
                bail!("--hidden takes two sizes")
            };
            let base = if full {
                TrainConfig::full_scale()
            } else {
                TrainConfig {
                    steps,
                    ..Default::default()
                }
            };
            let cfg = TrainConfig {
                seed,
                hidden: [h1, h2],
                learning_rate: lr,
                ..base
            };
            let start = Instant::now();
            let mut running = 0.0;
            let net = neural::train_with(space, &cfg, |step, loss| {
                running += loss / cfg.batch_size as f64;
                if (step + 1) % 1000 == 0 {
                    eprintln!(
                        "step {:>7}  loss {:.4}  ({:.0}s)",
                        step + 1,
                        running / 1000.0,
                        start.elapsed().as_secs_f64()
                    );
                    running = 0.0;
                }
            })?;
            net.save(&out)?;
            let examples = neural::held_out_examples(space, &cfg, held_out, seed.wrapping_add(7));
            let model = neural::factor_cross_entropy(&examples, |s| net.predict(s));
            let uniform = pragsynth::FactoredDistribution::uniform(space.arities());
            let base = neural::factor_cross_entropy(&examples, |_| uniform.clone());
            println!("factor,model_ce,uniform_ce");
            for (i, name) in space.factor_names().iter().enumerate() {
                println!("{name},{:.6},{:.6}", model[i], base[i]);
            }
        }
        Command::Serve {
            addr,
            model,
            journal,
            idle_minutes,
            budget,
        } => {
            if budget == 0 {
                bail!("--budget must be positive");
            }
            let config = ServiceConfig {
                model: load_model(&model)?.map(Arc::new),
                journal,
                idle_timeout: Duration::from_secs(idle_minutes * 60),
                search: SearchConfig::new(budget),
            };
            eprintln!("listening on http://{addr}");
            tokio::runtime::Runtime::new()?.block_on(pragsynth_service::serve(addr, config))?;
        }
        Command::Enumerate { stats } => {
            if stats {
                let singletons = {
                    let mut sizes = vec![0usize; space.num_classes()];
                    for h in 0..space.len() {
                        sizes[space.class_of(h) as usize] += 1;
                    }
                    sizes.iter().filter(|&&s| s == 1).count()
                };
                println!("candidates {}", pragsynth::dsl::candidate_count());
                println!("programs {}", space.len());
                println!("render_classes {}", space.num_classes());
                println!("singleton_classes {singletons}");
            } else {
                let mut w = output(&None)?;
                for h in 0..space.len() {
                    writeln!(w, "{}", serde_json::to_string(space.choices(h))?)?;
                }
            }
        }
    }
    Ok(())
}
