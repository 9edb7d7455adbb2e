use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand};

use gest_core::executor::{execute, write_trace};
use gest_core::procedural::{generate, GenConfig};
use gest_core::replay::{parse_scenario, replay};
use gest_core::schedule::{build_constraints, solve, Schedule};
use gest_core::validate::validate;
use gest_core::{server, CapabilityRegistry, GestGraph};

const EXIT_OTHER: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

#[derive(Parser)]
#[command(name = "gest", version, about = "Build, check, schedule and execute event graphs")]
struct Cli {
    /// Capability registry JSON; the bundled sample when unset.
    #[arg(long, global = true, env = "GEST_REGISTRY")]
    registry: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP tool server.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Seconds before an idle session is dropped.
        #[arg(long, default_value_t = server::DEFAULT_IDLE_TIMEOUT.as_secs())]
        idle_timeout: u64,
    },
    /// Check a .gest.json file and print the report.
    Validate { file: PathBuf },
    /// Solve the temporal constraints and print the schedule.
    Schedule {
        file: PathBuf,
        #[arg(long, default_value_t = 1)]
        fps: u32,
        /// Write the schedule here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate, schedule and symbolically execute; writes trace files.
    Execute {
        file: PathBuf,
        #[arg(long, default_value_t = 1)]
        fps: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a story with the procedural agent.
    Generate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        actors: u32,
        #[arg(long, default_value_t = 2)]
        scenes: u32,
        #[arg(long, default_value_t = 2)]
        rounds: u32,
        /// Write the graph here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay a tool-call scenario and check each expected outcome.
    Replay {
        scenario: PathBuf,
        /// Directory for transcript.jsonl and final.gest.json; the
        /// transcript goes to stdout when unset.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| fail(EXIT_OTHER, format!("{}: {e}", path.display()))
}

fn load_registry(path: Option<&Path>) -> Result<CapabilityRegistry, Failure> {
    let Some(path) = path else {
        return Ok(CapabilityRegistry::sample());
    };
    let file = File::open(path).map_err(io_err(path))?;
    CapabilityRegistry::from_reader(BufReader::new(file))
        .map_err(|e| fail(EXIT_OTHER, format!("{}: {e}", path.display())))
}

fn load_graph(path: &Path) -> Result<GestGraph, Failure> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    GestGraph::deserialize(&bytes).map_err(|e| fail(EXIT_OTHER, format!("{}: {e}", path.display())))
}

/// Writes to stdout; a closed pipe is not an error.
fn print_out(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|()| out.flush());
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(io_err(p)),
        None => {
            print_out(text);
            print_out("\n");
            Ok(())
        }
    }
}

fn schedule_of(g: &GestGraph, reg: &CapabilityRegistry, fps: u32) -> Result<Schedule, Failure> {
    if fps == 0 {
        return Err(fail(EXIT_OTHER, "--fps must be at least 1"));
    }
    solve(&build_constraints(g, reg))
        .map(|s| s.with_fps(fps))
        .map_err(|e| fail(EXIT_INFEASIBLE, e.to_string()))
}

fn check_valid(g: &GestGraph, reg: &CapabilityRegistry) -> Result<(), Failure> {
    let report = validate(g, reg);
    if report.ok {
        return Ok(());
    }
    for v in &report.violations {
        eprintln!("{}: {}", v.code.as_str(), v.message);
    }
    Err(fail(EXIT_INVALID, format!("{} violation(s)", report.violations.len())))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let reg = load_registry(cli.registry.as_deref())?;
    match cli.command {
        Command::Serve {
            port,
            host,
            idle_timeout,
        } => {
            let rt = tokio::runtime::Runtime::new().map_err(|e| fail(EXIT_OTHER, e.to_string()))?;
            rt.block_on(server::serve(
                Arc::new(reg),
                SocketAddr::new(host, port),
                Duration::from_secs(idle_timeout),
            ))
            .map_err(|e| fail(EXIT_OTHER, format!("server: {e}")))
        }
        Command::Validate { file } => {
            let g = load_graph(&file)?;
            let report = validate(&g, &reg);
            emit(&serde_json::to_string_pretty(&report).expect("serializable"), None)?;
            if report.ok {
                return Ok(());
            }
            for v in &report.violations {
                eprintln!("{}: {}", v.code.as_str(), v.message);
            }
            Err(fail(EXIT_INVALID, format!("{}: invalid", file.display())))
        }
        Command::Schedule { file, fps, out } => {
            let g = load_graph(&file)?;
            let s = schedule_of(&g, &reg, fps)?;
            emit(&s.to_json_pretty(), out.as_deref())
        }
        Command::Execute { file, fps, out } => {
            let g = load_graph(&file)?;
            check_valid(&g, &reg)?;
            let s = schedule_of(&g, &reg, fps)?;
            let trace = execute(&g, &s, &reg).map_err(|e| fail(EXIT_INFEASIBLE, e.to_string()))?;
            fs::create_dir_all(&out).map_err(io_err(&out))?;
            write_trace(&trace, &out).map_err(io_err(&out))?;
            let sched_path = out.join("schedule.json");
            fs::write(&sched_path, s.to_json_pretty()).map_err(io_err(&sched_path))
        }
        Command::Generate {
            seed,
            actors,
            scenes,
            rounds,
            out,
        } => {
            let cfg = GenConfig {
                seed,
                n_actors: actors,
                n_scenes: scenes,
                rounds_per_scene: rounds,
                ..GenConfig::default()
            };
            let g = generate(&cfg, Arc::new(reg)).map_err(|e| fail(EXIT_OTHER, e.to_string()))?;
            emit(&g.to_json_pretty(), out.as_deref())
        }
        Command::Replay { scenario, out } => {
            let text = fs::read_to_string(&scenario).map_err(io_err(&scenario))?;
            let steps = parse_scenario(&text).map_err(|e| fail(EXIT_OTHER, e))?;
            let r = replay(&steps, Arc::new(reg));
            match out {
                Some(dir) => {
                    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
                    let t = dir.join("transcript.jsonl");
                    fs::write(&t, r.transcript_jsonl()).map_err(io_err(&t))?;
                    let gp = dir.join("final.gest.json");
                    fs::write(&gp, r.graph.to_json_pretty()).map_err(io_err(&gp))?;
                }
                None => print_out(&r.transcript_jsonl()),
            }
            if r.passed() {
                return Ok(());
            }
            for m in &r.mismatches {
                eprintln!("{m}");
            }
            Err(fail(EXIT_INVALID, format!("{} step(s) did not match", r.mismatches.len())))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
