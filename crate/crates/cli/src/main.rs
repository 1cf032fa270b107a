use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fluoroplan::io::{load_plan, read_json, save_plan};
use fluoroplan::phantom::{evaluate_plan, format_errors, generate_phantom, PhantomSpec, TruthFile};
use fluoroplan::service::{run_ndjson, Request, ServiceConfig, ServiceError, Session};
use fluoroplan::{ExitClass, Side, VertebraLabel};
use fluoroplan_cli::server::{serve, ServerConfig};

#[derive(Parser)]
#[command(name = "fluoroplan", version, about = "Pedicle screw planning on biplanar fluoroscopy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Initialize one screw on a case and write the plan.
    Plan {
        #[arg(long)]
        case: PathBuf,
        #[arg(long)]
        vertebra: VertebraLabel,
        #[arg(long)]
        side: Side,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic case with ground truth.
    Phantom {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        levels: u8,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a plan against a truth file.
    Evaluate {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Run planning sessions over HTTP/WebSocket, or one session over stdin/stdout.
    Serve {
        #[arg(long, required_unless_present = "stdio")]
        port: Option<u16>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Overrides FLUOROPLAN_CASE_ROOT.
        #[arg(long)]
        case_root: Option<PathBuf>,
        /// Static assets served at `/`.
        #[arg(long)]
        static_dir: Option<PathBuf>,
        /// Serve a single newline-delimited JSON session on stdin/stdout.
        #[arg(long, conflicts_with_all = ["port", "static_dir"])]
        stdio: bool,
    },
}

struct Failure {
    class: ExitClass,
    message: String,
}

impl From<fluoroplan::Error> for Failure {
    fn from(e: fluoroplan::Error) -> Self {
        Failure { class: e.exit_class(), message: format!("{}: {e}", e.code()) }
    }
}

impl From<ServiceError> for Failure {
    fn from(e: ServiceError) -> Self {
        Failure { class: e.exit_class(), message: format!("{}: {e}", e.code()) }
    }
}

impl From<fluoroplan::io::IoError> for Failure {
    fn from(e: fluoroplan::io::IoError) -> Self {
        fluoroplan::Error::from(e).into()
    }
}

impl From<fluoroplan::phantom::PhantomError> for Failure {
    fn from(e: fluoroplan::phantom::PhantomError) -> Self {
        fluoroplan::Error::from(e).into()
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { class: ExitClass::Io, message: format!("IoError: {e}") }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.class as u8)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Plan { case, vertebra, side, out } => plan(&case, vertebra, side, out.as_deref()),
        Command::Phantom { levels, seed, out } => {
            let phantom = generate_phantom(&PhantomSpec::new(levels.into(), seed))?;
            let case = phantom.write(&out)?;
            println!("{}", case.display());
            Ok(())
        }
        Command::Evaluate { plan, truth, json } => {
            let (doc, warnings) = load_plan(&plan)?;
            for w in warnings {
                eprintln!("warning: {w}");
            }
            let truth: TruthFile = read_json(&truth)?;
            let errors = evaluate_plan(&doc, &truth)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&errors).expect("plan errors serialize"));
            } else {
                print!("{}", format_errors(&errors));
            }
            Ok(())
        }
        Command::Serve { port, host, case_root, static_dir, stdio } => {
            let mut service = ServiceConfig::from_env();
            if case_root.is_some() {
                service.case_root = case_root;
            }
            if stdio {
                let mut session = Session::new(service);
                run_ndjson(&mut session, std::io::stdin().lock(), std::io::stdout().lock())?;
                return Ok(());
            }
            let port = port.expect("clap requires --port without --stdio");
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port)).await?;
                eprintln!("listening on http://{}", listener.local_addr()?);
                serve(listener, ServerConfig { service, static_dir }).await
            })?;
            Ok(())
        }
    }
}

fn plan(case: &Path, label: VertebraLabel, side: Side, out: Option<&Path>) -> Result<(), Failure> {
    let mut session = Session::new(ServiceConfig::from_env());
    session.handle(Request::OpenCase { path: case.display().to_string() })?;
    for w in &session.case().expect("case just opened").warnings {
        eprintln!("warning: {w}");
    }
    session.handle(Request::InitScrew { label, side })?;
    let doc = session.plan_document()?;
    for w in doc.screws.iter().flat_map(|s| &s.warnings) {
        eprintln!("warning: {w}");
    }
    match out {
        Some(path) => save_plan(&doc, path)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut stdout, &doc).map_err(std::io::Error::from)?;
            writeln!(stdout)?;
        }
    }
    Ok(())
}
