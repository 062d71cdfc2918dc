use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use zmix_cli::{find, recipes, run_config, run_path, RunOptions, RunResult, EXIT_ERROR};

#[derive(Parser)]
#[command(name = "zmix", version, about = "Mixing experiments on Z^d extensions")]
struct Cli {
    /// Default output root
    #[arg(long, env = "ZMIX_OUT", global = true, hide_env_values = true)]
    out_root: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a JSON configuration or a built-in recipe
    Run {
        /// Path of the configuration file
        #[arg(required_unless_present = "recipe", conflicts_with = "recipe")]
        config: Option<PathBuf>,
        /// Run the named recipe instead of a file
        #[arg(long)]
        recipe: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        /// Output root (the run writes to <out>/<name>)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the built-in recipes, or write them as JSON files
    Recipes {
        /// Directory to write <name>.json files into
        #[arg(long)]
        write: Option<PathBuf>,
        /// Print one recipe as JSON
        #[arg(long)]
        show: Option<String>,
    },
    /// Flatten a report CSV into plottable columns
    Plotdata {
        report: PathBuf,
        /// Write here instead of stdout
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn report(r: &RunResult) -> ExitCode {
    let m = &r.manifest;
    for v in &m.verdicts {
        println!(
            "{} {}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.name,
            v.detail
        );
    }
    if let Some(e) = &m.error {
        eprintln!("error: {e}");
    }
    println!("outputs in {} (exit {})", r.dir.display(), m.exit_code);
    ExitCode::from(m.exit_code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            recipe,
            seed,
            workers,
            out,
        } => {
            let opts = RunOptions { seed, workers, out };
            let root = cli.out_root.as_deref();
            match (config, recipe) {
                (Some(path), _) => report(&run_path(&path, &opts, root)),
                (None, Some(name)) => match find(&name) {
                    Some(r) => report(&run_config(&r.config(), &opts, root)),
                    None => {
                        eprintln!("error: no recipe named {name:?}; see `zmix recipes`");
                        ExitCode::from(EXIT_ERROR as u8)
                    }
                },
                (None, None) => unreachable!("clap requires one"),
            }
        }
        Command::Recipes { write, show } => {
            if let Some(name) = show {
                let Some(r) = find(&name) else {
                    eprintln!("error: no recipe named {name:?}");
                    return ExitCode::from(EXIT_ERROR as u8);
                };
                println!(
                    "{}",
                    serde_json::to_string_pretty(r.json()).expect("recipe serializes")
                );
                return ExitCode::SUCCESS;
            }
            for r in recipes() {
                let tag = r
                    .criterion
                    .map_or(String::new(), |c| format!(" [criterion {c}]"));
                println!("{:<26} {}{}", r.name, r.description, tag);
                if let Some(dir) = &write {
                    let text =
                        serde_json::to_string_pretty(r.json()).expect("recipe serializes") + "\n";
                    if let Err(e) = std::fs::create_dir_all(dir)
                        .and_then(|_| std::fs::write(dir.join(format!("{}.json", r.name)), text))
                    {
                        eprintln!("error: {e}");
                        return ExitCode::from(EXIT_ERROR as u8);
                    }
                }
            }
            ExitCode::SUCCESS
        }
        Command::Plotdata { report, output } => {
            let text = match std::fs::read_to_string(&report) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: reading {}: {e}", report.display());
                    return ExitCode::from(EXIT_ERROR as u8);
                }
            };
            match zmix_cli::plotdata::plotdata(&text) {
                Ok(t) => {
                    let out = t.render();
                    match output {
                        Some(p) => {
                            if let Err(e) = std::fs::write(&p, out) {
                                eprintln!("error: {e}");
                                return ExitCode::from(EXIT_ERROR as u8);
                            }
                        }
                        None => print!("{out}"),
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: malformed report {}: {e}", report.display());
                    ExitCode::from(EXIT_ERROR as u8)
                }
            }
        }
    }
}
