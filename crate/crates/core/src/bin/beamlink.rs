use beamlink::config::parse_config;
use beamlink::scenario::{is_config_error, run, Overrides};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Coupled solid / beam finite-element scenarios.
#[derive(Parser, Debug)]
#[command(name = "beamlink", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario. Trailing words `solve`, `stability`, `export`,
    /// `parallel` (optionally `=true|false`), `levels=<n>` and `out=<dir>`
    /// override the config, as do the flags.
    Run {
        config: PathBuf,
        #[arg(long)]
        solve: bool,
        #[arg(long)]
        stability: bool,
        #[arg(long)]
        export: bool,
        #[arg(long)]
        parallel: bool,
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        overrides: Vec<String>,
    },
    /// Validate a config and print it in canonical form with defaults filled in.
    Config { config: PathBuf },
}

fn parse_bool(key: &str, v: Option<&str>) -> Result<bool, String> {
    match v {
        None | Some("true") => Ok(true),
        Some("false") => Ok(false),
        Some(other) => Err(format!("`{key}` expects true or false, got `{other}`")),
    }
}

fn apply_words(words: &[String], o: &mut Overrides) -> Result<(), String> {
    for w in words {
        let (k, v) = match w.split_once('=') {
            Some((k, v)) => (k, Some(v)),
            None => (w.as_str(), None),
        };
        match k {
            "solve" => o.solve = Some(parse_bool(k, v)?),
            "stability" => o.stability = Some(parse_bool(k, v)?),
            "export" => o.export = Some(parse_bool(k, v)?),
            "parallel" => o.parallel = Some(parse_bool(k, v)?),
            "levels" => {
                let n = v
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| format!("`levels` expects a positive integer, got `{w}`"))?;
                o.levels = Some(n);
            }
            "out" => o.out = Some(PathBuf::from(v.ok_or("`out` expects a directory")?)),
            _ => return Err(format!("unknown override `{w}`")),
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Config { config } => match parse_config(&config) {
            Ok(c) => {
                println!("{}", c.to_json());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Command::Run {
            config,
            solve,
            stability,
            export,
            parallel,
            levels,
            out,
            overrides,
        } => {
            let mut o = Overrides::default();
            if let Err(e) = apply_words(&overrides, &mut o) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            // flags are applied last and win
            if solve {
                o.solve = Some(true);
            }
            if stability {
                o.stability = Some(true);
            }
            if export {
                o.export = Some(true);
            }
            if parallel {
                o.parallel = Some(true);
            }
            if levels.is_some() {
                o.levels = levels;
            }
            if out.is_some() {
                o.out = out;
            }
            let cfg = match parse_config(&config).and_then(|c| c.with_overrides(&o)) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            match run(&cfg) {
                Ok(outcome) => {
                    for l in &outcome.levels {
                        let mut line = format!("level {} N={}", l.level, l.n);
                        if let Some(s) = &l.stability {
                            line += &format!(" alpha={:.6e} beta={:.6e}", s.alpha, s.beta);
                        }
                        if let Some(r) = &l.solve {
                            let t = r.tip_displacement();
                            line += &format!(" tip=[{:.6e} {:.6e} {:.6e}]", t.x, t.y, t.z);
                        }
                        println!("{line}");
                    }
                    let failures = outcome.failures();
                    for (level, c) in &failures {
                        let level = level.map_or("all".to_string(), |l| l.to_string());
                        println!(
                            "FAIL level={level} check={} value={:e} tolerance={:e}",
                            c.name, c.value, c.tolerance
                        );
                    }
                    println!(
                        "{} -> {}",
                        if failures.is_empty() {
                            "all checks passed"
                        } else {
                            "checks failed"
                        },
                        outcome.output_dir.display()
                    );
                    ExitCode::from(outcome.exit_code() as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(if is_config_error(&e) { 2 } else { 3 })
                }
            }
        }
    }
}
