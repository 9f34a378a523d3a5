use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use twin::files::{new_scenario, read_scenario, write_atomic, write_scenario};
use twin::forests::{
    default_params, load_forests, parse_samples_csv, samples_csv, save_forests, train_all,
};
use twin::log::read_log;
use twin::mesh_io::{read_mesh, write_mesh};
use twin::pack::{pack, PackOptions};
use twin::service::{serve, ServiceConfig, TickMode};
use twin_core::geometry::{convert, synthetic_training_set, ConvertParams};
use twin_core::runtime::{replay, ResultsSummary, SessionState};
use twin_core::scenario::{
    EquipmentClass, InteractionKind, InteractionPoint, StateVariable, Transform, Value,
};
use twin_core::validate;

#[derive(Parser)]
#[command(
    name = "twin",
    version,
    about = "Author, check and run virtual lab twins"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create an empty scenario file.
    New {
        name: String,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Validate a scenario file and print the report.
    Validate { file: PathBuf },
    /// Register an equipment class.
    AddClass(AddClass),
    /// Place an instance of a class.
    AddInstance(AddInstance),
    /// Add an interaction point to a class.
    AddInteraction(AddInteraction),
    /// Assemble a scenario directory into one file.
    Pack {
        dir: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Keep only these columns of a table, as `table=c1,c2`.
        #[arg(long = "columns")]
        columns: Vec<String>,
    },
    /// Replay a session log and print final step statuses and the snapshot hash.
    Replay { scenario: PathBuf, log: PathBuf },
    /// Geometry conversion.
    #[command(subcommand)]
    Geom(Geom),
    /// Run the session server.
    Serve(Serve),
}

#[derive(Args)]
struct AddClass {
    file: PathBuf,
    #[arg(long)]
    id: String,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    mesh: String,
    /// `name:bool=false`, `name:enum[a,b]=a` or `name:scalar[unit,min,max]=v`.
    #[arg(long = "var")]
    vars: Vec<String>,
}

#[derive(Args)]
struct AddInstance {
    file: PathBuf,
    #[arg(long)]
    class: String,
    #[arg(long)]
    id: String,
    /// Position as `x,y,z`.
    #[arg(long, default_value = "0,0,0", allow_hyphen_values = true)]
    at: String,
}

#[derive(Args)]
struct AddInteraction {
    file: PathBuf,
    #[arg(long)]
    class: String,
    #[arg(long)]
    id: String,
    /// Button setting `var=value` when pressed.
    #[arg(long, group = "kind")]
    button: Option<String>,
    /// Dial over `var,min,max,step`.
    #[arg(long, group = "kind")]
    dial: Option<String>,
    /// Cable socket with a compatibility tag.
    #[arg(long, group = "kind")]
    socket: Option<String>,
    /// Placement handle.
    #[arg(long, group = "kind")]
    handle: bool,
    /// Local position as `x,y,z`.
    #[arg(long, default_value = "0,0,0", allow_hyphen_values = true)]
    at: String,
    /// Local direction as `x,y,z`.
    #[arg(long, default_value = "0,1,0", allow_hyphen_values = true)]
    dir: String,
}

#[derive(Subcommand)]
enum Geom {
    /// Convert a mesh to fit a triangle budget.
    Convert {
        input: PathBuf,
        #[arg(long)]
        budget: usize,
        #[arg(long)]
        forests: PathBuf,
        #[arg(long, default_value_t = 8)]
        max_iter: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the converted mesh.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Train the three forests from a samples CSV.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Label the built-in synthetic meshes and write a samples CSV.
    Synth {
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
    },
}

#[derive(Args)]
struct Serve {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Tick as fast as possible instead of in wall-clock time.
    #[arg(long, conflicts_with = "manual_ticks")]
    turbo: bool,
    /// Advance time only through the ticks endpoint.
    #[arg(long)]
    manual_ticks: bool,
    /// Abort sessions that reach this many ticks.
    #[arg(long)]
    max_ticks: Option<u64>,
    #[arg(long, default_value_t = 4096)]
    stream_buffer: usize,
    /// Serve static files from this directory.
    #[arg(long)]
    ui: Option<PathBuf>,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::New { name, out } => {
            let s = new_scenario(&name)?;
            let out = out.unwrap_or_else(|| PathBuf::from(format!("{name}.twin.json")));
            write_scenario(&out, &s)?;
            println!("{}", out.display());
        }
        Command::Validate { file } => {
            let bytes =
                std::fs::read(&file).with_context(|| format!("reading {}", file.display()))?;
            let s: twin_core::ScenarioDefinition = serde_json::from_slice(&bytes)
                .with_context(|| format!("parsing {}", file.display()))?;
            let report = validate(&s);
            if !report.is_empty() {
                println!("{report}");
            }
            if report.has_errors() {
                return Ok(ExitCode::FAILURE);
            }
            println!("ok");
        }
        Command::AddClass(a) => edit(&a.file, |s| {
            let mut class = EquipmentClass::new(&a.id, a.name.as_deref().unwrap_or(&a.id), &a.mesh);
            for v in &a.vars {
                class = class.with_var(parse_var(v)?);
            }
            Ok(s.register_class(class)?)
        })?,
        Command::AddInstance(a) => edit(&a.file, |s| {
            Ok(s.instantiate(&a.class, &a.id, Transform::at(parse_vec3(&a.at)?))?)
        })?,
        Command::AddInteraction(a) => edit(&a.file, |s| {
            let kind = interaction_kind(&a)?;
            let point =
                InteractionPoint::new(&a.id, kind).at(parse_vec3(&a.at)?, parse_vec3(&a.dir)?);
            Ok(s.add_interaction(&a.class, point)?)
        })?,
        Command::Pack { dir, out, columns } => {
            let mut opts = PackOptions::default();
            for c in &columns {
                let (table, cols) = c
                    .split_once('=')
                    .ok_or_else(|| anyhow!("expected table=c1,c2, got `{c}`"))?;
                opts.columns.insert(
                    table.to_string(),
                    cols.split(',').map(str::to_string).collect(),
                );
            }
            let packed = pack(&dir, &out, &opts)?;
            println!("{} ({} assets)", out.display(), packed.assets.len());
        }
        Command::Replay { scenario, log } => {
            let s = read_scenario(&scenario)?;
            let records = read_log(&log)?;
            let state = replay(SessionState::load(s)?, &records)?;
            let summary = ResultsSummary::of(&state);
            for (pid, steps) in &summary.steps {
                for (step, r) in steps {
                    let status = serde_json::to_value(r.status)?;
                    let status = status.as_str().unwrap_or_default().to_string();
                    match r.completion_tick {
                        Some(t) => println!("{pid}/{step} {status} @{t}"),
                        None => println!("{pid}/{step} {status}"),
                    }
                }
            }
            println!("tick {}", state.tick_index());
            println!("hash {}", state.snapshot_hash());
        }
        Command::Geom(g) => return geom(g),
        Command::Serve(s) => {
            let mut cfg = ServiceConfig::new(s.data);
            cfg.mode = if s.turbo {
                TickMode::Turbo
            } else if s.manual_ticks {
                TickMode::Manual
            } else {
                TickMode::Realtime
            };
            cfg.max_ticks = s.max_ticks;
            cfg.stream_buffer = s.stream_buffer;
            cfg.ui_dir = s.ui;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(("127.0.0.1", s.port)).await?;
                println!("listening on {}", listener.local_addr()?);
                tokio::select! {
                    r = serve(cfg, listener) => r,
                    _ = tokio::signal::ctrl_c() => Ok(()),
                }
            })?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn geom(g: Geom) -> Result<ExitCode> {
    match g {
        Geom::Convert {
            input,
            budget,
            forests,
            max_iter,
            seed,
            out,
        } => {
            let mesh = read_mesh(&input)?;
            let forests = load_forests(&forests)?;
            let mut params = ConvertParams::new(budget);
            params.max_iter = max_iter;
            params.seed = seed;
            let (result, report) = convert(&mesh, &forests, &params)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if let Some(out) = out {
                write_mesh(&out, &result)?;
            }
            if !report.is_accepted() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Geom::Train { data, out, seed } => {
            let text = std::fs::read_to_string(&data)
                .with_context(|| format!("reading {}", data.display()))?;
            let set = parse_samples_csv(&text)?;
            let forests = train_all(&set, &default_params(), seed)?;
            save_forests(&out, &forests)?;
            for (name, f, d) in [
                ("accept", &forests.accept, &set.accept),
                ("plan", &forests.plan, &set.plan),
                ("quality", &forests.quality, &set.quality),
            ] {
                println!(
                    "{name}: {} samples, training accuracy {:.3}",
                    d.len(),
                    f.accuracy(d)?
                );
            }
        }
        Geom::Synth { out, seed, samples } => {
            let set = synthetic_training_set(seed, samples)?;
            write_atomic(&out, samples_csv(&set).as_bytes())?;
            println!(
                "{}: {} accept, {} plan, {} quality samples",
                out.display(),
                set.accept.len(),
                set.plan.len(),
                set.quality.len()
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Read, modify, re-validate and write back. Nothing is written on error.
fn edit(
    path: &Path,
    f: impl FnOnce(&mut twin_core::ScenarioDefinition) -> Result<()>,
) -> Result<()> {
    let mut s = read_scenario(path)?;
    f(&mut s)?;
    write_scenario(path, &s)?;
    Ok(())
}

fn parse_vec3(text: &str) -> Result<[f64; 3]> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("bad vector `{text}`"))?;
    parts
        .try_into()
        .map_err(|_| anyhow!("expected x,y,z, got `{text}`"))
}

fn parse_var(spec: &str) -> Result<StateVariable> {
    let (name, rest) = spec
        .split_once(':')
        .ok_or_else(|| anyhow!("bad var `{spec}`"))?;
    let (kind, initial) = rest
        .rsplit_once('=')
        .ok_or_else(|| anyhow!("var `{name}` needs an initial value"))?;
    let args = |prefix: &str| -> Option<Vec<&str>> {
        kind.strip_prefix(prefix)?
            .strip_prefix('[')?
            .strip_suffix(']')
            .map(|a| a.split(',').map(str::trim).collect())
    };
    if kind == "bool" {
        let v: bool = initial
            .parse()
            .with_context(|| format!("bad bool `{initial}`"))?;
        return Ok(StateVariable::boolean(name, v));
    }
    if let Some(values) = args("enum") {
        return Ok(StateVariable::enumeration(name, &values, initial));
    }
    if let Some(a) = args("scalar") {
        let [unit, min, max] = a[..] else {
            bail!("scalar needs [unit,min,max]");
        };
        let num = |t: &str| {
            t.parse::<f64>()
                .with_context(|| format!("bad number `{t}`"))
        };
        return Ok(StateVariable::scalar(
            name,
            unit,
            num(min)?,
            num(max)?,
            num(initial)?,
        ));
    }
    bail!("unknown var kind `{kind}`")
}

fn interaction_kind(a: &AddInteraction) -> Result<InteractionKind> {
    if let Some(b) = &a.button {
        let (var, value) = b
            .split_once('=')
            .ok_or_else(|| anyhow!("--button wants var=value"))?;
        let press_value =
            Value::parse_literal(value).ok_or_else(|| anyhow!("bad value `{value}`"))?;
        return Ok(InteractionKind::Button {
            target_var: var.to_string(),
            press_value,
        });
    }
    if let Some(d) = &a.dial {
        let parts: Vec<&str> = d.split(',').map(str::trim).collect();
        let [var, min, max, step] = parts[..] else {
            bail!("--dial wants var,min,max,step");
        };
        let num = |t: &str| {
            t.parse::<f64>()
                .with_context(|| format!("bad number `{t}`"))
        };
        return Ok(InteractionKind::Dial {
            target_var: var.to_string(),
            min: num(min)?,
            max: num(max)?,
            step: num(step)?,
        });
    }
    if let Some(tag) = &a.socket {
        return Ok(InteractionKind::CableSocket {
            compat_tag: tag.clone(),
        });
    }
    if a.handle {
        return Ok(InteractionKind::PlacementHandle);
    }
    bail!("one of --button, --dial, --socket or --handle is required")
}
