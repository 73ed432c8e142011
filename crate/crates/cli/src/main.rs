mod config;
mod experiments;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use noonsim::Preset;

use config::{ExperimentConfig, Format, Kind, Overrides};
use output::{num, DerivedRecord, Manifest, Table};

#[derive(Parser)]
#[command(name = "noonsim", version, about = "Four-site extended Bose-Hubbard NOON-state simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug, Default)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (default: noonsim-out/<experiment>).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_preset)]
    preset: Option<Preset>,
    /// Number of sweep points for the experiment's main grid.
    #[arg(long, value_name = "N")]
    grid: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand)]
enum Command {
    /// Energy levels against U/J or mu/J, with band labels.
    Spectrum(Common),
    /// Site populations and uber-NOON fidelity of |M,P,0,0> over time.
    Evolve(Common),
    /// Protocol I branch probabilities and fidelities over P theta.
    Protocol1(Common),
    /// Protocol II fidelity over P theta.
    Protocol2(Common),
    /// Site-3 readout probabilities and least-squares constants.
    Readout(Common),
    /// Lattice integrability roots and couplings.
    Physical(Common),
    /// Fidelity against the detuning xi, static and pulsed.
    Robustness(Common),
    /// List the built-in parameter sets.
    Presets {
        /// Print a delimited table instead of text.
        #[arg(long)]
        machine: bool,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Run the experiment named by the config file's `experiment` key.
    Run {
        #[arg(value_name = "CONFIG")]
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    s.parse().map_err(|e: noonsim::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let numerical = e.chain().any(|c| c.downcast_ref::<noonsim::Error>().is_some_and(|n| n.is_numerical()));
            ExitCode::from(if numerical { 2 } else { 1 })
        }
    }
}

fn dispatch(cmd: Command) -> anyhow::Result<()> {
    let (kind, common) = match cmd {
        Command::Spectrum(c) => (Kind::Spectrum, c),
        Command::Evolve(c) => (Kind::Evolve, c),
        Command::Protocol1(c) => (Kind::Protocol1, c),
        Command::Protocol2(c) => (Kind::Protocol2, c),
        Command::Readout(c) => (Kind::Readout, c),
        Command::Physical(c) => (Kind::Physical, c),
        Command::Robustness(c) => (Kind::Robustness, c),
        Command::Presets { machine, format } => return list_presets(machine, format),
        Command::Run { file: config, mut common } => {
            if common.config.is_some() {
                anyhow::bail!(noonsim::Error::InvalidConfig("`run` takes the config as its argument, not --config".into()));
            }
            let cfg = ExperimentConfig::load(&config)?;
            let kind = cfg.experiment.ok_or_else(|| {
                noonsim::Error::InvalidConfig(format!("{} has no `experiment` key", config.display()))
            })?;
            common.config = Some(config);
            (kind, common)
        }
    };
    execute(kind, &common)
}

fn execute(kind: Kind, common: &Common) -> anyhow::Result<()> {
    let started = Instant::now();
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let overrides = Overrides { preset: common.preset, grid: common.grid, format: common.format, out: common.out.clone() };
    cfg.apply(kind, &overrides)?;
    let dir = cfg.output.dir.clone().unwrap_or_else(|| Path::new("noonsim-out").join(kind.name()));
    cfg.output.dir = Some(dir.clone());

    let model = match kind {
        Kind::Physical => None,
        _ => Some(cfg.resolve_model()?),
    };
    let derived = match &model {
        Some(m) => {
            let pc = m.protocol_config(std::f64::consts::PI)?;
            Some(DerivedRecord {
                t_m: pc.derived.t_m,
                t_mu: pc.t_mu(),
                t_nu: pc.t_nu(),
                omega: pc.derived.omega,
                beta: pc.derived.beta,
            })
        }
        None => None,
    };

    let outcome = experiments::run(kind, &cfg, model.as_ref())?;
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    for table in &outcome.tables {
        let path = table.save(&dir, cfg.output.format)?;
        written.push(path.file_name().expect("file name").to_string_lossy().into_owned());
    }

    let resolved = serde_json::json!({ "experiment": relevant_sections(&cfg, kind)?, "model": model });
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        experiment: kind.name(),
        config: &resolved,
        derived,
        summary: outcome.summary,
        tables: written.clone(),
        started_unix_s: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        elapsed_s: started.elapsed().as_secs_f64(),
    };
    let path = manifest.save(&dir)?;
    println!("{kind}: wrote {} and {} in {}", written.join(", "), path.file_name().unwrap().to_string_lossy(), dir.display());
    Ok(())
}

/// The config with only the sections the experiment reads.
fn relevant_sections(cfg: &ExperimentConfig, kind: Kind) -> anyhow::Result<serde_json::Value> {
    let section = match kind {
        Kind::Protocol1 | Kind::Protocol2 | Kind::Readout => "protocol",
        k => k.name(),
    };
    let mut value = serde_json::to_value(cfg)?;
    if let Some(map) = value.as_object_mut() {
        map.retain(|k, _| matches!(k.as_str(), "experiment" | "seed" | "output") || k == section || (k == "model" && kind != Kind::Physical));
    }
    Ok(value)
}

fn list_presets(machine: bool, format: Format) -> anyhow::Result<()> {
    if machine {
        let mut t = Table::new(
            "presets",
            &["name", "m", "p", "u0", "u", "j", "mu", "nu", "u_over_j", "t_m", "quoted_t_m", "scattering_length_a0", "radial_frequency_hz"],
        );
        for p in Preset::ALL {
            let v = p.values();
            let t_m = v.protocol_config(0.0)?.derived.t_m;
            t.push(vec![
                p.name().into(),
                noonsim::presets::M.to_string(),
                noonsim::presets::P.to_string(),
                num(v.u0),
                num(v.u),
                num(v.j),
                num(v.mu),
                num(v.mu),
                num(v.u / v.j),
                num(t_m),
                num(v.quoted_t_m),
                num(v.scattering_length),
                num(v.radial_frequency_hz),
            ]);
        }
        return t.write_to(std::io::stdout().lock(), format);
    }
    for p in Preset::ALL {
        let v = p.values();
        let t_m = v.protocol_config(0.0)?.derived.t_m;
        println!("{} (M = {}, P = {}, couplings in rad/s)", p.name(), noonsim::presets::M, noonsim::presets::P);
        println!("  U = {}  J = {}  mu = nu = {}  U/J = {:.3}", v.u, v.j, v.mu, v.u / v.j);
        println!("  U0 = {} at the lattice root a = {} a0, omega_r = 2pi x {} Hz", v.u0, v.scattering_length, v.radial_frequency_hz);
        println!("  t_m = {t_m:.4} s from pi/(2 Omega); quoted {} s", v.quoted_t_m);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        super::Cli::command().debug_assert();
    }
}
