//! `hapsim` command line: single runs, parameter sweeps and report
//! regeneration from saved traces.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use crate::error::Error;
use crate::metrics::compute_report;
use crate::scenario_file::{parse_with_overrides, to_text, Override};
use crate::sim::scenario::Scenario;
use crate::sim::trace::{parse_packet_trace, parse_state_csv, write_packet_trace, write_state_csv};
use crate::sim::{run, RunOutput};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Column reference for the files written by `run`.
pub const SCHEMA: &str = include_str!("../SCHEMA.md");

#[derive(Debug, Parser)]
#[command(name = "hapsim", version, about = "Network impairment simulator for collaborative haptic VEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// Scenario file
    scenario: PathBuf,
    /// Replaces `[run] seed`
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// `section.key=value`, applied left to right
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<Override>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one simulation and write report.csv, report.txt, packets.trace
    /// and state.csv
    Run(RunArgs),
    /// Run the cartesian grid of `--param` values, one subdirectory per cell
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// `section.key=v1,v2,...`
        #[arg(long = "param", value_name = "KEY=V1,V2", required = true)]
        params: Vec<String>,
    },
    /// Recompute the report of a finished run from its saved traces
    Report {
        /// Directory written by `run`
        dir: PathBuf,
    },
    /// Print the output file schema
    Schema,
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::ScenarioFile { .. }
            | Error::InvalidScenario(_)
            | Error::InvalidArgument(_) => Failure::Invalid(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> Failure + '_ {
    move |e| Failure::Runtime(format!("{}: {e}", path.display()))
}

fn load(args: &RunArgs, extra: &[Override]) -> Result<Scenario, Failure> {
    let text = fs::read_to_string(&args.scenario)
        .map_err(|e| Failure::Invalid(format!("{}: {e}", args.scenario.display())))?;
    let mut overrides = args.overrides.clone();
    overrides.extend_from_slice(extra);
    if let Some(seed) = args.seed {
        overrides.push(Override {
            section: "run".into(),
            key: "seed".into(),
            value: seed.to_string(),
        });
    }
    parse_with_overrides(&text, &overrides).map_err(|e| {
        let msg = format!("{}: {e}", args.scenario.display());
        match Failure::from(e) {
            Failure::Invalid(_) => Failure::Invalid(msg),
            Failure::Runtime(_) => Failure::Runtime(msg),
        }
    })
}

/// Writes every output of `out` into `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, s: &Scenario, out: &RunOutput) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("scenario.scn"), to_text(s))?;
    fs::write(dir.join("report.csv"), out.report.to_csv())?;
    fs::write(dir.join("report.txt"), out.report.to_table())?;
    let mut packets = io::BufWriter::new(fs::File::create(dir.join("packets.trace"))?);
    write_packet_trace(&out.packets, &mut packets)?;
    packets.flush()?;
    let mut states = io::BufWriter::new(fs::File::create(dir.join("state.csv"))?);
    write_state_csv(&out.states, &mut states)?;
    states.flush()
}

fn run_one(s: &Scenario, dir: &Path) -> Result<RunOutput, Failure> {
    let out = run(s)?;
    write_outputs(dir, s, &out).map_err(io_err(dir))?;
    Ok(out)
}

/// `section.key=v1,v2` into one override per value.
fn parse_param(spec: &str) -> Result<Vec<Override>, Failure> {
    let (key, values) = spec
        .split_once('=')
        .ok_or_else(|| Failure::Invalid(format!("--param `{spec}`: expected KEY=V1,V2")))?;
    values
        .split(',')
        .map(|v| {
            format!("{}={}", key.trim(), v.trim())
                .parse::<Override>()
                .map_err(|e| Failure::Invalid(format!("--param `{spec}`: {e}")))
        })
        .collect()
}

fn grid(axes: &[Vec<Override>]) -> Vec<Vec<Override>> {
    axes.iter().fold(vec![Vec::new()], |cells, axis| {
        cells
            .iter()
            .flat_map(|cell| {
                axis.iter().map(move |o| {
                    let mut c = cell.clone();
                    c.push(o.clone());
                    c
                })
            })
            .collect()
    })
}

fn cell_name(index: usize, cell: &[Override]) -> String {
    let mut name = format!("cell{index:03}");
    for o in cell {
        let value: String = o
            .value
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
            .collect();
        name.push_str(&format!("__{}={value}", o.key));
    }
    name
}

fn sweep(args: &RunArgs, params: &[String], stdout: &mut dyn Write) -> Result<(), Failure> {
    let axes = params
        .iter()
        .map(|p| parse_param(p))
        .collect::<Result<Vec<_>, _>>()?;
    let cells = grid(&axes);
    // validate every cell before anything runs
    let scenarios = cells
        .iter()
        .map(|c| load(args, c))
        .collect::<Result<Vec<_>, _>>()?;
    let results: Vec<Result<RunOutput, Failure>> = scenarios
        .par_iter()
        .enumerate()
        .map(|(i, s)| run_one(s, &args.out.join(cell_name(i, &cells[i]))))
        .collect();

    let mut summary = String::from("cell");
    for axis in &axes {
        summary.push_str(&format!(",{}.{}", axis[0].section, axis[0].key));
    }
    summary.push_str(
        ",total_pps_avg,avg_packet_bytes,from_server_pre_fec_loss,from_server_post_fec_loss,\
         to_server_post_fec_loss,force_discontinuities\n",
    );
    for (i, r) in results.into_iter().enumerate() {
        let out = r?;
        let rep = &out.report;
        summary.push_str(&cell_name(i, &cells[i]));
        for o in &cells[i] {
            summary.push_str(&format!(",{}", o.value));
        }
        summary.push_str(&format!(
            ",{},{},{},{},{},{}\n",
            rep.total.avg,
            rep.avg_packet_bytes,
            rep.from_server_loss.pre_fec_loss,
            rep.from_server_loss.post_fec_loss,
            rep.to_server_loss.post_fec_loss,
            rep.force_discontinuities
        ));
    }
    fs::write(args.out.join("sweep.csv"), &summary).map_err(io_err(&args.out))?;
    let _ = stdout.write_all(summary.as_bytes());
    Ok(())
}

fn regenerate(dir: &Path, stdout: &mut dyn Write) -> Result<(), Failure> {
    let read = |name: &str| {
        let p = dir.join(name);
        fs::read_to_string(&p).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))
    };
    let s = parse_with_overrides(&read("scenario.scn")?, &[])?;
    let packets = parse_packet_trace(&read("packets.trace")?)?;
    let states = parse_state_csv(&read("state.csv")?)?;
    let report = compute_report(&s, &packets, &states)?;
    let _ = stdout.write_all(report.to_csv().as_bytes());
    Ok(())
}

fn dispatch(cli: Cli, stdout: &mut dyn Write) -> Result<(), Failure> {
    match cli.command {
        Command::Run(args) => {
            let s = load(&args, &[])?;
            let _ = writeln!(stdout, "# effective scenario\n{}", to_text(&s));
            let out = run_one(&s, &args.out)?;
            let _ = write!(stdout, "{}", out.report.to_table());
            Ok(())
        }
        Command::Sweep { run, params } => sweep(&run, &params, stdout),
        Command::Report { dir } => regenerate(&dir, stdout),
        Command::Schema => {
            let _ = stdout.write_all(SCHEMA.as_bytes());
            Ok(())
        }
    }
}

/// Runs the CLI and returns the process exit code.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(Failure::Invalid(m)) => {
            let _ = writeln!(stderr, "error: {m}");
            EXIT_INVALID
        }
        Err(Failure::Runtime(m)) => {
            let _ = writeln!(stderr, "error: {m}");
            EXIT_RUNTIME
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_cartesian() {
        let a = parse_param("compensation.fec_redundancy=1,2,3").unwrap();
        let b = parse_param("channel.c2s.loss_prob=0,0.1").unwrap();
        let cells = grid(&[a, b]);
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[1][0].value, "1");
        assert_eq!(cells[1][1].value, "0.1");
        assert_eq!(cell_name(1, &cells[1]), "cell001__fec_redundancy=1__loss_prob=0.1");
    }

    #[test]
    fn bad_param_is_a_validation_failure() {
        assert!(matches!(parse_param("nokey"), Err(Failure::Invalid(_))));
        assert!(matches!(parse_param("cubes.x=1"), Err(Failure::Invalid(_))));
    }
}
