//! Option merging: command-line flags override the JSON config file, which
//! overrides the per-command defaults.

use std::path::{Path, PathBuf};

use amcsim::workload::{preset, MatrixKind, PRESETS};
use amcsim::CircuitKind;
use anyhow::Result;
use clap::Args;
use serde::Deserialize;

use crate::io::{input_error, Format};

#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Settings {
    /// JSON file with defaults for any of these options.
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Circuit(s): inv, egv, mvm. Comma-separated lists for sweep and bench.
    #[arg(long, value_delimiter = ',')]
    pub circuit: Option<Vec<String>>,
    /// Matrix size for generated matrices.
    #[arg(long)]
    pub n: Option<usize>,
    /// Matrix sizes for sweep and bench, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Conductance matrix file (CSV, siemens); excludes --gen.
    #[arg(long, value_name = "FILE")]
    pub matrix: Option<PathBuf>,
    /// Input vector file (one value per line): currents for inv, voltages for mvm.
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Generated matrix family: pd or dds.
    #[arg(long)]
    pub gen: Option<String>,
    /// Wire-segment resistance in ohms; comma-separated list for sweep.
    #[arg(long, value_delimiter = ',', conflicts_with = "node")]
    pub r: Option<Vec<f64>>,
    /// Technology node preset(s): baseline, 32nm, 22nm, 16nm.
    #[arg(long, value_delimiter = ',')]
    pub node: Option<Vec<String>>,
    /// Trials per sweep cell, or per bias candidate for compensate.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also solve the nodal-analysis netlist and report the agreement.
    #[arg(long)]
    pub oracle: bool,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Record format: csv or json.
    #[arg(long)]
    pub format: Option<String>,
    /// Repetitions per size for bench.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Per-size time limit for bench, in seconds.
    #[arg(long, value_name = "SECS")]
    pub timeout: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Sweep,
    Compensate,
    Bench,
    Oracle,
}

/// Fully resolved options of one invocation.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    pub circuits: Vec<CircuitKind>,
    pub n: usize,
    pub sizes: Vec<usize>,
    pub matrix: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub gen: MatrixKind,
    /// `(label, ohms)`; the label is the preset name or the value itself.
    pub resistances: Vec<(String, f64)>,
    pub trials: usize,
    pub seed: u64,
    pub oracle: bool,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub reps: usize,
    pub timeout: Option<f64>,
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| input_error(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| input_error(format!("config {}: {e}", path.display())))
    }

    /// `self` wins over `file`.
    pub fn over(self, file: Settings) -> Settings {
        let (cli_r, cli_node) = (self.r.is_some(), self.node.is_some());
        Settings {
            config: self.config,
            circuit: self.circuit.or(file.circuit),
            n: self.n.or(file.n),
            sizes: self.sizes.or(file.sizes),
            matrix: self.matrix.or(file.matrix),
            input: self.input.or(file.input),
            gen: self.gen.or(file.gen),
            // a resistance given on the command line in either form
            // replaces both forms from the file
            r: if cli_node { self.r } else { self.r.or(file.r) },
            node: if cli_r { self.node } else { self.node.or(file.node) },
            trials: self.trials.or(file.trials),
            seed: self.seed.or(file.seed),
            oracle: self.oracle || file.oracle,
            out: self.out.or(file.out),
            format: self.format.or(file.format),
            reps: self.reps.or(file.reps),
            timeout: self.timeout.or(file.timeout),
        }
    }

    pub fn resolve(self, command: Command) -> Result<RunConfig> {
        let circuits = match self.circuit {
            Some(list) => list
                .iter()
                .map(|s| s.parse::<CircuitKind>().map_err(|e| input_error(e.to_string())))
                .collect::<Result<Vec<_>>>()?,
            None if command == Command::Sweep => CircuitKind::ALL.to_vec(),
            None => vec![CircuitKind::Inv],
        };
        if circuits.is_empty() {
            return Err(input_error("no circuit given"));
        }
        let single = matches!(command, Command::Simulate | Command::Oracle);
        if single && circuits.len() > 1 {
            return Err(input_error("this command takes a single --circuit"));
        }
        if self.matrix.is_some() && self.gen.is_some() {
            return Err(input_error("--matrix and --gen are mutually exclusive"));
        }
        if self.matrix.is_some() && matches!(command, Command::Sweep | Command::Bench) {
            return Err(input_error(
                "sweep and bench generate their matrices; --matrix is not accepted",
            ));
        }
        let gen = match &self.gen {
            Some(s) => s.parse::<MatrixKind>().map_err(|e| input_error(e.to_string()))?,
            None => MatrixKind::DiagDominantSymmetric,
        };
        let resistances: Vec<(String, f64)> = match (&self.r, &self.node) {
            (Some(_), Some(_)) => return Err(input_error("--r and --node are mutually exclusive")),
            (Some(rs), None) => rs.iter().map(|&r| (format!("{r}"), r)).collect(),
            (None, Some(nodes)) => nodes
                .iter()
                .map(|l| {
                    preset(l)
                        .map(|p| (l.clone(), p.r_wire))
                        .map_err(|e| input_error(e.to_string()))
                })
                .collect::<Result<_>>()?,
            (None, None) if command == Command::Sweep => {
                PRESETS.iter().map(|p| (p.label.to_string(), p.r_wire)).collect()
            }
            (None, None) => vec![("baseline".to_string(), 1.0)],
        };
        if let Some((l, r)) = resistances.iter().find(|(_, r)| !(r.is_finite() && *r > 0.0)) {
            return Err(input_error(format!("wire resistance must be positive, got {l} = {r}")));
        }
        if resistances.len() > 1 && command != Command::Sweep {
            return Err(input_error("this command takes a single resistance"));
        }
        let format = match self.format.as_deref() {
            None | Some("csv") => Format::Csv,
            Some("json") => Format::Json,
            Some(f) => return Err(input_error(format!("unknown format '{f}' (expected csv or json)"))),
        };
        let sizes = self.sizes.unwrap_or_else(|| match command {
            Command::Bench => vec![128, 256, 512, 1024],
            _ => vec![4, 8, 16, 32, 64],
        });
        let n = self.n.unwrap_or(match command {
            Command::Compensate => 32,
            _ => 8,
        });
        if n < 2 || sizes.iter().any(|&s| s < 2) {
            return Err(input_error("matrix sizes must be at least 2"));
        }
        let trials = self.trials.unwrap_or(match command {
            Command::Compensate => 50,
            _ => 1,
        });
        if trials == 0 {
            return Err(input_error("--trials must be positive"));
        }
        let reps = self.reps.unwrap_or(3);
        if reps == 0 {
            return Err(input_error("--reps must be positive"));
        }
        if let Some(t) = self.timeout {
            if !(t > 0.0) {
                return Err(input_error("--timeout must be positive"));
            }
        }
        Ok(RunConfig {
            command,
            circuits,
            n,
            sizes,
            matrix: self.matrix,
            input: self.input,
            gen,
            resistances,
            trials,
            seed: self.seed.unwrap_or(0),
            oracle: self.oracle,
            out: self.out,
            format,
            reps,
            timeout: self.timeout,
        })
    }
}

impl RunConfig {
    /// Every effective setting, for the output headers.
    pub fn echo(&self) -> Vec<(String, String)> {
        let join = |v: Vec<String>| v.join(",");
        let mut e = vec![
            ("command".into(), format!("{:?}", self.command).to_lowercase()),
            (
                "circuit".into(),
                join(self.circuits.iter().map(|c| c.to_string()).collect()),
            ),
        ];
        match self.command {
            Command::Sweep | Command::Bench => {
                e.push(("sizes".into(), join(self.sizes.iter().map(|s| s.to_string()).collect())))
            }
            _ => match &self.matrix {
                Some(p) => e.push(("matrix".into(), p.display().to_string())),
                None => {
                    e.push(("n".into(), self.n.to_string()));
                }
            },
        }
        if self.matrix.is_none() {
            e.push(("gen".into(), self.gen.label().into()));
        }
        if let Some(p) = &self.input {
            e.push(("input".into(), p.display().to_string()));
        }
        e.push((
            "node".into(),
            join(self.resistances.iter().map(|r| r.0.clone()).collect()),
        ));
        e.push((
            "r_ohm".into(),
            join(self.resistances.iter().map(|r| r.1.to_string()).collect()),
        ));
        e.push(("trials".into(), self.trials.to_string()));
        e.push(("seed".into(), self.seed.to_string()));
        e.push(("oracle".into(), self.oracle.to_string()));
        if self.command == Command::Bench {
            e.push(("reps".into(), self.reps.to_string()));
            e.push((
                "timeout_s".into(),
                self.timeout.map_or("none".into(), |t| t.to_string()),
            ));
        }
        e
    }
}
