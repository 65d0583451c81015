use std::fmt::Write as _;

use wmix::geometry::PotentialPoint;
use wmix::{Evaluation, MeasureKind, PotentialOracle};

use crate::config::{independent_basis, pick, PlotConfig};
use crate::error::{CliError, CliResult};
use crate::{CommandOutput, Globals};

pub const DEFAULT_SAMPLES: usize = 100_000;
pub const CSV_HEADER: &str = "eta,Fstar,stderr,F,stderr_F";

pub fn to_csv(points: &[PotentialPoint]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{}",
            p.eta, p.fstar, p.stderr, p.f, p.stderr_f
        )
        .expect("string write");
    }
    out
}

pub fn parse_csv(text: &str) -> CliResult<Vec<PotentialPoint>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(CliError::Usage("missing potential CSV header".into()));
    }
    lines
        .map(|line| {
            let v: Vec<f64> = line
                .split(',')
                .map(|x| {
                    x.parse::<f64>()
                        .map_err(|e| CliError::Usage(format!("{line}: {e}")))
                })
                .collect::<CliResult<_>>()?;
            match v[..] {
                [eta, fstar, stderr, f, stderr_f] => Ok(PotentialPoint {
                    eta,
                    fstar,
                    stderr,
                    f,
                    stderr_f,
                }),
                _ => Err(CliError::Usage(format!("expected 5 columns: {line}"))),
            }
        })
        .collect()
}

pub fn run(cfg: &PlotConfig, g: &Globals) -> CliResult<CommandOutput> {
    if cfg.basis.len() != 2 {
        return Err(CliError::Usage(
            "plot-potential needs exactly two components".into(),
        ));
    }
    let seed = pick(g.seed, cfg.seed, 0);
    let samples = pick(g.samples, cfg.samples, DEFAULT_SAMPLES);
    let basis = independent_basis(cfg.basis.clone())?;
    let mode = if basis.measure() == MeasureKind::Counting {
        Evaluation::Exact
    } else {
        Evaluation::MonteCarlo { samples, seed }
    };
    let oracle = PotentialOracle::new(basis, mode)?;
    let points = oracle.potential_curve(&cfg.grid()?)?;
    let mut resolved = cfg.clone();
    resolved.seed = Some(seed);
    resolved.samples = Some(samples);
    Ok(CommandOutput {
        command: "plot-potential",
        primary: to_csv(&points).into_bytes(),
        records: serde_json::to_value(&points)?,
        config: serde_json::to_value(&resolved)?,
        seed,
        failures: 0,
    })
}
