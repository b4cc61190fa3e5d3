//! Subcommand execution and output formats.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use seqshare::analysis::{
    linspace, maximize_quantity, sweep_with, violation_interval_with, OptimizerConfig, SweepMode,
};
use seqshare::correlations::mabk_all;
use seqshare::lhv::{classical_max, is_violation, DeterministicStrategy, LHV_BOUND};
use seqshare::output::format_sig;
use seqshare::sampling::{estimate_from_rounds, sample_rounds};
use seqshare::{closed_form, joint_table, Error};

use crate::config::{Resolved, RunConfig, StateSpec};

/// A failed run: message plus process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NumericalGuard(_) | Error::NonConvergence(_) => 2,
            _ => 1,
        };
        Self { code, message: e.to_string() }
    }
}

fn io_failure(path: Option<&Path>, e: io::Error) -> Failure {
    match path {
        Some(p) => Failure::config(format!("{}: {e}", p.display())),
        None => Failure::config(format!("stdout: {e}")),
    }
}

type Outcome = Result<(), Failure>;

/// Writes to the named file, or to standard output.
fn write_to(path: Option<&PathBuf>, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Outcome {
    let result = match path {
        Some(p) => File::create(p).and_then(|f| {
            let mut w = BufWriter::new(f);
            body(&mut w)?;
            w.flush()
        }),
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            body(&mut w).and_then(|_| w.flush())
        }
    };
    result.map_err(|e| io_failure(path.map(|p| p.as_path()), e))
}

fn write_json<T: Serialize>(path: Option<&PathBuf>, value: &T) -> Outcome {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    write_to(path, |w| writeln!(w, "{text}"))
}

fn fmt(x: f64) -> String {
    format_sig(x, 12)
}

/// Rounds to the 12 significant digits used in every output file.
fn sig(x: f64) -> f64 {
    fmt(x).parse().expect("formatted number parses")
}

pub fn evaluate(config: &RunConfig, r: &Resolved) -> Outcome {
    let table = joint_table(&r.rho, &r.plan)?;
    let values = mabk_all(&table);
    // the closed forms hold for the GHZ state under canonical settings only
    let closed = config.plan.is_canonical() && config.state == StateSpec::Ghz;
    let q = r.plan.qualities();
    let mut lines = vec!["omega,B,closed_form,violation".to_string()];
    for m in &values {
        let cf = if closed { fmt(closed_form(m.omega, &q)?) } else { String::new() };
        lines.push(format!("{},{},{cf},{}", m.omega, fmt(m.value), is_violation(m.value)));
    }
    write_to(config.output.as_ref(), |w| {
        for l in &lines {
            writeln!(w, "{l}")?;
        }
        Ok(())
    })?;
    if let Some(p) = &config.evaluate.table {
        write_to(Some(p), |w| table.write_csv(w))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct IntervalRecord {
    omega_set: Vec<u8>,
    lower: Option<f64>,
    upper: Option<f64>,
    tol: f64,
    /// Largest scanned value of the set minimum when no window exists.
    #[serde(skip_serializing_if = "Option::is_none")]
    best: Option<f64>,
}

pub fn sweep(config: &RunConfig, r: &Resolved) -> Outcome {
    let s = &config.sweep;
    let directions = r.plan.directions();
    if s.points > 0 {
        let mode = match s.side {
            None => SweepMode::EqualSides,
            Some(side) => SweepMode::SingleSide {
                site: side.into(),
                base: config.plan.g(),
            },
        };
        let records = sweep_with(&r.rho, directions, &linspace(s.start, s.stop, s.points), mode)?;
        write_to(config.output.as_ref(), |w| {
            writeln!(w, "G,B1,B2,B3,B4,B5,B6,B7,B8")?;
            for rec in &records {
                let row: Vec<String> = std::iter::once(rec.g).chain(rec.b).map(fmt).collect();
                writeln!(w, "{}", row.join(","))?;
            }
            Ok(())
        })?;
    }
    if r.windows.is_empty() {
        return Ok(());
    }
    let mut out = Vec::new();
    for set in &r.windows {
        let record = match violation_interval_with(&r.rho, directions, set, s.tol) {
            Ok(v) => IntervalRecord {
                omega_set: set.members().to_vec(),
                lower: Some(sig(v.lower)),
                upper: Some(sig(v.upper)),
                tol: v.tol,
                best: None,
            },
            Err(Error::NoViolationWindow { best }) => IntervalRecord {
                omega_set: set.members().to_vec(),
                lower: None,
                upper: None,
                tol: s.tol,
                best: Some(sig(best)),
            },
            Err(e) => return Err(e.into()),
        };
        out.push(record);
    }
    write_json(s.intervals_output.as_ref(), &out)
}

#[derive(Serialize)]
struct Parameter {
    name: String,
    value: f64,
}

#[derive(Serialize)]
struct OptimizeReport<'a> {
    objective: &'a crate::config::ObjectiveSpec,
    space: &'a crate::config::SpaceSpec,
    value: f64,
    violation: bool,
    parameters: Vec<Parameter>,
    evaluations: usize,
    restart: usize,
    restarts: usize,
    seed: u64,
}

pub fn optimize(config: &RunConfig, r: &Resolved) -> Outcome {
    let o = &config.optimize;
    let opt = OptimizerConfig {
        restarts: o.restarts,
        seed: o.seed,
        step_floor: o.step_floor,
        max_evaluations: o.max_evaluations,
        ..OptimizerConfig::default()
    };
    let best = maximize_quantity(&r.rho, &r.objective, &r.space, &opt)?;
    let parameters = best
        .labels
        .iter()
        .zip(&best.argmax)
        .map(|(name, &value)| Parameter { name: name.clone(), value: sig(value) })
        .collect();
    let report = OptimizeReport {
        objective: &o.objective,
        space: &o.space,
        value: sig(best.value),
        violation: is_violation(best.value),
        parameters,
        evaluations: best.evaluations,
        restart: best.restart,
        restarts: o.restarts,
        seed: o.seed,
    };
    write_json(config.output.as_ref(), &report)
}

#[derive(Serialize)]
struct CorrelatorSummary {
    settings: [u8; 3],
    mean: f64,
    standard_error: f64,
    samples: u64,
}

#[derive(Serialize)]
struct SampleSummary {
    quantity: String,
    estimate: f64,
    standard_error: f64,
    rounds: u64,
    seed: u64,
    correlators: Vec<CorrelatorSummary>,
}

/// Setting or outcome bits in slot order `A1 A2 B1 B2 C1 C2`.
fn bits(index: usize) -> String {
    (0..6).map(|k| if index >> k & 1 == 1 { '1' } else { '0' }).collect()
}

pub fn sample(config: &RunConfig, r: &Resolved) -> Outcome {
    let s = &config.sample;
    let rounds = sample_rounds(&r.rho, &r.plan, s.rounds, s.seed)?;
    let est = estimate_from_rounds(&rounds, s.omega, s.seed)?;
    let summary = SampleSummary {
        quantity: est.quantity.clone(),
        estimate: sig(est.estimate),
        standard_error: sig(est.standard_error),
        rounds: est.rounds,
        seed: est.seed,
        correlators: est
            .correlators
            .iter()
            .map(|c| CorrelatorSummary {
                settings: [c.settings.0, c.settings.1, c.settings.2],
                mean: sig(c.mean),
                standard_error: sig(c.standard_error),
                samples: c.samples,
            })
            .collect(),
    };
    write_json(config.output.as_ref(), &summary)?;
    if let Some(p) = &s.log {
        write_to(Some(p), |w| {
            writeln!(w, "round,choice_bits,outcome_bits")?;
            for (k, t) in rounds.iter().enumerate() {
                writeln!(w, "{k},{},{}", bits(t.choice.index()), bits(t.record.index()))?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

fn strategy_text(s: &DeterministicStrategy) -> String {
    let side = |v: [i8; 2]| format!("({:+},{:+})", v[0], v[1]);
    format!("alice={} bob={} charlie={}", side(s.alice), side(s.bob), side(s.charlie))
}

pub fn lhv(config: &RunConfig) -> Outcome {
    let bound = classical_max();
    debug_assert_eq!(bound.value, LHV_BOUND);
    let strategies = DeterministicStrategy::all().count();
    write_to(config.output.as_ref(), |w| {
        writeln!(w, "bound {}", bound.value)?;
        writeln!(w, "strategies {strategies}")?;
        writeln!(w, "achieving {}", bound.achieving)?;
        writeln!(w, "witness {}", strategy_text(&bound.witness))
    })
}
