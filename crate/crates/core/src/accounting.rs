//! Budget bookkeeping: communication rounds, per-sample gradient-equivalents,
//! budget matching between methods and trace export.
//!
//! One communication round is one exchange of an `O(d)` vector between the
//! server and the active clients (send and receive together). A full pass over
//! a client's `n_i` samples, whether gradient, Hessian-vector product or loss,
//! costs `n_i` per-sample gradient-equivalents.

use std::io::{Read, Write};
use std::ops::{Add, AddAssign};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::ParameterVector;
use crate::orchestrator::{Method, MethodConfig};

/// The exchange phases a round can consist of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CommPhase {
    /// Broadcast parameters, gather local gradients (and broadcast their mean).
    GradientExchange,
    /// Gather update vectors or local weights.
    UpdateGather,
    /// Broadcast the averaged update, gather candidate losses.
    LineSearchExchange,
}

impl CommPhase {
    pub const ALL: [CommPhase; 3] = [
        CommPhase::GradientExchange,
        CommPhase::UpdateGather,
        CommPhase::LineSearchExchange,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CostCounters {
    pub comm_rounds: u64,
    /// Total per-sample gradient-equivalents: the sum of the three breakdown fields.
    pub grad_evals: u64,
    pub server_steps: u64,
    pub gradient_evals: u64,
    pub hvp_evals: u64,
    pub loss_evals: u64,
}

impl CostCounters {
    pub fn record_comm_round(&mut self, _phase: CommPhase) {
        self.comm_rounds += 1;
    }

    pub fn charge_gradient(&mut self, samples: u64) {
        self.gradient_evals += samples;
        self.grad_evals += samples;
    }

    pub fn charge_hvp(&mut self, samples: u64) {
        self.hvp_evals += samples;
        self.grad_evals += samples;
    }

    pub fn charge_loss(&mut self, samples: u64) {
        self.loss_evals += samples;
        self.grad_evals += samples;
    }

    pub fn record_server_step(&mut self) {
        self.server_steps += 1;
    }
}

impl AddAssign for CostCounters {
    fn add_assign(&mut self, rhs: Self) {
        self.comm_rounds += rhs.comm_rounds;
        self.grad_evals += rhs.grad_evals;
        self.server_steps += rhs.server_steps;
        self.gradient_evals += rhs.gradient_evals;
        self.hvp_evals += rhs.hvp_evals;
        self.loss_evals += rhs.loss_evals;
    }
}

impl Add for CostCounters {
    type Output = CostCounters;

    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

/// A client excluded from a round's aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientFailure {
    pub client_id: usize,
    pub reason: String,
}

/// One row of a metrics trace. Row 0 holds the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub round: usize,
    pub comm_rounds: u64,
    pub grad_evals: u64,
    /// Full-population objective, never charged to the budget.
    pub global_loss: f64,
    /// Server step size; `None` for rounds that average weights or did not step.
    pub step_size: Option<f64>,
    pub weights: ParameterVector,
    pub active: Vec<usize>,
    pub failures: Vec<ClientFailure>,
    /// Too many active clients failed; weights left unchanged.
    pub degenerate: bool,
    pub cg_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub method: Method,
    pub seed: u64,
    pub active_clients: usize,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn final_loss(&self) -> Option<f64> {
        self.records.last().map(|r| r.global_loss)
    }

    pub fn rounds(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.global_loss).collect()
    }

    /// Divergence report: rounds with failed clients, degenerate rounds, a
    /// non-finite loss, or a global loss above the initial one.
    pub fn divergence(&self) -> DivergenceReport {
        let initial = self
            .records
            .first()
            .map_or(f64::INFINITY, |r| r.global_loss);
        let mut report = DivergenceReport::default();
        for r in self.records.iter().skip(1) {
            for f in &r.failures {
                report.client_failures.push((r.round, f.clone()));
            }
            if r.degenerate {
                report.degenerate_rounds.push(r.round);
            }
            if !r.global_loss.is_finite() || r.global_loss > initial {
                report.loss_above_initial.push(r.round);
            }
        }
        report
    }

    pub fn csv_rows(&self) -> Vec<TraceRow> {
        self.records
            .iter()
            .map(|r| TraceRow {
                round: r.round,
                comm_rounds: r.comm_rounds,
                grad_evals: r.grad_evals,
                global_loss: r.global_loss,
                step_size: r.step_size,
                method: self.method.name().to_string(),
                seed: self.seed,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DivergenceReport {
    pub client_failures: Vec<(usize, ClientFailure)>,
    pub degenerate_rounds: Vec<usize>,
    pub loss_above_initial: Vec<usize>,
}

impl DivergenceReport {
    pub fn diverged(&self) -> bool {
        !(self.client_failures.is_empty()
            && self.degenerate_rounds.is_empty()
            && self.loss_above_initial.is_empty())
    }
}

/// Returns a FedAvg configuration whose local step count `l` makes `l · n_i`
/// the nearest match to the reference's mean per-client per-round
/// gradient-equivalents.
pub fn match_budget(
    reference: &Trace,
    samples_per_client: f64,
    template: &MethodConfig,
) -> Result<MethodConfig> {
    let (first, last) = match (reference.records.first(), reference.records.last()) {
        (Some(f), Some(l)) if reference.records.len() >= 2 => (f, l),
        _ => return Err(Error::EmptyTrace),
    };
    if samples_per_client.is_nan() || samples_per_client <= 0.0 || reference.active_clients == 0 {
        return Err(Error::InvalidConfig(
            "budget matching needs positive client size and active count".into(),
        ));
    }
    let per_client_per_round = (last.grad_evals - first.grad_evals) as f64
        / (reference.rounds() as f64 * reference.active_clients as f64);
    let steps = (per_client_per_round / samples_per_client).round().max(1.0) as usize;
    let mut cfg = template.clone();
    cfg.method = Method::FedAvg;
    cfg.local.local_steps = steps;
    Ok(cfg)
}

/// CSV-visible part of a trace record.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub round: usize,
    pub comm_rounds: u64,
    pub grad_evals: u64,
    pub global_loss: f64,
    pub step_size: Option<f64>,
    pub method: String,
    pub seed: u64,
}

pub const TRACE_HEADER: [&str; 7] = [
    "round",
    "comm_rounds",
    "grad_evals",
    "global_loss",
    "step_size",
    "method",
    "seed",
];

/// 17 significant digits, exact for `f64`.
pub fn format_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

pub fn write_trace_csv<W: Write>(trace: &Trace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for row in trace.csv_rows() {
        w.write_record([
            row.round.to_string(),
            row.comm_rounds.to_string(),
            row.grad_evals.to_string(),
            format_real(row.global_loss),
            row.step_size.map(format_real).unwrap_or_default(),
            row.method,
            row.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn export_trace(trace: &Trace, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
    write_trace_csv(trace, std::io::BufWriter::new(file))
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize) -> Result<T> {
    let raw = rec.get(idx).unwrap_or("");
    raw.parse().map_err(|_| {
        Error::InvalidConfig(format!(
            "trace column `{}` has unparsable value `{raw}`",
            TRACE_HEADER[idx]
        ))
    })
}

pub fn read_trace_csv<R: Read>(input: R) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(TRACE_HEADER.iter().copied()) {
        return Err(Error::InvalidConfig(format!(
            "unexpected trace header {header:?}"
        )));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let step = rec.get(4).unwrap_or("");
        rows.push(TraceRow {
            round: parse_field(&rec, 0)?,
            comm_rounds: parse_field(&rec, 1)?,
            grad_evals: parse_field(&rec, 2)?,
            global_loss: parse_field(&rec, 3)?,
            step_size: if step.is_empty() {
                None
            } else {
                Some(parse_field(&rec, 4)?)
            },
            method: rec.get(5).unwrap_or("").to_string(),
            seed: parse_field(&rec, 6)?,
        });
    }
    Ok(rows)
}

/// `<method>_<dataset>_<seed>.csv`
pub fn trace_file_name(method: Method, dataset: &str, seed: u64) -> String {
    format!("{}_{}_{}.csv", method.name(), dataset, seed)
}
