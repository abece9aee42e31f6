//! The server round loop shared by all methods.
//!
//! | method                   | global gradient | server update          | comm. rounds |
//! |--------------------------|-----------------|------------------------|--------------|
//! | `Giant`                  | yes             | global backtracking    | 3            |
//! | `GiantLocalGlobalLS`     | yes             | global backtracking    | 3            |
//! | `GiantLocalLocalLS`      | yes             | weight averaging       | 2            |
//! | `LocalNewtonGlobalLS`    | no              | global argmin          | 2            |
//! | `LocalNewton`            | no              | weight averaging       | 1            |
//! | `FedAvg`                 | no              | weight averaging       | 1            |

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::accounting::{ClientFailure, CommPhase, CostCounters, Trace, TraceRecord};
use crate::cg::CgConfig;
use crate::error::{Error, Result};
use crate::linalg::ParameterVector;
use crate::line_search::{global_argmin, global_backtracking, CandidateLosses, StepSizeSet};
use crate::local::{self, GlobalGradient, LocalOutput, LocalResult, LocalStepConfig};
use crate::model::{aggregate_loss, RegularizedObjective};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Giant,
    GiantLocalGlobalLS,
    GiantLocalLocalLS,
    LocalNewtonGlobalLS,
    LocalNewton,
    FedAvg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServerUpdate {
    GlobalBacktracking,
    WeightAveraging,
    GlobalArgmin,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Giant,
        Method::GiantLocalGlobalLS,
        Method::GiantLocalLocalLS,
        Method::LocalNewtonGlobalLS,
        Method::LocalNewton,
        Method::FedAvg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Giant => "giant",
            Method::GiantLocalGlobalLS => "giant-local-global-ls",
            Method::GiantLocalLocalLS => "giant-local-local-ls",
            Method::LocalNewtonGlobalLS => "localnewton-global-ls",
            Method::LocalNewton => "localnewton",
            Method::FedAvg => "fedavg",
        }
    }

    pub fn uses_global_gradient(self) -> bool {
        matches!(
            self,
            Method::Giant | Method::GiantLocalGlobalLS | Method::GiantLocalLocalLS
        )
    }

    pub fn server_update(self) -> ServerUpdate {
        match self {
            Method::Giant | Method::GiantLocalGlobalLS => ServerUpdate::GlobalBacktracking,
            Method::LocalNewtonGlobalLS => ServerUpdate::GlobalArgmin,
            Method::GiantLocalLocalLS | Method::LocalNewton | Method::FedAvg => {
                ServerUpdate::WeightAveraging
            }
        }
    }

    pub fn has_global_line_search(self) -> bool {
        self.server_update() != ServerUpdate::WeightAveraging
    }

    pub fn is_second_order(self) -> bool {
        self != Method::FedAvg
    }

    /// Communication rounds per server step.
    pub fn comm_rounds_per_step(self) -> u64 {
        self.comm_phases().len() as u64
    }

    pub fn comm_phases(self) -> Vec<CommPhase> {
        let mut phases = Vec::with_capacity(3);
        if self.uses_global_gradient() {
            phases.push(CommPhase::GradientExchange);
        }
        phases.push(CommPhase::UpdateGather);
        if self.has_global_line_search() {
            phases.push(CommPhase::LineSearchExchange);
        }
        phases
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        Method::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| {
                let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
                Error::InvalidConfig(format!(
                    "unknown method `{s}`, expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodConfig {
    pub method: Method,
    pub local: LocalStepConfig,
    pub cg: CgConfig,
    pub ls: StepSizeSet,
    /// Poll a freshly sampled client set for the server line search.
    pub resample_for_linesearch: bool,
    /// Charge loss-only passes as `n_i` gradient-equivalents.
    pub charge_loss_evaluations: bool,
}

impl MethodConfig {
    /// Defaults for `method`; only `LocalNewtonGlobalLS` resamples its
    /// line-search clients by default.
    pub fn new(method: Method) -> Self {
        MethodConfig {
            method,
            local: LocalStepConfig::default(),
            cg: CgConfig::default(),
            ls: StepSizeSet::default(),
            resample_for_linesearch: method == Method::LocalNewtonGlobalLS,
            charge_loss_evaluations: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.local.validate()?;
        self.cg.validate()
    }
}

/// Uniform sample of `k` distinct client indices out of `total`, sorted.
pub fn sample_clients<R: Rng + ?Sized>(total: usize, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    if k < 1 || k > total {
        return Err(Error::InvalidConfig(format!(
            "cannot sample {k} active clients out of {total}"
        )));
    }
    let mut chosen = index::sample(rng, total, k).into_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

/// RNG for round `t`, independent of every other round.
pub fn round_rng(seed: u64, t: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t as u64);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundState {
    pub t: usize,
    pub w: ParameterVector,
    pub active: Vec<usize>,
    pub rng_seed: u64,
    pub counters: CostCounters,
}

impl RoundState {
    pub fn initial(d: usize, rng_seed: u64) -> Self {
        RoundState {
            t: 0,
            w: ParameterVector::zeros(d),
            active: Vec::new(),
            rng_seed,
            counters: CostCounters::default(),
        }
    }
}

/// Diagnostics of one server step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RoundReport {
    pub step_size: Option<f64>,
    pub failures: Vec<ClientFailure>,
    pub degenerate: bool,
    pub polled: Vec<usize>,
    pub cg_iterations: usize,
}

fn is_client_failure(err: &Error) -> bool {
    matches!(
        err,
        Error::Diverged(_) | Error::CgBreakdown { .. } | Error::NonFinite(_)
    )
}

struct GradientPhase {
    global: ParameterVector,
    local: Vec<ParameterVector>,
}

fn candidate_losses(
    clients: &[RegularizedObjective<'_>],
    polled: &[usize],
    w: &ParameterVector,
    u: &ParameterVector,
    set: &StepSizeSet,
    with_base: bool,
) -> Result<(CandidateLosses, Vec<f64>)> {
    let rows = polled
        .par_iter()
        .map(|&i| {
            let obj = &clients[i];
            let losses = set
                .candidates()
                .iter()
                .map(|&mu| obj.loss(&w.stepped(mu, u)))
                .collect::<Result<Vec<_>>>()?;
            let base = if with_base { obj.loss(w)? } else { f64::NAN };
            Ok((losses, base))
        })
        .collect::<Result<Vec<_>>>()?;
    let (per_client, base) = rows.into_iter().unzip();
    Ok((CandidateLosses { per_client }, base))
}

/// One server step: sample `S_t`, optional global-gradient exchange, local
/// solves, then the method's server update.
pub fn run_round(
    state: &RoundState,
    cfg: &MethodConfig,
    active_clients: usize,
    clients: &[RegularizedObjective<'_>],
) -> Result<(RoundState, RoundReport)> {
    cfg.validate()?;
    let d = state.w.dim();
    if let Some(c) = clients.iter().find(|c| c.data().dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: c.data().dim(),
        });
    }
    let t = state.t + 1;
    let mut rng = round_rng(state.rng_seed, t);
    let active = sample_clients(clients.len(), active_clients, &mut rng)?;
    let mut counters = state.counters;
    let w = &state.w;
    let method = cfg.method;

    let gradients = if method.uses_global_gradient() {
        let local = active
            .par_iter()
            .map(|&i| clients[i].gradient(w))
            .collect::<Result<Vec<_>>>()?;
        for &i in &active {
            counters.charge_gradient(clients[i].samples());
        }
        counters.record_comm_round(CommPhase::GradientExchange);
        let global = ParameterVector::mean(&local).expect("active set is nonempty");
        Some(GradientPhase { global, local })
    } else {
        None
    };

    let results: Vec<Result<LocalResult>> = active
        .par_iter()
        .enumerate()
        .map(|(slot, &i)| {
            let obj = &clients[i];
            let grads = gradients.as_ref().map(|g| GlobalGradient {
                global: &g.global,
                local: &g.local[slot],
                active: active.len(),
            });
            match method {
                Method::Giant => local::giant_local(grads.unwrap().global, w, obj, &cfg.cg),
                Method::GiantLocalGlobalLS => {
                    local::giant_local_steps_global_ls(grads.unwrap(), w, obj, &cfg.cg, &cfg.local)
                }
                Method::GiantLocalLocalLS => local::giant_local_steps_local_ls(
                    grads.unwrap(),
                    w,
                    obj,
                    &cfg.cg,
                    &cfg.local,
                    &cfg.ls,
                ),
                Method::LocalNewtonGlobalLS => {
                    local::localnewton_global_ls(w, obj, &cfg.cg, &cfg.local)
                }
                Method::LocalNewton => {
                    local::localnewton_local(w, obj, &cfg.cg, &cfg.local, &cfg.ls)
                }
                Method::FedAvg => {
                    let stream = ((t as u64) << 32) | obj.data().client_id() as u64;
                    local::fedavg_local(w, obj, &cfg.local, stream)
                }
            }
        })
        .collect();
    counters.record_comm_round(CommPhase::UpdateGather);

    // ordered merge by active-set position
    let mut report = RoundReport::default();
    let mut succeeded = Vec::with_capacity(active.len());
    let mut outputs = Vec::with_capacity(active.len());
    for (&i, res) in active.iter().zip(results) {
        match res {
            Ok(r) => {
                counters += r.counters_delta;
                report.cg_iterations += r.cg_iterations;
                succeeded.push(i);
                outputs.push(r.kind);
            }
            Err(e) if is_client_failure(&e) => report.failures.push(ClientFailure {
                client_id: clients[i].data().client_id(),
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }

    let mut next_w = w.clone();
    if report.failures.len() * 2 >= active.len() {
        report.degenerate = true;
    } else {
        let mean = ParameterVector::mean(outputs.iter().map(LocalOutput::vector))
            .expect("at least one client succeeded");
        match method.server_update() {
            ServerUpdate::WeightAveraging => {
                next_w = mean;
            }
            update => {
                let polled = if cfg.resample_for_linesearch {
                    sample_clients(clients.len(), active_clients, &mut rng)?
                } else {
                    succeeded.clone()
                };
                let with_base = update == ServerUpdate::GlobalBacktracking;
                let (table, base) =
                    candidate_losses(clients, &polled, w, &mean, &cfg.ls, with_base)?;
                if cfg.charge_loss_evaluations {
                    let passes = cfg.ls.len() as u64 + u64::from(with_base);
                    for &i in &polled {
                        counters.charge_loss(passes * clients[i].samples());
                    }
                }
                counters.record_comm_round(CommPhase::LineSearchExchange);
                let mu = if with_base {
                    let base_loss = base.iter().sum::<f64>() / base.len() as f64;
                    let global = &gradients
                        .as_ref()
                        .expect("GIANT rows exchange gradients")
                        .global;
                    global_backtracking(&table, base_loss, mean.dot(global), &cfg.ls)?
                } else {
                    global_argmin(&table, &cfg.ls)?
                };
                next_w = w.stepped(mu, &mean);
                report.step_size = Some(mu);
                report.polled = polled;
            }
        }
        counters.record_server_step();
    }

    Ok((
        RoundState {
            t,
            w: next_w,
            active,
            rng_seed: state.rng_seed,
            counters,
        },
        report,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub method: MethodConfig,
    pub rounds: usize,
    pub active_clients: usize,
    pub seed: u64,
}

/// Runs `rounds` server steps from `w = 0`. Row `t` of the trace holds the
/// full-population objective after `t` steps; its evaluation is never charged.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    clients: &[RegularizedObjective<'_>],
) -> Result<Trace> {
    let d = clients.first().ok_or(Error::EmptyClientSet)?.data().dim();
    let mut state = RoundState::initial(d, cfg.seed);
    let mut records = vec![TraceRecord {
        round: 0,
        comm_rounds: 0,
        grad_evals: 0,
        global_loss: aggregate_loss(clients, &state.w)?,
        step_size: None,
        weights: state.w.clone(),
        active: Vec::new(),
        failures: Vec::new(),
        degenerate: false,
        cg_iterations: 0,
    }];
    for _ in 0..cfg.rounds {
        let (next, report) = run_round(&state, &cfg.method, cfg.active_clients, clients)?;
        state = next;
        records.push(TraceRecord {
            round: state.t,
            comm_rounds: state.counters.comm_rounds,
            grad_evals: state.counters.grad_evals,
            global_loss: aggregate_loss(clients, &state.w)?,
            step_size: report.step_size,
            weights: state.w.clone(),
            active: state.active.clone(),
            failures: report.failures,
            degenerate: report.degenerate,
            cg_iterations: report.cg_iterations,
        });
    }
    Ok(Trace {
        method: cfg.method.method,
        seed: cfg.seed,
        active_clients: cfg.active_clients,
        records,
    })
}
