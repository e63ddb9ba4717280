use std::time::Instant;

use super::config::{ExperimentConfig, ExperimentKind, QosSpec};
use super::deploy::{deploy_in_rect, deploy_users, trial_rng};
use super::table::{
    describe, histogram, AssignmentRow, HistogramRow, NetworkSummaryRow, ResultRow, ResultTable,
    SummaryRow, TimingRow, TraceRow,
};
use crate::channel::{channel_gain, LinkGeometry, Position};
use crate::error::{Error, Result};
use crate::network::{
    assign_users, cell_radius, cell_throughput, classify, color_grid, AreaLabel, AssignStatus,
    BandwidthPolicy, Coverage, GridLayout, NetworkScene,
};
use crate::noma::{LinkBudget, QosTargets, UserSet};
use crate::optimizer::{
    brute_force_oracle, maximize_min_rate, maximize_sum_rate, Objective, SolveResult, SolverConfig,
};

/// Everything one experiment produces. Only `timings` depends on the clock.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub experiment: ExperimentKind,
    pub table: ResultTable,
    pub summary: Vec<SummaryRow>,
    pub histogram: Vec<HistogramRow>,
    pub traces: Vec<TraceRow>,
    pub timings: Vec<TimingRow>,
    pub assignments: Vec<AssignmentRow>,
    pub network_summary: Vec<NetworkSummaryRow>,
}

impl RunOutput {
    fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            table: ResultTable::default(),
            summary: Vec::new(),
            histogram: Vec::new(),
            traces: Vec::new(),
            timings: Vec::new(),
            assignments: Vec::new(),
            network_summary: Vec::new(),
        }
    }

    /// True when at least one instance was solved.
    pub fn any_feasible(&self) -> bool {
        self.table.rows.iter().any(|r| r.feasible)
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    match cfg.experiment {
        ExperimentKind::Fig2 => run_fig2(cfg),
        ExperimentKind::Fig3 => run_fig3(cfg),
        ExperimentKind::Fig4 => run_fig4(cfg),
        ExperimentKind::MaxminExample => run_maxmin_example(cfg),
        ExperimentKind::NetworkDemo => run_network_demo(cfg),
    }
}

pub fn run_fig2(cfg: &ExperimentConfig) -> Result<RunOutput> {
    monte_carlo(cfg, Objective::Sum, true)
}

pub fn run_fig3(cfg: &ExperimentConfig) -> Result<RunOutput> {
    monte_carlo(cfg, Objective::Sum, false)
}

pub fn run_fig4(cfg: &ExperimentConfig) -> Result<RunOutput> {
    monte_carlo(cfg, Objective::Min, false)
}

fn solve(
    criterion: Objective,
    budget: &LinkBudget,
    users: &UserSet,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    match criterion {
        Objective::Sum => maximize_sum_rate(budget, users, cfg),
        Objective::Min => maximize_min_rate(budget, users, cfg),
    }
}

fn statistic(criterion: Objective) -> &'static str {
    match criterion {
        Objective::Sum => "sum_rate",
        Objective::Min => "min_rate",
    }
}

/// Identifies one sweep point in the output rows.
#[derive(Clone, Copy)]
struct Point<'a> {
    experiment: ExperimentKind,
    tsnr_db: f64,
    epsilon: f64,
    k: usize,
    qos: &'a QosSpec,
}

impl Point<'_> {
    fn rows(
        &self,
        solver: &'static str,
        trial: usize,
        users: &UserSet,
        outcome: Option<&SolveResult>,
    ) -> Vec<ResultRow> {
        let targets = users.targets().as_slice();
        users
            .gains()
            .iter()
            .zip(targets)
            .enumerate()
            .map(|(i, (&gain, &target))| ResultRow {
                experiment: self.experiment.name().to_string(),
                solver,
                trial,
                tsnr_db: self.tsnr_db,
                epsilon: self.epsilon,
                k: self.k,
                user_index: i + 1,
                gain,
                target,
                rate: outcome.map(|r| r.rates.as_slice()[i]),
                sum_rate: outcome.map(|r| r.rates.sum()),
                min_rate: outcome.map(|r| r.rates.min()),
                feasible: outcome.is_some(),
            })
            .collect()
    }

    fn summary(
        &self,
        solver: &'static str,
        criterion: Objective,
        trials: usize,
        values: &[f64],
    ) -> SummaryRow {
        let (mean, variance, min, max) = describe(values);
        SummaryRow {
            experiment: self.experiment.name().to_string(),
            solver,
            tsnr_db: self.tsnr_db,
            epsilon: self.epsilon,
            k: self.k,
            qos: self.qos.to_string(),
            statistic: statistic(criterion),
            trials,
            feasible: values.len(),
            infeasible: trials - values.len(),
            mean,
            variance,
            min,
            max,
        }
    }

    fn traces(&self, trial: usize, result: &SolveResult) -> Vec<TraceRow> {
        result
            .trace
            .iter()
            .flatten()
            .map(|e| TraceRow {
                experiment: self.experiment.name().to_string(),
                trial,
                tsnr_db: self.tsnr_db,
                epsilon: self.epsilon,
                k: self.k,
                qos: self.qos.to_string(),
                beta: e.beta,
                iteration: e.iteration,
                objective: e.objective,
                step: e.step,
                min_rate: e.min_rate,
            })
            .collect()
    }

    fn timing(&self, solver: &'static str, trial: usize, started: Instant) -> TimingRow {
        TimingRow {
            experiment: self.experiment.name().to_string(),
            solver,
            trial,
            tsnr_db: self.tsnr_db,
            epsilon: self.epsilon,
            k: self.k,
            qos: self.qos.to_string(),
            runtime_ms: started.elapsed().as_secs_f64() * 1e3,
        }
    }
}

/// Sorted model gains for one trial's users in the single-cell setting.
fn trial_gains(cfg: &ExperimentConfig, trial: usize, k: usize) -> Result<Vec<f64>> {
    let p = &cfg.physical;
    let params = p.channel_params()?;
    let radius = cell_radius(&params, p.vap_height_m, p.user_height_m)?;
    let vap = Position::new(0.0, 0.0, p.vap_height_m);
    let scale = cfg.model.gain_scale.factor();
    let mut gains = deploy_users(cfg.seed, trial as u64, k, radius, p.user_height_m)
        .into_iter()
        .map(|u| Ok(channel_gain(&LinkGeometry::new(vap, u)?, &params)? * scale))
        .collect::<Result<Vec<f64>>>()?;
    gains.sort_by(f64::total_cmp);
    Ok(gains)
}

/// Sweeps (K, ε, TSNR, T) and solves `trials` random single-cell drops at
/// each point. Drops depend only on (seed, trial), so every sweep point sees
/// the same user positions.
fn monte_carlo(
    cfg: &ExperimentConfig,
    criterion: Objective,
    with_histogram: bool,
) -> Result<RunOutput> {
    let mut out = RunOutput::new(cfg.experiment);
    let s = &cfg.sweep;
    for &k in &s.users {
        let drops = (0..cfg.trials)
            .map(|t| trial_gains(cfg, t, k))
            .collect::<Result<Vec<_>>>()?;
        for &epsilon in &s.epsilon {
            for &tsnr_db in &s.tsnr_db {
                let budget = cfg.budget(tsnr_db, epsilon)?;
                for qos in &s.qos {
                    let point = Point {
                        experiment: cfg.experiment,
                        tsnr_db,
                        epsilon,
                        k,
                        qos,
                    };
                    let targets = qos.targets(k).expect("validated against every K");
                    let mut values = Vec::with_capacity(cfg.trials);
                    for (trial, gains) in drops.iter().enumerate() {
                        let users = UserSet::new(gains.clone(), QosTargets(targets.clone()))?;
                        let mut solver_cfg = cfg.solver.clone();
                        solver_cfg.record_trace = cfg.output.trace && trial == 0;
                        let started = Instant::now();
                        let outcome = match solve(criterion, &budget, &users, &solver_cfg) {
                            Ok(r) => Some(r),
                            Err(Error::Infeasible { .. }) => None,
                            Err(e) => return Err(e),
                        };
                        if cfg.output.timing {
                            out.timings.push(point.timing("gp", trial, started));
                        }
                        if let Some(r) = &outcome {
                            values.push(r.objective);
                            out.traces.extend(point.traces(trial, r));
                        }
                        out.table
                            .rows
                            .extend(point.rows("gp", trial, &users, outcome.as_ref()));
                    }
                    if with_histogram {
                        for (lo, hi, count) in histogram(&values, s.histogram_bin) {
                            out.histogram.push(HistogramRow {
                                experiment: cfg.experiment.name().to_string(),
                                tsnr_db,
                                epsilon,
                                k,
                                bin_lo: lo,
                                bin_hi: hi,
                                count,
                            });
                        }
                    }
                    out.summary
                        .push(point.summary("gp", criterion, cfg.trials, &values));
                }
            }
        }
    }
    out.table.audit()?;
    Ok(out)
}

/// The fixed three-user instance under every (ε, TSNR, T) of the sweep,
/// solved by max-min gradient projection and by the grid oracle. The
/// `trial` column numbers the target vectors.
pub fn run_maxmin_example(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::new(cfg.experiment);
    let s = &cfg.sweep;
    let scale = cfg.model.gain_scale.factor();
    let gains: Vec<f64> = s.gains_1e4.iter().map(|g| g * 1e-4 * scale).collect();
    let k = gains.len();
    for &epsilon in &s.epsilon {
        for &tsnr_db in &s.tsnr_db {
            let budget = cfg.budget(tsnr_db, epsilon)?;
            for (case, qos) in s.qos.iter().enumerate() {
                let point = Point {
                    experiment: cfg.experiment,
                    tsnr_db,
                    epsilon,
                    k,
                    qos,
                };
                let targets = qos.targets(k).expect("validated against K");
                let users = UserSet::new(gains.clone(), QosTargets(targets))?;
                for solver in ["gp", "oracle"] {
                    let started = Instant::now();
                    let outcome = match solver {
                        "gp" => maximize_min_rate(&budget, &users, &cfg.solver),
                        _ => {
                            brute_force_oracle(&budget, &users, Objective::Min, s.oracle_grid_step)
                        }
                    };
                    let outcome = match outcome {
                        Ok(r) => Some(r),
                        Err(Error::Infeasible { .. }) => None,
                        Err(e) => return Err(e),
                    };
                    if cfg.output.timing {
                        out.timings.push(point.timing(solver, case, started));
                    }
                    let values: Vec<f64> = outcome.iter().map(|r| r.objective).collect();
                    if let Some(r) = &outcome {
                        out.traces.extend(point.traces(case, r));
                    }
                    out.table
                        .rows
                        .extend(point.rows(solver, case, &users, outcome.as_ref()));
                    out.summary
                        .push(point.summary(solver, Objective::Min, 1, &values));
                }
            }
        }
    }
    out.table.audit()?;
    Ok(out)
}

/// The colored grid scene described by the configuration, without users.
pub fn network_scene(cfg: &ExperimentConfig) -> Result<NetworkScene> {
    let p = &cfg.physical;
    let n = &cfg.network;
    let scene = NetworkScene::grid(
        GridLayout {
            rows: n.rows,
            cols: n.cols,
            spacing_m: n.spacing_m,
        },
        p.vap_height_m,
        p.user_height_m,
        p.bandwidth_hz,
        p.channel_params()?,
        cfg.budget(cfg.sweep.tsnr_db[0], cfg.sweep.epsilon[0])?,
        cfg.model.gain_scale,
        BandwidthPolicy {
            dedicated_fraction: n.dedicated_fraction,
            dedicated_cap: n.dedicated_cap,
        },
    )?;
    color_grid(scene)
}

/// Drops users over the service area, assigns them and solves every cell.
/// Uses the first TSNR, ε and target of the sweep.
pub fn run_network_demo(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::new(cfg.experiment);
    let base = network_scene(cfg)?;
    let area = base
        .service_area()
        .expect("grid scenes have a service area");
    let qos = &cfg.sweep.qos[0];
    let QosSpec::Uniform(target) = *qos else {
        return Err(Error::config(
            "sweep.qos",
            "the network demo takes a single uniform target",
        ));
    };
    let scale = base.gain_scale.factor();
    let colors: Vec<_> = base.vaps.iter().map(|v| v.frequency_color).collect();

    for trial in 0..cfg.trials {
        let mut rng = trial_rng(cfg.seed, trial as u64);
        let users = deploy_in_rect(
            &mut rng,
            cfg.network.users,
            area,
            cfg.physical.user_height_m,
        );
        let scene = base.clone().with_users(users);
        let assignment = assign_users(&scene)?;
        let throughput = cell_throughput(
            &scene,
            &assignment,
            cfg.network.criterion,
            target,
            &cfg.solver,
        );

        let mut class_counts = [0usize; 4];
        let mut holes = 0;
        let mut violations = 0;
        for (u, a) in assignment.users.iter().enumerate() {
            let coverage = classify(&scene.users[u], &scene);
            match &coverage {
                Coverage::Hole => holes += 1,
                Coverage::Covered(c) => class_counts[c.label as usize] += 1,
            }
            if let (Coverage::Covered(c), Some(v), false, AssignStatus::Assigned) =
                (&coverage, a.vap, a.dedicated, a.status)
            {
                let same = c
                    .visible_vaps
                    .iter()
                    .filter(|w| colors[**w] == colors[v])
                    .count();
                if same != 1 {
                    violations += 1;
                }
            }
            let rate = throughput.users[u].as_ref();
            out.assignments.push(AssignmentRow {
                trial,
                user_id: u,
                x: scene.users[u].x,
                y: scene.users[u].y,
                class: a
                    .class
                    .map_or_else(|| "hole".to_string(), |c| c.to_string()),
                vap_id: a.vap,
                dedicated: a.dedicated,
                status: format!("{:?}", a.status),
                bandwidth_hz: a.bandwidth_hz,
                spectral_efficiency: rate.map(|r| r.spectral_efficiency),
                rate: rate.map(|r| r.throughput_bps),
            });
        }

        let point = Point {
            experiment: cfg.experiment,
            tsnr_db: cfg.sweep.tsnr_db[0],
            epsilon: cfg.sweep.epsilon[0],
            k: 0,
            qos,
        };
        let mut conservation = 0.0f64;
        for (vap, load) in assignment.per_vap.iter().enumerate() {
            let total = load.shared_bandwidth_hz + load.carve_outs_hz.iter().sum::<f64>();
            conservation = conservation.max((total - scene.vaps[vap].bandwidth_hz).abs());
            let mut members: Vec<(usize, f64)> = load
                .shared_users
                .iter()
                .map(|&u| (u, scene.gain(vap, &scene.users[u]) * scale))
                .collect();
            members.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            let mut cells: Vec<Vec<(usize, f64)>> = vec![members];
            cells.extend(
                load.dedicated_users
                    .iter()
                    .map(|&u| vec![(u, scene.gain(vap, &scene.users[u]) * scale)]),
            );
            for cell in cells.into_iter().filter(|c| !c.is_empty()) {
                let rates: Option<Vec<f64>> = cell
                    .iter()
                    .map(|(u, _)| throughput.users[*u].as_ref().map(|r| r.spectral_efficiency))
                    .collect();
                let k = cell.len();
                for (i, (_, gain)) in cell.iter().enumerate() {
                    out.table.rows.push(ResultRow {
                        experiment: cfg.experiment.name().to_string(),
                        solver: "gp",
                        trial,
                        tsnr_db: point.tsnr_db,
                        epsilon: point.epsilon,
                        k,
                        user_index: i + 1,
                        gain: *gain,
                        target,
                        rate: rates.as_ref().map(|r| r[i]),
                        sum_rate: rates.as_ref().map(|r| r.iter().sum()),
                        min_rate: rates
                            .as_ref()
                            .map(|r| r.iter().copied().fold(f64::INFINITY, f64::min)),
                        feasible: rates.is_some(),
                    });
                }
            }
        }

        let dedicated = assignment.users.iter().filter(|a| a.dedicated).count();
        let exhausted = assignment
            .users
            .iter()
            .filter(|a| a.status == AssignStatus::CarveOutExhausted)
            .count();
        let total_bps: f64 = throughput
            .users
            .iter()
            .flatten()
            .map(|r| r.throughput_bps)
            .sum();
        let mut metrics: Vec<(String, f64)> = AreaLabel::ALL
            .iter()
            .map(|l| (format!("users_{l}"), class_counts[*l as usize] as f64))
            .collect();
        metrics.extend([
            ("coverage_holes".to_string(), holes as f64),
            ("dedicated_users".to_string(), dedicated as f64),
            ("carve_out_exhausted".to_string(), exhausted as f64),
            ("interference_violations".to_string(), violations as f64),
            (
                "failed_cells".to_string(),
                throughput.failed_cells.len() as f64,
            ),
            ("bandwidth_conservation_error_hz".to_string(), conservation),
            ("total_throughput_bps".to_string(), total_bps),
        ]);
        out.network_summary.extend(
            metrics
                .into_iter()
                .map(|(metric, value)| NetworkSummaryRow {
                    trial,
                    metric,
                    value,
                }),
        );
    }
    out.table.audit()?;
    Ok(out)
}
