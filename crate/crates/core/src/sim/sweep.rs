//! Many seeded runs over a list of parameter cells.

use rayon::prelude::*;

use crate::codec::{ProtocolParams, ResponsePolicy, Topology};
use crate::field::{FieldMatrix, PrimeField};
use crate::funcs::{bilinear_to_lcc_job, BilinearConstruction, PolyFunction, SplitPolicy};

use super::{
    data_rng, plaintext_oracle, plan_rng, random_instance, run_bilinear, run_protocol, AdversaryPlan, ByzantineMode,
    SimError,
};

/// What each run of a cell computes.
#[derive(Debug, Clone)]
pub enum Workload {
    /// `h` on a standard partition with uniform data.
    Standard(PolyFunction),
    /// `W U` for uniform `dim x dim` matrices through a bilinear construction.
    Bilinear { constr: BilinearConstruction, dim: usize },
}

/// Where each run's adversary plan comes from.
#[derive(Debug, Clone)]
pub enum PlanSource {
    /// Fresh uniform placement per run.
    Random {
        stragglers: usize,
        byzantine: usize,
        mode: ByzantineMode,
    },
    /// Cycled in order. A cell runs at least once per plan.
    Fixed(Vec<AdversaryPlan>),
}

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub label: String,
    pub params: ProtocolParams,
    pub workload: Workload,
    pub plans: PlanSource,
    pub policy: ResponsePolicy,
}

impl SweepCell {
    pub fn standard(label: impl Into<String>, params: ProtocolParams, h: PolyFunction, plans: PlanSource) -> Self {
        Self {
            label: label.into(),
            params,
            workload: Workload::Standard(h),
            plans,
            policy: ResponsePolicy::FirstThreshold,
        }
    }

    /// Derives the block shapes from the construction and `dim`.
    pub fn bilinear(
        label: impl Into<String>,
        field: PrimeField,
        topo: Topology,
        constr: BilinearConstruction,
        dim: usize,
        plans: PlanSource,
    ) -> Result<Self, SimError> {
        let parts = slab_shapes(field, topo.sources, dim)?;
        let u = FieldMatrix::zeros(field, dim, dim);
        let job = bilinear_to_lcc_job(&constr, &parts, &u, SplitPolicy::SplitAcrossSources)?;
        let params = ProtocolParams::new(field, topo, job.w_block, job.u_block, job.deg_h())?;
        Ok(Self {
            label: label.into(),
            params,
            workload: Workload::Bilinear { constr, dim },
            plans,
            policy: ResponsePolicy::FirstThreshold,
        })
    }

    fn runs(&self, trials: usize) -> usize {
        match &self.plans {
            _ if trials == 0 => 0,
            PlanSource::Fixed(plans) => trials.max(plans.len()),
            PlanSource::Random { .. } => trials,
        }
    }
}

fn slab_shapes(field: PrimeField, sources: usize, dim: usize) -> Result<Vec<FieldMatrix>, SimError> {
    if sources == 0 || !dim.is_multiple_of(sources) {
        return Err(SimError::Plan(format!(
            "{dim} columns cannot be split among {sources} sources"
        )));
    }
    Ok(vec![FieldMatrix::zeros(field, dim, dim / sources); sources])
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunRow {
    pub run_id: usize,
    pub cell: usize,
    pub seed: u64,
    /// Decoded and equal to the plaintext oracle.
    pub success: bool,
    /// Decoder reported success but the oracle disagrees.
    pub silent_wrong: bool,
    pub m_used: usize,
    pub u_src: usize,
    pub u_user: usize,
    pub d_elements: usize,
    pub ticks: u64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub label: String,
    pub runs: usize,
    pub successes: usize,
    pub silent_wrong: usize,
}

impl CellSummary {
    /// `1.0` for an empty cell.
    pub fn success_rate(&self) -> f64 {
        if self.runs == 0 {
            1.0
        } else {
            self.successes as f64 / self.runs as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<RunRow>,
    pub cells: Vec<CellSummary>,
}

impl SweepTable {
    pub fn all_succeeded(&self) -> bool {
        self.rows.iter().all(|r| r.success)
    }

    pub fn silent_wrong(&self) -> usize {
        self.rows.iter().filter(|r| r.silent_wrong).count()
    }
}

/// Runs every cell `trials` times with seeds `base_seed + run_id`. Failures
/// become rows; nothing is thrown. Runs execute in parallel and come back
/// ordered by `run_id`.
pub fn sweep(cells: &[SweepCell], trials: usize, base_seed: u64) -> SweepTable {
    let jobs: Vec<(usize, usize)> = cells
        .iter()
        .enumerate()
        .flat_map(|(c, cell)| (0..cell.runs(trials)).map(move |t| (c, t)))
        .collect();
    let rows: Vec<RunRow> = jobs
        .par_iter()
        .enumerate()
        .map(|(run_id, &(c, t))| {
            let seed = base_seed.wrapping_add(run_id as u64);
            let row = one_run(&cells[c], t, seed);
            match row {
                Ok(mut r) => {
                    r.run_id = run_id;
                    r.cell = c;
                    r
                }
                Err(e) => RunRow {
                    run_id,
                    cell: c,
                    seed,
                    success: false,
                    silent_wrong: false,
                    m_used: 0,
                    u_src: 0,
                    u_user: 0,
                    d_elements: 0,
                    ticks: 0,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let summaries = cells
        .iter()
        .enumerate()
        .map(|(c, cell)| {
            let mine = rows.iter().filter(|r| r.cell == c);
            CellSummary {
                label: cell.label.clone(),
                runs: mine.clone().count(),
                successes: mine.clone().filter(|r| r.success).count(),
                silent_wrong: mine.filter(|r| r.silent_wrong).count(),
            }
        })
        .collect();
    SweepTable { rows, cells: summaries }
}

fn one_run(cell: &SweepCell, trial: usize, seed: u64) -> Result<RunRow, SimError> {
    let params = &cell.params;
    let plan = match &cell.plans {
        PlanSource::Random {
            stragglers,
            byzantine,
            mode,
        } => AdversaryPlan::random(params.workers(), *stragglers, *byzantine, *mode, &mut plan_rng(seed))?,
        PlanSource::Fixed(plans) => plans[trial % plans.len()].clone(),
    };
    let mut rng = data_rng(seed);
    let (decoded, correct, report) = match &cell.workload {
        Workload::Standard(h) => {
            let (sources, user) = random_instance(params, &mut rng)?;
            let expected = plaintext_oracle(params.field(), &sources, &user, h)?;
            let report = run_protocol(params, &sources, &user, h, &plan, seed, cell.policy)?;
            let correct = report.results.as_ref().is_ok_and(|r| *r == expected);
            (report.results.is_ok(), correct, report)
        }
        Workload::Bilinear { constr, dim } => {
            let field = params.field();
            let w = FieldMatrix::random(field, *dim, *dim, &mut rng);
            let u = FieldMatrix::random(field, *dim, *dim, &mut rng);
            let s = params.sources();
            let slabs: Vec<FieldMatrix> = (0..s).map(|i| w.submatrix(0, i * dim / s, *dim, dim / s)).collect();
            let run = run_bilinear(field, *params.topology(), constr, &slabs, &u, &plan, seed, cell.policy)?;
            let expected = w.mat_mul(&u).map_err(crate::funcs::FuncError::from)?;
            let correct = run.product.as_ref().is_ok_and(|p| *p == expected);
            (run.report.results.is_ok(), correct, run.report)
        }
    };
    let costs = &report.costs;
    Ok(RunRow {
        run_id: 0,
        cell: 0,
        seed,
        success: decoded && correct,
        silent_wrong: decoded && !correct,
        m_used: costs.responses_used,
        u_src: costs.max_source_upload(),
        u_user: costs.user_upload,
        d_elements: costs.user_download,
        ticks: costs.ticks,
        error: report.results.err().map(|e| e.to_string()),
    })
}
