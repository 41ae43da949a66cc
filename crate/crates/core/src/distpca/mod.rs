//! In-process simulation of row-partitioned distributed PCA with a
//! central processor (CP), every transfer counted in a [`CommLedger`].
//!
//! Servers never see rows they do not own. Column-indexed state moves
//! only as blocks restricted to each server's touched columns.

mod ledger;
mod scenario;

pub use ledger::{communication_bound, CommLedger, Direction, Message, MessageKind, AUDIT_CONSTANT};
pub use scenario::DistScenario;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{LelaError, Result};
use crate::linalg::lsq::{accumulate, solve_normal_equations};
use crate::linalg::{qr_orthonormalize, DenseMatrix, Factorization, LsqOutcome};
use crate::rng::{derive_seed, domain, normal, stream};
use crate::sampling::{bernoulli_row, draw_bernoulli, ElementLaw, Sample, SampleSet, SamplingPlan};
use crate::waltmin::{als_half_step, Side, SplitMode};

/// Default number of distributed power iterations at initialization.
pub const DEFAULT_INIT_ROUNDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PartitionPolicy {
    #[default]
    Contiguous,
    RoundRobin,
    /// Shuffle with the run seed, then cut into contiguous chunks.
    SeededRandom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistConfig {
    pub servers: usize,
    pub rank: usize,
    pub m: usize,
    pub iterations: usize,
    pub init_rounds: usize,
    pub policy: PartitionPolicy,
    pub split: SplitMode,
    pub seed: u64,
}

impl DistConfig {
    pub fn new(servers: usize, rank: usize, m: usize, iterations: usize, seed: u64) -> Self {
        Self {
            servers,
            rank,
            m,
            iterations,
            init_rounds: DEFAULT_INIT_ROUNDS,
            policy: PartitionPolicy::Contiguous,
            split: SplitMode::Reuse,
            seed,
        }
    }

    fn parts(&self) -> usize {
        match self.split {
            SplitMode::Reuse => 1,
            SplitMode::Fresh => 2 * self.iterations + 1,
        }
    }

    // Bucket 0 feeds initialization, 2t+1 the U step and 2t+2 the V step
    // of round t.
    fn bucket(&self, i: usize, j: usize, d: usize) -> usize {
        match self.split {
            SplitMode::Reuse => 0,
            SplitMode::Fresh => (derive_seed(self.seed, domain::SPLIT, (i * d + j) as u64) % self.parts() as u64) as usize,
        }
    }

    fn step_bucket(&self, step: usize) -> usize {
        match self.split {
            SplitMode::Reuse => 0,
            SplitMode::Fresh => step,
        }
    }
}

/// One server: its rows, its samples and the column blocks it holds.
#[derive(Debug, Clone)]
pub struct ServerShard {
    pub server_id: usize,
    pub rows: Vec<usize>,
    pub local_rows: DenseMatrix,
    /// Ω restricted to this server's rows, in global coordinates.
    pub local_samples: SampleSet,
    pub touched_cols: Vec<usize>,
    // position in touched_cols of each local sample's column
    slots: Vec<usize>,
    buckets: Vec<usize>,
    // |c_k|×r row-major copy of the latest Y or V rows received
    col_block: Vec<f64>,
    // |r_k|×r row-major local U rows
    u_block: Vec<f64>,
}

impl ServerShard {
    fn new(server_id: usize, rows: Vec<usize>, m: &DenseMatrix) -> Self {
        let d = m.ncols();
        let local_rows = DenseMatrix::from_fn(rows.len(), d, |a, j| m.get(rows[a], j));
        Self {
            server_id,
            rows,
            local_rows,
            local_samples: SampleSet::from_sorted_unchecked(m.nrows(), d, Vec::new()),
            touched_cols: Vec::new(),
            slots: Vec::new(),
            buckets: Vec::new(),
            col_block: Vec::new(),
            u_block: Vec::new(),
        }
    }

    fn set_samples(&mut self, samples: SampleSet, cfg: &DistConfig) {
        self.touched_cols = samples.touched_cols();
        let d = samples.ncols();
        self.slots = samples.entries().iter().map(|e| self.touched_cols.binary_search(&e.j).expect("touched")).collect();
        self.buckets = samples.entries().iter().map(|e| cfg.bucket(e.i, e.j, d)).collect();
        self.local_samples = samples;
    }

    fn reals(&self, per_col: usize) -> u64 {
        (self.touched_cols.len() * per_col) as u64
    }

    fn receive_cols(&mut self, full: &DenseMatrix) {
        let r = full.ncols();
        self.col_block = self.touched_cols.iter().flat_map(|&j| (0..r).map(move |k| full.get(j, k))).collect();
    }

    /// Local rows of U as an |r_k|×r matrix.
    pub fn u_rows(&self, r: usize) -> DenseMatrix {
        DenseMatrix::from_fn(self.rows.len(), r, |a, k| self.u_block[a * r + k])
    }

    // Entry positions of local row `a` that belong to `bucket`.
    fn row_entries(&self, a: usize, bucket: usize) -> impl Iterator<Item = (usize, &Sample)> + Clone + '_ {
        let i = self.rows[a];
        let start = self.local_samples.entries().partition_point(|e| e.i < i);
        let row = self.local_samples.row(i);
        row.iter().enumerate().map(move |(o, e)| (start + o, e)).filter(move |(p, _)| self.buckets[*p] == bucket)
    }
}

/// Split the rows of `m` among `s` servers.
pub fn partition_rows(m: &DenseMatrix, s: usize, policy: PartitionPolicy, seed: u64) -> Result<Vec<ServerShard>> {
    let n = m.nrows();
    if s == 0 || s > n {
        return Err(LelaError::param(format!("server count {s} must lie in [1, {n}]")));
    }
    let chunks = |order: &[usize]| -> Vec<Vec<usize>> {
        let (base, extra) = (n / s, n % s);
        let mut out = Vec::with_capacity(s);
        let mut start = 0;
        for k in 0..s {
            let len = base + usize::from(k < extra);
            let mut rows = order[start..start + len].to_vec();
            rows.sort_unstable();
            out.push(rows);
            start += len;
        }
        out
    };
    let sets = match policy {
        PartitionPolicy::Contiguous => chunks(&(0..n).collect::<Vec<_>>()),
        PartitionPolicy::RoundRobin => (0..s).map(|k| (k..n).step_by(s).collect()).collect(),
        PartitionPolicy::SeededRandom => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut stream(seed, domain::PARTITION, 0));
            chunks(&order)
        }
    };
    Ok(sets.into_iter().enumerate().map(|(k, rows)| ServerShard::new(k, rows, m)).collect())
}

/// Steps 1–3: column statistics through the CP, local sampling, column lists.
pub fn dist_sample(shards: &mut [ServerShard], cfg: &DistConfig, ledger: &mut CommLedger) -> Result<()> {
    if cfg.m == 0 {
        return Err(LelaError::param("sample budget m must be at least 1"));
    }
    let d = shards[0].local_rows.ncols();
    let n: usize = shards.iter().map(|s| s.rows.len()).sum();
    // Server side: row norms stay local; column partials and two scalars go up.
    struct Local {
        row_sq: Vec<f64>,
        col_sq: Vec<f64>,
        l1: f64,
        fro: f64,
    }
    let locals: Vec<Local> = shards
        .par_iter()
        .map(|sh| {
            let rows = &sh.local_rows;
            let mut row_sq = vec![0.0; rows.nrows()];
            let mut row_l1 = vec![0.0; rows.nrows()];
            let mut col_sq = vec![0.0; d];
            for (j, cs) in col_sq.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (a, &x) in rows.col(j).iter().enumerate() {
                    acc += x * x;
                    row_sq[a] += x * x;
                    row_l1[a] += x.abs();
                }
                *cs = acc;
            }
            let fro = row_sq.iter().sum();
            let l1 = row_l1.iter().sum();
            Local { row_sq, col_sq, l1, fro }
        })
        .collect();
    for sh in shards.iter() {
        ledger.record(0, Direction::ToCp, MessageKind::ColNorms, sh.server_id, d as u64);
        ledger.record(0, Direction::ToCp, MessageKind::ScalarPartials, sh.server_id, 2);
    }
    // CP folds in ascending server id.
    let mut col_sq = vec![0.0; d];
    let (mut fro_sq, mut l11) = (0.0, 0.0);
    for loc in &locals {
        col_sq.iter_mut().zip(&loc.col_sq).for_each(|(a, b)| *a += b);
        fro_sq += loc.fro;
        l11 += loc.l1;
    }
    if !(fro_sq > 0.0) || !(l11 > 0.0) {
        return Err(LelaError::degenerate("all-zero matrix: sampling distribution undefined"));
    }
    for sh in shards.iter() {
        ledger.record(0, Direction::ToServer, MessageKind::StatsBroadcast, sh.server_id, d as u64 + 2);
    }
    let law = ElementLaw::Distributed;
    let mf = cfg.m as f64;
    let drawn: Vec<SampleSet> = shards
        .par_iter()
        .zip(&locals)
        .map(|(sh, loc)| {
            let entries: Vec<Sample> = sh
                .rows
                .iter()
                .enumerate()
                .flat_map(|(a, &i)| {
                    bernoulli_row(i, d, cfg.seed, domain::BERNOULLI_ROW, |j| {
                        let x = sh.local_rows.get(a, j);
                        (law.q(mf, n, d, loc.row_sq[a], col_sq[j], fro_sq, l11, x.abs()).min(1.0), x)
                    })
                })
                .collect();
            SampleSet::from_entries(n, d, entries).expect("server samples are valid")
        })
        .collect();
    for (sh, s) in shards.iter_mut().zip(drawn) {
        sh.set_samples(s, cfg);
        ledger.record(0, Direction::ToCp, MessageKind::ColLists, sh.server_id, sh.touched_cols.len() as u64);
    }
    Ok(())
}

fn random_orthonormal(d: usize, r: usize, seed: u64) -> Result<DenseMatrix> {
    let mut rng = stream(seed, domain::DIST_INIT, 0);
    let y = DenseMatrix::from_fn(d, r, |_, _| normal(&mut rng));
    qr_orthonormalize(&y)
}

fn normalize(y: &DenseMatrix) -> Result<DenseMatrix> {
    qr_orthonormalize(y).map_err(|e| LelaError::degenerate(format!("distributed power iteration collapsed: {e}")))
}

// Σ_{(i,j)} w M_ij z_i e_j with z_i = Σ_j w M_ij y_j, over one row's entries.
fn gram_row<'a>(entries: impl Iterator<Item = (usize, &'a Sample, usize)> + Clone, y: &[f64], out: &mut [f64], r: usize) {
    let mut z = vec![0.0; r];
    for (_, e, slot) in entries.clone() {
        let c = e.reweighted();
        for k in 0..r {
            z[k] += c * y[slot * r + k];
        }
    }
    for (_, e, slot) in entries {
        let c = e.reweighted();
        for k in 0..r {
            out[slot * r + k] += c * z[k];
        }
    }
}

/// Steps 4–8: distributed power iteration on R_Ω(M)ᵀ R_Ω(M).
pub fn dist_init(shards: &mut [ServerShard], cfg: &DistConfig, ledger: &mut CommLedger) -> Result<DenseMatrix> {
    let (d, r) = (shards[0].local_rows.ncols(), cfg.rank);
    if r == 0 || r > d {
        return Err(LelaError::param(format!("rank {r} must lie in [1, {d}]")));
    }
    let mut y = random_orthonormal(d, r, cfg.seed)?;
    for sh in shards.iter_mut() {
        sh.receive_cols(&y);
        ledger.record(0, Direction::ToServer, MessageKind::InitYBlock, sh.server_id, sh.reals(r));
    }
    let b0 = cfg.step_bucket(0);
    for round in 1..=cfg.init_rounds {
        let partials: Vec<Vec<f64>> = shards
            .par_iter()
            .map(|sh| {
                let mut out = vec![0.0; sh.touched_cols.len() * r];
                for a in 0..sh.rows.len() {
                    let it = sh.row_entries(a, b0).map(|(p, e)| (p, e, sh.slots[p]));
                    gram_row(it, &sh.col_block, &mut out, r);
                }
                out
            })
            .collect();
        let mut next = DenseMatrix::zeros(d, r);
        for (sh, part) in shards.iter().zip(&partials) {
            ledger.record(round, Direction::ToCp, MessageKind::InitYPartial, sh.server_id, sh.reals(r));
            for (slot, &j) in sh.touched_cols.iter().enumerate() {
                for k in 0..r {
                    next.set(j, k, next.get(j, k) + part[slot * r + k]);
                }
            }
        }
        y = normalize(&next)?;
        for sh in shards.iter_mut() {
            sh.receive_cols(&y);
            ledger.record(round, Direction::ToServer, MessageKind::InitYBlock, sh.server_id, sh.reals(r));
        }
    }
    Ok(y)
}

/// Result of one distributed alternating round.
#[derive(Debug, Clone)]
pub struct RoundOutcome {
    pub v: DenseMatrix,
    pub unobserved_cols: Vec<usize>,
    pub pseudo_solved_cols: Vec<usize>,
}

/// Steps 10–14 for round `t`: local U solves, z/B upload, V solve at CP.
/// Servers must already hold the current V rows for their columns.
pub fn dist_waltmin_round(shards: &mut [ServerShard], cfg: &DistConfig, t: usize, ledger: &mut CommLedger) -> RoundOutcome {
    let (d, r) = (shards[0].local_rows.ncols(), cfg.rank);
    let round = cfg.init_rounds + 1 + t;
    let (bu, bv) = (cfg.step_bucket(2 * t + 1), cfg.step_bucket(2 * t + 2));
    let uploads: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = shards
        .par_iter()
        .map(|sh| {
            let mut u_block = vec![0.0; sh.rows.len() * r];
            for a in 0..sh.rows.len() {
                let mut b = vec![0.0; r * r];
                let mut z = vec![0.0; r];
                let mut seen = false;
                for (p, e) in sh.row_entries(a, bu) {
                    let slot = sh.slots[p];
                    accumulate(&mut b, &mut z, e.weight, e.value, &sh.col_block[slot * r..(slot + 1) * r]);
                    seen = true;
                }
                if seen {
                    u_block[a * r..(a + 1) * r].copy_from_slice(&solve_normal_equations(&b, &z, r).0);
                }
            }
            let c = sh.touched_cols.len();
            let mut zs = vec![0.0; c * r];
            let mut bs = vec![0.0; c * r * r];
            let local_index = |i: usize| sh.rows.binary_search(&i).expect("own row");
            for (p, e) in sh.local_samples.entries().iter().enumerate() {
                if sh.buckets[p] != bv {
                    continue;
                }
                let slot = sh.slots[p];
                let a = local_index(e.i);
                accumulate(&mut bs[slot * r * r..(slot + 1) * r * r], &mut zs[slot * r..(slot + 1) * r], e.weight, e.value, &u_block[a * r..(a + 1) * r]);
            }
            (u_block, zs, bs)
        })
        .collect();
    let mut z_all = vec![0.0; d * r];
    let mut b_all = vec![0.0; d * r * r];
    let mut seen = vec![false; d];
    for (sh, (u_block, zs, bs)) in shards.iter_mut().zip(uploads) {
        ledger.record(round, Direction::ToCp, MessageKind::URowsLocal, sh.server_id, (sh.rows.len() * r) as u64);
        ledger.record(round, Direction::ToCp, MessageKind::ZAndB, sh.server_id, sh.reals(r + r * r));
        for (slot, &j) in sh.touched_cols.iter().enumerate() {
            z_all[j * r..(j + 1) * r].iter_mut().zip(&zs[slot * r..(slot + 1) * r]).for_each(|(a, b)| *a += b);
            b_all[j * r * r..(j + 1) * r * r].iter_mut().zip(&bs[slot * r * r..(slot + 1) * r * r]).for_each(|(a, b)| *a += b);
        }
        // B_kj for a column without samples in this bucket is exactly zero.
        for (p, _) in sh.local_samples.entries().iter().enumerate() {
            if sh.buckets[p] == bv {
                seen[sh.touched_cols[sh.slots[p]]] = true;
            }
        }
        sh.u_block = u_block;
    }
    let mut v = DenseMatrix::zeros(d, r);
    let mut unobserved_cols = Vec::new();
    let mut pseudo_solved_cols = Vec::new();
    for j in 0..d {
        if !seen[j] {
            unobserved_cols.push(j);
            continue;
        }
        let (x, outcome) = solve_normal_equations(&b_all[j * r * r..(j + 1) * r * r], &z_all[j * r..(j + 1) * r], r);
        if outcome == LsqOutcome::PseudoSolved {
            pseudo_solved_cols.push(j);
        }
        for (k, xv) in x.into_iter().enumerate() {
            v.set(j, k, xv);
        }
    }
    for sh in shards.iter_mut() {
        sh.receive_cols(&v);
        ledger.record(round, Direction::ToServer, MessageKind::VRowsBlock, sh.server_id, sh.reals(r));
    }
    RoundOutcome { v, unobserved_cols, pseudo_solved_cols }
}

#[derive(Debug, Clone)]
pub struct DistOutput {
    /// U gathered from the servers for audit (not counted), V from the CP.
    pub factorization: Factorization,
    pub ledger: CommLedger,
    pub sample_count: usize,
    pub unobserved_cols: Vec<usize>,
    pub pseudo_solved_cols: Vec<usize>,
}

impl DistOutput {
    pub fn bound(&self, d: usize, s: usize, r: usize, init_rounds: usize) -> f64 {
        communication_bound(d, s, self.sample_count, r, init_rounds)
    }
}

fn validate(m: &DenseMatrix, cfg: &DistConfig) -> Result<()> {
    let (n, d) = m.shape();
    if cfg.rank == 0 || cfg.rank > n.min(d) {
        return Err(LelaError::param(format!("rank {} must lie in [1, {}]", cfg.rank, n.min(d))));
    }
    if cfg.iterations == 0 {
        return Err(LelaError::param("iterations must be at least 1"));
    }
    if cfg.m == 0 {
        return Err(LelaError::param("sample budget m must be at least 1"));
    }
    Ok(())
}

/// Full protocol: sample, initialize, then `T` alternating rounds.
pub fn run_distpca(m: &DenseMatrix, cfg: &DistConfig) -> Result<DistOutput> {
    validate(m, cfg)?;
    let mut shards = partition_rows(m, cfg.servers, cfg.policy, cfg.seed)?;
    let mut ledger = CommLedger::new();
    dist_sample(&mut shards, cfg, &mut ledger)?;
    let sample_count: usize = shards.iter().map(|s| s.local_samples.len()).sum();
    if sample_count == 0 {
        return Err(LelaError::degenerate("sampler drew no entries"));
    }
    let mut v = dist_init(&mut shards, cfg, &mut ledger)?;
    let mut last = None;
    for t in 0..cfg.iterations {
        let out = dist_waltmin_round(&mut shards, cfg, t, &mut ledger);
        v = out.v.clone();
        last = Some(out);
    }
    let last = last.expect("at least one round");
    let (n, r) = (m.nrows(), cfg.rank);
    let mut u = DenseMatrix::zeros(n, r);
    for sh in &shards {
        let block = sh.u_rows(r);
        for (a, &i) in sh.rows.iter().enumerate() {
            for k in 0..r {
                u.set(i, k, block.get(a, k));
            }
        }
    }
    Ok(DistOutput {
        factorization: Factorization::new(u, v)?,
        ledger,
        sample_count,
        unobserved_cols: last.unobserved_cols,
        pseudo_solved_cols: last.pseudo_solved_cols,
    })
}

/// The same computation on one machine: identical law, seed, buckets and
/// update order (U then V, V⁰ the power-iteration output, no QR of V).
pub fn centralized_reference(m: &DenseMatrix, cfg: &DistConfig) -> Result<Factorization> {
    validate(m, cfg)?;
    let (n, d) = m.shape();
    let r = cfg.rank;
    let plan = SamplingPlan::with_law(m, cfg.m, ElementLaw::Distributed)?;
    let all = draw_bernoulli(&plan, m, cfg.seed);
    if all.is_empty() {
        return Err(LelaError::degenerate("sampler drew no entries"));
    }
    let bucket = |b: usize| all.filter(|_, e| cfg.bucket(e.i, e.j, d) == cfg.step_bucket(b));
    let init_set = bucket(0);
    let mut y = random_orthonormal(d, r, cfg.seed)?;
    for _ in 0..cfg.init_rounds {
        let mut flat = vec![0.0; d * r];
        for i in 0..n {
            let row = init_set.row(i);
            let start = init_set.entries().partition_point(|e| e.i < i);
            let yflat: Vec<f64> = (0..d).flat_map(|j| (0..r).map(move |k| (j, k))).map(|(j, k)| y.get(j, k)).collect();
            gram_row(row.iter().enumerate().map(|(o, e)| (start + o, e, e.j)), &yflat, &mut flat, r);
        }
        y = normalize(&DenseMatrix::from_fn(d, r, |j, k| flat[j * r + k]))?;
    }
    let mut v = y;
    let mut u = DenseMatrix::zeros(n, r);
    for t in 0..cfg.iterations {
        u = als_half_step(&v, &bucket(2 * t + 1), Side::UpdateU).factor;
        v = als_half_step(&u, &bucket(2 * t + 2), Side::UpdateV).factor;
    }
    Factorization::new(u, v)
}
