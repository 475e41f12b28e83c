//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Budgets, floors and balance are
//! recomputed here from first principles rather than read back from the
//! engines.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use dealbal::asynchronous::{run_async, AsyncConfig, AsyncRun, SchedulePolicy};
use dealbal::check::check_monotonic_step;
use dealbal::graph::{generate, LoadInit, Topology};
use dealbal::oracle::brute_force_reachable_check;
use dealbal::stab::{run_selfstab, FaultModel, SelfStabConfig};
use dealbal::sync::{plan_waterfill, round_discrete, run_continuous, run_discrete, run_multi, SyncRun};
use dealbal::{Graph, Load, LoadVector, Rational, Transfer};
use dealbal_cli::commands::persist;
use dealbal_cli::runner::{execute, Status};
use dealbal_cli::scenario::Scenario;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

// Pinned limits. Every load, potential and floor comparison is exact.
const SWEEP_GRAPHS: u64 = 50;
const MAX_SWEEP_NODES: usize = 32;
const MAX_SWEEP_K: u64 = 1000;
const FAIR_TRANSFER_SAMPLES: usize = 10_000;
const EXTRA_FIXED_ROUNDS: usize = 10;
const STAIRCASE_N: i64 = 8;
const STAR_N: usize = 10;
const STAR_SEEDS: u64 = 20;
const STAR_ROUND_LIMIT: usize = 3;
const ASYNC_TRIPLES: u64 = 100;
const MAX_ASYNC_NODES: usize = 16;
const MAX_ASYNC_K: u64 = 200;
const ORACLE_MAX_NODES: usize = 4;
const ORACLE_MAX_SUM: i64 = 10;
const FAULT_SCENARIOS: u64 = 50;
const FAULT_K: usize = 3;
const ROUND_HORIZON: usize = 1_000_000;
const STEP_HORIZON: u64 = 20_000_000;

fn rat(v: i64) -> Rational {
    Rational::from_integer(v.into())
}

// ---------------------------------------------------------------- oracles

/// Sum of squared deviations from the mean.
fn naive_potential<S: Load>(values: &[S]) -> Rational {
    let rats: Vec<Rational> = values.iter().map(Load::to_rational).collect();
    let avg = rats.iter().sum::<Rational>() / rat(rats.len() as i64);
    rats.iter().map(|r| (r - &avg) * (r - &avg)).sum()
}

fn edge_list(g: &Graph) -> Vec<(usize, usize)> {
    g.edges().map(|(u, v)| (u.0, v.0)).collect()
}

/// Diameter by breadth-first search from every node; at least 1.
fn bfs_diameter(n: usize, edges: &[(usize, usize)]) -> usize {
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut best = 1;
    for s in 0..n {
        let mut dist = vec![usize::MAX; n];
        dist[s] = 0;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        best = best.max(dist.into_iter().filter(|&d| d != usize::MAX).max().unwrap_or(0));
    }
    best
}

fn connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for &(a, b) in edges {
            for (x, y) in [(a, b), (b, a)] {
                if x == u && !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
    }
    seen.into_iter().all(|s| s)
}

fn one_balanced<S: Load>(edges: &[(usize, usize)], loads: &[S]) -> bool {
    edges.iter().all(|&(u, v)| (loads[u].clone() - loads[v].clone()).abs() <= S::one())
}

fn spread<S: Load>(loads: &[S]) -> S {
    loads.iter().max().unwrap().clone() - loads.iter().min().unwrap().clone()
}

fn apply<S: Load>(before: &[S], deals: &[Transfer<S>]) -> Vec<S> {
    let mut after = before.to_vec();
    for d in deals {
        after[d.from.0] = after[d.from.0].clone() - d.amount.clone();
        after[d.to.0] = after[d.to.0].clone() + d.amount.clone();
    }
    after
}

/// `ceil(factor * ln(inner))`, zero when `inner <= 1`.
fn ceil_log(factor: f64, inner: u128) -> u64 {
    if inner <= 1 {
        0
    } else {
        (factor * (inner as f64).ln()).ceil() as u64
    }
}

/// Continuous budget with eps = 1: `ceil((6n+3) D ln(ceil(n K^2 / (1/2))))`.
fn continuous_budget(n: usize, d: usize, k: u128) -> u64 {
    ceil_log(((6 * n + 3) * d) as f64, 2 * n as u128 * k * k)
}

/// Discrete budget: `ceil((24n+3) D ln(ceil(n K^2 / (2 D^2)))) + 6 n D^2`.
fn discrete_budget(n: usize, d: usize, k: u128) -> u64 {
    if k == 0 {
        return 0;
    }
    let den = 2 * (d * d) as u128;
    let inner = (n as u128 * k * k).div_ceil(den);
    ceil_log(((24 * n + 3) * d) as f64, inner) + (6 * n * d * d) as u64
}

/// Every round of a synchronous run: the post-state after each round.
fn states<S: Load>(initial: &[S], run: &SyncRun<S>) -> Vec<Vec<S>> {
    let mut out = vec![initial.to_vec()];
    for r in &run.reports {
        let next = apply(out.last().unwrap(), &r.deals);
        out.push(next);
    }
    out
}

/// Monotonic round or step: max never rises, min never falls, sum exact,
/// no negative load.
fn monotonic_pair<S: Load>(before: &[S], after: &[S]) -> bool {
    let sum = |v: &[S]| v.iter().cloned().fold(S::zero(), |a, b| a + b);
    after.iter().max() <= before.iter().max()
        && after.iter().min() >= before.iter().min()
        && sum(before) == sum(after)
        && after.iter().all(|x| !x.is_negative())
}

// ---------------------------------------------------------------- shared runs

struct SweepCase {
    seed: u64,
    graph: Graph,
    edges: Vec<(usize, usize)>,
    diameter: usize,
    initial: Vec<i64>,
}

impl SweepCase {
    fn topology(seed: u64) -> Topology {
        let n = 2 + (seed as usize * 13) % (MAX_SWEEP_NODES - 1);
        let edge_prob = [0.1, 0.2, 0.35, 0.5][seed as usize % 4];
        Topology::RandomConnected { n, edge_prob, seed }
    }

    fn k(&self) -> u128 {
        spread(&self.initial) as u128
    }
}

struct ContinuousCase {
    case: usize,
    run: SyncRun<Rational>,
    states: Vec<Vec<Rational>>,
}

struct DiscreteCase {
    case: usize,
    run: SyncRun<i64>,
    states: Vec<Vec<i64>>,
}

struct AsyncCase {
    n: usize,
    edges: Vec<(usize, usize)>,
    initial: Vec<i64>,
    run: AsyncRun,
    policy: SchedulePolicy,
}

#[derive(Default)]
struct Shared {
    sweep: OnceLock<Vec<SweepCase>>,
    continuous: OnceLock<Vec<ContinuousCase>>,
    discrete: OnceLock<Vec<DiscreteCase>>,
    asynchronous: OnceLock<Vec<AsyncCase>>,
}

impl Shared {
    fn sweep(&self) -> &[SweepCase] {
        self.sweep.get_or_init(|| {
            (0..SWEEP_GRAPHS)
                .map(|seed| {
                    let (graph, loads) =
                        generate(&SweepCase::topology(seed), &LoadInit::<i64>::Uniform { max: MAX_SWEEP_K, seed })
                            .unwrap();
                    let edges = edge_list(&graph);
                    let diameter = bfs_diameter(graph.node_count(), &edges);
                    SweepCase { seed, graph, edges, diameter, initial: loads.into_vec() }
                })
                .collect()
        })
    }

    fn continuous(&self) -> &[ContinuousCase] {
        let sweep = self.sweep();
        self.continuous.get_or_init(|| {
            sweep
                .par_iter()
                .enumerate()
                .map(|(case, c)| {
                    let initial: Vec<Rational> = c.initial.iter().map(|&v| rat(v)).collect();
                    let loads = LoadVector::new(initial.clone()).unwrap();
                    let run = run_continuous(&c.graph, loads, &rat(1), ROUND_HORIZON).unwrap();
                    let states = states(&initial, &run);
                    ContinuousCase { case, run, states }
                })
                .collect()
        })
    }

    fn discrete(&self) -> &[DiscreteCase] {
        let sweep = self.sweep();
        self.discrete.get_or_init(|| {
            sweep
                .par_iter()
                .enumerate()
                .map(|(case, c)| {
                    let loads = LoadVector::new(c.initial.clone()).unwrap();
                    let run = run_discrete(&c.graph, loads, ROUND_HORIZON).unwrap();
                    let states = states(&c.initial, &run);
                    DiscreteCase { case, run, states }
                })
                .collect()
        })
    }

    fn asynchronous(&self) -> &[AsyncCase] {
        self.asynchronous.get_or_init(|| {
            (0..ASYNC_TRIPLES)
                .into_par_iter()
                .map(|seed| {
                    let n = 2 + seed as usize % (MAX_ASYNC_NODES - 1);
                    let topology = Topology::RandomConnected { n, edge_prob: [0.2, 0.4, 0.7][seed as usize % 3], seed };
                    let (graph, loads) =
                        generate(&topology, &LoadInit::<i64>::Uniform { max: MAX_ASYNC_K, seed: seed + 1000 }).unwrap();
                    let policy = policy(seed);
                    let config = AsyncConfig { policy, max_steps: STEP_HORIZON, trace_stride: 1 };
                    let run = run_async(&graph, &loads, &config).unwrap();
                    AsyncCase { n, edges: edge_list(&graph), initial: loads.into_vec(), run, policy }
                })
                .collect()
        })
    }
}

fn policy(seed: u64) -> SchedulePolicy {
    match seed % 3 {
        0 => SchedulePolicy::RoundRobinFair,
        1 => SchedulePolicy::RandomFair { seed },
        _ => SchedulePolicy::AdversarialLongestQueue { seed },
    }
}

type Verdict = Result<String, String>;

fn ensure(ok: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(message())
    }
}

// ---------------------------------------------------------------- criteria

fn continuous_budget_sweep(s: &Shared) -> Verdict {
    let sweep = s.sweep();
    ensure(sweep.iter().any(|c| c.graph.node_count() == MAX_SWEEP_NODES), || "no graph at the node limit".into())?;
    let mut worst = 0f64;
    for cc in s.continuous() {
        let c = &sweep[cc.case];
        ensure(c.k() <= MAX_SWEEP_K as u128, || format!("seed {}: K above the limit", c.seed))?;
        let budget = continuous_budget(c.graph.node_count(), c.diameter, c.k());
        let reached = cc.states.iter().position(|st| spread(st) <= rat(1));
        let Some(rounds) = reached else {
            return Err(format!("seed {}: discrepancy never reached 1", c.seed));
        };
        ensure(rounds as u64 <= budget, || format!("seed {}: {rounds} rounds, budget {budget}", c.seed))?;
        if budget > 0 {
            worst = worst.max(rounds as f64 / budget as f64);
        }
    }
    Ok(format!("{} graphs, max rounds/budget {worst:.4}", sweep.len()))
}

fn discrete_budget_sweep(s: &Shared) -> Verdict {
    let sweep = s.sweep();
    let mut worst = 0f64;
    for dc in s.discrete() {
        let c = &sweep[dc.case];
        let budget = discrete_budget(c.graph.node_count(), c.diameter, c.k());
        let Some(rounds) = dc.states.iter().position(|st| one_balanced(&c.edges, st)) else {
            return Err(format!("seed {}: never 1-balanced", c.seed));
        };
        ensure(rounds as u64 <= budget, || format!("seed {}: {rounds} rounds, budget {budget}", c.seed))?;
        if budget > 0 {
            worst = worst.max(rounds as f64 / budget as f64);
        }
        let mut loads = LoadVector::new(dc.states.last().unwrap().clone()).unwrap();
        ensure(one_balanced(&c.edges, loads.as_slice()), || format!("seed {}: final state not 1-balanced", c.seed))?;
        for extra in 0..EXTRA_FIXED_ROUNDS {
            let (next, report) = round_discrete(&c.graph, &loads);
            ensure(report.deals.is_empty(), || format!("seed {}: deal in extra round {extra}", c.seed))?;
            loads = next;
        }
    }
    Ok(format!("{} graphs, max rounds/budget {worst:.4}, {EXTRA_FIXED_ROUNDS} idle rounds each", sweep.len()))
}

fn potential_floors(s: &Shared) -> Verdict {
    let sweep = s.sweep();
    let (mut cont_rounds, mut disc_rounds) = (0usize, 0usize);
    for cc in s.continuous() {
        let d = rat(sweep[cc.case].diameter as i64);
        for (i, pair) in cc.states.windows(2).enumerate() {
            let k = spread(&pair[0]);
            let floor = &k * &k / (rat(2) * &d);
            let drop = naive_potential(&pair[0]) - naive_potential(&pair[1]);
            ensure(drop >= floor, || format!("seed {} round {}: drop {drop} < {floor}", sweep[cc.case].seed, i + 1))?;
            cont_rounds += 1;
        }
    }
    for dc in s.discrete() {
        let dn = sweep[dc.case].diameter as i64;
        for (i, pair) in dc.states.windows(2).enumerate() {
            let k = spread(&pair[0]);
            if k < 2 * dn {
                continue;
            }
            let floor = rat(k * k) / rat(8 * dn);
            let drop = naive_potential(&pair[0]) - naive_potential(&pair[1]);
            ensure(drop >= floor, || format!("seed {} round {}: drop {drop} < {floor}", sweep[dc.case].seed, i + 1))?;
            disc_rounds += 1;
        }
    }
    Ok(format!("{cont_rounds} continuous and {disc_rounds} discrete rounds at or above their floors"))
}

fn fair_transfer_drop(_: &Shared) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut boundary = 0;
    for i in 0..FAIR_TRANSFER_SAMPLES {
        let others: Vec<i64> = (0..rng.random_range(0..6)).map(|_| rng.random_range(0..1000)).collect();
        let a = rng.random_range(0..1000i64);
        let l = rng.random_range(1..200i64);
        let extra = if rng.random_bool(0.2) { 0 } else { rng.random_range(0..400i64) };
        let a_prime = a + 2 * l + extra;
        let mut before = vec![a_prime, a];
        before.extend(&others);
        let mut after = before.clone();
        after[0] -= l;
        after[1] += l;
        let drop = naive_potential(&before) - naive_potential(&after);
        let two_l_sq = rat(2 * l * l);
        ensure(drop >= two_l_sq, || format!("sample {i}: drop {drop} < {two_l_sq}"))?;
        if extra == 0 {
            ensure(drop == two_l_sq, || format!("sample {i}: boundary drop {drop} != {two_l_sq}"))?;
            boundary += 1;
        }
    }
    let drop = naive_potential(&[10i64, 0]) - naive_potential(&[5i64, 5]);
    ensure(drop == rat(50), || format!("fixture drop {drop} != 50"))?;
    Ok(format!("{FAIR_TRANSFER_SAMPLES} samples ({boundary} on the boundary), fixture 10,0,l=5 drops exactly 50"))
}

fn sync_monotonic<S: Load>(states: &[Vec<S>], run: &SyncRun<S>) -> Result<usize, String> {
    for (i, (pair, report)) in states.windows(2).zip(&run.reports).enumerate() {
        ensure(monotonic_pair(&pair[0], &pair[1]), || format!("round {} not monotonic", i + 1))?;
        ensure(check_monotonic_step(&pair[0], &pair[1], &report.deals).passed(), || {
            format!("round {} fails the step checker", i + 1)
        })?;
    }
    Ok(run.reports.len())
}

fn monotonic_suite(s: &Shared) -> Verdict {
    let sweep = s.sweep();
    let mut rounds = 0;
    for cc in s.continuous() {
        rounds += sync_monotonic(&cc.states, &cc.run).map_err(|e| format!("continuous seed {}: {e}", cc.case))?;
    }
    for dc in s.discrete() {
        rounds += sync_monotonic(&dc.states, &dc.run).map_err(|e| format!("discrete seed {}: {e}", dc.case))?;
    }
    let multi: Result<Vec<usize>, String> = sweep
        .par_iter()
        .map(|c| {
            let run = run_multi(&c.graph, LoadVector::new(c.initial.clone()).unwrap(), ROUND_HORIZON).unwrap();
            ensure(run.verdict.converged, || format!("multi seed {}: no fixed point", c.seed))?;
            sync_monotonic(&states(&c.initial, &run), &run).map_err(|e| format!("multi seed {}: {e}", c.seed))
        })
        .collect();
    rounds += multi?.iter().sum::<usize>();
    let mut steps = 0;
    for a in s.asynchronous() {
        let mut prev = a.initial.clone();
        for t in &a.run.trace {
            ensure(monotonic_pair(&prev, &t.effective_loads), || format!("async step {} not monotonic", t.step))?;
            prev = t.effective_loads.clone();
            steps += 1;
        }
    }

    // Negative control: diffusion overshoots on a star.
    let text = "[algorithm]\nkind = diffusion\nalpha = 1\n[graph]\ngenerator = star:4\nloads = explicit:0,12,12,12\n[run]\nchecks = monotonic\nmax_rounds = 4\n";
    let outcome = execute(&Scenario::parse(text, Path::new(".")).unwrap()).unwrap();
    ensure(matches!(outcome.status, Status::Violation { at: 1, .. }), || {
        format!("diffusion control not rejected: {:?}", outcome.status)
    })?;
    ensure(outcome.records[1].l_max == "36", || "diffusion control did not overshoot to 36".into())?;
    Ok(format!("{rounds} sync rounds and {steps} async steps monotonic; diffusion control rejected at round 1"))
}

fn matching_degree(s: &Shared) -> Verdict {
    fn degrees<S>(n: usize, deals: &[Transfer<S>]) -> bool {
        let mut out = vec![0u8; n];
        let mut inc = vec![0u8; n];
        for d in deals {
            out[d.from.0] += 1;
            inc[d.to.0] += 1;
        }
        out.iter().chain(&inc).all(|&c| c <= 1)
    }
    let sweep = s.sweep();
    let mut rounds = 0;
    for cc in s.continuous() {
        let n = sweep[cc.case].graph.node_count();
        for r in &cc.run.reports {
            ensure(degrees(n, &r.deals), || format!("continuous seed {} round {}", cc.case, r.round_index + 1))?;
            rounds += 1;
        }
    }
    for dc in s.discrete() {
        let n = sweep[dc.case].graph.node_count();
        for r in &dc.run.reports {
            ensure(degrees(n, &r.deals), || format!("discrete seed {} round {}", dc.case, r.round_index + 1))?;
            rounds += 1;
        }
    }
    Ok(format!("{rounds} rounds, at most one deal in and one out per node"))
}

fn staircase_fixture(_: &Shared) -> Verdict {
    let mut loads = vec![0i64];
    for i in 1..STAIRCASE_N {
        loads.extend([i, i]);
    }
    loads.push(STAIRCASE_N);
    let n = loads.len();
    let edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
    let g = Graph::new(n, &edges).unwrap();
    ensure(spread(&loads) == STAIRCASE_N, || "wrong discrepancy".into())?;
    let local = edges.iter().map(|&(u, v)| (loads[u] - loads[v]).abs()).max().unwrap();
    ensure(local == 1, || format!("max local difference {local}"))?;
    for (name, run) in [
        ("discrete", run_discrete(&g, LoadVector::new(loads.clone()).unwrap(), 10).unwrap()),
        ("multi", run_multi(&g, LoadVector::new(loads.clone()).unwrap(), 10).unwrap()),
    ] {
        ensure(run.verdict.total_deals == 0, || format!("{name} made {} deals", run.verdict.total_deals))?;
        ensure(run.final_loads.as_slice() == loads.as_slice(), || format!("{name} moved load"))?;
    }
    Ok(format!("{n}-node path, discrepancy {STAIRCASE_N}, local difference 1, fixed under discrete and multi"))
}

fn star_scenario(_: &Shared) -> Verdict {
    let center = (STAR_N * STAR_N) as i64;
    let mut worst_rounds = 0;
    for seed in 0..STAR_SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut loads = vec![center];
        loads.extend((1..STAR_N).map(|_| rng.random_range(0..=STAR_N as i64)));
        let (g, lv) = generate(&Topology::Star(STAR_N), &LoadInit::Explicit(loads.clone())).unwrap();
        let edges = edge_list(&g);

        let mut leaves: Vec<i64> = loads[1..].to_vec();
        leaves.sort();
        let plan = plan_waterfill(&center, &leaves);
        let mut effective: Vec<i64> = leaves.iter().zip(&plan.props).map(|(l, p)| l + p).collect();
        effective.push(plan.tentative_load);
        ensure(spread(&effective) <= 1, || format!("seed {seed}: planned loads {effective:?}"))?;
        ensure(effective.iter().sum::<i64>() == loads.iter().sum::<i64>(), || format!("seed {seed}: plan loses load"))?;

        let run = run_multi(&g, lv, 10).unwrap();
        let rounds = states(&loads, &run).iter().position(|st| one_balanced(&edges, st));
        let Some(rounds) = rounds else { return Err(format!("seed {seed}: never 1-balanced")) };
        ensure(rounds <= STAR_ROUND_LIMIT, || format!("seed {seed}: {rounds} rounds"))?;
        worst_rounds = worst_rounds.max(rounds);
    }
    Ok(format!("{STAR_SEEDS} stars of {STAR_N} nodes: plans within 1, 1-balanced after at most {worst_rounds} round(s)"))
}

fn async_convergence(s: &Shared) -> Verdict {
    let runs = s.asynchronous();
    let mut max_ratio = 0f64;
    let mut deals = 0;
    for (seed, a) in runs.iter().enumerate() {
        let v = &a.run.verdict;
        ensure(v.terminated, || format!("seed {seed}: no quiescence after {} steps", v.steps))?;
        let fin = a.run.final_loads.as_slice();
        ensure(one_balanced(&a.edges, fin), || format!("seed {seed}: final loads not 1-balanced"))?;
        ensure(fin.iter().sum::<i64>() == a.initial.iter().sum::<i64>(), || format!("seed {seed}: sum changed"))?;
        for d in &a.run.deals {
            ensure(d.proposer_tentative > d.receiver_t_load_before, || {
                format!("seed {seed}: deal at step {} fails the gap check", d.step)
            })?;
        }
        let k = spread(&a.initial) as u128;
        let budget = a.n as u128 * k * k;
        let count = a.run.deals.len() as u128;
        ensure(count <= budget, || format!("seed {seed}: {count} deals, budget {budget}"))?;
        if budget > 0 {
            max_ratio = max_ratio.max(count as f64 / budget as f64);
        }
        deals += a.run.deals.len();
    }
    let policies: BTreeSet<String> =
        runs.iter().map(|a| format!("{:?}", a.policy).split([' ', '{']).next().unwrap().to_string()).collect();
    Ok(format!("{} runs over {} policies, {deals} deals, max deals/(n K^2) {max_ratio:.5}", runs.len(), policies.len()))
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn load_vectors(n: usize, max_sum: i64) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|v: Vec<i64>| {
                let used: i64 = v.iter().sum();
                (0..=max_sum - used).map(move |x| {
                    let mut w = v.clone();
                    w.push(x);
                    w
                })
            })
            .collect();
    }
    out
}

fn oracle_equivalence(_: &Shared) -> Verdict {
    let mut instances = Vec::new();
    let mut graphs = 0;
    for n in 1..=ORACLE_MAX_NODES {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        for mask in 0u32..(1 << pairs.len()) {
            let edges: Vec<(usize, usize)> =
                pairs.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &e)| e).collect();
            if !connected(n, &edges) {
                continue;
            }
            graphs += 1;
            for loads in load_vectors(n, ORACLE_MAX_SUM) {
                instances.push((n, edges.clone(), loads));
            }
        }
    }
    let failures: Vec<String> = instances
        .par_iter()
        .filter_map(|(n, edges, loads)| {
            let g = Graph::new(*n, edges).unwrap();
            let lv = LoadVector::new(loads.clone()).unwrap();
            let run = run_discrete(&g, lv.clone(), ROUND_HORIZON).unwrap();
            let fin = run.final_loads.as_slice();
            let sum = loads.iter().sum::<i64>() as u64;
            // Every fair transfer lowers the potential, so no sequence is
            // longer than the number of load vectors with this sum.
            let horizon = binomial(sum + *n as u64 - 1, *n as u64 - 1) as usize;
            let report = brute_force_reachable_check(&g, &lv, horizon, usize::MAX).unwrap();
            let p = naive_potential(fin);
            let ok = one_balanced(edges, fin) && report.balanced_potentials.contains(&p);
            (!ok).then(|| format!("n={n} edges={edges:?} loads={loads:?} final={fin:?}"))
        })
        .collect();
    ensure(failures.is_empty(), || format!("{} mismatches, first {}", failures.len(), failures[0]))?;
    Ok(format!("{} instances on {graphs} connected labeled graphs, all final potentials confirmed", instances.len()))
}

fn self_stabilization(_: &Shared) -> Verdict {
    let results: Result<Vec<(u64, u64)>, String> = (0..FAULT_SCENARIOS)
        .into_par_iter()
        .map(|seed| {
            let n = 3 + seed as usize % 10;
            let topology = Topology::RandomConnected { n, edge_prob: 0.3, seed };
            let (g, loads) = generate(&topology, &LoadInit::<i64>::Uniform { max: 100, seed: seed + 77 }).unwrap();
            let edges = edge_list(&g);
            let faults = FaultModel {
                seed,
                garbage: seed as usize % (FAULT_K + 1),
                corrupt_nodes: true,
                corrupt_links: seed % 2 == 0,
                ..Default::default()
            };
            let policy = policy(seed);
            let config = SelfStabConfig { policy, max_steps: STEP_HORIZON, trace_stride: 1, k: FAULT_K, faults };
            let run = run_selfstab(&g, &loads, &config).unwrap();
            let r = &run.report;
            ensure(run.verdict.terminated, || format!("seed {seed}: no quiescence"))?;
            let s_step = r.stabilization_step;
            ensure(s_step <= run.verdict.steps, || format!("seed {seed}: stabilization step past the end"))?;
            ensure(r.suffix_monotonic, || format!("seed {seed}: suffix not monotonic"))?;
            ensure(one_balanced(&edges, &run.final_loads), || format!("seed {seed}: final loads not 1-balanced"))?;
            let suffix: Vec<&Vec<i64>> =
                run.trace.iter().filter(|t| t.step + 1 >= s_step).map(|t| &t.effective_loads).collect();
            for pair in suffix.windows(2) {
                ensure(monotonic_pair(pair[0], pair[1]), || format!("seed {seed}: suffix step not monotonic"))?;
            }

            let clean = SelfStabConfig { faults: FaultModel::none(), trace_stride: 0, ..config };
            let stab = run_selfstab(&g, &loads, &clean).unwrap();
            let plain = run_async(&g, &loads, &AsyncConfig { policy, max_steps: STEP_HORIZON, trace_stride: 0 }).unwrap();
            ensure(stab.final_loads == plain.final_loads.as_slice(), || {
                format!("seed {seed}: fault-free run differs from the plain engine")
            })?;
            Ok((s_step, r.fault_events))
        })
        .collect();
    let results = results?;
    let worst = results.iter().map(|r| r.0).max().unwrap_or(0);
    let events: u64 = results.iter().map(|r| r.1).sum();
    Ok(format!("{FAULT_SCENARIOS} scenarios, {events} fault events, latest stabilization step {worst}, fault-free runs match"))
}

fn determinism(s: &Shared) -> Verdict {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let mut scenarios: Vec<String> = Vec::new();
    for c in s.sweep().iter().filter(|c| c.graph.node_count() <= 12).take(3) {
        let Topology::RandomConnected { n, edge_prob, seed } = SweepCase::topology(c.seed) else { unreachable!() };
        let graph = format!("generator = random:n={n},p={edge_prob},seed={seed}\nloads = uniform:max={MAX_SWEEP_K},seed={seed}");
        scenarios.push(format!("[algorithm]\nkind = continuous\n[graph]\n{graph}\n[run]\nchecks = monotonic,lemma2\n"));
        scenarios.push(format!("[algorithm]\nkind = discrete\n[graph]\n{graph}\n[run]\nchecks = lemma6,matching_degree\n"));
        scenarios.push(format!("[algorithm]\nkind = multi\n[graph]\n{graph}\n[run]\nchecks = monotonic\n"));
    }
    for a in s.asynchronous().iter().take(6) {
        let (policy, seed) = match a.policy {
            SchedulePolicy::RoundRobinFair => ("round-robin", 0),
            SchedulePolicy::RandomFair { seed } => ("random", seed),
            SchedulePolicy::AdversarialLongestQueue { seed } => ("adversarial", seed),
        };
        let loads: Vec<String> = a.initial.iter().map(|v| v.to_string()).collect();
        let graph = format!("generator = random:n={},p=0.4,seed={seed}\nloads = explicit:{}", a.n, loads.join(","));
        scenarios.push(format!("[algorithm]\nkind = async\npolicy = {policy}\nseed = {seed}\n[graph]\n{graph}\n[run]\nchecks = monotonic\nstride = 2\n"));
        scenarios.push(format!("[algorithm]\nkind = selfstab\npolicy = {policy}\nseed = {seed}\nk = {FAULT_K}\ngarbage = {FAULT_K}\ncorrupt = nodes,links\nfault_seed = {seed}\n[graph]\n{graph}\n[run]\nchecks = monotonic\n"));
    }
    for (i, text) in scenarios.iter().enumerate() {
        let scenario = Scenario::parse(text, Path::new(".")).map_err(|e| format!("scenario {i}: {e}"))?;
        let mut files = Vec::new();
        for attempt in 0..2 {
            let outcome = execute(&scenario).map_err(|e| format!("scenario {i}: {e}"))?;
            ensure(outcome.status == Status::Ok, || format!("scenario {i}: {:?}", outcome.status))?;
            let trace = dir.path().join(format!("{i}-{attempt}.csv"));
            let summary = dir.path().join(format!("{i}-{attempt}.txt"));
            persist(&outcome, &trace, &summary)?;
            files.push((std::fs::read(&trace).unwrap(), std::fs::read(&summary).unwrap()));
        }
        ensure(files[0] == files[1], || format!("scenario {i}: outputs differ between runs"))?;
    }
    Ok(format!("{} scenarios run twice, traces and summaries byte-identical", scenarios.len()))
}

// ---------------------------------------------------------------- driver

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Option<Duration>,
    run: fn(&Shared) -> Verdict,
}

const CRITERIA: [Criterion; 12] = [
    Criterion { id: 1, name: "continuous round budget", limit: Some(Duration::from_secs(30)), run: continuous_budget_sweep },
    Criterion { id: 2, name: "discrete round budget and fixed point", limit: Some(Duration::from_secs(60)), run: discrete_budget_sweep },
    Criterion { id: 3, name: "per-round potential floors", limit: None, run: potential_floors },
    Criterion { id: 4, name: "fair transfer potential drop", limit: None, run: fair_transfer_drop },
    Criterion { id: 5, name: "monotonic anytime behavior", limit: None, run: monotonic_suite },
    Criterion { id: 6, name: "matching degree", limit: None, run: matching_degree },
    Criterion { id: 7, name: "staircase path fixed point", limit: None, run: staircase_fixture },
    Criterion { id: 8, name: "star equalization", limit: None, run: star_scenario },
    Criterion { id: 9, name: "asynchronous convergence", limit: Some(Duration::from_secs(120)), run: async_convergence },
    Criterion { id: 10, name: "exhaustive oracle equivalence", limit: Some(Duration::from_secs(60)), run: oracle_equivalence },
    Criterion { id: 11, name: "self-stabilization", limit: Some(Duration::from_secs(120)), run: self_stabilization },
    Criterion { id: 12, name: "determinism", limit: None, run: determinism },
];

fn main() -> ExitCode {
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let shared = Shared::default();
    let mut failed = 0;
    let mut ran = 0;
    for c in CRITERIA.iter().filter(|c| filter.is_empty() || filter.contains(&c.id)) {
        let start = Instant::now();
        let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| (c.run)(&shared)))
            .unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let result = match (result, c.limit) {
            (Ok(_), Some(limit)) if elapsed > limit => Err(format!("took {elapsed:.1?}, limit {limit:?}")),
            (r, _) => r,
        };
        let (tag, detail) = match &result {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("criterion {:>2} {tag} {} ({:.1?}): {detail}", c.id, c.name, elapsed);
        ran += 1;
        failed += result.is_err() as u32;
    }
    println!("acceptance: {}/{ran} criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
