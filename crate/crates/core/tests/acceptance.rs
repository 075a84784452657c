//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Tolerances:
//! 1. structural equality, runtime < 1 s
//! 2. exact equality over 1,000 fixtures
//! 3. exact equality
//! 4. exact (graph isomorphism) over >= 50 workflows
//! 5. exact, 10 interleaving seeds
//! 6. strict inequalities; S > 1.5; S non-decreasing; < 60 s per configuration
//! 7. |T_dist - T_central| <= 1e-9 s
//! 8. latency within 1e-9 s, bandwidth within 1e-6 relative
//! 9. byte-identical JSON

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use orchestra::dsl::{compile, encode, DescriptionResolver, SourceUnit, TypeTag};
use orchestra::engine::{
    pure_result, Datum, InvocationRequest, LocalCluster, PureServices, SimulatedTransport, TraceEvent,
    ValueEnvelope, WorkflowState,
};
use orchestra::graph::NodeId;
use orchestra::harness::{
    build_topology, continental, generate_workflow, run_experiment, single_engine,
    ExperimentConfig, Mode, Pattern, Prepared, Scenario, Workload,
};
use orchestra::partitioner::{compose, decompose, partition, ComposeOptions, IdentitySizes, PlacementPlan};
use orchestra::qos::{
    cluster_engines, probe_bandwidth, probe_latency, rank_and_select, split_dominated, EngineInfo, QosMatrix,
    QosSample, SimulatedChannel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn engine_info(id: &str, url: &str) -> EngineInfo {
    EngineInfo {
        id: id.into(),
        endpoint: url.into(),
        region: id.into(),
    }
}

const LISTING_ENGINES: [(&str, &str); 3] = [
    ("e1", "http://ec2-54-80-3-122.compute-1.amazonaws.com/services/Engine"),
    ("e2", "http://ec2-54-83-2-120.compute-1.amazonaws.com/services/Engine"),
    ("e3", "http://ec2-54-80-6-125.compute-1.amazonaws.com/services/Engine"),
];

fn golden_partitioning() -> Outcome {
    let start = Instant::now();
    let g = compile(&common::listing(1), &common::descriptions())
        .map_err(|e| e.to_string())?
        .graph;
    let near = QosSample::new(0.005, 100.0).unwrap();
    let far = QosSample::new(0.08, 10.0).unwrap();
    let mut qos = QosMatrix::new(0.0);
    for (k, (e, _)) in LISTING_ENGINES.iter().enumerate() {
        for s in 1..=6 {
            let home = (s - 1) / 2 == k;
            qos.insert(e, &format!("s{s}"), if home { near } else { far });
        }
    }
    let engines: Vec<EngineInfo> = LISTING_ENGINES.iter().map(|(i, u)| engine_info(i, u)).collect();
    let options = ComposeOptions {
        sink: Some("e1".into()),
        base_uid: Some("618e65607dc47807a51a4aa3211c3298fd8".into()),
    };
    let p = partition(&g, &engines, &qos, &IdentitySizes::uniform(&g, 1.0), &options).map_err(|e| e.to_string())?;
    check(p.subs.len() == 6, || format!("{} sub-workflows, expected 6", p.subs.len()))?;
    check(p.composites.len() == 3, || format!("{} composites, expected 3", p.composites.len()))?;
    let ours: Vec<String> = p
        .composites
        .iter()
        .map(|c| encode(c).map(|u| u.text).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let reference: Vec<String> = (2..=4).map(|k| common::listing(k).text).collect();
    let (a, b) = (common::normalize(&ours), common::normalize(&reference));
    for (k, (x, y)) in a.iter().zip(&b).enumerate() {
        check(x == y, || format!("composite {} differs:\n{x:#?}\nvs\n{y:#?}", k + 1))?;
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("6 subs, 3 composites equal to the reference composites in {elapsed:?}"))
}

fn selection_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..1000 {
        let n = rng.gen_range(1..=8);
        let mut features = BTreeMap::new();
        let mut qos = QosMatrix::new(0.0);
        for i in 0..n {
            // Coarse grids make exact ties common.
            let l = rng.gen_range(0..6) as f64 * 0.02;
            let b = rng.gen_range(1..6) as f64 * 5.0;
            let q = QosSample::new(l, b).unwrap();
            let id = format!("e{i}");
            features.insert(id.clone(), q);
            qos.insert(&id, "s", q);
        }
        let size = rng.gen_range(0..40) as f64 * 0.5;
        let clusters = cluster_engines(&features, 3.min(n), size);
        let (survivors, _) = split_dominated(&clusters);
        // Dominance recomputed from member means.
        let means: Vec<(f64, f64)> = clusters
            .iter()
            .map(|c| {
                let k = c.members.len() as f64;
                let l = c.members.iter().map(|m| features[m].latency_s).sum::<f64>() / k;
                let b = c.members.iter().map(|m| features[m].bandwidth_mbps).sum::<f64>() / k;
                (l, b)
            })
            .collect();
        let expected: Vec<&Vec<String>> = clusters
            .iter()
            .zip(&means)
            .filter(|(_, m)| !means.iter().any(|o| m.0 > o.0 && m.1 < o.1))
            .map(|(c, _)| &c.members)
            .collect();
        let kept: Vec<&Vec<String>> = survivors.iter().map(|c| &c.members).collect();
        check(kept == expected, || format!("case {case}: survivors {kept:?}, expected {expected:?}"))?;
        let ids: Vec<String> = survivors.iter().flat_map(|c| c.members.clone()).collect();
        let got = rank_and_select(&ids, "s", &qos, size).map_err(|e| e.to_string())?;

        let mut best: Option<(f64, &String)> = None;
        for id in &ids {
            let q = features[id];
            let t = q.latency_s + size / q.bandwidth_mbps;
            best = match best {
                Some((bt, bid)) if bt < t || (bt == t && bid < id) => Some((bt, bid)),
                _ => Some((t, id)),
            };
        }
        let (bt, bid) = best.ok_or("no survivors")?;
        check(&got.engine == bid && got.time_s == bt, || {
            format!("case {case}: selected {} ({}) but brute force gives {bid} ({bt})", got.engine, got.time_s)
        })?;
    }
    Ok("1000 fixtures: survivors and selection match brute force".into())
}

/// Finest partition of invocation nodes into single-service blocks that are
/// connected by same-service edges and contain every same-service edge.
fn brute_force_partition(services: &[usize], edges: &[(usize, usize)]) -> BTreeSet<BTreeSet<usize>> {
    let n = services.len();
    let same: Vec<(usize, usize)> = edges
        .iter()
        .copied()
        .filter(|&(a, b)| services[a] == services[b])
        .collect();
    let mut best: Option<BTreeSet<BTreeSet<usize>>> = None;
    let mut labels = vec![0usize; n];
    loop {
        let blocks = labels.iter().copied().max().map_or(0, |m| m + 1);
        let parts: Vec<BTreeSet<usize>> = (0..blocks)
            .map(|b| (0..n).filter(|&i| labels[i] == b).collect())
            .collect();
        let valid = same.iter().all(|&(a, b)| labels[a] == labels[b])
            && parts.iter().all(|p| {
                let s = services[*p.iter().next().unwrap()];
                if p.iter().any(|&i| services[i] != s) {
                    return false;
                }
                let mut seen = BTreeSet::from([*p.iter().next().unwrap()]);
                loop {
                    let grow: Vec<usize> = same
                        .iter()
                        .filter_map(|&(a, b)| match (seen.contains(&a), seen.contains(&b)) {
                            (true, false) if p.contains(&b) => Some(b),
                            (false, true) if p.contains(&a) => Some(a),
                            _ => None,
                        })
                        .collect();
                    if grow.is_empty() {
                        break;
                    }
                    seen.extend(grow);
                }
                seen.len() == p.len()
            });
        if valid && best.as_ref().is_none_or(|b| parts.len() > b.len()) {
            best = Some(parts.into_iter().collect());
        }
        // Next restricted growth string.
        let mut i = n;
        loop {
            if i <= 1 {
                return best.unwrap();
            }
            i -= 1;
            let max_prefix = labels[..i].iter().copied().max().unwrap();
            if labels[i] <= max_prefix {
                labels[i] += 1;
                for l in labels.iter_mut().skip(i + 1) {
                    *l = 0;
                }
                break;
            }
        }
    }
}

fn decomposition_maximality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cases = 300;
    for case in 0..cases {
        let dag = common::random_dag(&mut rng, 8, 3, 0.4);
        let g = compile(&dag.source, &dag.registry).map_err(|e| e.to_string())?.graph;
        let got: BTreeSet<BTreeSet<String>> = decompose(&g)
            .iter()
            .map(|s| s.nodes.iter().map(|n| n.to_string()).collect())
            .collect();
        let want: BTreeSet<BTreeSet<String>> = brute_force_partition(&dag.service_of, &dag.edges)
            .into_iter()
            .map(|block| {
                block
                    .into_iter()
                    .map(|i| format!("p{}.Op{}", dag.service_of[i], i + 1))
                    .collect()
            })
            .collect();
        check(got == want, || format!("case {case}: {got:?} != {want:?}\n{}", dag.source.text))?;
    }
    Ok(format!("{cases} random DAGs match brute-force finest partition"))
}

fn round_trip() -> Outcome {
    let mut corpus: Vec<(SourceUnit, Arc<dyn DescriptionResolver + Send + Sync>)> = Vec::new();
    for p in Pattern::ALL {
        for n in 2..=14 {
            let w = generate_workflow(p, n).map_err(|e| e.to_string())?;
            corpus.push((w.source, Arc::new(w.registry)));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let d = common::random_dag(&mut rng, 8, 3, 0.35);
        corpus.push((d.source, Arc::new(d.registry)));
    }
    corpus.push((common::listing(1), Arc::new(common::descriptions())));
    let engine = [engine_info("e1", "http://e1.example/Engine")];
    for (src, reg) in &corpus {
        let g = compile(src, reg.as_ref()).map_err(|e| format!("{}: {e}", src.origin))?.graph;
        let subs = decompose(&g);
        let plan = PlacementPlan::single(&subs, "e1");
        let composites = compose(&g, &subs, &plan, &engine, &ComposeOptions::default()).map_err(|e| e.to_string())?;
        check(composites.len() == 1, || format!("{}: {} composites", src.origin, composites.len()))?;
        let text = encode(&composites[0]).map_err(|e| e.to_string())?;
        let back = compile(&text, reg.as_ref()).map_err(|e| format!("{}: {e}\n{}", src.origin, text.text))?.graph;
        check(back.is_isomorphic(&g), || format!("{} is not isomorphic after round trip", src.origin))?;
    }
    Ok(format!("{} workflows round-trip isomorphically", corpus.len()))
}

/// Evaluates a random DAG directly, without the engine.
fn evaluate(dag: &common::RandomDag, a: &Datum) -> BTreeMap<String, i64> {
    let n = dag.service_of.len();
    let mut value: Vec<Option<Datum>> = vec![None; n];
    for j in 0..n {
        let preds: Vec<usize> = dag.edges.iter().filter(|e| e.1 == j).map(|e| e.0).collect();
        let args = if preds.is_empty() {
            vec![a.clone()]
        } else {
            preds.iter().map(|&i| value[i].clone().unwrap()).collect()
        };
        let s = dag.service_of[j];
        value[j] = Some(pure_result(&InvocationRequest {
            service: format!("s{s}"),
            service_name: format!("Svc{s}"),
            description_url: format!("http://dags.example/documents/svc{s}.json"),
            port: format!("p{s}"),
            port_name: format!("Port{s}"),
            operation: format!("Op{}", j + 1),
            args,
            returns: TypeTag::Int,
        }));
    }
    (0..n)
        .filter(|&i| !dag.edges.iter().any(|e| e.0 == i))
        .map(|i| (format!("x{}", i + 1), value[i].as_ref().unwrap().as_int().unwrap()))
        .collect()
}

fn dataflow_semantics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dags = 40;
    let base = "0123456789abcdef0123456789abcdef012";
    let engines: Vec<EngineInfo> = LISTING_ENGINES.iter().map(|(i, u)| engine_info(i, u)).collect();
    for case in 0..dags {
        let dag = common::random_dag(&mut rng, 8, 3, 0.35);
        let g = compile(&dag.source, &dag.registry).map_err(|e| e.to_string())?.graph;
        let subs = decompose(&g);
        let mut plan = PlacementPlan::default();
        for s in &subs {
            plan.assignments.insert(s.id, LISTING_ENGINES[rng.gen_range(0..3)].0.to_string());
        }
        let options = ComposeOptions {
            sink: Some("e1".into()),
            base_uid: Some(base.into()),
        };
        let composites = compose(&g, &subs, &plan, &engines, &options).map_err(|e| e.to_string())?;
        let a = Datum::int(rng.gen_range(-50..50), 1.0);
        let expected = evaluate(&dag, &a);
        let reg: Arc<dyn DescriptionResolver + Send + Sync> = Arc::new(dag.registry.clone());

        for seed in 0..10u64 {
            let mut cluster = LocalCluster::new(PureServices::default(), SimulatedTransport::new(Some(QosSample::new(0.01, 10.0).unwrap())), Some(seed));
            for (id, url) in LISTING_ENGINES {
                cluster.add_engine(id, url, reg.clone());
            }
            let mut order: Vec<usize> = (0..composites.len()).collect();
            // Deploy in a seed-dependent order so early values get buffered.
            order.rotate_left(seed as usize % composites.len().max(1));
            for &k in &order {
                let c = &composites[k];
                let unit = encode(c).map_err(|e| e.to_string())?;
                let host = c.host_engine.as_deref().unwrap();
                cluster.deploy(host, &unit).map_err(|e| e.to_string())?;
                if c.input_names().contains(&"a".to_string()) {
                    cluster
                        .inject(
                            host,
                            ValueEnvelope {
                                uid: base.into(),
                                variable: "a".into(),
                                datum: a.clone(),
                            },
                        )
                        .map_err(|e| e.to_string())?;
                }
            }
            cluster.run().map_err(|e| e.to_string())?;

            let mut outputs = BTreeMap::new();
            let mut fired: BTreeMap<NodeId, usize> = BTreeMap::new();
            for c in &composites {
                let e = cluster.engine(c.host_engine.as_deref().unwrap()).unwrap();
                let id = e.deployment(c.uid.as_deref().unwrap()).unwrap();
                let rec = e.record(id).unwrap();
                check(rec.state == WorkflowState::Completed, || {
                    format!("case {case} seed {seed}: {} ended {:?}", rec.uid, rec.state)
                })?;
                let mut ready = BTreeSet::new();
                for ev in &rec.trace {
                    match ev {
                        TraceEvent::InputBound { variable, .. } => {
                            ready.insert(NodeId::input(variable));
                        }
                        TraceEvent::Finished { node, .. } => {
                            ready.insert(node.clone());
                        }
                        TraceEvent::Fired { node, .. } => {
                            *fired.entry(node.clone()).or_default() += 1;
                            for edge in c.graph.in_edges(node) {
                                check(ready.contains(&edge.from), || {
                                    format!("case {case} seed {seed}: {node} fired before {}", edge.from)
                                })?;
                            }
                        }
                        TraceEvent::Dispatched { .. } => {}
                    }
                }
                for (k, v) in &rec.outputs {
                    if k.starts_with('x') {
                        outputs.insert(k.clone(), v.as_int().unwrap());
                    }
                }
            }
            for (k, v) in cluster.engine("e1").unwrap().collected(base) {
                outputs.insert(k, v.as_int().unwrap());
            }
            let all_once = g.invocations().all(|n| fired.get(&n.id) == Some(&1)) && fired.len() == g.invocations().count();
            check(all_once, || format!("case {case} seed {seed}: firing counts {fired:?}"))?;
            check(outputs == expected, || {
                format!("case {case} seed {seed}: outputs {outputs:?}, expected {expected:?}")
            })?;
        }
    }
    Ok(format!("{dags} DAGs x 10 interleavings: identical outputs, single firing, causal order"))
}

struct TrendRow {
    label: String,
    report: orchestra::harness::RunReport,
    elapsed: Duration,
}

fn experiment_trends() -> Outcome {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for p in Pattern::ALL {
        for n in [8, 16] {
            let cfg = ExperimentConfig::new(Scenario::Continental, p, n);
            let t = Instant::now();
            let report = run_experiment(&cfg).map_err(|e| e.to_string())?;
            rows.push(TrendRow {
                label: cfg.label(),
                report,
                elapsed: t.elapsed(),
            });
        }
        let mut cfg = ExperimentConfig::new(Scenario::Intercontinental, p, 16);
        cfg.modes = vec![Mode::Centralized, Mode::Distributed];
        let t = Instant::now();
        let report = run_experiment(&cfg).map_err(|e| e.to_string())?;
        rows.push(TrendRow {
            label: cfg.label(),
            report,
            elapsed: t.elapsed(),
        });
    }
    let mut lines = Vec::new();
    for row in &rows {
        let r = &row.report;
        let per_mode = r.runs.len() / r.means.len();
        if per_mode != 420 {
            failures.push(format!("{}: {per_mode} runs per mode", row.label));
        }
        if row.elapsed >= Duration::from_secs(60) {
            failures.push(format!("{}: took {:?}", row.label, row.elapsed));
        }
        if r.scenario == "continental" {
            let (local, remote) = (r.mean_time(Mode::CentralizedLocal).unwrap(), r.mean_time(Mode::CentralizedRemote).unwrap());
            let (sa, sb) = (r.speedups.s_alpha.unwrap(), r.speedups.s_beta.unwrap());
            if !(local < remote) {
                failures.push(format!("{}: local {local} >= remote {remote}", row.label));
            }
            if !(sb > sa && sa > 0.0) {
                failures.push(format!("{}: S_beta {sb} S_alpha {sa}", row.label));
            }
            lines.push(format!("{} S_alpha={sa:.3} S_beta={sb:.3} ({:?})", row.label, row.elapsed));
        } else {
            let s = r.speedups.s.unwrap();
            if !(s > 1.5) {
                failures.push(format!("{}: S = {s}", row.label));
            }
            let by_size: Vec<f64> = r.per_size.iter().map(|x| x.speedups.s.unwrap()).collect();
            if by_size.windows(2).any(|w| w[1] < w[0]) {
                failures.push(format!("{}: S decreases with size {by_size:?}", row.label));
            }
            lines.push(format!(
                "{} S={s:.3} (1MB {:.3} -> 21MB {:.3}) ({:?})",
                row.label,
                by_size[0],
                by_size[by_size.len() - 1],
                row.elapsed
            ));
        }
    }
    for p in Pattern::ALL {
        let sa = |n: usize| {
            rows.iter()
                .find(|r| r.report.scenario == "continental" && r.report.pattern == p && r.report.services == n)
                .and_then(|r| r.report.speedups.s_alpha)
                .unwrap()
        };
        if !(sa(16) > sa(8)) {
            failures.push(format!("{p}: S_alpha(16) {} <= S_alpha(8) {}", sa(16), sa(8)));
        }
    }
    for l in &lines {
        println!("    {l}");
    }
    if failures.is_empty() {
        Ok(format!("{} configurations, 420 runs per mode each", rows.len()))
    } else {
        Err(failures.join("; "))
    }
}

fn degenerate_topology() -> Outcome {
    let q = QosSample::new(0.02, 40.0).unwrap();
    let mut workloads: Vec<Workload> = Vec::new();
    for p in Pattern::ALL {
        for n in [2, 6, 9] {
            workloads.push(generate_workflow(p, n).map_err(|e| e.to_string())?);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let d = common::random_dag(&mut rng, 8, 3, 0.35);
        let outputs = compile(&d.source, &d.registry)
            .map_err(|e| e.to_string())?
            .graph
            .outputs()
            .map(|n| n.label())
            .collect();
        workloads.push(Workload {
            pattern: Pattern::Pipeline,
            services: 3,
            source: d.source,
            registry: d.registry,
            inputs: vec!["a".into()],
            outputs,
        });
    }
    let mut worst: f64 = 0.0;
    let count = workloads.len();
    for w in workloads {
        let topo = build_topology(&single_engine(w.services.max(3), q)).map_err(|e| e.to_string())?;
        let prepared = Prepared::new(topo, w).map_err(|e| e.to_string())?;
        for size in [0.5, 4.0, 21.0] {
            let c = prepared.run(Mode::Centralized, size, 0, 0, false, 0.05).map_err(|e| e.to_string())?;
            let d = prepared.run(Mode::Distributed, size, 0, 0, false, 0.05).map_err(|e| e.to_string())?;
            worst = worst.max((c.completion_s - d.completion_s).abs());
        }
    }
    check(worst <= 1e-9, || format!("max difference {worst}"))?;
    Ok(format!("{count} workflows x 3 sizes, max |T_dist - T_central| = {worst:e}"))
}

fn probe_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut worst_l, mut worst_b): (f64, f64) = (0.0, 0.0);
    for i in 0..1000 {
        let truth = QosSample::new(rng.gen_range(0.0..0.5), rng.gen_range(0.05..1000.0)).unwrap();
        let svc = format!("s{i}");
        let channel = SimulatedChannel::new(rng.gen_range(0.1..50.0)).with_link(&svc, truth);
        let l = probe_latency(&channel, &svc, 5).map_err(|e| e.to_string())?;
        let b = probe_bandwidth(&channel, &svc).map_err(|e| e.to_string())?;
        worst_l = worst_l.max((l - truth.latency_s).abs());
        worst_b = worst_b.max(((b - truth.bandwidth_mbps) / truth.bandwidth_mbps).abs());
    }
    check(worst_l <= 1e-9 && worst_b <= 1e-6, || {
        format!("latency error {worst_l:e}, bandwidth relative error {worst_b:e}")
    })?;
    Ok(format!("1000 links: latency error {worst_l:e} s, bandwidth relative error {worst_b:e}"))
}

fn bench_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut topo = continental(8);
    topo.noise = Some(orchestra::harness::NoiseSpec { spread: 0.1 });
    let mut a = ExperimentConfig::new(Scenario::Topology(Box::new(topo)), Pattern::EndToEnd, 8);
    a.input_sizes_mb = vec![1.0, 5.0, 9.0];
    a.repetitions = 3;
    let mut b = ExperimentConfig::new(Scenario::Intercontinental, Pattern::Pipeline, 16);
    b.modes = vec![Mode::Centralized, Mode::Distributed];
    b.input_sizes_mb = vec![2.0, 4.0];
    b.repetitions = 2;
    let config = orchestra::harness::BenchConfig { experiments: vec![a, b] };
    let path = dir.path().join("bench.json");
    std::fs::write(&path, serde_json::to_string(&config).unwrap()).map_err(|e| e.to_string())?;
    let mut reports = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("out{k}"));
        let args = [
            "orchestra",
            "bench",
            path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "42",
        ];
        let (mut so, mut se) = (Vec::new(), Vec::new());
        let code = orchestra::cli::run(args, &mut so, &mut se);
        check(code == 0, || format!("bench exited {code}: {}", String::from_utf8_lossy(&se)))?;
        reports.push(std::fs::read(out.join("report.json")).map_err(|e| e.to_string())?);
    }
    check(reports[0] == reports[1], || "reports differ".into())?;
    Ok(format!("two runs produced identical {}-byte reports", reports[0].len()))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("golden partitioning", golden_partitioning),
        ("transmission-time selection", selection_oracle),
        ("decomposition maximality", decomposition_maximality),
        ("round-trip", round_trip),
        ("dataflow semantics", dataflow_semantics),
        ("experiment trends", experiment_trends),
        ("degenerate-topology equivalence", degenerate_topology),
        ("probe fidelity", probe_fidelity),
        ("bench determinism", bench_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {} ({name}): {detail} [{:?}]", i + 1, start.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
