mod common;

use std::collections::BTreeSet;

use orchestra::dsl::{compile, encode};
use orchestra::harness::{build_topology, single_engine, Mode, Pattern, Prepared, Workload};
use orchestra::partitioner::{compose, decompose, ComposeOptions, PlacementPlan};
use orchestra::qos::{EngineInfo, QosSample};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dag(seed: u64) -> common::RandomDag {
    common::random_dag(&mut ChaCha8Rng::seed_from_u64(seed), 8, 3, 0.35)
}

fn engines() -> Vec<EngineInfo> {
    (1..=3)
        .map(|i| EngineInfo {
            id: format!("e{i}"),
            endpoint: format!("http://e{i}.example/Engine"),
            region: format!("r{i}"),
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decomposition_covers_each_invocation_once(seed in any::<u64>()) {
        let d = dag(seed);
        let g = compile(&d.source, &d.registry).unwrap().graph;
        let subs = decompose(&g);
        let mut seen = BTreeSet::new();
        for s in &subs {
            for n in &s.nodes {
                prop_assert!(seen.insert(n.clone()), "{n} in two sub-workflows");
                let inv = g.node(n).unwrap().invocation().unwrap();
                prop_assert_eq!(&inv.service, &s.service_id);
            }
        }
        prop_assert_eq!(seen.len(), g.invocations().count());
    }

    #[test]
    fn encode_then_compile_is_isomorphic(seed in any::<u64>()) {
        let d = dag(seed);
        let g = compile(&d.source, &d.registry).unwrap().graph;
        let subs = decompose(&g);
        let composites = compose(&g, &subs, &PlacementPlan::single(&subs, "e1"), &engines()[..1], &ComposeOptions::default()).unwrap();
        let text = encode(&composites[0]).unwrap();
        let back = compile(&text, &d.registry).unwrap().graph;
        prop_assert!(back.is_isomorphic(&g), "{}", text.text);
    }

    #[test]
    fn every_composite_reencodes(seed in any::<u64>(), placement in any::<u64>()) {
        let d = dag(seed);
        let g = compile(&d.source, &d.registry).unwrap().graph;
        let subs = decompose(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(placement);
        let mut plan = PlacementPlan::default();
        for s in &subs {
            plan.assignments.insert(s.id, format!("e{}", rng.gen_range(1..=3)));
        }
        let options = ComposeOptions { sink: Some("e1".into()), base_uid: None };
        let composites = compose(&g, &subs, &plan, &engines(), &options).unwrap();
        let hosts: BTreeSet<_> = plan.assignments.values().cloned().collect();
        prop_assert!(composites.len() <= hosts.len() + 1);
        let mut invocations = 0;
        for c in &composites {
            let text = encode(c).unwrap();
            let back = compile(&text, &d.registry).unwrap().graph;
            prop_assert!(back.is_isomorphic(&c.graph));
            prop_assert!(c.forwards.iter().all(|f| Some(&f.engine) != c.host_engine.as_ref()));
            invocations += c.graph.invocations().count();
        }
        prop_assert_eq!(invocations, g.invocations().count());
    }

    #[test]
    fn one_engine_modes_agree(seed in any::<u64>(), size in 0.1f64..25.0, l in 0.0f64..0.2, b in 1.0f64..200.0) {
        let d = dag(seed);
        let outputs = compile(&d.source, &d.registry).unwrap().graph.outputs().map(|n| n.label()).collect();
        let w = Workload {
            pattern: Pattern::Pipeline,
            services: 3,
            source: d.source,
            registry: d.registry,
            inputs: vec!["a".into()],
            outputs,
        };
        let topo = build_topology(&single_engine(3, QosSample::new(l, b).unwrap())).unwrap();
        let prepared = Prepared::new(topo, w).unwrap();
        let c = prepared.run(Mode::Centralized, size, 0, 1, false, 0.05).unwrap();
        let dist = prepared.run(Mode::Distributed, size, 0, 1, false, 0.05).unwrap();
        prop_assert!((c.completion_s - dist.completion_s).abs() <= 1e-9);
        prop_assert_eq!(c.outputs, dist.outputs);
    }
}
