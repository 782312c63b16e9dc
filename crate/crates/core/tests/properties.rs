use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vk_core::colimit::{
    cocones_isomorphic, colimit_specialized, colimit_universal, congruence_closure, primary_identifications, simplify,
};
use vk_core::diagram::Diagram;
use vk_core::gen::{random_diagram, random_morphism, random_presheaf, random_signature, GenConfig};
use vk_core::io::{diagram_to_raw, parse_workspace, to_json};
use vk_core::paths::{ElementGraph, MappingPath};
use vk_core::presheaf::{is_pullback_square, pullback, quotient, Congruence};
use vk_core::semantics::{random_typed_instance, roundtrip_counit};
use vk_core::vk::{
    canonical_witness, check_bruteforce, check_combined, check_image_disjoint, decision_route, validate_witness,
    Condition, Verdict,
};

fn diagram(seed: u64) -> Diagram {
    random_diagram(&mut ChaCha8Rng::seed_from_u64(seed), &GenConfig::default())
}

fn no_fetch(_: &str) -> vk_core::Result<String> {
    Err(vk_core::Error::Format("no typing expected".into()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn workspace_json_round_trips(seed in any::<u64>()) {
        let d = diagram(seed);
        let text = to_json(&diagram_to_raw(&d)).unwrap();
        let ws = parse_workspace(&text, &no_fetch).unwrap();
        prop_assert_eq!(&*ws.diagram, &d);
        prop_assert_eq!(to_json(&ws.raw).unwrap(), text);
    }

    #[test]
    fn colimit_cocone_commutes_and_covers(seed in any::<u64>()) {
        let d = diagram(seed);
        let c = colimit_universal(&d).unwrap();
        prop_assert!(c.check_commutative(&d).is_ok());
        prop_assert!(c.is_jointly_surjective());
        if !d.shape().has_directed_cycle() {
            let s = colimit_specialized(&d).unwrap();
            prop_assert!(cocones_isomorphic(&d, &c, &s));
        }
    }

    #[test]
    fn verdict_is_forest_test(seed in any::<u64>()) {
        let d = diagram(seed);
        let cyclic = (0..d.signature().sort_count()).any(|x| {
            let g = ElementGraph::new(&d, x);
            g.edge_count() + components(&g) > g.node_count()
        });
        let v = decision_route(&d, 10_000_000).unwrap();
        prop_assert_eq!(v.result == Verdict::NotVk, cyclic);
        for c in Condition::ALL {
            prop_assert_eq!(check_bruteforce(&d, c, 10_000_000).unwrap().result, v.result);
        }
    }

    #[test]
    fn witnesses_validate(seed in any::<u64>()) {
        let d = diagram(seed);
        if let Some(w) = canonical_witness(&d) {
            prop_assert!(validate_witness(&d, &w).is_empty());
            let again = canonical_witness(&d).unwrap();
            prop_assert_eq!(w, again);
        }
    }

    #[test]
    fn combined_flag_matches_and_cocone_is_colimit(seed in any::<u64>()) {
        let d = diagram(seed);
        if d.shape().has_directed_cycle() || check_image_disjoint(&d).unwrap().is_some() {
            return Ok(());
        }
        let c = check_combined(&d).unwrap();
        let u = colimit_universal(&d).unwrap();
        prop_assert!(cocones_isomorphic(&d, &c.cocone, &u));
        let b = check_bruteforce(&d, Condition::Different, 10_000_000).unwrap();
        prop_assert_eq!(c.verdict.result, b.result);
    }

    #[test]
    fn simplify_preserves_colimit_and_verdict(seed in any::<u64>()) {
        let d = diagram(seed);
        let s = simplify(&d).unwrap();
        prop_assert!(s.diagram.shape().vertex_count() <= d.shape().vertex_count());
        let small = colimit_universal(&s.diagram).unwrap();
        let lifted = s.lift_cocone(&d, &small).unwrap();
        prop_assert!(lifted.check_commutative(&d).is_ok());
        prop_assert!(cocones_isomorphic(&d, &lifted, &colimit_universal(&d).unwrap()));
        prop_assert_eq!(
            decision_route(&s.diagram, 10_000_000).unwrap().result,
            decision_route(&d, 10_000_000).unwrap().result
        );
    }

    #[test]
    fn primary_identifications_join_minimal_elements(seed in any::<u64>()) {
        let d = diagram(seed);
        if d.shape().has_directed_cycle() {
            return Ok(());
        }
        for p in primary_identifications(&d).unwrap() {
            prop_assert!(p.witness.validate(&d).is_ok());
            prop_assert_eq!((p.witness.start, p.witness.end()), (p.left, p.right));
            prop_assert!(d.shape().is_minimal(p.left.vertex) && d.shape().is_minimal(p.right.vertex));
        }
    }

    #[test]
    fn path_reversal_and_reduction(seed in any::<u64>()) {
        let d = diagram(seed);
        if let Some(w) = canonical_witness(&d) {
            if let Some(vk_core::vk::Witness::DistinctPaths { p1, p2, .. }) = w.to_distinct_paths(&d) {
                for p in [p1, p2] {
                    prop_assert_eq!(p.reverse().reverse(), p.clone());
                    prop_assert!(p.reverse().validate(&d).is_ok());
                    let r: MappingPath = p.reduce_inner_cycles();
                    prop_assert!(r.is_inner_cycle_free());
                    prop_assert!(r.validate(&d).is_ok());
                    prop_assert_eq!((r.start, r.end()), (p.start, p.end()));
                }
            }
        }
    }

    #[test]
    fn pullbacks_are_pullbacks(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = GenConfig::default();
        let sig = Arc::new(random_signature(&mut rng, &cfg));
        let c = Arc::new(random_presheaf(&sig, &mut rng, 3));
        let a = Arc::new(random_presheaf(&sig, &mut rng, 3));
        let b = Arc::new(random_presheaf(&sig, &mut rng, 3));
        if let (Some(f), Some(g)) = (random_morphism(&a, &c, false, &mut rng), random_morphism(&b, &c, false, &mut rng)) {
            let pb = pullback(&f, &g).unwrap();
            prop_assert!(is_pullback_square(&pb.right, &pb.left, &g, &f));
            let u = pb.mediate(&pb.left, &pb.right).unwrap();
            prop_assert!(u.is_identity());
        }
    }

    #[test]
    fn quotients_by_generated_congruences(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = GenConfig::default();
        let sig = Arc::new(random_signature(&mut rng, &cfg));
        let p = Arc::new(random_presheaf(&sig, &mut rng, 4));
        let pairs: Vec<(usize, usize, usize)> = (0..3)
            .filter_map(|k| {
                let x = k % sig.sort_count();
                let n = p.size(x);
                (n > 0).then(|| (x, (seed as usize + k) % n, (seed as usize / 7 + k) % n))
            })
            .collect();
        let cong = Congruence::generated_by(&p, &pairs);
        prop_assert!(cong.check_compatible(&p).is_ok());
        match congruence_closure(&p, &pairs) {
            Ok(c) => prop_assert_eq!(&c, &cong),
            Err(_) => prop_assert_ne!(&Congruence::from_pairs(&p, &pairs), &cong),
        }
        let q = quotient(&p, &cong).unwrap();
        prop_assert!(q.projection.is_surjective());
        for &(x, a, b) in &pairs {
            prop_assert_eq!(q.projection.apply(x, a), q.projection.apply(x, b));
        }
    }

    #[test]
    fn counit_is_always_an_isomorphism(seed in any::<u64>()) {
        let d = diagram(seed);
        let c = colimit_universal(&d).unwrap();
        let t = random_typed_instance(&c.apex, &mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed));
        prop_assert!(roundtrip_counit(&d, &c, &t).unwrap().pass);
    }
}

fn components(g: &ElementGraph) -> usize {
    let n = g.node_count();
    let mut seen = vec![false; n];
    let mut count = 0;
    for s in 0..n {
        if seen[s] {
            continue;
        }
        count += 1;
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(v) = stack.pop() {
            for &(e, dir) in g.adjacent(v) {
                let w = g.far_end(e, dir);
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    count
}
