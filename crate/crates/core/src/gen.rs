//! Seeded random signatures, presheaves, morphisms and diagrams.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::diagram::Diagram;
use crate::presheaf::{BaseSignature, Presheaf, PresheafMorphism};
use crate::shape::{ShapeEdge, ShapeGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenConfig {
    pub max_sorts: usize,
    pub max_ops: usize,
    pub max_vertices: usize,
    pub max_edges: usize,
    pub max_carrier: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            max_sorts: 2,
            max_ops: 3,
            max_vertices: 5,
            max_edges: 6,
            max_carrier: 4,
        }
    }
}

const SORT_NAMES: [&str; 4] = ["A", "B", "C", "D"];

pub fn random_signature(rng: &mut impl Rng, cfg: &GenConfig) -> BaseSignature {
    let n = rng.gen_range(1..=cfg.max_sorts.clamp(1, SORT_NAMES.len()));
    let ops: Vec<(String, String, String)> = (0..rng.gen_range(0..=cfg.max_ops))
        .map(|k| {
            (
                format!("o{k}"),
                SORT_NAMES[rng.gen_range(0..n)].to_string(),
                SORT_NAMES[rng.gen_range(0..n)].to_string(),
            )
        })
        .collect();
    BaseSignature::new(SORT_NAMES[..n].iter().copied(), ops).expect("generated names are distinct")
}

/// Carriers of size `0..=max` (empty with low probability), ops filled at random.
pub fn random_presheaf(sig: &Arc<BaseSignature>, rng: &mut impl Rng, max: usize) -> Presheaf {
    let mut sizes: Vec<usize> = (0..sig.sort_count())
        .map(|_| {
            if max == 0 || rng.gen_ratio(1, 6) {
                0
            } else {
                rng.gen_range(1..=max)
            }
        })
        .collect();
    let mut changed = true;
    while changed {
        changed = false;
        for op in sig.ops() {
            if sizes[op.source] > 0 && sizes[op.target] == 0 {
                sizes[op.target] = 1;
                changed = true;
            }
        }
    }
    let carriers = sig
        .sorts()
        .iter()
        .zip(&sizes)
        .map(|(s, &n)| (0..n).map(|i| format!("{}{i}", s.to_lowercase())).collect())
        .collect();
    let tables = sig
        .ops()
        .iter()
        .map(|op| {
            (0..sizes[op.source])
                .map(|_| rng.gen_range(0..sizes[op.target]))
                .collect()
        })
        .collect();
    Presheaf::new(sig.clone(), carriers, tables).expect("tables are total")
}

/// A random natural transformation found by randomized backtracking, or
/// `None` if none exists (or the search gives up).
pub fn random_morphism(
    dom: &Arc<Presheaf>,
    cod: &Arc<Presheaf>,
    injective: bool,
    rng: &mut impl Rng,
) -> Option<PresheafMorphism> {
    let sig = dom.signature().clone();
    let vars: Vec<(usize, usize)> = (0..sig.sort_count())
        .flat_map(|x| (0..dom.size(x)).map(move |e| (x, e)))
        .collect();
    let mut comps: Vec<Vec<Option<usize>>> = (0..sig.sort_count()).map(|x| vec![None; dom.size(x)]).collect();
    let mut steps = 0usize;
    let ok = assign(dom, cod, injective, rng, &vars, 0, &mut comps, &mut steps);
    if !ok {
        return None;
    }
    let comps = comps
        .into_iter()
        .map(|c| c.into_iter().map(|v| v.expect("assigned")).collect())
        .collect();
    PresheafMorphism::new(dom.clone(), cod.clone(), comps).ok()
}

#[allow(clippy::too_many_arguments)]
fn assign(
    dom: &Presheaf,
    cod: &Presheaf,
    injective: bool,
    rng: &mut impl Rng,
    vars: &[(usize, usize)],
    k: usize,
    comps: &mut Vec<Vec<Option<usize>>>,
    steps: &mut usize,
) -> bool {
    if k == vars.len() {
        return true;
    }
    *steps += 1;
    if *steps > 20_000 {
        return false;
    }
    let (x, e) = vars[k];
    let sig = dom.signature();
    let mut candidates: Vec<usize> = (0..cod.size(x)).collect();
    candidates.shuffle(rng);
    for c in candidates {
        if injective && comps[x].contains(&Some(c)) {
            continue;
        }
        let consistent = sig.ops().iter().enumerate().all(|(o, op)| {
            let out_ok = op.source != x
                || match comps[op.target][dom.apply(o, e)] {
                    Some(t) => t == cod.apply(o, c),
                    None => !(op.target == x && dom.apply(o, e) == e) || cod.apply(o, c) == c,
                };
            let in_ok = op.target != x
                || (0..dom.size(op.source))
                    .all(|e2| dom.apply(o, e2) != e || comps[op.source][e2].is_none_or(|s| cod.apply(o, s) == c));
            out_ok && in_ok
        });
        if !consistent {
            continue;
        }
        comps[x][e] = Some(c);
        if assign(dom, cod, injective, rng, vars, k + 1, comps, steps) {
            return true;
        }
        comps[x][e] = None;
    }
    false
}

/// Up to `max_vertices` random components joined by up to `max_edges`
/// random homomorphisms; loops and directed cycles are allowed.
pub fn random_diagram(rng: &mut impl Rng, cfg: &GenConfig) -> Diagram {
    let sig = Arc::new(random_signature(rng, cfg));
    let n = rng.gen_range(1..=cfg.max_vertices.max(1));
    let comps: Vec<Arc<Presheaf>> = (0..n)
        .map(|_| Arc::new(random_presheaf(&sig, rng, cfg.max_carrier)))
        .collect();
    let mut edges = Vec::new();
    let mut arrows = Vec::new();
    for _ in 0..rng.gen_range(0..=cfg.max_edges) {
        for _ in 0..4 {
            let (s, t) = (rng.gen_range(0..n), rng.gen_range(0..n));
            let injective = rng.gen_ratio(1, 3);
            if let Some(m) = random_morphism(&comps[s], &comps[t], injective, rng) {
                edges.push(ShapeEdge {
                    name: format!("e{}", edges.len()),
                    source: s,
                    target: t,
                });
                arrows.push(m);
                break;
            }
        }
    }
    let shape = ShapeGraph::from_parts((0..n).map(|v| format!("v{v}")).collect(), edges);
    Diagram::new(sig, shape, comps, arrows).expect("generated arrows fit their endpoints")
}

/// Like [`random_diagram`] but with an acyclic shape.
pub fn random_acyclic_diagram(rng: &mut impl Rng, cfg: &GenConfig) -> Diagram {
    loop {
        let d = random_diagram(rng, cfg);
        if !d.shape().has_directed_cycle() {
            return d;
        }
    }
}

/// Two random homomorphisms `B → D`.
pub fn random_parallel_pair(rng: &mut impl Rng, cfg: &GenConfig) -> (PresheafMorphism, PresheafMorphism) {
    loop {
        let sig = Arc::new(random_signature(rng, cfg));
        let b = Arc::new(random_presheaf(&sig, rng, cfg.max_carrier));
        let d = Arc::new(random_presheaf(&sig, rng, cfg.max_carrier));
        let f = random_morphism(&b, &d, rng.gen_ratio(1, 3), rng);
        let g = random_morphism(&b, &d, rng.gen_ratio(1, 3), rng);
        if let (Some(f), Some(g)) = (f, g) {
            return (f, g);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_diagrams_respect_bounds_and_are_deterministic() {
        let cfg = GenConfig::default();
        for seed in 0..50 {
            let a = random_diagram(&mut ChaCha8Rng::seed_from_u64(seed), &cfg);
            let b = random_diagram(&mut ChaCha8Rng::seed_from_u64(seed), &cfg);
            assert_eq!(a, b);
            assert!(a.shape().vertex_count() <= 5 && a.shape().edge_count() <= 6);
            assert!(a.signature().sort_count() <= 2 && a.signature().ops().len() <= 3);
            assert!(a
                .components()
                .iter()
                .all(|c| (0..c.signature().sort_count()).all(|x| c.size(x) <= 4)));
        }
    }

    #[test]
    fn injective_search_finds_injections() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sig = Arc::new(BaseSignature::graphs());
        let p = Arc::new(random_presheaf(&sig, &mut rng, 3));
        let m = random_morphism(&p, &p, true, &mut rng).unwrap();
        assert!(m.is_injective());
    }
}
