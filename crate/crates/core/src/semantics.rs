//! Typed instances over a cocone apex, pulling them back to cartesian
//! families (κ*), pushing families forward (κ_*), and the unit/counit
//! round-trips.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::colimit::{colimit_universal, mediating_morphism, Cocone};
use crate::diagram::{Diagram, DiagramTransformation};
use crate::error::{Error, Result};
use crate::presheaf::{pullback, Presheaf, PresheafMorphism};

/// `σ: K → S` for a designated apex `S`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypedInstance {
    pub typing: PresheafMorphism,
}

impl TypedInstance {
    pub fn new(typing: PresheafMorphism, apex: &Presheaf) -> Result<Self> {
        if **typing.codomain() != *apex {
            return Err(Error::ApexMismatch);
        }
        Ok(Self { typing })
    }

    pub fn instance(&self) -> &Arc<Presheaf> {
        self.typing.domain()
    }

    pub fn identity(apex: &Arc<Presheaf>) -> Self {
        Self {
            typing: PresheafMorphism::identity(apex),
        }
    }
}

/// A transformation `τ: E ⇒ D` whose naturality squares are all pullbacks.
#[derive(Debug, Clone)]
pub struct CartesianFamily {
    pub transformation: DiagramTransformation,
}

impl CartesianFamily {
    pub fn new(transformation: DiagramTransformation) -> Result<Self> {
        transformation
            .cartesian_check()
            .map_err(|f| Error::NotCartesian(f.edge))?;
        Ok(Self { transformation })
    }

    pub fn source(&self) -> &Arc<Diagram> {
        &self.transformation.domain
    }

    pub fn target(&self) -> &Arc<Diagram> {
        &self.transformation.codomain
    }

    pub fn identity(d: &Arc<Diagram>) -> Self {
        Self {
            transformation: DiagramTransformation::identity(d),
        }
    }
}

/// `κ*(σ)` together with the second projections `λᵢ: Eᵢ → K`.
#[derive(Debug, Clone)]
pub struct PulledBack {
    pub family: CartesianFamily,
    pub projections: Vec<PresheafMorphism>,
}

fn check_cocone(d: &Diagram, c: &Cocone) -> Result<()> {
    c.check_commutative(d)
}

/// `Eᵢ = Dᵢ ×_S K` along `κᵢ` and `σ`; `E_d` is induced by the pullback at the target.
pub fn pullback_along_cocone(d: &Diagram, c: &Cocone, t: &TypedInstance) -> Result<PulledBack> {
    if *t.typing.codomain() != c.apex {
        return Err(Error::ApexMismatch);
    }
    check_cocone(d, c)?;
    let pbs = c
        .legs
        .iter()
        .map(|leg| pullback(leg, &t.typing))
        .collect::<Result<Vec<_>>>()?;
    let shape = d.shape();
    let mut arrows = Vec::with_capacity(shape.edge_count());
    for (k, e) in shape.edges().iter().enumerate() {
        let src = &pbs[e.source];
        let down = src.left.then(d.arrow(k))?;
        arrows.push(pbs[e.target].mediate(&down, &src.right)?);
    }
    let e = Diagram::new(
        d.signature().clone(),
        shape.clone(),
        pbs.iter().map(|p| p.object.clone()).collect(),
        arrows,
    )?;
    let tau = DiagramTransformation::new(
        Arc::new(e),
        Arc::new(d.clone()),
        pbs.iter().map(|p| p.left.clone()).collect(),
    )?;
    Ok(PulledBack {
        family: CartesianFamily::new(tau)?,
        projections: pbs.into_iter().map(|p| p.right).collect(),
    })
}

/// `κ_*(τ)`: the colimit of `E` typed over `S` by the induced map.
#[derive(Debug, Clone)]
pub struct Pushforward {
    pub typed: TypedInstance,
    /// Colimit cocone of the family's source diagram.
    pub cocone: Cocone,
}

pub fn pushforward(d: &Diagram, c: &Cocone, f: &CartesianFamily) -> Result<Pushforward> {
    if **f.target() != *d {
        return Err(Error::Precondition("family is over a different diagram".into()));
    }
    f.transformation
        .cartesian_check()
        .map_err(|e| Error::NotCartesian(e.edge))?;
    check_cocone(d, c)?;
    let e = f.source();
    let colim = colimit_universal(e)?;
    let rho = Cocone {
        apex: c.apex.clone(),
        legs: f
            .transformation
            .components
            .iter()
            .zip(&c.legs)
            .map(|(tau, kappa)| tau.then(kappa))
            .collect::<Result<_>>()?,
    };
    let typing = mediating_morphism(e, &colim, &rho)?;
    Ok(Pushforward {
        typed: TypedInstance { typing },
        cocone: colim,
    })
}

/// Outcome of a canonical comparison.
#[derive(Debug, Clone)]
pub struct RoundTrip {
    pub pass: bool,
    /// Comparison morphisms: per vertex for the unit, a single one for the counit.
    pub comparisons: Vec<PresheafMorphism>,
    /// Human-readable reasons for failure.
    pub failures: Vec<String>,
}

fn describe_failure(label: &str, m: &PresheafMorphism) -> Option<String> {
    if m.is_bijective() {
        return None;
    }
    let sig = m.domain().signature();
    let bad: Vec<String> = (0..sig.sort_count())
        .filter(|&x| {
            let img = m.image(x);
            img.iter().any(|b| !b) || m.domain().size(x) != m.codomain().size(x)
        })
        .map(|x| format!("{} ({} → {})", sig.sorts()[x], m.domain().size(x), m.codomain().size(x)))
        .collect();
    Some(format!("{label} is not bijective at sort {}", bad.join(", ")))
}

/// Compares `τ` with `κ*(κ_*(τ))` vertexwise.
pub fn roundtrip_unit(d: &Diagram, c: &Cocone, f: &CartesianFamily) -> Result<RoundTrip> {
    let pushed = pushforward(d, c, f)?;
    let pulled = pullback_along_cocone(d, c, &pushed.typed)?;
    let mut comparisons = Vec::new();
    let mut failures = Vec::new();
    for (v, tau) in f.transformation.components.iter().enumerate() {
        let back = &pulled.family.transformation.components[v];
        let proj = &pulled.projections[v];
        let pb = crate::presheaf::Pullback {
            object: back.domain().clone(),
            left: back.clone(),
            right: proj.clone(),
        };
        let phi = pb.mediate(tau, &pushed.cocone.legs[v])?;
        if let Some(why) = describe_failure(&format!("vertex {}", d.shape().vertices()[v]), &phi) {
            failures.push(why);
        }
        comparisons.push(phi);
    }
    Ok(RoundTrip {
        pass: failures.is_empty(),
        comparisons,
        failures,
    })
}

/// Compares `κ_*(κ*(σ))` with `σ`.
pub fn roundtrip_counit(d: &Diagram, c: &Cocone, t: &TypedInstance) -> Result<RoundTrip> {
    let pulled = pullback_along_cocone(d, c, t)?;
    let pushed = pushforward(d, c, &pulled.family)?;
    let back = Cocone {
        apex: t.instance().clone(),
        legs: pulled.projections.clone(),
    };
    let psi = mediating_morphism(pulled.family.source(), &pushed.cocone, &back)?;
    let mut failures: Vec<String> = describe_failure("comparison", &psi).into_iter().collect();
    if psi.then(&t.typing)? != pushed.typed.typing {
        failures.push("comparison does not commute with the typings".into());
    }
    Ok(RoundTrip {
        pass: failures.is_empty(),
        comparisons: vec![psi],
        failures,
    })
}

/// A random instance over `apex`: up to two elements over each apex element,
/// enlarged until every operation has somewhere to go.
pub fn random_typed_instance(apex: &Arc<Presheaf>, rng: &mut impl Rng) -> TypedInstance {
    let sig = apex.signature().clone();
    let n = sig.sort_count();
    let mut fiber: Vec<Vec<usize>> = (0..n)
        .map(|x| (0..apex.size(x)).map(|_| rng.gen_range(0..=2)).collect())
        .collect();
    let mut changed = true;
    while changed {
        changed = false;
        for (o, op) in sig.ops().iter().enumerate() {
            for s in 0..apex.size(op.source) {
                let t = apex.apply(o, s);
                if fiber[op.source][s] > 0 && fiber[op.target][t] == 0 {
                    fiber[op.target][t] = 1;
                    changed = true;
                }
            }
        }
    }
    // elements listed fiber by fiber
    let mut over: Vec<Vec<usize>> = Vec::with_capacity(n);
    let mut start: Vec<Vec<usize>> = Vec::with_capacity(n);
    let mut carriers = Vec::with_capacity(n);
    for x in 0..n {
        let (mut o, mut st, mut ids) = (Vec::new(), Vec::new(), Vec::new());
        for s in 0..apex.size(x) {
            st.push(o.len());
            for m in 0..fiber[x][s] {
                o.push(s);
                ids.push(format!("{}.{m}", apex.id(x, s)));
            }
        }
        over.push(o);
        start.push(st);
        carriers.push(ids);
    }
    let tables = sig
        .ops()
        .iter()
        .enumerate()
        .map(|(o, op)| {
            over[op.source]
                .iter()
                .map(|&s| {
                    let t = apex.apply(o, s);
                    start[op.target][t] + rng.gen_range(0..fiber[op.target][t])
                })
                .collect()
        })
        .collect();
    let k = Arc::new(Presheaf::new(sig, carriers, tables).expect("fibrewise tables are total"));
    let typing = PresheafMorphism::new(k, apex.clone(), over).expect("ops respect fibres");
    TypedInstance { typing }
}

/// `Eᵢ(X) = Dᵢ(X) × {0..n}`, operations acting on the first factor only and
/// `E_d` permuting the second factor by `perms[d]`.
pub fn constant_fiber_family(d: &Arc<Diagram>, n: usize, perms: &[Vec<usize>]) -> Result<CartesianFamily> {
    let sig = d.signature().clone();
    let shape = d.shape();
    let comps: Vec<Arc<Presheaf>> = d
        .components()
        .iter()
        .map(|c| {
            let carriers = (0..sig.sort_count())
                .map(|x| {
                    (0..c.size(x))
                        .flat_map(|a| (0..n).map(move |m| (a, m)))
                        .map(|(a, m)| format!("{}.{m}", c.id(x, a)))
                        .collect()
                })
                .collect();
            let tables = (0..sig.ops().len())
                .map(|o| {
                    (0..c.table(o).len())
                        .flat_map(|a| (0..n).map(move |m| (a, m)))
                        .map(|(a, m)| c.apply(o, a) * n + m)
                        .collect()
                })
                .collect();
            Presheaf::new(sig.clone(), carriers, tables).map(Arc::new)
        })
        .collect::<std::result::Result<_, _>>()?;
    let arrows = shape
        .edges()
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let comp = (0..sig.sort_count())
                .map(|x| {
                    (0..d.component(e.source).size(x) * n)
                        .map(|i| d.arrow(k).apply(x, i / n) * n + perms[k][i % n])
                        .collect()
                })
                .collect();
            PresheafMorphism::new(comps[e.source].clone(), comps[e.target].clone(), comp)
        })
        .collect::<std::result::Result<_, _>>()?;
    let e = Arc::new(Diagram::new(sig.clone(), shape.clone(), comps.clone(), arrows)?);
    let tau = comps
        .iter()
        .enumerate()
        .map(|(v, c)| {
            let comp = (0..sig.sort_count())
                .map(|x| (0..c.size(x)).map(|i| i / n).collect())
                .collect();
            PresheafMorphism::new(c.clone(), d.component(v).clone(), comp)
        })
        .collect::<std::result::Result<_, _>>()?;
    CartesianFamily::new(DiagramTransformation::new(e, d.clone(), tau)?)
}

/// Cartesian families for testing round-trips: every identity/swap
/// assignment on two-element fibers first, then alternately pulled-back
/// random instances and random constant-fiber families.
pub fn sample_cartesian_families(
    d: &Arc<Diagram>,
    c: &Cocone,
    budget: usize,
    seed: u64,
) -> Result<Vec<CartesianFamily>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    if budget == 0 {
        return Ok(out);
    }
    let m = d.shape().edge_count();
    let enumerated = if m < 16 {
        (1usize << m).min(budget.div_ceil(2))
    } else {
        0
    };
    for mask in 0..enumerated {
        let perms: Vec<Vec<usize>> = (0..m)
            .map(|k| if mask >> k & 1 == 1 { vec![1, 0] } else { vec![0, 1] })
            .collect();
        out.push(constant_fiber_family(d, 2, &perms)?);
    }
    let mut flip = false;
    while out.len() < budget {
        flip = !flip;
        if flip {
            let t = random_typed_instance(&c.apex, &mut rng);
            out.push(pullback_along_cocone(d, c, &t)?.family);
        } else {
            let n = rng.gen_range(1..=3);
            let perms: Vec<Vec<usize>> = (0..m)
                .map(|_| {
                    let mut p: Vec<usize> = (0..n).collect();
                    p.shuffle(&mut rng);
                    p
                })
                .collect();
            out.push(constant_fiber_family(d, n, &perms)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presheaf::BaseSignature;
    use crate::shape::ShapeGraph;

    fn set(sig: &Arc<BaseSignature>, elems: &[&str]) -> Arc<Presheaf> {
        Arc::new(Presheaf::new(sig.clone(), vec![elems.iter().map(|e| e.to_string()).collect()], vec![]).unwrap())
    }

    fn map(a: &Arc<Presheaf>, b: &Arc<Presheaf>, comp: Vec<usize>) -> PresheafMorphism {
        PresheafMorphism::new(a.clone(), b.clone(), vec![comp]).unwrap()
    }

    fn f1() -> Arc<Diagram> {
        let sig = Arc::new(BaseSignature::sets());
        let d1 = set(&sig, &["*1"]);
        let d2 = set(&sig, &["*2"]);
        Arc::new(
            Diagram::new(
                sig,
                ShapeGraph::parallel_pair(),
                vec![d1.clone(), d2.clone()],
                vec![map(&d1, &d2, vec![0]), map(&d1, &d2, vec![0])],
            )
            .unwrap(),
        )
    }

    fn f4() -> Arc<Diagram> {
        let sig = Arc::new(BaseSignature::sets());
        let d1 = set(&sig, &["x"]);
        let d2 = set(&sig, &["y", "z"]);
        Arc::new(
            Diagram::new(
                sig,
                ShapeGraph::parallel_pair(),
                vec![d1.clone(), d2.clone()],
                vec![map(&d1, &d2, vec![0]), map(&d1, &d2, vec![1])],
            )
            .unwrap(),
        )
    }

    #[test]
    fn identity_typing_pulls_back_to_the_diagram() {
        let d = f1();
        let c = colimit_universal(&d).unwrap();
        let pb = pullback_along_cocone(&d, &c, &TypedInstance::identity(&c.apex)).unwrap();
        assert_eq!(**pb.family.source(), *d);
        assert!(pb
            .family
            .transformation
            .components
            .iter()
            .all(PresheafMorphism::is_identity));
        assert!(
            roundtrip_counit(&d, &c, &TypedInstance::identity(&c.apex))
                .unwrap()
                .pass
        );
    }

    #[test]
    fn twisted_family_fails_the_unit() {
        let d = f1();
        let c = colimit_universal(&d).unwrap();
        let twisted = constant_fiber_family(&d, 2, &[vec![1, 0], vec![0, 1]]).unwrap();
        let pushed = pushforward(&d, &c, &twisted).unwrap();
        assert_eq!(pushed.typed.instance().size(0), 1);
        assert!(pushed.typed.typing.is_bijective());
        let rt = roundtrip_unit(&d, &c, &twisted).unwrap();
        assert!(!rt.pass);
        let plain = constant_fiber_family(&d, 2, &[vec![0, 1], vec![0, 1]]).unwrap();
        assert!(roundtrip_unit(&d, &c, &plain).unwrap().pass);
        assert!(roundtrip_unit(&d, &c, &CartesianFamily::identity(&d)).unwrap().pass);
    }

    #[test]
    fn two_element_fibres_over_f1() {
        let d = f1();
        let c = colimit_universal(&d).unwrap();
        let k = set(d.signature(), &["a", "b"]);
        let sigma = TypedInstance::new(map(&k, &c.apex, vec![0, 0]), &c.apex).unwrap();
        let pb = pullback_along_cocone(&d, &c, &sigma).unwrap();
        assert_eq!(pb.family.source().component(0).size(0), 2);
        assert_eq!(pb.family.source().component(1).size(0), 2);
        assert!(roundtrip_counit(&d, &c, &sigma).unwrap().pass);
    }

    #[test]
    fn sampler_is_deterministic_and_cartesian() {
        let d = f1();
        let c = colimit_universal(&d).unwrap();
        assert!(sample_cartesian_families(&d, &c, 0, 1).unwrap().is_empty());
        let a = sample_cartesian_families(&d, &c, 12, 7).unwrap();
        let b = sample_cartesian_families(&d, &c, 12, 7).unwrap();
        assert_eq!(a.len(), 12);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.transformation.domain, y.transformation.domain);
            assert!(x.transformation.is_cartesian());
        }
        assert!(a.iter().any(|f| !roundtrip_unit(&d, &c, f).unwrap().pass));
    }

    #[test]
    fn vk_diagram_passes_sampled_units_and_counits() {
        let d = f4();
        let c = colimit_universal(&d).unwrap();
        for f in sample_cartesian_families(&d, &c, 20, 3).unwrap() {
            assert!(roundtrip_unit(&d, &c, &f).unwrap().pass);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let t = random_typed_instance(&c.apex, &mut rng);
            assert!(roundtrip_counit(&d, &c, &t).unwrap().pass);
        }
    }

    #[test]
    fn apex_mismatch_is_rejected() {
        let d = f1();
        let c = colimit_universal(&d).unwrap();
        let other = set(d.signature(), &["p", "q"]);
        let t = TypedInstance::identity(&other);
        assert!(matches!(pullback_along_cocone(&d, &c, &t), Err(Error::ApexMismatch)));
    }
}
