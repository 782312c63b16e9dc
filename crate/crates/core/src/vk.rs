//! Van Kampen checking: brute-force path enumeration, the specialized
//! criteria, the decision route and the combined colimit/VK algorithm.

use std::collections::{BTreeSet, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::colimit::{forward_path, Cocone};
use crate::diagram::Diagram;
use crate::error::{Error, Result, ValidationReport};
use crate::paths::{Direction, ElemRef, ElementGraph, MappingPath, PathSegment};
use crate::presheaf::{coproduct, quotient, Congruence, Presheaf, PresheafMorphism};
use crate::shape::{Branch, CYCLE_CAP};
use crate::unionfind::UnionFind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "VK")]
    Vk,
    #[serde(rename = "NotVK")]
    NotVk,
    #[serde(rename = "Undetermined")]
    Undetermined,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Vk => "VK",
            Verdict::NotVk => "NotVK",
            Verdict::Undetermined => "Undetermined",
        }
    }
}

/// Which pair of paths the brute-force search looks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    Different,
    Disjoint,
    DisjointInnerCycleFree,
}

impl Condition {
    pub const ALL: [Condition; 3] = [
        Condition::Different,
        Condition::Disjoint,
        Condition::DisjointInnerCycleFree,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Different => "different",
            Condition::Disjoint => "disjoint",
            Condition::DisjointInnerCycleFree => "disjoint-inner-cycle-free",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Bruteforce,
    AffectedMinimal,
    CyclicBranching,
    ImageDisjoint,
    DirectedCycle,
    MonicShortcut,
    Route,
    Combined,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Bruteforce => "bruteforce",
            Method::AffectedMinimal => "affected-minimal",
            Method::CyclicBranching => "cyclic-branching",
            Method::ImageDisjoint => "image-disjoint",
            Method::DirectedCycle => "directed-cycle",
            Method::MonicShortcut => "monic-shortcut",
            Method::Route => "route",
            Method::Combined => "combined",
        }
    }
}

/// `x₀, …, x_{2k+1}` in the apex of a span, all of one sort.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainCycle {
    pub sort: usize,
    pub sequence: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Witness {
    /// Two different proper paths from `z` to `z2`.
    DistinctPaths {
        z: ElemRef,
        z2: ElemRef,
        p1: MappingPath,
        p2: MappingPath,
    },
    /// A non-empty proper path from `z` back to `z`.
    CyclicPath {
        z: ElemRef,
        path: MappingPath,
    },
    DomainCycle(DomainCycle),
    /// `D_first(y) = D_second(y) = target`.
    ImageOverlap {
        sort: usize,
        first: Branch,
        second: Branch,
        y: ElemRef,
        target: ElemRef,
    },
    /// `D_cycle^k(y) = y`, with the corresponding forward path.
    DirectedCycleOrbit {
        cycle: Vec<usize>,
        sort: usize,
        y: ElemRef,
        k: usize,
        path: MappingPath,
    },
}

impl Witness {
    pub fn kind(&self) -> &'static str {
        match self {
            Witness::DistinctPaths { .. } => "distinct-paths",
            Witness::CyclicPath { .. } => "cyclic-path",
            Witness::DomainCycle(_) => "domain-cycle",
            Witness::ImageOverlap { .. } => "image-overlap",
            Witness::DirectedCycleOrbit { .. } => "directed-cycle-orbit",
        }
    }

    pub fn sort(&self) -> usize {
        match self {
            Witness::DistinctPaths { p1, .. } => p1.sort,
            Witness::CyclicPath { path, .. } => path.sort,
            Witness::DomainCycle(c) => c.sort,
            Witness::ImageOverlap { sort, .. } | Witness::DirectedCycleOrbit { sort, .. } => *sort,
        }
    }

    /// The same evidence as a pair of paths, where the variant allows it.
    pub fn to_distinct_paths(&self, d: &Diagram) -> Option<Witness> {
        match self {
            Witness::DistinctPaths { .. } => Some(self.clone()),
            Witness::CyclicPath { z, path } | Witness::DirectedCycleOrbit { y: z, path, .. } => {
                Some(Witness::DistinctPaths {
                    z: *z,
                    z2: *z,
                    p1: MappingPath::empty(path.sort, *z),
                    p2: path.clone(),
                })
            }
            Witness::ImageOverlap {
                sort,
                first,
                second,
                y,
                target,
            } => Some(Witness::DistinctPaths {
                z: *y,
                z2: *target,
                p1: forward_path(d, *sort, *y, &first.edges),
                p2: forward_path(d, *sort, *y, &second.edges),
            }),
            Witness::DomainCycle(_) => None,
        }
    }
}

/// Decision-diagram questions, in the order the route asks them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Question {
    DirectedCycle,
    NonemptyCarrierOnCycle,
    Branching,
    ImageDisjoint,
    OnlyMonics,
    CyclesBroken,
}

impl Question {
    pub fn as_str(self) -> &'static str {
        match self {
            Question::DirectedCycle => "directed-cycle",
            Question::NonemptyCarrierOnCycle => "nonempty-carrier-on-cycle",
            Question::Branching => "branching",
            Question::ImageDisjoint => "image-disjoint",
            Question::OnlyMonics => "only-monics",
            Question::CyclesBroken => "cycles-broken",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Terminal {
    #[serde(rename = "VK")]
    Vk,
    #[serde(rename = "not VK")]
    NotVk,
    #[serde(rename = "Apply Cor.")]
    ApplyCor,
    #[serde(rename = "Apply Thm.")]
    ApplyThm,
}

impl Terminal {
    pub fn as_str(self) -> &'static str {
        match self {
            Terminal::Vk => "VK",
            Terminal::NotVk => "not VK",
            Terminal::ApplyCor => "Apply Cor.",
            Terminal::ApplyThm => "Apply Thm.",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteTrace {
    pub steps: Vec<(Question, bool)>,
    pub terminal: Terminal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VkVerdict {
    pub result: Verdict,
    pub method: Method,
    pub condition: Option<Condition>,
    pub witness: Option<Witness>,
    /// Canonical two-path form of the failure, present whenever `result` is NotVK.
    pub canonical: Option<Witness>,
    pub route: Option<RouteTrace>,
    pub note: Option<String>,
}

impl VkVerdict {
    fn vk(method: Method) -> Self {
        Self {
            result: Verdict::Vk,
            method,
            condition: None,
            witness: None,
            canonical: None,
            route: None,
            note: None,
        }
    }

    fn not_vk(d: &Diagram, method: Method, witness: Witness) -> Self {
        let canonical = canonical_witness(d).or_else(|| witness.to_distinct_paths(d));
        Self {
            result: Verdict::NotVk,
            method,
            condition: None,
            witness: Some(witness),
            canonical,
            route: None,
            note: None,
        }
    }

    fn undetermined(method: Method, why: impl Into<String>) -> Self {
        Self {
            result: Verdict::Undetermined,
            method,
            condition: None,
            witness: None,
            canonical: None,
            route: None,
            note: Some(why.into()),
        }
    }

    pub fn is_vk(&self) -> bool {
        self.result == Verdict::Vk
    }
}

fn sorted_pair(p: MappingPath, q: MappingPath) -> Witness {
    let (p1, p2) = if p.canonical_cmp(&q).is_le() { (p, q) } else { (q, p) };
    Witness::DistinctPaths {
        z: p1.start,
        z2: p1.end(),
        p1,
        p2,
    }
}

fn bits(g: &ElementGraph, steps: &[(usize, Direction)]) -> Vec<u64> {
    let mut b = vec![0u64; g.edge_count().div_ceil(64)];
    for &(e, _) in steps {
        b[e / 64] |= 1 << (e % 64);
    }
    b
}

fn bits_disjoint(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x & y == 0)
}

/// Two proper paths with common endpoints satisfying `cond`, searching from
/// the elements accepted by `from` to the elements accepted by `to`.
fn search_pair(
    d: &Diagram,
    cond: Condition,
    from: &dyn Fn(ElemRef) -> bool,
    to: &dyn Fn(ElemRef) -> bool,
    budget: &mut u64,
) -> Result<Option<Witness>> {
    let mode = Mode {
        icf: cond == Condition::DisjointInnerCycleFree,
        disjoint: cond != Condition::Different,
    };
    search_pair_in(d, mode, from, to, budget)
}

#[derive(Clone, Copy)]
struct Mode {
    icf: bool,
    disjoint: bool,
}

fn search_pair_in(
    d: &Diagram,
    mode: Mode,
    from: &dyn Fn(ElemRef) -> bool,
    to: &dyn Fn(ElemRef) -> bool,
    budget: &mut u64,
) -> Result<Option<Witness>> {
    let graphs: Vec<ElementGraph> = (0..d.signature().sort_count())
        .map(|x| ElementGraph::new(d, x))
        .collect();
    let longest = graphs.iter().map(|g| g.edge_count()).max().unwrap_or(0);
    // every pass is exhaustive up to `depth`; the last one is the full enumeration
    for depth in 1..=longest.max(1) {
        if let Some(w) = search_pair_at_depth(&graphs, mode, depth, from, to, budget)? {
            return Ok(Some(w));
        }
    }
    Ok(None)
}

fn search_pair_at_depth(
    graphs: &[ElementGraph],
    mode: Mode,
    depth: usize,
    from: &dyn Fn(ElemRef) -> bool,
    to: &dyn Fn(ElemRef) -> bool,
    budget: &mut u64,
) -> Result<Option<Witness>> {
    for g in graphs {
        for z in 0..g.node_count() {
            if !from(g.elem(z)) {
                continue;
            }
            let mut seen: Vec<Vec<(Vec<u64>, Vec<(usize, Direction)>)>> = vec![Vec::new(); g.node_count()];
            let mut found = None;
            let limit = *budget;
            let mut compared = 0u64;
            g.walk_proper_bounded(z, mode.icf, depth, budget, &mut |end, steps| {
                if !to(g.elem(end)) {
                    return true;
                }
                compared += seen[end].len() as u64;
                if compared > limit {
                    return false;
                }
                let mine = bits(g, steps);
                let hit = seen[end]
                    .iter()
                    .find(|(other, _)| !mode.disjoint || bits_disjoint(other, &mine));
                if let Some((_, other)) = hit {
                    found = Some(sorted_pair(g.path(z, other), g.path(z, steps)));
                    return false;
                }
                seen[end].push((mine, steps.to_vec()));
                true
            })?;
            if found.is_some() {
                return Ok(found);
            }
            if compared > limit {
                return Err(Error::BudgetExhausted(limit));
            }
        }
    }
    Ok(None)
}

/// Full enumeration of proper paths under the chosen condition.
pub fn check_bruteforce(d: &Diagram, cond: Condition, budget: u64) -> Result<VkVerdict> {
    let mut budget = budget;
    let found = search_pair(d, cond, &|_| true, &|_| true, &mut budget)?;
    let mut v = match found {
        None => VkVerdict::vk(Method::Bruteforce),
        Some(native) => {
            let canonical = canonical_witness(d);
            VkVerdict {
                result: Verdict::NotVk,
                method: Method::Bruteforce,
                condition: None,
                witness: Some(canonical.clone().unwrap_or(native.clone())),
                canonical: Some(canonical.unwrap_or(native)),
                route: None,
                note: None,
            }
        }
    };
    v.condition = Some(cond);
    Ok(v)
}

/// Different inner-cycle-free proper paths between elements of affected minimal components.
pub fn check_affected_minimal(d: &Diagram, budget: u64) -> Result<VkVerdict> {
    let shape = d.shape();
    if shape.has_directed_cycle() {
        return Ok(VkVerdict::undetermined(
            Method::AffectedMinimal,
            "shape has a directed cycle",
        ));
    }
    if check_image_disjoint(d)?.is_some() {
        return Ok(VkVerdict::undetermined(
            Method::AffectedMinimal,
            "diagram is not image-disjoint",
        ));
    }
    let af: BTreeSet<usize> = shape.affected_minimal()?.into_iter().collect();
    let inside = |e: ElemRef| af.contains(&e.vertex);
    let mut budget = budget;
    Ok(
        match search_pair_in(
            d,
            Mode {
                icf: true,
                disjoint: false,
            },
            &inside,
            &inside,
            &mut budget,
        )? {
            None => VkVerdict::vk(Method::AffectedMinimal),
            Some(w) => VkVerdict::not_vk(d, Method::AffectedMinimal, w),
        },
    )
}

/// Non-empty inner-cycle-free proper cyclic paths at elements of branching components.
pub fn check_cyclic_branching(d: &Diagram, budget: u64) -> Result<VkVerdict> {
    let shape = d.shape();
    if shape.has_directed_cycle() {
        return Ok(VkVerdict::undetermined(
            Method::CyclicBranching,
            "shape has a directed cycle",
        ));
    }
    let branching = shape.branching_indices();
    let mut budget = budget;
    for x in 0..d.signature().sort_count() {
        let g = ElementGraph::new(d, x);
        for &v in &branching {
            for y in 0..d.component(v).size(x) {
                let z = g.node(ElemRef::new(v, y));
                let mut best: Option<MappingPath> = None;
                g.walk_proper(z, true, &mut budget, &mut |end, steps| {
                    if end == z && !steps.is_empty() {
                        let p = g.path(z, steps);
                        if best.as_ref().is_none_or(|b| p.canonical_cmp(b).is_lt()) {
                            best = Some(p);
                        }
                    }
                    true
                })?;
                if let Some(path) = best {
                    let w = Witness::CyclicPath {
                        z: ElemRef::new(v, y),
                        path,
                    };
                    return Ok(VkVerdict::not_vk(d, Method::CyclicBranching, w));
                }
            }
        }
    }
    Ok(VkVerdict::vk(Method::CyclicBranching))
}

/// `None` when image-disjoint, otherwise the first overlap.
pub fn check_image_disjoint(d: &Diagram) -> Result<Option<Witness>> {
    let shape = d.shape();
    if shape.has_directed_cycle() {
        return Err(Error::Precondition("image-disjointness needs an acyclic shape".into()));
    }
    if !shape.has_undirected_cycle() {
        return Ok(None);
    }
    let branches = shape.enumerate_branches()?;
    for (a, p) in branches.iter().enumerate() {
        for q in &branches[a + 1..] {
            if p.source != q.source || p.target != q.target {
                continue;
            }
            for x in 0..d.signature().sort_count() {
                for y in 0..d.component(p.source).size(x) {
                    let t = d.apply_path(&p.edges, x, y);
                    if t == d.apply_path(&q.edges, x, y) {
                        return Ok(Some(Witness::ImageOverlap {
                            sort: x,
                            first: p.clone(),
                            second: q.clone(),
                            y: ElemRef::new(p.source, y),
                            target: ElemRef::new(p.target, t),
                        }));
                    }
                }
            }
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DirectedCycleOutcome {
    /// The shape has no directed cycle.
    Irrelevant,
    NotVk(Witness),
    /// Every carrier on every directed cycle is empty.
    FallbackNeeded,
}

pub fn check_directed_cycle(d: &Diagram) -> Result<DirectedCycleOutcome> {
    let shape = d.shape();
    if !shape.has_directed_cycle() {
        return Ok(DirectedCycleOutcome::Irrelevant);
    }
    for c in shape.directed_cycles(CYCLE_CAP)? {
        let m = c.edges.len();
        for r in 0..m {
            let rot: Vec<usize> = (0..m).map(|i| c.edges[(r + i) % m]).collect();
            let v = shape.edge(rot[0]).source;
            for x in 0..d.signature().sort_count() {
                let n = d.component(v).size(x);
                let mut best: Option<(usize, usize)> = None;
                for y in 0..n {
                    let mut cur = d.apply_path(&rot, x, y);
                    let mut k = 1;
                    while cur != y && k <= n {
                        cur = d.apply_path(&rot, x, cur);
                        k += 1;
                    }
                    if cur == y && best.is_none_or(|b| k < b.0) {
                        best = Some((k, y));
                    }
                }
                let Some((k, y)) = best else { continue };
                let y = ElemRef::new(v, y);
                let path = forward_path(d, x, y, &rot.repeat(k));
                if path.is_proper() {
                    return Ok(DirectedCycleOutcome::NotVk(Witness::DirectedCycleOrbit {
                        cycle: rot,
                        sort: x,
                        y,
                        k,
                        path,
                    }));
                }
            }
        }
    }
    Ok(DirectedCycleOutcome::FallbackNeeded)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MonicOutcome {
    Vk,
    /// Edge sets of the undirected cycles that are not broken.
    Inconclusive(Vec<BTreeSet<usize>>),
}

/// Monic diagrams: VK when every undirected cycle has a valley whose two
/// maximal incoming runs have disjoint images.
pub fn check_monic_shortcut(d: &Diagram) -> Result<MonicOutcome> {
    let shape = d.shape();
    if shape.has_directed_cycle() {
        return Err(Error::Precondition("monic shortcut needs an acyclic shape".into()));
    }
    if !d.all_monic() {
        return Err(Error::Precondition("monic shortcut needs injective arrows".into()));
    }
    let mut unbroken = Vec::new();
    for c in shape.undirected_cycles(CYCLE_CAP)? {
        if !cycle_broken(d, &c.steps)? {
            unbroken.push(c.edge_set());
        }
    }
    Ok(if unbroken.is_empty() {
        MonicOutcome::Vk
    } else {
        MonicOutcome::Inconclusive(unbroken)
    })
}

fn cycle_broken(d: &Diagram, steps: &[(usize, bool)]) -> Result<bool> {
    let n = steps.len();
    for k in 0..n {
        let before = (k + n - 1) % n;
        if !(steps[before].1 && !steps[k].1) {
            continue;
        }
        let mut left = Vec::new();
        let mut i = before;
        while steps[i].1 && left.len() < n {
            left.push(steps[i].0);
            i = (i + n - 1) % n;
        }
        left.reverse();
        let mut right = Vec::new();
        let mut j = k;
        while !steps[j].1 && right.len() < n {
            right.push(steps[j].0);
            j = (j + 1) % n;
        }
        right.reverse();
        let (l, r) = (d.composite(&left)?, d.composite(&right)?);
        let disjoint =
            (0..d.signature().sort_count()).all(|x| l.image(x).iter().zip(r.image(x)).all(|(a, b)| !(*a && b)));
        if disjoint {
            return Ok(true);
        }
    }
    Ok(false)
}

/// A proper domain cycle of the span `D₁ ←h₁– D₀ –h₂→ D₂`, if any.
pub fn domain_cycle_search(h1: &PresheafMorphism, h2: &PresheafMorphism) -> Result<Option<DomainCycle>> {
    if h1.domain() != h2.domain() {
        return Err(Error::NotComposable);
    }
    let sig = h1.domain().signature().clone();
    for x in 0..sig.sort_count() {
        let n0 = h1.domain().size(x);
        let n1 = h1.codomain().size(x);
        // nodes: D₁ first, then D₂; edge i joins h1(i) and n1 + h2(i)
        let ends: Vec<(usize, usize)> = (0..n0).map(|i| (h1.apply(x, i), n1 + h2.apply(x, i))).collect();
        let mut adj = vec![Vec::new(); n1 + h2.codomain().size(x)];
        for (i, &(a, b)) in ends.iter().enumerate() {
            adj[a].push((i, b));
            adj[b].push((i, a));
        }
        let mut best: Option<Vec<usize>> = None;
        for (i, &(a, b)) in ends.iter().enumerate() {
            let Some(route) = bfs(&adj, b, a, i) else { continue };
            // route runs from the D₂ end of i back to its D₁ end, so the
            // edge after i shares its D₂ node and the cycle closes through h1
            let mut seq = vec![i];
            seq.extend(route);
            let len = seq.len();
            seq.rotate_left(len - 1);
            let cand = canonical_domain_cycle(&ends, seq);
            if best.as_ref().is_none_or(|b| (cand.len(), &cand) < (b.len(), b)) {
                best = Some(cand);
            }
        }
        if let Some(sequence) = best {
            return Ok(Some(DomainCycle { sort: x, sequence }));
        }
    }
    Ok(None)
}

/// Least rotation/reflection that still pairs `x₀, x₁` through `h₁`.
fn canonical_domain_cycle(ends: &[(usize, usize)], seq: Vec<usize>) -> Vec<usize> {
    let n = seq.len();
    let mut options = Vec::new();
    for s in [seq.clone(), seq.iter().rev().copied().collect()] {
        for r in 0..n {
            let mut t = s.clone();
            t.rotate_left(r);
            if n == 2 || ends[t[0]].0 == ends[t[1]].0 {
                options.push(t);
            }
        }
    }
    options.into_iter().min().unwrap_or(seq)
}

/// Edge labels of a shortest route `from → to` avoiding edge `skip`.
fn bfs(adj: &[Vec<(usize, usize)>], from: usize, to: usize, skip: usize) -> Option<Vec<usize>> {
    let mut prev: Vec<Option<(usize, usize)>> = vec![None; adj.len()];
    let mut seen = vec![false; adj.len()];
    seen[from] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        if u == to {
            let mut route = Vec::new();
            let mut cur = to;
            while let Some((e, p)) = prev[cur] {
                route.push(e);
                cur = p;
            }
            route.reverse();
            return Some(route);
        }
        for &(e, w) in &adj[u] {
            if e != skip && !seen[w] {
                seen[w] = true;
                prev[w] = Some((e, u));
                queue.push_back(w);
            }
        }
    }
    None
}

pub fn validate_domain_cycle(h1: &PresheafMorphism, h2: &PresheafMorphism, c: &DomainCycle) -> ValidationReport {
    let mut report = ValidationReport::new();
    let n = c.sequence.len();
    if n < 2 || !n.is_multiple_of(2) {
        report.push("domain cycle", "length must be even and positive");
        return report;
    }
    if c.sort >= h1.domain().signature().sort_count() || c.sequence.iter().any(|&i| i >= h1.domain().size(c.sort)) {
        report.push("domain cycle", "element outside the span apex");
        return report;
    }
    let distinct: BTreeSet<_> = c.sequence.iter().collect();
    if distinct.len() != n {
        report.push("domain cycle", "elements are not pairwise distinct");
    }
    for i in 0..n / 2 {
        let (a, b, next) = (c.sequence[2 * i], c.sequence[2 * i + 1], c.sequence[(2 * i + 2) % n]);
        if h1.apply(c.sort, a) != h1.apply(c.sort, b) {
            report.push(format!("position {}", 2 * i), "first leg differs");
        }
        if h2.apply(c.sort, b) != h2.apply(c.sort, next) {
            report.push(format!("position {}", 2 * i + 1), "second leg differs");
        }
    }
    report
}

/// A shortest cycle in some element graph as a closed path, split at the
/// two least minimal-component elements on it.
pub fn canonical_witness(d: &Diagram) -> Option<Witness> {
    let mut best: Option<(usize, usize, Vec<PathSegment>)> = None;
    for x in 0..d.signature().sort_count() {
        let g = ElementGraph::new(d, x);
        for (gi, e) in g.edges().iter().enumerate() {
            if let Some(b) = &best {
                if b.0 == 1 {
                    break;
                }
            }
            let steps = if e.source == e.target {
                vec![(gi, Direction::Forward)]
            } else {
                match element_bfs(&g, e.target, e.source, gi) {
                    Some(route) => std::iter::once((gi, Direction::Forward)).chain(route).collect(),
                    None => continue,
                }
            };
            let cycle = normalize_cycle(g.path(e.source, &steps).segments);
            let cand = (cycle.len(), x, cycle);
            let better = best
                .as_ref()
                .is_none_or(|b| (cand.0, cand.1, seg_keys(&cand.2)) < (b.0, b.1, seg_keys(&b.2)));
            if better {
                best = Some(cand);
            }
        }
    }
    let (_, sort, cycle) = best?;
    Some(split_cycle(d, sort, &cycle))
}

fn seg_keys(s: &[PathSegment]) -> Vec<crate::paths::SegmentKey> {
    s.iter().map(PathSegment::key).collect()
}

fn element_bfs(g: &ElementGraph, from: usize, to: usize, skip: usize) -> Option<Vec<(usize, Direction)>> {
    let mut prev: Vec<Option<(usize, Direction, usize)>> = vec![None; g.node_count()];
    let mut seen = vec![false; g.node_count()];
    seen[from] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        if u == to {
            let mut route = Vec::new();
            let mut cur = to;
            while let Some((e, dir, p)) = prev[cur] {
                route.push((e, dir));
                cur = p;
            }
            route.reverse();
            return Some(route);
        }
        for &(e, dir) in g.adjacent(u) {
            let w = g.far_end(e, dir);
            if e != skip && !seen[w] {
                seen[w] = true;
                prev[w] = Some((e, dir, u));
                queue.push_back(w);
            }
        }
    }
    None
}

fn reversed_cycle(c: &[PathSegment]) -> Vec<PathSegment> {
    c.iter().rev().map(PathSegment::reversed).collect()
}

fn normalize_cycle(c: Vec<PathSegment>) -> Vec<PathSegment> {
    let n = c.len();
    let mut best = c.clone();
    for s in [c.clone(), reversed_cycle(&c)] {
        for r in 0..n {
            let mut t = s.clone();
            t.rotate_left(r);
            if seg_keys(&t) < seg_keys(&best) {
                best = t;
            }
        }
    }
    best
}

fn split_cycle(d: &Diagram, sort: usize, cycle: &[PathSegment]) -> Witness {
    let n = cycle.len();
    let nodes: Vec<ElemRef> = cycle.iter().map(|s| s.left).collect();
    let mut minimal: Vec<(ElemRef, usize)> = nodes
        .iter()
        .enumerate()
        .filter(|(_, e)| d.shape().is_minimal(e.vertex))
        .map(|(i, e)| (*e, i))
        .collect();
    minimal.sort();
    if minimal.len() >= 2 {
        let (i, j) = (minimal[0].1, minimal[1].1);
        let along: Vec<PathSegment> = (0..(j + n - i) % n).map(|k| cycle[(i + k) % n]).collect();
        let back: Vec<PathSegment> = (0..(i + n - j) % n).map(|k| cycle[(j + k) % n]).collect();
        let p = MappingPath {
            sort,
            start: nodes[i],
            segments: along,
        };
        let q = MappingPath {
            sort,
            start: nodes[j],
            segments: back,
        }
        .reverse();
        return sorted_pair(p, q);
    }
    let z = minimal
        .first()
        .map(|m| m.0)
        .unwrap_or_else(|| *nodes.iter().min().expect("nonempty cycle"));
    let at = nodes.iter().position(|&e| e == z).expect("on cycle");
    let mut fwd = cycle.to_vec();
    fwd.rotate_left(at);
    let bwd = reversed_cycle(&fwd);
    let bwd: Vec<PathSegment> = {
        // the reversed rotation ends at z; rotate so it starts there
        let pos = bwd.iter().position(|s| s.left == z).expect("on cycle");
        let mut b = bwd;
        b.rotate_left(pos);
        b
    };
    let segments = if seg_keys(&bwd) < seg_keys(&fwd) { bwd } else { fwd };
    Witness::DistinctPaths {
        z,
        z2: z,
        p1: MappingPath::empty(sort, z),
        p2: MappingPath {
            sort,
            start: z,
            segments,
        },
    }
}

/// Re-checks a witness against the diagram.
pub fn validate_witness(d: &Diagram, w: &Witness) -> ValidationReport {
    let mut report = ValidationReport::new();
    let check_path = |report: &mut ValidationReport, name: &str, p: &MappingPath| {
        if let Err(r) = p.validate(d) {
            for i in r.issues {
                report.push(format!("{name}: {}", i.location), i.message);
            }
        }
        if !p.is_proper() {
            report.push(name, "path is not proper");
        }
    };
    match w {
        Witness::DistinctPaths { z, z2, p1, p2 } => {
            check_path(&mut report, "p1", p1);
            check_path(&mut report, "p2", p2);
            if p1 == p2 {
                report.push("paths", "the two paths are equal");
            }
            if p1.sort != p2.sort {
                report.push("paths", "paths of different sorts");
            }
            if p1.start != *z || p2.start != *z || p1.end() != *z2 || p2.end() != *z2 {
                report.push("paths", "endpoints do not match");
            }
        }
        Witness::CyclicPath { z, path } => {
            check_path(&mut report, "path", path);
            if path.is_empty() {
                report.push("path", "cyclic path is empty");
            }
            if path.start != *z || path.end() != *z {
                report.push("path", "path is not closed at z");
            }
        }
        Witness::DomainCycle(c) => {
            let shape = d.shape();
            let span = shape.edge_count() == 2
                && shape.edge(0).source == shape.edge(1).source
                && shape.edge(0).target != shape.edge(0).source
                && shape.edge(1).target != shape.edge(1).source;
            if span {
                report.extend(validate_domain_cycle(d.arrow(0), d.arrow(1), c));
            } else {
                report.push("domain cycle", "diagram is not a span");
            }
        }
        Witness::ImageOverlap {
            sort,
            first,
            second,
            y,
            target,
        } => {
            let shape = d.shape();
            let chains = |b: &Branch| {
                let mut v = b.source;
                for &e in &b.edges {
                    if e >= shape.edge_count() || shape.edge(e).source != v {
                        return false;
                    }
                    v = shape.edge(e).target;
                }
                v == b.target
            };
            if !chains(first) || !chains(second) || first.source != second.source || first.edges.is_empty() {
                report.push("branches", "not two edge sequences from a common source");
            } else if first.edges == second.edges {
                report.push("branches", "branches are equal");
            } else if y.vertex != first.source
                || target.vertex != first.target
                || target.vertex != second.target
                || d.apply_path(&first.edges, *sort, y.index) != target.index
                || d.apply_path(&second.edges, *sort, y.index) != target.index
            {
                report.push("overlap", "images differ");
            }
        }
        Witness::DirectedCycleOrbit {
            cycle,
            sort,
            y,
            k,
            path,
        } => {
            let shape = d.shape();
            let closed = !cycle.is_empty()
                && cycle.iter().all(|&e| e < shape.edge_count())
                && (0..cycle.len())
                    .all(|i| shape.edge(cycle[i]).target == shape.edge(cycle[(i + 1) % cycle.len()]).source)
                && shape.edge(cycle[0]).source == y.vertex;
            if !closed {
                report.push("cycle", "not a closed directed edge sequence at y");
                return report;
            }
            let mut cur = y.index;
            for _ in 0..*k {
                cur = d.apply_path(cycle, *sort, cur);
            }
            if *k == 0 || cur != y.index {
                report.push("orbit", "y does not return after k rounds");
            }
            if *path != forward_path(d, *sort, *y, &cycle.repeat(*k)) {
                report.push("path", "path does not follow the orbit");
            }
            check_path(&mut report, "path", path);
        }
    }
    report
}

/// Walks the decision diagram from the top.
pub fn decision_route(d: &Diagram, budget: u64) -> Result<VkVerdict> {
    let shape = d.shape();
    let mut steps = Vec::new();
    let finish = |mut v: VkVerdict, steps: Vec<(Question, bool)>, terminal: Terminal| {
        v.method = Method::Route;
        v.route = Some(RouteTrace { steps, terminal });
        Ok(v)
    };
    let directed = shape.has_directed_cycle();
    steps.push((Question::DirectedCycle, directed));
    if directed {
        return match check_directed_cycle(d)? {
            DirectedCycleOutcome::NotVk(w) => {
                steps.push((Question::NonemptyCarrierOnCycle, true));
                finish(VkVerdict::not_vk(d, Method::DirectedCycle, w), steps, Terminal::NotVk)
            }
            _ => {
                steps.push((Question::NonemptyCarrierOnCycle, false));
                let v = check_bruteforce(d, Condition::DisjointInnerCycleFree, budget)?;
                finish(v, steps, Terminal::ApplyCor)
            }
        };
    }
    let branching = !shape.branching_indices().is_empty();
    steps.push((Question::Branching, branching));
    if !branching {
        return finish(VkVerdict::vk(Method::Route), steps, Terminal::Vk);
    }
    if let Some(w) = check_image_disjoint(d)? {
        steps.push((Question::ImageDisjoint, false));
        return finish(VkVerdict::not_vk(d, Method::ImageDisjoint, w), steps, Terminal::NotVk);
    }
    steps.push((Question::ImageDisjoint, true));
    let monic = d.all_monic();
    steps.push((Question::OnlyMonics, monic));
    if monic {
        let broken = check_monic_shortcut(d)? == MonicOutcome::Vk;
        steps.push((Question::CyclesBroken, broken));
        if broken {
            return finish(VkVerdict::vk(Method::Route), steps, Terminal::Vk);
        }
    }
    let v = check_affected_minimal(d, budget)?;
    finish(v, steps, Terminal::ApplyThm)
}

/// Specialized colimit with the VK flag maintained while identifying.
#[derive(Debug, Clone)]
pub struct CombinedOutcome {
    pub cocone: Cocone,
    pub verdict: VkVerdict,
}

/// Each non-minimal element is represented by the minimal element reached
/// along first out-edges; every further out-edge of a branching element adds
/// one identification, and identifying two already equivalent
/// representatives clears the flag.
pub fn check_combined(d: &Diagram) -> Result<CombinedOutcome> {
    let shape = d.shape();
    if shape.has_directed_cycle() {
        return Err(Error::Precondition("combined algorithm needs an acyclic shape".into()));
    }
    if check_image_disjoint(d)?.is_some() {
        return Err(Error::Precondition(
            "combined algorithm needs an image-disjoint diagram".into(),
        ));
    }
    let sig = d.signature();
    let mins = shape.min_indices();
    let part_of = |v: usize| mins.iter().position(|&m| m == v).expect("minimal vertex");
    let parts: Vec<(String, Arc<Presheaf>)> = mins
        .iter()
        .map(|&v| (shape.vertices()[v].clone(), d.component(v).clone()))
        .collect();
    let coprod = coproduct(sig, &parts)?;
    let canonical: Vec<Vec<usize>> = (0..shape.vertex_count())
        .map(|v| shape.canonical_path_to_minimal(v))
        .collect::<Result<_>>()?;
    let rep = |v: usize, x: usize, y: usize| {
        let p = &canonical[v];
        let t = p.last().map_or(v, |&e| shape.edge(e).target);
        coprod.embed(part_of(t), x, d.apply_path(p, x, y))
    };
    let mut vk = true;
    let mut class_ids = Vec::with_capacity(sig.sort_count());
    for x in 0..sig.sort_count() {
        let mut uf = UnionFind::new(coprod.object.size(x));
        for v in shape.branching_indices() {
            let outs = shape.out_edges(v);
            for y in 0..d.component(v).size(x) {
                let first = rep(v, x, y);
                for &e in &outs[1..] {
                    let t = shape.edge(e).target;
                    let other = rep(t, x, d.arrow(e).apply(x, y));
                    if !uf.union(first, other) {
                        vk = false;
                    }
                }
            }
        }
        class_ids.push(uf.class_ids().0);
    }
    let congruence = Congruence::from_class_ids(class_ids);
    congruence.check_compatible(&coprod.object)?;
    let q = quotient(&coprod.object, &congruence)?;
    let mut legs = Vec::with_capacity(shape.vertex_count());
    for (v, path) in canonical.iter().enumerate() {
        let t = path.last().map_or(v, |&e| shape.edge(e).target);
        let min_leg = coprod.injections[part_of(t)].then(&q.projection)?;
        legs.push(if path.is_empty() {
            min_leg
        } else {
            d.composite(path)?.then(&min_leg)?
        });
    }
    let cocone = Cocone { apex: q.object, legs };
    let verdict = if vk {
        VkVerdict::vk(Method::Combined)
    } else {
        let w = canonical_witness(d).expect("a failed union closes a cycle");
        VkVerdict::not_vk(d, Method::Combined, w)
    };
    Ok(CombinedOutcome { cocone, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::DEFAULT_BUDGET;
    use crate::presheaf::BaseSignature;
    use crate::shape::ShapeGraph;

    fn set(sig: &Arc<BaseSignature>, elems: &[&str]) -> Arc<Presheaf> {
        Arc::new(Presheaf::new(sig.clone(), vec![elems.iter().map(|e| e.to_string()).collect()], vec![]).unwrap())
    }

    fn diagram(vertices: &[(&str, &[&str])], edges: &[(&str, &str, &str, &[usize])]) -> Diagram {
        let sig = Arc::new(BaseSignature::sets());
        let comps: Vec<_> = vertices.iter().map(|(_, es)| set(&sig, es)).collect();
        let shape = ShapeGraph::new(
            vertices.iter().map(|v| v.0),
            edges
                .iter()
                .map(|e| (e.0.to_string(), e.1.to_string(), e.2.to_string())),
        )
        .unwrap();
        let arrows = edges
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let se = shape.edge(k);
                PresheafMorphism::new(comps[se.source].clone(), comps[se.target].clone(), vec![e.3.to_vec()]).unwrap()
            })
            .collect();
        Diagram::new(sig, shape, comps, arrows).unwrap()
    }

    fn f1() -> Diagram {
        diagram(
            &[("1", &["*1"]), ("2", &["*2"])],
            &[("d", "1", "2", &[0]), ("d'", "1", "2", &[0])],
        )
    }

    fn f3() -> Diagram {
        diagram(&[("1", &["*"])], &[("d", "1", "1", &[0])])
    }

    fn f4() -> Diagram {
        diagram(
            &[("1", &["x"]), ("2", &["y", "z"])],
            &[("f", "1", "2", &[0]), ("g", "1", "2", &[1])],
        )
    }

    fn paths_of(w: &Witness, d: &Diagram) -> (String, String) {
        match w {
            Witness::DistinctPaths { p1, p2, .. } => (p1.display(d), p2.display(d)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bruteforce_on_small_fixtures() {
        for c in Condition::ALL {
            let v = check_bruteforce(&f1(), c, DEFAULT_BUDGET).unwrap();
            assert_eq!(v.result, Verdict::NotVk);
            let w = v.witness.unwrap();
            assert!(validate_witness(&f1(), &w).is_empty());
            assert_eq!(paths_of(&w, &f1()), ("[]".into(), "[(*2,d^op,*1),(*1,d',*2)]".into()));
            assert!(check_bruteforce(&f4(), c, DEFAULT_BUDGET).unwrap().is_vk());
            assert_eq!(
                check_bruteforce(&f3(), c, DEFAULT_BUDGET).unwrap().result,
                Verdict::NotVk
            );
        }
    }

    #[test]
    fn budget_is_reported() {
        assert!(matches!(
            check_bruteforce(&f1(), Condition::Different, 0),
            Err(Error::BudgetExhausted(0))
        ));
    }

    #[test]
    fn loop_witnesses() {
        let w = canonical_witness(&f3()).unwrap();
        assert_eq!(paths_of(&w, &f3()), ("[]".into(), "[(*,d,*)]".into()));
        match check_directed_cycle(&f3()).unwrap() {
            DirectedCycleOutcome::NotVk(w) => {
                assert!(validate_witness(&f3(), &w).is_empty());
                assert!(matches!(w, Witness::DirectedCycleOrbit { k: 1, .. }));
            }
            other => panic!("{other:?}"),
        }
        let empty_loop = diagram(&[("1", &[])], &[("d", "1", "1", &[])]);
        assert_eq!(
            check_directed_cycle(&empty_loop).unwrap(),
            DirectedCycleOutcome::FallbackNeeded
        );
        assert_eq!(check_directed_cycle(&f4()).unwrap(), DirectedCycleOutcome::Irrelevant);
        let v = decision_route(&empty_loop, DEFAULT_BUDGET).unwrap();
        assert!(v.is_vk());
        assert_eq!(v.route.unwrap().terminal, Terminal::ApplyCor);
    }

    #[test]
    fn orbit_uses_minimal_period() {
        let swap = diagram(&[("1", &["a", "b", "c"])], &[("d", "1", "1", &[1, 0, 2])]);
        match check_directed_cycle(&swap).unwrap() {
            DirectedCycleOutcome::NotVk(Witness::DirectedCycleOrbit { y, k, .. }) => {
                assert_eq!((y.index, k), (2, 1));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn image_disjointness() {
        match check_image_disjoint(&f1()).unwrap() {
            Some(w @ Witness::ImageOverlap { .. }) => assert!(validate_witness(&f1(), &w).is_empty()),
            other => panic!("{other:?}"),
        }
        assert!(check_image_disjoint(&f4()).unwrap().is_none());
        assert!(check_image_disjoint(&f3()).is_err());
    }

    #[test]
    fn minimal_requires_image_disjointness() {
        let v = check_affected_minimal(&f1(), DEFAULT_BUDGET).unwrap();
        assert_eq!(v.result, Verdict::Undetermined);
        assert!(check_affected_minimal(&f4(), DEFAULT_BUDGET).unwrap().is_vk());
    }

    #[test]
    fn edge_free_is_vk_everywhere() {
        let d = diagram(&[("1", &["a"]), ("2", &["b"])], &[]);
        assert!(check_cyclic_branching(&d, DEFAULT_BUDGET).unwrap().is_vk());
        let v = decision_route(&d, DEFAULT_BUDGET).unwrap();
        assert!(v.is_vk());
        assert_eq!(
            v.route.unwrap().steps,
            vec![(Question::DirectedCycle, false), (Question::Branching, false)]
        );
    }

    #[test]
    fn monic_tree_is_vk_and_square_needs_broken_cycle() {
        let tree = diagram(
            &[("0", &["a"]), ("1", &["p", "q"]), ("2", &["r"])],
            &[("u", "0", "1", &[1]), ("v", "0", "2", &[0])],
        );
        assert_eq!(check_monic_shortcut(&tree).unwrap(), MonicOutcome::Vk);
        assert_eq!(check_monic_shortcut(&f4()).unwrap(), MonicOutcome::Vk);
        let overlapping = diagram(
            &[("1", &["x"]), ("2", &["y", "z"])],
            &[("f", "1", "2", &[0]), ("g", "1", "2", &[0])],
        );
        assert!(matches!(
            check_monic_shortcut(&overlapping).unwrap(),
            MonicOutcome::Inconclusive(_)
        ));
        let not_monic = diagram(&[("1", &["x", "w"]), ("2", &["y"])], &[("f", "1", "2", &[0, 0])]);
        assert!(check_monic_shortcut(&not_monic).is_err());
    }

    #[test]
    fn domain_cycles() {
        let sig = Arc::new(BaseSignature::sets());
        let d0 = set(&sig, &["x", "y"]);
        let d1 = set(&sig, &["*1"]);
        let d2 = set(&sig, &["*2"]);
        let h1 = PresheafMorphism::new(d0.clone(), d1, vec![vec![0, 0]]).unwrap();
        let h2 = PresheafMorphism::new(d0.clone(), d2.clone(), vec![vec![0, 0]]).unwrap();
        let c = domain_cycle_search(&h1, &h2).unwrap().unwrap();
        assert_eq!(c.sequence, vec![0, 1]);
        assert!(validate_domain_cycle(&h1, &h2, &c).is_empty());
        let mono = PresheafMorphism::new(d0.clone(), set(&sig, &["a", "b"]), vec![vec![0, 1]]).unwrap();
        assert_eq!(domain_cycle_search(&mono, &h2).unwrap(), None);
    }

    #[test]
    fn longer_domain_cycle_is_valid() {
        let sig = Arc::new(BaseSignature::sets());
        let d0 = set(&sig, &["a", "b", "c", "e"]);
        let h1 = PresheafMorphism::new(d0.clone(), set(&sig, &["p", "q"]), vec![vec![0, 0, 1, 1]]).unwrap();
        let h2 = PresheafMorphism::new(d0.clone(), set(&sig, &["r", "s"]), vec![vec![0, 1, 1, 0]]).unwrap();
        let c = domain_cycle_search(&h1, &h2).unwrap().unwrap();
        assert_eq!(c.sequence.len(), 4);
        assert!(validate_domain_cycle(&h1, &h2, &c).is_empty(), "{c:?}");
    }

    #[test]
    fn combined_agrees_on_small_fixtures() {
        let out = check_combined(&f4()).unwrap();
        assert!(out.verdict.is_vk());
        assert_eq!(out.cocone.apex.size(0), 1);
        out.cocone.check_commutative(&f4()).unwrap();
        assert!(check_combined(&f1()).is_err());
        let f2 = diagram(
            &[("0", &["x", "y"]), ("1", &["*1"]), ("2", &["*2"])],
            &[("d", "0", "1", &[0, 0]), ("d'", "0", "2", &[0, 0])],
        );
        let out = check_combined(&f2).unwrap();
        assert_eq!(out.verdict.result, Verdict::NotVk);
        let w = out.verdict.witness.unwrap();
        assert_eq!(
            paths_of(&w, &f2),
            ("[(*1,d^op,x),(x,d',*2)]".into(), "[(*1,d^op,y),(y,d',*2)]".into())
        );
    }
}
