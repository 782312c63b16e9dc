//! Finite presheaves over a free base category and the sortwise set
//! constructions used everywhere else: coproducts, pullbacks and quotients.
//!
//! A base category is given by a [`BaseSignature`]: a finite multigraph whose
//! vertices are sorts and whose edges are unary operation symbols. A
//! [`Presheaf`] assigns a finite ordered carrier to every sort and a total
//! function to every operation symbol. Elements are addressed by their
//! position in the carrier; identifiers are only used for naming.

use std::collections::HashMap;
use std::sync::Arc;

use indexmap::{IndexMap, IndexSet};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ValidationReport};
use crate::unionfind::UnionFind;

/// Injective naming schemes for constructed elements.
pub mod ids {
    fn escape(s: &str, special: &[char]) -> String {
        let mut out = String::with_capacity(s.len());
        for c in s.chars() {
            if c == '\\' || special.contains(&c) {
                out.push('\\');
            }
            out.push(c);
        }
        out
    }

    /// `tag:id`, with `:` and `\` escaped inside the tag.
    pub fn tagged(tag: &str, id: &str) -> String {
        format!("{}:{}", escape(tag, &[':']), id)
    }

    /// `(a,b)`, with `,` and `\` escaped inside `a`.
    pub fn pair(a: &str, b: &str) -> String {
        format!("({},{})", escape(a, &[',']), b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpSymbol {
    pub name: String,
    pub source: usize,
    pub target: usize,
}

/// Sorts and unary operation symbols generating the (free) base category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseSignature {
    sorts: Vec<String>,
    ops: Vec<OpSymbol>,
}

impl BaseSignature {
    pub fn new<S, O>(sorts: S, ops: O) -> Result<Self, ValidationReport>
    where
        S: IntoIterator,
        S::Item: Into<String>,
        O: IntoIterator<Item = (String, String, String)>,
    {
        let sorts: Vec<String> = sorts.into_iter().map(Into::into).collect();
        let mut report = ValidationReport::new();
        let mut seen = IndexSet::new();
        for s in &sorts {
            if !seen.insert(s.clone()) {
                report.push(format!("sort {s}"), "duplicate sort name");
            }
        }
        let mut op_names = IndexSet::new();
        let mut out = Vec::new();
        for (name, src, tgt) in ops {
            if !op_names.insert(name.clone()) {
                report.push(format!("op {name}"), "duplicate op name");
            }
            let source = seen.get_index_of(&src);
            let target = seen.get_index_of(&tgt);
            match (source, target) {
                (Some(source), Some(target)) => out.push(OpSymbol { name, source, target }),
                _ => report.push(format!("op {name}"), "endpoint is not a declared sort"),
            }
        }
        report.into_result()?;
        Ok(Self { sorts, ops: out })
    }

    /// One sort, no operations: presheaves are plain finite sets.
    pub fn sets() -> Self {
        Self {
            sorts: vec!["X".into()],
            ops: Vec::new(),
        }
    }

    /// `E ⇉ V` with source and target operations: presheaves are directed multigraphs.
    pub fn graphs() -> Self {
        Self {
            sorts: vec!["E".into(), "V".into()],
            ops: vec![
                OpSymbol {
                    name: "s".into(),
                    source: 0,
                    target: 1,
                },
                OpSymbol {
                    name: "t".into(),
                    source: 0,
                    target: 1,
                },
            ],
        }
    }

    pub fn sorts(&self) -> &[String] {
        &self.sorts
    }

    pub fn sort_count(&self) -> usize {
        self.sorts.len()
    }

    pub fn sort_index(&self, name: &str) -> Option<usize> {
        self.sorts.iter().position(|s| s == name)
    }

    pub fn ops(&self) -> &[OpSymbol] {
        &self.ops
    }

    pub fn op_index(&self, name: &str) -> Option<usize> {
        self.ops.iter().position(|o| o.name == name)
    }
}

/// Serialized form of a presheaf: carriers by sort name and op tables by op name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawPresheaf {
    pub carriers: IndexMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub ops: IndexMap<String, IndexMap<String, String>>,
}

/// Serialized form of a morphism: per sort, element name to element name.
pub type RawMorphism = IndexMap<String, IndexMap<String, String>>;

/// A finite presheaf: carriers per sort plus total op tables.
#[derive(Debug, Clone)]
pub struct Presheaf {
    sig: Arc<BaseSignature>,
    carriers: Vec<IndexSet<String>>,
    tables: Vec<Vec<usize>>,
}

impl PartialEq for Presheaf {
    fn eq(&self, other: &Self) -> bool {
        self.sig == other.sig
            && self.tables == other.tables
            && self.carriers.len() == other.carriers.len()
            && self
                .carriers
                .iter()
                .zip(&other.carriers)
                .all(|(a, b)| a.iter().eq(b.iter()))
    }
}

impl Eq for Presheaf {}

/// Checks the presheaf invariants of a serialized presheaf against `sig`.
pub fn validate_presheaf(sig: &BaseSignature, raw: &RawPresheaf) -> ValidationReport {
    let mut report = ValidationReport::new();
    let mut carriers: Vec<IndexSet<&str>> = vec![IndexSet::new(); sig.sort_count()];
    for (sort, elems) in &raw.carriers {
        let Some(x) = sig.sort_index(sort) else {
            report.push(format!("sort {sort}"), "unknown sort");
            continue;
        };
        for e in elems {
            if !carriers[x].insert(e.as_str()) {
                report.push(format!("sort {sort}, element {e}"), "duplicate element");
            }
        }
    }
    for name in raw.ops.keys() {
        if sig.op_index(name).is_none() {
            report.push(format!("op {name}"), "unknown op");
        }
    }
    for op in sig.ops() {
        let table = raw.ops.get(&op.name);
        for e in &carriers[op.source] {
            match table.and_then(|t| t.get(*e)) {
                None => report.push(format!("op {}, element {e}", op.name), "op table not total"),
                Some(v) if !carriers[op.target].contains(v.as_str()) => report.push(
                    format!("op {}, element {e}", op.name),
                    format!("target not in carrier: {v}"),
                ),
                Some(_) => {}
            }
        }
        if let Some(t) = table {
            for k in t.keys() {
                if !carriers[op.source].contains(k.as_str()) {
                    report.push(format!("op {}, element {k}", op.name), "source not in carrier");
                }
            }
        }
    }
    report
}

impl Presheaf {
    /// Builds a presheaf from positional data, checking totality and bounds.
    pub fn new(
        sig: Arc<BaseSignature>,
        carriers: Vec<Vec<String>>,
        tables: Vec<Vec<usize>>,
    ) -> Result<Self, ValidationReport> {
        let mut report = ValidationReport::new();
        if carriers.len() != sig.sort_count() {
            report.push("carriers", "one carrier per sort required");
            return Err(report);
        }
        if tables.len() != sig.ops().len() {
            report.push("tables", "one table per op required");
            return Err(report);
        }
        let mut sets = Vec::with_capacity(carriers.len());
        for (x, elems) in carriers.into_iter().enumerate() {
            let mut set = IndexSet::with_capacity(elems.len());
            for e in elems {
                if let Some(dup) = set.replace(e) {
                    report.push(format!("sort {}, element {dup}", sig.sorts()[x]), "duplicate element");
                }
            }
            sets.push(set);
        }
        for (o, op) in sig.ops().iter().enumerate() {
            if tables[o].len() != sets[op.source].len() {
                report.push(format!("op {}", op.name), "op table not total");
                continue;
            }
            for (x, &v) in tables[o].iter().enumerate() {
                if v >= sets[op.target].len() {
                    report.push(
                        format!("op {}, element {}", op.name, sets[op.source][x]),
                        "target not in carrier",
                    );
                }
            }
        }
        report.into_result()?;
        Ok(Self {
            sig,
            carriers: sets,
            tables,
        })
    }

    /// The initial presheaf: every carrier empty.
    pub fn empty(sig: Arc<BaseSignature>) -> Self {
        let carriers = vec![IndexSet::new(); sig.sort_count()];
        let tables = vec![Vec::new(); sig.ops().len()];
        Self { sig, carriers, tables }
    }

    pub fn from_raw(sig: Arc<BaseSignature>, raw: &RawPresheaf) -> Result<Self, ValidationReport> {
        validate_presheaf(&sig, raw).into_result()?;
        let mut carriers = vec![Vec::new(); sig.sort_count()];
        for (sort, elems) in &raw.carriers {
            carriers[sig.sort_index(sort).expect("validated")] = elems.clone();
        }
        let index: Vec<HashMap<&str, usize>> = carriers
            .iter()
            .map(|c| c.iter().enumerate().map(|(i, e)| (e.as_str(), i)).collect())
            .collect();
        let tables = sig
            .ops()
            .iter()
            .map(|op| {
                carriers[op.source]
                    .iter()
                    .map(|e| index[op.target][raw.ops[&op.name][e].as_str()])
                    .collect()
            })
            .collect();
        Self::new(sig, carriers, tables)
    }

    pub fn to_raw(&self) -> RawPresheaf {
        let carriers = self
            .sig
            .sorts()
            .iter()
            .zip(&self.carriers)
            .map(|(s, c)| (s.clone(), c.iter().cloned().collect()))
            .collect();
        let ops = self
            .sig
            .ops()
            .iter()
            .zip(&self.tables)
            .map(|(op, t)| {
                let table = t
                    .iter()
                    .enumerate()
                    .map(|(x, &y)| (self.carriers[op.source][x].clone(), self.carriers[op.target][y].clone()))
                    .collect();
                (op.name.clone(), table)
            })
            .collect();
        RawPresheaf { carriers, ops }
    }

    pub fn signature(&self) -> &Arc<BaseSignature> {
        &self.sig
    }

    pub fn carrier(&self, sort: usize) -> &IndexSet<String> {
        &self.carriers[sort]
    }

    pub fn size(&self, sort: usize) -> usize {
        self.carriers[sort].len()
    }

    pub fn total_size(&self) -> usize {
        self.carriers.iter().map(IndexSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total_size() == 0
    }

    pub fn id(&self, sort: usize, idx: usize) -> &str {
        &self.carriers[sort][idx]
    }

    pub fn index_of(&self, sort: usize, id: &str) -> Option<usize> {
        self.carriers[sort].get_index_of(id)
    }

    /// Applies op `op` to element `idx` of its source sort.
    pub fn apply(&self, op: usize, idx: usize) -> usize {
        self.tables[op][idx]
    }

    pub fn table(&self, op: usize) -> &[usize] {
        &self.tables[op]
    }
}

/// A sortwise map between presheaves commuting with every op.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PresheafMorphism {
    dom: Arc<Presheaf>,
    cod: Arc<Presheaf>,
    comps: Vec<Vec<usize>>,
}

/// Checks totality, bounds and naturality of positional morphism data.
pub fn validate_morphism(dom: &Presheaf, cod: &Presheaf, comps: &[Vec<usize>]) -> ValidationReport {
    let mut report = ValidationReport::new();
    let sig = dom.signature();
    if sig != cod.signature() {
        report.push("signature", "domain and codomain over different signatures");
        return report;
    }
    if comps.len() != sig.sort_count() {
        report.push("components", "one component per sort required");
        return report;
    }
    for (x, comp) in comps.iter().enumerate() {
        if comp.len() != dom.size(x) {
            report.push(format!("sort {}", sig.sorts()[x]), "component not total");
            return report;
        }
        for (e, &v) in comp.iter().enumerate() {
            if v >= cod.size(x) {
                report.push(
                    format!("sort {}, element {}", sig.sorts()[x], dom.id(x, e)),
                    "image not in codomain carrier",
                );
                return report;
            }
        }
    }
    for (o, op) in sig.ops().iter().enumerate() {
        for x in 0..dom.size(op.source) {
            let left = comps[op.target][dom.apply(o, x)];
            let right = cod.apply(o, comps[op.source][x]);
            if left != right {
                report.push(
                    format!("op {}, element {}", op.name, dom.id(op.source, x)),
                    format!(
                        "naturality fails: {} vs {}",
                        cod.id(op.target, left),
                        cod.id(op.target, right)
                    ),
                );
            }
        }
    }
    report
}

impl PresheafMorphism {
    pub fn new(dom: Arc<Presheaf>, cod: Arc<Presheaf>, comps: Vec<Vec<usize>>) -> Result<Self, ValidationReport> {
        validate_morphism(&dom, &cod, &comps).into_result()?;
        Ok(Self { dom, cod, comps })
    }

    /// Skips validation; only for data that is natural by construction.
    pub(crate) fn new_unchecked(dom: Arc<Presheaf>, cod: Arc<Presheaf>, comps: Vec<Vec<usize>>) -> Self {
        debug_assert!(validate_morphism(&dom, &cod, &comps).is_empty());
        Self { dom, cod, comps }
    }

    pub fn identity(p: &Arc<Presheaf>) -> Self {
        let comps = (0..p.signature().sort_count())
            .map(|x| (0..p.size(x)).collect())
            .collect();
        Self {
            dom: p.clone(),
            cod: p.clone(),
            comps,
        }
    }

    pub fn from_raw(dom: Arc<Presheaf>, cod: Arc<Presheaf>, raw: &RawMorphism) -> Result<Self, ValidationReport> {
        let sig = dom.signature().clone();
        let mut report = ValidationReport::new();
        for sort in raw.keys() {
            if sig.sort_index(sort).is_none() {
                report.push(format!("sort {sort}"), "unknown sort");
            }
        }
        let mut comps = Vec::with_capacity(sig.sort_count());
        for (x, sort) in sig.sorts().iter().enumerate() {
            let table = raw.get(sort);
            let mut comp = Vec::with_capacity(dom.size(x));
            for e in dom.carrier(x) {
                match table.and_then(|t| t.get(e)) {
                    None => report.push(format!("sort {sort}, element {e}"), "component not total"),
                    Some(v) => match cod.index_of(x, v) {
                        Some(i) => comp.push(i),
                        None => report.push(
                            format!("sort {sort}, element {e}"),
                            format!("target not in carrier: {v}"),
                        ),
                    },
                }
            }
            if let Some(t) = table {
                for k in t.keys() {
                    if dom.index_of(x, k).is_none() {
                        report.push(format!("sort {sort}, element {k}"), "source not in carrier");
                    }
                }
            }
            comps.push(comp);
        }
        report.into_result()?;
        Self::new(dom, cod, comps)
    }

    pub fn to_raw(&self) -> RawMorphism {
        let sig = self.dom.signature();
        sig.sorts()
            .iter()
            .enumerate()
            .map(|(x, sort)| {
                let table = self.comps[x]
                    .iter()
                    .enumerate()
                    .map(|(e, &v)| (self.dom.id(x, e).to_string(), self.cod.id(x, v).to_string()))
                    .collect();
                (sort.clone(), table)
            })
            .collect()
    }

    pub fn domain(&self) -> &Arc<Presheaf> {
        &self.dom
    }

    pub fn codomain(&self) -> &Arc<Presheaf> {
        &self.cod
    }

    pub fn component(&self, sort: usize) -> &[usize] {
        &self.comps[sort]
    }

    pub fn apply(&self, sort: usize, idx: usize) -> usize {
        self.comps[sort][idx]
    }

    /// `other ∘ self`.
    pub fn then(&self, other: &PresheafMorphism) -> Result<PresheafMorphism> {
        if *self.cod != *other.dom {
            return Err(Error::NotComposable);
        }
        let comps = self
            .comps
            .iter()
            .enumerate()
            .map(|(x, c)| c.iter().map(|&v| other.comps[x][v]).collect())
            .collect();
        Ok(Self {
            dom: self.dom.clone(),
            cod: other.cod.clone(),
            comps,
        })
    }

    pub fn is_identity(&self) -> bool {
        *self.dom == *self.cod && self.comps.iter().all(|c| c.iter().enumerate().all(|(i, &v)| i == v))
    }

    /// Image membership flags per codomain element of `sort`.
    pub fn image(&self, sort: usize) -> Vec<bool> {
        let mut hit = vec![false; self.cod.size(sort)];
        for &v in &self.comps[sort] {
            hit[v] = true;
        }
        hit
    }

    pub fn is_injective(&self) -> bool {
        (0..self.comps.len()).all(|x| {
            let mut seen = vec![false; self.cod.size(x)];
            self.comps[x].iter().all(|&v| !std::mem::replace(&mut seen[v], true))
        })
    }

    pub fn is_surjective(&self) -> bool {
        (0..self.comps.len()).all(|x| self.image(x).into_iter().all(|b| b))
    }

    pub fn is_bijective(&self) -> bool {
        self.is_injective() && self.is_surjective()
    }

    /// Inverse of a bijective morphism.
    pub fn inverse(&self) -> Option<PresheafMorphism> {
        if !self.is_bijective() {
            return None;
        }
        let comps = self
            .comps
            .iter()
            .map(|c| {
                let mut inv = vec![0; c.len()];
                for (i, &v) in c.iter().enumerate() {
                    inv[v] = i;
                }
                inv
            })
            .collect();
        Some(Self {
            dom: self.cod.clone(),
            cod: self.dom.clone(),
            comps,
        })
    }
}

/// A family of equivalence relations, one per sort, stored as class ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Congruence {
    class_of: Vec<Vec<usize>>,
    class_count: Vec<usize>,
}

impl Congruence {
    /// Class ids are renumbered by first occurrence.
    pub fn from_class_ids(ids: Vec<Vec<usize>>) -> Self {
        let mut class_of = Vec::with_capacity(ids.len());
        let mut class_count = Vec::with_capacity(ids.len());
        for sort_ids in ids {
            let mut renumber = HashMap::new();
            let normalized: Vec<usize> = sort_ids
                .iter()
                .map(|id| {
                    let next = renumber.len();
                    *renumber.entry(*id).or_insert(next)
                })
                .collect();
            class_count.push(renumber.len());
            class_of.push(normalized);
        }
        Self { class_of, class_count }
    }

    pub fn discrete(p: &Presheaf) -> Self {
        Self::from_class_ids(
            (0..p.signature().sort_count())
                .map(|x| (0..p.size(x)).collect())
                .collect(),
        )
    }

    pub fn total(p: &Presheaf) -> Self {
        Self::from_class_ids((0..p.signature().sort_count()).map(|x| vec![0; p.size(x)]).collect())
    }

    /// Equivalence closure of `pairs` (sort, a, b) without op propagation.
    pub fn from_pairs(p: &Presheaf, pairs: &[(usize, usize, usize)]) -> Self {
        let sorts = p.signature().sort_count();
        let mut ufs: Vec<UnionFind> = (0..sorts).map(|x| UnionFind::new(p.size(x))).collect();
        for &(x, a, b) in pairs {
            ufs[x].union(a, b);
        }
        Self::from_class_ids(ufs.iter_mut().map(|u| u.class_ids().0).collect())
    }

    /// Smallest congruence containing `pairs`: equivalence closure propagated
    /// along every op until stable.
    pub fn generated_by(p: &Presheaf, pairs: &[(usize, usize, usize)]) -> Self {
        let sig = p.signature();
        let mut ufs: Vec<UnionFind> = (0..sig.sort_count()).map(|x| UnionFind::new(p.size(x))).collect();
        let mut queue: Vec<(usize, usize, usize)> = pairs.to_vec();
        while let Some((x, a, b)) = queue.pop() {
            if ufs[x].union(a, b) {
                for (o, op) in sig.ops().iter().enumerate() {
                    if op.source == x {
                        queue.push((op.target, p.apply(o, a), p.apply(o, b)));
                    }
                }
            }
        }
        Self::from_class_ids(ufs.iter_mut().map(|u| u.class_ids().0).collect())
    }

    /// Kernel of a morphism: elements identified when their images agree.
    pub fn kernel(f: &PresheafMorphism) -> Self {
        Self::from_class_ids(f.comps.clone())
    }

    pub fn class(&self, sort: usize, idx: usize) -> usize {
        self.class_of[sort][idx]
    }

    pub fn class_count(&self, sort: usize) -> usize {
        self.class_count[sort]
    }

    pub fn same(&self, sort: usize, a: usize, b: usize) -> bool {
        self.class_of[sort][a] == self.class_of[sort][b]
    }

    /// Members of each class, classes in id order.
    pub fn classes(&self, sort: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.class_count[sort]];
        for (e, &c) in self.class_of[sort].iter().enumerate() {
            out[c].push(e);
        }
        out
    }

    pub fn sort_count(&self) -> usize {
        self.class_of.len()
    }

    /// Returns the first pair witnessing op-incompatibility, if any.
    pub fn check_compatible(&self, p: &Presheaf) -> Result<()> {
        let sig = p.signature();
        for (o, op) in sig.ops().iter().enumerate() {
            let mut image_of_class: HashMap<usize, (usize, usize)> = HashMap::new();
            for x in 0..p.size(op.source) {
                let c = self.class_of[op.source][x];
                let img = p.apply(o, x);
                match image_of_class.get(&c) {
                    Some(&(first, first_img))
                        if self.class_of[op.target][first_img] != self.class_of[op.target][img] =>
                    {
                        return Err(Error::IncompatibleRelation {
                            op: op.name.clone(),
                            left: p.id(op.source, first).to_string(),
                            right: p.id(op.source, x).to_string(),
                        });
                    }
                    Some(_) => {}
                    None => {
                        image_of_class.insert(c, (x, img));
                    }
                }
            }
        }
        Ok(())
    }
}

/// A coproduct object together with its injections.
#[derive(Debug, Clone)]
pub struct Coproduct {
    pub object: Arc<Presheaf>,
    pub injections: Vec<PresheafMorphism>,
    offsets: Vec<Vec<usize>>,
}

/// Sortwise tagged disjoint union. Element ids become `tag:id`.
pub fn coproduct(sig: &Arc<BaseSignature>, parts: &[(String, Arc<Presheaf>)]) -> Result<Coproduct> {
    if parts.iter().any(|(_, p)| **p.signature() != **sig) {
        return Err(Error::SignatureMismatch);
    }
    let sorts = sig.sort_count();
    let mut carriers = vec![Vec::new(); sorts];
    let mut offsets = Vec::with_capacity(parts.len());
    for (tag, p) in parts {
        let mut off = Vec::with_capacity(sorts);
        for (x, carrier) in carriers.iter_mut().enumerate() {
            off.push(carrier.len());
            carrier.extend(p.carrier(x).iter().map(|e| ids::tagged(tag, e)));
        }
        offsets.push(off);
    }
    let tables = sig
        .ops()
        .iter()
        .enumerate()
        .map(|(o, op)| {
            parts
                .iter()
                .zip(&offsets)
                .flat_map(|((_, p), off)| p.table(o).iter().map(move |&v| off[op.target] + v))
                .collect()
        })
        .collect();
    let object = Arc::new(Presheaf::new(sig.clone(), carriers, tables)?);
    let injections = parts
        .iter()
        .zip(&offsets)
        .map(|((_, p), off)| {
            let comps = (0..sorts)
                .map(|x| (0..p.size(x)).map(|e| off[x] + e).collect())
                .collect();
            PresheafMorphism::new_unchecked(p.clone(), object.clone(), comps)
        })
        .collect();
    Ok(Coproduct {
        object,
        injections,
        offsets,
    })
}

impl Coproduct {
    /// Position of element `idx` of part `part` inside the coproduct carrier.
    pub fn embed(&self, part: usize, sort: usize, idx: usize) -> usize {
        self.offsets[part][sort] + idx
    }

    /// The part and local index of a coproduct element.
    pub fn locate(&self, sort: usize, idx: usize) -> (usize, usize) {
        let part = self
            .offsets
            .iter()
            .enumerate()
            .rev()
            .find(|(p, off)| off[sort] <= idx && idx - off[sort] < self.injections[*p].domain().size(sort))
            .map(|(p, _)| p)
            .expect("index inside the coproduct");
        (part, idx - self.offsets[part][sort])
    }

    /// The unique morphism out of the coproduct restricting to `legs`.
    pub fn copair(&self, legs: &[PresheafMorphism]) -> Result<PresheafMorphism> {
        if legs.len() != self.injections.len() {
            return Err(Error::Precondition("one leg per coproduct part required".into()));
        }
        let Some(target) = legs.first().map(|l| l.codomain().clone()) else {
            let sig = self.object.signature().clone();
            let empty = Arc::new(Presheaf::empty(sig));
            return Ok(PresheafMorphism::identity(&empty));
        };
        for (leg, inj) in legs.iter().zip(&self.injections) {
            if *leg.codomain() != target {
                return Err(Error::CodomainMismatch);
            }
            if leg.domain() != inj.domain() {
                return Err(Error::NotComposable);
            }
        }
        let comps = (0..self.object.signature().sort_count())
            .map(|x| legs.iter().flat_map(|l| l.component(x).iter().copied()).collect())
            .collect();
        Ok(PresheafMorphism::new_unchecked(self.object.clone(), target, comps))
    }
}

/// A chosen pullback with its two projections.
#[derive(Debug, Clone)]
pub struct Pullback {
    pub object: Arc<Presheaf>,
    /// Projection onto the domain of the first morphism.
    pub left: PresheafMorphism,
    /// Projection onto the domain of the second morphism.
    pub right: PresheafMorphism,
}

/// Pullback of `f: A → C` and `g: B → C`. Pulling back along an identity
/// returns the other domain unchanged.
pub fn pullback(f: &PresheafMorphism, g: &PresheafMorphism) -> Result<Pullback> {
    if *f.codomain() != *g.codomain() {
        return Err(Error::CodomainMismatch);
    }
    if g.is_identity() {
        return Ok(Pullback {
            object: f.domain().clone(),
            left: PresheafMorphism::identity(f.domain()),
            right: f.clone(),
        });
    }
    if f.is_identity() {
        return Ok(Pullback {
            object: g.domain().clone(),
            left: g.clone(),
            right: PresheafMorphism::identity(g.domain()),
        });
    }
    let (a, b) = (f.domain(), g.domain());
    let sig = a.signature().clone();
    let mut pairs: Vec<Vec<(usize, usize)>> = Vec::with_capacity(sig.sort_count());
    for x in 0..sig.sort_count() {
        let mut by_image: HashMap<usize, Vec<usize>> = HashMap::new();
        for j in 0..b.size(x) {
            by_image.entry(g.apply(x, j)).or_default().push(j);
        }
        let mut ps: Vec<(usize, usize)> = (0..a.size(x))
            .flat_map(|i| by_image.get(&f.apply(x, i)).into_iter().flatten().map(move |&j| (i, j)))
            .collect();
        ps.sort_by(|p, q| (a.id(x, p.0), b.id(x, p.1)).cmp(&(a.id(x, q.0), b.id(x, q.1))));
        pairs.push(ps);
    }
    let index: Vec<HashMap<(usize, usize), usize>> = pairs
        .iter()
        .map(|ps| ps.iter().enumerate().map(|(k, &p)| (p, k)).collect())
        .collect();
    let carriers = pairs
        .iter()
        .enumerate()
        .map(|(x, ps)| ps.iter().map(|&(i, j)| ids::pair(a.id(x, i), b.id(x, j))).collect())
        .collect();
    let tables = sig
        .ops()
        .iter()
        .enumerate()
        .map(|(o, op)| {
            pairs[op.source]
                .iter()
                .map(|&(i, j)| index[op.target][&(a.apply(o, i), b.apply(o, j))])
                .collect()
        })
        .collect();
    let object = Arc::new(Presheaf::new(sig, carriers, tables)?);
    let left = PresheafMorphism::new_unchecked(
        object.clone(),
        a.clone(),
        pairs.iter().map(|ps| ps.iter().map(|p| p.0).collect()).collect(),
    );
    let right = PresheafMorphism::new_unchecked(
        object.clone(),
        b.clone(),
        pairs.iter().map(|ps| ps.iter().map(|p| p.1).collect()).collect(),
    );
    Ok(Pullback { object, left, right })
}

impl Pullback {
    /// The unique map into the pullback from a commuting pair `h1: X → A`, `h2: X → B`.
    pub fn mediate(&self, h1: &PresheafMorphism, h2: &PresheafMorphism) -> Result<PresheafMorphism> {
        if h1.domain() != h2.domain() || h1.codomain() != self.left.codomain() || h2.codomain() != self.right.codomain()
        {
            return Err(Error::NotComposable);
        }
        let sig = self.object.signature();
        let mut comps = Vec::with_capacity(sig.sort_count());
        for x in 0..sig.sort_count() {
            let index: HashMap<(usize, usize), usize> = (0..self.object.size(x))
                .map(|k| ((self.left.apply(x, k), self.right.apply(x, k)), k))
                .collect();
            let mut comp = Vec::with_capacity(h1.domain().size(x));
            for e in 0..h1.domain().size(x) {
                match index.get(&(h1.apply(x, e), h2.apply(x, e))) {
                    Some(&k) => comp.push(k),
                    None => {
                        return Err(Error::NotCommutative(format!(
                            "element {} does not land in the pullback",
                            h1.domain().id(x, e)
                        )))
                    }
                }
            }
            comps.push(comp);
        }
        Ok(PresheafMorphism::new(h1.domain().clone(), self.object.clone(), comps)?)
    }
}

/// Checks whether the commutative square
///
/// ```text
/// P --top--> B
/// |          |
/// left     right
/// v          v
/// A --bot--> C
/// ```
///
/// is a pullback, i.e. the comparison `P → A ×_C B` is bijective.
pub fn is_pullback_square(
    top: &PresheafMorphism,
    left: &PresheafMorphism,
    right: &PresheafMorphism,
    bottom: &PresheafMorphism,
) -> bool {
    let sig = top.domain().signature();
    for x in 0..sig.sort_count() {
        let p = top.domain().size(x);
        let mut seen = std::collections::HashSet::with_capacity(p);
        for e in 0..p {
            if right.apply(x, top.apply(x, e)) != bottom.apply(x, left.apply(x, e)) {
                return false;
            }
            if !seen.insert((left.apply(x, e), top.apply(x, e))) {
                return false;
            }
        }
        let mut fiber: HashMap<usize, usize> = HashMap::new();
        for b in 0..right.domain().size(x) {
            *fiber.entry(right.apply(x, b)).or_default() += 1;
        }
        let expected: usize = (0..bottom.domain().size(x))
            .map(|a| fiber.get(&bottom.apply(x, a)).copied().unwrap_or(0))
            .sum();
        if expected != p {
            return false;
        }
    }
    true
}

/// A quotient object with its canonical projection.
#[derive(Debug, Clone)]
pub struct Quotient {
    pub object: Arc<Presheaf>,
    pub projection: PresheafMorphism,
}

/// Quotient of `p` by an op-compatible congruence. Each class is named by its
/// least member id and classes are ordered by name.
pub fn quotient(p: &Arc<Presheaf>, c: &Congruence) -> Result<Quotient> {
    c.check_compatible(p)?;
    let sig = p.signature().clone();
    let mut carriers = Vec::with_capacity(sig.sort_count());
    // class id -> position in the quotient carrier
    let mut position: Vec<Vec<usize>> = Vec::with_capacity(sig.sort_count());
    let mut representative: Vec<Vec<usize>> = Vec::with_capacity(sig.sort_count());
    for x in 0..sig.sort_count() {
        let mut named: Vec<(&str, usize, usize)> = c
            .classes(x)
            .into_iter()
            .enumerate()
            .map(|(cls, members)| {
                let rep = *members
                    .iter()
                    .min_by(|&&a, &&b| p.id(x, a).cmp(p.id(x, b)))
                    .expect("classes are nonempty");
                (p.id(x, rep), cls, rep)
            })
            .collect();
        named.sort();
        let mut pos = vec![0; named.len()];
        for (k, &(_, cls, _)) in named.iter().enumerate() {
            pos[cls] = k;
        }
        carriers.push(named.iter().map(|(n, _, _)| n.to_string()).collect::<Vec<_>>());
        representative.push(named.iter().map(|&(_, _, rep)| rep).collect());
        position.push(pos);
    }
    let tables = sig
        .ops()
        .iter()
        .enumerate()
        .map(|(o, op)| {
            representative[op.source]
                .iter()
                .map(|&rep| position[op.target][c.class(op.target, p.apply(o, rep))])
                .collect()
        })
        .collect();
    let object = Arc::new(Presheaf::new(sig.clone(), carriers, tables)?);
    let comps = (0..sig.sort_count())
        .map(|x| (0..p.size(x)).map(|e| position[x][c.class(x, e)]).collect())
        .collect();
    let projection = PresheafMorphism::new_unchecked(p.clone(), object.clone(), comps);
    Ok(Quotient { object, projection })
}
