//! Randomized agreement between every applicable checker.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::colimit::{cocones_isomorphic, colimit_universal, simplify};
use crate::diagram::Diagram;
use crate::gen::{random_diagram, GenConfig};
use crate::vk::{
    check_affected_minimal, check_bruteforce, check_combined, check_cyclic_branching, check_directed_cycle,
    check_image_disjoint, check_monic_shortcut, decision_route, validate_witness, Condition, DirectedCycleOutcome,
    MonicOutcome, Verdict, VkVerdict,
};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CaseResult {
    pub index: usize,
    pub verdicts: Vec<(String, Verdict)>,
    pub problems: Vec<String>,
}

impl CaseResult {
    pub fn agrees(&self) -> bool {
        self.problems.is_empty() && self.verdicts.windows(2).all(|w| w[0].1 == w[1].1)
    }

    pub fn verdict(&self) -> Option<Verdict> {
        self.verdicts.first().map(|v| v.1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub cases: usize,
    pub vk: usize,
    pub not_vk: usize,
    pub checker_runs: usize,
    pub failures: Vec<CaseResult>,
}

impl SelftestReport {
    pub fn pass(&self) -> bool {
        self.failures.is_empty()
    }
}

fn witness_problems(d: &Diagram, label: &str, v: &VkVerdict, out: &mut Vec<String>) {
    if v.result != Verdict::NotVk {
        return;
    }
    for (what, w) in [("witness", &v.witness), ("canonical", &v.canonical)] {
        match w {
            None => out.push(format!("{label}: NotVK without {what}")),
            Some(w) => {
                let r = validate_witness(d, w);
                if !r.is_empty() {
                    out.push(format!("{label}: invalid {what}: {r}"));
                }
            }
        }
    }
}

/// Runs each checker whose preconditions hold; undetermined answers are
/// skipped, every NotVK witness is validated.
pub fn run_case(d: &Diagram, index: usize, budget: u64) -> Result<CaseResult> {
    let mut verdicts = Vec::new();
    let mut problems = Vec::new();
    let mut record = |dd: &Diagram, label: String, v: &VkVerdict, problems: &mut Vec<String>| {
        witness_problems(dd, &label, v, problems);
        if v.result != Verdict::Undetermined {
            verdicts.push((label, v.result));
        }
    };
    for cond in Condition::ALL {
        let v = check_bruteforce(d, cond, budget)?;
        record(d, format!("bruteforce/{}", cond.as_str()), &v, &mut problems);
    }
    record(d, "route".into(), &decision_route(d, budget)?, &mut problems);
    record(
        d,
        "affected-minimal".into(),
        &check_affected_minimal(d, budget)?,
        &mut problems,
    );
    record(
        d,
        "cyclic-branching".into(),
        &check_cyclic_branching(d, budget)?,
        &mut problems,
    );
    let s = simplify(d)?;
    record(
        &s.diagram,
        "simplified/route".into(),
        &decision_route(&s.diagram, budget)?,
        &mut problems,
    );
    let cyclic = d.shape().has_directed_cycle();
    if let DirectedCycleOutcome::NotVk(w) = check_directed_cycle(d)? {
        verdicts.push(("directed-cycle".into(), Verdict::NotVk));
        let r = validate_witness(d, &w);
        if !r.is_empty() {
            problems.push(format!("directed-cycle: invalid witness: {r}"));
        }
    }
    if !cyclic {
        if let Some(w) = check_image_disjoint(d)? {
            verdicts.push(("image-disjoint".into(), Verdict::NotVk));
            let r = validate_witness(d, &w);
            if !r.is_empty() {
                problems.push(format!("image-disjoint: invalid witness: {r}"));
            }
        }
        if d.all_monic() && check_monic_shortcut(d)? == MonicOutcome::Vk {
            verdicts.push(("monic-shortcut".into(), Verdict::Vk));
        }
        if check_image_disjoint(d)?.is_none() {
            let c = check_combined(d)?;
            let mut sink = Vec::new();
            witness_problems(d, "combined", &c.verdict, &mut sink);
            problems.extend(sink);
            verdicts.push(("combined".into(), c.verdict.result));
            let u = colimit_universal(d)?;
            if !cocones_isomorphic(d, &c.cocone, &u) {
                problems.push("combined: cocone differs from the universal colimit".into());
            }
        }
    }
    Ok(CaseResult {
        index,
        verdicts,
        problems,
    })
}

/// `count` random diagrams; case `i` uses the generator seeded with `seed + i`.
pub fn selftest(seed: u64, count: usize, budget: u64, cfg: &GenConfig) -> Result<SelftestReport> {
    let mut report = SelftestReport {
        seed,
        cases: count,
        vk: 0,
        not_vk: 0,
        checker_runs: 0,
        failures: Vec::new(),
    };
    for i in 0..count {
        let d = random_diagram(&mut ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64)), cfg);
        let case = run_case(&d, i, budget)?;
        report.checker_runs += case.verdicts.len();
        match case.verdict() {
            Some(Verdict::Vk) => report.vk += 1,
            Some(Verdict::NotVk) => report.not_vk += 1,
            _ => {}
        }
        if !case.agrees() {
            report.failures.push(case);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_selftest_agrees() {
        let r = selftest(7, 150, 1_000_000, &GenConfig::default()).unwrap();
        assert!(r.pass(), "{:#?}", r.failures);
        assert!(r.vk > 0 && r.not_vk > 0, "{r:?}");
    }
}
