//! `vk`: colimits and Van Kampen checks for finite presheaf diagrams.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use vk_core::colimit::{colimit_specialized, colimit_universal, simplify, Cocone};
use vk_core::diagram::Diagram;
use vk_core::gen::GenConfig;
use vk_core::io::{
    cocone_json, family_to_raw, instance_by_name, load_workspace, roundtrip_json, to_json, typed_instance_json,
    verdict_json, witness_json, Workspace,
};
use vk_core::semantics::{
    pullback_along_cocone, pushforward, random_typed_instance, roundtrip_counit, roundtrip_unit,
    sample_cartesian_families, CartesianFamily, RoundTrip,
};
use vk_core::shape::VertexClass;
use vk_core::vk::{
    check_affected_minimal, check_bruteforce, check_combined, check_cyclic_branching, decision_route, Condition,
    Verdict, VkVerdict,
};
use vk_core::{dot, selftest, Error};

const EXIT_VK: u8 = 0;
const EXIT_NOT_VK: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_PRECONDITION: u8 = 3;

#[derive(Parser)]
#[command(
    name = "vk",
    version,
    about = "Colimits and Van Kampen checks for finite presheaf diagrams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckMethod {
    Route,
    Bruteforce,
    Combined,
    Cyclic,
    Minimal,
}

#[derive(Clone, Copy, ValueEnum)]
enum CondArg {
    Different,
    Disjoint,
    DisjointIcf,
}

impl From<CondArg> for Condition {
    fn from(c: CondArg) -> Self {
        match c {
            CondArg::Different => Condition::Different,
            CondArg::Disjoint => Condition::Disjoint,
            CondArg::DisjointIcf => Condition::DisjointInnerCycleFree,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ColimitMethod {
    Universal,
    Specialized,
}

#[derive(Clone, Copy, ValueEnum)]
enum RoundTripKind {
    Unit,
    Counit,
}

#[derive(clap::Args)]
struct Common {
    /// Workspace JSON file.
    workspace: PathBuf,
    /// Write the result here instead of stdout.
    #[arg(short = 'o', long = "output")]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a workspace.
    Validate { workspace: PathBuf },
    /// Decide the Van Kampen property.
    Check {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "route")]
        method: CheckMethod,
        /// Path condition for the brute-force method.
        #[arg(long, value_enum, default_value = "different")]
        condition: CondArg,
        /// Print the witness of a failure.
        #[arg(long)]
        witness: bool,
        #[arg(long)]
        json: bool,
        #[arg(long, default_value_t = 10_000_000)]
        budget: u64,
        /// Collapse jump-over and dangling vertices first.
        #[arg(long)]
        simplify: bool,
    },
    /// Compute the colimit cocone.
    Colimit {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "universal")]
        method: ColimitMethod,
    },
    /// Vertex classes and the decision route.
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10_000_000)]
        budget: u64,
    },
    /// Pull a typed instance back along the colimit cocone.
    Pullback {
        #[command(flatten)]
        common: Common,
        /// Name of an instance in the workspace, typed over the colimit apex.
        #[arg(long)]
        instance: String,
    },
    /// Push the workspace's cartesian typing forward to the colimit of its target.
    Pushforward {
        #[command(flatten)]
        common: Common,
    },
    /// Compare an instance with its round trip through the colimit.
    Roundtrip {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        kind: RoundTripKind,
        /// Instance to use for the counit; random instances when omitted.
        #[arg(long)]
        instance: Option<String>,
        /// Number of random samples when no typing or instance is given.
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Render the shape, or the failure witness, as DOT.
    ExportDot {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        witness: bool,
        #[arg(long, default_value_t = 10_000_000)]
        budget: u64,
    },
    /// Randomized agreement of all checkers.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 10_000_000)]
        budget: u64,
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
    },
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Precondition(_) | Error::DirectedCycle | Error::BudgetExhausted(_) | Error::CycleOverflow { .. } => {
            EXIT_PRECONDITION
        }
        _ => EXIT_INVALID,
    }
}

fn effective_seed(seed: u64) -> Result<u64, Error> {
    match std::env::var("VK_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("VK_SEED is not an unsigned integer: {s}"))),
        Err(_) => Ok(seed),
    }
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), Error> {
    match output {
        Some(p) => Ok(std::fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_method(d: &Diagram, method: CheckMethod, cond: Condition, budget: u64) -> Result<VkVerdict, Error> {
    match method {
        CheckMethod::Route => decision_route(d, budget),
        CheckMethod::Bruteforce => check_bruteforce(d, cond, budget),
        CheckMethod::Combined => check_combined(d).map(|c| c.verdict),
        CheckMethod::Cyclic => check_cyclic_branching(d, budget),
        CheckMethod::Minimal => check_affected_minimal(d, budget),
    }
}

fn verdict_text(d: &Diagram, v: &VkVerdict, witness: bool) -> String {
    let mut out = format!("{} ({})\n", v.result.as_str(), v.method.as_str());
    if let Some(n) = &v.note {
        out.push_str(&format!("note: {n}\n"));
    }
    if witness {
        if let Some(w) = &v.canonical {
            let j = witness_json(d, w);
            out.push_str(&format!("sort: {}\n", j["sort"].as_str().unwrap_or_default()));
            for key in ["p1", "p2"] {
                if let Some(t) = j[key]["text"].as_str() {
                    out.push_str(&format!("{key}: {t}\n"));
                }
            }
        }
    }
    out
}

fn colimit(d: &Diagram, method: ColimitMethod) -> Result<Cocone, Error> {
    match method {
        ColimitMethod::Universal => colimit_universal(d),
        ColimitMethod::Specialized => colimit_specialized(d),
    }
}

fn typing_family(ws: &Workspace) -> Result<(CartesianFamily, &Workspace), Error> {
    let t = ws
        .typing
        .as_ref()
        .ok_or_else(|| Error::Precondition("workspace has no typing".into()))?;
    Ok((CartesianFamily::new(t.family.clone())?, &t.target))
}

fn roundtrip_exit(rt: &RoundTrip) -> u8 {
    if rt.pass {
        EXIT_VK
    } else {
        EXIT_NOT_VK
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Validate { workspace } => {
            let ws = load_workspace(&workspace)?;
            let s = ws.diagram.shape();
            println!("ok: {} components, {} edges", s.vertex_count(), s.edge_count());
            Ok(EXIT_VK)
        }
        Command::Check {
            common,
            method,
            condition,
            witness,
            json,
            budget,
            simplify: pre,
        } => {
            let ws = load_workspace(&common.workspace)?;
            let d: Arc<Diagram> = if pre {
                Arc::new(simplify(&ws.diagram)?.diagram)
            } else {
                ws.diagram.clone()
            };
            let v = run_method(&d, method, condition.into(), budget)?;
            let text = if json {
                to_json(&verdict_json(&d, &v))?
            } else {
                verdict_text(&d, &v, witness)
            };
            emit(common.output.as_deref(), &text)?;
            Ok(match v.result {
                Verdict::Vk => EXIT_VK,
                Verdict::NotVk => EXIT_NOT_VK,
                Verdict::Undetermined => EXIT_PRECONDITION,
            })
        }
        Command::Colimit { common, method } => {
            let ws = load_workspace(&common.workspace)?;
            let c = colimit(&ws.diagram, method)?;
            let name = match method {
                ColimitMethod::Universal => "universal",
                ColimitMethod::Specialized => "specialized",
            };
            emit(common.output.as_deref(), &to_json(&cocone_json(&ws.diagram, &c, name))?)?;
            Ok(EXIT_VK)
        }
        Command::Classify { common, budget } => {
            let ws = load_workspace(&common.workspace)?;
            let d = &ws.diagram;
            let s = d.shape();
            let names = |vs: Vec<usize>| -> Vec<String> { vs.into_iter().map(|v| s.vertices()[v].clone()).collect() };
            let classes = s.classify_vertices();
            let of_class =
                |k: VertexClass| -> Vec<String> { names((0..s.vertex_count()).filter(|&v| classes[v] == k).collect()) };
            let by_vertex: serde_json::Map<String, Value> = s
                .vertices()
                .iter()
                .zip(&classes)
                .map(|(v, c)| (v.clone(), json!(c.as_str())))
                .collect();
            let mut out = json!({
                "vertices": by_vertex,
                "minimal": names(s.min_indices()),
                "branching": names(s.branching_indices()),
                "irrelevant": of_class(VertexClass::Irrelevant),
                "jump_over": of_class(VertexClass::JumpOver),
            });
            if !s.has_directed_cycle() {
                out["affected_minimal"] = json!(names(s.affected_minimal()?));
            }
            let v = decision_route(d, budget)?;
            out["route"] = verdict_json(d, &v)["route"].clone();
            out["result"] = json!(v.result);
            emit(common.output.as_deref(), &to_json(&out)?)?;
            Ok(EXIT_VK)
        }
        Command::Pullback { common, instance } => {
            let ws = load_workspace(&common.workspace)?;
            let c = colimit_universal(&ws.diagram)?;
            let t = instance_by_name(&ws, &instance, &c.apex)?;
            let pb = pullback_along_cocone(&ws.diagram, &c, &t)?;
            let over = common
                .workspace
                .file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_default();
            emit(
                common.output.as_deref(),
                &to_json(&family_to_raw(&pb.family.transformation, &over))?,
            )?;
            Ok(EXIT_VK)
        }
        Command::Pushforward { common } => {
            let ws = load_workspace(&common.workspace)?;
            let (f, target) = typing_family(&ws)?;
            let c = colimit_universal(&target.diagram)?;
            let p = pushforward(&target.diagram, &c, &f)?;
            emit(common.output.as_deref(), &to_json(&typed_instance_json(&p.typed))?)?;
            Ok(EXIT_VK)
        }
        Command::Roundtrip {
            common,
            kind,
            instance,
            samples,
            seed,
        } => {
            let seed = effective_seed(seed)?;
            let ws = load_workspace(&common.workspace)?;
            match kind {
                RoundTripKind::Unit => {
                    let (families, d) = match &ws.typing {
                        Some(_) => {
                            let (f, target) = typing_family(&ws)?;
                            (vec![f], target.diagram.clone())
                        }
                        None => {
                            let c = colimit_universal(&ws.diagram)?;
                            (
                                sample_cartesian_families(&ws.diagram, &c, samples, seed)?,
                                ws.diagram.clone(),
                            )
                        }
                    };
                    let c = colimit_universal(&d)?;
                    let labels: Vec<String> = d.shape().vertices().to_vec();
                    let mut reports = Vec::new();
                    let mut all = true;
                    for f in &families {
                        let rt = roundtrip_unit(&d, &c, f)?;
                        all &= rt.pass;
                        reports.push(roundtrip_json("unit", &labels, &rt));
                    }
                    let out = if reports.len() == 1 {
                        reports.pop().expect("one report")
                    } else {
                        json!({ "kind": "unit", "seed": seed, "pass": all, "samples": reports })
                    };
                    emit(common.output.as_deref(), &to_json(&out)?)?;
                    Ok(if all { EXIT_VK } else { EXIT_NOT_VK })
                }
                RoundTripKind::Counit => {
                    let d = &ws.diagram;
                    let c = colimit_universal(d)?;
                    let labels = vec!["counit".to_string()];
                    match instance {
                        Some(name) => {
                            let t = instance_by_name(&ws, &name, &c.apex)?;
                            let rt = roundtrip_counit(d, &c, &t)?;
                            emit(
                                common.output.as_deref(),
                                &to_json(&roundtrip_json("counit", &labels, &rt))?,
                            )?;
                            Ok(roundtrip_exit(&rt))
                        }
                        None => {
                            let mut rng = ChaCha8Rng::seed_from_u64(seed);
                            let mut failed = 0usize;
                            for _ in 0..samples {
                                let t = random_typed_instance(&c.apex, &mut rng);
                                if !roundtrip_counit(d, &c, &t)?.pass {
                                    failed += 1;
                                }
                            }
                            let out = json!({
                                "kind": "counit",
                                "seed": seed,
                                "samples": samples,
                                "failed": failed,
                                "pass": failed == 0,
                            });
                            emit(common.output.as_deref(), &to_json(&out)?)?;
                            Ok(if failed == 0 { EXIT_VK } else { EXIT_NOT_VK })
                        }
                    }
                }
            }
        }
        Command::ExportDot {
            common,
            witness,
            budget,
        } => {
            let ws = load_workspace(&common.workspace)?;
            let d = &ws.diagram;
            if !witness {
                emit(common.output.as_deref(), &dot::shape_dot(d.shape()))?;
                return Ok(EXIT_VK);
            }
            let v = decision_route(d, budget)?;
            match &v.canonical {
                Some(w) => {
                    emit(common.output.as_deref(), &dot::witness_dot(d, w))?;
                    Ok(EXIT_NOT_VK)
                }
                None => {
                    eprintln!("diagram is VK; no witness to render");
                    Ok(EXIT_VK)
                }
            }
        }
        Command::Selftest {
            seed,
            count,
            budget,
            output,
        } => {
            let seed = effective_seed(seed)?;
            let r = selftest::selftest(seed, count, budget, &GenConfig::default())?;
            emit(output.as_deref(), &to_json(&r)?)?;
            Ok(if r.pass() { EXIT_VK } else { EXIT_NOT_VK })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
