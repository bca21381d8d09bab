//! Endpoint skeleton generation with channel wiring.
//!
//! Channels are implicit in a protocol: every transmission prefix gets a
//! unique annotation, projection propagates annotations verbatim, and
//! merging collapses them into set-annotations. Planning then maps each
//! set-annotation to a fresh channel identifier and reroutes the atomics it
//! subsumes, so that sender and receiver of every interaction end up wired
//! to the same channel.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::global::GlobalType;
use crate::ident::{Label, RecVar, Role, Sort};
use crate::projection::{project_annotated, Ann, AnnLocalType, ProjectionError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    In,
    Out,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelDecl {
    pub id: u64,
    /// Labels that flow over the channel (the crash pseudo-label never
    /// does).
    pub payload_labels: BTreeSet<Label>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelArg {
    pub channel: u64,
    pub direction: Direction,
    pub payload_labels: BTreeSet<Label>,
}

/// The channel wiring for one protocol.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelPlan {
    /// Injective map from annotations to channel identifiers; atomic
    /// annotations keep their number, set-annotations get fresh ones
    /// allocated past the largest atomic.
    pub ann_subst: Vec<(Ann, u64)>,
    /// Where each annotation's traffic actually goes: an atomic subsumed by
    /// a set-annotation is rerouted to that set's channel.
    pub ann_arg: Vec<(Ann, u64)>,
    pub channels: Vec<ChannelDecl>,
    /// Per role, the channel arguments of its implementing function, in the
    /// order the annotations first occur in its local type.
    pub per_role_args: BTreeMap<Role, Vec<ChannelArg>>,
}

impl ChannelPlan {
    pub fn arg_for(&self, ann: &Ann) -> Option<u64> {
        self.ann_arg.iter().find(|(a, _)| a == ann).map(|(_, c)| *c)
    }
}

#[derive(Clone, Debug, thiserror::Error, PartialEq, Eq)]
pub enum CodegenError {
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error("atomic annotation {0} occurs in several set-annotations; channel assignment would be ambiguous")]
    OverlappingSets(u64),
}

/// Derive the channel plan from the annotated projections of one global
/// type.
pub fn plan_channels(
    projections: &BTreeMap<Role, AnnLocalType>,
) -> Result<ChannelPlan, CodegenError> {
    let mut all: BTreeSet<Ann> = BTreeSet::new();
    for t in projections.values() {
        all.extend(t.annotations());
    }
    let sets: Vec<BTreeSet<u64>> = all
        .iter()
        .filter_map(|a| match a {
            Ann::Set(s) => Some(s.clone()),
            Ann::Atom(_) => None,
        })
        .collect();

    // Each subsumed atomic must sit in exactly one set-annotation.
    let mut covered: BTreeMap<u64, BTreeSet<u64>> = BTreeMap::new();
    for set in &sets {
        for n in set {
            if let Some(prev) = covered.insert(*n, set.clone()) {
                if &prev != set {
                    return Err(CodegenError::OverlappingSets(*n));
                }
            }
        }
    }

    // Fresh identifiers for set-annotations: counting up from one past the
    // largest number in use.
    let mut next_fresh = all
        .iter()
        .flat_map(|a| a.members())
        .max()
        .map(|m| m + 1)
        .unwrap_or(0);
    let mut ann_subst: Vec<(Ann, u64)> = Vec::new();
    for ann in &all {
        match ann {
            Ann::Atom(n) => ann_subst.push((ann.clone(), *n)),
            Ann::Set(_) => {
                ann_subst.push((ann.clone(), next_fresh));
                next_fresh += 1;
            }
        }
    }
    let subst_of = |ann: &Ann| -> u64 {
        ann_subst.iter().find(|(a, _)| a == ann).map(|(_, c)| *c).expect("annotation known")
    };

    let mut ann_arg: Vec<(Ann, u64)> = Vec::new();
    for ann in &all {
        let target = match ann {
            Ann::Atom(n) => match covered.get(n) {
                Some(set) => subst_of(&Ann::Set(set.clone())),
                None => *n,
            },
            Ann::Set(_) => subst_of(ann),
        };
        ann_arg.push((ann.clone(), target));
    }
    let arg_of = |ann: &Ann| -> u64 {
        ann_arg.iter().find(|(a, _)| a == ann).map(|(_, c)| *c).expect("annotation known")
    };

    // Channel payloads: the union of labels flowing over each channel.
    let mut payloads: BTreeMap<u64, BTreeSet<Label>> = BTreeMap::new();
    for t in projections.values() {
        collect_payloads(t, &arg_of, &mut payloads);
    }
    let channels: Vec<ChannelDecl> = payloads
        .iter()
        .map(|(id, labels)| ChannelDecl { id: *id, payload_labels: labels.clone() })
        .collect();

    // Role argument lists, one argument per distinct annotation in
    // first-occurrence order.
    let mut per_role_args = BTreeMap::new();
    for (role, t) in projections {
        let mut seen: BTreeSet<Ann> = BTreeSet::new();
        let mut args = Vec::new();
        collect_args(t, &arg_of, &mut seen, &mut args);
        per_role_args.insert(role.clone(), args);
    }

    Ok(ChannelPlan { ann_subst, ann_arg, channels, per_role_args })
}

fn node_labels(branches: &[crate::projection::ABranch]) -> BTreeSet<Label> {
    branches.iter().filter(|b| !b.label.is_crash()).map(|b| b.label.clone()).collect()
}

fn collect_payloads(
    t: &AnnLocalType,
    arg_of: &impl Fn(&Ann) -> u64,
    payloads: &mut BTreeMap<u64, BTreeSet<Label>>,
) {
    match t {
        AnnLocalType::Internal { ann, branches, .. }
        | AnnLocalType::External { ann, branches, .. } => {
            payloads.entry(arg_of(ann)).or_default().extend(node_labels(branches));
            for b in branches {
                collect_payloads(&b.cont, arg_of, payloads);
            }
        }
        AnnLocalType::Rec { body, .. } => collect_payloads(body, arg_of, payloads),
        AnnLocalType::Var(_) | AnnLocalType::End => {}
    }
}

fn collect_args(
    t: &AnnLocalType,
    arg_of: &impl Fn(&Ann) -> u64,
    seen: &mut BTreeSet<Ann>,
    args: &mut Vec<ChannelArg>,
) {
    match t {
        AnnLocalType::Internal { ann, branches, .. }
        | AnnLocalType::External { ann, branches, .. } => {
            if seen.insert(ann.clone()) {
                args.push(ChannelArg {
                    channel: arg_of(ann),
                    direction: if matches!(t, AnnLocalType::Internal { .. }) {
                        Direction::Out
                    } else {
                        Direction::In
                    },
                    payload_labels: node_labels(branches),
                });
            }
            for b in branches {
                collect_args(&b.cont, arg_of, seen, args);
            }
        }
        AnnLocalType::Rec { body, .. } => collect_args(body, arg_of, seen, args),
        AnnLocalType::Var(_) | AnnLocalType::End => {}
    }
}

// ---------------------------------------------------------------------------
// Skeleton IR
// ---------------------------------------------------------------------------

/// One node of a role's behaviour tree; isomorphic to the role's projection
/// with channels resolved and crash handling split out.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviourNode {
    /// Select one of the labels and send it over the channel.
    Select {
        peer: Role,
        channel: u64,
        branches: Vec<SkeletonBranch>,
    },
    /// Receive over the channel and branch on the label; the handler runs
    /// when the peer's crash is detected instead.
    Receive {
        peer: Role,
        channel: u64,
        branches: Vec<SkeletonBranch>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        crash_handler: Option<Box<BehaviourNode>>,
    },
    Loop { var: RecVar, body: Box<BehaviourNode> },
    Continue { var: RecVar },
    Finish,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkeletonBranch {
    pub label: Label,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub payload: Option<Sort>,
    pub cont: BehaviourNode,
}

/// The generated artifact: declarations, one behaviour tree per role, and
/// the entry point wiring.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkeletonIR {
    pub protocol: String,
    /// Message labels with their payload sorts.
    pub labels: BTreeMap<Label, Option<Sort>>,
    pub recursion_vars: BTreeSet<RecVar>,
    pub plan: ChannelPlan,
    pub roles: BTreeMap<Role, BehaviourNode>,
}

/// Generate per-role skeletons and channel wiring for a design-time global
/// type.
pub fn generate_skeleton(
    name: &str,
    g: &GlobalType,
    reliable: &BTreeSet<Role>,
) -> Result<SkeletonIR, CodegenError> {
    let mut roles: BTreeSet<Role> = g.active_roles();
    roles.extend(g.crashed_roles());
    let mut projections = BTreeMap::new();
    for role in &roles {
        projections.insert(role.clone(), project_annotated(g, role, reliable)?);
    }
    let plan = plan_channels(&projections)?;

    let mut labels: BTreeMap<Label, Option<Sort>> = BTreeMap::new();
    let mut recursion_vars = BTreeSet::new();
    let mut trees = BTreeMap::new();
    for (role, t) in &projections {
        trees.insert(
            role.clone(),
            behaviour(t, &plan, &mut labels, &mut recursion_vars),
        );
    }
    Ok(SkeletonIR { protocol: name.to_string(), labels, recursion_vars, plan, roles: trees })
}

fn behaviour(
    t: &AnnLocalType,
    plan: &ChannelPlan,
    labels: &mut BTreeMap<Label, Option<Sort>>,
    recursion_vars: &mut BTreeSet<RecVar>,
) -> BehaviourNode {
    match t {
        AnnLocalType::Internal { peer, ann, branches } => BehaviourNode::Select {
            peer: peer.clone(),
            channel: plan.arg_for(ann).expect("planned annotation"),
            branches: branches
                .iter()
                .map(|b| {
                    labels.insert(b.label.clone(), b.payload.clone());
                    SkeletonBranch {
                        label: b.label.clone(),
                        payload: b.payload.clone(),
                        cont: behaviour(&b.cont, plan, labels, recursion_vars),
                    }
                })
                .collect(),
        },
        AnnLocalType::External { peer, ann, branches } => {
            let mut normal = Vec::new();
            let mut crash_handler = None;
            for b in branches {
                if b.label.is_crash() {
                    crash_handler = Some(Box::new(behaviour(&b.cont, plan, labels, recursion_vars)));
                } else {
                    labels.insert(b.label.clone(), b.payload.clone());
                    normal.push(SkeletonBranch {
                        label: b.label.clone(),
                        payload: b.payload.clone(),
                        cont: behaviour(&b.cont, plan, labels, recursion_vars),
                    });
                }
            }
            BehaviourNode::Receive {
                peer: peer.clone(),
                channel: plan.arg_for(ann).expect("planned annotation"),
                branches: normal,
                crash_handler,
            }
        }
        AnnLocalType::Rec { var, body } => {
            recursion_vars.insert(var.clone());
            BehaviourNode::Loop {
                var: var.clone(),
                body: Box::new(behaviour(body, plan, labels, recursion_vars)),
            }
        }
        AnnLocalType::Var(v) => BehaviourNode::Continue { var: v.clone() },
        AnnLocalType::End => BehaviourNode::Finish,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RenderFormat {
    NeutralText,
    Json,
}

/// Deterministically render the skeleton, either as human-readable
/// pseudocode or as machine-consumable JSON (schema version 1).
pub fn render_skeleton(ir: &SkeletonIR, format: RenderFormat) -> String {
    match format {
        RenderFormat::Json => {
            let mut doc = serde_json::Map::new();
            doc.insert("schema".into(), serde_json::json!("mpst-skeleton/1"));
            doc.insert("skeleton".into(), serde_json::to_value(ir).expect("serializes"));
            serde_json::to_string_pretty(&serde_json::Value::Object(doc)).expect("renders")
        }
        RenderFormat::NeutralText => render_text(ir),
    }
}

fn render_text(ir: &SkeletonIR) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "protocol {}", ir.protocol);

    let _ = writeln!(out, "\n// (i) label and payload declarations");
    for (label, payload) in &ir.labels {
        match payload {
            Some(sort) => {
                let _ = writeln!(out, "label {label}({sort})");
            }
            None => {
                let _ = writeln!(out, "label {label}");
            }
        }
    }

    let _ = writeln!(out, "\n// (ii) recursion variable declarations");
    for var in &ir.recursion_vars {
        let _ = writeln!(out, "recvar {var}");
    }

    let _ = writeln!(out, "\n// (iii) local type declarations");
    for role in ir.roles.keys() {
        let args = &ir.plan.per_role_args[role];
        let params = args
            .iter()
            .map(|a| {
                let dir = match a.direction {
                    Direction::In => "in",
                    Direction::Out => "out",
                };
                let labels = a
                    .payload_labels
                    .iter()
                    .map(|l| l.to_string())
                    .collect::<Vec<_>>()
                    .join("|");
                format!("c{}: {dir}[{labels}]", a.channel)
            })
            .collect::<Vec<_>>()
            .join(", ");
        let _ = writeln!(out, "type {}({params})", role_type_name(role));
    }

    let _ = writeln!(out, "\n// (iv) role-implementing functions");
    for (role, tree) in &ir.roles {
        let args = &ir.plan.per_role_args[role];
        let params = args
            .iter()
            .map(|a| format!("c{}", a.channel))
            .collect::<Vec<_>>()
            .join(", ");
        let _ = writeln!(out, "fn {role}({params}) {{");
        render_node(tree, 1, &mut out);
        let _ = writeln!(out, "}}");
    }

    let _ = writeln!(out, "\n// (v) entry point");
    let _ = writeln!(out, "fn main() {{");
    for ch in &ir.plan.channels {
        let labels = ch
            .payload_labels
            .iter()
            .map(|l| l.to_string())
            .collect::<Vec<_>>()
            .join("|");
        let _ = writeln!(out, "  let c{} = channel[{labels}]()", ch.id);
    }
    let spawn = ir
        .roles
        .keys()
        .map(|role| {
            let args = ir.plan.per_role_args[role]
                .iter()
                .map(|a| format!("c{}", a.channel))
                .collect::<Vec<_>>()
                .join(", ");
            format!("{role}({args})")
        })
        .collect::<Vec<_>>()
        .join(", ");
    let _ = writeln!(out, "  par({spawn})");
    let _ = writeln!(out, "}}");
    out
}

fn role_type_name(role: &Role) -> String {
    let mut s = role.to_string();
    if let Some(first) = s.get_mut(0..1) {
        first.make_ascii_uppercase();
    }
    s
}

fn render_node(node: &BehaviourNode, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    match node {
        BehaviourNode::Select { peer, channel, branches } => {
            if branches.len() == 1 {
                let b = &branches[0];
                let _ = writeln!(out, "{pad}send c{channel} {} // to {peer}", render_msg(b));
                render_node(&b.cont, depth, out);
            } else {
                let _ = writeln!(out, "{pad}select c{channel} {{ // to {peer}");
                for b in branches {
                    let _ = writeln!(out, "{pad}  {} =>", render_msg(b));
                    render_node(&b.cont, depth + 2, out);
                }
                let _ = writeln!(out, "{pad}}}");
            }
        }
        BehaviourNode::Receive { peer, channel, branches, crash_handler } => {
            let _ = writeln!(out, "{pad}receive c{channel} {{ // from {peer}");
            for b in branches {
                let _ = writeln!(out, "{pad}  {} =>", render_msg(b));
                render_node(&b.cont, depth + 2, out);
            }
            if let Some(handler) = crash_handler {
                let _ = writeln!(out, "{pad}  on_crash =>");
                render_node(handler, depth + 2, out);
            }
            let _ = writeln!(out, "{pad}}}");
        }
        BehaviourNode::Loop { var, body } => {
            let _ = writeln!(out, "{pad}loop {var} {{");
            render_node(body, depth + 1, out);
            let _ = writeln!(out, "{pad}}}");
        }
        BehaviourNode::Continue { var } => {
            let _ = writeln!(out, "{pad}continue {var}");
        }
        BehaviourNode::Finish => {
            let _ = writeln!(out, "{pad}finish");
        }
    }
}

fn render_msg(b: &SkeletonBranch) -> String {
    match &b.payload {
        Some(sort) => format!("{}({sort})", b.label),
        None => b.label.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::global::GBranch;

    fn r(s: &str) -> Role {
        Role::new(s)
    }

    /// p->q@0{v. p->r@1:x.end, w. p->r@2:y.end}; r's merge gets {1,2}.
    fn worked_example() -> GlobalType {
        GlobalType::comm(
            "p",
            "q",
            vec![
                GBranch::new(
                    "v",
                    None,
                    GlobalType::comm("p", "r", vec![GBranch::new("x", None, GlobalType::End)]),
                ),
                GBranch::new(
                    "w",
                    None,
                    GlobalType::comm("p", "r", vec![GBranch::new("y", None, GlobalType::End)]),
                ),
            ],
        )
    }

    #[test]
    fn worked_example_channel_plan() {
        let g = worked_example();
        let reliable: BTreeSet<Role> = [r("p"), r("q"), r("r")].into_iter().collect();
        let ir = generate_skeleton("Example", &g, &reliable).unwrap();
        let plan = &ir.plan;

        // The merged annotation {1,2} maps to the fresh identifier 3.
        let merged = Ann::Set([1, 2].into_iter().collect());
        let subst: BTreeMap<&Ann, u64> =
            plan.ann_subst.iter().map(|(a, c)| (a, *c)).collect();
        assert_eq!(subst[&merged], 3);
        assert_eq!(subst[&Ann::Atom(0)], 0);

        // Two channels: c0 carrying v|w and c3 carrying x|y.
        assert_eq!(plan.channels.len(), 2);
        let ids: Vec<u64> = plan.channels.iter().map(|c| c.id).collect();
        assert_eq!(ids, vec![0, 3]);
        let c3 = plan.channels.iter().find(|c| c.id == 3).unwrap();
        assert_eq!(
            c3.payload_labels,
            [Label::new("x"), Label::new("y")].into_iter().collect()
        );

        // p(c0, c3, c3), q(c0), r(c3).
        let args =
            |role: &str| -> Vec<u64> { plan.per_role_args[&r(role)].iter().map(|a| a.channel).collect() };
        assert_eq!(args("p"), vec![0, 3, 3]);
        assert_eq!(args("q"), vec![0]);
        assert_eq!(args("r"), vec![3]);
        // Directions: c3 is `in` for exactly r, `out` for p.
        assert!(plan.per_role_args[&r("r")]
            .iter()
            .all(|a| a.direction == Direction::In));
        assert!(plan.per_role_args[&r("p")]
            .iter()
            .all(|a| a.direction == Direction::Out));
    }

    #[test]
    fn single_interaction_has_one_channel() {
        let g = GlobalType::comm("A", "B", vec![GBranch::new("hi", None, GlobalType::End)]);
        let reliable: BTreeSet<Role> = [r("A"), r("B")].into_iter().collect();
        let ir = generate_skeleton("Mini", &g, &reliable).unwrap();
        assert_eq!(ir.plan.channels.len(), 1);
    }

    #[test]
    fn rendering_is_deterministic_and_sectioned() {
        let g = worked_example();
        let reliable: BTreeSet<Role> = [r("p"), r("q"), r("r")].into_iter().collect();
        let ir = generate_skeleton("Example", &g, &reliable).unwrap();
        let a = render_skeleton(&ir, RenderFormat::NeutralText);
        let b = render_skeleton(&ir, RenderFormat::NeutralText);
        assert_eq!(a, b);
        for section in ["// (i)", "// (ii)", "// (iii)", "// (iv)", "// (v)"] {
            assert!(a.contains(section), "missing {section} in:\n{a}");
        }
        let json = render_skeleton(&ir, RenderFormat::Json);
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed["schema"], "mpst-skeleton/1");
        // Round-trips through the typed representation.
        let back: SkeletonIR = serde_json::from_value(parsed["skeleton"].clone()).unwrap();
        assert_eq!(&back, &ir);
    }

    #[test]
    fn crash_branches_become_handler_nodes() {
        // mu t0. u->l{write(String).t0, read. l->u:report(Log).t0, crash.end}
        let g = GlobalType::rec(
            "t0",
            GlobalType::comm(
                "u",
                "l",
                vec![
                    GBranch::new("write", Some(Sort::new("String")), GlobalType::var("t0")),
                    GBranch::new(
                        "read",
                        None,
                        GlobalType::comm(
                            "l",
                            "u",
                            vec![GBranch::new("report", Some(Sort::new("Log")), GlobalType::var("t0"))],
                        ),
                    ),
                    GBranch::new("crash", None, GlobalType::End),
                ],
            ),
        );
        let reliable: BTreeSet<Role> = [r("l")].into_iter().collect();
        let ir = generate_skeleton("SimpleLogger", &g, &reliable).unwrap();
        // Two channels, as in the per-protocol wiring: the choice channel
        // and the report channel.
        assert_eq!(ir.plan.channels.len(), 2);
        // l's receive node carries the crash handler.
        let BehaviourNode::Loop { body, .. } = &ir.roles[&r("l")] else {
            panic!("expected loop");
        };
        let BehaviourNode::Receive { crash_handler, branches, .. } = &**body else {
            panic!("expected receive");
        };
        assert!(crash_handler.is_some());
        assert_eq!(branches.len(), 2);
        // u's behaviour tree erases back to its unannotated projection.
        let erased = ir_to_local(&ir.roles[&r("u")]);
        let plain = crate::projection::project(&g, &r("u"), &reliable).unwrap();
        assert!(crate::local::equirec_equal(&erased, &plain));
    }

    /// Reconstruct a local type from a behaviour tree (test helper for the
    /// erasure property).
    fn ir_to_local(node: &BehaviourNode) -> crate::local::LocalType {
        use crate::local::{LBranch, LocalType};
        match node {
            BehaviourNode::Select { peer, branches, .. } => LocalType::Internal {
                peer: peer.clone(),
                branches: branches
                    .iter()
                    .map(|b| LBranch::new(b.label.clone(), b.payload.clone(), ir_to_local(&b.cont)))
                    .collect(),
            },
            BehaviourNode::Receive { peer, branches, crash_handler, .. } => {
                let mut out: Vec<LBranch> = branches
                    .iter()
                    .map(|b| LBranch::new(b.label.clone(), b.payload.clone(), ir_to_local(&b.cont)))
                    .collect();
                if let Some(handler) = crash_handler {
                    out.push(LBranch::new("crash", None, ir_to_local(handler)));
                }
                LocalType::External { peer: peer.clone(), branches: out }
            }
            BehaviourNode::Loop { var, body } => {
                LocalType::Rec { var: var.clone(), body: Box::new(ir_to_local(body)) }
            }
            BehaviourNode::Continue { var } => LocalType::Var(var.clone()),
            BehaviourNode::Finish => LocalType::End,
        }
    }
}
