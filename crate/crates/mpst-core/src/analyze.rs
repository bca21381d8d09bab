//! Protocol metrics: communication count, crash branch count, and the
//! length of the longest continuation.

use serde::{Deserialize, Serialize};

use crate::global::GlobalType;
use crate::parser::ProtocolDecl;

/// Size and shape indicators of a protocol.
///
/// A communication is a branch of a transmission whose label is not
/// `crash`; each `crash`-labelled branch counts as a crash handling branch
/// instead. The longest continuation is measured on the global type as the
/// maximum number of nodes on a root-to-leaf path, counting each
/// transmission prefix, each recursion binder, and the closing leaf
/// (`end` or a recursion variable) once.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    pub protocol: String,
    pub roles: Vec<String>,
    pub reliable: Vec<String>,
    pub comms: u32,
    pub crash_branches: u32,
    pub max_cont_len: u32,
}

pub fn analyze(decl: &ProtocolDecl, g: &GlobalType) -> Metrics {
    let (comms, crash_branches) = count_branches(g);
    Metrics {
        protocol: decl.name.clone(),
        roles: decl.roles.iter().map(|r| r.name.to_string()).collect(),
        reliable: decl
            .roles
            .iter()
            .filter(|r| r.reliable)
            .map(|r| r.name.to_string())
            .collect(),
        comms,
        crash_branches,
        max_cont_len: max_cont_len(g),
    }
}

fn count_branches(g: &GlobalType) -> (u32, u32) {
    match g {
        GlobalType::Comm { branches, .. } | GlobalType::Transit { branches, .. } => {
            let mut comms = 0;
            let mut crashes = 0;
            for b in branches {
                if b.label.is_crash() {
                    crashes += 1;
                } else {
                    comms += 1;
                }
                let (c, x) = count_branches(&b.cont);
                comms += c;
                crashes += x;
            }
            (comms, crashes)
        }
        GlobalType::Rec { body, .. } => count_branches(body),
        GlobalType::Var(_) | GlobalType::End => (0, 0),
    }
}

fn max_cont_len(g: &GlobalType) -> u32 {
    match g {
        GlobalType::Comm { branches, .. } | GlobalType::Transit { branches, .. } => {
            1 + branches.iter().map(|b| max_cont_len(&b.cont)).max().unwrap_or(0)
        }
        GlobalType::Rec { body, .. } => 1 + max_cont_len(body),
        // `continue` is a leaf: recursion is not unfolded.
        GlobalType::Var(_) | GlobalType::End => 1,
    }
}
