//! The bundled corpus: nineteen protocol variants across seven example
//! families, with their published size metrics.
//!
//! The `.scr` sources live in `protocols/` at the repository root together
//! with `manifest.json`; they are embedded here so the library and the test
//! suites work without touching the filesystem. Variants whose full text is
//! published only in part are reconstructed to match the published metrics
//! exactly and flagged `reconstructed` in the manifest.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::analyze::Metrics;
use crate::ident::Role;
use crate::parser::{parse_protocol, to_global_type, ProtocolDecl};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedMetrics {
    pub comms: u32,
    pub crash_branches: u32,
    pub max_cont_len: u32,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VariantMeta {
    pub id: String,
    pub name: String,
    pub file: String,
    pub roles: Vec<String>,
    pub reliable: Vec<String>,
    pub expected: ExpectedMetrics,
    pub provenance: String,
}

#[derive(Clone, Debug, Deserialize)]
struct Manifest {
    variants: Vec<VariantMeta>,
}

macro_rules! corpus_files {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../../../protocols/", $name)))),*]
    };
}

static SOURCES: &[(&str, &str)] = corpus_files![
    "pingpong_a.scr",
    "pingpong_b.scr",
    "adder_c.scr",
    "adder_d.scr",
    "twobuyer_e.scr",
    "twobuyer_f.scr",
    "oauth_g.scr",
    "oauth_h.scr",
    "oauth_i.scr",
    "oauth_j.scr",
    "travelagency_k.scr",
    "travelagency_l.scr",
    "travelagency_m.scr",
    "distlogger_n.scr",
    "distlogger_o.scr",
    "distlogger_p.scr",
    "circbreaker_q.scr",
    "circbreaker_r.scr",
    "circbreaker_s.scr",
];

static MANIFEST_JSON: &str = include_str!("../../../protocols/manifest.json");

fn manifest() -> &'static [VariantMeta] {
    static PARSED: OnceLock<Vec<VariantMeta>> = OnceLock::new();
    PARSED.get_or_init(|| {
        let m: Manifest = serde_json::from_str(MANIFEST_JSON).expect("manifest parses");
        m.variants
    })
}

#[derive(Clone, Debug, thiserror::Error, PartialEq, Eq)]
#[error("unknown corpus variant {0:?} (expected a letter a..s)")]
pub struct UnknownVariant(pub String);

/// All variant identifiers, in order.
pub fn variant_ids() -> Vec<char> {
    manifest().iter().map(|v| v.id.chars().next().expect("nonempty id")).collect()
}

pub fn variant_meta(id: char) -> Result<&'static VariantMeta, UnknownVariant> {
    manifest()
        .iter()
        .find(|v| v.id == id.to_string())
        .ok_or_else(|| UnknownVariant(id.to_string()))
}

/// The raw protocol source of a variant.
pub fn variant_source(id: char) -> Result<&'static str, UnknownVariant> {
    let meta = variant_meta(id)?;
    SOURCES
        .iter()
        .find(|(name, _)| *name == meta.file)
        .map(|(_, src)| *src)
        .ok_or_else(|| UnknownVariant(id.to_string()))
}

/// Parse a corpus variant: its protocol declaration plus the published
/// metrics row.
pub fn load_variant(id: char) -> Result<(ProtocolDecl, &'static ExpectedMetrics), UnknownVariant> {
    let meta = variant_meta(id)?;
    let src = variant_source(id)?;
    let decl = parse_protocol(src).unwrap_or_else(|e| panic!("corpus variant {id} must parse: {e}"));
    Ok((decl, &meta.expected))
}

/// Convenience: parsed declaration, global type, role set, and reliable set.
pub fn load_variant_type(
    id: char,
) -> Result<(ProtocolDecl, crate::global::GlobalType, BTreeSet<Role>, BTreeSet<Role>), UnknownVariant> {
    let (decl, _) = load_variant(id)?;
    let (g, reliable) = to_global_type(&decl)
        .unwrap_or_else(|e| panic!("corpus variant {id} must convert: {e}"));
    let roles = decl.role_set();
    Ok((decl, g, roles, reliable))
}

/// The measured metrics of a variant.
pub fn measure(id: char) -> Result<Metrics, UnknownVariant> {
    let (decl, _) = load_variant(id)?;
    let (g, _) = to_global_type(&decl)
        .unwrap_or_else(|e| panic!("corpus variant {id} must convert: {e}"));
    Ok(crate::analyze::analyze(&decl, &g))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_variant_is_an_error() {
        assert!(load_variant('z').is_err());
    }

    #[test]
    fn nineteen_variants() {
        let ids = variant_ids();
        assert_eq!(ids.len(), 19);
        assert_eq!(ids.first(), Some(&'a'));
        assert_eq!(ids.last(), Some(&'s'));
    }

    #[test]
    fn every_variant_parses_and_converts() {
        for id in variant_ids() {
            let (_, g, _, reliable) = load_variant_type(id).unwrap();
            assert!(g.is_design_time(), "variant {id}");
            assert!(g.is_contractive(), "variant {id}");
            let declared: BTreeSet<Role> = load_variant(id).unwrap().0.role_set();
            assert!(reliable.is_subset(&declared), "variant {id}");
        }
    }
}
