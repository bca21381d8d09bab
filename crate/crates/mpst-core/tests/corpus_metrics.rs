//! Per-variant checks: published metrics reproduce exactly and every
//! declared role has a projection.

use mpst_core::corpus::{load_variant, load_variant_type, measure, variant_ids, variant_meta};
use mpst_core::projection::project;

#[test]
fn metrics_match_published_rows() {
    let mut failures = Vec::new();
    for id in variant_ids() {
        let meta = variant_meta(id).unwrap();
        let (_, expected) = load_variant(id).unwrap();
        let got = measure(id).unwrap();
        let actual = (got.comms, got.crash_branches, got.max_cont_len);
        let wanted = (expected.comms, expected.crash_branches, expected.max_cont_len);
        if actual != wanted {
            failures.push(format!(
                "({id}) {}: expected {:?}, measured {:?}",
                meta.name, wanted, actual
            ));
        }
    }
    assert!(failures.is_empty(), "\n{}", failures.join("\n"));
}

#[test]
fn every_variant_projects_on_all_roles() {
    let mut failures = Vec::new();
    for id in variant_ids() {
        let (_, g, roles, reliable) = load_variant_type(id).unwrap();
        for role in &roles {
            if let Err(e) = project(&g, role, &reliable) {
                failures.push(format!("({id}) onto {role}: {e}"));
            }
        }
    }
    assert!(failures.is_empty(), "\n{}", failures.join("\n"));
}
