use cse_core::harness::FixtureSet;
use std::path::Path;

fn assert_shipped(set: &FixtureSet) {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    for (name, contents) in set.files() {
        let shipped = std::fs::read_to_string(dir.join(&name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(shipped == contents, "{name} differs from a fresh generation");
    }
}

#[test]
fn desk_fixtures_regenerate_identically() {
    assert_shipped(&FixtureSet::desk().unwrap());
}

#[test]
fn large_fixtures_regenerate_identically() {
    assert_shipped(&FixtureSet::large().unwrap());
}
