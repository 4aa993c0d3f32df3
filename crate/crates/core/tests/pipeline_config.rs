mod common;

use bitext_core::PipelineConfig;
use common::fixture_dir;

fn fixture_config() -> PipelineConfig {
    PipelineConfig::load(fixture_dir().join("pipeline.toml")).unwrap()
}

#[test]
fn fixture_config_is_valid() {
    let entries = fixture_config().validate().unwrap();
    assert_eq!(entries.len(), 5);
}

#[test]
fn unknown_ensemble_member_is_rejected() {
    let mut cfg = fixture_config();
    cfg.ensemble.members.push("vecalign".into());
    let err = cfg.validate().unwrap_err();
    assert!(err.is_validation(), "{err}");
    assert!(err.to_string().contains("vecalign"), "{err}");
}

#[test]
fn missing_manifest_is_rejected() {
    let mut cfg = fixture_config();
    cfg.manifest = fixture_dir().join("no-such-manifest.tsv");
    assert!(cfg.validate().unwrap_err().is_validation());
}

#[test]
fn hash_tracks_config_content() {
    let a = fixture_config();
    let mut b = fixture_config();
    assert_eq!(a.hash(), b.hash());
    b.seed += 1;
    assert_ne!(a.hash(), b.hash());
}
