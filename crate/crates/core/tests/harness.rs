use banditbias::harness::{self, parse_plotdata, ExperimentConfig};
use banditbias::policies::StopperSpec;
use banditbias::Error;

fn small(name: &str, reps: usize) -> ExperimentConfig {
    let mut c = harness::scenario(name).unwrap();
    c.n_reps = reps;
    c
}

#[test]
fn printed_config_reproduces_the_run() {
    let c = small("thm-bregman-stopping", 300);
    let text = c.to_toml_string().unwrap();
    let back = ExperimentConfig::from_toml_str(&text).unwrap();
    let a = harness::run(&c).unwrap();
    let b = harness::run(&back).unwrap();
    assert_eq!(a.config_hash, b.config_hash);
    assert_eq!(a.content_hash, b.content_hash);
}

#[test]
fn persisted_report_carries_both_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small("thm-fully-adaptive", 300);
    c.output = Some(dir.path().to_path_buf());
    let r = harness::run(&c).unwrap();

    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("thm-fully-adaptive.json")).unwrap()).unwrap();
    assert_eq!(json["config_hash"], r.config_hash.as_str());
    assert_eq!(json["content_hash"], r.content_hash.as_str());
    let txt = std::fs::read_to_string(dir.path().join("thm-fully-adaptive.txt")).unwrap();
    assert!(txt.contains(&r.config_hash) && txt.contains(&r.content_hash));

    for check in r.checks.iter().filter(|c| !c.table.is_empty()) {
        let path = dir.path().join(format!("{}.csv", harness::plot::file_stem(&check.name)));
        let rows = parse_plotdata(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(rows.len(), check.table.len());
    }
}

#[test]
fn wall_time_does_not_enter_the_content_hash() {
    let c = small("prop-minimax", 200);
    let a = harness::run(&c).unwrap();
    let b = harness::run(&c).unwrap();
    assert_eq!(a.content_hash, b.content_hash);
}

#[test]
fn validation_errors_name_the_offending_field() {
    let mut c = small("lil-sandwich", 200);
    c.variants[2].label = c.variants[0].label.clone();
    match c.resolve() {
        Err(Error::Config { path, message }) => {
            assert_eq!(path, "variants[2].label");
            assert!(message.contains("duplicate"));
        }
        other => panic!("expected a config error, got {other:?}"),
    }

    let mut c = small("brownian-bias", 200);
    c.stopper = StopperSpec::Lil { arm: 0, b: 2, mean: None, sd: None };
    assert!(matches!(c.resolve(), Err(Error::Config { .. })));

    let text = "name = \"x\"\nn_reps = 100\nroot_seed = 1\nt_max = 10\nbogus = 3\n";
    match ExperimentConfig::from_toml_str(text) {
        Err(Error::Config { path, .. }) => assert!(path.starts_with("line "), "{path}"),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn out_of_range_rule_is_rejected_before_simulation() {
    let mut c = small("prop-minimax", 200);
    c.chooser = banditbias::policies::ChooserSpec::Fixed { arm: 5 };
    match harness::run(&c) {
        Err(Error::Config { path, .. }) => assert_eq!(path, "chooser"),
        other => panic!("expected a config error, got {other:?}"),
    }
}
