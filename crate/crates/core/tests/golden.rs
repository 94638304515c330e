use std::fs;
use std::path::Path;

use airground::cli::cmd_run;

/// Runs the checked-in scenario and compares every artifact byte for byte.
/// Set `UPDATE_GOLDEN=1` to rewrite the expected files after an intended
/// format or behaviour change.
#[test]
fn artifacts_match_golden_files() {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let out = tempfile::tempdir().unwrap();
    cmd_run(&golden.join("scenario.json"), None, out.path()).unwrap();
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for name in ["events.csv", "samples.csv", "summary.json"] {
        let got = fs::read_to_string(out.path().join(name)).unwrap();
        let path = golden.join("expected").join(name);
        if update {
            fs::write(&path, &got).unwrap();
            continue;
        }
        let want = fs::read_to_string(&path).unwrap();
        if got != want {
            let line = got.lines().zip(want.lines()).position(|(a, b)| a != b);
            panic!("{name} differs from the golden file (first differing line {line:?})");
        }
    }
}

#[test]
fn csv_headers_are_stable() {
    let expected = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/expected");
    let first = |name: &str| {
        fs::read_to_string(expected.join(name))
            .unwrap()
            .lines()
            .next()
            .unwrap()
            .to_string()
    };
    assert_eq!(first("events.csv"), "time,kind,data");
    assert_eq!(first("samples.csv"), "time,node,x,y");
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(expected.join("summary.json")).unwrap()).unwrap();
    for key in [
        "name",
        "seed",
        "world_hash",
        "end_time",
        "goals_total",
        "goals_known",
        "goals_visited",
        "completion_time",
        "time_to_goal",
        "mean_time_to_goal",
        "robots",
        "navigating_fraction",
        "stuck_robots",
        "claim_conflicts",
        "delivery_latency",
        "messages_created",
        "sync_sessions",
        "relay_phases",
    ] {
        assert!(summary.get(key).is_some(), "summary lacks {key}");
    }
}
