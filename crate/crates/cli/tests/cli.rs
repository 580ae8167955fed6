//! Exit codes, output layout and auditability of the command-line verbs.

use std::fs;
use std::path::Path;

use insertion_cli::{run, EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME};

const SWEEP_CONFIG: &str = r#"
scenes = ["cylinder_easy"]
variants = ["pf_only", "full"]
noise_levels = [0.0, 2.0]
trials = 5
seeds = [4, 9]

[train.pf]
w_rot = 0.5

[train.policy]
trunk = [8]
recurrent = [8]
critic = [8]

[train.ppo]
epochs = 1
minibatch = 64
num_envs = 2
rollout_steps = 32
segment_len = 16
total_steps = 128

[train.curriculum]
window = 4
"#;

fn cli(args: &[&str]) -> u8 {
    run(std::iter::once("insertion").chain(args.iter().copied()))
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn unknown_verb_is_a_config_error() {
    assert_eq!(cli(&["frobnicate"]), EXIT_CONFIG);
    assert_eq!(cli(&[]), EXIT_CONFIG);
    assert_eq!(cli(&["eval", "--no-such-flag"]), EXIT_CONFIG);
}

#[test]
fn learned_eval_needs_a_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(cli(&["eval", "--variant", "full", "--out", path(&out)]), EXIT_CONFIG);
    assert!(!out.exists());
}

#[test]
fn config_problems_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.toml");
    assert_eq!(cli(&["eval", "--config", path(&missing)]), EXIT_CONFIG);
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "trials = 0\n").unwrap();
    assert_eq!(cli(&["eval", "--config", path(&bad)]), EXIT_CONFIG);
    fs::write(&bad, "scenes = [\"no_such_scene\"]\n").unwrap();
    assert_eq!(cli(&["eval", "--config", path(&bad)]), EXIT_CONFIG);
    fs::write(&bad, "unknown_key = 3\n").unwrap();
    assert_eq!(cli(&["eval", "--config", path(&bad)]), EXIT_CONFIG);
    assert_eq!(cli(&["eval", "--variant", "nonsense"]), EXIT_CONFIG);
    let ckpt = tmp.path().join("garbage.ckpt");
    fs::write(&ckpt, b"not a checkpoint").unwrap();
    let out = tmp.path().join("out");
    assert_eq!(
        cli(&["eval", "--variant", "full", "--checkpoint", path(&ckpt), "--out", path(&out)]),
        EXIT_CONFIG
    );
}

#[test]
fn unwritable_output_is_a_runtime_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("occupied");
    fs::write(&file, "").unwrap();
    let config = tmp.path().join("c.toml");
    fs::write(&config, "trials = 2\nnoise_levels = [0.0]\n").unwrap();
    let out = file.join("sub");
    assert_eq!(cli(&["eval", "--config", path(&config), "--out", path(&out)]), EXIT_RUNTIME);
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(Result::unwrap).collect()
}

#[test]
fn sweep_writes_a_manifest_per_cell_and_every_number_is_traceable() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("sweep.toml");
    fs::write(&config, SWEEP_CONFIG).unwrap();
    let out = tmp.path().join("sweep");
    assert_eq!(cli(&["sweep", "--config", path(&config), "--out", path(&out)]), EXIT_OK);

    // One directory with a manifest per scene × variant × noise cell.
    let mut cells: Vec<String> = fs::read_dir(out.join("cells"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    cells.sort();
    assert_eq!(
        cells,
        [
            "cylinder_easy__full__n0",
            "cylinder_easy__full__n2",
            "cylinder_easy__pf_only__n0",
            "cylinder_easy__pf_only__n2",
        ]
    );
    for c in &cells {
        let m: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("cells").join(c).join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m["verb"], "sweep");
        assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    }
    for seed in [4, 9] {
        let train = out.join("train").join(format!("cylinder_easy__full__s{seed}"));
        assert!(train.join("policy.ckpt").is_file() && train.join("manifest.json").is_file());
    }
    assert!(out.join("manifest.json").is_file() && out.join("table.txt").is_file());

    // Re-derive every results.csv row from the per-episode records.
    let results = csv_rows(&out.join("results.csv"));
    assert_eq!(results.len(), 4);
    for row in &results {
        let key = format!("{}__{}__n{}", &row[0], &row[1], row[2].parse::<f64>().unwrap());
        let episodes = csv_rows(&out.join("cells").join(&key).join("episodes.csv"));
        assert_eq!(episodes.len(), 10);
        let rates: Vec<f64> = [4, 9]
            .iter()
            .map(|s| {
                let mine: Vec<_> = episodes.iter().filter(|e| e[3].parse::<u64>().unwrap() == *s).collect();
                mine.iter().filter(|e| &e[6] == "1").count() as f64 / mine.len() as f64
            })
            .collect();
        let mean = (rates[0] + rates[1]) / 2.0;
        let std = (((rates[0] - mean).powi(2) + (rates[1] - mean).powi(2)) / (2.0 - 1.0)).sqrt();
        let successes = episodes.iter().filter(|e| &e[6] == "1").count();
        assert_eq!(row[3].parse::<usize>().unwrap(), successes, "{key}");
        assert_eq!(row[5].parse::<f64>().unwrap(), mean, "{key}");
        assert_eq!(row[6].parse::<f64>().unwrap(), std, "{key}");
    }

    // Any single episode replays to the recorded outcome with a full trace.
    let episodes = csv_rows(&out.join("cells/cylinder_easy__full__n2/episodes.csv"));
    let ep = &episodes[7];
    let (seed, index) = (&ep[3], &ep[4]);
    let ckpt = out.join(format!("train/cylinder_easy__full__s{seed}/policy.ckpt"));
    let replay = tmp.path().join("replay");
    let code = cli(&[
        "replay",
        "--config",
        path(&config),
        "--variant",
        "full",
        "--checkpoint",
        path(&ckpt),
        "--seed",
        seed,
        "--noise",
        "2",
        "--episode",
        index,
        "--out",
        path(&replay),
    ]);
    assert_eq!(code, EXIT_OK);
    let trace = csv_rows(&replay.join("trace.csv"));
    assert_eq!(trace.len(), ep[7].parse::<usize>().unwrap() + 1);
    let reward_col = trace[0].len() - 3;
    let ret: f64 = trace[1..].iter().map(|r| r[reward_col].parse::<f64>().unwrap()).sum();
    assert_eq!(ret, ep[9].parse::<f64>().unwrap());
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(replay.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["details"]["success"].as_bool().unwrap(), &ep[6] == "1");
    assert_eq!(m["details"]["episode_seed"].to_string(), ep[5].to_string());
}

#[test]
fn field_dump_writes_one_csv_per_scene() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("f.toml");
    fs::write(&config, "scenes = [\"cylinder_easy\", \"box_12\"]\n[grid]\nny = 3\nnz = 4\n").unwrap();
    let out = tmp.path().join("field");
    assert_eq!(cli(&["field-dump", "--config", path(&config), "--out", path(&out)]), EXIT_OK);
    for scene in ["cylinder_easy", "box_12"] {
        assert_eq!(csv_rows(&out.join(format!("field_{scene}.csv"))).len(), 12);
    }
    assert!(out.join("manifest.json").is_file());
}
