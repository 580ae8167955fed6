//! Acceptance suite. Prints one `ACn PASS|FAIL` line per criterion and exits
//! non-zero when any criterion fails.
//!
//! AC3 evaluates the policies trained by
//! `insertion sweep --config configs/easy_full.toml --out artifacts/easy_full`;
//! set `INSERTION_AC3_DIR` to check a different sweep directory.

use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use insertion_core::env::InsertionEnv;
use insertion_core::experiment::{
    run_episode, run_eval, scene_by_name, CellSpec, Controller, EvalSettings, ExperimentConfig, EASY_SCENE,
};
use insertion_core::geometry::{closest_pair, medial_anchor_path, Pose, Primitive, Scene, SocketModel};
use insertion_core::policy::{
    gradient, log_prob, nn, HeadKind, HiddenState, Layout, Objective, Policy, PolicyArch, PpoCoeffs, PpoLoss,
    SequenceBatch, ACTOR_INPUT_DIM, CRITIC_INPUT_DIM,
};
use insertion_core::train::{compute_gae, CurriculumConfig, CurriculumState, Variant};
use nalgebra::{Vector2, Vector3};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Check = Result<String, String>;

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn easy_config() -> ExperimentConfig {
    let text = fs::read_to_string(workspace_root().join("configs/easy_full.toml")).expect("configs/easy_full.toml");
    ExperimentConfig::from_toml(&text).expect("valid config")
}

fn easy_scene() -> (Scene, EvalSettings) {
    let cfg = easy_config();
    let spec = scene_by_name(EASY_SCENE).unwrap();
    let settings = EvalSettings {
        workers: 1,
        ..cfg.eval_settings(&spec)
    };
    (Scene::new(spec).unwrap(), settings)
}

fn pf_rate(scene: &Scene, settings: &EvalSettings, noise: f64) -> f64 {
    let cell = CellSpec {
        scene: scene.spec.name.clone(),
        variant: Variant::PfOnly,
        noise,
        trials: 200,
        seeds: vec![0],
    };
    run_eval(scene, settings, &cell, &[]).unwrap().stats.mean_rate
}

fn ac1(scene: &Scene, settings: &EvalSettings) -> (Check, f64) {
    let t = Instant::now();
    let rate = pf_rate(scene, settings, 0.0);
    let secs = t.elapsed().as_secs_f64();
    let msg = format!("pf_only Easy 0 mm/0°: {:.2}% over 200 episodes in {secs:.1} s", 100.0 * rate);
    let check = if rate >= 0.95 && secs <= 120.0 { Ok(msg) } else { Err(msg) };
    (check, rate)
}

fn ac2(scene: &Scene, settings: &EvalSettings, clean: f64) -> Check {
    let noisy = pf_rate(scene, settings, 5.0);
    let drop = 100.0 * (clean - noisy);
    let msg = format!(
        "pf_only Easy 5 mm/5°: {:.2}% vs {:.2}% at 0 noise, drop {drop:.2} points",
        100.0 * noisy,
        100.0 * clean
    );
    if drop >= 35.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn ac3() -> Check {
    let dir = std::env::var_os("INSERTION_AC3_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| workspace_root().join("artifacts/easy_full"));
    let text = fs::read_to_string(dir.join("config.toml")).map_err(|e| format!("{}: {e}", dir.display()))?;
    let cfg = ExperimentConfig::from_toml(&text).map_err(|e| e.to_string())?;
    let spec = scene_by_name(EASY_SCENE).unwrap();
    let scene = Scene::new(spec.clone()).unwrap();
    let seeds = [0u64, 1, 2];
    let mut policies = Vec::new();
    let mut notes = Vec::new();
    for seed in seeds {
        let run = dir.join("train").join(format!("{EASY_SCENE}__full__s{seed}"));
        let manifest: serde_json::Value = serde_json::from_str(
            &fs::read_to_string(run.join("manifest.json")).map_err(|e| format!("{}: {e}", run.display()))?,
        )
        .map_err(|e| e.to_string())?;
        let d = &manifest["details"];
        let steps = d["env_steps"].as_u64().ok_or("manifest lacks env_steps")?;
        let secs = d["wall_seconds"].as_f64().ok_or("manifest lacks wall_seconds")?;
        let policy = insertion_core::experiment::load_policy_for(&run.join("policy.ckpt"), Variant::Full)
            .map_err(|e| e.to_string())?;
        if steps > 2_000_000 || secs > 3600.0 {
            return Err(format!("seed {seed}: {steps} steps, {secs:.0} s exceeds the budget"));
        }
        notes.push(format!(
            "s{seed} {}k steps {:.1} min {}",
            steps / 1000,
            secs / 60.0,
            if policy.arch().is_recurrent() { "lstm" } else { "ff" }
        ));
        policies.push(policy);
    }
    let settings = EvalSettings {
        workers: 1,
        ..cfg.eval_settings(&spec)
    };
    let cell = CellSpec {
        scene: spec.name.clone(),
        variant: Variant::Full,
        noise: 5.0,
        trials: 200,
        seeds: seeds.to_vec(),
    };
    let refs: Vec<&Policy> = policies.iter().collect();
    let stats = run_eval(&scene, &settings, &cell, &refs).map_err(|e| e.to_string())?.stats;
    let msg = format!(
        "full Easy 5 mm/5°: {:.2}±{:.2}% over 3 seeds × 200 ({})",
        100.0 * stats.mean_rate,
        100.0 * stats.std_rate,
        notes.join(", ")
    );
    if stats.mean_rate >= 0.85 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Independent curriculum: integer level counter, a plain vector window.
struct CurriculumOracle {
    level: i64,
    max_level: i64,
    window: Vec<bool>,
}

impl CurriculumOracle {
    fn record(&mut self, success: bool) {
        self.window.push(success);
        if self.window.len() > 100 {
            self.window.remove(0);
        }
        if self.window.len() < 100 {
            return;
        }
        let wins = self.window.iter().filter(|s| **s).count();
        let next = if wins > 75 {
            (self.level + 1).min(self.max_level)
        } else if wins < 50 {
            (self.level - 1).max(0)
        } else {
            self.level
        };
        if next != self.level {
            self.level = next;
            self.window.clear();
        }
    }
}

fn ac4() -> Check {
    let cfg = CurriculumConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut records = 0;
    let (mut hit_zero, mut hit_max) = (false, false);
    // Phases: success probability per episode, long enough to reach both clamps.
    let phases = [(0.0, 3_000), (0.97, 8_000), (1.0, 4_000), (0.62, 3_000), (0.1, 9_000), (0.85, 5_000)];
    for start_level in [0i64, 17, 50] {
        let mut state = CurriculumState::new(&cfg, start_level as f64 / 10.0);
        let mut oracle = CurriculumOracle {
            level: start_level,
            max_level: 50,
            window: Vec::new(),
        };
        for &(p, len) in &phases {
            for _ in 0..len {
                let s = rng.random_bool(p);
                state.record(s);
                oracle.record(s);
                records += 1;
                let n = oracle.level as f64 / 10.0;
                if (state.n - n).abs() > 1e-12 || (state.beta() - n / 5.0).abs() > 1e-12 {
                    return Err(format!("record {records}: n {} β {} vs oracle n {n}", state.n, state.beta()));
                }
                if (oracle.level == 0 || oracle.level == 50) && state.n != n {
                    return Err(format!("record {records}: clamp gives n {} instead of {n}", state.n));
                }
                if state.beta() != state.n / state.n_max || !(0.0..=1.0).contains(&state.beta()) {
                    return Err(format!("β {} is not n/n_max for n {}", state.beta(), state.n));
                }
                let expected: VecDeque<bool> = oracle.window.iter().copied().collect();
                if state.window != expected {
                    return Err(format!("record {records}: window diverged"));
                }
                hit_zero |= oracle.level == 0 && p == 0.0;
                hit_max |= oracle.level == 50 && p == 1.0;
            }
        }
    }
    if !(hit_zero && hit_max) {
        return Err("trace never reached both clamps".into());
    }
    Ok(format!("{records} recorded outcomes match the oracle, clamped at 0 and n_max, β = n/n_max"))
}

/// `A_t = Σ_l (γλ)^l δ_{t+l}` summed directly, cut after the first terminal.
fn gae_oracle(r: &[f64], v: &[f64], d: &[bool], boot: f64, g: f64, lam: f64) -> Vec<f64> {
    let n = r.len();
    let delta = |t: usize| {
        let next = if d[t] {
            0.0
        } else if t + 1 < n {
            v[t + 1]
        } else {
            boot
        };
        r[t] + g * next - v[t]
    };
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            for l in 0..n - t {
                sum += (g * lam).powi(l as i32) * delta(t + l);
                if d[t + l] {
                    break;
                }
            }
            sum
        })
        .collect()
}

fn ac5() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=64);
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let d: Vec<bool> = (0..n).map(|_| rng.random_bool(0.1)).collect();
        let boot = rng.random_range(-2.0..2.0);
        let g = rng.random_range(0.9..=1.0);
        let lam = rng.random_range(0.8..=1.0);
        let (adv, ret) = compute_gae(&r, &v, &d, boot, g, lam);
        let want = gae_oracle(&r, &v, &d, boot, g, lam);
        for t in 0..n {
            worst = worst.max((adv[t] - want[t]).abs());
            worst = worst.max((ret[t] - (want[t] + v[t])).abs());
        }
    }
    let msg = format!("1000 random sequences, max deviation {worst:.2e}");
    if worst <= 1e-10 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn normal_matrix(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| scale * rng.sample::<f64, _>(StandardNormal))
}

/// A 5-step × 3-segment batch with nonzero initial hidden state and one
/// mid-segment episode start.
fn fd_batch(layout: &Layout, params: &[f64], rng: &mut ChaCha8Rng) -> SequenceBatch {
    let (steps, batch) = (5, 3);
    let rows = steps * batch;
    let mut h0 = HiddenState::zeros(&layout.arch, batch);
    for a in h0.h.iter_mut().chain(h0.c.iter_mut()) {
        a.mapv_inplace(|_| 0.5 * rng.sample::<f64, _>(StandardNormal));
    }
    let mut starts = vec![false; rows];
    starts[3 * batch + 2] = true;
    let actor_x = normal_matrix(rows, ACTOR_INPUT_DIM, 0.7, rng);
    let actions = normal_matrix(rows, layout.arch.action_dim(), 0.8, rng);
    let tape = nn::actor_sequence(layout, params, actor_x.view(), &starts, &h0, steps);
    let ls = nn::log_std(layout, params);
    // Old log-probs near the current ones, with a few pushed past the clip range.
    let old_logp = (0..rows)
        .map(|r| {
            let lp = log_prob(actions.row(r).as_slice().unwrap(), tape.mean.row(r).as_slice().unwrap(), ls);
            lp + if r % 4 == 0 { 0.6 } else { rng.random_range(-0.1..0.1) }
        })
        .collect();
    SequenceBatch {
        steps,
        batch,
        actor_x,
        critic_x: normal_matrix(rows, CRITIC_INPUT_DIM, 0.7, rng),
        starts,
        h0,
        actions,
        old_logp,
        advantages: (0..rows).map(|_| rng.sample(StandardNormal)).collect(),
        returns: (0..rows).map(|_| rng.sample(StandardNormal)).collect(),
    }
}

fn ac6() -> Check {
    let coeffs = PpoCoeffs {
        clip: 0.2,
        value: 2.0,
        entropy: 0.01,
    };
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for head in [HeadKind::Residual, HeadKind::Weights, HeadKind::ResidualWithScale] {
        let arch = PolicyArch {
            trunk: vec![7, 6],
            recurrent: vec![5, 4],
            head,
            critic: vec![6, 5],
            init_log_std: 0.6f64.ln(),
        };
        let layout = Layout::new(&arch);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let params: Vec<f64> = (0..layout.len).map(|_| 0.4 * rng.sample::<f64, _>(StandardNormal)).collect();
        let batch = fd_batch(&layout, &params, &mut rng);
        let loss = PpoLoss {
            layout: &layout,
            batch: &batch,
            coeffs,
        };
        let (_, g) = gradient(&loss, &params).map_err(|e| e.to_string())?;
        let h = 1e-5;
        let mut p = params.clone();
        for i in 0..params.len() {
            p[i] = params[i] + h;
            let up = loss.loss(&p);
            p[i] = params[i] - h;
            let down = loss.loss(&p);
            p[i] = params[i];
            let fd = (up - down) / (2.0 * h);
            worst = worst.max((g[i] - fd).abs() / g[i].abs().max(fd.abs()).max(1e-6));
        }
        checked += params.len();
    }
    let msg = format!("{checked} parameters over 3 recurrent heads, max relative error {worst:.2e}");
    if worst < 1e-4 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Area-weighted points on a closed cylinder of `radius` from z = 0 to `height`.
fn dense_cylinder(radius: f64, height: f64, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vector3<f64>> {
    let side = 2.0 * std::f64::consts::PI * radius * height;
    let cap = std::f64::consts::PI * radius * radius;
    (0..count)
        .map(|_| {
            let u = rng.random_range(0.0..side + 2.0 * cap);
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            if u < side {
                Vector3::new(radius * a.cos(), radius * a.sin(), rng.random_range(0.0..=height))
            } else {
                let r = radius * rng.random_range(0.0f64..=1.0).sqrt();
                let z = if u < side + cap { 0.0 } else { height };
                Vector3::new(r * a.cos(), r * a.sin(), z)
            }
        })
        .collect()
}

/// Distance to the socket material for points in the cavity or above the top
/// face, for a cylindrical cavity of radius `rc` and depth `depth`.
fn cylinder_socket_distance(p: &Vector3<f64>, rc: f64, depth: f64) -> f64 {
    let rho = p.xy().norm();
    if p.z <= 0.0 {
        (rc - rho).min(p.z + depth)
    } else if rho >= rc {
        p.z
    } else {
        Vector2::new(rc - rho, p.z).norm()
    }
}

fn wall_distance(s: &SocketModel, from: &Vector3<f64>, dir: &Vector3<f64>) -> f64 {
    let (mut lo, mut hi) = (0.0, 100.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if s.signed_distance(&(from + dir * mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn ac7() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let scene = Scene::new(scene_by_name(EASY_SCENE).unwrap()).unwrap();
    assert_eq!(scene.plug.primitive, Primitive::Cylinder);
    let radius = scene.plug.widths[0] / 2.0;
    let dense = dense_cylinder(radius, scene.plug.height, 100_000, &mut rng);
    let mut worst_cp: f64 = 0.0;
    for i in 0..100 {
        let socket_pose = Pose::from_rpy_deg(
            Vector3::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0), rng.random_range(0.0..50.0)),
            0.0,
            0.0,
            rng.random_range(-5.0..5.0),
        );
        let socket = scene.socket.at(socket_pose);
        let offset = if i % 2 == 0 {
            Vector3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-20.0..10.0))
        } else {
            Vector3::new(rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0), rng.random_range(0.0..20.0))
        };
        let tilt = if i % 2 == 0 { 2.0 } else { 15.0 };
        let local = Pose::from_rpy_deg(
            offset,
            rng.random_range(-tilt..tilt),
            rng.random_range(-tilt..tilt),
            rng.random_range(-30.0..30.0),
        );
        let plug_pose = socket_pose.compose(&local);
        let cp = closest_pair(&scene.surface, &plug_pose, &socket).map_err(|e| e.to_string())?;
        let oracle = dense
            .iter()
            .map(|p| socket.signed_distance(&plug_pose.transform_point(p)))
            .fold(f64::INFINITY, f64::min)
            .max(0.0);
        worst_cp = worst_cp.max((cp.distance - oracle).abs());
    }
    if worst_cp > 0.2 {
        return Err(format!("closest_pair off the dense oracle by {worst_cp:.3} mm"));
    }

    let socket = &scene.socket;
    let rc = socket.cavity_widths[0] / 2.0;
    let depth = socket.cavity_depth;
    let mut worst_lip: f64 = 0.0;
    let mut worst_exact: f64 = 0.0;
    for _ in 0..20_000 {
        let a = Vector3::new(rng.random_range(-80.0..80.0), rng.random_range(-80.0..80.0), rng.random_range(-60.0..20.0));
        let b = a + Vector3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let ratio = (socket.signed_distance(&a) - socket.signed_distance(&b)).abs() / (a - b).norm();
        worst_lip = worst_lip.max(ratio);
        // Points within the block footprint, well inside its outer walls.
        let q = Vector3::new(rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0), rng.random_range(-depth..20.0));
        let inside_cavity = q.xy().norm() < rc;
        if q.z > 0.0 || inside_cavity {
            worst_exact = worst_exact.max((socket.signed_distance(&q) - cylinder_socket_distance(&q, rc, depth)).abs());
        }
    }
    if worst_lip > 1.0 + 1e-9 || worst_exact > 1e-9 {
        return Err(format!("socket SDF Lipschitz ratio {worst_lip} or analytic deviation {worst_exact:.2e}"));
    }
    let mut worst_boundary: f64 = 0.0;
    for _ in 0..2000 {
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        let wall = Vector3::new(rc * a.cos(), rc * a.sin(), rng.random_range(-depth + 0.5..-0.5));
        let r = rng.random_range(0.0..rc);
        let floor = Vector3::new(r * a.cos(), r * a.sin(), -depth);
        let r = rng.random_range(rc + 0.5..44.0);
        let top = Vector3::new(r * a.cos(), r * a.sin(), 0.0);
        for p in [wall, floor, top] {
            let hit = socket.surface_hit(&p);
            worst_boundary = worst_boundary.max(hit.signed_distance.abs());
            let out = socket.signed_distance(&(p + 1e-3 * hit.normal));
            let inn = socket.signed_distance(&(p - 1e-3 * hit.normal));
            if !(out > 0.0 && inn < 0.0) {
                return Err(format!("normal at {p:?} does not cross the boundary ({out}, {inn})"));
            }
        }
    }
    if worst_boundary > 1e-9 {
        return Err(format!("surface points have |sdf| up to {worst_boundary:.2e}"));
    }

    let mut worst_axis: f64 = 0.0;
    for name in ["cylinder_easy", "box_easy", "triangle_easy"] {
        let s = Scene::new(scene_by_name(name).unwrap()).unwrap();
        let pose = Pose::from_rpy_deg(Vector3::new(12.0, -7.0, 30.0), 0.0, 0.0, 4.0);
        let socket = s.socket.at(pose);
        let path = medial_anchor_path(&socket, 10.0, 30).map_err(|e| e.to_string())?;
        for anchor in path.anchors() {
            if pose.inverse_transform_point(anchor.translation()).z >= 0.0 {
                continue;
            }
            let c = anchor.translation();
            if name == "triangle_easy" {
                // Equidistant from the three walls, at 120° spacing from the centroid.
                let d: Vec<f64> = (0..3)
                    .map(|k| {
                        let a = std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::TAU / 3.0;
                        let dir = pose.rotation() * -Vector3::new(a.cos(), a.sin(), 0.0);
                        wall_distance(&socket, c, &dir)
                    })
                    .collect();
                worst_axis = worst_axis.max((d[0] - d[1]).abs()).max((d[1] - d[2]).abs());
            } else {
                for k in 0..2 {
                    let axis = pose.rotation().column(k).into_owned();
                    worst_axis = worst_axis.max((wall_distance(&socket, c, &axis) - wall_distance(&socket, c, &-axis)).abs());
                }
            }
        }
    }
    let msg = format!(
        "closest_pair within {worst_cp:.3} mm of a 1e5-point oracle over 100 poses; SDF Lipschitz {worst_lip:.6}, \
         analytic {worst_exact:.1e}, boundary {worst_boundary:.1e}; anchors equidistant within {worst_axis:.1e}"
    );
    if worst_axis <= 1e-9 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

const TINY_CONFIG: &str = r#"
scenes = ["cylinder_easy"]
variants = ["pf_only", "full"]
noise_levels = [0.0, 3.0]
trials = 6
seeds = [0, 1]
workers = 2
trajectories = 1

[grid]
ny = 7
nz = 5

[train.pf]
w_rot = 0.5

[train.policy]
trunk = [16, 16]
recurrent = [8]
critic = [16, 16]

[train.ppo]
epochs = 2
minibatch = 128
num_envs = 4
rollout_steps = 64
segment_len = 16
total_steps = 512

[train.curriculum]
window = 4
"#;

fn cli(args: &[&str]) -> Result<(), String> {
    let mut argv = vec!["insertion"];
    argv.extend_from_slice(args);
    match insertion_cli::run(&argv) {
        0 => Ok(()),
        code => Err(format!("`{}` exited with {code}", args.join(" "))),
    }
}

/// Relative path → bytes for every CSV under `dir`.
fn csv_files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else if path.extension().is_some_and(|e| e == "csv") {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

/// Every `*_sha256` entry in the manifests under `dir`.
fn manifest_checksums(dir: &Path) -> BTreeMap<String, serde_json::Value> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, serde_json::Value>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else if path.file_name().is_some_and(|n| n == "manifest.json") {
                let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
                for (k, v) in m["details"].as_object().unwrap() {
                    if k.ends_with("sha256") {
                        let rel = path.strip_prefix(root).unwrap().display().to_string();
                        // Paths embedded in sweep checksums differ between the two output roots.
                        let v = serde_json::Value::String(v.to_string().replace(&root.display().to_string(), ""));
                        out.insert(format!("{rel}:{k}"), v);
                    }
                }
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

fn ac8() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = tmp.path().join("tiny.toml");
    fs::write(&config, TINY_CONFIG).map_err(|e| e.to_string())?;
    let config = config.to_str().unwrap();
    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("train", vec!["train", "--variant", "full", "--seed", "3"]),
        ("eval", vec!["eval", "--variant", "full", "--checkpoint", "CKPT"]),
        ("eval_pf", vec!["eval", "--variant", "pf_only"]),
        ("sweep", vec!["sweep"]),
        ("field", vec!["field-dump"]),
        ("replay", vec!["replay", "--variant", "full", "--checkpoint", "CKPT", "--noise", "3", "--episode", "2"]),
    ];
    let ckpt = tmp.path().join("a/train/policy.ckpt");
    let mut files = 0;
    let mut logs = 0;
    for (name, args) in &runs {
        let mut outputs = Vec::new();
        for side in ["a", "b"] {
            let out = tmp.path().join(side).join(name);
            let out_s = out.to_str().unwrap().to_string();
            let ckpt_s = ckpt.to_str().unwrap().to_string();
            let mut argv: Vec<String> = args
                .iter()
                .map(|a| if *a == "CKPT" { ckpt_s.clone() } else { a.to_string() })
                .collect();
            argv.extend(["--config".into(), config.into(), "--out".into(), out_s]);
            let argv: Vec<&str> = argv.iter().map(String::as_str).collect();
            cli(&argv)?;
            outputs.push(out);
        }
        let (a, b) = (csv_files(&outputs[0]), csv_files(&outputs[1]));
        if a.is_empty() {
            return Err(format!("{name} wrote no CSV"));
        }
        if a != b {
            let diff: Vec<_> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
            return Err(format!("{name}: CSV outputs differ: {diff:?}"));
        }
        let (ma, mb) = (manifest_checksums(&outputs[0]), manifest_checksums(&outputs[1]));
        if ma != mb {
            return Err(format!("{name}: manifest checksums differ"));
        }
        files += a.len();
        logs += ma.keys().filter(|k| k.contains("train_log")).count();
    }
    if logs == 0 {
        return Err("no training-log checksum was compared".into());
    }
    Ok(format!(
        "train, eval, sweep, field-dump and replay ran twice: {files} CSV files byte-identical, {logs} training-log checksums equal"
    ))
}

fn ac9(scene: &Scene, settings: &EvalSettings) -> Check {
    let policy = Policy::new(PolicyArch::default().with_head(HeadKind::Residual), 9);
    let mut free = 0usize;
    let mut contact = 0usize;
    for (variant, policy) in [(Variant::PfOnly, None), (Variant::Full, Some(&policy))] {
        for noise in [0.0, 2.0, 5.0] {
            let mut env = InsertionEnv::new(scene.clone(), settings.env.clone()).unwrap();
            let mut ctrl = Controller::new(variant, policy).unwrap();
            for episode in 0..40 {
                let mut rows = Vec::new();
                let rec = run_episode(&mut env, &mut ctrl, settings, noise, 9, episode, Some(&mut rows)).unwrap();
                for row in &rows[1..] {
                    if row.done {
                        continue;
                    }
                    if row.penetration == 0.0 {
                        free += 1;
                        if row.reward.to_bits() != 0 {
                            return Err(format!("{variant} noise {noise} episode {episode} step {}: reward {}", row.step, row.reward));
                        }
                    } else {
                        contact += 1;
                    }
                }
                if rec.free_nonzero_rewards != 0 {
                    return Err(format!("{variant} noise {noise} episode {episode}: episode record counts nonzero free rewards"));
                }
            }
        }
    }
    Ok(format!("{free} free non-terminal steps all carry +0 reward ({contact} penetrating steps excluded)"))
}

fn main() -> ExitCode {
    let (scene, settings) = easy_scene();
    let mut results: Vec<(&str, Check)> = Vec::new();
    let (c1, clean) = ac1(&scene, &settings);
    results.push(("AC1", c1));
    results.push(("AC2", ac2(&scene, &settings, clean)));
    results.push(("AC3", ac3()));
    results.push(("AC4", ac4()));
    results.push(("AC5", ac5()));
    results.push(("AC6", ac6()));
    results.push(("AC7", ac7()));
    results.push(("AC8", ac8()));
    results.push(("AC9", ac9(&scene, &settings)));
    let mut failed = 0;
    for (id, r) in &results {
        match r {
            Ok(msg) => println!("{id} PASS {msg}"),
            Err(msg) => {
                failed += 1;
                println!("{id} FAIL {msg}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
