//! Quasi-static insertion environment with observation noise.

mod config;
mod contact;
mod trace;

pub use config::{EnvConfig, NoiseLevel};
pub use contact::{check_success, resolve_contact, Resolved};
pub use trace::{write_trace_csv, TraceRow, TRACE_COLUMNS};

use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{penetration_depth, GeometryError, Pose, Scene, SocketModel, Twist};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
    #[error("step called on a finished episode")]
    SteppedTerminalEpisode,
    #[error("step called before reset")]
    NotReset,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("trace output: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace output: {0}")]
    Csv(#[from] csv::Error),
}

/// Ground-truth poses, available only inside simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Privileged {
    pub plug: Pose,
    pub socket: Pose,
}

/// What a policy sees at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub step: usize,
    pub plug: Pose,
    pub socket: Pose,
    pub privileged: Option<Privileged>,
}

impl Observation {
    /// Copy with the ground truth removed, as a deployed system would see it.
    pub fn without_privileged(&self) -> Observation {
        Observation {
            privileged: None,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Running,
    Success,
    Timeout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeState {
    pub plug: Pose,
    pub socket: Pose,
    pub step: usize,
    pub cumulative_penetration: f64,
    pub outcome: Outcome,
    pub noise: NoiseLevel,
}

impl EpisodeState {
    pub fn done(&self) -> bool {
        self.outcome != Outcome::Running
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub penetration: f64,
    pub success: bool,
    pub backtracked: bool,
    /// Action after the per-axis clamp, as actually commanded.
    pub applied: Twist,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Perturbs `pose` by uniform noise: each translation axis by `U(−tr, tr)` mm
/// and the orientation by world-frame roll/pitch/yaw drawn from `U(−rot, rot)`°.
/// Always consumes six draws so streams stay aligned across noise levels.
pub fn apply_noise<R: Rng + ?Sized>(pose: &Pose, tr: f64, rot: f64, rng: &mut R) -> Pose {
    let mut u = [0.0; 6];
    for v in &mut u {
        *v = 2.0 * rng.random::<f64>() - 1.0;
    }
    let t = pose.translation() + Vector3::new(u[0], u[1], u[2]) * tr;
    if rot == 0.0 {
        return Pose::new(t, *pose.rotation()).expect("rotation taken from a valid pose");
    }
    let d = Rotation3::from_euler_angles(
        (u[3] * rot).to_radians(),
        (u[4] * rot).to_radians(),
        (u[5] * rot).to_radians(),
    );
    Pose::new(t, d.matrix() * pose.rotation()).expect("product of rotations is a rotation")
}

/// One insertion episode at a time over a fixed scene.
#[derive(Debug, Clone)]
pub struct InsertionEnv {
    scene: Scene,
    cfg: EnvConfig,
    socket: SocketModel,
    goal: Pose,
    state: Option<EpisodeState>,
    rng: ChaCha8Rng,
}

impl InsertionEnv {
    pub fn new(scene: Scene, cfg: EnvConfig) -> Result<Self, EnvError> {
        cfg.validate(&scene.spec)?;
        let socket = scene.socket.clone();
        let goal = socket.goal_pose();
        Ok(Self {
            scene,
            cfg,
            socket,
            goal,
            state: None,
            rng: ChaCha8Rng::seed_from_u64(0),
        })
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    /// Socket geometry at the current episode's true pose.
    pub fn socket(&self) -> &SocketModel {
        &self.socket
    }

    pub fn goal(&self) -> &Pose {
        &self.goal
    }

    pub fn state(&self) -> Option<&EpisodeState> {
        self.state.as_ref()
    }

    /// Starts an episode: randomizes the socket and the plug start pose, and
    /// fixes the noise level until the next reset.
    pub fn reset(&mut self, noise: NoiseLevel, seed: u64) -> Observation {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        let c = &self.cfg;
        let rng = &mut self.rng;
        let mut sym = |r: f64| r * (2.0 * rng.random::<f64>() - 1.0);

        let nominal = self.scene.socket.pose;
        let offset = Vector3::new(sym(c.socket_xy_range), sym(c.socket_xy_range), 0.0);
        let yaw = sym(c.socket_yaw_range);
        let z = c.socket_z_range * rng.random::<f64>();
        let yaw_rot = Rotation3::from_axis_angle(&Vector3::z_axis(), yaw.to_radians());
        let socket_pose = Pose::new(
            nominal.translation() + offset + Vector3::new(0.0, 0.0, z),
            yaw_rot.matrix() * nominal.rotation(),
        )
        .expect("product of rotations is a rotation");

        let mut sym = |r: f64| r * (2.0 * rng.random::<f64>() - 1.0);
        let (x, y) = (sym(c.plug_xy_range), sym(c.plug_xy_range));
        let (roll, pitch, yaw) = (sym(c.plug_rot_range), sym(c.plug_rot_range), sym(c.plug_rot_range));
        self.socket = self.scene.socket.at(socket_pose);
        self.goal = self.socket.goal_pose();
        let mut height = c.plug_start_height;
        let mut plug = socket_pose.compose(&Pose::from_rpy_deg(Vector3::new(x, y, height), roll, pitch, yaw));
        // Large tilted plugs can clip the block at the nominal height; lift them clear.
        while penetration_depth(&self.scene.surface, &plug, &self.socket) > 0.0 {
            height += 1.0;
            plug = socket_pose.compose(&Pose::from_rpy_deg(Vector3::new(x, y, height), roll, pitch, yaw));
        }

        self.state = Some(EpisodeState {
            plug,
            socket: socket_pose,
            step: 0,
            cumulative_penetration: 0.0,
            outcome: Outcome::Running,
            noise,
        });
        self.observe()
    }

    fn observe(&mut self) -> Observation {
        let s = self.state.as_ref().expect("observe after reset");
        let n = s.noise;
        let plug = apply_noise(&s.plug, n.plug_tr, n.plug_rot, &mut self.rng);
        let socket = apply_noise(&s.socket, n.socket_tr, n.socket_rot, &mut self.rng);
        Observation {
            step: s.step,
            plug,
            socket,
            privileged: Some(Privileged {
                plug: s.plug,
                socket: s.socket,
            }),
        }
    }

    /// Clamps and applies `action`, resolves contact, scores the step and
    /// returns a fresh noisy observation.
    pub fn step(&mut self, action: &Twist) -> Result<StepOutcome, EnvError> {
        let cfg = &self.cfg;
        let state = self.state.as_mut().ok_or(EnvError::NotReset)?;
        if state.done() {
            return Err(EnvError::SteppedTerminalEpisode);
        }
        let applied = action.clamp_per_axis(cfg.action_limit_tr, cfg.action_limit_rot);
        let candidate = state.plug.apply_twist(&applied);
        let r = resolve_contact(
            &self.scene.surface,
            &self.socket,
            &state.plug,
            &candidate,
            cfg.p_allow,
            cfg.bisection_iters,
        );
        state.plug = r.pose;
        state.step += 1;
        state.cumulative_penetration += r.penetration;

        let success = check_success(&r.pose, &self.goal, cfg.success_tr, cfg.success_rot, r.penetration, cfg.p_allow);
        let mut reward = 0.0;
        if success {
            reward += cfg.reward_success;
        }
        if r.penetration > 0.0 {
            reward -= cfg.penetration_penalty * r.penetration;
        }
        state.outcome = if success {
            Outcome::Success
        } else if state.step >= cfg.horizon {
            Outcome::Timeout
        } else {
            Outcome::Running
        };
        let done = state.done();
        let info = StepInfo {
            penetration: r.penetration,
            success,
            backtracked: r.backtracked,
            applied,
        };
        Ok(StepOutcome {
            observation: self.observe(),
            reward,
            done,
            info,
        })
    }
}
