//! Training variants and how each turns a head sample into an environment action.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::env::Observation;
use crate::geometry::{GeometryError, PlugSurface, SocketModel, Twist};
use crate::policy::{combine_residual, decode_residual, sigmoid, HeadKind};
use crate::potential_field::{blend, PfConfig, PotentialField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Potential field alone; nothing is learned.
    PfOnly,
    /// Residual policy trained at full noise with β = 1 from the start.
    PfResidualNoCurriculum,
    /// Policy predicts the potential-field blend weights instead of a residual.
    PfPlusLearnedW,
    /// Residual policy that also predicts its own scale β.
    PfResidualLearnedBeta,
    /// Residual policy with the noise/β curriculum.
    Full,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::PfOnly,
        Variant::PfResidualNoCurriculum,
        Variant::PfPlusLearnedW,
        Variant::PfResidualLearnedBeta,
        Variant::Full,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::PfOnly => "pf_only",
            Variant::PfResidualNoCurriculum => "pf_residual_no_curriculum",
            Variant::PfPlusLearnedW => "pf_plus_learned_w",
            Variant::PfResidualLearnedBeta => "pf_residual_learned_beta",
            Variant::Full => "full",
        }
    }

    /// Actor head, or `None` when the variant has no policy.
    pub fn head(self) -> Option<HeadKind> {
        match self {
            Variant::PfOnly => None,
            Variant::PfResidualNoCurriculum | Variant::Full => Some(HeadKind::Residual),
            Variant::PfPlusLearnedW => Some(HeadKind::Weights),
            Variant::PfResidualLearnedBeta => Some(HeadKind::ResidualWithScale),
        }
    }

    pub fn learns(self) -> bool {
        self.head().is_some()
    }

    pub fn uses_curriculum(self) -> bool {
        self == Variant::Full
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = TrainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| TrainError::UnknownVariant(s.to_string()))
    }
}

/// Everything that went into one executed action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionParts {
    pub a_pf: Twist,
    pub a_rl: Twist,
    pub total: Twist,
    /// Residual scale actually applied.
    pub beta: f64,
    /// Blend weights, when the policy chose them.
    pub weights: Option<(f64, f64)>,
}

/// Turns a head sample `u` into the executed twist for `variant`. `beta` is
/// the curriculum scale; the learned-β variant replaces it with its own.
#[allow(clippy::too_many_arguments)]
pub fn compose_action(
    variant: Variant,
    u: Option<&[f64]>,
    beta: f64,
    obs: &Observation,
    socket: &SocketModel,
    surface: &PlugSurface,
    pf: &PfConfig,
    residual_limits: (f64, f64),
    action_limits: (f64, f64),
) -> Result<ActionParts, GeometryError> {
    let field = PotentialField::new(socket, &obs.socket, pf)?;
    let out = field.action(surface, &obs.plug)?;
    let (lt, lr) = residual_limits;
    let parts = match (variant, u) {
        (Variant::PfOnly, _) | (_, None) => ActionParts {
            a_pf: out.combined,
            a_rl: Twist::zero(),
            total: out.combined,
            beta: 0.0,
            weights: None,
        },
        (Variant::PfPlusLearnedW, Some(u)) => {
            let (w_tr, w_rot) = (sigmoid(u[0]), sigmoid(u[1]));
            let a_pf = blend(&out.attractive, &out.repulsive, &pf.with_weights(w_tr, w_rot));
            ActionParts {
                a_pf,
                a_rl: Twist::zero(),
                total: a_pf,
                beta: 0.0,
                weights: Some((w_tr, w_rot)),
            }
        }
        (Variant::PfResidualLearnedBeta, Some(u)) => {
            let b = sigmoid(u[6]);
            let a_rl = decode_residual(u, lt, lr);
            ActionParts {
                a_pf: out.combined,
                a_rl,
                total: combine_residual(&out.combined, &a_rl, b, action_limits.0, action_limits.1),
                beta: b,
                weights: None,
            }
        }
        (_, Some(u)) => {
            let a_rl = decode_residual(u, lt, lr);
            ActionParts {
                a_pf: out.combined,
                a_rl,
                total: combine_residual(&out.combined, &a_rl, beta, action_limits.0, action_limits.1),
                beta,
                weights: None,
            }
        }
    };
    Ok(parts)
}
