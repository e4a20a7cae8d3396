use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture family. The three `Simba*` removal variants share SimBa's
/// parameter layout (minus the removed normalisation) and only change wiring.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "mlp")]
    Mlp,
    #[serde(rename = "mlp+res")]
    MlpRes,
    #[serde(rename = "mlp+ln")]
    MlpLn,
    #[serde(rename = "simba")]
    Simba,
    #[serde(rename = "simba-residual")]
    SimbaNoResidual,
    #[serde(rename = "simba-preln")]
    SimbaNoPreLn,
    #[serde(rename = "simba-postln")]
    SimbaNoPostLn,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Mlp,
        Variant::MlpRes,
        Variant::MlpLn,
        Variant::Simba,
        Variant::SimbaNoResidual,
        Variant::SimbaNoPreLn,
        Variant::SimbaNoPostLn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Mlp => "mlp",
            Variant::MlpRes => "mlp+res",
            Variant::MlpLn => "mlp+ln",
            Variant::Simba => "simba",
            Variant::SimbaNoResidual => "simba-residual",
            Variant::SimbaNoPreLn => "simba-preln",
            Variant::SimbaNoPostLn => "simba-postln",
        }
    }

    pub fn is_simba(self) -> bool {
        matches!(
            self,
            Variant::Simba | Variant::SimbaNoResidual | Variant::SimbaNoPreLn | Variant::SimbaNoPostLn
        )
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::config("variant", format!("unknown architecture `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeadKind {
    Raw,
    GaussianPolicy,
    DeterministicPolicy,
    QValue,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub variant: Variant,
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// Residual blocks for SimBa and `mlp+res`; hidden layers for `mlp` and `mlp+ln`.
    pub num_blocks: usize,
    /// Action dimension for policy heads, 1 for value heads.
    pub output_dim: usize,
    pub head: HeadKind,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    Zeros,
    Ones,
    Orthogonal(f64),
}

/// One learnable tensor of a network, in forward order.
#[derive(Clone, Debug, PartialEq)]
pub struct Slot {
    pub name: String,
    pub shape: [usize; 2],
    pub init: Init,
}

pub const RELU_GAIN: f64 = core::f64::consts::SQRT_2;
pub const OUTPUT_GAIN: f64 = 1e-2;

/// Inner width of the SimBa feedforward branch relative to `hidden_dim`.
pub const EXPANSION: usize = 4;

impl NetworkSpec {
    pub fn new(variant: Variant, input_dim: usize, hidden_dim: usize, num_blocks: usize, output_dim: usize, head: HeadKind) -> Self {
        NetworkSpec {
            variant,
            input_dim,
            hidden_dim,
            num_blocks,
            output_dim,
            head,
        }
    }

    pub fn head_width(&self) -> usize {
        match self.head {
            HeadKind::GaussianPolicy => 2 * self.output_dim,
            HeadKind::QValue => 1,
            HeadKind::Raw | HeadKind::DeterministicPolicy => self.output_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::config("input_dim", "must be positive"));
        }
        if self.hidden_dim == 0 {
            return Err(Error::config("hidden_dim", "must be positive"));
        }
        if self.output_dim == 0 {
            return Err(Error::config("output_dim", "must be positive"));
        }
        if self.head == HeadKind::QValue && self.output_dim != 1 {
            return Err(Error::config("output_dim", "q-value heads emit one scalar"));
        }
        if matches!(self.variant, Variant::Mlp | Variant::MlpLn) && self.num_blocks == 0 {
            return Err(Error::config("num_blocks", "mlp variants need at least one hidden layer"));
        }
        Ok(())
    }

    /// Learnable tensors in the order `forward` consumes them.
    pub fn layout(&self) -> Vec<Slot> {
        let (d_o, d_h) = (self.input_dim, self.hidden_dim);
        let mut slots = Vec::new();
        let linear = |slots: &mut Vec<Slot>, name: &str, fan_in: usize, fan_out: usize, gain: f64| {
            slots.push(Slot {
                name: format!("{name}.w"),
                shape: [fan_in, fan_out],
                init: Init::Orthogonal(gain),
            });
            slots.push(Slot {
                name: format!("{name}.b"),
                shape: [1, fan_out],
                init: Init::Zeros,
            });
        };
        let norm = |slots: &mut Vec<Slot>, name: &str, width: usize| {
            slots.push(Slot {
                name: format!("{name}.gain"),
                shape: [1, width],
                init: Init::Ones,
            });
            slots.push(Slot {
                name: format!("{name}.bias"),
                shape: [1, width],
                init: Init::Zeros,
            });
        };
        match self.variant {
            Variant::Mlp | Variant::MlpLn => {
                linear(&mut slots, "layer0", d_o, d_h, RELU_GAIN);
                for i in 1..self.num_blocks {
                    if self.variant == Variant::MlpLn {
                        norm(&mut slots, &format!("ln{i}"), d_h);
                    }
                    linear(&mut slots, &format!("layer{i}"), d_h, d_h, RELU_GAIN);
                }
                if self.variant == Variant::MlpLn {
                    norm(&mut slots, "head_ln", d_h);
                }
            }
            Variant::MlpRes => {
                linear(&mut slots, "layer0", d_o, d_h, RELU_GAIN);
                for l in 0..self.num_blocks {
                    linear(&mut slots, &format!("block{l}.fc_a"), d_h, d_h, RELU_GAIN);
                    linear(&mut slots, &format!("block{l}.fc_b"), d_h, d_h, OUTPUT_GAIN);
                }
            }
            _ => {
                linear(&mut slots, "embed", d_o, d_h, 1.0);
                for l in 0..self.num_blocks {
                    if self.variant != Variant::SimbaNoPreLn {
                        norm(&mut slots, &format!("block{l}.ln"), d_h);
                    }
                    linear(&mut slots, &format!("block{l}.fc1"), d_h, EXPANSION * d_h, RELU_GAIN);
                    linear(&mut slots, &format!("block{l}.fc2"), EXPANSION * d_h, d_h, OUTPUT_GAIN);
                }
                if self.variant != Variant::SimbaNoPostLn {
                    norm(&mut slots, "post_ln", d_h);
                }
            }
        }
        linear(&mut slots, "head", d_h, self.head_width(), OUTPUT_GAIN);
        slots
    }
}

pub fn count_params(spec: &NetworkSpec) -> usize {
    spec.layout().iter().map(|s| s.shape[0] * s.shape[1]).sum()
}

/// Hidden width for `template` whose parameter count is closest to `target`.
/// Fails when the best match is off by more than `tolerance` (relative).
pub fn match_hidden_dim(template: &NetworkSpec, target: usize, tolerance: f64) -> Result<NetworkSpec> {
    let mut best: Option<(usize, usize)> = None;
    let mut d_h = 1;
    loop {
        let spec = NetworkSpec { hidden_dim: d_h, ..*template };
        let count = count_params(&spec);
        let gap = count.abs_diff(target);
        if best.is_none_or(|(_, g)| gap < g) {
            best = Some((d_h, gap));
        }
        if count > target {
            break;
        }
        d_h += 1;
    }
    let (d_h, gap) = best.unwrap();
    if gap as f64 > tolerance * target as f64 {
        return Err(Error::config(
            "hidden_dim",
            format!(
                "no width of {} is within {:.1}% of {} parameters (closest off by {})",
                template.variant,
                tolerance * 100.0,
                target,
                gap
            ),
        ));
    }
    Ok(NetworkSpec { hidden_dim: d_h, ..*template })
}

/// Depth a comparator variant uses against a simba reference with `L` blocks:
/// plain and layer-normed MLPs get one hidden layer per linear of the
/// reference trunk (`2L + 1`), residual variants keep `L` blocks.
pub fn comparator_depth(variant: Variant, num_blocks: usize) -> usize {
    match variant {
        Variant::Mlp | Variant::MlpLn => 2 * num_blocks + 1,
        _ => num_blocks,
    }
}

/// `variant` at the depth of [`comparator_depth`] with its width matched to
/// the parameter count of `reference` within `tolerance`. Simba variants reuse
/// the reference widths unchanged.
pub fn matched_spec(reference: &NetworkSpec, variant: Variant, tolerance: f64) -> Result<NetworkSpec> {
    if variant == reference.variant {
        return Ok(*reference);
    }
    if variant.is_simba() && reference.variant.is_simba() {
        return Ok(NetworkSpec { variant, ..*reference });
    }
    let template = NetworkSpec {
        variant,
        num_blocks: comparator_depth(variant, reference.num_blocks),
        ..*reference
    };
    match_hidden_dim(&template, count_params(reference), tolerance)
}
