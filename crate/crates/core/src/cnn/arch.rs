use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Side of the square network input, after padding 31x31 images by one row
/// and one column.
pub const DEFAULT_INPUT_SIZE: usize = 32;
pub const KERNEL_SIZE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "lowercase")]
pub enum Stage {
    Conv { maps: usize, kernel: usize },
    Pool { factor: usize },
}

/// Validated conv/pool stage list, e.g. `in_8c_2p_16c_2p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnnArchitecture {
    input_size: usize,
    stages: Vec<Stage>,
    /// (maps, side) after the input and after each stage.
    chain: Vec<(usize, usize)>,
}

impl CnnArchitecture {
    /// Parses an architecture string against the default 32x32 input.
    pub fn parse(spec: &str) -> Result<Self> {
        Self::parse_with_input(spec, DEFAULT_INPUT_SIZE)
    }

    pub fn parse_with_input(spec: &str, input_size: usize) -> Result<Self> {
        let mut tokens = spec.trim().split('_');
        if tokens.next() != Some("in") {
            return Err(Error::Parse(format!("{spec:?}: must start with \"in\"")));
        }
        let mut stages = Vec::new();
        let rest: Vec<&str> = tokens.collect();
        if rest.is_empty() || !rest.len().is_multiple_of(2) {
            return Err(Error::Parse(format!(
                "{spec:?}: expected one or more <int>c_<int>p pairs"
            )));
        }
        for pair in rest.chunks(2) {
            let maps = parse_token(spec, pair[0], 'c')?;
            let factor = parse_token(spec, pair[1], 'p')?;
            stages.push(Stage::Conv {
                maps,
                kernel: KERNEL_SIZE,
            });
            stages.push(Stage::Pool { factor });
        }
        Self::from_stages(input_size, stages)
    }

    /// Builds from explicit stages, checking the spatial arithmetic.
    pub fn from_stages(input_size: usize, stages: Vec<Stage>) -> Result<Self> {
        let mut chain = vec![(1, input_size)];
        let (mut maps, mut side) = (1, input_size);
        for (i, stage) in stages.iter().enumerate() {
            match *stage {
                Stage::Conv { maps: m, kernel } => {
                    if m == 0 || kernel == 0 {
                        return Err(Error::Parse(format!("stage {i}: zero maps or kernel")));
                    }
                    if side < kernel {
                        return Err(Error::Shape(format!(
                            "stage {i}: {side}x{side} input is smaller than a {kernel}x{kernel} kernel"
                        )));
                    }
                    side = side - kernel + 1;
                    maps = m;
                }
                Stage::Pool { factor } => {
                    if factor == 0 {
                        return Err(Error::Parse(format!("stage {i}: pool factor 0")));
                    }
                    if side % factor != 0 {
                        return Err(Error::Shape(format!(
                            "stage {i}: side {side} is not divisible by pool factor {factor}"
                        )));
                    }
                    side /= factor;
                }
            }
            chain.push((maps, side));
        }
        if side == 0 {
            return Err(Error::Shape("stack reduces the input to nothing".into()));
        }
        Ok(Self {
            input_size,
            stages,
            chain,
        })
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    /// `(maps, side)` at the input and after every stage.
    pub fn shape_chain(&self) -> &[(usize, usize)] {
        &self.chain
    }

    pub fn output_maps(&self) -> usize {
        self.chain.last().map_or(1, |c| c.0)
    }

    pub fn output_side(&self) -> usize {
        self.chain.last().map_or(self.input_size, |c| c.1)
    }

    /// Length of the flattened final feature-map stack.
    pub fn feature_dim(&self) -> usize {
        let side = self.output_side();
        self.output_maps() * side * side
    }
}

impl fmt::Display for CnnArchitecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "in")?;
        for s in &self.stages {
            match s {
                Stage::Conv { maps, .. } => write!(f, "_{maps}c")?,
                Stage::Pool { factor } => write!(f, "_{factor}p")?,
            }
        }
        Ok(())
    }
}

fn parse_token(spec: &str, token: &str, suffix: char) -> Result<usize> {
    token
        .strip_suffix(suffix)
        .and_then(|n| n.parse::<usize>().ok())
        .ok_or_else(|| Error::Parse(format!("{spec:?}: bad token {token:?}, expected <int>{suffix}")))
}
