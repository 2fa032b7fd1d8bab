//! The potential network `N(y) = y - r(y)`, with `r` a small softplus U-Net.
//!
//! Input channels are the image and a constant plane holding `1/γ`.
//! Each scale has `blocks` residual blocks `x + conv(softplus(conv(x)))`;
//! scales are linked by pixel-unshuffle + 1×1 conv going down and
//! 1×1 conv + pixel-shuffle going up, with additive skips.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Topology of a [`PotentialNetwork`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkArchitecture {
    /// Feature channels per scale, finest first.
    pub channels: Vec<usize>,
    /// Odd side of the spatial kernels.
    pub kernel_size: usize,
    /// Residual blocks per scale.
    pub blocks: usize,
    pub bias: bool,
}

impl Default for NetworkArchitecture {
    fn default() -> Self {
        Self { channels: vec![16, 32, 64], kernel_size: 3, blocks: 1, bias: true }
    }
}

/// Number of input planes: the image and the `1/γ` plane.
pub const INPUT_CHANNELS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Plain,
    BlockOut,
    Tail,
    Bias,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct ParamSpec {
    shape: [usize; 4],
    role: Role,
}

impl NetworkArchitecture {
    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() || self.channels.contains(&0) {
            return Err(Error::config("network needs at least one scale with nonzero channels"));
        }
        if self.kernel_size % 2 == 0 {
            return Err(Error::config(format!("kernel size must be odd, got {}", self.kernel_size)));
        }
        Ok(())
    }

    pub fn scales(&self) -> usize {
        self.channels.len()
    }

    /// Image sides must be multiples of this.
    pub fn size_multiple(&self) -> usize {
        1 << (self.scales() - 1)
    }

    fn conv(&self, specs: &mut Vec<ParamSpec>, cout: usize, cin: usize, k: usize, role: Role) {
        specs.push(ParamSpec { shape: [cout, cin, k, k], role });
        if self.bias {
            specs.push(ParamSpec { shape: [1, cout, 1, 1], role: Role::Bias });
        }
    }

    fn block(&self, specs: &mut Vec<ParamSpec>, c: usize) {
        let k = self.kernel_size;
        self.conv(specs, c, c, k, Role::Plain);
        self.conv(specs, c, c, k, Role::BlockOut);
    }

    /// Parameter tensors in storage order; must mirror [`PotentialNetwork::residual`].
    fn layout(&self) -> Vec<ParamSpec> {
        let ch = &self.channels;
        let k = self.kernel_size;
        let last = ch.len() - 1;
        let mut specs = Vec::new();
        self.conv(&mut specs, ch[0], INPUT_CHANNELS, k, Role::Plain);
        for s in 0..last {
            for _ in 0..self.blocks {
                self.block(&mut specs, ch[s]);
            }
            self.conv(&mut specs, ch[s + 1], 4 * ch[s], 1, Role::Plain);
        }
        for _ in 0..self.blocks {
            self.block(&mut specs, ch[last]);
        }
        for s in (0..last).rev() {
            self.conv(&mut specs, 4 * ch[s], ch[s + 1], 1, Role::Plain);
            for _ in 0..self.blocks {
                self.block(&mut specs, ch[s]);
            }
        }
        self.conv(&mut specs, 1, ch[0], k, Role::Tail);
        specs
    }

    pub fn parameter_count(&self) -> usize {
        self.layout().iter().map(|p| p.shape.iter().product::<usize>()).sum()
    }
}

/// Architecture plus a flat weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialNetwork {
    architecture: NetworkArchitecture,
    weights: Vec<f64>,
}

impl PotentialNetwork {
    pub fn new(architecture: NetworkArchitecture, weights: Vec<f64>) -> Result<Self> {
        architecture.validate()?;
        let expected = architecture.parameter_count();
        if weights.len() != expected {
            return Err(Error::config(format!(
                "architecture expects {expected} weights, got {}",
                weights.len()
            )));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::config(format!("weight {i} is not finite")));
        }
        Ok(Self { architecture, weights })
    }

    /// All-zero weights: `r ≡ 0`, so `N` is the identity and the potential vanishes.
    pub fn identity(architecture: NetworkArchitecture) -> Result<Self> {
        let n = architecture.parameter_count();
        Self::new(architecture, vec![0.0; n])
    }

    /// Scaled normal initialization. `tail_gain` scales the last layer; zero makes `N` the identity.
    pub fn init(architecture: NetworkArchitecture, seed: u64, tail_gain: f64) -> Result<Self> {
        architecture.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(architecture.parameter_count());
        for spec in architecture.layout() {
            let [_, cin, kh, kw] = spec.shape;
            let n: usize = spec.shape.iter().product();
            let gain = match spec.role {
                Role::Bias => {
                    weights.extend(std::iter::repeat_n(0.0, n));
                    continue;
                }
                Role::Plain => 1.0,
                Role::BlockOut => 0.2,
                Role::Tail => tail_gain,
            };
            let std = gain / ((cin * kh * kw) as f64).sqrt();
            if std == 0.0 {
                weights.extend(std::iter::repeat_n(0.0, n));
                continue;
            }
            let normal = Normal::new(0.0, std).map_err(|e| Error::config(e.to_string()))?;
            weights.extend((0..n).map(|_| normal.sample(&mut rng)));
        }
        Self::new(architecture, weights)
    }

    pub fn architecture(&self) -> &NetworkArchitecture {
        &self.architecture
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn check_size(&self, height: usize, width: usize) -> Result<()> {
        let m = self.architecture.size_multiple();
        if height == 0 || width == 0 || height % m != 0 || width % m != 0 {
            return Err(Error::shape(format!(
                "image {height}x{width}: sides must be positive multiples of {m} for this network"
            )));
        }
        Ok(())
    }

    /// Records every parameter tensor on the tape as a leaf.
    pub fn parameter_leaves(&self, tape: &mut Tape) -> Vec<Var> {
        let mut offset = 0;
        self.architecture
            .layout()
            .into_iter()
            .map(|spec| {
                let n: usize = spec.shape.iter().product();
                let t = Tensor::new(spec.shape, self.weights[offset..offset + n].to_vec());
                offset += n;
                tape.leaf(t)
            })
            .collect()
    }

    /// Records the residual `r(y)` for `y` of shape `[B, 1, H, W]` and a matching `1/γ` plane.
    pub fn residual(&self, tape: &mut Tape, y: Var, inv_gamma: Var, params: &[Var]) -> Var {
        let arch = &self.architecture;
        let mut p = params.iter().copied();
        let mut conv = |tape: &mut Tape, x: Var| {
            let h = tape.conv2d(x, p.next().expect("parameter layout"));
            if arch.bias {
                tape.add_bias(h, p.next().expect("parameter layout"))
            } else {
                h
            }
        };
        fn block(
            tape: &mut Tape,
            x: Var,
            conv: &mut impl FnMut(&mut Tape, Var) -> Var,
        ) -> Var {
            let h = conv(tape, x);
            let h = tape.softplus(h);
            let h = conv(tape, h);
            tape.add(x, h)
        }

        let last = arch.scales() - 1;
        let input = tape.concat_channels(y, inv_gamma);
        let mut x = conv(tape, input);
        let mut skips = Vec::with_capacity(last);
        for _ in 0..last {
            for _ in 0..arch.blocks {
                x = block(tape, x, &mut conv);
            }
            skips.push(x);
            let d = tape.pixel_unshuffle(x);
            x = conv(tape, d);
        }
        for _ in 0..arch.blocks {
            x = block(tape, x, &mut conv);
        }
        for _ in (0..last).rev() {
            let u = conv(tape, x);
            let u = tape.pixel_shuffle(u);
            x = tape.add(u, skips.pop().expect("skip per scale"));
            for _ in 0..arch.blocks {
                x = block(tape, x, &mut conv);
            }
        }
        let r = conv(tape, x);
        debug_assert!(p.next().is_none(), "unused parameters");
        r
    }
}
