//! Text container for trained models.
//!
//! ```text
//! bregman-pnp-model 1
//! geometry burg
//! strength 1
//! channels 16,32,64
//! kernel_size 3
//! blocks 1
//! bias true
//! seed 0
//! inv_gamma_range 0 0.1
//! steps 2000
//! patch_size 32
//! batch_size 8
//! learning_rate 0.0001
//! loss_curve <count>
//! <one value per line>
//! weights <count>
//! <one value per line, in network parameter order>
//! end
//! ```
//!
//! Floats use the shortest representation that parses back to the same bits.

use std::fmt::Write as _;
use std::path::Path;

use super::network::{NetworkArchitecture, PotentialNetwork};
use super::{ScoreDenoiserModel, TrainingRecord};
use crate::error::{Error, Result};
use crate::geometry::PotentialKind;

const MAGIC: &str = "bregman-pnp-model";
const VERSION: u32 = 1;

impl ScoreDenoiserModel {
    pub fn to_text(&self) -> String {
        let a = self.network.architecture();
        let r = &self.record;
        let mut s = String::new();
        let channels: Vec<String> = a.channels.iter().map(|c| c.to_string()).collect();
        writeln!(s, "{MAGIC} {VERSION}").unwrap();
        writeln!(s, "geometry {}", self.geometry.name()).unwrap();
        writeln!(s, "strength {}", self.strength).unwrap();
        writeln!(s, "channels {}", channels.join(",")).unwrap();
        writeln!(s, "kernel_size {}", a.kernel_size).unwrap();
        writeln!(s, "blocks {}", a.blocks).unwrap();
        writeln!(s, "bias {}", a.bias).unwrap();
        writeln!(s, "seed {}", r.seed).unwrap();
        writeln!(s, "inv_gamma_range {} {}", r.inv_gamma_range.0, r.inv_gamma_range.1).unwrap();
        writeln!(s, "steps {}", r.steps).unwrap();
        writeln!(s, "patch_size {}", r.patch_size).unwrap();
        writeln!(s, "batch_size {}", r.batch_size).unwrap();
        writeln!(s, "learning_rate {}", r.learning_rate).unwrap();
        writeln!(s, "loss_curve {}", r.loss_curve.len()).unwrap();
        for v in &r.loss_curve {
            writeln!(s, "{v}").unwrap();
        }
        writeln!(s, "weights {}", self.network.weights().len()).unwrap();
        for v in self.network.weights() {
            writeln!(s, "{v}").unwrap();
        }
        s.push_str("end\n");
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| Error::format("empty model file"))?;
        match header.split_once(' ') {
            Some((MAGIC, v)) if v.parse::<u32>() == Ok(VERSION) => {}
            _ => return Err(Error::format(format!("unrecognized model header `{header}`"))),
        }
        let geometry = field(&mut lines, "geometry")?;
        let geometry = PotentialKind::parse(geometry)
            .ok_or_else(|| Error::format(format!("unknown geometry `{geometry}`")))?;
        let strength = num::<f64>(field(&mut lines, "strength")?)?;
        let channels = field(&mut lines, "channels")?
            .split(',')
            .map(|c| num::<usize>(c.trim()))
            .collect::<Result<Vec<_>>>()?;
        let kernel_size = num(field(&mut lines, "kernel_size")?)?;
        let blocks = num(field(&mut lines, "blocks")?)?;
        let bias = num::<bool>(field(&mut lines, "bias")?)?;
        let seed = num(field(&mut lines, "seed")?)?;
        let range = field(&mut lines, "inv_gamma_range")?;
        let (lo, hi) = range
            .split_once(' ')
            .ok_or_else(|| Error::format("inv_gamma_range needs two values"))?;
        let inv_gamma_range = (num(lo)?, num(hi.trim())?);
        let steps = num(field(&mut lines, "steps")?)?;
        let patch_size = num(field(&mut lines, "patch_size")?)?;
        let batch_size = num(field(&mut lines, "batch_size")?)?;
        let learning_rate = num(field(&mut lines, "learning_rate")?)?;
        let n_loss: usize = num(field(&mut lines, "loss_curve")?)?;
        let loss_curve = take_values(&mut lines, n_loss, "loss_curve")?;
        let n_weights: usize = num(field(&mut lines, "weights")?)?;
        let weights = take_values(&mut lines, n_weights, "weights")?;
        if lines.next() != Some("end") {
            return Err(Error::format("model file is missing its `end` marker"));
        }
        let architecture = NetworkArchitecture { channels, kernel_size, blocks, bias };
        let network = PotentialNetwork::new(architecture, weights).map_err(|e| Error::format(e.to_string()))?;
        let record = TrainingRecord {
            seed,
            inv_gamma_range,
            steps,
            patch_size,
            batch_size,
            learning_rate,
            loss_curve,
        };
        let mut model = ScoreDenoiserModel::new(network, geometry, record);
        model.set_strength(strength).map_err(|e| Error::format(e.to_string()))?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

fn field<'a>(lines: &mut impl Iterator<Item = &'a str>, name: &str) -> Result<&'a str> {
    let line = lines.next().ok_or_else(|| Error::format(format!("missing `{name}`")))?;
    match line.split_once(' ') {
        Some((k, v)) if k == name => Ok(v.trim()),
        _ => Err(Error::format(format!("expected `{name}`, found `{line}`"))),
    }
}

fn num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::format(format!("cannot parse `{s}`")))
}

fn take_values<'a>(lines: &mut impl Iterator<Item = &'a str>, n: usize, what: &str) -> Result<Vec<f64>> {
    (0..n)
        .map(|i| {
            let l = lines
                .next()
                .ok_or_else(|| Error::format(format!("{what}: expected {n} values, found {i}")))?;
            num(l)
        })
        .collect()
}
