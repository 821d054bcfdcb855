//! Named scenarios. Horizons marked as regression values are frozen in
//! `crates/core/fixtures/regression.toml`, which records how each was found.

use crate::config::{ConfigError, ExperimentConfig};

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub text: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "packet-hits-detector",
        description: "1D, reflecting left wall (beta = 0), absorbing right wall (beta = 1), rightward packet",
        text: "\
domain.kind = 1d
domain.a = 0
domain.b = 40
domain.n = 399
time.t_final = 30
boundary.kind = robin
boundary.beta.left = 0
boundary.beta.right = 1
packet.center = 20
packet.sigma = 2
packet.momentum = 1
output.flux = flux.csv
",
    },
    Preset {
        name: "full-envelope",
        description: "2D unit square, beta = 1 on every boundary node, packet at rest in the centre",
        text: "\
domain.kind = 2d
domain.lx = 1
domain.ly = 1
domain.nx = 15
domain.ny = 15
time.t_final = 1
boundary.kind = robin
boundary.beta = 1
packet.center = 0.5,0.5
packet.sigma = 0.1
packet.momentum = 0,0
",
    },
    Preset {
        name: "dirichlet",
        description: "1D hard walls: nothing is detected",
        text: "\
domain.kind = 1d
domain.a = 0
domain.b = 1
domain.n = 99
time.t_final = 0.05
boundary.kind = dirichlet
packet.center = 0.5
packet.sigma = 0.05
packet.momentum = 40
",
    },
    Preset {
        name: "both-ends",
        description: "1D interval of length 2 with beta = 1 at both ends",
        text: "\
domain.kind = 1d
domain.a = 0
domain.b = 2
domain.n = 99
time.t_final = 3
boundary.kind = robin
boundary.beta = 1
packet.center = 1
packet.sigma = 0.2
packet.momentum = 5
",
    },
    Preset {
        name: "hardy-2d",
        description: "2D, beta = min(1/|x - y|, 1/h) around the middle of the bottom edge",
        text: "\
domain.kind = 2d
domain.lx = 1
domain.ly = 1
domain.nx = 15
domain.ny = 15
time.t_final = 0.5
boundary.kind = hardy
boundary.hardy.y = 7
packet.center = 0.5,0.3
packet.sigma = 0.1
packet.momentum = 0,-10
output.flux = flux.csv
",
    },
    Preset {
        name: "povm-absorber",
        description: "1D, 8 unknowns, beta = 1 at both ends; small enough for the dense detection-time POVM",
        text: "\
domain.kind = 1d
domain.a = 0
domain.b = 1
domain.n = 8
time.t_final = 30
boundary.kind = robin
boundary.beta = 1
packet.center = 0.5
packet.sigma = 0.15
packet.momentum = 0
",
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

pub fn load(name: &str) -> Result<ExperimentConfig, ConfigError> {
    let p = find(name).ok_or_else(|| {
        let known: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
        ConfigError::Invalid(format!("unknown preset `{name}` (known: {})", known.join(", ")))
    })?;
    ExperimentConfig::parse(p.text)
}
