//! JSON model files and their conversion to engine models.

use semirep::models::{Atom, DiscreteModel, JumpMeasure, LevyTriplet, MeasureKind, Truncation, TruncationSpec};
use semirep::pricing::MargrabeModel;
use semirep::repfn::text::parse_repfn;
use semirep::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelFile {
    Levy(LevyFile),
    Discrete(DiscreteFile),
    Margrabe(MargrabeFile),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevyFile {
    pub dim: usize,
    pub b: Vec<f64>,
    pub c: Vec<Vec<f64>>,
    /// One name per component: `zero`, `identity` or `unit_clip`.
    pub truncation: Vec<String>,
    #[serde(default)]
    pub jumps: Vec<JumpFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpFile {
    Atoms {
        atoms: Vec<AtomFile>,
    },
    GaussianPush {
        lambda: f64,
        mean: Vec<f64>,
        cov: Vec<Vec<f64>>,
    },
    /// Image of the sum of `base` under `map`, written in the s-expression syntax.
    Image {
        base: Vec<JumpFile>,
        map: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomFile {
    pub x: Vec<f64>,
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteFile {
    pub support: Vec<SupportPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportPoint {
    pub x: Vec<f64>,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MargrabeFile {
    pub sigma1_sq: f64,
    pub sigma12: f64,
    pub sigma2_sq: f64,
    #[serde(default)]
    pub jump_intensity: f64,
    #[serde(default)]
    pub jump_mean: [f64; 2],
    #[serde(default)]
    pub jump_cov: [[f64; 2]; 2],
    #[serde(default)]
    pub defaults: Vec<AtomFile>,
    pub s1: f64,
    pub s2: f64,
    pub maturity: f64,
}

/// A validated engine model.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Levy(LevyTriplet),
    Discrete(DiscreteModel),
    Margrabe(MargrabeModel),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Levy(_) => "levy",
            Model::Discrete(_) => "discrete",
            Model::Margrabe(_) => "margrabe",
        }
    }
}

fn to_atoms(a: &[AtomFile]) -> Vec<Atom> {
    a.iter()
        .map(|a| Atom {
            point: a.x.clone(),
            intensity: a.intensity,
        })
        .collect()
}

fn from_atoms(a: &[Atom]) -> Vec<AtomFile> {
    a.iter()
        .map(|a| AtomFile {
            x: a.point.clone(),
            intensity: a.intensity,
        })
        .collect()
}

fn measure(dim: usize, parts: &[JumpFile]) -> Result<JumpMeasure> {
    let mut out = Vec::with_capacity(parts.len());
    for p in parts {
        out.push(match p {
            JumpFile::Atoms { atoms } => JumpMeasure::atoms(dim, to_atoms(atoms))?,
            JumpFile::GaussianPush { lambda, mean, cov } => {
                JumpMeasure::gaussian_push(*lambda, mean.clone(), cov.clone())?
            }
            JumpFile::Image { base, map } => {
                let map = parse_repfn(map)?;
                JumpMeasure::image(measure(map.input_dim(), base)?, map)?
            }
        });
    }
    let m = match out.len() {
        0 => JumpMeasure::none(dim),
        1 => out.pop().unwrap(),
        _ => JumpMeasure::sum(dim, out)?,
    };
    if m.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: m.dim(),
        });
    }
    Ok(m)
}

fn jump_parts(m: &JumpMeasure, out: &mut Vec<JumpFile>) {
    match m.kind() {
        MeasureKind::Atoms(a) if a.is_empty() => {}
        MeasureKind::Atoms(a) => out.push(JumpFile::Atoms { atoms: from_atoms(a) }),
        MeasureKind::GaussianPush(g) => out.push(JumpFile::GaussianPush {
            lambda: g.intensity(),
            mean: g.mean().to_vec(),
            cov: g.cov().to_vec(),
        }),
        MeasureKind::Sum(parts) => parts.iter().for_each(|p| jump_parts(p, out)),
        MeasureKind::Image { base, map } => {
            let mut b = Vec::new();
            jump_parts(base, &mut b);
            out.push(JumpFile::Image {
                base: b,
                map: map.to_string(),
            });
        }
    }
}

impl ModelFile {
    pub fn parse(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_model(&self) -> Result<Model> {
        match self {
            ModelFile::Levy(f) => {
                let h = f
                    .truncation
                    .iter()
                    .map(|s| Truncation::from_name(s))
                    .collect::<Result<Vec<_>>>()?;
                let t = LevyTriplet::new(
                    f.b.clone(),
                    f.c.clone(),
                    measure(f.dim, &f.jumps)?,
                    TruncationSpec::new(h),
                )?;
                if t.dim() != f.dim {
                    return Err(Error::DimensionMismatch {
                        expected: f.dim,
                        got: t.dim(),
                    });
                }
                Ok(Model::Levy(t))
            }
            ModelFile::Discrete(f) => {
                let dim = f.support.first().map_or(0, |s| s.x.len());
                let support = f.support.iter().map(|s| (s.x.clone(), s.p)).collect();
                Ok(Model::Discrete(DiscreteModel::new(dim, support)?))
            }
            ModelFile::Margrabe(f) => {
                let mm = MargrabeModel {
                    sigma1_sq: f.sigma1_sq,
                    sigma12: f.sigma12,
                    sigma2_sq: f.sigma2_sq,
                    jump_intensity: f.jump_intensity,
                    jump_mean: f.jump_mean,
                    jump_cov: f.jump_cov,
                    default_atoms: to_atoms(&f.defaults),
                    s1: f.s1,
                    s2: f.s2,
                    maturity: f.maturity,
                };
                mm.validate()?;
                Ok(Model::Margrabe(mm))
            }
        }
    }

    pub fn from_model(m: &Model) -> Self {
        match m {
            Model::Levy(t) => {
                let mut jumps = Vec::new();
                jump_parts(t.jumps(), &mut jumps);
                ModelFile::Levy(LevyFile {
                    dim: t.dim(),
                    b: t.drift().to_vec(),
                    c: t.diffusion().to_vec(),
                    truncation: t
                        .truncation()
                        .components()
                        .iter()
                        .map(|h| h.name().to_string())
                        .collect(),
                    jumps,
                })
            }
            Model::Discrete(d) => ModelFile::Discrete(DiscreteFile {
                support: d
                    .support()
                    .iter()
                    .map(|(x, p)| SupportPoint { x: x.clone(), p: *p })
                    .collect(),
            }),
            Model::Margrabe(mm) => ModelFile::Margrabe(MargrabeFile {
                sigma1_sq: mm.sigma1_sq,
                sigma12: mm.sigma12,
                sigma2_sq: mm.sigma2_sq,
                jump_intensity: mm.jump_intensity,
                jump_mean: mm.jump_mean,
                jump_cov: mm.jump_cov,
                defaults: from_atoms(&mm.default_atoms),
                s1: mm.s1,
                s2: mm.s2,
                maturity: mm.maturity,
            }),
        }
    }
}
