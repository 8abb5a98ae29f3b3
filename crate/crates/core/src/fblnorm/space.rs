use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::GeneratorId;
use crate::scalar::Scalar;

/// Admissibility tolerance on vertex sums.
pub const ADMISSIBLE_TOL: f64 = 1e-12;

/// Predual ball given by its vertex set. The cross-polytope is kept symbolic
/// so that large generator sets stay cheap.
#[derive(Debug, Clone, PartialEq)]
pub enum Ball {
    /// Vertices `±e_a` (the free Banach lattice over the generators).
    L1,
    Vertices(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceJson", into = "SpaceJson")]
pub struct AdmissibilitySpace {
    generators: Vec<GeneratorId>,
    ball: Ball,
    /// One representative of each `±v` vertex pair.
    pairs: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BallJson {
    Named(String),
    List(Vec<Vec<f64>>),
}

#[derive(Serialize, Deserialize)]
struct SpaceJson {
    generators: Vec<GeneratorId>,
    ball_vertices: BallJson,
}

impl TryFrom<SpaceJson> for AdmissibilitySpace {
    type Error = Error;
    fn try_from(j: SpaceJson) -> Result<Self> {
        match j.ball_vertices {
            BallJson::Named(s) if s == "l1" => AdmissibilitySpace::l1(j.generators),
            BallJson::Named(s) if s == "linf" => AdmissibilitySpace::linf(j.generators),
            BallJson::Named(s) => Err(Error::InvalidSpace(format!("unknown ball {s:?}"))),
            BallJson::List(v) => AdmissibilitySpace::from_vertices(j.generators, v),
        }
    }
}

impl From<AdmissibilitySpace> for SpaceJson {
    fn from(s: AdmissibilitySpace) -> Self {
        SpaceJson {
            generators: s.generators,
            ball_vertices: match s.ball {
                Ball::L1 => BallJson::Named("l1".into()),
                Ball::Vertices(v) => BallJson::List(v),
            },
        }
    }
}

/// Largest generator count accepted for the `{±1}^n` vertex list.
pub const LINF_MAX_GENERATORS: usize = 16;

fn check_generators(gens: &[GeneratorId]) -> Result<()> {
    if gens.is_empty() {
        return Err(Error::InvalidSpace("no generators".into()));
    }
    let mut sorted: Vec<&GeneratorId> = gens.iter().collect();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != gens.len() {
        return Err(Error::InvalidSpace("repeated generator".into()));
    }
    Ok(())
}

fn rank(rows: &[Vec<f64>], d: usize) -> usize {
    let mut m: Vec<Vec<f64>> = rows.to_vec();
    let mut r = 0;
    for c in 0..d {
        let Some(p) = (r..m.len()).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())) else {
            break;
        };
        if m[p][c].abs() < 1e-12 {
            continue;
        }
        m.swap(r, p);
        for i in r + 1..m.len() {
            let f = m[i][c] / m[r][c];
            for k in c..d {
                m[i][k] -= f * m[r][k];
            }
        }
        r += 1;
    }
    r
}

impl AdmissibilitySpace {
    pub fn l1(generators: Vec<GeneratorId>) -> Result<Self> {
        check_generators(&generators)?;
        let d = generators.len();
        let pairs = (0..d)
            .map(|a| {
                let mut v = vec![0.0; d];
                v[a] = 1.0;
                v
            })
            .collect();
        Ok(AdmissibilitySpace {
            generators,
            ball: Ball::L1,
            pairs,
        })
    }

    /// Vertices `{±1}^n` of the cube, i.e. the predual ball of `ℓ_∞^n`.
    pub fn linf(generators: Vec<GeneratorId>) -> Result<Self> {
        check_generators(&generators)?;
        let d = generators.len();
        if d > LINF_MAX_GENERATORS {
            return Err(Error::InvalidSpace(format!(
                "cube vertex list needs at most {LINF_MAX_GENERATORS} generators"
            )));
        }
        let vertices: Vec<Vec<f64>> = (0u32..(1 << d))
            .map(|mask| {
                (0..d)
                    .map(|k| if mask & (1 << k) != 0 { -1.0 } else { 1.0 })
                    .collect()
            })
            .collect();
        Self::from_vertices(generators, vertices)
    }

    /// Validates that the list is nonempty, symmetric and spanning.
    pub fn from_vertices(generators: Vec<GeneratorId>, vertices: Vec<Vec<f64>>) -> Result<Self> {
        check_generators(&generators)?;
        let d = generators.len();
        if vertices.is_empty() {
            return Err(Error::InvalidSpace("empty vertex list".into()));
        }
        for v in &vertices {
            if v.len() != d {
                return Err(Error::Dimension(format!(
                    "vertex of width {} for {d} generators",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidSpace("non-finite vertex".into()));
            }
            if v.iter().all(|&x| x == 0.0) {
                return Err(Error::InvalidSpace("zero vertex".into()));
            }
            let neg: Vec<f64> = v.iter().map(|x| -x).collect();
            if !vertices.contains(&neg) {
                return Err(Error::InvalidSpace(format!("vertex {v:?} has no antipode")));
            }
        }
        if rank(&vertices, d) < d {
            return Err(Error::InvalidSpace("vertices do not span".into()));
        }
        let mut pairs: Vec<Vec<f64>> = Vec::new();
        for v in &vertices {
            let neg: Vec<f64> = v.iter().map(|x| -x).collect();
            if !pairs.contains(v) && !pairs.contains(&neg) {
                pairs.push(v.clone());
            }
        }
        Ok(AdmissibilitySpace {
            generators,
            ball: Ball::Vertices(vertices),
            pairs,
        })
    }

    pub fn generators(&self) -> &[GeneratorId] {
        &self.generators
    }

    pub fn dim(&self) -> usize {
        self.generators.len()
    }

    pub fn ball(&self) -> &Ball {
        &self.ball
    }

    pub fn is_l1(&self) -> bool {
        self.ball == Ball::L1
    }

    /// Full vertex list (both signs).
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        match &self.ball {
            Ball::Vertices(v) => v.clone(),
            Ball::L1 => self
                .pairs
                .iter()
                .flat_map(|v| [v.clone(), v.iter().map(|x| -x).collect()])
                .collect(),
        }
    }

    /// One vertex per antipodal pair; constraint rows only need these.
    pub fn vertex_pairs(&self) -> &[Vec<f64>] {
        &self.pairs
    }

    /// `Σ_i |<x_i, v>|` for each vertex pair.
    pub fn vertex_sums<S: Scalar>(&self, points: &[Vec<S>]) -> Result<Vec<S>> {
        let d = self.dim();
        if let Some(p) = points.iter().find(|p| p.len() != d) {
            return Err(Error::Dimension(format!(
                "dual point of width {} for {d} generators",
                p.len()
            )));
        }
        Ok(match self.ball {
            Ball::L1 => (0..d)
                .map(|a| points.iter().fold(S::zero(), |acc, p| acc + p[a].abs()))
                .collect(),
            Ball::Vertices(_) => self
                .pairs
                .iter()
                .map(|v| {
                    let v: Vec<S> = v.iter().map(|&x| S::from_f64(x)).collect();
                    points
                        .iter()
                        .fold(S::zero(), |acc, p| acc + crate::scalar::dot(p, &v).abs())
                })
                .collect(),
        })
    }
}

/// Result of an admissibility test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub admissible: bool,
    /// Index into [`AdmissibilitySpace::vertex_pairs`] of the largest sum.
    pub worst_vertex: Option<usize>,
    pub worst_sum: f64,
}

/// True iff every vertex sum is at most `1 + 1e-12` (exactly `1` in rational mode).
pub fn admissible<S: Scalar>(points: &[Vec<S>], space: &AdmissibilitySpace) -> Result<AdmissibilityReport> {
    let sums = space.vertex_sums(points)?;
    let mut worst: Option<(usize, S)> = None;
    for (i, s) in sums.into_iter().enumerate() {
        if worst.as_ref().map_or(true, |(_, w)| s > *w) {
            worst = Some((i, s));
        }
    }
    let (idx, sum) = match worst {
        Some((i, s)) => (Some(i), s),
        None => (None, S::zero()),
    };
    let ok = if S::EXACT {
        sum <= S::one()
    } else {
        sum.to_f64() <= 1.0 + ADMISSIBLE_TOL
    };
    Ok(AdmissibilityReport {
        admissible: ok,
        worst_vertex: if points.is_empty() { None } else { idx },
        worst_sum: sum.to_f64(),
    })
}
