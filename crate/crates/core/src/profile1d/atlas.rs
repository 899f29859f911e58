//! Multistart search for the minimisers and their clustering.

use super::{minimize, MinimizeOptions, Profile, ProfileError};
use crate::grid::Grid1D;
use crate::potential::{HypothesisReport, Potential};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Bump amplitudes in `q₂` cycled through by the seed schedule.
const AMPLITUDES: [f64; 9] = [0.0, 0.25, -0.25, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0];

/// Radii at which the action gap away from the minimisers is measured.
pub const NU_RADII: [f64; 5] = [0.05, 0.1, 0.25, 0.5, 1.0];

#[derive(Debug, Clone)]
pub struct AtlasOptions {
    pub lx: f64,
    pub n: usize,
    pub n_starts: usize,
    pub seed: u64,
    pub el_tol: f64,
    pub max_iter: usize,
    /// Converged runs within this much of the best action count as minimisers.
    pub atlas_window: f64,
    /// Single-linkage threshold in `L²`.
    pub cluster_eps: f64,
    pub snapshot_every: usize,
}

impl Default for AtlasOptions {
    fn default() -> Self {
        Self {
            lx: 20.0,
            n: 2001,
            n_starts: 10,
            seed: 20_240_601,
            el_tol: 1e-8,
            max_iter: 20_000,
            atlas_window: 1e-6,
            cluster_eps: 0.2,
            snapshot_every: 25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sublevel {
    Plus,
    Minus,
    Neither,
}

#[derive(Debug, Clone)]
pub struct Cluster {
    /// `Plus`/`Minus` when (*) holds, `Neither` otherwise.
    pub label: Sublevel,
    pub representative: Profile,
    pub action: f64,
    pub residual: f64,
    /// Seed indices of the members.
    pub members: Vec<usize>,
    /// Largest `L²` distance from a member to the representative.
    pub spread: f64,
}

/// Per-start record, in seed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSummary {
    pub index: usize,
    pub amplitude: f64,
    pub width: f64,
    pub action: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct HeteroclinicAtlas {
    pub grid: Grid1D,
    pub m: f64,
    pub m_star: f64,
    pub d0: f64,
    pub star_holds: bool,
    pub lambda0: f64,
    /// Lowest converged action above the window, minus `m`.
    pub measured_gap: Option<f64>,
    pub clusters: Vec<Cluster>,
    /// `(r, min V − m)` over explored profiles at `H¹` distance `≥ r` from the minimisers.
    pub nu_measured: Vec<(f64, Option<f64>)>,
    pub starts: Vec<StartSummary>,
}

impl HeteroclinicAtlas {
    pub fn minimizers(&self) -> impl Iterator<Item = &Profile> {
        self.clusters.iter().map(|c| &c.representative)
    }

    pub fn cluster(&self, label: Sublevel) -> Option<&Cluster> {
        self.clusters.iter().find(|c| c.label == label)
    }

    pub fn plus(&self) -> Option<&Profile> {
        self.cluster(Sublevel::Plus).map(|c| &c.representative)
    }

    pub fn minus(&self) -> Option<&Profile> {
        self.cluster(Sublevel::Minus).map(|c| &c.representative)
    }

    /// Representative distance between the two components (`5·d₀`).
    pub fn separation(&self) -> Option<f64> {
        Some(self.plus()?.l2_distance(self.minus()?))
    }

    /// `(M⁻, M⁺)` representatives; for a single cluster both are the same.
    pub fn endpoints(&self) -> (&Profile, &Profile) {
        match (self.minus(), self.plus()) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                let q = &self.clusters[0].representative;
                (q, q)
            }
        }
    }
}

fn seed_profile(grid: Grid1D, amplitude: f64, width: f64) -> Profile {
    Profile::from_fn(grid, |x| {
        [x.clamp(-1.0, 1.0), amplitude * (-0.5 * (x / width).powi(2)).exp()]
    })
}

struct Run {
    summary: StartSummary,
    profile: Profile,
    snapshots: Vec<Profile>,
}

/// Multistart minimisation, clustering and the (*) verdict.
pub fn build_atlas(
    pot: &Potential,
    hyp: &HypothesisReport,
    opts: &AtlasOptions,
) -> Result<HeteroclinicAtlas, ProfileError> {
    if opts.n_starts < 8 {
        return Err(ProfileError::Precondition(format!(
            "need at least 8 starts, got {}",
            opts.n_starts
        )));
    }
    let grid = Grid1D::new(opts.lx, opts.n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let schedule: Vec<(f64, f64)> = (0..opts.n_starts)
        .map(|i| (AMPLITUDES[i % AMPLITUDES.len()], rng.gen_range(0.5..1.5)))
        .collect();
    let mopts = MinimizeOptions {
        el_tol: opts.el_tol,
        max_iter: opts.max_iter,
        snapshot_every: opts.snapshot_every,
        ..MinimizeOptions::default()
    };

    let runs: Vec<Result<Run, ProfileError>> = schedule
        .par_iter()
        .enumerate()
        .map(|(index, &(amplitude, width))| {
            let seed = seed_profile(grid, amplitude, width);
            let res = minimize(&seed, pot, &mopts)?;
            log::debug!(
                "start {index}: amplitude {amplitude}, action {:.12}, residual {:.2e}, {} iterations",
                res.action,
                res.residual,
                res.iterations
            );
            Ok(Run {
                summary: StartSummary {
                    index,
                    amplitude,
                    width,
                    action: res.action,
                    residual: res.residual,
                    iterations: res.iterations,
                    converged: res.converged,
                },
                profile: res.profile,
                snapshots: res.snapshots,
            })
        })
        .collect();
    let runs: Vec<Run> = runs.into_iter().collect::<Result<_, _>>()?;

    let converged: Vec<&Run> = runs.iter().filter(|r| r.summary.converged).collect();
    if converged.is_empty() {
        return Err(ProfileError::Atlas("no multistart run converged".into()));
    }
    let m = converged
        .iter()
        .map(|r| r.summary.action)
        .fold(f64::INFINITY, f64::min);
    let (inside, outside): (Vec<&Run>, Vec<&Run>) = converged
        .iter()
        .partition(|r| r.summary.action <= m + opts.atlas_window);
    let measured_gap = outside
        .iter()
        .map(|r| r.summary.action - m)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))));

    // single linkage via union-find, in seed order
    let k = inside.len();
    let mut parent: Vec<usize> = (0..k).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..k {
        for j in i + 1..k {
            if inside[i].profile.l2_distance(&inside[j].profile) <= opts.cluster_eps {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut roots: Vec<usize> = Vec::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..k {
        let r = find(&mut parent, i);
        match roots.iter().position(|&x| x == r) {
            Some(p) => groups[p].push(i),
            None => {
                roots.push(r);
                groups.push(vec![i]);
            }
        }
    }
    let mut clusters: Vec<Cluster> = groups
        .iter()
        .map(|g| {
            let best = *g
                .iter()
                .min_by(|&&a, &&b| {
                    inside[a]
                        .summary
                        .action
                        .total_cmp(&inside[b].summary.action)
                        .then(a.cmp(&b))
                })
                .expect("groups are non-empty");
            let rep = inside[best].profile.clone();
            let spread = g
                .iter()
                .map(|&i| inside[i].profile.l2_distance(&rep))
                .fold(0.0, f64::max);
            Cluster {
                label: Sublevel::Neither,
                action: inside[best].summary.action,
                residual: inside[best].summary.residual,
                representative: rep,
                members: g.iter().map(|&i| inside[i].summary.index).collect(),
                spread,
            }
        })
        .collect();

    let star_holds = clusters.len() == 2;
    let mut d0 = 0.0;
    if star_holds {
        // Plus is the component with q₂(0) > 0
        clusters.sort_by(|a, b| b.representative.half()[0][1].total_cmp(&a.representative.half()[0][1]));
        clusters[0].label = Sublevel::Plus;
        clusters[1].label = Sublevel::Minus;
        d0 = clusters[0].representative.l2_distance(&clusters[1].representative) / 5.0;
    }
    let gap_cap = measured_gap.unwrap_or(f64::INFINITY);
    let m_star = m + 0.5 * (0.5 * hyp.lambda0).min(gap_cap);

    let reps: Vec<&Profile> = clusters.iter().map(|c| &c.representative).collect();
    let mut explored: Vec<(f64, f64)> = Vec::new();
    for r in &runs {
        for p in r.snapshots.iter().chain(std::iter::once(&r.profile)) {
            let dist = reps.iter().map(|q| p.h1_distance(q)).fold(f64::INFINITY, f64::min);
            let v = p.cached_action().unwrap_or_else(|| p.action(pot));
            explored.push((dist, v - m));
        }
    }
    let nu_measured = NU_RADII
        .iter()
        .map(|&r| {
            let v = explored
                .iter()
                .filter(|(d, _)| *d >= r)
                .map(|(_, v)| *v)
                .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))));
            (r, v)
        })
        .collect();

    Ok(HeteroclinicAtlas {
        grid,
        m,
        m_star,
        d0,
        star_holds,
        lambda0: hyp.lambda0,
        measured_gap,
        clusters,
        nu_measured,
        starts: runs.into_iter().map(|r| r.summary).collect(),
    })
}

/// Membership of `q` in the sublevel components `𝒱_c^±`.
pub fn classify_sublevel(atlas: &HeteroclinicAtlas, q: &Profile, c: f64, pot: &Potential) -> Result<Sublevel, ProfileError> {
    if !atlas.star_holds {
        return Err(ProfileError::Precondition(
            "sublevel components need two minimiser clusters".into(),
        ));
    }
    let slack = 1e-12 * atlas.m.abs().max(1.0);
    if c < atlas.m - slack || c > atlas.m_star + slack {
        return Err(ProfileError::Precondition(format!(
            "level {c} outside [m, m*] = [{}, {}]",
            atlas.m, atlas.m_star
        )));
    }
    if q.grid() != &atlas.grid {
        return Err(ProfileError::Precondition("profile grid differs from the atlas grid".into()));
    }
    if q.action(pot) > c {
        return Ok(Sublevel::Neither);
    }
    let near = |label| {
        atlas
            .cluster(label)
            .is_some_and(|cl| q.h1_distance(&cl.representative) <= atlas.d0)
    };
    match (near(Sublevel::Plus), near(Sublevel::Minus)) {
        (true, true) => Err(ProfileError::AtlasInconsistency),
        (true, false) => Ok(Sublevel::Plus),
        (false, true) => Ok(Sublevel::Minus),
        (false, false) => Ok(Sublevel::Neither),
    }
}
