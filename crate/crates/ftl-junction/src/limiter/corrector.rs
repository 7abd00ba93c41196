use serde::Serialize;

use crate::error::{Error, Result};
use crate::homog::EffectiveModel;
use crate::micro_sim::{theta, Ghost, SimConfig, Simulator, WindowState};
use crate::model::{ModelSpec, Realization, VelocityLaw};

/// Corrector sequence anchored at `anchor`: free-road spacings at the
/// steady speeds, accumulated backward on the incoming road and along
/// same-route chains forward.
#[derive(Debug, Clone, Serialize)]
pub struct CorrectorSequence {
    pub anchor: i64,
    pub lo: i64,
    pub values: Vec<f64>,
}

impl CorrectorSequence {
    pub fn hi(&self) -> i64 {
        self.lo + self.values.len() as i64 - 1
    }

    pub fn get(&self, i: i64) -> f64 {
        self.values[(i - self.lo) as usize]
    }
}

fn spacing_at(spec: &ModelSpec, z: usize, road: usize, speed: f64) -> Result<f64> {
    spec.profile(z, road).inverse(speed)
}

/// Builds `W_i` for `i` in `[anchor - n, anchor + n]`.
pub fn build_corrector(
    real: &Realization,
    spec: &ModelSpec,
    eff: &EffectiveModel,
    anchor: i64,
    n: i64,
) -> Result<CorrectorSequence> {
    let (lo, hi) = (anchor - n, anchor + n);
    if lo < real.lo() || hi > real.ext_hi() {
        return Err(Error::WindowUnderflow {
            index: if lo < real.lo() { lo } else { hi },
            lo: real.lo(),
            hi: real.ext_hi(),
        });
    }
    let speeds = eff.steady_speeds();
    let mut w = vec![0.0; (hi - lo + 1) as usize];
    let at = |i: i64| (i - lo) as usize;
    for i in (lo..anchor).rev() {
        w[at(i)] = w[at(i + 1)] - spacing_at(spec, real.type_of(i), 0, speeds[0])?;
    }
    let roads = spec.roads;
    let mut last: Vec<Option<i64>> = vec![None; roads + 1];
    for i in anchor..=hi {
        let k = real.route_of(i);
        if i > anchor {
            w[at(i)] = match last[k] {
                Some(p) => w[at(p)] + spacing_at(spec, real.type_of(p), k, speeds[k])?,
                // The previous same-route vehicle is behind the anchor.
                None => 0.0,
            };
        }
        last[k] = Some(i);
    }
    Ok(CorrectorSequence { anchor, lo, values: w })
}

/// Pairs violating `|W_i - W_j| <= e_max |i - j|` among pairs on the same
/// route or with one index at or behind the anchor.
pub fn corrector_lipschitz_violations(seq: &CorrectorSequence, real: &Realization, e_max: f64) -> Vec<(i64, i64)> {
    let mut bad = Vec::new();
    let tol = 1e-9 * e_max;
    for i in seq.lo..=seq.hi() {
        let (wi, ki) = (seq.get(i), real.route_of(i));
        for j in i + 1..=seq.hi() {
            if i > seq.anchor && real.route_of(j) != ki {
                continue;
            }
            if (seq.get(j) - wi).abs() > e_max * (j - i) as f64 + tol {
                bad.push((i, j));
            }
        }
    }
    bad
}

/// Crossing counts of the system whose vehicles from index `m` on are
/// replaced by the slowest type of their route and packed at the optimal
/// spacing of that route.
pub fn truncated_theta(
    spec: &ModelSpec,
    law: &dyn VelocityLaw,
    eff: &EffectiveModel,
    real: &Realization,
    m: i64,
    times: &[f64],
) -> Result<Vec<u64>> {
    if m < 2 || m <= real.lo() {
        return Err(Error::Precondition(format!("truncation index {m} outside the window")));
    }
    let spacings = eff.spacings();
    let speeds = eff.steady_speeds();
    let tail = if m <= real.ext_hi() { real.with_slow_tail(spec, m) } else { real.clone() };
    let mut counts = vec![0i64; spec.roads + 1];
    let mut datum = |i: i64| -> (f64, f64) {
        if i <= 0 {
            return (spacings[0] * i as f64, speeds[0]);
        }
        let k = tail.route_of(i);
        if i < m {
            return (spacings[k] * i as f64, speeds[k]);
        }
        counts[k] += 1;
        let e = spacings[k];
        let z = tail.type_of(i);
        (e * (m - 1) as f64 + e * counts[k] as f64, spec.profile(z, k).eval(e))
    };
    let all: Vec<(f64, f64)> = (tail.lo()..=tail.ext_hi()).map(&mut datum).collect();
    let n = (tail.hi() - tail.lo() + 1) as usize;
    let positions = all[..n].iter().map(|p| p.0).collect();
    let ghosts = all[n..].iter().map(|&(start, speed)| Ghost { start, speed }).collect();
    let mut state = WindowState::new(&tail, positions, ghosts)?;
    let sim = Simulator::new(law, &tail, spec, SimConfig::for_law(law, spec))?;
    let mut out = Vec::with_capacity(times.len());
    sim.run(&mut state, times, |s| {
        out.push(theta(s)?);
        Ok(())
    })?;
    Ok(out)
}
