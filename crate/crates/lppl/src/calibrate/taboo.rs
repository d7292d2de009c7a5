//! Taboo search over the nonlinear parameters.
//!
//! A systematic preliminary exploration of the slaved objective landscape:
//! moves are drawn around the current point, recently visited regions are
//! forbidden, and a pool of well-separated good points is maintained. The
//! pool — never a single point — seeds the damped least-squares refinement,
//! which would otherwise get stuck in whichever basin it started in.

use std::collections::VecDeque;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::calibrate::slaving::{eval_objective, prepare, NonlinearPoint, Prepared};
use crate::calibrate::FitConfig;
use crate::error::{Error, Result};
use crate::model::Interval;
use crate::simulate::PriceSeries;

/// Search knobs. Sized so the synthetic benchmark completes in minutes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TabooConfig {
    /// Number of move iterations.
    pub iterations: usize,
    /// Candidate moves evaluated per iteration.
    pub neighborhood: usize,
    /// Length of the tabu list of recently visited points.
    pub tabu_len: usize,
    /// Move scale per nonlinear parameter (tc, m, omega, phi), as a fraction
    /// of each bound width.
    pub step_scales: [f64; 4],
    /// Size of the retained candidate pool.
    pub pool: usize,
    pub seed: u64,
}

impl Default for TabooConfig {
    fn default() -> Self {
        TabooConfig {
            iterations: 500,
            neighborhood: 20,
            tabu_len: 50,
            step_scales: [0.1; 4],
            pool: 30,
            seed: 0,
        }
    }
}

impl TabooConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.neighborhood == 0 || self.tabu_len == 0 {
            return Err(Error::InvalidConfig(
                "taboo iterations, neighborhood and tabu length must be >= 1".into(),
            ));
        }
        // Keeping many candidates is the point of the preliminary search; a
        // pool of one would collapse it into a single local descent.
        if self.pool < 2 {
            return Err(Error::InvalidConfig(
                "taboo pool must keep at least two candidates".into(),
            ));
        }
        if self
            .step_scales
            .iter()
            .any(|&s| !(s > 0.0 && s.is_finite()))
        {
            return Err(Error::InvalidConfig(
                "taboo step scales must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A nonlinear point with its objective value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub point: NonlinearPoint,
    pub objective: f64,
}

/// Run the taboo search and return the candidate pool sorted by objective.
/// All candidates lie within bounds.
pub fn taboo_search(series: &PriceSeries, config: &FitConfig) -> Result<Vec<Candidate>> {
    config.validate(series)?;
    let prep = prepare(series)?;
    search_prepared(&prep, config, config.taboo.seed)
}

/// How many iterations without improvement trigger a restart from a fresh
/// random point, as a fraction of the iteration budget.
const DIVERSIFY_FRACTION: usize = 5;

/// Minimum pool spacing per nonlinear parameter (tc, m, omega, phi), in
/// natural units; matches the clone thresholds used when fits are
/// deduplicated after refinement.
const POOL_SEPARATION: [f64; 4] = [0.5, 0.005, 0.05, 0.05];

pub(crate) fn search_prepared(
    prep: &Prepared,
    config: &FitConfig,
    seed: u64,
) -> Result<Vec<Candidate>> {
    let dim = config.slaving.nonlinear_dim();
    let intervals: Vec<Interval> = (0..dim).map(|i| config.bounds.interval(i)).collect();
    let taboo = &config.taboo;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let evaluate = |x: &[f64]| {
        let denorm: Vec<f64> = x
            .iter()
            .zip(intervals.iter())
            .map(|(&u, iv)| iv.denormalize(u))
            .collect();
        let point = NonlinearPoint::from_slice(config.slaving, &denorm);
        (
            point,
            eval_objective(prep, &point, config.slaving, config.objective),
        )
    };

    let tabu_radius: Vec<f64> = taboo.step_scales[..dim].iter().map(|s| 0.5 * s).collect();
    let is_tabu = |x: &[f64], list: &VecDeque<Vec<f64>>| {
        list.iter().any(|entry| {
            entry
                .iter()
                .zip(x.iter())
                .zip(tabu_radius.iter())
                .all(|((&e, &c), &r)| (e - c).abs() < r)
        })
    };

    // Two pool tiers: the better half keeps the best visited points with
    // only clone-scale separation; the other half keeps the best point of
    // each basin-scale region, so candidates from different parts of the
    // space always survive into the refinement stage.
    let close_radius: Vec<f64> = POOL_SEPARATION[..dim]
        .iter()
        .zip(intervals.iter())
        .map(|(&sep, iv)| sep / iv.width())
        .collect();
    let far_radius: Vec<f64> = tabu_radius.clone();
    let best_tier = taboo.pool / 2;
    let diverse_tier = taboo.pool - best_tier;
    let within = |a: &[f64], b: &[f64], radius: &[f64]| {
        a.iter()
            .zip(b.iter())
            .zip(radius.iter())
            .all(|((&p, &c), &r)| (p - c).abs() < r)
    };
    let mut best_pool: Vec<(f64, Vec<f64>, NonlinearPoint)> = Vec::with_capacity(best_tier + 1);
    let mut diverse_pool: Vec<(f64, Vec<f64>, NonlinearPoint)> =
        Vec::with_capacity(diverse_tier + 1);
    let offer_tier = |pool: &mut Vec<(f64, Vec<f64>, NonlinearPoint)>,
                      capacity: usize,
                      radius: &[f64],
                      obj: f64,
                      x: &[f64],
                      point: NonlinearPoint| {
        if !obj.is_finite() || capacity == 0 {
            return;
        }
        if let Some(slot) = pool.iter_mut().find(|(_, px, _)| within(px, x, radius)) {
            if obj < slot.0 {
                *slot = (obj, x.to_vec(), point);
            }
            return;
        }
        pool.push((obj, x.to_vec(), point));
        if pool.len() > capacity {
            let worst = pool
                .iter()
                .enumerate()
                .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
                .map(|(i, _)| i)
                .expect("nonempty pool");
            pool.swap_remove(worst);
        }
    };
    let offer = |best: &mut Vec<(f64, Vec<f64>, NonlinearPoint)>,
                 diverse: &mut Vec<(f64, Vec<f64>, NonlinearPoint)>,
                 obj: f64,
                 x: &[f64],
                 point: NonlinearPoint| {
        offer_tier(best, best_tier, &close_radius, obj, x, point);
        offer_tier(diverse, diverse_tier, &far_radius, obj, x, point);
    };

    let random_point =
        |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..dim).map(|_| rng.random::<f64>()).collect() };

    let mut current = random_point(&mut rng);
    let (mut current_point, mut current_obj) = evaluate(&current);
    offer(
        &mut best_pool,
        &mut diverse_pool,
        current_obj,
        &current,
        current_point,
    );

    let mut best_obj = current_obj;
    let mut tabu: VecDeque<Vec<f64>> = VecDeque::with_capacity(taboo.tabu_len);
    let mut stale = 0usize;
    let diversify_after = (taboo.iterations / DIVERSIFY_FRACTION).max(25);

    for _ in 0..taboo.iterations {
        let mut chosen: Option<(f64, Vec<f64>, NonlinearPoint, bool)> = None;
        let mut fallback: Option<(f64, Vec<f64>, NonlinearPoint)> = None;
        for _ in 0..taboo.neighborhood {
            let mut cand = vec![0.0; dim];
            for (d, c) in cand.iter_mut().enumerate() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *c = reflect_unit(current[d] + taboo.step_scales[d] * z);
            }
            let (point, obj) = evaluate(&cand);
            offer(&mut best_pool, &mut diverse_pool, obj, &cand, point);
            if fallback.as_ref().is_none_or(|f| obj < f.0) {
                fallback = Some((obj, cand.clone(), point));
            }
            let aspiration = obj < best_obj;
            if (aspiration || !is_tabu(&cand, &tabu)) && chosen.as_ref().is_none_or(|c| obj < c.0) {
                chosen = Some((obj, cand, point, aspiration));
            }
        }
        let (obj, cand, point, _) = match (chosen, fallback) {
            (Some(c), _) => c,
            (None, Some(f)) => (f.0, f.1, f.2, false),
            (None, None) => continue,
        };

        current = cand;
        current_point = point;
        current_obj = obj;
        if tabu.len() == taboo.tabu_len {
            tabu.pop_front();
        }
        tabu.push_back(current.clone());

        if current_obj < best_obj {
            best_obj = current_obj;
            stale = 0;
        } else {
            stale += 1;
            if stale >= diversify_after {
                current = random_point(&mut rng);
                let (p, o) = evaluate(&current);
                current_point = p;
                current_obj = o;
                offer(
                    &mut best_pool,
                    &mut diverse_pool,
                    current_obj,
                    &current,
                    current_point,
                );
                stale = 0;
            }
        }
    }
    let _ = (current_point, current_obj);

    // Merge tiers, best first, dropping diverse entries that duplicate a
    // better point at clone scale.
    let mut merged = best_pool;
    for entry in diverse_pool {
        if !merged
            .iter()
            .any(|(_, px, _)| within(px, &entry.1, &close_radius))
        {
            merged.push(entry);
        }
    }
    merged.sort_by(|a, b| a.0.total_cmp(&b.0));
    let candidates: Vec<Candidate> = merged
        .into_iter()
        .map(|(objective, _, point)| Candidate { point, objective })
        .collect();
    if candidates.is_empty() {
        return Err(Error::DegenerateSystem);
    }
    Ok(candidates)
}

/// Reflect a coordinate back into [0, 1].
fn reflect_unit(x: f64) -> f64 {
    let mut v = x.rem_euclid(2.0);
    if v > 1.0 {
        v = 2.0 - v;
    }
    v.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibrate::FitConfig;
    use crate::model::{FitBounds, LpplParams};
    use crate::simulate::generate_reference;

    fn reference() -> LpplParams {
        LpplParams {
            tc: 300.0,
            m: 0.7,
            omega: 10.0,
            phi: 1.0,
            a: 10.0,
            b: -0.1,
            c: 0.02,
        }
    }

    fn config(seed: u64) -> FitConfig {
        let mut cfg = FitConfig::for_window(1.0, 240.0);
        cfg.taboo.seed = seed;
        cfg
    }

    #[test]
    fn reflect_stays_in_unit_interval() {
        for x in [-3.7, -0.2, 0.0, 0.4, 1.0, 1.3, 2.9] {
            let r = reflect_unit(x);
            assert!((0.0..=1.0).contains(&r), "{x} -> {r}");
        }
        assert_eq!(reflect_unit(0.4), 0.4);
        assert!((reflect_unit(1.2) - 0.8).abs() < 1e-12);
        assert!((reflect_unit(-0.2) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn search_is_deterministic_under_seed() {
        let series = generate_reference(&reference(), 240, 1.0).unwrap();
        let a = taboo_search(&series, &config(3)).unwrap();
        let b = taboo_search(&series, &config(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pool_of_one_is_rejected() {
        let series = generate_reference(&reference(), 240, 1.0).unwrap();
        let mut cfg = config(0);
        cfg.taboo.pool = 1;
        assert!(matches!(
            taboo_search(&series, &cfg),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn candidates_within_bounds_and_sorted() {
        let series = generate_reference(&reference(), 240, 1.0).unwrap();
        let cfg = config(1);
        let candidates = taboo_search(&series, &cfg).unwrap();
        assert!(candidates.len() > 1);
        let bounds: &FitBounds = &cfg.bounds;
        for w in candidates.windows(2) {
            assert!(w[0].objective <= w[1].objective);
        }
        for c in &candidates {
            assert!(bounds.tc.contains(c.point.tc));
            assert!(bounds.m.contains(c.point.m));
            assert!(bounds.omega.contains(c.point.omega));
            assert!(c.objective.is_finite());
        }
    }

    #[test]
    fn beats_uniform_random_baseline() {
        use rand::Rng;
        use rand::SeedableRng;

        let series = generate_reference(&reference(), 240, 1.0).unwrap();
        let cfg = config(7);
        let best = taboo_search(&series, &cfg).unwrap()[0].objective;

        let prep = prepare(&series).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(123);
        let mut best_random = f64::INFINITY;
        for _ in 0..10_000 {
            let point = NonlinearPoint {
                tc: cfg.bounds.tc.denormalize(rng.random()),
                m: cfg.bounds.m.denormalize(rng.random()),
                omega: cfg.bounds.omega.denormalize(rng.random()),
                phi: None,
            };
            let obj = eval_objective(&prep, &point, cfg.slaving, cfg.objective);
            best_random = best_random.min(obj);
        }
        assert!(
            best < best_random,
            "taboo best {best} should beat random baseline {best_random}"
        );
    }
}
