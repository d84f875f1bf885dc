//! Binary particle swarm optimization for wrapper feature selection.
//!
//! Each particle is a bit mask over the dataset's features. Its fitness is the
//! validation F1 of a logistic regression trained on the masked columns of a
//! fixed train/validation split, penalized by the number of selected features.
//! Velocities follow the usual inertia + cognitive + social update and are
//! turned into bits through a sigmoid transfer function.

use std::collections::HashMap;
use std::sync::Mutex;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classic::{logreg_fit, logreg_predict_proba, sigmoid, LogRegConfig};
use crate::dataset::Dataset;
use crate::evaluation::{compute_metrics, confusion, stratified_holdout, DEFAULT_THRESHOLD};

#[derive(Debug, Error, PartialEq)]
pub enum PsoError {
    #[error("invalid PSO config: {0}")]
    InvalidConfig(String),
    #[error("PSO needs at least 2 features, dataset has {0}")]
    TooFewFeatures(usize),
    #[error("fitness split needs both classes on each side")]
    DegenerateSplit,
    #[error("mask has {mask} bits, dataset has {features} features")]
    MaskWidth { mask: usize, features: usize },
    #[error("inner model failed: {0}")]
    Model(String),
}

pub type Result<T, E = PsoError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub max_iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub penalty: f64,
    pub velocity_clamp: f64,
    pub seed: u64,
    /// Fraction of rows used to train the inner model; the rest score it.
    pub fitness_split: f64,
    pub inner_model: LogRegConfig,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            swarm_size: 20,
            max_iterations: 1000,
            inertia: 0.7,
            cognitive: 1.5,
            social: 2.0,
            penalty: 0.005,
            velocity_clamp: 4.0,
            seed: 0,
            fitness_split: 0.8,
            inner_model: LogRegConfig::default(),
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(PsoError::InvalidConfig(m.to_string()));
        let non_negative = |v: f64| v >= 0.0 && v.is_finite();
        if self.swarm_size < 2 {
            return err("swarm_size must be at least 2");
        }
        if self.max_iterations < 1 {
            return err("max_iterations must be at least 1");
        }
        if !(non_negative(self.inertia) && non_negative(self.cognitive) && non_negative(self.social)) {
            return err("inertia, cognitive and social must be finite and >= 0");
        }
        if !non_negative(self.penalty) {
            return err("penalty must be finite and >= 0");
        }
        if !(self.velocity_clamp > 0.0 && self.velocity_clamp.is_finite()) {
            return err("velocity_clamp must be finite and > 0");
        }
        if !(self.fitness_split > 0.0 && self.fitness_split < 1.0) {
            return err("fitness_split must be in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureMask {
    pub bits: Vec<bool>,
}

impl FeatureMask {
    pub fn empty(n: usize) -> Self {
        Self { bits: vec![false; n] }
    }

    pub fn from_indices(n: usize, indices: &[usize]) -> Self {
        let mut bits = vec![false; n];
        for &j in indices {
            bits[j] = true;
        }
        Self { bits }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.bits.len()).filter(|&j| self.bits[j]).collect()
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Names of the selected columns as a JSON array.
    pub fn to_json(&self, names: &[String]) -> String {
        let selected: Vec<&str> = self.indices().iter().map(|&j| names[j].as_str()).collect();
        serde_json::to_string(&selected).expect("string array serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessRecord {
    pub f1: f64,
    pub n_selected: usize,
    pub cost: f64,
}

/// `−(F1 − P·N)`; lower is better.
pub fn cost(f1: f64, penalty: f64, n_selected: usize) -> f64 {
    -(f1 - penalty * n_selected as f64)
}

/// The frozen train/validation split every fitness evaluation of one run
/// shares, with a memo of already scored masks.
pub struct FitnessEvaluator {
    train_x: Array2<f64>,
    train_y: Vec<u8>,
    val_x: Array2<f64>,
    val_y: Vec<u8>,
    penalty: f64,
    inner: LogRegConfig,
    memo: Mutex<HashMap<FeatureMask, FitnessRecord>>,
}

impl FitnessEvaluator {
    /// Stratified split: each class is shuffled with `config.seed` and its
    /// first `fitness_split` share goes to training.
    pub fn new(dataset: &Dataset, config: &PsoConfig) -> Result<Self> {
        let (val, train) = stratified_holdout(dataset.y(), config.fitness_split, config.seed)
            .map_err(|_| PsoError::DegenerateSplit)?;
        let x = dataset.dense_view();
        let pick = |rows: &[usize]| x.select(ndarray::Axis(0), rows);
        Ok(Self {
            train_x: pick(&train),
            train_y: train.iter().map(|&i| dataset.y()[i]).collect(),
            val_x: pick(&val),
            val_y: val.iter().map(|&i| dataset.y()[i]).collect(),
            penalty: config.penalty,
            inner: config.inner_model.clone(),
            memo: Mutex::new(HashMap::new()),
        })
    }

    pub fn n_features(&self) -> usize {
        self.train_x.ncols()
    }

    fn compute(&self, mask: &FeatureMask) -> Result<FitnessRecord> {
        let features = mask.indices();
        let f1 = if features.is_empty() {
            0.0
        } else {
            let model = logreg_fit(&self.train_x, &self.train_y, &features, &self.inner)
                .map_err(|e| PsoError::Model(e.to_string()))?;
            let scores = logreg_predict_proba(&model, &self.val_x).map_err(|e| PsoError::Model(e.to_string()))?;
            let counts = confusion(&self.val_y, &scores, DEFAULT_THRESHOLD).map_err(|e| PsoError::Model(e.to_string()))?;
            compute_metrics(counts).map_err(|e| PsoError::Model(e.to_string()))?.f1
        };
        Ok(FitnessRecord {
            f1,
            n_selected: features.len(),
            cost: cost(f1, self.penalty, features.len()),
        })
    }

    /// Fitness of `mask`, trained at most once per distinct mask.
    pub fn evaluate(&self, mask: &FeatureMask) -> Result<FitnessRecord> {
        if mask.len() != self.n_features() {
            return Err(PsoError::MaskWidth {
                mask: mask.len(),
                features: self.n_features(),
            });
        }
        if let Some(r) = self.memo.lock().expect("memo lock").get(mask) {
            return Ok(*r);
        }
        let record = self.compute(mask)?;
        self.memo.lock().expect("memo lock").insert(mask.clone(), record);
        Ok(record)
    }

    /// Evaluates a batch; masks not yet memoized are trained concurrently.
    pub fn evaluate_all(&self, masks: &[FeatureMask]) -> Result<Vec<FitnessRecord>> {
        let mut pending: Vec<&FeatureMask> = {
            let memo = self.memo.lock().expect("memo lock");
            masks.iter().filter(|m| !memo.contains_key(*m)).collect()
        };
        pending.sort_by(|a, b| a.bits.cmp(&b.bits));
        pending.dedup();
        let fresh: Vec<(FeatureMask, FitnessRecord)> = pending
            .into_par_iter()
            .map(|m| self.compute(m).map(|r| (m.clone(), r)))
            .collect::<Result<_>>()?;
        self.memo.lock().expect("memo lock").extend(fresh);
        masks.iter().map(|m| self.evaluate(m)).collect()
    }

    pub fn memo_size(&self) -> usize {
        self.memo.lock().expect("memo lock").len()
    }
}

/// One-off fitness of `mask` on the split derived from `config.seed`.
pub fn evaluate_particle(mask: &FeatureMask, dataset: &Dataset, config: &PsoConfig) -> Result<FitnessRecord> {
    FitnessEvaluator::new(dataset, config)?.evaluate(mask)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub position: FeatureMask,
    pub velocity: Vec<f64>,
    pub personal_best: FeatureMask,
    pub personal_best_cost: f64,
}

/// `w·v + c1·r1·(p_best − x) + c2·r2·(g_best − x)` per dimension with fresh
/// uniform `r1`, `r2`, clamped to `±v_max`.
pub fn velocity_update<R: Rng + ?Sized>(particle: &Particle, global_best: &FeatureMask, config: &PsoConfig, rng: &mut R) -> Vec<f64> {
    let bit = |b: bool| if b { 1.0 } else { 0.0 };
    let v_max = config.velocity_clamp;
    (0..particle.velocity.len())
        .map(|j| {
            let x = bit(particle.position.bits[j]);
            let r1: f64 = rng.random();
            let r2: f64 = rng.random();
            let v = config.inertia * particle.velocity[j]
                + config.cognitive * r1 * (bit(particle.personal_best.bits[j]) - x)
                + config.social * r2 * (bit(global_best.bits[j]) - x);
            v.clamp(-v_max, v_max)
        })
        .collect()
}

/// Bit `j` is set when a uniform draw falls below `sigmoid(v[j])`.
pub fn position_update<R: Rng + ?Sized>(velocity: &[f64], rng: &mut R) -> FeatureMask {
    FeatureMask {
        bits: velocity.iter().map(|&v| rng.random::<f64>() < sigmoid(v)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub cost: f64,
    pub f1: f64,
    pub n_selected: usize,
}

pub struct Swarm {
    pub particles: Vec<Particle>,
    pub global_best: FeatureMask,
    pub global_best_record: FitnessRecord,
    pub iteration: usize,
    pub history: Vec<HistoryEntry>,
    rng: ChaCha8Rng,
}

impl Swarm {
    /// Random positions (each bit set with probability ½), velocities drawn
    /// from U(−1, 1), every particle evaluated once.
    pub fn initialize(evaluator: &FitnessEvaluator, config: &PsoConfig) -> Result<Self> {
        let n = evaluator.n_features();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(1);
        let mut positions = Vec::with_capacity(config.swarm_size);
        let mut velocities = Vec::with_capacity(config.swarm_size);
        for _ in 0..config.swarm_size {
            positions.push(FeatureMask {
                bits: (0..n).map(|_| rng.random::<bool>()).collect(),
            });
            velocities.push((0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>());
        }
        let records = evaluator.evaluate_all(&positions)?;
        let particles: Vec<Particle> = positions
            .into_iter()
            .zip(velocities)
            .zip(&records)
            .map(|((position, velocity), r)| Particle {
                personal_best: position.clone(),
                position,
                velocity,
                personal_best_cost: r.cost,
            })
            .collect();
        let best = (0..records.len())
            .min_by(|&a, &b| records[a].cost.total_cmp(&records[b].cost).then(a.cmp(&b)))
            .expect("swarm_size >= 2");
        let mut swarm = Self {
            global_best: particles[best].position.clone(),
            global_best_record: records[best],
            particles,
            iteration: 0,
            history: Vec::new(),
            rng,
        };
        swarm.record();
        Ok(swarm)
    }

    fn record(&mut self) {
        self.history.push(HistoryEntry {
            iteration: self.iteration,
            cost: self.global_best_record.cost,
            f1: self.global_best_record.f1,
            n_selected: self.global_best_record.n_selected,
        });
    }

    /// Moves every particle, scores the new positions, then updates personal
    /// and global bests in particle order. The global best only changes on a
    /// strict improvement, so the recorded history never increases.
    pub fn step(&mut self, evaluator: &FitnessEvaluator, config: &PsoConfig) -> Result<()> {
        for p in &mut self.particles {
            p.velocity = velocity_update(p, &self.global_best, config, &mut self.rng);
            p.position = position_update(&p.velocity, &mut self.rng);
        }
        let positions: Vec<FeatureMask> = self.particles.iter().map(|p| p.position.clone()).collect();
        let records = evaluator.evaluate_all(&positions)?;
        for (p, r) in self.particles.iter_mut().zip(&records) {
            if r.cost < p.personal_best_cost {
                p.personal_best = p.position.clone();
                p.personal_best_cost = r.cost;
            }
            if r.cost < self.global_best_record.cost {
                self.global_best = p.position.clone();
                self.global_best_record = *r;
            }
        }
        self.iteration += 1;
        self.record();
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoResult {
    pub mask: FeatureMask,
    pub best: FitnessRecord,
    /// Entry 0 is the initial swarm; entry `t` follows iteration `t`.
    pub history: Vec<HistoryEntry>,
    pub evaluations: usize,
}

/// Runs the full swarm for `config.max_iterations` iterations.
pub fn pso_run(dataset: &Dataset, config: &PsoConfig) -> Result<PsoResult> {
    pso_run_iterations(dataset, config, config.max_iterations)
}

/// Same as [`pso_run`] with an explicit iteration count, which may be zero.
pub fn pso_run_iterations(dataset: &Dataset, config: &PsoConfig, iterations: usize) -> Result<PsoResult> {
    config.validate()?;
    if dataset.n_features() < 2 {
        return Err(PsoError::TooFewFeatures(dataset.n_features()));
    }
    let evaluator = FitnessEvaluator::new(dataset, config)?;
    let mut swarm = Swarm::initialize(&evaluator, config)?;
    for _ in 0..iterations {
        swarm.step(&evaluator, config)?;
    }
    Ok(PsoResult {
        mask: swarm.global_best,
        best: swarm.global_best_record,
        history: swarm.history,
        evaluations: evaluator.memo_size(),
    })
}

/// Writes `iteration,C_best,F1_best,N_best` lines.
pub fn write_history_csv(writer: impl std::io::Write, history: &[HistoryEntry]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["iteration", "C_best", "F1_best", "N_best"])?;
    for h in history {
        w.write_record([
            h.iteration.to_string(),
            h.cost.to_string(),
            h.f1.to_string(),
            h.n_selected.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SynthSpec};

    fn synth(n_rows: usize, n_numerical: usize, informative: &[usize], noise: f64, seed: u64) -> Dataset {
        generate_synthetic(&SynthSpec {
            n_rows,
            n_numerical,
            n_categorical: 0,
            n_informative: informative.len(),
            informative_indices: informative.to_vec(),
            noise_level: noise,
            seed,
        })
        .unwrap()
        .0
    }

    fn fast_config(seed: u64) -> PsoConfig {
        PsoConfig {
            swarm_size: 6,
            max_iterations: 5,
            seed,
            inner_model: LogRegConfig {
                epochs: 60,
                ..LogRegConfig::default()
            },
            ..PsoConfig::default()
        }
    }

    #[test]
    fn cost_examples() {
        assert!((cost(0.9, 0.01, 10) + 0.8).abs() < 1e-15);
        assert_eq!(cost(0.9, 0.0, 37), -0.9);
        assert!((cost(0.0, 0.01, 50) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cost_is_monotone_on_a_grid() {
        for n in 0..20 {
            for i in 0..20 {
                let f = i as f64 / 20.0;
                assert!(cost(f + 0.05, 0.01, n) < cost(f, 0.01, n));
                assert!(cost(f, 0.01, n + 1) > cost(f, 0.01, n));
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(PsoConfig::default().validate().is_ok());
        let bad = [
            PsoConfig { swarm_size: 1, ..PsoConfig::default() },
            PsoConfig { max_iterations: 0, ..PsoConfig::default() },
            PsoConfig { inertia: -0.1, ..PsoConfig::default() },
            PsoConfig { penalty: -1.0, ..PsoConfig::default() },
            PsoConfig { velocity_clamp: 0.0, ..PsoConfig::default() },
            PsoConfig { fitness_split: 1.0, ..PsoConfig::default() },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(PsoError::InvalidConfig(_))), "{c:?}");
        }
    }

    #[test]
    fn empty_mask_costs_zero_without_training() {
        let ds = synth(100, 4, &[0], 0.0, 1);
        let r = evaluate_particle(&FeatureMask::empty(4), &ds, &fast_config(0)).unwrap();
        assert_eq!(r, FitnessRecord { f1: 0.0, n_selected: 0, cost: 0.0 });
    }

    #[test]
    fn all_ones_on_noiseless_single_feature_is_near_perfect() {
        let ds = synth(400, 5, &[2], 0.0, 3);
        let config = PsoConfig::default();
        let r = evaluate_particle(&FeatureMask { bits: vec![true; 5] }, &ds, &config).unwrap();
        assert!(r.f1 > 0.9, "{r:?}");
        assert!((r.cost - cost(r.f1, config.penalty, 5)).abs() < 1e-15);
    }

    #[test]
    fn repeated_evaluation_is_identical_and_memoized() {
        let ds = synth(200, 6, &[1, 4], 0.2, 5);
        let ev = FitnessEvaluator::new(&ds, &fast_config(2)).unwrap();
        let m = FeatureMask::from_indices(6, &[1, 3]);
        let a = ev.evaluate(&m).unwrap();
        let b = ev.evaluate(&m).unwrap();
        assert_eq!(a, b);
        assert_eq!(ev.memo_size(), 1);
        assert_eq!(a, ev.compute(&m).unwrap());
    }

    #[test]
    fn velocity_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = Particle {
            position: FeatureMask { bits: vec![true, false, true] },
            velocity: vec![0.5, -2.0, 10.0],
            personal_best: FeatureMask { bits: vec![false, true, false] },
            personal_best_cost: 0.0,
        };
        let g = FeatureMask { bits: vec![false, true, true] };
        let inertia_only = PsoConfig {
            inertia: 1.0,
            cognitive: 0.0,
            social: 0.0,
            ..PsoConfig::default()
        };
        assert_eq!(velocity_update(&p, &g, &inertia_only, &mut rng), vec![0.5, -2.0, 4.0]);

        let settled = Particle {
            personal_best: p.position.clone(),
            ..p.clone()
        };
        let v = velocity_update(&settled, &p.position, &PsoConfig::default(), &mut rng);
        let w = PsoConfig::default().inertia;
        assert_eq!(v, vec![0.5 * w, -2.0 * w, (10.0 * w).min(4.0)]);
    }

    #[test]
    fn velocities_stay_clamped() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let config = PsoConfig {
            inertia: 3.0,
            cognitive: 5.0,
            social: 5.0,
            velocity_clamp: 1.5,
            ..PsoConfig::default()
        };
        let mut p = Particle {
            position: FeatureMask { bits: vec![false; 10] },
            velocity: vec![0.0; 10],
            personal_best: FeatureMask { bits: vec![true; 10] },
            personal_best_cost: 0.0,
        };
        let g = FeatureMask::from_indices(10, &[0, 2, 4]);
        for _ in 0..50 {
            p.velocity = velocity_update(&p, &g, &config, &mut rng);
            assert!(p.velocity.iter().all(|v| v.abs() <= 1.5));
            p.position = position_update(&p.velocity, &mut rng);
        }
    }

    #[test]
    fn position_transfer_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ones = (0..10_000)
            .filter(|_| position_update(&[0.0], &mut rng).bits[0])
            .count() as f64;
        assert!((ones / 1e4 - 0.5).abs() < 0.02);
        assert!((0..1000).all(|_| position_update(&[20.0], &mut rng).bits[0]));
        assert!((0..1000).all(|_| !position_update(&[-20.0], &mut rng).bits[0]));
    }

    #[test]
    fn zero_iterations_return_best_initial_particle() {
        let ds = synth(150, 6, &[0, 3], 0.1, 2);
        let config = fast_config(11);
        let r = pso_run_iterations(&ds, &config, 0).unwrap();
        assert_eq!(r.history.len(), 1);
        let ev = FitnessEvaluator::new(&ds, &config).unwrap();
        let swarm = Swarm::initialize(&ev, &config).unwrap();
        let min = swarm.particles.iter().map(|p| p.personal_best_cost).fold(f64::INFINITY, f64::min);
        assert_eq!(r.best.cost, min);
    }

    #[test]
    fn runs_are_deterministic_and_monotone() {
        let ds = synth(200, 8, &[1, 5], 0.1, 4);
        let config = fast_config(21);
        let a = pso_run(&ds, &config).unwrap();
        let b = pso_run(&ds, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.history.len(), config.max_iterations + 1);
        assert!(a.history.windows(2).all(|w| w[1].cost <= w[0].cost));
        assert_eq!(a.history.last().unwrap().cost, a.best.cost);
    }

    #[test]
    fn personal_bests_dominate_visited_positions() {
        let ds = synth(150, 6, &[2], 0.1, 8);
        let config = fast_config(3);
        let ev = FitnessEvaluator::new(&ds, &config).unwrap();
        let mut swarm = Swarm::initialize(&ev, &config).unwrap();
        let mut worst_seen: Vec<f64> = swarm.particles.iter().map(|p| p.personal_best_cost).collect();
        for _ in 0..4 {
            swarm.step(&ev, &config).unwrap();
            for (i, p) in swarm.particles.iter().enumerate() {
                let c = ev.evaluate(&p.position).unwrap().cost;
                worst_seen[i] = worst_seen[i].min(c);
                assert!(p.personal_best_cost <= c);
                assert_eq!(p.personal_best_cost, worst_seen[i]);
            }
        }
    }

    #[test]
    fn invalid_inputs_fail_before_evaluation() {
        let ds = synth(100, 4, &[0], 0.0, 1);
        let bad = PsoConfig { swarm_size: 0, ..PsoConfig::default() };
        assert!(matches!(pso_run(&ds, &bad), Err(PsoError::InvalidConfig(_))));
        let one = synth(100, 1, &[0], 0.0, 1);
        assert_eq!(pso_run(&one, &fast_config(0)), Err(PsoError::TooFewFeatures(1)));
    }

    #[test]
    fn history_csv_and_mask_json() {
        let h = [HistoryEntry { iteration: 0, cost: -0.5, f1: 0.6, n_selected: 2 }];
        let mut buf = Vec::new();
        write_history_csv(&mut buf, &h).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "iteration,C_best,F1_best,N_best\n0,-0.5,0.6,2\n");
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        assert_eq!(FeatureMask::from_indices(3, &[0, 2]).to_json(&names), r#"["a","c"]"#);
    }
}
