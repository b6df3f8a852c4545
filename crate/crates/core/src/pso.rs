//! Particle swarm search over IRS phase vectors.
//!
//! Velocity and position follow
//! `v ← w v + c1 ε1 (θ̇ − θ) + c2 ε2 (θ̈ − θ)`, `θ ← clamp(θ + v)`, with scalar
//! ε1, ε2 ~ U(0, 1) drawn per particle per iteration. Random draws happen in
//! a serial phase; fitness evaluations run in parallel across particles.

use std::f64::consts::FRAC_PI_4;

use rand::Rng;
use rayon::prelude::*;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::transceiver::{clamp_phase, ReflectionConfig, PHASE_MAX, PHASE_MIN};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

impl Sense {
    /// Is `a` strictly better than `b`?
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Sense::Maximize => a > b,
            Sense::Minimize => a < b,
        }
    }

    pub fn worst(self) -> f64 {
        match self {
            Sense::Maximize => f64::NEG_INFINITY,
            Sense::Minimize => f64::INFINITY,
        }
    }
}

/// How a particle's personal best is updated after an evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PersonalBestRule {
    /// Keep the best position ever visited.
    BestSoFar,
    /// Compare the new value with the particle's previous value only: the
    /// better of the last two positions becomes the personal best.
    Successive,
}

pub trait Fitness: Sync {
    fn sense(&self) -> Sense;

    fn personal_best_rule(&self) -> PersonalBestRule {
        PersonalBestRule::BestSoFar
    }

    /// Fitness of `position` at `iteration` (0 during initialization).
    /// `prev_value` is this particle's previous fitness value, if any.
    fn evaluate(&self, position: &ReflectionConfig, iteration: usize, prev_value: Option<f64>) -> Result<f64>;
}

/// Wraps a closure as a stateless fitness.
pub struct FnFitness<F> {
    pub f: F,
    pub sense: Sense,
    pub rule: PersonalBestRule,
}

impl<F: Fn(&ReflectionConfig) -> f64 + Sync> Fitness for FnFitness<F> {
    fn sense(&self) -> Sense {
        self.sense
    }

    fn personal_best_rule(&self) -> PersonalBestRule {
        self.rule
    }

    fn evaluate(&self, position: &ReflectionConfig, _: usize, _: Option<f64>) -> Result<f64> {
        Ok((self.f)(position))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsoParams {
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub swarm_size: usize,
    /// Initial velocities are uniform in `[-velocity_init, velocity_init]`.
    pub velocity_init: f64,
}

impl PsoParams {
    pub fn from_config(cfg: &SystemConfig) -> Self {
        PsoParams { inertia: cfg.inertia, cognitive: cfg.cognitive, social: cfg.social, swarm_size: cfg.swarm_size, velocity_init: FRAC_PI_4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: ReflectionConfig,
    pub velocity: Vec<f64>,
    pub best_position: ReflectionConfig,
    pub best_fitness: f64,
    /// Fitness at the current position; the `J^(i-1)` state of recursive
    /// fitness functions.
    pub prev_surrogate: f64,
}

/// One velocity/position update. Returns the clamped position and the new
/// velocity. A component that hits the (-π, π] boundary has its velocity
/// zeroed.
pub fn update_particle(position: &[f64], velocity: &[f64], personal_best: &[f64], global_best: &[f64], params: &PsoParams, eps1: f64, eps2: f64) -> (Vec<f64>, Vec<f64>) {
    let mut pos = Vec::with_capacity(position.len());
    let mut vel = Vec::with_capacity(position.len());
    for k in 0..position.len() {
        let v = params.inertia * velocity[k] + params.cognitive * eps1 * (personal_best[k] - position[k]) + params.social * eps2 * (global_best[k] - position[k]);
        let x = position[k] + v;
        let clamped = clamp_phase(x);
        vel.push(if clamped != x { 0.0 } else { v });
        pos.push(clamped);
    }
    (pos, vel)
}

#[derive(Debug, Clone)]
pub struct Swarm {
    pub particles: Vec<Particle>,
    pub global_best: ReflectionConfig,
    pub global_best_fitness: f64,
    pub iteration: usize,
    pub params: PsoParams,
    pub sense: Sense,
    rng: SimRng,
}

fn evaluate_all<F: Fitness>(fitness: &F, positions: &[ReflectionConfig], iteration: usize, prev: &[Option<f64>]) -> Result<Vec<f64>> {
    positions
        .par_iter()
        .zip(prev.par_iter())
        .enumerate()
        .map(|(k, (pos, prev))| fitness.evaluate(pos, iteration, *prev).map_err(|e| Error::Fitness { particle: k, source: Box::new(e) }))
        .collect()
}

impl Swarm {
    /// Random positions in (-π, π], random velocities, first evaluation.
    pub fn init<F: Fitness>(n_dims: usize, params: PsoParams, fitness: &F, mut rng: SimRng) -> Result<Swarm> {
        if params.swarm_size == 0 || n_dims == 0 {
            return Err(Error::InvalidConfig(format!("swarm of {} particles in {} dimensions", params.swarm_size, n_dims)));
        }
        let vmax = params.velocity_init;
        let mut positions = Vec::with_capacity(params.swarm_size);
        let mut velocities = Vec::with_capacity(params.swarm_size);
        for _ in 0..params.swarm_size {
            positions.push(ReflectionConfig::random(n_dims, &mut rng));
            velocities.push((0..n_dims).map(|_| if vmax > 0.0 { rng.random_range(-vmax..=vmax) } else { 0.0 }).collect::<Vec<f64>>());
        }
        let values = evaluate_all(fitness, &positions, 0, &vec![None; params.swarm_size])?;
        let sense = fitness.sense();
        let particles: Vec<Particle> = positions
            .into_iter()
            .zip(velocities)
            .zip(&values)
            .map(|((position, velocity), &j)| Particle { best_position: position.clone(), position, velocity, best_fitness: j, prev_surrogate: j })
            .collect();
        let lead = extremal(&particles, sense);
        Ok(Swarm {
            global_best: particles[lead].best_position.clone(),
            global_best_fitness: particles[lead].best_fitness,
            particles,
            iteration: 0,
            params,
            sense,
            rng,
        })
    }

    /// One PSO iteration.
    pub fn step<F: Fitness>(&mut self, fitness: &F) -> Result<()> {
        let gbest = self.global_best.phases().to_vec();
        let mut new_positions = Vec::with_capacity(self.particles.len());
        let mut new_velocities = Vec::with_capacity(self.particles.len());
        for p in &self.particles {
            let eps1: f64 = self.rng.random();
            let eps2: f64 = self.rng.random();
            let (pos, vel) = update_particle(p.position.phases(), &p.velocity, p.best_position.phases(), &gbest, &self.params, eps1, eps2);
            new_positions.push(ReflectionConfig::clamped(pos));
            new_velocities.push(vel);
        }
        let prev: Vec<Option<f64>> = self.particles.iter().map(|p| Some(p.prev_surrogate)).collect();
        let iteration = self.iteration + 1;
        let values = evaluate_all(fitness, &new_positions, iteration, &prev)?;

        let rule = fitness.personal_best_rule();
        for ((p, pos), (vel, j)) in self.particles.iter_mut().zip(new_positions).zip(new_velocities.into_iter().zip(values)) {
            match rule {
                PersonalBestRule::BestSoFar => {
                    if self.sense.better(j, p.best_fitness) {
                        p.best_position = pos.clone();
                        p.best_fitness = j;
                    }
                }
                PersonalBestRule::Successive => {
                    if self.sense.better(j, p.prev_surrogate) {
                        p.best_position = pos.clone();
                        p.best_fitness = j;
                    } else {
                        p.best_position = p.position.clone();
                        p.best_fitness = p.prev_surrogate;
                    }
                }
            }
            p.prev_surrogate = j;
            p.position = pos;
            p.velocity = vel;
        }
        let lead = extremal(&self.particles, self.sense);
        self.global_best = self.particles[lead].best_position.clone();
        self.global_best_fitness = self.particles[lead].best_fitness;
        self.iteration = iteration;
        Ok(())
    }
}

fn extremal(particles: &[Particle], sense: Sense) -> usize {
    let mut lead = 0;
    for (k, p) in particles.iter().enumerate().skip(1) {
        if sense.better(p.best_fitness, particles[lead].best_fitness) || particles[lead].best_fitness.is_nan() {
            lead = k;
        }
    }
    lead
}

pub fn init_swarm<F: Fitness>(cfg: &SystemConfig, fitness: &F, rng: SimRng) -> Result<Swarm> {
    Swarm::init(cfg.n_irs(), PsoParams::from_config(cfg), fitness, rng)
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// Global best after the last iteration.
    pub best: ReflectionConfig,
    pub best_fitness: f64,
    /// Best global-best fitness seen up to each iteration (monotone).
    pub trace: Vec<f64>,
    /// Global-best fitness after each iteration.
    pub raw_trace: Vec<f64>,
    /// Global-best position after each iteration.
    pub history: Vec<ReflectionConfig>,
    /// Position behind the best entry of `trace`.
    pub best_ever: ReflectionConfig,
    /// Wall-clock seconds spent in each iteration.
    pub iter_seconds: Vec<f64>,
}

pub fn run<F: Fitness>(swarm: &mut Swarm, fitness: &F, n_iters: usize) -> Result<RunOutcome> {
    if n_iters == 0 {
        return Err(Error::InvalidConfig("PSO needs at least one iteration".into()));
    }
    let mut trace = Vec::with_capacity(n_iters);
    let mut raw_trace = Vec::with_capacity(n_iters);
    let mut history = Vec::with_capacity(n_iters);
    let mut iter_seconds = Vec::with_capacity(n_iters);
    let mut record = swarm.global_best_fitness;
    let mut best_ever = swarm.global_best.clone();
    for _ in 0..n_iters {
        let t0 = std::time::Instant::now();
        swarm.step(fitness)?;
        iter_seconds.push(t0.elapsed().as_secs_f64());
        if swarm.sense.better(swarm.global_best_fitness, record) {
            record = swarm.global_best_fitness;
            best_ever = swarm.global_best.clone();
        }
        trace.push(record);
        raw_trace.push(swarm.global_best_fitness);
        history.push(swarm.global_best.clone());
    }
    Ok(RunOutcome { best: swarm.global_best.clone(), best_fitness: swarm.global_best_fitness, trace, raw_trace, history, best_ever, iter_seconds })
}

/// Are all phases of every particle inside (-π, π]?
pub fn positions_feasible(swarm: &Swarm) -> bool {
    swarm.particles.iter().all(|p| p.position.phases().iter().all(|x| (PHASE_MIN..=PHASE_MAX).contains(x)))
}
