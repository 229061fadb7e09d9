//! Discrete beamforming over the 2-bit antenna states: objective, genetic
//! algorithm and exhaustive search.

use std::collections::HashMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::antenna::PhaseState;
use crate::emdata::{EmDataset, Incidence};
use crate::error::{Error, Result};
use crate::pattern::{beam_metrics_in_cut, signed_cut_direction, BeamMetrics, Sector};
use crate::splitter::{mode_preset, SplitterMode, SplitterState};
use crate::thevenin::{simulate, Simulator, SurfaceConfig, SurfaceConfigSpec};

/// Exhaustive search refuses more configurations than this.
pub const EXHAUSTIVE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeamMode {
    Reflection,
    Transmission,
    Hybrid,
}

impl BeamMode {
    pub fn splitter_mode(self) -> SplitterMode {
        match self {
            BeamMode::Reflection => SplitterMode::Reflection,
            BeamMode::Transmission => SplitterMode::Transmission,
            BeamMode::Hybrid => SplitterMode::Hybrid,
        }
    }

    pub fn uses_reflection(self) -> bool {
        self != BeamMode::Transmission
    }

    pub fn uses_transmission(self) -> bool {
        self != BeamMode::Reflection
    }
}

impl fmt::Display for BeamMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BeamMode::Reflection => "reflection",
            BeamMode::Transmission => "transmission",
            BeamMode::Hybrid => "hybrid",
        })
    }
}

/// Target directions in degrees; θ_R ∈ [0°, 90°), θ_T ∈ (90°, 180°].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamTarget {
    pub omega_r: (f64, f64),
    pub omega_t: (f64, f64),
    pub mode: BeamMode,
}

impl BeamTarget {
    pub fn new(mode: BeamMode, omega_r: (f64, f64), omega_t: (f64, f64)) -> Result<Self> {
        let t = Self { omega_r, omega_t, mode };
        t.validate()?;
        Ok(t)
    }

    /// Signed angles in the YOZ cut: a negative sign selects φ = 270°.
    /// `theta_t` is the polar angle of the transmitted beam, |θ_T| ∈ (90°, 180°].
    pub fn from_signed(mode: BeamMode, theta_r: f64, theta_t: f64) -> Result<Self> {
        Self::new(mode, signed_cut_direction(theta_r, 90.0), signed_cut_direction(theta_t, 90.0))
    }

    pub fn validate(&self) -> Result<()> {
        let (tr, tt) = (self.omega_r.0, self.omega_t.0);
        if !(tr.is_finite() && (0.0..90.0).contains(&tr)) {
            return Err(Error::OutOfSector { side: "reflection", theta: tr });
        }
        if !(tt.is_finite() && tt > 90.0 && tt <= 180.0) {
            return Err(Error::OutOfSector { side: "transmission", theta: tt });
        }
        if !(self.omega_r.1.is_finite() && self.omega_t.1.is_finite()) {
            return Err(Error::InvalidParameter("target azimuth must be finite".into()));
        }
        Ok(())
    }
}

/// Gene vector (x_r,1 … x_r,M, x_t,1 … x_t,M). Ordering is lexicographic.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Chromosome {
    pub genes: Vec<PhaseState>,
}

impl Chromosome {
    pub fn new(genes: Vec<PhaseState>) -> Result<Self> {
        if genes.is_empty() || genes.len() % 2 != 0 {
            return Err(Error::DimensionMismatch(format!("chromosome length {} is not 2M", genes.len())));
        }
        Ok(Self { genes })
    }

    pub fn zeros(m: usize) -> Self {
        Self {
            genes: vec![PhaseState::S00; 2 * m],
        }
    }

    pub fn m(&self) -> usize {
        self.genes.len() / 2
    }

    pub fn r_states(&self) -> &[PhaseState] {
        &self.genes[..self.m()]
    }

    pub fn t_states(&self) -> &[PhaseState] {
        &self.genes[self.m()..]
    }

    pub fn to_spec(&self, mode: BeamMode) -> SurfaceConfigSpec {
        SurfaceConfigSpec {
            modes: vec![mode.splitter_mode()],
            r_states: self.r_states().to_vec(),
            t_states: self.t_states().to_vec(),
        }
    }
}

impl fmt::Display for Chromosome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (r, t) = self.genes.split_at(self.m());
        let join = |s: &[PhaseState]| s.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(" ");
        write!(f, "r[{}] t[{}]", join(r), join(t))
    }
}

/// Genes that influence the objective: reflect genes in reflection mode,
/// transmit genes in transmission mode, all in hybrid mode.
pub fn active_genes(mode: BeamMode, m: usize) -> Vec<usize> {
    match mode {
        BeamMode::Reflection => (0..m).collect(),
        BeamMode::Transmission => (m..2 * m).collect(),
        BeamMode::Hybrid => (0..2 * m).collect(),
    }
}

/// Cost −|E_r(Ω_R)|·|E_t(Ω_T)| with the inactive factor set to one.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    sim: Simulator<'a>,
    pub target: BeamTarget,
    pub splitter: SplitterState,
}

impl<'a> Objective<'a> {
    /// Uses the splitter preset of the target's mode and the dataset's
    /// reference incidence.
    pub fn new(ds: &'a EmDataset, target: BeamTarget) -> Result<Self> {
        let splitter = mode_preset(target.mode.splitter_mode(), ds.f_hz)?;
        Self::with_splitter(ds, target, splitter, ds.incidence)
    }

    pub fn with_splitter(
        ds: &'a EmDataset,
        target: BeamTarget,
        splitter: SplitterState,
        incidence: Incidence,
    ) -> Result<Self> {
        target.validate()?;
        let kr = ds.grid.nearest_index(target.omega_r.0, target.omega_r.1);
        let kt = ds.grid.nearest_index(target.omega_t.0, target.omega_t.1);
        let sim = Simulator::with_samples(ds, incidence, vec![kr, kt])?;
        Ok(Self { sim, target, splitter })
    }

    pub fn dataset(&self) -> &EmDataset {
        self.sim.dataset()
    }

    pub fn m(&self) -> usize {
        self.sim.dataset().m
    }

    pub fn config(&self, x: &Chromosome) -> Result<SurfaceConfig> {
        SurfaceConfig::uniform(self.splitter, x.r_states(), x.t_states())
    }

    pub fn evaluate(&self, x: &Chromosome) -> Result<f64> {
        if x.m() != self.m() {
            return Err(Error::DimensionMismatch(format!("chromosome has {} cells, dataset {}", x.m(), self.m())));
        }
        let sol = self.sim.solve(&self.config(x)?)?;
        let er = if self.target.mode.uses_reflection() { sol.e_r[0].norm() } else { 1.0 };
        let et = if self.target.mode.uses_transmission() { sol.e_t[1].norm() } else { 1.0 };
        Ok(-(er * et))
    }
}

pub fn fitness(x: &Chromosome, ds: &EmDataset, target: BeamTarget) -> Result<f64> {
    Objective::new(ds, target)?.evaluate(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaParams {
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    /// Per-gene probability; `None` means 1/(2M).
    pub mutation_rate: Option<f64>,
    pub elitism: usize,
    pub tournament: usize,
    pub seed: u64,
}

impl Default for GaParams {
    fn default() -> Self {
        Self {
            population: 64,
            generations: 200,
            crossover_rate: 0.9,
            mutation_rate: None,
            elitism: 2,
            tournament: 3,
            seed: 0,
        }
    }
}

impl GaParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.population < 2 {
            return bad(format!("population {} must be at least 2", self.population));
        }
        if self.elitism >= self.population {
            return bad(format!("elitism {} must be below population {}", self.elitism, self.population));
        }
        if self.tournament == 0 {
            return bad("tournament size must be positive".into());
        }
        let rates = [Some(self.crossover_rate), self.mutation_rate];
        if rates.iter().flatten().any(|r| !(0.0..=1.0).contains(r)) {
            return bad("rates must lie in [0, 1]".into());
        }
        Ok(())
    }

    pub fn mutation_for(&self, m: usize) -> f64 {
        self.mutation_rate.unwrap_or(1.0 / (2.0 * m as f64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaResult {
    pub best: Chromosome,
    pub best_fitness: f64,
    pub history: Vec<GenerationStats>,
    /// Distinct chromosomes evaluated.
    pub evaluations: usize,
}

fn better(a: (f64, &Chromosome), b: (f64, &Chromosome)) -> bool {
    match a.0.total_cmp(&b.0) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => a.1 < b.1,
    }
}

struct Evaluator<'o, 'a> {
    obj: &'o Objective<'a>,
    cache: HashMap<Chromosome, f64>,
}

impl Evaluator<'_, '_> {
    fn evaluate_all(&mut self, pop: &[Chromosome]) -> Result<Vec<f64>> {
        let mut fresh: Vec<&Chromosome> = pop.iter().filter(|c| !self.cache.contains_key(*c)).collect();
        fresh.sort();
        fresh.dedup();
        let scored: Vec<Result<f64>> = fresh.par_iter().map(|c| self.obj.evaluate(c)).collect();
        for (c, f) in fresh.into_iter().zip(scored) {
            self.cache.insert(c.clone(), f?);
        }
        Ok(pop.iter().map(|c| self.cache[c]).collect())
    }
}

/// Generational GA with tournament selection, uniform crossover, per-gene
/// mutation and elitism. Deterministic for a given seed.
pub fn ga_optimize(obj: &Objective<'_>, params: &GaParams) -> Result<GaResult> {
    params.validate()?;
    let m = obj.m();
    let active = active_genes(obj.target.mode, m);
    let p_mut = params.mutation_for(m);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let random_state = |rng: &mut ChaCha8Rng| PhaseState::ALL[rng.gen_range(0..4)];

    let mut pop: Vec<Chromosome> = (0..params.population)
        .map(|_| {
            let mut c = Chromosome::zeros(m);
            for &g in &active {
                c.genes[g] = random_state(&mut rng);
            }
            c
        })
        .collect();
    let mut ev = Evaluator {
        obj,
        cache: HashMap::new(),
    };
    let mut history = Vec::with_capacity(params.generations + 1);
    let mut best: Option<(f64, Chromosome)> = None;

    for generation in 0..=params.generations {
        let fit = ev.evaluate_all(&pop)?;
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| fit[a].total_cmp(&fit[b]).then_with(|| pop[a].cmp(&pop[b])));
        let lead = order[0];
        if best.as_ref().is_none_or(|(f, c)| better((fit[lead], &pop[lead]), (*f, c))) {
            best = Some((fit[lead], pop[lead].clone()));
        }
        history.push(GenerationStats {
            generation,
            best: best.as_ref().map(|b| b.0).unwrap_or(f64::INFINITY),
            mean: fit.iter().sum::<f64>() / fit.len() as f64,
        });
        if generation == params.generations {
            break;
        }

        let mut next: Vec<Chromosome> = order[..params.elitism].iter().map(|&i| pop[i].clone()).collect();
        let tournament = |rng: &mut ChaCha8Rng| -> usize {
            let mut w = rng.gen_range(0..pop.len());
            for _ in 1..params.tournament {
                let c = rng.gen_range(0..pop.len());
                if better((fit[c], &pop[c]), (fit[w], &pop[w])) {
                    w = c;
                }
            }
            w
        };
        while next.len() < params.population {
            let (a, b) = (tournament(&mut rng), tournament(&mut rng));
            let mut kids = [pop[a].clone(), pop[b].clone()];
            if rng.gen::<f64>() < params.crossover_rate {
                for &g in &active {
                    if rng.gen::<bool>() {
                        let (x, y) = (kids[0].genes[g], kids[1].genes[g]);
                        kids[0].genes[g] = y;
                        kids[1].genes[g] = x;
                    }
                }
            }
            for kid in kids {
                if next.len() == params.population {
                    break;
                }
                let mut kid = kid;
                for &g in &active {
                    if rng.gen::<f64>() < p_mut {
                        // uniform over the three other states
                        let shift = rng.gen_range(1..4u8);
                        kid.genes[g] = PhaseState::from_code((kid.genes[g].code() + shift) % 4)?;
                    }
                }
                next.push(kid);
            }
        }
        pop = next;
    }
    let (best_fitness, best) = best.expect("at least one generation");
    Ok(GaResult {
        best,
        best_fitness,
        history,
        evaluations: ev.cache.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExhaustiveResult {
    pub best: Chromosome,
    pub best_fitness: f64,
    pub evaluated: usize,
}

/// Number of configurations an exhaustive search would enumerate.
pub fn search_space(mode: BeamMode, m: usize) -> f64 {
    4f64.powi(active_genes(mode, m).len() as i32)
}

/// Global optimum over all states of the active genes (inactive genes 00).
/// Ties go to the lexicographically smallest chromosome.
pub fn exhaustive_search(obj: &Objective<'_>, m_limit: usize) -> Result<ExhaustiveResult> {
    let m = obj.m();
    let count = search_space(obj.target.mode, m);
    if m > m_limit || count > EXHAUSTIVE_LIMIT {
        return Err(Error::TooLarge(count));
    }
    let active = active_genes(obj.target.mode, m);
    let n = count as usize;
    let decode = |mut k: usize| -> Chromosome {
        let mut c = Chromosome::zeros(m);
        for &g in active.iter().rev() {
            c.genes[g] = PhaseState::ALL[k % 4];
            k /= 4;
        }
        c
    };
    // index order is lexicographic order, so the lowest index wins ties
    let best = (0..n)
        .into_par_iter()
        .map(|k| obj.evaluate(&decode(k)).map(|f| (f, k)))
        .try_reduce(
            || (f64::INFINITY, usize::MAX),
            |a, b| {
                Ok(match a.0.total_cmp(&b.0) {
                    std::cmp::Ordering::Less => a,
                    std::cmp::Ordering::Greater => b,
                    std::cmp::Ordering::Equal => {
                        if a.1 <= b.1 {
                            a
                        } else {
                            b
                        }
                    }
                })
            },
        )?;
    Ok(ExhaustiveResult {
        best: decode(best.1),
        best_fitness: best.0,
        evaluated: n,
    })
}

/// Cut plane φ0 ∈ [0°, 180°) containing a target azimuth.
pub fn cut_plane(phi: f64) -> f64 {
    let p = phi.rem_euclid(360.0);
    if p >= 180.0 {
        p - 180.0
    } else {
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AchievedBeams {
    pub reflection: Option<BeamMetrics>,
    pub transmission: Option<BeamMetrics>,
    /// Great-circle error between peak and target (degrees).
    pub reflection_error_deg: Option<f64>,
    pub transmission_error_deg: Option<f64>,
}

/// Beam metrics of a configuration on the full dataset grid, in the cut
/// containing each active target.
pub fn achieved_beams(obj: &Objective<'_>, x: &Chromosome) -> Result<AchievedBeams> {
    let ds = obj.dataset();
    let r = simulate(ds, &obj.config(x)?, obj.sim_incidence())?;
    let t = obj.target;
    let metrics = |p, sector, dir: (f64, f64)| -> Result<(BeamMetrics, f64)> {
        let b = beam_metrics_in_cut(p, sector, cut_plane(dir.1), Some(dir))?;
        Ok((b, crate::pattern::angular_distance(b.peak_direction, dir)))
    };
    let refl = if t.mode.uses_reflection() {
        Some(metrics(&r.e_r, Sector::Reflection, t.omega_r)?)
    } else {
        None
    };
    let trans = if t.mode.uses_transmission() {
        Some(metrics(&r.e_t, Sector::Transmission, t.omega_t)?)
    } else {
        None
    };
    Ok(AchievedBeams {
        reflection: refl.map(|x| x.0),
        transmission: trans.map(|x| x.0),
        reflection_error_deg: refl.map(|x| x.1),
        transmission_error_deg: trans.map(|x| x.1),
    })
}

impl Objective<'_> {
    pub fn sim_incidence(&self) -> Incidence {
        self.sim.incidence
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub seed: u64,
    pub params: GaParams,
    pub mutation_rate: f64,
    pub target: BeamTarget,
    pub best: Chromosome,
    pub best_fitness: f64,
    pub evaluations: usize,
    pub history: Vec<GenerationStats>,
    pub achieved: AchievedBeams,
}

impl OptimizationReport {
    pub fn build(obj: &Objective<'_>, params: &GaParams, result: &GaResult) -> Result<Self> {
        Ok(Self {
            seed: params.seed,
            params: *params,
            mutation_rate: params.mutation_for(obj.m()),
            target: obj.target,
            best: result.best.clone(),
            best_fitness: result.best_fitness,
            evaluations: result.evaluations,
            history: result.history.clone(),
            achieved: achieved_beams(obj, &result.best)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emdata::{generate_synthetic, SyntheticParams};
    use crate::splitter::IdealSplit;
    use proptest::prelude::*;

    fn ds(m_x: usize, m_y: usize) -> EmDataset {
        generate_synthetic(&SyntheticParams {
            m_x,
            m_y,
            ..Default::default()
        })
        .unwrap()
    }

    fn states(codes: &[u8]) -> Vec<PhaseState> {
        codes.iter().map(|&c| PhaseState::from_code(c).unwrap()).collect()
    }

    #[test]
    fn sector_checks() {
        assert!(BeamTarget::from_signed(BeamMode::Reflection, 120.0, 180.0).is_err());
        assert!(BeamTarget::from_signed(BeamMode::Hybrid, 15.0, 60.0).is_err());
        let t = BeamTarget::from_signed(BeamMode::Hybrid, -15.0, 165.0).unwrap();
        assert_eq!(t.omega_r, (15.0, 270.0));
        assert_eq!(t.omega_t, (165.0, 90.0));
        assert!(matches!(
            BeamTarget::from_signed(BeamMode::Reflection, 90.0, 180.0),
            Err(Error::OutOfSector { side: "reflection", .. })
        ));
    }

    #[test]
    fn params_validation() {
        assert!(GaParams::default().validate().is_ok());
        assert!(GaParams { population: 1, ..Default::default() }.validate().is_err());
        assert!(GaParams { elitism: 64, ..Default::default() }.validate().is_err());
        assert!(GaParams { crossover_rate: 1.5, ..Default::default() }.validate().is_err());
        assert!(GaParams { mutation_rate: Some(-0.1), ..Default::default() }.validate().is_err());
        assert_eq!(GaParams::default().mutation_for(16), 1.0 / 32.0);
    }

    #[test]
    fn reflection_fitness_is_minus_reflected_magnitude() {
        let d = ds(2, 1);
        let t = BeamTarget::from_signed(BeamMode::Reflection, 10.0, 180.0).unwrap();
        let obj = Objective::new(&d, t).unwrap();
        let x = Chromosome::new(states(&[1, 2, 0, 3])).unwrap();
        let r = simulate(&d, &obj.config(&x).unwrap(), d.incidence).unwrap();
        let f = obj.evaluate(&x).unwrap();
        assert_eq!(f, -r.e_r.at(10.0, 90.0).unwrap().norm());
    }

    #[test]
    fn hybrid_fitness_is_product() {
        let d = ds(2, 1);
        let t = BeamTarget::from_signed(BeamMode::Hybrid, -20.0, 150.0).unwrap();
        let obj = Objective::new(&d, t).unwrap();
        let x = Chromosome::new(states(&[3, 2, 0, 1])).unwrap();
        let r = simulate(&d, &obj.config(&x).unwrap(), d.incidence).unwrap();
        let expect = -r.e_r.at(20.0, 270.0).unwrap().norm() * r.e_t.at(150.0, 90.0).unwrap().norm();
        assert!((obj.evaluate(&x).unwrap() - expect).abs() <= 1e-12 * expect.abs());
    }

    #[test]
    fn zero_fields_give_zero_fitness() {
        let d = ds(1, 1);
        let t = BeamTarget::from_signed(BeamMode::Hybrid, 0.0, 180.0).unwrap();
        let obj = Objective::with_splitter(&d, t, SplitterState::ideal(IdealSplit::Open), d.incidence).unwrap();
        // an open splitter transmits nothing
        assert_eq!(obj.evaluate(&Chromosome::zeros(1)).unwrap(), 0.0);
    }

    #[test]
    fn exhaustive_single_cell_matches_brute_force() {
        let d = ds(1, 1);
        let t = BeamTarget::from_signed(BeamMode::Hybrid, 20.0, 170.0).unwrap();
        let obj = Objective::new(&d, t).unwrap();
        let ex = exhaustive_search(&obj, 4).unwrap();
        assert_eq!(ex.evaluated, 16);
        let mut best = (f64::INFINITY, Chromosome::zeros(1));
        for a in PhaseState::ALL {
            for b in PhaseState::ALL {
                let c = Chromosome::new(vec![a, b]).unwrap();
                let f = obj.evaluate(&c).unwrap();
                if better((f, &c), (best.0, &best.1)) {
                    best = (f, c);
                }
            }
        }
        assert_eq!(ex.best, best.1);
        assert_eq!(ex.best_fitness, best.0);
    }

    #[test]
    fn exhaustive_reflection_ignores_transmit_genes() {
        let d = ds(2, 1);
        let t = BeamTarget::from_signed(BeamMode::Reflection, 30.0, 180.0).unwrap();
        let obj = Objective::with_splitter(&d, t, SplitterState::ideal(IdealSplit::Open), d.incidence).unwrap();
        let ex = exhaustive_search(&obj, 4).unwrap();
        assert_eq!(ex.evaluated, 16);
        assert!(ex.best.t_states().iter().all(|&s| s == PhaseState::S00));
        let mut alt = ex.best.clone();
        alt.genes[2] = PhaseState::S11;
        alt.genes[3] = PhaseState::S01;
        assert_eq!(obj.evaluate(&alt).unwrap(), ex.best_fitness);
    }

    #[test]
    fn exhaustive_refuses_large_surfaces() {
        let d = ds(4, 4);
        let t = BeamTarget::from_signed(BeamMode::Hybrid, 15.0, 165.0).unwrap();
        let obj = Objective::new(&d, t).unwrap();
        assert!(matches!(exhaustive_search(&obj, 16), Err(Error::TooLarge(_))));
        let d3 = ds(3, 1);
        let obj = Objective::new(&d3, t).unwrap();
        assert!(matches!(exhaustive_search(&obj, 2), Err(Error::TooLarge(_))));
    }

    #[test]
    fn ga_is_deterministic_and_monotone() {
        let d = ds(2, 2);
        let t = BeamTarget::from_signed(BeamMode::Hybrid, 15.0, 165.0).unwrap();
        let obj = Objective::new(&d, t).unwrap();
        let p = GaParams {
            generations: 30,
            seed: 7,
            ..Default::default()
        };
        let a = ga_optimize(&obj, &p).unwrap();
        let b = ga_optimize(&obj, &p).unwrap();
        assert_eq!(a, b);
        assert!(a.history.windows(2).all(|w| w[1].best <= w[0].best));
        assert_eq!(a.history.len(), 31);
        assert!(a.best_fitness <= a.history[0].best);
    }

    #[test]
    fn ga_matches_exhaustive_on_two_cells() {
        let d = ds(2, 1);
        let t = BeamTarget::from_signed(BeamMode::Hybrid, -25.0, 160.0).unwrap();
        let obj = Objective::new(&d, t).unwrap();
        let ex = exhaustive_search(&obj, 2).unwrap();
        let ga = ga_optimize(&obj, &GaParams::default()).unwrap();
        assert!((ga.best_fitness - ex.best_fitness).abs() <= 1e-9 * ex.best_fitness.abs());
    }

    #[test]
    fn report_serializes() {
        let d = ds(2, 1);
        let t = BeamTarget::from_signed(BeamMode::Reflection, 0.0, 180.0).unwrap();
        let obj = Objective::new(&d, t).unwrap();
        let p = GaParams {
            generations: 3,
            ..Default::default()
        };
        let r = ga_optimize(&obj, &p).unwrap();
        let rep = OptimizationReport::build(&obj, &p, &r).unwrap();
        let json = serde_json::to_string(&rep).unwrap();
        let back: OptimizationReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rep);
        assert!(rep.achieved.transmission.is_none());
        let spec = r.best.to_spec(BeamMode::Reflection);
        assert_eq!(spec.resolve(d.f_hz).unwrap().len(), 2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn global_phase_gauge(codes in proptest::collection::vec(0u8..4, 8)) {
            // +180° on every antenna leaves |E| unchanged
            let d = ds(2, 2);
            let t = BeamTarget::from_signed(BeamMode::Hybrid, 10.0, 170.0).unwrap();
            let obj = Objective::new(&d, t).unwrap();
            let x = Chromosome::new(states(&codes)).unwrap();
            let mut y = x.clone();
            for g in y.genes.iter_mut() {
                *g = g.rotated(2);
            }
            let (fx, fy) = (obj.evaluate(&x).unwrap(), obj.evaluate(&y).unwrap());
            prop_assert!((fx - fy).abs() <= 1e-12 * fx.abs().max(1e-300));
        }
    }
}
