//! Synthetic hydro-thermal scheduling instances.
//!
//! The generator builds a long-term generation planning problem: reservoirs
//! carry water between stages, turbined water plus thermal generation plus a
//! shortage variable must meet a deterministic demand, and the only
//! uncertainty is the stagewise-independent inflow entering the water
//! balance right-hand side. Inflows are drawn from a log-normal
//! distribution scaled by a 12-period seasonal curve.
//!
//! The construction guarantees the standing assumptions of the solver: the
//! recourse matrix and costs are fixed within each stage (only the rhs
//! varies across realizations), the shortage column makes every subproblem
//! feasible whatever the incoming storage, and all costs are nonnegative.
//!
//! Stage variables, in column order: storage, turbine outflow and (when
//! allowed) spill per reservoir, thermal generation per unit, shortage, and
//! slack columns for the storage-capacity and turbine-limit rows. Stage
//! rows: water balance per reservoir, one generation balance, then the two
//! bound-row groups.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Realization, ScenarioLattice, StageData};

/// Parameters of the synthetic hydro-thermal generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HydroConfig {
    pub n_reservoirs: usize,
    pub n_thermal: usize,
    /// Number of stages `T`.
    pub horizon: usize,
    /// Realizations per stage for stages `2..=T`.
    pub realizations_per_stage: usize,
    /// Deterministic demand per stage (length `horizon`).
    pub demand: Vec<f64>,
    /// Base mean inflow per reservoir before seasonal scaling.
    pub inflow_mean: f64,
    /// Log-scale standard deviation of the inflow distribution.
    pub inflow_spread: f64,
    /// Twelve positive seasonal multipliers; stage `t` uses entry
    /// `(t - 1) % 12`.
    pub seasonal: Vec<f64>,
    /// Nondecreasing positive generation costs, one per thermal unit.
    pub thermal_costs: Vec<f64>,
    /// Cost of unserved demand; must exceed every thermal cost.
    pub shortage_penalty: f64,
    /// Storage capacity per reservoir.
    pub capacities: Vec<f64>,
    /// Maximum turbined volume per reservoir and stage.
    pub turbine_limits: Vec<f64>,
    pub spill_allowed: bool,
    /// Initial storage as a fraction of capacity.
    pub initial_fill: f64,
    pub seed: u64,
}

impl Default for HydroConfig {
    fn default() -> Self {
        HydroConfig::new(25, 50, 0)
    }
}

impl HydroConfig {
    /// Default instance family at a given scale: two reservoirs, two
    /// thermal units and a sinusoidal wet/dry cycle.
    pub fn new(horizon: usize, realizations_per_stage: usize, seed: u64) -> Self {
        let seasonal = (0..12)
            .map(|m| 1.0 + 0.5 * (2.0 * std::f64::consts::PI * m as f64 / 12.0).sin())
            .collect();
        HydroConfig {
            n_reservoirs: 2,
            n_thermal: 2,
            horizon,
            realizations_per_stage,
            demand: vec![3.0; horizon],
            inflow_mean: 1.0,
            inflow_spread: 0.4,
            seasonal,
            thermal_costs: vec![1.0, 2.0],
            shortage_penalty: 20.0,
            capacities: vec![5.0, 5.0],
            turbine_limits: vec![1.0, 1.0],
            spill_allowed: true,
            initial_fill: 0.5,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.horizon < 2 {
            return bad(format!("horizon {} < 2", self.horizon));
        }
        if self.n_reservoirs == 0 || self.realizations_per_stage == 0 {
            return bad("need at least one reservoir and one realization".into());
        }
        if self.demand.len() != self.horizon {
            return bad(format!(
                "demand has {} entries for horizon {}",
                self.demand.len(),
                self.horizon
            ));
        }
        if self.demand.iter().any(|&d| d < 0.0) {
            return bad("negative demand".into());
        }
        if self.seasonal.len() != 12 || self.seasonal.iter().any(|&s| s <= 0.0) {
            return bad("seasonal curve must have 12 positive multipliers".into());
        }
        if self.thermal_costs.len() != self.n_thermal {
            return bad(format!(
                "{} thermal costs for {} units",
                self.thermal_costs.len(),
                self.n_thermal
            ));
        }
        if self.thermal_costs.iter().any(|&c| c <= 0.0)
            || self.thermal_costs.windows(2).any(|w| w[1] < w[0])
        {
            return bad("thermal costs must be positive and nondecreasing".into());
        }
        let max_thermal = self.thermal_costs.iter().cloned().fold(0.0, f64::max);
        if self.shortage_penalty <= max_thermal {
            return bad(format!(
                "shortage penalty {} must exceed the dearest thermal cost {max_thermal}",
                self.shortage_penalty
            ));
        }
        for (name, v) in [("capacities", &self.capacities), ("turbine_limits", &self.turbine_limits)]
        {
            if v.len() != self.n_reservoirs {
                return bad(format!("{name} has {} entries for {} reservoirs", v.len(), self.n_reservoirs));
            }
            if v.iter().any(|&x| x <= 0.0) {
                return bad(format!("{name} must be positive"));
            }
        }
        if !(0.0..=1.0).contains(&self.initial_fill) {
            return bad(format!("initial fill {} outside [0, 1]", self.initial_fill));
        }
        if self.inflow_mean < 0.0 || self.inflow_spread < 0.0 {
            return bad("inflow mean and spread must be nonnegative".into());
        }
        Ok(())
    }

    fn n_vars(&self) -> usize {
        let spill = if self.spill_allowed { self.n_reservoirs } else { 0 };
        4 * self.n_reservoirs + spill + self.n_thermal + 1
    }

    fn n_rows(&self) -> usize {
        3 * self.n_reservoirs + 1
    }
}

/// Build the scenario lattice for a hydro-thermal configuration.
///
/// Stage 1 is deterministic (inflow at its seasonal mean, initial storage in
/// the rhs); stages `2..=T` draw `realizations_per_stage` equiprobable
/// inflow vectors.
pub fn generate_hydro(config: &HydroConfig) -> Result<ScenarioLattice> {
    config.validate()?;
    let r = config.n_reservoirs;
    let j = config.n_thermal;
    let n = config.n_vars();
    let m = config.n_rows();
    // Column layout and the rows they enter.
    let col_storage = |i: usize| i;
    let col_turbine = |i: usize| r + i;
    let spill_cols = if config.spill_allowed { r } else { 0 };
    let col_spill = |i: usize| 2 * r + i;
    let col_thermal = |u: usize| 2 * r + spill_cols + u;
    let col_shortage = 2 * r + spill_cols + j;
    let col_cap_slack = |i: usize| 2 * r + spill_cols + j + 1 + i;
    let col_turbine_slack = |i: usize| 3 * r + spill_cols + j + 1 + i;
    let row_water = |i: usize| i;
    let row_balance = r;
    let row_cap = |i: usize| r + 1 + i;
    let row_turbine = |i: usize| 2 * r + 1 + i;

    let mut cost = DVector::zeros(n);
    for u in 0..j {
        cost[col_thermal(u)] = config.thermal_costs[u];
    }
    cost[col_shortage] = config.shortage_penalty;

    let mut recourse = DMatrix::zeros(m, n);
    for i in 0..r {
        recourse[(row_water(i), col_storage(i))] = 1.0;
        recourse[(row_water(i), col_turbine(i))] = 1.0;
        if config.spill_allowed {
            recourse[(row_water(i), col_spill(i))] = 1.0;
        }
        recourse[(row_balance, col_turbine(i))] = 1.0;
        recourse[(row_cap(i), col_storage(i))] = 1.0;
        recourse[(row_cap(i), col_cap_slack(i))] = 1.0;
        recourse[(row_turbine(i), col_turbine(i))] = 1.0;
        recourse[(row_turbine(i), col_turbine_slack(i))] = 1.0;
    }
    for u in 0..j {
        recourse[(row_balance, col_thermal(u))] = 1.0;
    }
    recourse[(row_balance, col_shortage)] = 1.0;

    // Coupling to the previous stage: water balance reads last storage.
    let mut tech = DMatrix::zeros(m, n);
    for i in 0..r {
        tech[(row_water(i), col_storage(i))] = -1.0;
    }

    let seasonal_mean = |t: usize| config.seasonal[(t - 1) % 12] * config.inflow_mean;
    let base_rhs = |t: usize, inflows: &[f64]| {
        let mut rhs = DVector::zeros(m);
        for i in 0..r {
            rhs[row_water(i)] = inflows[i];
            rhs[row_cap(i)] = config.capacities[i];
            rhs[row_turbine(i)] = config.turbine_limits[i];
        }
        rhs[row_balance] = config.demand[t - 1];
        rhs
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut stages = Vec::with_capacity(config.horizon);
    // Stage 1: deterministic, no incoming state, initial storage in the rhs.
    let mut first_rhs = base_rhs(1, &vec![seasonal_mean(1); r]);
    for i in 0..r {
        first_rhs[row_water(i)] += config.initial_fill * config.capacities[i];
    }
    stages.push(StageData {
        index: 1,
        cost: cost.clone(),
        recourse: recourse.clone(),
        realizations: vec![Realization {
            tech: DMatrix::zeros(m, 0),
            rhs: first_rhs,
            probability: 1.0,
        }],
    });
    for t in 2..=config.horizon {
        let k = config.realizations_per_stage;
        let mut realizations = Vec::with_capacity(k);
        for _ in 0..k {
            let inflows: Vec<f64> = (0..r)
                .map(|_| sample_inflow(&mut rng, seasonal_mean(t), config.inflow_spread))
                .collect();
            realizations.push(Realization {
                tech: tech.clone(),
                rhs: base_rhs(t, &inflows),
                probability: 1.0 / k as f64,
            });
        }
        stages.push(StageData {
            index: t,
            cost: cost.clone(),
            recourse: recourse.clone(),
            realizations,
        });
    }
    ScenarioLattice { stages }.validated()
}

/// One log-normal inflow draw with the given mean, or the mean itself when
/// the distribution degenerates.
fn sample_inflow(rng: &mut ChaCha8Rng, mean: f64, spread: f64) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    if spread == 0.0 {
        return mean;
    }
    // Location chosen so the distribution's mean is the requested one.
    let location = mean.ln() - 0.5 * spread * spread;
    let dist = LogNormal::new(location, spread).expect("validated spread");
    dist.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dep::{solve_dep, DEFAULT_NODE_CAP};

    fn tiny() -> HydroConfig {
        let mut c = HydroConfig::new(3, 2, 7);
        c.n_reservoirs = 1;
        c.n_thermal = 1;
        c.demand = vec![2.0, 3.0, 4.0];
        c.thermal_costs = vec![5.0];
        c.shortage_penalty = 50.0;
        c.capacities = vec![10.0];
        c.turbine_limits = vec![10.0];
        c
    }

    #[test]
    fn dimensions_are_constant_across_stages() {
        let lat = generate_hydro(&tiny()).unwrap();
        assert_eq!(lat.horizon(), 3);
        // storage, turbine, spill, thermal, shortage, 2 slacks = 7 columns;
        // water + balance + 2 bound rows = 4 rows.
        for t in 1..=3 {
            let s = lat.stage(t);
            assert_eq!(s.n_vars(), 7);
            assert_eq!(s.n_rows(), 4);
            assert_eq!(s.realizations.len(), if t == 1 { 1 } else { 2 });
            for r in &s.realizations {
                assert_eq!(r.tech.ncols(), if t == 1 { 0 } else { 7 });
            }
        }
        // Shortage column: in the balance row with the penalty cost.
        let s = lat.stage(2);
        assert_eq!(s.cost[4], 50.0);
        assert_eq!(s.recourse[(1, 4)], 1.0);
        assert!(s.cost.iter().all(|&c| c >= 0.0));
    }

    #[test]
    fn zero_inflow_costs_cheapest_thermal_everywhere() {
        let mut c = tiny();
        c.inflow_mean = 0.0;
        c.initial_fill = 0.0;
        let lat = generate_hydro(&c).unwrap();
        let sol = solve_dep(&lat, DEFAULT_NODE_CAP).unwrap();
        // No water at all: every stage burns thermal at cost 5.
        assert!((sol.objective - 5.0 * (2.0 + 3.0 + 4.0)).abs() < 1e-7);
    }

    #[test]
    fn abundant_inflow_is_free() {
        let mut c = tiny();
        c.inflow_mean = 10.0;
        c.inflow_spread = 0.0;
        c.seasonal = vec![1.0; 12];
        c.capacities = vec![100.0];
        c.turbine_limits = vec![100.0];
        let lat = generate_hydro(&c).unwrap();
        let sol = solve_dep(&lat, DEFAULT_NODE_CAP).unwrap();
        assert!(sol.objective.abs() < 1e-7);
    }

    #[test]
    fn generation_is_deterministic_in_the_seed() {
        let a = generate_hydro(&HydroConfig::new(4, 3, 11)).unwrap();
        let b = generate_hydro(&HydroConfig::new(4, 3, 11)).unwrap();
        let c = generate_hydro(&HydroConfig::new(4, 3, 12)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn inflows_follow_the_seasonal_curve() {
        let mut cfg = HydroConfig::new(14, 1, 0);
        cfg.inflow_spread = 0.0;
        let lat = generate_hydro(&cfg).unwrap();
        // Stage 13 wraps around to the first seasonal entry.
        let first = lat.stage(2).realizations[0].rhs[0];
        let wrapped = lat.stage(14).realizations[0].rhs[0];
        assert!((first - cfg.seasonal[1] * cfg.inflow_mean).abs() < 1e-12);
        assert!((wrapped - cfg.seasonal[1] * cfg.inflow_mean).abs() < 1e-12);
    }

    #[test]
    fn config_validation_catches_bad_inputs() {
        let mut c = tiny();
        c.shortage_penalty = 4.0;
        assert!(c.validate().is_err());
        let mut c = tiny();
        c.thermal_costs = vec![5.0, 3.0];
        c.n_thermal = 2;
        assert!(c.validate().is_err());
        let mut c = tiny();
        c.seasonal[3] = -0.1;
        assert!(c.validate().is_err());
        let mut c = tiny();
        c.demand.pop();
        assert!(c.validate().is_err());
        let mut c = tiny();
        c.capacities = vec![0.0];
        assert!(c.validate().is_err());
    }
}
