//! Run configuration, the acceptance suite and its reports.
//!
//! A [`RunConfig`] is read from a TOML file of flat `key = value` pairs (plus
//! an optional `[tolerances]` table); [`run_suite`] executes every check and
//! writes `report.json` and the CSV tables into the output directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::angular::AngularMesh;
use crate::bvp::{
    apriori_check, apriori_stability, check_invariants, deficit_consistency, ratio_trace, refine_run, search_amplitude,
    solve_ladder, solve_weak, strong_limit, two_sided_bound, AprioriReport, BarrierSpec, StrongLimitOptions,
    WeakOptions, WeakSingularityRun, MAX_BARRIER_RADIUS,
};
use crate::capacity::{classify_removability, sweep, threshold_consistency, Regime};
use crate::error::{Error, Result};
use crate::fieldops::{interior_nodes, lmu_apply, martin_field, rayleigh_lambda, sci, weak_tail, AxiGrid};
use crate::hemisphere::{boundary_exponent_fit, ode_residual, solve_omega, uniqueness_probe, HemisphereSolution};
use crate::params::{ell, exponent_pack, grad_identity_gap, phi_mu, ExponentPack, HardyParams};
use crate::stats::observed_orders;

/// Dimensions and Hardy coefficients of the closed-form sweeps.
pub const SWEEP_DIMENSIONS: [usize; 4] = [3, 4, 5, 6];
pub const SWEEP_MUS: [f64; 7] = [0.01, 0.05, 0.09, 0.13, 0.17, 0.21, 0.25];

/// Coefficients of the Rayleigh check.
pub const EIG_MUS: [f64; 3] = [0.01, 0.1, 0.25];
const EIG_TRIALS: usize = 4;

/// Base grid of the Martin residual check, refined twice.
const KERNEL_GRID: (f64, usize, usize) = (1e-2, 21, 21);

const SUPERCRITICAL_PROBE: f64 = 1.45;

/// Environment variable naming the default output directory.
pub const OUTPUT_ENV: &str = "HARDY_LAB_OUT";

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub identity: f64,
    pub hemisphere_residual: f64,
    pub bracket_slack: f64,
    pub boundary_exponent: f64,
    pub uniqueness: f64,
    pub harmonic_order: f64,
    pub tail_exponent: f64,
    pub ratio_band: f64,
    pub r_min_stability: f64,
    pub monotone_slack: f64,
    pub deficit: f64,
    pub profile_error: f64,
    /// Ratios must lie in `[1/b, b]`.
    pub refinement_band: f64,
    pub barrier: f64,
    pub threshold: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            identity: 1e-12,
            hemisphere_residual: 1e-8,
            bracket_slack: 1e-9,
            boundary_exponent: 0.01,
            uniqueness: 1e-6,
            harmonic_order: 1.8,
            tail_exponent: 0.10,
            ratio_band: 0.02,
            r_min_stability: 0.01,
            monotone_slack: 1e-10,
            deficit: 1e-2,
            profile_error: 0.05,
            refinement_band: 1.25,
            barrier: 1e-9,
            threshold: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    pub mu: f64,
    pub q: f64,
    /// Hemisphere mesh size `M`.
    pub angular_nodes: usize,
    /// Angular nodes of the half-ball solves.
    pub bvp_angular_nodes: usize,
    /// Radial nodes `J` of the half-ball solves.
    pub radial_nodes: usize,
    pub r_min: f64,
    pub k: f64,
    pub ladder: Vec<f64>,
    pub strong_ladder: Vec<f64>,
    pub strong_r_min: f64,
    pub strong_log_step: f64,
    pub strong_outer_step: f64,
    pub strong_angular_nodes: usize,
    pub tail_r_min: f64,
    pub tail_radial_nodes: usize,
    pub tail_angular_nodes: usize,
    pub eig_r_min: f64,
    pub eig_radial_nodes: usize,
    pub eig_angular_nodes: usize,
    pub angle_samples: usize,
    pub barrier_samples: usize,
    pub seed: u64,
    /// Runs the closed-form stages alongside the solves.
    pub parallel: bool,
    pub output_dir: Option<PathBuf>,
    pub tolerances: Tolerances,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 3,
            mu: 0.25,
            q: 1.2,
            angular_nodes: 400,
            bvp_angular_nodes: 81,
            radial_nodes: 461,
            r_min: 1e-5,
            k: 1.0,
            ladder: vec![0.5, 1.0, 2.0, 4.0],
            strong_ladder: vec![1e14, 1e15, 1e16, 1e17],
            strong_r_min: 1e-10,
            strong_log_step: 0.02,
            strong_outer_step: 5e-6,
            strong_angular_nodes: 41,
            tail_r_min: 1e-6,
            tail_radial_nodes: 300,
            tail_angular_nodes: 41,
            eig_r_min: 1e-4,
            eig_radial_nodes: 400,
            eig_angular_nodes: 41,
            angle_samples: 10_000,
            barrier_samples: 200,
            seed: DEFAULT_SEED,
            parallel: false,
            output_dir: None,
            tolerances: Tolerances::default(),
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn increasing(name: &str, xs: &[f64]) -> Result<()> {
    if xs.is_empty() || !xs.iter().all(|k| *k > 0.0 && k.is_finite()) || xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(config_err(format!("{name} must be a nonempty, positive, strictly increasing list")));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err(e.to_string()))
    }

    pub fn hardy(&self) -> Result<HardyParams> {
        HardyParams::new(self.n, self.mu).map_err(|e| config_err(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.hardy()?;
        if !(self.q > 1.0 && self.q < 2.0) {
            return Err(config_err(format!("q = {} must lie in (1, 2)", self.q)));
        }
        for (name, r) in [("r_min", self.r_min), ("strong_r_min", self.strong_r_min), ("tail_r_min", self.tail_r_min), ("eig_r_min", self.eig_r_min)] {
            if !(r > 0.0 && r <= 0.1) {
                return Err(config_err(format!("{name} = {r} must lie in (0, 0.1]")));
            }
        }
        for (name, m) in [
            ("angular_nodes", self.angular_nodes),
            ("bvp_angular_nodes", self.bvp_angular_nodes),
            ("strong_angular_nodes", self.strong_angular_nodes),
            ("tail_angular_nodes", self.tail_angular_nodes),
            ("eig_angular_nodes", self.eig_angular_nodes),
        ] {
            if m < 11 {
                return Err(config_err(format!("{name} = {m} must be at least 11")));
            }
        }
        for (name, j) in [
            ("radial_nodes", self.radial_nodes),
            ("tail_radial_nodes", self.tail_radial_nodes),
            ("eig_radial_nodes", self.eig_radial_nodes),
        ] {
            if j < 11 {
                return Err(config_err(format!("{name} = {j} must be at least 11")));
            }
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(config_err(format!("k = {} must be positive", self.k)));
        }
        increasing("ladder", &self.ladder)?;
        increasing("strong_ladder", &self.strong_ladder)?;
        if !(self.strong_outer_step > 0.0 && self.strong_outer_step <= self.strong_log_step) {
            return Err(config_err("need 0 < strong_outer_step ≤ strong_log_step"));
        }
        if self.angle_samples == 0 || self.barrier_samples < 2 {
            return Err(config_err("angle_samples must be positive and barrier_samples at least 2"));
        }
        let t = &self.tolerances;
        let all = [
            t.identity,
            t.hemisphere_residual,
            t.bracket_slack,
            t.boundary_exponent,
            t.uniqueness,
            t.harmonic_order,
            t.tail_exponent,
            t.ratio_band,
            t.r_min_stability,
            t.monotone_slack,
            t.deficit,
            t.profile_error,
            t.barrier,
            t.threshold,
        ];
        if !all.iter().all(|x| *x >= 0.0 && x.is_finite()) || !(t.refinement_band > 1.0) {
            return Err(config_err("tolerances must be finite and nonnegative, refinement_band above 1"));
        }
        Ok(())
    }

    pub fn bvp_grid(&self) -> Result<AxiGrid> {
        AxiGrid::new(self.r_min, self.radial_nodes, AngularMesh::chebyshev(self.bvp_angular_nodes)?)
    }

    /// Grid with the same log step reaching down to `r_min / 2`.
    fn halved_grid(&self) -> Result<AxiGrid> {
        let h = -self.r_min.ln() / (self.radial_nodes - 1) as f64;
        let extra = (std::f64::consts::LN_2 / h).round().max(1.0) as usize;
        AxiGrid::new(0.5 * self.r_min, self.radial_nodes + extra, AngularMesh::chebyshev(self.bvp_angular_nodes)?)
    }

    fn coarse_grid(&self) -> Result<AxiGrid> {
        AxiGrid::new(
            self.r_min,
            self.radial_nodes.div_ceil(2),
            AngularMesh::chebyshev(self.bvp_angular_nodes.div_ceil(2))?,
        )
    }

    pub fn strong_grid(&self) -> Result<AxiGrid> {
        AxiGrid::graded(
            self.strong_r_min,
            self.strong_log_step,
            self.strong_outer_step,
            AngularMesh::chebyshev(self.strong_angular_nodes)?,
        )
    }

    pub fn tail_grid(&self) -> Result<AxiGrid> {
        AxiGrid::new(self.tail_r_min, self.tail_radial_nodes, AngularMesh::chebyshev(self.tail_angular_nodes)?)
    }

    pub fn eig_grid(&self) -> Result<AxiGrid> {
        AxiGrid::new(self.eig_r_min, self.eig_radial_nodes, AngularMesh::chebyshev(self.eig_angular_nodes)?)
    }

    /// Ladder of the monotonicity check with `k` inserted.
    fn full_ladder(&self) -> Vec<f64> {
        let mut ks = self.ladder.clone();
        if ks.iter().all(|x| (x - self.k).abs() > 1e-15 * self.k) {
            ks.push(self.k);
            ks.sort_by(|a, b| a.total_cmp(b));
        }
        ks
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = ">")]
    Above,
    /// The stage refused a supercritical `q`; `measured` is `q`, `tolerance`
    /// is `q_crit`.
    #[serde(rename = "refused")]
    Refused,
}

impl Relation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Above => ">",
            Relation::Refused => "refused",
        }
    }

    fn holds(&self, measured: f64, tolerance: f64) -> bool {
        match self {
            Relation::AtMost => measured <= tolerance,
            Relation::AtLeast => measured >= tolerance,
            Relation::Above => measured > tolerance,
            Relation::Refused => measured >= tolerance,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub criterion: u8,
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub relation: Relation,
    pub tolerance: f64,
    pub detail: String,
    /// Wall time of the stage that produced the check.
    pub seconds: f64,
}

impl Check {
    fn new(criterion: u8, name: &str, measured: f64, relation: Relation, tolerance: f64) -> Self {
        Self {
            criterion,
            name: name.to_string(),
            passed: relation.holds(measured, tolerance),
            measured,
            relation,
            tolerance,
            detail: String::new(),
            seconds: 0.0,
        }
    }

    fn detail(mut self, d: impl Into<String>) -> Self {
        self.detail = d.into();
        self
    }

    fn refused(criterion: u8, name: &str, q: f64, q_crit: f64) -> Self {
        Self::new(criterion, name, q, Relation::Refused, q_crit).detail("supercritical q refused as expected")
    }
}

/// Change of a reported quantity under a mesh change.
#[derive(Debug, Clone, Serialize)]
pub struct Sensitivity {
    pub quantity: String,
    pub change: String,
    pub coarse: f64,
    pub fine: f64,
    pub relative_delta: f64,
}

impl Sensitivity {
    fn new(quantity: &str, change: &str, coarse: f64, fine: f64) -> Self {
        Self {
            quantity: quantity.to_string(),
            change: change.to_string(),
            coarse,
            fine,
            relative_delta: fine / coarse - 1.0,
        }
    }
}

/// Pass/fail of one acceptance criterion, aggregated over its checks.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionSummary {
    pub criterion: u8,
    pub passed: bool,
    pub checks: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub config: RunConfig,
    pub exponents: ExponentPack,
    pub checks: Vec<Check>,
    pub sensitivity: Vec<Sensitivity>,
    pub seconds: f64,
    pub passed: bool,
}

impl Report {
    pub fn criteria(&self) -> Vec<CriterionSummary> {
        let mut ids: Vec<u8> = self.checks.iter().map(|c| c.criterion).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.into_iter()
            .map(|id| {
                let cs: Vec<&Check> = self.checks.iter().filter(|c| c.criterion == id).collect();
                let mut seconds: Vec<f64> = cs.iter().map(|c| c.seconds).collect();
                seconds.dedup();
                CriterionSummary {
                    criterion: id,
                    passed: cs.iter().all(|c| c.passed),
                    checks: cs.len(),
                    seconds: seconds.iter().sum(),
                }
            })
            .collect()
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// A CSV table: header row plus rows of preformatted cells.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn write_to(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.write_to(fs::File::create(path)?)
    }
}

/// `phi,omega,v,residual` rows of a hemisphere solution. The residual cell
/// is empty at the pole and at the boundary node.
pub fn omega_table(sol: &HemisphereSolution) -> Result<Table> {
    let res = ode_residual(sol)?;
    let m = sol.omega.len();
    let mut t = Table::new(&["phi", "omega", "v", "residual"]);
    for i in 0..m {
        let r = if i == 0 || i + 1 == m { String::new() } else { sci(res[i - 1]) };
        t.push(vec![sci(sol.phi()[i]), sci(sol.omega[i]), sci(sol.v[i]), r]);
    }
    Ok(t)
}

/// `q,regime,s,p,sp,removable` rows over the capacity sweep grid.
pub fn capacity_table(hp: &HardyParams) -> Table {
    let mut t = Table::new(&["q", "regime", "s", "p", "sp", "removable"]);
    for v in sweep(hp) {
        t.push(vec![
            sci(v.q),
            v.regime.as_str().to_string(),
            sci(v.s),
            sci(v.p),
            sci(v.sp()),
            v.point_removable.to_string(),
        ]);
    }
    t
}

fn checks_table(checks: &[Check]) -> Table {
    let mut t = Table::new(&["criterion", "name", "passed", "measured", "relation", "tolerance"]);
    for c in checks {
        t.push(vec![
            c.criterion.to_string(),
            c.name.clone(),
            c.passed.to_string(),
            sci(c.measured),
            c.relation.as_str().to_string(),
            sci(c.tolerance),
        ]);
    }
    t
}

/// Output of one stage: checks, sensitivities and named tables.
#[derive(Default)]
struct Stage {
    checks: Vec<Check>,
    sensitivity: Vec<Sensitivity>,
    tables: Vec<(&'static str, Table)>,
}

impl Stage {
    fn timed(f: impl FnOnce(&mut Stage) -> Result<()>) -> Result<Stage> {
        let start = Instant::now();
        let mut s = Stage::default();
        f(&mut s)?;
        let secs = start.elapsed().as_secs_f64();
        for c in &mut s.checks {
            c.seconds = secs;
        }
        Ok(s)
    }

    fn merge(&mut self, other: Stage) {
        self.checks.extend(other.checks);
        self.sensitivity.extend(other.sensitivity);
        self.tables.extend(other.tables);
    }
}

fn sweep_params() -> impl Iterator<Item = HardyParams> {
    SWEEP_DIMENSIONS
        .into_iter()
        .flat_map(|n| SWEEP_MUS.into_iter().map(move |mu| HardyParams::new(n, mu).expect("sweep grid is admissible")))
}

fn critical_identity(cfg: &RunConfig) -> Result<Stage> {
    Stage::timed(|s| {
        let gap = sweep_params()
            .map(|hp| (ell(hp.n(), hp.q_crit()) - hp.kappa()).abs())
            .fold(0.0, f64::max);
        s.checks.push(
            Check::new(1, "ell(N, q_crit) = kappa on the sweep grid", gap, Relation::AtMost, cfg.tolerances.identity)
                .detail(format!("{} (N, mu) pairs", SWEEP_DIMENSIONS.len() * SWEEP_MUS.len())),
        );
        Ok(())
    })
}

fn eigenfunction_identity(cfg: &RunConfig) -> Result<Stage> {
    Stage::timed(|s| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let gap = (0..cfg.angle_samples)
            .map(|_| grad_identity_gap(rng.gen_range(0.0..std::f64::consts::FRAC_PI_2)).abs())
            .fold(0.0, f64::max);
        s.checks.push(
            Check::new(2, "|grad phi0|^2 + phi0^2 - 1 at sampled angles", gap, Relation::AtMost, cfg.tolerances.identity)
                .detail(format!("{} angles, seed {}", cfg.angle_samples, cfg.seed)),
        );
        Ok(())
    })
}

fn hemisphere_stage(cfg: &RunConfig, hp: &HardyParams, pack: &ExponentPack) -> Result<Stage> {
    Stage::timed(|s| {
        let tol = &cfg.tolerances;
        let mesh = AngularMesh::chebyshev(cfg.angular_nodes)?;
        let probe = if SUPERCRITICAL_PROBE >= hp.q_crit() {
            SUPERCRITICAL_PROBE
        } else {
            0.5 * (hp.q_crit() + 2.0)
        };
        let refused = matches!(solve_omega(hp, probe, &mesh), Err(Error::Supercritical { .. }));
        s.checks.push(
            Check::new(3, "hemisphere refuses a supercritical q", probe, Relation::Refused, if refused { hp.q_crit() } else { f64::INFINITY })
                .detail(format!("probe q = {probe}")),
        );
        if !pack.is_subcritical() {
            s.checks.push(Check::refused(3, "hemisphere solve at configured q", cfg.q, hp.q_crit()));
            return Ok(());
        }
        let sol = solve_omega(hp, cfg.q, &mesh).map_err(|e| e.at_stage("hemisphere"))?;
        s.checks.push(Check::new(3, "hemisphere scaled residual", sol.residual_sup, Relation::AtMost, tol.hemisphere_residual));
        let g1 = pack.gamma1.expect("subcritical pack");
        let excess = sol
            .phi()
            .iter()
            .zip(&sol.omega)
            .map(|(p, w)| w - g1 * phi_mu(*p, hp.alpha()))
            .fold(f64::NEG_INFINITY, f64::max);
        s.checks.push(
            Check::new(3, "omega <= gamma1 phi_mu nodewise", excess, Relation::AtMost, tol.bracket_slack)
                .detail(format!("gamma1 = {g1}")),
        );
        let slope = boundary_exponent_fit(&sol).map_err(|e| e.at_stage("hemisphere"))?;
        s.checks.push(
            Check::new(3, "boundary exponent of omega", (slope / hp.alpha() - 1.0).abs(), Relation::AtMost, tol.boundary_exponent)
                .detail(format!("fitted {slope:.6}, alpha {}", hp.alpha())),
        );
        let gap = uniqueness_probe(hp, cfg.q, &mesh).map_err(|e| e.at_stage("hemisphere"))?;
        s.checks.push(Check::new(3, "uniqueness probe gap", gap, Relation::AtMost, tol.uniqueness));
        s.tables.push(("omega.csv", omega_table(&sol)?));
        Ok(())
    })
}

fn kernel_stage(cfg: &RunConfig, hp: &HardyParams) -> Result<Stage> {
    Stage::timed(|s| {
        let (errs, orders) = martin_residuals(hp, &kernel_grid()?, 2)?;
        let worst = orders.iter().copied().fold(f64::INFINITY, f64::min);
        s.checks.push(
            Check::new(4, "Martin residual order under two doublings", worst, Relation::AtLeast, cfg.tolerances.harmonic_order)
                .detail(format!("errors {}, orders {orders:.3?}", errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(" "))),
        );

        let tg = cfg.tail_grid()?;
        let kf = martin_field(&tg, hp);
        let (n, a) = (hp.nf(), hp.alpha());
        let value = weak_tail(&kf, hp.n(), 0.0).map_err(|e| e.at_stage("kernel tails"))?;
        let target = n / (n + a - 2.0);
        s.checks.push(
            Check::new(5, "weak-L^p exponent of K", (value.p_hat / target - 1.0).abs(), Relation::AtMost, cfg.tolerances.tail_exponent)
                .detail(format!("fitted {:.5}, expected {target:.5}", value.p_hat)),
        );
        let grad = kf.with_gradient().gradient_magnitude();
        let gtail = weak_tail(&grad, hp.n(), a).map_err(|e| e.at_stage("kernel tails"))?;
        let target = (n + a) / (n + a - 1.0);
        s.checks.push(
            Check::new(5, "weak-L^p exponent of |grad K|", (gtail.p_hat / target - 1.0).abs(), Relation::AtMost, cfg.tolerances.tail_exponent)
                .detail(format!("fitted {:.5}, expected {target:.5}", gtail.p_hat)),
        );
        Ok(())
    })
}

/// Base grid of the Martin residual check.
pub fn kernel_grid() -> Result<AxiGrid> {
    let (r_min, nr, m) = KERNEL_GRID;
    AxiGrid::new(r_min, nr, AngularMesh::chebyshev(m)?)
}

/// Scaled residual `max r²|L_μ K|/K` of the discrete operator applied to the
/// exact Martin kernel on `grid` and `doublings` successive refinements,
/// with the observed orders between them.
pub fn martin_residuals(hp: &HardyParams, grid: &AxiGrid, doublings: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut g = grid.clone();
    let mut errs = Vec::with_capacity(doublings + 1);
    for level in 0..=doublings {
        let k = martin_field(&g, hp);
        let res = lmu_apply(&k, hp)?;
        let e = interior_nodes(&g)
            .map(|(j, i)| (res.at(j, i) * g.radii()[j].powi(2) / k.at(j, i)).abs())
            .fold(0.0, f64::max);
        errs.push(e);
        if level < doublings {
            g = g.refined();
        }
    }
    let orders = observed_orders(&errs);
    Ok((errs, orders))
}

fn eig_stage(cfg: &RunConfig) -> Result<Stage> {
    Stage::timed(|s| {
        let g = cfg.eig_grid()?;
        for mu in EIG_MUS {
            let hp = HardyParams::new(cfg.n, mu)?;
            let rep = rayleigh_lambda(&g, &hp, EIG_TRIALS);
            s.checks.push(Check::new(12, &format!("Rayleigh estimate at mu = {mu}"), rep.lambda, Relation::Above, 0.0));
        }
        Ok(())
    })
}

fn barrier_stage(cfg: &RunConfig) -> Result<Stage> {
    Stage::timed(|s| {
        let q = 4.0 / 3.0;
        let cases = [
            ("power barrier, mu = 3/16, gamma = 0.6, b = 9", 3.0 / 16.0, Some(0.6)),
            ("log barrier, mu = 1/4, b = 9", 0.25, None),
        ];
        for (name, mu, gamma) in cases {
            let hp = HardyParams::new(3, mu)?;
            let spec = BarrierSpec::new(&hp, gamma, 9.0, MAX_BARRIER_RADIUS)?;
            let rep = search_amplitude(&spec, &hp, q, cfg.barrier_samples).map_err(|e| e.at_stage("barrier"))?;
            s.checks.push(
                Check::new(10, name, rep.min_relative, Relation::AtLeast, -cfg.tolerances.barrier)
                    .detail(format!("amplitude {}, {} sample points", rep.spec.amplitude, rep.sample_points)),
            );
        }
        Ok(())
    })
}

fn capacity_stage(cfg: &RunConfig, hp: &HardyParams) -> Result<Stage> {
    Stage::timed(|s| {
        let worst = sweep_params().map(|h| threshold_consistency(&h)).fold(0.0, f64::max);
        s.checks.push(Check::new(11, "capacity threshold at q_crit", worst, Relation::AtMost, cfg.tolerances.threshold));

        let mut wrong = 0usize;
        let mut total = 0usize;
        for h in sweep_params() {
            for v in sweep(&h) {
                total += 1;
                let ok = if v.q < h.q_crit() {
                    v.regime == Regime::Subcritical && !v.point_removable
                } else {
                    v.regime != Regime::Subcritical && v.point_removable
                };
                wrong += usize::from(!ok);
            }
        }
        s.checks.push(
            Check::new(11, "removability flips exactly at q_crit", wrong as f64, Relation::AtMost, 0.0)
                .detail(format!("{total} verdicts")),
        );

        let h = HardyParams::new(3, 0.25)?;
        let v = classify_removability(&h, h.alpha() + 1.0)?;
        let certifies = v.regime == Regime::SupercriticalEpsilonCase && v.epsilon_window.is_some_and(|w| w.certifies());
        let upper = v.epsilon_window.map_or(0.0, |w| w.certified_upper);
        s.checks.push(
            Check::new(11, "epsilon window certifies at q = alpha + 1", if certifies { upper } else { 0.0 }, Relation::Above, 0.0)
                .detail(format!("window {:?}", v.epsilon_window)),
        );

        let v = classify_removability(hp, cfg.q)?;
        let consistent = if cfg.q < hp.q_crit() {
            v.regime == Regime::Subcritical
        } else {
            v.point_removable
        };
        s.checks.push(
            Check::new(11, "verdict at configured q", f64::from(u8::from(!consistent)), Relation::AtMost, 0.0)
                .detail(format!("{}, removable = {}", v.regime.as_str(), v.point_removable)),
        );
        s.tables.push(("capacity_sweep.csv", capacity_table(hp)));
        Ok(())
    })
}

fn band_deviation(ratio: f64) -> f64 {
    if ratio > 0.0 {
        ratio.ln().abs()
    } else {
        f64::INFINITY
    }
}

fn apriori_checks(s: &mut Stage, cfg: &RunConfig, label: &str, coarse: &AprioriReport, fine: &AprioriReport) {
    let st = apriori_stability(coarse, fine);
    let dev = band_deviation(st.value_ratio).max(band_deviation(st.gradient_ratio));
    s.checks.push(
        Check::new(9, &format!("a priori sups refinement-stable ({label})"), dev, Relation::AtMost, cfg.tolerances.refinement_band.ln())
            .detail(format!("value ratio {:.4}, gradient ratio {:.4}", st.value_ratio, st.gradient_ratio)),
    );
    s.sensitivity.push(Sensitivity::new(&format!("a priori value sup ({label})"), "refinement", coarse.sup_value, fine.sup_value));
    s.sensitivity.push(Sensitivity::new(
        &format!("a priori gradient sup ({label})"),
        "refinement",
        coarse.sup_gradient,
        fine.sup_gradient,
    ));
}

fn finite_sups(runs: &[&WeakSingularityRun]) -> usize {
    runs.iter()
        .filter(|r| {
            let a = apriori_check(&r.field, &r.exponents);
            !(a.sup_value.is_finite() && a.sup_gradient.is_finite())
        })
        .count()
}

/// Largest `u_a − u_b` over consecutive runs of an increasing ladder.
fn ordering_excess(runs: &[WeakSingularityRun]) -> f64 {
    runs.windows(2)
        .flat_map(|w| w[0].field.values.iter().zip(&w[1].field.values).map(|(a, b)| a - b))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn weak_stage(cfg: &RunConfig, hp: &HardyParams, pack: &ExponentPack) -> Result<Stage> {
    Stage::timed(|s| {
        if !pack.is_subcritical() {
            for (c, name) in [
                (6, "weak singularity at configured q"),
                (7, "ladder monotonicity at configured q"),
                (9, "a priori estimates at configured q"),
            ] {
                s.checks.push(Check::refused(c, name, cfg.q, hp.q_crit()));
            }
            return Ok(());
        }
        let tol = &cfg.tolerances;
        let grid = cfg.bvp_grid()?;
        let ks = cfg.full_ladder();
        let runs = solve_ladder(&ks, hp, cfg.q, &grid, &WeakOptions::default()).map_err(|e| e.at_stage("weak ladder"))?;
        let run = runs
            .iter()
            .find(|r| (r.k - cfg.k).abs() <= 1e-15 * cfg.k)
            .expect("k is on the ladder");

        let trace = ratio_trace(run);
        s.checks.push(
            Check::new(6, "extrapolated axis ratio u/(kK)", (trace.limit - 1.0).abs(), Relation::AtMost, tol.ratio_band)
                .detail(format!("limit {:.6} from r in {:?}", trace.limit, trace.r_pair)),
        );
        let halved = solve_weak(cfg.k, hp, cfg.q, &cfg.halved_grid()?).map_err(|e| e.at_stage("weak r_min halved"))?;
        let limit2 = ratio_trace(&halved).limit;
        s.checks.push(
            Check::new(6, "axis ratio stable when r_min is halved", (limit2 / trace.limit - 1.0).abs(), Relation::AtMost, tol.r_min_stability)
                .detail(format!("limits {:.6} and {limit2:.6}", trace.limit)),
        );
        s.sensitivity.push(Sensitivity::new("axis ratio limit", "r_min halved", trace.limit, limit2));
        let deficit = deficit_consistency(run).map_err(|e| e.at_stage("deficit"))?;
        s.checks.push(Check::new(6, "deficit kK - u matches the Green potential of |grad u|^q", deficit, Relation::AtMost, tol.deficit));
        let mut t = Table::new(&["r", "ratio"]);
        for (r, v) in &trace.samples {
            t.push(vec![sci(*r), sci(*v)]);
        }
        s.tables.push(("ratio_trace.csv", t));

        s.checks.push(
            Check::new(7, "u increasing in k nodewise", ordering_excess(&runs), Relation::AtMost, tol.monotone_slack)
                .detail(format!("ladder {ks:?}")),
        );
        let bad = runs
            .iter()
            .filter(|r| check_invariants(r) != (true, true))
            .count();
        s.checks.push(Check::new(7, "0 < u <= kK on every rung", bad as f64, Relation::AtMost, 0.0));

        let all: Vec<&WeakSingularityRun> = runs.iter().chain(std::iter::once(&halved)).collect();
        s.checks.push(Check::new(9, "a priori sups finite (weak runs)", finite_sups(&all) as f64, Relation::AtMost, 0.0));
        let coarse_grid = cfg.coarse_grid()?;
        let coarse = solve_weak(cfg.k, hp, cfg.q, &coarse_grid).map_err(|e| e.at_stage("weak coarse"))?;
        let fine = if coarse_grid.refined().same_as(&grid) {
            run.clone()
        } else {
            refine_run(&coarse, &WeakOptions::default()).map_err(|e| e.at_stage("weak refined"))?
        };
        apriori_checks(
            s,
            cfg,
            &format!("k = {}", cfg.k),
            &apriori_check(&coarse.field, &coarse.exponents),
            &apriori_check(&fine.field, &fine.exponents),
        );
        Ok(())
    })
}

fn strong_stage(cfg: &RunConfig, hp: &HardyParams, pack: &ExponentPack) -> Result<Stage> {
    Stage::timed(|s| {
        if !pack.is_subcritical() {
            s.checks.push(Check::refused(8, "strong limit at configured q", cfg.q, hp.q_crit()));
            return Ok(());
        }
        let tol = &cfg.tolerances;
        let opts = StrongLimitOptions::default();
        let grid = cfg.strong_grid()?;
        let sl = strong_limit(hp, cfg.q, &grid, &cfg.strong_ladder, &opts).map_err(|e| e.at_stage("strong limit"))?;
        let rep = &sl.report;
        s.checks.push(
            Check::new(8, "rescaled top-of-ladder profile against omega", rep.max_relative_error, Relation::AtMost, tol.profile_error)
                .detail(format!(
                    "k = {:e}, window {:?}, cos >= {}",
                    sl.top().k,
                    rep.window,
                    rep.min_cos
                )),
        );
        s.checks.push(Check::new(
            8,
            "strong ladder ordered nodewise",
            ordering_excess(&sl.runs),
            Relation::AtMost,
            tol.monotone_slack,
        ));
        let top = sl.top();
        let fine = refine_run(top, &opts.weak).map_err(|e| e.at_stage("strong refined"))?;
        let fine_bound = two_sided_bound(&fine.field, hp.alpha(), pack.sing_exp, opts.window)?;
        let ratios = [
            fine_bound.c / rep.two_sided.c,
            fine_bound.lower / rep.two_sided.lower,
            fine_bound.upper / rep.two_sided.upper,
        ];
        let dev = ratios.iter().map(|r| band_deviation(*r)).fold(0.0, f64::max);
        s.checks.push(
            Check::new(8, "two-sided bound refinement-stable", dev, Relation::AtMost, tol.refinement_band.ln())
                .detail(format!(
                    "c {:.4} -> {:.4}, ratios {ratios:.4?}",
                    rep.two_sided.c, fine_bound.c
                )),
        );
        s.sensitivity.push(Sensitivity::new("two-sided constant c", "refinement", rep.two_sided.c, fine_bound.c));

        let all: Vec<&WeakSingularityRun> = sl.runs.iter().chain(std::iter::once(&fine)).collect();
        s.checks.push(Check::new(9, "a priori sups finite (strong runs)", finite_sups(&all) as f64, Relation::AtMost, 0.0));
        apriori_checks(
            s,
            cfg,
            &format!("k = {:e}", top.k),
            &apriori_check(&top.field, &top.exponents),
            &apriori_check(&fine.field, &fine.exponents),
        );

        let mut t = Table::new(&["r", "max_relative_error", "axis_ratio"]);
        for p in &rep.samples {
            t.push(vec![sci(p.r), sci(p.max_relative_error), sci(p.axis_ratio)]);
        }
        s.tables.push(("strong_profile.csv", t));
        Ok(())
    })
}

fn closed_form_stages(cfg: &RunConfig, hp: &HardyParams) -> Result<Stage> {
    let mut s = critical_identity(cfg)?;
    s.merge(eigenfunction_identity(cfg)?);
    s.merge(capacity_stage(cfg, hp)?);
    Ok(s)
}

fn solve_stages(cfg: &RunConfig, hp: &HardyParams, pack: &ExponentPack) -> Result<Stage> {
    let mut s = hemisphere_stage(cfg, hp, pack)?;
    s.merge(kernel_stage(cfg, hp)?);
    s.merge(weak_stage(cfg, hp, pack)?);
    s.merge(strong_stage(cfg, hp, pack)?);
    s.merge(barrier_stage(cfg)?);
    s.merge(eig_stage(cfg)?);
    Ok(s)
}

/// Runs every acceptance check for `cfg`. Artifacts are written when
/// `cfg.output_dir` is set.
pub fn run_suite(cfg: &RunConfig) -> Result<Report> {
    cfg.validate()?;
    let start = Instant::now();
    let hp = cfg.hardy()?;
    let pack = exponent_pack(&hp, cfg.q)?;
    let (closed, solves) = if cfg.parallel {
        rayon::join(|| closed_form_stages(cfg, &hp), || solve_stages(cfg, &hp, &pack))
    } else {
        (closed_form_stages(cfg, &hp), solve_stages(cfg, &hp, &pack))
    };
    let mut all = closed?;
    all.merge(solves?);
    all.checks.sort_by_key(|c| c.criterion);
    let passed = all.checks.iter().all(|c| c.passed);
    let report = Report {
        config: cfg.clone(),
        exponents: pack,
        checks: all.checks,
        sensitivity: all.sensitivity,
        seconds: start.elapsed().as_secs_f64(),
        passed,
    };
    if let Some(dir) = &cfg.output_dir {
        write_artifacts(&report, &all.tables, dir)?;
    }
    Ok(report)
}

fn write_artifacts(report: &Report, tables: &[(&'static str, Table)], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)?)?;
    checks_table(&report.checks).write(&dir.join("checks.csv"))?;
    for (name, t) in tables {
        t.write(&dir.join(name))?;
    }
    Ok(())
}
