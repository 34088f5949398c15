//! Batch driver: run configuration, verification suites, report emission.
//!
//! A `RunConfig` (TOML) names a domain, a strictly decreasing grid-spacing
//! schedule, an anchor specification, a suite selection, and seeds. `run`
//! executes the selected suites in a fixed order, collects per-invariant
//! verdicts, and writes a structured summary, per-suite CSV tables, and
//! optional SVG residual plots from a single writer.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::elliptic::{self, CoefficientField};
use crate::error::{Error, Result};
use crate::fields::{self, test_fields, Grid, ScalarField};
use crate::geometry::{self, AnchorSet, ConvexDomain, HalfSpace};
use crate::norms;
use crate::operators::{self, GeneratorScheme};

/// Fixed suite execution order.
pub const SUITE_ORDER: [Suite; 5] = [
    Suite::Geometry,
    Suite::Semigroup,
    Suite::Generator,
    Suite::Equivalence,
    Suite::Elliptic,
];

const SEED_RULE: &str = "suite_seed = global_seed XOR (0x9e3779b97f4a7c15 * (suite_index + 1))";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Geometry,
    Semigroup,
    Generator,
    Equivalence,
    Elliptic,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Self::Geometry => "geometry",
            Self::Semigroup => "semigroup",
            Self::Generator => "generator",
            Self::Equivalence => "equivalence",
            Self::Elliptic => "elliptic",
        }
    }

    fn parse(s: &str) -> Result<Vec<Suite>> {
        match s {
            "all" => Ok(SUITE_ORDER.to_vec()),
            "geometry" => Ok(vec![Self::Geometry]),
            "semigroup" => Ok(vec![Self::Semigroup]),
            "generator" => Ok(vec![Self::Generator]),
            "equivalence" => Ok(vec![Self::Equivalence]),
            "elliptic" => Ok(vec![Self::Elliptic]),
            other => Err(Error::Config(format!("unknown suite '{other}'"))),
        }
    }
}

/// Domain specification, as named built-ins plus general boxes, balls, and
/// half-space lists.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainSpec {
    Interval,
    Square,
    Cube,
    Disk,
    Box { min: Vec<f64>, max: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    HalfSpaces { normals: Vec<Vec<f64>>, offsets: Vec<f64>, interior_point: Vec<f64> },
}

impl DomainSpec {
    fn build(&self) -> Result<ConvexDomain> {
        match self {
            Self::Interval => Ok(ConvexDomain::unit_interval()),
            Self::Square => Ok(ConvexDomain::unit_square()),
            Self::Cube => Ok(ConvexDomain::unit_cube()),
            Self::Disk => Ok(ConvexDomain::unit_disk()),
            Self::Box { min, max } => ConvexDomain::box_domain(min, max),
            Self::Ball { center, radius } => ConvexDomain::ball(center.clone(), *radius),
            Self::HalfSpaces { normals, offsets, interior_point } => {
                if normals.len() != offsets.len() {
                    return Err(Error::Config(
                        "halfspace normals and offsets differ in length".into(),
                    ));
                }
                let hs = normals
                    .iter()
                    .zip(offsets)
                    .map(|(n, &o)| HalfSpace::new(n.clone(), o))
                    .collect();
                ConvexDomain::from_halfspaces(hs, interior_point.clone())
            }
        }
    }

    fn label(&self) -> String {
        match self {
            Self::Interval => "unit interval".into(),
            Self::Square => "unit square".into(),
            Self::Cube => "unit cube".into(),
            Self::Disk => "unit disk".into(),
            Self::Box { min, max } => format!("box {min:?}..{max:?}"),
            Self::Ball { center, radius } => format!("ball r={radius} at {center:?}"),
            Self::HalfSpaces { normals, .. } => format!("{} half-spaces", normals.len()),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AnchorSpec {
    Explicit {
        points: Vec<Vec<f64>>,
        /// skip the determinant tolerance gate (degeneracy experiments)
        #[serde(default)]
        allow_degenerate: bool,
    },
    Auto {
        #[serde(default)]
        candidates: Option<usize>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CoefficientSpec {
    Identity,
    Scaled { value: f64 },
    Diagonal { diag: Vec<f64> },
    RotatedDiagonal { diag: Vec<f64>, angle: f64 },
    SeededSmooth { seed: Option<u64>, amplitude: f64 },
}

impl CoefficientSpec {
    fn build(&self, global_seed: u64) -> CoefficientField {
        match self {
            Self::Identity => CoefficientField::Identity,
            Self::Scaled { value } => CoefficientField::Scaled(*value),
            Self::Diagonal { diag } => CoefficientField::Diagonal(diag.clone()),
            Self::RotatedDiagonal { diag, angle } => {
                CoefficientField::RotatedDiagonal { diag: diag.clone(), angle: *angle }
            }
            Self::SeededSmooth { seed, amplitude } => CoefficientField::SeededSmooth {
                seed: seed.unwrap_or(global_seed),
                amplitude: *amplitude,
            },
        }
    }

    fn label(&self) -> String {
        match self {
            Self::Identity => "identity".into(),
            Self::Scaled { value } => format!("{value} * identity"),
            Self::Diagonal { diag } => format!("diagonal {diag:?}"),
            Self::RotatedDiagonal { diag, angle } => {
                format!("rotated diagonal {diag:?}, angle {angle}")
            }
            Self::SeededSmooth { seed, amplitude } => {
                format!("seeded smooth (seed {seed:?}, amplitude {amplitude})")
            }
        }
    }
}

/// Tolerance overrides; every field has the module default.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// `||T_t|| <= 1 + slack * h`
    pub semigroup_norm_slack: f64,
    /// relative tolerance on strong-continuity monotonicity
    pub continuity_rel: f64,
    /// required residual reduction per mesh halving
    pub contraction_factor: f64,
    /// slack on `C1 <= sqrt(n) * (1 + c1_slack)`
    pub c1_slack: f64,
    /// coercivity margin floor, as a fraction of `gamma_a`
    pub coercivity_frac: f64,
    /// sesquilinear ratio ceiling
    pub sesquilinear_max: f64,
    /// per-anchor weak decomposition residual target on the finest grid
    pub weak_residual_max: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            semigroup_norm_slack: 10.0,
            continuity_rel: 1e-9,
            contraction_factor: 1.5,
            c1_slack: 0.01,
            coercivity_frac: 0.05,
            sesquilinear_max: 1.05,
            weak_residual_max: 0.05,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<String>,
}

/// Parsed and validated run configuration.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSpec,
    /// grid spacings, strictly decreasing
    pub schedule: Vec<f64>,
    pub anchors: AnchorSpec,
    #[serde(default = "default_suites")]
    pub suites: Vec<String>,
    #[serde(default = "default_coefficients")]
    pub coefficients: CoefficientSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_suites() -> Vec<String> {
    vec!["all".into()]
}

fn default_coefficients() -> CoefficientSpec {
    CoefficientSpec::Identity
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    fn validate(&self) -> Result<()> {
        if self.schedule.is_empty() {
            return Err(Error::Config("schedule must not be empty".into()));
        }
        for pair in self.schedule.windows(2) {
            if pair[1] >= pair[0] {
                return Err(Error::Config(format!(
                    "schedule must be strictly decreasing, got {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        if self.schedule.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::Config("grid spacings must be positive".into()));
        }
        for name in &self.suites {
            Suite::parse(name)?;
        }
        Ok(())
    }

    /// Resolves every defaulted decision: domain, anchors, suite order and
    /// per-suite seeds, grids for the full schedule.
    pub fn resolve(&self) -> Result<ResolvedPlan> {
        let domain = self.domain.build()?;
        let mut suites = Vec::new();
        for name in &self.suites {
            for s in Suite::parse(name)? {
                if !suites.contains(&s) {
                    suites.push(s);
                }
            }
        }
        suites.sort_by_key(|s| SUITE_ORDER.iter().position(|o| o == s));
        let anchors = match &self.anchors {
            AnchorSpec::Explicit { points, allow_degenerate } => {
                if *allow_degenerate {
                    AnchorSet::new_unchecked(points.clone())
                } else {
                    AnchorSet::new(&domain, points.clone())?
                }
            }
            AnchorSpec::Auto { candidates } => {
                let count = candidates.unwrap_or(8 * domain.dim());
                geometry::select_anchors(&domain, count, suite_seed(self.seed, 7))?
            }
        };
        // validate the whole schedule up front so failures precede output
        for &h in &self.schedule {
            Grid::new(&domain, h)?;
        }
        Ok(ResolvedPlan {
            domain,
            anchors,
            schedule: self.schedule.clone(),
            suites,
            coefficients: self.coefficients.build(self.seed),
            seed: self.seed,
            tolerances: self.tolerances.clone(),
        })
    }
}

fn suite_seed(global: u64, index: usize) -> u64 {
    global ^ 0x9e37_79b9_7f4a_7c15u64.wrapping_mul(index as u64 + 1)
}

pub struct ResolvedPlan {
    pub domain: ConvexDomain,
    pub anchors: AnchorSet,
    pub schedule: Vec<f64>,
    pub suites: Vec<Suite>,
    pub coefficients: CoefficientField,
    pub seed: u64,
    pub tolerances: Tolerances,
}

/// One verdict in a suite report; `value` is the measured quantity compared
/// against `threshold` in the direction implied by the check.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

impl Check {
    fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), passed: value <= threshold, value, threshold }
    }

    fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), passed: value >= threshold, value, threshold }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub seed: u64,
    pub seed_rule: &'static str,
    pub domain: String,
    pub dim: usize,
    pub anchors: Vec<Vec<f64>>,
    pub delta: f64,
    pub det_tolerance: f64,
    pub coefficients: String,
    pub schedule: Vec<f64>,
    pub suites: Vec<SuiteReport>,
    pub passed: bool,
}

pub struct RunOutcome {
    pub summary: Summary,
    pub passed: bool,
}

struct SuiteArtifacts {
    report: SuiteReport,
    /// file stem -> CSV text
    csv: BTreeMap<String, String>,
    /// (title, series name, points) for the optional plot
    plot: Option<(String, Vec<(String, Vec<(f64, f64)>)>)>,
}

/// Executes the configured suites and writes `summary.json`, per-suite CSV,
/// and optional SVG plots into `out_dir`. Returns the aggregate verdict; the
/// caller maps it onto an exit status.
pub fn run(config: &RunConfig, out_dir: &Path, plots: bool, verbose: bool) -> Result<RunOutcome> {
    let plan = config.resolve()?;
    let mut artifacts = Vec::new();
    for (index, suite) in SUITE_ORDER.iter().enumerate() {
        if !plan.suites.contains(suite) {
            continue;
        }
        let seed = suite_seed(plan.seed, index);
        let art = match suite {
            Suite::Geometry => geometry_suite(&plan, seed)?,
            Suite::Semigroup => semigroup_suite(&plan, seed)?,
            Suite::Generator => generator_suite(&plan, seed)?,
            Suite::Equivalence => equivalence_suite(&plan, seed)?,
            Suite::Elliptic => elliptic_suite(&plan, seed)?,
        };
        if verbose {
            for check in &art.report.checks {
                println!(
                    "[{}] {} {}: {:.6e} (threshold {:.3e})",
                    art.report.suite,
                    if check.passed { "pass" } else { "FAIL" },
                    check.name,
                    check.value,
                    check.threshold
                );
            }
        }
        artifacts.push(art);
    }
    let passed = artifacts.iter().all(|a| a.report.passed);
    let summary = Summary {
        seed: plan.seed,
        seed_rule: SEED_RULE,
        domain: config.domain.label(),
        dim: plan.domain.dim(),
        anchors: plan.anchors.points().to_vec(),
        delta: plan.anchors.delta(),
        det_tolerance: geometry::det_tolerance(plan.anchors.points()),
        coefficients: config.coefficients.label(),
        schedule: plan.schedule.clone(),
        suites: artifacts.iter().map(|a| a.report.clone()).collect(),
        passed,
    };
    // all computation succeeded; only now touch the filesystem
    std::fs::create_dir_all(out_dir)?;
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(out_dir.join("summary.json"), json + "\n")?;
    for art in &artifacts {
        for (stem, text) in &art.csv {
            std::fs::write(out_dir.join(format!("{stem}.csv")), text)?;
        }
        if plots {
            if let Some((title, series)) = &art.plot {
                let svg = render_svg(title, series);
                std::fs::write(out_dir.join(format!("{}.svg", art.report.suite)), svg)?;
            }
        }
    }
    Ok(RunOutcome { summary, passed })
}

/// Human-readable resolved plan: every defaulted decision made visible.
pub fn describe(config: &RunConfig) -> Result<String> {
    let plan = config.resolve()?;
    let mut out = String::new();
    use std::fmt::Write;
    let _ = writeln!(out, "domain: {} (dim {})", config.domain.label(), plan.domain.dim());
    let _ = writeln!(out, "global seed: {}", plan.seed);
    let _ = writeln!(out, "seed rule: {SEED_RULE}");
    let _ = writeln!(
        out,
        "anchors (|delta| = {:.6e}, det_tolerance = {:.6e}):",
        plan.anchors.delta().abs(),
        geometry::det_tolerance(plan.anchors.points())
    );
    for p in plan.anchors.points() {
        let _ = writeln!(out, "  {p:?}");
    }
    let _ = writeln!(out, "coefficients: {}", config.coefficients.label());
    let _ = writeln!(out, "grid schedule:");
    for &h in &plan.schedule {
        let grid = Grid::new(&plan.domain, h)?;
        let _ = writeln!(out, "  h = {h} -> {} interior nodes", grid.interior_count());
    }
    let _ = writeln!(out, "suites in execution order:");
    for (index, suite) in SUITE_ORDER.iter().enumerate() {
        if plan.suites.contains(suite) {
            let _ = writeln!(
                out,
                "  {}. {} (seed {})",
                index + 1,
                suite.name(),
                suite_seed(plan.seed, index)
            );
        }
    }
    let t = &plan.tolerances;
    let _ = writeln!(out, "tolerances: semigroup_norm_slack = {}, continuity_rel = {:e}, contraction_factor = {}, c1_slack = {}, coercivity_frac = {}, sesquilinear_max = {}, weak_residual_max = {}",
        t.semigroup_norm_slack, t.continuity_rel, t.contraction_factor, t.c1_slack,
        t.coercivity_frac, t.sesquilinear_max, t.weak_residual_max);
    Ok(out)
}

fn random_boundary_anchorset(dim: usize, rng: &mut ChaCha8Rng) -> Option<AnchorSet> {
    // points on the unit sphere: every such set lies on the unit ball boundary
    let mut points = Vec::with_capacity(dim);
    for _ in 0..dim {
        let mut p: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm: f64 = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-3 {
            return None;
        }
        p.iter_mut().for_each(|v| *v /= norm);
        points.push(p);
    }
    let delta = geometry::anchor_determinant(&points).ok()?;
    // keep the sets well-conditioned so roundoff stays below the 1e-10 gates
    if delta.abs() <= geometry::det_tolerance(&points).max(1e-2) {
        return None;
    }
    Some(AnchorSet::new_unchecked(points))
}

fn geometry_suite(_plan: &ResolvedPlan, seed: u64) -> Result<SuiteArtifacts> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trials_per_dim = 200;
    let mut worst_lambda = 0.0_f64;
    let mut worst_alpha = 0.0_f64;
    let mut worst_hull = 0.0_f64;
    let mut csv = String::from("trial,dim,lambda_residual,alpha_residual,hull_residual\n");
    use std::fmt::Write;
    let mut trial = 0usize;
    for dim in [2usize, 3] {
        let mut done = 0;
        while done < trials_per_dim {
            let Some(anchors) = random_boundary_anchorset(dim, &mut rng) else {
                continue;
            };
            let q: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let delta = anchors.delta();
            let subs: Vec<f64> = (0..dim)
                .map(|j| geometry::substituted_determinant(anchors.points(), &q, j))
                .collect::<Result<_>>()?;
            let lambda = geometry::lambda_determinant(&anchors, &q)?;
            let scale = delta.abs().max(subs.iter().map(|d| d.abs()).fold(0.0, f64::max));
            let lambda_res = (lambda - (delta - subs.iter().sum::<f64>())).abs() / scale;
            let alphas = geometry::barycentric_coefficients(&anchors, &q)?;
            let alpha_res = (alphas.iter().sum::<f64>() - (1.0 - lambda / delta)).abs();
            // a point of the affine hull: random convex combination
            let mut weights: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.05..1.0)).collect();
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            let mut hull_q = vec![0.0; dim];
            for (w, p) in weights.iter().zip(anchors.points()) {
                for (acc, &x) in hull_q.iter_mut().zip(p) {
                    *acc += w * x;
                }
            }
            let hull_res = match geometry::lambda_determinant(&anchors, &hull_q) {
                Ok(l) => l.abs() / delta.abs(),
                Err(Error::DirectionUndefined { .. }) => continue,
                Err(e) => return Err(e),
            };
            worst_lambda = worst_lambda.max(lambda_res);
            worst_alpha = worst_alpha.max(alpha_res);
            worst_hull = worst_hull.max(hull_res);
            let _ = writeln!(csv, "{trial},{dim},{lambda_res:e},{alpha_res:e},{hull_res:e}");
            trial += 1;
            done += 1;
        }
    }
    let checks = vec![
        Check::at_most("lambda_determinant_identity", worst_lambda, 1e-10),
        Check::at_most("barycentric_sum_identity", worst_alpha, 1e-10),
        Check::at_most("affine_hull_degeneracy", worst_hull, 1e-10),
    ];
    Ok(suite_artifacts(Suite::Geometry, seed, checks, [("geometry", csv)], None))
}

fn semigroup_suite(plan: &ResolvedPlan, seed: u64) -> Result<SuiteArtifacts> {
    let h = plan.schedule[0];
    let grid = Grid::new(&plan.domain, h)?;
    let mut checks = Vec::new();
    let mut csv = String::from("anchor,t,shift_norm\n");
    use std::fmt::Write;
    let mut worst_norm = 0.0_f64;
    for (i, anchor) in plan.anchors.points().iter().enumerate() {
        for &t in &[h, 2.0 * h, 4.0 * h] {
            let shift = operators::shift_matrix(&grid, anchor, t)?;
            let adjoint = shift.adjoint();
            let norm = crate::linalg::operator_norm(
                |x| shift.apply(x).expect("dim"),
                |x| adjoint.apply(x).expect("dim"),
                grid.interior_count(),
                seed ^ (i as u64),
                operators::NORM_POWER_ITERS,
            );
            worst_norm = worst_norm.max(norm);
            let _ = writeln!(csv, "{i},{t},{norm}");
        }
    }
    checks.push(Check::at_most(
        "shift_norm_bound",
        worst_norm,
        1.0 + plan.tolerances.semigroup_norm_slack * h,
    ));
    // single-hump smooth field: its shift deviation is monotone in t
    let modes = vec![1usize; plan.domain.dim()];
    let f = ScalarField::sample_on(grid.clone(), test_fields::sine_bump(&plan.domain, &modes));
    let f_norm = fields::l2_norm(&f);
    let times: Vec<f64> = (1..=8).map(|k| 0.5_f64.powi(k)).collect();
    let mut monotone_slack = 0.0_f64;
    for anchor in plan.anchors.points() {
        let devs = operators::check_strong_continuity(&f, anchor, &times)?;
        for pair in devs.windows(2) {
            monotone_slack = monotone_slack.max(pair[1] - pair[0]);
        }
    }
    checks.push(Check::at_most(
        "strong_continuity_monotone",
        monotone_slack,
        plan.tolerances.continuity_rel * f_norm,
    ));
    if plan.domain.dim() == 1 {
        let mut worst = 0.0_f64;
        for anchor in plan.anchors.points() {
            worst = worst.max(operators::check_semigroup_property(&f, anchor, 2.0 * h, 3.0 * h)?);
        }
        checks.push(Check::at_most("grid_aligned_composition", worst, 1e-13 * f_norm));
    }
    Ok(suite_artifacts(Suite::Semigroup, seed, checks, [("semigroup", csv)], None))
}

fn generator_suite(plan: &ResolvedPlan, seed: u64) -> Result<SuiteArtifacts> {
    let mut csv = String::from("h,left_inverse_residual\n");
    use std::fmt::Write;
    let mut residuals = Vec::new();
    for &h in &plan.schedule {
        let grid = Grid::new(&plan.domain, h)?;
        let tests = test_fields::dirichlet_corpus(&grid, 3, seed ^ 0x9e);
        let mut worst = 0.0_f64;
        for anchor in plan.anchors.points() {
            worst = worst.max(operators::verify_left_inverse(&grid, anchor, &tests)?);
        }
        residuals.push((h, worst));
        let _ = writeln!(csv, "{h},{worst}");
    }
    let mut checks = Vec::new();
    if residuals.len() >= 2 {
        let mut min_factor = f64::INFINITY;
        for pair in residuals.windows(2) {
            min_factor = min_factor.min(pair[0].1 / pair[1].1.max(f64::MIN_POSITIVE));
        }
        checks.push(Check::at_least(
            "left_inverse_contraction",
            min_factor,
            plan.tolerances.contraction_factor,
        ));
    } else {
        checks.push(Check::at_most("left_inverse_residual", residuals[0].1, 1.0));
    }
    let coarse = Grid::new(&plan.domain, plan.schedule[0])?;
    let lambdas = [
        Complex64::new(0.1, 0.0),
        Complex64::new(1.0, 0.0),
        Complex64::new(10.0, 0.0),
        Complex64::new(1.0, 1.0),
    ];
    let mut gamma_min = f64::INFINITY;
    let mut resolvent_excess = 0.0_f64;
    for anchor in plan.anchors.points() {
        let gen = operators::generator_matrix(&coarse, anchor, GeneratorScheme::Upwind)?;
        let report = operators::resolvent_check(&gen, &lambdas)?;
        gamma_min = gamma_min.min(report.gamma);
        for s in &report.samples {
            resolvent_excess = resolvent_excess.max(s.measured_norm / s.bound - 1.0);
        }
    }
    checks.push(Check::at_least("upwind_accretive", gamma_min, -operators::ACCRETIVITY_TOL));
    checks.push(Check::at_most(
        "resolvent_bound",
        resolvent_excess,
        operators::RESOLVENT_REL_TOL,
    ));
    let plot = Some((
        "left-inverse residual vs h".to_string(),
        vec![("residual".to_string(), residuals.clone())],
    ));
    Ok(suite_artifacts(Suite::Generator, seed, checks, [("generator", csv)], plot))
}

fn equivalence_suite(plan: &ResolvedPlan, seed: u64) -> Result<SuiteArtifacts> {
    let n = plan.domain.dim();
    let mut csv = String::from("h,c0,c1\n");
    use std::fmt::Write;
    let mut c0s = Vec::new();
    let mut c1s = Vec::new();
    let mut reports = Vec::new();
    for &h in &plan.schedule {
        let grid = Grid::new(&plan.domain, h)?;
        let report = norms::equivalence_constants_scalar(&grid, &plan.anchors, GeneratorScheme::Centered)?;
        let _ = writeln!(csv, "{h},{},{}", report.c0, report.c1);
        c0s.push((h, report.c0));
        c1s.push((h, report.c1));
        reports.push(report);
    }
    let c0_min = c0s.iter().map(|&(_, c)| c).fold(f64::INFINITY, f64::min);
    let c1_max = c1s.iter().map(|&(_, c)| c).fold(0.0, f64::max);
    let order_ok = reports.iter().map(|r| r.c1 - r.c0).fold(f64::INFINITY, f64::min);
    let mut checks = vec![
        Check::at_least("c0_positive", c0_min, f64::MIN_POSITIVE),
        Check::at_least("c0_below_c1", order_ok, 0.0),
        Check::at_most(
            "c1_upper_bound",
            c1_max,
            (n as f64).sqrt() * (1.0 + plan.tolerances.c1_slack),
        ),
    ];
    // sandwich on the coarsest grid with the constants reported there
    let grid = Grid::new(&plan.domain, plan.schedule[0])?;
    let report = &reports[0];
    let mut sandwich_slack = 0.0_f64;
    for f in test_fields::dirichlet_corpus(&grid, 20, seed ^ 0x5a) {
        let h10 = fields::h10_norm(&f);
        if h10 == 0.0 {
            continue;
        }
        let ha = norms::ha_norm(&f, &plan.anchors, GeneratorScheme::Centered)?;
        sandwich_slack = sandwich_slack.max(report.c0 * h10 - ha).max(ha - report.c1 * h10);
    }
    checks.push(Check::at_most("sandwich_inequality", sandwich_slack, 1e-8));
    let plot = Some((
        "equivalence constants vs h".to_string(),
        vec![("c0".to_string(), c0s), ("c1".to_string(), c1s)],
    ));
    Ok(suite_artifacts(Suite::Equivalence, seed, checks, [("equivalence", csv)], plot))
}

fn elliptic_suite(plan: &ResolvedPlan, seed: u64) -> Result<SuiteArtifacts> {
    let mut csv = String::from("h,weak_residual,strong_residual,coercivity_margin,sesquilinear_ratio\n");
    use std::fmt::Write;
    let mut weak = Vec::new();
    let mut margin_min = f64::INFINITY;
    let mut ratio_max = 0.0_f64;
    let mut gamma = f64::INFINITY;
    for &h in &plan.schedule {
        let grid = Grid::new(&plan.domain, h)?;
        let tests = test_fields::dirichlet_corpus(&grid, 2, seed ^ 0xe11);
        let report = elliptic::decomposition_residual(
            &grid,
            &plan.anchors,
            &plan.coefficients,
            &tests,
            GeneratorScheme::Centered,
        )?;
        let worst_weak = report.per_anchor_weak.iter().copied().fold(0.0, f64::max);
        weak.push((h, worst_weak));
        margin_min = margin_min.min(report.coercivity_margin);
        ratio_max = ratio_max.max(report.sesquilinear_ratio);
        gamma = gamma.min(report.gamma);
        let _ = writeln!(
            csv,
            "{h},{worst_weak},{},{},{}",
            report.averaged_strong, report.coercivity_margin, report.sesquilinear_ratio
        );
    }
    let mut checks = vec![
        Check::at_least("coercivity_margin", margin_min, -plan.tolerances.coercivity_frac * gamma),
        Check::at_most("sesquilinear_ratio", ratio_max, plan.tolerances.sesquilinear_max),
    ];
    if weak.len() >= 2 {
        let mut min_factor = f64::INFINITY;
        for pair in weak.windows(2) {
            min_factor = min_factor.min(pair[0].1 / pair[1].1.max(f64::MIN_POSITIVE));
        }
        checks.push(Check::at_least(
            "weak_residual_contraction",
            min_factor,
            plan.tolerances.contraction_factor,
        ));
    } else {
        checks.push(Check::at_most(
            "weak_residual",
            weak[0].1,
            plan.tolerances.weak_residual_max,
        ));
    }
    let coarse = Grid::new(&plan.domain, plan.schedule[0])?;
    let (report, poincare) = elliptic::elliptic_accretivity(&coarse, &plan.coefficients)?;
    checks.push(Check::at_least(
        "elliptic_accretive",
        if report.verdict { 1.0 } else { 0.0 },
        1.0,
    ));
    checks.push(Check::at_least("poincare_constant", poincare, f64::MIN_POSITIVE));
    let plot = Some((
        "weak decomposition residual vs h".to_string(),
        vec![("weak residual".to_string(), weak)],
    ));
    Ok(suite_artifacts(Suite::Elliptic, seed, checks, [("elliptic", csv)], plot))
}

fn suite_artifacts<const N: usize>(
    suite: Suite,
    seed: u64,
    checks: Vec<Check>,
    csv: [(&str, String); N],
    plot: Option<(String, Vec<(String, Vec<(f64, f64)>)>)>,
) -> SuiteArtifacts {
    let passed = checks.iter().all(|c| c.passed);
    SuiteArtifacts {
        report: SuiteReport { suite: suite.name(), seed, passed, checks },
        csv: csv.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        plot,
    }
}

/// Minimal SVG line chart: log10-scaled axes when all values are positive,
/// linear otherwise. No external plotting dependency.
fn render_svg(title: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    const W: f64 = 480.0;
    const H: f64 = 320.0;
    const M: f64 = 48.0;
    let all: Vec<(f64, f64)> = series.iter().flat_map(|(_, pts)| pts.iter().copied()).collect();
    let log_ok = all.iter().all(|&(x, y)| x > 0.0 && y > 0.0);
    let t = |v: f64| if log_ok { v.log10() } else { v };
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in &all {
        x0 = x0.min(t(x));
        x1 = x1.max(t(x));
        y0 = y0.min(t(y));
        y1 = y1.max(t(y));
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| M + (t(x) - x0) / (x1 - x0) * (W - 2.0 * M);
    let py = |y: f64| H - M - (t(y) - y0) / (y1 - y0) * (H - 2.0 * M);
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">{title}</text>\n\
         <line x1=\"{M}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n\
         <line x1=\"{M}\" y1=\"{M}\" x2=\"{M}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        W / 2.0,
        H - M,
        W - M,
        H - M,
        H - M
    );
    use std::fmt::Write;
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = colors[i % colors.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            svg,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            path.join(" ")
        );
        for &(x, y) in pts {
            let _ = writeln!(
                svg,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{color}\"/>",
                px(x),
                py(y)
            );
        }
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" fill=\"{color}\">{name}</text>",
            W - M + 4.0,
            M + 14.0 * i as f64
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval_config(suites: &str) -> String {
        format!(
            r#"
            seed = 7
            schedule = [0.0625, 0.03125]
            suites = ["{suites}"]

            [domain]
            kind = "interval"

            [anchors]
            mode = "explicit"
            points = [[1.0]]
            "#
        )
    }

    #[test]
    fn parses_and_validates_schedule_order() {
        let good = RunConfig::from_toml_str(&interval_config("generator")).unwrap();
        assert_eq!(good.schedule.len(), 2);
        let bad = interval_config("generator").replace("[0.0625, 0.03125]", "[0.03125, 0.0625]");
        assert!(matches!(RunConfig::from_toml_str(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_suite_is_a_config_error() {
        let text = interval_config("spectral");
        assert!(matches!(RunConfig::from_toml_str(&text), Err(Error::Config(_))));
    }

    #[test]
    fn all_expands_to_five_suites_in_order() {
        let text = interval_config("all");
        let plan = RunConfig::from_toml_str(&text).unwrap().resolve().unwrap();
        assert_eq!(plan.suites, SUITE_ORDER.to_vec());
    }

    #[test]
    fn describe_lists_anchors_and_seeds() {
        let config = RunConfig::from_toml_str(&interval_config("all")).unwrap();
        let text = describe(&config).unwrap();
        assert!(text.contains("det_tolerance"));
        assert!(text.contains("seed rule"));
        assert!(text.contains("1. geometry"));
        assert!(text.contains("5. elliptic"));
    }

    #[test]
    fn generator_suite_passes_on_interval() {
        let config = RunConfig::from_toml_str(&interval_config("generator")).unwrap();
        let dir = std::env::temp_dir().join("dirnorm-driver-test-gen");
        let outcome = run(&config, &dir, false, false).unwrap();
        assert!(outcome.passed, "{:?}", outcome.summary.suites);
        assert!(dir.join("summary.json").is_file());
        assert!(dir.join("generator.csv").is_file());
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn reruns_are_byte_identical() {
        let config = RunConfig::from_toml_str(&interval_config("geometry")).unwrap();
        let d1 = std::env::temp_dir().join("dirnorm-driver-test-r1");
        let d2 = std::env::temp_dir().join("dirnorm-driver-test-r2");
        run(&config, &d1, true, false).unwrap();
        run(&config, &d2, true, false).unwrap();
        for name in ["summary.json", "geometry.csv"] {
            let a = std::fs::read(d1.join(name)).unwrap();
            let b = std::fs::read(d2.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between reruns");
        }
        let _ = std::fs::remove_dir_all(&d1);
        let _ = std::fs::remove_dir_all(&d2);
    }
}

pub use cli::main_with_args;

mod cli {
    //! Argument parsing and exit-status mapping for the `dirnorm` binary.

    use super::*;
    use clap::{Parser, Subcommand};

    #[derive(Parser)]
    #[command(name = "dirnorm", about = "Directional-norm verification suites")]
    struct Cli {
        #[command(subcommand)]
        command: Command,
    }

    #[derive(Subcommand)]
    enum Command {
        /// Execute the configured suites and write the report bundle
        Run {
            /// path to the TOML run configuration
            config: PathBuf,
            /// output directory (overrides config and DIRNORM_OUT)
            #[arg(long)]
            out: Option<PathBuf>,
            /// run a single suite instead of the configured selection
            #[arg(long)]
            suite: Option<String>,
            /// emit SVG residual plots
            #[arg(long)]
            plots: bool,
            /// print each check verdict
            #[arg(short, long)]
            verbose: bool,
        },
        /// Print the resolved plan without running anything
        Describe { config: PathBuf },
    }

    /// Runs the CLI on explicit arguments and returns the process exit code:
    /// 0 all checks pass, 1 suite failure, 2 config parse error, 3 I/O error.
    pub fn main_with_args<I, T>(args: I) -> i32
    where
        I: IntoIterator<Item = T>,
        T: Into<std::ffi::OsString> + Clone,
    {
        let cli = match Cli::try_parse_from(args) {
            Ok(cli) => cli,
            Err(e) => {
                let code = if e.use_stderr() { 2 } else { 0 };
                let _ = e.print();
                return code;
            }
        };
        match cli.command {
            Command::Describe { config } => match RunConfig::from_path(&config).and_then(|c| describe(&c)) {
                Ok(text) => {
                    print!("{text}");
                    0
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    2
                }
            },
            Command::Run { config, out, suite, plots, verbose } => {
                let mut parsed = match RunConfig::from_path(&config) {
                    Ok(c) => c,
                    Err(e) => {
                        eprintln!("error: {e}");
                        return 2;
                    }
                };
                if let Some(name) = suite {
                    if let Err(e) = Suite::parse(&name) {
                        eprintln!("error: {e}");
                        return 2;
                    }
                    parsed.suites = vec![name];
                }
                let out_dir = out
                    .or_else(|| parsed.output.dir.clone().map(PathBuf::from))
                    .or_else(|| std::env::var_os("DIRNORM_OUT").map(PathBuf::from))
                    .unwrap_or_else(|| PathBuf::from("dirnorm-out"));
                match run(&parsed, &out_dir, plots, verbose) {
                    Ok(outcome) => {
                        println!(
                            "{}: {} suite(s), verdict {}",
                            out_dir.display(),
                            outcome.summary.suites.len(),
                            if outcome.passed { "pass" } else { "FAIL" }
                        );
                        if outcome.passed {
                            0
                        } else {
                            1
                        }
                    }
                    Err(Error::Io(e)) => {
                        eprintln!("i/o error: {e}");
                        3
                    }
                    Err(Error::Config(e)) => {
                        eprintln!("error: {e}");
                        2
                    }
                    Err(e) => {
                        eprintln!("suite error: {e}");
                        1
                    }
                }
            }
        }
    }
}
