//! Resolved run configurations and their execution. A `RunSpec` is the
//! full snapshot of one experiment: serializing it into the manifest and
//! executing it again reproduces every output byte.

use serde::{Deserialize, Serialize};

use roughpath::averaging::{
    concat_discounted, convergence_study, ExpectationMode, SchemeConfig,
};
use roughpath::error::{Error, Result};
use roughpath::experiments::{
    averaging_linear_exactness, bdg_study, gbm_comparison, ito_lemma_study, uniform_times,
};
use roughpath::field::make_field;
use roughpath::grid::Partition;
use roughpath::io::{
    bracket_to_csv, fmt_f64, grid_path_to_csv, grid_path_to_json, read_grid_path,
    read_rough_path, rough_path_to_csv, rough_path_to_json, signature_path_to_csv,
};
use roughpath::lift::{
    bracket_fine, bracket_pl, ito_lift, martingale_from_phi, pl_ito_lift, psi_from_bracket,
    sample_brownian, strat_lift, NoiseSpec,
};
use roughpath::pvar::{dp_distance, p_variation_banach, p_variation_rough};
use roughpath::rde::rde_solve;
use roughpath::sig::{pl_signature, RoughPathGrid};
use roughpath::tensor::TruncatedTensor;

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

/// One self-contained experiment configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum RunSpec {
    Signature(SignatureSpec),
    Pvar(PvarSpec),
    Lift(LiftSpec),
    Rde(RdeSpec),
    Avg(AvgSpec),
    Itolemma(ItolemmaSpec),
    Bdg(BdgSpec),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignatureSpec {
    pub input: String,
    pub depth: usize,
    pub json_out: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PvarSpec {
    pub input: String,
    pub p: f64,
    /// Treat the input as a depth-2 rough path file.
    pub rough: bool,
    /// Second rough path file: report the two-level distance instead.
    pub dp_against: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LiftSpec {
    pub kind: String, // "bm" | "phi"
    pub dim: usize,
    pub steps: usize,
    pub t_max: f64,
    pub seed: u64,
    pub lift: String, // "ito" | "strat" | "pl-ito"
    pub partition_level: Option<u32>,
    /// Integrand file (d^2-dimensional grid path) for kind = "phi".
    pub phi: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RdeSpec {
    pub field: String,
    pub driver: String, // "ito" | "strat"
    pub mesh: f64,
    pub paths: usize,
    pub t_max: f64,
    pub y0: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AvgSpec {
    pub field: String,
    pub field_scale: f64,
    pub y0: f64,
    pub gamma: String, // "trivial" | "strat-bm"
    pub noise: String, // "bm" | "bracket-sqrt" | "none"
    pub mode: String,  // "monte-carlo" | "closed-form"
    pub depth: usize,
    pub dim: usize,
    pub fine_steps: usize,
    pub t_max: f64,
    pub samples: usize,
    /// Dyadic partition levels for the convergence table.
    pub levels: Vec<u32>,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ItolemmaSpec {
    pub map: String,
    pub mesh: f64,
    pub paths: usize,
    pub t_max: f64,
    pub seed: u64,
    /// Additional dyadic mesh halvings below the base mesh.
    pub refinements: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BdgSpec {
    pub p: f64,
    pub q: f64,
    pub depth: usize,
    pub paths: usize,
    pub steps: usize,
    pub horizons: Vec<f64>,
    pub seed: u64,
}

impl RunSpec {
    pub fn command(&self) -> &'static str {
        match self {
            RunSpec::Signature(_) => "signature",
            RunSpec::Pvar(_) => "pvar",
            RunSpec::Lift(_) => "lift",
            RunSpec::Rde(_) => "rde",
            RunSpec::Avg(_) => "avg",
            RunSpec::Itolemma(_) => "itolemma",
            RunSpec::Bdg(_) => "bdg",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            RunSpec::Signature(_) | RunSpec::Pvar(_) => 0,
            RunSpec::Lift(s) => s.seed,
            RunSpec::Rde(s) => s.seed,
            RunSpec::Avg(s) => s.seed,
            RunSpec::Itolemma(s) => s.seed,
            RunSpec::Bdg(s) => s.seed,
        }
    }

    /// Paths of external input files this run reads.
    pub fn input_files(&self) -> Vec<String> {
        match self {
            RunSpec::Signature(s) => vec![s.input.clone()],
            RunSpec::Pvar(s) => {
                let mut v = vec![s.input.clone()];
                if let Some(other) = &s.dp_against {
                    v.push(other.clone());
                }
                v
            }
            RunSpec::Lift(s) => s.phi.iter().cloned().collect(),
            _ => Vec::new(),
        }
    }

    /// A short description of the grids touched, for the manifest.
    pub fn grid_summary(&self) -> serde_json::Value {
        match self {
            RunSpec::Lift(s) => serde_json::json!({"steps": s.steps, "t_max": s.t_max}),
            RunSpec::Rde(s) => {
                serde_json::json!({"mesh": s.mesh, "t_max": s.t_max, "paths": s.paths})
            }
            RunSpec::Avg(s) => serde_json::json!({
                "fine_steps": s.fine_steps, "t_max": s.t_max, "levels": s.levels
            }),
            RunSpec::Itolemma(s) => serde_json::json!({
                "mesh": s.mesh, "t_max": s.t_max, "refinements": s.refinements
            }),
            RunSpec::Bdg(s) => serde_json::json!({"steps": s.steps, "horizons": s.horizons}),
            _ => serde_json::Value::Null,
        }
    }
}

/// Output files of a run: (file name, contents).
pub type Outputs = Vec<(String, String)>;

/// Executes a resolved run and returns its named outputs. Pure in the
/// configuration: identical specs produce identical bytes.
pub fn execute(spec: &RunSpec) -> Result<Outputs> {
    match spec {
        RunSpec::Signature(s) => run_signature(s),
        RunSpec::Pvar(s) => run_pvar(s),
        RunSpec::Lift(s) => run_lift(s),
        RunSpec::Rde(s) => run_rde(s),
        RunSpec::Avg(s) => run_avg(s),
        RunSpec::Itolemma(s) => run_itolemma(s),
        RunSpec::Bdg(s) => run_bdg(s),
    }
}

fn run_signature(s: &SignatureSpec) -> Result<Outputs> {
    if s.depth < 1 {
        return Err(invalid("signature depth must be >= 1"));
    }
    let path = read_grid_path(std::path::Path::new(&s.input))?;
    let sig = pl_signature(&path, s.depth)?;
    let mut out = vec![("signature.csv".to_string(), signature_path_to_csv(&sig))];
    if s.json_out && s.depth >= 2 {
        out.push(("signature.json".to_string(), rough_path_to_json(&sig.restrict2()?)));
    }
    Ok(out)
}

fn run_pvar(s: &PvarSpec) -> Result<Outputs> {
    let mut csv = String::from("statistic,p,value\n");
    let value;
    if let Some(other) = &s.dp_against {
        let a = read_rough_path(std::path::Path::new(&s.input))?;
        let b = read_rough_path(std::path::Path::new(other))?;
        value = dp_distance(&a, &b, s.p)?;
        csv.push_str(&format!("dp_distance,{},{}\n", fmt_f64(s.p), fmt_f64(value)));
    } else if s.rough {
        let a = read_rough_path(std::path::Path::new(&s.input))?;
        value = p_variation_rough(&a, s.p)?;
        csv.push_str(&format!("p_variation_rough,{},{}\n", fmt_f64(s.p), fmt_f64(value)));
    } else {
        let a = read_grid_path(std::path::Path::new(&s.input))?;
        value = p_variation_banach(&a, s.p)?;
        csv.push_str(&format!("p_variation,{},{}\n", fmt_f64(s.p), fmt_f64(value)));
    }
    println!("{value:.17e}");
    Ok(vec![("pvar.csv".to_string(), csv)])
}

fn run_lift(s: &LiftSpec) -> Result<Outputs> {
    let times = uniform_times(s.steps, s.t_max);
    let z = match s.kind.as_str() {
        "bm" => sample_brownian(&times, s.dim, s.seed)?,
        "phi" => {
            let phi_file = s
                .phi
                .as_ref()
                .ok_or_else(|| invalid("kind = phi needs --phi <file>"))?;
            let phi = read_grid_path(std::path::Path::new(phi_file))?;
            let spec = NoiseSpec::new(phi, s.seed, 1)?;
            martingale_from_phi(&spec, &times)?
        }
        other => return Err(invalid(format!("unknown martingale kind '{other}'"))),
    };
    let lift = match s.lift.as_str() {
        "ito" => ito_lift(&z)?,
        "strat" => strat_lift(&z)?,
        "pl-ito" => {
            let level = s.partition_level.ok_or_else(|| {
                invalid("lift = pl-ito needs --partition-level <m>")
            })?;
            pl_ito_lift(&z, &Partition::dyadic(times.len(), level)?)?
        }
        other => return Err(invalid(format!("unknown lift '{other}'"))),
    };
    let bracket = match s.lift.as_str() {
        "pl-ito" => bracket_pl(&z, &Partition::dyadic(times.len(), s.partition_level.unwrap())?)?,
        _ => bracket_fine(&z)?,
    };
    Ok(vec![
        ("path.csv".to_string(), grid_path_to_csv(&z)),
        ("path.json".to_string(), grid_path_to_json(&z)),
        ("lift.csv".to_string(), rough_path_to_csv(&lift)),
        ("bracket.csv".to_string(), bracket_to_csv(&bracket)),
    ])
}

fn run_rde(s: &RdeSpec) -> Result<Outputs> {
    let steps = (s.t_max / s.mesh).round() as usize;
    if steps < 2 {
        return Err(invalid("mesh too coarse for the horizon"));
    }
    match s.field.as_str() {
        "gbm" | "linear1d" => {
            if s.driver != "ito" && s.driver != "strat" {
                return Err(invalid(format!("unknown driver '{}'", s.driver)));
            }
            let report = gbm_comparison(steps, s.paths, s.t_max, s.y0, s.seed)?;
            let mut rows = String::from("path,rel_err_ito,rel_err_strat\n");
            for (i, (a, b)) in report.per_path.iter().enumerate() {
                rows.push_str(&format!("{i},{},{}\n", fmt_f64(*a), fmt_f64(*b)));
            }
            let median = match s.driver.as_str() {
                "ito" => report.median_rel_err_ito,
                _ => report.median_rel_err_strat,
            };
            let mut summary = String::from("statistic,value\n");
            summary.push_str(&format!("median_rel_err_ito,{}\n", fmt_f64(report.median_rel_err_ito)));
            summary
                .push_str(&format!("median_rel_err_strat,{}\n", fmt_f64(report.median_rel_err_strat)));
            summary.push_str(&format!("max_gap_euler,{}\n", fmt_f64(report.max_gap_euler)));
            println!("median relative error ({}) = {median:.6e}", s.driver);
            Ok(vec![
                ("rde_errors.csv".to_string(), rows),
                ("rde_summary.csv".to_string(), summary),
            ])
        }
        key => {
            // general field: solve one sampled Brownian driver and dump the
            // first level of the solution
            let dim = 2;
            let vf = make_field(key, dim, dim, 1.0)?;
            let times = uniform_times(steps, s.t_max);
            let b = sample_brownian(&times, dim, s.seed)?;
            let driver = match s.driver.as_str() {
                "ito" => ito_lift(&b)?,
                "strat" => strat_lift(&b)?,
                other => return Err(invalid(format!("unknown driver '{other}'"))),
            };
            let mut xi = TruncatedTensor::identity(dim, 2);
            xi.level_mut(1)[0] = s.y0;
            let sol = rde_solve(&driver, vf.as_ref(), &xi)?;
            Ok(vec![("solution.csv".to_string(), grid_path_to_csv(&sol.first_level))])
        }
    }
}

fn run_avg(s: &AvgSpec) -> Result<Outputs> {
    if s.levels.is_empty() {
        return Err(invalid("avg needs at least one partition level"));
    }
    let times = uniform_times(s.fine_steps, s.t_max);
    let closed_form = match s.mode.as_str() {
        "closed-form" => true,
        "monte-carlo" => false,
        other => return Err(invalid(format!("unknown expectation mode '{other}'"))),
    };

    // closed-form linear run over the trivial base: report the exact
    // discount telescoping per level
    if closed_form {
        if s.gamma != "trivial" || (s.field != "linear1d" && s.field != "gbm") {
            return Err(invalid(
                "closed-form mode is defined for the scalar linear field over the trivial base",
            ));
        }
        let rows =
            averaging_linear_exactness(s.fine_steps, s.t_max, s.y0, &s.levels, s.depth, s.seed)?;
        let want = s.y0 * (-0.5 * s.t_max).exp();
        let mut csv = String::from("level,final_value,target,abs_error\n");
        for (m, value, err) in &rows {
            csv.push_str(&format!(
                "{m},{},{},{}\n",
                fmt_f64(*value),
                fmt_f64(want),
                fmt_f64(*err)
            ));
        }
        println!(
            "closed-form final value = {:.12e} (target {want:.12e}, max abs error {:.3e})",
            rows.last().unwrap().1,
            rows.iter().map(|r| r.2).fold(0.0f64, f64::max)
        );
        return Ok(vec![("avg_closed_form.csv".to_string(), csv)]);
    }

    // Monte Carlo run
    let dim = if s.gamma == "trivial" && (s.field == "linear1d" || s.field == "gbm") { 1 } else { s.dim };
    let vf = make_field(&s.field, dim, dim, s.field_scale)?;
    let (gamma, reference_bracket) = match s.gamma.as_str() {
        "trivial" => (RoughPathGrid::identity_path(times.clone(), dim)?, None),
        "strat-bm" => {
            let z = sample_brownian(&times, dim, s.seed ^ 0xba5e)?;
            let bracket = bracket_fine(&z)?;
            (strat_lift(&z)?, Some(bracket))
        }
        other => return Err(invalid(format!("unknown base path '{other}'"))),
    };
    let phi = match s.noise.as_str() {
        "bm" => NoiseSpec::constant_identity(times.clone(), dim, 1.0, s.seed, s.samples)?,
        "none" => NoiseSpec::constant_identity(times.clone(), dim, 0.0, s.seed, s.samples)?,
        "bracket-sqrt" => {
            let bracket = reference_bracket
                .as_ref()
                .ok_or_else(|| invalid("bracket-sqrt noise needs a martingale base path"))?;
            NoiseSpec::new(psi_from_bracket(bracket)?, s.seed, s.samples)?
        }
        other => return Err(invalid(format!("unknown noise '{other}'"))),
    };
    let mut xi = TruncatedTensor::identity(dim, s.depth);
    xi.level_mut(1)[0] = s.y0;
    let partitions: Vec<Partition> = s
        .levels
        .iter()
        .map(|&m| Partition::dyadic(times.len(), m))
        .collect::<Result<Vec<_>>>()?;
    let base = SchemeConfig {
        partition: partitions[0].clone(),
        mc_samples: s.samples,
        depth: s.depth,
        noise: phi,
        expectation_mode: ExpectationMode::MonteCarlo,
        mc_floor: 100.min(s.samples),
    };
    let study = convergence_study(&gamma, vf.as_ref(), &xi, &partitions, &base, None)?;
    let mut csv = String::from("level,intervals,mesh,sup_error");
    for k in 1..=s.depth {
        csv.push_str(&format!(",level{k}_error,level{k}_max_se"));
    }
    csv.push('\n');
    for (row, &m) in study.rows.iter().zip(s.levels.iter()) {
        csv.push_str(&format!("{m},{},{},{}", row.intervals, fmt_f64(row.mesh), fmt_f64(row.sup_error)));
        for k in 0..s.depth {
            csv.push_str(&format!(
                ",{},{}",
                fmt_f64(row.level_errors[k]),
                fmt_f64(row.max_level_se[k])
            ));
        }
        csv.push('\n');
    }

    // the scheme path itself at the finest requested partition
    let finest = s.levels.iter().copied().max().unwrap();
    let cfg = SchemeConfig {
        partition: Partition::dyadic(times.len(), finest)?,
        ..base.clone()
    };
    let out = concat_discounted(&gamma, vf.as_ref(), &xi, &cfg)?;
    let mut values = String::from("t");
    for k in 1..=s.depth {
        for idx in 0..dim.pow(k as u32) {
            values.push_str(&format!(",l{k}_{idx}"));
        }
    }
    values.push('\n');
    for (i, v) in out.values.iter().enumerate() {
        values.push_str(&fmt_f64(out.times[i]));
        for k in 1..=s.depth {
            for x in v.level(k) {
                values.push(',');
                values.push_str(&fmt_f64(*x));
            }
        }
        values.push('\n');
    }
    println!(
        "averaging errors per level: {:?}",
        study.rows.iter().map(|r| r.sup_error).collect::<Vec<_>>()
    );
    Ok(vec![
        ("avg_study.csv".to_string(), csv),
        ("avg_values.csv".to_string(), values),
    ])
}

fn run_itolemma(s: &ItolemmaSpec) -> Result<Outputs> {
    let base_steps = (s.t_max / s.mesh).round() as usize;
    if base_steps < 4 {
        return Err(invalid("mesh too coarse"));
    }
    let mut counts = Vec::new();
    for r in (0..=s.refinements).rev() {
        counts.push(base_steps >> r);
    }
    let rows = ito_lemma_study(&s.map, &counts, s.paths, s.seed)?;
    let mut csv = String::from("mesh,level,median_residual\n");
    for row in &rows {
        let mesh = s.t_max / row.steps as f64;
        csv.push_str(&format!("{},1,{}\n", fmt_f64(mesh), fmt_f64(row.median_level1)));
        csv.push_str(&format!("{},2,{}\n", fmt_f64(mesh), fmt_f64(row.median_level2)));
    }
    println!(
        "median residuals at finest mesh: level1 {:.3e}, level2 {:.3e}",
        rows.last().unwrap().median_level1,
        rows.last().unwrap().median_level2
    );
    Ok(vec![("itolemma.csv".to_string(), csv)])
}

fn run_bdg(s: &BdgSpec) -> Result<Outputs> {
    let study = bdg_study(s.p, s.q, s.depth, s.paths, &s.horizons, s.steps, s.seed)?;
    let mut csv = String::from(
        "report,t_max,depth,q,sig_moment,sig_se,bracket_moment,bracket_se,endpoint_moment,endpoint_se,ratio_sig,ratio_endpoint\n",
    );
    let mut push = |label: &str, r: &roughpath::bdg::MomentReport| {
        csv.push_str(&format!(
            "{label},{},{},{},{},{},{},{},{},{},{},{}\n",
            fmt_f64(r.t_max),
            r.depth,
            fmt_f64(r.q),
            fmt_f64(r.sig_pvar_moment.0),
            fmt_f64(r.sig_pvar_moment.1),
            fmt_f64(r.bracket_moment.0),
            fmt_f64(r.bracket_moment.1),
            fmt_f64(r.endpoint_moment.0),
            fmt_f64(r.endpoint_moment.1),
            fmt_f64(r.ratio_sig),
            fmt_f64(r.ratio_endpoint),
        ));
    };
    push("endpoint_identity", &study.endpoint_report);
    for r in &study.horizon_reports {
        push("horizon", r);
    }
    println!(
        "depth-1 endpoint ratio = {:.4} (se {:.4})",
        study.endpoint_report.ratio_endpoint,
        study.endpoint_report.ratio_endpoint_se()
    );
    Ok(vec![("bdg.csv".to_string(), csv)])
}
