use std::path::PathBuf;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use dicke_core::cat_analysis::{cat_coherence, lattice_peaks, null_width, peak_report};
use dicke_core::detection::{
    collapse_imperfect, collapse_perfect, outcome_probability, pulse_alphas, AtomicDensityMatrix,
    DetectionOutcome, PulseSpec, Trajectory,
};
use dicke_core::physical_params::{
    decay_regime_warning, derive, grid_argmin, inefficiency_optimum, optimal_strength,
    spon_identity_ratio, squeezing_with_decay, PhysicalConfig, SPON_STRENGTH_CONSTANT,
};
use dicke_core::pulse_scattering::{
    apply_pulse, default_n_max, photon_distribution, photon_peaks, poisson_mixture,
    PhotonDistribution, PulseStrength,
};
use dicke_core::spin_basis::{initial_coherent_spin_state, squeezing_parameter, SpinExpectation};
use dicke_core::{Error, Result as CoreResult};

use crate::output::{Cell, Table};
use crate::{usage, RunContext};

#[derive(clap::Args, Debug, Clone, Serialize, Deserialize)]
pub struct StatisticsArgs {
    /// Atom count N_a.
    #[arg(long = "atoms", short = 'N')]
    #[serde(rename = "N_a")]
    pub n_atoms: u32,
    /// Measurement strength C.
    #[arg(long = "strength", short = 'C')]
    #[serde(rename = "C")]
    pub c: f64,
    /// Largest photon number tabulated.
    #[arg(long)]
    pub n_max: Option<usize>,
}

#[derive(clap::Args, Debug, Clone, Serialize, Deserialize)]
pub struct CollapseArgs {
    /// Atom count N_a.
    #[arg(long = "atoms", short = 'N')]
    #[serde(rename = "N_a")]
    pub n_atoms: u32,
    /// Measurement strength C.
    #[arg(long = "strength", short = 'C')]
    #[serde(rename = "C")]
    pub c: f64,
    /// Detected photon count.
    #[arg(long = "n-m")]
    pub n_m: u64,
    /// Detection efficiency.
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
}

#[derive(clap::Args, Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryArgs {
    /// Atom count N_a.
    #[arg(long = "atoms", short = 'N')]
    #[serde(rename = "N_a")]
    pub n_atoms: u32,
    /// JSON array of pulses, e.g. '[{"C":3,"force_n":30},{"C":3}]'.
    #[arg(
        long,
        conflicts_with = "pulses_file",
        required_unless_present = "pulses_file"
    )]
    pub pulses: Option<String>,
    /// File holding the pulse array.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulses_file: Option<PathBuf>,
    /// Write the detected-count distribution seen by each pulse.
    #[arg(long)]
    #[serde(default)]
    pub emit_dists: bool,
}

impl TrajectoryArgs {
    pub fn resolved(mut self) -> Result<Self> {
        if let Some(path) = self.pulses_file.take() {
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("reading pulses file {}", path.display()))?;
            self.pulses = Some(text);
        }
        let pulses = self.parse_pulses()?;
        self.pulses = Some(serde_json::to_string(&pulses)?);
        Ok(self)
    }

    fn parse_pulses(&self) -> Result<Vec<PulseSpec>> {
        let text = self.pulses.as_deref().unwrap_or("[]");
        serde_json::from_str(text).map_err(|e| usage(format!("invalid pulses: {e}")))
    }
}

#[derive(clap::Args, Debug, Clone, Serialize, Deserialize)]
pub struct SqueezeScanArgs {
    /// Atom count N_a.
    #[arg(long = "atoms", short = 'N')]
    #[serde(rename = "N_a")]
    pub n_atoms: u32,
    /// Resonant optical depth (spontaneous-decay model).
    #[arg(long)]
    pub d_res: Option<f64>,
    /// Detection efficiency (inefficient-detection model).
    #[arg(long)]
    pub mu: Option<f64>,
    /// Smallest strength in the grid.
    #[arg(long)]
    pub c_min: f64,
    /// Largest strength in the grid.
    #[arg(long)]
    pub c_max: f64,
    /// Grid spacing.
    #[arg(long)]
    pub c_step: f64,
    /// Conditioning count for the inefficient-detection model.
    #[arg(long = "n-m", default_value_t = 0)]
    #[serde(default)]
    pub n_m: u64,
}

#[derive(clap::Args, Debug, Clone, Serialize, Deserialize)]
pub struct PhysicalArgs {
    /// Configuration JSON file.
    #[arg(long, required_unless_present = "config_json")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<PathBuf>,
    /// Configuration given inline.
    #[arg(long, conflicts_with = "config")]
    pub config_json: Option<String>,
}

impl PhysicalArgs {
    pub fn resolved(mut self) -> Result<Self> {
        if let Some(path) = self.config.take() {
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("reading config {}", path.display()))?;
            self.config_json = Some(text);
        }
        Ok(self)
    }
}

fn distribution_table(dist: &PhotonDistribution) -> Table {
    let mut table = Table::new(vec!["n", "P_n"]);
    for (n, &p) in dist.probabilities().iter().enumerate() {
        table.push(vec![Cell::Int(n as i64), Cell::Num(p)]);
    }
    table
}

fn optional_xi<T: SpinExpectation>(state: &T) -> CoreResult<Option<f64>> {
    match squeezing_parameter(state) {
        Ok(xi) => Ok(Some(xi)),
        Err(Error::Singular(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn statistics(args: &StatisticsArgs, ctx: &mut RunContext) -> Result<()> {
    let psi = initial_coherent_spin_state(args.n_atoms)?;
    let c = PulseStrength::new(args.c)?;
    let n_max = args
        .n_max
        .unwrap_or_else(|| default_n_max(psi.spin(), args.c));
    let dist = photon_distribution(&apply_pulse(&psi, c), n_max);
    ctx.out
        .write_table("statistics", &distribution_table(&dist), ctx.format)?;
    let total: f64 = dist.probabilities().iter().sum();
    ctx.out.write_json(
        "statistics_peaks.json",
        &json!({
            "N_a": args.n_atoms,
            "C": args.c,
            "n_max": n_max,
            "total_probability": total,
            "tail_mass": dist.tail_mass(),
            "peaks": photon_peaks(&dist),
        }),
    )?;
    if ctx.gnuplot {
        ctx.out
            .write_gnuplot("statistics", "statistics.csv", "n", &["P_n"], "impulses")?;
    }
    Ok(())
}

pub fn collapse(args: &CollapseArgs, ctx: &mut RunContext) -> Result<()> {
    let psi = initial_coherent_spin_state(args.n_atoms)?;
    let spin = psi.spin();
    let c = PulseStrength::new(args.c)?;
    let outcome = DetectionOutcome::new(args.n_m, args.mu)?;
    let joint = apply_pulse(&psi, c);

    let (populations, xi, width, probability, rho) = if args.mu == 1.0 {
        let after = collapse_perfect(&joint, args.n_m)?;
        let width = if args.n_m == 0 {
            null_width(&after).ok()
        } else {
            None
        };
        let xi = optional_xi(&after)?;
        let rho = AtomicDensityMatrix::from_pure(&after);
        (
            after.populations(),
            xi,
            width,
            outcome_probability(&joint, args.n_m),
            rho,
        )
    } else {
        let rho = collapse_imperfect(&joint, outcome)?;
        let means: Vec<f64> = pulse_alphas(spin, c)
            .iter()
            .map(|a| args.mu * a.norm_sqr())
            .collect();
        let detected = poisson_mixture(&joint.weights(), &means, args.n_m as usize);
        let xi = optional_xi(&rho)?;
        (
            rho.populations(),
            xi,
            None,
            detected.probability(args.n_m as usize),
            rho,
        )
    };

    let mut table = Table::new(vec!["M", "P_a"]);
    for (i, &p) in populations.iter().enumerate() {
        table.push(vec![Cell::Num(spin.m(i)), Cell::Num(p)]);
    }
    ctx.out.write_table("collapse", &table, ctx.format)?;

    let peaks = lattice_peaks(spin, &populations);
    let effective = args.c * args.mu.sqrt();
    let report = if args.n_m > 0 && effective > 0.0 {
        Some(peak_report(effective, args.n_m)?)
    } else {
        None
    };
    let coherence = if args.n_m > 0 && args.mu < 1.0 {
        peaks
            .iter()
            .copied()
            .filter(|&m| m > 0.0)
            .fold(None, |best: Option<f64>, m| {
                Some(best.map_or(m, |b| b.max(m)))
            })
            .and_then(|arm| cat_coherence(&rho, arm).ok())
    } else {
        None
    };
    let var_sz = {
        let (mut first, mut second) = (0.0, 0.0);
        for (i, p) in populations.iter().enumerate() {
            first += spin.m(i) * p;
            second += spin.m(i) * spin.m(i) * p;
        }
        (second - first * first).max(0.0)
    };
    ctx.out.write_json(
        "collapse_summary.json",
        &json!({
            "N_a": args.n_atoms,
            "C": args.c,
            "n_m": args.n_m,
            "mu": args.mu,
            "outcome_probability": probability,
            "var_Sz": var_sz,
            "xi": xi,
            "purity": rho.purity(),
            "lattice_peaks": peaks,
            "cat_peak": report,
            "null_width": width,
            "coherence": coherence,
        }),
    )?;
    if ctx.gnuplot {
        ctx.out
            .write_gnuplot("collapse", "collapse.csv", "M", &["P_a"], "boxes")?;
    }
    Ok(())
}

pub fn trajectory(args: &TrajectoryArgs, seed: u64, ctx: &mut RunContext) -> Result<()> {
    let pulses = args.parse_pulses()?;
    let mut run = Trajectory::new(initial_coherent_spin_state(args.n_atoms)?, seed);
    for (k, pulse) in pulses.iter().enumerate() {
        if args.emit_dists {
            let dist = run.detected_distribution(PulseStrength::new(pulse.c)?, pulse.mu, None);
            let stem = format!("dist_pulse_{k}");
            ctx.out
                .write_table(&stem, &distribution_table(&dist), ctx.format)?;
            if ctx.gnuplot {
                ctx.out
                    .write_gnuplot(&stem, &format!("{stem}.csv"), "n", &["P_n"], "impulses")?;
            }
        }
        run.step(pulse).with_context(|| format!("pulse {k}"))?;
    }
    ctx.out
        .write("trajectory.jsonl", run.record().to_jsonl().as_bytes())?;
    Ok(())
}

fn scan_grid(args: &SqueezeScanArgs) -> Result<Vec<f64>> {
    if !(args.c_step > 0.0) || !(args.c_min >= 0.0) || !(args.c_max >= args.c_min) {
        return Err(usage(format!(
            "empty strength grid: c-min {}, c-max {}, c-step {}",
            args.c_min, args.c_max, args.c_step
        )));
    }
    let count = ((args.c_max - args.c_min) / args.c_step + 1e-9).floor() as usize + 1;
    let grid: Vec<f64> = (0..count)
        .map(|k| args.c_min + k as f64 * args.c_step)
        .filter(|&c| c > 0.0)
        .collect();
    if grid.is_empty() {
        return Err(usage("strength grid has no positive points"));
    }
    Ok(grid)
}

fn summary_of(points: &[(f64, Option<f64>)]) -> serde_json::Value {
    let defined: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|&(c, xi)| xi.map(|x| (c, x)))
        .collect();
    match grid_argmin(&defined) {
        Some((c, xi)) => json!({ "argmin_C": c, "min_xi": xi }),
        None => json!({ "argmin_C": null, "min_xi": null }),
    }
}

pub fn squeeze_scan(args: &SqueezeScanArgs, ctx: &mut RunContext) -> Result<()> {
    if args.d_res.is_none() && args.mu.is_none() {
        return Err(usage("squeeze-scan needs --d-res, --mu, or both"));
    }
    let grid = scan_grid(args)?;
    let n_atoms = args.n_atoms as f64;
    let psi = initial_coherent_spin_state(args.n_atoms)?;
    if let Some(mu) = args.mu {
        DetectionOutcome::new(args.n_m, mu)?;
    }

    let rows: Vec<(f64, Option<f64>, Option<f64>)> = grid
        .par_iter()
        .map(|&c| -> CoreResult<_> {
            let decay = args
                .d_res
                .map(|d| squeezing_with_decay(c, n_atoms, d))
                .transpose()?;
            let lossy = match args.mu {
                Some(mu) => {
                    let joint = apply_pulse(&psi, PulseStrength::new(c)?);
                    let rho = collapse_imperfect(&joint, DetectionOutcome::new(args.n_m, mu)?)?;
                    optional_xi(&rho)?
                }
                None => None,
            };
            Ok((c, decay, lossy))
        })
        .collect::<CoreResult<_>>()?;

    let both = args.d_res.is_some() && args.mu.is_some();
    let mut table = if both {
        Table::new(vec!["C", "xi_decay", "xi_inefficient"])
    } else {
        Table::new(vec!["C", "xi"])
    };
    for &(c, decay, lossy) in &rows {
        let mut row = vec![Cell::Num(c)];
        if args.d_res.is_some() {
            row.push(decay.into());
        }
        if args.mu.is_some() {
            row.push(lossy.into());
        }
        table.push(row);
    }
    ctx.out.write_table("squeeze_scan", &table, ctx.format)?;

    let mut summary = serde_json::Map::new();
    summary.insert("N_a".into(), json!(args.n_atoms));
    if let Some(d_res) = args.d_res {
        let points: Vec<(f64, Option<f64>)> = rows.iter().map(|r| (r.0, r.1)).collect();
        let mut entry = summary_of(&points);
        let optimum = optimal_strength(n_atoms, d_res)?;
        entry["d_res"] = json!(d_res);
        entry["C_opt"] = json!(optimum.c_opt);
        entry["xi_min"] = json!(optimum.xi_min);
        entry["C_numeric"] = json!(optimum.c_numeric);
        if let Some(warning) = decay_regime_warning(optimum.c_opt, n_atoms) {
            eprintln!("warning: {warning}");
            entry["warning"] = json!(warning);
        }
        summary.insert("decay".into(), entry);
    }
    if let Some(mu) = args.mu {
        let points: Vec<(f64, Option<f64>)> = rows.iter().map(|r| (r.0, r.2)).collect();
        let mut entry = summary_of(&points);
        entry["mu"] = json!(mu);
        entry["n_m"] = json!(args.n_m);
        let estimate = inefficiency_optimum(mu)?;
        entry["C_estimate"] = if estimate.is_finite() {
            json!(estimate)
        } else {
            json!(null)
        };
        summary.insert("inefficient".into(), entry);
    }
    ctx.out.write_json("squeeze_scan_summary.json", &summary)?;
    if ctx.gnuplot {
        let columns: &[&str] = if both {
            &["xi_decay", "xi_inefficient"]
        } else {
            &["xi"]
        };
        ctx.out.write_gnuplot(
            "squeeze_scan",
            "squeeze_scan.csv",
            "C",
            columns,
            "linespoints",
        )?;
    }
    Ok(())
}

pub fn physical(args: &PhysicalArgs, ctx: &mut RunContext) -> Result<()> {
    let text = args
        .config_json
        .as_deref()
        .ok_or_else(|| usage("physical needs --config or --config-json"))?;
    let config = PhysicalConfig::from_json(text)?;
    let (derived, warnings) = derive(&config)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    if derived.eta < 1.0 && derived.c > derived.c_bound * (1.0 + 1e-12) {
        return Err(Error::Consistency(format!(
            "eta = {} < 1 but C = {} exceeds C_bound = {}",
            derived.eta, derived.c, derived.c_bound
        ))
        .into());
    }
    let ratio = if derived.c > 0.0 {
        Some(spon_identity_ratio(&config))
    } else {
        None
    };
    ctx.out.write_json(
        "physical.json",
        &json!({
            "derived": derived,
            "N_a": config.atom_count(),
            "N_ph": config.photon_number(),
            "chi_sq_integral": config.rabi_integral(),
            "fresnel_number": config.fresnel_number(),
            "spon_identity_ratio": ratio,
            "pinned_constant": SPON_STRENGTH_CONSTANT,
            "warnings": warnings,
        }),
    )?;
    Ok(())
}
