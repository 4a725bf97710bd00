//! Command implementations. Every command is deterministic given the
//! config and seed, and re-runs produce byte-identical output files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use q2fmm_core::cost::{
    self, estimate_outline, layout, outline, scaling_sweep, schedule, HardwareModel,
};
use q2fmm_core::hierarchy::BoxHierarchy;
use q2fmm_core::lattice::FockState;
use q2fmm_core::multipole::{brute_force_energy, fmm_error_sweep, fmm_total_energy};
use q2fmm_core::sim::{run_basis, trotter_error_sweep, DenseModel, TrotterOrder};
use q2fmm_core::synth::{manifest, quantized_outcome, synthesize, SynthResult};

use crate::config::RunConfig;

#[derive(Debug, Error)]
pub enum CmdError {
    /// Bad inputs or configuration; exit code 1.
    #[error("{0}")]
    Validation(String),
    /// A violated internal invariant; exit code 2.
    #[error("internal invariant violated: {0}")]
    Internal(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CmdError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CmdError::Validation(_) | CmdError::Io { .. } => 1,
            CmdError::Internal(_) => 2,
        }
    }
}

fn validation(e: impl std::fmt::Display) -> CmdError {
    CmdError::Validation(e.to_string())
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CmdError> {
    std::fs::create_dir_all(dir).map_err(|source| CmdError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| CmdError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(path)
}

fn hierarchy_of(cfg: &RunConfig) -> Result<BoxHierarchy, CmdError> {
    let lattice = cfg.lattice_spec().map_err(validation)?;
    let h = BoxHierarchy::build(&lattice);
    match cfg.lattice.cutoff {
        Some(xi) => h.level_cutoff(xi).map_err(validation),
        None => Ok(h),
    }
}

fn synth_of(cfg: &RunConfig, h: &BoxHierarchy) -> Result<SynthResult, CmdError> {
    synthesize(h, &cfg.synthesis_options()).map_err(validation)
}

/// Write the box/near-field/interaction-list dump.
pub fn cmd_hierarchy(cfg: &RunConfig, out: &Path) -> Result<String, CmdError> {
    let h = hierarchy_of(cfg)?;
    let path = write_file(out, "hierarchy.txt", &h.dump())?;
    Ok(format!(
        "hierarchy: {} levels, dump at {}",
        h.max_level() + 1,
        path.display()
    ))
}

/// Hierarchical vs brute-force energy of one state (given occupations or a
/// seeded random filling).
pub fn cmd_energy(
    cfg: &RunConfig,
    out: &Path,
    state_arg: Option<&str>,
    state_seed: Option<u64>,
) -> Result<String, CmdError> {
    let lattice = cfg.lattice_spec().map_err(validation)?;
    let h = hierarchy_of(cfg)?;
    let state = match state_arg {
        Some(text) => {
            let occ: Vec<u8> = text
                .chars()
                .map(|c| {
                    c.to_digit(10)
                        .map(|d| d as u8)
                        .ok_or_else(|| validation(format!("bad occupation digit {c:?}")))
                })
                .collect::<Result<_, _>>()?;
            FockState::from_occupations(&lattice, occ).map_err(validation)?
        }
        None => {
            let seed = state_seed.unwrap_or(cfg.run.seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            FockState::random_with_count(&lattice, lattice.electron_bound(), &mut rng)
                .map_err(validation)?
        }
    };
    let e_exact = brute_force_energy(&lattice, &state);
    let mut report = String::new();
    let _ = writeln!(report, "sites={} electrons={}", lattice.sites(), state.electron_count());
    let _ = writeln!(report, "E_exact={e_exact}");
    let mut orders = vec![0u32];
    orders.extend(cfg.sweep.p_values.iter().copied());
    orders.dedup();
    for p in orders {
        let e = fmm_total_energy(&h, &state, p);
        let rel = if e_exact != 0.0 {
            (e - e_exact).abs() / e_exact.abs()
        } else {
            (e - e_exact).abs()
        };
        let _ = writeln!(report, "p={p} E_fmm={e} rel_error={rel:e}");
    }
    write_file(out, "energy.txt", &report)?;
    Ok(report)
}

/// Synthesize and serialize the circuit plus its manifest.
pub fn cmd_synth(cfg: &RunConfig, out: &Path) -> Result<String, CmdError> {
    let h = hierarchy_of(cfg)?;
    let r = synth_of(cfg, &h)?;
    write_file(out, "circuit.txt", &r.circuit.serialize())?;
    let m = manifest(&r);
    write_file(out, "manifest.txt", &m)?;
    Ok(format!(
        "synthesized {} gates on {} qubits; circuit.txt and manifest.txt written",
        r.circuit.len(),
        r.circuit.n_qubits()
    ))
}

/// Verify the circuit against the quantized evaluator on basis states
/// (exhaustive up to 16 system qubits, sampled beyond) and report ancilla
/// restoration and the analytic-energy gap.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<String, CmdError> {
    let lattice = cfg.lattice_spec().map_err(validation)?;
    let h = hierarchy_of(cfg)?;
    let r = synth_of(cfg, &h)?;
    let n_sys = lattice.system_qubits();
    let n_total = r.circuit.n_qubits() as usize;

    let inputs: Vec<Vec<bool>> = if n_sys <= 16 {
        (0..1usize << n_sys)
            .map(|idx| (0..n_sys).map(|b| (idx >> b) & 1 == 1).collect())
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
        (0..cfg.sweep.states.max(1))
            .map(|_| {
                FockState::random_with_count(&lattice, lattice.electron_bound(), &mut rng)
                    .map(|s| s.to_bits())
            })
            .collect::<Result<_, _>>()
            .map_err(validation)?
    };

    let results: Vec<(f64, f64, bool, bool)> = inputs
        .par_iter()
        .map(|sys_bits| {
            let mut bits = vec![false; n_total];
            bits[..n_sys].copy_from_slice(sys_bits);
            let outcome = run_basis(&r.circuit, &bits).expect("input sized to circuit");
            let restored = outcome.bits[n_sys..].iter().all(|&b| !b);
            let diagonal = outcome.bits[..n_sys] == sys_bits[..];
            let oracle = quantized_outcome(&r.plan, sys_bits);
            let analytic = fmm_total_energy(&h, &FockState::from_bits(&lattice, sys_bits).unwrap(), r.plan.opts.order_p);
            (
                (outcome.phase - oracle.phase).abs(),
                (oracle.energy - analytic).abs(),
                restored,
                diagonal,
            )
        })
        .collect();

    let max_phase_err = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let max_quant_gap = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let restored = results.iter().all(|r| r.2);
    let diagonal = results.iter().all(|r| r.3);

    let mut report = String::new();
    let _ = writeln!(report, "states checked: {}", results.len());
    let _ = writeln!(report, "ancillae restored: {restored}");
    let _ = writeln!(report, "diagonal on system bits: {diagonal}");
    let _ = writeln!(report, "max |phase error| vs quantized evaluator: {max_phase_err:e}");
    let _ = writeln!(
        report,
        "max |quantized - analytic| energy: {max_quant_gap:e} (bound {:e})",
        r.plan.quantization_bound
    );
    let _ = writeln!(report, "seed: {}", cfg.run.seed);
    write_file(out, "simulate.txt", &report)?;

    if !restored {
        return Err(CmdError::Internal("ancillae not restored to zero".into()));
    }
    if !diagonal {
        return Err(CmdError::Internal("system bits changed".into()));
    }
    if max_phase_err != 0.0 {
        return Err(CmdError::Internal(format!(
            "circuit phases deviate from the quantized evaluator by {max_phase_err:e}"
        )));
    }
    if max_quant_gap > r.plan.quantization_bound {
        return Err(CmdError::Internal(format!(
            "quantization gap {max_quant_gap:e} exceeds bound {:e}",
            r.plan.quantization_bound
        )));
    }
    Ok(report)
}

/// Schedule the synthesized circuit under all three hardware models.
pub fn cmd_estimate(cfg: &RunConfig, out: &Path) -> Result<String, CmdError> {
    let h = hierarchy_of(cfg)?;
    let r = synth_of(cfg, &h)?;
    let l = layout(&h, &r.circuit).map_err(validation)?;
    let mut report = String::new();
    let mut depths = Vec::new();
    for model in [
        HardwareModel::nearest_neighbor(),
        HardwareModel::shuttling(),
        HardwareModel::shuttling_fanout(),
    ] {
        let rep = schedule(&r.circuit, &model, &l);
        depths.push((model.label(), rep.depth));
        let _ = writeln!(report, "{}", rep.render());
    }
    for w in depths.windows(2) {
        if w[0].1 < w[1].1 {
            return Err(CmdError::Internal(format!(
                "depth monotonicity violated: {} {} < {} {}",
                w[0].0, w[0].1, w[1].0, w[1].1
            )));
        }
    }
    write_file(out, "estimate.txt", &report)?;
    Ok(report)
}

/// Error-vs-order and depth-vs-size sweeps with fit reports; a Trotter
/// sweep is added when step counts are configured and the lattice is small
/// enough for dense evolution.
pub fn cmd_sweep(cfg: &RunConfig, out: &Path) -> Result<String, CmdError> {
    let lattice = cfg.lattice_spec().map_err(validation)?;
    let h = hierarchy_of(cfg)?;
    let mut summary = String::new();

    // error vs expansion order
    {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
        let seeds_states: Vec<(u64, FockState)> = (0..cfg.sweep.states.max(10))
            .map(|i| {
                let st = FockState::random_with_count(&lattice, lattice.electron_bound(), &mut rng)
                    .map_err(validation)?;
                Ok((cfg.run.seed.wrapping_add(i as u64), st))
            })
            .collect::<Result<_, CmdError>>()?;
        let (rows, medians) = fmm_error_sweep(&h, &seeds_states, &cfg.sweep.p_values);
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(["N", "p", "state_seed", "E_fmm", "E_exact", "rel_error"])
            .expect("csv");
        for row in &rows {
            wtr.write_record([
                row.sites.to_string(),
                row.p.to_string(),
                row.state_seed.to_string(),
                row.e_fmm.to_string(),
                row.e_exact.to_string(),
                row.rel_error.to_string(),
            ])
            .expect("csv");
        }
        let data = String::from_utf8(wtr.into_inner().expect("csv")).expect("utf8");
        write_file(out, "error_sweep.csv", &data)?;
        for m in &medians {
            let _ = writeln!(summary, "p={} median_rel_error={:e}", m.p, m.median_rel_error);
        }
    }

    // depth vs size
    {
        let models = [
            HardwareModel::nearest_neighbor().with_literature_arithmetic(),
            HardwareModel::shuttling().with_literature_arithmetic(),
            HardwareModel::shuttling_fanout(),
        ];
        let (points, fits) =
            scaling_sweep(&cfg.sweep.widths, &models, &cfg.synthesis_options())
                .map_err(validation)?;
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record([
            "N",
            "Q",
            "model",
            "depth",
            "total_gates",
            "peak_ancillae",
            "swap_ops",
            "shuttle_ops",
            "shuttle_depth",
        ])
        .expect("csv");
        for p in &points {
            wtr.write_record([
                p.sites.to_string(),
                p.electron_bound.to_string(),
                p.model.clone(),
                p.depth.to_string(),
                p.total_gates.to_string(),
                p.peak_ancillae.to_string(),
                p.swap_ops.to_string(),
                p.shuttle_ops.to_string(),
                p.shuttle_depth.to_string(),
            ])
            .expect("csv");
        }
        let data = String::from_utf8(wtr.into_inner().expect("csv")).expect("utf8");
        write_file(out, "depth_sweep.csv", &data)?;
        let fit_text = cost::render_fit_report(&fits);
        write_file(out, "fits.txt", &fit_text)?;
        summary.push_str(&fit_text);
    }

    // Trotter order sweep on the dense oracle
    if !cfg.sweep.trotter_steps.is_empty() {
        let model = DenseModel {
            width: cfg.sweep.trotter_width,
            height: cfg.sweep.trotter_height,
            spinful: cfg.lattice.spinful,
            hopping_t: cfg.lattice.hopping_t,
            onsite_v0: cfg.lattice.onsite_v0,
        };
        let order = match cfg.synthesis.trotter_order {
            1 => TrotterOrder::First,
            _ => TrotterOrder::Second,
        };
        let rows = trotter_error_sweep(
            &model,
            cfg.sweep.t_total,
            &cfg.sweep.trotter_steps,
            order,
            None,
            10,
            cfg.run.seed,
        )
        .map_err(validation)?;
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record([
            "width",
            "height",
            "order",
            "steps",
            "dt",
            "total_error",
            "trotter_error",
            "approx_error",
            "seed",
        ])
        .expect("csv");
        for r in &rows {
            wtr.write_record([
                cfg.sweep.trotter_width.to_string(),
                cfg.sweep.trotter_height.to_string(),
                cfg.synthesis.trotter_order.to_string(),
                r.steps.to_string(),
                r.dt.to_string(),
                r.total_error.to_string(),
                r.trotter_error.to_string(),
                r.approx_error.to_string(),
                cfg.run.seed.to_string(),
            ])
            .expect("csv");
        }
        let data = String::from_utf8(wtr.into_inner().expect("csv")).expect("utf8");
        write_file(out, "trotter_sweep.csv", &data)?;
        let _ = writeln!(summary, "trotter sweep: {} step counts", rows.len());
    }

    Ok(summary)
}

/// Structural estimate of the configured lattice under the configured
/// hardware model (feasible at sizes where full synthesis is not).
pub fn cmd_outline_estimate(cfg: &RunConfig, out: &Path) -> Result<String, CmdError> {
    let h = hierarchy_of(cfg)?;
    let model = cfg.hardware_model().map_err(validation)?;
    let ol = outline(&h, &cfg.synthesis_options()).map_err(validation)?;
    let rep = estimate_outline(&ol, &model);
    let text = rep.render();
    write_file(out, "outline_estimate.txt", &text)?;
    Ok(text)
}
