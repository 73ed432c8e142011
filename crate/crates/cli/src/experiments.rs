//! One runner per experiment kind. Each returns its tables in sweep order
//! plus a small JSON summary for the manifest.

use anyhow::bail;
use serde_json::{json, Value};

use noonsim::dynamics::trajectory;
use noonsim::lattice::{self, IntegrabilityRoot};
use noonsim::model::{build_effective_hamiltonian_charges, build_full_hamiltonian};
use noonsim::protocols::{fidelity, fit_readout_sweep, ideal_uber_noon, OutcomeFilter, ReadoutLaw, UberNoonStage};
use noonsim::robustness::{run_robustness, ParameterSource, RobustnessConfig};
use noonsim::spectrum::{assign_bands, compare_effective, locate_band, sweep_field, sweep_spectrum};
use noonsim::{Error, FockBasis, ProtocolEngine, QuantumState, Site};

use crate::config::{linspace, ExperimentConfig, HamiltonianKind, Kind, ResolvedModel, SourceKind, SweepVariable};
use crate::output::{num, opt, Table};

pub struct Outcome {
    pub tables: Vec<Table>,
    pub summary: Value,
}

pub fn run(kind: Kind, cfg: &ExperimentConfig, model: Option<&ResolvedModel>) -> anyhow::Result<Outcome> {
    let need = || model.ok_or_else(|| anyhow::anyhow!("experiment {kind} needs a model"));
    match kind {
        Kind::Spectrum => spectrum(cfg, need()?),
        Kind::Evolve => evolve(cfg, need()?),
        Kind::Protocol1 => protocol1(cfg, need()?),
        Kind::Protocol2 => protocol2(cfg, need()?),
        Kind::Readout => readout(cfg, need()?),
        Kind::Physical => physical(cfg),
        Kind::Robustness => robustness(cfg, need()?),
    }
}

fn engine(cfg: &ExperimentConfig, model: &ResolvedModel) -> anyhow::Result<ProtocolEngine<f64>> {
    let pc = model.protocol_config(0.0)?.with_mode(cfg.protocol.mode);
    let basis = FockBasis::enumerate(pc.n_total());
    Ok(ProtocolEngine::new(pc, basis)?)
}

fn spectrum(cfg: &ExperimentConfig, model: &ResolvedModel) -> anyhow::Result<Outcome> {
    let n = model.m + model.p;
    let basis = FockBasis::enumerate(n);
    let grid = cfg.spectrum_grid()?;
    let sweep = match cfg.spectrum.sweep {
        SweepVariable::Coupling => sweep_spectrum(&model.params(), &grid, &basis)?,
        SweepVariable::Field => {
            let params = model.params().with_fields(0.0, cfg.spectrum.nu_over_j * model.j);
            sweep_field(&params, &grid, &basis)?
        }
    };
    let variable = match cfg.spectrum.sweep {
        SweepVariable::Coupling => "u_over_j",
        SweepVariable::Field => "mu_over_j",
    };
    let mut table = Table::new("spectrum", &["index", variable, "level", "e_over_j", "band_m", "band_p", "initial_band"]);
    let mut resolved = Vec::with_capacity(grid.len());
    for (k, (g, levels)) in grid.iter().zip(&sweep.energies).enumerate() {
        let labels = assign_bands(levels, n).ok();
        let initial = locate_band(levels, n, model.m, model.p).ok();
        resolved.push(json!({ variable: g, "all_bands_resolved": labels.is_some(), "initial_band_resolved": initial.is_some() }));
        for (l, e) in levels.iter().enumerate() {
            let label = labels.as_ref().and_then(|a| a.label(l));
            table.push(vec![
                k.to_string(),
                num(*g),
                l.to_string(),
                num(*e),
                opt(label.map(|b| b.0)),
                opt(label.map(|b| b.1)),
                opt(initial.map(|b| b.contains(l))),
            ]);
        }
    }
    let mut tables = vec![table];
    let mut summary = json!({ "n_total": n, "levels": basis.len(), "points": resolved });
    if cfg.spectrum.effective_points > 0 {
        let t_m = model.protocol_config(0.0)?.derived.t_m;
        let times = linspace(0.0, t_m, cfg.spectrum.effective_points, "effective comparison")?;
        let cmp = compare_effective(&basis, model.m, model.p, &model.params(), &times)?;
        let mut t = Table::new("effective", &["index", "model_time_s", "deficit"]);
        for (k, (time, d)) in cmp.times.iter().zip(&cmp.deficits).enumerate() {
            t.push(vec![k.to_string(), num(*time), num(*d)]);
        }
        summary["max_effective_deficit"] = json!(cmp.max_deficit());
        tables.push(t);
    }
    Ok(Outcome { tables, summary })
}

fn evolve(cfg: &ExperimentConfig, model: &ResolvedModel) -> anyhow::Result<Outcome> {
    let pc = model.protocol_config(0.0)?;
    let basis = FockBasis::enumerate(pc.n_total());
    let t_end = cfg.evolve.t_end.unwrap_or(pc.derived.t_m);
    let times = linspace(0.0, t_end, cfg.evolve.points, "evolve")?;
    let h = match cfg.evolve.hamiltonian {
        HamiltonianKind::Full => build_full_hamiltonian(&pc.params, &basis),
        HamiltonianKind::Effective => build_effective_hamiltonian_charges(&basis, pc.derived.omega),
    };
    let psi0 = QuantumState::fock(&basis, pc.initial_state())?;
    let target = ideal_uber_noon(&pc, &basis, UberNoonStage::PreField)?;
    let states = trajectory(&h, &psi0, &times)?;
    let mut table = Table::new(
        "evolve",
        &["index", "model_time_s", "n1", "n2", "n3", "n4", "return_probability", "uber_noon_fidelity"],
    );
    let mut best = 0.0f64;
    for (k, (t, psi)) in times.iter().zip(&states).enumerate() {
        let f = fidelity(&target, psi)?;
        best = best.max(f);
        let mut row = vec![k.to_string(), num(*t)];
        row.extend(Site::ALL.iter().map(|&s| num(psi.number_expectation(s))));
        row.push(num(psi.inner(&psi0)?.norm_sqr()));
        row.push(num(f));
        table.push(row);
    }
    let last = fidelity(&target, states.last().expect("nonempty grid"))?;
    Ok(Outcome { tables: vec![table], summary: json!({ "final_uber_noon_fidelity": last, "max_uber_noon_fidelity": best }) })
}

fn protocol1(cfg: &ExperimentConfig, model: &ResolvedModel) -> anyhow::Result<Outcome> {
    let eng = engine(cfg, model)?;
    let grid = cfg.p_theta_grid()?;
    let filter = OutcomeFilter::noon(model.m);
    let results = eng.sweep_protocol1(&grid, &filter)?;
    let mut table = Table::new(
        "protocol1",
        &["set", "m", "p", "p_theta", "r", "probability", "fidelity", "noon_fidelity_b", "accepted", "model_time_s"],
    );
    let set = opt(model.preset.map(|p| p.name()));
    let mut min_accepted = f64::INFINITY;
    for out in &results {
        for b in &out.branches {
            if b.accepted {
                min_accepted = min_accepted.min(b.fidelity);
            }
            table.push(vec![
                set.clone(),
                model.m.to_string(),
                model.p.to_string(),
                num(out.p_theta),
                opt(b.outcome()),
                num(b.probability()),
                num(b.fidelity),
                num(b.noon_fidelity_b),
                b.accepted.to_string(),
                num(b.elapsed_model_time),
            ]);
        }
    }
    Ok(Outcome { tables: vec![table], summary: json!({ "points": grid.len(), "min_accepted_fidelity": min_accepted }) })
}

fn protocol2(cfg: &ExperimentConfig, model: &ResolvedModel) -> anyhow::Result<Outcome> {
    let eng = engine(cfg, model)?;
    let grid = cfg.p_theta_grid()?;
    let results = eng.sweep_protocol2(&grid)?;
    let mut table =
        Table::new("protocol2", &["set", "m", "p", "p_theta", "fidelity", "noon_fidelity_b", "model_time_s"]);
    let set = opt(model.preset.map(|p| p.name()));
    for (pt, r) in grid.iter().zip(&results) {
        table.push(vec![
            set.clone(),
            model.m.to_string(),
            model.p.to_string(),
            num(*pt),
            num(r.fidelity),
            num(r.noon_fidelity_b),
            num(r.elapsed_model_time),
        ]);
    }
    let min = results.iter().map(|r| r.fidelity).fold(f64::INFINITY, f64::min);
    Ok(Outcome { tables: vec![table], summary: json!({ "points": grid.len(), "min_fidelity": min }) })
}

fn readout(cfg: &ExperimentConfig, model: &ResolvedModel) -> anyhow::Result<Outcome> {
    let eng = engine(cfg, model)?;
    let grid = cfg.p_theta_grid()?;
    let points = eng.sweep_readout(&grid)?;
    let m = model.m;
    let mut table = Table::new("readout", &["p_theta", "protocol", "branch", "outcome", "probability", "law"]);
    for pt in &points {
        for b in &pt.protocol1 {
            for (slot, r) in [0, m].into_iter().enumerate() {
                let law = ReadoutLaw::protocol1_joint(m, b.branch, r).map(|l| l.eval(pt.p_theta));
                table.push(vec![
                    num(pt.p_theta),
                    "I".into(),
                    b.branch.to_string(),
                    r.to_string(),
                    num(b.joint()[slot]),
                    opt(law.map(num)),
                ]);
            }
        }
        for (slot, r) in [0, m].into_iter().enumerate() {
            let law = if model.nu > 0.0 { ReadoutLaw::protocol2(r, m) } else { ReadoutLaw::protocol2_reversed(r, m) };
            table.push(vec![
                num(pt.p_theta),
                "II".into(),
                String::new(),
                r.to_string(),
                num(pt.protocol2[slot]),
                opt(law.map(|l| num(l.eval(pt.p_theta)))),
            ]);
        }
    }
    let mut tables = vec![table];
    let summary = match fit_readout_sweep(&points) {
        Ok(fit) => {
            let mut t = Table::new("readout_fit", &["constant", "value"]);
            for (name, v) in [("c00", fit.c00), ("c_mm", fit.c_mm), ("c0", fit.c0), ("c_m", fit.c_m)] {
                t.push(vec![name.into(), num(v)]);
            }
            tables.push(t);
            json!({ "points": grid.len(), "fit": fit })
        }
        Err(Error::DegenerateFit(why)) => json!({ "points": grid.len(), "fit": null, "fit_skipped": why }),
        Err(e) => return Err(e.into()),
    };
    Ok(Outcome { tables, summary })
}

fn physical(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let ph = &cfg.physical;
    if ph.scattering_lengths.is_empty() {
        bail!(Error::InvalidConfig("physical.scattering_lengths is empty".into()));
    }
    let [dx, dy] = ph.displacement;
    let bracket = (ph.bracket[0], ph.bracket[1]);
    let mut roots = Table::new(
        "physical",
        &[
            "scattering_length_a0",
            "omega_r",
            "omega_r_hz",
            "omega_z",
            "u0",
            "u12",
            "u13",
            "u",
            "mu",
            "nu",
            "v0",
            "recoil_energy",
            "v0_over_recoil",
            "anisotropy_f",
            "residual",
        ],
    );
    let mut summary = Vec::new();
    for &a in &ph.scattering_lengths {
        let trap = ph.trap.with_scattering_length(a);
        let IntegrabilityRoot { omega_r, residual, .. } = lattice::solve_integrability(&trap, bracket)?;
        let d = lattice::derive(&trap, omega_r, dx, dy)?;
        roots.push(vec![
            num(a),
            num(omega_r),
            num(omega_r / std::f64::consts::TAU),
            num(d.omega_z),
            num(d.u0),
            num(d.u12),
            num(d.u13),
            num(d.u),
            num(d.mu),
            num(d.nu),
            num(d.v0),
            num(d.recoil_energy),
            num(d.v0_over_recoil),
            num(d.anisotropy_f),
            num(residual),
        ]);
        summary.push(json!({
            "scattering_length_a0": a,
            "omega_r_hz": omega_r / std::f64::consts::TAU,
            "u0": d.u0,
            "u": d.u,
            "mu": d.mu,
            "v0_over_recoil": d.v0_over_recoil,
        }));
    }
    let mut tables = vec![roots];
    if ph.scan_points > 0 {
        let omegas = linspace(ph.scan[0], ph.scan[1], ph.scan_points, "physical scan")?;
        let mut scan = Table::new("physical_scan", &["scattering_length_a0", "omega_r", "omega_r_hz", "u0", "u12", "u13", "u"]);
        for &a in &ph.scattering_lengths {
            let trap = ph.trap.with_scattering_length(a);
            for &w in &omegas {
                let d = lattice::derive(&trap, w, dx, dy)?;
                scan.push(vec![
                    num(a),
                    num(w),
                    num(w / std::f64::consts::TAU),
                    num(d.u0),
                    num(d.u12),
                    num(d.u13),
                    num(d.u),
                ]);
            }
        }
        tables.push(scan);
    }
    Ok(Outcome { tables, summary: json!({ "roots": summary }) })
}

fn robustness(cfg: &ExperimentConfig, model: &ResolvedModel) -> anyhow::Result<Outcome> {
    let r = &cfg.robustness;
    if r.modes.is_empty() {
        bail!(Error::InvalidConfig("robustness.modes is empty".into()));
    }
    let grid = cfg.xi_grid()?;
    let base = model.protocol_config(std::f64::consts::FRAC_PI_2)?;
    let basis = FockBasis::enumerate(base.n_total());
    let source = match r.source {
        SourceKind::Direct => ParameterSource::Direct,
        SourceKind::Physical => ParameterSource::Physical { trap: r.trap },
    };
    let mut table = Table::new(
        "robustness",
        &[
            "mode",
            "oscillations",
            "source",
            "xi_over_j",
            "xi",
            "r_a",
            "probability_a",
            "fidelity_a",
            "r_b",
            "probability_b",
            "fidelity_b",
            "fidelity_ii",
            "t_m",
            "t_mu",
            "t_nu",
        ],
    );
    let mut summary = Vec::new();
    for &mode in &r.modes {
        let rc = RobustnessConfig::new(base, grid.clone(), r.oscillations, mode)?.with_source(source).with_start(r.start);
        let rows = run_robustness(&rc, &basis)?;
        let label = serde_json::to_value(mode)?;
        let mode_name = label.as_str().unwrap_or_default().to_string();
        let mut min_ii = f64::INFINITY;
        for row in &rows {
            min_ii = min_ii.min(row.protocol2);
            let [(ra, pa, fa), (rb, pb, fb)] = row.protocol1;
            table.push(vec![
                mode_name.clone(),
                r.oscillations.to_string(),
                source.label().into(),
                num(row.xi_over_j),
                num(row.xi),
                ra.to_string(),
                num(pa),
                num(fa),
                rb.to_string(),
                num(pb),
                num(fb),
                num(row.protocol2),
                num(row.t_m),
                num(row.t_mu),
                num(row.t_nu),
            ]);
        }
        summary.push(json!({ "mode": label, "min_fidelity_ii": min_ii }));
    }
    Ok(Outcome { tables: vec![table], summary: json!({ "points": grid.len(), "modes": summary }) })
}
