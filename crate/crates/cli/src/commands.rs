//! Subcommand implementations.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context as _, Result};

use ionsim_core::analysis::{
    binomial_sigma, compose_budget, correlation_matrix, correlation_svg, error_budget,
    improvement_scenario,
};
use ionsim_core::atom;
use ionsim_core::collection::{channel_collection, collected_photon_probability};
use ionsim_core::lindblad::{
    evolve, photon_generation_probabilities, CollapseSet, DensityMatrix, StepControl,
};
use ionsim_core::montecarlo::{
    importance_mode, records_to_csv, records_to_jsonl, run_experiment, ClickRecord, IonState,
    PhotonOutcome,
};
use ionsim_core::protocol::{
    calibrate_optical_rabi, excitation_drive, simulate_state_prep,
};
use ionsim_core::readout::{analytic_threshold_fidelities, calibrate_readout, simulate_readout};
use ionsim_core::rng::ShotStreams;
use ionsim_core::spectrometer::{
    classify_photon, gaussian_overlap_infidelity, littrow_angle, resolution_from_spots,
    resolving_power, PhotonState,
};

use crate::config::Config;
use crate::manifest::OutputSink;

pub struct Context {
    pub config: Config,
    pub seed: Option<u64>,
    pub shots: Option<u64>,
    pub workers: usize,
    pub out_dir: PathBuf,
    pub format: String,
    pub diagnostics: bool,
}

impl Context {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(self.config.get("montecarlo", "seed") as u64)
    }

    fn sink(&self) -> Result<OutputSink> {
        OutputSink::new(&self.out_dir)
    }

    fn finish(&self, sink: OutputSink, subcommand: &str) -> Result<()> {
        sink.finish(subcommand, &self.config, Some(self.seed()), self.shots, self.workers)
    }
}

pub fn lindblad(ctx: &Context, samples: usize) -> Result<()> {
    let cfg = &ctx.config;
    let pulse_s = cfg.get("protocol", "excitation_pulse");
    let lifetime_s = cfg.get("protocol", "excited_lifetime");
    let target = cfg.get("protocol", "generation_target");
    let omega = calibrate_optical_rabi(target, pulse_s, lifetime_s)?;
    println!("calibrated optical Rabi frequency: {omega:.6e} rad/s ({:.3} MHz / 2pi)", omega / std::f64::consts::TAU / 1e6);

    let drive = excitation_drive(omega, pulse_s);
    let t_end = pulse_s + 12.0 * lifetime_s;
    let res = evolve(
        &DensityMatrix::pure(atom::S1M1),
        &[drive],
        &CollapseSet::spontaneous(lifetime_s),
        &cfg.splittings(),
        (0.0, t_end),
        &StepControl::default(),
        samples.max(2),
    )?;
    let gen = photon_generation_probabilities(&res);
    println!("generation probability per branch: nu1 {:.5}, nu0 {:.5}", gen.p_nu1, gen.p_nu0);
    if !gen.ring_down_complete() {
        eprintln!(
            "warning: residual excited population {:.2e} exceeds 1e-4; extend the ring-down",
            gen.residual_excited
        );
    }

    // level names carry commas and bras, so the header uses s00, s1m1, ...
    let mut csv = String::from("time_s");
    for name in ["s00", "s1m1", "s10", "s11", "p00", "p1m1", "p10", "p11"] {
        csv.push_str(&format!(",pop_{name}"));
    }
    for label in &res.channel_labels {
        csv.push_str(&format!(",emit_{}", label.replace("->", "_to_").replace(['|', '>', ','], "")));
    }
    csv.push('\n');
    for (i, t) in res.times.iter().enumerate() {
        csv.push_str(&format!("{t:.6e}"));
        for p in res.populations[i] {
            csv.push_str(&format!(",{p:.9e}"));
        }
        for e in &res.emission_trajectory[i] {
            csv.push_str(&format!(",{e:.9e}"));
        }
        csv.push('\n');
    }
    let mut sink = ctx.sink()?;
    let path = sink.write("trajectory.csv", &csv)?;
    println!("trajectory ({} samples) -> {}", res.times.len(), path.display());
    ctx.finish(sink, "lindblad")
}

pub fn sequence(ctx: &Context) -> Result<()> {
    let seq = ctx.config.sequence();
    seq.validate()?;
    println!("{:<22} {:>14}", "step", "duration");
    for step in &seq.steps {
        println!("{:<22} {:>11.3} us", step.name, step.duration_s * 1e6);
    }
    println!("{:<22} {:>11.3} us", "dead time", seq.dead_time_s * 1e6);
    println!("{:<22} {:>11.3} us", "total cycle", seq.total_cycle_s() * 1e6);
    let prep = simulate_state_prep(&ctx.config.state_prep());
    println!(
        "preparation outcome: ready {:.4}, transfer failed {:.4}, pump failed {:.4}",
        prep.ready, prep.transfer_failed, prep.pump_failed
    );
    let sink = ctx.sink()?;
    ctx.finish(sink, "sequence")
}

pub fn collection(ctx: &Context) -> Result<()> {
    let geometry = ctx.config.collection_geometry();
    let cc = channel_collection(&geometry)?;
    println!("{:<28} {:>10}", "pattern", "fraction");
    println!("{:<28} {:>10.5}", "uniform (geometric)", cc.geometric);
    println!("{:<28} {:>10.5}", "sigma (q = +-1)", cc.sigma);
    println!("{:<28} {:>10.5}", "pi (q = 0)", cc.pi);
    let fibre = ctx.config.get_measured("collection", "fibre_efficiency");
    let target = ctx.config.get("protocol", "generation_target");
    println!(
        "collected qubit-photon probability at generation {target}: {:.4e}",
        collected_photon_probability(target, fibre.value)
    );
    let sink = ctx.sink()?;
    ctx.finish(sink, "collection")
}

pub fn spectrometer(ctx: &Context) -> Result<()> {
    let cfg = &ctx.config;
    let grating = cfg.grating();
    let wavelength = cfg.get("spectrometer", "wavelength");
    let littrow = littrow_angle(&grating, wavelength)?;
    let spots = cfg.spots();
    let qubit_splitting = cfg.get("atom", "ground_hyperfine");
    let resolution = resolution_from_spots(&spots, qubit_splitting);
    let overlap = gaussian_overlap_infidelity(&spots);
    let chain = cfg.throughput();
    chain.validate()?;
    let eff = chain.efficiency();

    let rows: Vec<(String, String)> = vec![
        ("littrow angle".into(), format!("{:.2} deg", littrow.to_degrees())),
        ("operating angle".into(), format!("{:.2} deg", grating.operating_angle_rad.to_degrees())),
        ("resolving power".into(), format!("{:.0}", resolving_power(&grating))),
        ("spot separation".into(), format!("{:.2} radii", spots.separation_radii())),
        ("resolution".into(), format!("{:.2} GHz", resolution / 1e9)),
        ("overlap infidelity".into(), format!("{overlap:.3e}")),
    ];
    println!("{:<22} {:>14}", "quantity", "value");
    for (name, value) in &rows {
        println!("{name:<22} {value:>14}");
    }
    println!("throughput stages:");
    for (name, m) in &chain.stages {
        println!("  {:<28} {}", name, m.paren());
    }
    println!("  {:<28} {} = {:.4e}", "fibre-to-detector product", eff.paren_percent(), eff.value);

    let mut sink = ctx.sink()?;
    if ctx.format == "csv" {
        let mut csv = String::from("quantity,value\n");
        for (name, value) in &rows {
            csv.push_str(&format!("{name},{value}\n"));
        }
        for (name, m) in &chain.stages {
            csv.push_str(&format!("stage {name},{}\n", m.paren()));
        }
        csv.push_str(&format!("throughput,{:.6e}\n", eff.value));
        csv.push_str(&format!("throughput sigma,{:.6e}\n", eff.sigma));
        let path = sink.write("spectrometer.csv", &csv)?;
        println!("report -> {}", path.display());
    }
    ctx.finish(sink, "spectrometer")
}

pub fn readout_calibrate(ctx: &Context) -> Result<()> {
    let cfg = &ctx.config;
    let window = cfg.get("protocol", "readout_window");
    let bright = cfg.get("readout", "bright_rate");
    let threshold = cfg.get("readout", "threshold") as u32;
    let target_up = cfg.get("readout", "fidelity_up");
    let target_down = cfg.get("readout", "fidelity_down");
    let model = calibrate_readout(target_up, target_down, window, bright, threshold)?;
    println!("solved readout model:");
    println!("  bright rate   {:.1} counts/s (fixed)", model.bright_rate_hz);
    println!("  dark rate     {:.2} counts/s", model.dark_rate_hz);
    println!("  leakage rate  {:.2} 1/s", model.leak_rate_hz);
    println!("  window        {:.3} ms, threshold {threshold}", window * 1e3);
    let (fu, fd) = analytic_threshold_fidelities(&model, threshold);
    println!("analytic fidelities: up {fu:.4} (target {target_up}), down {fd:.4} (target {target_down})");

    // simulated cross-check, deterministic in the seed
    let streams = ShotStreams::new(ctx.seed());
    let mut rng = streams.aux_rng(0);
    let n = 20_000;
    let mut ok_up = 0u64;
    let mut ok_down = 0u64;
    for _ in 0..n {
        if simulate_readout(IonState::Up, &model, &mut rng).state == IonState::Up {
            ok_up += 1;
        }
        if simulate_readout(IonState::Down, &model, &mut rng).state == IonState::Down {
            ok_down += 1;
        }
    }
    println!(
        "simulated fidelities over {n} trials: up {:.4}, down {:.4}",
        ok_up as f64 / n as f64,
        ok_down as f64 / n as f64
    );
    let sink = ctx.sink()?;
    ctx.finish(sink, "readout-calibrate")
}

pub fn simulate(ctx: &Context) -> Result<()> {
    let cfg = ctx.config.experiment(Some(ctx.seed()), ctx.shots, ctx.diagnostics);
    let (records, summary) = run_experiment(&cfg, ctx.workers)?;
    let mut sink = ctx.sink()?;
    let records_path = if ctx.format == "json" {
        sink.write("records.jsonl", &records_to_jsonl(&records))?
    } else {
        sink.write("records.csv", &records_to_csv(&records))?
    };
    let summary_json = serde_json::to_string_pretty(&summary)?;
    let summary_path = sink.write("summary.json", &summary_json)?;
    println!(
        "{} shots, {} clicks (nu0 {}, nu1 {})",
        summary.shots, summary.clicks, summary.nu0_clicks, summary.nu1_clicks
    );
    println!(
        "empirical click rate {:.4e}; analytic {:.4e} (expected {:.1} clicks)",
        summary.empirical_click_rate, summary.analytic_click_probability, summary.expected_clicks
    );
    println!("records -> {}", records_path.display());
    println!("summary -> {}", summary_path.display());
    ctx.finish(sink, "simulate")
}

fn read_records_csv(path: &Path) -> Result<Vec<ClickRecord>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading records {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| anyhow!("empty records file"))?;
    if header != "shot,photon,ion,timestamp" {
        bail!("unexpected records header `{header}`");
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            bail!("line {}: expected 4 fields", i + 2);
        }
        let photon = match fields[1] {
            "nu0" => PhotonOutcome::Nu0Click,
            "nu1" => PhotonOutcome::Nu1Click,
            "none" => PhotonOutcome::NoClick,
            other => bail!("line {}: unknown photon outcome `{other}`", i + 2),
        };
        let ion = match fields[2] {
            "up" => IonState::Up,
            "down" => IonState::Down,
            other => bail!("line {}: unknown ion state `{other}`", i + 2),
        };
        out.push(ClickRecord {
            shot: fields[0].parse().with_context(|| format!("line {}: shot", i + 2))?,
            photon,
            ion,
            timestamp_s: fields[3].parse().with_context(|| format!("line {}: timestamp", i + 2))?,
            truth: None,
        });
    }
    Ok(out)
}

pub fn analyze(ctx: &Context, clicks: u64, records_path: Option<&Path>) -> Result<()> {
    let records = match records_path {
        Some(path) => read_records_csv(path)?,
        None => {
            let cfg = ctx.config.experiment(Some(ctx.seed()), None, ctx.diagnostics);
            importance_mode(&cfg, clicks)?
        }
    };
    let matrix = correlation_matrix(&records)?;
    println!("clicks analyzed: {}", matrix.counts.total());
    println!(
        "counts: (nu0,down) {}  (nu0,up) {}  (nu1,down) {}  (nu1,up) {}",
        matrix.counts.nu0_down, matrix.counts.nu0_up, matrix.counts.nu1_down, matrix.counts.nu1_up
    );
    println!("P(down|nu0) = {}", matrix.fidelity_nu0.paren_percent());
    println!("P(up|nu1)   = {}", matrix.fidelity_nu1.paren_percent());
    println!("avg correlation fidelity: {}", matrix.average_fidelity.paren_percent());

    let mut report = serde_json::to_value(&matrix)?;
    if ctx.diagnostics && records.iter().any(|r| r.truth.is_some()) {
        let eb = error_budget(&records)?;
        println!(
            "error attribution: readout {:.4}, spectrometer {:.4}, contamination {:.4}",
            eb.readout, eb.spectrometer, eb.contamination
        );
        report["error_budget"] = serde_json::to_value(&eb)?;
    }
    let mut sink = ctx.sink()?;
    let json_path = sink.write("correlation.json", &serde_json::to_string_pretty(&report)?)?;
    let svg_path = sink.write("correlation.svg", &correlation_svg(&matrix))?;
    let csv = format!(
        "quantity,value,sigma\n\
         counts nu0 down,{},\ncounts nu0 up,{},\ncounts nu1 down,{},\ncounts nu1 up,{},\n\
         P(down|nu0),{:.6},{:.6}\nP(up|nu1),{:.6},{:.6}\naverage fidelity,{:.6},{:.6}\n",
        matrix.counts.nu0_down,
        matrix.counts.nu0_up,
        matrix.counts.nu1_down,
        matrix.counts.nu1_up,
        matrix.fidelity_nu0.value,
        matrix.fidelity_nu0.sigma,
        matrix.fidelity_nu1.value,
        matrix.fidelity_nu1.sigma,
        matrix.average_fidelity.value,
        matrix.average_fidelity.sigma,
    );
    sink.write("correlation.csv", &csv)?;
    println!("report -> {}", json_path.display());
    println!("chart  -> {}", svg_path.display());
    ctx.finish(sink, "analyze")
}

pub fn budget(ctx: &Context) -> Result<()> {
    let stages = ctx.config.budget_stages();
    let budget = compose_budget(&stages)?;
    println!("{:<28} {:>12}", "stage", "value");
    for (name, m) in &budget.stages {
        println!("{:<28} {:>12}", name, m.paren());
    }
    println!(
        "coincidence/shot: {:.2e} ({})",
        budget.product.value,
        budget.product.paren_percent()
    );
    let shots = ctx.shots.unwrap_or(ctx.config.get("montecarlo", "shots") as u64);
    println!(
        "expected clicks over {shots} shots: {:.1} +- {:.1}",
        budget.product.value * shots as f64,
        budget.product.sigma * shots as f64
    );

    // stochastic attribution of correlation errors, conditioned sampling
    let mut mc = ctx.config.experiment(Some(ctx.seed()), None, true);
    mc.diagnostics = true;
    let records = importance_mode(&mc, 10_000)?;
    let eb = error_budget(&records)?;
    println!(
        "error budget over {} conditioned clicks: readout {:.4}, spectrometer {:.4}, contamination {:.4}, correct {:.4}",
        eb.clicks, eb.readout, eb.spectrometer, eb.contamination, eb.correct_fraction
    );

    let projection = improvement_scenario(&ctx.config.improved_scenario());
    println!(
        "upgrade projection (assumption-dependent): fidelity {:.4}, success rate {:.1} Hz at {:.2} kHz cycle",
        projection.fidelity,
        projection.success_rate_hz,
        projection.cycle_rate_hz / 1e3
    );
    for a in &projection.assumptions {
        println!("  assumes {a}");
    }
    let mut sink = ctx.sink()?;
    let body = serde_json::json!({
        "efficiency_budget": &budget,
        "error_budget": &eb,
        "upgrade_projection": &projection,
    });
    let path = sink.write("budget.json", &serde_json::to_string_pretty(&body)?)?;
    let mut csv = String::from("stage,value,sigma\n");
    for (name, m) in &budget.stages {
        csv.push_str(&format!("{name},{:.6},{:.6}\n", m.value, m.sigma));
    }
    csv.push_str(&format!(
        "coincidence per shot,{:.6e},{:.6e}\n",
        budget.product.value, budget.product.sigma
    ));
    sink.write("budget.csv", &csv)?;
    println!("report -> {}", path.display());
    ctx.finish(sink, "budget")
}

struct Row {
    name: &'static str,
    sim: String,
    paper: &'static str,
    pass: bool,
}

pub fn reproduce_paper(ctx: &Context) -> Result<()> {
    let cfg = &ctx.config;
    let mut rows: Vec<Row> = Vec::new();

    // microwave transfer
    let transfer = cfg.microwave().transfer_probability();
    rows.push(Row {
        name: "microwave transfer",
        sim: format!("{transfer:.4}"),
        paper: "0.91(4)",
        pass: (transfer - 0.91).abs() <= 0.01,
    });

    // calibrated photon generation per branch
    let pulse_s = cfg.get("protocol", "excitation_pulse");
    let lifetime_s = cfg.get("protocol", "excited_lifetime");
    let target = cfg.get("protocol", "generation_target");
    let omega = calibrate_optical_rabi(target, pulse_s, lifetime_s)?;
    let gen = {
        let res = evolve(
            &DensityMatrix::pure(atom::S1M1),
            &[excitation_drive(omega, pulse_s)],
            &CollapseSet::spontaneous(lifetime_s),
            &cfg.splittings(),
            (0.0, pulse_s + 12.0 * lifetime_s),
            &StepControl::default(),
            2,
        )?;
        photon_generation_probabilities(&res)
    };
    rows.push(Row {
        name: "photon generation per branch",
        sim: format!("{:.4} / {:.4}", gen.p_nu1, gen.p_nu0),
        paper: "0.116(4) each",
        pass: (gen.p_nu1 - 0.116).abs() <= 0.004 && (gen.p_nu0 - 0.116).abs() <= 0.004,
    });

    // collection fractions
    let cc = channel_collection(&cfg.collection_geometry())?;
    rows.push(Row {
        name: "collection solid angle (geometric)",
        sim: format!("{:.3}%", cc.geometric * 100.0),
        paper: "13.3%",
        pass: (cc.geometric - 0.133).abs() <= 0.003,
    });
    rows.push(Row {
        name: "collection on sigma pattern",
        sim: format!("{:.3}%", cc.sigma * 100.0),
        paper: "14.3%",
        pass: (cc.sigma - 0.143).abs() <= 0.003,
    });

    // spectrometer numbers
    let grating = cfg.grating();
    let r = resolving_power(&grating);
    rows.push(Row {
        name: "resolving power",
        sim: format!("{r:.0}"),
        paper: "~95,000",
        pass: (r - 95_000.0).abs() / 95_000.0 <= 0.01,
    });
    let spots = cfg.spots();
    let resolution = resolution_from_spots(&spots, cfg.get("atom", "ground_hyperfine"));
    rows.push(Row {
        name: "spot resolution",
        sim: format!("{:.2} GHz", resolution / 1e9),
        paper: "3.6(2) GHz",
        pass: (resolution - 3.6e9).abs() <= 0.2e9,
    });
    let overlap = gaussian_overlap_infidelity(&spots);
    rows.push(Row {
        name: "spot overlap infidelity",
        sim: format!("{overlap:.2e}"),
        paper: "< 0.34%",
        pass: overlap <= 0.0034,
    });
    let eff = cfg.throughput().efficiency();
    rows.push(Row {
        name: "spectrometer throughput",
        sim: eff.paren_percent(),
        paper: "3.7(5)%",
        pass: (eff.value - 0.037).abs() <= 0.001 && (0.004..=0.006).contains(&eff.sigma),
    });

    // classification statistics
    let matrix = cfg.classification();
    let streams = ShotStreams::new(ctx.seed());
    let n_class = 1_000_000u64;
    let mut rng = streams.aux_rng(1);
    let mut correct = [0u64; 2];
    for _ in 0..n_class {
        if classify_photon(PhotonState::Nu0, &matrix, &mut rng) == PhotonState::Nu0 {
            correct[0] += 1;
        }
        if classify_photon(PhotonState::Nu1, &matrix, &mut rng) == PhotonState::Nu1 {
            correct[1] += 1;
        }
    }
    let f0 = correct[0] as f64 / n_class as f64;
    let f1 = correct[1] as f64 / n_class as f64;
    rows.push(Row {
        name: "classification fidelity nu0/nu1",
        sim: format!("{f0:.4} / {f1:.4}"),
        paper: "98.0(6)% / 97.2(4)%",
        pass: (f0 - 0.980).abs() <= 3.0 * binomial_sigma(0.980, n_class)
            && (f1 - 0.972).abs() <= 3.0 * binomial_sigma(0.972, n_class),
    });

    // readout calibration reproduces its targets in simulation
    let window = cfg.get("protocol", "readout_window");
    let model = calibrate_readout(
        cfg.get("readout", "fidelity_up"),
        cfg.get("readout", "fidelity_down"),
        window,
        cfg.get("readout", "bright_rate"),
        cfg.get("readout", "threshold") as u32,
    )?;
    let n_readout = 100_000u64;
    let mut rng = streams.aux_rng(2);
    let mut ok = [0u64; 2];
    for _ in 0..n_readout {
        if simulate_readout(IonState::Up, &model, &mut rng).state == IonState::Up {
            ok[0] += 1;
        }
        if simulate_readout(IonState::Down, &model, &mut rng).state == IonState::Down {
            ok[1] += 1;
        }
    }
    let ru = ok[0] as f64 / n_readout as f64;
    let rd = ok[1] as f64 / n_readout as f64;
    rows.push(Row {
        name: "readout fidelity up/down",
        sim: format!("{ru:.4} / {rd:.4}"),
        paper: "95.5% / 97.3%",
        pass: (ru - 0.955).abs() <= 3.0 * binomial_sigma(0.955, n_readout)
            && (rd - 0.973).abs() <= 3.0 * binomial_sigma(0.973, n_readout),
    });

    // coincidence budget
    let budget = compose_budget(&cfg.budget_stages())?;
    rows.push(Row {
        name: "coincidence budget",
        sim: format!("{:.2e} ({})", budget.product.value, budget.product.paren_percent()),
        paper: "0.011(2)%",
        pass: budget.product.paren_percent() == "0.011(2)%"
            && (budget.product.value - 1.05e-4).abs() <= 0.01e-4,
    });

    // full Monte Carlo session
    let mc = cfg.experiment(Some(ctx.seed()), ctx.shots, false);
    let (_, summary) = run_experiment(&mc, ctx.workers)?;
    let three_sigma = 3.0 * binomial_sigma(budget.product.value, mc.shots);
    rows.push(Row {
        name: "coincidence rate (Monte Carlo)",
        sim: format!(
            "{:.3e} ({} clicks / {} shots)",
            summary.empirical_click_rate, summary.clicks, summary.shots
        ),
        paper: "0.013(3)% measured; 0.011(2)% expected",
        pass: (summary.empirical_click_rate - budget.product.value).abs() <= three_sigma
            && (0.00010..=0.00016).contains(&summary.empirical_click_rate),
    });

    // correlation matrix at the published click count
    let cond = importance_mode(&cfg.experiment(Some(ctx.seed()), None, false), 2006)?;
    let corr = correlation_matrix(&cond)?;
    rows.push(Row {
        name: "P(down|nu0) / P(up|nu1)",
        sim: format!(
            "{} / {}",
            corr.fidelity_nu0.paren_percent(),
            corr.fidelity_nu1.paren_percent()
        ),
        paper: "95.2(7)% / 89.6(10)%",
        pass: corr.fidelity_nu0.value > corr.fidelity_nu1.value
            && (0.005..=0.012).contains(&corr.fidelity_nu0.sigma)
            && (0.005..=0.012).contains(&corr.fidelity_nu1.sigma),
    });
    rows.push(Row {
        name: "avg correlation fidelity",
        sim: corr.average_fidelity.paren_percent(),
        paper: "92.4(8)%",
        pass: (0.899..=0.949).contains(&corr.average_fidelity.value),
    });

    // error attribution
    let diag = importance_mode(&cfg.experiment(Some(ctx.seed()), None, true), 10_000)?;
    let eb = error_budget(&diag)?;
    rows.push(Row {
        name: "infidelity: readout / spectrometer",
        sim: format!("{:.3} / {:.3}", eb.readout, eb.spectrometer),
        paper: "~3.6% / 2.4(5)%",
        pass: (eb.readout - 0.036).abs() <= 0.01 && (eb.spectrometer - 0.024).abs() <= 0.01,
    });

    // upgrade projection
    let projection = improvement_scenario(&cfg.improved_scenario());
    rows.push(Row {
        name: "upgrade projection",
        sim: format!(
            "fidelity {:.4}, {:.1} Hz at {:.2} kHz",
            projection.fidelity,
            projection.success_rate_hz,
            projection.cycle_rate_hz / 1e3
        ),
        paper: "99.1%, ~34 Hz at ~5 kHz",
        pass: projection.fidelity >= 0.99
            && (10.0..=100.0).contains(&projection.success_rate_hz)
            && (4000.0..=6000.0).contains(&projection.cycle_rate_hz),
    });

    // cycle time bookkeeping
    let seq = cfg.sequence();
    rows.push(Row {
        name: "cycle time",
        sim: format!("{:.1} us", seq.total_cycle_s() * 1e6),
        paper: "1411 us",
        pass: seq.validate().is_ok(),
    });

    let passed = rows.iter().filter(|r| r.pass).count();
    println!("{:<36} {:<40} {:<38} status", "quantity", "simulated", "published");
    for row in &rows {
        println!(
            "{:<36} sim {:<36} vs paper {:<29} -> {}",
            row.name,
            row.sim,
            row.paper,
            if row.pass { "PASS" } else { "FAIL" }
        );
    }
    println!("{passed}/{} rows pass", rows.len());
    let sink = ctx.sink()?;
    ctx.finish(sink, "reproduce-paper")
}
