use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context as _;
use peltier_core::calibration::{self, FitOptions, SweepRow};
use peltier_core::controller::ControllerConfig;
use peltier_core::device::trace::{write_actions, write_series, write_temps};
use peltier_core::device::{
    DeviceBackend, DeviceEmulator, DeviceError, FrameBackend, SimulatedBackend, SimulatedConfig,
};
use peltier_core::pattern::{self, format_seconds, Annotation, CompiledSchedule, RunError, SimClock};
use peltier_core::thermal::{self, DriveInput, DriveSchedule, PeltierParams, ThermalError};
use serde::Serialize;
use serde_json::json;

use crate::config::{check_dt, load_controller, load_observations, load_params, CliConfig};
use crate::exit::{Failure, ResultExt, BLOW_UP, CONFIG, GENERAL, NOT_CONVERGED, PARSE, STRICT};
use crate::{BackendKind, CalibrateArgs, CompileArgs, RunPatternArgs, SimulateArgs, SweepArgs};

const DEFAULT_DT: f64 = 0.01;
const DEFAULT_DURATION: f64 = 600.0;

pub struct Context {
    pub file: CliConfig,
    pub out_dir: PathBuf,
    pub pretty: bool,
}

impl Context {
    fn out_path(&self, explicit: Option<&Path>, default_name: &str) -> PathBuf {
        explicit.map_or_else(|| self.out_dir.join(default_name), Path::to_path_buf)
    }

    fn params(&self, explicit: Option<&Path>) -> Result<PeltierParams, Failure> {
        load_params(explicit.or(self.file.params.as_deref()))
    }

    fn controller(&self, explicit: Option<&Path>) -> Result<ControllerConfig, Failure> {
        load_controller(explicit.or(self.file.controller.as_deref()))
    }

    fn dt(&self, explicit: Option<f64>) -> Result<f64, Failure> {
        check_dt(explicit.or(self.file.dt).unwrap_or(DEFAULT_DT))
    }

    fn emit<T: Serialize>(&self, value: &T, pretty: impl FnOnce() -> String) -> Result<(), Failure> {
        let text = if self.pretty {
            pretty()
        } else {
            let mut s = serde_json::to_string_pretty(value).code(GENERAL)?;
            s.push('\n');
            s
        };
        let mut out = std::io::stdout().lock();
        out.write_all(text.as_bytes()).and_then(|_| out.flush()).code(GENERAL)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .code(GENERAL)?;
    }
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("creating {}", path.display()))
        .code(GENERAL)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).code(GENERAL)?;
    w.write_all(b"\n").and_then(|_| w.flush()).code(GENERAL)
}

fn thermal_code(e: &ThermalError) -> u8 {
    match e {
        ThermalError::BlowUp { .. } => BLOW_UP,
        _ => CONFIG,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"))
}

pub fn simulate(ctx: &Context, a: &SimulateArgs) -> Result<(), Failure> {
    let params = ctx.params(a.params.as_deref())?;
    let dt = ctx.dt(a.dt)?;
    let duration = a.duration.or(ctx.file.duration).unwrap_or(DEFAULT_DURATION);
    let drive = DriveSchedule::constant(DriveInput::bench(a.voltage));
    let series = thermal::simulate(&params, &drive, duration, dt).map_err(|e| {
        let code = thermal_code(&e);
        Failure::new(code, e.into())
    })?;
    let result = thermal::lifetime(&series, &params);

    let out = ctx.out_path(a.out.as_deref(), "trace.csv");
    let mut w = create(&out)?;
    write_series(&mut w, &series).code(GENERAL)?;
    w.flush().code(GENERAL)?;

    #[derive(Serialize)]
    struct Summary<'a> {
        voltage: f64,
        duration: f64,
        dt: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        lifetime: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        time_to_target: Option<f64>,
        max_warm_temp: f64,
        target_reached_within_lifetime: bool,
        trace: &'a Path,
    }
    let summary = Summary {
        voltage: a.voltage,
        duration,
        dt,
        lifetime: result.lifetime,
        time_to_target: result.time_to_target,
        max_warm_temp: result.max_warm_temp,
        target_reached_within_lifetime: result.target_reached_within_lifetime,
        trace: &out,
    };
    ctx.emit(&summary, || {
        format!(
            "voltage         {:.2} V\nlifetime        {} s\ntime to 40 C    {} s\nmax warm face   {:.2} C\nreached in time {}\ntrace           {}\n",
            a.voltage,
            opt(result.lifetime),
            opt(result.time_to_target),
            result.max_warm_temp,
            result.target_reached_within_lifetime,
            out.display()
        )
    })
}

pub fn calibrate(ctx: &Context, a: &CalibrateArgs) -> Result<(), Failure> {
    let observations = load_observations(a.observations.as_deref())?;
    let initial = match &a.initial {
        Some(p) => load_params(Some(p))?,
        None => PeltierParams::initial_guess(),
    };
    let options = FitOptions {
        max_iters: a.max_iters,
        restarts: a.restarts,
        seed: a.seed.or(ctx.file.seed).unwrap_or(FitOptions::default().seed),
    };
    let report = calibration::fit(&observations, &initial, &options).code(CONFIG)?;

    let params_out = ctx.out_path(a.out.as_deref(), "calibrated_params.json");
    let report_out = ctx.out_path(a.report.as_deref(), "fit_report.json");
    write_json(&params_out, &report.params)?;
    write_json(&report_out, &report)?;

    let summary = json!({
        "converged": report.converged,
        "final_loss": report.final_loss,
        "predictions": report.predictions,
        "params": params_out,
        "report": report_out,
    });
    ctx.emit(&summary, || {
        let mut s = String::from("voltage  observed  predicted  rel.err  reached(obs/pred)\n");
        for p in &report.predictions {
            s.push_str(&format!(
                "{:>7.2}  {:>8.1}  {:>9}  {:>+7.2}%  {}/{}\n",
                p.voltage,
                p.observed_lifetime,
                opt(p.predicted_lifetime),
                100.0 * p.relative_error,
                p.observed_target_reached,
                p.predicted_target_reached
            ));
        }
        s.push_str(&format!(
            "loss {:.6}, converged {}\n",
            report.final_loss, report.converged
        ));
        s
    })?;

    if !report.converged && !a.allow_nonconverged {
        return Err(Failure::new(
            NOT_CONVERGED,
            anyhow::anyhow!("fit did not converge within {} iterations per start", a.max_iters),
        ));
    }
    Ok(())
}

fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let f = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.6}"));
    let run = |w: &mut csv::Writer<_>| -> csv::Result<()> {
        w.write_record([
            "voltage_V",
            "lifetime_s",
            "time_to_target_s",
            "max_warm_C",
            "target_reached",
            "error",
        ])?;
        for r in rows {
            let v = format!("{:.6}", r.voltage);
            match &r.result {
                Ok(l) => w.write_record([
                    v,
                    f(l.lifetime),
                    f(l.time_to_target),
                    format!("{:.6}", l.max_warm_temp),
                    l.target_reached_within_lifetime.to_string(),
                    String::new(),
                ])?,
                Err(e) => w.write_record([v, String::new(), String::new(), String::new(), String::new(), e.clone()])?,
            }
        }
        w.flush()?;
        Ok(())
    };
    run(&mut w).context("writing sweep table").code(GENERAL)
}

pub fn sweep(ctx: &Context, a: &SweepArgs) -> Result<(), Failure> {
    let params = ctx.params(a.params.as_deref())?;
    let rows = calibration::sweep(&params, a.from, a.to, a.step).code(CONFIG)?;
    let optimal = calibration::select_optimal_voltage(&rows);
    let out = ctx.out_path(a.out.as_deref(), "sweep.csv");
    write_sweep_csv(&out, &rows)?;

    let summary = json!({
        "optimal_voltage": optimal,
        "rows": rows.iter().map(|r| match &r.result {
            Ok(l) => json!({"voltage": r.voltage, "lifetime": l.lifetime, "time_to_target": l.time_to_target,
                "max_warm_temp": l.max_warm_temp, "target_reached_within_lifetime": l.target_reached_within_lifetime}),
            Err(e) => json!({"voltage": r.voltage, "error": e}),
        }).collect::<Vec<_>>(),
        "table": out,
    });
    ctx.emit(&summary, || {
        let mut s = String::from("voltage  lifetime  to 40 C  max warm  reached\n");
        for r in &rows {
            match &r.result {
                Ok(l) => s.push_str(&format!(
                    "{:>7.2}  {:>8}  {:>7}  {:>8.2}  {}\n",
                    r.voltage,
                    opt(l.lifetime),
                    opt(l.time_to_target),
                    l.max_warm_temp,
                    l.target_reached_within_lifetime
                )),
                Err(e) => s.push_str(&format!("{:>7.2}  error: {e}\n", r.voltage)),
            }
        }
        match optimal {
            Some(v) => s.push_str(&format!("optimal voltage {v:.1} V\n")),
            None => s.push_str("no voltage reaches the target within its lifetime\n"),
        }
        s
    })
}

fn describe(a: &Annotation) -> String {
    match a {
        Annotation::Superseded {
            element,
            line,
            time,
            by_line,
            ..
        } => {
            format!(
                "line {line}: element {element} at {}s superseded by line {by_line}",
                format_seconds(*time)
            )
        }
        Annotation::Delayed {
            element,
            line,
            time,
            until,
            ..
        } => format!(
            "line {line}: element {element} at {}s still rotating, delayed until {}s",
            format_seconds(*time),
            format_seconds(*until)
        ),
        Annotation::CoolBudgetExhausted { element, time } => {
            format!("element {element}: cold side exhausted at {}s", format_seconds(*time))
        }
        Annotation::SimulationFailed { time, reason } => {
            format!("pre-simulation failed at {}s: {reason}", format_seconds(*time))
        }
    }
}

fn compile_pattern(
    path: &Path,
    config: &ControllerConfig,
    params: &PeltierParams,
) -> Result<CompiledSchedule, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading pattern {}", path.display()))
        .code(CONFIG)?;
    let script = pattern::parse_pattern(&text)
        .with_context(|| format!("{}", path.display()))
        .code(PARSE)?;
    let schedule = pattern::compile(&script, config, params);
    for a in &schedule.annotations {
        eprintln!("note: {}", describe(a));
    }
    Ok(schedule)
}

fn strict_failure(schedule: &CompiledSchedule) -> Failure {
    Failure::new(
        STRICT,
        anyhow::anyhow!("{} annotation(s) and --strict given", schedule.annotations.len()),
    )
}

fn schedule_summary(schedule: &CompiledSchedule) -> serde_json::Value {
    json!({
        "duration": schedule.duration,
        "targets": schedule.targets,
        "commands": schedule.command_count(),
        "rejections": schedule.rejection_count(),
        "feasible": schedule.is_feasible(),
        "annotations": schedule.annotations,
    })
}

pub fn compile(ctx: &Context, a: &CompileArgs) -> Result<(), Failure> {
    let params = ctx.params(a.params.as_deref())?;
    let config = ctx.controller(a.controller.as_deref())?;
    let schedule = compile_pattern(&a.pattern, &config, &params)?;
    match &a.out {
        Some(out) => {
            write_json(out, &schedule)?;
            ctx.emit(&schedule_summary(&schedule), || pretty_schedule(&schedule))?;
        }
        None => ctx.emit(&schedule, || pretty_schedule(&schedule))?,
    }
    if a.strict && !schedule.is_feasible() {
        return Err(strict_failure(&schedule));
    }
    Ok(())
}

fn pretty_schedule(schedule: &CompiledSchedule) -> String {
    let mut s = format!(
        "{} command(s) for {} target(s) over {}s, {} annotation(s)\n",
        schedule.command_count(),
        schedule.targets,
        format_seconds(schedule.duration),
        schedule.annotations.len()
    );
    for (e, list) in schedule.commands.iter().enumerate() {
        for c in list {
            s.push_str(&format!(
                "{:>8}s  elem {e}  {}\n",
                format_seconds(c.time),
                c.sensation.as_str()
            ));
        }
    }
    for a in &schedule.annotations {
        s.push_str(&format!("note: {}\n", describe(a)));
    }
    s
}

fn run_error_code(e: &RunError) -> u8 {
    match e {
        RunError::Device(DeviceError::Thermal(t)) => thermal_code(t),
        _ => GENERAL,
    }
}

pub fn run_pattern(ctx: &Context, a: &RunPatternArgs) -> Result<(), Failure> {
    let params = ctx.params(a.params.as_deref())?;
    let config = ctx.controller(a.controller.as_deref())?;
    let sim_config = SimulatedConfig {
        model_dt: ctx.dt(a.dt)?,
        rotation_latency: config.rotation_latency,
        skin_contact: a.skin_contact,
        noise_sigma: a.noise_sigma,
        seed: a.seed.or(ctx.file.seed).unwrap_or(0),
        initial_orientation: config.park_orientation,
    };
    let schedule = compile_pattern(&a.pattern, &config, &params)?;
    let out_dir = a.out.clone().unwrap_or_else(|| ctx.out_dir.clone());
    write_json(&out_dir.join("schedule.json"), &schedule)?;
    if a.strict && !schedule.is_feasible() {
        return Err(strict_failure(&schedule));
    }

    let sim = SimulatedBackend::uniform(params, sim_config).code(CONFIG)?;
    let mut clock = SimClock::default();
    let outcome = match a.backend {
        BackendKind::Sim => play(&schedule, &config, sim, &mut clock),
        BackendKind::Emulator => play(
            &schedule,
            &config,
            FrameBackend::new(DeviceEmulator::new(sim)),
            &mut clock,
        ),
    };
    let (trace, error) = match outcome {
        Ok(t) => (t, None),
        Err(f) => (f.trace, Some(f.error)),
    };

    let mut w = create(&out_dir.join("actions.csv"))?;
    write_actions(&mut w, &trace.actions).code(GENERAL)?;
    w.flush().code(GENERAL)?;
    let mut w = create(&out_dir.join("temps.csv"))?;
    write_temps(&mut w, &trace.temps).code(GENERAL)?;
    w.flush().code(GENERAL)?;

    if let Some(e) = error {
        return Err(Failure::new(
            run_error_code(&e),
            anyhow::Error::new(e).context("pattern run failed"),
        ));
    }

    let mut summary = schedule_summary(&schedule);
    summary["actions"] = json!(trace.actions.len());
    summary["temp_rows"] = json!(trace.temps.len());
    summary["refused"] = json!(trace.rejected.len());
    summary["out_dir"] = json!(out_dir);
    ctx.emit(&summary, || {
        let mut s = pretty_schedule(&schedule);
        s.push_str(&format!(
            "played: {} action(s), {} temperature row(s), {} refused command(s)\ntraces in {}\n",
            trace.actions.len(),
            trace.temps.len(),
            trace.rejected.len(),
            out_dir.display()
        ));
        s
    })
}

fn play<B: DeviceBackend>(
    schedule: &CompiledSchedule,
    config: &ControllerConfig,
    mut backend: B,
    clock: &mut SimClock,
) -> Result<pattern::ExecutionTrace, pattern::RunFailure> {
    pattern::run(schedule, config, &mut backend, clock)
}
