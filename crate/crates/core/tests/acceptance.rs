//! Acceptance suite. Prints one PASS/FAIL line per criterion and a summary.
//! With `ACCEPTANCE_STRICT=1` any failing criterion makes the exit status
//! non-zero.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::Matrix4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use optofeedback::config::RunConfig;
use optofeedback::experiments::{lyapunov_oracle, run_sweep, ResultTable};
use optofeedback::gaussian::{
    coherent_input, fidelity_upper_bound, log_negativity, pt_symplectic_min, steering,
    teleport_fidelity, CovarianceMatrix, Direction, FidelityForm, MetricsRecord,
};
use optofeedback::model::{
    heating_cancellation_gain, is_stable, resolved_sideband_damping, stability_of, FeedbackSpec,
    LinearModel, OpticalMode, SystemParams, STABILITY_TOLERANCE,
};
use optofeedback::spectra::{
    integrate_covariance, integrate_intracavity_covariance, FilterPair, QuadratureConfig,
};

type Verdict = Result<(bool, String), String>;

struct Criterion {
    name: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
}

fn check(name: &'static str, limit: Option<Duration>, f: impl FnOnce() -> Verdict) -> Criterion {
    let start = Instant::now();
    let outcome = f();
    let elapsed = start.elapsed();
    let (mut pass, mut detail) = match outcome {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    if let Some(limit) = limit {
        if elapsed > limit {
            pass = false;
            detail.push_str(&format!(
                "; runtime {:.1} s exceeds {} s",
                elapsed.as_secs_f64(),
                limit.as_secs()
            ));
        }
    }
    Criterion {
        name,
        pass,
        detail,
        elapsed,
    }
}

fn preset(name: &str) -> RunConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../presets")
        .join(name);
    RunConfig::load(&path).unwrap_or_else(|e| panic!("{name}: {e}"))
}

struct Timed {
    table: ResultTable,
    elapsed: Duration,
}

fn sweep_preset(name: &str) -> Timed {
    let spec = preset(name).sweep_spec().unwrap();
    let start = Instant::now();
    let table = run_sweep(&spec).unwrap();
    Timed {
        table,
        elapsed: start.elapsed(),
    }
}

/// (parameter values, metric) over the stable rows.
fn series(
    table: &ResultTable,
    lossless: bool,
    metric: fn(&MetricsRecord) -> f64,
) -> Vec<(Vec<f64>, f64)> {
    table
        .rows
        .iter()
        .filter_map(|r| {
            let m = if lossless {
                r.result.lossless.as_ref()
            } else {
                r.result.metrics.as_ref()
            };
            m.map(|m| (r.params.clone(), metric(m)))
        })
        .collect()
}

fn at_zero_gain(s: &[(Vec<f64>, f64)]) -> Result<f64, String> {
    s.iter()
        .find(|(p, _)| p[0] == 0.0)
        .map(|(_, v)| *v)
        .ok_or_else(|| "no stable row at g_cd = 0".to_string())
}

fn argmax(s: &[(Vec<f64>, f64)]) -> (Vec<f64>, f64) {
    s.iter()
        .cloned()
        .fold((vec![], f64::NEG_INFINITY), |best, x| {
            if x.1 > best.1 {
                x
            } else {
                best
            }
        })
}

/// Gain values where ν < 1/3, and whether they form one contiguous run of
/// the grid.
fn steerable_window(table: &ResultTable, lossless: bool) -> (Vec<f64>, bool) {
    let flags: Vec<(f64, bool)> = table
        .rows
        .iter()
        .map(|r| {
            let m = if lossless {
                r.result.lossless.as_ref()
            } else {
                r.result.metrics.as_ref()
            };
            (r.params[0], m.is_some_and(|m| m.nu < 1.0 / 3.0))
        })
        .collect();
    let inside: Vec<usize> = (0..flags.len()).filter(|&i| flags[i].1).collect();
    let contiguous = inside.windows(2).all(|w| w[1] == w[0] + 1);
    (inside.iter().map(|&i| flags[i].0).collect(), contiguous)
}

fn min_nu(table: &ResultTable, lossless: bool) -> (f64, f64) {
    let s = series(table, lossless, |m| m.nu);
    s.iter()
        .map(|(p, v)| (p[0], *v))
        .fold((f64::NAN, f64::INFINITY), |best, x| {
            if x.1 < best.1 {
                x
            } else {
                best
            }
        })
}

fn vacuum() -> Verdict {
    let mut p = SystemParams::two_mode_reference();
    p.mode_a.coupling = 0.0;
    p.mode_b.coupling = 0.0;
    let model = LinearModel::build(&p, &FeedbackSpec::none()).map_err(|e| e.to_string())?;
    let v = integrate_covariance(
        &model,
        &FilterPair::reference(),
        &QuadratureConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    let dev = (v.covariance.matrix() - Matrix4::identity() * 0.5).amax();
    let m = MetricsRecord::evaluate(&v.covariance, 0.0, FidelityForm::SquareRoot)
        .map_err(|e| e.to_string())?;
    let pass = dev < 1e-6 && m.e_n.abs() < 1e-6 && (m.fidelity - 0.5).abs() < 1e-6;
    Ok((
        pass,
        format!(
            "max|V - I/2| = {dev:.2e}, E_N = {:.2e}, F = {:.9}",
            m.e_n, m.fidelity
        ),
    ))
}

fn lyapunov_draws() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let quad = QuadratureConfig::default();
    let mut worst = 0.0f64;
    let mut draws = 0;
    let mut rejected = 0;
    while draws < 50 {
        let mode = |rng: &mut ChaCha8Rng| {
            OpticalMode::new(
                10f64.powf(rng.random_range(-2.5..0.0)),
                rng.random_range(-2.0..2.0),
                rng.random_range(0.0..0.1),
            )
        };
        let params = SystemParams {
            gamma_m: 10f64.powf(rng.random_range(-5.0..-2.0)),
            n_th: rng.random_range(0.0..1000.0),
            mode_a: mode(&mut rng),
            mode_b: mode(&mut rng),
            mode_c: None,
        };
        let model =
            LinearModel::build(&params, &FeedbackSpec::none()).map_err(|e| e.to_string())?;
        if !is_stable(&model).map_err(|e| e.to_string())?.stable() {
            rejected += 1;
            continue;
        }
        let oracle = lyapunov_oracle(&model).map_err(|e| e.to_string())?;
        let (v, _) = integrate_intracavity_covariance(&model, &quad).map_err(|e| e.to_string())?;
        worst = worst.max((&v - &oracle).norm() / oracle.norm());
        draws += 1;
    }
    Ok((
        worst < 1e-4,
        format!("worst relative Frobenius error {worst:.2e} over 50 stable draws ({rejected} unstable draws rejected)"),
    ))
}

fn tmsv() -> Verdict {
    let mut worst = 0.0f64;
    for s in [0.3, 1.0, 2.0] {
        let v = CovarianceMatrix::two_mode_squeezed(s);
        let e = (-2.0 * s).exp();
        let f = teleport_fidelity(&v, &coherent_input(), FidelityForm::SquareRoot)
            .map_err(|e| e.to_string())?;
        let steer = (2.0 * s).cosh().ln();
        let residuals = [
            pt_symplectic_min(&v).map_err(|e| e.to_string())? - e / 2.0,
            log_negativity(&v).map_err(|e| e.to_string())? - 2.0 * s,
            steering(&v, Direction::AToB).map_err(|e| e.to_string())? - steer,
            steering(&v, Direction::BToA).map_err(|e| e.to_string())? - steer,
            f - 1.0 / (1.0 + e),
            fidelity_upper_bound(2.0 * s) - 1.0 / (1.0 + e),
        ];
        worst = residuals.iter().fold(worst, |m, r| m.max(r.abs()));
    }
    Ok((
        worst < 1e-9,
        format!("worst residual {worst:.2e} for s in {{0.3, 1, 2}}"),
    ))
}

fn feedback_benefit(fig3: &Timed) -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    for (label, lossless) in [("lossless", true), ("with loss", false)] {
        let s = series(&fig3.table, lossless, |m| m.e_n);
        let base = at_zero_gain(&s)?;
        let (p, best) = argmax(&s);
        let gain = best / base - 1.0;
        pass &= gain >= 0.05;
        parts.push(format!(
            "{label}: E_N(0) = {base:.4}, max {best:.4} at g = {:.4} (+{:.1}%)",
            p[0],
            100.0 * gain
        ));
    }
    if fig3.elapsed > Duration::from_secs(300) {
        pass = false;
    }
    parts.push(format!("sweep {:.1} s", fig3.elapsed.as_secs_f64()));
    Ok((pass, parts.join("; ")))
}

fn optimum_location(fig2: &Timed) -> Verdict {
    let s = series(&fig2.table, false, |m| m.e_n);
    let (p, best) = argmax(&s);
    let (g, r) = (p[0], p[1]);
    let pass = (g - 0.047).abs() <= 0.3 * 0.047
        && (r - 0.56).abs() <= 0.3 * 0.56
        && fig2.elapsed.as_secs() < 1800;
    Ok((
        pass,
        format!(
            "48x48 argmax E_N = {best:.4} at (g, r) = ({g:.4}, {r:.4}); target window g in [0.0329, 0.0611], r in [0.392, 0.728]; sweep {:.1} s",
            fig2.elapsed.as_secs_f64()
        ),
    ))
}

fn threshold_crossing(fig3: &Timed) -> Verdict {
    let s = series(&fig3.table, false, |m| m.fidelity);
    let base = at_zero_gain(&s)?;
    let (p, best) = argmax(&s);
    Ok((
        base < 2.0 / 3.0 && best > 2.0 / 3.0,
        format!(
            "with loss: F(0) = {base:.4}, max F = {best:.4} at g = {:.4}",
            p[0]
        ),
    ))
}

fn steering_window(fig3: &Timed) -> Verdict {
    let (window, contiguous) = steerable_window(&fig3.table, false);
    let nu0 = at_zero_gain(&series(&fig3.table, false, |m| m.nu))?;
    let (g_min, nu_min) = min_nu(&fig3.table, false);
    let (lossless_window, _) = steerable_window(&fig3.table, true);
    let pass = !window.is_empty() && contiguous && !window.contains(&0.0) && nu0 >= 1.0 / 3.0;
    let span = match (window.first(), window.last()) {
        (Some(a), Some(b)) => format!("nu < 1/3 on g in [{a:.4}, {b:.4}]"),
        _ => "nu < 1/3 nowhere".into(),
    };
    Ok((
        pass,
        format!(
            "with loss: {span}, min nu = {nu_min:.4} at g = {g_min:.4}, nu(0) = {nu0:.4}; lossless window has {} points",
            lossless_window.len()
        ),
    ))
}

fn bound_dominance(tables: &[(&str, &Timed)]) -> Verdict {
    let mut worst = f64::NEG_INFINITY;
    let mut points = 0;
    for (_, t) in tables {
        for r in &t.table.rows {
            for m in [r.result.metrics.as_ref(), r.result.lossless.as_ref()]
                .into_iter()
                .flatten()
            {
                worst = worst.max(m.fidelity - m.fidelity_bound);
                points += 1;
            }
        }
    }
    let names: Vec<&str> = tables.iter().map(|(n, _)| *n).collect();
    Ok((
        worst <= 1e-9,
        format!(
            "max F - F_bound = {worst:.3e} over {points} evaluated states ({})",
            names.join(", ")
        ),
    ))
}

fn cancellation() -> Verdict {
    let p = SystemParams::two_mode_reference();
    let mut fb = FeedbackSpec::mode_b(0.0, 0.56, 0.92);
    let gc = heating_cancellation_gain(&p, &fb).map_err(|e| e.to_string())?;
    fb.gain = gc;
    let contribution = resolved_sideband_damping(&p, &fb)
        .detected_mode_contribution(fb.scheme)
        .abs();

    let n = 1201;
    let mut best = (0.0, f64::NEG_INFINITY);
    let mut lowest = f64::INFINITY;
    for i in 0..n {
        let g = 0.12 * i as f64 / (n - 1) as f64;
        let model = LinearModel::build(&p, &FeedbackSpec::mode_b(g, 0.56, 0.92))
            .map_err(|e| e.to_string())?;
        let margin = is_stable(&model).map_err(|e| e.to_string())?.margin;
        lowest = lowest.min(margin);
        if margin > best.1 {
            best = (g, margin);
        }
    }
    let offset = (best.0 - gc).abs() / gc;
    Ok((
        contribution < 1e-10 && offset <= 0.1,
        format!(
            "mode-B term at g_c = {gc:.6}: {contribution:.1e}; margin max {:.9} at g = {:.4} ({:.0}% from g_c), margin range over [0, 0.12] is {:.2e}",
            best.1,
            best.0,
            100.0 * offset,
            best.1 - lowest
        ),
    ))
}

fn three_mode(fig5: &Timed) -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    for (label, lossless) in [("lossless", true), ("with loss", false)] {
        let s = series(&fig5.table, lossless, |m| m.e_n);
        let base = at_zero_gain(&s)?;
        let (p, best) = argmax(&s);
        pass &= best > base && p[0] > 0.0;
        parts.push(format!(
            "{label}: E_N(0) = {base:.4}, max {best:.4} at g = {:.4}",
            p[0]
        ));
    }
    let (window, contiguous) = steerable_window(&fig5.table, false);
    let (g_min, nu_min) = min_nu(&fig5.table, false);
    pass &= !window.is_empty() && contiguous && !window.contains(&0.0);
    parts.push(format!(
        "with loss: {} points with nu < 1/3, min nu = {nu_min:.4} at g = {g_min:.4}",
        window.len()
    ));
    Ok((pass, parts.join("; ")))
}

fn routh_hurwitz() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let log_rate = |rng: &mut ChaCha8Rng| 10f64.powf(rng.random_range(-4.0..0.0));
    let mut compared = 0;
    let mut banded = 0;
    let mut disagreements = 0;
    let mut unstable = 0;
    while compared < 1000 {
        let mode = |rng: &mut ChaCha8Rng| {
            OpticalMode::new(log_rate(rng), rng.random_range(-2.0..2.0), log_rate(rng))
        };
        let three = rng.random_bool(0.3);
        let params = SystemParams {
            gamma_m: log_rate(&mut rng),
            n_th: 0.0,
            mode_a: mode(&mut rng),
            mode_b: mode(&mut rng),
            mode_c: three.then(|| mode(&mut rng)),
        };
        let fb = match (three, rng.random_bool(0.5)) {
            (_, false) => FeedbackSpec::none(),
            (false, true) => {
                FeedbackSpec::mode_b(log_rate(&mut rng), rng.random_range(0.0..1.0), 0.92)
            }
            (true, true) => FeedbackSpec::third_mode(log_rate(&mut rng), 0.92),
        };
        let model = LinearModel::build(&params, &fb).map_err(|e| e.to_string())?;
        let report = stability_of(&model.drift, STABILITY_TOLERANCE).map_err(|e| e.to_string())?;
        if report.margin.abs() < 1e-7 {
            banded += 1;
            continue;
        }
        compared += 1;
        if report.margin < 0.0 {
            unstable += 1;
        }
        if report.routh_hurwitz != (report.margin > 0.0) {
            disagreements += 1;
        }
    }
    Ok((
        disagreements == 0,
        format!("{disagreements} disagreements in 1000 draws ({unstable} unstable, {banded} excluded in the 1e-7 band)"),
    ))
}

fn main() -> ExitCode {
    let mut results = Vec::new();
    let mut report = |c: Criterion| {
        println!(
            "{} {:<26} [{:>6.1} s] {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.elapsed.as_secs_f64(),
            c.detail
        );
        results.push((c.name, c.pass));
    };

    report(check("vacuum_limit", Some(Duration::from_secs(1)), vacuum));
    report(check(
        "lyapunov_oracle",
        Some(Duration::from_secs(120)),
        lyapunov_draws,
    ));
    report(check("tmsv_analytics", Some(Duration::from_secs(1)), tmsv));

    let fig3 = sweep_preset("fig3.cfg");
    report(check("feedback_benefit", None, || feedback_benefit(&fig3)));
    let fig2 = sweep_preset("fig2.cfg");
    report(check("optimum_location", None, || optimum_location(&fig2)));
    report(check("threshold_crossing", None, || {
        threshold_crossing(&fig3)
    }));
    report(check("steerability_window", None, || {
        steering_window(&fig3)
    }));
    let fig4 = sweep_preset("fig4.cfg");
    let fig5 = sweep_preset("fig5.cfg");
    report(check("bound_dominance", None, || {
        bound_dominance(&[
            ("fig2", &fig2),
            ("fig3", &fig3),
            ("fig4", &fig4),
            ("fig5", &fig5),
        ])
    }));
    report(check("cancellation_gain", None, cancellation));
    report(check("three_mode_scheme", None, || three_mode(&fig5)));
    report(check("stability_cross_check", None, routh_hurwitz));

    let failed: Vec<&str> = results
        .iter()
        .filter(|(_, p)| !p)
        .map(|(n, _)| *n)
        .collect();
    println!(
        "{}/{} acceptance criteria passed",
        results.len() - failed.len(),
        results.len()
    );
    if failed.is_empty() {
        return ExitCode::SUCCESS;
    }
    println!("failing criteria: {}", failed.join(", "));
    // A failing exit here would stop `cargo test` before the remaining test
    // targets run, so it is opt-in.
    if std::env::var_os("ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
