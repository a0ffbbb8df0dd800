//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::*;
use rand::Rng;
use ternary_core::calibration::{fit_map, mapped_mean_score, QuadraticMap};
use ternary_core::colour::{assign_color, information_gain, LegacyRegion};
use ternary_core::gaussian::{
    gaussian_to_ternary, std_normal_cdf, std_normal_quantile, ternary_to_gaussian, GaussianScaled,
};
use ternary_core::render::{render_forecast_map, render_palette_legend, render_reliability_diagram, RenderConfig};
use ternary_core::verification::{bin_forecasts, decompose, decomposition_diagram_geometry, Decomposition};
use ternary_core::{ForecastObsPair, PaletteParams, ScoringRule, TernaryProb};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn grid(step: u32) -> Vec<TernaryProb> {
    let mut out = Vec::new();
    for i in 0..=step {
        for j in 0..=(step - i) {
            let k = step - i - j;
            out.push(TernaryProb::new(i as f64 / step as f64, j as f64 / step as f64, k as f64 / step as f64).unwrap());
        }
    }
    out
}

fn criterion_1() -> Outcome {
    let mut r = rng(1);
    let mut rules = vec![ScoringRule::brier(), ScoringRule::rps()];
    rules.extend((0..5).map(|_| random_rule(&mut r)));
    let mut worst = 0.0f64;
    for rule in &rules {
        for _ in 0..10_000 {
            let p = random_simplex(&mut r);
            let o = random_simplex(&mut r);
            let err = (rule.score(&p, &o) - rule.to_bary(&p).dist2(&rule.to_bary(&o))).abs();
            worst = worst.max(err);
        }
    }
    ensure(worst <= 1e-12, || format!("max |score - d^2| = {worst:e}"))?;
    Ok(format!("7 rules x 10^4 pairs, max error {worst:.2e}"))
}

fn criterion_2() -> Outcome {
    let b = ScoringRule::brier().sides();
    let r = ScoringRule::rps().sides();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let errs = [b.b - 1.0, b.n - 1.0, b.a - 1.0, r.b - h, r.a - h, r.n - 1.0];
    let worst = errs.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    ensure(worst <= 1e-12, || format!("side error {worst:e}"))?;
    Ok(format!(
        "Brier (1,1,1), RPS (1/sqrt2, 1/sqrt2, 1), max error {worst:.2e}"
    ))
}

fn criterion_3() -> Outcome {
    let mut r = rng(3);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let rule = match k % 3 {
            0 => ScoringRule::brier(),
            1 => ScoringRule::rps(),
            _ => random_rule(&mut r),
        };
        let n = r.gen_range(20..600);
        let pairs = synthetic_pairs(&mut r, n);
        let d = decompose(&rule, &bin_forecasts(&pairs, 11).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        worst = worst.max(d.identity_residual().abs());
    }
    ensure(worst <= 1e-10, || format!("max |S - (U - Z + R)| = {worst:e}"))?;
    Ok(format!("100 datasets, max residual {worst:.2e}"))
}

fn criterion_4() -> Outcome {
    let g = decomposition_diagram_geometry(&Decomposition::from_roots(0.577, 0.185, 0.159).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    ensure((g.sqrt_u_minus_z - 0.547).abs() <= 5e-4, || {
        format!("sqrt(U-Z) = {}", g.sqrt_u_minus_z)
    })?;
    ensure((g.sqrt_s - 0.569).abs() <= 5e-4, || format!("sqrt S = {}", g.sqrt_s))?;
    let g2 =
        decomposition_diagram_geometry(&Decomposition::from_roots(0.577, 0.185, 0.092).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    ensure((g2.sqrt_s - 0.554).abs() <= 5e-4, || {
        format!("recalibrated sqrt S = {}", g2.sqrt_s)
    })?;
    Ok(format!(
        "sqrt(U-Z) = {:.4}, sqrt S = {:.4}, recalibrated sqrt S = {:.4}",
        g.sqrt_u_minus_z, g.sqrt_s, g2.sqrt_s
    ))
}

fn direct_uncertainty(l: [[f64; 3]; 3], q: [f64; 3]) -> f64 {
    let mut g = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            g[i][j] = (0..3).map(|k| l[k][i] * l[k][j]).sum();
        }
    }
    let lin: f64 = (0..3).map(|i| g[i][i] * q[i]).sum();
    let quad: f64 = (0..3).map(|i| (0..3).map(|j| q[i] * g[i][j] * q[j]).sum::<f64>()).sum();
    lin - quad
}

fn criterion_5() -> Outcome {
    let brier = ScoringRule::brier();
    let rps = ScoringRule::rps();
    let sqrt_u = brier.uncertainty(&TernaryProb::uniform()).sqrt();
    ensure((sqrt_u - 0.577_350_269_189_625_8).abs() <= 1e-9, || {
        format!("sqrt U = {sqrt_u}")
    })?;
    let mut closed = 0.0f64;
    let mut identity = 0.0f64;
    for q in grid(100) {
        let [b, _, a] = q.as_array();
        let qq: f64 = q.as_array().iter().map(|x| x * x).sum();
        closed = closed.max((direct_uncertainty(brier.l(), q.as_array()) - 0.5 * (1.0 - qq)).abs());
        closed = closed.max((direct_uncertainty(rps.l(), q.as_array()) - 0.5 * (b * (1.0 - b) + a * (1.0 - a))).abs());
        closed = closed.max((brier.uncertainty(&q) - 0.5 * (1.0 - qq)).abs());
        closed = closed.max((rps.uncertainty(&q) - 0.5 * (b * (1.0 - b) + a * (1.0 - a))).abs());
        for rule in [&brier, &rps] {
            identity =
                identity.max((rule.uncertainty(&q) - (rule.max_uncertainty() - rule.uncertainty_reduction(&q))).abs());
        }
    }
    ensure(closed <= 1e-12, || format!("closed-form mismatch {closed:e}"))?;
    ensure(identity <= 1e-12, || format!("U0 - dU mismatch {identity:e}"))?;
    Ok(format!(
        "sqrt U = {sqrt_u:.9}, closed forms {closed:.2e}, U0 - dU {identity:.2e}"
    ))
}

fn criterion_6() -> Outcome {
    let u = TernaryProb::uniform();
    for q in [u, tp(0.25, 0.5, 0.25), tp(0.1, 0.2, 0.7)] {
        let e = information_gain(&q, &q).map_err(|e| e.to_string())?;
        ensure(e == 0.0, || format!("E(q;q) = {e:e} for {q}"))?;
    }
    for c in [tp(1.0, 0.0, 0.0), tp(0.0, 1.0, 0.0), tp(0.0, 0.0, 1.0)] {
        let e = information_gain(&c, &u).map_err(|e| e.to_string())?;
        ensure(e == 1.0, || format!("E(corner;uniform) = {e}"))?;
    }
    for q in [u, tp(0.25, 0.5, 0.25), tp(0.1, 0.2, 0.7)] {
        for p in grid(100) {
            let e = information_gain(&p, &q).map_err(|e| e.to_string())?;
            ensure((0.0..=1.0).contains(&e), || format!("E({p};{q}) = {e}"))?;
        }
    }
    Ok("E(q;q) = 0, E(corner;uniform) = 1, range [0,1] on grid".into())
}

fn criterion_7() -> Outcome {
    let mut worst = 0.0f64;
    for q in [TernaryProb::uniform(), tp(0.25, 0.5, 0.25)] {
        for i in 0..=24 {
            let mu = -3.0 + 0.25 * i as f64;
            for sigma in [0.2, 0.5, 1.0, 2.0, 5.0] {
                let g = GaussianScaled::new(mu, sigma).map_err(|e| e.to_string())?;
                let p = gaussian_to_ternary(&g, &q).map_err(|e| e.to_string())?;
                let back = ternary_to_gaussian(&p, &q).map_err(|e| format!("mu={mu} sigma={sigma}: {e}"))?;
                worst = worst
                    .max((back.mu_hat() - mu).abs())
                    .max((back.sigma_hat() - sigma).abs());
            }
        }
    }
    ensure(worst <= 1e-7, || format!("roundtrip error {worst:e}"))?;
    let mut consistency = 0.0f64;
    for i in 1..2000 {
        let u = i as f64 / 2000.0;
        let z = std_normal_quantile(u).map_err(|e| e.to_string())?;
        consistency = consistency.max((std_normal_cdf(z) - u).abs());
    }
    for i in 0..=1000 {
        let z = -5.0 + 0.01 * i as f64;
        let back = std_normal_quantile(std_normal_cdf(z)).map_err(|e| e.to_string())?;
        consistency = consistency.max((back - z).abs());
    }
    ensure(consistency <= 1e-9, || {
        format!("cdf/quantile consistency {consistency:e}")
    })?;
    Ok(format!("roundtrip {worst:.2e}, cdf/quantile {consistency:.2e}"))
}

fn criterion_8() -> Outcome {
    let mut r = rng(8);
    let mut worst_gap = 0.0f64;
    let mut datasets: Vec<Vec<ForecastObsPair>> = vec![
        synthetic_pairs(&mut r, 60),
        synthetic_pairs(&mut r, 200),
        overconfident_pairs(&mut r, 150),
    ];
    for rule in [ScoringRule::brier(), ScoringRule::rps()] {
        for pairs in &datasets {
            let fitted = fit_map(pairs, &rule).map_err(|e| e.to_string())?;
            let s_fit = mapped_mean_score(&fitted, pairs, &rule).map_err(|e| e.to_string())?;
            let s_id = mapped_mean_score(&QuadraticMap::identity(), pairs, &rule).map_err(|e| e.to_string())?;
            ensure(s_fit <= s_id, || format!("fitted {s_fit} above identity {s_id}"))?;
            let s_nm = nelder_mead_best(pairs, &rule, 20);
            worst_gap = worst_gap.max((s_fit - s_nm).abs());
            ensure((s_fit - s_nm).abs() <= 1e-6, || {
                format!("least squares {s_fit} vs simplex search {s_nm}")
            })?;
        }
    }
    datasets.clear();
    let pairs = overconfident_pairs(&mut r, 2000);
    let rule = ScoringRule::brier();
    let fitted = fit_map(&pairs, &rule).map_err(|e| e.to_string())?;
    let before = mapped_mean_score(&QuadraticMap::identity(), &pairs, &rule).map_err(|e| e.to_string())?;
    let after = mapped_mean_score(&fitted, &pairs, &rule).map_err(|e| e.to_string())?;
    ensure(after < before, || {
        format!("overconfident set: {after} not below {before}")
    })?;
    Ok(format!(
        "optimiser gap {worst_gap:.2e}; overconfident Brier {before:.5} -> {after:.5}"
    ))
}

fn criterion_9() -> Outcome {
    let mut gap = Vec::new();
    for p in grid(100) {
        let labels = LegacyRegion::matches(&p);
        ensure(labels.len() <= 1, || format!("{p} has labels {labels:?}"))?;
        if labels.is_empty() {
            gap.push(p);
        }
    }
    ensure(!gap.is_empty(), || "gap region is empty".into())?;
    let on_base = gap.iter().filter(|p| p.near() == 0.0).count();
    let mean_near = gap.iter().map(|p| p.near()).sum::<f64>() / gap.len() as f64;
    ensure(on_base > 0, || "gap does not touch the base".into())?;
    ensure(mean_near < 1.0 / 3.0, || {
        format!("gap mean near-normal probability {mean_near}")
    })?;
    Ok(format!(
        "{} gap points, {on_base} on the base, mean pN {mean_near:.3}",
        gap.len()
    ))
}

fn criterion_10() -> Outcome {
    let params = PaletteParams::default();
    let legend = render_palette_legend(&TernaryProb::uniform(), &params, 240.0, 24).map_err(|e| e.to_string())?;

    let (forecasts, history) = frozen_map_data();
    let config = RenderConfig {
        show_skill_circles: true,
        ..RenderConfig::default()
    };
    let map =
        render_forecast_map(&forecasts, Some(&history), &ScoringRule::brier(), &config).map_err(|e| e.to_string())?;

    let pairs = frozen_reliability_pairs();
    let rule = ScoringRule::brier();
    let binned = bin_forecasts(&pairs, 11).map_err(|e| e.to_string())?;
    let d = decompose(&rule, &binned).map_err(|e| e.to_string())?;
    let reliability =
        render_reliability_diagram(&binned, &d, &rule, &RenderConfig::default()).map_err(|e| e.to_string())?;

    for (name, bytes) in [
        ("legend.svg", &legend),
        ("map_skill_circles.svg", &map),
        ("reliability.svg", &reliability),
    ] {
        check_svg(bytes).map_err(|e| format!("{name}: {e}"))?;
        check_golden(name, bytes)?;
    }
    let expected = binned.bins.iter().filter(|b| b.count >= 10).count();
    let drawn = dipole_count(&reliability);
    ensure(drawn == expected, || {
        format!("{drawn} dipoles drawn, {expected} bins reach the threshold")
    })?;
    ensure(binned.bins.iter().any(|b| b.count < 10), || {
        "no bin below threshold in frozen data".into()
    })?;
    Ok(format!(
        "3 golden files match, {drawn} of {} bins drawn as dipoles",
        binned.bins.len()
    ))
}

fn criterion_11() -> Outcome {
    let q = TernaryProb::uniform();
    let params = PaletteParams::default();
    let mut colours = Vec::new();
    for p in grid(100) {
        if p == q {
            continue;
        }
        let c = assign_color(&p, &q, &params).map_err(|e| e.to_string())?;
        colours.push((c.hue, c.saturation, p));
    }
    let circular = |a: f64, b: f64| {
        let d = (a - b).abs();
        d.min(1.0 - d)
    };
    let mut collisions = 0usize;
    let mut example = None;
    for (i, &(hi, si, pi)) in colours.iter().enumerate() {
        for &(hj, sj, pj) in &colours[i + 1..] {
            if circular(hi, hj) <= 1e-6 && (si - sj).abs() <= 1e-6 {
                collisions += 1;
                example.get_or_insert((pi, pj));
            }
        }
    }
    ensure(collisions == 0, || {
        let (a, b) = example.unwrap();
        format!("{collisions} colliding pairs, e.g. {a} and {b}")
    })?;
    Ok(format!(
        "{} grid forecasts, all (hue, saturation) distinct",
        colours.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("score equals squared barycentric distance", criterion_1),
        ("triangle side lengths", criterion_2),
        ("decomposition identity", criterion_3),
        ("root-score consistency", criterion_4),
        ("uncertainty closed forms", criterion_5),
        ("information gain bounds", criterion_6),
        ("gaussian roundtrip", criterion_7),
        ("recalibration optimality", criterion_8),
        ("legacy palette regions", criterion_9),
        ("rendering goldens and dipoles", criterion_10),
        ("colour identifiability", criterion_11),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        match check() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{:.2}s]", i + 1, t.elapsed().as_secs_f64()),
            Err(reason) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {reason} [{:.2}s]", i + 1, t.elapsed().as_secs_f64());
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        criteria.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
