//! Acceptance criteria, run as one test that prints a PASS/FAIL line per
//! criterion and fails if any criterion fails.

use std::io::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use annsel::data::{
    column_moments, split, synth_dataset, Dataset, Normalizer, SplitFractions, INPUT_NAMES, OUTPUT_NAMES,
    REFERENCE_MEANS, REFERENCE_STDS,
};
use annsel::network::{Activation, Architecture, Network};
use annsel::numerics::{box_stats, derive_seed, quantile, seeded_rng, DenseMatrix};
use annsel::selection::{
    compare_modes, evaluate_fit, r_squared, sweep_with_workers, CellId, ComparisonTemplate, NeuronRange, SweepMode,
    SweepReport, SweepSpec, BOX_CSV_HEADER, SURFACE_CSV_HEADER,
};
use annsel::training::{
    evaluate_mse, jacobian, train, SampleSet, StopReason, TrainConfig, TrainingRecord, MU_FLOOR,
};
use rand::Rng;

/// The frozen desk-scale dataset: 200 synthetic rows from this seed.
const FROZEN_SEED: u64 = 7;
const FROZEN_ROWS: usize = 200;
const SWEEP_SEED: u64 = 2024;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> DenseMatrix<f64> {
    let entries = (0..rows * cols).map(|_| rng.gen_range(lo..hi)).collect();
    DenseMatrix::from_row_major(rows, cols, entries).unwrap()
}

fn random_activation(rng: &mut impl Rng) -> Activation {
    [Activation::Tansig, Activation::Logsig, Activation::Purelin][rng.gen_range(0..3)]
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = seeded_rng(101);
    let mut checked = 0usize;
    let mut worst = 0.0f64;
    let mut nets = 0;
    while nets < 50 {
        let input_dim = rng.gen_range(1..=6);
        let depth = rng.gen_range(1..=2);
        let hidden: Vec<(usize, Activation)> = (0..depth)
            .map(|_| (rng.gen_range(1..=10), random_activation(&mut rng)))
            .collect();
        let output_dim = rng.gen_range(1..=3);
        let arch = Architecture::new(input_dim, &hidden, output_dim).unwrap();
        if arch.param_count() > 200 {
            continue;
        }
        nets += 1;
        let n = rng.gen_range(1..=16);
        let mut net = Network::<f64>::init_weights(&arch, rng.gen()).unwrap();
        // Spread the weights beyond the initial range to reach curved regions.
        let spread: Vec<f64> = net.flatten().0.iter().map(|w| 3.0 * w).collect();
        net = Network::unflatten(&arch, &annsel::network::ParamVector(spread)).unwrap();
        let x = random_matrix(&mut rng, n, input_dim, -1.0, 1.0);
        let jac = jacobian(&net, &x).unwrap();
        let params = net.flatten();
        let h = 1e-6;
        for p in 0..params.len() {
            let mut plus = params.clone();
            let mut minus = params.clone();
            plus.0[p] += h;
            minus.0[p] -= h;
            let yp = Network::unflatten(&arch, &plus).unwrap().predict(&x).unwrap();
            let ym = Network::unflatten(&arch, &minus).unwrap().predict(&x).unwrap();
            for r in 0..jac.rows() {
                let fd = (yp.entries()[r] - ym.entries()[r]) / (2.0 * h);
                let got = jac[(r, p)];
                let gap = (got - fd).abs();
                let tol = 1e-6f64.max(1e-4 * fd.abs());
                check(gap <= tol, || format!("net {nets} entry ({r},{p}): {got} vs {fd}"))?;
                worst = worst.max(gap / tol);
                checked += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!("{checked} entries over 50 networks, worst gap {worst:.3} of tolerance, {elapsed:.2?}"))
}

fn criterion_2() -> Outcome {
    let mut rng = seeded_rng(202);
    let (d, m) = (3, 2);
    let a = random_matrix(&mut rng, m, d, -2.0, 2.0);
    let b: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let samples = |rng: &mut rand_chacha::ChaCha8Rng| {
        let x = random_matrix(rng, 20, d, -1.0, 1.0);
        let mut y = DenseMatrix::zeros(20, m);
        for k in 0..20 {
            let ax = a.mul_vec(x.row(k)).unwrap();
            for o in 0..m {
                y[(k, o)] = ax[o] + b[o];
            }
        }
        SampleSet::new(x, y).unwrap()
    };
    let train_set = samples(&mut rng);
    let val_set = samples(&mut rng);
    let arch = Architecture::linear(d, m).unwrap();
    let net = Network::<f64>::init_weights(&arch, 5).unwrap();
    let cfg = TrainConfig {
        goal_mse: 1e-10,
        max_epochs: 20,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let (fitted, rec) = train(&net, &train_set, &val_set, &cfg).unwrap();
    let elapsed = start.elapsed();
    let mse = evaluate_mse(&fitted, &train_set).unwrap();
    check(mse <= 1e-10, || format!("train MSE {mse:e} after {} epochs", rec.epochs.len()))?;
    check(rec.epochs.len() <= 20, || format!("{} epochs", rec.epochs.len()))?;
    check(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("train MSE {mse:.2e} after {} epoch(s), {elapsed:.2?}", rec.epochs.len()))
}

/// Accepted, rejected, and accepted-at-the-floor step counts.
fn check_schedule(rec: &TrainingRecord<f64>) -> Result<(usize, usize, usize), String> {
    let (mut acc, mut rej, mut pinned) = (0, 0, 0);
    for s in &rec.steps {
        if s.accepted {
            acc += 1;
            // μ is bounded below; at the bound an accepted step leaves it there.
            let at_floor = s.mu_before == MU_FLOOR && s.mu_after == MU_FLOOR;
            pinned += usize::from(at_floor);
            check(s.mu_after < s.mu_before || at_floor, || {
                format!("accepted step kept mu at {:e}", s.mu_before)
            })?;
        } else {
            rej += 1;
            check(s.mu_after > s.mu_before, || format!("rejected step lowered mu from {:e}", s.mu_before))?;
        }
    }
    let mut prev = rec.initial_train_mse;
    for e in &rec.epochs {
        check(e.train_mse < prev, || format!("epoch {} train MSE {} not below {}", e.epoch, e.train_mse, prev))?;
        prev = e.train_mse;
    }
    check(acc == rec.epochs.len(), || "accepted steps and epochs disagree".into())?;
    Ok((acc, rej, pinned))
}

fn criterion_3() -> Outcome {
    let data = synth_dataset(120, 33).unwrap();
    let norm = Normalizer::fit(&data).unwrap().normalize(&data).unwrap();
    let mut rng = seeded_rng(303);
    let (mut acc, mut rej, mut pinned, mut records) = (0, 0, 0, 0);
    for _ in 0..30 {
        let depth = rng.gen_range(1..=2);
        let hidden: Vec<(usize, Activation)> = (0..depth)
            .map(|_| (rng.gen_range(1..=12), Activation::HIDDEN_CHOICES[rng.gen_range(0..2)]))
            .collect();
        let arch = Architecture::new(9, &hidden, 3).unwrap();
        let seed: u64 = rng.gen();
        let parts = split(norm.len(), SplitFractions::default(), seed).unwrap();
        let net = Network::init_weights(&arch, seed).unwrap();
        let cfg = TrainConfig {
            goal_mse: 0.0,
            max_epochs: 200,
            ..TrainConfig::default()
        };
        let (_, rec) = train(&net, &norm.sample_set(&parts.train), &norm.sample_set(&parts.validation), &cfg).unwrap();
        let (a, r, p) = check_schedule(&rec)?;
        acc += a;
        rej += r;
        pinned += p;
        records += 1;
    }
    check(rej > 0, || "no rejected step was exercised".into())?;
    Ok(format!(
        "{records} records, {acc} accepted ({pinned} at the mu floor) and {rej} rejected steps"
    ))
}

fn criterion_4() -> Outcome {
    let xs: Vec<[f64; 1]> = (0..40).map(|k| [k as f64 / 39.0]).collect();
    let inputs = DenseMatrix::from_rows(&xs).unwrap();
    let targets = |sign: f64| {
        let ys: Vec<[f64; 1]> = xs.iter().map(|x| [sign * (5.0 * x[0]).sin() + 0.3 * x[0]]).collect();
        DenseMatrix::from_rows(&ys).unwrap()
    };
    let tr = SampleSet::new(inputs.clone(), targets(1.0)).unwrap();
    let va = SampleSet::new(inputs, targets(-1.0)).unwrap();
    let arch = Architecture::new(1, &[(8, Activation::Tansig)], 1).unwrap();
    let net = Network::<f64>::init_weights(&arch, 44).unwrap();
    let cfg = TrainConfig {
        goal_mse: 0.0,
        ..TrainConfig::default()
    };
    let (out, rec) = train(&net, &tr, &va, &cfg).unwrap();
    check(rec.stop_reason == StopReason::ValidationStall, || format!("stopped with {:?}", rec.stop_reason))?;
    let got = evaluate_mse(&out, &va).unwrap();
    let best = rec.best_validation_mse().unwrap();
    check(got.to_bits() == best.to_bits(), || format!("returned {got} but record minimum is {best}"))?;
    Ok(format!(
        "validation_stall after {} epochs, best epoch {}, validation MSE {got:.6}",
        rec.epochs.len(),
        rec.best_epoch
    ))
}

fn criterion_5() -> Outcome {
    let s = split(67, SplitFractions::default(), 0).unwrap();
    check(s.sizes() == (47, 10, 10), || format!("n = 67 gives {:?}", s.sizes()))?;
    let mut checked = 0;
    for n in 7..=500 {
        for seed in 0..100u64 {
            let s = split(n, SplitFractions::default(), derive_seed(n as u64, seed)).unwrap();
            let mut seen = vec![false; n];
            for &i in s.train.iter().chain(&s.validation).chain(&s.test) {
                check(i < n && !seen[i], || format!("n = {n}, seed {seed}: index {i} repeated"))?;
                seen[i] = true;
            }
            check(seen.iter().all(|&b| b), || format!("n = {n}, seed {seed}: not exhaustive"))?;
            let (_, v, t) = s.sizes();
            check(v == t || v == t + 1, || format!("n = {n}: validation {v}, test {t}"))?;
            checked += 1;
        }
    }
    Ok(format!("n = 67 -> (47, 10, 10); {checked} splits disjoint and exhaustive"))
}

fn criterion_6() -> Outcome {
    let mut rng = seeded_rng(606);
    let mut datasets: Vec<Dataset> = (0..10).map(|s| synth_dataset(50 + 10 * s, s as u64).unwrap()).collect();
    for _ in 0..40 {
        let n = rng.gen_range(1..60);
        let scale = 10f64.powf(rng.gen_range(-3.0..4.0));
        let x = random_matrix(&mut rng, n, 9, 0.0, scale);
        let y = random_matrix(&mut rng, n, 3, 0.0, scale);
        if let Ok(d) = Dataset::new(x, y, OUTPUT_NAMES.iter().map(|s| s.to_string()).collect()) {
            datasets.push(d);
        }
    }
    let mut values = 0usize;
    let mut worst = 0.0f64;
    for d in &datasets {
        let nm = Normalizer::fit(d).unwrap();
        let z = nm.normalize(d).unwrap();
        for v in z.inputs().entries().iter().chain(z.outputs().entries()) {
            check((0.0..=1.0).contains(v), || format!("normalized value {v}"))?;
            values += 1;
        }
        let back = nm.denormalize(&z).unwrap();
        let pairs = back
            .inputs()
            .entries()
            .iter()
            .zip(d.inputs().entries())
            .chain(back.outputs().entries().iter().zip(d.outputs().entries()));
        for (b, o) in pairs {
            let rel = if *o == 0.0 { b.abs() } else { ((b - o) / o).abs() };
            check(rel <= 1e-12, || format!("round trip {o} -> {b}"))?;
            worst = worst.max(rel);
        }
    }
    Ok(format!(
        "{values} values in [0, 1] over {} datasets; worst round-trip error {worst:.1e}",
        datasets.len()
    ))
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let d = synth_dataset(FROZEN_ROWS, FROZEN_SEED).unwrap();
    let m = column_moments(&d).unwrap();
    let elapsed = start.elapsed();
    let mut misses = Vec::new();
    let mut worst_mean = 0.0f64;
    let mut worst_std = 0.0f64;
    for c in 0..REFERENCE_MEANS.len() {
        let name = &m.names[c];
        let mean_err = ((m.means[c] - REFERENCE_MEANS[c]) / REFERENCE_MEANS[c]).abs();
        let std_err = ((m.stds[c] - REFERENCE_STDS[c]) / REFERENCE_STDS[c]).abs();
        let std_tol = if name == "S" || name == "N" { 0.25 } else { 0.10 };
        worst_mean = worst_mean.max(mean_err);
        worst_std = worst_std.max(std_err);
        if mean_err > 0.10 {
            misses.push(format!("{name} mean {:.4} vs {} ({:.1}%)", m.means[c], REFERENCE_MEANS[c], 100.0 * mean_err));
        }
        if std_err > std_tol {
            misses.push(format!("{name} std {:.4} vs {} ({:.1}%)", m.stds[c], REFERENCE_STDS[c], 100.0 * std_err));
        }
    }
    if elapsed >= Duration::from_secs(1) {
        misses.push(format!("took {elapsed:?}"));
    }
    check(misses.is_empty(), || misses.join("; "))?;
    Ok(format!(
        "worst mean error {:.2}%, worst std error {:.2}%, {elapsed:.2?}",
        100.0 * worst_mean,
        100.0 * worst_std
    ))
}

fn desk_spec() -> SweepSpec {
    let mut spec = SweepSpec::new(SweepMode::Mimo, 1);
    spec.neuron_range_1 = NeuronRange::new(1, 12);
    spec.runs_per_cell = 10;
    spec
}

fn frozen() -> Dataset {
    synth_dataset(FROZEN_ROWS, FROZEN_SEED).unwrap()
}

/// The desk-scale sweep on four workers, shared by criteria 8 and 9.
fn desk_sweep() -> &'static (SweepReport, Duration) {
    static REPORT: OnceLock<(SweepReport, Duration)> = OnceLock::new();
    REPORT.get_or_init(|| {
        let start = Instant::now();
        let report = sweep_with_workers(&desk_spec(), &frozen(), SWEEP_SEED, 4).unwrap();
        (report, start.elapsed())
    })
}

fn criterion_8() -> Outcome {
    let (report, elapsed) = desk_sweep();
    check(report.cells.len() == 24, || format!("{} cells", report.cells.len()))?;
    let cell = report.selected_cell().ok_or("no cell selected")?;
    let data = frozen();
    let net = report.selected_network().map_err(|e| e.to_string())?.unwrap();
    let parts = report.selected_split(data.len()).map_err(|e| e.to_string())?.unwrap();
    let fit = evaluate_fit(&net, &parts, &data, &report.normalizer).map_err(|e| e.to_string())?;
    let r2 = fit.split("test").and_then(|s| s.pooled_r_squared).ok_or("test R² undefined")?;
    check(r2 >= 0.90, || format!("selected {} has test pooled R² {r2:.4}", cell.cell.describe(&report.spec.mode)))?;
    check(*elapsed < Duration::from_secs(600), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "selected {} (median validation MSE {:.3e}), test pooled R² {:.4}, {elapsed:.1?}",
        cell.cell.describe(&report.spec.mode),
        cell.median_mse,
        r2
    ))
}

fn without_timing(report: &SweepReport) -> String {
    let mut r = report.clone();
    r.wall_time_secs = 0.0;
    r.to_json()
}

fn criterion_9() -> Outcome {
    let (four, _) = desk_sweep();
    let one = sweep_with_workers(&desk_spec(), &frozen(), SWEEP_SEED, 1).map_err(|e| e.to_string())?;
    let (a, b) = (without_timing(&one), without_timing(four));
    check(a == b, || "1-worker and 4-worker reports differ".into())?;
    Ok(format!("1-worker and 4-worker reports identical ({} bytes)", a.len()))
}

fn oracle_quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos - pos.floor());
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}

fn oracle_pearson_sq(p: &[f64], o: &[f64]) -> f64 {
    let n = p.len() as f64;
    let mp = p.iter().sum::<f64>() / n;
    let mo = o.iter().sum::<f64>() / n;
    let cov: f64 = p.iter().zip(o).map(|(a, b)| (a - mp) * (b - mo)).sum();
    let vp: f64 = p.iter().map(|a| (a - mp).powi(2)).sum();
    let vo: f64 = o.iter().map(|b| (b - mo).powi(2)).sum();
    let r = cov / (vp.sqrt() * vo.sqrt());
    r * r
}

fn criterion_10() -> Outcome {
    let mut rng = seeded_rng(1010);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()));
    for k in 0..1000 {
        let n = rng.gen_range(1..80);
        let data: Vec<f64> = if k % 3 == 0 {
            (0..n).map(|_| rng.gen_range(0..6) as f64).collect()
        } else {
            (0..n).map(|_| rng.gen_range(-1.0..1.0) * 10f64.powi(rng.gen_range(-2..3))).collect()
        };
        let mut sorted = data.clone();
        sorted.sort_by(f64::total_cmp);
        for q in [0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0, rng.gen()] {
            let got = quantile(&data, q).unwrap();
            let want = oracle_quantile(&sorted, q);
            check(close(got, want), || format!("sequence {k}: quantile({q}) {got} vs {want}"))?;
        }
        let b = box_stats(&data).unwrap();
        let (q1, med, q3) = (oracle_quantile(&sorted, 0.25), oracle_quantile(&sorted, 0.5), oracle_quantile(&sorted, 0.75));
        let (lo, hi) = (q1 - 1.5 * (q3 - q1), q3 + 1.5 * (q3 - q1));
        let inside: Vec<f64> = sorted.iter().copied().filter(|x| *x >= lo && *x <= hi).collect();
        let wl = inside.first().map_or(q1, |w| w.min(q1));
        let wh = inside.last().map_or(q3, |w| w.max(q3));
        let outliers: Vec<f64> = sorted.iter().copied().filter(|x| *x < lo || *x > hi).collect();
        let ok = close(b.q1, q1)
            && close(b.median, med)
            && close(b.q3, q3)
            && b.minimum == sorted[0]
            && b.maximum == sorted[n - 1]
            && close(b.whisker_low, wl)
            && close(b.whisker_high, wh)
            && b.outliers == outliers;
        check(ok, || format!("sequence {k}: box {b:?} disagrees with oracle"))?;

        if n >= 2 {
            let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let o: Vec<f64> = p.iter().map(|v| 0.7 * v + rng.gen_range(-3.0..3.0)).collect();
            let r = r_squared(&p, &o).map_err(|e| e.to_string())?;
            let want = oracle_pearson_sq(&p, &o);
            check((r - want).abs() <= 1e-12, || format!("sequence {k}: R² {r} vs {want}"))?;
            let (a, c) = (rng.gen_range(0.01..100.0), rng.gen_range(-50.0..50.0));
            let moved: Vec<f64> = p.iter().map(|v| a * v + c).collect();
            let r2 = r_squared(&moved, &o).map_err(|e| e.to_string())?;
            check((r2 - r).abs() <= 1e-12, || format!("sequence {k}: affine map changed R² {r} -> {r2}"))?;
        }
    }
    Ok("1000 sequences: quantiles, box stats and R² match the oracles".into())
}

fn check_number(field: &str, what: &str) -> Result<(), String> {
    field.parse::<f64>().map(|_| ()).map_err(|_| format!("{what}: {field:?} is not a number"))
}

fn criterion_11() -> Outcome {
    let (report, _) = desk_sweep();
    let mut buf = Vec::new();
    report.write_box_csv(&mut buf).map_err(|e| e.to_string())?;
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    check(lines.next() == Some(BOX_CSV_HEADER.join(",").as_str()), || "box header".into())?;
    check(
        BOX_CSV_HEADER.join(",") == "neurons,activation,min,whisker_low,q1,median,q3,whisker_high,max,outliers",
        || "box schema".into(),
    )?;
    let mut rows = 0;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        check(f.len() == 10, || format!("box row {line:?}"))?;
        check(f[0].parse::<usize>().is_ok(), || format!("neurons {:?}", f[0]))?;
        check(["tansig", "logsig"].contains(&f[1]), || format!("activation {:?}", f[1]))?;
        for v in &f[2..9] {
            check_number(v, "box statistic")?;
        }
        for v in f[9].split(';').filter(|s| !s.is_empty()) {
            check_number(v, "outlier")?;
        }
        rows += 1;
    }
    check(rows == report.cells.len(), || format!("{rows} box rows"))?;

    let data = synth_dataset(60, 11).unwrap();
    let mut spec = SweepSpec::new(SweepMode::Mimo, 2);
    spec.neuron_range_1 = NeuronRange::new(1, 3);
    spec.neuron_range_2 = Some(NeuronRange::new(1, 2));
    spec.runs_per_cell = 2;
    let r2 = sweep_with_workers(&spec, &data, 5, 0).map_err(|e| e.to_string())?;
    let mut buf = Vec::new();
    r2.write_surface_csv(&mut buf).map_err(|e| e.to_string())?;
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    check(lines.next() == Some("n1,n2,activation_combo,min_mse,median_mse"), || "surface header".into())?;
    check(SURFACE_CSV_HEADER.join(",") == "n1,n2,activation_combo,min_mse,median_mse", || "surface schema".into())?;
    let combos = ["tansig/tansig", "tansig/logsig", "logsig/tansig", "logsig/logsig"];
    let mut rows = 0;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        check(f.len() == 5, || format!("surface row {line:?}"))?;
        check(f[0].parse::<usize>().is_ok() && f[1].parse::<usize>().is_ok(), || format!("counts in {line:?}"))?;
        check(combos.contains(&f[2]), || format!("combo {:?}", f[2]))?;
        check_number(f[3], "min_mse")?;
        check_number(f[4], "median_mse")?;
        rows += 1;
    }
    check(rows == 3 * 2 * 4, || format!("{rows} surface rows"))?;

    let cell = CellId {
        index: 0,
        neurons: vec![30],
        activations: vec![Activation::Logsig],
    };
    check(cell.describe(&SweepMode::Miso("LHV".into())) == "30/logsig/LHV", || "single-layer format".into())?;
    let cell = CellId {
        index: 0,
        neurons: vec![8, 15],
        activations: vec![Activation::Tansig, Activation::Logsig],
    };
    check(cell.describe(&SweepMode::Mimo) == "8/tansig/15/logsig/MIMO", || "double-layer format".into())?;

    let mut template = ComparisonTemplate::default();
    template.depth1.neuron_range_1 = NeuronRange::new(1, 2);
    template.depth2.neuron_range_1 = NeuronRange::new(1, 2);
    template.depth2.neuron_range_2 = Some(NeuronRange::new(1, 1));
    template.depth1.runs_per_cell = 1;
    template.depth2.runs_per_cell = 1;
    let (record, _) = compare_modes(&data, &template, 9, 0).map_err(|e| e.to_string())?;
    check(record.rows.len() == 8, || format!("{} comparison rows", record.rows.len()))?;
    let table = record.render();
    for row in &record.rows {
        let arch = row.architecture.as_deref().ok_or("missing architecture")?;
        let parts: Vec<&str> = arch.split('/').collect();
        let ok = parts.len() == 2 * row.depth + 1
            && parts.chunks(2).take(row.depth).all(|c| {
                c[0].parse::<usize>().is_ok() && (c[1] == "tansig" || c[1] == "logsig")
            })
            && (OUTPUT_NAMES.contains(parts.last().unwrap()) || *parts.last().unwrap() == "MIMO");
        check(ok, || format!("architecture string {arch:?}"))?;
        check(table.contains(arch), || format!("{arch} missing from rendered table"))?;
    }
    Ok(format!(
        "box CSV {} rows, surface CSV 24 rows, 8 comparison rows such as {}",
        report.cells.len(),
        record.rows[0].architecture.as_deref().unwrap_or("-")
    ))
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("Jacobian matches central differences", criterion_1),
        ("LM solves linear least squares", criterion_2),
        ("mu schedule contract", criterion_3),
        ("early stopping restores best weights", criterion_4),
        ("split counts and partition", criterion_5),
        ("normalization range and round trip", criterion_6),
        ("synthetic moments", criterion_7),
        ("desk-scale MIMO sweep", criterion_8),
        ("determinism across worker counts", criterion_9),
        ("statistics oracles", criterion_10),
        ("report formats", criterion_11),
    ];
    assert_eq!(INPUT_NAMES.len() + OUTPUT_NAMES.len(), REFERENCE_MEANS.len());
    let mut failed = Vec::new();
    let _ = writeln!(std::io::stderr());
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let line = match &outcome {
            Ok(detail) => format!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => format!("criterion {:>2} FAIL  {name}: {detail}", i + 1),
        };
        // Written past the test harness's capture so the summary always shows.
        let _ = writeln!(std::io::stderr(), "{line}");
        if outcome.is_err() {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
