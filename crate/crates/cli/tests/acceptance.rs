//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails. Set `ACCEPTANCE_ONLY=1,4,9` to run a subset.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;

use anyhow::{ensure, Context, Result};
use autodip::calibration::{
    best_per_measure, build_store, calibrate_image, image_rank_sums, load_store, save_store,
    CalibratedImage, CalibrationOptions, CalibrationStore, GroupKey, GroupObjective, ImageGrid,
    SearchSpace, STORE_FORMAT_VERSION,
};
use autodip::dip::{dip_run, DipConfig, GradientCheck, NetworkSpec, RunConfig, WidthMode};
use autodip::image::{stitch, tile, Image, Microscope, DEFAULT_OVERLAP, DEFAULT_PATCH_SIZE};
use autodip::metrics::{mae, mse, psnr, ssim, MetricKind, MultiScaleSsim};
use autodip::synth::{apply_noise, generate_phantom, DatasetSpec, NoiseModel, PhantomKind};
use autodip::transfer::{baseline_config, denoise_with_config, DenoiseOptions, TransferStrategy};
use autodip_cli::commands::{
    cmd_calibrate, cmd_denoise, cmd_evaluate, cmd_synth, default_grid_dir, load_cached_grid,
    DenoiseRequest, EvaluateRequest,
};
use autodip_cli::{CliConfig, Manifest};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome {
        pass,
        detail: detail.into(),
    })
}

fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Image {
    Image::from_fn(h, w, |_, _| rng.random::<f32>())
}

fn tiling_round_trip() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut sizes = vec![(512, 512), (600, 600), (1024, 1024), (512, 1024), (600, 33)];
    while sizes.len() < 50 {
        sizes.push((rng.random_range(33..=1100), rng.random_range(33..=1100)));
    }
    let mut worst = 0.0f32;
    for &(h, w) in &sizes {
        let img = random_image(&mut rng, h, w);
        let patches = tile(&img, DEFAULT_PATCH_SIZE, DEFAULT_OVERLAP)?;
        let back = stitch(&patches, h, w)?;
        let err = img
            .data()
            .iter()
            .zip(back.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max);
        worst = worst.max(err);
    }
    outcome(
        worst <= 1e-6,
        format!("{} sizes, max abs error {worst:e}", sizes.len()),
    )
}

fn row(values: &[f32]) -> Image {
    Image::new(1, values.len(), 1, values.to_vec()).unwrap()
}

fn metric_oracles() -> Result<Outcome> {
    let mut failures = Vec::new();
    let mut expect = |name: &str, got: f64, want: f64| {
        if got != want {
            failures.push(format!("{name}: {got} != {want}"));
        }
    };
    let (zeros, ones) = (row(&[0.0, 0.0]), row(&[1.0, 1.0]));
    let (ramp, half) = (row(&[0.0, 1.0]), row(&[0.5, 0.5]));
    expect("mse identical", mse(&ramp, &ramp)?, 0.0);
    expect("mse unit", mse(&zeros, &ones)?, 1.0);
    expect("mae unit", mae(&zeros, &ones)?, 1.0);
    expect("mse half", mse(&ramp, &half)?, 0.25);
    expect("mae half", mae(&ramp, &half)?, 0.5);
    expect("psnr identical", psnr(&ramp, &ramp)?, f64::INFINITY);
    expect("psnr unit", psnr(&zeros, &ones)?, 0.0);
    let quarter = psnr(&ramp, &half)?;
    if (quarter - 6.0206).abs() > 1e-4 {
        failures.push(format!("psnr of mse 0.25 is {quarter}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = random_image(&mut rng, 48, 48);
    let self_ssim = ssim(&a, &a)?;
    if (self_ssim - 1.0).abs() > 1e-9 {
        failures.push(format!("ssim of identical images {self_ssim}"));
    }
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (h, w) = (rng.random_range(1..40), rng.random_range(1..40));
        let a = random_image(&mut rng, h, w);
        let b = random_image(&mut rng, h, w);
        let m = mse(&a, &b)?;
        let p = psnr(&a, &b)?;
        worst = worst.max(((p - 10.0 * (1.0 / m).log10()) / p).abs());
    }
    if worst > 1e-9 {
        failures.push(format!("psnr/mse identity off by {worst:e}"));
    }
    let pass = failures.is_empty();
    outcome(
        pass,
        if pass {
            format!("hand cases exact, identity error {worst:e}")
        } else {
            failures.join("; ")
        },
    )
}

fn gradient_check() -> Result<Outcome> {
    let (mut worst, mut unfloored) = (0.0f64, 0.0f64);
    let mut parts = Vec::new();
    for depth in [4, 5] {
        for skip in [true, false] {
            let spec = NetworkSpec::new(depth, WidthMode::Uniform(16), skip);
            let report = GradientCheck::new(spec).run()?;
            let err = report.max_relative_error();
            parts.push(format!(
                "d{depth}/{}={err:.1e}",
                if skip { "skip" } else { "noskip" }
            ));
            worst = worst.max(err);
            unfloored = unfloored.max(report.max_unfloored_relative_error());
        }
    }
    outcome(
        worst < 1e-2,
        format!(
            "max relative error {worst:.2e} ({}), without the rms floor {unfloored:.2e}",
            parts.join(" ")
        ),
    )
}

fn denoising_effect() -> Result<Outcome> {
    let space = SearchSpace::reduced();
    let options = CalibrationOptions {
        run: RunConfig::default(),
        seed: 0,
        workers: workers(),
        backend: &MultiScaleSsim,
    };
    let mut gains = Vec::new();
    for (kind, seed) in [
        (PhantomKind::Dots, 1),
        (PhantomKind::Filaments, 2),
        (PhantomKind::Blobs, 3),
    ] {
        let clean = generate_phantom(kind, seed, 64, 64)?;
        let noisy = apply_noise(&clean, &NoiseModel::gaussian(0.1), seed + 100)?;
        let grid = calibrate_image(kind.as_str(), &noisy, &clean, &space, &options)?;
        let best = grid
            .results
            .iter()
            .map(|r| r.metrics.psnr)
            .fold(f64::NEG_INFINITY, f64::max);
        gains.push((kind, best - psnr(&noisy, &clean)?));
    }
    let pass = gains.iter().all(|&(_, g)| g >= 3.0);
    let detail = gains
        .iter()
        .map(|(k, g)| format!("{k} +{g:.2} dB"))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(
        pass,
        format!("best-checkpoint gain over noisy input: {detail}"),
    )
}

fn overfitting_curve() -> Result<Outcome> {
    let clean = generate_phantom(PhantomKind::Dots, 7, 64, 64)?;
    let noisy = apply_noise(&clean, &NoiseModel::gaussian(0.3), 8)?;
    let spec = NetworkSpec::new(4, WidthMode::Uniform(32), true);
    let trace = dip_run(&noisy, &spec, &RunConfig::default())?;
    let curve = trace
        .snapshots
        .iter()
        .map(|s| Ok((s.iteration, psnr(&s.output.clamped(0.0, 1.0), &clean)?)))
        .collect::<Result<Vec<_>>>()?;
    let (peak_it, peak) =
        curve
            .iter()
            .copied()
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    let (last_it, last) = *curve.last().context("no snapshots")?;
    outcome(
        peak_it < last_it && peak - last >= 0.5,
        format!(
            "peak {peak:.2} dB at {peak_it}, final {last:.2} dB at {last_it}, drop {:.2} dB",
            peak - last
        ),
    )
}

/// The synthetic calibration/validation study shared by several criteria.
struct Study {
    _dir: tempfile::TempDir,
    calibration: PathBuf,
    store_path: PathBuf,
    store: CalibrationStore,
    validation: PathBuf,
    validation_grids: PathBuf,
}

fn workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

fn study_config() -> CliConfig {
    CliConfig {
        search_space: SearchSpace::reduced(),
        workers: workers(),
        ..CliConfig::default()
    }
}

fn study() -> Result<&'static Study> {
    static STUDY: OnceLock<Study> = OnceLock::new();
    if let Some(s) = STUDY.get() {
        return Ok(s);
    }
    let dir = tempfile::tempdir()?;
    // Three noise regimes of one phantom kind, four calibration and two validation images each.
    let spec = DatasetSpec {
        kinds: vec![PhantomKind::Dots],
        calibration_per_cell: 4,
        validation_per_cell: 2,
        height: 32,
        width: 32,
        ..DatasetSpec::default()
    };
    let synth = cmd_synth(&spec, &dir.path().join("data"))?;
    let config = study_config();
    let store_path = dir.path().join("store.json");
    cmd_calibrate(&synth.calibration_manifest, &store_path, &config, None)?;
    let validation_store = dir.path().join("validation-store.json");
    cmd_calibrate(&synth.validation_manifest, &validation_store, &config, None)?;
    let study = Study {
        calibration: synth.calibration_manifest,
        store: load_store(&store_path)?,
        store_path,
        validation: synth.validation_manifest,
        validation_grids: default_grid_dir(&validation_store),
        _dir: dir,
    };
    Ok(STUDY.get_or_init(|| study))
}

fn transfer_hierarchy() -> Result<Outcome> {
    let study = study()?;
    let entries = study.store.entries.len();
    let groups = study.store.group_best.len();
    ensure!(
        entries == 12 && groups >= 4,
        "store has {entries} entries and {groups} group optima"
    );
    let report_path = study.store_path.with_file_name("report.tsv");
    let group = "group:microscope+specimen".to_string();
    let all = "group:all".to_string();
    let report = cmd_evaluate(
        &EvaluateRequest {
            manifest: &study.validation,
            store: Some(&study.store_path),
            strategies: &[group.clone(), all.clone()],
            report: &report_path,
            grid_dir: Some(&study.validation_grids),
            cache_dir: None,
        },
        &study_config(),
    )?;
    let overall = report.row("overall").context("no overall row")?;
    let value = |name: &str| -> Result<f64> {
        let col = report
            .column(name)
            .with_context(|| format!("no column {name}"))?;
        overall.psnr[col].with_context(|| format!("{name} unavailable"))
    };
    let (oracle, grp, glob, base) = (
        value("oracle")?,
        value(&group)?,
        value(&all)?,
        value("baseline")?,
    );
    outcome(
        oracle >= grp && grp >= glob - 0.1 && grp >= base,
        format!(
            "mean validation PSNR: oracle {oracle:.3}, group {grp:.3}, all {glob:.3}, baseline {base:.3} ({entries} entries, {groups} groups)"
        ),
    )
}

fn speedup() -> Result<Outcome> {
    let clean = generate_phantom(PhantomKind::Dots, 11, 32, 32)?;
    let noisy = apply_noise(&clean, &NoiseModel::gaussian(0.1), 12)?;
    let base = baseline_config();
    let short = DipConfig::new(base.spec, 600);
    let options = DenoiseOptions::default();
    let (_, short_stats) = denoise_with_config(&noisy, &short, &options)?;
    let (_, base_stats) = denoise_with_config(&noisy, &base, &options)?;
    let ratio = short_stats.wall_time_secs / base_stats.wall_time_secs;
    let target = 600.0 / 1800.0;
    outcome(
        (ratio - target).abs() <= 0.25 * target,
        format!(
            "i=600 took {:.1}s, i=1800 took {:.1}s, ratio {ratio:.3} (target {target:.3} within 25%)",
            short_stats.wall_time_secs, base_stats.wall_time_secs
        ),
    )
}

/// Checks the dominance invariants on one image grid; returns violations.
fn dominance_violations(
    grid: &ImageGrid,
    store: &CalibrationStore,
    meta_groups: &[GroupKey],
) -> Vec<String> {
    let mut out = Vec::new();
    let sums = image_rank_sums(&grid.results);
    let entry = store.entry(&grid.image_id).expect("grid belongs to store");
    let own = sums[&entry.best_combined];
    let mut rivals: Vec<(String, DipConfig)> = meta_groups
        .iter()
        .filter_map(|k| store.group_best.get(k).map(|c| (k.to_string(), *c)))
        .collect();
    rivals.push(("baseline".into(), baseline_config()));
    for (name, config) in rivals {
        if let Some(&s) = sums.get(&config) {
            if own > s {
                out.push(format!("{}: combined {own} > {name} {s}", grid.image_id));
            }
        }
    }
    match best_per_measure(&grid.results) {
        Ok(best) if best[&MetricKind::Psnr] == best[&MetricKind::Mse] => {}
        Ok(_) => out.push(format!("{}: PSNR and MSE optima differ", grid.image_id)),
        Err(e) => out.push(format!("{}: {e}", grid.image_id)),
    }
    out
}

fn mini_store_with_baseline() -> Result<(CalibrationStore, Vec<ImageGrid>)> {
    let space = SearchSpace {
        depths: vec![5],
        widths: vec![WidthMode::Uniform(16), WidthMode::Uniform(128)],
        skips: vec![true],
        checkpoints: vec![600, 1200, 1800],
    };
    let options = CalibrationOptions {
        run: RunConfig::default(),
        seed: 0,
        workers: workers(),
        backend: &MultiScaleSsim,
    };
    let mut images = Vec::new();
    for (i, (kind, microscope)) in [
        (PhantomKind::Dots, Microscope::Confocal),
        (PhantomKind::Dots, Microscope::Confocal),
        (PhantomKind::Filaments, Microscope::Widefield),
    ]
    .into_iter()
    .enumerate()
    {
        let seed = 40 + i as u64;
        let clean = generate_phantom(kind, seed, 32, 32)?;
        let noisy = apply_noise(&clean, &NoiseModel::gaussian(0.15), seed)?;
        let id = format!("mini-{i}");
        let grid = calibrate_image(&id, &noisy, &clean, &space, &options)?;
        let meta = autodip::image::ImageMeta::new(id, microscope, kind.as_str());
        images.push(CalibratedImage { meta, noisy, grid });
    }
    let store = build_store(&images, GroupObjective::MeanRankSum)?;
    Ok((store, images.into_iter().map(|i| i.grid).collect()))
}

fn dominance() -> Result<Outcome> {
    let study = study()?;
    let manifest = Manifest::load(&study.calibration)?;
    let grid_dir = default_grid_dir(&study.store_path);
    let mut violations = Vec::new();
    let mut checked = 0;
    for entry in &manifest.entries {
        let id = entry.image_id();
        let grid = load_cached_grid(&grid_dir, &id)?
            .with_context(|| format!("no grid for {id}"))?
            .grid;
        let meta = &study.store.entry(&id).context("entry missing")?.meta;
        violations.extend(dominance_violations(
            &grid,
            &study.store,
            &GroupKey::memberships(meta),
        ));
        checked += 1;
    }
    let (mini, grids) = mini_store_with_baseline()?;
    let mut baseline_seen = 0;
    for grid in &grids {
        let meta = &mini.entry(&grid.image_id).context("entry missing")?.meta;
        baseline_seen += grid.get(&baseline_config()).is_some() as usize;
        violations.extend(dominance_violations(
            grid,
            &mini,
            &GroupKey::memberships(meta),
        ));
        checked += 1;
    }
    if baseline_seen != grids.len() {
        violations.push("baseline configuration missing from a grid that should contain it".into());
    }
    let pass = violations.is_empty();
    outcome(
        pass,
        if pass {
            format!("{checked} grids checked against group, global and baseline configurations")
        } else {
            violations.join("; ")
        },
    )
}

fn store_round_trip() -> Result<Outcome> {
    let study = study()?;
    let original = std::fs::read(&study.store_path)?;
    let loaded = load_store(&study.store_path)?;
    let copy = study.store_path.with_file_name("store-copy.json");
    save_store(&loaded, &copy)?;
    let identical = std::fs::read(&copy)? == original;
    let mut bumped: serde_json::Value = serde_json::from_slice(&original)?;
    bumped["format_version"] = serde_json::json!(STORE_FORMAT_VERSION + 1);
    let bumped_text = serde_json::to_string(&bumped)?;
    let rejected = CalibrationStore::from_json(&bumped_text).is_err();
    outcome(
        identical && rejected,
        format!(
            "{} bytes, save/load/save identical: {identical}, newer version rejected: {rejected}",
            original.len()
        ),
    )
}

fn calibrate_with_workers(dir: &Path, manifest: &Path, workers: usize) -> Result<Vec<u8>> {
    let config = CliConfig {
        workers,
        search_space: SearchSpace {
            depths: vec![4],
            widths: vec![WidthMode::Uniform(16), WidthMode::Uniform(32)],
            skips: vec![true, false],
            checkpoints: vec![100, 200],
        },
        ..CliConfig::default()
    };
    let store = dir.join(format!("store-{workers}.json"));
    cmd_calibrate(manifest, &store, &config, None)?;
    Ok(std::fs::read(store)?)
}

fn denoise_with_workers(
    dir: &Path,
    input: &Path,
    store: &Path,
    workers: usize,
    tag: &str,
) -> Result<(Vec<u8>, String)> {
    let config = CliConfig {
        workers,
        patch_size: 32,
        overlap: 8,
        ..CliConfig::default()
    };
    let output = dir.join(format!("denoised-{tag}.raw"));
    let strategy = TransferStrategy::default().to_string();
    let record = cmd_denoise(
        &DenoiseRequest {
            input,
            output: &output,
            microscope: Microscope::Confocal,
            specimen: "dots",
            noise_level: None,
            store: Some(store),
            strategy: Some(&strategy),
            decision: None,
        },
        &config,
    )?;
    Ok((
        std::fs::read(&output)?,
        serde_json::to_string(&record.decision)?,
    ))
}

fn determinism() -> Result<Outcome> {
    let dir = tempfile::tempdir()?;
    let spec = DatasetSpec {
        kinds: vec![PhantomKind::Dots, PhantomKind::Filaments],
        noise_levels: vec![1, 4],
        calibration_per_cell: 1,
        validation_per_cell: 1,
        height: 48,
        width: 48,
        ..DatasetSpec::default()
    };
    let synth = cmd_synth(&spec, &dir.path().join("data"))?;
    let one = calibrate_with_workers(dir.path(), &synth.calibration_manifest, 1)?;
    let four = calibrate_with_workers(dir.path(), &synth.calibration_manifest, 4)?;
    let store = dir.path().join("store-1.json");
    let manifest = Manifest::load(&synth.validation_manifest)?;
    let input = manifest.resolve(&manifest.entries[0].noisy_path);
    let a = denoise_with_workers(dir.path(), &input, &store, 1, "a")?;
    let b = denoise_with_workers(dir.path(), &input, &store, 4, "b")?;
    let c = denoise_with_workers(dir.path(), &input, &store, 1, "c")?;
    let stores_equal = one == four;
    let outputs_equal = a == b && a == c;
    outcome(
        stores_equal && outputs_equal,
        format!("calibrate store identical across 1/4 workers: {stores_equal}; denoise output and decision identical across runs: {outputs_equal}"),
    )
}

type Criterion = (u32, &'static str, fn() -> Result<Outcome>);

const CRITERIA: [Criterion; 10] = [
    (1, "tiling round trip", tiling_round_trip),
    (2, "metric oracles", metric_oracles),
    (3, "gradient check", gradient_check),
    (4, "denoising effect", denoising_effect),
    (5, "overfitting curve", overfitting_curve),
    (6, "transfer hierarchy", transfer_hierarchy),
    (7, "speedup", speedup),
    (8, "dominance invariants", dominance),
    (9, "store round trip", store_round_trip),
    (10, "determinism", determinism),
];

fn main() -> ExitCode {
    let only: Option<BTreeSet<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let mut lines = Vec::new();
    let mut failed = 0;
    for (id, name, check) in CRITERIA {
        if only.as_ref().is_some_and(|set| !set.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let result = check().unwrap_or_else(|e| Outcome {
            pass: false,
            detail: format!("error: {e:#}"),
        });
        let line = format!(
            "criterion {id:>2} {}: {name}: {} [{:.1}s]",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail,
            start.elapsed().as_secs_f64()
        );
        println!("{line}");
        failed += !result.pass as usize;
        lines.push(line);
    }
    println!("\nacceptance summary");
    for line in &lines {
        println!("{line}");
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
