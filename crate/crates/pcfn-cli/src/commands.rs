//! One function per subcommand, all returning classified errors so main can
//! map them onto exit codes.

use std::path::{Path, PathBuf};

use pcfn::data::{
    generate_dataset, manifest_path, read_sample, DatasetManifest, FlowConditions,
    GeneratorParams, PointCloud, Split,
};
use pcfn::eval::{
    build_stencils, conservation_residuals, critical_points, gradient_residuals,
    pointwise_errors, ErrorReport,
};
use pcfn::model::{
    load_checkpoint, save_checkpoint, stack_coords, Model, ModelConfig,
};
use pcfn::tensor::Scalar;
use pcfn::train::{
    evaluate_loss, fit, grid_search, CellOutcome, GridSpec, TrainConfig,
};

use crate::config::{CommonArgs, Precision, Resolved};
use crate::error::CliError;
use crate::plot;
use crate::rundir::RunDir;

fn require<'a, T>(opt: &'a Option<T>, flag: &str) -> Result<&'a T, CliError> {
    opt.as_ref()
        .ok_or_else(|| CliError::Config(format!("missing required flag --{flag}")))
}

fn load_manifest(dir: &Path) -> Result<DatasetManifest, CliError> {
    Ok(DatasetManifest::load(&manifest_path(dir))?)
}

// ── gen-data ─────────────────────────────────────────────────────────

pub fn cmd_gen_data(args: &CommonArgs) -> Result<(), CliError> {
    let resolved = Resolved::from_sources(args)?;
    let out = require(&args.out, "out")?.clone();
    std::fs::create_dir_all(&out)?;
    resolved.write_resolved(&out)?;
    let params = GeneratorParams::desk(
        resolved.data.n_points,
        resolved.data.radii.clone(),
        resolved.data.clouds_per_radius,
    );
    let manifest = generate_dataset(&out, &params, resolved.seed)?;
    println!(
        "generated {} samples ({} train / {} val / {} test) under {}",
        manifest.samples.len(),
        manifest.count(Split::Train),
        manifest.count(Split::Val),
        manifest.count(Split::Test),
        out.display()
    );
    Ok(())
}

// ── train ────────────────────────────────────────────────────────────

pub fn cmd_train(args: &CommonArgs) -> Result<(), CliError> {
    let resolved = Resolved::from_sources(args)?;
    match resolved.precision {
        Precision::F64 => train_impl::<f64>(args, &resolved),
        Precision::F32 => train_impl::<f32>(args, &resolved),
    }
}

fn train_impl<T: Scalar>(args: &CommonArgs, resolved: &Resolved) -> Result<(), CliError> {
    let data_dir = require(&args.data, "data")?.clone();
    let out = require(&args.out, "out")?.clone();
    let run = RunDir::create(&out, resolved)?;
    let manifest = load_manifest(&data_dir)?;
    let train_clouds = manifest.load_split(&data_dir, Split::Train)?;
    let val_clouds = manifest.load_split(&data_dir, Split::Val)?;
    if train_clouds.is_empty() {
        return Err(CliError::Data("manifest lists no training samples".into()));
    }
    let n_points = train_clouds[0].len();
    let config = ModelConfig::new(
        n_points,
        resolved.model.input_dim,
        resolved.model.n_cfd,
        resolved.model.global_feature,
    )?;
    let mut model = Model::<T>::build(config, resolved.seed)?;
    let cfg = TrainConfig {
        learning_rate: resolved.train.learning_rate,
        batch_size: resolved.train.batch_size,
        epochs: resolved.train.epochs,
        seed: resolved.seed,
        ..TrainConfig::default()
    };
    let mu = manifest
        .generator
        .as_ref()
        .map(|g| g.conditions.mu)
        .unwrap_or(FlowConditions::default().mu);

    let out = fit(
        &mut model,
        &train_clouds,
        &val_clouds,
        &manifest.norm,
        &cfg,
        |e| {
            let line = format!(
                "epoch {} train {:.6e} val {:.6e} ({:.2}s)",
                e.epoch, e.train_loss, e.val_loss, e.seconds
            );
            if e.epoch % 50 == 0 || e.epoch + 1 == cfg.epochs {
                eprintln!("{line}");
            }
            let _ = run.log_line("train.log", &line);
        },
    )?;

    out.report
        .write_csv(&run.report("loss_curve.csv"))
        .map_err(CliError::from)?;
    save_checkpoint(
        &run.checkpoint("best.ckpt"),
        &out.best,
        &manifest.norm,
        mu,
        resolved.seed,
    )?;
    save_checkpoint(
        &run.checkpoint("final.ckpt"),
        &model,
        &manifest.norm,
        mu,
        resolved.seed,
    )?;
    println!(
        "trained {} epochs; best val {:.6e} at epoch {}; checkpoints under {}",
        cfg.epochs,
        out.report.best_loss,
        out.report.best_epoch,
        run.root().display()
    );
    Ok(())
}

// ── predict ──────────────────────────────────────────────────────────

/// Physical-unit predictions for a cloud, plus the forward pass latents.
fn predict_physical(
    model: &Model<f64>,
    norm: &pcfn::data::NormStats,
    cloud: &PointCloud,
) -> Result<(Vec<f64>, pcfn::model::LatentRecord), CliError> {
    let coords = stack_coords::<f64>(&[&cloud.coords], model.config().input_dim)?;
    let pass = model.forward_infer(&coords, 1)?;
    let scaled = pass.predictions();
    let mut physical = Vec::with_capacity(scaled.len());
    for i in 0..cloud.len() {
        let phys = norm.denormalize([scaled[i * 3], scaled[i * 3 + 1], scaled[i * 3 + 2]]);
        physical.extend_from_slice(&phys);
    }
    Ok((physical, pass.latents.into_iter().next().expect("one sample")))
}

pub fn cmd_predict(args: &CommonArgs, input: &Path) -> Result<(), CliError> {
    let resolved = Resolved::from_sources(args)?;
    let ckpt = require(&args.checkpoint, "checkpoint")?.clone();
    let out = require(&args.out, "out")?.clone();
    let run = RunDir::create(&out, &resolved)?;
    let (model, meta) = load_checkpoint::<f64>(&ckpt)?;
    let cloud = read_sample(input)?;
    let (physical, _) = predict_physical(&model, &meta.norm, &cloud)?;
    let mut text = String::from("x,y,u,v,p\n");
    for (i, p) in cloud.coords.iter().enumerate() {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            p[0],
            p[1],
            physical[i * 3],
            physical[i * 3 + 1],
            physical[i * 3 + 2]
        ));
    }
    std::fs::write(run.report("predictions.csv"), text)?;
    println!(
        "predicted {} points -> {}",
        cloud.len(),
        run.report("predictions.csv").display()
    );
    Ok(())
}

// ── eval ─────────────────────────────────────────────────────────────

fn errors_table(rep: &ErrorReport) -> String {
    let mut t = String::new();
    t.push_str("field   euclidean        rms              relative\n");
    for (name, f) in [("u", &rep.u), ("v", &rep.v), ("p", &rep.p)] {
        let rel = f
            .relative
            .map(|r| format!("{r:.6e}"))
            .unwrap_or_else(|| "undefined (zero truth norm)".into());
        t.push_str(&format!(
            "{name}       {:.6e}     {:.6e}     {rel}\n",
            f.euclidean, f.rms
        ));
    }
    t
}

pub fn cmd_eval(args: &CommonArgs, input: &Path, plot_maps: bool) -> Result<(), CliError> {
    let resolved = Resolved::from_sources(args)?;
    let ckpt = require(&args.checkpoint, "checkpoint")?.clone();
    let out = require(&args.out, "out")?.clone();
    let run = RunDir::create(&out, &resolved)?;
    let (model, meta) = load_checkpoint::<f64>(&ckpt)?;
    let cloud = read_sample(input)?;
    if cloud.fields.is_none() {
        return Err(CliError::Data(format!(
            "{} carries no target fields to evaluate against",
            input.display()
        )));
    }
    let (physical, latent) = predict_physical(&model, &meta.norm, &cloud)?;
    let report = pointwise_errors(&cloud, &physical)?;
    let critical = critical_points(&latent, &cloud);

    std::fs::write(run.report("errors.txt"), errors_table(&report))?;
    let mut map = String::from("x,y,err_u,err_v,err_p,is_critical\n");
    let mut is_critical = vec![false; cloud.len()];
    for &i in &critical.indices {
        is_critical[i] = true;
    }
    for (i, p) in cloud.coords.iter().enumerate() {
        let e = report.per_point_abs[i];
        map.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p[0], p[1], e[0], e[1], e[2], is_critical[i] as u8
        ));
    }
    std::fs::write(run.report("error_map.csv"), map)?;
    if plot_maps {
        for (c, name) in ["err_u", "err_v", "err_p"].iter().enumerate() {
            let values: Vec<f64> = report.per_point_abs.iter().map(|e| e[c]).collect();
            plot::scatter_png(
                &run.report(&format!("{name}.png")),
                &cloud.coords,
                &values,
            )?;
        }
    }
    print!("{}", errors_table(&report));
    Ok(())
}

// ── residuals ────────────────────────────────────────────────────────

pub fn cmd_residuals(args: &CommonArgs, input: &Path) -> Result<(), CliError> {
    let resolved = Resolved::from_sources(args)?;
    let ckpt = require(&args.checkpoint, "checkpoint")?.clone();
    let out = require(&args.out, "out")?.clone();
    let run = RunDir::create(&out, &resolved)?;
    let (model, meta) = load_checkpoint::<f64>(&ckpt)?;
    let cloud = read_sample(input)?;
    let (physical, _) = predict_physical(&model, &meta.norm, &cloud)?;

    let stencils = build_stencils(&cloud, resolved.eval.stencil_k)?;
    let mut predicted = cloud.clone();
    predicted.fields = Some(
        (0..cloud.len())
            .map(|i| [physical[i * 3], physical[i * 3 + 1], physical[i * 3 + 2]])
            .collect(),
    );
    let integrated = conservation_residuals(&predicted, &stencils, meta.norm.rho, meta.mu)?;
    let gradient = gradient_residuals(&model, &cloud, &meta.norm, &stencils, meta.mu)?;

    let mut text = String::new();
    text.push_str("integrated residuals of predicted fields (area-weighted sums)\n");
    text.push_str(&format!(
        "  momentum_x {:.6e}\n  momentum_y {:.6e}\n  continuity {:.6e}\n",
        integrated.momentum_x, integrated.momentum_y, integrated.continuity
    ));
    if cloud.fields.is_some() {
        let truth = conservation_residuals(&cloud, &stencils, meta.norm.rho, meta.mu)?;
        text.push_str("integrated residuals of the provided target fields\n");
        text.push_str(&format!(
            "  momentum_x {:.6e}\n  momentum_y {:.6e}\n  continuity {:.6e}\n",
            truth.momentum_x, truth.momentum_y, truth.continuity
        ));
    }
    text.push_str("gradient residuals (per-point derivative averages)\n");
    match &gradient.critical {
        Some(t) => text.push_str(&format!(
            "  critical interior     (M = {:5}): momentum_x {:.6e}  momentum_y {:.6e}  continuity {:.6e}\n",
            gradient.m_critical, t.momentum_x, t.momentum_y, t.continuity
        )),
        None => text.push_str("  critical interior: empty set\n"),
    }
    match &gradient.non_critical {
        Some(t) => text.push_str(&format!(
            "  non-critical interior (M = {:5}): momentum_x {:.6e}  momentum_y {:.6e}  continuity {:.6e}\n",
            gradient.m_non_critical, t.momentum_x, t.momentum_y, t.continuity
        )),
        None => text.push_str("  non-critical interior: empty set\n"),
    }
    std::fs::write(run.report("residuals.txt"), &text)?;
    print!("{text}");
    Ok(())
}

// ── critical ─────────────────────────────────────────────────────────

pub fn cmd_critical(args: &CommonArgs, input: &Path) -> Result<(), CliError> {
    let resolved = Resolved::from_sources(args)?;
    let ckpt = require(&args.checkpoint, "checkpoint")?.clone();
    let out = require(&args.out, "out")?.clone();
    let run = RunDir::create(&out, &resolved)?;
    let (model, _meta) = load_checkpoint::<f64>(&ckpt)?;
    let cloud = read_sample(input)?;
    let coords = stack_coords::<f64>(&[&cloud.coords], model.config().input_dim)?;
    let pass = model.forward_infer(&coords, 1)?;
    let report = critical_points(&pass.latents[0], &cloud);

    let mut is_critical = vec![false; cloud.len()];
    for &i in &report.indices {
        is_critical[i] = true;
    }
    let mut csv = String::from("x,y,is_critical\n");
    for (i, p) in cloud.coords.iter().enumerate() {
        csv.push_str(&format!("{},{},{}\n", p[0], p[1], is_critical[i] as u8));
    }
    std::fs::write(run.report("critical.csv"), csv)?;
    let bound = cloud.len().min(model.config().global_feature);
    let coverage = match report.boundary_coverage {
        Some(true) => "all surface points are critical".to_string(),
        Some(false) => format!(
            "{} of {} surface points are critical",
            report.n_surface_critical, report.n_surface
        ),
        None => "surface unknown for this cloud".to_string(),
    };
    let summary = format!(
        "critical points: {} of {} (bound min(N, G) = {bound}); {coverage}\n",
        report.indices.len(),
        cloud.len()
    );
    std::fs::write(run.report("critical.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

// ── grid-search ──────────────────────────────────────────────────────

fn grid_csv_path(run: &RunDir) -> PathBuf {
    run.report("grid.csv")
}

const GRID_HEADER: &str = "global_feature,batch_size,mlp,train_loss,val_loss,test_loss,seconds";

fn parse_done_cells(path: &Path) -> Vec<(usize, usize)> {
    let Ok(text) = std::fs::read_to_string(path) else {
        return Vec::new();
    };
    text.lines()
        .skip(1)
        .filter_map(|line| {
            let mut cols = line.split(',');
            let g = cols.next()?.trim().parse().ok()?;
            let b = cols.next()?.trim().parse().ok()?;
            Some((g, b))
        })
        .collect()
}

fn grid_row(cell: &pcfn::train::GridCell) -> Option<String> {
    let mlp = cell
        .tail_mlp
        .iter()
        .map(|w| w.to_string())
        .collect::<Vec<_>>()
        .join("x");
    match &cell.outcome {
        CellOutcome::Done {
            train_loss,
            val_loss,
            test_loss,
            seconds,
        } => Some(format!(
            "{},{},{mlp},{},{},{},{:.2}",
            cell.global_feature, cell.batch_size, train_loss, val_loss, test_loss, seconds
        )),
        CellOutcome::Infeasible { .. } => Some(format!(
            "{},{},{mlp},×,×,×,×",
            cell.global_feature, cell.batch_size
        )),
        CellOutcome::Skipped => None,
    }
}

pub fn cmd_grid_search(args: &CommonArgs) -> Result<(), CliError> {
    let resolved = Resolved::from_sources(args)?;
    match resolved.precision {
        Precision::F64 => grid_impl::<f64>(args, &resolved),
        Precision::F32 => grid_impl::<f32>(args, &resolved),
    }
}

fn grid_impl<T: Scalar>(args: &CommonArgs, resolved: &Resolved) -> Result<(), CliError> {
    let data_dir = require(&args.data, "data")?.clone();
    let out = require(&args.out, "out")?.clone();
    let run = RunDir::create(&out, resolved)?;
    let manifest = load_manifest(&data_dir)?;
    let train_clouds = manifest.load_split(&data_dir, Split::Train)?;
    let val_clouds = manifest.load_split(&data_dir, Split::Val)?;
    let test_clouds = manifest.load_split(&data_dir, Split::Test)?;
    if train_clouds.is_empty() || val_clouds.is_empty() || test_clouds.is_empty() {
        return Err(CliError::Data(
            "grid search needs non-empty train/val/test splits".into(),
        ));
    }
    let n_points = train_clouds[0].len();

    // Resume: cells already present in the report are skipped.
    let csv_path = grid_csv_path(&run);
    let done = parse_done_cells(&csv_path);
    if done.is_empty() {
        std::fs::write(&csv_path, format!("{GRID_HEADER}\n"))?;
    }

    let spec = GridSpec {
        global_features: resolved.grid.global_features.clone(),
        batch_sizes: resolved.grid.batch_sizes.clone(),
        epochs: resolved.grid.epochs,
        seed: resolved.seed,
        memory_budget_bytes: resolved.grid.memory_budget_mb.map(|mb| mb * 1024 * 1024),
    };
    let csv_append = csv_path.clone();
    let cells = grid_search::<T>(
        &train_clouds,
        &val_clouds,
        &test_clouds,
        &manifest.norm,
        n_points,
        &spec,
        &done,
        move |cell| {
            if let Some(row) = grid_row(cell) {
                use std::io::Write;
                if let Ok(mut f) = std::fs::OpenOptions::new().append(true).open(&csv_append) {
                    let _ = writeln!(f, "{row}");
                }
                eprintln!("cell {row}");
            } else {
                eprintln!(
                    "cell ({}, {}) already done; skipped",
                    cell.global_feature, cell.batch_size
                );
            }
        },
    )?;
    let finished = cells
        .iter()
        .filter(|c| !matches!(c.outcome, CellOutcome::Skipped))
        .count();
    println!(
        "grid search: {} cells ({} computed, {} resumed) -> {}",
        cells.len(),
        finished,
        cells.len() - finished,
        csv_path.display()
    );
    Ok(())
}

// ── helpers shared with integration tests ────────────────────────────

/// Infer-mode loss of a run's best checkpoint over the dataset's test split.
pub fn best_checkpoint_test_loss(run_dir: &Path, data_dir: &Path) -> Result<f64, CliError> {
    let (model, meta) = load_checkpoint::<f64>(&run_dir.join("checkpoints/best.ckpt"))?;
    let manifest = load_manifest(data_dir)?;
    let test = manifest.load_split(data_dir, Split::Test)?;
    Ok(evaluate_loss(&model, &test, &meta.norm)?)
}
