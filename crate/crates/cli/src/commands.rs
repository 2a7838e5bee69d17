//! One function per subcommand. Each validates its inputs before starting
//! work and leaves its artifacts in the output directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use mrf_core::bloch::simulate_dictionary;
use mrf_core::gan::{
    curves_to_csv, learning_curves, synthesize, train as train_gan, validate_lambda, GanModel, ZPolicy,
};
use mrf_core::matching::{diff_map, make_phantom, match_volume, rel_rmse, ParameterMap};
use mrf_core::{
    expand_grid, normalize_atoms, scale_for_training, split_dataset, DatasetSplit, Dictionary, Error,
    Execution, Result, SequenceParams, TissueParams,
};

use crate::artifacts::{self as art, upsert_timing, write_atomic, write_image, TimingRow};
use crate::config::require;
use crate::Context;
use crate::SynthArgs;
use crate::MatchArgs;

impl Context {
    fn out_file(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// Configured path if given, otherwise the artifact in the output directory.
    fn input(&self, configured: &Option<PathBuf>, artifact: &str) -> Result<PathBuf> {
        require(&configured.clone().unwrap_or_else(|| self.out_file(artifact)))
    }

    fn cold_start(&self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }
}

fn params_csv(params: &[TissueParams]) -> String {
    let mut s = String::from("t1_ms,t2_ms\n");
    for p in params {
        let _ = writeln!(s, "{},{}", p.t1_ms, p.t2_ms);
    }
    s
}

fn grid_params(spec: &mrf_core::GridSpec) -> Result<Vec<TissueParams>> {
    let params = expand_grid(spec)?;
    if params.is_empty() {
        return Err(Error::Config("empty grid: the grid spec yields no (T1, T2) combinations".into()));
    }
    Ok(params)
}

pub fn grid(ctx: &Context, spec: Option<&Path>) -> Result<()> {
    let spec = match spec {
        Some(p) => mrf_core::GridSpec::load(&require(p)?)?,
        None => ctx.config.grid()?,
    };
    let params = grid_params(&spec)?;
    write_atomic(&ctx.out_file(art::PARAMS), params_csv(&params).as_bytes())?;
    println!("{}", params.len());
    Ok(())
}

pub fn simulate(ctx: &Context) -> Result<()> {
    let params = grid_params(&ctx.config.grid()?)?;
    let seq = ctx.config.sequence()?;
    let profile = ctx.config.profile()?;
    let sim_grid = ctx.config.sim_grid()?;
    let cold = ctx.cold_start();
    let (dict, timing) = simulate_dictionary(&params, &seq, &profile, &sim_grid)?;
    dict.save(&ctx.out_file(art::DICTIONARY))?;
    write_atomic(&ctx.out_file(art::SEQUENCE), seq.to_csv_string().as_bytes())?;
    write_atomic(&ctx.out_file(art::PARAMS), params_csv(&params).as_bytes())?;
    upsert_timing(
        &ctx.out_file(art::TIMING),
        TimingRow {
            stage: "simulate".into(),
            atoms: timing.atoms,
            frames: timing.frames,
            cold_start_seconds: cold,
            wall_seconds: timing.wall_seconds,
        },
    )?;
    println!(
        "simulated {} atoms x {} frames in {:.3} s ({:.3e} s/atom)",
        timing.atoms,
        timing.frames,
        timing.wall_seconds,
        timing.seconds_per_atom()
    );
    Ok(())
}

/// Unit-norm dictionary, its split, and the sequence it was simulated with.
struct Prepared {
    dict: Dictionary,
    split: DatasetSplit,
    seq: SequenceParams,
}

fn prepare(ctx: &Context) -> Result<Prepared> {
    let path = ctx.input(&ctx.config.paths.dictionary, art::DICTIONARY)?;
    let seq = ctx.config.sequence()?;
    let dict = normalize_atoms(&Dictionary::load(&path)?)?;
    if dict.n_frames() != seq.n_frames() {
        return Err(Error::Shape(format!(
            "{} has {} frames but the sequence has {}",
            path.display(),
            dict.n_frames(),
            seq.n_frames()
        )));
    }
    let split = split_dataset(&dict, ctx.config.training.split, ctx.seed)?;
    Ok(Prepared { dict, split, seq })
}

fn split_csv(split: &DatasetSplit) -> String {
    let mut rows: Vec<(usize, &str)> = Vec::new();
    rows.extend(split.train_idx.iter().map(|&i| (i, "train")));
    rows.extend(split.val_idx.iter().map(|&i| (i, "val")));
    rows.extend(split.test_idx.iter().map(|&i| (i, "test")));
    rows.sort_unstable();
    let mut s = String::from("atom,part\n");
    for (i, part) in rows {
        let _ = writeln!(s, "{i},{part}");
    }
    s
}

pub fn train(ctx: &Context) -> Result<()> {
    let Prepared { dict, split, seq } = prepare(ctx)?;
    let (train_set, _) = scale_for_training(&dict.subset(&split.train_idx)?)?;
    let test_set = dict.subset(&split.test_idx)?;
    let cfg = ctx.config.training.train_config(ctx.seed);
    let frames = (seq.n_frames() as f64).sqrt();
    let (model, history) = train_gan(&train_set, Some(&test_set), &seq, &cfg, &mut |r| {
        eprintln!(
            "step {:>6}  d_loss {:.4}  g_loss {:.4}  train {:.2}%  test {:.2}%",
            r.iteration,
            r.d_loss,
            r.g_loss,
            100.0 * r.train_rmse * frames,
            100.0 * r.test_rmse * frames
        );
    })?;
    write_atomic(&ctx.out_file(art::MODEL), &model.to_bytes())?;
    write_atomic(&ctx.out_file(art::HISTORY), history.to_csv_string().as_bytes())?;
    write_atomic(&ctx.out_file(art::SPLIT), split_csv(&split).as_bytes())?;
    if !history.rows.is_empty() {
        let curves = curves_to_csv(&learning_curves(&history)?);
        write_atomic(&ctx.out_file(art::CURVES), curves.as_bytes())?;
    }
    println!("trained {} generator steps on {} atoms", cfg.iterations, train_set.n_atoms());
    Ok(())
}

pub fn validate(ctx: &Context) -> Result<()> {
    let Prepared { dict, split, seq } = prepare(ctx)?;
    let (train_set, _) = scale_for_training(&dict.subset(&split.train_idx)?)?;
    let val_set = dict.subset(&split.val_idx)?;
    let cfg = ctx.config.training.train_config(ctx.seed);
    let table = validate_lambda(&train_set, &val_set, &ctx.config.training.lambda_grid, &seq, &cfg)?;
    write_atomic(&ctx.out_file(art::LAMBDA), table.to_csv_string().as_bytes())?;
    println!("selected lambda {}", table.selected);
    Ok(())
}

pub fn synth(ctx: &Context, args: &SynthArgs) -> Result<()> {
    let model_path = ctx.input(&ctx.config.paths.checkpoint, art::MODEL)?;
    let params = grid_params(&ctx.config.synth_grid()?)?;
    let seq = ctx.config.sequence()?;
    let model = GanModel::load(&model_path)?;
    let z = if args.random_z { ZPolicy::Seeded(ctx.seed) } else { ZPolicy::Zeros };
    let cold = ctx.cold_start();
    let (dict, timing) = synthesize(&model, &params, &seq, z)?;
    dict.save(&ctx.out_file(art::SYNTH))?;
    upsert_timing(
        &ctx.out_file(art::TIMING),
        TimingRow {
            stage: "synth".into(),
            atoms: timing.atoms,
            frames: timing.frames,
            cold_start_seconds: cold,
            wall_seconds: timing.wall_seconds,
        },
    )?;
    println!(
        "synthesized {} atoms x {} frames in {:.4} s",
        timing.atoms, timing.frames, timing.wall_seconds
    );
    Ok(())
}

fn label_of(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "dict".into())
}

pub fn match_phantom(ctx: &Context, args: &MatchArgs) -> Result<()> {
    let dicts: Vec<PathBuf> = if args.dicts.is_empty() {
        vec![ctx.out_file(art::DICTIONARY), ctx.out_file(art::SYNTH)]
    } else {
        args.dicts.clone()
    };
    for p in &dicts {
        require(p)?;
    }
    let spec = ctx.config.phantom()?;
    let seq = ctx.config.sequence()?;
    let (phantom, signals) = make_phantom(
        &spec,
        &seq,
        &ctx.config.profile()?,
        &ctx.config.sim_grid()?,
        ctx.config.matching.noise_sigma,
        ctx.seed,
    )?;
    let truth = ParameterMap {
        width: phantom.width,
        height: phantom.height,
        t1: phantom.t1_map.clone(),
        t2: phantom.t2_map.clone(),
        similarity: phantom.t1_map.iter().map(|&v| f64::from(u8::from(v != 0.0))).collect(),
    };
    write_atomic(&ctx.out_file(art::TRUTH), truth.to_csv_string().as_bytes())?;
    for path in &dicts {
        let dict = normalize_atoms(&Dictionary::load(path)?)?;
        let map = match_volume(&signals, &dict, Execution::Parallel)
            .map_err(|e| relabel(e, &format!("matching against {}", path.display())))?;
        let label = label_of(path);
        write_atomic(&ctx.out_file(&art::maps_file(&label)), map.to_csv_string().as_bytes())?;
        for (name, values) in [("t1", &map.t1), ("t2", &map.t2)] {
            let note = format!("# {name} map (ms) matched against {label}\n");
            write_image(&ctx.out, &format!("{name}_{label}"), values, map.width, map.height, &note)?;
        }
        println!(
            "{label}: T1 rel_rmse vs truth {:.3}%, T2 {:.3}%",
            rel_rmse(&map.t1, &phantom.t1_map)?,
            rel_rmse(&map.t2, &phantom.t2_map)?
        );
    }
    Ok(())
}

fn relabel(e: Error, context: &str) -> Error {
    match e {
        Error::Config(m) => Error::Config(format!("{context}: {m}")),
        Error::Shape(m) => Error::Shape(format!("{context}: {m}")),
        Error::Numeric(m) => Error::Numeric(format!("{context}: {m}")),
        Error::Format(m) => Error::Format(format!("{context}: {m}")),
        other => other,
    }
}

fn last_field_row(text: &str) -> Option<Vec<String>> {
    text.lines().skip(1).filter(|l| !l.trim().is_empty()).last().map(|l| l.split(',').map(String::from).collect())
}

pub fn report(ctx: &Context) -> Result<()> {
    let timing_path = ctx.input(&None, art::TIMING)?;
    let timing = art::read_timing(&timing_path)?;
    let stage = |name: &str| {
        timing.iter().find(|r| r.stage == name).cloned().ok_or_else(|| {
            Error::Format(format!("{} has no {name} row; run `mrfgan {name}` first", timing_path.display()))
        })
    };
    let (sim, syn) = (stage("simulate")?, stage("synth")?);
    let mut rows: Vec<(String, String)> = vec![
        ("simulate_atoms".into(), sim.atoms.to_string()),
        ("simulate_seconds".into(), sim.wall_seconds.to_string()),
        ("simulate_seconds_per_atom".into(), sim.seconds_per_atom().to_string()),
        ("synth_atoms".into(), syn.atoms.to_string()),
        ("synth_seconds".into(), syn.wall_seconds.to_string()),
        ("synth_seconds_per_atom".into(), syn.seconds_per_atom().to_string()),
        ("speedup".into(), (sim.seconds_per_atom() / syn.seconds_per_atom()).to_string()),
    ];
    let history = ctx.out_file(art::HISTORY);
    if history.exists() {
        if let Some(last) = last_field_row(&std::fs::read_to_string(&history)?) {
            if last.len() == 5 {
                rows.push(("final_iteration".into(), last[0].clone()));
                rows.push(("final_train_rmse".into(), last[3].clone()));
                rows.push(("final_test_rmse".into(), last[4].clone()));
            }
        }
    }
    let lambda = ctx.out_file(art::LAMBDA);
    if lambda.exists() {
        let text = std::fs::read_to_string(&lambda)?;
        if let Some(sel) = text.lines().skip(1).find(|l| l.ends_with(",1")) {
            rows.push(("selected_lambda".into(), sel.split(',').next().unwrap_or_default().into()));
        }
    }
    let (bloch_maps, gan_maps) = (
        ctx.out_file(&art::maps_file(&label_of(Path::new(art::DICTIONARY)))),
        ctx.out_file(&art::maps_file(&label_of(Path::new(art::SYNTH)))),
    );
    if bloch_maps.exists() && gan_maps.exists() {
        let (b, g) = (art::read_map(&bloch_maps)?, art::read_map(&gan_maps)?);
        if (b.width, b.height) != (g.width, g.height) {
            return Err(Error::Shape("simulated and synthesized maps differ in size".into()));
        }
        let scale = ctx.config.matching.diff_scale;
        for (name, gm, bm) in [("t1", &g.t1, &b.t1), ("t2", &g.t2, &b.t2)] {
            rows.push((format!("{name}_rel_rmse_percent"), rel_rmse(gm, bm)?.to_string()));
            let d = diff_map(gm, bm, scale)?;
            let note = format!("# ({name} synth - {name} simulated) x {scale} ms\n# legend min = {}\n# legend max = {}\n", d.min, d.max);
            write_image(&ctx.out, &format!("diff_{name}"), &d.values, b.width, b.height, &note)?;
        }
    }
    let mut csv = String::from("metric,value\n");
    let mut summary = String::new();
    for (k, v) in &rows {
        let _ = writeln!(csv, "{k},{v}");
        let _ = writeln!(summary, "{k:<28} {v}");
    }
    write_atomic(&ctx.out_file(art::REPORT), csv.as_bytes())?;
    write_atomic(&ctx.out_file(art::SUMMARY), summary.as_bytes())?;
    print!("{summary}");
    Ok(())
}

