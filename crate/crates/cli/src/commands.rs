use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::info;
use serde::Serialize;

use scoregraph::correction::{generate_pseudo_dataset, train_pseudo};
use scoregraph::graphs::{
    gen_community_small, gen_grid, load_dataset, save_dataset, CommunityParams, GridParams,
};
use scoregraph::metrics::{evaluate_with, perturbation_sweep, score_norm_trace, ScoreTrace};
use scoregraph::oracle::{GaussianData, OracleScore};
use scoregraph::rng::derive_seed;
use scoregraph::sampler::{generate_graphs, GraphShape, Sampler};
use scoregraph::scorenet::{load_checkpoint, save_checkpoint, Checkpoint, ModelRole, Trainer};
use scoregraph::{Dataset, NoiseSchedule, SamplerConfig, ScoreFn, ScoreModel};

use crate::config::{DataKind, GateSpec, RunConfig};
use crate::report;
use crate::{
    CliError, DiagnoseArgs, EvalArgs, MakeDataArgs, PseudoArgs, SampleArgs, SamplerFlags, TrainArgs,
};

const PSEUDO_DATA_STREAM: u64 = 11;
const PSEUDO_TRAIN_STREAM: u64 = 12;

type CliResult<T = ()> = Result<T, CliError>;

struct RunDir(PathBuf);

impl RunDir {
    fn new(cfg: &RunConfig) -> Self {
        RunDir(cfg.out_dir())
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.0.join(rel)
    }

    fn train_data(&self) -> PathBuf {
        self.path("data/train.jsonl")
    }

    fn test_data(&self) -> PathBuf {
        self.path("data/test.jsonl")
    }

    fn model(&self) -> PathBuf {
        self.path("checkpoints/model.ckpt")
    }

    fn pseudo(&self) -> PathBuf {
        self.path("checkpoints/pseudo.ckpt")
    }

    fn samples(&self) -> PathBuf {
        self.path("samples/samples.jsonl")
    }

    fn write(&self, rel: &str, contents: &str) -> CliResult<PathBuf> {
        let p = self.path(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&p, contents)?;
        Ok(p)
    }

    fn append(&self, rel: &str, contents: &str) -> CliResult<()> {
        let p = self.path(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut f = fs::OpenOptions::new().create(true).append(true).open(p)?;
        f.write_all(contents.as_bytes())?;
        Ok(())
    }

    /// Resolved configuration of the command that just ran.
    fn snapshot(&self, cfg: &RunConfig, command: &str) -> CliResult<()> {
        self.write(&format!("config.{command}.toml"), &cfg.to_toml())?;
        Ok(())
    }
}

fn existing(p: &Path, hint: &str) -> CliResult<()> {
    if p.exists() {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "{} does not exist ({hint})",
            p.display()
        )))
    }
}

fn read_data(p: &Path, hint: &str) -> CliResult<Dataset> {
    existing(p, hint)?;
    Ok(load_dataset(p)?)
}

fn same_schedule(a: &NoiseSchedule, b: &NoiseSchedule) -> bool {
    a.kind == b.kind && a.bounds() == b.bounds()
}

fn read_model(p: &Path, cfg: &RunConfig, role: ModelRole, hint: &str) -> CliResult<Checkpoint> {
    existing(p, hint)?;
    let ck = load_checkpoint(p)?;
    if ck.model.role != role {
        return Err(CliError::Validation(format!(
            "{} holds a {:?} model, expected {:?}",
            p.display(),
            ck.model.role,
            role
        )));
    }
    let (sx, sa) = cfg.schedule.build()?;
    for (name, want, got) in [
        ("node", sx, ck.model.schedule_x),
        ("edge", sa, ck.model.schedule_a),
    ] {
        if !same_schedule(&want, &got) {
            return Err(CliError::Validation(format!(
                "schedule mismatch on the {name} channel: config has {} ({}, {}), checkpoint {} has {} ({}, {})",
                want.kind.as_str(),
                want.bounds().0,
                want.bounds().1,
                p.display(),
                got.kind.as_str(),
                got.bounds().0,
                got.bounds().1
            )));
        }
    }
    Ok(ck)
}

fn apply_sampler_flags(cfg: &mut RunConfig, f: &SamplerFlags) -> CliResult {
    let s = &mut cfg.sampler;
    if let Some(v) = f.m {
        s.m = v;
    }
    macro_rules! set {
        ($($field:ident => $target:ident),*) => {
            $(if let Some(v) = f.$field { s.$target = v; })*
        };
    }
    set!(lambda1 => lambda1, omega1 => omega1, lambda2 => lambda2, omega2 => omega2,
         tc => tc, corrector => corrector, steps => steps, snr => snr_r);
    if let Some(g) = &f.gate {
        s.gate = match g.as_str() {
            "below" => GateSpec::Below,
            "above" => GateSpec::Above,
            other => {
                return Err(CliError::Validation(format!(
                    "--gate must be `below` or `above`, got `{other}`"
                )))
            }
        };
    }
    Ok(())
}

pub fn make_data(cfg: &mut RunConfig, a: &MakeDataArgs) -> CliResult {
    if let Some(c) = a.count {
        cfg.data.count = c;
    }
    cfg.validate()?;
    let dir = RunDir::new(cfg);
    let d = &cfg.data;
    let data = match d.kind {
        DataKind::Community => gen_community_small(
            &CommunityParams {
                count: d.count,
                v_min: d.v_min,
                v_max: d.v_max,
                p_intra: d.p_intra,
                inter_rate: d.inter_rate,
                feature_dim: d.feature_dim,
            },
            cfg.seed,
        )?,
        DataKind::Grid => gen_grid(
            &GridParams {
                count: d.count,
                rows: (d.grid_rows[0], d.grid_rows[1]),
                cols: (d.grid_cols[0], d.grid_cols[1]),
                feature_dim: d.feature_dim,
            },
            cfg.seed,
        )?,
        DataKind::File => load_dataset(d.path.as_ref().expect("validated"))?,
    };
    let (train, test) = data.split(d.test_fraction);
    save_dataset(&data, dir.path("data/graphs.jsonl"))?;
    save_dataset(&train, dir.train_data())?;
    save_dataset(&test, dir.test_data())?;
    dir.snapshot(cfg, "make-data")?;
    println!(
        "wrote {} graphs ({} train, {} test) to {}",
        data.len(),
        train.len(),
        test.len(),
        dir.path("data").display()
    );
    Ok(())
}

pub fn train(cfg: &mut RunConfig, a: &TrainArgs) -> CliResult {
    if let Some(n) = a.iterations {
        cfg.train.iterations = n;
    }
    cfg.validate()?;
    let dir = RunDir::new(cfg);
    let data_path = a.data.clone().unwrap_or_else(|| dir.train_data());
    let data = read_data(&data_path, "run make-data first or pass --data")?;
    let (sx, sa) = cfg.schedule.build()?;
    let arch = cfg.arch.build(data.feature_dim);
    let tcfg = cfg.train.build(cfg.seed);
    let mut trainer = match &a.resume {
        Some(p) => {
            let ck = read_model(p, cfg, ModelRole::Pretrained, "--resume")?;
            if ck.model.arch != arch {
                return Err(CliError::Validation(format!(
                    "architecture mismatch: config {:?}, checkpoint {:?}",
                    arch, ck.model.arch
                )));
            }
            let opt = ck.optimizer.ok_or_else(|| {
                CliError::Validation(format!("{} has no optimizer state", p.display()))
            })?;
            info!("resuming at iteration {}", ck.iteration);
            Trainer::resume(ck.model, tcfg, opt, ck.iteration)?
        }
        None => Trainer::new(ScoreModel::new(arch, sx, sa, cfg.seed)?, tcfg)?,
    };
    if trainer.iteration > tcfg.iterations {
        return Err(CliError::Validation(format!(
            "checkpoint is at iteration {}, beyond the requested {}",
            trainer.iteration, tcfg.iterations
        )));
    }
    let start = trainer.iteration;
    if start == 0 {
        dir.write("reports/train_loss.tsv", "# iteration\tloss\n")?;
    }
    let chunk = match cfg.train.checkpoint_every {
        0 => tcfg.iterations.max(1),
        k => k,
    };
    let provenance = format!("train: {}, seed = {}", data.provenance, cfg.seed);
    let mut logged = start;
    while trainer.iteration < tcfg.iterations {
        let until = (trainer.iteration + chunk).min(tcfg.iterations);
        let report_every = (tcfg.iterations / 10).max(1);
        while trainer.iteration < until {
            let loss = trainer.step(&data)?;
            if trainer.iteration % report_every == 0 {
                info!("iteration {} loss {loss:.4}", trainer.iteration);
            }
        }
        let lines: String = trainer.losses[logged - start..]
            .iter()
            .enumerate()
            .map(|(k, l)| format!("{}\t{l}\n", logged + k + 1))
            .collect();
        dir.append("reports/train_loss.tsv", &lines)?;
        logged = trainer.iteration;
        save_checkpoint(
            &Checkpoint {
                model: trainer.model.clone(),
                optimizer: Some(trainer.optimizer.clone()),
                iteration: trainer.iteration,
                provenance: provenance.clone(),
            },
            dir.model(),
        )?;
    }
    dir.snapshot(cfg, "train")?;
    let tail = trainer.losses.len().min(100);
    let mean_tail = trainer.losses[trainer.losses.len() - tail..]
        .iter()
        .sum::<f64>()
        / tail.max(1) as f64;
    println!(
        "trained to iteration {} (mean loss over last {tail}: {mean_tail:.4}); checkpoint {}",
        trainer.iteration,
        dir.model().display()
    );
    Ok(())
}

pub fn pseudo(cfg: &mut RunConfig, a: &PseudoArgs) -> CliResult {
    if let Some(n) = a.count {
        cfg.pseudo.count = n;
    }
    if let Some(n) = a.iterations {
        cfg.pseudo.iterations = n;
    }
    cfg.validate()?;
    let dir = RunDir::new(cfg);
    let model_path = a.model.clone().unwrap_or_else(|| dir.model());
    let ck = read_model(&model_path, cfg, ModelRole::Pretrained, "run train first")?;
    let data_path = a.data.clone().unwrap_or_else(|| dir.train_data());
    let data = read_data(&data_path, "run make-data first or pass --data")?;
    let model = ck.model;
    let (sx, sa) = (model.schedule_x, model.schedule_a);
    let n = match cfg.pseudo.count {
        0 => data.len(),
        n => n,
    };
    let mut baseline = cfg.sampler.build(cfg.seed)?;
    baseline.m = 0;
    baseline.lambda1 = 0.0;
    baseline.omega1 = 1.0;
    baseline.lambda2 = 0.0;
    baseline.omega2 = 1.0;
    if cfg.pseudo.steps > 0 {
        baseline.n_steps = cfg.pseudo.steps;
    }
    let shape = GraphShape::from_dataset(&data);
    let pseudo_data = generate_pseudo_dataset(
        &model,
        n,
        &sx,
        &sa,
        &baseline,
        &shape,
        derive_seed(cfg.seed, PSEUDO_DATA_STREAM),
    )?;
    save_dataset(&pseudo_data, dir.path("pseudo/graphs.jsonl"))?;
    info!("generated {n} pseudo graphs");
    let mut arch = model.arch;
    if cfg.pseudo.hidden_dim > 0 {
        arch.hidden_dim = cfg.pseudo.hidden_dim;
    }
    let mut tcfg = cfg.train.build(derive_seed(cfg.seed, PSEUDO_TRAIN_STREAM));
    if cfg.pseudo.iterations > 0 {
        tcfg.iterations = cfg.pseudo.iterations;
    }
    let out = train_pseudo(&pseudo_data, arch, sx, sa, &tcfg)?;
    save_checkpoint(
        &Checkpoint {
            model: out.model,
            optimizer: None,
            iteration: tcfg.iterations,
            provenance: format!(
                "pseudo: {} from {}",
                pseudo_data.provenance,
                model_path.display()
            ),
        },
        dir.pseudo(),
    )?;
    dir.snapshot(cfg, "pseudo")?;
    println!(
        "pseudo network trained on {n} generated graphs; checkpoint {}",
        dir.pseudo().display()
    );
    Ok(())
}

/// Pretrained model and, when the sampler needs one, the pseudo model.
fn models(
    cfg: &RunConfig,
    scfg: &SamplerConfig,
    dir: &RunDir,
    model: &Option<PathBuf>,
    pseudo: &Option<PathBuf>,
) -> CliResult<(ScoreModel, Option<ScoreModel>)> {
    let mp = model.clone().unwrap_or_else(|| dir.model());
    let m = read_model(
        &mp,
        cfg,
        ModelRole::Pretrained,
        "run train first or pass --model",
    )?
    .model;
    let p = if scfg.needs_pseudo() {
        let pp = pseudo.clone().unwrap_or_else(|| dir.pseudo());
        Some(
            read_model(
                &pp,
                cfg,
                ModelRole::Pseudo,
                "lambda > 0 needs a pseudo network: run pseudo first or pass --pseudo",
            )?
            .model,
        )
    } else {
        None
    };
    Ok((m, p))
}

pub fn sample(cfg: &mut RunConfig, a: &SampleArgs) -> CliResult {
    apply_sampler_flags(cfg, &a.sampler)?;
    if let Some(c) = a.count {
        cfg.sampler.count = c;
    }
    cfg.validate()?;
    let scfg = cfg.sampler.build(cfg.seed)?;
    let dir = RunDir::new(cfg);
    let (model, pseudo) = models(cfg, &scfg, &dir, &a.model, &a.pseudo)?;
    let data_path = a.data.clone().unwrap_or_else(|| dir.train_data());
    let data = read_data(&data_path, "run make-data first or pass --data")?;
    let count = match cfg.sampler.count {
        0 if dir.test_data().exists() => load_dataset(dir.test_data())?.len(),
        0 => data.len(),
        n => n,
    };
    let shape = GraphShape::from_dataset(&data);
    let gen = generate_graphs(
        &model,
        pseudo.as_ref().map(|p| p as &dyn ScoreFn),
        &scfg,
        &model.schedule_x,
        &model.schedule_a,
        &shape,
        count,
    )?;
    let out = a.output.clone().unwrap_or_else(|| dir.samples());
    save_dataset(&gen, &out)?;
    dir.snapshot(cfg, "sample")?;
    println!(
        "wrote {count} graphs to {} ({})",
        out.display(),
        gen.provenance
    );
    Ok(())
}

#[derive(Serialize)]
struct EvalRecord<'a> {
    label: &'a str,
    generated: String,
    reference: String,
    count: usize,
    degree: f64,
    clustering: f64,
    orbit: f64,
    average: f64,
}

pub fn eval(cfg: &mut RunConfig, a: &EvalArgs) -> CliResult {
    cfg.validate()?;
    let dir = RunDir::new(cfg);
    let gp = a.gen.clone().unwrap_or_else(|| dir.samples());
    let rp = a.reference.clone().unwrap_or_else(|| dir.test_data());
    let gen = read_data(&gp, "run sample first or pass --gen")?;
    let reference = read_data(&rp, "run make-data first or pass --ref")?;
    let r = evaluate_with(&gen, &reference, cfg.eval.sigma)?;
    let label = a.label.clone().unwrap_or_else(|| {
        gp.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "generated".into())
    });
    let table = report::mmd_table(&[(label.clone(), r)]);
    print!("{table}");
    dir.write("reports/eval.txt", &table)?;
    let rec = EvalRecord {
        label: &label,
        generated: gp.display().to_string(),
        reference: rp.display().to_string(),
        count: gen.len().min(reference.len()),
        degree: r.degree,
        clustering: r.clustering,
        orbit: r.orbit,
        average: r.average,
    };
    let line = serde_json::to_string(&rec).map_err(|e| CliError::Runtime(e.to_string()))?;
    dir.append("reports/eval.jsonl", &format!("{line}\n"))?;
    dir.snapshot(cfg, "eval")?;
    Ok(())
}

fn moments(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (
        m,
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0),
    )
}

/// Alignment and end-to-end sampling under exact Gaussian scores, one-node chains.
fn oracle_report(cfg: &RunConfig, scfg: &SamplerConfig) -> CliResult<(String, bool)> {
    let d = &cfg.diagnose;
    let (sx, sa) = cfg.schedule.build()?;
    let g = GaussianData::scalar(d.oracle_mean, d.oracle_var)?;
    let oracle = OracleScore::new(g.clone(), g.clone(), sx, sa);
    let masks = vec![vec![true]; d.oracle_chains];
    let plain = SamplerConfig {
        m: d.oracle_m,
        lambda1: 0.0,
        omega1: 1.0,
        lambda2: 0.0,
        omega2: 1.0,
        corrector: false,
        ..*scfg
    };
    let sampler = Sampler::new(&oracle, None, plain, &sx, &sa)?;
    let mut states = sampler.init(&masks, 1);
    sampler.align_start(&mut states, None)?;
    let xs: Vec<f64> = states.iter().map(|s| s.chain.x[[0, 0]]).collect();
    let (want_m, want_v) = g.marginal(&sx.with_steps(plain.n_steps)?, plain.horizon(), 0)?;
    let (m, v) = moments(&xs);
    let n = xs.len() as f64;
    let se_m = (want_v / n).sqrt();
    let se_v = want_v * (2.0 / (n - 1.0)).sqrt();
    let ok_m = (m - want_m).abs() <= 3.0 * se_m;
    let ok_v = (v - want_v).abs() <= 3.0 * se_v;
    let mut s = String::new();
    s += &format!(
        "oracle data N({}, {}), {} one-node chains, M = {}, N = {}\n",
        d.oracle_mean, d.oracle_var, d.oracle_chains, plain.m, plain.n_steps
    );
    s += &format!(
        "aligned mean      {m:.5}  target {want_m:.5}  3SE {:.5}  {}\n",
        3.0 * se_m,
        if ok_m { "PASS" } else { "FAIL" }
    );
    s += &format!(
        "aligned variance  {v:.5}  target {want_v:.5}  3SE {:.5}  {}\n",
        3.0 * se_v,
        if ok_v { "PASS" } else { "FAIL" }
    );
    for (name, m_align) in [("noise start", 0), ("aligned start", plain.m)] {
        let c = SamplerConfig {
            m: m_align,
            ..plain
        };
        let chains = scoregraph::sample(&oracle, None, &c, &sx, &sa, &masks, 1)?;
        let xs: Vec<f64> = chains.iter().map(|c| c.x[[0, 0]]).collect();
        let (fm, fv) = moments(&xs);
        s += &format!(
            "{name:<14} final mean {fm:.5} (err {:.5})  variance {fv:.5} (err {:.5})\n",
            (fm - d.oracle_mean).abs(),
            (fv - d.oracle_var).abs()
        );
    }
    Ok((s, ok_m && ok_v))
}

fn write_trace(dir: &RunDir, channel: &str, tr: &ScoreTrace) -> CliResult {
    for (which, ys) in [
        ("forward", &tr.forward_norms),
        ("reverse", &tr.reverse_norms),
    ] {
        dir.write(
            &format!("reports/trace_{channel}_{which}.tsv"),
            &report::two_columns(("t", "mean_score_norm"), &tr.times, ys),
        )?;
    }
    Ok(())
}

pub fn diagnose(cfg: &mut RunConfig, a: &DiagnoseArgs) -> CliResult {
    apply_sampler_flags(cfg, &a.sampler)?;
    if let Some(times) = &a.sweep {
        cfg.diagnose.sweep = times.clone();
    }
    if a.true_start {
        cfg.diagnose.sweep_true_start = true;
    }
    if let Some(n) = a.oracle_chains {
        cfg.diagnose.oracle_chains = n;
    }
    cfg.validate()?;
    let scfg = cfg.sampler.build(cfg.seed)?;
    let dir = RunDir::new(cfg);
    let (sx, sa) = cfg.schedule.build()?;
    let table = report::max_perturbation_table(&[("node", sx), ("edge", sa)]);
    print!("{table}");
    dir.write("reports/max_perturbation.txt", &table)?;
    if a.table_only {
        dir.snapshot(cfg, "diagnose")?;
        return Ok(());
    }
    if a.oracle {
        if cfg.diagnose.oracle_chains < 2 {
            return Err(CliError::Validation("--oracle-chains must be ≥ 2".into()));
        }
        let (rep, ok) = oracle_report(cfg, &scfg)?;
        print!("{rep}");
        dir.write("reports/oracle.txt", &rep)?;
        dir.snapshot(cfg, "diagnose")?;
        return if ok {
            Ok(())
        } else {
            Err(CliError::Runtime("oracle moment check failed".into()))
        };
    }
    let (model, pseudo) = models(cfg, &scfg, &dir, &a.model, &a.pseudo)?;
    let pseudo_ref = pseudo.as_ref().map(|p| p as &dyn ScoreFn);
    let data_path = a.data.clone().unwrap_or_else(|| dir.train_data());
    let data = read_data(&data_path, "run make-data first or pass --data")?;
    let traces = score_norm_trace(
        &model,
        pseudo_ref,
        &data,
        &scfg,
        &model.schedule_x,
        &model.schedule_a,
    )?;
    write_trace(&dir, "node", &traces.node)?;
    write_trace(&dir, "edge", &traces.edge)?;
    println!(
        "score-norm traces written to {}",
        dir.path("reports").display()
    );
    if !cfg.diagnose.sweep.is_empty() {
        let rp = a.reference.clone().unwrap_or_else(|| dir.test_data());
        let reference = read_data(&rp, "run make-data first or pass --ref")?;
        let start = cfg.diagnose.sweep_true_start.then_some(&data);
        let rows = perturbation_sweep(
            &model,
            pseudo_ref,
            &scfg,
            &model.schedule_x,
            &model.schedule_a,
            &cfg.diagnose.sweep,
            &reference,
            start,
        )?;
        let labelled: Vec<(String, _)> = rows.iter().map(|(t, r)| (format!("t={t}"), *r)).collect();
        let table = report::mmd_table(&labelled);
        print!("{table}");
        dir.write("reports/sweep.txt", &table)?;
    }
    dir.snapshot(cfg, "diagnose")?;
    Ok(())
}
