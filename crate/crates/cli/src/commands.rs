use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use centrank::atomic::write_atomic;
use centrank::centrality::{self, rank_of};
use centrank::decoders::MixerOrder;
use centrank::eval::{
    ablation_grid, ablation_tsv, evaluate, pca_project_2d, pca_text, rank_graph, ranking_text, spread,
    DecoderVariant,
};
use centrank::generators::{generate, generate_corpus, CorpusSpec, GeneratorSpec, NetModel};
use centrank::training::{dataset_for, load_graph, train_with, Checkpoint, Sample, TrainingConfig};
use centrank::CentralityKind;
use clap::Parser;

use crate::config::ConfigArgs;
use crate::manifest::{manifest_path, now, RunManifest, Status};
use crate::{
    AblateArgs, Cli, Cmd, EvaluateArgs, ExactArgs, GenerateArgs, PcaArgs, PredictArgs, ReplayArgs, TrainArgs,
    UsageError,
};

/// Per-invocation state shared by the subcommands.
pub struct Ctx {
    argv: Vec<String>,
    /// Resolved config recorded in a manifest; replaces file/env/flags.
    config: Option<TrainingConfig>,
}

impl Ctx {
    pub fn new(argv: Vec<String>) -> Self {
        Ctx { argv, config: None }
    }

    fn config(&self, args: &ConfigArgs) -> Result<TrainingConfig> {
        match &self.config {
            Some(c) => Ok(c.clone()),
            None => args.resolve(),
        }
    }
}

pub fn run(cmd: Cmd, ctx: Ctx) -> Result<()> {
    match cmd {
        Cmd::Generate(a) => generate_cmd(a, &ctx),
        Cmd::ComputeExact(a) => exact_cmd(a, &ctx),
        Cmd::Train(a) => train_cmd(a, &ctx),
        Cmd::Predict(a) => predict_cmd(a, &ctx),
        Cmd::Evaluate(a) => evaluate_cmd(a, &ctx),
        Cmd::Ablate(a) => ablate_cmd(a, &ctx),
        Cmd::Pca(a) => pca_cmd(a, &ctx),
        Cmd::Replay(a) => replay_cmd(a),
    }
}

/// Saves the manifest, runs `f`, then saves it again with the outcome.
fn with_manifest(mut m: RunManifest, path: &Path, f: impl FnOnce(&mut RunManifest) -> Result<()>) -> Result<()> {
    m.save(path)?;
    let result = f(&mut m);
    m.ended = Some(now());
    match &result {
        Ok(()) => m.status = Status::Ok,
        Err(e) => {
            m.status = Status::Failed;
            m.error = Some(format!("{e:#}"));
        }
    }
    m.save(path)?;
    result
}

fn write_out(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

fn read_graph(path: &Path) -> Result<centrank::Graph> {
    load_graph(path).with_context(|| format!("loading graph {}", path.display()))
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

fn generate_cmd(a: GenerateArgs, ctx: &Ctx) -> Result<()> {
    if let Some(count) = a.corpus {
        let spec = CorpusSpec::new(count, a.n_min, a.n_max, a.mix, a.seed);
        let mut m = RunManifest::new("generate", ctx.argv.clone(), a.seed);
        m.output("dir", &a.out);
        return with_manifest(m, &manifest_path(&a.out, true), |m| {
            for (i, (g, s)) in generate_corpus(&spec)?.into_iter().enumerate() {
                let path = a.out.join(format!("{}-{i:04}.txt", s.model.tag()));
                write_out(&path, &g.to_edge_list_string())?;
                m.output("graph", &path);
                let line = s.manifest_lines(g.n_edges()).lines().collect::<Vec<_>>().join(" ");
                m.setting(&format!("graph.{i:04}"), line);
            }
            Ok(())
        });
    }
    let (Some(model), Some(n)) = (a.model.as_deref(), a.n) else {
        bail!(UsageError("generate needs --model and --n, or --corpus".into()));
    };
    let spec = match NetModel::parse(model) {
        Some(NetModel::WattsStrogatz) => GeneratorSpec::ws(n, a.k, a.p, a.seed),
        Some(NetModel::BarabasiAlbert) => GeneratorSpec::ba(n, a.m, a.seed),
        Some(NetModel::PowerLawCluster) => GeneratorSpec::plc(n, a.m, a.p, a.seed),
        None => bail!(UsageError(format!("unknown model {model}"))),
    };
    let mut m = RunManifest::new("generate", ctx.argv.clone(), a.seed);
    m.output("graph", &a.out);
    with_manifest(m, &manifest_path(&a.out, false), |m| {
        let g = generate(&spec)?;
        for line in spec.manifest_lines(g.n_edges()).lines() {
            if let Some((k, v)) = line.split_once('=') {
                m.setting(k, v);
            }
        }
        write_out(&a.out, &g.to_edge_list_string())
    })
}

fn exact_cmd(a: ExactArgs, ctx: &Ctx) -> Result<()> {
    let kind = CentralityKind::parse(&a.metric).ok_or_else(|| UsageError(format!("unknown metric {}", a.metric)))?;
    let mut m = RunManifest::new("compute-exact", ctx.argv.clone(), 0);
    m.input("graph", &a.graph);
    m.output("scores", &a.out);
    m.setting("metric", kind.short_name());
    with_manifest(m, &manifest_path(&a.out, false), |_| {
        let g = read_graph(&a.graph)?;
        let c = centrality::compute(&g, kind)?;
        let rank = rank_of(&c.values);
        let mut text = String::new();
        for (v, x) in c.values.iter().enumerate() {
            let _ = writeln!(text, "{} {x} {}", g.label(v), rank[v] + 1);
        }
        write_out(&a.out, &text)
    })
}

fn train_cmd(a: TrainArgs, ctx: &Ctx) -> Result<()> {
    let cfg = ctx.config(&a.config)?;
    let mut m = RunManifest::new("train", ctx.argv.clone(), cfg.seed);
    if let Some(f) = &a.config.file {
        m.input("config", f);
    }
    for p in &cfg.train_paths {
        m.input("graph", Path::new(p));
    }
    let last = a.out.join("last.ckpt");
    let final_path = a.out.join("model.ckpt");
    let log_path = a.out.join("train_log.tsv");
    m.output("checkpoint", &final_path);
    m.output("last", &last);
    m.output("log", &log_path);
    m.config = Some(cfg.clone());
    with_manifest(m, &manifest_path(&a.out, true), |m| {
        let data = dataset_for(&cfg)?;
        m.setting("train_graphs", data.train.len());
        m.setting("test_graphs", data.test.len());
        m.save(&manifest_path(&a.out, true))?;
        let mut log = String::from("epoch\ttrain_loss\ttest_tau\tlearning_rate\tsteps\tseconds\n");
        let result = train_with(&cfg, &data, |e, model, adam| {
            let tau = e.test_tau.map_or("-".to_string(), |t| format!("{t:.6}"));
            let _ = writeln!(
                log,
                "{}\t{:.6e}\t{tau}\t{:.6e}\t{}\t{:.3}",
                e.epoch, e.train_loss, e.learning_rate, e.steps, e.seconds
            );
            write_atomic(&log_path, log.as_bytes())?;
            Checkpoint::from_model(model, Some(adam), e.epoch).save(&last)?;
            eprintln!("epoch {} loss {:.5} test_tau {tau} lr {:.3e}", e.epoch, e.train_loss, e.learning_rate);
            Ok(())
        });
        match result {
            Ok(out) => {
                out.checkpoint().save(&final_path)?;
                m.setting("epochs_run", out.history.len());
                m.setting("stopped_early", out.stopped_early);
                if let Some(t) = out.history.last().and_then(|e| e.test_tau) {
                    m.setting("final_test_tau", format!("{t:.6}"));
                }
                Ok(())
            }
            Err(f) => {
                if let Some(c) = &f.last_good {
                    c.save(&a.out.join("last_good.ckpt"))?;
                }
                Err(f.into())
            }
        }
    })
}

fn predict_cmd(a: PredictArgs, ctx: &Ctx) -> Result<()> {
    let mut m = RunManifest::new("predict", ctx.argv.clone(), a.seed.unwrap_or(0));
    m.input("checkpoint", &a.checkpoint);
    m.input("graph", &a.graph);
    m.output("ranking", &a.out);
    with_manifest(m, &manifest_path(&a.out, false), |m| {
        let ckpt = load_checkpoint(&a.checkpoint)?;
        m.seed = a.seed.unwrap_or(ckpt.config.seed);
        m.config = Some(ckpt.config.clone());
        let model = ckpt.model()?;
        let g = read_graph(&a.graph)?;
        let r = rank_graph(&model, &g, a.seed)?;
        m.setting("nodes", r.n_nodes);
        m.setting("seconds", format!("{:.3}", r.seconds));
        write_out(&a.out, &ranking_text(&g, &r))
    })
}

fn evaluate_cmd(a: EvaluateArgs, ctx: &Ctx) -> Result<()> {
    if a.graphs.is_empty() && !a.test_split {
        bail!(UsageError("evaluate needs --graph or --test-split".into()));
    }
    let mut m = RunManifest::new("evaluate", ctx.argv.clone(), a.seed.unwrap_or(0));
    m.input("checkpoint", &a.checkpoint);
    for g in &a.graphs {
        m.input("graph", g);
    }
    m.output("report", &a.out);
    m.setting("runs", a.runs);
    with_manifest(m, &manifest_path(&a.out, false), |m| {
        let ckpt = load_checkpoint(&a.checkpoint)?;
        let seed = a.seed.unwrap_or(ckpt.config.seed);
        m.seed = seed;
        m.config = Some(ckpt.config.clone());
        let model = ckpt.model()?;
        let mut datasets = Vec::new();
        for p in &a.graphs {
            datasets.push(Sample::new(p.display().to_string(), read_graph(p)?, ckpt.config.metric)?);
        }
        if a.test_split {
            datasets.extend(dataset_for(&ckpt.config)?.test);
        }
        let report = evaluate(&model, &datasets, a.runs, seed)?;
        m.setting("mean_tau", format!("{:.6}", report.mean_tau()));
        write_out(&a.out, &report.to_tsv())
    })
}

fn ablate_cmd(a: AblateArgs, ctx: &Ctx) -> Result<()> {
    let cfg = ctx.config(&a.config)?;
    let mut variants = Vec::new();
    if a.mlp {
        variants.push(DecoderVariant::Mlp);
    }
    for o in &a.orders {
        let order = MixerOrder::parse(o).ok_or_else(|| UsageError(format!("unknown mixer order {o}")))?;
        variants.push(DecoderVariant::Mixer(order));
    }
    let mut m = RunManifest::new("ablate", ctx.argv.clone(), cfg.seed);
    m.output("table", &a.out);
    m.config = Some(cfg.clone());
    m.setting(
        "variants",
        variants.iter().map(|v| v.label()).collect::<Vec<_>>().join(","),
    );
    m.setting("dims", a.dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(","));
    with_manifest(m, &manifest_path(&a.out, false), |_| {
        let data = dataset_for(&cfg)?;
        let rows = ablation_grid(&cfg, &data, &variants, &a.dims)?;
        let mut text = ablation_tsv(&rows);
        for v in &variants {
            if let Some(s) = spread(&rows, *v) {
                let _ = writeln!(text, "# spread {} {s:.6}", v.label());
            }
        }
        write_out(&a.out, &text)
    })
}

fn pca_cmd(a: PcaArgs, ctx: &Ctx) -> Result<()> {
    let mut m = RunManifest::new("pca", ctx.argv.clone(), 0);
    m.input("checkpoint", &a.checkpoint);
    m.input("graph", &a.graph);
    m.output("coords", &a.out);
    with_manifest(m, &manifest_path(&a.out, false), |m| {
        let ckpt = load_checkpoint(&a.checkpoint)?;
        m.seed = ckpt.config.seed;
        m.config = Some(ckpt.config.clone());
        let model = ckpt.model()?;
        let g = read_graph(&a.graph)?;
        let emb = model.embed(&g)?;
        let coords = pca_project_2d(&emb.h)?;
        let labels: Vec<String> = (0..g.n_nodes()).map(|v| g.label(v)).collect();
        write_out(&a.out, &pca_text(&labels, &coords)?)
    })
}

/// Replaces the value of `--out` in a recorded command line.
fn replace_out(argv: &[String], out: &Path) -> Vec<String> {
    let mut res = Vec::with_capacity(argv.len());
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        if a == "--out" {
            res.push(a.clone());
            it.next();
            res.push(out.display().to_string());
        } else if a.starts_with("--out=") {
            res.push(format!("--out={}", out.display()));
        } else {
            res.push(a.clone());
        }
    }
    res
}

fn replay_cmd(a: ReplayArgs) -> Result<()> {
    let recorded = RunManifest::load(&a.manifest)?;
    if recorded.subcommand == "replay" {
        bail!(UsageError("cannot replay a replay manifest".into()));
    }
    let argv: Vec<String> = match &a.out {
        Some(out) => replace_out(&recorded.argv, out),
        None => recorded.argv.clone(),
    };
    let cli = Cli::try_parse_from(std::iter::once("centrank".to_string()).chain(argv.iter().cloned()))
        .map_err(|e| UsageError(format!("manifest command line does not parse: {e}")))?;
    let ctx = Ctx {
        argv,
        config: match &cli.command {
            Cmd::Train(_) | Cmd::Ablate(_) => recorded.config.clone(),
            _ => None,
        },
    };
    run(cli.command, ctx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn out_is_replaced() {
        let argv: Vec<String> = ["train", "--out", "a", "--seed", "1"].iter().map(|s| s.to_string()).collect();
        assert_eq!(replace_out(&argv, Path::new("b"))[2], "b");
        let argv = vec!["predict".to_string(), "--out=a".to_string()];
        assert_eq!(replace_out(&argv, Path::new("b"))[1], "--out=b");
    }
}
