//! The five subcommands. Each writes its artifacts into a run directory
//! and returns a short summary that also lands in the manifest.

use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use serde_json::{json, Value};
use subgoal_core::env::{generate_benchmark, Benchmark, Simulator, Split, TaskSpec};
use subgoal_core::eval::{
    ablation_sweep, ablation_tsv, compare_criteria, confusion, evaluate, to_tsv, topk_recall,
    CriteriaRow, EvalRecord, Slot,
};
use subgoal_core::lm::format_pairs;
use subgoal_core::ranker::{
    collect_from_candidates, decode_all, f_score, oracle_candidates, run_policy, save_dataset, scored_candidates,
    success_rates, train, Episode, Featurizer, RankerError, RankerParams, ScoredPlan,
};
use subgoal_core::rerank::{rank, RankCriterion};

use crate::config::RunConfig;
use crate::run::{self, RunDir};

const RECALL_KS: [usize; 3] = [1, 5, 10];

pub fn generate(cfg: &RunConfig, run_dir: Option<&Path>) -> anyhow::Result<(RunDir, Value)> {
    let sim = run::simulator(cfg)?;
    let bench = generate_benchmark(&cfg.generator, &sim)?;
    let mut rd = RunDir::create(cfg, "generate-benchmark", run_dir)?;
    bench.save(&rd.path)?;
    rd.record("scenes.jsonl");
    rd.record("tasks.jsonl");
    rd.write("catalog.tsv", &sim.catalog.to_tsv())?;
    let pool: Vec<_> = bench.pairs(Split::Pool).into_iter().map(|(_, p)| p).collect();
    rd.write("pool_pairs.txt", &format_pairs(&pool))?;
    let counts: serde_json::Map<String, Value> = [Split::Pool, Split::Train, Split::Eval, Split::Ambiguity]
        .iter()
        .map(|&s| (s.to_string(), json!(bench.split(s).len())))
        .collect();
    Ok((rd, json!({ "scenes": bench.scenes.len(), "tasks": counts })))
}

#[derive(Serialize)]
struct HypothesisRow {
    plan: String,
    logp_forward: f64,
    logp_reverse: Option<f64>,
    combined: Option<f64>,
}

#[derive(Serialize)]
struct PredictionRow<'a> {
    task: &'a str,
    split: Split,
    instruction: &'a str,
    gold: String,
    hypotheses: Vec<HypothesisRow>,
}

fn criteria_for(cfg: &RunConfig) -> anyhow::Result<Vec<RankCriterion>> {
    let mut out = vec![RankCriterion::Forward, RankCriterion::Reverse];
    let wmi = RankCriterion::weighted_mi(cfg.rank.lambda)?;
    out.push(wmi);
    let chosen = cfg.criterion()?;
    if !out.contains(&chosen) {
        out.push(chosen);
    }
    Ok(out)
}

fn recall_rows(split: Split, label: &str, records: &[EvalRecord]) -> anyhow::Result<Vec<Vec<String>>> {
    RECALL_KS
        .iter()
        .map(|&k| Ok(vec![split.to_string(), label.to_string(), k.to_string(), format!("{:.4}", topk_recall(records, k)?)]))
        .collect()
}

fn criteria_rows(split: Split, rows: &[CriteriaRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| vec![split.to_string(), r.criterion.clone(), format!("{:.4}", r.top1)])
        .collect()
}

pub fn predict(cfg: &RunConfig, run_dir: Option<&Path>) -> anyhow::Result<(RunDir, Value)> {
    let sim = run::simulator(cfg)?;
    let bench = run::benchmark(cfg, &sim)?;
    let pairs = run::prompt_pairs(cfg, &bench, &sim.catalog)?;
    let planner = run::planner(cfg, pairs, &sim.catalog)?;
    let criterion = planner.cfg.criterion;
    let criteria = criteria_for(cfg)?;
    let mut rd = RunDir::create(cfg, "predict", run_dir)?;
    rd.write("prompt_pairs.txt", &format_pairs(&planner.pairs))?;

    let (mut preds, mut recall, mut crit) = (String::new(), Vec::new(), Vec::new());
    let mut summary = serde_json::Map::new();
    for &split in &cfg.predict.splits {
        let tasks: Vec<&TaskSpec> = run::tasks(&bench, &[split], cfg.predict.limit).into_iter().map(|(_, t)| t).collect();
        let records = evaluate(&planner, &tasks)?;
        for r in &records {
            let row = PredictionRow {
                task: &r.task,
                split,
                instruction: &r.instruction,
                gold: r.gold.to_string(),
                hypotheses: rank(&r.hypotheses, criterion)?
                    .into_iter()
                    .map(|h| HypothesisRow {
                        plan: h.plan.to_string(),
                        logp_forward: h.logp_forward,
                        logp_reverse: h.logp_reverse,
                        combined: h.combined,
                    })
                    .collect(),
            };
            preds.push_str(&serde_json::to_string(&row)?);
            preds.push('\n');
        }
        recall.extend(recall_rows(split, &criterion.to_string(), &records)?);
        crit.extend(criteria_rows(split, &compare_criteria(&records, &criteria)?));
        summary.insert(
            split.to_string(),
            json!({ "tasks": records.len(), "top1": topk_recall(&records, 1)?, "top10": topk_recall(&records, 10)? }),
        );
    }
    rd.write("predictions.jsonl", &preds)?;
    rd.write("recall.tsv", &to_tsv(&["split", "ranking", "k", "recall"], &recall))?;
    rd.write("criteria.tsv", &to_tsv(&["split", "criterion", "top1_recall"], &crit))?;
    Ok((rd, Value::Object(summary)))
}

pub fn feedback_train(cfg: &RunConfig, run_dir: Option<&Path>) -> anyhow::Result<(RunDir, Value)> {
    let sim = run::simulator(cfg)?;
    let bench = run::benchmark(cfg, &sim)?;
    let pairs = run::prompt_pairs(cfg, &bench, &sim.catalog)?;
    let planner = run::planner(cfg, pairs, &sim.catalog)?;
    let featurizer = Featurizer::new(sim.catalog.clone(), cfg.features.clone())?;
    let all = bench.split(Split::Train);
    let tasks = &all[..all.len().min(cfg.feedback.budget)];
    let decoded = decode_all(&planner, tasks, cfg.feedback.k)?;
    let dataset = collect_from_candidates(tasks, &decoded, &bench, &sim)?;
    let report = match train(&dataset, &featurizer, &cfg.train, None) {
        Err(RankerError::EmptyDataset) => {
            return Err(anyhow::Error::new(RankerError::EmptyDataset).context(format!(
                "{} train instructions tried with k = {}; raise feedback.budget or feedback.k, \
                 or check that the benchmark has a train split",
                tasks.len(),
                cfg.feedback.k
            )))
        }
        r => r?,
    };
    let mut rd = RunDir::create(cfg, "feedback-train", run_dir)?;
    save_dataset(&rd.file("feedback.jsonl"), &dataset)?;
    rd.record("feedback.jsonl");
    report.params.save(&rd.file("params.txt"))?;
    rd.record("params.txt");
    let loss: Vec<Vec<String>> = report
        .losses
        .iter()
        .enumerate()
        .map(|(e, l)| vec![e.to_string(), format!("{l:.6}")])
        .collect();
    rd.write("loss.tsv", &to_tsv(&["epoch", "loss"], &loss))?;
    let summary = json!({
        "instructions": tasks.len(),
        "examples": dataset.len(),
        "dim": report.params.dim(),
        "loss_first": report.losses.first(),
        "loss_last": report.losses.last(),
    });
    Ok((rd, summary))
}

/// Candidates re-ordered by the ranker's score in the task's initial state
/// (stable, so ties keep the decoded order).
fn initial_order(
    task: &TaskSpec,
    cands: &[ScoredPlan],
    params: &RankerParams,
    featurizer: &Featurizer,
    bench: &Benchmark,
    sim: &Simulator,
) -> anyhow::Result<Vec<ScoredPlan>> {
    let state = sim.reset(bench.scene_of(task), task)?;
    let mut scored = cands
        .iter()
        .map(|c| Ok((f_score(&c.plan, &task.instruction, &state, params, featurizer)?, c.clone())))
        .collect::<anyhow::Result<Vec<_>>>()?;
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    Ok(scored.into_iter().map(|(s, c)| ScoredPlan { plan: c.plan, score: s }).collect())
}

struct Row<'a> {
    name: &'static str,
    records: Vec<EvalRecord>,
    candidates: Vec<Vec<ScoredPlan>>,
    params: &'a RankerParams,
}

pub fn eval(cfg: &RunConfig, run_dir: Option<&Path>) -> anyhow::Result<(RunDir, Value)> {
    let sim = run::simulator(cfg)?;
    let bench = run::benchmark(cfg, &sim)?;
    let pairs = run::prompt_pairs(cfg, &bench, &sim.catalog)?;
    let planner = run::planner(cfg, pairs, &sim.catalog)?;
    let criterion = planner.cfg.criterion;
    let criteria = criteria_for(cfg)?;
    let featurizer = Featurizer::new(sim.catalog.clone(), cfg.features.clone())?;
    let zeros = RankerParams::zeros(featurizer.dim());
    let trained = match &cfg.eval.params {
        Some(p) => {
            RunConfig::require_file("eval.params", p)?;
            let params = RankerParams::load(p)?;
            params.check(&featurizer).with_context(|| format!("ranker params {}", p.display()))?;
            Some(params)
        }
        None => None,
    };
    let mut rd = RunDir::create(cfg, "eval", run_dir)?;

    let (mut metrics, mut recall, mut crit) = (Vec::new(), Vec::new(), Vec::new());
    let (mut conf_obj, mut conf_act) = (Vec::new(), Vec::new());
    let mut episodes_out: Vec<Value> = Vec::new();
    let mut summary = serde_json::Map::new();
    for &split in &cfg.eval.splits {
        let tasks: Vec<&TaskSpec> = run::tasks(&bench, &[split], cfg.eval.limit).into_iter().map(|(_, t)| t).collect();
        let records = evaluate(&planner, &tasks)?;
        crit.extend(criteria_rows(split, &compare_criteria(&records, &criteria)?));
        let predicted: Vec<Vec<ScoredPlan>> = records
            .iter()
            .map(|r| Ok(scored_candidates(&rank(&r.hypotheses, criterion)?, criterion, cfg.feedback.k)?))
            .collect::<anyhow::Result<_>>()?;

        let mut rows = vec![Row {
            name: "predicted",
            records: records.clone(),
            candidates: predicted.clone(),
            params: &zeros,
        }];
        if let Some(params) = &trained {
            let reordered = tasks
                .iter()
                .zip(&predicted)
                .map(|(t, c)| initial_order(t, c, params, &featurizer, &bench, &sim))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let recs = records
                .iter()
                .zip(&reordered)
                .map(|(r, c)| EvalRecord {
                    predicted: c.iter().map(|p| p.plan.clone()).collect(),
                    ..r.clone()
                })
                .collect();
            rows.push(Row {
                name: "reranked",
                records: recs,
                candidates: predicted.clone(),
                params,
            });
        }
        let oracle = oracle_candidates(&tasks);
        rows.push(Row {
            name: "oracle",
            records: records
                .iter()
                .map(|r| EvalRecord {
                    predicted: vec![r.gold.clone()],
                    ..r.clone()
                })
                .collect(),
            candidates: oracle,
            params: &zeros,
        });

        let mut split_summary = serde_json::Map::new();
        for row in &rows {
            let episodes: Vec<Episode> =
                run_policy(&tasks, &row.candidates, row.params, &featurizer, &bench, &sim, &cfg.rollout)?;
            let rates = success_rates(&episodes);
            let fmt = |x: Option<f64>| x.map_or_else(|| "nan".to_string(), |v| format!("{v:.4}"));
            let top1 = topk_recall(&row.records, 1)?;
            let top10 = topk_recall(&row.records, 10)?;
            metrics.push(vec![
                split.to_string(),
                row.name.to_string(),
                rates.episodes.to_string(),
                fmt(rates.task),
                fmt(rates.goal_conditions),
                format!("{top1:.4}"),
                format!("{top10:.4}"),
            ]);
            recall.extend(recall_rows(split, row.name, &row.records)?);
            for (slot, out) in [(Slot::Object, &mut conf_obj), (Slot::Action, &mut conf_act)] {
                let m = confusion(&row.records, slot);
                for (gold, wrong) in m.most_confused() {
                    for (p, n) in wrong {
                        out.push(vec![split.to_string(), row.name.to_string(), gold.clone(), p, n.to_string()]);
                    }
                }
            }
            for e in &episodes {
                episodes_out.push(json!({ "split": split, "row": row.name, "episode": e }));
            }
            split_summary.insert(
                row.name.to_string(),
                json!({ "task": rates.task, "goal_conditions": rates.goal_conditions, "top1": top1 }),
            );
        }
        summary.insert(split.to_string(), Value::Object(split_summary));
    }
    rd.write(
        "metrics.tsv",
        &to_tsv(&["split", "row", "episodes", "task_success", "goal_condition_success", "top1_recall", "top10_recall"], &metrics),
    )?;
    rd.write("recall.tsv", &to_tsv(&["split", "row", "k", "recall"], &recall))?;
    rd.write("criteria.tsv", &to_tsv(&["split", "criterion", "top1_recall"], &crit))?;
    let conf_header = ["split", "row", "gold", "predicted", "count"];
    rd.write("confusion_objects.tsv", &to_tsv(&conf_header, &conf_obj))?;
    rd.write("confusion_actions.tsv", &to_tsv(&conf_header, &conf_act))?;
    rd.write_jsonl("episodes.jsonl", &episodes_out)?;
    Ok((rd, Value::Object(summary)))
}

pub fn sweep(cfg: &RunConfig, run_dir: Option<&Path>) -> anyhow::Result<(RunDir, Value)> {
    let sim = run::simulator(cfg)?;
    let bench = run::benchmark(cfg, &sim)?;
    let tasks: Vec<&TaskSpec> = run::tasks(&bench, &cfg.predict.splits, cfg.predict.limit)
        .into_iter()
        .map(|(_, t)| t)
        .collect();
    let pcfg = run::planner_config(cfg)?;
    let make = |pairs| run::build_planner(cfg, pcfg.clone(), pairs, &sim.catalog);
    let rows = ablation_sweep(&bench, &tasks, &cfg.sweep, &make)?;
    let mut rd = RunDir::create(cfg, "sweep", run_dir)?;
    rd.write("sweep.tsv", &ablation_tsv(&rows))?;
    Ok((rd, serde_json::to_value(&rows)?))
}
