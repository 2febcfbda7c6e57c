//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use sceneact_core::arl::{scene_pairs, History, Pipeline, Stage1Model, TrainConfig};
use sceneact_core::autodiff::{grad_check, Tape};
use sceneact_core::experiment::{
    balanced_prefix, evaluate_learned, evaluate_oracle, run_stage1, run_stage2, scene_accuracy, sweep, sweep_csv, train_ablation, Dataset,
    SweepAxis, SweepRow,
};
use sceneact_core::metrics::MetricsReport;
use sceneact_core::qa::{record_oracle_answer, FrontEnd, PipelineBundle};
use sceneact_core::scene::scene_equal;
use sceneact_core::tensorize::Vocabulary;
use sceneact_core::worldgen::{gen_action, gen_dataset, gen_scene, gen_split, GenConfig, Split};

struct Verdicts(Vec<bool>);

impl Verdicts {
    fn report(&mut self, n: usize, pass: bool, detail: String) {
        println!("criterion {n} {}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.0.push(pass);
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn oracle_soundness() -> (bool, String, String) {
    let start = Instant::now();
    let cfg = GenConfig { seed: 7, test_ordinary: 500, ..GenConfig::default() };
    let records = gen_split(&cfg, Split::TestOrdinary).expect("generation succeeds");
    let reproduced = records.iter().filter(|r| r.check_oracle().is_ok()).count();
    let report = evaluate_oracle(Split::TestOrdinary.name(), &records).expect("oracle path runs");
    let t = start.elapsed();
    let pass = report.overall.accuracy == 100.0 && reproduced == records.len() && t < Duration::from_secs(10);
    (pass, format!("oracle accuracy {:.1}% on {} records, {reproduced} reproduce scene_post and answer, {:.2} s (limit 10 s)", report.overall.accuracy, records.len(), secs(t)), report.to_json())
}

fn gradient_checks() -> (bool, String) {
    use rand::SeedableRng;
    let start = Instant::now();
    let vocab = Vocabulary::from_template_bank();
    let mut worst: f64 = 0.0;
    for seed in 0..3u64 {
        let cfg = TrainConfig { seed, action_dim: 4, hidden_width: 6, embed_dim: 3, lstm_hidden: 5, coord_weight: 1.0, ..TrainConfig::default() };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(100 + seed);
        let mut examples = Vec::new();
        while examples.len() < 2 {
            let pre = gen_scene(&mut rng).expect("scene");
            let Ok((text, action)) = gen_action(&mut rng, &pre, 1) else { continue };
            let post = sceneact_core::program::exec_action(&action, &pre).expect("generated actions apply");
            if let Ok(e) = sceneact_core::arl::Example::with_text(&pre, &post, &text, &vocab) {
                examples.push(e);
            }
        }
        let batch: Vec<_> = examples.iter().collect();
        let stage1 = Stage1Model::init(&cfg);
        let r1 = grad_check(&stage1.params, 1e-5, seed, |tape: &mut Tape, b| stage1.loss(tape, b, &batch)).expect("stage-1 loss builds");
        let text = sceneact_core::arl::Stage2Model::init(&cfg, vocab.len());
        let mut decoder = stage1.decoder();
        decoder.set_trainable(true);
        let full = Pipeline { decoder, text: text.clone() }.full_params();
        let r2 = grad_check(&full, 1e-5, seed, |tape: &mut Tape, b| Pipeline::loss(&cfg, tape, b, &text, &batch)).expect("stage-2 loss builds");
        worst = worst.max(r1.max_rel_err).max(r2.max_rel_err);
    }
    let t = start.elapsed();
    let pass = worst < 1e-4 && t < Duration::from_secs(120);
    (pass, format!("max relative error {worst:.2e} over 3 stage-1 and 3 stage-2 instances (limit 1e-4), {:.1} s (limit 120 s)", secs(t)))
}

/// Everything criteria 3, 4 and 8 compare between repeated runs.
struct CoreRun {
    stage1: Stage1Model,
    stage1_history: History,
    stage1_time: Duration,
    train_acc: f64,
    val_acc: f64,
    pipeline: Pipeline,
    ablation: Pipeline,
    full_scene: f64,
    ablation_scene: f64,
}

impl CoreRun {
    fn fingerprint(&self) -> Vec<u8> {
        let mut out = self.stage1.params.to_bytes();
        out.extend(serde_json::to_vec(&self.stage1_history).expect("history serializes"));
        out.extend(self.pipeline.full_params().to_bytes());
        out.extend(self.ablation.full_params().to_bytes());
        out.extend(format!("{} {} {} {}", self.train_acc, self.val_acc, self.full_scene, self.ablation_scene).bytes());
        out
    }
}

fn core_run(data: &Dataset, cfg: &TrainConfig, vocab: &Vocabulary) -> CoreRun {
    let start = Instant::now();
    let (stage1, stage1_history) = run_stage1(&data.train, &data.val, cfg).expect("stage 1 trains");
    let stage1_time = start.elapsed();
    let train_acc = 100.0 * stage1.accuracy(&scene_pairs(&balanced_prefix(&data.train, cfg.stage1_pairs)).expect("pairs"));
    let val_acc = 100.0 * stage1.accuracy(&scene_pairs(&data.val).expect("pairs"));
    let (pipeline, _) = run_stage2(&data.train, &data.val, &stage1, cfg, vocab).expect("stage 2 trains");
    let (ablation, _) = train_ablation(&data.train, &data.val, cfg, vocab).expect("ablation trains");
    let full_scene = scene_accuracy(&pipeline, &data.test_ordinary, vocab).expect("scoring");
    let ablation_scene = scene_accuracy(&ablation, &data.test_ordinary, vocab).expect("scoring");
    CoreRun { stage1, stage1_history, stage1_time, train_acc, val_acc, pipeline, ablation, full_scene, ablation_scene }
}

fn main() -> ExitCode {
    let total = Instant::now();
    let mut v = Verdicts(Vec::new());

    let (pass, detail, oracle_json) = oracle_soundness();
    v.report(1, pass, detail);

    let (pass, detail) = gradient_checks();
    v.report(2, pass, detail);

    let cfg = TrainConfig::default();
    let vocab = Vocabulary::from_template_bank();
    let data = Dataset::from_splits(gen_dataset(&GenConfig::default()).expect("generation succeeds"));
    let run = core_run(&data, &cfg, &vocab);
    v.report(
        3,
        run.train_acc >= 95.0 && run.val_acc >= 80.0 && run.stage1_time < Duration::from_secs(600),
        format!(
            "stage-1 scene reconstruction train {:.1}% (limit 95), val {:.1}% (limit 80), {} epochs in {:.0} s (limit 600 s)",
            run.train_acc,
            run.val_acc,
            run.stage1_history.epochs.len(),
            secs(run.stage1_time)
        ),
    );
    v.report(
        4,
        run.full_scene - run.ablation_scene >= 10.0,
        format!("held-out scene accuracy stage(1+2) {:.1}% vs stage(2 only) {:.1}% (needs a gap of 10 points)", run.full_scene, run.ablation_scene),
    );

    let bundle = PipelineBundle::new(run.pipeline.clone(), vocab.clone(), FrontEnd::TemplateParse).expect("bundle matches");
    let mut reports: Vec<MetricsReport> = Vec::new();
    let (mut scene_correct, mut exceptions) = (0, 0);
    for split in [Split::TestOrdinary, Split::Test2HopTa, Split::Test2HopQh] {
        let records = data.split(split);
        let (report, predictions) = evaluate_learned(split.name(), records, &bundle).expect("learned path runs");
        for (r, p) in records.iter().zip(&predictions) {
            if scene_equal(&p.scene_pred, r.scene_post.as_ref().expect("oracle records"), cfg.coord_tol) {
                scene_correct += 1;
                exceptions += usize::from(p.answer != Some(record_oracle_answer(r).expect("oracle answer")));
            }
        }
        reports.push(report);
    }
    v.report(5, exceptions == 0, format!("{exceptions} answer mismatches among {scene_correct} scene-correct test records"));

    let ordinary = reports[0].overall.accuracy;
    let mut pass = true;
    let mut parts = vec![format!("ordinary {ordinary:.1}%")];
    for r in &reports[1..] {
        let ok = (r.overall.accuracy - ordinary).abs() <= 25.0 && r.overall.accuracy > r.majority_baseline.accuracy;
        pass &= ok;
        parts.push(format!("{} {:.1}% (majority {:.1}%)", r.split, r.overall.accuracy, r.majority_baseline.accuracy));
    }
    v.report(6, pass, format!("learned answer accuracy {}", parts.join(", ")));

    let sweep_start = Instant::now();
    let mut print_row = |r: &SweepRow| eprintln!("  sweep row {} scene {:.1} qa {:.1}", r.axis_value, r.scene_acc, r.qa_acc);
    let lengths = sweep(SweepAxis::VectorLength, &SweepAxis::VectorLength.default_values(), &data, &cfg, &vocab, &mut print_row).expect("sweep runs");
    let sizes = sweep(SweepAxis::DataSize, &SweepAxis::DataSize.default_values(), &data, &cfg, &vocab, &mut print_row).expect("sweep runs");
    let sweep_time = sweep_start.elapsed();
    let csv = sweep_csv(&lengths);
    let at = |l: usize| lengths.iter().find(|r| r.axis_value == l).map_or(f64::NAN, |r| r.qa_acc);
    let monotone = sizes.windows(2).all(|w| w[1].scene_acc >= w[0].scene_acc - 2.0);
    let rows = csv.lines().count() - 1;
    v.report(
        7,
        rows == 8 && at(125) >= at(25) && monotone && sweep_time < Duration::from_secs(90 * 60),
        format!(
            "{rows}-row vector-length CSV, qa accuracy L=125 {:.1}% vs L=25 {:.1}%; data-size scene accuracy {}; {:.1} min (limit 90)",
            at(125),
            at(25),
            sizes.iter().map(|r| format!("{}:{:.1}", r.axis_value, r.scene_acc)).collect::<Vec<_>>().join(" "),
            secs(sweep_time) / 60.0
        ),
    );
    print!("{csv}");
    print!("{}", sweep_csv(&sizes));

    let (_, _, oracle_again) = oracle_soundness();
    let again = core_run(&data, &cfg, &vocab);
    let same1 = oracle_again == oracle_json;
    let same34 = again.fingerprint() == run.fingerprint();
    v.report(8, same1 && same34, format!("repeat of criterion 1 identical: {same1}; repeat of criteria 3 and 4 (models, history, scores) identical: {same34}"));

    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("stage1.bin");
    run.stage1.save(&path, &vocab).expect("checkpoint writes");
    let before = std::fs::read(&path).expect("checkpoint reads");
    let loaded = Stage1Model::load(&path, &vocab).expect("checkpoint loads");
    let hash_before = loaded.decoder().hash();
    let (trained, _) = run_stage2(&data.train, &data.val, &loaded, &cfg, &vocab).expect("stage 2 trains");
    let after = std::fs::read(&path).expect("checkpoint reads");
    let hash_after = trained.decoder.hash();
    v.report(
        9,
        before == after && hash_before == hash_after && Stage1Model::load(&path, &vocab).expect("loads").decoder().hash() == hash_after,
        format!("decoder hash {}… before and {}… after stage 2; checkpoint file unchanged: {}", &hash_before[..12], &hash_after[..12], before == after),
    );

    let passed = v.0.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed in {:.1} min", v.0.len(), secs(total.elapsed()) / 60.0);
    if passed == v.0.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
