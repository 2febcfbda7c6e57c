use sceneact_core::arl::TrainConfig;
use sceneact_core::config::{parse_config, render_config};
use sceneact_core::error::Error;
use sceneact_core::experiment::{balanced_prefix, evaluate_oracle, sweep_csv, SweepAxis, SweepRow};
use sceneact_core::metrics::{action_cell_name, MetricsReport, Outcome};
use sceneact_core::worldgen::{gen_split, ActionType, GenConfig, Split};

fn records(split: Split, n: usize) -> Vec<sceneact_core::worldgen::SampleRecord> {
    let cfg = GenConfig { seed: 5, train: n, test_ordinary: n, test_2hop_ta: n, test_2hop_qh: n, ..GenConfig::default() };
    gen_split(&cfg, split).unwrap()
}

#[test]
fn config_overrides_defaults_and_skips_comments() {
    let text = "# stage-1 budget\nstage1_epochs = 12\n\nlearning_rate=0.01\naugment = false\noptimizer = sgd\n";
    let cfg = parse_config(text, &TrainConfig::default()).unwrap();
    assert_eq!(cfg.stage1_epochs, 12);
    assert_eq!(cfg.learning_rate, 0.01);
    assert!(!cfg.augment);
    assert_eq!(cfg.seed, TrainConfig::default().seed);
    assert!(render_config(&cfg).contains("optimizer = sgd\n"));
}

#[test]
fn config_errors_name_the_line() {
    let bad = |text: &str| match parse_config(text, &TrainConfig::default()) {
        Err(Error::Config(msg)) => msg,
        other => panic!("expected a config error, got {other:?}"),
    };
    assert!(bad("speed = 3").contains("line 1: unknown key `speed`"));
    assert!(bad("seed = 1\nseed = 2").contains("line 2: duplicate key `seed`"));
    assert!(bad("\nstage1_epochs = many").contains("line 2: bad value"));
    assert!(bad("seed").contains("expected `key = value`"));
    assert!(bad("optimizer = rmsprop").contains("rmsprop"));
}

#[test]
fn gen_config_uses_the_same_format() {
    let cfg = parse_config("train = 10\nblind = true", &GenConfig::default()).unwrap();
    assert_eq!(cfg.train, 10);
    assert!(cfg.blind);
    assert_eq!(parse_config(&render_config(&cfg), &GenConfig::default()).unwrap(), cfg);
}

#[test]
fn ordinary_report_has_four_single_action_cells() {
    let report = evaluate_oracle("test_ordinary", &records(Split::TestOrdinary, 80)).unwrap();
    let names: Vec<&str> = report.action_types.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names, ["add", "remove", "change", "move"]);
    assert_eq!(report.reasoning_types.len(), 5);
}

#[test]
fn two_hop_report_has_six_pair_cells() {
    let report = evaluate_oracle("test_2hop_ta", &records(Split::Test2HopTa, 60)).unwrap();
    let names: Vec<&str> = report.action_types.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names, ["add+remove", "add+change", "add+move", "remove+change", "remove+move", "change+move"]);
    assert!(report.action_types.iter().all(|c| c.total == 10));
}

#[test]
fn pair_cells_ignore_hop_order() {
    assert_eq!(action_cell_name(&[ActionType::Move, ActionType::Add]), action_cell_name(&[ActionType::Add, ActionType::Move]));
}

#[test]
fn json_and_table_agree() {
    let rs = records(Split::Test2HopQh, 45);
    let outcomes: Vec<Outcome> = (0..rs.len()).map(|i| Outcome { answer_correct: i % 3 != 0, scene_correct: Some(i % 4 == 0) }).collect();
    let report = MetricsReport::build("test_2hop_qh", "learned", &rs, &outcomes);
    let back: MetricsReport = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(back, report);
    let table = report.to_table();
    let cells = [report.overall.clone(), report.scene.clone().unwrap(), report.majority_baseline.clone()];
    for c in cells.iter().chain(&report.action_types).chain(&report.reasoning_types) {
        let line = table.lines().find(|l| l.trim_start().starts_with(&c.name)).unwrap();
        assert!(line.contains(&format!("{:.1}  ({}/{})", c.accuracy, c.correct, c.total)), "{line}");
    }
    assert_eq!(report.reasoning_types.iter().map(|c| c.name.as_str()).collect::<Vec<_>>(), ["and", "or", "not"]);
}

#[test]
fn majority_baseline_counts_the_most_common_answer() {
    let rs = records(Split::TestOrdinary, 60);
    let report = MetricsReport::build("x", "oracle", &rs, &vec![Outcome { answer_correct: true, scene_correct: None }; rs.len()]);
    let top = rs.iter().filter(|r| report.majority_baseline.name == format!("majority ({})", r.answer)).count();
    assert_eq!(report.majority_baseline.correct, top);
    assert!(rs.iter().all(|a| rs.iter().filter(|b| b.answer == a.answer).count() <= top));
    assert!(report.scene.is_none());
}

#[test]
fn balanced_prefix_keeps_action_types_even() {
    let rs = records(Split::Train, 400);
    for n in [4, 50, 101, 400] {
        let prefix = balanced_prefix(&rs, n);
        assert_eq!(prefix.len(), n);
        let counts: Vec<usize> = ActionType::ALL.iter().map(|t| prefix.iter().filter(|r| r.action_types[0] == *t).count()).collect();
        assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1, "{counts:?}");
    }
    assert_eq!(balanced_prefix(&rs, 1000).len(), 400);
}

#[test]
fn sweep_csv_layout() {
    let rows = [SweepRow { axis_value: 25, scene_acc: 12.5, qa_acc: 60.0 }, SweepRow { axis_value: 50, scene_acc: 0.0, qa_acc: 55.25 }];
    assert_eq!(sweep_csv(&rows), "axis_value,scene_acc,qa_acc\n25,12.5,60\n50,0,55.25\n");
    assert_eq!(SweepAxis::VectorLength.default_values(), [25, 50, 75, 100, 125, 150, 175, 200]);
    assert_eq!(SweepAxis::DataSize.default_values(), [500, 1000, 2000]);
}
