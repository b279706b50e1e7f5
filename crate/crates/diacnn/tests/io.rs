use std::path::Path;

use diacnn::commands::{load_checkpoint, save_checkpoint};
use diacnn::config::{ModelPreset, RunConfig, Task};
use diacnn::core::data::{binary_task_filter, split_dataset, DataError, Eye, Split};
use diacnn::core::net::{build_mini_inception, Model};
use diacnn::core::rng::XorShift64Star;
use diacnn::core::Tensor;
use diacnn::imageio::{decode_bytes, decode_image, write_png};
use diacnn::manifest::{parse_manifest, render_manifest, resolve_image};
use diacnn::Error;

const TABLE1: [(&str, usize); 8] = [("N", 1135), ("D", 1131), ("G", 207), ("C", 211), ("A", 171), ("H", 94), ("M", 177), ("O", 944)];

fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn table1_manifest() -> String {
    let mut s = String::from("image_path,eye,label\n");
    let mut i = 0;
    for (label, n) in TABLE1 {
        for _ in 0..n {
            let eye = if i % 2 == 0 { "left" } else { "right" };
            s.push_str(&format!("img/{i}.jpg,{eye},{label}\n"));
            i += 1;
        }
    }
    s
}

fn manifest_err(text: &str) -> String {
    match parse_manifest(text, Path::new("m.csv")) {
        Err(e @ Error::Manifest { .. }) => e.to_string(),
        other => panic!("expected a manifest error, got {other:?}"),
    }
}

#[test]
fn manifest_rows_become_samples() {
    let text = "image_path,eye,label\n1_left.jpg,left,N\n1_right.jpg,right,D\n2_left.jpg,left,C\n";
    let ds = parse_manifest(text, Path::new("m.csv")).unwrap();
    assert_eq!(ds.len(), 3);
    let s = &ds.samples[1];
    assert_eq!((s.image_path.as_str(), s.eye, ds.class_names[s.label].as_str()), ("1_right.jpg", Eye::Right, "D"));
    assert!(ds.samples.iter().all(|s| s.split == Split::Unassigned));
}

#[test]
fn manifest_columns_may_be_reordered_and_padded() {
    let text = "label , image_path,eye\n G , a.png , left\n";
    let ds = parse_manifest(text, Path::new("m.csv")).unwrap();
    assert_eq!(ds.samples[0].image_path, "a.png");
    assert_eq!(ds.class_names[ds.samples[0].label], "G");
}

#[test]
fn unknown_label_names_its_row() {
    let msg = manifest_err("image_path,eye,label\na.jpg,left,N\nb.jpg,left,X\n");
    assert!(msg.contains("row 3") && msg.contains('X'), "{msg}");
}

#[test]
fn comma_in_path_is_rejected() {
    let msg = manifest_err("image_path,eye,label\nfoo,bar.jpg,left,N\n");
    assert!(msg.contains("row 2") && msg.contains("expected 3 fields, found 4"), "{msg}");
}

#[test]
fn quotes_are_rejected() {
    let msg = manifest_err("image_path,eye,label\n\"a.jpg\",left,N\n");
    assert!(msg.contains("quote"), "{msg}");
}

#[test]
fn missing_column_is_a_data_error() {
    let r = parse_manifest("image_path,label\na.jpg,N\n", Path::new("m.csv"));
    assert!(matches!(r, Err(Error::Data(DataError::MissingColumn(ref c))) if c == "eye"), "{r:?}");
}

#[test]
fn split_column_round_trips() {
    let ds = parse_manifest(&table1_manifest(), Path::new("m.csv")).unwrap();
    let split = split_dataset(&ds, [0.8, 0.1, 0.1], 5, true).unwrap();
    let text = render_manifest(&split).unwrap();
    let back = parse_manifest(&text, Path::new("m.csv")).unwrap();
    assert_eq!(back.samples, split.samples);
    assert_eq!(render_manifest(&back).unwrap(), text);
}

#[test]
fn table1_counts_survive_parsing() {
    let ds = parse_manifest(&table1_manifest(), Path::new("m.csv")).unwrap();
    assert_eq!(ds.counts(), TABLE1.iter().map(|t| t.1).collect::<Vec<_>>());
    assert_eq!(ds.len(), 4070);
}

#[test]
fn table1_stratified_train_takes_908_normals() {
    let ds = parse_manifest(&table1_manifest(), Path::new("m.csv")).unwrap();
    let split = split_dataset(&ds, [0.8, 0.1, 0.1], 0, true).unwrap();
    assert_eq!(split.split_counts(Split::Train)[0], 908);
    let binary = binary_task_filter(&ds, &[3], &[0]).unwrap();
    assert_eq!(binary.counts(), vec![1135, 211]);
}

#[test]
fn image_paths_resolve_beside_the_manifest() {
    assert_eq!(resolve_image(Path::new("/data/odir/m.csv"), "img/a.png"), Path::new("/data/odir/img/a.png"));
    assert_eq!(resolve_image(Path::new("/data/m.csv"), "/abs/a.png"), Path::new("/abs/a.png"));
}

#[test]
fn png_fixture_decodes_exactly() {
    let img = decode_image(&fixture("rgb_2x2.png")).unwrap();
    assert_eq!((img.h, img.w, img.c), (2, 2, 3));
    assert_eq!(img.data, [255., 0., 0., 0., 255., 0., 0., 0., 255., 10., 20., 30.]);
}

#[test]
fn grayscale_is_promoted_to_rgb() {
    let img = decode_image(&fixture("gray_3x2.png")).unwrap();
    assert_eq!((img.h, img.w, img.c), (2, 3, 3));
    let expect: Vec<f32> = [0., 64., 128., 192., 255., 7.].iter().flat_map(|&v| [v, v, v]).collect();
    assert_eq!(img.data, expect);
}

#[test]
fn truncated_png_is_a_decode_error() {
    let r = decode_image(&fixture("truncated.png"));
    assert!(matches!(r, Err(Error::Decode { .. })), "{r:?}");
    assert_eq!(r.unwrap_err().exit_code(), 2);
}

#[test]
fn non_image_bytes_are_rejected() {
    assert!(matches!(decode_bytes(b"GIF89a....", Path::new("x.gif")), Err(Error::Decode { .. })));
}

#[test]
fn jpeg_fixture_decodes_near_its_source_colour() {
    let img = decode_image(&fixture("flat_8x8.jpg")).unwrap();
    assert_eq!((img.h, img.w, img.c), (8, 8, 3));
    for px in img.data.chunks(3) {
        for (v, want) in px.iter().zip([200.0, 100.0, 50.0]) {
            assert!((v - want).abs() <= 2.0, "{px:?}");
        }
    }
}

#[test]
fn png_write_then_decode_is_lossless() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = XorShift64Star::new(3);
    let data: Vec<f32> = (0..5 * 7 * 3).map(|_| (rng.next_u64() % 256) as f32).collect();
    let img = diacnn::core::data::Image { h: 5, w: 7, c: 3, data };
    let p = dir.path().join("x.png");
    write_png(&p, &img).unwrap();
    assert_eq!(decode_image(&p).unwrap(), img);
}

#[test]
fn checkpoint_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let model = Model::<f32>::new(build_mini_inception(2, 8).unwrap(), 11).unwrap();
    let p = dir.path().join("m.ckpt");
    save_checkpoint(&p, &model.spec, &model.params).unwrap();
    let back = load_checkpoint(&p).unwrap();
    assert_eq!(back, model);
    let mut rng = XorShift64Star::new(2);
    let x = Tensor::from_vec(&[2, 3, 32, 32], (0..2 * 3 * 1024).map(|_| rng.normal() as f32).collect()).unwrap();
    assert_eq!(back.predict(&x).unwrap(), model.predict(&x).unwrap());
}

#[test]
fn corrupt_checkpoint_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.ckpt");
    std::fs::write(&p, b"not a checkpoint").unwrap();
    let e = load_checkpoint(&p).unwrap_err();
    assert!(matches!(e, Error::Checkpoint { .. }), "{e:?}");
    assert_eq!(e.exit_code(), 2);
}

#[test]
fn config_rejects_unknown_keys() {
    for text in ["[train]\nbase_rate = 0.1\n", "[model]\nwidth = 3\n", "augmnet = true\n", "[dataset.task]\nkind = \"binary\"\npositive = [\"C\"]\nnegative = [\"N\"]\nextra = 1\n"] {
        assert!(matches!(RunConfig::parse(text), Err(Error::Config(_))), "{text}");
    }
}

#[test]
fn config_rejects_unknown_task_classes() {
    let text = "[dataset]\ntask = { kind = \"binary\", positive = [\"Q\"], negative = [\"N\"] }\n";
    let e = RunConfig::parse(text).unwrap_err();
    assert!(e.to_string().contains('Q'), "{e}");
}

#[test]
fn empty_config_takes_defaults() {
    let cfg = RunConfig::parse("").unwrap();
    assert_eq!(cfg.train.base_lr, 1e-3);
    assert_eq!(cfg.train.batch_size, 64);
    assert_eq!(cfg.dataset.ratios, [0.8, 0.1, 0.1]);
    assert_eq!(cfg.model.preset, ModelPreset::Diacnn);
}

#[test]
fn effective_config_serializes_and_reparses() {
    let mut cfg = RunConfig::parse("[model]\nnet_width = 12\n").unwrap();
    cfg.override_seed(7);
    let back = RunConfig::parse(&cfg.to_toml()).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn shipped_presets_parse_and_build() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let load = |name: &str| RunConfig::parse(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap();

    for (name, width) in [("diacnn16.cfg", 16), ("diacnn12.cfg", 12)] {
        let cfg = load(name);
        assert_eq!(cfg.model.preset, ModelPreset::Diacnn);
        assert_eq!(cfg.model.net_width, width);
        assert_eq!(cfg.dataset.task, Task::Binary { positive: vec!["C".into()], negative: vec!["N".into()] });
        assert_eq!((cfg.train.base_lr, cfg.train.batch_size, cfg.train.epochs), (1e-3, 64, 50));
        assert!(cfg.train.plateau.enabled && cfg.train.plateau.patience == 2);
        assert_eq!(cfg.build_model().unwrap().num_classes, Some(2));
    }

    let t = load("transfer_recipe.cfg");
    assert_eq!(t.model.preset, ModelPreset::MiniInception);
    assert_eq!(t.dataset.task, Task::Multiclass);
    assert_eq!((t.train.base_lr, t.train.epochs), (1e-4, 30));
    assert_eq!(t.train.lr_schedule, diacnn::core::train::LrSchedule::StepHalving { period: 5 });
    assert!(!t.train.plateau.enabled);
    assert_eq!(t.build_model().unwrap().num_classes, Some(8));

    let alt = load("transfer_table.cfg");
    assert_eq!((alt.train.base_lr, alt.train.epochs), (1e-5, 20));
    assert_eq!(alt.train.lr_schedule, diacnn::core::train::LrSchedule::None);
    assert_eq!(alt.dataset.task, Task::Multiclass);
}

#[test]
fn mismatched_input_size_is_a_config_error() {
    let e = RunConfig::parse("[preprocess]\ninput_hw = [24, 24]\n[model]\npreset = \"mini_inception\"\n").unwrap().build_model().unwrap_err();
    assert!(matches!(e, Error::Config(_)), "{e:?}");
}
