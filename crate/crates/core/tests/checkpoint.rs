use diacnn_core::net::{
    build_diacnn, build_mini_inception, decode_checkpoint, encode_checkpoint, CheckpointError, FreezePreset, Model,
    ParamStore, Selector,
};
use diacnn_core::rng::XorShift64Star;
use diacnn_core::Tensor;

/// Written by tests/oracles/write_fixture.py.
const FIXTURE: &[u8] = include_bytes!("fixtures/tiny.dcnn");
const FIXTURE_CHECKSUM: u64 = 0x8921_bf40_c1d3_2835;

fn trained_model() -> Model<f32> {
    let spec = build_mini_inception(2, 8).unwrap();
    let mut model = Model::new(spec.clone(), 4).unwrap();
    let mut rng = XorShift64Star::new(1);
    let x = Tensor::from_vec(&[4, 3, 32, 32], (0..4 * 3 * 1024).map(|_| rng.normal() as f32).collect()).unwrap();
    model.train_step(&x, &[0, 1, 1, 0]).unwrap();
    model.params.set_trainable(&spec, &Selector::prefixes(&["stem"]), false).unwrap();
    model
}

#[test]
fn round_trip_is_bitwise() {
    let model = trained_model();
    let bytes = encode_checkpoint(&model.spec, &model.params);
    let (spec, params) = decode_checkpoint(&bytes).unwrap();
    assert_eq!(spec, model.spec);
    for (name, p) in &model.params.params {
        let q = &params.params[name];
        assert_eq!(p.trainable, q.trainable, "{name}");
        let a: Vec<u32> = p.value.data().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u32> = q.value.data().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b, "{name}");
    }
    assert_eq!(params, model.params);
    assert_eq!(params.checksum(), model.params.checksum());
    assert_eq!(encode_checkpoint(&spec, &params), bytes);
}

#[test]
fn reloaded_model_predicts_identically() {
    let model = trained_model();
    let (spec, params) = decode_checkpoint(&encode_checkpoint(&model.spec, &model.params)).unwrap();
    let reloaded = Model::from_parts(spec, params).unwrap();
    let mut rng = XorShift64Star::new(9);
    let x = Tensor::from_vec(&[2, 3, 32, 32], (0..2 * 3 * 1024).map(|_| rng.normal() as f32).collect()).unwrap();
    assert_eq!(model.predict(&x).unwrap(), reloaded.predict(&x).unwrap());
}

#[test]
fn bad_magic_is_rejected() {
    let model = Model::<f32>::new(build_diacnn(4, 2).unwrap(), 0).unwrap();
    let mut bytes = encode_checkpoint(&model.spec, &model.params);
    bytes[0] = b'X';
    assert_eq!(decode_checkpoint(&bytes), Err(CheckpointError::BadMagic));
    assert_eq!(decode_checkpoint(b"DC"), Err(CheckpointError::BadMagic));
}

#[test]
fn version_mismatch_is_rejected() {
    let model = Model::<f32>::new(build_diacnn(4, 2).unwrap(), 0).unwrap();
    let mut bytes = encode_checkpoint(&model.spec, &model.params);
    bytes[4..8].copy_from_slice(&2u32.to_le_bytes());
    assert_eq!(decode_checkpoint(&bytes), Err(CheckpointError::UnsupportedVersion(2)));
}

#[test]
fn truncation_is_rejected_at_every_length() {
    let bytes = FIXTURE;
    for cut in 4..bytes.len() {
        match decode_checkpoint(&bytes[..cut]) {
            Err(CheckpointError::Truncated(_)) => {}
            other => panic!("cut at {cut}: {other:?}"),
        }
    }
}

fn first_array_offset(bytes: &[u8]) -> usize {
    let desc_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    12 + desc_len + 4
}

#[test]
fn dims_payload_disagreement_is_rejected() {
    let mut bytes = FIXTURE.to_vec();
    let at = first_array_offset(&bytes);
    let name_len = u16::from_le_bytes(bytes[at..at + 2].try_into().unwrap()) as usize;
    let dims_at = at + 2 + name_len + 3;
    bytes[dims_at..dims_at + 4].copy_from_slice(&3u32.to_le_bytes());
    assert!(matches!(decode_checkpoint(&bytes), Err(CheckpointError::DimsMismatch { .. })));
}

#[test]
fn descriptor_and_array_table_must_agree() {
    let model = Model::<f32>::new(build_diacnn(4, 2).unwrap(), 0).unwrap();
    let mut params = model.params.clone();
    params.params.remove("fc.bias");
    assert!(matches!(decode_checkpoint(&encode_checkpoint(&model.spec, &params)), Err(CheckpointError::Params(_))));

    let mut bytes = encode_checkpoint(&model.spec, &model.params);
    bytes.push(0);
    assert!(matches!(decode_checkpoint(&bytes), Err(CheckpointError::Malformed(_))));
    let mut bytes = encode_checkpoint(&model.spec, &model.params);
    bytes[12] = b'!';
    assert!(matches!(decode_checkpoint(&bytes), Err(CheckpointError::Descriptor(_))));
}

#[test]
fn reference_fixture_loads_to_known_checksum() {
    let (spec, params) = decode_checkpoint(FIXTURE).unwrap();
    assert_eq!(spec.name, "fixture");
    assert_eq!(spec.input_shape, [1, 4, 4]);
    assert_eq!(params.checksum(), FIXTURE_CHECKSUM);
    assert_eq!(&params.params["conv.weight"].value.data()[..3], &[0.0, 0.578125, -0.421875]);
    assert!(!params.params["bn.gamma"].trainable);
    assert!(params.params["fc.weight"].trainable);
    assert_eq!(params.running["bn"].var.len(), 2);
    let model = Model::from_parts(spec, params).unwrap();
    let p = model.predict(&Tensor::full(&[1, 1, 4, 4], 0.5)).unwrap();
    assert!(p.probs.all_finite());
    // JSON number formatting may differ between writers; the array table may not.
    let ours = encode_checkpoint(&model.spec, &model.params);
    assert_eq!(&ours[first_array_offset(&ours)..], &FIXTURE[first_array_offset(FIXTURE)..]);
}

#[test]
fn checksum_covers_running_stats_and_values() {
    let spec = build_diacnn(4, 2).unwrap();
    let a = ParamStore::<f32>::init(&spec, 0).unwrap();
    let mut b = a.clone();
    b.running.get_mut("stem.bn").unwrap().var[0] = 2.0;
    assert_ne!(a.checksum(), b.checksum());
    let mut c = a.clone();
    c.set_trainable(&spec, &Selector::Preset(FreezePreset::All), false).unwrap();
    assert_eq!(a.checksum(), c.checksum());
}
