use proptest::prelude::*;
use vcd_core::encoder::{encode_weights, load_weights, parse_weights, EncoderSpec, Tap, WeightBundle};
use vcd_core::media::{
    decode_frame, encode_pnm, encode_vcdf, load_frame, load_video, resolve_manifest, save_pnm, save_vcdf, Frame,
};
use vcd_core::VcdError;

fn frame_strategy(levels: Option<u32>) -> impl Strategy<Value = Frame> {
    (1usize..9, 1usize..9, prop_oneof![Just(1usize), Just(3usize)]).prop_flat_map(move |(h, w, c)| {
        let n = h * w * c;
        let values = match levels {
            Some(l) => proptest::collection::vec((0..=l).prop_map(move |k| k as f32 / l as f32), n).boxed(),
            None => proptest::collection::vec(0.0f32..=1.0, n).boxed(),
        };
        values.prop_map(move |data| Frame::new(h, w, c, data).unwrap())
    })
}

proptest! {
    #[test]
    fn vcdf_round_trip_is_exact(f in frame_strategy(None)) {
        prop_assert_eq!(decode_frame(&encode_vcdf(&f)).unwrap(), f);
    }

    #[test]
    fn pnm_round_trip_on_8bit_levels(f in frame_strategy(Some(255))) {
        prop_assert_eq!(decode_frame(&encode_pnm(&f)).unwrap(), f);
    }

    #[test]
    fn truncated_vcdf_is_rejected(f in frame_strategy(None), cut in 1usize..16) {
        let bytes = encode_vcdf(&f);
        let cut = cut.min(bytes.len() - 20);
        prop_assert!(matches!(decode_frame(&bytes[..bytes.len() - cut]), Err(VcdError::Corrupt(_))));
    }
}

#[test]
fn pnm_with_comments_and_small_maxval() {
    let f = decode_frame(b"P5\n# a comment\n2 1\n# another\n3\n\x00\x03").unwrap();
    assert_eq!((f.height(), f.width(), f.channels()), (1, 2, 1));
    assert_eq!(f.data(), &[0.0, 1.0]);
}

#[test]
fn unknown_magic_and_bad_samples() {
    assert!(matches!(decode_frame(b"GIF89a"), Err(VcdError::Format(_))));
    let mut bytes = encode_vcdf(&Frame::filled(1, 1, 1, 0.5).unwrap());
    let n = bytes.len();
    bytes[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
    assert!(matches!(decode_frame(&bytes), Err(VcdError::Value(_))));
    assert!(matches!(Frame::new(1, 1, 1, vec![1.5]), Err(VcdError::Value(_))));
    assert!(Frame::new(1, 1, 2, vec![0.0, 0.0]).is_err());
}

#[test]
fn directory_and_manifest_videos() {
    let dir = tempfile::tempdir().unwrap();
    let frames: Vec<Frame> = (0..3).map(|k| Frame::filled(2, 3, 3, k as f32 / 4.0).unwrap()).collect();
    for (k, f) in frames.iter().enumerate().rev() {
        save_vcdf(dir.path().join(format!("frame{k}.vcdf")), f).unwrap();
    }
    std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    let paths = resolve_manifest(dir.path()).unwrap();
    assert_eq!(paths.len(), 3);
    let video = load_video(&paths, 1).unwrap();
    assert_eq!(video.frames(), &frames[..]);

    let manifest = dir.path().join("list.txt");
    std::fs::write(&manifest, "# reversed\nframe2.vcdf\nframe0.vcdf\n").unwrap();
    let video = load_video(&resolve_manifest(&manifest).unwrap(), 2).unwrap();
    assert_eq!(video.frame(1).unwrap(), &frames[2]);
    assert_eq!(video.cond_frame(), &frames[0]);

    save_pnm(dir.path().join("gray.pgm"), &Frame::filled(2, 3, 1, 0.0).unwrap()).unwrap();
    let mixed = resolve_manifest(dir.path()).unwrap();
    assert!(matches!(load_video(&mixed, 1), Err(VcdError::DimensionMismatch(_))));
    assert!(matches!(load_frame(dir.path().join("gray.pgm"), Some(3)), Err(VcdError::Shape(_))));
    assert!(matches!(load_frame(dir.path().join("missing.ppm"), None), Err(VcdError::Io { .. })));
}

#[test]
fn weight_file_round_trip_and_validation() {
    let bundle = WeightBundle::synthetic_vgg(1, 9).unwrap();
    let bytes = encode_weights(&bundle);
    assert_eq!(parse_weights(&bytes).unwrap(), bundle);
    assert!(matches!(parse_weights(&bytes[..bytes.len() - 1]), Err(VcdError::Corrupt(_))));
    let mut longer = bytes.clone();
    longer.push(0);
    assert!(matches!(parse_weights(&longer), Err(VcdError::Corrupt(_))));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.vcdw");
    std::fs::write(&path, &bytes).unwrap();
    let shallow = EncoderSpec::vgg_shallow(&path).with_taps(vec![Tap::Relu1_1]);
    assert_eq!(load_weights(&path, &shallow).unwrap(), bundle);
    let deep = EncoderSpec::vgg_shallow(&path);
    assert!(matches!(load_weights(&path, &deep), Err(VcdError::IncompatibleWeights(_))));
}
