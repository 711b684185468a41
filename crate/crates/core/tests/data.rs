use forgeda_core::data::*;
use forgeda_core::synth::{ColorSpace, RasterImage};
use proptest::prelude::*;

fn manifest(classes: &[Option<ClassLabel>]) -> Manifest {
    let records = classes
        .iter()
        .enumerate()
        .map(|(i, &c)| ManifestRecord {
            id: format!("img-{i}"),
            path: format!("images/{i}.png"),
            class_label: c,
            domain: Domain::Source,
            split: None,
            provenance: None,
        })
        .collect();
    Manifest::new(records, "/data").unwrap()
}

fn class_strategy() -> impl Strategy<Value = Option<ClassLabel>> {
    prop_oneof![
        Just(Some(ClassLabel::Authentic)),
        Just(Some(ClassLabel::Forged)),
        Just(None),
    ]
}

#[test]
fn textbook_luma_for_primary_colors() {
    let img = RasterImage::new(3, 1, vec![255, 0, 0, 0, 255, 0, 0, 0, 255], ColorSpace::Rgb).unwrap();
    let y = rgb_to_ycrcb(&img).unwrap();
    assert_eq!(y.color_space, ColorSpace::YCrCb);
    for (px, w) in [0.299, 0.587, 0.114].iter().enumerate() {
        let want = (w * 255.0f64).round() as i32;
        assert!((y.data[px * 3] as i32 - want).abs() <= 1);
    }
}

#[test]
fn paired_iterator_hides_target_labels() {
    let s = TensorDataset::from_features(vec![0.0; 12], vec![2], Some(vec![0, 1, 0, 1, 0, 1]), Domain::Source).unwrap();
    let t = TensorDataset::from_features(vec![1.0; 8], vec![2], Some(vec![1, 1, 1, 1]), Domain::Target).unwrap();
    let mut it = PairedBatchIterator::new(&s, &t, 2, 5).unwrap();
    assert_eq!(it.steps_per_epoch(), 3);
    for _ in 0..7 {
        let (sb, tb) = it.next_pair().unwrap();
        assert!(sb.class_labels.is_some());
        assert!(tb.class_labels.is_none());
        assert_eq!(sb.domain_labels, vec![0, 0]);
        assert_eq!(tb.domain_labels, vec![1, 1]);
    }
}

#[test]
fn manifest_rejects_unknown_fields_with_line_number() {
    let text = "{\"id\":\"a\",\"path\":\"a.png\",\"class\":\"forged\"}\n{\"id\":\"b\",\"path\":\"b.png\",\"label\":1}\n";
    let err = Manifest::parse(text, ".").unwrap_err().to_string();
    assert!(err.contains('2'), "{err}");
}

proptest! {
    #[test]
    fn ycrcb_round_trip_within_two(px in proptest::collection::vec(any::<u8>(), 3..300)) {
        let n = px.len() / 3;
        let img = RasterImage::new(n as u32, 1, px[..n * 3].to_vec(), ColorSpace::Rgb).unwrap();
        let back = ycrcb_to_rgb(&rgb_to_ycrcb(&img).unwrap()).unwrap();
        for (a, b) in img.data.iter().zip(&back.data) {
            prop_assert!((*a as i32 - *b as i32).abs() <= 2);
        }
    }

    #[test]
    fn split_is_a_stratified_partition(classes in proptest::collection::vec(class_strategy(), 1..200),
                                       frac in 0.05f64..0.95, seed in any::<u64>()) {
        let m = manifest(&classes);
        let s = split_dataset(&m, frac, seed).unwrap();
        prop_assert_eq!(s.len(), m.len());
        for (a, b) in m.records.iter().zip(&s.records) {
            prop_assert_eq!(&a.id, &b.id);
            prop_assert!(b.split.is_some());
        }
        for c in [Some(ClassLabel::Authentic), Some(ClassLabel::Forged), None] {
            let n = classes.iter().filter(|&&x| x == c).count();
            let train = s.records.iter().filter(|r| r.class_label == c && r.split == Some(Split::Train)).count();
            prop_assert_eq!(train, (frac * n as f64 + 1e-9).floor() as usize);
        }
        prop_assert_eq!(split_dataset(&m, frac, seed).unwrap(), s);
    }

    #[test]
    fn manifest_jsonl_round_trips(classes in proptest::collection::vec(class_strategy(), 0..50)) {
        let m = manifest(&classes);
        let back = Manifest::parse(&m.to_jsonl().unwrap(), "/data").unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn resize_preserves_constant_images(w in 1u32..40, h in 1u32..40, side in 8u32..70, rgb in any::<[u8; 3]>()) {
        let out = resize_bilinear(&RasterImage::filled(w, h, rgb), side).unwrap();
        prop_assert_eq!((out.width, out.height), (side, side));
        prop_assert_eq!(out, RasterImage::filled(side, side, rgb));
    }
}
