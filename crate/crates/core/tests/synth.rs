use std::path::PathBuf;

use forgeda_core::data::ClassLabel;
use forgeda_core::synth::*;
use proptest::prelude::*;

fn toy_corpus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../assets/toy_corpus")
}

fn random_image(w: u32, h: u32, seed: u64) -> RasterImage {
    let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let data = (0..w * h * 3)
        .map(|_| {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (x >> 56) as u8
        })
        .collect();
    RasterImage::new(w, h, data, ColorSpace::Rgb).unwrap()
}

#[test]
fn forged_differs_only_inside_pasted_region() {
    let index = CocoIndex::load(&toy_corpus().join("annotations.json")).unwrap();
    let images = index.images();
    let mut checked = 0;
    let mut k = 0u64;
    while checked < 100 {
        let meta = images[k as usize % images.len()];
        k += 1;
        let img = RasterImage::load(&toy_corpus().join(&meta.file_name)).unwrap();
        let masks = index.masks_for(meta).unwrap();
        let cat = masks[0].category.clone();
        let pair = match make_copy_move_pair(&meta.file_name, &img, &masks, &cat, k, &CopyMoveConfig::default()) {
            Ok(p) => p,
            Err(forgeda_core::Error::Skip(_)) => continue,
            Err(e) => panic!("{e}"),
        };
        let prov = &pair.provenance;
        let (_, moved) = apply_affine(&img, &masks[prov.mask_index], prov.affine.as_ref().unwrap()).unwrap();
        for i in 0..img.pixel_count() {
            if !moved.bits[i] {
                assert_eq!(img.data[i * 3..i * 3 + 3], pair.forged.data[i * 3..i * 3 + 3], "pixel {i} outside paste changed");
            }
        }
        assert_eq!(pair.authentic, img);
        if let Ok(inp) = make_inpaint_pair(&meta.file_name, &img, &masks, &cat, k, 100) {
            let hole = &masks[inp.provenance.mask_index];
            for i in 0..img.pixel_count() {
                if !hole.bits[i] {
                    assert_eq!(img.data[i * 3..i * 3 + 3], inp.forged.data[i * 3..i * 3 + 3]);
                }
            }
        }
        checked += 1;
    }
}

#[test]
fn provenance_regenerates_forgery_bit_exactly() {
    let index = CocoIndex::load(&toy_corpus().join("annotations.json")).unwrap();
    for meta in index.images().into_iter().take(12) {
        let img = RasterImage::load(&toy_corpus().join(&meta.file_name)).unwrap();
        let masks = index.masks_for(meta).unwrap();
        let cat = masks[0].category.clone();
        let cm = make_copy_move_pair(&meta.file_name, &img, &masks, &cat, 3, &CopyMoveConfig::default());
        let inp = make_inpaint_pair(&meta.file_name, &img, &masks, &cat, 3, 200);
        for pair in [cm, inp].into_iter().flatten() {
            let json = serde_json::to_string(&pair.provenance).unwrap();
            let prov: ForgeryProvenance = serde_json::from_str(&json).unwrap();
            assert_eq!(regenerate_forgery(&img, &masks, &prov).unwrap(), pair.forged);
        }
    }
}

#[test]
fn generate_count_ten_is_balanced_and_deterministic() {
    let corpus = toy_corpus();
    let ann = corpus.join("annotations.json");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = GenerateConfig {
        count: 10,
        seed: 42,
        ..GenerateConfig::default()
    };
    let ma = generate_dataset(&corpus, &ann, a.path(), &cfg).unwrap().manifest;
    generate_dataset(&corpus, &ann, b.path(), &cfg).unwrap();
    assert_eq!(ma.len(), 10);
    let forged = ma.records.iter().filter(|r| r.class_label == Some(ClassLabel::Forged)).count();
    assert_eq!(forged, 5);
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("manifest.jsonl")).unwrap();
    assert_eq!(read(&a), read(&b));
    for r in &ma.records {
        assert_eq!(
            std::fs::read(a.path().join(&r.path)).unwrap(),
            std::fs::read(b.path().join(&r.path)).unwrap()
        );
    }
}

#[test]
fn unreadable_corpus_is_fatal() {
    let out = tempfile::tempdir().unwrap();
    let err = generate_dataset(
        out.path(),
        &out.path().join("missing.json"),
        out.path(),
        &GenerateConfig::default(),
    )
    .unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn blend_identities_are_bit_exact() {
    let fg = random_image(17, 11, 1);
    let bg = random_image(17, 11, 2);
    let mask = ObjectMask::rect(17, 11, 2, 1, 12, 8, "x");
    let full = blend::alpha_blend(&fg, &bg, &mask, &BlendParams { alpha: 1.0, feather_radius: 0 }).unwrap();
    let none = blend::alpha_blend(&fg, &bg, &mask, &BlendParams { alpha: 0.0, feather_radius: 0 }).unwrap();
    assert_eq!(none, bg);
    for i in 0..fg.pixel_count() {
        let want = if mask.bits[i] { &fg } else { &bg };
        assert_eq!(full.data[i * 3..i * 3 + 3], want.data[i * 3..i * 3 + 3]);
    }
}

proptest! {
    #[test]
    fn half_alpha_is_midpoint(f in any::<[u8; 3]>(), b in any::<[u8; 3]>()) {
        let fg = RasterImage::filled(1, 1, f);
        let bg = RasterImage::filled(1, 1, b);
        let mask = ObjectMask::rect(1, 1, 0, 0, 1, 1, "x");
        let out = blend::alpha_blend(&fg, &bg, &mask, &BlendParams { alpha: 0.5, feather_radius: 0 }).unwrap();
        for c in 0..3 {
            let exact = (f[c] as f64 + b[c] as f64) / 2.0;
            prop_assert!((out.data[c] as f64 - exact).abs() <= 1.0);
        }
    }

    #[test]
    fn identity_affine_reproduces_masked_pixels(seed in 0u64..1000, x0 in 0u32..8, y0 in 0u32..8, w in 1u32..8, h in 1u32..8) {
        let img = random_image(16, 16, seed);
        let mask = ObjectMask::rect(16, 16, x0, y0, w, h, "x");
        let (out, moved) = apply_affine(&img, &mask, &AffineParams::identity()).unwrap();
        prop_assert_eq!(&moved.bits, &mask.bits);
        for i in 0..img.pixel_count() {
            if mask.bits[i] {
                prop_assert_eq!(&out.data[i * 3..i * 3 + 3], &img.data[i * 3..i * 3 + 3]);
            }
        }
    }

    #[test]
    fn feather_weights_stay_in_unit_interval(x0 in 0u32..10, y0 in 0u32..10, w in 1u32..10, h in 1u32..10, r in 0u32..4) {
        let mask = ObjectMask::rect(20, 20, x0, y0, w, h, "x");
        let wts = feather_weights(&mask, r);
        for (i, &v) in wts.iter().enumerate() {
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(v > 0.0, mask.bits[i]);
        }
    }
}
