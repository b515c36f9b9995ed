use super::*;

#[test]
fn gray_code_of_five_is_seven() {
    assert_eq!(gray_encode(5), 7);
    assert_eq!(gray_decode(7), 5);
}

#[test]
fn gray_code_zero_is_dark_in_every_x_pattern() {
    let spec = GrayCodeSpec::new(16, 16).unwrap();
    assert_eq!(gray_encode(0), 0);
    for frame in 2..spec.pattern_count() {
        let role_is_x_non_inverted = (frame - 2) % 2 == 0 && (frame - 2) / 2 < spec.bits_x() as usize;
        if role_is_x_non_inverted {
            assert!(!spec.pattern_value(frame, 0, 3));
        }
    }
}

#[test]
fn gray_codes_are_distinct_for_width_1024() {
    let mut seen = std::collections::HashSet::new();
    for c in 0..1024u32 {
        assert!(seen.insert(gray_encode(c)));
    }
}

#[test]
fn consecutive_codes_differ_in_one_bit() {
    for c in 0..2047u32 {
        let diff = gray_encode(c) ^ gray_encode(c + 1);
        assert_eq!(diff.count_ones(), 1);
    }
}

#[test]
fn pattern_count_includes_references_and_inverses() {
    let spec = GrayCodeSpec::new(1024, 768).unwrap();
    assert_eq!(spec.bits_x(), 10);
    assert_eq!(spec.bits_y(), 10);
    assert_eq!(spec.pattern_count(), 2 + 2 * 20);

    let mut no_inv = spec;
    no_inv.use_inverse_patterns = false;
    assert_eq!(no_inv.pattern_count(), 2 + 20);
}

#[test]
fn projector_self_view_decodes_to_identity() {
    // feeding the pattern stack itself through the decoder recovers each
    // pixel's own coordinates
    let spec = GrayCodeSpec::new(32, 20).unwrap();
    let stack = generate_patterns(&spec);
    let map = decode(&stack, &spec, &DecodeOptions::default()).unwrap();
    assert_eq!(map.decoded_count(), 32 * 20);
    for y in 0..20 {
        for x in 0..32 {
            assert_eq!(map.code_at(x, y), Some((x as u32, y as u32)));
        }
    }
}

#[test]
fn self_view_decodes_without_inverse_patterns_too() {
    let mut spec = GrayCodeSpec::new(17, 9).unwrap();
    spec.use_inverse_patterns = false;
    let stack = generate_patterns(&spec);
    let map = decode(&stack, &spec, &DecodeOptions::default()).unwrap();
    for y in 0..9 {
        for x in 0..17 {
            assert_eq!(map.code_at(x, y), Some((x as u32, y as u32)));
        }
    }
}

#[test]
fn all_black_stack_is_undecodable() {
    let spec = GrayCodeSpec::new(8, 8).unwrap();
    let stack: Vec<_> = (0..spec.pattern_count()).map(|_| GrayImage::new(6, 6)).collect();
    let map = decode(&stack, &spec, &DecodeOptions::default()).unwrap();
    assert_eq!(map.decoded_count(), 0);
}

#[test]
fn stack_length_mismatch_is_an_argument_error() {
    let spec = GrayCodeSpec::new(8, 8).unwrap();
    let stack = vec![GrayImage::new(4, 4); 3];
    assert!(decode(&stack, &spec, &DecodeOptions::default()).is_err());
}

#[test]
fn out_of_range_codes_are_dropped() {
    // a 6-wide projector uses 3 column bits; a stack claiming column 7 must
    // not produce a code
    let spec = GrayCodeSpec::new(6, 4).unwrap();
    let mut stack = generate_patterns(&spec);
    // overwrite every x-bit frame so each pixel reads gray code 0b100 -> 7
    let g = gray_encode(7);
    for idx in 0..spec.bits_x() as usize {
        let bit = spec.bits_x() as usize - 1 - idx;
        let on = (g >> bit) & 1 == 1;
        for frame in [2 + 2 * idx, 2 + 2 * idx + 1] {
            let inverted = frame % 2 == 1;
            let v = if on != inverted { 1.0 } else { 0.0 };
            stack[frame].data.fill(v);
        }
    }
    let map = decode(&stack, &spec, &DecodeOptions::default()).unwrap();
    assert_eq!(map.decoded_count(), 0);
}

#[test]
fn centroid_uses_pixel_center_convention() {
    let mut map = CodeMap {
        width: 8,
        height: 8,
        codes: vec![None; 64],
        confidence: vec![1.0; 64],
    };
    map.codes[3 * 8 + 2] = Some((5, 5)); // pixel (2,3)
    map.codes[3 * 8 + 3] = Some((5, 5)); // pixel (3,3)
    map.codes[0] = Some((1, 2)); // pixel (0,0)
    let features = extract_features(&map, &FeatureOptions::default());
    let f = features[&(5, 5)];
    assert_eq!(f.position, (3.0, 3.5));
    assert_eq!(f.support, 2);
    assert_eq!(features[&(1, 2)].position, (0.5, 0.5));
}

#[test]
fn oversupported_codes_are_discarded() {
    let mut map = CodeMap {
        width: 16,
        height: 16,
        codes: vec![Some((0, 0)); 256],
        confidence: vec![1.0; 256],
    };
    map.codes[0] = Some((1, 1));
    let features = extract_features(&map, &FeatureOptions { support_cap: 64 });
    assert!(!features.contains_key(&(0, 0))); // 255 supporting pixels > cap
    assert!(features.contains_key(&(1, 1)));
}

#[test]
fn feature_positions_lie_inside_image_bounds() {
    let spec = GrayCodeSpec::new(16, 16).unwrap();
    let stack = generate_patterns(&spec);
    let map = decode(&stack, &spec, &DecodeOptions::default()).unwrap();
    let features = extract_features(&map, &FeatureOptions::default());
    for f in features.values() {
        assert!(f.position.0 > 0.0 && f.position.0 < 16.0);
        assert!(f.position.1 > 0.0 && f.position.1 < 16.0);
    }
}
