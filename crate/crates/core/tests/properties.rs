use std::collections::BTreeSet;

use num_rational::Rational64;
use proptest::prelude::*;

use recipe_amounts::amount_models::{ce_loss, predict_topk, softmax, TopK};
use recipe_amounts::metrics_eval::{detect, iou, range_l1_error, recall, relative_calorie_error};
use recipe_amounts::quantity_parser::parse_quantity;
use recipe_amounts::vectorizer::{normalize_amounts, scale_to_sum, RecipeVector};
use recipe_amounts::{parse_ingredient_line, LineParse, Quantity, UnitVocabulary};

const UNITS: &[&str] = &[
    "cup",
    "ounce",
    "teaspoon",
    "tablespoon",
    "pound",
    "gram",
    "clove",
    "can",
    "pinch",
];
const NAMES: &[&str] = &[
    "flour",
    "butter",
    "cheese_ravioli",
    "brown sugar",
    "chicken breast",
    "garlic",
];

fn rational() -> impl Strategy<Value = Rational64> {
    (1i64..400, 1i64..=16).prop_map(|(n, d)| Rational64::new(n, d))
}

fn quantity() -> impl Strategy<Value = Quantity> {
    prop_oneof![
        rational().prop_map(Quantity::exact),
        (rational(), rational()).prop_map(|(a, b)| if a <= b {
            Quantity::range(a, b)
        } else {
            Quantity::range(b, a)
        }),
    ]
}

fn amounts(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 0.01f64..500.0], dim)
}

fn nonzero_amounts(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    amounts(dim).prop_filter("needs a positive entry", |v| v.iter().any(|x| *x > 0.0))
}

fn set(indices: &[usize]) -> BTreeSet<usize> {
    indices.iter().copied().collect()
}

proptest! {
    #[test]
    fn quantity_text_round_trips(q in quantity()) {
        prop_assert_eq!(parse_quantity(&q.render()).unwrap(), q);
    }

    #[test]
    fn parsed_line_render_round_trips(
        q in quantity(),
        unit in prop::sample::select(UNITS),
        size in prop::sample::select(&["", "large ", "small "][..]),
        name in prop::sample::select(NAMES),
    ) {
        let vocab = UnitVocabulary::bundled();
        let line = format!("{} {size}{unit} {name}", q.render());
        let LineParse::Parsed(first) = parse_ingredient_line(&line, &vocab) else {
            return Err(TestCaseError::fail(format!("{line:?} did not parse")));
        };
        prop_assert_eq!(first.quantity, q);
        prop_assert_eq!(&first.ingredient_name, name);
        let LineParse::Parsed(second) = parse_ingredient_line(&first.render(), &vocab) else {
            return Err(TestCaseError::fail("rendered line did not parse".to_string()));
        };
        prop_assert_eq!(second.quantity, first.quantity);
        prop_assert_eq!(second.unit, first.unit);
        prop_assert_eq!(second.size_multiplier, first.size_multiplier);
        prop_assert_eq!(second.ingredient_name, first.ingredient_name);
    }

    #[test]
    fn normalized_sum_is_the_constant(v in nonzero_amounts(12), c in prop_oneof![Just(1.0), Just(1000.0), 0.5f64..5000.0]) {
        let s: f64 = scale_to_sum(&v, c).unwrap().iter().sum();
        prop_assert!((s - c).abs() <= 1e-9 * c);
    }

    #[test]
    fn all_zero_vector_does_not_normalize(c in 0.5f64..5000.0) {
        prop_assert!(scale_to_sum(&[0.0; 5], c).is_none());
        prop_assert!(normalize_amounts(&RecipeVector::zeros("z", 5), c).is_err());
    }

    #[test]
    fn softmax_is_a_distribution(z in prop::collection::vec(-700.0f64..700.0, 1..20)) {
        let p = softmax(&z);
        prop_assert!(p.iter().all(|x| x.is_finite() && *x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn cross_entropy_is_minimized_by_the_target(y in nonzero_amounts(6), noise in amounts(6)) {
        let y = scale_to_sum(&y, 1.0).unwrap();
        let mixed: Vec<f64> = y.iter().zip(&noise).map(|(a, b)| a + b / 1000.0).collect();
        let x = scale_to_sum(&mixed, 1.0).unwrap();
        prop_assert!(ce_loss(&y, &y).unwrap() <= ce_loss(&x, &y).unwrap() + 1e-12);
    }

    #[test]
    fn topk_contract(v in prop::collection::vec(prop_oneof![Just(0.0), Just(1.0), -1.0f64..5.0], 1..25), k in 1usize..30) {
        match predict_topk(&v, k, 1000.0) {
            TopK::Degenerate(out) => {
                prop_assert!(v.iter().all(|x| *x <= 0.0));
                prop_assert!(out.iter().all(|x| *x == 0.0));
            }
            TopK::Normalized(out) => {
                let kept: Vec<usize> = (0..v.len()).filter(|&i| out[i] > 0.0).collect();
                prop_assert!(kept.len() <= k);
                prop_assert!((out.iter().sum::<f64>() - 1000.0).abs() <= 1e-9);
                for &i in &kept {
                    for j in 0..v.len() {
                        if out[j] == 0.0 {
                            prop_assert!(v[i] >= v[j]);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn l1_without_ranges_is_plain_l1(y in nonzero_amounts(8), x in nonzero_amounts(8)) {
        let ny = scale_to_sum(&y, 1000.0).unwrap();
        let nx = scale_to_sum(&x, 1000.0).unwrap();
        let plain: f64 = ny.iter().zip(&nx).map(|(a, b)| (a - b).abs()).sum();
        let got = range_l1_error(&y, &[0.0; 8], &x, 1000.0).unwrap();
        prop_assert!((got - plain).abs() <= 1e-9 * plain.max(1.0));
    }

    #[test]
    fn l1_does_not_grow_with_wider_ranges(
        y in nonzero_amounts(8),
        x in nonzero_amounts(8),
        r in prop::collection::vec(0.0f64..100.0, 8),
        extra in prop::collection::vec(0.0f64..100.0, 8),
    ) {
        let wider: Vec<f64> = r.iter().zip(&extra).map(|(a, b)| a + b).collect();
        let narrow = range_l1_error(&y, &r, &x, 1000.0).unwrap();
        let wide = range_l1_error(&y, &wider, &x, 1000.0).unwrap();
        prop_assert!(wide <= narrow);
    }

    #[test]
    fn rce_does_not_depend_on_scale(
        y in nonzero_amounts(8),
        x in nonzero_amounts(8),
        cal in prop::collection::vec(0.1f64..9.0, 8),
        a in 0.001f64..1000.0,
    ) {
        let base = relative_calorie_error(&y, &x, &cal).unwrap();
        let ys: Vec<f64> = y.iter().map(|v| v * a).collect();
        let scaled = relative_calorie_error(&ys, &x, &cal).unwrap();
        prop_assert!((base - scaled).abs() <= 1e-9 * base.max(1.0));
    }

    #[test]
    fn recall_and_iou_match_brute_force(
        gt in prop::collection::btree_set(0usize..20, 1..10),
        pred in prop::collection::btree_set(0usize..20, 0..10),
    ) {
        let inter = (0..20).filter(|i| gt.contains(i) && pred.contains(i)).count() as f64;
        let union = (0..20).filter(|i| gt.contains(i) || pred.contains(i)).count() as f64;
        prop_assert_eq!(recall(&gt, &pred).unwrap(), inter / gt.len() as f64);
        prop_assert_eq!(iou(&gt, &pred).unwrap(), inter / union);
    }
}

#[test]
fn detect_keeps_positive_entries() {
    assert_eq!(detect(&[0.0, 2.0, 0.0, 0.5]), set(&[1, 3]));
}
