//! Randomized algebraic invariants: set algebra and morphology on node
//! masks, expression parsing against an independent evaluator, modular
//! monotonicity, and the thinness classifier's stability rules.

use finecap_core::fieldexpr::{eval_at, parse_expr};
use finecap_core::grid::{Grid, GridSet, ScalarField};
use finecap_core::spaces::{luxemburg_norm, modular, ExponentField, WeightField};
use finecap_core::wiener::{classify_terms, level_term, ClassifyThresholds, Thinness};
use proptest::prelude::*;

const N: usize = 17;

fn g17() -> Grid<f64> {
    Grid::new(2, &[(-1.0, 1.0), (-1.0, 1.0)], &[N, N]).unwrap()
}

fn arb_set() -> impl Strategy<Value = GridSet<f64>> {
    proptest::collection::vec(any::<bool>(), N * N)
        .prop_map(|m| GridSet::from_mask(g17(), m).unwrap())
}

// ── independent expression model ─────────────────────────────────────────

/// Test-side expression tree with its own printer and evaluator, so the
/// production parser/evaluator is checked against a second implementation.
#[derive(Clone, Debug)]
enum Model {
    C(f64),
    X1,
    X2,
    Rho,
    Neg(Box<Model>),
    Add(Box<Model>, Box<Model>),
    Sub(Box<Model>, Box<Model>),
    Mul(Box<Model>, Box<Model>),
    Min(Box<Model>, Box<Model>),
    Max(Box<Model>, Box<Model>),
    Abs(Box<Model>),
    Sin(Box<Model>),
}

impl Model {
    fn print(&self) -> String {
        match self {
            Model::C(v) => format!("{v:?}"),
            Model::X1 => "x1".into(),
            Model::X2 => "x2".into(),
            Model::Rho => "rho".into(),
            Model::Neg(a) => format!("-({})", a.print()),
            Model::Add(a, b) => format!("({} + {})", a.print(), b.print()),
            Model::Sub(a, b) => format!("({} - {})", a.print(), b.print()),
            Model::Mul(a, b) => format!("({} * {})", a.print(), b.print()),
            Model::Min(a, b) => format!("min({}, {})", a.print(), b.print()),
            Model::Max(a, b) => format!("max({}, {})", a.print(), b.print()),
            Model::Abs(a) => format!("abs({})", a.print()),
            Model::Sin(a) => format!("sin({})", a.print()),
        }
    }

    fn eval(&self, x1: f64, x2: f64) -> f64 {
        match self {
            Model::C(v) => *v,
            Model::X1 => x1,
            Model::X2 => x2,
            Model::Rho => (x1 * x1 + x2 * x2).sqrt(),
            Model::Neg(a) => -a.eval(x1, x2),
            Model::Add(a, b) => a.eval(x1, x2) + b.eval(x1, x2),
            Model::Sub(a, b) => a.eval(x1, x2) - b.eval(x1, x2),
            Model::Mul(a, b) => a.eval(x1, x2) * b.eval(x1, x2),
            Model::Min(a, b) => a.eval(x1, x2).min(b.eval(x1, x2)),
            Model::Max(a, b) => a.eval(x1, x2).max(b.eval(x1, x2)),
            Model::Abs(a) => a.eval(x1, x2).abs(),
            Model::Sin(a) => a.eval(x1, x2).sin(),
        }
    }
}

fn arb_model() -> impl Strategy<Value = Model> {
    let leaf = prop_oneof![
        (-4.0..4.0f64).prop_map(Model::C),
        Just(Model::X1),
        Just(Model::X2),
        Just(Model::Rho),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| Model::Neg(Box::new(a))),
            inner.clone().prop_map(|a| Model::Abs(Box::new(a))),
            inner.clone().prop_map(|a| Model::Sin(Box::new(a))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Model::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Model::Sub(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Model::Mul(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Model::Min(Box::new(a), Box::new(b))),
            (inner.clone(), inner)
                .prop_map(|(a, b)| Model::Max(Box::new(a), Box::new(b))),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // ── set algebra ──────────────────────────────────────────────────────

    #[test]
    fn de_morgan_and_difference(a in arb_set(), b in arb_set()) {
        let lhs = a.union(&b).unwrap().complement();
        let rhs = a.complement().intersection(&b.complement()).unwrap();
        prop_assert_eq!(&lhs, &rhs);
        let diff = a.difference(&b).unwrap();
        let via = a.intersection(&b.complement()).unwrap();
        prop_assert_eq!(&diff, &via);
    }

    #[test]
    fn lattice_inclusions_and_counts(a in arb_set(), b in arb_set()) {
        let i = a.intersection(&b).unwrap();
        let u = a.union(&b).unwrap();
        prop_assert!(i.is_subset(&a).unwrap());
        prop_assert!(a.is_subset(&u).unwrap());
        prop_assert_eq!(a.count() + b.count(), u.count() + i.count());
    }

    #[test]
    fn morphology_brackets_and_monotonicity(a in arb_set(), b in arb_set()) {
        prop_assert!(a.erode(1).is_subset(&a).unwrap());
        prop_assert!(a.is_subset(&a.dilate(1)).unwrap());
        let i = a.intersection(&b).unwrap();
        prop_assert!(i.dilate(1).is_subset(&a.dilate(1)).unwrap());
        prop_assert!(i.erode(1).is_subset(&a.erode(1)).unwrap());
    }

    #[test]
    fn erosion_is_dual_to_dilation_away_from_the_edge(a in arb_set()) {
        let eroded = a.erode(1);
        let dual = a.complement().dilate(1).complement();
        // off-grid counts as complement, so erosion is the stricter operation
        prop_assert!(eroded.is_subset(&dual).unwrap());
        // and they agree on nodes with a full in-grid neighborhood
        let inner = GridSet::full(*a.grid()).erode(1);
        let lhs = eroded.intersection(&inner).unwrap();
        let rhs = dual.intersection(&inner).unwrap();
        prop_assert_eq!(&lhs, &rhs);
    }

    #[test]
    fn chebyshev_distance_marks_the_set_and_its_ring(a in arb_set()) {
        let d = a.chebyshev_distance();
        for id in 0..a.grid().node_count() {
            prop_assert_eq!(d[id] == 0, a.contains(id));
            if d[id] == 1 {
                prop_assert!(a.dilate(1).contains(id) && !a.contains(id));
            }
        }
    }

    // ── expression parser vs independent model ──────────────────────────

    #[test]
    fn parser_matches_independent_evaluator(
        m in arb_model(),
        x1 in -2.0..2.0f64,
        x2 in -2.0..2.0f64,
    ) {
        let text = m.print();
        let parsed = parse_expr(&text).unwrap();
        let got: f64 = eval_at(&parsed, &[x1, x2, 0.0], 2).unwrap();
        let want = m.eval(x1, x2);
        prop_assert!(
            (got - want).abs() <= 1e-12 * (1.0 + want.abs()),
            "{text} at ({x1}, {x2}): parsed {got} vs model {want}"
        );
    }

    // ── modular and norm scaling ─────────────────────────────────────────

    #[test]
    fn modular_is_monotone_in_the_integrand(
        vals_a in proptest::collection::vec(-3.0..3.0f64, N * N),
        vals_b in proptest::collection::vec(-3.0..3.0f64, N * N),
        p0 in 1.1..3.5f64,
        th in 0.5..2.0f64,
    ) {
        let g = g17();
        let p = ExponentField::constant(g, p0).unwrap();
        let w = WeightField::constant(g, th).unwrap();
        let f = ScalarField::new(g, vals_a.clone()).unwrap();
        let bigger: Vec<f64> =
            vals_a.iter().zip(&vals_b).map(|(a, b)| a.abs() + b.abs()).collect();
        let h = ScalarField::new(g, bigger).unwrap();
        let mf = modular(&f, &p, &w).unwrap();
        let mh = modular(&h, &p, &w).unwrap();
        prop_assert!(mf <= mh * (1.0 + 1e-12));
        prop_assert_eq!(modular(&ScalarField::zeros(g), &p, &w).unwrap(), 0.0);
    }

    #[test]
    fn luxemburg_norm_is_positively_homogeneous(
        vals in proptest::collection::vec(-3.0..3.0f64, N * N),
        p0 in 1.1..3.5f64,
        c in 0.25..4.0f64,
    ) {
        let g = g17();
        let p = ExponentField::constant(g, p0).unwrap();
        let w = WeightField::constant(g, 1.0).unwrap();
        let f = ScalarField::new(g, vals.clone()).unwrap();
        let scaled =
            ScalarField::new(g, vals.iter().map(|v| c * v).collect()).unwrap();
        let n1 = luxemburg_norm(&f, &p, &w).unwrap();
        let n2 = luxemburg_norm(&scaled, &p, &w).unwrap();
        prop_assert!(
            (n2 - c * n1).abs() <= 1e-4 * (1.0 + c * n1),
            "‖{c}·f‖ = {n2} vs {c}·‖f‖ = {}",
            c * n1
        );
    }

    // ── thinness classifier stability ────────────────────────────────────

    #[test]
    fn geometric_decay_classifies_thin_and_stays_thin(
        last in 1e-6..0.09f64,
        ratio in 0.05..0.8f64,
        n in 4usize..10,
    ) {
        let terms: Vec<f64> =
            (0..n).map(|i| last / ratio.powi((n - 1 - i) as i32)).collect();
        let th = ClassifyThresholds::default();
        let (v, warn) = classify_terms(&terms, &th);
        prop_assert_eq!(v, Thinness::Thin);
        prop_assert!(!warn);

        let mut appended = terms.clone();
        appended.push(0.0);
        prop_assert_eq!(classify_terms(&appended, &th).0, Thinness::Thin);
        let mut appended2 = terms;
        let tiny = last * ratio;
        appended2.push(tiny);
        prop_assert_eq!(classify_terms(&appended2, &th).0, Thinness::Thin);
    }

    #[test]
    fn flat_tails_classify_thick(level in 0.2..1.0f64, n in 4usize..10) {
        let terms = vec![level; n];
        let (v, warn) = classify_terms(&terms, &ClassifyThresholds::default());
        prop_assert_eq!(v, Thinness::Thick);
        prop_assert!(!warn);
    }

    // ── probe-term arithmetic ────────────────────────────────────────────

    #[test]
    fn level_terms_are_clamped_and_monotone(
        num1 in 0.0..10.0f64,
        num2 in 0.0..10.0f64,
        den in 0.001..10.0f64,
        e in 0.3..3.0f64,
    ) {
        let (lo, hi) = if num1 <= num2 { (num1, num2) } else { (num2, num1) };
        let (t_lo, z1) = level_term(lo, den, e);
        let (t_hi, z2) = level_term(hi, den, e);
        prop_assert!(!z1 && !z2);
        prop_assert!((0.0..=1.0).contains(&t_lo) && (0.0..=1.0).contains(&t_hi));
        prop_assert!(t_lo <= t_hi);
        prop_assert_eq!(level_term(0.0, den, e), (0.0, false));
        prop_assert_eq!(level_term(num1, 0.0, e), (1.0, true));
        prop_assert_eq!(level_term(num1, -den, e), (1.0, true));
    }
}
