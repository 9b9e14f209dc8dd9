use std::collections::BTreeMap;

use proptest::prelude::*;

use crate::rational::{rat, ratio, Rational};

use super::*;

fn slot(n: u32) -> SlotId {
    SlotId(n)
}

fn assignment(pairs: &[(i64, u32)]) -> SlotAssignment {
    SlotAssignment::from_pairs(pairs.iter().map(|(v, s)| (rat(*v), SlotId(*s))).collect())
}

#[test]
fn parses_the_worked_equation() {
    let set = parse_equation_set("2 + (3 * 5) = x").unwrap();
    assert_eq!(set.equations.len(), 1);
    let eq = &set.equations[0];
    assert_eq!(
        eq.lhs,
        Expr::binary(
            BinaryOp::Add,
            Expr::Literal(rat(2)),
            Expr::binary(BinaryOp::Mul, Expr::Literal(rat(3)), Expr::Literal(rat(5))),
        )
    );
    assert_eq!(eq.rhs, Expr::Unknown(UnknownId::X));
}

#[test]
fn identity_equation_is_valid() {
    let set = parse_equation_set("x = x").unwrap();
    assert_eq!(set.canonical_string(), "x = x");
}

#[test]
fn reports_syntax_error_position() {
    let err = parse_equation_set("2 + = x").unwrap_err();
    match err {
        ParseError::Syntax { pos, found, expected } => {
            assert_eq!(pos, 4);
            assert_eq!(found, "=");
            assert!(expected.contains(&"number".to_string()));
        }
        other => panic!("expected syntax error, got {other:?}"),
    }
}

#[test]
fn empty_input_is_its_own_error() {
    assert_eq!(parse_equation_set("").unwrap_err(), ParseError::EmptyInput);
    assert_eq!(parse_equation_set(" ;\n ").unwrap_err(), ParseError::EmptyInput);
}

#[test]
fn unary_minus_binds_tighter_than_binary() {
    let set = parse_equation_set("-x + 3 = y").unwrap();
    assert_eq!(
        set.equations[0].lhs,
        Expr::binary(
            BinaryOp::Add,
            Expr::negate(Expr::Unknown(UnknownId::X)),
            Expr::Literal(rat(3)),
        )
    );
}

#[test]
fn multi_equation_sets_split_on_separators() {
    let set = parse_equation_set("x + y = 10\nx - y = 2").unwrap();
    assert_eq!(set.equations.len(), 2);
    let set2 = parse_equation_set("x + y = 10; x - y = 2;").unwrap();
    assert_eq!(set.canonical_string(), set2.canonical_string());
}

#[test]
fn abstraction_follows_the_assignment() {
    let set = parse_equation_set("2 + (3 * 5) = x").unwrap();
    let template = abstract_equations(&set, &assignment(&[(3, 0), (2, 1), (5, 2)])).unwrap();
    assert_eq!(template.canonical(), "B + ( A * C ) = x");
    assert_eq!(template.slots(), &[slot(0), slot(1), slot(2)]);
    assert_eq!(template.unknowns(), &[UnknownId::X]);
}

#[test]
fn unmatched_literals_are_retained() {
    let set = parse_equation_set("x = 7").unwrap();
    let template = abstract_equations(&set, &SlotAssignment::new()).unwrap();
    assert_eq!(template.canonical(), "x = 7");
}

#[test]
fn equal_values_share_a_slot() {
    let set = parse_equation_set("x = 2 + 2").unwrap();
    let template = abstract_equations(&set, &assignment(&[(2, 0)])).unwrap();
    assert_eq!(template.canonical(), "x = A + A");
}

#[test]
fn instantiation_reproduces_the_worked_equation() {
    let template = EquationTemplate::parse("B + ( A * C ) = x").unwrap();
    let values: BTreeMap<SlotId, Rational> =
        [(slot(0), rat(3)), (slot(1), rat(2)), (slot(2), rat(5))].into_iter().collect();
    let set = template.instantiate(&values).unwrap();
    assert_eq!(set, parse_equation_set("2 + (3 * 5) = x").unwrap());
}

#[test]
fn instantiation_with_zero() {
    let template = EquationTemplate::parse("A = x").unwrap();
    let values: BTreeMap<SlotId, Rational> = [(slot(0), rat(0))].into_iter().collect();
    assert_eq!(template.instantiate(&values).unwrap().canonical_string(), "0 = x");
}

#[test]
fn missing_slot_value_is_reported() {
    let template = EquationTemplate::parse("B + ( A * C ) = x").unwrap();
    let values: BTreeMap<SlotId, Rational> =
        [(slot(0), rat(3)), (slot(1), rat(2))].into_iter().collect();
    assert_eq!(template.instantiate(&values).unwrap_err(), MissingSlotValue(slot(2)));
}

#[test]
fn linear_form_of_the_worked_equation() {
    let set = parse_equation_set("2 + (3 * 5) = x").unwrap();
    let forms = to_linear_forms(&set).unwrap();
    assert_eq!(forms.len(), 1);
    assert_eq!(forms[0].constant, rat(17));
    assert_eq!(forms[0].coefficient(UnknownId::X), rat(-1));
}

#[test]
fn nonlinear_products_are_rejected() {
    let set = parse_equation_set("x * x = 4").unwrap();
    assert!(matches!(to_linear_forms(&set), Err(LinearizeError::NonlinearTerm(_))));
    let set = parse_equation_set("1 / x = 2").unwrap();
    assert!(matches!(to_linear_forms(&set), Err(LinearizeError::NonlinearTerm(_))));
}

#[test]
fn division_by_zero_is_rejected() {
    let set = parse_equation_set("x / 0 = 1").unwrap();
    assert_eq!(to_linear_forms(&set), Err(LinearizeError::DivisionByZero));
}

#[test]
fn solves_single_unknown() {
    let set = parse_equation_set("17 - x = 0").unwrap();
    let solution = solve_linear_system(&to_linear_forms(&set).unwrap()).unwrap();
    assert_eq!(solution[&UnknownId::X], rat(17));
}

#[test]
fn solves_two_by_two_system() {
    let set = parse_equation_set("x + y - 10 = 0; x - y - 2 = 0").unwrap();
    let solution = solve_linear_system(&to_linear_forms(&set).unwrap()).unwrap();
    assert_eq!(solution[&UnknownId::X], rat(6));
    assert_eq!(solution[&UnknownId::Y], rat(4));
}

#[test]
fn underdetermined_and_inconsistent_systems() {
    let set = parse_equation_set("x + y - 10 = 0").unwrap();
    assert_eq!(
        solve_linear_system(&to_linear_forms(&set).unwrap()),
        Err(SolveError::Underdetermined)
    );
    let set = parse_equation_set("x + y = 10; x + y = 11").unwrap();
    assert_eq!(
        solve_linear_system(&to_linear_forms(&set).unwrap()),
        Err(SolveError::Inconsistent)
    );
}

#[test]
fn fractional_solutions_stay_exact() {
    let set = parse_equation_set("3 * x = 1").unwrap();
    let solution = solve_linear_system(&to_linear_forms(&set).unwrap()).unwrap();
    assert_eq!(solution[&UnknownId::X], ratio(1, 3));
}

#[test]
fn canonical_is_whitespace_invariant() {
    let a = EquationTemplate::parse(" B +(A* C)=x ").unwrap();
    let b = EquationTemplate::parse("B + (A * C) = x").unwrap();
    assert_eq!(a.canonical(), b.canonical());
    assert_eq!(a, b);
}

#[test]
fn canonical_examples() {
    assert_eq!(EquationTemplate::parse("B+(A*C)=x").unwrap().canonical(), "B + ( A * C ) = x");
    assert_eq!(EquationTemplate::parse("x=x").unwrap().canonical(), "x = x");
    assert_eq!(EquationTemplate::parse("0.5*A=x").unwrap().canonical(), "0.5 * A = x");
}

#[test]
fn slot_ids_extend_past_z() {
    assert_eq!(SlotId(0).to_string(), "A");
    assert_eq!(SlotId(25).to_string(), "Z");
    assert_eq!(SlotId(26).to_string(), "A1");
    assert_eq!(SlotId(27).to_string(), "B1");
    assert_eq!(SlotId(52).to_string(), "A2");
    for n in [0, 1, 25, 26, 27, 52, 199] {
        assert_eq!(SlotId::parse(&SlotId(n).to_string()), Some(SlotId(n)));
    }
}

#[test]
fn normalizing_literal_constructor() {
    // Negative values become negations, thirds become explicit divisions.
    assert_eq!(Expr::literal(rat(-2)), Expr::negate(Expr::Literal(rat(2))));
    assert_eq!(
        Expr::literal(ratio(1, 3)),
        Expr::binary(BinaryOp::Div, Expr::Literal(rat(1)), Expr::Literal(rat(3)))
    );
    assert_eq!(Expr::literal(ratio(3, 4)), Expr::Literal(ratio(3, 4)));
}

#[test]
fn templates_without_unknowns_are_invalid() {
    let set = parse_equation_set("2 + 2 = 4").unwrap();
    assert_eq!(abstract_equations(&set, &SlotAssignment::new()), Err(TemplateError::NoUnknowns));
}

// Random expression trees for the structural properties below.
fn arb_expr(depth: u32, with_slots: bool) -> BoxedStrategy<Expr> {
    let literal =
        (0u32..40, 1u32..4).prop_map(|(n, k)| Expr::Literal(ratio(n as i64, 10i64.pow(k % 3))));
    let unknown = prop_oneof![Just(UnknownId::X), Just(UnknownId::Y), Just(UnknownId::Z)]
        .prop_map(Expr::Unknown);
    let leaf = if with_slots {
        prop_oneof![literal, (0u32..4).prop_map(|s| Expr::Slot(SlotId(s))), unknown].boxed()
    } else {
        prop_oneof![literal, unknown].boxed()
    };
    leaf.prop_recursive(depth, 24, 2, |inner| {
        prop_oneof![
            (inner.clone()).prop_map(Expr::negate),
            (
                prop_oneof![
                    Just(BinaryOp::Add),
                    Just(BinaryOp::Sub),
                    Just(BinaryOp::Mul),
                    Just(BinaryOp::Div)
                ],
                inner.clone(),
                inner
            )
                .prop_map(|(op, l, r)| Expr::binary(op, l, r)),
        ]
    })
    .boxed()
}

fn arb_set(with_slots: bool) -> impl Strategy<Value = EquationSet> {
    proptest::collection::vec((arb_expr(3, with_slots), arb_expr(3, with_slots)), 1..3).prop_map(
        |pairs| EquationSet {
            equations: pairs.into_iter().map(|(lhs, rhs)| Equation { lhs, rhs }).collect(),
        },
    )
}

proptest! {
    #[test]
    fn canonical_reparses_to_identical_structure(set in arb_set(true)) {
        let canonical = set.canonical_string();
        let reparsed = parse_equation_set(&canonical).unwrap();
        prop_assert_eq!(&reparsed, &set);
        prop_assert_eq!(reparsed.canonical_string(), canonical);
    }

    #[test]
    fn abstraction_round_trips(set in arb_set(false)) {
        // Assign slots to the first few literal values in appearance order.
        let values = set.literal_values();
        let mut assignment = SlotAssignment::new();
        for (i, v) in values.iter().take(3).enumerate() {
            assignment.push(v.clone(), SlotId(i as u32));
        }
        if let Ok(template) = abstract_equations(&set, &assignment) {
            let instantiated = template.instantiate(&assignment.values()).unwrap();
            prop_assert_eq!(instantiated, set);
        }
    }

    #[test]
    fn solver_solutions_satisfy_every_form(
        coeffs in proptest::collection::vec((-10i64..=10, -10i64..=10, -20i64..=20), 1..4)
    ) {
        let forms: Vec<LinearForm> = coeffs
            .iter()
            .map(|(a, b, c)| {
                let mut f = LinearForm::constant(rat(*c));
                f = f.add(&LinearForm::unknown(UnknownId::X).scale(&rat(*a)));
                f = f.add(&LinearForm::unknown(UnknownId::Y).scale(&rat(*b)));
                f
            })
            .collect();
        if let Ok(solution) = solve_linear_system(&forms) {
            for form in &forms {
                prop_assert_eq!(form.eval(&solution).unwrap(), Rational::from_integer(0.into()));
            }
        }
    }
}
