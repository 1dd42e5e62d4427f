use phibbp::bbp::digits::{bbp_digits, digits_from_value, oracle_precision};
use phibbp::bbp::{within, BbpError, BbpFormula};
use phibbp::catalog::Catalog;
use phibbp::expr::Env;

fn formula(name: &str) -> BbpFormula {
    Catalog::builtin().formula(name).unwrap().to_formula().unwrap()
}

fn all() -> Vec<BbpFormula> {
    Catalog::builtin().formulas.iter().map(|f| f.to_formula().unwrap()).collect()
}

#[test]
fn every_formula_matches_its_target() {
    for f in all() {
        let p = if f.is_digit_eligible() { 128 } else { 256 };
        let series = f.eval(p);
        let target = f.lhs.eval_numeric(&Env::new(), p).unwrap();
        assert!(within(&series, &target, 1 - p as i64), "{}: {series} vs {target}", f.name);
    }
}

#[test]
fn eligibility_splits_integer_and_golden_bases() {
    for f in all() {
        assert_eq!(f.is_digit_eligible(), f.base().as_integer().is_some(), "{}", f.name);
    }
    let err = bbp_digits(&formula("pi-phinary"), 0, 4).unwrap_err();
    assert!(matches!(err, BbpError::NotEligible { .. }));
    assert!(err.to_string().contains("integer base"));
}

#[test]
fn both_pi_formulas_agree() {
    let a = formula("pi-phinary").eval(300);
    let b = formula("pi-phinary-12").eval(300);
    assert!(within(&a, &b, -298));
    assert!(a.to_decimal_string(30).starts_with("3.141592653589793238462643383279"));
}

#[test]
fn extracted_digits_match_full_evaluation() {
    for f in all().into_iter().filter(|f| f.is_digit_eligible()) {
        let b = f.base().as_integer().unwrap().try_into().unwrap();
        for d in [0u64, 10, 57, 100] {
            let oracle = f.eval(oracle_precision(b, d, 4));
            assert_eq!(bbp_digits(&f, d, 4).unwrap(), digits_from_value(&oracle, b, d, 4), "{} at {d}", f.name);
        }
    }
}

#[test]
fn arctan_phi_hex_prefix() {
    // atan(φ) = 1.0172219678978513677...
    let digits = bbp_digits(&formula("arctan-phi"), 0, 8).unwrap();
    let oracle = formula("arctan-phi").lhs.eval_numeric(&Env::new(), 96).unwrap();
    assert_eq!(digits, digits_from_value(&oracle, 16, 0, 8));
    assert!(oracle.to_decimal_string(12).starts_with("1.017221967897"));
}

#[test]
fn base_15625_digits() {
    let f = formula("arctan-phi-over-sqrt5-combo");
    let digits = bbp_digits(&f, 0, 4).unwrap();
    assert!(digits.iter().all(|&d| d < 15625));
    let oracle = f.lhs.eval_numeric(&Env::new(), oracle_precision(15625, 0, 4)).unwrap();
    assert_eq!(digits, digits_from_value(&oracle, 15625, 0, 4));
}

#[test]
fn out_of_bounds_requests() {
    let f = formula("arctan-phi");
    assert!(matches!(bbp_digits(&f, 0, 0), Err(BbpError::OutOfBounds(_))));
    assert!(matches!(bbp_digits(&f, 20_000_000, 4), Err(BbpError::OutOfBounds(_))));
}
