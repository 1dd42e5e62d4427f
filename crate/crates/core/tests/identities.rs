use phibbp::catalog::verify::{
    decay_ratio, residual, verify_all, verify_exact_args, verify_infinite, verify_numeric, Mode, SweepConfig,
};
use phibbp::catalog::{Catalog, IdentityKind};
use phibbp::expr::{Env, Expr};
use phibbp::fixed;
use phibbp::golden::phi_pow;

fn env(name: &str, v: i64) -> Env {
    [(name.to_string(), v)].into_iter().collect()
}

#[test]
fn full_sweep_passes() {
    let report = verify_all(Catalog::builtin(), &SweepConfig::default());
    let failures: Vec<String> = report.failures().map(|r| r.to_string()).collect();
    assert!(failures.is_empty(), "{failures:#?}");
    assert!(report.summaries().len() >= 30);
    assert!(report.rows.len() > 3000);
}

#[test]
fn loose_sweep_passes_trivially() {
    let cfg = SweepConfig { bound: 10, precision: 8, n_terms: 8 };
    assert!(verify_all(Catalog::builtin(), &cfg).all_pass());
}

#[test]
fn exact_steps_hold_for_large_indices() {
    let cat = Catalog::builtin();
    for rec in cat.identities.iter().filter(|r| !r.steps.is_empty() && !r.params.is_empty()) {
        let name = &rec.params[0].name;
        for k in (1..=200).filter(|&k| rec.params[0].contains(k)) {
            let r = verify_exact_args(rec, &env(name, k)).unwrap();
            assert!(r.pass, "{} at {name} = {k}", rec.id);
        }
    }
}

#[test]
fn telescoped_forms_agree_with_each_other_and_the_oracle() {
    let cat = Catalog::builtin();
    let tele = cat.identity("atan-phi-odd-telescoped").unwrap();
    let explicit = cat.identity("tjjg38v").unwrap();
    let p = 128;
    for n in 0..=30 {
        let e = env("n", n);
        let a = tele.rhs.eval_numeric(&e, p).unwrap();
        let b = explicit.rhs.eval_numeric(&e, p).unwrap();
        let oracle = fixed::arctan(&phi_pow(2 * n + 1).embed(p + 8), p);
        assert!(a.sub_exact(&b).abs_le_pow2(2 - p as i64), "n = {n}");
        assert!(a.sub_exact(&oracle).abs_le_pow2(2 - p as i64), "n = {n}");
    }
}

#[test]
fn lucas_chain_is_numerically_the_difference() {
    let cat = Catalog::builtin();
    let (a, b, c) =
        (cat.identity("myyri84").unwrap(), cat.identity("kfqaolk").unwrap(), cat.identity("szjec8z").unwrap());
    for n in [-7, -1, 1, 2, 9, 40] {
        let e = env("n", n);
        let side = |x: &Expr| x.eval_numeric(&e, 140).unwrap();
        let diff_l = side(&a.lhs).sub_exact(&side(&b.lhs));
        let diff_r = side(&a.rhs).sub_exact(&side(&b.rhs));
        let chain = side(&c.lhs).sub_exact(&side(&c.rhs));
        assert!(diff_l.sub_exact(&diff_r).sub_exact(&chain).abs_le_pow2(-130), "n = {n}");
    }
}

#[test]
fn infinite_sums_decay_geometrically() {
    let cat = Catalog::builtin();
    let target = phi_pow(-2).embed(64).to_f64();
    for rec in cat.identities.iter().filter(|r| r.kind == IdentityKind::InfiniteSum) {
        let e = rec.params.first().map_or_else(Env::new, |d| env(&d.name, 1));
        let c = verify_infinite(rec, &e, 64, 128).unwrap();
        assert!(c.pass, "{}", rec.id);
        let ratio = decay_ratio(rec, &e, 10, 40, 128).unwrap();
        assert!((ratio - target).abs() <= 0.05, "{}: {ratio}", rec.id);
    }
}

#[test]
fn numeric_residuals_at_higher_precision() {
    let cat = Catalog::builtin();
    let c = verify_numeric(cat.identity("x2ffu2e").unwrap(), &env("n", 3), 192).unwrap();
    assert!(c.pass);
    let c = verify_numeric(cat.identity("dtctv2m").unwrap(), &Env::new(), 400).unwrap();
    assert!(c.pass);
}

#[test]
fn sweep_reports_modes() {
    let cat = Catalog::builtin();
    let cfg = SweepConfig { bound: 2, precision: 64, n_terms: 20 };
    let report = verify_all(cat, &cfg);
    for mode in [Mode::Numeric, Mode::Exact, Mode::Infinite] {
        assert!(report.rows.iter().any(|r| r.mode == mode));
    }
    // degenerate parameter values never appear in a sweep
    assert!(report.rows.iter().all(|r| r.note.is_none()));
}

#[test]
fn residual_is_large_for_a_false_statement() {
    let cat = Catalog::builtin();
    let mut wrong = cat.identity("nhfkxe6").unwrap().clone();
    wrong.rhs = Expr::parse("atan(1) + 1/3*atan(1/2)").unwrap();
    let r = residual(&wrong, &Env::new(), 64).unwrap();
    assert!(!r.abs_le_pow2(-10));
    assert!(!verify_numeric(&wrong, &Env::new(), 64).unwrap().pass);
}
