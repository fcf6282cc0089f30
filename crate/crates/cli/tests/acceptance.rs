//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion
//! (visible with `--nocapture`) and fails if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use ipslab_core::coins::DEFAULT_TOSS_BUDGET;
use ipslab_core::harness::{
    exact_upower64_acceptance, exact_usquare_acceptance, exhaustive_tape_detection, fit_log_linear,
    fit_power_law, four_counter_trials, membership_bit_trials, membership_digit_probability,
    run_trials, weak_ips_estimator, TrialPlan, TrialStats,
};
use ipslab_core::langspace::{dima2_member, lex_unrank, Alphabet, BitTail, LanguageSpec};
use ipslab_core::protocols::{ProtocolContext, ProtocolId};
use ipslab_core::provers::{cheat_catalog, ProverSpec};
use ipslab_core::runtime::ResourceBudget;
use num_rational::Ratio;
use num_traits::ToPrimitive;

const SEED: u64 = 0x5eed_acce;
const SIGMAS: f64 = 3.0;
/// Step cap for strategies that never stop talking.
const CHEAT_STEPS: u64 = 2_000_000;

type Check = fn(&mut Criterion);

/// Outcome of one criterion: every failed sub-check, by description.
#[derive(Default)]
struct Criterion {
    checks: usize,
    failures: Vec<String>,
}

impl Criterion {
    fn expect(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures.push(what());
        }
    }

    fn error(&mut self, e: impl std::fmt::Display) {
        self.checks += 1;
        self.failures.push(format!("error: {e}"));
    }
}

fn unary(n: u64) -> Vec<u8> {
    vec![b'a'; n as usize]
}

fn bit_rule(alphabet: Alphabet, prefix: &[u8], tail: BitTail) -> LanguageSpec {
    LanguageSpec::bit_rule(alphabet, prefix.to_vec(), tail).unwrap()
}

fn plan(
    protocol: ProtocolId,
    input: &[u8],
    prover: ProverSpec,
    ctx: &ProtocolContext,
    steps: u64,
) -> TrialPlan {
    TrialPlan::new(protocol, input.to_vec(), prover, ctx.clone())
        .with_budget(ResourceBudget::with_steps(steps))
}

fn trials(c: &mut Criterion, p: &TrialPlan, n: u64, seed: u64) -> Option<TrialStats> {
    match run_trials(p, n, seed, 0) {
        Ok(s) => Some(s),
        Err(e) => {
            c.error(format!(
                "{} on {} symbols: {e}",
                p.prover.id(),
                p.input.len()
            ));
            None
        }
    }
}

/// `|observed - expected| <= 3σ` for a rate over `decided` runs.
fn within_sigmas(observed: f64, expected: f64, decided: u64) -> bool {
    let sigma = (expected * (1.0 - expected) / decided as f64).sqrt();
    (observed - expected).abs() <= SIGMAS * sigma + 1e-12
}

fn label(p: &TrialPlan) -> String {
    format!(
        "{} on n={}",
        serde_json::to_string(&p.prover).unwrap(),
        p.input.len()
    )
}

fn membership_bits(c: &mut Criterion) {
    let languages = [
        bit_rule(Alphabet::unary(), &[1, 0, 1], BitTail::AllZero),
        bit_rule(Alphabet::unary(), &[0, 1, 0], BitTail::AllOne),
    ];
    for (i, spec) in languages.iter().enumerate() {
        for k in 1..=3u32 {
            let start = Instant::now();
            let m = match membership_bit_trials(
                spec,
                k,
                DEFAULT_TOSS_BUDGET,
                10_000,
                SEED + i as u64,
                1,
            ) {
                Ok(m) => m,
                Err(e) => return c.error(e),
            };
            let elapsed = start.elapsed();
            c.expect(m.correct_rate >= 0.73, || {
                format!("L{i} k={k}: correct {}", m.correct_rate)
            });
            c.expect(elapsed < Duration::from_secs(120), || {
                format!("L{i} k={k}: {elapsed:?}")
            });
            let one = membership_digit_probability(spec, k).unwrap();
            let oracle = if m.member { one } else { 1.0 - one };
            c.expect(within_sigmas(m.correct_rate, oracle, m.trials), || {
                format!("L{i} k={k}: correct {} vs exact {oracle}", m.correct_rate)
            });
        }
    }
}

fn usquare_members(c: &mut Criterion) {
    let ctx = ProtocolContext::default();
    for root in 2..=5u64 {
        let p = plan(
            ProtocolId::Usquare,
            &unary(root * root),
            ProverSpec::Honest,
            &ctx,
            1 << 34,
        );
        if let Some(s) = trials(c, &p, 10_000, SEED + root) {
            c.expect(s.accepts == 10_000, || {
                format!("a^{}: {} accepts", root * root, s.accepts)
            });
        }
    }
}

/// Every catalog cheat on every input: rejection at least `floor`, and
/// finite certificates within 3σ of the exact acceptance.
fn catalog_sweep(
    c: &mut Criterion,
    protocol: ProtocolId,
    inputs: &[u64],
    floor: f64,
    strict: bool,
    n_trials: u64,
) {
    let ctx = ProtocolContext::default();
    for &n in inputs {
        let input = unary(n);
        for (j, prover) in cheat_catalog(protocol, &input).into_iter().enumerate() {
            let p = plan(protocol, &input, prover, &ctx, CHEAT_STEPS);
            let Some(s) = trials(c, &p, n_trials, SEED ^ (n << 8) ^ j as u64) else {
                continue;
            };
            let margin = s.reject_slack();
            let ok = if strict {
                s.reject_rate > floor - margin
            } else {
                s.reject_rate >= floor - margin
            };
            c.expect(ok, || {
                format!(
                    "{}: reject {} (slack {margin:.4})",
                    label(&p),
                    s.reject_rate
                )
            });
            let cert = p.prover.finite_certificate(protocol, &input).unwrap();
            if let Some(y) = cert {
                let exact = match protocol {
                    ProtocolId::Usquare => exact_usquare_acceptance(n, &y, ctx.params.walk),
                    _ => exact_upower64_acceptance(n, &y, ctx.params.walk),
                };
                let exact = exact.to_f64().unwrap();
                c.expect(within_sigmas(s.accept_rate, exact, s.decided()), || {
                    format!("{}: accept {} vs exact {exact}", label(&p), s.accept_rate)
                });
            }
        }
    }
}

fn usquare_non_squares(c: &mut Criterion) {
    let inputs: Vec<u64> = (5..=24).filter(|&n| ![9, 16].contains(&n)).collect();
    catalog_sweep(c, ProtocolId::Usquare, &inputs, 3.0 / 16.0, false, 2000);
}

fn exponent(c: &mut Criterion, plans: &[TrialPlan], n_trials: u64) -> Option<f64> {
    let mut points = Vec::new();
    for (i, p) in plans.iter().enumerate() {
        let s = trials(c, p, n_trials, SEED + i as u64)?;
        c.expect(s.timeouts == 0, || {
            format!("{}: {} timeouts", label(p), s.timeouts)
        });
        points.push((p.input.len() as f64, s.mean_steps));
    }
    fit_power_law(&points).map(|f| f.exponent)
}

fn usquare_growth(c: &mut Criterion) {
    let ctx = ProtocolContext::default();
    let sizes = [16u64, 32, 64, 128, 256];
    for prover in cheat_catalog(ProtocolId::Usquare, &unary(16))
        .into_iter()
        .filter(|p| !p.is_finite())
    {
        let plans: Vec<TrialPlan> = sizes
            .iter()
            .map(|&n| {
                plan(
                    ProtocolId::Usquare,
                    &unary(n),
                    prover.clone(),
                    &ctx,
                    1 << 32,
                )
            })
            .collect();
        if let Some(e) = exponent(c, &plans, 500) {
            c.expect((1.7..=2.3).contains(&e), || {
                format!("{}: exponent {e}", prover.id())
            });
        }
    }
    let members: Vec<TrialPlan> = (4..=16u64)
        .map(|r| {
            plan(
                ProtocolId::Usquare,
                &unary(r * r),
                ProverSpec::Honest,
                &ctx,
                1 << 32,
            )
        })
        .collect();
    if let Some(e) = exponent(c, &members, 200) {
        c.expect(e <= 1.7, || format!("members: exponent {e}"));
    }
}

fn upower64(c: &mut Criterion) {
    let ctx = ProtocolContext::default();
    let p = plan(
        ProtocolId::Upower64,
        &unary(4096),
        ProverSpec::Honest,
        &ctx,
        1 << 34,
    );
    if let Some(s) = trials(c, &p, 10_000, SEED) {
        c.expect(s.accepts == 10_000, || {
            format!("a^4096: {} accepts", s.accepts)
        });
    }
    catalog_sweep(
        c,
        ProtocolId::Upower64,
        &[2, 63, 65, 128, 4033, 4095, 4097],
        33.0 / 100.0,
        true,
        1000,
    );
}

fn dima2(c: &mut Criterion) {
    let ctx = ProtocolContext::default();
    let w1 = dima2_member(1);
    c.expect(w1.len() == 83, || format!("|w1| = {}", w1.len()));
    let honest = plan(
        ProtocolId::Dima2,
        &w1,
        ProverSpec::Honest,
        &ctx,
        CHEAT_STEPS,
    );
    if let Some(s) = trials(c, &honest, 10_000, SEED) {
        c.expect(s.accepts == 10_000, || format!("w1: {} accepts", s.accepts));
        c.expect(s.sweeping_violations == 0, || {
            "w1: sweeping violated".into()
        });
    }
    let check = |c: &mut Criterion, p: TrialPlan, n: u64, seed: u64| {
        if let Some(s) = trials(c, &p, n, seed) {
            c.expect(s.reject_rate >= 1.0 / 3.0 - s.reject_slack(), || {
                format!("{}: reject {}", label(&p), s.reject_rate)
            });
            c.expect(s.sweeping_violations == 0, || {
                format!("{}: sweeping violated", label(&p))
            });
        }
    };
    for i in 0..w1.len() {
        let mut m = w1.clone();
        m[i] = if m[i] == b'0' { b'1' } else { b'0' };
        for (j, prover) in cheat_catalog(ProtocolId::Dima2, &m).into_iter().enumerate() {
            check(
                c,
                plan(ProtocolId::Dima2, &m, prover, &ctx, CHEAT_STEPS),
                100,
                SEED ^ ((i as u64) << 4) ^ j as u64,
            );
        }
    }
    let wrong = [
        ProverSpec::PeriodicBlocks { m: None },
        ProverSpec::MutatedEcho { position: None },
        ProverSpec::TruncatedEcho,
        ProverSpec::MemberEcho { k: 2 },
    ];
    for (j, prover) in wrong.into_iter().enumerate() {
        check(
            c,
            plan(ProtocolId::Dima2, &w1, prover, &ctx, CHEAT_STEPS),
            2000,
            SEED + j as u64,
        );
    }
    let members: Vec<TrialPlan> = (1..=3)
        .map(|k| {
            plan(
                ProtocolId::Dima2,
                &dima2_member(k),
                ProverSpec::Honest,
                &ctx,
                1 << 32,
            )
        })
        .collect();
    if let Some(e) = exponent(c, &members, 100) {
        c.expect((0.8..=1.2).contains(&e), || format!("exponent {e}"));
    }
}

/// Honest acceptance on a member index and rejection, honest or not, on a
/// non-member index.
fn set_verifier(
    c: &mut Criterion,
    protocol: ProtocolId,
    input: &[u8],
    member: &[u8],
    non_member: &[u8],
    bounds: (f64, f64),
) {
    let spec = |prefix: &[u8]| {
        ProtocolContext::with_spec(bit_rule(Alphabet::unary(), prefix, BitTail::AllZero))
    };
    let p = plan(
        protocol,
        input,
        ProverSpec::Honest,
        &spec(member),
        CHEAT_STEPS,
    );
    if let Some(s) = trials(c, &p, 10_000, SEED) {
        c.expect(s.accept_rate >= bounds.0 - s.accept_slack(), || {
            format!("member: accept {}", s.accept_rate)
        });
    }
    let ctx = spec(non_member);
    let provers = std::iter::once(ProverSpec::Honest).chain(cheat_catalog(protocol, input));
    for (j, prover) in provers.enumerate() {
        let p = plan(protocol, input, prover, &ctx, CHEAT_STEPS);
        if let Some(s) = trials(c, &p, 10_000, SEED + 1 + j as u64) {
            c.expect(s.reject_rate >= bounds.1 - s.reject_slack(), || {
                format!("{}: reject {}", label(&p), s.reject_rate)
            });
        }
    }
}

fn dima2_set(c: &mut Criterion) {
    set_verifier(
        c,
        ProtocolId::Dima2Set,
        &dima2_member(1),
        &[1],
        &[0, 1],
        (0.75, 3.0 / 8.0),
    );
}

fn upower64_set(c: &mut Criterion) {
    set_verifier(
        c,
        ProtocolId::Upower64Set,
        &unary(4096),
        &[0, 1],
        &[1, 0],
        (7.0 / 8.0, 3.0 / 32.0),
    );
}

fn logspace(c: &mut Criterion) {
    let languages = [
        bit_rule(Alphabet::unary(), &[1, 0, 1], BitTail::AllZero),
        bit_rule(Alphabet::unary(), &[0, 1, 0], BitTail::AllZero),
    ];
    for (i, spec) in languages.iter().enumerate() {
        let ctx = ProtocolContext::with_spec(spec.clone());
        for n in 0..=2u64 {
            let input = unary(n);
            let member = spec.contains_word(&input).unwrap();
            let p = plan(
                ProtocolId::UnaryLogspace,
                &input,
                ProverSpec::Honest,
                &ctx,
                1 << 34,
            );
            if let Some(s) = trials(c, &p, 1000, SEED + n) {
                let (rate, margin) = if member {
                    (s.accept_rate, s.accept_slack())
                } else {
                    (s.reject_rate, s.reject_slack())
                };
                c.expect(rate >= 143.0 / 196.0 - margin, || {
                    format!("L{i} n={n}: correct {rate}")
                });
            }
            if member || n == 0 {
                continue;
            }
            for (j, prover) in cheat_catalog(ProtocolId::UnaryLogspace, &input)
                .into_iter()
                .enumerate()
            {
                let p = plan(ProtocolId::UnaryLogspace, &input, prover, &ctx, 20_000_000);
                if let Some(s) = trials(c, &p, 300, SEED ^ (n << 8) ^ j as u64) {
                    c.expect(s.accept_rate <= 209.0 / 648.0 + s.accept_slack(), || {
                        format!("L{i} {}: accept {}", label(&p), s.accept_rate)
                    });
                }
            }
        }
    }
    // registers are allocated up front, so a short run shows the footprint
    let mut ctx = ProtocolContext::with_spec(languages[0].clone());
    ctx.params.c = 1;
    let mut points = Vec::new();
    for n in [3u64, 7, 15, 31, 63] {
        let p = plan(
            ProtocolId::UnaryLogspace,
            &unary(n),
            ProverSpec::Honest,
            &ctx,
            20_000,
        );
        if let Some(s) = trials(c, &p, 5, SEED) {
            points.push((n as f64, s.max_work_cells as f64));
        }
    }
    match fit_log_linear(&points) {
        Some(f) => {
            c.expect(f.slope > 0.0 && f.r_squared >= 0.99, || {
                format!("work cells: {f:?}")
            });
        }
        None => c.error("work cells: no fit"),
    }
}

fn four_counter(c: &mut Criterion) {
    let languages = [
        bit_rule(Alphabet::unary(), &[1, 0, 1], BitTail::AllZero),
        bit_rule(Alphabet::binary_ab(), &[0, 1, 1], BitTail::AllZero),
    ];
    for spec in &languages {
        for rank in 1..=3u64 {
            let w = lex_unrank(spec.alphabet(), rank);
            let t = match four_counter_trials(
                spec,
                &w,
                1,
                ResourceBudget::default(),
                5000,
                SEED + rank,
                0,
            ) {
                Ok(t) => t,
                Err(e) => return c.error(e),
            };
            let shown = String::from_utf8_lossy(&w).into_owned();
            c.expect(t.correct_rate >= 0.73, || {
                format!("{shown:?}: correct {}", t.correct_rate)
            });
            c.expect(t.digit_mismatches == 0, || {
                format!("{shown:?}: {} digit mismatches", t.digit_mismatches)
            });
            // the empty word is decided without tossing
            let oracle = if w.is_empty() {
                1.0
            } else {
                let one = membership_digit_probability(spec, rank as u32).unwrap();
                if t.member {
                    one
                } else {
                    1.0 - one
                }
            };
            c.expect(
                within_sigmas(t.correct_rate, oracle, t.stats.decided()),
                || format!("{shown:?}: correct {} vs exact {oracle}", t.correct_rate),
            );
        }
    }
}

fn weak(c: &mut Criterion) {
    let spec = bit_rule(Alphabet::unary(), &[1, 1], BitTail::AllZero);
    let y = Ratio::new(1, 4);
    let quantile = 2.5758293035489;
    let budget = ResourceBudget::default();
    match weak_ips_estimator(&spec, b"", &ProverSpec::Honest, y, 100, SEED, budget, 0.99) {
        Ok(e) => c.expect(e.conditional_accept >= 0.6, || format!("empty word: {e:?}")),
        Err(e) => c.error(e),
    }
    match weak_ips_estimator(
        &spec,
        b"a",
        &ProverSpec::Honest,
        y,
        4000,
        SEED,
        budget,
        0.99,
    ) {
        Ok(e) => {
            c.expect(
                e.lottery_paths > 0 && e.balanced_paths == e.lottery_paths,
                || format!("PrA != PrR: {e:?}"),
            );
            c.expect(e.conditional_accept >= 0.6 - e.half_width, || {
                format!("accept {}", e.conditional_accept)
            });
            let one = membership_digit_probability(&spec, 2).unwrap();
            let exact = one / 1.25;
            let sigma = e.half_width / quantile;
            c.expect(
                (e.conditional_accept - exact).abs() <= SIGMAS * sigma,
                || format!("accept {} vs exact {exact}", e.conditional_accept),
            );
            let share = e.x_prime_ones as f64 / e.lottery_paths as f64;
            c.expect(within_sigmas(share, one, e.lottery_paths), || {
                format!("x' share {share} vs {one}")
            });
        }
        Err(e) => c.error(e),
    }
    for counter in [1, 2] {
        let drift = ProverSpec::Drift {
            at_step: None,
            counter,
            amount: 1,
            persistent: true,
        };
        match weak_ips_estimator(
            &spec,
            b"a",
            &drift,
            y,
            2000,
            SEED + counter as u64,
            budget,
            0.99,
        ) {
            Ok(e) => {
                c.expect(e.affected_paths == e.lottery_paths, || {
                    format!("counter {counter}: unaffected paths")
                });
                c.expect(e.min_affected_ratio.is_some_and(|r| r > 8.0), || {
                    format!("counter {counter}: ratio {:?}", e.min_affected_ratio)
                });
                c.expect(e.conditional_reject >= 2.0 / 3.0 - e.half_width, || {
                    format!("counter {counter}: reject {}", e.conditional_reject)
                });
            }
            Err(e) => c.error(e),
        }
    }
}

fn signed_tape(c: &mut Criterion) {
    let ctx = ProtocolContext::default();
    let q = ctx.params.q as f64;
    let honest = plan(
        ProtocolId::SignedTape,
        b"ab",
        ProverSpec::Honest,
        &ctx,
        CHEAT_STEPS,
    );
    if let Some(s) = trials(c, &honest, 10_000, SEED) {
        c.expect(s.rejects == 0, || {
            format!("honest flagged {} times", s.rejects)
        });
    }
    for (j, prover) in cheat_catalog(ProtocolId::SignedTape, b"ab")
        .into_iter()
        .enumerate()
    {
        let p = plan(
            ProtocolId::SignedTape,
            b"ab",
            prover.clone(),
            &ctx,
            CHEAT_STEPS,
        );
        if let Some(s) = trials(c, &p, 10_000, SEED + 1 + j as u64) {
            let expected = (q - 1.0) / q;
            c.expect(within_sigmas(s.reject_rate, expected, s.decided()), || {
                format!("{}: reject {}", label(&p), s.reject_rate)
            });
        }
        match exhaustive_tape_detection(b"ab", 5, &prover) {
            Ok(d) => c.expect(
                d == num_rational::BigRational::new(4.into(), 5.into()),
                || format!("{}: q=5 detection {d}", prover.id()),
            ),
            Err(e) => c.error(e),
        }
    }
}

fn two_prover(c: &mut Criterion) {
    let spec = bit_rule(Alphabet::unary(), &[1, 0, 1], BitTail::AllZero);
    let ctx = ProtocolContext::with_spec(spec.clone());
    for n in 0..=2u64 {
        let input = unary(n);
        let member = spec.contains_word(&input).unwrap();
        let p = plan(
            ProtocolId::TwoProver,
            &input,
            ProverSpec::Honest,
            &ctx,
            1 << 34,
        );
        if let Some(s) = trials(c, &p, 200, SEED + n) {
            let (rate, margin) = if member {
                (s.accept_rate, s.accept_slack())
            } else {
                (s.reject_rate, s.reject_slack())
            };
            c.expect(rate >= 0.75 - margin, || format!("n={n}: correct {rate}"));
        }
    }
    let q = ctx.params.q as f64;
    for (j, prover) in cheat_catalog(ProtocolId::TwoProver, b"a")
        .into_iter()
        .enumerate()
    {
        let p = plan(ProtocolId::TwoProver, b"a", prover, &ctx, 1 << 34);
        if let Some(s) = trials(c, &p, 200, SEED + j as u64) {
            c.expect(s.reject_rate >= (q - 1.0) / q - s.reject_slack(), || {
                format!("{}: reject {}", label(&p), s.reject_rate)
            });
        }
    }
}

fn shipped_suite(c: &mut Criterion) {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_ipslab"))
        .args(["check", "paper-bounds"])
        .current_dir(&root)
        .output();
    let elapsed = start.elapsed();
    match out {
        Ok(o) => {
            let text = String::from_utf8_lossy(&o.stdout);
            c.expect(o.status.code() == Some(0), || {
                let failed: Vec<&str> = text.lines().filter(|l| l.starts_with("FAIL")).collect();
                format!(
                    "exit {:?}: {failed:?} {}",
                    o.status.code(),
                    String::from_utf8_lossy(&o.stderr)
                )
            });
            c.expect(elapsed < Duration::from_secs(30 * 60), || {
                format!("took {elapsed:?}")
            });
        }
        Err(e) => c.error(e),
    }
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, Check); 14] = [
        ("membership bit from 64^k tosses", membership_bits),
        ("USQUARE members accepted", usquare_members),
        (
            "USQUARE non-squares against the catalog",
            usquare_non_squares,
        ),
        ("USQUARE running-time exponents", usquare_growth),
        ("UPOWER64 member and non-members", upower64),
        ("DIMA2 sweeping verifier", dima2),
        ("DIMA2 index-set verifier", dima2_set),
        ("UPOWER64 index-set verifier", upower64_set),
        ("log-space unary verifier", logspace),
        ("four-counter recognizer", four_counter),
        ("weak sweeping verifier", weak),
        ("signed tape detection", signed_tape),
        ("two-prover verifier", two_prover),
        ("shipped suite within 30 minutes", shipped_suite),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut c = Criterion::default();
        run(&mut c);
        let status = if c.failures.is_empty() && c.checks > 0 {
            "PASS"
        } else {
            "FAIL"
        };
        println!(
            "{status} criterion {:2} {name}: {} checks, {} failed, {:.1} s",
            i + 1,
            c.checks,
            c.failures.len(),
            start.elapsed().as_secs_f64()
        );
        for f in c.failures.iter().take(10) {
            println!("    {f}");
        }
        if status == "FAIL" {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
