//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS or FAIL line; the process fails if any does.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use fairdl_core::adversary::{AdversaryConfig, AdversaryKind, ClassSplit, RunEvent};
use fairdl_core::credibility::{
    credibility_sigmoid, download_allocation, init_credibility, init_tokens, majority_vote, supplement, LabelMatrix,
};
use fairdl_core::numerics::{Dataset, Matrix, MlpModel, SparseUpdate};
use fairdl_core::privacy::{allocate_budgets, calibrate_sigma, Budget, Composition, PrivacyAccountant, Stage, StepRecord};
use fairdl_core::PartyId;
use fairdl_ledger::{dump_chain, leader_for, replay_balances, verify_chain, verify_dump, KeyPair, Ledger};
use fairdl_sim::harness::experiment::{run_experiment, CellOutcome};
use fairdl_sim::harness::fairness::{fairness, Fairness};
use fairdl_sim::harness::report::{write_report, write_traces};
use fairdl_sim::{Config, FrameworkKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// 1. Closed-form values.
fn formula_goldens() -> Outcome {
    let sigma: f64 = calibrate_sigma(1.0, 1e-5).map_err(|e| e.to_string())?;
    let f5: f64 = credibility_sigmoid(0.5);
    let f6: f64 = credibility_sigmoid(0.6);
    let tokens = init_tokens(0.1, 100_000, 2).map_err(|e| e.to_string())?;
    check(
        (sigma - 4.8448).abs() <= 1e-3 && f5 == 0.5 && (f6 - 0.81757).abs() <= 1e-4 && tokens == 10_000,
        format!("sigma={sigma:.5} f(0.5)={f5} f(0.6)={f6:.5} tokens={tokens}"),
    )
}

// 2. Analytic gradients against central differences.
fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let input = rng.gen_range(2..6);
        let hidden = rng.gen_range(2..6);
        let classes = rng.gen_range(2..5);
        let dims = if rng.gen_bool(0.5) {
            vec![input, hidden, classes]
        } else {
            vec![input, hidden, rng.gen_range(2..5), classes]
        };
        let mut model = MlpModel::<f64>::random(&dims, &mut rng).map_err(|e| e.to_string())?;
        // Nonzero biases keep every ReLU away from its kink, where central
        // differences and the subgradient legitimately disagree.
        for p in model.params_mut() {
            *p = rng.gen_range(-1.0..1.0);
        }
        let rows = rng.gen_range(1..6);
        let features: Vec<f64> = (0..rows * input).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let labels: Vec<usize> = (0..rows).map(|_| rng.gen_range(0..classes)).collect();
        let batch = Dataset::new(Matrix::new(rows, input, features).unwrap(), labels, classes).unwrap();
        let analytic = model.backward(&batch).map_err(|e| e.to_string())?;
        let h = 1e-6;
        let mut diff = 0.0f64;
        let mut norm = 0.0f64;
        for k in 0..model.param_count() {
            let base = model.params()[k];
            model.params_mut()[k] = base + h;
            let up = model.loss(&batch).unwrap();
            model.params_mut()[k] = base - h;
            let down = model.loss(&batch).unwrap();
            model.params_mut()[k] = base;
            let numeric = (up - down) / (2.0 * h);
            diff += (analytic[k] - numeric).powi(2);
            norm += analytic[k].powi(2).max(numeric.powi(2));
        }
        let rel = diff.sqrt() / norm.sqrt().max(1e-12);
        worst = worst.max(rel);
    }
    check(worst <= 1e-4, format!("worst relative error {worst:.2e} over 20 models"))
}

// 3. Privacy accounting.
fn privacy_accounting() -> Outcome {
    let mut acc = PrivacyAccountant::new(Budget::new(1e6, 0.5), Composition::AmplifiedBasic);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut last = (0.0, 0.0);
    let mut monotone = true;
    for _ in 0..1000 {
        acc.record(StepRecord {
            epsilon: rng.gen_range(0.01..1.0),
            delta: rng.gen_range(1e-9..1e-6),
            sample_ratio: rng.gen_range(0.001..1.0),
        })
        .map_err(|e| e.to_string())?;
        let now = acc.spent();
        monotone &= now.0 >= last.0 && now.1 >= last.1;
        last = now;
    }
    let step = StepRecord {
        epsilon: 1.0,
        delta: 1e-5,
        sample_ratio: 0.1,
    };
    let mut basic = PrivacyAccountant::new(Budget::new(100.0, 0.1), Composition::Basic);
    let mut amplified = PrivacyAccountant::new(Budget::new(100.0, 0.1), Composition::AmplifiedBasic);
    for _ in 0..10 {
        basic.record(step).unwrap();
        amplified.record(step).unwrap();
    }
    let (b, a) = (basic.spent(), amplified.spent());
    let init = allocate_budgets(Stage::Initialisation, "blobs");
    let update = allocate_budgets(Stage::Update, "blobs");
    let total = (init.epsilon + update.epsilon, init.delta + update.delta);
    check(
        monotone && a.0 <= b.0 && a.1 <= b.1 && total.0 == 6.0 && (total.1 - 2e-5).abs() < 1e-18,
        format!("monotone={monotone} amplified={a:?} basic={b:?} stages={total:?}"),
    )
}

// 4. Ledger integrity.
fn ledger_integrity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let ids: Vec<PartyId> = (0..4).map(PartyId::from).collect();
    let keys: Vec<KeyPair> = ids.iter().map(|_| KeyPair::generate(&mut rng)).collect();
    let regs: Vec<_> = ids.iter().zip(&keys).map(|(&p, k)| (p, k, 1000)).collect();
    let mut ledger = Ledger::create_genesis(&regs).map_err(|e| e.to_string())?;
    let total = ledger.total_tokens();
    let mut conserved = true;
    for round in 1..=100u64 {
        let b = rng.gen_range(0..4);
        let s = (b + rng.gen_range(1..4)) % 4;
        let count = rng.gen_range(1..5u64);
        if ledger.balance(ids[b]).unwrap() >= count {
            let o = ledger
                .submit_purchase_order(ids[b], &keys[b], ids[s], count, count)
                .map_err(|e| e.to_string())?;
            if rng.gen_bool(0.8) {
                let entries = (0..count as usize).map(|i| (i * 7, rng.gen_range(-1.0..1.0))).collect();
                let update = SparseUpdate::new(100, entries).unwrap();
                ledger
                    .fulfill_order(ids[s], &keys[s], o, &update, &mut rng)
                    .map_err(|e| e.to_string())?;
            }
        }
        let leader = leader_for(round, &ids).unwrap();
        ledger.seal_block(leader, &keys[leader.index()]).map_err(|e| e.to_string())?;
        let replay = replay_balances(ledger.blocks()).map_err(|e| e.to_string())?;
        conserved &= ledger.total_tokens() == total && replay.total() == total && replay.escrowed.values().sum::<u64>() == 0;
    }
    let blocks = ledger.blocks();
    let valid = verify_chain(blocks);
    let text = dump_chain(blocks);
    let dump_ok = verify_dump(&text);

    // Mutation targets: one byte inside every block line and every
    // transaction, plus random positions anywhere in the dump.
    let mut targets = Vec::new();
    let mut offset = 0;
    for (line, block) in text.split_inclusive('\n').zip(blocks) {
        let body = line.trim_end_matches('\n').len();
        targets.push(offset + rng.gen_range(0..body));
        for tx in &block.transactions {
            let json = serde_json::to_string(tx).unwrap();
            let start = line.find(&json).ok_or("transaction not found in its block line")?;
            targets.push(offset + start + rng.gen_range(0..json.len()));
        }
        offset += line.len();
    }
    for _ in 0..300 {
        targets.push(rng.gen_range(0..text.len()));
    }
    let mut survivors = 0;
    for &pos in &targets {
        let mut bytes = text.clone().into_bytes();
        let old = bytes[pos];
        let mut new = old;
        while new == old {
            new = rng.gen_range(0x20..0x7f);
        }
        bytes[pos] = new;
        let mutated = String::from_utf8(bytes).expect("ascii mutation");
        if verify_dump(&mutated) {
            survivors += 1;
        }
    }
    check(
        valid && dump_ok && conserved && survivors == 0,
        format!(
            "verify={valid} dump={dump_ok} conserved={conserved} mutations={} undetected={survivors}",
            targets.len()
        ),
    )
}

fn cells(cfg: &Config) -> Result<Vec<CellOutcome>, String> {
    run_experiment(cfg).map_err(|e| e.to_string())
}

fn r_value(f: &Fairness) -> Option<f64> {
    f.value()
}

// 5. Fairness directionality in setting 3.
fn fairness_directionality() -> Outcome {
    let mut cfg = Config::desk(3, 4);
    cfg.frameworks = vec![FrameworkKind::Distributed, FrameworkKind::Fdpddl];
    let out = cells(&cfg)?;
    let mut good = 0;
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        let get = |k| out.iter().find(|c| c.trace.seed == seed && c.trace.framework == k).and_then(|c| r_value(&c.fairness));
        let (f, d) = (get(FrameworkKind::Fdpddl), get(FrameworkKind::Distributed));
        let ok = matches!((f, d), (Some(f), Some(d)) if f >= 0.5 && f > d);
        good += ok as usize;
        rows.push(format!(
            "{:.3}/{}",
            f.unwrap_or(f64::NAN),
            d.map_or("undef".to_string(), |d| format!("{d:.3}"))
        ));
    }
    check(good >= 4, format!("{good}/5 seeds with r_F >= 0.5 and r_F > r_D (r_F/r_D: {})", rows.join(" ")))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

// 6. Collaboration gain on IID data.
fn collaboration_gain() -> Outcome {
    let mut cfg = Config::desk(1, 4);
    cfg.frameworks = vec![FrameworkKind::Fdpddl];
    let out = cells(&cfg)?;
    let gains: Vec<f64> = (0..cfg.parties)
        .map(|p| median(out.iter().map(|c| c.trace.final_accuracy[p] - c.trace.standalone_accuracy[p]).collect()))
        .collect();
    check(
        gains.iter().all(|&g| g >= 0.0),
        format!("median final - standalone per party: {:?}", gains.iter().map(|g| format!("{g:+.3}")).collect::<Vec<_>>()),
    )
}

fn adversary_runs(kind: AdversaryKind, split: Option<ClassSplit>, seeds: u64) -> Result<Vec<CellOutcome>, String> {
    let mut cfg = Config::desk(1, 4);
    cfg.frameworks = vec![FrameworkKind::Fdpddl];
    cfg.seeds = (1..=seeds).collect();
    let mut adv = AdversaryConfig::new(PartyId(3), kind);
    adv.split = split;
    cfg.adversaries = vec![adv];
    cells(&cfg)
}

fn excluded_at_init(c: &CellOutcome, p: PartyId) -> bool {
    c.trace.events.iter().any(|e| matches!(e, RunEvent::Excluded { party, round: 0 } if *party == p))
}

// 7. Random-label free-rider.
fn free_rider() -> Outcome {
    let out = adversary_runs(AdversaryKind::FreeRiderRandomLabel, None, 50)?;
    let fr = PartyId(3);
    let at_init = out.iter().filter(|c| excluded_at_init(c, fr)).count();
    let survived = out
        .iter()
        .filter(|c| {
            !c.trace.events.iter().any(|e| {
                e.party() == fr && matches!(e, RunEvent::Excluded { .. } | RunEvent::TokensExhausted { .. })
            })
        })
        .count();
    check(
        at_init * 10 >= out.len() * 9 && survived == 0,
        format!("excluded at init in {at_init}/{} seeds, survivors {survived}", out.len()),
    )
}

// 8. Disjoint-class attacker versus an IID control.
fn gan_attacker() -> Outcome {
    let attacker = adversary_runs(AdversaryKind::GanAttacker, Some(ClassSplit::halves(10)), 50)?;
    let control = adversary_runs(AdversaryKind::GanAttacker, None, 50)?;
    let p = PartyId(3);
    let hit = attacker.iter().filter(|c| excluded_at_init(c, p)).count();
    let false_alarm = control.iter().filter(|c| excluded_at_init(c, p)).count();
    check(
        hit * 10 >= 50 * 9 && false_alarm * 10 <= 50,
        format!("attacker flagged at init {hit}/50, IID control {false_alarm}/50"),
    )
}

fn write_outputs(out: &[CellOutcome], dir: &Path) -> Result<(), String> {
    let traces: Vec<_> = out.iter().map(|c| c.trace.clone()).collect();
    write_traces(&traces, dir).map_err(|e| e.to_string())?;
    write_report(&traces, dir).map_err(|e| e.to_string())?;
    for c in out {
        if let Some(chain) = &c.chain {
            std::fs::write(dir.join(format!("{}.jsonl", c.trace.label())), dump_chain(chain)).map_err(|e| e.to_string())?;
        }
    }
    Ok(())
}

fn dir_contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

// 9. Byte-identical outputs across repeated and parallel runs.
fn determinism() -> Outcome {
    let mut cfg = Config::desk(3, 4);
    cfg.seeds = vec![1, 2];
    cfg.rounds = 5;
    cfg.adversaries = vec![AdversaryConfig::new(PartyId(2), AdversaryKind::FreeRiderCraftedGrad)];
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut contents = Vec::new();
    for (name, parallel) in [("a", true), ("b", true), ("c", false)] {
        cfg.parallel = parallel;
        let dir = root.path().join(name);
        write_outputs(&cells(&cfg)?, &dir)?;
        contents.push(dir_contents(&dir));
    }
    let files = contents[0].len();
    check(
        files >= 8 && contents[0] == contents[1] && contents[0] == contents[2],
        format!("{files} files compared across two parallel runs and one sequential run"),
    )
}

// 10. Brute-force oracles on small random instances.
mod oracle {

    pub fn majority(rows: &[Vec<usize>], k: usize) -> Vec<usize> {
        rows.iter()
            .map(|row| {
                let mut best = 0;
                for label in 0..k {
                    if row.iter().filter(|&&l| l == label).count() > row.iter().filter(|&&l| l == best).count() {
                        best = label;
                    }
                }
                best
            })
            .collect()
    }

    pub fn credibility(rows: &[Vec<usize>], k: usize, owner: usize) -> Vec<(usize, f64)> {
        let maj = majority(rows, k);
        let n = rows[0].len();
        (0..n)
            .filter(|&j| j != owner)
            .map(|j| {
                let m = rows.iter().zip(&maj).filter(|(r, &v)| r[j] == v).count();
                (j, m as f64 / rows.len() as f64)
            })
            .collect()
    }

    /// Largest k with k <= (a/b) * d and k <= (p/q) * len, in integers.
    pub fn allocation(a: u64, b: u64, d: u64, p: u64, q: u64, len: u64) -> u64 {
        let mut k = 0;
        while (k + 1) * b <= a * d && (k + 1) * q <= p * len {
            k += 1;
        }
        k
    }

    /// Exact rational water level search followed by largest remainders.
    pub fn supplement(budget: u64, received: &[u64], caps: &[u64], creds: &[u64]) -> Vec<u64> {
        let n = caps.len();
        let gap = budget.saturating_sub(received.iter().sum());
        let spare: Vec<u64> = (0..n)
            .map(|j| if creds[j] > 0 { caps[j].saturating_sub(received[j]) } else { 0 })
            .collect();
        let target = gap.min(spare.iter().sum());
        let mut out = vec![0; n];
        if target == 0 {
            return out;
        }
        // Share at level t = num/den is min(spare, t * cred). Candidate
        // levels are the breakpoints spare/cred; find the segment that holds
        // the target and solve for t exactly.
        let mut breaks: Vec<(u64, u64)> = (0..n).filter(|&j| spare[j] > 0).map(|j| (spare[j], creds[j])).collect();
        breaks.sort_by(|x, y| (x.0 as u128 * y.1 as u128).cmp(&(y.0 as u128 * x.1 as u128)));
        let total_at = |num: u128, den: u128| -> (u128, u128) {
            // Sum of shares as a fraction over den.
            let mut s = 0u128;
            for j in 0..n {
                if spare[j] == 0 {
                    continue;
                }
                s += (spare[j] as u128 * den).min(num * creds[j] as u128);
            }
            (s, den)
        };
        let mut level = (0u128, 1u128);
        for &(s, c) in &breaks {
            let (sum, den) = total_at(s as u128, c as u128);
            if sum >= target as u128 * den {
                break;
            }
            level = (s as u128, c as u128);
        }
        // Within the segment: capped parties contribute spare, the rest t * cred.
        let (ln, ld) = level;
        let capped: Vec<bool> = (0..n)
            .map(|j| spare[j] > 0 && spare[j] as u128 * ld <= ln * creds[j] as u128)
            .collect();
        let fixed: u128 = (0..n).filter(|&j| capped[j]).map(|j| spare[j] as u128).sum();
        let weight: u128 = (0..n).filter(|&j| spare[j] > 0 && !capped[j]).map(|j| creds[j] as u128).sum();
        let mut shares: Vec<(u128, u128)> = vec![(0, 1); n];
        for j in 0..n {
            if spare[j] == 0 {
                continue;
            }
            shares[j] = if capped[j] {
                (spare[j] as u128, 1)
            } else {
                ((target as u128 - fixed) * creds[j] as u128, weight)
            };
        }
        let mut assigned = 0u64;
        for j in 0..n {
            out[j] = (shares[j].0 / shares[j].1) as u64;
            assigned += out[j];
        }
        let mut order: Vec<usize> = (0..n).filter(|&j| spare[j] > 0).collect();
        // Remainder r/den compared by cross multiplication; ties to lower index.
        order.sort_by(|&x, &y| {
            let rx = shares[x].0 % shares[x].1;
            let ry = shares[y].0 % shares[y].1;
            (ry * shares[x].1).cmp(&(rx * shares[y].1)).then(x.cmp(&y))
        });
        for &j in order.iter().take((target - assigned) as usize) {
            out[j] += 1;
        }
        out
    }

    pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let mut sxy = 0.0;
        let mut sxx = 0.0;
        let mut syy = 0.0;
        for i in 0..x.len() {
            sxy += (x[i] - mx) * (y[i] - my);
            sxx += (x[i] - mx).powi(2);
            syy += (y[i] - my).powi(2);
        }
        if sxx == 0.0 || syy == 0.0 {
            return None;
        }
        let sx = (sxx / (n - 1.0)).sqrt();
        let sy = (syy / (n - 1.0)).sqrt();
        Some((sxy / (n - 1.0) / (sx * sy)).clamp(-1.0, 1.0))
    }
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut mismatches: BTreeMap<&str, usize> = BTreeMap::new();
    for _ in 0..200 {
        let n = rng.gen_range(2..=5);
        let u = rng.gen_range(1..=20);
        let k = rng.gen_range(2..=6);
        let rows: Vec<Vec<usize>> = (0..u).map(|_| (0..n).map(|_| rng.gen_range(0..k)).collect()).collect();
        let ids: Vec<PartyId> = (0..n).map(PartyId::from).collect();
        let m = LabelMatrix::from_rows(ids.clone(), &rows).unwrap();
        if majority_vote(&m) != oracle::majority(&rows, k) {
            *mismatches.entry("majority_vote").or_default() += 1;
        }
        let owner = rng.gen_range(0..n);
        let got: BTreeMap<PartyId, f64> = init_credibility(&m, ids[owner]);
        let want = oracle::credibility(&rows, k, owner);
        if got.len() != want.len() || want.iter().any(|&(j, v)| (got[&ids[j]] - v).abs() > 1e-12) {
            *mismatches.entry("init_credibility").or_default() += 1;
        }
    }
    for _ in 0..200 {
        let b = rng.gen_range(1..=20u64);
        let a = rng.gen_range(0..=b);
        let q = rng.gen_range(1..=20u64);
        let p = rng.gen_range(1..=q);
        let d = rng.gen_range(0..500u64);
        let len = rng.gen_range(1..200u64);
        let got = download_allocation(a as f64 / b as f64, d, p as f64 / q as f64, len as usize);
        if got != oracle::allocation(a, b, d, p, q, len) {
            *mismatches.entry("download_allocation").or_default() += 1;
        }
    }
    for _ in 0..200 {
        let n = rng.gen_range(1..=5);
        let caps: Vec<u64> = (0..n).map(|_| rng.gen_range(0..20)).collect();
        let received: Vec<u64> = caps.iter().map(|&c| rng.gen_range(0..=c)).collect();
        let creds: Vec<u64> = (0..n).map(|_| rng.gen_range(0..5)).collect();
        let budget = rng.gen_range(0..80);
        let ids: Vec<PartyId> = (0..n).map(PartyId::from).collect();
        let to_map = |v: &[u64]| ids.iter().zip(v).map(|(&p, &x)| (p, x)).collect::<BTreeMap<_, _>>();
        let cred_map: BTreeMap<PartyId, f64> = ids.iter().zip(&creds).map(|(&p, &c)| (p, c as f64)).collect();
        let got = supplement(budget, &to_map(&received), &to_map(&caps), &cred_map);
        let want = oracle::supplement(budget, &received, &caps, &creds);
        let got: Vec<u64> = ids.iter().map(|p| got.get(p).copied().unwrap_or(0)).collect();
        if got != want {
            *mismatches.entry("supplement").or_default() += 1;
        }
    }
    for i in 0..200 {
        let n = rng.gen_range(2..=5);
        let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        if i % 20 == 0 {
            x = vec![0.5; n];
        }
        let ok = match (fairness(&x, &y), oracle::pearson(&x, &y)) {
            (Fairness::Defined { r }, Some(w)) => (r - w).abs() <= 1e-9,
            (Fairness::Undefined { .. }, None) => true,
            _ => false,
        };
        if !ok {
            *mismatches.entry("fairness").or_default() += 1;
        }
    }
    let total: usize = mismatches.values().sum();
    check(total == 0, format!("200 instances each, mismatches {mismatches:?}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("formula golden values", formula_goldens),
        ("gradient correctness", gradient_check),
        ("privacy accounting", privacy_accounting),
        ("ledger integrity", ledger_integrity),
        ("fairness directionality", fairness_directionality),
        ("collaboration gain", collaboration_gain),
        ("free-rider robustness", free_rider),
        ("GAN-attacker proxy", gan_attacker),
        ("determinism", determinism),
        ("oracle equivalence", oracle_equivalence),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let label = format!("{} {name}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {label} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {label} ({secs:.1}s): {detail}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
