use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skewlab::construct::{self, BaseSet, Verification};
use skewlab::fourier::{
    annihilating_progression, check_gvn, circle_distance, dichotomy_report, dirichlet, increment_step,
    lambda_direct, lambda_form, lambda_fourier, parseval_bound, product_set_experiment, technical_select,
    AnalysisConfig, AnnihilatingOutcome, CharacterSet, IncrementMode, LemmaParams, TwoDFunction,
};
use skewlab::search::{self, SearchConfig};
use skewlab::verify::{self, CountMethod};
use skewlab::{Ambient, GridSet};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_set(ambient: Ambient, density: f64, rng: &mut ChaCha8Rng) -> GridSet {
    let (lo, hi) = (ambient.lo(), ambient.hi());
    let pts: Vec<(i64, i64)> = (lo..=hi)
        .flat_map(|x| (lo..=hi).map(move |y| (x, y)))
        .filter(|_| rng.gen_bool(density))
        .collect();
    GridSet::new(ambient, pts).unwrap()
}

fn oracle_sets() -> Vec<GridSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut out = Vec::new();
    for n in [8u32, 16, 32, 64] {
        for density in [0.1, 0.3, 0.6] {
            for _ in 0..100 {
                out.push(random_set(Ambient::torus(n).unwrap(), density, &mut rng));
            }
        }
    }
    out
}

fn c1_eight_point() -> Outcome {
    let start = Instant::now();
    let s = GridSet::new(
        Ambient::torus(6).unwrap(),
        [(0, 0), (0, 1), (2, 0), (2, 3), (3, 1), (3, 3), (3, 5), (4, 0)],
    )
    .unwrap();
    let none = verify::find_skew_corner(&s).is_none();
    let bi = verify::is_bi_skew_corner_free(&s);
    let elapsed = start.elapsed();
    ensure(none, || "the 8-point set contains a skew corner".into())?;
    ensure(elapsed < Duration::from_millis(1), || format!("took {elapsed:?}"))?;
    let bi_note = if bi { "bi-free under transpose" } else { "interpretation finding: transpose has a skew corner" };
    Ok(format!("free, {bi_note}, {elapsed:?}"))
}

fn c2_fft_vs_naive(sets: &[GridSet]) -> Outcome {
    let start = Instant::now();
    for (i, a) in sets.iter().enumerate() {
        let fft = verify::count_skew_corners(a, CountMethod::Fft).map_err(|e| e.to_string())?;
        let naive = verify::count_skew_corners(a, CountMethod::Naive).map_err(|e| e.to_string())?;
        ensure(fft == naive, || format!("set {i} (N = {}): {fft:?} vs {naive:?}", a.size()))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!("{} sets agree exactly, {elapsed:?}", sets.len()))
}

fn c3_lambda(sets: &[GridSet]) -> Outcome {
    let mut worst_rel = 0.0f64;
    let mut worst_route = 0.0f64;
    let mut checked = 0;
    for a in sets.iter().filter(|a| a.size() <= 32) {
        let f = TwoDFunction::indicator(a).map_err(|e| e.to_string())?;
        let l = lambda_form(&f, &f, &f).map_err(|e| e.to_string())?;
        let total = verify::count_skew_corners(a, CountMethod::Naive).unwrap().total() as f64;
        let scaled = l * f64::from(a.size()).powi(4);
        let rel = (scaled - total).abs() / total.max(1.0);
        let direct = lambda_direct(&f, &f, &f).unwrap();
        let fourier = lambda_fourier(&f, &f, &f).unwrap();
        worst_rel = worst_rel.max(rel);
        worst_route = worst_route.max((direct - fourier).abs());
        checked += 1;
    }
    ensure(worst_rel <= 1e-6, || format!("relative error {worst_rel:e}"))?;
    ensure(worst_route <= 1e-9, || format!("direct vs Fourier gap {worst_route:e}"))?;
    Ok(format!("{checked} sets, max rel err {worst_rel:.1e}, max route gap {worst_route:.1e}"))
}

fn c4_gvn() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let config = AnalysisConfig::default();
    for i in 0..400 {
        let n = rng.gen_range(1..=16);
        let a = random_set(Ambient::torus(n).unwrap(), rng.gen_range(0.0..1.0), &mut rng);
        let r = check_gvn(&a, &config).map_err(|e| format!("set {i}: {e}"))?;
        ensure(r.inequality_holds, || format!("set {i}: inequality fails"))?;
    }
    Ok("400 sets, zero falsification events".into())
}

fn c5_dichotomy() -> Outcome {
    let config = AnalysisConfig::default();
    let mut inputs = Vec::new();
    for n in 1..=4 {
        let r = search::max_skew_corner_free(Ambient::grid(n).unwrap(), &SearchConfig::default())
            .map_err(|e| e.to_string())?;
        inputs.push(r.witness);
    }
    for n in 2..=32 {
        for c in [construct::sphere_construction(n), construct::bi_sphere_construction(n)]
            .into_iter()
            .flatten()
        {
            inputs.push(c.set);
        }
    }
    let (mut first, mut second) = (0, 0);
    for a in &inputs {
        let r = dichotomy_report(a, &config).map_err(|e| format!("n = {}: {e}", a.size()))?;
        match r.branch {
            skewlab::fourier::DichotomyBranch::I => first += 1,
            skewlab::fourier::DichotomyBranch::Ii => second += 1,
        }
    }
    Ok(format!("{} sets, branch (i) {first}, branch (ii) {second}", inputs.len()))
}

fn c6_parseval() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let config = AnalysisConfig::default();
    let mut worst = 0.0f64;
    for i in 0..100 {
        let n = rng.gen_range(1..=40);
        let ambient = if i % 2 == 0 { Ambient::torus(n) } else { Ambient::grid(n) }.unwrap();
        let a = random_set(ambient, rng.gen_range(0.0..0.5), &mut rng);
        let r = parseval_bound(&a, &config).map_err(|e| format!("set {i}: {e}"))?;
        worst = worst.max((r.full_sum - r.nonempty_columns as f64 / f64::from(r.modulus)).abs());
    }
    ensure(worst <= 1e-9, || format!("deviation {worst:e}"))?;
    Ok(format!("100 sets, max deviation {worst:.1e}"))
}

fn feasible_sequence(rng: &mut ChaCha8Rng, params: LemmaParams) -> Option<(Vec<f64>, f64)> {
    let len = rng.gen_range(1..400);
    let exponent = rng.gen_range(1..6);
    let mut b: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0f64..1.0).powi(exponent)).collect();
    b.sort_by(|x, y| y.total_cmp(x));
    let total: f64 = b.iter().sum();
    if total == 0.0 {
        return None;
    }
    let scale = rng.gen_range(0.01..1.0) / total;
    b.iter_mut().for_each(|v| *v *= scale);
    let l1: f64 = b.iter().sum();
    let lp = b.iter().map(|v| v.powf(params.p)).sum::<f64>().powf(1.0 / params.p);
    let mut beta = lp * rng.gen_range(0.2..1.0);
    for _ in 0..400 {
        if l1 <= beta.powf(params.q) {
            return Some((b, beta));
        }
        beta *= 0.9;
    }
    None
}

fn c7_technical() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    let mut notes = Vec::new();
    for params in [LemmaParams::HORIZONTAL, LemmaParams::VERTICAL] {
        let c = params.constant(1_000_000).map_err(|e| e.to_string())?;
        let c_fine = params.constant(10_000_000).map_err(|e| e.to_string())?;
        ensure((c - c_fine).abs() <= 1e-12, || format!("c not stable: {c} vs {c_fine}"))?;
        let mut done = 0;
        let mut max_m = 0;
        while done < 1000 {
            let Some((b, beta)) = feasible_sequence(&mut rng, params) else { continue };
            let sel = technical_select(&b, beta, params, 1_000_000).map_err(|e| e.to_string())?;
            let prefix: f64 = b[..sel.m].iter().sum();
            let target = c * (sel.m as f64).powf(1.0 - 1.0 / params.p_prime) * beta;
            ensure(sel.m as f64 <= params.size_bound(beta), || format!("m = {} above size bound", sel.m))?;
            ensure(prefix >= target, || format!("prefix {prefix} below {target}"))?;
            max_m = max_m.max(sel.m);
            done += 1;
        }
        notes.push(format!("p = {}: c = {c:.12}, max m {max_m}", params.p));
    }
    Ok(notes.join("; "))
}

fn c8_dirichlet() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(81);
    let mut progressions = 0;
    for i in 0..100 {
        let big: u32 = 2 * rng.gen_range(8..=1 << 13);
        let m = rng.gen_range(1..=3usize);
        let mut freqs = Vec::new();
        while freqs.len() < m {
            let a = rng.gen_range(1..big);
            if !freqs.contains(&a) {
                freqs.push(a);
            }
        }
        let q_max = rng.gen_range(1..=u64::from(big));
        let thetas: Vec<(u64, u64)> = freqs.iter().map(|&a| (u64::from(a), u64::from(big))).collect();
        let q = dirichlet(&thetas, q_max).map_err(|e| format!("case {i}: {e}"))?;
        ensure((1..=q_max).contains(&q), || format!("case {i}: q = {q} outside [{q_max}]"))?;
        let bound = (q_max as f64).powf(-1.0 / m as f64);
        for &(a, d) in &thetas {
            let dist = circle_distance(q * a % d, d);
            ensure(dist <= bound + 1e-12, || format!("case {i}: ||q theta|| = {dist} > {bound}"))?;
        }

        let gamma = CharacterSet::new(big, freqs).unwrap();
        let n = big / 2;
        let alpha = rng.gen_range(0.01..=1.0);
        let out = annihilating_progression(&gamma, alpha, n).map_err(|e| format!("case {i}: {e}"))?;
        if let AnnihilatingOutcome::Progression { progression, .. } = out {
            progressions += 1;
            ensure(progression.span() as f64 <= alpha * f64::from(n), || format!("case {i}: span too long"))?;
            for &a in &gamma.frequencies {
                for x in progression.elements() {
                    let dev = gamma.deviation(a, x);
                    ensure(dev <= 1.0 + 1e-12, || format!("case {i}: |gamma(x) - 1| = {dev}"))?;
                }
            }
        }
    }
    Ok(format!("100 cases, {progressions} with a progression, the rest small density"))
}

fn c9_search() -> Outcome {
    let start = Instant::now();
    let table = search::s_table(4, &SearchConfig::default()).map_err(|e| e.to_string())?;
    let values: Vec<usize> = table.iter().map(|r| r.s).collect();
    ensure(table.iter().all(|r| r.certified), || "uncertified entry".into())?;
    ensure(values[0] == 1 && values[1] == 2, || format!("s(1), s(2) = {}, {}", values[0], values[1]))?;
    ensure(values.windows(2).all(|w| w[0] <= w[1]), || format!("not monotone: {values:?}"))?;
    for r in &table {
        for c in [construct::sphere_construction(r.n), construct::bi_sphere_construction(r.n)]
            .into_iter()
            .flatten()
        {
            ensure(c.set.len() <= r.s, || format!("construction beats s({}) = {}", r.n, r.s))?;
        }
    }
    for n in 1..=5 {
        let ambient = Ambient::torus(n).unwrap();
        let sym = search::max_skew_corner_free(ambient, &SearchConfig::default()).map_err(|e| e.to_string())?;
        let plain_config = SearchConfig {
            symmetry: false,
            ..SearchConfig::default()
        };
        let plain = search::max_skew_corner_free(ambient, &plain_config).map_err(|e| e.to_string())?;
        ensure(sym.optimal && plain.optimal, || format!("torus {n}: search not certified"))?;
        ensure(sym.best_size == plain.best_size, || {
            format!("torus {n}: {} vs {}", sym.best_size, plain.best_size)
        })?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(300), || format!("took {elapsed:?}"))?;
    Ok(format!("s = {values:?}, torus N <= 5 agree, {elapsed:?}"))
}

fn c10_sphere() -> Outcome {
    let mut notes = Vec::new();
    for exp in (10..=20).step_by(2) {
        let n = 1u32 << exp;
        let start = Instant::now();
        let c = construct::sphere_construction(n).map_err(|e| e.to_string())?;
        let size = c.set.len() as f64;
        let (m, d) = (c.params.m, c.params.d);
        ensure(verify::probe_skew_corners(&c.set, 1_000_000, u64::from(n)).is_none(), || {
            format!("n = 2^{exp}: probe found a skew corner")
        })?;
        if exp <= 12 {
            ensure(verify::is_skew_corner_free(&c.set), || format!("n = 2^{exp}: not free"))?;
        }
        let guarantee = construct::sphere_guarantee(m, d);
        ensure(size >= guarantee, || format!("n = 2^{exp}: size {size} < {guarantee}"))?;
        let growth = f64::from(n).powi(2) * 2f64.powf(-8.0 * f64::from(exp).sqrt());
        ensure(size >= growth, || format!("n = 2^{exp}: size {size} < {growth}"))?;
        let elapsed = start.elapsed();
        ensure(elapsed < Duration::from_secs(120), || format!("n = 2^{exp}: took {elapsed:?}"))?;
        notes.push(format!("2^{exp}: {size}"));
    }
    Ok(notes.join(", "))
}

fn c11_product() -> Outcome {
    let base: BaseSet = search::find_base_set(6, &SearchConfig::default())
        .map_err(|e| e.to_string())?
        .ok_or("no base set for b = 6")?;
    let mut notes = vec![format!("|S| = {}", base.len())];
    for (n, k) in [(36u32, 2u32), (216, 3)] {
        let set = construct::product_construction_with(&base, n, Verification::Always).map_err(|e| e.to_string())?;
        let expected = base.len().pow(k);
        ensure(set.len() == expected, || format!("n = {n}: size {} vs {expected}", set.len()))?;
        ensure(verify::is_skew_corner_free(&set), || format!("n = {n}: not free"))?;
        notes.push(format!("n = {n}: {}", set.len()));
    }
    Ok(notes.join(", "))
}

fn c12_increment() -> Outcome {
    let config = AnalysisConfig::default();
    let mut gains = 0;
    for seed in 0..20u64 {
        let n = 8 + (seed as u32 * 7) % 25;
        let a = search::greedy_free_set(Ambient::grid(n).unwrap(), seed).map_err(|e| e.to_string())?;
        ensure(verify::is_skew_corner_free(&a), || format!("seed {seed}: greedy input not free"))?;
        let out = increment_step(&a, &config, IncrementMode::BestEffort).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(out.density >= a.density(), || format!("seed {seed}: density dropped"))?;
        if let Some(set) = &out.extracted {
            ensure(verify::is_skew_corner_free(set), || format!("seed {seed}: extracted set not free"))?;
            ensure(set.len() as u64 == out.count, || format!("seed {seed}: count mismatch"))?;
        }
        for p in &out.progressions {
            ensure(p.len >= 1 && p.within(n), || format!("seed {seed}: {p:?} leaves [{n}]"))?;
            ensure(p.span() <= u64::from(n), || format!("seed {seed}: {p:?} span exceeds {n}"))?;
        }
        if let [p, q] = out.progressions[..] {
            ensure(p.len == q.len && p.step == q.step, || format!("seed {seed}: {p:?} and {q:?} differ in shape"))?;
        }
        if let Some(np) = out.nprime {
            ensure(np as usize == out.progressions.first().map_or(n as usize, |p| p.len as usize), || {
                format!("seed {seed}: side {np} does not match the progression length")
            })?;
        }
        if out.density > a.density() {
            gains += 1;
        }
    }
    Ok(format!("20 inputs, {gains} strict density gains"))
}

fn c13_experiment() -> Outcome {
    let r = product_set_experiment(0.5, 64, 100, 13).map_err(|e| e.to_string())?;
    ensure((0.8..=1.25).contains(&r.ratio_5_2), || format!("ratio to alpha^(5/2) N^4 = {}", r.ratio_5_2))?;
    ensure(r.ratio_3 >= 1.5, || format!("ratio to alpha^3 N^4 = {}", r.ratio_3))?;
    Ok(format!("ratio_5_2 = {:.4}, ratio_3 = {:.4}", r.ratio_5_2, r.ratio_3))
}

fn c14_performance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let a = random_set(Ambient::torus(1024).unwrap(), 0.1, &mut rng);
    let start = Instant::now();
    let count = verify::count_skew_corners(&a, CountMethod::Fft).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(2), || format!("took {elapsed:?}"))?;
    Ok(format!("{} nontrivial, {elapsed:?}", count.nontrivial))
}

fn main() {
    let sets = oracle_sets();
    let criteria: Vec<Criterion> = vec![
        ("eight-point example", Box::new(c1_eight_point)),
        ("fft vs naive count", Box::new(|| c2_fft_vs_naive(&sets))),
        ("lambda identity", Box::new(|| c3_lambda(&sets))),
        ("generalised von Neumann", Box::new(c4_gvn)),
        ("dichotomy", Box::new(c5_dichotomy)),
        ("parseval bound", Box::new(c6_parseval)),
        ("technical lemma", Box::new(c7_technical)),
        ("dirichlet and annihilation", Box::new(c8_dirichlet)),
        ("exact search", Box::new(c9_search)),
        ("sphere construction", Box::new(c10_sphere)),
        ("product construction", Box::new(c11_product)),
        ("increment engine", Box::new(c12_increment)),
        ("product-set experiment", Box::new(c13_experiment)),
        ("fft performance", Box::new(c14_performance)),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                println!("FAIL {:>2} {name}: {detail}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
