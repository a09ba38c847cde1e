//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! Criteria 2-4 need the LFW five-identity subset. Point `ELP_LFW_ROOT` at an
//! `<identity>/<image>` tree of 84x112 faces (set `ELP_LFW_RESIZE=1` to
//! resample other sizes). Without it those criteria fail as blocked.
//! `ELP_SVM_GRID=smoke` swaps the full C/gamma decade grid for a 3x3 one.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use elp_descriptors::dataset::{ingest, synthetic_faces, FaceImageSet, IngestOptions};
use elp_descriptors::elp::{elp_counts, elp_descriptor};
use elp_descriptors::eval::{chi_squared, knn_retrieval_eval, search, SweepRow};
use elp_descriptors::lbp::{lbp_descriptor, riu2_label};
use elp_descriptors::radon::{anchor_angle, anchor_score, homogeneity, radon_projection};
use elp_descriptors::svm::{default_c_grid, default_gamma_grid, grid_search, smo_train_binary, GridSearchOptions};
use elp_descriptors::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Lfw = std::result::Result<FaceImageSet, String>;

const TABLE_I: [(&str, usize); 5] = [
    ("Colin_Powell", 236),
    ("Donald_Rumsfeld", 121),
    ("George_W_Bush", 530),
    ("Gerhard_Schroeder", 109),
    ("Tony_Blair", 144),
];

const METHODS: [&str; 4] = ["LBP(8,1)", "LBP(24,3)", "ELP(10,m)", "ELP(10,d)"];
const LENGTHS: [[usize; 4]; 3] = [[10, 26, 256, 1024], [40, 104, 1024, 4096], [90, 234, 2304, 9216]];
const SEARCH: [[f64; 4]; 3] = [[61.4, 68.2, 71.9, 74.3], [67.2, 76.5, 76.8, 82.5], [74.6, 82.5, 82.1, 89.6]];
const CLASSIFY: [[f64; 4]; 3] = [[56.1, 63.2, 73.7, 82.0], [65.4, 67.1, 79.4, 85.5], [67.1, 79.8, 89.9, 89.5]];
const SEARCH_TOL: f64 = 5.0;
const SWEEP_PEAK: f64 = 88.5;
const SWEEP_TOL: f64 = 5.0;
const CLASSIFY_TOL: f64 = 6.0;
const WHOLE_GAP: f64 = 10.0;
const BENCH_LIMIT_SECONDS: f64 = 120.0;

fn params_of(method: usize) -> DescriptorParams {
    match method {
        0 => LbpParams::new(8, 1).unwrap().into(),
        1 => LbpParams::new(24, 3).unwrap().into(),
        2 => ElpParams { histogram_mode: HistogramMode::Merged, ..ElpParams::default() }.into(),
        _ => ElpParams::default().into(),
    }
}

fn grid_of(row: usize) -> SubImageGrid {
    SubImageGrid::square(row + 1).unwrap()
}

struct Gate {
    failed: usize,
}

impl Gate {
    fn report(&mut self, id: u32, name: &str, pass: bool, detail: String) {
        if !pass {
            self.failed += 1;
        }
        println!("{} criterion {id} ({name}): {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn corpus(set: &FaceImageSet, params: &DescriptorParams, grid: SubImageGrid) -> LabeledCorpus {
    let vectors = extract_all(&set.images, params, grid).expect("extraction");
    LabeledCorpus::new(params.clone(), grid, vectors, set.labels.clone(), set.names.clone(), set.paths.clone())
        .expect("corpus")
}

fn load_lfw() -> Lfw {
    let root = std::env::var_os("ELP_LFW_ROOT")
        .map(PathBuf::from)
        .ok_or("BLOCKED: dataset absent (ELP_LFW_ROOT is not set)")?;
    let options = IngestOptions {
        resize: std::env::var_os("ELP_LFW_RESIZE").is_some(),
        ..IngestOptions::default()
    };
    let (set, _) = ingest(&root, &options).map_err(|e| format!("BLOCKED: cannot load {}: {e}", root.display()))?;
    let found: Vec<(String, usize)> = (0..set.names.len()).map(|l| (set.names[l].clone(), set.count_of(l))).collect();
    let expected: Vec<(String, usize)> = TABLE_I.iter().map(|&(n, c)| (n.to_string(), c)).collect();
    if found != expected {
        return Err(format!("identity counts {found:?} differ from {expected:?}"));
    }
    Ok(set)
}

fn criterion_1(gate: &mut Gate) {
    let img = synthetic_faces(1, 1, 84, 112, 0).images.remove(0);
    let mut bad = Vec::new();
    for row in 0..3 {
        for m in 0..4 {
            let params = params_of(m);
            let grid = grid_of(row);
            let closed = length_of(&params, grid);
            let real = describe(&img, &params, grid).map(|d| d.values.len()).unwrap_or(0);
            if closed != LENGTHS[row][m] || real != LENGTHS[row][m] {
                bad.push(format!("{} {grid}: closed {closed}, extracted {real}, want {}", METHODS[m], LENGTHS[row][m]));
            }
        }
    }
    let detail = if bad.is_empty() { "all 12 cells exact".to_string() } else { bad.join("; ") };
    gate.report(1, "descriptor lengths", bad.is_empty(), detail);
}

fn criterion_2(gate: &mut Gate, lfw: &Lfw) {
    let set = match lfw {
        Ok(set) => set,
        Err(why) => return gate.report(2, "retrieval accuracy", false, why.clone()),
    };
    let mut acc = [[0.0; 4]; 3];
    let mut misses = Vec::new();
    for row in 0..3 {
        for m in 0..4 {
            let c = corpus(set, &params_of(m), grid_of(row));
            acc[row][m] = 100.0 * search(&c, 5, DistanceMode::Paper).unwrap().accuracy;
            if (acc[row][m] - SEARCH[row][m]).abs() > SEARCH_TOL {
                misses.push(format!("{} {}: {:.1} vs {:.1}", METHODS[m], grid_of(row), acc[row][m], SEARCH[row][m]));
            }
        }
    }
    let mut order = Vec::new();
    for row in 0..3 {
        if acc[row][3] < acc[row][2] {
            order.push(format!("ELP(10,d) < ELP(10,m) at {}", grid_of(row)));
        }
    }
    for m in 0..4 {
        if !(acc[2][m] >= acc[1][m] && acc[1][m] >= acc[0][m]) {
            order.push(format!("{} not monotone in grid", METHODS[m]));
        }
    }
    let table: Vec<String> = (0..3)
        .map(|r| acc[r].iter().map(|a| format!("{a:.1}")).collect::<Vec<_>>().join("/"))
        .collect();
    let pass = misses.is_empty() && order.is_empty();
    let mut detail = format!("accuracies {} (tol {SEARCH_TOL} pp)", table.join(" | "));
    if !pass {
        detail.push_str(&format!("; off: {}", misses.into_iter().chain(order).collect::<Vec<_>>().join("; ")));
    }
    gate.report(2, "retrieval accuracy", pass, detail);
}

fn criterion_3(gate: &mut Gate, lfw: &Lfw) {
    let set = match lfw {
        Ok(set) => set,
        Err(why) => return gate.report(3, "LBP sweep shape", false, why.clone()),
    };
    let grids: Vec<SubImageGrid> = (1..=12).map(|n| SubImageGrid::square(n).unwrap()).collect();
    let rows: Vec<SweepRow> = eval::subimage_sweep(
        &set.images,
        &set.labels,
        &set.names,
        &params_of(1),
        &grids,
        5,
        DistanceMode::Paper,
    )
    .unwrap();
    let mut peak = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.accuracy > rows[peak].accuracy {
            peak = i;
        }
    }
    let peak_n = peak + 1;
    let peak_acc = 100.0 * rows[peak].accuracy;
    let pass = peak_n.abs_diff(7) <= 1 && (peak_acc - SWEEP_PEAK).abs() <= SWEEP_TOL;
    let curve: Vec<String> = rows.iter().map(|r| format!("{:.1}", 100.0 * r.accuracy)).collect();
    gate.report(
        3,
        "LBP sweep shape",
        pass,
        format!("peak {peak_n}x{peak_n} at {peak_acc:.1}% (want 6..8 and {SWEEP_PEAK}+-{SWEEP_TOL}); curve {}", curve.join(" ")),
    );
}

fn criterion_4(gate: &mut Gate, lfw: &Lfw) {
    let set = match lfw {
        Ok(set) => set,
        Err(why) => return gate.report(4, "classification accuracy", false, why.clone()),
    };
    let smoke = std::env::var("ELP_SVM_GRID").is_ok_and(|v| v == "smoke");
    let (c_grid, gamma_grid) = if smoke {
        (vec![1e-1, 1e1, 1e3], vec![1e-5, 1e-4, 1e-3])
    } else {
        (default_c_grid(), default_gamma_grid())
    };
    let options = GridSearchOptions::default();
    let mut acc = [[0.0; 4]; 3];
    let mut misses = Vec::new();
    for row in 0..3 {
        for m in 0..4 {
            let c = corpus(set, &params_of(m), grid_of(row));
            acc[row][m] = 100.0 * grid_search(&c, &c_grid, &gamma_grid, &options).unwrap().best_accuracy;
            if (acc[row][m] - CLASSIFY[row][m]).abs() > CLASSIFY_TOL {
                misses.push(format!("{} {}: {:.1} vs {:.1}", METHODS[m], grid_of(row), acc[row][m], CLASSIFY[row][m]));
            }
        }
    }
    let gap = acc[0][2].min(acc[0][3]) - acc[0][0].max(acc[0][1]);
    if gap < WHOLE_GAP {
        misses.push(format!("whole-image ELP-LBP gap {gap:.1} < {WHOLE_GAP}"));
    }
    let table: Vec<String> = (0..3)
        .map(|r| acc[r].iter().map(|a| format!("{a:.1}")).collect::<Vec<_>>().join("/"))
        .collect();
    let pass = misses.is_empty();
    let mut detail = format!(
        "accuracies {} (tol {CLASSIFY_TOL} pp), gap {gap:.1}{}",
        table.join(" | "),
        if smoke { ", smoke grid" } else { "" }
    );
    if !pass {
        detail.push_str(&format!("; off: {}", misses.join("; ")));
    }
    gate.report(4, "classification accuracy", pass, detail);
}

fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> GrayImage {
    GrayImage::from_fn(w, h, |_, _| rng.gen())
}

fn toy_corpus(vectors: Vec<Vec<f64>>, labels: Vec<usize>) -> LabeledCorpus {
    let names = (0..=*labels.iter().max().unwrap()).map(|c| format!("c{c}")).collect();
    let paths = (0..vectors.len()).map(|i| i.to_string()).collect();
    LabeledCorpus::new(LbpParams::new(8, 1).unwrap().into(), SubImageGrid::WHOLE, vectors, labels, names, paths)
        .unwrap()
}

fn criterion_5(gate: &mut Gate) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures: Vec<&str> = Vec::new();

    let detached = ElpParams { window_side: 8, stride: 2, ..ElpParams::default() };
    let merged = ElpParams { histogram_mode: HistogramMode::Merged, ..detached.clone() };
    let sums_ok = (0..20).all(|_| {
        let img = random_image(&mut rng, 30, 26);
        let d = elp_counts(&img, &detached).unwrap();
        let m = elp_counts(&img, &merged).unwrap();
        (0..m.len()).all(|b| m[b] == (0..4).map(|k| d[k * m.len() + b]).sum::<u64>())
    });
    if !sums_ok {
        failures.push("merged != sum of detached");
    }

    let flat = GrayImage::filled(84, 112, 90);
    let zero = [HistogramMode::Merged, HistogramMode::Detached].iter().all(|&mode| {
        let p = ElpParams { histogram_mode: mode, ..ElpParams::default() };
        elp_descriptor(&flat, SubImageGrid::square(3).unwrap(), &p).unwrap().values.iter().all(|&v| v == 0.0)
    });
    if !zero {
        failures.push("constant image not all-zero");
    }

    let h_ok = (0..500).all(|t| {
        let data: Vec<u8> = if t % 5 == 0 {
            vec![rng.gen(); 100]
        } else {
            // near-constant windows are the interesting side of the equivalence
            let base: u8 = rng.gen_range(0..250);
            (0..100).map(|_| base + rng.gen_range(0..2u8) * (t % 3) as u8).collect()
        };
        let constant = data.iter().all(|&v| v == data[0]);
        (homogeneity(&Window::new(10, data).unwrap(), 8) == 1.0) == constant
    });
    if !h_ok {
        failures.push("H = 1 iff constant");
    }

    let riu2_ok = (0u32..256).all(|pattern| {
        let bits: Vec<u32> = (0..8).map(|k| (pattern >> k) & 1).collect();
        let transitions = (0..8).filter(|&k| bits[k] != bits[(k + 1) % 8]).count();
        let expected = if transitions <= 2 { pattern.count_ones() as usize } else { 9 };
        riu2_label(pattern, 8) == expected
    });
    if !riu2_ok {
        failures.push("riu2 enumeration");
    }

    let chi_ok = (0..200).all(|_| {
        let v: Vec<Vec<f64>> = (0..3).map(|_| (0..16).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
        let d = |a: &[f64], b: &[f64]| chi_squared(a, b).unwrap();
        d(&v[0], &v[1]) >= 0.0 && d(&v[0], &v[0]) == 0.0 && d(&v[0], &v[1]) == d(&v[1], &v[0]) && d(&v[0], &v[1]) > 0.0
    });
    if !chi_ok {
        failures.push("chi-squared axioms");
    }

    let dupes: Vec<Vec<f64>> = (0..20).map(|i| vec![(i / 2) as f64; 10]).collect();
    let report = knn_retrieval_eval(&toy_corpus(dupes, (0..20).map(|i| i % 4).collect()), 5).unwrap();
    if !report.queries.iter().all(|q| q.neighbors.iter().all(|&(j, _)| j != q.index)) {
        failures.push("leave-one-out exclusion");
    }

    let kkt_ok = (0..10).all(|t| {
        let x: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]).collect();
        let y: Vec<f64> = x.iter().enumerate().map(|(i, p)| if (p[0] * p[1] > 0.0) ^ (i % 7 == 0) { 1.0 } else { -1.0 }).collect();
        let c = [0.1, 1.0, 10.0][t % 3];
        let params = SvcParams::new(c, 0.5);
        let model = smo_train_binary(&x, &y, &params).unwrap();
        model.kkt_violation(&x, &y) < params.tol && model.alpha(30).iter().all(|&a| (0.0..=c).contains(&a))
    });
    if !kkt_ok {
        failures.push("SMO KKT or box");
    }

    let lbp = LbpParams::new(8, 1).unwrap();
    let rot_ok = (0..10).all(|_| {
        let img = random_image(&mut rng, 23, 31);
        let a = lbp_descriptor(&img, SubImageGrid::WHOLE, &lbp).unwrap();
        let b = lbp_descriptor(&img.rotate90(), SubImageGrid::WHOLE, &lbp).unwrap();
        a.values.iter().zip(&b.values).all(|(u, v)| (u - v).abs() < 1e-12)
    });
    if !rot_ok {
        failures.push("LBP 90 degree invariance");
    }

    let detail = if failures.is_empty() { "8 invariant families hold".to_string() } else { failures.join("; ") };
    gate.report(5, "structural invariants", failures.is_empty(), detail);
}

fn criterion_6(gate: &mut Gate) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut failures: Vec<&str> = Vec::new();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * a.abs().max(b.abs()).max(1.0);

    let radon_ok = (0..200).all(|_| {
        let side = rng.gen_range(4..14);
        let win = Window::new(side, (0..side * side).map(|_| rng.gen()).collect()).unwrap();
        let cols = radon_projection(&win, 0.0);
        let rows = radon_projection(&win, 90.0);
        (0..side).all(|k| {
            close(cols.values[k], (0..side).map(|r| win.get(r, k) as f64).sum())
                && close(rows.values[k], (0..side).map(|c| win.get(k, c) as f64).sum())
        })
    });
    if !radon_ok {
        failures.push("0/90 degree projections");
    }

    let anchor_ok = (0..200).all(|t| {
        let mode = if t % 2 == 0 { AnchorMode::MaxAmplitude } else { AnchorMode::GradientIntegral };
        let win = Window::new(10, (0..100).map(|_| rng.gen()).collect()).unwrap();
        let ps: Vec<Projection> = [0.0, 45.0, 90.0, 135.0].iter().map(|&a| radon_projection(&win, a)).collect();
        let scores: Vec<f64> = ps.iter().map(|p| anchor_score(&p.values, mode)).collect();
        let best = (0..4).fold(0, |b, i| if scores[i] > scores[b] { i } else { b });
        anchor_angle(&ps, mode).unwrap() == ps[best].angle
    });
    if !anchor_ok {
        failures.push("anchor argmax");
    }

    let nn_ok = (0..10).all(|_| {
        let n = rng.gen_range(5..40);
        let vectors: Vec<Vec<f64>> = (0..n).map(|_| (0..10).map(|_| rng.gen::<f64>()).collect()).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
        let report = knn_retrieval_eval(&toy_corpus(vectors.clone(), labels.clone()), 1).unwrap();
        report.queries.iter().all(|q| {
            let i = q.index;
            let mut best = (f64::INFINITY, usize::MAX);
            for j in (0..n).filter(|&j| j != i) {
                let d = chi_squared(&vectors[i], &vectors[j]).unwrap();
                if d < best.0 {
                    best = (d, j);
                }
            }
            q.neighbors[0].0 == best.1 && q.predicted == labels[best.1]
        })
    });
    if !nn_ok {
        failures.push("1-NN brute force");
    }

    let detail = if failures.is_empty() { "radon, anchor and 1-NN oracles agree".to_string() } else { failures.join("; ") };
    gate.report(6, "oracle equivalences", failures.is_empty(), detail);
}

fn criterion_7(gate: &mut Gate, lfw: &Lfw) {
    let (set, source) = match lfw {
        Ok(set) => (set.clone(), "LFW subset".to_string()),
        Err(_) => {
            // same image count, size and identity mix as the LFW subset
            let mut set = synthetic_faces(5, 530, 84, 112, 7);
            let mut keep = BTreeMap::new();
            for (label, &(_, count)) in TABLE_I.iter().enumerate() {
                keep.insert(label, count);
            }
            let idx: Vec<usize> = (0..set.len())
                .filter(|&i| {
                    let left = keep.get_mut(&set.labels[i]).unwrap();
                    *left > 0 && {
                        *left -= 1;
                        true
                    }
                })
                .collect();
            set.images = idx.iter().map(|&i| set.images[i].clone()).collect();
            set.labels = idx.iter().map(|&i| set.labels[i]).collect();
            set.paths = idx.iter().map(|&i| set.paths[i].clone()).collect();
            (set, "synthetic stand-in, LFW absent".to_string())
        }
    };
    let params: DescriptorParams = ElpParams::default().into();
    let mut runs = Vec::new();
    for _ in 0..2 {
        let start = Instant::now();
        let vectors = extract_all(&set.images, &params, SubImageGrid::WHOLE).unwrap();
        runs.push((start.elapsed().as_secs_f64(), cli::descriptor_checksum(&vectors)));
    }
    let threads = rayon::current_num_threads();
    let slowest = runs.iter().map(|r| r.0).fold(0.0, f64::max);
    let pass = set.len() == 1140 && slowest < BENCH_LIMIT_SECONDS && runs[0].1 == runs[1].1;
    gate.report(
        7,
        "extraction performance",
        pass,
        format!(
            "{} images ({source}) in {:.1} s and {:.1} s on {threads} threads (limit {BENCH_LIMIT_SECONDS} s), checksums {}",
            set.len(),
            runs[0].0,
            runs[1].0,
            if runs[0].1 == runs[1].1 { "identical" } else { "differ" }
        ),
    );
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters probe harness-less targets too
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let mut gate = Gate { failed: 0 };
    let lfw = load_lfw();
    criterion_1(&mut gate);
    criterion_2(&mut gate, &lfw);
    criterion_3(&mut gate, &lfw);
    criterion_4(&mut gate, &lfw);
    criterion_5(&mut gate);
    criterion_6(&mut gate);
    criterion_7(&mut gate, &lfw);
    println!("acceptance: {} of 7 criteria failed", gate.failed);
    if gate.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
