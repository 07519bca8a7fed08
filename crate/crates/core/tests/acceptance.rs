//! One PASS/FAIL line per acceptance criterion.
//!
//! A criterion whose inputs are not installed prints FAIL with the missing
//! input and does not fail the run. A criterion that is measured and misses
//! its tolerance fails the run.

mod support;

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sqlhard::catalog::{CatalogSet, ColumnId, Example, SchemaCatalog, ValueType};
use sqlhard::eval::EvalReport;
use sqlhard::hardness::{label_corpus, HardnessLevel};
use sqlhard::pipeline::{self, GeneratorChoice, PipelineConfig, REPORT_JSON, REPORT_TXT};
use sqlhard::refine::{refine, GoldItemScorer, LexicalScorer};
use sqlhard::sql::parse_sql;
use support::refiner::{recall_violations, shape_violations};
use support::{fixture, load_split, read_jsonl, spider_dir};

const TRAIN: &str = "train_spider.json";
const TRAIN_TARGET: [f64; 4] = [24.2, 39.67, 20.87, 15.26];
const DEV_TARGET: [f64; 4] = [23.98, 43.13, 16.83, 16.05];

enum Verdict {
    Pass(String),
    Miss(String),
    Unavailable(String),
}

use Verdict::*;

type Criterion = (&'static str, fn() -> Verdict);

fn distribution(file: &str, target: [f64; 4], budget: Duration) -> Verdict {
    let start = Instant::now();
    let (catalogs, examples) = match load_split(file) {
        Ok(v) => v,
        Err(e) => return Unavailable(e),
    };
    let (_, dist) = match label_corpus(&examples, &catalogs) {
        Ok(v) => v,
        Err(e) => return Miss(e.to_string()),
    };
    let elapsed = start.elapsed();
    let got: Vec<f64> = HardnessLevel::ALL
        .iter()
        .map(|&l| dist.percent(l))
        .collect();
    let worst = got
        .iter()
        .zip(target)
        .map(|(g, t)| (g - t).abs())
        .fold(0.0, f64::max);
    let detail = format!(
        "{} examples, {:.2}/{:.2}/{:.2}/{:.2} %, max deviation {worst:.2}, {:.2} s",
        examples.len(),
        got[0],
        got[1],
        got[2],
        got[3],
        elapsed.as_secs_f64()
    );
    if worst <= 0.5 && elapsed < budget {
        Pass(detail)
    } else {
        Miss(detail)
    }
}

fn parse_failures(catalogs: &CatalogSet, examples: &[Example]) -> Vec<String> {
    examples
        .iter()
        .enumerate()
        .filter_map(|(i, ex)| {
            let catalog = catalogs.get(&ex.db_id)?;
            parse_sql(&ex.gold_sql, catalog)
                .err()
                .map(|e| format!("{i}: {e}"))
        })
        .collect()
}

fn parser_coverage() -> Verdict {
    let mut detail = Vec::new();
    let mut missing = Vec::new();
    let mut failures = 0;
    for file in [TRAIN, "dev.json"] {
        match load_split(file) {
            Ok((catalogs, examples)) => {
                let bad = parse_failures(&catalogs, &examples);
                failures += bad.len();
                detail.push(format!(
                    "{file} {}/{}",
                    examples.len() - bad.len(),
                    examples.len()
                ));
                for b in bad.iter().take(3) {
                    detail.push(b.clone());
                }
            }
            Err(e) => missing.push(e),
        }
    }
    let detail = detail.join(", ");
    if failures > 0 {
        Miss(detail)
    } else if !missing.is_empty() {
        Unavailable(format!("{}; measured {detail}", missing.join("; ")))
    } else {
        Pass(detail)
    }
}

/// Reference labels for `file`: frozen for dev, computed by the reference
/// script otherwise.
fn reference_labels(file: &str) -> Result<Vec<String>, String> {
    if file == "dev.json" {
        return Ok(read_jsonl(&fixture("dev_hardness_official.jsonl"))
            .iter()
            .map(|r| r["hardness"].as_str().unwrap().to_string())
            .collect());
    }
    let script = support::workspace_root().join("tools/reference/spider_reference.py");
    if !script
        .parent()
        .unwrap()
        .join("vendor/evaluation.py")
        .exists()
    {
        return Err(
            "reference evaluator not fetched (scripts/fetch-reference-evaluator.sh)".into(),
        );
    }
    let out = tempfile::NamedTempFile::new().map_err(|e| e.to_string())?;
    let dir = spider_dir();
    let status = Command::new("python3")
        .arg(&script)
        .arg("hardness")
        .arg(dir.join("tables.json"))
        .arg(dir.join(file))
        .arg(out.path())
        .status()
        .map_err(|e| format!("python3: {e}"))?;
    if !status.success() {
        return Err(format!("reference script exited with {status}"));
    }
    Ok(read_jsonl(out.path())
        .iter()
        .map(|r| r["hardness"].as_str().unwrap().to_string())
        .collect())
}

fn differential_hardness() -> Verdict {
    let (mut agree, mut total) = (0, 0);
    let mut missing = Vec::new();
    let mut detail = Vec::new();
    for file in [TRAIN, "dev.json"] {
        let (catalogs, examples) = match load_split(file) {
            Ok(v) => v,
            Err(e) => {
                missing.push(e);
                continue;
            }
        };
        let reference = match reference_labels(file) {
            Ok(r) => r,
            Err(e) => {
                missing.push(format!("{file}: {e}"));
                continue;
            }
        };
        let (labels, _) = match label_corpus(&examples, &catalogs) {
            Ok(v) => v,
            Err(e) => return Miss(e.to_string()),
        };
        let same = labels
            .iter()
            .zip(&reference)
            .filter(|(l, r)| r.parse::<HardnessLevel>().ok() == Some(l.level))
            .count();
        detail.push(format!("{file} {same}/{}", labels.len()));
        agree += same;
        total += labels.len();
    }
    let rate = 100.0 * agree as f64 / total.max(1) as f64;
    let detail = format!("{} ({rate:.2} %)", detail.join(", "));
    if total > 0 && rate < 99.9 {
        Miss(detail)
    } else if !missing.is_empty() {
        Unavailable(format!("{}; measured {detail}", missing.join("; ")))
    } else {
        Pass(detail)
    }
}

fn differential_em() -> Verdict {
    let catalogs = match load_split("dev.json") {
        Ok((c, _)) => c,
        Err(e) => return Unavailable(e),
    };
    let (n, bad) = support::em_disagreements(&catalogs);
    let rate = 100.0 * (n - bad.len()) as f64 / n as f64;
    let detail = format!(
        "{}/{n} agree ({rate:.1} %), disagreements at {bad:?}",
        n - bad.len()
    );
    if n == 1000 && rate >= 99.5 {
        Pass(detail)
    } else {
        Miss(detail)
    }
}

fn full_marks(r: &EvalReport) -> bool {
    r.excluded == 0 && r.levels.iter().all(|l| l.em == 100.0 && l.ex == 100.0)
}

fn gold_echo(db_root: &Path) -> Result<(EvalReport, Duration), String> {
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = spider_dir();
    let config = PipelineConfig {
        dataset: dir.join("dev.json"),
        tables: dir.join("tables.json"),
        db_root: db_root.to_path_buf(),
        output_dir: out.path().to_path_buf(),
        threads: 8,
        generator: GeneratorChoice::GoldEcho,
        ..PipelineConfig::default()
    };
    let start = Instant::now();
    let result = pipeline::run_pipeline(config).map_err(|e| e.to_string())?;
    Ok((result.report, start.elapsed()))
}

fn summary(r: &EvalReport) -> String {
    let cells: Vec<String> = r
        .levels
        .iter()
        .map(|l| format!("{:.1}/{:.1}", l.em, l.ex))
        .collect();
    format!(
        "EM/EX by level {}, excluded {}",
        cells.join(" "),
        r.excluded
    )
}

fn ex_soundness() -> Verdict {
    if load_split("dev.json").is_err() {
        return Unavailable("dev split not installed".into());
    }
    let root = spider_dir().join("database");
    let stand_in = match gold_echo(support::synth::dev_stand_in()) {
        Ok((r, _)) if full_marks(&r) => "passes".to_string(),
        Ok((r, _)) => format!("misses: {}", summary(&r)),
        Err(e) => format!("errors: {e}"),
    };
    if !root.is_dir() {
        return Unavailable(format!(
            "benchmark databases not found at {}; synthesized stand-in {stand_in}",
            root.display()
        ));
    }
    match gold_echo(&root) {
        Ok((r, elapsed)) => {
            let detail = format!("{}, {:.1} s", summary(&r), elapsed.as_secs_f64());
            if full_marks(&r) && elapsed < Duration::from_secs(600) {
                Pass(detail)
            } else {
                Miss(detail)
            }
        }
        Err(e) => Miss(e),
    }
}

fn random_catalog(rng: &mut ChaCha8Rng) -> SchemaCatalog {
    const WORDS: &[&str] = &[
        "name", "age", "city", "id", "year", "title", "price", "song", "student", "grade",
    ];
    let tables: Vec<_> = (0..rng.gen_range(1..10))
        .map(|t| {
            let mut words = WORDS.to_vec();
            words.shuffle(rng);
            let cols = words[..rng.gen_range(1..=WORDS.len())]
                .iter()
                .map(|w| (w.to_string(), w.to_string(), ValueType::Text))
                .collect();
            let name = format!("{}_{t}", WORDS[rng.gen_range(0..WORDS.len())]);
            (name.clone(), name, cols)
        })
        .collect();
    let n: usize = tables
        .iter()
        .map(|t: &(String, String, Vec<_>)| t.2.len())
        .sum();
    let fks = (0..rng.gen_range(0..4))
        .map(|_| {
            (
                ColumnId(rng.gen_range(1..=n)),
                ColumnId(rng.gen_range(1..=n)),
            )
        })
        .collect();
    SchemaCatalog::new("random", tables, fks, vec![]).unwrap()
}

fn refiner_properties() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(support::mutate::SEED);
    let mut bad = Vec::new();
    for i in 0..1000 {
        let catalog = random_catalog(&mut rng);
        let question = format!(
            "which {} have the most {}",
            catalog.tables[0].name, catalog.tables[0].columns[0].name
        );
        let lexical = refine(&question, &catalog, &LexicalScorer).unwrap();
        bad.extend(
            shape_violations(&lexical, &catalog)
                .into_iter()
                .map(|v| format!("catalog {i}: {v}")),
        );
        // Gold query over up to three tables.
        let picked: Vec<_> = catalog.tables.iter().take(3).collect();
        let select: Vec<_> = picked
            .iter()
            .flat_map(|t| {
                t.columns
                    .iter()
                    .take(rng.gen_range(1..=6))
                    .map(move |c| format!("{}.{}", t.name, c.name))
            })
            .collect();
        let from: Vec<_> = picked.iter().map(|t| t.name.as_str()).collect();
        let gold = parse_sql(
            &format!("SELECT {} FROM {}", select.join(", "), from.join(" JOIN ")),
            &catalog,
        )
        .unwrap();
        let oracle = GoldItemScorer::new(&gold);
        let refined = refine(&question, &catalog, &oracle).unwrap();
        bad.extend(
            shape_violations(&refined, &catalog)
                .into_iter()
                .map(|v| format!("catalog {i}: {v}")),
        );
        bad.extend(
            recall_violations(&refined, &oracle)
                .into_iter()
                .map(|v| format!("catalog {i}: {v}")),
        );
    }
    let (catalogs, dev) = match load_split("dev.json") {
        Ok(v) => v,
        Err(e) => {
            return Unavailable(format!(
                "{e}; 1000 random catalogs: {} violations",
                bad.len()
            ))
        }
    };
    for (i, ex) in dev.iter().enumerate() {
        let catalog = catalogs.get(&ex.db_id).unwrap();
        let Ok(gold) = parse_sql(&ex.gold_sql, catalog) else {
            bad.push(format!("dev {i}: gold does not parse"));
            continue;
        };
        let oracle = GoldItemScorer::new(&gold);
        for refined in [
            refine(&ex.question, catalog, &oracle),
            refine(&ex.question, catalog, &LexicalScorer),
        ] {
            bad.extend(
                shape_violations(&refined.unwrap(), catalog)
                    .into_iter()
                    .map(|v| format!("dev {i}: {v}")),
            );
        }
        let refined = refine(&ex.question, catalog, &oracle).unwrap();
        bad.extend(
            recall_violations(&refined, &oracle)
                .into_iter()
                .map(|v| format!("dev {i}: {v}")),
        );
    }
    let detail = format!(
        "1000 random catalogs + {} dev examples, {} violations {:?}",
        dev.len(),
        bad.len(),
        &bad[..bad.len().min(3)]
    );
    if bad.is_empty() {
        Pass(detail)
    } else {
        Miss(detail)
    }
}

fn determinism() -> Verdict {
    let (_, dev) = match load_split("dev.json") {
        Ok(v) => v,
        Err(e) => return Unavailable(e),
    };
    // Gold everywhere except the stress-set mutations.
    let mut sql: Vec<String> = dev.iter().map(|e| e.gold_sql.clone()).collect();
    for p in read_jsonl(&fixture("em_stress_pairs.jsonl")) {
        sql[p["source_index"].as_u64().unwrap() as usize] = p["pred"].as_str().unwrap().to_string();
    }
    let preds = tempfile::NamedTempFile::new().unwrap();
    let text: String = sql
        .iter()
        .enumerate()
        .map(|(index, sql)| serde_json::json!({ "index": index, "sql": sql }).to_string() + "\n")
        .collect();
    std::fs::write(preds.path(), text).unwrap();
    let run = || -> Result<(tempfile::TempDir, EvalReport), String> {
        let out = tempfile::tempdir().map_err(|e| e.to_string())?;
        let dir = spider_dir();
        let config = PipelineConfig {
            dataset: dir.join("dev.json"),
            tables: dir.join("tables.json"),
            db_root: support::synth::dev_stand_in().to_path_buf(),
            output_dir: out.path().to_path_buf(),
            generator: GeneratorChoice::Replay {
                path: PathBuf::from(preds.path()),
            },
            ..PipelineConfig::default()
        };
        let r = pipeline::run_pipeline(config).map_err(|e| e.to_string())?;
        Ok((out, r.report))
    };
    let (a, b) = match (run(), run()) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return Miss(e),
    };
    let files = [REPORT_JSON, REPORT_TXT];
    let same = files
        .iter()
        .all(|f| std::fs::read(a.0.path().join(f)).ok() == std::fs::read(b.0.path().join(f)).ok());
    let detail = format!(
        "replayed {} predictions twice on synthesized databases, overall EM {:.1} EX {:.1}, {} identical",
        sql.len(),
        a.1.overall.em,
        a.1.overall.ex,
        files.join(" and ")
    );
    if same {
        Pass(detail)
    } else {
        Miss(detail)
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("hardness distribution, train (+-0.5 %, < 60 s)", || {
            distribution(TRAIN, TRAIN_TARGET, Duration::from_secs(60))
        }),
        ("hardness distribution, dev (+-0.5 %, < 15 s)", || {
            distribution("dev.json", DEV_TARGET, Duration::from_secs(15))
        }),
        ("parser coverage, train+dev (100 %)", parser_coverage),
        (
            "differential hardness, train+dev (>= 99.9 %)",
            differential_hardness,
        ),
        (
            "differential exact match, 1000 stress pairs (>= 99.5 %)",
            differential_em,
        ),
        (
            "execution soundness, gold echo on dev (EM = EX = 100.0, < 10 min)",
            ex_soundness,
        ),
        ("refiner cardinality and oracle recall", refiner_properties),
        ("determinism of replayed runs", determinism),
    ];
    let mut missed = 0;
    println!();
    for (name, check) in criteria {
        match check() {
            Pass(d) => println!("PASS  {name}: {d}"),
            Miss(d) => {
                missed += 1;
                println!("FAIL  {name}: {d}");
            }
            Unavailable(d) => println!("FAIL  {name}: input unavailable: {d}"),
        }
    }
    println!();
    if missed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
