use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_chainlab");
const LOOPBACK: &str = env!("CARGO_BIN_EXE_chainlab-loopback");

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// A scratch directory holding copies of the fixtures, so relative paths in
/// output headers do not depend on where the repository lives.
struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        for entry in fs::read_dir(fixtures()).unwrap() {
            let entry = entry.unwrap();
            fs::copy(entry.path(), dir.path().join(entry.file_name())).unwrap();
        }
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(BIN)
            .args(args)
            .current_dir(self.dir.path())
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> Output {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        out
    }

    fn indexed(self) -> Self {
        self.ok(&["index", "--corpus", "corpus.txt", "--out", "idx"]);
        self
    }

    fn read(&self, name: &str) -> String {
        fs::read_to_string(self.path(name)).unwrap()
    }

    /// Header and records of a JSONL output.
    fn records(&self, name: &str) -> (Value, Vec<Value>) {
        let text = self.read(name);
        let mut lines = text.lines().map(|l| serde_json::from_str::<Value>(l).unwrap());
        let header = lines.next().expect("header line")["_header"].clone();
        assert!(header.is_object(), "{name} has no header");
        (header, lines.collect())
    }
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn scores_of(records: &[Value]) -> Vec<(String, f64)> {
    records
        .iter()
        .map(|r| (r["chain_id"].as_str().unwrap().to_string(), r["score"].as_f64().unwrap()))
        .collect()
}

fn loopback(args: &str) -> String {
    format!("cmd:{LOOPBACK} {args}").trim().to_string()
}

#[test]
fn missing_input_exits_one() {
    let ws = Workspace::new();
    let out = ws.run(&["retrieve", "--index", "nope", "--questions", "questions.jsonl", "--out", "c.jsonl"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not exist"));
}

#[test]
fn unknown_flag_exits_one() {
    let ws = Workspace::new();
    assert_eq!(code(&ws.run(&["retrieve", "--bogus"])), 1);
    assert_eq!(code(&ws.run(&["score", "--in", "x", "--out", "y", "--scorer", "ftp:nowhere"])), 1);
    assert_eq!(code(&ws.run(&["eval", "--scores", "x", "--gold", "y", "--metrics", "map"])), 1);
}

#[test]
fn help_exits_zero() {
    assert_eq!(code(&Workspace::new().run(&["--help"])), 0);
}

#[test]
fn zero_jobs_is_a_usage_error() {
    let ws = Workspace::new();
    assert_eq!(code(&ws.run(&["--jobs", "0", "index", "--corpus", "corpus.txt", "--out", "idx"])), 1);
}

#[test]
fn existing_index_needs_force() {
    let ws = Workspace::new().indexed();
    let again = ws.run(&["index", "--corpus", "corpus.txt", "--out", "idx"]);
    assert_eq!(code(&again), 1);
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));
    ws.ok(&["index", "--corpus", "corpus.txt", "--out", "idx", "--force"]);
}

#[test]
fn index_writes_build_stats() {
    let ws = Workspace::new().indexed();
    let build: Value = serde_json::from_str(&ws.read("idx/build.json")).unwrap();
    assert_eq!(build["input_sentences"], 10);
    assert_eq!(build["skipped"], 0);
    assert_eq!(build["_header"]["subcommand"], "index");
    assert_eq!(build["_header"]["stopwords"], "en-1");
}

#[test]
fn malformed_questions_exit_one() {
    let ws = Workspace::new().indexed();
    fs::write(ws.path("bad.jsonl"), "{\"question_id\":\"a\"}\n").unwrap();
    let out = ws.run(&["retrieve", "--index", "idx", "--questions", "bad.jsonl", "--out", "c.jsonl"]);
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn retrieve_echoes_config_in_header() {
    let ws = Workspace::new().indexed();
    ws.ok(&[
        "--seed", "7", "retrieve", "--index", "idx", "--questions", "questions.jsonl", "--out", "c.jsonl",
        "--k", "5", "--l", "2", "--m", "3", "--overlap", "or", "--second-hop", "fact",
    ]);
    let (header, chains) = ws.records("c.jsonl");
    assert_eq!(header["subcommand"], "retrieve");
    assert_eq!(header["seed"], 7);
    assert_eq!(header["inputs"]["questions"], "questions.jsonl");
    assert_eq!(
        header["retrieval"],
        serde_json::json!({"k": 5, "l": 2, "m": 3, "second_hop": "fact", "overlap": "question-or-answer"})
    );
    assert!(!chains.is_empty());
    for q in ["forest", "friction"] {
        assert!(chains.iter().filter(|c| c["question_id"] == q).count() <= 3);
    }
}

#[test]
fn retrieval_is_identical_across_job_counts() {
    let ws = Workspace::new().indexed();
    ws.ok(&["--jobs", "1", "retrieve", "--index", "idx", "--questions", "questions.jsonl", "--out", "a.jsonl"]);
    ws.ok(&["--jobs", "4", "retrieve", "--index", "idx", "--questions", "questions.jsonl", "--out", "b.jsonl"]);
    assert_eq!(ws.records("a.jsonl").1, ws.records("b.jsonl").1);
}

#[test]
fn forest_fire_chain_generalizes_to_the_causal_pattern() {
    let ws = Workspace::new().indexed();
    ws.ok(&["retrieve", "--index", "idx", "--questions", "questions.jsonl", "--out", "c.jsonl"]);
    ws.ok(&["grc", "--in", "c.jsonl", "--out", "g.jsonl"]);
    let (_, grc) = ws.records("g.jsonl");
    let top = grc.iter().find(|g| g["chain_id"] == "forest#0").unwrap();
    assert_eq!(top["template_f1"], "V1 can cause V2");
    assert_eq!(top["template_f2"], "V2 can start V3");
    assert_eq!(top["bindings"][2]["phrase"], "a forest fire");
}

#[test]
fn loopback_constant_scores_every_chain() {
    let ws = Workspace::new().indexed();
    ws.ok(&["retrieve", "--index", "idx", "--questions", "questions.jsonl", "--out", "c.jsonl"]);
    ws.ok(&["score", "--in", "c.jsonl", "--out", "s.jsonl", "--scorer", &loopback("--mode constant:0.5")]);
    let (header, scores) = ws.records("s.jsonl");
    assert_eq!(header["scorer"]["kind"]["kind"], "external-subprocess");
    assert_eq!(scores.len(), ws.records("c.jsonl").1.len());
    assert!(scores.iter().all(|s| s["score"] == 0.5));
}

#[test]
fn out_of_range_score_exits_two() {
    let ws = Workspace::new().indexed();
    ws.ok(&["retrieve", "--index", "idx", "--questions", "questions.jsonl", "--out", "c.jsonl"]);
    let out = ws.run(&["score", "--in", "c.jsonl", "--out", "s.jsonl", "--scorer", &loopback("--mode constant:1.2")]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("outside [0, 1]"));
}

#[test]
fn scorer_errors_exit_two() {
    let ws = Workspace::new().indexed();
    ws.ok(&["retrieve", "--index", "idx", "--questions", "questions.jsonl", "--out", "c.jsonl"]);
    let out = ws.run(&["score", "--in", "c.jsonl", "--out", "s.jsonl", "--scorer", &loopback("--mode error")]);
    assert_eq!(code(&out), 2);
    let out = ws.run(&["score", "--in", "c.jsonl", "--out", "s.jsonl", "--scorer", "cmd:/no/such/scorer"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn slow_scorer_times_out() {
    let ws = Workspace::new().indexed();
    ws.ok(&["retrieve", "--index", "idx", "--questions", "questions.jsonl", "--out", "c.jsonl"]);
    let out = ws.run(&[
        "score", "--in", "c.jsonl", "--out", "s.jsonl", "--timeout-ms", "200",
        "--scorer", &loopback("--sleep-ms 2000"),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("timed out"));
}

#[test]
fn hash_scorer_is_reproducible() {
    let ws = Workspace::new().indexed();
    ws.ok(&["retrieve", "--index", "idx", "--questions", "questions.jsonl", "--out", "c.jsonl"]);
    ws.ok(&["score", "--in", "c.jsonl", "--out", "a.jsonl", "--scorer", &loopback(""), "--batch-size", "1"]);
    ws.ok(&[
        "--jobs", "3", "score", "--in", "c.jsonl", "--out", "b.jsonl", "--scorer", &loopback(""),
    ]);
    let (_, a) = ws.records("a.jsonl");
    let (_, b) = ws.records("b.jsonl");
    assert_eq!(a, b);
    assert!(scores_of(&a).iter().all(|(_, s)| (0.0..1.0).contains(s)));
}

#[test]
fn crashed_scorer_is_restarted_once() {
    let ws = Workspace::new().indexed();
    ws.ok(&["retrieve", "--index", "idx", "--questions", "questions.jsonl", "--out", "c.jsonl"]);
    let marker = ws.path("marker");
    let scorer = loopback(&format!("--fail-once {}", marker.display()));
    ws.ok(&["score", "--in", "c.jsonl", "--out", "retried.jsonl", "--scorer", &scorer]);
    assert!(marker.exists());
    ws.ok(&["score", "--in", "c.jsonl", "--out", "plain.jsonl", "--scorer", &loopback("")]);
    assert_eq!(
        scores_of(&ws.records("retried.jsonl").1),
        scores_of(&ws.records("plain.jsonl").1)
    );
}

#[test]
fn http_scorer_matches_subprocess() {
    use std::io::{BufRead, BufReader};
    let ws = Workspace::new().indexed();
    ws.ok(&["retrieve", "--index", "idx", "--questions", "questions.jsonl", "--out", "c.jsonl"]);
    let mut server = Command::new(LOOPBACK)
        .args(["--http", "127.0.0.1:0"])
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    let mut addr = String::new();
    BufReader::new(server.stdout.take().unwrap()).read_line(&mut addr).unwrap();
    let url = format!("http://{}", addr.trim());
    let http = ws.run(&["score", "--in", "c.jsonl", "--out", "h.jsonl", "--scorer", &url, "--repr", "grc"]);
    server.kill().unwrap();
    server.wait().unwrap();
    assert!(http.status.success(), "{}", String::from_utf8_lossy(&http.stderr));
    ws.ok(&["score", "--in", "c.jsonl", "--out", "p.jsonl", "--scorer", &loopback(""), "--repr", "grc"]);
    assert_eq!(scores_of(&ws.records("h.jsonl").1), scores_of(&ws.records("p.jsonl").1));
}

#[test]
fn rank_orders_by_score() {
    let ws = Workspace::new().indexed();
    ws.ok(&["retrieve", "--index", "idx", "--questions", "questions.jsonl", "--out", "c.jsonl"]);
    ws.ok(&["score", "--in", "c.jsonl", "--out", "s.jsonl", "--scorer", &loopback("")]);
    ws.ok(&["rank", "--in", "s.jsonl", "--out", "r.jsonl"]);
    let (_, ranked) = ws.records("r.jsonl");
    assert_eq!(ranked.len(), 2);
    for q in &ranked {
        let scores: Vec<f64> = q["ranking"]
            .as_array()
            .unwrap()
            .iter()
            .map(|e| e["score"].as_f64().unwrap())
            .collect();
        assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    }
}

#[test]
fn eval_reports_metrics_against_gold() {
    let ws = Workspace::new();
    ws.ok(&["score", "--gold", "gold.jsonl", "--out", "s.jsonl", "--scorer", &loopback("--mode constant:0.75")]);
    let out = ws.ok(&["eval", "--scores", "s.jsonl", "--gold", "gold.jsonl"]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["chains"], 4);
    assert_eq!(report["questions"], 2);
    // every chain predicted valid at 0.5: precision 1/2, recall 1
    assert!((report["f1"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(report["auc_roc"], 0.5);
    assert_eq!(report["upper_bound_p_at_1"], 1.0);
    assert_eq!(report["_header"]["subcommand"], "eval");
    assert_eq!(report["_header"]["options"]["split"], "test");
}

#[test]
fn eval_with_selected_metrics_and_file_output() {
    let ws = Workspace::new();
    ws.ok(&["score", "--gold", "gold.jsonl", "--out", "s.jsonl", "--scorer", &loopback("")]);
    ws.ok(&["eval", "--scores", "s.jsonl", "--gold", "gold.jsonl", "--metrics", "p1", "--out", "report.json"]);
    let report: Value = serde_json::from_str(&ws.read("report.json")).unwrap();
    assert!(report.get("p_at_1").is_some());
    assert!(report.get("f1").is_none());
    assert!(report.get("auc_roc").is_none());
}

#[test]
fn auto_threshold_needs_dev_files() {
    let ws = Workspace::new();
    ws.ok(&["score", "--gold", "gold.jsonl", "--out", "s.jsonl"]);
    let out = ws.run(&["eval", "--scores", "s.jsonl", "--gold", "gold.jsonl", "--threshold", "auto"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn eval_with_unscored_gold_chain_exits_one() {
    let ws = Workspace::new();
    ws.ok(&["score", "--gold", "gold.jsonl", "--out", "s.jsonl"]);
    let text = ws.read("s.jsonl");
    let kept: Vec<&str> = text.lines().take(3).collect();
    fs::write(ws.path("partial.jsonl"), kept.join("\n")).unwrap();
    let out = ws.run(&["eval", "--scores", "partial.jsonl", "--gold", "gold.jsonl"]);
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn grc_consistency_on_renamed_pairs_is_total() {
    let ws = Workspace::new();
    let grc = ws.ok(&["consistency", "--pairs", "perturbed.jsonl", "--scorer", &loopback(""), "--repr", "grc"]);
    let grc: Value = serde_json::from_slice(&grc.stdout).unwrap();
    assert_eq!(grc["pairs"], 3);
    assert_eq!(grc["fraction_zero_change"], 1.0);
    assert_eq!(grc["histogram"][0]["count"], 3);
    let surface = ws.ok(&["consistency", "--pairs", "perturbed.jsonl", "--scorer", &loopback("")]);
    let surface: Value = serde_json::from_slice(&surface.stdout).unwrap();
    assert_eq!(surface["fraction_zero_change"], 0.0);
}

#[test]
fn consistency_needs_an_external_scorer_for_pairs() {
    let ws = Workspace::new();
    assert_eq!(code(&ws.run(&["consistency", "--pairs", "perturbed.jsonl"])), 1);
}

#[test]
fn consistency_from_score_files() {
    let ws = Workspace::new().indexed();
    ws.ok(&["retrieve", "--index", "idx", "--questions", "questions.jsonl", "--out", "c.jsonl"]);
    ws.ok(&["score", "--in", "c.jsonl", "--out", "a.jsonl", "--scorer", &loopback("--mode constant:0.25")]);
    ws.ok(&["score", "--in", "c.jsonl", "--out", "b.jsonl", "--scorer", &loopback("--mode constant:0.5")]);
    let out = ws.ok(&[
        "consistency", "--orig", "c.jsonl", "--edited", "c.jsonl", "--scores-a", "a.jsonl", "--scores-b", "b.jsonl",
        "--out", "cons.json",
    ]);
    assert!(out.stdout.is_empty());
    let report: Value = serde_json::from_str(&ws.read("cons.json")).unwrap();
    assert_eq!(report["fraction_zero_change"], 0.0);
    assert_eq!(report["mean_abs_change"], 0.25);
    // |Δ| = 0.25 lands in (0.2, 0.3]
    assert_eq!(report["histogram"][3]["count"], report["pairs"]);
}

#[test]
fn mine_groups_alpha_equivalent_chains() {
    let ws = Workspace::new().indexed();
    ws.ok(&["retrieve", "--index", "idx", "--questions", "questions.jsonl", "--out", "c.jsonl"]);
    ws.ok(&["grc", "--in", "c.jsonl", "--out", "g.jsonl"]);
    ws.ok(&["score", "--in", "c.jsonl", "--out", "s.jsonl", "--scorer", &loopback("--mode constant:0.5")]);
    ws.ok(&["mine", "--grc", "g.jsonl", "--scores", "s.jsonl", "--out", "m.jsonl", "--examples", "1"]);
    let (header, rows) = ws.records("m.jsonl");
    assert_eq!(header["options"]["examples"], 1);
    let total: u64 = rows.iter().map(|r| r["support_count"].as_u64().unwrap()).sum();
    assert_eq!(total as usize, ws.records("g.jsonl").1.len());
    assert!(rows.iter().all(|r| r["example_chain_ids"].as_array().unwrap().len() == 1));
    assert!(rows
        .iter()
        .any(|r| r["pattern"].as_str().unwrap().starts_with("X can cause Y AND Y can start Z")));
}

#[test]
fn mine_merges_renamed_chains() {
    let ws = Workspace::new();
    let chains = [
        ("a", "Static electricity can cause sparks", "Sparks can start a forest fire", "Static electricity can cause a forest fire"),
        ("b", "Friction can cause heat", "Heat can start a fire", "Friction can cause a fire"),
    ];
    let mut text = String::new();
    for (id, f1, f2, h) in chains {
        text.push_str(
            &serde_json::json!({
                "question_id": id, "chain_id": id, "f1_id": "x", "f1_text": f1, "f2_id": "y",
                "f2_text": f2, "hypothesis": h, "score_f1": 1.0, "score_f2": 1.0, "combined_score": 2.0,
            })
            .to_string(),
        );
        text.push('\n');
    }
    fs::write(ws.path("c.jsonl"), text).unwrap();
    ws.ok(&["grc", "--in", "c.jsonl", "--out", "g.jsonl"]);
    ws.ok(&["score", "--in", "c.jsonl", "--out", "s.jsonl"]);
    ws.ok(&["mine", "--grc", "g.jsonl", "--scores", "s.jsonl", "--out", "m.jsonl"]);
    let (_, rows) = ws.records("m.jsonl");
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["pattern"], "X can cause Y AND Y can start Z -> X can cause Z");
    assert_eq!(rows[0]["support_count"], 2);
}

#[test]
fn retrieval_ranking_ignores_representation() {
    let ws = Workspace::new().indexed();
    for (repr, dir) in [("surface", "s"), ("grc", "g")] {
        ws.ok(&["pipeline", "--index", "idx", "--questions", "questions.jsonl", "--out-dir", dir, "--repr", repr]);
    }
    assert_eq!(ws.records("s/ranked.jsonl").1, ws.records("g/ranked.jsonl").1);
}

#[test]
fn pipeline_without_gold_omits_report() {
    let ws = Workspace::new().indexed();
    ws.ok(&["pipeline", "--index", "idx", "--questions", "questions.jsonl", "--out-dir", "run"]);
    for name in ["chains.jsonl", "grc.jsonl", "scores.jsonl", "ranked.jsonl"] {
        assert!(ws.path("run").join(name).is_file(), "{name} missing");
    }
    assert!(!ws.path("run/report.json").exists());
}

const GOLDEN_FILES: [&str; 5] = ["chains.jsonl", "grc.jsonl", "scores.jsonl", "ranked.jsonl", "report.json"];

/// Set CHAINLAB_BLESS=1 to rewrite the golden files from the current output.
#[test]
fn pipeline_matches_golden_output() {
    let ws = Workspace::new().indexed();
    ws.ok(&[
        "pipeline", "--index", "idx", "--questions", "questions.jsonl", "--gold", "gold.jsonl", "--out-dir", "run",
    ]);
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/pipeline");
    let bless = std::env::var_os("CHAINLAB_BLESS").is_some();
    if bless {
        fs::create_dir_all(&golden).unwrap();
    }
    for name in GOLDEN_FILES {
        let got = ws.read(&format!("run/{name}"));
        let path = golden.join(name);
        if bless {
            fs::write(&path, &got).unwrap();
        } else {
            let want = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert_eq!(got, want, "{name} differs from golden output");
        }
    }
}

#[test]
fn pipeline_report_labels_retrieved_chains() {
    let ws = Workspace::new().indexed();
    ws.ok(&[
        "pipeline", "--index", "idx", "--questions", "questions.jsonl", "--gold", "gold.jsonl", "--out-dir", "run",
    ]);
    let report: Value = serde_json::from_str(&ws.read("run/report.json")).unwrap();
    assert_eq!(report["questions"], 2);
    assert_eq!(report["upper_bound_p_at_1"], 1.0);
    assert_eq!(report["_header"]["subcommand"], "pipeline");
    assert_eq!(report["_header"]["inputs"]["gold"], "gold.jsonl");
}
