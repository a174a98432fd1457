use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qgc_cli::rates::RateTable;
use qgc_cli::simulate::SimulationTable;
use qgc_cli::verify::VerifyReport;
use qgc_core::{GroupSpec, Pmf, QgcCodebook, QgcSpec, TypicalityParams};
use tempfile::TempDir;

const Z4: &str = "[group]\np = 2\nr = 2\n";

fn qgc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qgc")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(cmd: &str, config: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", config.to_str().unwrap()];
    args.extend_from_slice(extra);
    qgc(&args)
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn rates_json_round_trips_and_hashes_are_stable() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        &format!("{Z4}[problem]\nkind = \"dsc\"\nnoise = {{ family = \"table1\", delta = 0.6 }}\n"),
    );
    let out = dir.path().join("r.json");
    let o = run("rates", &cfg, &["--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let table: RateTable = serde_json::from_str(&text).unwrap();
    assert_eq!(table.0.len(), 4);
    assert!(table.0.iter().all(|r| r.problem_hash == table.0[0].problem_hash));
    assert_eq!(serde_json::to_string_pretty(&table).unwrap() + "\n", text);
    // Summary on stdout, data in the file.
    assert!(String::from_utf8_lossy(&o.stdout).contains("qgc"));

    let out2 = dir.path().join("r2.json");
    run("rates", &cfg, &["--out", out2.to_str().unwrap()]);
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&out2).unwrap());

    let other = dir.path().join("r3.json");
    run("rates", &cfg, &["--out", other.to_str().unwrap(), "--delta", "0.3"]);
    let t3: RateTable = serde_json::from_str(&std::fs::read_to_string(&other).unwrap()).unwrap();
    assert_ne!(t3.0[0].problem_hash, table.0[0].problem_hash);
    assert_eq!(t3.0[0].delta, Some(0.3));
}

#[test]
fn sweep_gives_21_rows_per_scheme_in_order() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        &format!(
            "schemes = [\"unstructured\", \"uqgc\"]\n{Z4}[problem]\nkind = \"dsc\"\nnoise = {{ family = \"table1\", delta = 0.0 }}\nsweep = {{ start = 0.0, stop = 1.0, step = 0.05 }}\n[output]\nformat = \"csv\"\n"
        ),
    );
    let o = run("rates", &cfg, &[]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(
        reader.headers().unwrap().iter().collect::<Vec<_>>(),
        ["scheme", "delta", "rate_bits", "s_star", "aux_desc"]
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 42);
    for (block, scheme) in ["unstructured", "qgc"].iter().enumerate() {
        let part = &rows[block * 21..(block + 1) * 21];
        assert!(part.iter().all(|r| &r[0] == *scheme));
        let deltas: Vec<f64> = part.iter().map(|r| r[1].parse().unwrap()).collect();
        assert!(deltas.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(&part[12][1], "0.600000");
        for r in part {
            let decimals = r[2].split('.').nth(1).unwrap();
            assert_eq!(decimals.len(), 6);
        }
    }
    assert_eq!(&rows[12][2], "1.719973");
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let zero_trials = write(
        dir.path(),
        "a.toml",
        &format!("{Z4}[simulation]\nn = [4]\ntrials = 0\n"),
    );
    assert_eq!(code(&run("simulate", &zero_trials, &[])), 2);
    let unknown = write(dir.path(), "b.toml", &format!("{Z4}[output]\nfile = \"x\"\n"));
    assert_eq!(code(&run("rates", &unknown, &[])), 2);
    assert_eq!(code(&run("rates", &dir.path().join("missing.toml"), &[])), 2);
    assert_eq!(code(&qgc(&["rates"])), 2);

    let z9 = write(
        dir.path(),
        "c.toml",
        "[group]\np = 3\nr = 2\n[problem]\nkind = \"mac\"\nnoise = { family = \"uniform\" }\n",
    );
    let o = run("rates", &z9, &[]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Z_4"));

    let big = write(
        dir.path(),
        "d.toml",
        &format!(
            "{Z4}[problem]\nkind = \"mac\"\nnoise = {{ family = \"table1\", delta = 0.6 }}\n[aux]\nmode = \"reference\"\nrho = 0.5\n[simulation]\nn = [40]\ntrials = 5\nepsilon = 1.0\nk = 30\n"
        ),
    );
    let o = run("simulate", &big, &[]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("n = 40"));
}

fn codebook_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let g = GroupSpec::z4();
    let params = TypicalityParams::new(1.0).unwrap();
    let spec = QgcSpec::single(g, 5, 3, Pmf::bernoulli(g, 0.3).unwrap(), params).unwrap();
    let cb = QgcCodebook::build(spec, 11).unwrap();
    let doc = cb.to_document();
    let good = dir.join("good.json");
    std::fs::write(&good, serde_json::to_string(&doc).unwrap()).unwrap();
    let mut bad_doc = doc;
    bad_doc.matrices[0][0] = (bad_doc.matrices[0][0] + 1) % 4;
    let bad = dir.join("bad.json");
    std::fs::write(&bad, serde_json::to_string(&bad_doc).unwrap()).unwrap();
    (good, bad)
}

#[test]
fn verify_passes_and_catches_a_corrupted_codebook() {
    let dir = TempDir::new().unwrap();
    let (good, bad) = codebook_fixture(dir.path());
    let cfg = write(
        dir.path(),
        "v.toml",
        &format!(
            "{Z4}[verify]\nphi_suite = {{ k_max = 2, n_max = 2 }}\nsumset = {{ pairs = 20 }}\ncodebook_files = [{:?}]\n",
            good.to_str().unwrap()
        ),
    );
    let out = dir.path().join("v.json");
    let o = run("verify", &cfg, &["--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: VerifyReport = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(report.passed());
    assert_eq!(report.phi.len(), 40);
    assert!(report.phi.iter().all(|p| p.exact && p.max_deviation == 0.0));
    assert_eq!(report.sumset.len(), 80);
    assert!(report.codebooks[0].ok);

    let cfg = write(
        dir.path(),
        "w.toml",
        &format!("{Z4}[verify]\ncodebook_files = [{:?}]\n", bad.to_str().unwrap()),
    );
    let o = run("verify", &cfg, &["--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 5);
    let report: VerifyReport = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(!report.passed());
    assert!(!report.codebooks[0].ok);

    let garbage = write(dir.path(), "g.json", "{\"group\": {\"p\": 2, \"r\": 2}, \"n\": 3}");
    let cfg = write(
        dir.path(),
        "x.toml",
        &format!("{Z4}[verify]\ncodebook_files = [{:?}]\n", garbage.to_str().unwrap()),
    );
    assert_eq!(code(&run("verify", &cfg, &[])), 5);
}

#[test]
fn noiseless_simulation_records() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "s.toml",
        &format!(
            "{Z4}[problem]\nkind = \"mac\"\nnoise = {{ family = \"point\", a = 0 }}\n[aux]\nmode = \"reference\"\nrho = 0.3\n[simulation]\nn = [4, 6]\ntrials = 100\nepsilon = 3.0\nk = 4\nseeds = 3\n"
        ),
    );
    let out = dir.path().join("s.json");
    let o = run("simulate", &cfg, &["--out", out.to_str().unwrap(), "--seed", "7"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table: SimulationTable = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(table.0.len(), 6);
    let seeds: Vec<u64> = table.0.iter().map(|r| r.result.seed).collect();
    assert_eq!(seeds, [7, 8, 9, 7, 8, 9]);
    assert!(table.0.iter().all(|r| r.result.decoder_error_rate == 0.0));
    assert!(table.0.iter().all(|r| r.config_hash == table.0[0].config_hash));

    // Same config, so the same hash and bytes, regardless of output path.
    let again = dir.path().join("t.json");
    let o = run("simulate", &cfg, &["--out", again.to_str().unwrap(), "--seed", "7"]);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&again).unwrap());

    let csv_cfg = write(
        dir.path(),
        "c.toml",
        &format!("{}[output]\nformat = \"csv\"\n", std::fs::read_to_string(&cfg).unwrap()),
    );
    let o = run("simulate", &csv_cfg, &["--seed", "7"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert!(text.lines().nth(1).unwrap().starts_with("mac,,4,7,"));
}

#[test]
fn ptp_rates_and_unsupported_simulation() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "p.toml",
        &format!(
            "schemes = [\"qgc\", \"unstructured\"]\n{Z4}[problem]\nkind = \"ptp\"\nnoise = {{ family = \"table1\", delta = 0.6 }}\n[simulation]\nn = [4]\ntrials = 10\n"
        ),
    );
    let o = run("rates", &cfg, &[]);
    assert_eq!(code(&o), 0);
    let table: RateTable = serde_json::from_slice(&o.stdout).unwrap();
    assert!((table.0[0].rate_bits - (2.0 - 1.4399461880439497)).abs() < 1e-9);
    assert_eq!(code(&run("simulate", &cfg, &[])), 3);
    let cfg = write(
        dir.path(),
        "q.toml",
        &format!("schemes = [\"group\"]\n{Z4}[problem]\nkind = \"ptp\"\nnoise = {{ family = \"uniform\" }}\n"),
    );
    assert_eq!(code(&run("rates", &cfg, &[])), 3);
}
