use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use vibcascade::rates::EINSTEIN_A_PER_S;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vibcascade"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn surrogate() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/cs2_surrogate.toml")
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    let mut cmd = bin();
    cmd.args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out);
    cmd.output().expect("binary runs")
}

fn ok(args: &[&str], config: &Path, out: &Path) {
    let o = run(args, config, out);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

/// Rows of a CSV file keyed by header name.
fn csv(path: &Path) -> Vec<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().expect("header").split(',').collect();
    lines
        .map(|l| {
            header
                .iter()
                .zip(l.split(','))
                .map(|(h, v)| (h.to_string(), v.to_string()))
                .collect()
        })
        .collect()
}

fn num(row: &BTreeMap<String, String>, col: &str) -> f64 {
    row[col]
        .parse()
        .unwrap_or_else(|_| panic!("bad number in column {col}"))
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Copy of the toy config with one `key = value` line replaced.
fn toy_with(dir: &Path, key: &str, value: &str) -> PathBuf {
    let text = fs::read_to_string(fixture("toy.toml")).unwrap();
    let mut hit = false;
    let edited: Vec<String> = text
        .lines()
        .map(|l| {
            if l.starts_with(&format!("{key} =")) && !hit {
                hit = true;
                format!("{key} = {value}")
            } else {
                l.to_string()
            }
        })
        .collect();
    assert!(hit, "no line for {key}");
    let path = dir.join("toy.toml");
    fs::write(&path, edited.join("\n")).unwrap();
    path
}

#[test]
fn missing_config_exits_2_and_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    let o = run(&["levels"], &missing, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.toml"));
}

#[test]
fn missing_curve_file_exits_2_and_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(fixture("toy.toml")).unwrap().replace(
        "constant = 2.0",
        "file = \"absent_dipole.dat\"\nunits = \"angstrom au\"",
    );
    let cfg = dir.path().join("toy.toml");
    fs::write(&cfg, text).unwrap();
    let o = run(&["levels"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("absent_dipole.dat"));
}

#[test]
fn malformed_config_reports_a_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "reduced_mass_amu = 66.4\n[grid\nr_min = 3.0\n").unwrap();
    let o = run(&["levels"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains(":2"));
}

#[test]
fn selfcheck_passes() {
    let o = bin().arg("selfcheck").output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.lines().count() >= 5);
    assert!(text.lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn harmonic_curve_file_gives_analytic_levels() {
    let dir = tempfile::tempdir().unwrap();
    let mu = 66.4527259805 * 1822.888486209;
    let omega_cm = 40.0;
    let omega = omega_cm / 219474.6313632;
    let r0 = 9.5;
    let mut data = String::from("# units: bohr au\n");
    for i in 0..=2000 {
        let r = 6.0 + 0.0035 * i as f64;
        data += &format!(
            "{r:.6} {:.17e}\n",
            0.5 * mu * omega * omega * (r - r0) * (r - r0)
        );
    }
    fs::write(dir.path().join("ho.dat"), data).unwrap();
    let cfg = dir.path().join("ho.toml");
    fs::write(
        &cfg,
        r#"reduced_mass_amu = 66.4527259805

[grid]
kind = "uniform"
r_min = 4.0
r_max = 6.0
n = 240

[[curve]]
name = "ho"
kind = "potential"
file = "ho.dat"

[[manifold]]
name = "ho"
potential = "ho"
spin = "singlet"
ceiling = 420.0
"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    ok(&["levels"], &cfg, &out);
    let rows = csv(&out.join("levels_ho.csv"));
    assert_eq!(rows.len(), 10);
    for (v, row) in rows.iter().enumerate() {
        let want = omega_cm * (v as f64 + 0.5);
        assert!((num(row, "energy_cm-1") - want).abs() < 2e-6, "v={v}");
    }
}

#[test]
fn toy_conversion_matches_hand_computed_branching() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let cfg = fixture("toy.toml");
    ok(&["rates", "--from", "P", "--to", "a"], &cfg, out);
    ok(&["rates", "--from", "P", "--to", "0u"], &cfg, out);
    ok(&["rates", "--from", "0u", "--to", "X"], &cfg, out);
    ok(&["levels"], &cfg, out);
    ok(&["convert"], &cfg, out);

    let level = |m: &str| num(&csv(&out.join(format!("levels_{m}.csv")))[0], "energy_cm-1");
    let rate = |f: &str, t: &str| csv(&out.join(format!("rates_{f}_to_{t}.csv"))).remove(0);
    let (to_a, to_0u, to_x) = (rate("P", "a"), rate("P", "0u"), rate("0u", "X"));

    // A = prefactor·ΔE³·μ² from the tabulated energies and dipoles
    let hartree = |cm: f64| cm / 219474.6313632;
    for (row, de) in [
        (&to_a, level("P") - level("a")),
        (&to_0u, level("P") - level("0u")),
        (&to_x, level("0u") - level("X")),
    ] {
        let a = EINSTEIN_A_PER_S * hartree(de).powi(3) * num(row, "mu2_au");
        assert!((a / num(row, "A_partial_s-1") - 1.0).abs() < 1e-6);
        assert!((num(row, "branching") - 1.0).abs() < 1e-12);
    }

    let (a1, a2) = (num(&to_a, "A_partial_s-1"), num(&to_0u, "A_partial_s-1"));
    let loss = 0.25;
    let report = &json(&out.join("conversion.json"))["report"];
    let eta_x = report["eta_x"].as_f64().unwrap();
    let eta_a = report["eta_a"].as_f64().unwrap();
    assert!((eta_x - (1.0 - loss) * a2 / (a1 + a2)).abs() < 1e-9);
    assert!((eta_a - (1.0 - loss) * a1 / (a1 + a2)).abs() < 1e-9);
    assert!((report["eta_loss"].as_f64().unwrap() - loss).abs() < 1e-12);
}

#[test]
fn maximal_loss_is_accounted_and_larger_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_with(dir.path(), "loss", "0.8");
    let out = dir.path().join("out");
    ok(&["convert"], &cfg, &out);
    let r = &json(&out.join("conversion.json"))["report"];
    let (x, a, l) = (
        r["eta_x"].as_f64().unwrap(),
        r["eta_a"].as_f64().unwrap(),
        r["eta_loss"].as_f64().unwrap(),
    );
    assert!((l - 0.8).abs() < 1e-12);
    assert!((x + a + l - 1.0).abs() < 1e-12);

    let cfg = toy_with(dir.path(), "loss", "0.85");
    let o = run(&["convert"], &cfg, &out);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn zero_dipole_gives_zero_rates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("toy.toml");
    let text = fs::read_to_string(fixture("toy.toml")).unwrap();
    fs::write(&cfg, text.replace("constant = 2.0", "constant = 0.0")).unwrap();
    let out = dir.path().join("out");
    ok(&["rates", "--from", "P", "--to", "a"], &cfg, &out);
    for row in csv(&out.join("rates_P_to_a.csv")) {
        assert_eq!(num(&row, "A_partial_s-1"), 0.0);
    }
    let total = fs::read_to_string(out.join("sticks/P_to_a_A_total.dat")).unwrap();
    let value: f64 = total
        .lines()
        .find(|l| !l.starts_with('#'))
        .and_then(|l| l.split_whitespace().nth(1))
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(value, 0.0);
}

#[test]
fn pumping_accumulates_ground_population() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one");
    let two = dir.path().join("two");
    ok(&["pump"], &toy_with(dir.path(), "n_cycles", "1"), &one);
    ok(&["pump"], &toy_with(dir.path(), "n_cycles", "2"), &two);
    let (s1, s2) = (
        csv(&one.join("pump_summary.csv")),
        csv(&two.join("pump_summary.csv")),
    );
    assert_eq!((s1.len(), s2.len()), (2, 3));
    assert_eq!(s1[1], s2[1]);
    for w in s2.windows(2) {
        assert!(num(&w[1], "ground_total") >= num(&w[0], "ground_total"));
    }
    for row in &s2 {
        assert!((num(row, "total") - 1.0).abs() < 1e-12);
    }
}

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("toy.toml");
    let trees: Vec<_> = ["first", "second"]
        .iter()
        .map(|name| {
            let out = dir.path().join(name);
            ok(&["levels"], &cfg, &out);
            ok(&["rates", "--from", "P", "--to", "0u"], &cfg, &out);
            ok(&["convert"], &cfg, &out);
            ok(&["pump"], &cfg, &out);
            tree(&out)
        })
        .collect();
    assert!(trees[0].len() > 5);
    assert_eq!(trees[0], trees[1]);
}

#[test]
fn surrogate_levels_and_strongest_excitation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(&["levels"], &surrogate(), out);
    for m in ["X", "a", "Pi", "0u"] {
        assert!(out.join(format!("levels_{m}.csv")).exists(), "{m}");
    }
    let manifest = json(&out.join("manifest.json"));
    assert!(manifest.to_string().contains("sha256"));
    let x = csv(&out.join("levels_X.csv"));
    assert!(num(&x[1], "energy_cm-1") > num(&x[0], "energy_cm-1"));

    ok(&["rates", "--from", "a", "--to", "Pi"], &surrogate(), out);
    ok(&["convert"], &surrogate(), out);
    let from_17: Vec<_> = csv(&out.join("rates_a_to_Pi.csv"))
        .into_iter()
        .filter(|r| r["v_i"] == "17")
        .collect();
    let best = from_17
        .iter()
        .max_by(|a, b| num(a, "mu2_au").total_cmp(&num(b, "mu2_au")))
        .unwrap();
    let excited = &json(&out.join("conversion.json"))["report"]["excited"];
    assert_eq!(best["v_j"], excited["v"].to_string());
}
