use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn asset(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/assets").join(name).display().to_string()
}

fn crowdforge(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crowdforge")).current_dir(dir).env_remove("CROWDFORGE_SEED").args(args).output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "status {:?}\nstdout {}\nstderr {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Generates city, population and agendas into `dir`.
fn stages(dir: &Path, seed: &str) -> PathBuf {
    ok(&crowdforge(
        dir,
        &["city", "--layout", &asset("structured.toml"), "--rules", &asset("structured.cga"), "--seed", seed, "-o", "city.json"],
    ));
    ok(&crowdforge(
        dir,
        &[
            "population",
            "--city",
            "city.json",
            "--patterns",
            &asset("patterns.csv"),
            "--households",
            "12",
            "--seed",
            seed,
            "-o",
            "population.json",
        ],
    ));
    ok(&crowdforge(
        dir,
        &[
            "agendas",
            "--city",
            "city.json",
            "--population",
            "population.json",
            "--rules",
            &asset("weekday.pcg"),
            "--seed",
            seed,
            "-o",
            "agendas.json",
        ],
    ));
    dir.join("agendas.json")
}

#[test]
fn check_reports_rules_and_fails_on_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&crowdforge(dir.path(), &["check", &asset("shop_park.cga"), &asset("weekday.pcg")]));
    assert!(out.contains("shop_park.cga: ok, 8 rules"));
    assert!(out.contains("calls undefined rule Wall"));
    assert!(out.contains("start rule Household"));

    std::fs::write(dir.path().join("bad.pcg"), "@StartRule\nA --> goToBuilding(1,\n").unwrap();
    let out = crowdforge(dir.path(), &["check", "bad.pcg"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("bad.pcg: error"));
}

#[test]
fn stages_chain_and_simulate_exports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&crowdforge(
        d,
        &[
            "city",
            "--layout",
            &asset("structured.toml"),
            "--rules",
            &asset("structured.cga"),
            "--seed",
            "2",
            "-o",
            "city.json",
            "--emit-navgraph",
            "nav.json",
            "--obj",
            "city.obj",
        ],
    ));
    assert!(std::fs::read_to_string(d.join("city.obj")).unwrap().starts_with("# generated city"));
    let nav: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("nav.json")).unwrap()).unwrap();
    assert!(!nav["data"]["nodes"].as_array().unwrap().is_empty());

    stages(d, "2");
    let out = ok(&crowdforge(
        d,
        &[
            "simulate",
            "--city",
            "city.json",
            "--population",
            "population.json",
            "--agendas",
            "agendas.json",
            "--rules",
            &asset("weekday.pcg"),
            "--seed",
            "2",
            "--to",
            "12h",
            "--heatmap",
            "heat.pgm",
            "--heatmap-csv",
            "heat.csv",
            "--trajectories",
            "traj.jsonl",
        ],
    ));
    assert!(out.contains("0 incidents"));
    let pgm = std::fs::read(d.join("heat.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n# seed=2 "));
    let traj = std::fs::read_to_string(d.join("traj.jsonl")).unwrap();
    assert!(traj.lines().next().unwrap().contains("\"seed\":2"));
    let samples = traj.lines().count() - 1;
    let csv = std::fs::read_to_string(d.join("heat.csv")).unwrap();
    let total: usize =
        csv.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(total, samples);

    let report = ok(&crowdforge(
        d,
        &["inspect", "--city", "city.json", "--population", "population.json", "--agendas", "agendas.json", "--person", "0"],
    ));
    assert!(report.starts_with("person 0\n"));
    assert!(report.contains("agenda\n") && report.contains("floating pool\n"));
    let again = ok(&crowdforge(
        d,
        &["inspect", "--city", "city.json", "--population", "population.json", "--agendas", "agendas.json", "--person", "0"],
    ));
    assert_eq!(report, again);
    let missing = crowdforge(
        d,
        &["inspect", "--city", "city.json", "--population", "population.json", "--agendas", "agendas.json", "--person", "9999"],
    );
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn seed_falls_back_to_the_environment() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["city", "--layout", &asset("structured.toml"), "--rules", &asset("structured.cga"), "-o", "city.json"];
    let mut with_flag = args.to_vec();
    with_flag.extend(["--seed", "7"]);
    ok(&crowdforge(a.path(), &with_flag));
    let status =
        Command::new(env!("CARGO_BIN_EXE_crowdforge")).current_dir(b.path()).env("CROWDFORGE_SEED", "7").args(args).status().unwrap();
    assert!(status.success());
    assert_eq!(std::fs::read(a.path().join("city.json")).unwrap(), std::fs::read(b.path().join("city.json")).unwrap());
}

#[test]
fn missing_input_exits_with_one_and_names_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let out = crowdforge(
        dir.path(),
        &["population", "--city", "nope.json", "--patterns", &asset("patterns.csv"), "--households", "3", "-o", "p.json"],
    );
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("city: cannot read nope.json"), "{err}");
}

#[test]
fn incidents_over_the_threshold_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    stages(d, "3");
    // every elder looks for a zone that does not exist
    let rules = std::fs::read_to_string(asset("weekday.pcg")).unwrap().replace("goToZone(\"park\")", "goToZone(\"beach\")");
    std::fs::write(d.join("beach.pcg"), rules).unwrap();
    ok(&crowdforge(
        d,
        &["agendas", "--city", "city.json", "--population", "population.json", "--rules", "beach.pcg", "--seed", "3", "-o", "beach.json"],
    ));
    let args = [
        "simulate",
        "--city",
        "city.json",
        "--population",
        "population.json",
        "--agendas",
        "beach.json",
        "--rules",
        "beach.pcg",
        "--seed",
        "3",
        "--to",
        "13h",
        "--incidents",
        "incidents.txt",
    ];
    let out = crowdforge(d, &args);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let incidents = std::fs::read_to_string(d.join("incidents.txt")).unwrap();
    let n = incidents.lines().count();
    assert!(n > 0 && incidents.contains("beach"));
    let mut relaxed = args.to_vec();
    let limit = n.to_string();
    relaxed.extend(["--max-incidents", &limit]);
    ok(&crowdforge(d, &relaxed));
}

#[test]
fn run_config_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!(
        "seed = 5\nout_dir = \"out\"\ncity_rules = \"{}\"\nlayout = \"{}\"\npatterns = \"{}\"\nhouseholds = 8\nagenda_rules = \"{}\"\nto = \"10h\"\n\n[sim]\ndt = 0.5\n",
        asset("structured.cga"),
        asset("structured.toml"),
        asset("patterns.csv"),
        asset("weekday.pcg")
    );
    std::fs::write(dir.path().join("run.toml"), config).unwrap();
    let out = ok(&crowdforge(dir.path(), &["run", "--config", "run.toml"]));
    for f in ["city.json", "population.json", "agendas.json", "trajectories.jsonl", "heatmap.pgm", "heatmap.csv", "incidents.txt"] {
        assert!(dir.path().join("out").join(f).exists(), "{f} missing");
        assert!(out.contains(f));
    }
    std::fs::write(dir.path().join("bad.toml"), "seed = 1\nunknown = 2\n").unwrap();
    assert_eq!(crowdforge(dir.path(), &["run", "--config", "bad.toml"]).status.code(), Some(1));
}
