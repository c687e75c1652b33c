use ldgba_rl::cli::{run_cli, EXIT_FAILED, EXIT_OK, EXIT_USAGE};
use ldgba_rl::rollout::TRAJECTORY_CSV_HEADER;

fn run(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let code = run_cli(std::iter::once("ldgba-rl").chain(args.iter().copied()), &mut out);
    (code, String::from_utf8(out).unwrap())
}

#[test]
fn verify_fig1_passes() {
    let (code, out) = run(&["verify", "--random-instances", "20", "--seed", "4"]);
    assert_eq!(code, EXIT_OK, "{out}");
}

#[test]
fn usage_errors() {
    assert_eq!(run(&["verify", "--no-such-flag"]).0, EXIT_USAGE);
    assert_eq!(run(&["frobnicate"]).0, EXIT_USAGE);
    assert_eq!(run(&["train", "--scenario", "builtin:nope", "--episodes", "1"]).0, EXIT_USAGE);
    assert_eq!(run(&["--help"]).0, EXIT_OK);
}

#[test]
fn stats_reports_grid_sizes() {
    let (code, out) = run(&["stats", "--episodes", "0"]);
    assert_eq!(code, EXIT_OK, "{out}");
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "workspace,mdp_states,product_states,episodes_to_convergence");
    for (line, (m, p)) in lines[1..].iter().zip([(225, 450), (625, 1250), (1600, 3200)]) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!((f[1].parse::<usize>().unwrap(), f[2].parse::<usize>().unwrap()), (m, p), "{line}");
    }
}

#[test]
fn train_simulate_oracle_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let pol = dir.path().join("p.json");
    let curve = dir.path().join("c.csv");
    let traj = dir.path().join("t.csv");
    let (p, c, t) = (pol.to_str().unwrap(), curve.to_str().unwrap(), traj.to_str().unwrap());

    let (code, out) = run(&["train", "--scenario", "builtin:fig1", "--episodes", "200", "--tau", "30", "--out", p, "--curve", c]);
    assert_eq!(code, EXIT_OK, "{out}");
    assert!(std::fs::read_to_string(&curve).unwrap().starts_with("episode,"));

    let (code, out) = run(&["simulate", "--policy", p, "--steps", "25", "--csv", t]);
    assert_eq!(code, EXIT_OK, "{out}");
    let csv = std::fs::read_to_string(&traj).unwrap();
    assert_eq!(csv.lines().next(), Some(TRAJECTORY_CSV_HEADER));
    assert_eq!(csv.lines().count(), 27);

    let (code, out) = run(&["simulate", "--policy", p, "--steps", "3"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains(TRAJECTORY_CSV_HEADER));

    let (code, out) = run(&["oracle", "--scenario", "builtin:fig1", "--policy", p]);
    assert_eq!(code, EXIT_OK, "{out}");
    assert!(out.contains("relative gap"), "{out}");
}

#[test]
fn simulate_rejects_corrupt_policy() {
    let dir = tempfile::tempdir().unwrap();
    let pol = dir.path().join("p.json");
    std::fs::write(&pol, "{\"version\": 1}").unwrap();
    let (code, _) = run(&["simulate", "--policy", pol.to_str().unwrap()]);
    assert_ne!(code, EXIT_OK);
    assert_ne!(code, EXIT_FAILED);
}
