use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use rsor::crypto::CryptoSuite;
use rsor::games::adversaries::{lookup, registry, Expectation, Registered};
use rsor::games::correctness::game_correctness;
use rsor::games::{play_many, GameKind, WinRate};
use rsor::kem::game::{kem_game_run, GuessingKemAdversary, KemAdversary, KemGameConfig, WhiteBoxKemAdversary};
use rsor::packet::FormatParams;
use rsor::sim::attacks::{scenario_nymserver_attack, scenario_tagging_linkage, scenario_zero_padding_leak, NymChoice};
use rsor::sim::usage::check_usage_conditions;
use rsor::sim::{parse_config, run_scenario, scenarios};
use rsor::Result;

#[derive(Parser)]
#[command(name = "rsor-sim", about = "Repliable onion routing simulator, attacks and games")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a named scenario or a config file and write its trace.
    Run {
        #[arg(long)]
        scenario: Option<String>,
        /// Defaults to the config file's seed, then 0.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        legacy_zero_padding: bool,
        #[arg(long)]
        legacy_nymserver: bool,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Trace destination; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat an attack scenario over consecutive seeds.
    Attack {
        kind: AttackKind,
        #[arg(long, default_value_t = 100)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Play a game against one registered adversary, or all of them.
    Game {
        kind: GameArg,
        #[arg(long)]
        adversary: Option<String>,
        #[arg(long, default_value_t = 1000)]
        games: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write the crypto and packet test vectors.
    Vectors {
        #[arg(long)]
        out: PathBuf,
    },
    /// List scenarios and adversaries.
    List,
}

#[derive(Clone, Copy, ValueEnum)]
enum AttackKind {
    Tagging,
    Nymserver,
    Padding,
}

#[derive(Clone, Copy, ValueEnum)]
enum GameArg {
    Correctness,
    Tlu,
    Slu,
    Sti,
    Kem,
}

struct Row {
    metric: String,
    value: String,
    expect: String,
    ok: bool,
}

fn print_rows(rows: &[Row]) -> bool {
    println!("{:<40} {:>12}  {:<28} result", "metric", "value", "expectation");
    for r in rows {
        println!("{:<40} {:>12}  {:<28} {}", r.metric, r.value, r.expect, if r.ok { "PASS" } else { "FAIL" });
    }
    rows.iter().all(|r| r.ok)
}

fn rate_row(metric: &str, hits: u64, n: u64, expect: &str, ok: impl Fn(f64) -> bool) -> Row {
    let rate = hits as f64 / n.max(1) as f64;
    Row { metric: metric.into(), value: format!("{rate:.3}"), expect: expect.into(), ok: ok(rate) }
}

fn chance_row(metric: &str, w: WinRate) -> Row {
    Row { metric: metric.into(), value: format!("{:.3}", w.rate()), expect: "0.5 in 99% CI".into(), ok: w.consistent_with(0.5, 0.99) }
}

fn attack(kind: AttackKind, trials: u64, seed: u64) -> Result<bool> {
    let seeds = seed..seed + trials;
    let mut rows = vec![];
    match kind {
        AttackKind::Tagging => {
            let (mut linked, mut delivered, mut base) = (0, 0, 0);
            for s in seeds {
                let t = scenario_tagging_linkage(s, true)?;
                linked += (t.linked && t.correct) as u64;
                delivered += t.tagged_message_delivered as u64;
                base += scenario_tagging_linkage(s, false)?.correct as u64;
            }
            rows.push(rate_row("tagged: sender-exit linked", linked, trials, "1.0", |r| r == 1.0));
            rows.push(rate_row("tagged: message delivered", delivered, trials, "0.0", |r| r == 0.0));
            rows.push(rate_row("no tag: linkage guess correct", base, trials, "0.5 +- 0.1", |r| (r - 0.5).abs() <= 0.1));
        }
        AttackKind::Nymserver => {
            let (mut oracle, mut guess, mut adapted) = (0, 0, 0);
            for s in seeds {
                oracle += scenario_nymserver_attack(s, true, NymChoice::Oracle)?.attack_succeeds as u64;
                guess += scenario_nymserver_attack(s, true, NymChoice::Guess)?.attack_succeeds as u64;
                adapted += scenario_nymserver_attack(s, false, NymChoice::Oracle)?.attack_succeeds as u64;
            }
            rows.push(rate_row("legacy, adversary knows the onion", oracle, trials, "1.0", |r| r == 1.0));
            rows.push(chance_row("legacy, adversary guesses the onion", WinRate { wins: guess, games: trials }));
            rows.push(rate_row("nymserverless", adapted, trials, "0.0", |r| r == 0.0));
        }
        AttackKind::Padding => {
            let (mut legacy, mut fixed) = (0, 0);
            for s in seeds {
                legacy += scenario_zero_padding_leak(s, true)?.path_length_recovered as u64;
                fixed += scenario_zero_padding_leak(s, false)?.path_length_recovered as u64;
            }
            rows.push(rate_row("zero filler: length recovered", legacy, trials, "1.0", |r| r == 1.0));
            rows.push(rate_row("random filler: length recovered", fixed, trials, "0.5 +- 0.1", |r| (r - 0.5).abs() <= 0.1));
        }
    }
    Ok(print_rows(&rows))
}

fn game_row(reg: &Registered, games: u64, seed: u64) -> Result<Row> {
    let w = play_many(reg.kind, &|| (reg.make)(), &reg.params(), games, seed)?;
    let metric = format!("{} {}", reg.kind.as_str(), reg.name);
    Ok(match reg.expectation {
        Expectation::Chance => chance_row(&metric, w),
        Expectation::AtLeast(t) => rate_row(&metric, w.wins, w.games, &format!(">= {t}"), |r| r >= t),
    })
}

fn kem_row(name: &str, games: u64, seed: u64) -> Result<Option<Row>> {
    let white_box = match name {
        "guessing" => false,
        "white-box" => true,
        _ => return Ok(None),
    };
    let config = KemGameConfig { suite: CryptoSuite::default(), reveal_sender_secret: white_box };
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut wins = 0;
    for _ in 0..games {
        let mut adv: Box<dyn KemAdversary> = if white_box {
            Box::new(WhiteBoxKemAdversary { n: 4, j: 2 })
        } else {
            Box::new(GuessingKemAdversary { n: 4, j: 2 })
        };
        wins += kem_game_run(adv.as_mut(), &config, &mut rng)?.adversary_won as u64;
    }
    let metric = format!("kem {name}");
    Ok(Some(if white_box {
        rate_row(&metric, wins, games, "1.0", |r| r == 1.0)
    } else {
        rate_row(&metric, wins, games, "0.5 +- 0.05", |r| (r - 0.5).abs() <= 0.05)
    }))
}

fn game(kind: GameArg, adversary: Option<&str>, games: u64, seed: u64) -> Result<Option<bool>> {
    let kind = match kind {
        GameArg::Correctness => {
            let r = game_correctness(&FormatParams::default(), games as usize, seed)?;
            for (n, k, c) in &r.failures {
                println!("n={n} n_reply={k}: {c:?}");
            }
            let row = Row {
                metric: "correctness, all four clauses".into(),
                value: format!("{}/{}", r.specs - r.failures.len(), r.specs),
                expect: "all specs".into(),
                ok: r.passed(),
            };
            return Ok(Some(print_rows(&[row])));
        }
        GameArg::Kem => {
            let mut rows = vec![];
            for name in adversary.map_or(vec!["guessing", "white-box"], |a| vec![a]) {
                match kem_row(name, games, seed)? {
                    Some(r) => rows.push(r),
                    None => return Ok(None),
                }
            }
            return Ok(Some(print_rows(&rows)));
        }
        GameArg::Tlu => GameKind::Tlu,
        GameArg::Slu => GameKind::Slu,
        GameArg::Sti => GameKind::Sti,
    };
    let regs: Vec<Registered> = match adversary {
        Some(a) => match lookup(kind, a) {
            Some(r) => vec![r],
            None => return Ok(None),
        },
        None => registry().into_iter().filter(|r| r.kind == kind).collect(),
    };
    let rows = regs.iter().map(|r| game_row(r, games, seed)).collect::<Result<Vec<_>>>()?;
    Ok(Some(print_rows(&rows)))
}

fn run(
    scenario: Option<String>,
    seed: Option<u64>,
    legacy_zero_padding: bool,
    legacy_nymserver: bool,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<bool> {
    let (mut sc, seed) = match (config, scenario) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(&path).map_err(|e| rsor::Error::Config(format!("{}: {e}", path.display())))?;
            let c = parse_config(&text)?;
            (c.scenario, seed.or(c.seed).unwrap_or(0))
        }
        (None, Some(name)) => (scenarios::named(&name, seed.unwrap_or(0))?, seed.unwrap_or(0)),
        (None, None) => return Err(rsor::Error::Config("need --scenario or --config".into())),
    };
    sc.flags.legacy_zero_padding |= legacy_zero_padding;
    sc.flags.legacy_nymserver |= legacy_nymserver;
    let result = run_scenario(&sc, seed)?;
    let trace = result.to_jsonl();
    match out {
        Some(p) => std::fs::write(&p, trace).map_err(|e| rsor::Error::Config(format!("{}: {e}", p.display())))?,
        None => print!("{trace}"),
    }
    let mut failures = result.check(&sc);
    failures.extend(check_usage_conditions(&sc).iter().map(|v| format!("usage condition violated: {}", serde_json::to_string(v).unwrap())));
    for f in &failures {
        eprintln!("FAIL {f}");
    }
    eprintln!("{}: seed {seed}, {} records, {} rounds, {}", sc.name, result.records.len(), result.rounds, if failures.is_empty() { "assertions hold" } else { "assertions failed" });
    Ok(failures.is_empty())
}

fn vectors(out: PathBuf) -> Result<bool> {
    let io = |e: std::io::Error| rsor::Error::Config(e.to_string());
    std::fs::create_dir_all(&out).map_err(io)?;
    let mut rng = ChaCha20Rng::seed_from_u64(0x7665_6374);
    let crypto = rsor::crypto::vectors::generate(&CryptoSuite::default(), &mut rng, 4)?;
    let packet = rsor::packet::vectors::generate(&FormatParams::default(), &[1, 2])?;
    std::fs::write(out.join("crypto_vectors.txt"), rsor::crypto::vectors::render_file(&crypto)).map_err(io)?;
    std::fs::write(out.join("packet_vectors.txt"), rsor::crypto::vectors::render_file(&packet)).map_err(io)?;
    println!("wrote {} crypto and {} packet vectors to {}", crypto.len(), packet.len(), out.display());
    Ok(true)
}

fn list() -> bool {
    println!("scenarios: {}", scenarios::NAMES.join(", "));
    for r in registry() {
        println!("game {} adversary {}", r.kind.as_str(), r.name);
    }
    println!("game kem adversary guessing, white-box");
    true
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Cmd::Run { scenario, seed, legacy_zero_padding, legacy_nymserver, config, out } => {
            run(scenario, seed, legacy_zero_padding, legacy_nymserver, config, out)
        }
        Cmd::Attack { kind, trials, seed } => attack(kind, trials, seed),
        Cmd::Game { kind, adversary, games, seed } => match game(kind, adversary.as_deref(), games, seed) {
            Ok(None) => {
                eprintln!("unknown adversary; see `rsor-sim list`");
                return ExitCode::from(2);
            }
            Ok(Some(ok)) => Ok(ok),
            Err(e) => Err(e),
        },
        Cmd::Vectors { out } => vectors(out),
        Cmd::List => Ok(list()),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
