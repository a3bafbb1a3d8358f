use std::path::Path;

use econ_arena::config::{parse_config, SessionConfig, SessionPlan};
use econ_arena::host::{Host, Memory, RunIds, RunOptions};
use econ_arena::log::RunRecord;
use econ_arena::roster::Environment;
use econ_arena_core::agents::{AgentDescriptor, ProviderConfig, ResponseViolation, Strategy};
use econ_arena_core::game::{ActionProfile, ActionViolation, AuctionParams, BeautyContestParams, GameSpec};
use econ_arena_core::metrics::{asset_and_payoff_fractions, FaultClass};
use econ_arena_core::prompts::{HistoryLevel, HistoryView, TemplatePack};
use proptest::prelude::*;

fn opts(env: Environment) -> RunOptions {
    RunOptions {
        environment: env,
        cot: false,
        budget: std::time::Duration::from_secs(5),
        truncate_responses: false,
        timestamps: false,
        record_prompts: true,
    }
}

fn ids(run_index: usize) -> RunIds {
    RunIds { session_id: 0, run_index, session_seed: 11, group: None, config_digest: "test".into() }
}

fn bc_spec(upper: f64) -> GameSpec {
    GameSpec::beauty_contest(5, BeautyContestParams::standard(upper).unwrap()).unwrap()
}

async fn run(spec: &GameSpec, roster: &[AgentDescriptor], env: Environment) -> RunRecord {
    let history = HistoryView::new(HistoryLevel::None, 3);
    let memory = vec![Memory::default(); roster.len()];
    Host::new(TemplatePack::english()).run_once(spec, roster, &history, &memory, &opts(env), &ids(1)).await.unwrap()
}

fn rationals(n: usize) -> Vec<AgentDescriptor> {
    vec![AgentDescriptor::rational(); n]
}

#[tokio::test]
async fn all_rational_beauty_contest() {
    let r = run(&bc_spec(100.0), &rationals(5), Environment::Melee).await;
    assert!(r.seats.iter().all(|s| s.action == Some(0.0) && s.violation.is_none()));
    assert_eq!(r.result.winners, vec![0, 1, 2, 3, 4]);
    assert!(r.result.payoffs.iter().all(|&u| u == Some(0.2)));
    assert!(r.result.deviations.iter().all(|&d| d == Some(0.0)));
    assert!(r.result.valid);
}

#[tokio::test]
async fn constant_fifty_against_rationals() {
    let mut roster = vec![AgentDescriptor::new("c50", Strategy::Constant { value: 50.0 })];
    roster.extend(rationals(4));
    let r = run(&bc_spec(100.0), &roster, Environment::Rational).await;
    // By hand: mean 10, target 20/3; every 0 is 20/3 away, 50 is 130/3 away.
    let target = 2.0 / 3.0 * (50.0 / 5.0);
    assert!((r.result.target.unwrap() - target).abs() < 1e-12);
    assert_eq!(r.result.winners, vec![1, 2, 3, 4]);
    assert_eq!(r.result.payoffs[0], Some(0.0));
    assert!(r.result.payoffs[1..].iter().all(|&u| u == Some(0.25)));
    assert!(r.seats[0].prompt.as_ref().unwrap().user.contains("all perfectly rational players"));
}

fn auction_spec(fee: f64) -> GameSpec {
    GameSpec::auction(AuctionParams::new(vec![100.0; 5], vec![60.0, 50.0, 40.0, 30.0, 20.0], fee).unwrap())
}

#[tokio::test]
async fn violator_is_excluded_from_auction() {
    let mut roster = vec![AgentDescriptor::new("bad", Strategy::AlwaysViolate)];
    roster.extend(rationals(4));
    let r = run(&auction_spec(3.0), &roster, Environment::Rational).await;
    let bad = &r.seats[0];
    assert_eq!(bad.parsed_action, Some(200.0));
    assert_eq!(bad.action, None);
    assert_eq!(
        bad.violation,
        Some(ResponseViolation::RuleViolation { detail: ActionViolation::OverAssets { assets: 100.0 } })
    );
    assert_eq!(bad.fault(), Some(FaultClass::RuleBreak));
    assert_eq!(r.result.winners, vec![1]);
    assert_eq!(r.result.price_paid, Some(40.0));
    assert_eq!(r.result.payoffs[0], Some(97.0));
    assert_eq!(r.result.payoffs[1], Some(110.0));
    assert!(r.result.valid);
}

#[tokio::test]
async fn unreachable_provider_is_a_fault_not_a_rule_break() {
    let llm = AgentDescriptor::new(
        "offline",
        Strategy::Llm(ProviderConfig {
            endpoint_url: "http://127.0.0.1:9/v1/chat/completions".into(),
            model_id: "m".into(),
            api_key_env: None,
            temperature: 0.0,
            timeout: std::time::Duration::from_millis(300),
            max_transport_retries: 1,
            initial_backoff_ms: 1,
        }),
    );
    let mut roster = vec![llm];
    roster.extend(rationals(4));
    let r = run(&bc_spec(100.0), &roster, Environment::Melee).await;
    assert_eq!(r.seats[0].fault(), Some(FaultClass::Provider));
    assert_eq!(r.seats[0].violation, None);
    assert_eq!(r.seats[0].raw_response, None);
    assert_eq!(r.result.winners, vec![1, 2, 3, 4]);
}

#[tokio::test]
async fn mock_agent_replies_go_through_the_parser() {
    let mock = AgentDescriptor::new(
        "mock",
        Strategy::Mock {
            responses: vec![
                "Sure!\n```json\n{\"understanding\":\"u\",\"popular answer\":30,\"answer\":20,\"reason\":\"r\"}\n```".into(),
            ],
        },
    );
    let mut roster = vec![mock];
    roster.extend(rationals(4));
    let r = run(&bc_spec(100.0), &roster, Environment::Melee).await;
    assert_eq!(r.seats[0].action, Some(20.0));
    assert!(r.seats[0].raw_response.as_ref().unwrap().starts_with("Sure!"));
}

fn config(text: &str) -> SessionConfig {
    parse_config(text).unwrap()
}

const HISTORY_SESSION: &str = r#"
[session]
environment = "self_compete"
seed = 99
runs_per_session = 6
timestamps = false

[game.auction]
bidders = 4
assets = 100
private_values = [60, 50, 40, 30]

[history]
level = "full"
max_runs = 3

[[agents]]
name = "lk"
kind = "random"
"#;

#[tokio::test]
async fn history_window_follows_runs() {
    let cfg = config(HISTORY_SESSION);
    let host = Host::new(TemplatePack::english());
    let log = host.run_session(&cfg, SessionPlan { index: 0, group: None }, "d", None).await.unwrap();
    assert_eq!(log.runs.len(), 6);
    for r in &log.runs {
        let user = &r.seats[0].prompt.as_ref().unwrap().user;
        let t = r.run_index;
        for k in 1..=6 {
            let shown = user.contains(&format!("{{\"run\":{k},"));
            let expected = k < t && k + 3 >= t;
            assert_eq!(shown, expected, "run {t} prompt, history run {k}");
        }
        if t > 1 {
            assert!(user.contains(&format!("has been hold for {} run(s)", t - 1)));
        }
    }
}

#[tokio::test]
async fn self_compete_rational_auction_is_stationary() {
    let text = HISTORY_SESSION.replace("kind = \"random\"", "kind = \"rational\"");
    let cfg = config(&text);
    let log = Host::new(TemplatePack::english())
        .run_session(&cfg, SessionPlan { index: 0, group: None }, "d", None)
        .await
        .unwrap();
    let first = &log.runs[0].result;
    assert!(log.runs.iter().all(|r| &r.result == first));
    for seat in 0..4 {
        let final_asset = first.payoffs[seat].unwrap();
        let (_, payoff_fraction) = asset_and_payoff_fractions(100.0, final_asset, first.ne_payoffs[seat]).unwrap();
        assert_eq!(payoff_fraction, 1.0);
    }
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[tokio::test]
async fn experiments_are_byte_reproducible() {
    let text = HISTORY_SESSION.replace("seed = 99", "seed = 99\nsessions = 3\nworkers = 3");
    let cfg = config(&text);
    let host = Host::new(TemplatePack::english());
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    host.run_experiment(&cfg, a.path(), 3).await.unwrap();
    host.run_experiment(&cfg, b.path(), 1).await.unwrap();
    let (fa, fb) = (dir_bytes(a.path()), dir_bytes(b.path()));
    assert_eq!(fa.len(), 1 + 3 * 2);
    assert_eq!(fa, fb);
}

#[tokio::test]
async fn dry_run_renders_without_dispatch() {
    let text = HISTORY_SESSION.replace("kind = \"random\"", "kind = \"llm\"\nendpoint_url = \"http://127.0.0.1:9/\"\nmodel_id = \"m\"");
    let cfg = config(&text);
    let out = tempfile::tempdir().unwrap();
    let n = Host::new(TemplatePack::english()).dry_run(&cfg, out.path()).unwrap();
    assert_eq!(n, 1);
    let doc = std::fs::read_to_string(out.path().join("dry-run/session-0000.prompts.json")).unwrap();
    assert!(doc.contains("your private value of the item is 60 units"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// A violating seat changes nothing for the others except dropping out of
    /// resolution.
    #[test]
    fn violation_isolation(
        values in prop::collection::vec(1u32..=100, 3..6),
        bids in prop::collection::vec(0u32..=100, 3..6),
        violator in any::<prop::sample::Index>(),
    ) {
        let n = values.len().min(bids.len());
        let values: Vec<f64> = values[..n].iter().map(|&v| f64::from(v)).collect();
        let bids: Vec<f64> = bids[..n].iter().map(|&b| f64::from(b)).collect();
        let spec = GameSpec::auction(AuctionParams::new(vec![100.0; n], values, 0.0).unwrap());
        let v = violator.index(n);
        let roster: Vec<AgentDescriptor> = (0..n)
            .map(|i| if i == v {
                AgentDescriptor::new("bad", Strategy::AlwaysViolate)
            } else {
                AgentDescriptor::new(format!("p{i}"), Strategy::Constant { value: bids[i] })
            })
            .collect();
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        let r = rt.block_on(run(&spec, &roster, Environment::Melee));
        let mut expected_profile: Vec<Option<f64>> = bids.iter().copied().map(Some).collect();
        expected_profile[v] = None;
        for i in (0..n).filter(|&i| i != v) {
            prop_assert_eq!(r.seats[i].action, Some(bids[i]));
        }
        let expected = spec.resolve(&ActionProfile::new(expected_profile)).unwrap();
        prop_assert_eq!(&r.result.winners, &expected.winners);
        prop_assert_eq!(r.result.price_paid, expected.price_paid);
        prop_assert_eq!(&r.result.payoffs, &expected.payoffs);
    }
}
