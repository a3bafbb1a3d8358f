//! Session driver: renders prompts, dispatches seats, validates replies,
//! resolves runs and threads history between them.

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use econ_arena_core::agents::{parse_response, scripted_reply, AgentDescriptor, Strategy, TurnContext};
use econ_arena_core::game::{validate_action, ActionProfile, GameSpec};
use econ_arena_core::metrics::{evaluate_run, summarize, MetricsSummary};
use econ_arena_core::prompts::{render_prompt, HistoryView, PromptBundle, PromptError, RenderOptions, TemplatePack};
use futures::future::join_all;
use futures::stream::{self, StreamExt, TryStreamExt};
use serde::Serialize;
use tokio::time::Instant;

use crate::config::{ConfigError, SessionConfig, SessionPlan};
use crate::log::{
    truncate_response, write_session_summary, LogError, LogWriter, PromptRecord, ProviderFault, RunRecord, SeatRecord,
    SessionLog,
};
use crate::provider::{ChatClient, ChatMessage};
use crate::roster::Environment;
use crate::sampling::{sample_group_spec, seat_rng, session_seed, spec_rng, Group};

#[derive(Debug, thiserror::Error)]
pub enum HostError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("prompt rendering failed: {0}")]
    Prompt(#[from] PromptError),
    #[error("game setup failed: {0}")]
    Game(#[from] econ_arena_core::game::GameError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("session task failed: {0}")]
    Join(String),
}

/// Settings that apply to every run of a session.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub environment: Environment,
    pub cot: bool,
    pub budget: Duration,
    pub truncate_responses: bool,
    pub timestamps: bool,
    pub record_prompts: bool,
}

impl RunOptions {
    pub fn from_config(cfg: &SessionConfig) -> Self {
        RunOptions {
            environment: cfg.environment,
            cot: cfg.cot,
            budget: cfg.run_budget(),
            truncate_responses: cfg.truncate_responses,
            timestamps: cfg.timestamps,
            record_prompts: cfg.record_prompts,
        }
    }
}

/// Identity of a run within an experiment.
#[derive(Debug, Clone)]
pub struct RunIds {
    pub session_id: usize,
    pub run_index: usize,
    pub session_seed: u64,
    pub group: Option<Group>,
    pub config_digest: String,
}

/// What a seat remembers from its previous run.
#[derive(Debug, Clone, Copy, Default)]
pub struct Memory {
    pub action: Option<f64>,
    pub payoff: Option<f64>,
}

enum Reply {
    Text { text: String, attempts: Option<u32> },
    Fault(ProviderFault),
}

fn now(enabled: bool) -> Option<String> {
    enabled.then(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true))
}

#[derive(Clone)]
pub struct Host {
    client: ChatClient,
    pack: Arc<TemplatePack>,
}

impl Host {
    pub fn new(pack: TemplatePack) -> Self {
        Host { client: ChatClient::new(), pack: Arc::new(pack) }
    }

    pub fn render(
        &self,
        spec: &GameSpec,
        seat: usize,
        history: &HistoryView,
        opts: &RunOptions,
        run_index: usize,
    ) -> Result<PromptBundle, PromptError> {
        let render = RenderOptions { cot: opts.cot, history: Some(history), run_index };
        render_prompt(&self.pack, spec, seat, opts.environment.prompt_env(), &render)
    }

    async fn act(
        &self,
        agent: &AgentDescriptor,
        bundle: &PromptBundle,
        ctx: TurnContext<'_>,
        ids: &RunIds,
        deadline: Instant,
    ) -> Reply {
        match &agent.strategy {
            Strategy::Llm(provider) => {
                let messages = [ChatMessage::system(&bundle.system), ChatMessage::user(&bundle.user)];
                match tokio::time::timeout_at(deadline, self.client.complete(provider, &messages)).await {
                    Ok(Ok(c)) => Reply::Text { text: c.text, attempts: Some(c.attempts) },
                    Ok(Err(e)) => Reply::Fault(ProviderFault { class: e.class().into(), message: e.to_string() }),
                    Err(_) => Reply::Fault(ProviderFault {
                        class: "timeout".into(),
                        message: "run budget exhausted before a reply arrived".into(),
                    }),
                }
            }
            _ => {
                let mut rng = seat_rng(ids.session_seed, ids.run_index, ctx.seat);
                match scripted_reply(agent, &ctx, &bundle.schema, &mut rng) {
                    Ok(text) => Reply::Text { text, attempts: None },
                    Err(e) => Reply::Fault(ProviderFault { class: "agent".into(), message: e.to_string() }),
                }
            }
        }
    }

    /// Plays one run: every seat answers, replies are parsed and checked
    /// against the rules, and the present actions are resolved.
    pub async fn run_once(
        &self,
        spec: &GameSpec,
        roster: &[AgentDescriptor],
        history: &HistoryView,
        memory: &[Memory],
        opts: &RunOptions,
        ids: &RunIds,
    ) -> Result<RunRecord, HostError> {
        let started_at = now(opts.timestamps);
        let bundles = (0..roster.len())
            .map(|seat| self.render(spec, seat, history, opts, ids.run_index))
            .collect::<Result<Vec<_>, _>>()?;
        let deadline = Instant::now() + opts.budget;

        let replies = join_all(roster.iter().zip(&bundles).enumerate().map(|(seat, (agent, bundle))| {
            let ctx = TurnContext {
                spec,
                seat,
                run_index: ids.run_index,
                previous_action: memory.get(seat).and_then(|m| m.action),
                previous_payoff: memory.get(seat).and_then(|m| m.payoff),
            };
            self.act(agent, bundle, ctx, ids, deadline)
        }))
        .await;

        let mut seats = Vec::with_capacity(roster.len());
        for (seat, ((agent, bundle), reply)) in roster.iter().zip(bundles).zip(replies).enumerate() {
            let provider = match &agent.strategy {
                Strategy::Llm(p) => Some(p),
                _ => None,
            };
            let mut record = SeatRecord {
                seat,
                agent_name: agent.name.clone(),
                kind: agent.strategy.kind_name().into(),
                model_id: provider.map(|p| p.model_id.clone()),
                temperature: provider.map(|p| p.temperature),
                prompt: opts.record_prompts.then(|| PromptRecord {
                    variant: bundle.variant,
                    system: bundle.system.clone(),
                    user: bundle.user.clone(),
                }),
                raw_response: None,
                response_truncated: false,
                parsed_action: None,
                action: None,
                violation: None,
                provider_fault: None,
                attempts: None,
            };
            match reply {
                Reply::Fault(fault) => {
                    tracing::warn!(session = ids.session_id, run = ids.run_index, seat, agent = %agent.name, class = %fault.class, "{}", fault.message);
                    record.provider_fault = Some(fault);
                }
                Reply::Text { text, attempts } => {
                    let mut parsed = parse_response(&text, &bundle.schema);
                    if let Some(a) = parsed.action {
                        if let Err(v) = validate_action(spec, seat, a) {
                            parsed = parsed.reject(v);
                        }
                    }
                    record.parsed_action = parsed.extracted_action(&bundle.schema.action_key);
                    record.action = parsed.action;
                    record.violation = parsed.violation;
                    record.attempts = attempts;
                    let (raw, truncated) = truncate_response(text, opts.truncate_responses);
                    record.raw_response = Some(raw);
                    record.response_truncated = truncated;
                }
            }
            seats.push(record);
        }

        let profile = ActionProfile::new(seats.iter().map(|s| s.action).collect());
        let result = evaluate_run(spec, &profile);
        Ok(RunRecord {
            session_id: ids.session_id,
            run_index: ids.run_index,
            config_digest: ids.config_digest.clone(),
            environment: opts.environment,
            group: ids.group,
            spec: spec.clone(),
            seats,
            result,
            started_at,
            finished_at: now(opts.timestamps),
        })
    }

    /// Runs every run of one session, appending each record to `sink` as
    /// soon as it is resolved.
    pub async fn run_session(
        &self,
        cfg: &SessionConfig,
        plan: SessionPlan,
        digest: &str,
        mut sink: Option<&mut LogWriter>,
    ) -> Result<SessionLog, HostError> {
        let seed = session_seed(cfg.seed, plan.index);
        let spec = sample_group_spec(&cfg.game, plan.group, &mut spec_rng(seed))?;
        let opts = RunOptions::from_config(cfg);
        let mut history = HistoryView::new(cfg.history.level, cfg.history.max_runs);
        let mut memory = vec![Memory::default(); cfg.roster.len()];
        let mut runs = Vec::with_capacity(cfg.runs_per_session);

        for run_index in 1..=cfg.runs_per_session {
            let ids = RunIds {
                session_id: plan.index,
                run_index,
                session_seed: seed,
                group: plan.group,
                config_digest: digest.to_string(),
            };
            let record = self.run_once(&spec, &cfg.roster, &history, &memory, &opts, &ids).await?;
            if let Some(w) = sink.as_deref_mut() {
                w.append(&record)?;
            }
            history.push(record.history_entry());
            for (seat, m) in memory.iter_mut().enumerate() {
                *m = Memory { action: record.seats[seat].action, payoff: record.result.payoffs[seat] };
            }
            runs.push(record);
        }

        Ok(SessionLog {
            config_digest: digest.to_string(),
            session_id: plan.index,
            group: plan.group,
            resolved_spec: spec,
            summaries: session_summaries(&runs),
            runs,
        })
    }

    /// Runs all planned sessions, at most `workers` at a time, writing logs
    /// into `out_dir`. Results come back in session order.
    pub async fn run_experiment(
        &self,
        cfg: &SessionConfig,
        out_dir: &Path,
        workers: usize,
    ) -> Result<Vec<SessionLog>, HostError> {
        std::fs::create_dir_all(out_dir)
            .map_err(|source| LogError::Io { path: out_dir.to_path_buf(), source })?;
        let digest = cfg.digest();
        write_resolved_config(out_dir, cfg, &digest)?;
        let cfg = Arc::new(cfg.clone());
        let mut logs: Vec<SessionLog> = stream::iter(cfg.plan())
            .map(|plan| {
                let host = self.clone();
                let cfg = cfg.clone();
                let digest = digest.clone();
                let dir = out_dir.to_path_buf();
                async move {
                    tokio::spawn(async move {
                        let mut writer = LogWriter::create(&dir, plan.index)?;
                        let log = host.run_session(&cfg, plan, &digest, Some(&mut writer)).await?;
                        write_session_summary(&dir, &log)?;
                        tracing::info!(session = plan.index, runs = log.runs.len(), "session finished");
                        Ok::<_, HostError>(log)
                    })
                    .await
                    .map_err(|e| HostError::Join(e.to_string()))?
                }
            })
            .buffer_unordered(workers.max(1))
            .try_collect()
            .await?;
        logs.sort_by_key(|l| l.session_id);
        Ok(logs)
    }

    /// Renders the first-run prompts of every planned session without
    /// contacting any agent.
    pub fn dry_run(&self, cfg: &SessionConfig, out_dir: &Path) -> Result<usize, HostError> {
        #[derive(Serialize)]
        struct SeatPrompt<'a> {
            seat: usize,
            agent_name: &'a str,
            prompt: PromptBundle,
        }
        #[derive(Serialize)]
        struct DryRun<'a> {
            session_id: usize,
            group: Option<Group>,
            spec: GameSpec,
            seats: Vec<SeatPrompt<'a>>,
        }
        let dir = out_dir.join("dry-run");
        std::fs::create_dir_all(&dir).map_err(|source| LogError::Io { path: dir.clone(), source })?;
        let opts = RunOptions::from_config(cfg);
        let history = HistoryView::new(cfg.history.level, cfg.history.max_runs);
        let plan = cfg.plan();
        for p in &plan {
            let seed = session_seed(cfg.seed, p.index);
            let spec = sample_group_spec(&cfg.game, p.group, &mut spec_rng(seed))?;
            let seats = cfg
                .roster
                .iter()
                .enumerate()
                .map(|(seat, a)| {
                    Ok(SeatPrompt { seat, agent_name: &a.name, prompt: self.render(&spec, seat, &history, &opts, 1)? })
                })
                .collect::<Result<Vec<_>, PromptError>>()?;
            let doc = DryRun { session_id: p.index, group: p.group, spec, seats };
            let path = dir.join(format!("session-{:04}.prompts.json", p.index));
            std::fs::write(&path, serde_json::to_string_pretty(&doc).expect("prompts serialize") + "\n")
                .map_err(|source| LogError::Io { path, source })?;
        }
        Ok(plan.len())
    }
}

fn write_resolved_config(dir: &Path, cfg: &SessionConfig, digest: &str) -> Result<(), LogError> {
    #[derive(Serialize)]
    struct Resolved<'a> {
        config_digest: &'a str,
        config: &'a SessionConfig,
    }
    let path = dir.join("config.json");
    let body = serde_json::to_string_pretty(&Resolved { config_digest: digest, config: cfg }).expect("config serializes");
    std::fs::write(&path, body + "\n").map_err(|source| LogError::Io { path, source })
}

/// One summary per distinct agent name, in order of first seat.
pub fn session_summaries(runs: &[RunRecord]) -> Vec<MetricsSummary> {
    let Some(first) = runs.first() else {
        return Vec::new();
    };
    let mut names: Vec<&str> = Vec::new();
    for s in &first.seats {
        if !names.contains(&s.agent_name.as_str()) {
            names.push(&s.agent_name);
        }
    }
    names
        .into_iter()
        .filter_map(|name| {
            let outcomes: Vec<_> = runs
                .iter()
                .flat_map(|r| {
                    r.seats.iter().filter(|s| s.agent_name == name).map(move |s| r.seat_outcome(s.seat))
                })
                .collect();
            summarize(name, &outcomes).ok()
        })
        .collect()
}
