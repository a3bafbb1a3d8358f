//! Plain-text table of summary rows.

use crate::aggregate::{format_pct, SummaryRow};

const EMPTY: &str = "—";

fn cell(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.4}")).unwrap_or_else(|| EMPTY.to_string())
}

/// Renders rows as an aligned table: rule-break percentages with two
/// decimals, agents that never completed a run marked `failed`.
pub fn render_table(rows: &[SummaryRow]) -> String {
    let header = [
        "agent", "environment", "game", "group", "runs", "rule break (%)", "payoff ratio", "deviation", "win rate", "status",
    ];
    let body: Vec<[String; 10]> = rows
        .iter()
        .map(|r| {
            [
                r.agent_name.clone(),
                r.environment.to_string(),
                r.game.clone(),
                r.group.map(|g| g.to_string()).unwrap_or_else(|| EMPTY.to_string()),
                r.n_runs.to_string(),
                format_pct(r.rule_break_pct),
                cell(r.payoff_ratio),
                cell(r.mean_deviation),
                cell(r.win_rate),
                if r.completed { "ok".to_string() } else { "failed".to_string() },
            ]
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for line in &body {
        for (w, c) in widths.iter_mut().zip(line) {
            *w = (*w).max(c.chars().count());
        }
    }
    let fmt_line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect::<Vec<_>>()
            .join(" | ")
            .trim_end()
            .to_string()
    };
    let mut out = vec![fmt_line(header.to_vec())];
    out.push(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-"));
    for line in &body {
        out.push(fmt_line(line.iter().map(String::as_str).collect()));
    }
    out.join("\n") + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roster::Environment;

    #[test]
    fn failed_agents_and_empty_cells() {
        let row = SummaryRow {
            agent_name: "violator".into(),
            environment: Environment::Rational,
            game: "second_price_auction".into(),
            group: None,
            n_sessions: 1,
            n_runs: 150,
            mean_payoff: None,
            payoff_ratio: None,
            mean_deviation: None,
            rule_break_pct: 100.0,
            win_rate: None,
            completed: false,
        };
        let table = render_table(&[row]);
        let last = table.lines().last().unwrap();
        assert!(last.contains("100.00"));
        assert!(last.contains("failed"));
        assert!(last.contains(EMPTY));
        assert_eq!(table.lines().count(), 3);
    }
}
