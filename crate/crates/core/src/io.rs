//! Line-JSON persistence: generic readers/writers plus the trajectory log
//! format (one session header, one object per step, one end marker).

use crate::domain::{Action, ContextVector, Trajectory, TrajectoryStep};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("io failure on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("bad line {line} in {path}: {message}")]
    BadLine { path: String, line: usize, message: String },
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.display().to_string(), source }
}

/// Write one JSON object per line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), IoError> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut writer = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item).expect("item serializes");
        writeln!(writer, "{line}").map_err(io_err(path))?;
    }
    writer.flush().map_err(io_err(path))
}

/// Read a line-JSON file written by `write_jsonl`.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, IoError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut items = Vec::new();
    for (index, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| IoError::BadLine {
            path: path.display().to_string(),
            line: index + 1,
            message: e.to_string(),
        })?;
        items.push(item);
    }
    Ok(items)
}

/// One line of a trajectory log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TrajectoryLogLine {
    Session {
        agent_id: String,
        session_id: String,
        context: ContextVector,
    },
    Step {
        session_id: String,
        index: usize,
        page_number: u32,
        state_digest: String,
        thought: String,
        action: Action,
    },
    End {
        session_id: String,
        terminal_action: Action,
        forced_exit: bool,
        complete: bool,
    },
}

pub fn trajectory_log_lines(trajectories: &[Trajectory]) -> Vec<TrajectoryLogLine> {
    let mut lines = Vec::new();
    for trajectory in trajectories {
        lines.push(TrajectoryLogLine::Session {
            agent_id: trajectory.agent_id.clone(),
            session_id: trajectory.session_id.clone(),
            context: trajectory.context.clone(),
        });
        for (index, step) in trajectory.steps.iter().enumerate() {
            lines.push(TrajectoryLogLine::Step {
                session_id: trajectory.session_id.clone(),
                index,
                page_number: step.page_number,
                state_digest: step.state_digest.clone(),
                thought: step.thought.clone(),
                action: step.action.clone(),
            });
        }
        lines.push(TrajectoryLogLine::End {
            session_id: trajectory.session_id.clone(),
            terminal_action: trajectory.terminal_action.clone(),
            forced_exit: trajectory.forced_exit,
            complete: trajectory.complete,
        });
    }
    lines
}

pub fn write_trajectory_log(path: &Path, trajectories: &[Trajectory]) -> Result<(), IoError> {
    write_jsonl(path, &trajectory_log_lines(trajectories))
}

/// Reassemble trajectories from a log file.
pub fn read_trajectory_log(path: &Path) -> Result<Vec<Trajectory>, IoError> {
    let lines: Vec<TrajectoryLogLine> = read_jsonl(path)?;
    let mut trajectories: Vec<Trajectory> = Vec::new();
    let mut open: Option<Trajectory> = None;
    for (index, line) in lines.into_iter().enumerate() {
        match line {
            TrajectoryLogLine::Session { agent_id, session_id, context } => {
                open = Some(Trajectory {
                    agent_id,
                    session_id,
                    context,
                    steps: Vec::new(),
                    terminal_action: Action::Exit,
                    forced_exit: false,
                    complete: true,
                });
            }
            TrajectoryLogLine::Step {
                session_id,
                page_number,
                state_digest,
                thought,
                action,
                ..
            } => {
                let current = open.as_mut().ok_or_else(|| IoError::BadLine {
                    path: path.display().to_string(),
                    line: index + 1,
                    message: format!("step for {session_id} before session header"),
                })?;
                current.steps.push(TrajectoryStep { page_number, state_digest, thought, action });
            }
            TrajectoryLogLine::End { session_id, terminal_action, forced_exit, complete } => {
                let mut current = open.take().ok_or_else(|| IoError::BadLine {
                    path: path.display().to_string(),
                    line: index + 1,
                    message: format!("end for {session_id} before session header"),
                })?;
                current.terminal_action = terminal_action;
                current.forced_exit = forced_exit;
                current.complete = complete;
                trajectories.push(current);
            }
        }
    }
    Ok(trajectories)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::*;
    use proptest::prelude::*;

    fn context() -> ContextVector {
        ContextVector {
            temporal: TemporalContext { minute_of_day: 30, day_of_week: 3 },
            location: "transit".into(),
            situational: SituationalContext {
                latest_activity: "commuting".into(),
                mood: Mood::Bored,
                need_level: 0.2,
                energy_level: 0.9,
            },
            goal: "pass the time".into(),
            constraint: ConstraintContext { budget: Some(5.0), time_available_minutes: 30 },
        }
    }

    #[test]
    fn trajectory_log_round_trip() {
        let trajectories = vec![Trajectory {
            agent_id: "u1".into(),
            session_id: "u1-d0s38".into(),
            context: context(),
            steps: vec![
                TrajectoryStep {
                    page_number: 1,
                    state_digest: "page 1 items [a,b]".into(),
                    thought: "looks fine".into(),
                    action: Action::ClickItem { item_id: "a".into() },
                },
                TrajectoryStep {
                    page_number: 1,
                    state_digest: "page 1 items [a,b] expanded=a".into(),
                    thought: "rating it".into(),
                    action: Action::Rate { item_id: "a".into(), value: 4 },
                },
            ],
            terminal_action: Action::Exit,
            forced_exit: false,
            complete: true,
        }];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trajectories.jsonl");
        write_trajectory_log(&path, &trajectories).unwrap();
        let loaded = read_trajectory_log(&path).unwrap();
        assert_eq!(loaded, trajectories);
        // One header + two steps + one end marker.
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn jsonl_round_trip_domain_values(ratings in proptest::collection::vec(1u8..=5, 0..20),
                                          minute in 0u16..1440,
                                          day in 0u8..7) {
            let records: Vec<InteractionRecord> = ratings
                .iter()
                .enumerate()
                .map(|(i, r)| InteractionRecord {
                    user_id: format!("u{i}"),
                    item_id: format!("i{i}"),
                    rating: Some(*r),
                    timestamp: i as i64,
                    kind: InteractionKind::Rate,
                })
                .collect();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("records.jsonl");
            write_jsonl(&path, &records).unwrap();
            let loaded: Vec<InteractionRecord> = read_jsonl(&path).unwrap();
            prop_assert_eq!(loaded, records);

            let mut cv = context();
            cv.temporal = TemporalContext { minute_of_day: minute, day_of_week: day };
            let json = serde_json::to_string(&cv).unwrap();
            let back: ContextVector = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(back, cv);
        }
    }
}
