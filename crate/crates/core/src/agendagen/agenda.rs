//! Daily task timelines.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::rulelang::Value;

pub const DAY: f64 = 86_400.0;

/// Identifies one accompaniment: unique within a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupId {
    pub household: u32,
    pub index: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskKind {
    StayInside { building: u32 },
    GoToBuilding { building: u32 },
    DelayedRule { rule: String, vars: BTreeMap<String, Value> },
    FloatingSlot,
    GroupAccompany { leader: u32, members: Vec<u32>, building: u32 },
}

impl TaskKind {
    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::StayInside { .. } => "stay_inside",
            TaskKind::GoToBuilding { .. } => "go_to_building",
            TaskKind::DelayedRule { .. } => "delayed_rule",
            TaskKind::FloatingSlot => "floating_slot",
            TaskKind::GroupAccompany { .. } => "group_accompany",
        }
    }

    /// Building the task ends in, if any.
    pub fn building(&self) -> Option<u32> {
        match self {
            TaskKind::StayInside { building } | TaskKind::GoToBuilding { building } | TaskKind::GroupAccompany { building, .. } => {
                Some(*building)
            }
            _ => None,
        }
    }

    pub fn is_travel(&self) -> bool {
        matches!(self, TaskKind::GoToBuilding { .. } | TaskKind::GroupAccompany { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgendaTask {
    pub t0: f64,
    pub t1: f64,
    #[serde(flatten)]
    pub kind: TaskKind,
    /// Set on the leader's task and on the members' travel it covers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<GroupId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloatingTaskEntry {
    pub rule: String,
    pub max_duration: f64,
    pub priority: f64,
    pub vars: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Agenda {
    pub person: u32,
    pub tasks: Vec<AgendaTask>,
    pub pool: Vec<FloatingTaskEntry>,
}

impl Agenda {
    pub fn new(person: u32) -> Self {
        Agenda { person, tasks: Vec::new(), pool: Vec::new() }
    }

    /// Inserts a task over `[t0, t1)`. Older tasks lose: those inside the
    /// interval are dropped, overlapping ones trimmed, an enclosing one split.
    pub fn insert(&mut self, t0: f64, t1: f64, kind: TaskKind, group: Option<GroupId>) {
        debug_assert!(t0 < t1);
        let mut out = Vec::with_capacity(self.tasks.len() + 2);
        let mut placed = false;
        for task in self.tasks.drain(..) {
            if task.t1 <= t0 {
                out.push(task);
                continue;
            }
            if task.t0 >= t1 {
                if !placed {
                    out.push(AgendaTask { t0, t1, kind: kind.clone(), group });
                    placed = true;
                }
                out.push(task);
                continue;
            }
            if task.t0 < t0 {
                out.push(AgendaTask { t1: t0, ..task.clone() });
            }
            if !placed {
                out.push(AgendaTask { t0, t1, kind: kind.clone(), group });
                placed = true;
            }
            if task.t1 > t1 {
                out.push(AgendaTask { t0: t1, ..task });
            }
        }
        if !placed {
            out.push(AgendaTask { t0, t1, kind, group });
        }
        self.tasks = out;
    }

    /// Fills every gap of the day with a stay at `home`.
    pub fn finalize(&mut self, home: u32) {
        let mut out = Vec::with_capacity(self.tasks.len() + 2);
        let mut cursor = 0.0;
        for task in self.tasks.drain(..) {
            if task.t0 > cursor {
                out.push(AgendaTask { t0: cursor, t1: task.t0, kind: TaskKind::StayInside { building: home }, group: None });
            }
            cursor = task.t1;
            out.push(task);
        }
        if cursor < DAY {
            out.push(AgendaTask { t0: cursor, t1: DAY, kind: TaskKind::StayInside { building: home }, group: None });
        }
        self.tasks = out;
    }

    /// Index of the task covering `t`, or of the next one to start.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        let i = self.tasks.partition_point(|task| task.t1 <= t);
        (i < self.tasks.len()).then_some(i)
    }

    /// The task covering `t`.
    pub fn task_at(&self, t: f64) -> Option<&AgendaTask> {
        self.index_at(t).map(|i| &self.tasks[i]).filter(|task| task.t0 <= t)
    }

    /// Checks order, non-overlap and, when `full`, coverage of the whole day.
    pub fn check(&self, full: bool) -> Result<(), String> {
        let mut cursor = 0.0;
        for (i, t) in self.tasks.iter().enumerate() {
            if !(t.t0 < t.t1) {
                return Err(format!("task {i} is empty"));
            }
            if t.t0 < cursor {
                return Err(format!("task {i} overlaps its predecessor"));
            }
            if full && t.t0 != cursor {
                return Err(format!("gap before task {i}"));
            }
            cursor = t.t1;
        }
        if full && cursor != DAY {
            return Err("agenda does not reach the end of the day".into());
        }
        Ok(())
    }
}
