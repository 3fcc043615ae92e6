//! Asynchronous tasks with pollable status, and the polling timeout built on them.
//!
//! A task runs a unit of work on its own thread. Its status moves from
//! running to done or failed exactly once. Destroying a running task raises its
//! [`CancelToken`]; the work is expected to check the token at convenient
//! points (the interpreter checks it between commands) and stop.

use std::collections::HashMap;
use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

/// Default polling quantum of [`with_timeout`].
pub const DEFAULT_TIMESLOT: Duration = Duration::from_millis(500);

/// Script-level symbol raised by a failed or timed-out task.
pub const THREAD_FAIL: &str = "WS_THREAD_FAIL";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskStatus {
    /// Created but not yet given work.
    New,
    Running,
    Done,
    Fail,
}

impl TaskStatus {
    /// The symbol scripts compare against, e.g. `WS_THREAD_DONE`.
    pub fn symbol(self) -> &'static str {
        match self {
            TaskStatus::New => "WS_THREAD_NEW",
            TaskStatus::Running => "WS_THREAD_RUNNING",
            TaskStatus::Done => "WS_THREAD_DONE",
            TaskStatus::Fail => THREAD_FAIL,
        }
    }

    pub fn is_settled(self) -> bool {
        matches!(self, TaskStatus::Done | TaskStatus::Fail)
    }
}

impl fmt::Display for TaskStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailReason {
    Timeout,
    Failed,
}

impl fmt::Display for FailReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailReason::Timeout => "timeout",
            FailReason::Failed => "failed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaskError {
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("task {id} has no result (status {status})")]
    NoResult { id: TaskId, status: TaskStatus },
    #[error("task {0} was already started")]
    AlreadyStarted(TaskId),
    #[error("cannot start task: {0}")]
    Spawn(String),
    /// Displays as the bare symbol so scripts see exactly `WS_THREAD_FAIL`.
    #[error("WS_THREAD_FAIL")]
    ThreadFail { reason: FailReason, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TaskId(u64);

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "thread{}", self.0)
    }
}

impl FromStr for TaskId {
    type Err = TaskError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.strip_prefix("thread")
            .and_then(|n| n.parse().ok())
            .map(TaskId)
            .ok_or_else(|| TaskError::UnknownTask(s.to_string()))
    }
}

/// Raised when the owning task is destroyed.
#[derive(Debug, Clone, Default)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn new() -> Self {
        CancelToken::default()
    }

    pub fn cancel(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }

    /// Sleeps up to `duration`, returning early (with `false`) if cancelled.
    pub fn sleep(&self, duration: Duration) -> bool {
        let deadline = Instant::now() + duration;
        loop {
            if self.is_cancelled() {
                return false;
            }
            let now = Instant::now();
            if now >= deadline {
                return true;
            }
            thread::sleep((deadline - now).min(Duration::from_millis(10)));
        }
    }
}

/// A unit of work: returns its text result or a failure description.
pub type Work = Box<dyn FnOnce(&CancelToken) -> Result<String, String> + Send + 'static>;

enum State {
    New,
    Running,
    Done(String),
    Fail(String),
}

impl State {
    fn status(&self) -> TaskStatus {
        match self {
            State::New => TaskStatus::New,
            State::Running => TaskStatus::Running,
            State::Done(_) => TaskStatus::Done,
            State::Fail(_) => TaskStatus::Fail,
        }
    }
}

struct Task {
    state: Mutex<State>,
    settled: Condvar,
    cancel: CancelToken,
}

impl Task {
    fn settle(&self, outcome: Result<String, String>) {
        let mut state = self.state.lock().expect("task lock");
        if matches!(*state, State::Running) {
            *state = match outcome {
                Ok(v) => State::Done(v),
                Err(e) => State::Fail(e),
            };
            self.settled.notify_all();
        }
    }
}

/// Table of live task handles. Share it behind an `Arc`.
#[derive(Default)]
pub struct TaskRegistry {
    next: AtomicU64,
    tasks: Mutex<HashMap<TaskId, Arc<Task>>>,
}

impl fmt::Debug for TaskRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TaskRegistry").field("live", &self.live_count()).finish()
    }
}

impl TaskRegistry {
    pub fn new() -> Self {
        TaskRegistry::default()
    }

    fn get(&self, id: TaskId) -> Result<Arc<Task>, TaskError> {
        self.tasks
            .lock()
            .expect("registry lock")
            .get(&id)
            .cloned()
            .ok_or_else(|| TaskError::UnknownTask(id.to_string()))
    }

    /// A handle with no work yet; see [`exec`](Self::exec).
    pub fn create(&self) -> TaskId {
        let id = TaskId(self.next.fetch_add(1, Ordering::Relaxed) + 1);
        let task =
            Arc::new(Task { state: Mutex::new(State::New), settled: Condvar::new(), cancel: CancelToken::new() });
        self.tasks.lock().expect("registry lock").insert(id, task);
        id
    }

    /// Starts `work` on a new thread. A handle can be started only once.
    pub fn exec(&self, id: TaskId, work: Work) -> Result<(), TaskError> {
        let task = self.get(id)?;
        {
            let mut state = task.state.lock().expect("task lock");
            if !matches!(*state, State::New) {
                return Err(TaskError::AlreadyStarted(id));
            }
            *state = State::Running;
        }
        let runner = Arc::clone(&task);
        let spawned = thread::Builder::new().name(format!("ws-{id}")).spawn(move || {
            let cancel = runner.cancel.clone();
            let outcome =
                catch_unwind(AssertUnwindSafe(|| work(&cancel))).unwrap_or_else(|_| Err("task panicked".to_string()));
            runner.settle(outcome);
        });
        if let Err(e) = spawned {
            task.settle(Err(e.to_string()));
            return Err(TaskError::Spawn(e.to_string()));
        }
        Ok(())
    }

    pub fn spawn(&self, work: Work) -> Result<TaskId, TaskError> {
        let id = self.create();
        if let Err(e) = self.exec(id, work) {
            let _ = self.destroy(id);
            return Err(e);
        }
        Ok(id)
    }

    /// Non-blocking.
    pub fn status(&self, id: TaskId) -> Result<TaskStatus, TaskError> {
        Ok(self.get(id)?.state.lock().expect("task lock").status())
    }

    /// The result of a task that finished successfully.
    pub fn result(&self, id: TaskId) -> Result<String, TaskError> {
        match &*self.get(id)?.state.lock().expect("task lock") {
            State::Done(v) => Ok(v.clone()),
            other => Err(TaskError::NoResult { id, status: other.status() }),
        }
    }

    /// The failure description of a failed task.
    pub fn failure(&self, id: TaskId) -> Result<String, TaskError> {
        match &*self.get(id)?.state.lock().expect("task lock") {
            State::Fail(e) => Ok(e.clone()),
            other => Err(TaskError::NoResult { id, status: other.status() }),
        }
    }

    /// Blocks until the task settles or `limit` passes; returns the status then.
    pub fn wait(&self, id: TaskId, limit: Option<Duration>) -> Result<TaskStatus, TaskError> {
        let task = self.get(id)?;
        let deadline = limit.map(|d| Instant::now() + d);
        let mut state = task.state.lock().expect("task lock");
        while matches!(*state, State::Running) {
            match deadline {
                None => state = task.settled.wait(state).expect("task lock"),
                Some(deadline) => {
                    let now = Instant::now();
                    if now >= deadline {
                        break;
                    }
                    state = task.settled.wait_timeout(state, deadline - now).expect("task lock").0;
                }
            }
        }
        Ok(state.status())
    }

    /// Cancels the task if it is running and forgets the handle.
    pub fn destroy(&self, id: TaskId) -> Result<(), TaskError> {
        let task = self
            .tasks
            .lock()
            .expect("registry lock")
            .remove(&id)
            .ok_or_else(|| TaskError::UnknownTask(id.to_string()))?;
        task.cancel.cancel();
        Ok(())
    }

    pub fn live_count(&self) -> usize {
        self.tasks.lock().expect("registry lock").len()
    }
}

/// Runs `work` as a task and polls it every `timeslot` until it finishes or the
/// accumulated wait reaches `timeout`. Returns the result on success. On failure
/// or timeout the task is destroyed and [`TaskError::ThreadFail`] is returned.
pub fn with_timeout(
    registry: &TaskRegistry,
    work: Work,
    timeout: Duration,
    timeslot: Duration,
) -> Result<String, TaskError> {
    let id = registry.spawn(work)?;
    let mut elapsed = Duration::ZERO;
    let mut failed = false;
    while elapsed < timeout {
        elapsed += timeslot;
        // Sleeps one slot, but wakes as soon as the task settles.
        match registry.wait(id, Some(timeslot))? {
            TaskStatus::Done => {
                let result = registry.result(id);
                registry.destroy(id)?;
                return result;
            }
            TaskStatus::Fail => {
                failed = true;
                break;
            }
            TaskStatus::New | TaskStatus::Running => {}
        }
    }
    let detail = if failed { registry.failure(id).unwrap_or_default() } else { format!("no result after {timeout:?}") };
    registry.destroy(id)?;
    let reason = if failed { FailReason::Failed } else { FailReason::Timeout };
    Err(TaskError::ThreadFail { reason, detail })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicUsize;

    fn work(f: impl FnOnce(&CancelToken) -> Result<String, String> + Send + 'static) -> Work {
        Box::new(f)
    }

    #[test]
    fn spawn_settles_done_or_fail() {
        let reg = TaskRegistry::new();
        let ok = reg.spawn(work(|_| Ok("x".into()))).unwrap();
        assert_eq!(reg.wait(ok, None).unwrap(), TaskStatus::Done);
        assert_eq!(reg.result(ok).unwrap(), "x");

        let bad = reg.spawn(work(|_| Err("boom".into()))).unwrap();
        assert_eq!(reg.wait(bad, None).unwrap(), TaskStatus::Fail);
        assert!(matches!(reg.result(bad), Err(TaskError::NoResult { status: TaskStatus::Fail, .. })));
        assert_eq!(reg.failure(bad).unwrap(), "boom");

        let panics = reg.spawn(work(|_| panic!("inside task"))).unwrap();
        assert_eq!(reg.wait(panics, None).unwrap(), TaskStatus::Fail);
    }

    #[test]
    fn running_task_reports_running() {
        let reg = TaskRegistry::new();
        let start = Instant::now();
        let id = reg
            .spawn(work(|c| {
                c.sleep(Duration::from_millis(200));
                Ok("y".into())
            }))
            .unwrap();
        assert_eq!(reg.status(id).unwrap(), TaskStatus::Running);
        assert!(start.elapsed() < Duration::from_millis(50));
        assert!(matches!(reg.result(id), Err(TaskError::NoResult { status: TaskStatus::Running, .. })));
        assert_eq!(reg.wait(id, None).unwrap(), TaskStatus::Done);
        assert_eq!(reg.result(id).unwrap(), "y");
    }

    #[test]
    fn destroy_forgets_handle_and_cancels() {
        let reg = TaskRegistry::new();
        let counter = Arc::new(AtomicUsize::new(0));
        let seen = Arc::clone(&counter);
        let id = reg
            .spawn(work(move |c| {
                while !c.is_cancelled() {
                    seen.fetch_add(1, Ordering::SeqCst);
                    thread::sleep(Duration::from_millis(1));
                }
                Err("cancelled".into())
            }))
            .unwrap();
        thread::sleep(Duration::from_millis(30));
        reg.destroy(id).unwrap();
        thread::sleep(Duration::from_millis(20));
        let stopped_at = counter.load(Ordering::SeqCst);
        assert!(stopped_at > 0);
        thread::sleep(Duration::from_millis(50));
        assert_eq!(counter.load(Ordering::SeqCst), stopped_at);
        assert!(matches!(reg.status(id), Err(TaskError::UnknownTask(_))));
        assert!(reg.status(id).unwrap_err().to_string().starts_with("unknown task"));
        assert!(reg.destroy(id).is_err());
        assert_eq!(reg.live_count(), 0);
    }

    #[test]
    fn exec_only_once() {
        let reg = TaskRegistry::new();
        let id = reg.create();
        assert_eq!(reg.status(id).unwrap(), TaskStatus::New);
        reg.exec(id, work(|_| Ok(String::new()))).unwrap();
        assert_eq!(reg.exec(id, work(|_| Ok(String::new()))), Err(TaskError::AlreadyStarted(id)));
    }

    #[test]
    fn settles_exactly_once() {
        let reg = TaskRegistry::new();
        let id = reg
            .spawn(work(|c| {
                c.sleep(Duration::from_millis(30));
                Ok("v".into())
            }))
            .unwrap();
        let mut transitions = 0;
        let mut last = reg.status(id).unwrap();
        for _ in 0..40 {
            let now = reg.status(id).unwrap();
            if now != last {
                transitions += 1;
                last = now;
            }
            thread::sleep(Duration::from_millis(2));
        }
        assert_eq!(last, TaskStatus::Done);
        assert_eq!(transitions, 1);
    }

    #[test]
    fn timeout_returns_fast_result() {
        let reg = TaskRegistry::new();
        let out = with_timeout(
            &reg,
            work(|c| {
                c.sleep(Duration::from_millis(10));
                Ok("ok".into())
            }),
            Duration::from_millis(1000),
            Duration::from_millis(50),
        )
        .unwrap();
        assert_eq!(out, "ok");
        assert_eq!(reg.live_count(), 0);
    }

    #[test]
    fn timeout_and_failure_raise_thread_fail() {
        let reg = TaskRegistry::new();
        let start = Instant::now();
        let err = with_timeout(
            &reg,
            work(|c| {
                c.sleep(Duration::from_millis(5000));
                Ok("late".into())
            }),
            Duration::from_millis(300),
            Duration::from_millis(100),
        )
        .unwrap_err();
        let took = start.elapsed();
        assert!(took >= Duration::from_millis(300) && took <= Duration::from_millis(500), "{took:?}");
        assert!(matches!(err, TaskError::ThreadFail { reason: FailReason::Timeout, .. }));
        assert_eq!(err.to_string(), "WS_THREAD_FAIL");

        let start = Instant::now();
        let err =
            with_timeout(&reg, work(|_| Err("nope".into())), Duration::from_millis(1000), Duration::from_millis(100))
                .unwrap_err();
        assert!(start.elapsed() <= Duration::from_millis(200));
        assert_eq!(err, TaskError::ThreadFail { reason: FailReason::Failed, detail: "nope".into() });
        assert_eq!(reg.live_count(), 0);
    }

    #[test]
    fn task_ids_round_trip_through_text() {
        let reg = TaskRegistry::new();
        let id = reg.create();
        assert_eq!(id.to_string().parse::<TaskId>().unwrap(), id);
        assert!("task1".parse::<TaskId>().is_err());
    }
}
