use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use super::transport::{ChatRequest, ChatResponse, EmbeddingRequest, Transport, TransportFailure};

type ChatFn = dyn Fn(&ChatRequest) -> Result<String, TransportFailure> + Send + Sync;
type EmbedFn = dyn Fn(&str) -> Vec<f64> + Send + Sync;

/// Scripted in-process transport for offline tests.
///
/// Responses come from a FIFO script (the last entry repeats once the script
/// is exhausted) or from a handler function. Every request is recorded and
/// the peak number of concurrent calls is tracked.
pub struct MockTransport {
    script: Mutex<VecDeque<String>>,
    last: Mutex<Option<String>>,
    handler: Option<Box<ChatFn>>,
    embedder: Box<EmbedFn>,
    failures_left: AtomicUsize,
    delay: Duration,
    calls: AtomicUsize,
    in_flight: AtomicUsize,
    peak_in_flight: AtomicUsize,
    requests: Mutex<Vec<ChatRequest>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MockStats {
    pub calls: usize,
    pub peak_in_flight: usize,
}

impl MockTransport {
    fn base() -> Self {
        Self {
            script: Mutex::new(VecDeque::new()),
            last: Mutex::new(None),
            handler: None,
            embedder: Box::new(|t| super::synthetic::hashed_unit_vector(t, 16)),
            failures_left: AtomicUsize::new(0),
            delay: Duration::ZERO,
            calls: AtomicUsize::new(0),
            in_flight: AtomicUsize::new(0),
            peak_in_flight: AtomicUsize::new(0),
            requests: Mutex::new(Vec::new()),
        }
    }

    pub fn scripted<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        let mock = Self::base();
        *mock.script.lock().unwrap() = responses.into_iter().map(Into::into).collect();
        mock
    }

    pub fn from_fn(f: impl Fn(&ChatRequest) -> Result<String, TransportFailure> + Send + Sync + 'static) -> Self {
        Self {
            handler: Some(Box::new(f)),
            ..Self::base()
        }
    }

    /// The first `n` calls fail with a transient error.
    pub fn failing_first(self, n: usize) -> Self {
        self.failures_left.store(n, Ordering::SeqCst);
        self
    }

    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }

    pub fn with_embedder(mut self, f: impl Fn(&str) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.embedder = Box::new(f);
        self
    }

    pub fn stats(&self) -> MockStats {
        MockStats {
            calls: self.calls.load(Ordering::SeqCst),
            peak_in_flight: self.peak_in_flight.load(Ordering::SeqCst),
        }
    }

    pub fn requests(&self) -> Vec<ChatRequest> {
        self.requests.lock().unwrap().clone()
    }

    fn enter(&self) -> Result<(), TransportFailure> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak_in_flight.fetch_max(now, Ordering::SeqCst);
        if !self.delay.is_zero() {
            std::thread::sleep(self.delay);
        }
        let failing = self
            .failures_left
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
            .is_ok();
        if failing {
            self.in_flight.fetch_sub(1, Ordering::SeqCst);
            return Err(TransportFailure::Transient("scripted failure".into()));
        }
        Ok(())
    }

    fn leave(&self) {
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
    }

    fn next_scripted(&self) -> Result<String, TransportFailure> {
        let mut script = self.script.lock().unwrap();
        let mut last = self.last.lock().unwrap();
        match script.pop_front() {
            Some(next) => {
                *last = Some(next.clone());
                Ok(next)
            }
            None => last
                .clone()
                .ok_or_else(|| TransportFailure::Fatal("mock script is empty".into())),
        }
    }
}

impl Transport for MockTransport {
    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, TransportFailure> {
        self.enter()?;
        self.requests.lock().unwrap().push(request.clone());
        let text = match &self.handler {
            Some(f) => f(request),
            None => self.next_scripted(),
        };
        self.leave();
        Ok(ChatResponse {
            text: text?,
            finish_reason: Some("stop".into()),
        })
    }

    fn embed(&self, request: &EmbeddingRequest) -> Result<Vec<Vec<f64>>, TransportFailure> {
        self.enter()?;
        let out = request.input.iter().map(|t| (self.embedder)(t)).collect();
        self.leave();
        Ok(out)
    }
}
