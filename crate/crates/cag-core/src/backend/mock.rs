//! Deterministic mock backends for tests and offline runs.
//!
//! Every mock is a pure function of its prompt (plus, for `Failing`, a call
//! counter), so pipeline behavior built on them is exactly reproducible.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use crate::backend::{
    Backend, BackendError, BackendSession, SessionCore, SessionLimits, SessionState,
};
use crate::cwq::Rational;
use crate::error::InvalidConfig;

/// What a [`MockBackend`] does with each prompt.
#[derive(Debug, Clone)]
pub enum MockSpec {
    /// Return the prompt unchanged.
    Echo,
    /// Wrap the prompt in `[[...]]` so tests can see which text passed
    /// through a generation call.
    MarkerTransform,
    /// Extractive "summarizer": keep every ⌈1/ρ⌉-th whitespace-delimited
    /// word (1-based), joined by single spaces; inputs with no whitespace
    /// keep their first ⌈ρ·n⌉ characters. Output is always truncated to
    /// ⌈ρ·n⌉ characters, so each call contracts by at least ρ.
    RatioCompressor { ratio: Rational },
    /// Echo, except the generate calls whose global 0-based sequence number
    /// is listed fail with `GenerationFailed`.
    Failing { fail_indices: BTreeSet<usize> },
}

/// In-process backend driven by a [`MockSpec`]. Sessions share one global
/// generate-call counter, which is what `Failing` indexes.
pub struct MockBackend {
    spec: MockSpec,
    limits: SessionLimits,
    calls: Arc<AtomicUsize>,
}

impl MockBackend {
    pub fn new(spec: MockSpec) -> Self {
        Self {
            spec,
            limits: SessionLimits::default(),
            calls: Arc::new(AtomicUsize::new(0)),
        }
    }

    pub fn echo() -> Self {
        Self::new(MockSpec::Echo)
    }

    pub fn marker() -> Self {
        Self::new(MockSpec::MarkerTransform)
    }

    /// ρ must satisfy 0 < ρ < 1.
    pub fn ratio(ratio: Rational) -> Result<Self, InvalidConfig> {
        if !ratio.is_proper_fraction() {
            return Err(InvalidConfig::new(
                "ratio",
                format!("must be strictly between 0 and 1, got {ratio}"),
            ));
        }
        Ok(Self::new(MockSpec::RatioCompressor { ratio }))
    }

    pub fn failing(fail_indices: impl IntoIterator<Item = usize>) -> Self {
        Self::new(MockSpec::Failing {
            fail_indices: fail_indices.into_iter().collect(),
        })
    }

    pub fn with_limits(mut self, limits: SessionLimits) -> Self {
        self.limits = limits;
        self
    }

    /// Total generate calls made across all sessions so far.
    pub fn generate_calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Backend for MockBackend {
    fn limits(&self) -> SessionLimits {
        self.limits.clone()
    }

    fn open_session(&self, limits: SessionLimits) -> Result<Box<dyn BackendSession>, BackendError> {
        Ok(Box::new(MockSession {
            core: SessionCore::new(limits),
            spec: self.spec.clone(),
            calls: Arc::clone(&self.calls),
        }))
    }
}

struct MockSession {
    core: SessionCore,
    spec: MockSpec,
    calls: Arc<AtomicUsize>,
}

impl BackendSession for MockSession {
    fn limits(&self) -> &SessionLimits {
        self.core.limits()
    }

    fn state(&self) -> SessionState {
        self.core.state()
    }

    fn generate(&mut self, prompt: &str) -> Result<String, BackendError> {
        let budget = self.core.begin(prompt)?;
        let call = self.calls.fetch_add(1, Ordering::SeqCst);
        let response = match &self.spec {
            MockSpec::Echo => prompt.to_string(),
            MockSpec::MarkerTransform => format!("[[{prompt}]]"),
            MockSpec::RatioCompressor { ratio } => ratio_compress(prompt, *ratio),
            MockSpec::Failing { fail_indices } => {
                if fail_indices.contains(&call) {
                    return Err(BackendError::GenerationFailed {
                        message: format!("injected failure at generate call {call}"),
                    });
                }
                prompt.to_string()
            }
        };
        self.core.finish(&budget, &response, (None, None));
        Ok(response)
    }

    fn close(&mut self) {
        self.core.close();
    }
}

/// The RatioCompressor transform; see [`MockSpec::RatioCompressor`].
fn ratio_compress(prompt: &str, ratio: Rational) -> String {
    let n = prompt.chars().count();
    if n == 0 {
        return String::new();
    }
    let cap = ratio.mul_ceil(n);
    let kept = if prompt.contains(char::is_whitespace) {
        let k = ratio.recip_ceil();
        let words: Vec<&str> = prompt
            .split_whitespace()
            .enumerate()
            .filter(|(i, _)| (i + 1) % k == 0)
            .map(|(_, w)| w)
            .collect();
        words.join(" ")
    } else {
        prompt.chars().take(cap).collect()
    };
    if kept.chars().count() > cap {
        kept.chars().take(cap).collect()
    } else {
        kept
    }
}

/// Wraps a backend and counts session opens and closes, for verifying that
/// every opened session gets closed exactly once.
pub struct InstrumentedBackend<B: Backend> {
    inner: B,
    opens: Arc<AtomicUsize>,
    closes: Arc<AtomicUsize>,
}

impl<B: Backend> InstrumentedBackend<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            opens: Arc::new(AtomicUsize::new(0)),
            closes: Arc::new(AtomicUsize::new(0)),
        }
    }

    /// Sessions opened successfully.
    pub fn opens(&self) -> usize {
        self.opens.load(Ordering::SeqCst)
    }

    /// Sessions closed (counted once per session, however many times `close`
    /// is called).
    pub fn closes(&self) -> usize {
        self.closes.load(Ordering::SeqCst)
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }
}

impl<B: Backend> Backend for InstrumentedBackend<B> {
    fn limits(&self) -> SessionLimits {
        self.inner.limits()
    }

    fn open_session(&self, limits: SessionLimits) -> Result<Box<dyn BackendSession>, BackendError> {
        let session = self.inner.open_session(limits)?;
        self.opens.fetch_add(1, Ordering::SeqCst);
        Ok(Box::new(InstrumentedSession {
            inner: session,
            closes: Arc::clone(&self.closes),
            counted: false,
        }))
    }
}

struct InstrumentedSession {
    inner: Box<dyn BackendSession>,
    closes: Arc<AtomicUsize>,
    counted: bool,
}

impl BackendSession for InstrumentedSession {
    fn limits(&self) -> &SessionLimits {
        self.inner.limits()
    }

    fn state(&self) -> SessionState {
        self.inner.state()
    }

    fn generate(&mut self, prompt: &str) -> Result<String, BackendError> {
        self.inner.generate(prompt)
    }

    fn close(&mut self) {
        if !self.counted {
            self.counted = true;
            self.closes.fetch_add(1, Ordering::SeqCst);
        }
        self.inner.close();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half() -> Rational {
        Rational::new(1, 2).unwrap()
    }

    #[test]
    fn echo_returns_the_prompt() {
        let backend = MockBackend::echo();
        let mut s = backend.open_session(backend.limits()).unwrap();
        assert_eq!(s.generate("abc").unwrap(), "abc");
    }

    #[test]
    fn marker_wraps_the_prompt() {
        let backend = MockBackend::marker();
        let mut s = backend.open_session(backend.limits()).unwrap();
        assert_eq!(s.generate("abc").unwrap(), "[[abc]]");
    }

    #[test]
    fn sessions_meter_their_budget() {
        let backend = MockBackend::echo().with_limits(SessionLimits::new(10));
        let mut s = backend.open_session(backend.limits()).unwrap();
        // 20-char prompt = 5 tokens, echoed response another 5: window full.
        s.generate(&"y".repeat(20)).unwrap();
        assert_eq!(s.limits().tokens_left, 0);
        let err = s.generate("z").unwrap_err();
        assert!(matches!(err, BackendError::ContextOverflow { .. }));
        assert_eq!(s.limits().tokens_so_far + s.limits().tokens_left, 10);
    }

    #[test]
    fn generate_after_close_is_an_error() {
        let backend = MockBackend::echo();
        let mut s = backend.open_session(backend.limits()).unwrap();
        s.close();
        assert_eq!(s.state(), SessionState::Closed);
        assert_eq!(s.generate("x").unwrap_err(), BackendError::SessionClosed);
        s.close(); // second close is a no-op
        assert_eq!(s.state(), SessionState::Closed);
    }

    #[test]
    fn ratio_compressor_halves_uniform_words() {
        // 200 words of 4 chars + trailing spaces = 1,000 chars.
        let prompt = "abcd ".repeat(200);
        assert_eq!(prompt.chars().count(), 1000);
        let out = ratio_compress(&prompt, half());
        let len = out.chars().count();
        // 100 kept words joined by single spaces: 499 chars, within 500 ± 1.
        assert!((499..=501).contains(&len), "got {len}");
        assert!(out.split_whitespace().all(|w| w == "abcd"));
    }

    #[test]
    fn ratio_compressor_respects_the_cap_on_uneven_words() {
        // Word-keeping alone would keep "bbbb" (4 chars) from this 6-char
        // input; the ⌈ρ·n⌉ = 3 cap must clamp it.
        let out = ratio_compress("a bbbb", half());
        assert!(out.chars().count() <= 3, "got {out:?}");
    }

    #[test]
    fn ratio_compressor_slices_unspaced_input() {
        let out = ratio_compress("abcdefghij", half());
        assert_eq!(out, "abcde");
    }

    #[test]
    fn ratio_compressor_contracts_every_input() {
        let ratios = [
            Rational::new(3, 10).unwrap(),
            half(),
            Rational::new(9, 10).unwrap(),
        ];
        let inputs = [
            "a bbbb cc ddddd e".to_string(),
            "word ".repeat(50),
            "nospaceatallhere".to_string(),
            "  leading and trailing  ".to_string(),
            "ab".to_string(),
        ];
        for ratio in ratios {
            for input in &inputs {
                let n = input.chars().count();
                let out = ratio_compress(input, ratio);
                assert!(
                    out.chars().count() <= ratio.mul_ceil(n),
                    "ratio {ratio} on {input:?}: {} > ⌈ρ·{n}⌉",
                    out.chars().count()
                );
            }
        }
    }

    #[test]
    fn ratio_rejects_improper_fractions() {
        assert!(MockBackend::ratio(Rational::from_integer(1)).is_err());
        assert!(MockBackend::ratio(Rational::new(0, 2).unwrap()).is_err());
        assert!(MockBackend::ratio(Rational::new(3, 2).unwrap()).is_err());
        assert!(MockBackend::ratio(half()).is_ok());
    }

    #[test]
    fn failing_mock_fails_exactly_the_listed_calls() {
        let backend = MockBackend::failing([1]);
        for expected in [Ok(()), Err(()), Ok(())] {
            let mut s = backend.open_session(backend.limits()).unwrap();
            let got = s.generate("chunk").map(|_| ()).map_err(|_| ());
            assert_eq!(got, expected);
            s.close();
        }
        assert_eq!(backend.generate_calls(), 3);
    }

    #[test]
    fn instrumented_backend_counts_lifecycles() {
        let backend = InstrumentedBackend::new(MockBackend::echo());
        let mut a = backend.open_session(backend.limits()).unwrap();
        let mut b = backend.open_session(backend.limits()).unwrap();
        assert_eq!((backend.opens(), backend.closes()), (2, 0));
        a.close();
        a.close(); // double close still counts once
        b.close();
        assert_eq!((backend.opens(), backend.closes()), (2, 2));
    }
}
