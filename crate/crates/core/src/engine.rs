//! Engine for probabilistic recursive schemes.
//!
//! A scheme describes one body step at a time: given a parameter, the body
//! either finishes with an output or requests one recursive call together
//! with a continuation that consumes the recursive result. The engine runs
//! these steps iteratively, which buys three things native recursion cannot
//! give: a depth guard instead of a stack overflow, an exact record of the
//! deepest level entered, and the ability to answer recursion requests from
//! a chosen level with an exact oracle instead of recursing further.

use std::fmt;

use thiserror::Error;

use crate::rng::DrawAccounting;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(
        "recursion reached level {level}, beyond the guard's max depth {max_depth}; \
         the scheme may not terminate, or the cap is too small"
    )]
    DepthExceeded { level: u64, max_depth: u64 },
    #[error("oracle cannot serve the requested parameter: {0}")]
    OracleUnavailable(String),
    #[error("scheme failure: {0}")]
    Spec(#[source] Box<dyn std::error::Error + Send + Sync>),
}

impl EngineError {
    /// Wrap a domain error raised inside a scheme body.
    pub fn spec<E>(err: E) -> Self
    where
        E: std::error::Error + Send + Sync + 'static,
    {
        EngineError::Spec(Box::new(err))
    }
}

/// Continuation applied to the result of a recursive call. Runs at the
/// requesting body's level and may itself request further calls.
pub type Continuation<P, O, Src> = Box<dyn FnOnce(O, &mut Src) -> Step<P, O, Src>>;

/// One step of a scheme body.
pub enum Step<P, O, Src> {
    /// The call at this level is finished.
    Done(O),
    /// Request a recursive call with `param`; `then` maps its result to
    /// this level's continuation of work.
    Recurse {
        param: P,
        then: Continuation<P, O, Src>,
    },
    /// Abort the whole run with a domain error.
    Fail(EngineError),
}

impl<P, O, Src> Step<P, O, Src>
where
    P: 'static,
    O: 'static,
    Src: 'static,
{
    /// Tail recursion: the recursive result is this level's output.
    pub fn recurse(param: P) -> Self {
        Step::Recurse {
            param,
            then: Box::new(|out, _| Step::Done(out)),
        }
    }

    /// Recursion with a follow-up.
    pub fn recurse_with(
        param: P,
        then: impl FnOnce(O, &mut Src) -> Step<P, O, Src> + 'static,
    ) -> Self {
        Step::Recurse {
            param,
            then: Box::new(then),
        }
    }
}

impl<P: fmt::Debug, O: fmt::Debug, Src> fmt::Debug for Step<P, O, Src> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Done(o) => f.debug_tuple("Done").field(o).finish(),
            Step::Recurse { param, .. } => {
                f.debug_struct("Recurse").field("param", param).finish()
            }
            Step::Fail(e) => f.debug_tuple("Fail").field(e).finish(),
        }
    }
}

/// A probabilistic recursive scheme.
///
/// The body must draw all randomness through `src`; that is what makes runs
/// replayable and lets the coupled comparison share one stream between two
/// executions.
pub trait PrsSpec {
    type Param: Clone + fmt::Debug + 'static;
    type Output: 'static;
    type Src: DrawAccounting + 'static;

    fn body(
        &self,
        param: &Self::Param,
        src: &mut Self::Src,
    ) -> Step<Self::Param, Self::Output, Self::Src>;
}

/// Exact sampler for the target distribution of any parameter a scheme can
/// request. Used to cut recursion off at a chosen level.
pub trait Oracle<P, O, Src> {
    fn draw(&self, param: &P, src: &mut Src) -> Result<O, EngineError>;
}

impl<P, O, Src, F> Oracle<P, O, Src> for F
where
    F: Fn(&P, &mut Src) -> Result<O, EngineError>,
{
    fn draw(&self, param: &P, src: &mut Src) -> Result<O, EngineError> {
        self(param, src)
    }
}

/// How recursion requests are answered.
#[derive(Clone, Copy)]
pub enum RecursionResolver<'a, P, O, Src> {
    /// Always run the body of the requested call.
    Recurse,
    /// Bodies at levels below `level` recurse normally; requests issued by a
    /// body running at `level` are answered by the oracle, so no body ever
    /// runs deeper than `level`.
    OracleAtLevel {
        level: u64,
        oracle: &'a dyn Oracle<P, O, Src>,
    },
}

/// Cap on recursion depth; trips a distinguishable error instead of letting
/// a scheme that fails to terminate loop forever.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TerminationGuard {
    max_depth: u64,
}

impl TerminationGuard {
    pub const DEFAULT_MAX_DEPTH: u64 = 1_000_000;

    /// Panics if `max_depth` is zero.
    pub fn new(max_depth: u64) -> Self {
        assert!(max_depth >= 1, "guard needs max_depth >= 1");
        Self { max_depth }
    }

    pub fn max_depth(&self) -> u64 {
        self.max_depth
    }
}

impl Default for TerminationGuard {
    fn default() -> Self {
        Self {
            max_depth: Self::DEFAULT_MAX_DEPTH,
        }
    }
}

/// What a run did: how deep it went and how much randomness it spent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunTrace {
    /// Supremum of recursion levels entered; 0 when no recursive call ran.
    pub max_level: u64,
    /// Uniform 64-bit words drawn during the run.
    pub uniform_draws: u64,
    /// Hidden-bias coin flips taken during the run.
    pub coin_flips: u64,
}

/// Run a scheme to completion with full recursion.
pub fn run<S: PrsSpec>(
    spec: &S,
    param: S::Param,
    src: &mut S::Src,
    guard: TerminationGuard,
) -> Result<(S::Output, RunTrace), EngineError> {
    execute(spec, param, RecursionResolver::Recurse, src, guard)
}

/// Run a scheme with recursion cut off at level `n`: bodies at levels below
/// `n` recurse normally, and every request issued by a level-`n` body is
/// answered by a fresh oracle draw. `max_level` never exceeds `n`.
pub fn run_truncated<S: PrsSpec>(
    spec: &S,
    param: S::Param,
    n: u64,
    oracle: &dyn Oracle<S::Param, S::Output, S::Src>,
    src: &mut S::Src,
    guard: TerminationGuard,
) -> Result<(S::Output, RunTrace), EngineError> {
    execute(
        spec,
        param,
        RecursionResolver::OracleAtLevel { level: n, oracle },
        src,
        guard,
    )
}

/// Result of running the full and the truncated scheme on one shared
/// randomness stream.
#[derive(Debug, Clone, Copy)]
pub struct CoupledRun<O> {
    /// Output of the fully recursive run.
    pub x_full: O,
    /// Output of the run truncated at level `n`.
    pub y_n: O,
    /// Deepest level the full run entered.
    pub t: u64,
}

/// Run the scheme twice on identical randomness: once fully recursive, once
/// truncated at level `n` with oracle answers.
///
/// `make_src` must build the same source state on each call (same seed);
/// the two runs then consume the same stream. Whenever the full run's depth
/// `t` satisfies `t <= n`, the truncated run never consults the oracle and
/// replays the full run draw for draw, so the outputs are equal by
/// construction, not merely in distribution.
pub fn coupled_compare<S: PrsSpec>(
    spec: &S,
    param: S::Param,
    n: u64,
    oracle: &dyn Oracle<S::Param, S::Output, S::Src>,
    guard: TerminationGuard,
    make_src: impl Fn() -> S::Src,
) -> Result<CoupledRun<S::Output>, EngineError> {
    let mut src_full = make_src();
    let (x_full, trace) = run(spec, param.clone(), &mut src_full, guard)?;
    let mut src_trunc = make_src();
    let (y_n, _) = run_truncated(spec, param, n, oracle, &mut src_trunc, guard)?;
    Ok(CoupledRun {
        x_full,
        y_n,
        t: trace.max_level,
    })
}

fn execute<S: PrsSpec>(
    spec: &S,
    param: S::Param,
    resolver: RecursionResolver<'_, S::Param, S::Output, S::Src>,
    src: &mut S::Src,
    guard: TerminationGuard,
) -> Result<(S::Output, RunTrace), EngineError> {
    let draws_before = src.uniform_draws();
    let flips_before = src.coin_flips();

    // stack[k] is the pending continuation of the body running at level k;
    // the body currently stepping runs at level stack.len().
    let mut stack: Vec<Continuation<S::Param, S::Output, S::Src>> = Vec::new();
    let mut max_level: u64 = 0;
    let mut step = spec.body(&param, src);

    let (output, max_level) = loop {
        match step {
            Step::Done(out) => match stack.pop() {
                Some(cont) => step = cont(out, src),
                None => break (out, max_level),
            },
            Step::Fail(err) => return Err(err),
            Step::Recurse { param, then } => {
                let level = stack.len() as u64;
                match resolver {
                    RecursionResolver::OracleAtLevel { level: n, oracle }
                        if level >= n =>
                    {
                        // The requesting body runs at the cutoff level; the
                        // oracle supplies the child's output and no deeper
                        // body ever executes.
                        let answer = oracle.draw(&param, src)?;
                        step = then(answer, src);
                    }
                    _ => {
                        let child_level = level + 1;
                        if child_level > guard.max_depth {
                            return Err(EngineError::DepthExceeded {
                                level: child_level,
                                max_depth: guard.max_depth,
                            });
                        }
                        stack.push(then);
                        max_level = max_level.max(child_level);
                        step = spec.body(&param, src);
                    }
                }
            }
        }
    };

    let trace = RunTrace {
        max_level,
        uniform_draws: src.uniform_draws() - draws_before,
        coin_flips: src.coin_flips() - flips_before,
    };
    Ok((output, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::UniformSource;

    /// Immediately returns its parameter.
    struct Constant;
    impl PrsSpec for Constant {
        type Param = u64;
        type Output = u64;
        type Src = UniformSource;
        fn body(&self, param: &u64, _src: &mut UniformSource) -> Step<u64, u64, UniformSource> {
            Step::Done(*param)
        }
    }

    /// Recurses down to zero, adding one on the way back up.
    struct Countdown;
    impl PrsSpec for Countdown {
        type Param = u64;
        type Output = u64;
        type Src = UniformSource;
        fn body(&self, param: &u64, _src: &mut UniformSource) -> Step<u64, u64, UniformSource> {
            if *param == 0 {
                Step::Done(0)
            } else {
                Step::recurse_with(*param - 1, |y, _| Step::Done(y + 1))
            }
        }
    }

    /// Never terminates on its own.
    struct Forever;
    impl PrsSpec for Forever {
        type Param = ();
        type Output = u64;
        type Src = UniformSource;
        fn body(&self, _: &(), _: &mut UniformSource) -> Step<(), u64, UniformSource> {
            Step::recurse(())
        }
    }

    /// Issues two sequential recursive requests from one body, then sums.
    struct TwoRequests;
    impl PrsSpec for TwoRequests {
        type Param = u64;
        type Output = u64;
        type Src = UniformSource;
        fn body(&self, param: &u64, _src: &mut UniformSource) -> Step<u64, u64, UniformSource> {
            if *param == 0 {
                Step::Done(1)
            } else {
                let remaining = *param - 1;
                Step::recurse_with(remaining, move |a, _| {
                    Step::recurse_with(remaining, move |b, _| Step::Done(a + b))
                })
            }
        }
    }

    fn src() -> UniformSource {
        UniformSource::new(1)
    }

    #[test]
    fn constant_spec_runs_at_level_zero() {
        let (out, trace) = run(&Constant, 7, &mut src(), TerminationGuard::default()).unwrap();
        assert_eq!(out, 7);
        assert_eq!(trace.max_level, 0);
        assert_eq!(trace.uniform_draws, 0);
    }

    #[test]
    fn countdown_tracks_depth_and_output() {
        let (out, trace) = run(&Countdown, 5, &mut src(), TerminationGuard::default()).unwrap();
        assert_eq!(out, 5);
        assert_eq!(trace.max_level, 5);
    }

    #[test]
    fn guard_trips_on_runaway_recursion() {
        let err = run(&Forever, (), &mut src(), TerminationGuard::new(100)).unwrap_err();
        match err {
            EngineError::DepthExceeded { level, max_depth } => {
                assert_eq!(level, 101);
                assert_eq!(max_depth, 100);
            }
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn guard_exactly_at_needed_depth_passes() {
        let (out, trace) = run(&Countdown, 100, &mut src(), TerminationGuard::new(100)).unwrap();
        assert_eq!(out, 100);
        assert_eq!(trace.max_level, 100);
        assert!(run(&Countdown, 101, &mut src(), TerminationGuard::new(100)).is_err());
    }

    #[test]
    fn oracle_at_level_zero_answers_every_request() {
        let oracle = |_: &(), _: &mut UniformSource| Ok(42u64);
        let (out, trace) = run_truncated(
            &Forever,
            (),
            0,
            &oracle,
            &mut src(),
            TerminationGuard::default(),
        )
        .unwrap();
        assert_eq!(out, 42);
        assert_eq!(trace.max_level, 0);
    }

    #[test]
    fn truncation_caps_max_level() {
        let oracle = |p: &u64, _: &mut UniformSource| Ok(*p);
        for n in [0u64, 1, 2, 3] {
            let (_, trace) = run_truncated(
                &Countdown,
                10,
                n,
                &oracle,
                &mut src(),
                TerminationGuard::default(),
            )
            .unwrap();
            assert_eq!(trace.max_level, n);
        }
    }

    #[test]
    fn deep_enough_truncation_equals_full_run() {
        let oracle = |p: &u64, _: &mut UniformSource| Ok(*p);
        let (full, _) = run(&Countdown, 6, &mut src(), TerminationGuard::default()).unwrap();
        let (trunc, trace) = run_truncated(
            &Countdown,
            6,
            10,
            &oracle,
            &mut src(),
            TerminationGuard::default(),
        )
        .unwrap();
        assert_eq!(full, trunc);
        assert_eq!(trace.max_level, 6);
    }

    #[test]
    fn oracle_errors_propagate() {
        let oracle = |_: &(), _: &mut UniformSource| {
            Err::<u64, _>(EngineError::OracleUnavailable("no such target".into()))
        };
        let err = run_truncated(
            &Forever,
            (),
            0,
            &oracle,
            &mut src(),
            TerminationGuard::default(),
        )
        .unwrap_err();
        assert!(matches!(err, EngineError::OracleUnavailable(_)));
    }

    #[test]
    fn sequential_requests_share_their_callers_level() {
        // Each body spawns two children; depth equals param, not 2*param.
        let (out, trace) = run(&TwoRequests, 3, &mut src(), TerminationGuard::default()).unwrap();
        assert_eq!(out, 8); // 2^3 leaves
        assert_eq!(trace.max_level, 3);
    }

    #[test]
    fn truncation_answers_all_requests_of_the_cutoff_body() {
        // At n = 1 the level-1 bodies issue two requests each; both must be
        // oracle-answered (output 5 each), so output = 5 + 5 at level 0 roots.
        let oracle = |_: &u64, _: &mut UniformSource| Ok(5u64);
        let (out, trace) = run_truncated(
            &TwoRequests,
            2,
            1,
            &oracle,
            &mut src(),
            TerminationGuard::default(),
        )
        .unwrap();
        assert_eq!(out, 20); // two level-1 children, each 5 + 5
        assert_eq!(trace.max_level, 1);
    }

    #[test]
    fn coupled_compare_agrees_when_deep_enough() {
        let oracle = |p: &u64, _: &mut UniformSource| Ok(*p);
        let coupled = coupled_compare(
            &Countdown,
            4,
            10,
            &oracle,
            TerminationGuard::default(),
            || UniformSource::new(33),
        )
        .unwrap();
        assert_eq!(coupled.t, 4);
        assert_eq!(coupled.x_full, coupled.y_n);
    }

    #[test]
    fn failure_step_aborts() {
        struct Fails;
        impl PrsSpec for Fails {
            type Param = ();
            type Output = ();
            type Src = UniformSource;
            fn body(&self, _: &(), _: &mut UniformSource) -> Step<(), (), UniformSource> {
                Step::Fail(EngineError::OracleUnavailable("boom".into()))
            }
        }
        assert!(run(&Fails, (), &mut src(), TerminationGuard::default()).is_err());
    }

    #[test]
    fn trace_counts_draws_made_inside_run_only() {
        struct DrawsOne;
        impl PrsSpec for DrawsOne {
            type Param = u64;
            type Output = u64;
            type Src = UniformSource;
            fn body(&self, param: &u64, src: &mut UniformSource) -> Step<u64, u64, UniformSource> {
                let _ = src.next_bits();
                if *param == 0 {
                    Step::Done(0)
                } else {
                    Step::recurse(*param - 1)
                }
            }
        }
        let mut s = src();
        let _ = s.next_bits(); // pre-existing consumption must not count
        let (_, trace) = run(&DrawsOne, 3, &mut s, TerminationGuard::default()).unwrap();
        assert_eq!(trace.uniform_draws, 4);
    }
}
